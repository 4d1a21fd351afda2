use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::families::{CanonicalInstance, FamilyError, SemanticSolution};
use crate::wcnf::evaluate;

/// Outcome of checking one candidate answer against a canonical instance.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict")]
pub enum Verdict {
    Accepted { cost: u64 },
    Infeasible { violations: Vec<String> },
    Suboptimal { cost: u64, optimum: u64 },
    Malformed { reason: String },
}

impl Verdict {
    pub fn is_accepted(&self) -> bool {
        matches!(self, Verdict::Accepted { .. })
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Verdict::Accepted { .. } => "Accepted",
            Verdict::Infeasible { .. } => "Infeasible",
            Verdict::Suboptimal { .. } => "Suboptimal",
            Verdict::Malformed { .. } => "Malformed",
        }
    }
}

#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum VerifyError {
    /// A feasible answer beat the stored optimum, so the canonical record is wrong.
    #[error("feasible solution with cost {cost} beats the stored optimum {optimum}")]
    CanonicalInconsistent { cost: u64, optimum: u64 },
}

/// Semantic check: feasibility and cost on the family instance, compared with
/// the stored optimum. Any optimum is accepted, not only the reference one.
pub fn verify_candidate(canonical: &CanonicalInstance, solution: &SemanticSolution) -> Result<Verdict, VerifyError> {
    let inst = &canonical.instance;
    let (feasible, violations) = match inst.check_feasible(solution) {
        Ok(r) => r,
        Err(FamilyError::Malformed(reason)) => return Ok(Verdict::Malformed { reason }),
        Err(e) => return Ok(Verdict::Malformed { reason: e.to_string() }),
    };
    if !feasible {
        return Ok(Verdict::Infeasible { violations });
    }
    let cost = match inst.solution_cost(canonical.variant, solution) {
        Ok(c) => c,
        Err(e) => return Ok(Verdict::Malformed { reason: e.to_string() }),
    };
    let optimum = canonical.optimal_cost;
    match cost.cmp(&optimum) {
        std::cmp::Ordering::Equal => Ok(Verdict::Accepted { cost }),
        std::cmp::Ordering::Greater => Ok(Verdict::Suboptimal { cost, optimum }),
        std::cmp::Ordering::Less => Err(VerifyError::CanonicalInconsistent { cost, optimum }),
    }
}

/// Result of the encoding-level check used to cross-check [`verify_candidate`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SatPathCheck {
    pub hard_satisfied: bool,
    pub violated_labels: Vec<String>,
    pub cost: u64,
}

/// Extends the solution to the canonical decision variables and evaluates the
/// canonical formula.
pub fn sat_path_check(canonical: &CanonicalInstance, solution: &SemanticSolution) -> SatPathCheck {
    let a = canonical.varmap.extend(solution);
    let r = evaluate(&canonical.formula, &a).expect("varmap covers every variable");
    SatPathCheck {
        hard_satisfied: r.hard_satisfied,
        violated_labels: canonical.violated_labels(solution),
        cost: r.cost,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::{motivation_fixture, Instance, PrefVariant};
    use crate::solver::SolverConfig;

    fn motivation() -> CanonicalInstance {
        CanonicalInstance::build(
            Instance::Scheduling(motivation_fixture()),
            PrefVariant::P2,
            0,
            &SolverConfig::default(),
        )
        .unwrap()
    }

    fn sched(starts: &[(usize, usize)]) -> SemanticSolution {
        SemanticSolution::Schedule(starts.iter().copied().collect())
    }

    #[test]
    fn motivation_verdicts() {
        let c = motivation();
        let wrong = sched(&[(0, 4), (1, 2), (2, 5), (3, 1), (4, 6), (5, 0)]);
        assert_eq!(
            verify_candidate(&c, &wrong).unwrap(),
            Verdict::Infeasible {
                violations: vec!["J2 must precede J1".into()]
            }
        );
        let right = sched(&[(0, 4), (1, 6), (2, 5), (3, 1), (4, 3), (5, 2)]);
        assert_eq!(verify_candidate(&c, &right).unwrap(), Verdict::Accepted { cost: 2 });
        let missing = sched(&[(0, 4), (1, 6), (2, 5), (3, 1), (4, 3)]);
        assert!(matches!(verify_candidate(&c, &missing).unwrap(), Verdict::Malformed { .. }));
        let late = sched(&[(0, 5), (1, 6), (2, 4), (3, 1), (4, 3), (5, 2)]);
        assert_eq!(
            verify_candidate(&c, &late).unwrap(),
            Verdict::Suboptimal { cost: 4, optimum: 2 }
        );
        let other = SemanticSolution::MisSelection([1].into());
        assert!(matches!(verify_candidate(&c, &other).unwrap(), Verdict::Malformed { .. }));
    }

    #[test]
    fn paths_agree_on_motivation() {
        let c = motivation();
        let right = sched(&[(0, 4), (1, 6), (2, 5), (3, 1), (4, 3), (5, 2)]);
        let s = sat_path_check(&c, &right);
        assert!(s.hard_satisfied);
        assert_eq!(s.cost, 2);
        let clash = sched(&[(0, 4), (1, 6), (2, 5), (3, 1), (4, 4), (5, 2)]);
        let s = sat_path_check(&c, &clash);
        assert!(!s.hard_satisfied);
        assert_eq!(s.violated_labels, vec!["at most one job may start in slot 4".to_string()]);
        assert_eq!(
            verify_candidate(&c, &clash).unwrap(),
            Verdict::Infeasible {
                violations: s.violated_labels
            }
        );
    }

    #[test]
    fn stale_optimum_is_reported() {
        let mut c = motivation();
        c.optimal_cost = 3;
        let right = sched(&[(0, 4), (1, 6), (2, 5), (3, 1), (4, 3), (5, 2)]);
        assert_eq!(
            verify_candidate(&c, &right),
            Err(VerifyError::CanonicalInconsistent { cost: 2, optimum: 3 })
        );
    }

    #[test]
    fn verdict_json_is_tagged() {
        let v = Verdict::Suboptimal { cost: 4, optimum: 2 };
        let text = serde_json::to_string(&v).unwrap();
        assert_eq!(text, r#"{"verdict":"Suboptimal","cost":4,"optimum":2}"#);
        assert_eq!(serde_json::from_str::<Verdict>(&text).unwrap(), v);
    }
}
