use crate::wcnf::{Assignment, WcnfFormula};

use super::cdcl::{code, Cdcl, Code, SatResult};
use super::{Deadline, MaxSatEngine, SolveOutcome};

/// SAT-UNSAT linear search: each soft clause `Cᵢ` becomes the hard clause
/// `Cᵢ ∨ rᵢ`, and after every model of cost `c` the constraint
/// `Σ wᵢ·rᵢ ≤ c - 1` is tightened until the solver reports UNSAT.
#[derive(Clone, Copy, Debug, Default)]
pub struct LinearSatUnsat;

impl MaxSatEngine for LinearSatUnsat {
    fn name(&self) -> &'static str {
        "linear-sat-unsat"
    }

    fn solve(&self, formula: &WcnfFormula, deadline: Deadline) -> SolveOutcome {
        let n = formula.num_vars() as usize;
        let m = formula.soft().len();
        let to_code = |l: crate::wcnf::Lit| code(l.var() as usize - 1, !l.is_positive());

        let mut clauses: Vec<Vec<Code>> = formula
            .hard()
            .iter()
            .map(|c| c.lits().iter().map(|&l| to_code(l)).collect())
            .collect();
        let mut selectors = Vec::with_capacity(m);
        let mut weights = Vec::with_capacity(m);
        for (i, s) in formula.soft().iter().enumerate() {
            let r = code(n + i, false);
            selectors.push(r);
            weights.push(s.weight);
            if !s.clause.is_tautology() {
                let mut c: Vec<Code> = s.clause.lits().iter().map(|&l| to_code(l)).collect();
                c.push(r);
                clauses.push(c);
            }
        }

        let mut sat = Cdcl::new(n + m, clauses, Some((selectors, weights)));
        let mut best: Option<(u64, Assignment)> = None;
        loop {
            match sat.solve(deadline) {
                SatResult::Sat(values) => {
                    let model = Assignment::new(values[..n].to_vec());
                    let cost = formula
                        .soft()
                        .iter()
                        .filter(|s| !s.clause.is_satisfied(&model))
                        .map(|s| s.weight)
                        .sum::<u64>();
                    debug_assert!(best.as_ref().is_none_or(|(b, _)| cost < *b));
                    best = Some((cost, model));
                    if cost == 0 || !sat.set_bound(cost - 1) {
                        break;
                    }
                }
                SatResult::Unsat => break,
                SatResult::Unknown => {
                    return SolveOutcome::TimedOut {
                        best_cost_so_far: best.map(|(c, _)| c),
                    }
                }
            }
        }
        match best {
            Some((cost, model)) => SolveOutcome::Optimal { cost, model },
            None => SolveOutcome::Unsat,
        }
    }
}
