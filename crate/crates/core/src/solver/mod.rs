//! Exact weighted partial MaxSAT solving.
//!
//! Engines implement [`MaxSatEngine`] and are looked up by name in an
//! [`EngineRegistry`]. Two engines ship by default:
//!
//! - `branch-and-bound`: depth-first search over partial assignments with unit
//!   propagation on the hard clauses, bounded by the weight of soft clauses
//!   already falsified. Variables are branched in ascending index order, true
//!   first, so the returned model is reproducible.
//! - `linear-sat-unsat`: relaxes every soft clause with a selector variable and
//!   repeatedly asks a CDCL solver for a model strictly cheaper than the
//!   incumbent, until the query becomes unsatisfiable.

mod bnb;
mod cdcl;
mod linear;
mod verify;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::wcnf::{Assignment, WcnfFormula};

pub use bnb::BranchAndBound;
pub use linear::LinearSatUnsat;
pub use verify::{sat_path_check, verify_candidate, SatPathCheck, Verdict, VerifyError};

/// Default per-solve budget.
pub const DEFAULT_SOLVE_BUDGET: Duration = Duration::from_secs(60);

#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum SolverError {
    #[error("unknown engine '{0}'")]
    UnknownEngine(String),
    #[error("time budget must be positive")]
    ZeroBudget,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum EngineKind {
    #[default]
    BranchAndBound,
    LinearSatUnsat,
}

impl EngineKind {
    pub fn name(self) -> &'static str {
        match self {
            EngineKind::BranchAndBound => "branch-and-bound",
            EngineKind::LinearSatUnsat => "linear-sat-unsat",
        }
    }
}

impl fmt::Display for EngineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EngineKind {
    type Err = SolverError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "branch-and-bound" | "bnb" => Ok(EngineKind::BranchAndBound),
            "linear-sat-unsat" | "linear" => Ok(EngineKind::LinearSatUnsat),
            other => Err(SolverError::UnknownEngine(other.to_string())),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SolverConfig {
    pub time_budget: Duration,
    pub engine: EngineKind,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            time_budget: DEFAULT_SOLVE_BUDGET,
            engine: EngineKind::default(),
        }
    }
}

impl SolverConfig {
    pub fn with_engine(engine: EngineKind) -> Self {
        SolverConfig {
            engine,
            ..Default::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SolveOutcome {
    Optimal { cost: u64, model: Assignment },
    Unsat,
    TimedOut { best_cost_so_far: Option<u64> },
}

impl SolveOutcome {
    pub fn cost(&self) -> Option<u64> {
        match self {
            SolveOutcome::Optimal { cost, .. } => Some(*cost),
            _ => None,
        }
    }
}

/// Wall-clock cutoff shared by the engines.
#[derive(Clone, Copy, Debug)]
pub struct Deadline(Instant);

impl Deadline {
    pub fn after(budget: Duration) -> Self {
        Deadline(Instant::now() + budget)
    }

    pub fn expired(&self) -> bool {
        Instant::now() >= self.0
    }
}

pub trait MaxSatEngine: Send + Sync {
    fn name(&self) -> &'static str;

    /// Must be exact: an `Optimal` cost is the minimum over all models of the
    /// hard clauses, and the model has exactly `formula.num_vars()` values.
    fn solve(&self, formula: &WcnfFormula, deadline: Deadline) -> SolveOutcome;
}

#[derive(Clone, Default)]
pub struct EngineRegistry {
    engines: BTreeMap<&'static str, Arc<dyn MaxSatEngine>>,
}

impl EngineRegistry {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn with_defaults() -> Self {
        let mut r = Self::empty();
        r.register(Arc::new(BranchAndBound));
        r.register(Arc::new(LinearSatUnsat));
        r
    }

    pub fn register(&mut self, engine: Arc<dyn MaxSatEngine>) {
        self.engines.insert(engine.name(), engine);
    }

    pub fn get(&self, name: &str) -> Option<Arc<dyn MaxSatEngine>> {
        self.engines.get(name).cloned()
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.engines.keys().copied().collect()
    }
}

/// Solves with the engine selected by `config`.
pub fn solve(formula: &WcnfFormula, config: &SolverConfig) -> Result<SolveOutcome, SolverError> {
    if config.time_budget.is_zero() {
        return Err(SolverError::ZeroBudget);
    }
    solve_with(&EngineRegistry::with_defaults(), config.engine.name(), formula, config.time_budget)
}

/// Solves with a registry engine looked up by name.
pub fn solve_with(
    registry: &EngineRegistry,
    engine: &str,
    formula: &WcnfFormula,
    budget: Duration,
) -> Result<SolveOutcome, SolverError> {
    if budget.is_zero() {
        return Err(SolverError::ZeroBudget);
    }
    let e = registry
        .get(engine)
        .ok_or_else(|| SolverError::UnknownEngine(engine.to_string()))?;
    Ok(e.solve(formula, Deadline::after(budget)))
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::wcnf::{evaluate, parse_wdimacs, WcnfBuilder};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const EXAMPLE_ONE: &str = "p wcnf 3 4 5\n5 1 2 0\n5 -2 3 0\n1 -1 0\n3 -3 0\n";

    /// Exhaustive 2^n minimum; `None` if the hard part is unsatisfiable.
    pub(crate) fn brute_force_cost(f: &WcnfFormula) -> Option<u64> {
        let n = f.num_vars();
        assert!(n <= 20);
        let mut best: Option<u64> = None;
        for mask in 0u32..(1u32 << n) {
            let a = Assignment::new((0..n).map(|i| mask >> i & 1 == 1).collect());
            let r = evaluate(f, &a).unwrap();
            if r.hard_satisfied {
                best = Some(best.map_or(r.cost, |b: u64| b.min(r.cost)));
            }
        }
        best
    }

    pub(crate) fn random_formula(rng: &mut ChaCha8Rng, max_vars: u32, max_clauses: usize) -> WcnfFormula {
        let n = rng.gen_range(1..=max_vars);
        let m = rng.gen_range(0..=max_clauses);
        let mut b = WcnfBuilder::new(n);
        for _ in 0..m {
            let len = rng.gen_range(1..=3);
            let lits: Vec<i32> = (0..len)
                .map(|_| {
                    let v = rng.gen_range(1..=n) as i32;
                    if rng.gen_bool(0.5) { v } else { -v }
                })
                .collect();
            if rng.gen_bool(0.4) {
                b.add_hard(&lits);
            } else {
                b.add_soft(&lits, rng.gen_range(1..=5));
            }
        }
        b.build()
    }

    fn check_engine(engine: &dyn MaxSatEngine) {
        let f = parse_wdimacs(EXAMPLE_ONE).unwrap();
        match engine.solve(&f, Deadline::after(Duration::from_secs(5))) {
            SolveOutcome::Optimal { cost, model } => {
                assert_eq!(cost, 1);
                assert_eq!(model.values(), &[true, false, false]);
            }
            other => panic!("unexpected {other:?}"),
        }

        let mut b = WcnfBuilder::new(1);
        b.add_hard(&[1]).add_hard(&[-1]);
        assert_eq!(engine.solve(&b.build(), Deadline::after(Duration::from_secs(5))), SolveOutcome::Unsat);

        let mut b = WcnfBuilder::new(2);
        b.add_hard(&[1, 2]);
        assert_eq!(engine.solve(&b.build(), Deadline::after(Duration::from_secs(5))).cost(), Some(0));

        let mut b = WcnfBuilder::new(1);
        b.add_hard(&[]);
        assert_eq!(engine.solve(&b.build(), Deadline::after(Duration::from_secs(5))), SolveOutcome::Unsat);

        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..150 {
            let f = random_formula(&mut rng, 10, 30);
            let expected = brute_force_cost(&f);
            match engine.solve(&f, Deadline::after(Duration::from_secs(5))) {
                SolveOutcome::Optimal { cost, model } => {
                    assert_eq!(Some(cost), expected);
                    let r = evaluate(&f, &model).unwrap();
                    assert!(r.hard_satisfied);
                    assert_eq!(r.cost, cost);
                }
                SolveOutcome::Unsat => assert_eq!(expected, None),
                other => panic!("unexpected {other:?}"),
            }
        }
    }

    #[test]
    fn branch_and_bound_is_exact() {
        check_engine(&BranchAndBound);
    }

    #[test]
    fn linear_search_is_exact() {
        check_engine(&LinearSatUnsat);
    }

    #[test]
    fn registry_lookup() {
        let r = EngineRegistry::with_defaults();
        assert_eq!(r.names(), vec!["branch-and-bound", "linear-sat-unsat"]);
        let f = parse_wdimacs(EXAMPLE_ONE).unwrap();
        let out = solve_with(&r, "linear-sat-unsat", &f, Duration::from_secs(1)).unwrap();
        assert_eq!(out.cost(), Some(1));
        assert!(matches!(
            solve_with(&r, "rc2", &f, Duration::from_secs(1)),
            Err(SolverError::UnknownEngine(_))
        ));
        assert_eq!("bnb".parse::<EngineKind>().unwrap(), EngineKind::BranchAndBound);
    }

    #[test]
    fn zero_budget_rejected() {
        let f = parse_wdimacs(EXAMPLE_ONE).unwrap();
        let cfg = SolverConfig {
            time_budget: Duration::ZERO,
            engine: EngineKind::BranchAndBound,
        };
        assert_eq!(solve(&f, &cfg), Err(SolverError::ZeroBudget));
    }

    #[test]
    fn expired_deadline_times_out() {
        // pigeonhole 9 into 8 keeps the search busy long enough
        let mut b = WcnfBuilder::new(72);
        let var = |p: u32, h: u32| (p * 8 + h + 1) as i32;
        for p in 0..9 {
            b.add_hard(&(0..8).map(|h| var(p, h)).collect::<Vec<_>>());
        }
        for h in 0..8 {
            for p in 0..9 {
                for q in p + 1..9 {
                    b.add_hard(&[-var(p, h), -var(q, h)]);
                }
            }
        }
        let f = b.build();
        let gone = Deadline::after(Duration::ZERO);
        assert!(matches!(BranchAndBound.solve(&f, gone), SolveOutcome::TimedOut { .. }));
        assert!(matches!(LinearSatUnsat.solve(&f, gone), SolveOutcome::TimedOut { .. }));
    }
}
