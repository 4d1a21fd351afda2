//! The three benchmark problem families: maximum independent set,
//! single-machine scheduling and weighted set cover.
//!
//! Every family provides a seeded instance generator, a canonical MaxSAT
//! encoding, a natural-language renderer, a semantic feasibility and cost
//! checker working directly on family-level answers, and an exhaustive
//! brute-force oracle that never looks at CNF.

pub mod cover;
pub mod mis;
pub mod scheduling;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::solver::{self, SolveOutcome, SolverConfig};
use crate::wcnf::{Assignment, Lit, WcnfFormula};

pub use cover::{CoverInstance, CoverSet};
pub use mis::MisInstance;
pub use scheduling::{motivation_fixture, DeadlinePref, SchedInstance};

#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum FamilyError {
    #[error("invalid size parameters: {0}")]
    InvalidSizeParams(String),
    #[error("instance too large for the brute-force oracle: {0}")]
    TooLargeForOracle(String),
    #[error("ambiguous decoding: {0}")]
    AmbiguousDecoding(String),
    #[error("malformed solution: {0}")]
    Malformed(String),
    #[error("canonical formula could not be solved: {0}")]
    Unsolvable(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FamilyId {
    Mis,
    Scheduling,
    Setcover,
}

impl FamilyId {
    pub const ALL: [FamilyId; 3] = [FamilyId::Mis, FamilyId::Scheduling, FamilyId::Setcover];

    pub fn as_str(self) -> &'static str {
        match self {
            FamilyId::Mis => "mis",
            FamilyId::Scheduling => "scheduling",
            FamilyId::Setcover => "setcover",
        }
    }

    fn tag(self) -> u64 {
        match self {
            FamilyId::Mis => 1,
            FamilyId::Scheduling => 2,
            FamilyId::Setcover => 3,
        }
    }
}

impl fmt::Display for FamilyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FamilyId {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mis" => Ok(FamilyId::Mis),
            "scheduling" => Ok(FamilyId::Scheduling),
            "setcover" => Ok(FamilyId::Setcover),
            other => Err(format!("unknown family '{other}'")),
        }
    }
}

/// Soft-clause configuration attached to an instance.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PrefVariant {
    None,
    P1,
    P2,
    P3,
}

impl PrefVariant {
    pub const ALL: [PrefVariant; 4] = [PrefVariant::None, PrefVariant::P1, PrefVariant::P2, PrefVariant::P3];

    pub fn as_str(self) -> &'static str {
        match self {
            PrefVariant::None => "none",
            PrefVariant::P1 => "p1",
            PrefVariant::P2 => "p2",
            PrefVariant::P3 => "p3",
        }
    }
}

impl fmt::Display for PrefVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PrefVariant {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PrefVariant::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| format!("unknown preference variant '{s}'"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum SizeParams {
    Mis { n: usize, edge_prob: f64 },
    Scheduling { jobs: usize, slots: usize, prec_prob: f64 },
    Setcover { universe: usize, sets: usize },
}

impl SizeParams {
    pub fn family(&self) -> FamilyId {
        match self {
            SizeParams::Mis { .. } => FamilyId::Mis,
            SizeParams::Scheduling { .. } => FamilyId::Scheduling,
            SizeParams::Setcover { .. } => FamilyId::Setcover,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Instance {
    Mis(MisInstance),
    Scheduling(SchedInstance),
    Setcover(CoverInstance),
}

/// A family-level answer, independent of any CNF encoding.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SemanticSolution {
    MisSelection(BTreeSet<usize>),
    Schedule(BTreeMap<usize, usize>),
    CoverSelection(BTreeSet<usize>),
}

#[derive(Error, Debug, Clone, PartialEq, Eq)]
#[error("{0}")]
pub struct SchemaError(pub String);

impl SemanticSolution {
    pub fn family(&self) -> FamilyId {
        match self {
            SemanticSolution::MisSelection(_) => FamilyId::Mis,
            SemanticSolution::Schedule(_) => FamilyId::Scheduling,
            SemanticSolution::CoverSelection(_) => FamilyId::Setcover,
        }
    }

    /// The answer JSON shown to models: `{"selected": [...]}`,
    /// `{"J0": slot, ...}` or `{"selected_sets": [...]}`.
    pub fn to_json(&self) -> Value {
        match self {
            SemanticSolution::MisSelection(v) => json!({ "selected": v }),
            SemanticSolution::Schedule(m) => Value::Object(
                m.iter()
                    .map(|(j, t)| (format!("J{j}"), json!(t)))
                    .collect(),
            ),
            SemanticSolution::CoverSelection(s) => json!({ "selected_sets": s }),
        }
    }

    pub fn from_json(family: FamilyId, value: &Value) -> Result<Self, SchemaError> {
        let obj = value
            .as_object()
            .ok_or_else(|| SchemaError("answer is not a JSON object".into()))?;
        match family {
            FamilyId::Mis => {
                let list = obj
                    .get("selected")
                    .ok_or_else(|| SchemaError("missing key \"selected\"".into()))?;
                Ok(SemanticSolution::MisSelection(index_list(list, 'v')?))
            }
            FamilyId::Setcover => {
                let list = obj
                    .get("selected_sets")
                    .ok_or_else(|| SchemaError("missing key \"selected_sets\"".into()))?;
                Ok(SemanticSolution::CoverSelection(index_list(list, 'S')?))
            }
            FamilyId::Scheduling => {
                let map = match obj.get("schedule").and_then(Value::as_object) {
                    Some(inner) => inner,
                    None => obj,
                };
                let mut starts = BTreeMap::new();
                for (k, v) in map {
                    let job = k
                        .strip_prefix('J')
                        .and_then(|d| d.parse::<usize>().ok())
                        .ok_or_else(|| SchemaError(format!("unexpected key \"{k}\"")))?;
                    let slot = v
                        .as_u64()
                        .ok_or_else(|| SchemaError(format!("start of {k} is not a non-negative integer")))?;
                    starts.insert(job, slot as usize);
                }
                if starts.is_empty() {
                    return Err(SchemaError("empty schedule".into()));
                }
                Ok(SemanticSolution::Schedule(starts))
            }
        }
    }
}

/// Accepts `[0, 2]` or `["S0", "S2"]` style lists.
fn index_list(value: &Value, prefix: char) -> Result<BTreeSet<usize>, SchemaError> {
    let arr = value
        .as_array()
        .ok_or_else(|| SchemaError("expected a JSON array".into()))?;
    arr.iter()
        .map(|x| match x {
            Value::Number(n) => n
                .as_u64()
                .map(|n| n as usize)
                .ok_or_else(|| SchemaError(format!("bad index {n}"))),
            Value::String(s) => s
                .trim_start_matches(prefix)
                .parse::<usize>()
                .map_err(|_| SchemaError(format!("bad index \"{s}\""))),
            other => Err(SchemaError(format!("bad index {other}"))),
        })
        .collect()
}

/// Semantic atom behind one CNF variable.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Atom {
    Vertex(usize),
    Start { job: usize, slot: usize },
    Set(usize),
}

/// Bijection between CNF variables (`i + 1`) and semantic atoms (`atoms[i]`).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VarMap {
    pub family: FamilyId,
    pub atoms: Vec<Atom>,
}

impl VarMap {
    pub fn num_vars(&self) -> u32 {
        self.atoms.len() as u32
    }

    pub fn var_of(&self, atom: Atom) -> Option<u32> {
        self.atoms.iter().position(|&a| a == atom).map(|i| i as u32 + 1)
    }

    pub fn atom_of(&self, var: u32) -> Option<Atom> {
        self.atoms.get(var as usize - 1).copied()
    }

    /// Truth value of every atom under a semantic solution.
    pub fn extend(&self, solution: &SemanticSolution) -> Assignment {
        let values = self
            .atoms
            .iter()
            .map(|atom| match (atom, solution) {
                (Atom::Vertex(v), SemanticSolution::MisSelection(s)) => s.contains(v),
                (Atom::Start { job, slot }, SemanticSolution::Schedule(m)) => m.get(job) == Some(slot),
                (Atom::Set(i), SemanticSolution::CoverSelection(s)) => s.contains(i),
                _ => false,
            })
            .collect();
        Assignment::new(values)
    }
}

/// A canonical encoding: formula, variable map and one label per hard
/// clause naming the constraint it belongs to.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Encoding {
    pub formula: WcnfFormula,
    pub varmap: VarMap,
    pub hard_labels: Vec<String>,
}

/// Builder shared by the family encoders, keeping labels aligned with clauses.
pub(crate) struct EncodingBuilder {
    builder: crate::wcnf::WcnfBuilder,
    hard_labels: Vec<String>,
}

impl EncodingBuilder {
    pub(crate) fn new(num_vars: u32) -> Self {
        EncodingBuilder {
            builder: crate::wcnf::WcnfBuilder::new(num_vars),
            hard_labels: Vec::new(),
        }
    }

    pub(crate) fn hard(&mut self, lits: &[Lit], label: &str) {
        self.builder.add_hard_clause(crate::wcnf::Clause::new(lits.iter().copied()));
        self.hard_labels.push(label.to_string());
    }

    pub(crate) fn soft(&mut self, lits: &[Lit], weight: u64) {
        self.builder.add_soft_clause(crate::wcnf::Clause::new(lits.iter().copied()), weight);
    }

    pub(crate) fn finish(self, varmap: VarMap) -> Encoding {
        let formula = self.builder.build();
        assert_eq!(formula.hard().len(), self.hard_labels.len());
        assert_eq!(formula.num_vars(), varmap.num_vars());
        Encoding {
            formula,
            varmap,
            hard_labels: self.hard_labels,
        }
    }
}

impl Instance {
    pub fn family(&self) -> FamilyId {
        match self {
            Instance::Mis(_) => FamilyId::Mis,
            Instance::Scheduling(_) => FamilyId::Scheduling,
            Instance::Setcover(_) => FamilyId::Setcover,
        }
    }

    pub fn encode(&self, variant: PrefVariant) -> Encoding {
        match self {
            Instance::Mis(i) => i.encode(variant),
            Instance::Scheduling(i) => i.encode(variant),
            Instance::Setcover(i) => i.encode(variant),
        }
    }

    pub fn render_description(&self, variant: PrefVariant, seed: u64) -> String {
        match self {
            Instance::Mis(i) => i.render(variant, seed),
            Instance::Scheduling(i) => i.render(variant, seed),
            Instance::Setcover(i) => i.render(variant, seed),
        }
    }

    /// `(feasible, violated hard constraints)`; `Malformed` when the
    /// solution does not fit the instance shape.
    pub fn check_feasible(&self, solution: &SemanticSolution) -> Result<(bool, Vec<String>), FamilyError> {
        let violations = match (self, solution) {
            (Instance::Mis(i), SemanticSolution::MisSelection(s)) => i.violations(s)?,
            (Instance::Scheduling(i), SemanticSolution::Schedule(m)) => i.violations(m)?,
            (Instance::Setcover(i), SemanticSolution::CoverSelection(s)) => i.violations(s)?,
            _ => {
                return Err(FamilyError::Malformed(format!(
                    "expected a {} answer",
                    self.family()
                )))
            }
        };
        Ok((violations.is_empty(), violations))
    }

    /// Total penalty of unmet preferences. Only meaningful for solutions
    /// that pass [`Instance::check_feasible`].
    pub fn solution_cost(&self, variant: PrefVariant, solution: &SemanticSolution) -> Result<u64, FamilyError> {
        match (self, solution) {
            (Instance::Mis(i), SemanticSolution::MisSelection(s)) => Ok(i.cost(variant, s)),
            (Instance::Scheduling(i), SemanticSolution::Schedule(m)) => Ok(i.cost(variant, m)),
            (Instance::Setcover(i), SemanticSolution::CoverSelection(s)) => Ok(i.cost(variant, s)),
            _ => Err(FamilyError::Malformed(format!("expected a {} answer", self.family()))),
        }
    }

    pub fn brute_force_optimum(&self, variant: PrefVariant) -> Result<u64, FamilyError> {
        self.brute_force_optima(variant).map(|(c, _)| c)
    }

    /// Optimum and every optimal solution, by exhaustive enumeration.
    pub fn brute_force_optima(&self, variant: PrefVariant) -> Result<(u64, Vec<SemanticSolution>), FamilyError> {
        let mut best: Option<u64> = None;
        let mut optima = Vec::new();
        let mut visit = |s: SemanticSolution| {
            let (ok, _) = self.check_feasible(&s).expect("enumerated solutions are well-formed");
            if !ok {
                return;
            }
            let c = self.solution_cost(variant, &s).expect("shape checked");
            match best {
                Some(b) if c > b => {}
                Some(b) if c == b => optima.push(s),
                _ => {
                    best = Some(c);
                    optima.clear();
                    optima.push(s);
                }
            }
        };
        match self {
            Instance::Mis(i) => i.enumerate(&mut visit)?,
            Instance::Scheduling(i) => i.enumerate(&mut visit)?,
            Instance::Setcover(i) => i.enumerate(&mut visit)?,
        }
        best.map(|b| (b, optima))
            .ok_or_else(|| FamilyError::Unsolvable("no feasible solution exists".into()))
    }
}

pub fn generate_instance(params: &SizeParams, seed: u64) -> Result<Instance, FamilyError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match *params {
        SizeParams::Mis { n, edge_prob } => mis::generate(n, edge_prob, &mut rng).map(Instance::Mis),
        SizeParams::Scheduling { jobs, slots, prec_prob } => {
            scheduling::generate(jobs, slots, prec_prob, &mut rng).map(Instance::Scheduling)
        }
        SizeParams::Setcover { universe, sets } => cover::generate(universe, sets, &mut rng).map(Instance::Setcover),
    }
}

/// Inverse of an encoding's variable map. The model may carry extra
/// (auxiliary) variables beyond the map.
pub fn decode_model(varmap: &VarMap, model: &Assignment) -> Result<SemanticSolution, FamilyError> {
    if model.num_vars() < varmap.atoms.len() {
        return Err(FamilyError::AmbiguousDecoding(format!(
            "model has {} variables, map needs {}",
            model.num_vars(),
            varmap.atoms.len()
        )));
    }
    let truth = |i: usize| model.values()[i];
    match varmap.family {
        FamilyId::Mis => Ok(SemanticSolution::MisSelection(
            varmap
                .atoms
                .iter()
                .enumerate()
                .filter_map(|(i, a)| match a {
                    Atom::Vertex(v) if truth(i) => Some(*v),
                    _ => None,
                })
                .collect(),
        )),
        FamilyId::Setcover => Ok(SemanticSolution::CoverSelection(
            varmap
                .atoms
                .iter()
                .enumerate()
                .filter_map(|(i, a)| match a {
                    Atom::Set(s) if truth(i) => Some(*s),
                    _ => None,
                })
                .collect(),
        )),
        FamilyId::Scheduling => {
            let mut starts: BTreeMap<usize, Option<usize>> = BTreeMap::new();
            for (i, a) in varmap.atoms.iter().enumerate() {
                if let Atom::Start { job, slot } = *a {
                    let entry = starts.entry(job).or_insert(None);
                    if truth(i) {
                        if let Some(prev) = entry {
                            return Err(FamilyError::AmbiguousDecoding(format!(
                                "J{job} starts at both {prev} and {slot}"
                            )));
                        }
                        *entry = Some(slot);
                    }
                }
            }
            starts
                .into_iter()
                .map(|(job, slot)| {
                    slot.map(|t| (job, t))
                        .ok_or_else(|| FamilyError::AmbiguousDecoding(format!("J{job} has no start")))
                })
                .collect::<Result<BTreeMap<_, _>, _>>()
                .map(SemanticSolution::Schedule)
        }
    }
}

/// A family instance together with its reference encoding and optimum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CanonicalInstance {
    pub family: FamilyId,
    pub instance: Instance,
    pub variant: PrefVariant,
    #[serde(with = "wdimacs_text")]
    pub formula: WcnfFormula,
    pub varmap: VarMap,
    pub hard_labels: Vec<String>,
    pub optimal_cost: u64,
    pub reference_solution: SemanticSolution,
    pub description: String,
}

impl CanonicalInstance {
    /// Encodes, solves and fills in the optimum and the lexicographically
    /// least optimal solution.
    pub fn build(
        instance: Instance,
        variant: PrefVariant,
        description_seed: u64,
        config: &SolverConfig,
    ) -> Result<Self, FamilyError> {
        let Encoding {
            formula,
            varmap,
            hard_labels,
        } = instance.encode(variant);
        let optimal_cost = match solve_checked(&formula, config)? {
            Some((cost, _)) => cost,
            None => return Err(FamilyError::Unsolvable("hard clauses are unsatisfiable".into())),
        };
        let reference_solution = lex_least_optimum(&formula, &varmap, optimal_cost, config)?;
        let description = instance.render_description(variant, description_seed);
        Ok(CanonicalInstance {
            family: instance.family(),
            instance,
            variant,
            formula,
            varmap,
            hard_labels,
            optimal_cost,
            reference_solution,
            description,
        })
    }

    /// Labels of the hard clauses a semantic solution violates, deduplicated,
    /// in clause order.
    pub fn violated_labels(&self, solution: &SemanticSolution) -> Vec<String> {
        let a = self.varmap.extend(solution);
        let mut out: Vec<String> = Vec::new();
        for (i, c) in self.formula.hard().iter().enumerate() {
            if !c.is_satisfied(&a) && !out.contains(&self.hard_labels[i]) {
                out.push(self.hard_labels[i].clone());
            }
        }
        out
    }
}

fn solve_checked(formula: &WcnfFormula, config: &SolverConfig) -> Result<Option<(u64, Assignment)>, FamilyError> {
    match solver::solve(formula, config).map_err(|e| FamilyError::Unsolvable(e.to_string()))? {
        SolveOutcome::Optimal { cost, model } => Ok(Some((cost, model))),
        SolveOutcome::Unsat => Ok(None),
        SolveOutcome::TimedOut { .. } => Err(FamilyError::Unsolvable("solver timed out".into())),
    }
}

/// Lexicographically least optimum under the documented key: sorted index
/// list for selections, slot vector by job index for schedules. Found by
/// fixing decisions one at a time and re-solving.
fn lex_least_optimum(
    formula: &WcnfFormula,
    varmap: &VarMap,
    optimum: u64,
    config: &SolverConfig,
) -> Result<SemanticSolution, FamilyError> {
    let attains = |units: &[Lit]| -> Result<Option<Assignment>, FamilyError> {
        Ok(solve_checked(&formula.with_hard_units(units), config)?
            .filter(|(c, _)| *c == optimum)
            .map(|(_, m)| m))
    };
    let mut fixed: Vec<Lit> = Vec::new();
    let model = match varmap.family {
        FamilyId::Scheduling => {
            let mut jobs: BTreeMap<usize, Vec<(usize, u32)>> = BTreeMap::new();
            for (i, a) in varmap.atoms.iter().enumerate() {
                if let Atom::Start { job, slot } = *a {
                    jobs.entry(job).or_default().push((slot, i as u32 + 1));
                }
            }
            let mut last = None;
            for (_, mut slots) in jobs {
                slots.sort();
                let mut found = false;
                for (_, var) in slots {
                    fixed.push(Lit::pos(var));
                    if let Some(m) = attains(&fixed)? {
                        last = Some(m);
                        found = true;
                        break;
                    }
                    fixed.pop();
                }
                if !found {
                    return Err(FamilyError::Unsolvable("optimum vanished while fixing".into()));
                }
            }
            match last {
                Some(m) => m,
                None => attains(&fixed)?.ok_or_else(|| FamilyError::Unsolvable("no optimum".into()))?,
            }
        }
        FamilyId::Mis | FamilyId::Setcover => {
            let mut items: Vec<(usize, u32)> = varmap
                .atoms
                .iter()
                .enumerate()
                .filter_map(|(i, a)| match *a {
                    Atom::Vertex(x) | Atom::Set(x) => Some((x, i as u32 + 1)),
                    Atom::Start { .. } => None,
                })
                .collect();
            items.sort();
            let mut pos = 0;
            loop {
                // can the list end here?
                let mut closing = fixed.clone();
                closing.extend(items[pos..].iter().map(|&(_, v)| Lit::neg(v)));
                if let Some(m) = attains(&closing)? {
                    break m;
                }
                let mut advanced = None;
                for next in pos..items.len() {
                    let mut trial = fixed.clone();
                    trial.extend(items[pos..next].iter().map(|&(_, v)| Lit::neg(v)));
                    trial.push(Lit::pos(items[next].1));
                    if attains(&trial)?.is_some() {
                        advanced = Some((trial, next + 1));
                        break;
                    }
                }
                match advanced {
                    Some((trial, next)) => {
                        fixed = trial;
                        pos = next;
                    }
                    None => return Err(FamilyError::Unsolvable("optimum vanished while fixing".into())),
                }
            }
        }
    };
    decode_model(varmap, &model)
}

mod wdimacs_text {
    use serde::{Deserialize, Deserializer, Serializer};

    use crate::wcnf::{parse_wdimacs, serialize_wdimacs, WcnfFormula};

    pub fn serialize<S: Serializer>(f: &WcnfFormula, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&serialize_wdimacs(f))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<WcnfFormula, D::Error> {
        let text = String::deserialize(d)?;
        parse_wdimacs(&text).map_err(serde::de::Error::custom)
    }
}

/// Deterministic 64-bit mixing (splitmix64 finalizer).
pub fn mix_seed(seed: u64, family: FamilyId, index: u64) -> u64 {
    let mut z = seed
        .wrapping_add(family.tag().wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(index.wrapping_mul(0xBF58_476D_1CE4_E5B9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Picks one of several phrasings by seed.
pub(crate) fn pick<'a>(options: &[&'a str], seed: u64) -> &'a str {
    options[(seed % options.len() as u64) as usize]
}

/// Formats `[1, 4, 7]` as `1, 4 and 7`.
pub(crate) fn join_and(items: &[usize]) -> String {
    match items {
        [] => String::new(),
        [x] => x.to_string(),
        [init @ .., last] => format!(
            "{} and {last}",
            init.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
        ),
    }
}
