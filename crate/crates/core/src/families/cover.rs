use std::collections::BTreeSet;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{join_and, pick, Atom, Encoding, EncodingBuilder, FamilyError, FamilyId, PrefVariant, SemanticSolution, VarMap};
use crate::wcnf::Lit;

pub const ORACLE_MAX_SETS: usize = 20;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverSet {
    /// Sorted, non-empty.
    pub elements: Vec<usize>,
    /// p1 selection cost in 1..=5.
    pub weight: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverInstance {
    pub universe: usize,
    pub sets: Vec<CoverSet>,
    /// p2: per-set tier cost, 1 (cheap) or 3 (expensive).
    pub tier_costs: Vec<u64>,
    /// p2: sets the user would like to see chosen (penalty 2 if not).
    pub favored: Vec<usize>,
    /// p3: `(a, b, w)` penalty `w` if both `a` and `b` are chosen.
    pub conflicts: Vec<(usize, usize, u64)>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CoverPref {
    /// Penalty `weight` if `set` is chosen.
    Avoid { set: usize, weight: u64 },
    /// Penalty `weight` if `set` is not chosen.
    Favor { set: usize, weight: u64 },
    /// Penalty `weight` if both `a` and `b` are chosen.
    NotBoth { a: usize, b: usize, weight: u64 },
}

impl CoverPref {
    fn render(&self) -> String {
        match *self {
            CoverPref::Avoid { set, weight } => format!("Choosing S{set} costs {weight}."),
            CoverPref::Favor { set, weight } => {
                format!("S{set} should be chosen (penalty {weight} if it is not).")
            }
            CoverPref::NotBoth { a, b, weight } => {
                format!("S{a} and S{b} should not both be chosen (penalty {weight} if they are).")
            }
        }
    }
}

pub(crate) fn element_label(e: usize) -> String {
    format!("element {e} must be covered")
}

fn element_line(e: usize, covering: &[usize]) -> String {
    let names: Vec<String> = covering.iter().map(|s| format!("S{s}")).collect();
    format!("Element {e} must be covered by at least one of: {}.", names.join(", "))
}

pub(super) fn generate(universe: usize, sets: usize, rng: &mut ChaCha8Rng) -> Result<CoverInstance, FamilyError> {
    if universe == 0 || sets == 0 {
        return Err(FamilyError::InvalidSizeParams(format!(
            "setcover needs universe >= 1 and sets >= 1, got universe={universe}, sets={sets}"
        )));
    }
    let mut members: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); sets];
    // every element gets a home, so a cover always exists
    for e in 0..universe {
        members[rng.gen_range(0..sets)].insert(e);
    }
    for m in members.iter_mut() {
        for e in 0..universe {
            if rng.gen_bool(0.25) {
                m.insert(e);
            }
        }
        if m.is_empty() {
            m.insert(rng.gen_range(0..universe));
        }
    }
    let sets_vec: Vec<CoverSet> = members
        .into_iter()
        .map(|m| CoverSet {
            elements: m.into_iter().collect(),
            weight: rng.gen_range(1..=5),
        })
        .collect();
    let tier_costs = (0..sets).map(|_| if rng.gen_bool(0.5) { 3 } else { 1 }).collect();
    let mut order: Vec<usize> = (0..sets).collect();
    order.shuffle(rng);
    let mut favored: Vec<usize> = order[..(sets / 4).max(1)].to_vec();
    favored.sort();
    let mut conflicts = Vec::new();
    if sets >= 2 {
        let mut pairs = BTreeSet::new();
        for _ in 0..(sets / 3).max(1) {
            let a = rng.gen_range(0..sets);
            let mut b = rng.gen_range(0..sets - 1);
            if b >= a {
                b += 1;
            }
            let w = rng.gen_range(1..=3);
            if pairs.insert((a.min(b), a.max(b))) {
                conflicts.push((a.min(b), a.max(b), w));
            }
        }
        conflicts.sort();
    }
    Ok(CoverInstance {
        universe,
        sets: sets_vec,
        tier_costs,
        favored,
        conflicts,
    })
}

impl CoverInstance {
    /// Instance with the given sets and p1 weights, no other preference data.
    pub fn from_sets(universe: usize, sets: &[(&[usize], u64)]) -> Self {
        let sets: Vec<CoverSet> = sets
            .iter()
            .map(|&(els, weight)| {
                let mut elements = els.to_vec();
                elements.sort();
                elements.dedup();
                CoverSet { elements, weight }
            })
            .collect();
        CoverInstance {
            universe,
            tier_costs: vec![1; sets.len()],
            sets,
            favored: Vec::new(),
            conflicts: Vec::new(),
        }
    }

    pub fn preferences(&self, variant: PrefVariant) -> Vec<CoverPref> {
        let avoid = |set, weight| CoverPref::Avoid { set, weight };
        let k = self.sets.len();
        match variant {
            PrefVariant::None => (0..k).map(|s| avoid(s, 1)).collect(),
            PrefVariant::P1 => (0..k).map(|s| avoid(s, self.sets[s].weight)).collect(),
            PrefVariant::P2 => (0..k)
                .map(|s| avoid(s, self.tier_costs[s]))
                .chain(self.favored.iter().map(|&set| CoverPref::Favor { set, weight: 2 }))
                .collect(),
            PrefVariant::P3 => (0..k)
                .map(|s| avoid(s, 1))
                .chain(
                    self.conflicts
                        .iter()
                        .map(|&(a, b, weight)| CoverPref::NotBoth { a, b, weight }),
                )
                .collect(),
        }
    }

    fn covering(&self, e: usize) -> Vec<usize> {
        (0..self.sets.len())
            .filter(|&s| self.sets[s].elements.contains(&e))
            .collect()
    }

    pub(super) fn encode(&self, variant: PrefVariant) -> Encoding {
        let var = |s: usize| s as u32 + 1;
        let mut b = EncodingBuilder::new(self.sets.len() as u32);
        for e in 0..self.universe {
            let lits: Vec<Lit> = self.covering(e).into_iter().map(|s| Lit::pos(var(s))).collect();
            b.hard(&lits, &element_label(e));
        }
        for p in self.preferences(variant) {
            match p {
                CoverPref::Avoid { set, weight } => b.soft(&[Lit::neg(var(set))], weight),
                CoverPref::Favor { set, weight } => b.soft(&[Lit::pos(var(set))], weight),
                CoverPref::NotBoth { a, b: c, weight } => b.soft(&[Lit::neg(var(a)), Lit::neg(var(c))], weight),
            }
        }
        b.finish(VarMap {
            family: FamilyId::Setcover,
            atoms: (0..self.sets.len()).map(Atom::Set).collect(),
        })
    }

    pub(super) fn violations(&self, chosen: &BTreeSet<usize>) -> Result<Vec<String>, FamilyError> {
        if let Some(&s) = chosen.iter().find(|&&s| s >= self.sets.len()) {
            return Err(FamilyError::Malformed(format!("set S{s} does not exist")));
        }
        Ok((0..self.universe)
            .filter(|&e| !chosen.iter().any(|&s| self.sets[s].elements.contains(&e)))
            .map(element_label)
            .collect())
    }

    pub(super) fn cost(&self, variant: PrefVariant, chosen: &BTreeSet<usize>) -> u64 {
        self.preferences(variant)
            .iter()
            .map(|p| match *p {
                CoverPref::Avoid { set, weight } if chosen.contains(&set) => weight,
                CoverPref::Favor { set, weight } if !chosen.contains(&set) => weight,
                CoverPref::NotBoth { a, b, weight } if chosen.contains(&a) && chosen.contains(&b) => weight,
                _ => 0,
            })
            .sum()
    }

    pub(super) fn enumerate(&self, visit: &mut dyn FnMut(SemanticSolution)) -> Result<(), FamilyError> {
        let k = self.sets.len();
        if k > ORACLE_MAX_SETS {
            return Err(FamilyError::TooLargeForOracle(format!(
                "setcover with {k} sets (cap {ORACLE_MAX_SETS})"
            )));
        }
        for mask in 0u32..(1u32 << k) {
            let s = (0..k).filter(|&i| mask >> i & 1 == 1).collect();
            visit(SemanticSolution::CoverSelection(s));
        }
        Ok(())
    }

    pub(super) fn render(&self, variant: PrefVariant, seed: u64) -> String {
        let mut out = String::new();
        let last = self.universe - 1;
        let intro = pick(
            &[
                "A collection of {k} candidate sets (S0 to S{lk}) is available to cover the elements 0 to {last}.",
                "We must choose some of {k} sets, named S0 to S{lk}, so that every element from 0 to {last} is covered.",
                "I want to cover the elements 0 to {last} using some of the {k} sets S0 to S{lk}.",
            ],
            seed,
        )
        .replace("{k}", &self.sets.len().to_string())
        .replace("{lk}", &(self.sets.len() - 1).to_string())
        .replace("{last}", &last.to_string());
        let _ = writeln!(out, "{intro}");
        for (i, s) in self.sets.iter().enumerate() {
            let _ = writeln!(out, "- S{i} contains elements {}.", join_and(&s.elements));
        }
        let _ = writeln!(out, "Decision: for every set, decide whether it is chosen.");
        let _ = writeln!(out);
        let _ = writeln!(out, "Hard rules (must always hold):");
        for e in 0..self.universe {
            let _ = writeln!(out, "- {}", element_line(e, &self.covering(e)));
        }
        let _ = writeln!(out);
        let _ = writeln!(out, "Preferences (each unmet preference adds its penalty):");
        for p in self.preferences(variant) {
            let _ = writeln!(out, "- {}", p.render());
        }
        let _ = writeln!(out);
        let _ = writeln!(
            out,
            "Objective: minimise the total penalty while covering every element."
        );
        let _ = writeln!(
            out,
            "Required solution JSON schema: {{\"selected_sets\": [<chosen set numbers>]}}, for example {{\"selected_sets\": [0, 2]}}."
        );
        out
    }

    pub fn rendered_items(&self, variant: PrefVariant) -> Vec<String> {
        (0..self.universe)
            .map(|e| format!("- {}", element_line(e, &self.covering(e))))
            .chain(self.preferences(variant).iter().map(|p| format!("- {}", p.render())))
            .collect()
    }
}
