use std::collections::BTreeSet;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{pick, Atom, Encoding, EncodingBuilder, FamilyError, FamilyId, PrefVariant, SemanticSolution, VarMap};
use crate::wcnf::Lit;

pub const ORACLE_MAX_VERTICES: usize = 20;

/// Undirected graph plus the preference data of every variant.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MisInstance {
    pub n: usize,
    /// `(u, v)` with `u < v`, sorted, no duplicates.
    pub edges: Vec<(usize, usize)>,
    /// p1: per-vertex selection weight in 1..=5.
    pub weights: Vec<u64>,
    /// p2: high-priority vertices (weight 3, others 1).
    pub high_priority: Vec<usize>,
    /// p3: vertices with an extra include (w=2) preference.
    pub include: Vec<usize>,
    /// p3: vertices with an exclude (w=1) preference.
    pub exclude: Vec<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MisPref {
    /// Penalty `weight` if `vertex` is not selected.
    Select { vertex: usize, weight: u64 },
    /// Penalty `weight` if `vertex` is selected.
    Avoid { vertex: usize, weight: u64 },
}

impl MisPref {
    fn render(&self) -> String {
        match *self {
            MisPref::Select { vertex, weight } => {
                format!("Vertex {vertex} should be selected (penalty {weight} if it is not).")
            }
            MisPref::Avoid { vertex, weight } => {
                format!("Vertex {vertex} should be left out (penalty {weight} if it is selected).")
            }
        }
    }
}

/// Name of the hard constraint for edge `(u, v)`.
pub(crate) fn edge_label(u: usize, v: usize) -> String {
    format!("vertices {u} and {v} must not both be selected")
}

fn edge_line(u: usize, v: usize) -> String {
    format!("Vertices {u} and {v} are connected, so they must not both be selected.")
}

pub(super) fn generate(n: usize, edge_prob: f64, rng: &mut ChaCha8Rng) -> Result<MisInstance, FamilyError> {
    if n == 0 || !(0.0..=1.0).contains(&edge_prob) {
        return Err(FamilyError::InvalidSizeParams(format!(
            "mis needs n >= 1 and edge_prob in [0, 1], got n={n}, edge_prob={edge_prob}"
        )));
    }
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.gen_bool(edge_prob) {
                edges.push((u, v));
            }
        }
    }
    let weights = (0..n).map(|_| rng.gen_range(1..=5)).collect();
    let high_priority = (0..n).filter(|_| rng.gen_bool(0.5)).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let k = (n / 3).max(2).min(n);
    let half = k.div_ceil(2);
    let mut include: Vec<usize> = order[..half].to_vec();
    let mut exclude: Vec<usize> = order[half..k].to_vec();
    include.sort();
    exclude.sort();
    Ok(MisInstance {
        n,
        edges,
        weights,
        high_priority,
        include,
        exclude,
    })
}

impl MisInstance {
    /// Instance with no variant-specific preference data beyond unit weights.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Self {
        let mut edges: Vec<(usize, usize)> = edges.iter().map(|&(a, b)| (a.min(b), a.max(b))).collect();
        edges.sort();
        edges.dedup();
        MisInstance {
            n,
            edges,
            weights: vec![1; n],
            high_priority: Vec::new(),
            include: Vec::new(),
            exclude: Vec::new(),
        }
    }

    pub fn preferences(&self, variant: PrefVariant) -> Vec<MisPref> {
        let select = |vertex, weight| MisPref::Select { vertex, weight };
        match variant {
            PrefVariant::None => (0..self.n).map(|v| select(v, 1)).collect(),
            PrefVariant::P1 => (0..self.n).map(|v| select(v, self.weights[v])).collect(),
            PrefVariant::P2 => (0..self.n)
                .map(|v| select(v, if self.high_priority.contains(&v) { 3 } else { 1 }))
                .collect(),
            PrefVariant::P3 => {
                let mut prefs: Vec<MisPref> = (0..self.n).map(|v| select(v, 1)).collect();
                prefs.extend(self.include.iter().map(|&v| select(v, 2)));
                prefs.extend(self.exclude.iter().map(|&vertex| MisPref::Avoid { vertex, weight: 1 }));
                prefs
            }
        }
    }

    pub(super) fn encode(&self, variant: PrefVariant) -> Encoding {
        let var = |v: usize| v as u32 + 1;
        let mut b = EncodingBuilder::new(self.n as u32);
        for &(u, v) in &self.edges {
            b.hard(&[Lit::neg(var(u)), Lit::neg(var(v))], &edge_label(u, v));
        }
        for p in self.preferences(variant) {
            match p {
                MisPref::Select { vertex, weight } => b.soft(&[Lit::pos(var(vertex))], weight),
                MisPref::Avoid { vertex, weight } => b.soft(&[Lit::neg(var(vertex))], weight),
            }
        }
        b.finish(VarMap {
            family: FamilyId::Mis,
            atoms: (0..self.n).map(Atom::Vertex).collect(),
        })
    }

    pub(super) fn violations(&self, selected: &BTreeSet<usize>) -> Result<Vec<String>, FamilyError> {
        if let Some(&v) = selected.iter().find(|&&v| v >= self.n) {
            return Err(FamilyError::Malformed(format!("vertex {v} does not exist")));
        }
        Ok(self
            .edges
            .iter()
            .filter(|(u, v)| selected.contains(u) && selected.contains(v))
            .map(|&(u, v)| edge_label(u, v))
            .collect())
    }

    pub(super) fn cost(&self, variant: PrefVariant, selected: &BTreeSet<usize>) -> u64 {
        self.preferences(variant)
            .iter()
            .map(|p| match *p {
                MisPref::Select { vertex, weight } if !selected.contains(&vertex) => weight,
                MisPref::Avoid { vertex, weight } if selected.contains(&vertex) => weight,
                _ => 0,
            })
            .sum()
    }

    pub(super) fn enumerate(&self, visit: &mut dyn FnMut(SemanticSolution)) -> Result<(), FamilyError> {
        if self.n > ORACLE_MAX_VERTICES {
            return Err(FamilyError::TooLargeForOracle(format!(
                "mis with {} vertices (cap {ORACLE_MAX_VERTICES})",
                self.n
            )));
        }
        for mask in 0u32..(1u32 << self.n) {
            let s = (0..self.n).filter(|&v| mask >> v & 1 == 1).collect();
            visit(SemanticSolution::MisSelection(s));
        }
        Ok(())
    }

    pub(super) fn render(&self, variant: PrefVariant, seed: u64) -> String {
        let mut out = String::new();
        let last = self.n.saturating_sub(1);
        let intro = pick(
            &[
                "We need to pick a group of nodes from a network of {n} nodes, numbered 0 to {last}.",
                "A network has {n} nodes, numbered 0 to {last}, and we want to choose some of them.",
                "I have a network of {n} nodes (numbered 0 to {last}) and need to decide which ones to select.",
            ],
            seed,
        );
        let _ = writeln!(out, "{}", intro.replace("{n}", &self.n.to_string()).replace("{last}", &last.to_string()));
        let _ = writeln!(out, "Decision: for every vertex, decide whether it is selected.");
        let _ = writeln!(out);
        let _ = writeln!(out, "Hard rules (must always hold):");
        if self.edges.is_empty() {
            let _ = writeln!(out, "- No two vertices are connected, so any selection is allowed.");
        }
        for &(u, v) in &self.edges {
            let _ = writeln!(out, "- {}", edge_line(u, v));
        }
        let _ = writeln!(out);
        let _ = writeln!(out, "Preferences (each unmet preference adds its penalty):");
        for p in self.preferences(variant) {
            let _ = writeln!(out, "- {}", p.render());
        }
        let _ = writeln!(out);
        let _ = writeln!(
            out,
            "Objective: minimise the total penalty of unmet preferences while respecting every hard rule."
        );
        let _ = writeln!(
            out,
            "Required solution JSON schema: {{\"selected\": [<selected vertex numbers>]}}, for example {{\"selected\": [0, 3]}}."
        );
        out
    }

    /// One line per hard constraint and preference, as rendered.
    pub fn rendered_items(&self, variant: PrefVariant) -> Vec<String> {
        self.edges
            .iter()
            .map(|&(u, v)| format!("- {}", edge_line(u, v)))
            .chain(self.preferences(variant).iter().map(|p| format!("- {}", p.render())))
            .collect()
    }
}
