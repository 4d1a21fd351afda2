use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{pick, Atom, Encoding, EncodingBuilder, FamilyError, FamilyId, PrefVariant, SemanticSolution, VarMap};
use crate::wcnf::Lit;

pub const ORACLE_MAX_JOBS: usize = 8;
pub const ORACLE_MAX_SLOTS: usize = 12;

/// Preferred latest start for one job, with its two-tier weight
/// (2 = high priority, 1 = medium).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeadlinePref {
    pub latest: usize,
    pub weight: u64,
}

/// Unit-length jobs on one machine over slots `0..slots`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchedInstance {
    pub jobs: usize,
    pub slots: usize,
    /// `(a, b)`: job `a` must start strictly before job `b`.
    pub precedences: Vec<(usize, usize)>,
    /// One entry per job; the weights are the p2 tiers.
    pub deadlines: Vec<DeadlinePref>,
    /// p3: per-job deadline weights in 1..=5.
    pub p3_weights: Vec<u64>,
}

/// The six-job instance used as the running example: slots 0..=7,
/// precedences J3<J1, J5<J0, J5<J4, J2<J1 and deadlines J0≤4, J1≤0, J2≤5
/// (high, weight 2), J3≤2, J4≤3, J5≤3 (medium, weight 1). Its p3 weights are
/// a fixed repository choice.
pub fn motivation_fixture() -> SchedInstance {
    let d = |latest, weight| DeadlinePref { latest, weight };
    SchedInstance {
        jobs: 6,
        slots: 8,
        precedences: vec![(3, 1), (5, 0), (5, 4), (2, 1)],
        deadlines: vec![d(4, 2), d(0, 2), d(5, 2), d(2, 1), d(3, 1), d(3, 1)],
        p3_weights: vec![4, 5, 3, 1, 2, 2],
    }
}

pub(crate) fn precedence_label(a: usize, b: usize) -> String {
    format!("J{a} must precede J{b}")
}

pub(crate) fn slot_label(t: usize) -> String {
    format!("at most one job may start in slot {t}")
}

pub(crate) fn once_label(j: usize) -> String {
    format!("J{j} must start exactly once")
}

pub(super) fn generate(jobs: usize, slots: usize, prec_prob: f64, rng: &mut ChaCha8Rng) -> Result<SchedInstance, FamilyError> {
    if jobs == 0 || slots < jobs || !(0.0..=1.0).contains(&prec_prob) {
        return Err(FamilyError::InvalidSizeParams(format!(
            "scheduling needs 1 <= jobs <= slots and prec_prob in [0, 1], got jobs={jobs}, slots={slots}, prec_prob={prec_prob}"
        )));
    }
    // forward edges of a random topological order keep the graph acyclic
    let mut order: Vec<usize> = (0..jobs).collect();
    order.shuffle(rng);
    let mut precedences = Vec::new();
    for i in 0..jobs {
        for k in i + 1..jobs {
            if rng.gen_bool(prec_prob) {
                precedences.push((order[i], order[k]));
            }
        }
    }
    precedences.sort();
    let deadlines = (0..jobs)
        .map(|_| DeadlinePref {
            latest: rng.gen_range(0..jobs),
            weight: if rng.gen_bool(0.5) { 2 } else { 1 },
        })
        .collect();
    let p3_weights = (0..jobs).map(|_| rng.gen_range(1..=5)).collect();
    Ok(SchedInstance {
        jobs,
        slots,
        precedences,
        deadlines,
        p3_weights,
    })
}

impl SchedInstance {
    /// `(job, latest, weight)` soft deadlines of a variant.
    pub fn preferences(&self, variant: PrefVariant) -> Vec<(usize, usize, u64)> {
        let all = |w: &dyn Fn(usize) -> u64| -> Vec<(usize, usize, u64)> {
            self.deadlines
                .iter()
                .enumerate()
                .map(|(j, d)| (j, d.latest, w(j)))
                .collect()
        };
        match variant {
            PrefVariant::None => Vec::new(),
            PrefVariant::P1 => all(&|_| 1),
            PrefVariant::P2 => all(&|j| self.deadlines[j].weight),
            PrefVariant::P3 => all(&|j| self.p3_weights[j]),
        }
    }

    fn var(&self, job: usize, slot: usize) -> u32 {
        (job * self.slots + slot) as u32 + 1
    }

    pub(super) fn encode(&self, variant: PrefVariant) -> Encoding {
        let s = |j, t| Lit::pos(self.var(j, t));
        let not_s = |j, t| Lit::neg(self.var(j, t));
        let mut b = EncodingBuilder::new((self.jobs * self.slots) as u32);
        for j in 0..self.jobs {
            let label = once_label(j);
            let alo: Vec<Lit> = (0..self.slots).map(|t| s(j, t)).collect();
            b.hard(&alo, &label);
            for t in 0..self.slots {
                for u in t + 1..self.slots {
                    b.hard(&[not_s(j, t), not_s(j, u)], &label);
                }
            }
        }
        for t in 0..self.slots {
            let label = slot_label(t);
            for a in 0..self.jobs {
                for c in a + 1..self.jobs {
                    b.hard(&[not_s(a, t), not_s(c, t)], &label);
                }
            }
        }
        for &(a, c) in &self.precedences {
            let label = precedence_label(a, c);
            for t in 0..self.slots {
                for u in 0..=t {
                    b.hard(&[not_s(a, t), not_s(c, u)], &label);
                }
            }
        }
        for (j, latest, weight) in self.preferences(variant) {
            let lits: Vec<Lit> = (0..=latest.min(self.slots - 1)).map(|t| s(j, t)).collect();
            b.soft(&lits, weight);
        }
        let atoms = (0..self.jobs)
            .flat_map(|job| (0..self.slots).map(move |slot| Atom::Start { job, slot }))
            .collect();
        b.finish(VarMap {
            family: FamilyId::Scheduling,
            atoms,
        })
    }

    pub(super) fn violations(&self, starts: &BTreeMap<usize, usize>) -> Result<Vec<String>, FamilyError> {
        if let Some(j) = (0..self.jobs).find(|j| !starts.contains_key(j)) {
            return Err(FamilyError::Malformed(format!("J{j} has no start slot")));
        }
        if let Some((&j, _)) = starts.iter().find(|(&j, _)| j >= self.jobs) {
            return Err(FamilyError::Malformed(format!("J{j} does not exist")));
        }
        if let Some((&j, &t)) = starts.iter().find(|(_, &t)| t >= self.slots) {
            return Err(FamilyError::Malformed(format!("J{j} starts at slot {t}, outside 0..{}", self.slots)));
        }
        let mut out = Vec::new();
        let mut used: BTreeMap<usize, usize> = BTreeMap::new();
        for &t in starts.values() {
            *used.entry(t).or_default() += 1;
        }
        out.extend(used.iter().filter(|(_, &c)| c > 1).map(|(&t, _)| slot_label(t)));
        out.extend(
            self.precedences
                .iter()
                .filter(|(a, b)| starts[a] >= starts[b])
                .map(|&(a, b)| precedence_label(a, b)),
        );
        Ok(out)
    }

    pub(super) fn cost(&self, variant: PrefVariant, starts: &BTreeMap<usize, usize>) -> u64 {
        self.preferences(variant)
            .iter()
            .filter(|(j, latest, _)| starts.get(j).is_some_and(|t| t > latest))
            .map(|(_, _, w)| w)
            .sum()
    }

    /// Every injective job→slot map respecting the precedences.
    pub(super) fn enumerate(&self, visit: &mut dyn FnMut(SemanticSolution)) -> Result<(), FamilyError> {
        if self.jobs > ORACLE_MAX_JOBS || self.slots > ORACLE_MAX_SLOTS {
            return Err(FamilyError::TooLargeForOracle(format!(
                "scheduling with {} jobs and {} slots (caps {ORACLE_MAX_JOBS}, {ORACLE_MAX_SLOTS})",
                self.jobs, self.slots
            )));
        }
        let mut starts = vec![usize::MAX; self.jobs];
        let mut used = vec![false; self.slots];
        self.place(0, &mut starts, &mut used, visit);
        Ok(())
    }

    fn place(&self, job: usize, starts: &mut [usize], used: &mut [bool], visit: &mut dyn FnMut(SemanticSolution)) {
        if job == self.jobs {
            visit(SemanticSolution::Schedule(starts.iter().copied().enumerate().collect()));
            return;
        }
        for t in 0..self.slots {
            if used[t] {
                continue;
            }
            let consistent = self.precedences.iter().all(|&(a, b)| {
                if a == job && b < job {
                    t < starts[b]
                } else if b == job && a < job {
                    starts[a] < t
                } else {
                    true
                }
            });
            if !consistent {
                continue;
            }
            starts[job] = t;
            used[t] = true;
            self.place(job + 1, starts, used, visit);
            used[t] = false;
        }
        starts[job] = usize::MAX;
    }

    pub(super) fn render(&self, variant: PrefVariant, seed: u64) -> String {
        let mut out = String::new();
        let last_job = self.jobs - 1;
        let last_slot = self.slots - 1;
        let intro = pick(
            &[
                "{J} computational jobs (J0 to J{lj}) must be scheduled on a single machine over discrete time slots 0 to {lt}.",
                "I need to run {J} jobs, J0 to J{lj}, on one machine that offers the time slots 0 to {lt}.",
                "Please plan {J} jobs (named J0 to J{lj}) on a single machine; the available time slots are 0 to {lt}.",
            ],
            seed,
        )
        .replace("{J}", &self.jobs.to_string())
        .replace("{lj}", &last_job.to_string())
        .replace("{lt}", &last_slot.to_string());
        let _ = writeln!(out, "{intro}");
        let _ = writeln!(out, "Decision: choose a start slot for every job.");
        let _ = writeln!(out);
        let _ = writeln!(out, "Hard rules (must always hold):");
        let _ = writeln!(out, "- Each job must start exactly once.");
        let _ = writeln!(out, "- At most one job may start in any time slot.");
        for &(a, b) in &self.precedences {
            let _ = writeln!(out, "- J{a} must be executed before J{b}.");
        }
        let _ = writeln!(out);
        let prefs = self.preferences(variant);
        if prefs.is_empty() {
            let _ = writeln!(
                out,
                "Preferences: none. Any schedule that respects the hard rules has penalty 0."
            );
        } else {
            let _ = writeln!(out, "Preferences (each missed deadline adds its penalty):");
            for (j, latest, w) in prefs {
                let _ = writeln!(out, "- {}", deadline_line(j, latest, w));
            }
        }
        let _ = writeln!(out);
        let _ = writeln!(
            out,
            "Objective: minimise the total penalty of missed deadlines, computed as the sum of their weights, while respecting every hard rule."
        );
        let example: Vec<String> = (0..self.jobs).map(|j| format!("\"J{j}\": <start slot>")).collect();
        let _ = writeln!(out, "Required solution JSON schema: {{{}}}.", example.join(", "));
        out
    }

    pub fn rendered_items(&self, variant: PrefVariant) -> Vec<String> {
        self.precedences
            .iter()
            .map(|&(a, b)| format!("- J{a} must be executed before J{b}."))
            .chain(
                self.preferences(variant)
                    .into_iter()
                    .map(|(j, l, w)| format!("- {}", deadline_line(j, l, w))),
            )
            .collect()
    }
}

fn deadline_line(job: usize, latest: usize, weight: u64) -> String {
    format!("J{job} should start at time {latest} or earlier (penalty {weight} if it starts later).")
}
