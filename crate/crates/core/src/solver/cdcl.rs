//! Small CDCL SAT solver with one native pseudo-Boolean constraint
//! `Σ wᵢ·lᵢ ≤ bound`, enough for SAT-UNSAT linear search over relaxation
//! selectors. Two watched literals, first-UIP learning, VSIDS-style activity,
//! phase saving and geometric restarts.
//!
//! Literals are coded as `2·var + sign` with 0-based variables; sign 1 is
//! negation.

use super::Deadline;

pub(crate) type Code = u32;

pub(crate) fn code(var: usize, negated: bool) -> Code {
    (2 * var + usize::from(negated)) as Code
}

fn var_of(l: Code) -> usize {
    (l >> 1) as usize
}

#[derive(Debug)]
pub(crate) enum SatResult {
    Sat(Vec<bool>),
    Unsat,
    Unknown,
}

#[derive(Clone, Debug)]
enum Reason {
    Decision,
    Clause(usize),
    // explanation clause, implied literal first
    Explained(Vec<Code>),
}

struct WeightedAtMost {
    lits: Vec<Code>,
    weights: Vec<u64>,
    bound: u64,
    // weight of currently true literals
    sum: u64,
    // position in `lits` for each literal code
    slot: Vec<Option<usize>>,
}

pub(crate) struct Cdcl {
    clauses: Vec<Vec<Code>>,
    watches: Vec<Vec<usize>>,
    assigns: Vec<i8>,
    level: Vec<u32>,
    reason: Vec<Reason>,
    trail: Vec<Code>,
    trail_lim: Vec<usize>,
    qhead: usize,
    activity: Vec<f64>,
    var_inc: f64,
    phase: Vec<bool>,
    seen: Vec<bool>,
    pb: Option<WeightedAtMost>,
    ok: bool,
}

impl Cdcl {
    /// `pb` is `(literals, weights)`; its bound starts unconstrained.
    pub(crate) fn new(num_vars: usize, clauses: Vec<Vec<Code>>, pb: Option<(Vec<Code>, Vec<u64>)>) -> Self {
        let mut s = Cdcl {
            clauses: Vec::new(),
            watches: vec![Vec::new(); 2 * num_vars],
            assigns: vec![0; num_vars],
            level: vec![0; num_vars],
            reason: vec![Reason::Decision; num_vars],
            trail: Vec::with_capacity(num_vars),
            trail_lim: Vec::new(),
            qhead: 0,
            activity: vec![0.0; num_vars],
            var_inc: 1.0,
            phase: vec![false; num_vars],
            seen: vec![false; num_vars],
            pb: None,
            ok: true,
        };
        if let Some((lits, weights)) = pb {
            let mut slot = vec![None; 2 * num_vars];
            for (i, &l) in lits.iter().enumerate() {
                slot[l as usize] = Some(i);
            }
            s.pb = Some(WeightedAtMost {
                bound: weights.iter().sum(),
                lits,
                weights,
                sum: 0,
                slot,
            });
        }
        let mut units = Vec::new();
        for c in clauses {
            match c.len() {
                0 => s.ok = false,
                1 => units.push(c[0]),
                _ => {
                    let idx = s.clauses.len();
                    s.watches[c[0] as usize].push(idx);
                    s.watches[c[1] as usize].push(idx);
                    s.clauses.push(c);
                }
            }
        }
        for u in units {
            match s.lit_value(u) {
                1 => {}
                -1 => s.ok = false,
                _ => s.enqueue(u, Reason::Decision),
            }
        }
        if s.ok && s.propagate().is_some() {
            s.ok = false;
        }
        s
    }

    fn lit_value(&self, l: Code) -> i8 {
        let v = self.assigns[var_of(l)];
        if l & 1 == 1 {
            -v
        } else {
            v
        }
    }

    fn decision_level(&self) -> u32 {
        self.trail_lim.len() as u32
    }

    fn enqueue(&mut self, l: Code, reason: Reason) {
        let v = var_of(l);
        self.assigns[v] = if l & 1 == 1 { -1 } else { 1 };
        self.level[v] = self.decision_level();
        self.reason[v] = reason;
        self.trail.push(l);
        if let Some(pb) = &mut self.pb {
            if let Some(i) = pb.slot[l as usize] {
                pb.sum += pb.weights[i];
            }
        }
    }

    fn cancel_until(&mut self, lvl: u32) {
        if self.decision_level() <= lvl {
            return;
        }
        let start = self.trail_lim[lvl as usize];
        for i in (start..self.trail.len()).rev() {
            let l = self.trail[i];
            let v = var_of(l);
            self.phase[v] = l & 1 == 0;
            self.assigns[v] = 0;
            self.reason[v] = Reason::Decision;
            if let Some(pb) = &mut self.pb {
                if let Some(i) = pb.slot[l as usize] {
                    pb.sum -= pb.weights[i];
                }
            }
        }
        self.trail.truncate(start);
        self.trail_lim.truncate(lvl as usize);
        self.qhead = start;
    }

    /// Negations of the currently true constraint literals.
    fn pb_true_negations(&self) -> Vec<Code> {
        let pb = self.pb.as_ref().unwrap();
        pb.lits
            .iter()
            .filter(|&&l| self.lit_value(l) == 1)
            .map(|&l| l ^ 1)
            .collect()
    }

    /// Checks the weighted constraint; returns a conflict clause or enqueues
    /// implied negations.
    fn pb_propagate(&mut self) -> Option<Vec<Code>> {
        let (sum, bound) = self.pb.as_ref().map(|pb| (pb.sum, pb.bound))?;
        if sum > bound {
            return Some(self.pb_true_negations());
        }
        let pb = self.pb.as_ref().unwrap();
        let forced: Vec<Code> = pb
            .lits
            .iter()
            .zip(&pb.weights)
            .filter(|(&l, &w)| self.lit_value(l) == 0 && sum + w > bound)
            .map(|(&l, _)| l)
            .collect();
        if forced.is_empty() {
            return None;
        }
        let because = self.pb_true_negations();
        for l in forced {
            let mut expl = Vec::with_capacity(because.len() + 1);
            expl.push(l ^ 1);
            expl.extend_from_slice(&because);
            self.enqueue(l ^ 1, Reason::Explained(expl));
        }
        None
    }

    /// Returns the falsified clause on conflict.
    fn propagate(&mut self) -> Option<Vec<Code>> {
        while self.qhead < self.trail.len() {
            let p = self.trail[self.qhead];
            self.qhead += 1;
            let false_lit = p ^ 1;
            let watchers = std::mem::take(&mut self.watches[false_lit as usize]);
            let mut kept = Vec::with_capacity(watchers.len());
            let mut conflict = None;
            let mut i = 0;
            while i < watchers.len() {
                let ci = watchers[i];
                i += 1;
                if conflict.is_some() {
                    kept.push(ci);
                    continue;
                }
                {
                    let c = &mut self.clauses[ci];
                    if c[0] == false_lit {
                        c.swap(0, 1);
                    }
                }
                let first = self.clauses[ci][0];
                if self.lit_value(first) == 1 {
                    kept.push(ci);
                    continue;
                }
                let len = self.clauses[ci].len();
                let mut moved = false;
                for k in 2..len {
                    let l = self.clauses[ci][k];
                    if self.lit_value(l) != -1 {
                        self.clauses[ci].swap(1, k);
                        self.watches[l as usize].push(ci);
                        moved = true;
                        break;
                    }
                }
                if moved {
                    continue;
                }
                kept.push(ci);
                if self.lit_value(first) == -1 {
                    conflict = Some(self.clauses[ci].clone());
                } else {
                    self.enqueue(first, Reason::Clause(ci));
                }
            }
            self.watches[false_lit as usize] = kept;
            if conflict.is_some() {
                return conflict;
            }
            let is_pb_lit = self
                .pb
                .as_ref()
                .is_some_and(|pb| pb.slot[p as usize].is_some());
            if is_pb_lit {
                if let Some(c) = self.pb_propagate() {
                    return Some(c);
                }
            }
        }
        None
    }

    fn reason_lits(&self, v: usize) -> &[Code] {
        match &self.reason[v] {
            Reason::Clause(ci) => &self.clauses[*ci],
            Reason::Explained(lits) => lits,
            Reason::Decision => &[],
        }
    }

    fn bump(&mut self, v: usize) {
        self.activity[v] += self.var_inc;
        if self.activity[v] > 1e100 {
            for a in &mut self.activity {
                *a *= 1e-100;
            }
            self.var_inc *= 1e-100;
        }
    }

    /// First-UIP analysis; returns the learnt clause (asserting literal first)
    /// and the backjump level.
    fn analyze(&mut self, conflict: Vec<Code>) -> (Vec<Code>, u32) {
        let current = self.decision_level();
        let mut learnt: Vec<Code> = vec![0];
        let mut path = 0usize;
        let mut idx = self.trail.len();
        let mut reason: Vec<Code> = conflict;
        let mut skip_first = false;
        let uip;
        loop {
            for (j, &q) in reason.iter().enumerate() {
                if skip_first && j == 0 {
                    continue;
                }
                let v = var_of(q);
                if !self.seen[v] && self.level[v] > 0 {
                    self.seen[v] = true;
                    self.bump(v);
                    if self.level[v] >= current {
                        path += 1;
                    } else {
                        learnt.push(q);
                    }
                }
            }
            loop {
                idx -= 1;
                if self.seen[var_of(self.trail[idx])] {
                    break;
                }
            }
            let p = self.trail[idx];
            self.seen[var_of(p)] = false;
            path -= 1;
            if path == 0 {
                uip = p;
                break;
            }
            reason = self.reason_lits(var_of(p)).to_vec();
            skip_first = true;
        }
        learnt[0] = uip ^ 1;
        for &l in &learnt[1..] {
            self.seen[var_of(l)] = false;
        }
        let mut back = 0;
        if learnt.len() > 1 {
            let mut max_i = 1;
            for i in 2..learnt.len() {
                if self.level[var_of(learnt[i])] > self.level[var_of(learnt[max_i])] {
                    max_i = i;
                }
            }
            learnt.swap(1, max_i);
            back = self.level[var_of(learnt[1])];
        }
        self.var_inc *= 1.0 / 0.95;
        (learnt, back)
    }

    fn pick_branch(&self) -> Option<Code> {
        let mut best: Option<usize> = None;
        for v in 0..self.assigns.len() {
            if self.assigns[v] == 0 && best.is_none_or(|b| self.activity[v] > self.activity[b]) {
                best = Some(v);
            }
        }
        best.map(|v| code(v, !self.phase[v]))
    }

    /// Lowers the bound of the weighted constraint. Returns false if the
    /// problem became unsatisfiable at the root.
    pub(crate) fn set_bound(&mut self, bound: u64) -> bool {
        self.cancel_until(0);
        if !self.ok {
            return false;
        }
        if let Some(pb) = &mut self.pb {
            pb.bound = bound;
        }
        if self.pb_propagate().is_some() || self.propagate().is_some() {
            self.ok = false;
        }
        self.ok
    }

    pub(crate) fn solve(&mut self, deadline: Deadline) -> SatResult {
        if !self.ok {
            return SatResult::Unsat;
        }
        let mut conflicts: u64 = 0;
        let mut restart_limit = 100.0f64;
        let mut since_restart = 0u64;
        loop {
            if let Some(conflict) = self.propagate() {
                conflicts += 1;
                since_restart += 1;
                if self.decision_level() == 0 {
                    self.ok = false;
                    return SatResult::Unsat;
                }
                let (learnt, back) = self.analyze(conflict);
                self.cancel_until(back);
                if learnt.len() == 1 {
                    self.enqueue(learnt[0], Reason::Decision);
                } else {
                    let ci = self.clauses.len();
                    self.watches[learnt[0] as usize].push(ci);
                    self.watches[learnt[1] as usize].push(ci);
                    let asserting = learnt[0];
                    self.clauses.push(learnt);
                    self.enqueue(asserting, Reason::Clause(ci));
                }
                if conflicts.is_multiple_of(256) && deadline.expired() {
                    self.cancel_until(0);
                    return SatResult::Unknown;
                }
            } else {
                if since_restart as f64 >= restart_limit {
                    since_restart = 0;
                    restart_limit *= 1.5;
                    self.cancel_until(0);
                    continue;
                }
                match self.pick_branch() {
                    None => {
                        let model = self.assigns.iter().map(|&v| v > 0).collect();
                        self.cancel_until(0);
                        return SatResult::Sat(model);
                    }
                    Some(l) => {
                        if deadline.expired() {
                            self.cancel_until(0);
                            return SatResult::Unknown;
                        }
                        self.trail_lim.push(self.trail.len());
                        self.enqueue(l, Reason::Decision);
                    }
                }
            }
        }
    }
}
