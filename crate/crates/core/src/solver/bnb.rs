use crate::wcnf::{Assignment, Lit, WcnfFormula};

use super::{Deadline, MaxSatEngine, SolveOutcome};

/// Depth-first branch and bound; see the module docs.
#[derive(Clone, Copy, Debug, Default)]
pub struct BranchAndBound;

impl MaxSatEngine for BranchAndBound {
    fn name(&self) -> &'static str {
        "branch-and-bound"
    }

    fn solve(&self, formula: &WcnfFormula, deadline: Deadline) -> SolveOutcome {
        let mut search = Search::new(formula, deadline);
        if !search.root_propagate() {
            return SolveOutcome::Unsat;
        }
        search.dfs();
        match (search.timed_out, search.best) {
            (true, best) => SolveOutcome::TimedOut {
                best_cost_so_far: best.map(|(c, _)| c),
            },
            (false, Some((cost, values))) => SolveOutcome::Optimal {
                cost,
                model: Assignment::new(values),
            },
            (false, None) => SolveOutcome::Unsat,
        }
    }
}

const UNSET: i8 = 0;

struct Search<'a> {
    formula: &'a WcnfFormula,
    deadline: Deadline,
    // literal index: 2*(var-1) for positive, +1 for negative
    hard_occ: Vec<Vec<u32>>,
    soft_occ: Vec<Vec<u32>>,
    hard_true: Vec<u32>,
    hard_false: Vec<u32>,
    soft_true: Vec<u32>,
    soft_false: Vec<u32>,
    values: Vec<i8>,
    trail: Vec<Lit>,
    cost: u64,
    best: Option<(u64, Vec<bool>)>,
    nodes: u64,
    timed_out: bool,
}

fn lit_index(l: Lit) -> usize {
    2 * (l.var() as usize - 1) + usize::from(!l.is_positive())
}

impl<'a> Search<'a> {
    fn new(formula: &'a WcnfFormula, deadline: Deadline) -> Self {
        let n = formula.num_vars() as usize;
        let mut hard_occ = vec![Vec::new(); 2 * n];
        let mut soft_occ = vec![Vec::new(); 2 * n];
        for (i, c) in formula.hard().iter().enumerate() {
            for &l in c.lits() {
                hard_occ[lit_index(l)].push(i as u32);
            }
        }
        for (i, s) in formula.soft().iter().enumerate() {
            for &l in s.clause.lits() {
                soft_occ[lit_index(l)].push(i as u32);
            }
        }
        let mut search = Search {
            formula,
            deadline,
            hard_occ,
            soft_occ,
            hard_true: vec![0; formula.hard().len()],
            hard_false: vec![0; formula.hard().len()],
            soft_true: vec![0; formula.soft().len()],
            soft_false: vec![0; formula.soft().len()],
            values: vec![UNSET; n],
            trail: Vec::with_capacity(n),
            cost: 0,
            best: None,
            nodes: 0,
            timed_out: false,
        };
        // empty soft clauses are falsified whatever happens
        search.cost = formula
            .soft()
            .iter()
            .filter(|s| s.clause.is_empty())
            .map(|s| s.weight)
            .sum();
        search
    }

    fn value(&self, l: Lit) -> i8 {
        let v = self.values[l.var() as usize - 1];
        if l.is_positive() {
            v
        } else {
            -v
        }
    }

    /// Makes `l` true and updates clause counters. Returns the hard clauses
    /// that became unit or falsified through `unit_queue`.
    fn assign(&mut self, l: Lit, unit_queue: &mut Vec<u32>) {
        self.values[l.var() as usize - 1] = if l.is_positive() { 1 } else { -1 };
        self.trail.push(l);
        let pos = lit_index(l);
        let neg = lit_index(l.negate());
        for &c in &self.hard_occ[pos] {
            self.hard_true[c as usize] += 1;
        }
        for &c in &self.soft_occ[pos] {
            self.soft_true[c as usize] += 1;
        }
        for &c in &self.hard_occ[neg] {
            let c = c as usize;
            self.hard_false[c] += 1;
            let len = self.formula.hard()[c].len() as u32;
            if self.hard_true[c] == 0 && self.hard_false[c] + 1 >= len {
                unit_queue.push(c as u32);
            }
        }
        for &c in &self.soft_occ[neg] {
            let c = c as usize;
            self.soft_false[c] += 1;
            if self.soft_false[c] as usize == self.formula.soft()[c].clause.len() {
                self.cost += self.formula.soft()[c].weight;
            }
        }
    }

    fn unassign_to(&mut self, mark: usize) {
        while self.trail.len() > mark {
            let l = self.trail.pop().unwrap();
            self.values[l.var() as usize - 1] = UNSET;
            let pos = lit_index(l);
            let neg = lit_index(l.negate());
            for &c in &self.hard_occ[pos] {
                self.hard_true[c as usize] -= 1;
            }
            for &c in &self.soft_occ[pos] {
                self.soft_true[c as usize] -= 1;
            }
            for &c in &self.hard_occ[neg] {
                self.hard_false[c as usize] -= 1;
            }
            for &c in &self.soft_occ[neg] {
                let c = c as usize;
                if self.soft_false[c] as usize == self.formula.soft()[c].clause.len() {
                    self.cost -= self.formula.soft()[c].weight;
                }
                self.soft_false[c] -= 1;
            }
        }
    }

    /// Unit propagation to fixpoint; false on a falsified hard clause.
    fn propagate(&mut self, mut queue: Vec<u32>) -> bool {
        while let Some(c) = queue.pop() {
            let c = c as usize;
            if self.hard_true[c] > 0 {
                continue;
            }
            let clause = &self.formula.hard()[c];
            let free = clause.lits().iter().copied().find(|&l| self.value(l) == UNSET);
            match free {
                None => return false,
                Some(l) => {
                    if self.hard_false[c] as usize + 1 == clause.len() {
                        self.assign(l, &mut queue);
                    }
                }
            }
        }
        true
    }

    fn root_propagate(&mut self) -> bool {
        let queue: Vec<u32> = self
            .formula
            .hard()
            .iter()
            .enumerate()
            .filter(|(_, c)| c.len() <= 1)
            .map(|(i, _)| i as u32)
            .collect();
        self.propagate(queue)
    }

    /// A variable whose clauses are all satisfied cannot affect feasibility
    /// or cost, so it is fixed to true without branching.
    fn is_irrelevant(&self, var: usize) -> bool {
        let (p, n) = (2 * var, 2 * var + 1);
        self.hard_occ[p]
            .iter()
            .chain(&self.hard_occ[n])
            .all(|&c| self.hard_true[c as usize] > 0)
            && self.soft_occ[p]
                .iter()
                .chain(&self.soft_occ[n])
                .all(|&c| self.soft_true[c as usize] > 0)
    }

    fn dfs(&mut self) {
        self.nodes += 1;
        if self.nodes % 1024 == 1 && self.deadline.expired() {
            self.timed_out = true;
        }
        if self.timed_out {
            return;
        }
        if let Some((best, _)) = &self.best {
            if self.cost >= *best {
                return;
            }
        }
        let mark = self.trail.len();
        let mut next = None;
        for var in 0..self.values.len() {
            if self.values[var] != UNSET {
                continue;
            }
            if self.is_irrelevant(var) {
                let mut q = Vec::new();
                self.assign(Lit::pos(var as u32 + 1), &mut q);
                debug_assert!(q.is_empty());
            } else {
                next = Some(var);
                break;
            }
        }
        match next {
            None => {
                let model = self.values.iter().map(|&v| v > 0).collect();
                self.best = Some((self.cost, model));
            }
            Some(var) => {
                for lit in [Lit::pos(var as u32 + 1), Lit::neg(var as u32 + 1)] {
                    let inner = self.trail.len();
                    let mut queue = Vec::new();
                    self.assign(lit, &mut queue);
                    if self.propagate(queue) {
                        self.dfs();
                    }
                    self.unassign_to(inner);
                    if self.timed_out {
                        break;
                    }
                }
            }
        }
        self.unassign_to(mark);
    }
}
