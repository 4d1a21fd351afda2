//! Weighted partial CNF formulas, assignments and cost evaluation, plus the
//! classic WDIMACS interchange format (`p wcnf V C TOP`).
//!
//! Clauses are normalized on construction: duplicate literals are removed
//! (first occurrence wins) and tautological hard clauses are dropped. The
//! empty hard clause is kept and makes the formula unsatisfiable.

use std::fmt::{self, Write as _};
use std::num::NonZeroI32;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum WcnfError {
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("literal {lit} out of range for {num_vars} variables")]
    LiteralOutOfRange { lit: i64, num_vars: u32 },
    #[error("clause starting at token {0} is missing its terminating 0")]
    MissingTerminatingZero(usize),
    #[error("clause weight {0} is not positive")]
    WeightNotPositive(i64),
    #[error("top weight {top} does not exceed the soft weight sum {soft_sum}")]
    TopTooSmall { top: u64, soft_sum: u64 },
    #[error("unexpected token '{0}'")]
    BadToken(String),
    #[error("assignment covers {found} variables, formula has {expected}")]
    IncompleteAssignment { expected: u32, found: usize },
}

/// A non-zero signed variable index; positive means the variable is true.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "i32", into = "i32")]
pub struct Lit(NonZeroI32);

impl Lit {
    /// Panics on 0.
    pub fn new(value: i32) -> Self {
        Lit(NonZeroI32::new(value).expect("literal must be non-zero"))
    }

    pub fn pos(var: u32) -> Self {
        Lit::new(var as i32)
    }

    pub fn neg(var: u32) -> Self {
        Lit::new(-(var as i32))
    }

    pub fn value(self) -> i32 {
        self.0.get()
    }

    /// 1-based variable index.
    pub fn var(self) -> u32 {
        self.0.get().unsigned_abs()
    }

    pub fn is_positive(self) -> bool {
        self.0.get() > 0
    }

    pub fn negate(self) -> Self {
        Lit::new(-self.value())
    }

    pub fn holds(self, assignment: &Assignment) -> bool {
        assignment.value(self.var()) == self.is_positive()
    }
}

impl TryFrom<i32> for Lit {
    type Error = String;
    fn try_from(v: i32) -> Result<Self, Self::Error> {
        NonZeroI32::new(v)
            .map(Lit)
            .ok_or_else(|| "literal must be non-zero".to_string())
    }
}

impl From<Lit> for i32 {
    fn from(l: Lit) -> i32 {
        l.value()
    }
}

impl fmt::Display for Lit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Clause {
    lits: Vec<Lit>,
}

impl Clause {
    /// Builds a clause, dropping repeated literals (first occurrence kept).
    pub fn new<I: IntoIterator<Item = Lit>>(lits: I) -> Self {
        let mut out: Vec<Lit> = Vec::new();
        for l in lits {
            if !out.contains(&l) {
                out.push(l);
            }
        }
        Clause { lits: out }
    }

    pub fn from_ints(lits: &[i32]) -> Self {
        Clause::new(lits.iter().map(|&v| Lit::new(v)))
    }

    pub fn lits(&self) -> &[Lit] {
        &self.lits
    }

    pub fn len(&self) -> usize {
        self.lits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lits.is_empty()
    }

    pub fn is_tautology(&self) -> bool {
        self.lits.iter().any(|l| self.lits.contains(&l.negate()))
    }

    pub fn max_var(&self) -> u32 {
        self.lits.iter().map(|l| l.var()).max().unwrap_or(0)
    }

    pub fn is_satisfied(&self, assignment: &Assignment) -> bool {
        self.lits.iter().any(|l| l.holds(assignment))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SoftClause {
    pub clause: Clause,
    pub weight: u64,
}

/// `(hard, soft, top)` over variables `1..=num_vars`.
///
/// Invariants: `top > Σ soft weights`, every soft weight is at least 1 and
/// every literal refers to a variable in range. Formulas are built through
/// [`WcnfBuilder`] or [`parse_wdimacs`], both of which enforce them.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WcnfFormula {
    num_vars: u32,
    hard: Vec<Clause>,
    soft: Vec<SoftClause>,
    top: u64,
}

impl WcnfFormula {
    pub fn num_vars(&self) -> u32 {
        self.num_vars
    }

    pub fn hard(&self) -> &[Clause] {
        &self.hard
    }

    pub fn soft(&self) -> &[SoftClause] {
        &self.soft
    }

    pub fn top(&self) -> u64 {
        self.top
    }

    pub fn soft_weight_sum(&self) -> u64 {
        self.soft.iter().map(|s| s.weight).sum()
    }

    /// Returns a copy with every soft weight multiplied by `k` (top recomputed).
    pub fn scale_weights(&self, k: u64) -> WcnfFormula {
        assert!(k >= 1, "weight scale must be positive");
        let mut b = WcnfBuilder::new(self.num_vars);
        for h in &self.hard {
            b.add_hard_clause(h.clone());
        }
        for s in &self.soft {
            b.add_soft_clause(s.clause.clone(), s.weight * k);
        }
        b.build()
    }

    /// Copy of this formula with extra hard unit clauses appended.
    pub fn with_hard_units(&self, units: &[Lit]) -> WcnfFormula {
        let mut f = self.clone();
        for &u in units {
            assert!(u.var() <= f.num_vars);
            f.hard.push(Clause::new([u]));
        }
        f
    }
}

/// Incremental constructor; `top` defaults to `1 + Σ soft weights`.
#[derive(Clone, Debug, Default)]
pub struct WcnfBuilder {
    num_vars: u32,
    hard: Vec<Clause>,
    soft: Vec<SoftClause>,
}

impl WcnfBuilder {
    pub fn new(num_vars: u32) -> Self {
        WcnfBuilder {
            num_vars,
            ..Default::default()
        }
    }

    pub fn num_vars(&self) -> u32 {
        self.num_vars
    }

    /// Grows the variable count if the clause mentions a larger index.
    fn reserve_for(&mut self, clause: &Clause) {
        self.num_vars = self.num_vars.max(clause.max_var());
    }

    pub fn add_hard_clause(&mut self, clause: Clause) -> &mut Self {
        if !clause.is_tautology() {
            self.reserve_for(&clause);
            self.hard.push(clause);
        }
        self
    }

    pub fn add_hard(&mut self, lits: &[i32]) -> &mut Self {
        self.add_hard_clause(Clause::from_ints(lits))
    }

    /// Panics if `weight` is 0.
    pub fn add_soft_clause(&mut self, clause: Clause, weight: u64) -> &mut Self {
        assert!(weight >= 1, "soft clause weight must be positive");
        self.reserve_for(&clause);
        self.soft.push(SoftClause { clause, weight });
        self
    }

    pub fn add_soft(&mut self, lits: &[i32], weight: u64) -> &mut Self {
        self.add_soft_clause(Clause::from_ints(lits), weight)
    }

    pub fn build(self) -> WcnfFormula {
        let top = 1 + self.soft.iter().map(|s| s.weight).sum::<u64>();
        WcnfFormula {
            num_vars: self.num_vars,
            hard: self.hard,
            soft: self.soft,
            top,
        }
    }

    pub fn build_with_top(self, top: u64) -> Result<WcnfFormula, WcnfError> {
        let soft_sum = self.soft.iter().map(|s| s.weight).sum::<u64>();
        if top <= soft_sum {
            return Err(WcnfError::TopTooSmall { top, soft_sum });
        }
        Ok(WcnfFormula {
            num_vars: self.num_vars,
            hard: self.hard,
            soft: self.soft,
            top,
        })
    }
}

/// Total truth assignment over `1..=num_vars`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Assignment {
    values: Vec<bool>,
}

impl Assignment {
    pub fn new(values: Vec<bool>) -> Self {
        Assignment { values }
    }

    pub fn all_false(num_vars: u32) -> Self {
        Assignment {
            values: vec![false; num_vars as usize],
        }
    }

    /// Builds from signed literals; unmentioned variables default to false.
    pub fn from_lits(num_vars: u32, lits: &[i32]) -> Self {
        let mut a = Assignment::all_false(num_vars);
        for &l in lits {
            let v = l.unsigned_abs();
            if v >= 1 && v <= num_vars {
                a.values[v as usize - 1] = l > 0;
            }
        }
        a
    }

    pub fn num_vars(&self) -> usize {
        self.values.len()
    }

    /// Value of 1-based variable `var`.
    pub fn value(&self, var: u32) -> bool {
        self.values[var as usize - 1]
    }

    pub fn set(&mut self, var: u32, value: bool) {
        self.values[var as usize - 1] = value;
    }

    pub fn values(&self) -> &[bool] {
        &self.values
    }

    /// Signed-literal view, `[1, -2, -3]` style.
    pub fn to_lits(&self) -> Vec<i32> {
        self.values
            .iter()
            .enumerate()
            .map(|(i, &b)| if b { i as i32 + 1 } else { -(i as i32 + 1) })
            .collect()
    }

    pub fn truncated(&self, num_vars: u32) -> Assignment {
        Assignment {
            values: self.values[..num_vars as usize].to_vec(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalResult {
    pub hard_satisfied: bool,
    pub violated_hard: Vec<usize>,
    pub cost: u64,
    pub violated_soft: Vec<usize>,
}

pub fn evaluate(formula: &WcnfFormula, assignment: &Assignment) -> Result<EvalResult, WcnfError> {
    if assignment.num_vars() != formula.num_vars as usize {
        return Err(WcnfError::IncompleteAssignment {
            expected: formula.num_vars,
            found: assignment.num_vars(),
        });
    }
    let violated_hard: Vec<usize> = formula
        .hard
        .iter()
        .enumerate()
        .filter(|(_, c)| !c.is_satisfied(assignment))
        .map(|(i, _)| i)
        .collect();
    let violated_soft: Vec<usize> = formula
        .soft
        .iter()
        .enumerate()
        .filter(|(_, s)| !s.clause.is_satisfied(assignment))
        .map(|(i, _)| i)
        .collect();
    let cost = violated_soft.iter().map(|&i| formula.soft[i].weight).sum();
    Ok(EvalResult {
        hard_satisfied: violated_hard.is_empty(),
        violated_hard,
        cost,
        violated_soft,
    })
}

/// Parses classic WDIMACS. Clauses whose weight is at least `top` are hard.
/// Clause bodies may span lines; comment lines start with `c`.
pub fn parse_wdimacs(text: &str) -> Result<WcnfFormula, WcnfError> {
    let mut header: Option<(u32, usize, u64)> = None;
    let mut tokens: Vec<&str> = Vec::new();
    for line in text.lines() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('c') {
            continue;
        }
        if trimmed.starts_with('p') {
            if header.is_some() {
                return Err(WcnfError::MalformedHeader("duplicate p line".into()));
            }
            header = Some(parse_header(trimmed)?);
            continue;
        }
        if header.is_none() {
            return Err(WcnfError::MalformedHeader(
                "clause data before p line".into(),
            ));
        }
        tokens.extend(trimmed.split_whitespace());
    }
    let (num_vars, num_clauses, top) =
        header.ok_or_else(|| WcnfError::MalformedHeader("missing p line".into()))?;

    let mut builder = WcnfBuilder::new(num_vars);
    let mut seen = 0usize;
    let mut i = 0usize;
    while i < tokens.len() {
        let start = i;
        let weight = parse_int(tokens[i])?;
        if weight <= 0 {
            return Err(WcnfError::WeightNotPositive(weight));
        }
        i += 1;
        let mut lits = Vec::new();
        let mut terminated = false;
        while i < tokens.len() {
            let v = parse_int(tokens[i])?;
            i += 1;
            if v == 0 {
                terminated = true;
                break;
            }
            if v.unsigned_abs() > num_vars as u64 {
                return Err(WcnfError::LiteralOutOfRange { lit: v, num_vars });
            }
            lits.push(Lit::new(v as i32));
        }
        if !terminated {
            return Err(WcnfError::MissingTerminatingZero(start));
        }
        let clause = Clause::new(lits);
        if weight as u64 >= top {
            builder.add_hard_clause(clause);
        } else {
            builder.add_soft_clause(clause, weight as u64);
        }
        seen += 1;
    }
    if seen != num_clauses {
        return Err(WcnfError::MalformedHeader(format!(
            "header announces {num_clauses} clauses, found {seen}"
        )));
    }
    builder.build_with_top(top)
}

fn parse_header(line: &str) -> Result<(u32, usize, u64), WcnfError> {
    let parts: Vec<&str> = line.split_whitespace().collect();
    let bad = || WcnfError::MalformedHeader(line.to_string());
    if parts.len() != 5 || parts[0] != "p" || parts[1] != "wcnf" {
        return Err(bad());
    }
    let vars = parts[2].parse::<u32>().map_err(|_| bad())?;
    let clauses = parts[3].parse::<usize>().map_err(|_| bad())?;
    let top = parts[4].parse::<u64>().map_err(|_| bad())?;
    if top == 0 {
        return Err(bad());
    }
    Ok((vars, clauses, top))
}

fn parse_int(tok: &str) -> Result<i64, WcnfError> {
    tok.parse::<i64>()
        .map_err(|_| WcnfError::BadToken(tok.to_string()))
}

/// Canonical byte form: header, hard clauses (weight `top`), then soft
/// clauses, each in stored order. No comments are emitted.
pub fn serialize_wdimacs(formula: &WcnfFormula) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "p wcnf {} {} {}",
        formula.num_vars,
        formula.hard.len() + formula.soft.len(),
        formula.top
    );
    for h in &formula.hard {
        write_clause(&mut out, formula.top, h);
    }
    for s in &formula.soft {
        write_clause(&mut out, s.weight, &s.clause);
    }
    out
}

fn write_clause(out: &mut String, weight: u64, clause: &Clause) {
    let _ = write!(out, "{weight}");
    for l in clause.lits() {
        let _ = write!(out, " {l}");
    }
    out.push_str(" 0\n");
}
