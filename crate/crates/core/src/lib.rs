//! Preference-aware optimisation workbench: weighted partial MaxSAT formulas,
//! exact solvers, benchmark families with canonical encodings, LLM solving
//! strategies and the evaluation harness.

pub mod families;
pub mod harness;
pub mod pipeline;
pub mod solver;
pub mod wcnf;
