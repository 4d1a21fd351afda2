#![allow(dead_code)]

use std::collections::VecDeque;
use std::sync::Mutex;
use std::time::Duration;

use prefsat_core::families::{motivation_fixture, CanonicalInstance, Instance, PrefVariant};
use prefsat_core::pipeline::{ExecResult, ExecStatus, ProgramOutput, ProgramSource, Sandbox};
use prefsat_core::solver::SolverConfig;
use serde_json::Value;

pub const MOTIVATION_KEY: &str = "scheduling/0/p2";

/// Feasible and optimal (cost 2) for the motivation instance.
pub const RIGHT: &str = r#"{"J0": 4, "J1": 6, "J2": 5, "J3": 1, "J4": 3, "J5": 2}"#;
/// Violates J2 before J1.
pub const WRONG: &str = r#"{"J0": 4, "J1": 2, "J2": 5, "J3": 1, "J4": 6, "J5": 0}"#;
/// Feasible, cost 4.
pub const LATE: &str = r#"{"J0": 5, "J1": 6, "J2": 4, "J3": 1, "J4": 3, "J5": 2}"#;

pub fn motivation() -> CanonicalInstance {
    CanonicalInstance::build(
        Instance::Scheduling(motivation_fixture()),
        PrefVariant::P2,
        0,
        &SolverConfig::default(),
    )
    .unwrap()
}

pub fn fenced(code: &str) -> String {
    format!("Here is the program.\n```python\n{code}\n```\n")
}

pub fn ok_exec(cost: i64, solution: &str) -> ExecResult {
    let solution_json: Value = serde_json::from_str(solution).unwrap();
    ExecResult {
        status: ExecStatus::Ok,
        stdout: serde_json::json!({"objective_cost": cost, "solution_json": solution_json}).to_string(),
        stderr: String::new(),
        parsed: Some(ProgramOutput {
            objective_cost: cost,
            solution_json,
        }),
    }
}

/// Hands out scripted results in order and records what it was asked to run.
#[derive(Default)]
pub struct ScriptedSandbox {
    results: Mutex<VecDeque<ExecResult>>,
    pub seen: Mutex<Vec<(String, Duration)>>,
}

impl ScriptedSandbox {
    pub fn new(results: Vec<ExecResult>) -> Self {
        ScriptedSandbox {
            results: Mutex::new(results.into()),
            seen: Mutex::default(),
        }
    }
}

impl Sandbox for ScriptedSandbox {
    fn execute(&self, program: &ProgramSource, timeout: Duration) -> ExecResult {
        self.seen.lock().unwrap().push((program.code.clone(), timeout));
        self.results
            .lock()
            .unwrap()
            .pop_front()
            .unwrap_or_else(|| ExecResult::exec_error("script exhausted"))
    }
}

/// Text between the execution-result markers of a feedback prompt.
pub fn feedback_segment(prompt: &str) -> &str {
    let start = prompt.find("Execution result and errors:\n---\n").expect("feedback prompt") + 33;
    let end = prompt[start..].find("\n---\n\nPlease provide").expect("feedback prompt") + start;
    &prompt[start..end]
}

use prefsat_core::families::FamilyId;
use prefsat_core::harness::{instance_key, ResultsStore};
use prefsat_core::pipeline::{TaskRun, Termination};
use prefsat_core::solver::Verdict;

/// A finished TaskRun with a chosen verdict and no attempts.
pub fn fake_run(instance: &str, strategy: &str, provider: &str, accepted: bool) -> TaskRun {
    TaskRun {
        schema_version: 1,
        instance: instance.into(),
        strategy: strategy.into(),
        provider: provider.into(),
        plan: None,
        attempts: Vec::new(),
        termination: Termination::Answered,
        final_verdict: if accepted {
            Verdict::Accepted { cost: 0 }
        } else {
            Verdict::Suboptimal { cost: 1, optimum: 0 }
        },
        wall_time_ms: 0,
    }
}

/// 25 instances of one family. `accepted[v]` of the 25 cells of variant `v`
/// are accepted for (`strategy`, `provider`).
pub fn fill_store(
    store: &mut ResultsStore,
    family: FamilyId,
    strategy: &str,
    provider: &str,
    accepted: [usize; 4],
) -> Vec<(FamilyId, usize, PrefVariant)> {
    let mut grid = Vec::new();
    for index in 0..25 {
        for (vi, v) in PrefVariant::ALL.into_iter().enumerate() {
            grid.push((family, index, v));
            let key = instance_key(family, index, v);
            assert!(store.insert(fake_run(&key, strategy, provider, index < accepted[vi])));
        }
    }
    grid
}
