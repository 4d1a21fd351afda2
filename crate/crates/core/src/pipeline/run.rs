//! The attempt loop of one (instance, strategy, provider) episode.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::parse::{extract_program, interpret, parse_solution_json, ParseError, ProgramSource};
use super::prompts::{SlotValues, Stage};
use super::provider::{CompletionProvider, CompletionRequest, ProviderError};
use super::sandbox::{ExecResult, ExecStatus, Sandbox, UnavailableSandbox};
use super::strategy::{build_prompt, OutputKind, PlanSource, Strategy};
use crate::families::{CanonicalInstance, SemanticSolution};
use crate::solver::{verify_candidate, Verdict};

pub const MAX_ATTEMPTS: u32 = 5;
pub const DEFAULT_TASK_BUDGET: Duration = Duration::from_secs(300);
pub const DEFAULT_PROGRAM_TIMEOUT: Duration = Duration::from_secs(120);
pub const TASKRUN_SCHEMA_VERSION: u32 = 1;

/// What the model is told after a failed attempt.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeedbackPolicy {
    /// Execution, format and API errors only. Canonical checks stay hidden.
    #[default]
    SyntacticOnly,
    /// Also reports the canonical verdict and keeps iterating until accepted.
    FullVerdict,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FailureKind {
    ExecError,
    FormatError,
    ApiError,
    Timeout,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Failure {
    pub kind: FailureKind,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Attempt {
    pub index: u32,
    pub prompt: String,
    /// Empty when the provider call failed.
    pub response: String,
    pub program: Option<ProgramSource>,
    pub execution: Option<ExecResult>,
    pub solution: Option<SemanticSolution>,
    pub claimed_cost: Option<i64>,
    pub failure: Option<Failure>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanRecord {
    pub provider: String,
    pub prompt: String,
    pub response: Option<String>,
    pub error: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    Answered,
    AttemptCap,
    BudgetExceeded,
    PlanFailed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskRun {
    pub schema_version: u32,
    pub instance: String,
    pub strategy: String,
    pub provider: String,
    pub plan: Option<PlanRecord>,
    pub attempts: Vec<Attempt>,
    pub termination: Termination,
    pub final_verdict: Verdict,
    pub wall_time_ms: u64,
}

impl TaskRun {
    /// SHA-256 of the serialized record with the wall time zeroed.
    pub fn determinism_hash(&self) -> String {
        let mut copy = self.clone();
        copy.wall_time_ms = 0;
        let text = serde_json::to_string(&copy).expect("TaskRun serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }
}

#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum PipelineError {
    #[error("unknown provider '{0}'")]
    UnknownProvider(String),
    #[error("unknown strategy '{0}'")]
    UnknownStrategy(String),
    #[error("task budget must be positive")]
    ZeroBudget,
}

/// Plans keyed by (instance key, plan provider), shared across strategies.
#[derive(Debug, Default)]
pub struct PlanCache {
    plans: Mutex<HashMap<(String, String), String>>,
}

impl PlanCache {
    pub fn get(&self, instance: &str, provider: &str) -> Option<String> {
        let m = self.plans.lock().unwrap_or_else(|p| p.into_inner());
        m.get(&(instance.to_string(), provider.to_string())).cloned()
    }

    pub fn insert(&self, instance: &str, provider: &str, plan: String) {
        let mut m = self.plans.lock().unwrap_or_else(|p| p.into_inner());
        m.insert((instance.to_string(), provider.to_string()), plan);
    }
}

/// Everything a TaskRun needs besides the task, strategy and provider.
pub struct RunEnv {
    pub sandbox: Arc<dyn Sandbox>,
    pub budget: Duration,
    pub program_timeout: Duration,
    pub policy: FeedbackPolicy,
    /// Providers that may be named by `maxsat-plan-from:<name>`.
    pub plan_providers: HashMap<String, Arc<dyn CompletionProvider>>,
    pub plan_cache: Arc<PlanCache>,
}

impl Default for RunEnv {
    fn default() -> Self {
        RunEnv {
            sandbox: Arc::new(UnavailableSandbox),
            budget: DEFAULT_TASK_BUDGET,
            program_timeout: DEFAULT_PROGRAM_TIMEOUT,
            policy: FeedbackPolicy::default(),
            plan_providers: HashMap::new(),
            plan_cache: Arc::new(PlanCache::default()),
        }
    }
}

fn provider_failure(e: &ProviderError) -> Failure {
    Failure {
        kind: match e {
            ProviderError::Timeout => FailureKind::Timeout,
            _ => FailureKind::ApiError,
        },
        detail: e.to_string(),
    }
}

fn format_failure(e: &ParseError) -> Failure {
    Failure {
        kind: FailureKind::FormatError,
        detail: e.to_string(),
    }
}

/// Runs one episode: optional plan, then up to [`MAX_ATTEMPTS`] attempts,
/// then a single canonical verdict on the last parsed solution.
pub fn run_strategy(
    task: &CanonicalInstance,
    instance_key: &str,
    strategy: &dyn Strategy,
    provider: &dyn CompletionProvider,
    env: &RunEnv,
) -> Result<TaskRun, PipelineError> {
    if env.budget.is_zero() {
        return Err(PipelineError::ZeroBudget);
    }
    let started = Instant::now();
    let strategy_name = strategy.name();
    let description = task.description.as_str();

    let mut plan_record = None;
    let mut plan_text = None;
    if let Some(source) = strategy.plan_source() {
        let plan_provider: &dyn CompletionProvider = match &source {
            PlanSource::SameProvider => provider,
            PlanSource::Provider(name) => env
                .plan_providers
                .get(name)
                .map(|p| p.as_ref())
                .ok_or_else(|| PipelineError::UnknownProvider(name.clone()))?,
        };
        let prompt = build_prompt(
            strategy,
            Stage::Plan,
            &SlotValues {
                description: Some(description),
                ..Default::default()
            },
        )
        .expect("plan stage is valid for planning strategies");
        let pname = plan_provider.name().to_string();
        let result = match env.plan_cache.get(instance_key, &pname) {
            Some(p) => Ok(p),
            None => plan_provider
                .complete(&CompletionRequest {
                    prompt: &prompt,
                    instance: instance_key,
                    strategy: &strategy_name,
                    stage: Stage::Plan,
                    attempt: 0,
                })
                .inspect(|p| env.plan_cache.insert(instance_key, &pname, p.clone())),
        };
        match result {
            Ok(p) => {
                plan_record = Some(PlanRecord {
                    provider: pname,
                    prompt,
                    response: Some(p.clone()),
                    error: None,
                });
                plan_text = Some(p);
            }
            Err(e) => {
                return Ok(TaskRun {
                    schema_version: TASKRUN_SCHEMA_VERSION,
                    instance: instance_key.to_string(),
                    strategy: strategy_name,
                    provider: provider.name().to_string(),
                    plan: Some(PlanRecord {
                        provider: pname,
                        prompt,
                        response: None,
                        error: Some(e.to_string()),
                    }),
                    attempts: Vec::new(),
                    termination: Termination::PlanFailed,
                    final_verdict: Verdict::Malformed {
                        reason: format!("plan stage failed: {e}"),
                    },
                    wall_time_ms: started.elapsed().as_millis() as u64,
                });
            }
        }
    }

    let mut attempts: Vec<Attempt> = Vec::new();
    let mut termination = Termination::AttemptCap;
    let mut feedback = String::new();
    for index in 1..=MAX_ATTEMPTS {
        let elapsed = started.elapsed();
        if elapsed >= env.budget {
            termination = Termination::BudgetExceeded;
            break;
        }
        let prompt = if index == 1 {
            build_prompt(
                strategy,
                strategy.first_stage(),
                &SlotValues {
                    description: Some(description),
                    plan: plan_text.as_deref(),
                    ..Default::default()
                },
            )
        } else {
            build_prompt(
                strategy,
                Stage::Feedback,
                &SlotValues {
                    description: Some(description),
                    previous_output: Some(&attempts[attempts.len() - 1].response),
                    feedback: Some(&feedback),
                    ..Default::default()
                },
            )
        }
        .expect("all slots supplied");
        let stage = if index == 1 { strategy.first_stage() } else { Stage::Feedback };
        let mut attempt = Attempt {
            index,
            prompt,
            response: String::new(),
            program: None,
            execution: None,
            solution: None,
            claimed_cost: None,
            failure: None,
        };
        match provider.complete(&CompletionRequest {
            prompt: &attempt.prompt,
            instance: instance_key,
            strategy: &strategy_name,
            stage,
            attempt: index,
        }) {
            Err(e) => attempt.failure = Some(provider_failure(&e)),
            Ok(text) => {
                attempt.response = text;
                match strategy.output() {
                    OutputKind::Answer => match parse_solution_json(&attempt.response, task.family) {
                        Ok(p) => {
                            attempt.solution = Some(p.solution);
                            attempt.claimed_cost = p.claimed_cost;
                        }
                        Err(e) => attempt.failure = Some(format_failure(&e)),
                    },
                    OutputKind::Program => match extract_program(&attempt.response) {
                        Err(e) => attempt.failure = Some(format_failure(&e)),
                        Ok(program) => {
                            let remaining = env.budget.saturating_sub(started.elapsed());
                            let exec = env.sandbox.execute(&program, env.program_timeout.min(remaining));
                            attempt.program = Some(program);
                            read_execution(&exec, task, &mut attempt);
                            attempt.execution = Some(exec);
                        }
                    },
                }
            }
        }

        let done = match (&attempt.failure, &attempt.solution) {
            (Some(f), _) => {
                feedback = feedback_text(f, attempt.execution.as_ref());
                false
            }
            (None, Some(sol)) => match env.policy {
                FeedbackPolicy::SyntacticOnly => true,
                FeedbackPolicy::FullVerdict => {
                    let v = verdict_of(task, sol);
                    feedback = format!("Canonical verdict: {}", serde_json::to_string(&v).expect("verdict serializes"));
                    v.is_accepted()
                }
            },
            (None, None) => unreachable!("an attempt either fails or yields a solution"),
        };
        attempts.push(attempt);
        if done {
            termination = Termination::Answered;
            break;
        }
    }

    let final_verdict = match attempts.iter().rev().find_map(|a| a.solution.as_ref()) {
        Some(sol) => verdict_of(task, sol),
        None => Verdict::Malformed {
            reason: "no attempt produced a parseable solution".into(),
        },
    };
    Ok(TaskRun {
        schema_version: TASKRUN_SCHEMA_VERSION,
        instance: instance_key.to_string(),
        strategy: strategy_name,
        provider: provider.name().to_string(),
        plan: plan_record,
        attempts,
        termination,
        final_verdict,
        wall_time_ms: started.elapsed().as_millis() as u64,
    })
}

fn verdict_of(task: &CanonicalInstance, sol: &SemanticSolution) -> Verdict {
    verify_candidate(task, sol).unwrap_or_else(|e| Verdict::Malformed {
        reason: format!("canonical record rejected: {e}"),
    })
}

fn read_execution(exec: &ExecResult, task: &CanonicalInstance, attempt: &mut Attempt) {
    let fail = |kind, detail: &str| Some(Failure {
        kind,
        detail: detail.to_string(),
    });
    attempt.failure = match exec.status {
        ExecStatus::ExecError => fail(FailureKind::ExecError, "program execution failed"),
        ExecStatus::TimedOut => fail(FailureKind::Timeout, "program exceeded its time limit"),
        ExecStatus::FormatError => fail(FailureKind::FormatError, "program output contained no result JSON"),
        ExecStatus::Ok => match &exec.parsed {
            None => fail(FailureKind::FormatError, "program output contained no result JSON"),
            Some(out) => {
                attempt.claimed_cost = Some(out.objective_cost);
                let wrapped = serde_json::json!({
                    "objective_cost": out.objective_cost,
                    "solution_json": out.solution_json,
                });
                match interpret(&wrapped, task.family) {
                    Ok(p) => {
                        attempt.solution = Some(p.solution);
                        None
                    }
                    Err(e) => Some(format_failure(&e)),
                }
            }
        },
    };
}

fn feedback_text(failure: &Failure, exec: Option<&ExecResult>) -> String {
    let mut s = failure.detail.clone();
    if let Some(e) = exec {
        if !e.stderr.is_empty() {
            s.push_str("\nstderr:\n");
            s.push_str(e.stderr.trim_end());
        }
        if failure.kind == FailureKind::FormatError && !e.stdout.is_empty() {
            s.push_str("\nstdout:\n");
            s.push_str(e.stdout.trim_end());
        }
    }
    s
}
