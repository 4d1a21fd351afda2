//! LLM interaction layer: prompt construction, strategy execution, response
//! parsing and the bounded feedback loop.

pub mod parse;
pub mod prompts;
pub mod provider;
pub mod run;
pub mod sandbox;
pub mod strategy;

pub use parse::{extract_program, parse_solution_json, ParseError, ParsedAnswer, ProgramSource};
pub use prompts::{PromptError, SlotValues, Stage};
pub use provider::{
    plan_key, replay_any_key, replay_key, CompletionProvider, CompletionRequest, OpenAiCompatibleProvider,
    ProviderError, ProviderSpec, ReplayBundle, ReplayProvider, TokenBucket,
};
pub use run::{
    run_strategy, Attempt, Failure, FailureKind, FeedbackPolicy, PipelineError, PlanCache, PlanRecord, RunEnv,
    TaskRun, Termination, MAX_ATTEMPTS,
};
pub use sandbox::{ExecResult, ExecStatus, ProcessSandbox, ProgramOutput, Sandbox, UnavailableSandbox};
pub use strategy::{build_prompt, OutputKind, PlanSource, Strategy, StrategyRegistry};
