//! Embedded prompt templates and slot substitution.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const PLAN: &str = include_str!("../../prompts/plan.txt");
pub const RC2_HELP: &str = include_str!("../../prompts/rc2_help.txt");
pub const GENERATE_WITH_PLAN: &str = include_str!("../../prompts/generate_with_plan.txt");
pub const GENERATE_NO_PLAN: &str = include_str!("../../prompts/generate_no_plan.txt");
pub const DIRECT: &str = include_str!("../../prompts/direct.txt");
pub const COT: &str = include_str!("../../prompts/cot.txt");
pub const POT: &str = include_str!("../../prompts/pot.txt");
pub const FEEDBACK: &str = include_str!("../../prompts/feedback.txt");

pub const SLOT_DESCRIPTION: &str = "<problem description>";
pub const SLOT_PLAN: &str = "<generated plan>";
pub const SLOT_PREVIOUS: &str = "<previous model output>";
pub const SLOT_FEEDBACK: &str = "<stderr and solver feedback>";

const SLOTS: [&str; 4] = [SLOT_DESCRIPTION, SLOT_PLAN, SLOT_PREVIOUS, SLOT_FEEDBACK];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Plan,
    Generate,
    Baseline,
    Feedback,
}

#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum PromptError {
    #[error("no value supplied for slot {0}")]
    MissingSlotValue(&'static str),
    #[error("stage {stage:?} is not used by strategy {strategy}")]
    InvalidStage { strategy: String, stage: Stage },
}

/// Values available for substitution; unused ones are ignored.
#[derive(Clone, Debug, Default)]
pub struct SlotValues<'a> {
    pub description: Option<&'a str>,
    pub plan: Option<&'a str>,
    pub previous_output: Option<&'a str>,
    pub feedback: Option<&'a str>,
}

impl SlotValues<'_> {
    fn get(&self, slot: &str) -> Option<&str> {
        match slot {
            SLOT_DESCRIPTION => self.description,
            SLOT_PLAN => self.plan,
            SLOT_PREVIOUS => self.previous_output,
            SLOT_FEEDBACK => self.feedback,
            _ => None,
        }
    }
}

/// Replaces every slot token in one left-to-right pass, so slot-like text
/// inside substituted values is left alone.
pub fn fill(template: &str, values: &SlotValues<'_>) -> Result<String, PromptError> {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    loop {
        let next = SLOTS
            .iter()
            .filter_map(|&s| rest.find(s).map(|at| (at, s)))
            .min_by_key(|&(at, _)| at);
        match next {
            None => {
                out.push_str(rest);
                return Ok(out);
            }
            Some((at, slot)) => {
                let value = values.get(slot).ok_or(PromptError::MissingSlotValue(slot))?;
                out.push_str(&rest[..at]);
                out.push_str(value);
                rest = &rest[at + slot.len()..];
            }
        }
    }
}

/// The plan template has no description slot; the description follows it.
pub fn plan_prompt(description: &str) -> String {
    format!("{PLAN}\nProblem description:\n---\n{description}\n---\n")
}

/// Interface notes placed before every MaxSAT generation prompt.
pub fn with_rc2_help(prompt: &str) -> String {
    format!("RC2_HELP:\n---\n{RC2_HELP}---\n\n{prompt}")
}
