//! Solving strategies, registered by name.

use std::collections::BTreeMap;
use std::sync::Arc;

use super::prompts::{self, fill, PromptError, SlotValues, Stage};

pub const PLAN_FROM_PREFIX: &str = "maxsat-plan-from:";

/// What a strategy's responses contain.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutputKind {
    /// A JSON answer in the response text.
    Answer,
    /// A program whose output carries the answer.
    Program,
}

/// Where the plan of a planning strategy comes from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PlanSource {
    SameProvider,
    Provider(String),
}

pub trait Strategy: Send + Sync {
    fn name(&self) -> String;
    fn output(&self) -> OutputKind;
    fn plan_source(&self) -> Option<PlanSource> {
        None
    }
    /// Stage of the first attempt's prompt.
    fn first_stage(&self) -> Stage;
    /// Template of the first attempt, before slot substitution.
    fn template(&self) -> &'static str;
    /// Whether the first prompt is preceded by the solver interface notes.
    fn uses_rc2_help(&self) -> bool {
        false
    }
}

struct Baseline {
    name: &'static str,
    output: OutputKind,
    template: &'static str,
}

impl Strategy for Baseline {
    fn name(&self) -> String {
        self.name.to_string()
    }
    fn output(&self) -> OutputKind {
        self.output
    }
    fn first_stage(&self) -> Stage {
        Stage::Baseline
    }
    fn template(&self) -> &'static str {
        self.template
    }
}

struct MaxSat {
    name: String,
    plan: Option<PlanSource>,
}

impl Strategy for MaxSat {
    fn name(&self) -> String {
        self.name.clone()
    }
    fn output(&self) -> OutputKind {
        OutputKind::Program
    }
    fn plan_source(&self) -> Option<PlanSource> {
        self.plan.clone()
    }
    fn first_stage(&self) -> Stage {
        Stage::Generate
    }
    fn template(&self) -> &'static str {
        if self.plan.is_some() {
            prompts::GENERATE_WITH_PLAN
        } else {
            prompts::GENERATE_NO_PLAN
        }
    }
    fn uses_rc2_help(&self) -> bool {
        true
    }
}

/// Builds the prompt of one stage. `Plan` is valid only for planning
/// strategies, `Feedback` for all of them.
pub fn build_prompt(strategy: &dyn Strategy, stage: Stage, slots: &SlotValues<'_>) -> Result<String, PromptError> {
    let invalid = || PromptError::InvalidStage {
        strategy: strategy.name(),
        stage,
    };
    match stage {
        Stage::Plan => {
            if strategy.plan_source().is_none() {
                return Err(invalid());
            }
            let d = slots
                .description
                .ok_or(PromptError::MissingSlotValue(prompts::SLOT_DESCRIPTION))?;
            Ok(prompts::plan_prompt(d))
        }
        Stage::Feedback => fill(prompts::FEEDBACK, slots),
        s if s == strategy.first_stage() => {
            let body = fill(strategy.template(), slots)?;
            Ok(if strategy.uses_rc2_help() {
                prompts::with_rc2_help(&body)
            } else {
                body
            })
        }
        _ => Err(invalid()),
    }
}

#[derive(Clone)]
pub struct StrategyRegistry {
    strategies: BTreeMap<String, Arc<dyn Strategy>>,
}

impl StrategyRegistry {
    pub fn empty() -> Self {
        StrategyRegistry {
            strategies: BTreeMap::new(),
        }
    }

    /// The five column strategies. `maxsat-plan-from:<provider>` is resolved
    /// on demand.
    pub fn with_defaults() -> Self {
        let mut r = Self::empty();
        for (name, output, template) in [
            ("direct-answer", OutputKind::Answer, prompts::DIRECT),
            ("cot-answer", OutputKind::Answer, prompts::COT),
            ("pot-answer", OutputKind::Program, prompts::POT),
        ] {
            r.register(Arc::new(Baseline { name, output, template }));
        }
        r.register(Arc::new(MaxSat {
            name: "maxsat-no-plan".into(),
            plan: None,
        }));
        r.register(Arc::new(MaxSat {
            name: "maxsat-with-plan".into(),
            plan: Some(PlanSource::SameProvider),
        }));
        r
    }

    pub fn register(&mut self, s: Arc<dyn Strategy>) {
        self.strategies.insert(s.name(), s);
    }

    pub fn resolve(&self, name: &str) -> Option<Arc<dyn Strategy>> {
        if let Some(s) = self.strategies.get(name) {
            return Some(s.clone());
        }
        let provider = name.strip_prefix(PLAN_FROM_PREFIX)?;
        if provider.is_empty() {
            return None;
        }
        Some(Arc::new(MaxSat {
            name: name.to_string(),
            plan: Some(PlanSource::Provider(provider.to_string())),
        }))
    }

    pub fn names(&self) -> Vec<String> {
        self.strategies.keys().cloned().collect()
    }
}

impl Default for StrategyRegistry {
    fn default() -> Self {
        Self::with_defaults()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn desc(d: &str) -> SlotValues<'_> {
        SlotValues {
            description: Some(d),
            ..Default::default()
        }
    }

    #[test]
    fn registry_resolves_names() {
        let r = StrategyRegistry::with_defaults();
        assert_eq!(
            r.names(),
            vec!["cot-answer", "direct-answer", "maxsat-no-plan", "maxsat-with-plan", "pot-answer"]
        );
        let t = r.resolve("maxsat-plan-from:gpt").unwrap();
        assert_eq!(t.plan_source(), Some(PlanSource::Provider("gpt".into())));
        assert!(r.resolve("maxsat-plan-from:").is_none());
        assert!(r.resolve("tree-of-thought").is_none());
    }

    #[test]
    fn stage_prompts() {
        let r = StrategyRegistry::with_defaults();
        let plan = r.resolve("maxsat-with-plan").unwrap();
        let p = build_prompt(plan.as_ref(), Stage::Plan, &desc("six jobs")).unwrap();
        assert!(p.starts_with("You are an expert MaxSAT/SAT encoding designer."));

        let cot = r.resolve("cot-answer").unwrap();
        let p = build_prompt(cot.as_ref(), Stage::Baseline, &desc("d")).unwrap();
        assert!(p.contains("Think step-by-step to derive the optimal solution."));
        assert!(matches!(
            build_prompt(cot.as_ref(), Stage::Plan, &desc("d")),
            Err(PromptError::InvalidStage { .. })
        ));
        assert!(matches!(
            build_prompt(cot.as_ref(), Stage::Generate, &desc("d")),
            Err(PromptError::InvalidStage { .. })
        ));

        let fb = SlotValues {
            description: Some("d"),
            previous_output: Some("prev"),
            feedback: Some("Traceback"),
            ..Default::default()
        };
        let p = build_prompt(cot.as_ref(), Stage::Feedback, &fb).unwrap();
        assert!(p.contains("\"objective_cost\": <int>"));
        assert!(p.contains("---\nTraceback\n---"));

        let gen = build_prompt(plan.as_ref(), Stage::Generate, &desc("d"));
        assert_eq!(gen, Err(PromptError::MissingSlotValue(prompts::SLOT_PLAN)));
        let no_plan = r.resolve("maxsat-no-plan").unwrap();
        let g = build_prompt(no_plan.as_ref(), Stage::Generate, &desc("d")).unwrap();
        assert!(g.starts_with("RC2_HELP:\n"));
        assert!(g.contains("rc2.compute() returns the model"));
        let pot = r.resolve("pot-answer").unwrap();
        assert!(!build_prompt(pot.as_ref(), Stage::Baseline, &desc("d")).unwrap().contains("RC2"));
    }
}
