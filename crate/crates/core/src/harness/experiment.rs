//! Execution of the (record × strategy × provider) matrix.

use std::collections::{BTreeSet, HashMap};
use std::path::{Path, PathBuf};
use std::sync::{mpsc, Arc};
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::dataset::{instance_key, DatasetManifest};
use super::store::{ResultsStore, StoreWriter};
use super::HarnessError;
use crate::families::CanonicalInstance;
use crate::pipeline::{
    run_strategy, CompletionProvider, FeedbackPolicy, OpenAiCompatibleProvider, PipelineError, PlanCache, PlanSource,
    ProcessSandbox, ProviderSpec, ReplayProvider, RunEnv, Sandbox, StrategyRegistry, TaskRun, UnavailableSandbox,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ProviderConfig {
    Replay { name: String, bundle: PathBuf },
    OpenaiCompatible(ProviderSpec),
}

impl ProviderConfig {
    pub fn name(&self) -> &str {
        match self {
            ProviderConfig::Replay { name, .. } => name,
            ProviderConfig::OpenaiCompatible(s) => &s.name,
        }
    }

    fn build(&self) -> Result<Arc<dyn CompletionProvider>, HarnessError> {
        match self {
            ProviderConfig::Replay { name, bundle } => {
                let mut p = ReplayProvider::load(bundle).map_err(|e| HarnessError::Config(e.to_string()))?;
                if p.name() != name {
                    let b = p.bundle().clone();
                    p = ReplayProvider::from_bundle(crate::pipeline::ReplayBundle {
                        name: name.clone(),
                        responses: b.responses,
                    });
                }
                Ok(Arc::new(p))
            }
            ProviderConfig::OpenaiCompatible(spec) => Ok(Arc::new(
                OpenAiCompatibleProvider::new(spec.clone()).map_err(|e| HarnessError::Config(e.to_string()))?,
            )),
        }
    }
}

fn default_budget() -> u64 {
    300
}
fn default_program_timeout() -> u64 {
    120
}
fn default_workers() -> usize {
    1
}
fn default_results_dir() -> PathBuf {
    PathBuf::from("results")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub manifest: PathBuf,
    pub strategies: Vec<String>,
    pub providers: Vec<ProviderConfig>,
    /// Wall-clock budget of one TaskRun.
    #[serde(default = "default_budget")]
    pub budget_secs: u64,
    #[serde(default = "default_program_timeout")]
    pub program_timeout_secs: u64,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default)]
    pub feedback_policy: FeedbackPolicy,
    /// Runner for generated programs; without one every program fails to run.
    #[serde(default)]
    pub sandbox: Option<ProcessSandbox>,
    #[serde(default = "default_results_dir")]
    pub results_dir: PathBuf,
    /// Restricts the run to these instance keys (`family/index/variant`).
    #[serde(default)]
    pub instances: Option<Vec<String>>,
}

impl ExperimentConfig {
    /// Reads a config file; relative paths are taken from the file's directory.
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let mut c: ExperimentConfig = super::read_json(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut c.manifest);
        fix(&mut c.results_dir);
        for p in &mut c.providers {
            if let ProviderConfig::Replay { bundle, .. } = p {
                fix(bundle);
            }
        }
        Ok(c)
    }

    pub fn validate(&self, registry: &StrategyRegistry) -> Result<(), HarnessError> {
        if self.workers == 0 {
            return Err(HarnessError::Config("workers must be at least 1".into()));
        }
        if self.budget_secs == 0 || self.program_timeout_secs == 0 {
            return Err(HarnessError::Config("budgets must be positive".into()));
        }
        let mut names = BTreeSet::new();
        for p in &self.providers {
            if !names.insert(p.name()) {
                return Err(HarnessError::Config(format!("duplicate provider '{}'", p.name())));
            }
        }
        for s in &self.strategies {
            let strategy = registry
                .resolve(s)
                .ok_or_else(|| HarnessError::Config(format!("unknown strategy '{s}'")))?;
            if let Some(PlanSource::Provider(p)) = strategy.plan_source() {
                if !names.contains(p.as_str()) {
                    return Err(HarnessError::Config(format!("strategy '{s}' names an unconfigured provider")));
                }
            }
        }
        Ok(())
    }
}

/// Hash of the manifest digest and the config, identifying a run. The
/// results directory and worker count do not change results and are left out.
pub fn run_id(manifest_digest: &str, config: &ExperimentConfig) -> String {
    let mut c = config.clone();
    c.results_dir = PathBuf::new();
    c.workers = 1;
    let mut h = Sha256::new();
    h.update(manifest_digest.as_bytes());
    h.update(serde_json::to_vec(&c).expect("config serializes"));
    hex::encode(h.finalize())[..16].to_string()
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Stop after this many new cells.
    pub limit: Option<usize>,
}

#[derive(Debug)]
pub struct RunSummary {
    pub run_id: String,
    pub dir: PathBuf,
    pub executed: usize,
    pub skipped: usize,
    pub store: ResultsStore,
}

pub fn run_experiment(config: &ExperimentConfig, options: &RunOptions) -> Result<RunSummary, HarnessError> {
    let registry = StrategyRegistry::with_defaults();
    config.validate(&registry)?;
    let manifest = DatasetManifest::load(&config.manifest)?;
    let root = config.manifest.parent().unwrap_or(Path::new(".")).to_path_buf();
    let wanted: Option<BTreeSet<&str>> = config
        .instances
        .as_ref()
        .map(|v| v.iter().map(String::as_str).collect());

    let mut tasks: Vec<(String, CanonicalInstance)> = Vec::new();
    for e in &manifest.records {
        let key = instance_key(e.family, e.index, e.variant);
        if wanted.as_ref().is_some_and(|w| !w.contains(key.as_str())) {
            continue;
        }
        tasks.push((key, manifest.load_record(&root, e)?.to_canonical()?));
    }

    let providers: Vec<Arc<dyn CompletionProvider>> =
        config.providers.iter().map(ProviderConfig::build).collect::<Result<_, _>>()?;
    let by_name: HashMap<String, Arc<dyn CompletionProvider>> = providers
        .iter()
        .map(|p| (p.name().to_string(), p.clone()))
        .collect();
    let sandbox: Arc<dyn Sandbox> = match &config.sandbox {
        Some(s) => Arc::new(s.clone()),
        None => Arc::new(UnavailableSandbox),
    };
    let env = RunEnv {
        sandbox,
        budget: Duration::from_secs(config.budget_secs),
        program_timeout: Duration::from_secs(config.program_timeout_secs),
        policy: config.feedback_policy,
        plan_providers: by_name,
        plan_cache: Arc::new(PlanCache::default()),
    };

    let id = run_id(&manifest.digest, config);
    let dir = config.results_dir.join(&id);
    std::fs::create_dir_all(&dir).map_err(|e| HarnessError::io(&dir, e))?;
    super::write_json(&dir.join("config.json"), config)?;
    let jsonl = dir.join("taskruns.jsonl");
    let mut store = ResultsStore::load(&jsonl)?;

    let mut cells = Vec::new();
    let mut skipped = 0;
    for (ti, (key, _)) in tasks.iter().enumerate() {
        for s in &config.strategies {
            for p in &providers {
                if store.contains(&(key.clone(), s.clone(), p.name().to_string())) {
                    skipped += 1;
                } else {
                    cells.push((ti, s.clone(), p.clone()));
                }
            }
        }
    }
    if let Some(limit) = options.limit {
        cells.truncate(limit);
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| HarnessError::Config(e.to_string()))?;
    let (tx, rx) = mpsc::channel::<Result<TaskRun, PipelineError>>();
    let mut writer = StoreWriter::open(&jsonl)?;
    let written = std::thread::scope(|scope| {
        let w = scope.spawn(|| -> Result<Vec<TaskRun>, HarnessError> {
            let mut done = Vec::new();
            let mut first_err = None;
            for r in rx {
                match r {
                    Ok(run) => {
                        writer.append(&run)?;
                        done.push(run);
                    }
                    Err(e) => {
                        first_err.get_or_insert(e);
                    }
                }
            }
            match first_err {
                Some(e) => Err(HarnessError::Config(e.to_string())),
                None => Ok(done),
            }
        });
        pool.install(|| {
            cells.par_iter().for_each_with(tx, |tx, (ti, s, p)| {
                let (key, task) = &tasks[*ti];
                let strategy = registry.resolve(s).expect("validated");
                let _ = tx.send(run_strategy(task, key, strategy.as_ref(), p.as_ref(), &env));
            });
        });
        w.join().expect("writer thread")
    })?;
    let executed = written.len();
    for run in written {
        store.insert(run);
    }
    Ok(RunSummary {
        run_id: id,
        dir,
        executed,
        skipped,
        store,
    })
}
