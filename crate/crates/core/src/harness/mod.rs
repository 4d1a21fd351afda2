//! Dataset assembly, experiment execution and acceptance tables.

pub mod dataset;
pub mod experiment;
pub mod store;
pub mod tables;

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

use crate::families::FamilyError;

pub use dataset::{
    build_dataset, build_records, default_size_params, instance_key, DatasetConfig, DatasetManifest, DatasetRecord,
    ManifestEntry, DEFAULT_DATASET_SEED, INSTANCES_PER_FAMILY,
};
pub use experiment::{run_experiment, run_id, ExperimentConfig, ProviderConfig, RunOptions, RunSummary};
pub use store::{CellKey, ResultsStore};
pub use tables::{
    acceptance_table, format_percent, render_csv, render_markdown, table_one, table_three, table_two, CellCount, GroupBy,
    Table, TableGrid, TableRow,
};

#[derive(Error, Debug)]
pub enum HarnessError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("solver and brute-force oracle disagree on {key}: solver {solver}, oracle {oracle}")]
    OracleDisagreement { key: String, solver: u64, oracle: u64 },
    #[error("grid exceeds the brute-force oracle caps: {0}")]
    TooLargeForOracle(String),
    #[error(transparent)]
    Family(#[from] FamilyError),
    #[error("corrupt data: {0}")]
    Corrupt(String),
    #[error("invalid configuration: {0}")]
    Config(String),
}

impl HarnessError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

pub(crate) fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| HarnessError::Corrupt(format!("{}: {e}", path.display())))
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), HarnessError> {
    let mut text = serde_json::to_string_pretty(value).expect("value serializes");
    text.push('\n');
    std::fs::write(path, text).map_err(|e| HarnessError::io(path, e))
}
