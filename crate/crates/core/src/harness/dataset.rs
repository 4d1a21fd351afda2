//! Dataset assembly: generation, canonical solving with an oracle
//! cross-check, and the on-disk layout `<family>/<index>/<variant>.json`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::HarnessError;
use crate::families::{
    cover, generate_instance, mis, mix_seed, scheduling, CanonicalInstance, FamilyId, Instance, PrefVariant,
    SemanticSolution, SizeParams, VarMap,
};
use crate::solver::SolverConfig;
use crate::wcnf::{parse_wdimacs, serialize_wdimacs};

pub const DEFAULT_DATASET_SEED: u64 = 2024;
pub const INSTANCES_PER_FAMILY: usize = 25;

/// Size parameters of instance `index` in the default grid.
pub fn default_size_params(family: FamilyId, index: usize) -> SizeParams {
    let i = index.min(INSTANCES_PER_FAMILY - 1);
    match family {
        FamilyId::Mis => SizeParams::Mis {
            n: 6 + 8 * i / 24,
            edge_prob: 0.3,
        },
        FamilyId::Scheduling => {
            let jobs = 5 + 3 * i / 24;
            SizeParams::Scheduling {
                jobs,
                slots: jobs + 2,
                prec_prob: 0.25,
            }
        }
        FamilyId::Setcover => SizeParams::Setcover {
            universe: 8 + 6 * i / 24,
            sets: 6 + 6 * i / 24,
        },
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub seed: u64,
    /// Size parameters per family, one entry per instance index.
    pub grid: BTreeMap<FamilyId, Vec<SizeParams>>,
    #[serde(skip)]
    pub solver: SolverConfig,
}

impl DatasetConfig {
    pub fn default_with_seed(seed: u64) -> Self {
        let grid = FamilyId::ALL
            .into_iter()
            .map(|f| (f, (0..INSTANCES_PER_FAMILY).map(|i| default_size_params(f, i)).collect()))
            .collect();
        DatasetConfig {
            seed,
            grid,
            solver: SolverConfig::default(),
        }
    }

    fn check_caps(&self) -> Result<(), HarnessError> {
        for (family, params) in &self.grid {
            for p in params {
                if p.family() != *family {
                    return Err(HarnessError::Config(format!("{family} grid holds {} parameters", p.family())));
                }
                let over = match *p {
                    SizeParams::Mis { n, .. } => n > mis::ORACLE_MAX_VERTICES,
                    SizeParams::Scheduling { jobs, slots, .. } => {
                        jobs > scheduling::ORACLE_MAX_JOBS || slots > scheduling::ORACLE_MAX_SLOTS
                    }
                    SizeParams::Setcover { sets, .. } => sets > cover::ORACLE_MAX_SETS,
                };
                if over {
                    return Err(HarnessError::TooLargeForOracle(format!("{p:?}")));
                }
            }
        }
        Ok(())
    }
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self::default_with_seed(DEFAULT_DATASET_SEED)
    }
}

/// One instance-variant file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub family: FamilyId,
    pub index: usize,
    pub seed: u64,
    pub variant: PrefVariant,
    pub size_params: SizeParams,
    pub description: String,
    pub wdimacs: String,
    pub varmap: VarMap,
    pub optimal_cost: u64,
    pub reference_solution: SemanticSolution,
    pub instance: Instance,
    pub hard_labels: Vec<String>,
}

impl DatasetRecord {
    pub fn key(&self) -> String {
        instance_key(self.family, self.index, self.variant)
    }

    pub fn relative_path(&self) -> PathBuf {
        record_path(self.family, self.index, self.variant)
    }

    pub fn to_canonical(&self) -> Result<CanonicalInstance, HarnessError> {
        let formula = parse_wdimacs(&self.wdimacs).map_err(|e| HarnessError::Corrupt(format!("{}: {e}", self.key())))?;
        Ok(CanonicalInstance {
            family: self.family,
            instance: self.instance.clone(),
            variant: self.variant,
            formula,
            varmap: self.varmap.clone(),
            hard_labels: self.hard_labels.clone(),
            optimal_cost: self.optimal_cost,
            reference_solution: self.reference_solution.clone(),
            description: self.description.clone(),
        })
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("record serializes");
        s.push('\n');
        s
    }
}

pub fn instance_key(family: FamilyId, index: usize, variant: PrefVariant) -> String {
    format!("{family}/{index}/{variant}")
}

pub fn record_path(family: FamilyId, index: usize, variant: PrefVariant) -> PathBuf {
    PathBuf::from(family.as_str())
        .join(index.to_string())
        .join(format!("{variant}.json"))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub family: FamilyId,
    pub index: usize,
    pub variant: PrefVariant,
    pub path: String,
    pub optimal_cost: u64,
    /// SHA-256 of the record file.
    pub digest: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub seed: u64,
    pub records: Vec<ManifestEntry>,
    /// SHA-256 over seed and entries.
    pub digest: String,
}

impl DatasetManifest {
    fn new(seed: u64, records: Vec<ManifestEntry>) -> Self {
        let mut h = Sha256::new();
        h.update(seed.to_le_bytes());
        h.update(serde_json::to_vec(&records).expect("entries serialize"));
        let digest = hex::encode(h.finalize());
        DatasetManifest { seed, records, digest }
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let m: DatasetManifest = super::read_json(path)?;
        if DatasetManifest::new(m.seed, m.records.clone()).digest != m.digest {
            return Err(HarnessError::Corrupt(format!("{}: manifest digest mismatch", path.display())));
        }
        Ok(m)
    }

    /// Loads one record, checking its file digest.
    pub fn load_record(&self, root: &Path, entry: &ManifestEntry) -> Result<DatasetRecord, HarnessError> {
        let path = root.join(&entry.path);
        let bytes = std::fs::read(&path).map_err(|e| HarnessError::io(&path, e))?;
        if hex::encode(Sha256::digest(&bytes)) != entry.digest {
            return Err(HarnessError::Corrupt(format!("{}: digest mismatch", path.display())));
        }
        serde_json::from_slice(&bytes).map_err(|e| HarnessError::Corrupt(format!("{}: {e}", path.display())))
    }
}

/// Generates, solves and cross-checks every record in memory.
pub fn build_records(config: &DatasetConfig) -> Result<Vec<DatasetRecord>, HarnessError> {
    config.check_caps()?;
    let jobs: Vec<(FamilyId, usize, SizeParams)> = config
        .grid
        .iter()
        .flat_map(|(&f, ps)| ps.iter().enumerate().map(move |(i, p)| (f, i, p.clone())))
        .collect();
    let per_instance: Vec<Vec<DatasetRecord>> = jobs
        .par_iter()
        .map(|(family, index, params)| build_instance(config, *family, *index, params))
        .collect::<Result<_, _>>()?;
    Ok(per_instance.into_iter().flatten().collect())
}

fn build_instance(
    config: &DatasetConfig,
    family: FamilyId,
    index: usize,
    params: &SizeParams,
) -> Result<Vec<DatasetRecord>, HarnessError> {
    let seed = mix_seed(config.seed, family, index as u64);
    let instance = generate_instance(params, seed)?;
    let mut out = Vec::new();
    for (vi, variant) in PrefVariant::ALL.into_iter().enumerate() {
        let canon = CanonicalInstance::build(instance.clone(), variant, seed.wrapping_add(vi as u64), &config.solver)?;
        let oracle = instance.brute_force_optimum(variant).map_err(|e| match e {
            crate::families::FamilyError::TooLargeForOracle(m) => HarnessError::TooLargeForOracle(m),
            other => other.into(),
        })?;
        if oracle != canon.optimal_cost {
            return Err(HarnessError::OracleDisagreement {
                key: instance_key(family, index, variant),
                solver: canon.optimal_cost,
                oracle,
            });
        }
        out.push(DatasetRecord {
            family,
            index,
            seed,
            variant,
            size_params: params.clone(),
            description: canon.description,
            wdimacs: serialize_wdimacs(&canon.formula),
            varmap: canon.varmap,
            optimal_cost: canon.optimal_cost,
            reference_solution: canon.reference_solution,
            instance: canon.instance,
            hard_labels: canon.hard_labels,
        });
    }
    Ok(out)
}

/// Builds the dataset under `out` and writes `manifest.json`.
pub fn build_dataset(config: &DatasetConfig, out: &Path) -> Result<DatasetManifest, HarnessError> {
    let records = build_records(config)?;
    let mut entries = Vec::with_capacity(records.len());
    for r in &records {
        let rel = r.relative_path();
        let path = out.join(&rel);
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
        }
        let text = r.to_json();
        std::fs::write(&path, &text).map_err(|e| HarnessError::io(&path, e))?;
        entries.push(ManifestEntry {
            family: r.family,
            index: r.index,
            variant: r.variant,
            path: rel.to_string_lossy().replace('\\', "/"),
            optimal_cost: r.optimal_cost,
            digest: hex::encode(Sha256::digest(text.as_bytes())),
        });
    }
    let manifest = DatasetManifest::new(config.seed, entries);
    let path = out.join("manifest.json");
    super::write_json(&path, &manifest)?;
    Ok(manifest)
}
