//! Acceptance-rate tables in Markdown and CSV.

use serde::{Deserialize, Serialize};

use super::dataset::{instance_key, DatasetManifest};
use super::experiment::ExperimentConfig;
use super::store::ResultsStore;
use crate::families::{FamilyId, PrefVariant};
use crate::pipeline::strategy::PLAN_FROM_PREFIX;

/// The cells a table is expected to cover. Cells absent from the store
/// count as not accepted.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TableGrid {
    pub instances: Vec<(FamilyId, usize, PrefVariant)>,
    pub strategies: Vec<String>,
    pub providers: Vec<String>,
}

impl TableGrid {
    pub fn from_run(manifest: &DatasetManifest, config: &ExperimentConfig) -> Self {
        let wanted = config.instances.as_ref();
        TableGrid {
            instances: manifest
                .records
                .iter()
                .filter(|e| wanted.is_none_or(|w| w.contains(&instance_key(e.family, e.index, e.variant))))
                .map(|e| (e.family, e.index, e.variant))
                .collect(),
            strategies: config.strategies.clone(),
            providers: config.providers.iter().map(|p| p.name().to_string()).collect(),
        }
    }

    fn families(&self) -> Vec<FamilyId> {
        let mut f: Vec<FamilyId> = self.instances.iter().map(|x| x.0).collect();
        f.sort();
        f.dedup();
        f
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum GroupBy {
    FamilyModel,
    FamilyModelVariant,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellCount {
    pub strategy: String,
    pub accepted: usize,
    pub total: usize,
    /// Expected cells with no record in the store.
    pub missing: usize,
}

impl CellCount {
    pub fn percent(&self) -> String {
        format_percent(self.accepted, self.total)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableRow {
    pub family: FamilyId,
    pub provider: String,
    pub variant: Option<PrefVariant>,
    pub cells: Vec<CellCount>,
}

/// `100 × accepted / total` with one decimal, rounded half up, computed in
/// integers.
pub fn format_percent(accepted: usize, total: usize) -> String {
    if total == 0 {
        return "n/a".into();
    }
    let (a, t) = (accepted as u128, total as u128);
    let tenths = (2000 * a + t) / (2 * t);
    format!("{}.{}", tenths / 10, tenths % 10)
}

fn count(store: &ResultsStore, grid: &TableGrid, keep: impl Fn(&(FamilyId, usize, PrefVariant)) -> bool, strategy: &str, provider: &str) -> CellCount {
    let mut c = CellCount {
        strategy: strategy.to_string(),
        accepted: 0,
        total: 0,
        missing: 0,
    };
    for inst in grid.instances.iter().filter(|i| keep(i)) {
        c.total += 1;
        let key = (instance_key(inst.0, inst.1, inst.2), strategy.to_string(), provider.to_string());
        match store.get(&key) {
            Some(run) if run.final_verdict.is_accepted() => c.accepted += 1,
            Some(_) => {}
            None => c.missing += 1,
        }
    }
    c
}

pub fn acceptance_table(store: &ResultsStore, groupby: GroupBy, grid: &TableGrid) -> Vec<TableRow> {
    let variants: Vec<Option<PrefVariant>> = match groupby {
        GroupBy::FamilyModel => vec![None],
        GroupBy::FamilyModelVariant => PrefVariant::ALL.into_iter().map(Some).collect(),
    };
    let mut rows = Vec::new();
    for family in grid.families() {
        for provider in &grid.providers {
            for &variant in &variants {
                let keep = |i: &(FamilyId, usize, PrefVariant)| i.0 == family && variant.is_none_or(|v| i.2 == v);
                rows.push(TableRow {
                    family,
                    provider: provider.clone(),
                    variant,
                    cells: grid
                        .strategies
                        .iter()
                        .map(|s| count(store, grid, keep, s, provider))
                        .collect(),
                });
            }
        }
    }
    rows
}

/// A rendered table: header, body and the number of missing cells.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub missing: usize,
}

/// Table 1: one row per (family, model), all variants pooled.
pub fn table_one(store: &ResultsStore, grid: &TableGrid) -> Table {
    let rows = acceptance_table(store, GroupBy::FamilyModel, grid);
    let mut header = vec!["Family".to_string(), "Model".to_string()];
    header.extend(grid.strategies.iter().cloned());
    Table {
        header,
        missing: rows.iter().flat_map(|r| &r.cells).map(|c| c.missing).sum(),
        rows: rows
            .iter()
            .map(|r| {
                let mut line = vec![r.family.to_string(), r.provider.clone()];
                line.extend(r.cells.iter().map(CellCount::percent));
                line
            })
            .collect(),
    }
}

/// Table 2: one row per (family, model), each cell `none / p1 / p2 / p3`.
pub fn table_two(store: &ResultsStore, grid: &TableGrid) -> Table {
    let rows = acceptance_table(store, GroupBy::FamilyModelVariant, grid);
    let mut header = vec!["Family".to_string(), "Model".to_string()];
    header.extend(grid.strategies.iter().cloned());
    let mut out = Vec::new();
    for chunk in rows.chunks(PrefVariant::ALL.len()) {
        let mut line = vec![chunk[0].family.to_string(), chunk[0].provider.clone()];
        for si in 0..grid.strategies.len() {
            let parts: Vec<String> = chunk.iter().map(|r| r.cells[si].percent()).collect();
            line.push(parts.join(" / "));
        }
        out.push(line);
    }
    Table {
        header,
        missing: rows.iter().flat_map(|r| &r.cells).map(|c| c.missing).sum(),
        rows: out,
    }
}

/// Table 3: plan transfer. One row per (family, model, plan source) with
/// per-variant columns; the model's own plan is `maxsat-with-plan`.
pub fn table_three(store: &ResultsStore, grid: &TableGrid) -> Table {
    let mut header = vec!["Family".to_string(), "Model".to_string(), "Plan-from".to_string()];
    header.extend(PrefVariant::ALL.iter().map(|v| v.to_string()));
    let mut rows = Vec::new();
    let mut missing = 0;
    for family in grid.families() {
        for model in &grid.providers {
            for source in &grid.providers {
                let strategy = if source == model {
                    "maxsat-with-plan".to_string()
                } else {
                    format!("{PLAN_FROM_PREFIX}{source}")
                };
                if !grid.strategies.contains(&strategy) {
                    continue;
                }
                let mut line = vec![family.to_string(), model.clone(), source.clone()];
                for v in PrefVariant::ALL {
                    let c = count(store, grid, |i| i.0 == family && i.2 == v, &strategy, model);
                    missing += c.missing;
                    line.push(c.percent());
                }
                rows.push(line);
            }
        }
    }
    Table { header, rows, missing }
}

pub fn render_markdown(table: &Table) -> String {
    let cols = table.header.len();
    let width: Vec<usize> = (0..cols)
        .map(|c| {
            std::iter::once(&table.header[c])
                .chain(table.rows.iter().map(|r| &r[c]))
                .map(|s| s.chars().count())
                .max()
                .unwrap_or(0)
                .max(3)
        })
        .collect();
    let line = |cells: &[String]| {
        let padded: Vec<String> = cells
            .iter()
            .enumerate()
            .map(|(i, s)| format!("{s:<w$}", w = width[i]))
            .collect();
        format!("| {} |\n", padded.join(" | "))
    };
    let mut out = line(&table.header);
    let rule: Vec<String> = width.iter().map(|&w| "-".repeat(w)).collect();
    out.push_str(&format!("|-{}-|\n", rule.join("-|-")));
    for r in &table.rows {
        out.push_str(&line(r));
    }
    if table.missing > 0 {
        out.push_str(&format!(
            "\n{} expected cells have no record and are counted as not accepted.\n",
            table.missing
        ));
    }
    out
}

pub fn render_csv(table: &Table) -> String {
    let field = |s: &String| {
        if s.contains([',', '"', '\n']) {
            format!("\"{}\"", s.replace('"', "\"\""))
        } else {
            s.clone()
        }
    };
    let mut out = String::new();
    for r in std::iter::once(&table.header).chain(&table.rows) {
        out.push_str(&r.iter().map(field).collect::<Vec<_>>().join(","));
        out.push('\n');
    }
    out
}
