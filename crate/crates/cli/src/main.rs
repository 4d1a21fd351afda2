use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::Value;

use prefsat_core::harness::{
    self, build_dataset, render_csv, render_markdown, DatasetConfig, DatasetManifest, DatasetRecord, ExperimentConfig,
    ResultsStore, RunOptions, TableGrid,
};
use prefsat_core::pipeline::parse::interpret;
use prefsat_core::solver::{self, verify_candidate, EngineKind, SolveOutcome, SolverConfig, Verdict};
use prefsat_core::wcnf::parse_wdimacs;

#[derive(Parser)]
#[command(name = "prefsat", version, about = "Preference-aware MaxSAT workbench")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the benchmark dataset.
    Gen {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = harness::DEFAULT_DATASET_SEED)]
        seed: u64,
    },
    /// Solve a WDIMACS file.
    Solve {
        file: PathBuf,
        #[arg(long, default_value = "branch-and-bound")]
        engine: String,
        /// Time budget in seconds.
        #[arg(long, default_value_t = 60)]
        timeout: u64,
    },
    /// Check a candidate solution against a dataset record.
    Verify {
        #[arg(long)]
        instance: PathBuf,
        /// Solution JSON, or a path to a file holding it.
        #[arg(long)]
        solution: String,
    },
    /// Run an experiment matrix.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Stop after this many new cells.
        #[arg(long)]
        limit: Option<usize>,
    },
    /// Print an acceptance table of a finished run.
    Report {
        #[arg(long)]
        run: String,
        #[arg(long, value_parser = ["1", "2", "3"])]
        table: String,
        #[arg(long, default_value = "results")]
        results: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Md)]
        format: Format,
    },
    /// Print the brute-force optimum of a dataset record.
    Oracle {
        #[arg(long)]
        instance: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Md,
    Csv,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(cmd: Command) -> Result<u8> {
    match cmd {
        Command::Gen { out, seed } => gen(&out, seed),
        Command::Solve { file, engine, timeout } => solve(&file, &engine, timeout),
        Command::Verify { instance, solution } => verify(&instance, &solution),
        Command::Run { config, limit } => run(&config, limit),
        Command::Report {
            run,
            table,
            results,
            format,
        } => report(&results, &run, &table, format),
        Command::Oracle { instance } => oracle(&instance),
    }
}

fn gen(out: &Path, seed: u64) -> Result<u8> {
    let manifest = build_dataset(&DatasetConfig::default_with_seed(seed), out)?;
    println!("{} records", manifest.records.len());
    println!("manifest digest {}", manifest.digest);
    Ok(0)
}

fn solve(file: &Path, engine: &str, timeout: u64) -> Result<u8> {
    let engine: EngineKind = match engine.parse() {
        Ok(e) => e,
        Err(e) => {
            eprintln!("error: {e}");
            return Ok(2);
        }
    };
    let text = std::fs::read_to_string(file).with_context(|| format!("reading {}", file.display()))?;
    let formula = parse_wdimacs(&text).with_context(|| format!("parsing {}", file.display()))?;
    let config = SolverConfig {
        time_budget: Duration::from_secs(timeout),
        engine,
    };
    match solver::solve(&formula, &config)? {
        SolveOutcome::Optimal { cost, model } => {
            println!("o {cost}");
            println!("s OPTIMUM FOUND");
            let lits: Vec<String> = model.to_lits().iter().map(|l| l.to_string()).collect();
            println!("v {}", lits.join(" "));
        }
        SolveOutcome::Unsat => println!("s UNSATISFIABLE"),
        SolveOutcome::TimedOut { best_cost_so_far } => {
            if let Some(c) = best_cost_so_far {
                println!("o {c}");
            }
            println!("s UNKNOWN");
        }
    }
    Ok(0)
}

fn load_record(path: &Path) -> Result<DatasetRecord> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn verify(instance: &Path, solution: &str) -> Result<u8> {
    let canon = load_record(instance)?.to_canonical()?;
    let raw = match serde_json::from_str::<Value>(solution) {
        Ok(v) => v,
        Err(_) => {
            let text = std::fs::read_to_string(solution).with_context(|| format!("reading solution {solution}"))?;
            match serde_json::from_str::<Value>(&text) {
                Ok(v) => v,
                Err(e) => {
                    return emit(Verdict::Malformed {
                        reason: format!("solution is not JSON: {e}"),
                    })
                }
            }
        }
    };
    let verdict = match interpret(&raw, canon.family) {
        Ok(p) => verify_candidate(&canon, &p.solution)?,
        Err(e) => Verdict::Malformed { reason: e.to_string() },
    };
    emit(verdict)
}

fn emit(verdict: Verdict) -> Result<u8> {
    println!("{}", serde_json::to_string(&verdict)?);
    Ok(match verdict {
        Verdict::Accepted { .. } => 0,
        Verdict::Infeasible { .. } => 3,
        Verdict::Suboptimal { .. } => 4,
        Verdict::Malformed { .. } => 5,
    })
}

fn run(config: &Path, limit: Option<usize>) -> Result<u8> {
    let cfg = ExperimentConfig::load(config)?;
    let summary = harness::run_experiment(&cfg, &RunOptions { limit })?;
    println!("run {}", summary.run_id);
    println!("executed {} skipped {}", summary.executed, summary.skipped);
    println!("results {}", summary.dir.display());
    Ok(0)
}

fn report(results: &Path, run: &str, table: &str, format: Format) -> Result<u8> {
    let dir = results.join(run);
    let config_path = dir.join("config.json");
    if !config_path.exists() {
        bail!("no run '{run}' under {}", results.display());
    }
    let text = std::fs::read_to_string(&config_path)?;
    let cfg: ExperimentConfig = serde_json::from_str(&text).with_context(|| format!("parsing {}", config_path.display()))?;
    let manifest = DatasetManifest::load(&cfg.manifest)?;
    let store = ResultsStore::load(&dir.join("taskruns.jsonl"))?;
    let grid = TableGrid::from_run(&manifest, &cfg);
    let t = match table {
        "1" => harness::table_one(&store, &grid),
        "2" => harness::table_two(&store, &grid),
        _ => harness::table_three(&store, &grid),
    };
    let md = render_markdown(&t);
    let csv = render_csv(&t);
    std::fs::write(dir.join(format!("table{table}.md")), &md)?;
    std::fs::write(dir.join(format!("table{table}.csv")), &csv)?;
    match format {
        Format::Md => print!("{md}"),
        Format::Csv => print!("{csv}"),
    }
    Ok(0)
}

fn oracle(instance: &Path) -> Result<u8> {
    let r = load_record(instance)?;
    println!("{}", r.instance.brute_force_optimum(r.variant)?);
    Ok(0)
}
