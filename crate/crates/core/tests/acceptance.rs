//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

mod common;

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use common::*;
use prefsat_core::families::{FamilyId, PrefVariant, SizeParams};
use prefsat_core::harness::{
    build_dataset, build_records, format_percent, instance_key, run_experiment, table_one, table_two, DatasetConfig,
    DatasetManifest, ExperimentConfig, ProviderConfig, ResultsStore, RunOptions, TableGrid,
};
use prefsat_core::pipeline::provider::{replay_any_key, replay_key};
use prefsat_core::pipeline::{
    run_strategy, ExecResult, FeedbackPolicy, ReplayBundle, ReplayProvider, RunEnv, StrategyRegistry, MAX_ATTEMPTS,
};
use prefsat_core::solver::{self, verify_candidate, EngineKind, SolveOutcome, SolverConfig, Verdict};
use prefsat_core::wcnf::{evaluate, parse_wdimacs, serialize_wdimacs, Assignment, WcnfBuilder, WcnfFormula};

const EXAMPLE_ONE: &str = "p wcnf 3 4 5\n5 1 2 0\n5 -2 3 0\n1 -1 0\n3 -3 0\n";

const EXAMPLE_ONE_LIMIT: Duration = Duration::from_millis(10);
const MOTIVATION_LIMIT: Duration = Duration::from_secs(1);
const ORACLE_SWEEP_LIMIT: Duration = Duration::from_secs(600);
const RANDOM_SOLVE_LIMIT: Duration = Duration::from_secs(30);
const ROUNDTRIP_LIMIT: Duration = Duration::from_secs(5);

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within(elapsed: Duration, limit: Duration) -> Result<String, String> {
    let text = format!("{:.1} ms, limit {} ms", elapsed.as_secs_f64() * 1e3, limit.as_millis());
    check(elapsed < limit, format!("too slow: {text}"))?;
    Ok(text)
}

fn example_one() -> Outcome {
    let f = parse_wdimacs(EXAMPLE_ONE).map_err(|e| e.to_string())?;
    // warm-up so the timing measures the solve, not first-touch allocation
    let _ = solver::solve(&f, &SolverConfig::default());
    let t = Instant::now();
    let out = solver::solve(&f, &SolverConfig::default()).map_err(|e| e.to_string())?;
    let good = evaluate(&f, &Assignment::new(vec![true, false, false])).map_err(|e| e.to_string())?;
    let bad = evaluate(&f, &Assignment::new(vec![false, true, true])).map_err(|e| e.to_string())?;
    let elapsed = t.elapsed();
    check(out.cost() == Some(1), format!("solve returned {out:?}"))?;
    check(good.hard_satisfied && good.cost == 1, format!("first assignment {good:?}"))?;
    check(bad.hard_satisfied && bad.cost == 3, format!("second assignment {bad:?}"))?;
    Ok(format!("optimum 1, assignment costs 1 and 3 ({})", within(elapsed, EXAMPLE_ONE_LIMIT)?))
}

fn motivation_fixture() -> Outcome {
    let t = Instant::now();
    let c = motivation();
    let parse = |s: &str| {
        prefsat_core::families::SemanticSolution::from_json(FamilyId::Scheduling, &serde_json::from_str(s).unwrap())
            .unwrap()
    };
    let wrong = verify_candidate(&c, &parse(WRONG)).map_err(|e| e.to_string())?;
    check(
        wrong
            == Verdict::Infeasible {
                violations: vec!["J2 must precede J1".into()],
            },
        format!("wrong schedule gave {wrong:?}"),
    )?;
    let right = verify_candidate(&c, &parse(RIGHT)).map_err(|e| e.to_string())?;
    check(right == Verdict::Accepted { cost: 2 }, format!("right schedule gave {right:?}"))?;
    let (opt, optima) = c.instance.brute_force_optima(PrefVariant::P2).map_err(|e| e.to_string())?;
    check(opt == 2, format!("brute force optimum {opt}"))?;
    check(optima.len() >= 2, format!("only {} optima", optima.len()))?;
    for s in &optima {
        let v = verify_candidate(&c, s).map_err(|e| e.to_string())?;
        check(v.is_accepted(), format!("optimum {s:?} gave {v:?}"))?;
    }
    let elapsed = t.elapsed();
    Ok(format!(
        "J2/J1 violation named, cost 2 accepted, {} optima all accepted ({})",
        optima.len(),
        within(elapsed, MOTIVATION_LIMIT)?
    ))
}

fn oracle_and_dataset() -> (Outcome, Outcome) {
    let t = Instant::now();
    let config = DatasetConfig::default();
    let records = match build_records(&config) {
        Ok(r) => r,
        Err(e) => return (Err(e.to_string()), Err(e.to_string())),
    };
    let mismatches: Vec<String> = records
        .par_iter()
        .filter_map(|r| {
            let f = parse_wdimacs(&r.wdimacs).ok()?;
            let solved = solver::solve(&f, &SolverConfig::default()).ok()?.cost();
            let oracle = r.instance.brute_force_optimum(r.variant).ok();
            (solved.is_none() || solved != oracle || solved != Some(r.optimal_cost))
                .then(|| format!("{}: solver {solved:?} oracle {oracle:?}", r.key()))
        })
        .collect();
    let elapsed = t.elapsed();
    let oracle = check(mismatches.is_empty(), format!("{} mismatches, first {:?}", mismatches.len(), mismatches.first()))
        .and_then(|_| check(records.len() == 300, format!("{} records", records.len())))
        .and_then(|_| {
            check(
                elapsed < ORACLE_SWEEP_LIMIT,
                format!("sweep took {:.1} s", elapsed.as_secs_f64()),
            )
        })
        .map(|_| format!("300/300 exact ({:.1} s, limit 600 s)", elapsed.as_secs_f64()));

    let shape = (|| -> Outcome {
        let mut per: BTreeMap<(FamilyId, PrefVariant), usize> = BTreeMap::new();
        for r in &records {
            *per.entry((r.family, r.variant)).or_default() += 1;
        }
        check(records.len() == 300, format!("{} records", records.len()))?;
        check(per.len() == 12 && per.values().all(|&n| n == 25), format!("shape {per:?}"))?;
        let a = tempfile::tempdir().map_err(|e| e.to_string())?;
        let b = tempfile::tempdir().map_err(|e| e.to_string())?;
        let ma = build_dataset(&config, a.path()).map_err(|e| e.to_string())?;
        let mb = build_dataset(&config, b.path()).map_err(|e| e.to_string())?;
        check(ma.records.len() == 300, format!("manifest has {} records", ma.records.len()))?;
        check(ma.digest == mb.digest, "digests differ")?;
        let bytes_a = std::fs::read(a.path().join("manifest.json")).map_err(|e| e.to_string())?;
        let bytes_b = std::fs::read(b.path().join("manifest.json")).map_err(|e| e.to_string())?;
        check(bytes_a == bytes_b, "manifest bytes differ")?;
        Ok(format!("300 records = 3 x 25 x 4, digest {}", &ma.digest[..16]))
    })();
    (oracle, shape)
}

fn random_formula(rng: &mut ChaCha8Rng, max_vars: u32, max_clauses: usize) -> WcnfFormula {
    let n = rng.gen_range(1..=max_vars);
    let m = rng.gen_range(0..=max_clauses);
    let mut b = WcnfBuilder::new(n);
    for _ in 0..m {
        let len = rng.gen_range(1..=3);
        let lits: Vec<i32> = (0..len)
            .map(|_| {
                let v = rng.gen_range(1..=n) as i32;
                if rng.gen_bool(0.5) {
                    v
                } else {
                    -v
                }
            })
            .collect();
        if rng.gen_bool(0.2) {
            b.add_hard(&lits);
        } else {
            b.add_soft(&lits, rng.gen_range(1..=9));
        }
    }
    b.build()
}

fn exhaustive(f: &WcnfFormula) -> Option<u64> {
    let n = f.num_vars();
    (0u32..1 << n)
        .filter_map(|m| {
            let r = evaluate(f, &Assignment::new((0..n).map(|i| m >> i & 1 == 1).collect())).unwrap();
            r.hard_satisfied.then_some(r.cost)
        })
        .min()
}

fn random_solver_check() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let formulas: Vec<WcnfFormula> = (0..200).map(|_| random_formula(&mut rng, 12, 40)).collect();
    let expected: Vec<Option<u64>> = formulas.iter().map(exhaustive).collect();
    let t = Instant::now();
    let mut unsat = 0;
    for (i, f) in formulas.iter().enumerate() {
        let got = solver::solve(f, &SolverConfig::default()).map_err(|e| e.to_string())?;
        match (&got, expected[i]) {
            (SolveOutcome::Optimal { cost, model }, Some(e)) => {
                check(*cost == e, format!("formula {i}: solver {cost}, enumeration {e}"))?;
                let r = evaluate(f, model).map_err(|e| e.to_string())?;
                check(r.hard_satisfied && r.cost == e, format!("formula {i}: model does not realise the cost"))?;
            }
            (SolveOutcome::Unsat, None) => unsat += 1,
            (g, e) => return Err(format!("formula {i}: solver {g:?}, enumeration {e:?}")),
        }
    }
    let elapsed = t.elapsed();
    for (i, f) in formulas.iter().enumerate() {
        let got = solver::solve(f, &SolverConfig::with_engine(EngineKind::LinearSatUnsat)).map_err(|e| e.to_string())?;
        check(got.cost() == expected[i], format!("formula {i}: linear engine {got:?}"))?;
    }
    check(elapsed < RANDOM_SOLVE_LIMIT, format!("took {:.1} s", elapsed.as_secs_f64()))?;
    Ok(format!(
        "200/200 exact, {unsat} unsat, both engines ({:.0} ms, limit 30 s)",
        elapsed.as_secs_f64() * 1e3
    ))
}

fn wdimacs_roundtrip() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x1000);
    let t = Instant::now();
    for i in 0..1000 {
        let f = random_formula(&mut rng, 30, 80);
        let text = serialize_wdimacs(&f);
        let back = parse_wdimacs(&text).map_err(|e| format!("formula {i}: {e}"))?;
        check(back == f, format!("formula {i} changed"))?;
        check(serialize_wdimacs(&back) == text, format!("formula {i} text changed"))?;
    }
    let elapsed = t.elapsed();
    check(elapsed < ROUNDTRIP_LIMIT, format!("took {:.1} s", elapsed.as_secs_f64()))?;
    Ok(format!("1000/1000 identical ({:.0} ms, limit 5 s)", elapsed.as_secs_f64() * 1e3))
}

fn pipeline_semantics() -> Outcome {
    let registry = StrategyRegistry::with_defaults();
    let task = motivation();
    let direct = registry.resolve("direct-answer").unwrap();

    // attempt cap
    let mut p = ReplayProvider::new("replay");
    p.record(replay_any_key(MOTIVATION_KEY, "direct-answer"), "no JSON here");
    let r = run_strategy(&task, MOTIVATION_KEY, direct.as_ref(), &p, &RunEnv::default()).map_err(|e| e.to_string())?;
    check(r.attempts.len() == MAX_ATTEMPTS as usize, format!("{} attempts", r.attempts.len()))?;

    // feedback hygiene over a mixed failure schedule
    let pot = registry.resolve("pot-answer").unwrap();
    let mut p = ReplayProvider::new("replay");
    p.record(replay_key(MOTIVATION_KEY, "pot-answer", 1), "prose");
    p.record(replay_key(MOTIVATION_KEY, "pot-answer", 2), fenced("crash()"));
    p.record(replay_key(MOTIVATION_KEY, "pot-answer", 3), fenced("fine()"));
    let env = RunEnv {
        sandbox: std::sync::Arc::new(ScriptedSandbox::new(vec![
            ExecResult::exec_error("NameError: name 'crash' is not defined"),
            ok_exec(4, LATE),
        ])),
        ..RunEnv::default()
    };
    let r = run_strategy(&task, MOTIVATION_KEY, pot.as_ref(), &p, &env).map_err(|e| e.to_string())?;
    check(r.attempts.len() == 3, format!("{} attempts in the hygiene run", r.attempts.len()))?;
    let reference = task.reference_solution.to_json().to_string();
    for a in &r.attempts[1..] {
        let fb = feedback_segment(&a.prompt);
        let digits: Vec<&str> = fb.split(|c: char| !c.is_ascii_digit()).filter(|t| !t.is_empty()).collect();
        check(!fb.contains(&reference), "feedback contains the reference solution")?;
        check(!digits.contains(&"2"), format!("feedback contains the optimum: {fb}"))?;
        for w in ["Accepted", "Infeasible", "Suboptimal", "Malformed", "verdict"] {
            check(!fb.contains(w), format!("feedback contains {w}"))?;
        }
    }

    // claimed-cost independence
    for answer in [RIGHT, WRONG, LATE] {
        let mut verdicts = Vec::new();
        for claimed in [0, 2, 4, 99] {
            let mut p = ReplayProvider::new("replay");
            p.record(
                replay_key(MOTIVATION_KEY, "direct-answer", 1),
                format!(r#"{{"objective_cost": {claimed}, "solution_json": {answer}}}"#),
            );
            let r = run_strategy(&task, MOTIVATION_KEY, direct.as_ref(), &p, &RunEnv::default())
                .map_err(|e| e.to_string())?;
            verdicts.push(r.final_verdict);
        }
        check(verdicts.windows(2).all(|w| w[0] == w[1]), format!("verdicts vary with the claim: {verdicts:?}"))?;
    }

    // a replay bundle with 21 of 25 correct answers reports 84.0
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut grid = BTreeMap::new();
    grid.insert(FamilyId::Mis, vec![SizeParams::Mis { n: 6, edge_prob: 0.3 }; 25]);
    let ds = dir.path().join("ds");
    let manifest = build_dataset(
        &DatasetConfig {
            seed: 11,
            grid,
            solver: SolverConfig::default(),
        },
        &ds,
    )
    .map_err(|e| e.to_string())?;
    let mut responses = BTreeMap::new();
    let mut keys = Vec::new();
    for e in manifest.records.iter().filter(|e| e.variant == PrefVariant::P2) {
        let rec = manifest.load_record(&ds, e).map_err(|e| e.to_string())?;
        let key = instance_key(e.family, e.index, e.variant);
        let text = if e.index < 21 {
            format!("Answer: {}", rec.reference_solution.to_json())
        } else {
            "I could not decide.".to_string()
        };
        responses.insert(replay_any_key(&key, "direct-answer"), text);
        keys.push(key);
    }
    let bundle_path = dir.path().join("bundle.json");
    let bundle = ReplayBundle {
        name: "replayed".into(),
        responses,
    };
    std::fs::write(&bundle_path, serde_json::to_string(&bundle).unwrap()).map_err(|e| e.to_string())?;
    let config = ExperimentConfig {
        manifest: ds.join("manifest.json"),
        strategies: vec!["direct-answer".into()],
        providers: vec![ProviderConfig::Replay {
            name: "replayed".into(),
            bundle: bundle_path,
        }],
        budget_secs: 60,
        program_timeout_secs: 10,
        workers: 4,
        feedback_policy: FeedbackPolicy::SyntacticOnly,
        sandbox: None,
        results_dir: dir.path().join("results"),
        instances: Some(keys),
    };
    let summary = run_experiment(&config, &RunOptions::default()).map_err(|e| e.to_string())?;
    let store = ResultsStore::load(&summary.dir.join("taskruns.jsonl")).map_err(|e| e.to_string())?;
    let loaded = DatasetManifest::load(&config.manifest).map_err(|e| e.to_string())?;
    let t = table_one(&store, &TableGrid::from_run(&loaded, &config));
    check(t.rows.len() == 1 && t.rows[0][2] == "84.0", format!("table rows {:?}", t.rows))?;
    let accepted = store.runs().filter(|r| r.final_verdict.is_accepted()).count();
    check(accepted == 21 && store.len() == 25, format!("{accepted}/{} accepted", store.len()))?;
    Ok("cap 5, clean feedback, claim-independent verdicts, 21/25 replay group = 84.0".into())
}

fn table_arithmetic() -> Outcome {
    let mut store = ResultsStore::new();
    let instances = fill_store(&mut store, FamilyId::Mis, "maxsat-with-plan", "model-a", [25, 21, 20, 21]);
    let grid = TableGrid {
        instances,
        strategies: vec!["maxsat-with-plan".into()],
        providers: vec!["model-a".into()],
    };
    let t1 = table_one(&store, &grid);
    check(t1.rows[0][2] == "87.0", format!("table 1 cell {:?}", t1.rows[0]))?;
    let t2 = table_two(&store, &grid);
    let cell = &t2.rows[0][2];
    check(cell == "100.0 / 84.0 / 80.0 / 84.0", format!("table 2 cell {cell:?}"))?;
    check(format_percent(87, 100) == "87.0", "format_percent(87, 100)")?;
    Ok(format!("87/100 -> {}, variants -> {cell}", t1.rows[0][2]))
}

fn main() {
    let mut results: Vec<(&str, Outcome)> = vec![
        ("example-1 fixture", example_one()),
        ("motivation fixture", motivation_fixture()),
    ];
    let (oracle, shape) = oracle_and_dataset();
    results.push(("oracle equivalence", oracle));
    results.push(("dataset shape and determinism", shape));
    results.push(("random-formula solver check", random_solver_check()));
    results.push(("wdimacs round-trip", wdimacs_roundtrip()));
    results.push(("pipeline loop semantics", pipeline_semantics()));
    results.push(("table arithmetic", table_arithmetic()));

    let mut failed = 0;
    for (name, r) in &results {
        match r {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name}: {why}");
            }
        }
    }
    println!("{} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
