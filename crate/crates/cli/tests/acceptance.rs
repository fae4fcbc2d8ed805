//! Acceptance suite. Runs every criterion at its stated tolerance and prints
//! one PASS/FAIL line each; the process fails if any criterion fails.
//!
//! Run alone with `cargo test -p dam-cli --test acceptance`. Pass criterion
//! numbers as arguments to run a subset, e.g. `-- 1 2 9`.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::Command;
use std::time::{Duration, Instant};

use dam_core::dynamics::{async_sweep, enumerate_fixed_points, UpdateMode};
use dam_core::ensembles::{generate_random, EnsembleKind};
use dam_core::experiments::{
    adversarial_thresholds, basin_average, basin_boundaries, capacity_scaling, run_experiment,
    CapacitySearchConfig, ExperimentGrid, ExperimentKind, ExperimentRecord, GridAxes,
};
use dam_core::{DamRng, ModelParams, NetworkState, PatternSet};

const SEED: u64 = 42;

struct Verdict {
    passed: bool,
    detail: String,
}

fn verdict(passed: bool, detail: String) -> Verdict {
    Verdict { passed, detail }
}

/// Potential numerator `Σ_μ (Σ_i ξ_i^μ x_i)^n` computed from scratch.
fn oracle_potential(patterns: &PatternSet, spins: &[i8]) -> i128 {
    (0..patterns.len())
        .map(|mu| {
            let m: i128 = patterns
                .pattern(mu)
                .iter()
                .zip(spins)
                .map(|(&a, &b)| i128::from(a) * i128::from(b))
                .sum();
            m.pow(patterns.order())
        })
        .sum()
}

/// `Φ_i` from the potential difference `F(x_i=+1) − F(x_i=−1) = 2Φ_i`.
fn oracle_phi(patterns: &PatternSet, spins: &[i8], i: usize) -> i128 {
    let mut s = spins.to_vec();
    s[i] = 1;
    let plus = oracle_potential(patterns, &s);
    s[i] = -1;
    let minus = oracle_potential(patterns, &s);
    assert_eq!((plus - minus) % 2, 0);
    (plus - minus) / 2
}

fn random_state(patterns: &PatternSet, rng: &mut DamRng) -> NetworkState {
    let spins = (0..patterns.neurons()).map(|_| rng.spin()).collect();
    NetworkState::new(patterns, spins).unwrap()
}

fn criterion_1() -> Verdict {
    let mut rng = DamRng::new(SEED);
    let cases = 12_000;
    let mut failures: Vec<String> = Vec::new();
    let mut flips_checked = 0usize;
    let mut sweeps_checked = 0usize;
    for case in 0..cases {
        let order = [2, 3, 4][case % 3];
        let n = 1 + rng.index(64);
        let p = 1 + rng.index(32);
        let patterns = generate_random(ModelParams::new(order, n, p).unwrap(), &mut rng).unwrap();
        let mut state = random_state(&patterns, &mut rng);
        let i = rng.index(n);

        let phi = state.phi_numerator(&patterns, i);
        let oracle = oracle_phi(&patterns, state.spins(), i);
        let before = state.potential(&patterns).numerator;
        if phi != oracle || before != oracle_potential(&patterns, state.spins()) {
            failures.push(format!(
                "case {case}: field or potential disagrees with oracle"
            ));
            continue;
        }
        let best = state.best_response(&patterns, i).unwrap();
        let expected_best = if phi > 0 {
            1
        } else if phi < 0 {
            -1
        } else {
            state.spin(i)
        };
        if best != expected_best {
            failures.push(format!("case {case}: best response"));
        }

        // Exact potential: F(x') − F(x) = 2·x'_i·Φ_i for any single flip.
        state.apply_flip(&patterns, i).unwrap();
        flips_checked += 1;
        let after = state.potential(&patterns).numerator;
        if after - before != 2 * i128::from(state.spin(i)) * phi {
            failures.push(format!("case {case}: exact-potential identity"));
        }
        // A best-response flip improves by exactly 2|Φ_i|.
        if state.spin(i) == best && phi != 0 && after - before != 2 * phi.abs() {
            failures.push(format!("case {case}: improvement differs from 2|Φ|"));
        }
        // Φ_i does not depend on x_i.
        if state.phi_numerator(&patterns, i) != phi {
            failures.push(format!("case {case}: locality"));
        }
        let mut rebuilt = state.clone();
        rebuilt.rebuild_cache(&patterns);
        if rebuilt != state {
            failures.push(format!("case {case}: cache differs from recompute"));
        }

        if case % 4 == 0 {
            // Asynchronous sweeps to a fixed point: monotone potential, and
            // every improving flip realises exactly 2|Φ_i|.
            let mut previous = state.potential(&patterns).numerator;
            let mut settled = false;
            for _ in 0..200 {
                let flips = async_sweep(&mut state, &patterns, &mut rng);
                sweeps_checked += 1;
                let now = state.potential(&patterns).numerator;
                if now < previous || (flips > 0 && now == previous) {
                    failures.push(format!("case {case}: potential not increasing"));
                    break;
                }
                previous = now;
                if flips == 0 {
                    settled = true;
                    break;
                }
            }
            if !settled || !state.is_fixed_point(&patterns) {
                failures.push(format!("case {case}: terminal state is not a fixed point"));
            }
            for j in 0..n {
                let gain = oracle_phi(&patterns, state.spins(), j) * i128::from(state.spin(j));
                if gain < 0 {
                    failures.push(format!("case {case}: fixed point has an improving flip"));
                    break;
                }
            }
        }
    }
    verdict(
        failures.is_empty(),
        format!(
            "{cases} random cases (N ≤ 64, p ≤ 32, n ∈ {{2,3,4}}), {flips_checked} flips, {sweeps_checked} sweeps; {} violations{}",
            failures.len(),
            failures.first().map_or(String::new(), |f| format!(", first: {f}"))
        ),
    )
}

/// Fixed points by definition: no single flip increases the potential.
fn oracle_fixed_points(patterns: &PatternSet) -> Vec<Vec<i8>> {
    let n = patterns.neurons();
    let mut out = Vec::new();
    for bits in 0u32..(1 << n) {
        let spins: Vec<i8> = (0..n)
            .map(|i| if bits >> i & 1 == 1 { 1 } else { -1 })
            .collect();
        let stable = (0..n).all(|i| oracle_phi(patterns, &spins, i) * i128::from(spins[i]) >= 0);
        if stable {
            out.push(spins);
        }
    }
    out.sort();
    out
}

fn criterion_2() -> Verdict {
    let mut rng = DamRng::new(SEED);
    let mut problems: Vec<String> = Vec::new();
    let mut sets = 0;
    let mut terminals = 0;
    for n in 3..=12usize {
        for p in 1..=3usize {
            for _ in 0..3 {
                let patterns =
                    generate_random(ModelParams::new(3, n, p).unwrap(), &mut rng).unwrap();
                sets += 1;
                let fixed = enumerate_fixed_points(&patterns).unwrap();
                if fixed != oracle_fixed_points(&patterns) {
                    problems.push(format!("N={n} p={p}: enumeration disagrees with oracle"));
                }
                if p == 1 && fixed != vec![patterns.pattern(0).to_vec()] {
                    problems.push(format!("N={n}: p=1 fixed points are not exactly {{ξ}}"));
                }
                for _ in 0..20 {
                    let mut state = random_state(&patterns, &mut rng);
                    let mut settled = false;
                    for _ in 0..100 {
                        if async_sweep(&mut state, &patterns, &mut rng) == 0 {
                            settled = true;
                            break;
                        }
                    }
                    terminals += 1;
                    if !settled || fixed.binary_search(&state.spins().to_vec()).is_err() {
                        problems.push(format!("N={n} p={p}: terminal state not enumerated"));
                    }
                }
            }
        }
    }
    verdict(
        problems.is_empty(),
        format!(
            "{sets} pattern sets (n=3, N ≤ 12, p ≤ 3), {terminals} terminal states; {} problems{}",
            problems.len(),
            problems
                .first()
                .map_or(String::new(), |f| format!(", first: {f}"))
        ),
    )
}

fn run(kind: ExperimentKind, axes: GridAxes, trials: usize) -> Vec<ExperimentRecord> {
    run_experiment(&ExperimentGrid::new(kind, axes, trials, SEED)).unwrap()
}

fn criterion_3() -> Verdict {
    let axes = GridAxes {
        neurons: vec![200, 300, 400, 500],
        loadings: vec![0.03],
        corruptions: vec![0.15],
        ..GridAxes::default()
    };
    let records = run(ExperimentKind::Convergence, axes, 60);
    let ok = records
        .iter()
        .all(|r| r.success_rate >= 0.98 && r.mean_sweeps.is_some_and(|s| s <= 2.0));
    let detail: Vec<String> = records
        .iter()
        .map(|r| {
            format!(
                "N={} success={:.3} sweeps={}",
                r.point.neurons,
                r.success_rate,
                r.mean_sweeps.map_or("--".into(), |s| format!("{s:.3}"))
            )
        })
        .collect();
    verdict(ok, format!("α=0.03, 15% corruption: {}", detail.join("; ")))
}

fn criterion_4() -> Verdict {
    let axes = GridAxes {
        neurons: vec![200, 400, 600],
        loadings: vec![0.005, 0.02],
        corruptions: (30..=50).map(|c| f64::from(c) / 100.0).collect(),
        ..GridAxes::default()
    };
    let records = run(ExperimentKind::Basin, axes, 60);
    let boundaries = basin_boundaries(&basin_average(&records), 0.01).unwrap();
    let expected = [(0.005, 0.40), (0.02, 0.35)];
    let mut ok = true;
    let mut detail = Vec::new();
    for (loading, t) in &boundaries {
        let want = expected.iter().find(|e| e.0 == *loading).unwrap().1;
        let hit = t.crossed && (t.raw - want).abs() <= 0.02 + 1e-12;
        ok &= hit;
        detail.push(format!(
            "α={loading}: crossing {:.4} (target {want} ± 0.02)",
            t.raw
        ));
    }
    verdict(ok && boundaries.len() == 2, detail.join("; "))
}

fn criterion_5() -> Verdict {
    let axes = GridAxes {
        neurons: vec![500],
        pattern_counts: vec![1250],
        rhos: (0..=30).map(|r| f64::from(r) / 100.0).collect(),
        gamma0: 0.6,
        ..GridAxes::default()
    };
    let records = run(ExperimentKind::Adversarial, axes, 80);
    let summaries = adversarial_thresholds(&records, 0.01).unwrap();
    let mut ok = summaries.len() == 2;
    let mut detail = Vec::new();
    for s in &summaries {
        let rho_hat = s.threshold.raw;
        let beta_bound = s.rho_star_beta.unwrap();
        let in_band = (0.13..=0.19).contains(&rho_hat);
        let ordered = beta_bound < rho_hat && rho_hat < s.rho_star_gamma;
        ok &= s.threshold.crossed && in_band && ordered;
        detail.push(format!(
            "{}: ρ̂*={rho_hat:.4} (reported {:.2}), bounds {beta_bound:.4} < ρ̂* < {:.3}",
            s.model.name(),
            s.threshold.reported,
            s.rho_star_gamma
        ));
    }
    verdict(ok, format!("N=500 p=1250 γ=0.6: {}", detail.join("; ")))
}

fn criterion_6() -> Verdict {
    let result = capacity_scaling(
        &[100, 150, 200, 300],
        &CapacitySearchConfig::default(),
        SEED,
    )
    .unwrap();
    let fit = result.fit.unwrap();
    let p100 = result.points[0].p_max as f64;
    let ok = (2.0..=2.4).contains(&fit.exponent)
        && fit.r_squared >= 0.99
        && (p100 - 450.0).abs() <= 0.2 * 450.0;
    let pmax: Vec<String> = result
        .points
        .iter()
        .map(|p| format!("{}→{}", p.neurons, p.p_max))
        .collect();
    verdict(
        ok,
        format!(
            "p_max {}; δ={:.3}, R²={:.4}, p_max(100) target 450 ± 20%",
            pmax.join(", "),
            fit.exponent,
            fit.r_squared
        ),
    )
}

fn criterion_7() -> Verdict {
    let axes = GridAxes {
        neurons: vec![500],
        loadings: vec![0.15],
        initial_overlaps: vec![0.5],
        modes: vec![UpdateMode::Asynchronous, UpdateMode::Synchronous],
        ..GridAxes::default()
    };
    let records = run(ExperimentKind::UpdateCompare, axes, 50);
    let find = |mode| records.iter().find(|r| r.point.mode == mode).unwrap();
    let a = find(UpdateMode::Asynchronous);
    let s = find(UpdateMode::Synchronous);
    let gap = a.success_rate - s.success_rate;
    let faster = match (a.mean_sweeps, s.mean_sweeps) {
        (Some(ta), Some(ts)) => ta < ts,
        _ => false,
    };
    let show = |x: Option<f64>| x.map_or("--".into(), |v| format!("{v:.2}"));
    verdict(
        gap >= 0.2 - 1e-12 && faster,
        format!(
            "p={}: async {:.2} (T={}), sync {:.2} (T={}), gap {gap:.2} (needs ≥ 0.2)",
            a.point.patterns,
            a.success_rate,
            show(a.mean_sweeps),
            s.success_rate,
            show(s.mean_sweeps)
        ),
    )
}

fn criterion_8() -> Verdict {
    let loadings = vec![
        0.002, 0.004, 0.006, 0.008, 0.010, 0.015, 0.020, 0.030, 0.050,
    ];
    let axes = GridAxes {
        neurons: vec![500],
        loadings,
        corruptions: vec![0.20],
        ensembles: vec![EnsembleKind::RandomIid, EnsembleKind::Correlated],
        ..GridAxes::default()
    };
    let records = run(ExperimentKind::PatternCompare, axes, 50);
    let random: Vec<&ExperimentRecord> = records
        .iter()
        .filter(|r| r.point.ensemble == EnsembleKind::RandomIid)
        .collect();
    let min_random = random
        .iter()
        .map(|r| r.success_rate)
        .fold(f64::INFINITY, f64::min);
    let correlated_at_001 = records
        .iter()
        .find(|r| {
            r.point.ensemble == EnsembleKind::Correlated && (r.point.loading - 0.01).abs() < 1e-12
        })
        .unwrap()
        .success_rate;
    verdict(
        min_random >= 0.95 && correlated_at_001 <= 0.1,
        format!(
            "N=500, 20% corruption: min random rate over α ≤ 0.05 = {min_random:.2}; correlated rate at α=0.01 = {correlated_at_001:.2}"
        ),
    )
}

fn cli_output(args: &[&str], threads: &str) -> Vec<u8> {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("out.csv");
    let status = Command::new(env!("CARGO_BIN_EXE_dam"))
        .args(args)
        .args(["--threads", threads, "--output", path.to_str().unwrap()])
        .env_remove("DAM_SEED")
        .output()
        .unwrap();
    assert!(
        status.status.success(),
        "{}",
        String::from_utf8_lossy(&status.stderr)
    );
    std::fs::read(&path).unwrap()
}

fn criterion_9() -> Verdict {
    let runs: [&[&str]; 4] = [
        &[
            "exp-adversarial",
            "--N",
            "120",
            "--p",
            "200",
            "--rho-max",
            "0.3",
            "--rho-step",
            "0.05",
            "--trials",
            "12",
        ],
        &[
            "exp-convergence",
            "--N",
            "100,150",
            "--alpha",
            "0.02,0.05",
            "--corruption",
            "0.15,0.3",
            "--trials",
            "10",
        ],
        &[
            "exp-update-compare",
            "--N",
            "120",
            "--alpha-prime",
            "0.15",
            "--m0",
            "0.5",
            "--trials",
            "10",
        ],
        &["exp-capacity", "--N", "30,40", "--trials", "12"],
    ];
    let mut mismatches = Vec::new();
    for args in runs {
        let reference = cli_output(args, "1");
        for threads in ["1", "2", "4"] {
            if cli_output(args, threads) != reference {
                mismatches.push(format!("{} --threads {threads}", args[0]));
            }
        }
    }
    verdict(
        mismatches.is_empty(),
        format!(
            "4 subcommands × threads {{1,1,2,4}}: {}",
            if mismatches.is_empty() {
                "byte-identical CSV".to_string()
            } else {
                format!("differs for {}", mismatches.join(", "))
            }
        ),
    )
}

/// Number, name, runtime budget, check.
type Criterion = (u32, &'static str, Duration, fn() -> Verdict);

fn main() {
    let criteria: [Criterion; 9] = [
        (1, "exact identities", Duration::from_secs(60), criterion_1),
        (
            2,
            "brute-force fixed points",
            Duration::from_secs(60),
            criterion_2,
        ),
        (3, "convergence", Duration::from_secs(120), criterion_3),
        (4, "basin boundary", Duration::from_secs(600), criterion_4),
        (
            5,
            "adversarial threshold",
            Duration::from_secs(600),
            criterion_5,
        ),
        (
            6,
            "capacity scaling",
            Duration::from_secs(1200),
            criterion_6,
        ),
        (
            7,
            "update-rule comparison",
            Duration::from_secs(300),
            criterion_7,
        ),
        (
            8,
            "pattern-structure gap",
            Duration::from_secs(300),
            criterion_8,
        ),
        (
            9,
            "determinism across threads",
            Duration::from_secs(600),
            criterion_9,
        ),
    ];
    let selected: Vec<u32> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let mut failed = 0;
    for (id, name, budget, check) in criteria {
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            verdict(false, format!("panicked: {msg}"))
        });
        let elapsed = start.elapsed();
        let in_time = elapsed <= budget;
        let passed = result.passed && in_time;
        if !passed {
            failed += 1;
        }
        println!(
            "[{}] criterion {id} ({name}): {} [{:.1}s, budget {}s{}]",
            if passed { "PASS" } else { "FAIL" },
            result.detail,
            elapsed.as_secs_f64(),
            budget.as_secs(),
            if in_time { "" } else { ", over budget" }
        );
    }
    println!("acceptance: {failed} criterion/criteria failed");
    if failed > 0 {
        std::process::exit(1);
    }
}
