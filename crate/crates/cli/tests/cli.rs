use std::path::Path;
use std::process::{Command, Output};

fn dam(args: &[&str], env_seed: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_dam"));
    cmd.args(args).env_remove("DAM_SEED");
    if let Some(seed) = env_seed {
        cmd.env("DAM_SEED", seed);
    }
    cmd.output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

const SMALL_ADV: &[&str] = &[
    "exp-adversarial",
    "--N",
    "60",
    "--p",
    "30",
    "--rho-max",
    "0.1",
    "--rho-step",
    "0.05",
    "--trials",
    "6",
];

#[test]
fn exit_codes() {
    assert_eq!(dam(&["--help"], None).status.code(), Some(0));
    assert_eq!(dam(&["nonsense"], None).status.code(), Some(1));
    assert_eq!(
        dam(&["exp-basin", "--no-such-flag"], None).status.code(),
        Some(1)
    );
    assert_eq!(
        dam(&["exp-convergence", "--trials", "0"], None)
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        dam(&["exp-convergence", "--alpha", "0.01", "--p", "10"], None)
            .status
            .code(),
        Some(1)
    );
    let missing = dam(&["verify", "--patterns", "/nonexistent/file.damb"], None);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn adversarial_csv_schema() {
    let out = dam(SMALL_ADV, None);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "N,p,beta,gamma,adversary,rho,trials,success_rate,ci_low,ci_high"
    );
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 6);
    assert!(rows[0].starts_with("60,30,"));
    assert!(rows[0].contains(",strong,0,6,"));
    assert!(rows[5].contains(",weak,0.1,6,"));
}

#[test]
fn seed_precedence_flag_config_env() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.conf");
    std::fs::write(&cfg, "# settings\nseed = 5\n").unwrap();
    let cfg = cfg.to_str().unwrap();

    let with = |extra: &[&str], env: Option<&str>| {
        let mut args = SMALL_ADV.to_vec();
        args.extend_from_slice(extra);
        stdout(&dam(&args, env))
    };
    let s5 = with(&["--seed", "5"], None);
    let s6 = with(&["--seed", "6"], None);
    let s42 = with(&["--seed", "42"], None);
    assert_ne!(s5, s6);
    assert_eq!(with(&[], None), s42);
    assert_eq!(with(&[], Some("6")), s6);
    assert_eq!(with(&["--config", cfg], Some("6")), s5);
    assert_eq!(with(&["--config", cfg, "--seed", "6"], None), s6);
    assert_eq!(
        dam(&SMALL_ADV[..1], Some("not-a-number")).status.code(),
        Some(1)
    );
}

#[test]
fn config_file_lists_and_unknown_keys() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("good.conf");
    std::fs::write(
        &good,
        "N = 40, 50\nalpha = 0.01\ncorruption = 0.1\ntrials = 3\n",
    )
    .unwrap();
    let out = dam(
        &["exp-convergence", "--config", good.to_str().unwrap()],
        None,
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert_eq!(stdout(&out).lines().count(), 3);

    let bad = dir.path().join("bad.conf");
    std::fs::write(&bad, "N = 40\nrho = 0.1\n").unwrap();
    let out = dam(
        &["exp-convergence", "--config", bad.to_str().unwrap()],
        None,
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("rho"));
}

#[test]
fn generate_verify_retrieve_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("set.txt");
    let f = file.to_str().unwrap();
    let out = dam(&["generate", "--N", "80", "--p", "12", "--output", f], None);
    assert!(out.status.success());
    let text = std::fs::read_to_string(&file).unwrap();
    assert_eq!(text.lines().count(), 13);

    let verify = stdout(&dam(&["verify", "--patterns", f, "--gamma", "0.6"], None));
    for key in [
        "beta:",
        "lambda_hat:",
        "alpha:",
        "rho_star_alpha:",
        "rho_star_gamma:",
        "rho_star_beta:",
    ] {
        assert!(verify.contains(key), "missing {key} in\n{verify}");
    }
    let retrieve = stdout(&dam(
        &["retrieve", "--patterns", f, "--corruption", "0.1"],
        None,
    ));
    assert!(retrieve.contains("converged: true"), "{retrieve}");
    assert!(retrieve.contains("initial_flips: 8"));
}

#[test]
fn generate_from_vectors_binarizes_at_median() {
    let dir = tempfile::tempdir().unwrap();
    let vectors = dir.path().join("v.csv");
    std::fs::write(&vectors, "0.1, 0.9, 0.5, 0.2\n3 1 2 4\n").unwrap();
    let file = dir.path().join("real.damb");
    let out = dam(
        &[
            "generate",
            "--from-vectors",
            vectors.to_str().unwrap(),
            "--output",
            file.to_str().unwrap(),
        ],
        None,
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let bytes = std::fs::read(&file).unwrap();
    assert_eq!(&bytes[..4], b"DAMB");
    assert_eq!(&bytes[13..], &[0, 1, 1, 0, 1, 0, 0, 1]);
    let out = dam(
        &[
            "exp-realdata",
            "--patterns",
            file.to_str().unwrap(),
            "--corruption",
            "0",
            "--trials",
            "2",
        ],
        None,
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(stdout(&out).lines().nth(1).unwrap().contains(",4,2,"));
}

#[test]
fn capacity_and_markdown_output() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("cap.md");
    let out = dam(
        &[
            "exp-capacity",
            "--N",
            "20,30",
            "--trials",
            "8",
            "--format",
            "markdown",
            "--output",
            out_path.to_str().unwrap(),
        ],
        None,
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let md = std::fs::read_to_string(Path::new(&out_path)).unwrap();
    assert!(md.starts_with("| N | p_max | scale | alpha_eff |"));
    assert!(md.contains("Fit: p_max"));
}

#[test]
fn selftest_passes() {
    let out = dam(&["selftest"], None);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("checks passed"));
}
