//! End-to-end checks of the compiled binary: exit codes, stdout contracts,
//! and byte-identical reruns of the file outputs.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_graphon-rd"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn cut_norm_prints_the_bare_value_first() {
    let dir = tempfile::tempdir().unwrap();
    let a = write(dir.path(), "a.txt", "1 0\n0 1\n");
    let b = write(dir.path(), "b.txt", "0 1\n1 0\n");
    let out = run(&["cut-norm", "--a", &a, "--b", &b, "--mode", "exact"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert_eq!(text.lines().next(), Some("0.25"), "stdout was: {text}");

    // Heuristic mode on a signed matrix: first line still parses as a number.
    let d = write(dir.path(), "d.txt", "0.5 -0.25 0\n-0.25 0.5 0.1\n0 0.1 -0.3\n");
    let out = run(&["cut-norm", "--a", &d, "--mode", "heuristic", "--restarts", "16"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let first: f64 = text.lines().next().unwrap().parse().expect("numeric first line");
    assert!(first >= 0.0);
}

#[test]
fn usage_errors_exit_one_with_usage_text() {
    let out = run(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr).into_owned();
    assert!(err.contains("Usage"), "stderr was: {err}");

    let help = run(&["--help"]);
    assert_eq!(help.status.code(), Some(0));
    assert!(stdout(&help).contains("cut-norm"));

    let missing = run(&["cut-norm"]);
    assert_eq!(missing.status.code(), Some(1));
}

#[test]
fn validate_config_echoes_a_hash() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.ini",
        "[experiment]\nkind = rd_convergence\n[kernel]\nfamily = smooth_cosine\nc = 0.5\n\
         [reaction]\nphi = logistic(1)\n[sweep]\nns = 2,4\n",
    );
    let out = run(&["validate-config", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("config_hash = "), "stdout: {text}");
    assert!(text.contains("spec = smooth_cosine(0.5)"));

    // --paranoid runs the integrator order check first and stays quiet on
    // stdout about it.
    let out = run(&["--paranoid", "validate-config", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn convergence_outputs_are_byte_identical_across_reruns() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "sweep.ini",
        "[experiment]\nkind = diffusion_convergence\nt = 0.5\nseed = 3\n\
         [kernel]\nfamily = smooth_cosine\nc = 1\n\
         [initial]\nprofile = step(0.1, 0.9, 0.5)\n\
         [sweep]\nns = 2,4\n",
    );
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    for out in [&out_a, &out_b] {
        let r = run(&["convergence", "--config", &cfg, "--out", out.to_str().unwrap()]);
        assert_eq!(r.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&r.stderr));
    }
    for name in ["convergence.csv", "convergence_times.csv"] {
        let a = std::fs::read(out_a.join(name)).unwrap();
        let b = std::fs::read(out_b.join(name)).unwrap();
        assert_eq!(a, b, "{name} differed between reruns");
        assert!(!a.is_empty());
    }
    // Same config hash stamped on every row of both copies.
    let body = std::fs::read_to_string(out_a.join("convergence.csv")).unwrap();
    let hash = body.lines().nth(1).unwrap().split(',').next().unwrap().to_string();
    assert_eq!(hash.len(), 16);
    for line in body.lines().skip(1) {
        assert!(line.starts_with(&hash));
    }
}

#[test]
fn lln_outputs_are_byte_identical_and_label_controls() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "lln.ini",
        "[experiment]\nkind = lln\nt = 0.5\nepsilon = 0.2\nreplicas = 10\nseed = 12\n\
         [kernel]\nfamily = constant\nc = 1\n\
         [reaction]\nbirth = x\ndeath = x^2\n\
         [initial]\nprofile = constant(0.5)\n\
         [sweep]\nschedule = 2:5,4:10\n",
    );
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    for out in [&out_a, &out_b] {
        let r = run(&["lln", "--config", &cfg, "--out", out.to_str().unwrap()]);
        assert_eq!(r.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&r.stderr));
    }
    for name in ["lln_replicas.csv", "lln_summary.csv"] {
        let a = std::fs::read(out_a.join(name)).unwrap();
        let b = std::fs::read(out_b.join(name)).unwrap();
        assert_eq!(a, b, "{name} differed between reruns");
    }

    // A schedule that never scales ell is a labeled control, not a trend claim.
    let flat = write(
        dir.path(),
        "flat.ini",
        "[experiment]\nkind = lln\nt = 0.5\nepsilon = 0.2\nreplicas = 10\nseed = 12\n\
         [kernel]\nfamily = constant\nc = 1\n\
         [reaction]\nbirth = x\ndeath = x^2\n\
         [initial]\nprofile = constant(0.5)\n\
         [sweep]\nschedule = 2:5,4:5\n",
    );
    let out_c = dir.path().join("c");
    let r = run(&["lln", "--config", &flat, "--out", out_c.to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(0));
    let summary = std::fs::read_to_string(out_c.join("lln_summary.csv")).unwrap();
    assert!(
        summary.contains("hypothesis-violating control"),
        "summary: {summary}"
    );
    assert!(stdout(&r).contains("control"));
}

#[test]
fn excessive_cap_truncation_exits_two() {
    // A cap equal to the initial count on a growing population: the first
    // birth anywhere truncates, so most replicas are cut short. That is a
    // scientific failure (exit 2), not a usage error.
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "capped.ini",
        "[experiment]\nkind = lln\nt = 1\nepsilon = 0.2\nreplicas = 10\nseed = 5\ncap = 5\n\
         [kernel]\nfamily = constant\nc = 1\n\
         [reaction]\nbirth = x\ndeath = x^2\n\
         [initial]\nprofile = constant(1)\n\
         [sweep]\nschedule = 1:5,2:5\n",
    );
    let out = dir.path().join("out");
    let r = run(&["lln", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(
        r.status.code(),
        Some(2),
        "stderr: {}",
        String::from_utf8_lossy(&r.stderr)
    );
    // The run still wrote its outputs before flagging unreliability.
    assert!(out.join("lln_summary.csv").exists());
}

#[test]
fn single_run_solver_writes_solution_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "rd.ini",
        "[experiment]\nkind = single_run\nn = 8\nt = 1\n\
         [kernel]\nfamily = min_kernel\nc = 1\n\
         [reaction]\nphi = allen_cahn\n\
         [initial]\nprofile = sine(0.9)\n",
    );
    let out = dir.path().join("out");
    let r = run(&["simulate-rd", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&r.stderr));
    let body = std::fs::read_to_string(out.join("solution.csv")).unwrap();
    assert!(body.starts_with("t,cell_0"));
    assert_eq!(body.lines().count(), 22); // header + 21 output times
    let meta = std::fs::read_to_string(out.join("solution_meta.json")).unwrap();
    let doc: serde_json::Value = serde_json::from_str(&meta).unwrap();
    assert_eq!(doc["n"], 8);
    assert!(doc["generated_at"].as_str().unwrap().ends_with('Z'));
    let summary = stdout(&r);
    assert!(summary.contains("solution.csv"), "stdout: {summary}");
}
