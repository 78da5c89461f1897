//! Convergence-study driver: for each sweep size n, build the step kernel
//! (quotient or sampled graph), solve the reaction–diffusion system, and
//! compare against the fine-partition reference through the a-priori bound.
//! One study runs one norm; the caller sweeps p by varying the config.
//!
//! Row failures (a violated bound) are recorded, never thrown — a bad row
//! must not hide its siblings. The emitted CSV is byte-stable across reruns;
//! wall-clock metadata lives only in the JSON sidecar.

use std::path::PathBuf;

use rayon::prelude::*;

use crate::dynamics::bounds::{
    linfty_convergence_bound_with, rd_convergence_bound_with, BoundOptions, BoundReport,
    CutNormPolicy,
};
use crate::dynamics::{integrate_rd, uniform_times, ReactionTerm};
use crate::harness::config::{ExperimentConfig, REFERENCE_FACTOR};
use crate::harness::io::{fmt_float, timestamp, write_atomic};
use crate::harness::HarnessError;
use crate::kernel::{quotient_step, sample_w_random, GraphonHandle, StepGraphon};

/// Successive lhs values may grow by at most this factor before the sweep is
/// flagged non-monotone (discretization noise allowance).
pub const MONOTONE_FACTOR: f64 = 1.1;

#[derive(Debug, Clone)]
pub struct ConvergenceRow {
    pub n: usize,
    pub report: BoundReport,
}

#[derive(Debug, Clone)]
pub struct ConvergenceStudy {
    pub rows: Vec<ConvergenceRow>,
    pub reference_n: usize,
    pub config_hash: String,
    /// Every row satisfied its bound.
    pub all_passed: bool,
    /// lhs column nonincreasing in n within [`MONOTONE_FACTOR`].
    pub monotone_ok: bool,
}

/// Build the size-n comparison kernel per the config: cell averages of the
/// analytic kernel, or a sampled simple graph when `sample` is set.
fn build_wn(cfg: &ExperimentConfig, n: usize) -> Result<StepGraphon, HarnessError> {
    let w = cfg.kernel.analytic()?;
    if cfg.sample {
        let handle = GraphonHandle::from(w);
        Ok(sample_w_random(&handle, n, cfg.seed.wrapping_add(n as u64))?)
    } else {
        Ok(quotient_step(&w, n)?)
    }
}

pub fn run_convergence_study(cfg: &ExperimentConfig) -> Result<ConvergenceStudy, HarnessError> {
    let w = cfg.kernel.analytic()?;
    let reference_n = REFERENCE_FACTOR * cfg.ns.last().copied().unwrap_or(1);
    let u0_fine = cfg.initial.sample(reference_n);
    let opts = BoundOptions {
        dt: Some(cfg.resolve_dt()),
        cut_policy: CutNormPolicy::Auto { restarts: cfg.restarts, seed: cfg.seed ^ 0xC07 },
        ..BoundOptions::default()
    };

    let rows: Vec<ConvergenceRow> = cfg
        .ns
        .par_iter()
        .map(|&n| -> Result<ConvergenceRow, HarnessError> {
            let wn = build_wn(cfg, n)?;
            let report = if cfg.p.is_finite() {
                rd_convergence_bound_with(&w, &wn, &cfg.reaction, &u0_fine, cfg.t_end, cfg.p, &opts)?
            } else {
                linfty_convergence_bound_with(&w, &wn, &cfg.reaction, &u0_fine, cfg.t_end, &opts)?
            };
            Ok(ConvergenceRow { n, report })
        })
        .collect::<Result<_, _>>()?;

    let all_passed = rows.iter().all(|r| r.report.within_bound);
    let monotone_ok = rows
        .windows(2)
        .all(|w| w[1].report.lhs <= MONOTONE_FACTOR * w[0].report.lhs + 1e-9);

    Ok(ConvergenceStudy {
        rows,
        reference_n,
        config_hash: cfg.hash(),
        all_passed,
        monotone_ok,
    })
}

/// Data CSV: one row per sweep size.
pub fn convergence_csv(study: &ConvergenceStudy, cfg: &ExperimentConfig) -> String {
    let mut out = String::from(
        "config_hash,kind,kernel,reaction,initial,n,reference_n,p,t_end,lhs,rhs,margin,\
         initial_gap,lipschitz_k,sup_m,cut_value,cut_mode,rhs_norm,passed\n",
    );
    for row in &study.rows {
        let r = &row.report;
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            study.config_hash,
            cfg.kind.name(),
            cfg.kernel.describe(),
            cfg.reaction,
            cfg.initial,
            row.n,
            r.reference_n,
            r.p,
            fmt_float(r.t_end),
            fmt_float(r.lhs),
            fmt_float(r.rhs),
            fmt_float(r.margin),
            fmt_float(r.initial_gap),
            fmt_float(r.lipschitz_k),
            fmt_float(r.sup_m),
            fmt_float(r.cut_norm_value),
            r.cut_norm_mode.name(),
            r.rhs_norm.name(),
            r.within_bound,
        ));
    }
    out
}

/// Companion CSV with the full per-time bound trace of every row.
pub fn convergence_times_csv(study: &ConvergenceStudy) -> String {
    let mut out = String::from("config_hash,n,p,t,lhs,rhs\n");
    for row in &study.rows {
        for tr in &row.report.per_time {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                study.config_hash,
                row.n,
                row.report.p,
                fmt_float(tr.t),
                fmt_float(tr.lhs),
                fmt_float(tr.rhs),
            ));
        }
    }
    out
}

/// Write data CSVs plus the JSON sidecar; returns the main CSV path.
pub fn write_convergence_outputs(
    study: &ConvergenceStudy,
    cfg: &ExperimentConfig,
    runtime_ms: u128,
) -> Result<PathBuf, HarnessError> {
    let main = cfg.out.join("convergence.csv");
    write_atomic(&main, &convergence_csv(study, cfg))?;
    write_atomic(&cfg.out.join("convergence_times.csv"), &convergence_times_csv(study))?;
    let failures = study.rows.iter().filter(|r| !r.report.within_bound).count();
    let meta = serde_json::json!({
        "generated_at": timestamp(),
        "runtime_ms": runtime_ms,
        "config_hash": study.config_hash,
        "config": cfg.echo(),
        "rows": study.rows.len(),
        "failures": failures,
        "all_passed": study.all_passed,
        "monotone_ok": study.monotone_ok,
        "reference_n": study.reference_n,
    });
    write_atomic(
        &cfg.out.join("convergence_meta.json"),
        &serde_json::to_string_pretty(&meta).expect("metadata serializes"),
    )?;
    Ok(main)
}

/// Fourth-order self-test for the fixed-step integrator: halving the step on
/// a smooth problem must shrink the endpoint error by roughly 2^4. Run at
/// startup in paranoid mode; a failure means the build's solver cannot be
/// trusted to sit far below the bound margins.
pub fn integrator_order_check() -> Result<f64, HarnessError> {
    let rows: Vec<Vec<f64>> = (0..4)
        .map(|i| (0..4).map(|j| if i == j { 0.0 } else { 0.9 }).collect())
        .collect();
    let g = StepGraphon::from_rows(&rows)?;
    let u0 = crate::gridfn::GridFunction::new(vec![0.15, 0.8, 0.4, 0.65])?;
    let phi = ReactionTerm::Logistic { r: 1.0 };
    let t_end = 0.4;
    let times = uniform_times(t_end, 2);
    let solve = |dt: f64| -> Result<Vec<f64>, HarnessError> {
        let sol = integrate_rd(&g, &phi, &u0, t_end, dt, &times)?;
        Ok(sol.final_state().values().to_vec())
    };
    let reference = solve(1e-5)?;
    let err = |state: &[f64]| {
        state
            .iter()
            .zip(&reference)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max)
    };
    let e1 = err(&solve(0.02)?);
    let e2 = err(&solve(0.01)?);
    if e2 == 0.0 {
        return Err(HarnessError::OrderTestFailed("halved-step error is exactly zero".into()));
    }
    let ratio = e1 / e2;
    if !(10.0..=24.0).contains(&ratio) {
        return Err(HarnessError::OrderTestFailed(format!(
            "error ratio {ratio:.2} outside [10, 24] (expected ~16 for fourth order)"
        )));
    }
    Ok(ratio)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(text: &str) -> ExperimentConfig {
        ExperimentConfig::from_text(text, &[]).unwrap()
    }

    #[test]
    fn diffusion_study_passes_and_is_monotone() {
        let cfg = cfg("\
[experiment]
kind = diffusion_convergence
t = 0.5
p = 2
[kernel]
family = smooth_cosine
c = 0.5
[sweep]
ns = 2,4,8
");
        let study = run_convergence_study(&cfg).unwrap();
        assert_eq!(study.rows.len(), 3);
        assert_eq!(study.reference_n, 128);
        assert!(study.all_passed);
        assert!(study.monotone_ok);
        for w in study.rows.windows(2) {
            assert!(w[1].report.lhs <= w[0].report.lhs * MONOTONE_FACTOR + 1e-9);
        }
        let csv = convergence_csv(&study, &cfg);
        assert_eq!(csv.lines().count(), 4);
        assert!(csv.contains("smooth_cosine(0.5)"));
        let times = convergence_times_csv(&study);
        assert_eq!(times.lines().count(), 1 + 3 * 21);
    }

    #[test]
    fn infinity_norm_study_uses_sup_distance() {
        let cfg = cfg("\
[experiment]
kind = rd_convergence
t = 0.25
p = inf
[kernel]
family = constant
c = 0.7
[reaction]
phi = allen_cahn
[initial]
profile = sine(0.9)
[sweep]
ns = 4,8
");
        let study = run_convergence_study(&cfg).unwrap();
        assert!(study.all_passed);
        for row in &study.rows {
            assert_eq!(row.report.rhs_norm.name(), "sup");
            // the sine profile has real within-block variation, so the gap
            // is genuinely nonzero yet controlled by the initial-gap term
            assert!(row.report.lhs > 1e-4, "lhs = {}", row.report.lhs);
            assert!(row.report.lhs <= row.report.rhs + 1e-6);
        }
        // blocks shrink with n, so the sup gap must shrink too
        assert!(study.rows[1].report.lhs < study.rows[0].report.lhs);
    }

    #[test]
    fn sampled_graphs_study_still_bounds() {
        let cfg = cfg("\
[experiment]
kind = diffusion_convergence
t = 0.3
p = 1
seed = 11
[kernel]
family = constant
c = 0.5
sample = true
[sweep]
ns = 8,16
");
        let study = run_convergence_study(&cfg).unwrap();
        // sampled graphs fluctuate; the bound must still hold row-wise
        assert!(study.all_passed);
    }

    #[test]
    fn outputs_land_in_the_chosen_directory() {
        let dir = tempfile::tempdir().unwrap();
        let text = format!(
            "\
[experiment]
kind = diffusion_convergence
t = 0.2
out = {}
[kernel]
family = constant
[sweep]
ns = 2,4
",
            dir.path().display()
        );
        let cfg = ExperimentConfig::from_text(&text, &[]).unwrap();
        let study = run_convergence_study(&cfg).unwrap();
        let path = write_convergence_outputs(&study, &cfg, 17).unwrap();
        assert!(path.ends_with("convergence.csv"));
        let body = std::fs::read_to_string(&path).unwrap();
        assert!(body.starts_with("config_hash,"));
        assert!(body.contains(&study.config_hash));
        let meta = std::fs::read_to_string(dir.path().join("convergence_meta.json")).unwrap();
        let meta: serde_json::Value = serde_json::from_str(&meta).unwrap();
        assert_eq!(meta["rows"], 2);
        assert_eq!(meta["runtime_ms"], 17);
    }

    #[test]
    fn order_check_confirms_fourth_order() {
        let ratio = integrator_order_check().unwrap();
        assert!((10.0..=24.0).contains(&ratio));
    }
}
