//! Law-of-large-numbers study: along a schedule of (n, ell) rungs, R
//! replica particle runs each produce the statistic
//!
//!   sup_t || X^n(t) - u(t) ||_2
//!
//! with X^n refined to the reference partition and u the fine-partition
//! solution of the limiting reaction–diffusion system. The sup runs over a
//! 21-point uniform grid refined by every event time inside each grid
//! interval: the path is piecewise constant, so this is exact in X and
//! accurate to one grid spacing in u (u is frozen at the left grid point
//! within each interval, evaluated left-continuously across jumps).
//!
//! Per rung the study reports the empirical probability that the statistic
//! exceeds epsilon, with a Wilson 95% interval. When the schedule's ell
//! values are strictly increasing the estimates are asserted nonincreasing
//! (adjacent rungs may swap only if their intervals overlap); a schedule
//! that holds ell flat violates the scaling hypothesis, so the run is
//! labeled a hypothesis-violating control and nothing is asserted.
//!
//! A replica that hits the count cap has no trajectory beyond the
//! truncation time; it is counted as an exceedance, and a rung with more
//! than 5% capped replicas is flagged unreliable.
//!
//! Replica r of rung g draws from RNG stream (g << 32) | r of the
//! config seed, so results are independent of scheduling order.

use std::path::PathBuf;

use rayon::prelude::*;

use crate::dynamics::{integrate_rd, uniform_times};
use crate::harness::config::{ExperimentConfig, InitialProfile, REFERENCE_FACTOR};
use crate::harness::io::{fmt_float, timestamp, write_atomic};
use crate::harness::HarnessError;
use crate::kernel::quotient_step;
use crate::particles::{simulate_stream, EventKind, ParticleError, ParticleTrajectory};

pub const GRID_POINTS: usize = 21;
pub const WILSON_Z: f64 = 1.96;
/// A rung with more than this fraction of capped replicas is unreliable.
pub const CAP_FRACTION_LIMIT: f64 = 0.05;

#[derive(Debug, Clone)]
pub struct LlnReplicaRow {
    pub rung: usize,
    pub n: usize,
    pub ell: f64,
    pub replica: usize,
    pub stream: u64,
    pub sup_stat: f64,
    pub exceeded: bool,
    pub capped: bool,
    pub events: usize,
}

#[derive(Debug, Clone)]
pub struct LlnRungSummary {
    pub rung: usize,
    pub n: usize,
    pub ell: f64,
    pub replicas: usize,
    pub exceed_count: usize,
    pub p_hat: f64,
    pub wilson_lo: f64,
    pub wilson_hi: f64,
    pub capped_count: usize,
    pub reliable: bool,
}

#[derive(Debug, Clone)]
pub struct LlnStudy {
    pub replica_rows: Vec<LlnReplicaRow>,
    pub summaries: Vec<LlnRungSummary>,
    pub config_hash: String,
    pub reference_n: usize,
    /// Schedule does not scale ell: no trend asserted.
    pub control: bool,
    pub monotone_ok: bool,
    pub reliable: bool,
}

/// Wilson 95% score interval: (point estimate, lower, upper).
pub fn wilson_interval(successes: usize, trials: usize) -> (f64, f64, f64) {
    assert!(trials > 0 && successes <= trials);
    let nf = trials as f64;
    let p = successes as f64 / nf;
    let z2 = WILSON_Z * WILSON_Z;
    let denom = 1.0 + z2 / nf;
    let center = (p + z2 / (2.0 * nf)) / denom;
    let half = WILSON_Z * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
    (p, (center - half).max(0.0), (center + half).min(1.0))
}

/// Initial counts m0 = round(ell * u0) per cell; the profile must be
/// nonnegative wherever it is sampled.
pub fn initial_counts(
    profile: InitialProfile,
    n: usize,
    ell: f64,
) -> Result<Vec<u64>, HarnessError> {
    profile
        .sample(n)
        .values()
        .iter()
        .map(|&v| {
            let m = (ell * v).round();
            if m < 0.0 {
                return Err(HarnessError::Config(format!(
                    "initial profile {profile} produces a negative count ({m}) at ell={ell}"
                )));
            }
            Ok(m as u64)
        })
        .collect()
}

/// Densities at the given nondecreasing times in one pass over the event
/// log (right-continuous evaluation).
pub fn density_at_grid(
    traj: &ParticleTrajectory,
    times: &[f64],
) -> Result<Vec<Vec<f64>>, ParticleError> {
    let ell = traj.ell();
    let mut counts = traj.initial().counts().to_vec();
    let events = traj.events();
    let mut idx = 0usize;
    let mut prev = 0.0f64;
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        if !t.is_finite() || t < prev || t > traj.horizon() {
            return Err(ParticleError::TimeOutOfRange { t, horizon: traj.horizon() });
        }
        prev = t;
        while idx < events.len() && events[idx].time <= t {
            apply_to_counts(&mut counts, events[idx].kind);
            idx += 1;
        }
        out.push(counts.iter().map(|m| *m as f64 / ell).collect());
    }
    Ok(out)
}

fn apply_to_counts(counts: &mut [u64], kind: EventKind) {
    match kind {
        EventKind::Migrate { from, to } => {
            counts[from] -= 1;
            counts[to] += 1;
        }
        EventKind::Birth { node } => counts[node] += 1,
        EventKind::Death { node } => counts[node] -= 1,
    }
}

/// Sup statistic of one replica against the reference states (one per grid
/// time, on the reference partition). Exact over the path's jumps; the
/// reference is frozen at the left grid point within each interval.
fn replica_sup(
    traj: &ParticleTrajectory,
    grid: &[f64],
    ref_states: &[Vec<f64>],
    reference_n: usize,
) -> f64 {
    let n = traj.n();
    let block = reference_n / n;
    let ell = traj.ell();
    let events = traj.events();
    let mut counts = traj.initial().counts().to_vec();
    let mut idx = 0usize;
    let mut sup2 = 0.0f64;
    let mut b = vec![0.0f64; n];

    for (i, &t_i) in grid.iter().enumerate() {
        if t_i > traj.horizon() {
            break; // capped: the path is not defined past the truncation
        }
        let ubar = &ref_states[i];
        // fresh anchors and sum of squares against this grid time's reference
        let mut s = 0.0f64;
        for k in 0..n {
            let x = counts[k] as f64 / ell;
            let mut bk = 0.0;
            for &u in &ubar[k * block..(k + 1) * block] {
                let d = x - u;
                s += d * d;
                bk += u;
            }
            b[k] = bk;
        }
        sup2 = sup2.max(s);
        if i + 1 == grid.len() {
            break;
        }
        let t_next = grid[i + 1].min(traj.horizon());
        while idx < events.len() && events[idx].time <= t_next {
            // the pre-jump value was the previous candidate, so applying the
            // jump and re-taking the max covers both one-sided limits
            let kind = events[idx].kind;
            let touched: [Option<usize>; 2] = match kind {
                EventKind::Migrate { from, to } => [Some(from), Some(to)],
                EventKind::Birth { node } | EventKind::Death { node } => [Some(node), None],
            };
            let old: Vec<(usize, f64)> = touched
                .iter()
                .flatten()
                .map(|&k| (k, counts[k] as f64 / ell))
                .collect();
            apply_to_counts(&mut counts, kind);
            for (k, x_old) in old {
                let x_new = counts[k] as f64 / ell;
                s += block as f64 * (x_new * x_new - x_old * x_old)
                    - 2.0 * (x_new - x_old) * b[k];
            }
            sup2 = sup2.max(s);
            idx += 1;
        }
    }
    (sup2.max(0.0) / reference_n as f64).sqrt()
}

pub fn run_lln_study(cfg: &ExperimentConfig) -> Result<LlnStudy, HarnessError> {
    let w = cfg.kernel.analytic()?;
    let (birth, death) = cfg.families()?;
    let max_n = cfg.schedule.iter().map(|(n, _)| *n).max().expect("validated schedule");
    let reference_n = REFERENCE_FACTOR * max_n;
    for &(n, _) in &cfg.schedule {
        if reference_n % n != 0 {
            return Err(HarnessError::Config(format!(
                "schedule size {n} does not divide the reference partition {reference_n}"
            )));
        }
    }

    // limiting solution on the fine partition, stored per grid time
    let grid = uniform_times(cfg.t_end, GRID_POINTS);
    let w_fine = quotient_step(&w, reference_n)?;
    let u0_fine = cfg.initial.sample(reference_n);
    let sol = integrate_rd(&w_fine, &cfg.reaction, &u0_fine, cfg.t_end, cfg.resolve_dt(), &grid)?;
    let ref_states: Vec<Vec<f64>> =
        sol.states().iter().map(|s| s.values().to_vec()).collect();
    debug_assert_eq!(ref_states.len(), grid.len());

    // per-rung immutable inputs
    let mut rung_inputs = Vec::with_capacity(cfg.schedule.len());
    for &(n, ell) in &cfg.schedule {
        let wn = quotient_step(&w, n)?;
        let m0 = initial_counts(cfg.initial, n, ell)?;
        rung_inputs.push((n, ell, wn, m0));
    }

    let replicas = cfg.replicas;
    let jobs: Vec<(usize, usize)> = (0..cfg.schedule.len())
        .flat_map(|g| (0..replicas).map(move |r| (g, r)))
        .collect();
    let mut replica_rows: Vec<LlnReplicaRow> = jobs
        .par_iter()
        .map(|&(g, r)| -> Result<LlnReplicaRow, HarnessError> {
            let (n, ell, ref wn, ref m0) = rung_inputs[g];
            let stream = ((g as u64) << 32) | r as u64;
            let traj =
                simulate_stream(wn, birth, death, m0, ell, cfg.t_end, cfg.cap, cfg.seed, stream)?;
            let sup_stat = replica_sup(&traj, &grid, &ref_states, reference_n);
            Ok(LlnReplicaRow {
                rung: g,
                n,
                ell,
                replica: r,
                stream,
                sup_stat,
                exceeded: traj.capped() || sup_stat > cfg.epsilon,
                capped: traj.capped(),
                events: traj.events().len(),
            })
        })
        .collect::<Result<_, _>>()?;
    replica_rows.sort_by_key(|row| (row.rung, row.replica));

    let mut summaries = Vec::with_capacity(cfg.schedule.len());
    for (g, &(n, ell, _, _)) in rung_inputs.iter().enumerate() {
        let rows = &replica_rows[g * replicas..(g + 1) * replicas];
        let exceed_count = rows.iter().filter(|r| r.exceeded).count();
        let capped_count = rows.iter().filter(|r| r.capped).count();
        let (p_hat, wilson_lo, wilson_hi) = wilson_interval(exceed_count, replicas);
        summaries.push(LlnRungSummary {
            rung: g,
            n,
            ell,
            replicas,
            exceed_count,
            p_hat,
            wilson_lo,
            wilson_hi,
            capped_count,
            reliable: (capped_count as f64) <= CAP_FRACTION_LIMIT * replicas as f64,
        });
    }

    let control = !cfg.schedule.windows(2).all(|w| w[0].1 < w[1].1);
    let monotone_ok = control
        || summaries.windows(2).all(|pair| {
            pair[1].p_hat <= pair[0].p_hat + 1e-12 || pair[1].wilson_lo <= pair[0].wilson_hi
        });
    let reliable = summaries.iter().all(|s| s.reliable);

    Ok(LlnStudy {
        replica_rows,
        summaries,
        config_hash: cfg.hash(),
        reference_n,
        control,
        monotone_ok,
        reliable,
    })
}

pub fn replicas_csv(study: &LlnStudy) -> String {
    let mut out = String::from("config_hash,rung,n,ell,replica,stream,sup,exceeded,capped,events\n");
    for r in &study.replica_rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            study.config_hash,
            r.rung,
            r.n,
            fmt_float(r.ell),
            r.replica,
            r.stream,
            fmt_float(r.sup_stat),
            r.exceeded,
            r.capped,
            r.events,
        ));
    }
    out
}

pub fn summary_csv(study: &LlnStudy) -> String {
    let label = if study.control { "hypothesis-violating control" } else { "normal" };
    let mut out = String::from(
        "config_hash,rung,n,ell,replicas,exceeded,p_hat,wilson_lo,wilson_hi,capped,reliable,label\n",
    );
    for s in &study.summaries {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}\n",
            study.config_hash,
            s.rung,
            s.n,
            fmt_float(s.ell),
            s.replicas,
            s.exceed_count,
            fmt_float(s.p_hat),
            fmt_float(s.wilson_lo),
            fmt_float(s.wilson_hi),
            s.capped_count,
            s.reliable,
            label,
        ));
    }
    out
}

/// Write replica + summary CSVs and the JSON sidecar; returns the summary
/// CSV path.
pub fn write_lln_outputs(
    study: &LlnStudy,
    cfg: &ExperimentConfig,
    runtime_ms: u128,
) -> Result<PathBuf, HarnessError> {
    write_atomic(&cfg.out.join("lln_replicas.csv"), &replicas_csv(study))?;
    let summary_path = cfg.out.join("lln_summary.csv");
    write_atomic(&summary_path, &summary_csv(study))?;
    let meta = serde_json::json!({
        "generated_at": timestamp(),
        "runtime_ms": runtime_ms,
        "config_hash": study.config_hash,
        "config": cfg.echo(),
        "reference_n": study.reference_n,
        "control": study.control,
        "monotone_ok": study.monotone_ok,
        "reliable": study.reliable,
    });
    write_atomic(
        &cfg.out.join("lln_meta.json"),
        &serde_json::to_string_pretty(&meta).expect("metadata serializes"),
    )?;
    Ok(summary_path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::ScalarFamily;
    use crate::particles::simulate;
    use crate::kernel::StepGraphon;

    #[test]
    fn wilson_brackets_the_point_estimate() {
        let (p, lo, hi) = wilson_interval(0, 100);
        assert_eq!(p, 0.0);
        assert_eq!(lo, 0.0);
        assert!((hi - 0.037).abs() < 2e-3);
        let (p, lo, hi) = wilson_interval(50, 100);
        assert_eq!(p, 0.5);
        assert!(lo < 0.5 && 0.5 < hi);
        assert!((hi - lo) < 0.21);
        let (p, lo, hi) = wilson_interval(100, 100);
        assert_eq!(p, 1.0);
        assert!(lo > 0.96);
        assert!((hi - 1.0).abs() < 1e-12); // algebraically 1; rounding may undershoot the clamp
    }

    #[test]
    fn counts_round_from_scaled_profile() {
        let m0 = initial_counts(
            InitialProfile::Step { lo: 0.2, hi: 0.8, split: 0.5 },
            2,
            10.0,
        )
        .unwrap();
        assert_eq!(m0, vec![2, 8]);
        assert!(initial_counts(InitialProfile::Sine(0.9), 4, 10.0).is_err());
    }

    #[test]
    fn grid_densities_match_pointwise_lookup() {
        let rows: Vec<Vec<f64>> = (0..3)
            .map(|i| (0..3).map(|j| if i == j { 0.0 } else { 1.0 }).collect())
            .collect();
        let g = StepGraphon::from_rows(&rows).unwrap();
        let traj = simulate(
            &g,
            ScalarFamily::Linear { rate: 1.0 },
            ScalarFamily::Quadratic { rate: 1.0 },
            &[5, 3, 8],
            4.0,
            1.0,
            100_000,
            21,
        )
        .unwrap();
        let times = uniform_times(1.0, 9);
        let grids = density_at_grid(&traj, &times).unwrap();
        for (t, got) in times.iter().zip(&grids) {
            let want = traj.density_at(*t).unwrap();
            assert_eq!(got.as_slice(), want.values());
        }
        assert!(density_at_grid(&traj, &[0.5, 0.2]).is_err());
        assert!(density_at_grid(&traj, &[2.0]).is_err());
    }

    fn tiny_lln(extra: &[String]) -> LlnStudy {
        let text = "\
[experiment]
kind = lln
t = 0.2
epsilon = 1000
replicas = 10
seed = 5
[kernel]
family = constant
c = 1
[reaction]
birth = x
death = x^2
[initial]
profile = constant(0.5)
[sweep]
schedule = 2:5,4:10
";
        let cfg = ExperimentConfig::from_text(text, extra).unwrap();
        run_lln_study(&cfg).unwrap()
    }

    #[test]
    fn huge_epsilon_never_exceeds() {
        let study = tiny_lln(&[]);
        assert!(!study.control);
        assert!(study.monotone_ok);
        assert!(study.reliable);
        assert_eq!(study.summaries.len(), 2);
        for s in &study.summaries {
            assert_eq!(s.exceed_count, 0);
            assert_eq!(s.p_hat, 0.0);
        }
        assert_eq!(study.replica_rows.len(), 20);
        let csv = summary_csv(&study);
        assert!(csv.contains("normal"));
        assert_eq!(study.reference_n, 64);
    }

    #[test]
    fn flat_ell_schedule_is_a_labeled_control() {
        let study = tiny_lln(&["sweep.schedule=2:5,4:5".into()]);
        assert!(study.control);
        assert!(study.monotone_ok); // vacuous: no trend asserted
        assert!(summary_csv(&study).contains("hypothesis-violating control"));
    }

    #[test]
    fn reruns_are_byte_identical() {
        let a = tiny_lln(&[]);
        let b = tiny_lln(&[]);
        assert_eq!(replicas_csv(&a), replicas_csv(&b));
        assert_eq!(summary_csv(&a), summary_csv(&b));
    }

    #[test]
    fn capped_replicas_flag_the_rung_unreliable() {
        // pure birth from m0 = ell with a cap just above: almost every
        // replica truncates well before T
        let study = {
            let text = "\
[experiment]
kind = lln
t = 2
epsilon = 1000
replicas = 10
cap = 6
seed = 3
[kernel]
family = constant
c = 1
[reaction]
birth = x
death = 0x
[initial]
profile = constant(1)
[sweep]
schedule = 1:4
";
            let cfg = ExperimentConfig::from_text(text, &[]).unwrap();
            run_lln_study(&cfg).unwrap()
        };
        assert!(!study.reliable);
        let s = &study.summaries[0];
        assert!(s.capped_count >= 9, "capped {} of {}", s.capped_count, s.replicas);
        // capped counts as exceeded regardless of the huge epsilon
        assert_eq!(s.exceed_count, s.capped_count);
    }

    #[test]
    fn statistic_tracks_a_conserved_run_exactly() {
        // migration-only with u0 = reference solution constant in time:
        // X(0) matches u0 exactly, so the statistic is the pure fluctuation
        // of the walk, and with no particles it is zero
        let text = "\
[experiment]
kind = lln
t = 0.5
epsilon = 0.001
replicas = 4
seed = 2
[kernel]
family = constant
c = 1
[reaction]
phi = zero
[initial]
profile = constant(0)
[sweep]
schedule = 2:8
";
        let cfg = ExperimentConfig::from_text(text, &[]).unwrap();
        let study = run_lln_study(&cfg).unwrap();
        for row in &study.replica_rows {
            assert_eq!(row.events, 0);
            assert_eq!(row.sup_stat, 0.0);
            assert!(!row.exceeded);
        }
    }
}
