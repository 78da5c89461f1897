//! Command-line front end over the library: deterministic solves, particle
//! runs, cut-norm evaluation, and the two sweep studies, each as a
//! subcommand.
//!
//! Exit-code contract: 0 on success, 1 for usage/config/input problems, 2
//! when a run completed but its scientific assertion failed (a bound was
//! violated, exceedance stopped decreasing, too many replicas hit the count
//! cap, or the startup integrator check failed). clap's default usage exit
//! of 2 is remapped so that 2 always means "the science failed", never "you
//! typo'd a flag".

use std::ffi::OsString;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::dynamics::bounds::OUTPUT_POINTS;
use crate::dynamics::{integrate_rd, uniform_times};
use crate::gridfn::Lp;
use crate::kernel::{
    cut_norm_bilinear_exact_with_limit, cut_norm_exact_with_limit, cut_norm_heuristic,
    quotient_step, sample_w_random, CutVariant, SignedStepKernel, StepGraphon,
};
use crate::particles::simulate;

use super::config::ExperimentConfig;
use super::convergence::{integrator_order_check, run_convergence_study, write_convergence_outputs};
use super::io::{fmt_float, timestamp, write_atomic};
use super::lln::{initial_counts, run_lln_study, write_lln_outputs};
use super::HarnessError;

#[derive(Parser)]
#[command(name = "graphon-rd", version, about = "Graph reaction-diffusion workbench")]
struct Cli {
    /// Run the fixed-step integrator order check before doing anything else.
    #[arg(long, global = true)]
    paranoid: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the deterministic reaction-diffusion system on one graph.
    SimulateRd(RunArgs),
    /// Run one stochastic particle trajectory and log every event.
    SimulateParticles(RunArgs),
    /// Cut norm of a kernel, or of the difference of two adjacency matrices.
    CutNorm(CutNormArgs),
    /// Sweep graph sizes and check the a-priori convergence bound on each.
    Convergence(RunArgs),
    /// Replica study of the particle-to-PDE law of large numbers.
    Lln(RunArgs),
    /// Parse and validate a config, then print its canonical form and hash.
    ValidateConfig(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Path to an INI experiment config.
    #[arg(long)]
    config: PathBuf,
    /// section.key=value override, applied before validation (repeatable).
    #[arg(long = "override", value_name = "SEC.KEY=VALUE")]
    overrides: Vec<String>,
    /// Output directory (wins over the config file and the environment).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CutModeArg {
    /// Brute-force enumeration; errors above the size limit.
    Exact,
    /// Randomized alternating ascent; a certified lower bound.
    Heuristic,
}

#[derive(Clone, Copy, ValueEnum)]
enum CutVariantArg {
    /// Two free subsets S, T with an absolute value.
    St,
    /// One subset against its complement, signed.
    #[value(name = "s_complement")]
    SComplement,
}

#[derive(Args)]
struct CutNormArgs {
    /// Matrix file: whitespace-separated rows, `#` comments.
    #[arg(long)]
    a: PathBuf,
    /// Optional second adjacency matrix; with it the norm is of the
    /// difference a - b on the common refinement.
    #[arg(long)]
    b: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = CutModeArg::Exact)]
    mode: CutModeArg,
    #[arg(long, value_enum, default_value_t = CutVariantArg::St)]
    variant: CutVariantArg,
    /// Optimize over sign vectors instead of subsets (exact mode only).
    #[arg(long)]
    bilinear: bool,
    /// Restarts for the heuristic ascent.
    #[arg(long, default_value_t = 40)]
    restarts: usize,
    /// Seed for the heuristic ascent.
    #[arg(long, default_value_t = 0xC07)]
    seed: u64,
    /// Override the exact-mode size limit (costs 2^n or 4^n subsets).
    #[arg(long)]
    limit: Option<usize>,
}

/// Parse `args` and run the selected subcommand, returning the process exit
/// code. The binary is a one-liner over this so that tests can drive the
/// full dispatch in-process.
pub fn cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let requested = matches!(
                e.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            );
            let _ = e.print();
            return if requested { 0 } else { 1 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                HarnessError::BoundViolation { .. }
                | HarnessError::MonotonicityViolation(_)
                | HarnessError::CapTruncationExcessive { .. }
                | HarnessError::OrderTestFailed(_) => 2,
                _ => 1,
            }
        }
    }
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    if cli.paranoid {
        let ratio = integrator_order_check()?;
        eprintln!("paranoid: integrator error ratio under step halving = {ratio:.1}");
    }
    match &cli.command {
        Command::SimulateRd(a) => simulate_rd_cmd(&load_config(a)?),
        Command::SimulateParticles(a) => simulate_particles_cmd(&load_config(a)?),
        Command::CutNorm(a) => cut_norm_cmd(a),
        Command::Convergence(a) => convergence_cmd(&load_config(a)?),
        Command::Lln(a) => lln_cmd(&load_config(a)?),
        Command::ValidateConfig(a) => {
            let cfg = load_config(a)?;
            print!("{}", cfg.echo());
            println!("config_hash = {}", cfg.hash());
            Ok(())
        }
    }
}

fn load_config(args: &RunArgs) -> Result<ExperimentConfig, HarnessError> {
    let mut overrides = args.overrides.clone();
    if let Some(out) = &args.out {
        overrides.push(format!("experiment.out={}", out.display()));
    }
    ExperimentConfig::from_file(&args.config, &overrides)
}

/// The graph a single run works on: a matrix file verbatim, otherwise the
/// configured analytic kernel at size n (quotient or sampled, same seed
/// scheme as the sweeps).
fn resolve_graphon(cfg: &ExperimentConfig) -> Result<StepGraphon, HarnessError> {
    if let Some(g) = cfg.kernel.load_step()? {
        return Ok(g);
    }
    let w = cfg.kernel.analytic()?;
    if cfg.sample {
        Ok(sample_w_random(&w.into(), cfg.n, cfg.seed.wrapping_add(cfg.n as u64))?)
    } else {
        Ok(quotient_step(&w, cfg.n)?)
    }
}

fn simulate_rd_cmd(cfg: &ExperimentConfig) -> Result<(), HarnessError> {
    let start = Instant::now();
    let g = resolve_graphon(cfg)?;
    let u0 = cfg.initial.sample(g.n());
    let times = uniform_times(cfg.t_end, OUTPUT_POINTS);
    let sol = integrate_rd(&g, &cfg.reaction, &u0, cfg.t_end, cfg.resolve_dt(), &times)?;
    let path = cfg.out.join("solution.csv");
    write_atomic(&path, &sol.to_csv())?;
    let meta = serde_json::json!({
        "generated_at": timestamp(),
        "runtime_ms": start.elapsed().as_millis() as u64,
        "config_hash": cfg.hash(),
        "echo": cfg.echo(),
        "n": g.n(),
        "t_end": cfg.t_end,
        "dt": cfg.resolve_dt(),
        "final_l2": sol.final_state().lp_norm(Lp::TWO),
    });
    write_atomic(
        &cfg.out.join("solution_meta.json"),
        &format!("{}\n", serde_json::to_string_pretty(&meta).expect("plain data")),
    )?;
    println!(
        "rd: n={} over [0,{}], final |u|_2 = {} -> {}",
        g.n(),
        fmt_float(cfg.t_end),
        fmt_float(sol.final_state().lp_norm(Lp::TWO)),
        path.display()
    );
    Ok(())
}

fn simulate_particles_cmd(cfg: &ExperimentConfig) -> Result<(), HarnessError> {
    let start = Instant::now();
    let g = resolve_graphon(cfg)?;
    let (birth, death) = cfg.families()?;
    let m0 = initial_counts(cfg.initial, g.n(), cfg.ell)?;
    let traj = simulate(&g, birth, death, &m0, cfg.ell, cfg.t_end, cfg.cap, cfg.seed)?;
    let path = cfg.out.join("events.csv");
    write_atomic(&path, &traj.events_csv())?;
    let mut meta: serde_json::Value =
        serde_json::from_str(&traj.meta_json()).expect("own serializer");
    let obj = meta.as_object_mut().expect("meta is an object");
    obj.insert("generated_at".into(), serde_json::json!(timestamp()));
    obj.insert("runtime_ms".into(), serde_json::json!(start.elapsed().as_millis() as u64));
    obj.insert("config_hash".into(), serde_json::json!(cfg.hash()));
    obj.insert("echo".into(), serde_json::json!(cfg.echo()));
    write_atomic(
        &cfg.out.join("particles_meta.json"),
        &format!("{}\n", serde_json::to_string_pretty(&meta).expect("plain data")),
    )?;
    let capped_note = if traj.capped() {
        format!(", capped at t={}", fmt_float(traj.horizon()))
    } else {
        String::new()
    };
    println!(
        "particles: {} events on n={} nodes over [0,{}]{} -> {}",
        traj.events().len(),
        traj.initial().n(),
        fmt_float(cfg.t_end),
        capped_note,
        path.display()
    );
    Ok(())
}

fn read_matrix(path: &PathBuf) -> Result<String, HarnessError> {
    std::fs::read_to_string(path)
        .map_err(|e| HarnessError::Config(format!("cannot read matrix {}: {e}", path.display())))
}

/// Compute the requested cut norm; returns the value and a human-readable
/// detail line. Split from the printing so tests can check the number.
fn cut_norm_value(args: &CutNormArgs) -> Result<(f64, String), HarnessError> {
    let d = match &args.b {
        Some(bp) => {
            let ga = StepGraphon::parse_adjacency(&read_matrix(&args.a)?)?;
            let gb = StepGraphon::parse_adjacency(&read_matrix(bp)?)?;
            ga.difference(&gb)?
        }
        None => SignedStepKernel::parse_matrix(&read_matrix(&args.a)?)?,
    };
    let n = d.n();
    match args.mode {
        CutModeArg::Exact if args.bilinear => {
            let limit = args.limit.unwrap_or(crate::kernel::BILINEAR_LIMIT);
            let cut = cut_norm_bilinear_exact_with_limit(&d, limit)?;
            Ok((cut.value, format!("bilinear exact, n={n}")))
        }
        CutModeArg::Exact => {
            let variant = match args.variant {
                CutVariantArg::St => CutVariant::SubsetPair,
                CutVariantArg::SComplement => CutVariant::Complement,
            };
            let limit = args.limit.unwrap_or_else(|| variant.default_limit());
            let r = cut_norm_exact_with_limit(&d, variant, limit)?;
            Ok((
                r.value,
                format!(
                    "variant={} exact, n={n}, |S|={}, |T|={}",
                    r.variant,
                    r.certificate.s.len(),
                    r.certificate.t.len()
                ),
            ))
        }
        CutModeArg::Heuristic => {
            let cut = cut_norm_heuristic(&d, args.restarts, args.seed);
            Ok((
                cut.value,
                format!(
                    "bilinear ascent (lower bound), n={n}, restarts={}, seed={}",
                    args.restarts, args.seed
                ),
            ))
        }
    }
}

fn cut_norm_cmd(args: &CutNormArgs) -> Result<(), HarnessError> {
    let (value, detail) = cut_norm_value(args)?;
    // First stdout line is the bare value so scripts can read it directly.
    println!("{}", fmt_float(value));
    println!("{detail}");
    Ok(())
}

fn convergence_cmd(cfg: &ExperimentConfig) -> Result<(), HarnessError> {
    let start = Instant::now();
    let study = run_convergence_study(cfg)?;
    let path = write_convergence_outputs(&study, cfg, start.elapsed().as_millis())?;
    let failures = study.rows.iter().filter(|r| !r.report.within_bound).count();
    println!(
        "convergence: {} sizes vs reference n={}, {} bound failure(s), lhs monotone: {} -> {}",
        study.rows.len(),
        study.reference_n,
        failures,
        if study.monotone_ok { "yes" } else { "no" },
        path.display()
    );
    if !study.all_passed {
        return Err(HarnessError::BoundViolation { failures, rows: study.rows.len() });
    }
    if !study.monotone_ok {
        let lhs: Vec<String> =
            study.rows.iter().map(|r| format!("n={}: {}", r.n, fmt_float(r.report.lhs))).collect();
        return Err(HarnessError::MonotonicityViolation(lhs.join(", ")));
    }
    Ok(())
}

fn lln_cmd(cfg: &ExperimentConfig) -> Result<(), HarnessError> {
    let start = Instant::now();
    let study = run_lln_study(cfg)?;
    let path = write_lln_outputs(&study, cfg, start.elapsed().as_millis())?;
    let phats: Vec<String> = study.summaries.iter().map(|s| fmt_float(s.p_hat)).collect();
    println!(
        "lln: {} rungs x {} replicas{}, exceedance [{}] -> {}",
        study.summaries.len(),
        cfg.replicas,
        if study.control { " (control)" } else { "" },
        phats.join(", "),
        path.display()
    );
    if !study.reliable {
        let frac = study
            .summaries
            .iter()
            .map(|s| 100.0 * s.capped_count as f64 / s.replicas.max(1) as f64)
            .fold(0.0f64, f64::max);
        return Err(HarnessError::CapTruncationExcessive { frac });
    }
    if !study.control && !study.monotone_ok {
        let seq: Vec<String> = study
            .summaries
            .iter()
            .map(|s| format!("n={}: p={} [{}, {}]", s.n, fmt_float(s.p_hat), fmt_float(s.wilson_lo), fmt_float(s.wilson_hi)))
            .collect();
        return Err(HarnessError::MonotonicityViolation(seq.join("; ")));
    }
    Ok(())
}
