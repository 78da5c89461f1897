//! Line-oriented experiment configuration.
//!
//! The file format is deliberately small: `[section]` headers, `key = value`
//! pairs, `#` comments, blank lines. Lists are comma separated; the LLN
//! schedule pairs sizes with density scales as `n:ell` items, e.g.
//! `schedule = 8:50,16:200,32:800`. Flag overrides use the dotted form
//! `section.key=value` and are applied before validation.
//!
//! A parsed config resolves every default and can echo itself canonically —
//! sections and keys sorted, floats in shortest round-trip form. The FNV-1a
//! hash of that echo is the config hash stamped on every result row, so a
//! row can always be traced to the exact configuration that produced it.
//!
//! Sections and keys:
//!
//! ```text
//! [experiment]  kind (diffusion_convergence | rd_convergence | lln | single_run)
//!               t, dt (omit for auto), p (1 | 2 | inf), epsilon, replicas,
//!               seed, cap, n (single_run size), ell (single-run density
//!               scale), restarts, out
//! [kernel]      family (constant | separable_product | min_kernel |
//!               smooth_cosine) with c / scale, or file = path to an
//!               adjacency matrix; sample = true draws a random graph
//!               instead of the quotient
//! [reaction]    phi = zero | linear(r) | logistic(r) | allen_cahn |
//!               birth_death(b;d), or separate birth = / death = families
//! [initial]     profile = constant(c) | step(lo,hi,split) | sine(c)
//! [sweep]       ns = 4,8,16 and/or schedule = 8:50,16:200,32:800
//! ```
//!
//! The default output directory comes from `GRAPHON_RD_OUT` when set.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::str::FromStr;

use crate::dynamics::{ReactionTerm, ScalarFamily};
use crate::gridfn::{GridFunction, Lp};
use crate::harness::io::{fmt_float, fnv1a64};
use crate::harness::HarnessError;
use crate::kernel::{AnalyticFamily, AnalyticGraphon, SeparableProfile, StepGraphon};

/// Environment variable naming the default output directory.
pub const OUT_ENV: &str = "GRAPHON_RD_OUT";
/// Reference partition is this multiple of the largest sweep size.
pub const REFERENCE_FACTOR: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    DiffusionConvergence,
    RdConvergence,
    Lln,
    SingleRun,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::DiffusionConvergence => "diffusion_convergence",
            ExperimentKind::RdConvergence => "rd_convergence",
            ExperimentKind::Lln => "lln",
            ExperimentKind::SingleRun => "single_run",
        }
    }
}

impl FromStr for ExperimentKind {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "diffusion_convergence" => Ok(ExperimentKind::DiffusionConvergence),
            "rd_convergence" => Ok(ExperimentKind::RdConvergence),
            "lln" => Ok(ExperimentKind::Lln),
            "single_run" => Ok(ExperimentKind::SingleRun),
            other => Err(HarnessError::Config(format!("unknown experiment kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum KernelSpec {
    Analytic(AnalyticFamily),
    File(PathBuf),
}

impl KernelSpec {
    pub fn describe(&self) -> String {
        match self {
            KernelSpec::Analytic(f) => f.describe(),
            KernelSpec::File(p) => format!("file:{}", p.display()),
        }
    }

    /// Load the step kernel for file specs; analytic specs have no fixed n.
    pub fn load_step(&self) -> Result<Option<StepGraphon>, HarnessError> {
        match self {
            KernelSpec::Analytic(_) => Ok(None),
            KernelSpec::File(path) => {
                let text = std::fs::read_to_string(path)?;
                Ok(Some(StepGraphon::parse_adjacency(&text)?))
            }
        }
    }

    pub fn analytic(&self) -> Result<AnalyticGraphon, HarnessError> {
        match self {
            KernelSpec::Analytic(f) => Ok(AnalyticGraphon::new(*f)?),
            KernelSpec::File(_) => Err(HarnessError::Config(
                "this experiment needs an analytic kernel family, not a file".into(),
            )),
        }
    }
}

/// Named initial-datum profiles, sampled at cell midpoints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialProfile {
    Constant(f64),
    Step { lo: f64, hi: f64, split: f64 },
    Sine(f64),
}

impl InitialProfile {
    pub fn eval(self, x: f64) -> f64 {
        match self {
            InitialProfile::Constant(c) => c,
            InitialProfile::Step { lo, hi, split } => {
                if x < split {
                    lo
                } else {
                    hi
                }
            }
            InitialProfile::Sine(c) => c * (2.0 * std::f64::consts::PI * x).sin(),
        }
    }

    pub fn sample(self, n: usize) -> GridFunction {
        GridFunction::new((0..n).map(|k| self.eval((k as f64 + 0.5) / n as f64)).collect())
            .expect("profiles are finite")
    }

    fn validate(self) -> Result<(), HarnessError> {
        let ok = match self {
            InitialProfile::Constant(c) => c.is_finite(),
            InitialProfile::Step { lo, hi, split } => {
                lo.is_finite() && hi.is_finite() && split.is_finite()
            }
            InitialProfile::Sine(c) => c.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(HarnessError::Config(format!("non-finite initial profile {self}")))
        }
    }
}

impl std::fmt::Display for InitialProfile {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            InitialProfile::Constant(c) => write!(f, "constant({})", fmt_float(*c)),
            InitialProfile::Step { lo, hi, split } => {
                write!(f, "step({},{},{})", fmt_float(*lo), fmt_float(*hi), fmt_float(*split))
            }
            InitialProfile::Sine(c) => write!(f, "sine({})", fmt_float(*c)),
        }
    }
}

impl FromStr for InitialProfile {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim().to_ascii_lowercase();
        let bad = || HarnessError::Config(format!("bad initial profile {s:?}"));
        let args = |name: &str| -> Option<Vec<f64>> {
            let rest = t.strip_prefix(name)?.strip_prefix('(')?.strip_suffix(')')?;
            rest.split(',').map(|a| a.trim().parse::<f64>().ok()).collect()
        };
        let profile = if let Some(a) = args("constant") {
            match a.as_slice() {
                [c] => InitialProfile::Constant(*c),
                _ => return Err(bad()),
            }
        } else if let Some(a) = args("step") {
            match a.as_slice() {
                [lo, hi, split] => InitialProfile::Step { lo: *lo, hi: *hi, split: *split },
                _ => return Err(bad()),
            }
        } else if let Some(a) = args("sine") {
            match a.as_slice() {
                [c] => InitialProfile::Sine(*c),
                _ => return Err(bad()),
            }
        } else {
            return Err(bad());
        };
        profile.validate()?;
        Ok(profile)
    }
}

/// Fully resolved experiment description; every field has its final value.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub kernel: KernelSpec,
    /// Draw `sample_w_random` graphs instead of quotient kernels.
    pub sample: bool,
    pub reaction: ReactionTerm,
    pub initial: InitialProfile,
    pub ns: Vec<usize>,
    /// (n, ell) rungs for the LLN study.
    pub schedule: Vec<(usize, f64)>,
    pub t_end: f64,
    pub dt: Option<f64>,
    pub p: Lp,
    pub epsilon: f64,
    pub replicas: usize,
    pub seed: u64,
    pub cap: u64,
    /// Partition size for single runs.
    pub n: usize,
    /// Density scale for single particle runs.
    pub ell: f64,
    /// Restart count for the heuristic cut-norm fallback.
    pub restarts: usize,
    pub out: PathBuf,
}

type RawSections = BTreeMap<String, BTreeMap<String, String>>;

fn parse_ini(text: &str) -> Result<RawSections, HarnessError> {
    let mut sections: RawSections = BTreeMap::new();
    let mut current: Option<String> = None;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|r| r.strip_suffix(']')) {
            let name = name.trim().to_ascii_lowercase();
            if name.is_empty() {
                return Err(HarnessError::Config(format!("empty section name on line {}", lineno + 1)));
            }
            sections.entry(name.clone()).or_default();
            current = Some(name);
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(HarnessError::Config(format!(
                "line {} is neither `[section]` nor `key = value`: {line:?}",
                lineno + 1
            )));
        };
        let Some(section) = current.clone() else {
            return Err(HarnessError::Config(format!(
                "key {:?} on line {} appears before any [section]",
                key.trim(),
                lineno + 1
            )));
        };
        let key = key.trim().to_ascii_lowercase();
        if key.is_empty() {
            return Err(HarnessError::Config(format!("empty key on line {}", lineno + 1)));
        }
        sections.get_mut(&section).unwrap().insert(key, value.trim().to_string());
    }
    Ok(sections)
}

/// Apply one `section.key=value` override in place.
pub fn apply_override(sections: &mut RawSections, spec: &str) -> Result<(), HarnessError> {
    let bad = || {
        HarnessError::Config(format!("override {spec:?} is not of the form section.key=value"))
    };
    let (path, value) = spec.split_once('=').ok_or_else(bad)?;
    let (section, key) = path.split_once('.').ok_or_else(bad)?;
    let (section, key) = (section.trim().to_ascii_lowercase(), key.trim().to_ascii_lowercase());
    if section.is_empty() || key.is_empty() {
        return Err(bad());
    }
    sections.entry(section).or_default().insert(key, value.trim().to_string());
    Ok(())
}

struct Resolver {
    sections: RawSections,
}

impl Resolver {
    fn get(&self, section: &str, key: &str) -> Option<&str> {
        self.sections.get(section).and_then(|s| s.get(key)).map(String::as_str)
    }

    fn parse<T: FromStr>(&self, section: &str, key: &str, what: &str) -> Result<Option<T>, HarnessError> {
        match self.get(section, key) {
            None => Ok(None),
            Some(v) => v.parse::<T>().map(Some).map_err(|_| {
                HarnessError::Config(format!("{section}.{key}: expected {what}, got {v:?}"))
            }),
        }
    }

    fn unknown_keys(&self) -> Option<String> {
        const KNOWN: &[(&str, &[&str])] = &[
            ("experiment", &[
                "kind", "t", "dt", "p", "epsilon", "replicas", "seed", "cap", "n", "ell",
                "restarts", "out",
            ]),
            ("kernel", &["family", "c", "scale", "file", "sample"]),
            ("reaction", &["phi", "birth", "death"]),
            ("initial", &["profile"]),
            ("sweep", &["ns", "schedule"]),
        ];
        for (section, keys) in &self.sections {
            let Some((_, known)) = KNOWN.iter().find(|(s, _)| s == section) else {
                return Some(format!("unknown section [{section}]"));
            };
            for key in keys.keys() {
                if !known.contains(&key.as_str()) {
                    return Some(format!("unknown key {section}.{key}"));
                }
            }
        }
        None
    }
}

fn parse_ns(text: &str) -> Result<Vec<usize>, HarnessError> {
    text.split(',')
        .map(|item| {
            item.trim()
                .parse::<usize>()
                .map_err(|_| HarnessError::Config(format!("bad sweep size {item:?} in ns list")))
        })
        .collect()
}

fn parse_schedule(text: &str) -> Result<Vec<(usize, f64)>, HarnessError> {
    text.split(',')
        .map(|item| {
            let bad = || HarnessError::Config(format!("bad schedule item {item:?}, want n:ell"));
            let (n, ell) = item.trim().split_once(':').ok_or_else(bad)?;
            let n = n.trim().parse::<usize>().map_err(|_| bad())?;
            let ell = ell.trim().parse::<f64>().map_err(|_| bad())?;
            if n == 0 || !(ell > 0.0) || !ell.is_finite() {
                return Err(bad());
            }
            Ok((n, ell))
        })
        .collect()
}

impl ExperimentConfig {
    pub fn from_file(path: &std::path::Path, overrides: &[String]) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            HarnessError::Config(format!("cannot read config {}: {e}", path.display()))
        })?;
        Self::from_text(&text, overrides)
    }

    pub fn from_text(text: &str, overrides: &[String]) -> Result<Self, HarnessError> {
        let mut sections = parse_ini(text)?;
        for spec in overrides {
            apply_override(&mut sections, spec)?;
        }
        let r = Resolver { sections };
        if let Some(complaint) = r.unknown_keys() {
            return Err(HarnessError::Config(complaint));
        }

        let kind: ExperimentKind = r
            .parse::<ExperimentKind>("experiment", "kind", "an experiment kind")?
            .ok_or_else(|| HarnessError::Config("experiment.kind is required".into()))?;

        let kernel = match (r.get("kernel", "file"), r.get("kernel", "family")) {
            (Some(_), Some(_)) => {
                return Err(HarnessError::Config(
                    "kernel.file and kernel.family are mutually exclusive".into(),
                ))
            }
            (Some(path), None) => KernelSpec::File(PathBuf::from(path)),
            (None, family) => {
                let family = family.unwrap_or("constant").to_ascii_lowercase();
                let c = r.parse::<f64>("kernel", "c", "a number")?;
                let scale = r.parse::<f64>("kernel", "scale", "a number")?;
                let family = match family.replace('-', "_").as_str() {
                    "constant" => AnalyticFamily::Constant { c: c.unwrap_or(0.5) },
                    "separable_product" | "separable" => AnalyticFamily::SeparableProduct {
                        scale: scale.unwrap_or(1.0),
                        profile: SeparableProfile::Identity,
                    },
                    "min_kernel" | "min" => AnalyticFamily::MinKernel { c: c.unwrap_or(1.0) },
                    "smooth_cosine" => AnalyticFamily::SmoothCosine { c: c.unwrap_or(0.5) },
                    other => {
                        return Err(HarnessError::Config(format!(
                            "unknown kernel family {other:?}"
                        )))
                    }
                };
                // registry check: constructing validates parameter ranges
                AnalyticGraphon::new(family)?;
                KernelSpec::Analytic(family)
            }
        };
        let sample = r.parse::<bool>("kernel", "sample", "true or false")?.unwrap_or(false);

        let reaction = {
            let phi = r.get("reaction", "phi");
            let birth = r.get("reaction", "birth");
            let death = r.get("reaction", "death");
            if phi.is_some() && (birth.is_some() || death.is_some()) {
                return Err(HarnessError::Config(
                    "give either reaction.phi or reaction.birth/death, not both".into(),
                ));
            }
            if birth.is_some() != death.is_some() {
                return Err(HarnessError::Config(
                    "reaction.birth and reaction.death must be given together".into(),
                ));
            }
            match (phi, birth, death) {
                (Some(spec), _, _) => spec
                    .parse::<ReactionTerm>()
                    .map_err(|e| HarnessError::Config(format!("reaction.phi: {e}")))?,
                (None, Some(b), Some(d)) => ReactionTerm::BirthDeath {
                    birth: b
                        .parse::<ScalarFamily>()
                        .map_err(|e| HarnessError::Config(format!("reaction.birth: {e}")))?,
                    death: d
                        .parse::<ScalarFamily>()
                        .map_err(|e| HarnessError::Config(format!("reaction.death: {e}")))?,
                },
                _ => ReactionTerm::Zero,
            }
        };

        let initial = match r.get("initial", "profile") {
            Some(spec) => spec.parse::<InitialProfile>()?,
            None => InitialProfile::Constant(0.5),
        };

        let ns = match r.get("sweep", "ns") {
            Some(text) => parse_ns(text)?,
            None => Vec::new(),
        };
        let schedule = match r.get("sweep", "schedule") {
            Some(text) => parse_schedule(text)?,
            None => Vec::new(),
        };

        let t_end = r.parse::<f64>("experiment", "t", "a number")?.unwrap_or(1.0);
        let dt = r.parse::<f64>("experiment", "dt", "a number")?;
        let p = r.parse::<Lp>("experiment", "p", "1, 2, or inf")?.unwrap_or(Lp::TWO);
        let epsilon = r.parse::<f64>("experiment", "epsilon", "a number")?.unwrap_or(0.15);
        let replicas = r.parse::<usize>("experiment", "replicas", "an integer")?.unwrap_or(200);
        let seed = r.parse::<u64>("experiment", "seed", "an integer")?.unwrap_or(0);
        let cap = r.parse::<u64>("experiment", "cap", "an integer")?.unwrap_or(1_000_000_000);
        let n = r.parse::<usize>("experiment", "n", "an integer")?.unwrap_or(16);
        let ell = r.parse::<f64>("experiment", "ell", "a number")?.unwrap_or(100.0);
        let restarts = r.parse::<usize>("experiment", "restarts", "an integer")?.unwrap_or(40);
        let out = match r.get("experiment", "out") {
            Some(dir) => PathBuf::from(dir),
            None => match std::env::var(OUT_ENV) {
                Ok(dir) if !dir.is_empty() => PathBuf::from(dir),
                _ => PathBuf::from("."),
            },
        };

        let cfg = ExperimentConfig {
            kind,
            kernel,
            sample,
            reaction,
            initial,
            ns,
            schedule,
            t_end,
            dt,
            p,
            epsilon,
            replicas,
            seed,
            cap,
            n,
            ell,
            restarts,
            out,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), HarnessError> {
        let err = |m: String| Err(HarnessError::Config(m));
        if !self.t_end.is_finite() || self.t_end < 0.0 {
            return err(format!("experiment.t must be a finite nonnegative time, got {}", self.t_end));
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0) || !dt.is_finite() {
                return err(format!("experiment.dt must be positive, got {dt}"));
            }
        }
        if self.replicas == 0 {
            return err("experiment.replicas must be at least 1".into());
        }
        match self.kind {
            ExperimentKind::DiffusionConvergence | ExperimentKind::RdConvergence => {
                if self.ns.is_empty() {
                    return err("convergence experiments need sweep.ns".into());
                }
                if !self.ns.windows(2).all(|w| w[0] < w[1]) || self.ns[0] == 0 {
                    return err(format!("sweep.ns must be positive and increasing, got {:?}", self.ns));
                }
                let reference = REFERENCE_FACTOR * self.ns.last().unwrap();
                for &n in &self.ns {
                    if reference % n != 0 {
                        return err(format!(
                            "sweep size {n} does not divide the reference partition {reference}"
                        ));
                    }
                }
                self.kernel.analytic()?;
                if self.kind == ExperimentKind::DiffusionConvergence
                    && !self.reaction.is_zero()
                {
                    return err(format!(
                        "diffusion_convergence runs the zero reaction, got {}",
                        self.reaction
                    ));
                }
            }
            ExperimentKind::Lln => {
                if self.schedule.is_empty() {
                    return err("lln needs sweep.schedule = n:ell,...".into());
                }
                if !self.schedule.windows(2).all(|w| w[0].0 < w[1].0) {
                    return err("schedule n values must be increasing".into());
                }
                if !self.schedule.windows(2).all(|w| w[0].1 <= w[1].1) {
                    return err("schedule ell values must be nondecreasing".into());
                }
                if !(self.epsilon > 0.0) {
                    return err(format!("lln needs epsilon > 0, got {}", self.epsilon));
                }
                if !(self.t_end > 0.0) {
                    return err(format!("lln needs t > 0, got {}", self.t_end));
                }
                if !matches!(self.reaction, ReactionTerm::BirthDeath { .. } | ReactionTerm::Zero) {
                    return err(format!(
                        "lln needs a birth/death (or zero) reaction, got {}",
                        self.reaction
                    ));
                }
                self.kernel.analytic()?;
            }
            ExperimentKind::SingleRun => {
                if self.n == 0 {
                    return err("experiment.n must be at least 1".into());
                }
                if !(self.ell > 0.0) || !self.ell.is_finite() {
                    return err(format!("experiment.ell must be positive, got {}", self.ell));
                }
            }
        }
        Ok(())
    }

    /// The birth/death pair for particle simulations.
    pub fn families(&self) -> Result<(ScalarFamily, ScalarFamily), HarnessError> {
        match self.reaction {
            ReactionTerm::BirthDeath { birth, death } => Ok((birth, death)),
            ReactionTerm::Zero => {
                Ok((ScalarFamily::Linear { rate: 0.0 }, ScalarFamily::Linear { rate: 0.0 }))
            }
            other => Err(HarnessError::Config(format!(
                "particle runs need a birth/death reaction, got {other}"
            ))),
        }
    }

    /// Canonical text form: every resolved value, sections and keys sorted.
    /// Reruns of the same effective configuration produce identical bytes.
    /// The output directory is deliberately excluded — it says where results
    /// land, not which experiment ran, and the hash stamped on every output
    /// row must agree across copies of the same run.
    pub fn echo(&self) -> String {
        let mut out = String::new();
        out.push_str("[experiment]\n");
        out.push_str(&format!("cap = {}\n", self.cap));
        out.push_str(&format!(
            "dt = {}\n",
            self.dt.map(fmt_float).unwrap_or_else(|| "auto".into())
        ));
        out.push_str(&format!("ell = {}\n", fmt_float(self.ell)));
        out.push_str(&format!("epsilon = {}\n", fmt_float(self.epsilon)));
        out.push_str(&format!("kind = {}\n", self.kind.name()));
        out.push_str(&format!("n = {}\n", self.n));
        out.push_str(&format!("p = {}\n", self.p));
        out.push_str(&format!("replicas = {}\n", self.replicas));
        out.push_str(&format!("restarts = {}\n", self.restarts));
        out.push_str(&format!("seed = {}\n", self.seed));
        out.push_str(&format!("t = {}\n", fmt_float(self.t_end)));
        out.push_str("[initial]\n");
        out.push_str(&format!("profile = {}\n", self.initial));
        out.push_str("[kernel]\n");
        out.push_str(&format!("sample = {}\n", self.sample));
        out.push_str(&format!("spec = {}\n", self.kernel.describe()));
        out.push_str("[reaction]\n");
        out.push_str(&format!("phi = {}\n", self.reaction));
        out.push_str("[sweep]\n");
        out.push_str(&format!(
            "ns = {}\n",
            self.ns.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(",")
        ));
        out.push_str(&format!(
            "schedule = {}\n",
            self.schedule
                .iter()
                .map(|(n, ell)| format!("{n}:{}", fmt_float(*ell)))
                .collect::<Vec<_>>()
                .join(",")
        ));
        out
    }

    /// FNV-1a hash of the canonical echo, as fixed-width hex.
    pub fn hash(&self) -> String {
        format!("{:016x}", fnv1a64(self.echo().as_bytes()))
    }

    /// Step size resolution shared by every solver call site.
    pub fn resolve_dt(&self) -> f64 {
        self.dt.unwrap_or_else(|| {
            if self.t_end == 0.0 {
                0.01
            } else {
                (self.t_end / 1000.0).min(0.01).max(f64::MIN_POSITIVE)
            }
        })
    }
}
