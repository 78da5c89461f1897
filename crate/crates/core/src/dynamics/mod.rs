//! Deterministic reaction–diffusion dynamics on a step kernel.
//!
//! The state is a [`GridFunction`] u on the n cells; the vector field is
//! du/dt = L u + phi(u), where L is the kernel diffusion operator
//! (Lu)_k = (1/n) sum_j A_kj (u_j - u_k) and phi acts componentwise.
//!
//! The module provides the operator itself ([`apply_l`], [`build_l_matrix`]),
//! the exact diffusion semigroup via the dense matrix exponential
//! ([`semigroup_apply`]), a fixed-step RK4 integrator for the full equation
//! ([`integrate_rd`]), and executable checks of the structural theorems:
//! contraction and mass conservation of the pure diffusion flow, the
//! invariant-interval (maximum) principle, and the mild-formulation residual
//! that ties the integrator back to the Duhamel integral equation. The
//! comparison theorems between graph and graphon solutions live in
//! [`bounds`].
//!
//! Fixed-step RK4 is deliberate: the operator's spectrum lies in [-2, 0] and
//! every registered reaction has a bounded derivative on its invariant
//! interval, so the problems are non-stiff and fixed steps keep runs
//! bit-reproducible. Step-size adequacy is established by an order test
//! rather than an embedded estimator.

pub mod bounds;
pub mod expm;

use ndarray::{Array1, Array2};
use thiserror::Error;

use crate::gridfn::{GridError, GridFunction, Lp};
use crate::kernel::{KernelError, StepGraphon};

/// Dense-exponential size cap: larger systems must integrate with RK4.
pub const SEMIGROUP_MATRIX_CAP: usize = 2048;
/// Allowed increase of ||u(t)||_p under pure diffusion.
pub const CONTRACTION_TOL: f64 = 1e-9;
/// Allowed drift of the state mean under pure diffusion.
pub const MASS_TOL: f64 = 1e-10;
/// Allowed excursion outside the declared invariant interval.
pub const MAX_PRINCIPLE_TOL: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error("dimension mismatch: kernel has n={expected}, grid function has n={got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("negative time {t}")]
    NegativeTime { t: f64 },
    #[error("step size must be positive and finite, got {dt}")]
    InvalidStep { dt: f64 },
    #[error("state became non-finite at t={t} (blow-up or instability)")]
    NonFiniteState { t: f64 },
    #[error("invalid output times: {0}")]
    InvalidOutputTimes(String),
    #[error("not enough samples: {0}")]
    InsufficientSamples(String),
    #[error("check requires the zero reaction, got {0}")]
    ReactionNotZero(String),
    #[error("contraction violated: p={p} norm increased by {increase:e}")]
    ContractionViolated { p: String, increase: f64 },
    #[error("mass drift {drift:e} exceeds {tol:e}")]
    MassDrift { drift: f64, tol: f64 },
    #[error("max principle violated: excursion {excursion:e} beyond [{m1}, {m2}]")]
    MaxPrincipleViolated { excursion: f64, m1: f64, m2: f64 },
    #[error("invalid reaction term: {0}")]
    InvalidReaction(String),
    #[error("linear solve hit a singular or non-finite pivot")]
    SingularMatrix,
    #[error("matrix size n={n} exceeds the dense-exponential cap {cap}")]
    MatrixTooLarge { n: usize, cap: usize },
    #[error("cut norm unavailable: {0}")]
    CutNormUnavailable(String),
    #[error("unsupported norm for this bound: {0}")]
    UnsupportedNorm(String),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// One-variable rate family for birth–death reactions; every member
/// vanishes at 0 and is nonnegative on [0, inf) once validated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScalarFamily {
    /// rate * x
    Linear { rate: f64 },
    /// rate * x^2
    Quadratic { rate: f64 },
}

impl ScalarFamily {
    pub fn eval(self, x: f64) -> f64 {
        match self {
            ScalarFamily::Linear { rate } => rate * x,
            ScalarFamily::Quadratic { rate } => rate * x * x,
        }
    }

    pub fn rate(self) -> f64 {
        match self {
            ScalarFamily::Linear { rate } | ScalarFamily::Quadratic { rate } => rate,
        }
    }

    /// Sharp Lipschitz constant on [a, b] (sup of |derivative|).
    pub fn lipschitz_on(self, a: f64, b: f64) -> f64 {
        let (a, b) = (a.min(b), a.max(b));
        match self {
            ScalarFamily::Linear { rate } => rate.abs(),
            ScalarFamily::Quadratic { rate } => 2.0 * rate.abs() * a.abs().max(b.abs()),
        }
    }

    fn validate(self) -> Result<(), DynamicsError> {
        let r = self.rate();
        if !r.is_finite() || r < 0.0 {
            return Err(DynamicsError::InvalidReaction(format!(
                "rate family {self} needs a finite nonnegative rate"
            )));
        }
        Ok(())
    }
}

impl std::fmt::Display for ScalarFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let (rate, power) = match self {
            ScalarFamily::Linear { rate } => (*rate, "x"),
            ScalarFamily::Quadratic { rate } => (*rate, "x^2"),
        };
        if rate == 1.0 {
            f.write_str(power)
        } else {
            write!(f, "{rate}{power}")
        }
    }
}

impl std::str::FromStr for ScalarFamily {
    type Err = DynamicsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t: String = s.chars().filter(|c| !c.is_whitespace() && *c != '*').collect();
        let t = t.to_ascii_lowercase();
        let (coeff, rest) = match t.find('x') {
            Some(0) => (1.0, &t[1..]),
            Some(pos) => {
                let c: f64 = t[..pos].parse().map_err(|_| {
                    DynamicsError::InvalidReaction(format!("bad coefficient in {s:?}"))
                })?;
                (c, &t[pos + 1..])
            }
            None => return Err(DynamicsError::InvalidReaction(format!("no x in rate family {s:?}"))),
        };
        match rest {
            "" => Ok(ScalarFamily::Linear { rate: coeff }),
            "^2" | "2" => Ok(ScalarFamily::Quadratic { rate: coeff }),
            other => Err(DynamicsError::InvalidReaction(format!(
                "unsupported power {other:?} in rate family {s:?}"
            ))),
        }
    }
}

/// Componentwise reaction phi. Every family fixes 0, so the zero state is an
/// equilibrium of the full dynamics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ReactionTerm {
    Zero,
    /// phi(x) = r x
    Linear { r: f64 },
    /// phi(x) = r x (1 - x)
    Logistic { r: f64 },
    /// phi(x) = x - x^3
    AllenCahn,
    /// phi(x) = birth(x) - death(x)
    BirthDeath { birth: ScalarFamily, death: ScalarFamily },
}

impl ReactionTerm {
    pub fn apply(&self, x: f64) -> f64 {
        match self {
            ReactionTerm::Zero => 0.0,
            ReactionTerm::Linear { r } => r * x,
            ReactionTerm::Logistic { r } => r * x * (1.0 - x),
            ReactionTerm::AllenCahn => x - x * x * x,
            ReactionTerm::BirthDeath { birth, death } => birth.eval(x) - death.eval(x),
        }
    }

    pub fn apply_grid(&self, u: &GridFunction) -> Result<GridFunction, DynamicsError> {
        Ok(u.map(|x| self.apply(x))?)
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, ReactionTerm::Zero)
    }

    /// A valid Lipschitz constant on [a, b] (sup of |phi'| there, except
    /// birth–death which reports the sum of its parts' constants).
    pub fn lipschitz_on(&self, a: f64, b: f64) -> f64 {
        let (a, b) = (a.min(b), a.max(b));
        match self {
            ReactionTerm::Zero => 0.0,
            ReactionTerm::Linear { r } => r.abs(),
            // phi' = r (1 - 2x), monotone in x
            ReactionTerm::Logistic { r } => {
                r.abs() * (1.0 - 2.0 * a).abs().max((1.0 - 2.0 * b).abs())
            }
            // phi' = 1 - 3x^2, extremal at the endpoints or at x = 0
            ReactionTerm::AllenCahn => {
                let interior = if a <= 0.0 && 0.0 <= b { 1.0 } else { 0.0 };
                (1.0 - 3.0 * a * a).abs().max((1.0 - 3.0 * b * b).abs()).max(interior)
            }
            ReactionTerm::BirthDeath { birth, death } => {
                birth.lipschitz_on(a, b) + death.lipschitz_on(a, b)
            }
        }
    }

    /// The interval [M1, M2] the family declares invariant, when it has one:
    /// phi(M1) >= 0 >= phi(M2), so solutions started inside stay inside.
    pub fn invariant_interval(&self) -> Option<(f64, f64)> {
        match self {
            ReactionTerm::Zero | ReactionTerm::Linear { .. } => None,
            ReactionTerm::Logistic { .. } => Some((0.0, 1.0)),
            ReactionTerm::AllenCahn => Some((-1.0, 1.0)),
            // linear vs quadratic parts balance at the rate ratio
            ReactionTerm::BirthDeath {
                birth: ScalarFamily::Linear { rate: rb },
                death: ScalarFamily::Quadratic { rate: rd },
            } if *rd > 0.0 => Some((0.0, rb / rd)),
            ReactionTerm::BirthDeath {
                birth: ScalarFamily::Quadratic { rate: rb },
                death: ScalarFamily::Linear { rate: rd },
            } if *rb > 0.0 => Some((0.0, rd / rb)),
            ReactionTerm::BirthDeath { .. } => None,
        }
    }

    pub fn validate(&self) -> Result<(), DynamicsError> {
        match self {
            ReactionTerm::Zero | ReactionTerm::AllenCahn => Ok(()),
            ReactionTerm::Linear { r } | ReactionTerm::Logistic { r } => {
                if r.is_finite() {
                    Ok(())
                } else {
                    Err(DynamicsError::InvalidReaction(format!("non-finite rate {r}")))
                }
            }
            ReactionTerm::BirthDeath { birth, death } => {
                birth.validate()?;
                death.validate()
            }
        }
    }
}

impl std::fmt::Display for ReactionTerm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ReactionTerm::Zero => f.write_str("zero"),
            ReactionTerm::Linear { r } => write!(f, "linear({r})"),
            ReactionTerm::Logistic { r } => write!(f, "logistic({r})"),
            ReactionTerm::AllenCahn => f.write_str("allen_cahn"),
            ReactionTerm::BirthDeath { birth, death } => write!(f, "birth_death({birth};{death})"),
        }
    }
}

impl std::str::FromStr for ReactionTerm {
    type Err = DynamicsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        let t = t.to_ascii_lowercase();
        let inner = |name: &str| -> Option<&str> {
            t.strip_prefix(name)?.strip_prefix('(')?.strip_suffix(')')
        };
        let term = match t.as_str() {
            "zero" => ReactionTerm::Zero,
            "allen_cahn" | "allencahn" | "allen-cahn" => ReactionTerm::AllenCahn,
            _ => {
                if let Some(arg) = inner("linear") {
                    let r = arg.parse().map_err(|_| bad_reaction(s))?;
                    ReactionTerm::Linear { r }
                } else if let Some(arg) = inner("logistic") {
                    let r = arg.parse().map_err(|_| bad_reaction(s))?;
                    ReactionTerm::Logistic { r }
                } else if let Some(arg) = inner("birth_death").or_else(|| inner("birthdeath")) {
                    let (b, d) = arg
                        .split_once(';')
                        .or_else(|| arg.split_once(','))
                        .ok_or_else(|| bad_reaction(s))?;
                    ReactionTerm::BirthDeath { birth: b.parse()?, death: d.parse()? }
                } else {
                    return Err(bad_reaction(s));
                }
            }
        };
        term.validate()?;
        Ok(term)
    }
}

fn bad_reaction(s: &str) -> DynamicsError {
    DynamicsError::InvalidReaction(format!(
        "cannot parse {s:?}; expected zero | linear(r) | logistic(r) | allen_cahn | birth_death(b;d)"
    ))
}

/// (L u)_k = (1/n) sum_j A_kj (u_j - u_k). The output has zero mean
/// whenever A is symmetric: mass moved out of one cell lands in another.
pub fn apply_l(g: &StepGraphon, u: &GridFunction) -> Result<GridFunction, DynamicsError> {
    let n = g.n();
    if u.n() != n {
        return Err(DynamicsError::DimensionMismatch { expected: n, got: u.n() });
    }
    let v = u.values();
    let mut out = vec![0.0; n];
    for k in 0..n {
        let mut acc = 0.0;
        for j in 0..n {
            acc += g.entry(k, j) * (v[j] - v[k]);
        }
        out[k] = acc / n as f64;
    }
    Ok(GridFunction::new(out)?)
}

/// Matrix form M = (1/n) A - diag(d), so that M u = apply_l(g, u). Row sums
/// vanish and M is symmetric; its eigenvalues lie in [-2, 0].
pub fn build_l_matrix(g: &StepGraphon) -> Array2<f64> {
    let n = g.n();
    let nf = n as f64;
    let degrees = g.degree_vector();
    let mut m = g.values() / nf;
    for k in 0..n {
        m[[k, k]] -= degrees[k];
    }
    m
}

/// u(t) = exp(t M) u0, the exact flow of the pure diffusion equation.
pub fn semigroup_apply(g: &StepGraphon, t: f64, u0: &GridFunction) -> Result<GridFunction, DynamicsError> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(DynamicsError::NegativeTime { t });
    }
    let n = g.n();
    if u0.n() != n {
        return Err(DynamicsError::DimensionMismatch { expected: n, got: u0.n() });
    }
    if n > SEMIGROUP_MATRIX_CAP {
        return Err(DynamicsError::MatrixTooLarge { n, cap: SEMIGROUP_MATRIX_CAP });
    }
    if t == 0.0 {
        return Ok(u0.clone());
    }
    let m = build_l_matrix(g) * t;
    let e = expm::expm(&m)?;
    let v = e.dot(&Array1::from_vec(u0.values().to_vec()));
    Ok(GridFunction::new(v.to_vec())?)
}

/// A completed run: states at strictly increasing output times starting
/// from t = 0, together with everything needed to reproduce it.
#[derive(Debug, Clone)]
pub struct RdSolution {
    times: Vec<f64>,
    states: Vec<GridFunction>,
    graphon: StepGraphon,
    reaction: ReactionTerm,
    dt: f64,
}

impl RdSolution {
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[GridFunction] {
        &self.states
    }

    pub fn graphon(&self) -> &StepGraphon {
        &self.graphon
    }

    pub fn reaction(&self) -> ReactionTerm {
        self.reaction
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn n(&self) -> usize {
        self.graphon.n()
    }

    pub fn final_state(&self) -> &GridFunction {
        self.states.last().expect("solution holds at least the initial state")
    }

    /// CSV with one row per output time: t, cell_0, ..., cell_{n-1}.
    pub fn to_csv(&self) -> String {
        use crate::harness::io::fmt_float;
        let n = self.n();
        let mut out = String::from("t");
        for k in 0..n {
            out.push_str(&format!(",cell_{k}"));
        }
        out.push('\n');
        for (t, state) in self.times.iter().zip(&self.states) {
            out.push_str(&fmt_float(*t));
            for v in state.values() {
                out.push(',');
                out.push_str(&fmt_float(*v));
            }
            out.push('\n');
        }
        out
    }

    /// JSON document with the full run configuration echoed alongside the
    /// trajectory.
    pub fn to_json(&self) -> String {
        let doc = serde_json::json!({
            "dt": self.dt,
            "reaction": self.reaction.to_string(),
            "graphon": serde_json::from_str::<serde_json::Value>(
                &crate::kernel::GraphonHandle::Step(self.graphon.clone()).to_json()
            ).expect("kernel JSON is valid"),
            "times": self.times,
            "states": self.states.iter().map(|s| s.values().to_vec()).collect::<Vec<_>>(),
        });
        serde_json::to_string_pretty(&doc).expect("solution serializes")
    }
}

/// Equispaced output times covering [0, t_end] with `count` points.
pub fn uniform_times(t_end: f64, count: usize) -> Vec<f64> {
    assert!(count >= 2, "need at least the two endpoints");
    let h = t_end / (count - 1) as f64;
    let mut times: Vec<f64> = (0..count).map(|i| i as f64 * h).collect();
    times[count - 1] = t_end;
    times
}

fn rk4_step(m: &Array2<f64>, phi: &ReactionTerm, u: &Array1<f64>, h: f64) -> Array1<f64> {
    let f = |v: &Array1<f64>| m.dot(v) + v.mapv(|x| phi.apply(x));
    let k1 = f(u);
    let k2 = f(&(u + &(&k1 * (h / 2.0))));
    let k3 = f(&(u + &(&k2 * (h / 2.0))));
    let k4 = f(&(u + &(&k3 * h)));
    u + &((k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0))
}

/// Integrate du/dt = L u + phi(u) with classical fixed-step RK4. Steps of
/// size dt are taken between output times, with a shortened final step to
/// land on each output time exactly; requested times must be strictly
/// increasing within [0, t_end]. The result always contains t = 0 and
/// t = t_end. Any non-finite component aborts with the time of failure.
pub fn integrate_rd(
    g: &StepGraphon,
    phi: &ReactionTerm,
    u0: &GridFunction,
    t_end: f64,
    dt: f64,
    output_times: &[f64],
) -> Result<RdSolution, DynamicsError> {
    phi.validate()?;
    if !(t_end >= 0.0) || !t_end.is_finite() {
        return Err(DynamicsError::NegativeTime { t: t_end });
    }
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(DynamicsError::InvalidStep { dt });
    }
    let n = g.n();
    if u0.n() != n {
        return Err(DynamicsError::DimensionMismatch { expected: n, got: u0.n() });
    }
    let mut schedule: Vec<f64> = Vec::with_capacity(output_times.len() + 2);
    schedule.push(0.0);
    for &t in output_times {
        if !t.is_finite() || t < 0.0 || t > t_end * (1.0 + 1e-12) {
            return Err(DynamicsError::InvalidOutputTimes(format!(
                "time {t} outside [0, {t_end}]"
            )));
        }
        let t = t.min(t_end);
        let last = *schedule.last().expect("schedule starts with 0");
        if t == last {
            continue;
        }
        if t < last {
            return Err(DynamicsError::InvalidOutputTimes("times must be strictly increasing".into()));
        }
        schedule.push(t);
    }
    if *schedule.last().expect("nonempty") < t_end {
        schedule.push(t_end);
    }

    let m = build_l_matrix(g);
    let mut u = Array1::from_vec(u0.values().to_vec());
    let mut states = vec![u0.clone()];
    let mut t_now = 0.0;
    for &target in schedule.iter().skip(1) {
        while target - t_now > dt * (1.0 + 1e-9) {
            u = rk4_step(&m, phi, &u, dt);
            t_now += dt;
            if !u.iter().all(|v| v.is_finite()) {
                return Err(DynamicsError::NonFiniteState { t: t_now });
            }
        }
        let rem = target - t_now;
        if rem > 0.0 {
            u = rk4_step(&m, phi, &u, rem);
        }
        t_now = target;
        if !u.iter().all(|v| v.is_finite()) {
            return Err(DynamicsError::NonFiniteState { t: t_now });
        }
        states.push(GridFunction::new(u.to_vec())?);
    }
    Ok(RdSolution { times: schedule, states, graphon: g.clone(), reaction: *phi, dt })
}

/// Max over output times of the defect in the mild (Duhamel) formulation,
///   u(t) - e^{tM} u0 - integral_0^t e^{(t-s)M} phi(u(s)) ds,
/// measured in the p-norm, with the integral approximated by the trapezoid
/// rule on the stored states. Needs at least three uniformly spaced output
/// times. The defect shrinks at second order as the output spacing halves.
pub fn mild_residual(sol: &RdSolution, p: Lp) -> Result<f64, DynamicsError> {
    let times = sol.times();
    if times.len() < 3 {
        return Err(DynamicsError::InsufficientSamples(format!(
            "mild residual needs >= 3 output times, got {}",
            times.len()
        )));
    }
    let h = times[1] - times[0];
    for w in times.windows(2) {
        if ((w[1] - w[0]) - h).abs() > 1e-9 * h.max(1.0) {
            return Err(DynamicsError::InsufficientSamples(
                "mild residual needs uniformly spaced output times".into(),
            ));
        }
    }
    let n = sol.n();
    if n > SEMIGROUP_MATRIX_CAP {
        return Err(DynamicsError::MatrixTooLarge { n, cap: SEMIGROUP_MATRIX_CAP });
    }
    let phi = sol.reaction();
    let e = expm::expm(&(build_l_matrix(sol.graphon()) * h))?;
    let as_vec = |g: &GridFunction| Array1::from_vec(g.values().to_vec());
    let phi_of = |g: &GridFunction| as_vec(g).mapv(|x| phi.apply(x));

    // running pieces: r = E^m u0, f = E^m phi(u_0),
    // q = full-weight rectangle sum; trapezoid = q - (h/2)(f + phi(u_m))
    let mut r = as_vec(&sol.states()[0]);
    let mut f = phi_of(&sol.states()[0]);
    let mut q = &f * h;
    let mut worst = 0.0f64;
    for m in 1..times.len() {
        r = e.dot(&r);
        f = e.dot(&f);
        let phi_m = phi_of(&sol.states()[m]);
        q = e.dot(&q) + &(&phi_m * h);
        let trapezoid = &q - &((&f + &phi_m) * (h / 2.0));
        let defect = as_vec(&sol.states()[m]) - &r - &trapezoid;
        let norm = GridFunction::new(defect.to_vec())?.lp_norm(p);
        worst = worst.max(norm);
    }
    Ok(worst)
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct ContractionReport {
    pub p: String,
    pub max_increase: f64,
}

/// Pure diffusion is an Lp contraction: every norm of the state is
/// nonincreasing along the flow. Reports the worst observed increase
/// between consecutive outputs; an increase beyond [`CONTRACTION_TOL`]
/// signals an operator or integrator bug.
pub fn check_contraction(sol: &RdSolution, p: Lp) -> Result<ContractionReport, DynamicsError> {
    if !sol.reaction().is_zero() {
        return Err(DynamicsError::ReactionNotZero(sol.reaction().to_string()));
    }
    let mut max_increase = 0.0f64;
    let mut prev = sol.states()[0].lp_norm(p);
    for state in &sol.states()[1..] {
        let cur = state.lp_norm(p);
        max_increase = max_increase.max(cur - prev);
        prev = cur;
    }
    if max_increase > CONTRACTION_TOL {
        return Err(DynamicsError::ContractionViolated { p: p.to_string(), increase: max_increase });
    }
    Ok(ContractionReport { p: p.to_string(), max_increase })
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct MassReport {
    pub max_drift: f64,
}

/// Symmetry of the kernel makes the diffusion flow conserve the mean.
pub fn check_mass_conservation(sol: &RdSolution) -> Result<MassReport, DynamicsError> {
    if !sol.reaction().is_zero() {
        return Err(DynamicsError::ReactionNotZero(sol.reaction().to_string()));
    }
    let m0 = sol.states()[0].mean();
    let mut max_drift = 0.0f64;
    for state in sol.states() {
        max_drift = max_drift.max((state.mean() - m0).abs());
    }
    if max_drift > MASS_TOL {
        return Err(DynamicsError::MassDrift { drift: max_drift, tol: MASS_TOL });
    }
    Ok(MassReport { max_drift })
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct MaxPrincipleReport {
    pub m1: f64,
    pub m2: f64,
    pub max_excursion: f64,
}

/// Invariant-interval principle: if phi(m1) >= 0 >= phi(m2) and the initial
/// state lies in [m1, m2], the whole trajectory stays there (up to
/// [`MAX_PRINCIPLE_TOL`]). Returns the worst excursion outside the interval.
pub fn check_max_principle(sol: &RdSolution, m1: f64, m2: f64) -> Result<MaxPrincipleReport, DynamicsError> {
    if !(m1.is_finite() && m2.is_finite() && m1 <= m2) {
        return Err(DynamicsError::InvalidReaction(format!("invalid interval [{m1}, {m2}]")));
    }
    let phi = sol.reaction();
    if !(phi.apply(m1) >= -1e-12 && phi.apply(m2) <= 1e-12) {
        return Err(DynamicsError::InvalidReaction(format!(
            "reaction {phi} does not point inward on [{m1}, {m2}]: phi(m1)={}, phi(m2)={}",
            phi.apply(m1),
            phi.apply(m2)
        )));
    }
    if sol.states()[0].values().iter().any(|v| *v < m1 || *v > m2) {
        return Err(DynamicsError::InvalidReaction(format!(
            "initial state leaves [{m1}, {m2}]"
        )));
    }
    let mut max_excursion = 0.0f64;
    for state in sol.states() {
        for v in state.values() {
            max_excursion = max_excursion.max(m1 - v).max(v - m2);
        }
    }
    if max_excursion > MAX_PRINCIPLE_TOL {
        return Err(DynamicsError::MaxPrincipleViolated { excursion: max_excursion, m1, m2 });
    }
    Ok(MaxPrincipleReport { m1, m2, max_excursion })
}
