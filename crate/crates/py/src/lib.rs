//! Python bindings for the graphon reaction-diffusion toolkit.
//!
//! Thin wrappers: kernels and trajectories are opaque handles, vectors
//! cross the boundary as plain lists, and everything that has a string
//! form on the Rust side (reactions, rate families, norms) is passed as
//! that string. Reports cross as JSON text.

use graphon_rd::dynamics::bounds::{
    linfty_convergence_bound, rd_convergence_bound, BoundReport,
};
use graphon_rd::dynamics::{self, ReactionTerm, ScalarFamily};
use graphon_rd::gridfn::{GridFunction, Lp};
use graphon_rd::kernel::{
    self, cut_norm_bilinear_exact, cut_norm_exact, cut_norm_heuristic, AnalyticFamily,
    CutVariant, GraphonHandle, SignedStepKernel,
};
use graphon_rd::particles;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse<T: std::str::FromStr>(s: &str) -> PyResult<T>
where
    T::Err: std::fmt::Display,
{
    s.parse().map_err(err)
}

fn grid(values: Vec<f64>) -> PyResult<GridFunction> {
    GridFunction::new(values).map_err(err)
}

/// A kernel constant on the cells of a uniform partition: the adjacency
/// matrix of a (weighted) graph read as a function on the unit square.
#[pyclass(name = "StepGraphon")]
struct PyStepGraphon {
    inner: kernel::StepGraphon,
}

#[pymethods]
impl PyStepGraphon {
    #[new]
    fn new(rows: Vec<Vec<f64>>) -> PyResult<Self> {
        Ok(PyStepGraphon { inner: kernel::StepGraphon::from_rows(&rows).map_err(err)? })
    }

    /// Parse the whitespace-row text format (`#` comments allowed).
    #[staticmethod]
    fn parse_adjacency(text: &str) -> PyResult<Self> {
        Ok(PyStepGraphon { inner: kernel::StepGraphon::parse_adjacency(text).map_err(err)? })
    }

    fn n(&self) -> usize {
        self.inner.n()
    }

    fn entry(&self, i: usize, j: usize) -> f64 {
        self.inner.entry(i, j)
    }

    fn rows(&self) -> Vec<Vec<f64>> {
        let n = self.inner.n();
        (0..n).map(|i| (0..n).map(|j| self.inner.entry(i, j)).collect()).collect()
    }

    fn degree_vector(&self) -> Vec<f64> {
        self.inner.degree_vector()
    }

    /// Same kernel on the m-cell refinement (n must divide m).
    fn refine(&self, m: usize) -> PyResult<Self> {
        Ok(PyStepGraphon { inner: self.inner.refine(m).map_err(err)? })
    }

    fn degree(&self, x: f64) -> PyResult<f64> {
        kernel::degree(&GraphonHandle::from(self.inner.clone()), x).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!("StepGraphon(n={})", self.inner.n())
    }
}

/// A closed-form kernel family member, validated on construction.
#[pyclass(name = "AnalyticGraphon")]
struct PyAnalyticGraphon {
    inner: kernel::AnalyticGraphon,
}

impl PyAnalyticGraphon {
    fn build(family: AnalyticFamily) -> PyResult<Self> {
        Ok(PyAnalyticGraphon { inner: kernel::AnalyticGraphon::new(family).map_err(err)? })
    }
}

#[pymethods]
impl PyAnalyticGraphon {
    #[staticmethod]
    fn constant(c: f64) -> PyResult<Self> {
        Self::build(AnalyticFamily::Constant { c })
    }

    #[staticmethod]
    fn separable_product(scale: f64) -> PyResult<Self> {
        Self::build(AnalyticFamily::SeparableProduct {
            scale,
            profile: kernel::SeparableProfile::Identity,
        })
    }

    #[staticmethod]
    fn min_kernel(c: f64) -> PyResult<Self> {
        Self::build(AnalyticFamily::MinKernel { c })
    }

    #[staticmethod]
    fn smooth_cosine(c: f64) -> PyResult<Self> {
        Self::build(AnalyticFamily::SmoothCosine { c })
    }

    fn eval(&self, x: f64, y: f64) -> f64 {
        self.inner.eval(x, y)
    }

    fn describe(&self) -> String {
        self.inner.family().describe()
    }

    fn degree(&self, x: f64) -> PyResult<f64> {
        kernel::degree(&GraphonHandle::from(self.inner.clone()), x).map_err(err)
    }

    /// Cell averages on the uniform n-partition.
    fn quotient(&self, n: usize) -> PyResult<PyStepGraphon> {
        Ok(PyStepGraphon { inner: kernel::quotient_step(&self.inner, n).map_err(err)? })
    }

    /// W-random simple graph on n vertices (midpoint latent positions).
    fn sample(&self, n: usize, seed: u64) -> PyResult<PyStepGraphon> {
        let handle = GraphonHandle::from(self.inner.clone());
        Ok(PyStepGraphon { inner: kernel::sample_w_random(&handle, n, seed).map_err(err)? })
    }

    fn __repr__(&self) -> String {
        format!("AnalyticGraphon({})", self.describe())
    }
}

/// Reaction-diffusion trajectory on a fixed kernel: states at the
/// requested output times.
#[pyclass(name = "RdSolution")]
struct PyRdSolution {
    inner: dynamics::RdSolution,
}

#[pymethods]
impl PyRdSolution {
    fn times(&self) -> Vec<f64> {
        self.inner.times().to_vec()
    }

    fn states(&self) -> Vec<Vec<f64>> {
        self.inner.states().iter().map(|s| s.values().to_vec()).collect()
    }

    fn final_state(&self) -> Vec<f64> {
        self.inner.final_state().values().to_vec()
    }

    fn to_csv(&self) -> String {
        self.inner.to_csv()
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    /// Worst growth of the p-norm between consecutive output times.
    fn contraction_max_increase(&self, p: &str) -> PyResult<f64> {
        Ok(dynamics::check_contraction(&self.inner, parse::<Lp>(p)?).map_err(err)?.max_increase)
    }

    fn mass_drift(&self) -> PyResult<f64> {
        Ok(dynamics::check_mass_conservation(&self.inner).map_err(err)?.max_drift)
    }

    /// Worst excursion outside [m1, m2] over the whole trajectory.
    fn max_principle_excursion(&self, m1: f64, m2: f64) -> PyResult<f64> {
        Ok(dynamics::check_max_principle(&self.inner, m1, m2).map_err(err)?.max_excursion)
    }

    fn mild_residual(&self, p: &str) -> PyResult<f64> {
        dynamics::mild_residual(&self.inner, parse::<Lp>(p)?).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!("RdSolution(n={}, times={})", self.inner.n(), self.inner.times().len())
    }
}

/// One Gillespie run of the interacting particle system.
#[pyclass(name = "ParticleTrajectory")]
struct PyParticleTrajectory {
    inner: particles::ParticleTrajectory,
}

#[pymethods]
impl PyParticleTrajectory {
    fn n(&self) -> usize {
        self.inner.n()
    }

    fn ell(&self) -> f64 {
        self.inner.ell()
    }

    fn horizon(&self) -> f64 {
        self.inner.horizon()
    }

    fn capped(&self) -> bool {
        self.inner.capped()
    }

    fn event_count(&self) -> usize {
        self.inner.events().len()
    }

    fn counts_at(&self, t: f64) -> PyResult<Vec<u64>> {
        Ok(self.inner.state_at(t).map_err(err)?.counts().to_vec())
    }

    fn density_at(&self, t: f64) -> PyResult<Vec<f64>> {
        Ok(self.inner.density_at(t).map_err(err)?.into_values())
    }

    fn events_csv(&self) -> String {
        self.inner.events_csv()
    }

    fn meta_json(&self) -> String {
        self.inner.meta_json()
    }

    fn __repr__(&self) -> String {
        format!(
            "ParticleTrajectory(n={}, ell={}, events={}, horizon={})",
            self.inner.n(),
            self.inner.ell(),
            self.inner.events().len(),
            self.inner.horizon()
        )
    }
}

/// Degree-weighted averaging operator applied to a state vector.
#[pyfunction]
fn apply_l(g: &PyStepGraphon, u: Vec<f64>) -> PyResult<Vec<f64>> {
    Ok(dynamics::apply_l(&g.inner, &grid(u)?).map_err(err)?.into_values())
}

/// Heat semigroup at time t via the matrix exponential.
#[pyfunction]
fn semigroup_apply(g: &PyStepGraphon, t: f64, u0: Vec<f64>) -> PyResult<Vec<f64>> {
    Ok(dynamics::semigroup_apply(&g.inner, t, &grid(u0)?).map_err(err)?.into_values())
}

/// Fixed-step RK4 integration of u' = Lu + phi(u); `reaction` uses the
/// string forms `zero`, `linear(r)`, `logistic(r)`, `allen_cahn`,
/// `birth_death(b; d)`.
#[pyfunction]
fn integrate_rd(
    g: &PyStepGraphon,
    reaction: &str,
    u0: Vec<f64>,
    t_end: f64,
    dt: f64,
    times: Vec<f64>,
) -> PyResult<PyRdSolution> {
    let phi: ReactionTerm = parse(reaction)?;
    let sol = dynamics::integrate_rd(&g.inner, &phi, &grid(u0)?, t_end, dt, &times)
        .map_err(err)?;
    Ok(PyRdSolution { inner: sol })
}

#[pyfunction]
fn uniform_times(t_end: f64, count: usize) -> Vec<f64> {
    dynamics::uniform_times(t_end, count)
}

/// Cut norm of a signed matrix read at kernel (integral) scale.
/// mode: "exact" (subset enumeration), "bilinear" (sign-vector optimum),
/// or "heuristic" (restarted alternating ascent, a lower bound).
#[pyfunction]
#[pyo3(signature = (rows, mode = "exact", variant = "st", restarts = 40, seed = 3079))]
fn cut_norm(
    rows: Vec<Vec<f64>>,
    mode: &str,
    variant: &str,
    restarts: usize,
    seed: u64,
) -> PyResult<f64> {
    let d = SignedStepKernel::from_rows(&rows).map_err(err)?;
    match mode {
        "exact" => {
            let v: CutVariant = parse(variant)?;
            Ok(cut_norm_exact(&d, v).map_err(err)?.value)
        }
        "bilinear" => Ok(cut_norm_bilinear_exact(&d).map_err(err)?.value),
        "heuristic" => Ok(cut_norm_heuristic(&d, restarts, seed).value),
        other => Err(PyValueError::new_err(format!(
            "unknown mode {other:?}, want exact | bilinear | heuristic"
        ))),
    }
}

/// Exact cut norm of the difference of two equally-sized step kernels
/// (common-refinement aware), or the heuristic when too large.
#[pyfunction]
#[pyo3(signature = (a, b, mode = "exact", variant = "st", restarts = 40, seed = 3079))]
fn cut_distance(
    a: &PyStepGraphon,
    b: &PyStepGraphon,
    mode: &str,
    variant: &str,
    restarts: usize,
    seed: u64,
) -> PyResult<f64> {
    let d = a.inner.difference(&b.inner).map_err(err)?;
    match mode {
        "exact" => {
            let v: CutVariant = parse(variant)?;
            Ok(cut_norm_exact(&d, v).map_err(err)?.value)
        }
        "heuristic" => Ok(cut_norm_heuristic(&d, restarts, seed).value),
        other => Err(PyValueError::new_err(format!(
            "unknown mode {other:?}, want exact | heuristic"
        ))),
    }
}

/// Lp distance between two kernels (analytic arguments are projected onto
/// the step partition; see the library docs for the convention).
#[pyfunction]
fn kernel_lp_distance(w: &PyAnalyticGraphon, g: &PyStepGraphon, p: &str) -> PyResult<f64> {
    kernel::lp_kernel_distance(
        &GraphonHandle::from(w.inner.clone()),
        &GraphonHandle::from(g.inner.clone()),
        parse::<Lp>(p)?,
    )
    .map_err(err)
}

fn report_json(report: BoundReport) -> String {
    report.to_json()
}

/// Trajectory-comparison bound between the analytic kernel's fine quotient
/// and the given step kernel, as a JSON report. `p` = "1", "2", ... runs
/// the finite-p bound; "inf" the sup-norm one. `u0_fine` lives on a
/// partition the step kernel's size divides.
#[pyfunction]
fn convergence_bound_json(
    w: &PyAnalyticGraphon,
    wn: &PyStepGraphon,
    reaction: &str,
    u0_fine: Vec<f64>,
    t_end: f64,
    p: &str,
) -> PyResult<String> {
    let phi: ReactionTerm = parse(reaction)?;
    let u0 = grid(u0_fine)?;
    let lp: Lp = parse(p)?;
    let report = if lp.is_finite() {
        rd_convergence_bound(&w.inner, &wn.inner, &phi, &u0, t_end, lp).map_err(err)?
    } else {
        linfty_convergence_bound(&w.inner, &wn.inner, &phi, &u0, t_end).map_err(err)?
    };
    Ok(report_json(report))
}

/// Gillespie run of the particle system; `birth`/`death` are rate-family
/// strings like "x", "x^2", "0.5x".
#[pyfunction]
#[pyo3(signature = (g, birth, death, m0, ell, t_end, cap = 1_000_000_000, seed = 0, stream = 0))]
#[allow(clippy::too_many_arguments)]
fn simulate(
    g: &PyStepGraphon,
    birth: &str,
    death: &str,
    m0: Vec<u64>,
    ell: f64,
    t_end: f64,
    cap: u64,
    seed: u64,
    stream: u64,
) -> PyResult<PyParticleTrajectory> {
    let b: ScalarFamily = parse(birth)?;
    let d: ScalarFamily = parse(death)?;
    let traj = particles::simulate_stream(&g.inner, b, d, &m0, ell, t_end, cap, seed, stream)
        .map_err(err)?;
    Ok(PyParticleTrajectory { inner: traj })
}

/// Compensated increment Z(t) of the density against the generator
/// drift; mean-zero over replicas for a faithful simulation.
#[pyfunction]
fn martingale_residual(
    traj: &PyParticleTrajectory,
    g: &PyStepGraphon,
    reaction: &str,
    t: f64,
) -> PyResult<Vec<f64>> {
    let phi: ReactionTerm = parse(reaction)?;
    Ok(particles::diagnostics::martingale_residual_z(&traj.inner, &g.inner, &phi, t)
        .map_err(err)?
        .into_values())
}

/// (observed, compensated) quadratic variation of the count at node k.
#[pyfunction]
fn quadratic_variation(
    traj: &PyParticleTrajectory,
    g: &PyStepGraphon,
    k: usize,
) -> PyResult<(f64, f64)> {
    particles::diagnostics::quadratic_variation_check(&traj.inner, &g.inner, k).map_err(err)
}

#[pymodule]
fn graphon_rd_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyStepGraphon>()?;
    m.add_class::<PyAnalyticGraphon>()?;
    m.add_class::<PyRdSolution>()?;
    m.add_class::<PyParticleTrajectory>()?;
    m.add_function(wrap_pyfunction!(apply_l, m)?)?;
    m.add_function(wrap_pyfunction!(semigroup_apply, m)?)?;
    m.add_function(wrap_pyfunction!(integrate_rd, m)?)?;
    m.add_function(wrap_pyfunction!(uniform_times, m)?)?;
    m.add_function(wrap_pyfunction!(cut_norm, m)?)?;
    m.add_function(wrap_pyfunction!(cut_distance, m)?)?;
    m.add_function(wrap_pyfunction!(kernel_lp_distance, m)?)?;
    m.add_function(wrap_pyfunction!(convergence_bound_json, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(martingale_residual, m)?)?;
    m.add_function(wrap_pyfunction!(quadratic_variation, m)?)?;
    Ok(())
}
