//! Symmetric kernels on the unit square and the maps between their
//! discrete and analytic representations.
//!
//! Two representations coexist:
//!
//! * [`StepGraphon`]: a kernel that is constant on the cells of the uniform
//!   n-partition, identified with a symmetric nonnegative matrix whose row
//!   means (the degrees) are at most 1. Any weighted adjacency matrix under
//!   the same constraints qualifies; entries may exceed 1.
//! * [`AnalyticGraphon`]: a small registry of closed-form families, validated
//!   at construction by dense nonnegativity sampling and a quadrature check
//!   of the degree bound.
//!
//! The maps: [`quotient_step`] projects an analytic kernel onto a partition
//! by exact cell averaging (Gauss-Legendre per cell, diagonal cells split at
//! the ridge), and [`sample_w_random`] draws a simple random graph whose edge
//! probabilities are kernel values at cell midpoints. Distances come in two
//! flavours: [`lp_kernel_distance`] on a common refinement, and the cut-norm
//! machinery in [`cutnorm`] for differences of step kernels.

mod quad;

pub mod cutnorm;

pub use cutnorm::{
    cut_norm_bilinear_exact, cut_norm_bilinear_exact_with_limit, cut_norm_exact,
    cut_norm_exact_with_limit, cut_norm_heuristic, BilinearCut, CutCertificate, CutNormResult,
    CutVariant, SignedStepKernel, BILINEAR_LIMIT, COMPLEMENT_LIMIT, SUBSET_PAIR_LIMIT,
};

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gridfn::Lp;

/// Slack on the degree bound (1/n) sum_j A[k][j] <= 1.
pub const DEGREE_TOL: f64 = 1e-12;
/// Largest entrywise asymmetry accepted before an input matrix is rejected.
pub const SYMMETRY_TOL: f64 = 1e-12;
/// Largest common refinement built by distance and difference operations.
pub const COMMON_REFINEMENT_LIMIT: usize = 4096;

#[derive(Debug, Error)]
pub enum KernelError {
    #[error("matrix is not square: {rows} rows, {cols} columns")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix must have at least one row")]
    Empty,
    #[error("asymmetric input at ({i},{j}): |A[i][j] - A[j][i]| = {delta:e} exceeds {tol:e}")]
    AsymmetricInput { i: usize, j: usize, delta: f64, tol: f64 },
    #[error("negative entry at ({i},{j}): {value}")]
    NegativeEntry { i: usize, j: usize, value: f64 },
    #[error("non-finite entry at ({i},{j})")]
    NonFiniteEntry { i: usize, j: usize },
    #[error("degree bound violated in row {row}: (1/n) sum = {degree} > 1 + {tol:e}")]
    DegreeBoundViolated { row: usize, degree: f64, tol: f64 },
    #[error("invalid parameters for family {family}: {reason}")]
    InvalidFamilyParams { family: &'static str, reason: String },
    #[error("kernel value {value} at ({x},{y}) outside [0,1]; cannot be an edge probability")]
    KernelOutOfUnitRange { x: f64, y: f64, value: f64 },
    #[error("evaluation point {x} outside the open interval (0,1)")]
    PointOutOfDomain { x: f64 },
    #[error("incompatible kernel representations: {0}")]
    IncompatibleRepresentations(String),
    #[error("cannot refine n={n} onto m={m}: m is not a multiple of n")]
    NotAMultiple { n: usize, m: usize },
    #[error("brute force over subsets infeasible: n={n} exceeds limit {limit}")]
    BruteForceLimitExceeded { n: usize, limit: usize },
    #[error("invalid partition size n={n}")]
    InvalidPartition { n: usize },
    #[error("cannot parse kernel: {0}")]
    Parse(String),
}

/// Kernel constant on the cells of the uniform n-partition: a symmetric
/// nonnegative matrix with row means at most 1. Inputs symmetric to within
/// [`SYMMETRY_TOL`] are symmetrised exactly on construction, so every
/// downstream operation may rely on `values[i][j] == values[j][i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepGraphon {
    n: usize,
    values: Array2<f64>,
}

impl StepGraphon {
    pub fn new(values: Array2<f64>) -> Result<Self, KernelError> {
        let (rows, cols) = values.dim();
        if rows != cols {
            return Err(KernelError::NotSquare { rows, cols });
        }
        if rows == 0 {
            return Err(KernelError::Empty);
        }
        let n = rows;
        for i in 0..n {
            for j in 0..n {
                let v = values[[i, j]];
                if !v.is_finite() {
                    return Err(KernelError::NonFiniteEntry { i, j });
                }
                if v < 0.0 {
                    return Err(KernelError::NegativeEntry { i, j, value: v });
                }
            }
        }
        for i in 0..n {
            for j in (i + 1)..n {
                let delta = (values[[i, j]] - values[[j, i]]).abs();
                if delta > SYMMETRY_TOL {
                    return Err(KernelError::AsymmetricInput { i, j, delta, tol: SYMMETRY_TOL });
                }
            }
        }
        let mut sym = values;
        for i in 0..sym.nrows() {
            for j in (i + 1)..n {
                let v = 0.5 * (sym[[i, j]] + sym[[j, i]]);
                sym[[i, j]] = v;
                sym[[j, i]] = v;
            }
        }
        for row in 0..n {
            let degree = sym.row(row).sum() / n as f64;
            if degree > 1.0 + DEGREE_TOL {
                return Err(KernelError::DegreeBoundViolated { row, degree, tol: DEGREE_TOL });
            }
        }
        Ok(StepGraphon { n, values: sym })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, KernelError> {
        let n = rows.len();
        if n == 0 {
            return Err(KernelError::Empty);
        }
        if let Some(bad) = rows.iter().find(|r| r.len() != n) {
            return Err(KernelError::NotSquare { rows: n, cols: bad.len() });
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        let values = Array2::from_shape_vec((n, n), flat).expect("shape checked");
        StepGraphon::new(values)
    }

    /// Parse a whitespace-delimited square matrix, one row per line.
    /// Blank lines and lines starting with `#` are skipped.
    pub fn parse_adjacency(text: &str) -> Result<Self, KernelError> {
        StepGraphon::from_rows(&parse_matrix_text(text)?)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.values[[i, j]]
    }

    /// Degrees (1/n) sum_j A[k][j], one per cell.
    pub fn degree_vector(&self) -> Vec<f64> {
        let n = self.n as f64;
        (0..self.n).map(|k| self.values.row(k).sum() / n).collect()
    }

    /// The same kernel on the finer partition with m cells (n | m).
    pub fn refine(&self, m: usize) -> Result<Self, KernelError> {
        if m == 0 || m % self.n != 0 {
            return Err(KernelError::NotAMultiple { n: self.n, m });
        }
        let r = m / self.n;
        let values = Array2::from_shape_fn((m, m), |(i, j)| self.values[[i / r, j / r]]);
        Ok(StepGraphon { n: m, values })
    }

    /// Signed difference on the common (lcm) refinement.
    pub fn difference(&self, other: &StepGraphon) -> Result<SignedStepKernel, KernelError> {
        let l = common_refinement(self.n, other.n)?;
        let a = self.refine(l)?;
        let b = other.refine(l)?;
        SignedStepKernel::new(&a.values - &b.values)
    }

    /// View this kernel as a signed step kernel (for cut norms of the kernel
    /// itself rather than of a difference).
    pub fn signed(&self) -> SignedStepKernel {
        SignedStepKernel::new(self.values.clone()).expect("valid step graphon is symmetric")
    }
}

fn parse_matrix_text(text: &str) -> Result<Vec<Vec<f64>>, KernelError> {
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let row: Result<Vec<f64>, _> = t.split_whitespace().map(str::parse::<f64>).collect();
        rows.push(row.map_err(|_| {
            KernelError::Parse(format!("line {}: not a numeric row: {t:?}", lineno + 1))
        })?);
    }
    if rows.is_empty() {
        return Err(KernelError::Parse("no rows found".into()));
    }
    Ok(rows)
}

fn common_refinement(n: usize, m: usize) -> Result<usize, KernelError> {
    let l = n / gcd(n, m) * m;
    if l > COMMON_REFINEMENT_LIMIT {
        return Err(KernelError::IncompatibleRepresentations(format!(
            "common refinement lcm({n},{m}) = {l} exceeds limit {COMMON_REFINEMENT_LIMIT}"
        )));
    }
    Ok(l)
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Named profile for separable-product kernels f(x) f(y).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeparableProfile {
    Identity,
}

impl SeparableProfile {
    pub fn eval(self, x: f64) -> f64 {
        match self {
            SeparableProfile::Identity => x,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SeparableProfile::Identity => "identity",
        }
    }
}

/// Registry of closed-form kernel families. All are symmetric by
/// construction; parameter ranges are restricted so that values are
/// nonnegative and degrees stay at most 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AnalyticFamily {
    /// W(x,y) = c, 0 <= c <= 1.
    Constant { c: f64 },
    /// W(x,y) = scale * f(x) f(y), scale in [0,2] for the identity profile.
    SeparableProduct { scale: f64, profile: SeparableProfile },
    /// W(x,y) = c * min(x,y), 0 <= c <= 2. Values may exceed 1 for c > 1.
    MinKernel { c: f64 },
    /// W(x,y) = c * (1 + cos(2 pi (x - y))) / 2, 0 <= c <= 1.
    SmoothCosine { c: f64 },
}

impl AnalyticFamily {
    pub fn name(&self) -> &'static str {
        match self {
            AnalyticFamily::Constant { .. } => "constant",
            AnalyticFamily::SeparableProduct { .. } => "separable_product",
            AnalyticFamily::MinKernel { .. } => "min_kernel",
            AnalyticFamily::SmoothCosine { .. } => "smooth_cosine",
        }
    }

    /// Short text form used in config echoes and CSV keys.
    pub fn describe(&self) -> String {
        match self {
            AnalyticFamily::Constant { c } => format!("constant({c})"),
            AnalyticFamily::SeparableProduct { scale, profile } => {
                format!("separable_product({scale},{})", profile.name())
            }
            AnalyticFamily::MinKernel { c } => format!("min_kernel({c})"),
            AnalyticFamily::SmoothCosine { c } => format!("smooth_cosine({c})"),
        }
    }
}

/// A validated analytic kernel. Construction checks the closed-form
/// parameter ranges, then samples a dense midpoint grid for nonnegativity
/// and the degree bound (quadrature in the second argument), so a family
/// added with wrong ranges fails loudly rather than producing an invalid
/// kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticGraphon {
    family: AnalyticFamily,
}

/// Grid used by the construction-time nonnegativity scan.
const VALIDATION_GRID: usize = 128;
/// Panels per side for 1-d degree quadrature (split at the evaluation point).
const DEGREE_PANELS: usize = 24;

impl AnalyticGraphon {
    pub fn new(family: AnalyticFamily) -> Result<Self, KernelError> {
        let check = |ok: bool, reason: String| {
            if ok {
                Ok(())
            } else {
                Err(KernelError::InvalidFamilyParams { family: family.name(), reason })
            }
        };
        match family {
            AnalyticFamily::Constant { c } => {
                check(c.is_finite() && (0.0..=1.0).contains(&c), format!("need c in [0,1], got {c}"))?
            }
            AnalyticFamily::SeparableProduct { scale, .. } => check(
                scale.is_finite() && (0.0..=2.0).contains(&scale),
                format!("need scale in [0,2], got {scale}"),
            )?,
            AnalyticFamily::MinKernel { c } => {
                check(c.is_finite() && (0.0..=2.0).contains(&c), format!("need c in [0,2], got {c}"))?
            }
            AnalyticFamily::SmoothCosine { c } => {
                check(c.is_finite() && (0.0..=1.0).contains(&c), format!("need c in [0,1], got {c}"))?
            }
        }
        let w = AnalyticGraphon { family };
        for i in 0..VALIDATION_GRID {
            let x = (i as f64 + 0.5) / VALIDATION_GRID as f64;
            for j in i..VALIDATION_GRID {
                let y = (j as f64 + 0.5) / VALIDATION_GRID as f64;
                let v = w.eval(x, y);
                if !v.is_finite() || v < 0.0 {
                    return Err(KernelError::InvalidFamilyParams {
                        family: family.name(),
                        reason: format!("kernel value {v} at ({x},{y})"),
                    });
                }
            }
        }
        for i in 0..=64 {
            let x = (i as f64 + 0.5) / 65.0;
            let d = w.degree_at(x);
            if d > 1.0 + 1e-10 {
                return Err(KernelError::InvalidFamilyParams {
                    family: family.name(),
                    reason: format!("degree {d} at x={x} exceeds 1"),
                });
            }
        }
        Ok(w)
    }

    pub fn family(&self) -> AnalyticFamily {
        self.family
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        match self.family {
            AnalyticFamily::Constant { c } => c,
            AnalyticFamily::SeparableProduct { scale, profile } => {
                scale * profile.eval(x) * profile.eval(y)
            }
            AnalyticFamily::MinKernel { c } => c * x.min(y),
            AnalyticFamily::SmoothCosine { c } => {
                c * (1.0 + (2.0 * std::f64::consts::PI * (x - y)).cos()) / 2.0
            }
        }
    }

    fn degree_at(&self, x: f64) -> f64 {
        // split at y = x so the min-kernel ridge never crosses a panel
        quad::integrate_1d(|y| self.eval(x, y), 0.0, x, DEGREE_PANELS)
            + quad::integrate_1d(|y| self.eval(x, y), x, 1.0, DEGREE_PANELS)
    }
}

/// Either representation, for operations defined on both.
#[derive(Debug, Clone, PartialEq)]
pub enum GraphonHandle {
    Step(StepGraphon),
    Analytic(AnalyticGraphon),
}

impl From<StepGraphon> for GraphonHandle {
    fn from(g: StepGraphon) -> Self {
        GraphonHandle::Step(g)
    }
}

impl From<AnalyticGraphon> for GraphonHandle {
    fn from(w: AnalyticGraphon) -> Self {
        GraphonHandle::Analytic(w)
    }
}

impl GraphonHandle {
    pub fn describe(&self) -> String {
        match self {
            GraphonHandle::Step(g) => format!("step(n={})", g.n()),
            GraphonHandle::Analytic(w) => w.family().describe(),
        }
    }

    /// Kernel value at a point; step kernels look up the containing cell.
    pub fn eval(&self, x: f64, y: f64) -> Result<f64, KernelError> {
        let (i, j) = (cell_index_checked(x)?, cell_index_checked(y)?);
        Ok(match self {
            GraphonHandle::Step(g) => g.entry(i(g.n()), j(g.n())),
            GraphonHandle::Analytic(w) => w.eval(x, y),
        })
    }
}

/// Map a point of (0,1) to its cell index for a given n; cells are
/// right-closed, so x = k/n lands in cell k-1.
fn cell_index(x: f64, n: usize) -> usize {
    let k = (x * n as f64).ceil() as usize;
    k.clamp(1, n) - 1
}

fn cell_index_checked(x: f64) -> Result<impl Fn(usize) -> usize, KernelError> {
    if !(x.is_finite() && 0.0 < x && x < 1.0) {
        return Err(KernelError::PointOutOfDomain { x });
    }
    Ok(move |n| cell_index(x, n))
}

/// Cell averages of an analytic kernel on the uniform n-partition:
/// entry (i, j) is n^2 times the integral of W over I_i x I_j.
/// Off-diagonal cells use a tensor Gauss-Legendre rule; diagonal cells are
/// split at the ridge y = x.
pub fn quotient_step(w: &AnalyticGraphon, n: usize) -> Result<StepGraphon, KernelError> {
    if n == 0 {
        return Err(KernelError::InvalidPartition { n });
    }
    let nf = n as f64;
    let f = |x: f64, y: f64| w.eval(x, y);
    let mut values = Array2::zeros((n, n));
    for i in 0..n {
        let (x0, x1) = (i as f64 / nf, (i + 1) as f64 / nf);
        for j in i..n {
            let (y0, y1) = (j as f64 / nf, (j + 1) as f64 / nf);
            let integral = if i == j {
                quad::integrate_square_split_diagonal(&f, x0, x1)
            } else {
                quad::integrate_rect(&f, x0, x1, y0, y1)
            };
            let v = integral * nf * nf;
            values[[i, j]] = v;
            values[[j, i]] = v;
        }
    }
    StepGraphon::new(values)
}

/// Draw a simple graph on n vertices with independent edges, edge (i, j)
/// present with probability W(midpoint_i, midpoint_j). The result is the
/// 0/1 step graphon of the sampled graph: symmetric with a zero diagonal.
/// Kernel values must be probabilities; a kernel valid as a graphon can
/// still fail here if it exceeds 1 somewhere (for example `min_kernel` with
/// c > 1).
pub fn sample_w_random(w: &GraphonHandle, n: usize, seed: u64) -> Result<StepGraphon, KernelError> {
    if n == 0 {
        return Err(KernelError::InvalidPartition { n });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = Array2::zeros((n, n));
    for i in 0..n {
        let x = (i as f64 + 0.5) / n as f64;
        for j in (i + 1)..n {
            let y = (j as f64 + 0.5) / n as f64;
            let p = match w {
                GraphonHandle::Step(g) => {
                    let v = g.entry(cell_index(x, g.n()), cell_index(y, g.n()));
                    v
                }
                GraphonHandle::Analytic(a) => a.eval(x, y),
            };
            if !(0.0..=1.0).contains(&p) {
                return Err(KernelError::KernelOutOfUnitRange { x, y, value: p });
            }
            let edge = rng.gen::<f64>() < p;
            if edge {
                values[[i, j]] = 1.0;
                values[[j, i]] = 1.0;
            }
        }
    }
    StepGraphon::new(values)
}

/// Degree d_W(x) = integral of W(x, .) over (0,1). Exact row mean for step
/// kernels, composite quadrature (absolute error well below 1e-8) for
/// analytic ones.
pub fn degree(g: &GraphonHandle, x: f64) -> Result<f64, KernelError> {
    if !(x.is_finite() && 0.0 < x && x < 1.0) {
        return Err(KernelError::PointOutOfDomain { x });
    }
    Ok(match g {
        GraphonHandle::Step(s) => s.degree_vector()[cell_index(x, s.n())],
        GraphonHandle::Analytic(w) => w.degree_at(x),
    })
}

/// Lp distance between two kernels on a matching representation.
///
/// Step pairs are compared exactly on the common (lcm) refinement. An
/// analytic kernel paired with a step kernel is first projected by
/// [`quotient_step`] onto the step partition, so the result is the distance
/// to the quotient, not to the analytic kernel itself. Two analytic handles
/// compare to 0 when structurally equal; otherwise quotient them explicitly
/// to chosen partitions first.
pub fn lp_kernel_distance(a: &GraphonHandle, b: &GraphonHandle, p: Lp) -> Result<f64, KernelError> {
    match (a, b) {
        (GraphonHandle::Step(x), GraphonHandle::Step(y)) => {
            Ok(step_lp_distance(x, y, p)?)
        }
        (GraphonHandle::Analytic(w), GraphonHandle::Step(s)) => {
            let q = quotient_step(w, s.n())?;
            Ok(step_lp_distance(&q, s, p)?)
        }
        (GraphonHandle::Step(s), GraphonHandle::Analytic(w)) => {
            let q = quotient_step(w, s.n())?;
            Ok(step_lp_distance(s, &q, p)?)
        }
        (GraphonHandle::Analytic(u), GraphonHandle::Analytic(v)) => {
            if u == v {
                Ok(0.0)
            } else {
                Err(KernelError::IncompatibleRepresentations(
                    "two distinct analytic kernels have no common partition; \
                     apply quotient_step to each first"
                        .into(),
                ))
            }
        }
    }
}

fn step_lp_distance(a: &StepGraphon, b: &StepGraphon, p: Lp) -> Result<f64, KernelError> {
    let d = a.difference(b)?;
    Ok(d.lp_norm(p))
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum KernelJson {
    Step { n: usize, values: Vec<Vec<f64>> },
    Analytic { family: String, params: serde_json::Map<String, serde_json::Value> },
}

impl GraphonHandle {
    pub fn to_json(&self) -> String {
        let dto = match self {
            GraphonHandle::Step(g) => KernelJson::Step {
                n: g.n(),
                values: (0..g.n()).map(|i| g.values().row(i).to_vec()).collect(),
            },
            GraphonHandle::Analytic(w) => {
                let mut params = serde_json::Map::new();
                let num = |v: f64| serde_json::Value::from(v);
                match w.family() {
                    AnalyticFamily::Constant { c }
                    | AnalyticFamily::MinKernel { c }
                    | AnalyticFamily::SmoothCosine { c } => {
                        params.insert("c".into(), num(c));
                    }
                    AnalyticFamily::SeparableProduct { scale, profile } => {
                        params.insert("scale".into(), num(scale));
                        params.insert("profile".into(), profile.name().into());
                    }
                }
                KernelJson::Analytic { family: w.family().name().into(), params }
            }
        };
        serde_json::to_string(&dto).expect("kernel serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, KernelError> {
        let dto: KernelJson =
            serde_json::from_str(text).map_err(|e| KernelError::Parse(e.to_string()))?;
        match dto {
            KernelJson::Step { n, values } => {
                if values.len() != n {
                    return Err(KernelError::Parse(format!(
                        "declared n={n} but {} rows present",
                        values.len()
                    )));
                }
                Ok(GraphonHandle::Step(StepGraphon::from_rows(&values)?))
            }
            KernelJson::Analytic { family, params } => {
                let get = |key: &str| -> Result<f64, KernelError> {
                    params
                        .get(key)
                        .and_then(|v| v.as_f64())
                        .ok_or_else(|| KernelError::Parse(format!("missing numeric param {key:?}")))
                };
                let fam = match family.as_str() {
                    "constant" => AnalyticFamily::Constant { c: get("c")? },
                    "min_kernel" => AnalyticFamily::MinKernel { c: get("c")? },
                    "smooth_cosine" => AnalyticFamily::SmoothCosine { c: get("c")? },
                    "separable_product" => {
                        let profile = match params.get("profile").and_then(|v| v.as_str()) {
                            Some("identity") | None => SeparableProfile::Identity,
                            Some(other) => {
                                return Err(KernelError::Parse(format!(
                                    "unknown separable profile {other:?}"
                                )))
                            }
                        };
                        AnalyticFamily::SeparableProduct { scale: get("scale")?, profile }
                    }
                    other => return Err(KernelError::Parse(format!("unknown family {other:?}"))),
                };
                Ok(GraphonHandle::Analytic(AnalyticGraphon::new(fam)?))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn four_cycle() -> StepGraphon {
        StepGraphon::from_rows(&[
            vec![0.0, 1.0, 0.0, 1.0],
            vec![1.0, 0.0, 1.0, 0.0],
            vec![0.0, 1.0, 0.0, 1.0],
            vec![1.0, 0.0, 1.0, 0.0],
        ])
        .unwrap()
    }

    #[test]
    fn adjacency_constructor_validates() {
        let g = four_cycle();
        assert_eq!(g.n(), 4);
        assert_eq!(g.entry(0, 1), 1.0);
        assert_eq!(g.entry(0, 2), 0.0);
        assert!(g.degree_vector().iter().all(|d| (d - 0.5).abs() < 1e-15));

        let zero = StepGraphon::new(Array2::zeros((3, 3))).unwrap();
        assert!(zero.degree_vector().iter().all(|d| *d == 0.0));

        // weighted entries above 1 are fine while the row mean stays at 1
        assert!(StepGraphon::from_rows(&[vec![0.0, 2.0], vec![2.0, 0.0]]).is_ok());
        assert!(matches!(
            StepGraphon::from_rows(&[vec![0.0, 3.0], vec![3.0, 0.0]]),
            Err(KernelError::DegreeBoundViolated { .. })
        ));
        assert!(matches!(
            StepGraphon::from_rows(&[vec![0.0, 1.0], vec![0.5, 0.0]]),
            Err(KernelError::AsymmetricInput { .. })
        ));
        assert!(matches!(
            StepGraphon::from_rows(&[vec![0.0, -0.1], vec![-0.1, 0.0]]),
            Err(KernelError::NegativeEntry { .. })
        ));
    }

    #[test]
    fn adjacency_text_round_trip() {
        let g = StepGraphon::parse_adjacency("# 2-cycle\n0 1\n1 0\n").unwrap();
        assert_eq!(g.entry(0, 1), 1.0);
        assert!(StepGraphon::parse_adjacency("0 1\nx 0\n").is_err());
    }

    #[test]
    fn constant_quotient_is_constant() {
        let w = AnalyticGraphon::new(AnalyticFamily::Constant { c: 0.5 }).unwrap();
        let q = quotient_step(&w, 4).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert!((q.entry(i, j) - 0.5).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn min_kernel_unit_cell_average_is_one_third() {
        let w = AnalyticGraphon::new(AnalyticFamily::MinKernel { c: 1.0 }).unwrap();
        let q = quotient_step(&w, 1).unwrap();
        assert!((q.entry(0, 0) - 1.0 / 3.0).abs() < 1e-12, "got {}", q.entry(0, 0));
    }

    #[test]
    fn family_params_validated() {
        assert!(AnalyticGraphon::new(AnalyticFamily::Constant { c: 1.5 }).is_err());
        assert!(AnalyticGraphon::new(AnalyticFamily::SmoothCosine { c: -0.1 }).is_err());
        assert!(AnalyticGraphon::new(AnalyticFamily::MinKernel { c: 2.0 }).is_ok());
        assert!(AnalyticGraphon::new(AnalyticFamily::MinKernel { c: 2.5 }).is_err());
        assert!(AnalyticGraphon::new(AnalyticFamily::SeparableProduct {
            scale: 2.0,
            profile: SeparableProfile::Identity
        })
        .is_ok());
    }

    #[test]
    fn degree_lookup_and_quadrature() {
        let g = GraphonHandle::Step(StepGraphon::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap());
        assert!((degree(&g, 0.25).unwrap() - 0.5).abs() < 1e-15);
        // right-closed cells: x = 0.5 still belongs to the first cell
        assert!((degree(&g, 0.5).unwrap() - 0.5).abs() < 1e-15);
        assert!(matches!(degree(&g, 0.0), Err(KernelError::PointOutOfDomain { .. })));

        let w = GraphonHandle::Analytic(
            AnalyticGraphon::new(AnalyticFamily::SeparableProduct {
                scale: 1.0,
                profile: SeparableProfile::Identity,
            })
            .unwrap(),
        );
        // d(x) = x * int_0^1 y dy = x / 2
        assert!((degree(&w, 0.5).unwrap() - 0.25).abs() < 1e-12);
        let c = GraphonHandle::Analytic(AnalyticGraphon::new(AnalyticFamily::Constant { c: 0.3 }).unwrap());
        assert!((degree(&c, 0.9).unwrap() - 0.3).abs() < 1e-12);
    }

    #[test]
    fn lp_distance_on_matching_and_refined_partitions() {
        let a = GraphonHandle::Step(StepGraphon::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap());
        let z = GraphonHandle::Step(StepGraphon::new(Array2::zeros((2, 2))).unwrap());
        assert!((lp_kernel_distance(&a, &z, Lp::ONE).unwrap() - 0.5).abs() < 1e-15);
        assert!((lp_kernel_distance(&a, &z, Lp::INF).unwrap() - 1.0).abs() < 1e-15);
        assert!((lp_kernel_distance(&a, &z, Lp::TWO).unwrap() - 0.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(lp_kernel_distance(&a, &a, Lp::TWO).unwrap(), 0.0);

        // n=2 vs n=3 meet at lcm 6
        let b = GraphonHandle::Step(StepGraphon::new(Array2::from_elem((3, 3), 0.5)).unwrap());
        let d = lp_kernel_distance(&a, &b, Lp::INF).unwrap();
        assert!((d - 0.5).abs() < 1e-15);

        // refinement cap
        let big1 = GraphonHandle::Step(StepGraphon::new(Array2::zeros((64, 64))).unwrap());
        let big2 = GraphonHandle::Step(StepGraphon::new(Array2::zeros((127, 127))).unwrap());
        assert!(matches!(
            lp_kernel_distance(&big1, &big2, Lp::ONE),
            Err(KernelError::IncompatibleRepresentations(_))
        ));
    }

    #[test]
    fn analytic_pairs_need_explicit_quotients() {
        let u = GraphonHandle::Analytic(AnalyticGraphon::new(AnalyticFamily::Constant { c: 0.5 }).unwrap());
        let v = GraphonHandle::Analytic(AnalyticGraphon::new(AnalyticFamily::SmoothCosine { c: 0.5 }).unwrap());
        assert_eq!(lp_kernel_distance(&u, &u.clone(), Lp::TWO).unwrap(), 0.0);
        assert!(lp_kernel_distance(&u, &v, Lp::TWO).is_err());
    }

    #[test]
    fn sampling_is_symmetric_hollow_and_seeded() {
        let w = GraphonHandle::Analytic(AnalyticGraphon::new(AnalyticFamily::Constant { c: 1.0 }).unwrap());
        let g = sample_w_random(&w, 3, 0).unwrap();
        for i in 0..3 {
            assert_eq!(g.entry(i, i), 0.0);
            for j in 0..3 {
                assert_eq!(g.entry(i, j), g.entry(j, i));
                if i != j {
                    assert_eq!(g.entry(i, j), 1.0);
                }
            }
        }
        let z = sample_w_random(
            &GraphonHandle::Analytic(AnalyticGraphon::new(AnalyticFamily::Constant { c: 0.0 }).unwrap()),
            5,
            1,
        )
        .unwrap();
        assert_eq!(z.values().sum(), 0.0);

        let half = GraphonHandle::Analytic(AnalyticGraphon::new(AnalyticFamily::Constant { c: 0.5 }).unwrap());
        let a = sample_w_random(&half, 50, 42).unwrap();
        let b = sample_w_random(&half, 50, 42).unwrap();
        assert_eq!(a, b);
        let c = sample_w_random(&half, 50, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn sampling_rejects_non_probability_kernels() {
        // valid graphon (degree <= 1) whose values exceed 1 near (1,1)
        let w = GraphonHandle::Analytic(AnalyticGraphon::new(AnalyticFamily::MinKernel { c: 2.0 }).unwrap());
        assert!(matches!(
            sample_w_random(&w, 8, 0),
            Err(KernelError::KernelOutOfUnitRange { .. })
        ));
    }

    #[test]
    fn sampled_density_near_edge_probability() {
        let half = GraphonHandle::Analytic(AnalyticGraphon::new(AnalyticFamily::Constant { c: 0.5 }).unwrap());
        let g = sample_w_random(&half, 200, 7).unwrap();
        let n = 200.0;
        let density = g.values().sum() / (n * (n - 1.0));
        assert!((density - 0.5).abs() < 0.06, "density {density}");
    }

    #[test]
    fn json_round_trip_both_kinds() {
        let step = GraphonHandle::Step(four_cycle());
        let back = GraphonHandle::from_json(&step.to_json()).unwrap();
        assert_eq!(step, back);

        let w = GraphonHandle::Analytic(AnalyticGraphon::new(AnalyticFamily::SmoothCosine { c: 0.5 }).unwrap());
        let back = GraphonHandle::from_json(&w.to_json()).unwrap();
        assert_eq!(w, back);
        assert!(GraphonHandle::from_json("{\"kind\":\"analytic\",\"family\":\"nope\",\"params\":{}}").is_err());
    }

    #[test]
    fn difference_and_refine() {
        let a = StepGraphon::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let r = a.refine(4).unwrap();
        assert_eq!(r.entry(0, 2), 1.0);
        assert_eq!(r.entry(0, 1), 0.0);
        let d = a.difference(&StepGraphon::new(array![[0.0, 1.0], [1.0, 0.0]]).unwrap()).unwrap();
        assert_eq!(d.values().sum(), 0.0);
    }
}
