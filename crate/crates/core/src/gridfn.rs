//! Piecewise-constant functions on the uniform partition of (0,1).
//!
//! A [`GridFunction`] stores one value per cell `I_k = ((k-1)/n, k/n]`,
//! k = 1..n. Norms are the normalised Lp norms of the step function on (0,1),
//!
//! ```text
//! ||u||_p = ((1/n) * sum_k |u_k|^p)^(1/p),   ||u||_inf = max_k |u_k|,
//! ```
//!
//! so a constant c has norm |c| for every p, the embedding into Lp(0,1) is
//! isometric, and refining a function onto a finer partition never changes
//! its norm. `coarsen` takes block means, which is the L2 projection onto the
//! coarser partition; `coarsen(refine(u, m), n)` recovers `u` exactly.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("Lp exponent must satisfy p >= 1, got {0}")]
    InvalidExponent(f64),
    #[error("cannot refine n={n} onto m={m}: m is not a multiple of n")]
    NotAMultiple { n: usize, m: usize },
    #[error("cannot coarsen n={n} onto m={m}: m does not divide n")]
    NotADivisor { n: usize, m: usize },
    #[error("grid function must have at least one cell")]
    Empty,
    #[error("non-finite value at cell {index}")]
    NonFiniteInput { index: usize },
    #[error("map produced a non-finite value at cell {index}")]
    NonFiniteResult { index: usize },
    #[error("dimension mismatch: {left} vs {right} cells")]
    DimensionMismatch { left: usize, right: usize },
    #[error("cannot parse grid function: {0}")]
    Parse(String),
}

/// Lp exponent, either finite (>= 1) or infinity. Parsed from `"inf"` or a
/// number; displayed the same way, so it round-trips through config files.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Lp {
    P(f64),
    Inf,
}

impl Lp {
    pub const ONE: Lp = Lp::P(1.0);
    pub const TWO: Lp = Lp::P(2.0);
    pub const INF: Lp = Lp::Inf;

    pub fn new(p: f64) -> Result<Self, GridError> {
        if p.is_nan() || p < 1.0 {
            return Err(GridError::InvalidExponent(p));
        }
        if p.is_infinite() {
            Ok(Lp::Inf)
        } else {
            Ok(Lp::P(p))
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, Lp::P(_))
    }

    /// The finite exponent, if any.
    pub fn exponent(self) -> Option<f64> {
        match self {
            Lp::P(p) => Some(p),
            Lp::Inf => None,
        }
    }
}

impl std::fmt::Display for Lp {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Lp::P(p) => write!(f, "{p}"),
            Lp::Inf => write!(f, "inf"),
        }
    }
}

impl std::str::FromStr for Lp {
    type Err = GridError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        if t.eq_ignore_ascii_case("inf") || t.eq_ignore_ascii_case("infinity") || t == "∞" {
            return Ok(Lp::Inf);
        }
        let p: f64 = t
            .parse()
            .map_err(|_| GridError::Parse(format!("not an Lp exponent: {s:?}")))?;
        Lp::new(p)
    }
}

/// A function constant on each cell of the uniform n-partition of (0,1).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridFunction {
    n: usize,
    values: Vec<f64>,
}

#[derive(Deserialize)]
struct GridFunctionJson {
    n: usize,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(values: Vec<f64>) -> Result<Self, GridError> {
        if values.is_empty() {
            return Err(GridError::Empty);
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(GridError::NonFiniteInput { index });
        }
        Ok(GridFunction { n: values.len(), values })
    }

    pub fn constant(c: f64, n: usize) -> Result<Self, GridError> {
        GridFunction::new(vec![c; n.max(1)])
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Normalised Lp norm of the associated step function on (0,1).
    pub fn lp_norm(&self, p: Lp) -> f64 {
        match p {
            Lp::Inf => self.values.iter().fold(0.0, |m, v| m.max(v.abs())),
            Lp::P(p) if p == 1.0 => {
                self.values.iter().map(|v| v.abs()).sum::<f64>() / self.n as f64
            }
            Lp::P(p) if p == 2.0 => {
                (self.values.iter().map(|v| v * v).sum::<f64>() / self.n as f64).sqrt()
            }
            Lp::P(p) => {
                let s: f64 = self.values.iter().map(|v| v.abs().powf(p)).sum();
                (s / self.n as f64).powf(1.0 / p)
            }
        }
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.n as f64
    }

    /// Replicate each value onto the finer partition with m cells (n | m).
    pub fn refine(&self, m: usize) -> Result<Self, GridError> {
        if m == 0 || m % self.n != 0 {
            return Err(GridError::NotAMultiple { n: self.n, m });
        }
        let r = m / self.n;
        let mut values = Vec::with_capacity(m);
        for v in &self.values {
            values.extend(std::iter::repeat(*v).take(r));
        }
        Ok(GridFunction { n: m, values })
    }

    /// Block means onto the coarser partition with m cells (m | n).
    pub fn coarsen(&self, m: usize) -> Result<Self, GridError> {
        if m == 0 || self.n % m != 0 {
            return Err(GridError::NotADivisor { n: self.n, m });
        }
        let r = self.n / m;
        let values = (0..m)
            .map(|k| self.values[k * r..(k + 1) * r].iter().sum::<f64>() / r as f64)
            .collect();
        Ok(GridFunction { n: m, values })
    }

    /// Apply a scalar function cell by cell, rejecting non-finite results.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self, GridError> {
        let mut values = Vec::with_capacity(self.n);
        for (index, v) in self.values.iter().enumerate() {
            let w = f(*v);
            if !w.is_finite() {
                return Err(GridError::NonFiniteResult { index });
            }
            values.push(w);
        }
        Ok(GridFunction { n: self.n, values })
    }

    /// alpha * x + y on matching partitions.
    pub fn axpy(alpha: f64, x: &GridFunction, y: &GridFunction) -> Result<Self, GridError> {
        if x.n != y.n {
            return Err(GridError::DimensionMismatch { left: x.n, right: y.n });
        }
        if !alpha.is_finite() {
            return Err(GridError::NonFiniteInput { index: 0 });
        }
        let values: Vec<f64> = x
            .values
            .iter()
            .zip(&y.values)
            .map(|(a, b)| alpha * a + b)
            .collect();
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(GridError::NonFiniteResult { index });
        }
        Ok(GridFunction { n: x.n, values })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("grid function serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, GridError> {
        let raw: GridFunctionJson =
            serde_json::from_str(text).map_err(|e| GridError::Parse(e.to_string()))?;
        if raw.n != raw.values.len() {
            return Err(GridError::Parse(format!(
                "declared n={} but {} values present",
                raw.n,
                raw.values.len()
            )));
        }
        GridFunction::new(raw.values)
    }

    /// Single-column CSV with a header row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("value\n");
        for v in &self.values {
            out.push_str(&crate::harness::io::fmt_float(*v));
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self, GridError> {
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h.trim() == "value" => {}
            other => {
                return Err(GridError::Parse(format!(
                    "expected header \"value\", got {other:?}"
                )))
            }
        }
        let mut values = Vec::new();
        for line in lines {
            let t = line.trim();
            if t.is_empty() {
                continue;
            }
            values.push(
                t.parse::<f64>()
                    .map_err(|_| GridError::Parse(format!("bad value line {t:?}")))?,
            );
        }
        GridFunction::new(values)
    }
}
