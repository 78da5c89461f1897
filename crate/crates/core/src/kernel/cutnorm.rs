//! Cut norms of signed step kernels.
//!
//! Three quantities, never silently converted into one another:
//!
//! * [`CutVariant::SubsetPair`]: max over S, T of |(1/n^2) sum_{i in S, j in T} D_ij|.
//! * [`CutVariant::Complement`]: max over S of (1/n^2) sum_{i in S, j not in S} D_ij.
//! * the bilinear form sup over sign vectors phi, psi of (1/n^2) phi^T D psi,
//!   exactly by enumeration ([`cut_norm_bilinear_exact`]) or from below by
//!   alternating maximization ([`cut_norm_heuristic`]).
//!
//! All exact searches enumerate subsets in increasing bitmask order and keep
//! the first optimum (strict improvement only), so certificates are
//! deterministic. Each candidate is accumulated fresh from the matrix rather
//! than updated incrementally across the walk; the brute-force limits are
//! small enough that this costs little and it keeps per-candidate rounding at
//! a few ulps instead of growing with 2^n.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::KernelError;
use crate::gridfn::Lp;

/// Default subset limit for the two-subset search (2^n * n work per subset).
pub const SUBSET_PAIR_LIMIT: usize = 16;
/// Default subset limit for the single-subset (complement) search.
pub const COMPLEMENT_LIMIT: usize = 20;
/// Default sign-vector limit for exact bilinear enumeration.
pub const BILINEAR_LIMIT: usize = 20;

/// A signed kernel constant on the cells of the uniform n-partition —
/// typically the difference of two step graphons, but any finite square
/// matrix qualifies (symmetry is not required; rank-one sign patterns
/// s t^T are legitimate inputs).
#[derive(Debug, Clone, PartialEq)]
pub struct SignedStepKernel {
    n: usize,
    values: Array2<f64>,
}

impl SignedStepKernel {
    pub fn new(values: Array2<f64>) -> Result<Self, KernelError> {
        let (rows, cols) = values.dim();
        if rows != cols {
            return Err(KernelError::NotSquare { rows, cols });
        }
        if rows == 0 {
            return Err(KernelError::Empty);
        }
        for i in 0..rows {
            for j in 0..rows {
                if !values[[i, j]].is_finite() {
                    return Err(KernelError::NonFiniteEntry { i, j });
                }
            }
        }
        Ok(SignedStepKernel { n: rows, values })
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
        SignedStepKernel::new(Array2::from_shape_vec((n, n), flat).expect("shape checked"))
    }

    /// Parse the same whitespace-row / `#`-comment format as
    /// [`StepGraphon::parse_adjacency`](super::StepGraphon::parse_adjacency),
    /// but without the [0,1] range or symmetry requirements.
    pub fn parse_matrix(text: &str) -> Result<Self, KernelError> {
        SignedStepKernel::from_rows(&super::parse_matrix_text(text)?)
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

    /// Lp norm of the kernel as a function on (0,1)^2: each cell has
    /// measure 1/n^2.
    pub fn lp_norm(&self, p: Lp) -> f64 {
        let n2 = (self.n * self.n) as f64;
        match p {
            Lp::Inf => self.values.iter().fold(0.0f64, |m, v| m.max(v.abs())),
            Lp::P(p) if p == 1.0 => self.values.iter().map(|v| v.abs()).sum::<f64>() / n2,
            Lp::P(p) if p == 2.0 => (self.values.iter().map(|v| v * v).sum::<f64>() / n2).sqrt(),
            Lp::P(p) => (self.values.iter().map(|v| v.abs().powf(p)).sum::<f64>() / n2).powf(1.0 / p),
        }
    }

    /// Integral over (0,1)^2, i.e. the mean entry.
    pub fn mean(&self) -> f64 {
        self.values.sum() / (self.n * self.n) as f64
    }
}

/// Which exact cut optimization to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CutVariant {
    /// max_{S,T} |(1/n^2) sum_{i in S, j in T} D_ij| — the two-subset form
    /// with absolute value.
    #[serde(rename = "st")]
    SubsetPair,
    /// max_S (1/n^2) sum_{i in S, j not in S} D_ij — one subset against its
    /// complement, no absolute value.
    #[serde(rename = "s_complement")]
    Complement,
}

impl CutVariant {
    pub fn default_limit(self) -> usize {
        match self {
            CutVariant::SubsetPair => SUBSET_PAIR_LIMIT,
            CutVariant::Complement => COMPLEMENT_LIMIT,
        }
    }
}

impl std::fmt::Display for CutVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CutVariant::SubsetPair => "st",
            CutVariant::Complement => "s_complement",
        })
    }
}

impl std::str::FromStr for CutVariant {
    type Err = KernelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "st" | "subset_pair" | "subset-pair" => Ok(CutVariant::SubsetPair),
            "s_complement" | "s-complement" | "complement" => Ok(CutVariant::Complement),
            other => Err(KernelError::Parse(format!("unknown cut variant {other:?}"))),
        }
    }
}

/// The optimizing subsets, as sorted 0-based cell indices. For the
/// complement variant `t` is the complement of `s`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CutCertificate {
    pub s: Vec<usize>,
    pub t: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CutNormResult {
    pub value: f64,
    pub variant: CutVariant,
    pub certificate: CutCertificate,
}

/// A sign-vector pair and the bilinear value (1/n^2) phi^T D psi it attains.
/// Produced exactly by [`cut_norm_bilinear_exact`] and as a lower bound by
/// [`cut_norm_heuristic`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BilinearCut {
    pub value: f64,
    pub phi: Vec<i8>,
    pub psi: Vec<i8>,
}

pub fn cut_norm_exact(d: &SignedStepKernel, variant: CutVariant) -> Result<CutNormResult, KernelError> {
    cut_norm_exact_with_limit(d, variant, variant.default_limit())
}

pub fn cut_norm_exact_with_limit(
    d: &SignedStepKernel,
    variant: CutVariant,
    limit: usize,
) -> Result<CutNormResult, KernelError> {
    let n = d.n;
    if n > limit || limit >= usize::BITS as usize {
        return Err(KernelError::BruteForceLimitExceeded { n, limit });
    }
    let result = match variant {
        CutVariant::SubsetPair => subset_pair_search(d),
        CutVariant::Complement => complement_search(d),
    };
    Ok(result)
}

fn members(mask: usize, n: usize) -> Vec<usize> {
    (0..n).filter(|j| mask >> j & 1 == 1).collect()
}

/// For each S, the inner maximization over T is solved in closed form: with
/// cols_j = sum_{i in S} D_ij, the best |sum over T| is the larger of the
/// positive-part and negative-part column sums, attained by T = {cols > 0}
/// or T = {cols < 0} (positive side preferred on ties).
fn subset_pair_search(d: &SignedStepKernel) -> CutNormResult {
    let n = d.n;
    let n2 = (n * n) as f64;
    let mut best = CutNormResult {
        value: 0.0,
        variant: CutVariant::SubsetPair,
        certificate: CutCertificate { s: vec![], t: vec![] },
    };
    let mut cols = vec![0.0f64; n];
    for mask in 1usize..(1 << n) {
        cols.iter_mut().for_each(|c| *c = 0.0);
        for i in 0..n {
            if mask >> i & 1 == 1 {
                for j in 0..n {
                    cols[j] += d.values[[i, j]];
                }
            }
        }
        let pos: f64 = cols.iter().filter(|c| **c > 0.0).sum();
        let neg: f64 = -cols.iter().filter(|c| **c < 0.0).sum::<f64>();
        let cand = pos.max(neg) / n2;
        if cand > best.value {
            let t = if pos >= neg {
                (0..n).filter(|j| cols[*j] > 0.0).collect()
            } else {
                (0..n).filter(|j| cols[*j] < 0.0).collect()
            };
            best.value = cand;
            best.certificate = CutCertificate { s: members(mask, n), t };
        }
    }
    best
}

fn complement_search(d: &SignedStepKernel) -> CutNormResult {
    let n = d.n;
    let n2 = (n * n) as f64;
    let mut best = CutNormResult {
        value: 0.0,
        variant: CutVariant::Complement,
        certificate: CutCertificate { s: vec![], t: (0..n).collect() },
    };
    for mask in 1usize..(1 << n) {
        let mut sum = 0.0;
        for i in 0..n {
            if mask >> i & 1 == 1 {
                for j in 0..n {
                    if mask >> j & 1 == 0 {
                        sum += d.values[[i, j]];
                    }
                }
            }
        }
        let cand = sum / n2;
        if cand > best.value {
            best.value = cand;
            best.certificate = CutCertificate {
                s: members(mask, n),
                t: members(!mask & ((1 << n) - 1), n),
            };
        }
    }
    best
}

/// Exact bilinear optimum by enumerating psi; for fixed psi the optimal phi
/// takes the sign of each row sum, so the value is (1/n^2) sum_i |(D psi)_i|.
/// psi and -psi attain the same value; the first optimum in enumeration
/// order (all-ones first) is kept.
pub fn cut_norm_bilinear_exact(d: &SignedStepKernel) -> Result<BilinearCut, KernelError> {
    cut_norm_bilinear_exact_with_limit(d, BILINEAR_LIMIT)
}

pub fn cut_norm_bilinear_exact_with_limit(
    d: &SignedStepKernel,
    limit: usize,
) -> Result<BilinearCut, KernelError> {
    let n = d.n;
    if n > limit || limit >= usize::BITS as usize {
        return Err(KernelError::BruteForceLimitExceeded { n, limit });
    }
    let n2 = (n * n) as f64;
    let mut best: Option<BilinearCut> = None;
    let mut psi = vec![1i8; n];
    let mut rows = vec![0.0f64; n];
    for mask in 0usize..(1 << n) {
        for (j, p) in psi.iter_mut().enumerate() {
            *p = if mask >> j & 1 == 1 { -1 } else { 1 };
        }
        for (i, r) in rows.iter_mut().enumerate() {
            *r = (0..n).map(|j| d.values[[i, j]] * psi[j] as f64).sum();
        }
        let value = rows.iter().map(|r| r.abs()).sum::<f64>() / n2;
        if best.as_ref().map_or(true, |b| value > b.value) {
            let phi = rows.iter().map(|r| if *r < 0.0 { -1 } else { 1 }).collect();
            best = Some(BilinearCut { value, phi, psi: psi.clone() });
        }
    }
    Ok(best.expect("at least one sign pattern evaluated"))
}

/// Alternating maximization of the bilinear form from `restarts` random sign
/// starts (at least one): fix psi, set each phi_i to the sign of its row
/// contribution, then the symmetric update for psi, until a full round no
/// longer increases the value. Each half-step maximizes the form exactly over
/// one vector, so the value is nondecreasing and the loop terminates on the
/// finite sign lattice. The result is always a valid lower bound for the
/// exact bilinear optimum; deterministic given the seed.
pub fn cut_norm_heuristic(d: &SignedStepKernel, restarts: usize, seed: u64) -> BilinearCut {
    let n = d.n;
    let n2 = (n * n) as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<BilinearCut> = None;
    for _ in 0..restarts.max(1) {
        let mut psi: Vec<i8> = (0..n).map(|_| if rng.gen::<bool>() { 1 } else { -1 }).collect();
        let mut phi = vec![1i8; n];
        let mut value = f64::NEG_INFINITY;
        loop {
            for i in 0..n {
                let row: f64 = (0..n).map(|j| d.values[[i, j]] * psi[j] as f64).sum();
                phi[i] = if row < 0.0 { -1 } else { 1 };
            }
            for j in 0..n {
                let col: f64 = (0..n).map(|i| d.values[[i, j]] * phi[i] as f64).sum();
                psi[j] = if col < 0.0 { -1 } else { 1 };
            }
            let next = (0..n)
                .map(|i| {
                    phi[i] as f64 * (0..n).map(|j| d.values[[i, j]] * psi[j] as f64).sum::<f64>()
                })
                .sum::<f64>()
                / n2;
            if next <= value {
                break;
            }
            value = next;
        }
        if best.as_ref().map_or(true, |b| value > b.value) {
            best = Some(BilinearCut { value, phi: phi.clone(), psi: psi.clone() });
        }
    }
    best.expect("restarts.max(1) rounds ran")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    // Both globs above export a `Rng`; pin the one the tests mean.
    use rand::Rng;

    fn checkerboard() -> SignedStepKernel {
        SignedStepKernel::from_rows(&[vec![-1.0, 1.0], vec![1.0, -1.0]]).unwrap()
    }

    /// Direct enumeration of both subsets, no inner closed form.
    fn naive_subset_pair(d: &SignedStepKernel) -> f64 {
        let n = d.n();
        let n2 = (n * n) as f64;
        let mut best = 0.0f64;
        for s in 0usize..(1 << n) {
            for t in 0usize..(1 << n) {
                let mut sum = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        if s >> i & 1 == 1 && t >> j & 1 == 1 {
                            sum += d.entry(i, j);
                        }
                    }
                }
                best = best.max((sum / n2).abs());
            }
        }
        best
    }

    fn naive_bilinear(d: &SignedStepKernel) -> f64 {
        let n = d.n();
        let n2 = (n * n) as f64;
        let sign = |mask: usize, k: usize| if mask >> k & 1 == 1 { -1.0 } else { 1.0 };
        let mut best = f64::NEG_INFINITY;
        for pm in 0usize..(1 << n) {
            for qm in 0usize..(1 << n) {
                let mut sum = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        sum += sign(pm, i) * d.entry(i, j) * sign(qm, j);
                    }
                }
                best = best.max(sum / n2);
            }
        }
        best
    }

    fn random_kernel(n: usize, seed: u64) -> SignedStepKernel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values = Array2::from_shape_fn((n, n), |_| rng.gen::<f64>() * 2.0 - 1.0);
        SignedStepKernel::new(values).unwrap()
    }

    #[test]
    fn zero_difference_is_zero_with_empty_certificate() {
        let z = SignedStepKernel::new(Array2::zeros((3, 3))).unwrap();
        for variant in [CutVariant::SubsetPair, CutVariant::Complement] {
            let r = cut_norm_exact(&z, variant).unwrap();
            assert_eq!(r.value, 0.0);
            assert!(r.certificate.s.is_empty());
        }
        assert_eq!(cut_norm_bilinear_exact(&z).unwrap().value, 0.0);
        assert_eq!(cut_norm_heuristic(&z, 3, 0).value, 0.0);
    }

    #[test]
    fn checkerboard_pins_value_and_certificates() {
        let d = checkerboard();
        let st = cut_norm_exact(&d, CutVariant::SubsetPair).unwrap();
        assert_eq!(st.value, 0.25);
        assert_eq!(st.certificate, CutCertificate { s: vec![0], t: vec![1] });

        let sc = cut_norm_exact(&d, CutVariant::Complement).unwrap();
        assert_eq!(sc.value, 0.25);
        assert_eq!(sc.certificate, CutCertificate { s: vec![0], t: vec![1] });

        // bilinear optimum: phi = psi = (1,-1) gives (1+1+1+1)/4 = 1
        assert_eq!(cut_norm_bilinear_exact(&d).unwrap().value, 1.0);
    }

    #[test]
    fn exact_matches_naive_enumerations() {
        for seed in 0..6 {
            let d = random_kernel(5, seed);
            let st = cut_norm_exact(&d, CutVariant::SubsetPair).unwrap().value;
            assert!((st - naive_subset_pair(&d)).abs() < 1e-13);
            let bi = cut_norm_bilinear_exact(&d).unwrap().value;
            assert!((bi - naive_bilinear(&d)).abs() < 1e-13);
        }
    }

    #[test]
    fn certificate_reproduces_reported_value() {
        for seed in 0..4 {
            let d = random_kernel(6, seed);
            let n2 = 36.0;
            let sum_cells = |s: &[usize], t: &[usize]| -> f64 {
                s.iter().map(|&i| t.iter().map(|&j| d.entry(i, j)).sum::<f64>()).sum()
            };
            let r = cut_norm_exact(&d, CutVariant::SubsetPair).unwrap();
            let direct = sum_cells(&r.certificate.s, &r.certificate.t);
            assert!((direct.abs() / n2 - r.value).abs() < 1e-13);

            let c = cut_norm_exact(&d, CutVariant::Complement).unwrap();
            let direct = sum_cells(&c.certificate.s, &c.certificate.t);
            assert!((direct / n2 - c.value).abs() < 1e-13);

            let b = cut_norm_bilinear_exact(&d).unwrap();
            let form: f64 = (0..6)
                .map(|i| (0..6).map(|j| b.phi[i] as f64 * d.entry(i, j) * b.psi[j] as f64).sum::<f64>())
                .sum();
            assert!((form / n2 - b.value).abs() < 1e-13);
        }
    }

    #[test]
    fn heuristic_is_exact_on_rank_one_sign_patterns() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let n = 8;
            let s: Vec<f64> = (0..n).map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 }).collect();
            let t: Vec<f64> = (0..n).map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 }).collect();
            let d = SignedStepKernel::new(Array2::from_shape_fn((n, n), |(i, j)| s[i] * t[j])).unwrap();
            let h = cut_norm_heuristic(&d, 1, 5);
            assert!((h.value - 1.0).abs() < 1e-14, "rank-1 value {}", h.value);
        }
    }

    #[test]
    fn heuristic_never_exceeds_bilinear_optimum() {
        let d = random_kernel(10, 3);
        let exact = cut_norm_bilinear_exact(&d).unwrap().value;
        let h = cut_norm_heuristic(&d, 50, 3);
        assert!(h.value <= exact + 1e-13, "heuristic {} vs exact {exact}", h.value);
        // with this many restarts at n=10 the heuristic should also be close
        assert!(h.value > 0.0);
    }

    #[test]
    fn heuristic_is_deterministic_in_seed() {
        let d = random_kernel(12, 9);
        let a = cut_norm_heuristic(&d, 8, 42);
        let b = cut_norm_heuristic(&d, 8, 42);
        assert_eq!(a, b);
    }

    #[test]
    fn limit_is_enforced() {
        let d = SignedStepKernel::new(Array2::zeros((17, 17))).unwrap();
        assert!(matches!(
            cut_norm_exact(&d, CutVariant::SubsetPair),
            Err(KernelError::BruteForceLimitExceeded { n: 17, limit: 16 })
        ));
        assert!(cut_norm_exact_with_limit(&d, CutVariant::SubsetPair, 17).is_ok());
        assert!(cut_norm_exact(&d, CutVariant::Complement).is_ok());
    }

    #[test]
    fn variant_names_round_trip() {
        for v in [CutVariant::SubsetPair, CutVariant::Complement] {
            assert_eq!(v.to_string().parse::<CutVariant>().unwrap(), v);
        }
        assert_eq!("s-complement".parse::<CutVariant>().unwrap(), CutVariant::Complement);
        assert!("frobenius".parse::<CutVariant>().is_err());
    }

    proptest! {
        /// |mean D| <= cut_ST <= ||D||_1 <= ||D||_2, each within 1e-12.
        #[test]
        fn norm_chain(n in 1usize..=12, seed in 0u64..1000) {
            let d = random_kernel(n, seed);
            let cut = cut_norm_exact(&d, CutVariant::SubsetPair).unwrap().value;
            let l1 = d.lp_norm(Lp::ONE);
            let l2 = d.lp_norm(Lp::TWO);
            prop_assert!(d.mean().abs() <= cut + 1e-12);
            prop_assert!(cut <= l1 + 1e-12);
            prop_assert!(l1 <= l2 + 1e-12);
        }

        /// The complement value is dominated by the two-subset form, and the
        /// two-subset form by the bilinear optimum.
        #[test]
        fn variant_ordering(n in 1usize..=8, seed in 0u64..500) {
            let d = random_kernel(n, seed);
            let sc = cut_norm_exact(&d, CutVariant::Complement).unwrap().value;
            let st = cut_norm_exact(&d, CutVariant::SubsetPair).unwrap().value;
            let bi = cut_norm_bilinear_exact(&d).unwrap().value;
            prop_assert!(sc <= st + 1e-12);
            prop_assert!(st <= bi + 1e-12);
        }

        /// Any heuristic output is a certified lower bound.
        #[test]
        fn heuristic_lower_bounds_exact(n in 1usize..=7, seed in 0u64..300, restarts in 1usize..6) {
            let d = random_kernel(n, seed);
            let h = cut_norm_heuristic(&d, restarts, seed ^ 0x9e37);
            let bi = cut_norm_bilinear_exact(&d).unwrap().value;
            prop_assert!(h.value <= bi + 1e-12);
        }
    }
}
