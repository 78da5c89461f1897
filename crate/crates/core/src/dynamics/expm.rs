//! Dense matrix exponential by Pade approximation with scaling and squaring,
//! plus the augmented-matrix trick for the exponential's running integral.
//!
//! Degree selection follows the usual theta thresholds for double precision:
//! the smallest degree whose backward-error bound covers the input's 1-norm
//! is used, and only when even degree 13 does not suffice is the matrix
//! scaled by a power of two and the result squared back. Linear solves use
//! in-place LU with partial pivoting; no external linear-algebra backend.

use ndarray::Array2;

use super::DynamicsError;

/// Backward-error thresholds theta_m for m = 3, 5, 7, 9, 13.
const THETA: [f64; 5] = [
    1.495585217958292e-2,
    2.539398330063230e-1,
    9.504178996162932e-1,
    2.097847961257068,
    5.371920351148152,
];

const B3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const B5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const B7: [f64; 8] = [17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0];
const B9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const B13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

fn one_norm(a: &Array2<f64>) -> f64 {
    let mut best = 0.0f64;
    for j in 0..a.ncols() {
        best = best.max(a.column(j).iter().map(|v| v.abs()).sum());
    }
    best
}

fn row_major_vec(a: Array2<f64>) -> Vec<f64> {
    let a = if a.is_standard_layout() { a } else { a.as_standard_layout().into_owned() };
    a.into_raw_vec_and_offset().0
}

/// Solve A X = B by LU with partial pivoting. A and B are consumed; B is
/// overwritten with the solution.
fn lu_solve(a: Array2<f64>, b: Array2<f64>) -> Result<Array2<f64>, DynamicsError> {
    let n = a.nrows();
    let m = b.ncols();
    let mut a = row_major_vec(a);
    let mut x = row_major_vec(b);
    for k in 0..n {
        let mut piv = k;
        let mut max = a[k * n + k].abs();
        for i in (k + 1)..n {
            let v = a[i * n + k].abs();
            if v > max {
                max = v;
                piv = i;
            }
        }
        if !(max > 0.0) || !max.is_finite() {
            return Err(DynamicsError::SingularMatrix);
        }
        if piv != k {
            for j in 0..n {
                a.swap(k * n + j, piv * n + j);
            }
            for j in 0..m {
                x.swap(k * m + j, piv * m + j);
            }
        }
        let pivot = a[k * n + k];
        for i in (k + 1)..n {
            let f = a[i * n + k] / pivot;
            if f != 0.0 {
                for j in (k + 1)..n {
                    a[i * n + j] -= f * a[k * n + j];
                }
                for j in 0..m {
                    x[i * m + j] -= f * x[k * m + j];
                }
            }
        }
    }
    for k in (0..n).rev() {
        let pivot = a[k * n + k];
        for j in 0..m {
            let mut s = x[k * m + j];
            for i in (k + 1)..n {
                s -= a[k * n + i] * x[i * m + j];
            }
            x[k * m + j] = s / pivot;
        }
    }
    Ok(Array2::from_shape_vec((n, m), x).expect("shape preserved"))
}

/// Evaluate the degree-m Pade numerator split U (odd powers) and V (even
/// powers) for m in {3, 5, 7, 9}; powers[k] holds A^(2(k+1)).
fn pade_small(a: &Array2<f64>, powers: &[Array2<f64>], b: &[f64]) -> (Array2<f64>, Array2<f64>) {
    let n = a.nrows();
    let eye = Array2::eye(n);
    let mut u = &eye * b[1];
    let mut v = &eye * b[0];
    for (k, p) in powers.iter().enumerate() {
        u = u + p * b[2 * k + 3];
        v = v + p * b[2 * k + 2];
    }
    (a.dot(&u), v)
}

fn pade13(a: &Array2<f64>, a2: &Array2<f64>, a4: &Array2<f64>, a6: &Array2<f64>) -> (Array2<f64>, Array2<f64>) {
    let n = a.nrows();
    let eye: Array2<f64> = Array2::eye(n);
    let b = &B13;
    let u_hi = a6 * b[13] + &(a4 * b[11]) + &(a2 * b[9]);
    let u_lo = a6 * b[7] + &(a4 * b[5]) + &(a2 * b[3]) + &(&eye * b[1]);
    let u = a.dot(&(a6.dot(&u_hi) + u_lo));
    let v_hi = a6 * b[12] + &(a4 * b[10]) + &(a2 * b[8]);
    let v = a6.dot(&v_hi) + a6 * b[6] + &(a4 * b[4]) + &(a2 * b[2]) + &(&eye * b[0]);
    (u, v)
}

/// exp(A) for a square matrix.
pub fn expm(a: &Array2<f64>) -> Result<Array2<f64>, DynamicsError> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "expm needs a square matrix");
    if n == 0 {
        return Ok(Array2::zeros((0, 0)));
    }
    let norm = one_norm(a);
    if !norm.is_finite() {
        return Err(DynamicsError::SingularMatrix);
    }

    let a2 = a.dot(a);
    if norm <= THETA[2] {
        let (u, v) = if norm <= THETA[0] {
            pade_small(a, &[a2], &B3)
        } else if norm <= THETA[1] {
            let a4 = a2.dot(&a2);
            pade_small(a, &[a2, a4], &B5)
        } else {
            let a4 = a2.dot(&a2);
            let a6 = a2.dot(&a4);
            pade_small(a, &[a2, a4, a6], &B7)
        };
        return lu_solve(&v - &u, v + u);
    }
    let a4 = a2.dot(&a2);
    if norm <= THETA[3] {
        let a6 = a2.dot(&a4);
        let a8 = a4.dot(&a4);
        let (u, v) = pade_small(a, &[a2, a4, a6, a8], &B9);
        return lu_solve(&v - &u, v + u);
    }

    let s = if norm <= THETA[4] {
        0
    } else {
        (norm / THETA[4]).log2().ceil() as u32
    };
    let scale = 0.5f64.powi(s as i32);
    let a_s = a * scale;
    let a2s = &a2 * (scale * scale);
    let a4s = &a4 * (scale * scale * scale * scale);
    let a6s = a2s.dot(&a4s);
    let (u, v) = pade13(&a_s, &a2s, &a4s, &a6s);
    let mut x = lu_solve(&v - &u, v + u)?;
    for _ in 0..s {
        x = x.dot(&x);
    }
    Ok(x)
}

/// E = exp(h M) together with J = integral of exp(tau M) for tau in [0, h],
/// from one exponential of the block matrix [[h M, h I], [0, 0]]: its
/// top-left block is E and its top-right block is J.
pub fn expm_with_integral(m: &Array2<f64>, h: f64) -> Result<(Array2<f64>, Array2<f64>), DynamicsError> {
    let n = m.nrows();
    assert_eq!(n, m.ncols(), "expm_with_integral needs a square matrix");
    let mut aug = Array2::zeros((2 * n, 2 * n));
    for i in 0..n {
        for j in 0..n {
            aug[[i, j]] = h * m[[i, j]];
        }
        aug[[i, n + i]] = h;
    }
    let e = expm(&aug)?;
    let mut top_left = Array2::zeros((n, n));
    let mut top_right = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            top_left[[i, j]] = e[[i, j]];
            top_right[[i, j]] = e[[i, n + j]];
        }
    }
    Ok((top_left, top_right))
}
