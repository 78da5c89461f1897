//! Gauss-Legendre quadrature for cell averages and degree integrals.
//!
//! All kernels in the registry are smooth except for the ridge of
//! `min(x, y)` along the diagonal, so a fixed 10-point rule per panel is
//! far beyond the accuracy the cell averages need. Diagonal cells are
//! integrated as two triangles through a Duffy map, which keeps the
//! integrand smooth on each piece; 1-d integrals split at the evaluation
//! point for the same reason.

/// 10-point Gauss-Legendre nodes on [-1, 1].
const GL_NODES: [f64; 10] = [
    -0.9739065285171717,
    -0.8650633666889845,
    -0.6794095682990244,
    -0.4333953941292472,
    -0.1488743389816312,
    0.1488743389816312,
    0.4333953941292472,
    0.6794095682990244,
    0.8650633666889845,
    0.9739065285171717,
];

/// Weights matching `GL_NODES`.
const GL_WEIGHTS: [f64; 10] = [
    0.0666713443086881,
    0.1494513491505806,
    0.2190863625159820,
    0.2692667193099963,
    0.2955242247147529,
    0.2955242247147529,
    0.2692667193099963,
    0.2190863625159820,
    0.1494513491505806,
    0.0666713443086881,
];

/// Composite Gauss-Legendre integral of `f` over [a, b] with `panels` panels.
pub(crate) fn integrate_1d(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    if b <= a {
        return 0.0;
    }
    let h = (b - a) / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let lo = a + p as f64 * h;
        let mid = lo + 0.5 * h;
        let half = 0.5 * h;
        let mut s = 0.0;
        for (x, w) in GL_NODES.iter().zip(GL_WEIGHTS.iter()) {
            s += w * f(mid + half * x);
        }
        total += s * half;
    }
    total
}

/// Tensor-product Gauss-Legendre integral over the rectangle
/// [x0, x1] x [y0, y1] in a single panel.
pub(crate) fn integrate_rect(f: &impl Fn(f64, f64) -> f64, x0: f64, x1: f64, y0: f64, y1: f64) -> f64 {
    let (mx, hx) = (0.5 * (x0 + x1), 0.5 * (x1 - x0));
    let (my, hy) = (0.5 * (y0 + y1), 0.5 * (y1 - y0));
    let mut total = 0.0;
    for (xi, wx) in GL_NODES.iter().zip(GL_WEIGHTS.iter()) {
        let x = mx + hx * xi;
        let mut row = 0.0;
        for (yi, wy) in GL_NODES.iter().zip(GL_WEIGHTS.iter()) {
            row += wy * f(x, my + hy * yi);
        }
        total += wx * row;
    }
    total * hx * hy
}

/// Integral over the square (a, b)^2 split into the two triangles on either
/// side of the diagonal y = x, each mapped by the Duffy transform
/// (u, v) -> (a + h u, a + h u v) with Jacobian h^2 u. Exactly the tool for
/// kernels with a ridge along the diagonal; harmless (still spectral) for
/// smooth ones.
pub(crate) fn integrate_square_split_diagonal(f: &impl Fn(f64, f64) -> f64, a: f64, b: f64) -> f64 {
    let h = b - a;
    let mut total = 0.0;
    for (ui, wu) in GL_NODES.iter().zip(GL_WEIGHTS.iter()) {
        let u = 0.5 + 0.5 * ui;
        let x = a + h * u;
        let mut inner = 0.0;
        for (vi, wv) in GL_NODES.iter().zip(GL_WEIGHTS.iter()) {
            let v = 0.5 + 0.5 * vi;
            let y = a + h * u * v;
            // lower triangle (y <= x) plus its mirror image
            inner += wv * (f(x, y) + f(y, x));
        }
        total += wu * u * inner;
    }
    // 0.25 = product of the two [-1,1] -> [0,1] interval halvings
    total * h * h * 0.25
}
