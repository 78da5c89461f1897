//! Cross-checks of the kernel layer against oracles that share no code with
//! the implementation: midpoint Riemann sums on the closed-form kernels,
//! hand-derived integrals, and the generative parameters of sampled graphs.

use graphon_rd::gridfn::Lp;
use graphon_rd::kernel::{
    cut_norm_exact, degree, lp_kernel_distance, quotient_step, sample_w_random, AnalyticFamily,
    AnalyticGraphon, CutVariant, GraphonHandle, SeparableProfile, StepGraphon,
};

fn analytic(family: AnalyticFamily) -> AnalyticGraphon {
    AnalyticGraphon::new(family).expect("families in their documented ranges")
}

/// Midpoint Riemann average of `f` over the cell [i/n,(i+1)/n] x [j/n,(j+1)/n],
/// k points per axis. Deliberately naive: no diagonal splitting, no reuse of
/// the library quadrature.
fn riemann_cell_average(f: &dyn Fn(f64, f64) -> f64, n: usize, i: usize, j: usize, k: usize) -> f64 {
    let nf = n as f64;
    let h = 1.0 / (nf * k as f64);
    let (x0, y0) = (i as f64 / nf, j as f64 / nf);
    let mut sum = 0.0;
    for a in 0..k {
        let x = x0 + (a as f64 + 0.5) * h;
        for b in 0..k {
            sum += f(x, y0 + (b as f64 + 0.5) * h);
        }
    }
    sum / (k * k) as f64
}

#[test]
fn quotient_cells_match_midpoint_riemann_sums() {
    let w = analytic(AnalyticFamily::SmoothCosine { c: 0.7 });
    let q = quotient_step(&w, 5).unwrap();
    let f = |x: f64, y: f64| w.eval(x, y);
    for i in 0..5 {
        for j in 0..5 {
            let oracle = riemann_cell_average(&f, 5, i, j, 240);
            assert!(
                (q.entry(i, j) - oracle).abs() < 1e-5,
                "cell ({i},{j}): quotient {} vs riemann {oracle}",
                q.entry(i, j)
            );
        }
    }

    // min(x,y) has a kink through the diagonal cells; the quadrature must
    // handle it without smoothing it away.
    let m = analytic(AnalyticFamily::MinKernel { c: 1.0 });
    let qm = quotient_step(&m, 4).unwrap();
    let fm = |x: f64, y: f64| x.min(y);
    for i in 0..4 {
        for j in 0..4 {
            let oracle = riemann_cell_average(&fm, 4, i, j, 300);
            assert!(
                (qm.entry(i, j) - oracle).abs() < 1e-4,
                "cell ({i},{j}): quotient {} vs riemann {oracle}",
                qm.entry(i, j)
            );
        }
    }
}

#[test]
fn min_kernel_total_integral_is_one_third() {
    // Integrating min(x,y) over the unit square by hand:
    //   2 * int_0^1 int_0^x y dy dx = 2 * int_0^1 x^2/2 dx = 1/3.
    let w = analytic(AnalyticFamily::MinKernel { c: 1.0 });
    let q = quotient_step(&w, 256).unwrap();
    let mean = q.values().sum() / (256.0 * 256.0);
    assert!((mean - 1.0 / 3.0).abs() < 1e-9, "integral {mean}");
}

#[test]
fn degrees_match_closed_forms() {
    // d(x) = int_0^1 min(x,y) dy = x - x^2/2.
    let m = GraphonHandle::from(analytic(AnalyticFamily::MinKernel { c: 1.0 }));
    for x in [0.1, 0.37, 0.5, 0.93] {
        let d = degree(&m, x).unwrap();
        assert!((d - (x - x * x / 2.0)).abs() < 1e-6, "min degree at {x}: {d}");
    }

    // The cosine integrates away over a full period: d(x) = c/2 for every x.
    let w = GraphonHandle::from(analytic(AnalyticFamily::SmoothCosine { c: 0.8 }));
    for x in [0.05, 0.41, 0.77] {
        let d = degree(&w, x).unwrap();
        assert!((d - 0.4).abs() < 1e-6, "cosine degree at {x}: {d}");
    }

    // Separable product: d(x) = scale * x * int y dy = scale * x / 2.
    let s = GraphonHandle::from(analytic(AnalyticFamily::SeparableProduct {
        scale: 2.0,
        profile: SeparableProfile::Identity,
    }));
    for x in [0.2, 0.9] {
        let d = degree(&s, x).unwrap();
        assert!((d - x).abs() < 1e-6, "separable degree at {x}: {d}");
    }
}

/// True L2 distance between the analytic kernel and its n-cell quotient,
/// computed on an M x M midpoint grid with the step value looked up by cell.
fn l2_distance_to_quotient_oracle(w: &AnalyticGraphon, q: &StepGraphon, m: usize) -> f64 {
    let n = q.n();
    let mut sum2 = 0.0;
    for a in 0..m {
        let x = (a as f64 + 0.5) / m as f64;
        let i = ((x * n as f64).ceil() as usize).clamp(1, n) - 1;
        for b in 0..m {
            let y = (b as f64 + 0.5) / m as f64;
            let j = ((y * n as f64).ceil() as usize).clamp(1, n) - 1;
            let d = w.eval(x, y) - q.entry(i, j);
            sum2 += d * d;
        }
    }
    (sum2 / (m * m) as f64).sqrt()
}

#[test]
fn quotient_l2_error_shrinks_under_refinement() {
    let w = analytic(AnalyticFamily::SmoothCosine { c: 1.0 });
    let mut previous = f64::INFINITY;
    for n in [2usize, 4, 8, 16] {
        let q = quotient_step(&w, n).unwrap();
        let err = l2_distance_to_quotient_oracle(&w, &q, 800);
        assert!(
            err < 0.75 * previous,
            "n={n}: oracle distance {err} did not shrink from {previous}"
        );
        previous = err;
    }
    // At n=16 the averaged kernel is close in the mean-square sense.
    assert!(previous < 0.1, "n=16 residual {previous}");
}

#[test]
fn step_distance_projects_the_analytic_argument() {
    // The library Lp distance between an analytic kernel and a step kernel
    // first averages the analytic one onto the step partition. Against its
    // own quotient that projection gives exactly zero, even though the true
    // L2 distance is macroscopic; anyone wanting the unprojected distance
    // must refine first. Pin both facts.
    let w = analytic(AnalyticFamily::SmoothCosine { c: 1.0 });
    let q = quotient_step(&w, 4).unwrap();
    let projected = lp_kernel_distance(
        &GraphonHandle::from(w.clone()),
        &GraphonHandle::from(q.clone()),
        Lp::TWO,
    )
    .unwrap();
    assert!(projected.abs() < 1e-12, "projected distance {projected}");
    let true_l2 = l2_distance_to_quotient_oracle(&w, &q, 600);
    assert!(true_l2 > 0.1, "true distance {true_l2}");
}

#[test]
fn sampled_graphs_match_generative_density() {
    let w = GraphonHandle::from(analytic(AnalyticFamily::Constant { c: 0.5 }));
    for seed in 0..5u64 {
        let g = sample_w_random(&w, 64, seed).unwrap();
        let n = 64usize;
        let offdiag: f64 = g.values().sum(); // diagonal is zero by construction
        let density = offdiag / (n * (n - 1)) as f64;
        assert!(
            (density - 0.5).abs() < 0.06,
            "seed {seed}: edge density {density}"
        );
        for i in 0..n {
            assert_eq!(g.entry(i, i), 0.0);
            for j in 0..n {
                assert_eq!(g.entry(i, j), g.entry(j, i));
                assert!(g.entry(i, j) == 0.0 || g.entry(i, j) == 1.0);
            }
        }
    }
}

#[test]
fn sampled_graphs_approach_the_kernel_in_cut_norm() {
    // d_cut(G_n, W) -> 0 along n; medians over seeds at n=8 vs n=16, with
    // the exact subset-pair enumeration as the evaluator.
    let w = analytic(AnalyticFamily::Constant { c: 0.5 });
    let handle = GraphonHandle::from(w.clone());
    let median_cut = |n: usize| -> f64 {
        let q = quotient_step(&w, n).unwrap();
        let mut vals: Vec<f64> = (0..9u64)
            .map(|seed| {
                let g = sample_w_random(&handle, n, 1000 + seed).unwrap();
                let d = g.difference(&q).unwrap();
                cut_norm_exact(&d, CutVariant::SubsetPair).unwrap().value
            })
            .collect();
        vals.sort_by(f64::total_cmp);
        vals[vals.len() / 2]
    };
    let m8 = median_cut(8);
    let m16 = median_cut(16);
    assert!(m16 < m8, "cut distance medians: n=8 {m8}, n=16 {m16}");
    assert!(m8 < 0.45, "n=8 median {m8} unreasonably large");
}
