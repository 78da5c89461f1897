//! Pathwise diagnostics that tie a finished particle trajectory back to the
//! deterministic dynamics it approximates.
//!
//! Writing X for the density path and L for the migration operator of the
//! kernel, the compensated increment
//!
//!   Z(t) = X(t) − X(0) − ∫ L X(s) ds − ∫ Φ(X(s)) ds
//!
//! is a martingale whose size shrinks like ell^{-1/2}, and the mild-form
//! analogue
//!
//!   Y(t) = X(t) − e^{tL} X(0) − ∫ e^{(t−s)L} Φ(X(s)) ds
//!
//! is the stochastic convolution driving the law-of-large-numbers error.
//! Both integrals are computed exactly: the path is piecewise constant, so
//! each inter-event interval contributes in closed form. For Y that closed
//! form needs the pair (e^{ΔL}, ∫_0^Δ e^{τL} dτ) per distinct interval
//! length, cached by the exact bit pattern of Δ.

use std::collections::HashMap;

use ndarray::{Array1, Array2};

use crate::dynamics::expm::expm_with_integral;
use crate::dynamics::{apply_l, build_l_matrix, ReactionTerm, SEMIGROUP_MATRIX_CAP};
use crate::gridfn::GridFunction;
use crate::kernel::StepGraphon;
use crate::particles::{ParticleError, ParticleTrajectory};
use crate::dynamics::{DynamicsError, ScalarFamily};

fn check_dims(traj: &ParticleTrajectory, g: &StepGraphon) -> Result<(), ParticleError> {
    if g.n() != traj.n() {
        return Err(ParticleError::DimensionMismatch { expected: g.n(), got: traj.n() });
    }
    Ok(())
}

/// The reaction must be exactly the birth–death difference the trajectory
/// was simulated with; anything else makes Z meaningless as a martingale.
fn check_family(phi: &ReactionTerm, traj: &ParticleTrajectory) -> Result<(), ParticleError> {
    let ok = match phi {
        ReactionTerm::BirthDeath { birth, death } => {
            *birth == traj.birth() && *death == traj.death()
        }
        ReactionTerm::Zero => traj.birth().rate() == 0.0 && traj.death().rate() == 0.0,
        _ => false,
    };
    if ok {
        Ok(())
    } else {
        Err(ParticleError::FamilyMismatch(format!(
            "phi = {phi} but the trajectory was simulated with birth {} and death {}",
            traj.birth(),
            traj.death()
        )))
    }
}

/// Constancy intervals of the path restricted to [0, t]: (length, counts).
fn intervals_to(
    traj: &ParticleTrajectory,
    t: f64,
) -> Result<Vec<(f64, Vec<u64>)>, ParticleError> {
    let mut out = Vec::with_capacity(traj.events().len() + 1);
    traj.for_each_interval(t, |a, b, counts| out.push((b - a, counts.to_vec())))?;
    Ok(out)
}

/// Compensated increment Z(t) = X(t) − X(0) − ∫ (L X + Φ(X)) ds with the
/// time integral summed exactly over inter-event intervals.
pub fn martingale_residual_z(
    traj: &ParticleTrajectory,
    g: &StepGraphon,
    phi: &ReactionTerm,
    t: f64,
) -> Result<GridFunction, ParticleError> {
    check_dims(traj, g)?;
    check_family(phi, traj)?;
    let n = traj.n();
    let ell = traj.ell();
    let mut integral = vec![0.0f64; n];
    for (len, counts) in intervals_to(traj, t)? {
        let x = GridFunction::new(counts.iter().map(|m| *m as f64 / ell).collect())?;
        let lx = apply_l(g, &x)?;
        let px = phi.apply_grid(&x)?;
        for j in 0..n {
            integral[j] += len * (lx.values()[j] + px.values()[j]);
        }
    }
    let xt = traj.density_at(t)?;
    let x0 = traj.initial().density();
    let z = (0..n)
        .map(|j| xt.values()[j] - x0.values()[j] - integral[j])
        .collect();
    Ok(GridFunction::new(z)?)
}

/// Stochastic convolution Y(t) = X(t) − e^{tL}X(0) − ∫ e^{(t−s)L}Φ(X(s)) ds.
///
/// The deterministic part is accumulated by the recurrence
/// V ← e^{ΔL} V + (∫_0^Δ e^{τL} dτ) Φ(X) over the constancy intervals, which
/// telescopes into exactly the mild-form right-hand side at time t.
pub fn stochastic_convolution_y(
    traj: &ParticleTrajectory,
    g: &StepGraphon,
    phi: &ReactionTerm,
    t: f64,
) -> Result<GridFunction, ParticleError> {
    check_dims(traj, g)?;
    let n = traj.n();
    if n > SEMIGROUP_MATRIX_CAP {
        return Err(DynamicsError::MatrixTooLarge { n, cap: SEMIGROUP_MATRIX_CAP }.into());
    }
    let ell = traj.ell();
    let m = build_l_matrix(g);
    let mut cache: HashMap<u64, (Array2<f64>, Array2<f64>)> = HashMap::new();
    let mut v = Array1::from(traj.initial().density().values().to_vec());
    for (len, counts) in intervals_to(traj, t)? {
        let (e, j) = match cache.entry(len.to_bits()) {
            std::collections::hash_map::Entry::Occupied(o) => o.into_mut(),
            std::collections::hash_map::Entry::Vacant(slot) => {
                slot.insert(expm_with_integral(&m, len)?)
            }
        };
        let x = GridFunction::new(counts.iter().map(|c| *c as f64 / ell).collect())?;
        let px = Array1::from(phi.apply_grid(&x)?.into_values());
        v = e.dot(&v) + j.dot(&px);
    }
    let xt = traj.density_at(t)?;
    let y = (0..n).map(|k| xt.values()[k] - v[k]).collect();
    Ok(GridFunction::new(y)?)
}

/// Observed vs compensated quadratic variation of the count at one node.
///
/// Every event touching node k moves its count by exactly one, so the
/// observed variation is the number of such events over the whole
/// trajectory. The compensator integrates the total jump intensity at k:
/// migrations in and out, (1/n) Σ_{j≠k} A[k][j] (m_j + m_k), plus both
/// reaction channels. For a faithful simulation the two agree to the
/// fluctuation scale.
pub fn quadratic_variation_check(
    traj: &ParticleTrajectory,
    g: &StepGraphon,
    k: usize,
) -> Result<(f64, f64), ParticleError> {
    check_dims(traj, g)?;
    let n = traj.n();
    if k >= n {
        return Err(ParticleError::NodeOutOfRange { k, n });
    }
    let ell = traj.ell();
    let observed = traj.events().iter().filter(|ev| ev.kind.touches(k)).count() as f64;
    let mut compensator = 0.0f64;
    traj.for_each_interval(traj.horizon(), |a, b, counts| {
        let mk = counts[k] as f64;
        let mut flux = 0.0;
        for j in 0..n {
            if j != k {
                flux += g.entry(k, j) * (counts[j] as f64 + mk);
            }
        }
        let x = mk / ell;
        let rate = flux / n as f64 + ell * (traj.birth().eval(x) + traj.death().eval(x));
        compensator += (b - a) * rate;
    })?;
    Ok((observed, compensator))
}

/// The generator of the count process applied to the identity observable:
/// coordinate j is (1/n) Σ_i A[i][j](m_i − m_j) + ell (b − d)(m_j / ell).
/// Dividing by ell recovers L(density) + Φ(density) exactly, which is the
/// consistency identity tying the jump rates to the limiting dynamics.
pub fn generator_apply(
    g: &StepGraphon,
    birth: ScalarFamily,
    death: ScalarFamily,
    m: &[u64],
    ell: f64,
) -> Result<Vec<f64>, ParticleError> {
    let n = g.n();
    if m.len() != n {
        return Err(ParticleError::DimensionMismatch { expected: n, got: m.len() });
    }
    if !(ell > 0.0) || !ell.is_finite() {
        return Err(ParticleError::InvalidScale { ell });
    }
    let mut out = vec![0.0f64; n];
    for j in 0..n {
        let mj = m[j] as f64;
        let mut drift = 0.0;
        for i in 0..n {
            drift += g.entry(i, j) * (m[i] as f64 - mj);
        }
        let x = mj / ell;
        out[j] = drift / n as f64 + ell * (birth.eval(x) - death.eval(x));
    }
    Ok(out)
}
