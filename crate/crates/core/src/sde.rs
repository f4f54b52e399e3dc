//! Differential-form evolution of the qubit density matrix.
//!
//! Noise arguments are interval averages of the white noise, with variance
//! `S_I/(2 dt)`. Derived quantities are frozen over the step and the fields
//! are not touched; callers advance them separately, as for the finite-step
//! updates.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bayes::update;
use crate::error::{Error, Result};
use crate::fields::{advance_fields, derived_quantities, DerivedQuantities};
use crate::model::{AmplifierMode, HybridState, MeasurementSample, MeasurementSettings, SystemParams};
use crate::rng::trajectory_rng;
use crate::C64;

const I: C64 = C64::new(0.0, 1.0);

#[derive(Clone, Copy)]
struct Qubit {
    rho11: f64,
    rho10: C64,
}

impl Qubit {
    fn of(s: &HybridState) -> Self {
        Self { rho11: s.rho11, rho10: s.rho10 }
    }

    fn add(self, d11: f64, d10: C64, h: f64) -> Self {
        Self { rho11: self.rho11 + d11 * h, rho10: self.rho10 + d10 * h }
    }

    /// Projects back onto valid density matrices.
    fn into_state(self, base: &HybridState) -> HybridState {
        let rho11 = self.rho11.clamp(0.0, 1.0);
        let rho00 = 1.0 - rho11;
        let bound = (rho00 * rho11).sqrt();
        let mut rho10 = self.rho10;
        if rho10.norm() > bound {
            rho10 *= bound / rho10.norm();
        }
        HybridState { rho00, rho11, rho10, ..*base }
    }
}

fn finite(xs: &[f64]) -> Result<()> {
    if xs.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite("noise"))
    }
}

/// Right-hand side with the signal driving the diagonal (`info`) and the
/// one driving the back-action phase (`phase_signal`, scaled by `k`).
fn rhs(q: Qubit, d: &DerivedQuantities, s_i: f64, info: f64, k: f64, phase_signal: f64, damping: f64) -> (f64, C64) {
    let rho00 = 1.0 - q.rho11;
    let d11 = q.rho11 * rho00 * 2.0 * d.delta_i / s_i * info;
    let rate = -(q.rho11 - rho00) * d.delta_i / s_i * info - damping;
    let d10 = q.rho10 * (C64::new(rate, 0.0) - I * (k * phase_signal + d.stark_s));
    (d11, d10)
}

fn centered(q: Qubit, d: &DerivedQuantities, xi: f64) -> f64 {
    (2.0 * q.rho11 - 1.0) * d.delta_i / 2.0 + xi
}

fn heun(q: Qubit, dt: f64, f: impl Fn(Qubit) -> (f64, C64)) -> Qubit {
    let (a11, a10) = f(q);
    let p = q.add(a11, a10, dt);
    let (b11, b10) = f(p);
    q.add((a11 + b11) / 2.0, (a10 + b10) / 2.0, dt)
}

/// Stratonovich phase-sensitive step (Heun predictor-corrector).
pub fn strat_step_ps(
    state: &HybridState,
    xi_i: f64,
    derived: &DerivedQuantities,
    settings: &MeasurementSettings,
    dt: f64,
) -> Result<HybridState> {
    finite(&[xi_i])?;
    let s_i = settings.spectral_density;
    let damping = derived.gamma + settings.gamma_int;
    let q = heun(Qubit::of(state), dt, |q| {
        let info = centered(q, derived, xi_i);
        rhs(q, derived, s_i, info, derived.back_action_k, info, damping)
    });
    Ok(q.into_state(state))
}

/// Stratonovich phase-preserving step (Heun predictor-corrector).
pub fn strat_step_pp(
    state: &HybridState,
    xi_i: f64,
    xi_q: f64,
    derived: &DerivedQuantities,
    settings: &MeasurementSettings,
    dt: f64,
) -> Result<HybridState> {
    finite(&[xi_i, xi_q])?;
    let s_i = settings.spectral_density;
    let damping = derived.gamma + settings.gamma_int;
    let q = heun(Qubit::of(state), dt, |q| {
        let info = centered(q, derived, xi_i);
        rhs(q, derived, s_i, info, derived.delta_i / s_i, xi_q, damping)
    });
    Ok(q.into_state(state))
}

/// Ito phase-sensitive step (Euler-Maruyama).
pub fn ito_step_ps(
    state: &HybridState,
    xi_i: f64,
    derived: &DerivedQuantities,
    settings: &MeasurementSettings,
    dt: f64,
) -> Result<HybridState> {
    finite(&[xi_i])?;
    let q = Qubit::of(state);
    let damping = derived.gamma_d + settings.gamma_int;
    let (d11, d10) = rhs(q, derived, settings.spectral_density, xi_i, derived.back_action_k, xi_i, damping);
    Ok(q.add(d11, d10, dt).into_state(state))
}

/// Ito phase-preserving step (Euler-Maruyama).
pub fn ito_step_pp(
    state: &HybridState,
    xi_i: f64,
    xi_q: f64,
    derived: &DerivedQuantities,
    settings: &MeasurementSettings,
    dt: f64,
) -> Result<HybridState> {
    finite(&[xi_i, xi_q])?;
    let q = Qubit::of(state);
    let s_i = settings.spectral_density;
    let damping = derived.gamma_d + settings.gamma_int;
    let (d11, d10) = rhs(q, derived, s_i, xi_i, derived.delta_i / s_i, xi_q, damping);
    Ok(q.add(d11, d10, dt).into_state(state))
}

/// Milstein correction for the Ito equations. With `dW = xi dt sqrt(2/S)`
/// the noise coefficients are
/// `b11 = rho11 rho00 u`, `b10 = -((2 rho11 - 1) u/2 + i v) rho10` for the
/// I channel and `b10 = -i w rho10` for the Q channel.
fn milstein_correction(q: Qubit, u: f64, v: f64, w: f64, dw_i: f64, dw_q: f64, dt: f64) -> (f64, C64) {
    let rho00 = 1.0 - q.rho11;
    let b11 = q.rho11 * rho00 * u;
    let g = C64::new((2.0 * q.rho11 - 1.0) * u / 2.0, v);
    let b10 = -g * q.rho10;
    let l_b11 = b11 * u * (1.0 - 2.0 * q.rho11);
    let l_b10 = -b11 * u * q.rho10 - g * b10;
    // Q channel: L_Q b_Q = -w^2 rho10, L_I b_Q = -i w b10
    let lq_bq = -w * w * q.rho10;
    let li_bq = -I * w * b10;
    let si = 0.5 * (dw_i * dw_i - dt);
    let sq = 0.5 * (dw_q * dw_q - dt);
    (l_b11 * si, l_b10 * si + lq_bq * sq + li_bq * dw_i * dw_q)
}

/// Ito phase-sensitive step with the Milstein correction, strong order one.
pub fn ito_milstein_step_ps(
    state: &HybridState,
    xi_i: f64,
    derived: &DerivedQuantities,
    settings: &MeasurementSettings,
    dt: f64,
) -> Result<HybridState> {
    finite(&[xi_i])?;
    let s_i = settings.spectral_density;
    let q = Qubit::of(state);
    let damping = derived.gamma_d + settings.gamma_int;
    let (d11, d10) = rhs(q, derived, s_i, xi_i, derived.back_action_k, xi_i, damping);
    let scale = (2.0 / s_i).sqrt();
    let u = derived.delta_i * scale;
    let v = derived.back_action_k * (s_i / 2.0).sqrt();
    let (c11, c10) = milstein_correction(q, u, v, 0.0, xi_i * dt * scale, 0.0, dt);
    Ok(q.add(d11, d10, dt).add(c11, c10, 1.0).into_state(state))
}

/// Ito phase-preserving step with the Milstein correction (the two noise
/// channels commute, so no Levy areas are needed).
pub fn ito_milstein_step_pp(
    state: &HybridState,
    xi_i: f64,
    xi_q: f64,
    derived: &DerivedQuantities,
    settings: &MeasurementSettings,
    dt: f64,
) -> Result<HybridState> {
    finite(&[xi_i, xi_q])?;
    let s_i = settings.spectral_density;
    let q = Qubit::of(state);
    let damping = derived.gamma_d + settings.gamma_int;
    let (d11, d10) = rhs(q, derived, s_i, xi_i, derived.delta_i / s_i, xi_q, damping);
    let scale = (2.0 / s_i).sqrt();
    let u = derived.delta_i * scale;
    let (c11, c10) = milstein_correction(q, u, 0.0, u / 2.0, xi_i * dt * scale, xi_q * dt * scale, dt);
    Ok(q.add(d11, d10, dt).add(c11, c10, 1.0).into_state(state))
}

/// Differential-form integration scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Stratonovich form, Heun predictor-corrector.
    Stratonovich,
    /// Ito form, Euler-Maruyama.
    ItoEuler,
    /// Ito form with the Milstein correction.
    ItoMilstein,
}

/// One step of `scheme` in the mode of `settings`; `xi_q` is ignored in
/// phase-sensitive mode.
pub fn step(
    scheme: Scheme,
    state: &HybridState,
    xi_i: f64,
    xi_q: f64,
    derived: &DerivedQuantities,
    settings: &MeasurementSettings,
    dt: f64,
) -> Result<HybridState> {
    match (scheme, settings.mode) {
        (Scheme::Stratonovich, AmplifierMode::PhaseSensitive) => strat_step_ps(state, xi_i, derived, settings, dt),
        (Scheme::Stratonovich, AmplifierMode::PhasePreserving) => strat_step_pp(state, xi_i, xi_q, derived, settings, dt),
        (Scheme::ItoEuler, AmplifierMode::PhaseSensitive) => ito_step_ps(state, xi_i, derived, settings, dt),
        (Scheme::ItoEuler, AmplifierMode::PhasePreserving) => ito_step_pp(state, xi_i, xi_q, derived, settings, dt),
        (Scheme::ItoMilstein, AmplifierMode::PhaseSensitive) => ito_milstein_step_ps(state, xi_i, derived, settings, dt),
        (Scheme::ItoMilstein, AmplifierMode::PhasePreserving) => {
            ito_milstein_step_pp(state, xi_i, xi_q, derived, settings, dt)
        }
    }
}

/// Mean endpoint distance between a scheme and the finite-step update
/// driven by the same noise, for several step sizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceStudy {
    pub scheme: Scheme,
    pub dts: Vec<f64>,
    pub errors: Vec<f64>,
    /// Least-squares slope of `ln error` against `ln dt`.
    pub order: f64,
}

/// Slope of `ln error` against `ln dt`.
pub fn fit_order(errors: &[f64], dts: &[f64]) -> f64 {
    let n = dts.len() as f64;
    let x: Vec<f64> = dts.iter().map(|d| d.ln()).collect();
    let y: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let num: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let den: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    num / den
}

/// Runs `scheme` next to the finite-step update on shared noise. The noise
/// is drawn on the finest step and averaged up to coarser ones, so all
/// step sizes see the same underlying path. Step sizes must be integer
/// multiples of the smallest one.
#[allow(clippy::too_many_arguments)]
pub fn strong_convergence(
    params: &SystemParams,
    initial: &HybridState,
    settings: &MeasurementSettings,
    scheme: Scheme,
    dts: &[f64],
    t_end: f64,
    paths: usize,
    seed: u64,
) -> Result<ConvergenceStudy> {
    let fine = dts.iter().copied().fold(f64::INFINITY, f64::min);
    let ratios: Vec<usize> = dts.iter().map(|d| (d / fine).round() as usize).collect();
    let commensurate = dts.iter().zip(&ratios).all(|(d, &r)| ((d / fine) - r as f64).abs() < 1e-9 * r as f64);
    if dts.len() < 2 || !(fine > 0.0) || !commensurate {
        return Err(Error::Config(vec![crate::error::Violation::new(
            "dts",
            "need two or more step sizes, each a multiple of the smallest",
        )]));
    }
    let fine_steps = (t_end / fine).round() as usize;
    let s_i = settings.spectral_density;
    let pp = settings.mode == AmplifierMode::PhasePreserving;
    let per_path: Vec<Result<Vec<f64>>> = (0..paths)
        .into_par_iter()
        .map(|path| {
            let mut rng = trajectory_rng(seed, path as u64);
            let noise: Vec<[f64; 2]> = (0..fine_steps)
                .map(|_| [rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal)])
                .collect();
            ratios
                .iter()
                .zip(dts)
                .map(|(&ratio, &dt)| {
                    let (mut exact, mut approx) = (*initial, *initial);
                    for (k, block) in noise.chunks_exact(ratio).enumerate() {
                        // interval average of white noise with variance S/(2 fine) per fine step
                        let avg = |c: usize| block.iter().map(|x| x[c]).sum::<f64>() / ratio as f64 * (s_i / (2.0 * fine)).sqrt();
                        let (xi_i, xi_q) = (avg(0), avg(1));
                        let t = k as f64 * dt;
                        let de = derived_quantities(&exact, params, settings, t);
                        let da = derived_quantities(&approx, params, settings, t);
                        let info = (2.0 * exact.rho11 - 1.0) * de.delta_i / 2.0 + xi_i;
                        let sample = MeasurementSample::new(info, pp.then_some(xi_q), dt, s_i)?;
                        exact = update(&advance_fields(&exact, params, t, dt), &sample, &de, settings)?;
                        let next = step(scheme, &approx, xi_i, xi_q, &da, settings, dt)?;
                        approx = advance_fields(&next, params, t, dt);
                    }
                    Ok((exact.rho11 - approx.rho11).abs() + (exact.rho10 - approx.rho10).norm())
                })
                .collect()
        })
        .collect();
    let mut errors = vec![0.0; dts.len()];
    for p in per_path {
        for (e, x) in errors.iter_mut().zip(p?) {
            *e += x / paths as f64;
        }
    }
    Ok(ConvergenceStudy { scheme, dts: dts.to_vec(), order: fit_order(&errors, dts), errors })
}
