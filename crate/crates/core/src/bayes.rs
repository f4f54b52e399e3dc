//! Finite-step quantum Bayesian updates for phase-sensitive and
//! phase-preserving amplification, record sampling, and the
//! ensemble-averaged step.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::coherent::inner_product;
use crate::error::{Error, Result};
use crate::fields::DerivedQuantities;
use crate::model::{AmplifierMode, HybridState, MeasurementSample, MeasurementSettings};
use crate::C64;

fn normal<R: Rng + ?Sized>(rng: &mut R, mean: f64, variance: f64) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    mean + variance.sqrt() * z
}

/// Centered informational signal drawn from the two-branch mixture.
fn draw_informational<R: Rng + ?Sized>(state: &HybridState, delta_i: f64, variance: f64, rng: &mut R) -> f64 {
    let sign = if rng.random::<f64>() < state.rho11 { 1.0 } else { -1.0 };
    normal(rng, sign * delta_i / 2.0, variance)
}

/// Samples the measured-quadrature result over one interval.
pub fn sample_record_ps<R: Rng + ?Sized>(
    state: &HybridState,
    derived: &DerivedQuantities,
    settings: &MeasurementSettings,
    dt: f64,
    rng: &mut R,
) -> Result<MeasurementSample> {
    let variance = settings.spectral_density / (2.0 * dt);
    let i = draw_informational(state, derived.delta_i, variance, rng);
    MeasurementSample::new(i, None, dt, settings.spectral_density)
}

/// Samples both quadratures of a phase-preserving record over one interval.
pub fn sample_record_pp<R: Rng + ?Sized>(
    state: &HybridState,
    derived: &DerivedQuantities,
    settings: &MeasurementSettings,
    dt: f64,
    rng: &mut R,
) -> Result<MeasurementSample> {
    if settings.mode != AmplifierMode::PhasePreserving {
        return Err(Error::WrongMode("phase-preserving"));
    }
    let variance = settings.spectral_density / (2.0 * dt);
    let i = draw_informational(state, derived.delta_i, variance, rng);
    let q = normal(rng, 0.0, variance);
    MeasurementSample::new(i, Some(q), dt, settings.spectral_density)
}

/// Samples according to the configured amplifier mode.
pub fn sample_record<R: Rng + ?Sized>(
    state: &HybridState,
    derived: &DerivedQuantities,
    settings: &MeasurementSettings,
    dt: f64,
    rng: &mut R,
) -> Result<MeasurementSample> {
    match settings.mode {
        AmplifierMode::PhaseSensitive => sample_record_ps(state, derived, settings, dt, rng),
        AmplifierMode::PhasePreserving => sample_record_pp(state, derived, settings, dt, rng),
    }
}

/// Multiplies `rho11/rho00` by `e^{log_ratio}` in the log domain, rescales
/// the coherence to match, then applies `e^{-damping - i phase}`.
pub(crate) fn bayes_kernel(state: &HybridState, log_ratio: f64, phase: f64, damping: f64) -> HybridState {
    let lw0 = state.rho00.ln() - log_ratio / 2.0;
    let lw1 = state.rho11.ln() + log_ratio / 2.0;
    let m = lw0.max(lw1);
    let ln_norm = m + ((lw0 - m).exp() + (lw1 - m).exp()).ln();
    let (rho00, rho11) = if lw1 >= lw0 {
        let p0 = (lw0 - ln_norm).exp();
        (p0, 1.0 - p0)
    } else {
        let p1 = (lw1 - ln_norm).exp();
        (1.0 - p1, p1)
    };
    let rho10 = state.rho10 * C64::from_polar((-ln_norm - damping).exp(), -phase);
    HybridState { rho00, rho11, rho10, ..*state }
}

fn check_finite(sample: &MeasurementSample) -> Result<()> {
    if sample.i_bar.is_finite() && sample.q_bar.is_none_or(f64::is_finite) && sample.dt > 0.0 {
        Ok(())
    } else {
        Err(Error::NonFinite("measurement sample"))
    }
}

/// Phase-sensitive update over one interval.
pub fn update_ps(
    state: &HybridState,
    sample: &MeasurementSample,
    derived: &DerivedQuantities,
    settings: &MeasurementSettings,
) -> Result<HybridState> {
    check_finite(sample)?;
    let dt = sample.dt;
    let log_ratio = sample.i_bar * derived.delta_i / sample.variance;
    let phase = derived.back_action_k * sample.i_bar * dt + derived.stark_s * dt;
    let damping = (derived.gamma + settings.gamma_int) * dt;
    Ok(bayes_kernel(state, log_ratio, phase, damping))
}

/// Phase-preserving update over one interval.
pub fn update_pp(
    state: &HybridState,
    sample: &MeasurementSample,
    derived: &DerivedQuantities,
    settings: &MeasurementSettings,
) -> Result<HybridState> {
    check_finite(sample)?;
    let q = sample.q_bar.ok_or(Error::Record("phase-preserving update needs a Q sample".into()))?;
    let dt = sample.dt;
    let log_ratio = sample.i_bar * derived.delta_i / sample.variance;
    let phase = q * derived.delta_i / (2.0 * sample.variance) + derived.stark_s * dt;
    let damping = (derived.gamma + settings.gamma_int) * dt;
    Ok(bayes_kernel(state, log_ratio, phase, damping))
}

/// Update according to the configured amplifier mode.
pub fn update(
    state: &HybridState,
    sample: &MeasurementSample,
    derived: &DerivedQuantities,
    settings: &MeasurementSettings,
) -> Result<HybridState> {
    match settings.mode {
        AmplifierMode::PhaseSensitive => update_ps(state, sample, derived, settings),
        AmplifierMode::PhasePreserving => update_pp(state, sample, derived, settings),
    }
}

/// Record-averaged evolution over one interval.
pub fn ensemble_step(
    state: &HybridState,
    derived: &DerivedQuantities,
    settings: &MeasurementSettings,
    dt: f64,
) -> HybridState {
    let rate = derived.gamma_d + settings.gamma_int;
    HybridState {
        rho10: state.rho10 * C64::from_polar((-rate * dt).exp(), -derived.stark_s * dt),
        ..*state
    }
}

/// Qubit density matrix with the resonator traced out.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QubitDensityMatrix {
    pub rho00: f64,
    pub rho11: f64,
    pub rho10: C64,
}

pub fn qubit_only_reduce(state: &HybridState) -> QubitDensityMatrix {
    QubitDensityMatrix {
        rho00: state.rho00,
        rho11: state.rho11,
        rho10: state.rho10 * inner_product(state.alpha0, state.alpha1),
    }
}
