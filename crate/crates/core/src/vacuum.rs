//! Classical vacuum-noise Monte Carlo: photon-number fluctuations of a
//! driven resonator and the phase back-action they cause on the qubit.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Violation};
use crate::model::SystemParams;
use crate::rng::trajectory_rng;
use crate::C64;

/// Complex white noise sampled on a uniform grid, piecewise constant on
/// each step.
#[derive(Debug, Clone, PartialEq)]
pub struct VacuumPath {
    pub step: f64,
    pub samples: Vec<C64>,
}

impl VacuumPath {
    pub fn duration(&self) -> f64 {
        self.step * self.samples.len() as f64
    }

    /// Integral of the noise over the whole path.
    pub fn integral(&self) -> C64 {
        self.samples.iter().sum::<C64>() * self.step
    }
}

fn positive(field: &str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(vec![Violation::new(field, "must be positive")]))
    }
}

fn noise<R: Rng + ?Sized>(n: usize, h: f64, rng: &mut R) -> Vec<C64> {
    let quad = Normal::new(0.0, 0.5 / h.sqrt()).expect("finite spread");
    (0..n).map(|_| C64::new(quad.sample(rng), quad.sample(rng))).collect()
}

/// White noise with per-quadrature variance `1/(4h)` per sample.
pub fn generate_vacuum_path<R: Rng + ?Sized>(duration: f64, h: f64, rng: &mut R) -> Result<VacuumPath> {
    positive("h", h)?;
    positive("duration", duration)?;
    let n = (duration / h).round().max(1.0) as usize;
    Ok(VacuumPath { step: h, samples: noise(n, h, rng) })
}

fn rate(params: &SystemParams) -> C64 {
    C64::new(params.kappa / 2.0, params.detuning_rd)
}

/// Linear filter driven by piecewise-constant input, stepped exactly.
#[derive(Debug, Clone, Copy)]
struct Filter {
    decay: C64,
    gain: C64,
    lambda: C64,
    step: f64,
}

impl Filter {
    fn new(lambda: C64, h: f64) -> Self {
        let decay = (-lambda * h).exp();
        Self { decay, gain: (1.0 - decay) / lambda, lambda, step: h }
    }

    /// New value and the integral over the step for constant `input`.
    fn step(&self, value: C64, input: C64) -> (C64, C64) {
        let target = input / self.lambda;
        let next = target + (value - target) * self.decay;
        (next, target * self.step + (value - target) * self.gain)
    }
}

/// Resonator field fluctuation driven through the full decay rate, starting
/// from zero. One entry per grid point.
pub fn field_fluctuation(path: &VacuumPath, params: &SystemParams) -> Vec<C64> {
    let filter = Filter::new(rate(params), path.step);
    let coupling = params.kappa.sqrt();
    let mut out = Vec::with_capacity(path.samples.len() + 1);
    let mut d = C64::new(0.0, 0.0);
    out.push(d);
    for &v in &path.samples {
        d = filter.step(d, coupling * v).0;
        out.push(d);
    }
    out
}

/// Photon-number autocovariance of a resonator displaced by `alpha_st`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhotonCorrelation {
    pub lags: Vec<f64>,
    pub values: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub n_bar: f64,
    /// Envelope decay rate from a weighted log-linear fit.
    pub decay_rate: f64,
    pub decay_rate_se: f64,
}

/// Settings for [`photon_correlator`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelatorSettings {
    pub n_paths: usize,
    pub step: f64,
    /// Length of the stationary window after burn-in, in units of `1/kappa`.
    pub window: f64,
    /// Spacing of correlation origins within the window, in grid steps.
    pub origin_stride: usize,
    pub seed: u64,
}

impl CorrelatorSettings {
    pub fn new(kappa: f64, n_paths: usize, seed: u64) -> Self {
        Self { n_paths, step: 0.01 / kappa, window: 20.0, origin_stride: 10, seed }
    }
}

const BURN_IN: f64 = 10.0;

/// Estimates `<dn(t) dn(t + tau)>` for each lag in `lags`.
pub fn photon_correlator(params: &SystemParams, alpha_st: C64, lags: &[f64], cfg: &CorrelatorSettings) -> Result<PhotonCorrelation> {
    positive("step", cfg.step)?;
    positive("kappa", params.kappa)?;
    if cfg.n_paths < 2 {
        return Err(Error::Config(vec![Violation::new("n_paths", "need at least 2 paths")]));
    }
    if lags.iter().any(|&l| !(l >= 0.0 && l.is_finite())) {
        return Err(Error::Config(vec![Violation::new("lags", "must be non-negative")]));
    }
    let h = cfg.step;
    let lag_steps: Vec<usize> = lags.iter().map(|l| (l / h).round() as usize).collect();
    let max_lag = lag_steps.iter().copied().max().unwrap_or(0);
    let burn = (BURN_IN / params.kappa / h).ceil() as usize;
    let window = (cfg.window / params.kappa / h).ceil() as usize;
    let total = burn + window + max_lag;
    let stride = cfg.origin_stride.max(1);
    let origins: Vec<usize> = (burn..=burn + window).step_by(stride).collect();

    // per path: mean photon number and raw lagged products
    let per_path: Vec<(f64, Vec<f64>)> = (0..cfg.n_paths)
        .into_par_iter()
        .map(|p| {
            let mut rng = trajectory_rng(cfg.seed, p as u64);
            let path = VacuumPath { step: h, samples: noise(total, h, &mut rng) };
            let n: Vec<f64> = field_fluctuation(&path, params).iter().map(|d| (alpha_st + d).norm_sqr()).collect();
            let mean = origins.iter().map(|&o| n[o]).sum::<f64>() / origins.len() as f64;
            let prods = lag_steps
                .iter()
                .map(|&l| origins.iter().map(|&o| n[o] * n[o + l]).sum::<f64>() / origins.len() as f64)
                .collect();
            (mean, prods)
        })
        .collect();

    let np = cfg.n_paths as f64;
    let n_bar = per_path.iter().map(|p| p.0).sum::<f64>() / np;
    let mut values = Vec::with_capacity(lags.len());
    let mut std_errors = Vec::with_capacity(lags.len());
    for k in 0..lags.len() {
        let est: Vec<f64> = per_path.iter().map(|p| p.1[k] - n_bar * n_bar).collect();
        let m = est.iter().sum::<f64>() / np;
        let var = est.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (np - 1.0);
        values.push(m);
        std_errors.push((var / np).sqrt());
    }
    let (decay_rate, decay_rate_se) = fit_envelope(lags, &values, &std_errors, params.detuning_rd);
    Ok(PhotonCorrelation { lags: lags.to_vec(), values, std_errors, n_bar, decay_rate, decay_rate_se })
}

/// Weighted least squares of `ln |C / cos(detuning tau)|` against `tau`.
/// Lags near a node of the cosine are skipped.
fn fit_envelope(lags: &[f64], values: &[f64], errors: &[f64], detuning: f64) -> (f64, f64) {
    let (mut sw, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for ((&t, &v), &e) in lags.iter().zip(values).zip(errors) {
        let c = (detuning * t).cos();
        let env = v / c;
        if c.abs() < 0.3 || env <= 0.0 {
            continue;
        }
        let rel = (e / v.abs()).max(1e-12);
        let w = 1.0 / (rel * rel);
        let y = env.ln();
        sw += w;
        sx += w * t;
        sy += w * y;
        sxx += w * t * t;
        sxy += w * t * y;
    }
    let det = sw * sxx - sx * sx;
    if det <= 0.0 {
        return (f64::NAN, f64::NAN);
    }
    (-(sw * sxy - sx * sy) / det, (sw / det).sqrt())
}

/// OLS regression of the accumulated qubit phase on the measured signal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BackactionRegression {
    pub slope: f64,
    pub std_error: f64,
    /// `Delta I_max sin(phi_d) tau / S` for the linearized field response.
    pub expected: f64,
    pub n_paths: usize,
}

/// Settings for [`backaction_correlation`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BackactionSettings {
    pub n_paths: usize,
    pub step: f64,
    /// Integration window; at least `10/kappa`.
    pub window: f64,
    pub spectral_density: f64,
    pub seed: u64,
}

impl BackactionSettings {
    pub fn new(kappa: f64, n_paths: usize, seed: u64) -> Self {
        Self { n_paths, step: 0.01 / kappa, window: 10.0 / kappa, spectral_density: 1.0, seed }
    }
}

/// Linearized branch splitting `alpha1 - alpha0` around `alpha_st`.
pub fn linear_splitting(params: &SystemParams, alpha_st: C64) -> C64 {
    C64::new(0.0, -2.0 * params.chi) * alpha_st / rate(params)
}

/// Regresses `integral of delta omega_q` on the signal `I_m` averaged over
/// the window, measuring at `phi_d` from the informational quadrature.
///
/// Noise enters only during the window; the fluctuation left at its end is
/// followed to completion analytically, so both integrals capture the full
/// response to the window noise.
pub fn backaction_correlation(params: &SystemParams, alpha_st: C64, phi_d: f64, cfg: &BackactionSettings) -> Result<BackactionRegression> {
    positive("step", cfg.step)?;
    positive("kappa", params.kappa)?;
    positive("spectral_density", cfg.spectral_density)?;
    if !(cfg.window * params.kappa >= 10.0) {
        return Err(Error::Config(vec![Violation::new("window", "must be at least 10/kappa")]));
    }
    if cfg.n_paths < 3 {
        return Err(Error::Config(vec![Violation::new("n_paths", "need at least 3 paths")]));
    }
    if !(params.kappa_out > 0.0 && params.kappa_out <= params.kappa && params.kappa_col <= params.kappa_out) {
        return Err(Error::Config(vec![Violation::new("kappa_out", "need 0 < kappa_col <= kappa_out <= kappa")]));
    }
    let h = cfg.step;
    let steps = (cfg.window / h).round() as usize;
    let tau = steps as f64 * h;
    let lambda = rate(params);
    let filter = Filter::new(lambda, h);
    let (g_out, g_other) = (params.kappa_out.sqrt(), (params.kappa - params.kappa_out).sqrt());
    let eta_c = params.kappa_col / params.kappa_out;
    let splitting = linear_splitting(params, alpha_st);
    let phi_opt = if splitting.norm() == 0.0 { 0.0 } else { splitting.arg() };
    let rotation = C64::from_polar(1.0, -(phi_opt + phi_d));
    let d_coef = cfg.spectral_density / (2.0 * tau);
    let signal_scale = (d_coef / (tau / 4.0)).sqrt();

    let pairs: Vec<(f64, f64)> = (0..cfg.n_paths)
        .into_par_iter()
        .map(|p| {
            let mut rng = trajectory_rng(cfg.seed, p as u64);
            let port = noise(steps, h, &mut rng);
            let other = noise(steps, h, &mut rng);
            let lost = noise(steps, h, &mut rng);
            let mut d = C64::new(0.0, 0.0);
            let mut field_int = C64::new(0.0, 0.0);
            for k in 0..steps {
                let (next, int) = filter.step(d, g_out * port[k] + g_other * other[k]);
                d = next;
                field_int += int;
            }
            field_int += d / lambda;
            let port_int: C64 = port.iter().sum::<C64>() * h;
            let lost_int: C64 = lost.iter().sum::<C64>() * h;
            let out = eta_c.sqrt() * (g_out * field_int - port_int) + (1.0 - eta_c).sqrt() * lost_int;
            let phase = 4.0 * params.chi * (alpha_st.conj() * field_int).re;
            ((rotation * out).re * signal_scale, phase)
        })
        .collect();

    let n = pairs.len() as f64;
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pairs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pairs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let resid: f64 = pairs.iter().map(|p| (p.1 - my - slope * (p.0 - mx)).powi(2)).sum();
    let std_error = (resid / (n - 2.0) / sxx).sqrt();
    let eta = params.kappa_col / params.kappa;
    let delta_i_max = (2.0 * eta * params.kappa * cfg.spectral_density).sqrt() * splitting.norm();
    Ok(BackactionRegression {
        slope,
        std_error,
        expected: delta_i_max * phi_d.sin() * tau / cfg.spectral_density,
        n_paths: cfg.n_paths,
    })
}
