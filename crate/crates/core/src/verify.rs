//! Built-in verification suites with machine-readable reports.

use std::f64::consts::{FRAC_PI_2, PI};
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bayes::update;
use crate::coherent::{
    collapse_given_n, collapse_probability, default_truncation, exact_homodyne_collapse, fock_amplitudes,
    gaussian_collapse_reference, inner_product, CoherentState, PureHybridState, TailPiece,
};
use crate::engine::{
    ensemble_chain, ensemble_stats, filter_record, record_log_likelihood, record_rows, run_trajectory,
    simulated_calibration, Frame, GridSpec, InitialState, RunConfig,
};
use crate::error::{Error, Result, Violation};
use crate::fields::{
    advance_fields, bad_cavity_dephasing, bad_cavity_stark, derived_quantities, steady_state_field,
};
use crate::model::{AmplifierMode, HybridState, MeasurementSample, MeasurementSettings, Schedule, SystemParams};
use crate::rng::trajectory_rng;
use crate::sde::{strong_convergence, Scheme};
use crate::vacuum::{
    backaction_correlation, field_fluctuation, generate_vacuum_path, photon_correlator, BackactionSettings,
    CorrelatorSettings,
};
use crate::C64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Coherent,
    Bayes,
    Sde,
    Vacuum,
    All,
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "coherent" => Suite::Coherent,
            "bayes" => Suite::Bayes,
            "sde" => Suite::Sde,
            "vacuum" => Suite::Vacuum,
            "all" => Suite::All,
            _ => {
                return Err(Error::Config(vec![Violation::new(
                    "suite",
                    format!("unknown suite {s:?}; expected coherent, bayes, sde, vacuum or all"),
                )]))
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    /// Passes when `value <= tolerance`.
    AtMost,
    /// Passes when `value >= tolerance`.
    AtLeast,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub suite: Suite,
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub comparison: Comparison,
    pub passed: bool,
    /// Reported only; does not affect the verdict.
    pub informational: bool,
}

impl Check {
    fn new(suite: Suite, name: &str, value: f64, tolerance: f64, comparison: Comparison) -> Self {
        let passed = value.is_finite()
            && match comparison {
                Comparison::AtMost => value <= tolerance,
                Comparison::AtLeast => value >= tolerance,
            };
        Self { suite, name: name.into(), value, tolerance, comparison, passed, informational: false }
    }

    fn at_most(suite: Suite, name: &str, value: f64, tolerance: f64) -> Self {
        Self::new(suite, name, value, tolerance, Comparison::AtMost)
    }

    fn at_least(suite: Suite, name: &str, value: f64, tolerance: f64) -> Self {
        Self::new(suite, name, value, tolerance, Comparison::AtLeast)
    }

    fn info(mut self) -> Self {
        self.informational = true;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub suite: Suite,
    pub seed: u64,
    pub checks: Vec<Check>,
    pub passed: bool,
}

/// Runs `suite`; `seed` fixes every Monte Carlo draw.
pub fn run_suite(suite: Suite, seed: u64) -> Result<Report> {
    let checks = match suite {
        Suite::Coherent => coherent(seed)?,
        Suite::Bayes => bayes(seed)?,
        Suite::Sde => sde(seed)?,
        Suite::Vacuum => vacuum(seed)?,
        Suite::All => {
            let mut all = coherent(seed)?;
            all.extend(bayes(seed)?);
            all.extend(sde(seed)?);
            all.extend(vacuum(seed)?);
            all
        }
    };
    let passed = checks.iter().all(|c| c.passed || c.informational);
    Ok(Report { suite, seed, checks, passed })
}

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn random_complex<R: Rng + ?Sized>(rng: &mut R, radius: f64) -> C64 {
    C64::from_polar(radius * rng.random::<f64>().sqrt(), 2.0 * PI * rng.random::<f64>())
}

fn wrap(x: f64) -> f64 {
    (x + PI).rem_euclid(2.0 * PI) - PI
}

fn coherent(seed: u64) -> Result<Vec<Check>> {
    let s = Suite::Coherent;
    let mut out = Vec::new();

    let pairs = [(c(1.2, 0.3), c(-0.4, 0.9)), (c(2.0, 0.0), c(0.0, 2.0)), (c(0.0, 0.0), c(0.5, -1.5))];
    let mut worst = 0.0f64;
    for (a, b) in pairs {
        let n_max = CoherentState::new(a).safe_truncation().max(CoherentState::new(b).safe_truncation());
        let (fa, fb) = (fock_amplitudes(a, n_max), fock_amplitudes(b, n_max));
        let sum: C64 = fa.iter().zip(&fb).map(|(x, y)| x.conj() * y).sum();
        worst = worst.max((sum - inner_product(a, b)).norm());
    }
    out.push(Check::at_most(s, "inner_product_vs_fock_sum", worst, 1e-12));

    let fock = CoherentState::new(c(3.0, -2.0));
    let norm: f64 = fock.fock(fock.safe_truncation()).iter().map(|x| x.norm_sqr()).sum();
    out.push(Check::at_most(s, "fock_norm", (norm - 1.0).abs(), 1e-12));

    let (_, var) = CoherentState::new(c(1.5, 0.5)).quadrature_moments(0.7, 80);
    out.push(Check::at_most(s, "quadrature_variance", (var - 0.25).abs(), 1e-8));

    let state = PureHybridState::new(c(0.6, 0.0), c(0.0, 0.8), c(0.5, -0.3), c(-0.4, 0.9))?;
    let piece = TailPiece::from_fields(state.alpha0, state.alpha1, 1.0, 0.01, 0.0);
    let pump = C64::from_polar(50.0, 1.1);
    let (mut total, mut w1) = (0.0, 0.0);
    for n in 0..=default_truncation(pump) {
        let p = collapse_probability(&state, &piece, pump, n);
        total += p;
        w1 += p * collapse_given_n(&state, &piece, pump, n).1.norm_sqr();
    }
    out.push(Check::at_most(s, "collapse_probability_sum", (total - 1.0).abs(), 1e-10));
    out.push(Check::at_most(s, "collapse_population_average", (w1 - 0.64).abs(), 1e-10));

    let mut rng = trajectory_rng(seed, 0);
    let (mut mag, mut phase) = (0.0f64, 0.0f64);
    for _ in 0..200 {
        let theta = rng.random::<f64>() * FRAC_PI_2;
        let st = PureHybridState::new(
            c(theta.cos(), 0.0),
            C64::from_polar(theta.sin(), 2.0 * PI * rng.random::<f64>()),
            random_complex(&mut rng, 2.0),
            random_complex(&mut rng, 2.0),
        )?;
        let pc = TailPiece::from_fields(st.alpha0, st.alpha1, 1.0, 0.01, 0.0);
        let phi_a = 2.0 * PI * rng.random::<f64>();
        let o = exact_homodyne_collapse(&st, &pc, C64::from_polar(50.0, phi_a), &mut rng)?;
        let (g0, g1) = gaussian_collapse_reference(&st, &pc, phi_a, o.n as f64, 50.0);
        for (e, g) in [(o.c0, g0), (o.c1, g1)] {
            if g.norm() > 1e-3 {
                mag = mag.max((e.norm() - g.norm()).abs() / g.norm());
            }
        }
        phase = phase.max(wrap((o.c1 * o.c0.conj()).arg() - (g1 * g0.conj()).arg()).abs());
    }
    out.push(Check::at_most(s, "gaussian_vs_exact_magnitude", mag, 2e-2));
    out.push(Check::at_most(s, "gaussian_vs_exact_phase", phase, 2e-2));
    Ok(out)
}

fn demo_config(mode: AmplifierMode, t_end: f64) -> RunConfig {
    RunConfig {
        system: SystemParams::ideal(0.0, 0.5, 1.0, c(1.0, 0.0)),
        measurement: MeasurementSettings { mode, amplified_phase: Schedule::constant(0.6), ..Default::default() },
        grid: GridSpec { t_end, dt: 0.01 },
        initial: InitialState { rho00: 0.5, rho11: 0.5, rho10: c(0.5, 0.0), alpha_in: c(0.0, 0.0) },
        seed: 0,
    }
}

fn bayes(seed: u64) -> Result<Vec<Check>> {
    let s = Suite::Bayes;
    let mut out = Vec::new();

    let run = demo_config(AmplifierMode::PhaseSensitive, 10.0).prepare()?;
    let rec = run_trajectory(&run, seed)?;
    let defect = rec.states.iter().map(|x| x.purity_defect().abs()).fold(0.0, f64::max);
    out.push(Check::at_most(s, "purity_preservation", defect, 1e-10));

    let mut rng = trajectory_rng(seed, 1);
    let mut worst = 0.0f64;
    let p = SystemParams::ideal(0.3, 0.5, 1.0, c(1.0, 0.0));
    let mut sum_gamma = 0.0f64;
    let mut sum_stark = 0.0f64;
    for _ in 0..1000 {
        let st = HybridState::new(0.5, 0.5, c(0.0, 0.0), random_complex(&mut rng, 3.0), random_complex(&mut rng, 3.0))?;
        let m = MeasurementSettings {
            spectral_density: 0.1 + rng.random::<f64>(),
            amplified_phase: Schedule::constant(2.0 * PI * rng.random::<f64>()),
            ..Default::default()
        };
        let d = derived_quantities(&st, &p, &m, 0.0);
        let lhs = d.delta_i * d.delta_i / (4.0 * m.spectral_density)
            + d.back_action_k * d.back_action_k * m.spectral_density / 4.0;
        let rhs = d.delta_i_max * d.delta_i_max / (4.0 * m.spectral_density);
        if rhs > 0.0 {
            worst = worst.max((lhs - rhs).abs() / rhs);
        }
        let overlap = st.alpha1.conj() * st.alpha0;
        sum_gamma = sum_gamma.max((d.gamma_d + d.delta_gamma - 2.0 * p.chi * overlap.im).abs());
        sum_stark = sum_stark.max((d.stark_s + d.stark_3 - 2.0 * p.chi * overlap.re).abs());
    }
    out.push(Check::at_most(s, "causality_identity", worst, 1e-14));
    out.push(Check::at_most(s, "dephasing_sum_rule", sum_gamma, 1e-10));
    out.push(Check::at_most(s, "stark_sum_rule", sum_stark, 1e-10));

    let weak = SystemParams::ideal(0.0, 0.01, 1.0, c(0.5, 0.0));
    let (a0, a1) = (steady_state_field(&weak, 0, c(0.5, 0.0)), steady_state_field(&weak, 1, c(0.5, 0.0)));
    let st = HybridState::new(0.5, 0.5, c(0.0, 0.0), a0, a1)?;
    let d = derived_quantities(&st, &weak, &MeasurementSettings::default(), 0.0);
    let nbar = a0.norm_sqr();
    let g = bad_cavity_dephasing(weak.chi, weak.kappa, 0.0, nbar);
    out.push(Check::at_most(s, "bad_cavity_dephasing", (d.gamma_d / g - 1.0).abs(), 1e-3));
    let w = bad_cavity_stark(weak.chi, nbar);
    out.push(Check::at_most(s, "bad_cavity_stark", (d.stark_s / w - 1.0).abs(), 1e-3));

    out.push(Check::at_most(s, "large_step_exactness", large_step_gap(seed)?, 1e-9));

    for mode in [AmplifierMode::PhaseSensitive, AmplifierMode::PhasePreserving] {
        let tag = if mode == AmplifierMode::PhaseSensitive { "ps" } else { "pp" };
        let run = demo_config(mode, 3.0).prepare()?;
        let n = 2000;
        let stats = ensemble_stats(&run, n, seed, 10)?;
        let drift = (stats.mean_rho11.last().unwrap() - run.initial.rho11).abs();
        out.push(Check::at_most(s, &format!("martingale_rho11_{tag}"), drift, 5.0 * 0.5 / (n as f64).sqrt()));
        let chain = ensemble_chain(&run);
        let stride = (run.times.len() - 1) / 10;
        let z = (1..=10)
            .map(|k| {
                let i = k * stride;
                (stats.mean_rho10[i] - chain[i].rho10).norm() / stats.se_rho10[i]
            })
            .fold(0.0, f64::max);
        out.push(Check::at_most(s, &format!("ensemble_rho10_sigmas_{tag}"), z, 3.0));

        let rec = run_trajectory(&run, seed)?;
        let rows = record_rows(&rec);
        let cal = simulated_calibration(&rec);
        let filt = filter_record(&run, &rows, &cal, Frame::Informational)?;
        let gap = rec
            .states
            .iter()
            .zip(&filt.record.states)
            .map(|(a, b)| (a.rho11 - b.rho11).abs().max((a.rho10 - b.rho10).norm()))
            .fold(0.0, f64::max);
        out.push(Check::at_most(s, &format!("filter_round_trip_{tag}"), gap, 1e-9));
        let durations: Vec<f64> = (0..run.steps()).map(|k| run.dt(k)).collect();
        let l = record_log_likelihood(&rows, &durations, &cal, 0.5, 0.5)?;
        out.push(Check::at_most(
            s,
            &format!("likelihood_forms_{tag}"),
            (l.global - l.local).abs() / l.global.abs().max(1.0),
            1e-10,
        ));
    }
    Ok(out)
}

/// Splits one interval into sub-steps with frozen fields and compares the
/// chained updates with a single update on the averaged signal.
fn large_step_gap(seed: u64) -> Result<f64> {
    let p = SystemParams::ideal(0.2, 0.5, 1.0, c(1.0, 0.0));
    let eps = c(1.0, 0.0);
    let (a0, a1) = (steady_state_field(&p, 0, eps), steady_state_field(&p, 1, eps));
    let start = HybridState::new(0.3, 0.7, C64::from_polar(0.4, 0.5), a0, a1)?;
    let mut rng = trajectory_rng(seed, 2);
    let big = 0.5;
    let mut worst = 0.0f64;
    for m in [MeasurementSettings { gamma_int: 0.1, ..MeasurementSettings::phase_sensitive(0.9) }, MeasurementSettings::phase_preserving()] {
        let d = derived_quantities(&start, &p, &m, 0.0);
        for n in [2usize, 10, 100] {
            let h = big / n as f64;
            let xs: Vec<(f64, f64)> = (0..n).map(|_| (rng.random::<f64>() * 4.0 - 2.0, rng.random::<f64>() * 4.0 - 2.0)).collect();
            let q = |x: f64| (m.mode == AmplifierMode::PhasePreserving).then_some(x);
            let mut chained = start;
            for &(i, qq) in &xs {
                let sample = MeasurementSample::new(i, q(qq), h, m.spectral_density)?;
                chained = update(&advance_fields(&chained, &p, 0.0, h), &sample, &d, &m)?;
            }
            let mean_i = xs.iter().map(|x| x.0).sum::<f64>() / n as f64;
            let mean_q = xs.iter().map(|x| x.1).sum::<f64>() / n as f64;
            let sample = MeasurementSample::new(mean_i, q(mean_q), big, m.spectral_density)?;
            let single = update(&advance_fields(&start, &p, 0.0, big), &sample, &d, &m)?;
            worst = worst.max((chained.rho11 - single.rho11).abs()).max((chained.rho10 - single.rho10).norm());
        }
    }
    Ok(worst)
}

fn sde(seed: u64) -> Result<Vec<Check>> {
    let s = Suite::Sde;
    let p = SystemParams::ideal(0.1, 0.5, 1.0, c(0.8, 0.0));
    let st = HybridState::pure(c(0.6, 0.0), c(0.0, 0.8), c(0.0, 0.0), c(0.0, 0.0))?;
    let dts = [1e-2, 5e-3, 2.5e-3];
    let mut out = Vec::new();
    for mode in [AmplifierMode::PhaseSensitive, AmplifierMode::PhasePreserving] {
        let tag = if mode == AmplifierMode::PhaseSensitive { "ps" } else { "pp" };
        let m = MeasurementSettings { mode, ..MeasurementSettings::phase_sensitive(0.5) };
        for (scheme, name) in [
            (Scheme::Stratonovich, "stratonovich_order"),
            (Scheme::ItoMilstein, "ito_milstein_order"),
            (Scheme::ItoEuler, "ito_euler_order"),
        ] {
            let r = strong_convergence(&p, &st, &m, scheme, &dts, 2.0, 100, seed)?;
            let check = Check::at_least(s, &format!("{name}_{tag}"), r.order, 0.9);
            out.push(if scheme == Scheme::ItoEuler { check.info() } else { check });
        }
    }
    Ok(out)
}

fn vacuum(seed: u64) -> Result<Vec<Check>> {
    let s = Suite::Vacuum;
    let mut out = Vec::new();
    let n_paths = 10_000;

    let t = 2.0;
    let mut acc = 0.0;
    for p in 0..n_paths {
        let mut rng = trajectory_rng(seed, p as u64);
        acc += generate_vacuum_path(t, 0.01, &mut rng)?.integral().re.powi(2);
    }
    out.push(Check::at_most(s, "integrated_quadrature_variance", (acc / n_paths as f64 / (t / 4.0) - 1.0).abs(), 0.03));

    let params = SystemParams::ideal(0.0, 0.05, 1.0, c(1.0, 0.0));
    let mut rng = trajectory_rng(seed, u64::MAX);
    let path = generate_vacuum_path(100_000.0, 0.01, &mut rng)?;
    let fluct = field_fluctuation(&path, &params);
    let tail = &fluct[1000..];
    let var = tail.iter().map(|d| d.norm_sqr()).sum::<f64>() / tail.len() as f64;
    out.push(Check::at_most(s, "fluctuation_variance", (var / 0.5 - 1.0).abs(), 0.03));

    let alpha_st = c(4.0, 3.0);
    let lags: Vec<f64> = (0..=8).map(|k| k as f64 * 0.25).collect();
    let corr = photon_correlator(&params, alpha_st, &lags, &CorrelatorSettings::new(params.kappa, n_paths, seed))?;
    out.push(Check::at_most(s, "photon_correlator_zero_lag", (corr.values[0] / alpha_st.norm_sqr() - 1.0).abs(), 0.05));
    out.push(Check::at_most(s, "photon_correlator_decay_rate", (corr.decay_rate / (params.kappa / 2.0) - 1.0).abs(), 0.05));

    let cfg = BackactionSettings::new(params.kappa, n_paths, seed);
    let r = backaction_correlation(&params, alpha_st, FRAC_PI_2, &cfg)?;
    out.push(Check::at_most(s, "backaction_slope", (r.slope / r.expected - 1.0).abs(), 0.05));
    let r0 = backaction_correlation(&params, alpha_st, 0.0, &cfg)?;
    out.push(Check::at_most(s, "informational_quadrature_slope_sigmas", r0.slope.abs() / r0.std_error, 4.0));
    let mut lossy = params.clone();
    lossy.kappa_col = 0.5 * lossy.kappa;
    let rl = backaction_correlation(&lossy, alpha_st, FRAC_PI_2, &cfg)?;
    out.push(Check::at_most(s, "collection_scaling", (rl.slope / r.slope / 0.5f64.sqrt() - 1.0).abs(), 0.05));
    Ok(out)
}
