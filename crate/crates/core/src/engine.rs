//! Full runs: simulation, filtering of recorded signals, long-interval
//! integrated updates, record likelihoods, and ensemble statistics.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bayes::{self, ensemble_step};
use crate::error::{Error, Result};
use crate::fields::{advance_fields, derived_quantities, DerivedQuantities};
use crate::model::{
    validate, AmplifierMode, CheckedConfig, HybridState, MeasurementSample, MeasurementSettings,
    SystemParams, TrajectoryRecord,
};
use crate::rng::{trajectory_rng, TrajectoryRng};
use crate::C64;

/// Relative tolerance used when matching record times to the grid.
const GRID_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub t_end: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
}

fn default_dt() -> f64 {
    0.01
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitialState {
    pub rho00: f64,
    pub rho11: f64,
    pub rho10: C64,
    #[serde(default)]
    pub alpha_in: C64,
}

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub system: SystemParams,
    pub measurement: MeasurementSettings,
    pub grid: GridSpec,
    pub initial: InitialState,
    #[serde(default)]
    pub seed: u64,
}

impl RunConfig {
    pub fn prepare(&self) -> Result<Run> {
        let checked = validate(&self.system, &self.measurement)?;
        let mut v = Vec::new();
        if !(self.grid.t_end > 0.0 && self.grid.t_end.is_finite()) {
            v.push(crate::error::Violation::new("grid.t_end", "must be positive"));
        }
        if !(self.grid.dt > 0.0 && self.grid.dt.is_finite()) {
            v.push(crate::error::Violation::new("grid.dt", "must be positive"));
        }
        if !v.is_empty() {
            return Err(Error::Config(v));
        }
        let i = &self.initial;
        let initial = HybridState::with_field(i.rho00, i.rho11, i.rho10, i.alpha_in)
            .map_err(|e| Error::Config(vec![crate::error::Violation::new("initial", e.to_string())]))?;
        Ok(Run::new(checked, initial, build_grid(&self.system, &self.measurement, self.grid.t_end, self.grid.dt)))
    }
}

/// Time grid: uniform within each interval between schedule breakpoints,
/// never longer than `dt`, with every breakpoint on the grid.
pub fn build_grid(params: &SystemParams, settings: &MeasurementSettings, t_end: f64, dt: f64) -> Vec<f64> {
    let mut marks: Vec<f64> = params
        .drive
        .breakpoints()
        .chain(settings.amplified_phase.breakpoints())
        .filter(|&b| b > 0.0 && b < t_end)
        .collect();
    marks.push(0.0);
    marks.push(t_end);
    marks.sort_by(f64::total_cmp);
    marks.dedup();
    let mut times = vec![0.0];
    for w in marks.windows(2) {
        let len = w[1] - w[0];
        let n = ((len / dt) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
        let h = len / n as f64;
        times.extend((1..n).map(|k| w[0] + k as f64 * h));
        times.push(w[1]);
    }
    times
}

/// A validated run: configuration, grid and initial state.
#[derive(Debug, Clone, PartialEq)]
pub struct Run {
    pub config: CheckedConfig,
    pub initial: HybridState,
    pub times: Vec<f64>,
}

impl Run {
    pub fn new(config: CheckedConfig, initial: HybridState, times: Vec<f64>) -> Self {
        Self { config, initial, times }
    }

    pub fn params(&self) -> &SystemParams {
        &self.config.params
    }

    pub fn settings(&self) -> &MeasurementSettings {
        &self.config.settings
    }

    pub fn steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn dt(&self, k: usize) -> f64 {
        self.times[k + 1] - self.times[k]
    }

    /// Derived quantities at the start of step `k` and the state with
    /// fields advanced to the end of it.
    pub fn prepare_step(&self, state: &HybridState, k: usize) -> (DerivedQuantities, HybridState) {
        let t = self.times[k];
        let d = derived_quantities(state, self.params(), self.settings(), t);
        (d, advance_fields(state, self.params(), t, self.dt(k)))
    }

    /// Deterministic field evolution with the qubit part held fixed, one
    /// entry per step.
    pub fn field_schedule(&self, state: &HybridState, start: usize, steps: usize) -> Result<Vec<DerivedQuantities>> {
        if start + steps > self.steps() {
            return Err(Error::GridMismatch(format!(
                "{} steps from index {start} exceed the {}-step grid",
                steps,
                self.steps()
            )));
        }
        let mut s = *state;
        let mut out = Vec::with_capacity(steps);
        for k in start..start + steps {
            let (d, next) = self.prepare_step(&s, k);
            out.push(d);
            s = next;
        }
        Ok(out)
    }
}

/// Simulates one trajectory with its own random stream.
pub fn run_trajectory(run: &Run, seed: u64) -> Result<TrajectoryRecord> {
    let mut rng = trajectory_rng(seed, 0);
    run_trajectory_with(run, seed, &mut rng)
}

pub fn run_trajectory_with(run: &Run, seed: u64, rng: &mut TrajectoryRng) -> Result<TrajectoryRecord> {
    let n = run.steps();
    let mut states = Vec::with_capacity(n + 1);
    let mut samples = Vec::with_capacity(n);
    let mut derived = Vec::with_capacity(n);
    let mut s = run.initial;
    states.push(s);
    for k in 0..n {
        let (d, advanced) = run.prepare_step(&s, k);
        let sample = bayes::sample_record(&s, &d, run.settings(), run.dt(k), rng)?;
        s = bayes::update(&advanced, &sample, &d, run.settings())?;
        states.push(s);
        samples.push(sample);
        derived.push(d);
    }
    Ok(TrajectoryRecord {
        times: run.times.clone(),
        states,
        samples,
        derived,
        seed,
        settings: run.settings().clone(),
    })
}

/// Record-averaged state on the grid.
pub fn ensemble_chain(run: &Run) -> Vec<HybridState> {
    let mut s = run.initial;
    let mut out = vec![s];
    for k in 0..run.steps() {
        let (d, advanced) = run.prepare_step(&s, k);
        s = ensemble_step(&advanced, &d, run.settings(), run.dt(k));
        out.push(s);
    }
    out
}

/// Integrated signals over a long interval and the resulting state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LongRunResult {
    /// Integrated informational signal (parallel or I channel).
    pub r_parallel: f64,
    /// Integrated back-action signal (perpendicular or Q channel).
    pub r_perp: f64,
    pub gamma_integral: f64,
    pub stark_integral: f64,
    pub final_state: HybridState,
}

/// Applies the whole record `samples`, starting at grid index `start`, as a
/// single closed-form update.
pub fn integrate_long(initial: &HybridState, run: &Run, start: usize, samples: &[MeasurementSample]) -> Result<LongRunResult> {
    let schedule = run.field_schedule(initial, start, samples.len())?;
    let settings = run.settings();
    let s_i = settings.spectral_density;
    let pp = settings.mode == AmplifierMode::PhasePreserving;
    let (mut r_par, mut r_perp, mut gam, mut stark) = (0.0, 0.0, 0.0, 0.0);
    let mut fields = *initial;
    for (k, (x, d)) in samples.iter().zip(&schedule).enumerate() {
        let dt = run.dt(start + k);
        if ((x.dt - dt) / dt).abs() > GRID_TOL {
            return Err(Error::GridMismatch(format!("sample {k} spans {} but the grid step is {dt}", x.dt)));
        }
        r_par += x.i_bar * 2.0 * d.delta_i / s_i * dt;
        if pp {
            let q = x.q_bar.ok_or(Error::Record("phase-preserving record lacks Q".into()))?;
            r_perp += q * d.delta_i / s_i * dt;
        } else {
            r_perp += x.i_bar * d.back_action_k * dt;
        }
        gam += (d.gamma + settings.gamma_int) * dt;
        stark += d.stark_s * dt;
        fields = advance_fields(&fields, run.params(), run.times[start + k], dt);
    }
    let updated = bayes::bayes_kernel(initial, r_par, r_perp + stark, gam);
    let final_state = HybridState {
        alpha0: fields.alpha0,
        alpha1: fields.alpha1,
        phase0: fields.phase0,
        phase1: fields.phase1,
        ..updated
    };
    Ok(LongRunResult { r_parallel: r_par, r_perp, gamma_integral: gam, stark_integral: stark, final_state })
}

/// `integral of (Delta I)^2 / S_I dt` over `steps` grid steps from `start`.
pub fn mean_integrated_signal(state: &HybridState, run: &Run, start: usize, steps: usize) -> Result<f64> {
    let s_i = run.settings().spectral_density;
    Ok(run
        .field_schedule(state, start, steps)?
        .iter()
        .enumerate()
        .map(|(k, d)| d.delta_i * d.delta_i / s_i * run.dt(start + k))
        .sum())
}

/// Direct draw of the integrated informational signal from its
/// two-Gaussian distribution.
pub fn sample_r_parallel<R: Rng + ?Sized>(state: &HybridState, run: &Run, start: usize, steps: usize, rng: &mut R) -> Result<f64> {
    let r1 = mean_integrated_signal(state, run, start, steps)?;
    let sign = if rng.random::<f64>() < state.rho11 { 1.0 } else { -1.0 };
    let z: f64 = rng.sample(StandardNormal);
    Ok(sign * r1 + (2.0 * r1).sqrt() * z)
}

/// Direct draw of the integrated orthogonal signal (phase-preserving mode).
pub fn sample_r_q<R: Rng + ?Sized>(state: &HybridState, run: &Run, start: usize, steps: usize, rng: &mut R) -> Result<f64> {
    if run.settings().mode != AmplifierMode::PhasePreserving {
        return Err(Error::WrongMode("phase-preserving"));
    }
    let r1 = mean_integrated_signal(state, run, start, steps)?;
    let z: f64 = rng.sample(StandardNormal);
    Ok((2.0 * r1).sqrt() * z)
}

/// Signal levels for qubit states 0 and 1, constant or per record row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Trace {
    Constant(f64),
    Samples(Vec<f64>),
}

impl Trace {
    pub fn at(&self, k: usize) -> f64 {
        match self {
            Trace::Constant(x) => *x,
            Trace::Samples(v) => v[k],
        }
    }

    fn check(&self, name: &str, len: usize) -> Result<()> {
        match self {
            Trace::Samples(v) if v.len() != len => {
                Err(Error::Record(format!("calibration {name} has {} entries, record has {len}", v.len())))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub spectral_density: f64,
    pub i0: Trace,
    pub i1: Trace,
    #[serde(default = "zero_trace")]
    pub q0: Trace,
}

fn zero_trace() -> Trace {
    Trace::Constant(0.0)
}

impl Calibration {
    fn check(&self, len: usize) -> Result<()> {
        if !(self.spectral_density > 0.0 && self.spectral_density.is_finite()) {
            return Err(Error::Record("calibration spectral_density must be positive".into()));
        }
        self.i0.check("i0", len)?;
        self.i1.check("i1", len)?;
        self.q0.check("q0", len)
    }

    pub fn midpoint(&self, k: usize) -> f64 {
        (self.i0.at(k) + self.i1.at(k)) / 2.0
    }
}

/// Raw record as read from disk: one row per interval, `t` at its start.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RecordData {
    pub times: Vec<f64>,
    pub i: Vec<f64>,
    pub q: Option<Vec<f64>>,
}

impl RecordData {
    pub fn check_times(&self) -> Result<()> {
        if self.times.windows(2).any(|w| w[1] <= w[0]) || self.times.iter().any(|t| !t.is_finite()) {
            return Err(Error::Record("non-monotone time column".into()));
        }
        Ok(())
    }
}

/// Frame of a phase-preserving record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Frame {
    /// Already rotated to the informational quadrature.
    #[default]
    Informational,
    /// Fixed experimental quadratures, rotated by `phi_opt(t)` on ingestion.
    Fixed,
}

/// `(I, Q)` in the frame rotated by `phi_opt`.
pub fn rotate_quadratures(i_fixed: f64, q_fixed: f64, phi_opt: f64) -> (f64, f64) {
    let (s, c) = phi_opt.sin_cos();
    (i_fixed * c + q_fixed * s, q_fixed * c - i_fixed * s)
}

/// Inverse of [`rotate_quadratures`].
pub fn unrotate_quadratures(i: f64, q: f64, phi_opt: f64) -> (f64, f64) {
    rotate_quadratures(i, q, -phi_opt)
}

/// Record probability in the global and the local (sequential) forms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Likelihood {
    pub global: f64,
    pub local: f64,
    /// `ln rho_jj(0) - sum (I - I_j)^2 dt / S` per branch.
    pub log_weights: [f64; 2],
}

fn log_add(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// Log-likelihood of the informational record given the initial qubit
/// populations, up to a record-independent constant.
pub fn record_log_likelihood(
    record: &RecordData,
    durations: &[f64],
    calibration: &Calibration,
    rho00: f64,
    rho11: f64,
) -> Result<Likelihood> {
    calibration.check(record.i.len())?;
    if durations.len() != record.i.len() {
        return Err(Error::GridMismatch("record length differs from grid".into()));
    }
    let s = calibration.spectral_density;
    let penalty = |k: usize, level: f64| {
        let x = record.i[k] - level;
        x * x * durations[k] / s
    };
    let mut w = [rho00.ln(), rho11.ln()];
    let mut local = 0.0;
    for k in 0..record.i.len() {
        let p = [penalty(k, calibration.i0.at(k)), penalty(k, calibration.i1.at(k))];
        // predictive probability of this sample from the current posterior
        let norm = log_add(w[0], w[1]);
        local += log_add(w[0] - norm - p[0], w[1] - norm - p[1]);
        w[0] -= p[0];
        w[1] -= p[1];
    }
    Ok(Likelihood { global: log_add(w[0], w[1]), local, log_weights: w })
}

/// Filter output: states on the grid plus the record likelihood.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterOutput {
    pub record: TrajectoryRecord,
    pub likelihood: Likelihood,
}

/// Runs the Bayesian filter over a recorded signal.
pub fn filter_record(run: &Run, record: &RecordData, calibration: &Calibration, frame: Frame) -> Result<FilterOutput> {
    record.check_times()?;
    let n = run.steps();
    if record.times.len() != n || record.i.len() != n {
        return Err(Error::GridMismatch(format!("record has {} rows, grid has {n} intervals", record.times.len())));
    }
    for (k, &t) in record.times.iter().enumerate() {
        if (t - run.times[k]).abs() > GRID_TOL * run.dt(k).max(t.abs()) {
            return Err(Error::GridMismatch(format!("row {k}: t = {t}, grid has {}", run.times[k])));
        }
    }
    let settings = run.settings();
    let pp = settings.mode == AmplifierMode::PhasePreserving;
    let q = match (&record.q, pp) {
        (Some(q), _) if q.len() == n => Some(q),
        (Some(_), _) => return Err(Error::Record("Q column length differs from I".into())),
        (None, true) => return Err(Error::Record("phase-preserving mode requires a Q column".into())),
        (None, false) => None,
    };
    calibration.check(n)?;
    let scale = (settings.spectral_density / calibration.spectral_density).sqrt();

    let mut states = Vec::with_capacity(n + 1);
    let mut samples = Vec::with_capacity(n);
    let mut derived = Vec::with_capacity(n);
    let mut s = run.initial;
    states.push(s);
    for k in 0..n {
        let (d, advanced) = run.prepare_step(&s, k);
        let mut i = (record.i[k] - calibration.midpoint(k)) * scale;
        let mut qv = q.map(|q| (q[k] - calibration.q0.at(k)) * scale);
        if let (Frame::Fixed, Some(qq)) = (frame, qv) {
            let (a, b) = rotate_quadratures(i, qq, d.phi_opt);
            i = a;
            qv = Some(b);
        }
        let sample = MeasurementSample::new(i, if pp { qv } else { None }, run.dt(k), settings.spectral_density)?;
        s = bayes::update(&advanced, &sample, &d, settings)?;
        states.push(s);
        samples.push(sample);
        derived.push(d);
    }
    let durations: Vec<f64> = (0..n).map(|k| run.dt(k)).collect();
    let likelihood = record_log_likelihood(record, &durations, calibration, run.initial.rho00, run.initial.rho11)?;
    Ok(FilterOutput {
        record: TrajectoryRecord { times: run.times.clone(), states, samples, derived, seed: 0, settings: settings.clone() },
        likelihood,
    })
}

/// Raw record rows (`t` at interval start) for a simulated trajectory.
pub fn record_rows(record: &TrajectoryRecord) -> RecordData {
    let offset = record.settings.signal_offset;
    let n = record.samples.len();
    let q = (record.settings.mode == AmplifierMode::PhasePreserving)
        .then(|| record.samples.iter().map(|x| x.q_bar.unwrap_or(0.0)).collect());
    RecordData {
        times: record.times[..n].to_vec(),
        i: record.samples.iter().map(|x| x.i_bar + offset).collect(),
        q,
    }
}

/// Calibration consistent with the simulated signal convention.
pub fn simulated_calibration(record: &TrajectoryRecord) -> Calibration {
    let offset = record.settings.signal_offset;
    Calibration {
        spectral_density: record.settings.spectral_density,
        i0: Trace::Samples(record.derived.iter().map(|d| offset - d.delta_i / 2.0).collect()),
        i1: Trace::Samples(record.derived.iter().map(|d| offset + d.delta_i / 2.0).collect()),
        q0: Trace::Constant(0.0),
    }
}

/// Per-time ensemble statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub n_traj: usize,
    pub seed: u64,
    pub times: Vec<f64>,
    pub mean_rho11: Vec<f64>,
    pub se_rho11: Vec<f64>,
    pub mean_rho10: Vec<C64>,
    /// Standard error of the complex mean, `sqrt(E|z - mean|^2 / n)`.
    pub se_rho10: Vec<f64>,
    pub mean_purity: Vec<f64>,
    /// Counts of final `rho11` in equal bins over `[0, 1]`.
    pub final_rho11_histogram: Vec<usize>,
}

#[derive(Clone)]
struct Moments {
    r11: Vec<f64>,
    r11_sq: Vec<f64>,
    r10: Vec<C64>,
    r10_sq: Vec<f64>,
    purity: Vec<f64>,
    hist: Vec<usize>,
}

impl Moments {
    fn zero(len: usize, bins: usize) -> Self {
        Self {
            r11: vec![0.0; len],
            r11_sq: vec![0.0; len],
            r10: vec![C64::new(0.0, 0.0); len],
            r10_sq: vec![0.0; len],
            purity: vec![0.0; len],
            hist: vec![0; bins],
        }
    }

    fn add_states(&mut self, states: &[HybridState]) {
        for (k, s) in states.iter().enumerate() {
            self.r11[k] += s.rho11;
            self.r11_sq[k] += s.rho11 * s.rho11;
            self.r10[k] += s.rho10;
            self.r10_sq[k] += s.rho10.norm_sqr();
            self.purity[k] += s.purity();
        }
        let last = states.last().map_or(0.0, |s| s.rho11);
        let bins = self.hist.len();
        self.hist[((last * bins as f64) as usize).min(bins - 1)] += 1;
    }

    fn merge(&mut self, o: &Moments) {
        for k in 0..self.r11.len() {
            self.r11[k] += o.r11[k];
            self.r11_sq[k] += o.r11_sq[k];
            self.r10[k] += o.r10[k];
            self.r10_sq[k] += o.r10_sq[k];
            self.purity[k] += o.purity[k];
        }
        for (a, b) in self.hist.iter_mut().zip(&o.hist) {
            *a += b;
        }
    }
}

/// Trajectories per reduction block; fixed so sums do not depend on the
/// thread count.
const BLOCK: usize = 64;

/// Runs `n_traj` trajectories with seeds `seed..seed + n_traj` and reduces
/// them in a fixed order.
pub fn ensemble_stats(run: &Run, n_traj: usize, seed: u64, bins: usize) -> Result<EnsembleSummary> {
    if n_traj == 0 {
        return Err(Error::Config(vec![crate::error::Violation::new("trajectories", "must be at least 1")]));
    }
    let len = run.times.len();
    let bins = bins.max(1);
    let blocks: Vec<Result<Moments>> = (0..n_traj.div_ceil(BLOCK))
        .into_par_iter()
        .map(|b| {
            let mut m = Moments::zero(len, bins);
            for i in b * BLOCK..((b + 1) * BLOCK).min(n_traj) {
                let rec = run_trajectory(run, seed.wrapping_add(i as u64))?;
                m.add_states(&rec.states);
            }
            Ok(m)
        })
        .collect();
    let mut total = Moments::zero(len, bins);
    for b in blocks {
        total.merge(&b?);
    }
    let n = n_traj as f64;
    let se = |sum: f64, sq: f64| {
        if n_traj < 2 {
            0.0
        } else {
            ((sq / n - (sum / n).powi(2)).max(0.0) * n / (n - 1.0) / n).sqrt()
        }
    };
    Ok(EnsembleSummary {
        n_traj,
        seed,
        times: run.times.clone(),
        mean_rho11: total.r11.iter().map(|x| x / n).collect(),
        se_rho11: (0..len).map(|k| se(total.r11[k], total.r11_sq[k])).collect(),
        mean_rho10: total.r10.iter().map(|x| x / n).collect(),
        se_rho10: (0..len)
            .map(|k| {
                if n_traj < 2 {
                    0.0
                } else {
                    ((total.r10_sq[k] / n - (total.r10[k] / n).norm_sqr()).max(0.0) / (n - 1.0)).sqrt()
                }
            })
            .collect(),
        mean_purity: total.purity.iter().map(|x| x / n).collect(),
        final_rho11_histogram: total.hist,
    })
}
