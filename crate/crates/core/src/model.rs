//! Shared domain types and their invariants.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Violation};
use crate::fields::DerivedQuantities;
use crate::C64;

/// Tolerance on `rho00 + rho11 = 1` and on the Cauchy-Schwarz bound.
pub const STATE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Configuration {
    #[default]
    Transmission,
    Reflection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AmplifierMode {
    #[default]
    PhaseSensitive,
    PhasePreserving,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment<T> {
    pub start: f64,
    pub value: T,
}

/// Piecewise-constant function of time. Segment `k` holds on
/// `[start_k, start_{k+1})`; before the first start the value is `T::default()`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Schedule<T> {
    segments: Vec<Segment<T>>,
}

impl<T: Copy + Default> Schedule<T> {
    pub fn constant(value: T) -> Self {
        Self { segments: vec![Segment { start: 0.0, value }] }
    }

    pub fn from_segments(segments: Vec<Segment<T>>) -> Self {
        Self { segments }
    }

    pub fn segments(&self) -> &[Segment<T>] {
        &self.segments
    }

    pub fn value_at(&self, t: f64) -> T {
        // last segment whose start <= t
        let k = self.segments.partition_point(|s| s.start <= t);
        if k == 0 {
            T::default()
        } else {
            self.segments[k - 1].value
        }
    }

    pub fn breakpoints(&self) -> impl Iterator<Item = f64> + '_ {
        self.segments.iter().map(|s| s.start)
    }

    fn check(&self, field: &str, finite: impl Fn(&T) -> bool, out: &mut Vec<Violation>) {
        for (k, s) in self.segments.iter().enumerate() {
            if !s.start.is_finite() {
                out.push(Violation::new(format!("{field}[{k}].start"), "must be finite"));
            }
            if !finite(&s.value) {
                out.push(Violation::new(format!("{field}[{k}].value"), "must be finite"));
            }
            if k > 0 && s.start <= self.segments[k - 1].start {
                out.push(Violation::new(
                    format!("{field}[{k}].start"),
                    "segment boundaries must be strictly increasing",
                ));
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    /// omega_r - omega_d
    pub detuning_rd: f64,
    pub chi: f64,
    pub kappa: f64,
    pub kappa_out: f64,
    pub kappa_col: f64,
    /// Drive envelope epsilon(t) in the rotating frame.
    pub drive: Schedule<C64>,
    #[serde(default)]
    pub configuration: Configuration,
}

impl SystemParams {
    /// Ideal single-port resonator with constant drive.
    pub fn ideal(detuning_rd: f64, chi: f64, kappa: f64, drive: C64) -> Self {
        Self {
            detuning_rd,
            chi,
            kappa,
            kappa_out: kappa,
            kappa_col: kappa,
            drive: Schedule::constant(drive),
            configuration: Configuration::Transmission,
        }
    }

    /// Collection efficiency kappa_col / kappa.
    pub fn eta_col(&self) -> f64 {
        self.kappa_col / self.kappa
    }

    /// Detuning of branch `j` from the drive, omega_r -/+ chi - omega_d.
    pub fn branch_detuning(&self, j: usize) -> f64 {
        if j == 1 {
            self.detuning_rd + self.chi
        } else {
            self.detuning_rd - self.chi
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementSettings {
    pub mode: AmplifierMode,
    #[serde(default = "zero_phase")]
    pub amplified_phase: Schedule<f64>,
    #[serde(default = "one")]
    pub spectral_density: f64,
    #[serde(default = "one")]
    pub eta_amp: f64,
    #[serde(default)]
    pub gamma_int: f64,
    #[serde(default)]
    pub signal_offset: f64,
}

fn zero_phase() -> Schedule<f64> {
    Schedule::constant(0.0)
}

fn one() -> f64 {
    1.0
}

impl Default for MeasurementSettings {
    fn default() -> Self {
        Self {
            mode: AmplifierMode::PhaseSensitive,
            amplified_phase: zero_phase(),
            spectral_density: 1.0,
            eta_amp: 1.0,
            gamma_int: 0.0,
            signal_offset: 0.0,
        }
    }
}

impl MeasurementSettings {
    pub fn phase_sensitive(phi_a: f64) -> Self {
        Self { amplified_phase: Schedule::constant(phi_a), ..Self::default() }
    }

    pub fn phase_preserving() -> Self {
        Self { mode: AmplifierMode::PhasePreserving, ..Self::default() }
    }

    /// Total quantum efficiency for the given resonator couplings.
    pub fn eta(&self, params: &SystemParams) -> f64 {
        params.eta_col() * self.eta_amp
    }
}

/// Parameters that passed [`validate`], with the derived efficiency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckedConfig {
    pub params: SystemParams,
    pub settings: MeasurementSettings,
    pub eta_col: f64,
    pub eta: f64,
}

/// Checks every bound on the parameters and reports all violations at once.
pub fn validate(params: &SystemParams, settings: &MeasurementSettings) -> Result<CheckedConfig> {
    let mut v = Vec::new();
    for (name, x) in [
        ("detuning_rd", params.detuning_rd),
        ("chi", params.chi),
        ("kappa", params.kappa),
        ("kappa_out", params.kappa_out),
        ("kappa_col", params.kappa_col),
        ("spectral_density", settings.spectral_density),
        ("eta_amp", settings.eta_amp),
        ("gamma_int", settings.gamma_int),
        ("signal_offset", settings.signal_offset),
    ] {
        if !x.is_finite() {
            v.push(Violation::new(name, "must be finite"));
        }
    }
    if params.kappa.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
        v.push(Violation::new("kappa", "must be positive"));
    }
    if params.kappa_col < 0.0 {
        v.push(Violation::new("kappa_col", "must be non-negative"));
    }
    if params.kappa_col > params.kappa_out {
        v.push(Violation::new("kappa_col", "kappa_col exceeds kappa_out"));
    }
    if params.kappa_out > params.kappa {
        v.push(Violation::new("kappa_out", "kappa_out exceeds kappa"));
    }
    params.drive.check("drive", |z| z.re.is_finite() && z.im.is_finite(), &mut v);
    settings.amplified_phase.check("amplified_phase", |x| x.is_finite(), &mut v);
    if settings.spectral_density.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
        v.push(Violation::new("spectral_density", "must be positive"));
    }
    if !(0.0..=1.0).contains(&settings.eta_amp) {
        v.push(Violation::new("eta_amp", "must lie in [0, 1]"));
    }
    if settings.gamma_int < 0.0 {
        v.push(Violation::new("gamma_int", "must be non-negative"));
    }
    if !v.is_empty() {
        return Err(Error::Config(v));
    }
    let eta_col = params.eta_col();
    Ok(CheckedConfig {
        params: params.clone(),
        settings: settings.clone(),
        eta_col,
        eta: eta_col * settings.eta_amp,
    })
}

/// Qubit density matrix entangled with one coherent field per qubit branch.
///
/// Only `rho10` is stored; `rho01` is its conjugate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawHybridState")]
pub struct HybridState {
    pub(crate) rho00: f64,
    pub(crate) rho11: f64,
    pub(crate) rho10: C64,
    pub(crate) alpha0: C64,
    pub(crate) alpha1: C64,
    pub(crate) phase0: f64,
    pub(crate) phase1: f64,
}

#[derive(Deserialize)]
struct RawHybridState {
    rho00: f64,
    rho11: f64,
    rho10: C64,
    alpha0: C64,
    alpha1: C64,
    #[serde(default)]
    phase0: f64,
    #[serde(default)]
    phase1: f64,
}

impl TryFrom<RawHybridState> for HybridState {
    type Error = Error;

    fn try_from(r: RawHybridState) -> Result<Self> {
        HybridState::new(r.rho00, r.rho11, r.rho10, r.alpha0, r.alpha1)
            .map(|s| s.with_phases(r.phase0, r.phase1))
    }
}

impl HybridState {
    pub fn new(rho00: f64, rho11: f64, rho10: C64, alpha0: C64, alpha1: C64) -> Result<Self> {
        let s = Self { rho00, rho11, rho10, alpha0, alpha1, phase0: 0.0, phase1: 0.0 };
        s.check()?;
        Ok(s)
    }

    /// Product state with both branches sharing the initial field `alpha_in`.
    pub fn with_field(rho00: f64, rho11: f64, rho10: C64, alpha_in: C64) -> Result<Self> {
        Self::new(rho00, rho11, rho10, alpha_in, alpha_in)
    }

    /// Pure state `c0|0>|alpha0> + c1|1>|alpha1>`.
    pub fn pure(c0: C64, c1: C64, alpha0: C64, alpha1: C64) -> Result<Self> {
        let n = c0.norm_sqr() + c1.norm_sqr();
        if (n - 1.0).abs() > STATE_TOL {
            return Err(Error::InvalidState(format!("|c0|^2 + |c1|^2 = {n}")));
        }
        Self::new(c0.norm_sqr(), c1.norm_sqr(), c1 * c0.conj(), alpha0, alpha1)
    }

    pub fn with_phases(mut self, phase0: f64, phase1: f64) -> Self {
        self.phase0 = phase0;
        self.phase1 = phase1;
        self
    }

    pub fn check(&self) -> Result<()> {
        let finite = [self.rho00, self.rho11, self.rho10.re, self.rho10.im]
            .iter()
            .chain(&[self.alpha0.re, self.alpha0.im, self.alpha1.re, self.alpha1.im])
            .chain(&[self.phase0, self.phase1])
            .all(|x| x.is_finite());
        if !finite {
            return Err(Error::InvalidState("non-finite component".into()));
        }
        for (name, p) in [("rho00", self.rho00), ("rho11", self.rho11)] {
            if !(-STATE_TOL..=1.0 + STATE_TOL).contains(&p) {
                return Err(Error::InvalidState(format!("{name} = {p} outside [0, 1]")));
            }
        }
        if (self.rho00 + self.rho11 - 1.0).abs() > STATE_TOL {
            return Err(Error::InvalidState(format!(
                "rho00 + rho11 = {}",
                self.rho00 + self.rho11
            )));
        }
        if self.rho10.norm_sqr() > self.rho00 * self.rho11 + STATE_TOL {
            return Err(Error::InvalidState("|rho10|^2 exceeds rho00*rho11".into()));
        }
        Ok(())
    }

    pub fn rho00(&self) -> f64 {
        self.rho00
    }
    pub fn rho11(&self) -> f64 {
        self.rho11
    }
    pub fn rho10(&self) -> C64 {
        self.rho10
    }
    pub fn rho01(&self) -> C64 {
        self.rho10.conj()
    }
    pub fn alpha0(&self) -> C64 {
        self.alpha0
    }
    pub fn alpha1(&self) -> C64 {
        self.alpha1
    }
    pub fn alpha(&self, j: usize) -> C64 {
        if j == 1 {
            self.alpha1
        } else {
            self.alpha0
        }
    }
    pub fn phase0(&self) -> f64 {
        self.phase0
    }
    pub fn phase1(&self) -> f64 {
        self.phase1
    }

    /// `Tr rho^2` of the joint state.
    pub fn purity(&self) -> f64 {
        self.rho00 * self.rho00 + self.rho11 * self.rho11 + 2.0 * self.rho10.norm_sqr()
    }

    /// `rho00*rho11 - |rho10|^2`; zero for pure states.
    pub fn purity_defect(&self) -> f64 {
        self.rho00 * self.rho11 - self.rho10.norm_sqr()
    }
}

/// One time-averaged, centered measurement result over an interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasurementSample {
    pub i_bar: f64,
    pub q_bar: Option<f64>,
    pub dt: f64,
    pub variance: f64,
}

impl MeasurementSample {
    pub fn new(i_bar: f64, q_bar: Option<f64>, dt: f64, spectral_density: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::NonFinite("sample duration"));
        }
        if !i_bar.is_finite() || q_bar.is_some_and(|q| !q.is_finite()) {
            return Err(Error::NonFinite("measurement sample"));
        }
        Ok(Self { i_bar, q_bar, dt, variance: spectral_density / (2.0 * dt) })
    }
}

/// Output of one simulated or filtered trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    pub states: Vec<HybridState>,
    pub samples: Vec<MeasurementSample>,
    /// Derived quantities at the start of each interval.
    pub derived: Vec<DerivedQuantities>,
    pub seed: u64,
    pub settings: MeasurementSettings,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(kappa: f64, kappa_out: f64, kappa_col: f64) -> SystemParams {
        SystemParams {
            kappa_out,
            kappa_col,
            ..SystemParams::ideal(0.0, 0.1, kappa, C64::new(1.0, 0.0))
        }
    }

    #[test]
    fn identity_efficiencies() {
        let c = validate(&params(1.0, 1.0, 1.0), &MeasurementSettings::default()).unwrap();
        assert_eq!(c.eta, 1.0);
    }

    #[test]
    fn collected_exceeding_output_is_reported() {
        let err = validate(&params(2.0, 1.0, 2.0), &MeasurementSettings::default()).unwrap_err();
        match err {
            Error::Config(v) => {
                assert!(v.iter().any(|x| x.field == "kappa_col" && x.message == "kappa_col exceeds kappa_out"))
            }
            e => panic!("{e}"),
        }
    }

    #[test]
    fn efficiency_is_product_of_ratios() {
        let s = MeasurementSettings { eta_amp: 0.5, ..Default::default() };
        let c = validate(&params(4.0, 4.0, 2.0), &s).unwrap();
        assert!((c.eta - 0.25).abs() < 1e-15);
    }

    #[test]
    fn every_violation_is_listed() {
        let mut p = params(-1.0, 1.0, 1.0);
        p.drive = Schedule::from_segments(vec![
            Segment { start: 1.0, value: C64::new(1.0, 0.0) },
            Segment { start: 1.0, value: C64::new(f64::NAN, 0.0) },
        ]);
        let s = MeasurementSettings { eta_amp: 2.0, spectral_density: 0.0, ..Default::default() };
        let Err(Error::Config(v)) = validate(&p, &s) else { panic!() };
        let fields: Vec<_> = v.iter().map(|x| x.field.as_str()).collect();
        for f in ["kappa", "drive[1].value", "drive[1].start", "eta_amp", "spectral_density"] {
            assert!(fields.contains(&f), "{f} missing from {fields:?}");
        }
    }

    #[test]
    fn schedule_lookup() {
        let s = Schedule::from_segments(vec![
            Segment { start: 1.0, value: 2.0 },
            Segment { start: 3.0, value: 5.0 },
        ]);
        assert_eq!(s.value_at(0.5), 0.0);
        assert_eq!(s.value_at(1.0), 2.0);
        assert_eq!(s.value_at(2.999), 2.0);
        assert_eq!(s.value_at(3.0), 5.0);
        assert_eq!(s.value_at(100.0), 5.0);
    }

    #[test]
    fn state_constructors_enforce_invariants() {
        let z = C64::new(0.0, 0.0);
        assert!(HybridState::new(0.5, 0.5, C64::new(0.5, 0.0), z, z).is_ok());
        assert!(HybridState::new(0.5, 0.6, z, z, z).is_err());
        assert!(HybridState::new(0.5, 0.5, C64::new(0.6, 0.0), z, z).is_err());
        assert!(HybridState::new(1.5, -0.5, z, z, z).is_err());
        assert!(HybridState::new(f64::NAN, 1.0, z, z, z).is_err());
        let p = HybridState::pure(C64::new(0.6, 0.0), C64::new(0.0, 0.8), z, z).unwrap();
        assert!(p.purity_defect().abs() < 1e-15);
        assert!((p.purity() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn invalid_state_is_rejected_on_deserialize() {
        let bad = r#"{"rho00":0.5,"rho11":0.5,"rho10":[0.9,0.0],"alpha0":[0,0],"alpha1":[0,0]}"#;
        assert!(serde_json::from_str::<HybridState>(bad).is_err());
    }

    #[test]
    fn sample_variance_is_exact() {
        let s = MeasurementSample::new(0.1, None, 0.01, 1.0).unwrap();
        assert_eq!(s.variance, 50.0);
        assert!(MeasurementSample::new(f64::INFINITY, None, 0.01, 1.0).is_err());
        assert!(MeasurementSample::new(0.0, None, 0.0, 1.0).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn state() -> impl Strategy<Value = HybridState> {
            (0.0..=1.0f64, 0.0..=1.0f64, -3.0..3.0f64, -3.0..3.0f64, -3.0..3.0f64, -3.0..3.0f64, -1.0..1.0f64, -50.0..50.0f64, -50.0..50.0f64)
                .prop_map(|(p, frac, a, b, c, d, th, f0, f1)| {
                    let r = frac * (p * (1.0 - p)).sqrt();
                    let coh = C64::from_polar(r, th * std::f64::consts::PI);
                    HybridState::new(1.0 - p, p, coh, C64::new(a, b), C64::new(c, d))
                        .unwrap()
                        .with_phases(f0, f1)
                })
        }

        proptest! {
            #[test]
            fn serde_round_trip_is_bit_exact(s in state()) {
                let text = serde_json::to_string(&s).unwrap();
                let back: HybridState = serde_json::from_str(&text).unwrap();
                prop_assert_eq!(back, s);
            }

            #[test]
            fn losing_collection_never_raises_efficiency(k in 0.1..10.0f64, out in 0.0..=1.0f64, col in 0.0..=1.0f64, less in 0.0..=1.0f64, amp in 0.0..=1.0f64) {
                let s = MeasurementSettings { eta_amp: amp, ..Default::default() };
                let mut p = params(k, k * out, k * out * col);
                let hi = validate(&p, &s).unwrap().eta;
                p.kappa_col *= less;
                let lo = validate(&p, &s).unwrap().eta;
                prop_assert!(lo <= hi);
            }
        }
    }
}
