//! Classical evolution of the two branch fields and the quantities derived
//! from them (dephasing, Stark shifts, signal response, back-action).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{AmplifierMode, Configuration, HybridState, MeasurementSettings, SystemParams};
use crate::C64;

const I: C64 = C64::new(0.0, 1.0);

/// Complex decay rate of branch `j`: `i(omega_r -/+ chi - omega_d) + kappa/2`.
pub fn branch_rate(params: &SystemParams, j: usize) -> C64 {
    C64::new(params.kappa / 2.0, params.branch_detuning(j))
}

/// Fixed point of the branch-`j` field for a constant drive `epsilon`.
pub fn steady_state_field(params: &SystemParams, j: usize, epsilon: C64) -> C64 {
    -I * epsilon / branch_rate(params, j)
}

/// Time derivative of the branch-`j` field.
pub fn field_rate(params: &SystemParams, j: usize, alpha: C64, epsilon: C64) -> C64 {
    -branch_rate(params, j) * alpha - I * epsilon
}

/// `(1 - exp(-lambda dt)) / lambda`, accurate for small `lambda dt`.
fn decay_integral(lambda: C64, dt: f64) -> C64 {
    let x = lambda * dt;
    if x.norm() < 1e-3 {
        dt * (1.0 - x / 2.0 + x * x / 6.0 - x * x * x / 24.0 + x * x * x * x / 120.0)
    } else {
        (1.0 - (-x).exp()) / lambda
    }
}

/// Exact step of one branch field. Returns the new amplitude and the
/// integral of `alpha` over the step.
pub fn advance_branch(params: &SystemParams, j: usize, alpha: C64, epsilon: C64, dt: f64) -> (C64, C64) {
    let lambda = branch_rate(params, j);
    let ss = -I * epsilon / lambda;
    let deviation = alpha - ss;
    let next = ss + deviation * (-lambda * dt).exp();
    let integral = ss * dt + deviation * decay_integral(lambda, dt);
    (next, integral)
}

/// Advances both fields and overall phases over `[t, t + dt]`.
/// The drive must be constant on that interval.
pub fn advance_fields(state: &HybridState, params: &SystemParams, t: f64, dt: f64) -> HybridState {
    let eps = params.drive.value_at(t);
    let (a0, int0) = advance_branch(params, 0, state.alpha0, eps, dt);
    let (a1, int1) = advance_branch(params, 1, state.alpha1, eps, dt);
    HybridState {
        alpha0: a0,
        alpha1: a1,
        phase0: state.phase0 + (eps.conj() * int0).re,
        phase1: state.phase1 + (eps.conj() * int1).re,
        ..*state
    }
}

/// Outgoing field amplitude for the resonator field `alpha`.
pub fn outgoing_field(params: &SystemParams, alpha: C64, epsilon: C64) -> Result<C64> {
    if params.kappa_out <= 0.0 {
        return Err(Error::NoOutputCoupling);
    }
    let root = params.kappa_out.sqrt();
    Ok(match params.configuration {
        Configuration::Transmission => root * alpha,
        Configuration::Reflection => root * alpha + I * epsilon / root,
    })
}

/// Dispersive shift of a weakly anharmonic qubit,
/// `(omega_r/omega_q) g^2 delta_q / (Delta (Delta - delta_q))`.
pub fn chi_estimate(g: f64, delta_q: f64, big_delta: f64, omega_r: f64, omega_q: f64) -> Result<f64> {
    let den = big_delta * (big_delta - delta_q) * omega_q;
    if den == 0.0 || !den.is_finite() {
        return Err(Error::SingularChi);
    }
    Ok(omega_r * g * g * delta_q / den)
}

/// Weak-coupling ensemble dephasing `8 chi^2 nbar / kappa / (1 + (2 detuning/kappa)^2)`.
pub fn bad_cavity_dephasing(chi: f64, kappa: f64, detuning_rd: f64, nbar: f64) -> f64 {
    let d = 2.0 * detuning_rd / kappa;
    8.0 * chi * chi * nbar / kappa / (1.0 + d * d)
}

/// Weak-coupling ac Stark shift `2 chi nbar`.
pub fn bad_cavity_stark(chi: f64, nbar: f64) -> f64 {
    2.0 * chi * nbar
}

/// Measurement-relevant quantities at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedQuantities {
    /// Ensemble dephasing rate `(kappa/2)|alpha1 - alpha0|^2`.
    pub gamma_d: f64,
    /// `d/dt (|alpha1 - alpha0|^2 / 2)`.
    pub delta_gamma: f64,
    pub stark_1: f64,
    pub stark_2: f64,
    pub stark_3: f64,
    pub stark_s: f64,
    /// `2 chi Re(alpha1* alpha0) - stark_3`; equals `stark_s` identically.
    pub stark_s_alt: f64,
    pub phi_opt: f64,
    pub phi_d: f64,
    pub delta_i_max: f64,
    /// Response in the measured (phase-sensitive) or informational
    /// (phase-preserving) quadrature.
    pub delta_i: f64,
    pub back_action_k: f64,
    /// Dephasing not accounted for by the collected signal.
    pub gamma: f64,
    pub eta: f64,
}

/// Evaluates all derived quantities for `state` at time `t`. Time
/// derivatives come from the field equations, not finite differences.
pub fn derived_quantities(
    state: &HybridState,
    params: &SystemParams,
    settings: &MeasurementSettings,
    t: f64,
) -> DerivedQuantities {
    let eps = params.drive.value_at(t);
    let (a0, a1) = (state.alpha0, state.alpha1);
    let (r0, r1) = (field_rate(params, 0, a0, eps), field_rate(params, 1, a1, eps));
    let diff = a1 - a0;
    let kappa = params.kappa;
    let s_i = settings.spectral_density;
    let eta = settings.eta(params);

    let gamma_d = kappa / 2.0 * diff.norm_sqr();
    let delta_gamma = (diff.conj() * (r1 - r0)).re;
    let overlap = a1.conj() * a0;
    let stark_1 = kappa * overlap.im;
    let stark_2 = (eps.conj() * diff).re;
    let stark_3 = (r1.conj() * a0 + a1.conj() * r0).im;
    let stark_s = stark_1 + stark_2;
    let stark_s_alt = 2.0 * params.chi * overlap.re - stark_3;

    let phi_opt = if diff == C64::new(0.0, 0.0) { 0.0 } else { diff.arg() };
    let delta_i_max = (2.0 * eta * kappa * s_i).sqrt() * diff.norm();
    let (phi_d, delta_i, back_action_k, gamma) = match settings.mode {
        AmplifierMode::PhaseSensitive => {
            let phi_d = settings.amplified_phase.value_at(t) - phi_opt;
            let k = delta_i_max * phi_d.sin() / s_i;
            let g = gamma_d - delta_i_max * delta_i_max / (4.0 * s_i);
            (phi_d, delta_i_max * phi_d.cos(), k, g)
        }
        AmplifierMode::PhasePreserving => {
            let di = (eta * kappa * s_i).sqrt() * diff.norm();
            let g = gamma_d - 2.0 * di * di / (4.0 * s_i);
            (0.0, di, di / s_i, g)
        }
    };
    DerivedQuantities {
        gamma_d,
        delta_gamma,
        stark_1,
        stark_2,
        stark_3,
        stark_s,
        stark_s_alt,
        phi_opt,
        phi_d,
        delta_i_max,
        delta_i,
        back_action_k,
        gamma: gamma.max(0.0),
        eta,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Schedule;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn close(a: C64, b: C64, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    fn rk4(params: &SystemParams, j: usize, mut a: C64, eps: C64, t: f64, n: usize) -> (C64, f64) {
        // field and phase integrated as one system
        let h = t / n as f64;
        let mut phi = 0.0;
        let f = |a: C64| (field_rate(params, j, a, eps), (eps.conj() * a).re);
        for _ in 0..n {
            let (k1, p1) = f(a);
            let (k2, p2) = f(a + k1 * (h / 2.0));
            let (k3, p3) = f(a + k2 * (h / 2.0));
            let (k4, p4) = f(a + k3 * h);
            a += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
            phi += (p1 + 2.0 * p2 + 2.0 * p3 + p4) * (h / 6.0);
        }
        (a, phi)
    }

    #[test]
    fn no_drive_no_field() {
        let p = SystemParams::ideal(0.3, 0.2, 1.0, c(0.0, 0.0));
        assert_eq!(steady_state_field(&p, 0, c(0.0, 0.0)), c(0.0, 0.0));
    }

    #[test]
    fn resonant_steady_state() {
        // drive tuned to the branch-1 frequency
        let p = SystemParams::ideal(-0.5, 0.5, 4.0, c(1.0, 0.0));
        assert!(close(steady_state_field(&p, 1, c(1.0, 0.0)), c(0.0, -0.5), 1e-15));
    }

    #[test]
    fn detuned_steady_state_matches_long_integration() {
        // omega_r - chi - omega_d = 1
        let p = SystemParams::ideal(1.5, 0.5, 2.0, c(1.0, 0.0));
        let ss = steady_state_field(&p, 0, c(1.0, 0.0));
        assert!(close(ss, c(-0.5, -0.5), 1e-15));
        let (a, _) = rk4(&p, 0, c(0.0, 0.0), c(1.0, 0.0), 30.0, 60000);
        assert!(close(a, ss, 1e-8));
    }

    #[test]
    fn steady_states_lie_on_the_circle() {
        let eps = c(0.7, -0.2);
        let kappa = 1.3;
        for det in [-3.0, -0.4, 0.0, 0.9, 5.0] {
            let p = SystemParams::ideal(det, 0.1, kappa, eps);
            let centre = -I * eps / kappa;
            for j in 0..2 {
                let a = steady_state_field(&p, j, eps);
                assert!(((a - centre).norm() - centre.norm()).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn free_decay_halves_amplitude() {
        let p = SystemParams::ideal(0.0, 0.0, 1.0, c(0.0, 0.0));
        let s = HybridState::with_field(1.0, 0.0, c(0.0, 0.0), c(1.0, 2.0)).unwrap();
        let n = advance_fields(&s, &p, 0.0, 2.0 * 2f64.ln());
        assert!(close(n.alpha0, c(0.5, 1.0), 1e-15));
        assert!(close(n.alpha1, c(0.5, 1.0), 1e-15));
    }

    #[test]
    fn fixed_point_is_preserved() {
        let eps = c(0.4, 0.3);
        let p = SystemParams::ideal(0.2, 0.3, 1.0, eps);
        let (s0, s1) = (steady_state_field(&p, 0, eps), steady_state_field(&p, 1, eps));
        let s = HybridState::new(0.5, 0.5, c(0.0, 0.0), s0, s1).unwrap();
        let n = advance_fields(&s, &p, 0.0, 0.37);
        assert!(close(n.alpha0, s0, 1e-15) && close(n.alpha1, s1, 1e-15));
    }

    #[test]
    fn exact_step_matches_fine_runge_kutta() {
        let eps = c(0.8, -0.6);
        let p = SystemParams::ideal(0.35, -0.6, 1.0, eps);
        let s = HybridState::new(0.5, 0.5, c(0.0, 0.0), c(0.3, 0.1), c(-0.2, 0.4)).unwrap();
        let n = advance_fields(&s, &p, 0.0, 1.7);
        let (a0, phi0) = rk4(&p, 0, s.alpha0, eps, 1.7, 4000);
        let (a1, phi1) = rk4(&p, 1, s.alpha1, eps, 1.7, 4000);
        assert!(close(n.alpha0, a0, 1e-10));
        assert!(close(n.alpha1, a1, 1e-10));
        assert!((n.phase0 - phi0).abs() < 1e-10, "{} {}", n.phase0, phi0);
        assert!((n.phase1 - phi1).abs() < 1e-10);
    }

    #[test]
    fn many_small_steps_equal_one_large() {
        let eps = c(0.8, -0.6);
        let p = SystemParams::ideal(0.35, -0.6, 1.0, eps);
        let s = HybridState::new(0.5, 0.5, c(0.0, 0.0), c(0.3, 0.1), c(-0.2, 0.4)).unwrap();
        let big = advance_fields(&s, &p, 0.0, 1.0);
        let mut small = s;
        for k in 0..1000 {
            small = advance_fields(&small, &p, k as f64 * 1e-3, 1e-3);
        }
        assert!(close(big.alpha1, small.alpha1, 1e-12));
        assert!((big.phase0 - small.phase0).abs() < 1e-12);
    }

    #[test]
    fn outgoing_field_configurations() {
        let mut p = SystemParams::ideal(0.0, 0.0, 4.0, c(1.0, 0.0));
        assert_eq!(outgoing_field(&p, c(0.0, 0.0), c(1.0, 0.0)).unwrap(), c(0.0, 0.0));
        assert!(close(outgoing_field(&p, c(1.0, 1.0), c(1.0, 0.0)).unwrap(), c(2.0, 2.0), 1e-15));
        p.kappa = 1.0;
        p.kappa_out = 1.0;
        p.configuration = Configuration::Reflection;
        assert!(close(outgoing_field(&p, c(0.0, 0.0), c(1.0, 0.0)).unwrap(), c(0.0, 1.0), 1e-15));
        p.kappa_out = 0.0;
        assert!(matches!(outgoing_field(&p, c(0.0, 0.0), c(1.0, 0.0)), Err(Error::NoOutputCoupling)));
    }

    #[test]
    fn reflected_steady_state_is_drive_independent_on_resonance() {
        // single-port reflection from a resonant cavity flips the sign only
        let eps = c(0.3, 0.0);
        let mut p = SystemParams::ideal(0.0, 0.0, 1.0, eps);
        p.configuration = Configuration::Reflection;
        let f = outgoing_field(&p, steady_state_field(&p, 0, eps), eps).unwrap();
        assert!((f.norm() - (eps / p.kappa.sqrt()).norm()).abs() < 1e-15);
    }

    #[test]
    fn chi_estimates() {
        assert_eq!(chi_estimate(0.1, 0.0, 1.0, 1.0, 1.0).unwrap(), 0.0);
        assert!(chi_estimate(0.1, -0.3, -0.3, 1.0, 1.0).is_err());
        assert!(chi_estimate(0.1, -0.3, 0.0, 1.0, 1.0).is_err());
        let x = chi_estimate(0.1, -0.3, 1.0, 1.0, 1.0).unwrap();
        assert!((x - (-0.003 / 1.3)).abs() < 1e-15);
        assert!((x + 2.3077e-3).abs() < 1e-7);
    }

    fn generic() -> (SystemParams, HybridState, MeasurementSettings) {
        let p = SystemParams::ideal(0.25, 0.4, 1.0, c(0.9, 0.3));
        let s = HybridState::new(0.4, 0.6, c(0.1, 0.2), c(0.3, -0.5), c(-0.7, 0.2)).unwrap();
        (p, s, MeasurementSettings::phase_sensitive(0.3))
    }

    #[test]
    fn identical_fields_carry_no_information() {
        let (p, mut s, m) = generic();
        let eps = p.drive.value_at(0.0);
        let ss = steady_state_field(&SystemParams { chi: 0.0, ..p.clone() }, 0, eps);
        s.alpha0 = ss;
        s.alpha1 = ss;
        let d = derived_quantities(&s, &SystemParams { chi: 0.0, ..p.clone() }, &m, 0.0);
        assert_eq!(d.gamma_d, 0.0);
        assert_eq!(d.delta_i_max, 0.0);
        assert_eq!(d.phi_opt, 0.0);
        assert_eq!(d.back_action_k, 0.0);
        // with chi != 0 the Stark shift of equal fields is 2 chi |alpha|^2 minus stark_3
        let d = derived_quantities(&s, &p, &m, 0.0);
        assert!((d.stark_s - (2.0 * p.chi * ss.norm_sqr() - d.stark_3)).abs() < 1e-14);
    }

    #[test]
    fn equal_steady_fields_give_bad_cavity_stark_shift() {
        let eps = c(0.5, 0.0);
        let p = SystemParams::ideal(0.0, 0.0, 1.0, eps);
        let ss = steady_state_field(&p, 0, eps);
        let s = HybridState::new(0.5, 0.5, c(0.0, 0.0), ss, ss).unwrap();
        let chi = 0.3;
        let d = derived_quantities(&s, &SystemParams { chi, ..p.clone() }, &MeasurementSettings::default(), 0.0);
        assert_eq!(d.gamma_d, 0.0);
        // fields are not stationary under chi != 0, so stark_3 contributes
        assert!((d.stark_s + d.stark_3 - 2.0 * chi * ss.norm_sqr()).abs() < 1e-14);
        let d0 = derived_quantities(&s, &p, &MeasurementSettings::default(), 0.0);
        assert_eq!(d0.stark_3, 0.0);
        assert_eq!(d0.stark_s, 0.0);
    }

    #[test]
    fn zero_chi_steady_state_has_no_differences() {
        let eps = c(0.5, 0.2);
        let p = SystemParams::ideal(0.3, 0.0, 1.0, eps);
        let ss = steady_state_field(&p, 0, eps);
        let s = HybridState::new(0.5, 0.5, c(0.1, 0.0), ss, steady_state_field(&p, 1, eps)).unwrap();
        let d = derived_quantities(&s, &p, &MeasurementSettings::default(), 0.0);
        assert_eq!((d.gamma_d, d.delta_gamma, d.delta_i_max), (0.0, 0.0, 0.0));
        assert_eq!(d.stark_s, 0.0);
    }

    #[test]
    fn stark_3_matches_central_difference() {
        let (p, s, m) = generic();
        let d = derived_quantities(&s, &p, &m, 0.0);
        let im = |st: &HybridState| (st.alpha1.conj() * st.alpha0).im;
        let mut prev = 1.0;
        for h in [1e-2, 5e-3, 2.5e-3] {
            let plus = advance_fields(&s, &p, 0.0, h);
            // backward exact step: integrate with negative dt
            let minus = advance_fields(&s, &p, 0.0, -h);
            let fd = (im(&plus) - im(&minus)) / (2.0 * h);
            let err = (fd - d.stark_3).abs();
            assert!(err < 1e-3);
            if prev < 1.0 {
                // second order: halving h cuts the error by ~4
                assert!(err < prev / 3.0, "{err} vs {prev}");
            }
            prev = err;
        }
        let im_gamma = |st: &HybridState| 0.5 * (st.alpha1 - st.alpha0).norm_sqr();
        let h = 1e-4;
        let fd = (im_gamma(&advance_fields(&s, &p, 0.0, h)) - im_gamma(&advance_fields(&s, &p, 0.0, -h))) / (2.0 * h);
        assert!((fd - d.delta_gamma).abs() < 1e-7);
    }

    #[test]
    fn sum_rules_hold_on_generic_state() {
        let (p, s, m) = generic();
        let d = derived_quantities(&s, &p, &m, 0.0);
        let ov = s.alpha1.conj() * s.alpha0;
        assert!((d.gamma_d + d.delta_gamma - 2.0 * p.chi * ov.im).abs() < 1e-14);
        assert!((d.stark_s + d.stark_3 - 2.0 * p.chi * ov.re).abs() < 1e-14);
        assert!((d.stark_s - d.stark_s_alt).abs() < 1e-14);
    }

    #[test]
    fn response_normalization() {
        let (p, s, _) = generic();
        for eta_amp in [1.0, 0.6, 0.0] {
            let m = MeasurementSettings { eta_amp, ..MeasurementSettings::phase_sensitive(1.1) };
            let d = derived_quantities(&s, &p, &m, 0.0);
            assert!((d.gamma - (1.0 - eta_amp) * d.gamma_d).abs() < 1e-14);
            let m = MeasurementSettings { eta_amp, ..MeasurementSettings::phase_preserving() };
            let d = derived_quantities(&s, &p, &m, 0.0);
            assert!((d.gamma - (1.0 - eta_amp) * d.gamma_d).abs() < 1e-14);
            assert!((2.0 * d.delta_i * d.delta_i - d.delta_i_max * d.delta_i_max).abs() < 1e-14);
        }
    }

    #[test]
    fn amplified_phase_schedule_is_honoured() {
        let (p, s, mut m) = generic();
        m.amplified_phase = Schedule::from_segments(vec![
            crate::model::Segment { start: 0.0, value: 0.0 },
            crate::model::Segment { start: 1.0, value: 1.0 },
        ]);
        let a = derived_quantities(&s, &p, &m, 0.5);
        let b = derived_quantities(&s, &p, &m, 1.5);
        assert!((b.phi_d - a.phi_d - 1.0).abs() < 1e-15);
    }

    #[test]
    fn bad_cavity_formulas() {
        assert!((bad_cavity_dephasing(0.1, 1.0, 0.0, 2.0) - 0.16).abs() < 1e-15);
        assert!((bad_cavity_dephasing(0.1, 1.0, 0.5, 2.0) - 0.08).abs() < 1e-15);
        assert_eq!(bad_cavity_stark(0.1, 2.0), 0.4);
    }
}
