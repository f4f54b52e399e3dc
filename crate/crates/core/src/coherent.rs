//! Coherent-state algebra and exact photon-counting homodyne collapse of
//! one leaked field piece.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::STATE_TOL;
use crate::C64;

/// `ln n!`; exact summation for small `n`, Stirling series beyond.
pub fn ln_factorial(n: u64) -> f64 {
    if n < 32 {
        (2..=n).map(|k| (k as f64).ln()).sum()
    } else {
        let x = n as f64;
        let x2 = x * x;
        x * x.ln() - x + 0.5 * (2.0 * std::f64::consts::PI * x).ln() + 1.0 / (12.0 * x)
            - 1.0 / (360.0 * x * x2)
            + 1.0 / (1260.0 * x * x2 * x2)
            - 1.0 / (1680.0 * x * x2 * x2 * x2)
    }
}

/// `ln P(n)` for a Poisson distribution with mean `mu`.
pub fn poisson_ln_pmf(mu: f64, n: u64) -> f64 {
    if mu == 0.0 {
        return if n == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    n as f64 * mu.ln() - mu - ln_factorial(n)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoherentState {
    pub amplitude: C64,
}

impl CoherentState {
    pub fn new(amplitude: C64) -> Self {
        Self { amplitude }
    }

    /// Smallest truncation keeping the norm deficit below 1e-10.
    pub fn safe_truncation(&self) -> usize {
        let n = self.amplitude.norm_sqr();
        (n + 10.0 * (n + 1.0).sqrt() + 20.0).ceil() as usize
    }

    pub fn fock(&self, n_max: usize) -> Vec<C64> {
        fock_amplitudes(self.amplitude, n_max)
    }

    /// Mean and variance of the quadrature `(a e^{-i phi} + h.c.)/2`,
    /// evaluated in the truncated Fock basis.
    pub fn quadrature_moments(&self, phi: f64, n_max: usize) -> (f64, f64) {
        let c = self.fock(n_max + 2);
        let mut a = C64::new(0.0, 0.0);
        let mut a2 = C64::new(0.0, 0.0);
        let mut num = 0.0;
        for n in 0..=n_max {
            let nf = n as f64;
            a += c[n].conj() * c[n + 1] * (nf + 1.0).sqrt();
            a2 += c[n].conj() * c[n + 2] * ((nf + 1.0) * (nf + 2.0)).sqrt();
            num += nf * c[n].norm_sqr();
        }
        let rot = C64::from_polar(1.0, -phi);
        let mean = (a * rot).re;
        let second = 0.5 * (a2 * rot * rot).re + 0.25 * (2.0 * num + 1.0);
        (mean, second - mean * mean)
    }
}

/// Fock coefficients `e^{-|alpha|^2/2} alpha^n / sqrt(n!)` for `n = 0..=n_max`.
pub fn fock_amplitudes(alpha: C64, n_max: usize) -> Vec<C64> {
    let r2 = alpha.norm_sqr();
    if r2 == 0.0 {
        let mut v = vec![C64::new(0.0, 0.0); n_max + 1];
        v[0] = C64::new(1.0, 0.0);
        return v;
    }
    let (ln_r, theta) = (alpha.norm().ln(), alpha.arg());
    (0..=n_max)
        .map(|n| {
            let lm = -r2 / 2.0 + n as f64 * ln_r - 0.5 * ln_factorial(n as u64);
            C64::from_polar(lm.exp(), n as f64 * theta)
        })
        .collect()
}

/// Photon-number probability of a coherent state.
pub fn photon_pmf(alpha: C64, n: u64) -> f64 {
    poisson_ln_pmf(alpha.norm_sqr(), n).exp()
}

/// `<alpha|beta>`.
pub fn inner_product(alpha: C64, beta: C64) -> C64 {
    let m = (-(alpha - beta).norm_sqr() / 2.0).exp();
    C64::from_polar(m, -(alpha * beta.conj()).im)
}

/// `D(alpha) D(beta) = D(alpha + beta) e^{i phase}`; returns `(alpha + beta, phase)`.
pub fn displace_compose(alpha: C64, beta: C64) -> (C64, f64) {
    (alpha + beta, -(alpha.conj() * beta).im)
}

/// Splits a coherent state on a lossless beam splitter.
pub fn beam_split(alpha: C64, t1: C64, r1: C64) -> Result<(C64, C64)> {
    let total = t1.norm_sqr() + r1.norm_sqr();
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::NonUnitary(total));
    }
    Ok((t1 * alpha, r1 * alpha))
}

/// Field piece leaked during one interval, one amplitude per qubit branch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailPiece {
    pub amp0: C64,
    pub amp1: C64,
    pub emission_time: f64,
}

impl TailPiece {
    pub fn from_fields(alpha0: C64, alpha1: C64, kappa: f64, dt: f64, t: f64) -> Self {
        let s = (kappa * dt).sqrt();
        Self { amp0: alpha0 * s, amp1: alpha1 * s, emission_time: t }
    }

    pub fn amp(&self, j: usize) -> C64 {
        if j == 1 {
            self.amp1
        } else {
            self.amp0
        }
    }
}

/// `c0|0>|alpha0> + c1|1>|alpha1>`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PureHybridState {
    pub c0: C64,
    pub c1: C64,
    pub alpha0: C64,
    pub alpha1: C64,
}

impl PureHybridState {
    pub fn new(c0: C64, c1: C64, alpha0: C64, alpha1: C64) -> Result<Self> {
        let n = c0.norm_sqr() + c1.norm_sqr();
        if !n.is_finite() || (n - 1.0).abs() > STATE_TOL {
            return Err(Error::InvalidState(format!("|c0|^2 + |c1|^2 = {n}")));
        }
        Ok(Self { c0, c1, alpha0, alpha1 })
    }

    pub fn coeff(&self, j: usize) -> C64 {
        if j == 1 {
            self.c1
        } else {
            self.c0
        }
    }

    /// Relative phase `arg(c1 c0*)`.
    pub fn relative_phase(&self) -> f64 {
        (self.c1 * self.c0.conj()).arg()
    }
}

/// Result of counting photons in one displaced tail piece.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollapseOutcome {
    pub n: u64,
    pub c0: C64,
    pub c1: C64,
    /// The pump is not much stronger than the tail piece.
    pub weak_pump: bool,
}

fn normalize_log(terms: [(f64, f64); 2]) -> (C64, C64) {
    // terms are (log-magnitude, phase)
    let m = terms[0].0.max(terms[1].0);
    let w: Vec<f64> = terms.iter().map(|t| (t.0 - m).exp()).collect();
    let norm = (w[0] * w[0] + w[1] * w[1]).sqrt();
    (C64::from_polar(w[0] / norm, terms[0].1), C64::from_polar(w[1] / norm, terms[1].1))
}

fn branch_mean(pump: C64, piece: &TailPiece, j: usize) -> f64 {
    (pump + piece.amp(j)).norm_sqr()
}

/// Default photon-number ceiling for a given pump.
pub fn default_truncation(pump: C64) -> u64 {
    let a = pump.norm() + 1.0;
    (a * a + 12.0 * a + 20.0).ceil() as u64
}

fn required_truncation(state: &PureHybridState, piece: &TailPiece, pump: C64) -> u64 {
    (0..2)
        .filter(|&j| state.coeff(j) != C64::new(0.0, 0.0))
        .map(|j| {
            let mu = branch_mean(pump, piece, j);
            (mu + 12.0 * mu.sqrt() + 20.0).ceil() as u64
        })
        .max()
        .unwrap_or(0)
}

/// Probability of counting `n` photons in the displaced piece.
pub fn collapse_probability(state: &PureHybridState, piece: &TailPiece, pump: C64, n: u64) -> f64 {
    (0..2)
        .map(|j| state.coeff(j).norm_sqr() * poisson_ln_pmf(branch_mean(pump, piece, j), n).exp())
        .sum()
}

/// Post-measurement amplitudes after counting `n` photons. The global
/// phase is fixed so that `c0` is real and non-negative when it is non-zero.
pub fn collapse_given_n(state: &PureHybridState, piece: &TailPiece, pump: C64, n: u64) -> (C64, C64) {
    let term = |j: usize| {
        let c = state.coeff(j);
        if c == C64::new(0.0, 0.0) {
            return (f64::NEG_INFINITY, 0.0);
        }
        let beta = pump + piece.amp(j);
        let displacement = -(pump.conj() * piece.amp(j)).im;
        if beta == C64::new(0.0, 0.0) {
            let lm = if n == 0 { c.norm().ln() } else { f64::NEG_INFINITY };
            return (lm, c.arg() + displacement);
        }
        let lm = c.norm().ln() - beta.norm_sqr() / 2.0 + n as f64 * beta.norm().ln();
        (lm, c.arg() + displacement + n as f64 * beta.arg())
    };
    let (mut c0, mut c1) = normalize_log([term(0), term(1)]);
    if state.c0 != C64::new(0.0, 0.0) && c0.norm() > 0.0 {
        let g = C64::from_polar(1.0, -c0.arg());
        c0 *= g;
        c1 *= g;
        c0.im = 0.0;
    }
    (c0, c1)
}

/// Samples a photon count for the displaced piece and collapses the state.
pub fn exact_homodyne_collapse<R: Rng + ?Sized>(
    state: &PureHybridState,
    piece: &TailPiece,
    pump: C64,
    rng: &mut R,
) -> Result<CollapseOutcome> {
    exact_homodyne_collapse_truncated(state, piece, pump, default_truncation(pump), rng)
}

/// As [`exact_homodyne_collapse`] with an explicit photon-number ceiling.
pub fn exact_homodyne_collapse_truncated<R: Rng + ?Sized>(
    state: &PureHybridState,
    piece: &TailPiece,
    pump: C64,
    n_max: u64,
    rng: &mut R,
) -> Result<CollapseOutcome> {
    let need = required_truncation(state, piece, pump);
    if need > n_max {
        return Err(Error::TruncationOverflow { suggested: need });
    }
    let j = if rng.random::<f64>() < state.c0.norm_sqr() { 0 } else { 1 };
    let mu = branch_mean(pump, piece, j);
    let n = sample_poisson(mu, n_max, rng);
    let (c0, c1) = collapse_given_n(state, piece, pump, n);
    let strongest = piece.amp0.norm().max(piece.amp1.norm());
    Ok(CollapseOutcome { n, c0, c1, weak_pump: pump.norm() < 10.0 * strongest })
}

/// Poisson draw by inversion, walking the pmf in the log domain from
/// twelve standard deviations below the mean.
fn sample_poisson<R: Rng + ?Sized>(mu: f64, n_max: u64, rng: &mut R) -> u64 {
    if mu == 0.0 {
        return 0;
    }
    let u: f64 = rng.random();
    let lo = (mu - 12.0 * mu.sqrt() - 20.0).max(0.0).floor() as u64;
    let ln_mu = mu.ln();
    let mut lp = poisson_ln_pmf(mu, lo);
    let mut acc = 0.0;
    let mut n = lo;
    loop {
        acc += lp.exp();
        if acc >= u || n >= n_max {
            return n;
        }
        n += 1;
        lp += ln_mu - (n as f64).ln();
    }
}

/// Gaussian-approximation collapse for pump amplitude `sigma e^{i phi_a}`.
pub fn gaussian_collapse_reference(
    state: &PureHybridState,
    piece: &TailPiece,
    phi_a: f64,
    n: f64,
    sigma: f64,
) -> (C64, C64) {
    let pump = C64::from_polar(sigma, phi_a);
    let nbar = |j: usize| sigma * sigma + 2.0 * (pump.conj() * piece.amp(j)).re;
    let (n0, n1) = (nbar(0), nbar(1));
    let nc = (n0 + n1) / 2.0;
    let rot = C64::from_polar(1.0, -phi_a);
    let delta_phi =
        -(n - nc) / sigma * ((piece.amp1 - piece.amp0) * rot).im + (piece.amp1.conj() * piece.amp0).im;
    let s4 = 4.0 * sigma * sigma;
    let lm = |c: C64, nb: f64| {
        if c == C64::new(0.0, 0.0) {
            f64::NEG_INFINITY
        } else {
            c.norm().ln() - (n - nb) * (n - nb) / s4
        }
    };
    normalize_log([
        (lm(state.c0, n0), state.c0.arg()),
        (lm(state.c1, n1), state.c1.arg() - delta_phi),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::trajectory_rng;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn ln_factorial_branches_agree() {
        let mut exact = 0.0;
        for n in 1..200u64 {
            exact += (n as f64).ln();
            assert!((ln_factorial(n) - exact).abs() < 1e-12 * exact.max(1.0), "{n}");
        }
        assert_eq!(ln_factorial(0), 0.0);
    }

    #[test]
    fn vacuum_fock_vector() {
        let v = fock_amplitudes(c(0.0, 0.0), 5);
        assert_eq!(v[0], c(1.0, 0.0));
        assert!(v[1..].iter().all(|x| *x == c(0.0, 0.0)));
    }

    #[test]
    fn unit_amplitude_ground_coefficient() {
        let v = fock_amplitudes(c(1.0, 0.0), 3);
        assert!((v[0].re - 0.60653).abs() < 1e-5);
        assert!((v[0].re - (-0.5f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn fock_norm_converges() {
        let s: f64 = fock_amplitudes(c(2.0, 0.0), 40).iter().map(|x| x.norm_sqr()).sum();
        assert!((s - 1.0).abs() < 1e-12);
        let z = CoherentState::new(c(3.0, -4.0));
        let s: f64 = z.fock(z.safe_truncation()).iter().map(|x| x.norm_sqr()).sum();
        assert!(1.0 - s < 1e-10);
    }

    #[test]
    fn photon_statistics() {
        assert_eq!(photon_pmf(c(0.0, 0.0), 0), 1.0);
        assert!((photon_pmf(c(1.0, 0.0), 1) - (-1.0f64).exp()).abs() < 1e-15);
        let a = c(0.0, 2.0);
        let mean: f64 = (0..100).map(|n| n as f64 * photon_pmf(a, n)).sum();
        assert!((mean - 4.0).abs() < 1e-10);
    }

    #[test]
    fn inner_products() {
        let a = c(0.4, -1.2);
        assert!((inner_product(a, a) - c(1.0, 0.0)).norm() < 1e-15);
        let b = c(0.7, 0.3);
        assert!((inner_product(c(0.0, 0.0), b) - c((-b.norm_sqr() / 2.0).exp(), 0.0)).norm() < 1e-15);
        let (a, b) = (c(1.0, 0.5), c(0.3, -0.2));
        let (fa, fb) = (fock_amplitudes(a, 60), fock_amplitudes(b, 60));
        let sum: C64 = fa.iter().zip(&fb).map(|(x, y)| x.conj() * y).sum();
        assert!((inner_product(a, b) - sum).norm() < 1e-10);
    }

    #[test]
    fn displacement_phases() {
        assert_eq!(displace_compose(c(1.0, 2.0), c(0.0, 0.0)).1, 0.0);
        assert_eq!(displace_compose(c(1.0, 0.0), c(-3.0, 0.0)).1, 0.0);
        let (s, p) = displace_compose(c(1.0, 0.0), c(0.0, 1.0));
        assert_eq!(s, c(1.0, 1.0));
        assert_eq!(p, -1.0);
    }

    #[test]
    fn displacement_phase_matches_fock_overlap() {
        // <0| D(a) D(b) |0> = <-a|b> and <0|D(a+b)|0> = e^{-|a+b|^2/2}
        let (a, b) = (c(0.3, -0.4), c(-0.2, 0.6));
        let (sum, p) = displace_compose(a, b);
        let lhs = inner_product(-a, b);
        let rhs = C64::from_polar((-sum.norm_sqr() / 2.0).exp(), p);
        assert!((lhs - rhs).norm() < 1e-14);
    }

    #[test]
    fn beam_splitter() {
        assert_eq!(beam_split(c(1.0, 2.0), c(1.0, 0.0), c(0.0, 0.0)).unwrap(), (c(1.0, 2.0), c(0.0, 0.0)));
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let (t, r) = beam_split(c(2.0, 0.0), c(h, 0.0), c(h, 0.0)).unwrap();
        assert!((t - c(2f64.sqrt(), 0.0)).norm() < 1e-15 && (r - t).norm() < 1e-15);
        let a = c(1.3, -0.4);
        let (t, r) = beam_split(a, c(0.6, 0.0), c(0.0, 0.8)).unwrap();
        assert!((t.norm_sqr() + r.norm_sqr() - a.norm_sqr()).abs() < 1e-14);
        assert!(beam_split(a, c(0.6, 0.0), c(0.6, 0.0)).is_err());
    }

    #[test]
    fn quadrature_statistics() {
        let z = CoherentState::new(c(1.2, -0.7));
        for phi in [0.0, 0.4, PI / 2.0, 2.5] {
            let (m, v) = z.quadrature_moments(phi, 80);
            assert!((m - (z.amplitude * C64::from_polar(1.0, -phi)).re).abs() < 1e-8);
            assert!((v - 0.25).abs() < 1e-8);
        }
    }

    fn generic() -> (PureHybridState, TailPiece) {
        let s = PureHybridState::new(c(0.6, 0.0), c(0.0, 0.8), c(0.5, -0.3), c(-0.4, 0.9)).unwrap();
        (s, TailPiece::from_fields(s.alpha0, s.alpha1, 1.0, 0.01, 0.0))
    }

    #[test]
    fn absorbing_branch() {
        let (mut s, p) = generic();
        s.c0 = c(1.0, 0.0);
        s.c1 = c(0.0, 0.0);
        let mut rng = trajectory_rng(3, 0);
        let o = exact_homodyne_collapse(&s, &p, c(50.0, 0.0), &mut rng).unwrap();
        assert_eq!(o.c1, c(0.0, 0.0));
        assert!((o.c0.norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn indistinguishable_pieces_keep_magnitudes() {
        let (s, mut p) = generic();
        p.amp1 = p.amp0;
        for n in [2300, 2500, 2731] {
            let (c0, c1) = collapse_given_n(&s, &p, C64::from_polar(50.0, 0.3), n);
            assert!((c0.norm() - s.c0.norm()).abs() < 1e-12);
            assert!((c1.norm() - s.c1.norm()).abs() < 1e-12);
        }
    }

    #[test]
    fn probability_is_conserved_over_counts() {
        let (s, p) = generic();
        let pump = C64::from_polar(50.0, 1.1);
        let mut w = [0.0; 2];
        let mut total = 0.0;
        for n in 0..=default_truncation(pump) {
            let pn = collapse_probability(&s, &p, pump, n);
            let (c0, c1) = collapse_given_n(&s, &p, pump, n);
            total += pn;
            w[0] += pn * c0.norm_sqr();
            w[1] += pn * c1.norm_sqr();
        }
        assert!((total - 1.0).abs() < 1e-10);
        assert!((w[0] - s.c0.norm_sqr()).abs() < 1e-10);
        assert!((w[1] - s.c1.norm_sqr()).abs() < 1e-10);
    }

    #[test]
    fn sampled_counts_follow_the_mixture() {
        let (s, p) = generic();
        let pump = c(30.0, 0.0);
        let mut rng = trajectory_rng(11, 0);
        let n_draws = 20000;
        let mut sum = 0.0;
        for _ in 0..n_draws {
            sum += exact_homodyne_collapse(&s, &p, pump, &mut rng).unwrap().n as f64;
        }
        let mean: f64 = (0..2).map(|j| s.coeff(j).norm_sqr() * branch_mean(pump, &p, j)).sum();
        let se = (mean / n_draws as f64).sqrt() * 1.1;
        assert!((sum / n_draws as f64 - mean).abs() < 4.0 * se);
    }

    #[test]
    fn truncation_overflow_suggests_a_ceiling() {
        let (s, p) = generic();
        let mut rng = trajectory_rng(1, 0);
        let err = exact_homodyne_collapse_truncated(&s, &p, c(50.0, 0.0), 100, &mut rng).unwrap_err();
        let Error::TruncationOverflow { suggested } = err else { panic!() };
        assert!(suggested > 2500);
        assert!(exact_homodyne_collapse_truncated(&s, &p, c(50.0, 0.0), suggested, &mut rng).is_ok());
    }

    #[test]
    fn weak_pump_is_flagged() {
        let (s, p) = generic();
        let mut rng = trajectory_rng(1, 0);
        assert!(exact_homodyne_collapse(&s, &p, c(0.5, 0.0), &mut rng).unwrap().weak_pump);
        assert!(!exact_homodyne_collapse(&s, &p, c(50.0, 0.0), &mut rng).unwrap().weak_pump);
    }

    #[test]
    fn midpoint_count_without_distinguishability() {
        let (s, mut p) = generic();
        p.amp1 = p.amp0;
        let sigma = 50.0;
        let nc = sigma * sigma + 2.0 * (C64::from_polar(sigma, 0.2).conj() * p.amp0).re;
        let (c0, c1) = gaussian_collapse_reference(&s, &p, 0.2, nc, sigma);
        assert!((c0 - s.c0).norm() < 1e-12);
        // only the overlap phase of identical pieces, which is zero
        assert!((c1 - s.c1).norm() < 1e-12);
    }

    #[test]
    fn midpoint_count_gives_ensemble_phase() {
        let (s, p) = generic();
        let (sigma, phi_a) = (50.0, 0.7);
        let pump = C64::from_polar(sigma, phi_a);
        let nc = sigma * sigma + (pump.conj() * (p.amp0 + p.amp1)).re;
        let (c0, c1) = gaussian_collapse_reference(&s, &p, phi_a, nc, sigma);
        let shift = ((c1 * c0.conj()).arg() - s.relative_phase() + PI).rem_euclid(2.0 * PI) - PI;
        let expected = -0.01 * (s.alpha1.conj() * s.alpha0).im;
        assert!((shift - expected).abs() < 1e-12);
    }

    #[test]
    fn gaussian_reference_tracks_exact_collapse() {
        let (s, p) = generic();
        let mut rng = trajectory_rng(5, 0);
        for phi_a in [0.0, 0.9, 2.0] {
            let pump = C64::from_polar(50.0, phi_a);
            for _ in 0..20 {
                let o = exact_homodyne_collapse(&s, &p, pump, &mut rng).unwrap();
                let (g0, g1) = gaussian_collapse_reference(&s, &p, phi_a, o.n as f64, 50.0);
                assert!((o.c0.norm() - g0.norm()).abs() < 2e-2 * g0.norm());
                assert!((o.c1.norm() - g1.norm()).abs() < 2e-2 * g1.norm());
                let dphi = (o.c1 * o.c0.conj() * (g1 * g0.conj()).conj()).arg();
                assert!(dphi.abs() < 2e-2);
            }
        }
    }

    #[test]
    fn averaged_update_is_independent_of_pump_phase() {
        let (s, p) = generic();
        let sigma = 50.0;
        let mut results = Vec::new();
        for phi_a in [0.0, PI / 4.0, PI / 2.0] {
            let pump = C64::from_polar(sigma, phi_a);
            let nbar = |j: usize| sigma * sigma + 2.0 * (pump.conj() * p.amp(j)).re;
            let nc = (nbar(0) + nbar(1)) / 2.0;
            let (lo, hi) = ((nc - 14.0 * sigma) as u64, (nc + 14.0 * sigma) as u64);
            let mut rho = [C64::new(0.0, 0.0); 3];
            for n in lo..=hi {
                let nf = n as f64;
                // Gaussian-approximation count distribution
                let pn: f64 = (0..2)
                    .map(|j| {
                        let d = nf - nbar(j);
                        s.coeff(j).norm_sqr() * (-d * d / (2.0 * sigma * sigma)).exp()
                    })
                    .sum::<f64>()
                    / (2.0 * PI * sigma * sigma).sqrt();
                let (c0, c1) = gaussian_collapse_reference(&s, &p, phi_a, nf, sigma);
                rho[0] += pn * c0.norm_sqr();
                rho[1] += pn * c1.norm_sqr();
                rho[2] += pn * c1 * c0.conj();
            }
            results.push(rho);
        }
        for r in &results[1..] {
            for k in 0..3 {
                assert!((r[k] - results[0][k]).norm() < 1e-6, "{:?} {:?}", r, results[0]);
            }
        }
    }
}
