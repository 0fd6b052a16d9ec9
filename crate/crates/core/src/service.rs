//! Communication side: channel acceptance, retransmission, the service-time
//! distribution, its MGF and a service-time sampler.
//!
//! A packet at the head of the queue evaluates the channel; each evaluation
//! is acceptable with probability `p = exp(−τN_c/P_c)`, otherwise the packet
//! waits one deferral interval `ϖ`. An accepted attempt occupies the channel
//! for `φ(γ(h)) = L/R(γ(h))` and is decoded with probability `η = (1−ε)^L`.
//! Failed packets go back to channel evaluation. The channel gain `h` is a
//! unit-mean exponential conditioned on `h ≥ h_min = τN_c/P_c`.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Exp1, Geometric};

use crate::error::{Error, MgfConstraint, Result};
use crate::fbc::FbcLink;
use crate::params::SystemParams;
use crate::quad::{self, Tolerance};

/// Which integrand the service MGF uses.
///
/// `DensityConsistent` takes the expectation of the conditional MGF under the
/// truncated-exponential gain density `e^{−(h−h_min)}`. `AcceptanceWeighted`
/// integrates `pη·e^{−h}/D(h)` over `[h_min, ∞)`, which is `p` times the
/// former and does not integrate to one at `θ = 0`. The Monte Carlo check in
/// the acceptance suite matches `DensityConsistent`, which is the default.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MgfForm {
    #[default]
    DensityConsistent,
    AcceptanceWeighted,
}

impl MgfForm {
    pub fn as_str(self) -> &'static str {
        match self {
            MgfForm::DensityConsistent => "density-consistent",
            MgfForm::AcceptanceWeighted => "acceptance-weighted",
        }
    }
}

impl fmt::Display for MgfForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MgfForm {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "density-consistent" => Ok(MgfForm::DensityConsistent),
            "acceptance-weighted" => Ok(MgfForm::AcceptanceWeighted),
            other => Err(format!(
                "mgf_form must be `density-consistent` or `acceptance-weighted`, got `{other}`"
            )),
        }
    }
}

/// Scope of a channel-gain draw in the sampler.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GainMode {
    /// One gain per packet, reused by all of its attempts (the analytic model).
    #[default]
    PerPacket,
    /// A fresh gain for every attempt.
    PerAttempt,
}

impl FromStr for GainMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "per-packet" | "per-packet-gain" => Ok(GainMode::PerPacket),
            "per-attempt" | "per-attempt-gain" => Ok(GainMode::PerAttempt),
            other => Err(format!("gain mode must be `per-packet` or `per-attempt`, got `{other}`")),
        }
    }
}

/// How long one transmission attempt takes for a given gain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Airtime {
    /// `L / R(γ)` with `γ = snr_per_gain · h`.
    Fbc { link: FbcLink, snr_per_gain: f64 },
    /// Gain-independent airtime; used for degenerate reference systems.
    Fixed(f64),
}

/// `p = exp(−τN_c/P_c)` and `h_min = τN_c/P_c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Acceptance {
    pub p_accept: f64,
    pub h_min: f64,
}

pub fn channel_acceptance(p: &SystemParams) -> Result<Acceptance> {
    let pc = p.comm_power();
    if pc <= 0.0 {
        return Err(Error::AllPowerToSensing);
    }
    let h_min = p.snr_threshold * p.comm_noise / pc;
    Ok(Acceptance { p_accept: (-h_min).exp(), h_min })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ServiceModel {
    pub p_accept: f64,
    pub eta: f64,
    pub h_min: f64,
    pub deferral: f64,
    pub airtime: Airtime,
    pub form: MgfForm,
}

/// Service time of one packet and how it was spent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ServiceSample {
    pub time: f64,
    pub attempts: u64,
    pub deferrals: u64,
}

/// An MGF value with its quadrature diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MgfEstimate {
    pub value: f64,
    pub abs_error: f64,
    /// Certified bound on the part of the integral not covered by quadrature.
    pub tail_bound: f64,
}

impl ServiceModel {
    /// Assemble the service model from system parameters.
    pub fn from_params(p: &SystemParams) -> Result<Self> {
        let Acceptance { p_accept, h_min } = channel_acceptance(p)?;
        if p_accept <= 0.0 {
            return Err(Error::ChannelNeverAcceptable { p_accept });
        }
        let link = FbcLink::new(p)?;
        let snr_per_gain = p.comm_power() / p.comm_noise;
        if link.rate(snr_per_gain * h_min) <= 0.0 {
            return Err(Error::TauTooLow { tau: p.snr_threshold, min_snr: link.min_positive_snr() });
        }
        Ok(ServiceModel {
            p_accept,
            eta: (1.0 - p.decoding_error).powi(p.packet_bits as i32),
            h_min,
            deferral: p.deferral_interval,
            airtime: Airtime::Fbc { link, snr_per_gain },
            form: p.mgf_form,
        })
    }

    /// A model whose airtime does not depend on the channel gain.
    pub fn fixed_airtime(p_accept: f64, eta: f64, deferral: f64, airtime: f64) -> Result<Self> {
        if !(p_accept > 0.0 && p_accept <= 1.0) {
            return Err(Error::OutOfRange { field: "p_accept", value: p_accept, range: "(0, 1]" });
        }
        if !(eta > 0.0 && eta <= 1.0) {
            return Err(Error::OutOfRange { field: "eta", value: eta, range: "(0, 1]" });
        }
        if !(deferral > 0.0 && airtime > 0.0 && airtime.is_finite()) {
            return Err(Error::InvalidArgument("deferral and airtime must be positive".into()));
        }
        Ok(ServiceModel {
            p_accept,
            eta,
            h_min: 0.0,
            deferral,
            airtime: Airtime::Fixed(airtime),
            form: MgfForm::DensityConsistent,
        })
    }

    /// `φ(γ(h))`, seconds. Infinite where the rate is not positive.
    pub fn airtime_at(&self, h: f64) -> f64 {
        match self.airtime {
            Airtime::Fixed(t) => t,
            Airtime::Fbc { link, snr_per_gain } => link.airtime(snr_per_gain * h).unwrap_or(f64::INFINITY),
        }
    }

    /// Airtime at the worst admissible gain `h_min`.
    pub fn worst_airtime(&self) -> f64 {
        self.airtime_at(self.h_min)
    }

    /// `C(c+b, c)·(1−p)^c·p^{b+1}·(1−η)^b·η`: probability of `b` failed
    /// attempts and `c` deferrals in total.
    pub fn pmf(&self, failures: u64, deferrals: u64) -> f64 {
        let (b, c) = (failures as f64, deferrals as f64);
        let p = self.p_accept;
        if (c > 0.0 && p >= 1.0) || (b > 0.0 && self.eta >= 1.0) {
            return 0.0;
        }
        let ln_binom = libm::lgamma(b + c + 1.0) - libm::lgamma(b + 1.0) - libm::lgamma(c + 1.0);
        let mut ln = ln_binom + (b + 1.0) * p.ln() + self.eta.ln();
        if c > 0.0 {
            ln += c * (-p).ln_1p();
        }
        if b > 0.0 {
            ln += b * (-self.eta).ln_1p();
        }
        ln.exp()
    }

    /// Service time `cϖ + (b+1)·φ(γ(h))` attached to [`Self::pmf`].
    pub fn service_time(&self, failures: u64, deferrals: u64, h: f64) -> f64 {
        deferrals as f64 * self.deferral + (failures + 1) as f64 * self.airtime_at(h)
    }

    /// Largest `θ` with `e^{ϖθ}(1−p) < 1`.
    pub fn deferral_limit(&self) -> f64 {
        if self.p_accept >= 1.0 {
            f64::INFINITY
        } else {
            -(-self.p_accept).ln_1p() / self.deferral
        }
    }

    // 1 − e^{ϖθ}(1−p)
    fn acceptance_factor(&self, theta: f64) -> f64 {
        1.0 - (1.0 - self.p_accept) * (self.deferral * theta).exp()
    }

    /// Largest `θ` with `(1 − e^{ϖθ}(1−p))·e^{−θφ(h_min)} > p(1−η)`.
    pub fn retransmission_limit(&self) -> f64 {
        let retry = self.p_accept * (1.0 - self.eta);
        let cap = self.deferral_limit();
        if retry <= 0.0 {
            return cap;
        }
        let phi = self.worst_airtime();
        // Decreasing in θ; positive at θ = 0 since p(1−η) < 1.
        let margin = |t: f64| {
            let a = self.acceptance_factor(t);
            if a <= 0.0 {
                f64::NEG_INFINITY
            } else {
                a.ln() - phi * t - retry.ln()
            }
        };
        let mut lo = 0.0;
        let mut hi = if cap.is_finite() { cap } else { 1.0 };
        while hi.is_finite() && margin(hi) > 0.0 {
            lo = hi;
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi || hi - lo <= 1e-14 * hi {
                break;
            }
            if margin(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }

    /// Tightest positive-`θ` convergence limit and the constraint that sets it.
    pub fn theta_limit(&self) -> (f64, MgfConstraint) {
        let deferral = self.deferral_limit();
        let retx = self.retransmission_limit();
        if retx < deferral {
            (retx, MgfConstraint::Retransmission)
        } else {
            (deferral, MgfConstraint::Deferral)
        }
    }

    fn check(&self, theta: f64) -> Result<()> {
        if theta <= 0.0 {
            return Ok(());
        }
        let deferral = self.deferral_limit();
        if theta >= deferral {
            return Err(Error::MgfDiverges {
                constraint: MgfConstraint::Deferral,
                theta,
                critical_theta: deferral,
            });
        }
        let d_min = self.acceptance_factor(theta) * (-theta * self.worst_airtime()).exp()
            - self.p_accept * (1.0 - self.eta);
        if !(d_min > 0.0) {
            return Err(Error::MgfDiverges {
                constraint: MgfConstraint::Retransmission,
                theta,
                critical_theta: self.retransmission_limit(),
            });
        }
        Ok(())
    }

    /// Conditional MGF given the gain, `pη / ((1 − e^{ϖθ}(1−p))·e^{−φθ} − p(1−η))`.
    pub fn conditional_mgf(&self, theta: f64, h: f64) -> f64 {
        let d = self.acceptance_factor(theta) * (-theta * self.airtime_at(h)).exp()
            - self.p_accept * (1.0 - self.eta);
        self.p_accept * self.eta / d
    }

    fn form_factor(&self) -> f64 {
        match self.form {
            MgfForm::DensityConsistent => 1.0,
            MgfForm::AcceptanceWeighted => self.p_accept,
        }
    }

    /// `E[e^{θS}]` at the default quadrature tolerance.
    pub fn mgf(&self, theta: f64) -> Result<f64> {
        Ok(self.mgf_with(theta, Tolerance::default())?.value)
    }

    /// Service MGF with diagnostics. The gain expectation is taken over
    /// `u ∈ (0, 1]` with `h = h_min − ln u`, under which the truncated
    /// exponential becomes uniform. `[u0, 1]` is integrated adaptively and
    /// `[0, u0]` is bracketed by the monotone integrand's end values.
    pub fn mgf_with(&self, theta: f64, tol: Tolerance) -> Result<MgfEstimate> {
        self.check(theta)?;
        let scale = self.form_factor();
        if let Airtime::Fixed(_) = self.airtime {
            let v = scale * self.conditional_mgf(theta, self.h_min);
            return Ok(MgfEstimate { value: v, abs_error: 0.0, tail_bound: 0.0 });
        }
        if theta == 0.0 {
            return Ok(MgfEstimate { value: scale, abs_error: 0.0, tail_bound: 0.0 });
        }
        let g = |u: f64| self.conditional_mgf(theta, self.h_min - u.ln());
        // Limit of g as h → ∞ (airtime → 0), and g at the worst gain.
        let g_inf = self.p_accept * self.eta / (self.acceptance_factor(theta) - self.p_accept * (1.0 - self.eta));
        let g_one = g(1.0);
        let (small, large) = if g_inf < g_one { (g_inf, g_one) } else { (g_one, g_inf) };
        let u0 = 1e-13 * small / large;
        let g_u0 = g(u0);
        let tail = 0.5 * u0 * (g_inf + g_u0);
        let tail_bound = 0.5 * u0 * (g_u0 - g_inf).abs();
        let body = quad::integrate(g, u0, 1.0, tol)?;
        Ok(MgfEstimate {
            value: scale * (body.value + tail),
            abs_error: scale * body.abs_error,
            tail_bound: scale * tail_bound,
        })
    }

    /// `E[φ(γ(h))]` over the truncated gain distribution.
    pub fn mean_airtime(&self) -> Result<f64> {
        match self.airtime {
            Airtime::Fixed(t) => Ok(t),
            Airtime::Fbc { .. } => {
                // φ is bounded by φ(h_min) and decreasing in h, so the same
                // tail bracketing as the MGF applies.
                let u0: f64 = 1e-15;
                let tail = u0 * self.airtime_at(self.h_min - u0.ln());
                let body = quad::integrate(|u| self.airtime_at(self.h_min - u.ln()), u0, 1.0, Tolerance::default())?;
                Ok(body.value + tail)
            }
        }
    }

    /// `E[S] = (E[φ] + ϖ(1−p)/p) / η`.
    pub fn mean(&self) -> Result<f64> {
        let per_attempt = self.mean_airtime()? + self.deferral * (1.0 - self.p_accept) / self.p_accept;
        Ok(per_attempt / self.eta)
    }

    /// One channel-gain draw from the truncated unit exponential.
    pub fn draw_gain<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let e: f64 = Exp1.sample(rng);
        self.h_min + e
    }

    /// Number of unacceptable evaluations before an acceptable one.
    pub fn draw_deferrals<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        if self.p_accept >= 1.0 {
            return 0;
        }
        Geometric::new(self.p_accept).expect("p_accept validated in (0, 1]").sample(rng)
    }

    pub fn channel_acceptable<R: Rng + ?Sized>(&self, rng: &mut R) -> bool {
        self.p_accept >= 1.0 || rng.random::<f64>() < self.p_accept
    }

    pub fn decodes<R: Rng + ?Sized>(&self, rng: &mut R) -> bool {
        self.eta >= 1.0 || rng.random::<f64>() < self.eta
    }

    /// Simulate one packet's deferral/transmission/retransmission loop.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, mode: GainMode) -> ServiceSample {
        let mut gain = self.draw_gain(rng);
        let mut out = ServiceSample { time: 0.0, attempts: 0, deferrals: 0 };
        loop {
            let c = self.draw_deferrals(rng);
            out.deferrals += c;
            out.time += c as f64 * self.deferral;
            if mode == GainMode::PerAttempt && out.attempts > 0 {
                gain = self.draw_gain(rng);
            }
            out.time += self.airtime_at(gain);
            out.attempts += 1;
            if self.decodes(rng) {
                return out;
            }
        }
    }
}

pub fn build_service_model(p: &SystemParams) -> Result<ServiceModel> {
    ServiceModel::from_params(p)
}

pub fn service_pmf(model: &ServiceModel, failures: u64, deferrals: u64) -> f64 {
    model.pmf(failures, deferrals)
}

pub fn service_mgf(theta: f64, model: &ServiceModel) -> Result<f64> {
    model.mgf(theta)
}

pub fn sample_service<R: Rng + ?Sized>(model: &ServiceModel, rng: &mut R, mode: GainMode) -> ServiceSample {
    model.sample(rng, mode)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    fn tau10() -> SystemParams {
        SystemParams { snr_threshold: 10.0, ..SystemParams::default() }
    }

    #[test]
    fn acceptance_at_zero_tau() {
        let p = SystemParams { snr_threshold: 0.0, ..SystemParams::default() };
        let a = channel_acceptance(&p).unwrap();
        assert_eq!(a.p_accept, 1.0);
        assert_eq!(a.h_min, 0.0);
        // Zero rate at h_min = 0.
        assert!(matches!(ServiceModel::from_params(&p), Err(Error::TauTooLow { .. })));
    }

    #[test]
    fn build_examples() {
        let m = ServiceModel::from_params(&tau10()).unwrap();
        assert!(rel(m.eta, 0.999f64.powi(100)) < 1e-15);
        assert!((m.eta - 0.904792).abs() < 1e-6);
        assert!(rel(m.h_min, 1.00238e-5) < 1e-5);
        assert!(rel(m.p_accept, (-1.00237e-5f64).exp()) < 1e-8);
        assert!((m.p_accept - 0.99999).abs() < 1e-6);
        assert!(matches!(
            ServiceModel::from_params(&tau10().with_alpha(0.0)),
            Err(Error::AllPowerToSensing)
        ));
        let low = SystemParams { snr_threshold: 0.1, ..SystemParams::default() };
        assert!(matches!(ServiceModel::from_params(&low), Err(Error::TauTooLow { .. })));
    }

    #[test]
    fn pmf_examples() {
        let m = ServiceModel::fixed_airtime(0.9, 0.9, 1e-3, 1e-3).unwrap();
        assert!(rel(m.pmf(0, 0), 0.81) < 1e-14);
        let mut total = 0.0;
        for b in 0..=200 {
            for c in 0..=200 {
                total += m.pmf(b, c);
            }
        }
        assert!((total - 1.0).abs() < 1e-9);
        let sure = ServiceModel::fixed_airtime(1.0, 0.8, 1e-3, 1e-3).unwrap();
        assert!(sure.pmf(2, 0) > 0.0);
        for c in 1..10 {
            assert_eq!(sure.pmf(0, c), 0.0);
            assert_eq!(sure.pmf(3, c), 0.0);
        }
        assert!(rel(m.service_time(2, 3, 0.0), 3e-3 + 3e-3) < 1e-15);
    }

    #[test]
    fn pmf_marginal_is_geometric_in_failures() {
        let m = ServiceModel::fixed_airtime(0.7, 0.6, 1e-3, 1e-3).unwrap();
        for b in 0..6u64 {
            let marginal: f64 = (0..2000).map(|c| m.pmf(b, c)).sum();
            let closed = 0.4f64.powi(b as i32) * 0.6;
            assert!((marginal - closed).abs() < 1e-12, "b = {b}");
        }
    }

    #[test]
    fn mgf_normalization_and_forms() {
        let p = tau10();
        let m = ServiceModel::from_params(&p).unwrap();
        assert_eq!(m.mgf(0.0).unwrap(), 1.0);
        // Near zero the quadrature path is exercised.
        assert!((m.mgf(1e-9).unwrap() - 1.0).abs() < 1e-8);
        let lit = ServiceModel { form: MgfForm::AcceptanceWeighted, ..m };
        assert!(rel(lit.mgf(300.0).unwrap(), m.p_accept * m.mgf(300.0).unwrap()) < 1e-14);
        assert!(rel(lit.mgf(0.0).unwrap(), m.p_accept) < 1e-15);
    }

    #[test]
    fn deterministic_single_attempt_limit() {
        let m = ServiceModel::fixed_airtime(1.0, 1.0, 0.5e-3, 0.8e-3).unwrap();
        for theta in [1.0, 300.0, 5000.0] {
            assert!(rel(m.mgf(theta).unwrap(), (theta * 0.8e-3f64).exp()) < 1e-14);
        }
        assert_eq!(m.theta_limit().0, f64::INFINITY);
    }

    #[test]
    fn mgf_matches_direct_expectation_for_fixed_airtime() {
        // Sum the pmf against e^{θS} directly.
        let m = ServiceModel::fixed_airtime(0.8, 0.7, 0.5e-3, 1e-3).unwrap();
        let theta = 200.0;
        let mut direct = 0.0;
        for b in 0..300 {
            for c in 0..300 {
                direct += m.pmf(b, c) * (theta * m.service_time(b, c, 0.0)).exp();
            }
        }
        assert!(rel(m.mgf(theta).unwrap(), direct) < 1e-10);
    }

    #[test]
    fn divergence_reports_constraint() {
        let m = ServiceModel::from_params(&tau10()).unwrap();
        let (limit, constraint) = m.theta_limit();
        assert_eq!(constraint, MgfConstraint::Retransmission);
        // ln(1/(p(1−η)))/φ(h_min) when p ≈ 1.
        let approx = -(m.p_accept * (1.0 - m.eta)).ln() / m.worst_airtime();
        assert!(rel(limit, approx) < 1e-3, "{limit} vs {approx}");
        match m.mgf(1.01 * limit) {
            Err(Error::MgfDiverges { constraint: MgfConstraint::Retransmission, critical_theta, .. }) => {
                assert_eq!(critical_theta, limit)
            }
            other => panic!("{other:?}"),
        }
        assert!(m.mgf(0.99 * limit).unwrap().is_finite());

        let lossy = ServiceModel::fixed_airtime(0.5, 1.0, 1e-3, 1e-4).unwrap();
        assert!(rel(lossy.deferral_limit(), 2f64.ln() / 1e-3) < 1e-14);
        assert!(matches!(
            lossy.mgf(1000.0),
            Err(Error::MgfDiverges { constraint: MgfConstraint::Deferral, .. })
        ));
    }

    #[test]
    fn mgf_monotone_in_theta_and_reliability() {
        let m = ServiceModel::from_params(&tau10()).unwrap();
        let limit = m.theta_limit().0;
        let mut prev = 1.0;
        for i in 1..20 {
            let v = m.mgf(limit * i as f64 / 20.0).unwrap();
            assert!(v > prev);
            prev = v;
        }
        let better = ServiceModel { eta: 0.95, ..m };
        assert!(better.mgf(500.0).unwrap() < m.mgf(500.0).unwrap());
        let worse_channel = ServiceModel { p_accept: 0.9, ..m };
        assert!(worse_channel.mgf(500.0).unwrap() > m.mgf(500.0).unwrap());
    }

    #[test]
    fn tolerance_halving_is_stable() {
        let m = ServiceModel::from_params(&tau10()).unwrap();
        let limit = m.theta_limit().0;
        for theta in [10.0, 300.0, 0.9 * limit, 0.999 * limit] {
            let a = m.mgf_with(theta, Tolerance::default()).unwrap();
            let b = m.mgf_with(theta, Tolerance::default().halved()).unwrap();
            assert!(rel(a.value, b.value) < 1e-7, "theta {theta}");
            assert!(a.tail_bound < 1e-12 * a.value);
        }
    }

    #[test]
    fn sampler_basics() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let sure = ServiceModel::fixed_airtime(1.0, 1.0, 1e-3, 2e-4).unwrap();
        for _ in 0..100 {
            let s = sure.sample(&mut rng, GainMode::PerPacket);
            assert_eq!((s.attempts, s.deferrals, s.time), (1, 0, 2e-4));
        }
        let m = ServiceModel::fixed_airtime(0.6, 0.7, 1e-3, 2e-4).unwrap();
        let n = 1_000_000;
        let hits = (0..n)
            .filter(|_| {
                let s = m.sample(&mut rng, GainMode::PerPacket);
                s.attempts == 1 && s.deferrals == 0
            })
            .count();
        let phat = hits as f64 / n as f64;
        let target = m.pmf(0, 0);
        let se = (target * (1.0 - target) / n as f64).sqrt();
        assert!((phat - target).abs() < 3.0 * se, "{phat} vs {target}");
    }

    #[test]
    fn mean_matches_sampler() {
        let m = ServiceModel::from_params(&tau10()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 200_000;
        let (mut s, mut sq) = (0.0, 0.0);
        for _ in 0..n {
            let t = m.sample(&mut rng, GainMode::PerPacket).time;
            s += t;
            sq += t * t;
        }
        let mean = s / n as f64;
        let se = ((sq / n as f64 - mean * mean) / n as f64).sqrt();
        assert!((mean - m.mean().unwrap()).abs() < 4.0 * se);
    }
}
