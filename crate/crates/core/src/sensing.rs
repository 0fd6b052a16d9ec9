//! Radar side: echo power, Swerling-I detection probability and the
//! geometric packet inter-arrival process it induces.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Exp1, Geometric};

use crate::error::{Error, MgfConstraint, Result};
use crate::params::SystemParams;

fn spreading_loss(p: &SystemParams) -> f64 {
    (4.0 * PI).powi(3) * p.max_range.powf(2.0 * p.path_loss_exponent)
}

/// Received echo power `P_s·Γ_t·Γ_r·σ²·ρ / ((4π)³·D^{2κ})` for a target of
/// cross section `rcs`.
pub fn echo_power(p: &SystemParams, rcs: f64) -> f64 {
    p.sensing_power() * p.tx_gain * p.rx_gain * p.wavelength.powi(2) * rcs / spreading_loss(p)
}

/// Sensing SNR per square metre of cross section.
fn snr_per_rcs(p: &SystemParams) -> f64 {
    echo_power(p, 1.0) / p.sensing_noise()
}

/// Swerling-I detection probability `exp(−d·(4π)³·D^{2κ}·N_s / (P_s·Γ_t·Γ_r·σ²·ρ̄))`.
pub fn sdp(p: &SystemParams) -> Result<f64> {
    if p.detection_threshold == 0.0 {
        return Ok(1.0);
    }
    if p.sensing_power() <= 0.0 {
        return Err(Error::AllPowerToComm);
    }
    Ok((-p.detection_threshold / (snr_per_rcs(p) * p.mean_rcs)).exp())
}

/// How each scan decides whether it produced a packet.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Detector {
    /// Coin flip with the detection probability.
    Bernoulli,
    /// Draw `ρ ~ Exp(mean ρ̄)` and detect when `snr_per_rcs·ρ > threshold`.
    Swerling { snr_per_rcs: f64, mean_rcs: f64, threshold: f64 },
}

/// Packets are generated at scan instants `kT`, each scan succeeding
/// independently with probability `detect_prob`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArrivalModel {
    pub scan_period: f64,
    pub detect_prob: f64,
    pub detector: Detector,
}

impl ArrivalModel {
    pub fn new(scan_period: f64, detect_prob: f64) -> Result<Self> {
        if !(scan_period > 0.0 && scan_period.is_finite()) {
            return Err(Error::OutOfRange { field: "T", value: scan_period, range: "(0, inf)" });
        }
        if !(detect_prob > 0.0 && detect_prob <= 1.0) {
            return Err(Error::OutOfRange {
                field: "P_s(d)",
                value: detect_prob,
                range: "(0, 1]",
            });
        }
        Ok(ArrivalModel { scan_period, detect_prob, detector: Detector::Bernoulli })
    }

    /// Swerling-I arrival model for the given parameters.
    pub fn from_params(p: &SystemParams) -> Result<Self> {
        let prob = sdp(p)?;
        let mut model = ArrivalModel::new(p.scan_period, prob)?;
        if p.sensing_power() > 0.0 {
            model.detector = Detector::Swerling {
                snr_per_rcs: snr_per_rcs(p),
                mean_rcs: p.mean_rcs,
                threshold: p.detection_threshold,
            };
        }
        Ok(model)
    }

    /// Supremum of positive `θ` for which the MGF converges, `−ln(1−P_s)/T`.
    pub fn theta_limit(&self) -> f64 {
        if self.detect_prob >= 1.0 {
            f64::INFINITY
        } else {
            -(-self.detect_prob).ln_1p() / self.scan_period
        }
    }

    fn check(&self, theta: f64) -> Result<()> {
        if theta > 0.0 && theta >= self.theta_limit() {
            return Err(Error::MgfDiverges {
                constraint: MgfConstraint::Arrival,
                theta,
                critical_theta: self.theta_limit(),
            });
        }
        Ok(())
    }

    /// `((e^{−θT} − 1)/P_s + 1)^{−1}`.
    pub fn mgf(&self, theta: f64) -> Result<f64> {
        self.check(theta)?;
        Ok(1.0 / ((-theta * self.scan_period).exp_m1() / self.detect_prob + 1.0))
    }

    /// Geometric-sum form `P_s·e^{θT} / (1 − (1−P_s)·e^{θT})`.
    pub fn mgf_geometric(&self, theta: f64) -> Result<f64> {
        self.check(theta)?;
        let z = (theta * self.scan_period).exp();
        Ok(self.detect_prob * z / (1.0 - (1.0 - self.detect_prob) * z))
    }

    /// `ln M_A(θ) = θT + ln P_s − ln(1 − (1−P_s)·e^{θT})`; finite where
    /// the plain forms overflow.
    pub fn ln_mgf(&self, theta: f64) -> Result<f64> {
        self.check(theta)?;
        let x = theta * self.scan_period;
        let miss = 1.0 - self.detect_prob;
        let tail = if miss == 0.0 { 0.0 } else { (-(miss.ln() + x).exp()).ln_1p() };
        Ok(x + self.detect_prob.ln() - tail)
    }

    pub fn mean_interarrival(&self) -> f64 {
        self.scan_period / self.detect_prob
    }

    /// Outcome of one radar scan.
    pub fn scan_detects<R: Rng + ?Sized>(&self, rng: &mut R) -> bool {
        match self.detector {
            Detector::Bernoulli => self.detect_prob >= 1.0 || rng.random::<f64>() < self.detect_prob,
            Detector::Swerling { snr_per_rcs, mean_rcs, threshold } => {
                let draw: f64 = Exp1.sample(rng);
                let rcs = mean_rcs * draw;
                snr_per_rcs * rcs > threshold
            }
        }
    }

    /// `K·T` with `K ~ Geometric(P_s)` on `{1, 2, …}`.
    pub fn sample_interarrival<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let failures = Geometric::new(self.detect_prob)
            .expect("detect_prob validated in (0, 1]")
            .sample(rng);
        (failures + 1) as f64 * self.scan_period
    }
}

pub fn arrival_mgf(theta: f64, model: &ArrivalModel) -> Result<f64> {
    model.mgf(theta)
}

pub fn sample_interarrival<R: Rng + ?Sized>(model: &ArrivalModel, rng: &mut R) -> f64 {
    model.sample_interarrival(rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn echo_power_values() {
        let p = SystemParams::default();
        assert_eq!(echo_power(&p, 0.0), 0.0);
        assert_eq!(echo_power(&p.with_alpha(1.0), 10.0), 0.0);
        let by_hand = 5.0 * 10.0 * 10.0 * 0.004f64.powi(2) * 10.0 / ((4.0 * PI).powi(3) * 100f64.powi(4));
        let e = echo_power(&p, 10.0);
        assert!(rel(e, by_hand) < 1e-12);
        assert!(rel(e, 4.03e-13) < 1e-3, "{e}");
    }

    #[test]
    fn sdp_edges() {
        let p = SystemParams { detection_threshold: 0.0, ..SystemParams::default() };
        assert_eq!(sdp(&p).unwrap(), 1.0);
        assert_eq!(sdp(&p.with_alpha(1.0)).unwrap(), 1.0);
        let p = SystemParams::default().with_alpha(1.0);
        assert_eq!(sdp(&p), Err(Error::AllPowerToComm));
        assert!(ArrivalModel::from_params(&p).is_err());
    }

    #[test]
    fn doubling_rcs_takes_square_root() {
        let p = SystemParams::default();
        let s = sdp(&p).unwrap();
        let s2 = sdp(&SystemParams { mean_rcs: 2.0 * p.mean_rcs, ..p }).unwrap();
        assert!(rel(s2, s.sqrt()) < 1e-14);
    }

    #[test]
    fn ln_sdp_linear_in_threshold() {
        let p = SystemParams::default();
        let at = |d: f64| sdp(&SystemParams { detection_threshold: d, ..p }).unwrap().ln();
        let slope = at(1.0);
        for d in [0.5, 2.0, 10.0, 37.0] {
            assert!((at(d) - d * slope).abs() < 1e-12 * (d * slope).abs().max(1.0));
        }
    }

    #[test]
    fn sdp_monotonicity() {
        let base = SystemParams::default();
        let s0 = sdp(&base).unwrap();
        let up = |q: SystemParams| sdp(&q).unwrap();
        assert!(up(SystemParams { detection_threshold: 20.0, ..base }) < s0);
        assert!(up(SystemParams { max_range: 150.0, ..base }) < s0);
        assert!(up(SystemParams { loss_factor: 20.0, ..base }) < s0);
        assert!(up(SystemParams { bandwidth: 50e3, ..base }) < s0);
        assert!(up(base.with_alpha(0.3)) > s0);
        assert!(up(SystemParams { tx_gain: 20.0, ..base }) > s0);
        assert!(up(SystemParams { rx_gain: 20.0, ..base }) > s0);
        assert!(up(SystemParams { wavelength: 5e-3, ..base }) > s0);
        assert!(up(SystemParams { mean_rcs: 20.0, ..base }) > s0);
    }

    #[test]
    fn arrival_mgf_values() {
        let m = ArrivalModel::new(1e-3, 0.4).unwrap();
        assert_eq!(m.mgf(0.0).unwrap(), 1.0);
        assert_eq!(m.ln_mgf(0.0).unwrap(), 0.0);
        let det = ArrivalModel::new(1e-3, 1.0).unwrap();
        for theta in [-500.0, 10.0, 300.0] {
            assert!(rel(det.mgf(theta).unwrap(), (theta * 1e-3f64).exp()) < 1e-14);
            assert!((det.ln_mgf(theta).unwrap() - theta * 1e-3).abs() < 1e-15);
        }
        assert_eq!(det.theta_limit(), f64::INFINITY);
        assert!(det.ln_mgf(1e7).unwrap().is_finite());
    }

    #[test]
    fn arrival_mgf_divergence() {
        let m = ArrivalModel::new(1e-3, 0.5).unwrap();
        let limit = m.theta_limit();
        assert!(rel(limit, 2f64.ln() / 1e-3) < 1e-14);
        match m.mgf(limit * 1.01) {
            Err(Error::MgfDiverges { constraint: MgfConstraint::Arrival, critical_theta, .. }) => {
                assert_eq!(critical_theta, limit)
            }
            other => panic!("{other:?}"),
        }
        assert!(m.mgf(-1e6).is_ok());
    }

    #[test]
    fn arrival_interarrival_sampling() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let det = ArrivalModel::new(1e-3, 1.0).unwrap();
        for _ in 0..1000 {
            assert_eq!(det.sample_interarrival(&mut rng), 1e-3);
        }
        let m = ArrivalModel::new(1e-3, 0.3).unwrap();
        let n = 1_000_000;
        let (mut sum, mut sq, mut mgf) = (0.0, 0.0, 0.0);
        for _ in 0..n {
            let x = m.sample_interarrival(&mut rng);
            sum += x;
            sq += x * x;
            mgf += (-500.0 * x).exp();
        }
        let mean = sum / n as f64;
        let se = ((sq / n as f64 - mean * mean) / n as f64).sqrt();
        assert!((mean - m.mean_interarrival()).abs() < 3.0 * se);
        assert!(rel(mgf / n as f64, m.mgf(-500.0).unwrap()) < 1e-3);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn mgf_forms_agree(ps in 0.01f64..=1.0, frac in -3.0f64..0.999) {
                let m = ArrivalModel::new(1e-3, ps).unwrap();
                let limit = m.theta_limit().min(5e4);
                let theta = frac * limit;
                let a = m.mgf(theta).unwrap();
                let b = m.mgf_geometric(theta).unwrap();
                let c = m.ln_mgf(theta).unwrap().exp();
                prop_assert!(rel(a, b) < 1e-12 * (1.0 + 1.0 / (1.0 - frac.max(0.0))), "{} {}", a, b);
                prop_assert!(rel(a, c) < 1e-9 / (1.0 - frac.max(0.0)), "{} {}", a, c);
            }

            #[test]
            fn sdp_in_unit_interval(alpha in 0.0f64..0.999, d in 0.0f64..1e3, range in 1.0f64..1e3) {
                let p = SystemParams { detection_threshold: d, max_range: range, ..SystemParams::default() }
                    .with_alpha(alpha);
                let s = sdp(&p).unwrap();
                prop_assert!((0.0..=1.0).contains(&s));
            }
        }
    }
}
