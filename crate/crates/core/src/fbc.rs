//! Finite-blocklength coding: Gaussian tail, its inverse, channel dispersion,
//! the normal-approximation rate and the per-attempt airtime.

use std::f64::consts::{LN_2, SQRT_2};

use crate::error::{Error, Result};
use crate::params::SystemParams;

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// `Q(x) = P[Z > x]` for a standard normal `Z`.
pub fn q_func(x: f64) -> f64 {
    0.5 * libm::erfc(x / SQRT_2)
}

fn normal_pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Inverse of [`q_func`] by bracketing and safeguarded Newton iteration.
pub fn q_inv(eps: f64) -> Result<f64> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidArgument(format!("q_inv needs 0 < eps < 1, got {eps}")));
    }
    if eps == 0.5 {
        return Ok(0.0);
    }
    // Q is strictly decreasing; find lo < x* < hi with Q(lo) > eps > Q(hi).
    let (mut lo, mut hi) = if eps < 0.5 { (0.0, 1.0) } else { (-1.0, 0.0) };
    while q_func(hi) > eps {
        lo = hi;
        hi *= 2.0;
    }
    while q_func(lo) < eps {
        hi = lo;
        lo *= 2.0;
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let f = q_func(x) - eps;
        if f == 0.0 {
            return Ok(x);
        }
        if f > 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let newton = x + f / normal_pdf(x);
        x = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if hi - lo <= 4.0 * f64::EPSILON * x.abs().max(1.0) {
            break;
        }
    }
    Ok(x)
}

/// `V(γ) = 1 − (1+γ)^{−2}`.
pub fn dispersion(gamma: f64) -> Result<f64> {
    if gamma.is_nan() || gamma < 0.0 {
        return Err(Error::InvalidArgument(format!("dispersion needs gamma >= 0, got {gamma}")));
    }
    Ok(dispersion_of(gamma))
}

// γ(2+γ)/(1+γ)² avoids cancellation at small γ.
fn dispersion_of(gamma: f64) -> f64 {
    let s = 1.0 + gamma;
    gamma * (2.0 + gamma) / (s * s)
}

/// Rate and airtime for one parameter set, with `Q^{-1}(ε)` solved once.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FbcLink {
    pub bandwidth: f64,
    pub blocklength: f64,
    pub packet_bits: f64,
    /// `Q^{-1}(ε)`.
    pub penalty: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateResult {
    /// bits/s; may be zero or negative below the minimum SNR.
    pub rate: f64,
    pub snr: f64,
    pub dispersion: f64,
}

impl FbcLink {
    pub fn new(p: &SystemParams) -> Result<Self> {
        Ok(FbcLink {
            bandwidth: p.bandwidth,
            blocklength: p.blocklength as f64,
            packet_bits: p.packet_bits as f64,
            penalty: q_inv(p.decoding_error)?,
        })
    }

    pub fn rate(&self, gamma: f64) -> f64 {
        let v = dispersion_of(gamma);
        self.bandwidth / LN_2 * (gamma.ln_1p() - (v / self.blocklength).sqrt() * self.penalty)
    }

    pub fn rate_result(&self, gamma: f64) -> Result<RateResult> {
        Ok(RateResult { rate: self.rate(gamma), snr: gamma, dispersion: dispersion(gamma)? })
    }

    /// `φ(γ) = L / R(γ)`.
    pub fn airtime(&self, gamma: f64) -> Result<f64> {
        let r = self.rate(gamma);
        if r > 0.0 {
            Ok(self.packet_bits / r)
        } else {
            Err(Error::NonPositiveRate { snr: gamma })
        }
    }

    /// Smallest SNR with a positive rate. Zero when `Q^{-1}(ε) ≤ 0`.
    pub fn min_positive_snr(&self) -> f64 {
        if self.penalty <= 0.0 {
            return 0.0;
        }
        let excess = |g: f64| g.ln_1p() - (dispersion_of(g) / self.blocklength).sqrt() * self.penalty;
        // excess < 0 just above zero, since ln(1+γ) ~ γ while the penalty ~ sqrt(γ).
        let mut lo = 0.0;
        let mut hi = 1.0;
        while excess(hi) <= 0.0 {
            lo = hi;
            hi *= 2.0;
        }
        while hi - lo > 1e-13 * hi {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if excess(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    }
}

/// `R(γ) = (W/ln2)·[ln(1+γ) − sqrt(V(γ)/N)·Q^{-1}(ε)]`, bits/s.
pub fn fbc_rate(gamma: f64, p: &SystemParams) -> f64 {
    link(p).rate(gamma)
}

pub fn airtime(gamma: f64, p: &SystemParams) -> Result<f64> {
    link(p).airtime(gamma)
}

pub fn min_positive_snr(p: &SystemParams) -> f64 {
    link(p).min_positive_snr()
}

fn link(p: &SystemParams) -> FbcLink {
    // decoding_error is validated to (0, 1) before any caller gets here.
    FbcLink::new(p).expect("decoding error probability in (0, 1)")
}
