//! Stochastic network calculus bound on the peak-AoI violation probability
//! and its optimization over the Chernoff parameter `θ` and the power split `α`.
//!
//! For i.i.d. inter-arrival times `A` and service times `S` of an FCFS
//! queue, whenever `M_A(−θ)·M_S(θ) < 1`,
//!
//! ```text
//! P[PAoI > ζ] ≤ e^{−θζ}·M_A(θ) / (M_S(θ)^{−1} − M_A(−θ)).
//! ```
//!
//! All comparisons are made on the logarithm of the bound, so bounds far
//! below `f64::MIN_POSITIVE` still order correctly.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::params::SystemParams;
use crate::sensing::ArrivalModel;
use crate::service::ServiceModel;

/// Number of log-spaced `θ` grid points before golden-section refinement.
pub const THETA_GRID: usize = 64;
/// Number of `α` grid points before golden-section refinement.
pub const ALPHA_GRID: usize = 128;
/// Relative `θ` resolution of the refinement.
pub const THETA_RTOL: f64 = 1e-6;
/// Absolute `α` resolution of the refinement.
pub const ALPHA_ATOL: f64 = 1e-4;

/// Arrival and service models of one configuration, plus the PAoI threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemModel {
    pub arrival: ArrivalModel,
    pub service: ServiceModel,
    pub zeta: f64,
}

impl SystemModel {
    pub fn new(arrival: ArrivalModel, service: ServiceModel, zeta: f64) -> Result<Self> {
        if !(zeta > 0.0) {
            return Err(Error::OutOfRange { field: "zeta", value: zeta, range: "(0, inf)" });
        }
        Ok(SystemModel { arrival, service, zeta })
    }

    pub fn from_params(p: &SystemParams) -> Result<Self> {
        SystemModel::new(ArrivalModel::from_params(p)?, ServiceModel::from_params(p)?, p.paoi_threshold)
    }

    pub fn with_zeta(&self, zeta: f64) -> Self {
        SystemModel { zeta, ..*self }
    }
}

/// Why a bound is infinite.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Divergence {
    /// The arrival side blows up: too little sensing power.
    Numerator,
    /// `M_A(−θ)·M_S(θ) ≥ 1` for every admissible `θ`: too little
    /// communication power for the packet rate.
    Denominator,
    /// The configuration itself is invalid at this `α` (e.g. no power on one side).
    Infeasible,
}

impl Divergence {
    pub fn as_str(self) -> &'static str {
        match self {
            Divergence::Numerator => "numerator divergence",
            Divergence::Denominator => "denominator divergence",
            Divergence::Infeasible => "infeasible",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Diagnostics {
    pub arrival_mgf_pos: f64,
    pub arrival_mgf_neg: f64,
    pub service_mgf: f64,
    pub stability_product: f64,
    /// Natural log of the raw bound.
    pub ln_bound: f64,
}

impl Diagnostics {
    fn nan() -> Self {
        Diagnostics {
            arrival_mgf_pos: f64::NAN,
            arrival_mgf_neg: f64::NAN,
            service_mgf: f64::NAN,
            stability_product: f64::NAN,
            ln_bound: f64::INFINITY,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundResult {
    /// Raw bound; `+∞` when no finite bound exists.
    pub pavp_bound: f64,
    pub theta_star: f64,
    pub alpha: f64,
    pub stable: bool,
    pub diagnostics: Diagnostics,
    pub divergence: Option<Divergence>,
}

impl BoundResult {
    pub fn sentinel(alpha: f64, theta: f64, reason: Divergence) -> Self {
        BoundResult {
            pavp_bound: f64::INFINITY,
            theta_star: theta,
            alpha,
            stable: false,
            diagnostics: Diagnostics::nan(),
            divergence: Some(reason),
        }
    }

    /// Bound clamped to 1 for reporting.
    pub fn reported(&self) -> f64 {
        self.pavp_bound.min(1.0)
    }

    pub fn ln_bound(&self) -> f64 {
        self.diagnostics.ln_bound
    }

    pub fn is_finite(&self) -> bool {
        self.pavp_bound.is_finite()
    }
}

/// Bound at a fixed `θ` for a prepared model.
pub fn evaluate(model: &SystemModel, theta: f64, alpha: f64) -> Result<BoundResult> {
    if !(theta > 0.0) {
        return Err(Error::InvalidArgument(format!("theta must be positive, got {theta}")));
    }
    let ln_a_pos = model.arrival.ln_mgf(theta)?;
    let service = model.service.mgf(theta)?;
    let a_neg = model.arrival.mgf(-theta)?;
    let product = a_neg * service;
    let mut diagnostics = Diagnostics {
        arrival_mgf_pos: ln_a_pos.exp(),
        arrival_mgf_neg: a_neg,
        service_mgf: service,
        stability_product: product,
        ln_bound: f64::INFINITY,
    };
    let denominator = 1.0 / service - a_neg;
    if !(product < 1.0 && denominator > 0.0) {
        return Ok(BoundResult { diagnostics, ..BoundResult::sentinel(alpha, theta, Divergence::Denominator) });
    }
    diagnostics.ln_bound = -theta * model.zeta + ln_a_pos - denominator.ln();
    Ok(BoundResult {
        pavp_bound: diagnostics.ln_bound.exp(),
        theta_star: theta,
        alpha,
        stable: true,
        diagnostics,
        divergence: None,
    })
}

/// Bound at `θ` for the parameters' own `α`.
pub fn pavp_bound(theta: f64, p: &SystemParams) -> Result<BoundResult> {
    evaluate(&SystemModel::from_params(p)?, theta, p.alpha)
}

/// Admissible positive `θ` and the limit that binds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaWindow {
    pub arrival_limit: f64,
    pub service_limit: f64,
    /// Largest `θ` with `M_A(−θ)·M_S(θ) < 1` below the other limits.
    pub stability_limit: f64,
    /// Keeps `e^{θT}` and `e^{θφ}` finite in `f64`.
    pub overflow_limit: f64,
}

impl ThetaWindow {
    pub fn upper(&self) -> f64 {
        self.arrival_limit
            .min(self.service_limit)
            .min(self.stability_limit)
            .min(self.overflow_limit)
    }

    pub fn is_empty(&self) -> bool {
        !(self.upper() > 0.0)
    }
}

fn ln_stability(model: &SystemModel, theta: f64) -> f64 {
    match (model.arrival.mgf(-theta), model.service.mgf(theta)) {
        (Ok(a), Ok(s)) => (a * s).ln(),
        _ => f64::INFINITY,
    }
}

/// The stable `θ` set is an interval `(0, θ_s)`: the log of the stability
/// product is convex (a sum of cumulant functions) and vanishes at zero.
/// It is empty unless `E[S] < E[A]`.
pub fn theta_window(model: &SystemModel) -> Result<ThetaWindow> {
    let arrival_limit = model.arrival.theta_limit();
    let service_limit = model.service.theta_limit().0;
    let span = model.arrival.scan_period.max(model.service.worst_airtime()).max(model.service.deferral);
    let overflow_limit = 700.0 / span;
    let cap = arrival_limit.min(service_limit).min(overflow_limit);
    let mut window = ThetaWindow { arrival_limit, service_limit, stability_limit: 0.0, overflow_limit };
    if model.service.mean()? >= model.arrival.mean_interarrival() {
        return Ok(window);
    }
    // Inside the cap the product can only reach 1 once.
    let top = cap * (1.0 - 1e-12);
    if ln_stability(model, top) < 0.0 {
        window.stability_limit = cap;
        return Ok(window);
    }
    let mut lo = 0.5 * top;
    let mut found = false;
    for _ in 0..200 {
        if ln_stability(model, lo) < 0.0 {
            found = true;
            break;
        }
        lo *= 0.5;
    }
    if !found {
        return Ok(window);
    }
    let mut hi = top;
    while hi - lo > 1e-12 * hi {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if ln_stability(model, mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    window.stability_limit = lo;
    Ok(window)
}

/// `θ` grid inside `(0, upper)`: log-spaced in `θ` over six decades below
/// `upper`, then log-spaced in the distance to `upper`, where the optimum
/// of a sharply rising bound tends to sit.
fn theta_grid(upper: f64) -> Vec<f64> {
    let near = 16;
    let far = THETA_GRID - near;
    let mut grid: Vec<f64> = (0..far)
        .map(|i| upper * 10f64.powf(-6.0 + 6.0 * i as f64 / far as f64))
        .filter(|t| *t < 0.9 * upper)
        .collect();
    grid.extend((0..near).map(|i| upper * (1.0 - 10f64.powf(-1.0 - 8.0 * i as f64 / (near - 1) as f64))));
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    grid
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section minimization of `f` on `[a, b]` until the bracket is
/// narrower than `tol(x)`. Returns the best point seen and its value.
pub fn golden_section<F, T>(mut f: F, mut a: f64, mut b: f64, tol: T) -> (f64, f64)
where
    F: FnMut(f64) -> f64,
    T: Fn(f64) -> f64,
{
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    let mut best = if fc <= fd { (c, fc) } else { (d, fd) };
    for _ in 0..300 {
        if (b - a).abs() <= tol(0.5 * (a + b)) {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
        for (x, v) in [(c, fc), (d, fd)] {
            if v < best.1 {
                best = (x, v);
            }
        }
    }
    best
}

fn ln_or_inf(r: &Result<BoundResult>) -> f64 {
    match r {
        Ok(b) if b.is_finite() => b.ln_bound(),
        _ => f64::INFINITY,
    }
}

/// Minimize the bound over `θ` for a prepared model.
pub fn optimize_theta_model(model: &SystemModel, alpha: f64) -> Result<BoundResult> {
    let window = theta_window(model)?;
    if window.is_empty() {
        return Ok(BoundResult::sentinel(alpha, 0.0, Divergence::Denominator));
    }
    let upper = window.upper();
    let grid = theta_grid(upper);
    let values: Vec<f64> = grid.iter().map(|&t| ln_or_inf(&evaluate(model, t, alpha))).collect();
    let (best_i, best_v) = values
        .iter()
        .copied()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("grid is non-empty");
    if !best_v.is_finite() {
        // A window closed by the arrival MGF itself means the scan series
        // diverges before the queue can be bounded.
        let reason = if window.arrival_limit <= upper { Divergence::Numerator } else { Divergence::Denominator };
        return Ok(BoundResult::sentinel(alpha, grid[best_i], reason));
    }
    let lo = if best_i == 0 { 0.5 * grid[0] } else { grid[best_i - 1] };
    let hi = if best_i + 1 == grid.len() { upper * (1.0 - 1e-12) } else { grid[best_i + 1] };
    let (t_ref, v_ref) = golden_section(
        |t| ln_or_inf(&evaluate(model, t, alpha)),
        lo,
        hi,
        |x| THETA_RTOL * x,
    );
    let theta = if v_ref <= best_v { t_ref } else { grid[best_i] };
    evaluate(model, theta, alpha)
}

/// Minimize the bound over `θ ∈ (0, θ_max)` at power split `alpha`.
/// Configurations without a stable `θ` come back as sentinels.
pub fn optimize_theta(p: &SystemParams, alpha: f64) -> BoundResult {
    let q = p.with_alpha(alpha);
    match SystemModel::from_params(&q) {
        Ok(model) => optimize_theta_model(&model, alpha)
            .unwrap_or_else(|_| BoundResult::sentinel(alpha, 0.0, Divergence::Infeasible)),
        Err(Error::AllPowerToComm) => BoundResult::sentinel(alpha, 0.0, Divergence::Numerator),
        Err(Error::OutOfRange { field: "P_s(d)", .. }) => BoundResult::sentinel(alpha, 0.0, Divergence::Numerator),
        Err(_) => BoundResult::sentinel(alpha, 0.0, Divergence::Infeasible),
    }
}

/// Bound for the parameters as configured: at `p.theta` when set, otherwise
/// with `θ` optimized.
pub fn bound_for_params(p: &SystemParams) -> Result<BoundResult> {
    match p.theta {
        Some(theta) => pavp_bound(theta, p),
        None => {
            let model = SystemModel::from_params(p)?;
            optimize_theta_model(&model, p.alpha)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlphaOptimum {
    pub best: BoundResult,
    /// θ-optimized bound at each grid `α`, in increasing `α`.
    pub grid: Vec<BoundResult>,
}

pub fn alpha_grid() -> Vec<f64> {
    (1..=ALPHA_GRID).map(|i| i as f64 / (ALPHA_GRID + 1) as f64).collect()
}

/// Minimize the θ-optimized bound over `α ∈ (0, 1)`: grid, then
/// golden-section refinement around the best cell. The refined point is
/// kept only if it does not lose to the grid minimum.
pub fn optimize_alpha(p: &SystemParams) -> Result<AlphaOptimum> {
    let alphas = alpha_grid();
    let grid: Vec<BoundResult> = alphas.par_iter().map(|&a| optimize_theta(p, a)).collect();
    let (best_i, best) = grid
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.ln_bound().total_cmp(&b.1.ln_bound()))
        .expect("grid is non-empty");
    if !best.is_finite() {
        return Err(Error::NoFeasibleAlpha);
    }
    let lo = if best_i == 0 { alphas[0] * 0.5 } else { alphas[best_i - 1] };
    let hi = if best_i + 1 == alphas.len() { 0.5 * (1.0 + alphas[best_i]) } else { alphas[best_i + 1] };
    let (a_ref, v_ref) = golden_section(|a| optimize_theta(p, a).ln_bound(), lo, hi, |_| ALPHA_ATOL);
    let best = if v_ref <= best.ln_bound() { optimize_theta(p, a_ref) } else { *best };
    Ok(AlphaOptimum { best, grid })
}

/// Smallest `α` at which a stable `θ` exists (`E[S] < E[A]`), by bisection.
/// `None` when even `hi` is unstable.
pub fn critical_alpha(p: &SystemParams, hi: f64) -> Option<f64> {
    let stable = |a: f64| -> bool {
        let q = p.with_alpha(a);
        match SystemModel::from_params(&q) {
            Ok(m) => m.service.mean().map_or(false, |s| s < m.arrival.mean_interarrival()),
            Err(_) => false,
        }
    };
    if !stable(hi) {
        return None;
    }
    let (mut lo, mut hi) = (0.0, hi);
    while hi - lo > 1e-12 * hi {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if stable(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn tau10() -> SystemParams {
        SystemParams { snr_threshold: 10.0, ..SystemParams::default() }
    }

    fn deterministic(zeta: f64) -> SystemModel {
        SystemModel::new(
            ArrivalModel::new(1e-3, 1.0).unwrap(),
            ServiceModel::fixed_airtime(1.0, 1.0, 0.5e-3, 0.4e-3).unwrap(),
            zeta,
        )
        .unwrap()
    }

    #[test]
    fn bound_formula_composes_module_mgfs() {
        let p = tau10();
        let r = pavp_bound(300.0, &p).unwrap();
        let m = SystemModel::from_params(&p).unwrap();
        let a_pos = m.arrival.mgf(300.0).unwrap();
        let a_neg = m.arrival.mgf(-300.0).unwrap();
        let s = m.service.mgf(300.0).unwrap();
        let by_hand = (-300.0 * 6e-3f64).exp() * a_pos / (1.0 / s - a_neg);
        assert!(((r.pavp_bound - by_hand) / by_hand).abs() < 1e-12);
        assert!(r.stable);
        assert_eq!(r.alpha, 0.5);
        assert!((r.diagnostics.stability_product - a_neg * s).abs() < 1e-15);
    }

    #[test]
    fn huge_zeta_crushes_bound() {
        let p = SystemParams { paoi_threshold: 1e6, ..tau10() };
        let r = pavp_bound(300.0, &p).unwrap();
        assert!(r.stable && r.pavp_bound < 1e-300);
        assert!(r.ln_bound() < -1e8);
    }

    #[test]
    fn divergent_theta_is_an_error() {
        let p = tau10();
        let m = SystemModel::from_params(&p).unwrap();
        let limit = m.service.theta_limit().0;
        assert!(matches!(pavp_bound(1.1 * limit, &p), Err(Error::MgfDiverges { .. })));
        assert!(pavp_bound(-1.0, &p).is_err());
    }

    #[test]
    fn unstable_configuration_is_a_sentinel() {
        // Mean service time well above the mean inter-arrival time.
        let m = SystemModel::new(
            ArrivalModel::new(1e-3, 1.0).unwrap(),
            ServiceModel::fixed_airtime(0.5, 0.5, 1e-3, 1e-3).unwrap(),
            6e-3,
        )
        .unwrap();
        let r = evaluate(&m, 10.0, 0.5).unwrap();
        assert!(!r.stable);
        assert_eq!(r.pavp_bound, f64::INFINITY);
        assert_eq!(r.reported(), 1.0);
        assert_eq!(r.divergence, Some(Divergence::Denominator));
        assert!(theta_window(&m).unwrap().is_empty());
        let o = optimize_theta_model(&m, 0.5).unwrap();
        assert!(!o.stable);
    }

    #[test]
    fn deterministic_queue_optimum_is_at_the_boundary() {
        let m = deterministic(3e-3);
        let w = theta_window(&m).unwrap();
        assert_eq!(w.arrival_limit, f64::INFINITY);
        assert_eq!(w.service_limit, f64::INFINITY);
        assert_eq!(w.upper(), w.overflow_limit);
        let r = optimize_theta_model(&m, 0.5).unwrap();
        // ln bound = −θ(ζ − T − φ) − ln(1 − e^{−θ(T−φ)}) is decreasing in θ.
        let grid = theta_grid(w.upper());
        let top = grid[grid.len() - 1];
        assert!(r.theta_star >= grid[grid.len() - 2], "{} vs {}", r.theta_star, top);
        let theta = r.theta_star;
        let closed = -theta * (3e-3 - 1.4e-3) - (-(-theta * 0.6e-3f64).exp()).ln_1p();
        assert!((r.ln_bound() - closed).abs() < 1e-9 * closed.abs());
    }

    #[test]
    fn optimum_beats_random_feasible_thetas() {
        let p = tau10();
        let m = SystemModel::from_params(&p).unwrap();
        let r = optimize_theta_model(&m, 0.5).unwrap();
        assert!(r.stable);
        let upper = theta_window(&m).unwrap().upper();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..128 {
            let t = upper * rng.random_range(1e-6..1.0 - 1e-9);
            if let Ok(b) = evaluate(&m, t, 0.5) {
                assert!(r.ln_bound() <= b.ln_bound() + 1e-12, "theta {t}");
            }
        }
    }

    #[test]
    fn no_communication_power_is_a_sentinel() {
        let r = optimize_theta(&tau10(), 1e-9);
        assert!(!r.stable);
        assert_eq!(r.pavp_bound, f64::INFINITY);
    }

    #[test]
    fn bound_non_increasing_in_zeta() {
        let m = SystemModel::from_params(&tau10()).unwrap();
        let mut prev = f64::INFINITY;
        for zeta_ms in [2.0, 3.0, 4.0, 6.0, 8.0, 12.0] {
            let r = optimize_theta_model(&m.with_zeta(zeta_ms * 1e-3), 0.5).unwrap();
            assert!(r.ln_bound() <= prev);
            prev = r.ln_bound();
        }
    }

    #[test]
    fn golden_section_finds_parabola_minimum() {
        let (x, v) = golden_section(|x| (x - 0.3).powi(2), 0.0, 1.0, |_| 1e-9);
        assert!((x - 0.3).abs() < 1e-8);
        assert!(v < 1e-16);
    }
}
