//! Discrete-event simulation of the scan / queue / transmit system.
//!
//! Scans fire at `kT`; a detecting scan enqueues a packet. One FCFS server
//! evaluates the channel (accept with probability `p`, otherwise wait `ϖ`
//! and evaluate again), transmits for `φ(γ(h))`, and either delivers
//! (probability `η`) or goes straight back to channel evaluation.

use std::collections::VecDeque;
use std::fmt::Write as _;
use std::io;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::params::SystemParams;
use crate::sensing::ArrivalModel;
use crate::service::{GainMode, ServiceModel};

/// Queue length at which a run is declared unstable.
pub const MAX_QUEUE: usize = 1_000_000;

/// Two-sided 95% normal quantile.
const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PacketTrace {
    pub n: u64,
    pub t_gen: f64,
    pub t_start_service: f64,
    /// Transmissions, `b + 1`.
    pub attempts: u64,
    /// Deferral intervals, `c`.
    pub deferrals: u64,
    /// Busy time accumulated by the server for this packet, summed piecewise.
    pub service_time: f64,
    pub t_depart: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SimConfig {
    pub n_packets: usize,
    pub seed: u64,
    pub gain_mode: GainMode,
    pub keep_trace: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimStats {
    pub zeta: f64,
    pub pavp_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub std_err: f64,
    pub exceed: u64,
    pub paoi_samples: Vec<f64>,
    pub scans: u64,
    pub detections: u64,
    pub sdp_hat: f64,
    pub mean_attempts: f64,
    pub mean_deferrals: f64,
    /// Packets contributing to the statistics (after warm-up).
    pub n_packets: u64,
    pub seed: u64,
}

impl SimStats {
    fn from_parts(
        zeta: f64,
        paoi_samples: Vec<f64>,
        scans: u64,
        detections: u64,
        attempts: u64,
        deferrals: u64,
        seed: u64,
    ) -> Self {
        let n = paoi_samples.len() as u64;
        let exceed = paoi_samples.iter().filter(|&&x| x > zeta).count() as u64;
        let (ci_low, ci_high) = wilson_interval(exceed, n);
        let pavp_hat = if n == 0 { 0.0 } else { exceed as f64 / n as f64 };
        let std_err = if n == 0 { 0.0 } else { (pavp_hat * (1.0 - pavp_hat) / n as f64).sqrt() };
        let per = |x: u64| if n == 0 { 0.0 } else { x as f64 / n as f64 };
        SimStats {
            zeta,
            pavp_hat,
            ci_low,
            ci_high,
            std_err,
            exceed,
            scans,
            detections,
            sdp_hat: if scans == 0 { 0.0 } else { detections as f64 / scans as f64 },
            mean_attempts: per(attempts),
            mean_deferrals: per(deferrals),
            n_packets: n,
            seed,
            paoi_samples,
        }
    }

    /// Half-width of the Wilson interval.
    pub fn ci_halfwidth(&self) -> f64 {
        0.5 * (self.ci_high - self.ci_low)
    }

    /// Counts of PAoI samples in `[lo + i·width, lo + (i+1)·width)`; samples
    /// outside the range are clamped into the edge bins.
    pub fn histogram(&self, lo: f64, width: f64, bins: usize) -> Vec<u64> {
        let mut out = vec![0u64; bins];
        if bins == 0 || width <= 0.0 {
            return out;
        }
        for &x in &self.paoi_samples {
            let i = ((x - lo) / width).floor();
            let i = if i < 0.0 { 0 } else { (i as usize).min(bins - 1) };
            out[i] += 1;
        }
        out
    }

    pub fn mean_paoi(&self) -> f64 {
        if self.paoi_samples.is_empty() {
            return 0.0;
        }
        self.paoi_samples.iter().sum::<f64>() / self.paoi_samples.len() as f64
    }
}

/// Wilson score interval for `k` successes out of `n` at 95%.
pub fn wilson_interval(k: u64, n: u64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let ph = k as f64 / n;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / n;
    let center = (ph + z2 / (2.0 * n)) / denom;
    let half = Z95 * (ph * (1.0 - ph) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    // Exact endpoints at k = 0 and k = n; the formula leaves rounding dust.
    let lo = if k == 0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if k as f64 == n { 1.0 } else { (center + half).min(1.0) };
    (lo, hi)
}

#[derive(Debug, Clone, Copy)]
enum Server {
    Idle,
    /// Channel evaluation due at `at`.
    Evaluate { at: f64 },
    /// Transmission ends at `at`.
    Transmit { at: f64 },
}

struct InService {
    n: u64,
    t_gen: f64,
    t_start: f64,
    attempts: u64,
    deferrals: u64,
    busy: f64,
    gain: f64,
}

/// A configured simulator. Arrival and service models are taken as given,
/// so degenerate reference systems can be simulated as well.
#[derive(Debug, Clone, Copy)]
pub struct Simulator {
    pub arrival: ArrivalModel,
    pub service: ServiceModel,
    pub zeta: f64,
}

/// Output of one run.
#[derive(Debug, Clone)]
pub struct SimRun {
    pub stats: SimStats,
    pub trace: Option<Vec<PacketTrace>>,
}

impl Simulator {
    pub fn new(arrival: ArrivalModel, service: ServiceModel, zeta: f64) -> Self {
        Simulator { arrival, service, zeta }
    }

    pub fn from_params(p: &SystemParams) -> Result<Self> {
        p.validate()?;
        Ok(Simulator::new(ArrivalModel::from_params(p)?, ServiceModel::from_params(p)?, p.paoi_threshold))
    }

    /// Run until `n_packets + 1` packets have departed and return PAoI
    /// statistics of the first `n_packets` (minus warm-up).
    pub fn run(&self, cfg: &SimConfig) -> Result<SimRun> {
        if cfg.n_packets == 0 {
            return Err(Error::InvalidArgument("n_packets must be at least 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let target = cfg.n_packets as u64 + 1;
        let sv = &self.service;

        let mut queue: VecDeque<(u64, f64)> = VecDeque::new();
        let mut server = Server::Idle;
        let mut current: Option<InService> = None;
        let mut departed: Vec<PacketTrace> = Vec::with_capacity(target as usize);
        let mut scan_k: u64 = 1;
        let mut scans = 0u64;
        let mut detections = 0u64;
        let mut generated = 0u64;

        while (departed.len() as u64) < target {
            let next_scan = scan_k as f64 * self.arrival.scan_period;
            let server_at = match server {
                Server::Idle => f64::INFINITY,
                Server::Evaluate { at } | Server::Transmit { at } => at,
            };
            // Server events win ties so a packet departing at a scan instant
            // leaves before the new one is queued.
            if server_at <= next_scan {
                let now = server_at;
                let pkt = current.as_mut().expect("busy server holds a packet");
                match server {
                    Server::Evaluate { .. } => {
                        if sv.channel_acceptable(&mut rng) {
                            if pkt.attempts == 0 || cfg.gain_mode == GainMode::PerAttempt {
                                pkt.gain = sv.draw_gain(&mut rng);
                            }
                            let air = sv.airtime_at(pkt.gain);
                            pkt.busy += air;
                            pkt.attempts += 1;
                            server = Server::Transmit { at: now + air };
                        } else {
                            pkt.deferrals += 1;
                            pkt.busy += sv.deferral;
                            server = Server::Evaluate { at: now + sv.deferral };
                        }
                    }
                    Server::Transmit { .. } => {
                        if sv.decodes(&mut rng) {
                            let done = current.take().expect("checked above");
                            departed.push(PacketTrace {
                                n: done.n,
                                t_gen: done.t_gen,
                                t_start_service: done.t_start,
                                attempts: done.attempts,
                                deferrals: done.deferrals,
                                service_time: done.busy,
                                t_depart: now,
                            });
                            server = match queue.pop_front() {
                                Some((n, t_gen)) => {
                                    current = Some(InService::start(n, t_gen, now));
                                    Server::Evaluate { at: now }
                                }
                                None => Server::Idle,
                            };
                        } else {
                            server = Server::Evaluate { at: now };
                        }
                    }
                    Server::Idle => unreachable!(),
                }
            } else {
                let now = next_scan;
                scan_k += 1;
                scans += 1;
                if self.arrival.scan_detects(&mut rng) {
                    detections += 1;
                    let n = generated;
                    generated += 1;
                    if current.is_none() {
                        current = Some(InService::start(n, now, now));
                        server = Server::Evaluate { at: now };
                    } else {
                        queue.push_back((n, now));
                        if queue.len() > MAX_QUEUE {
                            return Err(Error::NonProgress(queue.len()));
                        }
                    }
                }
            }
        }

        let warmup = cfg.n_packets / 100;
        let mut samples = Vec::with_capacity(cfg.n_packets - warmup);
        let (mut attempts, mut deferrals) = (0u64, 0u64);
        for w in departed.windows(2).skip(warmup) {
            samples.push(w[1].t_depart - w[0].t_gen);
            attempts += w[0].attempts;
            deferrals += w[0].deferrals;
        }
        let stats = SimStats::from_parts(self.zeta, samples, scans, detections, attempts, deferrals, cfg.seed);
        Ok(SimRun { stats, trace: cfg.keep_trace.then_some(departed) })
    }

    /// Independent replications on the worker pool, pooled into one
    /// estimate. Replication `r` uses seed `seed + r`.
    pub fn run_replications(&self, cfg: &SimConfig, replications: usize) -> Result<SimStats> {
        if replications == 0 {
            return Err(Error::InvalidArgument("replications must be at least 1".into()));
        }
        let runs: Vec<Result<SimRun>> = (0..replications as u64)
            .into_par_iter()
            .map(|r| {
                let c = SimConfig { seed: cfg.seed.wrapping_add(r), keep_trace: false, ..*cfg };
                self.run(&c)
            })
            .collect();
        let mut samples = Vec::new();
        let (mut scans, mut det, mut att, mut def) = (0, 0, 0, 0);
        for run in runs {
            let s = run?.stats;
            scans += s.scans;
            det += s.detections;
            att += (s.mean_attempts * s.n_packets as f64).round() as u64;
            def += (s.mean_deferrals * s.n_packets as f64).round() as u64;
            samples.extend(s.paoi_samples);
        }
        Ok(SimStats::from_parts(self.zeta, samples, scans, det, att, def, cfg.seed))
    }
}

impl InService {
    fn start(n: u64, t_gen: f64, now: f64) -> Self {
        InService { n, t_gen, t_start: now, attempts: 0, deferrals: 0, busy: 0.0, gain: 0.0 }
    }
}

/// Simulate the system described by `p`.
pub fn run_sim(p: &SystemParams, n_packets: usize, seed: u64, gain_mode: GainMode) -> Result<SimRun> {
    Simulator::from_params(p)?.run(&SimConfig { n_packets, seed, gain_mode, keep_trace: false })
}

/// Largest gap between the simulated departures and those recomputed from
/// arrivals and service times via `D(n) = max(A(n), D(n−1)) + S(n)`.
pub fn departure_discrepancy(trace: &[PacketTrace]) -> f64 {
    let mut prev = f64::NEG_INFINITY;
    let mut worst = 0.0f64;
    for t in trace {
        let d = t.t_gen.max(prev) + t.service_time;
        worst = worst.max((d - t.t_depart).abs());
        prev = d;
    }
    worst
}

/// `true` when the max-plus recursion reproduces every departure to 1e−9 s.
pub fn departure_recursion_check(trace: &[PacketTrace]) -> bool {
    departure_discrepancy(trace) < 1e-9
}

/// Write a trace as CSV: `n,t_gen,t_start,attempts,deferrals,t_depart,paoi`.
/// The trailing packet has no successor and carries an empty PAoI field.
pub fn write_trace<W: io::Write>(trace: &[PacketTrace], mut out: W) -> io::Result<()> {
    let mut buf = String::from("n,t_gen,t_start,attempts,deferrals,t_depart,paoi\n");
    for (i, t) in trace.iter().enumerate() {
        let _ = write!(
            buf,
            "{},{:.9},{:.9},{},{},{:.9},",
            t.n, t.t_gen, t.t_start_service, t.attempts, t.deferrals, t.t_depart
        );
        if let Some(next) = trace.get(i + 1) {
            let _ = write!(buf, "{:.9}", next.t_depart - t.t_gen);
        }
        buf.push('\n');
    }
    out.write_all(buf.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::SystemParams;

    fn fixed(p: f64, eta: f64, ps: f64, phi: f64, zeta: f64) -> Simulator {
        let a = ArrivalModel::new(1e-3, ps).unwrap();
        let s = ServiceModel::fixed_airtime(p, eta, 0.5e-3, phi).unwrap();
        Simulator::new(a, s, zeta)
    }

    fn cfg(n: usize, seed: u64, gain_mode: GainMode) -> SimConfig {
        SimConfig { n_packets: n, seed, gain_mode, keep_trace: true }
    }

    fn fast_params() -> SystemParams {
        let mut p = SystemParams { snr_threshold: 1e5, detection_threshold: 100.0, ..Default::default() };
        p.alpha = 0.3;
        p
    }

    #[test]
    fn deterministic_queue_has_constant_paoi() {
        let sim = fixed(1.0, 1.0, 1.0, 0.4e-3, 1.5e-3);
        let run = sim.run(&cfg(500, 7, GainMode::PerPacket)).unwrap();
        for x in &run.stats.paoi_samples {
            assert!((x - 1.4e-3).abs() < 1e-12, "{x}");
        }
        assert_eq!(run.stats.pavp_hat, 0.0);
        assert_eq!(run.stats.mean_attempts, 1.0);
        assert_eq!(run.stats.sdp_hat, 1.0);
        assert_eq!(run.stats.n_packets, 495);
    }

    #[test]
    fn same_seed_same_stats() {
        let sim = Simulator::from_params(&fast_params()).unwrap();
        let a = sim.run(&cfg(20_000, 11, GainMode::PerPacket)).unwrap();
        let b = sim.run(&cfg(20_000, 11, GainMode::PerPacket)).unwrap();
        assert_eq!(a.stats, b.stats);
        let c = sim.run(&cfg(20_000, 12, GainMode::PerPacket)).unwrap();
        assert_ne!(a.stats.paoi_samples, c.stats.paoi_samples);
    }

    #[test]
    fn trace_invariants_and_recursion() {
        let sim = Simulator::from_params(&fast_params()).unwrap();
        for mode in [GainMode::PerPacket, GainMode::PerAttempt] {
            let tr = sim.run(&cfg(1000, 3, mode)).unwrap().trace.unwrap();
            assert_eq!(tr.len(), 1001);
            for (i, t) in tr.iter().enumerate() {
                assert_eq!(t.n, i as u64);
                assert!(t.t_depart >= t.t_start_service && t.t_start_service >= t.t_gen);
                assert!(t.attempts >= 1);
            }
            assert!(tr.windows(2).all(|w| w[1].t_depart >= w[0].t_depart));
            assert!(departure_recursion_check(&tr));
            assert!(departure_recursion_check(&tr[..10]));
            // Closed max-plus form, quadratic but independent of the recursion.
            for n in 0..tr.len() {
                let d = (0..=n)
                    .map(|v| tr[v].t_gen + tr[v..=n].iter().map(|t| t.service_time).sum::<f64>())
                    .fold(f64::NEG_INFINITY, f64::max);
                assert!((d - tr[n].t_depart).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn single_packet_departs_after_its_service() {
        let sim = Simulator::from_params(&fast_params()).unwrap();
        let tr = sim.run(&cfg(1, 5, GainMode::PerPacket)).unwrap().trace.unwrap();
        assert!((tr[0].t_depart - (tr[0].t_gen + tr[0].service_time)).abs() < 1e-12);
    }

    #[test]
    fn recursion_check_detects_corruption() {
        let sim = Simulator::from_params(&fast_params()).unwrap();
        let mut tr = sim.run(&cfg(50, 9, GainMode::PerPacket)).unwrap().trace.unwrap();
        tr[20].t_depart += 1e-6;
        assert!(!departure_recursion_check(&tr));
    }

    #[test]
    fn paoi_two_ways() {
        let sim = Simulator::from_params(&fast_params()).unwrap();
        let tr = sim.run(&cfg(2000, 21, GainMode::PerAttempt)).unwrap().trace.unwrap();
        for w in tr.windows(2) {
            let direct = w[1].t_depart - w[0].t_gen;
            let split = (w[1].t_depart - w[1].t_gen) + (w[1].t_gen - w[0].t_gen);
            assert!((direct - split).abs() <= 4.0 * f64::EPSILON * w[1].t_depart);
        }
    }

    #[test]
    fn sdp_and_service_match_analytics() {
        let p = fast_params();
        let sim = Simulator::from_params(&p).unwrap();
        let s = sim.run(&cfg(200_000, 1, GainMode::PerPacket)).unwrap().stats;
        let ps = sim.arrival.detect_prob;
        let se = (ps * (1.0 - ps) / s.scans as f64).sqrt();
        assert!((s.sdp_hat - ps).abs() < 4.0 * se, "{} vs {ps}", s.sdp_hat);
        let eta = sim.service.eta;
        assert!((s.mean_attempts - 1.0 / eta).abs() < 0.01 / eta);
        let q = 1.0 - sim.service.p_accept;
        let want = q / sim.service.p_accept / eta;
        assert!((s.mean_deferrals - want).abs() < 0.03 * want.max(0.01), "{} vs {want}", s.mean_deferrals);
    }

    #[test]
    fn overloaded_queue_is_non_progress() {
        // Arrival every scan, service five scans long.
        let sim = fixed(1.0, 1.0, 1.0, 5e-3, 1.0);
        let err = sim.run(&SimConfig { n_packets: 400_000, ..Default::default() }).unwrap_err();
        assert!(matches!(err, Error::NonProgress(_)));
    }

    #[test]
    fn wilson_interval_properties() {
        let (lo, hi) = wilson_interval(0, 100);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0 && hi < 0.05);
        let (lo, hi) = wilson_interval(50, 100);
        assert!((lo + hi - 1.0).abs() < 1e-12);
        // Width shrinks like n^{-1/2}.
        let w1 = { let (a, b) = wilson_interval(100, 1000); b - a };
        let w4 = { let (a, b) = wilson_interval(400, 4000); b - a };
        assert!((w1 / w4 - 2.0).abs() < 0.05);
    }

    #[test]
    fn replications_pool_samples() {
        let sim = Simulator::from_params(&fast_params()).unwrap();
        let c = SimConfig { n_packets: 5000, seed: 4, ..Default::default() };
        let pooled = sim.run_replications(&c, 3).unwrap();
        assert_eq!(pooled.n_packets, 3 * (5000 - 50));
        let again = sim.run_replications(&c, 3).unwrap();
        assert_eq!(pooled, again);
        let first = sim.run(&c).unwrap().stats;
        assert_eq!(&pooled.paoi_samples[..first.paoi_samples.len()], &first.paoi_samples[..]);
    }

    #[test]
    fn trace_csv_format() {
        let sim = fixed(1.0, 1.0, 1.0, 0.25e-3, 1.0);
        let tr = sim.run(&cfg(2, 0, GainMode::PerPacket)).unwrap().trace.unwrap();
        let mut out = Vec::new();
        write_trace(&tr, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "n,t_gen,t_start,attempts,deferrals,t_depart,paoi");
        assert_eq!(lines[1], "0,0.001000000,0.001000000,1,0,0.001250000,0.001250000");
        assert!(lines[3].ends_with(','));
    }

    #[test]
    fn histogram_counts_everything() {
        let sim = Simulator::from_params(&fast_params()).unwrap();
        let s = sim.run(&cfg(3000, 2, GainMode::PerPacket)).unwrap().stats;
        let h = s.histogram(0.0, 1e-3, 20);
        assert_eq!(h.iter().sum::<u64>(), s.n_packets);
    }
}
