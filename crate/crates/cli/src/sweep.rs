//! `sweep.*` experiment specs and their execution.
//!
//! Recognized keys (after the `sweep.` prefix):
//! `variable`, `grid` (comma list), `outputs` (`bound|sim|both`),
//! `quantity` (`pavp|sdp`), `series` (`key: v1, v2, …`), `replications`,
//! `packets`, `seed`, `gain_mode`.

use std::str::FromStr;
use std::time::Instant;

use isac_aoi::bound::optimize_theta;
use isac_aoi::params::Entry;
use isac_aoi::sensing::{sdp, ArrivalModel};
use isac_aoi::sim::{wilson_interval, SimConfig, Simulator};
use isac_aoi::{GainMode, SystemParams};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::commands::bound_or_sentinel;
use crate::config::{synthetic, Loaded};
use crate::table::num;
use crate::CliError;

/// Sweepable parameters; a unit suffix (`W_khz`, `rho_bar_dbsm`) is allowed.
pub const VARIABLES: [&str; 8] = ["D", "W", "alpha", "zeta", "varpi", "epsilon", "d", "rho_bar"];

pub const DEFAULT_PACKETS: usize = 100_000;
pub const DEFAULT_SEED: u64 = 1;
/// Seed spacing between grid points; replications use consecutive seeds.
const POINT_SEED_STRIDE: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outputs {
    Bound,
    Sim,
    Both,
}

impl Outputs {
    pub fn analytic(self) -> bool {
        self != Outputs::Sim
    }
    pub fn sim(self) -> bool {
        self != Outputs::Bound
    }
}

impl FromStr for Outputs {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "bound" => Ok(Outputs::Bound),
            "sim" => Ok(Outputs::Sim),
            "both" => Ok(Outputs::Both),
            _ => Err(format!("sweep.outputs must be bound, sim or both, got `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantity {
    Pavp,
    Sdp,
}

impl FromStr for Quantity {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "pavp" => Ok(Quantity::Pavp),
            "sdp" => Ok(Quantity::Sdp),
            _ => Err(format!("sweep.quantity must be pavp or sdp, got `{s}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub key: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub variable: String,
    pub grid: Vec<f64>,
    pub outputs: Outputs,
    pub quantity: Quantity,
    pub series: Option<Series>,
    pub replications: usize,
    pub packets: usize,
    pub seed: u64,
    pub gain_mode: GainMode,
}

fn sweepable(key: &str) -> bool {
    VARIABLES
        .iter()
        .any(|v| key == *v || key.strip_prefix(v).is_some_and(|rest| rest.starts_with('_') && rest.len() > 1))
}

fn parse_list(e: &Entry) -> Result<Vec<f64>, CliError> {
    e.value
        .split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| CliError::Config(format!("line {}: sweep.{}: `{}` is not a number", e.line, e.key, t.trim())))
        })
        .collect()
}

fn parse_one<T: FromStr>(e: &Entry) -> Result<T, CliError>
where
    T::Err: std::fmt::Display,
{
    e.value
        .parse()
        .map_err(|err| CliError::Config(format!("line {}: sweep.{}: {err}", e.line, e.key)))
}

impl SweepSpec {
    /// Read the spec from the loaded `sweep.*` entries; command-line
    /// `packets`, `replications` and `seed` take precedence.
    pub fn from_loaded(
        loaded: &Loaded,
        packets: Option<usize>,
        replications: Option<usize>,
        seed: Option<u64>,
    ) -> Result<Self, CliError> {
        const KNOWN: [&str; 9] =
            ["variable", "grid", "outputs", "quantity", "series", "replications", "packets", "seed", "gain_mode"];
        if let Some(e) = loaded.sweep.iter().find(|e| !KNOWN.contains(&e.key.as_str())) {
            return Err(CliError::Config(format!("unknown sweep key `sweep.{}`", e.key)));
        }
        let need = |k: &str| {
            loaded.sweep_value(k).ok_or_else(|| CliError::Config(format!("sweep.{k} is required")))
        };
        let variable = need("variable")?.value.clone();
        if !sweepable(&variable) {
            return Err(CliError::Config(format!(
                "sweep.variable `{variable}` is not one of {}",
                VARIABLES.join(", ")
            )));
        }
        let grid = parse_list(need("grid")?)?;
        let outputs = match loaded.sweep_value("outputs") {
            Some(e) => parse_one(e)?,
            None => Outputs::Bound,
        };
        let quantity = match loaded.sweep_value("quantity") {
            Some(e) => parse_one(e)?,
            None => Quantity::Pavp,
        };
        let series = match loaded.sweep_value("series") {
            Some(e) => {
                let (key, list) = e.value.split_once(':').ok_or_else(|| {
                    CliError::Config(format!("line {}: sweep.series must look like `key: v1, v2`", e.line))
                })?;
                let values = parse_list(&Entry { value: list.to_string(), ..e.clone() })?;
                Some(Series { key: key.trim().to_string(), values })
            }
            None => None,
        };
        let replications = match replications {
            Some(r) => r,
            None => loaded.sweep_value("replications").map(parse_one).transpose()?.unwrap_or(1),
        };
        let packets = match packets {
            Some(n) => n,
            None => loaded.sweep_value("packets").map(parse_one).transpose()?.unwrap_or(DEFAULT_PACKETS),
        };
        let seed = match seed {
            Some(s) => s,
            None => loaded.sweep_value("seed").map(parse_one).transpose()?.unwrap_or(DEFAULT_SEED),
        };
        let gain_mode = loaded.sweep_value("gain_mode").map(parse_one).transpose()?.unwrap_or_default();
        let spec = SweepSpec { variable, grid, outputs, quantity, series, replications, packets, seed, gain_mode };
        spec.validate(loaded)?;
        Ok(spec)
    }

    fn validate(&self, loaded: &Loaded) -> Result<(), CliError> {
        if self.grid.is_empty() {
            return Err(CliError::Config("sweep.grid is empty".into()));
        }
        let increasing = self.grid.windows(2).all(|w| w[1] > w[0]);
        let decreasing = self.grid.windows(2).all(|w| w[1] < w[0]);
        if !(increasing || decreasing) {
            return Err(CliError::Config("sweep.grid must be strictly monotone".into()));
        }
        if self.outputs.sim() && (self.replications == 0 || self.packets == 0) {
            return Err(CliError::Config("simulation needs replications >= 1 and packets >= 1".into()));
        }
        if let Some(s) = &self.series {
            if s.values.is_empty() {
                return Err(CliError::Config("sweep.series has no values".into()));
            }
            if s.key == self.variable {
                return Err(CliError::Config("sweep.series cannot use the sweep variable".into()));
            }
        }
        // Surface bad keys or units before any work is scheduled.
        let probe = self.point_entries(self.series.as_ref().map(|s| s.values[0]), self.grid[0]);
        loaded.params_with(&probe)?;
        Ok(())
    }

    fn point_entries(&self, series: Option<f64>, x: f64) -> Vec<Entry> {
        let mut v = Vec::with_capacity(2);
        if let (Some(s), Some(val)) = (&self.series, series) {
            v.push(synthetic(&s.key, val));
        }
        v.push(synthetic(&self.variable, x));
        v
    }

    /// `(series value, grid value)` in output order.
    pub fn points(&self) -> Vec<(Option<f64>, f64)> {
        let series: Vec<Option<f64>> = match &self.series {
            Some(s) => s.values.iter().copied().map(Some).collect(),
            None => vec![None],
        };
        series.iter().flat_map(|&s| self.grid.iter().map(move |&x| (s, x))).collect()
    }

    pub fn header(&self, timing: bool) -> Vec<String> {
        let mut h = Vec::new();
        if let Some(s) = &self.series {
            h.push(s.key.clone());
        }
        h.push(self.variable.clone());
        let cols: &[&str] = match self.quantity {
            Quantity::Pavp => &["bound", "theta_star", "stable", "sim_pavp", "ci_low", "ci_high", "std_err", "samples"],
            Quantity::Sdp => &["sdp", "sim_sdp", "ci_low", "ci_high", "std_err", "samples"],
        };
        h.extend(cols.iter().map(|c| c.to_string()));
        if timing {
            h.push("runtime_s".into());
        }
        h
    }
}

/// Monte Carlo estimate of a probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub std_err: f64,
    pub samples: u64,
}

impl Estimate {
    fn from_counts(k: u64, n: u64) -> Self {
        let value = if n == 0 { 0.0 } else { k as f64 / n as f64 };
        let (ci_low, ci_high) = wilson_interval(k, n);
        let std_err = if n == 0 { 0.0 } else { (value * (1.0 - value) / n as f64).sqrt() };
        Estimate { value, ci_low, ci_high, std_err, samples: n }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub series: Option<f64>,
    pub value: f64,
    /// Raw bound (may exceed 1 or be infinite) or analytic SDP.
    pub analytic: Option<f64>,
    pub theta_star: Option<f64>,
    pub stable: Option<bool>,
    pub empirical: Option<Estimate>,
    pub runtime: f64,
}

impl SweepRow {
    pub fn cells(&self, quantity: Quantity, timing: bool) -> Vec<String> {
        let opt = |x: Option<f64>| x.map(num).unwrap_or_default();
        let mut c = Vec::new();
        if let Some(s) = self.series {
            c.push(format!("{s}"));
        }
        c.push(format!("{}", self.value));
        c.push(opt(self.analytic));
        if quantity == Quantity::Pavp {
            c.push(opt(self.theta_star));
            c.push(self.stable.map(|b| b.to_string()).unwrap_or_default());
        }
        let e = self.empirical;
        c.push(opt(e.map(|e| e.value)));
        c.push(opt(e.map(|e| e.ci_low)));
        c.push(opt(e.map(|e| e.ci_high)));
        c.push(opt(e.map(|e| e.std_err)));
        c.push(e.map(|e| e.samples.to_string()).unwrap_or_default());
        if timing {
            c.push(format!("{:.3}", self.runtime));
        }
        c
    }
}

fn monte_carlo_sdp(p: &SystemParams, trials: usize, replications: usize, seed: u64) -> Result<Estimate, CliError> {
    let model = ArrivalModel::from_params(p)?;
    let hits: u64 = (0..replications as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(r));
            (0..trials).filter(|_| model.scan_detects(&mut rng)).count() as u64
        })
        .sum();
    Ok(Estimate::from_counts(hits, (trials * replications) as u64))
}

fn run_point(spec: &SweepSpec, loaded: &Loaded, index: usize, series: Option<f64>, x: f64) -> Result<SweepRow, CliError> {
    let start = Instant::now();
    let p = loaded.params_with(&spec.point_entries(series, x))?;
    let seed = spec.seed.wrapping_add(POINT_SEED_STRIDE.wrapping_mul(index as u64));
    let mut row = SweepRow { series, value: x, analytic: None, theta_star: None, stable: None, empirical: None, runtime: 0.0 };
    match spec.quantity {
        Quantity::Sdp => {
            if spec.outputs.analytic() {
                row.analytic = Some(sdp(&p)?);
            }
            if spec.outputs.sim() {
                row.empirical = Some(monte_carlo_sdp(&p, spec.packets, spec.replications, seed)?);
            }
        }
        Quantity::Pavp => {
            // Simulation is attempted only where the bound finds a stable θ;
            // an unstable queue never produces a stationary estimate.
            let bound = match p.theta {
                None => optimize_theta(&p, p.alpha),
                Some(_) => bound_or_sentinel(&p)?,
            };
            if spec.outputs.analytic() {
                row.analytic = Some(bound.pavp_bound);
                row.theta_star = Some(bound.theta_star);
            }
            row.stable = Some(bound.stable);
            if spec.outputs.sim() && bound.stable {
                let sim = Simulator::from_params(&p)?;
                let cfg = SimConfig { n_packets: spec.packets, seed, gain_mode: spec.gain_mode, keep_trace: false };
                let s = sim.run_replications(&cfg, spec.replications)?;
                row.empirical = Some(Estimate {
                    value: s.pavp_hat,
                    ci_low: s.ci_low,
                    ci_high: s.ci_high,
                    std_err: s.std_err,
                    samples: s.n_packets,
                });
            }
        }
    }
    row.runtime = start.elapsed().as_secs_f64();
    Ok(row)
}

/// Evaluate every grid point on the worker pool; rows come back in
/// series-major, grid order.
pub fn run_sweep(spec: &SweepSpec, loaded: &Loaded) -> Result<Vec<SweepRow>, CliError> {
    let points = spec.points();
    points
        .par_iter()
        .enumerate()
        .map(|(i, &(s, x))| run_point(spec, loaded, i, s, x))
        .collect()
}
