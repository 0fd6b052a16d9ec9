//! Model parameters: defaults, unit conversion, layered loading and validation.
//!
//! Configuration is flat `key = value` text. Keys are the model symbols
//! (`P_t`, `alpha`, `W`, `T`, `L`, `N`, `epsilon`, `N_c`, `D`, `kappa`,
//! `sigma_wl`, `G_t`, `G_r`, `rho_bar`, `varsigma`, `chi`, `varphi`, `tau`,
//! `d`, `varpi`, `zeta`, `theta`, `mgf_form`) in SI units. A key may carry a
//! unit suffix that is converted at load time: `_db`, `_dbm`, `_dbi`,
//! `_dbsm` (logarithmic), `_ms` (milliseconds), `_khz` (kilohertz) and `_mm`
//! (millimetres). Each key accepts only the suffixes that make sense for it.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::fbc;
use crate::service::MgfForm;

/// Prefix of environment variables that override configuration keys,
/// e.g. `ISAC_AOI_alpha=0.4` or `ISAC_AOI_N_c_dbm=-20`.
pub const ENV_PREFIX: &str = "ISAC_AOI_";

/// Safety factor applied to the smallest positive-rate SNR when `tau` is not
/// configured.
pub const TAU_SAFETY_FACTOR: f64 = 1.05;

pub const BOLTZMANN: f64 = 1.38e-23;
pub const STANDARD_TEMPERATURE: f64 = 290.0;

pub mod units {
    pub fn db_to_linear(db: f64) -> f64 {
        10f64.powf(db / 10.0)
    }

    pub fn linear_to_db(linear: f64) -> f64 {
        10.0 * linear.log10()
    }

    pub fn dbm_to_watts(dbm: f64) -> f64 {
        db_to_linear(dbm) * 1e-3
    }

    pub fn watts_to_dbm(watts: f64) -> f64 {
        linear_to_db(watts * 1e3)
    }
}

/// Every model symbol, unit-normalized (watts, hertz, seconds, metres,
/// linear gains).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams {
    /// `P_t`, total transmit power budget (W).
    pub total_power: f64,
    /// `α`, fraction of the budget given to communication.
    pub alpha: f64,
    /// `W`, bandwidth (Hz), shared by the rate formula and the radar noise.
    pub bandwidth: f64,
    /// `T`, radar scan period (s).
    pub scan_period: f64,
    /// `L`, packet length (bits).
    pub packet_bits: u32,
    /// `N`, blocklength (channel uses).
    pub blocklength: u32,
    /// `ε`, decoding error probability.
    pub decoding_error: f64,
    /// `N_c`, communication noise power (W).
    pub comm_noise: f64,
    /// `D`, maximum ranging distance (m).
    pub max_range: f64,
    /// `κ`, path-loss exponent.
    pub path_loss_exponent: f64,
    /// `σ`, radar wavelength (m).
    pub wavelength: f64,
    /// `Γ_t`, linear.
    pub tx_gain: f64,
    /// `Γ_r`, linear.
    pub rx_gain: f64,
    /// `ρ̄`, mean radar cross section (m²).
    pub mean_rcs: f64,
    /// `ς` (W·s/K).
    pub boltzmann: f64,
    /// `χ` (K).
    pub temperature: f64,
    /// `φ`, radar system loss factor, linear.
    pub loss_factor: f64,
    /// `τ`, SNR above which the channel is acceptable, linear.
    pub snr_threshold: f64,
    /// `d`, sensing SNR detection threshold, linear.
    pub detection_threshold: f64,
    /// `ϖ`, deferral interval (s).
    pub deferral_interval: f64,
    /// `ζ`, PAoI threshold (s).
    pub paoi_threshold: f64,
    /// `θ` (1/s). `None` means the bound optimizer chooses it.
    pub theta: Option<f64>,
    /// Integrand used for the service-time MGF.
    pub mgf_form: MgfForm,
}

impl Default for SystemParams {
    fn default() -> Self {
        let mut p = Self::defaults_without_tau();
        p.snr_threshold = default_tau(&p);
        p
    }
}

fn default_tau(p: &SystemParams) -> f64 {
    TAU_SAFETY_FACTOR * fbc::min_positive_snr(p)
}

impl SystemParams {
    fn defaults_without_tau() -> Self {
        SystemParams {
            total_power: 10.0,
            alpha: 0.5,
            bandwidth: 25e3,
            scan_period: 1e-3,
            packet_bits: 100,
            blocklength: 100,
            decoding_error: 1e-3,
            comm_noise: units::dbm_to_watts(-23.0),
            max_range: 100.0,
            path_loss_exponent: 2.0,
            wavelength: 4e-3,
            tx_gain: units::db_to_linear(10.0),
            rx_gain: units::db_to_linear(10.0),
            mean_rcs: units::db_to_linear(10.0),
            boltzmann: BOLTZMANN,
            temperature: STANDARD_TEMPERATURE,
            loss_factor: units::db_to_linear(10.0),
            snr_threshold: 0.0,
            detection_threshold: 10.0,
            deferral_interval: 0.5e-3,
            paoi_threshold: 6e-3,
            theta: None,
            mgf_form: MgfForm::default(),
        }
    }

    /// `P_c = α·P_t`.
    pub fn comm_power(&self) -> f64 {
        self.alpha * self.total_power
    }

    /// `P_s = (1 − α)·P_t`.
    pub fn sensing_power(&self) -> f64 {
        (1.0 - self.alpha) * self.total_power
    }

    /// Radar receiver noise `N_s = W·ς·χ·φ`, always derived from its factors.
    pub fn sensing_noise(&self) -> f64 {
        sensing_noise(self)
    }

    /// Copy with a different power split.
    pub fn with_alpha(&self, alpha: f64) -> Self {
        SystemParams { alpha, ..*self }
    }

    pub fn validate(&self) -> Result<()> {
        fn positive(field: &'static str, v: f64) -> Result<()> {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::OutOfRange { field, value: v, range: "(0, inf)" })
            }
        }
        fn non_negative(field: &'static str, v: f64) -> Result<()> {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(Error::OutOfRange { field, value: v, range: "[0, inf)" })
            }
        }
        positive("P_t", self.total_power)?;
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::OutOfRange { field: "alpha", value: self.alpha, range: "[0, 1]" });
        }
        positive("W", self.bandwidth)?;
        positive("T", self.scan_period)?;
        positive("L", self.packet_bits as f64)?;
        positive("N", self.blocklength as f64)?;
        if !(self.decoding_error > 0.0 && self.decoding_error < 1.0) {
            return Err(Error::OutOfRange {
                field: "epsilon",
                value: self.decoding_error,
                range: "(0, 1)",
            });
        }
        positive("N_c", self.comm_noise)?;
        positive("D", self.max_range)?;
        positive("kappa", self.path_loss_exponent)?;
        positive("sigma_wl", self.wavelength)?;
        positive("G_t", self.tx_gain)?;
        positive("G_r", self.rx_gain)?;
        positive("rho_bar", self.mean_rcs)?;
        positive("varsigma", self.boltzmann)?;
        positive("chi", self.temperature)?;
        positive("varphi", self.loss_factor)?;
        non_negative("tau", self.snr_threshold)?;
        non_negative("d", self.detection_threshold)?;
        positive("varpi", self.deferral_interval)?;
        positive("zeta", self.paoi_threshold)?;
        if let Some(theta) = self.theta {
            positive("theta", theta)?;
        }
        Ok(())
    }

    /// Canonical SI config text; `load_params(&p.to_config_string())` returns `p`.
    pub fn to_config_string(&self) -> String {
        let mut out = String::new();
        for key in KEYS {
            match key.field {
                Field::Theta => {
                    if let Some(theta) = self.theta {
                        let _ = writeln!(out, "theta = {theta:?}");
                    }
                }
                Field::MgfForm => {
                    let _ = writeln!(out, "mgf_form = {}", self.mgf_form.as_str());
                }
                field => {
                    let _ = writeln!(out, "{} = {:?}", key.name, self.get(field));
                }
            }
        }
        out
    }

    fn get(&self, field: Field) -> f64 {
        match field {
            Field::TotalPower => self.total_power,
            Field::Alpha => self.alpha,
            Field::Bandwidth => self.bandwidth,
            Field::ScanPeriod => self.scan_period,
            Field::PacketBits => self.packet_bits as f64,
            Field::Blocklength => self.blocklength as f64,
            Field::DecodingError => self.decoding_error,
            Field::CommNoise => self.comm_noise,
            Field::MaxRange => self.max_range,
            Field::PathLoss => self.path_loss_exponent,
            Field::Wavelength => self.wavelength,
            Field::TxGain => self.tx_gain,
            Field::RxGain => self.rx_gain,
            Field::MeanRcs => self.mean_rcs,
            Field::Boltzmann => self.boltzmann,
            Field::Temperature => self.temperature,
            Field::LossFactor => self.loss_factor,
            Field::SnrThreshold => self.snr_threshold,
            Field::DetectionThreshold => self.detection_threshold,
            Field::DeferralInterval => self.deferral_interval,
            Field::PaoiThreshold => self.paoi_threshold,
            Field::Theta => self.theta.unwrap_or(f64::NAN),
            Field::MgfForm => f64::NAN,
        }
    }

    fn set(&mut self, key: &'static str, field: Field, v: f64) -> Result<()> {
        let integer = |v: f64| -> Result<u32> {
            if v.fract() == 0.0 && v >= 1.0 && v <= u32::MAX as f64 {
                Ok(v as u32)
            } else {
                Err(Error::OutOfRange { field: key, value: v, range: "integer >= 1" })
            }
        };
        match field {
            Field::TotalPower => self.total_power = v,
            Field::Alpha => self.alpha = v,
            Field::Bandwidth => self.bandwidth = v,
            Field::ScanPeriod => self.scan_period = v,
            Field::PacketBits => self.packet_bits = integer(v)?,
            Field::Blocklength => self.blocklength = integer(v)?,
            Field::DecodingError => self.decoding_error = v,
            Field::CommNoise => self.comm_noise = v,
            Field::MaxRange => self.max_range = v,
            Field::PathLoss => self.path_loss_exponent = v,
            Field::Wavelength => self.wavelength = v,
            Field::TxGain => self.tx_gain = v,
            Field::RxGain => self.rx_gain = v,
            Field::MeanRcs => self.mean_rcs = v,
            Field::Boltzmann => self.boltzmann = v,
            Field::Temperature => self.temperature = v,
            Field::LossFactor => self.loss_factor = v,
            Field::SnrThreshold => self.snr_threshold = v,
            Field::DetectionThreshold => self.detection_threshold = v,
            Field::DeferralInterval => self.deferral_interval = v,
            Field::PaoiThreshold => self.paoi_threshold = v,
            Field::Theta => self.theta = Some(v),
            Field::MgfForm => unreachable!("mgf_form is not numeric"),
        }
        Ok(())
    }
}

/// `N_s = W·ς·χ·φ`.
pub fn sensing_noise(p: &SystemParams) -> f64 {
    p.bandwidth * p.boltzmann * p.temperature * p.loss_factor
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Field {
    TotalPower,
    Alpha,
    Bandwidth,
    ScanPeriod,
    PacketBits,
    Blocklength,
    DecodingError,
    CommNoise,
    MaxRange,
    PathLoss,
    Wavelength,
    TxGain,
    RxGain,
    MeanRcs,
    Boltzmann,
    Temperature,
    LossFactor,
    SnrThreshold,
    DetectionThreshold,
    DeferralInterval,
    PaoiThreshold,
    Theta,
    MgfForm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Suffix {
    Db,
    Dbm,
    Dbi,
    Dbsm,
    Ms,
    Khz,
    Mm,
}

impl Suffix {
    const ALL: [(&'static str, Suffix); 7] = [
        ("_dbsm", Suffix::Dbsm),
        ("_dbm", Suffix::Dbm),
        ("_dbi", Suffix::Dbi),
        ("_db", Suffix::Db),
        ("_ms", Suffix::Ms),
        ("_khz", Suffix::Khz),
        ("_mm", Suffix::Mm),
    ];

    fn convert(self, v: f64) -> f64 {
        match self {
            Suffix::Db | Suffix::Dbi | Suffix::Dbsm => units::db_to_linear(v),
            Suffix::Dbm => units::dbm_to_watts(v),
            Suffix::Ms | Suffix::Mm => v * 1e-3,
            Suffix::Khz => v * 1e3,
        }
    }
}

struct KeySpec {
    name: &'static str,
    field: Field,
    suffixes: &'static [Suffix],
}

const KEYS: &[KeySpec] = &[
    KeySpec { name: "P_t", field: Field::TotalPower, suffixes: &[Suffix::Dbm] },
    KeySpec { name: "alpha", field: Field::Alpha, suffixes: &[] },
    KeySpec { name: "W", field: Field::Bandwidth, suffixes: &[Suffix::Khz] },
    KeySpec { name: "T", field: Field::ScanPeriod, suffixes: &[Suffix::Ms] },
    KeySpec { name: "L", field: Field::PacketBits, suffixes: &[] },
    KeySpec { name: "N", field: Field::Blocklength, suffixes: &[] },
    KeySpec { name: "epsilon", field: Field::DecodingError, suffixes: &[] },
    KeySpec { name: "N_c", field: Field::CommNoise, suffixes: &[Suffix::Dbm] },
    KeySpec { name: "D", field: Field::MaxRange, suffixes: &[] },
    KeySpec { name: "kappa", field: Field::PathLoss, suffixes: &[] },
    KeySpec { name: "sigma_wl", field: Field::Wavelength, suffixes: &[Suffix::Mm] },
    KeySpec { name: "G_t", field: Field::TxGain, suffixes: &[Suffix::Dbi, Suffix::Db] },
    KeySpec { name: "G_r", field: Field::RxGain, suffixes: &[Suffix::Dbi, Suffix::Db] },
    KeySpec { name: "rho_bar", field: Field::MeanRcs, suffixes: &[Suffix::Dbsm] },
    KeySpec { name: "varsigma", field: Field::Boltzmann, suffixes: &[] },
    KeySpec { name: "chi", field: Field::Temperature, suffixes: &[] },
    KeySpec { name: "varphi", field: Field::LossFactor, suffixes: &[Suffix::Db] },
    KeySpec { name: "tau", field: Field::SnrThreshold, suffixes: &[Suffix::Db] },
    KeySpec { name: "d", field: Field::DetectionThreshold, suffixes: &[Suffix::Db] },
    KeySpec { name: "varpi", field: Field::DeferralInterval, suffixes: &[Suffix::Ms] },
    KeySpec { name: "zeta", field: Field::PaoiThreshold, suffixes: &[Suffix::Ms] },
    KeySpec { name: "theta", field: Field::Theta, suffixes: &[] },
    KeySpec { name: "mgf_form", field: Field::MgfForm, suffixes: &[] },
];

/// Canonical key names, in serialization order.
pub fn known_keys() -> impl Iterator<Item = &'static str> {
    KEYS.iter().map(|k| k.name)
}

fn resolve_key(key: &str) -> Result<(&'static KeySpec, Option<Suffix>)> {
    if let Some(spec) = KEYS.iter().find(|k| k.name == key) {
        return Ok((spec, None));
    }
    for (text, suffix) in Suffix::ALL {
        if let Some(base) = key.strip_suffix(text) {
            if let Some(spec) = KEYS.iter().find(|k| k.name == base) {
                if spec.suffixes.contains(&suffix) {
                    return Ok((spec, Some(suffix)));
                }
            }
        }
    }
    Err(Error::UnknownKey(key.to_string()))
}

/// One `key = value` assignment with its source line (0 for non-file sources).
#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub line: usize,
    pub key: String,
    pub value: String,
}

/// Split config text into entries. `#` starts a comment; blank lines are ignored.
pub fn parse_entries(source: &str) -> Result<Vec<Entry>> {
    let mut entries = Vec::new();
    for (i, raw) in source.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
            line: i + 1,
            msg: format!("expected `key = value`, got `{line}`"),
        })?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() || value.is_empty() {
            return Err(Error::Parse { line: i + 1, msg: format!("empty key or value in `{line}`") });
        }
        entries.push(Entry { line: i + 1, key: key.to_string(), value: value.to_string() });
    }
    Ok(entries)
}

/// Parse a `key=value` override as given to `--set`.
pub fn parse_override(text: &str) -> Result<Entry> {
    let (key, value) = text
        .split_once('=')
        .ok_or_else(|| Error::InvalidArgument(format!("override `{text}` is not key=value")))?;
    Ok(Entry { line: 0, key: key.trim().to_string(), value: value.trim().to_string() })
}

/// Collect `ISAC_AOI_<key>` variables as entries.
pub fn env_entries<I>(vars: I) -> Vec<Entry>
where
    I: IntoIterator<Item = (String, String)>,
{
    let mut out: Vec<Entry> = vars
        .into_iter()
        .filter_map(|(k, v)| {
            k.strip_prefix(ENV_PREFIX)
                .map(|key| Entry { line: 0, key: key.to_string(), value: v })
        })
        .collect();
    out.sort_by(|a, b| a.key.cmp(&b.key));
    out
}

fn parse_number(entry: &Entry) -> Result<f64> {
    entry.value.parse::<f64>().map_err(|_| Error::Parse {
        line: entry.line,
        msg: format!("`{}`: `{}` is not a number", entry.key, entry.value),
    })
}

/// Apply entries in order over the defaults. Later entries win. `tau` falls
/// back to `TAU_SAFETY_FACTOR × min_positive_snr` of the final parameters.
pub fn from_entries<'a, I>(entries: I) -> Result<SystemParams>
where
    I: IntoIterator<Item = &'a Entry>,
{
    let mut p = SystemParams::defaults_without_tau();
    let mut tau_set = false;
    for entry in entries {
        let (spec, suffix) = resolve_key(&entry.key)?;
        match spec.field {
            Field::MgfForm => {
                p.mgf_form = entry.value.parse().map_err(|msg| Error::Parse { line: entry.line, msg })?;
            }
            Field::Theta if entry.value.eq_ignore_ascii_case("auto") => p.theta = None,
            Field::SnrThreshold if entry.value.eq_ignore_ascii_case("auto") => tau_set = false,
            field => {
                let raw = parse_number(entry)?;
                if !raw.is_finite() {
                    return Err(Error::OutOfRange { field: spec.name, value: raw, range: "finite" });
                }
                let value = suffix.map_or(raw, |s| s.convert(raw));
                p.set(spec.name, field, value)?;
                if field == Field::SnrThreshold {
                    tau_set = true;
                }
            }
        }
    }
    // tau's default depends on N and epsilon, so those are checked first.
    p.validate_for_tau()?;
    if !tau_set {
        p.snr_threshold = default_tau(&p);
    }
    p.validate()?;
    Ok(p)
}

impl SystemParams {
    fn validate_for_tau(&self) -> Result<()> {
        let mut probe = *self;
        probe.snr_threshold = 0.0;
        probe.validate()
    }
}

/// Parse config text and apply it over the defaults.
pub fn load_params(source: &str) -> Result<SystemParams> {
    let entries = parse_entries(source)?;
    from_entries(&entries)
}

/// Defaults, then config file, then environment, then `--set` overrides.
pub fn load_layered(
    source: Option<&str>,
    env: &[Entry],
    overrides: &[Entry],
) -> Result<SystemParams> {
    let file = match source {
        Some(text) => parse_entries(text)?,
        None => Vec::new(),
    };
    from_entries(file.iter().chain(env).chain(overrides))
}
