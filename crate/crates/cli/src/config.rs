//! Layered configuration: defaults, file, environment, `--set`.

use std::fs;

use isac_aoi::params::{env_entries, from_entries, parse_entries, parse_override, Entry};
use isac_aoi::SystemParams;

use crate::{io_err, Cli, CliError};

/// Prefix of experiment keys, kept apart from the system parameters.
pub const SWEEP_PREFIX: &str = "sweep.";

#[derive(Debug, Clone)]
pub struct Loaded {
    /// System entries in application order (file, env, overrides).
    pub entries: Vec<Entry>,
    /// `sweep.*` entries with the prefix stripped, same order.
    pub sweep: Vec<Entry>,
    pub params: SystemParams,
}

impl Loaded {
    /// Parameters with `extra` applied on top of the loaded layers.
    pub fn params_with(&self, extra: &[Entry]) -> isac_aoi::Result<SystemParams> {
        from_entries(self.entries.iter().chain(extra))
    }

    /// Last value given for a sweep key.
    pub fn sweep_value(&self, key: &str) -> Option<&Entry> {
        self.sweep.iter().rev().find(|e| e.key == key)
    }
}

pub fn load(cli: &Cli, env: Vec<(String, String)>) -> Result<Loaded, CliError> {
    let mut all = Vec::new();
    if let Some(path) = &cli.config {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        all.extend(parse_entries(&text)?);
    }
    all.extend(env_entries(env));
    for s in &cli.set {
        all.push(parse_override(s)?);
    }
    let (sweep, entries): (Vec<Entry>, Vec<Entry>) = all.into_iter().partition(|e| e.key.starts_with(SWEEP_PREFIX));
    let sweep = sweep
        .into_iter()
        .map(|mut e| {
            e.key = e.key[SWEEP_PREFIX.len()..].to_string();
            e
        })
        .collect();
    let params = from_entries(&entries)?;
    Ok(Loaded { entries, sweep, params })
}

/// An entry that does not come from any file.
pub fn synthetic(key: &str, value: f64) -> Entry {
    Entry { line: 0, key: key.to_string(), value: format!("{value}") }
}
