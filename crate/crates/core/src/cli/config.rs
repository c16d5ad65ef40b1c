//! Flat `key = value` run configuration files.
//!
//! Lines are `key = value` with `#` comments; unknown keys are rejected so a
//! typo cannot silently fall back to a default. Rates are 1/ns, times carry
//! their unit in the key name.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};

const KNOWN_KEYS: &[&str] = &[
    // model rates (1/ns)
    "gamma_b",
    "gamma_x",
    "pump",
    "pump_b",
    "pump_x",
    // run control
    "duration_ns",
    "shards",
    "seed",
    "threads",
    // detection chain
    "efficiency",
    "jitter_fwhm_ps",
    "dark_rate_hz",
    "dead_time_ps",
    // correlation / fitting
    "bin_ps",
    "window_ps",
    "irf_fwhm_ps",
    "k_range",
    // pulsed excitation
    "rep_rate_hz",
    "n_pulses",
    "prob_b",
    "prob_h",
    "prob_v",
    // interference
    "mode_overlap",
    // photon-number detection
    "s_success",
    "n_triggers",
    "unit_area",
    "tes_sigma",
    "bootstrap",
    // spectra
    "center_uev",
    "delta_fss_uev",
    "binding",
    "linewidth_x_uev",
    "linewidth_xx_uev",
    "intensity_ratio",
    "principal_axis_deg",
    "noise_level",
    "n_angles",
    "energy_min_uev",
    "energy_max_uev",
    "energy_step_uev",
    // rate arithmetic
    "n_spcm_hz",
    "eps_setup",
    "eta_lens",
    "alpha",
    "p_twin",
    // file paths
    "events",
    "out",
    "out_d0",
    "out_d1",
];

/// Parsed configuration plus the raw bytes (hashed into provenance records).
#[derive(Debug, Clone, Default)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
    pub raw: Vec<u8>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let raw = std::fs::read(path)?;
        let text = std::str::from_utf8(&raw)
            .map_err(|_| Error::Format(format!("{}: not valid UTF-8", path.display())))?;
        let mut values = BTreeMap::new();
        for (no, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Format(format!(
                    "{}:{}: expected 'key = value'",
                    path.display(),
                    no + 1
                ))
            })?;
            let key = key.trim().to_string();
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(Error::Format(format!(
                    "{}:{}: unknown key '{key}'",
                    path.display(),
                    no + 1
                )));
            }
            values.insert(key, value.trim().to_string());
        }
        Ok(Self { values, raw })
    }

    pub fn get_f64(&self, key: &str) -> Result<Option<f64>> {
        self.parse(key, str::parse::<f64>)
    }

    pub fn get_u64(&self, key: &str) -> Result<Option<u64>> {
        self.parse(key, str::parse::<u64>)
    }

    pub fn get_i64(&self, key: &str) -> Result<Option<i64>> {
        self.parse(key, str::parse::<i64>)
    }

    pub fn get_str(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    fn parse<T, E>(
        &self,
        key: &str,
        parser: impl Fn(&str) -> std::result::Result<T, E>,
    ) -> Result<Option<T>> {
        match self.values.get(key) {
            None => Ok(None),
            Some(v) => parser(v).map(Some).map_err(|_| {
                Error::Format(format!("config key '{key}': cannot parse value '{v}'"))
            }),
        }
    }
}
