//! Flat `key = value` run configuration.
//!
//! Values come from the file, then `PHOTOSTAT_<KEY>` environment variables,
//! then explicit overrides (command-line flags). Times are in seconds,
//! energies in pJ, rates in counts/s.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::model::{excited_state_population, EmitterModel, ExcitationConfig};
use crate::simulator::{DetectionConfig, RunConfig};

pub const ENV_PREFIX: &str = "PHOTOSTAT_";

/// Every key the configuration understands, in manifest order.
pub const KEYS: &[&str] = &[
    "source",
    "n_pulses",
    "seed",
    "pulse_energy",
    "sat_energy",
    "pulse_duration",
    "rad_lifetime",
    "rep_period",
    "max_rate",
    "isc_prob",
    "triplet_lifetime",
    "bleach_prob",
    "emission_prob",
    "alpha",
    "dead_time",
    "dark_rate",
    "split_ratio",
    "reject_window_mult",
    "efficiency",
    "background_mean",
];

/// Raw configuration values, already merged from all sources.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConfigMap {
    values: BTreeMap<String, String>,
}

impl ConfigMap {
    /// Parses `key = value` lines. `#` starts a comment. Manifest keys
    /// (`toolkit_version`, `output.*`) are accepted and ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::config(format!("line {}", lineno + 1), "expected `key = value`"))?;
            let key = k.trim().to_ascii_lowercase();
            if key == "toolkit_version" || key.starts_with("output.") {
                continue;
            }
            if !KEYS.contains(&key.as_str()) {
                return Err(Error::config(key, "unknown key"));
            }
            values.insert(key, v.trim().to_string());
        }
        Ok(ConfigMap { values })
    }

    pub fn apply_env(&mut self) {
        self.apply_env_from(|name| std::env::var(name).ok());
    }

    pub fn apply_env_from(&mut self, lookup: impl Fn(&str) -> Option<String>) {
        for key in KEYS {
            if let Some(v) = lookup(&format!("{ENV_PREFIX}{}", key.to_ascii_uppercase())) {
                self.values.insert(key.to_string(), v.trim().to_string());
            }
        }
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.values.insert(key.to_string(), value.to_string());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    /// Canonical text, in [`KEYS`] order.
    pub fn render(&self) -> String {
        KEYS.iter()
            .filter_map(|k| self.values.get(*k).map(|v| format!("{k} = {v}\n")))
            .collect()
    }

    fn number(&self, key: &str) -> Result<Option<f64>> {
        self.get(key)
            .map(|v| {
                v.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| Error::config(key, format!("`{v}` is not a finite number")))
            })
            .transpose()
    }

    fn required(&self, key: &str) -> Result<f64> {
        self.number(key)?
            .ok_or_else(|| Error::config(key, "missing required field"))
    }

    fn or(&self, key: &str, default: f64) -> Result<f64> {
        Ok(self.number(key)?.unwrap_or(default))
    }

    fn integer(&self, key: &str, default: u64) -> Result<u64> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse::<u64>()
                .map_err(|_| Error::config(key, format!("`{v}` is not a non-negative integer"))),
        }
    }

    /// Builds and validates the run described by this configuration.
    pub fn to_run_spec(&self) -> Result<RunSpec> {
        let n_pulses = self.integer("n_pulses", crate::simulator::REFERENCE_PULSES)?;
        let seed = self.integer("seed", 1)?;
        let d = DetectionConfig::default();
        let detection = DetectionConfig {
            dead_time: self.or("dead_time", d.dead_time)?,
            dark_rate: self.or("dark_rate", d.dark_rate)?,
            split_ratio: self.or("split_ratio", d.split_ratio)?,
            reject_window_mult: self.or("reject_window_mult", d.reject_window_mult)?,
            efficiency: self.or("efficiency", d.efficiency)?,
            background_mean: self.or("background_mean", d.background_mean)?,
        };
        let spec = match self.get("source").unwrap_or("sps") {
            "sps" => {
                let excitation = ExcitationConfig {
                    pulse_energy: self.required("pulse_energy")?,
                    sat_energy: self.required("sat_energy")?,
                    pulse_duration: self.required("pulse_duration")?,
                    rad_lifetime: self.required("rad_lifetime")?,
                    rep_period: self.required("rep_period")?,
                    max_rate: self.or("max_rate", 160e3)?,
                };
                excitation.validate().map_err(field_error)?;
                let emission_prob = match self.number("emission_prob")? {
                    Some(p) => p,
                    None => excited_state_population(&excitation).map_err(field_error)?,
                };
                let emitter = EmitterModel {
                    isc_prob: self.required("isc_prob")?,
                    triplet_lifetime: self.required("triplet_lifetime")?,
                    bleach_prob: self.or("bleach_prob", 0.0)?,
                    emission_prob,
                };
                let run = RunConfig {
                    excitation,
                    emitter,
                    detection,
                    n_pulses,
                    seed,
                };
                run.validate().map_err(field_error)?;
                RunSpec::Sps(run)
            }
            "coherent" => {
                let run = CoherentRun {
                    alpha: self.required("alpha")?,
                    rep_period: self.required("rep_period")?,
                    rad_lifetime: self.required("rad_lifetime")?,
                    detection,
                    n_pulses,
                    seed,
                };
                run.validate().map_err(field_error)?;
                RunSpec::Coherent(run)
            }
            other => return Err(Error::config("source", format!("`{other}` is not `sps` or `coherent`"))),
        };
        Ok(spec)
    }
}

fn field_error(e: Error) -> Error {
    match e {
        Error::InvalidParameter { name, reason } => Error::config(name, reason),
        other => other,
    }
}

/// Attenuated-laser reference acquisition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoherentRun {
    pub alpha: f64,
    pub rep_period: f64,
    pub rad_lifetime: f64,
    pub detection: DetectionConfig,
    pub n_pulses: u64,
    pub seed: u64,
}

impl CoherentRun {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0) {
            return Err(Error::param("alpha", "must be >= 0"));
        }
        if !(self.rep_period > 0.0) {
            return Err(Error::param("rep_period", "must be > 0"));
        }
        if !(self.rad_lifetime > 0.0 && self.rad_lifetime < self.rep_period) {
            return Err(Error::param("rad_lifetime", "must lie in (0, rep_period)"));
        }
        if self.n_pulses == 0 {
            return Err(Error::param("n_pulses", "must be >= 1"));
        }
        self.detection.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RunSpec {
    Sps(RunConfig),
    Coherent(CoherentRun),
}

impl RunSpec {
    pub fn seed(&self) -> u64 {
        match self {
            RunSpec::Sps(r) => r.seed,
            RunSpec::Coherent(c) => c.seed,
        }
    }
}

/// Configuration text reproducing [`RunConfig::reference`].
pub fn reference_config_text() -> String {
    let run = RunConfig::reference(1);
    let e = run.excitation;
    format!(
        "# single molecule at 2 MHz, 250 ns dead time\n\
         source = sps\n\
         n_pulses = {}\nseed = 1\n\
         pulse_energy = {}\nsat_energy = {}\npulse_duration = {}\nrad_lifetime = {}\nrep_period = {}\nmax_rate = {}\n\
         isc_prob = {}\ntriplet_lifetime = {}\nbleach_prob = 0\n\
         dead_time = {}\ndark_rate = {}\nsplit_ratio = {}\nreject_window_mult = {}\n\
         efficiency = {}\nbackground_mean = {}\n",
        run.n_pulses,
        e.pulse_energy,
        e.sat_energy,
        e.pulse_duration,
        e.rad_lifetime,
        e.rep_period,
        e.max_rate,
        run.emitter.isc_prob,
        run.emitter.triplet_lifetime,
        run.detection.dead_time,
        run.detection.dark_rate,
        run.detection.split_ratio,
        run.detection.reject_window_mult,
        run.detection.efficiency,
        run.detection.background_mean,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_text_round_trips_to_preset() {
        let map = ConfigMap::parse(&reference_config_text()).unwrap();
        match map.to_run_spec().unwrap() {
            RunSpec::Sps(run) => assert_eq!(run, RunConfig::reference(1)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn missing_field_named() {
        let text = reference_config_text().replace("sat_energy", "# sat_energy");
        let err = ConfigMap::parse(&text).unwrap().to_run_spec().unwrap_err();
        assert!(
            matches!(&err, Error::Config { field, .. } if field == "sat_energy"),
            "{err}"
        );
    }

    #[test]
    fn unknown_and_bad_values() {
        assert!(matches!(ConfigMap::parse("colour = red"), Err(Error::Config { .. })));
        let text = reference_config_text().replace("split_ratio = 0.5", "split_ratio = 1.5");
        let err = ConfigMap::parse(&text).unwrap().to_run_spec().unwrap_err();
        assert!(matches!(&err, Error::Config { field, .. } if field == "split_ratio"));
        let err = ConfigMap::parse("source = sps\npulse_energy = abc")
            .unwrap()
            .to_run_spec()
            .unwrap_err();
        assert!(matches!(&err, Error::Config { field, .. } if field == "pulse_energy"));
    }

    #[test]
    fn env_overrides_file() {
        let mut map = ConfigMap::parse(&reference_config_text()).unwrap();
        map.apply_env_from(|k| (k == "PHOTOSTAT_SEED").then(|| "77".to_string()));
        assert_eq!(map.to_run_spec().unwrap().seed(), 77);
    }

    #[test]
    fn manifest_keys_ignored() {
        let text = format!(
            "{}toolkit_version = 0.1.0\noutput.timetags.sha256 = ab\n",
            reference_config_text()
        );
        assert!(ConfigMap::parse(&text).is_ok());
    }

    #[test]
    fn coherent_source() {
        let map =
            ConfigMap::parse("source = coherent\nalpha = 0.05\nrep_period = 5e-7\nrad_lifetime = 2.8e-9").unwrap();
        assert!(matches!(map.to_run_spec().unwrap(), RunSpec::Coherent(c) if c.alpha == 0.05));
    }
}
