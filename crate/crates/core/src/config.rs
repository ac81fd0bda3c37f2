//! Run configuration: a TOML file and/or command-line overrides, validated
//! into a [`RunConfig`] that fully determines a batch of trials.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{ClockMode, DecoderSettings, Mode, RateSet};
use crate::field::{default_height, FieldSchedule};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("malformed config: {0}")]
    Parse(String),
    #[error("missing required key `{0}`")]
    Missing(&'static str),
    #[error("invalid value for `{key}`: {reason}")]
    Invalid { key: &'static str, reason: String },
}

fn invalid(key: &'static str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key,
        reason: reason.into(),
    }
}

/// Measurement error probability: a fixed value or tied to `p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum QRule {
    Fixed(f64),
    SameAsP,
}

impl QRule {
    pub fn resolve(&self, p: f64) -> f64 {
        match *self {
            QRule::Fixed(q) => q,
            QRule::SameAsP => p,
        }
    }
}

impl fmt::Display for QRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QRule::Fixed(q) => write!(f, "{q}"),
            QRule::SameAsP => f.write_str("p"),
        }
    }
}

impl std::str::FromStr for QRule {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s == "p" || s == "q=p" {
            return Ok(QRule::SameAsP);
        }
        s.parse::<f64>()
            .map(QRule::Fixed)
            .map_err(|_| invalid("q", format!("expected a probability or \"p\", got {s:?}")))
    }
}

impl Serialize for QRule {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match *self {
            QRule::Fixed(q) => s.serialize_f64(q),
            QRule::SameAsP => s.serialize_str("p"),
        }
    }
}

impl<'de> Deserialize<'de> for QRule {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(q) => Ok(QRule::Fixed(q)),
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Config file layout. Everything optional so that flags can fill gaps;
/// [`RunConfig::from_file_config`] enforces what is required.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub mode: Option<Mode>,
    #[serde(rename = "L")]
    pub sizes: Option<Vec<usize>>,
    pub p: Option<Vec<f64>>,
    pub q: Option<QRule>,
    pub kappa: Option<f64>,
    #[serde(rename = "H")]
    pub height: Option<usize>,
    pub alpha: Option<f64>,
    pub rates: Option<RateSet>,
    pub clock: Option<ClockMode>,
    pub samples: Option<u64>,
    pub seed: Option<u64>,
    pub cap: Option<u64>,
    pub verify_stride: Option<u64>,
    pub k_ver: Option<usize>,
    pub tau_max: Option<usize>,
    pub output: Option<PathBuf>,
}

impl FileConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_owned(),
            source,
        })?;
        Self::from_toml(&text)
    }

    /// Fields set in `other` replace those in `self`.
    pub fn merge(mut self, other: FileConfig) -> Self {
        macro_rules! take {
            ($($f:ident),*) => { $( if other.$f.is_some() { self.$f = other.$f; } )* };
        }
        take!(
            mode, sizes, p, q, kappa, height, alpha, rates, clock, samples, seed, cap,
            verify_stride, k_ver, tau_max, output
        );
        self
    }
}

pub const DEFAULT_CAP: u64 = 10_000_000;

/// A validated batch description. Every field is resolved; nothing is left
/// to defaults at run time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub mode: Mode,
    #[serde(rename = "L")]
    pub sizes: Vec<usize>,
    pub p: Vec<f64>,
    pub q: QRule,
    pub kappa: f64,
    /// `None` means `max(4, L / 2)` per size.
    #[serde(rename = "H", default, skip_serializing_if = "Option::is_none")]
    pub height: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    pub rates: RateSet,
    pub clock: ClockMode,
    pub samples: u64,
    pub seed: u64,
    pub cap: u64,
    pub verify_stride: u64,
    pub k_ver: usize,
    /// Static decoding round limit; `None` means `k_ver * L`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_max: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        Self::from_file_config(FileConfig::from_toml(text)?)
    }

    pub fn from_file_config(f: FileConfig) -> Result<Self, ConfigError> {
        let cfg = RunConfig {
            mode: f.mode.ok_or(ConfigError::Missing("mode"))?,
            sizes: f.sizes.ok_or(ConfigError::Missing("L"))?,
            p: f.p.ok_or(ConfigError::Missing("p"))?,
            q: f.q.unwrap_or(QRule::Fixed(0.0)),
            kappa: f.kappa.unwrap_or(FieldSchedule::default().kappa),
            height: f.height,
            alpha: f.alpha,
            rates: f.rates.unwrap_or_default(),
            clock: f.clock.unwrap_or_default(),
            samples: f.samples.ok_or(ConfigError::Missing("samples"))?,
            seed: f.seed.ok_or(ConfigError::Missing("seed"))?,
            cap: f.cap.unwrap_or(DEFAULT_CAP),
            verify_stride: f.verify_stride.unwrap_or(1),
            k_ver: f.k_ver.unwrap_or(16),
            tau_max: f.tau_max,
            output: f.output,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.sizes.is_empty() {
            return Err(invalid("L", "list is empty"));
        }
        let min_size = if self.mode == Mode::Toom { 1 } else { 2 };
        if let Some(&l) = self.sizes.iter().find(|&&l| l < min_size) {
            return Err(invalid("L", format!("lattice size {l} is too small")));
        }
        if self.p.is_empty() {
            return Err(invalid("p", "list is empty"));
        }
        let p_max = if self.mode == Mode::Toom { 0.5 } else { 1.0 };
        for &p in &self.p {
            if !(0.0..p_max).contains(&p) {
                return Err(invalid("p", format!("{p} is outside [0, {p_max})")));
            }
        }
        if let QRule::Fixed(q) = self.q {
            if !(0.0..1.0).contains(&q) {
                return Err(invalid("q", format!("{q} is outside [0, 1)")));
            }
        }
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            return Err(invalid("kappa", "must be positive"));
        }
        if self.height == Some(0) {
            return Err(invalid("H", "must be at least 1"));
        }
        match (self.mode, self.alpha) {
            (Mode::Explicit, None) => return Err(ConfigError::Missing("alpha")),
            (_, Some(a)) if !(a > 0.0 && a.is_finite()) => {
                return Err(invalid("alpha", format!("{a} must be positive")))
            }
            _ => {}
        }
        if !self.rates.is_valid() {
            return Err(invalid("rates", "all rates must be positive and finite"));
        }
        if self.samples == 0 {
            return Err(invalid("samples", "must be at least 1"));
        }
        if self.cap == 0 {
            return Err(invalid("cap", "must be at least 1"));
        }
        if self.verify_stride == 0 {
            return Err(invalid("verify_stride", "must be at least 1"));
        }
        if self.k_ver == 0 {
            return Err(invalid("k_ver", "must be at least 1"));
        }
        if self.tau_max == Some(0) {
            return Err(invalid("tau_max", "must be at least 1"));
        }
        Ok(())
    }

    pub fn schedule(&self) -> FieldSchedule {
        FieldSchedule::new(self.kappa)
    }

    pub fn settings(&self) -> DecoderSettings {
        DecoderSettings {
            schedule: self.schedule(),
            height: self.height,
            k_ver: self.k_ver,
            verify_stride: self.verify_stride,
        }
    }

    pub fn height_for(&self, size: usize) -> usize {
        self.height.unwrap_or_else(|| default_height(size))
    }

    pub fn tau_max_for(&self, size: usize) -> usize {
        self.tau_max.unwrap_or(self.k_ver * size)
    }

    /// Field sweeps per anyon update for every configured size.
    pub fn sweeps_by_size(&self) -> BTreeMap<usize, usize> {
        let schedule = self.schedule();
        self.sizes.iter().map(|&l| (l, schedule.sweeps(l))).collect()
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }

    /// Human-readable echo of the resolved configuration, one key per line.
    pub fn describe(&self) -> String {
        let mut out = self.to_toml();
        if matches!(self.mode, Mode::Synchronous | Mode::Asynchronous | Mode::Static) {
            for (l, c) in self.sweeps_by_size() {
                out.push_str(&format!(
                    "# L = {l}: c(L) = {c} sweeps, H = {}\n",
                    self.height_for(l)
                ));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
mode = "sync"
L = [12]
p = [0.002]
q = "p"
samples = 10
seed = 1
"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = RunConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(cfg.mode, Mode::Synchronous);
        assert_eq!(cfg.sizes, vec![12]);
        assert_eq!(cfg.q, QRule::SameAsP);
        assert_eq!(cfg.q.resolve(0.002), 0.002);
        assert_eq!(cfg.kappa, 1.0);
        assert_eq!(cfg.cap, DEFAULT_CAP);
        assert_eq!(cfg.verify_stride, 1);
        assert_eq!(cfg.k_ver, 16);
        assert_eq!(cfg.rates, RateSet::default());
        assert_eq!(cfg.clock, ClockMode::Deterministic);
        assert_eq!(cfg.height_for(12), 6);
        assert_eq!(cfg.tau_max_for(12), 192);
    }

    #[test]
    fn out_of_range_p_names_the_key() {
        let text = MINIMAL.replace("p = [0.002]", "p = [1.5]");
        let err = RunConfig::from_toml(&text).unwrap_err();
        assert!(matches!(err, ConfigError::Invalid { key: "p", .. }), "{err}");
        assert!(err.to_string().contains("`p`"));
    }

    #[test]
    fn missing_and_bad_keys() {
        let err = RunConfig::from_toml("mode = \"sync\"\nL=[12]\np=[0.1]\nsamples=1").unwrap_err();
        assert!(matches!(err, ConfigError::Missing("seed")));
        let err = RunConfig::from_toml(&MINIMAL.replace("q = \"p\"", "q = \"often\"")).unwrap_err();
        assert!(err.to_string().contains("q"), "{err}");
        let err = RunConfig::from_toml(&format!("{MINIMAL}\nbogus = 3")).unwrap_err();
        assert!(err.to_string().contains("bogus"), "{err}");
        let err = RunConfig::from_toml(&MINIMAL.replace("sync", "explicit")).unwrap_err();
        assert!(matches!(err, ConfigError::Missing("alpha")));
        let err = RunConfig::from_toml(&format!("{MINIMAL}\nverify_stride = 0")).unwrap_err();
        assert!(matches!(err, ConfigError::Invalid { key: "verify_stride", .. }));
    }

    #[test]
    fn full_size_experiment_echoes_sweeps() {
        let text = r#"
mode = "sync"
L = [12, 14, 16, 18, 20, 22, 24]
p = [0.0018, 0.00223, 0.002763]
q = "p"
samples = 5000
seed = 7
"#;
        let cfg = RunConfig::from_toml(text).unwrap();
        let sweeps = cfg.sweeps_by_size();
        assert_eq!(sweeps[&12], 13);
        assert_eq!(sweeps[&14], 15);
        assert_eq!(sweeps[&16], 16);
        assert_eq!(sweeps[&24], 22);
        let echo = cfg.describe();
        assert!(echo.contains("L = 24: c(L) = 22 sweeps"), "{echo}");
        assert!(echo.contains("samples = 5000"));
    }

    #[test]
    fn serialization_round_trip() {
        let mut cfg = RunConfig::from_toml(MINIMAL).unwrap();
        cfg.alpha = Some(1.05);
        cfg.height = Some(5);
        cfg.rates.gamma_m = 3.0;
        cfg.q = QRule::Fixed(0.001);
        let back = RunConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
        let json = serde_json::to_string(&cfg).unwrap();
        let back: RunConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn merge_prefers_overrides() {
        let base = FileConfig::from_toml(MINIMAL).unwrap();
        let over = FileConfig {
            seed: Some(99),
            sizes: Some(vec![14, 16]),
            ..Default::default()
        };
        let cfg = RunConfig::from_file_config(base.merge(over)).unwrap();
        assert_eq!(cfg.seed, 99);
        assert_eq!(cfg.sizes, vec![14, 16]);
        assert_eq!(cfg.samples, 10);
    }
}
