//! Run configuration: defaults, a `key = value` config file, and flag
//! overrides layered on top.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use fastarm_core::{BackendKind, Error, InstanceKind, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algo {
    Oful,
    OfulExact,
    Lints,
    LintsExact,
}

impl Algo {
    pub fn is_exact(self) -> bool {
        matches!(self, Algo::OfulExact | Algo::LintsExact)
    }

    pub fn is_sampling(self) -> bool {
        matches!(self, Algo::Lints | Algo::LintsExact)
    }
}

impl std::str::FromStr for Algo {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "oful" => Ok(Algo::Oful),
            "oful-exact" => Ok(Algo::OfulExact),
            "lints" => Ok(Algo::Lints),
            "lints-exact" => Ok(Algo::LintsExact),
            other => Err(Error::Parse(format!("unknown algorithm `{other}`"))),
        }
    }
}

impl std::fmt::Display for Algo {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Algo::Oful => write!(f, "oful"),
            Algo::OfulExact => write!(f, "oful-exact"),
            Algo::Lints => write!(f, "lints"),
            Algo::LintsExact => write!(f, "lints-exact"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub algo: Algo,
    pub k: usize,
    pub d: usize,
    pub horizon: usize,
    pub eta: f64,
    pub delta: f64,
    pub oracle: BackendKind,
    pub oracle_fail: f64,
    pub instance: InstanceKind,
    pub noise_std: f64,
    pub gap: f64,
    pub seed: u64,
    pub reps: usize,
    pub out: Option<PathBuf>,
    /// Load a serialized instance instead of generating one.
    pub instance_file: Option<PathBuf>,
    /// Record the per-step approximation loss for sampling runs (one exact
    /// scan per step, outside the timed selection).
    pub track_delta: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            algo: Algo::Oful,
            k: 100,
            d: 8,
            horizon: 500,
            eta: 0.1,
            delta: 0.05,
            oracle: BackendKind::Brute,
            oracle_fail: 0.2,
            instance: InstanceKind::PlantedGap,
            noise_std: 0.5,
            gap: 0.3,
            seed: 42,
            reps: 1,
            out: None,
            instance_file: None,
            track_delta: true,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::invalid_config("T", "must be at least 1"));
        }
        if self.k < 2 {
            return Err(Error::invalid_config("K", "need at least two arms"));
        }
        if self.reps == 0 {
            return Err(Error::invalid_config("reps", "must be at least 1"));
        }
        if !self.algo.is_exact() && !(0.0 < self.eta && self.eta < 1.0) {
            return Err(Error::invalid_config(
                "eta",
                "accelerated variants need eta in (0, 1)",
            ));
        }
        if !(0.0 < self.delta && self.delta < 1.0) {
            return Err(Error::invalid_config("delta", "must lie in (0, 1)"));
        }
        if !(0.0 < self.oracle_fail && self.oracle_fail < 1.0) {
            return Err(Error::invalid_config("oracle-fail", "must lie in (0, 1)"));
        }
        if !(0.0..=1.0).contains(&self.noise_std) {
            return Err(Error::invalid_config("sigma", "must lie in [0, 1]"));
        }
        Ok(())
    }

    /// Applies one `key = value` setting (config-file key space).
    pub fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "algo" => self.algo = value.parse()?,
            "K" | "k" => self.k = parse_num(key, value)?,
            "d" => self.d = parse_num(key, value)?,
            "T" | "t" => self.horizon = parse_num(key, value)?,
            "eta" => self.eta = parse_f64(key, value)?,
            "delta" => self.delta = parse_f64(key, value)?,
            "oracle" => self.oracle = value.parse()?,
            "oracle_fail" => self.oracle_fail = parse_f64(key, value)?,
            "instance" => self.instance = value.parse()?,
            "sigma" => self.noise_std = parse_f64(key, value)?,
            "gap" => self.gap = parse_f64(key, value)?,
            "seed" => self.seed = parse_num(key, value)?,
            "reps" => self.reps = parse_num(key, value)?,
            "out" => self.out = Some(PathBuf::from(value)),
            "instance_file" => self.instance_file = Some(PathBuf::from(value)),
            "track_delta" => {
                self.track_delta = value
                    .parse::<bool>()
                    .map_err(|e| Error::Parse(format!("track_delta: {e}")))?
            }
            other => return Err(Error::Parse(format!("unknown config key `{other}`"))),
        }
        Ok(())
    }

    /// Reads a config file of `key = value` lines (`#` comments allowed).
    pub fn load_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path)?;
        for (settings_line, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Parse(format!("config line {}: expected key = value", settings_line + 1))
            })?;
            self.apply(key.trim(), value.trim())?;
        }
        Ok(())
    }

    /// Stable textual identity used in file names and summary rows.
    pub fn descriptor(&self) -> BTreeMap<&'static str, String> {
        let mut map = BTreeMap::new();
        map.insert("algo", self.algo.to_string());
        map.insert("K", self.k.to_string());
        map.insert("d", self.d.to_string());
        map.insert("T", self.horizon.to_string());
        map.insert("eta", format!("{}", self.eta));
        map.insert("delta", format!("{}", self.delta));
        map.insert("oracle", self.oracle.to_string());
        map.insert("instance", self.instance.to_string());
        map.insert("seed", self.seed.to_string());
        map
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse::<T>()
        .map_err(|e| Error::Parse(format!("{key}: {e}")))
}

fn parse_f64(key: &str, value: &str) -> Result<f64> {
    parse_num(key, value)
}

/// Small extension so config errors read like config errors.
trait ConfigError {
    fn invalid_config(name: &'static str, requirement: &'static str) -> Error;
}

impl ConfigError for Error {
    fn invalid_config(name: &'static str, requirement: &'static str) -> Error {
        Error::Parse(format!("invalid {name}: {requirement}"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn apply_and_validate() {
        let mut cfg = RunConfig::default();
        cfg.apply("algo", "lints").unwrap();
        cfg.apply("K", "256").unwrap();
        cfg.apply("T", "100").unwrap();
        cfg.apply("eta", "0.25").unwrap();
        cfg.apply("oracle", "lsh").unwrap();
        assert_eq!(cfg.algo, Algo::Lints);
        assert_eq!(cfg.k, 256);
        assert_eq!(cfg.horizon, 100);
        assert_eq!(cfg.oracle, BackendKind::Lsh);
        cfg.validate().unwrap();

        cfg.apply("eta", "1.5").unwrap();
        assert!(cfg.validate().is_err());
        assert!(cfg.apply("bogus", "1").is_err());
    }

    #[test]
    fn config_file_round_trip() {
        let dir = std::env::temp_dir().join("fastarm_cfg_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("run.cfg");
        std::fs::write(
            &path,
            "# experiment\nalgo = oful-exact\nK = 64\nd = 4\nT = 200\nsigma = 0.25\n",
        )
        .unwrap();
        let mut cfg = RunConfig::default();
        cfg.load_file(&path).unwrap();
        assert_eq!(cfg.algo, Algo::OfulExact);
        assert_eq!(cfg.k, 64);
        assert_eq!(cfg.d, 4);
        assert_eq!(cfg.horizon, 200);
        assert_eq!(cfg.noise_std, 0.25);
    }
}
