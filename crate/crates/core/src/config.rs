//! Experiment configuration files.
//!
//! The format is flat `key = value` text. Keys before the first `[section]`
//! apply to every experiment; a section named after an experiment overrides
//! them for that experiment only. `#` and `;` start comment lines.
//!
//! ```text
//! seed = 7
//!
//! [laws]
//! h = 1/128
//! replicates = 20000
//! tol.laws.level_mass_ks = 0.03
//! ```
//!
//! Reserved keys are `seed`, `h`, `replicates`, `out` and `threads`. Keys of
//! the form `tol.<record id>` override the tolerance of matching records.
//! Every other key is an experiment parameter; numbers may be written as
//! fractions (`1/128`) and lists are comma separated.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use crate::error::{Error, Result};

pub const EXPERIMENTS: [&str; 5] = ["laws", "rayknight", "bismut", "census", "hausdorff"];

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

/// A parsed configuration file: global keys and per-experiment sections.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigFile {
    pub global: BTreeMap<String, String>,
    pub sections: BTreeMap<String, BTreeMap<String, String>>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ConfigFile::default();
        let mut section: Option<String> = None;
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| {
                        config_err(format!("line {line_no}: unterminated section header"))
                    })?
                    .trim();
                if !EXPERIMENTS.contains(&name) {
                    return Err(config_err(format!(
                        "line {line_no}: unknown section `{name}` (expected one of {})",
                        EXPERIMENTS.join(", ")
                    )));
                }
                if cfg.sections.contains_key(name) {
                    return Err(config_err(format!(
                        "line {line_no}: section `{name}` repeated"
                    )));
                }
                cfg.sections.insert(name.to_string(), BTreeMap::new());
                section = Some(name.to_string());
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| config_err(format!("line {line_no}: expected `key = value`")))?;
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() || key.contains(char::is_whitespace) {
                return Err(config_err(format!("line {line_no}: invalid key `{key}`")));
            }
            let map = match &section {
                Some(s) => cfg.sections.get_mut(s).expect("section inserted"),
                None => &mut cfg.global,
            };
            if map.insert(key.to_string(), value.to_string()).is_some() {
                return Err(config_err(format!("line {line_no}: key `{key}` repeated")));
            }
        }
        Ok(cfg)
    }

    /// Global keys overlaid with the experiment's section.
    pub fn merged(&self, experiment: &str) -> BTreeMap<String, String> {
        let mut map = self.global.clone();
        if let Some(s) = self.sections.get(experiment) {
            map.extend(s.iter().map(|(k, v)| (k.clone(), v.clone())));
        }
        map
    }
}

/// Parses a real number, accepting `p/q` fractions.
pub fn parse_real(key: &str, value: &str) -> Result<f64> {
    let parsed = match value.split_once('/') {
        Some((p, q)) => match (p.trim().parse::<f64>(), q.trim().parse::<f64>()) {
            (Ok(p), Ok(q)) if q != 0.0 => Some(p / q),
            _ => None,
        },
        None => value.parse::<f64>().ok(),
    };
    match parsed {
        Some(x) if x.is_finite() => Ok(x),
        _ => Err(config_err(format!(
            "`{key}`: `{value}` is not a finite number"
        ))),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: String,
    pub seed: u64,
    pub h: Option<f64>,
    pub replicates: Option<usize>,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
    pub params: BTreeMap<String, String>,
    pub tolerances: BTreeMap<String, f64>,
}

pub const DEFAULT_SEED: u64 = 20_240_601;

impl ExperimentConfig {
    pub fn new(experiment: &str) -> Result<Self> {
        if !EXPERIMENTS.contains(&experiment) {
            return Err(config_err(format!("unknown experiment `{experiment}`")));
        }
        Ok(Self {
            experiment: experiment.to_string(),
            seed: DEFAULT_SEED,
            h: None,
            replicates: None,
            out: None,
            threads: None,
            params: BTreeMap::new(),
            tolerances: BTreeMap::new(),
        })
    }

    pub fn from_file(file: &ConfigFile, experiment: &str) -> Result<Self> {
        let mut cfg = Self::new(experiment)?;
        for (key, value) in file.merged(experiment) {
            cfg.set(&key, &value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Sets one key with the same rules as the file format.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "seed" => {
                self.seed = value
                    .parse()
                    .map_err(|_| config_err(format!("`seed`: `{value}` is not a u64")))?
            }
            "h" => self.h = Some(parse_real(key, value)?),
            "replicates" => {
                self.replicates =
                    Some(value.parse().map_err(|_| {
                        config_err(format!("`replicates`: `{value}` is not a count"))
                    })?)
            }
            "out" => self.out = Some(PathBuf::from(value)),
            "threads" => {
                self.threads = Some(
                    value
                        .parse()
                        .map_err(|_| config_err(format!("`threads`: `{value}` is not a count")))?,
                )
            }
            _ => {
                if let Some(id) = key.strip_prefix("tol.") {
                    if id.is_empty() {
                        return Err(config_err("`tol.` needs a record id"));
                    }
                    let t = parse_real(key, value)?;
                    if t < 0.0 {
                        return Err(config_err(format!(
                            "`{key}`: tolerance must be non-negative"
                        )));
                    }
                    self.tolerances.insert(id.to_string(), t);
                } else {
                    self.params.insert(key.to_string(), value.to_string());
                }
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates == Some(0) {
            return Err(config_err("replicates must be at least 1"));
        }
        if self.threads == Some(0) {
            return Err(config_err("threads must be at least 1"));
        }
        if let Some(h) = self.h {
            if !(h > 0.0 && h <= 1.0) {
                return Err(config_err(format!("h must lie in (0, 1], got {h}")));
            }
            if h.log2().fract() != 0.0 {
                return Err(config_err(format!("h must be a power of two, got {h}")));
            }
        }
        Ok(())
    }

    /// Parameter reader that remembers which keys were consumed.
    pub fn params(&self) -> Params<'_> {
        Params {
            map: &self.params,
            used: RefCell::new(BTreeSet::new()),
        }
    }

    /// Effective configuration as text, for the report header.
    pub fn summary(&self) -> BTreeMap<String, String> {
        let mut m = self.params.clone();
        m.insert("seed".into(), self.seed.to_string());
        if let Some(h) = self.h {
            m.insert("h".into(), h.to_string());
        }
        if let Some(r) = self.replicates {
            m.insert("replicates".into(), r.to_string());
        }
        for (id, t) in &self.tolerances {
            m.insert(format!("tol.{id}"), t.to_string());
        }
        m
    }
}

pub struct Params<'a> {
    map: &'a BTreeMap<String, String>,
    used: RefCell<BTreeSet<String>>,
}

impl Params<'_> {
    fn raw(&self, key: &str) -> Option<&str> {
        self.used.borrow_mut().insert(key.to_string());
        self.map.get(key).map(String::as_str)
    }

    pub fn real(&self, key: &str, default: f64) -> Result<f64> {
        self.raw(key).map_or(Ok(default), |v| parse_real(key, v))
    }

    pub fn count(&self, key: &str, default: usize) -> Result<usize> {
        self.raw(key).map_or(Ok(default), |v| {
            v.parse()
                .map_err(|_| config_err(format!("`{key}`: `{v}` is not a count")))
        })
    }

    pub fn reals(&self, key: &str, default: &[f64]) -> Result<Vec<f64>> {
        match self.raw(key) {
            None => Ok(default.to_vec()),
            Some(v) => v.split(',').map(|s| parse_real(key, s.trim())).collect(),
        }
    }

    /// Errors on any parameter that no reader asked for.
    pub fn finish(&self) -> Result<()> {
        let used = self.used.borrow();
        let unknown: Vec<&str> = self
            .map
            .keys()
            .filter(|k| !used.contains(*k))
            .map(String::as_str)
            .collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            Err(config_err(format!(
                "unknown parameter(s): {}",
                unknown.join(", ")
            )))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "\
# global
seed = 7
h = 1/64

[laws]
h = 1/128
replicates = 200
tol.laws.level_mass_ks = 0.03
r = 0.5

[census]
threads = 2
";

    #[test]
    fn sections_override_globals() {
        let file = ConfigFile::parse(SAMPLE).unwrap();
        let laws = ExperimentConfig::from_file(&file, "laws").unwrap();
        assert_eq!(laws.seed, 7);
        assert_eq!(laws.h, Some(1.0 / 128.0));
        assert_eq!(laws.replicates, Some(200));
        assert_eq!(laws.tolerances["laws.level_mass_ks"], 0.03);
        assert_eq!(laws.params["r"], "0.5");
        let census = ExperimentConfig::from_file(&file, "census").unwrap();
        assert_eq!(census.h, Some(1.0 / 64.0));
        assert_eq!(census.threads, Some(2));
        assert!(census.params.is_empty());
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let cases = [
            ("[laws\n", "line 1"),
            ("[nope]\n", "unknown section"),
            ("seed 7\n", "line 1"),
            ("a = 1\na = 2\n", "line 2"),
            ("[laws]\n[laws]\n", "repeated"),
        ];
        for (text, needle) in cases {
            let err = ConfigFile::parse(text).unwrap_err().to_string();
            assert!(err.contains(needle), "{text:?}: {err}");
        }
    }

    #[test]
    fn validation() {
        let file = ConfigFile::parse("replicates = 0\n").unwrap();
        assert!(matches!(
            ExperimentConfig::from_file(&file, "laws"),
            Err(Error::Config(_))
        ));
        let file = ConfigFile::parse("h = 0.3\n").unwrap();
        assert!(ExperimentConfig::from_file(&file, "laws").is_err());
        let file = ConfigFile::parse("seed = -1\n").unwrap();
        assert!(ExperimentConfig::from_file(&file, "laws").is_err());
        let file = ConfigFile::parse("tol.x = -1\n").unwrap();
        assert!(ExperimentConfig::from_file(&file, "laws").is_err());
        assert!(ExperimentConfig::new("report").is_err());
    }

    #[test]
    fn params_track_unknown_keys() {
        let file = ConfigFile::parse("[laws]\nr = 1/4\nradii = 0.5, 1/8\ntypo = 3\n").unwrap();
        let cfg = ExperimentConfig::from_file(&file, "laws").unwrap();
        let p = cfg.params();
        assert_eq!(p.real("r", 1.0).unwrap(), 0.25);
        assert_eq!(p.reals("radii", &[]).unwrap(), vec![0.5, 0.125]);
        assert_eq!(p.count("bins", 8).unwrap(), 8);
        let err = p.finish().unwrap_err().to_string();
        assert!(err.contains("typo"));
    }

    #[test]
    fn fractions() {
        assert_eq!(parse_real("x", "3/4").unwrap(), 0.75);
        assert!(parse_real("x", "1/0").is_err());
        assert!(parse_real("x", "inf").is_err());
        assert!(parse_real("x", "").is_err());
    }
}
