//! Run configuration and the `key = value` config file format.
//!
//! ```text
//! # shared keys
//! gamma_sq = 0.25
//! grid_m = 65536
//! replicas = 2000
//!
//! [limit_law]
//! n = 512
//! permutations = 1000
//! ```
//!
//! Keys before the first section apply to every experiment. A section named
//! after an experiment holds its own keys and may override shared ones; it
//! only takes effect when that experiment runs. Unknown keys are rejected.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::error::{GmcError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Decay,
    FourthMoment,
    LimitLaw,
    Capacity,
    Convolve,
    ToyModel,
    Kappa,
}

impl Experiment {
    pub const ALL: [Experiment; 7] = [
        Experiment::Decay,
        Experiment::FourthMoment,
        Experiment::LimitLaw,
        Experiment::Capacity,
        Experiment::Convolve,
        Experiment::ToyModel,
        Experiment::Kappa,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Decay => "decay",
            Experiment::FourthMoment => "fourth_moment",
            Experiment::LimitLaw => "limit_law",
            Experiment::Capacity => "capacity",
            Experiment::Convolve => "convolve",
            Experiment::ToyModel => "toy_model",
            Experiment::Kappa => "kappa",
        }
    }

    /// Experiment-specific keys accepted in the config.
    pub fn extra_keys(self) -> &'static [&'static str] {
        match self {
            Experiment::Decay => &["ns", "beta", "block_first", "block_last"],
            Experiment::FourthMoment => &["ns"],
            Experiment::LimitLaw => &["n", "permutations", "bins", "constant"],
            Experiment::Capacity => &["s"],
            Experiment::Convolve => &["d", "ks", "density_points"],
            Experiment::ToyModel => &["a", "n", "fine_scale", "inner"],
            Experiment::Kappa => &[],
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = GmcError;

    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s || e.name().replace('_', "-") == s)
            .ok_or_else(|| GmcError::Config(format!("unknown experiment `{s}`")))
    }
}

const COMMON_KEYS: [&str; 9] = [
    "experiment",
    "gamma_sq",
    "grid_m",
    "n_modes",
    "n_max",
    "replicas",
    "master_seed",
    "workers",
    "output_path",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub gamma_sq: f64,
    pub grid_m: usize,
    pub n_modes: usize,
    pub n_max: usize,
    pub replicas: usize,
    pub master_seed: u64,
    pub workers: usize,
    pub output_path: String,
    /// Experiment-specific keys, unparsed.
    pub extras: BTreeMap<String, String>,
}

/// Typed experiment-specific parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Params {
    Decay {
        ns: Vec<u64>,
        beta: f64,
        block_first: usize,
        block_last: usize,
    },
    FourthMoment {
        ns: Vec<u64>,
    },
    LimitLaw {
        n: u64,
        permutations: usize,
        bins: usize,
        constant: LimitConstant,
    },
    Capacity {
        s: f64,
    },
    Convolve {
        d: u32,
        ks: Vec<usize>,
        density_points: usize,
    },
    ToyModel {
        a: f64,
        n: u64,
        fine_scale: f64,
        /// Inner Monte-Carlo size for the variance split; 0 computes it exactly.
        inner: usize,
    },
    Kappa,
}

/// Variance constant of the limit-law reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LimitConstant {
    /// `κ(γ)`, the transform at frequency `2π`.
    Kappa,
    /// `(2π)^{1−γ²} κ(γ)`, the transform at unit frequency.
    UnitFrequency,
}

fn dyadic(from: u64, to: u64) -> Vec<u64> {
    let mut v = Vec::new();
    let mut n = from.max(1);
    while n <= to {
        v.push(n);
        n *= 2;
    }
    v
}

fn cfg_err(msg: impl Into<String>) -> GmcError {
    GmcError::Config(msg.into())
}

fn parse_value<T: FromStr>(key: &str, raw: &str) -> Result<T> {
    raw.parse()
        .map_err(|_| cfg_err(format!("`{key}`: cannot parse `{raw}`")))
}

fn parse_list<T: FromStr>(key: &str, raw: &str) -> Result<Vec<T>> {
    raw.split(',')
        .map(|s| parse_value(key, s.trim()))
        .collect()
}

impl RunConfig {
    /// Configuration with every shared key at its default.
    pub fn new(experiment: Experiment, gamma_sq: f64, grid_m: usize) -> Self {
        RunConfig {
            experiment,
            gamma_sq,
            grid_m,
            n_modes: grid_m / 2,
            n_max: grid_m / 2,
            replicas: 100,
            master_seed: 0,
            workers: 1,
            output_path: "results.jsonl".into(),
            extras: BTreeMap::new(),
        }
    }

    pub fn with_extra(mut self, key: &str, value: impl ToString) -> Self {
        self.extras.insert(key.into(), value.to_string());
        self
    }

    pub fn from_file(path: &Path, experiment: Option<Experiment>) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| cfg_err(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text, experiment)
    }

    /// Parses a config file. `experiment` (from the command line) must agree
    /// with an `experiment` key in the file when both are present.
    pub fn parse(text: &str, experiment: Option<Experiment>) -> Result<Self> {
        let mut shared: BTreeMap<String, (usize, String)> = BTreeMap::new();
        let mut sections: BTreeMap<Experiment, BTreeMap<String, (usize, String)>> = BTreeMap::new();
        let mut current: Option<Experiment> = None;
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest.strip_suffix(']').ok_or(GmcError::Parse {
                    line: line_no,
                    message: format!("unterminated section header `{line}`"),
                })?;
                let exp = name.trim().parse::<Experiment>().map_err(|_| GmcError::Parse {
                    line: line_no,
                    message: format!("unknown section `{}`", name.trim()),
                })?;
                current = Some(exp);
                sections.entry(exp).or_default();
                continue;
            }
            let (key, value) = line.split_once('=').ok_or(GmcError::Parse {
                line: line_no,
                message: format!("expected `key = value`, got `{line}`"),
            })?;
            let key = key.trim().to_string();
            let value = value.trim().trim_matches('"').to_string();
            let known = COMMON_KEYS.contains(&key.as_str())
                || match current {
                    Some(e) => e.extra_keys().contains(&key.as_str()),
                    None => Experiment::ALL.iter().any(|e| e.extra_keys().contains(&key.as_str())),
                };
            if !known {
                return Err(GmcError::Parse {
                    line: line_no,
                    message: format!("unknown key `{key}`"),
                });
            }
            let table = match current {
                Some(e) => sections.get_mut(&e).expect("section registered"),
                None => &mut shared,
            };
            if table.insert(key.clone(), (line_no, value)).is_some() {
                return Err(GmcError::Parse {
                    line: line_no,
                    message: format!("duplicate key `{key}`"),
                });
            }
        }

        let from_file = match shared.get("experiment") {
            Some((line, v)) => Some(v.parse::<Experiment>().map_err(|e| GmcError::Parse {
                line: *line,
                message: e.to_string(),
            })?),
            None => None,
        };
        let experiment = match (experiment, from_file) {
            (Some(a), Some(b)) if a != b => {
                return Err(cfg_err(format!(
                    "command line selects `{a}` but the config file says `{b}`"
                )))
            }
            (Some(a), _) => a,
            (None, Some(b)) => b,
            (None, None) => return Err(cfg_err("no experiment selected")),
        };
        let mut merged = shared;
        if let Some(sec) = sections.remove(&experiment) {
            if sec.contains_key("experiment") {
                return Err(cfg_err("`experiment` is not allowed inside a section"));
            }
            merged.extend(sec);
        }
        for (key, (line, _)) in &merged {
            if !COMMON_KEYS.contains(&key.as_str()) && !experiment.extra_keys().contains(&key.as_str()) {
                return Err(GmcError::Parse {
                    line: *line,
                    message: format!("key `{key}` does not apply to `{experiment}`"),
                });
            }
        }

        let get = |k: &str| merged.get(k).map(|(_, v)| v.as_str());
        let gamma_sq = match get("gamma_sq") {
            Some(v) => parse_value("gamma_sq", v)?,
            None if experiment == Experiment::Kappa => 0.5,
            None => return Err(cfg_err("missing required key `gamma_sq`")),
        };
        let grid_m = get("grid_m").map(|v| parse_value("grid_m", v)).transpose()?.unwrap_or(4096);
        let mut cfg = RunConfig::new(experiment, gamma_sq, grid_m);
        if let Some(v) = get("n_modes") {
            cfg.n_modes = parse_value("n_modes", v)?;
        }
        if let Some(v) = get("n_max") {
            cfg.n_max = parse_value("n_max", v)?;
        }
        if let Some(v) = get("replicas") {
            cfg.replicas = parse_value("replicas", v)?;
        }
        if let Some(v) = get("master_seed") {
            cfg.master_seed = parse_value("master_seed", v)?;
        }
        if let Some(v) = get("workers") {
            cfg.workers = parse_value("workers", v)?;
        }
        if let Some(v) = get("output_path") {
            cfg.output_path = v.to_string();
        }
        for (k, (_, v)) in &merged {
            if experiment.extra_keys().contains(&k.as_str()) {
                cfg.extras.insert(k.clone(), v.clone());
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks the shared invariants and the experiment parameters.
    pub fn validate(&self) -> Result<Params> {
        if !(self.gamma_sq >= 0.0 && self.gamma_sq < 2.0) {
            return Err(cfg_err(format!("gamma_sq must lie in [0, 2), got {}", self.gamma_sq)));
        }
        if self.grid_m < 2 || !self.grid_m.is_power_of_two() {
            return Err(cfg_err(format!("grid_m must be a power of two ≥ 2, got {}", self.grid_m)));
        }
        if self.n_modes == 0 || self.n_modes > self.grid_m / 2 {
            return Err(cfg_err(format!(
                "n_modes must lie in 1..={}, got {}",
                self.grid_m / 2,
                self.n_modes
            )));
        }
        if self.n_max == 0 || self.n_max > self.grid_m / 2 {
            return Err(cfg_err(format!(
                "n_max must lie in 1..={}, got {}",
                self.grid_m / 2,
                self.n_max
            )));
        }
        if self.replicas == 0 {
            return Err(cfg_err("replicas must be ≥ 1"));
        }
        if self.workers == 0 {
            return Err(cfg_err("workers must be ≥ 1"));
        }
        for k in self.extras.keys() {
            if !self.experiment.extra_keys().contains(&k.as_str()) {
                return Err(cfg_err(format!("key `{k}` does not apply to `{}`", self.experiment)));
            }
        }
        self.params()
    }

    fn extra<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        self.extras
            .get(key)
            .map(|v| parse_value(key, v))
            .transpose()
            .map(|v| v.unwrap_or(default))
    }

    fn extra_list<T: FromStr>(&self, key: &str, default: Vec<T>) -> Result<Vec<T>> {
        match self.extras.get(key) {
            Some(v) => parse_list(key, v),
            None => Ok(default),
        }
    }

    /// Typed experiment parameters with defaults filled in.
    pub fn params(&self) -> Result<Params> {
        let n_max = self.n_max as u64;
        let gsq = self.gamma_sq;
        let check_ns = |ns: &[u64]| -> Result<()> {
            if ns.is_empty() || ns.iter().any(|&n| n == 0 || n > n_max) {
                return Err(cfg_err(format!("ns must be nonempty and lie in 1..={n_max}")));
            }
            Ok(())
        };
        let p = match self.experiment {
            Experiment::Decay => {
                let ns = self.extra_list("ns", dyadic(1, n_max))?;
                check_ns(&ns)?;
                let block_first = self.extra("block_first", 0usize)?;
                let block_last = self.extra("block_last", 0usize)?;
                if block_first > block_last || (block_last > 0 && 2 * block_last - 1 > self.n_max) {
                    return Err(cfg_err(format!(
                        "blocks [{block_first}, {block_last}] do not fit below n_max = {n_max}"
                    )));
                }
                Params::Decay {
                    ns,
                    beta: self.extra("beta", 0.0)?,
                    block_first,
                    block_last,
                }
            }
            Experiment::FourthMoment => {
                if gsq >= 0.5 {
                    return Err(cfg_err("fourth_moment needs gamma_sq < 0.5"));
                }
                let ns = self.extra_list("ns", dyadic(16, n_max.min(512)))?;
                check_ns(&ns)?;
                Params::FourthMoment { ns }
            }
            Experiment::LimitLaw => {
                if gsq >= 0.5 {
                    return Err(cfg_err("limit_law needs gamma_sq < 0.5"));
                }
                let n = self.extra("n", n_max.min(512))?;
                check_ns(&[n])?;
                let bins = self.extra("bins", 16usize)?;
                if bins < 4 {
                    return Err(cfg_err("bins must be ≥ 4"));
                }
                let constant = match self.extras.get("constant").map(String::as_str) {
                    None | Some("kappa") => LimitConstant::Kappa,
                    Some("unit_frequency") => LimitConstant::UnitFrequency,
                    Some(other) => {
                        return Err(cfg_err(format!(
                            "constant must be `kappa` or `unit_frequency`, got `{other}`"
                        )))
                    }
                };
                Params::LimitLaw {
                    n,
                    permutations: self.extra("permutations", crate::stats::DEFAULT_PERMUTATIONS)?,
                    bins,
                    constant,
                }
            }
            Experiment::Capacity => {
                let s = self.extra("s", 0.5)?;
                if !(s > 0.0 && s < 1.0) {
                    return Err(cfg_err(format!("s must lie in (0, 1), got {s}")));
                }
                Params::Capacity { s }
            }
            Experiment::Convolve => {
                let d = self.extra("d", 2u32)?;
                let ks = self.extra_list("ks", vec![64usize, 128, 256])?;
                let density_points = self.extra("density_points", 1024usize)?;
                let kmax = ks.iter().copied().max().unwrap_or(0);
                if d == 0 || ks.is_empty() || ks.contains(&0) || kmax > self.n_max {
                    return Err(cfg_err(format!("need d ≥ 1 and ks in 1..={n_max}")));
                }
                if !density_points.is_power_of_two() || density_points < 2 * kmax {
                    return Err(cfg_err(format!(
                        "density_points must be a power of two ≥ {}",
                        2 * kmax
                    )));
                }
                Params::Convolve {
                    d,
                    ks,
                    density_points,
                }
            }
            Experiment::ToyModel => {
                if gsq >= 1.0 {
                    return Err(cfg_err("toy_model needs gamma_sq < 1"));
                }
                let a = self.extra("a", 8.0)?;
                let n = self.extra("n", n_max.min(256))?;
                let fine_scale = self.extra("fine_scale", self.grid_m as f64)?;
                if !(a > 0.0) || n == 0 || n as usize > self.grid_m / 2 {
                    return Err(cfg_err("toy_model needs a > 0 and 1 ≤ n ≤ grid_m/2"));
                }
                let t = n as f64 / a;
                if !(t > 1.0 && t < fine_scale) {
                    return Err(cfg_err(format!(
                        "toy_model needs 1 < n/a < fine_scale, got n/a = {t}, fine_scale = {fine_scale}"
                    )));
                }
                Params::ToyModel {
                    a,
                    n,
                    fine_scale,
                    inner: self.extra("inner", 0usize)?,
                }
            }
            Experiment::Kappa => {
                if gsq >= 1.0 {
                    return Err(cfg_err("kappa needs gamma_sq < 1"));
                }
                Params::Kappa
            }
        };
        Ok(p)
    }
}
