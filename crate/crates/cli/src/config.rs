//! Experiment configuration: TOML with top-level keys and one level of sections.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::ValueEnum;
use hqlab::GridSpec;
use serde::{Deserialize, Serialize};

use crate::Failure;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Subcommand {
    Transform,
    Norms,
    Quantity,
    Minnorm,
    Factorize,
    Findim,
}

impl Subcommand {
    /// Tolerance keys understood by the subcommand, with defaults.
    pub fn tolerance_defaults(self) -> &'static [(&'static str, f64)] {
        match self {
            Self::Transform | Self::Quantity => &[],
            Self::Norms => &[("divergence", 1e-8)],
            Self::Minnorm => &[("residual", 1e-8), ("inner", 1e-10), ("bounds", 1e-6)],
            Self::Factorize => &[("residual", 1e-6)],
            Self::Findim => &[("extreme", 1e-6)],
        }
    }
}

impl fmt::Display for Subcommand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::Transform => "transform",
            Self::Norms => "norms",
            Self::Quantity => "quantity",
            Self::Minnorm => "minnorm",
            Self::Factorize => "factorize",
            Self::Findim => "findim",
        };
        f.write_str(s)
    }
}

impl FromStr for Subcommand {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        <Self as ValueEnum>::from_str(s, false)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub dim: usize,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "L")]
    pub period: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IoSection {
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FindimSection {
    pub n: usize,
    pub m: usize,
    #[serde(default = "yes")]
    pub chiral: bool,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_samples")]
    pub samples: usize,
}

fn yes() -> bool {
    true
}

fn default_trials() -> usize {
    20
}

fn default_samples() -> usize {
    64
}

/// The file format. Every key is optional; unknown keys are rejected.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub subcommand: Option<Subcommand>,
    /// Quantity descriptor, or a multiplier name for `transform`.
    pub quantity: Option<String>,
    pub seed: Option<u64>,
    /// Band limit of generated inputs.
    pub band: Option<usize>,
    pub grid: Option<GridSection>,
    #[serde(default)]
    pub io: IoSection,
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
    pub findim: Option<FindimSection>,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, Failure> {
        toml::from_str(text).map_err(|e| Failure::Validation(format!("config: {}", e.message())))
    }

    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path).map_err(|e| Failure::Validation(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }
}

/// A validated configuration with all paths resolved.
#[derive(Clone, Debug, Serialize)]
pub struct Resolved {
    pub subcommand: Subcommand,
    pub quantity: Option<String>,
    pub seed: u64,
    pub band: usize,
    #[serde(skip)]
    pub grid: Option<GridSpec>,
    pub grid_section: Option<GridSection>,
    pub input: Option<PathBuf>,
    pub out: PathBuf,
    pub tolerances: BTreeMap<String, f64>,
    pub findim: Option<FindimSection>,
}

pub const DEFAULT_SEED: u64 = 0x5EED;

impl Resolved {
    pub fn new(
        cfg: &ExperimentConfig,
        cli_sub: Subcommand,
        base: &Path,
        seed: Option<u64>,
        out: Option<PathBuf>,
    ) -> Result<Self, Failure> {
        if let Some(s) = cfg.subcommand {
            if s != cli_sub {
                return Err(Failure::Validation(format!("config is for '{s}', not '{cli_sub}'")));
            }
        }
        let defaults = cli_sub.tolerance_defaults();
        let mut tolerances: BTreeMap<String, f64> = defaults.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        for (k, v) in &cfg.tolerances {
            if !defaults.iter().any(|(d, _)| d == k) {
                let known: Vec<&str> = defaults.iter().map(|(d, _)| *d).collect();
                return Err(Failure::Validation(format!("unknown tolerance key '{k}' for {cli_sub} (known: {known:?})")));
            }
            if !(v.is_finite() && *v > 0.0) {
                return Err(Failure::Validation(format!("tolerance '{k}' must be positive")));
            }
            tolerances.insert(k.clone(), *v);
        }
        let grid = cfg.grid.map(|g| GridSpec::new(g.dim, g.n, g.period)).transpose().map_err(|e| Failure::Validation(e.to_string()))?;
        let resolve = |p: &PathBuf| if p.is_absolute() { p.clone() } else { base.join(p) };
        let input = cfg.io.input.as_ref().map(resolve);
        if let Some(p) = &input {
            if !p.exists() {
                return Err(Failure::Validation(format!("input {} does not exist", p.display())));
            }
        }
        let out = out.or_else(|| cfg.io.output.as_ref().map(resolve)).unwrap_or_else(|| PathBuf::from("."));
        Ok(Self {
            subcommand: cli_sub,
            quantity: cfg.quantity.clone(),
            seed: seed.or(cfg.seed).unwrap_or(DEFAULT_SEED),
            band: cfg.band.unwrap_or(4),
            grid,
            grid_section: cfg.grid,
            input,
            out,
            tolerances,
            findim: cfg.findim,
        })
    }

    pub fn tol(&self, key: &str) -> f64 {
        self.tolerances[key]
    }

    pub fn grid(&self) -> Result<GridSpec, Failure> {
        self.grid.ok_or_else(|| Failure::Validation(format!("{} needs a [grid] section", self.subcommand)))
    }

    pub fn quantity(&self) -> Result<&str, Failure> {
        self.quantity.as_deref().ok_or_else(|| Failure::Validation(format!("{} needs a 'quantity' key", self.subcommand)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_named() {
        let e = ExperimentConfig::parse("foo = 1\n").unwrap_err();
        assert!(e.to_string().contains("foo"), "{e}");
        let e = ExperimentConfig::parse("[grid]\ndim = 1\nN = 8\nL = 1.0\nbar = 2\n").unwrap_err();
        assert!(e.to_string().contains("bar"), "{e}");
    }

    #[test]
    fn resolves_paths_and_tolerances() {
        let cfg = ExperimentConfig::parse("subcommand = \"factorize\"\n[io]\noutput = \"out\"\n[tolerances]\nresidual = 1e-7\n").unwrap();
        let r = Resolved::new(&cfg, Subcommand::Factorize, Path::new("/base"), Some(3), None).unwrap();
        assert_eq!(r.out, PathBuf::from("/base/out"));
        assert_eq!(r.tol("residual"), 1e-7);
        assert_eq!(r.seed, 3);
        assert!(Resolved::new(&cfg, Subcommand::Norms, Path::new("/base"), None, None).is_err());
        let bad = ExperimentConfig::parse("[tolerances]\nbogus = 1.0\n").unwrap();
        assert!(Resolved::new(&bad, Subcommand::Minnorm, Path::new("."), None, None).is_err());
    }
}
