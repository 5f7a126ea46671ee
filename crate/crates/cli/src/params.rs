//! Per-command parameters, their defaults, the config file, and validation.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use voi_core::suites::Suite;

use crate::output::Format;

/// A parameter problem, reported with exit code 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn fail<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

/// Declarative experiment file. Every key is optional; flags override it.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub command: Option<String>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    pub seed: Option<u64>,
    pub draws: Option<usize>,
    #[serde(default)]
    pub parameters: toml::Table,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text)
            .map_err(|e| ConfigError(format!("invalid config {}: {e}", path.display())))
    }

    /// Command parameters: defaults overlaid with the `[parameters]` table.
    pub fn parameters<P: DeserializeOwned>(&self) -> Result<P, ConfigError> {
        P::deserialize(toml::Value::Table(self.parameters.clone()))
            .map_err(|e| ConfigError(format!("invalid [parameters]: {e}")))
    }
}

fn positive(name: &str, v: f64) -> Result<(), ConfigError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        fail(format!("{name} must be positive, got {v}"))
    }
}

fn nonempty<T>(name: &str, v: &[T]) -> Result<(), ConfigError> {
    if v.is_empty() {
        fail(format!("{name} must not be empty"))
    } else {
        Ok(())
    }
}

fn alphas_ok(alphas: &[f64]) -> Result<(), ConfigError> {
    nonempty("alphas", alphas)?;
    match alphas.iter().find(|&&a| !(a > 0.0 && a < 1.0)) {
        Some(a) => fail(format!("alphas must lie in (0, 1), got {a}")),
        None => Ok(()),
    }
}

fn dim_ok(name: &str, k: usize) -> Result<(), ConfigError> {
    if k < 2 {
        fail(format!("{name} must be at least 2, got {k}"))
    } else {
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KlParams {
    pub k_max: usize,
    pub sigma_m2: f64,
    pub rho_grid: Vec<f64>,
}

impl Default for KlParams {
    fn default() -> Self {
        KlParams {
            k_max: 50,
            sigma_m2: 1.0,
            rho_grid: (0..=9).map(|i| i as f64 / 10.0).collect(),
        }
    }
}

impl KlParams {
    pub fn validate(&self) -> Result<(), ConfigError> {
        dim_ok("k_max", self.k_max)?;
        positive("sigma_m2", self.sigma_m2)?;
        nonempty("rho_grid", &self.rho_grid)?;
        match self.rho_grid.iter().find(|&&r| !(0.0..1.0).contains(&r)) {
            Some(r) => fail(format!("rho_grid entries must lie in [0, 1), got {r}")),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeeperParams {
    pub k: usize,
    pub alphas: Vec<f64>,
    pub n_list: Vec<f64>,
    pub sigma_u2: f64,
}

impl Default for DeeperParams {
    fn default() -> Self {
        DeeperParams {
            k: 100,
            alphas: vec![0.01, 0.02, 0.03],
            n_list: vec![10.0, 100.0, 1000.0],
            sigma_u2: 1.0,
        }
    }
}

impl DeeperParams {
    pub fn validate(&self) -> Result<(), ConfigError> {
        dim_ok("k", self.k)?;
        alphas_ok(&self.alphas)?;
        positive("sigma_u2", self.sigma_u2)?;
        nonempty("n_list", &self.n_list)?;
        match self.n_list.iter().find(|&&n| !(n.is_finite() && n >= 0.0)) {
            Some(n) => fail(format!("n_list entries must be non-negative, got {n}")),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VersusParams {
    pub k: usize,
    pub alphas: Vec<f64>,
    pub targets: Vec<f64>,
    pub sigma_u2: f64,
}

impl Default for VersusParams {
    fn default() -> Self {
        VersusParams {
            k: 100,
            alphas: vec![0.01, 0.02, 0.03],
            targets: vec![0.25, 0.5, 0.75],
            sigma_u2: 1.0,
        }
    }
}

impl VersusParams {
    /// Targets at or above `λ̄ = 1` are allowed and flagged per row.
    pub fn validate(&self) -> Result<(), ConfigError> {
        dim_ok("k", self.k)?;
        alphas_ok(&self.alphas)?;
        positive("sigma_u2", self.sigma_u2)?;
        nonempty("targets", &self.targets)?;
        match self.targets.iter().find(|&&t| !(t.is_finite() && t >= 0.0)) {
            Some(t) => fail(format!("targets must be non-negative, got {t}")),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SingletonParams {
    pub rho: f64,
    pub sigma_m2: f64,
    pub sigma_u2: f64,
    pub t_min: f64,
    pub t_max: f64,
    pub t_step: f64,
}

impl Default for SingletonParams {
    fn default() -> Self {
        SingletonParams {
            rho: 0.5,
            sigma_m2: 1.0,
            sigma_u2: 1.0,
            t_min: -0.5,
            t_max: 0.5,
            t_step: 0.01,
        }
    }
}

impl SingletonParams {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(0.0..1.0).contains(&self.rho) {
            return fail(format!("rho must lie in [0, 1), got {}", self.rho));
        }
        positive("sigma_m2", self.sigma_m2)?;
        positive("sigma_u2", self.sigma_u2)?;
        positive("t_step", self.t_step)?;
        if !(-0.5 <= self.t_min && self.t_min <= self.t_max && self.t_max <= 0.5) {
            return fail(format!(
                "need -0.5 <= t_min <= t_max <= 0.5, got [{}, {}]",
                self.t_min, self.t_max
            ));
        }
        Ok(())
    }

    pub fn grid(&self) -> Vec<f64> {
        let steps = ((self.t_max - self.t_min) / self.t_step + 1e-9).floor() as usize;
        (0..=steps)
            .map(|i| ((self.t_min + i as f64 * self.t_step) * 1e12).round() / 1e12)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyParams {
    pub suites: Vec<String>,
    pub verbose: bool,
}

impl Default for VerifyParams {
    fn default() -> Self {
        VerifyParams {
            suites: Suite::ALL.iter().map(|s| s.name().to_owned()).collect(),
            verbose: false,
        }
    }
}

impl VerifyParams {
    pub fn suites(&self) -> Result<Vec<Suite>, ConfigError> {
        nonempty("suites", &self.suites)?;
        let mut out = Vec::new();
        for s in &self.suites {
            if s == "all" {
                out.extend(Suite::ALL);
            } else {
                out.push(s.parse::<Suite>().map_err(ConfigError)?);
            }
        }
        out.dedup();
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Pairwise,
    Geometric,
    RandomWalk,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepParams {
    pub family: Family,
    pub k: usize,
    /// Pairwise correlation.
    pub rho: f64,
    /// Geometric decay rate.
    pub alpha: f64,
    /// Random-walk step variance.
    pub nu2: f64,
    /// State variance for the pairwise family.
    pub sigma_m2: f64,
    pub sigma_u2: f64,
    /// Precision indices `τ = nλ̄/σ_u²`.
    pub taus: Vec<f64>,
    /// Depths to report; empty means every `J` in `0..=K`.
    pub depths: Vec<usize>,
}

impl Default for SweepParams {
    fn default() -> Self {
        SweepParams {
            family: Family::Geometric,
            k: 20,
            rho: 0.5,
            alpha: 0.1,
            nu2: 1.0,
            sigma_m2: 1.0,
            sigma_u2: 1.0,
            taus: vec![0.1, 0.3, 1.0, 3.0, 10.0, 30.0, 100.0, 300.0, 1000.0],
            depths: Vec::new(),
        }
    }
}

impl SweepParams {
    pub fn validate(&self) -> Result<(), ConfigError> {
        dim_ok("k", self.k)?;
        positive("sigma_u2", self.sigma_u2)?;
        match self.family {
            Family::Pairwise => {
                positive("sigma_m2", self.sigma_m2)?;
                if !(0.0..1.0).contains(&self.rho) {
                    return fail(format!("rho must lie in [0, 1), got {}", self.rho));
                }
            }
            Family::Geometric => alphas_ok(&[self.alpha])?,
            Family::RandomWalk => positive("nu2", self.nu2)?,
        }
        nonempty("taus", &self.taus)?;
        if let Some(t) = self.taus.iter().find(|&&t| !(t.is_finite() && t >= 0.0)) {
            return fail(format!("taus must be non-negative, got {t}"));
        }
        if let Some(j) = self.depths.iter().find(|&&j| j > self.k) {
            return fail(format!("depth {j} exceeds k = {}", self.k));
        }
        Ok(())
    }
}
