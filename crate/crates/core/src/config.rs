//! JSON experiment configuration: `model`, `lambda` and `experiment` sections.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mean_field::MeanFieldOptions;
use crate::model::{check_size, LambdaSpec, ModelParams};
use crate::rate::RateOptions;

/// Λ as `[[k, l, value], ...]` or `{"d": .., "entries": [[k, l, value], ...]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LambdaInput {
    Triples(Vec<(i64, i64, f64)>),
    WithRadius { d: usize, entries: Vec<(i64, i64, f64)> },
}

impl LambdaInput {
    pub fn to_spec(&self) -> Result<LambdaSpec> {
        match self {
            LambdaInput::Triples(t) => LambdaSpec::from_triples(None, t),
            LambdaInput::WithRadius { d, entries } => LambdaSpec::from_triples(Some(*d), entries),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    #[serde(rename = "N_list")]
    pub n_list: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    /// Trapezoid nodes for ω integrals.
    pub q: usize,
    /// Gauss–Hermite nodes per axis.
    pub q_gh: usize,
    pub q_check: usize,
    pub residual_threshold: f64,
    /// Worker threads; 0 uses all cores.
    pub threads: usize,
    /// Also run with one fixed (J, Θ) draw, averaging over noise and initials only.
    pub quenched: bool,
    pub strict_prop53: bool,
    /// Grid resolution for Λ̃ validation.
    pub grid: usize,
    pub out: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let mf = MeanFieldOptions::default();
        ExperimentConfig {
            n_list: vec![101, 401, 1601],
            trials: 32,
            seed: 0,
            q: 512,
            q_gh: mf.q_gh,
            q_check: mf.q_check,
            residual_threshold: mf.residual_threshold,
            threads: 0,
            quenched: false,
            strict_prop53: false,
            grid: 64,
            out: None,
        }
    }
}

impl ExperimentConfig {
    pub fn mean_field(&self) -> MeanFieldOptions {
        MeanFieldOptions {
            q_gh: self.q_gh,
            q_check: self.q_check,
            residual_threshold: self.residual_threshold,
            strict_prop53: self.strict_prop53,
        }
    }

    pub fn rate(&self) -> RateOptions {
        RateOptions {
            q: self.q,
            mean_field: self.mean_field(),
            ..RateOptions::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub model: ModelParams,
    pub lambda: LambdaInput,
    #[serde(default)]
    pub experiment: ExperimentConfig,
}

/// A parsed and validated configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct Config {
    pub params: ModelParams,
    pub spec: LambdaSpec,
    pub experiment: ExperimentConfig,
}

impl Config {
    pub fn from_json(text: &str) -> Result<Self> {
        let raw: RawConfig = serde_json::from_str(text)?;
        Config::from_raw(raw)
    }

    pub fn from_raw(raw: RawConfig) -> Result<Self> {
        raw.model.validate()?;
        let spec = raw.lambda.to_spec()?;
        let e = &raw.experiment;
        if e.n_list.is_empty() {
            return Err(Error::Config("N_list is empty".into()));
        }
        for &n in &e.n_list {
            check_size(n, spec.radius())?;
        }
        if e.trials == 0 {
            return Err(Error::Config("trials must be >= 1".into()));
        }
        if e.q < 2 || e.q_gh == 0 || e.q_check == 0 {
            return Err(Error::Config("quadrature sizes must be positive (q >= 2)".into()));
        }
        if e.grid < 2 * spec.radius() + 1 {
            return Err(Error::Config(format!(
                "grid {} is below 2d+1 = {}",
                e.grid,
                2 * spec.radius() + 1
            )));
        }
        Ok(Config {
            params: raw.model,
            spec,
            experiment: raw.experiment,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Config::from_json(&text)
    }
}
