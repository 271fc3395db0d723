//! TOML run configuration.
//!
//! ```toml
//! [model.offspring]
//! kind = "geometric"        # geometric | poisson | linear_fractional | explicit
//! params = [0.5]            # success | rate | gamma
//!
//! [model.immigration]
//! kind = "explicit"
//! pmf = [0.5, 0.5]
//!
//! [increments]
//! kind = "shifted_pareto"   # shifted_pareto [alpha, x_m] | gaussian [sigma0_sq]
//! params = [2.5, 1.0]       # | truncated_discrete: params = atoms, pmf = weights
//!
//! [experiment]
//! study = "thm12_ldp"
//! n_grid = [100, 200, 400]
//! r_or_eps = [0.2]
//! eps_kind = "power"        # power | log_power | fixed
//! eps_coefficient = 1.0
//! paths = 100000
//! seed = 7
//! output = "thm12.csv"
//! ```

use std::path::Path;

use serde::Deserialize;

use crate::error::{GwiError, Result};
use crate::experiments::{EpsKind, ExperimentConfig, Study};
use crate::model::{validate_condition_a, DistributionSpec, ModelParams};
use crate::simulate::IncrementLaw;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LawSection {
    pub kind: String,
    #[serde(default)]
    pub params: Vec<f64>,
    pub pmf: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub offspring: LawSection,
    pub immigration: LawSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub study: Study,
    #[serde(default)]
    pub n_grid: Vec<usize>,
    #[serde(default)]
    pub r_or_eps: Vec<f64>,
    #[serde(default)]
    pub eps_kind: EpsKind,
    pub eps_coefficient: Option<f64>,
    pub paths: Option<u64>,
    pub seed: Option<u64>,
    pub output: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: Option<ModelSection>,
    pub increments: Option<LawSection>,
    pub experiment: Option<ExperimentSection>,
}

fn config_err(msg: impl Into<String>) -> GwiError {
    GwiError::Config(msg.into())
}

fn one_param(section: &LawSection, what: &str) -> Result<f64> {
    match section.params.as_slice() {
        [v] => Ok(*v),
        other => Err(config_err(format!(
            "{} law needs params = [{what}], got {other:?}",
            section.kind
        ))),
    }
}

impl LawSection {
    pub fn to_distribution(&self) -> Result<DistributionSpec> {
        match self.kind.as_str() {
            "geometric" => Ok(DistributionSpec::geometric(one_param(self, "success")?)),
            "poisson" => Ok(DistributionSpec::poisson(one_param(self, "rate")?)),
            "linear_fractional" => Ok(DistributionSpec::linear_fractional(one_param(self, "gamma")?)),
            "explicit" => self
                .pmf
                .clone()
                .map(DistributionSpec::explicit)
                .ok_or_else(|| config_err("explicit law needs a pmf array")),
            other => Err(config_err(format!("unknown distribution kind '{other}'"))),
        }
    }

    pub fn to_increments(&self) -> Result<IncrementLaw> {
        match self.kind.as_str() {
            "shifted_pareto" => match self.params.as_slice() {
                [alpha, x_m] => Ok(IncrementLaw::ShiftedPareto {
                    alpha: *alpha,
                    x_m: *x_m,
                }),
                other => Err(config_err(format!("shifted_pareto needs params = [alpha, x_m], got {other:?}"))),
            },
            "gaussian" => Ok(IncrementLaw::Gaussian {
                sigma0_sq: one_param(self, "sigma0_sq")?,
            }),
            "truncated_discrete" => Ok(IncrementLaw::TruncatedDiscrete {
                values: self.params.clone(),
                probs: self
                    .pmf
                    .clone()
                    .ok_or_else(|| config_err("truncated_discrete needs pmf weights"))?,
            }),
            other => Err(config_err(format!("unknown increment kind '{other}'"))),
        }
    }
}

/// Applies `section.key=value` overrides to a parsed TOML tree. Values are
/// parsed as TOML when possible and kept as strings otherwise.
pub fn apply_overrides(doc: &mut toml::Table, overrides: &[String]) -> Result<()> {
    for item in overrides {
        let (path, raw) = item
            .split_once('=')
            .ok_or_else(|| config_err(format!("override '{item}' is not key=value")))?;
        let value = format!("v = {raw}")
            .parse::<toml::Table>()
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| toml::Value::String(raw.to_string()));
        let keys: Vec<&str> = path.trim().split('.').collect();
        let (last, parents) = keys.split_last().expect("split yields one item");
        let mut table = &mut *doc;
        for key in parents {
            table = table
                .entry(key.to_string())
                .or_insert_with(|| toml::Value::Table(toml::Table::new()))
                .as_table_mut()
                .ok_or_else(|| config_err(format!("override path '{path}' crosses a non-table")))?;
        }
        table.insert(last.to_string(), value);
    }
    Ok(())
}

impl RunConfig {
    pub fn parse(text: &str, overrides: &[String]) -> Result<Self> {
        let mut doc: toml::Table = text.parse().map_err(|e| config_err(format!("{e}")))?;
        apply_overrides(&mut doc, overrides)?;
        RunConfig::deserialize(toml::Value::Table(doc)).map_err(|e| config_err(format!("{e}")))
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text, overrides)
    }

    /// Validated model; domain errors (criticality and so on) pass through.
    pub fn model(&self) -> Result<ModelParams> {
        let m = self.model.as_ref().ok_or_else(|| config_err("missing [model] section"))?;
        validate_condition_a(&m.offspring.to_distribution()?, &m.immigration.to_distribution()?)
    }

    pub fn increments(&self) -> Result<Option<IncrementLaw>> {
        self.increments.as_ref().map(LawSection::to_increments).transpose()
    }

    pub fn experiment(&self) -> Result<ExperimentConfig> {
        let e = self
            .experiment
            .as_ref()
            .ok_or_else(|| config_err("missing [experiment] section"))?;
        let mut config = ExperimentConfig::new(e.study, self.model()?, e.n_grid.clone());
        config.law = self.increments()?;
        config.r_or_eps = e.r_or_eps.clone();
        config.eps_kind = e.eps_kind;
        if let Some(c) = e.eps_coefficient {
            config.eps_coefficient = c;
        }
        if let Some(p) = e.paths {
            config.paths = p;
        }
        if let Some(s) = e.seed {
            config.seed = s;
        }
        config.output_path = e.output.as_ref().map(Into::into);
        Ok(config)
    }
}
