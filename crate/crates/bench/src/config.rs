use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use newst::data::{DataFormat, LabelColumn, LabelMapping, SpikedModelSpec};
use newst::optim::{Method, OptimizerConfig};
use newst::CumulantFamily;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::{BenchError, Result};

/// Environment variable that replaces the configured global seed.
pub const SEED_ENV: &str = "NEWST_SEED";

/// Where a benchmark's data comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase", deny_unknown_fields)]
pub enum DatasetSource {
    /// Spiked Gaussian model; its `seed` field is replaced by the global seed.
    Generated(SpikedModelSpec),
    File {
        path: PathBuf,
        #[serde(default)]
        format: Option<DataFormat>,
        #[serde(default)]
        label: LabelColumn,
        /// Defaults to two-class mapping for logistic, raw values otherwise.
        #[serde(default)]
        mapping: Option<LabelMapping>,
        #[serde(default)]
        standardize: bool,
    },
}

/// A benchmark run: one dataset, one family, several methods.
///
/// `common` and `overrides` are partial optimizer configurations (JSON
/// objects with any subset of the [`OptimizerConfig`] fields). They are
/// layered over each method's defaults in that order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    pub dataset: DatasetSource,
    pub family: CumulantFamily,
    pub methods: Vec<Method>,
    #[serde(default)]
    pub common: Map<String, Value>,
    #[serde(default)]
    pub overrides: BTreeMap<Method, Map<String, Value>>,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one")]
    pub repetitions: usize,
    /// Starting point; zeros if absent.
    #[serde(default)]
    pub start: Option<Vec<f64>>,
    /// Also write every iterate, for distance-to-optimum diagnostics.
    #[serde(default)]
    pub save_iterates: bool,
}

fn one() -> usize {
    1
}

impl BenchConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| BenchError::Io(path.to_path_buf(), e))?;
        Self::from_json_str(&text)
    }

    /// Applies `NEWST_SEED` if it is set.
    pub fn apply_env(&mut self) -> Result<()> {
        self.apply_seed_override(std::env::var(SEED_ENV).ok().as_deref())
    }

    /// Replaces the seed with `raw` (the value of `NEWST_SEED`), if given.
    pub fn apply_seed_override(&mut self, raw: Option<&str>) -> Result<()> {
        if let Some(raw) = raw {
            self.seed = raw
                .trim()
                .parse()
                .map_err(|_| BenchError::Config(format!("{SEED_ENV}='{raw}' is not an unsigned integer")))?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(BenchError::Config("method list is empty".into()));
        }
        for (i, m) in self.methods.iter().enumerate() {
            if self.methods[..i].contains(m) {
                return Err(BenchError::Config(format!("method {m} listed twice")));
            }
        }
        if self.repetitions == 0 {
            return Err(BenchError::Config("repetitions must be at least 1".into()));
        }
        if let DatasetSource::Generated(spec) = &self.dataset {
            spec.validate()?;
            if spec.family != self.family {
                return Err(BenchError::Config(format!(
                    "generated responses are {} but the benchmark family is {}",
                    spec.family, self.family
                )));
            }
        }
        for m in &self.methods {
            self.optimizer_config(*m)?;
        }
        Ok(())
    }

    /// Method defaults, then `common`, then the method's override; the
    /// global seed always wins.
    pub fn optimizer_config(&self, method: Method) -> Result<OptimizerConfig> {
        let mut merged = match serde_json::to_value(OptimizerConfig::for_method(method))? {
            Value::Object(m) => m,
            _ => unreachable!("configs serialize to objects"),
        };
        for layer in [Some(&self.common), self.overrides.get(&method)].into_iter().flatten() {
            for (k, v) in layer {
                if k == "method" {
                    return Err(BenchError::Config("'method' cannot be overridden".into()));
                }
                merged.insert(k.clone(), v.clone());
            }
        }
        let mut cfg: OptimizerConfig = serde_json::from_value(Value::Object(merged))
            .map_err(|e| BenchError::Config(format!("optimizer settings for {method}: {e}")))?;
        cfg.seed = self.seed;
        Ok(cfg)
    }
}
