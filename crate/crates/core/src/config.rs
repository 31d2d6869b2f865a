//! TOML run configuration shared by the CLI subcommands.
//!
//! ```toml
//! algorithm = "cts"        # or "sma-rf"
//! seed = 7
//! control = 0
//! conf_level = 0.95
//! # probabilities = [0.25, 0.25, 0.25, 0.25]   # default: empirical frequencies
//!
//! [schema]
//! # spec = "x1:numeric,origin:categorical,treatment:treatment,response:response"
//! treatment = "treatment"  # used with the CSV header when `spec` is absent
//! response = "response"
//! categorical = ["origin"]
//!
//! [cts]
//! ntree = 100
//! min_split = 100
//! n_reg = 3
//! # mtry, bootstrap, max_depth
//!
//! [sma]
//! ntree = 100
//! min_samples_leaf = 5
//!
//! [tune]
//! grid = [25, 50, 100]
//! folds = 5
//! # validation_fraction = 0.5   # single split instead of cross-validation
//!
//! [paths]
//! data = "train.csv"
//! model = "model.json"
//! output = "predictions.csv"
//! ```
//!
//! Every field is optional. Commands write the fully resolved configuration
//! next to their output as `<output>.config.toml`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataset::{empirical_treatment_probs, Dataset, Schema, TreatmentProbs};
use crate::ensemble::ForestParams;
use crate::error::{Result, UpliftError};
use crate::model::Algorithm;
use crate::sma::SmaParams;
use crate::tune::TuneMode;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SchemaConfig {
    pub spec: Option<String>,
    pub treatment: String,
    pub response: String,
    pub categorical: Vec<String>,
}

impl Default for SchemaConfig {
    fn default() -> Self {
        SchemaConfig {
            spec: None,
            treatment: "treatment".into(),
            response: "response".into(),
            categorical: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CtsConfig {
    pub ntree: Option<usize>,
    pub min_split: Option<usize>,
    pub n_reg: Option<usize>,
    pub mtry: Option<usize>,
    pub bootstrap: Option<usize>,
    pub max_depth: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SmaConfig {
    pub ntree: Option<usize>,
    pub mtry: Option<usize>,
    pub min_samples_leaf: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TuneConfig {
    pub grid: Option<Vec<usize>>,
    pub folds: usize,
    pub validation_fraction: Option<f64>,
}

impl Default for TuneConfig {
    fn default() -> Self {
        TuneConfig {
            grid: None,
            folds: 5,
            validation_fraction: None,
        }
    }
}

impl TuneConfig {
    pub fn mode(&self) -> TuneMode {
        match self.validation_fraction {
            Some(fraction) => TuneMode::Validation { fraction },
            None => TuneMode::CrossValidation { folds: self.folds },
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    pub data: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub output: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub algorithm: Algorithm,
    pub seed: u64,
    pub control: usize,
    pub conf_level: f64,
    pub probabilities: Option<Vec<f64>>,
    pub schema: SchemaConfig,
    pub cts: CtsConfig,
    pub sma: SmaConfig,
    pub tune: TuneConfig,
    pub paths: PathsConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            algorithm: Algorithm::Cts,
            seed: 0,
            control: 0,
            conf_level: 0.95,
            probabilities: None,
            schema: SchemaConfig::default(),
            cts: CtsConfig::default(),
            sma: SmaConfig::default(),
            tune: TuneConfig::default(),
            paths: PathsConfig::default(),
        }
    }
}

/// `<output>.config.toml`.
pub fn effective_config_path(output: &Path) -> PathBuf {
    let mut name = output.as_os_str().to_owned();
    name.push(".config.toml");
    PathBuf::from(name)
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| UpliftError::Config(e.to_string()))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| UpliftError::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| UpliftError::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_toml_string()?).map_err(|e| UpliftError::io(path, e))
    }

    /// Schema from `schema.spec`, or from the header of the CSV at `data`.
    pub fn resolve_schema(&self, data: &Path) -> Result<Schema> {
        if let Some(spec) = &self.schema.spec {
            return Schema::parse_spec(spec);
        }
        let mut rdr = csv::Reader::from_path(data).map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => UpliftError::io(data, io),
            other => UpliftError::Config(format!("{other:?}")),
        })?;
        let header: Vec<String> = rdr.headers()?.iter().map(|s| s.trim().to_string()).collect();
        Schema::from_header(
            &header,
            &self.schema.treatment,
            &self.schema.response,
            &self.schema.categorical,
        )
    }

    pub fn forest_params(&self, n_features: usize) -> ForestParams {
        let mut p = ForestParams::defaults_for(n_features);
        let c = &self.cts;
        p.ntree = c.ntree.unwrap_or(p.ntree);
        p.tree.min_split = c.min_split.unwrap_or(p.tree.min_split);
        p.tree.n_reg = c.n_reg.unwrap_or(p.tree.n_reg);
        p.tree.mtry = c.mtry.unwrap_or(p.tree.mtry);
        p.tree.max_depth = c.max_depth.or(p.tree.max_depth);
        p.bootstrap = c.bootstrap.or(p.bootstrap);
        p.seed = self.seed;
        p
    }

    pub fn sma_params(&self, n_features: usize) -> SmaParams {
        let mut p = SmaParams::defaults_for(n_features);
        p.ntree = self.sma.ntree.unwrap_or(p.ntree);
        p.mtry = self.sma.mtry.unwrap_or(p.mtry);
        p.min_samples_leaf = self.sma.min_samples_leaf.unwrap_or(p.min_samples_leaf);
        p.seed = self.seed;
        p
    }

    /// Assignment probabilities for evaluation: the configured ones, or the
    /// treatment frequencies of `data`.
    pub fn treatment_probs(&self, data: &Dataset) -> Result<TreatmentProbs> {
        match &self.probabilities {
            Some(p) => {
                let probs = TreatmentProbs::new(p.clone())?;
                if probs.len() != data.n_treatments() {
                    return Err(UpliftError::Config(format!(
                        "{} probabilities for {} treatments",
                        probs.len(),
                        data.n_treatments()
                    )));
                }
                Ok(probs)
            }
            None => empirical_treatment_probs(data),
        }
    }

    /// Copy with the schema and every algorithm parameter filled in, so that
    /// reloading it reproduces the run without consulting defaults.
    pub fn effective(&self, schema: &Schema) -> RunConfig {
        let d = schema.n_features();
        let f = self.forest_params(d);
        let s = self.sma_params(d);
        let mut out = self.clone();
        out.schema.spec = Some(schema.to_spec());
        out.cts = CtsConfig {
            ntree: Some(f.ntree),
            min_split: Some(f.tree.min_split),
            n_reg: Some(f.tree.n_reg),
            mtry: Some(f.tree.mtry),
            bootstrap: f.bootstrap,
            max_depth: f.tree.max_depth,
        };
        out.sma = SmaConfig {
            ntree: Some(s.ntree),
            mtry: Some(s.mtry),
            min_samples_leaf: Some(s.min_samples_leaf),
        };
        out
    }

    /// Writes the effective configuration next to `output`.
    pub fn write_effective(&self, schema: &Schema, output: &Path) -> Result<PathBuf> {
        let path = effective_config_path(output);
        self.effective(schema).save(&path)?;
        Ok(path)
    }
}
