//! Versioned JSON model documents.
//!
//! ```text
//! { "format_version": 1, "algorithm": "cts" | "sma-rf", "schema": [...],
//!   "dictionaries": {...}, "params": {...}, "trees" | "forests": [...] }
//! ```
//!
//! Trees are stored as flat node arrays; internal nodes reference their
//! children by index and keep their own estimates and counts.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Dictionaries, FeatureKind, Schema};
use crate::ensemble::Forest;
use crate::error::{Result, UpliftError};
use crate::evaluation::PolicyPrediction;
use crate::sma::SmaModel;
use crate::tree::NodeKind;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "cts")]
    Cts,
    #[serde(rename = "sma-rf")]
    SmaRf,
}

impl std::str::FromStr for Algorithm {
    type Err = UpliftError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cts" => Ok(Algorithm::Cts),
            "sma-rf" | "sma" => Ok(Algorithm::SmaRf),
            other => Err(UpliftError::param(format!("unknown algorithm {other:?}"))),
        }
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Algorithm::Cts => "cts",
            Algorithm::SmaRf => "sma-rf",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algorithm")]
pub enum UpliftModel {
    #[serde(rename = "cts")]
    Cts(Forest),
    #[serde(rename = "sma-rf")]
    SmaRf(SmaModel),
}

#[derive(Serialize)]
struct DocumentRef<'a> {
    format_version: u32,
    #[serde(flatten)]
    model: &'a UpliftModel,
}

#[derive(Deserialize)]
struct Document {
    #[allow(dead_code)]
    format_version: u32,
    #[serde(flatten)]
    model: UpliftModel,
}

impl From<Forest> for UpliftModel {
    fn from(f: Forest) -> Self {
        UpliftModel::Cts(f)
    }
}

impl From<SmaModel> for UpliftModel {
    fn from(m: SmaModel) -> Self {
        UpliftModel::SmaRf(m)
    }
}

impl UpliftModel {
    pub fn algorithm(&self) -> Algorithm {
        match self {
            UpliftModel::Cts(_) => Algorithm::Cts,
            UpliftModel::SmaRf(_) => Algorithm::SmaRf,
        }
    }

    pub fn schema(&self) -> &Schema {
        match self {
            UpliftModel::Cts(f) => &f.schema,
            UpliftModel::SmaRf(m) => &m.schema,
        }
    }

    pub fn dictionaries(&self) -> &Dictionaries {
        match self {
            UpliftModel::Cts(f) => &f.dictionaries,
            UpliftModel::SmaRf(m) => &m.dictionaries,
        }
    }

    pub fn n_treatments(&self) -> usize {
        match self {
            UpliftModel::Cts(f) => f.n_treatments,
            UpliftModel::SmaRf(m) => m.n_treatments(),
        }
    }

    pub fn n_features(&self) -> usize {
        self.schema().n_features()
    }

    pub fn predict(&self, x: &[f64]) -> Result<PolicyPrediction> {
        match self {
            UpliftModel::Cts(f) => f.predict(x),
            UpliftModel::SmaRf(m) => m.predict(x),
        }
    }

    /// Prediction for a vector already known to have the right length.
    pub fn predict_unchecked(&self, x: &[f64]) -> PolicyPrediction {
        match self {
            UpliftModel::Cts(f) => PolicyPrediction::from_estimates(f.predict_estimates(x)),
            UpliftModel::SmaRf(m) => PolicyPrediction::from_estimates(
                m.forests.iter().map(|f| f.predict(x)).collect(),
            ),
        }
    }

    /// Fails unless `data` has this model's feature layout and treatment count.
    pub fn check_compatible(&self, data: &Dataset) -> Result<()> {
        if data.schema().fingerprint() != self.schema().fingerprint() {
            return Err(UpliftError::SchemaMismatch(format!(
                "data features [{}] differ from model features [{}]",
                data.schema().fingerprint(),
                self.schema().fingerprint()
            )));
        }
        if data.n_treatments() != self.n_treatments() {
            return Err(UpliftError::SchemaMismatch(format!(
                "data has {} treatments, model {}",
                data.n_treatments(),
                self.n_treatments()
            )));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&DocumentRef {
            format_version: FORMAT_VERSION,
            model: self,
        })?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| UpliftError::ModelFormat(e.to_string()))?;
        match value.get("format_version") {
            None => return Err(UpliftError::ModelFormat("missing format_version".into())),
            Some(v) if v.as_u64() == Some(u64::from(FORMAT_VERSION)) => {}
            Some(v) => {
                return Err(UpliftError::VersionMismatch {
                    found: match v {
                        serde_json::Value::String(s) => s.clone(),
                        other => other.to_string(),
                    },
                    supported: FORMAT_VERSION,
                })
            }
        }
        let doc: Document =
            serde_json::from_value(value).map_err(|e| UpliftError::ModelFormat(e.to_string()))?;
        doc.model.validate()?;
        Ok(doc.model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()?).map_err(|e| UpliftError::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| UpliftError::io(path, e))?;
        Self::from_json(&text)
    }

    /// Structural checks on a deserialized document.
    fn validate(&self) -> Result<()> {
        let kinds = self.schema().feature_kinds();
        let k = self.n_treatments();
        let bad = |msg: String| Err(UpliftError::ModelFormat(msg));
        let check_kind = |i: usize, kind: &NodeKind, len: usize| -> Result<()> {
            if let NodeKind::Internal { split, left, right } = kind {
                if *left <= i || *right <= i || *left >= len || *right >= len {
                    return bad(format!("node {i} has invalid child indices"));
                }
                match kinds.get(split.feature) {
                    Some(&kind) if split.matches_kind(kind) => {}
                    _ => return bad(format!("node {i} splits on invalid feature {}", split.feature)),
                }
            }
            Ok(())
        };
        match self {
            UpliftModel::Cts(forest) => {
                if forest.trees.is_empty() {
                    return bad("forest has no trees".into());
                }
                let fp = forest.schema.fingerprint();
                for tree in &forest.trees {
                    if tree.nodes.is_empty() || tree.fingerprint != fp {
                        return bad("tree does not match the model schema".into());
                    }
                    for (i, node) in tree.nodes.iter().enumerate() {
                        if node.estimates.len() != k || node.counts.len() != k {
                            return bad(format!("node {i} has wrong treatment count"));
                        }
                        if node.estimates.iter().any(|e| !e.is_finite()) {
                            return bad(format!("node {i} has non-finite estimates"));
                        }
                        check_kind(i, &node.kind, tree.nodes.len())?;
                    }
                }
            }
            UpliftModel::SmaRf(model) => {
                if model.forests.len() < 2 {
                    return bad("at least two per-treatment forests required".into());
                }
                for forest in &model.forests {
                    if forest.trees.is_empty() {
                        return bad("forest has no trees".into());
                    }
                    for tree in &forest.trees {
                        if tree.nodes.is_empty() {
                            return bad("empty tree".into());
                        }
                        for (i, node) in tree.nodes.iter().enumerate() {
                            check_kind(i, &node.kind, tree.nodes.len())?;
                        }
                    }
                }
            }
        }
        for (col, kind) in self.schema().feature_columns().zip(&kinds) {
            if *kind == FeatureKind::Categorical && !self.dictionaries().contains_key(&col.name) {
                return bad(format!("missing dictionary for {}", col.name));
            }
        }
        Ok(())
    }
}

pub fn save_model(model: &UpliftModel, path: impl AsRef<Path>) -> Result<()> {
    model.save(path)
}

pub fn load_model(path: impl AsRef<Path>) -> Result<UpliftModel> {
    UpliftModel::load(path)
}
