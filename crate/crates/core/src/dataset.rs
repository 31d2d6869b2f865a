//! Tabular experiment data: schema, CSV ingestion, treatment probabilities
//! and treatment-stratified resampling.
//!
//! Features are stored column-major as `f64`. Categorical features hold their
//! integer codes (assigned in first-appearance order at load time) in the same
//! representation, alongside a code → name dictionary.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, UpliftError};

/// Tolerance used when checking that probability vectors and fractions sum to one.
pub const SUM_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnRole {
    NumericFeature,
    CategoricalFeature,
    Treatment,
    Response,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Numeric,
    Categorical,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub role: ColumnRole,
}

impl Column {
    pub fn new(name: impl Into<String>, role: ColumnRole) -> Self {
        Column {
            name: name.into(),
            role,
        }
    }
}

/// Ordered column declaration. Exactly one treatment and one response column,
/// at least one feature, unique names.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Column>", into = "Vec<Column>")]
pub struct Schema {
    columns: Vec<Column>,
}

impl TryFrom<Vec<Column>> for Schema {
    type Error = UpliftError;

    fn try_from(columns: Vec<Column>) -> Result<Self> {
        Schema::new(columns)
    }
}

impl From<Schema> for Vec<Column> {
    fn from(schema: Schema) -> Self {
        schema.columns
    }
}

impl Schema {
    pub fn new(columns: Vec<Column>) -> Result<Self> {
        let count = |role| columns.iter().filter(|c| c.role == role).count();
        if count(ColumnRole::Treatment) != 1 {
            return Err(UpliftError::Schema(
                "exactly one treatment column required".into(),
            ));
        }
        if count(ColumnRole::Response) != 1 {
            return Err(UpliftError::Schema(
                "exactly one response column required".into(),
            ));
        }
        if count(ColumnRole::NumericFeature) + count(ColumnRole::CategoricalFeature) == 0 {
            return Err(UpliftError::Schema(
                "at least one feature column required".into(),
            ));
        }
        let mut seen = std::collections::HashSet::new();
        for c in &columns {
            if !seen.insert(c.name.as_str()) {
                return Err(UpliftError::Schema(format!(
                    "duplicate column name {:?}",
                    c.name
                )));
            }
        }
        Ok(Schema { columns })
    }

    /// Builds a schema from a CSV header: the named treatment and response
    /// columns take those roles, `categorical` names become categorical
    /// features and every other column is a numeric feature.
    pub fn from_header(
        header: &[String],
        treatment: &str,
        response: &str,
        categorical: &[String],
    ) -> Result<Self> {
        for name in [treatment, response]
            .into_iter()
            .chain(categorical.iter().map(String::as_str))
        {
            if !header.iter().any(|h| h == name) {
                return Err(UpliftError::HeaderMismatch(format!(
                    "column {name:?} not in header"
                )));
            }
        }
        let columns = header
            .iter()
            .map(|h| {
                let role = if h == treatment {
                    ColumnRole::Treatment
                } else if h == response {
                    ColumnRole::Response
                } else if categorical.iter().any(|c| c == h) {
                    ColumnRole::CategoricalFeature
                } else {
                    ColumnRole::NumericFeature
                };
                Column::new(h.clone(), role)
            })
            .collect();
        Schema::new(columns)
    }

    /// Parses the compact `name:role,name:role` form. Roles are `numeric`,
    /// `categorical`, `treatment` and `response`.
    pub fn parse_spec(spec: &str) -> Result<Self> {
        let mut columns = Vec::new();
        for item in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (name, role) = item
                .rsplit_once(':')
                .ok_or_else(|| UpliftError::Schema(format!("expected name:role, got {item:?}")))?;
            let role = match role.trim() {
                "numeric" | "n" => ColumnRole::NumericFeature,
                "categorical" | "c" => ColumnRole::CategoricalFeature,
                "treatment" | "t" => ColumnRole::Treatment,
                "response" | "y" => ColumnRole::Response,
                other => return Err(UpliftError::Schema(format!("unknown role {other:?}"))),
            };
            columns.push(Column::new(name.trim(), role));
        }
        Schema::new(columns)
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn feature_columns(&self) -> impl Iterator<Item = &Column> {
        self.columns.iter().filter(|c| {
            matches!(
                c.role,
                ColumnRole::NumericFeature | ColumnRole::CategoricalFeature
            )
        })
    }

    pub fn feature_kinds(&self) -> Vec<FeatureKind> {
        self.feature_columns()
            .map(|c| match c.role {
                ColumnRole::CategoricalFeature => FeatureKind::Categorical,
                _ => FeatureKind::Numeric,
            })
            .collect()
    }

    pub fn n_features(&self) -> usize {
        self.feature_columns().count()
    }

    pub fn treatment_name(&self) -> &str {
        self.by_role(ColumnRole::Treatment)
    }

    pub fn response_name(&self) -> &str {
        self.by_role(ColumnRole::Response)
    }

    fn by_role(&self, role: ColumnRole) -> &str {
        self.columns
            .iter()
            .find(|c| c.role == role)
            .map(|c| c.name.as_str())
            .expect("schema invariant")
    }

    /// Inverse of [`Schema::parse_spec`].
    pub fn to_spec(&self) -> String {
        self.columns
            .iter()
            .map(|c| {
                let role = match c.role {
                    ColumnRole::NumericFeature => "numeric",
                    ColumnRole::CategoricalFeature => "categorical",
                    ColumnRole::Treatment => "treatment",
                    ColumnRole::Response => "response",
                };
                format!("{}:{role}", c.name)
            })
            .collect::<Vec<_>>()
            .join(",")
    }

    /// Identity of the feature layout, compared before a model is applied to data.
    pub fn fingerprint(&self) -> String {
        self.feature_columns()
            .map(|c| {
                let tag = if c.role == ColumnRole::CategoricalFeature {
                    'c'
                } else {
                    'n'
                };
                format!("{tag}:{}", c.name)
            })
            .collect::<Vec<_>>()
            .join(",")
    }
}

/// Category names per categorical column, indexed by code.
pub type Dictionaries = BTreeMap<String, Vec<String>>;

/// Per-treatment assignment probabilities of the experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct TreatmentProbs(Vec<f64>);

impl TryFrom<Vec<f64>> for TreatmentProbs {
    type Error = UpliftError;

    fn try_from(probs: Vec<f64>) -> Result<Self> {
        TreatmentProbs::new(probs)
    }
}

impl From<TreatmentProbs> for Vec<f64> {
    fn from(p: TreatmentProbs) -> Self {
        p.0
    }
}

impl TreatmentProbs {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.len() < 2 {
            return Err(UpliftError::param("at least two treatment probabilities required"));
        }
        if let Some(t) = probs.iter().position(|p| !(p.is_finite() && *p > 0.0)) {
            return Err(UpliftError::param(format!(
                "probability of treatment {t} must be strictly positive"
            )));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(UpliftError::param(format!(
                "treatment probabilities sum to {sum}, expected 1"
            )));
        }
        Ok(TreatmentProbs(probs))
    }

    pub fn get(&self, t: usize) -> f64 {
        self.0[t]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// One feature column. Categorical columns carry their dictionary and store
/// codes as exact small integers.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureColumn {
    pub values: Vec<f64>,
    pub dictionary: Option<Vec<String>>,
}

impl FeatureColumn {
    pub fn numeric(values: Vec<f64>) -> Self {
        FeatureColumn {
            values,
            dictionary: None,
        }
    }

    pub fn categorical(codes: Vec<u32>, dictionary: Vec<String>) -> Self {
        FeatureColumn {
            values: codes.into_iter().map(f64::from).collect(),
            dictionary: Some(dictionary),
        }
    }
}

/// Immutable experiment dataset `(x, t, y)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    schema: Schema,
    features: Vec<FeatureColumn>,
    treatment: Vec<usize>,
    response: Vec<f64>,
    n_treatments: usize,
}

impl Dataset {
    /// Validates column lengths, finiteness and the dense `0..=K` label range.
    pub fn new(
        schema: Schema,
        features: Vec<FeatureColumn>,
        treatment: Vec<usize>,
        response: Vec<f64>,
    ) -> Result<Self> {
        let present = dense_treatment_count(&treatment)?;
        Dataset::with_treatment_count(schema, features, treatment, response, present)
    }

    /// Like [`Dataset::new`] but with an explicit treatment count, so that a
    /// subset may lack some labels.
    pub fn with_treatment_count(
        schema: Schema,
        features: Vec<FeatureColumn>,
        treatment: Vec<usize>,
        response: Vec<f64>,
        n_treatments: usize,
    ) -> Result<Self> {
        let n = treatment.len();
        if response.len() != n {
            return Err(UpliftError::param("response length differs from treatment length"));
        }
        let kinds = schema.feature_kinds();
        if kinds.len() != features.len() {
            return Err(UpliftError::SchemaMismatch(format!(
                "schema declares {} features, got {}",
                kinds.len(),
                features.len()
            )));
        }
        for (j, (col, kind)) in features.iter().zip(&kinds).enumerate() {
            if col.values.len() != n {
                return Err(UpliftError::param(format!("feature {j} has wrong length")));
            }
            if (*kind == FeatureKind::Categorical) != col.dictionary.is_some() {
                return Err(UpliftError::SchemaMismatch(format!(
                    "feature {j} kind does not match its column"
                )));
            }
        }
        if n_treatments < 2 {
            return Err(UpliftError::param("at least two treatments required"));
        }
        if let Some(t) = treatment.iter().find(|&&t| t >= n_treatments) {
            return Err(UpliftError::param(format!(
                "treatment label {t} outside 0..{n_treatments}"
            )));
        }
        if response.iter().any(|y| !y.is_finite()) {
            return Err(UpliftError::param("response values must be finite"));
        }
        Ok(Dataset {
            schema,
            features,
            treatment,
            response,
            n_treatments,
        })
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn len(&self) -> usize {
        self.treatment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.treatment.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.features.len()
    }

    /// `K + 1`.
    pub fn n_treatments(&self) -> usize {
        self.n_treatments
    }

    pub fn feature(&self, j: usize) -> &[f64] {
        &self.features[j].values
    }

    pub fn features(&self) -> &[FeatureColumn] {
        &self.features
    }

    pub fn treatment(&self) -> &[usize] {
        &self.treatment
    }

    pub fn response(&self) -> &[f64] {
        &self.response
    }

    pub fn feature_kinds(&self) -> Vec<FeatureKind> {
        self.schema.feature_kinds()
    }

    pub fn dictionaries(&self) -> Dictionaries {
        self.schema
            .feature_columns()
            .zip(&self.features)
            .filter_map(|(c, f)| f.dictionary.clone().map(|d| (c.name.clone(), d)))
            .collect()
    }

    /// Copies row `i`'s feature vector into `buf`.
    pub fn row_into(&self, i: usize, buf: &mut Vec<f64>) {
        buf.clear();
        buf.extend(self.features.iter().map(|f| f.values[i]));
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        let mut buf = Vec::with_capacity(self.n_features());
        self.row_into(i, &mut buf);
        buf
    }

    pub fn treatment_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_treatments];
        for &t in &self.treatment {
            counts[t] += 1;
        }
        counts
    }

    /// Row indices grouped by treatment label, each group ascending.
    pub fn rows_by_treatment(&self) -> Vec<Vec<usize>> {
        let mut groups = vec![Vec::new(); self.n_treatments];
        for (i, &t) in self.treatment.iter().enumerate() {
            groups[t].push(i);
        }
        groups
    }

    /// New dataset holding the given rows (duplicates allowed), in order.
    /// Dictionaries and the treatment count are preserved.
    pub fn subset(&self, rows: &[usize]) -> Dataset {
        Dataset {
            schema: self.schema.clone(),
            features: self
                .features
                .iter()
                .map(|f| FeatureColumn {
                    values: rows.iter().map(|&i| f.values[i]).collect(),
                    dictionary: f.dictionary.clone(),
                })
                .collect(),
            treatment: rows.iter().map(|&i| self.treatment[i]).collect(),
            response: rows.iter().map(|&i| self.response[i]).collect(),
            n_treatments: self.n_treatments,
        }
    }

    /// Same rows with every response multiplied by `c`.
    pub fn with_scaled_response(&self, c: f64) -> Dataset {
        let mut out = self.clone();
        out.response.iter_mut().for_each(|y| *y *= c);
        out
    }
}

fn dense_treatment_count(treatment: &[usize]) -> Result<usize> {
    let Some(&max) = treatment.iter().max() else {
        return Err(UpliftError::EmptyDataset);
    };
    let mut seen = vec![false; max + 1];
    for &t in treatment {
        seen[t] = true;
    }
    let missing: Vec<String> = seen
        .iter()
        .enumerate()
        .filter(|(_, s)| !**s)
        .map(|(t, _)| t.to_string())
        .collect();
    if !missing.is_empty() {
        return Err(UpliftError::NonDenseTreatments(format!(
            "labels 0..={max} expected, missing {}",
            missing.join(",")
        )));
    }
    Ok(max + 1)
}

/// Reads a CSV file with the given schema.
pub fn load_csv(path: impl AsRef<Path>, schema: &Schema) -> Result<Dataset> {
    load_csv_with_dictionaries(path, schema, &Dictionaries::new(), None)
}

/// Reads a CSV file, seeding categorical codes from existing dictionaries
/// (typically those persisted with a model). Unseen categories extend the
/// dictionary with fresh codes. When `n_treatments` is given the dense-label
/// check is replaced by a range check against it.
pub fn load_csv_with_dictionaries(
    path: impl AsRef<Path>,
    schema: &Schema,
    dictionaries: &Dictionaries,
    n_treatments: Option<usize>,
) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| UpliftError::io(path, e))?;
    read_csv(file, schema, dictionaries, n_treatments)
}

pub fn read_csv<R: Read>(
    reader: R,
    schema: &Schema,
    dictionaries: &Dictionaries,
    n_treatments: Option<usize>,
) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(|s| s.trim().to_string()).collect();
    let expected: Vec<&str> = schema.columns().iter().map(|c| c.name.as_str()).collect();
    if header != expected {
        return Err(UpliftError::HeaderMismatch(format!(
            "expected [{}], found [{}]",
            expected.join(","),
            header.join(",")
        )));
    }

    struct Categorical {
        codes: Vec<u32>,
        dictionary: Vec<String>,
        lookup: HashMap<String, u32>,
    }
    enum Sink {
        Numeric(Vec<f64>),
        Categorical(Categorical),
        Treatment,
        Response,
    }
    let mut sinks: Vec<Sink> = schema
        .columns()
        .iter()
        .map(|c| match c.role {
            ColumnRole::NumericFeature => Sink::Numeric(Vec::new()),
            ColumnRole::CategoricalFeature => {
                let dictionary = dictionaries.get(&c.name).cloned().unwrap_or_default();
                let lookup = dictionary
                    .iter()
                    .enumerate()
                    .map(|(i, s)| (s.clone(), i as u32))
                    .collect();
                Sink::Categorical(Categorical {
                    codes: Vec::new(),
                    dictionary,
                    lookup,
                })
            }
            ColumnRole::Treatment => Sink::Treatment,
            ColumnRole::Response => Sink::Response,
        })
        .collect();
    let mut treatment = Vec::new();
    let mut response = Vec::new();

    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != sinks.len() {
            return Err(UpliftError::Parse {
                line,
                column: String::new(),
                message: format!("expected {} fields, found {}", sinks.len(), record.len()),
            });
        }
        for ((cell, sink), col) in record.iter().zip(sinks.iter_mut()).zip(schema.columns()) {
            let cell = cell.trim();
            let err = |message: String| UpliftError::Parse {
                line,
                column: col.name.clone(),
                message,
            };
            if cell.is_empty() {
                return Err(err("missing value".into()));
            }
            match sink {
                Sink::Numeric(values) => {
                    let v: f64 = cell
                        .parse()
                        .map_err(|_| err(format!("unparseable number {cell:?}")))?;
                    if !v.is_finite() {
                        return Err(err(format!("non-finite number {cell:?}")));
                    }
                    values.push(v);
                }
                Sink::Categorical(cat) => {
                    let code = match cat.lookup.get(cell) {
                        Some(&code) => code,
                        None => {
                            let code = cat.dictionary.len() as u32;
                            cat.dictionary.push(cell.to_string());
                            cat.lookup.insert(cell.to_string(), code);
                            code
                        }
                    };
                    cat.codes.push(code);
                }
                Sink::Treatment => {
                    let t: usize = cell.parse().map_err(|_| {
                        err(format!("treatment label {cell:?} is not a non-negative integer"))
                    })?;
                    treatment.push(t);
                }
                Sink::Response => {
                    let y: f64 = cell
                        .parse()
                        .map_err(|_| err(format!("unparseable response {cell:?}")))?;
                    if !y.is_finite() {
                        return Err(err(format!("non-finite response {cell:?}")));
                    }
                    response.push(y);
                }
            }
        }
    }
    if treatment.is_empty() {
        return Err(UpliftError::EmptyDataset);
    }

    let features = sinks
        .into_iter()
        .filter_map(|s| match s {
            Sink::Numeric(values) => Some(FeatureColumn::numeric(values)),
            Sink::Categorical(cat) => Some(FeatureColumn::categorical(cat.codes, cat.dictionary)),
            _ => None,
        })
        .collect();
    let schema = schema.clone();
    match n_treatments {
        Some(k) => Dataset::with_treatment_count(schema, features, treatment, response, k),
        None => Dataset::new(schema, features, treatment, response),
    }
}

/// Writes the dataset as CSV in schema column order; categorical codes are
/// written back as their category names.
pub fn write_csv<W: Write>(data: &Dataset, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(data.schema().columns().iter().map(|c| c.name.as_str()))?;
    let mut record: Vec<String> = Vec::with_capacity(data.schema().columns().len());
    for i in 0..data.len() {
        record.clear();
        let mut feature = 0;
        for col in data.schema().columns() {
            match col.role {
                ColumnRole::Treatment => record.push(data.treatment[i].to_string()),
                ColumnRole::Response => record.push(data.response[i].to_string()),
                _ => {
                    let f = &data.features[feature];
                    let v = f.values[i];
                    record.push(match &f.dictionary {
                        Some(dict) => dict[v as usize].clone(),
                        None => v.to_string(),
                    });
                    feature += 1;
                }
            }
        }
        wtr.write_record(&record)?;
    }
    wtr.flush().map_err(|e| UpliftError::io("<csv writer>", e))?;
    Ok(())
}

pub fn save_csv(data: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| UpliftError::io(path, e))?;
    write_csv(data, std::io::BufWriter::new(file))
}

/// `count(t) / n` for every label; fails if a label has no rows.
pub fn empirical_treatment_probs(data: &Dataset) -> Result<TreatmentProbs> {
    if data.is_empty() {
        return Err(UpliftError::EmptyDataset);
    }
    let counts = data.treatment_counts();
    if let Some(t) = counts.iter().position(|&c| c == 0) {
        return Err(UpliftError::TreatmentAbsent(t));
    }
    let n = data.len() as f64;
    TreatmentProbs::new(counts.iter().map(|&c| c as f64 / n).collect())
}

/// Splits `total` into integer parts proportional to `weights` (which must
/// sum to a positive value). Floors first, then hands the residual to the
/// largest fractional parts, lower index first on ties.
pub fn largest_remainder(total: usize, weights: &[f64]) -> Vec<usize> {
    let wsum: f64 = weights.iter().sum();
    let quotas: Vec<f64> = weights.iter().map(|w| total as f64 * w / wsum).collect();
    let mut parts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = parts.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = quotas[a] - quotas[a].floor();
        let fb = quotas[b] - quotas[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &i in order.iter().take(total.saturating_sub(assigned)) {
        parts[i] += 1;
    }
    parts
}

/// Row indices of a bootstrap resample of size `b` that keeps the per-treatment
/// proportions of `data`. Rows are grouped by treatment in the output.
pub fn stratified_bootstrap_indices<R: Rng + ?Sized>(
    data: &Dataset,
    b: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    if b == 0 {
        return Err(UpliftError::param("bootstrap size must be at least 1"));
    }
    if b > data.len() {
        return Err(UpliftError::param(format!(
            "bootstrap size {b} exceeds dataset size {}",
            data.len()
        )));
    }
    let groups = data.rows_by_treatment();
    let weights: Vec<f64> = groups.iter().map(|g| g.len() as f64).collect();
    let alloc = largest_remainder(b, &weights);
    let mut out = Vec::with_capacity(b);
    for (group, &count) in groups.iter().zip(&alloc) {
        for _ in 0..count {
            out.push(group[rng.random_range(0..group.len())]);
        }
    }
    Ok(out)
}

pub fn stratified_bootstrap<R: Rng + ?Sized>(
    data: &Dataset,
    b: usize,
    rng: &mut R,
) -> Result<Dataset> {
    Ok(data.subset(&stratified_bootstrap_indices(data, b, rng)?))
}

fn check_fractions(fractions: &[f64]) -> Result<()> {
    if fractions.is_empty() {
        return Err(UpliftError::param("fractions must not be empty"));
    }
    if fractions.iter().any(|f| !(f.is_finite() && *f > 0.0)) {
        return Err(UpliftError::param("fractions must be positive"));
    }
    let sum: f64 = fractions.iter().sum();
    if (sum - 1.0).abs() > SUM_TOLERANCE {
        return Err(UpliftError::param(format!("fractions sum to {sum}, expected 1")));
    }
    Ok(())
}

/// Disjoint, exhaustive partition of row indices. Within every treatment the
/// rows are shuffled and allocated to parts by largest-remainder rounding.
/// Each part is returned in ascending row order.
pub fn stratified_split_indices<R: Rng + ?Sized>(
    data: &Dataset,
    fractions: &[f64],
    rng: &mut R,
) -> Result<Vec<Vec<usize>>> {
    check_fractions(fractions)?;
    let mut parts = vec![Vec::new(); fractions.len()];
    for mut group in data.rows_by_treatment() {
        group.shuffle(rng);
        let alloc = largest_remainder(group.len(), fractions);
        let mut start = 0;
        for (part, count) in parts.iter_mut().zip(alloc) {
            part.extend_from_slice(&group[start..start + count]);
            start += count;
        }
    }
    for part in &mut parts {
        part.sort_unstable();
    }
    Ok(parts)
}

pub fn stratified_split<R: Rng + ?Sized>(
    data: &Dataset,
    fractions: &[f64],
    rng: &mut R,
) -> Result<Vec<Dataset>> {
    Ok(stratified_split_indices(data, fractions, rng)?
        .iter()
        .map(|rows| data.subset(rows))
        .collect())
}

/// `k` treatment-stratified folds of (nearly) equal size.
pub fn stratified_folds<R: Rng + ?Sized>(
    data: &Dataset,
    k: usize,
    rng: &mut R,
) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(UpliftError::param("at least two folds required"));
    }
    stratified_split_indices(data, &vec![1.0 / k as f64; k], rng)
}
