//! Mixed nominal/numeric tables with a binary target: schema parsing, CSV
//! loading, z-score normalization and k-fold splitting.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Label used for a missing nominal value.
pub const MISSING_NOMINAL: &str = "?";

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("I/O error reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed schema line {line}: {message}")]
    Schema { line: usize, message: String },
    #[error("invalid schema: {0}")]
    InvalidSchema(String),
    #[error("missing column `{0}` in header")]
    MissingColumn(String),
    #[error("type mismatch at row {row}, column `{column}`: cannot parse {value:?} as a number")]
    TypeMismatch {
        row: usize,
        column: String,
        value: String,
    },
    #[error("row {row}: missing target label")]
    MissingTarget { row: usize },
    #[error("malformed delimited text at row {row}: {message}")]
    Csv { row: usize, message: String },
    #[error("cannot normalize an empty set of rows")]
    EmptyInput,
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("cannot split {rows} rows into {k} folds")]
    KTooLarge { rows: usize, k: usize },
}

pub type Result<T> = std::result::Result<T, DatasetError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttributeKind {
    Nominal,
    Numeric,
    Identifier,
    Target,
}

impl AttributeKind {
    fn parse(s: &str) -> Option<Self> {
        match s {
            "nominal" => Some(Self::Nominal),
            "numeric" => Some(Self::Numeric),
            "identifier" => Some(Self::Identifier),
            "target" => Some(Self::Target),
            _ => None,
        }
    }
}

impl fmt::Display for AttributeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Nominal => "nominal",
            Self::Numeric => "numeric",
            Self::Identifier => "identifier",
            Self::Target => "target",
        })
    }
}

/// Binary class. `Positive` is class `1`, `Negative` is `-1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Class {
    Negative,
    Positive,
}

impl Class {
    pub fn from_sign(sign: f64) -> Self {
        if sign > 0.0 {
            Class::Positive
        } else {
            Class::Negative
        }
    }

    /// `+1.0` or `-1.0`.
    pub fn sign(self) -> f64 {
        match self {
            Class::Positive => 1.0,
            Class::Negative => -1.0,
        }
    }

    /// `1.0` for positive, `0.0` for negative.
    pub fn indicator(self) -> f64 {
        match self {
            Class::Positive => 1.0,
            Class::Negative => 0.0,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Class::Positive => Class::Negative,
            Class::Negative => Class::Positive,
        }
    }
}

impl fmt::Display for Class {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Class::Positive => "1",
            Class::Negative => "-1",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attribute {
    pub name: String,
    pub kind: AttributeKind,
}

/// Ordered attribute list. Attribute indices are zero-based positions in this
/// list; reports print them one-based.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "SchemaRepr", into = "SchemaRepr")]
pub struct Schema {
    attributes: Vec<Attribute>,
    positive_label: String,
    slots: Vec<Slot>,
}

#[derive(Serialize, Deserialize)]
struct SchemaRepr {
    attributes: Vec<Attribute>,
    positive_label: String,
}

impl TryFrom<SchemaRepr> for Schema {
    type Error = DatasetError;

    fn try_from(repr: SchemaRepr) -> Result<Self> {
        Schema::new(repr.attributes, repr.positive_label)
    }
}

impl From<Schema> for SchemaRepr {
    fn from(s: Schema) -> Self {
        SchemaRepr {
            attributes: s.attributes,
            positive_label: s.positive_label,
        }
    }
}

/// Where an attribute's value lives inside a [`Record`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Slot {
    Nominal(usize),
    Numeric(usize),
    Identifier(usize),
    Target,
}

impl Schema {
    pub fn new(attributes: Vec<Attribute>, positive_label: impl Into<String>) -> Result<Self> {
        let mut seen = HashSet::new();
        for a in &attributes {
            if !seen.insert(a.name.as_str()) {
                return Err(DatasetError::InvalidSchema(format!(
                    "duplicate attribute name `{}`",
                    a.name
                )));
            }
        }
        let targets = attributes
            .iter()
            .filter(|a| a.kind == AttributeKind::Target)
            .count();
        if targets != 1 {
            return Err(DatasetError::InvalidSchema(format!(
                "expected exactly one target attribute, found {targets}"
            )));
        }
        if !attributes.iter().any(|a| a.kind == AttributeKind::Numeric) {
            return Err(DatasetError::InvalidSchema(
                "at least one numeric attribute is required".into(),
            ));
        }
        let positive_label = positive_label.into();
        if positive_label.is_empty() {
            return Err(DatasetError::InvalidSchema("positive_label is empty".into()));
        }
        let mut schema = Schema {
            attributes,
            positive_label,
            slots: Vec::new(),
        };
        schema.index_slots();
        Ok(schema)
    }

    fn index_slots(&mut self) {
        let (mut nom, mut num, mut id) = (0, 0, 0);
        self.slots = self
            .attributes
            .iter()
            .map(|a| match a.kind {
                AttributeKind::Nominal => {
                    nom += 1;
                    Slot::Nominal(nom - 1)
                }
                AttributeKind::Numeric => {
                    num += 1;
                    Slot::Numeric(num - 1)
                }
                AttributeKind::Identifier => {
                    id += 1;
                    Slot::Identifier(id - 1)
                }
                AttributeKind::Target => Slot::Target,
            })
            .collect();
    }

    /// Parses `name = kind` lines plus one `positive_label = <text>` line.
    /// Blank lines and `#` comments are ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut attributes = Vec::new();
        let mut positive = None;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| DatasetError::Schema {
                line: i + 1,
                message: "expected `name = value`".into(),
            })?;
            let (key, value) = (key.trim(), value.trim());
            if key == "positive_label" {
                positive = Some(value.to_string());
                continue;
            }
            let kind = AttributeKind::parse(value).ok_or_else(|| DatasetError::Schema {
                line: i + 1,
                message: format!("unknown attribute kind `{value}`"),
            })?;
            attributes.push(Attribute {
                name: key.to_string(),
                kind,
            });
        }
        let positive = positive.ok_or_else(|| {
            DatasetError::InvalidSchema("missing `positive_label = <text>` line".into())
        })?;
        Schema::new(attributes, positive)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| DatasetError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Schema::parse(&text)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for a in &self.attributes {
            out.push_str(&format!("{} = {}\n", a.name, a.kind));
        }
        out.push_str(&format!("positive_label = {}\n", self.positive_label));
        out
    }

    pub fn attributes(&self) -> &[Attribute] {
        &self.attributes
    }

    pub fn attribute(&self, index: usize) -> Option<&Attribute> {
        self.attributes.get(index)
    }

    pub fn positive_label(&self) -> &str {
        &self.positive_label
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.attributes.iter().position(|a| a.name == name)
    }

    pub fn indices_of(&self, kind: AttributeKind) -> Vec<usize> {
        self.attributes
            .iter()
            .enumerate()
            .filter(|(_, a)| a.kind == kind)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn nominal_indices(&self) -> Vec<usize> {
        self.indices_of(AttributeKind::Nominal)
    }

    pub fn numeric_count(&self) -> usize {
        self.indices_of(AttributeKind::Numeric).len()
    }

    pub fn numeric_names(&self) -> Vec<&str> {
        self.attributes
            .iter()
            .filter(|a| a.kind == AttributeKind::Numeric)
            .map(|a| a.name.as_str())
            .collect()
    }

    /// Position of a nominal attribute within [`Record::nominal`].
    pub fn nominal_slot(&self, index: usize) -> Option<usize> {
        match self.slots.get(index) {
            Some(Slot::Nominal(s)) => Some(*s),
            _ => None,
        }
    }

    /// Short stable digest of the schema text.
    pub fn fingerprint(&self) -> String {
        let digest = Sha256::digest(self.to_text().as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn class_of(&self, label: &str) -> Class {
        if label == self.positive_label {
            Class::Positive
        } else {
            Class::Negative
        }
    }
}

/// One row. Values are stored by kind in schema order; identifiers are kept
/// verbatim but never used for modeling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub nominal: Vec<String>,
    pub numeric: Vec<f64>,
    pub identifiers: Vec<String>,
    pub target: Option<Class>,
}

#[derive(Debug, Clone)]
pub struct DataTable {
    schema: Arc<Schema>,
    rows: Vec<Record>,
}

impl DataTable {
    pub fn new(schema: Arc<Schema>, rows: Vec<Record>) -> Result<Self> {
        let nom = schema.nominal_indices().len();
        let num = schema.numeric_count();
        let ids = schema.indices_of(AttributeKind::Identifier).len();
        for (i, r) in rows.iter().enumerate() {
            if r.nominal.len() != nom || r.numeric.len() != num || r.identifiers.len() != ids {
                return Err(DatasetError::Csv {
                    row: i + 1,
                    message: "record arity does not match schema".into(),
                });
            }
        }
        Ok(DataTable { schema, rows })
    }

    pub fn empty(schema: Arc<Schema>) -> Self {
        DataTable {
            schema,
            rows: Vec::new(),
        }
    }

    /// Loads a labeled table. Every row must carry a target value.
    pub fn load(path: impl AsRef<Path>, schema: Arc<Schema>) -> Result<Self> {
        load_table(path, schema, true)
    }

    /// Loads a table whose target column may be absent (forecast input).
    pub fn load_unlabeled(path: impl AsRef<Path>, schema: Arc<Schema>) -> Result<Self> {
        load_table(path, schema, false)
    }

    pub fn from_reader<R: std::io::Read>(
        reader: R,
        schema: Arc<Schema>,
        require_target: bool,
    ) -> Result<Self> {
        read_table(reader, schema, require_target)
    }

    pub fn schema(&self) -> &Arc<Schema> {
        &self.schema
    }

    pub fn rows(&self) -> &[Record] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn numeric_rows(&self) -> Vec<Vec<f64>> {
        self.rows.iter().map(|r| r.numeric.clone()).collect()
    }

    /// Targets; rows without a target are reported as an error.
    pub fn targets(&self) -> Result<Vec<Class>> {
        self.rows
            .iter()
            .enumerate()
            .map(|(i, r)| r.target.ok_or(DatasetError::MissingTarget { row: i + 1 }))
            .collect()
    }

    pub fn subset(&self, indices: &[usize]) -> DataTable {
        DataTable {
            schema: Arc::clone(&self.schema),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
        }
    }

    /// `n` rows drawn without replacement, kept in their original order.
    pub fn sample(&self, n: usize, seed: u64) -> DataTable {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut picked = rand::seq::index::sample(&mut rng, self.rows.len(), n.min(self.rows.len())).into_vec();
        picked.sort_unstable();
        self.subset(&picked)
    }

    /// Nominal value of attribute `index` in row `row`.
    pub fn nominal_value(&self, row: usize, index: usize) -> Option<&str> {
        let slot = self.schema.nominal_slot(index)?;
        self.rows.get(row).map(|r| r.nominal[slot].as_str())
    }

    /// Counts of (negative, positive) targets.
    pub fn class_counts(&self) -> (usize, usize) {
        self.rows.iter().fold((0, 0), |(n, p), r| match r.target {
            Some(Class::Positive) => (n, p + 1),
            Some(Class::Negative) => (n + 1, p),
            None => (n, p),
        })
    }
}

fn load_table(path: impl AsRef<Path>, schema: Arc<Schema>, require_target: bool) -> Result<DataTable> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_table(std::io::BufReader::new(file), schema, require_target)
}

fn is_missing(token: &str) -> bool {
    token.is_empty() || token == "?" || token.eq_ignore_ascii_case("na")
}

fn read_table<R: std::io::Read>(
    reader: R,
    schema: Arc<Schema>,
    require_target: bool,
) -> Result<DataTable> {
    let mut csv = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = csv
        .headers()
        .map_err(|e| DatasetError::Csv {
            row: 0,
            message: e.to_string(),
        })?
        .clone();
    if header.is_empty() {
        // a zero-byte file has no header at all
        return Err(DatasetError::MissingColumn(
            schema.attributes()[0].name.clone(),
        ));
    }

    let mut columns = Vec::with_capacity(schema.attributes().len());
    for a in schema.attributes() {
        let pos = header.iter().position(|h| h == a.name);
        match (pos, a.kind) {
            (None, AttributeKind::Target) if !require_target => columns.push(None),
            (None, _) => return Err(DatasetError::MissingColumn(a.name.clone())),
            (Some(p), _) => columns.push(Some(p)),
        }
    }

    let mut rows = Vec::new();
    for (i, result) in csv.records().enumerate() {
        let row_no = i + 1;
        let rec = result.map_err(|e| DatasetError::Csv {
            row: row_no,
            message: e.to_string(),
        })?;
        let mut record = Record {
            nominal: Vec::new(),
            numeric: Vec::new(),
            identifiers: Vec::new(),
            target: None,
        };
        for (a, col) in schema.attributes().iter().zip(&columns) {
            let token = col.and_then(|c| rec.get(c)).unwrap_or("");
            match a.kind {
                AttributeKind::Nominal => record.nominal.push(if is_missing(token) {
                    MISSING_NOMINAL.to_string()
                } else {
                    token.to_string()
                }),
                AttributeKind::Numeric => {
                    let v = token
                        .parse::<f64>()
                        .ok()
                        .filter(|v| v.is_finite())
                        .ok_or_else(|| DatasetError::TypeMismatch {
                            row: row_no,
                            column: a.name.clone(),
                            value: token.to_string(),
                        })?;
                    record.numeric.push(v);
                }
                AttributeKind::Identifier => record.identifiers.push(token.to_string()),
                AttributeKind::Target => {
                    if is_missing(token) {
                        if require_target {
                            return Err(DatasetError::MissingTarget { row: row_no });
                        }
                    } else {
                        record.target = Some(schema.class_of(token));
                    }
                }
            }
        }
        rows.push(record);
    }
    Ok(DataTable { schema, rows })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureStats {
    pub mean: f64,
    pub stddev: f64,
    pub constant: bool,
}

/// Per-feature z-score statistics (population standard deviation).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationParams {
    pub features: Vec<FeatureStats>,
}

impl NormalizationParams {
    pub fn fit(rows: &[Vec<f64>]) -> Result<Self> {
        let first = rows.first().ok_or(DatasetError::EmptyInput)?;
        let dim = first.len();
        let n = rows.len() as f64;
        let mut features = Vec::with_capacity(dim);
        for j in 0..dim {
            let mean = rows.iter().map(|r| r[j]).sum::<f64>() / n;
            let var = rows.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / n;
            // tiny residual variance from rounding on a constant column
            let stddev = if rows.iter().all(|r| r[j] == first[j]) {
                0.0
            } else {
                var.sqrt()
            };
            features.push(FeatureStats {
                mean,
                stddev,
                constant: stddev == 0.0,
            });
        }
        Ok(NormalizationParams { features })
    }

    /// Identity transform of the given width.
    pub fn identity(dim: usize) -> Self {
        NormalizationParams {
            features: vec![
                FeatureStats {
                    mean: 0.0,
                    stddev: 1.0,
                    constant: false,
                };
                dim
            ],
        }
    }

    pub fn dim(&self) -> usize {
        self.features.len()
    }

    pub fn apply(&self, row: &[f64]) -> Result<Vec<f64>> {
        self.check(row)?;
        Ok(row
            .iter()
            .zip(&self.features)
            .map(|(x, s)| {
                if s.constant {
                    0.0
                } else {
                    (x - s.mean) / s.stddev
                }
            })
            .collect())
    }

    pub fn apply_all(&self, rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        rows.iter().map(|r| self.apply(r)).collect()
    }

    /// Inverse transform; constant features map back to their mean.
    pub fn invert(&self, row: &[f64]) -> Result<Vec<f64>> {
        self.check(row)?;
        Ok(row
            .iter()
            .zip(&self.features)
            .map(|(z, s)| if s.constant { s.mean } else { z * s.stddev + s.mean })
            .collect())
    }

    fn check(&self, row: &[f64]) -> Result<()> {
        if row.len() != self.features.len() {
            return Err(DatasetError::DimensionMismatch {
                expected: self.features.len(),
                actual: row.len(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct FoldSplit {
    pub fold_index: usize,
    pub train: DataTable,
    pub validation: DataTable,
}

/// Validation index sets for `k` folds: a seeded shuffle dealt round-robin,
/// so fold sizes differ by at most one.
pub fn fold_indices(rows: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 || k > rows {
        return Err(DatasetError::KTooLarge { rows, k });
    }
    let mut order: Vec<usize> = (0..rows).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut folds = vec![Vec::with_capacity(rows / k + 1); k];
    for (pos, idx) in order.into_iter().enumerate() {
        folds[pos % k].push(idx);
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

pub fn split_folds(table: &DataTable, k: usize, seed: u64) -> Result<Vec<FoldSplit>> {
    let folds = fold_indices(table.len(), k, seed)?;
    let mut in_fold = vec![0usize; table.len()];
    for (f, idx) in folds.iter().enumerate() {
        for &i in idx {
            in_fold[i] = f;
        }
    }
    Ok(folds
        .iter()
        .enumerate()
        .map(|(f, validation)| {
            let train: Vec<usize> = (0..table.len()).filter(|&i| in_fold[i] != f).collect();
            FoldSplit {
                fold_index: f,
                train: table.subset(&train),
                validation: table.subset(validation),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    const SCHEMA: &str = "id = identifier\ncolor = nominal\nx = numeric\ny = numeric\nlabel = target\npositive_label = yes\n";

    fn schema() -> Arc<Schema> {
        Arc::new(Schema::parse(SCHEMA).unwrap())
    }

    fn table(text: &str) -> Result<DataTable> {
        DataTable::from_reader(text.as_bytes(), schema(), true)
    }

    #[test]
    fn parses_schema() {
        let s = schema();
        assert_eq!(s.attributes().len(), 5);
        assert_eq!(s.nominal_indices(), vec![1]);
        assert_eq!(s.numeric_count(), 2);
        assert_eq!(s.positive_label(), "yes");
        assert_eq!(Schema::parse(&s.to_text()).unwrap(), *s);
    }

    #[test]
    fn schema_rules() {
        assert!(Schema::parse("x = numeric\npositive_label = a\n").is_err());
        assert!(Schema::parse("c = nominal\nt = target\npositive_label = a\n").is_err());
        assert!(Schema::parse("x = numeric\nx = numeric\nt = target\npositive_label = a").is_err());
        assert!(Schema::parse("x = numeric\nt = target\n").is_err());
        assert!(Schema::parse("x = float\nt = target\npositive_label = a").is_err());
    }

    #[test]
    fn loads_rows_and_maps_target() {
        let t = table("id,color,x,y,label\n1,red,1.5,2,yes\n2,,3,4,no\n3,blue,5,6,maybe\n").unwrap();
        assert_eq!(t.len(), 3);
        assert_eq!(t.rows()[0].nominal, vec!["red"]);
        assert_eq!(t.rows()[1].nominal, vec![MISSING_NOMINAL]);
        assert_eq!(t.rows()[0].numeric, vec![1.5, 2.0]);
        assert_eq!(t.rows()[0].identifiers, vec!["1"]);
        assert_eq!(
            t.targets().unwrap(),
            vec![Class::Positive, Class::Negative, Class::Negative]
        );
    }

    #[test]
    fn empty_file_with_header() {
        let t = table("id,color,x,y,label\n").unwrap();
        assert!(t.is_empty());
    }

    #[test]
    fn type_mismatch_names_cell() {
        let err = table("id,color,x,y,label\n1,red,1,abc,yes\n").unwrap_err();
        match err {
            DatasetError::TypeMismatch { row, column, value } => {
                assert_eq!((row, column.as_str(), value.as_str()), (1, "y", "abc"));
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            table("id,color,x,y,label\n1,red,,2,yes\n"),
            Err(DatasetError::TypeMismatch { .. })
        ));
    }

    #[test]
    fn missing_column() {
        assert!(matches!(
            table("id,color,x,label\n1,red,1,yes\n"),
            Err(DatasetError::MissingColumn(c)) if c == "y"
        ));
    }

    #[test]
    fn unlabeled_load_allows_missing_target_column() {
        let t = DataTable::from_reader("id,color,x,y\n1,red,1,2\n".as_bytes(), schema(), false).unwrap();
        assert_eq!(t.rows()[0].target, None);
        assert!(t.targets().is_err());
    }

    #[test]
    fn normalizer_basic_values() {
        let p = NormalizationParams::fit(&[vec![0.0], vec![10.0]]).unwrap();
        assert_eq!(p.features[0].mean, 5.0);
        assert_eq!(p.features[0].stddev, 5.0);
        assert_eq!(p.apply(&[10.0]).unwrap(), vec![1.0]);
        assert_eq!(p.apply(&[5.0]).unwrap(), vec![0.0]);

        let c = NormalizationParams::fit(&[vec![3.0], vec![3.0], vec![3.0]]).unwrap();
        assert_eq!(c.features[0].mean, 3.0);
        assert_eq!(c.features[0].stddev, 0.0);
        assert!(c.features[0].constant);
        assert_eq!(c.apply(&[42.0]).unwrap(), vec![0.0]);
    }

    #[test]
    fn normalizer_errors() {
        assert!(matches!(NormalizationParams::fit(&[]), Err(DatasetError::EmptyInput)));
        let p = NormalizationParams::fit(&[vec![1.0, 2.0], vec![2.0, 3.0]]).unwrap();
        assert!(matches!(
            p.apply(&[1.0]),
            Err(DatasetError::DimensionMismatch { expected: 2, actual: 1 })
        ));
    }

    #[test]
    fn standardized_column_is_fixed_point() {
        let col = [-1.0, 1.0, -1.0, 1.0];
        let rows: Vec<Vec<f64>> = col.iter().map(|&v| vec![v]).collect();
        let p = NormalizationParams::fit(&rows).unwrap();
        assert!(p.features[0].mean.abs() < 1e-12);
        assert!((p.features[0].stddev - 1.0).abs() < 1e-12);
    }

    #[test]
    fn folds_partition_rows() {
        let folds = fold_indices(1000, 10, 7).unwrap();
        assert!(folds.iter().all(|f| f.len() == 100));
        let mut all: Vec<usize> = folds.concat();
        all.sort_unstable();
        assert_eq!(all, (0..1000).collect::<Vec<_>>());
        assert_eq!(folds, fold_indices(1000, 10, 7).unwrap());
        assert_ne!(folds, fold_indices(1000, 10, 8).unwrap());

        let loo = fold_indices(10, 10, 1).unwrap();
        assert!(loo.iter().all(|f| f.len() == 1));
        assert!(matches!(fold_indices(5, 6, 0), Err(DatasetError::KTooLarge { .. })));
        assert!(matches!(fold_indices(5, 1, 0), Err(DatasetError::KTooLarge { .. })));
    }

    #[test]
    fn split_folds_builds_tables() {
        let mut text = String::from("id,color,x,y,label\n");
        for i in 0..23 {
            text.push_str(&format!("{i},c{},{i},1,{}\n", i % 3, if i % 2 == 0 { "yes" } else { "no" }));
        }
        let t = table(&text).unwrap();
        let splits = split_folds(&t, 5, 3).unwrap();
        assert_eq!(splits.len(), 5);
        for s in &splits {
            assert_eq!(s.train.len() + s.validation.len(), 23);
            assert!((4..=5).contains(&s.validation.len()));
            let ids: HashSet<_> = s.train.rows().iter().map(|r| r.identifiers[0].clone()).collect();
            assert!(s.validation.rows().iter().all(|r| !ids.contains(&r.identifiers[0])));
        }
    }
}
