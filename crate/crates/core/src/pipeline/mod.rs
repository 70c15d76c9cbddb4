//! Grouping, clustering and per-partition classification end to end.

mod config;
mod persist;
mod report;
mod train;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Class, DataTable, DatasetError, NormalizationParams, Record, Schema};
use crate::gpc::{GpcError, GpcModel};
use crate::infogain::InfoGainError;
use crate::kmeans::{ClusterModel, KMeansError};
use crate::mlp::{MlpError, MlpModel};

pub use config::{ClassifierKind, ClusteringMode, GroupingMode, HiddenSize, PipelineConfig, UnseenLabelPolicy};
pub use persist::{load_model, save_model, MODEL_FORMAT, MODEL_FORMAT_VERSION};
pub use report::{loglog_slope, CrossValidation, FoldResult};
pub use train::{cross_validate, leaf_seed, train_gkmnc, ClusterDecision, GroupTrainReport, LeafTiming, TrainReport};

#[derive(Debug, Error)]
pub enum ClassifierError {
    #[error(transparent)]
    Mlp(#[from] MlpError),
    #[error(transparent)]
    Gpc(#[from] GpcError),
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("configuration line {line}: {message}")]
    Config { line: usize, message: String },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    InfoGain(#[from] InfoGainError),
    #[error("grouping attribute `{0}` is not a nominal attribute of the schema")]
    NotNominal(String),
    #[error("clustering group {group:?}: {source}")]
    Clustering {
        group: String,
        #[source]
        source: KMeansError,
    },
    #[error("training leaf {group:?}/cluster {cluster} ({rows} rows): {source}")]
    Leaf {
        group: String,
        cluster: usize,
        rows: usize,
        #[source]
        source: ClassifierError,
    },
    #[error("training table is empty")]
    EmptyTraining,
    #[error("validation table is empty")]
    EmptyValidation,
    #[error("unseen label {label:?} for grouping attribute `{attribute}`")]
    UnseenNominalLabel { attribute: String, label: String },
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
    #[error("accuracy parts have zero total weight")]
    ZeroTotal,
    #[error("model file has format {found:?}, expected {expected:?}")]
    FormatVersionMismatch { found: String, expected: String },
    #[error("corrupt model file: {0}")]
    CorruptFile(String),
    #[error("schema does not match the model (fingerprint {found}, model {expected})")]
    SchemaMismatch { found: String, expected: String },
    #[error("worker pool: {0}")]
    WorkerPool(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, PipelineError>;

/// Group key used when grouping is off.
pub const ALL_ROWS: &str = "*";

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classifier {
    Mlp(MlpModel),
    Gpc(GpcModel),
}

impl Classifier {
    pub fn kind(&self) -> ClassifierKind {
        match self {
            Classifier::Mlp(_) => ClassifierKind::Mlp,
            Classifier::Gpc(_) => ClassifierKind::Gpc,
        }
    }

    /// Normalizer fitted on the leaf's own training rows.
    pub fn normalizer(&self) -> &NormalizationParams {
        match self {
            Classifier::Mlp(m) => &m.normalizer,
            Classifier::Gpc(g) => &g.normalizer,
        }
    }

    pub fn input_size(&self) -> usize {
        self.normalizer().dim()
    }

    /// Class and, for GPC, the probability of the positive class.
    pub fn predict(&self, raw: &[f64]) -> std::result::Result<(Class, Option<f64>), ClassifierError> {
        match self {
            Classifier::Mlp(m) => Ok((m.classify(raw)?, None)),
            Classifier::Gpc(g) => {
                let p = g.predict_prob(raw)?;
                Ok((crate::gpc::decide(p), Some(p)))
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LeafNode {
    pub cluster: usize,
    pub training_rows: usize,
    pub seed: u64,
    pub classifier: Classifier,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroupNode {
    pub training_rows: usize,
    /// Fitted on the group's training rows; used for centroid routing.
    pub normalizer: NormalizationParams,
    pub clusters: Option<ClusterModel>,
    pub leaves: Vec<LeafNode>,
}

impl GroupNode {
    /// Number of clusters, 1 when clustering was skipped.
    pub fn k(&self) -> usize {
        self.leaves.len()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GkmncModel {
    pub schema: Arc<Schema>,
    pub classifier: ClassifierKind,
    /// Zero-based schema index.
    pub grouping_attribute: Option<usize>,
    pub clustering_enabled: bool,
    pub hidden_size: Option<usize>,
    pub unseen_label_policy: UnseenLabelPolicy,
    pub groups: BTreeMap<String, GroupNode>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Route {
    pub group: String,
    pub cluster: usize,
    /// The grouping label was not seen in training and the row was sent to
    /// the largest group.
    pub unseen_label: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forecast {
    pub class: Class,
    pub probability: Option<f64>,
    pub route: Route,
}

impl GkmncModel {
    /// `G1-[7,8,5,5]-GPC`, `G1-MLP`, `[3]-MLP` or plain `GPC`.
    pub fn name(&self) -> String {
        let mut parts = Vec::new();
        if let Some(a) = self.grouping_attribute {
            parts.push(format!("G{}", a + 1));
        }
        if self.clustering_enabled {
            let ks: Vec<String> = self.groups.values().map(|g| g.k().to_string()).collect();
            parts.push(format!("[{}]", ks.join(",")));
        }
        parts.push(self.classifier.tag().to_string());
        parts.join("-")
    }

    /// `x-y-1` for MLP models.
    pub fn architecture(&self) -> Option<String> {
        self.hidden_size.map(|h| format!("{}-{}-1", self.schema.numeric_count(), h))
    }

    pub fn leaf_count(&self) -> usize {
        self.groups.values().map(|g| g.leaves.len()).sum()
    }

    pub fn leaves(&self) -> impl Iterator<Item = (&str, &LeafNode)> {
        self.groups
            .iter()
            .flat_map(|(label, g)| g.leaves.iter().map(move |l| (label.as_str(), l)))
    }

    fn largest_group(&self) -> &str {
        self.groups
            .iter()
            .fold(None::<(&String, usize)>, |best, (label, g)| match best {
                Some((_, n)) if n >= g.training_rows => best,
                _ => Some((label, g.training_rows)),
            })
            .map(|(l, _)| l.as_str())
            .expect("a trained model has at least one group")
    }

    /// Group key and unseen flag for a record.
    pub fn route_group(&self, record: &Record) -> Result<(&str, bool)> {
        let Some(attr) = self.grouping_attribute else {
            return Ok((ALL_ROWS, false));
        };
        let slot = self.schema.nominal_slot(attr).expect("grouping attribute is nominal");
        let label = record.nominal.get(slot).ok_or(DatasetError::DimensionMismatch {
            expected: self.schema.nominal_indices().len(),
            actual: record.nominal.len(),
        })?;
        if let Some((key, _)) = self.groups.get_key_value(label) {
            return Ok((key.as_str(), false));
        }
        match self.unseen_label_policy {
            UnseenLabelPolicy::Error => Err(PipelineError::UnseenNominalLabel {
                attribute: self.schema.attributes()[attr].name.clone(),
                label: label.clone(),
            }),
            UnseenLabelPolicy::RouteToLargestGroup => Ok((self.largest_group(), true)),
        }
    }

    /// Routes by group label, then nearest centroid, then classifies.
    pub fn forecast(&self, record: &Record) -> Result<Forecast> {
        let expected = self.schema.numeric_count();
        if record.numeric.len() != expected {
            return Err(DatasetError::DimensionMismatch {
                expected,
                actual: record.numeric.len(),
            }
            .into());
        }
        let (group, unseen_label) = self.route_group(record)?;
        let node = &self.groups[group];
        let cluster = match &node.clusters {
            Some(c) => {
                let z = node.normalizer.apply(&record.numeric)?;
                c.assign(&z).map_err(|source| PipelineError::Clustering {
                    group: group.to_string(),
                    source,
                })?
            }
            None => 0,
        };
        let (class, probability) = node.leaves[cluster].classifier.predict(&record.numeric)?;
        Ok(Forecast {
            class,
            probability,
            route: Route {
                group: group.to_string(),
                cluster,
                unseen_label,
            },
        })
    }

    pub fn forecast_table(&self, table: &DataTable) -> Result<Vec<Forecast>> {
        self.check_schema(table.schema())?;
        table.rows().iter().map(|r| self.forecast(r)).collect()
    }

    fn check_schema(&self, schema: &Schema) -> Result<()> {
        let (found, expected) = (schema.fingerprint(), self.schema.fingerprint());
        if found != expected {
            return Err(PipelineError::SchemaMismatch { found, expected });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub true_positive: usize,
    pub true_negative: usize,
    pub false_positive: usize,
    pub false_negative: usize,
}

impl Confusion {
    pub fn record(&mut self, actual: Class, predicted: Class) {
        match (actual, predicted) {
            (Class::Positive, Class::Positive) => self.true_positive += 1,
            (Class::Negative, Class::Negative) => self.true_negative += 1,
            (Class::Negative, Class::Positive) => self.false_positive += 1,
            (Class::Positive, Class::Negative) => self.false_negative += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.true_positive + self.true_negative + self.false_positive + self.false_negative
    }

    pub fn correct(&self) -> usize {
        self.true_positive + self.true_negative
    }

    /// `(tp + tn) / n`, `None` when empty.
    pub fn accuracy(&self) -> Option<f64> {
        let n = self.total();
        (n > 0).then(|| self.correct() as f64 / n as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupScore {
    pub group: String,
    pub n: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeafScore {
    pub group: String,
    pub cluster: usize,
    pub n: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub model_name: String,
    pub n: usize,
    pub overall_accuracy: f64,
    /// Groups that received at least one validation row, in label order.
    pub per_group: Vec<GroupScore>,
    pub per_leaf: Vec<LeafScore>,
    pub confusion: Confusion,
    /// Rows whose grouping label was unseen in training.
    pub unseen_routed: usize,
}

impl fmt::Display for EvaluationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {:.2}% on {} rows", self.model_name, 100.0 * self.overall_accuracy, self.n)
    }
}

/// Weighted mean accuracy `Σ nᵢ·accᵢ / Σ nᵢ`.
pub fn aggregate_accuracy(parts: &[(usize, f64)]) -> Result<f64> {
    let total: usize = parts.iter().map(|p| p.0).sum();
    if total == 0 {
        return Err(PipelineError::ZeroTotal);
    }
    Ok(parts.iter().map(|&(n, a)| n as f64 * a).sum::<f64>() / total as f64)
}

pub fn evaluate(model: &GkmncModel, validation: &DataTable) -> Result<EvaluationReport> {
    if validation.is_empty() {
        return Err(PipelineError::EmptyValidation);
    }
    let targets = validation.targets()?;
    let forecasts = model.forecast_table(validation)?;
    let mut confusion = Confusion::default();
    let mut groups: BTreeMap<&str, Confusion> = BTreeMap::new();
    let mut leaves: BTreeMap<(&str, usize), Confusion> = BTreeMap::new();
    let mut unseen_routed = 0;
    for (fc, &actual) in forecasts.iter().zip(&targets) {
        confusion.record(actual, fc.class);
        groups.entry(&fc.route.group).or_default().record(actual, fc.class);
        leaves
            .entry((&fc.route.group, fc.route.cluster))
            .or_default()
            .record(actual, fc.class);
        unseen_routed += usize::from(fc.route.unseen_label);
    }
    let per_group = groups
        .into_iter()
        .map(|(g, c)| GroupScore {
            group: g.to_string(),
            n: c.total(),
            accuracy: c.accuracy().expect("entry holds a row"),
        })
        .collect();
    let per_leaf = leaves
        .into_iter()
        .map(|((g, k), c)| LeafScore {
            group: g.to_string(),
            cluster: k,
            n: c.total(),
            accuracy: c.accuracy().expect("entry holds a row"),
        })
        .collect();
    Ok(EvaluationReport {
        model_name: model.name(),
        n: confusion.total(),
        overall_accuracy: confusion.accuracy().expect("validation is non-empty"),
        per_group,
        per_leaf,
        confusion,
        unseen_routed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weighted_aggregation() {
        let parts = [(26, 0.6923), (43, 0.9070), (27, 0.6296), (4, 0.50)];
        assert!((aggregate_accuracy(&parts).unwrap() - 0.76).abs() < 5e-3);
        assert_eq!(aggregate_accuracy(&[(7, 0.3)]).unwrap(), 0.3);
        assert_eq!(aggregate_accuracy(&[(5, 0.0), (5, 1.0)]).unwrap(), 0.5);
        assert!(matches!(aggregate_accuracy(&[(0, 1.0)]), Err(PipelineError::ZeroTotal)));
        assert!(matches!(aggregate_accuracy(&[]), Err(PipelineError::ZeroTotal)));
    }

    #[test]
    fn confusion_counts() {
        let mut c = Confusion::default();
        c.record(Class::Positive, Class::Positive);
        c.record(Class::Negative, Class::Positive);
        c.record(Class::Negative, Class::Negative);
        c.record(Class::Positive, Class::Negative);
        assert_eq!(c.total(), 4);
        assert_eq!(c.accuracy(), Some(0.5));
        assert_eq!(Confusion::default().accuracy(), None);
    }
}
