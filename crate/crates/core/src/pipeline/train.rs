use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::{fold_indices, split_folds, AttributeKind, Class, DataTable, NormalizationParams, Schema};
use crate::gpc::{self, GpcTrainConfig};
use crate::infogain::{self, GainRatioReport};
use crate::kmeans::{self, ClusterModel, KMeansError};
use crate::mlp::{self, pick_hidden_size, HiddenSizeSearch};

use super::report::{CrossValidation, FoldResult};
use super::{
    evaluate, Classifier, ClassifierError, ClassifierKind, ClusteringMode, GkmncModel, GroupNode, GroupingMode,
    HiddenSize, LeafNode, PipelineConfig, PipelineError, Result, ALL_ROWS,
};

/// Share of the training rows held out for the hidden-size search when no
/// validation table is given.
const INNER_HOLDOUT_FOLDS: usize = 5;

fn derive_seed(seed: u64, domain: &str, group: &str, cluster: usize) -> u64 {
    let mut h = Sha256::new();
    h.update(domain.as_bytes());
    h.update(seed.to_le_bytes());
    h.update((group.len() as u64).to_le_bytes());
    h.update(group.as_bytes());
    h.update((cluster as u64).to_le_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("digest is 32 bytes"))
}

/// Seed for the classifier of one (group, cluster) leaf. Independent of
/// every other leaf and of scheduling.
pub fn leaf_seed(seed: u64, group: &str, cluster: usize) -> u64 {
    derive_seed(seed, "leaf", group, cluster)
}

fn clustering_seed(seed: u64, group: &str) -> u64 {
    derive_seed(seed, "kmeans", group, 0)
}

/// What happened when a group was considered for clustering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClusterDecision {
    Disabled,
    Fixed(usize),
    /// Interior minimum of the index curve at this k.
    Clustered(usize),
    TooFewRows { rows: usize, min: usize },
    /// Index keeps falling up to `k_max`, so there is no clear optimum.
    Tight,
    /// Fewer than two distinct points.
    Degenerate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupTrainReport {
    pub group: String,
    pub rows: usize,
    pub decision: ClusterDecision,
    /// `(k, dbi)`; empty when the search did not run.
    pub curve: Vec<(usize, f64)>,
    pub cluster_sizes: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeafTiming {
    pub group: String,
    pub cluster: usize,
    pub rows: usize,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub model_name: String,
    pub gain_report: Option<GainRatioReport>,
    pub grouping_attribute: Option<usize>,
    pub groups: Vec<GroupTrainReport>,
    pub hidden_search: Option<HiddenSizeSearch>,
    pub leaf_timings: Vec<LeafTiming>,
    /// Wall-clock of the final leaf-training phase.
    pub leaf_phase_seconds: f64,
    pub total_seconds: f64,
}

struct GroupPlan {
    label: String,
    rows: usize,
    normalizer: NormalizationParams,
    clusters: Option<ClusterModel>,
    /// `(features, targets)` per leaf, raw scale.
    leaves: Vec<(Vec<Vec<f64>>, Vec<Class>)>,
    report: GroupTrainReport,
}

struct Plan {
    schema: Arc<Schema>,
    grouping_attribute: Option<usize>,
    gain_report: Option<GainRatioReport>,
    groups: Vec<GroupPlan>,
}

fn resolve_grouping(table: &DataTable, config: &PipelineConfig) -> Result<(Option<usize>, Option<GainRatioReport>)> {
    let schema = table.schema();
    let has_nominal = !schema.nominal_indices().is_empty();
    let report = if has_nominal {
        Some(infogain::gain_ratio_report(table)?)
    } else {
        None
    };
    let attribute = match &config.grouping {
        GroupingMode::Off => None,
        GroupingMode::Auto if !has_nominal => None,
        GroupingMode::Auto => infogain::select_grouping_attribute(table, config.gain_ratio_threshold)?.selected,
        GroupingMode::Attribute(name) => {
            let index = schema
                .index_of(name)
                .or_else(|| name.parse::<usize>().ok().and_then(|p| p.checked_sub(1)));
            match index {
                Some(i) if schema.attribute(i).is_some_and(|a| a.kind == AttributeKind::Nominal) => Some(i),
                _ => return Err(PipelineError::NotNominal(name.clone())),
            }
        }
    };
    Ok((attribute, report))
}

fn cluster_group(label: &str, z: &[Vec<f64>], config: &PipelineConfig) -> Result<(Option<ClusterModel>, ClusterDecision, Vec<(usize, f64)>)> {
    let seed = clustering_seed(config.seed, label);
    let wrap = |source| PipelineError::Clustering {
        group: label.to_string(),
        source,
    };
    match config.clustering {
        ClusteringMode::Off => Ok((None, ClusterDecision::Disabled, Vec::new())),
        ClusteringMode::Fixed(1) => Ok((None, ClusterDecision::Fixed(1), Vec::new())),
        ClusteringMode::Fixed(k) => {
            let model = kmeans::kmeans_fit(z, k, seed, config.kmeans_restarts).map_err(wrap)?;
            let curve = model.dbi.map(|d| vec![(k, d)]).unwrap_or_default();
            Ok((Some(model), ClusterDecision::Fixed(k), curve))
        }
        ClusteringMode::Auto if z.len() < config.min_partition_rows => Ok((
            None,
            ClusterDecision::TooFewRows {
                rows: z.len(),
                min: config.min_partition_rows,
            },
            Vec::new(),
        )),
        ClusteringMode::Auto => match kmeans::select_k(z, config.k_max, seed, config.kmeans_restarts) {
            Err(KMeansError::KExceedsRows { .. }) => Ok((None, ClusterDecision::Degenerate, Vec::new())),
            Err(e) => Err(wrap(e)),
            Ok(sel) if sel.minimum_at_boundary() => Ok((None, ClusterDecision::Tight, sel.curve)),
            Ok(sel) => {
                let k = sel.chosen.k;
                Ok((Some(sel.chosen), ClusterDecision::Clustered(k), sel.curve))
            }
        },
    }
}

fn build_plan(table: &DataTable, config: &PipelineConfig) -> Result<Plan> {
    if table.is_empty() {
        return Err(PipelineError::EmptyTraining);
    }
    let (grouping_attribute, gain_report) = resolve_grouping(table, config)?;
    let partitions: BTreeMap<String, DataTable> = match grouping_attribute {
        Some(a) => infogain::partition_by_attribute(table, a)?,
        None => BTreeMap::from([(ALL_ROWS.to_string(), table.clone())]),
    };
    let mut groups = Vec::with_capacity(partitions.len());
    for (label, part) in partitions {
        let raw = part.numeric_rows();
        let targets = part.targets()?;
        let normalizer = NormalizationParams::fit(&raw)?;
        let z = normalizer.apply_all(&raw)?;
        let (clusters, decision, curve) = cluster_group(&label, &z, config)?;
        // Membership is recomputed with the routing rule so every training
        // row would be forecast by the leaf that learned it.
        let k = clusters.as_ref().map_or(1, |c| c.k);
        let mut leaves = vec![(Vec::new(), Vec::new()); k];
        for (i, (x, t)) in raw.into_iter().zip(targets).enumerate() {
            let c = match &clusters {
                Some(m) => m.assign(&z[i]).map_err(|source| PipelineError::Clustering {
                    group: label.clone(),
                    source,
                })?,
                None => 0,
            };
            leaves[c].0.push(x);
            leaves[c].1.push(t);
        }
        let report = GroupTrainReport {
            group: label.clone(),
            rows: part.len(),
            decision,
            curve,
            cluster_sizes: leaves.iter().map(|l| l.0.len()).collect(),
        };
        groups.push(GroupPlan {
            label,
            rows: part.len(),
            normalizer,
            clusters,
            leaves,
            report,
        });
    }
    Ok(Plan {
        schema: table.schema().clone(),
        grouping_attribute,
        gain_report,
        groups,
    })
}

struct LeafTask<'a> {
    group: &'a str,
    cluster: usize,
    features: &'a [Vec<f64>],
    targets: &'a [Class],
    seed: u64,
}

fn train_leaf(task: &LeafTask<'_>, config: &PipelineConfig, hidden: Option<usize>) -> std::result::Result<Classifier, ClassifierError> {
    match config.classifier {
        ClassifierKind::Mlp => Ok(Classifier::Mlp(mlp::train(
            task.features,
            task.targets,
            hidden.expect("MLP runs carry a hidden size"),
            task.seed,
            &config.mlp_cg,
            &config.line_search,
        )?)),
        ClassifierKind::Gpc => {
            let gpc_config = GpcTrainConfig {
                kernel: config.gpc_kernel,
                optimize_hyperparams: config.gpc_optimize,
                max_rows: config.gpc_max_rows,
                cg: config.gpc_cg,
                ls: config.line_search,
            };
            Ok(Classifier::Gpc(gpc::train(task.features, task.targets, task.seed, &gpc_config)?))
        }
    }
}

/// Trains every leaf of the plan on a pool of `worker_count` threads.
fn fit_plan(plan: &Plan, config: &PipelineConfig, hidden: Option<usize>) -> Result<(GkmncModel, Vec<LeafTiming>, f64)> {
    let total_leaves: usize = plan.groups.iter().map(|g| g.leaves.len()).sum();
    let tasks: Vec<LeafTask<'_>> = plan
        .groups
        .iter()
        .flat_map(|g| {
            g.leaves.iter().enumerate().map(move |(c, (x, t))| LeafTask {
                group: &g.label,
                cluster: c,
                features: x,
                targets: t,
                // A single-leaf model is the universal classifier; it keeps the run seed.
                seed: if total_leaves == 1 {
                    config.seed
                } else {
                    leaf_seed(config.seed, &g.label, c)
                },
            })
        })
        .collect();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.worker_count)
        .build()
        .map_err(|e| PipelineError::WorkerPool(e.to_string()))?;
    let start = Instant::now();
    let results: Vec<_> = pool.install(|| {
        tasks
            .par_iter()
            .map(|task| {
                let t0 = Instant::now();
                let r = train_leaf(task, config, hidden);
                (r, t0.elapsed().as_secs_f64())
            })
            .collect()
    });
    let phase = start.elapsed().as_secs_f64();

    let mut timings = Vec::with_capacity(tasks.len());
    let mut trained: BTreeMap<&str, Vec<LeafNode>> = BTreeMap::new();
    for (task, (result, seconds)) in tasks.iter().zip(results) {
        let classifier = result.map_err(|source| PipelineError::Leaf {
            group: task.group.to_string(),
            cluster: task.cluster,
            rows: task.features.len(),
            source,
        })?;
        timings.push(LeafTiming {
            group: task.group.to_string(),
            cluster: task.cluster,
            rows: task.features.len(),
            seconds,
        });
        trained.entry(task.group).or_default().push(LeafNode {
            cluster: task.cluster,
            training_rows: task.features.len(),
            seed: task.seed,
            classifier,
        });
    }
    let groups = plan
        .groups
        .iter()
        .map(|g| {
            let leaves = trained.remove(g.label.as_str()).unwrap_or_default();
            let clusters = g.clusters.clone().map(|mut c| {
                // Infinite indices do not survive a JSON round trip.
                c.dbi = c.dbi.filter(|d| d.is_finite());
                c
            });
            (
                g.label.clone(),
                GroupNode {
                    training_rows: g.rows,
                    normalizer: g.normalizer.clone(),
                    clusters,
                    leaves,
                },
            )
        })
        .collect();
    let model = GkmncModel {
        schema: plan.schema.clone(),
        classifier: config.classifier,
        grouping_attribute: plan.grouping_attribute,
        clustering_enabled: config.clustering != ClusteringMode::Off,
        hidden_size: hidden,
        unseen_label_policy: config.unseen_label_policy,
        groups,
    };
    Ok((model, timings, phase))
}

fn hidden_candidates(config: &PipelineConfig) -> Vec<Option<usize>> {
    match (config.classifier, config.hidden_size) {
        (ClassifierKind::Gpc, _) => vec![None],
        (ClassifierKind::Mlp, HiddenSize::Fixed(h)) => vec![Some(h)],
        (ClassifierKind::Mlp, HiddenSize::Search) => config.hidden_candidates.iter().map(|&h| Some(h)).collect(),
    }
}

/// Trains the full model. `validation` is only used to pick the MLP hidden
/// size; without it a seeded holdout of the training rows is used.
pub fn train_gkmnc(train: &DataTable, validation: Option<&DataTable>, config: &PipelineConfig) -> Result<(GkmncModel, TrainReport)> {
    config.validate()?;
    let start = Instant::now();
    let candidates = hidden_candidates(config);
    let mut hidden_search = None;
    let plan = build_plan(train, config)?;

    let (model, timings, phase) = if candidates.len() == 1 {
        fit_plan(&plan, config, candidates[0])?
    } else if let Some(val) = validation {
        let mut table = Vec::new();
        let mut best: Option<(usize, f64, (GkmncModel, Vec<LeafTiming>, f64))> = None;
        for h in candidates {
            let h = h.expect("MLP candidate");
            let fitted = fit_plan(&plan, config, Some(h))?;
            let acc = evaluate(&fitted.0, val)?.overall_accuracy;
            table.push((h, acc));
            if best.as_ref().is_none_or(|b| acc > b.1 || (acc == b.1 && h < b.0)) {
                best = Some((h, acc, fitted));
            }
        }
        hidden_search = Some(HiddenSizeSearch {
            best: pick_hidden_size(&table).expect("non-empty candidates"),
            table,
        });
        best.expect("non-empty candidates").2
    } else {
        let folds = fold_indices(train.len(), INNER_HOLDOUT_FOLDS.min(train.len()), config.seed)?;
        let held = &folds[0];
        let kept: Vec<usize> = (0..train.len()).filter(|i| held.binary_search(i).is_err()).collect();
        let (inner_train, inner_val) = (train.subset(&kept), train.subset(held));
        let inner_plan = build_plan(&inner_train, config)?;
        let mut table = Vec::new();
        for h in candidates {
            let (m, _, _) = fit_plan(&inner_plan, config, h)?;
            table.push((h.expect("MLP candidate"), evaluate(&m, &inner_val)?.overall_accuracy));
        }
        let best = pick_hidden_size(&table).expect("non-empty candidates");
        hidden_search = Some(HiddenSizeSearch { best, table });
        fit_plan(&plan, config, Some(best))?
    };

    let report = TrainReport {
        model_name: model.name(),
        gain_report: plan.gain_report.clone(),
        grouping_attribute: plan.grouping_attribute,
        groups: plan.groups.iter().map(|g| g.report.clone()).collect(),
        hidden_search,
        leaf_timings: timings,
        leaf_phase_seconds: phase,
        total_seconds: start.elapsed().as_secs_f64(),
    };
    Ok((model, report))
}

/// k-fold training and scoring on the same seeded folds.
pub fn cross_validate(table: &DataTable, folds: usize, config: &PipelineConfig) -> Result<CrossValidation> {
    if folds < 2 {
        return Err(PipelineError::InvalidConfig(format!("need at least 2 folds, got {folds}")));
    }
    let mut results = Vec::with_capacity(folds);
    for split in split_folds(table, folds, config.seed)? {
        let (model, report) = train_gkmnc(&split.train, None, config)?;
        let evaluation = evaluate(&model, &split.validation)?;
        results.push(FoldResult {
            fold: split.fold_index,
            train_rows: split.train.len(),
            architecture: model.architecture(),
            gain_report: report.gain_report,
            evaluation,
        });
    }
    CrossValidation::new(results)
}
