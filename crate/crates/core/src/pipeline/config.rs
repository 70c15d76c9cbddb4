//! Plain `key = value` pipeline configuration.

use std::fmt::{self, Write as _};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::gpc::{KernelParams, DEFAULT_MAX_ROWS};
use crate::infogain::DEFAULT_GAIN_RATIO_THRESHOLD;
use crate::kmeans::DEFAULT_RESTARTS;
use crate::mlp::DEFAULT_HIDDEN_CANDIDATES;
use crate::optim::{CgConfig, LineSearchConfig};

use super::{PipelineError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierKind {
    Mlp,
    Gpc,
}

impl ClassifierKind {
    pub fn tag(self) -> &'static str {
        match self {
            ClassifierKind::Mlp => "MLP",
            ClassifierKind::Gpc => "GPC",
        }
    }
}

impl fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ClassifierKind::Mlp => "mlp",
            ClassifierKind::Gpc => "gpc",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupingMode {
    /// Highest gain ratio, if above the threshold.
    Auto,
    Off,
    /// Attribute name, or its 1-based position in the schema.
    Attribute(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClusteringMode {
    /// Lowest Davies-Bouldin index over `2..=k_max`, subject to the skip policy.
    Auto,
    Off,
    Fixed(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HiddenSize {
    Search,
    Fixed(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnseenLabelPolicy {
    Error,
    RouteToLargestGroup,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub classifier: ClassifierKind,
    pub grouping: GroupingMode,
    pub gain_ratio_threshold: f64,
    pub clustering: ClusteringMode,
    pub k_max: usize,
    pub kmeans_restarts: usize,
    pub hidden_size: HiddenSize,
    pub hidden_candidates: Vec<usize>,
    pub min_partition_rows: usize,
    pub seed: u64,
    pub worker_count: usize,
    pub unseen_label_policy: UnseenLabelPolicy,
    pub gpc_kernel: KernelParams,
    pub gpc_optimize: bool,
    pub gpc_max_rows: usize,
    pub gpc_cg: CgConfig,
    pub mlp_cg: CgConfig,
    pub line_search: LineSearchConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            classifier: ClassifierKind::Mlp,
            grouping: GroupingMode::Auto,
            gain_ratio_threshold: DEFAULT_GAIN_RATIO_THRESHOLD,
            clustering: ClusteringMode::Auto,
            k_max: 8,
            kmeans_restarts: DEFAULT_RESTARTS,
            hidden_size: HiddenSize::Search,
            hidden_candidates: DEFAULT_HIDDEN_CANDIDATES.to_vec(),
            min_partition_rows: 50,
            seed: 0,
            worker_count: 1,
            unseen_label_policy: UnseenLabelPolicy::RouteToLargestGroup,
            gpc_kernel: KernelParams::default(),
            gpc_optimize: false,
            gpc_max_rows: DEFAULT_MAX_ROWS,
            gpc_cg: CgConfig::hyperparameter_default(),
            mlp_cg: CgConfig::mlp_default(),
            line_search: LineSearchConfig::default(),
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> std::result::Result<T, String> {
    value
        .parse()
        .map_err(|_| format!("`{key}` expects a number, got {value:?}"))
}

fn parse_bool(key: &str, value: &str) -> std::result::Result<bool, String> {
    match value {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(format!("`{key}` expects true or false, got {value:?}")),
    }
}

impl PipelineConfig {
    /// Parses `key = value` lines over the defaults. `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut config = PipelineConfig::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| PipelineError::Config {
                line: n + 1,
                message: format!("expected `key = value`, got {line:?}"),
            })?;
            config.set(key.trim(), value.trim()).map_err(|message| PipelineError::Config {
                line: n + 1,
                message,
            })?;
        }
        config.validate()?;
        Ok(config)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Sets one field from its textual form.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        match key {
            "classifier" | "classifier_kind" => {
                self.classifier = match value {
                    "mlp" => ClassifierKind::Mlp,
                    "gpc" => ClassifierKind::Gpc,
                    _ => return Err(format!("unknown classifier {value:?}")),
                }
            }
            "grouping" => {
                self.grouping = match value {
                    "auto" => GroupingMode::Auto,
                    "off" | "none" => GroupingMode::Off,
                    "" => return Err("`grouping` needs a value".into()),
                    other => GroupingMode::Attribute(other.to_string()),
                }
            }
            "gain_ratio_threshold" => self.gain_ratio_threshold = parse_num(key, value)?,
            "clustering" => {
                self.clustering = match value {
                    "auto" => ClusteringMode::Auto,
                    "off" | "none" => ClusteringMode::Off,
                    k => ClusteringMode::Fixed(parse_num(key, k)?),
                }
            }
            "k_max" => self.k_max = parse_num(key, value)?,
            "kmeans_restarts" => self.kmeans_restarts = parse_num(key, value)?,
            "hidden_size" => {
                self.hidden_size = match value {
                    "search" => HiddenSize::Search,
                    n => HiddenSize::Fixed(parse_num(key, n)?),
                }
            }
            "hidden_candidates" => {
                self.hidden_candidates = value
                    .split(',')
                    .map(|v| parse_num(key, v.trim()))
                    .collect::<std::result::Result<_, _>>()?
            }
            "min_partition_rows" => self.min_partition_rows = parse_num(key, value)?,
            "seed" => self.seed = parse_num(key, value)?,
            "worker_count" | "workers" => self.worker_count = parse_num(key, value)?,
            "unseen_label_policy" => {
                self.unseen_label_policy = match value {
                    "error" => UnseenLabelPolicy::Error,
                    "route_to_largest_group" => UnseenLabelPolicy::RouteToLargestGroup,
                    _ => return Err(format!("unknown unseen_label_policy {value:?}")),
                }
            }
            "gpc_signal_variance" => self.gpc_kernel.signal_variance = parse_num(key, value)?,
            "gpc_length_scale" => self.gpc_kernel.length_scale = parse_num(key, value)?,
            "gpc_jitter" => self.gpc_kernel.jitter = parse_num(key, value)?,
            "gpc_optimize" => self.gpc_optimize = parse_bool(key, value)?,
            "gpc_max_rows" => self.gpc_max_rows = parse_num(key, value)?,
            "gpc_max_iterations" => self.gpc_cg.max_iterations = parse_num(key, value)?,
            "gpc_gradient_tolerance" => self.gpc_cg.gradient_norm_tolerance = parse_num(key, value)?,
            "mlp_max_iterations" => self.mlp_cg.max_iterations = parse_num(key, value)?,
            "mlp_gradient_tolerance" => self.mlp_cg.gradient_norm_tolerance = parse_num(key, value)?,
            "line_search_step" => self.line_search.step = parse_num(key, value)?,
            "line_search_tolerance" => self.line_search.tolerance = parse_num(key, value)?,
            _ => return Err(format!("unknown key `{key}`")),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(PipelineError::InvalidConfig(m));
        if !(self.gain_ratio_threshold > 0.0) {
            return fail(format!("gain_ratio_threshold must be positive, got {}", self.gain_ratio_threshold));
        }
        if self.k_max < 2 {
            return fail(format!("k_max must be at least 2, got {}", self.k_max));
        }
        if self.kmeans_restarts == 0 {
            return fail("kmeans_restarts must be at least 1".into());
        }
        if self.min_partition_rows == 0 {
            return fail("min_partition_rows must be positive".into());
        }
        if self.worker_count == 0 {
            return fail("worker_count must be at least 1".into());
        }
        match self.hidden_size {
            HiddenSize::Fixed(0) => return fail("hidden_size must be positive".into()),
            HiddenSize::Search if self.hidden_candidates.is_empty() || self.hidden_candidates.contains(&0) => {
                return fail("hidden_candidates must be a non-empty list of positive sizes".into())
            }
            _ => {}
        }
        if let ClusteringMode::Fixed(k) = self.clustering {
            if k == 0 {
                return fail("a fixed cluster count must be positive".into());
            }
        }
        if !(self.line_search.step > 0.0 && self.line_search.tolerance > 0.0) {
            return fail("line search step and tolerance must be positive".into());
        }
        Ok(())
    }

    /// Text form accepted by [`PipelineConfig::parse`].
    pub fn to_text(&self) -> String {
        let grouping = match &self.grouping {
            GroupingMode::Auto => "auto".to_string(),
            GroupingMode::Off => "off".to_string(),
            GroupingMode::Attribute(a) => a.clone(),
        };
        let clustering = match self.clustering {
            ClusteringMode::Auto => "auto".to_string(),
            ClusteringMode::Off => "off".to_string(),
            ClusteringMode::Fixed(k) => k.to_string(),
        };
        let hidden = match self.hidden_size {
            HiddenSize::Search => "search".to_string(),
            HiddenSize::Fixed(n) => n.to_string(),
        };
        let candidates: Vec<String> = self.hidden_candidates.iter().map(|c| c.to_string()).collect();
        let policy = match self.unseen_label_policy {
            UnseenLabelPolicy::Error => "error",
            UnseenLabelPolicy::RouteToLargestGroup => "route_to_largest_group",
        };
        let mut out = String::new();
        let mut kv = |k: &str, v: &dyn fmt::Display| {
            writeln!(out, "{k} = {v}").expect("writing to a String cannot fail");
        };
        kv("classifier", &self.classifier);
        kv("grouping", &grouping);
        kv("gain_ratio_threshold", &self.gain_ratio_threshold);
        kv("clustering", &clustering);
        kv("k_max", &self.k_max);
        kv("kmeans_restarts", &self.kmeans_restarts);
        kv("hidden_size", &hidden);
        kv("hidden_candidates", &candidates.join(","));
        kv("min_partition_rows", &self.min_partition_rows);
        kv("seed", &self.seed);
        kv("worker_count", &self.worker_count);
        kv("unseen_label_policy", &policy);
        kv("gpc_signal_variance", &self.gpc_kernel.signal_variance);
        kv("gpc_length_scale", &self.gpc_kernel.length_scale);
        kv("gpc_jitter", &self.gpc_kernel.jitter);
        kv("gpc_optimize", &self.gpc_optimize);
        kv("gpc_max_rows", &self.gpc_max_rows);
        kv("gpc_max_iterations", &self.gpc_cg.max_iterations);
        kv("gpc_gradient_tolerance", &self.gpc_cg.gradient_norm_tolerance);
        kv("mlp_max_iterations", &self.mlp_cg.max_iterations);
        kv("mlp_gradient_tolerance", &self.mlp_cg.gradient_norm_tolerance);
        kv("line_search_step", &self.line_search.step);
        kv("line_search_tolerance", &self.line_search.tolerance);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_overrides() {
        let c = PipelineConfig::parse("classifier = gpc\n# comment\ngrouping = 1\nclustering = 3  # trailing\n").unwrap();
        assert_eq!(c.classifier, ClassifierKind::Gpc);
        assert_eq!(c.grouping, GroupingMode::Attribute("1".into()));
        assert_eq!(c.clustering, ClusteringMode::Fixed(3));
        assert_eq!(c.k_max, 8);
        assert_eq!(c.min_partition_rows, 50);
        assert_eq!(c.unseen_label_policy, UnseenLabelPolicy::RouteToLargestGroup);
    }

    #[test]
    fn text_round_trip() {
        let mut c = PipelineConfig::default();
        c.hidden_size = HiddenSize::Fixed(3);
        c.gpc_kernel.length_scale = 2.5;
        c.unseen_label_policy = UnseenLabelPolicy::Error;
        assert_eq!(PipelineConfig::parse(&c.to_text()).unwrap(), c);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(PipelineConfig::parse("k_max = 1"), Err(PipelineError::InvalidConfig(_))));
        assert!(matches!(
            PipelineConfig::parse("seed = 1\nbogus = 2"),
            Err(PipelineError::Config { line: 2, .. })
        ));
        assert!(PipelineConfig::parse("gain_ratio_threshold = 0").is_err());
        assert!(PipelineConfig::parse("classifier mlp").is_err());
    }
}
