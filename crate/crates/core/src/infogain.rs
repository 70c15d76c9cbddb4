//! Entropy, information gain and gain ratio over nominal attributes, and
//! grouping of a table by the winning attribute.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{AttributeKind, Class, DataTable};

/// Minimum gain ratio for a grouping to count as significant.
pub const DEFAULT_GAIN_RATIO_THRESHOLD: f64 = 0.01;

#[derive(Debug, Error, PartialEq)]
pub enum InfoGainError {
    #[error("entropy of an all-zero count vector is undefined")]
    AllZero,
    #[error("attribute {0} is not nominal")]
    NotNominal(usize),
    #[error("attribute {0} has a single value; split information is zero")]
    SplitInfoZero(usize),
    #[error("table is empty")]
    EmptyTable,
    #[error("table has rows without a target")]
    MissingTarget,
    #[error("schema has no nominal attributes")]
    NoNominalAttributes,
}

pub type Result<T> = std::result::Result<T, InfoGainError>;

/// Shannon entropy in bits of a count vector, with `0 log 0 = 0`.
pub fn entropy(counts: &[usize]) -> Result<f64> {
    let total: usize = counts.iter().sum();
    if total == 0 {
        return Err(InfoGainError::AllZero);
    }
    let n = total as f64;
    Ok(counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum::<f64>()
        .max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainStats {
    pub info_gain: f64,
    pub split_info: f64,
    pub gain_ratio: f64,
}

/// Per-value class counts `(negative, positive)` for one nominal attribute.
fn value_class_counts(table: &DataTable, attribute: usize) -> Result<BTreeMap<&str, [usize; 2]>> {
    let slot = table
        .schema()
        .nominal_slot(attribute)
        .ok_or(InfoGainError::NotNominal(attribute))?;
    let mut counts: BTreeMap<&str, [usize; 2]> = BTreeMap::new();
    for r in table.rows() {
        let class = r.target.ok_or(InfoGainError::MissingTarget)?;
        let e = counts.entry(r.nominal[slot].as_str()).or_default();
        e[(class == Class::Positive) as usize] += 1;
    }
    Ok(counts)
}

/// Information gain, split information and their ratio for one nominal
/// attribute (zero-based schema index).
pub fn gain_ratio(table: &DataTable, attribute: usize) -> Result<GainStats> {
    let counts = value_class_counts(table, attribute)?;
    if table.is_empty() {
        return Err(InfoGainError::EmptyTable);
    }
    let n = table.len() as f64;
    let mut totals = [0usize; 2];
    let mut conditional = 0.0;
    let mut sizes = Vec::with_capacity(counts.len());
    for c in counts.values() {
        totals[0] += c[0];
        totals[1] += c[1];
        let size = c[0] + c[1];
        sizes.push(size);
        conditional += size as f64 / n * entropy(c)?;
    }
    let class_entropy = entropy(&totals)?;
    let info_gain = (class_entropy - conditional).clamp(0.0, class_entropy);
    let split_info = entropy(&sizes)?;
    if split_info <= 0.0 {
        return Err(InfoGainError::SplitInfoZero(attribute));
    }
    Ok(GainStats {
        info_gain,
        split_info,
        gain_ratio: info_gain / split_info,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeGain {
    /// Zero-based schema index.
    pub attribute: usize,
    pub name: String,
    pub values: usize,
    pub stats: Option<GainStats>,
    /// Why the attribute cannot be selected, if it cannot.
    pub excluded: Option<String>,
}

impl AttributeGain {
    pub fn gain_ratio(&self) -> Option<f64> {
        self.stats.map(|s| s.gain_ratio)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct GainRatioReport {
    pub entries: Vec<AttributeGain>,
}

impl GainRatioReport {
    pub fn get(&self, attribute: usize) -> Option<&AttributeGain> {
        self.entries.iter().find(|e| e.attribute == attribute)
    }

    /// Selectable entries ordered by descending gain ratio; ties keep the
    /// lower attribute index first.
    pub fn ranked(&self) -> Vec<&AttributeGain> {
        let mut r: Vec<&AttributeGain> = self.entries.iter().filter(|e| e.stats.is_some()).collect();
        r.sort_by(|a, b| {
            b.gain_ratio()
                .partial_cmp(&a.gain_ratio())
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.attribute.cmp(&b.attribute))
        });
        r
    }

    pub fn rank_of(&self, attribute: usize) -> Option<usize> {
        self.ranked()
            .iter()
            .position(|e| e.attribute == attribute)
            .map(|p| p + 1)
    }

    /// Mean report over several reports on the same schema (e.g. one per
    /// training fold). Attributes excluded in any report are excluded.
    pub fn mean(reports: &[GainRatioReport]) -> GainRatioReport {
        let Some(first) = reports.first() else {
            return GainRatioReport::default();
        };
        let m = reports.len() as f64;
        let entries = first
            .entries
            .iter()
            .map(|e| {
                let all: Option<Vec<GainStats>> = reports
                    .iter()
                    .map(|r| r.get(e.attribute).and_then(|x| x.stats))
                    .collect();
                let stats = all.map(|v| GainStats {
                    info_gain: v.iter().map(|s| s.info_gain).sum::<f64>() / m,
                    split_info: v.iter().map(|s| s.split_info).sum::<f64>() / m,
                    gain_ratio: v.iter().map(|s| s.gain_ratio).sum::<f64>() / m,
                });
                AttributeGain {
                    attribute: e.attribute,
                    name: e.name.clone(),
                    values: reports
                        .iter()
                        .filter_map(|r| r.get(e.attribute).map(|x| x.values))
                        .max()
                        .unwrap_or(e.values),
                    excluded: if stats.is_none() {
                        Some("excluded in at least one report".into())
                    } else {
                        None
                    },
                    stats,
                }
            })
            .collect();
        GainRatioReport { entries }
    }

    /// Comma-delimited table: one-based attribute number, name, gain figures
    /// and rank among selectable attributes.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("attribute,name,values,info_gain,split_info,gain_ratio,rank,note\n");
        for e in &self.entries {
            let rank = self.rank_of(e.attribute).map(|r| r.to_string()).unwrap_or_default();
            match e.stats {
                Some(s) => writeln!(
                    out,
                    "{},{},{},{:.6},{:.6},{:.6},{},",
                    e.attribute + 1,
                    e.name,
                    e.values,
                    s.info_gain,
                    s.split_info,
                    s.gain_ratio,
                    rank
                ),
                None => writeln!(
                    out,
                    "{},{},{},,,,,{}",
                    e.attribute + 1,
                    e.name,
                    e.values,
                    e.excluded.as_deref().unwrap_or("")
                ),
            }
            .expect("writing to a String cannot fail");
        }
        out
    }
}

/// Gain figures for every nominal attribute in the schema.
pub fn gain_ratio_report(table: &DataTable) -> Result<GainRatioReport> {
    if table.is_empty() {
        return Err(InfoGainError::EmptyTable);
    }
    let schema = table.schema();
    let mut entries = Vec::new();
    for idx in schema.nominal_indices() {
        let values = value_class_counts(table, idx)?.len();
        let name = schema.attributes()[idx].name.clone();
        let (stats, excluded) = match gain_ratio(table, idx) {
            Ok(s) => (Some(s), None),
            Err(InfoGainError::SplitInfoZero(_)) => (None, Some("single-valued".to_string())),
            Err(e) => return Err(e),
        };
        entries.push(AttributeGain {
            attribute: idx,
            name,
            values,
            stats,
            excluded,
        });
    }
    Ok(GainRatioReport { entries })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupingSelection {
    /// Zero-based index of the chosen attribute, if its gain ratio exceeds
    /// the threshold.
    pub selected: Option<usize>,
    pub report: GainRatioReport,
}

/// Picks the nominal attribute with the largest gain ratio, provided that
/// ratio is strictly above `threshold`.
pub fn select_grouping_attribute(table: &DataTable, threshold: f64) -> Result<GroupingSelection> {
    if table.schema().nominal_indices().is_empty() {
        return Err(InfoGainError::NoNominalAttributes);
    }
    let report = gain_ratio_report(table)?;
    let selected = report
        .ranked()
        .first()
        .filter(|e| e.gain_ratio().is_some_and(|g| g > threshold))
        .map(|e| e.attribute);
    Ok(GroupingSelection { selected, report })
}

/// Splits rows by the raw label of a nominal attribute.
pub fn partition_by_attribute(table: &DataTable, attribute: usize) -> Result<BTreeMap<String, DataTable>> {
    let schema = table.schema();
    match schema.attribute(attribute) {
        Some(a) if a.kind == AttributeKind::Nominal => {}
        _ => return Err(InfoGainError::NotNominal(attribute)),
    }
    let slot = schema.nominal_slot(attribute).expect("nominal attribute has a slot");
    let mut index: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, r) in table.rows().iter().enumerate() {
        index.entry(r.nominal[slot].clone()).or_default().push(i);
    }
    Ok(index
        .into_iter()
        .map(|(label, rows)| (label, table.subset(&rows)))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Schema;
    use std::sync::Arc;

    fn table(attr: &[&str], y: &[bool]) -> DataTable {
        let schema = Arc::new(Schema::parse("a = nominal\nb = nominal\nx = numeric\nt = target\npositive_label = +\n").unwrap());
        let mut text = String::from("a,b,x,t\n");
        for (v, &c) in attr.iter().zip(y) {
            text.push_str(&format!("{v},k,0,{}\n", if c { "+" } else { "-" }));
        }
        DataTable::from_reader(text.as_bytes(), schema, true).unwrap()
    }

    #[test]
    fn entropy_values() {
        assert_eq!(entropy(&[2, 2]).unwrap(), 1.0);
        assert_eq!(entropy(&[4, 0]).unwrap(), 0.0);
        assert!((entropy(&[3, 1]).unwrap() - 0.811_278_124_459_132_8).abs() < 1e-12);
        assert_eq!(entropy(&[0, 0]), Err(InfoGainError::AllZero));
        assert_eq!(entropy(&[]), Err(InfoGainError::AllZero));
    }

    #[test]
    fn determining_attribute() {
        let t = table(&["a", "a", "b", "b"], &[true, true, false, false]);
        let s = gain_ratio(&t, 0).unwrap();
        assert_eq!((s.info_gain, s.split_info, s.gain_ratio), (1.0, 1.0, 1.0));
    }

    #[test]
    fn uneven_attribute() {
        // H(y)=1; H(y|a)=3/4*H(2,1); split=H(3,1)
        let t = table(&["a", "a", "a", "b"], &[true, true, false, false]);
        let s = gain_ratio(&t, 0).unwrap();
        let h21 = -(2.0f64 / 3.0) * (2.0f64 / 3.0).log2() - (1.0f64 / 3.0) * (1.0f64 / 3.0).log2();
        let ig = 1.0 - 0.75 * h21;
        let split = -(0.75f64) * 0.75f64.log2() - 0.25 * 0.25f64.log2();
        assert!((s.info_gain - ig).abs() < 1e-12);
        assert!((s.split_info - split).abs() < 1e-12);
        assert!((s.info_gain - 0.3113).abs() < 1e-4);
        assert!((s.split_info - 0.8113).abs() < 1e-4);
        assert!((s.gain_ratio - 0.3837).abs() < 1e-4);
    }

    #[test]
    fn single_valued_attribute_is_excluded() {
        let t = table(&["a", "a", "a", "b"], &[true, true, false, false]);
        assert_eq!(gain_ratio(&t, 1), Err(InfoGainError::SplitInfoZero(1)));
        let report = gain_ratio_report(&t).unwrap();
        assert!(report.get(1).unwrap().stats.is_none());
        assert_eq!(report.ranked().len(), 1);
        assert_eq!(gain_ratio(&t, 2), Err(InfoGainError::NotNominal(2)));
    }

    #[test]
    fn selection_honors_threshold() {
        let t = table(&["a", "a", "b", "b"], &[true, true, false, false]);
        assert_eq!(select_grouping_attribute(&t, 0.01).unwrap().selected, Some(0));
        // independent of the target
        let t = table(&["a", "b", "a", "b"], &[true, true, false, false]);
        let sel = select_grouping_attribute(&t, 0.01).unwrap();
        assert_eq!(sel.selected, None);
        assert_eq!(sel.report.get(0).unwrap().stats.unwrap().info_gain, 0.0);
    }

    #[test]
    fn partitions_cover_table() {
        let t = table(&["x", "y", "x", "z", "y"], &[true, false, true, false, true]);
        let groups = partition_by_attribute(&t, 0).unwrap();
        assert_eq!(groups.keys().collect::<Vec<_>>(), vec!["x", "y", "z"]);
        assert_eq!(groups.values().map(|g| g.len()).sum::<usize>(), 5);
        let single = partition_by_attribute(&t, 1).unwrap();
        assert_eq!(single.len(), 1);
        assert_eq!(single["k"].len(), 5);
        assert!(partition_by_attribute(&t, 2).is_err());
    }

    #[test]
    fn mean_report() {
        let a = table(&["a", "a", "b", "b"], &[true, true, false, false]);
        let b = table(&["a", "b", "a", "b"], &[true, true, false, false]);
        let m = GainRatioReport::mean(&[gain_ratio_report(&a).unwrap(), gain_ratio_report(&b).unwrap()]);
        assert!((m.get(0).unwrap().gain_ratio().unwrap() - 0.5).abs() < 1e-12);
        assert!(m.to_csv().starts_with("attribute,name"));
    }
}
