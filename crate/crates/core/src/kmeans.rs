//! Lloyd's k-means with seeded restarts, the Davies-Bouldin index, and
//! selection of K by lowest index.

use std::cmp::Ordering;
use std::fmt::Write as _;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_RESTARTS: usize = 10;
pub const MAX_LLOYD_ITERATIONS: usize = 300;

#[derive(Debug, Error, PartialEq)]
pub enum KMeansError {
    #[error("k = {k} exceeds the {distinct} distinct points available")]
    KExceedsRows { k: usize, distinct: usize },
    #[error("k must be at least {min}, got {k}")]
    InvalidK { k: usize, min: usize },
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("centroid list is empty")]
    EmptyCentroidList,
    #[error("Davies-Bouldin index needs at least two clusters")]
    SingleCluster,
}

pub type Result<T> = std::result::Result<T, KMeansError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    pub k: usize,
    /// Sorted lexicographically.
    pub centroids: Vec<Vec<f64>>,
    pub assignments: Vec<usize>,
    pub within_cluster_sse: f64,
    pub dbi: Option<f64>,
}

impl ClusterModel {
    pub fn assign(&self, point: &[f64]) -> Result<usize> {
        assign(&self.centroids, point)
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &a in &self.assignments {
            sizes[a] += 1;
        }
        sizes
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    sq_dist(a, b).sqrt()
}

fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            Ordering::Equal => continue,
            o => return o,
        }
    }
    a.len().cmp(&b.len())
}

/// Nearest centroid by Euclidean distance; ties go to the lowest index.
pub fn assign(centroids: &[Vec<f64>], point: &[f64]) -> Result<usize> {
    let first = centroids.first().ok_or(KMeansError::EmptyCentroidList)?;
    if first.len() != point.len() {
        return Err(KMeansError::DimensionMismatch {
            expected: first.len(),
            actual: point.len(),
        });
    }
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (j, c) in centroids.iter().enumerate() {
        let d = sq_dist(c, point);
        if d < best_d {
            best = j;
            best_d = d;
        }
    }
    Ok(best)
}

/// Distinct points in lexicographic order.
fn distinct_sorted(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut pts: Vec<Vec<f64>> = rows.to_vec();
    pts.sort_by(|a, b| lex_cmp(a, b));
    pts.dedup_by(|a, b| lex_cmp(a, b) == Ordering::Equal);
    pts
}

pub fn distinct_count(rows: &[Vec<f64>]) -> usize {
    distinct_sorted(rows).len()
}

/// Result of one Lloyd run from a given start.
#[derive(Debug, Clone)]
pub struct LloydRun {
    pub centroids: Vec<Vec<f64>>,
    pub assignments: Vec<usize>,
    /// SSE after each assignment step.
    pub sse_trace: Vec<f64>,
    pub converged: bool,
}

impl LloydRun {
    pub fn sse(&self) -> f64 {
        *self.sse_trace.last().unwrap_or(&0.0)
    }
}

fn assign_all(rows: &[Vec<f64>], centroids: &[Vec<f64>]) -> (Vec<usize>, f64) {
    let mut sse = 0.0;
    let assignments = rows
        .iter()
        .map(|r| {
            let j = assign(centroids, r).expect("dimensions checked by caller");
            sse += sq_dist(r, &centroids[j]);
            j
        })
        .collect();
    (assignments, sse)
}

/// Lloyd iteration until no assignment changes or `max_iterations`. An empty
/// cluster gets the point farthest from its current centroid.
pub fn lloyd(rows: &[Vec<f64>], initial: Vec<Vec<f64>>, max_iterations: usize) -> LloydRun {
    let k = initial.len();
    let dim = rows.first().map_or(0, |r| r.len());
    let mut centroids = initial;
    let (mut assignments, sse) = assign_all(rows, &centroids);
    let mut sse_trace = vec![sse];
    let mut converged = false;

    for _ in 0..max_iterations {
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (r, &a) in rows.iter().zip(&assignments) {
            counts[a] += 1;
            for (s, x) in sums[a].iter_mut().zip(r) {
                *s += x;
            }
        }
        for j in 0..k {
            if counts[j] > 0 {
                centroids[j] = sums[j].iter().map(|s| s / counts[j] as f64).collect();
            }
        }
        for j in 0..k {
            if counts[j] == 0 {
                let far = rows
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| counts[assignments[*i]] > 1)
                    .max_by(|(i, a), (l, b)| {
                        sq_dist(a, &centroids[assignments[*i]])
                            .total_cmp(&sq_dist(b, &centroids[assignments[*l]]))
                            .then(l.cmp(i))
                    })
                    .map(|(i, _)| i);
                if let Some(i) = far {
                    counts[assignments[i]] -= 1;
                    counts[j] = 1;
                    assignments[i] = j;
                    centroids[j] = rows[i].clone();
                }
            }
        }
        let (next, sse) = assign_all(rows, &centroids);
        sse_trace.push(sse);
        if next == assignments {
            converged = true;
            break;
        }
        assignments = next;
    }
    LloydRun {
        centroids,
        assignments,
        sse_trace,
        converged,
    }
}

fn canonicalize(centroids: Vec<Vec<f64>>, assignments: Vec<usize>) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut order: Vec<usize> = (0..centroids.len()).collect();
    order.sort_by(|&a, &b| lex_cmp(&centroids[a], &centroids[b]));
    let mut remap = vec![0; centroids.len()];
    for (new, &old) in order.iter().enumerate() {
        remap[old] = new;
    }
    let sorted = order.iter().map(|&o| centroids[o].clone()).collect();
    (sorted, assignments.into_iter().map(|a| remap[a]).collect())
}

/// Best of `restarts` Lloyd runs (lowest SSE). Starts are drawn from the
/// lexicographically sorted distinct points, so the result does not depend
/// on row order.
pub fn kmeans_fit(rows: &[Vec<f64>], k: usize, seed: u64, restarts: usize) -> Result<ClusterModel> {
    if k == 0 {
        return Err(KMeansError::InvalidK { k, min: 1 });
    }
    let distinct = distinct_sorted(rows);
    if distinct.len() < k {
        return Err(KMeansError::KExceedsRows {
            k,
            distinct: distinct.len(),
        });
    }
    let dim = distinct[0].len();
    if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
        return Err(KMeansError::DimensionMismatch {
            expected: dim,
            actual: bad.len(),
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<LloydRun> = None;
    for _ in 0..restarts.max(1) {
        let mut picks = sample(&mut rng, distinct.len(), k).into_vec();
        picks.sort_unstable();
        let init = picks.iter().map(|&i| distinct[i].clone()).collect();
        let run = lloyd(rows, init, MAX_LLOYD_ITERATIONS);
        if best.as_ref().is_none_or(|b| run.sse() < b.sse()) {
            best = Some(run);
        }
    }
    let run = best.expect("at least one restart");
    let sse = run.sse();
    let (centroids, assignments) = canonicalize(run.centroids, run.assignments);
    let mut model = ClusterModel {
        k,
        centroids,
        assignments,
        within_cluster_sse: sse,
        dbi: None,
    };
    if k >= 2 {
        model.dbi = Some(davies_bouldin(rows, &model)?);
    }
    Ok(model)
}

/// Mean over clusters of the worst `(S_i + S_j) / M_ij`, where `S` is the
/// mean member-to-centroid distance and `M` the centroid distance.
pub fn davies_bouldin(rows: &[Vec<f64>], model: &ClusterModel) -> Result<f64> {
    let k = model.centroids.len();
    if k < 2 {
        return Err(KMeansError::SingleCluster);
    }
    let mut scatter = vec![0.0; k];
    let mut counts = vec![0usize; k];
    for (r, &a) in rows.iter().zip(&model.assignments) {
        scatter[a] += dist(r, &model.centroids[a]);
        counts[a] += 1;
    }
    for (s, &c) in scatter.iter_mut().zip(&counts) {
        if c > 0 {
            *s /= c as f64;
        }
    }
    let mut total = 0.0;
    for i in 0..k {
        let mut worst: f64 = 0.0;
        for j in 0..k {
            if i == j {
                continue;
            }
            let m = dist(&model.centroids[i], &model.centroids[j]);
            let r = if m > 0.0 {
                (scatter[i] + scatter[j]) / m
            } else {
                f64::INFINITY
            };
            worst = worst.max(r);
        }
        total += worst;
    }
    Ok(total / k as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KSelection {
    pub chosen: ClusterModel,
    /// `(k, dbi)` for every k that could be fitted, ascending in k.
    pub curve: Vec<(usize, f64)>,
}

impl KSelection {
    /// True when the lowest index sits at the largest k of a strictly
    /// decreasing curve, i.e. there is no interior minimum.
    pub fn minimum_at_boundary(&self) -> bool {
        let strictly_decreasing = self.curve.windows(2).all(|w| w[1].1 < w[0].1);
        strictly_decreasing && self.curve.len() > 1 && self.curve.last().map(|c| c.0) == Some(self.chosen.k)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,dbi\n");
        for (k, d) in &self.curve {
            writeln!(out, "{k},{d:.6}").expect("writing to a String cannot fail");
        }
        out
    }
}

/// Fits k = 2..=k_max and keeps the lowest Davies-Bouldin index. Stops early
/// once k exceeds the number of distinct points.
pub fn select_k(rows: &[Vec<f64>], k_max: usize, seed: u64, restarts: usize) -> Result<KSelection> {
    if k_max < 2 {
        return Err(KMeansError::InvalidK { k: k_max, min: 2 });
    }
    let mut curve = Vec::new();
    let mut best: Option<ClusterModel> = None;
    for k in 2..=k_max {
        let model = match kmeans_fit(rows, k, seed.wrapping_add(k as u64), restarts) {
            Ok(m) => m,
            Err(KMeansError::KExceedsRows { .. }) if best.is_some() => break,
            Err(e) => return Err(e),
        };
        let dbi = model.dbi.expect("k >= 2 carries an index");
        curve.push((k, dbi));
        if best.as_ref().is_none_or(|b| dbi < b.dbi.unwrap_or(f64::INFINITY)) {
            best = Some(model);
        }
    }
    Ok(KSelection {
        chosen: best.expect("k = 2 fitted"),
        curve,
    })
}
