//! Tracklet clustering: visual similarity, temporal adjacency, their convex
//! combination, and the clustering algorithms that consume them.

mod affinity;

pub use affinity::{affinity_propagation, ApOutcome};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One clusterable tracklet: unit-norm embedding plus normalized position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackletDescriptor {
    pub tracklet_id: String,
    pub embedding: Vec<f64>,
    /// Tracklet midpoint normalized by video length, in [0, 1].
    pub position: f64,
}

impl TrackletDescriptor {
    pub fn validate(&self) -> Result<()> {
        if self.embedding.is_empty() || self.embedding.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data(format!(
                "tracklet '{}' has an empty or non-finite embedding",
                self.tracklet_id
            )));
        }
        let norm = self.embedding.iter().map(|v| v * v).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-6 {
            return Err(Error::Data(format!(
                "tracklet '{}' embedding norm is {norm}, expected 1 within 1e-6",
                self.tracklet_id
            )));
        }
        if !(0.0..=1.0).contains(&self.position) {
            return Err(Error::Data(format!(
                "tracklet '{}' position {} outside [0, 1]",
                self.tracklet_id, self.position
            )));
        }
        Ok(())
    }
}

/// The similarity matrices for one video's tracklets.
#[derive(Debug, Clone)]
pub struct SimilarityBundle {
    pub visual: Array2<f64>,
    pub temporal: Array2<f64>,
    pub combined: Array2<f64>,
    pub gamma: f64,
    pub alpha: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClusterAlgorithm {
    /// Connected components over `S >= theta`, on visual similarity alone.
    Threshold,
    /// Affinity Propagation on visual similarity alone.
    Ap,
    /// Affinity Propagation on `alpha * V + (1 - alpha) * T`.
    TemporalAp,
}

impl std::str::FromStr for ClusterAlgorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "threshold" => Ok(ClusterAlgorithm::Threshold),
            "ap" => Ok(ClusterAlgorithm::Ap),
            "temporal_ap" => Ok(ClusterAlgorithm::TemporalAp),
            other => Err(Error::Config(format!(
                "unknown clustering algorithm '{other}' (expected threshold, ap or temporal_ap)"
            ))),
        }
    }
}

impl std::fmt::Display for ClusterAlgorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ClusterAlgorithm::Threshold => "threshold",
            ClusterAlgorithm::Ap => "ap",
            ClusterAlgorithm::TemporalAp => "temporal_ap",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClusteringConfig {
    pub algorithm: ClusterAlgorithm,
    pub threshold: f64,
    pub preference: f64,
    pub gamma: f64,
    pub alpha: f64,
    pub damping: f64,
    pub max_iterations: usize,
    pub convergence_window: usize,
}

impl Default for ClusteringConfig {
    fn default() -> Self {
        ClusteringConfig {
            algorithm: ClusterAlgorithm::TemporalAp,
            threshold: 0.5,
            preference: 0.0,
            gamma: 1.0,
            alpha: 0.5,
            damping: 0.5,
            max_iterations: 200,
            convergence_window: 15,
        }
    }
}

impl ClusteringConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(Error::Config(format!(
                "threshold must lie in [0, 1], got {}",
                self.threshold
            )));
        }
        if !self.preference.is_finite() {
            return Err(Error::Config("preference must be finite".into()));
        }
        if !(self.gamma > 0.0) || !self.gamma.is_finite() {
            return Err(Error::Config(format!(
                "gamma must be positive, got {}",
                self.gamma
            )));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Config(format!(
                "alpha must lie in [0, 1], got {}",
                self.alpha
            )));
        }
        if !(0.5..1.0).contains(&self.damping) {
            return Err(Error::Config(format!(
                "damping must lie in [0.5, 1), got {}",
                self.damping
            )));
        }
        if self.max_iterations == 0 || self.convergence_window == 0 {
            return Err(Error::Config(
                "max_iterations and convergence_window must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum();
    let nb: f64 = b.iter().map(|x| x * x).sum();
    dot / (na * nb).sqrt()
}

/// Pairwise cosine similarity mapped to [0, 1] via `(x + 1) / 2`.
/// Symmetric with unit diagonal.
pub fn visual_similarity(descriptors: &[TrackletDescriptor]) -> Result<Array2<f64>> {
    if descriptors.is_empty() {
        return Err(Error::Data("visual similarity needs at least one tracklet".into()));
    }
    let dim = descriptors[0].embedding.len();
    for d in descriptors {
        d.validate()?;
        if d.embedding.len() != dim {
            return Err(Error::Data(format!(
                "embedding dimension mismatch at tracklet '{}'",
                d.tracklet_id
            )));
        }
    }
    let n = descriptors.len();
    let mut v = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        v[[i, i]] = 1.0;
        for j in 0..i {
            let c = cosine(&descriptors[i].embedding, &descriptors[j].embedding);
            let mapped = (0.5 * (c + 1.0)).clamp(0.0, 1.0);
            v[[i, j]] = mapped;
            v[[j, i]] = mapped;
        }
    }
    Ok(v)
}

/// Temporal adjacency `T_ij = exp(-gamma * |p_i - p_j|)`: symmetric, unit
/// diagonal, entries in (0, 1], strictly decreasing in the position gap.
pub fn temporal_adjacency(descriptors: &[TrackletDescriptor], gamma: f64) -> Result<Array2<f64>> {
    if descriptors.is_empty() {
        return Err(Error::Data("temporal adjacency needs at least one tracklet".into()));
    }
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::Config(format!("gamma must be positive, got {gamma}")));
    }
    let n = descriptors.len();
    let mut t = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        t[[i, i]] = 1.0;
        for j in 0..i {
            let v = (-gamma * (descriptors[i].position - descriptors[j].position).abs()).exp();
            t[[i, j]] = v;
            t[[j, i]] = v;
        }
    }
    Ok(t)
}

/// Elementwise convex combination `alpha * V + (1 - alpha) * T`.
pub fn combine(visual: &Array2<f64>, temporal: &Array2<f64>, alpha: f64) -> Result<Array2<f64>> {
    if visual.dim() != temporal.dim() {
        return Err(Error::Data(format!(
            "matrix shape mismatch: {:?} vs {:?}",
            visual.dim(),
            temporal.dim()
        )));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Config(format!("alpha must lie in [0, 1], got {alpha}")));
    }
    Ok(alpha * visual + (1.0 - alpha) * temporal)
}

/// Builds V, T and their combination for one video.
pub fn similarity_bundle(
    descriptors: &[TrackletDescriptor],
    gamma: f64,
    alpha: f64,
) -> Result<SimilarityBundle> {
    let visual = visual_similarity(descriptors)?;
    let temporal = temporal_adjacency(descriptors, gamma)?;
    let combined = combine(&visual, &temporal, alpha)?;
    Ok(SimilarityBundle {
        visual,
        temporal,
        combined,
        gamma,
        alpha,
    })
}

/// Connected components of the graph with edges where `S_ij >= theta`
/// (`i != j`). Labels are numbered by first appearance.
pub fn threshold_clustering(similarity: &Array2<f64>, theta: f64) -> Result<Vec<usize>> {
    let n = similarity.nrows();
    if similarity.ncols() != n {
        return Err(Error::Data(format!(
            "similarity matrix must be square, got {}x{}",
            n,
            similarity.ncols()
        )));
    }
    if similarity.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("similarity matrix must be finite".into()));
    }
    if !(0.0..=1.0).contains(&theta) {
        return Err(Error::Config(format!("threshold must lie in [0, 1], got {theta}")));
    }
    let mut labels = vec![usize::MAX; n];
    let mut next = 0usize;
    let mut stack = Vec::new();
    for start in 0..n {
        if labels[start] != usize::MAX {
            continue;
        }
        labels[start] = next;
        stack.push(start);
        while let Some(i) = stack.pop() {
            for j in 0..n {
                if j != i && labels[j] == usize::MAX && similarity[[i, j]] >= theta {
                    labels[j] = next;
                    stack.push(j);
                }
            }
        }
        next += 1;
    }
    Ok(labels)
}

/// Number of distinct cluster labels: the entity count.
pub fn count_entities(labels: &[usize]) -> usize {
    let mut seen: Vec<usize> = labels.to_vec();
    seen.sort_unstable();
    seen.dedup();
    seen.len()
}

/// One video's clustering result.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterOutcome {
    pub labels: Vec<usize>,
    /// Exemplar point indices; empty for the threshold algorithm.
    pub exemplars: Vec<usize>,
    pub converged: bool,
    pub iterations: usize,
}

impl ClusterOutcome {
    pub fn entity_count(&self) -> usize {
        count_entities(&self.labels)
    }
}

/// Clusters one video's tracklets with the configured algorithm.
pub fn cluster(descriptors: &[TrackletDescriptor], cfg: &ClusteringConfig) -> Result<ClusterOutcome> {
    cfg.validate()?;
    if descriptors.is_empty() {
        return Err(Error::Data("cannot cluster zero tracklets".into()));
    }
    let visual = visual_similarity(descriptors)?;
    match cfg.algorithm {
        ClusterAlgorithm::Threshold => {
            let labels = threshold_clustering(&visual, cfg.threshold)?;
            Ok(ClusterOutcome {
                labels,
                exemplars: Vec::new(),
                converged: true,
                iterations: 0,
            })
        }
        ClusterAlgorithm::Ap => {
            let out = affinity_propagation(
                &visual,
                cfg.preference,
                cfg.damping,
                cfg.max_iterations,
                cfg.convergence_window,
            )?;
            Ok(ClusterOutcome {
                labels: out.labels,
                exemplars: out.exemplars,
                converged: out.converged,
                iterations: out.iterations,
            })
        }
        ClusterAlgorithm::TemporalAp => {
            let temporal = temporal_adjacency(descriptors, cfg.gamma)?;
            let combined = combine(&visual, &temporal, cfg.alpha)?;
            let out = affinity_propagation(
                &combined,
                cfg.preference,
                cfg.damping,
                cfg.max_iterations,
                cfg.convergence_window,
            )?;
            Ok(ClusterOutcome {
                labels: out.labels,
                exemplars: out.exemplars,
                converged: out.converged,
                iterations: out.iterations,
            })
        }
    }
}
