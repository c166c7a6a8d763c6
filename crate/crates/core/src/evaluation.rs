//! Fragmentation-rate / false-positive-rate metrics, FPR-constrained
//! hyperparameter selection, grid search, and leave-one-out cross-validation
//! over videos.

use std::collections::BTreeMap;

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clustering::{
    affinity_propagation, combine, threshold_clustering, visual_similarity, ClusterAlgorithm,
    ClusteringConfig, TrackletDescriptor,
};
use crate::error::{Error, Result};

/// Ground truth for one video: tracklet id -> entity id. Every clustered
/// tracklet must appear in the map.
pub type TrackletTruth = BTreeMap<String, String>;

/// FR and FPR of one clustering of one video.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoMetrics {
    pub video_id: String,
    pub tracklets: usize,
    pub entities: usize,
    pub clusters: usize,
    /// Predicted clusters per true entity; 1 is perfect.
    pub fr: f64,
    /// Fraction of merged tracklet pairs whose true entities differ.
    pub fpr: f64,
}

/// Pluggable false-positive definition so an alternative formula can be
/// swapped in behind the same evaluation pipeline.
pub trait FalsePositiveMetric: Sync {
    fn name(&self) -> &'static str;
    /// `labels[i]` is the cluster of tracklet `i`, `entities[i]` its true entity.
    fn rate(&self, labels: &[usize], entities: &[usize]) -> f64;
}

/// Impure-pair fraction: among all same-cluster tracklet pairs, the share
/// whose true entities differ. 0 when no pairs were merged, so the
/// no-clustering baseline scores 0 exactly.
#[derive(Debug, Clone, Copy, Default)]
pub struct PairImpurity;

impl FalsePositiveMetric for PairImpurity {
    fn name(&self) -> &'static str {
        "pair_impurity"
    }

    fn rate(&self, labels: &[usize], entities: &[usize]) -> f64 {
        let mut merged = 0u64;
        let mut impure = 0u64;
        for i in 0..labels.len() {
            for j in 0..i {
                if labels[i] == labels[j] {
                    merged += 1;
                    if entities[i] != entities[j] {
                        impure += 1;
                    }
                }
            }
        }
        if merged == 0 {
            0.0
        } else {
            impure as f64 / merged as f64
        }
    }
}

fn distinct(values: &[usize]) -> usize {
    let mut v = values.to_vec();
    v.sort_unstable();
    v.dedup();
    v.len()
}

/// `|C| / |E|`: predicted cluster count over true entity count.
pub fn fragmentation_rate(labels: &[usize], entities: &[usize]) -> Result<f64> {
    if labels.is_empty() || labels.len() != entities.len() {
        return Err(Error::Data(format!(
            "fragmentation rate needs matching non-empty labels ({}) and entities ({})",
            labels.len(),
            entities.len()
        )));
    }
    Ok(distinct(labels) as f64 / distinct(entities) as f64)
}

/// Default false-positive rate (pair impurity).
pub fn false_positive_rate(labels: &[usize], entities: &[usize]) -> Result<f64> {
    if labels.is_empty() || labels.len() != entities.len() {
        return Err(Error::Data(format!(
            "false positive rate needs matching non-empty labels ({}) and entities ({})",
            labels.len(),
            entities.len()
        )));
    }
    Ok(PairImpurity.rate(labels, entities))
}

/// Maps tracklet ids through the truth and computes both metrics.
pub fn evaluate_video(
    video_id: &str,
    tracklet_ids: &[String],
    labels: &[usize],
    truth: &TrackletTruth,
    metric: &dyn FalsePositiveMetric,
) -> Result<VideoMetrics> {
    if tracklet_ids.len() != labels.len() || tracklet_ids.is_empty() {
        return Err(Error::Data(format!(
            "video '{video_id}': {} tracklets but {} labels",
            tracklet_ids.len(),
            labels.len()
        )));
    }
    let mut entity_index: BTreeMap<&str, usize> = BTreeMap::new();
    let mut entities = Vec::with_capacity(tracklet_ids.len());
    for id in tracklet_ids {
        let entity = truth.get(id).ok_or_else(|| {
            Error::Data(format!(
                "video '{video_id}': tracklet '{id}' is missing from the ground truth"
            ))
        })?;
        let next = entity_index.len();
        entities.push(*entity_index.entry(entity.as_str()).or_insert(next));
    }
    Ok(VideoMetrics {
        video_id: video_id.to_string(),
        tracklets: labels.len(),
        entities: distinct(&entities),
        clusters: distinct(labels),
        fr: fragmentation_rate(labels, &entities)?,
        fpr: metric.rate(labels, &entities),
    })
}

/// Mean and population standard deviation of FR and FPR over videos.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub fr_mean: f64,
    pub fr_std: f64,
    pub fpr_mean: f64,
    pub fpr_std: f64,
}

pub fn aggregate(metrics: &[VideoMetrics]) -> Result<Aggregate> {
    if metrics.is_empty() {
        return Err(Error::Data("cannot aggregate zero videos".into()));
    }
    let n = metrics.len() as f64;
    let fr_mean = metrics.iter().map(|m| m.fr).sum::<f64>() / n;
    let fpr_mean = metrics.iter().map(|m| m.fpr).sum::<f64>() / n;
    let fr_var = metrics.iter().map(|m| (m.fr - fr_mean).powi(2)).sum::<f64>() / n;
    let fpr_var = metrics.iter().map(|m| (m.fpr - fpr_mean).powi(2)).sum::<f64>() / n;
    Ok(Aggregate {
        fr_mean,
        fr_std: fr_var.sqrt(),
        fpr_mean,
        fpr_std: fpr_var.sqrt(),
    })
}

/// Threshold grid [0, 0.01, ..., 1]: 101 points.
pub fn threshold_grid() -> Vec<f64> {
    (0..=100).map(|i| i as f64 / 100.0).collect()
}

/// Preference grid [-5, -4.75, ..., 5]: 41 points.
pub fn preference_grid() -> Vec<f64> {
    (0..=40).map(|i| -5.0 + i as f64 * 0.25).collect()
}

/// Gamma grid [0.1, 0.2, ..., 0.9] plus [1, 1.375, ..., 10]: 34 points.
pub fn gamma_grid() -> Vec<f64> {
    let mut g: Vec<f64> = (1..=9).map(|i| i as f64 / 10.0).collect();
    g.extend((0..=24).map(|i| 1.0 + i as f64 * 0.375));
    g
}

/// Alpha grid [0, 0.05, ..., 1]: 21 points.
pub fn alpha_grid() -> Vec<f64> {
    (0..=20).map(|i| i as f64 / 20.0).collect()
}

/// Hyperparameter grids per algorithm. Defaults are the full sweep ranges;
/// the desk-scale suites pass reduced grids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grids {
    pub thresholds: Vec<f64>,
    pub preferences: Vec<f64>,
    pub gammas: Vec<f64>,
    pub alphas: Vec<f64>,
}

impl Default for Grids {
    fn default() -> Self {
        Grids {
            thresholds: threshold_grid(),
            preferences: preference_grid(),
            gammas: gamma_grid(),
            alphas: alpha_grid(),
        }
    }
}

impl Grids {
    /// Reduced grid for desk-scale runs. The preference points sit well away
    /// from the merge transition of well-separated synthetic data (which
    /// lives near 0 for unit-norm centroids at pairwise distance >= 1.2),
    /// and alpha stays visual-dominant so temporal adjacency acts as a
    /// penalty rather than the primary signal.
    pub fn desk() -> Self {
        Grids {
            thresholds: vec![0.3, 0.5, 0.7, 0.8, 0.9, 0.95],
            preferences: vec![-2.0, 0.5, 2.0],
            gammas: vec![0.5, 1.0, 2.0],
            alphas: vec![0.8, 0.9, 1.0],
        }
    }

    pub fn validate(&self, algorithm: ClusterAlgorithm) -> Result<()> {
        let empty = match algorithm {
            ClusterAlgorithm::Threshold => self.thresholds.is_empty(),
            ClusterAlgorithm::Ap => self.preferences.is_empty(),
            ClusterAlgorithm::TemporalAp => {
                self.preferences.is_empty() || self.gammas.is_empty() || self.alphas.is_empty()
            }
        };
        if empty {
            return Err(Error::Config(format!(
                "grid for algorithm '{algorithm}' is empty"
            )));
        }
        Ok(())
    }

    /// Deterministic enumeration: thresholds ascending; preference-major,
    /// then gamma, then alpha for the temporal variant.
    pub fn enumerate(&self, algorithm: ClusterAlgorithm) -> Vec<GridParams> {
        match algorithm {
            ClusterAlgorithm::Threshold => self
                .thresholds
                .iter()
                .map(|&t| GridParams::Threshold { theta: t })
                .collect(),
            ClusterAlgorithm::Ap => self
                .preferences
                .iter()
                .map(|&p| GridParams::Ap { preference: p })
                .collect(),
            ClusterAlgorithm::TemporalAp => {
                let mut out =
                    Vec::with_capacity(self.preferences.len() * self.gammas.len() * self.alphas.len());
                for &preference in &self.preferences {
                    for &gamma in &self.gammas {
                        for &alpha in &self.alphas {
                            out.push(GridParams::TemporalAp {
                                preference,
                                gamma,
                                alpha,
                            });
                        }
                    }
                }
                out
            }
        }
    }
}

/// One grid point's free parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GridParams {
    Threshold { theta: f64 },
    Ap { preference: f64 },
    TemporalAp { preference: f64, gamma: f64, alpha: f64 },
}

impl GridParams {
    pub fn algorithm(&self) -> ClusterAlgorithm {
        match self {
            GridParams::Threshold { .. } => ClusterAlgorithm::Threshold,
            GridParams::Ap { .. } => ClusterAlgorithm::Ap,
            GridParams::TemporalAp { .. } => ClusterAlgorithm::TemporalAp,
        }
    }

    /// Full clustering config: grid values over the shared base settings.
    pub fn to_config(self, base: &ClusteringConfig) -> ClusteringConfig {
        let mut cfg = *base;
        cfg.algorithm = self.algorithm();
        match self {
            GridParams::Threshold { theta } => cfg.threshold = theta,
            GridParams::Ap { preference } => cfg.preference = preference,
            GridParams::TemporalAp {
                preference,
                gamma,
                alpha,
            } => {
                cfg.preference = preference;
                cfg.gamma = gamma;
                cfg.alpha = alpha;
            }
        }
        cfg
    }

    /// CSV cells (threshold, preference, gamma, alpha); empty when unused.
    pub fn csv_cells(&self) -> [String; 4] {
        match self {
            GridParams::Threshold { theta } => {
                [format!("{theta}"), String::new(), String::new(), String::new()]
            }
            GridParams::Ap { preference } => {
                [String::new(), format!("{preference}"), String::new(), String::new()]
            }
            GridParams::TemporalAp {
                preference,
                gamma,
                alpha,
            } => [
                String::new(),
                format!("{preference}"),
                format!("{gamma}"),
                format!("{alpha}"),
            ],
        }
    }
}

/// Clusterable view of one video plus its ground truth.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VideoData {
    pub video_id: String,
    pub descriptors: Vec<TrackletDescriptor>,
    pub truth: TrackletTruth,
}

/// Metrics of one grid point across all videos.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridEval {
    pub params: GridParams,
    pub per_video: Vec<VideoMetrics>,
}

impl GridEval {
    /// Unweighted per-video means over a subset of videos.
    pub fn means_over(&self, include: &[bool]) -> (f64, f64) {
        let mut fr = 0.0;
        let mut fpr = 0.0;
        let mut n = 0usize;
        for (m, &inc) in self.per_video.iter().zip(include) {
            if inc {
                fr += m.fr;
                fpr += m.fpr;
                n += 1;
            }
        }
        (fr / n as f64, fpr / n as f64)
    }
}

struct VideoCache {
    video_id: String,
    tracklet_ids: Vec<String>,
    truth: TrackletTruth,
    visual: Array2<f64>,
    positions: Vec<f64>,
}

fn build_caches(videos: &[VideoData]) -> Result<Vec<VideoCache>> {
    videos
        .iter()
        .map(|v| {
            if v.descriptors.is_empty() {
                return Err(Error::Data(format!(
                    "video '{}' has no tracklets to cluster",
                    v.video_id
                )));
            }
            Ok(VideoCache {
                video_id: v.video_id.clone(),
                tracklet_ids: v.descriptors.iter().map(|d| d.tracklet_id.clone()).collect(),
                truth: v.truth.clone(),
                visual: visual_similarity(&v.descriptors)?,
                positions: v.descriptors.iter().map(|d| d.position).collect(),
            })
        })
        .collect()
}

fn cluster_cached(cache: &VideoCache, params: GridParams, base: &ClusteringConfig) -> Result<Vec<usize>> {
    match params {
        GridParams::Threshold { theta } => threshold_clustering(&cache.visual, theta),
        GridParams::Ap { preference } => Ok(affinity_propagation(
            &cache.visual,
            preference,
            base.damping,
            base.max_iterations,
            base.convergence_window,
        )?
        .labels),
        GridParams::TemporalAp {
            preference,
            gamma,
            alpha,
        } => {
            let n = cache.positions.len();
            let mut temporal = Array2::<f64>::zeros((n, n));
            for i in 0..n {
                temporal[[i, i]] = 1.0;
                for j in 0..i {
                    let v = (-gamma * (cache.positions[i] - cache.positions[j]).abs()).exp();
                    temporal[[i, j]] = v;
                    temporal[[j, i]] = v;
                }
            }
            let combined = combine(&cache.visual, &temporal, alpha)?;
            Ok(affinity_propagation(
                &combined,
                preference,
                base.damping,
                base.max_iterations,
                base.convergence_window,
            )?
            .labels)
        }
    }
}

/// Exhaustive evaluation of every grid point on every video. Results come
/// back in grid enumeration order regardless of worker count.
pub fn grid_search(
    videos: &[VideoData],
    algorithm: ClusterAlgorithm,
    grids: &Grids,
    base: &ClusteringConfig,
    metric: &dyn FalsePositiveMetric,
) -> Result<Vec<GridEval>> {
    grids.validate(algorithm)?;
    base.validate()?;
    let caches = build_caches(videos)?;
    let params = grids.enumerate(algorithm);
    params
        .into_par_iter()
        .map(|p| {
            let per_video = caches
                .iter()
                .map(|cache| {
                    let labels = cluster_cached(cache, p, base)?;
                    evaluate_video(
                        &cache.video_id,
                        &cache.tracklet_ids,
                        &labels,
                        &cache.truth,
                        metric,
                    )
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(GridEval { params: p, per_video })
        })
        .collect()
}

/// Index of the config minimizing `|mean FPR - rho|` over the selected
/// videos; ties break toward lower mean FR, then grid order.
pub fn select_hyperparams(evals: &[GridEval], include: &[bool], rho: f64) -> Result<usize> {
    if evals.is_empty() {
        return Err(Error::Data("cannot select from an empty grid".into()));
    }
    if !include.iter().any(|&b| b) {
        return Err(Error::Data("hyperparameter selection needs at least one video".into()));
    }
    let mut best = 0usize;
    let mut best_key = (f64::INFINITY, f64::INFINITY);
    for (i, eval) in evals.iter().enumerate() {
        let (fr, fpr) = eval.means_over(include);
        let key = ((fpr - rho).abs(), fr);
        if key.0 < best_key.0 || (key.0 == best_key.0 && key.1 < best_key.1) {
            best = i;
            best_key = key;
        }
    }
    Ok(best)
}

/// One leave-one-out fold: the config selected on the other videos and its
/// metrics on the held-out one.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FoldResult {
    pub held_out: String,
    pub selected: GridParams,
    pub metrics: VideoMetrics,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LoocvReport {
    pub algorithm: ClusterAlgorithm,
    pub rho: f64,
    pub folds: Vec<FoldResult>,
    pub aggregate: Aggregate,
}

/// Leave-one-out cross-validation over videos: hyperparameters tuned on all
/// but one video, evaluated on the held-out one.
pub fn loocv(
    videos: &[VideoData],
    algorithm: ClusterAlgorithm,
    grids: &Grids,
    base: &ClusteringConfig,
    rho: f64,
    metric: &dyn FalsePositiveMetric,
) -> Result<LoocvReport> {
    if videos.len() < 2 {
        return Err(Error::Data(format!(
            "leave-one-out needs at least 2 videos, got {}",
            videos.len()
        )));
    }
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::Config(format!("rho must lie in [0, 1], got {rho}")));
    }
    let evals = grid_search(videos, algorithm, grids, base, metric)?;
    let mut folds = Vec::with_capacity(videos.len());
    for held in 0..videos.len() {
        let include: Vec<bool> = (0..videos.len()).map(|i| i != held).collect();
        let chosen = select_hyperparams(&evals, &include, rho)?;
        folds.push(FoldResult {
            held_out: videos[held].video_id.clone(),
            selected: evals[chosen].params,
            metrics: evals[chosen].per_video[held].clone(),
        });
    }
    let metrics: Vec<VideoMetrics> = folds.iter().map(|f| f.metrics.clone()).collect();
    Ok(LoocvReport {
        algorithm,
        rho,
        folds,
        aggregate: aggregate(&metrics)?,
    })
}
