//! Temperature-scaled contrastive matching loss with temporally-aware soft
//! targets, plus closed-form gradients.
//!
//! Every batch row serves once as the anchor `a` against the other B-1 rows
//! as candidates. The predicted match distribution is
//! `q_i = softmax(a . b_i / tau)` and the target distribution weights each
//! matching candidate by `exp(-lambda * d_i)`, where `d_i` is the candidate's
//! temporal distance normalized by the anchor entity's span. The per-anchor
//! loss is the cross-entropy `H(p, q)`; the batch loss is the mean over
//! anchors that have at least one match.

use std::collections::BTreeMap;

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which rows count as matches for an anchor, and how targets are weighted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossMode {
    /// Matches share the sampler-assigned view-pair tag; uniform targets.
    SelfSupervised,
    /// Matches share the anchor's entity; uniform targets (lambda forced to 0).
    Supervised,
    /// Matches share the anchor's entity; targets decay with temporal distance.
    TemporallyAware,
}

impl std::str::FromStr for LossMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "self_supervised" => Ok(LossMode::SelfSupervised),
            "supervised" => Ok(LossMode::Supervised),
            "temporally_aware" => Ok(LossMode::TemporallyAware),
            other => Err(Error::Config(format!(
                "unknown loss mode '{other}' (expected self_supervised, supervised or temporally_aware)"
            ))),
        }
    }
}

impl std::fmt::Display for LossMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            LossMode::SelfSupervised => "self_supervised",
            LossMode::Supervised => "supervised",
            LossMode::TemporallyAware => "temporally_aware",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossConfig {
    /// Softmax temperature.
    pub tau: f64,
    /// Temporal scaling of the soft targets.
    pub lambda: f64,
    pub mode: LossMode,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            tau: 0.1,
            lambda: 1.0,
            mode: LossMode::TemporallyAware,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0) || !self.tau.is_finite() {
            return Err(Error::Config(format!("tau must be positive, got {}", self.tau)));
        }
        if self.lambda < 0.0 || !self.lambda.is_finite() {
            return Err(Error::Config(format!(
                "lambda must be non-negative, got {}",
                self.lambda
            )));
        }
        Ok(())
    }

    /// Temporal weighting actually applied: only the temporally-aware mode
    /// uses lambda, the other two have uniform targets.
    pub fn effective_lambda(&self) -> f64 {
        match self.mode {
            LossMode::TemporallyAware => self.lambda,
            _ => 0.0,
        }
    }
}

/// A batch of l2-normalized embeddings with the metadata the targets need.
#[derive(Debug, Clone)]
pub struct EmbeddingBatch {
    /// B x d, each row unit-norm.
    pub embeddings: Array2<f64>,
    pub entity_ids: Vec<String>,
    /// Per-row timestamp, normalized by video length.
    pub timestamps: Vec<f64>,
    /// Entity id -> span of that entity, in the same normalized units.
    pub entity_spans: BTreeMap<String, f64>,
    /// Sampler-assigned view-pair tags, required by the self-supervised mode.
    pub view_tags: Option<Vec<u64>>,
}

impl EmbeddingBatch {
    pub fn new(
        embeddings: Array2<f64>,
        entity_ids: Vec<String>,
        timestamps: Vec<f64>,
        entity_spans: BTreeMap<String, f64>,
        view_tags: Option<Vec<u64>>,
    ) -> Result<Self> {
        let b = embeddings.nrows();
        if b < 2 {
            return Err(Error::NoCandidates { size: b });
        }
        if entity_ids.len() != b || timestamps.len() != b {
            return Err(Error::Data(format!(
                "batch size mismatch: {} embeddings, {} entity ids, {} timestamps",
                b,
                entity_ids.len(),
                timestamps.len()
            )));
        }
        if let Some(tags) = &view_tags {
            if tags.len() != b {
                return Err(Error::Data(format!(
                    "batch size mismatch: {} embeddings, {} view tags",
                    b,
                    tags.len()
                )));
            }
        }
        for (i, row) in embeddings.rows().into_iter().enumerate() {
            let norm = row.dot(&row).sqrt();
            if !norm.is_finite() || (norm - 1.0).abs() > 1e-6 {
                return Err(Error::Data(format!(
                    "embedding row {i} has norm {norm}, expected 1 within 1e-6"
                )));
            }
        }
        for (i, t) in timestamps.iter().enumerate() {
            if !t.is_finite() {
                return Err(Error::Data(format!("timestamp {i} is not finite")));
            }
        }
        for id in &entity_ids {
            match entity_spans.get(id) {
                Some(p) if *p > 0.0 && p.is_finite() => {}
                Some(p) => {
                    return Err(Error::Data(format!(
                        "entity '{id}' has non-positive span {p}"
                    )))
                }
                None => return Err(Error::MissingSpan { entity: id.clone() }),
            }
        }
        Ok(EmbeddingBatch {
            embeddings,
            entity_ids,
            timestamps,
            entity_spans,
            view_tags,
        })
    }

    pub fn len(&self) -> usize {
        self.embeddings.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.embeddings.ncols()
    }

    /// Candidate row indices for an anchor: every other row, ascending.
    pub fn candidates(&self, anchor: usize) -> impl Iterator<Item = usize> + '_ {
        let b = self.len();
        (0..b).filter(move |&j| j != anchor)
    }

    fn is_match(&self, mode: LossMode, anchor: usize, candidate: usize) -> Result<bool> {
        match mode {
            LossMode::Supervised | LossMode::TemporallyAware => {
                Ok(self.entity_ids[anchor] == self.entity_ids[candidate])
            }
            LossMode::SelfSupervised => {
                let tags = self.view_tags.as_ref().ok_or_else(|| {
                    Error::Data("self-supervised mode requires view tags on the batch".into())
                })?;
                Ok(tags[anchor] == tags[candidate])
            }
        }
    }
}

/// Everything the loss evaluation produces for one batch.
#[derive(Debug, Clone)]
pub struct LossOutput {
    /// Mean cross-entropy over anchors with at least one match.
    pub loss: f64,
    /// Per-anchor cross-entropy; 0 for anchors without matches.
    pub per_anchor: Vec<f64>,
    /// Flags anchors that had at least one matching candidate.
    pub has_matches: Vec<bool>,
    /// d(loss)/d(row) for every normalized embedding row, B x d.
    pub gradient: Array2<f64>,
}

/// Softmax match distribution of one anchor over its B-1 candidates,
/// computed with max-subtraction.
pub fn match_distribution(anchor: usize, batch: &EmbeddingBatch, tau: f64) -> Result<Vec<f64>> {
    if !(tau > 0.0) {
        return Err(Error::Config(format!("tau must be positive, got {tau}")));
    }
    if batch.len() < 2 {
        return Err(Error::NoCandidates { size: batch.len() });
    }
    let log_q = log_match_distribution(anchor, batch, tau);
    Ok(log_q.into_iter().map(f64::exp).collect())
}

fn log_match_distribution(anchor: usize, batch: &EmbeddingBatch, tau: f64) -> Vec<f64> {
    let a = batch.embeddings.row(anchor);
    let scores: Vec<f64> = batch
        .candidates(anchor)
        .map(|j| a.dot(&batch.embeddings.row(j)) / tau)
        .collect();
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + scores.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
    scores.into_iter().map(|z| z - lse).collect()
}

/// Temporal distances from the anchor to each candidate, normalized by the
/// anchor entity's span. May exceed 1 for candidates of other entities.
pub fn temporal_distances(anchor: usize, batch: &EmbeddingBatch) -> Result<Vec<f64>> {
    let entity = &batch.entity_ids[anchor];
    let span = *batch
        .entity_spans
        .get(entity)
        .ok_or_else(|| Error::MissingSpan {
            entity: entity.clone(),
        })?;
    if !(span > 0.0) {
        return Err(Error::Data(format!(
            "entity '{entity}' has non-positive span {span}"
        )));
    }
    let t0 = batch.timestamps[anchor];
    Ok(batch
        .candidates(anchor)
        .map(|j| (batch.timestamps[j] - t0).abs() / span)
        .collect())
}

/// Soft target distribution over the anchor's candidates, or `None` when the
/// anchor has no matching candidate (such anchors are excluded from the mean).
pub fn target_distribution(
    anchor: usize,
    batch: &EmbeddingBatch,
    cfg: &LossConfig,
) -> Result<Option<Vec<f64>>> {
    cfg.validate()?;
    let lambda = cfg.effective_lambda();
    let dists = temporal_distances(anchor, batch)?;
    let mut weights = vec![0.0; dists.len()];
    let mut total = 0.0;
    for (i, candidate) in batch.candidates(anchor).enumerate() {
        if batch.is_match(cfg.mode, anchor, candidate)? {
            let w = (-lambda * dists[i]).exp();
            weights[i] = w;
            total += w;
        }
    }
    if total <= 0.0 {
        return Ok(None);
    }
    for w in &mut weights {
        *w /= total;
    }
    Ok(Some(weights))
}

/// Batch loss, per-anchor terms, and the analytic gradient with respect to
/// every normalized embedding row.
pub fn contrastive_loss(batch: &EmbeddingBatch, cfg: &LossConfig) -> Result<LossOutput> {
    evaluate(batch, cfg, true)
}

/// Loss value only; shares the forward path with [`contrastive_loss`] but
/// skips gradient accumulation.
pub fn loss_value(batch: &EmbeddingBatch, cfg: &LossConfig) -> Result<f64> {
    evaluate(batch, cfg, false).map(|o| o.loss)
}

fn evaluate(batch: &EmbeddingBatch, cfg: &LossConfig, want_gradient: bool) -> Result<LossOutput> {
    cfg.validate()?;
    let b = batch.len();
    if b < 2 {
        return Err(Error::NoCandidates { size: b });
    }
    let d = batch.dim();
    let inv_tau = 1.0 / cfg.tau;

    let mut per_anchor = vec![0.0; b];
    let mut has_matches = vec![false; b];
    let mut gradient = Array2::<f64>::zeros((b, d));
    let mut valid = 0usize;

    for anchor in 0..b {
        let targets = match target_distribution(anchor, batch, cfg)? {
            Some(p) => p,
            None => continue,
        };
        has_matches[anchor] = true;
        valid += 1;

        let log_q = log_match_distribution(anchor, batch, cfg.tau);
        let mut h = 0.0;
        for (p, lq) in targets.iter().zip(&log_q) {
            if *p > 0.0 {
                h -= p * lq;
            }
        }
        per_anchor[anchor] = h;

        if want_gradient {
            for (i, candidate) in batch.candidates(anchor).enumerate() {
                let coef = (log_q[i].exp() - targets[i]) * inv_tau;
                let anchor_row = batch.embeddings.row(anchor).to_owned();
                let cand_row = batch.embeddings.row(candidate).to_owned();
                gradient
                    .row_mut(anchor)
                    .zip_mut_with(&cand_row, |g, &e| *g += coef * e);
                gradient
                    .row_mut(candidate)
                    .zip_mut_with(&anchor_row, |g, &e| *g += coef * e);
            }
        }
    }

    if valid == 0 {
        return Err(Error::DegenerateBatch);
    }
    let scale = 1.0 / valid as f64;
    let loss = per_anchor.iter().sum::<f64>() * scale;
    if want_gradient {
        gradient.mapv_inplace(|g| g * scale);
    }
    Ok(LossOutput {
        loss,
        per_anchor,
        has_matches,
        gradient,
    })
}

/// Central finite differences of the batch loss with respect to every
/// embedding entry. Touches only the forward path, so it serves as the
/// independent reference for the analytic gradient.
pub fn finite_difference_gradient(
    batch: &EmbeddingBatch,
    cfg: &LossConfig,
    eps: f64,
) -> Result<Array2<f64>> {
    let mut pert = batch.clone();
    let (b, d) = (batch.len(), batch.dim());
    let mut grad = Array2::<f64>::zeros((b, d));
    for i in 0..b {
        for j in 0..d {
            let orig = pert.embeddings[[i, j]];
            pert.embeddings[[i, j]] = orig + eps;
            let plus = loss_value(&pert, cfg)?;
            pert.embeddings[[i, j]] = orig - eps;
            let minus = loss_value(&pert, cfg)?;
            pert.embeddings[[i, j]] = orig;
            grad[[i, j]] = (plus - minus) / (2.0 * eps);
        }
    }
    Ok(grad)
}

/// Max deviation between the analytic and finite-difference gradients,
/// relative to the largest gradient magnitude in the batch.
pub fn gradient_max_rel_error(batch: &EmbeddingBatch, cfg: &LossConfig, eps: f64) -> Result<f64> {
    let analytic = contrastive_loss(batch, cfg)?.gradient;
    let numeric = finite_difference_gradient(batch, cfg, eps)?;
    Ok(max_rel_error(&analytic, &numeric))
}

/// `max_ij |a - b| / max(1e-12, max_ij max(|a|, |b|))`.
pub fn max_rel_error(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    let scale = a
        .iter()
        .chain(b.iter())
        .fold(1e-12f64, |acc, &v| acc.max(v.abs()));
    a.iter()
        .zip(b.iter())
        .fold(0.0f64, |acc, (&x, &y)| acc.max((x - y).abs()))
        / scale
}

/// Random batch for gradient verification: unit-norm rows, 2-4 entities,
/// uniform timestamps, spans covering each entity's rows, and paired view
/// tags so every mode has matches.
pub fn random_batch(rng: &mut impl Rng, b: usize, d: usize) -> EmbeddingBatch {
    assert!(b >= 4, "random batches need at least 4 rows");
    let n_entities = rng.gen_range(2..=4.min(b / 2));
    let mut entity_ids: Vec<String> = (0..b).map(|i| format!("e{}", i % n_entities)).collect();
    // a couple of random reassignments so group sizes vary
    for _ in 0..b / 2 {
        let i = rng.gen_range(0..b);
        entity_ids[i] = format!("e{}", rng.gen_range(0..n_entities));
    }
    // rows 0 and 1 always share an entity so at least one anchor matches
    entity_ids[1] = entity_ids[0].clone();

    let mut embeddings = Array2::<f64>::zeros((b, d));
    for mut row in embeddings.rows_mut() {
        loop {
            let mut norm2 = 0.0;
            for v in row.iter_mut() {
                *v = rng.gen_range(-1.0..1.0);
                norm2 += *v * *v;
            }
            if norm2 > 1e-3 {
                let norm = norm2.sqrt();
                row.mapv_inplace(|v| v / norm);
                break;
            }
        }
    }

    let timestamps: Vec<f64> = (0..b).map(|_| rng.gen_range(0.0..1.0)).collect();
    let mut entity_spans = BTreeMap::new();
    for e in 0..n_entities {
        let id = format!("e{e}");
        let times: Vec<f64> = entity_ids
            .iter()
            .zip(&timestamps)
            .filter(|(eid, _)| **eid == id)
            .map(|(_, t)| *t)
            .collect();
        let span = if times.is_empty() {
            1.0
        } else {
            let lo = times.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = times.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            (hi - lo).max(0.05)
        };
        entity_spans.insert(id, span);
    }
    let view_tags: Vec<u64> = (0..b).map(|i| (i / 2) as u64).collect();

    EmbeddingBatch::new(
        embeddings,
        entity_ids,
        timestamps,
        entity_spans,
        Some(view_tags),
    )
    .expect("randomly constructed batch must be valid")
}
