//! Training loop for the embedding head: entity-balanced batch sampling,
//! SGD/Adam updates, and fragment/tracklet embedding.

mod head;

pub use head::{EmbeddingHead, HeadForward, HeadGradients, Layer};

use std::collections::BTreeMap;

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::clustering::TrackletDescriptor;
use crate::error::{Error, Result};
use crate::loss::{contrastive_loss, loss_value, max_rel_error, EmbeddingBatch, LossConfig, LossMode};
use crate::tracklets::{fragment_tracklet, Fragment, FragmentConfig, Tracklet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

impl std::str::FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sgd" => Ok(OptimizerKind::Sgd),
            "adam" => Ok(OptimizerKind::Adam),
            other => Err(Error::Config(format!(
                "unknown optimizer '{other}' (expected sgd or adam)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainerConfig {
    /// Batch capacity; sampled batches use views_per_polyp * polyps_per_batch rows.
    pub batch_size: usize,
    pub views_per_polyp: usize,
    pub polyps_per_batch: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub optimizer: OptimizerKind,
    /// Embedding dimension d.
    pub output_dim: usize,
    /// Optional hidden layer width; `None` keeps the head linear.
    pub hidden_dim: Option<usize>,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        TrainerConfig {
            batch_size: 56,
            views_per_polyp: 14,
            polyps_per_batch: 3,
            epochs: 30,
            learning_rate: 1e-3,
            seed: 7,
            optimizer: OptimizerKind::Adam,
            output_dim: 128,
            hidden_dim: None,
        }
    }
}

impl TrainerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size < 4 {
            return Err(Error::Config("batch_size must be >= 4".into()));
        }
        if self.views_per_polyp < 2 {
            return Err(Error::Config("views_per_polyp must be >= 2".into()));
        }
        if self.polyps_per_batch < 1 {
            return Err(Error::Config("polyps_per_batch must be >= 1".into()));
        }
        if self.views_per_polyp * self.polyps_per_batch > self.batch_size {
            return Err(Error::Config(format!(
                "views_per_polyp ({}) x polyps_per_batch ({}) exceeds batch_size ({})",
                self.views_per_polyp, self.polyps_per_batch, self.batch_size
            )));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be >= 1".into()));
        }
        if !self.learning_rate.is_finite() || self.learning_rate < 0.0 {
            return Err(Error::Config(format!(
                "learning_rate must be non-negative, got {}",
                self.learning_rate
            )));
        }
        if self.output_dim == 0 {
            return Err(Error::Config("output_dim must be >= 1".into()));
        }
        if self.hidden_dim == Some(0) {
            return Err(Error::Config("hidden_dim must be >= 1 when present".into()));
        }
        Ok(())
    }
}

/// One trainable row: a fragment's input feature (mean of its frame
/// features) plus the metadata the loss needs.
#[derive(Debug, Clone)]
pub struct FragmentRow {
    pub feature: Vec<f64>,
    /// Index into `TrainingData::entities`.
    pub entity: usize,
    /// Global tracklet index, used as the view-pair tag.
    pub tracklet: usize,
    /// Fragment timestamp, video-normalized.
    pub timestamp: f64,
}

/// Fragment rows grouped by entity, ready for batch sampling.
#[derive(Debug, Clone)]
pub struct TrainingData {
    pub rows: Vec<FragmentRow>,
    /// Qualified entity keys, `video_id:entity_id`, sorted.
    pub entities: Vec<String>,
    /// Row indices per entity.
    pub by_entity: Vec<Vec<usize>>,
    /// Row indices per entity, grouped by tracklet.
    pub by_entity_tracklet: Vec<Vec<Vec<usize>>>,
    /// Entity span (last frame - first frame + 1, video-normalized).
    pub spans: Vec<f64>,
    pub input_dim: usize,
}

impl TrainingData {
    pub fn n_fragments(&self) -> usize {
        self.rows.len()
    }

    pub fn n_entities(&self) -> usize {
        self.entities.len()
    }
}

/// Mean of a fragment's per-frame feature vectors; the head's input row.
pub fn fragment_input(fragment: &Fragment) -> Result<Vec<f64>> {
    let features = fragment.features.as_ref().ok_or_else(|| {
        Error::Data(format!(
            "fragment {}#{} has no frame features; training input requires them",
            fragment.parent, fragment.index
        ))
    })?;
    let dim = features[0].len();
    let mut mean = vec![0.0; dim];
    for f in features {
        if f.len() != dim {
            return Err(Error::Data(format!(
                "inconsistent feature dimensions in fragment {}#{}",
                fragment.parent, fragment.index
            )));
        }
        for (m, v) in mean.iter_mut().zip(f) {
            *m += v;
        }
    }
    let k = features.len() as f64;
    for m in &mut mean {
        *m /= k;
    }
    Ok(mean)
}

/// Builds the training set from tracklets: fragments each tracklet, averages
/// frame features into fragment inputs, and records per-entity spans.
pub fn build_training_data(
    tracklets: &[Tracklet],
    cfg: &FragmentConfig,
    video_lengths: &BTreeMap<String, u64>,
) -> Result<TrainingData> {
    let mut entity_keys: Vec<String> = tracklets
        .iter()
        .map(|t| format!("{}:{}", t.video_id, t.entity_id))
        .collect();
    entity_keys.sort();
    entity_keys.dedup();
    let entity_index: BTreeMap<&str, usize> = entity_keys
        .iter()
        .enumerate()
        .map(|(i, k)| (k.as_str(), i))
        .collect();

    let mut rows: Vec<FragmentRow> = Vec::new();
    let mut frame_range: Vec<Option<(u64, u64, u64)>> = vec![None; entity_keys.len()]; // (first, last, video_length)
    let mut by_entity_tracklet: Vec<Vec<Vec<usize>>> = vec![Vec::new(); entity_keys.len()];
    let mut input_dim: Option<usize> = None;

    for (t_idx, t) in tracklets.iter().enumerate() {
        let length = *video_lengths
            .get(&t.video_id)
            .ok_or_else(|| Error::Data(format!("no video length recorded for '{}'", t.video_id)))?;
        let key = format!("{}:{}", t.video_id, t.entity_id);
        let e = entity_index[key.as_str()];
        let range = frame_range[e].get_or_insert((t.first_frame(), t.last_frame(), length));
        range.0 = range.0.min(t.first_frame());
        range.1 = range.1.max(t.last_frame());

        let fragments = fragment_tracklet(t, cfg, length)?;
        if fragments.is_empty() {
            continue;
        }
        let mut tracklet_rows = Vec::with_capacity(fragments.len());
        for frag in &fragments {
            let feature = fragment_input(frag)?;
            match input_dim {
                None => input_dim = Some(feature.len()),
                Some(d) if d != feature.len() => {
                    return Err(Error::Data(format!(
                        "feature dimension changed from {d} to {} at fragment {}#{}",
                        feature.len(),
                        frag.parent,
                        frag.index
                    )))
                }
                _ => {}
            }
            tracklet_rows.push(rows.len());
            rows.push(FragmentRow {
                feature,
                entity: e,
                tracklet: t_idx,
                timestamp: frag.timestamp,
            });
        }
        by_entity_tracklet[e].push(tracklet_rows);
    }

    if rows.is_empty() {
        return Err(Error::Data(
            "no trainable fragments: every tracklet was shorter than kappa retained frames".into(),
        ));
    }

    // prune entities whose tracklets were all too short
    let mut entities = Vec::new();
    let mut spans = Vec::new();
    let mut by_entity: Vec<Vec<usize>> = Vec::new();
    let mut groups: Vec<Vec<Vec<usize>>> = Vec::new();
    let mut remap = vec![usize::MAX; entity_keys.len()];
    for (e, key) in entity_keys.iter().enumerate() {
        let tracklet_groups = std::mem::take(&mut by_entity_tracklet[e]);
        let all: Vec<usize> = tracklet_groups.iter().flatten().copied().collect();
        if all.is_empty() {
            continue;
        }
        let (first, last, length) = frame_range[e].expect("entity with rows has a frame range");
        remap[e] = entities.len();
        entities.push(key.clone());
        spans.push((last - first + 1) as f64 / length as f64);
        by_entity.push(all);
        groups.push(tracklet_groups);
    }
    for row in &mut rows {
        row.entity = remap[row.entity];
    }

    Ok(TrainingData {
        rows,
        entities,
        by_entity,
        by_entity_tracklet: groups,
        spans,
        input_dim: input_dim.expect("rows exist"),
    })
}

/// Rows selected for one batch, with the metadata the loss needs.
#[derive(Debug, Clone)]
pub struct SampledBatch {
    pub features: Array2<f64>,
    pub entity_ids: Vec<String>,
    pub timestamps: Vec<f64>,
    pub entity_spans: BTreeMap<String, f64>,
    pub view_tags: Vec<u64>,
    pub rows: Vec<usize>,
}

/// Draws `polyps_per_batch` entities uniformly without replacement and
/// `views_per_polyp` fragments for each.
///
/// Fragment draws are without replacement when the entity has enough,
/// otherwise with replacement. In self-supervised mode fragments are drawn
/// as pairs from one tracklet at a time so the view-pair targets have
/// matches; the other modes draw fragments uniformly.
pub fn sample_batch(
    data: &TrainingData,
    cfg: &TrainerConfig,
    mode: LossMode,
    rng: &mut ChaCha8Rng,
) -> Result<SampledBatch> {
    cfg.validate()?;
    let n_entities = data.n_entities();
    if n_entities < cfg.polyps_per_batch {
        return Err(Error::InsufficientEntities {
            available: n_entities,
            required: cfg.polyps_per_batch,
        });
    }

    // partial Fisher-Yates for a uniform draw without replacement
    let mut order: Vec<usize> = (0..n_entities).collect();
    for i in 0..cfg.polyps_per_batch {
        let j = rng.gen_range(i..n_entities);
        order.swap(i, j);
    }
    let chosen = &order[..cfg.polyps_per_batch];

    let k = cfg.views_per_polyp;
    let mut picked: Vec<usize> = Vec::with_capacity(k * chosen.len());
    for &e in chosen {
        match mode {
            LossMode::SelfSupervised => {
                let tracklets = &data.by_entity_tracklet[e];
                let mut taken = 0;
                while taken < k {
                    let t = &tracklets[rng.gen_range(0..tracklets.len())];
                    let first = t[rng.gen_range(0..t.len())];
                    let second = if t.len() > 1 {
                        loop {
                            let s = t[rng.gen_range(0..t.len())];
                            if s != first {
                                break s;
                            }
                        }
                    } else {
                        first
                    };
                    for row in [first, second] {
                        if taken < k {
                            picked.push(row);
                            taken += 1;
                        }
                    }
                }
            }
            _ => {
                let pool = &data.by_entity[e];
                if pool.len() >= k {
                    let mut idx: Vec<usize> = (0..pool.len()).collect();
                    for i in 0..k {
                        let j = rng.gen_range(i..pool.len());
                        idx.swap(i, j);
                    }
                    picked.extend(idx[..k].iter().map(|&i| pool[i]));
                } else {
                    picked.extend((0..k).map(|_| pool[rng.gen_range(0..pool.len())]));
                }
            }
        }
    }

    let mut features = Array2::<f64>::zeros((picked.len(), data.input_dim));
    let mut entity_ids = Vec::with_capacity(picked.len());
    let mut timestamps = Vec::with_capacity(picked.len());
    let mut view_tags = Vec::with_capacity(picked.len());
    let mut entity_spans = BTreeMap::new();
    for (r, &row_idx) in picked.iter().enumerate() {
        let row = &data.rows[row_idx];
        for (c, v) in row.feature.iter().enumerate() {
            features[[r, c]] = *v;
        }
        entity_ids.push(data.entities[row.entity].clone());
        timestamps.push(row.timestamp);
        view_tags.push(row.tracklet as u64);
        entity_spans.insert(data.entities[row.entity].clone(), data.spans[row.entity]);
    }

    Ok(SampledBatch {
        features,
        entity_ids,
        timestamps,
        entity_spans,
        view_tags,
        rows: picked,
    })
}

struct Optimizer {
    kind: OptimizerKind,
    lr: f64,
    step: usize,
    m: Vec<(Array2<f64>, Array1<f64>)>,
    v: Vec<(Array2<f64>, Array1<f64>)>,
}

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

impl Optimizer {
    fn new(kind: OptimizerKind, lr: f64, head: &EmbeddingHead) -> Self {
        let zeros = || {
            head.layers
                .iter()
                .map(|l| {
                    (
                        Array2::zeros(l.weight.raw_dim()),
                        Array1::zeros(l.bias.raw_dim()),
                    )
                })
                .collect()
        };
        Optimizer {
            kind,
            lr,
            step: 0,
            m: zeros(),
            v: zeros(),
        }
    }

    fn apply(&mut self, head: &mut EmbeddingHead, grads: &HeadGradients) {
        self.step += 1;
        match self.kind {
            OptimizerKind::Sgd => {
                for (layer, (gw, gb)) in head.layers.iter_mut().zip(&grads.layers) {
                    layer.weight.zip_mut_with(gw, |w, &g| *w -= self.lr * g);
                    layer.bias.zip_mut_with(gb, |b, &g| *b -= self.lr * g);
                }
            }
            OptimizerKind::Adam => {
                let t = self.step as f64;
                let bc1 = 1.0 - ADAM_BETA1.powf(t);
                let bc2 = 1.0 - ADAM_BETA2.powf(t);
                for (l, (layer, (gw, gb))) in
                    head.layers.iter_mut().zip(&grads.layers).enumerate()
                {
                    let (mw, mb) = &mut self.m[l];
                    let (vw, vb) = &mut self.v[l];
                    mw.zip_mut_with(gw, |m, &g| *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g);
                    vw.zip_mut_with(gw, |v, &g| *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g);
                    mb.zip_mut_with(gb, |m, &g| *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g);
                    vb.zip_mut_with(gb, |v, &g| *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g);
                    for ((w, m), v) in layer.weight.iter_mut().zip(mw.iter()).zip(vw.iter()) {
                        *w -= self.lr * (m / bc1) / ((v / bc2).sqrt() + ADAM_EPS);
                    }
                    for ((b, m), v) in layer.bias.iter_mut().zip(mb.iter()).zip(vb.iter()) {
                        *b -= self.lr * (m / bc1) / ((v / bc2).sqrt() + ADAM_EPS);
                    }
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub head: EmbeddingHead,
    /// Mean batch loss per epoch.
    pub epoch_mean_loss: Vec<f64>,
    /// Loss on a fixed held-out batch, evaluated after every epoch.
    pub held_out_loss: Vec<f64>,
}

fn batch_from_sample(sample: &SampledBatch, output: Array2<f64>) -> EmbeddingBatch {
    EmbeddingBatch {
        embeddings: output,
        entity_ids: sample.entity_ids.clone(),
        timestamps: sample.timestamps.clone(),
        entity_spans: sample.entity_spans.clone(),
        view_tags: Some(sample.view_tags.clone()),
    }
}

/// Trains a freshly initialized head. Fully deterministic for a fixed seed:
/// the seed drives both the parameter init and the batch sampler.
pub fn train(
    data: &TrainingData,
    loss_cfg: &LossConfig,
    cfg: &TrainerConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    loss_cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let head = EmbeddingHead::init(data.input_dim, cfg.hidden_dim, cfg.output_dim, &mut rng);
    train_from(head, &mut rng, data, loss_cfg, cfg)
}

/// Training loop over an existing head; `rng` drives batch sampling.
pub fn train_from(
    mut head: EmbeddingHead,
    rng: &mut ChaCha8Rng,
    data: &TrainingData,
    loss_cfg: &LossConfig,
    cfg: &TrainerConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    loss_cfg.validate()?;
    let rows_per_batch = cfg.views_per_polyp * cfg.polyps_per_batch;
    let steps = (data.n_fragments() / rows_per_batch).max(1);
    let mut optimizer = Optimizer::new(cfg.optimizer, cfg.learning_rate, &head);
    let mut epoch_mean_loss = Vec::with_capacity(cfg.epochs);
    let mut held_out_loss = Vec::with_capacity(cfg.epochs);

    // fixed held-out batch from a forked stream, so monitoring does not
    // perturb the training draws
    let held_out = {
        let mut held_rng = rng.clone();
        held_rng.set_stream(u64::MAX);
        sample_batch(data, cfg, loss_cfg.mode, &mut held_rng)?
    };

    for epoch in 0..cfg.epochs {
        let mut acc = 0.0;
        for _ in 0..steps {
            let sample = sample_batch(data, cfg, loss_cfg.mode, rng)?;
            let fwd = head.forward(&sample.features)?;
            let batch = batch_from_sample(&sample, fwd.output.clone());
            let out = contrastive_loss(&batch, loss_cfg)?;
            if !out.loss.is_finite() {
                return Err(Error::Numerical(format!(
                    "non-finite loss at epoch {epoch}; try a lower learning rate"
                )));
            }
            let grads = head.backward(&fwd, &out.gradient);
            optimizer.apply(&mut head, &grads);
            acc += out.loss;
        }
        epoch_mean_loss.push(acc / steps as f64);

        let fwd = head.forward(&held_out.features)?;
        let monitored = loss_value(&batch_from_sample(&held_out, fwd.output), loss_cfg)?;
        if !monitored.is_finite() {
            return Err(Error::Numerical(format!(
                "non-finite held-out loss at epoch {epoch}; try a lower learning rate"
            )));
        }
        held_out_loss.push(monitored);
    }

    Ok(TrainOutcome {
        head,
        epoch_mean_loss,
        held_out_loss,
    })
}

/// Embeds fragment input rows; each output row has unit norm.
pub fn embed_fragments(head: &EmbeddingHead, features: &Array2<f64>) -> Result<Array2<f64>> {
    Ok(head.forward(features)?.output)
}

/// Per-tracklet descriptors: the l2-normalized mean of the tracklet's
/// fragment embeddings plus its normalized video position. Tracklets too
/// short to yield a fragment are returned in the skipped list.
pub fn tracklet_descriptors(
    head: &EmbeddingHead,
    tracklets: &[Tracklet],
    cfg: &FragmentConfig,
    video_length: u64,
) -> Result<(Vec<TrackletDescriptor>, Vec<String>)> {
    let mut descriptors = Vec::new();
    let mut skipped = Vec::new();
    for t in tracklets {
        let fragments = fragment_tracklet(t, cfg, video_length)?;
        if fragments.is_empty() {
            skipped.push(t.tracklet_id.clone());
            continue;
        }
        let mut features = Array2::<f64>::zeros((fragments.len(), 0));
        for (i, frag) in fragments.iter().enumerate() {
            let row = fragment_input(frag)?;
            if i == 0 {
                features = Array2::zeros((fragments.len(), row.len()));
            }
            for (c, v) in row.iter().enumerate() {
                features[[i, c]] = *v;
            }
        }
        let embedded = embed_fragments(head, &features)?;
        let mut mean: Vec<f64> = vec![0.0; embedded.ncols()];
        for row in embedded.rows() {
            for (m, v) in mean.iter_mut().zip(row.iter()) {
                *m += v;
            }
        }
        let n = embedded.nrows() as f64;
        for m in &mut mean {
            *m /= n;
        }
        let norm = mean.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !norm.is_finite() || norm < 1e-12 {
            return Err(Error::Numerical(format!(
                "tracklet '{}' has a near-zero mean embedding",
                t.tracklet_id
            )));
        }
        for m in &mut mean {
            *m /= norm;
        }
        descriptors.push(TrackletDescriptor {
            tracklet_id: t.tracklet_id.clone(),
            embedding: mean,
            position: t.position(video_length),
        });
    }
    Ok((descriptors, skipped))
}

/// Embeds every video's tracklets: video id -> (descriptors, skipped ids).
pub fn embed_videos(
    head: &EmbeddingHead,
    tracklets: &[Tracklet],
    cfg: &FragmentConfig,
    video_lengths: &BTreeMap<String, u64>,
) -> Result<BTreeMap<String, (Vec<TrackletDescriptor>, Vec<String>)>> {
    let mut by_video: BTreeMap<String, Vec<Tracklet>> = BTreeMap::new();
    for t in tracklets {
        by_video.entry(t.video_id.clone()).or_default().push(t.clone());
    }
    let mut out = BTreeMap::new();
    for (video_id, ts) in by_video {
        let length = *video_lengths
            .get(&video_id)
            .ok_or_else(|| Error::Data(format!("no video length recorded for '{video_id}'")))?;
        out.insert(video_id, tracklet_descriptors(head, &ts, cfg, length)?);
    }
    Ok(out)
}

/// Finite-difference check of the full backward path (loss through
/// normalization and layers) against the analytic parameter gradients.
/// Returns the max error relative to the largest gradient magnitude.
pub fn head_gradient_check(
    head: &mut EmbeddingHead,
    sample: &SampledBatch,
    loss_cfg: &LossConfig,
    eps: f64,
) -> Result<f64> {
    let fwd = head.forward(&sample.features)?;
    let batch = batch_from_sample(sample, fwd.output.clone());
    let out = contrastive_loss(&batch, loss_cfg)?;
    let analytic = head.backward(&fwd, &out.gradient);

    let eval = |head: &EmbeddingHead| -> Result<f64> {
        let fwd = head.forward(&sample.features)?;
        loss_value(&batch_from_sample(sample, fwd.output), loss_cfg)
    };

    let mut worst = 0.0f64;
    for l in 0..head.layers.len() {
        let n_w = head.layers[l].weight.len();
        let mut fd_w = Array2::<f64>::zeros(head.layers[l].weight.raw_dim());
        for idx in 0..n_w {
            let orig = head.layers[l].weight.as_slice().unwrap()[idx];
            head.layers[l].weight.as_slice_mut().unwrap()[idx] = orig + eps;
            let plus = eval(head)?;
            head.layers[l].weight.as_slice_mut().unwrap()[idx] = orig - eps;
            let minus = eval(head)?;
            head.layers[l].weight.as_slice_mut().unwrap()[idx] = orig;
            fd_w.as_slice_mut().unwrap()[idx] = (plus - minus) / (2.0 * eps);
        }
        worst = worst.max(max_rel_error(&analytic.layers[l].0, &fd_w));

        let n_b = head.layers[l].bias.len();
        let mut fd_b = Array2::<f64>::zeros((1, n_b));
        for idx in 0..n_b {
            let orig = head.layers[l].bias[idx];
            head.layers[l].bias[idx] = orig + eps;
            let plus = eval(head)?;
            head.layers[l].bias[idx] = orig - eps;
            let minus = eval(head)?;
            head.layers[l].bias[idx] = orig;
            fd_b[[0, idx]] = (plus - minus) / (2.0 * eps);
        }
        let analytic_b = analytic.layers[l]
            .1
            .clone()
            .into_shape((1, n_b))
            .expect("bias reshapes to a row");
        worst = worst.max(max_rel_error(&analytic_b, &fd_b));
    }
    Ok(worst)
}

/// Random tiny head + batch, checked end to end; used by the verification
/// subcommand and the acceptance suite.
pub fn random_head_check(
    rng: &mut ChaCha8Rng,
    loss_cfg: &LossConfig,
    eps: f64,
) -> Result<f64> {
    let input_dim = rng.gen_range(3..=5);
    let hidden = if rng.gen_bool(0.5) {
        Some(rng.gen_range(3..=5))
    } else {
        None
    };
    let output_dim = rng.gen_range(2..=4);
    let mut head = EmbeddingHead::init(input_dim, hidden, output_dim, rng);

    let b = rng.gen_range(4..=8);
    let mut features = Array2::<f64>::zeros((b, input_dim));
    for v in features.iter_mut() {
        *v = rng.gen_range(-1.5..1.5);
    }
    let n_entities = rng.gen_range(2..=3);
    let mut entity_ids: Vec<String> = (0..b).map(|i| format!("e{}", i % n_entities)).collect();
    entity_ids[1] = entity_ids[0].clone();
    let timestamps: Vec<f64> = (0..b).map(|_| rng.gen_range(0.0..1.0)).collect();
    let mut entity_spans = BTreeMap::new();
    for e in 0..n_entities {
        entity_spans.insert(format!("e{e}"), rng.gen_range(0.3..1.0));
    }
    let sample = SampledBatch {
        features,
        entity_ids,
        timestamps,
        entity_spans,
        view_tags: (0..b).map(|i| (i / 2) as u64).collect(),
        rows: (0..b).collect(),
    };
    head_gradient_check(&mut head, &sample, loss_cfg, eps)
}
