//! File formats: detection JSON-lines, video metadata, ground truth,
//! embeddings, cluster outputs, and head checkpoints.
//!
//! Every map in a serialized struct is a `BTreeMap` so output bytes are
//! deterministic. Floats go through serde_json's shortest round-trip
//! encoding, which preserves each value exactly.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::clustering::TrackletDescriptor;
use crate::error::{Error, Result};
use crate::evaluation::TrackletTruth;
use crate::loss::LossConfig;
use crate::tracklets::DetectionRecord;
use crate::trainer::{EmbeddingHead, Layer, TrainerConfig};

/// Per-video metadata sidecar (`videos.json`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VideoMeta {
    /// Total frames in the video.
    pub length: u64,
    pub width: u32,
    pub height: u32,
}

pub type VideosFile = BTreeMap<String, VideoMeta>;

/// Ground truth (`truth.json`): video id -> tracklet id -> entity id.
pub type TruthFile = BTreeMap<String, TrackletTruth>;

/// One detection JSON object per line.
pub fn write_detections_jsonl(path: &Path, records: &[DetectionRecord]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for rec in records {
        serde_json::to_writer(&mut out, rec)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Reads detection JSON-lines, reporting malformed lines (including
/// degenerate boxes and non-finite features) with their line number.
pub fn read_detections_jsonl(path: &Path) -> Result<Vec<DetectionRecord>> {
    let shown = path.display().to_string();
    let file = File::open(path).map_err(|e| {
        Error::Data(format!("cannot open detection file '{shown}': {e}"))
    })?;
    let mut records = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: DetectionRecord =
            serde_json::from_str(&line).map_err(|e| Error::Parse {
                path: shown.clone(),
                line: i + 1,
                message: e.to_string(),
            })?;
        if let Some(feature) = &rec.feature {
            if feature.iter().any(|v| !v.is_finite()) {
                return Err(Error::Parse {
                    path: shown,
                    line: i + 1,
                    message: "feature vector contains non-finite values".into(),
                });
            }
        }
        records.push(rec);
    }
    Ok(records)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let shown = path.display().to_string();
    let file =
        File::open(path).map_err(|e| Error::Data(format!("cannot open '{shown}': {e}")))?;
    serde_json::from_reader(BufReader::new(file))
        .map_err(|e| Error::Data(format!("malformed JSON in '{shown}': {e}")))
}

/// Video lengths from the metadata sidecar when present, otherwise inferred
/// as max frame index + 1 per video.
pub fn video_lengths(
    videos: Option<&VideosFile>,
    detections: &[DetectionRecord],
) -> BTreeMap<String, u64> {
    match videos {
        Some(vf) => vf.iter().map(|(k, v)| (k.clone(), v.length)).collect(),
        None => {
            let mut lengths = BTreeMap::new();
            for d in detections {
                let e = lengths.entry(d.video_id.clone()).or_insert(0u64);
                *e = (*e).max(d.frame_index + 1);
            }
            lengths
        }
    }
}

/// Embeddings file (`embeddings.json`): per video, one descriptor per
/// clusterable tracklet.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct EmbeddingsFile {
    pub videos: BTreeMap<String, VideoEmbeddings>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VideoEmbeddings {
    pub video_length: u64,
    pub tracklets: Vec<TrackletDescriptor>,
    /// Tracklets too short to embed, excluded from clustering.
    #[serde(default)]
    pub skipped: Vec<String>,
}

/// Cluster output file (`clusters.json`).
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ClustersFile {
    pub videos: BTreeMap<String, VideoClusters>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VideoClusters {
    /// Tracklet id -> cluster label.
    pub labels: BTreeMap<String, usize>,
    /// Exemplar tracklet ids; empty for the threshold algorithm.
    pub exemplars: Vec<String>,
    pub entity_count: usize,
    pub converged: bool,
    pub iterations: usize,
}

/// Trained head checkpoint (`checkpoint.json`): layer shapes, row-major
/// parameters, and the configs that produced it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckpointFile {
    pub input_dim: usize,
    pub hidden_dim: Option<usize>,
    pub output_dim: usize,
    pub layers: Vec<LayerData>,
    pub trainer: TrainerConfig,
    pub loss: LossConfig,
    pub epoch_mean_loss: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LayerData {
    /// out x in, row-major.
    pub weight: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

impl CheckpointFile {
    pub fn from_head(
        head: &EmbeddingHead,
        trainer: &TrainerConfig,
        loss: &LossConfig,
        epoch_mean_loss: Vec<f64>,
    ) -> Self {
        CheckpointFile {
            input_dim: head.input_dim(),
            hidden_dim: head.hidden_dim(),
            output_dim: head.output_dim(),
            layers: head
                .layers
                .iter()
                .map(|l| LayerData {
                    weight: l.weight.rows().into_iter().map(|r| r.to_vec()).collect(),
                    bias: l.bias.to_vec(),
                })
                .collect(),
            trainer: *trainer,
            loss: *loss,
            epoch_mean_loss,
        }
    }

    pub fn to_head(&self) -> Result<EmbeddingHead> {
        let mut layers = Vec::with_capacity(self.layers.len());
        for (i, l) in self.layers.iter().enumerate() {
            let rows = l.weight.len();
            let cols = l.weight.first().map(|r| r.len()).unwrap_or(0);
            if rows == 0 || cols == 0 || l.weight.iter().any(|r| r.len() != cols) {
                return Err(Error::Data(format!(
                    "checkpoint layer {i} has a ragged or empty weight matrix"
                )));
            }
            if l.bias.len() != rows {
                return Err(Error::Data(format!(
                    "checkpoint layer {i}: bias length {} does not match {} rows",
                    l.bias.len(),
                    rows
                )));
            }
            let flat: Vec<f64> = l.weight.iter().flatten().copied().collect();
            if flat.iter().chain(&l.bias).any(|v| !v.is_finite()) {
                return Err(Error::Data(format!(
                    "checkpoint layer {i} contains non-finite parameters"
                )));
            }
            layers.push(Layer {
                weight: Array2::from_shape_vec((rows, cols), flat)
                    .map_err(|e| Error::Data(format!("checkpoint layer {i}: {e}")))?,
                bias: Array1::from_vec(l.bias.clone()),
            });
        }
        if layers.is_empty() {
            return Err(Error::Data("checkpoint has no layers".into()));
        }
        Ok(EmbeddingHead { layers })
    }
}
