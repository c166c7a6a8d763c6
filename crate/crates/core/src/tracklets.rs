//! Detection records, IoU chaining, and fragment slicing.
//!
//! Detections arrive as ground-truth bounding boxes, one per frame per
//! entity. Consecutive detections of one entity are chained into tracklets
//! (split on frame gaps or low IoU), subsampled by a fixed stride, and cut
//! into fixed-length fragments that carry a video-normalized timestamp.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned bounding box in pixels, serialized as `[x_min, y_min, x_max, y_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "[f64; 4]", try_from = "[f64; 4]")]
pub struct BBox {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl BBox {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Result<Self> {
        let b = BBox {
            x_min,
            y_min,
            x_max,
            y_max,
        };
        b.validate()?;
        Ok(b)
    }

    /// Rejects non-finite coordinates and zero-area (degenerate) boxes.
    pub fn validate(&self) -> Result<()> {
        let coords = [self.x_min, self.y_min, self.x_max, self.y_max];
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidBox(format!("non-finite coordinates {coords:?}")));
        }
        if self.x_min >= self.x_max || self.y_min >= self.y_max {
            return Err(Error::InvalidBox(format!(
                "expected x_min < x_max and y_min < y_max, got {coords:?}"
            )));
        }
        Ok(())
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn center(&self) -> (f64, f64) {
        (
            0.5 * (self.x_min + self.x_max),
            0.5 * (self.y_min + self.y_max),
        )
    }

    pub fn diagonal(&self) -> f64 {
        self.width().hypot(self.height())
    }
}

impl From<BBox> for [f64; 4] {
    fn from(b: BBox) -> Self {
        [b.x_min, b.y_min, b.x_max, b.y_max]
    }
}

impl TryFrom<[f64; 4]> for BBox {
    type Error = Error;

    fn try_from(v: [f64; 4]) -> Result<Self> {
        BBox::new(v[0], v[1], v[2], v[3])
    }
}

/// One bounding-box observation of an entity in a frame; the raw input unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionRecord {
    pub video_id: String,
    pub frame_index: u64,
    pub entity_id: String,
    pub bbox: BBox,
    /// Externally extracted frame feature vector, when available.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feature: Option<Vec<f64>>,
}

/// A maximal run of consecutive same-entity detections, IoU-chained.
///
/// `frames` keeps the full chained run; `retained` indexes the frames kept
/// after stride subsampling. Fragments slice the retained sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tracklet {
    pub tracklet_id: String,
    pub video_id: String,
    pub entity_id: String,
    pub frames: Vec<DetectionRecord>,
    pub retained: Vec<usize>,
}

impl Tracklet {
    /// Number of retained frames (the tracklet length N used for slicing).
    pub fn retained_len(&self) -> usize {
        self.retained.len()
    }

    pub fn retained_frames(&self) -> impl Iterator<Item = &DetectionRecord> {
        self.retained.iter().map(|&i| &self.frames[i])
    }

    pub fn first_frame(&self) -> u64 {
        self.frames.first().map(|f| f.frame_index).unwrap_or(0)
    }

    pub fn last_frame(&self) -> u64 {
        self.frames.last().map(|f| f.frame_index).unwrap_or(0)
    }

    /// Midpoint frame normalized by video length, in [0, 1].
    pub fn position(&self, video_length: u64) -> f64 {
        debug_assert!(video_length > 0);
        0.5 * (self.first_frame() + self.last_frame()) as f64 / video_length as f64
    }
}

/// A fixed-length slice of a tracklet's retained frames.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fragment {
    /// Parent tracklet id.
    pub parent: String,
    /// Fragment index within the parent, in `[0, floor(N / kappa))`.
    pub index: usize,
    /// Exactly `kappa` retained detections.
    pub frames: Vec<DetectionRecord>,
    /// Timestamp of the middle retained frame, normalized by video length.
    pub timestamp: f64,
    /// Per-frame feature vectors, present when every frame carries one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub features: Option<Vec<Vec<f64>>>,
}

/// Tracklet construction and slicing parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FragmentConfig {
    /// Fragment length in retained frames.
    pub kappa: usize,
    /// Keep every `sampling_stride`-th chained frame (first always kept).
    pub sampling_stride: usize,
    /// Minimum IoU between consecutive detections of one tracklet.
    pub iou_min: f64,
    /// Bounding-box enlargement factor applied before cropping geometry.
    pub psi: f64,
}

impl Default for FragmentConfig {
    fn default() -> Self {
        FragmentConfig {
            kappa: 8,
            sampling_stride: 4,
            iou_min: 0.1,
            psi: 5.0,
        }
    }
}

impl FragmentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.kappa < 1 {
            return Err(Error::Config("kappa must be >= 1".into()));
        }
        if self.sampling_stride < 1 {
            return Err(Error::Config("sampling_stride must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.iou_min) {
            return Err(Error::Config(format!(
                "iou_min must lie in [0, 1], got {}",
                self.iou_min
            )));
        }
        if !(self.psi >= 1.0) || !self.psi.is_finite() {
            return Err(Error::Config(format!("psi must be >= 1, got {}", self.psi)));
        }
        Ok(())
    }
}

/// Intersection over union of two boxes. Symmetric, 0 when disjoint, 1 for
/// identical boxes. Degenerate boxes are rejected.
pub fn iou(a: &BBox, b: &BBox) -> Result<f64> {
    a.validate()?;
    b.validate()?;
    let ix = (a.x_max.min(b.x_max) - a.x_min.max(b.x_min)).max(0.0);
    let iy = (a.y_max.min(b.y_max) - a.y_min.max(b.y_min)).max(0.0);
    let inter = ix * iy;
    let union = a.area() + b.area() - inter;
    Ok(inter / union)
}

/// Scales a box about its center so every side (and hence the diagonal)
/// grows by `psi`, then clamps to `(width, height)` frame bounds.
pub fn enlarge_bbox(b: &BBox, psi: f64, frame_bounds: (f64, f64)) -> Result<BBox> {
    b.validate()?;
    if !psi.is_finite() || psi <= 0.0 {
        return Err(Error::Config(format!("psi must be positive, got {psi}")));
    }
    let (cx, cy) = b.center();
    let hw = 0.5 * psi * b.width();
    let hh = 0.5 * psi * b.height();
    let (w, h) = frame_bounds;
    let out = BBox {
        x_min: (cx - hw).max(0.0),
        y_min: (cy - hh).max(0.0),
        x_max: (cx + hw).min(w),
        y_max: (cy + hh).min(h),
    };
    out.validate().map_err(|_| {
        Error::InvalidBox(format!(
            "enlarged box collapsed after clamping to frame bounds {frame_bounds:?}"
        ))
    })?;
    Ok(out)
}

/// Chains detections into tracklets.
///
/// Within one `(video_id, entity_id)` stream, sorted by frame index, a new
/// tracklet starts whenever frame indices are non-consecutive or the IoU of
/// consecutive boxes falls below `cfg.iou_min`. Chaining runs on the
/// original consecutive frames; the stride subsampling that selects the
/// retained frames is applied afterwards.
pub fn build_tracklets(records: &[DetectionRecord], cfg: &FragmentConfig) -> Result<Vec<Tracklet>> {
    cfg.validate()?;
    let mut sorted: Vec<&DetectionRecord> = records.iter().collect();
    sorted.sort_by(|a, b| {
        (&a.video_id, &a.entity_id, a.frame_index).cmp(&(&b.video_id, &b.entity_id, b.frame_index))
    });

    let mut tracklets = Vec::new();
    let mut stream: Vec<DetectionRecord> = Vec::new();
    let mut seq_in_stream = 0usize;

    let flush = |run: &mut Vec<DetectionRecord>, seq: &mut usize, out: &mut Vec<Tracklet>| {
        if run.is_empty() {
            return;
        }
        let retained: Vec<usize> = (0..run.len()).step_by(cfg.sampling_stride).collect();
        out.push(Tracklet {
            tracklet_id: format!("{}:{}:{}", run[0].video_id, run[0].entity_id, *seq),
            video_id: run[0].video_id.clone(),
            entity_id: run[0].entity_id.clone(),
            frames: std::mem::take(run),
            retained,
        });
        *seq += 1;
    };

    for rec in sorted {
        rec.bbox.validate()?;
        if let Some(prev) = stream.last() {
            let same_stream = prev.video_id == rec.video_id && prev.entity_id == rec.entity_id;
            if same_stream && prev.frame_index == rec.frame_index {
                return Err(Error::Data(format!(
                    "duplicate frame_index {} for entity '{}' in video '{}'",
                    rec.frame_index, rec.entity_id, rec.video_id
                )));
            }
            if !same_stream {
                flush(&mut stream, &mut seq_in_stream, &mut tracklets);
                seq_in_stream = 0;
            } else if prev.frame_index + 1 != rec.frame_index
                || iou(&prev.bbox, &rec.bbox)? < cfg.iou_min
            {
                flush(&mut stream, &mut seq_in_stream, &mut tracklets);
            }
        }
        stream.push(rec.clone());
    }
    flush(&mut stream, &mut seq_in_stream, &mut tracklets);
    Ok(tracklets)
}

/// Cuts a tracklet's retained frames into `floor(N / kappa)` complete
/// fragments; the trailing remainder is dropped. Returns an empty list when
/// the tracklet is too short (the caller reports it as skipped).
pub fn fragment_tracklet(
    t: &Tracklet,
    cfg: &FragmentConfig,
    video_length: u64,
) -> Result<Vec<Fragment>> {
    cfg.validate()?;
    if video_length == 0 {
        return Err(Error::Config("video_length must be positive".into()));
    }
    let retained: Vec<&DetectionRecord> = t.retained_frames().collect();
    let n = retained.len();
    let m = n / cfg.kappa;
    let mut fragments = Vec::with_capacity(m);
    for i in 0..m {
        let slice = &retained[i * cfg.kappa..(i + 1) * cfg.kappa];
        let mid = slice[cfg.kappa / 2];
        if mid.frame_index >= video_length {
            return Err(Error::Data(format!(
                "frame index {} exceeds video length {} in '{}'",
                mid.frame_index, video_length, t.tracklet_id
            )));
        }
        let features = slice
            .iter()
            .map(|f| f.feature.clone())
            .collect::<Option<Vec<_>>>();
        fragments.push(Fragment {
            parent: t.tracklet_id.clone(),
            index: i,
            frames: slice.iter().map(|&f| f.clone()).collect(),
            timestamp: mid.frame_index as f64 / video_length as f64,
            features,
        });
    }
    Ok(fragments)
}

/// Fragments every tracklet, returning the fragments plus the ids of
/// tracklets skipped for being shorter than `kappa` retained frames.
pub fn fragment_tracklets(
    tracklets: &[Tracklet],
    cfg: &FragmentConfig,
    video_lengths: &BTreeMap<String, u64>,
) -> Result<(Vec<Fragment>, Vec<String>)> {
    let mut fragments = Vec::new();
    let mut skipped = Vec::new();
    for t in tracklets {
        let length = *video_lengths
            .get(&t.video_id)
            .ok_or_else(|| Error::Data(format!("no video length recorded for '{}'", t.video_id)))?;
        let fs = fragment_tracklet(t, cfg, length)?;
        if fs.is_empty() {
            skipped.push(t.tracklet_id.clone());
        } else {
            fragments.extend(fs);
        }
    }
    Ok((fragments, skipped))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn bx(x0: f64, y0: f64, x1: f64, y1: f64) -> BBox {
        BBox::new(x0, y0, x1, y1).unwrap()
    }

    fn rec(video: &str, entity: &str, frame: u64, bbox: BBox) -> DetectionRecord {
        DetectionRecord {
            video_id: video.into(),
            frame_index: frame,
            entity_id: entity.into(),
            bbox,
            feature: None,
        }
    }

    /// Consecutive frames with boxes drifting by `step` px per frame.
    fn drifting_stream(video: &str, entity: &str, frames: std::ops::Range<u64>, step: f64) -> Vec<DetectionRecord> {
        frames
            .map(|f| {
                let off = step * f as f64;
                rec(video, entity, f, bx(off, off, off + 10.0, off + 10.0))
            })
            .collect()
    }

    #[test]
    fn iou_identity() {
        let a = bx(0.0, 0.0, 10.0, 10.0);
        assert_eq!(iou(&a, &a).unwrap(), 1.0);
    }

    #[test]
    fn iou_disjoint() {
        let a = bx(0.0, 0.0, 10.0, 10.0);
        let b = bx(20.0, 20.0, 30.0, 30.0);
        assert_eq!(iou(&a, &b).unwrap(), 0.0);
    }

    #[test]
    fn iou_half_overlap() {
        // intersection 50, union 150
        let a = bx(0.0, 0.0, 10.0, 10.0);
        let b = bx(5.0, 0.0, 15.0, 10.0);
        assert_relative_eq!(iou(&a, &b).unwrap(), 1.0 / 3.0, max_relative = 1e-12);
    }

    #[test]
    fn iou_rejects_degenerate() {
        let a = bx(0.0, 0.0, 10.0, 10.0);
        let z = BBox {
            x_min: 1.0,
            y_min: 1.0,
            x_max: 1.0,
            y_max: 5.0,
        };
        assert!(matches!(iou(&a, &z), Err(Error::InvalidBox(_))));
    }

    #[test]
    fn enlarge_identity_at_one() {
        let b = bx(10.0, 10.0, 20.0, 20.0);
        assert_eq!(enlarge_bbox(&b, 1.0, (100.0, 100.0)).unwrap(), b);
    }

    #[test]
    fn enlarge_doubles_sides() {
        let b = bx(10.0, 10.0, 20.0, 20.0);
        let e = enlarge_bbox(&b, 2.0, (100.0, 100.0)).unwrap();
        assert_eq!(e, bx(5.0, 5.0, 25.0, 25.0));
    }

    #[test]
    fn enlarge_clamps_to_frame() {
        let b = bx(0.0, 0.0, 10.0, 10.0);
        let e = enlarge_bbox(&b, 5.0, (20.0, 20.0)).unwrap();
        assert_eq!(e, bx(0.0, 0.0, 20.0, 20.0));
    }

    #[test]
    fn enlarge_scales_diagonal_exactly() {
        // box far from the frame edges so no clamp fires
        let b = bx(1003.0, 1007.0, 1019.0, 1012.5);
        for psi in [1.0, 2.0, 3.7, 5.0, 10.0] {
            let e = enlarge_bbox(&b, psi, (f64::INFINITY, f64::INFINITY)).unwrap();
            assert_relative_eq!(e.diagonal(), psi * b.diagonal(), max_relative = 1e-9);
        }
    }

    #[test]
    fn build_subsamples_every_stride() {
        let records = drifting_stream("v", "e", 0..8, 0.5);
        let ts = build_tracklets(&records, &FragmentConfig::default()).unwrap();
        assert_eq!(ts.len(), 1);
        let kept: Vec<u64> = ts[0].retained_frames().map(|f| f.frame_index).collect();
        assert_eq!(kept, vec![0, 4]);
        assert_eq!(ts[0].retained_len(), 2);
        assert_eq!(ts[0].frames.len(), 8);
    }

    #[test]
    fn build_splits_on_frame_gap() {
        let mut records = drifting_stream("v", "e", 0..4, 0.0);
        records.extend(drifting_stream("v", "e", 10..14, 0.0));
        let ts = build_tracklets(&records, &FragmentConfig::default()).unwrap();
        assert_eq!(ts.len(), 2);
        assert_eq!(ts[0].first_frame(), 0);
        assert_eq!(ts[1].first_frame(), 10);
    }

    #[test]
    fn build_splits_on_low_iou() {
        // frames 0..=2 overlap heavily, frame 3 jumps far away (IoU 0.05 < 0.1),
        // frames 3..=5 overlap heavily again
        let mut records = drifting_stream("v", "e", 0..3, 0.5);
        let jumped: Vec<DetectionRecord> = (3..6)
            .map(|f| {
                let off = 200.0 + 0.5 * f as f64;
                rec("v", "e", f, bx(off, off, off + 10.0, off + 10.0))
            })
            .collect();
        records.extend(jumped);
        let ts = build_tracklets(&records, &FragmentConfig::default()).unwrap();
        assert_eq!(ts.len(), 2);
        assert_eq!(ts[0].frames.len(), 3);
        assert_eq!(ts[1].frames.len(), 3);
    }

    #[test]
    fn build_empty_input() {
        assert!(build_tracklets(&[], &FragmentConfig::default())
            .unwrap()
            .is_empty());
    }

    #[test]
    fn build_rejects_duplicate_frames() {
        let records = vec![
            rec("v", "e", 3, bx(0.0, 0.0, 10.0, 10.0)),
            rec("v", "e", 3, bx(1.0, 1.0, 11.0, 11.0)),
        ];
        assert!(matches!(
            build_tracklets(&records, &FragmentConfig::default()),
            Err(Error::Data(_))
        ));
    }

    #[test]
    fn build_is_idempotent_on_own_streams() {
        let cfg = FragmentConfig::default();
        let mut records = drifting_stream("v", "a", 0..37, 0.5);
        records.extend(drifting_stream("v", "a", 50..61, 0.5));
        records.extend(drifting_stream("v", "b", 5..29, 0.5));
        let first = build_tracklets(&records, &cfg).unwrap();
        for t in &first {
            let again = build_tracklets(&t.frames, &cfg).unwrap();
            assert_eq!(again.len(), 1);
            assert_eq!(again[0].frames, t.frames);
            assert_eq!(again[0].retained, t.retained);
        }
    }

    #[test]
    fn build_preserves_stream_frames_in_order() {
        let cfg = FragmentConfig::default();
        let mut records = drifting_stream("v", "a", 0..13, 0.5);
        records.extend(drifting_stream("v", "a", 20..31, 0.5));
        records.extend(drifting_stream("v", "a", 40..45, 0.5));
        let ts = build_tracklets(&records, &cfg).unwrap();
        let concat: Vec<DetectionRecord> = ts.into_iter().flat_map(|t| t.frames).collect();
        assert_eq!(concat, records);
    }

    #[test]
    fn fragment_exact_division() {
        // 64 consecutive frames, stride 4 -> 16 retained -> 2 fragments of 8
        let records = drifting_stream("v", "e", 0..64, 0.5);
        let ts = build_tracklets(&records, &FragmentConfig::default()).unwrap();
        assert_eq!(ts[0].retained_len(), 16);
        let fs = fragment_tracklet(&ts[0], &FragmentConfig::default(), 100).unwrap();
        assert_eq!(fs.len(), 2);
        assert_eq!(fs[0].frames.len(), 8);
        assert_eq!(fs[1].frames.len(), 8);
        // disjoint and ordered
        assert!(fs[0].frames.last().unwrap().frame_index < fs[1].frames[0].frame_index);
        assert_eq!(fs[0].index, 0);
        assert_eq!(fs[1].index, 1);
    }

    #[test]
    fn fragment_drops_remainder() {
        let t = Tracklet {
            tracklet_id: "v:e:0".into(),
            video_id: "v".into(),
            entity_id: "e".into(),
            frames: drifting_stream("v", "e", 0..19, 0.0),
            retained: (0..19).collect(),
        };
        let fs = fragment_tracklet(&t, &FragmentConfig::default(), 100).unwrap();
        assert_eq!(fs.len(), 2); // floor(19 / 8)
        let covered: usize = fs.iter().map(|f| f.frames.len()).sum();
        assert_eq!(covered, 16); // 3 frames dropped
    }

    #[test]
    fn fragment_short_tracklet_is_skipped() {
        let t = Tracklet {
            tracklet_id: "v:e:0".into(),
            video_id: "v".into(),
            entity_id: "e".into(),
            frames: drifting_stream("v", "e", 0..5, 0.0),
            retained: (0..5).collect(),
        };
        assert!(fragment_tracklet(&t, &FragmentConfig::default(), 100)
            .unwrap()
            .is_empty());
        let lengths: BTreeMap<String, u64> = [("v".to_string(), 100u64)].into_iter().collect();
        let (fs, skipped) = fragment_tracklets(std::slice::from_ref(&t), &FragmentConfig::default(), &lengths).unwrap();
        assert!(fs.is_empty());
        assert_eq!(skipped, vec!["v:e:0".to_string()]);
    }

    #[test]
    fn fragment_timestamp_is_middle_frame() {
        let records = drifting_stream("v", "e", 0..32, 0.5);
        let ts = build_tracklets(&records, &FragmentConfig::default()).unwrap();
        // retained frames 0,4,...,28; first fragment covers 0..=28, middle
        // element (index 4 of 8) is frame 16
        let fs = fragment_tracklet(&ts[0], &FragmentConfig::default(), 100).unwrap();
        assert_eq!(fs.len(), 1);
        assert_relative_eq!(fs[0].timestamp, 16.0 / 100.0);
    }

    #[test]
    fn tracklet_position_is_midpoint() {
        let records = drifting_stream("v", "e", 10..21, 0.5);
        let ts = build_tracklets(&records, &FragmentConfig::default()).unwrap();
        assert_relative_eq!(ts[0].position(100), 15.0 / 100.0);
    }

    proptest! {
        #[test]
        fn iou_symmetric_and_bounded(
            ax in 0.0..50.0f64, ay in 0.0..50.0f64, aw in 1.0..30.0f64, ah in 1.0..30.0f64,
            bx_ in 0.0..50.0f64, by in 0.0..50.0f64, bw in 1.0..30.0f64, bh in 1.0..30.0f64,
        ) {
            let a = bx(ax, ay, ax + aw, ay + ah);
            let b = bx(bx_, by, bx_ + bw, by + bh);
            let ab = iou(&a, &b).unwrap();
            let ba = iou(&b, &a).unwrap();
            prop_assert_eq!(ab, ba);
            prop_assert!((0.0..=1.0).contains(&ab));
            prop_assert_eq!(iou(&a, &a).unwrap(), 1.0);
        }

        #[test]
        fn enlarge_diagonal_ratio(
            x in 1000.0..1100.0f64, y in 1000.0..1100.0f64,
            w in 0.5..40.0f64, h in 0.5..40.0f64,
            psi in 1.0..12.0f64,
        ) {
            let b = bx(x, y, x + w, y + h);
            let e = enlarge_bbox(&b, psi, (f64::INFINITY, f64::INFINITY)).unwrap();
            prop_assert!((e.diagonal() / b.diagonal() - psi).abs() <= 1e-9 * psi);
            let (cx0, cy0) = b.center();
            let (cx1, cy1) = e.center();
            prop_assert!((cx0 - cx1).abs() < 1e-9 && (cy0 - cy1).abs() < 1e-9);
        }

        #[test]
        fn fragments_partition_retained_prefix(len in 1usize..80, kappa in 1usize..10, stride in 1usize..6) {
            let cfg = FragmentConfig { kappa, sampling_stride: stride, ..FragmentConfig::default() };
            let records = drifting_stream("v", "e", 0..len as u64, 0.2);
            let ts = build_tracklets(&records, &cfg).unwrap();
            prop_assert_eq!(ts.len(), 1);
            let t = &ts[0];
            let fs = fragment_tracklet(t, &cfg, 200).unwrap();
            prop_assert_eq!(fs.len(), t.retained_len() / kappa);
            // each retained frame appears in at most one fragment, in order
            let mut seen: Vec<u64> = Vec::new();
            for f in &fs {
                prop_assert_eq!(f.frames.len(), kappa);
                for fr in &f.frames {
                    seen.push(fr.frame_index);
                }
            }
            let expect: Vec<u64> = t.retained_frames().map(|f| f.frame_index).take(seen.len()).collect();
            prop_assert_eq!(seen, expect);
        }
    }
}
