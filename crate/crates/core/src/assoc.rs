//! Detection/tracklet association: PoA and IoU scoring, greedy matching,
//! confidence accumulation and lifecycle, box motion prediction and point
//! resampling.

use thiserror::Error;

use crate::model::{
    BoundingBox, Detection, IdAllocator, ImageBuffer, InstanceMask, PipelineConfig, TrackPoint,
    TrackState, Tracklet,
};
use crate::vision::{select_track_points, FlowResult};

/// Accumulator clamp bounding termination latency after long confident streaks.
pub const CONFIDENCE_CLAMP: (f64, f64) = (-1.0, 2.0);

#[derive(Debug, Error)]
pub enum AssocError {
    #[error("tracklet {0} has no live converged points")]
    NoLivePoints(u64),
}

/// Intersection over union of two boxes.
pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let ix = (a.right().min(b.right()) - a.x.max(b.x)).max(0.0);
    let iy = (a.bottom().min(b.bottom()) - a.y.max(b.y)).max(0.0);
    let inter = ix * iy;
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

/// Point-over-Area index: fraction of alive tracked points falling inside
/// the mask. Defined as 0 for an empty point set.
pub fn poa_index(points: &[TrackPoint], mask: &InstanceMask) -> f64 {
    let mut alive = 0usize;
    let mut inside = 0usize;
    for p in points.iter().filter(|p| p.alive) {
        alive += 1;
        if mask.contains(p.x, p.y) {
            inside += 1;
        }
    }
    if alive == 0 {
        0.0
    } else {
        inside as f64 / alive as f64
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MatchResult {
    /// (tracklet id, detection index) pairs.
    pub pairs: Vec<(u64, usize)>,
    pub unmatched_detections: Vec<usize>,
    pub unmatched_tracklets: Vec<u64>,
}

/// Score a candidate pair: PoA against the detection mask when present,
/// IoU of the boxes otherwise. Returns None when inadmissible (class
/// mismatch or below the respective gate).
pub fn pair_score(t: &Tracklet, d: &Detection, cfg: &PipelineConfig) -> Option<f64> {
    if t.class_id != d.class_id {
        return None;
    }
    match &d.mask {
        Some(mask) => {
            let s = poa_index(&t.points, mask);
            (s >= cfg.poa_threshold).then_some(s)
        }
        None => {
            let s = iou(&t.bbox, &d.bbox);
            (s >= cfg.iou_gate).then_some(s)
        }
    }
}

/// Greedy descending-score matching over admissible (tracklet, detection)
/// pairs; ties break by lower tracklet id then lower detection index.
pub fn match_detections(
    tracklets: &[&Tracklet],
    detections: &[Detection],
    cfg: &PipelineConfig,
) -> MatchResult {
    let mut scored: Vec<(f64, u64, usize)> = Vec::new();
    for t in tracklets {
        for (j, d) in detections.iter().enumerate() {
            if let Some(s) = pair_score(t, d, cfg) {
                scored.push((s, t.id, j));
            }
        }
    }
    scored.sort_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .unwrap()
            .then(a.1.cmp(&b.1))
            .then(a.2.cmp(&b.2))
    });
    let mut used_t = std::collections::HashSet::new();
    let mut used_d = std::collections::HashSet::new();
    let mut pairs = Vec::new();
    for (_, tid, dj) in scored {
        if used_t.contains(&tid) || used_d.contains(&dj) {
            continue;
        }
        used_t.insert(tid);
        used_d.insert(dj);
        pairs.push((tid, dj));
    }
    let unmatched_detections = (0..detections.len())
        .filter(|j| !used_d.contains(j))
        .collect();
    let unmatched_tracklets = tracklets
        .iter()
        .map(|t| t.id)
        .filter(|id| !used_t.contains(id))
        .collect();
    MatchResult {
        pairs,
        unmatched_detections,
        unmatched_tracklets,
    }
}

/// Accumulate re-detection evidence and run the lifecycle thresholds.
/// `matched` carries the detection on a match; `None` means the tracklet's
/// window was probed this frame without a matching detection.
pub fn update_confidence(t: &mut Tracklet, matched: Option<&Detection>, cfg: &PipelineConfig) {
    assert!(t.state != TrackState::Terminated, "terminated tracklet updated");
    let delta = match matched {
        Some(d) => d.confidence - cfg.conf_required_per_detection,
        None => -cfg.conf_required_per_detection,
    };
    t.confidence = (t.confidence + delta).clamp(CONFIDENCE_CLAMP.0, CONFIDENCE_CLAMP.1);
    if t.confidence <= cfg.conf_terminate_threshold {
        t.state = TrackState::Terminated;
    } else if t.state == TrackState::Spurious && t.confidence >= cfg.conf_validate_threshold {
        t.state = TrackState::Confident;
    }
}

/// Advance converged points by their flow, mark failed points dead, and
/// return the mean displacement of the surviving points. `flows` is aligned
/// with `t.points`; dead points carry `None`.
pub fn predict_box_shift(
    t: &mut Tracklet,
    flows: &[Option<FlowResult>],
) -> Result<(f64, f64), AssocError> {
    assert_eq!(flows.len(), t.points.len());
    let mut sx = 0.0;
    let mut sy = 0.0;
    let mut n = 0.0;
    for (p, f) in t.points.iter_mut().zip(flows) {
        if !p.alive {
            continue;
        }
        match f {
            Some(f) if f.converged => {
                p.x += f.displacement.0;
                p.y += f.displacement.1;
                sx += f.displacement.0;
                sy += f.displacement.1;
                n += 1.0;
            }
            _ => p.alive = false,
        }
    }
    if n == 0.0 {
        return Err(AssocError::NoLivePoints(t.id));
    }
    Ok((sx / n, sy / n))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResampleOutcome {
    /// Points replaced inside the new mask, box snapped to the detection.
    Resampled,
    /// Containment check failed: persistence unconfirmed, the match is
    /// demoted to a no-match for confidence purposes.
    Demoted,
}

/// Resample tracking points inside a matched detection's mask, after
/// verifying the current points still widely sit within it.
pub fn resample_points(
    t: &mut Tracklet,
    d: &Detection,
    gray: &ImageBuffer,
    frame_index: u64,
    cfg: &PipelineConfig,
) -> ResampleOutcome {
    let mask = d.mask.as_ref().expect("resample requires a mask");
    if poa_index(&t.points, mask) < cfg.mask_containment_fraction {
        return ResampleOutcome::Demoted;
    }
    t.points = select_track_points(gray, mask, cfg.points_per_instance, t.id, cfg.harris_k);
    t.bbox = d.bbox;
    t.last_redetect_frame = frame_index;
    ResampleOutcome::Resampled
}

/// Start a new spurious tracklet from an unmatched detection. Detections
/// without a mask are dropped (no segment to sample points from).
pub fn spawn_tracklet(
    d: &Detection,
    gray: &ImageBuffer,
    frame_index: u64,
    cfg: &PipelineConfig,
    alloc: &mut IdAllocator,
) -> Option<Tracklet> {
    let mask = d.mask.as_ref()?;
    let id = alloc.allocate();
    let points = select_track_points(gray, mask, cfg.points_per_instance, id, cfg.harris_k);
    let mut t = Tracklet {
        id,
        class_id: d.class_id,
        bbox: d.bbox,
        points,
        confidence: 0.0,
        state: TrackState::Spurious,
        last_redetect_frame: frame_index,
        birth_frame: frame_index,
        needs_urgent_redetect: false,
    };
    update_confidence(&mut t, Some(d), cfg);
    Some(t)
}
