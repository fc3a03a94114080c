//! Window grid slicing, strategic priority classification and probe
//! scheduling for intermittent re-detection.

use thiserror::Error;

use crate::assoc::iou;
use crate::model::{BoundingBox, Detection, PipelineConfig, Tracklet};

/// IoU above which detections from overlapping windows are considered
/// duplicates during merging.
pub const MERGE_NMS_IOU: f64 = 0.5;

#[derive(Debug, Error)]
pub enum SlicerError {
    #[error("frame dimensions must be positive, got {0}x{1}")]
    BadFrameDims(i64, i64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowClass {
    Edge,
    Instance,
    Background,
}

/// One fixed-size probe window of the frame grid.
#[derive(Debug, Clone)]
pub struct Window {
    pub index: usize,
    pub rect: BoundingBox,
    pub klass: WindowClass,
    pub probes: u64,
    pub last_probe_frame: i64,
}

impl Window {
    fn boost(&self, cfg: &PipelineConfig) -> u64 {
        match self.klass {
            WindowClass::Edge => cfg.edge_rate_boost,
            WindowClass::Instance => cfg.instance_rate_boost,
            WindowClass::Background => 1,
        }
    }
}

/// Window indices selected for one frame, in probe order.
pub type Schedule = Vec<usize>;

fn axis_positions(len: usize, window: usize, stride: usize) -> Vec<usize> {
    if window >= len {
        return vec![0];
    }
    let mut xs = Vec::new();
    let mut x = 0usize;
    while x + window <= len {
        xs.push(x);
        x += stride;
    }
    // Shift a final window inward so the grid reaches the frame border.
    if xs.last().map(|&last| last + window < len).unwrap_or(true) {
        xs.push(len - window);
    }
    xs
}

/// Row-major overlapping grid with stride floor(window_size * (1 - overlap));
/// the last row/column is shifted inward so the union covers the full frame.
pub fn slice_grid(
    frame_w: usize,
    frame_h: usize,
    window_size: usize,
    overlap_ratio: f64,
) -> Result<Vec<Window>, SlicerError> {
    if frame_w == 0 || frame_h == 0 || window_size == 0 {
        return Err(SlicerError::BadFrameDims(frame_w as i64, frame_h as i64));
    }
    let stride = ((window_size as f64) * (1.0 - overlap_ratio)).floor().max(1.0) as usize;
    let xs = axis_positions(frame_w, window_size, stride);
    let ys = axis_positions(frame_h, window_size, stride);
    let mut windows = Vec::with_capacity(xs.len() * ys.len());
    for &y in &ys {
        for &x in &xs {
            let w = window_size.min(frame_w - x);
            let h = window_size.min(frame_h - y);
            windows.push(Window {
                index: windows.len(),
                rect: BoundingBox::new(x as f64, y as f64, w as f64, h as f64),
                klass: WindowClass::Background,
                probes: 0,
                last_probe_frame: -1,
            });
        }
    }
    Ok(windows)
}

/// Recompute window priority classes: Instance when the rect intersects a
/// live tracklet box (takes precedence), else Edge when touching the frame
/// border, else Background.
pub fn classify_windows<'a>(
    windows: &mut [Window],
    tracklets: impl Iterator<Item = &'a Tracklet> + Clone,
    frame_w: usize,
    frame_h: usize,
) {
    for w in windows.iter_mut() {
        let instance = tracklets
            .clone()
            .any(|t| t.is_live() && w.rect.intersects(&t.bbox));
        w.klass = if instance {
            WindowClass::Instance
        } else if w.rect.x == 0.0
            || w.rect.y == 0.0
            || w.rect.right() >= frame_w as f64
            || w.rect.bottom() >= frame_h as f64
        {
            WindowClass::Edge
        } else {
            WindowClass::Background
        };
    }
}

/// Select the `windows_per_frame` highest-urgency windows, where urgency is
/// staleness times the class boost; ties break toward the lowest index.
/// Selected windows are stamped as probed this frame.
pub fn next_windows(
    windows: &mut [Window],
    frame_index: i64,
    cfg: &PipelineConfig,
) -> Schedule {
    let mut order: Vec<(i128, usize)> = windows
        .iter()
        .map(|w| {
            let staleness = (frame_index - w.last_probe_frame).max(0) as i128;
            (staleness * w.boost(cfg) as i128, w.index)
        })
        .collect();
    order.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    let take = cfg.windows_per_frame.min(windows.len());
    let schedule: Schedule = order[..take].iter().map(|&(_, i)| i).collect();
    for &i in &schedule {
        windows[i].last_probe_frame = frame_index;
        windows[i].probes += 1;
    }
    schedule
}

/// Translate per-window detections into frame coordinates and suppress
/// duplicates from overlapping windows with greedy confidence-descending NMS.
pub fn merge_window_detections(per_window: &[(&Window, Vec<Detection>)]) -> Vec<Detection> {
    let mut all: Vec<Detection> = Vec::new();
    for (window, dets) in per_window {
        let ox = window.rect.x;
        let oy = window.rect.y;
        for d in dets {
            let mut d = d.clone();
            d.bbox = d.bbox.translated(ox, oy);
            if let Some(m) = d.mask.take() {
                d.mask = Some(m.translated(ox as i64, oy as i64));
            }
            all.push(d);
        }
    }
    // Stable order: confidence descending, input order for ties.
    let mut idx: Vec<usize> = (0..all.len()).collect();
    idx.sort_by(|&a, &b| {
        all[b]
            .confidence
            .partial_cmp(&all[a].confidence)
            .unwrap()
            .then(a.cmp(&b))
    });
    let mut kept: Vec<Detection> = Vec::new();
    for i in idx {
        if kept
            .iter()
            .all(|k| iou(&k.bbox, &all[i].bbox) <= MERGE_NMS_IOU)
        {
            kept.push(all[i].clone());
        }
    }
    kept
}
