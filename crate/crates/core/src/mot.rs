//! MOTChallenge-style CSV I/O for ground truth and tracker results, plus the
//! per-frame mask sidecar files.
//!
//! Ground truth rows: `frame,id,bb_left,bb_top,bb_width,bb_height,conf,class,visibility`
//! Result rows: `frame,id,bb_left,bb_top,bb_width,bb_height,conf,-1,-1,-1`
//! Frames are 1-based in files and 0-based in memory.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::detector::{encode_mask_rle, parse_mask_rle, GroundTruthStore, GtInstance};
use crate::model::{BoundingBox, InstanceMask};

#[derive(Debug, Error)]
pub enum MotError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> MotError + '_ {
    move |source| MotError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// One parsed CSV row (frame kept 1-based as in the file).
#[derive(Debug, Clone, PartialEq)]
pub struct MotRow {
    pub frame: u64,
    pub id: u64,
    pub bbox: BoundingBox,
    pub conf: f64,
    pub class_id: i64,
    pub visibility: f64,
}

pub fn parse_mot_line(line: &str, path: &str, lineno: usize) -> Result<MotRow, MotError> {
    let err = |msg: String| MotError::Parse {
        path: path.to_string(),
        line: lineno,
        msg,
    };
    let fields: Vec<&str> = line.split(',').map(str::trim).collect();
    if fields.len() < 7 {
        return Err(err(format!("expected >=7 comma-separated fields, got {}", fields.len())));
    }
    let frame: u64 = fields[0]
        .parse()
        .map_err(|_| err(format!("bad frame '{}'", fields[0])))?;
    if frame == 0 {
        return Err(err("frame numbering is 1-based".into()));
    }
    let id: u64 = fields[1]
        .parse()
        .map_err(|_| err(format!("bad id '{}'", fields[1])))?;
    let f = |i: usize, name: &str| -> Result<f64, MotError> {
        fields[i]
            .parse()
            .map_err(|_| err(format!("bad {name} '{}'", fields[i])))
    };
    let x = f(2, "bb_left")?;
    let y = f(3, "bb_top")?;
    let w = f(4, "bb_width")?;
    let h = f(5, "bb_height")?;
    if w <= 0.0 || h <= 0.0 {
        return Err(err(format!("non-positive box {w}x{h}")));
    }
    let conf = f(6, "conf")?;
    let class_id = if fields.len() > 7 {
        fields[7]
            .parse()
            .map_err(|_| err(format!("bad class '{}'", fields[7])))?
    } else {
        -1
    };
    let visibility = if fields.len() > 8 { f(8, "visibility")? } else { 1.0 };
    Ok(MotRow {
        frame,
        id,
        bbox: BoundingBox::new(x, y, w, h),
        conf,
        class_id,
        visibility,
    })
}

pub fn read_mot_csv(path: &Path) -> Result<Vec<MotRow>, MotError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let name = path.display().to_string();
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        rows.push(parse_mot_line(line, &name, i + 1)?);
    }
    Ok(rows)
}

/// Boxes per 0-based frame, keyed for metric evaluation.
pub type TrackStore = BTreeMap<u64, Vec<(u64, BoundingBox)>>;

pub fn rows_to_track_store(rows: &[MotRow]) -> TrackStore {
    let mut store: TrackStore = BTreeMap::new();
    for r in rows {
        store.entry(r.frame - 1).or_default().push((r.id, r.bbox));
    }
    store
}

/// Format one result row; coordinates at two decimals for stable,
/// byte-reproducible output.
pub fn format_result_row(frame0: u64, id: u64, bbox: &BoundingBox, conf: f64) -> String {
    format!(
        "{},{},{:.2},{:.2},{:.2},{:.2},{:.2},-1,-1,-1",
        frame0 + 1,
        id,
        bbox.x,
        bbox.y,
        bbox.w,
        bbox.h,
        conf
    )
}

/// Directory holding the per-frame mask sidecar files for a CSV at `path`.
pub fn mask_sidecar_dir(path: &Path) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "gt".into());
    path.with_file_name(format!("{stem}_masks"))
}

/// Load a ground-truth store from a MOT CSV, attaching masks from the
/// sidecar directory when present; otherwise each instance gets a
/// full-rectangle mask matching its box (degraded mode).
pub fn load_ground_truth(path: &Path) -> Result<GroundTruthStore, MotError> {
    let rows = read_mot_csv(path)?;
    let max_frame = rows.iter().map(|r| r.frame).max().unwrap_or(0);
    let mut frames: Vec<Vec<GtInstance>> = vec![Vec::new(); max_frame as usize];
    let mask_dir = mask_sidecar_dir(path);
    // frame (1-based) -> id -> mask
    let mut masks: BTreeMap<u64, BTreeMap<u64, InstanceMask>> = BTreeMap::new();
    if mask_dir.is_dir() {
        for frame in 1..=max_frame {
            let mpath = mask_dir.join(format!("{frame:06}.txt"));
            if !mpath.is_file() {
                continue;
            }
            let text = std::fs::read_to_string(&mpath).map_err(io_err(&mpath))?;
            let name = mpath.display().to_string();
            for (i, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() {
                    continue;
                }
                let err = |msg: String| MotError::Parse {
                    path: name.clone(),
                    line: i + 1,
                    msg,
                };
                let mut parts = line.split_whitespace();
                let id: u64 = parts
                    .next()
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| err("bad id".into()))?;
                let x: i64 = parts
                    .next()
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| err("bad x".into()))?;
                let y: i64 = parts
                    .next()
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| err("bad y".into()))?;
                let rle = parts.next().ok_or_else(|| err("missing rle".into()))?;
                let mask = parse_mask_rle(rle)
                    .map_err(|e| err(e.to_string()))?
                    .translated(x, y);
                masks.entry(frame).or_default().insert(id, mask);
            }
        }
    }
    for r in rows {
        let mask = masks
            .get(&r.frame)
            .and_then(|m| m.get(&r.id))
            .cloned()
            .or_else(|| {
                Some(InstanceMask::full(
                    (r.bbox.x.round() as i64, r.bbox.y.round() as i64),
                    (r.bbox.w.round() as usize).max(1),
                    (r.bbox.h.round() as usize).max(1),
                ))
            });
        frames[(r.frame - 1) as usize].push(GtInstance {
            id: r.id,
            class_id: r.class_id.max(0) as u32,
            bbox: r.bbox,
            mask,
        });
    }
    Ok(GroundTruthStore::new(frames))
}

/// Write a ground-truth store as MOT CSV plus the mask sidecar directory.
pub fn write_ground_truth(store: &GroundTruthStore, path: &Path) -> Result<(), MotError> {
    let mut csv = String::new();
    let mask_dir = mask_sidecar_dir(path);
    std::fs::create_dir_all(&mask_dir).map_err(io_err(&mask_dir))?;
    for (idx, frame) in store.frames.iter().enumerate() {
        let frame_no = idx as u64 + 1;
        let mut sidecar = String::new();
        for inst in frame {
            writeln!(
                csv,
                "{},{},{:.2},{:.2},{:.2},{:.2},1,{},1.0",
                frame_no,
                inst.id,
                inst.bbox.x,
                inst.bbox.y,
                inst.bbox.w,
                inst.bbox.h,
                inst.class_id
            )
            .expect("string write");
            if let Some(mask) = &inst.mask {
                let (ox, oy) = mask.origin();
                writeln!(sidecar, "{} {} {} {}", inst.id, ox, oy, encode_mask_rle(mask))
                    .expect("string write");
            }
        }
        if !sidecar.is_empty() {
            let mpath = mask_dir.join(format!("{frame_no:06}.txt"));
            std::fs::write(&mpath, sidecar).map_err(io_err(&mpath))?;
        }
    }
    std::fs::write(path, csv).map_err(io_err(path))?;
    Ok(())
}

/// Ground truth as a track store for self-evaluation.
pub fn ground_truth_track_store(store: &GroundTruthStore) -> TrackStore {
    let mut ts: TrackStore = BTreeMap::new();
    for (idx, frame) in store.frames.iter().enumerate() {
        let entry = ts.entry(idx as u64).or_default();
        for inst in frame {
            entry.push((inst.id, inst.bbox));
        }
    }
    ts
}
