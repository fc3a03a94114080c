//! Pluggable detection contract with three implementations: a ground-truth
//! oracle with a replayable noise model, a fixed-cost stub for speed
//! benchmarks, and a client for an external detector child process.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::time::Duration;

use thiserror::Error;

use crate::model::{BoundingBox, Detection, ImageBuffer, InstanceMask};
use crate::rng::SplitMix64;

#[derive(Debug, Error)]
pub enum DetectorError {
    #[error("frame index {0} not present in ground-truth store")]
    UnknownFrame(u64),
    #[error("detector did not respond within the timeout")]
    DetectorUnavailable,
    #[error("detector protocol error: {0}")]
    ProtocolError(String),
    #[error("detector connection closed")]
    DetectorClosed,
    #[error("failed to start detector process: {0}")]
    SpawnFailed(String),
    #[error("detector i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Behavioral contract for all detectors. Implementations never read
/// tracker state; detections are returned in region-local coordinates.
pub trait Detector {
    fn detect(
        &mut self,
        frame_index: u64,
        window_index: usize,
        window: &BoundingBox,
        region: &ImageBuffer,
    ) -> Result<Vec<Detection>, DetectorError>;
}

/// One ground-truth instance of one frame.
#[derive(Debug, Clone)]
pub struct GtInstance {
    pub id: u64,
    pub class_id: u32,
    pub bbox: BoundingBox,
    pub mask: Option<InstanceMask>,
}

/// Per-frame ground truth, frame indices contiguous from 0.
#[derive(Debug, Clone, Default)]
pub struct GroundTruthStore {
    pub frames: Vec<Vec<GtInstance>>,
}

impl GroundTruthStore {
    pub fn new(frames: Vec<Vec<GtInstance>>) -> Self {
        Self { frames }
    }

    pub fn frame(&self, index: u64) -> Result<&[GtInstance], DetectorError> {
        self.frames
            .get(index as usize)
            .map(Vec::as_slice)
            .ok_or(DetectorError::UnknownFrame(index))
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

/// Replayable detection noise; all randomness is keyed by
/// (seed, frame, window) so runs are order-independent and bit-identical.
#[derive(Debug, Clone)]
pub struct OracleNoiseModel {
    pub miss_rate: f64,
    /// Expected spurious detections per window (Poisson rate).
    pub false_positive_rate: f64,
    pub box_jitter_sigma: f64,
    pub confidence_range: (f64, f64),
    pub seed: u64,
}

impl OracleNoiseModel {
    pub fn noise_free() -> Self {
        Self {
            miss_rate: 0.0,
            false_positive_rate: 0.0,
            box_jitter_sigma: 0.0,
            confidence_range: (1.0, 1.0),
            seed: 0,
        }
    }
}

/// Detector that reads ground truth (optionally noised) instead of running
/// a model; a GT instance belongs to a window iff its box center is inside.
pub struct OracleDetector {
    store: GroundTruthStore,
    noise: OracleNoiseModel,
}

impl OracleDetector {
    pub fn new(store: GroundTruthStore, noise: OracleNoiseModel) -> Self {
        Self { store, noise }
    }

    pub fn store(&self) -> &GroundTruthStore {
        &self.store
    }
}

impl Detector for OracleDetector {
    fn detect(
        &mut self,
        frame_index: u64,
        window_index: usize,
        window: &BoundingBox,
        _region: &ImageBuffer,
    ) -> Result<Vec<Detection>, DetectorError> {
        let instances = self.store.frame(frame_index)?;
        let mut rng = SplitMix64::keyed(self.noise.seed, frame_index, window_index as u64);
        let mut out = Vec::new();
        for inst in instances {
            let (cx, cy) = inst.bbox.center();
            if !window.contains_point(cx, cy) {
                continue;
            }
            if self.noise.miss_rate > 0.0 && rng.next_f64() < self.noise.miss_rate {
                continue;
            }
            let mut bbox = inst.bbox;
            if self.noise.box_jitter_sigma > 0.0 {
                let s = self.noise.box_jitter_sigma;
                let left = bbox.x + s * rng.gaussian();
                let top = bbox.y + s * rng.gaussian();
                let right = bbox.right() + s * rng.gaussian();
                let bottom = bbox.bottom() + s * rng.gaussian();
                bbox = BoundingBox::new(
                    left,
                    top,
                    (right - left).max(1.0),
                    (bottom - top).max(1.0),
                );
            }
            let (lo, hi) = self.noise.confidence_range;
            let conf = rng.uniform(lo, hi).clamp(0.0, 1.0);
            // Region-local coordinates; the mask travels with the box shift.
            let local_box = bbox.translated(-window.x, -window.y);
            let mask = inst.mask.as_ref().map(|m| {
                let dx = (bbox.x - inst.bbox.x).round() as i64 - window.x as i64;
                let dy = (bbox.y - inst.bbox.y).round() as i64 - window.y as i64;
                m.translated(dx, dy)
            });
            out.push(
                Detection::new(inst.class_id, local_box, mask, conf)
                    .expect("confidence clamped to [0,1]"),
            );
        }
        // Spurious detections with random boxes (20-120 px) and full-rect masks.
        if self.noise.false_positive_rate > 0.0 {
            let n = rng.poisson(self.noise.false_positive_rate);
            for _ in 0..n {
                let w = rng.uniform(20.0, 120.0).round().max(1.0);
                let h = rng.uniform(20.0, 120.0).round().max(1.0);
                let x = rng.uniform(0.0, (window.w - w).max(1.0)).round();
                let y = rng.uniform(0.0, (window.h - h).max(1.0)).round();
                let (lo, hi) = self.noise.confidence_range;
                let conf = rng.uniform(lo, hi).clamp(0.0, 1.0);
                let mask = InstanceMask::full((x as i64, y as i64), w as usize, h as usize);
                out.push(
                    Detection::new(0, BoundingBox::new(x, y, w, h), Some(mask), conf)
                        .expect("confidence clamped"),
                );
            }
        }
        Ok(out)
    }
}

/// Fixed-cost detector that never detects anything; isolates pipeline
/// overhead from detector cost in speed benchmarks.
pub struct StubDetector {
    pub delay: Duration,
}

impl Detector for StubDetector {
    fn detect(
        &mut self,
        _frame_index: u64,
        _window_index: usize,
        _window: &BoundingBox,
        _region: &ImageBuffer,
    ) -> Result<Vec<Detection>, DetectorError> {
        if !self.delay.is_zero() {
            std::thread::sleep(self.delay);
        }
        Ok(Vec::new())
    }
}

/// Parse a run-length mask string `WxH:r1,r2,...` with alternating
/// background/foreground runs, row-major; the run sum must equal W*H.
pub fn parse_mask_rle(text: &str) -> Result<InstanceMask, DetectorError> {
    let bad = |msg: &str| DetectorError::ProtocolError(format!("rle '{text}': {msg}"));
    let (dims, runs) = text.split_once(':').ok_or_else(|| bad("missing ':'"))?;
    let (w, h) = dims.split_once('x').ok_or_else(|| bad("missing 'x' in dims"))?;
    let w: usize = w.parse().map_err(|_| bad("bad width"))?;
    let h: usize = h.parse().map_err(|_| bad("bad height"))?;
    if w == 0 || h == 0 {
        return Err(bad("zero extent"));
    }
    let mut bits = Vec::with_capacity(w * h);
    let mut fg = false;
    for run in runs.split(',') {
        let n: usize = run.trim().parse().map_err(|_| bad("bad run length"))?;
        bits.extend(std::iter::repeat(fg).take(n));
        fg = !fg;
    }
    if bits.len() != w * h {
        return Err(bad(&format!("run sum {} != {}", bits.len(), w * h)));
    }
    InstanceMask::new((0, 0), w, h, bits).map_err(|_| bad("zero foreground"))
}

/// Canonical run-length encoding: leading background run (possibly 0), then
/// strictly positive alternating runs.
pub fn encode_mask_rle(mask: &InstanceMask) -> String {
    let mut runs: Vec<usize> = Vec::new();
    let mut current = false; // encoding starts with a background run
    let mut count = 0usize;
    for &b in mask.bits() {
        if b == current {
            count += 1;
        } else {
            runs.push(count);
            current = b;
            count = 1;
        }
    }
    runs.push(count);
    let body: Vec<String> = runs.iter().map(|r| r.to_string()).collect();
    format!("{}x{}:{}", mask.width(), mask.height(), body.join(","))
}

/// Client for an external detector child process speaking a newline-delimited
/// protocol over standard streams: request `DETECT <frame> <w> <h>` plus raw
/// RGB payload, response `OK <n>` plus n `class x y w h conf rle` records.
pub struct ExternalDetector {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<std::io::Result<String>>,
    pub timeout: Duration,
}

impl ExternalDetector {
    /// Spawn `command` through the shell with piped standard streams.
    pub fn spawn(command: &str, timeout: Duration) -> Result<Self, DetectorError> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()
            .map_err(|e| DetectorError::SpawnFailed(e.to_string()))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = mpsc::channel();
        std::thread::spawn(move || {
            let reader = BufReader::new(stdout);
            for line in reader.lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        Ok(Self {
            child,
            stdin,
            lines: rx,
            timeout,
        })
    }

    fn read_line(&mut self) -> Result<String, DetectorError> {
        match self.lines.recv_timeout(self.timeout) {
            Ok(Ok(line)) => Ok(line),
            Ok(Err(e)) => Err(DetectorError::Io(e)),
            Err(RecvTimeoutError::Timeout) => Err(DetectorError::DetectorUnavailable),
            Err(RecvTimeoutError::Disconnected) => Err(DetectorError::DetectorClosed),
        }
    }
}

impl Drop for ExternalDetector {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

fn parse_record(line: &str) -> Result<Detection, DetectorError> {
    let bad = |msg: String| DetectorError::ProtocolError(format!("record '{line}': {msg}"));
    let fields: Vec<&str> = line.split_whitespace().collect();
    if fields.len() != 7 {
        return Err(bad(format!("expected 7 fields, got {}", fields.len())));
    }
    let class_id: u32 = fields[0].parse().map_err(|_| bad("bad class".into()))?;
    let x: f64 = fields[1].parse().map_err(|_| bad("bad x".into()))?;
    let y: f64 = fields[2].parse().map_err(|_| bad("bad y".into()))?;
    let w: f64 = fields[3].parse().map_err(|_| bad("bad w".into()))?;
    let h: f64 = fields[4].parse().map_err(|_| bad("bad h".into()))?;
    let conf: f64 = fields[5].parse().map_err(|_| bad("bad conf".into()))?;
    if !(0.0..=1.0).contains(&conf) {
        return Err(bad(format!("confidence {conf} outside [0,1]")));
    }
    if w <= 0.0 || h <= 0.0 {
        return Err(bad("non-positive box".into()));
    }
    let mask = if fields[6] == "-" {
        None
    } else {
        Some(
            parse_mask_rle(fields[6])?
                .translated(x.round() as i64, y.round() as i64),
        )
    };
    Detection::new(class_id, BoundingBox::new(x, y, w, h), mask, conf)
        .map_err(|e| bad(e.to_string()))
}

impl Detector for ExternalDetector {
    fn detect(
        &mut self,
        frame_index: u64,
        _window_index: usize,
        _window: &BoundingBox,
        region: &ImageBuffer,
    ) -> Result<Vec<Detection>, DetectorError> {
        let header = format!(
            "DETECT {} {} {}\n",
            frame_index,
            region.width(),
            region.height()
        );
        self.stdin.write_all(header.as_bytes())?;
        // Payload is always interleaved RGB; replicate luma when needed.
        if region.channels() == 3 {
            self.stdin.write_all(region.data())?;
        } else {
            let mut rgb = Vec::with_capacity(region.data().len() * 3);
            for &v in region.data() {
                rgb.extend_from_slice(&[v, v, v]);
            }
            self.stdin.write_all(&rgb)?;
        }
        self.stdin.flush()?;

        let head = self.read_line()?;
        let n: usize = head
            .strip_prefix("OK ")
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| DetectorError::ProtocolError(format!("bad header '{head}'")))?;
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            let line = self.read_line()?;
            out.push(parse_record(&line)?);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store_one() -> GroundTruthStore {
        let inst = GtInstance {
            id: 1,
            class_id: 0,
            bbox: BoundingBox::new(100.0, 100.0, 40.0, 30.0),
            mask: Some(InstanceMask::full((100, 100), 40, 30)),
        };
        GroundTruthStore::new(vec![vec![inst]])
    }

    #[test]
    fn noise_free_oracle_passthrough() {
        let mut det = OracleDetector::new(store_one(), OracleNoiseModel::noise_free());
        let window = BoundingBox::new(0.0, 0.0, 640.0, 640.0);
        let region = ImageBuffer::filled(4, 4, 1, 0);
        let out = det.detect(0, 0, &window, &region).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].bbox, BoundingBox::new(100.0, 100.0, 40.0, 30.0));
        assert_eq!(out[0].confidence, 1.0);
        assert_eq!(out[0].mask.as_ref().unwrap().origin(), (100, 100));
    }

    #[test]
    fn oracle_center_rule() {
        let mut det = OracleDetector::new(store_one(), OracleNoiseModel::noise_free());
        // Center (120,115) is outside this window.
        let window = BoundingBox::new(130.0, 0.0, 640.0, 640.0);
        let region = ImageBuffer::filled(4, 4, 1, 0);
        assert!(det.detect(0, 0, &window, &region).unwrap().is_empty());
    }

    #[test]
    fn oracle_miss_rate_one() {
        let noise = OracleNoiseModel {
            miss_rate: 1.0,
            ..OracleNoiseModel::noise_free()
        };
        let mut det = OracleDetector::new(store_one(), noise);
        let window = BoundingBox::new(0.0, 0.0, 640.0, 640.0);
        let region = ImageBuffer::filled(4, 4, 1, 0);
        assert!(det.detect(0, 0, &window, &region).unwrap().is_empty());
    }

    #[test]
    fn oracle_replay_determinism() {
        let noise = OracleNoiseModel {
            miss_rate: 0.3,
            false_positive_rate: 1.0,
            box_jitter_sigma: 2.0,
            confidence_range: (0.4, 0.9),
            seed: 99,
        };
        let window = BoundingBox::new(0.0, 0.0, 640.0, 640.0);
        let region = ImageBuffer::filled(4, 4, 1, 0);
        let mut a = OracleDetector::new(store_one(), noise.clone());
        let mut b = OracleDetector::new(store_one(), noise);
        // Call b twice first so internal call order cannot matter.
        let _ = b.detect(0, 3, &window, &region).unwrap();
        let ra = a.detect(0, 0, &window, &region).unwrap();
        let rb = b.detect(0, 0, &window, &region).unwrap();
        assert_eq!(ra, rb);
    }

    #[test]
    fn oracle_unknown_frame() {
        let mut det = OracleDetector::new(store_one(), OracleNoiseModel::noise_free());
        let window = BoundingBox::new(0.0, 0.0, 640.0, 640.0);
        let region = ImageBuffer::filled(4, 4, 1, 0);
        assert!(matches!(
            det.detect(5, 0, &window, &region),
            Err(DetectorError::UnknownFrame(5))
        ));
    }

    #[test]
    fn rle_parse_cases() {
        let full = parse_mask_rle("2x2:0,4").unwrap();
        assert_eq!(full.foreground_count(), 4);

        let diag = parse_mask_rle("2x2:1,2,1").unwrap();
        assert!(!diag.bit(0, 0));
        assert!(diag.bit(1, 0));
        assert!(diag.bit(0, 1));
        assert!(!diag.bit(1, 1));

        assert!(parse_mask_rle("2x2:0,3").is_err());
        assert!(parse_mask_rle("2x2:4").is_err()); // all background
        assert!(parse_mask_rle("junk").is_err());
    }

    #[test]
    fn rle_roundtrip_canonical() {
        for s in ["2x2:0,4", "2x2:1,2,1", "3x3:0,1,1,1,1,1,1,1,1,1", "4x1:2,2"] {
            let m = parse_mask_rle(s).unwrap();
            let e = encode_mask_rle(&m);
            assert_eq!(parse_mask_rle(&e).unwrap(), m);
            assert_eq!(encode_mask_rle(&parse_mask_rle(&e).unwrap()), e);
        }
    }

    #[test]
    fn record_parsing() {
        let d = parse_record("0 10.0 12.0 40.0 30.0 0.91 2x2:0,4").unwrap();
        assert_eq!(d.class_id, 0);
        assert_eq!(d.bbox, BoundingBox::new(10.0, 12.0, 40.0, 30.0));
        assert_eq!(d.confidence, 0.91);
        assert_eq!(d.mask.as_ref().unwrap().origin(), (10, 12));

        assert!(matches!(
            parse_record("0 10 12 40 30 1.5 2x2:0,4"),
            Err(DetectorError::ProtocolError(_))
        ));
        assert!(parse_record("0 10 12 40 30 0.5 -").unwrap().mask.is_none());
    }
}
