//! Shared data types, geometry primitives and the pipeline configuration.

use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("image data length {got} does not match {width}x{height}x{channels}")]
    BadImageData {
        width: usize,
        height: usize,
        channels: usize,
        got: usize,
    },
    #[error("image dimensions must be at least 1x1")]
    EmptyImage,
    #[error("unsupported channel count {0} (expected 1 or 3)")]
    BadChannels(usize),
    #[error("instance mask has no foreground pixels")]
    EmptyMask,
    #[error("confidence {0} outside [0,1]")]
    BadConfidence(f64),
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: unknown config key '{key}'")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: bad value for '{key}': {msg}")]
    BadValue {
        line: usize,
        key: String,
        msg: String,
    },
    #[error("line {line}: expected 'key = value'")]
    BadSyntax { line: usize },
    #[error("config value out of domain: {0}")]
    OutOfDomain(String),
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

/// Row-major 8-bit raster, single-channel luma or interleaved RGB.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageBuffer {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<u8>,
}

impl ImageBuffer {
    pub fn new(
        width: usize,
        height: usize,
        channels: usize,
        data: Vec<u8>,
    ) -> Result<Self, ModelError> {
        if width == 0 || height == 0 {
            return Err(ModelError::EmptyImage);
        }
        if channels != 1 && channels != 3 {
            return Err(ModelError::BadChannels(channels));
        }
        if data.len() != width * height * channels {
            return Err(ModelError::BadImageData {
                width,
                height,
                channels,
                got: data.len(),
            });
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: u8) -> Self {
        Self::new(width, height, channels, vec![value; width * height * channels])
            .expect("filled image dimensions")
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [u8] {
        &mut self.data
    }

    /// Sample at (x, y, c). Out-of-bounds access is a contract violation.
    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> u8 {
        assert!(x < self.width && y < self.height && c < self.channels);
        self.data[(y * self.width + x) * self.channels + c]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: usize, v: u8) {
        assert!(x < self.width && y < self.height && c < self.channels);
        self.data[(y * self.width + x) * self.channels + c] = v;
    }

    /// Single-channel sample with explicit border clamping.
    #[inline]
    pub fn get_clamped(&self, x: i64, y: i64) -> u8 {
        debug_assert_eq!(self.channels, 1);
        let xc = x.clamp(0, self.width as i64 - 1) as usize;
        let yc = y.clamp(0, self.height as i64 - 1) as usize;
        self.data[yc * self.width + xc]
    }

    /// Bilinear sub-pixel sample of a single-channel image, border clamped.
    pub fn bilinear(&self, x: f64, y: f64) -> f64 {
        debug_assert_eq!(self.channels, 1);
        let x0 = x.floor();
        let y0 = y.floor();
        let fx = x - x0;
        let fy = y - y0;
        let x0 = x0 as i64;
        let y0 = y0 as i64;
        let p00 = self.get_clamped(x0, y0) as f64;
        let p10 = self.get_clamped(x0 + 1, y0) as f64;
        let p01 = self.get_clamped(x0, y0 + 1) as f64;
        let p11 = self.get_clamped(x0 + 1, y0 + 1) as f64;
        p00 * (1.0 - fx) * (1.0 - fy)
            + p10 * fx * (1.0 - fy)
            + p01 * (1.0 - fx) * fy
            + p11 * fx * fy
    }

    /// Copy out an axis-aligned sub-rectangle (integer pixel coordinates).
    pub fn crop(&self, x: usize, y: usize, w: usize, h: usize) -> ImageBuffer {
        assert!(x + w <= self.width && y + h <= self.height && w > 0 && h > 0);
        let mut data = Vec::with_capacity(w * h * self.channels);
        for row in y..y + h {
            let start = (row * self.width + x) * self.channels;
            data.extend_from_slice(&self.data[start..start + w * self.channels]);
        }
        ImageBuffer::new(w, h, self.channels, data).expect("crop dimensions")
    }
}

/// Axis-aligned box with real-valued coordinates so sub-pixel shifts
/// accumulate without quantization drift.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BoundingBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        assert!(w > 0.0 && h > 0.0, "box sides must be positive");
        Self { x, y, w, h }
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x + self.w / 2.0, self.y + self.h / 2.0)
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        Self {
            x: self.x + dx,
            y: self.y + dy,
            w: self.w,
            h: self.h,
        }
    }

    pub fn right(&self) -> f64 {
        self.x + self.w
    }

    pub fn bottom(&self) -> f64 {
        self.y + self.h
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn intersects(&self, other: &BoundingBox) -> bool {
        self.x < other.right()
            && other.x < self.right()
            && self.y < other.bottom()
            && other.y < self.bottom()
    }

    pub fn contains_point(&self, x: f64, y: f64) -> bool {
        x >= self.x && x < self.right() && y >= self.y && y < self.bottom()
    }
}

/// Dense foreground bitmap with a local origin; memory scales with the
/// instance, not the frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstanceMask {
    origin_x: i64,
    origin_y: i64,
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl InstanceMask {
    pub fn new(
        origin: (i64, i64),
        width: usize,
        height: usize,
        bits: Vec<bool>,
    ) -> Result<Self, ModelError> {
        if width == 0 || height == 0 {
            return Err(ModelError::EmptyImage);
        }
        assert_eq!(bits.len(), width * height, "mask bits length");
        if !bits.iter().any(|&b| b) {
            return Err(ModelError::EmptyMask);
        }
        Ok(Self {
            origin_x: origin.0,
            origin_y: origin.1,
            width,
            height,
            bits,
        })
    }

    /// All-foreground rectangle.
    pub fn full(origin: (i64, i64), width: usize, height: usize) -> Self {
        Self::new(origin, width, height, vec![true; width * height]).expect("non-empty rect")
    }

    pub fn origin(&self) -> (i64, i64) {
        (self.origin_x, self.origin_y)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    /// True iff the rounded point indexes a foreground bit; out-of-extent
    /// points are simply outside.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let xi = x.round() as i64 - self.origin_x;
        let yi = y.round() as i64 - self.origin_y;
        if xi < 0 || yi < 0 || xi >= self.width as i64 || yi >= self.height as i64 {
            return false;
        }
        self.bits[yi as usize * self.width + xi as usize]
    }

    pub fn bit(&self, local_x: usize, local_y: usize) -> bool {
        self.bits[local_y * self.width + local_x]
    }

    pub fn translated(&self, dx: i64, dy: i64) -> Self {
        let mut m = self.clone();
        m.origin_x += dx;
        m.origin_y += dy;
        m
    }

    /// Bounding box of the full mask extent.
    pub fn extent(&self) -> BoundingBox {
        BoundingBox::new(
            self.origin_x as f64,
            self.origin_y as f64,
            self.width as f64,
            self.height as f64,
        )
    }

    pub fn foreground_count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Mean of foreground pixel coordinates, in frame coordinates.
    pub fn centroid(&self) -> (f64, f64) {
        let mut sx = 0.0;
        let mut sy = 0.0;
        let mut n = 0.0;
        for y in 0..self.height {
            for x in 0..self.width {
                if self.bits[y * self.width + x] {
                    sx += (self.origin_x + x as i64) as f64;
                    sy += (self.origin_y + y as i64) as f64;
                    n += 1.0;
                }
            }
        }
        (sx / n, sy / n)
    }
}

/// One detector output: class, box, optional mask and confidence.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub class_id: u32,
    pub bbox: BoundingBox,
    pub mask: Option<InstanceMask>,
    pub confidence: f64,
}

impl Detection {
    pub fn new(
        class_id: u32,
        bbox: BoundingBox,
        mask: Option<InstanceMask>,
        confidence: f64,
    ) -> Result<Self, ModelError> {
        if !(0.0..=1.0).contains(&confidence) {
            return Err(ModelError::BadConfidence(confidence));
        }
        Ok(Self {
            class_id,
            bbox,
            mask,
            confidence,
        })
    }

    /// Checks the mask extent lies within the box expanded by `tol` pixels.
    pub fn mask_within_box(&self, tol: f64) -> bool {
        match &self.mask {
            None => true,
            Some(m) => {
                let e = m.extent();
                e.x >= self.bbox.x - tol
                    && e.y >= self.bbox.y - tol
                    && e.right() <= self.bbox.right() + tol
                    && e.bottom() <= self.bbox.bottom() + tol
            }
        }
    }
}

/// A tracked pixel location bound to a tracklet identity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackPoint {
    pub x: f64,
    pub y: f64,
    pub id: u64,
    pub alive: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrackState {
    Spurious,
    Confident,
    Terminated,
}

impl TrackState {
    /// Monotone lifecycle index: Spurious=0, Confident=1, Terminated=2.
    pub fn index(self) -> u8 {
        match self {
            TrackState::Spurious => 0,
            TrackState::Confident => 1,
            TrackState::Terminated => 2,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Tracklet {
    pub id: u64,
    pub class_id: u32,
    pub bbox: BoundingBox,
    pub points: Vec<TrackPoint>,
    pub confidence: f64,
    pub state: TrackState,
    pub last_redetect_frame: u64,
    pub birth_frame: u64,
    /// Set when all tracking points died; the scheduler then forces the
    /// window under the box to the front of the probe queue.
    pub needs_urgent_redetect: bool,
}

impl Tracklet {
    pub fn is_live(&self) -> bool {
        self.state != TrackState::Terminated
    }

    pub fn alive_points(&self) -> impl Iterator<Item = &TrackPoint> {
        self.points.iter().filter(|p| p.alive)
    }
}

/// Hands out strictly increasing, never-reused tracklet ids.
#[derive(Debug, Clone, Default)]
pub struct IdAllocator {
    next: u64,
}

impl IdAllocator {
    pub fn new() -> Self {
        Self { next: 1 }
    }

    pub fn allocate(&mut self) -> u64 {
        let id = self.next;
        self.next += 1;
        id
    }
}

/// Every tunable of the tracking pipeline in one place so runs and tests can
/// pin them explicitly.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub window_size: usize,
    pub window_overlap_ratio: f64,
    pub points_per_instance: usize,
    pub pyramid_levels: usize,
    pub windows_per_frame: usize,
    pub edge_rate_boost: u64,
    pub instance_rate_boost: u64,
    pub poa_threshold: f64,
    pub iou_gate: f64,
    pub conf_required_per_detection: f64,
    pub conf_validate_threshold: f64,
    pub conf_terminate_threshold: f64,
    pub lk_window_radius: usize,
    pub lk_max_iterations: usize,
    pub lk_epsilon: f64,
    pub harris_k: f64,
    pub mask_containment_fraction: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            window_size: 640,
            window_overlap_ratio: 0.2,
            points_per_instance: 5,
            pyramid_levels: 5,
            windows_per_frame: 1,
            edge_rate_boost: 4,
            instance_rate_boost: 4,
            poa_threshold: 0.6,
            iou_gate: 0.1,
            conf_required_per_detection: 0.3,
            conf_validate_threshold: 0.9,
            conf_terminate_threshold: -0.6,
            lk_window_radius: 10,
            lk_max_iterations: 30,
            lk_epsilon: 0.01,
            harris_k: 0.04,
            mask_containment_fraction: 0.6,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let dom = |ok: bool, msg: &str| {
            if ok {
                Ok(())
            } else {
                Err(ConfigError::OutOfDomain(msg.to_string()))
            }
        };
        dom(self.window_size >= 1, "window_size must be >= 1")?;
        dom(
            (0.0..1.0).contains(&self.window_overlap_ratio),
            "window_overlap_ratio must be in [0,1)",
        )?;
        dom(self.points_per_instance >= 1, "points_per_instance must be >= 1")?;
        dom(self.windows_per_frame >= 1, "windows_per_frame must be >= 1")?;
        dom(self.edge_rate_boost >= 1, "edge_rate_boost must be >= 1")?;
        dom(self.instance_rate_boost >= 1, "instance_rate_boost must be >= 1")?;
        dom(
            (0.0..=1.0).contains(&self.poa_threshold),
            "poa_threshold must be in [0,1]",
        )?;
        dom((0.0..=1.0).contains(&self.iou_gate), "iou_gate must be in [0,1]")?;
        dom(
            self.conf_terminate_threshold < 0.0 && self.conf_validate_threshold > 0.0,
            "require conf_terminate_threshold < 0 < conf_validate_threshold",
        )?;
        dom(
            (0.0..=1.0).contains(&self.mask_containment_fraction),
            "mask_containment_fraction must be in [0,1]",
        )?;
        dom(self.lk_epsilon > 0.0, "lk_epsilon must be positive")?;
        dom(self.lk_max_iterations >= 1, "lk_max_iterations must be >= 1")?;
        Ok(())
    }

    /// Parse a flat `key = value` text (one per line, `#` comments).
    /// Unknown keys are a hard error.
    pub fn parse_str(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        cfg.apply_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply_str(&mut self, text: &str) -> Result<(), ConfigError> {
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let s = raw.split('#').next().unwrap_or("").trim();
            if s.is_empty() {
                continue;
            }
            let (key, value) = s
                .split_once('=')
                .ok_or(ConfigError::BadSyntax { line })?;
            let key = key.trim();
            let value = value.trim();
            self.set_key(key, value)
                .map_err(|msg| match msg {
                    SetKeyError::Unknown => ConfigError::UnknownKey {
                        line,
                        key: key.to_string(),
                    },
                    SetKeyError::Bad(m) => ConfigError::BadValue {
                        line,
                        key: key.to_string(),
                        msg: m,
                    },
                })?;
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse_str(&text)
    }

    fn set_key(&mut self, key: &str, value: &str) -> Result<(), SetKeyError> {
        fn p<T: std::str::FromStr>(v: &str) -> Result<T, SetKeyError>
        where
            T::Err: std::fmt::Display,
        {
            v.parse().map_err(|e: T::Err| SetKeyError::Bad(e.to_string()))
        }
        match key {
            "window_size" => self.window_size = p(value)?,
            "window_overlap_ratio" => self.window_overlap_ratio = p(value)?,
            "points_per_instance" => self.points_per_instance = p(value)?,
            "pyramid_levels" => self.pyramid_levels = p(value)?,
            "windows_per_frame" => self.windows_per_frame = p(value)?,
            "edge_rate_boost" => self.edge_rate_boost = p(value)?,
            "instance_rate_boost" => self.instance_rate_boost = p(value)?,
            "poa_threshold" => self.poa_threshold = p(value)?,
            "iou_gate" => self.iou_gate = p(value)?,
            "conf_required_per_detection" => self.conf_required_per_detection = p(value)?,
            "conf_validate_threshold" => self.conf_validate_threshold = p(value)?,
            "conf_terminate_threshold" => self.conf_terminate_threshold = p(value)?,
            "lk_window_radius" => self.lk_window_radius = p(value)?,
            "lk_max_iterations" => self.lk_max_iterations = p(value)?,
            "lk_epsilon" => self.lk_epsilon = p(value)?,
            "harris_k" => self.harris_k = p(value)?,
            "mask_containment_fraction" => self.mask_containment_fraction = p(value)?,
            _ => return Err(SetKeyError::Unknown),
        }
        Ok(())
    }

    /// Serialize as the same flat `key = value` text accepted by the parser.
    pub fn to_config_text(&self) -> String {
        format!(
            "window_size = {}\n\
             window_overlap_ratio = {}\n\
             points_per_instance = {}\n\
             pyramid_levels = {}\n\
             windows_per_frame = {}\n\
             edge_rate_boost = {}\n\
             instance_rate_boost = {}\n\
             poa_threshold = {}\n\
             iou_gate = {}\n\
             conf_required_per_detection = {}\n\
             conf_validate_threshold = {}\n\
             conf_terminate_threshold = {}\n\
             lk_window_radius = {}\n\
             lk_max_iterations = {}\n\
             lk_epsilon = {}\n\
             harris_k = {}\n\
             mask_containment_fraction = {}\n",
            self.window_size,
            self.window_overlap_ratio,
            self.points_per_instance,
            self.pyramid_levels,
            self.windows_per_frame,
            self.edge_rate_boost,
            self.instance_rate_boost,
            self.poa_threshold,
            self.iou_gate,
            self.conf_required_per_detection,
            self.conf_validate_threshold,
            self.conf_terminate_threshold,
            self.lk_window_radius,
            self.lk_max_iterations,
            self.lk_epsilon,
            self.harris_k,
            self.mask_containment_fraction,
        )
    }
}

enum SetKeyError {
    Unknown,
    Bad(String),
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_center_cases() {
        assert_eq!(BoundingBox::new(0.0, 0.0, 10.0, 10.0).center(), (5.0, 5.0));
        assert_eq!(
            BoundingBox::new(100.0, 50.0, 40.0, 20.0).center(),
            (120.0, 60.0)
        );
        assert_eq!(BoundingBox::new(2.5, 2.5, 5.0, 5.0).center(), (5.0, 5.0));
    }

    #[test]
    fn translate_box_cases() {
        let b = BoundingBox::new(0.0, 0.0, 10.0, 10.0);
        assert_eq!(b.translated(0.0, 0.0), b);
        assert_eq!(
            BoundingBox::new(10.0, 10.0, 5.0, 5.0).translated(-3.0, 4.0),
            BoundingBox::new(7.0, 14.0, 5.0, 5.0)
        );
        assert_eq!(
            BoundingBox::new(0.0, 0.0, 4.0, 4.0).translated(0.5, 0.5),
            BoundingBox::new(0.5, 0.5, 4.0, 4.0)
        );
    }

    #[test]
    fn mask_contains_cases() {
        let full = InstanceMask::full((0, 0), 10, 10);
        assert!(full.contains(5.0, 5.0));
        assert!(!full.contains(-1.0, 5.0));

        // Checkerboard: (x + y) even is foreground.
        let mut bits = vec![false; 4 * 4];
        for y in 0..4 {
            for x in 0..4 {
                bits[y * 4 + x] = (x + y) % 2 == 0;
            }
        }
        let checker = InstanceMask::new((0, 0), 4, 4, bits).unwrap();
        assert!(checker.contains(0.0, 0.0));
        assert!(!checker.contains(0.0, 1.0));
    }

    #[test]
    fn empty_mask_rejected() {
        assert!(InstanceMask::new((0, 0), 3, 3, vec![false; 9]).is_err());
    }

    #[test]
    fn config_defaults_parse_roundtrip() {
        let cfg = PipelineConfig::default();
        let parsed = PipelineConfig::parse_str(&cfg.to_config_text()).unwrap();
        assert_eq!(cfg, parsed);
    }

    #[test]
    fn config_unknown_key_is_hard_error() {
        let err = PipelineConfig::parse_str("wibble = 3\n").unwrap_err();
        assert!(matches!(err, ConfigError::UnknownKey { .. }));
    }

    #[test]
    fn config_comments_and_overrides() {
        let cfg = PipelineConfig::parse_str(
            "# comment\nwindow_size = 320\npoints_per_instance = 7 # trailing\n",
        )
        .unwrap();
        assert_eq!(cfg.window_size, 320);
        assert_eq!(cfg.points_per_instance, 7);
    }

    #[test]
    fn config_domain_checks() {
        assert!(PipelineConfig::parse_str("window_overlap_ratio = 1.0\n").is_err());
        assert!(PipelineConfig::parse_str("conf_terminate_threshold = 0.5\n").is_err());
    }

    #[test]
    fn id_allocator_monotone() {
        let mut alloc = IdAllocator::new();
        let a = alloc.allocate();
        let b = alloc.allocate();
        assert!(b > a);
    }
}
