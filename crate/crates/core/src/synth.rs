//! Deterministic synthetic sequences: textured moving objects over a dim
//! background, with exact ground-truth boxes and masks.

use std::path::Path;

use thiserror::Error;

use crate::detector::{GroundTruthStore, GtInstance};
use crate::model::{BoundingBox, ImageBuffer, InstanceMask};
use crate::mot;
use crate::rng::SplitMix64;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: bad PPM: {msg}")]
    BadPpm { path: String, msg: String },
    #[error("bad scene spec: {0}")]
    BadSpec(String),
    #[error(transparent)]
    Mot(#[from] mot::MotError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> SynthError + '_ {
    move |source| SynthError::Io {
        path: path.display().to_string(),
        source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TextureKind {
    Noise,
    Checker,
    Stripes,
}

impl TextureKind {
    pub fn parse(s: &str) -> Result<Self, SynthError> {
        match s {
            "noise" => Ok(TextureKind::Noise),
            "checker" => Ok(TextureKind::Checker),
            "stripes" => Ok(TextureKind::Stripes),
            other => Err(SynthError::BadSpec(format!("unknown texture '{other}'"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ObjectSpec {
    pub class_id: u32,
    pub size: (f64, f64),
    pub start: (f64, f64),
    pub velocity: (f64, f64),
    pub texture: TextureKind,
    /// Last frame index (inclusive) at which the object exists; None = whole
    /// sequence. Used to exercise disappearance handling.
    pub visible_until: Option<u64>,
}

#[derive(Debug, Clone)]
pub struct SceneSpec {
    pub width: usize,
    pub height: usize,
    pub frames: usize,
    pub seed: u64,
    pub objects: Vec<ObjectSpec>,
    pub background: TextureKind,
    pub camera_drift: (f64, f64),
}

impl SceneSpec {
    /// Flat `key = value` scene description; `object = class,w,h,x,y,vx,vy,texture[,until]`
    /// may repeat.
    pub fn parse_str(text: &str) -> Result<Self, SynthError> {
        let mut spec = SceneSpec {
            width: 640,
            height: 480,
            frames: 30,
            seed: 1,
            objects: Vec::new(),
            background: TextureKind::Noise,
            camera_drift: (0.0, 0.0),
        };
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let s = raw.split('#').next().unwrap_or("").trim();
            if s.is_empty() {
                continue;
            }
            let (key, value) = s
                .split_once('=')
                .ok_or_else(|| SynthError::BadSpec(format!("line {line}: expected key = value")))?;
            let key = key.trim();
            let value = value.trim();
            let bad = |msg: &str| SynthError::BadSpec(format!("line {line}: {msg}"));
            match key {
                "width" => spec.width = value.parse().map_err(|_| bad("bad width"))?,
                "height" => spec.height = value.parse().map_err(|_| bad("bad height"))?,
                "frames" => spec.frames = value.parse().map_err(|_| bad("bad frames"))?,
                "seed" => spec.seed = value.parse().map_err(|_| bad("bad seed"))?,
                "background" => spec.background = TextureKind::parse(value)?,
                "drift" => {
                    let (dx, dy) = value
                        .split_once(',')
                        .ok_or_else(|| bad("drift needs dx,dy"))?;
                    spec.camera_drift = (
                        dx.trim().parse().map_err(|_| bad("bad drift dx"))?,
                        dy.trim().parse().map_err(|_| bad("bad drift dy"))?,
                    );
                }
                "object" => spec.objects.push(parse_object(value, line)?),
                other => return Err(bad(&format!("unknown key '{other}'"))),
            }
        }
        if spec.frames == 0 || spec.width == 0 || spec.height == 0 {
            return Err(SynthError::BadSpec("dims and frame count must be positive".into()));
        }
        Ok(spec)
    }
}

fn parse_object(value: &str, line: usize) -> Result<ObjectSpec, SynthError> {
    let bad = |msg: &str| SynthError::BadSpec(format!("line {line}: {msg}"));
    let parts: Vec<&str> = value.split(',').map(str::trim).collect();
    if parts.len() < 8 {
        return Err(bad("object needs class,w,h,x,y,vx,vy,texture[,until]"));
    }
    let p = |i: usize, name: &str| -> Result<f64, SynthError> {
        parts[i].parse().map_err(|_| bad(&format!("bad {name}")))
    };
    Ok(ObjectSpec {
        class_id: parts[0].parse().map_err(|_| bad("bad class"))?,
        size: (p(1, "w")?, p(2, "h")?),
        start: (p(3, "x")?, p(4, "y")?),
        velocity: (p(5, "vx")?, p(6, "vy")?),
        texture: TextureKind::parse(parts[7])?,
        visible_until: if parts.len() > 8 {
            Some(parts[8].parse().map_err(|_| bad("bad until"))?)
        } else {
            None
        },
    })
}

fn lattice(seed: u64, xi: i64, yi: i64) -> f64 {
    SplitMix64::keyed(seed, xi as u64, yi as u64).next_f64()
}

fn smoothstep(t: f64) -> f64 {
    t * t * (3.0 - 2.0 * t)
}

/// Smooth value noise in [0,1]: lattice randoms every `scale` pixels,
/// smoothstep-interpolated, two octaves.
pub fn value_noise(seed: u64, x: f64, y: f64, scale: f64) -> f64 {
    let octave = |seed: u64, s: f64| -> f64 {
        let gx = x / s;
        let gy = y / s;
        let x0 = gx.floor() as i64;
        let y0 = gy.floor() as i64;
        let fx = smoothstep(gx - x0 as f64);
        let fy = smoothstep(gy - y0 as f64);
        let v00 = lattice(seed, x0, y0);
        let v10 = lattice(seed, x0 + 1, y0);
        let v01 = lattice(seed, x0, y0 + 1);
        let v11 = lattice(seed, x0 + 1, y0 + 1);
        v00 * (1.0 - fx) * (1.0 - fy)
            + v10 * fx * (1.0 - fy)
            + v01 * (1.0 - fx) * fy
            + v11 * fx * fy
    };
    0.65 * octave(seed, scale) + 0.35 * octave(seed ^ 0x5bd1e995, scale / 2.0)
}

/// Full-frame smooth noise image, handy as LK test texture.
pub fn value_noise_image(
    w: usize,
    h: usize,
    seed: u64,
    scale: usize,
    offset_x: i64,
    offset_y: i64,
) -> ImageBuffer {
    let mut data = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let v = value_noise(
                seed,
                (x as i64 + offset_x) as f64,
                (y as i64 + offset_y) as f64,
                scale as f64,
            );
            data.push((v * 255.0).round() as u8);
        }
    }
    ImageBuffer::new(w, h, 1, data).expect("noise dims")
}

fn texture_value(kind: TextureKind, seed: u64, x: f64, y: f64) -> f64 {
    match kind {
        TextureKind::Noise => value_noise(seed, x, y, 6.0),
        TextureKind::Checker => {
            let c = ((x / 8.0).floor() as i64 + (y / 8.0).floor() as i64) % 2;
            if c == 0 {
                0.9
            } else {
                0.15
            }
        }
        TextureKind::Stripes => {
            if ((x / 6.0).floor() as i64) % 2 == 0 {
                0.85
            } else {
                0.2
            }
        }
    }
}

/// Integer-rounded screen rectangle of an object at frame `t`.
fn object_rect(spec: &SceneSpec, obj: &ObjectSpec, t: u64) -> (i64, i64, i64, i64) {
    let x = obj.start.0 + (obj.velocity.0 + spec.camera_drift.0) * t as f64;
    let y = obj.start.1 + (obj.velocity.1 + spec.camera_drift.1) * t as f64;
    (
        x.round() as i64,
        y.round() as i64,
        obj.size.0.round() as i64,
        obj.size.1.round() as i64,
    )
}

fn render_background(spec: &SceneSpec, bg_dx: i64, bg_dy: i64) -> ImageBuffer {
    let w = spec.width;
    let h = spec.height;
    let mut img = ImageBuffer::filled(w, h, 1, 0);
    for y in 0..h {
        for x in 0..w {
            let v = texture_value(
                spec.background,
                spec.seed,
                (x as i64 - bg_dx) as f64,
                (y as i64 - bg_dy) as f64,
            );
            img.set(x, y, 0, (v * 60.0).round() as u8);
        }
    }
    img
}

fn background_offset(spec: &SceneSpec, t: u64) -> (i64, i64) {
    (
        (spec.camera_drift.0 * t as f64).round() as i64,
        (spec.camera_drift.1 * t as f64).round() as i64,
    )
}

/// Render one frame (single-channel luma) and its ground truth. Objects
/// whose rectangle is not fully inside the frame stop emitting GT rows.
pub fn render_frame(spec: &SceneSpec, t: u64) -> (ImageBuffer, Vec<GtInstance>) {
    let (bg_dx, bg_dy) = background_offset(spec, t);
    render_frame_over(spec, t, render_background(spec, bg_dx, bg_dy))
}

fn render_frame_over(
    spec: &SceneSpec,
    t: u64,
    background: ImageBuffer,
) -> (ImageBuffer, Vec<GtInstance>) {
    let w = spec.width;
    let h = spec.height;
    let mut img = background;
    let mut gt = Vec::new();
    for (i, obj) in spec.objects.iter().enumerate() {
        if obj.visible_until.map(|u| t > u).unwrap_or(false) {
            continue;
        }
        let (ox, oy, ow, oh) = object_rect(spec, obj, t);
        if ow < 1 || oh < 1 {
            continue;
        }
        let obj_seed = spec.seed ^ (i as u64 + 1).wrapping_mul(0x9e3779b97f4a7c15);
        // Texture in object-local coordinates so it translates with the object.
        for py in oy.max(0)..(oy + oh).min(h as i64) {
            for px in ox.max(0)..(ox + ow).min(w as i64) {
                let v = texture_value(
                    obj.texture,
                    obj_seed,
                    (px - ox) as f64,
                    (py - oy) as f64,
                );
                img.set(px as usize, py as usize, 0, (60.0 + v * 195.0).round() as u8);
            }
        }
        let fully_inside = ox >= 0 && oy >= 0 && ox + ow <= w as i64 && oy + oh <= h as i64;
        if fully_inside {
            gt.push(GtInstance {
                id: i as u64 + 1,
                class_id: obj.class_id,
                bbox: BoundingBox::new(ox as f64, oy as f64, ow as f64, oh as f64),
                mask: Some(InstanceMask::full((ox, oy), ow as usize, oh as usize)),
            });
        }
    }
    (img, gt)
}

/// Render the whole sequence with its ground-truth store (one entry per
/// frame, possibly empty).
pub fn render_sequence(spec: &SceneSpec) -> (Vec<ImageBuffer>, GroundTruthStore) {
    let mut frames = Vec::with_capacity(spec.frames);
    let mut gt_frames = Vec::with_capacity(spec.frames);
    // The expensive background only changes with the integer drift offset,
    // so reuse it across frames (always, for a static camera).
    let mut cache: std::collections::HashMap<(i64, i64), ImageBuffer> =
        std::collections::HashMap::new();
    for t in 0..spec.frames as u64 {
        let off = background_offset(spec, t);
        let bg = cache
            .entry(off)
            .or_insert_with(|| render_background(spec, off.0, off.1))
            .clone();
        let (img, gt) = render_frame_over(spec, t, bg);
        frames.push(img);
        gt_frames.push(gt);
    }
    (frames, GroundTruthStore::new(gt_frames))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Manifest {
    pub width: usize,
    pub height: usize,
    pub frames: usize,
    pub seed: u64,
}

impl Manifest {
    pub fn to_text(&self) -> String {
        format!(
            "width = {}\nheight = {}\nframes = {}\nseed = {}\n",
            self.width, self.height, self.frames, self.seed
        )
    }
}

/// Write frames as 1-based zero-padded binary PPM plus `gt.txt`, the mask
/// sidecar and `manifest.txt`.
pub fn write_sequence(
    frames: &[ImageBuffer],
    gt: &GroundTruthStore,
    dir: &Path,
    seed: u64,
) -> Result<Manifest, SynthError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    for (i, frame) in frames.iter().enumerate() {
        let path = dir.join(format!("{:06}.ppm", i + 1));
        write_ppm(frame, &path)?;
    }
    mot::write_ground_truth(gt, &dir.join("gt.txt"))?;
    let manifest = Manifest {
        width: frames.first().map(|f| f.width()).unwrap_or(0),
        height: frames.first().map(|f| f.height()).unwrap_or(0),
        frames: frames.len(),
        seed,
    };
    let mpath = dir.join("manifest.txt");
    std::fs::write(&mpath, manifest.to_text()).map_err(io_err(&mpath))?;
    Ok(manifest)
}

/// Binary PPM (P6); luma images are replicated across RGB.
pub fn write_ppm(img: &ImageBuffer, path: &Path) -> Result<(), SynthError> {
    let mut bytes = format!("P6\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    match img.channels() {
        3 => bytes.extend_from_slice(img.data()),
        _ => {
            for &v in img.data() {
                bytes.extend_from_slice(&[v, v, v]);
            }
        }
    }
    std::fs::write(path, bytes).map_err(io_err(path))
}

pub fn read_ppm(path: &Path) -> Result<ImageBuffer, SynthError> {
    let bytes = std::fs::read(path).map_err(io_err(path))?;
    let bad = |msg: &str| SynthError::BadPpm {
        path: path.display().to_string(),
        msg: msg.to_string(),
    };
    // Header: "P6" then three whitespace-separated integers, then one
    // whitespace byte before the payload.
    let mut pos = 0usize;
    let mut token = |bytes: &[u8]| -> Option<(usize, usize)> {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        (start < pos).then_some((start, pos))
    };
    let (s, e) = token(&bytes).ok_or_else(|| bad("missing magic"))?;
    if &bytes[s..e] != b"P6" {
        return Err(bad("not a P6 file"));
    }
    let mut num = |bytes: &[u8]| -> Result<usize, SynthError> {
        let (s, e) = token(bytes).ok_or_else(|| bad("truncated header"))?;
        std::str::from_utf8(&bytes[s..e])
            .ok()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| bad("bad header number"))
    };
    let w = num(&bytes)?;
    let h = num(&bytes)?;
    let maxval = num(&bytes)?;
    if maxval != 255 {
        return Err(bad("only maxval 255 supported"));
    }
    pos += 1; // single whitespace after maxval
    let need = w * h * 3;
    if bytes.len() < pos + need {
        return Err(bad("truncated pixel data"));
    }
    ImageBuffer::new(w, h, 3, bytes[pos..pos + need].to_vec())
        .map_err(|e| bad(&e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn simple_spec() -> SceneSpec {
        SceneSpec {
            width: 64,
            height: 64,
            frames: 10,
            seed: 5,
            objects: vec![ObjectSpec {
                class_id: 0,
                size: (16.0, 16.0),
                start: (10.0, 10.0),
                velocity: (0.0, 0.0),
                texture: TextureKind::Noise,
                visible_until: None,
            }],
            background: TextureKind::Noise,
            camera_drift: (0.0, 0.0),
        }
    }

    #[test]
    fn static_object_identical_frames() {
        let (frames, gt) = render_sequence(&simple_spec());
        assert_eq!(frames.len(), 10);
        for f in &frames[1..] {
            assert_eq!(f, &frames[0]);
        }
        for g in &gt.frames {
            assert_eq!(g.len(), 1);
            assert_eq!(g[0].bbox, gt.frames[0][0].bbox);
        }
    }

    #[test]
    fn exit_frame_stops_gt() {
        let mut spec = simple_spec();
        spec.objects[0].start = (0.0, 10.0);
        spec.objects[0].velocity = (8.0, 0.0);
        let (_, gt) = render_sequence(&spec);
        // x(t) = 8t, width 16, frame 64: fully inside while 8t+16 <= 64, t <= 6.
        for t in 0..=6 {
            assert_eq!(gt.frames[t].len(), 1, "frame {t}");
        }
        for t in 7..10 {
            assert_eq!(gt.frames[t].len(), 0, "frame {t}");
        }
    }

    #[test]
    fn rendering_is_deterministic() {
        let (a, _) = render_sequence(&simple_spec());
        let (b, _) = render_sequence(&simple_spec());
        assert_eq!(a, b);
    }

    #[test]
    fn gt_mask_extent_equals_box() {
        let (_, gt) = render_sequence(&simple_spec());
        for frame in &gt.frames {
            for inst in frame {
                let m = inst.mask.as_ref().unwrap();
                assert_eq!(m.extent(), inst.bbox);
            }
        }
    }

    #[test]
    fn write_and_reload_sequence() {
        let dir = tempfile::tempdir().unwrap();
        let spec = SceneSpec {
            frames: 3,
            ..simple_spec()
        };
        let (frames, gt) = render_sequence(&spec);
        let manifest = write_sequence(&frames, &gt, dir.path(), spec.seed).unwrap();
        assert_eq!(manifest.frames, 3);
        for i in 1..=3 {
            let img = read_ppm(&dir.path().join(format!("{i:06}.ppm"))).unwrap();
            assert_eq!(img.width(), 64);
            assert_eq!(img.channels(), 3);
            // Luma replication round-trips exactly.
            let orig = &frames[i - 1];
            for (p, chunk) in orig.data().iter().zip(img.data().chunks_exact(3)) {
                assert_eq!(chunk, [*p, *p, *p]);
            }
        }
        assert!(dir.path().join("gt.txt").is_file());
        assert!(dir.path().join("manifest.txt").is_file());
    }

    #[test]
    fn unwritable_dir_names_path() {
        let spec = SceneSpec {
            frames: 1,
            ..simple_spec()
        };
        let (frames, gt) = render_sequence(&spec);
        let err = write_sequence(&frames, &gt, Path::new("/proc/definitely/not/writable"), 1)
            .unwrap_err();
        assert!(err.to_string().contains("/proc/definitely/not/writable"));
    }

    #[test]
    fn scene_spec_parse() {
        let spec = SceneSpec::parse_str(
            "width = 320\nheight = 200\nframes = 12\nseed = 9\nbackground = checker\n\
             drift = 0.5, -0.25\nobject = 1, 20, 10, 5, 5, 2, 0, stripes, 8\n",
        )
        .unwrap();
        assert_eq!(spec.width, 320);
        assert_eq!(spec.objects.len(), 1);
        assert_eq!(spec.objects[0].visible_until, Some(8));
        assert!(SceneSpec::parse_str("bogus = 1\n").is_err());
    }
}
