//! Pure image operations: grayscale conversion, binomial image pyramids,
//! Harris corner scoring/selection and pyramidal Lucas-Kanade sparse flow.

use thiserror::Error;

use crate::model::{BoundingBox, ImageBuffer, InstanceMask, PipelineConfig, TrackPoint};

/// Structure-tensor conditioning guard; below this minimum eigenvalue the
/// 2x2 flow system is treated as singular (aperture failure).
const LK_MIN_EIGENVALUE: f64 = 1e-4;

/// Minimum pairwise separation between selected tracking points, pixels.
const POINT_MIN_SEPARATION: f64 = 3.0;

#[derive(Debug, Error)]
pub enum VisionError {
    #[error("expected a {expected}-channel image, got {got}")]
    ChannelMismatch { expected: usize, got: usize },
    #[error("image {width}x{height} too small for {levels} pyramid reductions (min dim {min_dim})")]
    ImageTooSmall {
        width: usize,
        height: usize,
        levels: usize,
        min_dim: usize,
    },
    #[error("region out of image bounds")]
    RegionOutOfBounds,
    #[error("pyramids disagree in level count or base dimensions")]
    PyramidMismatch,
}

/// Luma conversion: round(0.299 R + 0.587 G + 0.114 B). Single-channel
/// input passes through unchanged.
pub fn to_grayscale(img: &ImageBuffer) -> Result<ImageBuffer, VisionError> {
    if img.channels() == 1 {
        return Ok(img.clone());
    }
    if img.channels() != 3 {
        return Err(VisionError::ChannelMismatch {
            expected: 3,
            got: img.channels(),
        });
    }
    let src = img.data();
    let mut data = Vec::with_capacity(img.width() * img.height());
    for px in src.chunks_exact(3) {
        let y = 0.299 * px[0] as f64 + 0.587 * px[1] as f64 + 0.114 * px[2] as f64;
        data.push(y.round() as u8);
    }
    Ok(ImageBuffer::new(img.width(), img.height(), 1, data).expect("same dims"))
}

/// Coarse-to-fine image stack; level 0 is the input, each further level is
/// low-pass filtered with the 5-tap binomial [1,4,6,4,1]/16 and decimated
/// by two with ceil-halved dimensions.
#[derive(Debug, Clone)]
pub struct Pyramid {
    levels: Vec<ImageBuffer>,
}

impl Pyramid {
    /// Build `m` reduction levels. `min_dim` is the smallest side allowed at
    /// the coarsest level (callers pass the LK window diameter).
    pub fn build(img: &ImageBuffer, m: usize, min_dim: usize) -> Result<Self, VisionError> {
        if img.channels() != 1 {
            return Err(VisionError::ChannelMismatch {
                expected: 1,
                got: img.channels(),
            });
        }
        let coarse = img.width().min(img.height()) >> m;
        if coarse < min_dim.max(1) {
            return Err(VisionError::ImageTooSmall {
                width: img.width(),
                height: img.height(),
                levels: m,
                min_dim,
            });
        }
        let mut levels = Vec::with_capacity(m + 1);
        levels.push(img.clone());
        for _ in 0..m {
            let next = downsample(levels.last().unwrap());
            levels.push(next);
        }
        Ok(Self { levels })
    }

    pub fn levels(&self) -> &[ImageBuffer] {
        &self.levels
    }

    pub fn level(&self, l: usize) -> &ImageBuffer {
        &self.levels[l]
    }

    /// Number of reduction levels m (level count is m + 1).
    pub fn reductions(&self) -> usize {
        self.levels.len() - 1
    }
}

/// Binomial smoothing followed by factor-2 decimation; output dims are
/// the ceil-halved input dims.
fn downsample(img: &ImageBuffer) -> ImageBuffer {
    let w = img.width();
    let h = img.height();
    let ow = w.div_ceil(2);
    let oh = h.div_ceil(2);
    const K: [f64; 5] = [1.0 / 16.0, 4.0 / 16.0, 6.0 / 16.0, 4.0 / 16.0, 1.0 / 16.0];

    // Horizontal pass at the decimated columns only.
    let mut tmp = vec![0.0f64; ow * h];
    for y in 0..h {
        for ox in 0..ow {
            let cx = (ox * 2) as i64;
            let mut acc = 0.0;
            for (i, k) in K.iter().enumerate() {
                acc += k * img.get_clamped(cx + i as i64 - 2, y as i64) as f64;
            }
            tmp[y * ow + ox] = acc;
        }
    }
    let clamp_row = |y: i64| y.clamp(0, h as i64 - 1) as usize;
    let mut data = Vec::with_capacity(ow * oh);
    for oy in 0..oh {
        let cy = (oy * 2) as i64;
        for ox in 0..ow {
            let mut acc = 0.0;
            for (i, k) in K.iter().enumerate() {
                acc += k * tmp[clamp_row(cy + i as i64 - 2) * ow + ox];
            }
            data.push(acc.round().clamp(0.0, 255.0) as u8);
        }
    }
    ImageBuffer::new(ow, oh, 1, data).expect("downsample dims")
}

/// Per-pixel Harris corner responses over a rectangular region.
#[derive(Debug, Clone)]
pub struct ScoreMap {
    pub x0: usize,
    pub y0: usize,
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
}

impl ScoreMap {
    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.values[(y - self.y0) * self.width + (x - self.x0)]
    }
}

/// Harris response R = det(M) - k trace(M)^2 with M the 3x3-window-summed
/// structure tensor of Sobel gradients.
pub fn harris_response(
    img: &ImageBuffer,
    region: &BoundingBox,
    k: f64,
) -> Result<ScoreMap, VisionError> {
    if img.channels() != 1 {
        return Err(VisionError::ChannelMismatch {
            expected: 1,
            got: img.channels(),
        });
    }
    let x0 = region.x.round() as i64;
    let y0 = region.y.round() as i64;
    let rw = region.w.round() as i64;
    let rh = region.h.round() as i64;
    if x0 < 0
        || y0 < 0
        || rw < 1
        || rh < 1
        || x0 + rw > img.width() as i64
        || y0 + rh > img.height() as i64
    {
        return Err(VisionError::RegionOutOfBounds);
    }
    let (x0, y0, rw, rh) = (x0 as usize, y0 as usize, rw as usize, rh as usize);

    // Sobel gradients on the region expanded by one pixel (border clamped).
    let gw = rw + 2;
    let gh = rh + 2;
    let mut gx = vec![0.0f64; gw * gh];
    let mut gy = vec![0.0f64; gw * gh];
    let sample = |x: i64, y: i64| img.get_clamped(x, y) as f64;
    for j in 0..gh {
        for i in 0..gw {
            let cx = x0 as i64 + i as i64 - 1;
            let cy = y0 as i64 + j as i64 - 1;
            let p = |dx: i64, dy: i64| sample(cx + dx, cy + dy);
            gx[j * gw + i] = (p(1, -1) + 2.0 * p(1, 0) + p(1, 1))
                - (p(-1, -1) + 2.0 * p(-1, 0) + p(-1, 1));
            gy[j * gw + i] = (p(-1, 1) + 2.0 * p(0, 1) + p(1, 1))
                - (p(-1, -1) + 2.0 * p(0, -1) + p(1, -1));
        }
    }

    let mut values = vec![0.0f64; rw * rh];
    for j in 0..rh {
        for i in 0..rw {
            let mut sxx = 0.0;
            let mut syy = 0.0;
            let mut sxy = 0.0;
            for wj in 0..3 {
                for wi in 0..3 {
                    let ix = gx[(j + wj) * gw + (i + wi)];
                    let iy = gy[(j + wj) * gw + (i + wi)];
                    sxx += ix * ix;
                    syy += iy * iy;
                    sxy += ix * iy;
                }
            }
            let det = sxx * syy - sxy * sxy;
            let tr = sxx + syy;
            values[j * rw + i] = det - k * tr * tr;
        }
    }
    Ok(ScoreMap {
        x0,
        y0,
        width: rw,
        height: rh,
        values,
    })
}

/// Pick up to `n` high-response Harris corners inside the mask, greedy by
/// descending score with a minimum pairwise separation. Degrades to a single
/// point at the mask centroid when the segment is textureless.
pub fn select_track_points(
    img: &ImageBuffer,
    mask: &InstanceMask,
    n: usize,
    id: u64,
    harris_k: f64,
) -> Vec<TrackPoint> {
    let (ox, oy) = mask.origin();
    // Clip the mask extent to the image.
    let x0 = ox.max(0);
    let y0 = oy.max(0);
    let x1 = (ox + mask.width() as i64).min(img.width() as i64);
    let y1 = (oy + mask.height() as i64).min(img.height() as i64);
    let mut candidates: Vec<(f64, i64, i64)> = Vec::new();
    if x1 > x0 && y1 > y0 {
        let region = BoundingBox::new(
            x0 as f64,
            y0 as f64,
            (x1 - x0) as f64,
            (y1 - y0) as f64,
        );
        let scores = harris_response(img, &region, harris_k).expect("clipped region in bounds");
        for y in y0..y1 {
            for x in x0..x1 {
                if mask.contains(x as f64, y as f64) {
                    let s = scores.at(x as usize, y as usize);
                    if s > 0.0 {
                        candidates.push((s, x, y));
                    }
                }
            }
        }
    }
    candidates.sort_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .unwrap()
            .then(a.2.cmp(&b.2))
            .then(a.1.cmp(&b.1))
    });

    let mut points: Vec<TrackPoint> = Vec::new();
    for &(_, x, y) in &candidates {
        if points.len() >= n {
            break;
        }
        let far = points.iter().all(|p| {
            let dx = p.x - x as f64;
            let dy = p.y - y as f64;
            (dx * dx + dy * dy).sqrt() >= POINT_MIN_SEPARATION
        });
        if far {
            points.push(TrackPoint {
                x: x as f64,
                y: y as f64,
                id,
                alive: true,
            });
        }
    }
    if points.is_empty() {
        let (cx, cy) = mask.centroid();
        let (px, py) = if mask.contains(cx, cy) {
            (cx.round(), cy.round())
        } else {
            // Non-convex segment: take the foreground pixel nearest the centroid.
            let mut best = (f64::INFINITY, 0.0, 0.0);
            for y in 0..mask.height() {
                for x in 0..mask.width() {
                    if mask.bit(x, y) {
                        let fx = (ox + x as i64) as f64;
                        let fy = (oy + y as i64) as f64;
                        let d = (fx - cx).powi(2) + (fy - cy).powi(2);
                        if d < best.0 {
                            best = (d, fx, fy);
                        }
                    }
                }
            }
            (best.1, best.2)
        };
        points.push(TrackPoint {
            x: px,
            y: py,
            id,
            alive: true,
        });
    }
    points
}

/// Result of tracking one point from the previous frame into the next.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowResult {
    /// Displacement at level 0 (full resolution), pixels.
    pub displacement: (f64, f64),
    pub converged: bool,
    /// Mean absolute intensity error over the LK window at level 0.
    pub residual: f64,
}

/// Displacement hand-off between two pyramid levels: the accumulated estimate
/// at the coarser level and the initial guess it seeds at the finer level.
#[derive(Debug, Clone, Copy)]
pub struct LevelHandoff {
    pub coarse_level: usize,
    pub before: (f64, f64),
    pub after: (f64, f64),
}

/// Track `points` from `prev` into `next` with iterative coarse-to-fine LK.
pub fn lk_track_points(
    prev: &Pyramid,
    next: &Pyramid,
    points: &[TrackPoint],
    cfg: &PipelineConfig,
) -> Result<Vec<FlowResult>, VisionError> {
    check_pyramids(prev, next)?;
    Ok(points
        .iter()
        .map(|p| lk_solve(prev, next, p.x, p.y, cfg, None))
        .collect())
}

/// Single-point variant that records the displacement hand-off at every
/// level transition.
pub fn lk_track_point_traced(
    prev: &Pyramid,
    next: &Pyramid,
    x: f64,
    y: f64,
    cfg: &PipelineConfig,
) -> Result<(FlowResult, Vec<LevelHandoff>), VisionError> {
    check_pyramids(prev, next)?;
    let mut trace = Vec::new();
    let r = lk_solve(prev, next, x, y, cfg, Some(&mut trace));
    Ok((r, trace))
}

fn check_pyramids(prev: &Pyramid, next: &Pyramid) -> Result<(), VisionError> {
    if prev.reductions() != next.reductions()
        || prev.level(0).width() != next.level(0).width()
        || prev.level(0).height() != next.level(0).height()
    {
        return Err(VisionError::PyramidMismatch);
    }
    Ok(())
}

fn lk_solve(
    prev: &Pyramid,
    next: &Pyramid,
    x: f64,
    y: f64,
    cfg: &PipelineConfig,
    mut trace: Option<&mut Vec<LevelHandoff>>,
) -> FlowResult {
    let m = prev.reductions();
    let r = cfg.lk_window_radius as i64;
    let win = ((2 * r + 1) * (2 * r + 1)) as usize;
    let mut ivals = vec![0.0f64; win];
    let mut ixs = vec![0.0f64; win];
    let mut iys = vec![0.0f64; win];

    let mut guess = (0.0f64, 0.0f64);
    let mut singular = false;

    for level in (0..=m).rev() {
        let scale = (1u64 << level) as f64;
        let px = x / scale;
        let py = y / scale;
        let prev_img = prev.level(level);
        let next_img = next.level(level);

        // Template intensities and spatial gradients from the previous frame.
        let mut gxx = 0.0;
        let mut gyy = 0.0;
        let mut gxy = 0.0;
        let mut idx = 0;
        for dy in -r..=r {
            for dx in -r..=r {
                let sx = px + dx as f64;
                let sy = py + dy as f64;
                ivals[idx] = prev_img.bilinear(sx, sy);
                let ix = (prev_img.bilinear(sx + 1.0, sy) - prev_img.bilinear(sx - 1.0, sy)) / 2.0;
                let iy = (prev_img.bilinear(sx, sy + 1.0) - prev_img.bilinear(sx, sy - 1.0)) / 2.0;
                ixs[idx] = ix;
                iys[idx] = iy;
                gxx += ix * ix;
                gyy += iy * iy;
                gxy += ix * iy;
                idx += 1;
            }
        }
        let tr = gxx + gyy;
        let det = gxx * gyy - gxy * gxy;
        let min_eig = (tr - (tr * tr - 4.0 * det).max(0.0).sqrt()) / 2.0;
        if min_eig < LK_MIN_EIGENVALUE {
            singular = true;
            // Report the best estimate scaled back up to level 0.
            guess = (guess.0 * scale, guess.1 * scale);
            break;
        }

        let mut v = (0.0f64, 0.0f64);
        for _ in 0..cfg.lk_max_iterations {
            let mut bx = 0.0;
            let mut by = 0.0;
            let mut idx = 0;
            for dy in -r..=r {
                for dx in -r..=r {
                    let sx = px + dx as f64 + guess.0 + v.0;
                    let sy = py + dy as f64 + guess.1 + v.1;
                    let di = ivals[idx] - next_img.bilinear(sx, sy);
                    bx += di * ixs[idx];
                    by += di * iys[idx];
                    idx += 1;
                }
            }
            let step_x = (gyy * bx - gxy * by) / det;
            let step_y = (gxx * by - gxy * bx) / det;
            v.0 += step_x;
            v.1 += step_y;
            if (step_x * step_x + step_y * step_y).sqrt() < cfg.lk_epsilon {
                break;
            }
        }
        guess = (guess.0 + v.0, guess.1 + v.1);
        if level > 0 {
            let doubled = (guess.0 * 2.0, guess.1 * 2.0);
            if let Some(t) = trace.as_deref_mut() {
                t.push(LevelHandoff {
                    coarse_level: level,
                    before: guess,
                    after: doubled,
                });
            }
            guess = doubled;
        }
    }

    let fx = x + guess.0;
    let fy = y + guess.1;
    let base = prev.level(0);
    let in_bounds =
        fx >= 0.0 && fy >= 0.0 && fx < base.width() as f64 && fy < base.height() as f64;

    // Residual over the level-0 window at the final displacement.
    let next0 = next.level(0);
    let mut residual = 0.0;
    let mut count = 0.0;
    for dy in -r..=r {
        for dx in -r..=r {
            let sx = x + dx as f64;
            let sy = y + dy as f64;
            residual += (base.bilinear(sx, sy) - next0.bilinear(sx + guess.0, sy + guess.1)).abs();
            count += 1.0;
        }
    }
    residual /= count;

    FlowResult {
        displacement: guess,
        converged: !singular && in_bounds,
        residual,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    fn noise_image(w: usize, h: usize, seed: u64) -> ImageBuffer {
        // Smooth value noise so LK has gradient structure.
        crate::synth::value_noise_image(w, h, seed, 5, 0, 0)
    }

    #[test]
    fn grayscale_formula() {
        let white = ImageBuffer::filled(4, 4, 3, 255);
        let g = to_grayscale(&white).unwrap();
        assert!(g.data().iter().all(|&v| v == 255));

        let red = ImageBuffer::new(1, 1, 3, vec![255, 0, 0]).unwrap();
        assert_eq!(to_grayscale(&red).unwrap().get(0, 0, 0), 76);
        let blue = ImageBuffer::new(1, 1, 3, vec![0, 0, 255]).unwrap();
        assert_eq!(to_grayscale(&blue).unwrap().get(0, 0, 0), 29);
    }

    #[test]
    fn grayscale_passes_luma_through() {
        let luma = ImageBuffer::filled(4, 4, 1, 10);
        assert_eq!(to_grayscale(&luma).unwrap(), luma);
    }

    #[test]
    fn pyramid_dims_4k() {
        let img = ImageBuffer::filled(3840, 2160, 1, 128);
        let p = Pyramid::build(&img, 5, 21).unwrap();
        assert_eq!(p.levels().len(), 6);
        assert_eq!(p.level(5).width(), 120);
        assert_eq!(p.level(5).height(), 68);
    }

    #[test]
    fn pyramid_constant_image() {
        let img = ImageBuffer::filled(64, 48, 1, 77);
        let p = Pyramid::build(&img, 3, 1).unwrap();
        for level in p.levels() {
            assert!(level.data().iter().all(|&v| v == 77));
        }
    }

    #[test]
    fn pyramid_zero_levels() {
        let img = ImageBuffer::filled(10, 10, 1, 3);
        let p = Pyramid::build(&img, 0, 1).unwrap();
        assert_eq!(p.levels().len(), 1);
        assert_eq!(p.level(0), &img);
    }

    #[test]
    fn pyramid_too_small() {
        let img = ImageBuffer::filled(64, 64, 1, 0);
        assert!(Pyramid::build(&img, 5, 21).is_err());
    }

    #[test]
    fn harris_constant_is_zero() {
        let img = ImageBuffer::filled(16, 16, 1, 100);
        let region = BoundingBox::new(0.0, 0.0, 16.0, 16.0);
        let map = harris_response(&img, &region, 0.04).unwrap();
        assert!(map.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn harris_single_bright_pixel_positive() {
        let mut img = ImageBuffer::filled(11, 11, 1, 0);
        img.set(5, 5, 0, 255);
        let region = BoundingBox::new(3.0, 3.0, 5.0, 5.0);
        let map = harris_response(&img, &region, 0.04).unwrap();
        let best = map
            .values
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(best > 0.0, "max response {best}");
    }

    #[test]
    fn harris_step_edge_nonpositive() {
        // Vertical step edge: one gradient direction only, so along the edge
        // interior (away from image corners) the response is <= 0.
        let mut img = ImageBuffer::filled(20, 20, 1, 0);
        for y in 0..20 {
            for x in 10..20 {
                img.set(x, y, 0, 200);
            }
        }
        let region = BoundingBox::new(8.0, 5.0, 4.0, 10.0);
        let map = harris_response(&img, &region, 0.04).unwrap();
        for &v in &map.values {
            assert!(v <= 1e-9, "edge response {v}");
        }
    }

    #[test]
    fn harris_region_out_of_bounds() {
        let img = ImageBuffer::filled(8, 8, 1, 0);
        let region = BoundingBox::new(4.0, 4.0, 8.0, 8.0);
        assert!(harris_response(&img, &region, 0.04).is_err());
    }

    #[test]
    fn select_points_constant_region_degrades_to_centroid() {
        let img = ImageBuffer::filled(32, 32, 1, 50);
        let mask = InstanceMask::full((8, 8), 10, 10);
        let pts = select_track_points(&img, &mask, 5, 7, 0.04);
        assert_eq!(pts.len(), 1);
        assert!(mask.contains(pts[0].x, pts[0].y));
        assert_eq!(pts[0].id, 7);
        // Full-rect mask centroid is its middle.
        assert_eq!((pts[0].x, pts[0].y), (13.0, 13.0));
    }

    #[test]
    fn select_points_checkerboard() {
        let mut img = ImageBuffer::filled(40, 40, 1, 0);
        for y in 0..40 {
            for x in 0..40 {
                if (x / 4 + y / 4) % 2 == 0 {
                    img.set(x, y, 0, 255);
                }
            }
        }
        let mask = InstanceMask::full((4, 4), 30, 30);
        let pts = select_track_points(&img, &mask, 5, 1, 0.04);
        assert_eq!(pts.len(), 5);
        for (i, a) in pts.iter().enumerate() {
            assert!(mask.contains(a.x, a.y));
            for b in &pts[i + 1..] {
                let d = ((a.x - b.x).powi(2) + (a.y - b.y).powi(2)).sqrt();
                assert!(d >= 3.0, "separation {d}");
            }
        }
    }

    #[test]
    fn select_points_n1_is_argmax() {
        let img = noise_image(64, 64, 3);
        let mask = InstanceMask::full((10, 10), 30, 30);
        let pts = select_track_points(&img, &mask, 1, 2, 0.04);
        assert_eq!(pts.len(), 1);
        let region = BoundingBox::new(10.0, 10.0, 30.0, 30.0);
        let map = harris_response(&img, &region, 0.04).unwrap();
        let best = map
            .values
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(map.at(pts[0].x as usize, pts[0].y as usize), best);
    }

    #[test]
    fn lk_zero_motion() {
        let img = noise_image(128, 128, 11);
        let cfg = PipelineConfig {
            pyramid_levels: 2,
            ..PipelineConfig::default()
        };
        let p = Pyramid::build(&img, 2, 21).unwrap();
        let pts = vec![TrackPoint {
            x: 64.0,
            y: 64.0,
            id: 0,
            alive: true,
        }];
        let flows = lk_track_points(&p, &p, &pts, &cfg).unwrap();
        assert!(flows[0].converged);
        assert!(flows[0].displacement.0.abs() < 0.05);
        assert!(flows[0].displacement.1.abs() < 0.05);
        assert!(flows[0].residual < 1.0);
    }

    #[test]
    fn lk_flat_region_fails() {
        let img = ImageBuffer::filled(128, 128, 1, 100);
        let cfg = PipelineConfig::default();
        let p = Pyramid::build(&img, 2, 21).unwrap();
        let pts = vec![TrackPoint {
            x: 64.0,
            y: 64.0,
            id: 0,
            alive: true,
        }];
        let flows = lk_track_points(&p, &p, &pts, &cfg).unwrap();
        assert!(!flows[0].converged);
    }

    #[test]
    fn lk_integer_shift_recovery() {
        let w = 160;
        let h = 160;
        let big = noise_image(w + 16, h + 16, 21);
        // prev = crop at (8,8); next = crop at (5,6) so content moved by (3,2).
        let prev_img = big.crop(8, 8, w, h);
        let next_img = big.crop(5, 6, w, h);
        let cfg = PipelineConfig {
            pyramid_levels: 2,
            ..PipelineConfig::default()
        };
        let prev = Pyramid::build(&prev_img, 2, 21).unwrap();
        let next = Pyramid::build(&next_img, 2, 21).unwrap();
        let mut rng = SplitMix64::new(4);
        for _ in 0..20 {
            let x = 40.0 + rng.next_f64() * 80.0;
            let y = 40.0 + rng.next_f64() * 80.0;
            let pts = vec![TrackPoint {
                x,
                y,
                id: 0,
                alive: true,
            }];
            let f = lk_track_points(&prev, &next, &pts, &cfg).unwrap()[0];
            assert!(f.converged);
            assert!(
                (f.displacement.0 - 3.0).abs() < 0.25 && (f.displacement.1 - 2.0).abs() < 0.25,
                "recovered {:?}",
                f.displacement
            );
        }
    }

    #[test]
    fn lk_pyramid_mismatch() {
        let a = Pyramid::build(&ImageBuffer::filled(64, 64, 1, 1), 1, 1).unwrap();
        let b = Pyramid::build(&ImageBuffer::filled(32, 64, 1, 1), 1, 1).unwrap();
        assert!(lk_track_points(&a, &b, &[], &PipelineConfig::default()).is_err());
    }
}
