//! CPU z-buffer renderer and image-space losses.
//!
//! Renders are flat-shaded grayscale: one fixed directional light plus a
//! small ambient term, background zero. There is no anti-aliasing, so a
//! render is a piecewise-constant function of the parameters.

use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::csg::{tessellate_visible, Aabb, Model};
use crate::error::{invalid, Error, Result};

pub const DEFAULT_SIZE: usize = 256;
pub const DEFAULT_CAMERAS: usize = 5;
pub const DEFAULT_LAMBDA: f64 = 0.001;
pub const DEFAULT_FOV: f64 = 40.0 * PI / 180.0;
/// Camera distance as a multiple of the framed box diagonal.
pub const DISTANCE_FACTOR: f64 = 2.2;
const CYLINDER_SEGMENTS: usize = 32;
const AMBIENT: f64 = 0.15;
const LIGHT: [f64; 3] = [0.32, 0.84, 0.44];

/// Orbit camera around `look_at`. `distance` is in model units.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    pub azimuth: f64,
    pub elevation: f64,
    pub distance: f64,
    pub look_at: [f64; 3],
    pub fov: f64,
}

impl Camera {
    /// Camera framing `bounds` at `DISTANCE_FACTOR` times its diagonal.
    pub fn framing(bounds: &Aabb, azimuth: f64, elevation: f64) -> Self {
        Camera {
            azimuth,
            elevation,
            distance: DISTANCE_FACTOR * bounds.diagonal(),
            look_at: bounds.center(),
            fov: DEFAULT_FOV,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.distance > 0.0) {
            return Err(invalid("camera distance must be positive"));
        }
        if !(self.fov > 0.0 && self.fov < PI) {
            return Err(invalid("camera fov must be in (0, pi)"));
        }
        Ok(())
    }

    pub fn eye(&self) -> [f64; 3] {
        let (se, ce) = self.elevation.sin_cos();
        let (sa, ca) = self.azimuth.sin_cos();
        [
            self.look_at[0] + self.distance * ce * sa,
            self.look_at[1] + self.distance * se,
            self.look_at[2] + self.distance * ce * ca,
        ]
    }

    /// Orthonormal (right, up, forward) basis.
    fn basis(&self) -> ([f64; 3], [f64; 3], [f64; 3]) {
        let eye = self.eye();
        let f = normalize(sub(self.look_at, eye));
        let r = normalize(cross(f, [0.0, 1.0, 0.0]));
        let u = cross(r, f);
        (r, u, f)
    }
}

/// Draws `n` cameras around `frame` with elevation uniform on [10, 40]
/// degrees. Azimuths are stratified: one random rotation plus a jittered
/// slot per camera, so each is still uniform on [0, 2pi) but the views
/// always ring the model.
pub fn sample_cameras(seed: u64, n: usize, frame: &Aabb) -> Result<Vec<Camera>> {
    if n == 0 {
        return Err(invalid("need at least one camera"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lo = 10.0_f64.to_radians();
    let hi = 40.0_f64.to_radians();
    let slot = 2.0 * PI / n as f64;
    let turn = rng.gen_range(0.0..2.0 * PI);
    Ok((0..n)
        .map(|k| {
            let az = (turn + slot * (k as f64 + rng.gen_range(0.0..1.0))).rem_euclid(2.0 * PI);
            let el = rng.gen_range(lo..=hi);
            Camera::framing(frame, az, el)
        })
        .collect())
}

/// Row-major grayscale image with values in [0, 1].
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl Image {
    pub fn zeros(width: usize, height: usize) -> Self {
        Image {
            width,
            height,
            data: vec![0.0; width * height],
        }
    }

    pub fn from_data(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::SizeMismatch(format!(
                "{} values for a {width}x{height} image",
                data.len()
            )));
        }
        if data.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(invalid("image values must lie in [0, 1]"));
        }
        Ok(Image {
            width,
            height,
            data,
        })
    }

    pub fn foreground_pixels(&self) -> usize {
        self.data.iter().filter(|v| **v > 0.0).count()
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        let bytes: Vec<u8> = self
            .data
            .iter()
            .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
            .collect();
        image::GrayImage::from_raw(self.width as u32, self.height as u32, bytes)
            .expect("buffer matches dimensions")
            .save(path)?;
        Ok(())
    }

    pub fn load_png(path: &Path) -> Result<Self> {
        let img = image::open(path)?.to_luma8();
        let (w, h) = img.dimensions();
        let data = img
            .into_raw()
            .into_iter()
            .map(|b| b as f64 / 255.0)
            .collect();
        Ok(Image {
            width: w as usize,
            height: h as usize,
            data,
        })
    }
}

/// A real-valued image plane; unlike [`Image`] values are unbounded.
#[derive(Clone, Debug, PartialEq)]
pub struct Signal {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

/// A camera and the image it should see.
#[derive(Clone, Debug, PartialEq)]
pub struct RenderTarget {
    pub camera: Camera,
    pub image: Image,
}

/// Renders the whole model.
pub fn render(model: &Model, x: &[f64], camera: &Camera, size: usize) -> Result<Image> {
    render_visible(model, x, camera, size, None)
}

/// Renders the model with some primitives hidden.
pub fn render_visible(
    model: &Model,
    x: &[f64],
    camera: &Camera,
    size: usize,
    visible: Option<&[bool]>,
) -> Result<Image> {
    if size < 32 {
        return Err(invalid("render size must be at least 32"));
    }
    camera.validate()?;
    let mesh = tessellate_visible(model, x, CYLINDER_SEGMENTS, visible)?;

    let (right, up, forward) = camera.basis();
    let eye = camera.eye();
    let near = 1e-3 * camera.distance;
    let half = size as f64 * 0.5;
    let focal = half / (0.5 * camera.fov).tan();
    let light = normalize(LIGHT);

    // camera-space position and screen projection per vertex
    let projected: Vec<Option<[f64; 3]>> = mesh
        .positions
        .iter()
        .map(|&p| {
            let v = sub(p, eye);
            let z = dot(v, forward);
            if z < near {
                return None;
            }
            let sx = half + focal * dot(v, right) / z;
            let sy = half - focal * dot(v, up) / z;
            Some([sx, sy, 1.0 / z])
        })
        .collect();

    let mut image = Image::zeros(size, size);
    let mut depth = vec![0.0f64; size * size];
    for tri in &mesh.triangles {
        let idx = tri.map(|i| i as usize);
        let (Some(a), Some(b), Some(c)) = (projected[idx[0]], projected[idx[1]], projected[idx[2]])
        else {
            continue;
        };
        let area = edge(a, b, c);
        if area.abs() < 1e-12 {
            continue;
        }
        let [pa, pb, pc] = idx.map(|i| mesh.positions[i]);
        let mut n = normalize(cross(sub(pb, pa), sub(pc, pa)));
        if dot(n, sub(eye, pa)) < 0.0 {
            n = n.map(|v| -v);
        }
        let shade = AMBIENT + (1.0 - AMBIENT) * dot(n, light).max(0.0);

        let min_x = a[0].min(b[0]).min(c[0]).floor().max(0.0) as usize;
        let max_x = (a[0].max(b[0]).max(c[0]).ceil() as i64).min(size as i64 - 1);
        let min_y = a[1].min(b[1]).min(c[1]).floor().max(0.0) as usize;
        let max_y = (a[1].max(b[1]).max(c[1]).ceil() as i64).min(size as i64 - 1);
        if max_x < 0 || max_y < 0 {
            continue;
        }
        let inv_area = 1.0 / area;
        for py in min_y..=max_y as usize {
            for px in min_x..=max_x as usize {
                let p = [px as f64 + 0.5, py as f64 + 0.5, 0.0];
                let w0 = edge(b, c, p) * inv_area;
                let w1 = edge(c, a, p) * inv_area;
                let w2 = edge(a, b, p) * inv_area;
                if w0 < 0.0 || w1 < 0.0 || w2 < 0.0 {
                    continue;
                }
                let inv_z = w0 * a[2] + w1 * b[2] + w2 * c[2];
                let k = py * size + px;
                if inv_z > depth[k] {
                    depth[k] = inv_z;
                    image.data[k] = shade;
                }
            }
        }
    }
    Ok(image)
}

/// `I - 0.2 * blur(I)` with a 3x3 box blur and clamped edges.
pub fn sharpen(img: &Image) -> Signal {
    sharpen_plane(img.width, img.height, &img.data)
}

fn sharpen_plane(w: usize, h: usize, data: &[f64]) -> Signal {
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut sum = 0.0;
            for dy in -1i64..=1 {
                let yy = (y as i64 + dy).clamp(0, h as i64 - 1) as usize;
                for dx in -1i64..=1 {
                    let xx = (x as i64 + dx).clamp(0, w as i64 - 1) as usize;
                    sum += data[yy * w + xx];
                }
            }
            out[y * w + x] = data[y * w + x] - 0.2 * sum / 9.0;
        }
    }
    Signal {
        width: w,
        height: h,
        data: out,
    }
}

/// Mean per-pixel squared difference.
pub fn mse(a: &Image, b: &Image) -> Result<f64> {
    check_same_size(a, b)?;
    Ok(a.data
        .iter()
        .zip(&b.data)
        .map(|(p, q)| (p - q) * (p - q))
        .sum::<f64>()
        / a.data.len() as f64)
}

/// Mean per-pixel squared difference of the sharpened images.
pub fn sharpened_mse(a: &Image, b: &Image) -> Result<f64> {
    check_same_size(a, b)?;
    // sharpen is linear, so sharpen(a) - sharpen(b) = sharpen(a - b)
    let diff: Vec<f64> = a.data.iter().zip(&b.data).map(|(p, q)| p - q).collect();
    let s = sharpen_plane(a.width, a.height, &diff);
    Ok(s.data.iter().map(|v| v * v).sum::<f64>() / s.data.len() as f64)
}

fn check_same_size(a: &Image, b: &Image) -> Result<()> {
    if a.width != b.width || a.height != b.height {
        return Err(Error::SizeMismatch(format!(
            "{}x{} vs {}x{}",
            a.width, a.height, b.width, b.height
        )));
    }
    Ok(())
}

fn target_size(targets: &[RenderTarget]) -> Result<usize> {
    let first = targets
        .first()
        .ok_or_else(|| invalid("need at least one render target"))?;
    let size = first.image.width;
    for t in targets {
        if t.image.width != t.image.height || t.image.width != size {
            return Err(Error::SizeMismatch(
                "render targets must be square images of one size".into(),
            ));
        }
    }
    Ok(size)
}

/// Sum over targets of the per-pixel mean squared difference of sharpened
/// images. Each image term is normalized by its pixel count.
pub fn image_loss(model: &Model, x: &[f64], targets: &[RenderTarget]) -> Result<f64> {
    let size = target_size(targets)?;
    let mut total = 0.0;
    for t in targets {
        let r = render(model, x, &t.camera, size)?;
        total += sharpened_mse(&r, &t.image)?;
    }
    Ok(total)
}

/// The fitting loss: sharpened image term plus `lambda * |x - x0|^2`.
pub fn pixel_loss(
    model: &Model,
    x: &[f64],
    x0: &[f64],
    targets: &[RenderTarget],
    lambda: f64,
) -> Result<f64> {
    if !(lambda >= 0.0) {
        return Err(invalid("lambda must be non-negative"));
    }
    if x0.len() != x.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: x0.len(),
        });
    }
    let reg: f64 = x.iter().zip(x0).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(image_loss(model, x, targets)? + lambda * reg)
}

/// Renders `x` from every camera, producing fitting targets.
pub fn render_targets(
    model: &Model,
    x: &[f64],
    cameras: &[Camera],
    size: usize,
) -> Result<Vec<RenderTarget>> {
    cameras
        .iter()
        .map(|c| {
            Ok(RenderTarget {
                camera: *c,
                image: render(model, x, c, size)?,
            })
        })
        .collect()
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn normalize(a: [f64; 3]) -> [f64; 3] {
    let n = dot(a, a).sqrt();
    if n == 0.0 {
        a
    } else {
        a.map(|v| v / n)
    }
}

#[inline]
fn edge(a: [f64; 3], b: [f64; 3], p: [f64; 3]) -> f64 {
    (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])
}
