//! Shi-Tomasi corners inside detector ROIs and pinhole back-projection of the
//! corner pixels using an aligned depth image.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Vec3;

/// Row-major real-valued image.
#[derive(Debug, Clone, PartialEq)]
pub struct Plane {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl Plane {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self { width, height, data: vec![0.0; width * height] }
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }
}

/// Grayscale intensities in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage(Plane);

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::invalid(format!("expected {} intensities, got {}", width * height, data.len())));
        }
        if let Some(v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::invalid(format!("intensity {v} outside [0, 1]")));
        }
        Ok(Self(Plane { width, height, data }))
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let data = (0..height).flat_map(|y| (0..width).map(move |x| (x, y))).map(|(x, y)| f(x, y)).collect();
        Self::new(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.0.width
    }

    pub fn height(&self) -> usize {
        self.0.height
    }

    pub fn plane(&self) -> &Plane {
        &self.0
    }

    /// Loads an 8- or 16-bit PGM, scaling by maxval.
    pub fn load_pgm(path: &Path) -> Result<Self> {
        let pgm = parse_pgm(&std::fs::read(path)?)?;
        let scale = 1.0 / pgm.maxval as f64;
        Self::new(pgm.width, pgm.height, pgm.samples.iter().map(|&v| v as f64 * scale).collect())
    }
}

/// Depths in meters; 0 marks an invalid reading.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthImage(Plane);

impl DepthImage {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::invalid(format!("expected {} depths, got {}", width * height, data.len())));
        }
        if let Some(v) = data.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::invalid(format!("depth {v} is negative or not finite")));
        }
        Ok(Self(Plane { width, height, data }))
    }

    pub fn width(&self) -> usize {
        self.0.width
    }

    pub fn height(&self) -> usize {
        self.0.height
    }

    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.0.at(x, y)
    }

    /// Loads a 16-bit PGM in millimeters.
    pub fn load_pgm(path: &Path) -> Result<Self> {
        let pgm = parse_pgm(&std::fs::read(path)?)?;
        Self::new(pgm.width, pgm.height, pgm.samples.iter().map(|&v| v as f64 / 1000.0).collect())
    }
}

struct Pgm {
    width: usize,
    height: usize,
    maxval: u32,
    samples: Vec<u32>,
}

fn parse_pgm(bytes: &[u8]) -> Result<Pgm> {
    let mut pos = 0;
    let mut token = || -> Result<String> {
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            break;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::parse("truncated PGM header"));
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };
    let magic = token()?;
    let num = |s: String| s.parse::<u32>().map_err(|_| Error::parse(format!("bad PGM number '{s}'")));
    let width = num(token()?)? as usize;
    let height = num(token()?)? as usize;
    let maxval = num(token()?)?;
    if maxval == 0 || maxval > 65535 {
        return Err(Error::parse("PGM maxval must be in 1..=65535"));
    }
    let n = width * height;
    let samples = match magic.as_str() {
        "P2" => (0..n).map(|_| token().and_then(num)).collect::<Result<Vec<_>>>()?,
        "P5" => {
            // Exactly one whitespace byte separates the header from the raster.
            let data = &bytes[(pos + 1).min(bytes.len())..];
            let bpp = if maxval < 256 { 1 } else { 2 };
            if data.len() < n * bpp {
                return Err(Error::parse("truncated PGM raster"));
            }
            if bpp == 1 {
                data[..n].iter().map(|&b| b as u32).collect()
            } else {
                data.chunks_exact(2).take(n).map(|c| u16::from_be_bytes([c[0], c[1]]) as u32).collect()
            }
        }
        other => return Err(Error::parse(format!("unsupported PGM magic '{other}'"))),
    };
    if let Some(v) = samples.iter().find(|&&v| v > maxval) {
        return Err(Error::parse(format!("PGM sample {v} exceeds maxval {maxval}")));
    }
    Ok(Pgm { width, height, maxval, samples })
}

/// Writes a binary PGM. `maxval` above 255 selects 16-bit samples.
pub fn write_pgm(path: &Path, width: usize, height: usize, maxval: u16, samples: &[u16]) -> Result<()> {
    if samples.len() != width * height {
        return Err(Error::invalid("sample count does not match dimensions"));
    }
    let mut out = format!("P5\n{width} {height}\n{maxval}\n").into_bytes();
    for &s in samples {
        if maxval < 256 {
            out.push(s as u8);
        } else {
            out.extend_from_slice(&s.to_be_bytes());
        }
    }
    crate::io::write_file(path, &out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl CameraIntrinsics {
    pub fn validate(&self) -> Result<()> {
        if !(self.fx > 0.0 && self.fy > 0.0) || !self.cx.is_finite() || !self.cy.is_finite() {
            return Err(Error::invalid("focal lengths must be positive"));
        }
        Ok(())
    }

    /// Pixel coordinates of a camera-frame point.
    pub fn project(&self, p: &Vec3) -> (f64, f64) {
        (self.fx * p.x / p.z + self.cx, self.fy * p.y / p.z + self.cy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Roi {
    pub x: usize,
    pub y: usize,
    pub width: usize,
    pub height: usize,
}

impl Roi {
    pub fn full(img: &GrayImage) -> Self {
        Self { x: 0, y: 0, width: img.width(), height: img.height() }
    }

    pub fn validate(&self, width: usize, height: usize) -> Result<()> {
        if self.width == 0 || self.height == 0 || self.x + self.width > width || self.y + self.height > height {
            return Err(Error::invalid(format!("ROI {self:?} outside {width}x{height} image")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default, deny_unknown_fields)]
pub struct CornerParams {
    pub tau: f64,
    pub nms_radius: f64,
    pub max_corners: usize,
    pub window_radius: usize,
}

impl Default for CornerParams {
    fn default() -> Self {
        Self { tau: 0.01, nms_radius: 3.0, max_corners: 600, window_radius: 2 }
    }
}

impl CornerParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0) || self.max_corners == 0 || !(self.nms_radius >= 0.0) {
            return Err(Error::invalid("tau must be positive and maxCorners at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Corner {
    pub x: usize,
    pub y: usize,
    pub score: f64,
}

/// Sobel derivatives scaled by 1/8; the one-pixel border is zero.
pub fn spatial_gradients(img: &GrayImage) -> Result<(Plane, Plane)> {
    let (w, h) = (img.width(), img.height());
    if w < 3 || h < 3 {
        return Err(Error::invalid(format!("image {w}x{h} too small for gradients")));
    }
    let p = img.plane();
    let mut ix = Plane::zeros(w, h);
    let mut iy = Plane::zeros(w, h);
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            let v = |dx: isize, dy: isize| p.at((x as isize + dx) as usize, (y as isize + dy) as usize);
            let gx = (v(1, -1) + 2.0 * v(1, 0) + v(1, 1)) - (v(-1, -1) + 2.0 * v(-1, 0) + v(-1, 1));
            let gy = (v(-1, 1) + 2.0 * v(0, 1) + v(1, 1)) - (v(-1, -1) + 2.0 * v(0, -1) + v(1, -1));
            ix.data[y * w + x] = gx / 8.0;
            iy.data[y * w + x] = gy / 8.0;
        }
    }
    Ok((ix, iy))
}

/// Smaller eigenvalue of `[[a, b], [b, c]]`.
#[inline]
pub fn min_eigenvalue(a: f64, b: f64, c: f64) -> f64 {
    let half_trace = 0.5 * (a + c);
    let half_diff = 0.5 * (a - c);
    half_trace - (half_diff * half_diff + b * b).sqrt()
}

/// Minimum eigenvalue of the structure tensor summed over a (2r+1)² window
/// (clipped at the image border) and divided by the full window area.
pub fn shi_tomasi_scores(ix: &Plane, iy: &Plane, window_radius: usize) -> Plane {
    let (w, h) = (ix.width, ix.height);
    let r = window_radius as isize;
    let area = ((2 * window_radius + 1) * (2 * window_radius + 1)) as f64;
    let mut out = Plane::zeros(w, h);
    out.data.par_chunks_mut(w.max(1)).enumerate().for_each(|(y, row)| {
        for (x, slot) in row.iter_mut().enumerate() {
            let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
            for dy in -r..=r {
                let yy = y as isize + dy;
                if yy < 0 || yy >= h as isize {
                    continue;
                }
                for dx in -r..=r {
                    let xx = x as isize + dx;
                    if xx < 0 || xx >= w as isize {
                        continue;
                    }
                    let (gx, gy) = (ix.at(xx as usize, yy as usize), iy.at(xx as usize, yy as usize));
                    a += gx * gx;
                    b += gx * gy;
                    c += gy * gy;
                }
            }
            *slot = min_eigenvalue(a / area, b / area, c / area).max(0.0);
        }
    });
    out
}

/// Corners inside `roi`: score ≥ τ, no greater score within the NMS radius,
/// best first, at most K. Candidates of equal score within the radius of
/// each other form a plateau, which yields one corner: the member nearest
/// the plateau centroid, ties by (y, x).
pub fn detect_corners(img: &GrayImage, roi: &Roi, params: &CornerParams) -> Result<Vec<Corner>> {
    params.validate()?;
    roi.validate(img.width(), img.height())?;
    let (ix, iy) = spatial_gradients(img)?;
    let scores = shi_tomasi_scores(&ix, &iy, params.window_radius);
    let (w, h) = (img.width() as isize, img.height() as isize);
    let rr = params.nms_radius.floor() as isize;
    let r2 = params.nms_radius * params.nms_radius;
    let neighbors = |x: usize, y: usize| {
        (-rr..=rr)
            .flat_map(move |dy| (-rr..=rr).map(move |dx| (dx, dy)))
            .filter(move |&(dx, dy)| !(dx == 0 && dy == 0) && ((dx * dx + dy * dy) as f64) <= r2)
            .map(move |(dx, dy)| (x as isize + dx, y as isize + dy))
            .filter(move |&(xx, yy)| xx >= 0 && yy >= 0 && xx < w && yy < h)
            .map(|(xx, yy)| (xx as usize, yy as usize))
    };

    let mut candidates = BTreeMap::new();
    for y in roi.y..roi.y + roi.height {
        for x in roi.x..roi.x + roi.width {
            let s = scores.at(x, y);
            if s >= params.tau && neighbors(x, y).all(|(xx, yy)| scores.at(xx, yy) <= s) {
                candidates.insert((y, x), s);
            }
        }
    }

    let mut corners = Vec::new();
    let mut seen = BTreeSet::new();
    for (&(y, x), &s) in &candidates {
        if !seen.insert((y, x)) {
            continue;
        }
        let mut plateau = vec![(y, x)];
        let mut i = 0;
        while i < plateau.len() {
            let (py, px) = plateau[i];
            for (nx, ny) in neighbors(px, py) {
                if candidates.get(&(ny, nx)) == Some(&s) && seen.insert((ny, nx)) {
                    plateau.push((ny, nx));
                }
            }
            i += 1;
        }
        let n = plateau.len() as f64;
        let cy = plateau.iter().map(|p| p.0 as f64).sum::<f64>() / n;
        let cx = plateau.iter().map(|p| p.1 as f64).sum::<f64>() / n;
        let d2 = |p: &(usize, usize)| (p.0 as f64 - cy).powi(2) + (p.1 as f64 - cx).powi(2);
        let &(by, bx) = plateau.iter().min_by(|a, b| d2(a).total_cmp(&d2(b)).then(a.cmp(b))).expect("non-empty");
        corners.push(Corner { x: bx, y: by, score: s });
    }
    corners.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.y.cmp(&b.y)).then(a.x.cmp(&b.x)));
    corners.truncate(params.max_corners);
    Ok(corners)
}

fn median_depth(depth: &DepthImage, x: usize, y: usize) -> Option<f64> {
    let mut vals: Vec<f64> = Vec::with_capacity(9);
    for yy in y.saturating_sub(1)..=(y + 1).min(depth.height() - 1) {
        for xx in x.saturating_sub(1)..=(x + 1).min(depth.width() - 1) {
            let z = depth.at(xx, yy);
            if z > 0.0 {
                vals.push(z);
            }
        }
    }
    if vals.is_empty() {
        return None;
    }
    vals.sort_by(f64::total_cmp);
    let n = vals.len();
    Some(if n % 2 == 1 { vals[n / 2] } else { 0.5 * (vals[n / 2 - 1] + vals[n / 2]) })
}

/// Camera-frame points for `pixels`, using the median of the valid depths in
/// each pixel's 3×3 neighborhood. Pixels without valid depth are dropped.
pub fn backproject(pixels: &[(usize, usize)], depth: &DepthImage, intr: &CameraIntrinsics) -> Result<Vec<Vec3>> {
    intr.validate()?;
    if let Some(p) = pixels.iter().find(|(x, y)| *x >= depth.width() || *y >= depth.height()) {
        return Err(Error::invalid(format!("pixel {p:?} outside depth image")));
    }
    Ok(pixels
        .iter()
        .filter_map(|&(x, y)| {
            let z = median_depth(depth, x, y)?;
            Some(Vec3::new((x as f64 - intr.cx) * z / intr.fx, (y as f64 - intr.cy) * z / intr.fy, z))
        })
        .collect())
}
