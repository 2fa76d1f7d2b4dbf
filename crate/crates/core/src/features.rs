//! Fixed-length superpixel descriptor.
//!
//! Layout (version 1, D = 31):
//!
//! | group    | len | contents                                                        |
//! |----------|-----|-----------------------------------------------------------------|
//! | shape    | 4   | area / image area, perimeter / area, bbox fill, bbox w / (w+h)   |
//! | location | 4   | centroid x, centroid y, top y, bottom y (normalized to [0, 1])   |
//! | color    | 14  | mean RGB, std RGB (both / 255), 8-bin hue histogram             |
//! | texture  | 9   | 8-bin Sobel orientation histogram (magnitude weighted), mean mag |
//!
//! Histograms are L1-normalized, or all zero when nothing contributes
//! (achromatic pixels for hue, flat regions for gradients). Downstream
//! modules treat the width as opaque.

use std::f64::consts::PI;

use sha2::{Digest, Sha256};

use crate::codec::{Reader, Writer};
use crate::corpus::ImageRaster;
use crate::segment::Segmentation;
use crate::{Error, Result};

pub const FEATURE_SPEC_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureGroup {
    pub name: &'static str,
    pub offset: usize,
    pub len: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureSpec {
    pub version: u32,
    pub groups: Vec<FeatureGroup>,
}

impl FeatureSpec {
    pub fn dim(&self) -> usize {
        self.groups.iter().map(|g| g.len).sum()
    }

    pub fn group(&self, name: &str) -> Option<&FeatureGroup> {
        self.groups.iter().find(|g| g.name == name)
    }

    /// Stable 64-bit fingerprint of the layout, stored in persisted models.
    pub fn hash(&self) -> u64 {
        let mut h = Sha256::new();
        h.update(format!("sceneparse-features/v{}", self.version));
        for g in &self.groups {
            h.update(format!(";{}:{}:{}", g.name, g.offset, g.len));
        }
        u64::from_le_bytes(h.finalize()[..8].try_into().unwrap())
    }
}

pub fn feature_spec() -> FeatureSpec {
    let mut offset = 0;
    let groups = [("shape", 4), ("location", 4), ("color", 14), ("texture", 9)]
        .into_iter()
        .map(|(name, len)| {
            let g = FeatureGroup { name, offset, len };
            offset += len;
            g
        })
        .collect();
    FeatureSpec {
        version: FEATURE_SPEC_VERSION,
        groups,
    }
}

/// Row-major `rows x cols` matrix of descriptors, one row per superpixel.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows * cols != data.len() {
            return Err(Error::DimensionMismatch {
                what: "feature matrix".into(),
                expected: (rows, cols),
                found: (data.len(), 1),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite feature value".into()));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn empty(cols: usize) -> Self {
        Self {
            rows: 0,
            cols,
            data: Vec::new(),
        }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn push_row(&mut self, row: &[f64]) {
        assert_eq!(row.len(), self.cols);
        self.data.extend_from_slice(row);
        self.rows += 1;
    }

    /// Stacks matrices of equal width.
    pub fn concat<'a>(cols: usize, parts: impl IntoIterator<Item = &'a FeatureMatrix>) -> Self {
        let mut out = Self::empty(cols);
        for p in parts {
            assert_eq!(p.cols, cols);
            out.data.extend_from_slice(&p.data);
            out.rows += p.rows;
        }
        out
    }

    /// `PRSF` dump: magic, version, N, D, row-major little-endian f64.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.bytes(b"PRSF");
        w.u32(FEATURE_SPEC_VERSION);
        w.u64(self.rows as u64);
        w.u64(self.cols as u64);
        for &v in &self.data {
            w.f64(v);
        }
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes, "feature dump");
        r.magic(b"PRSF")?;
        let version = r.u32()?;
        if version != FEATURE_SPEC_VERSION {
            return Err(Error::Version {
                what: "feature dump".into(),
                expected: FEATURE_SPEC_VERSION,
                found: version,
            });
        }
        let rows = r.u64()? as usize;
        let cols = r.u64()? as usize;
        let n = rows
            .checked_mul(cols)
            .ok_or_else(|| Error::format("feature dump", "size overflow"))?;
        if n.saturating_mul(8) != bytes.len().saturating_sub(24) {
            return Err(Error::format("feature dump", "payload size mismatch"));
        }
        let data = (0..n).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        r.expect_end()?;
        Self::new(rows, cols, data)
    }
}

const HUE_BINS: usize = 8;
const ORIENT_BINS: usize = 8;
/// Largest possible Sobel response along one axis for 8-bit gray.
const SOBEL_MAX: f64 = 4.0 * 255.0;

fn gray(p: [u8; 3]) -> f64 {
    0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64
}

/// Hue bin of a pixel, `None` when achromatic.
fn hue_bin(p: [u8; 3]) -> Option<usize> {
    let [r, g, b] = p.map(|v| v as f64);
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let d = max - min;
    if d == 0.0 {
        return None;
    }
    let h = if max == r {
        ((g - b) / d).rem_euclid(6.0)
    } else if max == g {
        (b - r) / d + 2.0
    } else {
        (r - g) / d + 4.0
    };
    Some(((h / 6.0 * HUE_BINS as f64) as usize).min(HUE_BINS - 1))
}

/// Per-pixel Sobel magnitude and orientation bin over the gray image.
fn sobel(image: &ImageRaster) -> (Vec<f64>, Vec<usize>) {
    let (w, h) = image.dims();
    let g: Vec<f64> = image.pixels.iter().map(|&p| gray(p)).collect();
    let at = |x: isize, y: isize| -> f64 {
        let xc = x.clamp(0, w as isize - 1) as usize;
        let yc = y.clamp(0, h as isize - 1) as usize;
        g[yc * w + xc]
    };
    let mut mag = Vec::with_capacity(w * h);
    let mut bin = Vec::with_capacity(w * h);
    for y in 0..h as isize {
        for x in 0..w as isize {
            let gx = (at(x + 1, y - 1) + 2.0 * at(x + 1, y) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + 2.0 * at(x - 1, y) + at(x - 1, y + 1));
            let gy = (at(x - 1, y + 1) + 2.0 * at(x, y + 1) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + 2.0 * at(x, y - 1) + at(x + 1, y - 1));
            mag.push((gx * gx + gy * gy).sqrt());
            let theta = gy.atan2(gx).rem_euclid(PI);
            bin.push(((theta / PI * ORIENT_BINS as f64) as usize).min(ORIENT_BINS - 1));
        }
    }
    (mag, bin)
}

fn normalize(hist: &mut [f64]) {
    let total: f64 = hist.iter().sum();
    if total > 0.0 {
        hist.iter_mut().for_each(|v| *v /= total);
    }
}

/// Describes every superpixel of `seg` over `image`.
pub fn describe(image: &ImageRaster, seg: &Segmentation) -> Result<FeatureMatrix> {
    if image.dims() != seg.dims() {
        return Err(Error::DimensionMismatch {
            what: "image vs segmentation".into(),
            expected: seg.dims(),
            found: image.dims(),
        });
    }
    let spec = feature_spec();
    let (w, h) = image.dims();
    let (mag, orient) = sobel(image);
    let mut out = FeatureMatrix::empty(spec.dim());
    let mut row = Vec::with_capacity(spec.dim());

    for (id, members) in seg.members.iter().enumerate() {
        row.clear();
        let n = members.len() as f64;
        let (mut xmin, mut xmax, mut ymin, mut ymax) = (usize::MAX, 0, usize::MAX, 0);
        let (mut sx, mut sy) = (0.0, 0.0);
        let mut perimeter = 0usize;
        let mut sum = [0.0f64; 3];
        let mut hue = [0.0f64; HUE_BINS];
        let mut ori = [0.0f64; ORIENT_BINS];
        let mut mag_sum = 0.0;
        for &p in members {
            let p = p as usize;
            let (x, y) = (p % w, p / w);
            xmin = xmin.min(x);
            xmax = xmax.max(x);
            ymin = ymin.min(y);
            ymax = ymax.max(y);
            sx += x as f64;
            sy += y as f64;
            let same = |q: usize| seg.labels[q] as usize == id;
            perimeter += [
                x > 0 && same(p - 1),
                x + 1 < w && same(p + 1),
                y > 0 && same(p - w),
                y + 1 < h && same(p + w),
            ]
            .iter()
            .filter(|&&inside| !inside)
            .count();
            let px = image.pixels[p];
            for c in 0..3 {
                sum[c] += px[c] as f64;
            }
            if let Some(b) = hue_bin(px) {
                hue[b] += 1.0;
            }
            ori[orient[p]] += mag[p];
            mag_sum += mag[p];
        }
        let mean = sum.map(|s| s / n);
        let mut var = [0.0f64; 3];
        for &p in members {
            let px = image.pixels[p as usize];
            for c in 0..3 {
                var[c] += (px[c] as f64 - mean[c]).powi(2);
            }
        }
        let (bw, bh) = ((xmax - xmin + 1) as f64, (ymax - ymin + 1) as f64);

        // shape
        row.push(n / (w * h) as f64);
        row.push(perimeter as f64 / n);
        row.push(n / (bw * bh));
        row.push(bw / (bw + bh));
        // location
        row.push((sx / n + 0.5) / w as f64);
        row.push((sy / n + 0.5) / h as f64);
        row.push((ymin as f64 + 0.5) / h as f64);
        row.push((ymax as f64 + 0.5) / h as f64);
        // color
        row.extend(mean.iter().map(|m| m / 255.0));
        row.extend(var.iter().map(|v| (v / n).sqrt() / 255.0));
        normalize(&mut hue);
        row.extend_from_slice(&hue);
        // texture
        normalize(&mut ori);
        row.extend_from_slice(&ori);
        row.push(mag_sum / n / SOBEL_MAX);

        out.push_row(&row);
    }
    debug_assert!(out.data.iter().all(|v| v.is_finite()));
    Ok(out)
}
