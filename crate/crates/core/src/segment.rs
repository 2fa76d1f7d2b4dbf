//! Graph-based superpixel segmentation (Felzenszwalb & Huttenlocher) and
//! ground-truth superpixel labels.
//!
//! Merging runs over the 8-connected pixel grid. Components are then split
//! into 4-connected pieces and pieces smaller than `min_size` are merged
//! along their cheapest 4-connected boundary edge, so every superpixel is a
//! 4-connected pixel set.

use std::cmp::Ordering;

use crate::corpus::{encode_pgm16, ImageRaster, LabelRaster};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentParams {
    /// Scale parameter of the merge threshold `k / |C|`.
    pub k: f64,
    pub min_size: usize,
    /// Gaussian pre-smoothing width, 0 disables smoothing.
    pub sigma: f64,
}

impl Default for SegmentParams {
    fn default() -> Self {
        Self {
            k: 100.0,
            min_size: 20,
            sigma: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segmentation {
    pub width: usize,
    pub height: usize,
    /// Row-major superpixel id per pixel, dense in `0..len()`.
    pub labels: Vec<u32>,
    /// Pixel indices of each superpixel, ascending.
    pub members: Vec<Vec<u32>>,
    /// Unordered adjacent pairs `(a, b)` with `a < b`, sorted.
    pub adjacency: Vec<(usize, usize)>,
}

impl Segmentation {
    /// Builds a segmentation from a dense per-pixel id map.
    pub fn from_labels(width: usize, height: usize, labels: Vec<u32>) -> Result<Self> {
        if width * height != labels.len() || labels.is_empty() {
            return Err(Error::DimensionMismatch {
                what: "superpixel id map".into(),
                expected: (width, height),
                found: (labels.len(), 1),
            });
        }
        let n = labels.iter().max().map_or(0, |&m| m as usize + 1);
        let mut members = vec![Vec::new(); n];
        for (i, &l) in labels.iter().enumerate() {
            members[l as usize].push(i as u32);
        }
        if members.iter().any(Vec::is_empty) {
            return Err(Error::InvalidArgument("superpixel ids are not dense".into()));
        }
        let mut adjacency = Vec::new();
        for y in 0..height {
            for x in 0..width {
                let a = labels[y * width + x] as usize;
                if x + 1 < width {
                    let b = labels[y * width + x + 1] as usize;
                    if a != b {
                        adjacency.push((a.min(b), a.max(b)));
                    }
                }
                if y + 1 < height {
                    let b = labels[(y + 1) * width + x] as usize;
                    if a != b {
                        adjacency.push((a.min(b), a.max(b)));
                    }
                }
            }
        }
        adjacency.sort_unstable();
        adjacency.dedup();
        Ok(Self {
            width,
            height,
            labels,
            members,
            adjacency,
        })
    }

    /// Number of superpixels.
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    /// Superpixel ids as a 16-bit PGM.
    pub fn to_pgm(&self) -> Result<Vec<u8>> {
        if self.len() > u16::MAX as usize + 1 {
            return Err(Error::InvalidArgument(
                "too many superpixels for a 16-bit dump".into(),
            ));
        }
        let ids: Vec<u16> = self.labels.iter().map(|&l| l as u16).collect();
        Ok(encode_pgm16(self.width, self.height, &ids))
    }

    /// The image with superpixel boundaries painted red.
    pub fn boundary_overlay(&self, image: &ImageRaster) -> Result<ImageRaster> {
        if image.dims() != self.dims() {
            return Err(Error::DimensionMismatch {
                what: "overlay image".into(),
                expected: self.dims(),
                found: image.dims(),
            });
        }
        let mut out = image.clone();
        let w = self.width;
        for i in 0..self.labels.len() {
            let (x, y) = (i % w, i / w);
            let edge = (x + 1 < w && self.labels[i + 1] != self.labels[i])
                || (y + 1 < self.height && self.labels[i + w] != self.labels[i]);
            if edge {
                out.pixels[i] = [255, 0, 0];
            }
        }
        Ok(out)
    }
}

struct DisjointSet {
    parent: Vec<u32>,
    size: Vec<u32>,
    internal: Vec<f64>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n as u32).collect(),
            size: vec![1; n],
            internal: vec![0.0; n],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] as usize != x {
            let p = self.parent[x] as usize;
            self.parent[x] = self.parent[p];
            x = p;
        }
        x
    }

    /// Joins two roots; returns the new root.
    fn join(&mut self, a: usize, b: usize, weight: f64) -> usize {
        let (big, small) = if self.size[a] >= self.size[b] { (a, b) } else { (b, a) };
        self.parent[small] = big as u32;
        self.size[big] += self.size[small];
        self.internal[big] = self.internal[big].max(self.internal[small]).max(weight);
        big
    }
}

#[derive(Clone, Copy)]
struct Edge {
    w: f64,
    a: u32,
    b: u32,
}

fn edge_order(x: &Edge, y: &Edge) -> Ordering {
    x.w.total_cmp(&y.w)
        .then(x.a.cmp(&y.a))
        .then(x.b.cmp(&y.b))
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (4.0 * sigma).ceil() as usize;
    let mut k: Vec<f64> = (0..=radius)
        .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let total = k[0] + 2.0 * k[1..].iter().sum::<f64>();
    k.iter_mut().for_each(|v| *v /= total);
    k
}

/// Separable Gaussian smoothing per channel with clamped borders.
fn smooth(image: &ImageRaster, sigma: f64) -> Vec<[f64; 3]> {
    let (w, h) = image.dims();
    let src: Vec<[f64; 3]> = image
        .pixels
        .iter()
        .map(|p| [p[0] as f64, p[1] as f64, p[2] as f64])
        .collect();
    if sigma <= 0.0 {
        return src;
    }
    let kernel = gaussian_kernel(sigma);
    let r = kernel.len() as isize - 1;
    let pass = |src: &[[f64; 3]], horizontal: bool| -> Vec<[f64; 3]> {
        let mut out = vec![[0.0; 3]; src.len()];
        for y in 0..h as isize {
            for x in 0..w as isize {
                let mut acc = [0.0; 3];
                for d in -r..=r {
                    let (sx, sy) = if horizontal {
                        ((x + d).clamp(0, w as isize - 1), y)
                    } else {
                        (x, (y + d).clamp(0, h as isize - 1))
                    };
                    let p = src[(sy as usize) * w + sx as usize];
                    let kw = kernel[d.unsigned_abs()];
                    for c in 0..3 {
                        acc[c] += kw * p[c];
                    }
                }
                out[y as usize * w + x as usize] = acc;
            }
        }
        out
    };
    let tmp = pass(&src, true);
    pass(&tmp, false)
}

fn dist(p: &[f64; 3], q: &[f64; 3]) -> f64 {
    ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2)).sqrt()
}

/// Over-segments `image` into superpixels.
pub fn segment(image: &ImageRaster, params: &SegmentParams) -> Result<Segmentation> {
    if !(params.k > 0.0) || params.min_size == 0 || !(params.sigma >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "segmentation needs k > 0, min_size >= 1, sigma >= 0 (got {params:?})"
        )));
    }
    let (w, h) = image.dims();
    let n = w * h;
    let px = smooth(image, params.sigma);

    let mut edges = Vec::with_capacity(4 * n);
    let mut four = Vec::with_capacity(2 * n);
    for y in 0..h {
        for x in 0..w {
            let a = y * w + x;
            let mut push = |b: usize, four_connected: bool| {
                let e = Edge {
                    w: dist(&px[a], &px[b]),
                    a: a as u32,
                    b: b as u32,
                };
                edges.push(e);
                if four_connected {
                    four.push(e);
                }
            };
            if x + 1 < w {
                push(a + 1, true);
            }
            if y + 1 < h {
                push(a + w, true);
                if x + 1 < w {
                    push(a + w + 1, false);
                }
                if x > 0 {
                    push(a + w - 1, false);
                }
            }
        }
    }
    edges.sort_by(edge_order);
    four.sort_by(edge_order);

    let mut fh = DisjointSet::new(n);
    for e in &edges {
        let ra = fh.find(e.a as usize);
        let rb = fh.find(e.b as usize);
        if ra == rb {
            continue;
        }
        let ta = fh.internal[ra] + params.k / fh.size[ra] as f64;
        let tb = fh.internal[rb] + params.k / fh.size[rb] as f64;
        if e.w <= ta.min(tb) {
            fh.join(ra, rb, e.w);
        }
    }

    // split into 4-connected pieces
    let mut pieces = DisjointSet::new(n);
    for e in &four {
        if fh.find(e.a as usize) == fh.find(e.b as usize) {
            let (ra, rb) = (pieces.find(e.a as usize), pieces.find(e.b as usize));
            if ra != rb {
                pieces.join(ra, rb, e.w);
            }
        }
    }

    // absorb small pieces through their cheapest boundary
    loop {
        let mut changed = false;
        for e in &four {
            let (ra, rb) = (pieces.find(e.a as usize), pieces.find(e.b as usize));
            if ra != rb
                && ((pieces.size[ra] as usize) < params.min_size
                    || (pieces.size[rb] as usize) < params.min_size)
            {
                pieces.join(ra, rb, e.w);
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }

    let mut dense = vec![u32::MAX; n];
    let mut next = 0u32;
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let r = pieces.find(i);
        if dense[r] == u32::MAX {
            dense[r] = next;
            next += 1;
        }
        labels.push(dense[r]);
    }
    Segmentation::from_labels(w, h, labels)
}

/// Majority ground-truth label of each superpixel.
#[derive(Debug, Clone, PartialEq)]
pub struct GtSuperpixelLabels {
    /// 0-based class index, `None` when every pixel is void.
    pub labels: Vec<Option<usize>>,
    /// Majority pixels over nonvoid pixels; 0 for all-void superpixels.
    pub purity: Vec<f64>,
}

impl GtSuperpixelLabels {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

pub fn gt_labels(seg: &Segmentation, gt: &LabelRaster) -> Result<GtSuperpixelLabels> {
    if seg.dims() != gt.dims() {
        return Err(Error::DimensionMismatch {
            what: "ground truth vs segmentation".into(),
            expected: seg.dims(),
            found: gt.dims(),
        });
    }
    let mut labels = Vec::with_capacity(seg.len());
    let mut purity = Vec::with_capacity(seg.len());
    let mut counts: Vec<usize> = Vec::new();
    for members in &seg.members {
        counts.clear();
        let mut nonvoid = 0;
        for &p in members {
            if let Some(c) = gt.class_at(p as usize) {
                if counts.len() <= c {
                    counts.resize(c + 1, 0);
                }
                counts[c] += 1;
                nonvoid += 1;
            }
        }
        // first maximum = smallest class id among ties
        let best = counts
            .iter()
            .enumerate()
            .fold(None, |acc: Option<(usize, usize)>, (c, &n)| match acc {
                Some((_, m)) if m >= n => acc,
                _ if n > 0 => Some((c, n)),
                _ => acc,
            });
        match best {
            Some((c, n)) => {
                labels.push(Some(c));
                purity.push(n as f64 / nonvoid as f64);
            }
            None => {
                labels.push(None);
                purity.push(0.0);
            }
        }
    }
    Ok(GtSuperpixelLabels { labels, purity })
}
