use crate::segment::{GtSuperpixelLabels, Segmentation};
use crate::{Error, Result};

use super::Corpus;

/// Ground-truth superpixel label multiset of one training image.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageLabelCounts {
    pub id: String,
    /// Superpixels per class (0-based class index).
    pub counts: Vec<u32>,
    pub void: u32,
}

impl ImageLabelCounts {
    pub fn superpixels(&self) -> u64 {
        self.counts.iter().map(|&c| c as u64).sum::<u64>() + self.void as u64
    }

    pub fn contains(&self, class: usize) -> bool {
        self.counts[class] > 0
    }

    /// Classes with at least one superpixel, ascending.
    pub fn label_set(&self) -> impl Iterator<Item = usize> + '_ {
        self.counts
            .iter()
            .enumerate()
            .filter(|(_, &n)| n > 0)
            .map(|(c, _)| c)
    }
}

/// Training-corpus label statistics used by global context and by the
/// occupancy-based training regimes.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelIndex {
    pub num_classes: usize,
    pub images: Vec<ImageLabelCounts>,
    /// n(c, S): superpixels labeled c over the whole training set.
    pub class_counts: Vec<u64>,
    pub void_count: u64,
    /// |S|, void superpixels included.
    pub total: u64,
    /// Mean over images containing c of pixels(c) / pixels(image); 0 when c
    /// never occurs.
    pub occupancy: Vec<f64>,
}

impl LabelIndex {
    /// Assembles an index from per-image counts and occupancy values.
    pub fn from_parts(
        num_classes: usize,
        images: Vec<ImageLabelCounts>,
        occupancy: Vec<f64>,
    ) -> Result<Self> {
        if images.is_empty() {
            return Err(Error::Empty("training set".into()));
        }
        if occupancy.len() != num_classes {
            return Err(Error::InvalidArgument(format!(
                "occupancy has {} entries for {num_classes} classes",
                occupancy.len()
            )));
        }
        if occupancy.iter().any(|o| !(0.0..=1.0).contains(o)) {
            return Err(Error::InvalidArgument("occupancy outside [0, 1]".into()));
        }
        let mut class_counts = vec![0u64; num_classes];
        let mut void_count = 0;
        for im in &images {
            if im.counts.len() != num_classes {
                return Err(Error::InvalidArgument(format!(
                    "image {} has {} class counts, expected {num_classes}",
                    im.id,
                    im.counts.len()
                )));
            }
            for (acc, &n) in class_counts.iter_mut().zip(&im.counts) {
                *acc += n as u64;
            }
            void_count += im.void as u64;
        }
        let total = class_counts.iter().sum::<u64>() + void_count;
        Ok(Self {
            num_classes,
            images,
            class_counts,
            void_count,
            total,
            occupancy,
        })
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }
}

/// Builds the label index from the training split, one segmentation and one
/// ground-truth superpixel labeling per training image (same order).
pub fn build_label_index(
    corpus: &Corpus,
    segs: &[Segmentation],
    gt: &[GtSuperpixelLabels],
) -> Result<LabelIndex> {
    if corpus.train.is_empty() {
        return Err(Error::Empty("training set".into()));
    }
    if segs.len() != corpus.train.len() || gt.len() != corpus.train.len() {
        return Err(Error::InvalidArgument(format!(
            "{} training images but {} segmentations and {} ground-truth labelings",
            corpus.train.len(),
            segs.len(),
            gt.len()
        )));
    }
    let c = corpus.num_classes();
    let mut images = Vec::with_capacity(segs.len());
    let mut occ_sum = vec![0.0f64; c];
    let mut occ_n = vec![0usize; c];
    for ((entry, seg), g) in corpus.train.iter().zip(segs).zip(gt) {
        if seg.dims() != entry.image.dims() || g.len() != seg.len() {
            return Err(Error::DimensionMismatch {
                what: format!("segmentation of training image {}", entry.id),
                expected: entry.image.dims(),
                found: seg.dims(),
            });
        }
        let mut counts = vec![0u32; c];
        let mut void = 0;
        for label in &g.labels {
            match *label {
                Some(k) => counts[k] += 1,
                None => void += 1,
            }
        }
        images.push(ImageLabelCounts {
            id: entry.id.clone(),
            counts,
            void,
        });

        let mut pixels = vec![0usize; c];
        for i in 0..entry.labels.labels.len() {
            if let Some(k) = entry.labels.class_at(i) {
                pixels[k] += 1;
            }
        }
        let area = entry.labels.labels.len() as f64;
        for k in 0..c {
            if pixels[k] > 0 {
                occ_sum[k] += pixels[k] as f64 / area;
                occ_n[k] += 1;
            }
        }
    }
    let occupancy = occ_sum
        .iter()
        .zip(&occ_n)
        .map(|(&s, &n)| if n == 0 { 0.0 } else { s / n as f64 })
        .collect();
    LabelIndex::from_parts(c, images, occupancy)
}
