//! Scene-level global label costs.
//!
//! The first-pass labeling of a query image yields its label set `T`, each
//! label weighted by `1 - n(t, I) / |I|` so that labels covering few
//! superpixels count more. Training images are ranked by the summed weights
//! of the labels they share with `T`; superpixel label counts over the top
//! `K` images then give a smoothed likelihood per class
//!
//! ```text
//! P(c | T) = ((1 + n(c, K_T)) / n(c, S)) / ((1 + n(not c, K_T)) / |S|)
//! ```
//!
//! and a label cost `H(c) = -ln P(c | T)`. `n(c, S)` is floored at 1 so
//! classes absent from training stay admissible. Costs are signed: classes
//! over-represented among the neighbors get negative costs.

use std::fmt::Write as _;

use crate::corpus::LabelIndex;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct InitialLabeling {
    /// 0-based class per superpixel.
    pub labels: Vec<usize>,
    pub num_classes: usize,
}

impl InitialLabeling {
    pub fn new(labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        if let Some(&bad) = labels.iter().find(|&&l| l >= num_classes) {
            return Err(Error::InvalidArgument(format!("label {bad} >= {num_classes} classes")));
        }
        Ok(Self {
            labels,
            num_classes,
        })
    }

    /// Superpixels per class.
    pub fn counts(&self) -> Vec<usize> {
        let mut n = vec![0; self.num_classes];
        for &l in &self.labels {
            n[l] += 1;
        }
        n
    }

    /// The unique label set `T`, ascending.
    pub fn unique(&self) -> Vec<usize> {
        self.counts()
            .iter()
            .enumerate()
            .filter(|(_, &n)| n > 0)
            .map(|(c, _)| c)
            .collect()
    }
}

/// `(t, 1 - n(t, I) / |I|)` for each `t` in `T`, ascending by class.
pub fn initial_label_weights(lab: &InitialLabeling) -> Result<Vec<(usize, f64)>> {
    if lab.labels.is_empty() {
        return Err(Error::Empty("initial labeling".into()));
    }
    let total = lab.labels.len() as f64;
    Ok(lab
        .counts()
        .iter()
        .enumerate()
        .filter(|(_, &n)| n > 0)
        .map(|(t, &n)| (t, 1.0 - n as f64 / total))
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Neighbor {
    /// Position in `LabelIndex::images`.
    pub image: usize,
    pub score: f64,
}

/// Top `k` training images by weighted label-set intersection with `T`.
/// Ties go to the lexicographically smaller image id.
pub fn rank_neighbors(
    index: &LabelIndex,
    weights: &[(usize, f64)],
    k: usize,
) -> Result<Vec<Neighbor>> {
    if index.is_empty() {
        return Err(Error::Empty("label index".into()));
    }
    if k == 0 {
        return Err(Error::InvalidArgument("K must be >= 1".into()));
    }
    let mut ranked: Vec<Neighbor> = index
        .images
        .iter()
        .enumerate()
        .map(|(i, im)| Neighbor {
            image: i,
            score: weights
                .iter()
                .filter(|(t, _)| im.contains(*t))
                .map(|(_, w)| w)
                .sum(),
        })
        .collect();
    ranked.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| index.images[a.image].id.cmp(&index.images[b.image].id))
            .then(a.image.cmp(&b.image))
    });
    ranked.truncate(k);
    Ok(ranked)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlobalLabelCosts {
    /// `P(c | T)`, strictly positive.
    pub likelihood: Vec<f64>,
    /// `H(c) = -ln P(c | T)`.
    pub cost: Vec<f64>,
}

impl GlobalLabelCosts {
    /// Costs as consumed by the label-cost MRF: `max(H, 0)`. Labels the
    /// neighborhood makes more likely than the corpus average are free
    /// rather than rewarded, so introducing a label never lowers the energy.
    pub fn mrf_costs(&self) -> Vec<f64> {
        self.cost.iter().map(|&h| h.max(0.0)).collect()
    }
}

/// Label costs from the superpixel label counts of the neighbor images.
pub fn global_costs(index: &LabelIndex, neighbors: &[usize]) -> Result<GlobalLabelCosts> {
    if neighbors.is_empty() {
        return Err(Error::Empty("neighbor set".into()));
    }
    let c = index.num_classes;
    let mut in_k = vec![0u64; c];
    let mut total_k = 0u64;
    for &j in neighbors {
        let im = index.images.get(j).ok_or_else(|| {
            Error::InvalidArgument(format!("neighbor {j} outside the label index"))
        })?;
        for (acc, &n) in in_k.iter_mut().zip(&im.counts) {
            *acc += n as u64;
        }
        total_k += im.superpixels();
    }
    let s = index.total as f64;
    let likelihood: Vec<f64> = (0..c)
        .map(|class| {
            let n_ck = in_k[class] as f64;
            let n_not_ck = (total_k - in_k[class]) as f64;
            let n_cs = index.class_counts[class].max(1) as f64;
            ((1.0 + n_ck) / n_cs) / ((1.0 + n_not_ck) / s)
        })
        .collect();
    let cost = likelihood.iter().map(|p| -p.ln()).collect();
    Ok(GlobalLabelCosts { likelihood, cost })
}

/// Plain-text report of the neighbors and label costs of one query.
pub fn debug_report(
    index: &LabelIndex,
    neighbors: &[Neighbor],
    costs: &GlobalLabelCosts,
    class_names: &[String],
) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# rank image score");
    for (r, n) in neighbors.iter().enumerate() {
        let _ = writeln!(out, "{} {} {:.6}", r + 1, index.images[n.image].id, n.score);
    }
    let _ = writeln!(out, "# class likelihood cost");
    for (c, (p, h)) in costs.likelihood.iter().zip(&costs.cost).enumerate() {
        let name = class_names.get(c).map_or("?", String::as_str);
        let _ = writeln!(out, "{name} {p:.6} {h:.6}");
    }
    out
}
