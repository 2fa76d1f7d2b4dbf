//! One-vs-rest gradient-boosted trees under four training-data regimes.
//!
//! Each regime draws a different training set from the same superpixels:
//!
//! 1. unbalanced: every training superpixel, all classes;
//! 2. balanced-all: up to `cap` samples per class, all classes;
//! 3. balanced-lt-x: classes whose mean image occupancy is below `x`%;
//! 4. balanced-lt-halfx: classes below `ceil(x / 2)`%.
//!
//! A model emits, per covered class, an additive score approximating the
//! half log-odds `0.5 * ln(P(s|c) / P(s|not c))`.

mod model;
mod tree;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::LabelIndex;
use crate::features::FeatureMatrix;
use crate::{Error, Result};

pub use model::{score, train_bdt, train_bdt_traced, BdtModel, BoostParams, ClassEnsemble};
pub use tree::{Node, Tree};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Regime {
    Unbalanced = 1,
    BalancedAll = 2,
    BalancedLtX = 3,
    BalancedLtHalfX = 4,
}

impl Regime {
    pub const ALL: [Regime; 4] = [
        Regime::Unbalanced,
        Regime::BalancedAll,
        Regime::BalancedLtX,
        Regime::BalancedLtHalfX,
    ];

    pub fn number(self) -> u8 {
        self as u8
    }

    pub fn from_number(n: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|r| r.number() == n)
    }

    pub fn tag(self) -> &'static str {
        match self {
            Regime::Unbalanced => "unbalanced",
            Regime::BalancedAll => "balanced-all",
            Regime::BalancedLtX => "balanced-lt-x",
            Regime::BalancedLtHalfX => "balanced-lt-halfx",
        }
    }

    /// Occupancy bound in percent for the rare-class regimes.
    pub fn occupancy_bound(self, x: f64) -> Option<f64> {
        match self {
            Regime::BalancedLtX => Some(x),
            Regime::BalancedLtHalfX => Some((x / 2.0).ceil()),
            _ => None,
        }
    }

    /// Classes a regime covers: all of them for regimes 1 and 2, otherwise
    /// the classes present in training whose mean occupancy is below the
    /// regime's bound.
    pub fn covered_classes(self, index: &LabelIndex, x: f64) -> Vec<usize> {
        match self.occupancy_bound(x) {
            None => (0..index.num_classes).collect(),
            Some(bound) => (0..index.num_classes)
                .filter(|&c| index.class_counts[c] > 0 && index.occupancy[c] * 100.0 < bound)
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    pub features: FeatureMatrix,
    /// 0-based class index per row, each in `classes`.
    pub labels: Vec<usize>,
    pub regime: Regime,
    /// Covered class set, ascending.
    pub classes: Vec<usize>,
    pub num_classes: usize,
}

impl TrainingSet {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn class_count(&self, class: usize) -> usize {
        self.labels.iter().filter(|&&l| l == class).count()
    }
}

/// Draws the training set of `regime` from candidate superpixels
/// (`features` rows labeled by `labels`).
///
/// Balanced regimes keep `min(cap, available)` rows per covered class, drawn
/// uniformly without replacement; rows stay grouped by class in ascending
/// original order.
pub fn subsample(
    index: &LabelIndex,
    features: &FeatureMatrix,
    labels: &[usize],
    regime: Regime,
    x: f64,
    cap: usize,
    seed: u64,
) -> Result<TrainingSet> {
    if !(x > 0.0) || cap == 0 {
        return Err(Error::InvalidArgument(format!(
            "subsample needs x > 0 and cap >= 1 (x = {x}, cap = {cap})"
        )));
    }
    if features.rows != labels.len() {
        return Err(Error::DimensionMismatch {
            what: "training features vs labels".into(),
            expected: (features.rows, features.cols),
            found: (labels.len(), features.cols),
        });
    }
    let c = index.num_classes;
    if let Some(&bad) = labels.iter().find(|&&l| l >= c) {
        return Err(Error::InvalidArgument(format!("training label {bad} >= {c} classes")));
    }
    let classes = regime.covered_classes(index, x);
    if classes.is_empty() {
        return Err(Error::Empty(format!("class set of regime {}", regime.tag())));
    }

    let rows: Vec<usize> = if regime == Regime::Unbalanced {
        (0..labels.len()).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Vec::new();
        for &class in &classes {
            let pool: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
            let take = cap.min(pool.len());
            let mut picked: Vec<usize> = sample(&mut rng, pool.len(), take)
                .into_iter()
                .map(|k| pool[k])
                .collect();
            picked.sort_unstable();
            rows.extend(picked);
        }
        rows
    };

    let mut feats = FeatureMatrix::empty(features.cols);
    for &r in &rows {
        feats.push_row(features.row(r));
    }
    Ok(TrainingSet {
        features: feats,
        labels: rows.iter().map(|&r| labels[r]).collect(),
        regime,
        classes,
        num_classes: c,
    })
}

/// Data cost of a score: `1 - 1 / (1 + exp(-score))`, evaluated as
/// `1 / (1 + exp(score))` to stay accurate for large scores.
pub fn sigmoid_cost(score: f64) -> f64 {
    1.0 / (1.0 + score.exp())
}

/// Scores of one model over N superpixels and all classes; `None` marks a
/// class outside the model's covered set.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<Option<f64>>,
}

impl ScoreMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<Option<f64>>) -> Result<Self> {
        if rows * cols != data.len() {
            return Err(Error::DimensionMismatch {
                what: "score matrix".into(),
                expected: (rows, cols),
                found: (data.len(), 1),
            });
        }
        Ok(Self { rows, cols, data })
    }

    /// Fully covered matrix from plain values.
    pub fn from_values(rows: usize, cols: usize, values: &[f64]) -> Result<Self> {
        Self::new(rows, cols, values.iter().map(|&v| Some(v)).collect())
    }

    pub fn get(&self, row: usize, class: usize) -> Option<f64> {
        self.data[row * self.cols + class]
    }

    pub fn row(&self, row: usize) -> &[Option<f64>] {
        &self.data[row * self.cols..(row + 1) * self.cols]
    }

    pub fn covers(&self, class: usize) -> bool {
        self.rows == 0 || self.data[class].is_some()
    }

    /// Row-wise argmax over covered classes (ties to the smaller index).
    pub fn argmax(&self) -> Vec<Option<usize>> {
        (0..self.rows)
            .map(|i| {
                let mut best: Option<(usize, f64)> = None;
                for (c, v) in self.row(i).iter().enumerate() {
                    if let Some(v) = *v {
                        if best.is_none_or(|(_, b)| v > b) {
                            best = Some((c, v));
                        }
                    }
                }
                best.map(|(c, _)| c)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::ImageLabelCounts;

    fn index_with_occupancy(occ: &[f64]) -> LabelIndex {
        let c = occ.len();
        LabelIndex::from_parts(
            c,
            vec![ImageLabelCounts {
                id: "a".into(),
                counts: vec![1; c],
                void: 0,
            }],
            occ.to_vec(),
        )
        .unwrap()
    }

    #[test]
    fn regime_criteria_at_x5() {
        // classes at 2%, 4% and 30% mean occupancy
        let index = index_with_occupancy(&[0.02, 0.04, 0.30]);
        assert_eq!(Regime::BalancedLtHalfX.occupancy_bound(5.0), Some(3.0));
        assert_eq!(Regime::BalancedLtX.covered_classes(&index, 5.0), vec![0, 1]);
        assert_eq!(Regime::BalancedLtHalfX.covered_classes(&index, 5.0), vec![0]);
        assert_eq!(Regime::BalancedAll.covered_classes(&index, 5.0), vec![0, 1, 2]);
    }

    #[test]
    fn balanced_respects_availability_cap() {
        let index = index_with_occupancy(&[0.5, 0.5]);
        let labels: Vec<usize> = (0..240).map(|i| usize::from(i >= 200)).collect();
        let feats = FeatureMatrix::new(240, 1, (0..240).map(|i| i as f64).collect()).unwrap();
        let ts = subsample(&index, &feats, &labels, Regime::BalancedAll, 5.0, 100, 7).unwrap();
        assert_eq!(ts.class_count(0), 100);
        assert_eq!(ts.class_count(1), 40);
        let again = subsample(&index, &feats, &labels, Regime::BalancedAll, 5.0, 100, 7).unwrap();
        assert_eq!(ts, again);
        let other = subsample(&index, &feats, &labels, Regime::BalancedAll, 5.0, 100, 8).unwrap();
        assert_ne!(ts.features, other.features);
    }

    #[test]
    fn empty_rare_regime_is_an_error() {
        let index = index_with_occupancy(&[0.5, 0.5]);
        let feats = FeatureMatrix::new(2, 1, vec![0.0, 1.0]).unwrap();
        let err = subsample(&index, &feats, &[0, 1], Regime::BalancedLtX, 5.0, 10, 0);
        assert!(matches!(err, Err(Error::Empty(_))));
    }

    #[test]
    fn sigmoid_cost_values() {
        assert_eq!(sigmoid_cost(0.0), 0.5);
        assert!((sigmoid_cost(3f64.ln()) - 0.25).abs() < 1e-12);
        for l in [0.1, 1.0, 7.5] {
            assert!((sigmoid_cost(l) + sigmoid_cost(-l) - 1.0).abs() < 1e-15);
        }
    }
}
