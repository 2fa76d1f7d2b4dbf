//! Normalized-likelihood fusion of the four regime models.
//!
//! For classifier `j` covering classes `C_j`, with scores mapped into (0, 1)
//! by the logistic function (`Lh = 1 / (1 + exp(-L))`), the raw weight of
//! class `c` over the training superpixels `S` is
//!
//! ```text
//! w~_j(c) = (|C_j|' / |C|) * sum_s Lh_j(s, c) / sum_s sum_{c' in C_j, c' != c} Lh_j(s, c')
//! ```
//!
//! where `|C_j|'` counts the classes of `C_j` not covered by any classifier
//! with a strictly smaller covered set. Weights are normalized per class
//! over the classifiers covering it. Scores are combined as
//! `L(s, c) = sum_j w_j(c) * L_j(s, c)` on the raw scale.

use std::fmt::Write as _;

use crate::boost::{score, sigmoid_cost, BdtModel, ScoreMatrix};
use crate::features::FeatureMatrix;
use crate::{Error, Result};

pub const CLASSIFIERS: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct FusionWeights {
    pub num_classes: usize,
    /// `w[j][c]`, classifier-major.
    pub w: [Vec<f64>; CLASSIFIERS],
}

impl FusionWeights {
    pub fn get(&self, classifier: usize, class: usize) -> f64 {
        self.w[classifier][class]
    }

    /// Weights putting everything on one classifier.
    pub fn one_hot(num_classes: usize, classifier: usize) -> Self {
        let mut w: [Vec<f64>; CLASSIFIERS] = Default::default();
        for (j, wj) in w.iter_mut().enumerate() {
            *wj = vec![if j == classifier { 1.0 } else { 0.0 }; num_classes];
        }
        Self { num_classes, w }
    }

    /// One line per class: 1-based class id then the four weights with 17
    /// significant digits.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for c in 0..self.num_classes {
            let _ = write!(out, "{}", c + 1);
            for j in 0..CLASSIFIERS {
                let _ = write!(out, " {:.16e}", self.w[j][c]);
            }
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |d: String| Error::format("fusion weights", d);
        let mut w: [Vec<f64>; CLASSIFIERS] = Default::default();
        for (i, line) in text.lines().filter(|l| !l.trim().is_empty()).enumerate() {
            let toks: Vec<&str> = line.split_whitespace().collect();
            if toks.len() != CLASSIFIERS + 1 {
                return Err(bad(format!("line {}: expected id and 4 weights", i + 1)));
            }
            if toks[0].parse::<usize>().ok() != Some(i + 1) {
                return Err(bad(format!("line {}: class ids must run 1, 2, ...", i + 1)));
            }
            for j in 0..CLASSIFIERS {
                let v: f64 = toks[j + 1]
                    .parse()
                    .map_err(|_| bad(format!("line {}: bad weight", i + 1)))?;
                w[j].push(v);
            }
        }
        Ok(Self {
            num_classes: w[0].len(),
            w,
        })
    }
}

fn covered_set(m: &ScoreMatrix) -> Vec<usize> {
    (0..m.cols).filter(|&c| m.get(0, c).is_some()).collect()
}

/// Fusion weights from score matrices already mapped to positive values.
/// `shifted[j]` is `None` when classifier `j` is unavailable; all present
/// matrices must cover the same superpixels.
pub fn weights_from_shifted(
    shifted: &[Option<ScoreMatrix>; CLASSIFIERS],
    num_classes: usize,
) -> Result<FusionWeights> {
    let present: Vec<(usize, &ScoreMatrix)> = shifted
        .iter()
        .enumerate()
        .filter_map(|(j, m)| m.as_ref().map(|m| (j, m)))
        .collect();
    let Some(&(_, first)) = present.first() else {
        return Err(Error::Empty("classifier set".into()));
    };
    if first.rows == 0 {
        return Err(Error::Empty("training superpixels".into()));
    }
    for &(_, m) in &present {
        if m.rows != first.rows || m.cols != num_classes {
            return Err(Error::DimensionMismatch {
                what: "fusion score matrices".into(),
                expected: (first.rows, num_classes),
                found: (m.rows, m.cols),
            });
        }
    }
    let covered: Vec<(usize, Vec<usize>)> =
        present.iter().map(|&(j, m)| (j, covered_set(m))).collect();

    let mut raw: [Vec<f64>; CLASSIFIERS] = Default::default();
    for r in raw.iter_mut() {
        *r = vec![0.0; num_classes];
    }
    for (&(j, m), (_, cj)) in present.iter().zip(&covered) {
        let exclusive = cj
            .iter()
            .filter(|&&c| {
                !covered
                    .iter()
                    .any(|(k, ck)| *k != j && ck.len() < cj.len() && ck.contains(&c))
            })
            .count();
        let factor = exclusive as f64 / num_classes as f64;
        let mut col_sum = vec![0.0; num_classes];
        for s in 0..m.rows {
            for &c in cj {
                col_sum[c] += m.get(s, c).expect("covered");
            }
        }
        let all: f64 = cj.iter().map(|&c| col_sum[c]).sum();
        for &c in cj {
            let den = all - col_sum[c];
            if !(den > 0.0) {
                return Err(Error::ZeroDenominator {
                    classifier: j + 1,
                    class: c,
                });
            }
            raw[j][c] = factor * col_sum[c] / den;
        }
    }

    let mut w = raw.clone();
    for c in 0..num_classes {
        let total: f64 = (0..CLASSIFIERS).map(|j| raw[j][c]).sum();
        if !(total > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "class {c} is covered by no classifier"
            )));
        }
        for wj in w.iter_mut() {
            wj[c] /= total;
        }
    }
    Ok(FusionWeights { num_classes, w })
}

fn logistic(m: &ScoreMatrix) -> ScoreMatrix {
    ScoreMatrix {
        rows: m.rows,
        cols: m.cols,
        data: m
            .data
            .iter()
            .map(|v| v.map(|l| 1.0 / (1.0 + (-l).exp())))
            .collect(),
    }
}

/// Learns fusion weights by scoring the training superpixels with every
/// available model.
pub fn learn_weights(
    models: [Option<&BdtModel>; CLASSIFIERS],
    train_feats: &FeatureMatrix,
) -> Result<FusionWeights> {
    let num_classes = models
        .iter()
        .flatten()
        .map(|m| m.num_classes)
        .next()
        .ok_or_else(|| Error::Empty("classifier set".into()))?;
    let mut shifted: [Option<ScoreMatrix>; CLASSIFIERS] = Default::default();
    for (slot, model) in shifted.iter_mut().zip(models) {
        if let Some(m) = model {
            *slot = Some(logistic(&score(m, train_feats)?));
        }
    }
    weights_from_shifted(&shifted, num_classes)
}

fn aligned<'a>(scores: &[Option<&'a ScoreMatrix>; CLASSIFIERS]) -> Result<(usize, usize)> {
    let first = scores
        .iter()
        .flatten()
        .next()
        .ok_or_else(|| Error::Empty("classifier set".into()))?;
    for m in scores.iter().flatten() {
        if (m.rows, m.cols) != (first.rows, first.cols) {
            return Err(Error::DimensionMismatch {
                what: "score matrices".into(),
                expected: (first.rows, first.cols),
                found: (m.rows, m.cols),
            });
        }
    }
    Ok((first.rows, first.cols))
}

/// Weighted sum of the classifiers' scores per class.
pub fn combine(
    scores: &[Option<&ScoreMatrix>; CLASSIFIERS],
    w: &FusionWeights,
) -> Result<ScoreMatrix> {
    let (rows, cols) = aligned(scores)?;
    if w.num_classes != cols {
        return Err(Error::DimensionMismatch {
            what: "fusion weights vs scores".into(),
            expected: (cols, CLASSIFIERS),
            found: (w.num_classes, CLASSIFIERS),
        });
    }
    let mut data = Vec::with_capacity(rows * cols);
    for s in 0..rows {
        for c in 0..cols {
            let mut acc = 0.0;
            for j in 0..CLASSIFIERS {
                let wj = w.get(j, c);
                if wj == 0.0 {
                    continue;
                }
                let v = scores[j]
                    .and_then(|m| m.get(s, c))
                    .ok_or(Error::UncoveredScore {
                        classifier: j + 1,
                        class: c,
                    })?;
                acc += wj * v;
            }
            data.push(Some(acc));
        }
    }
    ScoreMatrix::new(rows, cols, data)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FusionRule {
    /// Normalized-likelihood weights.
    Nl,
    Average,
    Median,
}

impl FusionRule {
    pub fn name(self) -> &'static str {
        match self {
            FusionRule::Nl => "nl",
            FusionRule::Average => "average",
            FusionRule::Median => "median",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "nl" => Some(FusionRule::Nl),
            "average" => Some(FusionRule::Average),
            "median" => Some(FusionRule::Median),
            _ => None,
        }
    }
}

/// Element-wise mean or median over the classifiers covering each entry.
/// `FusionRule::Nl` is not a fixed rule; use [`combine`].
pub fn combine_variant(
    scores: &[Option<&ScoreMatrix>; CLASSIFIERS],
    rule: FusionRule,
) -> Result<ScoreMatrix> {
    let (rows, cols) = aligned(scores)?;
    let mut data = Vec::with_capacity(rows * cols);
    let mut vals = Vec::with_capacity(CLASSIFIERS);
    for s in 0..rows {
        for c in 0..cols {
            vals.clear();
            vals.extend(scores.iter().flatten().filter_map(|m| m.get(s, c)));
            if vals.is_empty() {
                return Err(Error::InvalidArgument(format!(
                    "class {c} is covered by no classifier"
                )));
            }
            let v = match rule {
                FusionRule::Average => vals.iter().sum::<f64>() / vals.len() as f64,
                FusionRule::Median => {
                    vals.sort_by(f64::total_cmp);
                    let n = vals.len();
                    if n % 2 == 1 {
                        vals[n / 2]
                    } else {
                        0.5 * (vals[n / 2 - 1] + vals[n / 2])
                    }
                }
                FusionRule::Nl => {
                    return Err(Error::InvalidArgument(
                        "normalized-likelihood fusion needs learned weights".into(),
                    ))
                }
            };
            data.push(Some(v));
        }
    }
    ScoreMatrix::new(rows, cols, data)
}

/// N x |C| data costs, each in (0, 1) for finite scores.
#[derive(Debug, Clone, PartialEq)]
pub struct CostField {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl CostField {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows * cols != data.len() || cols == 0 {
            return Err(Error::DimensionMismatch {
                what: "cost field".into(),
                expected: (rows, cols),
                found: (data.len(), 1),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite data cost".into()));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn get(&self, row: usize, class: usize) -> f64 {
        self.data[row * self.cols + class]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.data[row * self.cols..(row + 1) * self.cols]
    }

    /// Per-row cheapest class, ties to the smaller index.
    pub fn argmin(&self) -> Vec<usize> {
        (0..self.rows)
            .map(|i| {
                let r = self.row(i);
                (1..r.len()).fold(0, |b, c| if r[c] < r[b] { c } else { b })
            })
            .collect()
    }
}

pub fn data_costs(combined: &ScoreMatrix) -> Result<CostField> {
    let data = combined
        .data
        .iter()
        .enumerate()
        .map(|(i, v)| match v {
            Some(l) if l.is_finite() => Ok(sigmoid_cost(*l)),
            Some(_) => Err(Error::InvalidArgument(format!(
                "non-finite combined score at row {}",
                i / combined.cols.max(1)
            ))),
            None => Err(Error::UncoveredScore {
                classifier: 0,
                class: i % combined.cols.max(1),
            }),
        })
        .collect::<Result<Vec<_>>>()?;
    CostField::new(combined.rows, combined.cols, data)
}
