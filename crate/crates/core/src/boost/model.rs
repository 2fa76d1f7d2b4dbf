use rayon::prelude::*;

use crate::codec::{Reader, Writer};
use crate::features::{feature_spec, FeatureMatrix};
use crate::{Error, Result};

use super::tree::{fit_tree, Node, Presorted, Tree};
use super::{Regime, ScoreMatrix, TrainingSet};

pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoostParams {
    pub trees: usize,
    pub depth: usize,
    pub shrinkage: f64,
}

impl Default for BoostParams {
    fn default() -> Self {
        Self {
            trees: 400,
            depth: 4,
            shrinkage: 0.1,
        }
    }
}

/// One-vs-rest ensemble of a single class.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassEnsemble {
    pub class: usize,
    /// Half log-odds of the class frequency in the training set.
    pub prior: f64,
    pub trees: Vec<Tree>,
}

impl ClassEnsemble {
    pub fn score(&self, x: &[f64], shrinkage: f64) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| t.predict(x)).sum();
        self.prior + shrinkage * sum
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BdtModel {
    pub regime: Regime,
    pub num_classes: usize,
    /// Descriptor width the model was trained on.
    pub dim: usize,
    /// Feature layout fingerprint, 0 when trained on a non-standard layout.
    pub feature_hash: u64,
    pub shrinkage: f64,
    /// One ensemble per covered class, ascending by class.
    pub ensembles: Vec<ClassEnsemble>,
}

impl BdtModel {
    pub fn covered(&self) -> impl Iterator<Item = usize> + '_ {
        self.ensembles.iter().map(|e| e.class)
    }

    pub fn covers(&self, class: usize) -> bool {
        self.ensembles.iter().any(|e| e.class == class)
    }

    /// Self-describing binary form, `PRSB` magic.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.bytes(b"PRSB");
        w.u32(MODEL_VERSION);
        w.u64(self.feature_hash);
        w.u8(self.regime.number());
        w.u64(self.num_classes as u64);
        w.u64(self.dim as u64);
        w.f64(self.shrinkage);
        w.u64(self.ensembles.len() as u64);
        for e in &self.ensembles {
            w.u64(e.class as u64);
        }
        for e in &self.ensembles {
            w.f64(e.prior);
            w.u64(e.trees.len() as u64);
            for t in &e.trees {
                w.u64(t.nodes.len() as u64);
                for n in &t.nodes {
                    match *n {
                        Node::Split {
                            feature,
                            threshold,
                            left,
                            right,
                        } => {
                            w.u32(feature as u32);
                            w.f64(threshold);
                            w.u32(left as u32);
                            w.u32(right as u32);
                            w.f64(0.0);
                        }
                        Node::Leaf { value } => {
                            w.u32(u32::MAX);
                            w.f64(0.0);
                            w.u32(0);
                            w.u32(0);
                            w.f64(value);
                        }
                    }
                }
            }
        }
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes, "boosted tree model");
        let m = Self::read(&mut r)?;
        r.expect_end()?;
        Ok(m)
    }

    pub(crate) fn read(r: &mut Reader<'_>) -> Result<Self> {
        let bad = |d: String| Error::format("boosted tree model", d);
        r.magic(b"PRSB")?;
        let version = r.u32()?;
        if version != MODEL_VERSION {
            return Err(Error::Version {
                what: "boosted tree model".into(),
                expected: MODEL_VERSION,
                found: version,
            });
        }
        let feature_hash = r.u64()?;
        let regime = Regime::from_number(r.u8()?).ok_or_else(|| bad("unknown regime".into()))?;
        let num_classes = r.u64()? as usize;
        let dim = r.u64()? as usize;
        let shrinkage = r.f64()?;
        let n_cov = r.count(8)?;
        let classes = (0..n_cov)
            .map(|_| {
                let c = r.u64()? as usize;
                if c >= num_classes {
                    return Err(bad(format!("covered class {c} out of range")));
                }
                Ok(c)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut ensembles = Vec::with_capacity(n_cov);
        for class in classes {
            let prior = r.f64()?;
            let n_trees = r.count(8)?;
            let mut trees = Vec::with_capacity(n_trees);
            for _ in 0..n_trees {
                let n_nodes = r.count(28)?;
                let mut nodes = Vec::with_capacity(n_nodes);
                for _ in 0..n_nodes {
                    let feature = r.u32()?;
                    let threshold = r.f64()?;
                    let left = r.u32()? as usize;
                    let right = r.u32()? as usize;
                    let value = r.f64()?;
                    nodes.push(if feature == u32::MAX {
                        Node::Leaf { value }
                    } else {
                        if feature as usize >= dim || left >= n_nodes || right >= n_nodes {
                            return Err(bad("split refers outside the tree".into()));
                        }
                        Node::Split {
                            feature: feature as usize,
                            threshold,
                            left,
                            right,
                        }
                    });
                }
                if nodes.is_empty() {
                    return Err(bad("empty tree".into()));
                }
                trees.push(Tree { nodes });
            }
            ensembles.push(ClassEnsemble { class, prior, trees });
        }
        Ok(Self {
            regime,
            num_classes,
            dim,
            feature_hash,
            shrinkage,
            ensembles,
        })
    }
}

fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Mean logistic loss `ln(1 + exp(-2 y F))` for labels `y` in {-1, +1}.
fn mean_loss(y: &[f64], f: &[f64]) -> f64 {
    y.iter().zip(f).map(|(&y, &f)| softplus(-2.0 * y * f)).sum::<f64>() / y.len() as f64
}

fn train_class(
    ts: &TrainingSet,
    sorted: &Presorted,
    class: usize,
    params: &BoostParams,
) -> (ClassEnsemble, Vec<f64>) {
    let n = ts.len();
    let y: Vec<f64> = ts
        .labels
        .iter()
        .map(|&l| if l == class { 1.0 } else { -1.0 })
        .collect();
    let pos = y.iter().filter(|&&v| v > 0.0).count() as f64;
    let eps = 0.5 / n as f64;
    let p = (pos / n as f64).clamp(eps, 1.0 - eps);
    let prior = 0.5 * (p / (1.0 - p)).ln();

    let mut f = vec![prior; n];
    let mut loss = mean_loss(&y, &f);
    let mut trace = vec![loss];
    let mut trees = Vec::with_capacity(params.trees);
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n];
    let mut step = vec![0.0; n];
    let mut cand = vec![0.0; n];
    for _ in 0..params.trees {
        for i in 0..n {
            let g = 2.0 * y[i] / (1.0 + (2.0 * y[i] * f[i]).exp());
            grad[i] = g;
            hess[i] = g.abs() * (2.0 - g.abs());
        }
        let mut tree = fit_tree(&ts.features, sorted, &grad, &hess, params.depth);
        for i in 0..n {
            step[i] = tree.predict(ts.features.row(i));
        }
        // backtrack by halving until the loss does not increase
        let mut halvings = 0;
        loop {
            for i in 0..n {
                cand[i] = f[i] + params.shrinkage * step[i];
            }
            let next = mean_loss(&y, &cand);
            if next <= loss {
                loss = next;
                break;
            }
            halvings += 1;
            if halvings > 40 {
                step.iter_mut().for_each(|s| *s = 0.0);
                tree.scale_leaves(0.0);
                cand.copy_from_slice(&f);
                break;
            }
            step.iter_mut().for_each(|s| *s *= 0.5);
            tree.scale_leaves(0.5);
        }
        std::mem::swap(&mut f, &mut cand);
        trace.push(loss);
        trees.push(tree);
    }
    (ClassEnsemble { class, prior, trees }, trace)
}

/// Trains one ensemble per covered class, in parallel across classes.
pub fn train_bdt(ts: &TrainingSet, params: &BoostParams) -> Result<BdtModel> {
    train_bdt_traced(ts, params).map(|(m, _)| m)
}

/// Like [`train_bdt`], also returning each class's training loss after the
/// prior and after every round.
pub fn train_bdt_traced(
    ts: &TrainingSet,
    params: &BoostParams,
) -> Result<(BdtModel, Vec<Vec<f64>>)> {
    if ts.is_empty() {
        return Err(Error::Empty("training set".into()));
    }
    if !(params.shrinkage >= 0.0) {
        return Err(Error::InvalidArgument("shrinkage must be >= 0".into()));
    }
    let first = ts.labels[0];
    if ts.classes.len() < 2 || ts.labels.iter().all(|&l| l == first) {
        return Err(Error::InvalidArgument(format!(
            "regime {} training set has a single class, no negatives",
            ts.regime.tag()
        )));
    }
    let sorted = Presorted::new(&ts.features);
    let results: Vec<(ClassEnsemble, Vec<f64>)> = ts
        .classes
        .par_iter()
        .map(|&c| train_class(ts, &sorted, c, params))
        .collect();
    let spec = feature_spec();
    let feature_hash = if ts.features.cols == spec.dim() {
        spec.hash()
    } else {
        0
    };
    let (ensembles, traces) = results.into_iter().unzip();
    Ok((
        BdtModel {
            regime: ts.regime,
            num_classes: ts.num_classes,
            dim: ts.features.cols,
            feature_hash,
            shrinkage: params.shrinkage,
            ensembles,
        },
        traces,
    ))
}

/// Scores every row for every covered class; uncovered classes are `None`.
pub fn score(model: &BdtModel, feats: &FeatureMatrix) -> Result<ScoreMatrix> {
    if feats.cols != model.dim {
        return Err(Error::DimensionMismatch {
            what: "features vs model".into(),
            expected: (feats.rows, model.dim),
            found: (feats.rows, feats.cols),
        });
    }
    let c = model.num_classes;
    let mut data = vec![None; feats.rows * c];
    data.par_chunks_mut(c.max(1))
        .enumerate()
        .for_each(|(i, row)| {
            let x = feats.row(i);
            for e in &model.ensembles {
                row[e.class] = Some(e.score(x, model.shrinkage));
            }
        });
    ScoreMatrix::new(feats.rows, c, data)
}
