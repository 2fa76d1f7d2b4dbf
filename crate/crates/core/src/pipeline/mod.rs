//! End-to-end training and two-pass parsing, evaluation metrics and model
//! bundle persistence.

mod bundle;
mod config;
mod metrics;

use rayon::prelude::*;

pub use bundle::{load_bundle, save_bundle, ModelBundle, BUNDLE_VERSION};
pub use config::{Config, MIN_TRAIN_PURITY};
pub use metrics::{evaluate, ClassStat, Metrics};

use crate::boost::{score, subsample, train_bdt_traced, Regime, ScoreMatrix};
use crate::context::{global_costs, initial_label_weights, rank_neighbors, GlobalLabelCosts, InitialLabeling, Neighbor};
use crate::corpus::{build_label_index, Corpus, ImageRaster, LabelRaster};
use crate::features::{describe, feature_spec, FeatureMatrix};
use crate::fusion::{combine, combine_variant, data_costs, learn_weights, CostField, FusionRule, CLASSIFIERS};
use crate::mrf::{energy, minimize, smoothness_from_counts, EnergyModel, ParseResult};
use crate::segment::{gt_labels, segment, GtSuperpixelLabels, Segmentation};
use crate::{Error, Result};

/// Which classifiers feed the data term and whether label costs are used.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    /// Regime 1 alone, one MRF pass.
    Baseline,
    /// Regime 2 alone, one MRF pass.
    Balanced,
    /// All available classifiers fused with the given rule, one MRF pass.
    Fused(FusionRule),
    /// Fusion with the configured rule followed by a label-cost pass.
    Full,
}

impl Variant {
    pub const ALL: [Variant; 6] = [
        Variant::Baseline,
        Variant::Balanced,
        Variant::Fused(FusionRule::Nl),
        Variant::Fused(FusionRule::Average),
        Variant::Fused(FusionRule::Median),
        Variant::Full,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Baseline => "baseline",
            Variant::Balanced => "balanced",
            Variant::Fused(FusionRule::Nl) => "fc-nl",
            Variant::Fused(FusionRule::Average) => "fc-average",
            Variant::Fused(FusionRule::Median) => "fc-median",
            Variant::Full => "full",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|v| v.name() == s)
    }
}

/// What happened to one regime during training.
#[derive(Debug, Clone, PartialEq)]
pub struct RegimeReport {
    pub regime: Regime,
    /// Classes the regime covers (empty when skipped).
    pub classes: Vec<usize>,
    pub rows: usize,
    /// Per covered class, the training loss after the prior and each round.
    pub loss_traces: Vec<Vec<f64>>,
    /// Why the regime was not trained, if it was not.
    pub skipped: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub superpixels: usize,
    pub training_rows: usize,
    pub regimes: Vec<RegimeReport>,
}

impl TrainReport {
    /// Rounds (over all regimes and classes) where training loss went up.
    pub fn loss_increases(&self) -> usize {
        self.regimes
            .iter()
            .flat_map(|r| &r.loss_traces)
            .map(|t| t.windows(2).filter(|w| w[1] > w[0]).count())
            .sum()
    }
}

struct Prepared {
    seg: Segmentation,
    gt: GtSuperpixelLabels,
    feats: FeatureMatrix,
}

/// Segments and describes one image.
pub fn featurize(image: &ImageRaster, config: &Config) -> Result<(Segmentation, FeatureMatrix)> {
    let seg = segment(image, &config.segment_params())?;
    let feats = describe(image, &seg)?;
    Ok((seg, feats))
}

/// Trains every model of a bundle from the training split.
pub fn train_pipeline(corpus: &Corpus, config: &Config) -> Result<ModelBundle> {
    train_pipeline_traced(corpus, config).map(|(b, _)| b)
}

/// Like [`train_pipeline`], also reporting per-regime training details.
pub fn train_pipeline_traced(corpus: &Corpus, config: &Config) -> Result<(ModelBundle, TrainReport)> {
    config.validate()?;
    if corpus.train.is_empty() {
        return Err(Error::Empty("training set".into()));
    }
    let c = corpus.num_classes();
    let prepared: Vec<Prepared> = corpus
        .train
        .par_iter()
        .map(|e| {
            let (seg, feats) = featurize(&e.image, config).map_err(|err| err.in_image(&e.id))?;
            let gt = gt_labels(&seg, &e.labels).map_err(|err| err.in_image(&e.id))?;
            Ok(Prepared { seg, gt, feats })
        })
        .collect::<Result<_>>()?;

    let segs: Vec<Segmentation> = prepared.iter().map(|p| p.seg.clone()).collect();
    let gts: Vec<GtSuperpixelLabels> = prepared.iter().map(|p| p.gt.clone()).collect();
    let index = build_label_index(corpus, &segs, &gts)?;

    let dim = feature_spec().dim();
    let all_feats = FeatureMatrix::concat(dim, prepared.iter().map(|p| &p.feats));
    let mut cand = FeatureMatrix::empty(dim);
    let mut cand_labels = Vec::new();
    let mut pairs = Vec::new();
    for p in &prepared {
        for (s, (&l, &purity)) in p.gt.labels.iter().zip(&p.gt.purity).enumerate() {
            if let Some(l) = l.filter(|_| purity >= MIN_TRAIN_PURITY) {
                cand.push_row(p.feats.row(s));
                cand_labels.push(l);
            }
        }
        for &(a, b) in &p.seg.adjacency {
            if let (Some(la), Some(lb)) = (p.gt.labels[a], p.gt.labels[b]) {
                pairs.push((la, lb));
            }
        }
    }
    if cand_labels.is_empty() {
        return Err(Error::Empty("labeled training superpixels".into()));
    }

    let mut models: [Option<_>; CLASSIFIERS] = Default::default();
    let mut regimes = Vec::with_capacity(CLASSIFIERS);
    let params = config.boost_params();
    for regime in Regime::ALL {
        let seed = config.seed.wrapping_add(regime.number() as u64);
        let mut report = RegimeReport {
            regime,
            classes: Vec::new(),
            rows: 0,
            loss_traces: Vec::new(),
            skipped: None,
        };
        match subsample(&index, &cand, &cand_labels, regime, config.x, config.cap, seed) {
            Err(Error::Empty(what)) => report.skipped = Some(format!("empty {what}")),
            Err(e) => return Err(e),
            Ok(ts) => {
                let distinct = ts.classes.iter().filter(|&&k| ts.class_count(k) > 0).count();
                if ts.classes.len() < 2 || distinct < 2 {
                    report.classes = ts.classes;
                    report.skipped = Some("fewer than two classes with samples".into());
                } else {
                    let (model, traces) = train_bdt_traced(&ts, &params)?;
                    report.classes = ts.classes;
                    report.rows = ts.labels.len();
                    report.loss_traces = traces;
                    models[regime.number() as usize - 1] = Some(model);
                }
            }
        }
        regimes.push(report);
    }

    let refs: [Option<&_>; CLASSIFIERS] = std::array::from_fn(|j| models[j].as_ref());
    let weights = learn_weights(refs, &all_feats)?;
    let smoothness = smoothness_from_counts(&pairs, c, config.potts)?;
    let bundle = ModelBundle {
        feature_hash: feature_spec().hash(),
        classes: corpus.classes.clone(),
        models,
        weights,
        smoothness,
        index,
        config: config.clone(),
    };
    bundle.validate()?;
    let report = TrainReport {
        superpixels: all_feats.rows,
        training_rows: cand_labels.len(),
        regimes,
    };
    Ok((bundle, report))
}

/// Both passes over one image.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageParse {
    pub segmentation: Segmentation,
    pub costs: CostField,
    /// Data and smoothness only.
    pub pass1: ParseResult,
    /// Label-cost pass, present for [`Variant::Full`].
    pub pass2: Option<LabelCostPass>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabelCostPass {
    pub neighbors: Vec<Neighbor>,
    pub label_costs: GlobalLabelCosts,
    pub result: ParseResult,
    /// Energy of the pass-1 labeling under the label-cost model.
    pub start_energy: f64,
}

impl ImageParse {
    /// The labeling of the last pass that ran.
    pub fn labels(&self) -> &[usize] {
        match &self.pass2 {
            Some(p) => &p.result.labels,
            None => &self.pass1.labels,
        }
    }

    /// Final labeling expanded to pixels.
    pub fn raster(&self) -> LabelRaster {
        labels_to_raster(&self.segmentation, self.labels())
    }
}

/// Writes superpixel class indices to every member pixel as 1-based ids.
pub fn labels_to_raster(seg: &Segmentation, labels: &[usize]) -> LabelRaster {
    LabelRaster {
        width: seg.width,
        height: seg.height,
        labels: seg.labels.iter().map(|&s| labels[s as usize] as u16 + 1).collect(),
    }
}

/// Combined scores of a variant for the given features.
pub fn variant_scores(bundle: &ModelBundle, feats: &FeatureMatrix, variant: Variant) -> Result<ScoreMatrix> {
    let need = |regime: Regime| {
        bundle
            .model(regime)
            .ok_or_else(|| Error::InvalidArgument(format!("bundle has no regime {} model", regime.tag())))
    };
    match variant {
        Variant::Baseline => score(need(Regime::Unbalanced)?, feats),
        Variant::Balanced => score(need(Regime::BalancedAll)?, feats),
        Variant::Fused(rule) => fused(bundle, feats, rule),
        Variant::Full => fused(bundle, feats, bundle.config.fusion_rule),
    }
}

fn fused(bundle: &ModelBundle, feats: &FeatureMatrix, rule: FusionRule) -> Result<ScoreMatrix> {
    let scores: Vec<Option<ScoreMatrix>> = bundle
        .models
        .iter()
        .map(|m| m.as_ref().map(|m| score(m, feats)).transpose())
        .collect::<Result<_>>()?;
    let refs: [Option<&ScoreMatrix>; CLASSIFIERS] = std::array::from_fn(|j| scores[j].as_ref());
    match rule {
        FusionRule::Nl => combine(&refs, &bundle.weights),
        _ => combine_variant(&refs, rule),
    }
}

/// Parses one image: a data-plus-smoothness pass from the cheapest labeling,
/// then for the full variant a label-cost pass warm-started from the first.
pub fn parse_image(image: &ImageRaster, bundle: &ModelBundle, variant: Variant) -> Result<ImageParse> {
    let config = &bundle.config;
    let (seg, feats) = featurize(image, config)?;
    let costs = data_costs(&variant_scores(bundle, &feats, variant)?)?;
    let base = EnergyModel::new(&costs, &seg.adjacency, &bundle.smoothness, config.lambda, None)?;
    let pass1 = minimize(&base, &costs.argmin())?;

    let pass2 = if variant == Variant::Full {
        let lab = InitialLabeling::new(pass1.labels.clone(), bundle.num_classes())?;
        let weights = initial_label_weights(&lab)?;
        let neighbors = rank_neighbors(&bundle.index, &weights, config.neighbors)?;
        let ids: Vec<usize> = neighbors.iter().map(|n| n.image).collect();
        let label_costs = global_costs(&bundle.index, &ids)?;
        let h = label_costs.mrf_costs();
        let model = EnergyModel {
            label_costs: Some(&h),
            ..base
        };
        let start_energy = energy(&pass1.labels, &model)?.total();
        let result = minimize(&model, &pass1.labels)?;
        Some(LabelCostPass {
            neighbors,
            label_costs,
            result,
            start_energy,
        })
    } else {
        None
    };
    Ok(ImageParse {
        segmentation: seg,
        costs,
        pass1,
        pass2,
    })
}

/// Parses images in parallel, keeping input order.
pub fn parse_all(images: &[(&str, &ImageRaster)], bundle: &ModelBundle, variant: Variant) -> Result<Vec<ImageParse>> {
    images
        .par_iter()
        .map(|(id, im)| parse_image(im, bundle, variant).map_err(|e| e.in_image(*id)))
        .collect()
}

/// Metrics of one variant on the test split.
#[derive(Debug, Clone, PartialEq)]
pub struct VariantResult {
    pub variant: Variant,
    pub metrics: Metrics,
    /// Mean number of distinct labels per image after the first pass.
    pub mean_unique_pass1: f64,
    /// Same after the last pass.
    pub mean_unique_final: f64,
}

/// Parses the test split with a variant and scores it.
pub fn evaluate_variant(corpus: &Corpus, bundle: &ModelBundle, variant: Variant) -> Result<VariantResult> {
    if corpus.test.is_empty() {
        return Err(Error::Empty("test set".into()));
    }
    let images: Vec<(&str, &ImageRaster)> = corpus.test.iter().map(|e| (e.id.as_str(), &e.image)).collect();
    let parses = parse_all(&images, bundle, variant)?;
    let preds: Vec<LabelRaster> = parses.iter().map(ImageParse::raster).collect();
    let gt: Vec<LabelRaster> = corpus.test.iter().map(|e| e.labels.clone()).collect();
    let n = parses.len() as f64;
    Ok(VariantResult {
        variant,
        metrics: evaluate(&preds, &gt, corpus.num_classes())?,
        mean_unique_pass1: parses.iter().map(|p| p.pass1.unique.len() as f64).sum::<f64>() / n,
        mean_unique_final: parses
            .iter()
            .map(|p| p.pass2.as_ref().map_or(&p.pass1, |q| &q.result).unique.len() as f64)
            .sum::<f64>()
            / n,
    })
}
