use std::fmt::Write as _;

use crate::boost::BoostParams;
use crate::fusion::FusionRule;
use crate::segment::SegmentParams;
use crate::{Error, Result};

/// Every tunable of training and parsing. Text form is flat `key = value`.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub k: f64,
    pub min_size: usize,
    pub sigma: f64,
    pub trees: usize,
    pub depth: usize,
    pub shrinkage: f64,
    /// Per-class sample cap of the balanced regimes.
    pub cap: usize,
    /// Occupancy bound (percent) of the rare-class regimes.
    pub x: f64,
    pub lambda: f64,
    pub potts: f64,
    /// Neighbor images used for global label costs.
    pub neighbors: usize,
    pub fusion_rule: FusionRule,
    pub seed: u64,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            k: 100.0,
            min_size: 20,
            sigma: 0.5,
            trees: 400,
            depth: 4,
            shrinkage: 0.1,
            cap: 2000,
            x: 5.0,
            lambda: 1.0,
            potts: 0.5,
            neighbors: 64,
            fusion_rule: FusionRule::Nl,
            seed: 0,
        }
    }
}

/// Superpixels whose majority label covers less than this share of their
/// labeled pixels are left out of classifier training.
pub const MIN_TRAIN_PURITY: f64 = 0.5;

impl Config {
    /// Settings for the standard synthetic benchmark (200 training images).
    ///
    /// The neighbor count is scaled to the corpus size, and the pairwise
    /// weight to the range of the fused costs, which lie in (0, 1) while
    /// learned smoothness penalties are several units.
    pub fn benchmark() -> Self {
        Self {
            trees: 200,
            cap: 100,
            neighbors: 8,
            lambda: 0.03,
            ..Self::default()
        }
    }

    pub fn segment_params(&self) -> SegmentParams {
        SegmentParams {
            k: self.k,
            min_size: self.min_size,
            sigma: self.sigma,
        }
    }

    pub fn boost_params(&self) -> BoostParams {
        BoostParams {
            trees: self.trees,
            depth: self.depth,
            shrinkage: self.shrinkage,
        }
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "k = {}", self.k);
        let _ = writeln!(s, "min_size = {}", self.min_size);
        let _ = writeln!(s, "sigma = {}", self.sigma);
        let _ = writeln!(s, "trees = {}", self.trees);
        let _ = writeln!(s, "depth = {}", self.depth);
        let _ = writeln!(s, "shrinkage = {}", self.shrinkage);
        let _ = writeln!(s, "cap = {}", self.cap);
        let _ = writeln!(s, "x = {}", self.x);
        let _ = writeln!(s, "lambda = {}", self.lambda);
        let _ = writeln!(s, "potts = {}", self.potts);
        let _ = writeln!(s, "K = {}", self.neighbors);
        let _ = writeln!(s, "fusion_rule = {}", self.fusion_rule.name());
        let _ = writeln!(s, "seed = {}", self.seed);
        s
    }

    /// Parses `key = value` lines over the defaults. `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let bad = |d: &str| Error::format("config", format!("line {}: {d}", n + 1));
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| bad("expected key = value"))?;
            let f = || value.parse::<f64>().map_err(|_| bad("bad number"));
            let u = || value.parse::<usize>().map_err(|_| bad("bad integer"));
            match key {
                "k" => cfg.k = f()?,
                "min_size" => cfg.min_size = u()?,
                "sigma" => cfg.sigma = f()?,
                "trees" => cfg.trees = u()?,
                "depth" => cfg.depth = u()?,
                "shrinkage" => cfg.shrinkage = f()?,
                "cap" => cfg.cap = u()?,
                "x" => cfg.x = f()?,
                "lambda" => cfg.lambda = f()?,
                "potts" => cfg.potts = f()?,
                "K" => cfg.neighbors = u()?,
                "fusion_rule" => {
                    cfg.fusion_rule =
                        FusionRule::parse(value).ok_or_else(|| bad("fusion_rule is nl|average|median"))?
                }
                "seed" => cfg.seed = value.parse().map_err(|_| bad("bad seed"))?,
                _ => return Err(bad(&format!("unknown key {key}"))),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.k > 0.0
            && self.min_size >= 1
            && self.sigma >= 0.0
            && self.shrinkage >= 0.0
            && self.cap >= 1
            && self.x > 0.0
            && self.lambda >= 0.0
            && self.potts >= 0.0
            && self.neighbors >= 1;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid config: {self:?}")))
        }
    }
}
