use std::path::Path;

use crate::boost::{BdtModel, Regime};
use crate::codec::{Reader, Writer};
use crate::corpus::{ImageLabelCounts, LabelIndex};
use crate::features::feature_spec;
use crate::fusion::{FusionWeights, CLASSIFIERS};
use crate::mrf::SmoothnessMatrix;
use crate::{Error, Result};

use super::Config;

pub const BUNDLE_VERSION: u32 = 1;
const MAGIC: &[u8; 4] = b"PRSM";

/// Everything needed to parse a test image.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelBundle {
    pub feature_hash: u64,
    pub classes: Vec<String>,
    /// Regimes 1 to 4 in order; `None` when a regime had nothing to train on.
    pub models: [Option<BdtModel>; CLASSIFIERS],
    pub weights: FusionWeights,
    pub smoothness: SmoothnessMatrix,
    pub index: LabelIndex,
    pub config: Config,
}

impl ModelBundle {
    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn model(&self, regime: Regime) -> Option<&BdtModel> {
        self.models[regime.number() as usize - 1].as_ref()
    }

    /// Checks that all members agree on the class count and feature spec.
    pub fn validate(&self) -> Result<()> {
        let c = self.num_classes();
        let bad = |d: String| Err(Error::format("model bundle", d));
        for (j, m) in self.models.iter().enumerate() {
            let Some(m) = m else { continue };
            if m.feature_hash != self.feature_hash {
                return Err(Error::FeatureHash {
                    expected: self.feature_hash,
                    found: m.feature_hash,
                });
            }
            if m.num_classes != c || m.regime.number() as usize != j + 1 {
                return bad(format!("model {} does not match its slot", j + 1));
            }
        }
        if self.models.iter().all(Option::is_none) {
            return bad("no classifiers".into());
        }
        if self.weights.num_classes != c
            || self.smoothness.num_classes != c
            || self.index.num_classes != c
        {
            return bad(format!("members disagree on the class count {c}"));
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.bytes(MAGIC);
        w.u32(BUNDLE_VERSION);
        w.u64(self.feature_hash);
        w.len_prefixed(self.config.to_text().as_bytes());
        w.u64(self.classes.len() as u64);
        for name in &self.classes {
            w.len_prefixed(name.as_bytes());
        }
        for m in &self.models {
            match m {
                Some(m) => {
                    w.u8(1);
                    w.len_prefixed(&m.to_bytes());
                }
                None => w.u8(0),
            }
        }
        for wj in &self.weights.w {
            for &v in wj {
                w.f64(v);
            }
        }
        for &v in &self.smoothness.v {
            w.f64(v);
        }
        w.u64(self.index.images.len() as u64);
        for im in &self.index.images {
            w.len_prefixed(im.id.as_bytes());
            for &n in &im.counts {
                w.u32(n);
            }
            w.u32(im.void);
        }
        for &o in &self.index.occupancy {
            w.f64(o);
        }
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes, "model bundle");
        r.magic(MAGIC)?;
        let version = r.u32()?;
        if version != BUNDLE_VERSION {
            return Err(Error::Version {
                what: "model bundle".into(),
                expected: BUNDLE_VERSION,
                found: version,
            });
        }
        let feature_hash = r.u64()?;
        let expected = feature_spec().hash();
        if feature_hash != expected {
            return Err(Error::FeatureHash {
                expected,
                found: feature_hash,
            });
        }
        let text = |b: &[u8]| {
            String::from_utf8(b.to_vec()).map_err(|_| Error::format("model bundle", "invalid UTF-8"))
        };
        let config = Config::parse(&text(r.len_prefixed()?)?)?;
        let c = r.count(8)?;
        let classes = (0..c)
            .map(|_| text(r.len_prefixed()?))
            .collect::<Result<Vec<_>>>()?;
        let mut models: [Option<BdtModel>; CLASSIFIERS] = Default::default();
        for slot in models.iter_mut() {
            *slot = match r.u8()? {
                0 => None,
                1 => Some(BdtModel::from_bytes(r.len_prefixed()?)?),
                t => return Err(Error::format("model bundle", format!("bad model tag {t}"))),
            };
        }
        let mut weights = FusionWeights {
            num_classes: c,
            w: Default::default(),
        };
        for wj in weights.w.iter_mut() {
            *wj = (0..c).map(|_| r.f64()).collect::<Result<_>>()?;
        }
        let smoothness = SmoothnessMatrix {
            num_classes: c,
            v: (0..c * c).map(|_| r.f64()).collect::<Result<_>>()?,
        };
        let n = r.count(8 + 4 * (c + 1))?;
        let mut images = Vec::with_capacity(n);
        for _ in 0..n {
            let id = text(r.len_prefixed()?)?;
            let counts = (0..c).map(|_| r.u32()).collect::<Result<_>>()?;
            images.push(ImageLabelCounts {
                id,
                counts,
                void: r.u32()?,
            });
        }
        let occupancy = (0..c).map(|_| r.f64()).collect::<Result<_>>()?;
        r.expect_end()?;
        let bundle = Self {
            feature_hash,
            classes,
            models,
            weights,
            smoothness,
            index: LabelIndex::from_parts(c, images, occupancy)?,
            config,
        };
        bundle.validate()?;
        Ok(bundle)
    }
}

pub fn save_bundle(bundle: &ModelBundle, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, bundle.to_bytes()).map_err(|e| Error::io(path, e))
}

pub fn load_bundle(path: impl AsRef<Path>) -> Result<ModelBundle> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    ModelBundle::from_bytes(&bytes)
}
