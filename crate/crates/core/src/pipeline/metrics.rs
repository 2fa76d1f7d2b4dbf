use std::fmt::Write as _;

use crate::corpus::LabelRaster;
use crate::{Error, Result};

/// Pixel counts and recall of one class.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassStat {
    pub class: usize,
    /// Ground-truth pixels of the class.
    pub pixels: u64,
    pub correct: u64,
    /// `None` when the class never occurs in the ground truth.
    pub recall: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    pub num_classes: usize,
    pub per_pixel: f64,
    /// Mean recall over the classes present in the ground truth.
    pub per_class: f64,
    /// One entry per class, in class order.
    pub classes: Vec<ClassStat>,
    /// Row-major `[truth][prediction]` pixel counts. Predictions outside the
    /// class range count as wrong and appear in no column.
    pub confusion: Vec<u64>,
}

impl Metrics {
    pub fn confusion_at(&self, truth: usize, pred: usize) -> u64 {
        self.confusion[truth * self.num_classes + pred]
    }

    /// Classes sorted from most to least frequent (ties by class id).
    pub fn by_frequency(&self) -> Vec<&ClassStat> {
        let mut v: Vec<&ClassStat> = self.classes.iter().collect();
        v.sort_by(|a, b| b.pixels.cmp(&a.pixels).then(a.class.cmp(&b.class)));
        v
    }

    /// Human-readable summary plus the frequency-ordered class table.
    pub fn table(&self, names: &[String]) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "per-pixel accuracy: {:.4}", self.per_pixel);
        let _ = writeln!(s, "per-class accuracy: {:.4}", self.per_class);
        let _ = writeln!(s, "{:<16} {:>10} {:>8}", "class", "pixels", "recall");
        for st in self.by_frequency() {
            let recall = st.recall.map_or("-".to_string(), |r| format!("{r:.4}"));
            let _ = writeln!(s, "{:<16} {:>10} {:>8}", class_name(names, st.class), st.pixels, recall);
        }
        s
    }

    /// `class,pixels,correct,recall` rows in frequency order.
    pub fn class_csv(&self, names: &[String]) -> String {
        let mut s = String::from("class,pixels,correct,recall\n");
        for st in self.by_frequency() {
            let recall = st.recall.map_or(String::new(), |r| format!("{r}"));
            let _ = writeln!(s, "{},{},{},{}", class_name(names, st.class), st.pixels, st.correct, recall);
        }
        s
    }

    /// Confusion matrix with a header row of predicted class names.
    pub fn confusion_csv(&self, names: &[String]) -> String {
        let c = self.num_classes;
        let mut s = String::from("truth\\pred");
        for p in 0..c {
            let _ = write!(s, ",{}", class_name(names, p));
        }
        s.push('\n');
        for t in 0..c {
            s.push_str(&class_name(names, t));
            for p in 0..c {
                let _ = write!(s, ",{}", self.confusion_at(t, p));
            }
            s.push('\n');
        }
        s
    }
}

fn class_name(names: &[String], class: usize) -> String {
    names.get(class).cloned().unwrap_or_else(|| format!("class{}", class + 1))
}

/// Pixel-level accuracy of predicted label rasters against ground truth.
/// Void ground-truth pixels are ignored.
pub fn evaluate(
    predictions: &[LabelRaster],
    gt: &[LabelRaster],
    num_classes: usize,
) -> Result<Metrics> {
    if predictions.len() != gt.len() {
        return Err(Error::InvalidArgument(format!(
            "{} predictions for {} ground-truth images",
            predictions.len(),
            gt.len()
        )));
    }
    let c = num_classes;
    let mut confusion = vec![0u64; c * c];
    let mut pixels = vec![0u64; c];
    let mut correct = vec![0u64; c];
    for (i, (p, g)) in predictions.iter().zip(gt).enumerate() {
        if p.dims() != g.dims() {
            return Err(Error::DimensionMismatch {
                what: format!("prediction {i} vs ground truth"),
                expected: g.dims(),
                found: p.dims(),
            });
        }
        for (px, (&pl, &gl)) in p.labels.iter().zip(&g.labels).enumerate() {
            let Some(t) = g.class_at(px) else { continue };
            if t >= c {
                return Err(Error::LabelOutOfRange {
                    what: format!("ground truth {i}"),
                    id: gl,
                    classes: c,
                });
            }
            pixels[t] += 1;
            if let Some(q) = p.class_at(px).filter(|&q| q < c) {
                confusion[t * c + q] += 1;
                if q == t {
                    correct[t] += 1;
                }
            } else if pl as usize > c {
                return Err(Error::LabelOutOfRange {
                    what: format!("prediction {i}"),
                    id: pl,
                    classes: c,
                });
            }
        }
    }
    let total: u64 = pixels.iter().sum();
    if total == 0 {
        return Err(Error::Empty("labeled ground-truth pixels".into()));
    }
    let classes: Vec<ClassStat> = (0..c)
        .map(|k| ClassStat {
            class: k,
            pixels: pixels[k],
            correct: correct[k],
            recall: (pixels[k] > 0).then(|| correct[k] as f64 / pixels[k] as f64),
        })
        .collect();
    let recalls: Vec<f64> = classes.iter().filter_map(|s| s.recall).collect();
    Ok(Metrics {
        num_classes: c,
        per_pixel: correct.iter().sum::<u64>() as f64 / total as f64,
        per_class: recalls.iter().sum::<f64>() / recalls.len() as f64,
        classes,
        confusion,
    })
}
