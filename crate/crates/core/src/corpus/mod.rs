//! Image/label rasters, dataset layout IO, the synthetic scene generator and
//! the training label index.
//!
//! Class ids in [`LabelRaster`] are 1-based with 0 reserved for void. Every
//! other module addresses classes by 0-based index (`id - 1`); void never
//! enters training, prediction or scoring.

mod index;
pub(crate) mod pnm;
mod synth;

use std::fs;
use std::path::Path;

use crate::{Error, Result};

pub use index::{build_label_index, ImageLabelCounts, LabelIndex};
pub use pnm::{decode_pgm, decode_ppm, encode_pgm16, encode_ppm};
pub use synth::{synth_corpus, ClassKind, SynthClass, SynthScene, SynthSpec, SYNTH_SPEC_VERSION};

/// Void / unlabeled ground-truth id.
pub const VOID: u16 = 0;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageRaster {
    pub width: usize,
    pub height: usize,
    /// Row-major RGB.
    pub pixels: Vec<[u8; 3]>,
}

impl ImageRaster {
    pub fn new(width: usize, height: usize, pixels: Vec<[u8; 3]>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidArgument("image dimensions must be >= 1".into()));
        }
        if width * height != pixels.len() {
            return Err(Error::DimensionMismatch {
                what: "image pixel buffer".into(),
                expected: (width, height),
                found: (pixels.len(), 1),
            });
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Self {
        Self::new(width, height, vec![rgb; width * height]).expect("nonzero dims")
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn get(&self, x: usize, y: usize) -> [u8; 3] {
        self.pixels[y * self.width + x]
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelRaster {
    pub width: usize,
    pub height: usize,
    /// Row-major class ids, [`VOID`] for unlabeled.
    pub labels: Vec<u16>,
}

impl LabelRaster {
    pub fn new(width: usize, height: usize, labels: Vec<u16>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidArgument("label dimensions must be >= 1".into()));
        }
        if width * height != labels.len() {
            return Err(Error::DimensionMismatch {
                what: "label buffer".into(),
                expected: (width, height),
                found: (labels.len(), 1),
            });
        }
        Ok(Self {
            width,
            height,
            labels,
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    /// 0-based class index of a pixel, `None` for void.
    pub fn class_at(&self, i: usize) -> Option<usize> {
        match self.labels[i] {
            VOID => None,
            id => Some(id as usize - 1),
        }
    }

    pub fn to_pgm(&self) -> Vec<u8> {
        encode_pgm16(self.width, self.height, &self.labels)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entry {
    /// Basename, stable across save/load.
    pub id: String,
    pub image: ImageRaster,
    pub labels: LabelRaster,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    /// Line k (1-based) of `classes.txt` names class id k.
    pub classes: Vec<String>,
    pub train: Vec<Entry>,
    pub test: Vec<Entry>,
}

impl Corpus {
    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    /// Checks dimensions, label ranges and split disjointness.
    pub fn validate(&self) -> Result<()> {
        let mut seen = std::collections::HashSet::new();
        for e in &self.train {
            seen.insert(e.id.as_str());
        }
        for e in &self.test {
            if seen.contains(e.id.as_str()) {
                return Err(Error::InvalidArgument(format!(
                    "image {} is in both train and test splits",
                    e.id
                )));
            }
        }
        for e in self.train.iter().chain(&self.test) {
            check_entry(e, self.classes.len())?;
        }
        Ok(())
    }
}

fn check_entry(e: &Entry, classes: usize) -> Result<()> {
    if e.image.dims() != e.labels.dims() {
        return Err(Error::DimensionMismatch {
            what: format!("image/label pair {}", e.id),
            expected: e.image.dims(),
            found: e.labels.dims(),
        });
    }
    if let Some(&id) = e.labels.labels.iter().find(|&&l| l as usize > classes) {
        return Err(Error::LabelOutOfRange {
            what: e.id.clone(),
            id,
            classes,
        });
    }
    Ok(())
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let bytes = read(path)?;
    let text = String::from_utf8(bytes)
        .map_err(|_| Error::format(path.display().to_string(), "not UTF-8"))?;
    Ok(text
        .lines()
        .map(|l| l.trim().to_string())
        .filter(|l| !l.is_empty())
        .collect())
}

fn load_split(root: &Path, list: &str, classes: usize) -> Result<Vec<Entry>> {
    read_lines(&root.join(list))?
        .into_iter()
        .map(|id| {
            let img_path = root.join("images").join(format!("{id}.ppm"));
            let lab_path = root.join("labels").join(format!("{id}.pgm"));
            let image = decode_ppm(&read(&img_path)?, &img_path.display().to_string())?;
            let labels = decode_pgm(&read(&lab_path)?, &lab_path.display().to_string())?;
            let entry = Entry { id, image, labels };
            check_entry(&entry, classes)?;
            Ok(entry)
        })
        .collect()
}

/// Loads a dataset directory:
///
/// ```text
/// root/classes.txt      one class name per line, line k = id k
/// root/train.txt        basenames, one per line
/// root/test.txt
/// root/images/<id>.ppm  P6, 8-bit
/// root/labels/<id>.pgm  P5, 16-bit big-endian class ids, 0 = void
/// ```
pub fn load_dataset(root: impl AsRef<Path>) -> Result<Corpus> {
    let root = root.as_ref();
    let classes = read_lines(&root.join("classes.txt"))?;
    if classes.is_empty() {
        return Err(Error::Empty("classes.txt".into()));
    }
    if classes.len() > u16::MAX as usize {
        return Err(Error::InvalidArgument("too many classes for 16-bit ids".into()));
    }
    let train = load_split(root, "train.txt", classes.len())?;
    let test = load_split(root, "test.txt", classes.len())?;
    let corpus = Corpus {
        classes,
        train,
        test,
    };
    corpus.validate()?;
    Ok(corpus)
}

/// Writes `corpus` in the layout read by [`load_dataset`].
pub fn save_dataset(corpus: &Corpus, root: impl AsRef<Path>) -> Result<()> {
    let root = root.as_ref();
    let write = |path: &Path, bytes: &[u8]| fs::write(path, bytes).map_err(|e| Error::io(path, e));
    for dir in ["images", "labels"] {
        let d = root.join(dir);
        fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
    }
    let mut classes = corpus.classes.join("\n");
    classes.push('\n');
    write(&root.join("classes.txt"), classes.as_bytes())?;
    for (list, entries) in [("train.txt", &corpus.train), ("test.txt", &corpus.test)] {
        let mut names = String::new();
        for e in entries {
            names.push_str(&e.id);
            names.push('\n');
            write(
                &root.join("images").join(format!("{}.ppm", e.id)),
                &encode_ppm(&e.image),
            )?;
            write(
                &root.join("labels").join(format!("{}.pgm", e.id)),
                &e.labels.to_pgm(),
            )?;
        }
        write(&root.join(list), names.as_bytes())?;
    }
    Ok(())
}
