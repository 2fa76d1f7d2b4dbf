//! Deterministic synthetic scene corpora.
//!
//! A spec is a flat `key = value` text file. `class` and `scene` keys repeat;
//! class ids follow the order of the `class` lines.
//!
//! ```text
//! version = 1
//! width = 64
//! height = 64
//! train = 200
//! test = 50
//! fg_prob = 0.6          # chance each foreground class of a scene appears
//! illumination = 0.1     # per-image brightness jitter, relative
//! class = sky background 120 170 225 std=10 stripe=0
//! class = person foreground 150 100 90 std=20 stripe=12 frac=0.04
//! scene = street : sky building road : person car
//! ```
//!
//! Background classes of a scene are stacked top to bottom as wavy bands.
//! Each foreground class is an elliptical blob whose area is `frac` of the
//! image (±20%). Pixel colors are the class mean scaled by the image
//! brightness, plus an oriented sinusoidal texture of amplitude `stripe` and
//! Gaussian noise of deviation `std`.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::{Error, Result};

use super::{Corpus, Entry, ImageRaster, LabelRaster};

pub const SYNTH_SPEC_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClassKind {
    Background,
    Foreground,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthClass {
    pub name: String,
    pub kind: ClassKind,
    pub color: [f64; 3],
    pub std: f64,
    pub stripe: f64,
    /// Target image fraction of one blob (foreground only).
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthScene {
    pub name: String,
    /// Class indices, top band first.
    pub backgrounds: Vec<usize>,
    pub foregrounds: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub width: usize,
    pub height: usize,
    pub train: usize,
    pub test: usize,
    pub fg_prob: f64,
    pub illumination: f64,
    pub classes: Vec<SynthClass>,
    pub scenes: Vec<SynthScene>,
}

const STANDARD_SPEC: &str = "\
# Standard benchmark: 3 background and 5 rare foreground classes.
# Backgrounds are desaturated; foregrounds are vivid. Two pairs of
# foreground classes share an appearance (person/sign, car/window) and
# are told apart only by the scenes they occur in.
version = 1
width = 64
height = 64
train = 200
test = 50
fg_prob = 0.8
illumination = 0.12
class = sky background 150 160 175 std=8 stripe=0
class = building background 140 130 120 std=10 stripe=8
class = road background 105 105 105 std=8 stripe=3
class = person foreground 200 60 50 std=14 stripe=0 frac=0.02
class = car foreground 50 80 200 std=14 stripe=4 frac=0.035
class = sign foreground 200 60 50 std=14 stripe=0 frac=0.02
class = window foreground 50 80 200 std=14 stripe=4 frac=0.035
class = tree foreground 60 170 60 std=14 stripe=10 frac=0.025
scene = street : building road : person car
scene = highway : sky road : sign tree
scene = facade : sky building : person window
";

impl SynthSpec {
    /// The benchmark corpus: 8 classes, 200 train / 50 test images of 64x64.
    pub fn standard() -> Self {
        Self::parse(STANDARD_SPEC).expect("built-in spec parses")
    }

    pub fn parse(text: &str) -> Result<Self> {
        let bad = |detail: String| Error::format("synthetic spec", detail);
        let mut version = None;
        let mut width = 64;
        let mut height = 64;
        let mut train = 0;
        let mut test = 0;
        let mut fg_prob = 0.6;
        let mut illumination = 0.0;
        let mut classes: Vec<SynthClass> = Vec::new();
        let mut scene_lines = Vec::new();

        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| bad(format!("line {}: expected key = value", lineno + 1)))?;
            let num = |v: &str| -> Result<f64> {
                v.parse::<f64>()
                    .map_err(|_| bad(format!("line {}: bad number {v:?}", lineno + 1)))
            };
            let int = |v: &str| -> Result<usize> {
                v.parse::<usize>()
                    .map_err(|_| bad(format!("line {}: bad integer {v:?}", lineno + 1)))
            };
            match key {
                "version" => version = Some(int(value)? as u32),
                "width" => width = int(value)?,
                "height" => height = int(value)?,
                "train" => train = int(value)?,
                "test" => test = int(value)?,
                "fg_prob" => fg_prob = num(value)?,
                "illumination" => illumination = num(value)?,
                "class" => {
                    let toks: Vec<&str> = value.split_whitespace().collect();
                    if toks.len() < 5 {
                        return Err(bad(format!(
                            "line {}: class needs name, kind and r g b",
                            lineno + 1
                        )));
                    }
                    let kind = match toks[1] {
                        "background" => ClassKind::Background,
                        "foreground" => ClassKind::Foreground,
                        k => return Err(bad(format!("line {}: unknown kind {k}", lineno + 1))),
                    };
                    let mut class = SynthClass {
                        name: toks[0].to_string(),
                        kind,
                        color: [num(toks[2])?, num(toks[3])?, num(toks[4])?],
                        std: 0.0,
                        stripe: 0.0,
                        fraction: 0.0,
                    };
                    for opt in &toks[5..] {
                        let (k, v) = opt
                            .split_once('=')
                            .ok_or_else(|| bad(format!("line {}: bad option {opt}", lineno + 1)))?;
                        match k {
                            "std" => class.std = num(v)?,
                            "stripe" => class.stripe = num(v)?,
                            "frac" => class.fraction = num(v)?,
                            _ => return Err(bad(format!("line {}: unknown option {k}", lineno + 1))),
                        }
                    }
                    classes.push(class);
                }
                "scene" => scene_lines.push((lineno + 1, value.to_string())),
                _ => return Err(bad(format!("line {}: unknown key {key}", lineno + 1))),
            }
        }
        match version {
            Some(SYNTH_SPEC_VERSION) => {}
            Some(v) => {
                return Err(Error::Version {
                    what: "synthetic spec".into(),
                    expected: SYNTH_SPEC_VERSION,
                    found: v,
                })
            }
            None => return Err(bad("missing version".into())),
        }

        let lookup = |name: &str, lineno: usize| -> Result<usize> {
            classes
                .iter()
                .position(|c| c.name == name)
                .ok_or_else(|| bad(format!("line {lineno}: unknown class {name}")))
        };
        let mut scenes = Vec::new();
        for (lineno, value) in scene_lines {
            let parts: Vec<&str> = value.split(':').collect();
            if parts.len() != 3 {
                return Err(bad(format!(
                    "line {lineno}: scene = name : backgrounds : foregrounds"
                )));
            }
            let names = |s: &str| -> Result<Vec<usize>> {
                s.split_whitespace().map(|n| lookup(n, lineno)).collect()
            };
            scenes.push(SynthScene {
                name: parts[0].trim().to_string(),
                backgrounds: names(parts[1])?,
                foregrounds: names(parts[2])?,
            });
        }
        let spec = Self {
            width,
            height,
            train,
            test,
            fg_prob,
            illumination,
            classes,
            scenes,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |d: &str| Err(Error::InvalidArgument(format!("synthetic spec: {d}")));
        if self.classes.is_empty() {
            return bad("zero classes");
        }
        if self.train + self.test == 0 {
            return bad("zero images");
        }
        if self.width == 0 || self.height == 0 {
            return bad("zero image size");
        }
        if self.scenes.is_empty() {
            return bad("no scenes");
        }
        if !(0.0..=1.0).contains(&self.fg_prob) || !(0.0..1.0).contains(&self.illumination) {
            return bad("fg_prob must be in [0,1] and illumination in [0,1)");
        }
        for c in &self.classes {
            if c.kind == ClassKind::Foreground && !(c.fraction > 0.0 && c.fraction < 1.0) {
                return bad("foreground frac must be in (0,1)");
            }
            if c.std < 0.0 {
                return bad("negative std");
            }
        }
        for s in &self.scenes {
            if s.backgrounds.is_empty() {
                return bad("scene without background classes");
            }
            let kind_ok = s
                .backgrounds
                .iter()
                .all(|&c| self.classes[c].kind == ClassKind::Background)
                && s.foregrounds
                    .iter()
                    .all(|&c| self.classes[c].kind == ClassKind::Foreground);
            if !kind_ok {
                return bad("scene lists a class under the wrong kind");
            }
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "version = {SYNTH_SPEC_VERSION}");
        let _ = writeln!(out, "width = {}", self.width);
        let _ = writeln!(out, "height = {}", self.height);
        let _ = writeln!(out, "train = {}", self.train);
        let _ = writeln!(out, "test = {}", self.test);
        let _ = writeln!(out, "fg_prob = {}", self.fg_prob);
        let _ = writeln!(out, "illumination = {}", self.illumination);
        for c in &self.classes {
            let kind = match c.kind {
                ClassKind::Background => "background",
                ClassKind::Foreground => "foreground",
            };
            let _ = write!(
                out,
                "class = {} {kind} {} {} {} std={} stripe={}",
                c.name, c.color[0], c.color[1], c.color[2], c.std, c.stripe
            );
            if c.kind == ClassKind::Foreground {
                let _ = write!(out, " frac={}", c.fraction);
            }
            out.push('\n');
        }
        let names = |ids: &[usize]| {
            ids.iter()
                .map(|&i| self.classes[i].name.as_str())
                .collect::<Vec<_>>()
                .join(" ")
        };
        for s in &self.scenes {
            let _ = writeln!(
                out,
                "scene = {} : {} : {}",
                s.name,
                names(&s.backgrounds),
                names(&s.foregrounds)
            );
        }
        out
    }
}

/// Generates a corpus; identical `(spec, seed)` give identical corpora.
pub fn synth_corpus(spec: &SynthSpec, seed: u64) -> Result<Corpus> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let make = |prefix: &str, n: usize, rng: &mut ChaCha8Rng| -> Vec<Entry> {
        (0..n)
            .map(|i| {
                let (image, labels) = synth_image(spec, rng);
                Entry {
                    id: format!("{prefix}_{i:04}"),
                    image,
                    labels,
                }
            })
            .collect()
    };
    let train = make("train", spec.train, &mut rng);
    let test = make("test", spec.test, &mut rng);
    Ok(Corpus {
        classes: spec.classes.iter().map(|c| c.name.clone()).collect(),
        train,
        test,
    })
}

fn synth_image(spec: &SynthSpec, rng: &mut ChaCha8Rng) -> (ImageRaster, LabelRaster) {
    let (w, h) = (spec.width, spec.height);
    let scene = &spec.scenes[rng.random_range(0..spec.scenes.len())];
    let mut class_map = vec![0usize; w * h];

    // wavy horizontal bands
    let nb = scene.backgrounds.len();
    let mut bounds: Vec<Vec<f64>> = Vec::with_capacity(nb.saturating_sub(1));
    for b in 1..nb {
        let band = h as f64 / nb as f64;
        let base = band * b as f64 + rng.random_range(-0.25..=0.25) * band;
        let amp = rng.random_range(1.0..=(h as f64 / 12.0).max(1.0));
        let freq = rng.random_range(0.5..2.0);
        let phase = rng.random_range(0.0..2.0 * PI);
        bounds.push(
            (0..w)
                .map(|x| base + amp * (2.0 * PI * freq * x as f64 / w as f64 + phase).sin())
                .collect(),
        );
    }
    for y in 0..h {
        for x in 0..w {
            let band = bounds.iter().filter(|b| (y as f64) >= b[x]).count();
            class_map[y * w + x] = scene.backgrounds[band.min(nb - 1)];
        }
    }

    // foreground blobs
    let mut is_fg = vec![false; w * h];
    for &fg in &scene.foregrounds {
        if !rng.random_bool(spec.fg_prob) {
            continue;
        }
        let area = spec.classes[fg].fraction * (w * h) as f64 * rng.random_range(0.8..1.2);
        let ratio = rng.random_range(-0.5f64..0.5).exp();
        let ry = (area / (PI * ratio)).sqrt().max(0.5);
        let rx = (ratio * ry).max(0.5);
        let mut best: Option<(f64, f64, usize)> = None;
        for _ in 0..12 {
            let cx = rng.random_range(rx.min(w as f64 / 2.0)..=(w as f64 - rx).max(w as f64 / 2.0));
            let cy = rng.random_range(ry.min(h as f64 / 2.0)..=(h as f64 - ry).max(h as f64 / 2.0));
            let overlap = ellipse_pixels(w, h, cx, cy, rx, ry)
                .filter(|&i| is_fg[i])
                .count();
            if best.is_none_or(|(_, _, o)| overlap < o) {
                best = Some((cx, cy, overlap));
            }
            if overlap == 0 {
                break;
            }
        }
        let (cx, cy, _) = best.unwrap();
        for i in ellipse_pixels(w, h, cx, cy, rx, ry) {
            class_map[i] = fg;
            is_fg[i] = true;
        }
    }

    // appearance
    let gain = 1.0 + rng.random_range(-1.0..=1.0) * spec.illumination;
    let phases: Vec<f64> = spec
        .classes
        .iter()
        .map(|_| rng.random_range(0.0..2.0 * PI))
        .collect();
    let unit = Normal::new(0.0, 1.0).unwrap();
    let mut pixels = Vec::with_capacity(w * h);
    for (i, &c) in class_map.iter().enumerate() {
        let class = &spec.classes[c];
        let (x, y) = ((i % w) as f64, (i / w) as f64);
        let theta = 0.7 * c as f64;
        let tex = class.stripe
            * (2.0 * PI * (x * theta.cos() + y * theta.sin()) / 6.0 + phases[c]).sin();
        let mut px = [0u8; 3];
        for (ch, out) in px.iter_mut().enumerate() {
            let v = class.color[ch] * gain + tex + class.std * unit.sample(rng);
            *out = v.round().clamp(0.0, 255.0) as u8;
        }
        pixels.push(px);
    }
    let labels = class_map.iter().map(|&c| (c + 1) as u16).collect();
    (
        ImageRaster::new(w, h, pixels).unwrap(),
        LabelRaster::new(w, h, labels).unwrap(),
    )
}

fn ellipse_pixels(
    w: usize,
    h: usize,
    cx: f64,
    cy: f64,
    rx: f64,
    ry: f64,
) -> impl Iterator<Item = usize> {
    (0..w * h).filter(move |&i| {
        let dx = ((i % w) as f64 + 0.5 - cx) / rx;
        let dy = ((i / w) as f64 + 0.5 - cy) / ry;
        dx * dx + dy * dy <= 1.0
    })
}
