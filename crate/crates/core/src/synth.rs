//! Seeded, degradable stand-ins for trained segmentation models.
//!
//! A synthetic predictor corrupts the ground truth. Its per-pixel flip
//! probability grows linearly with the noise severity of the cell being
//! evaluated:
//!
//! `p_eff = clamp(base_flip_prob + noise_sensitivity[family] * sigma, 0, 0.5)`
//!
//! Flip draws depend only on the predictor seed and pixel index, never on
//! the noise cell, so the set of flipped pixels grows monotonically with
//! `p_eff` (paired seeds across severity levels).

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::connected_components;
use crate::error::{Error, Result};
use crate::mask::{LabelMask, IGNORE};
use crate::noise::{NoiseFamily, NoiseSpec};
use crate::rng::{derive_seed, global_rng, pixel_rng};

/// Largest effective flip probability, just below one half.
pub const MAX_FLIP_PROB: f64 = 0.499_999_999;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sensitivity {
    #[serde(default)]
    pub gaussian: f64,
    #[serde(default)]
    pub salt_pepper: f64,
    #[serde(default)]
    pub speckle: f64,
}

impl Sensitivity {
    pub fn uniform(s: f64) -> Self {
        Self {
            gaussian: s,
            salt_pepper: s,
            speckle: s,
        }
    }

    pub fn get(&self, family: NoiseFamily) -> f64 {
        match family {
            NoiseFamily::Gaussian => self.gaussian,
            NoiseFamily::SaltPepper => self.salt_pepper,
            NoiseFamily::Speckle => self.speckle,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StructuredMode {
    Dilate,
    Erode,
    DropComponent,
}

/// Error structure layered under the i.i.d. flips.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Structure {
    #[default]
    Iid,
    Dilate {
        radius: u32,
        target_class: u8,
    },
    Erode {
        radius: u32,
        target_class: u8,
    },
    DropComponent {
        fraction: f64,
        target_class: u8,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictorSpec {
    pub name: String,
    #[serde(default)]
    pub base_flip_prob: f64,
    #[serde(default)]
    pub noise_sensitivity: Sensitivity,
    #[serde(default)]
    pub structure: Structure,
    #[serde(default)]
    pub seed: u64,
}

impl PredictorSpec {
    pub fn iid(name: impl Into<String>, base_flip_prob: f64, seed: u64) -> Self {
        Self {
            name: name.into(),
            base_flip_prob,
            noise_sensitivity: Sensitivity::default(),
            structure: Structure::Iid,
            seed,
        }
    }

    pub fn with_sensitivity(mut self, s: Sensitivity) -> Self {
        self.noise_sensitivity = s;
        self
    }

    pub fn with_structure(mut self, s: Structure) -> Self {
        self.structure = s;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.base_flip_prob) {
            return Err(Error::InvalidConfig(format!(
                "{}: base_flip_prob must be in [0, 1), got {}",
                self.name, self.base_flip_prob
            )));
        }
        let s = self.noise_sensitivity;
        if [s.gaussian, s.salt_pepper, s.speckle]
            .iter()
            .any(|v| !(v.is_finite() && *v >= 0.0))
        {
            return Err(Error::InvalidConfig(format!(
                "{}: noise sensitivities must be non-negative",
                self.name
            )));
        }
        match self.structure {
            Structure::Dilate { radius, .. } | Structure::Erode { radius, .. } if radius == 0 => {
                Err(Error::InvalidConfig(format!(
                    "{}: radius must be at least 1",
                    self.name
                )))
            }
            Structure::DropComponent { fraction, .. } if !(fraction > 0.0 && fraction <= 1.0) => {
                Err(Error::InvalidConfig(format!(
                    "{}: drop fraction must be in (0, 1], got {fraction}",
                    self.name
                )))
            }
            _ => Ok(()),
        }
    }

    /// Flip probability under `noise` (or the clean baseline when `None`).
    pub fn effective_flip_prob(&self, noise: Option<&NoiseSpec>) -> f64 {
        let extra = noise.map_or(0.0, |n| self.noise_sensitivity.get(n.family) * n.sigma);
        (self.base_flip_prob + extra).clamp(0.0, MAX_FLIP_PROB)
    }
}

/// Each non-ignore pixel keeps its label with probability `1 - p`, else
/// takes a uniformly random different label. With a single class there is
/// no other label and pixels are kept.
pub fn corrupt_iid(gt: &LabelMask, p: f64, seed: u64) -> Result<LabelMask> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::InvalidParameter(format!(
            "flip probability must be in [0, 1), got {p}"
        )));
    }
    let k = gt.num_classes();
    let labels = gt
        .labels()
        .iter()
        .enumerate()
        .map(|(i, &l)| {
            if l == IGNORE || k < 2 {
                return l;
            }
            let mut rng = pixel_rng(seed, i as u64);
            let u: f64 = rng.random();
            if u >= p {
                return l;
            }
            let r = rng.random_range(0..k as u8 - 1);
            if r >= l {
                r + 1
            } else {
                r
            }
        })
        .collect();
    LabelMask::new(gt.width(), gt.height(), labels, k)
}

/// Magnitude of a structured corruption.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Magnitude {
    Radius(u32),
    Fraction(f64),
}

pub fn corrupt_structured(
    gt: &LabelMask,
    mode: StructuredMode,
    magnitude: Magnitude,
    target_class: u8,
    seed: u64,
) -> Result<LabelMask> {
    if target_class as usize >= gt.num_classes() {
        return Err(Error::ClassOutOfRange {
            label: target_class,
            num_classes: gt.num_classes(),
        });
    }
    match (mode, magnitude) {
        (StructuredMode::Dilate, Magnitude::Radius(r)) if r >= 1 => Ok(dilate(gt, target_class, r)),
        (StructuredMode::Erode, Magnitude::Radius(r)) if r >= 1 => Ok(erode(gt, target_class, r)),
        (StructuredMode::DropComponent, Magnitude::Fraction(f)) if f > 0.0 && f <= 1.0 => {
            Ok(drop_components(gt, target_class, f, seed))
        }
        (mode, magnitude) => Err(Error::InvalidParameter(format!(
            "invalid magnitude {magnitude:?} for {mode:?}"
        ))),
    }
}

/// Synthetic prediction for `gt` under an optional noise cell.
pub fn predict(
    spec: &PredictorSpec,
    gt: &LabelMask,
    noise: Option<&NoiseSpec>,
) -> Result<LabelMask> {
    predict_seeded(spec, gt, noise, spec.seed)
}

/// As [`predict`] with an explicit seed, used to give each dataset entry
/// its own stream.
pub fn predict_seeded(
    spec: &PredictorSpec,
    gt: &LabelMask,
    noise: Option<&NoiseSpec>,
    seed: u64,
) -> Result<LabelMask> {
    spec.validate()?;
    let structured = match spec.structure {
        Structure::Iid => None,
        Structure::Dilate {
            radius,
            target_class,
        } => Some((
            StructuredMode::Dilate,
            Magnitude::Radius(radius),
            target_class,
        )),
        Structure::Erode {
            radius,
            target_class,
        } => Some((
            StructuredMode::Erode,
            Magnitude::Radius(radius),
            target_class,
        )),
        Structure::DropComponent {
            fraction,
            target_class,
        } => Some((
            StructuredMode::DropComponent,
            Magnitude::Fraction(fraction),
            target_class,
        )),
    };
    let base = match structured {
        Some((mode, mag, target)) => {
            corrupt_structured(gt, mode, mag, target, derive_seed(seed, &["structured"]))?
        }
        None => gt.clone(),
    };
    let p = spec.effective_flip_prob(noise);
    if p == 0.0 {
        return Ok(base);
    }
    corrupt_iid(&base, p, derive_seed(seed, &["iid"]))
}

fn fallback_label(target: u8, k: usize) -> u8 {
    if target != 0 {
        0
    } else if k > 1 {
        1
    } else {
        IGNORE
    }
}

/// Most frequent non-target, non-ignore label; lowest label wins ties.
fn most_frequent(counts: &[usize]) -> Option<u8> {
    let mut best: Option<(usize, u8)> = None;
    for (l, &c) in counts.iter().enumerate() {
        if c > 0 && best.is_none_or(|(bc, _)| c > bc) {
            best = Some((c, l as u8));
        }
    }
    best.map(|(_, l)| l)
}

fn dilate(gt: &LabelMask, target: u8, r: u32) -> LabelMask {
    let (w, h) = (gt.width() as i64, gt.height() as i64);
    let r = r as i64;
    let src = gt.labels();
    let mut out = src.to_vec();
    for y in 0..h {
        for x in 0..w {
            let i = (y * w + x) as usize;
            if src[i] == target || src[i] == IGNORE {
                continue;
            }
            let hit = (y - r..=y + r).filter(|yy| (0..h).contains(yy)).any(|yy| {
                (x - r..=x + r)
                    .filter(|xx| (0..w).contains(xx))
                    .any(|xx| src[(yy * w + xx) as usize] == target)
            });
            if hit {
                out[i] = target;
            }
        }
    }
    LabelMask::new(gt.width(), gt.height(), out, gt.num_classes()).expect("same label set")
}

/// Target pixels survive only if their whole in-bounds window is target.
/// Removed pixels take the most frequent other label in the window.
fn erode(gt: &LabelMask, target: u8, r: u32) -> LabelMask {
    let (w, h) = (gt.width() as i64, gt.height() as i64);
    let r = r as i64;
    let k = gt.num_classes();
    let src = gt.labels();
    let mut out = src.to_vec();
    let mut counts = vec![0usize; k];
    for y in 0..h {
        for x in 0..w {
            let i = (y * w + x) as usize;
            if src[i] != target {
                continue;
            }
            counts.fill(0);
            let mut keep = true;
            for yy in (y - r..=y + r).filter(|yy| (0..h).contains(yy)) {
                for xx in (x - r..=x + r).filter(|xx| (0..w).contains(xx)) {
                    let l = src[(yy * w + xx) as usize];
                    if l != target {
                        keep = false;
                        if l != IGNORE {
                            counts[l as usize] += 1;
                        }
                    }
                }
            }
            if !keep {
                out[i] = most_frequent(&counts).unwrap_or_else(|| fallback_label(target, k));
            }
        }
    }
    LabelMask::new(gt.width(), gt.height(), out, k).expect("same label set")
}

fn drop_components(gt: &LabelMask, target: u8, fraction: f64, seed: u64) -> LabelMask {
    let cc = connected_components(gt, target);
    let n_drop = ((fraction * cc.count() as f64).ceil() as usize).min(cc.count());
    let mut order: Vec<usize> = (0..cc.count()).collect();
    order.shuffle(&mut global_rng(seed));

    let (w, h) = (gt.width() as i64, gt.height() as i64);
    let k = gt.num_classes();
    let src = gt.labels();
    let mut out = src.to_vec();
    let mut counts = vec![0usize; k];
    for &c in &order[..n_drop] {
        let comp = &cc.components[c];
        counts.fill(0);
        for &i in comp {
            let (x, y) = (i as i64 % w, i as i64 / w);
            for yy in (y - 1..=y + 1).filter(|yy| (0..h).contains(yy)) {
                for xx in (x - 1..=x + 1).filter(|xx| (0..w).contains(xx)) {
                    let l = src[(yy * w + xx) as usize];
                    if l != target && l != IGNORE {
                        counts[l as usize] += 1;
                    }
                }
            }
        }
        let fill = most_frequent(&counts).unwrap_or_else(|| fallback_label(target, k));
        for &i in comp {
            out[i] = fill;
        }
    }
    LabelMask::new(gt.width(), gt.height(), out, k).expect("same label set")
}
