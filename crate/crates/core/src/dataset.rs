//! Dataset manifests, seeded train/test splits and paired augmentation.
//!
//! Manifest schema (JSON, paths relative to the manifest file):
//!
//! ```json
//! {
//!   "name": "cityscapes",
//!   "entries": [
//!     {
//!       "id": "aachen_000001",
//!       "image": "images/aachen_000001.png",
//!       "gt_mask": "gt/aachen_000001.png",
//!       "predictions": {
//!         "hamm": "pred/hamm/aachen_000001.png",
//!         "hamm@gaussian:low": "pred/hamm_gaussian_low/aachen_000001.png"
//!       }
//!     }
//!   ]
//! }
//! ```

use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::{ImageBuffer, LabelMask, IGNORE};
use crate::rng::global_rng;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub id: String,
    pub image: PathBuf,
    pub gt_mask: PathBuf,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub predictions: BTreeMap<String, PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub name: String,
    pub entries: Vec<ManifestEntry>,
    /// Directory relative paths resolve against. Not serialized.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl DatasetManifest {
    /// Parses a manifest and checks id uniqueness. File references are
    /// not checked; see [`DatasetManifest::validate_files`].
    pub fn from_json(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self> {
        let mut m: DatasetManifest =
            serde_json::from_str(text).map_err(|e| Error::Manifest(format!("schema: {e}")))?;
        m.base_dir = base_dir.into();
        m.check_ids()?;
        Ok(m)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn ids(&self) -> Vec<&str> {
        self.entries.iter().map(|e| e.id.as_str()).collect()
    }

    pub fn entry(&self, id: &str) -> Option<&ManifestEntry> {
        self.entries.iter().find(|e| e.id == id)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    fn check_ids(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for e in &self.entries {
            if e.id.is_empty() {
                return Err(Error::Manifest("entry with empty id".into()));
            }
            if !seen.insert(e.id.as_str()) {
                return Err(Error::Manifest(format!("duplicate entry id `{}`", e.id)));
            }
        }
        Ok(())
    }

    /// Fails listing every entry id whose image, mask or prediction file
    /// does not exist.
    pub fn validate_files(&self) -> Result<()> {
        let mut dangling = Vec::new();
        for e in &self.entries {
            let mut missing: Vec<String> = [("image", &e.image), ("gt_mask", &e.gt_mask)]
                .into_iter()
                .chain(e.predictions.iter().map(|(k, v)| (k.as_str(), v)))
                .filter(|(_, p)| !self.resolve(p).is_file())
                .map(|(field, p)| format!("{field}={}", p.display()))
                .collect();
            if !missing.is_empty() {
                missing.sort();
                dangling.push(format!("{} ({})", e.id, missing.join(", ")));
            }
        }
        if dangling.is_empty() {
            Ok(())
        } else {
            Err(Error::Manifest(format!(
                "dangling paths in entries: {}",
                dangling.join("; ")
            )))
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }
}

/// Reads, parses and fully validates a manifest file.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<DatasetManifest> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let m = DatasetManifest::from_json(&text, base)?;
    m.validate_files()?;
    Ok(m)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitResult {
    pub train_ids: Vec<String>,
    pub test_ids: Vec<String>,
    pub test_fraction: f64,
    pub seed: u64,
}

pub const DEFAULT_TEST_FRACTION: f64 = 0.2;

pub fn split(manifest: &DatasetManifest, test_fraction: f64, seed: u64) -> Result<SplitResult> {
    split_ids(&manifest.ids(), test_fraction, seed)
}

/// Seeded shuffle, then the first `round(test_fraction * n)` ids become
/// the test set. Both partitions keep the input order.
pub fn split_ids<S: AsRef<str>>(ids: &[S], test_fraction: f64, seed: u64) -> Result<SplitResult> {
    if ids.is_empty() {
        return Err(Error::Manifest("cannot split an empty manifest".into()));
    }
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "test fraction must be in (0, 1), got {test_fraction}"
        )));
    }
    let n = ids.len();
    let n_test = (test_fraction * n as f64).round() as usize;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut global_rng(seed));
    let mut is_test = vec![false; n];
    for &i in &order[..n_test] {
        is_test[i] = true;
    }
    let (mut train_ids, mut test_ids) = (Vec::new(), Vec::new());
    for (i, id) in ids.iter().enumerate() {
        let id = id.as_ref().to_string();
        if is_test[i] {
            test_ids.push(id);
        } else {
            train_ids.push(id);
        }
    }
    Ok(SplitResult {
        train_ids,
        test_ids,
        test_fraction,
        seed,
    })
}

/// A geometric transform applied identically to an image and its mask.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "transform", rename_all = "snake_case")]
pub enum Transform {
    HorizontalFlip,
    /// Clockwise rotation by `quarter_turns * 90` degrees.
    Rotate {
        quarter_turns: u8,
    },
    /// Centered rescale, cropped or padded back to the input size.
    Scale {
        factor: f64,
    },
}

pub const SCALE_FACTORS: [f64; 2] = [0.8, 1.2];
pub const DEFAULT_AUGMENT_PROB: f64 = 0.2;

#[derive(Debug, Clone, PartialEq)]
pub struct Augmented {
    pub image: ImageBuffer,
    pub mask: LabelMask,
    pub applied: Option<Transform>,
}

/// With probability `prob`, applies one transform chosen uniformly among
/// flip, rotation and scale (then uniformly among 90/180/270 degrees or
/// the two scale factors). Masks use nearest-neighbour sampling; so do
/// images, keeping both pixel-aligned. Areas uncovered by a downscale are
/// zero in the image and [`IGNORE`] in the mask.
pub fn augment(img: &ImageBuffer, mask: &LabelMask, prob: f64, seed: u64) -> Result<Augmented> {
    if img.dims() != mask.dims() {
        return Err(Error::DimensionMismatch {
            expected: mask.dims(),
            actual: img.dims(),
        });
    }
    if !(0.0..=1.0).contains(&prob) {
        return Err(Error::InvalidParameter(format!(
            "augmentation probability must be in [0, 1], got {prob}"
        )));
    }
    let mut rng = global_rng(seed);
    let roll: f64 = rng.random();
    if roll >= prob {
        return Ok(Augmented {
            image: img.clone(),
            mask: mask.clone(),
            applied: None,
        });
    }
    let t = match rng.random_range(0..3u8) {
        0 => Transform::HorizontalFlip,
        1 => Transform::Rotate {
            quarter_turns: rng.random_range(1..=3u8),
        },
        _ => Transform::Scale {
            factor: SCALE_FACTORS[rng.random_range(0..SCALE_FACTORS.len())],
        },
    };
    let (image, mask) = apply_transform(img, mask, t)?;
    Ok(Augmented {
        image,
        mask,
        applied: Some(t),
    })
}

pub fn apply_transform(
    img: &ImageBuffer,
    mask: &LabelMask,
    t: Transform,
) -> Result<(ImageBuffer, LabelMask)> {
    if img.dims() != mask.dims() {
        return Err(Error::DimensionMismatch {
            expected: mask.dims(),
            actual: img.dims(),
        });
    }
    let geometry = Geometry::new(img.width(), img.height(), t)?;
    let c = img.channels() as usize;
    let n_out = geometry.out_w as usize * geometry.out_h as usize;
    let mut samples = Vec::with_capacity(n_out * c);
    let mut labels = Vec::with_capacity(n_out);
    for y in 0..geometry.out_h {
        for x in 0..geometry.out_w {
            match geometry.source(x, y) {
                Some(i) => {
                    samples.extend_from_slice(img.pixel(i));
                    labels.push(mask.labels()[i]);
                }
                None => {
                    samples.extend(std::iter::repeat_n(0.0, c));
                    labels.push(IGNORE);
                }
            }
        }
    }
    Ok((
        ImageBuffer::new(geometry.out_w, geometry.out_h, img.channels(), samples)?,
        LabelMask::new(geometry.out_w, geometry.out_h, labels, mask.num_classes())?,
    ))
}

/// Inverse mapping from output pixel to source pixel.
struct Geometry {
    in_w: u32,
    in_h: u32,
    out_w: u32,
    out_h: u32,
    t: Transform,
}

impl Geometry {
    fn new(in_w: u32, in_h: u32, t: Transform) -> Result<Self> {
        let (out_w, out_h) = match t {
            Transform::HorizontalFlip | Transform::Scale { .. } => (in_w, in_h),
            Transform::Rotate { quarter_turns: 2 } => (in_w, in_h),
            Transform::Rotate {
                quarter_turns: 1 | 3,
            } => (in_h, in_w),
            Transform::Rotate { quarter_turns } => {
                return Err(Error::InvalidParameter(format!(
                    "rotation must be 1..=3 quarter turns, got {quarter_turns}"
                )))
            }
        };
        if let Transform::Scale { factor } = t {
            if !(factor.is_finite() && factor > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "invalid scale factor {factor}"
                )));
            }
        }
        Ok(Self {
            in_w,
            in_h,
            out_w,
            out_h,
            t,
        })
    }

    fn source(&self, x: u32, y: u32) -> Option<usize> {
        let (w, h) = (self.in_w, self.in_h);
        let (sx, sy) = match self.t {
            Transform::HorizontalFlip => (w - 1 - x, y),
            Transform::Rotate { quarter_turns: 1 } => (y, h - 1 - x),
            Transform::Rotate { quarter_turns: 2 } => (w - 1 - x, h - 1 - y),
            Transform::Rotate { .. } => (w - 1 - y, x),
            Transform::Scale { factor } => {
                let map = |o: u32, n: u32| -> Option<u32> {
                    let c = f64::from(n) / 2.0;
                    let s = ((f64::from(o) + 0.5 - c) / factor + c).floor();
                    (s >= 0.0 && s < f64::from(n)).then_some(s as u32)
                };
                (map(x, w)?, map(y, h)?)
            }
        };
        Some(sy as usize * w as usize + sx as usize)
    }
}
