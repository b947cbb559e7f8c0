//! Confusion-matrix accumulation and IoU / mIOU.
//!
//! `counts[g][p]` is the number of pixels with ground truth `g` predicted
//! as `p`. For class `c`, `TP = counts[c][c]`, `FP` is the column sum
//! minus `TP`, `FN` the row sum minus `TP`, and
//! `IoU = TP / (TP + FP + FN)`. Classes whose union is empty are undefined
//! and excluded from the mean.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::{LabelMask, IGNORE};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "MatrixRepr", into = "MatrixRepr")]
pub struct ConfusionMatrix {
    num_classes: usize,
    counts: Vec<u64>,
}

#[derive(Serialize, Deserialize)]
struct MatrixRepr {
    num_classes: usize,
    counts: Vec<Vec<u64>>,
}

impl From<ConfusionMatrix> for MatrixRepr {
    fn from(m: ConfusionMatrix) -> Self {
        let k = m.num_classes;
        MatrixRepr {
            num_classes: k,
            counts: m.counts.chunks(k).map(<[u64]>::to_vec).collect(),
        }
    }
}

impl TryFrom<MatrixRepr> for ConfusionMatrix {
    type Error = String;

    fn try_from(r: MatrixRepr) -> Result<Self, String> {
        if r.counts.len() != r.num_classes || r.counts.iter().any(|row| row.len() != r.num_classes)
        {
            return Err(format!("counts must be {0}x{0}", r.num_classes));
        }
        Ok(ConfusionMatrix {
            num_classes: r.num_classes,
            counts: r.counts.into_iter().flatten().collect(),
        })
    }
}

impl ConfusionMatrix {
    pub fn new(num_classes: usize) -> Self {
        Self {
            num_classes,
            counts: vec![0; num_classes * num_classes],
        }
    }

    /// Matrix accumulated from a single prediction / ground-truth pair.
    pub fn from_masks(num_classes: usize, pred: &LabelMask, gt: &LabelMask) -> Result<Self> {
        let mut m = Self::new(num_classes);
        m.accumulate(pred, gt)?;
        Ok(m)
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn get(&self, gt: usize, pred: usize) -> u64 {
        self.counts[gt * self.num_classes + pred]
    }

    /// Sum of all entries, i.e. the number of scored pixels.
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Adds every pixel where neither mask is [`IGNORE`].
    ///
    /// Labels are checked against this matrix's class count, not the
    /// masks' own. On error the matrix is left unchanged.
    pub fn accumulate(&mut self, pred: &LabelMask, gt: &LabelMask) -> Result<()> {
        gt.check_same_dims(pred)?;
        let k = self.num_classes;
        for &l in pred.labels().iter().chain(gt.labels()) {
            if l != IGNORE && l as usize >= k {
                return Err(Error::ClassOutOfRange {
                    label: l,
                    num_classes: k,
                });
            }
        }
        for (&p, &g) in pred.labels().iter().zip(gt.labels()) {
            if p == IGNORE || g == IGNORE {
                continue;
            }
            self.counts[g as usize * k + p as usize] += 1;
        }
        Ok(())
    }

    pub fn merge(&self, other: &ConfusionMatrix) -> Result<ConfusionMatrix> {
        let mut out = self.clone();
        out.merge_from(other)?;
        Ok(out)
    }

    pub fn merge_from(&mut self, other: &ConfusionMatrix) -> Result<()> {
        if self.num_classes != other.num_classes {
            return Err(Error::ClassCountMismatch(
                self.num_classes,
                other.num_classes,
            ));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        Ok(())
    }

    /// `(TP, FP, FN)` for class `c`.
    pub fn class_counts(&self, c: usize) -> (u64, u64, u64) {
        let k = self.num_classes;
        let tp = self.get(c, c);
        let row: u64 = self.counts[c * k..(c + 1) * k].iter().sum();
        let col: u64 = (0..k).map(|g| self.get(g, c)).sum();
        (tp, col - tp, row - tp)
    }

    /// IoU per class; `None` where `TP + FP + FN == 0`.
    pub fn iou_per_class(&self) -> Vec<Option<f64>> {
        (0..self.num_classes)
            .map(|c| {
                let (tp, fp, fn_) = self.class_counts(c);
                let union = tp + fp + fn_;
                (union > 0).then(|| tp as f64 / union as f64)
            })
            .collect()
    }

    /// Mean of the defined per-class IoUs, optionally restricted to
    /// `class_filter`. Ids outside `0..K` in the filter match nothing.
    pub fn miou(&self, class_filter: Option<&[usize]>) -> Option<f64> {
        mean_defined(&self.iou_per_class(), class_filter)
    }

    pub fn breakdown(&self, class_filter: Option<&[usize]>) -> IouBreakdown {
        let per_class = self.iou_per_class();
        let miou = mean_defined(&per_class, class_filter);
        IouBreakdown { per_class, miou }
    }
}

fn mean_defined(per_class: &[Option<f64>], class_filter: Option<&[usize]>) -> Option<f64> {
    let mut sum = 0.0;
    let mut n = 0usize;
    for (c, iou) in per_class.iter().enumerate() {
        if class_filter.is_some_and(|f| !f.contains(&c)) {
            continue;
        }
        if let Some(v) = iou {
            sum += v;
            n += 1;
        }
    }
    (n > 0).then(|| sum / n as f64)
}

/// Per-class IoUs plus their (possibly filtered) mean.
/// Undefined values serialize as `null`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IouBreakdown {
    pub per_class: Vec<Option<f64>>,
    pub miou: Option<f64>,
}
