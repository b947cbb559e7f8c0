//! Connected components and the segmentation failure taxonomy.
//!
//! A prediction is compared to ground truth for one class and receives a
//! set of verdicts:
//!
//! * `ideal`: recall and precision both at least `1 - epsilon`; excludes
//!   every other verdict.
//! * `over_segmentation`: more predicted components than ground-truth
//!   components while recall stays at least `recall_hi`.
//! * `under_segmentation`: recall below `recall_lo`.
//! * `region_exclusion`: at least one ground-truth component has no
//!   predicted pixel at all, while the components that were hit are
//!   covered with recall at least `recall_lo`.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::{LabelMask, IGNORE};

/// Components of one class under 8-connectivity.
///
/// Components are numbered in row-major order of their first pixel and
/// each pixel list is sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Components {
    pub components: Vec<Vec<usize>>,
}

impl Components {
    pub fn count(&self) -> usize {
        self.components.len()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.components.iter().map(Vec::len).collect()
    }
}

/// Two-pass union-find labelling.
pub fn connected_components(mask: &LabelMask, class_id: u8) -> Components {
    let w = mask.width() as usize;
    let h = mask.height() as usize;
    let labels = mask.labels();
    let n = labels.len();
    let mut parent: Vec<usize> = (0..n).collect();

    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    fn union(parent: &mut [usize], a: usize, b: usize) {
        let ra = find(parent, a);
        let rb = find(parent, b);
        // smaller index stays root, so roots are first pixels
        if ra < rb {
            parent[rb] = ra;
        } else if rb < ra {
            parent[ra] = rb;
        }
    }

    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            if labels[i] != class_id {
                continue;
            }
            // already-visited neighbours: W, NW, N, NE
            if x > 0 && labels[i - 1] == class_id {
                union(&mut parent, i, i - 1);
            }
            if y > 0 {
                let up = i - w;
                if labels[up] == class_id {
                    union(&mut parent, i, up);
                }
                if x > 0 && labels[up - 1] == class_id {
                    union(&mut parent, i, up - 1);
                }
                if x + 1 < w && labels[up + 1] == class_id {
                    union(&mut parent, i, up + 1);
                }
            }
        }
    }

    let mut by_root: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate().take(n) {
        if l == class_id {
            let r = find(&mut parent, i);
            by_root.entry(r).or_default().push(i);
        }
    }
    Components {
        components: by_root.into_values().collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub recall_hi: f64,
    pub recall_lo: f64,
    pub epsilon: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            recall_hi: 0.85,
            recall_lo: 0.8,
            epsilon: 0.02,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Ideal,
    OverSegmentation,
    UnderSegmentation,
    RegionExclusion,
}

impl Verdict {
    pub const ALL: [Verdict; 4] = [
        Verdict::Ideal,
        Verdict::OverSegmentation,
        Verdict::UnderSegmentation,
        Verdict::RegionExclusion,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Ideal => "ideal",
            Verdict::OverSegmentation => "over_segmentation",
            Verdict::UnderSegmentation => "under_segmentation",
            Verdict::RegionExclusion => "region_exclusion",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entry_id: Option<String>,
    pub class_id: u8,
    pub gt_components: usize,
    pub pred_components: usize,
    /// Fraction of ground-truth pixels of the class that are predicted as it.
    pub recall: f64,
    /// Fraction of predicted pixels of the class that are ground truth.
    pub precision: f64,
    /// Recall over the ground-truth components that were hit at all.
    pub covered_recall: f64,
    pub missed_component_count: usize,
    pub verdicts: BTreeSet<Verdict>,
}

impl ErrorReport {
    pub fn with_entry_id(mut self, id: impl Into<String>) -> Self {
        self.entry_id = Some(id.into());
        self
    }
}

/// Scores `pred` against `gt` for `class_id`. Pixels that are ignore in
/// the ground truth are excluded from both masks. Empty denominators give
/// a ratio of 1.
pub fn classify_errors(
    pred: &LabelMask,
    gt: &LabelMask,
    class_id: u8,
    thresholds: &Thresholds,
) -> Result<ErrorReport> {
    gt.check_same_dims(pred)?;
    if class_id == IGNORE {
        return Err(Error::InvalidParameter(
            "cannot analyze the ignore label".into(),
        ));
    }
    let g = gt.labels();
    // mask out pixels the ground truth does not score
    let pred_view: Vec<u8> = pred
        .labels()
        .iter()
        .zip(g)
        .map(|(&p, &gl)| if gl == IGNORE { IGNORE } else { p })
        .collect();
    let pred_view = LabelMask::new(pred.width(), pred.height(), pred_view, pred.num_classes())?;
    let p = pred_view.labels();

    let gt_cc = connected_components(gt, class_id);
    let pred_cc = connected_components(&pred_view, class_id);

    let gt_total: usize = gt_cc.sizes().iter().sum();
    let pred_total: usize = pred_cc.sizes().iter().sum();
    let mut hit_total = 0usize;
    let mut covered_size = 0usize;
    let mut covered_hits = 0usize;
    let mut missed = 0usize;
    for comp in &gt_cc.components {
        let hits = comp.iter().filter(|&&i| p[i] == class_id).count();
        hit_total += hits;
        if hits == 0 {
            missed += 1;
        } else {
            covered_size += comp.len();
            covered_hits += hits;
        }
    }
    let ratio = |num: usize, den: usize| {
        if den == 0 {
            1.0
        } else {
            num as f64 / den as f64
        }
    };
    let recall = ratio(hit_total, gt_total);
    let precision = ratio(hit_total, pred_total);
    let covered_recall = ratio(covered_hits, covered_size);

    let mut verdicts = BTreeSet::new();
    let eps = thresholds.epsilon;
    if recall >= 1.0 - eps && precision >= 1.0 - eps {
        verdicts.insert(Verdict::Ideal);
    } else {
        if pred_cc.count() > gt_cc.count() && recall >= thresholds.recall_hi {
            verdicts.insert(Verdict::OverSegmentation);
        }
        if recall < thresholds.recall_lo {
            verdicts.insert(Verdict::UnderSegmentation);
        }
        if missed >= 1 && covered_recall >= thresholds.recall_lo {
            verdicts.insert(Verdict::RegionExclusion);
        }
    }

    Ok(ErrorReport {
        entry_id: None,
        class_id,
        gt_components: gt_cc.count(),
        pred_components: pred_cc.count(),
        recall,
        precision,
        covered_recall,
        missed_component_count: missed,
        verdicts,
    })
}

/// Verdict counts across a batch of reports, in [`Verdict::ALL`] order.
/// Reports with no verdict are counted under `none`.
pub fn verdict_histogram(reports: &[ErrorReport]) -> Vec<(String, usize)> {
    let mut rows: Vec<(String, usize)> = Verdict::ALL
        .iter()
        .map(|v| {
            (
                v.as_str().to_string(),
                reports.iter().filter(|r| r.verdicts.contains(v)).count(),
            )
        })
        .collect();
    rows.push((
        "none".into(),
        reports.iter().filter(|r| r.verdicts.is_empty()).count(),
    ));
    rows
}

pub fn histogram_csv(reports: &[ErrorReport]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["verdict", "count"])?;
    for (v, n) in verdict_histogram(reports) {
        w.write_record([v, n.to_string()])?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Csv(e.into_error().into()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}
