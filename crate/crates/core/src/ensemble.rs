//! Pixel-wise majority-vote fusion of prediction masks.
//!
//! Each member casts its weight for the label it predicts at a pixel;
//! [`IGNORE`] is an abstention. The label with the largest vote mass wins.
//! Ties go to the earliest member (in configuration order) whose label is
//! among the tied maximizers. A pixel is ignore only when every member
//! abstains.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::{LabelMask, IGNORE};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    /// Member names; the order is the tie-break priority.
    pub member_names: Vec<String>,
    /// Per-member vote weights. Unit weights when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
}

impl EnsembleConfig {
    pub fn new<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Result<Self> {
        let cfg = Self {
            member_names: names.into_iter().map(Into::into).collect(),
            weights: None,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_weights(mut self, weights: Vec<f64>) -> Result<Self> {
        self.weights = Some(weights);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.member_names.len() < 2 {
            return Err(Error::InvalidConfig(format!(
                "an ensemble needs at least 2 members, got {}",
                self.member_names.len()
            )));
        }
        for (i, name) in self.member_names.iter().enumerate() {
            if self.member_names[..i].contains(name) {
                return Err(Error::InvalidConfig(format!(
                    "duplicate ensemble member `{name}`"
                )));
            }
        }
        if let Some(w) = &self.weights {
            if w.len() != self.member_names.len() {
                return Err(Error::InvalidConfig(format!(
                    "{} weights for {} members",
                    w.len(),
                    self.member_names.len()
                )));
            }
            if let Some(bad) = w.iter().find(|x| !(x.is_finite() && **x > 0.0)) {
                return Err(Error::InvalidConfig(format!(
                    "weights must be strictly positive, got {bad}"
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.member_names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.member_names.is_empty()
    }

    pub fn weight(&self, member: usize) -> f64 {
        self.weights.as_ref().map_or(1.0, |w| w[member])
    }

    fn resolved_weights(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.weight(i)).collect()
    }
}

/// Winner minus runner-up vote mass for every pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginRaster {
    pub width: u32,
    pub height: u32,
    pub values: Vec<f64>,
}

pub fn majority_vote(masks: &[&LabelMask], config: &EnsembleConfig) -> Result<LabelMask> {
    let first = check_inputs(masks, config)?;
    let weights = config.resolved_weights();
    let width = first.width() as usize;
    let mut out = vec![IGNORE; first.len()];
    out.par_chunks_mut(width).enumerate().for_each_init(
        || Tally::new(first.num_classes()),
        |tally, (row, out_row)| {
            let offset = row * width;
            for (x, slot) in out_row.iter_mut().enumerate() {
                *slot = tally.vote(masks, &weights, offset + x).0;
            }
        },
    );
    LabelMask::new(first.width(), first.height(), out, first.num_classes())
}

pub fn vote_margin(masks: &[&LabelMask], config: &EnsembleConfig) -> Result<MarginRaster> {
    let first = check_inputs(masks, config)?;
    let weights = config.resolved_weights();
    let width = first.width() as usize;
    let mut values = vec![0.0; first.len()];
    values.par_chunks_mut(width).enumerate().for_each_init(
        || Tally::new(first.num_classes()),
        |tally, (row, out_row)| {
            let offset = row * width;
            for (x, slot) in out_row.iter_mut().enumerate() {
                *slot = tally.vote(masks, &weights, offset + x).1;
            }
        },
    );
    Ok(MarginRaster {
        width: first.width(),
        height: first.height(),
        values,
    })
}

fn check_inputs<'a>(masks: &[&'a LabelMask], config: &EnsembleConfig) -> Result<&'a LabelMask> {
    config.validate()?;
    if masks.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "majority vote needs at least 2 masks, got {}",
            masks.len()
        )));
    }
    if masks.len() != config.len() {
        return Err(Error::InvalidParameter(format!(
            "{} masks for {} configured members",
            masks.len(),
            config.len()
        )));
    }
    let first = masks[0];
    for m in &masks[1..] {
        first.check_same_dims(m)?;
        if m.num_classes() != first.num_classes() {
            return Err(Error::ClassCountMismatch(
                first.num_classes(),
                m.num_classes(),
            ));
        }
    }
    Ok(first)
}

struct Tally {
    mass: Vec<f64>,
}

impl Tally {
    fn new(num_classes: usize) -> Self {
        Self {
            mass: vec![0.0; num_classes],
        }
    }

    /// `(winner, margin)` at pixel `i`.
    fn vote(&mut self, masks: &[&LabelMask], weights: &[f64], i: usize) -> (u8, f64) {
        for (m, w) in masks.iter().zip(weights) {
            let l = m.labels()[i];
            if l != IGNORE {
                self.mass[l as usize] += w;
            }
        }
        let mut best = f64::NEG_INFINITY;
        for m in masks {
            let l = m.labels()[i];
            if l != IGNORE {
                best = best.max(self.mass[l as usize]);
            }
        }
        let winner = masks
            .iter()
            .map(|m| m.labels()[i])
            .find(|&l| l != IGNORE && self.mass[l as usize] == best);
        let margin = match winner {
            None => 0.0,
            Some(w) => {
                let runner_up = masks
                    .iter()
                    .map(|m| m.labels()[i])
                    .filter(|&l| l != IGNORE && l != w)
                    .map(|l| self.mass[l as usize])
                    .fold(0.0, f64::max);
                best - runner_up
            }
        };
        for m in masks {
            let l = m.labels()[i];
            if l != IGNORE {
                self.mass[l as usize] = 0.0;
            }
        }
        (winner.unwrap_or(IGNORE), margin)
    }
}
