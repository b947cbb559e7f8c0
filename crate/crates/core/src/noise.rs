//! Robustness perturbations: additive Gaussian, salt-and-pepper and
//! multiplicative speckle noise on normalized images.
//!
//! Severity is a single scalar per family. For Gaussian and speckle it is
//! the standard deviation of the normal draw; for salt-and-pepper it is the
//! fraction of corrupted pixel locations. The three named levels map to
//! 0.01, 0.05 and 0.1.

use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::ImageBuffer;
use crate::rng::{derive_seed, global_rng, pixel_rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseFamily {
    Gaussian,
    SaltPepper,
    Speckle,
}

impl NoiseFamily {
    pub const ALL: [NoiseFamily; 3] = [
        NoiseFamily::Gaussian,
        NoiseFamily::SaltPepper,
        NoiseFamily::Speckle,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            NoiseFamily::Gaussian => "gaussian",
            NoiseFamily::SaltPepper => "salt_pepper",
            NoiseFamily::Speckle => "speckle",
        }
    }
}

impl fmt::Display for NoiseFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

impl FromStr for NoiseFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(NoiseFamily::Gaussian),
            "salt_pepper" | "salt-pepper" | "salt_and_pepper" => Ok(NoiseFamily::SaltPepper),
            "speckle" => Ok(NoiseFamily::Speckle),
            other => Err(Error::InvalidParameter(format!(
                "unknown noise family `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseLevel {
    Low,
    Medium,
    High,
}

impl NoiseLevel {
    pub const ALL: [NoiseLevel; 3] = [NoiseLevel::Low, NoiseLevel::Medium, NoiseLevel::High];

    pub fn sigma(self) -> f64 {
        match self {
            NoiseLevel::Low => 0.01,
            NoiseLevel::Medium => 0.05,
            NoiseLevel::High => 0.1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            NoiseLevel::Low => "low",
            NoiseLevel::Medium => "medium",
            NoiseLevel::High => "high",
        }
    }
}

impl fmt::Display for NoiseLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

impl FromStr for NoiseLevel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "low" => Ok(NoiseLevel::Low),
            "medium" | "mid" => Ok(NoiseLevel::Medium),
            "high" => Ok(NoiseLevel::High),
            other => Err(Error::InvalidParameter(format!(
                "unknown noise level `{other}`"
            ))),
        }
    }
}

pub fn resolve_level(level: NoiseLevel) -> f64 {
    level.sigma()
}

/// A fully resolved perturbation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub family: NoiseFamily,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level: Option<NoiseLevel>,
    pub sigma: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn from_level(family: NoiseFamily, level: NoiseLevel, seed: u64) -> Self {
        Self {
            family,
            level: Some(level),
            sigma: level.sigma(),
            seed,
        }
    }

    /// Spec with an explicit severity, not tied to a named level.
    pub fn with_sigma(family: NoiseFamily, sigma: f64, seed: u64) -> Result<Self> {
        let spec = Self {
            family,
            level: None,
            sigma,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma.is_finite() && self.sigma >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "noise severity must be finite and non-negative, got {}",
                self.sigma
            )));
        }
        if self.family == NoiseFamily::SaltPepper && self.sigma > 1.0 {
            return Err(Error::InvalidParameter(format!(
                "salt-and-pepper amount must be at most 1, got {}",
                self.sigma
            )));
        }
        if let Some(level) = self.level {
            if level.sigma() != self.sigma {
                return Err(Error::InvalidParameter(format!(
                    "level {level} implies sigma {}, got {}",
                    level.sigma(),
                    self.sigma
                )));
            }
        }
        Ok(())
    }

    pub fn apply(&self, img: &ImageBuffer) -> Result<ImageBuffer> {
        self.validate()?;
        Ok(match self.family {
            NoiseFamily::Gaussian => gaussian_noise(img, self.sigma, self.seed),
            NoiseFamily::SaltPepper => salt_pepper_noise(img, self.sigma, self.seed),
            NoiseFamily::Speckle => speckle_noise(img, self.sigma, self.seed),
        })
    }
}

/// `clamp(s + n)`, `n ~ N(0, sigma)` i.i.d. per sample.
pub fn gaussian_noise(img: &ImageBuffer, sigma: f64, seed: u64) -> ImageBuffer {
    per_sample(img, seed, |s, n| s + sigma * n)
}

/// `clamp(s * (1 + n))`, `n ~ N(0, sigma)` i.i.d. per sample.
pub fn speckle_noise(img: &ImageBuffer, sigma: f64, seed: u64) -> ImageBuffer {
    per_sample(img, seed, |s, n| s * (1.0 + sigma * n))
}

fn per_sample(img: &ImageBuffer, seed: u64, f: impl Fn(f64, f64) -> f64 + Sync) -> ImageBuffer {
    let c = img.channels() as usize;
    let mut out = img.samples().to_vec();
    out.par_chunks_mut(c).enumerate().for_each(|(i, px)| {
        let mut rng = pixel_rng(seed, i as u64);
        for s in px {
            let n: f64 = StandardNormal.sample(&mut rng);
            *s = f(*s, n);
        }
    });
    ImageBuffer::from_clamped(img.width(), img.height(), img.channels(), out)
        .expect("per-sample noise keeps the image shape")
}

/// Sets exactly `round(amount * pixels)` locations, chosen without
/// replacement, to white (probability 1/2) or black across all channels.
///
/// Panics if `amount` is outside `[0, 1]`.
pub fn salt_pepper_noise(img: &ImageBuffer, amount: f64, seed: u64) -> ImageBuffer {
    assert!(
        (0.0..=1.0).contains(&amount),
        "salt-and-pepper amount {amount} outside [0, 1]"
    );
    let n = img.pixel_count();
    let count = ((amount * n as f64).round() as usize).min(n);
    let chosen = index::sample(
        &mut global_rng(derive_seed(seed, &["salt_pepper"])),
        n,
        count,
    );
    let c = img.channels() as usize;
    let mut out = img.samples().to_vec();
    for i in chosen.iter() {
        let salt = pixel_rng(seed, i as u64).random_bool(0.5);
        let v = if salt { 1.0 } else { 0.0 };
        out[i * c..(i + 1) * c].fill(v);
    }
    ImageBuffer::new(img.width(), img.height(), img.channels(), out)
        .expect("salt-and-pepper keeps the image shape")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gray(w: u32, h: u32, v: f64) -> ImageBuffer {
        ImageBuffer::filled(w, h, 1, v).unwrap()
    }

    fn delta_moments(a: &ImageBuffer, b: &ImageBuffer) -> (f64, f64) {
        let n = a.samples().len() as f64;
        let d: Vec<f64> = a
            .samples()
            .iter()
            .zip(b.samples())
            .map(|(x, y)| y - x)
            .collect();
        let mean = d.iter().sum::<f64>() / n;
        let var = d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (mean, var.sqrt())
    }

    #[test]
    fn level_ladder() {
        assert_eq!(resolve_level(NoiseLevel::Low), 0.01);
        assert_eq!(resolve_level(NoiseLevel::Medium), 0.05);
        assert_eq!(resolve_level(NoiseLevel::High), 0.1);
    }

    #[test]
    fn zero_severity_is_identity() {
        let img = ImageBuffer::new(3, 1, 1, vec![0.0, 0.3, 1.0]).unwrap();
        assert_eq!(gaussian_noise(&img, 0.0, 9), img);
        assert_eq!(speckle_noise(&img, 0.0, 9), img);
        assert_eq!(salt_pepper_noise(&img, 0.0, 9), img);
    }

    #[test]
    fn gaussian_moments() {
        let img = gray(1000, 1000, 0.5);
        let out = gaussian_noise(&img, 0.05, 1);
        let (mean, std) = delta_moments(&img, &out);
        assert!(mean.abs() < 0.001, "mean {mean}");
        assert!((std - 0.05).abs() / 0.05 < 0.02, "std {std}");
    }

    #[test]
    fn gaussian_clamps() {
        let img = gray(50, 50, 1.0);
        let out = gaussian_noise(&img, 0.1, 2);
        assert!(out.samples().iter().all(|s| *s <= 1.0));
        assert!(out.samples().iter().any(|s| *s < 1.0));
    }

    #[test]
    fn speckle_preserves_zero() {
        let img = gray(20, 20, 0.0);
        assert_eq!(speckle_noise(&img, 0.1, 3), img);
    }

    #[test]
    fn speckle_moments() {
        let img = gray(1000, 1000, 0.5);
        let out = speckle_noise(&img, 0.1, 4);
        let (_, std) = delta_moments(&img, &out);
        assert!((std - 0.05).abs() / 0.05 < 0.02, "std {std}");
    }

    #[test]
    fn salt_pepper_counts() {
        let img = gray(1000, 1000, 0.5);
        let out = salt_pepper_noise(&img, 0.05, 5);
        let changed: Vec<f64> = out
            .samples()
            .iter()
            .copied()
            .filter(|s| *s != 0.5)
            .collect();
        assert_eq!(changed.len(), 50_000);
        let salt = changed.iter().filter(|s| **s == 1.0).count() as f64 / changed.len() as f64;
        assert!((salt - 0.5).abs() < 0.01, "salt fraction {salt}");
    }

    #[test]
    fn salt_pepper_full_saturation_and_channels() {
        let img = ImageBuffer::filled(8, 8, 3, 0.4).unwrap();
        let out = salt_pepper_noise(&img, 1.0, 6);
        for i in 0..out.pixel_count() {
            let px = out.pixel(i);
            assert!(px[0] == 0.0 || px[0] == 1.0);
            assert!(px.iter().all(|s| *s == px[0]));
        }
    }

    #[test]
    fn deterministic_and_seed_sensitive() {
        let img = gray(64, 64, 0.5);
        for family in NoiseFamily::ALL {
            let a = NoiseSpec::from_level(family, NoiseLevel::High, 11)
                .apply(&img)
                .unwrap();
            let b = NoiseSpec::from_level(family, NoiseLevel::High, 11)
                .apply(&img)
                .unwrap();
            let c = NoiseSpec::from_level(family, NoiseLevel::High, 12)
                .apply(&img)
                .unwrap();
            assert_eq!(a, b);
            assert_ne!(a, c);
        }
    }

    #[test]
    fn seeds_give_matching_moments() {
        let img = gray(300, 300, 0.5);
        let (_, s1) = delta_moments(&img, &gaussian_noise(&img, 0.05, 100));
        let (_, s2) = delta_moments(&img, &gaussian_noise(&img, 0.05, 200));
        assert!((s1 - s2).abs() / 0.05 < 0.03);
    }

    #[test]
    fn severity_is_monotone_in_level() {
        let img = gray(200, 200, 0.5);
        for family in NoiseFamily::ALL {
            let mad: Vec<f64> = NoiseLevel::ALL
                .iter()
                .map(|&l| {
                    let out = NoiseSpec::from_level(family, l, 7).apply(&img).unwrap();
                    out.samples().iter().map(|s| (s - 0.5).abs()).sum::<f64>()
                        / out.samples().len() as f64
                })
                .collect();
            assert!(mad[0] <= mad[1] && mad[1] <= mad[2], "{family}: {mad:?}");
        }
    }

    #[test]
    fn spec_validation() {
        assert!(NoiseSpec::with_sigma(NoiseFamily::SaltPepper, 1.5, 0).is_err());
        assert!(NoiseSpec::with_sigma(NoiseFamily::Gaussian, -0.1, 0).is_err());
        assert!(NoiseSpec::with_sigma(NoiseFamily::Gaussian, f64::NAN, 0).is_err());
        let mut s = NoiseSpec::from_level(NoiseFamily::Gaussian, NoiseLevel::Low, 0);
        s.sigma = 0.2;
        assert!(s.validate().is_err());
        assert_eq!(
            "salt-pepper".parse::<NoiseFamily>().unwrap(),
            NoiseFamily::SaltPepper
        );
        assert!("blur".parse::<NoiseFamily>().is_err());
        let json = serde_json::to_string(&NoiseSpec::from_level(
            NoiseFamily::SaltPepper,
            NoiseLevel::Medium,
            3,
        ))
        .unwrap();
        assert_eq!(
            json,
            r#"{"family":"salt_pepper","level":"medium","sigma":0.05,"seed":3}"#
        );
    }

    #[test]
    fn output_always_in_range() {
        let img = ImageBuffer::new(4, 1, 1, vec![0.0, 0.01, 0.99, 1.0]).unwrap();
        for seed in 0..50 {
            for out in [
                gaussian_noise(&img, 5.0, seed),
                speckle_noise(&img, 5.0, seed),
            ] {
                assert!(out.samples().iter().all(|s| (0.0..=1.0).contains(s)));
            }
        }
    }
}
