//! Majority-vote fusion, mIOU scoring and noise-robustness benchmarking
//! for semantic segmentation label masks.
//!
//! The crate is organized by capability:
//!
//! * [`mask`]: label masks, normalized images and their file formats
//! * [`metrics`]: confusion matrices, per-class IoU and mIOU
//! * [`ensemble`]: pixel-wise majority vote with priority tie-breaking
//! * [`noise`]: Gaussian, salt-and-pepper and speckle perturbations
//! * [`synth`]: seeded synthetic predictors with a noise degradation law
//! * [`dataset`]: manifests, train/test splits and paired augmentation
//! * [`harness`]: robustness sweeps and their report tables
//! * [`analysis`]: connected components and the failure taxonomy
//! * [`cli`]: the `segvote` command-line front end
//!
//! See the `examples/` directory for one runnable program per capability.

pub mod analysis;
pub mod cli;
pub mod dataset;
pub mod ensemble;
pub mod error;
pub mod harness;
pub mod mask;
pub mod metrics;
pub mod noise;
pub mod rng;
pub mod synth;

pub use analysis::{classify_errors, connected_components, ErrorReport, Thresholds, Verdict};
pub use dataset::{augment, load_manifest, split, DatasetManifest, SplitResult, Transform};
pub use ensemble::{majority_vote, vote_margin, EnsembleConfig};
pub use error::{Error, Result};
pub use harness::{
    degradation_profile, emit_report, run_sweep, summarize_ensemble, ReportFormat, SweepConfig,
    SweepReport,
};
pub use mask::{load_image, load_mask, save_mask, ImageBuffer, LabelMask, IGNORE};
pub use metrics::{ConfusionMatrix, IouBreakdown};
pub use noise::{NoiseFamily, NoiseLevel, NoiseSpec};
pub use synth::{predict, PredictorSpec};
