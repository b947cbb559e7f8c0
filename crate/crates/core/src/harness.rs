//! Robustness sweep: every predictor and the fused ensemble are scored on
//! the same test entries for a clean baseline and for each requested
//! (noise family, level) cell.
//!
//! Seeds for every entry and cell are derived from the master seed and
//! string tags. Entries are scored in parallel, each worker owning its
//! own confusion matrices, and the matrices are merged afterwards, so
//! reports do not depend on the worker count.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::{load_manifest, split_ids, DatasetManifest, ManifestEntry};
use crate::ensemble::{majority_vote, EnsembleConfig};
use crate::error::{Error, Result};
use crate::mask::{infer_num_classes, load_mask_with_classes, LabelMask, MAX_CLASSES};
use crate::metrics::{ConfusionMatrix, IouBreakdown};
use crate::noise::{NoiseFamily, NoiseLevel, NoiseSpec};
use crate::rng::derive_seed;
use crate::synth::{predict_seeded, PredictorSpec};

pub const ENSEMBLE_COLUMN: &str = "ensemble";

/// Where a predictor's masks come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictorSource {
    Synthetic(PredictorSpec),
    /// Masks listed in the manifest under `name` (clean) and
    /// `name@family:level` (noisy cells).
    External {
        name: String,
    },
}

impl PredictorSource {
    pub fn name(&self) -> &str {
        match self {
            PredictorSource::Synthetic(s) => &s.name,
            PredictorSource::External { name } => name,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSpec {
    pub test_fraction: f64,
    /// Defaults to the master seed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub manifest: PathBuf,
    pub predictors: Vec<PredictorSource>,
    pub ensemble: EnsembleConfig,
    #[serde(default = "all_families")]
    pub noise_families: Vec<NoiseFamily>,
    #[serde(default = "all_levels")]
    pub levels: Vec<NoiseLevel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_filter: Option<Vec<usize>>,
    /// Inferred from the ground-truth masks when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub num_classes: Option<usize>,
    /// Evaluate only the test side of a seeded split. All entries otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<SplitSpec>,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "one")]
    pub worker_count: usize,
    /// Perturbed replicas per (entry, cell).
    #[serde(default = "one")]
    pub replicas: usize,
    /// Directory `manifest` resolves against. Not serialized.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn all_families() -> Vec<NoiseFamily> {
    NoiseFamily::ALL.to_vec()
}

fn all_levels() -> Vec<NoiseLevel> {
    NoiseLevel::ALL.to_vec()
}

fn one() -> usize {
    1
}

impl SweepConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: SweepConfig = serde_json::from_str(&text)
            .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn manifest_path(&self) -> PathBuf {
        if self.manifest.is_absolute() {
            self.manifest.clone()
        } else {
            self.base_dir.join(&self.manifest)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.predictors.is_empty() {
            return Err(Error::InvalidConfig(
                "at least one predictor is required".into(),
            ));
        }
        let mut names = HashSet::new();
        for p in &self.predictors {
            let name = p.name();
            if name.is_empty() || name == ENSEMBLE_COLUMN || name.contains('@') {
                return Err(Error::InvalidConfig(format!(
                    "invalid predictor name `{name}`"
                )));
            }
            if !names.insert(name) {
                return Err(Error::InvalidConfig(format!(
                    "duplicate predictor `{name}`"
                )));
            }
            if let PredictorSource::Synthetic(spec) = p {
                spec.validate()?;
            }
        }
        self.ensemble.validate()?;
        if let Some(m) = self
            .ensemble
            .member_names
            .iter()
            .find(|m| !names.contains(m.as_str()))
        {
            return Err(Error::InvalidConfig(format!(
                "ensemble member `{m}` is not a configured predictor"
            )));
        }
        if has_duplicates(&self.noise_families) || has_duplicates(&self.levels) {
            return Err(Error::InvalidConfig(
                "noise families and levels must be unique".into(),
            ));
        }
        if self.worker_count == 0 {
            return Err(Error::InvalidConfig("worker_count must be positive".into()));
        }
        if self.replicas == 0 {
            return Err(Error::InvalidConfig("replicas must be positive".into()));
        }
        if self.replicas > 1
            && self
                .predictors
                .iter()
                .any(|p| matches!(p, PredictorSource::External { .. }))
        {
            return Err(Error::InvalidConfig(
                "replicas > 1 needs synthetic predictors only; external sets hold one mask per cell"
                    .into(),
            ));
        }
        if let Some(k) = self.num_classes {
            if k == 0 || k > MAX_CLASSES {
                return Err(Error::InvalidConfig(format!(
                    "num_classes {k} out of range"
                )));
            }
        }
        if let Some(s) = &self.split {
            if !(s.test_fraction > 0.0 && s.test_fraction < 1.0) {
                return Err(Error::InvalidConfig(format!(
                    "split test_fraction must be in (0, 1), got {}",
                    s.test_fraction
                )));
            }
        }
        Ok(())
    }

    /// SHA-256 over the canonical JSON of every result-affecting field
    /// (the worker count is excluded).
    pub fn digest(&self) -> String {
        let mut value = serde_json::to_value(self).expect("config serializes");
        if let Some(obj) = value.as_object_mut() {
            obj.remove("worker_count");
        }
        let canonical = serde_json::to_string(&value).expect("value serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }
}

fn has_duplicates<T: PartialEq>(xs: &[T]) -> bool {
    xs.iter().enumerate().any(|(i, x)| xs[..i].contains(x))
}

/// One evaluated cell. `noise_type`/`noise_level` are `None` for the clean
/// baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub noise_type: Option<NoiseFamily>,
    pub noise_level: Option<NoiseLevel>,
    pub sigma: f64,
    /// Aligned with [`SweepReport::predictors`].
    pub predictors: Vec<IouBreakdown>,
    pub ensemble: IouBreakdown,
}

impl SweepRow {
    pub fn is_baseline(&self) -> bool {
        self.noise_type.is_none()
    }

    fn type_label(&self) -> &'static str {
        self.noise_type.map_or("none", NoiseFamily::as_str)
    }

    fn level_label(&self) -> &'static str {
        self.noise_level.map_or("clean", NoiseLevel::as_str)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub config_digest: String,
    pub master_seed: u64,
    pub num_classes: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_filter: Option<Vec<usize>>,
    pub test_entries: usize,
    pub replicas: usize,
    pub toolkit_version: String,
    /// Unix seconds. Left empty unless the caller stamps the report.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub started_at: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub finished_at: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub predictors: Vec<String>,
    pub ensemble: EnsembleConfig,
    /// Baseline first, then cells in family-major order.
    pub rows: Vec<SweepRow>,
    pub metadata: ReportMetadata,
}

impl SweepReport {
    pub fn baseline(&self) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.is_baseline())
    }

    pub fn row(&self, family: NoiseFamily, level: NoiseLevel) -> Option<&SweepRow> {
        self.rows
            .iter()
            .find(|r| r.noise_type == Some(family) && r.noise_level == Some(level))
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.predictors.iter().position(|p| p == name)
    }

    /// mIOU of a predictor column, or of the ensemble for [`ENSEMBLE_COLUMN`].
    pub fn miou(&self, row: &SweepRow, name: &str) -> Option<f64> {
        if name == ENSEMBLE_COLUMN {
            row.ensemble.miou
        } else {
            self.column(name).and_then(|c| row.predictors[c].miou)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let baselines = self.rows.iter().filter(|r| r.is_baseline()).count();
        if baselines != 1 {
            return Err(Error::InvalidConfig(format!(
                "a report needs exactly one baseline row, found {baselines}"
            )));
        }
        for r in &self.rows {
            if r.predictors.len() != self.predictors.len() {
                return Err(Error::InvalidConfig(
                    "row width does not match predictors".into(),
                ));
            }
            if r.noise_type.is_some() != r.noise_level.is_some() {
                return Err(Error::InvalidConfig(
                    "noise type and level must both be set".into(),
                ));
            }
            let ok = |m: Option<f64>| m.is_none_or(|v| (0.0..=1.0).contains(&v));
            if !r.predictors.iter().all(|b| ok(b.miou)) || !ok(r.ensemble.miou) {
                return Err(Error::InvalidConfig("mIOU outside [0, 1]".into()));
            }
        }
        Ok(())
    }

    /// Records wall-clock start and end times (unix seconds).
    pub fn stamp(&mut self, started_at: u64, finished_at: u64) {
        self.metadata.started_at = Some(started_at);
        self.metadata.finished_at = Some(finished_at);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Cell {
    family: Option<NoiseFamily>,
    level: Option<NoiseLevel>,
}

impl Cell {
    fn sigma(self) -> f64 {
        self.level.map_or(0.0, NoiseLevel::sigma)
    }

    fn prediction_key(self, name: &str) -> String {
        match (self.family, self.level) {
            (Some(f), Some(l)) => format!("{name}@{f}:{l}"),
            _ => name.to_string(),
        }
    }
}

struct Prepared<'a> {
    entry: &'a ManifestEntry,
    gt: LabelMask,
}

pub fn run_sweep(config: &SweepConfig) -> Result<SweepReport> {
    config.validate()?;
    let manifest = load_manifest(config.manifest_path())?;
    run_sweep_with_manifest(config, &manifest)
}

/// Runs a sweep over an already loaded manifest.
pub fn run_sweep_with_manifest(
    config: &SweepConfig,
    manifest: &DatasetManifest,
) -> Result<SweepReport> {
    config.validate()?;
    if manifest.is_empty() {
        return Err(Error::Manifest("manifest has no entries".into()));
    }
    let test_ids: Vec<String> = match &config.split {
        Some(s) => {
            split_ids(
                &manifest.ids(),
                s.test_fraction,
                s.seed.unwrap_or(config.master_seed),
            )?
            .test_ids
        }
        None => manifest.ids().into_iter().map(String::from).collect(),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.worker_count)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("worker pool: {e}")))?;

    let entries: Vec<&ManifestEntry> = test_ids
        .iter()
        .map(|id| {
            manifest
                .entry(id)
                .expect("split ids come from the manifest")
        })
        .collect();
    let gts: Vec<LabelMask> = pool.install(|| {
        entries
            .par_iter()
            .map(|e| load_mask_with_classes(manifest.resolve(&e.gt_mask), config.num_classes))
            .collect::<Result<_>>()
    })?;
    let num_classes = match config.num_classes {
        Some(k) => k,
        None => gts
            .iter()
            .map(|m| infer_num_classes(m.labels()))
            .max()
            .unwrap_or(1),
    };
    if let Some(bad) = config
        .class_filter
        .iter()
        .flatten()
        .find(|&&c| c >= num_classes)
    {
        return Err(Error::InvalidConfig(format!(
            "class_filter id {bad} out of range for {num_classes} classes"
        )));
    }
    let prepared: Vec<Prepared> = entries
        .into_iter()
        .zip(gts)
        .map(|(entry, gt)| {
            Ok(Prepared {
                entry,
                gt: gt.with_num_classes(num_classes)?,
            })
        })
        .collect::<Result<_>>()?;

    let mut cells = vec![Cell {
        family: None,
        level: None,
    }];
    for &f in &config.noise_families {
        for &l in &config.levels {
            cells.push(Cell {
                family: Some(f),
                level: Some(l),
            });
        }
    }

    let member_idx: Vec<usize> = config
        .ensemble
        .member_names
        .iter()
        .map(|m| {
            config
                .predictors
                .iter()
                .position(|p| p.name() == m)
                .unwrap()
        })
        .collect();
    let filter = config.class_filter.as_deref();

    let mut rows = Vec::with_capacity(cells.len());
    for cell in cells {
        let per_entry: Vec<Vec<ConfusionMatrix>> = pool.install(|| {
            prepared
                .par_iter()
                .map(|p| score_entry(config, manifest, p, cell, num_classes, &member_idx))
                .collect::<Result<_>>()
        })?;
        let mut totals = vec![ConfusionMatrix::new(num_classes); config.predictors.len() + 1];
        for matrices in &per_entry {
            for (t, m) in totals.iter_mut().zip(matrices) {
                t.merge_from(m)?;
            }
        }
        let ensemble = totals.pop().unwrap().breakdown(filter);
        log::info!(
            "cell {}:{} scored over {} entries",
            cell.family.map_or("none", NoiseFamily::as_str),
            cell.level.map_or("clean", NoiseLevel::as_str),
            prepared.len()
        );
        rows.push(SweepRow {
            noise_type: cell.family,
            noise_level: cell.level,
            sigma: cell.sigma(),
            predictors: totals.iter().map(|m| m.breakdown(filter)).collect(),
            ensemble,
        });
    }

    Ok(SweepReport {
        predictors: config
            .predictors
            .iter()
            .map(|p| p.name().to_string())
            .collect(),
        ensemble: config.ensemble.clone(),
        rows,
        metadata: ReportMetadata {
            config_digest: config.digest(),
            master_seed: config.master_seed,
            num_classes,
            class_filter: config.class_filter.clone(),
            test_entries: prepared.len(),
            replicas: config.replicas,
            toolkit_version: env!("CARGO_PKG_VERSION").to_string(),
            started_at: None,
            finished_at: None,
        },
    })
}

/// Matrices for every predictor plus the ensemble (last) on one entry.
fn score_entry(
    config: &SweepConfig,
    manifest: &DatasetManifest,
    prepared: &Prepared,
    cell: Cell,
    num_classes: usize,
    member_idx: &[usize],
) -> Result<Vec<ConfusionMatrix>> {
    let id = prepared.entry.id.as_str();
    let gt = &prepared.gt;
    let mut matrices = vec![ConfusionMatrix::new(num_classes); config.predictors.len() + 1];
    for replica in 0..config.replicas {
        let replica_tag = replica.to_string();
        let noise = match (cell.family, cell.level) {
            (Some(f), Some(l)) => {
                let seed = derive_seed(
                    config.master_seed,
                    &["noise", f.as_str(), l.as_str(), id, &replica_tag],
                );
                Some(NoiseSpec::from_level(f, l, seed))
            }
            _ => None,
        };
        let masks: Vec<LabelMask> = config
            .predictors
            .iter()
            .map(|p| match p {
                PredictorSource::Synthetic(spec) => {
                    // independent of the noise cell: paired across levels
                    let seed = derive_seed(
                        config.master_seed,
                        &[
                            "predictor",
                            &spec.name,
                            &spec.seed.to_string(),
                            id,
                            &replica_tag,
                        ],
                    );
                    predict_seeded(spec, gt, noise.as_ref(), seed)
                }
                PredictorSource::External { name } => {
                    let key = cell.prediction_key(name);
                    let path = prepared.entry.predictions.get(&key).ok_or_else(|| {
                        Error::MissingPredictionSet {
                            key: key.clone(),
                            entry: id.to_string(),
                        }
                    })?;
                    load_mask_with_classes(manifest.resolve(path), Some(num_classes))
                }
            })
            .collect::<Result<_>>()?;
        let members: Vec<&LabelMask> = member_idx.iter().map(|&i| &masks[i]).collect();
        let fused = majority_vote(&members, &config.ensemble)?;
        for (m, pred) in matrices.iter_mut().zip(masks.iter().chain([&fused])) {
            m.accumulate(pred, gt)?;
        }
    }
    Ok(matrices)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
    Markdown,
}

impl ReportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ReportFormat::Csv => "csv",
            ReportFormat::Json => "json",
            ReportFormat::Markdown => "md",
        }
    }
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            other => Err(Error::UnknownFormat(other.to_string())),
        }
    }
}

pub fn emit_report(report: &SweepReport, format: ReportFormat) -> Result<Vec<u8>> {
    report.validate()?;
    match format {
        ReportFormat::Csv => report_csv(report),
        ReportFormat::Json => Ok((serde_json::to_string_pretty(report)? + "\n").into_bytes()),
        ReportFormat::Markdown => Ok(report_markdown(report).into_bytes()),
    }
}

fn fraction(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |v| format!("{v:.6}"))
}

fn percent(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |v| format!("{:.2}", v * 100.0))
}

fn report_csv(report: &SweepReport) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["noise_type".to_string(), "noise_level".to_string()];
    header.extend(report.predictors.iter().cloned());
    header.push(ENSEMBLE_COLUMN.to_string());
    w.write_record(&header)?;
    for row in &report.rows {
        let mut rec = vec![row.type_label().to_string(), row.level_label().to_string()];
        rec.extend(row.predictors.iter().map(|b| fraction(b.miou)));
        rec.push(fraction(row.ensemble.miou));
        w.write_record(&rec)?;
    }
    w.into_inner()
        .map_err(|e| Error::Csv(e.into_error().into()))
}

fn family_title(f: Option<NoiseFamily>) -> &'static str {
    match f {
        None => "None",
        Some(NoiseFamily::Gaussian) => "Gaussian",
        Some(NoiseFamily::SaltPepper) => "Salt-and-Pepper",
        Some(NoiseFamily::Speckle) => "Speckle",
    }
}

fn level_title(l: Option<NoiseLevel>) -> &'static str {
    match l {
        None => "Clean",
        Some(NoiseLevel::Low) => "Low",
        Some(NoiseLevel::Medium) => "Medium",
        Some(NoiseLevel::High) => "High",
    }
}

/// mIOU grid in percent.
fn report_markdown(report: &SweepReport) -> String {
    let mut out = String::new();
    let _ = write!(out, "| Noise Type | Noise Level |");
    for p in &report.predictors {
        let _ = write!(out, " {p} |");
    }
    out.push_str(" Ensemble Score |\n|---|---|");
    out.push_str(&"---|".repeat(report.predictors.len() + 1));
    out.push('\n');
    for row in &report.rows {
        let _ = write!(
            out,
            "| {} | {} |",
            family_title(row.noise_type),
            level_title(row.noise_level)
        );
        for b in &row.predictors {
            let _ = write!(out, " {} |", percent(b.miou));
        }
        let _ = writeln!(out, " {} |", percent(row.ensemble.miou));
    }
    out
}

/// Member scores next to the fused score on clean data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub members: Vec<(String, Option<f64>)>,
    pub ensemble: Option<f64>,
}

impl EnsembleSummary {
    pub fn from_matrices(
        config: &EnsembleConfig,
        members: &[ConfusionMatrix],
        ensemble: &ConfusionMatrix,
        class_filter: Option<&[usize]>,
    ) -> Result<Self> {
        config.validate()?;
        if members.len() != config.len() {
            return Err(Error::InvalidParameter(format!(
                "{} matrices for {} members",
                members.len(),
                config.len()
            )));
        }
        Ok(Self {
            members: config
                .member_names
                .iter()
                .zip(members)
                .map(|(n, m)| (n.clone(), m.miou(class_filter)))
                .collect(),
            ensemble: ensemble.miou(class_filter),
        })
    }

    pub fn to_markdown(&self) -> String {
        let mut out = String::from(
            "| Network Name | mIOU Score (%) | Ensembled Score (%) |\n|---|---|---|\n",
        );
        for (i, (name, score)) in self.members.iter().enumerate() {
            let fused = if i == 0 {
                percent(self.ensemble)
            } else {
                "–".into()
            };
            let _ = writeln!(out, "| {name} | {} | {fused} |", percent(*score));
        }
        out
    }
}

pub fn summarize_ensemble(report: &SweepReport) -> Result<EnsembleSummary> {
    let base = report
        .baseline()
        .ok_or_else(|| Error::InsufficientCells("report has no baseline row".into()))?;
    let members = report
        .ensemble
        .member_names
        .iter()
        .map(|n| {
            report
                .column(n)
                .map(|c| (n.clone(), base.predictors[c].miou))
                .ok_or_else(|| Error::InvalidConfig(format!("member `{n}` missing from report")))
        })
        .collect::<Result<_>>()?;
    Ok(EnsembleSummary {
        members,
        ensemble: base.ensemble.miou,
    })
}

/// Ordinary least-squares slope of `ys` against `xs`; `None` when the
/// inputs are shorter than two points or `xs` is constant.
pub fn ols_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilySlopes {
    pub family: NoiseFamily,
    /// Slope of mIOU per unit sigma, per predictor column.
    pub predictors: Vec<(String, f64)>,
    pub ensemble: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegradationProfile {
    pub families: Vec<FamilySlopes>,
}

impl DegradationProfile {
    pub fn family(&self, f: NoiseFamily) -> Option<&FamilySlopes> {
        self.families.iter().find(|s| s.family == f)
    }
}

/// Least-squares slope of mIOU against sigma over the baseline and the
/// three levels, for every family present in the report.
pub fn degradation_profile(report: &SweepReport) -> Result<DegradationProfile> {
    let base = report
        .baseline()
        .ok_or_else(|| Error::InsufficientCells("report has no baseline row".into()))?;
    let mut families: Vec<NoiseFamily> = Vec::new();
    for f in report.rows.iter().filter_map(|r| r.noise_type) {
        if !families.contains(&f) {
            families.push(f);
        }
    }
    if families.is_empty() {
        return Err(Error::InsufficientCells("report has no noisy cells".into()));
    }
    let mut out = Vec::new();
    for family in families {
        let mut rows = vec![base];
        for level in NoiseLevel::ALL {
            rows.push(report.row(family, level).ok_or_else(|| {
                Error::InsufficientCells(format!("{family} is missing level {level}"))
            })?);
        }
        let xs: Vec<f64> = rows.iter().map(|r| r.sigma).collect();
        let slope = |name: &str| -> Result<f64> {
            let ys: Vec<f64> = rows
                .iter()
                .map(|r| {
                    report.miou(r, name).ok_or_else(|| {
                        Error::InsufficientCells(format!(
                            "undefined mIOU for {name} under {family}"
                        ))
                    })
                })
                .collect::<Result<_>>()?;
            ols_slope(&xs, &ys)
                .ok_or_else(|| Error::InsufficientCells("degenerate sigma grid".into()))
        };
        out.push(FamilySlopes {
            family,
            predictors: report
                .predictors
                .iter()
                .map(|p| Ok((p.clone(), slope(p)?)))
                .collect::<Result<_>>()?,
            ensemble: slope(ENSEMBLE_COLUMN)?,
        });
    }
    Ok(DegradationProfile { families: out })
}
