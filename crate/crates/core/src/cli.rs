//! Command-line front end.
//!
//! Exit codes: 0 on success, 1 on a domain error (bad input data or
//! configuration), 2 on a usage error.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::analysis::{classify_errors, histogram_csv, ErrorReport, Thresholds};
use crate::dataset::{augment, load_manifest, split, DEFAULT_AUGMENT_PROB, DEFAULT_TEST_FRACTION};
use crate::ensemble::{majority_vote, vote_margin, EnsembleConfig};
use crate::error::{Error, Result};
use crate::harness::{emit_report, run_sweep, summarize_ensemble, ReportFormat, SweepConfig};
use crate::mask::{
    infer_num_classes, load_image, load_mask, load_mask_with_classes, save_image, save_mask,
    BitDepth, LabelMask,
};
use crate::metrics::ConfusionMatrix;
use crate::noise::{NoiseFamily, NoiseLevel, NoiseSpec};
use crate::synth::{corrupt_iid, corrupt_structured, Magnitude, StructuredMode};

#[derive(Debug, Parser)]
#[command(
    name = "segvote",
    version,
    about = "Segmentation mask ensembling, scoring and robustness sweeps"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalOptions,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalOptions {
    /// Seed for randomized subcommands [default: 0; for sweep, the config's master_seed]
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Output file or directory, depending on the subcommand
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Output format (score/analyze: text|json; sweep: csv|json|markdown)
    #[arg(long, global = true)]
    pub format: Option<String>,

    /// Increase log verbosity on stderr (-v info, -vv debug)
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Score a prediction mask (or a manifest prediction set) against ground truth
    Score(ScoreArgs),
    /// Fuse prediction masks by pixel-wise majority vote
    Ensemble(EnsembleArgs),
    /// Perturb an image (or a directory of images) with noise
    Noise(NoiseArgs),
    /// Produce a synthetic prediction by corrupting a ground-truth mask
    Corrupt(CorruptArgs),
    /// Seeded train/test split of a manifest
    Split(SplitArgs),
    /// Randomly flip, rotate or scale an image and its mask together
    Augment(AugmentArgs),
    /// Check a manifest's schema, ids and file references
    ValidateManifest(ValidateArgs),
    /// Run a noise-robustness sweep and emit the report grid
    Sweep(SweepArgs),
    /// Classify segmentation failures for one class
    Analyze(AnalyzeArgs),
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    /// Prediction mask PNG
    #[arg(long, requires = "gt", conflicts_with = "manifest")]
    pub pred: Option<PathBuf>,
    /// Ground-truth mask PNG
    #[arg(long)]
    pub gt: Option<PathBuf>,
    /// Manifest whose entries are scored in aggregate
    #[arg(long, requires = "predictor")]
    pub manifest: Option<PathBuf>,
    /// Prediction-set key in the manifest (e.g. `hamm` or `hamm@gaussian:low`)
    #[arg(long)]
    pub predictor: Option<String>,
    /// Number of classes; inferred from the ground truth when omitted
    #[arg(long)]
    pub num_classes: Option<usize>,
    /// Restrict the mean to these class ids (comma separated)
    #[arg(long, value_delimiter = ',')]
    pub classes: Option<Vec<usize>>,
}

#[derive(Debug, Args)]
pub struct EnsembleArgs {
    /// Member masks, in priority order
    #[arg(required = true, num_args = 2..)]
    pub masks: Vec<PathBuf>,
    /// Ensemble config JSON (`member_names`, optional `weights`)
    #[arg(long, conflicts_with_all = ["names", "weights"])]
    pub config: Option<PathBuf>,
    /// Member names (comma separated); defaults to m0, m1, ...
    #[arg(long, value_delimiter = ',')]
    pub names: Option<Vec<String>>,
    /// Vote weights (comma separated)
    #[arg(long, value_delimiter = ',')]
    pub weights: Option<Vec<f64>>,
    /// Number of classes; defaults to the largest inferred from the inputs
    #[arg(long)]
    pub num_classes: Option<usize>,
    /// Also write the per-pixel vote margin as CSV rows
    #[arg(long)]
    pub margin_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FamilyArg {
    Gaussian,
    SaltPepper,
    Speckle,
}

impl From<FamilyArg> for NoiseFamily {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::Gaussian => NoiseFamily::Gaussian,
            FamilyArg::SaltPepper => NoiseFamily::SaltPepper,
            FamilyArg::Speckle => NoiseFamily::Speckle,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum LevelArg {
    Low,
    Medium,
    High,
}

impl From<LevelArg> for NoiseLevel {
    fn from(l: LevelArg) -> Self {
        match l {
            LevelArg::Low => NoiseLevel::Low,
            LevelArg::Medium => NoiseLevel::Medium,
            LevelArg::High => NoiseLevel::High,
        }
    }
}

#[derive(Debug, Args)]
pub struct NoiseArgs {
    /// Input image (PNG or PNM), or a directory in batch mode
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum)]
    pub family: FamilyArg,
    /// Named severity level
    #[arg(
        long,
        value_enum,
        required_unless_present = "sigma",
        conflicts_with = "sigma"
    )]
    pub level: Option<LevelArg>,
    /// Explicit severity (std for gaussian/speckle, corrupted fraction for salt_pepper)
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Write 8-bit instead of 16-bit PNGs
    #[arg(long)]
    pub eight_bit: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum CorruptMode {
    Iid,
    Dilate,
    Erode,
    DropComponent,
}

#[derive(Debug, Args)]
pub struct CorruptArgs {
    /// Ground-truth mask PNG
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long, value_enum)]
    pub mode: CorruptMode,
    /// Flip probability for iid mode
    #[arg(long, default_value_t = 0.1)]
    pub p: f64,
    /// Radius (dilate/erode) or component fraction (drop-component)
    #[arg(long)]
    pub magnitude: Option<f64>,
    /// Class the structured modes act on
    #[arg(long, default_value_t = 1)]
    pub target_class: u8,
    #[arg(long)]
    pub num_classes: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, default_value_t = DEFAULT_TEST_FRACTION)]
    pub test_fraction: f64,
}

#[derive(Debug, Args)]
pub struct AugmentArgs {
    #[arg(long)]
    pub image: PathBuf,
    #[arg(long)]
    pub mask: PathBuf,
    /// Probability that a transform is applied
    #[arg(long, default_value_t = DEFAULT_AUGMENT_PROB)]
    pub prob: f64,
    /// Where to write the augmented image
    #[arg(long)]
    pub out_image: PathBuf,
    /// Where to write the augmented mask
    #[arg(long)]
    pub out_mask: PathBuf,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub manifest: PathBuf,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Sweep config JSON
    #[arg(long)]
    pub config: PathBuf,
    /// Override the config's worker count
    #[arg(long)]
    pub workers: Option<usize>,
    /// Record wall-clock start/end times in the report metadata
    #[arg(long)]
    pub timestamps: bool,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Prediction mask PNG
    #[arg(long, requires = "gt", conflicts_with = "manifest")]
    pub pred: Option<PathBuf>,
    /// Ground-truth mask PNG
    #[arg(long)]
    pub gt: Option<PathBuf>,
    /// Manifest to analyze entry by entry
    #[arg(long, requires = "predictor")]
    pub manifest: Option<PathBuf>,
    /// Prediction-set key in the manifest
    #[arg(long)]
    pub predictor: Option<String>,
    /// Class to analyze
    #[arg(long = "class")]
    pub class_id: u8,
    #[arg(long, default_value_t = Thresholds::default().recall_hi)]
    pub recall_hi: f64,
    #[arg(long, default_value_t = Thresholds::default().recall_lo)]
    pub recall_lo: f64,
    #[arg(long, default_value_t = Thresholds::default().epsilon)]
    pub epsilon: f64,
}

/// Parses `argv` (including the program name), runs the subcommand and
/// returns the process exit code.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let level = match cli.global.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .target(env_logger::Target::Stderr)
        .try_init();
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::UnknownFormat(_) => 2,
                _ => 1,
            }
        }
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    let g = &cli.global;
    let seed = g.seed.unwrap_or(0);
    match &cli.command {
        Command::Score(a) => score(a, g),
        Command::Ensemble(a) => ensemble(a, g),
        Command::Noise(a) => noise(a, g, seed),
        Command::Corrupt(a) => corrupt(a, g, seed),
        Command::Split(a) => {
            let m = load_manifest(&a.manifest)?;
            let s = split(&m, a.test_fraction, seed)?;
            write_output(
                g.out.as_deref(),
                (serde_json::to_string_pretty(&s)? + "\n").as_bytes(),
            )
        }
        Command::Augment(a) => {
            let img = load_image(&a.image)?;
            let mask = load_mask(&a.mask)?;
            let out = augment(&img, &mask, a.prob, seed)?;
            save_image(&out.image, &a.out_image, BitDepth::Sixteen)?;
            save_mask(&out.mask, &a.out_mask)?;
            let descriptor = serde_json::json!({ "seed": seed, "applied": out.applied });
            write_output(g.out.as_deref(), (descriptor.to_string() + "\n").as_bytes())
        }
        Command::ValidateManifest(a) => {
            let m = load_manifest(&a.manifest)?;
            println!("ok: manifest `{}` with {} entries", m.name, m.len());
            Ok(())
        }
        Command::Sweep(a) => sweep(a, g),
        Command::Analyze(a) => analyze(a, g),
    }
}

fn text_or_json(format: Option<&str>) -> Result<bool> {
    match format {
        None | Some("text") => Ok(false),
        Some("json") => Ok(true),
        Some(other) => Err(Error::UnknownFormat(other.to_string())),
    }
}

fn write_output(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, bytes).map_err(|e| Error::io(p, e)),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(bytes)
                .and_then(|_| stdout.flush())
                .map_err(|e| Error::io("<stdout>", e))
        }
    }
}

fn score(a: &ScoreArgs, g: &GlobalOptions) -> Result<()> {
    let json = text_or_json(g.format.as_deref())?;
    let matrix = match (&a.pred, &a.gt, &a.manifest, &a.predictor) {
        (Some(pred), Some(gt), None, _) => {
            let gt = load_mask_with_classes(gt, a.num_classes)?;
            let k = a.num_classes.unwrap_or(gt.num_classes());
            let pred = load_mask_with_classes(pred, Some(k))?;
            ConfusionMatrix::from_masks(k, &pred, &gt)?
        }
        (None, _, Some(manifest), Some(key)) => {
            let m = load_manifest(manifest)?;
            let gts: Vec<LabelMask> = m
                .entries
                .iter()
                .map(|e| load_mask_with_classes(m.resolve(&e.gt_mask), a.num_classes))
                .collect::<Result<_>>()?;
            let k = a.num_classes.unwrap_or_else(|| {
                gts.iter()
                    .map(|g| infer_num_classes(g.labels()))
                    .max()
                    .unwrap_or(1)
            });
            let mut cm = ConfusionMatrix::new(k);
            for (e, gt) in m.entries.iter().zip(&gts) {
                let path = e
                    .predictions
                    .get(key)
                    .ok_or_else(|| Error::MissingPredictionSet {
                        key: key.clone(),
                        entry: e.id.clone(),
                    })?;
                let pred = load_mask_with_classes(m.resolve(path), Some(k))?;
                cm.accumulate(&pred, gt)?;
            }
            cm
        }
        _ => {
            return Err(Error::InvalidParameter(
                "score needs --pred and --gt, or --manifest and --predictor".into(),
            ))
        }
    };
    let breakdown = matrix.breakdown(a.classes.as_deref());
    let text = if json {
        let v = serde_json::json!({ "matrix": matrix, "breakdown": breakdown });
        serde_json::to_string_pretty(&v)? + "\n"
    } else {
        let mut s = format!(
            "mIOU {}\n",
            breakdown
                .miou
                .map_or("undefined".into(), |m| format!("{m:.6}"))
        );
        for (c, iou) in breakdown.per_class.iter().enumerate() {
            let v = iou.map_or("undefined".into(), |v| format!("{v:.6}"));
            s.push_str(&format!("class {c} IoU {v}\n"));
        }
        s
    };
    write_output(g.out.as_deref(), text.as_bytes())
}

fn ensemble(a: &EnsembleArgs, g: &GlobalOptions) -> Result<()> {
    let out = g
        .out
        .as_deref()
        .ok_or_else(|| Error::InvalidParameter("ensemble needs --out for the fused mask".into()))?;
    let config = match &a.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            let cfg: EnsembleConfig = serde_json::from_str(&text)
                .map_err(|e| Error::InvalidConfig(format!("{}: {e}", p.display())))?;
            cfg.validate()?;
            cfg
        }
        None => {
            let names = a
                .names
                .clone()
                .unwrap_or_else(|| (0..a.masks.len()).map(|i| format!("m{i}")).collect());
            let cfg = EnsembleConfig::new(names)?;
            match &a.weights {
                Some(w) => cfg.with_weights(w.clone())?,
                None => cfg,
            }
        }
    };
    let raw: Vec<LabelMask> = a.masks.iter().map(load_mask).collect::<Result<_>>()?;
    let k = a
        .num_classes
        .unwrap_or_else(|| raw.iter().map(LabelMask::num_classes).max().unwrap_or(1));
    let masks: Vec<LabelMask> = raw
        .into_iter()
        .map(|m| m.with_num_classes(k))
        .collect::<Result<_>>()?;
    let refs: Vec<&LabelMask> = masks.iter().collect();
    let fused = majority_vote(&refs, &config)?;
    save_mask(&fused, out)?;
    if let Some(p) = &a.margin_out {
        let margin = vote_margin(&refs, &config)?;
        let mut text = String::new();
        for row in margin.values.chunks(margin.width as usize) {
            let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            text.push_str(&cells.join(","));
            text.push('\n');
        }
        std::fs::write(p, text).map_err(|e| Error::io(p, e))?;
    }
    Ok(())
}

fn noise(a: &NoiseArgs, g: &GlobalOptions, seed: u64) -> Result<()> {
    let out = g
        .out
        .as_deref()
        .ok_or_else(|| Error::InvalidParameter("noise needs --out".into()))?;
    let family = NoiseFamily::from(a.family);
    let spec = match (a.level, a.sigma) {
        (Some(l), _) => NoiseSpec::from_level(family, l.into(), seed),
        (None, Some(s)) => NoiseSpec::with_sigma(family, s, seed)?,
        (None, None) => unreachable!("clap requires --level or --sigma"),
    };
    let depth = if a.eight_bit {
        BitDepth::Eight
    } else {
        BitDepth::Sixteen
    };
    if a.input.is_dir() {
        std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
        let mut files: Vec<PathBuf> = std::fs::read_dir(&a.input)
            .map_err(|e| Error::io(&a.input, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                p.extension().and_then(|x| x.to_str()).is_some_and(|x| {
                    matches!(
                        x.to_ascii_lowercase().as_str(),
                        "png" | "ppm" | "pgm" | "pnm"
                    )
                })
            })
            .collect();
        files.sort();
        for path in files {
            let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("image");
            // per-file seed so images in a batch get independent noise
            let mut file_spec = spec;
            file_spec.seed = crate::rng::derive_seed(seed, &["batch", name]);
            let noisy = file_spec.apply(&load_image(&path)?)?;
            save_image(&noisy, out.join(format!("{name}.png")), depth)?;
        }
        Ok(())
    } else {
        let noisy = spec.apply(&load_image(&a.input)?)?;
        save_image(&noisy, out, depth)
    }
}

fn corrupt(a: &CorruptArgs, g: &GlobalOptions, seed: u64) -> Result<()> {
    let out = g
        .out
        .as_deref()
        .ok_or_else(|| Error::InvalidParameter("corrupt needs --out".into()))?;
    let gt = load_mask_with_classes(&a.gt, a.num_classes)?;
    let need = |what: &str| {
        a.magnitude
            .ok_or_else(|| Error::InvalidParameter(format!("--magnitude ({what}) is required")))
    };
    let radius = |v: f64| {
        if v.fract() != 0.0 || v < 1.0 {
            Err(Error::InvalidParameter(format!(
                "radius must be a positive integer, got {v}"
            )))
        } else {
            Ok(Magnitude::Radius(v as u32))
        }
    };
    let result = match a.mode {
        CorruptMode::Iid => corrupt_iid(&gt, a.p, seed)?,
        CorruptMode::Dilate => corrupt_structured(
            &gt,
            StructuredMode::Dilate,
            radius(need("radius")?)?,
            a.target_class,
            seed,
        )?,
        CorruptMode::Erode => corrupt_structured(
            &gt,
            StructuredMode::Erode,
            radius(need("radius")?)?,
            a.target_class,
            seed,
        )?,
        CorruptMode::DropComponent => corrupt_structured(
            &gt,
            StructuredMode::DropComponent,
            Magnitude::Fraction(need("fraction")?),
            a.target_class,
            seed,
        )?,
    };
    save_mask(&result, out)
}

fn sweep(a: &SweepArgs, g: &GlobalOptions) -> Result<()> {
    let format: ReportFormat = g.format.as_deref().unwrap_or("csv").parse()?;
    let mut config = SweepConfig::load(&a.config)?;
    if let Some(seed) = g.seed {
        config.master_seed = seed;
    }
    if let Some(w) = a.workers {
        config.worker_count = w;
    }
    let started = unix_now();
    let mut report = run_sweep(&config)?;
    if a.timestamps {
        report.stamp(started, unix_now());
    }
    let bytes = emit_report(&report, format)?;
    match &g.out {
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            let path = dir.join(format!("report.{}", format.extension()));
            std::fs::write(&path, &bytes).map_err(|e| Error::io(&path, e))?;
            let summary = summarize_ensemble(&report)?.to_markdown();
            let path = dir.join("summary.md");
            std::fs::write(&path, summary).map_err(|e| Error::io(&path, e))
        }
        None => write_output(None, &bytes),
    }
}

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

fn analyze(a: &AnalyzeArgs, g: &GlobalOptions) -> Result<()> {
    text_or_json(g.format.as_deref())?;
    let thresholds = Thresholds {
        recall_hi: a.recall_hi,
        recall_lo: a.recall_lo,
        epsilon: a.epsilon,
    };
    match (&a.pred, &a.gt, &a.manifest, &a.predictor) {
        (Some(pred), Some(gt), None, _) => {
            let report =
                classify_errors(&load_mask(pred)?, &load_mask(gt)?, a.class_id, &thresholds)?;
            let text = serde_json::to_string_pretty(&report)? + "\n";
            write_output(g.out.as_deref(), text.as_bytes())
        }
        (None, _, Some(manifest), Some(key)) => {
            let m = load_manifest(manifest)?;
            let reports: Vec<ErrorReport> = m
                .entries
                .iter()
                .map(|e| {
                    let path =
                        e.predictions
                            .get(key)
                            .ok_or_else(|| Error::MissingPredictionSet {
                                key: key.clone(),
                                entry: e.id.clone(),
                            })?;
                    let pred = load_mask(m.resolve(path))?;
                    let gt = load_mask(m.resolve(&e.gt_mask))?;
                    Ok(classify_errors(&pred, &gt, a.class_id, &thresholds)?.with_entry_id(&e.id))
                })
                .collect::<Result<_>>()?;
            let histogram = histogram_csv(&reports)?;
            match &g.out {
                Some(dir) => {
                    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
                    for r in &reports {
                        let id = r.entry_id.as_deref().unwrap_or_default();
                        let path = dir.join(format!("{id}.json"));
                        let text = serde_json::to_string_pretty(r)? + "\n";
                        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
                    }
                    let path = dir.join("verdicts.csv");
                    std::fs::write(&path, histogram).map_err(|e| Error::io(&path, e))
                }
                None => write_output(None, histogram.as_bytes()),
            }
        }
        _ => Err(Error::InvalidParameter(
            "analyze needs --pred and --gt, or --manifest and --predictor".into(),
        )),
    }
}
