//! Runs a full noise-robustness sweep over a generated dataset and prints
//! the report grid, the ensemble summary and per-family degradation slopes.
//!
//! `cargo run --example robustness_sweep`

use std::path::Path;

use segvote::harness::{degradation_profile, PredictorSource};
use segvote::mask::{save_image, BitDepth};
use segvote::synth::{Sensitivity, Structure};
use segvote::{
    emit_report, run_sweep, save_mask, summarize_ensemble, EnsembleConfig, ImageBuffer, LabelMask,
    PredictorSpec, ReportFormat, SweepConfig,
};

fn write_dataset(dir: &Path, n: u32) -> segvote::Result<()> {
    let io = |e| segvote::Error::Io {
        path: dir.to_path_buf(),
        source: e,
    };
    std::fs::create_dir_all(dir.join("gt")).map_err(io)?;
    std::fs::create_dir_all(dir.join("img")).map_err(io)?;
    let (w, h) = (64u32, 40u32);
    let mut entries = Vec::new();
    for i in 0..n {
        let labels: Vec<u8> = (0..w * h)
            .map(|p| {
                let (x, y) = (p % w, p / w);
                if (14 + i % 5..24 + i % 5).contains(&y) {
                    1
                } else if y < 10 && (x + 7 * i) % 25 < 8 {
                    2
                } else {
                    0
                }
            })
            .collect();
        let img = ImageBuffer::new(
            w,
            h,
            1,
            labels.iter().map(|&l| 0.2 + 0.3 * l as f64).collect(),
        )?;
        save_mask(
            &LabelMask::new(w, h, labels, 3)?,
            dir.join(format!("gt/{i}.png")),
        )?;
        save_image(&img, dir.join(format!("img/{i}.png")), BitDepth::Eight)?;
        entries.push(serde_json::json!({
            "id": format!("frame{i}"),
            "image": format!("img/{i}.png"),
            "gt_mask": format!("gt/{i}.png"),
        }));
    }
    let manifest = serde_json::json!({ "name": "sweep-demo", "entries": entries });
    std::fs::write(dir.join("manifest.json"), manifest.to_string()).map_err(io)
}

fn main() -> segvote::Result<()> {
    let dir = std::env::temp_dir().join("segvote-robustness-sweep");
    write_dataset(&dir, 8)?;

    let config = SweepConfig {
        manifest: "manifest.json".into(),
        predictors: vec![
            PredictorSource::Synthetic(PredictorSpec::iid("hamm", 0.05, 1).with_sensitivity(
                Sensitivity {
                    gaussian: 0.8,
                    salt_pepper: 1.0,
                    speckle: 0.5,
                },
            )),
            PredictorSource::Synthetic(
                PredictorSpec::iid("deeplab", 0.06, 2)
                    .with_structure(Structure::Dilate {
                        radius: 1,
                        target_class: 1,
                    })
                    .with_sensitivity(Sensitivity {
                        gaussian: 1.0,
                        salt_pepper: 1.2,
                        speckle: 0.7,
                    }),
            ),
            PredictorSource::Synthetic(
                PredictorSpec::iid("yolact", 0.08, 3)
                    .with_structure(Structure::Erode {
                        radius: 1,
                        target_class: 1,
                    })
                    .with_sensitivity(Sensitivity::uniform(1.2)),
            ),
        ],
        ensemble: EnsembleConfig::new(["hamm", "deeplab", "yolact"])?,
        noise_families: segvote::NoiseFamily::ALL.to_vec(),
        levels: segvote::NoiseLevel::ALL.to_vec(),
        class_filter: None,
        num_classes: None,
        split: None,
        master_seed: 7,
        worker_count: 4,
        replicas: 1,
        base_dir: dir.clone(),
    };

    let report = run_sweep(&config)?;
    print!(
        "{}",
        String::from_utf8_lossy(&emit_report(&report, ReportFormat::Markdown)?)
    );
    println!();
    print!("{}", summarize_ensemble(&report)?.to_markdown());
    println!();
    for f in degradation_profile(&report)?.families {
        let members: Vec<String> = f
            .predictors
            .iter()
            .map(|(n, s)| format!("{n} {s:.3}"))
            .collect();
        println!(
            "{:<12} slopes: {} | ensemble {:.3}",
            f.family,
            members.join(", "),
            f.ensemble
        );
    }
    Ok(())
}
