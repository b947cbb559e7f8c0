//! Builds synthetic predictors with structured error modes and shows how
//! their mIOU falls as the flip probability grows with noise severity.
//!
//! `cargo run --example synthetic_predictors`

use segvote::synth::{Sensitivity, Structure};
use segvote::{
    predict, ConfusionMatrix, LabelMask, NoiseFamily, NoiseLevel, NoiseSpec, PredictorSpec,
};

fn scene() -> segvote::Result<LabelMask> {
    let (w, h) = (96u32, 64u32);
    let labels = (0..w * h)
        .map(|i| {
            let (x, y) = (i % w, i / w);
            if (24..36).contains(&y) {
                1
            } else if y < 20 && x % 30 < 10 {
                2
            } else {
                0
            }
        })
        .collect();
    LabelMask::new(w, h, labels, 3)
}

fn main() -> segvote::Result<()> {
    let gt = scene()?;
    let predictors = [
        PredictorSpec::iid("iid", 0.05, 1).with_sensitivity(Sensitivity::uniform(1.0)),
        PredictorSpec::iid("thick", 0.03, 2)
            .with_structure(Structure::Dilate {
                radius: 2,
                target_class: 1,
            })
            .with_sensitivity(Sensitivity::uniform(0.8)),
        PredictorSpec::iid("thin", 0.03, 3)
            .with_structure(Structure::Erode {
                radius: 2,
                target_class: 1,
            })
            .with_sensitivity(Sensitivity::uniform(0.8)),
        PredictorSpec::iid("patchy", 0.03, 4)
            .with_structure(Structure::DropComponent {
                fraction: 0.5,
                target_class: 2,
            })
            .with_sensitivity(Sensitivity::uniform(0.8)),
    ];

    print!("{:<8}", "sigma");
    for p in &predictors {
        print!("{:>10}", p.name);
    }
    println!();
    let cells = std::iter::once(None)
        .chain(NoiseLevel::ALL.map(|l| Some(NoiseSpec::from_level(NoiseFamily::Gaussian, l, 0))));
    for noise in cells {
        print!("{:<8}", noise.as_ref().map_or(0.0, |n| n.sigma));
        for p in &predictors {
            let pred = predict(p, &gt, noise.as_ref())?;
            let miou = ConfusionMatrix::from_masks(3, &pred, &gt)?
                .miou(None)
                .unwrap_or(f64::NAN);
            print!("{miou:>10.4}");
        }
        println!();
    }
    Ok(())
}
