//! Classifies three typical failure shapes for a sidewalk class.
//!
//! `cargo run --example error_taxonomy`

use segvote::synth::{corrupt_structured, Magnitude, StructuredMode};
use segvote::{classify_errors, connected_components, LabelMask, Thresholds};

fn main() -> segvote::Result<()> {
    let (w, h) = (40usize, 24usize);
    let paint = |labels: &mut [u8], x0: usize, y0: usize, x1: usize, y1: usize, l: u8| {
        for y in y0..y1 {
            for x in x0..x1 {
                labels[y * w + x] = l;
            }
        }
    };
    let mut labels = vec![0u8; w * h];
    paint(&mut labels, 2, 4, 30, 16, 1);
    paint(&mut labels, 33, 18, 37, 22, 1);
    let gt = LabelMask::new(w as u32, h as u32, labels.clone(), 2)?;
    println!(
        "ground truth components: {:?}",
        connected_components(&gt, 1).sizes()
    );

    // a one-pixel seam cuts the large region in two
    paint(&mut labels, 16, 4, 17, 16, 0);
    let seam = LabelMask::new(w as u32, h as u32, labels, 2)?;
    let eroded = corrupt_structured(&gt, StructuredMode::Erode, Magnitude::Radius(3), 1, 0)?;
    let dropped = corrupt_structured(
        &gt,
        StructuredMode::DropComponent,
        Magnitude::Fraction(0.5),
        1,
        1,
    )?;

    let t = Thresholds::default();
    for (name, pred) in [
        ("identical", &gt),
        ("seam", &seam),
        ("eroded", &eroded),
        ("dropped", &dropped),
    ] {
        let r = classify_errors(pred, &gt, 1, &t)?;
        let verdicts: Vec<_> = r.verdicts.iter().map(|v| v.as_str()).collect();
        println!(
            "{name:<10} recall {:.3} precision {:.3} components {}->{} {:?}",
            r.recall, r.precision, r.gt_components, r.pred_components, verdicts
        );
    }
    Ok(())
}
