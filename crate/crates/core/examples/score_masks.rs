//! Scores a prediction against ground truth and prints per-class IoU.
//!
//! `cargo run --example score_masks`

use segvote::{ConfusionMatrix, LabelMask, IGNORE};

fn main() -> segvote::Result<()> {
    // 0 road, 1 sidewalk, 2 vegetation; 255 is void and never scored
    #[rustfmt::skip]
    let gt = LabelMask::new(6, 3, vec![
        0, 0, 1, 1, 2, 2,
        0, 0, 1, 1, 2, 2,
        0, 0, 1, 1, IGNORE, 2,
    ], 3)?;
    #[rustfmt::skip]
    let pred = LabelMask::new(6, 3, vec![
        0, 1, 1, 1, 2, 2,
        0, 0, 1, 0, 2, 2,
        0, 0, 1, 1, 0, 2,
    ], 3)?;

    let cm = ConfusionMatrix::from_masks(3, &pred, &gt)?;
    for (class, iou) in cm.iou_per_class().iter().enumerate() {
        match iou {
            Some(v) => println!("class {class}: IoU {v:.4}"),
            None => println!("class {class}: undefined"),
        }
    }
    println!("mIOU          {:.4}", cm.miou(None).unwrap_or(f64::NAN));
    println!(
        "mIOU sidewalk {:.4}",
        cm.miou(Some(&[1])).unwrap_or(f64::NAN)
    );

    // matrices from separate images merge into a dataset-level score
    let mut total = ConfusionMatrix::new(3);
    total.merge_from(&cm)?;
    total.accumulate(&gt, &gt)?;
    println!("two images    {:.4}", total.miou(None).unwrap_or(f64::NAN));
    Ok(())
}
