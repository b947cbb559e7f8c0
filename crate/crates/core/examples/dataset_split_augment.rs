//! Splits a manifest into train and test partitions and augments a few
//! training pairs.
//!
//! `cargo run --example dataset_split_augment`

use segvote::dataset::{split_ids, DEFAULT_AUGMENT_PROB, DEFAULT_TEST_FRACTION};
use segvote::{augment, DatasetManifest, ImageBuffer, LabelMask};

fn main() -> segvote::Result<()> {
    let entries: Vec<_> = (0..10)
        .map(|i| {
            serde_json::json!({
                "id": format!("frame_{i:02}"),
                "image": format!("images/frame_{i:02}.png"),
                "gt_mask": format!("gt/frame_{i:02}.png"),
            })
        })
        .collect();
    let text = serde_json::json!({ "name": "demo", "entries": entries }).to_string();
    let manifest = DatasetManifest::from_json(&text, ".")?;
    let parts = segvote::split(&manifest, DEFAULT_TEST_FRACTION, 7)?;
    println!("train {:?}", parts.train_ids);
    println!("test  {:?}", parts.test_ids);

    // the published partition sizes
    for n in [2100, 3000, 2000] {
        let ids: Vec<String> = (0..n).map(|i| i.to_string()).collect();
        let s = split_ids(&ids, DEFAULT_TEST_FRACTION, 0)?;
        println!("{n} -> {}/{}", s.train_ids.len(), s.test_ids.len());
    }

    let img = ImageBuffer::new(4, 2, 1, (0..8).map(|v| v as f64 / 7.0).collect())?;
    let mask = LabelMask::new(4, 2, vec![0, 0, 1, 1, 0, 2, 2, 1], 3)?;
    for seed in 0..12 {
        let out = augment(&img, &mask, DEFAULT_AUGMENT_PROB, seed)?;
        match out.applied {
            Some(t) => println!("seed {seed:>2}: {t:?} -> mask {:?}", out.mask.labels()),
            None => println!("seed {seed:>2}: unchanged"),
        }
    }
    Ok(())
}
