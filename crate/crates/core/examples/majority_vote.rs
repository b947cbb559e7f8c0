//! Fuses three member masks by pixel-wise majority vote.
//!
//! Ties go to the earliest member in the configured order, so the order in
//! `EnsembleConfig` doubles as a priority list.
//!
//! `cargo run --example majority_vote`

use segvote::{majority_vote, vote_margin, EnsembleConfig, LabelMask, IGNORE};

fn main() -> segvote::Result<()> {
    let hamm = LabelMask::new(4, 1, vec![1, 0, 2, IGNORE], 3)?;
    let deeplab = LabelMask::new(4, 1, vec![1, 2, 0, IGNORE], 3)?;
    let yolact = LabelMask::new(4, 1, vec![0, 2, 1, 1], 3)?;
    let members = [&hamm, &deeplab, &yolact];

    let cfg = EnsembleConfig::new(["hamm", "deeplab", "yolact"])?;
    let fused = majority_vote(&members, &cfg)?;
    let margin = vote_margin(&members, &cfg)?;
    println!("fused   {:?}", fused.labels());
    println!("margin  {:?}", margin.values);

    // a heavier first member wins the three-way tie at pixel 2 either way,
    // and now also outvotes the pair at pixel 1
    let weighted =
        EnsembleConfig::new(["hamm", "deeplab", "yolact"])?.with_weights(vec![2.5, 1.0, 1.0])?;
    println!(
        "weighted {:?}",
        majority_vote(&members, &weighted)?.labels()
    );
    Ok(())
}
