//! Applies each noise family at each named level to a gradient image and
//! reports how far the result moved from the original.
//!
//! `cargo run --example noise_injection [-- out_dir]`

use segvote::mask::{save_image, BitDepth};
use segvote::{ImageBuffer, NoiseFamily, NoiseLevel, NoiseSpec};

fn main() -> segvote::Result<()> {
    let (w, h) = (128u32, 64u32);
    let samples = (0..w * h)
        .map(|i| (i % w) as f64 / (w - 1) as f64)
        .collect();
    let img = ImageBuffer::new(w, h, 1, samples)?;
    let out_dir = std::env::args().nth(1).map(std::path::PathBuf::from);

    for family in NoiseFamily::ALL {
        for level in NoiseLevel::ALL {
            let spec = NoiseSpec::from_level(family, level, 2024);
            let noisy = spec.apply(&img)?;
            let rms = (noisy
                .samples()
                .iter()
                .zip(img.samples())
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                / img.samples().len() as f64)
                .sqrt();
            println!(
                "{:<12} {:<7} sigma {:<5} rms change {rms:.4}",
                family, level, spec.sigma
            );
            if let Some(dir) = &out_dir {
                std::fs::create_dir_all(dir).map_err(|e| segvote::Error::Io {
                    path: dir.clone(),
                    source: e,
                })?;
                save_image(
                    &noisy,
                    dir.join(format!("{family}_{level}.png")),
                    BitDepth::Sixteen,
                )?;
            }
        }
    }
    Ok(())
}
