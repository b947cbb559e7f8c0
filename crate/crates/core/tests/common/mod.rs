//! Test-only oracles and fixture builders. The oracles here share no code
//! with the library paths they check.

#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap};
use std::path::{Path, PathBuf};

use segvote::{ImageBuffer, LabelMask, IGNORE};

pub fn manifest_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

pub fn golden_dir() -> PathBuf {
    manifest_dir().join("tests/golden")
}

pub fn golden_fixture_dir() -> PathBuf {
    manifest_dir().join("tests/fixtures/golden")
}

pub fn update_golden() -> bool {
    std::env::var_os("UPDATE_GOLDEN").is_some()
}

/// Compares `actual` with a committed golden file, rewriting it instead
/// when `UPDATE_GOLDEN` is set.
pub fn assert_golden(name: &str, actual: &[u8]) {
    let path = golden_dir().join(name);
    if update_golden() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, actual).unwrap();
        return;
    }
    let expected = std::fs::read(&path)
        .unwrap_or_else(|e| panic!("missing golden file {}: {e}", path.display()));
    assert!(
        expected == actual,
        "golden mismatch for {name}\n--- expected\n{}\n--- actual\n{}",
        String::from_utf8_lossy(&expected),
        String::from_utf8_lossy(actual)
    );
}

// ---------------------------------------------------------------- oracles

/// Per-class IoU from explicit pixel sets: `|P ∩ G| / |P ∪ G|` where both
/// sets range over pixels that are valid in both masks.
pub fn naive_iou(pred: &[u8], gt: &[u8], k: usize) -> Vec<Option<f64>> {
    let valid: Vec<usize> = (0..gt.len())
        .filter(|&i| gt[i] != IGNORE && pred[i] != IGNORE)
        .collect();
    (0..k as u8)
        .map(|c| {
            let p: BTreeSet<usize> = valid.iter().copied().filter(|&i| pred[i] == c).collect();
            let g: BTreeSet<usize> = valid.iter().copied().filter(|&i| gt[i] == c).collect();
            let union = p.union(&g).count();
            let inter = p.intersection(&g).count();
            (union > 0).then(|| inter as f64 / union as f64)
        })
        .collect()
}

pub fn naive_miou(per_class: &[Option<f64>]) -> Option<f64> {
    let defined: Vec<f64> = per_class.iter().flatten().copied().collect();
    (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64)
}

/// Vote at a single pixel by counting each candidate label's supporters.
pub fn tally_vote(votes: &[u8], weights: &[f64]) -> (u8, f64) {
    let mut mass: HashMap<u8, f64> = HashMap::new();
    for (&v, &w) in votes.iter().zip(weights) {
        if v != IGNORE {
            *mass.entry(v).or_default() += w;
        }
    }
    if mass.is_empty() {
        return (IGNORE, 0.0);
    }
    let best = mass.values().copied().fold(f64::MIN, f64::max);
    let tied: BTreeSet<u8> = mass
        .iter()
        .filter(|(_, m)| **m == best)
        .map(|(l, _)| *l)
        .collect();
    let winner = *votes.iter().find(|v| tied.contains(v)).unwrap();
    let runner_up = mass
        .iter()
        .filter(|(l, _)| **l != winner)
        .map(|(_, m)| *m)
        .fold(0.0, f64::max);
    (winner, best - runner_up)
}

/// Recursive-free flood fill with an explicit stack, 8-connectivity.
/// Returns component sizes ordered by first pixel in row-major order.
pub fn flood_fill_sizes(labels: &[u8], w: usize, h: usize, class: u8) -> Vec<usize> {
    let mut seen = vec![false; labels.len()];
    let mut sizes = Vec::new();
    for start in 0..labels.len() {
        if labels[start] != class || seen[start] {
            continue;
        }
        let mut stack = vec![start];
        seen[start] = true;
        let mut size = 0;
        while let Some(i) = stack.pop() {
            size += 1;
            let (x, y) = ((i % w) as isize, (i / w) as isize);
            for dy in -1..=1isize {
                for dx in -1..=1isize {
                    let (nx, ny) = (x + dx, y + dy);
                    if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                        continue;
                    }
                    let j = ny as usize * w + nx as usize;
                    if labels[j] == class && !seen[j] {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
        }
        sizes.push(size);
    }
    sizes
}

// ---------------------------------------------------------------- fixtures

pub const SCENE_CLASSES: usize = 3;

/// Street-like scene: road (0), a sidewalk band (1) with a gap, and
/// vegetation patches (2). A few pixels are void.
pub fn street_scene(w: u32, h: u32, variant: u32) -> LabelMask {
    let band_top = h / 3 + variant % 4;
    let band_bottom = band_top + h / 4;
    let gap = (w / 3 + 3 * variant) % w;
    let mut labels = Vec::with_capacity((w * h) as usize);
    for y in 0..h {
        for x in 0..w {
            let l = if (y + variant).is_multiple_of(17) && x % 13 == 5 {
                IGNORE
            } else if y >= band_top && y < band_bottom && !(gap..gap + 3).contains(&x) {
                1
            } else if y < band_top && (x + 2 * variant) % 19 < 6 && y > 2 {
                2
            } else {
                0
            };
            labels.push(l);
        }
    }
    LabelMask::new(w, h, labels, SCENE_CLASSES).unwrap()
}

/// Grayscale rendering of a mask.
pub fn render(mask: &LabelMask) -> ImageBuffer {
    let samples = mask
        .labels()
        .iter()
        .map(|&l| match l {
            0 => 0.35,
            1 => 0.7,
            2 => 0.2,
            _ => 0.0,
        })
        .collect();
    ImageBuffer::new(mask.width(), mask.height(), 1, samples).unwrap()
}

/// Writes `n` scenes plus a manifest to `dir`, returning the manifest path.
pub fn write_scene_dataset(dir: &Path, n: u32, w: u32, h: u32) -> PathBuf {
    std::fs::create_dir_all(dir.join("gt")).unwrap();
    std::fs::create_dir_all(dir.join("images")).unwrap();
    let mut entries = Vec::new();
    for i in 0..n {
        let id = format!("scene_{i:03}");
        let mask = street_scene(w, h, i);
        segvote::save_mask(&mask, dir.join(format!("gt/{id}.png"))).unwrap();
        segvote::mask::save_image(
            &render(&mask),
            dir.join(format!("images/{id}.png")),
            segvote::mask::BitDepth::Eight,
        )
        .unwrap();
        entries.push(serde_json::json!({
            "id": id,
            "image": format!("images/{id}.png"),
            "gt_mask": format!("gt/{id}.png"),
        }));
    }
    let manifest = serde_json::json!({ "name": "streets", "entries": entries });
    let path = dir.join("manifest.json");
    std::fs::write(
        &path,
        serde_json::to_string_pretty(&manifest).unwrap() + "\n",
    )
    .unwrap();
    path
}

pub const GOLDEN_CONFIG: &str = r#"{
  "manifest": "manifest.json",
  "predictors": [
    {"synthetic": {
      "name": "yolact",
      "base_flip_prob": 0.08,
      "noise_sensitivity": {"gaussian": 1.2, "salt_pepper": 1.5, "speckle": 1.0},
      "structure": {"kind": "erode", "radius": 1, "target_class": 1},
      "seed": 1
    }},
    {"synthetic": {
      "name": "hamm",
      "base_flip_prob": 0.05,
      "noise_sensitivity": {"gaussian": 0.8, "salt_pepper": 0.9, "speckle": 0.6},
      "seed": 2
    }},
    {"synthetic": {
      "name": "deeplab",
      "base_flip_prob": 0.06,
      "noise_sensitivity": {"gaussian": 0.9, "salt_pepper": 1.0, "speckle": 0.7},
      "structure": {"kind": "dilate", "radius": 1, "target_class": 1},
      "seed": 3
    }}
  ],
  "ensemble": {"member_names": ["hamm", "deeplab", "yolact"]},
  "master_seed": 7,
  "worker_count": 2
}
"#;

/// The committed golden sweep fixture: 10 scenes of 48x32 and a config.
pub fn write_golden_fixture(dir: &Path) {
    write_scene_dataset(dir, 10, 48, 32);
    std::fs::write(dir.join("config.json"), GOLDEN_CONFIG).unwrap();
}

/// Every file under `dir`, relative path to bytes.
pub fn read_tree(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((
                    p.strip_prefix(dir).unwrap().to_path_buf(),
                    std::fs::read(&p).unwrap(),
                ));
            }
        }
    }
    out.sort();
    out
}
