//! Acceptance suite. Runs every criterion at its stated tolerance and time
//! budget, prints one PASS/FAIL line each, and exits non-zero on failure.
//!
//! `cargo test -p segvote --test acceptance`

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;
use segvote::analysis::{classify_errors, connected_components, Thresholds, Verdict};
use segvote::dataset::{augment, split_ids, DEFAULT_AUGMENT_PROB};
use segvote::harness::{degradation_profile, emit_report, run_sweep, ReportFormat, SweepConfig};
use segvote::noise::{gaussian_noise, salt_pepper_noise, speckle_noise, NoiseFamily, NoiseLevel};
use segvote::synth::{corrupt_iid, corrupt_structured, Magnitude, StructuredMode};
use segvote::{
    majority_vote, vote_margin, ConfusionMatrix, EnsembleConfig, ImageBuffer, LabelMask, IGNORE,
};

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($fmt)+));
        }
    };
}

fn random_mask(rng: &mut ChaCha8Rng, w: u32, h: u32, k: usize, ignore_p: f64) -> LabelMask {
    let labels = (0..w * h)
        .map(|_| {
            if rng.random_bool(ignore_p) {
                IGNORE
            } else {
                rng.random_range(0..k as u8)
            }
        })
        .collect();
    LabelMask::new(w, h, labels, k).unwrap()
}

fn metric_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0001);
    let mut undefined = 0;
    for trial in 0..1000 {
        let (w, h) = (rng.random_range(1..=16), rng.random_range(1..=16));
        let k = rng.random_range(1..=5);
        let ignore_p = [0.0, 0.1, 0.5][trial % 3];
        let gt = random_mask(&mut rng, w, h, k, ignore_p);
        let pred = random_mask(&mut rng, w, h, k, ignore_p);
        let cm = ConfusionMatrix::from_masks(k, &pred, &gt).map_err(|e| e.to_string())?;
        let want = naive_iou(pred.labels(), gt.labels(), k);
        let got = cm.iou_per_class();
        ensure!(
            got == want,
            "trial {trial}: per-class {got:?} != oracle {want:?}"
        );
        ensure!(
            cm.miou(None) == naive_miou(&want),
            "trial {trial}: mIOU {:?} != oracle {:?}",
            cm.miou(None),
            naive_miou(&want)
        );
        undefined += want.iter().filter(|v| v.is_none()).count();
    }
    Ok(format!("1000 pairs exact, {undefined} undefined classes"))
}

fn vote_oracle() -> Outcome {
    let weight_sets: [&[f64]; 4] = [
        &[1.0, 1.0, 1.0, 1.0],
        &[2.0, 1.0, 1.0, 1.0],
        &[1.0, 2.0, 3.0, 4.0],
        &[0.5, 1.5, 1.0, 0.5],
    ];
    let mut pixels = 0usize;
    let mut ties = 0usize;
    for m in 2..=4usize {
        for k in 1..=4usize {
            let alphabet: Vec<u8> = (0..k as u8).chain([IGNORE]).collect();
            let combos = alphabet.len().pow(m as u32);
            let mut layers = vec![Vec::with_capacity(combos); m];
            for mut code in 0..combos {
                for layer in layers.iter_mut() {
                    layer.push(alphabet[code % alphabet.len()]);
                    code /= alphabet.len();
                }
            }
            let masks: Vec<LabelMask> = layers
                .into_iter()
                .map(|l| LabelMask::new(combos as u32, 1, l, k).unwrap())
                .collect();
            let refs: Vec<&LabelMask> = masks.iter().collect();
            let names: Vec<String> = (0..m).map(|i| format!("m{i}")).collect();
            for weights in weight_sets {
                let w = weights[..m].to_vec();
                let cfg = EnsembleConfig::new(names.clone())
                    .and_then(|c| c.with_weights(w.clone()))
                    .map_err(|e| e.to_string())?;
                let fused = majority_vote(&refs, &cfg).map_err(|e| e.to_string())?;
                let margin = vote_margin(&refs, &cfg).map_err(|e| e.to_string())?;
                for p in 0..combos {
                    let votes: Vec<u8> = masks.iter().map(|mk| mk.labels()[p]).collect();
                    let (want, want_margin) = tally_vote(&votes, &w);
                    ensure!(
                        fused.labels()[p] == want,
                        "M={m} K={k} weights={w:?} votes={votes:?}: got {} want {want}",
                        fused.labels()[p]
                    );
                    ensure!(
                        margin.values[p] == want_margin,
                        "M={m} K={k} votes={votes:?}: margin {} want {want_margin}",
                        margin.values[p]
                    );
                    if want != IGNORE && want_margin == 0.0 {
                        ties += 1;
                    }
                }
                pixels += combos;
            }
        }
    }
    Ok(format!("{pixels} vote patterns exact, {ties} ties"))
}

fn accuracy(pred: &LabelMask, gt: &LabelMask) -> f64 {
    let hits = pred
        .labels()
        .iter()
        .zip(gt.labels())
        .filter(|(a, b)| a == b)
        .count();
    hits as f64 / gt.len() as f64
}

fn condorcet() -> Outcome {
    let a: f64 = 0.9;
    let expected = a.powi(3) + 3.0 * a * a * (1.0 - a);
    let (w, h) = (1000u32, 1000u32);
    let labels = (0..w * h).map(|i| ((i / w + i % w) % 2) as u8).collect();
    let gt = LabelMask::new(w, h, labels, 2).unwrap();
    let members: Vec<LabelMask> = (0..3)
        .map(|s| corrupt_iid(&gt, 1.0 - a, 0xc0ffee + s).unwrap())
        .collect();
    let refs: Vec<&LabelMask> = members.iter().collect();
    let cfg = EnsembleConfig::new(["a", "b", "c"]).unwrap();
    let fused = majority_vote(&refs, &cfg).map_err(|e| e.to_string())?;
    let ens = accuracy(&fused, &gt);
    let accs: Vec<f64> = members.iter().map(|m| accuracy(m, &gt)).collect();
    ensure!(
        (ens - expected).abs() <= 0.005,
        "ensemble accuracy {ens:.5} not within 0.005 of {expected:.5}"
    );
    ensure!(
        accs.iter().all(|&m| ens > m),
        "ensemble {ens:.5} does not beat members {accs:?}"
    );
    Ok(format!(
        "ensemble {ens:.5} vs closed form {expected:.3}, members {:.4}/{:.4}/{:.4}",
        accs[0], accs[1], accs[2]
    ))
}

fn ols(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let num: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    num / den
}

fn graceful_degradation() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    write_scene_dataset(dir.path(), 12, 64, 48);
    let mut worst = (0.0f64, 0.0f64);
    for seed in [11u64, 22, 33] {
        let mut cfg: SweepConfig = serde_json::from_str(GOLDEN_CONFIG).unwrap();
        cfg.base_dir = dir.path().to_path_buf();
        cfg.master_seed = seed;
        cfg.worker_count = 4;
        let report = run_sweep(&cfg).map_err(|e| e.to_string())?;
        let base = report.baseline().unwrap();
        let profile = degradation_profile(&report).map_err(|e| e.to_string())?;
        for family in NoiseFamily::ALL {
            let mut rows = vec![base];
            rows.extend(
                NoiseLevel::ALL
                    .iter()
                    .map(|&l| report.row(family, l).unwrap()),
            );
            let sigmas: Vec<f64> = rows.iter().map(|r| r.sigma).collect();
            ensure!(
                sigmas == [0.0, 0.01, 0.05, 0.1],
                "unexpected sigma grid {sigmas:?}"
            );
            let mut member_max = 0.0f64;
            for name in &report.predictors {
                let ys: Vec<f64> = rows.iter().map(|r| report.miou(r, name).unwrap()).collect();
                ensure!(
                    ys.windows(2).all(|p| p[1] <= p[0]),
                    "seed {seed} {family}: {name} mIOU increases with sigma: {ys:?}"
                );
                member_max = member_max.max(ols(&sigmas, &ys).abs());
            }
            let ys: Vec<f64> = rows.iter().map(|r| r.ensemble.miou.unwrap()).collect();
            let ens = ols(&sigmas, &ys).abs();
            let lib = profile.family(family).unwrap().ensemble.abs();
            ensure!(
                (lib - ens).abs() < 1e-9,
                "library slope {lib} != oracle {ens}"
            );
            ensure!(
                ens <= member_max,
                "seed {seed} {family}: ensemble |slope| {ens:.4} > max member {member_max:.4}"
            );
            if ens / member_max > worst.0 / worst.1.max(f64::MIN_POSITIVE) {
                worst = (ens, member_max);
            }
        }
    }
    Ok(format!(
        "3 seeds x 3 families monotone; tightest |slope| ratio {:.3}/{:.3}",
        worst.0, worst.1
    ))
}

fn std_and_mean(deltas: &[f64]) -> (f64, f64) {
    let n = deltas.len() as f64;
    let mean = deltas.iter().sum::<f64>() / n;
    let var = deltas.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (var.sqrt(), mean)
}

fn noise_moments() -> Outcome {
    let img = ImageBuffer::filled(1000, 1000, 1, 0.5).unwrap();
    let delta = |out: &ImageBuffer| -> Vec<f64> {
        out.samples()
            .iter()
            .zip(img.samples())
            .map(|(a, b)| a - b)
            .collect()
    };
    let mut notes = Vec::new();
    for sigma in [0.01, 0.05, 0.1] {
        let (sd, mean) = std_and_mean(&delta(&gaussian_noise(&img, sigma, 1)));
        ensure!(
            (sd / sigma - 1.0).abs() <= 0.02,
            "gaussian sigma {sigma}: std {sd:.5}"
        );
        ensure!(
            mean.abs() <= 0.001,
            "gaussian sigma {sigma}: mean {mean:.5}"
        );
        let (sd, _) = std_and_mean(&delta(&speckle_noise(&img, sigma, 2)));
        ensure!(
            (sd / (0.5 * sigma) - 1.0).abs() <= 0.02,
            "speckle sigma {sigma}: std {sd:.5}"
        );
        notes.push(format!("{sigma}"));
    }
    let n = img.pixel_count();
    for amount in [0.01, 0.05, 0.1] {
        let out = salt_pepper_noise(&img, amount, 3);
        let salt = out.samples().iter().filter(|&&v| v == 1.0).count();
        let pepper = out.samples().iter().filter(|&&v| v == 0.0).count();
        let want = (amount * n as f64).round() as usize;
        ensure!(
            salt + pepper == want,
            "salt-and-pepper {amount}: {} != {want}",
            salt + pepper
        );
        let frac = salt as f64 / want as f64;
        ensure!(
            (frac - 0.5).abs() <= 0.01,
            "salt-and-pepper {amount}: salt fraction {frac:.4}"
        );
    }
    Ok(format!("sigma {} within tolerance", notes.join("/")))
}

fn split_constants() -> Outcome {
    for (n, train, test) in [(2100, 1680, 420), (3000, 2400, 600), (2000, 1600, 400)] {
        let ids: Vec<String> = (0..n).map(|i| format!("img{i:05}")).collect();
        let a = split_ids(&ids, 0.2, 42).map_err(|e| e.to_string())?;
        let b = split_ids(&ids, 0.2, 42).map_err(|e| e.to_string())?;
        let c = split_ids(&ids, 0.2, 43).map_err(|e| e.to_string())?;
        ensure!(
            a.train_ids.len() == train && a.test_ids.len() == test,
            "{n}: {}/{}",
            a.train_ids.len(),
            a.test_ids.len()
        );
        ensure!(a == b, "{n}: split is not deterministic");
        ensure!(
            a.test_ids != c.test_ids,
            "{n}: seed does not change the split"
        );
        let mut all: Vec<&String> = a.train_ids.iter().chain(&a.test_ids).collect();
        all.sort();
        all.dedup();
        ensure!(all.len() == n, "{n}: partitions overlap or drop ids");
    }
    let img = ImageBuffer::filled(4, 4, 1, 0.5).unwrap();
    let mask = LabelMask::filled(4, 4, 1, 2).unwrap();
    let trials = 100_000u64;
    let applied = (0..trials)
        .filter(|&s| {
            augment(&img, &mask, DEFAULT_AUGMENT_PROB, s)
                .unwrap()
                .applied
                .is_some()
        })
        .count();
    let frac = applied as f64 / trials as f64;
    ensure!(
        (frac - 0.2).abs() <= 0.01,
        "augmentation applied fraction {frac:.4}"
    );
    Ok(format!(
        "2100/3000/2000 exact, augmentation fraction {frac:.4}"
    ))
}

fn determinism() -> Outcome {
    let load = |workers| {
        let mut cfg = SweepConfig::load(golden_fixture_dir().join("config.json")).unwrap();
        cfg.worker_count = workers;
        cfg
    };
    let mut outputs = Vec::new();
    for workers in [1, 8, 1, 8] {
        let report = run_sweep(&load(workers)).map_err(|e| e.to_string())?;
        let csv = emit_report(&report, ReportFormat::Csv).map_err(|e| e.to_string())?;
        let json = emit_report(&report, ReportFormat::Json).map_err(|e| e.to_string())?;
        outputs.push((csv, json));
    }
    ensure!(
        outputs.windows(2).all(|p| p[0] == p[1]),
        "sweep outputs differ across runs"
    );
    let golden_csv = std::fs::read(golden_dir().join("sweep.csv")).map_err(|e| e.to_string())?;
    let golden_json = std::fs::read(golden_dir().join("sweep.json")).map_err(|e| e.to_string())?;
    ensure!(
        outputs[0].0 == golden_csv,
        "CSV differs from the committed golden"
    );
    ensure!(
        outputs[0].1 == golden_json,
        "JSON differs from the committed golden"
    );
    Ok("workers 1/8 x 2 runs byte-identical, matches golden".into())
}

fn rect(labels: &mut [u8], w: usize, x0: usize, y0: usize, x1: usize, y1: usize, l: u8) {
    for y in y0..y1 {
        for x in x0..x1 {
            labels[y * w + x] = l;
        }
    }
}

fn taxonomy() -> Outcome {
    let t = Thresholds::default();
    let verdicts = |pred: &LabelMask, gt: &LabelMask| {
        classify_errors(pred, gt, 1, &t).map(|r| r.verdicts.into_iter().collect::<Vec<_>>())
    };
    let (w, h) = (32usize, 20usize);

    let mut g = vec![0u8; w * h];
    rect(&mut g, w, 4, 4, 24, 14, 1);
    let gt = LabelMask::new(w as u32, h as u32, g.clone(), 2).unwrap();

    ensure!(
        verdicts(&gt, &gt).unwrap() == [Verdict::Ideal],
        "identical masks: {:?}",
        verdicts(&gt, &gt)
    );

    // a one-pixel seam splits the region in two
    let mut p = g.clone();
    rect(&mut p, w, 14, 4, 15, 14, 0);
    let split = LabelMask::new(w as u32, h as u32, p, 2).unwrap();
    let v = verdicts(&split, &gt).unwrap();
    ensure!(v == [Verdict::OverSegmentation], "split component: {v:?}");

    let eroded =
        corrupt_structured(&gt, StructuredMode::Erode, Magnitude::Radius(2), 1, 0).unwrap();
    let v = verdicts(&eroded, &gt).unwrap();
    ensure!(v == [Verdict::UnderSegmentation], "eroded area: {v:?}");

    // large region plus a small one; drop exactly one component and keep
    // the first seed that drops the small one
    rect(&mut g, w, 27, 16, 30, 19, 1);
    let gt2 = LabelMask::new(w as u32, h as u32, g, 2).unwrap();
    let small = 16 * w + 27;
    let dropped = (0..64u64)
        .map(|s| {
            corrupt_structured(
                &gt2,
                StructuredMode::DropComponent,
                Magnitude::Fraction(0.5),
                1,
                s,
            )
            .unwrap()
        })
        .find(|m| m.labels()[small] != 1)
        .ok_or("no seed drops the small component")?;
    let v = verdicts(&dropped, &gt2).unwrap();
    ensure!(v == [Verdict::RegionExclusion], "dropped component: {v:?}");

    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0008);
    let mut checked = 0;
    for _ in 0..300 {
        let (mw, mh) = (rng.random_range(1..=32u32), rng.random_range(1..=32u32));
        let k = rng.random_range(1..=4);
        let m = random_mask(&mut rng, mw, mh, k, 0.1);
        for c in 0..k as u8 {
            let got = connected_components(&m, c).sizes();
            let want = flood_fill_sizes(m.labels(), mw as usize, mh as usize, c);
            ensure!(
                got == want,
                "{mw}x{mh} class {c}: {got:?} != flood fill {want:?}"
            );
            checked += 1;
        }
    }
    Ok(format!(
        "4 fixtures exact, {checked} component counts match flood fill"
    ))
}

struct Criterion {
    name: &'static str,
    budget: Option<Duration>,
    run: fn() -> Outcome,
}

fn main() -> ExitCode {
    let criteria = [
        Criterion {
            name: "metric oracle",
            budget: Some(Duration::from_secs(5)),
            run: metric_oracle,
        },
        Criterion {
            name: "vote oracle",
            budget: Some(Duration::from_secs(5)),
            run: vote_oracle,
        },
        Criterion {
            name: "condorcet check",
            budget: Some(Duration::from_secs(30)),
            run: condorcet,
        },
        Criterion {
            name: "graceful degradation",
            budget: Some(Duration::from_secs(120)),
            run: graceful_degradation,
        },
        Criterion {
            name: "noise moments",
            budget: Some(Duration::from_secs(10)),
            run: noise_moments,
        },
        Criterion {
            name: "split constants",
            budget: None,
            run: split_constants,
        },
        Criterion {
            name: "determinism",
            budget: None,
            run: determinism,
        },
        Criterion {
            name: "error taxonomy",
            budget: None,
            run: taxonomy,
        },
    ];
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for c in &criteria {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(c.run)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let elapsed = start.elapsed();
        let outcome = match (outcome, c.budget) {
            (Ok(_), Some(b)) if elapsed > b => Err(format!(
                "took {:.2}s, budget {}s",
                elapsed.as_secs_f64(),
                b.as_secs()
            )),
            (o, _) => o,
        };
        let secs = elapsed.as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS  {:<22} {secs:>7.2}s  {detail}", c.name),
            Err(why) => {
                failed += 1;
                println!("FAIL  {:<22} {secs:>7.2}s  {why}", c.name);
            }
        }
    }
    println!("{} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
