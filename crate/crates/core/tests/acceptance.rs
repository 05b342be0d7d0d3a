//! Acceptance criteria. Each test prints one `criterion N ... PASS|FAIL` line
//! (visible with `--nocapture`) and enforces the stated runtime bound.

mod common;

use std::time::{Duration, Instant};

use common::*;
use hdriqa::bench::{plcc_logistic, run_benchmark, DatasetManifest};
use hdriqa::compensate::{compensate_window, score_hdr, score_ldr, window_score};
use hdriqa::display::{decompose, forward_display, inverse_display, plan_windows, WINDOW_SPACING};
use hdriqa::imageio::{write_pfm, HdrImage, LdrImage};
use hdriqa::metrics::{local_map_mae, local_map_sqerr, local_map_ssim, BaseMetric};
use hdriqa::pooling::{well_exposedness, well_exposedness_cropped, WeightField, DEFAULT_EPSILON};
use hdriqa::{AggregationConfig, CompensationConfig, DisplayModel};
use rand::Rng;
use rand_distr::{Distribution, Normal};

fn report(n: u32, name: &str, ok: bool, elapsed: Duration, limit: Duration, detail: &str) {
    let within = elapsed < limit;
    println!(
        "criterion {n:>2} {:<34} {} ({:.2?} / limit {:.0?}) {detail}",
        name,
        if ok && within { "PASS" } else { "FAIL" },
        elapsed,
        limit
    );
    assert!(ok, "criterion {n} ({name}) failed: {detail}");
    assert!(within, "criterion {n} ({name}) exceeded {limit:?}: {elapsed:?}");
}

fn metrics() -> [BaseMetric; 3] {
    [BaseMetric::Mae, BaseMetric::PsnrMse, BaseMetric::ssim()]
}

fn direct_score(metric: &BaseMetric, a: &LdrImage, b: &LdrImage) -> f64 {
    let mean = |v: Vec<f64>| v.iter().sum::<f64>() / v.len() as f64;
    match metric {
        BaseMetric::Mae => mean(oracle_mae_map(a, b)),
        BaseMetric::PsnrMse => 10.0 * (1.0 / -mean(oracle_sqerr_map(a, b))).log10(),
        BaseMetric::Ssim(_) => mean(oracle_ssim_map(a, b)),
        _ => unreachable!(),
    }
}

#[test]
fn criterion_01_ldr_reduction_identity() {
    let start = Instant::now();
    let model = DisplayModel::default();
    let mut worst: f64 = 0.0;
    for i in 0..50u64 {
        let reference = random_ldr(1000 + i, 64, 64);
        let test = if i % 2 == 0 {
            noisy_ldr(&reference, 0.05 + 0.002 * i as f64, 2000 + i)
        } else {
            random_ldr(3000 + i, 64, 64)
        };
        for metric in metrics() {
            let got = score_ldr(&reference, &test, &metric, &model).unwrap().score;
            let want = direct_score(&metric, &reference, &test);
            worst = worst.max((got - want).abs());
        }
    }
    report(
        1,
        "LDR reduction identity",
        worst <= 1e-6,
        start.elapsed(),
        Duration::from_secs(10),
        &format!("max |diff| = {worst:.3e}"),
    );
}

#[test]
fn criterion_02_display_round_trip() {
    let start = Instant::now();
    let model = DisplayModel::default();
    let mut images: Vec<LdrImage> = (0..20).map(|i| random_ldr(40 + i, 32, 32)).collect();
    let specials = [0.0, 1e-12, 1e-9, 1.0 / 255.0, 0.5, 254.0 / 255.0, 1.0 - 1e-12, 1.0];
    images.push(
        LdrImage::from_fn(specials.len(), specials.len(), |x, y| [specials[x], specials[y], specials[(x + y) % 8]])
            .unwrap(),
    );
    let mut worst: f64 = 0.0;
    for p in &images {
        let back = inverse_display(&forward_display(p, &model), 1.0 / model.l_max, &model).unwrap();
        for (a, b) in p.pixels().iter().zip(back.pixels()) {
            for c in 0..3 {
                worst = worst.max((a[c] - b[c]).abs());
            }
        }
    }
    report(
        2,
        "display model round trip",
        worst <= 1e-6,
        start.elapsed(),
        Duration::from_secs(1),
        &format!("max |diff| = {worst:.3e}"),
    );
}

#[test]
fn criterion_03_window_plan_conformance() {
    let start = Instant::now();
    let model = DisplayModel::default();
    // dynamic ranges as exact fractions num/den
    let ranges = [(2u64, 1u64), (8, 3), (5, 1), (8, 1), (12, 1), (16, 1)];
    let low = -3.25;
    let mut ok = true;
    let mut detail = String::new();
    for &(num, den) in &ranges {
        let stops = num as f64 / den as f64;
        let plan = plan_windows(&two_level_scene(low, stops), &model).unwrap();
        // closed form in integer arithmetic: max(1, ceil(3 * num / (8 * den)))
        let k_expected = ((3 * num).div_ceil(8 * den)).max(1) as usize;
        let mut case_ok = plan.count() == k_expected
            && (plan.l0 - low).abs() < 1e-12
            && (plan.l1 - (low + stops)).abs() < 1e-12;
        for (k, (&l, &v)) in plan.endpoints.iter().zip(&plan.exposures).enumerate() {
            let want = low + WINDOW_SPACING * (k + 1) as f64;
            case_ok &= (l - want).abs() < 1e-12 && v == (-l).exp2();
        }
        for pair in plan.endpoints.windows(2) {
            case_ok &= (pair[1] - pair[0] - 8.0 / 3.0).abs() < 1e-12;
        }
        case_ok &= *plan.endpoints.last().unwrap() >= plan.l1 - 1e-12;
        if num == 8 && den == 1 {
            case_ok &= plan.count() == 3;
        }
        detail.push_str(&format!("{num}/{den}:K={} ", plan.count()));
        ok &= case_ok;
    }
    report(3, "window plan conformance", ok, start.elapsed(), Duration::from_secs(1), &detail);
}

#[test]
fn criterion_04_weight_normalization() {
    let start = Instant::now();
    let model = DisplayModel::default();
    let mut fixtures: Vec<HdrImage> = vec![
        two_level_scene(-2.0, 8.0),
        two_level_scene(0.0, 2.0),
        log_ramp(64, 8, 8.0, 0.0),
        log_ramp(64, 8, 16.0, 3.0),
    ];
    fixtures.extend((0..6).map(|i| random_scene(70 + i, 24, 24, 4.0 + 2.0 * i as f64)));
    let mut ok = true;
    let mut worst: f64 = 0.0;
    for h in &fixtures {
        let plan = plan_windows(h, &model).unwrap();
        let stack = decompose(h, &plan, &model).unwrap();
        let raw = WeightField::raw(&stack, DEFAULT_EPSILON).unwrap();
        ok &= raw
            .weights
            .iter()
            .flatten()
            .all(|&w| w == 1.0 || w == DEFAULT_EPSILON);
        let mut fields = vec![well_exposedness(&stack, DEFAULT_EPSILON).unwrap()];
        if h.width() >= 11 && h.height() >= 11 {
            fields.push(well_exposedness_cropped(&stack, DEFAULT_EPSILON, 5).unwrap());
        }
        for field in fields {
            for i in 0..field.width * field.height {
                let total: f64 = field.weights.iter().map(|w| w[i]).sum();
                worst = worst.max((total - 1.0).abs());
            }
        }
    }
    ok &= worst <= 1e-9;
    report(
        4,
        "weight normalization",
        ok,
        start.elapsed(),
        Duration::from_secs(1),
        &format!("max |sum - 1| = {worst:.3e}"),
    );
}

#[test]
fn criterion_05_compensation_optimality() {
    let start = Instant::now();
    let model = DisplayModel::default();
    let comp = CompensationConfig::optimize();
    let agg = AggregationConfig::default();
    let mut r = rng(5);
    let (mut worst_x, mut worst_q): (f64, f64) = (0.0, 0.0);
    let mut feasible = true;
    let mut position_ok = true;
    let mut unresolved = 0;
    let mut windows = 0;
    for pair in 0..20u64 {
        let metric = metrics()[pair as usize % 3];
        let reference = random_scene(500 + pair, 32, 32, 5.0 + (pair % 4) as f64);
        let shift: f64 = r.random_range(-2.0..2.0);
        let test = perturb_relative(&reference.scaled(shift.exp2()).unwrap(), 0.05, 600 + pair);

        let plan = plan_windows(&reference, &model).unwrap();
        let stack = decompose(&reference, &plan, &model).unwrap();
        let weights = well_exposedness_cropped(&stack, agg.epsilon, metric.border()).unwrap();
        for (exposure, w) in stack.exposures.iter().zip(&weights.weights) {
            let fit = compensate_window(&exposure.image, &test, exposure.gain, w, &metric, &model, &comp).unwrap();
            let center = exposure.gain.log2();
            let objective = |x: f64| window_score(&exposure.image, &test, x.exp2(), w, &metric, &model).unwrap();
            let (gx, gq) = grid_argmax(objective, center - 4.0, center + 4.0, 4001);
            let dx = (fit.v_hat.log2() - gx).abs();
            worst_x = worst_x.max(dx);
            // Off by more than 1e-3 only counts as a match if the solver beat
            // the grid and stayed within one grid step, i.e. the grid itself
            // could not resolve the peak.
            if dx > 1e-3 {
                let step = 8.0 / 4000.0;
                position_ok &= dx <= step && fit.score >= gq;
                unresolved += 1;
            }
            worst_q = worst_q.max((fit.score - gq).abs());
            feasible &= fit.score >= fit.score_at_v;
            windows += 1;
        }

        let q = score_hdr(&reference, &test, &metric, &model, &CompensationConfig::default(), &agg).unwrap();
        let q_star = score_hdr(&reference, &test, &metric, &model, &comp, &agg).unwrap();
        feasible &= q_star.score >= q.score;
    }
    report(
        5,
        "compensation optimality",
        position_ok && worst_q <= 1e-6 && feasible,
        start.elapsed(),
        Duration::from_secs(120),
        &format!(
            "{windows} windows, max |dx| = {worst_x:.2e} stops ({unresolved} beyond 1e-3, all dominating the grid: {position_ok}), \
             max |dq| = {worst_q:.2e}, Q* >= Q: {feasible}"
        ),
    );
}

#[test]
fn criterion_06_exposure_shift_recovery() {
    let start = Instant::now();
    let model = DisplayModel::default();
    let comp = CompensationConfig::optimize();
    let agg = AggregationConfig::default();
    let reference = random_scene(60, 48, 48, 8.0);
    let distorted = perturb_relative(&reference, 0.03, 61);
    let (mut worst_x, mut worst_q): (f64, f64) = (0.0, 0.0);
    for metric in metrics() {
        for base in [&reference, &distorted] {
            let unshifted = score_hdr(&reference, base, &metric, &model, &comp, &agg).unwrap();
            for s in [-2.0f64, -1.0, 1.0, 2.0] {
                let test = base.scaled(s.exp2()).unwrap();
                let shifted = score_hdr(&reference, &test, &metric, &model, &comp, &agg).unwrap();
                for (a, b) in unshifted.per_window.iter().zip(&shifted.per_window) {
                    worst_x = worst_x.max((b.v_hat.log2() - (a.v_hat.log2() - s)).abs());
                }
                worst_q = worst_q.max((shifted.score - unshifted.score).abs());
            }
        }
    }
    report(
        6,
        "exposure-shift recovery",
        worst_x <= 1e-3 && worst_q <= 1e-6,
        start.elapsed(),
        Duration::from_secs(60),
        &format!("max |dx| = {worst_x:.2e} stops, max |dQ*| = {worst_q:.2e}"),
    );
}

#[test]
fn criterion_07_distortion_monotonicity() {
    let start = Instant::now();
    let model = DisplayModel::default();
    let comp = CompensationConfig::optimize();
    let agg = AggregationConfig::default();
    let scene = random_scene(77, 64, 64, 8.0);
    let sigmas = [0.005, 0.01, 0.02, 0.05];
    let mut ok = true;
    let mut detail = String::new();
    for metric in metrics() {
        let scores: Vec<f64> = sigmas
            .iter()
            .map(|&s| {
                let test = add_noise(&scene, s, 78);
                score_hdr(&scene, &test, &metric, &model, &comp, &agg).unwrap().score
            })
            .collect();
        ok &= scores.windows(2).all(|w| w[1] < w[0]);
        detail.push_str(&format!("{metric}: {scores:.4?} "));
    }
    report(7, "distortion monotonicity", ok, start.elapsed(), Duration::from_secs(60), &detail);
}

fn write_manifest(dir: &std::path::Path, name: &str, rows: &[(String, String, f64)]) -> std::path::PathBuf {
    let mut text = String::from("ref,test,mos,format\n");
    for (r, t, m) in rows {
        text.push_str(&format!("{r},{t},{m:?},pfm\n"));
    }
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn criterion_08_correlation_harness() {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let model = DisplayModel::default();
    let comp = CompensationConfig::optimize();
    let agg = AggregationConfig::default();

    let reference = random_scene(80, 32, 32, 7.0);
    write_pfm(&reference, dir.path().join("ref.pfm")).unwrap();
    let levels: Vec<f64> = (0..30).map(|i| 0.001 * 1.18f64.powi(i)).collect();
    let mut rows = Vec::new();
    for (i, &sigma) in levels.iter().enumerate() {
        let name = format!("test_{i:02}.pfm");
        write_pfm(&add_noise(&reference, sigma, 81), dir.path().join(&name)).unwrap();
        rows.push(("ref.pfm".to_string(), name, -sigma));
    }
    let manifest_path = write_manifest(dir.path(), "levels.csv", &rows);
    let manifest = DatasetManifest::load(&manifest_path).unwrap();

    let noise = Normal::new(0.0, 0.01).unwrap();
    let mut r = rng(82);
    let mut ok = true;
    let mut detail = String::new();
    for metric in metrics() {
        let report1 = run_benchmark(&manifest, &metric, &model, &comp, &agg).unwrap();
        ok &= report1.failures.is_empty() && report1.entries.len() == 30;
        let srcc = report1.srcc.unwrap();
        ok &= srcc == 1.0;

        // MOS as a noisy logistic of the metric's own scores
        let scores: Vec<f64> = report1.entries.iter().map(|e| e.score).collect();
        let (lo, hi) = scores
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &s| (a.min(s), b.max(s)));
        let mut sorted = scores.clone();
        sorted.sort_by(f64::total_cmp);
        let beta = [4.0, 6.0 / (hi - lo), sorted[15], 3.0];
        let logistic_rows: Vec<(String, String, f64)> = rows
            .iter()
            .zip(&scores)
            .map(|((a, b, _), &s)| (a.clone(), b.clone(), hdriqa::bench::logistic(&beta, s) + noise.sample(&mut r)))
            .collect();
        let path = write_manifest(dir.path(), &format!("logistic_{metric}.csv"), &logistic_rows);
        let report2 = run_benchmark(&DatasetManifest::load(&path).unwrap(), &metric, &model, &comp, &agg).unwrap();
        let plcc = report2.plcc.unwrap();
        ok &= plcc >= 0.999;
        let mos: Vec<f64> = logistic_rows.iter().map(|r| r.2).collect();
        ok &= plcc_logistic(&scores, &mos).unwrap().0 == plcc;
        detail.push_str(&format!("{metric}: SRCC={srcc} PLCC={plcc:.5} "));
    }
    report(8, "correlation harness", ok, start.elapsed(), Duration::from_secs(120), &detail);
}

#[test]
fn criterion_09_oracle_equivalence() {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut ok = true;
    for i in 0..100u64 {
        let a = random_ldr(9000 + i, 8, 8);
        let b = if i % 2 == 0 { noisy_ldr(&a, 0.1, 9500 + i) } else { random_ldr(9200 + i, 8, 8) };
        worst = worst.max(max_abs_diff(&local_map_mae(&a, &b).unwrap().values, &oracle_mae_map(&a, &b)));
        worst = worst.max(max_abs_diff(&local_map_sqerr(&a, &b).unwrap().values, &oracle_sqerr_map(&a, &b)));
        // SSIM needs an 11x11 window; 18x18 inputs give an 8x8 map
        let a = random_ldr(9700 + i, 18, 18);
        let b = if i % 2 == 0 { noisy_ldr(&a, 0.1, 9800 + i) } else { random_ldr(9900 + i, 18, 18) };
        let map = local_map_ssim(&a, &b).unwrap();
        ok &= map.width == 8 && map.height == 8;
        worst = worst.max(max_abs_diff(&map.values, &oracle_ssim_map(&a, &b)));
    }
    report(
        9,
        "oracle equivalence",
        ok && worst <= 1e-9,
        start.elapsed(),
        Duration::from_secs(5),
        &format!("max |diff| = {worst:.3e}"),
    );
}

/// Dataset reproduction is optional and needs local copies of the public
/// datasets. Point `HDRIQA_DATASET_MANIFESTS` at a comma-separated list of
/// `manifest.csv=expected_srcc` pairs and run with `--ignored`.
#[test]
#[ignore]
fn criterion_10_dataset_reproduction() {
    let Ok(spec) = std::env::var("HDRIQA_DATASET_MANIFESTS") else {
        println!("criterion 10 dataset reproduction SKIP (HDRIQA_DATASET_MANIFESTS unset)");
        return;
    };
    let start = Instant::now();
    let model = DisplayModel::default();
    let mut ok = true;
    let mut detail = String::new();
    for item in spec.split(',') {
        let (path, expected) = item.split_once('=').expect("manifest=srcc");
        let expected: f64 = expected.parse().unwrap();
        let manifest = DatasetManifest::load(path).unwrap();
        let report = run_benchmark(
            &manifest,
            &BaseMetric::ssim(),
            &model,
            &CompensationConfig::optimize(),
            &AggregationConfig::default(),
        )
        .unwrap();
        let srcc = report.srcc.unwrap_or(f64::NAN).abs();
        ok &= (srcc - expected).abs() <= 0.05;
        detail.push_str(&format!("{}: {srcc:.3} (table {expected:.3}) ", manifest.name));
    }
    report(10, "dataset reproduction", ok, start.elapsed(), Duration::from_secs(86_400), &detail);
}
