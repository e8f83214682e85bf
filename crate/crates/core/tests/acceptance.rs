//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! gated criterion fails.

mod common;

use std::time::{Duration, Instant};

use common::*;
use pixelcode::analysis::{codebook_correlation, gain_upper_bound, pattern_svd};
use pixelcode::antenna_model::{port_currents, radiation_pattern, AntennaCoder, SynthesisSpec};
use pixelcode::beamspace::{incident_field, isotropic_pattern, siso_gain};
use pixelcode::codebook::{select_coder, train_codebook, train_codebook_from, Codebook, GlaConfig, TrainingSet};
use pixelcode::gain::{CoderPatterns, GainForm};
use pixelcode::harness::results::{render_csv, render_json};
use pixelcode::harness::{run_experiment, ExperimentConfig, ExperimentKind, MethodKind};
use pixelcode::mimo_capacity::{capacity_uniform, capacity_waterfilling, waterfill, AllocationMode};
use pixelcode::sebo::{exhaustive_maximize, sebo_maximize, SeboConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const K: usize = 72;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn report(id: usize, budget: Duration, run: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let out = run();
    let elapsed = start.elapsed();
    let in_time = elapsed <= budget;
    let pass = out.pass && in_time;
    println!(
        "criterion {id}: {} | {} | {:.2}s of {}s budget{}",
        if pass { "PASS" } else { "FAIL" },
        out.detail,
        elapsed.as_secs_f64(),
        budget.as_secs(),
        if in_time { "" } else { " (over budget)" }
    );
    pass
}

fn rank_five_model(seed: u64) -> pixelcode::antenna_model::PixelAntennaModel {
    model_with_spectrum(10, K, seed, rank_five_spectrum())
}

/// Fixed unit-norm pattern against i.i.d. channels has unit mean gain.
fn conventional_baseline() -> Outcome {
    let m = model(10, K, 1);
    let e_t = isotropic_pattern(K);
    let off = AntennaCoder::all_off(10);
    let gains: Vec<f64> = (0..10_000).map(|t| siso_gain(&m, &off, &channel(K, 101, t), &e_t).unwrap()).collect();
    let (mean, se) = mean_and_se(&gains);
    outcome(
        (mean - 1.0).abs() <= 3.0 * se,
        format!("mean |h|^2 = {mean:.4}, 3 SE = {:.4}", 3.0 * se),
    )
}

fn upper_bound_law() -> Outcome {
    let m = rank_five_model(2);
    let basis = pattern_svd(&m, 0.998).unwrap();
    let r = basis.eadof;
    let e_t = isotropic_pattern(K);
    let (_, table) = feasible(&m);
    let trials = 10_000;
    let mut bounds = Vec::with_capacity(trials);
    let mut worst_excess = f64::NEG_INFINITY;
    for t in 0..trials as u64 {
        let h = channel(K, 202, t);
        let bound = gain_upper_bound(&basis, &h, &e_t).unwrap();
        let best = table.best(&incident_field(&h, &e_t).unwrap()).1;
        worst_excess = worst_excess.max(best - bound);
        bounds.push(bound);
    }
    let (mean, se) = mean_and_se(&bounds);
    let pass = r == 5 && (mean - r as f64).abs() <= 3.0 * se && worst_excess <= 1e-6;
    outcome(
        pass,
        format!(
            "R = {r}, mean bound = {mean:.4} (3 SE {:.4}), max(optimum - bound) = {worst_excess:.2e}",
            3.0 * se
        ),
    )
}

fn feasible(m: &pixelcode::antenna_model::PixelAntennaModel) -> (Vec<AntennaCoder>, CoderPatterns) {
    let q = m.q_switches();
    let coders: Vec<AntennaCoder> = (0..1u64 << q)
        .map(|i| AntennaCoder::from_index(i, q))
        .filter(|c| radiation_pattern(m, c, true).is_ok())
        .collect();
    let table = CoderPatterns::new(m, &coders).unwrap();
    (coders, table)
}

fn sebo_vs_exhaustive() -> Outcome {
    let e_t = isotropic_pattern(K);
    let cfg = SeboConfig::default().with_block_size(5);
    let mut ratios = Vec::new();
    let mut exceeded = 0;
    for inst in 0..50u64 {
        let m = model(10, K, 300 + inst);
        let g = incident_field(&channel(K, 303, inst), &e_t).unwrap();
        let form = GainForm::single(&m, &g).unwrap();
        let f = |b: &[u8]| form.eval_bits(&m, b);
        let trace = sebo_maximize(f, 10, &cfg.clone().with_seed(inst), None).unwrap();
        let (_, best) = exhaustive_maximize(f, 10).unwrap();
        if trace.value > best {
            exceeded += 1;
        }
        ratios.push(trace.value / best);
    }
    let avg = ratios.iter().sum::<f64>() / ratios.len() as f64;
    let min = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    outcome(
        avg >= 0.99 && exceeded == 0,
        format!("mean SEBO/exhaustive = {avg:.5}, min = {min:.4}, exceeded = {exceeded}"),
    )
}

fn open_short_exactness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut worst: f64 = 0.0;
    for pair in 0..200u64 {
        let q = rng.random_range(1..=10);
        let m = model(q, 4, 4000 + pair);
        let coder = AntennaCoder::from_index(rng.random_range(0..1u64 << q), q);
        let exact = port_currents(&m, &coder, c(1.0, 0.0)).unwrap();
        let oracle = penalty_currents(&m, &coder);
        worst = worst.max((&exact - &oracle).norm() / exact.norm());
    }
    outcome(worst <= 1e-6, format!("max relative error = {worst:.2e} over 200 pairs"))
}

fn waterfilling_correctness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let mut power_err: f64 = 0.0;
    let mut kkt: f64 = 0.0;
    for _ in 0..1000 {
        let n = rng.random_range(1..=8);
        let mut eig: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..4.0f64).powi(2)).collect();
        eig[0] += 1e-3;
        let p = 10f64.powf(rng.random_range(-2.0..3.0));
        let noise = rng.random_range(0.1..2.0);
        let a = waterfill(&eig, p, noise).unwrap();
        let (oracle, _) = bisection_waterfill(&eig, p, noise);
        for (x, y) in a.powers.iter().zip(&oracle) {
            power_err = power_err.max((x - y).abs() / p.max(1.0));
        }
        let lam_max = eig.iter().copied().fold(0.0, f64::max);
        for (&pi, &l) in a.powers.iter().zip(&eig) {
            if l <= 1e-12 * lam_max {
                continue;
            }
            let slack = if pi > 0.0 {
                (a.water_level - noise / l - pi).abs()
            } else {
                (a.water_level - noise / l).max(0.0)
            };
            kkt = kkt.max(slack / a.water_level.max(1.0));
        }
    }
    let mut worst_gap = f64::INFINITY;
    for _ in 0..1000 {
        let nr = rng.random_range(1..=4);
        let nt = rng.random_range(1..=4);
        let h = complex_gaussian(nr, nt, &mut rng);
        let p = 10f64.powf(rng.random_range(-2.0..4.0));
        let up = capacity_uniform(&h, p, 1.0).unwrap();
        let (wf, _) = capacity_waterfilling(&h, p, 1.0).unwrap();
        worst_gap = worst_gap.min(wf - up);
    }
    outcome(
        power_err <= 1e-9 && kkt <= 1e-9 && worst_gap >= -1e-9,
        format!("max |P - P_bisect| = {power_err:.2e}, max KKT residual = {kkt:.2e}, min(WF - UP) = {worst_gap:.2e}"),
    )
}

fn gla_monotonicity_and_limit() -> Outcome {
    let e_t = isotropic_pattern(K);
    let m = model(8, K, 606);
    let mut monotone = 0;
    for seed in 0..10u64 {
        let ts = TrainingSet::sample(K, 300, e_t.clone(), 6000 + seed).unwrap();
        let gla = GlaConfig {
            seed,
            ..GlaConfig::default()
        };
        let cb = train_codebook(&m, &ts, 8, &gla, &SeboConfig::default()).unwrap();
        let h = &cb.training.objective_history;
        if h.windows(2).all(|w| w[1] >= w[0]) {
            monotone += 1;
        }
    }
    let full = Codebook::full(8).unwrap();
    let mut exact = 0;
    for t in 0..100u64 {
        let h = channel(K, 616, t);
        let sel = select_coder(&full, &m, &h, &e_t).unwrap();
        let (_, best) = exhaustive_maximize(
            |b| {
                let coder = AntennaCoder::new(b.to_vec()).unwrap();
                siso_gain(&m, &coder, &h, &e_t).unwrap_or(f64::NEG_INFINITY)
            },
            8,
        )
        .unwrap();
        if sel.gain == best {
            exact += 1;
        }
    }
    outcome(
        monotone == 10 && exact == 100,
        format!("monotone histories {monotone}/10, exact full-codebook matches {exact}/100"),
    )
}

fn codebook_size_trend() -> Outcome {
    let m = rank_five_model(7);
    let e_t = isotropic_pattern(K);
    let ts = TrainingSet::sample(K, 1000, e_t.clone(), 7007).unwrap();
    let test: Vec<_> = (0..2000u64).map(|t| incident_field(&channel(K, 707, t), &e_t).unwrap()).collect();
    let (_, table) = feasible(&m);
    let perfect = test.iter().map(|g| table.best(g).1).sum::<f64>() / test.len() as f64;

    let sebo = SeboConfig::default();
    let sizes = [2usize, 4, 8, 16, 32, 64, 128, 256];
    let mut means = Vec::new();
    let mut prev: Option<Codebook> = None;
    for &size in &sizes {
        let init = prev.as_ref().map_or(&[][..], |c| c.coders());
        let gla = GlaConfig {
            seed: size as u64,
            ..GlaConfig::default()
        };
        let cb = train_codebook_from(&m, &ts, size, init, &gla, &sebo).unwrap();
        let patterns = cb.patterns(&m).unwrap();
        means.push(test.iter().map(|g| patterns.best(g).1).sum::<f64>() / test.len() as f64);
        prev = Some(cb);
    }
    let increasing = means[..4].windows(2).all(|w| w[1] > w[0]);
    let at_256 = means[7];
    let close = at_256 >= 0.95 * perfect;
    let soft = if means[0] > 1.5 { "met" } else { "not met" };
    let listing: Vec<String> = sizes.iter().zip(&means).map(|(s, v)| format!("M={s}:{v:.3}")).collect();
    outcome(
        increasing && close,
        format!(
            "{} | perfect CSI {perfect:.3}, M=256 reaches {:.1}% | soft check M=2 > 1.5 {soft}",
            listing.join(" "),
            100.0 * at_256 / perfect
        ),
    )
}

fn correlation_identity() -> Outcome {
    let m = model(10, K, 808);
    let e_t = isotropic_pattern(K);
    let ts = TrainingSet::sample(K, 500, e_t.clone(), 8080).unwrap();
    let cb = train_codebook(&m, &ts, 8, &GlaConfig::default(), &SeboConfig::default()).unwrap();
    let rho = codebook_correlation(&m, &cb).unwrap();
    let patterns = cb.patterns(&m).unwrap();
    let trials = 10_000;
    let mut acc = CMatrix::zeros(8, 8);
    for t in 0..trials as u64 {
        let g = incident_field(&channel(K, 818, t), &e_t).unwrap();
        let h = CVector::from_fn(8, |i, _| (patterns.pattern(i).adjoint() * &g)[(0, 0)]);
        acc += &h * h.adjoint();
    }
    acc /= c(trials as f64, 0.0);
    let mut worst: f64 = 0.0;
    for i in 0..8 {
        for j in 0..8 {
            let d = acc[(i, j)] - rho[(i, j)];
            worst = worst.max(d.re.abs()).max(d.im.abs());
        }
    }
    outcome(worst <= 0.05, format!("max element-wise deviation = {worst:.4}"))
}

fn determinism() -> Outcome {
    let mut configs = Vec::new();

    let mut siso = ExperimentConfig::new(ExperimentKind::SisoGain);
    siso.synthetic = Some(SynthesisSpec::new(8, 8, 9));
    siso.k_angles = 8;
    siso.trials = 60;
    configs.push(siso.clone());

    let mut book = siso.clone();
    book.kind = ExperimentKind::SisoGainCodebook;
    book.m_sizes = vec![2, 4];
    book.training_size = 100;
    configs.push(book);

    let mut mimo = siso.clone();
    mimo.kind = ExperimentKind::MimoCapacity;
    mimo.synthetic = Some(SynthesisSpec::new(4, 8, 9));
    mimo.trials = 4;
    mimo.snr_db = vec![0.0, 20.0];
    mimo.modes = vec![AllocationMode::Uniform, AllocationMode::Waterfilling];
    configs.push(mimo.clone());

    let mut mimo_cb = mimo.clone();
    mimo_cb.method = MethodKind::Codebook;
    mimo_cb.m_sizes = vec![4];
    mimo_cb.training_size = 50;
    configs.push(mimo_cb);

    let mut corr = siso.clone();
    corr.kind = ExperimentKind::Correlation;
    corr.m_sizes = vec![4];
    corr.training_size = 100;
    configs.push(corr);

    let mut eadof = siso;
    eadof.kind = ExperimentKind::Eadof;
    configs.push(eadof);

    let mut identical = 0;
    for cfg in &configs {
        let outputs: Vec<(String, String)> = [1usize, 3, 8]
            .iter()
            .map(|&n| {
                let mut c = cfg.clone();
                c.threads = Some(n);
                let rs = run_experiment(&c).unwrap();
                (render_csv(&rs), render_json(&rs))
            })
            .collect();
        if outputs.windows(2).all(|w| w[0] == w[1]) {
            identical += 1;
        }
    }
    outcome(
        identical == configs.len(),
        format!("{identical}/{} experiment kinds bit-identical across 1, 3, 8 workers", configs.len()),
    )
}

fn main() {
    let results = [
        report(1, Duration::from_secs(10), conventional_baseline),
        report(2, Duration::from_secs(60), upper_bound_law),
        report(3, Duration::from_secs(120), sebo_vs_exhaustive),
        report(4, Duration::from_secs(10), open_short_exactness),
        report(5, Duration::from_secs(30), waterfilling_correctness),
        report(6, Duration::from_secs(300), gla_monotonicity_and_limit),
        report(7, Duration::from_secs(600), codebook_size_trend),
        report(8, Duration::from_secs(120), correlation_identity),
        report(9, Duration::from_secs(60), determinism),
    ];
    let passed = results.iter().filter(|&&p| p).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed != results.len() {
        std::process::exit(1);
    }
}
