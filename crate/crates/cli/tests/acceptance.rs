//! One PASS/FAIL line per acceptance criterion. Runs without the libtest
//! harness so the lines show up in plain `cargo test` output.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use distpred::data::{generate_toy, make_folds, standardize, Dataset, ToyKind, ToyTask};
use distpred::metrics::{picp, qice};
use distpred::model::{ModelParams, Pass};
use distpred::rng::DistRng;
use distpred::scoring::{crps_gaussian_closed, crps_loss_and_grad, crps_naive, crps_pwm, crps_sorted};
use distpred::train::{predict_gaussian, train, train_gaussian_baseline, Predictor};
use distpred::{Activation, EnsemblePrediction, ModelConfig, TrainConfig};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn ens(v: Vec<f64>) -> EnsemblePrediction {
    EnsemblePrediction::new(v).unwrap()
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn estimator_equivalence() -> Outcome {
    let mut rng = DistRng::new(2024);
    let (mut worst_sorted, mut worst_relation) = (0.0f64, 0.0f64);
    for _ in 0..1000 {
        let k = 2 + rng.below(255) as usize;
        let s: Vec<f64> = match rng.below(3) {
            0 => (0..k).map(|_| rng.normal()).collect(),
            1 => (0..k).map(|_| rng.uniform_in(-3.0, 3.0)).collect(),
            _ => (0..k).map(|_| (0.8 * rng.normal()).exp()).collect(),
        };
        let y = rng.normal_with(0.0, 2.0);
        let e = ens(s.clone());
        let naive = crps_naive(&e, y).unwrap();
        worst_sorted = worst_sorted.max((naive - crps_sorted(&e, y).unwrap()).abs());
        let kf = k as f64;
        let mad = s.iter().map(|v| (v - y).abs()).sum::<f64>() / kf;
        // unbiased spread term is K/(K−1) times the biased one
        let via_relation = mad - kf / (kf - 1.0) * (mad - naive);
        worst_relation = worst_relation.max((crps_pwm(&e, y).unwrap() - via_relation).abs());
    }
    outcome(
        worst_sorted <= 1e-10 && worst_relation <= 1e-10,
        format!("max |naive-sorted|={worst_sorted:.2e}, max relation error={worst_relation:.2e}"),
    )
}

fn gradient_correctness() -> Outcome {
    let mut rng = DistRng::new(99);
    let h = 1e-6;
    let mut worst_loss = 0.0f64;
    let mut points = 0;
    while points < 500 {
        let k = 2 + rng.below(63) as usize;
        let s: Vec<f64> = (0..k).map(|_| rng.normal()).collect();
        let y = rng.normal_with(0.0, 1.5);
        let mut sorted = s.clone();
        sorted.sort_by(f64::total_cmp);
        let gap = sorted.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
        let to_y = s.iter().map(|v| (v - y).abs()).fold(f64::INFINITY, f64::min);
        if gap < 1e-4 || to_y < 1e-4 {
            continue;
        }
        points += 1;
        let (_, g) = crps_loss_and_grad(&ens(s.clone()), y).unwrap();
        for i in 0..k {
            if g.partials[i] == 0.0 {
                continue;
            }
            let mut plus = s.clone();
            plus[i] += h;
            let mut minus = s.clone();
            minus[i] -= h;
            let fd = (crps_pwm(&ens(plus), y).unwrap() - crps_pwm(&ens(minus), y).unwrap()) / (2.0 * h);
            worst_loss = worst_loss.max((fd - g.partials[i]).abs() / g.partials[i].abs());
        }
    }

    let cfg = ModelConfig {
        activation: Activation::Tanh,
        seed: 5,
        ..ModelConfig::new(3, vec![8, 6], 9)
    };
    let params = ModelParams::init(&cfg).unwrap();
    let x = [0.3, -1.2, 0.8];
    let y = 0.1;
    let loss_of = |p: &ModelParams| {
        let (e, _) = p.forward_ensemble(&x, Pass::Deterministic).unwrap();
        crps_pwm(&e, y).unwrap()
    };
    let (e, trace) = params.forward_ensemble(&x, Pass::Deterministic).unwrap();
    let (_, g) = crps_loss_and_grad(&e, y).unwrap();
    let grads = params.backward(&trace, &g).unwrap();
    let mut worst_net = 0.0f64;
    let mut checked = 0;
    while checked < 20 {
        let l = rng.below(params.layers.len() as u64) as usize;
        let n_w = params.layers[l].weights.len();
        let idx = rng.below((n_w + params.layers[l].bias.len()) as u64) as usize;
        let analytic = if idx < n_w { grads.layers[l].weights[idx] } else { grads.layers[l].bias[idx - n_w] };
        if analytic.abs() < 1e-6 {
            continue;
        }
        let bumped = |d: f64| {
            let mut p = params.clone();
            if idx < n_w {
                p.layers[l].weights[idx] += d;
            } else {
                p.layers[l].bias[idx - n_w] += d;
            }
            loss_of(&p)
        };
        let fd = (bumped(h) - bumped(-h)) / (2.0 * h);
        worst_net = worst_net.max((fd - analytic).abs() / analytic.abs());
        checked += 1;
    }
    outcome(
        worst_loss <= 1e-4 && worst_net <= 1e-4,
        format!("500 points max rel={worst_loss:.2e}; 20 params max rel={worst_net:.2e}"),
    )
}

fn monte_carlo_crps() -> Outcome {
    let closed = crps_gaussian_closed(0.0, 1.0, 0.0).unwrap();
    let errs: Vec<f64> = (0..20)
        .map(|seed| {
            let mut rng = DistRng::new(1000 + seed);
            let s: Vec<f64> = (0..10_000).map(|_| rng.normal()).collect();
            (crps_pwm(&ens(s), 0.0).unwrap() - closed).abs()
        })
        .collect();
    let med = median(errs);
    outcome(
        (closed - 0.23370).abs() <= 1e-5 && med <= 0.01,
        format!("closed form {closed:.5}, median |MC - closed| = {med:.4}"),
    )
}

/// Observations and ensembles drawn from a shared conditional Gaussian.
fn calibration_oracle() -> Outcome {
    let mut rng = DistRng::new(17);
    let (mut preds, mut ys) = (Vec::new(), Vec::new());
    for _ in 0..2000 {
        let mu = rng.uniform_in(-3.0, 3.0);
        let sigma = rng.uniform_in(0.5, 2.0);
        ys.push(rng.normal_with(mu, sigma));
        preds.push(ens((0..1000).map(|_| rng.normal_with(mu, sigma)).collect()));
    }
    let p = picp(&preds, &ys, 0.025, 0.975).unwrap();
    let q = qice(&preds, &ys, 10).unwrap() * 100.0;
    outcome((p - 0.95).abs() <= 0.02 && q <= 2.0, format!("PICP={p:.4}, QICE={q:.3}%"))
}

fn toy_split(kind: ToyKind, n: usize, seed: u64) -> (Dataset, Dataset) {
    let raw = generate_toy(&ToyTask { kind, n_samples: n, seed }).unwrap();
    let fold = make_folds(n, 1, seed).unwrap().folds.remove(0);
    let z = standardize(&raw, &fold.train).unwrap();
    (z.subset(&fold.train).unwrap(), z.subset(&fold.test).unwrap())
}

fn model(k: usize, seed: u64) -> ModelConfig {
    ModelConfig {
        seed,
        ..ModelConfig::new(1, vec![32, 32], k)
    }
}

fn fit(train_set: &Dataset, cfg: &ModelConfig, seed: u64, epochs: usize) -> ModelParams {
    let tc = TrainConfig {
        lr: 3e-3,
        max_epochs: epochs,
        seed,
        ..Default::default()
    };
    train(train_set, cfg, &tc).unwrap().params
}

fn held_out(params: &ModelParams, test: &Dataset) -> (f64, f64) {
    let preds = Predictor::new(params).predict_rows(test.rows()).unwrap();
    (picp(&preds, test.y(), 0.025, 0.975).unwrap(), qice(&preds, test.y(), 10).unwrap() * 100.0)
}

fn toy_end_to_end() -> Outcome {
    let mut pass = true;
    let mut detail = Vec::new();
    for kind in [ToyKind::Linear, ToyKind::Sinusoidal] {
        let (tr, te) = toy_split(kind, 5000, 1);
        let params = fit(&tr, &model(1000, 3), 4, 60);
        let (p, q) = held_out(&params, &te);
        pass &= q <= 5.0 && (0.90..=0.99).contains(&p);
        detail.push(format!("{}: QICE={q:.2}% PICP={p:.3}", kind.name()));
    }
    outcome(pass, detail.join("; "))
}

fn ablation_trend() -> Outcome {
    let seeds = 0..5u64;
    let mut medians = Vec::new();
    for k in [10, 100, 1000] {
        let qs: Vec<f64> = seeds
            .clone()
            .map(|s| {
                let (tr, te) = toy_split(ToyKind::Linear, 2000, 50 + s);
                held_out(&fit(&tr, &model(k, 10 + s), 20 + s, 40), &te).1
            })
            .collect();
        medians.push(median(qs));
    }
    let trend_ok = medians.windows(2).all(|w| w[1] <= w[0] + 0.5);

    // K=10 per pass, so T=100 pooled passes reach the grid's largest sample count
    let (mut single, mut pooled) = (Vec::new(), Vec::new());
    for s in seeds {
        let (tr, te) = toy_split(ToyKind::Linear, 2000, 70 + s);
        let cfg = ModelConfig {
            dropout_p: 0.1,
            ..model(10, 30 + s)
        };
        let params = fit(&tr, &cfg, 40 + s, 40);
        let predictor = Predictor::new(&params);
        for (t, out) in [(1, &mut single), (100, &mut pooled)] {
            let preds: Vec<EnsemblePrediction> =
                te.rows().enumerate().map(|(i, x)| predictor.predict_mcd(x, t, 1000 * s + i as u64).unwrap()).collect();
            out.push(qice(&preds, te.y(), 10).unwrap() * 100.0);
        }
    }
    let (m1, m100) = (median(single), median(pooled));
    outcome(
        trend_ok && m100 <= m1 + 0.5,
        format!(
            "median QICE K=10/100/1000: {:.2}/{:.2}/{:.2}%; MCD T=1 {m1:.2}% vs T=100 {m100:.2}%",
            medians[0], medians[1], medians[2]
        ),
    )
}

fn single_pass(bin: &Path) -> Outcome {
    let params = ModelParams::init(&ModelConfig::new(4, vec![16], 1000)).unwrap();
    let mut rng = DistRng::new(1);
    let rows: Vec<Vec<f64>> = (0..257).map(|_| (0..4).map(|_| rng.normal()).collect()).collect();
    let predictor = Predictor::new(&params);
    let preds = predictor.predict_rows(rows.iter().map(Vec::as_slice)).unwrap();
    let counter_ok = predictor.forward_count() == rows.len() && preds.iter().all(|p| p.len() == 1000);

    let out = Command::new(bin).args(["bench", "--rows", "300", "--repeats", "3"]).output().unwrap();
    let stdout = String::from_utf8_lossy(&out.stdout);
    let bench_ok = out.status.success()
        && stdout.lines().filter(|l| l.contains("forward_count=300") && l.contains("k=1000")).count() == 3
        && stdout.contains("single_pass=true");
    outcome(
        counter_ok && bench_ok,
        format!("predict: {} forwards for {} rows; bench forward count = rows: {bench_ok}", predictor.forward_count(), rows.len()),
    )
}

fn uninformative(n: usize, seed: u64, draw: impl Fn(&mut DistRng) -> f64) -> Dataset {
    let mut rng = DistRng::new(seed);
    let rows: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.uniform()]).collect();
    let y: Vec<f64> = (0..n).map(|_| draw(&mut rng)).collect();
    Dataset::new(rows, y).unwrap()
}

fn gaussian_baseline() -> Outcome {
    let tc = TrainConfig {
        lr: 3e-3,
        max_epochs: 40,
        seed: 5,
        ..Default::default()
    };
    let raw = uninformative(3000, 21, |r| r.normal_with(3.0, 2.0));
    let all: Vec<usize> = (0..raw.n_rows()).collect();
    let ds = standardize(&raw, &all).unwrap();
    let stats = ds.standardization().unwrap().clone();
    let params = train_gaussian_baseline(&ds, &model(100, 4), &tc).unwrap().params;
    let (mu, sigma) = predict_gaussian(&params, &[0.5]).unwrap();
    let (mu, sigma) = (stats.inverse_y(mu), sigma * stats.y_scale());
    let moments_ok = (mu - 3.0).abs() <= 0.2 && (sigma - 2.0).abs() <= 0.3;

    // lognormal target: strongly right-skewed
    let raw = uninformative(3000, 22, |r| (0.8 * r.normal()).exp());
    let fold = make_folds(3000, 1, 22).unwrap().folds.remove(0);
    let z = standardize(&raw, &fold.train).unwrap();
    let (tr, te) = (z.subset(&fold.train).unwrap(), z.subset(&fold.test).unwrap());
    let g = train_gaussian_baseline(&tr, &model(100, 6), &tc).unwrap().params;
    let d = train(&tr, &model(100, 6), &tc).unwrap().params;
    let (_, q_gauss) = held_out(&g, &te);
    let (_, q_dist) = held_out(&d, &te);
    outcome(
        moments_ok && q_gauss > q_dist,
        format!("mu={mu:.3} sigma={sigma:.3}; skewed target QICE Gaussian {q_gauss:.2}% vs ensemble {q_dist:.2}%"),
    )
}

fn cli_determinism(bin: &Path) -> Outcome {
    let run = |dir: &Path| -> Vec<Vec<u8>> {
        let f = |name: &str| dir.join(name).to_str().unwrap().to_string();
        let (data, folds, ck, dist) = (f("d.csv"), f("folds.txt"), f("m.dprd"), f("dist.txt"));
        let cmds: Vec<Vec<&str>> = vec![
            vec!["gen-toy", "eight_gaussians", "--n", "400", "--seed", "2", "--out", &data],
            vec!["make-folds", "--n", "400", "--count", "2", "--seed", "2", "--out", &folds],
            vec!["train", "--data", &data, "--folds", &folds, "--fold", "1", "--k", "30", "--hidden", "16", "--dropout", "0.1", "--epochs", "5", "--seed", "2", "--out", &ck],
            vec!["eval", "--checkpoint", &ck, "--data", &data, "--mcd-t", "4", "--per-batch", "50", "--seed", "2"],
            vec!["predict-dist", "--checkpoint", &ck, "--data", &data, "--levels", "0.5,0.9", "--out", &dist],
            vec!["predict-dist", "--checkpoint", &ck, "--x", "-1.5", "--mcd-t", "2"],
            vec!["bench", "--checkpoint", &ck, "--rows", "50", "--repeats", "2"],
        ];
        let mut outputs: Vec<Vec<u8>> = cmds
            .iter()
            .map(|args| {
                let out = Command::new(bin).args(args).env_remove("DISTPRED_SEED").output().unwrap();
                assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
                out.stdout
            })
            .collect();
        for name in ["d.csv", "folds.txt", "m.dprd", "m.dprd.history.csv", "dist.txt"] {
            outputs.push(std::fs::read(dir.join(name)).unwrap());
        }
        outputs
    };
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let (first, second) = (run(a.path()), run(b.path()));
    let same = first.iter().zip(&second).filter(|(x, y)| x == y).count();
    outcome(same == first.len(), format!("{same}/{} stdout streams and files identical", first.len()))
}

fn main() {
    let bin = Path::new(env!("CARGO_BIN_EXE_distpred"));
    type Check<'a> = (&'static str, u64, Box<dyn Fn() -> Outcome + 'a>);
    let checks: Vec<Check> = vec![
        ("estimator equivalence", 5, Box::new(estimator_equivalence)),
        ("gradient correctness", 30, Box::new(gradient_correctness)),
        ("Monte-Carlo CRPS consistency", 10, Box::new(monte_carlo_crps)),
        ("calibration oracle", 120, Box::new(calibration_oracle)),
        ("toy-task end-to-end", 300, Box::new(toy_end_to_end)),
        ("ablation trend", 600, Box::new(ablation_trend)),
        ("single-pass inference", 60, Box::new(|| single_pass(bin))),
        ("Gaussian baseline recovery", 300, Box::new(gaussian_baseline)),
        ("CLI determinism", 300, Box::new(|| cli_determinism(bin))),
    ];
    let mut failures = 0;
    println!("\nacceptance criteria");
    for (name, limit, check) in &checks {
        let start = Instant::now();
        let result = std::panic::catch_unwind(std::panic::AssertUnwindSafe(check));
        let took = start.elapsed();
        let o = result.unwrap_or_else(|_| outcome(false, "panicked".into()));
        let in_time = took <= Duration::from_secs(*limit);
        let pass = o.pass && in_time;
        if !pass {
            failures += 1;
        }
        let timing = if in_time { String::new() } else { format!(" over the {limit}s budget") };
        println!(
            "{} {name}: {} [{:.2}s{timing}]",
            if pass { "PASS" } else { "FAIL" },
            o.detail,
            took.as_secs_f64()
        );
    }
    println!("{} of {} criteria passed\n", checks.len() - failures, checks.len());
    if failures > 0 {
        std::process::exit(1);
    }
}
