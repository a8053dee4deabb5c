use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Instant;

use distpred::data::{self, Dataset, FoldPlan, Standardization, TargetColumn, ToyKind, ToyTask};
use distpred::distribution::{histogram_csv, intervals_csv, DEFAULT_KL_BINS};
use distpred::metrics::{self, average_reports, evaluate};
use distpred::model::ModelParams;
use distpred::rng::DistRng;
use distpred::train::{self as training, predict_gaussian, Checkpoint, Predictor};
use distpred::{
    Activation, EmpiricalDistribution, EnsemblePrediction, HeadKind, MetricsConfig, MetricsReport, ModelConfig,
    TrainConfig,
};

use crate::config::FileConfig;
use crate::error::{io_err, usage, CliResult};
use crate::{BenchArgs, DataArgs, EvalArgs, MetricFlags, ModelFlags, PredictDistArgs, TrainArgs, TrainFlags};

const DEFAULT_K: usize = 1000;
const DEFAULT_HIDDEN: &str = "64,64";
const DEFAULT_LEVELS: &str = "0.9,0.95,0.99";
const DEFAULT_BINS: usize = 20;

pub fn gen_toy(kind: ToyKind, n: usize, seed: u64, out: &Path) -> CliResult<()> {
    if n < 1 {
        return Err(usage("--n must be at least 1"));
    }
    let ds = data::generate_toy(&ToyTask { kind, n_samples: n, seed })?;
    write_file(out, data::to_delimited(&ds))?;
    println!("task={} rows={} cols={}", kind.name(), ds.n_rows(), ds.n_features() + 1);
    Ok(())
}

pub fn make_folds(n: usize, count: usize, seed: u64, out: &Path) -> CliResult<()> {
    if n < 10 || count < 1 {
        return Err(usage("make-folds needs --n >= 10 and --count >= 1"));
    }
    let plan = data::make_folds(n, count, seed)?;
    write_file(out, plan.to_text())?;
    println!("folds={count} rows={n} test_rows={}", plan.folds[0].test.len());
    Ok(())
}

pub fn train(args: &TrainArgs, file: &FileConfig) -> CliResult<()> {
    let seed = file.seed(args.seed)?;
    // validate every flag before touching the data
    let model_proto = model_config(&args.model, file, 1, seed)?;
    let train_cfg = train_config(&args.train, file, seed)?;
    let metrics_cfg = metrics_config(&args.metrics, file)?;
    let folds_path = file.pick_opt(args.folds.clone(), "folds")?;
    let fold_idx = file.pick(args.fold, "fold", 0usize)?;

    let raw = load_data(&args.data)?;
    let fold = match folds_path {
        Some(p) => {
            let text = fs::read_to_string(&p).map_err(io_err(format!("reading fold file {}", p.display())))?;
            let plan = FoldPlan::from_text(&text, raw.n_rows())?;
            let count = plan.folds.len();
            plan.folds
                .into_iter()
                .nth(fold_idx)
                .ok_or_else(|| usage(format!("--fold {fold_idx} out of range; the fold file has {count} folds")))?
        }
        None => {
            if fold_idx != 0 {
                return Err(usage("--fold needs --folds"));
            }
            data::make_folds(raw.n_rows(), 1, seed)?.folds.remove(0)
        }
    };

    let z = data::standardize(&raw, &fold.train)?;
    let stats = z.standardization().cloned().expect("standardize records its statistics");
    let train_set = z.subset(&fold.train)?;
    let model_cfg = ModelConfig {
        input_dim: raw.n_features(),
        ..model_proto
    };
    let outcome = training::train(&train_set, &model_cfg, &train_cfg)?;
    eprintln!(
        "trained {} epochs, best epoch {}",
        outcome.history.epochs.len(),
        outcome.history.best_epoch + 1
    );

    let ck = Checkpoint {
        params: outcome.params,
        optimizer: Some(outcome.optimizer),
        standardization: Some(stats),
    };
    ck.save(&args.out)?;
    let history_path = args
        .history
        .clone()
        .unwrap_or_else(|| format!("{}.history.csv", args.out.display()).into());
    write_file(&history_path, outcome.history.to_csv())?;

    let test = raw.subset(&fold.test)?;
    let report = report(&ck, &test, &metrics_cfg, None, None)?;
    println!(
        "epochs={} best_epoch={} {}",
        outcome.history.epochs.len(),
        outcome.history.best_epoch + 1,
        report.to_kv_line()
    );
    Ok(())
}

pub fn eval(args: &EvalArgs, file: &FileConfig) -> CliResult<()> {
    let metrics_cfg = metrics_config(&args.metrics, file)?;
    let mcd_t = file.pick_opt(args.mcd_t, "mcd-t")?;
    let per_batch = file.pick_opt(args.per_batch, "per-batch")?;
    if per_batch == Some(0) {
        return Err(usage("--per-batch must be at least 1"));
    }
    let seed = file.seed(args.seed)?;
    let ck = Checkpoint::load(&args.checkpoint)?;
    let mcd = mcd_setting(&ck.params, mcd_t, seed)?;
    let raw = load_data(&args.data)?;
    let report = report(&ck, &raw, &metrics_cfg, mcd, per_batch)?;
    println!("{}", report.to_kv_line());
    Ok(())
}

pub fn predict_dist(args: &PredictDistArgs, file: &FileConfig) -> CliResult<()> {
    let levels = parse_list::<f64>(&file.pick(args.levels.clone(), "levels", DEFAULT_LEVELS.to_string())?, "--levels")?;
    if levels.iter().any(|l| !(*l > 0.0 && *l < 1.0)) {
        return Err(usage("--levels must lie strictly between 0 and 1"));
    }
    let bins = file.pick(args.bins, "bins", DEFAULT_BINS)?;
    if bins < 1 {
        return Err(usage("--bins must be at least 1"));
    }
    let mcd_t = file.pick_opt(args.mcd_t, "mcd-t")?;
    let seed = file.seed(args.seed)?;
    let ck = Checkpoint::load(&args.checkpoint)?;
    let mcd = mcd_setting(&ck.params, mcd_t, seed)?;

    let rows: Vec<Vec<f64>> = match (&args.data, &args.x) {
        (Some(path), _) => {
            let ds = load_data(&DataArgs {
                data: path.clone(),
                no_header: args.no_header,
                target: args.target.clone(),
            })?;
            ds.rows().map(<[f64]>::to_vec).collect()
        }
        (None, Some(x)) => vec![parse_list::<f64>(x, "--x")?],
        (None, None) => return Err(usage("predict-dist needs --data or --x")),
    };
    let preds = predict_original_units(&ck, &rows, mcd)?;

    let mut out = String::new();
    for (i, pred) in preds.iter().enumerate() {
        let dist = EmpiricalDistribution::from_samples(pred);
        let _ = writeln!(out, "[row={i} section=samples]\nvalue");
        for v in dist.sorted_samples() {
            let _ = writeln!(out, "{v}");
        }
        let _ = writeln!(out, "\n[row={i} section=histogram]");
        out.push_str(&histogram_csv(&dist.histogram(bins)?));
        let _ = writeln!(out, "\n[row={i} section=cdf]\nt,cdf");
        for (t, p) in dist.cdf_knots() {
            let _ = writeln!(out, "{t},{p}");
        }
        let _ = writeln!(out, "\n[row={i} section=intervals]");
        let cis = levels.iter().map(|&l| dist.confidence_interval(l)).collect::<Result<Vec<_>, _>>()?;
        out.push_str(&intervals_csv(&cis));
        if dist.len() >= 4 {
            let _ = writeln!(out, "\n[row={i} section=summary]");
            out.push_str("mean,stddev,skewness,excess_kurtosis,kl_to_std_normal\n");
            let s = dist.summary(DEFAULT_KL_BINS)?;
            // KL compares shape only, so z-score by the sample moments first
            let kl = if s.stddev > 0.0 {
                let z = dist.sorted_samples().iter().map(|v| (v - s.mean) / s.stddev).collect();
                EmpiricalDistribution::from_vec(z)?.summary(DEFAULT_KL_BINS)?.kl_to_std_normal
            } else {
                f64::INFINITY
            };
            let _ = writeln!(out, "{},{},{},{},{}", s.mean, s.stddev, s.skewness, s.excess_kurtosis, kl);
        }
        out.push('\n');
    }
    match &args.out {
        Some(path) => {
            write_file(path, out)?;
            println!("rows={} k={}", preds.len(), preds.first().map_or(0, EnsemblePrediction::len));
        }
        None => print!("{out}"),
    }
    Ok(())
}

pub fn bench(args: &BenchArgs, file: &FileConfig) -> CliResult<()> {
    let seed = file.seed(args.seed)?;
    let rows = file.pick(args.rows, "rows", 1000usize)?;
    let repeats = file.pick(args.repeats, "repeats", 3usize)?;
    if rows < 1 || repeats < 1 {
        return Err(usage("--rows and --repeats must be at least 1"));
    }
    let params = match &args.checkpoint {
        Some(p) => Checkpoint::load(p)?.params,
        None => {
            if args.input_dim < 1 {
                return Err(usage("--input-dim must be at least 1"));
            }
            ModelParams::init(&model_config(&args.model, file, args.input_dim, seed)?)?
        }
    };
    let mut rng = DistRng::new(seed);
    let inputs: Vec<Vec<f64>> = (0..rows)
        .map(|_| (0..params.config.input_dim).map(|_| rng.normal()).collect())
        .collect();
    let k = params.config.k_out;
    let mut times = Vec::with_capacity(repeats);
    for r in 1..=repeats {
        let predictor = Predictor::new(&params);
        let start = Instant::now();
        let preds = predictor.predict_rows(inputs.iter().map(Vec::as_slice))?;
        let secs = start.elapsed().as_secs_f64();
        let forwards = predictor.forward_count();
        println!("repeat={r} rows={rows} k={k} forward_count={forwards} samples={}", preds.len() * k);
        eprintln!("repeat={r} seconds={secs:.6} samples_per_sec={:.0}", (rows * k) as f64 / secs);
        if forwards != rows {
            return Err(distpred::Error::InvalidInput(format!("{forwards} forward passes for {rows} rows")).into());
        }
        times.push(secs);
    }
    times.sort_by(f64::total_cmp);
    eprintln!("median_seconds={:.6}", times[times.len() / 2]);
    println!("single_pass=true");
    Ok(())
}

// shared plumbing

fn write_file(path: &Path, contents: String) -> CliResult<()> {
    fs::write(path, contents).map_err(io_err(format!("writing {}", path.display())))
}

fn parse_list<T: std::str::FromStr>(s: &str, flag: &str) -> CliResult<Vec<T>> {
    s.split(',')
        .map(|p| p.trim().parse::<T>().map_err(|_| usage(format!("{flag}: cannot parse '{p}'"))))
        .collect()
}

fn load_data(args: &DataArgs) -> CliResult<Dataset> {
    let target = match args.target.as_str() {
        "last" => TargetColumn::Last,
        t => match t.parse::<usize>() {
            Ok(i) => TargetColumn::Index(i),
            Err(_) => TargetColumn::Name(t.to_string()),
        },
    };
    Ok(data::load_delimited(&args.data, !args.no_header, &target)?)
}

pub fn model_config(flags: &ModelFlags, file: &FileConfig, input_dim: usize, seed: u64) -> CliResult<ModelConfig> {
    let hidden_text = file.pick(flags.hidden.clone(), "hidden", DEFAULT_HIDDEN.to_string())?;
    let hidden_dims = if hidden_text.trim().is_empty() {
        Vec::new()
    } else {
        parse_list::<usize>(&hidden_text, "--hidden")?
    };
    let activation: Activation = file
        .pick(flags.activation.clone(), "activation", "relu".to_string())?
        .parse()
        .map_err(|e: distpred::Error| usage(e.to_string()))?;
    let cfg = ModelConfig {
        input_dim,
        hidden_dims,
        k_out: file.pick(flags.k, "k", DEFAULT_K)?,
        activation,
        dropout_p: file.pick(flags.dropout, "dropout", 0.0)?,
        seed,
        head: if file.switch(flags.gaussian_baseline, "gaussian-baseline")? {
            HeadKind::Gaussian
        } else {
            HeadKind::Ensemble
        },
    };
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    Ok(cfg)
}

fn train_config(flags: &TrainFlags, file: &FileConfig, seed: u64) -> CliResult<TrainConfig> {
    let d = TrainConfig::default();
    let cfg = TrainConfig {
        lr: file.pick(flags.lr, "lr", d.lr)?,
        max_epochs: file.pick(flags.epochs, "epochs", d.max_epochs)?,
        patience: file.pick(flags.patience, "patience", d.patience)?,
        batch_size: file.pick(flags.batch_size, "batch-size", d.batch_size)?,
        seed,
        ..d
    };
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    Ok(cfg)
}

fn metrics_config(flags: &MetricFlags, file: &FileConfig) -> CliResult<MetricsConfig> {
    let d = MetricsConfig::default();
    let cfg = MetricsConfig {
        m_bins: file.pick(flags.m_bins, "m-bins", d.m_bins)?,
        low_pct: file.pick(flags.low_pct, "low-pct", d.low_pct)?,
        high_pct: file.pick(flags.high_pct, "high-pct", d.high_pct)?,
    };
    if cfg.m_bins < 2 {
        return Err(usage("--m-bins must be at least 2"));
    }
    if !(cfg.low_pct > 0.0 && cfg.low_pct < cfg.high_pct && cfg.high_pct < 1.0) {
        return Err(usage("percentiles must satisfy 0 < --low-pct < --high-pct < 1"));
    }
    Ok(cfg)
}

/// `(t, seed)` for MC dropout after checking the model can support it.
fn mcd_setting(params: &ModelParams, mcd_t: Option<usize>, seed: u64) -> CliResult<Option<(usize, u64)>> {
    let Some(t) = mcd_t else { return Ok(None) };
    if t < 1 {
        return Err(usage("--mcd-t must be at least 1"));
    }
    if params.config.dropout_p == 0.0 {
        return Err(usage("--mcd-t needs a model trained with --dropout > 0"));
    }
    if params.config.head != HeadKind::Ensemble {
        return Err(usage("--mcd-t needs an ensemble head"));
    }
    Ok(Some((t, seed)))
}

fn standardized_rows(ck: &Checkpoint, rows: &[Vec<f64>]) -> CliResult<Vec<Vec<f64>>> {
    let dim = ck.params.config.input_dim;
    if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
        return Err(distpred::Error::InvalidInput(format!(
            "model expects {dim} features, data has {}",
            bad.len()
        ))
        .into());
    }
    Ok(match &ck.standardization {
        Some(s) => rows.iter().map(|r| s.transform_x(r)).collect(),
        None => rows.to_vec(),
    })
}

fn to_original(stats: Option<&Standardization>, pred: EnsemblePrediction) -> CliResult<EnsemblePrediction> {
    Ok(match stats {
        Some(s) => EnsemblePrediction::new(pred.into_samples().into_iter().map(|v| s.inverse_y(v)).collect())?,
        None => pred,
    })
}

fn predict_original_units(ck: &Checkpoint, rows: &[Vec<f64>], mcd: Option<(usize, u64)>) -> CliResult<Vec<EnsemblePrediction>> {
    let xs = standardized_rows(ck, rows)?;
    let predictor = Predictor::new(&ck.params);
    xs.iter()
        .enumerate()
        .map(|(i, x)| {
            let pred = match mcd {
                Some((t, seed)) => predictor.predict_mcd(x, t, DistRng::stream(seed, i as u64).next_u64())?,
                None => predictor.predict(x)?,
            };
            to_original(ck.standardization.as_ref(), pred)
        })
        .collect()
}

/// Metrics in original target units, optionally averaged over row batches.
fn report(
    ck: &Checkpoint,
    ds: &Dataset,
    cfg: &MetricsConfig,
    mcd: Option<(usize, u64)>,
    per_batch: Option<usize>,
) -> CliResult<MetricsReport> {
    let rows: Vec<Vec<f64>> = ds.rows().map(<[f64]>::to_vec).collect();
    let preds = predict_original_units(ck, &rows, mcd)?;
    let ys = ds.y();
    let gaussian = if ck.params.config.head == HeadKind::Gaussian {
        let scale = ck.standardization.as_ref().map_or(1.0, Standardization::y_scale);
        let xs = standardized_rows(ck, &rows)?;
        let mut mus = Vec::with_capacity(xs.len());
        let mut sigmas = Vec::with_capacity(xs.len());
        for x in &xs {
            let (mu, sigma) = predict_gaussian(&ck.params, x)?;
            mus.push(ck.standardization.as_ref().map_or(mu, |s| s.inverse_y(mu)));
            sigmas.push(sigma * scale);
        }
        Some((mus, sigmas))
    } else {
        None
    };
    let span = per_batch.unwrap_or(ys.len()).max(1);
    let mut reports = Vec::new();
    for start in (0..ys.len()).step_by(span) {
        let end = (start + span).min(ys.len());
        let mut r = evaluate(&preds[start..end], &ys[start..end], cfg)?;
        if let Some((mus, sigmas)) = &gaussian {
            r.nll = Some(metrics::gaussian_nll(&mus[start..end], &sigmas[start..end], &ys[start..end])?);
        }
        reports.push(r);
    }
    Ok(if reports.len() == 1 { reports.remove(0) } else { average_reports(&reports) })
}
