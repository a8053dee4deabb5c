//! Datasets: synthetic toy tasks, delimited-text IO, resampled train/test
//! splits, standardisation and sliding windows.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{invalid, Error, Result};
use crate::model::ByteReader;
use crate::rng::DistRng;

/// Per-column statistics from the training rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardization {
    pub x_mean: Vec<f64>,
    /// Zero-variance columns store `1.0`.
    pub x_std: Vec<f64>,
    pub y_mean: f64,
    pub y_std: f64,
}

impl Standardization {
    pub fn transform_x(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.x_mean.iter().zip(&self.x_std))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }

    pub fn transform_y(&self, y: f64) -> f64 {
        (y - self.y_mean) / self.y_std
    }

    pub fn inverse_y(&self, y: f64) -> f64 {
        y * self.y_std + self.y_mean
    }

    pub fn inverse_x(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.x_mean.iter().zip(&self.x_std))
            .map(|(v, (m, s))| v * s + m)
            .collect()
    }

    /// Scale factor from standardised to original target units.
    pub fn y_scale(&self) -> f64 {
        self.y_std
    }

    pub(crate) fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&(self.x_mean.len() as u32).to_le_bytes());
        for v in self.x_mean.iter().chain(&self.x_std) {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&self.y_mean.to_le_bytes());
        out.extend_from_slice(&self.y_std.to_le_bytes());
        out
    }

    pub(crate) fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(bytes);
        let p = r.u32()? as usize;
        let x_mean = (0..p).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        let x_std = (0..p).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        Ok(Standardization {
            x_mean,
            x_std,
            y_mean: r.f64()?,
            y_std: r.f64()?,
        })
    }
}

/// `N` rows of features (row-major) and a scalar target.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: Vec<f64>,
    n_features: usize,
    y: Vec<f64>,
    feature_names: Vec<String>,
    target_name: String,
    standardization: Option<Standardization>,
}

impl Dataset {
    pub fn new(rows: Vec<Vec<f64>>, y: Vec<f64>) -> Result<Self> {
        let p = rows.first().map_or(0, Vec::len);
        let names = (0..p).map(|i| format!("x{i}")).collect();
        Self::with_names(rows, y, names, "y".to_string())
    }

    pub fn with_names(rows: Vec<Vec<f64>>, y: Vec<f64>, feature_names: Vec<String>, target_name: String) -> Result<Self> {
        if rows.is_empty() {
            return Err(invalid("dataset needs at least one row"));
        }
        if rows.len() != y.len() {
            return Err(invalid(format!("{} feature rows but {} targets", rows.len(), y.len())));
        }
        let p = rows[0].len();
        if p == 0 {
            return Err(invalid("dataset needs at least one feature column"));
        }
        if feature_names.len() != p {
            return Err(invalid("feature name count does not match column count"));
        }
        let mut x = Vec::with_capacity(rows.len() * p);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != p {
                return Err(invalid(format!("row {i} has {} features, expected {p}", r.len())));
            }
            x.extend_from_slice(r);
        }
        if x.iter().chain(&y).any(|v| !v.is_finite()) {
            return Err(invalid("dataset contains non-finite values"));
        }
        Ok(Dataset {
            x,
            n_features: p,
            y,
            feature_names,
            target_name,
            standardization: None,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.y.len()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.x.chunks_exact(self.n_features)
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn target_name(&self) -> &str {
        &self.target_name
    }

    pub fn standardization(&self) -> Option<&Standardization> {
        self.standardization.as_ref()
    }

    pub fn subset(&self, indices: &[usize]) -> Result<Dataset> {
        if indices.is_empty() {
            return Err(invalid("subset needs at least one index"));
        }
        let mut x = Vec::with_capacity(indices.len() * self.n_features);
        let mut y = Vec::with_capacity(indices.len());
        for &i in indices {
            if i >= self.n_rows() {
                return Err(invalid(format!("row index {i} out of range")));
            }
            x.extend_from_slice(self.row(i));
            y.push(self.y[i]);
        }
        Ok(Dataset {
            x,
            y,
            n_features: self.n_features,
            feature_names: self.feature_names.clone(),
            target_name: self.target_name.clone(),
            standardization: self.standardization.clone(),
        })
    }

    /// Applies existing statistics (e.g. loaded from a checkpoint).
    pub fn apply_standardization(&self, stats: &Standardization) -> Result<Dataset> {
        if stats.x_mean.len() != self.n_features {
            return Err(invalid(format!(
                "standardisation covers {} features, dataset has {}",
                stats.x_mean.len(),
                self.n_features
            )));
        }
        let mut x = Vec::with_capacity(self.x.len());
        for r in self.rows() {
            x.extend(stats.transform_x(r));
        }
        Ok(Dataset {
            x,
            y: self.y.iter().map(|&v| stats.transform_y(v)).collect(),
            n_features: self.n_features,
            feature_names: self.feature_names.clone(),
            target_name: self.target_name.clone(),
            standardization: Some(stats.clone()),
        })
    }
}

fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    (mean, if std > 0.0 { std } else { 1.0 })
}

/// Centres and scales every row with statistics from `train_indices` only.
pub fn standardize(dataset: &Dataset, train_indices: &[usize]) -> Result<Dataset> {
    if train_indices.is_empty() {
        return Err(invalid("standardisation needs at least one training row"));
    }
    if let Some(&bad) = train_indices.iter().find(|&&i| i >= dataset.n_rows()) {
        return Err(invalid(format!("row index {bad} out of range")));
    }
    let p = dataset.n_features;
    let (mut x_mean, mut x_std) = (Vec::with_capacity(p), Vec::with_capacity(p));
    for c in 0..p {
        let (m, s) = mean_std(train_indices.iter().map(|&i| dataset.x[i * p + c]));
        x_mean.push(m);
        x_std.push(s);
    }
    let (y_mean, y_std) = mean_std(train_indices.iter().map(|&i| dataset.y[i]));
    dataset.apply_standardization(&Standardization {
        x_mean,
        x_std,
        y_mean,
        y_std,
    })
}

/// Which column of a delimited file holds the target.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TargetColumn {
    Last,
    Index(usize),
    Name(String),
}

fn split_fields(line: &str) -> Vec<&str> {
    if line.contains(',') {
        line.split(',').map(str::trim).collect()
    } else {
        line.split_whitespace().collect()
    }
}

/// Reads a comma- or whitespace-delimited numeric table.
pub fn load_delimited(path: impl AsRef<Path>, has_header: bool, target: &TargetColumn) -> Result<Dataset> {
    let text = fs::read_to_string(path)?;
    parse_delimited(&text, has_header, target)
}

pub fn parse_delimited(text: &str, has_header: bool, target: &TargetColumn) -> Result<Dataset> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());

    let header: Option<Vec<String>> = if has_header {
        let (_, l) = lines.next().ok_or_else(|| invalid("file is empty"))?;
        Some(split_fields(l).into_iter().map(str::to_string).collect())
    } else {
        None
    };

    let mut table: Vec<Vec<f64>> = Vec::new();
    let mut width = header.as_ref().map(Vec::len);
    for (line_no, line) in lines {
        let fields = split_fields(line);
        match width {
            Some(w) if w != fields.len() => {
                return Err(Error::Parse {
                    line: line_no,
                    column: 0,
                    message: format!("expected {w} fields, found {}", fields.len()),
                })
            }
            None => width = Some(fields.len()),
            _ => {}
        }
        let row = fields
            .iter()
            .enumerate()
            .map(|(c, f)| {
                f.parse::<f64>().map_err(|_| Error::Parse {
                    line: line_no,
                    column: c + 1,
                    message: format!("'{f}' is not a number"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        table.push(row);
    }
    let width = width.unwrap_or(0);
    if table.is_empty() {
        return Err(invalid("file contains no data rows"));
    }
    if width < 2 {
        return Err(invalid("need at least one feature column and a target column"));
    }
    let names = header.unwrap_or_else(|| (0..width).map(|i| format!("c{i}")).collect());
    let target_idx = match target {
        TargetColumn::Last => width - 1,
        TargetColumn::Index(i) if *i < width => *i,
        TargetColumn::Index(i) => {
            return Err(Error::Parse {
                line: 1,
                column: 0,
                message: format!("target column {i} out of range for {width} columns"),
            })
        }
        TargetColumn::Name(n) => names.iter().position(|h| h == n).ok_or_else(|| Error::Parse {
            line: 1,
            column: 0,
            message: format!("no column named '{n}'; available columns: {}", names.join(", ")),
        })?,
    };
    let target_name = names[target_idx].clone();
    let feature_names = names
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != target_idx)
        .map(|(_, n)| n.clone())
        .collect();
    let mut y = Vec::with_capacity(table.len());
    let rows = table
        .into_iter()
        .map(|mut r| {
            y.push(r.remove(target_idx));
            r
        })
        .collect();
    Dataset::with_names(rows, y, feature_names, target_name)
}

/// Comma-separated text with a header; the target is the last column.
pub fn to_delimited(dataset: &Dataset) -> String {
    let mut out = dataset.feature_names.join(",");
    out.push(',');
    out.push_str(&dataset.target_name);
    out.push('\n');
    for (r, y) in dataset.rows().zip(&dataset.y) {
        for v in r {
            let _ = write!(out, "{v},");
        }
        let _ = writeln!(out, "{y}");
    }
    out
}

pub fn save_delimited(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, to_delimited(dataset))?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fold {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Independent seeded 90/10 resamples of `0..n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldPlan {
    pub n: usize,
    pub seed: u64,
    pub folds: Vec<Fold>,
}

pub const TEST_FRACTION: f64 = 0.1;

/// Shuffles `0..n` and splits off `round(fraction·n)` rows, both halves sorted.
pub(crate) fn random_split(n: usize, fraction: f64, rng: &mut DistRng) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut idx);
    let n_test = ((fraction * n as f64).round() as usize).clamp(1, n - 1);
    let mut test = idx[..n_test].to_vec();
    let mut train = idx[n_test..].to_vec();
    test.sort_unstable();
    train.sort_unstable();
    (train, test)
}

pub fn make_folds(n: usize, fold_count: usize, seed: u64) -> Result<FoldPlan> {
    if n < 10 {
        return Err(invalid(format!("need at least 10 rows to split, got {n}")));
    }
    if fold_count < 1 {
        return Err(invalid("need at least one fold"));
    }
    let folds = (0..fold_count)
        .map(|f| {
            let (train, test) = random_split(n, TEST_FRACTION, &mut DistRng::stream(seed, f as u64));
            Fold { train, test }
        })
        .collect();
    Ok(FoldPlan { n, seed, folds })
}

impl FoldPlan {
    /// One line per fold listing its test indices, space separated.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for f in &self.folds {
            let line: Vec<String> = f.test.iter().map(usize::to_string).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }

    /// Inverse of [`FoldPlan::to_text`]; train indices are the complement in `0..n`.
    pub fn from_text(text: &str, n: usize) -> Result<Self> {
        let mut folds = Vec::new();
        for (line_no, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let mut in_test = vec![false; n];
            for (c, tok) in line.split_whitespace().enumerate() {
                let i: usize = tok.parse().map_err(|_| Error::Parse {
                    line: line_no + 1,
                    column: c + 1,
                    message: format!("'{tok}' is not an index"),
                })?;
                if i >= n {
                    return Err(Error::Parse {
                        line: line_no + 1,
                        column: c + 1,
                        message: format!("index {i} out of range for {n} rows"),
                    });
                }
                in_test[i] = true;
            }
            let (test, train): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| in_test[i]);
            folds.push(Fold { train, test });
        }
        if folds.is_empty() {
            return Err(invalid("fold file lists no folds"));
        }
        Ok(FoldPlan { n, seed: 0, folds })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ToyKind {
    Linear,
    Quadratic,
    Sinusoidal,
    LogLogLinear,
    LogLogCubic,
    InverseSinusoidal,
    EightGaussians,
    FullCircle,
}

impl ToyKind {
    pub const ALL: [ToyKind; 8] = [
        ToyKind::Linear,
        ToyKind::Quadratic,
        ToyKind::Sinusoidal,
        ToyKind::LogLogLinear,
        ToyKind::LogLogCubic,
        ToyKind::InverseSinusoidal,
        ToyKind::EightGaussians,
        ToyKind::FullCircle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ToyKind::Linear => "linear",
            ToyKind::Quadratic => "quadratic",
            ToyKind::Sinusoidal => "sinusoidal",
            ToyKind::LogLogLinear => "loglog_linear",
            ToyKind::LogLogCubic => "loglog_cubic",
            ToyKind::InverseSinusoidal => "inverse_sinusoidal",
            ToyKind::EightGaussians => "eight_gaussians",
            ToyKind::FullCircle => "full_circle",
        }
    }

    /// Noise-free regression function for the additive-noise tasks.
    pub fn mean_function(self, x: f64) -> Option<f64> {
        match self {
            ToyKind::Linear => Some(2.0 * x + 1.0),
            ToyKind::Quadratic => Some(3.0 * x * x + 2.0 * x + 1.0),
            ToyKind::Sinusoidal => Some(sinusoid(x)),
            _ => None,
        }
    }
}

impl FromStr for ToyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ToyKind::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| {
            let names: Vec<&str> = ToyKind::ALL.iter().map(|k| k.name()).collect();
            invalid(format!("unknown toy task '{s}'; expected one of: {}", names.join(", ")))
        })
    }
}

fn sinusoid(x: f64) -> f64 {
    x + 0.3 * (std::f64::consts::TAU * x).sin()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ToyTask {
    pub kind: ToyKind,
    pub n_samples: usize,
    pub seed: u64,
}

/// Draws one synthetic dataset. Generating processes, with `ε ~ N(0, 1)`:
///
/// | task | x | y |
/// |---|---|---|
/// | linear | U[−5, 5] | 2x + 1 + ε |
/// | quadratic | U[−3, 3] | 3x² + 2x + 1 + 2ε |
/// | sinusoidal | U[0, 1] | x + 0.3 sin(2πx) + 0.08ε |
/// | loglog_linear | U[0, 10] | x · exp(0.15ε) |
/// | loglog_cubic | U[0, 5] | x³ · exp(0.15ε) |
/// | inverse_sinusoidal | t + 0.3 sin(2πt) + 0.08ε | t ~ U[0, 1] |
/// | eight_gaussians | 4 cos(πc/4) + 0.2ε₁ | 4 sin(πc/4) + 0.2ε₂, c uniform in 0..8 |
/// | full_circle | r cos θ | r sin θ, θ ~ U[0, 2π), r = 10 + 0.5ε |
///
/// For each row the uniform draws come first, then the normals, in the
/// order written above.
pub fn generate_toy(task: &ToyTask) -> Result<Dataset> {
    if task.n_samples < 1 {
        return Err(invalid("toy task needs n >= 1"));
    }
    let mut rng = DistRng::new(task.seed);
    let mut xs = Vec::with_capacity(task.n_samples);
    let mut ys = Vec::with_capacity(task.n_samples);
    for _ in 0..task.n_samples {
        let (x, y) = match task.kind {
            ToyKind::Linear => {
                let x = rng.uniform_in(-5.0, 5.0);
                (x, 2.0 * x + 1.0 + rng.normal())
            }
            ToyKind::Quadratic => {
                let x = rng.uniform_in(-3.0, 3.0);
                (x, 3.0 * x * x + 2.0 * x + 1.0 + 2.0 * rng.normal())
            }
            ToyKind::Sinusoidal => {
                let x = rng.uniform();
                (x, sinusoid(x) + 0.08 * rng.normal())
            }
            ToyKind::LogLogLinear => {
                let x = rng.uniform_in(0.0, 10.0);
                (x, x * (0.15 * rng.normal()).exp())
            }
            ToyKind::LogLogCubic => {
                let x = rng.uniform_in(0.0, 5.0);
                (x, x.powi(3) * (0.15 * rng.normal()).exp())
            }
            ToyKind::InverseSinusoidal => {
                let t = rng.uniform();
                (sinusoid(t) + 0.08 * rng.normal(), t)
            }
            ToyKind::EightGaussians => {
                let c = rng.below(8) as f64;
                let angle = std::f64::consts::FRAC_PI_4 * c;
                let x = 4.0 * angle.cos() + 0.2 * rng.normal();
                let y = 4.0 * angle.sin() + 0.2 * rng.normal();
                (x, y)
            }
            ToyKind::FullCircle => {
                let theta = rng.uniform_in(0.0, std::f64::consts::TAU);
                let r = 10.0 + 0.5 * rng.normal();
                (r * theta.cos(), r * theta.sin())
            }
        };
        xs.push(vec![x]);
        ys.push(y);
    }
    Dataset::with_names(xs, ys, vec!["x".into()], "y".into())
}

/// Sliding windows with stride 1 over a single series.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowSet {
    /// Flattened input windows, time-major (`input_len · channels` values).
    pub inputs: Vec<Vec<f64>>,
    /// The `horizon` future values of the target channel for each window.
    pub targets: Vec<Vec<f64>>,
    pub input_len: usize,
    pub horizon: usize,
}

impl WindowSet {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    /// One dataset per horizon step, each pairing every window with that step's target.
    pub fn per_step_datasets(&self) -> Result<Vec<Dataset>> {
        (0..self.horizon)
            .map(|h| {
                let y = self.targets.iter().map(|t| t[h]).collect();
                let mut ds = Dataset::new(self.inputs.clone(), y)?;
                ds.target_name = format!("t+{}", h + 1);
                Ok(ds)
            })
            .collect()
    }
}

pub fn make_windows(series: &[f64], input_len: usize, horizon: usize) -> Result<WindowSet> {
    let rows: Vec<Vec<f64>> = series.iter().map(|&v| vec![v]).collect();
    make_windows_multi(&rows, 0, input_len, horizon)
}

/// Multichannel variant: `series[t]` holds every channel at time `t`.
pub fn make_windows_multi(series: &[Vec<f64>], target_channel: usize, input_len: usize, horizon: usize) -> Result<WindowSet> {
    if input_len < 1 || horizon < 1 {
        return Err(invalid("input length and horizon must be positive"));
    }
    let len = series.len();
    if len < input_len + horizon {
        return Err(invalid(format!(
            "series of length {len} is shorter than input {input_len} + horizon {horizon}"
        )));
    }
    let channels = series[0].len();
    if target_channel >= channels || series.iter().any(|r| r.len() != channels) {
        return Err(invalid("series rows must share a channel count covering the target"));
    }
    let count = len - input_len - horizon + 1;
    let mut inputs = Vec::with_capacity(count);
    let mut targets = Vec::with_capacity(count);
    for start in 0..count {
        inputs.push(series[start..start + input_len].iter().flatten().copied().collect());
        targets.push(
            series[start + input_len..start + input_len + horizon]
                .iter()
                .map(|r| r[target_channel])
                .collect(),
        );
    }
    Ok(WindowSet {
        inputs,
        targets,
        input_len,
        horizon,
    })
}
