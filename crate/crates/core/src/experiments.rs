//! Reproduction harness: model rosters for the comparison tables, the k-means
//! rows, and the approximation-rate probe.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::baselines::{kmeans, map_clusters_to_labels, KMeansConfig};
use crate::dataio::{self, Dataset, NoncircularParams, SubspeciesParams};
use crate::error::{Error, Result};
use crate::network::{LayerKind, Model, NetworkSpec};
use crate::numkernel::Rng;
use crate::training::{fit, train, BatchSize, Loss, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Alnn,
    Dnn,
    Rqnn,
    Drqnn,
}

impl ModelKind {
    pub fn layer_kind(self) -> LayerKind {
        match self {
            ModelKind::Alnn | ModelKind::Dnn => LayerKind::Affine,
            ModelKind::Rqnn | ModelKind::Drqnn => LayerKind::RadialQuadratic,
        }
    }

    pub fn is_shallow(self) -> bool {
        matches!(self, ModelKind::Alnn | ModelKind::Rqnn)
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Alnn => "ALNN",
            ModelKind::Dnn => "DNN",
            ModelKind::Rqnn => "RQNN",
            ModelKind::Drqnn => "DRQNN",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "alnn" => Some(ModelKind::Alnn),
            "dnn" => Some(ModelKind::Dnn),
            "rqnn" => Some(ModelKind::Rqnn),
            "drqnn" => Some(ModelKind::Drqnn),
            _ => None,
        }
    }
}

/// Default hidden width of the shallow models.
pub const SHALLOW_WIDTH: usize = 8;

/// One network of a roster.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NetEntry {
    pub kind: ModelKind,
    pub depth: usize,
    /// `None` means the shallow default width.
    pub width: Option<usize>,
    pub epochs: usize,
}

impl NetEntry {
    pub fn shallow(kind: ModelKind, epochs: usize) -> Self {
        Self { kind, depth: 1, width: None, epochs }
    }

    pub fn deep(kind: ModelKind, depth: usize, width: usize, epochs: usize) -> Self {
        Self { kind, depth, width: Some(width), epochs }
    }

    pub fn spec(&self, input_dim: usize, shallow_width: usize) -> Result<NetworkSpec> {
        if self.kind.is_shallow() && self.depth != 1 {
            return Err(Error::Config(format!("{} is shallow: depth must be 1", self.kind.name())));
        }
        let width = self.width.unwrap_or(shallow_width);
        if width == 0 {
            return Err(Error::Config("width must be >= 1".into()));
        }
        NetworkSpec::classifier(self.kind.layer_kind(), input_dim, self.depth, width)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RosterEntry {
    Net(NetEntry),
    KMeans { k: usize },
}

/// One line of a comparison table. `None` renders as `-`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub model: String,
    pub epochs: Option<usize>,
    pub trainable_tensors: Option<usize>,
    pub depth: Option<usize>,
    pub width: Option<usize>,
    pub accuracy: f64,
}

fn dash(v: Option<usize>) -> String {
    v.map_or_else(|| "-".to_string(), |v| v.to_string())
}

/// Aligned plain-text table.
pub fn format_table(rows: &[ResultRow]) -> String {
    let header = ["Type", "Epochs", "Trainable weights", "Depth", "Width", "Accuracy"];
    let cells: Vec<[String; 6]> = rows
        .iter()
        .map(|r| {
            [
                r.model.clone(),
                dash(r.epochs),
                dash(r.trainable_tensors),
                dash(r.depth),
                dash(r.width),
                format!("{:.4}", r.accuracy),
            ]
        })
        .collect();
    let mut widths = header.map(str::len);
    for row in &cells {
        for (w, c) in widths.iter_mut().zip(row) {
            *w = (*w).max(c.len());
        }
    }
    let mut out = String::new();
    let line = |out: &mut String, items: &[&str]| {
        let padded: Vec<String> = items
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect();
        let _ = writeln!(out, "{}", padded.join(" | ").trim_end());
    };
    line(&mut out, &header);
    let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
    let _ = writeln!(out, "{}", rule.join("-+-"));
    for row in &cells {
        let refs: Vec<&str> = row.iter().map(String::as_str).collect();
        line(&mut out, &refs);
    }
    out
}

/// Tab-separated copy of the table for machine consumption.
pub fn table_tsv(rows: &[ResultRow]) -> String {
    let mut out = String::from("type\tepochs\ttrainable_tensors\tdepth\twidth\taccuracy\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}",
            r.model,
            dash(r.epochs),
            dash(r.trainable_tensors),
            dash(r.depth),
            dash(r.width),
            r.accuracy
        );
    }
    out
}

/// Training knobs shared by every network of a reproduction run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub seed: u64,
    pub shallow_width: usize,
    pub batch_size: BatchSize,
    pub lr: f64,
    pub init_std: f64,
    pub train_fraction: f64,
    pub kmeans_restarts: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            seed: 42,
            shallow_width: SHALLOW_WIDTH,
            batch_size: t.batch_size,
            lr: t.lr,
            init_std: t.init_std,
            train_fraction: 5.0 / 6.0,
            kmeans_restarts: 10,
        }
    }
}

impl RunOptions {
    pub fn train_config(&self, epochs: usize) -> TrainConfig {
        TrainConfig {
            epochs,
            batch_size: self.batch_size,
            lr: self.lr,
            init_std: self.init_std,
            seed: self.seed,
            shuffle: true,
            loss: Loss::BinaryCrossEntropy,
        }
    }
}

/// Trains one roster network and returns its row plus the trained model.
pub fn run_net(
    entry: &NetEntry,
    train_set: &Dataset<f64>,
    test_set: &Dataset<f64>,
    opts: &RunOptions,
) -> Result<(ResultRow, Model<f64>)> {
    let spec = entry.spec(train_set.dim(), opts.shallow_width)?;
    let (model, report) = train(&spec, train_set, &opts.train_config(entry.epochs), Some(test_set))?;
    let row = ResultRow {
        model: entry.kind.name().to_string(),
        epochs: Some(entry.epochs),
        trainable_tensors: Some(spec.hidden_tensor_count()),
        depth: Some(entry.depth),
        width: entry.width,
        accuracy: report.test_accuracy.expect("holdout supplied"),
    };
    Ok((row, model))
}

/// k-means on every point of `data` (labels unused), scored by majority-vote
/// cluster labels on the same points.
pub fn run_kmeans(k: usize, data: &Dataset<f64>, opts: &RunOptions) -> Result<ResultRow> {
    let points: Vec<Vec<f64>> = data.points().iter().map(|p| p.x.clone()).collect();
    let cfg = KMeansConfig {
        k,
        restarts: opts.kmeans_restarts,
        ..KMeansConfig::new(k)
    };
    let result = kmeans(&points, cfg, &mut Rng::new(opts.seed))?;
    let (_, accuracy) = map_clusters_to_labels(&result, &data.labels())?;
    Ok(ResultRow {
        model: format!("k-means ({k} clusters)"),
        epochs: None,
        trainable_tensors: None,
        depth: None,
        width: None,
        accuracy,
    })
}

/// Runs a roster on `data` split by `opts.train_fraction` (seeded by `opts.seed`).
pub fn run_roster(roster: &[RosterEntry], data: &Dataset<f64>, opts: &RunOptions) -> Result<Vec<ResultRow>> {
    let (train_set, test_set) = dataio::split(data, opts.train_fraction, opts.seed)?;
    roster
        .iter()
        .map(|entry| match entry {
            RosterEntry::Net(net) => run_net(net, &train_set, &test_set, opts).map(|(row, _)| row),
            RosterEntry::KMeans { k } => run_kmeans(*k, data, opts),
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Table {
    Subspecies,
    Noncircular,
    Digit8,
    Digit7,
}

impl Table {
    pub fn name(self) -> &'static str {
        match self {
            Table::Subspecies => "subspecies",
            Table::Noncircular => "noncircular",
            Table::Digit8 => "digit8",
            Table::Digit7 => "digit7",
        }
    }

    pub fn needs_embedding(self) -> bool {
        matches!(self, Table::Digit8 | Table::Digit7)
    }

    pub fn target_digit(self) -> Option<u8> {
        match self {
            Table::Digit8 => Some(8),
            Table::Digit7 => Some(7),
            _ => None,
        }
    }

    pub fn roster(self) -> Vec<RosterEntry> {
        use ModelKind::*;
        let net = RosterEntry::Net;
        match self {
            Table::Subspecies => vec![
                net(NetEntry::shallow(Rqnn, 10)),
                net(NetEntry::shallow(Alnn, 10)),
                net(NetEntry::deep(Dnn, 2, 5, 10)),
                RosterEntry::KMeans { k: 2 },
                RosterEntry::KMeans { k: 4 },
            ],
            Table::Noncircular => vec![
                net(NetEntry::shallow(Rqnn, 10)),
                net(NetEntry::shallow(Alnn, 10)),
                net(NetEntry::deep(Dnn, 2, 5, 10)),
            ],
            Table::Digit8 => vec![
                net(NetEntry::shallow(Rqnn, 10)),
                net(NetEntry::deep(Drqnn, 3, 5, 10)),
                net(NetEntry::deep(Drqnn, 3, 20, 30)),
                net(NetEntry::shallow(Alnn, 10)),
                net(NetEntry::deep(Dnn, 3, 5, 10)),
                net(NetEntry::deep(Dnn, 3, 20, 30)),
            ],
            Table::Digit7 => vec![
                net(NetEntry::shallow(Rqnn, 10)),
                net(NetEntry::deep(Drqnn, 3, 5, 10)),
                net(NetEntry::shallow(Alnn, 10)),
                net(NetEntry::deep(Dnn, 3, 5, 10)),
            ],
        }
    }
}

pub fn reproduce_subspecies(opts: &RunOptions) -> Result<Vec<ResultRow>> {
    let data = dataio::gen_subspecies(opts.seed, &SubspeciesParams::default())?;
    run_roster(&Table::Subspecies.roster(), &data, opts)
}

pub fn reproduce_noncircular(opts: &RunOptions) -> Result<Vec<ResultRow>> {
    let data = dataio::gen_noncircular(opts.seed, &NoncircularParams::default())?;
    run_roster(&Table::Noncircular.roster(), &data, opts)
}

/// Digit tables on a digit-labeled embedding (binarized against the table's
/// target digit).
pub fn reproduce_digits(table: Table, embedding: &Dataset<f64>, opts: &RunOptions) -> Result<Vec<ResultRow>> {
    let target = table
        .target_digit()
        .ok_or_else(|| Error::Config(format!("{} is not a digit table", table.name())))?;
    let data = dataio::binarize(embedding, target)?;
    run_roster(&table.roster(), &data, opts)
}

/// Target functions for the approximation-rate probe, defined on `[0, 1]²`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TargetFn {
    GaussianBump,
    TwoBumps,
}

impl TargetFn {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "gaussian-bump" => Some(TargetFn::GaussianBump),
            "two-bumps" => Some(TargetFn::TwoBumps),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            TargetFn::GaussianBump => "gaussian-bump",
            TargetFn::TwoBumps => "two-bumps",
        }
    }

    pub fn eval(self, x: f64, y: f64) -> f64 {
        let bump = |cx: f64, cy: f64, s: f64| {
            let r2 = (x - cx).powi(2) + (y - cy).powi(2);
            (-r2 / (2.0 * s * s)).exp()
        };
        match self {
            TargetFn::GaussianBump => bump(0.5, 0.5, 0.15),
            TargetFn::TwoBumps => bump(0.3, 0.35, 0.1) + 0.6 * bump(0.7, 0.65, 0.12),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApproxConfig {
    pub target: TargetFn,
    pub widths: Vec<usize>,
    /// Training grid is `train_grid × train_grid` cell centers.
    pub train_grid: usize,
    /// Error grid is `eval_grid × eval_grid` cell centers.
    pub eval_grid: usize,
    pub epochs: usize,
    pub lr: f64,
    pub init_std: f64,
    pub seed: u64,
}

impl Default for ApproxConfig {
    fn default() -> Self {
        Self {
            target: TargetFn::GaussianBump,
            widths: vec![4, 16, 64, 256],
            train_grid: 24,
            eval_grid: 50,
            epochs: 3000,
            lr: 0.01,
            init_std: 6.0,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApproxReport {
    /// `(width, L² error)` per width.
    pub errors: Vec<(usize, f64)>,
    /// Least-squares slope of `ln error` against `ln width`; needs two widths.
    pub slope: Option<f64>,
}

impl ApproxReport {
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("width\tl2_error\n");
        for (w, e) in &self.errors {
            let _ = writeln!(out, "{w}\t{e}");
        }
        match self.slope {
            Some(s) => {
                let _ = writeln!(out, "# slope\t{s}");
            }
            None => out.push_str("# slope\tunavailable\n"),
        }
        out
    }
}

fn grid_points(n: usize) -> Vec<[f64; 2]> {
    let h = 1.0 / n as f64;
    (0..n)
        .flat_map(|i| (0..n).map(move |j| [(i as f64 + 0.5) * h, (j as f64 + 0.5) * h]))
        .collect()
}

/// Least-squares slope of `ys` against `xs`.
pub fn fit_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() < 2 || xs.len() != ys.len() {
        return None;
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    Some(sxy / sxx)
}

/// Root-mean-square error on a uniform grid over the unit square, which
/// approximates the L² distance there.
pub fn l2_error(model: &Model<f64>, target: TargetFn, grid: usize) -> Result<f64> {
    let pts = grid_points(grid);
    let mut total = 0.0;
    for p in &pts {
        let d = model.evaluate(p)?[0] - target.eval(p[0], p[1]);
        total += d * d;
    }
    Ok((total / pts.len() as f64).sqrt())
}

/// Trains one shallow RQNN regressor per width with full-batch Adam on squared
/// error and reports the L² errors.
///
/// Hidden parameters start from `N(0, init_std²)`, which spreads the radial
/// features over the square; the output weights start at zero so every width
/// begins from the same (zero) function.
pub fn approx_rate(cfg: &ApproxConfig) -> Result<ApproxReport> {
    if cfg.widths.is_empty() {
        return Err(Error::Config("need at least one width".into()));
    }
    let pts = grid_points(cfg.train_grid);
    let inputs: Vec<&[f64]> = pts.iter().map(|p| p.as_slice()).collect();
    let targets: Vec<f64> = pts.iter().map(|p| cfg.target.eval(p[0], p[1])).collect();
    let train_cfg = TrainConfig {
        epochs: cfg.epochs,
        batch_size: BatchSize::Full,
        lr: cfg.lr,
        init_std: cfg.init_std,
        seed: cfg.seed,
        shuffle: false,
        loss: Loss::MeanSquared,
    };

    let mut errors = Vec::with_capacity(cfg.widths.len());
    for &width in &cfg.widths {
        let spec = NetworkSpec::regressor(LayerKind::RadialQuadratic, 2, 1, width)?;
        let mut master = Rng::new(cfg.seed);
        let mut model = Model::init(spec, &mut master.fork(), cfg.init_std)?;
        if let Some(head) = model.params_mut().last_mut() {
            head.weights.as_mut_slice().fill(0.0);
        }
        fit(&mut model, &inputs, &targets, &train_cfg, &mut master.fork())?;
        errors.push((width, l2_error(&model, cfg.target, cfg.eval_grid)?));
    }
    let xs: Vec<f64> = errors.iter().map(|(w, _)| (*w as f64).ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|(_, e)| e.ln()).collect();
    Ok(ApproxReport {
        slope: fit_slope(&xs, &ys),
        errors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_rendering() {
        let rows = vec![
            ResultRow {
                model: "RQNN".into(),
                epochs: Some(10),
                trainable_tensors: Some(3),
                depth: Some(1),
                width: None,
                accuracy: 1.0,
            },
            ResultRow {
                model: "k-means (2 clusters)".into(),
                epochs: None,
                trainable_tensors: None,
                depth: None,
                width: None,
                accuracy: 0.508,
            },
        ];
        let t = format_table(&rows);
        assert!(t.lines().next().unwrap().starts_with("Type"));
        assert!(t.contains("RQNN"));
        assert!(t.contains("1.0000"));
        let tsv = table_tsv(&rows);
        assert_eq!(tsv.lines().nth(2).unwrap(), "k-means (2 clusters)\t-\t-\t-\t-\t0.508");
    }

    #[test]
    fn rosters_match_tables() {
        assert_eq!(Table::Subspecies.roster().len(), 5);
        assert_eq!(Table::Digit8.roster().len(), 6);
        assert_eq!(Table::Digit7.roster().len(), 4);
        let RosterEntry::Net(dnn) = Table::Subspecies.roster()[2] else { panic!() };
        assert_eq!(dnn.spec(2, 8).unwrap().hidden_tensor_count(), 4);
    }

    #[test]
    fn shallow_depth_enforced() {
        let e = NetEntry { kind: ModelKind::Rqnn, depth: 2, width: Some(4), epochs: 1 };
        assert!(e.spec(2, 8).is_err());
    }

    #[test]
    fn slope_fit() {
        let xs = [1.0, 2.0, 3.0];
        assert!((fit_slope(&xs, &[2.0, 1.5, 1.0]).unwrap() + 0.5).abs() < 1e-15);
        assert_eq!(fit_slope(&[1.0], &[1.0]), None);
    }

    #[test]
    fn single_width_has_no_slope() {
        let cfg = ApproxConfig { widths: vec![4], epochs: 5, train_grid: 6, eval_grid: 6, ..Default::default() };
        let r = approx_rate(&cfg).unwrap();
        assert_eq!(r.errors.len(), 1);
        assert_eq!(r.slope, None);
        assert!(r.to_tsv().contains("unavailable"));
    }
}
