//! `rqnn` command-line front end.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use serde::{Deserialize, Serialize};

use rqnn::baselines::{assignment_table, kmeans, map_clusters_to_labels, KMeansConfig};
use rqnn::dataio::{
    self, BoundingBox, Dataset, LabelKind, NoncircularParams, SubspeciesParams,
};
use rqnn::experiments::{
    self, format_table, table_tsv, ApproxConfig, ModelKind, NetEntry, ResultRow, RunOptions, Table,
    TargetFn, SHALLOW_WIDTH,
};
use rqnn::modelfile;
use rqnn::network::{Model, NetworkSpec};
use rqnn::training::{self, BatchSize, TrainConfig};
use rqnn::{DatasetF64, Error, Rng};

const EXIT_FAILURE: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_IO: u8 = 3;
const EXIT_DIVERGED: u8 = 4;

const DEFAULT_SEED: u64 = 42;
const DEFAULT_PER_DIGIT: usize = 1000;

#[derive(Parser, Debug)]
#[command(name = "rqnn", version, about = "Radial-quadratic neural networks: data, training and experiments")]
struct Cli {
    /// Base directory for run directories.
    #[arg(long, global = true, default_value = "runs")]
    out_dir: PathBuf,

    /// More log output on stderr (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic dataset as CSV plus a metadata file.
    GenData(GenDataArgs),
    /// Train a classifier on a labeled CSV.
    Train(TrainArgs),
    /// Apply a trained model to a labeled CSV.
    Predict(PredictArgs),
    /// k-means baseline with majority-vote cluster labels.
    Kmeans(KmeansArgs),
    /// Rasterize a model's output probability to a PGM image.
    Boundary(BoundaryArgs),
    /// Fit shallow RQNN regressors of growing width to a smooth target.
    ApproxRate(ApproxArgs),
    /// Run one of the comparison tables.
    Reproduce(ReproduceArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Generator {
    Subspecies,
    Noncircular,
    /// Synthetic stand-in for a 2-D digit embedding (`x1,x2,digit`).
    Embedding,
}

#[derive(Args, Debug)]
struct GenDataArgs {
    #[arg(value_enum)]
    generator: Generator,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Total number of points.
    #[arg(long)]
    n: Option<usize>,
    /// Share of the target class.
    #[arg(long)]
    fraction: Option<f64>,
    /// Disk radius (subspecies).
    #[arg(long)]
    radius: Option<f64>,
    /// Center of the target region, `x,y`.
    #[arg(long, value_parser = parse_pair)]
    center: Option<(f64, f64)>,
    /// Half side length of the population square.
    #[arg(long)]
    box_halfwidth: Option<f64>,
    /// Band half extent along x (noncircular).
    #[arg(long)]
    half_length: Option<f64>,
    /// Band half extent along y (noncircular).
    #[arg(long)]
    half_width: Option<f64>,
    /// Points per digit (embedding).
    #[arg(long)]
    per_digit: Option<usize>,
    /// CSV path; defaults to `data.csv` in the run directory.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum KindArg {
    Rqnn,
    Alnn,
    Dnn,
    Drqnn,
}

impl From<KindArg> for ModelKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Rqnn => ModelKind::Rqnn,
            KindArg::Alnn => ModelKind::Alnn,
            KindArg::Dnn => ModelKind::Dnn,
            KindArg::Drqnn => ModelKind::Drqnn,
        }
    }
}

#[derive(Args, Debug, Default)]
struct TrainArgs {
    /// TOML file with any of the options below (flags take precedence). It
    /// may also carry an architecture as `[[layer]]` records.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Training CSV (`x1,x2,label` or `x1,x2,digit`).
    #[arg(long)]
    data: Option<PathBuf>,
    /// Digit treated as the positive class when the CSV holds digits.
    #[arg(long)]
    target_digit: Option<u8>,
    /// Separate test CSV.
    #[arg(long, conflicts_with = "holdout")]
    test: Option<PathBuf>,
    /// Hold out this share of the data as a test split.
    #[arg(long)]
    holdout: Option<f64>,
    #[arg(long, value_enum)]
    model: Option<KindArg>,
    /// Hidden layers (1 for the shallow kinds).
    #[arg(long)]
    depth: Option<usize>,
    /// Neurons per hidden layer.
    #[arg(long)]
    width: Option<usize>,
    /// Architecture document; overrides model/depth/width.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Mini-batch size or `full`.
    #[arg(long, value_parser = parse_batch)]
    batch_size: Option<BatchSize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    init_std: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    target_digit: Option<u8>,
}

#[derive(Args, Debug)]
struct KmeansArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 2)]
    k: usize,
    #[arg(long, default_value_t = 10)]
    restarts: usize,
    #[arg(long, default_value_t = 300)]
    max_iter: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Score against `digit == target` instead of the raw labels.
    #[arg(long)]
    target_digit: Option<u8>,
}

#[derive(Args, Debug)]
struct BoundaryArgs {
    #[arg(long)]
    model: PathBuf,
    /// Grid size `NXxNY`.
    #[arg(long, value_parser = parse_resolution, default_value = "200x200")]
    resolution: (usize, usize),
    /// Plot window `xmin,xmax,ymin,ymax`.
    #[arg(long, value_parser = parse_bbox, conflicts_with = "data")]
    bbox: Option<BoundingBox>,
    /// Fit the window around this CSV's points.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Padding added around `--data`.
    #[arg(long, default_value_t = 0.5)]
    margin: f64,
    /// Also write the raw probabilities as a text grid.
    #[arg(long)]
    text_grid: bool,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum TargetArg {
    GaussianBump,
    TwoBumps,
}

#[derive(Args, Debug)]
struct ApproxArgs {
    #[arg(long, value_enum, default_value = "gaussian-bump")]
    target: TargetArg,
    /// Comma-separated hidden widths.
    #[arg(long, value_delimiter = ',')]
    widths: Option<Vec<usize>>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    init_std: Option<f64>,
    #[arg(long)]
    train_grid: Option<usize>,
    #[arg(long)]
    eval_grid: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum TableArg {
    Subspecies,
    Noncircular,
    Digit8,
    Digit7,
}

impl From<TableArg> for Table {
    fn from(t: TableArg) -> Self {
        match t {
            TableArg::Subspecies => Table::Subspecies,
            TableArg::Noncircular => Table::Noncircular,
            TableArg::Digit8 => Table::Digit8,
            TableArg::Digit7 => Table::Digit7,
        }
    }
}

#[derive(Args, Debug)]
struct ReproduceArgs {
    #[arg(value_enum)]
    table: TableArg,
    /// Digit embedding CSV (`x1,x2,digit`), required for the digit tables.
    #[arg(long)]
    embedding: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Hidden width of the shallow RQNN and ALNN.
    #[arg(long, default_value_t = SHALLOW_WIDTH)]
    shallow_width: usize,
    #[arg(long, value_parser = parse_batch)]
    batch_size: Option<BatchSize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    init_std: Option<f64>,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => EXIT_USAGE,
            Failure::Lib(Error::Io { .. }) => EXIT_IO,
            Failure::Lib(Error::Divergence { .. }) => EXIT_DIVERGED,
            Failure::Lib(Error::Config(_) | Error::Parameter(_)) => EXIT_USAGE,
            Failure::Lib(_) => EXIT_FAILURE,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Usage(m) => write!(f, "{m}"),
            Failure::Lib(e) => write!(f, "{e}"),
        }
    }
}

type CmdResult = std::result::Result<(), Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn parse_pair(s: &str) -> std::result::Result<(f64, f64), String> {
    let v = parse_floats(s, 2)?;
    Ok((v[0], v[1]))
}

fn parse_bbox(s: &str) -> std::result::Result<BoundingBox, String> {
    let v = parse_floats(s, 4)?;
    BoundingBox::new(v[0], v[1], v[2], v[3]).map_err(|e| e.to_string())
}

fn parse_floats(s: &str, n: usize) -> std::result::Result<Vec<f64>, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("`{t}`: {e}")))
        .collect::<std::result::Result<_, _>>()?;
    if v.len() != n {
        return Err(format!("expected {n} comma-separated numbers, got {}", v.len()));
    }
    Ok(v)
}

fn parse_resolution(s: &str) -> std::result::Result<(usize, usize), String> {
    let (a, b) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected NXxNY, got `{s}`"))?;
    let nx = a.trim().parse().map_err(|e| format!("`{a}`: {e}"))?;
    let ny = b.trim().parse().map_err(|e| format!("`{b}`: {e}"))?;
    Ok((nx, ny))
}

fn parse_batch(s: &str) -> std::result::Result<BatchSize, String> {
    if s.eq_ignore_ascii_case("full") {
        return Ok(BatchSize::Full);
    }
    s.parse::<usize>()
        .map(BatchSize::Size)
        .map_err(|_| format!("expected a positive integer or `full`, got `{s}`"))
}

fn run_dir(base: &Path, name: &str, seed: Option<u64>) -> std::result::Result<PathBuf, Failure> {
    let dir = match seed {
        Some(s) => base.join(format!("{name}-seed{s}")),
        None => base.join(name),
    };
    fs::create_dir_all(&dir).map_err(|e| io_failure(&dir, e))?;
    Ok(dir)
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure::Lib(Error::Io {
        path: path.display().to_string(),
        source: e,
    })
}

fn write_file(path: &Path, text: &str) -> CmdResult {
    fs::write(path, text).map_err(|e| io_failure(path, e))?;
    info!("wrote {}", path.display());
    Ok(())
}

fn require_file(path: &Path, what: &str) -> CmdResult {
    if path.is_file() {
        Ok(())
    } else {
        Err(usage(format!("{what} `{}` does not exist", path.display())))
    }
}

/// Loads a CSV and applies the digit target, if any.
fn load_dataset(path: &Path, target_digit: Option<u8>) -> std::result::Result<DatasetF64, Failure> {
    require_file(path, "dataset")?;
    let data: DatasetF64 = dataio::load_labeled_csv(path)?;
    match (data.kind(), target_digit) {
        (LabelKind::Digit, Some(d)) => Ok(dataio::binarize(&data, d)?),
        (LabelKind::Binary, Some(_)) => Err(usage(format!(
            "`{}` already has binary labels; drop --target-digit",
            path.display()
        ))),
        _ => Ok(data),
    }
}

fn require_binary(data: &Dataset<f64>, path: &Path) -> CmdResult {
    if data.kind() == LabelKind::Digit {
        return Err(usage(format!(
            "`{}` holds digit labels; pass --target-digit",
            path.display()
        )));
    }
    Ok(())
}

fn cmd_gen_data(out_dir: &Path, a: &GenDataArgs) -> CmdResult {
    let reject = |name: &str, given: bool| {
        if given {
            Err(usage(format!("--{name} does not apply to the {:?} generator", a.generator)))
        } else {
            Ok(())
        }
    };
    let mut meta = toml::Table::new();
    meta.insert("seed".into(), toml::Value::Integer(a.seed as i64));
    let data: DatasetF64 = match a.generator {
        Generator::Subspecies => {
            reject("half-length", a.half_length.is_some())?;
            reject("half-width", a.half_width.is_some())?;
            reject("per-digit", a.per_digit.is_some())?;
            let d = SubspeciesParams::default();
            let p = SubspeciesParams {
                n_total: a.n.unwrap_or(d.n_total),
                center: a.center.map_or(d.center, |(x, y)| [x, y]),
                radius: a.radius.unwrap_or(d.radius),
                box_halfwidth: a.box_halfwidth.unwrap_or(d.box_halfwidth),
                fraction: a.fraction.unwrap_or(d.fraction),
            };
            meta.insert("generator".into(), "subspecies".into());
            meta.insert("n_total".into(), toml::Value::Integer(p.n_total as i64));
            meta.insert("center".into(), toml::Value::Array(vec![p.center[0].into(), p.center[1].into()]));
            meta.insert("radius".into(), p.radius.into());
            meta.insert("box_halfwidth".into(), p.box_halfwidth.into());
            meta.insert("fraction".into(), p.fraction.into());
            dataio::gen_subspecies(a.seed, &p)?
        }
        Generator::Noncircular => {
            reject("radius", a.radius.is_some())?;
            reject("per-digit", a.per_digit.is_some())?;
            let d = NoncircularParams::default();
            let p = NoncircularParams {
                n_total: a.n.unwrap_or(d.n_total),
                center: a.center.map_or(d.center, |(x, y)| [x, y]),
                half_length: a.half_length.unwrap_or(d.half_length),
                half_width: a.half_width.unwrap_or(d.half_width),
                box_halfwidth: a.box_halfwidth.unwrap_or(d.box_halfwidth),
                fraction: a.fraction.unwrap_or(d.fraction),
            };
            meta.insert("generator".into(), "noncircular".into());
            meta.insert("n_total".into(), toml::Value::Integer(p.n_total as i64));
            meta.insert("center".into(), toml::Value::Array(vec![p.center[0].into(), p.center[1].into()]));
            meta.insert("half_length".into(), p.half_length.into());
            meta.insert("half_width".into(), p.half_width.into());
            meta.insert("box_halfwidth".into(), p.box_halfwidth.into());
            meta.insert("fraction".into(), p.fraction.into());
            dataio::gen_noncircular(a.seed, &p)?
        }
        Generator::Embedding => {
            for (name, given) in [
                ("n", a.n.is_some()),
                ("fraction", a.fraction.is_some()),
                ("radius", a.radius.is_some()),
                ("center", a.center.is_some()),
                ("box-halfwidth", a.box_halfwidth.is_some()),
                ("half-length", a.half_length.is_some()),
                ("half-width", a.half_width.is_some()),
            ] {
                reject(name, given)?;
            }
            let per_digit = a.per_digit.unwrap_or(DEFAULT_PER_DIGIT);
            meta.insert("generator".into(), "embedding".into());
            meta.insert("per_digit".into(), toml::Value::Integer(per_digit as i64));
            meta.insert("synthetic".into(), true.into());
            dataio::gen_digit_embedding(a.seed, per_digit)?
        }
    };

    let csv_path = match &a.output {
        Some(p) => {
            if let Some(parent) = p.parent().filter(|p| !p.as_os_str().is_empty()) {
                fs::create_dir_all(parent).map_err(|e| io_failure(parent, e))?;
            }
            p.clone()
        }
        None => run_dir(out_dir, "gen-data", Some(a.seed))?.join("data.csv"),
    };
    dataio::save_labeled_csv(&data, &csv_path)?;
    let meta_text = toml::to_string(&meta).map_err(|e| Error::Format(e.to_string()))?;
    write_file(&csv_path.with_extension("meta.toml"), &meta_text)?;
    println!("wrote {} points to {}", data.len(), csv_path.display());
    Ok(())
}

/// Options a `train` config file may set.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrainFile {
    data: Option<PathBuf>,
    target_digit: Option<u8>,
    test: Option<PathBuf>,
    holdout: Option<f64>,
    model: Option<KindArg>,
    depth: Option<usize>,
    width: Option<usize>,
    spec: Option<PathBuf>,
    epochs: Option<usize>,
    batch_size: Option<toml::Value>,
    lr: Option<f64>,
    init_std: Option<f64>,
    seed: Option<u64>,
}

/// Splits a config document into its option table and an optional embedded
/// architecture.
fn read_train_config(path: &Path) -> std::result::Result<(TrainFile, Option<NetworkSpec>), Failure> {
    require_file(path, "config file")?;
    let text = fs::read_to_string(path).map_err(|e| io_failure(path, e))?;
    let mut table: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| usage(format!("{}: {e}", path.display())))?;
    let mut arch = toml::Table::new();
    for key in ["format", "version", "layer"] {
        if let Some(v) = table.remove(key) {
            arch.insert(key.into(), v);
        }
    }
    let spec = if arch.is_empty() {
        None
    } else {
        let doc = toml::to_string(&arch).map_err(|e| Error::Format(e.to_string()))?;
        Some(modelfile::spec_from_str(&doc)?)
    };
    let file: TrainFile = table
        .try_into()
        .map_err(|e: toml::de::Error| usage(format!("{}: {e}", path.display())))?;
    Ok((file, spec))
}

fn batch_from_toml(v: &toml::Value) -> std::result::Result<BatchSize, Failure> {
    match v {
        toml::Value::Integer(n) if *n >= 1 => Ok(BatchSize::Size(*n as usize)),
        toml::Value::String(s) => parse_batch(s).map_err(usage),
        other => Err(usage(format!("batch_size must be a positive integer or \"full\", got {other}"))),
    }
}

/// Effective settings of a training run, written next to the model.
#[derive(Debug, Serialize)]
struct ResolvedTrain {
    data: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    target_digit: Option<u8>,
    #[serde(skip_serializing_if = "Option::is_none")]
    test: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    holdout: Option<f64>,
    epochs: usize,
    batch_size: String,
    lr: f64,
    init_std: f64,
    seed: u64,
}

fn cmd_train(out_dir: &Path, a: &TrainArgs) -> CmdResult {
    let (file, file_spec) = match &a.config {
        Some(p) => read_train_config(p)?,
        None => (TrainFile::default(), None),
    };
    let data_path = a
        .data
        .clone()
        .or(file.data)
        .ok_or_else(|| usage("no training data: pass --data or set `data` in the config"))?;
    let target_digit = a.target_digit.or(file.target_digit);
    let test_path = a.test.clone().or(file.test);
    let holdout = if test_path.is_some() { None } else { a.holdout.or(file.holdout) };
    let defaults = TrainConfig::default();
    let batch_size = match (a.batch_size, &file.batch_size) {
        (Some(b), _) => b,
        (None, Some(v)) => batch_from_toml(v)?,
        (None, None) => defaults.batch_size,
    };
    let cfg = TrainConfig {
        epochs: a.epochs.or(file.epochs).unwrap_or(defaults.epochs),
        batch_size,
        lr: a.lr.or(file.lr).unwrap_or(defaults.lr),
        init_std: a.init_std.or(file.init_std).unwrap_or(defaults.init_std),
        seed: a.seed.or(file.seed).unwrap_or(DEFAULT_SEED),
        ..defaults
    };

    let data = load_dataset(&data_path, target_digit)?;
    require_binary(&data, &data_path)?;
    let (train_set, test_set) = match (&test_path, holdout) {
        (Some(p), _) => {
            let t = load_dataset(p, target_digit)?;
            require_binary(&t, p)?;
            (data, Some(t))
        }
        (None, Some(h)) => {
            if !(h > 0.0 && h < 1.0) {
                return Err(usage(format!("--holdout must lie in (0, 1), got {h}")));
            }
            let (tr, te) = dataio::split(&data, 1.0 - h, cfg.seed)?;
            (tr, Some(te))
        }
        (None, None) => (data, None),
    };

    let spec_path = a.spec.clone().or(file.spec);
    let spec = if let Some(p) = spec_path {
        require_file(&p, "architecture file")?;
        modelfile::load_spec(&p)?
    } else if let (Some(s), None, None, None) = (&file_spec, a.model, a.depth, a.width) {
        s.clone()
    } else {
        let kind: ModelKind = a.model.or(file.model).unwrap_or(KindArg::Rqnn).into();
        let shallow = kind.is_shallow();
        let entry = NetEntry {
            kind,
            depth: a.depth.or(file.depth).unwrap_or(if shallow { 1 } else { 2 }),
            width: Some(a.width.or(file.width).unwrap_or(if shallow { SHALLOW_WIDTH } else { 5 })),
            epochs: cfg.epochs,
        };
        entry.spec(train_set.dim(), SHALLOW_WIDTH)?
    };
    if spec.input_dim() != train_set.dim() || spec.output_dim() != 1 {
        return Err(usage(format!(
            "architecture maps {} -> {} but the data needs {} -> 1",
            spec.input_dim(),
            spec.output_dim(),
            train_set.dim()
        )));
    }

    let dir = run_dir(out_dir, "train", Some(cfg.seed))?;
    let start = Instant::now();
    let (model, report) = training::train(&spec, &train_set, &cfg, test_set.as_ref())?;
    info!("trained in {:.2?} ({} steps)", start.elapsed(), report.steps);

    modelfile::save_model(&model, &dir.join("model.toml"))?;
    write_file(&dir.join("loss.tsv"), &report.loss_table())?;
    let resolved = ResolvedTrain {
        data: data_path.display().to_string(),
        target_digit,
        test: test_path.map(|p| p.display().to_string()),
        holdout,
        epochs: cfg.epochs,
        batch_size: match cfg.batch_size {
            BatchSize::Size(b) => b.to_string(),
            BatchSize::Full => "full".into(),
        },
        lr: cfg.lr,
        init_std: cfg.init_std,
        seed: cfg.seed,
    };
    let text = toml::to_string(&resolved).map_err(|e| Error::Format(e.to_string()))?;
    write_file(&dir.join("config.toml"), &text)?;

    let last = report.epoch_loss.last().copied().unwrap_or(f64::NAN);
    println!("final training loss: {last}");
    if let Some(acc) = report.test_accuracy {
        println!("test accuracy: {acc:.4}");
        write_file(&dir.join("accuracy.txt"), &format!("{acc}\n"))?;
    }
    println!("model written to {}", dir.join("model.toml").display());
    Ok(())
}

fn load_model(path: &Path) -> std::result::Result<Model<f64>, Failure> {
    require_file(path, "model file")?;
    Ok(modelfile::load_model(path)?)
}

fn cmd_predict(out_dir: &Path, a: &PredictArgs) -> CmdResult {
    let model = load_model(&a.model)?;
    let data = load_dataset(&a.data, a.target_digit)?;
    if model.spec().input_dim() != data.dim() {
        return Err(usage(format!(
            "model expects {} inputs, data has {}",
            model.spec().input_dim(),
            data.dim()
        )));
    }
    let mut out = String::new();
    let header: Vec<String> = (1..=data.dim()).map(|i| format!("x{i}")).collect();
    let _ = writeln!(out, "{},probability,label", header.join(","));
    let mut correct = 0usize;
    for p in data.points() {
        let (prob, label) = training::predict(&model, &p.x)?;
        correct += usize::from(label == p.label);
        let xs: Vec<String> = p.x.iter().map(|v| v.to_string()).collect();
        let _ = writeln!(out, "{},{prob},{label}", xs.join(","));
    }
    let dir = run_dir(out_dir, "predict", None)?;
    write_file(&dir.join("predictions.csv"), &out)?;
    if data.kind() == LabelKind::Binary {
        println!("accuracy: {:.4}", correct as f64 / data.len() as f64);
    }
    println!("predictions written to {}", dir.join("predictions.csv").display());
    Ok(())
}

fn cmd_kmeans(out_dir: &Path, a: &KmeansArgs) -> CmdResult {
    let data = load_dataset(&a.data, a.target_digit)?;
    if a.k == 0 || a.k > data.len() {
        return Err(usage(format!("k must lie in 1..={}, got {}", data.len(), a.k)));
    }
    if a.restarts == 0 || a.max_iter == 0 {
        return Err(usage("--restarts and --max-iter must be at least 1"));
    }
    let points: Vec<Vec<f64>> = data.points().iter().map(|p| p.x.clone()).collect();
    let cfg = KMeansConfig {
        k: a.k,
        restarts: a.restarts,
        max_iter: a.max_iter,
    };
    let result = kmeans(&points, cfg, &mut Rng::new(a.seed))?;
    let (mapping, accuracy) = map_clusters_to_labels(&result, &data.labels())?;

    let dir = run_dir(out_dir, "kmeans", Some(a.seed))?;
    write_file(&dir.join("assignments.tsv"), &assignment_table(&result, &mapping))?;
    let mut cent = String::from("cluster\tmapped_label\tcentroid\n");
    for (c, (centroid, label)) in result.centroids.iter().zip(&mapping).enumerate() {
        let xs: Vec<String> = centroid.iter().map(|v| v.to_string()).collect();
        let _ = writeln!(cent, "{c}\t{label}\t{}", xs.join(","));
    }
    write_file(&dir.join("centroids.tsv"), &cent)?;
    let row = ResultRow {
        model: format!("k-means ({} clusters)", a.k),
        epochs: None,
        trainable_tensors: None,
        depth: None,
        width: None,
        accuracy,
    };
    write_file(&dir.join("result.tsv"), &table_tsv(std::slice::from_ref(&row)))?;
    print!("{}", format_table(&[row]));
    println!("inertia: {} after {} iterations", result.inertia, result.iterations);
    Ok(())
}

fn cmd_boundary(out_dir: &Path, a: &BoundaryArgs) -> CmdResult {
    let model = load_model(&a.model)?;
    let bbox = match (&a.bbox, &a.data) {
        (Some(b), _) => *b,
        (None, Some(p)) => {
            require_file(p, "dataset")?;
            let data: DatasetF64 = dataio::load_labeled_csv(p)?;
            BoundingBox::around(&data, a.margin)?
        }
        (None, None) => BoundingBox::new(-3.0, 3.0, -3.0, 3.0)?,
    };
    let grid = dataio::boundary_raster(&model, bbox, a.resolution)?;
    let dir = run_dir(out_dir, "boundary", None)?;
    write_file(&dir.join("boundary.pgm"), &grid.to_pgm())?;
    write_file(&dir.join("boundary.txt"), &grid.sidecar())?;
    if a.text_grid {
        write_file(&dir.join("grid.txt"), &grid.to_text_grid())?;
    }
    println!("raster written to {}", dir.join("boundary.pgm").display());
    Ok(())
}

fn cmd_approx_rate(out_dir: &Path, a: &ApproxArgs) -> CmdResult {
    let d = ApproxConfig::default();
    let cfg = ApproxConfig {
        target: match a.target {
            TargetArg::GaussianBump => TargetFn::GaussianBump,
            TargetArg::TwoBumps => TargetFn::TwoBumps,
        },
        widths: a.widths.clone().unwrap_or(d.widths),
        train_grid: a.train_grid.unwrap_or(d.train_grid),
        eval_grid: a.eval_grid.unwrap_or(d.eval_grid),
        epochs: a.epochs.unwrap_or(d.epochs),
        lr: a.lr.unwrap_or(d.lr),
        init_std: a.init_std.unwrap_or(d.init_std),
        seed: a.seed.unwrap_or(d.seed),
    };
    if cfg.widths.contains(&0) {
        return Err(usage("widths must be at least 1"));
    }
    if cfg.train_grid == 0 || cfg.eval_grid == 0 {
        return Err(usage("grid sizes must be at least 1"));
    }
    let start = Instant::now();
    let report = experiments::approx_rate(&cfg)?;
    info!("approximation probe took {:.2?}", start.elapsed());
    let dir = run_dir(out_dir, "approx-rate", Some(cfg.seed))?;
    let tsv = report.to_tsv();
    write_file(&dir.join("errors.tsv"), &tsv)?;
    println!("target: {}", cfg.target.name());
    print!("{tsv}");
    Ok(())
}

fn cmd_reproduce(out_dir: &Path, a: &ReproduceArgs) -> CmdResult {
    let table: Table = a.table.into();
    let d = RunOptions::default();
    let opts = RunOptions {
        seed: a.seed,
        shallow_width: a.shallow_width,
        batch_size: a.batch_size.unwrap_or(d.batch_size),
        lr: a.lr.unwrap_or(d.lr),
        init_std: a.init_std.unwrap_or(d.init_std),
        ..d
    };
    let start = Instant::now();
    let rows = match table {
        Table::Subspecies => experiments::reproduce_subspecies(&opts)?,
        Table::Noncircular => experiments::reproduce_noncircular(&opts)?,
        Table::Digit8 | Table::Digit7 => {
            let path = a.embedding.as_ref().ok_or_else(|| {
                usage(format!(
                    "the {} table needs a digit embedding: pass --embedding <x1,x2,digit CSV>",
                    table.name()
                ))
            })?;
            require_file(path, "embedding")?;
            let embedding: DatasetF64 = dataio::load_labeled_csv(path)?;
            if embedding.kind() != LabelKind::Digit {
                return Err(usage(format!("`{}` must have a `digit` column", path.display())));
            }
            experiments::reproduce_digits(table, &embedding, &opts)?
        }
    };
    info!("{} table took {:.2?}", table.name(), start.elapsed());
    let dir = run_dir(out_dir, &format!("reproduce-{}", table.name()), Some(a.seed))?;
    let text = format_table(&rows);
    write_file(&dir.join("table.txt"), &text)?;
    write_file(&dir.join("table.tsv"), &table_tsv(&rows))?;
    print!("{text}");
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .init();

    let out = cli.out_dir.as_path();
    let result = match &cli.command {
        Command::GenData(a) => cmd_gen_data(out, a),
        Command::Train(a) => cmd_train(out, a),
        Command::Predict(a) => cmd_predict(out, a),
        Command::Kmeans(a) => cmd_kmeans(out, a),
        Command::Boundary(a) => cmd_boundary(out, a),
        Command::ApproxRate(a) => cmd_approx_rate(out, a),
        Command::Reproduce(a) => cmd_reproduce(out, a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
