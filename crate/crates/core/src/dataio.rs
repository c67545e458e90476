//! Labeled 2D datasets: synthetic generators, CSV ingestion, train/test
//! splitting and decision-region rasters.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::network::Model;
use crate::numkernel::{Rng, Scalar};

/// Label value of the target class ("species 1" / target digit).
pub const POSITIVE: u8 = 1;
/// Label value of everything else.
pub const NEGATIVE: u8 = 0;

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPoint<T> {
    pub x: Vec<T>,
    pub label: u8,
}

/// What the `label` column of a dataset means.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelKind {
    /// `{0, 1}`.
    Binary,
    /// Raw digit class `0..=9`, see [`binarize`].
    Digit,
}

impl LabelKind {
    fn column(self) -> &'static str {
        match self {
            LabelKind::Binary => "label",
            LabelKind::Digit => "digit",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    points: Vec<LabeledPoint<T>>,
    dim: usize,
    kind: LabelKind,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(points: Vec<LabeledPoint<T>>, kind: LabelKind) -> Result<Self> {
        let dim = points.first().map_or(0, |p| p.x.len());
        for (i, p) in points.iter().enumerate() {
            if p.x.len() != dim {
                return Err(Error::Input(format!(
                    "point {i} has dimension {}, expected {dim}",
                    p.x.len()
                )));
            }
            if p.x.iter().any(|v| !v.is_finite()) {
                return Err(Error::Input(format!("point {i} has a non-finite coordinate")));
            }
            let max = match kind {
                LabelKind::Binary => 1,
                LabelKind::Digit => 9,
            };
            if p.label > max {
                return Err(Error::Input(format!("point {i} has label {} > {max}", p.label)));
            }
        }
        Ok(Self { points, dim, kind })
    }

    pub fn points(&self) -> &[LabeledPoint<T>] {
        &self.points
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> LabelKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn count_label(&self, label: u8) -> usize {
        self.points.iter().filter(|p| p.label == label).count()
    }

    pub fn labels(&self) -> Vec<u8> {
        self.points.iter().map(|p| p.label).collect()
    }

    pub fn inputs(&self) -> Vec<&[T]> {
        self.points.iter().map(|p| p.x.as_slice()).collect()
    }

    fn select(&self, idx: &[usize]) -> Self {
        Self {
            points: idx.iter().map(|&i| self.points[i].clone()).collect(),
            dim: self.dim,
            kind: self.kind,
        }
    }
}

/// Disk-shaped subspecies inside a square population.
#[derive(Debug, Clone, PartialEq)]
pub struct SubspeciesParams {
    pub n_total: usize,
    pub center: [f64; 2],
    pub radius: f64,
    pub box_halfwidth: f64,
    pub fraction: f64,
}

impl Default for SubspeciesParams {
    fn default() -> Self {
        Self {
            n_total: 6000,
            center: [0.0, 0.0],
            radius: 1.0,
            box_halfwidth: 3.0,
            fraction: 0.15,
        }
    }
}

fn check_common(n_total: usize, fraction: f64, box_halfwidth: f64) -> Result<()> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Parameter(format!("fraction must lie in (0, 1), got {fraction}")));
    }
    if !(box_halfwidth > 0.0 && box_halfwidth.is_finite()) {
        return Err(Error::Parameter(format!("box half-width must be positive, got {box_halfwidth}")));
    }
    if n_total < 2 {
        return Err(Error::Parameter("need at least 2 points".into()));
    }
    Ok(())
}

fn class_sizes(n_total: usize, fraction: f64) -> (usize, usize) {
    let positive = (n_total as f64 * fraction).round() as usize;
    (positive, n_total - positive)
}

/// Draws a point uniformly from the box `[-h, h]²` that is rejected by `inside`.
fn sample_outside<F: Fn(f64, f64) -> bool>(rng: &mut Rng, h: f64, inside: F) -> [f64; 2] {
    loop {
        let x = rng.uniform_in(-h, h);
        let y = rng.uniform_in(-h, h);
        if !inside(x, y) {
            return [x, y];
        }
    }
}

fn assemble<T: Scalar>(rng: &mut Rng, mut raw: Vec<([f64; 2], u8)>) -> Result<Dataset<T>> {
    rng.shuffle(&mut raw);
    let points = raw
        .into_iter()
        .map(|(p, label)| LabeledPoint {
            x: vec![T::lit(p[0]), T::lit(p[1])],
            label,
        })
        .collect();
    Dataset::new(points, LabelKind::Binary)
}

/// `round(n·fraction)` points uniform in the disk (label 1), the rest uniform
/// in the box minus the disk (label 0), in shuffled order.
pub fn gen_subspecies<T: Scalar>(seed: u64, params: &SubspeciesParams) -> Result<Dataset<T>> {
    let SubspeciesParams {
        n_total,
        center,
        radius,
        box_halfwidth: h,
        fraction,
    } = *params;
    check_common(n_total, fraction, h)?;
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::Parameter(format!("radius must be positive, got {radius}")));
    }
    if center.iter().any(|c| c.abs() + radius > h) {
        return Err(Error::Parameter("disk does not fit inside the box".into()));
    }

    let (n_pos, n_neg) = class_sizes(n_total, fraction);
    let mut rng = Rng::new(seed);
    let mut raw = Vec::with_capacity(n_total);
    for _ in 0..n_pos {
        let r = radius * rng.uniform().sqrt();
        let phi = 2.0 * std::f64::consts::PI * rng.uniform();
        raw.push(([center[0] + r * phi.cos(), center[1] + r * phi.sin()], POSITIVE));
    }
    let r2 = radius * radius;
    for _ in 0..n_neg {
        let p = sample_outside(&mut rng, h, |x, y| {
            let (dx, dy) = (x - center[0], y - center[1]);
            dx * dx + dy * dy <= r2
        });
        raw.push((p, NEGATIVE));
    }
    assemble(&mut rng, raw)
}

/// Elongated axis-aligned band as the target class.
#[derive(Debug, Clone, PartialEq)]
pub struct NoncircularParams {
    pub n_total: usize,
    pub center: [f64; 2],
    /// Half extent along x.
    pub half_length: f64,
    /// Half extent along y.
    pub half_width: f64,
    pub box_halfwidth: f64,
    pub fraction: f64,
}

impl Default for NoncircularParams {
    fn default() -> Self {
        Self {
            n_total: 6000,
            center: [0.0, 0.0],
            half_length: 2.0,
            half_width: 0.4,
            box_halfwidth: 3.0,
            fraction: 0.15,
        }
    }
}

/// Minimum length-to-width ratio of the band.
pub const MIN_BAND_ASPECT: f64 = 4.0;

pub fn gen_noncircular<T: Scalar>(seed: u64, params: &NoncircularParams) -> Result<Dataset<T>> {
    let NoncircularParams {
        n_total,
        center,
        half_length,
        half_width,
        box_halfwidth: h,
        fraction,
    } = *params;
    check_common(n_total, fraction, h)?;
    if !(half_width > 0.0 && half_length > 0.0) {
        return Err(Error::Parameter("band extents must be positive".into()));
    }
    if half_length / half_width < MIN_BAND_ASPECT {
        return Err(Error::Parameter(format!(
            "band aspect ratio {:.3} is below {MIN_BAND_ASPECT}",
            half_length / half_width
        )));
    }
    if center[0].abs() + half_length > h || center[1].abs() + half_width > h {
        return Err(Error::Parameter("band does not fit inside the box".into()));
    }
    let inside = |x: f64, y: f64| {
        (x - center[0]).abs() <= half_length && (y - center[1]).abs() <= half_width
    };

    let (n_pos, n_neg) = class_sizes(n_total, fraction);
    let mut rng = Rng::new(seed);
    let mut raw = Vec::with_capacity(n_total);
    for _ in 0..n_pos {
        let x = center[0] + rng.uniform_in(-half_length, half_length);
        let y = center[1] + rng.uniform_in(-half_width, half_width);
        raw.push(([x, y], POSITIVE));
    }
    for _ in 0..n_neg {
        raw.push((sample_outside(&mut rng, h, inside), NEGATIVE));
    }
    assemble(&mut rng, raw)
}

/// Shape of one synthetic digit cluster: an anisotropic Gaussian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterShape {
    pub center: [f64; 2],
    /// Standard deviations along the rotated principal axes.
    pub spread: [f64; 2],
    /// Rotation of the first principal axis, radians.
    pub angle: f64,
}

/// Ten clusters standing in for a 2D embedding of handwritten digits.
///
/// Digit 8 is a compact round cluster; digit 7 is stretched (4:1) and tilted.
/// The remaining digits sit on a ring around them with mild anisotropy.
pub fn digit_cluster_shapes() -> [ClusterShape; 10] {
    let ring = |i: usize, r: f64| {
        let a = i as f64 * std::f64::consts::TAU / 8.0;
        [r * a.cos(), r * a.sin()]
    };
    [
        ClusterShape { center: ring(0, 6.0), spread: [1.0, 0.8], angle: 0.3 },
        ClusterShape { center: ring(1, 6.5), spread: [1.2, 0.6], angle: 1.1 },
        ClusterShape { center: ring(2, 6.0), spread: [0.9, 0.9], angle: 0.0 },
        ClusterShape { center: ring(3, 6.5), spread: [1.1, 0.7], angle: -0.6 },
        ClusterShape { center: ring(4, 6.0), spread: [1.0, 0.7], angle: 0.9 },
        ClusterShape { center: ring(5, 6.5), spread: [0.8, 1.0], angle: 0.2 },
        ClusterShape { center: ring(6, 6.0), spread: [1.0, 0.8], angle: -0.4 },
        ClusterShape { center: [-1.5, 2.5], spread: [2.0, 0.5], angle: 0.5 },
        ClusterShape { center: [0.5, -1.0], spread: [0.7, 0.7], angle: 0.0 },
        ClusterShape { center: ring(7, 6.5), spread: [0.9, 0.8], angle: 1.4 },
    ]
}

/// Synthetic digit embedding: `per_digit` points for each of the ten clusters
/// of [`digit_cluster_shapes`], labeled with the raw digit, shuffled.
pub fn gen_digit_embedding<T: Scalar>(seed: u64, per_digit: usize) -> Result<Dataset<T>> {
    if per_digit == 0 {
        return Err(Error::Parameter("per_digit must be >= 1".into()));
    }
    let mut rng = Rng::new(seed);
    let mut raw = Vec::with_capacity(10 * per_digit);
    for (digit, shape) in digit_cluster_shapes().iter().enumerate() {
        let (s, c) = shape.angle.sin_cos();
        for _ in 0..per_digit {
            let u = shape.spread[0] * rng.normal();
            let v = shape.spread[1] * rng.normal();
            let p = [
                shape.center[0] + c * u - s * v,
                shape.center[1] + s * u + c * v,
            ];
            raw.push((p, digit as u8));
        }
    }
    rng.shuffle(&mut raw);
    let points = raw
        .into_iter()
        .map(|(p, label)| LabeledPoint {
            x: vec![T::lit(p[0]), T::lit(p[1])],
            label,
        })
        .collect();
    Dataset::new(points, LabelKind::Digit)
}

/// Parses `x1,x2,digit` or `x1,x2,label` CSV text (header required).
pub fn parse_labeled_csv<T: Scalar>(text: &str) -> Result<Dataset<T>> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::Parse { line: 1, message: "empty file, header expected".into() })?;
    let kind = match header.trim() {
        "x1,x2,digit" => LabelKind::Digit,
        "x1,x2,label" => LabelKind::Binary,
        other => {
            return Err(Error::Parse {
                line: 1,
                message: format!("expected header `x1,x2,digit` or `x1,x2,label`, got `{other}`"),
            })
        }
    };

    let mut points = Vec::new();
    for (i, line) in lines {
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(Error::Parse {
                line: lineno,
                message: format!("expected 3 fields, found {}", fields.len()),
            });
        }
        let mut coords = Vec::with_capacity(2);
        for f in &fields[..2] {
            let v: f64 = f.parse().map_err(|_| Error::Parse {
                line: lineno,
                message: format!("`{f}` is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("non-finite coordinate `{f}`"),
                });
            }
            coords.push(T::lit(v));
        }
        let label: u8 = fields[2].parse().map_err(|_| Error::Parse {
            line: lineno,
            message: format!("`{}` is not a valid {}", fields[2], kind.column()),
        })?;
        let max = if kind == LabelKind::Digit { 9 } else { 1 };
        if label > max {
            return Err(Error::Parse {
                line: lineno,
                message: format!("{} {label} out of range 0..={max}", kind.column()),
            });
        }
        points.push(LabeledPoint { x: coords, label });
    }
    Dataset::new(points, kind)
}

pub fn load_labeled_csv<T: Scalar>(path: &Path) -> Result<Dataset<T>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_labeled_csv(&text)
}

/// CSV text with a header naming the label column by the dataset's kind.
/// Coordinates use the shortest representation that parses back exactly.
pub fn to_csv_string<T: Scalar>(data: &Dataset<T>) -> Result<String> {
    if data.dim != 2 && !data.is_empty() {
        return Err(Error::Input(format!("CSV export needs 2D points, got {}D", data.dim)));
    }
    let mut out = format!("x1,x2,{}\n", data.kind.column());
    for p in &data.points {
        let _ = writeln!(out, "{},{},{}", p.x[0].as_f64(), p.x[1].as_f64(), p.label);
    }
    Ok(out)
}

pub fn save_labeled_csv<T: Scalar>(data: &Dataset<T>, path: &Path) -> Result<()> {
    let text = to_csv_string(data)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Label 1 iff the raw digit equals `target_digit`.
pub fn binarize<T: Scalar>(data: &Dataset<T>, target_digit: u8) -> Result<Dataset<T>> {
    if data.kind != LabelKind::Digit {
        return Err(Error::Input("binarize expects digit labels".into()));
    }
    if target_digit > 9 {
        return Err(Error::Parameter(format!("target digit {target_digit} out of range")));
    }
    let points: Vec<_> = data
        .points
        .iter()
        .map(|p| LabeledPoint {
            x: p.x.clone(),
            label: u8::from(p.label == target_digit),
        })
        .collect();
    if !points.iter().any(|p| p.label == POSITIVE) {
        log::warn!("digit {target_digit} does not occur; all labels are 0");
    }
    Ok(Dataset {
        points,
        dim: data.dim,
        kind: LabelKind::Binary,
    })
}

/// Seeded shuffle, then the first `round(n·train_fraction)` points train.
pub fn split<T: Scalar>(data: &Dataset<T>, train_fraction: f64, seed: u64) -> Result<(Dataset<T>, Dataset<T>)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Parameter(format!(
            "train fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    let n = data.len();
    let n_train = (n as f64 * train_fraction).round() as usize;
    if n_train == 0 || n_train == n {
        return Err(Error::Parameter(format!(
            "splitting {n} points at {train_fraction} leaves one side empty"
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    Rng::new(seed).shuffle(&mut idx);
    Ok((data.select(&idx[..n_train]), data.select(&idx[n_train..])))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    pub xmin: f64,
    pub xmax: f64,
    pub ymin: f64,
    pub ymax: f64,
}

impl BoundingBox {
    pub fn new(xmin: f64, xmax: f64, ymin: f64, ymax: f64) -> Result<Self> {
        let ok = [xmin, xmax, ymin, ymax].iter().all(|v| v.is_finite()) && xmin < xmax && ymin < ymax;
        if !ok {
            return Err(Error::Parameter(format!(
                "invalid bounding box [{xmin}, {xmax}] x [{ymin}, {ymax}]"
            )));
        }
        Ok(Self { xmin, xmax, ymin, ymax })
    }

    /// Smallest box holding every point, padded by `margin` on each side.
    pub fn around<T: Scalar>(data: &Dataset<T>, margin: f64) -> Result<Self> {
        let mut b = [f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY];
        for p in data.points() {
            let (x, y) = (p.x[0].as_f64(), p.x[1].as_f64());
            b[0] = b[0].min(x);
            b[1] = b[1].max(x);
            b[2] = b[2].min(y);
            b[3] = b[3].max(y);
        }
        Self::new(b[0] - margin, b[1] + margin, b[2] - margin, b[3] + margin)
    }
}

/// Model probabilities sampled at cell centers.
///
/// Row-major; row 0 is the top row (largest y), column 0 the smallest x, so the
/// layout matches image orientation.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterGrid {
    pub bbox: BoundingBox,
    pub nx: usize,
    pub ny: usize,
    pub values: Vec<f64>,
}

impl RasterGrid {
    pub fn cell_center(&self, row: usize, col: usize) -> (f64, f64) {
        let b = &self.bbox;
        let x = b.xmin + (col as f64 + 0.5) * (b.xmax - b.xmin) / self.nx as f64;
        let y = b.ymax - (row as f64 + 0.5) * (b.ymax - b.ymin) / self.ny as f64;
        (x, y)
    }

    pub fn value(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.nx + col]
    }

    /// Plain PGM (P2), 8-bit, gray level `round(255·p)`.
    pub fn to_pgm(&self) -> String {
        let mut out = format!("P2\n{} {}\n255\n", self.nx, self.ny);
        for row in self.values.chunks(self.nx) {
            let line: Vec<String> = row
                .iter()
                .map(|v| ((255.0 * v).round().clamp(0.0, 255.0) as u8).to_string())
                .collect();
            // Plain PGM lines should stay under 70 characters.
            for chunk in line.chunks(16) {
                out.push_str(&chunk.join(" "));
                out.push('\n');
            }
        }
        out
    }

    /// Sidecar describing the grid geometry, one `key=value` per line.
    pub fn sidecar(&self) -> String {
        let b = &self.bbox;
        format!(
            "xmin={}\nxmax={}\nymin={}\nymax={}\nnx={}\nny={}\nrow0=ymax\n",
            b.xmin, b.xmax, b.ymin, b.ymax, self.nx, self.ny
        )
    }

    /// Whitespace-separated probabilities, one grid row per line.
    pub fn to_text_grid(&self) -> String {
        let mut out = String::new();
        for row in self.values.chunks(self.nx) {
            let line: Vec<String> = row.iter().map(|v| format!("{v:.6}")).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }
}

/// Evaluates the model's output probability at every grid cell center.
pub fn boundary_raster<T: Scalar>(
    model: &Model<T>,
    bbox: BoundingBox,
    resolution: (usize, usize),
) -> Result<RasterGrid> {
    let (nx, ny) = resolution;
    if nx < 2 || ny < 2 {
        return Err(Error::Parameter(format!("resolution must be at least 2x2, got {nx}x{ny}")));
    }
    if model.spec().input_dim() != 2 || model.spec().output_dim() != 1 {
        return Err(Error::Input("raster needs a model with 2 inputs and 1 output".into()));
    }
    let mut grid = RasterGrid {
        bbox,
        nx,
        ny,
        values: Vec::with_capacity(nx * ny),
    };
    for row in 0..ny {
        for col in 0..nx {
            let (x, y) = grid.cell_center(row, col);
            let out = model.evaluate(&[T::lit(x), T::lit(y)])?;
            grid.values.push(out[0].as_f64());
        }
    }
    Ok(grid)
}
