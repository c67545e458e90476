//! Loss functions, the Adam optimizer, the mini-batch training loop, the 0.5
//! threshold prediction rule and a finite-difference gradient checker.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::dataio::{Dataset, LabelKind};
use crate::error::{Error, Result};
use crate::network::{backward_accumulate, clear_grads, evaluate_unchecked, LayerParams, Model, NetworkSpec};
use crate::numkernel::{Rng, Scalar};

/// Predictions are clamped to `[PROB_CLAMP, 1 - PROB_CLAMP]` before the log.
pub const PROB_CLAMP: f64 = 1e-12;

/// Binary cross-entropy of one prediction, and its derivative in `pred`.
pub fn bce_loss<T: Scalar>(pred: T, label: u8) -> (T, T) {
    let eps = T::lit(PROB_CLAMP);
    let one = T::one();
    let p = pred.max(eps).min(one - eps);
    if label == 1 {
        (-p.ln(), -one / p)
    } else {
        (-(one - p).ln(), one / (one - p))
    }
}

/// Squared error `(pred − target)²` and its derivative.
pub fn squared_error<T: Scalar>(pred: T, target: T) -> (T, T) {
    let d = pred - target;
    (d * d, T::lit(2.0) * d)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    BinaryCrossEntropy,
    MeanSquared,
}

impl Loss {
    fn eval<T: Scalar>(self, pred: T, target: T) -> (T, T) {
        match self {
            Loss::BinaryCrossEntropy => bce_loss(pred, u8::from(target > T::lit(0.5))),
            Loss::MeanSquared => squared_error(pred, target),
        }
    }
}

/// Adam with bias correction.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub m: Vec<LayerParams<T>>,
    pub v: Vec<LayerParams<T>>,
    pub t: u64,
    pub lr: T,
    pub beta1: T,
    pub beta2: T,
    pub eps: T,
}

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

impl<T: Scalar> AdamState<T> {
    /// Zeroed moments shaped like `spec`, default `β₁, β₂, ε`.
    pub fn new(spec: &NetworkSpec, lr: T) -> Self {
        let zeros: Vec<LayerParams<T>> = spec.layers().iter().map(LayerParams::zeros).collect();
        Self {
            m: zeros.clone(),
            v: zeros,
            t: 0,
            lr,
            beta1: T::lit(ADAM_BETA1),
            beta2: T::lit(ADAM_BETA2),
            eps: T::lit(ADAM_EPS),
        }
    }

    pub fn step(&mut self, params: &mut [LayerParams<T>], grads: &[LayerParams<T>]) -> Result<()> {
        if params.len() != self.m.len() {
            return Err(Error::dim(self.m.len(), params.len()));
        }
        if grads.len() != self.m.len() {
            return Err(Error::dim(self.m.len(), grads.len()));
        }
        for ((p, g), m) in params.iter().zip(grads).zip(&self.m) {
            for ((pt, gt), mt) in p.tensors().iter().zip(g.tensors()).zip(m.tensors()) {
                if pt.len() != mt.len() {
                    return Err(Error::dim(mt.len(), pt.len()));
                }
                if gt.len() != mt.len() {
                    return Err(Error::dim(mt.len(), gt.len()));
                }
            }
            if p.tensors().len() != m.tensors().len() || g.tensors().len() != m.tensors().len() {
                return Err(Error::State("parameter tensors do not match optimizer state".into()));
            }
        }

        self.t += 1;
        let one = T::one();
        let t = i32::try_from(self.t).unwrap_or(i32::MAX);
        let bc1 = one - self.beta1.powi(t);
        let bc2 = one - self.beta2.powi(t);
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.lr, self.eps);

        for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            for (((pt, gt), mt), vt) in p
                .tensors_mut()
                .into_iter()
                .zip(g.tensors())
                .zip(m.tensors_mut())
                .zip(v.tensors_mut())
            {
                for i in 0..pt.len() {
                    let gi = gt[i];
                    mt[i] = b1 * mt[i] + (one - b1) * gi;
                    vt[i] = b2 * vt[i] + (one - b2) * gi * gi;
                    let m_hat = mt[i] / bc1;
                    let v_hat = vt[i] / bc2;
                    pt[i] -= lr * m_hat / (v_hat.sqrt() + eps);
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BatchSize {
    /// Fixed mini-batch size; the last batch of an epoch may be smaller.
    Size(usize),
    /// One batch holding the whole training set: one Adam step per epoch.
    Full,
}

impl Default for BatchSize {
    fn default() -> Self {
        BatchSize::Size(32)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: BatchSize,
    pub lr: f64,
    pub init_std: f64,
    pub seed: u64,
    pub shuffle: bool,
    pub loss: Loss,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 10,
            batch_size: BatchSize::default(),
            lr: 0.001,
            init_std: 0.05,
            seed: 0,
            shuffle: true,
            loss: Loss::BinaryCrossEntropy,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self, n_samples: usize) -> Result<usize> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be >= 1".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("learning rate must be positive, got {}", self.lr)));
        }
        if !(self.init_std >= 0.0 && self.init_std.is_finite()) {
            return Err(Error::Config(format!("init std must be >= 0, got {}", self.init_std)));
        }
        match self.batch_size {
            BatchSize::Full => Ok(n_samples),
            BatchSize::Size(b) if b >= 1 && b <= n_samples => Ok(b),
            BatchSize::Size(b) => Err(Error::Config(format!(
                "batch size {b} must lie in 1..={n_samples}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Mean per-sample loss of each epoch, accumulated during the pass.
    pub epoch_loss: Vec<f64>,
    pub test_accuracy: Option<f64>,
    pub steps: u64,
    pub wall_time: Duration,
}

impl TrainReport {
    /// Tab-separated `epoch`, `mean_loss` table with a header line.
    pub fn loss_table(&self) -> String {
        let mut out = String::from("epoch\tmean_loss\n");
        for (i, l) in self.epoch_loss.iter().enumerate() {
            out.push_str(&format!("{}\t{}\n", i + 1, l));
        }
        out
    }
}

/// Mean loss over `inputs` and its gradient, written into `grads`.
fn batch_loss_and_grad<T: Scalar>(
    model: &Model<T>,
    inputs: &[&[T]],
    targets: &[T],
    batch: &[usize],
    loss: Loss,
    grads: &mut [LayerParams<T>],
) -> Result<T> {
    clear_grads(grads);
    let scale = T::one() / T::lit(batch.len() as f64);
    let mut total = T::zero();
    for &i in batch {
        let (out, tape) = model.forward(inputs[i])?;
        let (l, d) = loss.eval(out[0], targets[i]);
        total += l;
        backward_accumulate(model.spec(), model.params(), &tape, &[d * scale], grads)?;
    }
    Ok(total)
}

/// Mini-batch Adam on an already-initialized model.
///
/// `targets` are `{0, 1}` labels for cross-entropy or real values for squared
/// error. Batches are drawn from a per-epoch Fisher–Yates shuffle when
/// `cfg.shuffle` is set.
pub fn fit<T: Scalar>(
    model: &mut Model<T>,
    inputs: &[&[T]],
    targets: &[T],
    cfg: &TrainConfig,
    shuffle_rng: &mut Rng,
) -> Result<TrainReport> {
    if inputs.is_empty() {
        return Err(Error::Input("training set is empty".into()));
    }
    if inputs.len() != targets.len() {
        return Err(Error::dim(inputs.len(), targets.len()));
    }
    if model.spec().output_dim() != 1 {
        return Err(Error::Config("training expects a single-output network".into()));
    }
    let batch_size = cfg.validate(inputs.len())?;
    let started = Instant::now();

    let mut adam = AdamState::new(model.spec(), T::lit(cfg.lr));
    let mut grads = model.zero_grads();
    let mut order: Vec<usize> = (0..inputs.len()).collect();
    let mut epoch_loss = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        if cfg.shuffle {
            shuffle_rng.shuffle(&mut order);
        }
        let mut total = T::zero();
        for batch in order.chunks(batch_size) {
            total += batch_loss_and_grad(model, inputs, targets, batch, cfg.loss, &mut grads)?;
            adam.step(model.params_mut(), &grads)?;
        }
        let mean = total.as_f64() / inputs.len() as f64;
        if !mean.is_finite() {
            return Err(Error::Divergence { epoch: epoch + 1 });
        }
        epoch_loss.push(mean);
    }

    Ok(TrainReport {
        epoch_loss,
        test_accuracy: None,
        steps: adam.t,
        wall_time: started.elapsed(),
    })
}

fn binary_targets<T: Scalar>(data: &Dataset<T>) -> Result<Vec<T>> {
    if data.kind() != LabelKind::Binary {
        return Err(Error::Input("training needs binary labels; binarize digit labels first".into()));
    }
    Ok(data.points().iter().map(|p| T::lit(f64::from(p.label))).collect())
}

/// Initializes a model for `spec` (Gaussian `W`, `ξ`; zero `θ`) from
/// `cfg.seed`, trains it on `data`, and scores it on `holdout` if given.
pub fn train<T: Scalar>(
    spec: &NetworkSpec,
    data: &Dataset<T>,
    cfg: &TrainConfig,
    holdout: Option<&Dataset<T>>,
) -> Result<(Model<T>, TrainReport)> {
    if data.is_empty() {
        return Err(Error::Input("training set is empty".into()));
    }
    if data.dim() != spec.input_dim() {
        return Err(Error::dim(spec.input_dim(), data.dim()));
    }
    cfg.validate(data.len())?;
    let targets = binary_targets(data)?;
    let mut master = Rng::new(cfg.seed);
    let mut init_rng = master.fork();
    let mut shuffle_rng = master.fork();
    let mut model = Model::init(spec.clone(), &mut init_rng, T::lit(cfg.init_std))?;
    let mut report = fit(&mut model, &data.inputs(), &targets, cfg, &mut shuffle_rng)?;
    if let Some(test) = holdout {
        report.test_accuracy = Some(accuracy(&model, test)?);
    }
    Ok((model, report))
}

/// Output probability and the thresholded label: 1 iff probability > 0.5.
pub fn predict<T: Scalar>(model: &Model<T>, x: &[T]) -> Result<(T, u8)> {
    let out = model.evaluate(x)?;
    if out.len() != 1 {
        return Err(Error::Config("prediction expects a single-output network".into()));
    }
    Ok((out[0], threshold(out[0])))
}

/// Strict threshold: exactly 0.5 maps to label 0.
pub fn threshold<T: Scalar>(probability: T) -> u8 {
    u8::from(probability > T::lit(0.5))
}

/// Fraction of points whose thresholded prediction equals the label.
pub fn accuracy<T: Scalar>(model: &Model<T>, data: &Dataset<T>) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::Input("cannot score an empty dataset".into()));
    }
    if data.dim() != model.spec().input_dim() {
        return Err(Error::dim(model.spec().input_dim(), data.dim()));
    }
    let correct = data
        .points()
        .iter()
        .filter(|p| threshold(evaluate_unchecked(model.spec(), model.params(), &p.x)[0]) == p.label)
        .count();
    Ok(correct as f64 / data.len() as f64)
}

/// Mean loss of `model` over `(inputs, targets)`.
pub fn mean_loss<T: Scalar>(model: &Model<T>, inputs: &[&[T]], targets: &[T], loss: Loss) -> Result<T> {
    if inputs.is_empty() || inputs.len() != targets.len() {
        return Err(Error::Input("need matching, nonempty inputs and targets".into()));
    }
    let mut total = T::zero();
    for (x, &y) in inputs.iter().zip(targets) {
        let out = model.evaluate(x)?;
        total += loss.eval(out[0], y).0;
    }
    Ok(total / T::lit(inputs.len() as f64))
}

/// Analytic gradient of [`mean_loss`].
pub fn loss_gradient<T: Scalar>(
    model: &Model<T>,
    inputs: &[&[T]],
    targets: &[T],
    loss: Loss,
) -> Result<Vec<LayerParams<T>>> {
    if inputs.is_empty() || inputs.len() != targets.len() {
        return Err(Error::Input("need matching, nonempty inputs and targets".into()));
    }
    let mut grads = model.zero_grads();
    let all: Vec<usize> = (0..inputs.len()).collect();
    batch_loss_and_grad(model, inputs, targets, &all, loss, &mut grads)?;
    Ok(grads)
}

/// Step used by [`grad_check`].
pub const FD_STEP: f64 = 1e-5;
/// Below this magnitude a numeric derivative is compared absolutely.
pub const FD_FLOOR: f64 = 1e-6;

/// Central differences of [`mean_loss`] over every scalar parameter.
pub fn numeric_gradient<T: Scalar>(
    model: &Model<T>,
    inputs: &[&[T]],
    targets: &[T],
    loss: Loss,
    h: T,
) -> Result<Vec<LayerParams<T>>> {
    let mut probe = model.clone();
    let mut grads = model.zero_grads();
    let two_h = T::lit(2.0) * h;
    for l in 0..grads.len() {
        let n_tensors = grads[l].tensors().len();
        for t in 0..n_tensors {
            let len = grads[l].tensors()[t].len();
            for i in 0..len {
                let orig = probe.params()[l].tensors()[t][i];
                probe.params_mut()[l].tensors_mut()[t][i] = orig + h;
                let plus = mean_loss(&probe, inputs, targets, loss)?;
                probe.params_mut()[l].tensors_mut()[t][i] = orig - h;
                let minus = mean_loss(&probe, inputs, targets, loss)?;
                probe.params_mut()[l].tensors_mut()[t][i] = orig;
                grads[l].tensors_mut()[t][i] = (plus - minus) / two_h;
            }
        }
    }
    Ok(grads)
}

/// Worst `|analytic − numeric| / max(|numeric|, FD_FLOOR)` over all entries.
pub fn compare_gradients<T: Scalar>(analytic: &[LayerParams<T>], numeric: &[LayerParams<T>]) -> Result<f64> {
    if analytic.len() != numeric.len() {
        return Err(Error::dim(numeric.len(), analytic.len()));
    }
    let mut worst = 0.0f64;
    for (a, n) in analytic.iter().zip(numeric) {
        let (at, nt) = (a.tensors(), n.tensors());
        if at.len() != nt.len() {
            return Err(Error::State("gradient tensor layouts differ".into()));
        }
        for (x, y) in at.iter().zip(&nt) {
            if x.len() != y.len() {
                return Err(Error::dim(y.len(), x.len()));
            }
            for (&ga, &gn) in x.iter().zip(y.iter()) {
                let (ga, gn) = (ga.as_f64(), gn.as_f64());
                let err = (ga - gn).abs() / gn.abs().max(FD_FLOOR);
                worst = worst.max(err);
            }
        }
    }
    Ok(worst)
}

/// Worst relative error between backpropagated and central-difference
/// gradients of the mean loss over the sample.
pub fn grad_check<T: Scalar>(model: &Model<T>, inputs: &[&[T]], targets: &[T], loss: Loss) -> Result<f64> {
    let analytic = loss_gradient(model, inputs, targets, loss)?;
    let numeric = numeric_gradient(model, inputs, targets, loss, T::lit(FD_STEP))?;
    compare_gradients(&analytic, &numeric)
}
