//! Layers, activations, network composition and the analytic backward pass.
//!
//! Two layer kinds share one parameter layout. Neuron `j` of a layer computes
//! the decision function
//!
//! - affine: `z_j = w_j·x + θ_j`
//! - radial-quadratic: `z_j = w_j·x + ξ_j‖x‖² + θ_j`
//!
//! followed by the layer activation. A network is a chain of layers; binary
//! classifiers end in a single affine neuron with a sigmoid.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkernel::{dot_unchecked, sqnorm, Matrix, Rng, Scalar, Vector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Sigmoid,
    Relu,
    Identity,
    Softmax,
}

#[inline]
pub fn sigmoid<T: Scalar>(z: T) -> T {
    // Branch keeps exp() from overflowing for large |z|.
    if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (T::one() + e)
    }
}

impl Activation {
    pub fn apply<T: Scalar>(self, z: &[T]) -> Vec<T> {
        match self {
            Activation::Sigmoid => z.iter().map(|&v| sigmoid(v)).collect(),
            Activation::Relu => z.iter().map(|&v| v.max(T::zero())).collect(),
            Activation::Identity => z.to_vec(),
            Activation::Softmax => {
                let max = z.iter().fold(T::neg_infinity(), |m, &v| m.max(v));
                let exps: Vec<T> = z.iter().map(|&v| (v - max).exp()).collect();
                let total: T = exps.iter().copied().sum();
                exps.into_iter().map(|e| e / total).collect()
            }
        }
    }

    /// Maps `dL/da` to `dL/dz` given the cached pre-activation `z` and output `a`.
    ///
    /// ReLU uses derivative 0 at exactly `z = 0`.
    pub fn backprop<T: Scalar>(self, z: &[T], a: &[T], upstream: &[T]) -> Vec<T> {
        match self {
            Activation::Sigmoid => a
                .iter()
                .zip(upstream)
                .map(|(&s, &g)| g * s * (T::one() - s))
                .collect(),
            Activation::Relu => z
                .iter()
                .zip(upstream)
                .map(|(&v, &g)| if v > T::zero() { g } else { T::zero() })
                .collect(),
            Activation::Identity => upstream.to_vec(),
            Activation::Softmax => {
                let inner = dot_unchecked(a, upstream);
                a.iter()
                    .zip(upstream)
                    .map(|(&s, &g)| s * (g - inner))
                    .collect()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerKind {
    Affine,
    RadialQuadratic,
}

impl LayerKind {
    /// Number of parameter tensors: `(W, θ)` or `(W, ξ, θ)`.
    pub fn tensor_count(self) -> usize {
        match self {
            LayerKind::Affine => 2,
            LayerKind::RadialQuadratic => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub kind: LayerKind,
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
}

impl LayerSpec {
    pub fn new(kind: LayerKind, in_dim: usize, out_dim: usize, activation: Activation) -> Self {
        Self {
            kind,
            in_dim,
            out_dim,
            activation,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.in_dim == 0 || self.out_dim == 0 {
            return Err(Error::Config(format!(
                "layer dims must be >= 1, got {}x{}",
                self.in_dim, self.out_dim
            )));
        }
        Ok(())
    }
}

/// Ordered chain of layers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkSpec {
    layers: Vec<LayerSpec>,
}

impl NetworkSpec {
    pub fn new(layers: Vec<LayerSpec>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Config("network needs at least one layer".into()));
        }
        for l in &layers {
            l.validate()?;
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].out_dim != pair[1].in_dim {
                return Err(Error::Config(format!(
                    "layer {} outputs {} values but layer {} expects {}",
                    i,
                    pair[0].out_dim,
                    i + 1,
                    pair[1].in_dim
                )));
            }
        }
        Ok(Self { layers })
    }

    /// Binary classifier: `depth` ReLU hidden layers of `width` neurons of the
    /// given kind, then a single sigmoid output neuron (affine).
    pub fn classifier(kind: LayerKind, input_dim: usize, depth: usize, width: usize) -> Result<Self> {
        Self::stack(kind, input_dim, depth, width, Activation::Relu, Activation::Sigmoid)
    }

    /// Scalar regressor: sigmoid hidden layers and an identity output neuron.
    pub fn regressor(kind: LayerKind, input_dim: usize, depth: usize, width: usize) -> Result<Self> {
        Self::stack(kind, input_dim, depth, width, Activation::Sigmoid, Activation::Identity)
    }

    pub fn stack(
        kind: LayerKind,
        input_dim: usize,
        depth: usize,
        width: usize,
        hidden: Activation,
        head: Activation,
    ) -> Result<Self> {
        if depth == 0 {
            return Err(Error::Config("depth must be >= 1".into()));
        }
        let mut layers = Vec::with_capacity(depth + 1);
        let mut in_dim = input_dim;
        for _ in 0..depth {
            layers.push(LayerSpec::new(kind, in_dim, width, hidden));
            in_dim = width;
        }
        layers.push(LayerSpec::new(LayerKind::Affine, in_dim, 1, head));
        Self::new(layers)
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim
    }

    /// Parameter tensors in the hidden layers (everything but the output layer).
    pub fn hidden_tensor_count(&self) -> usize {
        self.layers[..self.layers.len() - 1]
            .iter()
            .map(|l| l.kind.tensor_count())
            .sum()
    }

    pub fn scalar_param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| {
                let radial = usize::from(l.kind == LayerKind::RadialQuadratic);
                l.out_dim * (l.in_dim + 1 + radial)
            })
            .sum()
    }
}

/// Weights `W` (one row per neuron), biases `θ` and, for radial layers, `ξ`.
///
/// Also used to hold gradients of the same shape.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams<T> {
    pub weights: Matrix<T>,
    pub theta: Vector<T>,
    pub xi: Option<Vector<T>>,
}

impl<T: Scalar> LayerParams<T> {
    pub fn zeros(spec: &LayerSpec) -> Self {
        Self {
            weights: Matrix::zeros(spec.out_dim, spec.in_dim),
            theta: Vector::zeros(spec.out_dim),
            xi: match spec.kind {
                LayerKind::Affine => None,
                LayerKind::RadialQuadratic => Some(Vector::zeros(spec.out_dim)),
            },
        }
    }

    pub fn check_shape(&self, spec: &LayerSpec) -> Result<()> {
        if self.weights.rows() != spec.out_dim {
            return Err(Error::dim(spec.out_dim, self.weights.rows()));
        }
        if self.weights.cols() != spec.in_dim {
            return Err(Error::dim(spec.in_dim, self.weights.cols()));
        }
        if self.theta.len() != spec.out_dim {
            return Err(Error::dim(spec.out_dim, self.theta.len()));
        }
        match (spec.kind, &self.xi) {
            (LayerKind::Affine, None) => Ok(()),
            (LayerKind::RadialQuadratic, Some(xi)) if xi.len() == spec.out_dim => Ok(()),
            (LayerKind::RadialQuadratic, Some(xi)) => Err(Error::dim(spec.out_dim, xi.len())),
            (LayerKind::Affine, Some(_)) => Err(Error::State(
                "affine layer carries radial coefficients".into(),
            )),
            (LayerKind::RadialQuadratic, None) => Err(Error::State(
                "radial layer is missing radial coefficients".into(),
            )),
        }
    }

    /// Parameter tensors in a fixed order: `W`, `θ`, then `ξ` if present.
    pub fn tensors(&self) -> Vec<&[T]> {
        let mut out = vec![self.weights.as_slice(), self.theta.as_slice()];
        if let Some(xi) = &self.xi {
            out.push(xi.as_slice());
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [T]> {
        let mut out = vec![self.weights.as_mut_slice(), self.theta.as_mut_slice()];
        if let Some(xi) = &mut self.xi {
            out.push(xi.as_mut_slice());
        }
        out
    }

    pub fn scalar_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    fn fill_zero(&mut self) {
        for t in self.tensors_mut() {
            t.fill(T::zero());
        }
    }
}

/// Decision-function values `z_j` for one layer.
pub fn preactivation<T: Scalar>(layer: &LayerSpec, params: &LayerParams<T>, x: &[T]) -> Result<Vec<T>> {
    params.check_shape(layer)?;
    if x.len() != layer.in_dim {
        return Err(Error::dim(layer.in_dim, x.len()));
    }
    Ok(preactivation_unchecked(params, x))
}

fn preactivation_unchecked<T: Scalar>(params: &LayerParams<T>, x: &[T]) -> Vec<T> {
    let theta = params.theta.as_slice();
    let mut z: Vec<T> = (0..params.weights.rows())
        .map(|j| dot_unchecked(params.weights.row(j), x) + theta[j])
        .collect();
    if let Some(xi) = &params.xi {
        let r2 = sqnorm(x);
        for (zj, &k) in z.iter_mut().zip(xi.as_slice()) {
            *zj += k * r2;
        }
    }
    z
}

/// Cached per-layer values from a forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct Tape<T> {
    pub inputs: Vec<Vec<T>>,
    pub preactivations: Vec<Vec<T>>,
    pub outputs: Vec<Vec<T>>,
}

fn check_params<T: Scalar>(spec: &NetworkSpec, params: &[LayerParams<T>]) -> Result<()> {
    if params.len() != spec.layers.len() {
        return Err(Error::dim(spec.layers.len(), params.len()));
    }
    for (l, p) in spec.layers.iter().zip(params) {
        p.check_shape(l)?;
    }
    Ok(())
}

/// Evaluates the network and records every layer input and pre-activation.
pub fn forward<T: Scalar>(
    spec: &NetworkSpec,
    params: &[LayerParams<T>],
    x: &[T],
) -> Result<(Vec<T>, Tape<T>)> {
    check_params(spec, params)?;
    if x.len() != spec.input_dim() {
        return Err(Error::dim(spec.input_dim(), x.len()));
    }
    let n = spec.layers.len();
    let mut tape = Tape {
        inputs: Vec::with_capacity(n),
        preactivations: Vec::with_capacity(n),
        outputs: Vec::with_capacity(n),
    };
    let mut current = x.to_vec();
    for (layer, p) in spec.layers.iter().zip(params) {
        let z = preactivation_unchecked(p, &current);
        let a = layer.activation.apply(&z);
        tape.inputs.push(std::mem::replace(&mut current, a.clone()));
        tape.preactivations.push(z);
        tape.outputs.push(a);
    }
    Ok((current, tape))
}

/// Network output without recording a tape.
pub fn evaluate<T: Scalar>(spec: &NetworkSpec, params: &[LayerParams<T>], x: &[T]) -> Result<Vec<T>> {
    check_params(spec, params)?;
    if x.len() != spec.input_dim() {
        return Err(Error::dim(spec.input_dim(), x.len()));
    }
    Ok(evaluate_unchecked(spec, params, x))
}

pub(crate) fn evaluate_unchecked<T: Scalar>(
    spec: &NetworkSpec,
    params: &[LayerParams<T>],
    x: &[T],
) -> Vec<T> {
    let mut current = x.to_vec();
    for (layer, p) in spec.layers.iter().zip(params) {
        let z = preactivation_unchecked(p, &current);
        current = layer.activation.apply(&z);
    }
    current
}

/// Gradients of a scalar loss with respect to every parameter and the input,
/// given `dL/d(output)` and the tape of the matching forward pass.
pub fn backward<T: Scalar>(
    spec: &NetworkSpec,
    params: &[LayerParams<T>],
    tape: &Tape<T>,
    d_output: &[T],
) -> Result<(Vec<LayerParams<T>>, Vec<T>)> {
    let mut grads: Vec<LayerParams<T>> = spec.layers.iter().map(LayerParams::zeros).collect();
    let d_input = backward_accumulate(spec, params, tape, d_output, &mut grads)?;
    Ok((grads, d_input))
}

/// Like [`backward`] but adds into existing gradient buffers.
pub fn backward_accumulate<T: Scalar>(
    spec: &NetworkSpec,
    params: &[LayerParams<T>],
    tape: &Tape<T>,
    d_output: &[T],
    grads: &mut [LayerParams<T>],
) -> Result<Vec<T>> {
    check_params(spec, params)?;
    check_params(spec, grads)?;
    let n = spec.layers.len();
    if tape.inputs.len() != n || tape.preactivations.len() != n || tape.outputs.len() != n {
        return Err(Error::State(format!(
            "tape records {} layers, network has {}",
            tape.inputs.len(),
            n
        )));
    }
    for (i, layer) in spec.layers.iter().enumerate() {
        if tape.inputs[i].len() != layer.in_dim
            || tape.preactivations[i].len() != layer.out_dim
            || tape.outputs[i].len() != layer.out_dim
        {
            return Err(Error::State(format!("tape does not match layer {i}")));
        }
    }
    if d_output.len() != spec.output_dim() {
        return Err(Error::dim(spec.output_dim(), d_output.len()));
    }

    let two = T::lit(2.0);
    let mut upstream = d_output.to_vec();
    for i in (0..n).rev() {
        let layer = &spec.layers[i];
        let p = &params[i];
        let g = &mut grads[i];
        let x = &tape.inputs[i];
        let dz = layer
            .activation
            .backprop(&tape.preactivations[i], &tape.outputs[i], &upstream);

        let mut dx = vec![T::zero(); layer.in_dim];
        let r2 = sqnorm(x);
        for (j, &d) in dz.iter().enumerate() {
            g.theta[j] += d;
            for (gw, &xv) in g.weights.row_mut(j).iter_mut().zip(x) {
                *gw += d * xv;
            }
            for (dxv, &w) in dx.iter_mut().zip(p.weights.row(j)) {
                *dxv += d * w;
            }
            if let (Some(gxi), Some(pxi)) = (&mut g.xi, &p.xi) {
                gxi[j] += d * r2;
                let scale = d * two * pxi[j];
                for (dxv, &xv) in dx.iter_mut().zip(x) {
                    *dxv += scale * xv;
                }
            }
        }
        upstream = dx;
    }
    Ok(upstream)
}

/// Center `y` and offset `κ` with `ξ‖x − y‖² + κ = w·x + ξ‖x‖² + θ`.
#[derive(Debug, Clone, PartialEq)]
pub struct CenterForm<T> {
    pub center: Vec<T>,
    pub kappa: T,
}

pub fn center_form<T: Scalar>(w: &[T], xi: T, theta: T) -> Result<CenterForm<T>> {
    if xi == T::zero() {
        return Err(Error::Singularity);
    }
    let two_xi = T::lit(2.0) * xi;
    let center = w.iter().map(|&v| -v / two_xi).collect();
    let kappa = theta - sqnorm(w) / (T::lit(4.0) * xi);
    Ok(CenterForm { center, kappa })
}

/// Per neuron: does it have circular level sets (`ξ > 0` and `κ ≤ 0`)?
///
/// Affine layers and neurons with `ξ = 0` are reported as non-circular.
pub fn is_circular<T: Scalar>(params: &LayerParams<T>) -> Vec<bool> {
    let n = params.weights.rows();
    let Some(xi) = &params.xi else {
        return vec![false; n];
    };
    (0..n)
        .map(|j| {
            let k = xi[j];
            if k <= T::zero() {
                return false;
            }
            match center_form(params.weights.row(j), k, params.theta[j]) {
                Ok(cf) => cf.kappa <= T::zero(),
                Err(_) => false,
            }
        })
        .collect()
}

/// Gaussian `W` and `ξ` with the given standard deviation, zero `θ`.
///
/// Draw order per layer: `W` row-major, then `ξ`.
pub fn init_params<T: Scalar>(spec: &NetworkSpec, rng: &mut Rng, std: T) -> Result<Vec<LayerParams<T>>> {
    spec.layers
        .iter()
        .map(|l| {
            let mut p = LayerParams::zeros(l);
            let w = rng.gaussian(T::zero(), std, l.out_dim * l.in_dim)?;
            p.weights.as_mut_slice().copy_from_slice(&w);
            if let Some(xi) = &mut p.xi {
                let draws = rng.gaussian(T::zero(), std, l.out_dim)?;
                xi.as_mut_slice().copy_from_slice(&draws);
            }
            Ok(p)
        })
        .collect()
}

/// A network architecture together with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Model<T> {
    spec: NetworkSpec,
    params: Vec<LayerParams<T>>,
}

impl<T: Scalar> Model<T> {
    pub fn new(spec: NetworkSpec, params: Vec<LayerParams<T>>) -> Result<Self> {
        check_params(&spec, &params)?;
        Ok(Self { spec, params })
    }

    pub fn zeros(spec: NetworkSpec) -> Self {
        let params = spec.layers.iter().map(LayerParams::zeros).collect();
        Self { spec, params }
    }

    pub fn init(spec: NetworkSpec, rng: &mut Rng, std: T) -> Result<Self> {
        let params = init_params(&spec, rng, std)?;
        Ok(Self { spec, params })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn params(&self) -> &[LayerParams<T>] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [LayerParams<T>] {
        &mut self.params
    }

    pub fn forward(&self, x: &[T]) -> Result<(Vec<T>, Tape<T>)> {
        forward(&self.spec, &self.params, x)
    }

    pub fn evaluate(&self, x: &[T]) -> Result<Vec<T>> {
        evaluate(&self.spec, &self.params, x)
    }

    pub fn backward(&self, tape: &Tape<T>, d_output: &[T]) -> Result<(Vec<LayerParams<T>>, Vec<T>)> {
        backward(&self.spec, &self.params, tape, d_output)
    }

    pub(crate) fn zero_grads(&self) -> Vec<LayerParams<T>> {
        self.spec.layers.iter().map(LayerParams::zeros).collect()
    }
}

pub(crate) fn clear_grads<T: Scalar>(grads: &mut [LayerParams<T>]) {
    for g in grads {
        g.fill_zero();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn radial_single(w: &[f64], xi: f64, theta: f64) -> (LayerSpec, LayerParams<f64>) {
        let spec = LayerSpec::new(LayerKind::RadialQuadratic, w.len(), 1, Activation::Identity);
        let p = LayerParams {
            weights: Matrix::new(1, w.len(), w.to_vec()).unwrap(),
            theta: Vector::new(vec![theta]).unwrap(),
            xi: Some(Vector::new(vec![xi]).unwrap()),
        };
        (spec, p)
    }

    #[test]
    fn radial_preactivation_example() {
        let (spec, p) = radial_single(&[1.0, -1.0], 0.5, -1.0);
        assert_eq!(preactivation(&spec, &p, &[1.0, 1.0]).unwrap(), vec![0.0]);
    }

    #[test]
    fn affine_identity_preactivation() {
        let spec = LayerSpec::new(LayerKind::Affine, 3, 3, Activation::Identity);
        let p = LayerParams {
            weights: Matrix::identity(3),
            theta: Vector::zeros(3),
            xi: None,
        };
        let x = [0.3, -7.0, 2.5];
        assert_eq!(preactivation(&spec, &p, &x).unwrap(), x.to_vec());
    }

    #[test]
    fn preactivation_dimension_error() {
        let (spec, p) = radial_single(&[1.0, -1.0], 0.5, -1.0);
        assert!(matches!(
            preactivation(&spec, &p, &[1.0]),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn activation_examples() {
        assert_eq!(Activation::Sigmoid.apply(&[0.0]), vec![0.5]);
        assert_eq!(Activation::Relu.apply(&[-3.0, 2.0]), vec![0.0, 2.0]);
        let s = Activation::Softmax.apply(&[1.7f64, 1.7, 1.7]);
        for v in &s {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
        let big = Activation::Softmax.apply(&[1000.0, -1000.0, 3.0]);
        assert!((big.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(sigmoid(-800.0f64) >= 0.0 && sigmoid(800.0f64) <= 1.0);
    }

    #[test]
    fn relu_derivative_at_zero_is_zero() {
        let d = Activation::Relu.backprop(&[0.0, 1.0], &[0.0, 1.0], &[5.0, 5.0]);
        assert_eq!(d, vec![0.0, 5.0]);
    }

    #[test]
    fn softmax_backprop_matches_finite_difference() {
        let z = [0.3f64, -1.2, 0.8];
        let up = [0.7, -0.1, 0.4];
        let a = Activation::Softmax.apply(&z);
        let d = Activation::Softmax.backprop(&z, &a, &up);
        let h = 1e-6;
        for i in 0..3 {
            let mut zp = z;
            let mut zm = z;
            zp[i] += h;
            zm[i] -= h;
            let fp = dot_unchecked(&Activation::Softmax.apply(&zp), &up);
            let fm = dot_unchecked(&Activation::Softmax.apply(&zm), &up);
            assert!(((fp - fm) / (2.0 * h) - d[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn spec_chaining_validated() {
        let bad = NetworkSpec::new(vec![
            LayerSpec::new(LayerKind::Affine, 2, 3, Activation::Relu),
            LayerSpec::new(LayerKind::Affine, 4, 1, Activation::Sigmoid),
        ]);
        assert!(matches!(bad, Err(Error::Config(_))));
        assert!(NetworkSpec::new(vec![]).is_err());
        assert!(NetworkSpec::new(vec![LayerSpec::new(LayerKind::Affine, 0, 1, Activation::Identity)]).is_err());
    }

    #[test]
    fn hidden_tensor_counts_follow_tables() {
        let c = |k, d, w| NetworkSpec::classifier(k, 2, d, w).unwrap().hidden_tensor_count();
        assert_eq!(c(LayerKind::RadialQuadratic, 1, 8), 3);
        assert_eq!(c(LayerKind::Affine, 1, 8), 2);
        assert_eq!(c(LayerKind::Affine, 2, 5), 4);
        assert_eq!(c(LayerKind::Affine, 3, 5), 6);
        assert_eq!(c(LayerKind::RadialQuadratic, 3, 20), 9);
    }

    #[test]
    fn identity_network_returns_input() {
        let spec = NetworkSpec::new(vec![LayerSpec::new(LayerKind::Affine, 2, 2, Activation::Identity)]).unwrap();
        let model = Model::new(
            spec,
            vec![LayerParams {
                weights: Matrix::identity(2),
                theta: Vector::zeros(2),
                xi: None,
            }],
        )
        .unwrap();
        let (out, tape) = model.forward(&[0.25, -4.0]).unwrap();
        assert_eq!(out, vec![0.25, -4.0]);
        assert_eq!(tape.inputs.len(), 1);
    }

    #[test]
    fn shallow_rqnn_composition() {
        let spec = NetworkSpec::new(vec![
            LayerSpec::new(LayerKind::RadialQuadratic, 2, 1, Activation::Sigmoid),
            LayerSpec::new(LayerKind::Affine, 1, 1, Activation::Identity),
        ])
        .unwrap();
        let model = Model::new(
            spec,
            vec![
                LayerParams {
                    weights: Matrix::zeros(1, 2),
                    theta: Vector::zeros(1),
                    xi: Some(Vector::new(vec![1.0]).unwrap()),
                },
                LayerParams {
                    weights: Matrix::new(1, 1, vec![1.0]).unwrap(),
                    theta: Vector::zeros(1),
                    xi: None,
                },
            ],
        )
        .unwrap();
        for x in [[0.0f64, 0.0], [1.0, 2.0], [-0.5, 0.3]] {
            let expected = 1.0 / (1.0 + (-(x[0] * x[0] + x[1] * x[1])).exp());
            let out = model.evaluate(&x).unwrap();
            assert!((out[0] - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn single_radial_neuron_gradients() {
        let (lspec, p) = radial_single(&[0.4, -0.2], 0.7, 0.1);
        let spec = NetworkSpec::new(vec![lspec]).unwrap();
        let params = vec![p];
        let x = [1.5, -2.0];
        let (_, tape) = forward(&spec, &params, &x).unwrap();
        let (g, dx) = backward(&spec, &params, &tape, &[1.0]).unwrap();
        assert_eq!(g[0].xi.as_ref().unwrap()[0], sqnorm(&x));
        assert_eq!(g[0].theta[0], 1.0);
        assert_eq!(g[0].weights.row(0), &x);
        // ∂z/∂x = w + 2ξx
        assert!((dx[0] - (0.4 + 2.0 * 0.7 * 1.5)).abs() < 1e-15);
        assert!((dx[1] - (-0.2 + 2.0 * 0.7 * -2.0)).abs() < 1e-15);
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let spec = NetworkSpec::classifier(LayerKind::RadialQuadratic, 2, 2, 4).unwrap();
        let model = Model::<f64>::init(spec, &mut Rng::new(1), 0.5).unwrap();
        let (_, tape) = model.forward(&[0.3, 0.9]).unwrap();
        let (g, dx) = model.backward(&tape, &[0.0]).unwrap();
        assert!(dx.iter().all(|&v| v == 0.0));
        for layer in g {
            for t in layer.tensors() {
                assert!(t.iter().all(|&v| v == 0.0));
            }
        }
    }

    #[test]
    fn backward_rejects_mismatched_tape() {
        let spec = NetworkSpec::classifier(LayerKind::Affine, 2, 2, 3).unwrap();
        let model = Model::<f64>::init(spec, &mut Rng::new(1), 0.5).unwrap();
        let (_, mut tape) = model.forward(&[0.3, 0.9]).unwrap();
        tape.inputs.pop();
        assert!(matches!(model.backward(&tape, &[1.0]), Err(Error::State(_))));
    }

    #[test]
    fn center_form_examples() {
        let cf = center_form(&[2.0, 0.0], 1.0, 0.0).unwrap();
        assert_eq!(cf.center, vec![-1.0, 0.0]);
        assert_eq!(cf.kappa, -1.0);

        let cf = center_form(&[0.0, 0.0], 1.0, 3.5).unwrap();
        assert_eq!(cf.center, vec![0.0, 0.0]);
        assert_eq!(cf.kappa, 3.5);

        assert!(matches!(center_form(&[1.0, 1.0], 0.0, 1.0), Err(Error::Singularity)));
    }

    #[test]
    fn center_form_identity_at_random_points() {
        let w = [2.0, 0.0];
        let cf = center_form(&w, 1.0, 0.0).unwrap();
        let mut rng = Rng::new(11);
        for _ in 0..10 {
            let x = [rng.uniform_in(-5.0, 5.0), rng.uniform_in(-5.0, 5.0)];
            let lhs = dot_unchecked(&w, &x) + sqnorm(&x);
            let d = [x[0] - cf.center[0], x[1] - cf.center[1]];
            let rhs = sqnorm(&d) + cf.kappa;
            assert!((lhs - rhs).abs() < 1e-12);
        }
    }

    #[test]
    fn circularity_examples() {
        let (_, p) = radial_single(&[0.0, 0.0], 1.0, -1.0);
        assert_eq!(is_circular(&p), vec![true]);
        let (_, p) = radial_single(&[0.0, 0.0], 1.0, 1.0);
        assert_eq!(is_circular(&p), vec![false]);
        let (_, p) = radial_single(&[1.0, 0.0], 0.0, -1.0);
        assert_eq!(is_circular(&p), vec![false]);
        let (_, p) = radial_single(&[0.0, 0.0], -1.0, -1.0);
        assert_eq!(is_circular(&p), vec![false]);
    }

    #[test]
    fn init_degenerate_and_deterministic() {
        let spec = NetworkSpec::classifier(LayerKind::RadialQuadratic, 2, 2, 6).unwrap();
        let zero = init_params::<f64>(&spec, &mut Rng::new(1), 0.0).unwrap();
        for layer in &zero {
            for t in layer.tensors() {
                assert!(t.iter().all(|&v| v == 0.0));
            }
        }
        let a = init_params::<f64>(&spec, &mut Rng::new(77), 0.05).unwrap();
        let b = init_params::<f64>(&spec, &mut Rng::new(77), 0.05).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|l| l.theta.as_slice().iter().all(|&v| v == 0.0)));
        assert!(init_params::<f64>(&spec, &mut Rng::new(1), -1.0).is_err());
    }

    #[test]
    fn init_empirical_std() {
        let spec = NetworkSpec::new(vec![LayerSpec::new(LayerKind::Affine, 100, 100, Activation::Identity)]).unwrap();
        let p = init_params::<f64>(&spec, &mut Rng::new(3), 0.05).unwrap();
        let w = p[0].weights.as_slice();
        assert_eq!(w.len(), 10_000);
        let mean = w.iter().sum::<f64>() / w.len() as f64;
        let std = (w.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / w.len() as f64).sqrt();
        assert!((std - 0.05).abs() < 0.005, "std {std}");
    }

    #[test]
    fn works_in_f32() {
        let spec = NetworkSpec::classifier(LayerKind::RadialQuadratic, 2, 1, 3).unwrap();
        let model = Model::<f32>::init(spec, &mut Rng::new(2), 0.3).unwrap();
        let (out, tape) = model.forward(&[0.5f32, -0.5]).unwrap();
        assert!(out[0] > 0.0 && out[0] < 1.0);
        let (g, _) = model.backward(&tape, &[1.0f32]).unwrap();
        assert_eq!(g.len(), 2);
    }
}
