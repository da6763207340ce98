//! Small fully-connected networks with hand-written reverse-mode gradients
//! and the two optimizers used by the training schedule.

use rand::Rng;

use crate::error::{GaitError, Result};

/// Probability clamp used by the cross-entropy.
pub const PROB_EPS: f64 = 1e-7;

pub const DEFAULT_LEAKY_SLOPE: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Activation {
    LeakyRelu(f64),
    Sigmoid,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::LeakyRelu(slope) => {
                if x > 0.0 {
                    x
                } else {
                    slope * x
                }
            }
            Activation::Sigmoid => sigmoid(x),
            Activation::Identity => x,
        }
    }

    /// Derivative given the pre-activation and the activation output.
    #[inline]
    pub fn derivative(self, pre: f64, out: f64) -> f64 {
        match self {
            Activation::LeakyRelu(slope) => {
                if pre > 0.0 {
                    1.0
                } else {
                    slope
                }
            }
            Activation::Sigmoid => out * (1.0 - out),
            Activation::Identity => 1.0,
        }
    }

    #[inline]
    fn apply_f32(self, x: f32) -> f32 {
        match self {
            Activation::LeakyRelu(slope) => {
                if x > 0.0 {
                    x
                } else {
                    slope as f32 * x
                }
            }
            Activation::Sigmoid => 1.0 / (1.0 + (-x).exp()),
            Activation::Identity => x,
        }
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + exp(x))` without overflow.
#[inline]
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    // four independent partial sums so the loop vectorizes; the summation
    // order is fixed, results are reproducible
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for i in 0..chunks {
        let j = 4 * i;
        acc[0] += a[j] * b[j];
        acc[1] += a[j + 1] * b[j + 1];
        acc[2] += a[j + 2] * b[j + 2];
        acc[3] += a[j + 3] * b[j + 3];
    }
    let mut tail = 0.0;
    for j in 4 * chunks..a.len() {
        tail += a[j] * b[j];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Fully-connected layer; `weights` is row-major `out_units x in_units`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    in_units: usize,
    out_units: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl DenseLayer {
    pub fn zeros(in_units: usize, out_units: usize) -> Self {
        Self {
            in_units,
            out_units,
            weights: vec![0.0; in_units * out_units],
            biases: vec![0.0; out_units],
        }
    }

    /// Uniform Glorot initialization, zero biases.
    pub fn glorot<R: Rng + ?Sized>(in_units: usize, out_units: usize, rng: &mut R) -> Self {
        let limit = (6.0 / (in_units + out_units) as f64).sqrt();
        let weights = (0..in_units * out_units)
            .map(|_| rng.random_range(-limit..=limit))
            .collect();
        Self {
            in_units,
            out_units,
            weights,
            biases: vec![0.0; out_units],
        }
    }

    pub fn from_parts(
        in_units: usize,
        out_units: usize,
        weights: Vec<f64>,
        biases: Vec<f64>,
    ) -> Result<Self> {
        if weights.len() != in_units * out_units {
            return Err(GaitError::ShapeMismatch {
                expected: in_units * out_units,
                actual: weights.len(),
            });
        }
        if biases.len() != out_units {
            return Err(GaitError::ShapeMismatch {
                expected: out_units,
                actual: biases.len(),
            });
        }
        Ok(Self {
            in_units,
            out_units,
            weights,
            biases,
        })
    }

    pub fn in_units(&self) -> usize {
        self.in_units
    }

    pub fn out_units(&self) -> usize {
        self.out_units
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.biases.len()
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.weights[i * self.in_units..(i + 1) * self.in_units]
    }

    fn pre_activation(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend((0..self.out_units).map(|i| dot(self.row(i), x) + self.biases[i]));
    }
}

/// `act(W x + b)` for a single layer.
pub fn forward(layer: &DenseLayer, act: Activation, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != layer.in_units {
        return Err(GaitError::ShapeMismatch {
            expected: layer.in_units,
            actual: x.len(),
        });
    }
    let mut pre = Vec::with_capacity(layer.out_units);
    layer.pre_activation(x, &mut pre);
    Ok(pre.into_iter().map(|v| act.apply(v)).collect())
}

/// Stack of dense layers, each followed by its activation.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<DenseLayer>,
    activations: Vec<Activation>,
}

/// Cached intermediate values of one forward pass.
#[derive(Debug, Clone, Default)]
pub struct Trace {
    /// `inputs[l]` is the input of layer `l`; the last entry is the output.
    inputs: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
}

impl Trace {
    pub fn input(&self) -> &[f64] {
        &self.inputs[0]
    }

    pub fn output(&self) -> &[f64] {
        self.inputs.last().expect("trace has an output")
    }

    /// Pre-activation of the final layer (the logit for a sigmoid head).
    pub fn last_pre_activation(&self) -> &[f64] {
        self.pre.last().expect("trace has a layer")
    }

    pub fn layer_input(&self, layer: usize) -> &[f64] {
        &self.inputs[layer]
    }

    pub fn pre_activation(&self, layer: usize) -> &[f64] {
        &self.pre[layer]
    }
}

/// Parameter gradients shaped like an [`Mlp`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(net: &Mlp) -> Self {
        Self {
            weights: net.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect(),
            biases: net.layers.iter().map(|l| vec![0.0; l.biases.len()]).collect(),
        }
    }

    pub fn reset(&mut self) {
        for t in self.weights.iter_mut().chain(self.biases.iter_mut()) {
            t.fill(0.0);
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for t in self.weights.iter_mut().chain(self.biases.iter_mut()) {
            t.iter_mut().for_each(|v| *v *= factor);
        }
    }

    /// Tensors in the same order as [`Mlp::tensors_mut`].
    pub fn tensors(&self) -> Vec<&[f64]> {
        self.weights
            .iter()
            .zip(&self.biases)
            .flat_map(|(w, b)| [w.as_slice(), b.as_slice()])
            .collect()
    }

    pub fn flat(&self) -> Vec<f64> {
        self.tensors().concat()
    }
}

impl Mlp {
    pub fn new(layers: Vec<DenseLayer>, activations: Vec<Activation>) -> Result<Self> {
        if layers.is_empty() || layers.len() != activations.len() {
            return Err(GaitError::InvalidParams(format!(
                "{} layers but {} activations",
                layers.len(),
                activations.len()
            )));
        }
        for pair in layers.windows(2) {
            if pair[0].out_units != pair[1].in_units {
                return Err(GaitError::ShapeMismatch {
                    expected: pair[0].out_units,
                    actual: pair[1].in_units,
                });
            }
        }
        Ok(Self {
            layers,
            activations,
        })
    }

    /// Glorot-initialized network with the given layer widths.
    pub fn glorot<R: Rng + ?Sized>(
        widths: &[usize],
        activations: Vec<Activation>,
        rng: &mut R,
    ) -> Result<Self> {
        let layers = widths
            .windows(2)
            .map(|w| DenseLayer::glorot(w[0], w[1], rng))
            .collect();
        Self::new(layers, activations)
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [DenseLayer] {
        &mut self.layers
    }

    pub fn activations(&self) -> &[Activation] {
        &self.activations
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_units
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.out_units)
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(DenseLayer::param_count).sum()
    }

    /// Parameter tensors: weights then biases, layer by layer.
    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| [l.weights.as_mut_slice(), l.biases.as_mut_slice()])
            .collect()
    }

    pub fn tensors(&self) -> Vec<&[f64]> {
        self.layers
            .iter()
            .flat_map(|l| [l.weights.as_slice(), l.biases.as_slice()])
            .collect()
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(GaitError::ShapeMismatch {
                expected: self.input_dim(),
                actual: x.len(),
            });
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let mut cur = x.to_vec();
        let mut pre = Vec::new();
        for (layer, act) in self.layers.iter().zip(&self.activations) {
            layer.pre_activation(&cur, &mut pre);
            cur.clear();
            cur.extend(pre.iter().map(|&v| act.apply(v)));
        }
        Ok(cur)
    }

    pub fn forward_trace(&self, x: &[f64]) -> Result<Trace> {
        self.check_input(x)?;
        let mut inputs = Vec::with_capacity(self.layers.len() + 1);
        let mut pres = Vec::with_capacity(self.layers.len());
        inputs.push(x.to_vec());
        for (layer, act) in self.layers.iter().zip(&self.activations) {
            let mut pre = Vec::with_capacity(layer.out_units);
            layer.pre_activation(inputs.last().unwrap(), &mut pre);
            inputs.push(pre.iter().map(|&v| act.apply(v)).collect());
            pres.push(pre);
        }
        Ok(Trace {
            inputs,
            pre: pres,
        })
    }

    /// Accumulates parameter gradients into `grads` given `dL/d(output)` and
    /// returns `dL/d(input)`.
    pub fn backward(&self, trace: &Trace, grad_output: &[f64], grads: &mut Gradients) -> Vec<f64> {
        let last = self.layers.len() - 1;
        let act = self.activations[last];
        let delta: Vec<f64> = grad_output
            .iter()
            .zip(&trace.pre[last])
            .zip(&trace.inputs[last + 1])
            .map(|((&g, &p), &o)| g * act.derivative(p, o))
            .collect();
        self.backward_from_pre(trace, delta, grads)
    }

    /// Like [`Mlp::backward`] but starting from `dL/d(pre-activation)` of the
    /// final layer, which avoids the sigmoid derivative for logit-based losses.
    pub fn backward_from_pre(
        &self,
        trace: &Trace,
        mut delta: Vec<f64>,
        grads: &mut Gradients,
    ) -> Vec<f64> {
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let input = &trace.inputs[l];
            let gw = &mut grads.weights[l];
            for (i, &d) in delta.iter().enumerate() {
                if d != 0.0 {
                    axpy(d, input, &mut gw[i * layer.in_units..(i + 1) * layer.in_units]);
                }
            }
            for (gb, &d) in grads.biases[l].iter_mut().zip(&delta) {
                *gb += d;
            }
            let mut grad_in = vec![0.0; layer.in_units];
            for (i, &d) in delta.iter().enumerate() {
                if d != 0.0 {
                    axpy(d, layer.row(i), &mut grad_in);
                }
            }
            if l == 0 {
                return grad_in;
            }
            let act = self.activations[l - 1];
            delta = grad_in
                .iter()
                .zip(&trace.pre[l - 1])
                .zip(&trace.inputs[l])
                .map(|((&g, &p), &o)| g * act.derivative(p, o))
                .collect();
        }
        unreachable!("network has at least one layer")
    }

    /// Reduced-precision copy for inference.
    pub fn to_f32(&self) -> MlpF32 {
        MlpF32 {
            layers: self
                .layers
                .iter()
                .map(|l| {
                    (
                        l.in_units,
                        l.weights.iter().map(|&w| w as f32).collect(),
                        l.biases.iter().map(|&b| b as f32).collect(),
                    )
                })
                .collect(),
            activations: self.activations.clone(),
        }
    }
}

/// 32-bit inference snapshot of an [`Mlp`].
#[derive(Debug, Clone)]
pub struct MlpF32 {
    layers: Vec<(usize, Vec<f32>, Vec<f32>)>,
    activations: Vec<Activation>,
}

impl MlpF32 {
    pub fn forward(&self, x: &[f32]) -> Result<Vec<f32>> {
        let mut cur = x.to_vec();
        for ((in_units, w, b), act) in self.layers.iter().zip(&self.activations) {
            if cur.len() != *in_units {
                return Err(GaitError::ShapeMismatch {
                    expected: *in_units,
                    actual: cur.len(),
                });
            }
            cur = b
                .iter()
                .enumerate()
                .map(|(i, &bi)| {
                    let row = &w[i * in_units..(i + 1) * in_units];
                    let s: f32 = row.iter().zip(&cur).map(|(a, c)| a * c).sum();
                    act.apply_f32(s + bi)
                })
                .collect();
        }
        Ok(cur)
    }
}

/// Mean binary cross-entropy over elements, predictions clamped to
/// `[PROB_EPS, 1 - PROB_EPS]`.
pub fn cross_entropy(target: &[f64], predicted: &[f64]) -> f64 {
    debug_assert_eq!(target.len(), predicted.len());
    let sum: f64 = target
        .iter()
        .zip(predicted)
        .map(|(&x, &p)| {
            let p = p.clamp(PROB_EPS, 1.0 - PROB_EPS);
            -x * p.ln() - (1.0 - x) * (1.0 - p).ln()
        })
        .sum();
    sum / target.len() as f64
}

/// Gradient of [`cross_entropy`] with respect to `predicted`; zero where the
/// clamp is active.
pub fn cross_entropy_grad(target: &[f64], predicted: &[f64]) -> Vec<f64> {
    let m = target.len() as f64;
    target
        .iter()
        .zip(predicted)
        .map(|(&x, &p)| {
            if p < PROB_EPS || p > 1.0 - PROB_EPS {
                0.0
            } else {
                (-x / p + (1.0 - x) / (1.0 - p)) / m
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn moments(&self) -> (&[Vec<f64>], &[Vec<f64>]) {
        (&self.m, &self.v)
    }

    pub(crate) fn set_moments(&mut self, m: Vec<Vec<f64>>, v: Vec<Vec<f64>>) {
        self.m = m;
        self.v = v;
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sgd {
    pub lr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum OptimizerKind {
    Adam(Adam),
    Sgd(Sgd),
}

/// An optimizer together with its step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub kind: OptimizerKind,
    pub step: u64,
}

impl OptimizerState {
    pub fn adam(lr: f64) -> Self {
        Self {
            kind: OptimizerKind::Adam(Adam::new(lr)),
            step: 0,
        }
    }

    pub fn sgd(lr: f64) -> Self {
        Self {
            kind: OptimizerKind::Sgd(Sgd { lr }),
            step: 0,
        }
    }

    pub fn learning_rate(&self) -> f64 {
        match &self.kind {
            OptimizerKind::Adam(a) => a.lr,
            OptimizerKind::Sgd(s) => s.lr,
        }
    }

    /// Applies one update to `params` in place.
    pub fn step(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]]) -> Result<()> {
        if params.len() != grads.len() {
            return Err(GaitError::ShapeMismatch {
                expected: params.len(),
                actual: grads.len(),
            });
        }
        for (p, g) in params.iter().zip(grads) {
            if p.len() != g.len() {
                return Err(GaitError::ShapeMismatch {
                    expected: p.len(),
                    actual: g.len(),
                });
            }
        }
        self.step += 1;
        match &mut self.kind {
            OptimizerKind::Sgd(sgd) => {
                for (p, g) in params.iter_mut().zip(grads) {
                    axpy(-sgd.lr, g, p);
                }
            }
            OptimizerKind::Adam(adam) => adam_update(adam, self.step, params, grads)?,
        }
        Ok(())
    }
}

fn adam_update(adam: &mut Adam, t: u64, params: &mut [&mut [f64]], grads: &[&[f64]]) -> Result<()> {
    if adam.m.is_empty() {
        adam.m = params.iter().map(|p| vec![0.0; p.len()]).collect();
        adam.v = adam.m.clone();
    }
    let shapes_match = adam.m.len() == params.len()
        && adam.m.iter().zip(params.iter()).all(|(m, p)| m.len() == p.len());
    if !shapes_match {
        return Err(GaitError::ShapeMismatch {
            expected: adam.m.iter().map(Vec::len).sum(),
            actual: params.iter().map(|p| p.len()).sum(),
        });
    }
    let (b1, b2) = (adam.beta1, adam.beta2);
    let bc1 = 1.0 - b1.powi(t as i32);
    let bc2 = 1.0 - b2.powi(t as i32);
    for (((p, g), m), v) in params
        .iter_mut()
        .zip(grads)
        .zip(adam.m.iter_mut())
        .zip(adam.v.iter_mut())
    {
        for i in 0..p.len() {
            let gi = g[i];
            m[i] = b1 * m[i] + (1.0 - b1) * gi;
            v[i] = b2 * v[i] + (1.0 - b2) * gi * gi;
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            p[i] -= adam.lr * m_hat / (v_hat.sqrt() + adam.eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_net(seed: u64, widths: &[usize]) -> Mlp {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut acts = vec![Activation::LeakyRelu(0.2); widths.len() - 2];
        acts.push(Activation::Sigmoid);
        let mut net = Mlp::glorot(widths, acts, &mut rng).unwrap();
        for layer in net.layers_mut() {
            for b in &mut layer.biases {
                *b = rng.random_range(-0.5..0.5);
            }
        }
        net
    }

    #[test]
    fn identity_layer_passes_input_through() {
        let mut layer = DenseLayer::zeros(3, 3);
        for i in 0..3 {
            layer.weights[i * 3 + i] = 1.0;
        }
        let x = [0.3, -1.5, 2.0];
        assert_eq!(forward(&layer, Activation::Identity, &x).unwrap(), x.to_vec());
    }

    #[test]
    fn zero_layer_sigmoid_is_half() {
        let layer = DenseLayer::zeros(5, 4);
        let y = forward(&layer, Activation::Sigmoid, &[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert_eq!(y, vec![0.5; 4]);
        assert!(matches!(
            forward(&layer, Activation::Sigmoid, &[1.0]),
            Err(GaitError::ShapeMismatch { expected: 5, actual: 1 })
        ));
    }

    #[test]
    fn forward_matches_naive_loops() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut layer = DenseLayer::glorot(13, 7, &mut rng);
        layer.biases.iter_mut().for_each(|b| *b = rng.random_range(-1.0..1.0));
        let x: Vec<f64> = (0..13).map(|_| rng.random_range(-2.0..2.0)).collect();
        let y = forward(&layer, Activation::LeakyRelu(0.2), &x).unwrap();
        for i in 0..7 {
            let mut s = layer.biases[i];
            for j in 0..13 {
                s += layer.weights[i * 13 + j] * x[j];
            }
            let expected = if s > 0.0 { s } else { 0.2 * s };
            assert!((y[i] - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn leaky_relu_derivative() {
        let act = Activation::LeakyRelu(0.2);
        assert_eq!(act.derivative(-3.0, act.apply(-3.0)), 0.2);
        assert_eq!(act.derivative(0.7, act.apply(0.7)), 1.0);
    }

    #[test]
    fn sigmoid_and_softplus_are_stable() {
        assert!(sigmoid(-800.0) >= 0.0 && sigmoid(800.0) <= 1.0);
        assert!(sigmoid(30.0) < 1.0 && sigmoid(-30.0) > 0.0);
        assert!((softplus(0.0) - 2f64.ln()).abs() < 1e-15);
        assert_eq!(softplus(1000.0), 1000.0);
        assert!(softplus(-1000.0) >= 0.0);
    }

    #[test]
    fn cross_entropy_reference_values() {
        let half = vec![0.5; 8];
        assert!((cross_entropy(&half, &half) - 2f64.ln()).abs() < 1e-15);
        assert!((cross_entropy(&[1.0], &[0.5]) + 0.5f64.ln()).abs() < 1e-15);
        assert!(cross_entropy(&[1.0, 0.0], &[0.0, 1.0]).is_finite());
    }

    #[test]
    fn cross_entropy_matches_elementwise_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x: Vec<f64> = (0..50).map(|_| rng.random_range(0.0..=1.0)).collect();
        let p: Vec<f64> = (0..50).map(|_| rng.random_range(0.01..0.99)).collect();
        let mut total = 0.0;
        for i in 0..50 {
            total += -x[i] * p[i].ln() - (1.0 - x[i]) * (1.0 - p[i]).ln();
        }
        assert!((cross_entropy(&x, &p) - total / 50.0).abs() < 1e-12);
    }

    #[test]
    fn constant_network_has_zero_input_gradient() {
        let net = Mlp::new(
            vec![DenseLayer::zeros(4, 3), DenseLayer::zeros(3, 1)],
            vec![Activation::LeakyRelu(0.2), Activation::Sigmoid],
        )
        .unwrap();
        let trace = net.forward_trace(&[0.1, 0.2, 0.3, 0.4]).unwrap();
        let mut grads = Gradients::zeros_like(&net);
        let gx = net.backward(&trace, &[1.0], &mut grads);
        assert_eq!(gx, vec![0.0; 4]);
    }

    #[test]
    fn backward_matches_central_differences() {
        // L = sum_k c_k * y_k for fixed c
        for seed in 0..5 {
            let mut net = random_net(seed, &[6, 5, 4]);
            let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
            let x: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
            let c: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
            let loss = |n: &Mlp, x: &[f64]| dot(&n.forward(x).unwrap(), &c);

            let trace = net.forward_trace(&x).unwrap();
            let mut grads = Gradients::zeros_like(&net);
            let gx = net.backward(&trace, &c, &mut grads);
            let analytic = grads.flat();

            let h = 1e-5;
            let mut idx = 0;
            for t in 0..net.tensors().len() {
                for i in 0..net.tensors()[t].len() {
                    let orig = net.tensors()[t][i];
                    net.tensors_mut()[t][i] = orig + h;
                    let up = loss(&net, &x);
                    net.tensors_mut()[t][i] = orig - h;
                    let down = loss(&net, &x);
                    net.tensors_mut()[t][i] = orig;
                    let fd = (up - down) / (2.0 * h);
                    let a = analytic[idx];
                    assert!((a - fd).abs() <= 1e-4 * a.abs().max(fd.abs()).max(1e-6));
                    idx += 1;
                }
            }
            for j in 0..6 {
                let mut xp = x.clone();
                xp[j] += h;
                let mut xm = x.clone();
                xm[j] -= h;
                let fd = (loss(&net, &xp) - loss(&net, &xm)) / (2.0 * h);
                assert!((gx[j] - fd).abs() <= 1e-4 * gx[j].abs().max(fd.abs()).max(1e-6));
            }
        }
    }

    #[test]
    fn sgd_steps_accumulate() {
        let mut opt = OptimizerState::sgd(0.1);
        let mut p = vec![1.0, 2.0];
        opt.step(&mut [&mut p], &[&[1.0, 0.0]]).unwrap();
        assert!((p[0] - 0.9).abs() < 1e-15);
        assert_eq!(p[1], 2.0);

        let mut q = vec![0.0];
        let gs = [0.5, -1.0, 2.0, 0.25];
        for g in gs {
            opt.step(&mut [&mut q], &[&[g]]).unwrap();
        }
        let expected = -0.1 * gs.iter().sum::<f64>();
        assert!((q[0] - expected).abs() < 1e-15);
        assert_eq!(opt.step, 5);
    }

    #[test]
    fn adam_zero_gradient_is_noop() {
        let mut opt = OptimizerState::adam(1e-3);
        let mut p = vec![0.4, -0.2];
        opt.step(&mut [&mut p], &[&[0.0, 0.0]]).unwrap();
        assert_eq!(p, vec![0.4, -0.2]);
    }

    #[test]
    fn adam_first_step_moves_by_lr() {
        // m_hat = g, v_hat = g^2, so the step is lr * g / (|g| + eps)
        let mut opt = OptimizerState::adam(1e-3);
        let g = [0.5, -2.0, 1e-3];
        let mut p = vec![0.0; 3];
        opt.step(&mut [&mut p], &[&g]).unwrap();
        for (pi, gi) in p.iter().zip(g) {
            let expected = -1e-3 * gi / (gi.abs() + 1e-8);
            assert!((pi - expected).abs() < 1e-15, "{pi} vs {expected}");
            assert!((pi.abs() - 1e-3).abs() < 1e-7);
        }
    }

    #[test]
    fn adam_is_deterministic_and_checks_shapes() {
        let run = || {
            let mut opt = OptimizerState::adam(1e-2);
            let mut p = vec![1.0, -1.0, 0.5];
            for k in 0..10 {
                let g = [k as f64 * 0.1, -0.3, (k as f64).sin()];
                opt.step(&mut [&mut p], &[&g]).unwrap();
            }
            p
        };
        assert_eq!(run(), run());

        let mut opt = OptimizerState::adam(1e-2);
        let mut p = vec![1.0];
        assert!(opt.step(&mut [&mut p], &[&[1.0, 2.0]]).is_err());
    }

    #[test]
    fn f32_inference_tracks_f64() {
        let net = random_net(9, &[16, 8, 4]);
        let x: Vec<f64> = (0..16).map(|i| i as f64 / 16.0).collect();
        let y64 = net.forward(&x).unwrap();
        let x32: Vec<f32> = x.iter().map(|&v| v as f32).collect();
        let y32 = net.to_f32().forward(&x32).unwrap();
        for (a, b) in y64.iter().zip(&y32) {
            assert!((a - f64::from(*b)).abs() < 1e-5);
        }
    }
}
