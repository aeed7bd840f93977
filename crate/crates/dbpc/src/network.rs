//! Network structure: layer specifications and the shared weight blocks.
//!
//! A network with L layers owns L-1 weight blocks. Block `j` maps the
//! activity of layer `j` to the pre-activation of layer `j+1`; the same
//! block's adjoint maps layer `j+1` activity back to a layer-`j`-shaped
//! pre-activation. There are no biases.
//!
//! Layers and interfaces are numbered from 1, the way architecture tables
//! read: layer 1 is the input, layer L the classification output, and
//! interface `j` sits between layers `j` and `j+1`.

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::{conv2d_adjoint_same_batch, conv2d_same_batch, matmul_batch, ConvKernel, Tensor};

/// One layer of the architecture.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerSpec {
    /// Flat layer of `units` neurons.
    FullyConnected { units: usize },
    /// Feature-map layer of `channels` channels; `kernel` is the (odd) size
    /// of the kernel producing this layer from the previous one. Ignored on
    /// an input layer.
    Convolutional { channels: usize, kernel: usize },
    /// Final flat classification layer fed by flattening the preceding
    /// convolutional stack.
    Classifier { classes: usize },
}

impl LayerSpec {
    pub fn size(&self) -> usize {
        match *self {
            LayerSpec::FullyConnected { units } => units,
            LayerSpec::Convolutional { channels, .. } => channels,
            LayerSpec::Classifier { classes } => classes,
        }
    }
}

/// Dense tied weights, stored in both layouts so the forward map and its
/// adjoint run at the same speed. The `adjoint` matrix is always the exact
/// transpose of `forward`; every mutation goes through methods that update
/// the two in lockstep.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseWeights {
    forward: Tensor,
    adjoint: Tensor,
}

impl DenseWeights {
    fn zeros(n_out: usize, n_in: usize) -> Self {
        DenseWeights {
            forward: Tensor::zeros(&[n_out, n_in]),
            adjoint: Tensor::zeros(&[n_in, n_out]),
        }
    }

    /// The matrix, `[n_out, n_in]` row-major.
    pub fn matrix(&self) -> &Tensor {
        &self.forward
    }

    /// Its transpose, `[n_in, n_out]` row-major.
    pub fn adjoint_matrix(&self) -> &Tensor {
        &self.adjoint
    }

    fn set_values(&mut self, values: &[f64]) {
        let (n_out, n_in) = (self.forward.shape()[0], self.forward.shape()[1]);
        self.forward.data_mut().copy_from_slice(values);
        let adj = self.adjoint.data_mut();
        for r in 0..n_out {
            for c in 0..n_in {
                adj[c * n_out + r] = values[r * n_in + c];
            }
        }
    }

    fn add_scaled(&mut self, delta: &[f64], scale: f64) {
        let (n_out, n_in) = (self.forward.shape()[0], self.forward.shape()[1]);
        for (w, &d) in self.forward.data_mut().iter_mut().zip(delta) {
            *w += scale * d;
        }
        let adj = self.adjoint.data_mut();
        for r in 0..n_out {
            for c in 0..n_in {
                adj[c * n_out + r] += scale * delta[r * n_in + c];
            }
        }
    }
}

/// A tied weight block: dense matrix or convolution kernel.
#[derive(Debug, Clone, PartialEq)]
pub enum WeightBlock {
    Dense(DenseWeights),
    Kernel(ConvKernel),
}

impl WeightBlock {
    pub fn weight_count(&self) -> usize {
        match self {
            WeightBlock::Dense(w) => w.forward.len(),
            WeightBlock::Kernel(k) => k.weight_count(),
        }
    }

    pub fn values(&self) -> &[f64] {
        match self {
            WeightBlock::Dense(w) => w.forward.data(),
            WeightBlock::Kernel(k) => k.weights().data(),
        }
    }

    /// Overwrite the block's weights (storage order of [`Self::values`]).
    pub fn set_values(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.weight_count() {
            return Err(Error::Shape(format!(
                "{} values for a block of {}",
                values.len(),
                self.weight_count()
            )));
        }
        match self {
            WeightBlock::Dense(w) => w.set_values(values),
            WeightBlock::Kernel(k) => k.weights_mut().data_mut().copy_from_slice(values),
        }
        Ok(())
    }
}

/// Learning-rule settings. Factors weight the four error terms, step sizes
/// drive the two gradient descents, and `inference_steps` is how many times
/// activities are relaxed per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Hyperparams {
    /// Weight of feedforward prediction errors in the representation energy.
    pub forward_factor: f64,
    /// Weight of feedback prediction errors in the representation energy.
    pub backward_factor: f64,
    /// Weight of the feedforward (classification) term in the weight energy.
    pub class_factor: f64,
    /// Weight of the feedback (reconstruction) term in the weight energy.
    pub recon_factor: f64,
    /// Step size for activity updates.
    pub activity_lr: f64,
    /// Step size for weight updates.
    pub weight_lr: f64,
    /// Activity-relaxation iterations per sample.
    pub inference_steps: usize,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            forward_factor: 1.0,
            backward_factor: 1.0,
            class_factor: 1.0,
            recon_factor: 1.0,
            activity_lr: 0.1,
            weight_lr: 1e-3,
            inference_steps: 20,
            batch_size: 32,
            epochs: 50,
            seed: 0,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        let nonneg = [
            ("forward_factor", self.forward_factor),
            ("backward_factor", self.backward_factor),
            ("class_factor", self.class_factor),
            ("recon_factor", self.recon_factor),
            ("activity_lr", self.activity_lr),
            ("weight_lr", self.weight_lr),
        ];
        for (name, v) in nonneg {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Config(format!("{name} must be >= 0, got {v}")));
            }
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        Ok(())
    }
}

/// Layer specifications plus one shared weight block per adjacent pair.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    specs: Vec<LayerSpec>,
    input_hw: (usize, usize),
    weights: Vec<WeightBlock>,
}

fn validate_specs(specs: &[LayerSpec], input_hw: (usize, usize)) -> Result<()> {
    if specs.len() < 2 {
        return Err(Error::Config(format!(
            "a network needs at least 2 layers, got {}",
            specs.len()
        )));
    }
    for (idx, spec) in specs.iter().enumerate() {
        let l = idx + 1;
        if spec.size() == 0 {
            return Err(Error::Config(format!("layer {l} has size 0")));
        }
        match *spec {
            LayerSpec::Convolutional { kernel, .. } => {
                if idx > 0 && (kernel == 0 || kernel % 2 == 0) {
                    return Err(Error::Config(format!(
                        "layer {l}: convolution kernel must be odd, got {kernel}"
                    )));
                }
                if input_hw.0 == 0 || input_hw.1 == 0 {
                    return Err(Error::Config(
                        "convolutional layers need a nonzero input height/width".into(),
                    ));
                }
                if idx > 0 && !matches!(specs[idx - 1], LayerSpec::Convolutional { .. }) {
                    return Err(Error::Config(format!(
                        "layer {l}: convolutional layers must form a prefix of the network"
                    )));
                }
            }
            LayerSpec::Classifier { .. } => {
                if idx + 1 != specs.len() {
                    return Err(Error::Config(format!(
                        "layer {l}: classifier must be the last layer"
                    )));
                }
                if !matches!(specs[idx - 1], LayerSpec::Convolutional { .. }) {
                    return Err(Error::Config(format!(
                        "layer {l}: classifier must follow a convolutional layer \
                         (use a fully-connected layer otherwise)"
                    )));
                }
            }
            LayerSpec::FullyConnected { .. } => {
                if idx > 0 && matches!(specs[idx - 1], LayerSpec::Convolutional { .. }) {
                    return Err(Error::Config(format!(
                        "layer {l}: a fully-connected layer cannot follow a convolutional \
                         one; use a classifier layer for the flattening head"
                    )));
                }
            }
        }
    }
    Ok(())
}

impl NetworkParams {
    /// Build a network with weights drawn uniformly from ±√(6/fan_in).
    pub fn new(specs: Vec<LayerSpec>, input_hw: (usize, usize), seed: u64) -> Result<Self> {
        let mut net = NetworkParams::zeroed(specs, input_hw)?;
        let mut rng = Rng::seeded(seed, &[0x5745_4947_4854]); // weight stream
        for j in 0..net.weights.len() {
            let fan_in = net.fan_in(j + 1);
            let bound = (6.0 / fan_in as f64).sqrt();
            let values: Vec<f64> = (0..net.weights[j].weight_count())
                .map(|_| rng.uniform(-bound, bound))
                .collect();
            net.weights[j].set_values(&values)?;
        }
        Ok(net)
    }

    /// Build a network with all-zero weights (checkpoint loading, tests).
    pub fn zeroed(specs: Vec<LayerSpec>, input_hw: (usize, usize)) -> Result<Self> {
        validate_specs(&specs, input_hw)?;
        let mut weights = Vec::with_capacity(specs.len() - 1);
        let (h, w) = input_hw;
        for idx in 0..specs.len() - 1 {
            let block = match (specs[idx], specs[idx + 1]) {
                (LayerSpec::FullyConnected { units: a }, LayerSpec::FullyConnected { units: b }) => {
                    WeightBlock::Dense(DenseWeights::zeros(b, a))
                }
                (
                    LayerSpec::Convolutional { channels: a, .. },
                    LayerSpec::Convolutional {
                        channels: b,
                        kernel,
                    },
                ) => WeightBlock::Kernel(ConvKernel::new(b, a, kernel)?),
                (LayerSpec::Convolutional { channels: a, .. }, LayerSpec::Classifier { classes }) => {
                    WeightBlock::Dense(DenseWeights::zeros(classes, a * h * w))
                }
                (from, to) => {
                    return Err(Error::Config(format!(
                        "unsupported layer pair at interface {}: {from:?} -> {to:?}",
                        idx + 1
                    )))
                }
            };
            weights.push(block);
        }
        Ok(NetworkParams {
            specs,
            input_hw,
            weights,
        })
    }

    pub fn layer_count(&self) -> usize {
        self.specs.len()
    }

    pub fn interface_count(&self) -> usize {
        self.weights.len()
    }

    pub fn specs(&self) -> &[LayerSpec] {
        &self.specs
    }

    pub fn input_hw(&self) -> (usize, usize) {
        self.input_hw
    }

    pub fn spec(&self, layer: usize) -> &LayerSpec {
        &self.specs[layer - 1]
    }

    /// Shape of one sample's activity at `layer` (1-based).
    pub fn layer_shape(&self, layer: usize) -> Vec<usize> {
        let (h, w) = self.input_hw;
        match *self.spec(layer) {
            LayerSpec::FullyConnected { units } => vec![units],
            LayerSpec::Convolutional { channels, .. } => vec![channels, h, w],
            LayerSpec::Classifier { classes } => vec![classes],
        }
    }

    /// Batched shape of activity at `layer`.
    pub fn batched_shape(&self, layer: usize, batch: usize) -> Vec<usize> {
        let mut s = self.layer_shape(layer);
        s.push(batch);
        s
    }

    pub fn layer_units(&self, layer: usize) -> usize {
        self.layer_shape(layer).iter().product()
    }

    fn check_interface(&self, interface: usize) -> Result<()> {
        if interface == 0 || interface > self.weights.len() {
            return Err(Error::Index(format!(
                "interface {interface} (network has {})",
                self.weights.len()
            )));
        }
        Ok(())
    }

    pub fn block(&self, interface: usize) -> &WeightBlock {
        &self.weights[interface - 1]
    }

    pub fn blocks(&self) -> &[WeightBlock] {
        &self.weights
    }

    pub fn block_mut(&mut self, interface: usize) -> &mut WeightBlock {
        &mut self.weights[interface - 1]
    }

    /// Fan-in of the map at `interface` (inputs feeding each output unit).
    fn fan_in(&self, interface: usize) -> usize {
        match &self.weights[interface - 1] {
            WeightBlock::Dense(w) => w.matrix().shape()[1],
            WeightBlock::Kernel(k) => k.in_channels() * k.size() * k.size(),
        }
    }

    /// Total number of scalar weights.
    pub fn param_count(&self) -> usize {
        self.weights.iter().map(|b| b.weight_count()).sum()
    }

    /// Forward map of `interface`: layer-`j` activity (batched) to the
    /// pre-activation of layer `j+1`.
    pub fn forward_interface(&self, interface: usize, y: &Tensor, threads: usize) -> Result<Tensor> {
        self.check_interface(interface)?;
        let batch = *y.shape().last().unwrap();
        match &self.weights[interface - 1] {
            WeightBlock::Dense(w) => {
                let flat = y
                    .clone()
                    .reshaped(&[self.layer_units(interface), batch])?;
                let out = matmul_batch(w.matrix(), &flat, threads)?;
                out.reshaped(&self.batched_shape(interface + 1, batch))
            }
            WeightBlock::Kernel(k) => conv2d_same_batch(y, k, threads),
        }
    }

    /// Adjoint map of `interface`: layer-`j+1` activity (batched) to a
    /// layer-`j`-shaped pre-activation. Uses the same weight block as
    /// [`NetworkParams::forward_interface`].
    pub fn adjoint_interface(&self, interface: usize, v: &Tensor, threads: usize) -> Result<Tensor> {
        self.check_interface(interface)?;
        let batch = *v.shape().last().unwrap();
        match &self.weights[interface - 1] {
            WeightBlock::Dense(w) => {
                let flat = v
                    .clone()
                    .reshaped(&[self.layer_units(interface + 1), batch])?;
                let out = matmul_batch(w.adjoint_matrix(), &flat, threads)?;
                out.reshaped(&self.batched_shape(interface, batch))
            }
            WeightBlock::Kernel(k) => conv2d_adjoint_same_batch(v, k, threads),
        }
    }

    /// `weights[interface] += scale * delta`, where `delta` is weight-shaped.
    pub fn apply_weight_step(&mut self, interface: usize, delta: &Tensor, scale: f64) -> Result<()> {
        self.check_interface(interface)?;
        let block = &mut self.weights[interface - 1];
        if delta.len() != block.weight_count() {
            return Err(Error::Shape(format!(
                "weight delta has {} values, block has {}",
                delta.len(),
                block.weight_count()
            )));
        }
        match block {
            WeightBlock::Dense(w) => w.add_scaled(delta.data(), scale),
            WeightBlock::Kernel(k) => {
                for (w, &d) in k.weights_mut().data_mut().iter_mut().zip(delta.data()) {
                    *w += scale * d;
                }
            }
        }
        Ok(())
    }

    /// One-line architecture summary, e.g. `fc:784-fc:1000-fc:10`.
    pub fn describe(&self) -> String {
        self.specs
            .iter()
            .map(|s| match *s {
                LayerSpec::FullyConnected { units } => format!("fc:{units}"),
                LayerSpec::Convolutional { channels, kernel } => {
                    format!("conv:{channels}:{kernel}")
                }
                LayerSpec::Classifier { classes } => format!("classifier:{classes}"),
            })
            .collect::<Vec<_>>()
            .join("-")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::presets;
    use crate::tensor::{matmul, matmul_transpose};

    #[test]
    fn fcn_param_count_matches_closed_form() {
        let net = presets::fcn_mnist(0).unwrap();
        assert_eq!(net.param_count(), 1_225_000);
    }

    #[test]
    fn cnn_mnist_param_count_matches_closed_form() {
        let net = presets::cnn_mnist(0).unwrap();
        assert_eq!(net.param_count(), 424_848);
    }

    #[test]
    fn cnn_fashion_param_count_matches_closed_form() {
        let net = presets::cnn_fashion(0).unwrap();
        assert_eq!(net.param_count(), 1_003_920);
    }

    #[test]
    fn documented_defaults_are_pinned() {
        let hp = Hyperparams::default();
        assert_eq!(hp.forward_factor, 1.0);
        assert_eq!(hp.backward_factor, 1.0);
        assert_eq!(hp.class_factor, 1.0);
        assert_eq!(hp.recon_factor, 1.0);
        assert_eq!(hp.activity_lr, 0.1);
        assert_eq!(hp.weight_lr, 1e-3);
        assert_eq!(hp.inference_steps, 20);
        assert_eq!(hp.batch_size, 32);
        assert_eq!(hp.epochs, 50);
    }

    #[test]
    fn init_respects_fan_in_bound() {
        let net = NetworkParams::new(
            vec![
                LayerSpec::FullyConnected { units: 24 },
                LayerSpec::FullyConnected { units: 6 },
            ],
            (0, 0),
            9,
        )
        .unwrap();
        let bound = (6.0 / 24.0_f64).sqrt();
        assert!(net
            .block(1)
            .values()
            .iter()
            .all(|v| v.abs() <= bound && *v != 0.0));
    }

    #[test]
    fn init_is_seed_deterministic() {
        let mk = || presets::fcn(&[5, 4, 3], 77).unwrap();
        assert_eq!(mk(), mk());
    }

    #[test]
    fn forward_and_adjoint_are_tied_fc() {
        let net = presets::fcn(&[4, 6, 3], 5).unwrap();
        let y = Tensor::from_vec(&[4], vec![0.3, -0.1, 1.0, 0.7]).unwrap();
        let v = Tensor::from_vec(&[6], vec![0.2, 0.4, -0.6, 0.1, 0.0, 0.9]).unwrap();
        let fwd = net
            .forward_interface(1, &y.clone().reshaped(&[4, 1]).unwrap(), 1)
            .unwrap();
        let adj = net
            .adjoint_interface(1, &v.clone().reshaped(&[6, 1]).unwrap(), 1)
            .unwrap();
        let lhs: f64 = fwd.data().iter().zip(v.data()).map(|(a, b)| a * b).sum();
        let rhs: f64 = adj.data().iter().zip(y.data()).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() <= 1e-12 * (lhs.abs() + 1.0));
        // and both match the plain matrix ops
        let w = match net.block(1) {
            WeightBlock::Dense(w) => w.matrix().clone(),
            _ => unreachable!(),
        };
        assert_eq!(fwd.data(), matmul(&w, &y).unwrap().data());
        assert_eq!(adj.data(), matmul_transpose(&w, &v).unwrap().data());
    }

    #[test]
    fn dense_layouts_stay_transposed_through_updates() {
        let mut net = presets::fcn(&[5, 7, 3], 23).unwrap();
        let delta = Tensor::from_vec(&[7, 5], (0..35).map(|i| i as f64 * 0.01).collect()).unwrap();
        net.apply_weight_step(1, &delta, -0.5).unwrap();
        for j in 1..=net.interface_count() {
            let w = match net.block(j) {
                WeightBlock::Dense(w) => w,
                _ => unreachable!(),
            };
            let (n_out, n_in) = (w.matrix().shape()[0], w.matrix().shape()[1]);
            for r in 0..n_out {
                for c in 0..n_in {
                    assert_eq!(
                        w.matrix().data()[r * n_in + c],
                        w.adjoint_matrix().data()[c * n_out + r]
                    );
                }
            }
        }
    }

    #[test]
    fn classifier_head_flattens_conv_activity() {
        let net = presets::cnn(&[(1, 0), (3, 3)], 5, (4, 4), 11).unwrap();
        assert_eq!(net.layer_shape(2), vec![3, 4, 4]);
        assert_eq!(net.layer_shape(3), vec![5]);
        assert_eq!(net.block(2).weight_count(), 5 * 3 * 4 * 4);
        let y = Tensor::zeros(&[3, 4, 4, 2]);
        let out = net.forward_interface(2, &y, 1).unwrap();
        assert_eq!(out.shape(), &[5, 2]);
        let back = net.adjoint_interface(2, &out, 1).unwrap();
        assert_eq!(back.shape(), &[3, 4, 4, 2]);
    }

    #[test]
    fn invalid_architectures_rejected() {
        // classifier after fc
        assert!(NetworkParams::zeroed(
            vec![
                LayerSpec::FullyConnected { units: 4 },
                LayerSpec::Classifier { classes: 2 },
            ],
            (0, 0),
        )
        .is_err());
        // fc between convs
        assert!(NetworkParams::zeroed(
            vec![
                LayerSpec::Convolutional { channels: 1, kernel: 3 },
                LayerSpec::FullyConnected { units: 4 },
                LayerSpec::Convolutional { channels: 2, kernel: 3 },
            ],
            (4, 4),
        )
        .is_err());
        // even kernel
        assert!(NetworkParams::zeroed(
            vec![
                LayerSpec::Convolutional { channels: 1, kernel: 3 },
                LayerSpec::Convolutional { channels: 2, kernel: 4 },
            ],
            (4, 4),
        )
        .is_err());
        // single layer
        assert!(
            NetworkParams::zeroed(vec![LayerSpec::FullyConnected { units: 4 }], (0, 0)).is_err()
        );
    }

    #[test]
    fn interface_index_checked() {
        let net = presets::fcn(&[3, 2], 0).unwrap();
        let y = Tensor::zeros(&[3, 1]);
        assert!(net.forward_interface(0, &y, 1).is_err());
        assert!(net.forward_interface(2, &y, 1).is_err());
    }
}
