//! Per-layer activities with clamp flags, for one sample or a minibatch.

use crate::error::{Error, Result};
use crate::network::NetworkParams;
use crate::tensor::{relu, Tensor};

/// Activities `y_1 .. y_L` of one network, over a batch. Clamped layers are
/// pinned to external data (input image, one-hot label) and are never
/// touched by relaxation.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationState {
    y: Vec<Tensor>,
    clamped: Vec<bool>,
    batch: usize,
}

impl ActivationState {
    /// All-zero state with nothing clamped. Building block for tests and
    /// custom inference schemes.
    pub fn zeroed(params: &NetworkParams, batch: usize) -> Self {
        let layers = params.layer_count();
        ActivationState {
            y: (1..=layers)
                .map(|l| Tensor::zeros(&params.batched_shape(l, batch)))
                .collect(),
            clamped: vec![false; layers],
            batch,
        }
    }

    /// Training state: layer 1 clamped to `input`, layer L clamped to
    /// `target`, interior layers filled by one feedforward sweep.
    pub fn training(
        params: &NetworkParams,
        input: Tensor,
        target: Tensor,
        threads: usize,
    ) -> Result<Self> {
        let batch = batch_of(params, 1, &input)?;
        let tb = batch_of(params, params.layer_count(), &target)?;
        if tb != batch {
            return Err(Error::Shape(format!(
                "input batch {batch} does not match target batch {tb}"
            )));
        }
        let mut state = ActivationState::zeroed(params, batch);
        state.y[0] = input;
        state.clamped[0] = true;
        let last = params.layer_count() - 1;
        state.y[last] = target;
        state.clamped[last] = true;
        state.feedforward_init(params, threads)?;
        Ok(state)
    }

    /// Test state: only layer 1 clamped, everything else free and filled by
    /// one feedforward sweep.
    pub fn testing(params: &NetworkParams, input: Tensor, threads: usize) -> Result<Self> {
        let batch = batch_of(params, 1, &input)?;
        let mut state = ActivationState::zeroed(params, batch);
        state.y[0] = input;
        state.clamped[0] = true;
        state.feedforward_init(params, threads)?;
        Ok(state)
    }

    /// One feedforward sweep: for each free layer from 2 upward, replace its
    /// activity with the feedforward prediction from the layer below. With
    /// zero relaxation steps, classification then coincides with a plain
    /// feedforward pass.
    pub fn feedforward_init(&mut self, params: &NetworkParams, threads: usize) -> Result<()> {
        for l in 2..=params.layer_count() {
            let pre = params.forward_interface(l - 1, &self.y[l - 2], threads)?;
            if !self.clamped[l - 1] {
                self.y[l - 1] = relu(&pre);
            }
        }
        Ok(())
    }

    pub fn batch(&self) -> usize {
        self.batch
    }

    pub fn layer_count(&self) -> usize {
        self.y.len()
    }

    /// Activity of `layer` (1-based).
    pub fn y(&self, layer: usize) -> &Tensor {
        &self.y[layer - 1]
    }

    pub fn set_y(&mut self, layer: usize, value: Tensor) -> Result<()> {
        if value.shape() != self.y[layer - 1].shape() {
            return Err(Error::Shape(format!(
                "layer {layer} activity is {:?}, got {:?}",
                self.y[layer - 1].shape(),
                value.shape()
            )));
        }
        self.y[layer - 1] = value;
        Ok(())
    }

    pub fn is_clamped(&self, layer: usize) -> bool {
        self.clamped[layer - 1]
    }

    pub fn set_clamped(&mut self, layer: usize, clamped: bool) {
        self.clamped[layer - 1] = clamped;
    }

    pub(crate) fn replace_free(&mut self, layer: usize, value: Tensor) {
        debug_assert!(!self.clamped[layer - 1]);
        self.y[layer - 1] = value;
    }
}

fn batch_of(params: &NetworkParams, layer: usize, t: &Tensor) -> Result<usize> {
    let want = params.layer_shape(layer);
    let shape = t.shape();
    if shape.len() != want.len() + 1 || shape[..want.len()] != want[..] {
        return Err(Error::Shape(format!(
            "layer {layer} expects batched shape {want:?} + [batch], got {shape:?}"
        )));
    }
    Ok(*shape.last().unwrap())
}
