//! Local learning: prediction errors, energies, analytic gradients and the
//! relaxation/training loops.
//!
//! Interface `j` produces two predictions from the same weight block:
//!
//! * feedforward — `ŷ_{j+1} = relu(F_j(y_j))` predicts the layer above;
//! * feedback — `ŷ_j = relu(F_jᵀ(y_{j+1}))` predicts the layer below.
//!
//! Squared element-wise residuals of these predictions are the only learning
//! signal. The representation energy of a layer gathers the four error terms
//! its activity participates in; the weight energy of an interface gathers
//! the two terms its block participates in. Both gradients below are exact
//! derivatives of those energies (finite-difference checked in
//! [`crate::gradcheck`] and the test suite).
//!
//! Relaxation is Jacobi style: all layer gradients are computed from the
//! pre-update state, then applied at once. The result is independent of
//! layer update order, which is what makes in-parallel layer updates safe.

use crate::error::{Error, Result};
use crate::network::{Hyperparams, NetworkParams, WeightBlock};
use crate::state::ActivationState;
use crate::tensor::{kernel_correlation, matmul_grad_batch, relu, relu_prime, Tensor};

/// Both predictions of every interface, with pre-activations kept for the
/// ReLU derivative chains. Index `j-1` holds interface `j`.
#[derive(Debug, Clone)]
pub struct Predictions {
    /// `F_j(y_j)` — pre-activation prediction of layer j+1.
    pub pre_forward: Vec<Tensor>,
    /// `relu(pre_forward)` — feedforward prediction of layer j+1.
    pub forward: Vec<Tensor>,
    /// `F_jᵀ(y_{j+1})` — pre-activation prediction of layer j.
    pub pre_backward: Vec<Tensor>,
    /// `relu(pre_backward)` — feedback prediction of layer j.
    pub backward: Vec<Tensor>,
}

/// Squared prediction errors of every interface: `forward[j-1]` is the
/// feedforward error about layer j+1, `backward[j-1]` the feedback error
/// about layer j.
#[derive(Debug, Clone)]
pub struct PredictionErrors {
    pub forward: Vec<Tensor>,
    pub backward: Vec<Tensor>,
}

/// Energy summary of one trained batch.
#[derive(Debug, Clone, Copy)]
pub struct BatchStats {
    /// Global representation energy after relaxation, per sample.
    pub representation_energy: f64,
    /// Sum of all interface weight energies after relaxation, per sample.
    pub weight_energy: f64,
}

/// Feedforward prediction of layer `l` (2 ≤ l ≤ L) from the layer below.
pub fn feedforward_predict(
    params: &NetworkParams,
    state: &ActivationState,
    l: usize,
    threads: usize,
) -> Result<Tensor> {
    if l < 2 || l > params.layer_count() {
        return Err(Error::Index(format!(
            "feedforward prediction needs 2 <= l <= {}, got {l}",
            params.layer_count()
        )));
    }
    Ok(relu(&params.forward_interface(l - 1, state.y(l - 1), threads)?))
}

/// Feedback prediction of layer `l` (1 ≤ l ≤ L-1) from the layer above,
/// through the adjoint of the same weight block used feedforward.
pub fn feedback_predict(
    params: &NetworkParams,
    state: &ActivationState,
    l: usize,
    threads: usize,
) -> Result<Tensor> {
    if l == 0 || l >= params.layer_count() {
        return Err(Error::Index(format!(
            "feedback prediction needs 1 <= l <= {}, got {l}",
            params.layer_count() - 1
        )));
    }
    Ok(relu(&params.adjoint_interface(l, state.y(l + 1), threads)?))
}

/// Both predictions of every interface, computed from the current state.
pub fn compute_predictions(
    params: &NetworkParams,
    state: &ActivationState,
    threads: usize,
) -> Result<Predictions> {
    let n = params.interface_count();
    let mut pre_forward = Vec::with_capacity(n);
    let mut forward = Vec::with_capacity(n);
    let mut pre_backward = Vec::with_capacity(n);
    let mut backward = Vec::with_capacity(n);
    for j in 1..=n {
        let pf = params.forward_interface(j, state.y(j), threads)?;
        forward.push(relu(&pf));
        pre_forward.push(pf);
        let pb = params.adjoint_interface(j, state.y(j + 1), threads)?;
        backward.push(relu(&pb));
        pre_backward.push(pb);
    }
    Ok(Predictions {
        pre_forward,
        forward,
        pre_backward,
        backward,
    })
}

/// Squared residuals of every prediction.
pub fn prediction_errors(
    params: &NetworkParams,
    state: &ActivationState,
    threads: usize,
) -> Result<PredictionErrors> {
    let preds = compute_predictions(params, state, threads)?;
    let mut forward = Vec::with_capacity(preds.forward.len());
    let mut backward = Vec::with_capacity(preds.backward.len());
    for j in 1..=params.interface_count() {
        forward.push(squared_residual(state.y(j + 1), &preds.forward[j - 1])?);
        backward.push(squared_residual(state.y(j), &preds.backward[j - 1])?);
    }
    Ok(PredictionErrors { forward, backward })
}

fn squared_residual(y: &Tensor, pred: &Tensor) -> Result<Tensor> {
    y.zip_map(pred, |a, b| (a - b) * (a - b))
}

fn residual_power(y: &Tensor, pred: &Tensor) -> f64 {
    y.data()
        .iter()
        .zip(pred.data())
        .map(|(&a, &b)| (a - b) * (a - b))
        .sum()
}

/// Representation energy of layer `l`: the sum of every squared prediction
/// error its activity enters, weighted by the forward/backward factors.
/// Boundary layers keep only the terms whose neighbor exists.
pub fn representation_energy(
    params: &NetworkParams,
    state: &ActivationState,
    l: usize,
    hp: &Hyperparams,
    threads: usize,
) -> Result<f64> {
    check_layer(params, l)?;
    let preds = compute_predictions(params, state, threads)?;
    Ok(representation_energy_with(params, state, &preds, l, hp))
}

fn representation_energy_with(
    params: &NetworkParams,
    state: &ActivationState,
    preds: &Predictions,
    l: usize,
    hp: &Hyperparams,
) -> f64 {
    let mut energy = 0.0;
    if l >= 2 {
        // terms through interface l-1: own feedforward error, neighbor's
        // feedback error
        energy += hp.forward_factor * residual_power(state.y(l), &preds.forward[l - 2]);
        energy += hp.backward_factor * residual_power(state.y(l - 1), &preds.backward[l - 2]);
    }
    if l < params.layer_count() {
        // terms through interface l: neighbor's feedforward error, own
        // feedback error
        energy += hp.forward_factor * residual_power(state.y(l + 1), &preds.forward[l - 1]);
        energy += hp.backward_factor * residual_power(state.y(l), &preds.backward[l - 1]);
    }
    energy
}

/// Global representation energy: every interface's weighted error power.
/// One Jacobi relaxation step performs gradient descent on exactly this
/// quantity.
pub fn global_representation_energy(
    params: &NetworkParams,
    state: &ActivationState,
    hp: &Hyperparams,
    threads: usize,
) -> Result<f64> {
    let preds = compute_predictions(params, state, threads)?;
    Ok(global_energy_with(params, state, &preds, hp))
}

fn global_energy_with(
    params: &NetworkParams,
    state: &ActivationState,
    preds: &Predictions,
    hp: &Hyperparams,
) -> f64 {
    let mut energy = 0.0;
    for j in 1..=params.interface_count() {
        energy += hp.forward_factor * residual_power(state.y(j + 1), &preds.forward[j - 1]);
        energy += hp.backward_factor * residual_power(state.y(j), &preds.backward[j - 1]);
    }
    energy
}

/// Analytic gradient of [`representation_energy`] with respect to `y_l`.
pub fn representation_grad(
    params: &NetworkParams,
    state: &ActivationState,
    l: usize,
    hp: &Hyperparams,
    threads: usize,
) -> Result<Tensor> {
    check_layer(params, l)?;
    if state.is_clamped(l) {
        return Err(Error::Index(format!(
            "layer {l} is clamped; its activity has no gradient"
        )));
    }
    let preds = compute_predictions(params, state, threads)?;
    representation_grad_with(params, state, &preds, l, hp, threads)
}

fn representation_grad_with(
    params: &NetworkParams,
    state: &ActivationState,
    preds: &Predictions,
    l: usize,
    hp: &Hyperparams,
    threads: usize,
) -> Result<Tensor> {
    let mut grad = Tensor::zeros(state.y(l).shape());
    if l >= 2 {
        // d/dy_l of (y_l - ŷ_l^ff)^2
        let own_ff = state
            .y(l)
            .zip_map(&preds.forward[l - 2], |y, p| 2.0 * (y - p))?;
        grad.add_scaled(&own_ff, hp.forward_factor)?;
        // d/dy_l of (y_{l-1} - relu(F_{l-1}ᵀ y_l))^2: forward map of the
        // masked residual below
        let masked = relu_prime(&preds.pre_backward[l - 2]).zip_map(
            &state
                .y(l - 1)
                .zip_map(&preds.backward[l - 2], |y, p| y - p)?,
            |m, r| m * r,
        )?;
        let chain = params.forward_interface(l - 1, &masked, threads)?;
        grad.add_scaled(&chain, -2.0 * hp.backward_factor)?;
    }
    if l < params.layer_count() {
        // d/dy_l of (y_{l+1} - relu(F_l y_l))^2: adjoint of the masked
        // residual above
        let masked = relu_prime(&preds.pre_forward[l - 1]).zip_map(
            &state
                .y(l + 1)
                .zip_map(&preds.forward[l - 1], |y, p| y - p)?,
            |m, r| m * r,
        )?;
        let chain = params.adjoint_interface(l, &masked, threads)?;
        grad.add_scaled(&chain, -2.0 * hp.forward_factor)?;
        // d/dy_l of (y_l - ŷ_l^fb)^2
        let own_fb = state
            .y(l)
            .zip_map(&preds.backward[l - 1], |y, p| 2.0 * (y - p))?;
        grad.add_scaled(&own_fb, hp.backward_factor)?;
    }
    Ok(grad)
}

/// One Jacobi relaxation step: gradients for every free layer are computed
/// from the pre-update state, then applied simultaneously.
pub fn representation_step(
    params: &NetworkParams,
    state: &mut ActivationState,
    hp: &Hyperparams,
    threads: usize,
) -> Result<()> {
    let preds = compute_predictions(params, state, threads)?;
    let mut updates: Vec<(usize, Tensor)> = Vec::new();
    for l in 1..=params.layer_count() {
        if state.is_clamped(l) {
            continue;
        }
        let grad = representation_grad_with(params, state, &preds, l, hp, threads)?;
        let mut updated = state.y(l).clone();
        updated.add_scaled(&grad, -hp.activity_lr)?;
        updates.push((l, updated));
    }
    for (l, updated) in updates {
        state.replace_free(l, updated);
    }
    Ok(())
}

/// Run `hp.inference_steps` relaxation steps, recomputing predictions every
/// iteration.
pub fn infer_representations(
    params: &NetworkParams,
    state: &mut ActivationState,
    hp: &Hyperparams,
    threads: usize,
) -> Result<()> {
    for _ in 0..hp.inference_steps {
        representation_step(params, state, hp, threads)?;
    }
    Ok(())
}

/// Like [`infer_representations`] but records the global representation
/// energy before any step and after each one (`steps + 1` values).
pub fn infer_representations_traced(
    params: &NetworkParams,
    state: &mut ActivationState,
    hp: &Hyperparams,
    threads: usize,
) -> Result<Vec<f64>> {
    let mut trace = Vec::with_capacity(hp.inference_steps + 1);
    trace.push(global_representation_energy(params, state, hp, threads)?);
    for _ in 0..hp.inference_steps {
        representation_step(params, state, hp, threads)?;
        trace.push(global_representation_energy(params, state, hp, threads)?);
    }
    Ok(trace)
}

/// Weight energy of `interface`: classification term (feedforward error
/// about the layer above) plus reconstruction term (feedback error about
/// the layer below).
pub fn weight_energy(
    params: &NetworkParams,
    state: &ActivationState,
    interface: usize,
    hp: &Hyperparams,
    threads: usize,
) -> Result<f64> {
    check_interface(params, interface)?;
    let preds = compute_predictions(params, state, threads)?;
    Ok(weight_energy_with(params, state, &preds, interface, hp))
}

fn weight_energy_with(
    params: &NetworkParams,
    state: &ActivationState,
    preds: &Predictions,
    j: usize,
    hp: &Hyperparams,
) -> f64 {
    let _ = params;
    hp.class_factor * residual_power(state.y(j + 1), &preds.forward[j - 1])
        + hp.recon_factor * residual_power(state.y(j), &preds.backward[j - 1])
}

/// Analytic gradient of [`weight_energy`] with respect to the block at
/// `interface`, covering both uses of the block (forward map in the
/// classification term, adjoint in the reconstruction term). Over a batched
/// state the per-sample gradients are summed; [`weight_step`] divides by
/// the batch size.
pub fn weight_grad(
    params: &NetworkParams,
    state: &ActivationState,
    interface: usize,
    hp: &Hyperparams,
    threads: usize,
) -> Result<Tensor> {
    check_interface(params, interface)?;
    let preds = compute_predictions(params, state, threads)?;
    weight_grad_with(params, state, &preds, interface, hp, threads)
}

fn weight_grad_with(
    params: &NetworkParams,
    state: &ActivationState,
    preds: &Predictions,
    j: usize,
    hp: &Hyperparams,
    threads: usize,
) -> Result<Tensor> {
    let batch = state.batch();
    // masked residual of the feedforward prediction about layer j+1
    let d_ff = relu_prime(&preds.pre_forward[j - 1]).zip_map(
        &state
            .y(j + 1)
            .zip_map(&preds.forward[j - 1], |y, p| y - p)?,
        |m, r| m * r,
    )?;
    // masked residual of the feedback prediction about layer j
    let d_fb = relu_prime(&preds.pre_backward[j - 1]).zip_map(
        &state.y(j).zip_map(&preds.backward[j - 1], |y, p| y - p)?,
        |m, r| m * r,
    )?;
    match params.block(j) {
        WeightBlock::Dense(_) => {
            let n_in = params.layer_units(j);
            let n_out = params.layer_units(j + 1);
            let y_below = state.y(j).clone().reshaped(&[n_in, batch])?;
            let y_above = state.y(j + 1).clone().reshaped(&[n_out, batch])?;
            let d_ff = d_ff.reshaped(&[n_out, batch])?;
            let d_fb = d_fb.reshaped(&[n_in, batch])?;
            let mut grad = matmul_grad_batch(&d_ff, &y_below, threads)?;
            let fb = matmul_grad_batch(&y_above, &d_fb, threads)?;
            for v in grad.data_mut() {
                *v *= -2.0 * hp.class_factor;
            }
            grad.add_scaled(&fb, -2.0 * hp.recon_factor)?;
            Ok(grad)
        }
        WeightBlock::Kernel(k) => {
            let size = k.size();
            let mut grad = kernel_correlation(&d_ff, state.y(j), size, threads)?;
            let fb = kernel_correlation(state.y(j + 1), &d_fb, size, threads)?;
            for v in grad.data_mut() {
                *v *= -2.0 * hp.class_factor;
            }
            grad.add_scaled(&fb, -2.0 * hp.recon_factor)?;
            Ok(grad)
        }
    }
}

/// One weight update on every interface: `W_j -= weight_lr · mean gradient`,
/// the mean taken over the batch in the state. All interfaces read the same
/// pre-update activities, so per-interface updates are order independent.
pub fn weight_step(
    params: &mut NetworkParams,
    state: &ActivationState,
    hp: &Hyperparams,
    threads: usize,
) -> Result<()> {
    let preds = compute_predictions(params, state, threads)?;
    let scale = -hp.weight_lr / state.batch() as f64;
    let mut deltas = Vec::with_capacity(params.interface_count());
    for j in 1..=params.interface_count() {
        deltas.push(weight_grad_with(params, state, &preds, j, hp, threads)?);
    }
    for (j, delta) in deltas.iter().enumerate() {
        params.apply_weight_step(j + 1, delta, scale)?;
    }
    Ok(())
}

/// Train on one minibatch: clamp ends, relax representations, then take one
/// averaged weight step. Returns the post-relaxation energy summary.
pub fn train_batch(
    params: &mut NetworkParams,
    input: Tensor,
    target: Tensor,
    hp: &Hyperparams,
    threads: usize,
) -> Result<BatchStats> {
    let mut state = ActivationState::training(params, input, target, threads)?;
    infer_representations(params, &mut state, hp, threads)?;
    let preds = compute_predictions(params, &state, threads)?;
    let batch = state.batch() as f64;
    let representation_energy = global_energy_with(params, &state, &preds, hp) / batch;
    let mut weight_energy = 0.0;
    let scale = -hp.weight_lr / state.batch() as f64;
    let mut deltas = Vec::with_capacity(params.interface_count());
    for j in 1..=params.interface_count() {
        weight_energy += weight_energy_with(params, &state, &preds, j, hp);
        deltas.push(weight_grad_with(params, &state, &preds, j, hp, threads)?);
    }
    for (j, delta) in deltas.iter().enumerate() {
        params.apply_weight_step(j + 1, delta, scale)?;
    }
    Ok(BatchStats {
        representation_energy,
        weight_energy: weight_energy / batch,
    })
}

fn check_layer(params: &NetworkParams, l: usize) -> Result<()> {
    if l == 0 || l > params.layer_count() {
        return Err(Error::Index(format!(
            "layer {l} (network has {})",
            params.layer_count()
        )));
    }
    Ok(())
}

fn check_interface(params: &NetworkParams, j: usize) -> Result<()> {
    if j == 0 || j > params.interface_count() {
        return Err(Error::Index(format!(
            "interface {j} (network has {})",
            params.interface_count()
        )));
    }
    Ok(())
}
