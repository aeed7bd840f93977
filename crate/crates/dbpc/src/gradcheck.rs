//! Finite-difference verification of the analytic gradients.
//!
//! Each suite builds seeded random networks and states, perturbs one
//! coordinate at a time and compares the analytic gradient against the
//! central difference of the corresponding energy. The differencing code
//! below never touches the analytic gradient path, so the two routes are
//! independent.

use crate::error::Result;
use crate::learning::{representation_energy, representation_grad, weight_energy, weight_grad};
use crate::network::{Hyperparams, NetworkParams};
use crate::rng::Rng;
use crate::state::ActivationState;
use crate::config::presets;
use crate::tensor::Tensor;

/// Central-difference step.
pub const FD_STEP: f64 = 1e-5;
/// Acceptance threshold on the worst relative error of a suite.
pub const FD_TOLERANCE: f64 = 1e-4;

/// Outcome of one finite-difference suite.
#[derive(Debug, Clone)]
pub struct SuiteResult {
    pub name: String,
    pub instances: usize,
    pub coordinates_checked: usize,
    pub max_rel_error: f64,
    pub tolerance: f64,
}

impl SuiteResult {
    pub fn passed(&self) -> bool {
        self.max_rel_error.is_finite() && self.max_rel_error <= self.tolerance
    }
}

/// Relative error with a floor so near-zero pairs compare absolutely.
fn rel_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

fn random_hp(rng: &mut Rng) -> Hyperparams {
    Hyperparams {
        forward_factor: rng.uniform(0.2, 1.5),
        backward_factor: rng.uniform(0.2, 1.5),
        class_factor: rng.uniform(0.2, 1.5),
        recon_factor: rng.uniform(0.2, 1.5),
        ..Hyperparams::default()
    }
}

fn random_state(params: &NetworkParams, rng: &mut Rng, clamp_ends: bool) -> ActivationState {
    let mut state = ActivationState::zeroed(params, 1);
    for l in 1..=params.layer_count() {
        let shape = params.batched_shape(l, 1);
        let data = (0..shape.iter().product::<usize>())
            .map(|_| rng.uniform(-1.0, 1.0))
            .collect();
        state.set_y(l, Tensor::from_vec(&shape, data).unwrap()).unwrap();
    }
    if clamp_ends {
        state.set_clamped(1, true);
        state.set_clamped(params.layer_count(), true);
    }
    state
}

fn random_fc_net(rng: &mut Rng) -> NetworkParams {
    let depth = 3 + rng.below(3); // 3..=5 layers
    let widths: Vec<usize> = (0..depth).map(|_| 2 + rng.below(15)).collect();
    presets::fcn(&widths, rng.next_u64()).unwrap()
}

fn random_conv_net(rng: &mut Rng) -> NetworkParams {
    let h = 3 + rng.below(4); // maps up to 6x6
    let w = 3 + rng.below(4);
    let stages = 2 + rng.below(2); // input plus 1..2 conv layers
    let convs: Vec<(usize, usize)> = (0..stages).map(|_| (1 + rng.below(3), 3)).collect();
    let classes = 2 + rng.below(3);
    presets::cnn(&convs, classes, (h, w), rng.next_u64()).unwrap()
}

/// Central difference of the representation energy of layer `l` along one
/// coordinate of its activity.
fn fd_representation(
    params: &NetworkParams,
    state: &ActivationState,
    l: usize,
    hp: &Hyperparams,
    coord: usize,
) -> Result<f64> {
    let mut plus = state.clone();
    let mut t = plus.y(l).clone();
    t.data_mut()[coord] += FD_STEP;
    plus.set_y(l, t)?;
    let mut minus = state.clone();
    let mut t = minus.y(l).clone();
    t.data_mut()[coord] -= FD_STEP;
    minus.set_y(l, t)?;
    let ep = representation_energy(params, &plus, l, hp, 1)?;
    let em = representation_energy(params, &minus, l, hp, 1)?;
    Ok((ep - em) / (2.0 * FD_STEP))
}

/// Central difference of the weight energy of `interface` along one weight
/// coordinate.
fn fd_weight(
    params: &NetworkParams,
    state: &ActivationState,
    interface: usize,
    hp: &Hyperparams,
    coord: usize,
) -> Result<f64> {
    let nudge = |delta: f64| -> Result<f64> {
        let mut p = params.clone();
        let mut values = p.block(interface).values().to_vec();
        values[coord] += delta;
        p.block_mut(interface).set_values(&values)?;
        weight_energy(&p, state, interface, hp, 1)
    };
    Ok((nudge(FD_STEP)? - nudge(-FD_STEP)?) / (2.0 * FD_STEP))
}

/// Check `representation_grad` on random fully-connected networks. A probe
/// of coordinates per free layer is compared; `corruption` is added to the
/// analytic value (negative-control hook, 0 in normal use). Instances
/// alternate between training states (both ends clamped) and test states
/// (only the input clamped), so the boundary gradient of the output layer
/// is exercised too.
pub fn representation_suite(seed: u64, instances: usize, corruption: f64) -> Result<SuiteResult> {
    let mut rng = Rng::seeded(seed, &[0x5245_5052]);
    let mut max_rel = 0.0_f64;
    let mut checked = 0;
    for instance in 0..instances {
        let params = random_fc_net(&mut rng);
        let hp = random_hp(&mut rng);
        let mut state = random_state(&params, &mut rng, true);
        if instance % 2 == 1 {
            state.set_clamped(params.layer_count(), false);
        }
        for l in 2..=params.layer_count() {
            if state.is_clamped(l) {
                continue;
            }
            let grad = representation_grad(&params, &state, l, &hp, 1)?;
            let units = grad.len();
            for _ in 0..units.min(6) {
                let coord = rng.below(units);
                let numeric = fd_representation(&params, &state, l, &hp, coord)?;
                let analytic = grad.data()[coord] + corruption;
                max_rel = max_rel.max(rel_error(analytic, numeric));
                checked += 1;
            }
        }
    }
    Ok(SuiteResult {
        name: "representation gradient (fully connected)".into(),
        instances,
        coordinates_checked: checked,
        max_rel_error: max_rel,
        tolerance: FD_TOLERANCE,
    })
}

/// Check `weight_grad` on random fully-connected networks.
pub fn weight_suite_fc(seed: u64, instances: usize, corruption: f64) -> Result<SuiteResult> {
    let mut rng = Rng::seeded(seed, &[0x0057_4643]);
    let mut max_rel = 0.0_f64;
    let mut checked = 0;
    for _ in 0..instances {
        let params = random_fc_net(&mut rng);
        let hp = random_hp(&mut rng);
        let state = random_state(&params, &mut rng, true);
        for j in 1..=params.interface_count() {
            let grad = weight_grad(&params, &state, j, &hp, 1)?;
            let count = grad.len();
            for _ in 0..count.min(6) {
                let coord = rng.below(count);
                let numeric = fd_weight(&params, &state, j, &hp, coord)?;
                let analytic = grad.data()[coord] + corruption;
                max_rel = max_rel.max(rel_error(analytic, numeric));
                checked += 1;
            }
        }
    }
    Ok(SuiteResult {
        name: "weight gradient (fully connected)".into(),
        instances,
        coordinates_checked: checked,
        max_rel_error: max_rel,
        tolerance: FD_TOLERANCE,
    })
}

/// Check `weight_grad` and `representation_grad` on tiny convolutional
/// networks, classifier head included.
pub fn weight_suite_conv(seed: u64, instances: usize, corruption: f64) -> Result<SuiteResult> {
    let mut rng = Rng::seeded(seed, &[0x0000_0057_434F_4E56]);
    let mut max_rel = 0.0_f64;
    let mut checked = 0;
    for _ in 0..instances {
        let params = random_conv_net(&mut rng);
        let hp = random_hp(&mut rng);
        let state = random_state(&params, &mut rng, true);
        for j in 1..=params.interface_count() {
            let grad = weight_grad(&params, &state, j, &hp, 1)?;
            let count = grad.len();
            for _ in 0..count.min(6) {
                let coord = rng.below(count);
                let numeric = fd_weight(&params, &state, j, &hp, coord)?;
                let analytic = grad.data()[coord] + corruption;
                max_rel = max_rel.max(rel_error(analytic, numeric));
                checked += 1;
            }
        }
        for l in 2..params.layer_count() {
            let grad = representation_grad(&params, &state, l, &hp, 1)?;
            let units = grad.len();
            for _ in 0..units.min(4) {
                let coord = rng.below(units);
                let numeric = fd_representation(&params, &state, l, &hp, coord)?;
                let analytic = grad.data()[coord] + corruption;
                max_rel = max_rel.max(rel_error(analytic, numeric));
                checked += 1;
            }
        }
    }
    Ok(SuiteResult {
        name: "weight + representation gradients (convolutional)".into(),
        instances,
        coordinates_checked: checked,
        max_rel_error: max_rel,
        tolerance: FD_TOLERANCE,
    })
}

/// The three suites at their default sizes.
pub fn run_default(seed: u64) -> Result<Vec<SuiteResult>> {
    Ok(vec![
        representation_suite(seed, 50, 0.0)?,
        weight_suite_fc(seed, 50, 0.0)?,
        weight_suite_conv(seed, 20, 0.0)?,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suites_pass_with_default_seed() {
        for suite in run_default(0).unwrap() {
            assert!(
                suite.passed(),
                "{}: max rel error {} over {} coordinates",
                suite.name,
                suite.max_rel_error,
                suite.coordinates_checked
            );
        }
    }

    #[test]
    fn representation_gradients_are_tight() {
        // central differences at step 1e-5 should agree far below the
        // acceptance tolerance on smooth instances
        let suite = representation_suite(0, 20, 0.0).unwrap();
        assert!(
            suite.max_rel_error <= 1e-5,
            "max rel error {}",
            suite.max_rel_error
        );
    }

    #[test]
    fn corrupted_gradient_fails() {
        let suite = representation_suite(0, 3, 0.05).unwrap();
        assert!(!suite.passed());
    }
}
