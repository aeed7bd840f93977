//! Watch relaxation settle: clamp a random input and target, then print the
//! global prediction-error energy after each activity update. With a small
//! step size the trace is monotonically non-increasing.
//!
//! ```text
//! cargo run --example energy_relaxation
//! ```

use dbpc::config::presets;
use dbpc::learning::infer_representations_traced;
use dbpc::rng::Rng;
use dbpc::state::ActivationState;
use dbpc::tensor::Tensor;
use dbpc::Hyperparams;

fn main() -> Result<(), dbpc::Error> {
    let net = presets::fcn(&[16, 32, 24, 4], 1)?;
    let hp = Hyperparams {
        activity_lr: 0.02,
        inference_steps: 20,
        ..Hyperparams::default()
    };
    let mut rng = Rng::new(2);
    let input = Tensor::from_vec(&[16, 1], (0..16).map(|_| rng.next_f64()).collect())?;
    let mut target = Tensor::zeros(&[4, 1]);
    target.data_mut()[1] = 1.0;

    let mut state = ActivationState::training(&net, input, target, 1)?;
    let trace = infer_representations_traced(&net, &mut state, &hp, 1)?;
    println!("step  energy");
    for (step, energy) in trace.iter().enumerate() {
        println!("{step:>4}  {energy:.6}");
    }
    let drop = 100.0 * (1.0 - trace.last().unwrap() / trace[0]);
    println!("energy dropped {drop:.1}% over {} steps", trace.len() - 1);
    Ok(())
}
