//! Minimal training loop on a two-blob toy problem: no data files needed.
//! Shows the core API: build a network, clamp input and one-hot target,
//! relax representations, take weight steps, classify.
//!
//! ```text
//! cargo run --example toy_training
//! ```

use dbpc::config::presets;
use dbpc::inference::{classify, ClassifyMode};
use dbpc::learning::train_batch;
use dbpc::rng::Rng;
use dbpc::tensor::Tensor;
use dbpc::Hyperparams;

fn main() -> Result<(), dbpc::Error> {
    let mut rng = Rng::new(9);
    let n = 64;
    let dims = 4;
    let mut samples: Vec<(Vec<f64>, usize)> = Vec::with_capacity(n);
    for i in 0..n {
        let class = i % 2;
        let center: [f64; 4] = if class == 0 {
            [0.8, 0.2, 0.7, 0.1]
        } else {
            [0.1, 0.9, 0.2, 0.8]
        };
        let point = center
            .iter()
            .map(|c| (c + rng.uniform(-0.1, 0.1)).clamp(0.0, 1.0))
            .collect();
        samples.push((point, class));
    }

    let mut net = presets::fcn(&[dims, 16, 2], 3)?;
    let hp = Hyperparams {
        inference_steps: 10,
        activity_lr: 0.05,
        weight_lr: 0.05,
        batch_size: 8,
        ..Hyperparams::default()
    };

    let accuracy = |net: &dbpc::NetworkParams| -> Result<f64, dbpc::Error> {
        let mut correct = 0;
        for (point, class) in &samples {
            let x = Tensor::from_vec(&[dims], point.clone())?;
            let result = classify(net, &x, &hp, ClassifyMode::Feedforward, 1)?;
            correct += usize::from(result.predicted_class == *class);
        }
        Ok(correct as f64 / samples.len() as f64)
    };

    println!("batch  train accuracy");
    for step in 0..200 {
        let mut input = Tensor::zeros(&[dims, hp.batch_size]);
        let mut target = Tensor::zeros(&[2, hp.batch_size]);
        for b in 0..hp.batch_size {
            let (point, class) = &samples[(step * hp.batch_size + b) % n];
            for (u, &v) in point.iter().enumerate() {
                input.data_mut()[u * hp.batch_size + b] = v;
            }
            target.data_mut()[class * hp.batch_size + b] = 1.0;
        }
        train_batch(&mut net, input, target, &hp, 1)?;
        if (step + 1) % 40 == 0 {
            println!("{:>5}  {:.3}", step + 1, accuracy(&net)?);
        }
    }
    Ok(())
}
