//! Test-time use of a trained network: classification and reconstruction.

use crate::data::{assemble_inputs, ImageDataset};
use crate::error::{Error, Result};
use crate::learning::infer_representations;
use crate::metrics::{accuracy, psnr, ssim, ConfusionMatrix};
use crate::network::{Hyperparams, NetworkParams};
use crate::state::ActivationState;
use crate::tensor::{relu, Tensor};

/// How class predictions are produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClassifyMode {
    /// One feedforward sweep from the input to the output layer.
    Feedforward,
    /// Clamp the input, relax all other layers, read the output activity.
    Iterative,
}

impl std::fmt::Display for ClassifyMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ClassifyMode::Feedforward => write!(f, "feedforward"),
            ClassifyMode::Iterative => write!(f, "iterative"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ClassificationResult {
    pub predicted_class: usize,
    /// Copy of the output layer activity the prediction was read from.
    pub output_activity: Tensor,
    pub mode: ClassifyMode,
}

#[derive(Debug, Clone)]
pub struct ReconstructionResult {
    pub source_layer: usize,
    /// Input-shaped, non-negative reconstruction.
    pub image: Tensor,
}

/// Reconstruction quality of one source layer, averaged over a test set.
#[derive(Debug, Clone, Copy)]
pub struct LayerQuality {
    pub layer: usize,
    pub mean_psnr: f64,
    pub mean_ssim: f64,
}

/// Evaluation summary: accuracy plus per-layer reconstruction quality.
#[derive(Debug, Clone)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub confusion: ConfusionMatrix,
    pub layers: Vec<LayerQuality>,
    pub samples: usize,
    pub recon_samples: usize,
}

/// Argmax with ties broken toward the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Classify a batched input tensor; returns per-sample predicted classes
/// and the batched output activity they were read from.
pub fn classify_batch(
    params: &NetworkParams,
    input: Tensor,
    hp: &Hyperparams,
    mode: ClassifyMode,
    threads: usize,
) -> Result<(Vec<usize>, Tensor)> {
    let mut state = ActivationState::testing(params, input, threads)?;
    if mode == ClassifyMode::Iterative {
        infer_representations(params, &mut state, hp, threads)?;
    }
    let output = state.y(params.layer_count()).clone();
    let classes = params.layer_units(params.layer_count());
    let batch = state.batch();
    let mut predicted = Vec::with_capacity(batch);
    for b in 0..batch {
        let column: Vec<f64> = (0..classes).map(|k| output.data()[k * batch + b]).collect();
        predicted.push(argmax(&column));
    }
    Ok((predicted, output))
}

/// Classify one sample.
pub fn classify(
    params: &NetworkParams,
    input: &Tensor,
    hp: &Hyperparams,
    mode: ClassifyMode,
    threads: usize,
) -> Result<ClassificationResult> {
    let mut batched_shape = input.shape().to_vec();
    batched_shape.push(1);
    let batched = input.clone().reshaped(&batched_shape)?;
    let (predicted, output) = classify_batch(params, batched, hp, mode, threads)?;
    let classes = params.layer_units(params.layer_count());
    Ok(ClassificationResult {
        predicted_class: predicted[0],
        output_activity: output.reshaped(&[classes])?,
        mode,
    })
}

fn check_source_layer(params: &NetworkParams, layer: usize) -> Result<()> {
    if layer < 2 || layer > params.layer_count() {
        return Err(Error::Index(format!(
            "reconstruction source layer {layer} (valid range 2..={})",
            params.layer_count()
        )));
    }
    Ok(())
}

/// Feedback sweep from `layer` down to layer 1 over a batched state:
/// repeatedly apply the adjoint of each interface followed by ReLU.
pub fn reconstruct_batch(
    params: &NetworkParams,
    state: &ActivationState,
    layer: usize,
    threads: usize,
) -> Result<Tensor> {
    check_source_layer(params, layer)?;
    let mut activity = state.y(layer).clone();
    for j in (1..layer).rev() {
        activity = relu(&params.adjoint_interface(j, &activity, threads)?);
    }
    Ok(activity)
}

/// Reconstruct the input from the representation at `layer` of a
/// single-sample state.
pub fn reconstruct_from_layer(
    params: &NetworkParams,
    state: &ActivationState,
    layer: usize,
) -> Result<ReconstructionResult> {
    if state.batch() != 1 {
        return Err(Error::Shape(format!(
            "reconstruct_from_layer expects a single-sample state, got batch {}",
            state.batch()
        )));
    }
    let image = reconstruct_batch(params, state, layer, 1)?;
    Ok(ReconstructionResult {
        source_layer: layer,
        image: image.reshaped(&params.layer_shape(1))?,
    })
}

/// Estimate representations for a raw input (iterative inference with the
/// input clamped), then reconstruct from `layer`.
pub fn reconstruct_input(
    params: &NetworkParams,
    input: &Tensor,
    hp: &Hyperparams,
    layer: usize,
    threads: usize,
) -> Result<ReconstructionResult> {
    check_source_layer(params, layer)?;
    let mut batched_shape = input.shape().to_vec();
    batched_shape.push(1);
    let mut state =
        ActivationState::testing(params, input.clone().reshaped(&batched_shape)?, threads)?;
    infer_representations(params, &mut state, hp, threads)?;
    reconstruct_from_layer(params, &state, layer)
}

/// Layers reported in per-layer reconstruction tables: every layer between
/// the input and the classification head.
pub fn default_reconstruction_sources(params: &NetworkParams) -> Vec<usize> {
    (2..params.layer_count()).collect()
}

/// Accuracy over a dataset plus mean per-layer PSNR/SSIM of reconstructions.
///
/// Classification uses `mode`; reconstructions always come from iteratively
/// estimated representations (input clamped, everything else relaxed).
/// `recon_samples` caps how many test images enter the reconstruction
/// means (0 = all). Samples are processed in dataset order in fixed-size
/// chunks, so results do not depend on the thread count.
pub fn evaluate(
    params: &NetworkParams,
    dataset: &ImageDataset,
    hp: &Hyperparams,
    mode: ClassifyMode,
    recon_samples: usize,
    threads: usize,
) -> Result<MetricsReport> {
    if dataset.is_empty() {
        return Err(Error::Data("cannot evaluate an empty dataset".into()));
    }
    let classes = params.layer_units(params.layer_count());
    let chunk = hp.batch_size.max(1);

    let mut confusion = ConfusionMatrix::new(classes);
    let all: Vec<usize> = (0..dataset.len()).collect();
    for indices in all.chunks(chunk) {
        let input = assemble_inputs(dataset, indices, params)?;
        let (predicted, _) = classify_batch(params, input, hp, mode, threads)?;
        for (&idx, &pred) in indices.iter().zip(&predicted) {
            confusion.record(dataset.label(idx) as usize, pred);
        }
    }

    let sources = default_reconstruction_sources(params);
    let recon_n = if recon_samples == 0 {
        dataset.len()
    } else {
        recon_samples.min(dataset.len())
    };
    let mut psnr_sums = vec![0.0; sources.len()];
    let mut ssim_sums = vec![0.0; sources.len()];
    let per_image = dataset.pixels_per_image();
    for indices in all[..recon_n].chunks(chunk) {
        let input = assemble_inputs(dataset, indices, params)?;
        let mut state = ActivationState::testing(params, input, threads)?;
        infer_representations(params, &mut state, hp, threads)?;
        for (s, &layer) in sources.iter().enumerate() {
            let recon = reconstruct_batch(params, &state, layer, threads)?;
            let batch = indices.len();
            for (b, &idx) in indices.iter().enumerate() {
                let image = Tensor::from_vec(&[per_image], dataset.image(idx).to_vec())?;
                let rec: Vec<f64> = (0..per_image).map(|u| recon.data()[u * batch + b]).collect();
                let rec = Tensor::from_vec(&[per_image], rec)?;
                psnr_sums[s] += psnr(&image, &rec, 1.0)?;
                ssim_sums[s] += ssim(&image, &rec, 1.0)?;
            }
        }
    }
    let layers = sources
        .iter()
        .enumerate()
        .map(|(s, &layer)| LayerQuality {
            layer,
            mean_psnr: psnr_sums[s] / recon_n as f64,
            mean_ssim: ssim_sums[s] / recon_n as f64,
        })
        .collect();

    Ok(MetricsReport {
        accuracy: accuracy(&confusion)?,
        confusion,
        layers,
        samples: dataset.len(),
        recon_samples: recon_n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::presets;
    use crate::learning::train_batch;
    use crate::rng::Rng;

    fn identity_fcn(width: usize, layers: usize) -> NetworkParams {
        let mut net = presets::fcn(&vec![width; layers], 0).unwrap();
        for j in 1..=net.interface_count() {
            let mut values = vec![0.0; width * width];
            for i in 0..width {
                values[i * width + i] = 1.0;
            }
            net.block_mut(j).set_values(&values).unwrap();
        }
        net
    }

    #[test]
    fn feedforward_equals_iterative_with_zero_steps() {
        let net = presets::fcn(&[5, 8, 3], 2).unwrap();
        let mut rng = Rng::new(3);
        let x = Tensor::from_vec(&[5], (0..5).map(|_| rng.next_f64()).collect()).unwrap();
        let hp = Hyperparams {
            inference_steps: 0,
            ..Hyperparams::default()
        };
        let ff = classify(&net, &x, &hp, ClassifyMode::Feedforward, 1).unwrap();
        let it = classify(&net, &x, &hp, ClassifyMode::Iterative, 1).unwrap();
        assert_eq!(ff.predicted_class, it.predicted_class);
        assert_eq!(ff.output_activity.data(), it.output_activity.data());
    }

    #[test]
    fn memorizes_one_batch() {
        // overfit a desk-scale net on 4 samples, then classify them
        let mut net = presets::fcn(&[6, 24, 12, 3], 7).unwrap();
        let hp = Hyperparams {
            inference_steps: 10,
            activity_lr: 0.05,
            weight_lr: 0.05,
            ..Hyperparams::default()
        };
        let mut rng = Rng::new(8);
        let samples: Vec<(Vec<f64>, usize)> = (0..4)
            .map(|i| {
                let mut v: Vec<f64> = (0..6).map(|_| rng.uniform(0.0, 0.3)).collect();
                v[2 * (i % 3)] = 0.95; // distinct strong feature per class
                (v, i % 3)
            })
            .collect();
        for _ in 0..300 {
            let mut input = Tensor::zeros(&[6, 4]);
            let mut target = Tensor::zeros(&[3, 4]);
            for (b, (v, class)) in samples.iter().enumerate() {
                for (u, &val) in v.iter().enumerate() {
                    input.data_mut()[u * 4 + b] = val;
                }
                target.data_mut()[class * 4 + b] = 1.0;
            }
            train_batch(&mut net, input, target, &hp, 1).unwrap();
        }
        for (v, class) in &samples {
            let x = Tensor::from_vec(&[6], v.clone()).unwrap();
            let result = classify(&net, &x, &hp, ClassifyMode::Feedforward, 1).unwrap();
            assert_eq!(result.predicted_class, *class);
            let iter = classify(&net, &x, &hp, ClassifyMode::Iterative, 1).unwrap();
            assert_eq!(iter.predicted_class, *class);
        }
    }

    #[test]
    fn classify_is_pure_across_calls_and_threads() {
        let net = presets::fcn(&[5, 9, 4], 17).unwrap();
        let mut rng = Rng::new(18);
        let x = Tensor::from_vec(&[5], (0..5).map(|_| rng.next_f64()).collect()).unwrap();
        let hp = Hyperparams::default();
        let first = classify(&net, &x, &hp, ClassifyMode::Feedforward, 1).unwrap();
        for threads in [1, 1, 4, 4] {
            let again = classify(&net, &x, &hp, ClassifyMode::Feedforward, threads).unwrap();
            assert_eq!(again.predicted_class, first.predicted_class);
            assert_eq!(again.output_activity.data(), first.output_activity.data());
        }
    }

    #[test]
    fn argmax_breaks_ties_toward_lowest_index() {
        assert_eq!(argmax(&[0.0, 0.0, 0.0]), 0);
        assert_eq!(argmax(&[1.0, 2.0, 2.0]), 1);
        assert_eq!(argmax(&[-1.0, -3.0, -1.0]), 0);
    }

    #[test]
    fn reconstruction_identity_chain() {
        let net = identity_fcn(4, 2);
        let x = Tensor::from_vec(&[4], vec![0.5, 0.0, 0.25, 1.0]).unwrap();
        let hp = Hyperparams {
            inference_steps: 0,
            ..Hyperparams::default()
        };
        let recon = reconstruct_input(&net, &x, &hp, 2, 1).unwrap();
        assert_eq!(recon.source_layer, 2);
        assert_eq!(recon.image.data(), x.data());
    }

    #[test]
    fn reconstruction_from_untrained_net_is_finite_and_shaped() {
        let net = presets::cnn(&[(1, 0), (3, 3), (4, 3)], 2, (5, 5), 9).unwrap();
        let mut rng = Rng::new(10);
        let x = Tensor::from_vec(&[1, 5, 5], (0..25).map(|_| rng.next_f64()).collect()).unwrap();
        let hp = Hyperparams {
            inference_steps: 5,
            activity_lr: 0.01,
            ..Hyperparams::default()
        };
        for layer in 2..=4 {
            let recon = reconstruct_input(&net, &x, &hp, layer, 1).unwrap();
            assert_eq!(recon.image.shape(), &[1, 5, 5]);
            assert!(recon.image.data().iter().all(|v| v.is_finite() && *v >= 0.0));
        }
    }

    #[test]
    fn reconstruction_layer_bounds() {
        let net = presets::fcn(&[4, 5, 3], 11).unwrap();
        let x = Tensor::from_vec(&[4], vec![0.1; 4]).unwrap();
        let hp = Hyperparams::default();
        assert!(reconstruct_input(&net, &x, &hp, 1, 1).is_err());
        assert!(reconstruct_input(&net, &x, &hp, 4, 1).is_err());
        // the classification head may still be requested
        assert!(reconstruct_input(&net, &x, &hp, 3, 1).is_ok());
    }

    #[test]
    fn default_sources_exclude_input_and_head() {
        let fcn = presets::fcn_mnist(0).unwrap();
        assert_eq!(default_reconstruction_sources(&fcn), vec![2, 3, 4]);
        let cnn = presets::cnn_mnist(0).unwrap();
        assert_eq!(default_reconstruction_sources(&cnn), vec![2, 3, 4, 5, 6]);
        let fashion = presets::cnn_fashion(0).unwrap();
        assert_eq!(
            default_reconstruction_sources(&fashion),
            (2..=10).collect::<Vec<_>>()
        );
    }

    #[test]
    fn evaluate_perfect_predictor_scores_one() {
        // identity net: class = argmax of the input itself
        let net = identity_fcn(3, 3);
        let mut images = Vec::new();
        let mut labels = Vec::new();
        for i in 0..6 {
            let mut v = vec![0.1; 3];
            v[i % 3] = 0.9;
            images.extend_from_slice(&v);
            labels.push((i % 3) as u8);
        }
        let ds = crate::data::ImageDataset::from_parts("toy", (1, 1, 3), images, labels).unwrap();
        let hp = Hyperparams {
            batch_size: 4,
            inference_steps: 0,
            ..Hyperparams::default()
        };
        let report = evaluate(&net, &ds, &hp, ClassifyMode::Feedforward, 0, 1).unwrap();
        assert_eq!(report.accuracy, 1.0);
        assert_eq!(report.layers.len(), 1); // one hidden layer
        assert_eq!(report.samples, 6);
    }

    #[test]
    fn evaluate_empty_dataset_is_error() {
        let net = identity_fcn(3, 3);
        let ds = crate::data::ImageDataset::from_parts("empty", (1, 1, 3), vec![], vec![]).unwrap();
        let hp = Hyperparams::default();
        assert!(matches!(
            evaluate(&net, &ds, &hp, ClassifyMode::Feedforward, 0, 1),
            Err(Error::Data(_))
        ));
    }

    #[test]
    fn classify_batch_matches_single_calls() {
        let net = presets::fcn(&[4, 7, 3], 13).unwrap();
        let mut rng = Rng::new(14);
        let hp = Hyperparams {
            inference_steps: 3,
            activity_lr: 0.02,
            ..Hyperparams::default()
        };
        let batch = 5;
        let data: Vec<f64> = (0..4 * batch).map(|_| rng.next_f64()).collect();
        let batched = Tensor::from_vec(&[4, batch], data.clone()).unwrap();
        for mode in [ClassifyMode::Feedforward, ClassifyMode::Iterative] {
            let (preds, _) = classify_batch(&net, batched.clone(), &hp, mode, 1).unwrap();
            for b in 0..batch {
                let single: Vec<f64> = (0..4).map(|u| data[u * batch + b]).collect();
                let x = Tensor::from_vec(&[4], single).unwrap();
                let result = classify(&net, &x, &hp, mode, 1).unwrap();
                assert_eq!(result.predicted_class, preds[b], "mode {mode} sample {b}");
            }
        }
    }
}
