//! Desk-scale end-to-end run on synthetic data: the full train -> log ->
//! checkpoint -> eval -> reconstruct chain, with real learning. This is the
//! always-available stand-in for the full-MNIST experiment: same code
//! paths, smaller network and dataset.

mod common;

use common::{test_dir, write_synthetic_idx};
use dbpc::cli::{cmd_eval, cmd_train};
use dbpc::config::ExperimentConfig;
use dbpc::inference::{evaluate, ClassifyMode};

#[test]
fn synthetic_training_learns_and_reconstruction_degrades_with_depth() {
    let dir = test_dir("pipeline");
    write_synthetic_idx(&dir, 3000, 500, 11);
    let out = dir.join("run");
    let cfg = ExperimentConfig::parse(&format!(
        "[network]\n\
         architecture = custom\n\
         layers = fc:784, fc:128, fc:64, fc:10\n\
         [hyperparams]\n\
         weight_lr = 0.005\n\
         epochs = 4\n\
         seed = 3\n\
         [data]\n\
         train_images = {0}/train-images-idx3-ubyte\n\
         train_labels = {0}/train-labels-idx1-ubyte\n\
         test_images = {0}/t10k-images-idx3-ubyte\n\
         test_labels = {0}/t10k-labels-idx1-ubyte\n\
         [augment]\n\
         enabled = false\n\
         [output]\n\
         dir = {1}\n\
         [eval]\n\
         recon_samples = 64\n",
        dir.display(),
        out.display()
    ))
    .unwrap();
    cmd_train(&cfg, 2).unwrap();

    // the CSV carries the learning curve; the final epoch must classify well
    let csv = std::fs::read_to_string(out.join("train_log.csv")).unwrap();
    let last = csv.lines().last().unwrap();
    let accuracy: f64 = last.split(',').nth(2).unwrap().parse().unwrap();
    assert!(
        accuracy >= 0.90,
        "synthetic test accuracy only {accuracy} after 4 epochs\n{csv}"
    );

    // eval command round-trips the checkpoint and reports both hidden layers
    cmd_eval(&out.join("best-accuracy.dbpc"), &cfg, 2).unwrap();
    let eval = std::fs::read_to_string(out.join("eval.csv")).unwrap();
    let rows: Vec<Vec<f64>> = eval
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 2);
    let (psnr2, psnr3) = (rows[0][1], rows[1][1]);
    assert!(
        psnr2 > psnr3,
        "reconstruction quality should fall with depth: {psnr2} vs {psnr3}"
    );
    assert!(psnr2 > 10.0, "layer-2 psnr too low: {psnr2}");

    // library-level evaluation agrees with the CSV the command wrote
    let net = dbpc::checkpoint::load(&out.join("best-accuracy.dbpc")).unwrap();
    let (ei, el) = cfg.data.test_pair().unwrap();
    let test = dbpc::data::load_idx(ei, el).unwrap();
    let report = evaluate(&net, &test, &cfg.hyperparams, ClassifyMode::Feedforward, 0, 2).unwrap();
    assert!((report.layers[0].mean_psnr - psnr2).abs() < 1e-6);
}
