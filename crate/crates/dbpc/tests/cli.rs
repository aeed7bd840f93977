//! End-to-end tests of the command surface on synthetic IDX data:
//! train -> CSV/checkpoints, eval, reconstruct -> PGM, params, gradcheck,
//! and the determinism contract.

mod common;

use std::path::Path;

use common::{test_dir, write_synthetic_idx};
use dbpc::checkpoint;
use dbpc::cli::{cmd_eval, cmd_gradcheck, cmd_reconstruct, cmd_train, run, Flags};
use dbpc::config::ExperimentConfig;
use dbpc::error::Error;

fn config_text(
    dir: &Path,
    layers: &str,
    input: &str,
    epochs: usize,
    extra_hp: &str,
    out: &Path,
) -> String {
    format!(
        "[network]\n\
         architecture = custom\n\
         layers = {layers}\n\
         input = {input}\n\
         [hyperparams]\n\
         inference_steps = 6\n\
         activity_lr = 0.05\n\
         weight_lr = 0.02\n\
         batch_size = 16\n\
         epochs = {epochs}\n\
         seed = 7\n\
         {extra_hp}\n\
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
         recon_samples = 16\n",
        dir.display(),
        out.display()
    )
}

fn fcn_config(dir: &Path, epochs: usize, out: &Path) -> ExperimentConfig {
    ExperimentConfig::parse(&config_text(
        dir,
        "fc:784, fc:32, fc:16, fc:10",
        "28x28",
        epochs,
        "",
        out,
    ))
    .unwrap()
}

#[test]
fn train_writes_csv_and_checkpoints() {
    let dir = test_dir("train");
    write_synthetic_idx(&dir, 96, 32, 1);
    let out = dir.join("run");
    let cfg = fcn_config(&dir, 2, &out);
    cmd_train(&cfg, 1).unwrap();

    let csv = std::fs::read_to_string(out.join("train_log.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(
        lines[0],
        "epoch,train_energy,test_accuracy,psnr_layer2,psnr_layer3,ssim_layer2,ssim_layer3"
    );
    assert_eq!(lines.len(), 3); // header + 2 epochs
    assert!(lines[1].starts_with("1,"));
    assert!(lines[2].starts_with("2,"));

    let latest = checkpoint::load(&out.join("latest.dbpc")).unwrap();
    assert_eq!(latest.describe(), "fc:784-fc:32-fc:16-fc:10");
    assert!(out.join("best-accuracy.dbpc").exists());
}

#[test]
fn train_zero_epochs_writes_initialized_checkpoint_and_empty_log() {
    let dir = test_dir("zeroepochs");
    // no data files needed: epochs = 0 never reads them
    let out = dir.join("run");
    let cfg = fcn_config(&dir, 0, &out);
    cmd_train(&cfg, 1).unwrap();
    let csv = std::fs::read_to_string(out.join("train_log.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1); // header only
    let net = checkpoint::load(&out.join("latest.dbpc")).unwrap();
    assert_eq!(net.param_count(), 784 * 32 + 32 * 16 + 16 * 10);
    assert!(!out.join("best-accuracy.dbpc").exists());
}

#[test]
fn train_missing_data_is_config_error() {
    let dir = test_dir("missingdata");
    let out = dir.join("run");
    let cfg = fcn_config(&dir, 1, &out);
    match cmd_train(&cfg, 1) {
        Err(Error::Config(msg)) => assert!(msg.contains("does not exist"), "{msg}"),
        other => panic!("expected config error, got {other:?}"),
    }
}

#[test]
fn same_seed_same_bytes_across_runs_and_threads() {
    let dir = test_dir("determinism");
    write_synthetic_idx(&dir, 64, 16, 2);
    let mut outputs = Vec::new();
    for (tag, threads) in [("a", 1usize), ("b", 1), ("c", 4)] {
        let out = dir.join(tag);
        let mut cfg = fcn_config(&dir, 1, &out);
        cfg.augment.enabled = true; // exercise the augmentation streams too
        cmd_train(&cfg, threads).unwrap();
        outputs.push((
            std::fs::read(out.join("train_log.csv")).unwrap(),
            std::fs::read(out.join("latest.dbpc")).unwrap(),
        ));
    }
    assert_eq!(outputs[0], outputs[1], "repeat run differs");
    assert_eq!(outputs[0], outputs[2], "thread count changed the results");
}

#[test]
fn eval_reports_one_row_per_hidden_layer() {
    let dir = test_dir("eval");
    write_synthetic_idx(&dir, 48, 16, 3);
    let out = dir.join("run");
    let cfg = fcn_config(&dir, 1, &out);
    cmd_train(&cfg, 1).unwrap();
    cmd_eval(&out.join("latest.dbpc"), &cfg, 1).unwrap();
    let eval = std::fs::read_to_string(out.join("eval.csv")).unwrap();
    let lines: Vec<&str> = eval.lines().collect();
    assert_eq!(lines[0], "layer,psnr,ssim");
    assert_eq!(lines.len(), 3); // layers 2 and 3
    assert!(lines[1].starts_with("2,"));
    assert!(lines[2].starts_with("3,"));
}

#[test]
fn eval_architecture_mismatch_is_checkpoint_error() {
    let dir = test_dir("mismatch");
    write_synthetic_idx(&dir, 48, 16, 4);
    let out = dir.join("run");
    let cfg = fcn_config(&dir, 1, &out);
    cmd_train(&cfg, 1).unwrap();
    let other = ExperimentConfig::parse(&config_text(
        &dir,
        "fc:784, fc:24, fc:10",
        "28x28",
        1,
        "",
        &out,
    ))
    .unwrap();
    match cmd_eval(&out.join("latest.dbpc"), &other, 1) {
        Err(Error::Checkpoint(msg)) => assert!(msg.contains("fc:24"), "{msg}"),
        other => panic!("expected checkpoint error, got {other:?}"),
    }
}

#[test]
fn reconstruct_writes_pgm_files_with_mnist_shaped_header() {
    let dir = test_dir("recon");
    write_synthetic_idx(&dir, 48, 16, 5);
    let out = dir.join("run");
    let cfg = fcn_config(&dir, 1, &out);
    cmd_train(&cfg, 1).unwrap();

    let cfg_path = dir.join("recon.cfg");
    std::fs::write(
        &cfg_path,
        config_text(&dir, "fc:784, fc:32, fc:16, fc:10", "28x28", 1, "", &out),
    )
    .unwrap();
    let flags = Flags {
        checkpoint: Some(out.join("latest.dbpc")),
        config: Some(cfg_path),
        index: Some(0),
        layers: Some(vec![2, 3]),
        threads: 1,
        ..Flags::default()
    };
    cmd_reconstruct(&flags).unwrap();
    for name in ["recon_original.pgm", "recon_layer2.pgm", "recon_layer3.pgm"] {
        let bytes = std::fs::read(out.join(name)).unwrap();
        assert!(bytes.starts_with(b"P5\n28 28\n255\n"), "{name}");
        assert_eq!(bytes.len(), 13 + 28 * 28, "{name}");
    }
}

#[test]
fn reconstruct_from_pgm_input() {
    let dir = test_dir("reconpgm");
    let out = dir.join("run");
    let cfg = fcn_config(&dir, 0, &out);
    cmd_train(&cfg, 1).unwrap(); // initialized checkpoint only
    let input = dir.join("input.pgm");
    let values: Vec<f64> = (0..28 * 28).map(|i| (i % 29) as f64 / 28.0).collect();
    dbpc::pgm::write_pgm(&input, 28, 28, &values, 1.0).unwrap();
    let flags = Flags {
        checkpoint: Some(out.join("latest.dbpc")),
        input: Some(input),
        out: Some(out.clone()),
        layers: Some(vec![2]),
        threads: 1,
        ..Flags::default()
    };
    cmd_reconstruct(&flags).unwrap();
    assert!(out.join("recon_layer2.pgm").exists());
}

#[test]
fn reconstruct_bad_layer_is_index_error() {
    let dir = test_dir("reconbad");
    let out = dir.join("run");
    let cfg = fcn_config(&dir, 0, &out);
    cmd_train(&cfg, 1).unwrap();
    let input = dir.join("input.pgm");
    dbpc::pgm::write_pgm(&input, 28, 28, &vec![0.5; 784], 1.0).unwrap();
    let flags = Flags {
        checkpoint: Some(out.join("latest.dbpc")),
        input: Some(input),
        out: Some(out),
        layers: Some(vec![9]),
        threads: 1,
        ..Flags::default()
    };
    match cmd_reconstruct(&flags) {
        Err(Error::Index(msg)) => assert!(msg.contains('9'), "{msg}"),
        other => panic!("expected index error, got {other:?}"),
    }
}

#[test]
fn gradcheck_command_passes() {
    cmd_gradcheck(0).unwrap();
}

#[test]
fn run_dispatch_and_exit_codes() {
    assert_eq!(run(&["params".into(), "--arch".into(), "dbpc-fcn-mnist".into()]), 0);
    assert_ne!(run(&["params".into(), "--arch".into(), "alexnet".into()]), 0);
    assert_ne!(run(&["frobnicate".into()]), 0);
    assert_ne!(run(&[]), 0);
    assert_eq!(run(&["--help".into()]), 0);
}

#[test]
fn unknown_config_key_error_names_field() {
    let dir = test_dir("badcfg");
    let path = dir.join("bad.cfg");
    std::fs::write(&path, "[hyperparams]\nlerning_rate = 3\n").unwrap();
    let err = ExperimentConfig::load(&path).unwrap_err().to_string();
    assert!(err.contains("lerning_rate"), "{err}");
}
