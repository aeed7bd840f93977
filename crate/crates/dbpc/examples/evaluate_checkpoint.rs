//! Evaluate a trained checkpoint: classification accuracy plus mean PSNR
//! and SSIM of the reconstructions from every hidden layer.
//!
//! ```text
//! cargo run --release --example evaluate_checkpoint -- <checkpoint> <data-dir> [threads]
//! ```

use std::path::PathBuf;

use dbpc::data::load_idx;
use dbpc::inference::{evaluate, ClassifyMode};
use dbpc::Hyperparams;

fn main() -> Result<(), dbpc::Error> {
    let mut args = std::env::args().skip(1);
    let ckpt = PathBuf::from(args.next().expect("usage: evaluate_checkpoint <ckpt> <data-dir>"));
    let dir = PathBuf::from(args.next().unwrap_or_else(|| "data".into()));
    let threads: usize = args.next().map(|s| s.parse().unwrap()).unwrap_or(4);

    let net = dbpc::checkpoint::load(&ckpt)?;
    let test = load_idx(
        &dir.join("t10k-images-idx3-ubyte"),
        &dir.join("t10k-labels-idx1-ubyte"),
    )?;
    let hp = Hyperparams::default();
    let report = evaluate(&net, &test, &hp, ClassifyMode::Feedforward, 0, threads)?;
    println!(
        "{} on {} samples: accuracy {:.4}",
        net.describe(),
        report.samples,
        report.accuracy
    );
    println!("layer   psnr (dB)    ssim");
    for q in &report.layers {
        println!("{:>5}   {:>8.2}   {:.4}", q.layer, q.mean_psnr, q.mean_ssim);
    }
    Ok(())
}
