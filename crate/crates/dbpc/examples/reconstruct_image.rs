//! Reconstruct one test image from the representation at every hidden
//! layer and write the results as PGM files. Shallower layers keep more
//! detail; the quality falls off with depth.
//!
//! ```text
//! cargo run --release --example reconstruct_image -- <checkpoint> <data-dir> [index]
//! ```

use std::path::PathBuf;

use dbpc::data::load_idx;
use dbpc::inference::{default_reconstruction_sources, reconstruct_from_layer};
use dbpc::learning::infer_representations;
use dbpc::metrics::psnr;
use dbpc::pgm::write_pgm;
use dbpc::state::ActivationState;
use dbpc::tensor::Tensor;
use dbpc::Hyperparams;

fn main() -> Result<(), dbpc::Error> {
    let mut args = std::env::args().skip(1);
    let ckpt = PathBuf::from(args.next().expect("usage: reconstruct_image <ckpt> <data-dir>"));
    let dir = PathBuf::from(args.next().unwrap_or_else(|| "data".into()));
    let index: usize = args.next().map(|s| s.parse().unwrap()).unwrap_or(0);

    let net = dbpc::checkpoint::load(&ckpt)?;
    let test = load_idx(
        &dir.join("t10k-images-idx3-ubyte"),
        &dir.join("t10k-labels-idx1-ubyte"),
    )?;
    let (_, h, w) = test.image_dims();
    let image = test.image(index).to_vec();
    write_pgm(&PathBuf::from("recon_original.pgm"), w, h, &image, 1.0)?;

    // estimate representations with the input clamped, then run the
    // feedback chain down from each layer
    let hp = Hyperparams::default();
    let input = Tensor::from_vec(&net.batched_shape(1, 1), image.clone())?;
    let mut state = ActivationState::testing(&net, input, 1)?;
    infer_representations(&net, &mut state, &hp, 1)?;

    let original = Tensor::from_vec(&[image.len()], image)?;
    for layer in default_reconstruction_sources(&net) {
        let recon = reconstruct_from_layer(&net, &state, layer)?;
        let flat = recon.image.clone().reshaped(&[original.len()])?;
        let path = PathBuf::from(format!("recon_layer{layer}.pgm"));
        write_pgm(&path, w, h, recon.image.data(), 1.0)?;
        println!(
            "layer {layer}: psnr {:>6.2} dB -> {}",
            psnr(&original, &flat, 1.0)?,
            path.display()
        );
    }
    Ok(())
}
