//! Train the fully-connected digit classifier on MNIST with the library
//! API: one explicit epoch loop over shuffled minibatches, evaluating after
//! each epoch.
//!
//! Expects the four decompressed MNIST IDX files in a directory:
//!
//! ```text
//! cargo run --release --example train_mnist_fcn -- <data-dir> [epochs] [threads]
//! ```

use std::path::PathBuf;

use dbpc::config::presets;
use dbpc::data::{assemble_batch, load_idx, minibatches, AugmentConfig};
use dbpc::inference::{evaluate, ClassifyMode};
use dbpc::learning::train_batch;
use dbpc::rng::Rng;
use dbpc::Hyperparams;

fn main() -> Result<(), dbpc::Error> {
    let mut args = std::env::args().skip(1);
    let dir = PathBuf::from(args.next().unwrap_or_else(|| "data".into()));
    let epochs: usize = args.next().map(|s| s.parse().unwrap()).unwrap_or(10);
    let threads: usize = args.next().map(|s| s.parse().unwrap()).unwrap_or(4);

    let train = load_idx(
        &dir.join("train-images-idx3-ubyte"),
        &dir.join("train-labels-idx1-ubyte"),
    )?;
    let test = load_idx(
        &dir.join("t10k-images-idx3-ubyte"),
        &dir.join("t10k-labels-idx1-ubyte"),
    )?;
    println!("loaded {} train / {} test samples", train.len(), test.len());

    let hp = Hyperparams {
        epochs,
        ..Hyperparams::default()
    };
    let augment = AugmentConfig::default();
    let mut net = presets::fcn_mnist(hp.seed)?;
    println!("network {} ({} parameters)", net.describe(), net.param_count());

    for epoch in 1..=hp.epochs {
        let start = std::time::Instant::now();
        let epoch_seed = Rng::seeded(hp.seed, &[0xE70C, epoch as u64]).next_u64();
        let mut energy = 0.0;
        for indices in minibatches(train.len(), hp.batch_size, epoch_seed)? {
            let (input, target) =
                assemble_batch(&train, &indices, &net, Some((&augment, hp.seed, epoch as u64)))?;
            let stats = train_batch(&mut net, input, target, &hp, threads)?;
            energy += stats.representation_energy * indices.len() as f64;
        }
        // accuracy on the full test set, reconstruction quality on a slice
        let report = evaluate(&net, &test, &hp, ClassifyMode::Feedforward, 512, threads)?;
        print!(
            "epoch {epoch:>2}: energy {:-9.4}  accuracy {:.4}",
            energy / train.len() as f64,
            report.accuracy
        );
        for q in &report.layers {
            print!("  psnr{}={:.2}", q.layer, q.mean_psnr);
        }
        println!("  ({:.0} s)", start.elapsed().as_secs_f64());
    }
    dbpc::checkpoint::save(&PathBuf::from("fcn-mnist.dbpc"), &net)?;
    println!("saved fcn-mnist.dbpc");
    Ok(())
}
