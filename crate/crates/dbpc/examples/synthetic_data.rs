//! Generate a synthetic 28x28 ten-class dataset as IDX files plus a ready
//! config, so the whole train/eval/reconstruct pipeline can be exercised
//! without downloading anything.
//!
//! ```text
//! cargo run --release --example synthetic_data -- [dir] [n_train] [n_test]
//! cargo run --release -- train --config <dir>/synthetic.cfg --threads 4
//! ```

use std::path::PathBuf;

use dbpc::data::{write_idx_images, write_idx_labels};
use dbpc::rng::Rng;

/// Each class is a pair of bright blocks at class-specific positions over a
/// noisy background, with positional jitter.
fn synthetic_images(n: usize, seed: u64) -> (Vec<u8>, Vec<u8>) {
    let mut rng = Rng::seeded(seed, &[0x53594E]);
    let mut images = vec![0u8; n * 28 * 28];
    let mut labels = vec![0u8; n];
    for i in 0..n {
        let class = (i % 10) as u8;
        labels[i] = class;
        let image = &mut images[i * 28 * 28..(i + 1) * 28 * 28];
        for px in image.iter_mut() {
            *px = rng.below(25) as u8;
        }
        let row = (class as usize % 5) * 5 + 1 + rng.below(3);
        let col = (class as usize / 5) * 12 + 3 + rng.below(3);
        for dy in 0..6 {
            for dx in 0..6 {
                let (y, x) = (row + dy, col + dx);
                if y < 28 && x < 28 {
                    image[y * 28 + x] = 200 + rng.below(56) as u8;
                }
            }
        }
        let col2 = (class as usize) * 2 + 2;
        for dy in 0..4 {
            for dx in 0..4 {
                let (y, x) = (23 + dy, col2 + dx);
                if x < 28 {
                    image[y * 28 + x] = 200 + rng.below(56) as u8;
                }
            }
        }
    }
    (images, labels)
}

fn main() -> Result<(), dbpc::Error> {
    let mut args = std::env::args().skip(1);
    let dir = PathBuf::from(args.next().unwrap_or_else(|| "synthetic-data".into()));
    let n_train: usize = args.next().map(|s| s.parse().unwrap()).unwrap_or(6000);
    let n_test: usize = args.next().map(|s| s.parse().unwrap()).unwrap_or(1000);
    std::fs::create_dir_all(&dir)?;

    let (train_images, train_labels) = synthetic_images(n_train, 1);
    let (test_images, test_labels) = synthetic_images(n_test, 2);
    write_idx_images(&dir.join("train-images-idx3-ubyte"), &train_images, 28, 28)?;
    write_idx_labels(&dir.join("train-labels-idx1-ubyte"), &train_labels)?;
    write_idx_images(&dir.join("t10k-images-idx3-ubyte"), &test_images, 28, 28)?;
    write_idx_labels(&dir.join("t10k-labels-idx1-ubyte"), &test_labels)?;

    let config = format!(
        "[network]\n\
         architecture = dbpc-fcn-mnist\n\n\
         [hyperparams]\n\
         epochs = 3\n\
         seed = 0\n\n\
         [data]\n\
         train_images = {0}/train-images-idx3-ubyte\n\
         train_labels = {0}/train-labels-idx1-ubyte\n\
         test_images = {0}/t10k-images-idx3-ubyte\n\
         test_labels = {0}/t10k-labels-idx1-ubyte\n\n\
         [augment]\n\
         enabled = false\n\n\
         [output]\n\
         dir = {0}/run\n\n\
         [eval]\n\
         recon_samples = 200\n",
        dir.display()
    );
    let cfg_path = dir.join("synthetic.cfg");
    std::fs::write(&cfg_path, config)?;

    println!("wrote {n_train} train / {n_test} test samples under {}", dir.display());
    println!("next: cargo run --release -- train --config {} --threads 4", cfg_path.display());
    Ok(())
}
