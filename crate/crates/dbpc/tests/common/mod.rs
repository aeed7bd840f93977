//! Shared fixtures for integration tests: deterministic synthetic image
//! datasets written as IDX files.

use std::path::{Path, PathBuf};

use dbpc::data::{write_idx_images, write_idx_labels};
use dbpc::rng::Rng;

/// A 28x28 ten-class dataset where each class is a pair of bright blocks at
/// class-specific positions, plus noise and positional jitter. Trivially
/// learnable, visually digit-like in scale.
pub fn synthetic_images(n: usize, seed: u64) -> (Vec<u8>, Vec<u8>) {
    let mut rng = Rng::seeded(seed, &[0x0053_594E]);
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
        // second block fixed per class, bottom strip
        let col2 = (class as usize) * 2 + 2;
        for dy in 0..4 {
            for dx in 0..4 {
                let (y, x) = (23 + dy, col2 + dx);
                if y < 28 && x < 28 {
                    image[y * 28 + x] = 200 + rng.below(56) as u8;
                }
            }
        }
    }
    (images, labels)
}

/// Write train/test IDX files into `dir`, returning the four paths.
pub fn write_synthetic_idx(
    dir: &Path,
    n_train: usize,
    n_test: usize,
    seed: u64,
) -> (PathBuf, PathBuf, PathBuf, PathBuf) {
    std::fs::create_dir_all(dir).unwrap();
    let (train_images, train_labels) = synthetic_images(n_train, seed);
    let (test_images, test_labels) = synthetic_images(n_test, seed ^ 0xFFFF);
    let ti = dir.join("train-images-idx3-ubyte");
    let tl = dir.join("train-labels-idx1-ubyte");
    let ei = dir.join("t10k-images-idx3-ubyte");
    let el = dir.join("t10k-labels-idx1-ubyte");
    write_idx_images(&ti, &train_images, 28, 28).unwrap();
    write_idx_labels(&tl, &train_labels).unwrap();
    write_idx_images(&ei, &test_images, 28, 28).unwrap();
    write_idx_labels(&el, &test_labels).unwrap();
    (ti, tl, ei, el)
}

/// Fresh temp directory for one test.
pub fn test_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!(
        "dbpc-test-{tag}-{}-{:?}",
        std::process::id(),
        std::thread::current().id()
    ));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}
