//! Classification accuracy, PSNR, SSIM and confusion matrices.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Class-by-class prediction counts: rows are true classes, columns
/// predicted classes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    n_classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(n_classes: usize) -> Self {
        ConfusionMatrix {
            n_classes,
            counts: vec![0; n_classes * n_classes],
        }
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn record(&mut self, true_class: usize, predicted: usize) {
        self.counts[true_class * self.n_classes + predicted] += 1;
    }

    pub fn count(&self, true_class: usize, predicted: usize) -> u64 {
        self.counts[true_class * self.n_classes + predicted]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn from_counts(n_classes: usize, counts: Vec<u64>) -> Result<Self> {
        if counts.len() != n_classes * n_classes {
            return Err(Error::Data(format!(
                "{} counts for a {n_classes}x{n_classes} matrix",
                counts.len()
            )));
        }
        Ok(ConfusionMatrix { n_classes, counts })
    }
}

/// Fraction of correct predictions: trace over total.
pub fn accuracy(q: &ConfusionMatrix) -> Result<f64> {
    let total = q.total();
    if total == 0 {
        return Err(Error::Data("empty confusion matrix".into()));
    }
    let trace: u64 = (0..q.n_classes()).map(|i| q.count(i, i)).sum();
    Ok(trace as f64 / total as f64)
}

fn check_pair(x: &Tensor, y: &Tensor) -> Result<()> {
    if x.shape() != y.shape() {
        return Err(Error::Shape(format!(
            "image shapes differ: {:?} vs {:?}",
            x.shape(),
            y.shape()
        )));
    }
    Ok(())
}

/// Peak signal-to-noise ratio in decibels; +infinity when the images are
/// identical (zero mean squared error).
pub fn psnr(x: &Tensor, y: &Tensor, max_intensity: f64) -> Result<f64> {
    check_pair(x, y)?;
    if x.is_empty() {
        return Err(Error::Shape("psnr of empty images".into()));
    }
    let mse: f64 = x
        .data()
        .iter()
        .zip(y.data())
        .map(|(&a, &b)| (a - b) * (a - b))
        .sum::<f64>()
        / x.len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (max_intensity * max_intensity / mse).log10())
}

/// Structural similarity over the whole image (one mean, variance and
/// covariance per image; population 1/N estimators). Stabilizers follow the
/// conventional constants: C1 = (0.01·MAX)², C2 = (0.03·MAX)².
pub fn ssim(x: &Tensor, y: &Tensor, max_intensity: f64) -> Result<f64> {
    check_pair(x, y)?;
    let n = x.len();
    if n < 2 {
        return Err(Error::Shape("ssim needs at least 2 pixels".into()));
    }
    let nf = n as f64;
    let mean = |t: &Tensor| t.data().iter().sum::<f64>() / nf;
    let mu_x = mean(x);
    let mu_y = mean(y);
    let mut var_x = 0.0;
    let mut var_y = 0.0;
    let mut cov = 0.0;
    for (&a, &b) in x.data().iter().zip(y.data()) {
        var_x += (a - mu_x) * (a - mu_x);
        var_y += (b - mu_y) * (b - mu_y);
        cov += (a - mu_x) * (b - mu_y);
    }
    var_x /= nf;
    var_y /= nf;
    cov /= nf;
    let c1 = (0.01 * max_intensity) * (0.01 * max_intensity);
    let c2 = (0.03 * max_intensity) * (0.03 * max_intensity);
    Ok(((2.0 * mu_x * mu_y + c1) * (2.0 * cov + c2))
        / ((mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2)))
}
