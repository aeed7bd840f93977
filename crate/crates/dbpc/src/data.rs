//! Dataset ingestion and minibatch assembly.
//!
//! Images ship in the IDX container: big-endian u32 header words, then raw
//! unsigned bytes. Image files start with magic 0x00000803 followed by
//! count, rows, cols; label files start with 0x00000801 followed by count.
//! Pixels are scaled by 1/255 into the unit interval on load.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::network::{LayerSpec, NetworkParams};
use crate::rng::Rng;
use crate::tensor::Tensor;

const IMAGE_MAGIC: u32 = 0x0000_0803;
const LABEL_MAGIC: u32 = 0x0000_0801;
const AUGMENT_STREAM: u64 = 0x0041_5547_4D45_4E54;

/// Normalized images with integer labels.
#[derive(Debug, Clone)]
pub struct ImageDataset {
    pub name: String,
    channels: usize,
    height: usize,
    width: usize,
    images: Vec<f64>,
    labels: Vec<u8>,
}

impl ImageDataset {
    /// Build a dataset from in-memory values (synthetic data, tests).
    /// Intensities must already be in the unit interval.
    pub fn from_parts(
        name: &str,
        (channels, height, width): (usize, usize, usize),
        images: Vec<f64>,
        labels: Vec<u8>,
    ) -> Result<Self> {
        let per_image = channels * height * width;
        if per_image == 0 || images.len() != labels.len() * per_image {
            return Err(Error::Data(format!(
                "{} pixel values do not hold {} images of {per_image} pixels",
                images.len(),
                labels.len()
            )));
        }
        if images.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Data("intensities must lie in [0,1]".into()));
        }
        Ok(ImageDataset {
            name: name.to_string(),
            channels,
            height,
            width,
            images,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// (channels, height, width) of one image.
    pub fn image_dims(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }

    pub fn pixels_per_image(&self) -> usize {
        self.channels * self.height * self.width
    }

    pub fn image(&self, index: usize) -> &[f64] {
        let n = self.pixels_per_image();
        &self.images[index * n..(index + 1) * n]
    }

    pub fn label(&self, index: usize) -> u8 {
        self.labels[index]
    }

    /// Keep only the first `limit` samples; 0 keeps everything.
    pub fn truncated(mut self, limit: usize) -> Self {
        if limit > 0 && limit < self.len() {
            self.images.truncate(limit * self.pixels_per_image());
            self.labels.truncate(limit);
        }
        self
    }
}

fn read_u32_be(reader: &mut impl Read, offset: usize, what: &str) -> Result<u32> {
    let mut buf = [0u8; 4];
    reader.read_exact(&mut buf).map_err(|_| {
        Error::Format(format!("{what}: truncated at offset {offset}, expected 4 bytes"))
    })?;
    Ok(u32::from_be_bytes(buf))
}

/// Load an IDX image/label file pair into a dataset.
pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<ImageDataset> {
    let mut ir = BufReader::new(File::open(images_path).map_err(|e| {
        Error::Data(format!("cannot open {}: {e}", images_path.display()))
    })?);
    let magic = read_u32_be(&mut ir, 0, "image file")?;
    if magic != IMAGE_MAGIC {
        return Err(Error::Format(format!(
            "image file {}: expected magic {IMAGE_MAGIC:#010x} at offset 0, got {magic:#010x}",
            images_path.display()
        )));
    }
    let count = read_u32_be(&mut ir, 4, "image file")? as usize;
    let rows = read_u32_be(&mut ir, 8, "image file")? as usize;
    let cols = read_u32_be(&mut ir, 12, "image file")? as usize;
    let mut pixels = vec![0u8; count * rows * cols];
    ir.read_exact(&mut pixels).map_err(|_| {
        Error::Format(format!(
            "image file {}: truncated pixel data at offset 16 (wanted {} bytes)",
            images_path.display(),
            pixels.len()
        ))
    })?;

    let mut lr = BufReader::new(File::open(labels_path).map_err(|e| {
        Error::Data(format!("cannot open {}: {e}", labels_path.display()))
    })?);
    let magic = read_u32_be(&mut lr, 0, "label file")?;
    if magic != LABEL_MAGIC {
        return Err(Error::Format(format!(
            "label file {}: expected magic {LABEL_MAGIC:#010x} at offset 0, got {magic:#010x}",
            labels_path.display()
        )));
    }
    let label_count = read_u32_be(&mut lr, 4, "label file")? as usize;
    if label_count != count {
        return Err(Error::Format(format!(
            "count mismatch at offset 4: {count} images but {label_count} labels"
        )));
    }
    let mut labels = vec![0u8; label_count];
    lr.read_exact(&mut labels).map_err(|_| {
        Error::Format(format!(
            "label file {}: truncated label data at offset 8 (wanted {label_count} bytes)",
            labels_path.display()
        ))
    })?;
    for (i, &label) in labels.iter().enumerate() {
        if label > 9 {
            return Err(Error::Format(format!(
                "label file {}: label {label} out of range 0..9 at offset {}",
                labels_path.display(),
                8 + i
            )));
        }
    }

    let images = pixels.iter().map(|&p| p as f64 / 255.0).collect();
    let name = images_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into());
    ImageDataset::from_parts(&name, (1, rows, cols), images, labels)
}

/// Write images as an IDX file (subset extraction, synthetic fixtures).
pub fn write_idx_images(path: &Path, images: &[u8], rows: usize, cols: usize) -> Result<()> {
    if rows * cols == 0 || images.len() % (rows * cols) != 0 {
        return Err(Error::Data(format!(
            "{} bytes is not a whole number of {rows}x{cols} images",
            images.len()
        )));
    }
    let count = images.len() / (rows * cols);
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&IMAGE_MAGIC.to_be_bytes())?;
    w.write_all(&(count as u32).to_be_bytes())?;
    w.write_all(&(rows as u32).to_be_bytes())?;
    w.write_all(&(cols as u32).to_be_bytes())?;
    w.write_all(images)?;
    Ok(())
}

/// Write labels as an IDX file.
pub fn write_idx_labels(path: &Path, labels: &[u8]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&LABEL_MAGIC.to_be_bytes())?;
    w.write_all(&(labels.len() as u32).to_be_bytes())?;
    w.write_all(labels)?;
    Ok(())
}

/// Unit basis vector for a class label.
pub fn one_hot(label: u8, n_classes: usize) -> Result<Tensor> {
    if label as usize >= n_classes {
        return Err(Error::Data(format!(
            "label {label} out of range for {n_classes} classes"
        )));
    }
    let mut data = vec![0.0; n_classes];
    data[label as usize] = 1.0;
    Tensor::from_vec(&[n_classes], data)
}

/// Augmentation settings: random rotation then random integer translation.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentConfig {
    pub enabled: bool,
    /// Maximum absolute rotation, degrees.
    pub rotation_deg: f64,
    /// Maximum absolute shift, pixels, per axis.
    pub translate_px: usize,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            enabled: true,
            rotation_deg: 10.0,
            translate_px: 2,
        }
    }
}

impl AugmentConfig {
    pub fn disabled() -> Self {
        AugmentConfig {
            enabled: false,
            rotation_deg: 0.0,
            translate_px: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.rotation_deg.is_finite() || self.rotation_deg < 0.0 {
            return Err(Error::Config(format!(
                "rotation_deg must be >= 0, got {}",
                self.rotation_deg
            )));
        }
        Ok(())
    }
}

/// Rotate (bilinear, about the image center) and translate one image.
/// Out-of-frame pixels are zero; output is clipped back to the unit
/// interval. The caller
/// supplies the random generator so parallel batch assembly can hand each
/// sample its own seeded stream.
pub fn augment(
    image: &[f64],
    (channels, height, width): (usize, usize, usize),
    cfg: &AugmentConfig,
    rng: &mut Rng,
) -> Vec<f64> {
    if !cfg.enabled {
        return image.to_vec();
    }
    let theta = rng
        .uniform(-cfg.rotation_deg, cfg.rotation_deg)
        .to_radians();
    let dy = rng.signed_below(cfg.translate_px);
    let dx = rng.signed_below(cfg.translate_px);

    let (sin, cos) = theta.sin_cos();
    let cy = (height as f64 - 1.0) / 2.0;
    let cx = (width as f64 - 1.0) / 2.0;
    let mut out = vec![0.0; image.len()];
    for c in 0..channels {
        let plane = &image[c * height * width..(c + 1) * height * width];
        let out_plane = &mut out[c * height * width..(c + 1) * height * width];
        for oy in 0..height {
            for ox in 0..width {
                // translate, then invert the rotation to find the source
                let ty = oy as i64 - dy;
                let tx = ox as i64 - dx;
                if ty < 0 || tx < 0 || ty >= height as i64 || tx >= width as i64 {
                    continue;
                }
                let ry = ty as f64 - cy;
                let rx = tx as f64 - cx;
                let sy = cos * ry + sin * rx + cy;
                let sx = -sin * ry + cos * rx + cx;
                let y0 = sy.floor();
                let x0 = sx.floor();
                let fy = sy - y0;
                let fx = sx - x0;
                let mut acc = 0.0;
                for (ny, wy) in [(y0, 1.0 - fy), (y0 + 1.0, fy)] {
                    for (nx, wx) in [(x0, 1.0 - fx), (x0 + 1.0, fx)] {
                        if wy == 0.0 || wx == 0.0 {
                            continue;
                        }
                        if ny < 0.0 || nx < 0.0 || ny >= height as f64 || nx >= width as f64 {
                            continue;
                        }
                        acc += wy * wx * plane[ny as usize * width + nx as usize];
                    }
                }
                out_plane[oy * width + ox] = acc.clamp(0.0, 1.0);
            }
        }
    }
    out
}

/// Shuffled minibatch index sequence for one epoch. The final partial batch
/// is kept. Identical seeds give identical sequences.
pub fn minibatches(samples: usize, batch_size: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if batch_size == 0 {
        return Err(Error::Config("batch_size must be >= 1".into()));
    }
    let mut order: Vec<usize> = (0..samples).collect();
    Rng::new(seed).shuffle(&mut order);
    Ok(order.chunks(batch_size).map(|c| c.to_vec()).collect())
}

/// Assemble a batched input/target pair for the given sample indices.
///
/// The input tensor matches layer 1 of `params` (flattened for a
/// fully-connected input layer, channels-first map otherwise) with the
/// batch as the innermost axis. Targets are one-hot columns for layer L.
/// When `augment_with` is supplied, each sample is augmented with its own
/// stream seeded by (seed, epoch, dataset index), so the result does not
/// depend on batch order or threading.
pub fn assemble_batch(
    dataset: &ImageDataset,
    indices: &[usize],
    params: &NetworkParams,
    augment_with: Option<(&AugmentConfig, u64, u64)>,
) -> Result<(Tensor, Tensor)> {
    let batch = indices.len();
    if batch == 0 {
        return Err(Error::Data("empty batch".into()));
    }
    let dims = dataset.image_dims();
    let per_image = dataset.pixels_per_image();
    if params.layer_units(1) != per_image {
        return Err(Error::Shape(format!(
            "layer 1 has {} units but images have {per_image} pixels",
            params.layer_units(1)
        )));
    }
    let n_classes = params.layer_units(params.layer_count());

    let mut input = vec![0.0; per_image * batch];
    let mut target = vec![0.0; n_classes * batch];
    let mut augmented: Vec<f64>;
    for (b, &idx) in indices.iter().enumerate() {
        let image: &[f64] = match augment_with {
            Some((cfg, seed, epoch)) if cfg.enabled => {
                let mut rng = Rng::seeded(seed, &[AUGMENT_STREAM, epoch, idx as u64]);
                augmented = augment(dataset.image(idx), dims, cfg, &mut rng);
                &augmented
            }
            _ => dataset.image(idx),
        };
        for (u, &v) in image.iter().enumerate() {
            input[u * batch + b] = v;
        }
        let label = dataset.label(idx) as usize;
        if label >= n_classes {
            return Err(Error::Data(format!(
                "label {label} out of range for {n_classes} classes (sample {idx})"
            )));
        }
        target[label * batch + b] = 1.0;
    }
    let input = Tensor::from_vec(&params.batched_shape(1, batch), input)?;
    let target = Tensor::from_vec(&params.batched_shape(params.layer_count(), batch), target)?;
    Ok((input, target))
}

/// Batched input tensor only (evaluation paths that ignore labels).
pub fn assemble_inputs(
    dataset: &ImageDataset,
    indices: &[usize],
    params: &NetworkParams,
) -> Result<Tensor> {
    let batch = indices.len();
    let per_image = dataset.pixels_per_image();
    if params.layer_units(1) != per_image {
        return Err(Error::Shape(format!(
            "layer 1 has {} units but images have {per_image} pixels",
            params.layer_units(1)
        )));
    }
    let mut input = vec![0.0; per_image * batch];
    for (b, &idx) in indices.iter().enumerate() {
        for (u, &v) in dataset.image(idx).iter().enumerate() {
            input[u * batch + b] = v;
        }
    }
    Tensor::from_vec(&params.batched_shape(1, batch), input)
}

/// True when layer 1 of `params` accepts this dataset's images.
pub fn compatible_input(dataset: &ImageDataset, params: &NetworkParams) -> bool {
    let (c, h, w) = dataset.image_dims();
    match *params.spec(1) {
        LayerSpec::FullyConnected { units } => units == c * h * w,
        LayerSpec::Convolutional { channels, .. } => {
            channels == c && params.input_hw() == (h, w)
        }
        LayerSpec::Classifier { .. } => false,
    }
}
