//! Experiment configuration: named architectures and the flat
//! section/key=value config file the CLI consumes.
//!
//! Config files look like:
//!
//! ```text
//! [network]
//! architecture = dbpc-fcn-mnist    # or "custom" with layers/input keys
//!
//! [hyperparams]
//! activity_lr = 0.1
//! weight_lr = 0.001
//! inference_steps = 20
//! batch_size = 32
//! epochs = 10
//! seed = 0
//!
//! [data]
//! train_images = data/train-images-idx3-ubyte
//! train_labels = data/train-labels-idx1-ubyte
//! test_images = data/t10k-images-idx3-ubyte
//! test_labels = data/t10k-labels-idx1-ubyte
//!
//! [augment]
//! enabled = true
//! rotation_deg = 10
//! translate_px = 2
//!
//! [output]
//! dir = runs/fcn
//!
//! [eval]
//! mode = feedforward
//! recon_samples = 1000
//! ```
//!
//! `#` starts a comment; unknown sections or keys are errors so typos
//! surface immediately.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::inference::ClassifyMode;
use crate::network::{Hyperparams, LayerSpec, NetworkParams};

/// Named architectures and small constructors used across tests and
/// examples.
pub mod presets {
    use super::*;

    /// Fully-connected chain from a width list.
    pub fn fcn(widths: &[usize], seed: u64) -> Result<NetworkParams> {
        let specs = widths
            .iter()
            .map(|&units| LayerSpec::FullyConnected { units })
            .collect();
        NetworkParams::new(specs, (0, 0), seed)
    }

    /// Convolutional stack plus flattening classifier head. The first
    /// `(channels, kernel)` entry describes the input layer (its kernel is
    /// ignored).
    pub fn cnn(
        convs: &[(usize, usize)],
        classes: usize,
        input_hw: (usize, usize),
        seed: u64,
    ) -> Result<NetworkParams> {
        let mut specs: Vec<LayerSpec> = convs
            .iter()
            .map(|&(channels, kernel)| LayerSpec::Convolutional { channels, kernel })
            .collect();
        specs.push(LayerSpec::Classifier { classes });
        NetworkParams::new(specs, input_hw, seed)
    }

    /// 784-1000-400-100-10 fully-connected network for 28x28 digits.
    pub fn fcn_mnist(seed: u64) -> Result<NetworkParams> {
        fcn(&[784, 1000, 400, 100, 10], seed)
    }

    /// 5-stage convolutional network (16-32-32-48-48 channels, 3x3 kernels)
    /// with a 10-way head, for 28x28 digits.
    pub fn cnn_mnist(seed: u64) -> Result<NetworkParams> {
        cnn(
            &[(1, 0), (16, 3), (32, 3), (32, 3), (48, 3), (48, 3)],
            10,
            (28, 28),
            seed,
        )
    }

    /// 9-stage convolutional network (16-32-32-48-48-64-64-96-96 channels,
    /// 3x3 kernels) with a 10-way head, for 28x28 images.
    pub fn cnn_fashion(seed: u64) -> Result<NetworkParams> {
        cnn(
            &[
                (1, 0),
                (16, 3),
                (32, 3),
                (32, 3),
                (48, 3),
                (48, 3),
                (64, 3),
                (64, 3),
                (96, 3),
                (96, 3),
            ],
            10,
            (28, 28),
            seed,
        )
    }

    pub const NAMES: &[&str] = &["dbpc-fcn-mnist", "dbpc-cnn-mnist", "dbpc-cnn-fashion"];

    pub fn by_name(name: &str, seed: u64) -> Result<NetworkParams> {
        match name {
            "dbpc-fcn-mnist" => fcn_mnist(seed),
            "dbpc-cnn-mnist" => cnn_mnist(seed),
            "dbpc-cnn-fashion" => cnn_fashion(seed),
            other => Err(Error::Config(format!(
                "architecture: unknown name {other:?} (expected one of {NAMES:?} or \"custom\")"
            ))),
        }
    }
}

/// Paths of the four IDX files.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DataPaths {
    pub train_images: Option<PathBuf>,
    pub train_labels: Option<PathBuf>,
    pub test_images: Option<PathBuf>,
    pub test_labels: Option<PathBuf>,
}

impl DataPaths {
    pub fn train_pair(&self) -> Result<(&Path, &Path)> {
        match (&self.train_images, &self.train_labels) {
            (Some(i), Some(l)) => Ok((i, l)),
            _ => Err(Error::Config(
                "train_images/train_labels: both paths are required".into(),
            )),
        }
    }

    pub fn test_pair(&self) -> Result<(&Path, &Path)> {
        match (&self.test_images, &self.test_labels) {
            (Some(i), Some(l)) => Ok((i, l)),
            _ => Err(Error::Config(
                "test_images/test_labels: both paths are required".into(),
            )),
        }
    }
}

/// Everything one experiment needs, parsed from a config file.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// Named architecture, or "custom" with `layers`/`input` supplied.
    /// Empty means unspecified; `eval` and `reconstruct` then trust the
    /// checkpoint's own layer table.
    pub architecture: String,
    pub custom_layers: Option<Vec<LayerSpec>>,
    pub input_hw: (usize, usize),
    pub hyperparams: Hyperparams,
    pub data: DataPaths,
    pub augment: crate::data::AugmentConfig,
    pub output_dir: PathBuf,
    pub mode: ClassifyMode,
    /// Cap on training samples (0 = all).
    pub train_limit: usize,
    /// Cap on test samples (0 = all).
    pub test_limit: usize,
    /// Test samples used for the per-epoch reconstruction metrics during
    /// training (0 = all). `eval` always uses the full (capped) test set.
    pub recon_samples: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            architecture: String::new(),
            custom_layers: None,
            input_hw: (28, 28),
            hyperparams: Hyperparams::default(),
            data: DataPaths::default(),
            augment: crate::data::AugmentConfig::default(),
            output_dir: PathBuf::from("runs/dbpc"),
            mode: ClassifyMode::Feedforward,
            train_limit: 0,
            test_limit: 0,
            recon_samples: 1000,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        let mut section = String::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| Error::Config(format!("line {}: unterminated section header", lineno + 1)))?;
                section = name.trim().to_string();
                match section.as_str() {
                    "network" | "hyperparams" | "data" | "augment" | "output" | "eval" => {}
                    other => {
                        return Err(Error::Config(format!(
                            "line {}: unknown section [{other}]",
                            lineno + 1
                        )))
                    }
                }
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected key = value, got {line:?}", lineno + 1))
            })?;
            let key = key.trim();
            let value = value.trim();
            cfg.apply(&section, key, value)
                .map_err(|e| match e {
                    Error::Config(msg) => Error::Config(format!("line {}: {msg}", lineno + 1)),
                    other => other,
                })?;
        }
        Ok(cfg)
    }

    fn apply(&mut self, section: &str, key: &str, value: &str) -> Result<()> {
        let hp = &mut self.hyperparams;
        match (section, key) {
            ("network", "architecture") => self.architecture = value.to_string(),
            ("network", "layers") => self.custom_layers = Some(parse_layers(value)?),
            ("network", "input") => self.input_hw = parse_hw(value)?,
            ("hyperparams", "forward_factor") => hp.forward_factor = parse_f64(key, value)?,
            ("hyperparams", "backward_factor") => hp.backward_factor = parse_f64(key, value)?,
            ("hyperparams", "class_factor") => hp.class_factor = parse_f64(key, value)?,
            ("hyperparams", "recon_factor") => hp.recon_factor = parse_f64(key, value)?,
            ("hyperparams", "activity_lr") => hp.activity_lr = parse_f64(key, value)?,
            ("hyperparams", "weight_lr") => hp.weight_lr = parse_f64(key, value)?,
            ("hyperparams", "inference_steps") => hp.inference_steps = parse_usize(key, value)?,
            ("hyperparams", "batch_size") => hp.batch_size = parse_usize(key, value)?,
            ("hyperparams", "epochs") => hp.epochs = parse_usize(key, value)?,
            ("hyperparams", "seed") => {
                hp.seed = value
                    .parse()
                    .map_err(|_| Error::Config(format!("seed: not an unsigned integer: {value:?}")))?
            }
            ("data", "train_images") => self.data.train_images = Some(PathBuf::from(value)),
            ("data", "train_labels") => self.data.train_labels = Some(PathBuf::from(value)),
            ("data", "test_images") => self.data.test_images = Some(PathBuf::from(value)),
            ("data", "test_labels") => self.data.test_labels = Some(PathBuf::from(value)),
            ("data", "train_limit") => self.train_limit = parse_usize(key, value)?,
            ("data", "test_limit") => self.test_limit = parse_usize(key, value)?,
            ("augment", "enabled") => self.augment.enabled = parse_bool(key, value)?,
            ("augment", "rotation_deg") => self.augment.rotation_deg = parse_f64(key, value)?,
            ("augment", "translate_px") => self.augment.translate_px = parse_usize(key, value)?,
            ("output", "dir") => self.output_dir = PathBuf::from(value),
            ("eval", "mode") => self.mode = parse_mode(value)?,
            ("eval", "recon_samples") => self.recon_samples = parse_usize(key, value)?,
            (section, key) => {
                return Err(Error::Config(format!(
                    "unknown key {key:?} in section [{section}]"
                )))
            }
        }
        Ok(())
    }

    /// Build the network this config describes, with fresh weights.
    pub fn build_network(&self, seed: u64) -> Result<NetworkParams> {
        if self.architecture.is_empty() && self.custom_layers.is_none() {
            return Err(Error::Config(
                "architecture: missing (set a preset name or \"custom\" with layers = ...)".into(),
            ));
        }
        if self.architecture == "custom" || self.architecture.is_empty() {
            let layers = self.custom_layers.clone().ok_or_else(|| {
                Error::Config("architecture = custom needs a layers = ... key".into())
            })?;
            NetworkParams::new(layers, self.input_hw, seed)
        } else {
            if self.custom_layers.is_some() {
                return Err(Error::Config(format!(
                    "layers: only valid with architecture = custom (got {:?})",
                    self.architecture
                )));
            }
            presets::by_name(&self.architecture, seed)
        }
    }

    /// Checks performed before a training run: value ranges plus existence
    /// of every referenced data file.
    pub fn validate_for_training(&self) -> Result<()> {
        self.hyperparams.validate()?;
        self.augment.validate()?;
        if self.hyperparams.inference_steps == 0 {
            return Err(Error::Config(
                "inference_steps: must be >= 1 for training".into(),
            ));
        }
        let (ti, tl) = self.data.train_pair()?;
        let (ei, el) = self.data.test_pair()?;
        for path in [ti, tl, ei, el] {
            if !path.exists() {
                return Err(Error::Config(format!(
                    "data path does not exist: {}",
                    path.display()
                )));
            }
        }
        Ok(())
    }
}

fn parse_f64(key: &str, value: &str) -> Result<f64> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("{key}: not a number: {value:?}")))
}

fn parse_usize(key: &str, value: &str) -> Result<usize> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("{key}: not an unsigned integer: {value:?}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        other => Err(Error::Config(format!("{key}: not a boolean: {other:?}"))),
    }
}

pub fn parse_mode(value: &str) -> Result<ClassifyMode> {
    match value {
        "feedforward" => Ok(ClassifyMode::Feedforward),
        "iterative" => Ok(ClassifyMode::Iterative),
        other => Err(Error::Config(format!(
            "mode: expected feedforward or iterative, got {other:?}"
        ))),
    }
}

/// Parse `28x28`.
fn parse_hw(value: &str) -> Result<(usize, usize)> {
    let (h, w) = value
        .split_once('x')
        .ok_or_else(|| Error::Config(format!("input: expected HxW, got {value:?}")))?;
    Ok((parse_usize("input height", h.trim())?, parse_usize("input width", w.trim())?))
}

/// Parse a custom layer list: `fc:784, fc:100, fc:10` or
/// `conv:1, conv:16:3, conv:32:3, classifier:10`.
fn parse_layers(value: &str) -> Result<Vec<LayerSpec>> {
    let mut specs = Vec::new();
    for (idx, token) in value.split(',').enumerate() {
        let token = token.trim();
        let parts: Vec<&str> = token.split(':').collect();
        let spec = match parts.as_slice() {
            ["fc", units] => LayerSpec::FullyConnected {
                units: parse_usize("fc units", units)?,
            },
            ["conv", channels] if idx == 0 => LayerSpec::Convolutional {
                channels: parse_usize("conv channels", channels)?,
                kernel: 0,
            },
            ["conv", channels, kernel] => LayerSpec::Convolutional {
                channels: parse_usize("conv channels", channels)?,
                kernel: parse_usize("conv kernel", kernel)?,
            },
            ["classifier", classes] => LayerSpec::Classifier {
                classes: parse_usize("classifier classes", classes)?,
            },
            _ => {
                return Err(Error::Config(format!(
                    "layers: cannot parse layer {token:?} (expected fc:N, conv:C:K or classifier:N)"
                )))
            }
        };
        specs.push(spec);
    }
    Ok(specs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_full_config() {
        let text = "\
# experiment
[network]
architecture = custom
layers = fc:4, fc:8, fc:2
input = 2x2

[hyperparams]
activity_lr = 0.05
weight_lr = 0.002
inference_steps = 12
batch_size = 8
epochs = 3
seed = 41

[data]
train_images = a.idx
train_labels = b.idx
test_images = c.idx
test_labels = d.idx

[augment]
enabled = false

[output]
dir = out/run1

[eval]
mode = iterative
recon_samples = 50
";
        let cfg = ExperimentConfig::parse(text).unwrap();
        assert_eq!(cfg.architecture, "custom");
        assert_eq!(
            cfg.custom_layers.as_deref().unwrap().len(),
            3
        );
        assert_eq!(cfg.hyperparams.activity_lr, 0.05);
        assert_eq!(cfg.hyperparams.inference_steps, 12);
        assert_eq!(cfg.hyperparams.seed, 41);
        assert!(!cfg.augment.enabled);
        assert_eq!(cfg.output_dir, PathBuf::from("out/run1"));
        assert_eq!(cfg.mode, ClassifyMode::Iterative);
        assert_eq!(cfg.recon_samples, 50);
        let net = cfg.build_network(0).unwrap();
        assert_eq!(net.layer_count(), 3);
    }

    #[test]
    fn unknown_key_names_the_field() {
        let err = ExperimentConfig::parse("[network]\narchitectur = x\n")
            .unwrap_err()
            .to_string();
        assert!(err.contains("architectur"), "{err}");
    }

    #[test]
    fn unknown_section_rejected() {
        assert!(ExperimentConfig::parse("[nets]\n").is_err());
    }

    #[test]
    fn unknown_architecture_rejected() {
        let cfg = ExperimentConfig::parse("[network]\narchitecture = resnet\n").unwrap();
        assert!(cfg.build_network(0).is_err());
    }

    #[test]
    fn preset_names_build() {
        for name in presets::NAMES {
            assert!(presets::by_name(name, 0).is_ok(), "{name}");
        }
    }
}
