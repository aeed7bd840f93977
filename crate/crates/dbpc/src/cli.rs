//! The `dbpc` command-line surface.
//!
//! Subcommands: `train`, `eval`, `reconstruct`, `gradcheck`, `params`.
//! Every command exits nonzero on any error. Outputs are deterministic for
//! a fixed config and seed, independent of `--threads`.

use std::fs::File;
use std::io::Write as IoWrite;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::checkpoint;
use crate::config::{parse_mode, presets, ExperimentConfig};
use crate::data::{assemble_batch, load_idx, minibatches, ImageDataset};
use crate::error::{Error, Result};
use crate::gradcheck;
use crate::inference::{
    default_reconstruction_sources, evaluate, reconstruct_from_layer, ClassifyMode, MetricsReport,
};
use crate::learning::{infer_representations, train_batch};
use crate::network::NetworkParams;
use crate::pgm;
use crate::rng::Rng;
use crate::state::ActivationState;
use crate::tensor::Tensor;

const SHUFFLE_STREAM: u64 = 0x0053_4855_4646_4C45;

const USAGE: &str = "\
usage: dbpc <command> [flags]

commands:
  train        train a network from a config file
  eval         evaluate a checkpoint: accuracy and per-layer PSNR/SSIM
  reconstruct  write PGM reconstructions of one image from chosen layers
  gradcheck    finite-difference check of every analytic gradient
  params       print the parameter count of an architecture

flags:
  --config PATH      experiment config file
  --checkpoint PATH  checkpoint to evaluate / reconstruct from
  --out DIR          output directory (overrides the config)
  --seed U64         seed (overrides the config)
  --threads N        worker threads (default 1; results are identical for any N)
  --mode M           classification mode: feedforward | iterative
  --arch NAME        architecture name (params command)
  --index N          test-set image index (reconstruct)
  --input PATH       PGM image to reconstruct (reconstruct)
  --layers L1,L2     source layers for reconstruction (default: all hidden)
";

/// Parsed command-line flags.
#[derive(Debug, Default, Clone)]
pub struct Flags {
    pub config: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub threads: usize,
    pub mode: Option<ClassifyMode>,
    pub arch: Option<String>,
    pub index: Option<usize>,
    pub input: Option<PathBuf>,
    pub layers: Option<Vec<usize>>,
}

impl Flags {
    pub fn parse(args: &[String]) -> Result<Flags> {
        let mut flags = Flags {
            threads: 1,
            ..Flags::default()
        };
        let mut it = args.iter();
        while let Some(flag) = it.next() {
            let mut value = |name: &str| -> Result<&String> {
                it.next()
                    .ok_or_else(|| Error::Config(format!("{name} needs a value")))
            };
            match flag.as_str() {
                "--config" => flags.config = Some(PathBuf::from(value("--config")?)),
                "--checkpoint" => flags.checkpoint = Some(PathBuf::from(value("--checkpoint")?)),
                "--out" => flags.out = Some(PathBuf::from(value("--out")?)),
                "--seed" => {
                    flags.seed = Some(value("--seed")?.parse().map_err(|_| {
                        Error::Config("--seed needs an unsigned integer".into())
                    })?)
                }
                "--threads" => {
                    flags.threads = value("--threads")?.parse().map_err(|_| {
                        Error::Config("--threads needs an unsigned integer".into())
                    })?;
                    if flags.threads == 0 {
                        return Err(Error::Config("--threads must be >= 1".into()));
                    }
                }
                "--mode" => flags.mode = Some(parse_mode(value("--mode")?)?),
                "--arch" => flags.arch = Some(value("--arch")?.clone()),
                "--index" => {
                    flags.index = Some(value("--index")?.parse().map_err(|_| {
                        Error::Config("--index needs an unsigned integer".into())
                    })?)
                }
                "--input" => flags.input = Some(PathBuf::from(value("--input")?)),
                "--layers" => {
                    let list = value("--layers")?;
                    let layers: std::result::Result<Vec<usize>, _> =
                        list.split(',').map(|t| t.trim().parse()).collect();
                    flags.layers = Some(layers.map_err(|_| {
                        Error::Config(format!("--layers: not a comma-separated list: {list:?}"))
                    })?);
                }
                other => return Err(Error::Config(format!("unknown flag {other:?}"))),
            }
        }
        Ok(flags)
    }

    fn config_path(&self) -> Result<&Path> {
        self.config
            .as_deref()
            .ok_or_else(|| Error::Config("--config PATH is required".into()))
    }

    fn checkpoint_path(&self) -> Result<&Path> {
        self.checkpoint
            .as_deref()
            .ok_or_else(|| Error::Config("--checkpoint PATH is required".into()))
    }

    fn load_config(&self) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::load(self.config_path()?)?;
        if let Some(seed) = self.seed {
            cfg.hyperparams.seed = seed;
        }
        if let Some(out) = &self.out {
            cfg.output_dir = out.clone();
        }
        if let Some(mode) = self.mode {
            cfg.mode = mode;
        }
        Ok(cfg)
    }
}

/// Entry point: returns the process exit code.
pub fn run(args: &[String]) -> i32 {
    match dispatch(args) {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("dbpc: {err}");
            1
        }
    }
}

fn dispatch(args: &[String]) -> Result<()> {
    let Some(command) = args.first() else {
        eprint!("{USAGE}");
        return Err(Error::Config("no command given".into()));
    };
    if command == "--help" || command == "help" {
        print!("{USAGE}");
        return Ok(());
    }
    let flags = Flags::parse(&args[1..])?;
    match command.as_str() {
        "train" => cmd_train(&flags.load_config()?, flags.threads),
        "eval" => cmd_eval(
            flags.checkpoint_path()?,
            &flags.load_config()?,
            flags.threads,
        ),
        "reconstruct" => cmd_reconstruct(&flags),
        "gradcheck" => cmd_gradcheck(flags.seed.unwrap_or(0)),
        "params" => cmd_params(&flags),
        other => {
            eprint!("{USAGE}");
            Err(Error::Config(format!("unknown command {other:?}")))
        }
    }
}

fn load_limited(images: &Path, labels: &Path, limit: usize) -> Result<ImageDataset> {
    Ok(load_idx(images, labels)?.truncated(limit))
}

fn check_input_compat(dataset: &ImageDataset, params: &NetworkParams) -> Result<()> {
    if !crate::data::compatible_input(dataset, params) {
        let (c, h, w) = dataset.image_dims();
        return Err(Error::Shape(format!(
            "dataset images are {c}x{h}x{w} but the network input layer expects {:?}",
            params.layer_shape(1)
        )));
    }
    Ok(())
}

fn csv_header(sources: &[usize]) -> String {
    let mut header = String::from("epoch,train_energy,test_accuracy");
    for l in sources {
        header.push_str(&format!(",psnr_layer{l}"));
    }
    for l in sources {
        header.push_str(&format!(",ssim_layer{l}"));
    }
    header.push('\n');
    header
}

fn csv_row(epoch: usize, energy: f64, report: &MetricsReport) -> String {
    let mut row = format!("{epoch},{energy:.6},{:.6}", report.accuracy);
    for q in &report.layers {
        row.push_str(&format!(",{:.6}", q.mean_psnr));
    }
    for q in &report.layers {
        row.push_str(&format!(",{:.6}", q.mean_ssim));
    }
    row.push('\n');
    row
}

/// Train per the config: per-epoch CSV metrics, `latest.dbpc` after every
/// epoch and `best-accuracy.dbpc` whenever test accuracy improves.
pub fn cmd_train(cfg: &ExperimentConfig, threads: usize) -> Result<()> {
    let hp = &cfg.hyperparams;
    hp.validate()?;
    cfg.augment.validate()?;
    let mut net = cfg.build_network(hp.seed)?;
    std::fs::create_dir_all(&cfg.output_dir)?;
    let csv_path = cfg.output_dir.join("train_log.csv");
    let mut csv = File::create(&csv_path)?;
    let sources = default_reconstruction_sources(&net);
    csv.write_all(csv_header(&sources).as_bytes())?;
    checkpoint::save(&cfg.output_dir.join("latest.dbpc"), &net)?;
    if hp.epochs == 0 {
        println!(
            "epochs = 0: wrote initialized checkpoint to {}",
            cfg.output_dir.join("latest.dbpc").display()
        );
        return Ok(());
    }
    cfg.validate_for_training()?;

    let (ti, tl) = cfg.data.train_pair()?;
    let train = load_limited(ti, tl, cfg.train_limit)?;
    let (ei, el) = cfg.data.test_pair()?;
    let test = load_limited(ei, el, cfg.test_limit)?;
    check_input_compat(&train, &net)?;
    check_input_compat(&test, &net)?;
    if train.is_empty() {
        return Err(Error::Data("training set is empty".into()));
    }
    println!(
        "training {} ({} parameters) on {} samples, {} epochs, threads={threads}",
        net.describe(),
        net.param_count(),
        train.len(),
        hp.epochs
    );

    let mut best_accuracy = f64::NEG_INFINITY;
    for epoch in 1..=hp.epochs {
        let start = Instant::now();
        let epoch_seed = Rng::seeded(hp.seed, &[SHUFFLE_STREAM, epoch as u64]).next_u64();
        let batches = minibatches(train.len(), hp.batch_size, epoch_seed)?;
        let mut energy_sum = 0.0;
        for indices in &batches {
            let (input, target) = assemble_batch(
                &train,
                indices,
                &net,
                Some((&cfg.augment, hp.seed, epoch as u64)),
            )?;
            let stats = train_batch(&mut net, input, target, hp, threads)?;
            energy_sum += stats.representation_energy * indices.len() as f64;
        }
        let train_energy = energy_sum / train.len() as f64;
        let report = evaluate(&net, &test, hp, cfg.mode, cfg.recon_samples, threads)?;
        csv.write_all(csv_row(epoch, train_energy, &report).as_bytes())?;
        csv.flush()?;
        checkpoint::save(&cfg.output_dir.join("latest.dbpc"), &net)?;
        if report.accuracy > best_accuracy {
            best_accuracy = report.accuracy;
            checkpoint::save(&cfg.output_dir.join("best-accuracy.dbpc"), &net)?;
        }
        println!(
            "epoch {epoch}/{}: train energy {train_energy:.6}, test accuracy {:.4} ({:.1} s)",
            hp.epochs,
            report.accuracy,
            start.elapsed().as_secs_f64()
        );
    }
    println!("log: {}", csv_path.display());
    Ok(())
}

/// Evaluate a checkpoint on the test set: accuracy plus one PSNR/SSIM row
/// per reconstruction-source layer, printed and written to `eval.csv`.
pub fn cmd_eval(ckpt: &Path, cfg: &ExperimentConfig, threads: usize) -> Result<()> {
    let net = checkpoint::load(ckpt)?;
    if !cfg.architecture.is_empty() || cfg.custom_layers.is_some() {
        let expected = cfg.build_network(0)?;
        if expected.specs() != net.specs() || expected.input_hw() != net.input_hw() {
            return Err(Error::Checkpoint(format!(
                "checkpoint is {} but the config describes {}",
                net.describe(),
                expected.describe()
            )));
        }
    }
    let (ei, el) = cfg.data.test_pair()?;
    let test = load_limited(ei, el, cfg.test_limit)?;
    check_input_compat(&test, &net)?;
    let report = evaluate(&net, &test, &cfg.hyperparams, cfg.mode, 0, threads)?;
    println!(
        "accuracy ({} mode, {} samples): {:.4}",
        cfg.mode, report.samples, report.accuracy
    );
    for q in &report.layers {
        println!(
            "layer {:>2}: psnr {:>7.2} dB  ssim {:.4}",
            q.layer, q.mean_psnr, q.mean_ssim
        );
    }
    std::fs::create_dir_all(&cfg.output_dir)?;
    let path = cfg.output_dir.join("eval.csv");
    let mut out = File::create(&path)?;
    out.write_all(b"layer,psnr,ssim\n")?;
    for q in &report.layers {
        out.write_all(format!("{},{:.6},{:.6}\n", q.layer, q.mean_psnr, q.mean_ssim).as_bytes())?;
    }
    println!("wrote {}", path.display());
    Ok(())
}

/// Reconstruct one image from the requested layers, writing one PGM per
/// layer plus the original.
pub fn cmd_reconstruct(flags: &Flags) -> Result<()> {
    let net = checkpoint::load(flags.checkpoint_path()?)?;
    let (h, w) = match net.layer_shape(1).as_slice() {
        [units] => {
            let side = (*units as f64).sqrt() as usize;
            if side * side != *units {
                return Err(Error::Config(format!(
                    "cannot infer image shape from a {units}-unit input layer"
                )));
            }
            (side, side)
        }
        [channels, h, w] => {
            if *channels != 1 {
                return Err(Error::Config(
                    "PGM reconstruction supports single-channel inputs only".into(),
                ));
            }
            (*h, *w)
        }
        other => return Err(Error::Config(format!("unsupported input shape {other:?}"))),
    };

    let cfg = match &flags.config {
        Some(_) => Some(flags.load_config()?),
        None => None,
    };
    let hp = cfg
        .as_ref()
        .map(|c| c.hyperparams.clone())
        .unwrap_or_default();
    let out_dir = cfg
        .as_ref()
        .map(|c| c.output_dir.clone())
        .or_else(|| flags.out.clone())
        .unwrap_or_else(|| PathBuf::from("."));

    let image: Vec<f64> = match (&flags.input, flags.index) {
        (Some(path), None) => {
            let (pw, ph, values) = pgm::read_pgm(path)?;
            if (ph, pw) != (h, w) {
                return Err(Error::Shape(format!(
                    "input image is {pw}x{ph}, network expects {w}x{h}"
                )));
            }
            values
        }
        (None, Some(index)) => {
            let cfg = cfg
                .as_ref()
                .ok_or_else(|| Error::Config("--index needs --config for data paths".into()))?;
            let (ei, el) = cfg.data.test_pair()?;
            let test = load_limited(ei, el, cfg.test_limit)?;
            if index >= test.len() {
                return Err(Error::Index(format!(
                    "image index {index} (test set has {})",
                    test.len()
                )));
            }
            test.image(index).to_vec()
        }
        _ => {
            return Err(Error::Config(
                "reconstruct needs exactly one of --index N or --input PATH".into(),
            ))
        }
    };

    let layers = flags
        .layers
        .clone()
        .unwrap_or_else(|| default_reconstruction_sources(&net));
    let input = Tensor::from_vec(&net.batched_shape(1, 1), image.clone())?;
    let mut state = ActivationState::testing(&net, input, flags.threads)?;
    infer_representations(&net, &mut state, &hp, flags.threads)?;

    std::fs::create_dir_all(&out_dir)?;
    let original = out_dir.join("recon_original.pgm");
    pgm::write_pgm(&original, w, h, &image, 1.0)?;
    println!("wrote {}", original.display());
    for &layer in &layers {
        let recon = reconstruct_from_layer(&net, &state, layer)?;
        let path = out_dir.join(format!("recon_layer{layer}.pgm"));
        pgm::write_pgm(&path, w, h, recon.image.data(), 1.0)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

/// Run the finite-difference suites; nonzero exit on any failure.
pub fn cmd_gradcheck(seed: u64) -> Result<()> {
    let mut all_passed = true;
    for suite in gradcheck::run_default(seed)? {
        let verdict = if suite.passed() { "PASS" } else { "FAIL" };
        println!(
            "{verdict}  {}: max rel error {:.3e} over {} coordinates ({} instances, tolerance {:.0e})",
            suite.name,
            suite.max_rel_error,
            suite.coordinates_checked,
            suite.instances,
            suite.tolerance
        );
        all_passed &= suite.passed();
    }
    if !all_passed {
        return Err(Error::Data("gradient check failed".into()));
    }
    Ok(())
}

/// Print the exact parameter count of an architecture.
pub fn cmd_params(flags: &Flags) -> Result<()> {
    let net = match (&flags.arch, &flags.config) {
        (Some(name), _) => presets::by_name(name, 0)?,
        (None, Some(path)) => ExperimentConfig::load(path)?.build_network(0)?,
        (None, None) => {
            return Err(Error::Config(
                "params needs --arch NAME or --config PATH".into(),
            ))
        }
    };
    println!("{}", net.describe());
    println!("{} parameters", net.param_count());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(args: &[&str]) -> Vec<String> {
        args.iter().map(|a| a.to_string()).collect()
    }

    #[test]
    fn parses_flags() {
        let flags = Flags::parse(&s(&[
            "--config", "cfg.txt", "--threads", "4", "--seed", "7", "--mode", "iterative",
            "--layers", "2,3",
        ]))
        .unwrap();
        assert_eq!(flags.config.as_deref(), Some(Path::new("cfg.txt")));
        assert_eq!(flags.threads, 4);
        assert_eq!(flags.seed, Some(7));
        assert_eq!(flags.mode, Some(ClassifyMode::Iterative));
        assert_eq!(flags.layers, Some(vec![2, 3]));
    }

    #[test]
    fn unknown_flag_rejected() {
        assert!(Flags::parse(&s(&["--frobnicate"])).is_err());
    }

    #[test]
    fn zero_threads_rejected() {
        assert!(Flags::parse(&s(&["--threads", "0"])).is_err());
    }

    #[test]
    fn missing_value_rejected() {
        assert!(Flags::parse(&s(&["--seed"])).is_err());
    }
}
