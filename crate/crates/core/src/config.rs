//! Flat `key = value` run configuration.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use crate::augment::AugmentConfig;
use crate::autodiff::ActivationKind;
use crate::error::{Error, Result};
use crate::eval::ProbeConfig;
use crate::model::{Arch, EncoderConfig, PostprocessorKind};
use crate::objective::{LossKind, TrainConfig};

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub dataset: PathBuf,
    pub epochs: usize,
    pub layers: usize,
    pub dim: usize,
    pub tau: f64,
    pub lr1: f64,
    pub wd1: f64,
    pub pf: f64,
    pub pe: f64,
    pub lr2: f64,
    pub wd2: f64,
    pub m: usize,
    pub encoder: Arch,
    pub postproc: PostprocessorKind,
    pub loss: LossKind,
    pub lambda: f64,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub activation: ActivationKind,
    pub probe_epochs: usize,
    pub patience: usize,
}

const KEYS: &[&str] = &[
    "dataset", "epochs", "layers", "dim", "tau", "lr1", "wd1", "pf", "pe", "lr2", "wd2", "m", "encoder", "postproc", "loss",
    "lambda", "seed", "out_dir", "activation", "probe_epochs", "patience", "dbn_iters",
];

impl RunConfig {
    /// Defaults for every key, with the given dataset path.
    pub fn new(dataset: impl Into<PathBuf>) -> Self {
        RunConfig {
            dataset: dataset.into(),
            epochs: 50,
            layers: 2,
            dim: 512,
            tau: 0.5,
            lr1: 1e-3,
            wd1: 0.0,
            pf: 0.2,
            pe: 0.5,
            lr2: 5e-3,
            wd2: 1e-4,
            m: 1024,
            encoder: Arch::Gcn,
            postproc: PostprocessorKind::Bn,
            loss: LossKind::NtXent,
            lambda: 1e-3,
            seed: 0,
            out_dir: PathBuf::from("out"),
            activation: ActivationKind::Relu,
            probe_epochs: 300,
            patience: 30,
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::new("");
        let mut seen = HashSet::new();
        let mut dbn_iters = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| Error::Config(format!("line {}: expected 'key = value'", lineno + 1)))?;
            if !KEYS.contains(&key) {
                return Err(Error::Config(format!("line {}: unknown key '{key}'", lineno + 1)));
            }
            if !seen.insert(key.to_string()) {
                return Err(Error::Config(format!("line {}: duplicate key '{key}'", lineno + 1)));
            }
            if key == "dbn_iters" {
                dbn_iters = Some(num(key, value)?);
            } else {
                cfg.set(key, value)?;
            }
        }
        if !seen.contains("dataset") {
            return Err(Error::Config("missing required key 'dataset'".into()));
        }
        if let (Some(it), PostprocessorKind::Dbn { iters }) = (dbn_iters, &mut cfg.postproc) {
            *iters = it;
        }
        cfg.train_config().validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Assigns one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "dataset" => self.dataset = PathBuf::from(value),
            "epochs" => self.epochs = num(key, value)?,
            "layers" => self.layers = num(key, value)?,
            "dim" => self.dim = num(key, value)?,
            "tau" => self.tau = num(key, value)?,
            "lr1" => self.lr1 = num(key, value)?,
            "wd1" => self.wd1 = num(key, value)?,
            "pf" => self.pf = num(key, value)?,
            "pe" => self.pe = num(key, value)?,
            "lr2" => self.lr2 = num(key, value)?,
            "wd2" => self.wd2 = num(key, value)?,
            "m" => self.m = num(key, value)?,
            "encoder" => self.encoder = value.parse()?,
            "postproc" => self.postproc = value.parse()?,
            "loss" => self.loss = value.parse()?,
            "lambda" => self.lambda = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "out_dir" => self.out_dir = PathBuf::from(value),
            "activation" => self.activation = value.parse()?,
            "probe_epochs" => self.probe_epochs = num(key, value)?,
            "patience" => self.patience = num(key, value)?,
            "dbn_iters" => match &mut self.postproc {
                PostprocessorKind::Dbn { iters } => *iters = num(key, value)?,
                _ => return Err(Error::Config("dbn_iters requires postproc = dbn".into())),
            },
            other => return Err(Error::Config(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    /// The config in its own file format; `parse(to_text())` round-trips.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| s.push_str(&format!("{k} = {v}\n"));
        kv("dataset", self.dataset.display().to_string());
        kv("epochs", self.epochs.to_string());
        kv("layers", self.layers.to_string());
        kv("dim", self.dim.to_string());
        kv("tau", self.tau.to_string());
        kv("lr1", self.lr1.to_string());
        kv("wd1", self.wd1.to_string());
        kv("pf", self.pf.to_string());
        kv("pe", self.pe.to_string());
        kv("lr2", self.lr2.to_string());
        kv("wd2", self.wd2.to_string());
        kv("m", self.m.to_string());
        kv("encoder", self.encoder.as_str().to_string());
        kv("postproc", self.postproc.tag().to_string());
        if let PostprocessorKind::Dbn { iters } = self.postproc {
            kv("dbn_iters", iters.to_string());
        }
        kv("loss", self.loss.to_string());
        kv("lambda", self.lambda.to_string());
        kv("seed", self.seed.to_string());
        kv("out_dir", self.out_dir.display().to_string());
        kv("activation", self.activation.as_str().to_string());
        kv("probe_epochs", self.probe_epochs.to_string());
        kv("patience", self.patience.to_string());
        s
    }

    pub fn encoder_config(&self) -> EncoderConfig {
        EncoderConfig { arch: self.encoder, n_layers: self.layers, hidden_dim: self.dim, out_dim: self.dim, activation: self.activation }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            m: self.m,
            tau: self.tau,
            lr1: self.lr1,
            wd1: self.wd1,
            augment: AugmentConfig { p_e: self.pe, p_f: self.pf },
            encoder: self.encoder_config(),
            kind: self.postproc,
            loss: self.loss,
            lambda: self.lambda,
            seed: self.seed,
        }
    }

    pub fn probe_config(&self) -> ProbeConfig {
        ProbeConfig { lr2: self.lr2, wd2: self.wd2, epochs: self.probe_epochs, patience: self.patience }
    }

    /// Label used in result tables.
    pub fn method(&self) -> &'static str {
        match self.loss {
            LossKind::CcaSsg => "CCA-SSG",
            LossKind::NtXent => self.postproc.method_name(),
        }
    }
}

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| Error::Config(format!("bad value for '{key}': '{value}'")))
}
