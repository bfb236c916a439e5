//! `key = value` experiment configuration with named presets.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::data::{HEAD_THRESHOLD, TAIL_THRESHOLD};
use crate::error::{Error, Result};
use crate::model::{CrtConfig, ModelSpec, Sign, PEM_INIT_STD};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DatasetKind {
    /// Long-tailed Gaussian clusters with a balanced test split from the same means.
    Gaussian,
    /// Collapsed simplex-ETF features, one point per class.
    Etf,
    /// Pre-generated dataset files.
    File,
}

impl DatasetKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Gaussian => "gaussian",
            Self::Etf => "etf",
            Self::File => "file",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "gaussian" => Some(Self::Gaussian),
            "etf" => Some(Self::Etf),
            "file" => Some(Self::File),
            _ => None,
        }
    }
}

/// Inference rule compared by the harness.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Ce,
    La,
    Crt,
    NpeLa,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Ce, Method::La, Method::Crt, Method::NpeLa];

    pub fn name(self) -> &'static str {
        match self {
            Self::Ce => "ce",
            Self::La => "la",
            Self::Crt => "crt",
            Self::NpeLa => "npe-la",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.name() == s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    Desk,
    Hp1,
    Hp2,
}

impl Preset {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Self::Desk),
            "hp1" => Ok(Self::Hp1),
            "hp2" => Ok(Self::Hp2),
            other => Err(Error::Config(format!("unknown preset '{other}' (expected desk, hp1, hp2)"))),
        }
    }

    pub fn config(self) -> ExperimentConfig {
        let mut c = ExperimentConfig::default();
        match self {
            Self::Desk => {}
            Self::Hp1 => {
                c.lr = 0.1;
                c.weight_decay = 2e-4;
                c.batch_size = 124;
                c.epochs = 200;
                c.milestones = vec![160, 180];
                c.lr_decay = 0.1;
            }
            Self::Hp2 => {
                c.lr = 0.05;
                c.weight_decay = 1e-3;
                c.batch_size = 64;
                c.epochs = 120;
                c.milestones = vec![100, 110];
                c.lr_decay = 0.1;
            }
        }
        c
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub dataset: DatasetKind,
    pub train_path: Option<PathBuf>,
    pub test_path: Option<PathBuf>,
    pub n_max: usize,
    pub num_classes: usize,
    pub rho: f64,
    pub input_dim: usize,
    pub sep: f64,
    pub noise: f64,
    pub test_per_class: usize,

    pub hidden: Vec<usize>,
    pub feature_dim: usize,
    pub n_pem: usize,
    pub sign: Sign,
    pub init_std: f64,
    pub alpha: f64,

    pub lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub pem_weight_decay: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub milestones: Vec<usize>,
    pub lr_decay: f64,
    pub crt_epochs: usize,

    pub methods: Vec<Method>,
    pub seed: u64,
    pub head_threshold: usize,
    pub tail_threshold: usize,

    pub sweep_n_pem: Vec<usize>,
    pub sweep_rho: Vec<f64>,
    pub sweep_alpha: Vec<f64>,
    pub repeats: usize,
}

impl Default for ExperimentConfig {
    /// The desk benchmark.
    fn default() -> Self {
        Self {
            dataset: DatasetKind::Gaussian,
            train_path: None,
            test_path: None,
            n_max: 500,
            num_classes: 10,
            rho: 100.0,
            input_dim: 32,
            sep: 3.0,
            noise: 1.0,
            test_per_class: 500,

            hidden: vec![64, 64],
            feature_dim: 16,
            n_pem: 16,
            sign: Sign::Subtractive,
            init_std: PEM_INIT_STD,
            alpha: 1.0,

            lr: 0.05,
            momentum: 0.9,
            weight_decay: 1e-3,
            pem_weight_decay: 1e-3,
            batch_size: 64,
            epochs: 60,
            milestones: vec![45, 55],
            lr_decay: 0.1,
            crt_epochs: 10,

            methods: Method::ALL.to_vec(),
            seed: 0,
            head_threshold: HEAD_THRESHOLD,
            tail_threshold: TAIL_THRESHOLD,

            sweep_n_pem: vec![0, 1, 4, 8, 16],
            sweep_rho: vec![100.0],
            sweep_alpha: vec![1.0],
            repeats: 3,
        }
    }
}

/// Every accepted key, in the order [`ExperimentConfig::to_text`] writes them.
pub const KEYS: &[&str] = &[
    "dataset",
    "train_path",
    "test_path",
    "n_max",
    "num_classes",
    "rho",
    "input_dim",
    "sep",
    "noise",
    "test_per_class",
    "hidden",
    "feature_dim",
    "n_pem",
    "t",
    "init_std",
    "alpha",
    "lr",
    "momentum",
    "weight_decay",
    "pem_weight_decay",
    "batch_size",
    "epochs",
    "milestones",
    "lr_decay",
    "crt_epochs",
    "methods",
    "seed",
    "head_threshold",
    "tail_threshold",
    "sweep_n_pem",
    "sweep_rho",
    "sweep_alpha",
    "repeats",
];

fn bad(key: &str, value: &str, what: &str) -> Error {
    Error::Config(format!("{key} = '{value}': expected {what}"))
}

fn num<T: std::str::FromStr>(key: &str, value: &str, what: &str) -> Result<T> {
    value.parse().map_err(|_| bad(key, value, what))
}

fn list<T: std::str::FromStr>(key: &str, value: &str, what: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| num(key, s, what))
        .collect()
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

impl ExperimentConfig {
    /// Applies one `key = value` assignment.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim() {
            "dataset" => {
                self.dataset = DatasetKind::parse(v).ok_or_else(|| bad(key, v, "gaussian, etf or file"))?
            }
            "train_path" => self.train_path = (!v.is_empty()).then(|| PathBuf::from(v)),
            "test_path" => self.test_path = (!v.is_empty()).then(|| PathBuf::from(v)),
            "n_max" => self.n_max = num(key, v, "a count")?,
            "num_classes" => self.num_classes = num(key, v, "a count")?,
            "rho" => self.rho = num(key, v, "a number")?,
            "input_dim" => self.input_dim = num(key, v, "a count")?,
            "sep" => self.sep = num(key, v, "a number")?,
            "noise" => self.noise = num(key, v, "a number")?,
            "test_per_class" => self.test_per_class = num(key, v, "a count")?,
            "hidden" => self.hidden = list(key, v, "comma-separated widths")?,
            "feature_dim" => self.feature_dim = num(key, v, "a count")?,
            "n_pem" => self.n_pem = num(key, v, "a count")?,
            "t" => {
                let t: u8 = num(key, v, "0 or 1")?;
                self.sign = Sign::from_t(t).map_err(|_| bad(key, v, "0 or 1"))?;
            }
            "init_std" => self.init_std = num(key, v, "a number")?,
            "alpha" => self.alpha = num(key, v, "a number")?,
            "lr" => self.lr = num(key, v, "a number")?,
            "momentum" => self.momentum = num(key, v, "a number")?,
            "weight_decay" => self.weight_decay = num(key, v, "a number")?,
            "pem_weight_decay" => self.pem_weight_decay = num(key, v, "a number")?,
            "batch_size" => self.batch_size = num(key, v, "a count")?,
            "epochs" => self.epochs = num(key, v, "a count")?,
            "milestones" => self.milestones = list(key, v, "comma-separated epochs")?,
            "lr_decay" => self.lr_decay = num(key, v, "a number")?,
            "crt_epochs" => self.crt_epochs = num(key, v, "a count")?,
            "methods" => {
                self.methods = v
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| Method::parse(s).ok_or_else(|| bad(key, s, "ce, la, crt or npe-la")))
                    .collect::<Result<_>>()?
            }
            "seed" => self.seed = num(key, v, "an unsigned integer")?,
            "head_threshold" => self.head_threshold = num(key, v, "a count")?,
            "tail_threshold" => self.tail_threshold = num(key, v, "a count")?,
            "sweep_n_pem" => self.sweep_n_pem = list(key, v, "comma-separated counts")?,
            "sweep_rho" => self.sweep_rho = list(key, v, "comma-separated numbers")?,
            "sweep_alpha" => self.sweep_alpha = list(key, v, "comma-separated numbers")?,
            "repeats" => self.repeats = num(key, v, "a count")?,
            other => return Err(Error::Config(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    /// Applies every line of `text` on top of `self`, then validates.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected 'key = value'", i + 1)))?;
            self.set(key, value)
                .map_err(|e| Error::Config(format!("line {}: {}", i + 1, strip_prefix(e))))?;
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.dataset == DatasetKind::File && self.train_path.is_none() {
            return fail("dataset = file needs train_path".into());
        }
        if self.num_classes < 2 {
            return fail("num_classes must be at least 2".into());
        }
        if !(self.rho >= 1.0) || self.sweep_rho.iter().any(|r| !(*r >= 1.0)) {
            return fail("rho must be >= 1".into());
        }
        if self.n_max < 1 || self.input_dim < 1 || self.feature_dim < 1 {
            return fail("n_max, input_dim and feature_dim must be positive".into());
        }
        if self.hidden.contains(&0) {
            return fail("hidden widths must be positive".into());
        }
        if !(self.noise >= 0.0) || !(self.sep >= 0.0) {
            return fail("sep and noise must be >= 0".into());
        }
        if self.test_per_class < 1 {
            return fail("test_per_class must be positive".into());
        }
        if !(self.init_std >= 0.0) || !self.init_std.is_finite() {
            return fail("init_std must be >= 0".into());
        }
        if !(self.alpha >= 0.0) || self.sweep_alpha.iter().any(|a| !(*a >= 0.0) || !a.is_finite()) {
            return fail("alpha must be >= 0".into());
        }
        if !(self.lr > 0.0) || !self.lr.is_finite() {
            return fail("lr must be > 0".into());
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return fail("momentum must be in [0, 1)".into());
        }
        if !(self.weight_decay >= 0.0) || !(self.pem_weight_decay >= 0.0) {
            return fail("weight decay must be >= 0".into());
        }
        if self.batch_size < 1 {
            return fail("batch_size must be positive".into());
        }
        if self.milestones.windows(2).any(|w| w[0] >= w[1]) {
            return fail("milestones must be strictly increasing".into());
        }
        if let Some(&last) = self.milestones.last() {
            if last >= self.epochs {
                return fail(format!("milestone {last} must be < epochs ({})", self.epochs));
            }
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return fail("lr_decay must be in (0, 1]".into());
        }
        if self.methods.is_empty() {
            return fail("methods must not be empty".into());
        }
        if self.tail_threshold > self.head_threshold {
            return fail("tail_threshold must not exceed head_threshold".into());
        }
        if self.sweep_n_pem.is_empty() || self.sweep_rho.is_empty() || self.sweep_alpha.is_empty() {
            return fail("sweep axes must not be empty".into());
        }
        if self.repeats < 1 {
            return fail("repeats must be at least 1".into());
        }
        Ok(())
    }

    /// Canonical rendering; parsing it back reproduces `self`.
    pub fn to_text(&self) -> String {
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
        let methods: Vec<&str> = self.methods.iter().map(|m| m.name()).collect();
        let values: Vec<String> = vec![
            self.dataset.name().into(),
            path(&self.train_path),
            path(&self.test_path),
            self.n_max.to_string(),
            self.num_classes.to_string(),
            self.rho.to_string(),
            self.input_dim.to_string(),
            self.sep.to_string(),
            self.noise.to_string(),
            self.test_per_class.to_string(),
            join(&self.hidden),
            self.feature_dim.to_string(),
            self.n_pem.to_string(),
            self.sign.t().to_string(),
            self.init_std.to_string(),
            self.alpha.to_string(),
            self.lr.to_string(),
            self.momentum.to_string(),
            self.weight_decay.to_string(),
            self.pem_weight_decay.to_string(),
            self.batch_size.to_string(),
            self.epochs.to_string(),
            join(&self.milestones),
            self.lr_decay.to_string(),
            self.crt_epochs.to_string(),
            methods.join(","),
            self.seed.to_string(),
            self.head_threshold.to_string(),
            self.tail_threshold.to_string(),
            join(&self.sweep_n_pem),
            join(&self.sweep_rho),
            join(&self.sweep_alpha),
            self.repeats.to_string(),
        ];
        let mut out = String::new();
        for (k, v) in KEYS.iter().zip(values) {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    /// First 16 hex digits of the SHA-256 of [`Self::to_text`].
    pub fn digest(&self) -> String {
        let hash = Sha256::digest(self.to_text().as_bytes());
        hash.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    pub fn model_spec(&self, num_classes: usize, input_dim: usize) -> ModelSpec {
        ModelSpec {
            input_dim,
            hidden: self.hidden.clone(),
            feature_dim: self.feature_dim,
            num_classes,
            n_pem: self.n_pem,
            sign: self.sign,
            init_std: self.init_std,
        }
    }

    pub fn crt_config(&self) -> CrtConfig {
        CrtConfig {
            epochs: self.crt_epochs,
            batch_size: self.batch_size,
            lr: self.lr,
            momentum: self.momentum,
            weight_decay: self.weight_decay,
        }
    }

    /// Learning rate in effect during `epoch`.
    pub fn lr_at(&self, epoch: usize) -> f64 {
        let passed = self.milestones.iter().filter(|&&m| epoch >= m).count();
        self.lr * self.lr_decay.powi(passed as i32)
    }
}

fn strip_prefix(e: Error) -> String {
    match e {
        Error::Config(msg) => msg,
        other => other.to_string(),
    }
}

/// Preset defaults overlaid with a config file and then `key=value` overrides.
pub fn parse_config(preset: Preset, path: Option<&Path>, overrides: &[String]) -> Result<ExperimentConfig> {
    let mut cfg = preset.config();
    if let Some(p) = path {
        let text = std::fs::read_to_string(p)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", p.display())))?;
        cfg.apply_text(&text)
            .map_err(|e| Error::Config(format!("{}: {}", p.display(), strip_prefix(e))))?;
    }
    for o in overrides {
        let (k, v) = o
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override '{o}' is not key=value")))?;
        cfg.set(k, v)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn parse_config_str(preset: Preset, text: &str) -> Result<ExperimentConfig> {
    let mut cfg = preset.config();
    cfg.apply_text(text)?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_carry_table_values() {
        let hp1 = Preset::Hp1.config();
        assert_eq!((hp1.lr, hp1.weight_decay, hp1.batch_size, hp1.epochs), (0.1, 2e-4, 124, 200));
        assert_eq!(hp1.milestones, vec![160, 180]);
        assert_eq!(hp1.lr_decay, 0.1);
        let hp2 = Preset::Hp2.config();
        assert_eq!((hp2.lr, hp2.weight_decay, hp2.batch_size, hp2.epochs), (0.05, 1e-3, 64, 120));
        assert_eq!(hp2.milestones, vec![100, 110]);
        hp1.validate().unwrap();
        hp2.validate().unwrap();
    }

    #[test]
    fn empty_config_is_default() {
        assert_eq!(parse_config_str(Preset::Desk, "").unwrap(), ExperimentConfig::default());
        assert_eq!(parse_config_str(Preset::Desk, "# nothing\n\n").unwrap(), ExperimentConfig::default());
    }

    #[test]
    fn parses_values_and_comments() {
        let cfg = parse_config_str(
            Preset::Desk,
            "lr = 0.2  # faster\nhidden = 8\nt = 0\nmethods = ce, npe-la\nsweep_rho = 200,100,50\n",
        )
        .unwrap();
        assert_eq!(cfg.lr, 0.2);
        assert_eq!(cfg.hidden, vec![8]);
        assert_eq!(cfg.sign, Sign::Additive);
        assert_eq!(cfg.methods, vec![Method::Ce, Method::NpeLa]);
        assert_eq!(cfg.sweep_rho, vec![200.0, 100.0, 50.0]);
        let none = parse_config_str(Preset::Desk, "hidden =\n").unwrap();
        assert!(none.hidden.is_empty());
    }

    #[test]
    fn rejects_bad_input() {
        for text in [
            "learning_rate = 0.1",
            "lr 0.1",
            "epochs = 10\nmilestones = 5,10",
            "milestones = 30,20",
            "lr_decay = 0",
            "lr_decay = 1.5",
            "t = 2",
            "dataset = file",
            "methods = ce,foo",
            "batch_size = -1",
        ] {
            let err = parse_config_str(Preset::Desk, text).unwrap_err();
            assert!(err.is_usage(), "{text}: {err}");
        }
    }

    #[test]
    fn text_round_trip_and_digest() {
        let mut cfg = Preset::Hp1.config();
        cfg.train_path = Some("a.csv".into());
        cfg.sweep_alpha = vec![1.0, 0.2, 0.1];
        let back = parse_config_str(Preset::Desk, &cfg.to_text()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.digest(), cfg.digest());
        assert_eq!(cfg.digest().len(), 16);
        assert_ne!(cfg.digest(), ExperimentConfig::default().digest());
    }

    #[test]
    fn schedule() {
        let cfg = ExperimentConfig::default();
        assert_eq!(cfg.lr_at(0), 0.05);
        assert!((cfg.lr_at(45) - 0.005).abs() < 1e-15);
        assert!((cfg.lr_at(59) - 0.0005).abs() < 1e-15);
    }
}
