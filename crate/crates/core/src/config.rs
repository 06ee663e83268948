//! Sectioned `key = value` run configuration.
//!
//! ```text
//! [run]
//! seed = 7
//!
//! [arch]
//! max_len = 5000
//! conv_layers = 192x5,192x5,192x5
//! ```
//!
//! `#` and `;` start comments. Dashes and underscores in keys are
//! interchangeable. Every key can be overridden as `section.key=value`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::classifier::{parse_conv_layers, ArchConfig, TrainConfig};
use crate::corpus::{Label, PpuConfig, DEFAULT_HARD_CAP_BYTES};
use crate::docembed::Pooling;
use crate::lm::LmConfig;
use crate::synlog::SynConfig;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProviderKind {
    #[default]
    Mock,
    Http,
}

impl FromStr for ProviderKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mock" => Ok(ProviderKind::Mock),
            "http" => Ok(ProviderKind::Http),
            other => Err(Error::Config(format!("provider must be mock or http, got {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbedSettings {
    pub provider: ProviderKind,
    pub endpoint: Option<String>,
    pub auth_token: Option<String>,
    pub dim: usize,
    pub context: usize,
    /// Defaults to half the context.
    pub overlap: Option<usize>,
    pub pooling: Pooling,
    pub timeout: Duration,
    pub cache_dir: Option<PathBuf>,
}

impl Default for EmbedSettings {
    fn default() -> Self {
        EmbedSettings {
            provider: ProviderKind::Mock,
            endpoint: None,
            auth_token: None,
            dim: 64,
            context: 512,
            overlap: None,
            pooling: Pooling::MaskAware,
            timeout: Duration::from_secs(60),
            cache_dir: None,
        }
    }
}

impl EmbedSettings {
    pub fn overlap(&self) -> usize {
        self.overlap.unwrap_or(self.context / 2)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub ppu: PpuConfig,
    pub hard_cap_bytes: u64,
    pub lm: LmConfig,
    pub arch: ArchConfig,
    pub train: TrainConfig,
    /// Held-out test share of the labelled corpus.
    pub test_fraction: f64,
    pub synth: SynConfig,
    pub embed: EmbedSettings,
    pub sweep_grid: Vec<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            out: None,
            ppu: PpuConfig::default(),
            hard_cap_bytes: DEFAULT_HARD_CAP_BYTES,
            lm: LmConfig::default(),
            arch: ArchConfig::default(),
            train: TrainConfig::default(),
            test_fraction: 0.3,
            synth: SynConfig::default(),
            embed: EmbedSettings::default(),
            sweep_grid: vec![1_000, 5_000, 10_000, 50_000, 80_000, 200_000],
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("invalid value {value:?} for {key}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(Error::Config(format!("invalid boolean {value:?} for {key}"))),
    }
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse(key, s))
        .collect()
}

fn optional(value: &str) -> Option<String> {
    (!value.is_empty()).then(|| value.to_string())
}

/// `Pass:0.62,L0_L1:0.21,...`
fn parse_class_probs(key: &str, value: &str) -> Result<BTreeMap<Label, f64>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|item| {
            let (l, p) = item
                .split_once(':')
                .ok_or_else(|| Error::Config(format!("{key} entries look like LABEL:PROB, got {item:?}")))?;
            Ok((l.trim().parse::<Label>()?, parse(key, p.trim())?))
        })
        .collect()
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = RunConfig::default();
        cfg.apply_ini(&text)?;
        Ok(cfg)
    }

    pub fn from_ini(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        cfg.apply_ini(&text)?;
        Ok(cfg)
    }

    pub fn apply_ini(&mut self, text: &str) -> Result<()> {
        let mut section = String::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                section = name.trim().to_string();
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value, got {line:?}", n + 1)))?;
            if section.is_empty() {
                return Err(Error::Config(format!("line {}: key {:?} outside any [section]", n + 1, key.trim())));
            }
            self.set(&section, key.trim(), value.trim())?;
        }
        Ok(())
    }

    /// Applies `section.key=value`.
    pub fn apply_override(&mut self, spec: &str) -> Result<()> {
        let (path, value) = spec
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override {spec:?} must look like section.key=value")))?;
        let (section, key) = path
            .split_once('.')
            .ok_or_else(|| Error::UnknownKey(path.to_string()))?;
        self.set(section, key, value.trim())
    }

    pub fn set(&mut self, section: &str, key: &str, v: &str) -> Result<()> {
        let norm = key.replace('-', "_");
        let name = format!("{section}.{norm}");
        let k = name.as_str();
        match (section, norm.as_str()) {
            ("run", "seed") => self.seed = parse(k, v)?,
            ("run", "out") => self.out = optional(v).map(PathBuf::from),

            ("ppu", "max_word_len") => self.ppu.max_word_len = parse(k, v)?,
            ("ppu", "max_line_len") => self.ppu.max_line_len = parse(k, v)?,
            ("ppu", "strip_numbers") => self.ppu.strip_numbers = parse_bool(k, v)?,
            ("ppu", "category_patterns") => self.ppu.category_patterns = parse_list(k, v)?,
            ("ppu", "hard_cap_bytes") => self.hard_cap_bytes = parse(k, v)?,

            ("lm", "seq_len") => self.lm.seq_len = parse(k, v)?,
            ("lm", "shift") => self.lm.shift = parse(k, v)?,
            ("lm", "embed_dim") => self.lm.embed_dim = parse(k, v)?,
            ("lm", "lstm_units") => self.lm.lstm_units = parse(k, v)?,
            ("lm", "lr") => self.lm.lr = parse(k, v)?,
            ("lm", "batch_size") => self.lm.batch_size = parse(k, v)?,
            ("lm", "max_epochs") => self.lm.max_epochs = parse(k, v)?,
            ("lm", "patience") => self.lm.patience = parse(k, v)?,
            ("lm", "max_pairs_per_epoch") => {
                self.lm.max_pairs_per_epoch = if v.is_empty() { None } else { Some(parse(k, v)?) }
            }

            ("arch", "max_len") => self.arch.max_len = parse(k, v)?,
            ("arch", "embed_dim") => self.arch.embed_dim = parse(k, v)?,
            ("arch", "downsample") => self.arch.downsample = parse(k, v)?,
            ("arch", "stem_kernel") => self.arch.stem_kernel = parse(k, v)?,
            ("arch", "stem_filters") => self.arch.stem_filters = parse(k, v)?,
            ("arch", "conv_layers") => self.arch.conv_layers = parse_conv_layers(v)?,
            ("arch", "residual") => self.arch.residual = parse_bool(k, v)?,
            ("arch", "dense_units") => self.arch.dense_units = parse_list(k, v)?,
            ("arch", "bilstm") | ("arch", "bilstm_front") => self.arch.bilstm_front = parse_bool(k, v)?,
            ("arch", "bilstm_units") => self.arch.bilstm_units = parse(k, v)?,
            ("arch", "truncation") => self.arch.truncation = v.parse()?,

            ("train", "lr") => self.train.lr = parse(k, v)?,
            ("train", "max_epochs") => self.train.max_epochs = parse(k, v)?,
            ("train", "patience") | ("train", "early_stop_patience") => self.train.patience = parse(k, v)?,
            ("train", "batch_size") => self.train.batch_size = parse(k, v)?,
            ("train", "l2") => self.train.l2 = parse(k, v)?,
            ("train", "val_fraction") => self.train.val_fraction = parse(k, v)?,
            ("train", "test_fraction") => self.test_fraction = parse(k, v)?,

            ("synth", "n_samples") => self.synth.n_samples = parse(k, v)?,
            ("synth", "class_probs") => self.synth.class_probs = parse_class_probs(k, v)?,
            ("synth", "mean_blocks_per_log") => self.synth.mean_blocks_per_log = parse(k, v)?,
            ("synth", "block_len_min") => self.synth.block_len_range.0 = parse(k, v)?,
            ("synth", "block_len_max") => self.synth.block_len_range.1 = parse(k, v)?,
            ("synth", "signature_strength") => self.synth.signature_strength = parse(k, v)?,

            ("embed", "provider") => self.embed.provider = v.parse()?,
            ("embed", "endpoint") => self.embed.endpoint = optional(v),
            ("embed", "auth_token") => self.embed.auth_token = optional(v),
            ("embed", "dim") => self.embed.dim = parse(k, v)?,
            ("embed", "context") => self.embed.context = parse(k, v)?,
            ("embed", "overlap") => self.embed.overlap = if v.is_empty() { None } else { Some(parse(k, v)?) },
            ("embed", "pooling") => self.embed.pooling = v.parse()?,
            ("embed", "timeout_secs") => self.embed.timeout = Duration::from_secs_f64(parse(k, v)?),
            ("embed", "cache_dir") => self.embed.cache_dir = optional(v).map(PathBuf::from),

            ("sweep", "grid") => self.sweep_grid = parse_list(k, v)?,

            _ => return Err(Error::UnknownKey(name)),
        }
        Ok(())
    }

    /// Copies the global seed into the per-module configs.
    pub fn propagate_seed(&mut self) {
        self.lm.seed = self.seed;
        self.train.seed = self.seed;
        self.synth.seed = self.seed;
    }

    pub fn validate(&self) -> Result<()> {
        self.ppu.validate()?;
        self.lm.validate()?;
        self.arch.validate()?;
        self.train.validate()?;
        self.synth.validate()?;
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::Config("train.test_fraction must be in (0, 1)".into()));
        }
        if self.embed.overlap() >= self.embed.context {
            return Err(Error::Config("embed.overlap must be smaller than embed.context".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::ConvSpec;

    #[test]
    fn parses_sections_and_comments() {
        let cfg = RunConfig::from_ini(
            "# comment\n[run]\nseed = 42\n\n[arch]\nmax-len = 5000\nconv_layers = 64x3, 64x3\n; another\n[synth]\nclass_probs = Pass:0.5, L3:0.5\n",
        )
        .unwrap();
        assert_eq!(cfg.seed, 42);
        assert_eq!(cfg.arch.max_len, 5000);
        assert_eq!(cfg.arch.conv_layers, vec![ConvSpec { filters: 64, kernel: 3 }; 2]);
        assert_eq!(cfg.synth.class_probs.len(), 2);
    }

    #[test]
    fn unknown_key_is_named() {
        let err = RunConfig::from_ini("[arch]\nmax_lenn = 3\n").unwrap_err();
        assert!(matches!(&err, Error::UnknownKey(k) if k == "arch.max_lenn"), "{err}");
        let mut cfg = RunConfig::default();
        assert!(matches!(cfg.apply_override("bogus.key=1"), Err(Error::UnknownKey(_))));
    }

    #[test]
    fn overrides_apply() {
        let mut cfg = RunConfig::default();
        cfg.apply_override("arch.conv-layers=256x7").unwrap();
        cfg.apply_override("train.lr=0.001").unwrap();
        cfg.apply_override("embed.overlap=").unwrap();
        assert_eq!(cfg.arch.conv_layers.len(), 1);
        assert_eq!(cfg.train.lr, 1e-3);
        assert_eq!(cfg.embed.overlap(), 256);
        assert!(cfg.apply_override("train.lr=fast").is_err());
    }

    #[test]
    fn defaults_validate() {
        RunConfig::default().validate().unwrap();
    }

    #[test]
    fn key_outside_section_is_rejected() {
        assert!(RunConfig::from_ini("seed = 1\n").is_err());
    }
}
