use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::vocab::Truncation;
use crate::{Error, Result};

pub const MAX_SUPPORTED_LEN: usize = 200_000;

/// One residual convolution layer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvSpec {
    pub filters: usize,
    pub kernel: usize,
}

impl fmt::Display for ConvSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.filters, self.kernel)
    }
}

impl FromStr for ConvSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("conv layer {s:?} must look like FILTERSxKERNEL, e.g. 192x5"));
        let (f, k) = s.trim().split_once('x').ok_or_else(bad)?;
        Ok(ConvSpec {
            filters: f.trim().parse().map_err(|_| bad())?,
            kernel: k.trim().parse().map_err(|_| bad())?,
        })
    }
}

/// Parses `"192x5,192x5"`.
pub fn parse_conv_layers(s: &str) -> Result<Vec<ConvSpec>> {
    s.split(',').filter(|p| !p.trim().is_empty()).map(str::parse).collect()
}

pub fn format_conv_layers(layers: &[ConvSpec]) -> String {
    layers.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

/// Layer layout of the residual CNN.
///
/// embedding → [BiLSTM] → [stem conv + local max pool] → residual conv
/// stack → global max pool → dense layers → class logits.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArchConfig {
    pub max_len: usize,
    pub embed_dim: usize,
    /// Pooling window (and stride) after the stem convolution; 1 disables
    /// the stem.
    pub downsample: usize,
    pub stem_kernel: usize,
    pub stem_filters: usize,
    pub conv_layers: Vec<ConvSpec>,
    pub residual: bool,
    pub dense_units: Vec<usize>,
    pub n_classes: usize,
    pub bilstm_front: bool,
    pub bilstm_units: usize,
    pub truncation: Truncation,
}

impl Default for ArchConfig {
    fn default() -> Self {
        ArchConfig {
            max_len: 50_000,
            embed_dim: 64,
            downsample: 8,
            stem_kernel: 7,
            stem_filters: 128,
            conv_layers: vec![ConvSpec { filters: 192, kernel: 5 }; 3],
            residual: true,
            dense_units: vec![64],
            n_classes: 4,
            bilstm_front: false,
            bilstm_units: 32,
            truncation: Truncation::Head,
        }
    }
}

impl ArchConfig {
    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(Error::Config(m));
        if self.max_len == 0 || self.max_len > MAX_SUPPORTED_LEN {
            return err(format!("arch.max_len must be in 1..={MAX_SUPPORTED_LEN}, got {}", self.max_len));
        }
        if self.embed_dim == 0 || self.n_classes < 2 {
            return err("arch.embed_dim must be positive and arch.n_classes at least 2".into());
        }
        if self.downsample == 0 || (self.downsample > 1 && self.stem_filters == 0) {
            return err("arch.downsample must be >= 1 with positive arch.stem_filters".into());
        }
        if self.downsample > 1 && self.stem_kernel % 2 == 0 {
            return err(format!("arch.stem_kernel must be odd, got {}", self.stem_kernel));
        }
        if self.conv_layers.is_empty() {
            return err("arch.conv_layers needs at least one layer".into());
        }
        for c in &self.conv_layers {
            if c.filters == 0 || c.kernel % 2 == 0 {
                return err(format!("conv layer {c} needs positive filters and an odd kernel"));
            }
        }
        if self.dense_units.contains(&0) {
            return err("arch.dense_units must be positive".into());
        }
        if self.bilstm_front && self.bilstm_units == 0 {
            return err("arch.bilstm_units must be positive".into());
        }
        Ok(())
    }

    /// Exact parameter count for a vocabulary of `vocab_size` ids.
    pub fn param_count(&self, vocab_size: usize) -> usize {
        let mut n = vocab_size * self.embed_dim;
        let mut width = self.embed_dim;
        if self.bilstm_front {
            let h = self.bilstm_units;
            n += 2 * 4 * ((width + h) * h + h);
            width = 2 * h;
        }
        if self.downsample > 1 {
            n += self.stem_kernel * width * self.stem_filters + self.stem_filters;
            width = self.stem_filters;
        }
        for c in &self.conv_layers {
            n += c.kernel * width * c.filters + c.filters;
            if self.residual && width != c.filters {
                n += width * c.filters + c.filters;
            }
            width = c.filters;
        }
        for &u in &self.dense_units {
            n += width * u + u;
            width = u;
        }
        n + width * self.n_classes + self.n_classes
    }
}
