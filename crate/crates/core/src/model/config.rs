//! Declarative architecture description.
//!
//! Serialized as the `[model]` table of a TOML file:
//!
//! ```toml
//! variant = "vln"              # vln | vln-resnet | vln-bl | vln-bl-ff
//! frame_size = 64              # input frames are frame_size × frame_size
//! encoder_filters = [32, 64, 96]
//! encoder_dilations = [1, 2, 4]
//! lstm_channels = [32, 64, 96] # 0 disables the recurrent lateral of a level
//! feedforward = [true, true, true]
//! leaky_slope = 0.01
//! bn_epsilon = 1e-5
//! bn_momentum = 0.99
//! ```
//!
//! Plain variants use one encoder conv per level; `vln-resnet` uses two per
//! level, so its filter and dilation lists are twice as long.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const KERNEL_SIZE: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "vln")]
    Vln,
    #[serde(rename = "vln-resnet")]
    VlnResnet,
    #[serde(rename = "vln-bl")]
    VlnBl,
    #[serde(rename = "vln-bl-ff")]
    VlnBlFf,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Vln, Variant::VlnResnet, Variant::VlnBl, Variant::VlnBlFf];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Vln => "vln",
            Variant::VlnResnet => "vln-resnet",
            Variant::VlnBl => "vln-bl",
            Variant::VlnBlFf => "vln-bl-ff",
        }
    }

    pub fn is_residual(self) -> bool {
        self == Variant::VlnResnet
    }

    /// Default learning rate of the variant.
    pub fn default_learning_rate(self) -> f64 {
        match self {
            Variant::VlnResnet => 5e-4,
            _ => 1e-4,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL.into_iter().find(|v| v.name() == s).ok_or_else(|| {
            Error::Config(format!(
                "unknown variant '{s}' (expected vln, vln-resnet, vln-bl or vln-bl-ff)"
            ))
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub variant: Variant,
    pub frame_size: usize,
    pub encoder_filters: Vec<usize>,
    pub encoder_dilations: Vec<usize>,
    pub lstm_channels: Vec<usize>,
    pub feedforward: Vec<bool>,
    pub leaky_slope: f64,
    pub bn_epsilon: f64,
    pub bn_momentum: f64,
}

impl ModelConfig {
    /// Full-size architecture of a variant.
    pub fn preset(variant: Variant) -> Self {
        let plain = |lstm: Vec<usize>, ff: Vec<bool>| ModelConfig {
            variant,
            frame_size: 64,
            encoder_filters: vec![32, 64, 96],
            encoder_dilations: vec![1, 2, 4],
            lstm_channels: lstm,
            feedforward: ff,
            leaky_slope: 0.01,
            bn_epsilon: 1e-5,
            bn_momentum: 0.99,
        };
        match variant {
            Variant::Vln => plain(vec![32, 64, 96], vec![true; 3]),
            Variant::VlnBl => plain(vec![0, 0, 128], vec![false; 3]),
            Variant::VlnBlFf => plain(vec![0, 0, 128], vec![true; 3]),
            Variant::VlnResnet => ModelConfig {
                encoder_filters: vec![28, 28, 58, 58, 90, 90],
                encoder_dilations: vec![1, 2, 2, 4, 4, 8],
                ..plain(vec![28, 58, 90], vec![true; 3])
            },
        }
    }

    /// Two-level 16×16 miniature of a variant, for gradient checks and fast
    /// tests.
    pub fn reduced(variant: Variant) -> Self {
        let base = ModelConfig {
            frame_size: 16,
            encoder_filters: vec![4, 6],
            encoder_dilations: vec![1, 2],
            ..Self::preset(variant)
        };
        match variant {
            Variant::Vln => ModelConfig {
                lstm_channels: vec![4, 6],
                feedforward: vec![true; 2],
                ..base
            },
            Variant::VlnBl => ModelConfig {
                lstm_channels: vec![0, 8],
                feedforward: vec![false; 2],
                ..base
            },
            Variant::VlnBlFf => ModelConfig {
                lstm_channels: vec![0, 8],
                feedforward: vec![true; 2],
                ..base
            },
            Variant::VlnResnet => ModelConfig {
                encoder_filters: vec![3, 3, 5, 5],
                encoder_dilations: vec![1, 2, 2, 4],
                lstm_channels: vec![3, 5],
                feedforward: vec![true; 2],
                ..base
            },
        }
    }

    pub fn convs_per_level(&self) -> usize {
        if self.variant.is_residual() {
            2
        } else {
            1
        }
    }

    pub fn levels(&self) -> usize {
        self.encoder_filters.len() / self.convs_per_level()
    }

    /// Feature channels of level `l` (0-based).
    pub fn level_channels(&self, l: usize) -> usize {
        self.encoder_filters[(l + 1) * self.convs_per_level() - 1]
    }

    /// Spatial extent of level `l` features.
    pub fn level_size(&self, l: usize) -> usize {
        self.frame_size >> (l + 1)
    }

    pub fn recurrent(&self, l: usize) -> bool {
        self.lstm_channels[l] > 0
    }

    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(Error::Config(m));
        let per = self.convs_per_level();
        let n = self.encoder_filters.len();
        if n == 0 || !n.is_multiple_of(per) {
            return err(format!(
                "{} needs a positive multiple of {per} encoder filters, got {n}",
                self.variant
            ));
        }
        if self.encoder_dilations.len() != n {
            return err(format!(
                "encoder_dilations has {} entries, encoder_filters has {n}",
                self.encoder_dilations.len()
            ));
        }
        let levels = self.levels();
        if self.lstm_channels.len() != levels || self.feedforward.len() != levels {
            return err(format!(
                "lstm_channels ({}) and feedforward ({}) need one entry per level ({levels})",
                self.lstm_channels.len(),
                self.feedforward.len()
            ));
        }
        if self.encoder_filters.contains(&0) || self.encoder_dilations.contains(&0) {
            return err("encoder filters and dilations must be positive".into());
        }
        if self.frame_size == 0 || !self.frame_size.is_multiple_of(1 << levels) {
            return err(format!(
                "frame_size {} must be a positive multiple of 2^{levels}",
                self.frame_size
            ));
        }
        if !self.recurrent(levels - 1) {
            return err("the top level needs a recurrent lateral".into());
        }
        if !(self.leaky_slope.is_finite() && self.bn_epsilon > 0.0 && (0.0..1.0).contains(&self.bn_momentum)) {
            return err("leaky_slope must be finite, bn_epsilon > 0 and bn_momentum in [0, 1)".into());
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("model config serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ModelConfig = toml::from_str(text).map_err(|e| Error::Config(format!("model config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// SHA-256 of the canonical TOML rendering.
    pub fn hash(&self) -> [u8; 32] {
        Sha256::digest(self.to_toml().as_bytes()).into()
    }
}
