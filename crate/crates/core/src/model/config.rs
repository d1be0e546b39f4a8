use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{bail, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GateActivation {
    #[default]
    Logistic,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InjectionConfig {
    pub enabled: bool,
    /// 1-based bottom-up level whose output is gated.
    pub level: usize,
    /// Number of Haar maps in the injected bank.
    pub bank_channels: usize,
    pub activation: GateActivation,
}

impl Default for InjectionConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            level: 2,
            bank_channels: 5,
            activation: GateActivation::Logistic,
        }
    }
}

/// Architecture hyperparameters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SharpNetConfig {
    /// (H, W, C) of input images.
    pub input_dims: [usize; 3],
    pub levels: usize,
    pub bottom_up_channels: Vec<usize>,
    pub pyramid_channels: usize,
    pub num_classes: usize,
    pub injection: InjectionConfig,
    /// Normalization layers are not part of the network; must stay false.
    pub batch_norm: bool,
    pub seed: u64,
}

impl Default for SharpNetConfig {
    fn default() -> Self {
        Self {
            input_dims: [128, 128, 3],
            levels: 4,
            bottom_up_channels: vec![128, 256, 512, 1024],
            pyramid_channels: 128,
            num_classes: 10,
            injection: InjectionConfig::default(),
            batch_norm: false,
            seed: 0,
        }
    }
}

impl SharpNetConfig {
    /// 16×16 input, two levels of 8 and 16 channels, three classes,
    /// injection on. Small enough for full finite-difference checks.
    pub fn tiny() -> Self {
        Self {
            input_dims: [16, 16, 3],
            levels: 2,
            bottom_up_channels: vec![8, 16],
            num_classes: 3,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let [h, w, c] = self.input_dims;
        if self.levels == 0 {
            bail!(InvalidArgument, "levels must be at least 1");
        }
        if self.bottom_up_channels.len() != self.levels {
            bail!(
                InvalidArgument,
                "{} bottom-up channel counts for {} levels",
                self.bottom_up_channels.len(),
                self.levels
            );
        }
        if let Some(&bad) = self.bottom_up_channels.iter().find(|&&ch| ch == 0 || ch % 4 != 0) {
            bail!(
                InvalidArgument,
                "bottom-up channels must be positive multiples of 4, got {}",
                bad
            );
        }
        let step = 1usize << self.levels;
        if h == 0 || w == 0 || h % step != 0 || w % step != 0 {
            bail!(
                InvalidArgument,
                "input {}×{} must be divisible by 2^levels = {}",
                h,
                w,
                step
            );
        }
        if c == 0 {
            bail!(InvalidArgument, "input needs at least one channel");
        }
        if self.pyramid_channels == 0 || self.num_classes == 0 {
            bail!(InvalidArgument, "pyramid channels and class count must be positive");
        }
        if self.injection.enabled {
            if !(1..=self.levels).contains(&self.injection.level) {
                bail!(
                    InvalidArgument,
                    "injection level {} outside [1, {}]",
                    self.injection.level,
                    self.levels
                );
            }
            if self.injection.bank_channels == 0 {
                bail!(InvalidArgument, "injection bank needs at least one channel");
            }
        }
        if self.batch_norm {
            bail!(InvalidArgument, "batch normalization is not supported");
        }
        Ok(())
    }

    /// (H, W) of bottom-up level `level` (1-based).
    pub fn level_dims(&self, level: usize) -> (usize, usize) {
        (self.input_dims[0] >> level, self.input_dims[1] >> level)
    }

    /// (H, W) the injected feature bank must have, if injection is on.
    pub fn bank_dims(&self) -> Option<(usize, usize)> {
        self.injection.enabled.then(|| self.level_dims(self.injection.level))
    }

    pub fn channels(&self) -> &[usize] {
        &self.bottom_up_channels
    }
}

pub(crate) fn check_dims(
    config: &SharpNetConfig,
    shape: &[usize],
    what: &str,
    channels: usize,
    level: usize,
) -> Result<()> {
    let (h, w) = config.level_dims(level);
    let ok = matches!(shape, &[_, sh, sw, sc] if sh == h && sw == w && sc == channels);
    if !ok {
        let expected: Vec<usize> = vec![h, w, channels];
        bail!(
            InvalidShape,
            "{} has shape {:?}, expected N×{:?}",
            what,
            shape,
            expected
        );
    }
    Ok(())
}
