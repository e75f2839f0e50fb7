use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::channel::{CfoMixture, RicianChannelSpec};
use crate::error::{Result, SimError};
use crate::noma::NomaConfig;
use crate::rng::fnv1a64;
use crate::waveform::OfdmConfig;

/// Which receiver runs the estimation chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorKind {
    Classical,
    Cnn,
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EstimatorKind::Classical => "classical",
            EstimatorKind::Cnn => "cnn",
        })
    }
}

impl FromStr for EstimatorKind {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "classical" => Ok(EstimatorKind::Classical),
            "cnn" => Ok(EstimatorKind::Cnn),
            other => Err(SimError::InvalidConfig(format!(
                "unknown estimator '{other}', expected classical|cnn"
            ))),
        }
    }
}

/// Which link the sweep exercises.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepMode {
    Oma,
    NomaDl,
    NomaUl,
}

impl fmt::Display for SweepMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepMode::Oma => "oma",
            SweepMode::NomaDl => "noma-dl",
            SweepMode::NomaUl => "noma-ul",
        })
    }
}

impl FromStr for SweepMode {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "oma" => Ok(SweepMode::Oma),
            "noma-dl" => Ok(SweepMode::NomaDl),
            "noma-ul" => Ok(SweepMode::NomaUl),
            other => Err(SimError::InvalidConfig(format!(
                "unknown mode '{other}', expected oma|noma-dl|noma-ul"
            ))),
        }
    }
}

/// CNN shape knobs shared by both refiners: a stack of `hidden_layers`
/// conv+ReLU stages of `filters` kernels, a single-filter projection, square
/// `kernel x kernel` taps with same-padding, and the offset refiner's
/// sliding-window length.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CnnArch {
    pub hidden_layers: usize,
    pub filters: usize,
    pub kernel: usize,
    pub cfo_window: usize,
}

impl Default for CnnArch {
    fn default() -> Self {
        CnnArch {
            hidden_layers: 3,
            filters: 64,
            kernel: 9,
            cfo_window: 1100,
        }
    }
}

impl CnnArch {
    pub fn validate(&self) -> Result<()> {
        if self.kernel == 0 || self.kernel % 2 == 0 {
            return Err(SimError::InvalidConfig(
                "kernel must be odd so same-padding is symmetric".into(),
            ));
        }
        if self.filters == 0 || self.cfo_window == 0 {
            return Err(SimError::InvalidConfig(
                "filters and cfo_window must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// Full sweep scenario: waveform, impairments, optional NOMA power
/// allocation, the SNR grid and trial budget, plus seed and receiver choice.
/// The struct serializes as JSON; the sweep echoes it into the CSV header so
/// every result file is self-describing.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub ofdm: OfdmConfig,
    pub channel: RicianChannelSpec,
    pub cfo: CfoMixture,
    pub noma: Option<NomaConfig>,
    pub snr_grid_db: Vec<f64>,
    pub trials_per_point: usize,
    pub seed: u64,
    pub estimator: EstimatorKind,
    pub arch: CnnArch,
    /// SNR range (dB) that training datasets draw uniformly from.
    pub dataset_snr_range_db: (f64, f64),
    /// Genie receiver: correct offset and channel handed to the equalizer.
    #[serde(default)]
    pub perfect_csi: bool,
    /// Disable the noise injection entirely.
    #[serde(default)]
    pub noiseless: bool,
    /// Downlink NOMA: every user draws its own channel (the default) or all
    /// users share one broadcast draw.
    #[serde(default = "default_true")]
    pub independent_dl_channels: bool,
    /// Uplink NOMA: force all users through one shared channel draw.
    #[serde(default)]
    pub ul_shared_channel: bool,
}

fn default_true() -> bool {
    true
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            ofdm: OfdmConfig::default(),
            channel: RicianChannelSpec::default(),
            cfo: CfoMixture::from_seed(1),
            noma: Some(NomaConfig::default()),
            snr_grid_db: vec![0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0],
            trials_per_point: 200,
            seed: 1,
            estimator: EstimatorKind::Classical,
            arch: CnnArch::default(),
            dataset_snr_range_db: (5.0, 15.0),
            perfect_csi: false,
            noiseless: false,
            independent_dl_channels: true,
            ul_shared_channel: false,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        self.ofdm.validate()?;
        self.channel.validate()?;
        self.cfo.validate()?;
        self.arch.validate()?;
        if let Some(noma) = &self.noma {
            noma.validate()?;
        }
        if self.snr_grid_db.is_empty() {
            return Err(SimError::InvalidConfig("snr_grid_db must not be empty".into()));
        }
        if self.trials_per_point == 0 {
            return Err(SimError::InvalidConfig("trials_per_point must be >= 1".into()));
        }
        if self.dataset_snr_range_db.0 > self.dataset_snr_range_db.1 {
            return Err(SimError::InvalidConfig(
                "dataset_snr_range_db must be (lo, hi) with lo <= hi".into(),
            ));
        }
        Ok(())
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn to_json_compact(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = serde_json::from_str(text)
            .map_err(|e| SimError::InvalidConfig(format!("config JSON: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    /// Stable fingerprint of the scenario, recorded in dataset files.
    pub fn digest(&self) -> u64 {
        fnv1a64(self.to_json_compact().as_bytes())
    }
}
