//! Experiment configuration, read from JSON and overridable from the CLI.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::antenna_model::{load_model, synthesize_model, PixelAntennaModel, SynthesisSpec};
use crate::codebook::{load_codebook, Codebook, GlaConfig};
use crate::error::{Error, Result};
use crate::mimo_capacity::AllocationMode;
use crate::sebo::SeboConfig;

pub const THREADS_ENV: &str = "PIXELCODE_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    /// Per-trial optimised SISO gain (SEBO, exhaustive, or a fixed codebook).
    SisoGain,
    /// Codebooks of each size in `m_sizes` trained, then evaluated per trial.
    SisoGainCodebook,
    MimoCapacity,
    Eadof,
    Correlation,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::SisoGain => "siso-gain",
            ExperimentKind::SisoGainCodebook => "siso-gain-codebook",
            ExperimentKind::MimoCapacity => "mimo-capacity",
            ExperimentKind::Eadof => "eadof",
            ExperimentKind::Correlation => "correlation",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodKind {
    Sebo,
    Codebook,
    Exhaustive,
}

impl MethodKind {
    pub fn name(self) -> &'static str {
        match self {
            MethodKind::Sebo => "sebo",
            MethodKind::Codebook => "codebook",
            MethodKind::Exhaustive => "exhaustive",
        }
    }
}

impl std::str::FromStr for MethodKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sebo" => Ok(MethodKind::Sebo),
            "codebook" => Ok(MethodKind::Codebook),
            "exhaustive" => Ok(MethodKind::Exhaustive),
            other => Err(Error::InvalidConfig(format!("unknown method '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl std::str::FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(Error::InvalidConfig(format!("unknown output format '{other}'"))),
        }
    }
}

fn default_snr_grid() -> Vec<f64> {
    (0..9).map(|i| -10.0 + 5.0 * i as f64).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    /// Receive-side model, or the only model for SISO and analysis runs.
    pub model: Option<PathBuf>,
    /// Transmit-side model for MIMO runs; defaults to `model`.
    pub model_t: Option<PathBuf>,
    /// Used when no model path is given.
    pub synthetic: Option<SynthesisSpec>,
    pub trials: usize,
    pub seed: u64,
    #[serde(rename = "K")]
    pub k_angles: usize,
    pub snr_db: Vec<f64>,
    pub n_t: usize,
    pub n_r: usize,
    pub modes: Vec<AllocationMode>,
    pub method: MethodKind,
    pub sebo: SeboConfig,
    pub gla: GlaConfig,
    pub m_sizes: Vec<usize>,
    pub training_size: usize,
    /// Fixed receive (or SISO) codebook.
    pub codebook: Option<PathBuf>,
    /// Fixed transmit codebook; defaults to `codebook`.
    pub codebook_t: Option<PathBuf>,
    pub threshold: f64,
    /// Worker cap; the environment variable caps it further. Not echoed
    /// into results so output stays independent of it.
    #[serde(skip_serializing)]
    pub threads: Option<usize>,
    #[serde(skip_serializing)]
    pub output: Option<PathBuf>,
    pub format: OutputFormat,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            kind: ExperimentKind::SisoGain,
            model: None,
            model_t: None,
            synthetic: None,
            trials: 1000,
            seed: 0,
            k_angles: 72,
            snr_db: default_snr_grid(),
            n_t: 2,
            n_r: 2,
            modes: vec![AllocationMode::Uniform],
            method: MethodKind::Sebo,
            sebo: SeboConfig::default(),
            gla: GlaConfig::default(),
            m_sizes: Vec::new(),
            training_size: 1000,
            codebook: None,
            codebook_t: None,
            threshold: 0.998,
            threads: None,
            output: None,
            format: OutputFormat::Csv,
        }
    }
}

impl ExperimentConfig {
    pub fn new(kind: ExperimentKind) -> Self {
        ExperimentConfig {
            kind,
            ..Default::default()
        }
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        serde_json::from_slice(bytes).map_err(|e| Error::InvalidConfig(format!("config line {}: {e}", e.line())))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)
            .map_err(|e| Error::InvalidConfig(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&bytes)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        let needs_trials = !matches!(self.kind, ExperimentKind::Eadof);
        if needs_trials && self.trials == 0 {
            return bad("trials must be >= 1".into());
        }
        if self.k_angles == 0 {
            return bad("K must be >= 1".into());
        }
        if !(self.threshold > 0.0 && self.threshold <= 1.0) {
            return bad(format!("threshold must lie in (0, 1], got {}", self.threshold));
        }
        if self.threads == Some(0) {
            return bad("threads must be >= 1".into());
        }
        if self.model.is_none() && self.synthetic.is_none() {
            return bad("need a model path or a synthetic model spec".into());
        }
        for p in [&self.model, &self.model_t, &self.codebook, &self.codebook_t].into_iter().flatten() {
            if !p.exists() {
                return bad(format!("referenced file {} does not exist", p.display()));
            }
        }
        self.sebo.validate()?;
        match self.kind {
            ExperimentKind::MimoCapacity => {
                if self.snr_db.is_empty() || self.snr_db.iter().any(|v| !v.is_finite()) {
                    return bad("SNR grid must be non-empty and finite".into());
                }
                if self.n_t == 0 || self.n_r == 0 {
                    return bad("N_T and N_R must be >= 1".into());
                }
                if self.modes.is_empty() {
                    return bad("at least one allocation mode is required".into());
                }
                if self.method == MethodKind::Codebook && self.codebook.is_none() && self.m_sizes.is_empty() {
                    return bad("codebook method needs a codebook file or m_sizes to train".into());
                }
            }
            ExperimentKind::SisoGain => {
                if self.method == MethodKind::Codebook && self.codebook.is_none() {
                    return bad("siso-gain with method codebook needs a codebook file".into());
                }
            }
            ExperimentKind::SisoGainCodebook => {
                if self.m_sizes.is_empty() || self.m_sizes.contains(&0) {
                    return bad("m_sizes must list codebook sizes >= 1".into());
                }
                if self.m_sizes.iter().any(|&m| m > self.training_size) {
                    return bad("every codebook size must be <= training_size".into());
                }
            }
            ExperimentKind::Correlation => {
                if self.codebook.is_none() && self.m_sizes.len() != 1 {
                    return bad("correlation needs a codebook file or exactly one m_size to train".into());
                }
            }
            ExperimentKind::Eadof => {}
        }
        Ok(())
    }

    /// Worker count: the configured value, capped by the environment.
    pub fn worker_count(&self) -> usize {
        let env_cap = std::env::var(THREADS_ENV)
            .ok()
            .and_then(|v| v.trim().parse::<usize>().ok())
            .filter(|&n| n > 0);
        let base = self
            .threads
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
        env_cap.map_or(base, |cap| base.min(cap)).max(1)
    }
}

pub(crate) fn load_model_file(path: &Path) -> Result<PixelAntennaModel> {
    let wrap = |e: Error| Error::ModelLoad {
        path: path.display().to_string(),
        source: Box::new(e),
    };
    let bytes = std::fs::read(path).map_err(|e| wrap(e.into()))?;
    load_model(&bytes).map_err(wrap)
}

pub(crate) fn load_codebook_file(path: &Path) -> Result<Codebook> {
    let bytes = std::fs::read(path)
        .map_err(|e| Error::InvalidConfig(format!("cannot read codebook {}: {e}", path.display())))?;
    load_codebook(&bytes)
}

/// (transmit model, receive model) for the configuration.
pub(crate) fn resolve_models(config: &ExperimentConfig) -> Result<(PixelAntennaModel, PixelAntennaModel)> {
    let receive = match (&config.model, &config.synthetic) {
        (Some(p), _) => load_model_file(p)?,
        (None, Some(spec)) => synthesize_model(spec)?,
        (None, None) => return Err(Error::InvalidConfig("no model".into())),
    };
    let transmit = match &config.model_t {
        Some(p) => load_model_file(p)?,
        None => receive.clone(),
    };
    for m in [&transmit, &receive] {
        if m.k_angles() != config.k_angles {
            return Err(Error::DimensionMismatch(format!(
                "model has K = {}, configuration asks for K = {}",
                m.k_angles(),
                config.k_angles
            )));
        }
    }
    Ok((transmit, receive))
}
