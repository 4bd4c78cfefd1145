//! Monte Carlo experiment engine.
//!
//! An experiment is described by a JSON-serializable [`ExperimentConfig`];
//! [`resolve`] validates it and derives every runtime constant (release
//! counts, SNRs, peak delays, normalization constants, grid steps), and
//! [`run_experiment`] simulates the configured number of blocks on
//! independent seeded substreams. Results are bit-reproducible for a given
//! (config, seed) regardless of the number of worker threads.

mod engine;
mod output;
mod pipeline;

pub use engine::{
    block_reports, optimize_threshold, run_coded_experiment, run_experiment, sweep,
    ExperimentResult, Objective, OptimizeOutcome, SweepParam, SweepPoint, SweepResult,
};
pub use output::{write_run_outputs, write_sweep_csv};

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{
    build_transparent_cir, calibrate_release_count, load_cir_table_path, ChannelError, Cir,
    SampledCir,
};
use crate::coding::{CodingError, MarkerCodeConfig};
use crate::metrics::MetricsError;
use crate::sync_f1::{Scheme, TtParams};
use crate::timeline::{Framework, GridParams, TimelineConfig, TimelineError};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid experiment configuration: {0}")]
    Validation(String),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Timeline(#[from] TimelineError),
    #[error(transparent)]
    Coding(#[from] CodingError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("every sweep point was infeasible")]
    AllPointsInfeasible,
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("config parse error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Geometry, noise and molecule-budget description of both channels.
///
/// Release counts may be given directly (`n_a`/`n_b`), solved from target
/// SNRs (`snr_a_db`/`snr_b_db`), or derived from a molecule budget (the
/// top-level `beta` section). A tabulated CIR replaces the built-in
/// transparent-receiver response; it can be rescaled to a target SNR but not
/// combined with explicit release counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSection {
    pub diffusion: f64,
    pub distance: f64,
    pub receiver_radius: f64,
    pub z_a: f64,
    pub z_b: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snr_a_db: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snr_b_db: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_b: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cir_table: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimelineSection {
    /// Mean symbol duration T̄ in seconds.
    pub mean_symbol_duration: f64,
    /// Interval variability α.
    pub alpha: f64,
    /// Symbols per block K.
    pub block_len: usize,
    /// Sample step Δt in seconds.
    pub sample_step: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TtSection {
    /// Trigger threshold; counts in Framework 1, normalized units in
    /// Framework 2. Required for the TT scheme.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xi: Option<f64>,
    /// Minimum detection window in seconds; defaults to T_min.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_window: Option<f64>,
}

/// Molecule budget split: on average `β·n_avg` type-A and `(1-β)·n_avg`
/// type-B molecules per symbol interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BetaSection {
    pub beta: f64,
    pub n_avg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CodingSection {
    /// Data bits per code block (L).
    pub data_len: usize,
    /// Marker bit string, e.g. "100".
    pub marker: String,
}

fn default_histogram_bin() -> f64 {
    0.05
}

/// Complete experiment description; the unit serialized to and from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub framework: Framework,
    pub scheme: Scheme,
    pub channel: ChannelSection,
    pub timeline: TimelineSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tt: Option<TtSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<BetaSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coding: Option<CodingSection>,
    pub blocks: u64,
    pub seed: u64,
    /// Histogram bin width for the normalized synchronization error.
    #[serde(default = "default_histogram_bin")]
    pub histogram_bin: f64,
}

impl ExperimentConfig {
    pub fn from_json(json: &str) -> Result<Self, HarnessError> {
        Ok(serde_json::from_str(json)?)
    }
}

/// Constants derived during resolution; everything needed to reproduce the
/// run is recorded here alongside the input config.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DerivedParams {
    pub n_a: f64,
    pub n_b: f64,
    pub snr_a_db: f64,
    pub snr_b_db: f64,
    pub c_a: f64,
    pub c_b: f64,
    pub peak_time_a_s: f64,
    pub peak_time_b_s: f64,
    pub peak_step_a: i64,
    pub peak_step_b: i64,
    pub tbar_steps: i64,
    pub tmin_steps: i64,
    pub tmax_steps: i64,
    pub cir_steps_a: usize,
    pub cir_steps_b: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub xi: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_window_steps: Option<i64>,
}

/// Input config plus derived constants, as recorded in `summary.json`.
#[derive(Debug, Clone, Serialize)]
pub struct ResolvedConfig {
    pub config: ExperimentConfig,
    pub derived: DerivedParams,
}

/// Validated, runtime-ready experiment.
#[derive(Debug, Clone)]
pub struct ResolvedExperiment {
    pub config: ExperimentConfig,
    pub derived: DerivedParams,
    pub(crate) grid: GridParams,
    pub(crate) scir_a: SampledCir,
    pub(crate) scir_b: SampledCir,
    pub(crate) tt: Option<TtParams>,
    pub(crate) marker: Option<MarkerCodeConfig>,
}

impl ResolvedExperiment {
    pub fn resolved_config(&self) -> ResolvedConfig {
        ResolvedConfig {
            config: self.config.clone(),
            derived: self.derived.clone(),
        }
    }
}

/// Upper bound on the time at which the transparent CIR tail falls below
/// the truncation cutoff, used as the tabulation horizon.
fn transparent_horizon(peak_time: f64, dt: f64) -> f64 {
    let ratio = (crate::channel::CIR_TAIL_CUTOFF.recip() * (1.5f64).exp()).powf(2.0 / 3.0);
    peak_time * ratio * 1.01 + dt
}

struct ResolvedChannel {
    scir: SampledCir,
    n: f64,
    snr_db: f64,
    peak_time_s: f64,
}

fn resolve_channel(
    section: &ChannelSection,
    z: f64,
    n_explicit: Option<f64>,
    snr_db_target: Option<f64>,
    n_from_beta: Option<f64>,
    dt: f64,
) -> Result<ResolvedChannel, HarnessError> {
    if !(z > 0.0) {
        return Err(HarnessError::Validation(format!(
            "noise mean must be positive, got {z}"
        )));
    }
    let unit: Cir = match &section.cir_table {
        Some(path) => {
            if n_explicit.is_some() || n_from_beta.is_some() {
                return Err(HarnessError::Validation(
                    "a tabulated CIR cannot be combined with explicit release counts; \
                     use a target SNR to rescale it"
                        .into(),
                ));
            }
            load_cir_table_path(path)?
        }
        None => {
            let params = crate::channel::ChannelParams {
                diffusion: section.diffusion,
                distance: section.distance,
                receiver_radius: section.receiver_radius,
                release_count: 1.0,
                noise_mean: z,
            };
            let peak_time = section.distance * section.distance / (6.0 * section.diffusion);
            build_transparent_cir(&params, dt, transparent_horizon(peak_time, dt))?
        }
    };

    let sources = [
        n_from_beta.is_some(),
        n_explicit.is_some(),
        snr_db_target.is_some(),
    ];
    if sources.iter().filter(|&&s| s).count() > 1 {
        return Err(HarnessError::Validation(
            "give exactly one of: beta budget, explicit release count, target SNR".into(),
        ));
    }
    let n = if let Some(n) = n_from_beta.or(n_explicit) {
        if !(n >= 0.0) {
            return Err(HarnessError::Validation(format!(
                "release count must be non-negative, got {n}"
            )));
        }
        n
    } else if let Some(db) = snr_db_target {
        calibrate_release_count(&unit, z, 10f64.powf(db / 10.0))?
    } else if section.cir_table.is_some() {
        1.0 // tabulated CIR used as-is
    } else {
        return Err(HarnessError::Validation(
            "no molecule budget given: set a target SNR, a release count, or a beta budget".into(),
        ));
    };

    let scaled = unit.scaled(n);
    let scir = scaled.resample(dt);
    if !(scir.peak_value() > 0.0) {
        return Err(HarnessError::Validation(
            "resolved CIR has no positive sample on the observation grid".into(),
        ));
    }
    Ok(ResolvedChannel {
        snr_db: 10.0 * (scir.peak_value() / z).log10(),
        peak_time_s: scaled.peak_time(),
        scir,
        n,
    })
}

/// Validates a config and derives all runtime constants.
pub fn resolve(config: &ExperimentConfig) -> Result<ResolvedExperiment, HarnessError> {
    if config.blocks == 0 {
        return Err(HarnessError::Validation("block count must be at least 1".into()));
    }
    if !(config.histogram_bin > 0.0) {
        return Err(HarnessError::Validation("histogram bin width must be positive".into()));
    }
    let tl_config = TimelineConfig {
        mean_symbol_duration: config.timeline.mean_symbol_duration,
        alpha: config.timeline.alpha,
        block_len: config.timeline.block_len,
        sample_step: config.timeline.sample_step,
    };
    let grid = tl_config.validate()?;
    if matches!(config.scheme, Scheme::Ml | Scheme::Lf) && !tl_config.satisfies_interval_constraint()
    {
        return Err(HarnessError::Validation(format!(
            "the ML and LF schemes require T_max <= 2*T_min (alpha <= 1/3), got alpha = {}",
            config.timeline.alpha
        )));
    }

    let dt = config.timeline.sample_step;
    let ch = &config.channel;
    let (beta_n_a, beta_n_b) = match &config.beta {
        Some(b) => {
            if !(b.beta > 0.0 && b.beta < 1.0) {
                return Err(HarnessError::Validation(format!(
                    "beta must lie strictly inside (0, 1), got {}",
                    b.beta
                )));
            }
            if !(b.n_avg > 0.0) {
                return Err(HarnessError::Validation(format!(
                    "average molecule budget must be positive, got {}",
                    b.n_avg
                )));
            }
            match config.framework {
                Framework::F1 => (
                    Some(2.0 * b.beta * b.n_avg),
                    Some((1.0 - b.beta) * b.n_avg),
                ),
                Framework::F2 => (
                    Some(2.0 * b.beta * b.n_avg),
                    Some(2.0 * (1.0 - b.beta) * b.n_avg),
                ),
            }
        }
        None => (None, None),
    };
    let res_a = resolve_channel(ch, ch.z_a, ch.n_a, ch.snr_a_db, beta_n_a, dt)?;
    let res_b = resolve_channel(ch, ch.z_b, ch.n_b, ch.snr_b_db, beta_n_b, dt)?;

    let tt = match config.scheme {
        Scheme::Tt => {
            let section = config.tt.as_ref().ok_or_else(|| {
                HarnessError::Validation("the TT scheme needs a tt section with a threshold".into())
            })?;
            let xi = section.xi.ok_or_else(|| {
                HarnessError::Validation(
                    "the TT scheme needs tt.xi; pick one or run optimize-xi".into(),
                )
            })?;
            let dw_steps = match section.min_window {
                Some(w) => {
                    let steps = (w / dt).round();
                    if ((w / dt) - steps).abs() > 1e-6 {
                        return Err(HarnessError::Validation(format!(
                            "tt.min_window {w} must lie on the sample grid"
                        )));
                    }
                    steps as i64
                }
                None => grid.tmin_steps,
            };
            let params = TtParams { xi, dw_steps };
            params
                .validate(&grid)
                .map_err(HarnessError::Validation)?;
            Some(params)
        }
        _ => {
            if let Some(section) = &config.tt {
                if let Some(w) = section.min_window {
                    if w > (grid.tmin_steps as f64 + 0.5) * dt {
                        return Err(HarnessError::Validation(
                            "tt.min_window must not exceed T_min".into(),
                        ));
                    }
                }
            }
            None
        }
    };

    let marker = match &config.coding {
        Some(section) => {
            let marker_bits: Result<Vec<u8>, _> = section
                .marker
                .chars()
                .map(|c| match c {
                    '0' => Ok(0u8),
                    '1' => Ok(1u8),
                    other => Err(HarnessError::Validation(format!(
                        "marker must be a bit string, found '{other}'"
                    ))),
                })
                .collect();
            let mc = MarkerCodeConfig::new(section.data_len, marker_bits?)?;
            if mc.marker != [1, 0, 0] {
                return Err(HarnessError::Validation(
                    "decoding supports only the marker 100".into(),
                ));
            }
            if !config.timeline.block_len.is_multiple_of(mc.block_len()) {
                return Err(HarnessError::Validation(format!(
                    "block length {} must be a multiple of data length + marker length = {}",
                    config.timeline.block_len,
                    mc.block_len()
                )));
            }
            Some(mc)
        }
        None => None,
    };

    let derived = DerivedParams {
        n_a: res_a.n,
        n_b: res_b.n,
        snr_a_db: res_a.snr_db,
        snr_b_db: res_b.snr_db,
        c_a: ch.z_a + res_a.scir.peak_value(),
        c_b: ch.z_b + res_b.scir.peak_value(),
        peak_time_a_s: res_a.peak_time_s,
        peak_time_b_s: res_b.peak_time_s,
        peak_step_a: res_a.scir.peak_step(),
        peak_step_b: res_b.scir.peak_step(),
        tbar_steps: grid.tbar_steps,
        tmin_steps: grid.tmin_steps,
        tmax_steps: grid.tmax_steps,
        cir_steps_a: res_a.scir.len(),
        cir_steps_b: res_b.scir.len(),
        xi: tt.map(|t| t.xi),
        min_window_steps: tt.map(|t| t.dw_steps),
    };
    Ok(ResolvedExperiment {
        config: config.clone(),
        derived,
        grid,
        scir_a: res_a.scir,
        scir_b: res_b.scir,
        tt,
        marker,
    })
}
