//! Symbol timelines, emission schedules and Poisson observation traces.
//!
//! The transmitter has no internal clock: symbol intervals have random
//! lengths, drawn uniformly from the grid points of `[T_min, T_max]` where
//! `T_min = (1-α)·T̄` and `T_max = (1+α)·T̄`. A virtual anchor start at
//! `t = 0` is shared knowledge of transmitter and receiver; the first real
//! symbol start is itself random in `[T_min, T_max]`, so the receiver has to
//! estimate it like any other.
//!
//! All true start times lie on the receiver's sample grid. Times are handled
//! as integer grid steps of length `dt` so that estimator tie-breaks and
//! error classification are exact.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::ExpectedSignal;

#[derive(Debug, Error)]
pub enum TimelineError {
    #[error("invalid timeline configuration: {0}")]
    InvalidConfig(String),
    #[error("expected signals must share the sample grid")]
    GridMismatch,
}

/// Synchronization-detection framework selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Framework {
    /// Independent synchronization (type B) and detection (type A).
    F1,
    /// Joint synchronization and detection using both types.
    F2,
}

/// Timing configuration of one block of symbols.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimelineConfig {
    /// Mean symbol duration T̄ in seconds.
    pub mean_symbol_duration: f64,
    /// Interval variability α in [0, 1]: lengths range over [(1-α)·T̄, (1+α)·T̄].
    pub alpha: f64,
    /// Number of symbols per block.
    pub block_len: usize,
    /// Sample step Δt in seconds; must divide T̄ exactly.
    pub sample_step: f64,
}

/// Timing constants of a validated configuration, in grid steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridParams {
    /// Mean symbol duration in steps.
    pub tbar_steps: i64,
    /// Minimum symbol interval in steps.
    pub tmin_steps: i64,
    /// Maximum symbol interval in steps.
    pub tmax_steps: i64,
}

const STEP_EPS: f64 = 1e-9;

fn int_steps(x: f64) -> Option<i64> {
    let r = x.round();
    if (x - r).abs() < STEP_EPS {
        Some(r as i64)
    } else {
        None
    }
}

fn ceil_steps(x: f64) -> i64 {
    int_steps(x).unwrap_or_else(|| x.ceil() as i64)
}

fn floor_steps(x: f64) -> i64 {
    int_steps(x).unwrap_or_else(|| x.floor() as i64)
}

impl TimelineConfig {
    pub fn validate(&self) -> Result<GridParams, TimelineError> {
        if !(self.sample_step > 0.0) {
            return Err(TimelineError::InvalidConfig(format!(
                "sample step must be positive, got {}",
                self.sample_step
            )));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(TimelineError::InvalidConfig(format!(
                "alpha must lie in [0, 1], got {}",
                self.alpha
            )));
        }
        if self.block_len == 0 {
            return Err(TimelineError::InvalidConfig("block length must be at least 1".into()));
        }
        let tbar_steps = int_steps(self.mean_symbol_duration / self.sample_step).ok_or_else(|| {
            TimelineError::InvalidConfig(format!(
                "sample step {} must divide the mean symbol duration {} exactly",
                self.sample_step, self.mean_symbol_duration
            ))
        })?;
        if tbar_steps <= 0 {
            return Err(TimelineError::InvalidConfig(
                "mean symbol duration must be positive".into(),
            ));
        }
        let tmin_steps = ceil_steps((1.0 - self.alpha) * tbar_steps as f64);
        let tmax_steps = floor_steps((1.0 + self.alpha) * tbar_steps as f64);
        if tmin_steps < 1 {
            return Err(TimelineError::InvalidConfig(
                "minimum symbol interval must cover at least one grid step".into(),
            ));
        }
        Ok(GridParams {
            tbar_steps,
            tmin_steps,
            tmax_steps,
        })
    }

    /// Whether the symbol-by-symbol ML/LF constraint `T_max <= 2·T_min` holds.
    pub fn satisfies_interval_constraint(&self) -> bool {
        self.alpha <= 1.0 / 3.0 + 1e-12
    }
}

/// Ground-truth timing and emissions of one block.
///
/// Symbols are indexed `k = 1..=K`; `start_steps[k-1]` holds the grid step of
/// `t_s[k]`. `bits` are the data symbols; `a`/`b` flag whether type-A/type-B
/// molecules are released at each symbol start.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolTimeline {
    pub dt: f64,
    pub start_steps: Vec<i64>,
    pub bits: Vec<u8>,
    pub a: Vec<u8>,
    pub b: Vec<u8>,
}

impl SymbolTimeline {
    /// Start times in seconds.
    pub fn start_times_s(&self) -> Vec<f64> {
        self.start_steps.iter().map(|&s| s as f64 * self.dt).collect()
    }
}

/// Draws the symbol start steps: i.i.d. interval lengths, uniform over the
/// grid points of `[T_min, T_max]` (endpoints included), from the anchor 0.
pub(crate) fn sample_start_steps<R: Rng>(grid: &GridParams, block_len: usize, rng: &mut R) -> Vec<i64> {
    let mut starts = Vec::with_capacity(block_len);
    let mut current = 0i64;
    for _ in 0..block_len {
        current += rng.random_range(grid.tmin_steps..=grid.tmax_steps);
        starts.push(current);
    }
    starts
}

/// Draws equiprobable data bits.
pub(crate) fn sample_bits<R: Rng>(count: usize, rng: &mut R) -> Vec<u8> {
    (0..count).map(|_| rng.random_range(0..=1u8)).collect()
}

/// Samples a ground-truth timeline: interval lengths first, then data bits.
///
/// Emission indicators are left empty; apply [`emission_schedule`] next.
pub fn sample_timeline<R: Rng>(
    config: &TimelineConfig,
    rng: &mut R,
) -> Result<SymbolTimeline, TimelineError> {
    let grid = config.validate()?;
    let start_steps = sample_start_steps(&grid, config.block_len, rng);
    let bits = sample_bits(config.block_len, rng);
    Ok(SymbolTimeline {
        dt: config.sample_step,
        start_steps,
        bits,
        a: Vec::new(),
        b: Vec::new(),
    })
}

/// Fills the emission indicators for the chosen framework.
///
/// Framework 1 releases synchronization molecules every symbol (`b ≡ 1`) and
/// information molecules for one-bits (`a = w`). Framework 2 releases type A
/// for one-bits and type B for zero-bits (`a = w`, `b = 1 - w`).
pub fn emission_schedule(timeline: &mut SymbolTimeline, framework: Framework) {
    timeline.a = timeline.bits.clone();
    timeline.b = match framework {
        Framework::F1 => vec![1; timeline.bits.len()],
        Framework::F2 => timeline.bits.iter().map(|&w| 1 - w).collect(),
    };
}

/// Observed molecule counts of both types on the uniform sample grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationTrace {
    pub dt: f64,
    pub counts_a: Vec<u32>,
    pub counts_b: Vec<u32>,
}

/// Draws one Poisson count; a zero mean deterministically yields zero.
pub fn poisson_count<R: Rng>(mean: f64, rng: &mut R) -> u32 {
    debug_assert!(mean >= 0.0);
    if mean <= 0.0 {
        return 0;
    }
    let draw: f64 = Poisson::new(mean).expect("positive mean").sample(rng);
    draw as u32
}

/// Samples the observation trace: type-A counts in time order, then type-B.
///
/// Counts at different samples and of different types are independent.
pub fn sample_observations<R: Rng>(
    expected_a: &ExpectedSignal,
    expected_b: &ExpectedSignal,
    rng: &mut R,
) -> Result<ObservationTrace, TimelineError> {
    if expected_a.dt != expected_b.dt || expected_a.means.len() != expected_b.means.len() {
        return Err(TimelineError::GridMismatch);
    }
    let counts_a = expected_a.means.iter().map(|&m| poisson_count(m, rng)).collect();
    let counts_b = expected_b.means.iter().map(|&m| poisson_count(m, rng)).collect();
    Ok(ObservationTrace {
        dt: expected_a.dt,
        counts_a,
        counts_b,
    })
}
