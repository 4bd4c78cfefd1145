//! Framework 1: independent symbol synchronization and data detection.
//!
//! Synchronization runs on the type-B observations alone; every symbol start
//! releases type-B molecules, so the receiver searches for the start of
//! symbol `k` in the hypothesis set
//! `T[k] = [t̂_s[k-1] + T_min, t̂_s[k-1] + T_max]`, anchored on its own
//! previous estimate. Data bits are then detected from the type-A
//! observations with an ML test over the detection window.
//!
//! Four estimators are provided:
//!
//! * ML — grid search of the Poisson log-likelihood over the observation
//!   window `T_ow[k] = [t̂_s[k-1] + T_min, t̂_s[k-1] + 2·T_min]`. Requires
//!   `T_max <= 2·T_min` so that the next symbol cannot fall inside the
//!   window.
//! * LF — correlation of the observed counts with the hypothesis means; same
//!   window and constraint, linear operations only.
//! * PO — takes the single maximal count in the expected-peak region and
//!   subtracts the known CIR peak delay. No interval constraint.
//! * TT — threshold trigger: the detection window opens at the first count
//!   at or above a threshold and closes at the first count at or below it
//!   (with a minimum window length). It never estimates the start itself.
//!
//! Hypothesis means are reconstructed decision-directed: prior estimated
//! starts (and, on the type-A side, prior detected bits) are plugged in as
//! if they were correct. All tie-breaks pick the earliest time.

use thiserror::Error;

use crate::channel::SampledCir;
use crate::timeline::GridParams;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SyncError {
    #[error("symbol-by-symbol synchronization requires T_max <= 2*T_min")]
    ConstraintViolated,
    #[error("observation window lies beyond the end of the trace")]
    TraceExhausted,
}

/// One molecule type's channel knowledge at the receiver.
#[derive(Debug, Clone, Copy)]
pub struct ChannelView<'a> {
    /// CIR on the sample grid, scaled by the release count.
    pub cir: &'a SampledCir,
    /// External noise mean; must be positive so Poisson means never vanish.
    pub z: f64,
}

/// Scheme selector shared by both frameworks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Ml,
    Lf,
    Po,
    Tt,
    /// Genie-aided benchmark: starts are known exactly, only detection runs.
    Perfect,
}

/// Threshold-trigger parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TtParams {
    /// Trigger threshold; raw molecule count in Framework 1, normalized units
    /// in Framework 2.
    pub xi: f64,
    /// Minimum detection-window length in grid steps; must not exceed T_min.
    pub dw_steps: i64,
}

impl TtParams {
    pub fn validate(&self, grid: &GridParams) -> Result<(), String> {
        if !(self.xi > 0.0) {
            return Err(format!("threshold must be positive, got {}", self.xi));
        }
        if self.dw_steps < 1 || self.dw_steps > grid.tmin_steps {
            return Err(format!(
                "minimum window must lie in (0, T_min] ({} steps), got {} steps",
                grid.tmin_steps, self.dw_steps
            ));
        }
        Ok(())
    }
}

/// Per-symbol outputs of one block's synchronization and detection run.
#[derive(Debug, Clone, Default)]
pub struct SyncResult {
    /// Estimated start steps, in symbol order. May be shorter than the block
    /// (truncation) or longer (threshold-trigger false alarms).
    pub start_steps: Vec<i64>,
    /// Sample windows actually used to decide each detected symbol.
    pub windows: Vec<(i64, i64)>,
    /// Detected bits; entry `k-1` pairs with `start_steps[k-1]`. May be
    /// shorter than `start_steps` when detection failed mid-block.
    pub bits: Vec<u8>,
}

/// Receiver state threaded through the per-symbol steps of one block.
///
/// Estimates are appended in symbol order; detected bits may lag the starts
/// by one symbol because the detection window of symbol `k` ends at the
/// start estimate of symbol `k+1`.
#[derive(Debug, Clone, Default)]
pub struct SyncState {
    starts: Vec<i64>,
    bits: Vec<u8>,
    tt_prev_end: i64,
}

impl SyncState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Previous start estimate; the virtual anchor 0 before any symbol.
    pub fn prev_start(&self) -> i64 {
        self.starts.last().copied().unwrap_or(0)
    }

    pub fn starts(&self) -> &[i64] {
        &self.starts
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    /// End of the previous threshold-trigger window (0 before any symbol).
    pub fn tt_prev_end(&self) -> i64 {
        self.tt_prev_end
    }

    pub fn push_start(&mut self, start: i64) {
        debug_assert!(start >= self.prev_start());
        self.starts.push(start);
    }

    pub fn push_bit(&mut self, bit: u8) {
        debug_assert!(bit <= 1);
        self.bits.push(bit);
    }

    pub fn set_tt_end(&mut self, end: i64) {
        self.tt_prev_end = end;
    }

    /// Prior releases on the type-B channel under Framework 1 (`b ≡ 1`).
    fn b_releases_f1(&self) -> impl Iterator<Item = (i64, bool)> + '_ {
        self.starts.iter().map(|&s| (s, true))
    }
}

/// Inclusive sample window `[lo, hi]`, clamped to the trace.
fn clamp_window(lo: i64, hi: i64, trace_len: usize) -> Option<(i64, i64)> {
    let hi = hi.min(trace_len as i64 - 1);
    if lo > hi || lo < 0 {
        None
    } else {
        Some((lo, hi))
    }
}

/// Baseline hypothesis means over a window: noise floor plus the ISI of the
/// given prior releases, before any current-symbol contribution.
pub(crate) fn base_means<I>(window: (i64, i64), releases: I, cir: &SampledCir, z: f64) -> Vec<f64>
where
    I: IntoIterator<Item = (i64, bool)>,
{
    let (lo, hi) = window;
    let mut means = vec![z; (hi - lo + 1) as usize];
    for (start, on) in releases {
        if !on {
            continue;
        }
        for (i, m) in means.iter_mut().enumerate() {
            *m += cir.value_step(lo + i as i64 - start);
        }
    }
    means
}

fn hypothesis_set(state: &SyncState, grid: &GridParams) -> std::ops::RangeInclusive<i64> {
    let prev = state.prev_start();
    prev + grid.tmin_steps..=prev + grid.tmax_steps
}

fn observation_window(state: &SyncState, grid: &GridParams, trace_len: usize) -> Option<(i64, i64)> {
    let prev = state.prev_start();
    clamp_window(prev + grid.tmin_steps, prev + 2 * grid.tmin_steps, trace_len)
}

fn check_constraint(grid: &GridParams) -> Result<(), SyncError> {
    if grid.tmax_steps > 2 * grid.tmin_steps {
        Err(SyncError::ConstraintViolated)
    } else {
        Ok(())
    }
}

/// Poisson log-likelihood of the window counts for one hypothesis, with the
/// hypothesis-independent `ln(r!)` term dropped.
fn poisson_log_metric(counts: &[u32], window_lo: i64, base: &[f64], cir: &SampledCir, start: i64) -> f64 {
    let mut metric = 0.0;
    for (i, &b) in base.iter().enumerate() {
        let n = window_lo + i as i64;
        let mean = b + cir.value_step(n - start);
        metric += counts[n as usize] as f64 * mean.ln() - mean;
    }
    metric
}

/// Correlation of the window counts with the hypothesis means.
fn correlation_metric(counts: &[u32], window_lo: i64, base: &[f64], cir: &SampledCir, start: i64) -> f64 {
    let mut metric = 0.0;
    for (i, &b) in base.iter().enumerate() {
        let n = window_lo + i as i64;
        let mean = b + cir.value_step(n - start);
        metric += counts[n as usize] as f64 * mean;
    }
    metric
}

fn argmax_over_hypotheses<F: FnMut(i64) -> f64>(
    hypotheses: std::ops::RangeInclusive<i64>,
    mut metric: F,
) -> i64 {
    let mut best_t = *hypotheses.start();
    let mut best = f64::NEG_INFINITY;
    for t in hypotheses {
        let m = metric(t);
        if m > best {
            best = m;
            best_t = t;
        }
    }
    best_t
}

/// ML synchronization step: maximizes the Poisson log-likelihood of the
/// type-B counts over the hypothesis set. Ties break to the earliest time.
pub fn ml_sync_step(
    trace_b: &[u32],
    state: &SyncState,
    channel_b: &ChannelView,
    grid: &GridParams,
) -> Result<i64, SyncError> {
    check_constraint(grid)?;
    let window = observation_window(state, grid, trace_b.len()).ok_or(SyncError::TraceExhausted)?;
    let base = base_means(window, state.b_releases_f1(), channel_b.cir, channel_b.z);
    Ok(argmax_over_hypotheses(hypothesis_set(state, grid), |t| {
        poisson_log_metric(trace_b, window.0, &base, channel_b.cir, t)
    }))
}

/// Linear-filter synchronization step: correlates the type-B counts with the
/// hypothesis means over the same window as the ML step.
pub fn lf_sync_step(
    trace_b: &[u32],
    state: &SyncState,
    channel_b: &ChannelView,
    grid: &GridParams,
) -> Result<i64, SyncError> {
    check_constraint(grid)?;
    let window = observation_window(state, grid, trace_b.len()).ok_or(SyncError::TraceExhausted)?;
    let base = base_means(window, state.b_releases_f1(), channel_b.cir, channel_b.z);
    Ok(argmax_over_hypotheses(hypothesis_set(state, grid), |t| {
        correlation_metric(trace_b, window.0, &base, channel_b.cir, t)
    }))
}

/// Earliest position of the maximal count within an inclusive window.
pub(crate) fn argmax_count(counts: &[u32], window: (i64, i64)) -> i64 {
    let (lo, hi) = window;
    let mut best_n = lo;
    let mut best = 0u32;
    let mut first = true;
    for n in lo..=hi {
        let c = counts[n as usize];
        if first || c > best {
            best = c;
            best_n = n;
            first = false;
        }
    }
    best_n
}

/// Peak-observation synchronization step: the maximal type-B count in the
/// expected-peak region, shifted back by the CIR peak delay.
pub fn po_sync_step(
    trace_b: &[u32],
    state: &SyncState,
    peak_steps: i64,
    grid: &GridParams,
) -> Result<i64, SyncError> {
    let prev = state.prev_start();
    let region = clamp_window(
        prev + grid.tmin_steps + peak_steps,
        prev + grid.tmax_steps + peak_steps,
        trace_b.len(),
    )
    .ok_or(SyncError::TraceExhausted)?;
    Ok(argmax_count(trace_b, region) - peak_steps)
}

/// Threshold-trigger step: returns the next detection window, or `None` when
/// no count at or above the threshold remains before the trace end.
///
/// The start is the first sample strictly after the previous window end with
/// a count `>= xi`; the end is the later of the first subsequent sample with
/// a count `<= xi` (the trace end if none) and `start + dw_steps`.
pub fn tt_sync_step(trace_b: &[u32], state: &SyncState, params: &TtParams) -> Option<(i64, i64)> {
    let len = trace_b.len() as i64;
    let mut start = None;
    for n in (state.tt_prev_end() + 1).max(0)..len {
        if trace_b[n as usize] as f64 >= params.xi {
            start = Some(n);
            break;
        }
    }
    let start = start?;
    let mut down = len - 1;
    for n in start + 1..len {
        if trace_b[n as usize] as f64 <= params.xi {
            down = n;
            break;
        }
    }
    Some((start, down.max(start + params.dw_steps)))
}

/// ML bit detection over a detection window of the type-A trace.
///
/// `history` holds prior (estimated start, detected bit) pairs whose shifted
/// CIRs form the ISI part of the hypothesis means; `hyp_start` is the current
/// symbol's start estimate. Returns `None` when the window lies wholly
/// beyond the trace (detection failure). Equal likelihoods decide for 1.
pub fn ml_detect(
    trace_a: &[u32],
    window: (i64, i64),
    history: &[(i64, u8)],
    hyp_start: i64,
    channel_a: &ChannelView,
) -> Option<u8> {
    let window = clamp_window(window.0, window.1, trace_a.len())?;
    let base = base_means(
        window,
        history.iter().map(|&(s, w)| (s, w == 1)),
        channel_a.cir,
        channel_a.z,
    );
    let mut metric_one = 0.0;
    let mut metric_zero = 0.0;
    for (i, &b) in base.iter().enumerate() {
        let n = window.0 + i as i64;
        let r = trace_a[n as usize] as f64;
        let mean_one = b + channel_a.cir.value_step(n - hyp_start);
        metric_one += r * mean_one.ln() - mean_one;
        metric_zero += r * b.ln() - b;
    }
    Some(if metric_one >= metric_zero { 1 } else { 0 })
}
