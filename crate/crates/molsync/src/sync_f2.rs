//! Framework 2: joint symbol synchronization and data detection.
//!
//! Both molecule types carry timing information here: a one-bit releases
//! type-A molecules at the symbol start, a zero-bit releases type-B
//! molecules. Each per-symbol step therefore returns a (start, bit) pair.
//! The hypothesis set and observation window are the same as in Framework 1;
//! the joint ML and LF schemes additionally hypothesize the bit, while the
//! PO and TT schemes compare the two types through per-type normalized
//! counts, `r_x / c_x` with `c_x = z_x + max_t N_x·P_x(t)`.
//!
//! Tie-breaks follow the inequality directions of the decision rules: the
//! earliest time first, then the bit value 1.

use crate::channel::SampledCir;
use crate::sync_f1::{base_means, ChannelView, SyncError, SyncState, TtParams};
use crate::timeline::GridParams;

/// Per-type normalization constants for the joint LF, PO and TT schemes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormConstants {
    pub c_a: f64,
    pub c_b: f64,
}

impl NormConstants {
    /// `c_x = z_x + max_t N_x·P_x(t)` from the scaled, sampled CIRs.
    pub fn from_channels(cir_a: &SampledCir, z_a: f64, cir_b: &SampledCir, z_b: f64) -> Self {
        NormConstants {
            c_a: z_a + cir_a.peak_value(),
            c_b: z_b + cir_b.peak_value(),
        }
    }
}

/// Prior type-A releases under Framework 2: symbols detected as 1.
fn a_releases(state: &SyncState) -> impl Iterator<Item = (i64, bool)> + '_ {
    state.starts().iter().zip(state.bits()).map(|(&s, &w)| (s, w == 1))
}

/// Prior type-B releases under Framework 2: symbols detected as 0.
fn b_releases(state: &SyncState) -> impl Iterator<Item = (i64, bool)> + '_ {
    state.starts().iter().zip(state.bits()).map(|(&s, &w)| (s, w == 0))
}

fn clamp_window(lo: i64, hi: i64, trace_len: usize) -> Option<(i64, i64)> {
    let hi = hi.min(trace_len as i64 - 1);
    if lo > hi || lo < 0 {
        None
    } else {
        Some((lo, hi))
    }
}

fn check_constraint(grid: &GridParams) -> Result<(), SyncError> {
    if grid.tmax_steps > 2 * grid.tmin_steps {
        Err(SyncError::ConstraintViolated)
    } else {
        Ok(())
    }
}

fn read_count(counts: &[u32], n: i64) -> u32 {
    if n < 0 || n as usize >= counts.len() {
        0
    } else {
        counts[n as usize]
    }
}

/// Joint ML step: maximizes the summed type-A and type-B Poisson
/// log-likelihoods over all (start, bit) hypotheses.
pub fn joint_ml_step(
    trace_a: &[u32],
    trace_b: &[u32],
    state: &SyncState,
    channel_a: &ChannelView,
    channel_b: &ChannelView,
    grid: &GridParams,
) -> Result<(i64, u8), SyncError> {
    check_constraint(grid)?;
    let prev = state.prev_start();
    let trace_len = trace_a.len().min(trace_b.len());
    let window = clamp_window(prev + grid.tmin_steps, prev + 2 * grid.tmin_steps, trace_len)
        .ok_or(SyncError::TraceExhausted)?;
    let base_a = base_means(window, a_releases(state), channel_a.cir, channel_a.z);
    let base_b = base_means(window, b_releases(state), channel_b.cir, channel_b.z);

    let mut best = f64::NEG_INFINITY;
    let mut best_pair = (prev + grid.tmin_steps, 1u8);
    for t in prev + grid.tmin_steps..=prev + grid.tmax_steps {
        for w in [1u8, 0u8] {
            let mut metric = 0.0;
            for (i, (&ba, &bb)) in base_a.iter().zip(&base_b).enumerate() {
                let n = window.0 + i as i64;
                let hyp = channel_a.cir.value_step(n - t);
                let mean_a = if w == 1 { ba + hyp } else { ba };
                let hyp_b = channel_b.cir.value_step(n - t);
                let mean_b = if w == 0 { bb + hyp_b } else { bb };
                metric += trace_a[n as usize] as f64 * mean_a.ln() - mean_a
                    + trace_b[n as usize] as f64 * mean_b.ln() - mean_b;
            }
            if metric > best {
                best = metric;
                best_pair = (t, w);
            }
        }
    }
    Ok(best_pair)
}

/// Joint LF step: each type's counts are correlated with that type's own
/// release hypothesis and normalized by `c_x²`; the start maximizes the
/// pointwise maximum of the two filtered signals, the bit compares them.
pub fn joint_lf_step(
    trace_a: &[u32],
    trace_b: &[u32],
    state: &SyncState,
    channel_a: &ChannelView,
    channel_b: &ChannelView,
    norms: &NormConstants,
    grid: &GridParams,
) -> Result<(i64, u8), SyncError> {
    check_constraint(grid)?;
    let prev = state.prev_start();
    let trace_len = trace_a.len().min(trace_b.len());
    let window = clamp_window(prev + grid.tmin_steps, prev + 2 * grid.tmin_steps, trace_len)
        .ok_or(SyncError::TraceExhausted)?;
    let base_a = base_means(window, a_releases(state), channel_a.cir, channel_a.z);
    let base_b = base_means(window, b_releases(state), channel_b.cir, channel_b.z);

    let filtered = |t: i64| -> (f64, f64) {
        let mut ra = 0.0;
        let mut rb = 0.0;
        for (i, (&ba, &bb)) in base_a.iter().zip(&base_b).enumerate() {
            let n = window.0 + i as i64;
            ra += trace_a[n as usize] as f64 * (ba + channel_a.cir.value_step(n - t));
            rb += trace_b[n as usize] as f64 * (bb + channel_b.cir.value_step(n - t));
        }
        (ra / (norms.c_a * norms.c_a), rb / (norms.c_b * norms.c_b))
    };

    let mut best = f64::NEG_INFINITY;
    let mut best_t = prev + grid.tmin_steps;
    let mut best_pair = (0.0, 0.0);
    for t in prev + grid.tmin_steps..=prev + grid.tmax_steps {
        let (ra, rb) = filtered(t);
        let m = ra.max(rb);
        if m > best {
            best = m;
            best_t = t;
            best_pair = (ra, rb);
        }
    }
    let bit = if best_pair.0 >= best_pair.1 { 1 } else { 0 };
    Ok((best_t, bit))
}

/// Joint PO step: compares the normalized peak counts of the two types over
/// the expected-peak region; the winning type's peak position minus its own
/// peak delay is the start estimate.
pub fn joint_po_step(
    trace_a: &[u32],
    trace_b: &[u32],
    state: &SyncState,
    norms: &NormConstants,
    peak_a_steps: i64,
    peak_b_steps: i64,
    grid: &GridParams,
) -> Result<(i64, u8), SyncError> {
    let prev = state.prev_start();
    let trace_len = trace_a.len().min(trace_b.len());
    let region = clamp_window(
        prev + grid.tmin_steps + peak_a_steps.min(peak_b_steps),
        prev + grid.tmax_steps + peak_a_steps.max(peak_b_steps),
        trace_len,
    )
    .ok_or(SyncError::TraceExhausted)?;
    let pos_a = crate::sync_f1::argmax_count(trace_a, region);
    let pos_b = crate::sync_f1::argmax_count(trace_b, region);
    let max_a = trace_a[pos_a as usize] as f64 / norms.c_a;
    let max_b = trace_b[pos_b as usize] as f64 / norms.c_b;
    let start = if max_a >= max_b {
        pos_a - peak_a_steps
    } else {
        pos_b - peak_b_steps
    };
    let at_a = read_count(trace_a, start + peak_a_steps) as f64 / norms.c_a;
    let at_b = read_count(trace_b, start + peak_b_steps) as f64 / norms.c_b;
    let bit = if at_a >= at_b { 1 } else { 0 };
    Ok((start, bit))
}

/// Joint TT step: a new symbol starts at the first sample, more than the
/// guard time after the previous start, where either normalized count
/// reaches the threshold; the bit compares the normalized counts there.
pub fn joint_tt_step(
    trace_a: &[u32],
    trace_b: &[u32],
    state: &SyncState,
    norms: &NormConstants,
    params: &TtParams,
) -> Option<(i64, u8)> {
    let len = trace_a.len().min(trace_b.len()) as i64;
    let guard = state.prev_start() + params.dw_steps;
    for n in (guard + 1).max(0)..len {
        let na = trace_a[n as usize] as f64 / norms.c_a;
        let nb = trace_b[n as usize] as f64 / norms.c_b;
        if na.max(nb) >= params.xi {
            return Some((n, if na >= nb { 1 } else { 0 }));
        }
    }
    None
}
