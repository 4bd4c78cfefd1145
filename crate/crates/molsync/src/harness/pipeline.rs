//! Per-block simulation pipeline: timeline → observations → sync/detect →
//! block report.

use super::ResolvedExperiment;
use crate::channel::expected_signal_steps;
use crate::coding::{marker_decode, marker_encode};
use crate::metrics::{block_report, BlockReport};
use crate::seed;
use crate::sync_f1::{self, ChannelView, Scheme, SyncResult, SyncState};
use crate::sync_f2;
use crate::timeline::{
    emission_schedule, sample_bits, sample_observations, sample_start_steps, Framework,
    ObservationTrace, SymbolTimeline,
};

/// Extra threshold-trigger symbols collected past the block length: one for
/// the insertion lookahead of the last symbol, a few more so the marker
/// decoder sees the full inserted stream.
const TT_EXTRA_SYMBOLS: usize = 4;

/// Simulates one block on its own seeded substream.
///
/// Draw order within the block is fixed: interval gaps, then data bits, then
/// type-A counts in time order, then type-B counts.
pub(crate) fn simulate_block(exp: &ResolvedExperiment, purpose: u64, block: u64) -> BlockReport {
    let mut rng = seed::block_rng(exp.config.seed, purpose, block);
    let dt = exp.config.timeline.sample_step;
    let k_max = exp.config.timeline.block_len;

    let start_steps = sample_start_steps(&exp.grid, k_max, &mut rng);
    let (bits, data_bits) = match &exp.marker {
        None => (sample_bits(k_max, &mut rng), None),
        Some(mc) => {
            let n_data = k_max / mc.block_len() * mc.data_len;
            let data = sample_bits(n_data, &mut rng);
            let encoded = marker_encode(&data, mc).expect("validated data length");
            (encoded, Some(data))
        }
    };
    let mut timeline = SymbolTimeline {
        dt,
        start_steps,
        bits,
        a: Vec::new(),
        b: Vec::new(),
    };
    emission_schedule(&mut timeline, exp.config.framework);

    let cir_len = exp.scir_a.len().max(exp.scir_b.len()) as i64;
    let n_samples =
        (timeline.start_steps.last().unwrap() + exp.grid.tmax_steps + cir_len) as usize + 1;
    let releases_a: Vec<(i64, bool)> = timeline
        .start_steps
        .iter()
        .zip(&timeline.a)
        .map(|(&s, &on)| (s, on == 1))
        .collect();
    let releases_b: Vec<(i64, bool)> = timeline
        .start_steps
        .iter()
        .zip(&timeline.b)
        .map(|(&s, &on)| (s, on == 1))
        .collect();
    let expected_a = crate::channel::ExpectedSignal {
        dt,
        means: expected_signal_steps(&exp.scir_a, &releases_a, exp.config.channel.z_a, n_samples),
    };
    let expected_b = crate::channel::ExpectedSignal {
        dt,
        means: expected_signal_steps(&exp.scir_b, &releases_b, exp.config.channel.z_b, n_samples),
    };
    let trace = sample_observations(&expected_a, &expected_b, &mut rng).expect("shared grid");

    let run = run_block(exp, &timeline, &trace);

    match data_bits {
        None => block_report(
            &run,
            &timeline,
            exp.config.timeline.mean_symbol_duration,
            &timeline.bits,
            &run.bits,
        ),
        Some(data) => {
            let mc = exp.marker.as_ref().unwrap();
            let decoded = marker_decode(&run.bits, mc).unwrap_or_default();
            block_report(
                &run,
                &timeline,
                exp.config.timeline.mean_symbol_duration,
                &data,
                &decoded,
            )
        }
    }
}

/// Runs the configured synchronization/detection pipeline over one trace.
pub(crate) fn run_block(
    exp: &ResolvedExperiment,
    timeline: &SymbolTimeline,
    trace: &ObservationTrace,
) -> SyncResult {
    let view_a = ChannelView {
        cir: &exp.scir_a,
        z: exp.config.channel.z_a,
    };
    let view_b = ChannelView {
        cir: &exp.scir_b,
        z: exp.config.channel.z_b,
    };
    match (exp.config.framework, exp.config.scheme) {
        (Framework::F1, Scheme::Ml | Scheme::Lf | Scheme::Po) => {
            run_f1_estimating(exp, trace, &view_a, &view_b)
        }
        (Framework::F1, Scheme::Tt) => run_f1_tt(exp, trace, &view_a),
        (Framework::F1, Scheme::Perfect) => run_f1_perfect(exp, timeline, trace, &view_a),
        (Framework::F2, Scheme::Ml | Scheme::Lf | Scheme::Po) => {
            run_f2_estimating(exp, trace, &view_a, &view_b)
        }
        (Framework::F2, Scheme::Tt) => run_f2_tt(exp, trace),
        (Framework::F2, Scheme::Perfect) => run_f2_perfect(exp, timeline, trace, &view_a, &view_b),
    }
}

/// Framework 1 with an explicit start estimator (ML, LF or PO).
///
/// Synchronization runs one symbol ahead of detection: the detection window
/// of bit `k` is `[t̂_s[k], t̂_s[k+1]]`, so bit `k` is decided right after
/// start `k+1` is estimated. The final bit falls back to a window one mean
/// symbol duration long.
fn run_f1_estimating(
    exp: &ResolvedExperiment,
    trace: &ObservationTrace,
    view_a: &ChannelView,
    view_b: &ChannelView,
) -> SyncResult {
    let k_max = exp.config.timeline.block_len;
    let mut state = SyncState::new();
    let mut run = SyncResult::default();
    for _ in 1..=k_max {
        let est = match exp.config.scheme {
            Scheme::Ml => sync_f1::ml_sync_step(&trace.counts_b, &state, view_b, &exp.grid),
            Scheme::Lf => sync_f1::lf_sync_step(&trace.counts_b, &state, view_b, &exp.grid),
            Scheme::Po => {
                sync_f1::po_sync_step(&trace.counts_b, &state, exp.derived.peak_step_b, &exp.grid)
            }
            _ => unreachable!(),
        };
        let est = match est {
            Ok(t) => t,
            Err(_) => return run, // block truncated from this symbol on
        };
        if let Some(&prev) = run.start_steps.last() {
            // Detect the previous symbol's bit now that its window closed.
            let n_hist = run.bits.len();
            let history: Vec<(i64, u8)> = run.start_steps[..n_hist]
                .iter()
                .zip(&run.bits)
                .map(|(&s, &w)| (s, w))
                .collect();
            let window = (prev, est);
            match sync_f1::ml_detect(&trace.counts_a, window, &history, prev, view_a) {
                Some(bit) => {
                    run.bits.push(bit);
                    run.windows.push(window);
                }
                None => {
                    state.push_start(est);
                    run.start_steps.push(est);
                    return run;
                }
            }
        }
        state.push_start(est);
        run.start_steps.push(est);
    }
    // Last symbol: no next start exists, close the window after T̄.
    if let Some(&last) = run.start_steps.last() {
        let window = (last, last + exp.grid.tbar_steps);
        let history: Vec<(i64, u8)> = run.start_steps[..run.bits.len()]
            .iter()
            .zip(&run.bits)
            .map(|(&s, &w)| (s, w))
            .collect();
        if let Some(bit) = sync_f1::ml_detect(&trace.counts_a, window, &history, last, view_a) {
            run.bits.push(bit);
            run.windows.push(window);
        }
    }
    run
}

/// Framework 1 threshold trigger: windows are self-contained, so each bit is
/// detected as soon as its window closes. Runs until the trace is exhausted
/// or enough symbols past the block length were collected.
fn run_f1_tt(
    exp: &ResolvedExperiment,
    trace: &ObservationTrace,
    view_a: &ChannelView,
) -> SyncResult {
    let params = exp.tt.expect("validated TT params");
    let cap = exp.config.timeline.block_len + TT_EXTRA_SYMBOLS;
    let mut state = SyncState::new();
    let mut run = SyncResult::default();
    while run.start_steps.len() < cap {
        let Some((start, end)) = sync_f1::tt_sync_step(&trace.counts_b, &state, &params) else {
            break;
        };
        let history: Vec<(i64, u8)> = run
            .start_steps
            .iter()
            .zip(&run.bits)
            .map(|(&s, &w)| (s, w))
            .collect();
        let bit = sync_f1::ml_detect(&trace.counts_a, (start, end), &history, start, view_a)
            .unwrap_or(1);
        state.push_start(start);
        state.set_tt_end(end);
        run.start_steps.push(start);
        run.windows.push((start, end));
        run.bits.push(bit);
    }
    run
}

/// Framework 1 genie benchmark: true starts feed straight into detection.
fn run_f1_perfect(
    exp: &ResolvedExperiment,
    timeline: &SymbolTimeline,
    trace: &ObservationTrace,
    view_a: &ChannelView,
) -> SyncResult {
    let starts = &timeline.start_steps;
    let mut run = SyncResult {
        start_steps: starts.clone(),
        ..SyncResult::default()
    };
    for k in 0..starts.len() {
        let window = match starts.get(k + 1) {
            Some(&next) => (starts[k], next),
            None => (starts[k], starts[k] + exp.grid.tbar_steps),
        };
        let history: Vec<(i64, u8)> = starts[..run.bits.len()]
            .iter()
            .zip(&run.bits)
            .map(|(&s, &w)| (s, w))
            .collect();
        match sync_f1::ml_detect(&trace.counts_a, window, &history, starts[k], view_a) {
            Some(bit) => {
                run.bits.push(bit);
                run.windows.push(window);
            }
            None => break,
        }
    }
    run
}

/// Framework 2 joint ML, LF or PO: every step yields a (start, bit) pair.
fn run_f2_estimating(
    exp: &ResolvedExperiment,
    trace: &ObservationTrace,
    view_a: &ChannelView,
    view_b: &ChannelView,
) -> SyncResult {
    let norms = sync_f2::NormConstants {
        c_a: exp.derived.c_a,
        c_b: exp.derived.c_b,
    };
    let k_max = exp.config.timeline.block_len;
    let mut state = SyncState::new();
    let mut run = SyncResult::default();
    for _ in 1..=k_max {
        let prev = state.prev_start();
        let step = match exp.config.scheme {
            Scheme::Ml => sync_f2::joint_ml_step(
                &trace.counts_a,
                &trace.counts_b,
                &state,
                view_a,
                view_b,
                &exp.grid,
            ),
            Scheme::Lf => sync_f2::joint_lf_step(
                &trace.counts_a,
                &trace.counts_b,
                &state,
                view_a,
                view_b,
                &norms,
                &exp.grid,
            ),
            Scheme::Po => sync_f2::joint_po_step(
                &trace.counts_a,
                &trace.counts_b,
                &state,
                &norms,
                exp.derived.peak_step_a,
                exp.derived.peak_step_b,
                &exp.grid,
            ),
            _ => unreachable!(),
        };
        let (start, bit) = match step {
            Ok(pair) => pair,
            Err(_) => break,
        };
        let window = match exp.config.scheme {
            Scheme::Po => (
                prev + exp.grid.tmin_steps + exp.derived.peak_step_a.min(exp.derived.peak_step_b),
                prev + exp.grid.tmax_steps + exp.derived.peak_step_a.max(exp.derived.peak_step_b),
            ),
            _ => (prev + exp.grid.tmin_steps, prev + 2 * exp.grid.tmin_steps),
        };
        state.push_start(start);
        state.push_bit(bit);
        run.start_steps.push(start);
        run.bits.push(bit);
        run.windows.push(window);
    }
    run
}

/// Framework 2 threshold trigger.
fn run_f2_tt(exp: &ResolvedExperiment, trace: &ObservationTrace) -> SyncResult {
    let params = exp.tt.expect("validated TT params");
    let norms = sync_f2::NormConstants {
        c_a: exp.derived.c_a,
        c_b: exp.derived.c_b,
    };
    let cap = exp.config.timeline.block_len + TT_EXTRA_SYMBOLS;
    let mut state = SyncState::new();
    let mut run = SyncResult::default();
    while run.start_steps.len() < cap {
        let Some((start, bit)) =
            sync_f2::joint_tt_step(&trace.counts_a, &trace.counts_b, &state, &norms, &params)
        else {
            break;
        };
        state.push_start(start);
        state.push_bit(bit);
        run.start_steps.push(start);
        run.bits.push(bit);
        run.windows.push((start, start));
    }
    run
}

/// Framework 2 genie benchmark: the joint ML metric evaluated at the true
/// start, maximized over the bit alone.
fn run_f2_perfect(
    exp: &ResolvedExperiment,
    timeline: &SymbolTimeline,
    trace: &ObservationTrace,
    view_a: &ChannelView,
    view_b: &ChannelView,
) -> SyncResult {
    let starts = &timeline.start_steps;
    let mut run = SyncResult {
        start_steps: starts.clone(),
        ..SyncResult::default()
    };
    let trace_len = trace.counts_a.len().min(trace.counts_b.len()) as i64;
    let mut prev = 0i64;
    for &start in starts {
        let lo = prev + exp.grid.tmin_steps;
        let hi = (prev + 2 * exp.grid.tmin_steps).min(trace_len - 1);
        if lo > hi {
            break;
        }
        let history: Vec<(i64, u8)> = starts[..run.bits.len()]
            .iter()
            .zip(&run.bits)
            .map(|(&s, &w)| (s, w))
            .collect();
        let base_a = sync_f1::base_means(
            (lo, hi),
            history.iter().map(|&(s, w)| (s, w == 1)),
            view_a.cir,
            view_a.z,
        );
        let base_b = sync_f1::base_means(
            (lo, hi),
            history.iter().map(|&(s, w)| (s, w == 0)),
            view_b.cir,
            view_b.z,
        );
        let mut best = f64::NEG_INFINITY;
        let mut best_bit = 1u8;
        for w in [1u8, 0u8] {
            let mut metric = 0.0;
            for (i, (&ba, &bb)) in base_a.iter().zip(&base_b).enumerate() {
                let n = lo + i as i64;
                let mean_a = if w == 1 {
                    ba + view_a.cir.value_step(n - start)
                } else {
                    ba
                };
                let mean_b = if w == 0 {
                    bb + view_b.cir.value_step(n - start)
                } else {
                    bb
                };
                metric += trace.counts_a[n as usize] as f64 * mean_a.ln() - mean_a
                    + trace.counts_b[n as usize] as f64 * mean_b.ln() - mean_b;
            }
            if metric > best {
                best = metric;
                best_bit = w;
            }
        }
        run.bits.push(best_bit);
        run.windows.push((lo, hi));
        prev = start;
    }
    run
}
