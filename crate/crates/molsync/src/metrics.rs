//! Evaluation metrics: normalized synchronization error, per-symbol error
//! statistics, insertion/deletion probabilities, error histograms and block
//! BER.

use serde::Serialize;
use thiserror::Error;

use crate::coding::{classify_sync_errors, SyncErrorFlag};
use crate::sync_f1::SyncResult;
use crate::timeline::SymbolTimeline;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("cannot aggregate an empty list of block reports")]
    EmptyAggregation,
}

/// Per-block evaluation unit.
#[derive(Debug, Clone)]
pub struct BlockReport {
    /// Normalized error `(t̂_s[k] - t_s[k]) / T̄` per true symbol; `None`
    /// where the scheme produced no estimate.
    pub norm_errors: Vec<Option<f64>>,
    /// Insertion/deletion classification per true symbol.
    pub flags: Vec<SyncErrorFlag>,
    /// Positional bit error rate of this block.
    pub ber: f64,
    /// Bits the BER was computed against (data bits for coded runs).
    pub truth_bits: Vec<u8>,
    /// Bits the receiver delivered (decoded data bits for coded runs).
    pub detected_bits: Vec<u8>,
}

/// Positional bit comparison: missing decisions count as errors, surplus
/// decisions are discarded.
pub fn positional_ber(truth: &[u8], detected: &[u8]) -> f64 {
    if truth.is_empty() {
        return 0.0;
    }
    let errors = truth
        .iter()
        .enumerate()
        .filter(|&(k, &w)| detected.get(k).map(|&d| d != w).unwrap_or(true))
        .count();
    errors as f64 / truth.len() as f64
}

/// Builds the per-block report from a sync/detect run and the ground truth.
///
/// `ber_truth`/`ber_detected` are compared positionally; for uncoded runs
/// these are the timeline bits and the detected bits, for coded runs the
/// original data bits and the marker-decoded bits.
pub fn block_report(
    run: &SyncResult,
    timeline: &SymbolTimeline,
    mean_symbol_duration: f64,
    ber_truth: &[u8],
    ber_detected: &[u8],
) -> BlockReport {
    let k_max = timeline.start_steps.len();
    let mut norm_errors = Vec::with_capacity(k_max);
    for k in 0..k_max {
        norm_errors.push(run.start_steps.get(k).map(|&est| {
            (est - timeline.start_steps[k]) as f64 * timeline.dt / mean_symbol_duration
        }));
    }
    let record = classify_sync_errors(&run.start_steps, &timeline.start_steps);
    BlockReport {
        norm_errors,
        flags: record.flags,
        ber: positional_ber(ber_truth, ber_detected),
        truth_bits: ber_truth.to_vec(),
        detected_bits: ber_detected.to_vec(),
    }
}

/// Per-symbol-index aggregate statistics.
#[derive(Debug, Clone, Serialize)]
pub struct PerSymbolStats {
    /// Symbol index `k`, 1-based.
    pub k: usize,
    /// Mean absolute normalized error over blocks with an estimate at `k`.
    pub mae: f64,
    /// Standard error of the MAE.
    pub mae_stderr: f64,
    /// Absolute value of the mean normalized error.
    pub abs_mean_err: f64,
    /// Fraction of blocks with an insertion flagged at `k`.
    pub p_insertion: f64,
    /// Fraction of blocks with a deletion flagged at `k`.
    pub p_deletion: f64,
    /// Number of blocks that produced an estimate at `k`.
    pub n_included: usize,
}

/// Aggregate over all blocks of one experiment.
#[derive(Debug, Clone, Serialize)]
pub struct AggregateReport {
    pub per_symbol: Vec<PerSymbolStats>,
    /// Histogram of all normalized errors: (bin left edge, probability mass),
    /// sorted by edge; masses sum to 1 when any error was recorded.
    pub histogram: Vec<(f64, f64)>,
    pub histogram_bin_width: f64,
    /// Mean block BER and its standard error.
    pub ber: f64,
    pub ber_stderr: f64,
    /// Mean absolute normalized error over all (block, symbol) estimates.
    pub mae_overall: f64,
    pub blocks: usize,
}

impl AggregateReport {
    /// Left edge of the most massive histogram bin (earliest on ties).
    pub fn histogram_mode(&self) -> Option<f64> {
        let mut best: Option<(f64, f64)> = None;
        for &(edge, mass) in &self.histogram {
            if best.map(|(_, m)| mass > m).unwrap_or(true) {
                best = Some((edge, mass));
            }
        }
        best.map(|(edge, _)| edge)
    }
}

/// Folds block reports into aggregate statistics.
///
/// The fold visits blocks in the order given (the harness passes them in
/// block-index order), so results do not depend on worker scheduling.
/// Per-symbol error statistics include only blocks that produced an estimate
/// for that symbol; BER includes every block.
pub fn aggregate(reports: &[BlockReport], bin_width: f64) -> Result<AggregateReport, MetricsError> {
    if reports.is_empty() {
        return Err(MetricsError::EmptyAggregation);
    }
    assert!(bin_width > 0.0, "histogram bin width must be positive");
    let k_max = reports.iter().map(|r| r.norm_errors.len()).max().unwrap_or(0);

    let mut sum_abs = vec![0.0f64; k_max];
    let mut sum_sq_abs = vec![0.0f64; k_max];
    let mut sum = vec![0.0f64; k_max];
    let mut included = vec![0usize; k_max];
    let mut insertions = vec![0usize; k_max];
    let mut deletions = vec![0usize; k_max];
    let mut bins = std::collections::BTreeMap::<i64, usize>::new();
    let mut n_errors = 0usize;
    let mut ber_sum = 0.0f64;
    let mut ber_sq_sum = 0.0f64;

    for report in reports {
        ber_sum += report.ber;
        ber_sq_sum += report.ber * report.ber;
        for (k, err) in report.norm_errors.iter().enumerate() {
            if let Some(e) = err {
                sum_abs[k] += e.abs();
                sum_sq_abs[k] += e * e;
                sum[k] += e;
                included[k] += 1;
                *bins.entry((e / bin_width).floor() as i64).or_insert(0) += 1;
                n_errors += 1;
            }
        }
        for (k, flag) in report.flags.iter().enumerate() {
            match flag {
                SyncErrorFlag::Insertion => insertions[k] += 1,
                SyncErrorFlag::Deletion => deletions[k] += 1,
                SyncErrorFlag::None => {}
            }
        }
    }

    let n_blocks = reports.len();
    let per_symbol = (0..k_max)
        .map(|k| {
            let n = included[k];
            let mae = if n > 0 { sum_abs[k] / n as f64 } else { f64::NAN };
            let mae_stderr = if n > 1 {
                let var = (sum_sq_abs[k] - sum_abs[k] * sum_abs[k] / n as f64) / (n as f64 - 1.0);
                (var.max(0.0) / n as f64).sqrt()
            } else {
                f64::NAN
            };
            let abs_mean_err = if n > 0 { (sum[k] / n as f64).abs() } else { f64::NAN };
            PerSymbolStats {
                k: k + 1,
                mae,
                mae_stderr,
                abs_mean_err,
                p_insertion: insertions[k] as f64 / n_blocks as f64,
                p_deletion: deletions[k] as f64 / n_blocks as f64,
                n_included: n,
            }
        })
        .collect();

    let ber = ber_sum / n_blocks as f64;
    let ber_stderr = if n_blocks > 1 {
        let var = (ber_sq_sum - ber_sum * ber_sum / n_blocks as f64) / (n_blocks as f64 - 1.0);
        (var.max(0.0) / n_blocks as f64).sqrt()
    } else {
        f64::NAN
    };
    let mae_overall = if n_errors > 0 {
        sum_abs.iter().sum::<f64>() / n_errors as f64
    } else {
        f64::NAN
    };
    let histogram = bins
        .into_iter()
        .map(|(idx, count)| (idx as f64 * bin_width, count as f64 / n_errors as f64))
        .collect();

    Ok(AggregateReport {
        per_symbol,
        histogram,
        histogram_bin_width: bin_width,
        ber,
        ber_stderr,
        mae_overall,
        blocks: n_blocks,
    })
}
