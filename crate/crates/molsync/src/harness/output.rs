//! Result serialization: `summary.json`, `per_symbol.csv`, `histogram.csv`
//! and `sweep.csv`.
//!
//! Output bytes are a pure function of the aggregate report, so identical
//! (config, seed) runs produce identical files regardless of thread count.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use super::engine::{ExperimentResult, SweepResult};
use super::HarnessError;

#[derive(Serialize)]
struct SummaryMetrics {
    ber: f64,
    ber_stderr: f64,
    mae_overall: f64,
    blocks: usize,
}

#[derive(Serialize)]
struct SummaryDoc<'a> {
    resolved: &'a super::ResolvedConfig,
    metrics: SummaryMetrics,
}

/// Writes `summary.json`, `per_symbol.csv` and `histogram.csv` into `dir`.
pub fn write_run_outputs(dir: &Path, result: &ExperimentResult) -> Result<(), HarnessError> {
    std::fs::create_dir_all(dir)?;

    let summary = SummaryDoc {
        resolved: &result.resolved,
        metrics: SummaryMetrics {
            ber: result.report.ber,
            ber_stderr: result.report.ber_stderr,
            mae_overall: result.report.mae_overall,
            blocks: result.report.blocks,
        },
    };
    let mut f = BufWriter::new(File::create(dir.join("summary.json"))?);
    f.write_all(serde_json::to_string_pretty(&summary)?.as_bytes())?;
    f.write_all(b"\n")?;
    f.flush()?;

    let mut f = BufWriter::new(File::create(dir.join("per_symbol.csv"))?);
    writeln!(f, "k,mae,abs_mean_err,p_insertion,p_deletion,n_included")?;
    for s in &result.report.per_symbol {
        writeln!(
            f,
            "{},{},{},{},{},{}",
            s.k, s.mae, s.abs_mean_err, s.p_insertion, s.p_deletion, s.n_included
        )?;
    }
    f.flush()?;

    let mut f = BufWriter::new(File::create(dir.join("histogram.csv"))?);
    writeln!(f, "bin_left,mass")?;
    for &(edge, mass) in &result.report.histogram {
        writeln!(f, "{edge},{mass}")?;
    }
    f.flush()?;
    Ok(())
}

/// Writes `sweep.csv`; infeasible points are skipped.
pub fn write_sweep_csv(dir: &Path, sweep: &SweepResult) -> Result<(), HarnessError> {
    std::fs::create_dir_all(dir)?;
    let mut f = BufWriter::new(File::create(dir.join("sweep.csv"))?);
    writeln!(f, "param_value,ber,ber_stderr,mae")?;
    for point in &sweep.points {
        if let Some(result) = &point.result {
            writeln!(
                f,
                "{},{},{},{}",
                point.value, result.report.ber, result.report.ber_stderr, result.report.mae_overall
            )?;
        }
    }
    f.flush()?;
    Ok(())
}
