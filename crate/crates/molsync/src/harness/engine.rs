//! Experiment execution: parallel block simulation, threshold optimization
//! and parameter sweeps.

use std::time::{Duration, Instant};

use serde::Serialize;

use super::pipeline::simulate_block;
use super::{resolve, ExperimentConfig, HarnessError, ResolvedConfig, ResolvedExperiment};
use crate::metrics::{aggregate, AggregateReport, BlockReport};
use crate::seed::{self, PURPOSE_CALIBRATION, PURPOSE_EVAL, PURPOSE_SWEEP};

/// Outcome of one experiment.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentResult {
    pub resolved: ResolvedConfig,
    pub report: AggregateReport,
    #[serde(skip)]
    pub wall_time: Duration,
}

fn run_blocks(exp: &ResolvedExperiment, purpose: u64, threads: usize) -> Vec<BlockReport> {
    let blocks = exp.config.blocks;
    let workers = threads.max(1).min(blocks as usize);
    if workers <= 1 {
        return (0..blocks).map(|b| simulate_block(exp, purpose, b)).collect();
    }
    // Contiguous chunks, joined in worker order, keep the fold in block order
    // no matter how the threads are scheduled.
    let chunk = blocks.div_ceil(workers as u64);
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..workers as u64)
            .map(|w| {
                let lo = w * chunk;
                let hi = ((w + 1) * chunk).min(blocks);
                scope.spawn(move || {
                    (lo..hi)
                        .map(|b| simulate_block(exp, purpose, b))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("worker panicked"))
            .collect()
    })
}

fn run_resolved(
    exp: &ResolvedExperiment,
    purpose: u64,
    threads: usize,
) -> Result<ExperimentResult, HarnessError> {
    let started = Instant::now();
    let reports = run_blocks(exp, purpose, threads);
    let report = aggregate(&reports, exp.config.histogram_bin)?;
    Ok(ExperimentResult {
        resolved: exp.resolved_config(),
        report,
        wall_time: started.elapsed(),
    })
}

/// Runs a full experiment: every block on its own substream, aggregated in
/// block-index order.
pub fn run_experiment(
    config: &ExperimentConfig,
    threads: usize,
) -> Result<ExperimentResult, HarnessError> {
    let exp = resolve(config)?;
    run_resolved(&exp, PURPOSE_EVAL, threads)
}

/// Runs the evaluation blocks and returns the raw per-block reports, in
/// block-index order.
pub fn block_reports(
    config: &ExperimentConfig,
    threads: usize,
) -> Result<Vec<BlockReport>, HarnessError> {
    let exp = resolve(config)?;
    Ok(run_blocks(&exp, PURPOSE_EVAL, threads))
}

/// Runs an experiment that must have the marker code enabled.
pub fn run_coded_experiment(
    config: &ExperimentConfig,
    threads: usize,
) -> Result<ExperimentResult, HarnessError> {
    if config.coding.is_none() {
        return Err(HarnessError::Validation(
            "run_coded_experiment needs a coding section".into(),
        ));
    }
    run_experiment(config, threads)
}

/// Objective minimized by the threshold optimization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    Ber,
    Mae,
}

impl std::str::FromStr for Objective {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ber" => Ok(Objective::Ber),
            "mae" => Ok(Objective::Mae),
            other => Err(format!("unknown objective '{other}', expected ber or mae")),
        }
    }
}

/// Result of a threshold optimization.
#[derive(Debug, Clone, Serialize)]
pub struct OptimizeOutcome {
    pub best_xi: f64,
    pub objective: Objective,
    /// (threshold, objective value) per grid point, ascending by threshold.
    pub points: Vec<(f64, f64)>,
}

/// Smallest grid value attaining the minimum objective.
fn select_best(points: &[(f64, f64)]) -> f64 {
    let mut best = points[0];
    for &(xi, obj) in &points[1..] {
        if obj < best.1 {
            best = (xi, obj);
        }
    }
    best.0
}

/// Picks the threshold minimizing the objective over a grid.
///
/// Each grid point runs a calibration experiment on a seed namespace
/// disjoint from evaluation, so the chosen threshold is not fitted to the
/// noise later used for reporting. Ties resolve to the smallest threshold.
pub fn optimize_threshold(
    config: &ExperimentConfig,
    grid: &[f64],
    objective: Objective,
    threads: usize,
) -> Result<OptimizeOutcome, HarnessError> {
    if !matches!(config.scheme, crate::sync_f1::Scheme::Tt) {
        return Err(HarnessError::Validation(
            "threshold optimization applies to the TT scheme only".into(),
        ));
    }
    if grid.is_empty() {
        return Err(HarnessError::Validation("threshold grid must be non-empty".into()));
    }
    let mut sorted = grid.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut points = Vec::with_capacity(sorted.len());
    for xi in sorted {
        let mut cfg = config.clone();
        let mut tt = cfg.tt.unwrap_or(super::TtSection { xi: None, min_window: None });
        tt.xi = Some(xi);
        cfg.tt = Some(tt);
        let exp = resolve(&cfg)?;
        let result = run_resolved(&exp, PURPOSE_CALIBRATION, threads)?;
        let value = match objective {
            Objective::Ber => result.report.ber,
            Objective::Mae => result.report.mae_overall,
        };
        points.push((xi, value));
    }
    Ok(OptimizeOutcome {
        best_xi: select_best(&points),
        objective,
        points,
    })
}

/// Sweepable experiment parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    /// Both target SNRs together.
    Snr,
    SnrA,
    SnrB,
    Alpha,
    TSymb,
    Beta,
    Xi,
}

impl std::str::FromStr for SweepParam {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "snr" => Ok(SweepParam::Snr),
            "snr_a" => Ok(SweepParam::SnrA),
            "snr_b" => Ok(SweepParam::SnrB),
            "alpha" => Ok(SweepParam::Alpha),
            "t_symb" => Ok(SweepParam::TSymb),
            "beta" => Ok(SweepParam::Beta),
            "xi" => Ok(SweepParam::Xi),
            other => Err(format!(
                "unknown sweep parameter '{other}', expected one of \
                 snr, snr_a, snr_b, alpha, t_symb, beta, xi"
            )),
        }
    }
}

fn apply_param(
    config: &ExperimentConfig,
    param: SweepParam,
    value: f64,
) -> Result<ExperimentConfig, String> {
    let mut cfg = config.clone();
    match param {
        SweepParam::Snr => {
            cfg.channel.snr_a_db = Some(value);
            cfg.channel.snr_b_db = Some(value);
        }
        SweepParam::SnrA => cfg.channel.snr_a_db = Some(value),
        SweepParam::SnrB => cfg.channel.snr_b_db = Some(value),
        SweepParam::Alpha => cfg.timeline.alpha = value,
        SweepParam::TSymb => cfg.timeline.mean_symbol_duration = value,
        SweepParam::Beta => match cfg.beta.as_mut() {
            Some(beta) => beta.beta = value,
            None => return Err("beta sweep needs a beta section in the base config".into()),
        },
        SweepParam::Xi => match cfg.tt.as_mut() {
            Some(tt) => tt.xi = Some(value),
            None => return Err("xi sweep needs a tt section in the base config".into()),
        },
    }
    Ok(cfg)
}

/// One sweep point: infeasible points carry the validation reason instead of
/// a result.
#[derive(Debug, Serialize)]
pub struct SweepPoint {
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub infeasible: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub result: Option<ExperimentResult>,
}

#[derive(Debug, Serialize)]
pub struct SweepResult {
    pub param: SweepParam,
    pub points: Vec<SweepPoint>,
}

/// Runs one experiment per parameter value.
///
/// Point `i` runs with the derived master seed `hash(seed, sweep, i)`, so no
/// Poisson draw is shared between points. A point whose derived config fails
/// validation (for instance ML with α > 1/3) is marked infeasible instead of
/// failing the sweep; the sweep errors out only when every point is
/// infeasible.
pub fn sweep(
    config: &ExperimentConfig,
    param: SweepParam,
    values: &[f64],
    threads: usize,
) -> Result<SweepResult, HarnessError> {
    if values.is_empty() {
        return Err(HarnessError::Validation("sweep needs at least one value".into()));
    }
    let mut points = Vec::with_capacity(values.len());
    let mut any_feasible = false;
    for (i, &value) in values.iter().enumerate() {
        let outcome = apply_param(config, param, value).and_then(|mut cfg| {
            cfg.seed = seed::derive_seed(config.seed, &[PURPOSE_SWEEP, i as u64]);
            resolve(&cfg)
                .map_err(|e| e.to_string())
                .map(|exp| (cfg, exp))
        });
        match outcome {
            Ok((_, exp)) => {
                let result = run_resolved(&exp, PURPOSE_EVAL, threads)?;
                any_feasible = true;
                points.push(SweepPoint {
                    value,
                    infeasible: None,
                    result: Some(result),
                });
            }
            Err(reason) => points.push(SweepPoint {
                value,
                infeasible: Some(reason),
                result: None,
            }),
        }
    }
    if !any_feasible {
        return Err(HarnessError::AllPointsInfeasible);
    }
    Ok(SweepResult { param, points })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::tests::base_config;
    use crate::sync_f1::Scheme;

    #[test]
    fn perfect_sync_single_block_at_high_snr_is_error_free() {
        let mut cfg = base_config();
        cfg.scheme = Scheme::Perfect;
        cfg.channel.snr_a_db = Some(20.0);
        cfg.channel.snr_b_db = Some(20.0);
        cfg.blocks = 1;
        let result = run_experiment(&cfg, 1).unwrap();
        assert_eq!(result.report.ber, 0.0);
    }

    #[test]
    fn results_are_independent_of_worker_count() {
        let mut cfg = base_config();
        cfg.blocks = 40;
        let one = run_experiment(&cfg, 1).unwrap();
        let eight = run_experiment(&cfg, 8).unwrap();
        assert_eq!(
            serde_json::to_string(&one.report).unwrap(),
            serde_json::to_string(&eight.report).unwrap()
        );
    }

    #[test]
    fn select_best_returns_interior_minimum_and_breaks_ties_low() {
        let points = [(4.0, 0.9), (6.0, 0.4), (8.0, 0.7)];
        assert_eq!(select_best(&points), 6.0);
        let tied = [(4.0, 0.5), (6.0, 0.5)];
        assert_eq!(select_best(&tied), 4.0);
        let single = [(7.0, 0.1)];
        assert_eq!(select_best(&single), 7.0);
    }

    #[test]
    fn optimize_rejects_non_tt_scheme_and_empty_grid() {
        let cfg = base_config();
        assert!(matches!(
            optimize_threshold(&cfg, &[5.0], Objective::Ber, 1),
            Err(HarnessError::Validation(_))
        ));
        let mut tt_cfg = base_config();
        tt_cfg.scheme = Scheme::Tt;
        assert!(matches!(
            optimize_threshold(&tt_cfg, &[], Objective::Ber, 1),
            Err(HarnessError::Validation(_))
        ));
    }

    #[test]
    fn single_point_grid_returns_that_point() {
        let mut cfg = base_config();
        cfg.scheme = Scheme::Tt;
        cfg.tt = Some(super::super::TtSection { xi: None, min_window: None });
        cfg.blocks = 5;
        let outcome = optimize_threshold(&cfg, &[9.0], Objective::Ber, 1).unwrap();
        assert_eq!(outcome.best_xi, 9.0);
        assert_eq!(outcome.points.len(), 1);
    }

    #[test]
    fn sweep_marks_infeasible_points() {
        let mut cfg = base_config();
        cfg.blocks = 5;
        let result = sweep(&cfg, SweepParam::Alpha, &[0.1, 0.4], 1).unwrap();
        assert!(result.points[0].result.is_some());
        assert!(result.points[1].infeasible.is_some());
    }

    #[test]
    fn sweep_with_all_points_infeasible_errors() {
        let mut cfg = base_config();
        cfg.blocks = 5;
        assert!(matches!(
            sweep(&cfg, SweepParam::Alpha, &[0.4, 0.5], 1),
            Err(HarnessError::AllPointsInfeasible)
        ));
    }

    #[test]
    fn degenerate_sweep_equals_run_experiment_of_derived_config() {
        let mut cfg = base_config();
        cfg.blocks = 10;
        let swept = sweep(&cfg, SweepParam::Snr, &[4.0], 1).unwrap();
        let mut point_cfg = cfg.clone();
        point_cfg.channel.snr_a_db = Some(4.0);
        point_cfg.channel.snr_b_db = Some(4.0);
        point_cfg.seed = seed::derive_seed(cfg.seed, &[PURPOSE_SWEEP, 0]);
        let direct = run_experiment(&point_cfg, 1).unwrap();
        let a = serde_json::to_string(&swept.points[0].result.as_ref().unwrap().report).unwrap();
        let b = serde_json::to_string(&direct.report).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn calibration_and_evaluation_namespaces_are_disjoint() {
        let mut cfg = base_config();
        cfg.scheme = Scheme::Tt;
        cfg.tt = Some(super::super::TtSection { xi: Some(9.0), min_window: None });
        cfg.blocks = 10;
        let exp = resolve(&cfg).unwrap();
        let eval = run_resolved(&exp, PURPOSE_EVAL, 1).unwrap();
        let cal = run_resolved(&exp, PURPOSE_CALIBRATION, 1).unwrap();
        assert_ne!(
            serde_json::to_string(&eval.report).unwrap(),
            serde_json::to_string(&cal.report).unwrap()
        );
    }
}
