//! Channel impulse responses and expected received signals.
//!
//! The channel is characterized by the expected number of molecules of one
//! type bound to the receiver at time `t` after a single release (the channel
//! impulse response, CIR) and by the mean count of external noise molecules.
//! Expected observation signals are superpositions of shifted CIRs plus the
//! noise floor; everything downstream (synchronization hypotheses, detection
//! metrics) is built from these means.
//!
//! The default CIR is the transparent-receiver expected count for an
//! instantaneous point-source release in unbounded 3-D diffusion. It is
//! closed-form, unimodal and linear in the number of released molecules.
//! Receiver models without a closed form are supported through tabulated
//! CIRs loaded from a two-column CSV file.

use std::io::{BufRead, Write};
use std::path::Path;

use thiserror::Error;

/// Relative level below which the CIR tail is truncated and treated as
/// exactly zero. Bounds the inter-symbol interference memory.
pub const CIR_TAIL_CUTOFF: f64 = 1e-4;

#[derive(Debug, Error)]
pub enum ChannelError {
    #[error("invalid channel parameter: {0}")]
    InvalidParams(String),
    #[error("tabulation horizon {horizon:.3e} s is shorter than the analytic peak time {peak:.3e} s")]
    HorizonTooShort { horizon: f64, peak: f64 },
    #[error("CIR table row {row}: {msg}")]
    Table { row: usize, msg: String },
    #[error("SNR is undefined for a zero noise mean")]
    UndefinedSnr,
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Physical parameters of one molecule type's diffusion channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams {
    /// Diffusion coefficient D in m²/s.
    pub diffusion: f64,
    /// Transmitter-receiver distance r0 in m.
    pub distance: f64,
    /// Radius of the spherical receiver in m.
    pub receiver_radius: f64,
    /// Number of molecules released per emission.
    pub release_count: f64,
    /// Expected count of external noise molecules bound at any instant.
    pub noise_mean: f64,
}

impl ChannelParams {
    pub fn validate(&self) -> Result<(), ChannelError> {
        if !(self.diffusion > 0.0) {
            return Err(ChannelError::InvalidParams(format!(
                "diffusion coefficient must be positive, got {}",
                self.diffusion
            )));
        }
        if !(self.distance > self.receiver_radius) || !(self.receiver_radius > 0.0) {
            return Err(ChannelError::InvalidParams(format!(
                "need distance > receiver radius > 0, got r0 = {}, rr = {}",
                self.distance, self.receiver_radius
            )));
        }
        if !(self.release_count >= 0.0) {
            return Err(ChannelError::InvalidParams(format!(
                "release count must be non-negative, got {}",
                self.release_count
            )));
        }
        if !(self.noise_mean >= 0.0) {
            return Err(ChannelError::InvalidParams(format!(
                "noise mean must be non-negative, got {}",
                self.noise_mean
            )));
        }
        Ok(())
    }
}

/// Tabulated channel impulse response.
///
/// Samples are `(time in s, expected bound count)`; times are strictly
/// increasing and start at `t = 0` with value 0. Outside the tabulated range
/// the response is exactly zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Cir {
    times: Vec<f64>,
    values: Vec<f64>,
    peak_time: f64,
    peak_value: f64,
}

impl Cir {
    fn from_samples(times: Vec<f64>, values: Vec<f64>) -> Self {
        let (peak_idx, peak_value) = peak_of(&values);
        Cir {
            peak_time: times[peak_idx],
            peak_value,
            times,
            values,
        }
    }

    /// Time of the earliest maximum of the tabulated response.
    pub fn peak_time(&self) -> f64 {
        self.peak_time
    }

    /// Value of the tabulated maximum.
    pub fn peak_value(&self) -> f64 {
        self.peak_value
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Response at time `t`, evaluated by nearest-sample lookup.
    ///
    /// `t < 0` and times past the last tabulated sample evaluate to 0; ties
    /// between two equidistant samples resolve to the earlier one.
    pub fn value_at(&self, t: f64) -> f64 {
        if t < 0.0 || self.times.is_empty() {
            return 0.0;
        }
        let last = *self.times.last().unwrap();
        if t > last {
            return 0.0;
        }
        let idx = match self.times.binary_search_by(|x| x.partial_cmp(&t).unwrap()) {
            Ok(i) => i,
            Err(i) => {
                // t lies between samples i-1 and i (i >= 1 since times[0] = 0 <= t).
                let lo = i - 1;
                if i == self.times.len() || t - self.times[lo] <= self.times[i] - t {
                    lo
                } else {
                    i
                }
            }
        };
        self.values[idx]
    }

    /// CIR scaled by a non-negative factor (linearity in the release count).
    pub fn scaled(&self, factor: f64) -> Cir {
        assert!(factor >= 0.0, "scale factor must be non-negative");
        Cir::from_samples(
            self.times.clone(),
            self.values.iter().map(|v| v * factor).collect(),
        )
    }

    /// Resamples onto a uniform grid of step `dt` for index-based lookups.
    pub fn resample(&self, dt: f64) -> SampledCir {
        assert!(dt > 0.0, "grid step must be positive");
        let last = self.times.last().copied().unwrap_or(0.0);
        // The small slack keeps grid-aligned tables from losing their last
        // sample to division rounding.
        let n = (last / dt + 1e-9).floor() as usize + 1;
        let values = (0..n).map(|i| self.value_at(i as f64 * dt)).collect();
        SampledCir { step: dt, values }
    }

    /// Writes the table in the two-column CSV format accepted by
    /// [`load_cir_table`].
    pub fn write_table<W: Write>(&self, mut w: W) -> Result<(), ChannelError> {
        writeln!(w, "t_seconds,expected_count")?;
        for (t, v) in self.times.iter().zip(&self.values) {
            writeln!(w, "{t},{v}")?;
        }
        Ok(())
    }
}

/// A CIR resampled onto a uniform grid, indexed by sample step.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledCir {
    step: f64,
    values: Vec<f64>,
}

impl SampledCir {
    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Response `delta` grid steps after a release; zero outside the table.
    #[inline]
    pub fn value_step(&self, delta: i64) -> f64 {
        if delta < 0 || delta as usize >= self.values.len() {
            0.0
        } else {
            self.values[delta as usize]
        }
    }

    /// Earliest grid step achieving the maximum response.
    pub fn peak_step(&self) -> i64 {
        peak_of(&self.values).0 as i64
    }

    pub fn peak_value(&self) -> f64 {
        peak_of(&self.values).1
    }
}

fn peak_of(values: &[f64]) -> (usize, f64) {
    let mut idx = 0;
    let mut best = f64::NEG_INFINITY;
    for (i, &v) in values.iter().enumerate() {
        if v > best {
            best = v;
            idx = i;
        }
    }
    (idx, best)
}

/// Builds the transparent-receiver CIR on a uniform grid of step `dt`.
///
/// The expected count is
/// `N · V_r · (4πDt)^(-3/2) · exp(-r0² / (4Dt))` with `V_r = (4/3)π·rr³`,
/// defined as 0 at `t = 0` by continuity. Tabulation stops at `horizon` or
/// once the post-peak tail has fallen below [`CIR_TAIL_CUTOFF`] times the
/// peak, whichever comes first; past that point the response is treated as
/// exactly zero.
pub fn build_transparent_cir(
    params: &ChannelParams,
    dt: f64,
    horizon: f64,
) -> Result<Cir, ChannelError> {
    params.validate()?;
    if !(dt > 0.0) {
        return Err(ChannelError::InvalidParams(format!(
            "grid step must be positive, got {dt}"
        )));
    }
    let analytic_peak_time = params.distance * params.distance / (6.0 * params.diffusion);
    if horizon < analytic_peak_time {
        return Err(ChannelError::HorizonTooShort {
            horizon,
            peak: analytic_peak_time,
        });
    }
    let volume = 4.0 / 3.0 * std::f64::consts::PI * params.receiver_radius.powi(3);
    let eval = |t: f64| -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        let spread = 4.0 * std::f64::consts::PI * params.diffusion * t;
        params.release_count * volume * spread.powf(-1.5)
            * (-params.distance * params.distance / (4.0 * params.diffusion * t)).exp()
    };
    let analytic_peak = eval(analytic_peak_time);
    let cutoff = CIR_TAIL_CUTOFF * analytic_peak;

    let mut times = Vec::new();
    let mut values = Vec::new();
    let mut i: usize = 0;
    loop {
        let t = i as f64 * dt;
        if t > horizon {
            break;
        }
        let v = eval(t);
        if t > analytic_peak_time && v < cutoff {
            break;
        }
        times.push(t);
        values.push(v);
        i += 1;
    }
    Ok(Cir::from_samples(times, values))
}

/// Loads a tabulated CIR from two-column CSV (`t_seconds,expected_count`).
///
/// A single header row is allowed. The table must start at `(0, 0)`, have
/// strictly increasing times and non-negative counts; violations are reported
/// with the offending row number.
pub fn load_cir_table<R: BufRead>(reader: R) -> Result<Cir, ChannelError> {
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let row = i + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let mut fields = trimmed.split(',').map(str::trim);
        let (a, b) = match (fields.next(), fields.next(), fields.next()) {
            (Some(a), Some(b), None) => (a, b),
            _ => {
                return Err(ChannelError::Table {
                    row,
                    msg: "expected exactly two comma-separated columns".into(),
                })
            }
        };
        let parsed = a.parse::<f64>().and_then(|t| b.parse::<f64>().map(|v| (t, v)));
        let (t, v) = match parsed {
            Ok(tv) => tv,
            Err(_) if row == 1 => continue, // header row
            Err(_) => {
                return Err(ChannelError::Table {
                    row,
                    msg: format!("cannot parse '{trimmed}' as two numbers"),
                })
            }
        };
        if times.is_empty() {
            if t != 0.0 || v != 0.0 {
                return Err(ChannelError::Table {
                    row,
                    msg: format!("table must start at (0, 0), got ({t}, {v})"),
                });
            }
        } else if t <= *times.last().unwrap() {
            return Err(ChannelError::Table {
                row,
                msg: format!("times must be strictly increasing, got {t}"),
            });
        }
        if v < 0.0 {
            return Err(ChannelError::Table {
                row,
                msg: format!("expected count must be non-negative, got {v}"),
            });
        }
        times.push(t);
        values.push(v);
    }
    if times.is_empty() {
        return Err(ChannelError::Table {
            row: 0,
            msg: "table contains no data rows".into(),
        });
    }
    Ok(Cir::from_samples(times, values))
}

/// Convenience wrapper over [`load_cir_table`] for a file path.
pub fn load_cir_table_path(path: &Path) -> Result<Cir, ChannelError> {
    let file = std::fs::File::open(path)?;
    load_cir_table(std::io::BufReader::new(file))
}

/// Expected observation means of one molecule type on a uniform sample grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpectedSignal {
    /// Grid step in seconds.
    pub dt: f64,
    /// Per-sample means; entry `n` is the mean at time `n·dt`.
    pub means: Vec<f64>,
}

/// Expected signal under superposition of releases, from grid-step inputs.
///
/// Each mean starts at the noise floor `z`; the releases' shifted CIRs are
/// then added in the order given, so the accumulation order (and therefore
/// the exact floating-point result) is reproducible.
pub fn expected_signal_steps(
    cir: &SampledCir,
    releases: &[(i64, bool)],
    z: f64,
    n_samples: usize,
) -> Vec<f64> {
    let mut means = vec![z; n_samples];
    for &(start, on) in releases {
        if !on {
            continue;
        }
        debug_assert!(start >= 0, "release times must be non-negative");
        let first = (start.max(0) as usize).min(n_samples);
        let last = n_samples.min(first + cir.len());
        for (i, m) in means[first..last].iter_mut().enumerate() {
            *m += cir.value_step((first + i) as i64 - start);
        }
    }
    means
}

/// Expected signal under superposition of releases given in seconds.
///
/// The CIR is evaluated by nearest-sample lookup on its own grid; release
/// times must lie on the `dt` grid.
pub fn expected_signal(
    cir: &Cir,
    releases: &[(f64, bool)],
    z: f64,
    dt: f64,
    n_samples: usize,
) -> ExpectedSignal {
    let sampled = cir.resample(dt);
    let release_steps: Vec<(i64, bool)> = releases
        .iter()
        .map(|&(t, on)| ((t / dt).round() as i64, on))
        .collect();
    ExpectedSignal {
        dt,
        means: expected_signal_steps(&sampled, &release_steps, z, n_samples),
    }
}

/// Signal-to-noise ratio: peak CIR value over the noise mean.
pub fn snr(cir: &Cir, z: f64) -> Result<f64, ChannelError> {
    if !(z > 0.0) {
        return Err(ChannelError::UndefinedSnr);
    }
    Ok(cir.peak_value() / z)
}

/// SNR in decibels.
pub fn snr_db(cir: &Cir, z: f64) -> Result<f64, ChannelError> {
    Ok(10.0 * snr(cir, z)?.log10())
}

/// Release count that scales a unit (per-molecule) CIR to a target SNR.
///
/// The CIR is linear in the release count, so the solution is exact:
/// `N = target · z / peak(unit CIR)`.
pub fn calibrate_release_count(
    unit_cir: &Cir,
    z: f64,
    target_snr: f64,
) -> Result<f64, ChannelError> {
    if !(z > 0.0) {
        return Err(ChannelError::UndefinedSnr);
    }
    if !(target_snr > 0.0) {
        return Err(ChannelError::InvalidParams(format!(
            "target SNR must be positive, got {target_snr}"
        )));
    }
    if !(unit_cir.peak_value() > 0.0) {
        return Err(ChannelError::InvalidParams(
            "CIR peak must be positive to calibrate a release count".into(),
        ));
    }
    Ok(target_snr * z / unit_cir.peak_value())
}
