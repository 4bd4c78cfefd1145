//! Discrete-time Monte Carlo simulator for symbol synchronization in
//! diffusion-based molecular communication links.
//!
//! A transmitter releases two molecule types on a grid of sample instants;
//! the receiver observes Poisson counts of bound molecules and has to find
//! the start of every symbol interval before it can detect the data bits.
//! The crate provides:
//!
//! * [`channel`] — channel impulse responses, expected bound-molecule
//!   counts under superposition, SNR and release-count calibration;
//! * [`timeline`] — random symbol timelines, emission schedules for the
//!   independent and joint frameworks, Poisson observation traces;
//! * [`sync_f1`] — independent synchronization on the sync molecule type
//!   (ML, linear-filter, peak-observation, threshold-trigger) plus ML data
//!   detection;
//! * [`sync_f2`] — joint synchronization and detection using both types;
//! * [`coding`] — insertion/deletion classification and a marker code that
//!   corrects single insertions/deletions between markers;
//! * [`metrics`] — normalized synchronization error, per-symbol error
//!   statistics, histograms and block BER;
//! * [`harness`] — seeded, reproducible Monte Carlo experiment engine with
//!   threshold optimization, parameter sweeps and CSV/JSON outputs.
//!
//! Everything is deterministic given a master seed: blocks are simulated on
//! independent substreams, and aggregation folds block results in block-index
//! order regardless of how many worker threads run them.

// Validation deliberately writes `!(x > 0.0)` so NaN parameters are
// rejected along with out-of-range ones.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod coding;
pub mod harness;
pub mod metrics;
pub mod seed;
pub mod sync_f1;
pub mod sync_f2;
pub mod timeline;
