//! Insertion/deletion error classification and a marker error-correction
//! code.
//!
//! Imperfect synchronization produces two characteristic error events: a
//! deletion, when the estimator skips past a true symbol interval, and an
//! insertion, when a false alarm introduces an extra one. Either event
//! shifts the positions of all subsequent symbols, so a single event ruins a
//! symbol-by-symbol bit comparison. The classifier below scans the estimate
//! sequence against the ground truth while tracking the running offset
//! between the two.
//!
//! The marker code appends a known marker after every `L` data bits. The
//! decoder inspects the three bits at each expected marker position and, for
//! the marker `100`, can detect and correct one insertion or one deletion
//! between consecutive markers, restoring alignment for all later blocks.

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CodingError {
    #[error("data length {len} is not a multiple of the block length {block}")]
    LengthNotMultiple { len: usize, block: usize },
    #[error("the decoder supports only the marker 100")]
    UnsupportedMarker,
    #[error("received stream of {len} bits is shorter than one data block plus marker ({min})")]
    StreamTooShort { len: usize, min: usize },
    #[error("invalid marker code configuration: {0}")]
    InvalidConfig(String),
}

/// Marker code configuration: `L` data bits followed by the marker.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MarkerCodeConfig {
    pub data_len: usize,
    pub marker: Vec<u8>,
}

impl MarkerCodeConfig {
    pub fn new(data_len: usize, marker: Vec<u8>) -> Result<Self, CodingError> {
        if data_len == 0 {
            return Err(CodingError::InvalidConfig("data block length must be at least 1".into()));
        }
        if marker.is_empty() {
            return Err(CodingError::InvalidConfig("marker must be at least one bit".into()));
        }
        if marker.iter().any(|&b| b > 1) {
            return Err(CodingError::InvalidConfig("marker bits must be 0 or 1".into()));
        }
        Ok(MarkerCodeConfig { data_len, marker })
    }

    /// Encoded bits per data block (data plus marker).
    pub fn block_len(&self) -> usize {
        self.data_len + self.marker.len()
    }
}

/// Per-symbol synchronization error classification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SyncErrorFlag {
    None,
    Insertion,
    Deletion,
}

/// Classification of one block's estimates against the ground truth.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyncErrorRecord {
    /// Flag for each true symbol index `k = 1..=K`.
    pub flags: Vec<SyncErrorFlag>,
    /// Running offset (deletions minus insertions over strictly earlier
    /// symbols) in effect when symbol `k` was classified.
    pub offsets: Vec<i64>,
}

impl SyncErrorRecord {
    pub fn final_offset(&self) -> i64 {
        let mut offset = *self.offsets.last().unwrap_or(&0);
        match self.flags.last() {
            Some(SyncErrorFlag::Deletion) => offset += 1,
            Some(SyncErrorFlag::Insertion) => offset -= 1,
            _ => {}
        }
        offset
    }
}

/// Scans estimated against true start times and flags insertion/deletion
/// events.
///
/// For symbol `k` (1-based) with running offset `o`, a deletion is flagged
/// when `est[k] >= truth[k+o+1]` and an insertion when
/// `est[k+1] <= truth[k+o]`; the deletion predicate is checked first. A
/// lookup outside either sequence makes that predicate false. Times may be
/// in any unit as long as both sequences share it; the predicates are
/// invariant to a common shift.
pub fn classify_sync_errors(estimated: &[i64], truth: &[i64]) -> SyncErrorRecord {
    let k_max = truth.len();
    let mut flags = Vec::with_capacity(k_max);
    let mut offsets = Vec::with_capacity(k_max);
    let mut offset = 0i64;
    let est = |k: i64| -> Option<i64> {
        if k >= 1 && (k as usize) <= estimated.len() {
            Some(estimated[k as usize - 1])
        } else {
            None
        }
    };
    let tru = |k: i64| -> Option<i64> {
        if k >= 1 && (k as usize) <= truth.len() {
            Some(truth[k as usize - 1])
        } else {
            None
        }
    };
    for k in 1..=k_max as i64 {
        offsets.push(offset);
        let deletion = match (est(k), tru(k + offset + 1)) {
            (Some(e), Some(t)) => e >= t,
            _ => false,
        };
        if deletion {
            flags.push(SyncErrorFlag::Deletion);
            offset += 1;
            continue;
        }
        let insertion = match (est(k + 1), tru(k + offset)) {
            (Some(e), Some(t)) => e <= t,
            _ => false,
        };
        if insertion {
            flags.push(SyncErrorFlag::Insertion);
            offset -= 1;
        } else {
            flags.push(SyncErrorFlag::None);
        }
    }
    SyncErrorRecord { flags, offsets }
}

/// Appends the marker after every `data_len` data bits.
pub fn marker_encode(bits: &[u8], config: &MarkerCodeConfig) -> Result<Vec<u8>, CodingError> {
    if !bits.len().is_multiple_of(config.data_len) {
        return Err(CodingError::LengthNotMultiple {
            len: bits.len(),
            block: config.data_len,
        });
    }
    let blocks = bits.len() / config.data_len;
    let mut out = Vec::with_capacity(blocks * config.block_len());
    for chunk in bits.chunks(config.data_len) {
        out.extend_from_slice(chunk);
        out.extend_from_slice(&config.marker);
    }
    Ok(out)
}

/// Bit at stream position `i`, or 0 past the end (ragged final blocks after
/// a deletion read the missing positions as zeros).
fn bit_at(stream: &[u8], i: usize) -> u8 {
    stream.get(i).copied().unwrap_or(0)
}

/// Decodes a marker-coded stream, correcting single insertions or deletions
/// between consecutive markers of the marker `100`.
///
/// Block by block, the three bits at the expected marker position decide the
/// action: `100` leaves the block alone; `000`/`001` signal a deletion in
/// the data, so one zero bit is appended before the marker and the stream
/// re-aligns one position earlier; `010`/`110` signal an insertion, so the
/// bit immediately before the marker is dropped and the stream re-aligns one
/// position later; all other patterns are marker errors and are left alone.
/// Markers are stripped from the output in every case.
pub fn marker_decode(received: &[u8], config: &MarkerCodeConfig) -> Result<Vec<u8>, CodingError> {
    if config.marker != [1, 0, 0] {
        return Err(CodingError::UnsupportedMarker);
    }
    let l = config.data_len;
    let min = config.block_len();
    if received.len() + 1 < min {
        // One deletion may shorten a single-block stream by one bit.
        return Err(CodingError::StreamTooShort {
            len: received.len(),
            min,
        });
    }
    let mut out = Vec::new();
    let mut pos = 0usize;
    while pos < received.len() {
        let remaining = received.len() - pos;
        if remaining < l {
            // Ragged tail beyond the single-error model: emit what is there.
            out.extend(received[pos..].iter().copied());
            break;
        }
        let slot = [
            bit_at(received, pos + l),
            bit_at(received, pos + l + 1),
            bit_at(received, pos + l + 2),
        ];
        match slot {
            [1, 0, 0] => {
                out.extend(received[pos..pos + l].iter().copied());
                pos += l + 3;
            }
            [0, 0, _] => {
                // Deletion in data: one bit is missing, the true marker sits
                // one position early. Restore the block length with a zero.
                out.extend(received[pos..pos + l - 1].iter().copied());
                out.push(0);
                pos += l + 2;
            }
            [_, 1, 0] => {
                // Insertion in data: drop the bit immediately before the
                // marker, which now sits one position late.
                out.extend(received[pos..pos + l].iter().copied());
                pos += l + 4;
            }
            _ => {
                // Error within the marker itself: no action.
                out.extend(received[pos..pos + l].iter().copied());
                pos += l + 3;
            }
        }
    }
    Ok(out)
}
