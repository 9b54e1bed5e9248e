//! Counter-based randomness for the protocol simulators.
//!
//! Every (run, lane) pair owns one ChaCha8 stream derived from the config
//! seed, so any run can be generated in isolation and parallel execution
//! is byte-identical to sequential. Lane indices stay below [`LANES`];
//! whole-simulation draws (like the inspection subset) use the stream
//! block one past the last run, which no per-run lane can reach.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub(crate) const LANE_SOURCE: u64 = 0;
pub(crate) const LANE_ALICE: u64 = 1;
pub(crate) const LANE_BOB: u64 = 2;
pub(crate) const LANE_CHARLIE: u64 = 3;
pub(crate) const LANE_EVE: u64 = 4;
pub(crate) const LANE_MEASURE: u64 = 5;
pub(crate) const LANE_INSPECT: u64 = 6;
pub(crate) const LANES: u64 = 8;

pub(crate) fn lane_rng(seed: u64, run: u64, lane: u64) -> ChaCha8Rng {
    debug_assert!(lane < LANES);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(run * LANES + lane);
    rng
}

/// Generator for draws that concern the whole simulation rather than one
/// run.
pub(crate) fn global_rng(seed: u64, runs: u64, lane: u64) -> ChaCha8Rng {
    lane_rng(seed, runs, lane)
}

/// Samples an index from an unnormalized nonnegative cell table with a
/// single uniform draw. Zero-width cells are never selected, so events
/// with probability exactly 0.0 cannot occur.
pub(crate) fn sample_cell(rng: &mut ChaCha8Rng, cells: &[f64]) -> usize {
    let total: f64 = cells.iter().sum();
    debug_assert!(total > 0.0, "cell table must have positive mass");
    let u = rng.random::<f64>() * total;
    let mut cum = 0.0;
    let mut last_positive = 0;
    for (i, &p) in cells.iter().enumerate() {
        if p > 0.0 {
            last_positive = i;
            cum += p;
            if u < cum {
                return i;
            }
        }
    }
    last_positive
}

/// Chooses exactly `m` distinct runs out of `0..runs` with a partial
/// Fisher-Yates shuffle, returning a flag per run.
pub(crate) fn exact_subset_flags(rng: &mut ChaCha8Rng, runs: u64, m: u64) -> Vec<bool> {
    debug_assert!(m <= runs);
    let n = runs as usize;
    let mut idx: Vec<u64> = (0..runs).collect();
    for i in 0..(m as usize) {
        let j = rng.random_range(i..n);
        idx.swap(i, j);
    }
    let mut flags = vec![false; n];
    for &r in &idx[..m as usize] {
        flags[r as usize] = true;
    }
    flags
}
