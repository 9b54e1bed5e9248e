//! Brute-force classical (local-hidden-variable) oracle.
//!
//! Every functional in [`crate::bell`] is linear in the per-party outcome
//! assignments, so its classical maximum is attained at a deterministic
//! strategy. This module enumerates all of them, independently of any
//! closed-form bound claimed elsewhere, and certifies the stated bounds.
//!
//! Strategy encoding: bit `(party-1)*2 + (label-1)` of the index holds the
//! outcome for that party and label (parties major, labels minor). The
//! argmax breaks ties toward the smallest index, so the witness strategy
//! is deterministic, and the parallel and sequential paths agree exactly.

use serde::Serialize;

use crate::bell::{BellFunctional, Term};
use crate::error::{Error, Result};
use crate::exec::{fold_ranges, Exec};

/// Hard cap on the enumeration size (`n = 12` parties with two labels).
pub const MAX_STRATEGIES: u64 = 1 << 24;

/// Strategies per chunk handed to the execution layer.
const CHUNK: u64 = 4096;

/// A fixed outcome for every (party, label) pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct DeterministicStrategy {
    n_parties: usize,
    index: u32,
}

impl DeterministicStrategy {
    /// Decode a strategy from its index; `index < 4^n_parties`.
    pub fn from_index(n_parties: usize, index: u32) -> Result<Self> {
        if n_parties == 0 || n_parties > 12 {
            return Err(Error::InvalidArgument(format!(
                "strategies cover 1 to 12 parties, got {n_parties}"
            )));
        }
        if u64::from(index) >= 1u64 << (2 * n_parties) {
            return Err(Error::InvalidArgument(format!(
                "strategy index {index} out of range for {n_parties} parties"
            )));
        }
        Ok(Self { n_parties, index })
    }

    pub fn index(&self) -> u32 {
        self.index
    }

    pub fn n_parties(&self) -> usize {
        self.n_parties
    }

    /// Outcome bit for `party` (1-based) under `label` (1 or 2).
    pub fn outcome(&self, party: usize, label: u8) -> u8 {
        assert!((1..=self.n_parties).contains(&party), "party {party} out of range");
        assert!(label == 1 || label == 2, "label {label} has no fixed outcome");
        ((self.index >> ((party - 1) * 2 + (label - 1) as usize)) & 1) as u8
    }

    /// Correlator sign `1 - 2*outcome`; label 0 contributes 1.
    pub fn sign(&self, party: usize, label: u8) -> f64 {
        if label == 0 {
            1.0
        } else {
            1.0 - 2.0 * f64::from(self.outcome(party, label))
        }
    }
}

/// Value a deterministic strategy assigns to the functional: correlator
/// terms multiply signs, probability terms are 1 when every constrained
/// outcome matches and 0 otherwise.
pub fn strategy_value(functional: &BellFunctional, strategy: &DeterministicStrategy) -> f64 {
    let mut total = 0.0;
    for (coeff, term) in functional.terms() {
        let value = match term {
            Term::Correlator { labels } => labels
                .iter()
                .enumerate()
                .map(|(k, &l)| strategy.sign(k + 1, l))
                .product::<f64>(),
            Term::Probability { outcomes, labels } => {
                let hit = labels
                    .iter()
                    .zip(outcomes)
                    .enumerate()
                    .all(|(k, (&l, &o))| l == 0 || strategy.outcome(k + 1, l) == o);
                if hit {
                    1.0
                } else {
                    0.0
                }
            }
        };
        total += coeff * value;
    }
    total
}

fn bound_impl(exec: Exec, functional: &BellFunctional) -> Result<(f64, DeterministicStrategy)> {
    let n = functional.n_parties();
    let count = 1u64 << (2 * n);
    if count > MAX_STRATEGIES {
        return Err(Error::Capacity {
            requested: count as usize,
            max: MAX_STRATEGIES as usize,
            unit: "strategies",
        });
    }
    let best = fold_ranges(
        exec,
        count,
        CHUNK,
        |range| {
            let mut best_value = f64::NEG_INFINITY;
            let mut best_index = range.start;
            for index in range {
                let strategy = DeterministicStrategy { n_parties: n, index: index as u32 };
                let value = strategy_value(functional, &strategy);
                if value > best_value {
                    best_value = value;
                    best_index = index;
                }
            }
            (best_value, best_index)
        },
        // Higher value wins; on exact ties the smaller index does. The
        // combine is commutative, so any reduction tree gives one answer.
        |a, b| {
            if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) {
                b
            } else {
                a
            }
        },
    )
    .expect("strategy space is never empty");
    Ok((best.0, DeterministicStrategy { n_parties: n, index: best.1 as u32 }))
}

/// Exact classical maximum of the functional over all deterministic
/// strategies, with a witnessing strategy.
pub fn classical_bound(functional: &BellFunctional) -> Result<(f64, DeterministicStrategy)> {
    bound_impl(Exec::auto(), functional)
}

/// Sequential twin of [`classical_bound`]; identical result.
pub fn classical_bound_seq(functional: &BellFunctional) -> Result<(f64, DeterministicStrategy)> {
    bound_impl(Exec::Seq, functional)
}

/// True iff the enumerated maximum matches the functional's stated bound
/// within 1e-12. (For the built-in catalog the match is exact: every
/// coefficient is dyadic.)
pub fn verify_bound(functional: &BellFunctional) -> Result<bool> {
    let (value, _) = classical_bound(functional)?;
    Ok((value - functional.classical_bound()).abs() <= 1e-12)
}

fn y_check_scaled(n: usize, denominator_pow: i32) -> bool {
    let scale = 0.5f64.powi(denominator_pow);
    for index in 0..(1u32 << (2 * n)) {
        let strategy = DeterministicStrategy { n_parties: n, index };
        let mut prod = 1.0;
        let mut q_all2 = 1.0;
        for party in 1..=n {
            prod *= strategy.sign(party, 1) + strategy.sign(party, 2);
            q_all2 *= strategy.sign(party, 2);
        }
        // Dyadic arithmetic: every comparison below is exact.
        let y = scale * prod;
        if y != -2.0 && y != 0.0 && y != 2.0 {
            return false;
        }
        if (y == 2.0 && q_all2 != 1.0) || (y == -2.0 && q_all2 != -1.0) {
            return false;
        }
    }
    true
}

/// Exhaustively confirms the sign-splitting argument behind the even-`n`
/// bound: `Y = (1/2^(n-1)) prod_k (X_k1 + X_k2)` only takes values
/// `{-2, 0, 2}`, and `Y = +-2` forces the all-label-2 correlator to `+-1`.
pub fn y_argument_check(n: usize) -> Result<bool> {
    if n < 2 || n % 2 != 0 || n > 8 {
        return Err(Error::InvalidArgument(format!(
            "the sign-splitting check covers even n in [2, 8], got {n}"
        )));
    }
    Ok(y_check_scaled(n, n as i32 - 1))
}
