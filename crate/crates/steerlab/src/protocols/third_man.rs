//! Three-party key scrambling on the maximally mixed-angle pair family.
//!
//! The dealer prepares `Psi_1 = (|00> + |11>)/sqrt(2)` with probability
//! `nu1` and `Psi_2 = (|00> - |11>)/sqrt(2)` otherwise, keeps the label,
//! and sends the qubits to the two key parties. In the x basis the pairs
//! are correlated under `Psi_1` and anticorrelated under `Psi_2` (the y
//! basis swaps the roles), so the raw x key carries error rate `nu2`
//! until the dealer announces the labels, after which flipping the
//! second party's scrambled bits yields an error-free key. z outcomes
//! agree under both labels and serve as a sanity channel.

use serde::{Deserialize, Serialize};

use super::rng::{lane_rng, sample_cell, LANE_ALICE, LANE_BOB, LANE_MEASURE, LANE_SOURCE};
use super::{key_rate_estimate, ProtocolTranscript, RunRecord};
use crate::error::{Error, Result};
use crate::exec::{map_indexed, Exec};
use crate::qcore::{c64, contract_qubit, BlochDirection, ProjectorPair};
use num_complex::Complex64;
use rand::Rng;
use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ThirdManConfig {
    /// Weight of the correlated branch; the anticorrelated branch gets
    /// `1 - nu1`.
    pub nu1: f64,
    pub runs: u64,
    #[serde(default)]
    pub seed: u64,
    /// Extra equatorial directions (azimuths, in radians) the key
    /// parties may also measure. Test-only: matched auxiliary runs are
    /// excluded from the sifted key and the error rates.
    #[serde(default)]
    pub aux_angles: Vec<f64>,
}

impl ThirdManConfig {
    fn validate(&self) -> Result<()> {
        if !self.nu1.is_finite() || !(0.0..=1.0).contains(&self.nu1) {
            return Err(Error::InvalidArgument(format!(
                "nu1 must lie in [0, 1], got {}",
                self.nu1
            )));
        }
        if self.runs == 0 {
            return Err(Error::InvalidArgument("runs must be at least 1".into()));
        }
        if self.aux_angles.iter().any(|a| !a.is_finite()) {
            return Err(Error::InvalidArgument("auxiliary angles must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThirdManSummary {
    pub runs: u64,
    /// Matched-basis run counts.
    pub x_runs: u64,
    pub y_runs: u64,
    pub z_runs: u64,
    pub aux_runs: u64,
    pub mismatched_runs: u64,
    /// Fraction of matched z runs with equal outcomes; 1 exactly for
    /// every member of the family.
    pub z_agreement: f64,
    /// Matched x and y runs together (the key material).
    pub sifted_len: u64,
    /// Error rate after the labels are announced and the scrambled bits
    /// flipped; 0 exactly.
    pub qber_with_labels: f64,
    /// Raw x-basis error rate without the labels; estimates `nu2`.
    pub x_qber_without_labels: f64,
    pub expected_x_qber_without_labels: f64,
    pub key_rate_with_labels: f64,
    pub key_rate_without_labels: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum TmBasis {
    X,
    Y,
    Z,
    Aux(usize),
}

impl TmBasis {
    fn from_index(i: usize) -> Self {
        match i {
            0 => TmBasis::X,
            1 => TmBasis::Y,
            2 => TmBasis::Z,
            k => TmBasis::Aux(k - 3),
        }
    }

    fn name(self) -> String {
        match self {
            TmBasis::X => "x".into(),
            TmBasis::Y => "y".into(),
            TmBasis::Z => "z".into(),
            TmBasis::Aux(k) => format!("aux{k}"),
        }
    }

    fn direction(self, aux_angles: &[f64]) -> BlochDirection {
        match self {
            TmBasis::X => BlochDirection::x(),
            TmBasis::Y => BlochDirection::y(),
            TmBasis::Z => BlochDirection::z(),
            TmBasis::Aux(k) => BlochDirection::new(FRAC_PI_2, aux_angles[k]),
        }
    }
}

struct TmRun {
    record: RunRecord,
    a_basis: TmBasis,
    b_basis: TmBasis,
}

fn pair_amplitudes(label: u8) -> [Complex64; 4] {
    let r = c64(FRAC_1_SQRT_2, 0.0);
    match label {
        1 => [r, Complex64::ZERO, Complex64::ZERO, r],
        _ => [r, Complex64::ZERO, Complex64::ZERO, -r],
    }
}

/// Exact joint outcome table for the pair state along two directions,
/// cells ordered (a, b) = (0,0), (0,1), (1,0), (1,1).
fn joint_cells(amps: &[Complex64], da: &BlochDirection, db: &BlochDirection) -> [f64; 4] {
    let mut cells = [0.0; 4];
    for a in 0..2u8 {
        let sa = ProjectorPair::eigenstate(da, a);
        let rest = contract_qubit(amps, 2, 1, &sa);
        for b in 0..2u8 {
            let sb = ProjectorPair::eigenstate(db, b);
            let amp = contract_qubit(&rest, 1, 1, &sb)[0];
            cells[(a as usize) * 2 + b as usize] = amp.norm_sqr();
        }
    }
    cells
}

fn simulate_run(config: &ThirdManConfig, run: u64, n_bases: usize) -> TmRun {
    let label = if lane_rng(config.seed, run, LANE_SOURCE).random::<f64>() < config.nu1 {
        1
    } else {
        2
    };
    let a_basis =
        TmBasis::from_index(lane_rng(config.seed, run, LANE_ALICE).random_range(0..n_bases));
    let b_basis =
        TmBasis::from_index(lane_rng(config.seed, run, LANE_BOB).random_range(0..n_bases));
    let amps = pair_amplitudes(label);
    let cells = joint_cells(
        &amps,
        &a_basis.direction(&config.aux_angles),
        &b_basis.direction(&config.aux_angles),
    );
    let cell = sample_cell(&mut lane_rng(config.seed, run, LANE_MEASURE), &cells);
    TmRun {
        record: RunRecord {
            run,
            label,
            bases: vec![a_basis.name(), b_basis.name()],
            outcomes: vec![(cell >> 1) as u8, (cell & 1) as u8],
            broadcast: true,
        },
        a_basis,
        b_basis,
    }
}

fn summarize(config: &ThirdManConfig, runs: &[TmRun]) -> ThirdManSummary {
    let mut x_runs = 0u64;
    let mut y_runs = 0u64;
    let mut z_runs = 0u64;
    let mut aux_runs = 0u64;
    let mut mismatched = 0u64;
    let mut z_agree = 0u64;
    let mut x_raw_errors = 0u64;
    let mut sift_errors = 0u64;
    for r in runs {
        if r.a_basis != r.b_basis {
            mismatched += 1;
            continue;
        }
        let a = r.record.outcomes[0];
        let b = r.record.outcomes[1];
        match r.a_basis {
            TmBasis::Z => {
                z_runs += 1;
                if a == b {
                    z_agree += 1;
                }
            }
            TmBasis::X => {
                x_runs += 1;
                if a != b {
                    x_raw_errors += 1;
                }
                // Psi_2 anticorrelates x outcomes, so label 2 flips.
                let unscrambled = if r.record.label == 2 { 1 - b } else { b };
                if a != unscrambled {
                    sift_errors += 1;
                }
            }
            TmBasis::Y => {
                y_runs += 1;
                // Psi_1 anticorrelates y outcomes, so label 1 flips.
                let unscrambled = if r.record.label == 1 { 1 - b } else { b };
                if a != unscrambled {
                    sift_errors += 1;
                }
            }
            TmBasis::Aux(_) => aux_runs += 1,
        }
    }
    let ratio = |num: u64, den: u64, empty: f64| {
        if den == 0 {
            empty
        } else {
            num as f64 / den as f64
        }
    };
    let sifted_len = x_runs + y_runs;
    let qber_with = ratio(sift_errors, sifted_len, 0.0);
    let x_raw = ratio(x_raw_errors, x_runs, 0.0);
    ThirdManSummary {
        runs: runs.len() as u64,
        x_runs,
        y_runs,
        z_runs,
        aux_runs,
        mismatched_runs: mismatched,
        z_agreement: ratio(z_agree, z_runs, 1.0),
        sifted_len,
        qber_with_labels: qber_with,
        x_qber_without_labels: x_raw,
        expected_x_qber_without_labels: 1.0 - config.nu1,
        key_rate_with_labels: key_rate_estimate(qber_with),
        key_rate_without_labels: key_rate_estimate(x_raw),
    }
}

fn run_impl(config: &ThirdManConfig, exec: Exec) -> Result<ProtocolTranscript<ThirdManSummary>> {
    config.validate()?;
    let n_bases = 3 + config.aux_angles.len();
    let runs = map_indexed(exec, config.runs, |run| simulate_run(config, run, n_bases));
    let summary = summarize(config, &runs);
    Ok(ProtocolTranscript {
        records: runs.into_iter().map(|r| r.record).collect(),
        summary,
    })
}

pub fn run_third_man(config: &ThirdManConfig) -> Result<ProtocolTranscript<ThirdManSummary>> {
    run_impl(config, Exec::auto())
}

pub fn run_third_man_seq(config: &ThirdManConfig) -> Result<ProtocolTranscript<ThirdManSummary>> {
    run_impl(config, Exec::Seq)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocols::records_to_jsonl;

    fn config(nu1: f64, runs: u64, seed: u64) -> ThirdManConfig {
        ThirdManConfig {
            nu1,
            runs,
            seed,
            aux_angles: vec![],
        }
    }

    #[test]
    fn structural_zeros_hold_exactly() {
        let out = run_third_man(&config(0.8, 4000, 1)).unwrap();
        let s = &out.summary;
        assert_eq!(s.z_agreement, 1.0);
        assert_eq!(s.qber_with_labels, 0.0);
        assert_eq!(s.key_rate_with_labels, 1.0);
        assert!(s.z_runs > 0 && s.sifted_len > 0);
        assert_eq!(
            s.x_runs + s.y_runs + s.z_runs + s.aux_runs + s.mismatched_runs,
            s.runs
        );
    }

    #[test]
    fn raw_x_error_tracks_nu2() {
        let out = run_third_man(&config(0.8, 20000, 2)).unwrap();
        let s = &out.summary;
        assert_eq!(s.expected_x_qber_without_labels, 1.0 - 0.8);
        let sigma = (0.2 * 0.8 / s.x_runs as f64).sqrt();
        assert!(
            (s.x_qber_without_labels - 0.2).abs() < 5.0 * sigma,
            "raw x error {} too far from 0.2",
            s.x_qber_without_labels
        );
        // Degenerate dealer: only the correlated branch, no scrambling.
        let pure = run_third_man(&config(1.0, 2000, 3)).unwrap();
        assert_eq!(pure.summary.x_qber_without_labels, 0.0);
    }

    #[test]
    fn transcripts_are_deterministic_and_backend_independent() {
        let cfg = ThirdManConfig {
            aux_angles: vec![0.3, 1.1],
            ..config(0.7, 600, 9)
        };
        let a = run_third_man(&cfg).unwrap();
        let b = run_third_man(&cfg).unwrap();
        let c = run_third_man_seq(&cfg).unwrap();
        assert_eq!(a.records, b.records);
        assert_eq!(a.records, c.records);
        assert_eq!(a.summary, c.summary);
        assert_eq!(records_to_jsonl(&a.records), records_to_jsonl(&c.records));
        assert!(a.summary.aux_runs > 0);
        assert_eq!(a.summary.qber_with_labels, 0.0);
    }

    #[test]
    fn label_frequencies_match_weights() {
        let out = run_third_man(&config(0.7, 20000, 4)).unwrap();
        let ones = out.records.iter().filter(|r| r.label == 1).count() as f64;
        let frac = ones / out.records.len() as f64;
        let sigma = (0.7 * 0.3 / out.records.len() as f64).sqrt();
        assert!((frac - 0.7).abs() < 5.0 * sigma);
        assert!(out.records.iter().all(|r| r.broadcast));
    }

    #[test]
    fn config_validation() {
        assert!(run_third_man(&config(1.2, 10, 0)).is_err());
        assert!(run_third_man(&config(0.5, 0, 0)).is_err());
        let bad = ThirdManConfig {
            aux_angles: vec![f64::NAN],
            ..config(0.5, 10, 0)
        };
        assert!(run_third_man(&bad).is_err());
    }
}
