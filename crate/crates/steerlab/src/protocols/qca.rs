//! Certificate check on the three-qubit family with tails `|0>` and
//! `cos(phi)|0> + sin(phi)|1>`.
//!
//! The dealer keeps the third qubit and measures it in a randomly chosen
//! tail basis each run; the two certificate holders measure z or x. A
//! random subset of exactly `inspection_size` runs is broadcast. On the
//! honest state the broadcast z runs must agree exactly, and whenever
//! the pair reports (0,0) with the dealer in the first tail basis (or
//! (1,1) with the second) the dealer's projection succeeds with
//! certainty, because the pair's z outcomes collapse the dealer's qubit
//! onto the exact tail state. An intercept-resend attack on the second
//! holder's qubit never disturbs those tail projections, so the
//! steering verdict also demands perfect z agreement, which such an
//! attack breaks on half of the x-intercepted z runs.
//!
//! Entanglement is certified separately from the x-basis coincidence
//! rate `(1 + V cos(phi) sin(zeta)) / 2`, tested against 1/2 with a
//! two-sided normal approximation at significance `alpha`.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::rng::{
    exact_subset_flags, global_rng, lane_rng, sample_cell, LANE_ALICE, LANE_BOB, LANE_CHARLIE,
    LANE_EVE, LANE_INSPECT, LANE_MEASURE, LANE_SOURCE,
};
use super::{qca_coincidence_closed_form, ProtocolTranscript, RunRecord};
use crate::error::{Error, Result};
use crate::exec::{map_indexed, Exec};
use crate::qcore::{c64, contract_qubit, insert_bit, BlochDirection, ProjectorPair};
use num_complex::Complex64;
use rand::Rng;

const ORTHOGONALITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EveModel {
    #[default]
    None,
    /// Measures the second holder's qubit in a uniformly random z or x
    /// basis and resends the outcome eigenstate.
    InterceptResend,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QcaConfig {
    pub nu1: f64,
    pub zeta: f64,
    /// Tail angle: the dealer's second tail state is
    /// `cos(phi)|0> + sin(phi)|1>`.
    pub phi: f64,
    pub runs: u64,
    /// Number of runs broadcast for inspection; exactly this many
    /// records carry the broadcast flag.
    pub inspection_size: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub eve: EveModel,
    /// Orthogonal tails make the dealer's check equivalent to a plain
    /// z measurement and void the protocol's secrecy argument, so they
    /// are rejected unless explicitly permitted.
    #[serde(default)]
    pub allow_orthogonal_tails: bool,
    /// Significance level for the entanglement verdict.
    #[serde(default = "default_alpha")]
    pub alpha: f64,
}

fn default_alpha() -> f64 {
    1e-6
}

impl QcaConfig {
    fn validate(&self) -> Result<()> {
        if !self.nu1.is_finite() || !(0.0..=1.0).contains(&self.nu1) {
            return Err(Error::InvalidArgument(format!(
                "nu1 must lie in [0, 1], got {}",
                self.nu1
            )));
        }
        if !self.zeta.is_finite() || !self.phi.is_finite() {
            return Err(Error::InvalidArgument("angles must be finite".into()));
        }
        if self.runs == 0 {
            return Err(Error::InvalidArgument("runs must be at least 1".into()));
        }
        if self.inspection_size == 0 || self.inspection_size > self.runs {
            return Err(Error::InvalidArgument(format!(
                "inspection_size must lie in [1, runs], got {} with {} runs",
                self.inspection_size, self.runs
            )));
        }
        if self.phi.cos().abs() <= ORTHOGONALITY_TOL && !self.allow_orthogonal_tails {
            return Err(Error::InvalidArgument(
                "tail states are orthogonal; set allow_orthogonal_tails to force".into(),
            ));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QcaSummary {
    pub runs: u64,
    pub inspected: u64,
    /// Matched-basis counts over all runs.
    pub z_runs: u64,
    pub x_runs: u64,
    pub inspected_z_runs: u64,
    pub z_mismatches: u64,
    /// Tail projections the dealer could check (matching z outcomes and
    /// matching tail basis) and how many failed.
    pub chi_checks: u64,
    pub chi_failures: u64,
    pub x_coincidence: f64,
    pub expected_x_coincidence: f64,
    pub p_value: f64,
    /// True when every broadcast z run agreed and every checkable tail
    /// projection succeeded.
    pub steering_verdict: bool,
    /// True when the x coincidence rate differs from 1/2 at
    /// significance `alpha`.
    pub entanglement_verdict: bool,
    pub accept: bool,
    /// z-basis matched runs that stayed private.
    pub sifted_key_len: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum AbBasis {
    Z,
    X,
}

impl AbBasis {
    fn name(self) -> String {
        match self {
            AbBasis::Z => "z".into(),
            AbBasis::X => "x".into(),
        }
    }

    fn direction(self) -> BlochDirection {
        match self {
            AbBasis::Z => BlochDirection::z(),
            AbBasis::X => BlochDirection::x(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ChiBasis {
    Chi1,
    Chi2,
}

impl ChiBasis {
    fn name(self) -> String {
        match self {
            ChiBasis::Chi1 => "chi1".into(),
            ChiBasis::Chi2 => "chi2".into(),
        }
    }

    /// Bloch direction whose outcome-0 eigenstate is the tail state.
    fn direction(self, phi: f64) -> BlochDirection {
        match self {
            ChiBasis::Chi1 => BlochDirection::z(),
            ChiBasis::Chi2 => BlochDirection::new(2.0 * phi, 0.0),
        }
    }
}

struct QcaRun {
    record: RunRecord,
    a_basis: AbBasis,
    b_basis: AbBasis,
    c_basis: ChiBasis,
}

/// Branch amplitudes over (holder A, holder B, dealer), big-endian.
fn family_amplitudes(config: &QcaConfig, label: u8) -> [Complex64; 8] {
    let c = (config.zeta / 2.0).cos();
    let s = (config.zeta / 2.0).sin();
    let (w00, w11) = if label == 1 { (c, s) } else { (s, -c) };
    let chi2 = [config.phi.cos(), config.phi.sin()];
    let mut amps = [Complex64::ZERO; 8];
    amps[0b000] = c64(w00, 0.0);
    amps[0b110] = c64(w11 * chi2[0], 0.0);
    amps[0b111] = c64(w11 * chi2[1], 0.0);
    amps
}

/// Intercept-resend on the second holder's qubit: measure it in `dir`,
/// sample the outcome from the exact marginal, and replace the qubit by
/// the outcome eigenstate.
fn apply_eve(
    amps: &[Complex64; 8],
    dir: &BlochDirection,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> [Complex64; 8] {
    let mut branches = Vec::with_capacity(2);
    let mut probs = [0.0; 2];
    for e in 0..2u8 {
        let spinor = ProjectorPair::eigenstate(dir, e);
        let rest = contract_qubit(amps, 3, 2, &spinor);
        probs[e as usize] = rest.iter().map(|a| a.norm_sqr()).sum();
        branches.push((spinor, rest));
    }
    let e = sample_cell(rng, &probs);
    let (spinor, rest) = &branches[e];
    let norm = probs[e].sqrt();
    let mut out = [Complex64::ZERO; 8];
    for (x, amp) in rest.iter().enumerate() {
        for bit in 0..2usize {
            out[insert_bit(x, 2, bit, 3)] += amp * spinor[bit] / norm;
        }
    }
    out
}

fn simulate_run(config: &QcaConfig, run: u64, inspected: &[bool]) -> QcaRun {
    let seed = config.seed;
    let label = if lane_rng(seed, run, LANE_SOURCE).random::<f64>() < config.nu1 {
        1
    } else {
        2
    };
    let a_basis = if lane_rng(seed, run, LANE_ALICE).random_range(0..2u8) == 0 {
        AbBasis::Z
    } else {
        AbBasis::X
    };
    let b_basis = if lane_rng(seed, run, LANE_BOB).random_range(0..2u8) == 0 {
        AbBasis::Z
    } else {
        AbBasis::X
    };
    let c_basis = if lane_rng(seed, run, LANE_CHARLIE).random_range(0..2u8) == 0 {
        ChiBasis::Chi1
    } else {
        ChiBasis::Chi2
    };

    let mut amps = family_amplitudes(config, label);
    if config.eve == EveModel::InterceptResend {
        let mut eve_rng = lane_rng(seed, run, LANE_EVE);
        let dir = if eve_rng.random_range(0..2u8) == 0 {
            BlochDirection::z()
        } else {
            BlochDirection::x()
        };
        amps = apply_eve(&amps, &dir, &mut eve_rng);
    }

    let dirs = [
        a_basis.direction(),
        b_basis.direction(),
        c_basis.direction(config.phi),
    ];
    let mut cells = [0.0; 8];
    for a in 0..2u8 {
        let ra = contract_qubit(&amps, 3, 1, &ProjectorPair::eigenstate(&dirs[0], a));
        for b in 0..2u8 {
            let rb = contract_qubit(&ra, 2, 1, &ProjectorPair::eigenstate(&dirs[1], b));
            for c in 0..2u8 {
                let amp = contract_qubit(&rb, 1, 1, &ProjectorPair::eigenstate(&dirs[2], c))[0];
                cells[((a as usize) << 2) | ((b as usize) << 1) | c as usize] = amp.norm_sqr();
            }
        }
    }
    let cell = sample_cell(&mut lane_rng(seed, run, LANE_MEASURE), &cells);

    QcaRun {
        record: RunRecord {
            run,
            label,
            bases: vec![a_basis.name(), b_basis.name(), c_basis.name()],
            outcomes: vec![(cell >> 2) as u8, ((cell >> 1) & 1) as u8, (cell & 1) as u8],
            broadcast: inspected[run as usize],
        },
        a_basis,
        b_basis,
        c_basis,
    }
}

fn summarize(config: &QcaConfig, runs: &[QcaRun]) -> QcaSummary {
    let mut z_runs = 0u64;
    let mut x_runs = 0u64;
    let mut inspected = 0u64;
    let mut inspected_z = 0u64;
    let mut z_mismatches = 0u64;
    let mut chi_checks = 0u64;
    let mut chi_failures = 0u64;
    let mut coincidences = 0u64;
    let mut sifted = 0u64;
    for r in runs {
        if r.record.broadcast {
            inspected += 1;
        }
        let a = r.record.outcomes[0];
        let b = r.record.outcomes[1];
        let c = r.record.outcomes[2];
        match (r.a_basis, r.b_basis) {
            (AbBasis::Z, AbBasis::Z) => {
                z_runs += 1;
                if !r.record.broadcast {
                    sifted += 1;
                    continue;
                }
                inspected_z += 1;
                if a != b {
                    z_mismatches += 1;
                } else if (a == 0 && r.c_basis == ChiBasis::Chi1)
                    || (a == 1 && r.c_basis == ChiBasis::Chi2)
                {
                    chi_checks += 1;
                    if c != 0 {
                        chi_failures += 1;
                    }
                }
            }
            (AbBasis::X, AbBasis::X) => {
                x_runs += 1;
                if a == b {
                    coincidences += 1;
                }
            }
            _ => {}
        }
    }
    let x_coincidence = if x_runs == 0 {
        0.0
    } else {
        coincidences as f64 / x_runs as f64
    };
    let p_value = if x_runs == 0 {
        1.0
    } else {
        let n = x_runs as f64;
        let dev = (coincidences as f64 - 0.5 * n) / (0.25 * n).sqrt();
        let normal = Normal::new(0.0, 1.0).expect("standard normal");
        (2.0 * (1.0 - normal.cdf(dev.abs()))).clamp(0.0, 1.0)
    };
    let steering_verdict = z_mismatches == 0 && chi_failures == 0;
    let entanglement_verdict = x_runs > 0 && p_value < config.alpha;
    QcaSummary {
        runs: runs.len() as u64,
        inspected,
        z_runs,
        x_runs,
        inspected_z_runs: inspected_z,
        z_mismatches,
        chi_checks,
        chi_failures,
        x_coincidence,
        expected_x_coincidence: qca_coincidence_closed_form(config.nu1, config.zeta, config.phi)
            .expect("config validated"),
        p_value,
        steering_verdict,
        entanglement_verdict,
        accept: steering_verdict && entanglement_verdict,
        sifted_key_len: sifted,
    }
}

fn run_impl(config: &QcaConfig, exec: Exec) -> Result<ProtocolTranscript<QcaSummary>> {
    config.validate()?;
    let inspected = exact_subset_flags(
        &mut global_rng(config.seed, config.runs, LANE_INSPECT),
        config.runs,
        config.inspection_size,
    );
    let runs = map_indexed(exec, config.runs, |run| {
        simulate_run(config, run, &inspected)
    });
    let summary = summarize(config, &runs);
    Ok(ProtocolTranscript {
        records: runs.into_iter().map(|r| r.record).collect(),
        summary,
    })
}

pub fn run_qca(config: &QcaConfig) -> Result<ProtocolTranscript<QcaSummary>> {
    run_impl(config, Exec::auto())
}

pub fn run_qca_seq(config: &QcaConfig) -> Result<ProtocolTranscript<QcaSummary>> {
    run_impl(config, Exec::Seq)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocols::records_to_jsonl;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_3};

    fn base_config() -> QcaConfig {
        QcaConfig {
            nu1: 0.7,
            zeta: FRAC_PI_2,
            phi: FRAC_PI_3,
            runs: 4000,
            inspection_size: 400,
            seed: 3,
            eve: EveModel::None,
            allow_orthogonal_tails: false,
            alpha: 1e-6,
        }
    }

    #[test]
    fn honest_run_accepts() {
        let out = run_qca(&base_config()).unwrap();
        let s = &out.summary;
        assert!(s.steering_verdict);
        assert_eq!(s.z_mismatches, 0);
        assert_eq!(s.chi_failures, 0);
        assert!(s.chi_checks > 0);
        assert!(s.entanglement_verdict, "p = {}", s.p_value);
        assert!(s.accept);
        assert_eq!(s.inspected, 400);
        assert_eq!(
            out.records.iter().filter(|r| r.broadcast).count() as u64,
            400
        );
        let sigma = (0.6 * 0.4 / s.x_runs as f64).sqrt();
        assert!(
            (s.x_coincidence - 0.6).abs() < 5.0 * sigma,
            "coincidence {} too far from 0.6",
            s.x_coincidence
        );
        assert_eq!(s.sifted_key_len + s.inspected_z_runs, s.z_runs);
    }

    #[test]
    fn unentangled_source_is_rejected() {
        let out = run_qca(&QcaConfig {
            nu1: 0.5,
            ..base_config()
        })
        .unwrap();
        let s = &out.summary;
        // The equal-weight mixture is exactly z-correlated, so steering
        // checks still pass; the coincidence test is what fails.
        assert!(s.steering_verdict);
        assert!(!s.entanglement_verdict);
        assert!(!s.accept);
        assert_eq!(s.expected_x_coincidence, 0.5);
    }

    #[test]
    fn intercept_resend_breaks_z_agreement_only() {
        let out = run_qca(&QcaConfig {
            eve: EveModel::InterceptResend,
            inspection_size: 2000,
            ..base_config()
        })
        .unwrap();
        let s = &out.summary;
        assert!(s.z_mismatches > 0);
        // A second-holder attack cannot disturb the dealer's tail
        // projections, which is why z agreement is part of the verdict.
        assert_eq!(s.chi_failures, 0);
        assert!(!s.steering_verdict);
        assert!(!s.accept);
    }

    #[test]
    fn transcripts_are_deterministic_and_backend_independent() {
        let cfg = QcaConfig {
            runs: 800,
            inspection_size: 77,
            ..base_config()
        };
        let a = run_qca(&cfg).unwrap();
        let b = run_qca_seq(&cfg).unwrap();
        assert_eq!(a.records, b.records);
        assert_eq!(a.summary, b.summary);
        assert_eq!(records_to_jsonl(&a.records), records_to_jsonl(&b.records));
        assert_eq!(a.records.iter().filter(|r| r.broadcast).count(), 77);
    }

    #[test]
    fn config_validation() {
        let bad_m = QcaConfig {
            inspection_size: 5000,
            ..base_config()
        };
        assert!(run_qca(&bad_m).is_err());
        let zero_m = QcaConfig {
            inspection_size: 0,
            ..base_config()
        };
        assert!(run_qca(&zero_m).is_err());
        let orth = QcaConfig {
            phi: FRAC_PI_2,
            ..base_config()
        };
        assert!(run_qca(&orth).is_err());
        let forced = QcaConfig {
            phi: FRAC_PI_2,
            allow_orthogonal_tails: true,
            ..base_config()
        };
        assert!(run_qca(&forced).is_ok());
    }
}
