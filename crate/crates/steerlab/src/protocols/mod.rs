//! Monte-Carlo simulations of the two applications built on the rank-2
//! family: a three-party key-scrambling protocol (the dealer's state
//! label is the share that unlocks the key) and a certificate check in
//! which the dealer verifies steering and entanglement from a random
//! inspection subset.
//!
//! Both simulators sample every run from the exact joint outcome
//! distribution of the underlying pure state, so structurally forbidden
//! events (z-basis disagreement, failed tail projections) have sampling
//! probability exactly zero, not merely a small one.
//!
//! Randomness: one ChaCha8 generator per (run, lane), derived from the
//! config seed via stream splitting. Runs are therefore independent and
//! the parallel and sequential drivers produce byte-identical
//! transcripts.

mod qca;
mod rng;
mod third_man;

pub use qca::{run_qca, run_qca_seq, EveModel, QcaConfig, QcaSummary};
pub use third_man::{run_third_man, run_third_man_seq, ThirdManConfig, ThirdManSummary};

use serde::{Deserialize, Serialize};

use crate::bell::{correlator, SettingsTable};
use crate::error::Result;
use crate::qcore::BlochDirection;
use crate::states::{make_rho2, TwoQubitFamilyParams};

/// One protocol run: the dealer's hidden state label, every party's basis
/// name and outcome, and whether the run was broadcast for inspection.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run: u64,
    pub label: u8,
    pub bases: Vec<String>,
    pub outcomes: Vec<u8>,
    pub broadcast: bool,
}

/// Full simulation output: per-run records plus a protocol-specific
/// summary.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProtocolTranscript<S> {
    pub records: Vec<RunRecord>,
    pub summary: S,
}

/// Render records as JSON lines, one run per line.
pub fn records_to_jsonl(records: &[RunRecord]) -> String {
    let mut out = String::new();
    for record in records {
        out.push_str(&serde_json::to_string(record).expect("record serialization is infallible"));
        out.push('\n');
    }
    out
}

/// Sum of the four squared equatorial correlators
/// `sum_{i,j in {x,y}} Q_ij^2`, computed through the trace primitive.
/// At `zeta = pi/2`, `tau = 0` this is `2 V^2`, crossing the classical
/// threshold 1 exactly at `|V| = 1/sqrt(2)`.
pub fn horodecki_xy_value(params: &TwoQubitFamilyParams) -> f64 {
    let rho = make_rho2(params);
    let settings = SettingsTable::new(vec![
        vec![BlochDirection::x(), BlochDirection::y()],
        vec![BlochDirection::x(), BlochDirection::y()],
    ])
    .expect("two fixed directions per party");
    let mut total = 0.0;
    for i in 1..=2u8 {
        for j in 1..=2u8 {
            let q = correlator(&rho, &settings, &[i, j])
                .expect("settings cover both labels");
            total += q * q;
        }
    }
    total
}

/// Probability that the two pair holders get equal x outcomes on the
/// three-qubit family with tails `|0>` and `cos(phi)|0> + sin(phi)|1>`:
/// `(1 + V cos(phi) sin(zeta)) / 2`.
pub fn qca_coincidence_closed_form(nu1: f64, zeta: f64, phi: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&nu1) || !nu1.is_finite() {
        return Err(crate::Error::InvalidArgument(format!(
            "nu1 must lie in [0, 1], got {nu1}"
        )));
    }
    if !zeta.is_finite() || !phi.is_finite() {
        return Err(crate::Error::InvalidArgument("angles must be finite".into()));
    }
    let v = 2.0 * nu1 - 1.0;
    Ok(0.5 * (1.0 + v * phi.cos() * zeta.sin()))
}

/// Binary entropy in bits; 0 at the endpoints.
pub(crate) fn binary_entropy(p: f64) -> f64 {
    if p <= 0.0 || p >= 1.0 {
        return 0.0;
    }
    -(p * p.log2() + (1.0 - p) * (1.0 - p).log2())
}

/// Key-rate estimate `1 - 2 h(qber)`; negative values mean no key
/// survives error correction and privacy amplification.
pub fn key_rate_estimate(qber: f64) -> f64 {
    1.0 - 2.0 * binary_entropy(qber)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bell::joint_probability;
    use crate::states::{composite_family, make_rho_n};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn horodecki_frozen_points() {
        let p = TwoQubitFamilyParams::new(1.0, FRAC_PI_2, 0.0).unwrap();
        assert_relative_eq!(horodecki_xy_value(&p), 2.0, epsilon = 1e-12);
        let p = TwoQubitFamilyParams::new(0.5, FRAC_PI_2, 0.0).unwrap();
        assert_relative_eq!(horodecki_xy_value(&p), 0.0, epsilon = 1e-12);
        let nu1 = (1.0 + std::f64::consts::FRAC_1_SQRT_2) / 2.0;
        let p = TwoQubitFamilyParams::new(nu1, FRAC_PI_2, 0.0).unwrap();
        assert_relative_eq!(horodecki_xy_value(&p), 1.0, epsilon = 1e-10);
    }

    #[test]
    fn horodecki_closed_form_at_general_angles() {
        // 2 V^2 sin^2(zeta) for the family at any tau.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let p = TwoQubitFamilyParams::new(
                rng.random(),
                rng.random_range(0.0..std::f64::consts::PI),
                rng.random_range(0.0..std::f64::consts::TAU),
            )
            .unwrap();
            let want = 2.0 * (p.v() * p.zeta().sin()).powi(2);
            assert_relative_eq!(horodecki_xy_value(&p), want, epsilon = 1e-10);
        }
    }

    #[test]
    fn coincidence_closed_form_matches_trace() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = BlochDirection::x();
        for _ in 0..20 {
            let nu1 = rng.random();
            let zeta = rng.random_range(0.0..std::f64::consts::PI);
            let phi = rng.random_range(0.0..std::f64::consts::TAU);
            let fam = composite_family(3, 0, nu1, zeta, 0.0, &[phi.cos()]).unwrap();
            // The tail direction only enters through cos(phi), so the
            // family with tail coefficient cos(phi) is the right state.
            let rho = make_rho_n(&fam);
            let settings =
                SettingsTable::new(vec![vec![x], vec![x], vec![BlochDirection::z()]]).unwrap();
            let same = joint_probability(&rho, &settings, &[0, 0, 0], &[1, 1, 0]).unwrap()
                + joint_probability(&rho, &settings, &[1, 1, 0], &[1, 1, 0]).unwrap();
            let want = qca_coincidence_closed_form(nu1, zeta, phi).unwrap();
            assert_relative_eq!(same, want, epsilon = 1e-10);
        }
        assert_relative_eq!(
            qca_coincidence_closed_form(0.7, FRAC_PI_2, std::f64::consts::FRAC_PI_3).unwrap(),
            0.6,
            epsilon = 1e-12
        );
        assert_relative_eq!(qca_coincidence_closed_form(0.5, 1.0, 1.0).unwrap(), 0.5);
    }

    #[test]
    fn key_rate_endpoints() {
        assert_relative_eq!(key_rate_estimate(0.0), 1.0);
        assert_relative_eq!(key_rate_estimate(0.5), -1.0);
        assert!(key_rate_estimate(0.11) > 0.0);
        assert!(key_rate_estimate(0.12) < 0.0);
    }

    #[test]
    fn jsonl_round_trips() {
        let records = vec![
            RunRecord {
                run: 0,
                label: 1,
                bases: vec!["x".into(), "z".into()],
                outcomes: vec![0, 1],
                broadcast: true,
            },
            RunRecord {
                run: 1,
                label: 2,
                bases: vec!["y".into(), "y".into()],
                outcomes: vec![1, 1],
                broadcast: false,
            },
        ];
        let text = records_to_jsonl(&records);
        let back: Vec<RunRecord> = text
            .lines()
            .map(|line| serde_json::from_str(line).unwrap())
            .collect();
        assert_eq!(records, back);
        let first = text.lines().next().unwrap();
        assert!(first.contains("\"run\":0"));
        assert!(first.contains("\"label\":1"));
        assert!(first.contains("\"broadcast\":true"));
    }
}
