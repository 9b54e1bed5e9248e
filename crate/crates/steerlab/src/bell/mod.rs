//! Multipartite Bell functionals: evaluation against density matrices,
//! the built-in functional catalog with closed forms and reference
//! settings, and a derivative-free settings optimizer.
//!
//! A functional is a linear combination of two kinds of terms over an
//! `n`-party scenario in which party `k` chooses a measurement label:
//!
//! * correlator terms `<prod_k X_{k, label_k}>`, where `X` is the +-1-valued
//!   outcome of the chosen setting and label 0 leaves a party unmeasured
//!   (its factor is 1);
//! * joint-probability terms `p(outcomes | labels)`, where parties with
//!   label 0 are marginalized away.
//!
//! Settings give each party a list of Bloch directions indexed by label
//! (1-based). Outcome 0 always projects onto the `+n` eigenstate.

mod catalog;
mod closed;
mod optimize;

pub use catalog::{build_functional, reference_settings, FunctionalKind};
pub use closed::{
    chsh_best_angle, chsh_max_closed_form, chsh_value, composite_closed_form,
    composite_witness_angle, even_n_best_angle, even_n_closed_form, hardy3_closed_form,
    hardy3_witness_angle, i3_closed_form, odd_n_best_angle, odd_n_closed_form,
};
pub use optimize::{optimize_settings, optimize_settings_seq, OptimizeOptions, OptimizeOutcome};

use nalgebra::Matrix2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qcore::{
    pauli_observable, trace_product_tensor, BlochDirection, DensityMatrix, ProjectorPair,
    MAX_QUBITS,
};

/// Tolerance added to the classical bound before declaring violation.
pub const VIOLATION_TOL: f64 = 1e-10;

/// Measurement directions per party, indexed by 1-based label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SettingsTable {
    parties: Vec<Vec<BlochDirection>>,
}

impl SettingsTable {
    /// Each party needs at least one direction; at most [`MAX_QUBITS`]
    /// parties.
    pub fn new(parties: Vec<Vec<BlochDirection>>) -> Result<Self> {
        if parties.is_empty() {
            return Err(Error::InvalidArgument("settings need at least one party".into()));
        }
        if parties.len() > MAX_QUBITS {
            return Err(Error::Capacity {
                requested: parties.len(),
                max: MAX_QUBITS,
                unit: "parties",
            });
        }
        if parties.iter().any(|p| p.is_empty()) {
            return Err(Error::InvalidArgument(
                "every party needs at least one direction".into(),
            ));
        }
        Ok(Self { parties })
    }

    pub fn n_parties(&self) -> usize {
        self.parties.len()
    }

    /// Directions of a party (1-based).
    pub fn directions(&self, party: usize) -> Result<&[BlochDirection]> {
        self.parties
            .get(party.wrapping_sub(1))
            .map(|v| v.as_slice())
            .ok_or_else(|| Error::Dimension(format!("party {party} has no settings")))
    }

    /// Direction for `party` and 1-based `label`.
    pub fn direction(&self, party: usize, label: u8) -> Result<&BlochDirection> {
        if label == 0 {
            return Err(Error::InvalidArgument("label 0 means unmeasured".into()));
        }
        self.directions(party)?
            .get(label as usize - 1)
            .ok_or_else(|| {
                Error::Dimension(format!("party {party} has no setting labeled {label}"))
            })
    }

    pub fn parties(&self) -> &[Vec<BlochDirection>] {
        &self.parties
    }
}

/// One term of a functional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Term {
    /// `<prod_k X_{k, label_k}>`; label 0 contributes a factor 1.
    Correlator { labels: Vec<u8> },
    /// `p(outcomes | labels)`; parties with label 0 are marginalized and
    /// their outcome entry must be 0.
    Probability { outcomes: Vec<u8>, labels: Vec<u8> },
}

impl Term {
    pub fn labels(&self) -> &[u8] {
        match self {
            Term::Correlator { labels } => labels,
            Term::Probability { labels, .. } => labels,
        }
    }
}

/// A named linear combination of terms together with its classical bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BellFunctional {
    name: String,
    n_parties: usize,
    terms: Vec<(f64, Term)>,
    classical_bound: f64,
}

impl BellFunctional {
    /// Labels may run up to 2 (or 0 for unmeasured); probability outcomes
    /// must be bits and must be 0 on unmeasured parties.
    pub fn new(
        name: impl Into<String>,
        n_parties: usize,
        terms: Vec<(f64, Term)>,
        classical_bound: f64,
    ) -> Result<Self> {
        if n_parties == 0 || n_parties > MAX_QUBITS {
            return Err(Error::InvalidArgument(format!(
                "party count must lie in [1, {MAX_QUBITS}], got {n_parties}"
            )));
        }
        if terms.is_empty() {
            return Err(Error::InvalidArgument("a functional needs at least one term".into()));
        }
        if !classical_bound.is_finite() {
            return Err(Error::InvalidArgument("classical bound must be finite".into()));
        }
        for (coeff, term) in &terms {
            if !coeff.is_finite() {
                return Err(Error::InvalidArgument("coefficients must be finite".into()));
            }
            let labels = term.labels();
            if labels.len() != n_parties {
                return Err(Error::Dimension(format!(
                    "term labels cover {} parties, expected {n_parties}",
                    labels.len()
                )));
            }
            if labels.iter().any(|&l| l > 2) {
                return Err(Error::InvalidArgument(
                    "labels beyond 2 are not supported".into(),
                ));
            }
            if let Term::Probability { outcomes, labels } = term {
                if outcomes.len() != n_parties {
                    return Err(Error::Dimension(format!(
                        "term outcomes cover {} parties, expected {n_parties}",
                        outcomes.len()
                    )));
                }
                if outcomes.iter().any(|&o| o > 1) {
                    return Err(Error::InvalidArgument("outcomes must be 0 or 1".into()));
                }
                for (o, l) in outcomes.iter().zip(labels) {
                    if *l == 0 && *o != 0 {
                        return Err(Error::InvalidArgument(
                            "unmeasured parties take outcome 0 in the term encoding".into(),
                        ));
                    }
                }
            }
        }
        Ok(Self { name: name.into(), n_parties, terms, classical_bound })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn n_parties(&self) -> usize {
        self.n_parties
    }

    pub fn terms(&self) -> &[(f64, Term)] {
        &self.terms
    }

    /// The stated classical bound (certified independently by
    /// [`crate::lhv::verify_bound`]).
    pub fn classical_bound(&self) -> f64 {
        self.classical_bound
    }

    /// Highest label each party uses anywhere in the functional.
    pub fn max_labels(&self) -> Vec<u8> {
        let mut out = vec![0u8; self.n_parties];
        for (_, term) in &self.terms {
            for (k, &l) in term.labels().iter().enumerate() {
                out[k] = out[k].max(l);
            }
        }
        out
    }

    /// True when `value` exceeds the classical bound beyond
    /// [`VIOLATION_TOL`].
    pub fn violated_by(&self, value: f64) -> bool {
        value > self.classical_bound + VIOLATION_TOL
    }
}

fn check_compatible(
    functional_parties: usize,
    rho: &DensityMatrix,
    settings: &SettingsTable,
) -> Result<()> {
    if rho.n_qubits() != functional_parties {
        return Err(Error::Dimension(format!(
            "state covers {} qubits but the functional has {functional_parties} parties",
            rho.n_qubits()
        )));
    }
    if settings.n_parties() != functional_parties {
        return Err(Error::Dimension(format!(
            "settings cover {} parties but the functional has {functional_parties}",
            settings.n_parties()
        )));
    }
    Ok(())
}

/// `<prod_k X_{k, label_k}>` for the given labels (0 = unmeasured).
pub fn correlator(rho: &DensityMatrix, settings: &SettingsTable, labels: &[u8]) -> Result<f64> {
    if labels.len() != rho.n_qubits() || settings.n_parties() != rho.n_qubits() {
        return Err(Error::Dimension("labels must cover every qubit".into()));
    }
    let mut mats: Vec<Option<Matrix2<Complex64>>> = Vec::with_capacity(labels.len());
    for (k, &l) in labels.iter().enumerate() {
        if l == 0 {
            mats.push(None);
        } else {
            mats.push(Some(pauli_observable(settings.direction(k + 1, l)?)));
        }
    }
    Ok(trace_product_tensor(rho, &mats).re)
}

/// `p(outcomes | labels)`; parties with label 0 are marginalized and their
/// outcome entry must be 0.
pub fn joint_probability(
    rho: &DensityMatrix,
    settings: &SettingsTable,
    outcomes: &[u8],
    labels: &[u8],
) -> Result<f64> {
    let n = rho.n_qubits();
    if labels.len() != n || outcomes.len() != n || settings.n_parties() != n {
        return Err(Error::Dimension("outcomes and labels must cover every qubit".into()));
    }
    let mut mats: Vec<Option<Matrix2<Complex64>>> = Vec::with_capacity(n);
    for (k, (&l, &o)) in labels.iter().zip(outcomes).enumerate() {
        if o > 1 {
            return Err(Error::InvalidArgument("outcomes must be 0 or 1".into()));
        }
        if l == 0 {
            if o != 0 {
                return Err(Error::InvalidArgument(
                    "unmeasured parties take outcome 0 in the term encoding".into(),
                ));
            }
            mats.push(None);
        } else {
            let pair = ProjectorPair::new(*settings.direction(k + 1, l)?);
            mats.push(Some(*pair.outcome(o)));
        }
    }
    Ok(trace_product_tensor(rho, &mats).re)
}

/// Value of the functional on `rho` at the given settings.
pub fn evaluate(
    functional: &BellFunctional,
    rho: &DensityMatrix,
    settings: &SettingsTable,
) -> Result<f64> {
    check_compatible(functional.n_parties(), rho, settings)?;
    let mut total = 0.0;
    for (coeff, term) in functional.terms() {
        let value = match term {
            Term::Correlator { labels } => correlator(rho, settings, labels)?,
            Term::Probability { outcomes, labels } => {
                joint_probability(rho, settings, outcomes, labels)?
            }
        };
        total += coeff * value;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::{make_rho2, make_rho_n, TwoQubitFamilyParams};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_dir(rng: &mut ChaCha8Rng) -> BlochDirection {
        BlochDirection::new(
            rng.random_range(0.0..std::f64::consts::PI),
            rng.random_range(0.0..std::f64::consts::TAU),
        )
    }

    #[test]
    fn two_qubit_correlator_closed_form() {
        // Q = cos tA cos tB + V sin(zeta) sin tA sin tB cos(pA + pB - tau).
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..40 {
            let p = TwoQubitFamilyParams::new(
                rng.random(),
                rng.random_range(0.0..std::f64::consts::PI),
                rng.random_range(0.0..std::f64::consts::TAU),
            )
            .unwrap();
            let rho = make_rho2(&p);
            let a = random_dir(&mut rng);
            let b = random_dir(&mut rng);
            let settings = SettingsTable::new(vec![vec![a], vec![b]]).unwrap();
            let got = correlator(&rho, &settings, &[1, 1]).unwrap();
            let want = a.theta().cos() * b.theta().cos()
                + p.v()
                    * p.zeta().sin()
                    * a.theta().sin()
                    * b.theta().sin()
                    * (a.phi() + b.phi() - p.tau()).cos();
            assert_relative_eq!(got, want, epsilon = 1e-11);
        }
    }

    #[test]
    fn ghz_family_correlators_split_by_parity() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for &n in &[3usize, 4, 5] {
            let nu1: f64 = rng.random();
            let zeta: f64 = rng.random_range(0.0..std::f64::consts::PI);
            let tau: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            let fam = crate::states::ghz_family(n, nu1, zeta, tau).unwrap();
            let rho = make_rho_n(&fam);
            let dirs: Vec<BlochDirection> = (0..n).map(|_| random_dir(&mut rng)).collect();
            let settings = SettingsTable::new(dirs.iter().map(|d| vec![*d]).collect()).unwrap();
            let got = correlator(&rho, &settings, &vec![1; n]).unwrap();
            let v = 2.0 * nu1 - 1.0;
            let prod_cos: f64 = dirs.iter().map(|d| d.theta().cos()).product();
            let prod_sin: f64 = dirs.iter().map(|d| d.theta().sin()).product();
            let phase: f64 = dirs.iter().map(|d| d.phi()).sum::<f64>() - tau;
            let want = if n % 2 == 0 {
                prod_cos + v * zeta.sin() * prod_sin * phase.cos()
            } else {
                v * zeta.cos() * prod_cos + v * zeta.sin() * prod_sin * phase.cos()
            };
            assert_relative_eq!(got, want, epsilon = 1e-11);

            // Leaving the last party unmeasured drops its factor.
            let mut labels = vec![1u8; n];
            labels[n - 1] = 0;
            let got = correlator(&rho, &settings, &labels).unwrap();
            let prod_cos_rest: f64 =
                dirs[..n - 1].iter().map(|d| d.theta().cos()).product();
            // The reduced state of the first n-1 qubits is block diagonal;
            // only the cosine chain survives, weighted by parity.
            let want = if n % 2 == 0 {
                v * zeta.cos() * prod_cos_rest
            } else {
                prod_cos_rest
            };
            assert_relative_eq!(got, want, epsilon = 1e-11);
        }
    }

    #[test]
    fn probabilities_are_normalized_and_consistent() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let fam = crate::states::ghz_family(3, 0.7, 1.0, 0.5).unwrap();
        let rho = make_rho_n(&fam);
        let settings = SettingsTable::new(
            (0..3).map(|_| vec![random_dir(&mut rng), random_dir(&mut rng)]).collect(),
        )
        .unwrap();
        let labels = [1u8, 2, 1];
        let mut total = 0.0;
        for bits in 0..8u8 {
            let outcomes = [bits >> 2 & 1, bits >> 1 & 1, bits & 1];
            let p = joint_probability(&rho, &settings, &outcomes, &labels).unwrap();
            assert!(p >= -1e-12);
            total += p;
        }
        assert_relative_eq!(total, 1.0, epsilon = 1e-10);

        // Correlator equals the +-1-weighted sum of joint probabilities.
        let q = correlator(&rho, &settings, &labels).unwrap();
        let mut want = 0.0;
        for bits in 0..8u8 {
            let outcomes = [bits >> 2 & 1, bits >> 1 & 1, bits & 1];
            let sign: f64 = outcomes.iter().map(|&o| 1.0 - 2.0 * o as f64).product();
            want += sign * joint_probability(&rho, &settings, &outcomes, &labels).unwrap();
        }
        assert_relative_eq!(q, want, epsilon = 1e-11);
    }

    #[test]
    fn functional_validation() {
        let ok = BellFunctional::new(
            "demo",
            2,
            vec![(1.0, Term::Correlator { labels: vec![1, 1] })],
            1.0,
        );
        assert!(ok.is_ok());
        assert!(BellFunctional::new("demo", 2, vec![], 1.0).is_err());
        assert!(BellFunctional::new(
            "demo",
            2,
            vec![(1.0, Term::Correlator { labels: vec![1] })],
            1.0
        )
        .is_err());
        assert!(BellFunctional::new(
            "demo",
            2,
            vec![(1.0, Term::Correlator { labels: vec![3, 1] })],
            1.0
        )
        .is_err());
        assert!(BellFunctional::new(
            "demo",
            2,
            vec![(
                1.0,
                Term::Probability { outcomes: vec![1, 0], labels: vec![0, 1] }
            )],
            0.0
        )
        .is_err());
    }

    #[test]
    fn evaluate_is_linear_in_terms() {
        let p = TwoQubitFamilyParams::new(0.8, 1.2, 0.3).unwrap();
        let rho = make_rho2(&p);
        let settings = SettingsTable::new(vec![
            vec![BlochDirection::z(), BlochDirection::x()],
            vec![BlochDirection::new(1.0, 0.0), BlochDirection::new(1.0, 3.0)],
        ])
        .unwrap();
        let t1 = Term::Correlator { labels: vec![1, 1] };
        let t2 = Term::Probability { outcomes: vec![0, 0], labels: vec![2, 2] };
        let f1 = BellFunctional::new("a", 2, vec![(2.0, t1.clone())], 0.0).unwrap();
        let f2 = BellFunctional::new("b", 2, vec![(-3.0, t2.clone())], 0.0).unwrap();
        let f12 =
            BellFunctional::new("ab", 2, vec![(2.0, t1), (-3.0, t2)], 0.0).unwrap();
        let a = evaluate(&f1, &rho, &settings).unwrap();
        let b = evaluate(&f2, &rho, &settings).unwrap();
        let ab = evaluate(&f12, &rho, &settings).unwrap();
        assert_relative_eq!(a + b, ab, epsilon = 1e-12);
    }

    #[test]
    fn tail_overlap_enters_the_pair_correlator() {
        // For the n-qubit family, the equatorial pair correlator picks up
        // the real tail overlap <chi1|chi2>.
        let fam = crate::states::composite_family(4, 0, 0.9, 1.3, 0.0, &[0.6, 0.7]).unwrap();
        let rho = make_rho_n(&fam);
        let x = BlochDirection::x();
        let settings = SettingsTable::new(vec![
            vec![x],
            vec![x],
            vec![BlochDirection::z()],
            vec![BlochDirection::z()],
        ])
        .unwrap();
        let q = correlator(&rho, &settings, &[1, 1, 0, 0]).unwrap();
        let (c1, c2) = (fam.chi1().clone(), fam.chi2().clone());
        let overlap = c1.inner(&c2).unwrap().re;
        let want = fam.v() * fam.zeta().sin() * overlap;
        assert_relative_eq!(q, want, epsilon = 1e-11);
    }
}
