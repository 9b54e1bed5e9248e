//! Built-in functional catalog and the reference measurement settings
//! under which the closed forms in [`super::closed`] hold.

use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{Error, Result};
use crate::qcore::{BlochDirection, MAX_QUBITS};

use super::{BellFunctional, SettingsTable, Term};

/// The functionals this crate knows how to build.
///
/// `Composite { prefix_len }` prepends a success probability
/// `p(0..0 | 1..1)` over the first `prefix_len` parties to the Hardy-type
/// functional on the remaining parties. `prefix_len = 0` recovers the plain
/// Hardy family; `Hardy3` is the three-party special case. `EvenN` / `OddN`
/// are the parity-split correlator families (`OddN` with `n = 3` is `I3`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FunctionalKind {
    Chsh,
    Hardy3,
    I3,
    HardyN,
    Composite { prefix_len: usize },
    EvenN,
    OddN,
}

fn check_parties(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "a Bell functional needs at least two parties, got {n}"
        )));
    }
    if n > MAX_QUBITS {
        return Err(Error::Capacity { requested: n, max: MAX_QUBITS, unit: "parties" });
    }
    Ok(())
}

/// Hardy-type terms on parties `prefix_len+1 ..= n`, conditioned on the
/// first `prefix_len` parties all showing outcome 0 under their label-1
/// setting. Bound 0.
fn hardy_terms(n: usize, prefix_len: usize) -> Vec<(f64, Term)> {
    let mut terms = Vec::with_capacity(n - prefix_len + 2);
    terms.push((1.0, Term::Probability { outcomes: vec![0; n], labels: vec![1; n] }));
    let mut outcomes = vec![0u8; n];
    let mut labels = vec![1u8; n];
    for k in prefix_len..n {
        outcomes[k] = 1;
        labels[k] = 2;
    }
    terms.push((-1.0, Term::Probability { outcomes, labels }));
    for k in prefix_len..n {
        let mut labels = vec![1u8; n];
        labels[k] = 2;
        terms.push((-1.0, Term::Probability { outcomes: vec![0; n], labels }));
    }
    terms
}

/// Correlator family for even `n`: every label vector in `{1,2}^n` enters
/// with weight `1/2^(n-1)`, and the all-2 correlator is additionally
/// subtracted with weight 1. Bound 1. For `n = 2` this is CHSH.
fn even_terms(n: usize) -> Vec<(f64, Term)> {
    let weight = 0.5f64.powi(n as i32 - 1);
    let count = 1usize << n;
    let mut terms = Vec::with_capacity(count);
    for idx in 0..count {
        let labels: Vec<u8> = (0..n).map(|k| 1 + ((idx >> (n - 1 - k)) & 1) as u8).collect();
        let coeff = if idx == count - 1 { weight - 1.0 } else { weight };
        terms.push((coeff, Term::Correlator { labels }));
    }
    terms
}

/// Correlator family for odd `n`: the first `n-1` parties range over labels
/// `{1,2}`, the last over `{1, 0}` (0 = unmeasured), all with weight
/// `1/2^(n-1)`; the `(2,..,2,0)` correlator is additionally subtracted with
/// weight 1. Bound 1.
fn odd_terms(n: usize) -> Vec<(f64, Term)> {
    let weight = 0.5f64.powi(n as i32 - 1);
    let count = 1usize << (n - 1);
    let mut terms = Vec::with_capacity(2 * count);
    for last in [1u8, 0] {
        for idx in 0..count {
            let mut labels: Vec<u8> =
                (0..n - 1).map(|k| 1 + ((idx >> (n - 2 - k)) & 1) as u8).collect();
            labels.push(last);
            let coeff = if last == 0 && idx == count - 1 { weight - 1.0 } else { weight };
            terms.push((coeff, Term::Correlator { labels }));
        }
    }
    terms
}

/// Construct one of the built-in functionals for an `n`-party scenario.
///
/// Arity rules: `chsh` needs `n = 2`; `hardy3` and `i3` need `n = 3`;
/// `hardyN` needs `n >= 3`; `composite(r)` needs `r <= n - 2` (the Hardy
/// block must keep at least two parties); `evenN` needs even `n`; `oddN`
/// needs odd `n >= 3`.
pub fn build_functional(kind: FunctionalKind, n: usize) -> Result<BellFunctional> {
    check_parties(n)?;
    match kind {
        FunctionalKind::Chsh => {
            if n != 2 {
                return Err(Error::InvalidArgument(format!("chsh needs n = 2, got {n}")));
            }
            let terms = even_terms(2);
            BellFunctional::new("chsh", 2, terms, 1.0)
        }
        FunctionalKind::Hardy3 => {
            if n != 3 {
                return Err(Error::InvalidArgument(format!("hardy3 needs n = 3, got {n}")));
            }
            BellFunctional::new("hardy3", 3, hardy_terms(3, 0), 0.0)
        }
        FunctionalKind::I3 => {
            if n != 3 {
                return Err(Error::InvalidArgument(format!("i3 needs n = 3, got {n}")));
            }
            BellFunctional::new("i3", 3, odd_terms(3), 1.0)
        }
        FunctionalKind::HardyN => {
            if n < 3 {
                return Err(Error::InvalidArgument(format!(
                    "the Hardy family needs n >= 3, got {n}; use composite(0) for n = 2"
                )));
            }
            BellFunctional::new(format!("hardy{n}"), n, hardy_terms(n, 0), 0.0)
        }
        FunctionalKind::Composite { prefix_len } => {
            if prefix_len + 2 > n {
                return Err(Error::InvalidArgument(format!(
                    "composite prefix {prefix_len} leaves fewer than two Hardy parties of {n}"
                )));
            }
            BellFunctional::new(
                format!("composite{n}r{prefix_len}"),
                n,
                hardy_terms(n, prefix_len),
                0.0,
            )
        }
        FunctionalKind::EvenN => {
            if n % 2 != 0 {
                return Err(Error::InvalidArgument(format!("evenN needs even n, got {n}")));
            }
            BellFunctional::new(format!("i{n}"), n, even_terms(n), 1.0)
        }
        FunctionalKind::OddN => {
            if n % 2 == 0 || n < 3 {
                return Err(Error::InvalidArgument(format!("oddN needs odd n >= 3, got {n}")));
            }
            BellFunctional::new(format!("i{n}"), n, odd_terms(n), 1.0)
        }
    }
}

fn finite_angle(value: f64, what: &str) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::InvalidArgument(format!("{what} must be finite")))
    }
}

/// The measurement settings under which the closed forms of
/// [`super::closed`] describe the corresponding family state.
///
/// `free_angle` is the single free parameter of each reference family:
/// the second Bob angle for `chsh`, the label-2 polar angle of the two
/// steering parties for the Hardy/composite kinds, and the first party's
/// label-1 polar angle for the parity families. `tau` is the family phase;
/// it is absorbed by an azimuthal shift on the second (respectively second
/// steering) party.
pub fn reference_settings(
    kind: FunctionalKind,
    n: usize,
    free_angle: f64,
    tau: f64,
) -> Result<SettingsTable> {
    check_parties(n)?;
    let theta = finite_angle(free_angle, "free angle")?;
    let tau = finite_angle(tau, "tau")?;
    let z = BlochDirection::z();
    let parties = match kind {
        FunctionalKind::Chsh => {
            if n != 2 {
                return Err(Error::InvalidArgument(format!("chsh needs n = 2, got {n}")));
            }
            vec![
                vec![z, BlochDirection::new(FRAC_PI_2, tau)],
                vec![BlochDirection::new(theta, 0.0), BlochDirection::new(theta, PI)],
            ]
        }
        FunctionalKind::Hardy3 | FunctionalKind::HardyN | FunctionalKind::Composite { .. } => {
            let prefix_len = match kind {
                FunctionalKind::Composite { prefix_len } => prefix_len,
                _ => 0,
            };
            if prefix_len + 2 > n {
                return Err(Error::InvalidArgument(format!(
                    "composite prefix {prefix_len} leaves fewer than two Hardy parties of {n}"
                )));
            }
            if kind == FunctionalKind::Hardy3 && n != 3 {
                return Err(Error::InvalidArgument(format!("hardy3 needs n = 3, got {n}")));
            }
            let mut parties = Vec::with_capacity(n);
            for _ in 0..prefix_len {
                parties.push(vec![BlochDirection::x()]);
            }
            parties.push(vec![z, BlochDirection::new(theta, FRAC_PI_2)]);
            parties.push(vec![z, BlochDirection::new(theta, FRAC_PI_2 + tau)]);
            for _ in prefix_len + 2..n {
                parties.push(vec![z, BlochDirection::new(PI, 0.0)]);
            }
            parties
        }
        FunctionalKind::EvenN => {
            if n % 2 != 0 {
                return Err(Error::InvalidArgument(format!("evenN needs even n, got {n}")));
            }
            let mut parties = Vec::with_capacity(n);
            parties.push(vec![
                BlochDirection::new(theta, 0.0),
                BlochDirection::new(PI, 0.0),
            ]);
            parties.push(vec![
                BlochDirection::new(PI - theta, tau),
                BlochDirection::new(0.0, tau),
            ]);
            for _ in 2..n {
                parties.push(vec![
                    BlochDirection::new(PI - theta, 0.0),
                    BlochDirection::new(0.0, 0.0),
                ]);
            }
            parties
        }
        FunctionalKind::I3 | FunctionalKind::OddN => {
            if n % 2 == 0 || n < 3 {
                return Err(Error::InvalidArgument(format!("oddN needs odd n >= 3, got {n}")));
            }
            if kind == FunctionalKind::I3 && n != 3 {
                return Err(Error::InvalidArgument(format!("i3 needs n = 3, got {n}")));
            }
            let mut parties = Vec::with_capacity(n);
            parties.push(vec![BlochDirection::new(theta, 0.0), z]);
            parties.push(vec![
                BlochDirection::new(FRAC_PI_2, tau),
                BlochDirection::new(PI, tau),
            ]);
            for _ in 2..n {
                parties.push(vec![
                    BlochDirection::new(FRAC_PI_2, 0.0),
                    BlochDirection::new(PI, 0.0),
                ]);
            }
            parties
        }
    };
    SettingsTable::new(parties)
}
