//! The rank-2 state families under study.
//!
//! The two-qubit family mixes two orthogonal superpositions of `|00>` and
//! `|11>`:
//!
//! ```text
//! |psi1> = cos(zeta/2)|00> + sin(zeta/2) e^{i tau}|11>
//! |psi2> = sin(zeta/2)|00> - cos(zeta/2) e^{i tau}|11>
//! rho    = nu1 |psi1><psi1| + (1 - nu1) |psi2><psi2|
//! ```
//!
//! The `n`-qubit extension attaches tail states to each branch:
//! `|psi1> = cos(zeta/2)|00>|chi1> + sin(zeta/2) e^{i tau}|11>|chi2>` (and
//! the orthogonal partner), keeping qubits 1 and 2 as the steering pair.
//! `V = nu1 - nu2 = 2 nu1 - 1` controls how much of the coherence survives
//! the mixing.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qcore::{c64, DensityMatrix, StateVector, MAX_QUBITS};

fn require_finite(name: &str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("{name} must be finite, got {value}")))
    }
}

fn require_unit_interval(name: &str, value: f64) -> Result<()> {
    require_finite(name, value)?;
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("{name} must lie in [0, 1], got {value}")))
    }
}

/// Parameters of the two-qubit family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoQubitFamilyParams {
    nu1: f64,
    zeta: f64,
    tau: f64,
}

impl TwoQubitFamilyParams {
    /// `nu1` must lie in `[0, 1]`; `zeta` and `tau` must be finite.
    pub fn new(nu1: f64, zeta: f64, tau: f64) -> Result<Self> {
        require_unit_interval("nu1", nu1)?;
        require_finite("zeta", zeta)?;
        require_finite("tau", tau)?;
        Ok(Self { nu1, zeta, tau })
    }

    pub fn nu1(&self) -> f64 {
        self.nu1
    }

    pub fn nu2(&self) -> f64 {
        1.0 - self.nu1
    }

    pub fn zeta(&self) -> f64 {
        self.zeta
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// Mixing contrast `V = nu1 - nu2`.
    pub fn v(&self) -> f64 {
        2.0 * self.nu1 - 1.0
    }

    /// Concurrence of the mixed state: `|V sin(zeta)|`.
    pub fn concurrence(&self) -> f64 {
        (self.v() * self.zeta.sin()).abs()
    }
}

/// The orthogonal pure branches `(|psi1>, |psi2>)` of the two-qubit family.
pub fn make_psi_pair(p: &TwoQubitFamilyParams) -> (StateVector, StateVector) {
    let (s, c) = (p.zeta / 2.0).sin_cos();
    let e = Complex64::from_polar(1.0, p.tau);
    let zero = Complex64::ZERO;
    let psi1 = StateVector::from_amplitudes(2, vec![c64(c, 0.0), zero, zero, e * s])
        .expect("normalized by construction");
    let psi2 = StateVector::from_amplitudes(2, vec![c64(s, 0.0), zero, zero, -e * c])
        .expect("normalized by construction");
    (psi1, psi2)
}

/// The mixed two-qubit state of the family.
pub fn make_rho2(p: &TwoQubitFamilyParams) -> DensityMatrix {
    let (psi1, psi2) = make_psi_pair(p);
    DensityMatrix::from_mixture(&[(p.nu1, psi1), (p.nu2(), psi2)])
        .expect("weights sum to one by construction")
}

/// Parameters of the `n`-qubit family: the steering pair plus two tail
/// states on the remaining `n - 2` qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct NQubitFamilyParams {
    n_qubits: usize,
    nu1: f64,
    zeta: f64,
    tau: f64,
    chi1: StateVector,
    chi2: StateVector,
}

impl NQubitFamilyParams {
    /// `n_qubits` must be at least 3 and at most [`MAX_QUBITS`]; the tails
    /// must each cover `n_qubits - 2` qubits.
    pub fn new(
        n_qubits: usize,
        nu1: f64,
        zeta: f64,
        tau: f64,
        chi1: StateVector,
        chi2: StateVector,
    ) -> Result<Self> {
        if n_qubits < 3 {
            return Err(Error::InvalidArgument(
                "the n-qubit family needs at least 3 qubits; use the two-qubit family below that"
                    .into(),
            ));
        }
        if n_qubits > MAX_QUBITS {
            return Err(Error::Capacity { requested: n_qubits, max: MAX_QUBITS, unit: "qubits" });
        }
        require_unit_interval("nu1", nu1)?;
        require_finite("zeta", zeta)?;
        require_finite("tau", tau)?;
        let tail = n_qubits - 2;
        if chi1.n_qubits() != tail || chi2.n_qubits() != tail {
            return Err(Error::Dimension(format!(
                "tail states must cover {tail} qubits, got {} and {}",
                chi1.n_qubits(),
                chi2.n_qubits()
            )));
        }
        Ok(Self { n_qubits, nu1, zeta, tau, chi1, chi2 })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn nu1(&self) -> f64 {
        self.nu1
    }

    pub fn nu2(&self) -> f64 {
        1.0 - self.nu1
    }

    pub fn zeta(&self) -> f64 {
        self.zeta
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn chi1(&self) -> &StateVector {
        &self.chi1
    }

    pub fn chi2(&self) -> &StateVector {
        &self.chi2
    }

    pub fn v(&self) -> f64 {
        2.0 * self.nu1 - 1.0
    }
}

/// The orthogonal pure branches of the `n`-qubit family.
pub fn make_psi_pair_n(p: &NQubitFamilyParams) -> (StateVector, StateVector) {
    let (s, c) = (p.zeta / 2.0).sin_cos();
    let e = Complex64::from_polar(1.0, p.tau);
    let b00 = StateVector::basis_state(2, 0).expect("two qubits in range");
    let b11 = StateVector::basis_state(2, 3).expect("two qubits in range");
    let t1 = b00.tensor(&p.chi1).expect("within capacity");
    let t2 = b11.tensor(&p.chi2).expect("within capacity");
    let psi1 = StateVector::superposition(&[(c64(c, 0.0), &t1), (e * s, &t2)])
        .expect("normalized by construction");
    let psi2 = StateVector::superposition(&[(c64(s, 0.0), &t1), (-e * c, &t2)])
        .expect("normalized by construction");
    (psi1, psi2)
}

/// The mixed `n`-qubit state of the family.
pub fn make_rho_n(p: &NQubitFamilyParams) -> DensityMatrix {
    let (psi1, psi2) = make_psi_pair_n(p);
    DensityMatrix::from_mixture(&[(p.nu1, psi1), (p.nu2(), psi2)])
        .expect("weights sum to one by construction")
}

/// Product tail `(f_1|0> + g_1|1>) x .. ` with `g_i = sqrt(1 - f_i^2)`;
/// each coefficient must lie in `[-1, 1]`.
pub fn separable_tail(coeffs: &[f64]) -> Result<StateVector> {
    if coeffs.is_empty() {
        return Err(Error::InvalidArgument("separable tail needs at least one factor".into()));
    }
    let mut out: Option<StateVector> = None;
    for &f in coeffs {
        require_finite("tail coefficient", f)?;
        if !(-1.0..=1.0).contains(&f) {
            return Err(Error::InvalidArgument(format!(
                "tail coefficient must lie in [-1, 1], got {f}"
            )));
        }
        let g = (1.0 - f * f).max(0.0).sqrt();
        let q = StateVector::qubit(c64(f, 0.0), c64(g, 0.0)).expect("unit norm");
        out = Some(match out {
            None => q,
            Some(acc) => acc.tensor(&q)?,
        });
    }
    Ok(out.expect("nonempty"))
}

/// Family whose tails are the extreme products `|0..0>` and `|1..1>`.
pub fn ghz_family(n_qubits: usize, nu1: f64, zeta: f64, tau: f64) -> Result<NQubitFamilyParams> {
    if n_qubits < 3 {
        return Err(Error::InvalidArgument("ghz_family needs at least 3 qubits".into()));
    }
    if n_qubits > MAX_QUBITS {
        return Err(Error::Capacity { requested: n_qubits, max: MAX_QUBITS, unit: "qubits" });
    }
    let tail = n_qubits - 2;
    let chi1 = StateVector::basis_state(tail, 0)?;
    let chi2 = StateVector::basis_state(tail, (1 << tail) - 1)?;
    NQubitFamilyParams::new(n_qubits, nu1, zeta, tau, chi1, chi2)
}

/// Family used by the composite functional: `chi1 = |0..0>`, while `chi2`
/// puts `|1>` on the first `prefix_len` tail qubits and a separable product
/// with the given coefficients on the rest.
///
/// `prefix_len` may be at most `n_qubits - 2`; `tail_coeffs` must supply the
/// remaining `n_qubits - 2 - prefix_len` factors.
pub fn composite_family(
    n_qubits: usize,
    prefix_len: usize,
    nu1: f64,
    zeta: f64,
    tau: f64,
    tail_coeffs: &[f64],
) -> Result<NQubitFamilyParams> {
    if n_qubits < 3 {
        return Err(Error::InvalidArgument("composite_family needs at least 3 qubits".into()));
    }
    if n_qubits > MAX_QUBITS {
        return Err(Error::Capacity { requested: n_qubits, max: MAX_QUBITS, unit: "qubits" });
    }
    let tail = n_qubits - 2;
    if prefix_len > tail {
        return Err(Error::InvalidArgument(format!(
            "prefix length {prefix_len} exceeds the {tail} tail qubits"
        )));
    }
    if tail_coeffs.len() != tail - prefix_len {
        return Err(Error::Dimension(format!(
            "expected {} tail coefficients, got {}",
            tail - prefix_len,
            tail_coeffs.len()
        )));
    }
    let chi1 = StateVector::basis_state(tail, 0)?;
    let chi2 = if prefix_len == tail {
        StateVector::basis_state(tail, (1 << tail) - 1)?
    } else {
        let positive = separable_tail(tail_coeffs)?;
        if prefix_len == 0 {
            positive
        } else {
            StateVector::basis_state(prefix_len, (1 << prefix_len) - 1)?.tensor(&positive)?
        }
    };
    NQubitFamilyParams::new(n_qubits, nu1, zeta, tau, chi1, chi2)
}

/// Two-qubit variant in which the `|11>` component is replaced by
/// `|1>(cos(beta) e^{i tau1}|0> + sin(beta) e^{i tau2}|1>)`, giving the two
/// branches independent phases:
///
/// ```text
/// |w>    = cos(beta) e^{i tau1}|0> + sin(beta) e^{i tau2}|1>
/// |psi1> = cos(zeta/2)|00> + sin(zeta/2)|1>|w>
/// |psi2> = sin(zeta/2)|00> - cos(zeta/2)|1>|w>
/// ```
pub fn make_rho2_two_phase(
    nu1: f64,
    zeta: f64,
    beta: f64,
    tau1: f64,
    tau2: f64,
) -> Result<DensityMatrix> {
    require_unit_interval("nu1", nu1)?;
    require_finite("zeta", zeta)?;
    require_finite("beta", beta)?;
    require_finite("tau1", tau1)?;
    require_finite("tau2", tau2)?;
    let (s, c) = (zeta / 2.0).sin_cos();
    let w0 = Complex64::from_polar(beta.cos(), tau1);
    let w1 = Complex64::from_polar(beta.sin(), tau2);
    let zero = Complex64::ZERO;
    let psi1 = StateVector::from_amplitudes(
        2,
        vec![c64(c, 0.0), zero, w0 * s, w1 * s],
    )
    .expect("normalized by construction");
    let psi2 = StateVector::from_amplitudes(
        2,
        vec![c64(s, 0.0), zero, -w0 * c, -w1 * c],
    )
    .expect("normalized by construction");
    Ok(DensityMatrix::from_mixture(&[(nu1, psi1), (1.0 - nu1, psi2)])
        .expect("weights sum to one"))
}

/// Transposes the indices of `party` only.
pub fn partial_transpose(rho: &DensityMatrix, party: usize) -> Result<DensityMatrix> {
    let n = rho.n_qubits();
    if party == 0 || party > n {
        return Err(Error::Dimension(format!(
            "party {party} out of range for a {n}-qubit register"
        )));
    }
    let d = rho.dim();
    let shift = n - party;
    let mut out = DMatrix::from_element(d, d, Complex64::ZERO);
    for i in 0..d {
        for j in 0..d {
            let ti = (i & !(1 << shift)) | (((j >> shift) & 1) << shift);
            let tj = (j & !(1 << shift)) | (((i >> shift) & 1) << shift);
            out[(ti, tj)] = rho.entries()[(i, j)];
        }
    }
    Ok(DensityMatrix::from_raw_unchecked(n, out))
}

/// Smallest eigenvalue of the partial transpose over qubit 2; negative
/// values witness two-qubit entanglement.
pub fn ppt_min_eigenvalue(rho: &DensityMatrix) -> Result<f64> {
    if rho.n_qubits() != 2 {
        return Err(Error::Dimension("the transposition test covers two qubits".into()));
    }
    let pt = partial_transpose(rho, 2)?;
    let herm = (pt.entries() + pt.entries().adjoint()) * c64(0.5, 0.0);
    let eigs = nalgebra::linalg::SymmetricEigen::new(herm).eigenvalues;
    Ok(eigs.iter().cloned().fold(f64::INFINITY, f64::min))
}

/// True when the partial transpose has an eigenvalue below `-1e-10`; for
/// two qubits this is exactly the entanglement criterion.
pub fn is_entangled(rho: &DensityMatrix) -> Result<bool> {
    Ok(ppt_min_eigenvalue(rho)? < -1e-10)
}

// ---------------------------------------------------------------------------
// JSON state files
// ---------------------------------------------------------------------------

/// Parsed contents of a state file: either family parameters or a raw
/// density matrix.
#[derive(Debug, Clone)]
pub enum StateFile {
    TwoQubit(TwoQubitFamilyParams),
    NQubit(NQubitFamilyParams),
    Raw(DensityMatrix),
}

impl StateFile {
    pub fn density_matrix(&self) -> DensityMatrix {
        match self {
            StateFile::TwoQubit(p) => make_rho2(p),
            StateFile::NQubit(p) => make_rho_n(p),
            StateFile::Raw(rho) => rho.clone(),
        }
    }

    pub fn n_qubits(&self) -> usize {
        match self {
            StateFile::TwoQubit(_) => 2,
            StateFile::NQubit(p) => p.n_qubits(),
            StateFile::Raw(rho) => rho.n_qubits(),
        }
    }
}

#[derive(Deserialize)]
struct FamilyFileRepr {
    n_qubits: usize,
    nu1: f64,
    zeta: f64,
    #[serde(default)]
    tau: f64,
    #[serde(default)]
    chi1: Option<Vec<[f64; 2]>>,
    #[serde(default)]
    chi2: Option<Vec<[f64; 2]>>,
}

#[derive(Deserialize)]
struct RawFileRepr {
    n_qubits: usize,
    rho: Vec<Vec<[f64; 2]>>,
}

fn amplitudes_from_pairs(pairs: &[[f64; 2]]) -> Vec<Complex64> {
    pairs.iter().map(|[re, im]| c64(*re, *im)).collect()
}

/// Parses a state file. Two shapes are accepted, distinguished by field
/// presence:
///
/// * family parameters: `{"n_qubits", "nu1", "zeta", "tau", "chi1", "chi2"}`
///   with the tails as `[re, im]` amplitude lists (omitted when
///   `n_qubits == 2`);
/// * raw density matrix: `{"n_qubits", "rho"}` with `rho` a row-major
///   matrix of `[re, im]` entries, validated like
///   [`DensityMatrix::from_entries`].
pub fn load_state_json(text: &str) -> Result<StateFile> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    let obj = value
        .as_object()
        .ok_or_else(|| Error::Parse("state file must be a JSON object".into()))?;
    if obj.contains_key("rho") {
        let raw: RawFileRepr = serde_json::from_value(value.clone())?;
        let d = 1usize
            .checked_shl(raw.n_qubits as u32)
            .filter(|_| raw.n_qubits <= MAX_QUBITS)
            .ok_or(Error::Capacity { requested: raw.n_qubits, max: MAX_QUBITS, unit: "qubits" })?;
        if raw.rho.len() != d || raw.rho.iter().any(|row| row.len() != d) {
            return Err(Error::Dimension(format!(
                "rho must be a {d}x{d} matrix of [re, im] pairs"
            )));
        }
        let mat = DMatrix::from_fn(d, d, |i, j| c64(raw.rho[i][j][0], raw.rho[i][j][1]));
        return Ok(StateFile::Raw(DensityMatrix::from_entries(raw.n_qubits, mat)?));
    }
    let fam: FamilyFileRepr = serde_json::from_value(value)?;
    if fam.n_qubits == 2 {
        if fam.chi1.is_some() || fam.chi2.is_some() {
            return Err(Error::Parse(
                "tail states are not allowed for a two-qubit family".into(),
            ));
        }
        return Ok(StateFile::TwoQubit(TwoQubitFamilyParams::new(fam.nu1, fam.zeta, fam.tau)?));
    }
    let (chi1, chi2) = match (fam.chi1, fam.chi2) {
        (Some(a), Some(b)) => (a, b),
        _ => {
            return Err(Error::Parse(
                "families above two qubits need both chi1 and chi2".into(),
            ))
        }
    };
    if fam.n_qubits < 3 || fam.n_qubits > MAX_QUBITS {
        return Err(Error::InvalidArgument(format!(
            "n_qubits must lie in [2, {MAX_QUBITS}], got {}",
            fam.n_qubits
        )));
    }
    let tail = fam.n_qubits - 2;
    let chi1 = StateVector::from_amplitudes(tail, amplitudes_from_pairs(&chi1))?;
    let chi2 = StateVector::from_amplitudes(tail, amplitudes_from_pairs(&chi2))?;
    Ok(StateFile::NQubit(NQubitFamilyParams::new(
        fam.n_qubits,
        fam.nu1,
        fam.zeta,
        fam.tau,
        chi1,
        chi2,
    )?))
}

/// Serializes family parameters in the layout [`load_state_json`] accepts.
pub fn family_to_json(file: &StateFile) -> Result<String> {
    let value = match file {
        StateFile::TwoQubit(p) => serde_json::json!({
            "n_qubits": 2,
            "nu1": p.nu1(),
            "zeta": p.zeta(),
            "tau": p.tau(),
        }),
        StateFile::NQubit(p) => {
            let pairs = |s: &StateVector| -> Vec<[f64; 2]> {
                s.amplitudes().iter().map(|z| [z.re, z.im]).collect()
            };
            serde_json::json!({
                "n_qubits": p.n_qubits(),
                "nu1": p.nu1(),
                "zeta": p.zeta(),
                "tau": p.tau(),
                "chi1": pairs(p.chi1()),
                "chi2": pairs(p.chi2()),
            })
        }
        StateFile::Raw(rho) => {
            let d = rho.dim();
            let rows: Vec<Vec<[f64; 2]>> = (0..d)
                .map(|i| (0..d).map(|j| {
                    let z = rho.entries()[(i, j)];
                    [z.re, z.im]
                }).collect())
                .collect();
            serde_json::json!({ "n_qubits": rho.n_qubits(), "rho": rows })
        }
    };
    Ok(serde_json::to_string_pretty(&value)?)
}
