//! Dense state vectors, density matrices, and single-qubit measurement
//! primitives for registers of up to [`MAX_QUBITS`] qubits.
//!
//! Qubit indices are 1-based and big-endian: qubit 1 occupies the most
//! significant bit of a computational-basis index, so `|b1 b2 .. bn>` is
//! basis index `b1*2^(n-1) + .. + bn`.

use nalgebra::linalg::SymmetricEigen;
use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hard cap on register size; a density matrix at the cap is 4096 x 4096.
pub const MAX_QUBITS: usize = 12;

/// Tolerance applied when validating caller-supplied data (unit norm,
/// Hermiticity, positive semidefiniteness).
pub const INPUT_TOL: f64 = 1e-9;

/// Tolerance on the trace of caller-supplied density matrices.
pub const TRACE_TOL: f64 = 1e-12;

/// Spectral components with eigenvalues at or below this floor are dropped.
pub const EIGENVALUE_FLOOR: f64 = 1e-10;

#[inline]
pub(crate) fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn check_qubit_count(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidArgument("register must hold at least 1 qubit".into()));
    }
    if n > MAX_QUBITS {
        return Err(Error::Capacity { requested: n, max: MAX_QUBITS, unit: "qubits" });
    }
    Ok(())
}

fn check_party(party: usize, n: usize) -> Result<()> {
    if party == 0 || party > n {
        return Err(Error::Dimension(format!(
            "party {party} out of range for a {n}-qubit register"
        )));
    }
    Ok(())
}

/// Bit of `party` (1-based, big-endian) inside basis index `idx` of an
/// `n`-qubit register.
#[inline]
pub(crate) fn bit_of(idx: usize, party: usize, n: usize) -> usize {
    (idx >> (n - party)) & 1
}

/// Inserts `bit` at the position of `party` in an `n`-qubit register, where
/// `idx` indexes the remaining `n - 1` qubits in order.
#[inline]
pub(crate) fn insert_bit(idx: usize, party: usize, bit: usize, n: usize) -> usize {
    let p = n - party;
    let high = (idx >> p) << (p + 1);
    let low = idx & ((1 << p) - 1);
    high | (bit << p) | low
}

/// Contracts one qubit of `amps` (an `n`-qubit amplitude slice) with the
/// conjugated spinor, returning the unnormalized `(n-1)`-qubit amplitudes
/// `out[x] = sum_s conj(spinor[s]) amps[insert_bit(x, party, s)]`.
pub(crate) fn contract_qubit(
    amps: &[Complex64],
    n: usize,
    party: usize,
    spinor: &Vector2<Complex64>,
) -> Vec<Complex64> {
    let d_rest = 1usize << (n - 1);
    let mut out = vec![Complex64::ZERO; d_rest];
    let s0 = spinor[0].conj();
    let s1 = spinor[1].conj();
    for (x, o) in out.iter_mut().enumerate() {
        *o = s0 * amps[insert_bit(x, party, 0, n)] + s1 * amps[insert_bit(x, party, 1, n)];
    }
    out
}

/// Pure state of an `n`-qubit register; invariant: unit norm.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amps: DVector<Complex64>,
}

impl StateVector {
    /// Builds a state from `2^n_qubits` amplitudes, which must have unit
    /// norm within [`INPUT_TOL`].
    pub fn from_amplitudes(n_qubits: usize, amps: Vec<Complex64>) -> Result<Self> {
        check_qubit_count(n_qubits)?;
        let dim = 1usize << n_qubits;
        if amps.len() != dim {
            return Err(Error::Dimension(format!(
                "expected {dim} amplitudes for {n_qubits} qubits, got {}",
                amps.len()
            )));
        }
        let v = DVector::from_vec(amps);
        let norm = v.norm();
        if !norm.is_finite() || (norm - 1.0).abs() > INPUT_TOL {
            return Err(Error::InvalidArgument(format!(
                "state vector norm is {norm}, expected 1"
            )));
        }
        Ok(Self { n_qubits, amps: v })
    }

    /// Computational-basis state `|index>`.
    pub fn basis_state(n_qubits: usize, index: usize) -> Result<Self> {
        check_qubit_count(n_qubits)?;
        let dim = 1usize << n_qubits;
        if index >= dim {
            return Err(Error::Dimension(format!(
                "basis index {index} out of range for {n_qubits} qubits"
            )));
        }
        let mut amps = DVector::from_element(dim, Complex64::ZERO);
        amps[index] = Complex64::ONE;
        Ok(Self { n_qubits, amps })
    }

    /// Single qubit `alpha|0> + beta|1>`.
    pub fn qubit(alpha: Complex64, beta: Complex64) -> Result<Self> {
        Self::from_amplitudes(1, vec![alpha, beta])
    }

    /// `sum_i coeff_i |term_i>`; the combination must come out normalized.
    pub fn superposition(terms: &[(Complex64, &StateVector)]) -> Result<Self> {
        let (_, first) = terms
            .first()
            .ok_or_else(|| Error::InvalidArgument("superposition of zero terms".into()))?;
        let n = first.n_qubits;
        let mut amps = DVector::from_element(first.dim(), Complex64::ZERO);
        for (coeff, state) in terms {
            if state.n_qubits != n {
                return Err(Error::Dimension(
                    "superposition terms must share a register size".into(),
                ));
            }
            amps += &state.amps * *coeff;
        }
        Self::from_amplitudes(n, amps.as_slice().to_vec())
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        self.amps.as_slice()
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &Self) -> Result<Complex64> {
        if self.n_qubits != other.n_qubits {
            return Err(Error::Dimension("inner product of unequal registers".into()));
        }
        Ok(self.amps.dotc(&other.amps))
    }

    /// Kronecker product, `self` on the most significant qubits.
    pub fn tensor(&self, other: &Self) -> Result<Self> {
        check_qubit_count(self.n_qubits + other.n_qubits)?;
        let mut amps = Vec::with_capacity(self.dim() * other.dim());
        for a in self.amps.iter() {
            for b in other.amps.iter() {
                amps.push(a * b);
            }
        }
        Ok(Self {
            n_qubits: self.n_qubits + other.n_qubits,
            amps: DVector::from_vec(amps),
        })
    }
}

/// Mixed state of an `n`-qubit register; invariants: Hermitian, unit trace,
/// positive semidefinite (within [`INPUT_TOL`] for untrusted input).
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    n_qubits: usize,
    mat: DMatrix<Complex64>,
}

impl DensityMatrix {
    pub fn from_pure(psi: &StateVector) -> Self {
        let d = psi.dim();
        let mat = DMatrix::from_fn(d, d, |i, j| psi.amps[i] * psi.amps[j].conj());
        Self { n_qubits: psi.n_qubits, mat }
    }

    /// Convex mixture of pure states; weights must be nonnegative and sum
    /// to 1 within [`TRACE_TOL`].
    pub fn from_mixture(components: &[(f64, StateVector)]) -> Result<Self> {
        let (_, first) = components
            .first()
            .ok_or_else(|| Error::InvalidArgument("mixture of zero components".into()))?;
        let n = first.n_qubits;
        let d = first.dim();
        let mut total = 0.0;
        let mut mat = DMatrix::from_element(d, d, Complex64::ZERO);
        for (w, psi) in components {
            if psi.n_qubits != n {
                return Err(Error::Dimension(
                    "mixture components must share a register size".into(),
                ));
            }
            if !w.is_finite() || *w < -TRACE_TOL {
                return Err(Error::InvalidArgument(format!("mixture weight {w} is negative")));
            }
            total += w;
            let w = c64(*w, 0.0);
            for j in 0..d {
                let col = w * psi.amps[j].conj();
                if col == Complex64::ZERO {
                    continue;
                }
                for i in 0..d {
                    mat[(i, j)] += psi.amps[i] * col;
                }
            }
        }
        if (total - 1.0).abs() > TRACE_TOL {
            return Err(Error::InvalidArgument(format!(
                "mixture weights sum to {total}, expected 1"
            )));
        }
        Ok(Self { n_qubits: n, mat })
    }

    /// Validates caller-supplied entries: square of size `2^n_qubits`,
    /// Hermitian within [`INPUT_TOL`], trace 1 within [`TRACE_TOL`], and no
    /// eigenvalue below `-INPUT_TOL`.
    pub fn from_entries(n_qubits: usize, mat: DMatrix<Complex64>) -> Result<Self> {
        check_qubit_count(n_qubits)?;
        let d = 1usize << n_qubits;
        if mat.nrows() != d || mat.ncols() != d {
            return Err(Error::Dimension(format!(
                "expected a {d}x{d} matrix for {n_qubits} qubits, got {}x{}",
                mat.nrows(),
                mat.ncols()
            )));
        }
        for i in 0..d {
            for j in i..d {
                let delta = mat[(i, j)] - mat[(j, i)].conj();
                if !delta.re.is_finite() || !delta.im.is_finite() || delta.norm() > INPUT_TOL {
                    return Err(Error::InvalidArgument(format!(
                        "matrix is not Hermitian at ({i}, {j})"
                    )));
                }
            }
        }
        let trace: Complex64 = mat.diagonal().iter().sum();
        if (trace.re - 1.0).abs() > TRACE_TOL || trace.im.abs() > TRACE_TOL {
            return Err(Error::InvalidArgument(format!(
                "trace is {trace}, expected 1"
            )));
        }
        // Symmetrize before the eigenvalue check so the solver sees an
        // exactly Hermitian matrix.
        let herm = (&mat + mat.adjoint()) * c64(0.5, 0.0);
        let eigs = SymmetricEigen::new(herm).eigenvalues;
        if let Some(min) = eigs.iter().cloned().reduce(f64::min) {
            if min < -INPUT_TOL {
                return Err(Error::InvalidArgument(format!(
                    "matrix has a negative eigenvalue ({min:.3e})"
                )));
            }
        }
        Ok(Self { n_qubits, mat })
    }

    /// Constructor for internal results whose invariants hold by
    /// construction (steered branches, partial traces, tensor products).
    pub(crate) fn from_raw_unchecked(n_qubits: usize, mat: DMatrix<Complex64>) -> Self {
        Self { n_qubits, mat }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn entries(&self) -> &DMatrix<Complex64> {
        &self.mat
    }

    pub fn trace(&self) -> f64 {
        self.mat.diagonal().iter().map(|z| z.re).sum()
    }

    /// `tr(rho^2)`; equals `sum_ij |rho_ij|^2` for Hermitian input.
    pub fn purity(&self) -> f64 {
        self.mat.iter().map(|z| z.norm_sqr()).sum()
    }

    /// `tr(self * other)`, real for Hermitian operands.
    pub fn overlap(&self, other: &Self) -> Result<f64> {
        if self.n_qubits != other.n_qubits {
            return Err(Error::Dimension("overlap of unequal registers".into()));
        }
        let mut acc = Complex64::ZERO;
        for j in 0..self.dim() {
            for i in 0..self.dim() {
                acc += self.mat[(i, j)] * other.mat[(j, i)];
            }
        }
        Ok(acc.re)
    }

    /// Kronecker product, `self` on the most significant qubits.
    pub fn tensor(&self, other: &Self) -> Result<Self> {
        check_qubit_count(self.n_qubits + other.n_qubits)?;
        Ok(Self {
            n_qubits: self.n_qubits + other.n_qubits,
            mat: self.mat.kronecker(&other.mat),
        })
    }

    /// Traces out every qubit not listed in `keep` (1-based, strictly
    /// ascending). The result keeps the listed qubits in order.
    pub fn partial_trace(&self, keep: &[usize]) -> Result<Self> {
        let n = self.n_qubits;
        if keep.is_empty() {
            return Err(Error::InvalidArgument("must keep at least one qubit".into()));
        }
        for pair in keep.windows(2) {
            if pair[0] >= pair[1] {
                return Err(Error::InvalidArgument(
                    "kept qubits must be strictly ascending".into(),
                ));
            }
        }
        for &p in keep {
            check_party(p, n)?;
        }
        let k = keep.len();
        let traced: Vec<usize> = (1..=n).filter(|p| !keep.contains(p)).collect();
        let dk = 1usize << k;
        let dt = 1usize << traced.len();

        // Scatter tables: positions of kept/traced bits inside a full index.
        let scatter = |parties: &[usize], idx: usize| -> usize {
            let m = parties.len();
            let mut out = 0usize;
            for (i, &p) in parties.iter().enumerate() {
                out |= ((idx >> (m - 1 - i)) & 1) << (n - p);
            }
            out
        };
        let keep_map: Vec<usize> = (0..dk).map(|a| scatter(keep, a)).collect();
        let traced_map: Vec<usize> = (0..dt).map(|t| scatter(&traced, t)).collect();

        let mut out = DMatrix::from_element(dk, dk, Complex64::ZERO);
        for a in 0..dk {
            for b in 0..dk {
                let mut acc = Complex64::ZERO;
                for t in 0..dt {
                    acc += self.mat[(keep_map[a] | traced_map[t], keep_map[b] | traced_map[t])];
                }
                out[(a, b)] = acc;
            }
        }
        Ok(Self { n_qubits: k, mat: out })
    }

    /// Eigen-decomposition restricted to eigenvalues above
    /// [`EIGENVALUE_FLOOR`], sorted by descending eigenvalue.
    ///
    /// Eigenvector phases are fixed so the first amplitude of nonnegligible
    /// magnitude is real and positive. Exactly diagonal matrices are
    /// resolved in the computational basis directly (index order breaks
    /// eigenvalue ties), so classically correlated states get product
    /// components regardless of solver behavior in degenerate subspaces.
    pub fn spectral_decomposition(&self) -> Vec<(f64, StateVector)> {
        let d = self.dim();
        let diagonal = (0..d).all(|i| {
            (0..d).all(|j| i == j || self.mat[(i, j)] == Complex64::ZERO)
        });
        if diagonal {
            let mut evs: Vec<(f64, usize)> =
                (0..d).map(|i| (self.mat[(i, i)].re, i)).collect();
            evs.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
            return evs
                .into_iter()
                .filter(|(ev, _)| *ev > EIGENVALUE_FLOOR)
                .map(|(ev, i)| {
                    (ev, StateVector::basis_state(self.n_qubits, i).expect("index in range"))
                })
                .collect();
        }

        let herm = (&self.mat + self.mat.adjoint()) * c64(0.5, 0.0);
        let eig = SymmetricEigen::new(herm);
        let mut comps: Vec<(f64, StateVector)> = Vec::new();
        for (k, &ev) in eig.eigenvalues.iter().enumerate() {
            if ev <= EIGENVALUE_FLOOR {
                continue;
            }
            let col = eig.eigenvectors.column(k);
            let mut amps: Vec<Complex64> = col.iter().cloned().collect();
            if let Some(first) = amps.iter().find(|a| a.norm() > 1e-8) {
                let phase = first.conj() / first.norm();
                for a in &mut amps {
                    *a *= phase;
                }
            }
            let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
            for a in &mut amps {
                *a /= norm;
            }
            comps.push((
                ev,
                StateVector { n_qubits: self.n_qubits, amps: DVector::from_vec(amps) },
            ));
        }
        comps.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
        comps
    }
}

/// Measurement direction on the Bloch sphere, kept canonical:
/// `theta` in `[0, pi]`, `phi` in `[0, 2*pi)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BlochDirection {
    theta: f64,
    phi: f64,
}

impl BlochDirection {
    /// Canonicalizes arbitrary finite angles without moving the direction
    /// vector: `theta` is wrapped into `[0, 2*pi)` and reflected through the
    /// pole (adding `pi` to `phi`) when it lands above `pi`.
    ///
    /// Panics on non-finite input.
    pub fn new(theta: f64, phi: f64) -> Self {
        assert!(theta.is_finite() && phi.is_finite(), "angles must be finite");
        let tau = std::f64::consts::TAU;
        let mut th = theta.rem_euclid(tau);
        let mut ph = phi;
        if th > std::f64::consts::PI {
            th = tau - th;
            ph += std::f64::consts::PI;
        }
        let ph = ph.rem_euclid(tau);
        Self { theta: th, phi: ph }
    }

    pub fn z() -> Self {
        Self::new(0.0, 0.0)
    }

    pub fn x() -> Self {
        Self::new(std::f64::consts::FRAC_PI_2, 0.0)
    }

    pub fn y() -> Self {
        Self::new(std::f64::consts::FRAC_PI_2, std::f64::consts::FRAC_PI_2)
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn unit_vector(&self) -> [f64; 3] {
        let (st, ct) = self.theta.sin_cos();
        let (sp, cp) = self.phi.sin_cos();
        [st * cp, st * sp, ct]
    }
}

impl<'de> Deserialize<'de> for BlochDirection {
    fn deserialize<D>(deserializer: D) -> std::result::Result<Self, D::Error>
    where
        D: serde::Deserializer<'de>,
    {
        #[derive(Deserialize)]
        struct Raw {
            theta: f64,
            phi: f64,
        }
        let raw = Raw::deserialize(deserializer)?;
        if !raw.theta.is_finite() || !raw.phi.is_finite() {
            return Err(serde::de::Error::custom("angles must be finite"));
        }
        Ok(BlochDirection::new(raw.theta, raw.phi))
    }
}

/// `n . sigma` for the given direction:
/// `[[cos t, sin t e^{-i p}], [sin t e^{i p}, -cos t]]`.
pub fn pauli_observable(dir: &BlochDirection) -> Matrix2<Complex64> {
    let (st, ct) = dir.theta.sin_cos();
    let e = Complex64::from_polar(1.0, dir.phi);
    Matrix2::new(c64(ct, 0.0), e.conj() * st, e * st, c64(-ct, 0.0))
}

/// The two rank-1 projectors of a direction; outcome 0 is the `+n`
/// eigenprojector `(I + n.sigma)/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectorPair {
    direction: BlochDirection,
    mats: [Matrix2<Complex64>; 2],
}

impl ProjectorPair {
    pub fn new(direction: BlochDirection) -> Self {
        let obs = pauli_observable(&direction);
        let id = Matrix2::identity();
        let half = c64(0.5, 0.0);
        Self {
            direction,
            mats: [(id + obs) * half, (id - obs) * half],
        }
    }

    pub fn direction(&self) -> &BlochDirection {
        &self.direction
    }

    /// Projector for `outcome` (0 or 1).
    pub fn outcome(&self, outcome: u8) -> &Matrix2<Complex64> {
        assert!(outcome < 2, "outcome must be 0 or 1");
        &self.mats[outcome as usize]
    }

    /// Unit eigenvector for `outcome` in the half-angle parametrization:
    /// outcome 0 is `(cos(t/2), sin(t/2) e^{i p})`.
    pub fn eigenstate(direction: &BlochDirection, outcome: u8) -> Vector2<Complex64> {
        assert!(outcome < 2, "outcome must be 0 or 1");
        let (sh, ch) = (direction.theta / 2.0).sin_cos();
        let e = Complex64::from_polar(1.0, direction.phi);
        if outcome == 0 {
            Vector2::new(c64(ch, 0.0), e * sh)
        } else {
            Vector2::new(c64(sh, 0.0), -e * ch)
        }
    }
}

/// `tr(rho * (M_1 x .. x M_n))` by direct index contraction; `None` factors
/// are identities. Skips zero entries of `rho`, which the rank-2 families
/// have in abundance.
pub(crate) fn trace_product_tensor(
    rho: &DensityMatrix,
    mats: &[Option<Matrix2<Complex64>>],
) -> Complex64 {
    let n = rho.n_qubits();
    debug_assert_eq!(mats.len(), n);
    let d = rho.dim();
    let m = rho.entries();
    let mut acc = Complex64::ZERO;
    for j in 0..d {
        for i in 0..d {
            let r = m[(i, j)];
            if r == Complex64::ZERO {
                continue;
            }
            let mut prod = r;
            let mut dead = false;
            for (k, factor) in mats.iter().enumerate() {
                match factor {
                    Some(f) => prod *= f[(bit_of(j, k + 1, n), bit_of(i, k + 1, n))],
                    // Identity factor: only bit-diagonal entries survive.
                    None => {
                        if bit_of(j, k + 1, n) != bit_of(i, k + 1, n) {
                            dead = true;
                            break;
                        }
                    }
                }
            }
            if !dead {
                acc += prod;
            }
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn re(x: f64) -> Complex64 {
        c64(x, 0.0)
    }

    #[test]
    fn tensor_of_plus_and_zero() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let plus = StateVector::qubit(re(s), re(s)).unwrap();
        let zero = StateVector::basis_state(1, 0).unwrap();
        let t = plus.tensor(&zero).unwrap();
        let expect = [s, 0.0, s, 0.0];
        for (a, e) in t.amplitudes().iter().zip(expect) {
            assert_relative_eq!(a.re, e, max_relative = 1e-15);
            assert_eq!(a.im, 0.0);
        }
        // Bell pair via superposition: (|00> + |11>)/sqrt(2).
        let b00 = StateVector::basis_state(2, 0).unwrap();
        let b11 = StateVector::basis_state(2, 3).unwrap();
        let bell = StateVector::superposition(&[(re(s), &b00), (re(s), &b11)]).unwrap();
        assert_relative_eq!(bell.amplitudes()[0].re, s);
        assert_relative_eq!(bell.amplitudes()[3].re, s);
        assert_eq!(bell.amplitudes()[1], Complex64::ZERO);
    }

    #[test]
    fn norm_and_dimension_validation() {
        assert!(matches!(
            StateVector::from_amplitudes(2, vec![re(1.0); 4]),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            StateVector::from_amplitudes(2, vec![re(1.0); 3]),
            Err(Error::Dimension(_))
        ));
        assert!(matches!(
            StateVector::basis_state(13, 0),
            Err(Error::Capacity { .. })
        ));
    }

    #[test]
    fn big_endian_bit_layout() {
        // |10> = index 2: qubit 1 is the most significant bit.
        let s = StateVector::basis_state(2, 2).unwrap();
        assert_eq!(s.amplitudes()[2], Complex64::ONE);
        assert_eq!(bit_of(2, 1, 2), 1);
        assert_eq!(bit_of(2, 2, 2), 0);
        for idx in 0..8usize {
            for party in 1..=3 {
                for bit in 0..2 {
                    let full = insert_bit(idx % 4, party, bit, 3);
                    assert_eq!(bit_of(full, party, 3), bit);
                }
            }
        }
    }

    #[test]
    fn partial_trace_matches_naive_sum() {
        // rho = nu1 |psi1><psi1| + nu2 |psi2><psi2| at (0.75, pi/3, 0);
        // tracing out qubit 1 leaves diag(0.625, 0.375).
        let (nu1, zeta) = (0.75, std::f64::consts::FRAC_PI_3);
        let (s, c) = ((zeta / 2.0).sin(), (zeta / 2.0).cos());
        let psi1 = StateVector::from_amplitudes(2, vec![re(c), re(0.0), re(0.0), re(s)]).unwrap();
        let psi2 = StateVector::from_amplitudes(2, vec![re(s), re(0.0), re(0.0), re(-c)]).unwrap();
        let rho = DensityMatrix::from_mixture(&[(nu1, psi1), (1.0 - nu1, psi2)]).unwrap();
        let reduced = rho.partial_trace(&[2]).unwrap();
        assert_relative_eq!(reduced.entries()[(0, 0)].re, 0.625, epsilon = 1e-12);
        assert_relative_eq!(reduced.entries()[(1, 1)].re, 0.375, epsilon = 1e-12);
        assert_relative_eq!(reduced.entries()[(0, 1)].norm(), 0.0, epsilon = 1e-12);

        // Independent 3-qubit check against an explicit double loop.
        let raw: Vec<Complex64> = (0..8)
            .map(|i| c64((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()))
            .collect();
        let norm = raw.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let amps: Vec<Complex64> = raw.into_iter().map(|z| z / norm).collect();
        let psi = StateVector::from_amplitudes(3, amps).unwrap();
        let rho3 = DensityMatrix::from_pure(&psi);
        let red = rho3.partial_trace(&[1, 3]).unwrap();
        for a2 in 0..4usize {
            for b2 in 0..4usize {
                let mut want = Complex64::ZERO;
                for t in 0..2usize {
                    // kept qubits 1 and 3; qubit 2 is the middle bit.
                    let row = ((a2 >> 1) << 2) | (t << 1) | (a2 & 1);
                    let col = ((b2 >> 1) << 2) | (t << 1) | (b2 & 1);
                    want += rho3.entries()[(row, col)];
                }
                assert_relative_eq!(red.entries()[(a2, b2)].re, want.re, epsilon = 1e-12);
                assert_relative_eq!(red.entries()[(a2, b2)].im, want.im, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn spectral_decomposition_recovers_components() {
        let (nu1, zeta, tau) = (0.7, std::f64::consts::FRAC_PI_3, 0.4);
        let (s, c) = ((zeta / 2.0).sin(), (zeta / 2.0).cos());
        let e = Complex64::from_polar(1.0, tau);
        let psi1 =
            StateVector::from_amplitudes(2, vec![re(c), re(0.0), re(0.0), e * s]).unwrap();
        let psi2 =
            StateVector::from_amplitudes(2, vec![re(s), re(0.0), re(0.0), -e * c]).unwrap();
        let rho = DensityMatrix::from_mixture(&[(nu1, psi1.clone()), (0.3, psi2.clone())]).unwrap();
        let comps = rho.spectral_decomposition();
        assert_eq!(comps.len(), 2);
        assert_relative_eq!(comps[0].0, 0.7, epsilon = 1e-12);
        assert_relative_eq!(comps[1].0, 0.3, epsilon = 1e-12);
        // Component vectors agree with the construction up to global phase;
        // the phase convention makes the first nonzero amplitude positive,
        // which the psi1/psi2 above already satisfy.
        for (got, want) in [(&comps[0].1, &psi1), (&comps[1].1, &psi2)] {
            for (g, w) in got.amplitudes().iter().zip(want.amplitudes()) {
                assert_relative_eq!(g.re, w.re, epsilon = 1e-9);
                assert_relative_eq!(g.im, w.im, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn diagonal_states_decompose_in_computational_basis() {
        let b00 = StateVector::basis_state(2, 0).unwrap();
        let b11 = StateVector::basis_state(2, 3).unwrap();
        let rho = DensityMatrix::from_mixture(&[(0.5, b00), (0.5, b11)]).unwrap();
        let comps = rho.spectral_decomposition();
        assert_eq!(comps.len(), 2);
        // Ties broken by basis index.
        assert_eq!(comps[0].1.amplitudes()[0], Complex64::ONE);
        assert_eq!(comps[1].1.amplitudes()[3], Complex64::ONE);
    }

    #[test]
    fn from_entries_validation() {
        let good = DMatrix::from_diagonal(&DVector::from_vec(vec![
            re(0.5),
            re(0.5),
            re(0.0),
            re(0.0),
        ]));
        assert!(DensityMatrix::from_entries(2, good).is_ok());

        let mut bad_trace = DMatrix::from_element(4, 4, Complex64::ZERO);
        bad_trace[(0, 0)] = re(0.9);
        assert!(matches!(
            DensityMatrix::from_entries(2, bad_trace),
            Err(Error::InvalidArgument(_))
        ));

        let mut not_herm = DMatrix::from_element(4, 4, Complex64::ZERO);
        not_herm[(0, 0)] = re(0.5);
        not_herm[(3, 3)] = re(0.5);
        not_herm[(0, 3)] = re(0.3);
        not_herm[(3, 0)] = re(-0.3);
        assert!(matches!(
            DensityMatrix::from_entries(2, not_herm),
            Err(Error::InvalidArgument(_))
        ));

        let negative = DMatrix::from_diagonal(&DVector::from_vec(vec![
            re(1.5),
            re(-0.5),
            re(0.0),
            re(0.0),
        ]));
        assert!(matches!(
            DensityMatrix::from_entries(2, negative),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn pauli_observable_and_projectors() {
        let dir = BlochDirection::new(std::f64::consts::FRAC_PI_3, 0.7);
        let m = pauli_observable(&dir);
        assert_relative_eq!(m[(0, 0)].re, 0.5, epsilon = 1e-15);
        assert_relative_eq!(m[(1, 1)].re, -0.5, epsilon = 1e-15);
        let st = (std::f64::consts::FRAC_PI_3).sin();
        assert_relative_eq!(m[(1, 0)].re, st * 0.7f64.cos(), epsilon = 1e-15);
        assert_relative_eq!(m[(1, 0)].im, st * 0.7f64.sin(), epsilon = 1e-15);
        assert_eq!(m[(0, 1)], m[(1, 0)].conj());

        let pair = ProjectorPair::new(dir);
        let p0 = pair.outcome(0);
        let p1 = pair.outcome(1);
        let sum = p0 + p1;
        let id = Matrix2::<Complex64>::identity();
        assert!((sum - id).norm() < 1e-14);
        assert!((p0 * p0 - p0).norm() < 1e-14);
        assert!((p0 * p1).norm() < 1e-14);

        // Projector 0 equals the outer product of the + eigenstate, and the
        // eigenstates diagonalize n.sigma with eigenvalues +1/-1.
        for outcome in [0u8, 1u8] {
            let v = ProjectorPair::eigenstate(&dir, outcome);
            let mv = m * v;
            let sign = if outcome == 0 { 1.0 } else { -1.0 };
            assert!((mv - v * c64(sign, 0.0)).norm() < 1e-14);
        }
        let v0 = ProjectorPair::eigenstate(&dir, 0);
        let outer = v0 * v0.adjoint();
        assert!((outer - p0).norm() < 1e-14);
    }

    #[test]
    fn direction_canonicalization_preserves_vector() {
        let cases = [
            (-0.3, 1.0),
            (3.5, 0.2),
            (std::f64::consts::PI, 0.0),
            (7.0, -9.0),
            (0.0, 100.0),
        ];
        for (theta, phi) in cases {
            let d = BlochDirection::new(theta, phi);
            assert!((0.0..=std::f64::consts::PI).contains(&d.theta()));
            assert!((0.0..std::f64::consts::TAU).contains(&d.phi()));
            let raw = [
                theta.sin() * phi.cos(),
                theta.sin() * phi.sin(),
                theta.cos(),
            ];
            let canon = d.unit_vector();
            for (r, c) in raw.iter().zip(canon) {
                assert_relative_eq!(*r, c, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn contract_qubit_is_a_partial_inner_product() {
        let norm = 2.0f64;
        let amps: Vec<Complex64> = (0..8).map(|i| re(((i % 4) as f64 + 0.5) / norm / 2.2)).collect();
        let total: f64 = amps.iter().map(|z| z.norm_sqr()).sum();
        let amps: Vec<Complex64> = amps.into_iter().map(|z| z / total.sqrt()).collect();
        let spinor = Vector2::new(re(0.6), c64(0.0, 0.8));
        let out = contract_qubit(&amps, 3, 2, &spinor);
        for (x, o) in out.iter().enumerate() {
            let want = spinor[0].conj() * amps[insert_bit(x, 2, 0, 3)]
                + spinor[1].conj() * amps[insert_bit(x, 2, 1, 3)];
            assert_eq!(*o, want);
        }
    }

    #[test]
    fn trace_product_tensor_matches_kronecker() {
        let (s, c) = (0.6f64, 0.8f64);
        let psi = StateVector::from_amplitudes(2, vec![re(c), re(0.0), re(0.0), re(s)]).unwrap();
        let rho = DensityMatrix::from_pure(&psi);
        let a = pauli_observable(&BlochDirection::new(0.3, 1.1));
        let b = pauli_observable(&BlochDirection::new(2.0, 5.0));
        let kron = a.kronecker(&b);
        let mut want = Complex64::ZERO;
        for i in 0..4 {
            for j in 0..4 {
                want += rho.entries()[(i, j)] * kron[(j, i)];
            }
        }
        let got = trace_product_tensor(&rho, &[Some(a), Some(b)]);
        assert_relative_eq!(got.re, want.re, epsilon = 1e-13);
        assert_relative_eq!(got.im, want.im, epsilon = 1e-13);
    }
}
