//! Steering of the remaining register by a single-qubit measurement, and
//! the mutual steering certificate for the rank-2 families.
//!
//! A direction witnesses steering-to-pure for a party when measuring that
//! party along it leaves the other qubits in one of two distinct pure
//! states, and every spectral component of the state is genuinely split by
//! the measurement (both conditional weights bounded away from 0 and 1).
//! The last condition is what the rank-2 argument actually needs; it rules
//! out classically correlated mixtures, whose branches can be pure and
//! distinct without any component being steered.

use nalgebra::{DMatrix, Vector2};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::{map_indexed, Exec};
use crate::qcore::{
    contract_qubit, insert_bit, BlochDirection, DensityMatrix, ProjectorPair, StateVector,
    EIGENVALUE_FLOOR,
};

/// Default bound on `1 - tr(branch^2)` for a branch to count as pure.
pub const DEFAULT_PURITY_TOL: f64 = 1e-9;

/// Default bound: the two branches must overlap by at most
/// `1 - DEFAULT_DISTINCTNESS_TOL`.
pub const DEFAULT_DISTINCTNESS_TOL: f64 = 1e-9;

/// Branches below this probability are reported without a conditional state.
pub const BRANCH_PROB_FLOOR: f64 = 1e-12;

/// Both conditional weights of every spectral component must exceed this.
/// Kept far above the purity tolerance: a direction that splits a component
/// only at the 1e-6 level leaves mixing well past 1e-9 in some branch, so
/// near-pole directions on classically correlated states cannot pass both
/// gates at once.
const COMPONENT_SPLIT_TOL: f64 = 1e-6;

const GRID_THETA: usize = 64;
const GRID_PHI: usize = 64;

/// One outcome of a steering measurement.
#[derive(Debug, Clone)]
pub struct SteeredBranch {
    pub probability: f64,
    /// Conditional state of the remaining qubits; `None` when the branch
    /// probability is below [`BRANCH_PROB_FLOOR`].
    pub conditional: Option<DensityMatrix>,
}

/// Both outcomes of measuring `party` along `direction`.
#[derive(Debug, Clone)]
pub struct SteeredEnsemble {
    pub party: usize,
    pub direction: BlochDirection,
    pub branches: [SteeredBranch; 2],
}

/// Projects `party` of `rho` onto the spinor, returning the unnormalized
/// conditional matrix on the remaining qubits and its trace.
fn project_party(
    rho: &DensityMatrix,
    party: usize,
    spinor: &Vector2<Complex64>,
) -> (f64, DMatrix<Complex64>) {
    let n = rho.n_qubits();
    let d_rest = 1usize << (n - 1);
    let m = rho.entries();
    let mut out = DMatrix::from_element(d_rest, d_rest, Complex64::ZERO);
    for x in 0..d_rest {
        for y in 0..d_rest {
            let mut acc = Complex64::ZERO;
            for s in 0..2 {
                let row = insert_bit(x, party, s, n);
                for t in 0..2 {
                    acc += spinor[s].conj() * m[(row, insert_bit(y, party, t, n))] * spinor[t];
                }
            }
            out[(x, y)] = acc;
        }
    }
    let trace: f64 = (0..d_rest).map(|x| out[(x, x)].re).sum();
    (trace, out)
}

/// Measures `party` along `direction` and returns both steered branches.
pub fn steer(
    rho: &DensityMatrix,
    party: usize,
    direction: &BlochDirection,
) -> Result<SteeredEnsemble> {
    let n = rho.n_qubits();
    if n < 2 {
        return Err(Error::Dimension("steering needs at least two qubits".into()));
    }
    if party == 0 || party > n {
        return Err(Error::Dimension(format!(
            "party {party} out of range for a {n}-qubit register"
        )));
    }
    let branches = [0u8, 1u8].map(|o| {
        let spinor = ProjectorPair::eigenstate(direction, o);
        let (p, raw) = project_party(rho, party, &spinor);
        let conditional = if p < BRANCH_PROB_FLOOR {
            None
        } else {
            Some(DensityMatrix::from_raw_unchecked(n - 1, raw / num_complex::Complex64::new(p, 0.0)))
        };
        SteeredBranch { probability: p.max(0.0), conditional }
    });
    Ok(SteeredEnsemble { party, direction: *direction, branches })
}

/// Determinants of the two unnormalized steered states of the other qubit
/// when `party` of a two-qubit state measures the basis
/// `{a|0> + sqrt(1-a^2) e^{i gamma}|1>, sqrt(1-a^2) e^{-i gamma}|0> - a|1>}`.
///
/// Both determinants vanish on a branch exactly when the corresponding
/// steered state is rank deficient, i.e. pure after normalization.
pub fn branch_determinant(
    rho: &DensityMatrix,
    party: usize,
    a: f64,
    gamma: f64,
) -> Result<[f64; 2]> {
    if rho.n_qubits() != 2 {
        return Err(Error::Dimension("branch determinants cover two qubits".into()));
    }
    if party == 0 || party > 2 {
        return Err(Error::Dimension(format!("party {party} out of range for two qubits")));
    }
    if !a.is_finite() || !(0.0..=1.0).contains(&a) {
        return Err(Error::InvalidArgument(format!("a must lie in [0, 1], got {a}")));
    }
    if !gamma.is_finite() {
        return Err(Error::InvalidArgument("gamma must be finite".into()));
    }
    let b = Complex64::from_polar((1.0 - a * a).max(0.0).sqrt(), gamma);
    let xi = Vector2::new(Complex64::new(a, 0.0), b);
    let xi_perp = Vector2::new(b.conj(), Complex64::new(-a, 0.0));
    let det_of = |spinor: &Vector2<Complex64>| -> f64 {
        let (_, m) = project_party(rho, party, spinor);
        (m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)]).re
    };
    Ok([det_of(&xi), det_of(&xi_perp)])
}

/// Verdict for a single party.
#[derive(Debug, Clone, Serialize)]
pub struct SteeringVerdict {
    pub party: usize,
    pub steerable_to_pure: bool,
    /// A direction that witnesses the verdict (present only when steerable).
    pub witness_direction: Option<BlochDirection>,
    pub branch_probabilities: [f64; 2],
    /// `tr(branch^2)` of each normalized branch (0 when a branch is empty).
    pub branch_purities: [f64; 2],
    /// `tr(branch0 * branch1)` of the normalized branches.
    pub branch_overlap: f64,
}

/// Result of the mutual steering check.
#[derive(Debug, Clone, Serialize)]
pub struct SteeringReport {
    pub party_verdicts: Vec<SteeringVerdict>,
    /// True when at least two parties can steer the rest to pure states.
    pub premise_satisfied: bool,
}

struct Candidate {
    valid: bool,
    badness: f64,
    probabilities: [f64; 2],
    purities: [f64; 2],
    overlap: f64,
}

fn relu(x: f64) -> f64 {
    x.max(0.0)
}

/// Scores a direction for one party. `badness == 0` iff every condition
/// holds; positive values measure how far the worst condition is from
/// holding, which steers the refinement stage.
fn assess(
    rho: &DensityMatrix,
    components: &[(f64, StateVector)],
    party: usize,
    direction: &BlochDirection,
    purity_tol: f64,
    distinctness_tol: f64,
) -> Candidate {
    let n = rho.n_qubits();
    let mut probabilities = [0.0; 2];
    let mut purities = [0.0; 2];
    let mut conditionals: [Option<DensityMatrix>; 2] = [None, None];
    let mut badness = 0.0;

    for outcome in [0usize, 1usize] {
        let spinor = ProjectorPair::eigenstate(direction, outcome as u8);
        let (p, raw) = project_party(rho, party, &spinor);
        probabilities[outcome] = p.max(0.0);
        badness += relu(BRANCH_PROB_FLOOR - p);
        if p >= BRANCH_PROB_FLOOR {
            let cond = DensityMatrix::from_raw_unchecked(
                n - 1,
                raw / Complex64::new(p, 0.0),
            );
            purities[outcome] = cond.purity();
            badness += relu(1.0 - purities[outcome] - purity_tol);
            conditionals[outcome] = Some(cond);
        }
    }

    let overlap = match (&conditionals[0], &conditionals[1]) {
        (Some(a), Some(b)) => a.overlap(b).unwrap_or(1.0).clamp(0.0, 1.0),
        _ => 1.0,
    };
    badness += relu(overlap - (1.0 - distinctness_tol));

    // Every spectral component must be split by the measurement.
    let mut split_ok = true;
    for (ev, comp) in components {
        if *ev <= EIGENVALUE_FLOOR {
            continue;
        }
        let spinor = ProjectorPair::eigenstate(direction, 0);
        let v0 = contract_qubit(comp.amplitudes(), n, party, &spinor);
        let w0: f64 = v0.iter().map(|z| z.norm_sqr()).sum();
        let margin = w0.min(1.0 - w0);
        if margin <= COMPONENT_SPLIT_TOL {
            split_ok = false;
        }
        badness += relu(COMPONENT_SPLIT_TOL - margin);
    }

    let valid = split_ok
        && probabilities.iter().all(|p| *p >= BRANCH_PROB_FLOOR)
        && conditionals.iter().all(|c| c.is_some())
        && purities.iter().all(|q| 1.0 - q <= purity_tol)
        && overlap <= 1.0 - distinctness_tol;
    Candidate { valid, badness, probabilities, purities, overlap }
}

fn verdict_from(party: usize, direction: &BlochDirection, cand: &Candidate) -> SteeringVerdict {
    SteeringVerdict {
        party,
        steerable_to_pure: cand.valid,
        witness_direction: cand.valid.then_some(*direction),
        branch_probabilities: cand.probabilities,
        branch_purities: cand.purities,
        branch_overlap: cand.overlap,
    }
}

fn grid_direction(idx: usize) -> BlochDirection {
    let i = idx / GRID_PHI;
    let j = idx % GRID_PHI;
    let theta = std::f64::consts::PI * i as f64 / (GRID_THETA - 1) as f64;
    let phi = std::f64::consts::TAU * j as f64 / GRID_PHI as f64;
    BlochDirection::new(theta, phi)
}

fn check_party_verdict(
    rho: &DensityMatrix,
    components: &[(f64, StateVector)],
    party: usize,
    purity_tol: f64,
    distinctness_tol: f64,
    exec: Exec,
) -> SteeringVerdict {
    let total = GRID_THETA * GRID_PHI;
    let scores: Vec<f64> = map_indexed(exec, total as u64, |idx| {
        assess(rho, components, party, &grid_direction(idx as usize), purity_tol, distinctness_tol)
            .badness
    });

    // First exact hit wins; otherwise refine around the best-scoring point.
    let mut best_idx = 0usize;
    for (idx, &score) in scores.iter().enumerate() {
        if score == 0.0 {
            let dir = grid_direction(idx);
            let cand = assess(rho, components, party, &dir, purity_tol, distinctness_tol);
            if cand.valid {
                return verdict_from(party, &dir, &cand);
            }
        }
        if score < scores[best_idx] {
            best_idx = idx;
        }
    }

    let mut dir = grid_direction(best_idx);
    let mut width = std::f64::consts::PI / GRID_THETA as f64;
    let score_at = |theta: f64, phi: f64| {
        assess(
            rho,
            components,
            party,
            &BlochDirection::new(theta, phi),
            purity_tol,
            distinctness_tol,
        )
        .badness
    };
    let mut best = scores[best_idx];
    for _ in 0..24 {
        let (mut th, mut ph) = (dir.theta(), dir.phi());
        for _ in 0..2 {
            let (t, s) = golden_min(|x| score_at(x, ph), th - width, th + width);
            if s < best {
                best = s;
                th = t;
            }
            let (p, s) = golden_min(|x| score_at(th, x), ph - width, ph + width);
            if s < best {
                best = s;
                ph = p;
            }
        }
        dir = BlochDirection::new(th, ph);
        width *= 0.6;
        if best == 0.0 {
            break;
        }
    }
    let cand = assess(rho, components, party, &dir, purity_tol, distinctness_tol);
    verdict_from(party, &dir, &cand)
}

/// Golden-section minimizer on `[a, b]`; returns `(argmin, min)`.
fn golden_min(mut f: impl FnMut(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    const INVPHI: f64 = 0.618_033_988_749_894_8;
    let (mut lo, mut hi) = (a.min(b), a.max(b));
    let mut x1 = hi - INVPHI * (hi - lo);
    let mut x2 = lo + INVPHI * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..48 {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INVPHI * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INVPHI * (hi - lo);
            f2 = f(x2);
        }
    }
    let mid = 0.5 * (lo + hi);
    (mid, f(mid))
}

fn mutual_steering_check_impl(
    rho: &DensityMatrix,
    purity_tol: f64,
    distinctness_tol: f64,
    exec: Exec,
) -> Result<SteeringReport> {
    if rho.n_qubits() < 2 {
        return Err(Error::Dimension("the steering check needs at least two qubits".into()));
    }
    for (name, tol) in [("purity_tol", purity_tol), ("distinctness_tol", distinctness_tol)] {
        if !tol.is_finite() || tol <= 0.0 || tol >= 1.0 {
            return Err(Error::InvalidArgument(format!(
                "{name} must lie strictly between 0 and 1, got {tol}"
            )));
        }
    }
    let components = rho.spectral_decomposition();
    let verdicts: Vec<SteeringVerdict> = (1..=rho.n_qubits())
        .map(|party| {
            check_party_verdict(rho, &components, party, purity_tol, distinctness_tol, exec)
        })
        .collect();
    let steerable = verdicts.iter().filter(|v| v.steerable_to_pure).count();
    Ok(SteeringReport { party_verdicts: verdicts, premise_satisfied: steerable >= 2 })
}

/// Checks every party for steerability-to-pure, sweeping a direction grid
/// (with local refinement) per party. `premise_satisfied` requires at least
/// two steerable parties.
pub fn mutual_steering_check(
    rho: &DensityMatrix,
    purity_tol: f64,
    distinctness_tol: f64,
) -> Result<SteeringReport> {
    mutual_steering_check_impl(rho, purity_tol, distinctness_tol, Exec::auto())
}

/// Sequential twin of [`mutual_steering_check`].
pub fn mutual_steering_check_seq(
    rho: &DensityMatrix,
    purity_tol: f64,
    distinctness_tol: f64,
) -> Result<SteeringReport> {
    mutual_steering_check_impl(rho, purity_tol, distinctness_tol, Exec::Seq)
}
