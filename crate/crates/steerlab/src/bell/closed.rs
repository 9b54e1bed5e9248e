//! Closed-form quantum values of the catalog functionals on the matching
//! family states, plus the one-parameter angle choices (best angles for
//! the correlator families, positivity-witness angles for the Hardy
//! families).
//!
//! Every function here is checked against direct [`super::evaluate`] runs
//! in the test suites; the closed forms are the fast path and the ground
//! truth for threshold classification.

use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{Error, Result};
use crate::qcore::MAX_QUBITS;
use crate::states::TwoQubitFamilyParams;

use super::{reference_settings, FunctionalKind, SettingsTable};

const INVPHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section maximum of a unimodal function on `[lo, hi]`.
/// Returns `(argmax, max)` with the bracket narrowed `iters` times.
pub(crate) fn golden_max<F: FnMut(f64) -> f64>(
    mut lo: f64,
    mut hi: f64,
    iters: usize,
    mut f: F,
) -> (f64, f64) {
    let mut a = hi - INVPHI * (hi - lo);
    let mut b = lo + INVPHI * (hi - lo);
    let mut fa = f(a);
    let mut fb = f(b);
    for _ in 0..iters {
        if fa > fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - INVPHI * (hi - lo);
            fa = f(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + INVPHI * (hi - lo);
            fb = f(b);
        }
    }
    let mid = 0.5 * (lo + hi);
    (mid, f(mid))
}

/// Scan `points` samples of `f` on `[lo, hi]`, then golden-refine around
/// the best sample. Guards against local maxima the pure golden search
/// would miss.
fn scan_then_golden<F: FnMut(f64) -> f64>(
    lo: f64,
    hi: f64,
    points: usize,
    mut f: F,
) -> (f64, f64) {
    let step = (hi - lo) / points as f64;
    let mut best_x = lo;
    let mut best_v = f(lo);
    for i in 1..=points {
        let x = lo + step * i as f64;
        let v = f(x);
        if v > best_v {
            best_v = v;
            best_x = x;
        }
    }
    let (x, v) = golden_max((best_x - step).max(lo), (best_x + step).min(hi), 80, &mut f);
    if v > best_v {
        (x, v)
    } else {
        (best_x, best_v)
    }
}

/// CHSH value of the two-qubit family under the reference settings with
/// second-party polar angle `theta_b1`:
/// `cos(theta) + V sin(zeta) sin(theta)`.
pub fn chsh_value(params: &TwoQubitFamilyParams, theta_b1: f64) -> f64 {
    theta_b1.cos() + params.v() * params.zeta().sin() * theta_b1.sin()
}

/// The `theta_b1` maximizing [`chsh_value`], found by golden-section
/// search (the landscape is a single cosine hump).
pub fn chsh_best_angle(params: &TwoQubitFamilyParams) -> f64 {
    let (angle, _) = golden_max(-FRAC_PI_2, FRAC_PI_2, 96, |t| chsh_value(params, t));
    angle
}

/// Maximal CHSH value `hypot(1, V sin zeta)` of the family, together with
/// reference settings attaining it.
pub fn chsh_max_closed_form(params: &TwoQubitFamilyParams) -> (f64, SettingsTable) {
    let max = (1.0f64).hypot(params.v() * params.zeta().sin());
    let settings =
        reference_settings(FunctionalKind::Chsh, 2, chsh_best_angle(params), params.tau())
            .expect("chsh reference settings are valid for finite angles");
    (max, settings)
}

fn check_unit_interval(value: f64, what: &str) -> Result<f64> {
    if value.is_finite() && (0.0..=1.0).contains(&value) {
        Ok(value)
    } else {
        Err(Error::InvalidArgument(format!("{what} must lie in [0, 1], got {value}")))
    }
}

fn check_finite(value: f64, what: &str) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::InvalidArgument(format!("{what} must be finite")))
    }
}

/// The `(A, B)` pair of the composite Hardy closed form:
/// `A = V sin(zeta) F` and `B = 1 + F^2 + (1 - F^2) V cos(zeta)`, with
/// `F` the product of the tail overlaps.
fn composite_ab(nu1: f64, zeta: f64, tail_coeffs: &[f64]) -> Result<(f64, f64)> {
    check_unit_interval(nu1, "nu1")?;
    check_finite(zeta, "zeta")?;
    let mut f_prod = 1.0;
    for (i, &f) in tail_coeffs.iter().enumerate() {
        if !f.is_finite() || f.abs() > 1.0 {
            return Err(Error::InvalidArgument(format!(
                "tail coefficient {i} must lie in [-1, 1], got {f}"
            )));
        }
        f_prod *= f;
    }
    let v = 2.0 * nu1 - 1.0;
    let a = v * zeta.sin() * f_prod;
    let b = 1.0 + f_prod * f_prod + (1.0 - f_prod * f_prod) * v * zeta.cos();
    Ok((a, b))
}

fn check_composite_shape(n: usize, prefix_len: usize, tails: usize) -> Result<()> {
    if n < 2 || n > MAX_QUBITS {
        return Err(Error::InvalidArgument(format!(
            "composite closed form needs 2 <= n <= {MAX_QUBITS}, got {n}"
        )));
    }
    if prefix_len + 2 > n {
        return Err(Error::InvalidArgument(format!(
            "composite prefix {prefix_len} leaves fewer than two Hardy parties of {n}"
        )));
    }
    if tails != n - 2 - prefix_len {
        return Err(Error::Dimension(format!(
            "composite with n = {n}, prefix {prefix_len} needs {} tail coefficients, got {tails}",
            n - 2 - prefix_len
        )));
    }
    Ok(())
}

/// Closed-form value of `composite(prefix_len)` on the matching family
/// state under the reference settings with steering angle `vartheta`:
///
/// `(2 A c2 s2 - B c2^2) / 2^(prefix_len + 1)`
///
/// with `c2 = cos^2(vartheta/2)`, `s2 = sin^2(vartheta/2)` and `(A, B)`
/// from the family parameters. The value does not depend on the family
/// phase `tau` (the reference settings absorb it).
pub fn composite_closed_form(
    n: usize,
    prefix_len: usize,
    nu1: f64,
    zeta: f64,
    tail_coeffs: &[f64],
    vartheta: f64,
) -> Result<f64> {
    check_composite_shape(n, prefix_len, tail_coeffs.len())?;
    check_finite(vartheta, "vartheta")?;
    let (a, b) = composite_ab(nu1, zeta, tail_coeffs)?;
    let half = 0.5 * vartheta;
    let c2 = half.cos() * half.cos();
    let s2 = half.sin() * half.sin();
    Ok((2.0 * a * c2 * s2 - b * c2 * c2) / 2.0f64.powi(prefix_len as i32 + 1))
}

/// The angle `2 atan(sqrt(B/A))` at which the composite closed form equals
/// `B c2^2 / 2^(prefix_len+1) > 0`, witnessing violation. Requires `A > 0`
/// (otherwise no angle makes the functional positive).
pub fn composite_witness_angle(
    n: usize,
    prefix_len: usize,
    nu1: f64,
    zeta: f64,
    tail_coeffs: &[f64],
) -> Result<f64> {
    check_composite_shape(n, prefix_len, tail_coeffs.len())?;
    let (a, b) = composite_ab(nu1, zeta, tail_coeffs)?;
    if a <= 0.0 {
        return Err(Error::Domain(format!(
            "witness angle needs V sin(zeta) * prod(f) > 0, got {a}"
        )));
    }
    Ok(2.0 * (b / a).sqrt().atan())
}

/// Three-party Hardy closed form; the single tail qubit is parametrized
/// by its overlap angle `phi` (tail coefficient `cos(phi)`).
pub fn hardy3_closed_form(nu1: f64, zeta: f64, phi: f64, vartheta: f64) -> Result<f64> {
    check_finite(phi, "phi")?;
    composite_closed_form(3, 0, nu1, zeta, &[phi.cos()], vartheta)
}

/// Witness angle for [`hardy3_closed_form`]; domain error when
/// `V sin(zeta) cos(phi) <= 0`.
pub fn hardy3_witness_angle(nu1: f64, zeta: f64, phi: f64) -> Result<f64> {
    check_finite(phi, "phi")?;
    composite_witness_angle(3, 0, nu1, zeta, &[phi.cos()])
}

fn check_parity_family(n: usize, even: bool) -> Result<()> {
    let (lo, parity) = if even { (2, 0) } else { (3, 1) };
    if n < lo || n > MAX_QUBITS || n % 2 != parity {
        return Err(Error::InvalidArgument(format!(
            "need {} n in [{lo}, {MAX_QUBITS}], got {n}",
            if even { "even" } else { "odd" }
        )));
    }
    Ok(())
}

/// Closed-form value of the even-`n` correlator functional on the
/// all-`|0..0>`/`|1..1>` tail family under the reference settings:
/// `1 + (V sin(zeta) sin^n(theta11) - (1 - cos(theta11))^n) / 2^(n-1)`.
pub fn even_n_closed_form(n: usize, nu1: f64, zeta: f64, theta11: f64) -> Result<f64> {
    check_parity_family(n, true)?;
    check_unit_interval(nu1, "nu1")?;
    check_finite(zeta, "zeta")?;
    check_finite(theta11, "theta11")?;
    let c = (2.0 * nu1 - 1.0) * zeta.sin();
    let gain = c * theta11.sin().powi(n as i32) - (1.0 - theta11.cos()).powi(n as i32);
    Ok(1.0 + gain / 2.0f64.powi(n as i32 - 1))
}

/// Closed-form value of the odd-`n` correlator functional on the same
/// family: `1 + (V sin(zeta) sin(theta11) - cos(theta11) - 1) / 2^(n-1)`.
pub fn odd_n_closed_form(n: usize, nu1: f64, zeta: f64, theta11: f64) -> Result<f64> {
    check_parity_family(n, false)?;
    check_unit_interval(nu1, "nu1")?;
    check_finite(zeta, "zeta")?;
    check_finite(theta11, "theta11")?;
    let c = (2.0 * nu1 - 1.0) * zeta.sin();
    let gain = c * theta11.sin() - theta11.cos() - 1.0;
    Ok(1.0 + gain / 2.0f64.powi(n as i32 - 1))
}

/// [`odd_n_closed_form`] at `n = 3`.
pub fn i3_closed_form(nu1: f64, zeta: f64, theta11: f64) -> Result<f64> {
    odd_n_closed_form(3, nu1, zeta, theta11)
}

/// The `theta11` maximizing [`even_n_closed_form`] over `[0, pi]`,
/// found by scan plus golden refinement.
pub fn even_n_best_angle(n: usize, nu1: f64, zeta: f64) -> Result<f64> {
    check_parity_family(n, true)?;
    check_unit_interval(nu1, "nu1")?;
    check_finite(zeta, "zeta")?;
    let (angle, _) = scan_then_golden(0.0, PI, 128, |t| {
        even_n_closed_form(n, nu1, zeta, t).expect("validated above")
    });
    Ok(angle)
}

/// The `theta11` maximizing [`odd_n_closed_form`] over `[0, pi]`:
/// `pi/2 + atan(1/(V sin zeta))` when `V sin(zeta) > 0`, else `pi`.
pub fn odd_n_best_angle(n: usize, nu1: f64, zeta: f64) -> Result<f64> {
    check_parity_family(n, false)?;
    check_unit_interval(nu1, "nu1")?;
    check_finite(zeta, "zeta")?;
    let c = (2.0 * nu1 - 1.0) * zeta.sin();
    if c > 0.0 {
        Ok(FRAC_PI_2 + (1.0 / c).atan())
    } else {
        Ok(PI)
    }
}
