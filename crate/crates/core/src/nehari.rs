//! The fibering map `M(t) = I(tv)`, the Nehari projection `v ↦ t_v v`, the
//! homeomorphism `m: S₁ → 𝒩` and the reduced functional `Ψ = I∘m`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functional::Problem;
use crate::grid::Field;
use crate::quadrature::brent_root;

const SCAN_START: f64 = 1e-6;
const SCAN_END: f64 = 1e12;
/// Doublings past the first sign change used to certify that `M'` stays negative.
const CERTIFY_DOUBLINGS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiberingResult {
    /// The maximizer `t_v`.
    pub t_star: f64,
    /// `M(t_v)`.
    pub value: f64,
    /// `|M'(t_v)|`.
    pub derivative_residual: f64,
    /// `(t_lo, t_hi)` with `M'(t_lo) > 0 > M'(t_hi)`.
    pub bracket: (f64, f64),
    /// Brent iterations.
    pub iterations: usize,
    /// Sign changes of `M'` seen by the scan (1 for an admissible `v`; 0 when warm-started).
    pub sign_changes: usize,
}

/// Ray constants `‖v‖²_E` and `∫|v|^{2*}` for repeated fibering evaluations.
#[derive(Debug, Clone, Copy)]
struct Ray {
    a: f64,
    c: f64,
}

fn ray(p: &Problem, v: &[f64]) -> Result<Ray> {
    let a = p.inner_e(v, v);
    if !(a > 0.0) {
        return Err(Error::InvalidParameter("the fibering map needs v != 0".into()));
    }
    Ok(Ray { a, c: p.crit_integral(v) })
}

/// `M'(t)/t = ‖v‖² − ∫h(tv)v/t − t^{2*−2}∫|v|^{2*}`.
fn reduced_derivative(p: &Problem, v: &[f64], r: Ray, t: f64) -> f64 {
    let (_, hv) = p.h_moments(v, t);
    r.a - hv / t - t.powf(p.critical_exponent() - 2.0) * r.c
}

fn fiber_value(p: &Problem, v: &[f64], r: Ray, t: f64) -> f64 {
    let (big, _) = p.h_moments(v, t);
    0.5 * t * t * r.a - big - t.powf(p.critical_exponent()) * r.c / p.critical_exponent()
}

/// `M(t) = I(tv)`.
pub fn fibering_map(p: &Problem, v: &Field, t: f64) -> Result<f64> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::Domain(format!("fibering map needs t > 0, got {t}")));
    }
    Ok(fiber_value(p, v.values(), ray(p, v.values())?, t))
}

/// `M'(t) = t‖v‖² − ∫h(tv)v − t^{2*−1}∫|v|^{2*}`.
pub fn fibering_derivative(p: &Problem, v: &Field, t: f64) -> Result<f64> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::Domain(format!("fibering map needs t > 0, got {t}")));
    }
    Ok(t * reduced_derivative(p, v.values(), ray(p, v.values())?, t))
}

/// Signs of `M'` on the scan ladder `t = 10⁻⁶·2^k`; used to certify uniqueness.
pub fn derivative_sign_pattern(p: &Problem, v: &Field, ts: &[f64]) -> Result<Vec<bool>> {
    let r = ray(p, v.values())?;
    Ok(ts.iter().map(|&t| reduced_derivative(p, v.values(), r, t) > 0.0).collect())
}

/// The unique `t_v > 0` with `t_v v ∈ 𝒩`, by a doubling scan from `10⁻⁶` and Brent refinement.
pub fn project_nehari(p: &Problem, v: &Field) -> Result<FiberingResult> {
    project_values(p, v.values(), None)
}

/// As [`project_nehari`], trying the bracket `[t/1.5, 1.5t]` around a previous `t` first.
pub fn project_nehari_warm(p: &Problem, v: &Field, t_guess: f64) -> Result<FiberingResult> {
    project_values(p, v.values(), Some(t_guess))
}

pub(crate) fn project_values(p: &Problem, v: &[f64], warm: Option<f64>) -> Result<FiberingResult> {
    let r = ray(p, v)?;
    let phi = |t: f64| reduced_derivative(p, v, r, t);
    let mut found = None;
    if let Some(t0) = warm.filter(|t| *t > 0.0 && t.is_finite()) {
        let (lo, hi) = (t0 / 1.5, t0 * 1.5);
        let (flo, fhi) = (phi(lo), phi(hi));
        if flo > 0.0 && fhi < 0.0 {
            found = Some((lo, hi, 0usize));
        }
    }
    let (lo, hi, changes) = match found {
        Some(b) => b,
        None => scan(&phi)?,
    };
    let xtol = 4.0 * f64::EPSILON * hi;
    let (t_star, iterations) = brent_root(phi, lo, hi, xtol, 200)?;
    let derivative_residual = (t_star * phi(t_star)).abs();
    Ok(FiberingResult {
        t_star,
        value: fiber_value(p, v, r, t_star),
        derivative_residual,
        bracket: (lo, hi),
        iterations,
        sign_changes: changes,
    })
}

fn scan<F: Fn(f64) -> f64>(phi: &F) -> Result<(f64, f64, usize)> {
    let mut t = SCAN_START;
    let mut prev_pos = phi(t) > 0.0;
    if !prev_pos {
        return Err(Error::Invariant(format!("M'(t) is not positive at t = {SCAN_START:e}")));
    }
    let mut bracket = None;
    let mut changes = 0;
    let mut extra = 0;
    while t < SCAN_END {
        let next = 2.0 * t;
        let pos = phi(next) > 0.0;
        if pos != prev_pos {
            changes += 1;
            if bracket.is_none() {
                bracket = Some((t, next));
            }
        }
        prev_pos = pos;
        t = next;
        if bracket.is_some() {
            extra += 1;
            if extra >= CERTIFY_DOUBLINGS {
                break;
            }
        }
    }
    match bracket {
        Some((lo, hi)) => Ok((lo, hi, changes)),
        None => Err(Error::BracketNotFound { t_max: SCAN_END }),
    }
}

/// `m(w) = t_w w` for `‖w‖_E = 1`.
pub fn m_map(p: &Problem, w: &Field) -> Result<(Field, FiberingResult)> {
    let norm = p.norm_e(w.values());
    if (norm - 1.0).abs() > 1e-8 {
        return Err(Error::InvalidParameter(format!("m needs ||w||_E = 1, got {norm}")));
    }
    let fr = project_nehari(p, w)?;
    Ok((w.scale(fr.t_star), fr))
}

/// `m⁻¹(v) = v/‖v‖_E`.
pub fn m_inverse(p: &Problem, v: &Field) -> Result<Field> {
    let norm = p.norm_e(v.values());
    if !(norm > 0.0) {
        return Err(Error::InvalidParameter("m inverse needs v != 0".into()));
    }
    Ok(v.scale(1.0 / norm))
}

/// `Ψ(w) = I(m(w))`.
pub fn psi(p: &Problem, w: &Field) -> Result<f64> {
    Ok(m_map(p, w)?.1.value)
}

/// `Ψ` at `w` with its tangential `E`-gradient.
#[derive(Debug, Clone)]
pub struct PsiEval {
    pub fibering: FiberingResult,
    /// `‖m(w)‖ (z − ⟨z, w⟩_E w)`, `z` the `E` Riesz representative of `I'(m(w))`.
    pub gradient: Vec<f64>,
    pub gradient_norm: f64,
}

pub(crate) fn psi_eval_values(p: &Problem, w: &[f64], warm: Option<f64>) -> Result<PsiEval> {
    let fibering = project_values(p, w, warm)?;
    let t = fibering.t_star;
    let v: Vec<f64> = w.iter().map(|x| t * x).collect();
    let z = p.riesz_e(&p.residual(&v));
    let zw = p.inner_e(&z, w) / p.inner_e(w, w);
    let mut gradient: Vec<f64> = z.iter().zip(w).map(|(a, b)| t * (a - zw * b)).collect();
    p.constrain(&mut gradient);
    let gradient_norm = p.norm_e(&gradient);
    Ok(PsiEval { fibering, gradient, gradient_norm })
}

/// Tangential gradient of `Ψ` at `w` (Lemma: `⟨Ψ'(w), z⟩ = ‖m(w)‖⟨I'(m(w)), z⟩` on the tangent space).
pub fn psi_gradient_tangential(p: &Problem, w: &Field) -> Result<Field> {
    let norm = p.norm_e(w.values());
    if (norm - 1.0).abs() > 1e-8 {
        return Err(Error::InvalidParameter(format!("Psi needs ||w||_E = 1, got {norm}")));
    }
    let eval = psi_eval_values(p, w.values(), None)?;
    w.with_values(eval.gradient)
}

/// `⟨I'(v), v⟩ = ‖v‖² − ∫h(v)v − ∫|v|^{2*}`.
pub fn nehari_residual(p: &Problem, v: &Field) -> f64 {
    p.pairing(v.values(), v.values())
}
