//! Aubin–Talenti instantons, cutoff test functions and the critical-level estimates.

use std::fmt::Write as _;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functional::Problem;
use crate::grid::{Boundary, Field, Grid};
use crate::nehari::project_nehari;
use crate::nonlinearity::{check_growth_conditions, critical_exponent, default_s_samples, ModelSpec};
use crate::quadrature::brent_root;
use crate::solver::level_threshold;

/// `ω_ε(r) = (N(N−2)ε)^{(N−2)/4} / (ε + r²)^{(N−2)/2}`.
pub fn instanton_profile(dimension: usize, eps: f64, r: f64) -> f64 {
    let n = dimension as f64;
    (n * (n - 2.0) * eps).powf((n - 2.0) / 4.0) / (eps + r * r).powf((n - 2.0) / 2.0)
}

/// Quintic bridge: 1 on `[0, ϱ/2]`, 0 on `[ϱ, ∞)`, `C²` in between.
pub fn cutoff(rho: f64, r: f64) -> f64 {
    let x = ((r - rho / 2.0) / (rho / 2.0)).clamp(0.0, 1.0);
    1.0 - x * x * x * (10.0 - 15.0 * x + 6.0 * x * x)
}

/// `η(ε)`: `ε^{1/2}` for N=3, `ε|ln ε|` for N=4, `ε` for N≥5.
pub fn eta(dimension: usize, eps: f64) -> f64 {
    match dimension {
        3 => eps.sqrt(),
        4 => eps * eps.ln().abs(),
        _ => eps,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstantonParams {
    pub eps: f64,
    /// Cutoff radius `ϱ`.
    pub rho: f64,
    pub dimension: usize,
}

impl InstantonParams {
    pub fn new(dimension: usize, eps: f64, rho: f64) -> Result<Self> {
        let p = InstantonParams { eps, rho, dimension };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dimension < 3 {
            return Err(Error::InvalidParameter(format!("dimension must be at least 3, got {}", self.dimension)));
        }
        if !(self.eps.is_finite() && self.eps > 0.0) {
            return Err(Error::InvalidParameter(format!("eps must be positive, got {}", self.eps)));
        }
        if !(self.rho.is_finite() && self.rho > 0.0) {
            return Err(Error::InvalidParameter(format!("rho must be positive, got {}", self.rho)));
        }
        if self.eps.sqrt() >= self.rho / 2.0 {
            return Err(Error::InvalidParameter(format!(
                "sqrt(eps) = {} must be below rho/2 = {}",
                self.eps.sqrt(),
                self.rho / 2.0
            )));
        }
        Ok(())
    }

    /// Checks `B_ϱ ⊂ Ω` and the model dimension.
    pub fn check_model(&self, model: &ModelSpec) -> Result<()> {
        if model.dimension() != self.dimension {
            return Err(Error::InvalidParameter(format!(
                "instanton dimension {} does not match model dimension {}",
                self.dimension,
                model.dimension()
            )));
        }
        if self.rho > model.omega_radius() {
            return Err(Error::InvalidParameter(format!(
                "rho = {} exceeds the omega radius {}",
                self.rho,
                model.omega_radius()
            )));
        }
        Ok(())
    }

    /// Smallest `ε` the grid resolves: `(4h)²`.
    pub fn min_eps(grid: &Grid) -> f64 {
        (4.0 * grid.spacing()).powi(2)
    }

    fn check_grid(&self, grid: &Grid) -> Result<()> {
        self.validate()?;
        if grid.dimension() != self.dimension {
            return Err(Error::Grid(format!(
                "grid dimension {} does not match instanton dimension {}",
                grid.dimension(),
                self.dimension
            )));
        }
        let min_eps = Self::min_eps(grid);
        if self.eps < min_eps {
            return Err(Error::Unresolved { eps: self.eps, min_eps });
        }
        Ok(())
    }
}

/// Nodal values of the uncut `ω_ε` (free boundary on radial grids).
pub fn instanton(params: &InstantonParams, grid: &Arc<Grid>) -> Result<Field> {
    params.check_grid(grid)?;
    let boundary = match **grid {
        Grid::Radial(_) => Boundary::Free,
        Grid::Periodic(_) => Boundary::Periodic,
    };
    Field::from_radial_fn(grid.clone(), boundary, |r| instanton_profile(params.dimension, params.eps, r))
}

#[derive(Debug, Clone)]
pub struct TestFunction {
    pub params: InstantonParams,
    /// `u_ε = φω_ε`.
    pub u: Field,
    /// `v_ε = u_ε/‖u_ε‖_{2*}`.
    pub v: Field,
    /// `∫|u_ε|^{2*}`.
    pub u_crit_integral: f64,
}

/// The cut-off instanton `u_ε` and its `L^{2*}` normalization `v_ε`.
pub fn test_function(params: &InstantonParams, grid: &Arc<Grid>) -> Result<TestFunction> {
    params.check_grid(grid)?;
    if grid.inner_radius() < params.rho {
        return Err(Error::Grid(format!(
            "grid covers radius {} but the cutoff needs {}",
            grid.inner_radius(),
            params.rho
        )));
    }
    let (n, eps, rho) = (params.dimension, params.eps, params.rho);
    let u = Field::from_radial_fn(grid.clone(), Field::default_boundary(grid), |r| {
        cutoff(rho, r) * instanton_profile(n, eps, r)
    })?;
    let u_crit_integral = u.lp_integral(critical_exponent(n));
    let norm = u_crit_integral.powf(1.0 / critical_exponent(n));
    let v = u.scale(1.0 / norm);
    Ok(TestFunction { params: *params, u, v, u_crit_integral })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelBound {
    pub eps: f64,
    pub rho: f64,
    /// `max_t I(t v_ε)`.
    pub max_level: f64,
    /// `(1/N) S^{N/2}`.
    pub threshold: f64,
    /// `threshold − max_level`; positive when the strict inequality holds.
    pub margin: f64,
    pub below_threshold: bool,
    /// The fibering maximizer `t_ε`.
    pub t_eps: f64,
    /// `∫_{|x|<√ε} H(x, t_ε v_ε)`.
    pub core_integral: f64,
    pub eta: f64,
    /// `core_integral / η(ε)`.
    pub core_ratio: f64,
    /// Whether the growth suite's divergence entry (4) passes for the model.
    pub f4_holds: bool,
    pub warnings: Vec<String>,
}

fn f4_holds(model: &ModelSpec) -> bool {
    let r = model.omega_radius();
    let n = model.dimension();
    let xs = vec![vec![0.0; n], {
        let mut x = vec![0.0; n];
        x[0] = 0.5 * r;
        x
    }];
    check_growth_conditions(model, &default_s_samples(), &xs).entry("(4)").is_some_and(|e| e.pass)
}

fn level_at(problem: &Problem, tf: &TestFunction) -> Result<(f64, f64, f64)> {
    let fr = project_nehari(problem, &tf.v)?;
    let model = problem.model();
    let grid = problem.grid();
    let h: Vec<f64> = tf
        .v
        .values()
        .iter()
        .enumerate()
        .map(|(j, &x)| model.big_h_eval(&grid.point(j), fr.t_star * x))
        .collect();
    let core = grid.ball_integral(tf.params.eps.sqrt(), &h);
    Ok((fr.value, fr.t_star, core))
}

/// `max_t I(t v_ε)` against `(1/N) S^{N/2}` for one `ε`.
pub fn level_bound_check(model: &ModelSpec, params: &InstantonParams, grid: &Arc<Grid>) -> Result<LevelBound> {
    params.check_model(model)?;
    let (_, threshold) = level_threshold(model.dimension())?;
    let problem = Problem::new(model.clone(), grid.clone())?;
    let tf = test_function(params, grid)?;
    let (max_level, t_eps, core_integral) = level_at(&problem, &tf)?;
    let f4 = f4_holds(model);
    let mut warnings = Vec::new();
    if !f4 {
        warnings.push("growth condition (4) fails; the level bound is not guaranteed".to_string());
    }
    let eta = eta(model.dimension(), params.eps);
    Ok(LevelBound {
        eps: params.eps,
        rho: params.rho,
        max_level,
        threshold,
        margin: threshold - max_level,
        below_threshold: max_level < threshold,
        t_eps,
        core_integral,
        eta,
        core_ratio: core_integral / eta,
        f4_holds: f4,
        warnings,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub eps: f64,
    /// `‖∇v_ε‖²`.
    pub gradient_sq: f64,
    /// `‖∇v_ε‖² − S`.
    pub gradient_excess: f64,
    /// `‖v_ε‖₂²`.
    pub l2_sq: f64,
    /// `‖v_ε‖₂² / η(ε)`.
    pub l2_ratio: f64,
    /// `∫|u_ε|^{2*}`.
    pub u_crit_integral: f64,
    /// `‖v_ε‖_{2*}`.
    pub v_crit_norm: f64,
    pub t_eps: f64,
    pub max_level: f64,
    pub margin: f64,
    pub core_integral: f64,
    pub core_ratio: f64,
}

/// Least-squares line through `(ln ε, ln y)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub expected: f64,
    pub points: usize,
}

fn log_log_fit(x: &[f64], y: &[f64], expected: f64) -> RateFit {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    RateFit { slope, intercept: my - slope * mx, expected, points: lx.len() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub dimension: usize,
    pub rho: f64,
    pub sobolev_constant: f64,
    pub threshold: f64,
    pub points: Vec<SweepPoint>,
    /// `(ε_min, ε_max)` of the points entering the fits.
    pub fit_window: (f64, f64),
    /// Rate of `‖∇v_ε‖² − S`; expected `(N−2)/2`.
    pub gradient_fit: RateFit,
    /// Rate of `‖v_ε‖₂²`; expected `1/2` for N=3 and `1` otherwise.
    pub l2_fit: RateFit,
    /// `(max − min)/min` of `‖v_ε‖₂²/η(ε)` over the fit window.
    pub l2_ratio_spread: f64,
    /// `K` from `∫|u_ε|^{2*} = K + Cε^{N/2}` at the two smallest `ε`.
    pub k_extrapolated: f64,
    /// `(T₁, T₂)`: the range of `t_ε` over the sweep.
    pub t_bounds: (f64, f64),
    /// `min_ε max_t I(t v_ε)`, an upper bound for the ground-state level.
    pub level_upper_bound: f64,
    /// Margin at the smallest `ε`.
    pub final_margin: f64,
    /// `∫_{|x|<√ε} H(t_ε v_ε)/η(ε)` non-decreasing as `ε` decreases.
    pub core_ratio_growing: bool,
    pub f4_holds: bool,
    pub warnings: Vec<String>,
}

impl SweepReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "eps,gradient_sq,gradient_excess,l2_sq,l2_ratio,u_crit_integral,v_crit_norm,t_eps,max_level,margin,core_integral,core_ratio\n",
        );
        for p in &self.points {
            let _ = writeln!(
                out,
                "{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
                p.eps,
                p.gradient_sq,
                p.gradient_excess,
                p.l2_sq,
                p.l2_ratio,
                p.u_crit_integral,
                p.v_crit_norm,
                p.t_eps,
                p.max_level,
                p.margin,
                p.core_integral,
                p.core_ratio
            );
        }
        out
    }
}

/// Sweeps `ε` over a decreasing list of at least five values with `ϱ` the radius of Ω,
/// measuring the rates of the instanton estimates and the level bound at each point.
/// The largest `ε` is left out of the fits.
pub fn eps_sweep(model: &ModelSpec, eps_list: &[f64], grid: &Arc<Grid>) -> Result<SweepReport> {
    if eps_list.len() < 5 {
        return Err(Error::InvalidParameter(format!("a sweep needs at least 5 values of eps, got {}", eps_list.len())));
    }
    if eps_list.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::InvalidParameter("eps values must be strictly decreasing".into()));
    }
    let n = model.dimension();
    let rho = model.omega_radius();
    let params = eps_list
        .iter()
        .map(|&eps| {
            let p = InstantonParams::new(n, eps, rho)?;
            p.check_grid(grid)?;
            Ok(p)
        })
        .collect::<Result<Vec<_>>>()?;
    let (s, threshold) = level_threshold(n)?;
    let problem = Problem::new(model.clone(), grid.clone())?;
    let crit = critical_exponent(n);
    let points = params
        .par_iter()
        .map(|p| {
            let tf = test_function(p, grid)?;
            let (max_level, t_eps, core_integral) = level_at(&problem, &tf)?;
            let gradient_sq = tf.v.gradient_sq();
            let l2_sq = tf.v.norm_l2_sq();
            Ok(SweepPoint {
                eps: p.eps,
                gradient_sq,
                gradient_excess: gradient_sq - s,
                l2_sq,
                l2_ratio: l2_sq / eta(n, p.eps),
                u_crit_integral: tf.u_crit_integral,
                v_crit_norm: tf.v.norm_lp(crit),
                t_eps,
                max_level,
                margin: threshold - max_level,
                core_integral,
                core_ratio: core_integral / eta(n, p.eps),
            })
        })
        .collect::<Result<Vec<SweepPoint>>>()?;

    let window = &points[1..];
    let eps: Vec<f64> = window.iter().map(|p| p.eps).collect();
    let excess: Vec<f64> = window.iter().map(|p| p.gradient_excess).collect();
    let l2: Vec<f64> = window.iter().map(|p| p.l2_sq).collect();
    let gradient_fit = log_log_fit(&eps, &excess, (n as f64 - 2.0) / 2.0);
    let l2_fit = log_log_fit(&eps, &l2, if n == 3 { 0.5 } else { 1.0 });
    let ratios: Vec<f64> = window.iter().map(|p| p.l2_ratio).collect();
    let rmax = ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let rmin = ratios.iter().cloned().fold(f64::INFINITY, f64::min);

    let k = points.len();
    let (e1, e2) = (points[k - 2].eps.powf(n as f64 / 2.0), points[k - 1].eps.powf(n as f64 / 2.0));
    let (i1, i2) = (points[k - 2].u_crit_integral, points[k - 1].u_crit_integral);
    let k_extrapolated = (i2 * e1 - i1 * e2) / (e1 - e2);

    let ts = points.iter().map(|p| p.t_eps);
    let t_bounds = (ts.clone().fold(f64::INFINITY, f64::min), ts.fold(f64::NEG_INFINITY, f64::max));
    let level_upper_bound = points.iter().map(|p| p.max_level).fold(f64::INFINITY, f64::min);
    let core_ratio_growing = points.windows(2).all(|w| w[1].core_ratio >= w[0].core_ratio);
    let f4 = f4_holds(model);
    let mut warnings = Vec::new();
    if !f4 {
        warnings.push("growth condition (4) fails; the level bound is not guaranteed".to_string());
    }
    if excess.iter().any(|e| !(*e > 0.0)) {
        warnings.push("non-positive gradient excess in the fit window; the grid is too coarse".to_string());
    }
    Ok(SweepReport {
        dimension: n,
        rho,
        sobolev_constant: s,
        threshold,
        fit_window: (eps[eps.len() - 1], eps[0]),
        final_margin: points[k - 1].margin,
        points,
        gradient_fit,
        l2_fit,
        l2_ratio_spread: (rmax - rmin) / rmin,
        k_extrapolated,
        t_bounds,
        level_upper_bound,
        core_ratio_growing,
        f4_holds: f4,
        warnings,
    })
}

/// Maximizer and maximum of `Φ(s) = s²/2 ∫|∇v_ε|² − s^{2*}/2* ∫|v_ε|^{2*}` against
/// `s_ε = (∫|∇v_ε|²)^{(N−2)/4}` and `Φ(s_ε) = (1/N)(∫|∇v_ε|²)^{N/2}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhiIdentity {
    pub gradient_sq: f64,
    pub s_numeric: f64,
    pub s_closed: f64,
    pub phi_numeric: f64,
    pub phi_closed: f64,
}

impl PhiIdentity {
    pub fn s_error(&self) -> f64 {
        (self.s_numeric / self.s_closed - 1.0).abs()
    }

    pub fn phi_error(&self) -> f64 {
        (self.phi_numeric / self.phi_closed - 1.0).abs()
    }
}

pub fn phi_identity_check(params: &InstantonParams, grid: &Arc<Grid>) -> Result<PhiIdentity> {
    let tf = test_function(params, grid)?;
    let n = params.dimension as f64;
    let crit = critical_exponent(params.dimension);
    let a = tf.v.gradient_sq();
    let c = tf.v.lp_integral(crit);
    let phi = |s: f64| 0.5 * s * s * a - s.powf(crit) * c / crit;
    let reduced = |s: f64| a - s.powf(crit - 2.0) * c;
    let (mut lo, mut hi) = (1e-3, 2e-3);
    while reduced(hi) > 0.0 {
        lo = hi;
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::BracketNotFound { t_max: hi });
        }
    }
    let (s_numeric, _) = brent_root(reduced, lo, hi, 4.0 * f64::EPSILON * hi, 200)?;
    Ok(PhiIdentity {
        gradient_sq: a,
        s_numeric,
        s_closed: a.powf((n - 2.0) / 4.0),
        phi_numeric: phi(s_numeric),
        phi_closed: a.powf(n / 2.0) / n,
    })
}
