//! Ground states by descent of `Ψ(w) = I(t_w w)` on the unit sphere of `E`,
//! with Palais–Smale monitoring, positivity clamping and concentration diagnostics.

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functional::{sobolev_constant, EnergyBreakdown, Problem};
pub use crate::functional::back_transform;
use crate::grid::{Field, Grid};
use crate::nehari::{nehari_residual, psi_eval_values, FiberingResult, PsiEval};
use crate::nonlinearity::{check_growth_conditions, default_s_samples, ModelSpec};
use crate::report::PropertyReport;
use crate::transform::{check_g_assumptions, log_samples};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GridSpec {
    Radial { radius: f64, n: usize },
    Box { m: usize, side: u32 },
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec::Radial { radius: 40.0, n: 4096 }
    }
}

impl GridSpec {
    pub fn build(&self, dimension: usize) -> Result<Arc<Grid>> {
        match *self {
            GridSpec::Radial { radius, n } => Grid::radial(dimension, radius, n),
            GridSpec::Box { m, side } => {
                if dimension != 3 {
                    return Err(Error::Grid("the periodic box is three-dimensional".into()));
                }
                Grid::periodic_box(m, side)
            }
        }
    }

    /// `(R, n) → (2R, 2n)`, or twice the side and cells for the box.
    pub fn doubled(&self) -> Self {
        match *self {
            GridSpec::Radial { radius, n } => GridSpec::Radial { radius: 2.0 * radius, n: 2 * n },
            GridSpec::Box { m, side } => GridSpec::Box { m: 2 * m, side: 2 * side },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialGuess {
    /// `exp(−((d − center)/width)²)`, `d` the distance from the origin or box center;
    /// width defaults to a tenth of the domain size.
    Gaussian {
        #[serde(default)]
        center: f64,
        #[serde(default)]
        width: Option<f64>,
    },
    /// Nodal values read by the caller; see [`minimize_from`].
    File { path: String },
}

impl Default for InitialGuess {
    fn default() -> Self {
        InitialGuess::Gaussian { center: 0.0, width: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
#[derive(Default)]
pub enum StepRule {
    Fixed { alpha: f64 },
    /// Backtracking from the previous accepted step.
    Armijo,
    /// Barzilai–Borwein step with monotone Armijo acceptance.
    #[default]
    BarzilaiBorwein,
}


fn default_tol() -> f64 {
    1e-6
}
fn default_max_iter() -> usize {
    10_000
}
fn default_true() -> bool {
    true
}
fn default_margin() -> f64 {
    10.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveConfig {
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub initial: InitialGuess,
    #[serde(default)]
    pub step_rule: StepRule,
    /// Stop when the tangential gradient has `E`-norm at most this.
    #[serde(default = "default_tol")]
    pub gradient_tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iterations: usize,
    #[serde(default = "default_true")]
    pub positivity_clamp: bool,
    /// Relative margin in the norm cap `√(N(c+1))·(1 + margin)`.
    #[serde(default = "default_margin")]
    pub ps_margin: f64,
    /// Ball radius of the concentration diagnostic; a quarter of the domain size by default.
    #[serde(default)]
    pub concentration_radius: Option<f64>,
    /// Recenter box iterates on their mass concentration (integer periods only).
    #[serde(default = "default_true")]
    pub recenter: bool,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            grid: GridSpec::default(),
            initial: InitialGuess::default(),
            step_rule: StepRule::default(),
            gradient_tol: default_tol(),
            max_iterations: default_max_iter(),
            positivity_clamp: true,
            ps_margin: default_margin(),
            concentration_radius: None,
            recenter: true,
        }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gradient_tol > 0.0 && self.gradient_tol.is_finite()) {
            return Err(Error::InvalidParameter("gradient_tol must be positive".into()));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidParameter("max_iterations must be positive".into()));
        }
        if !(self.ps_margin > -1.0) {
            return Err(Error::InvalidParameter("ps_margin must exceed -1".into()));
        }
        if let StepRule::Fixed { alpha } = self.step_rule {
            if !(alpha > 0.0 && alpha.is_finite()) {
                return Err(Error::InvalidParameter("fixed step must be positive".into()));
            }
        }
        if let InitialGuess::Gaussian { width: Some(w), .. } = self.initial {
            if !(w > 0.0) {
                return Err(Error::InvalidParameter("initial width must be positive".into()));
            }
        }
        Ok(())
    }
}

/// Norm cap derived from the boundedness of Palais–Smale sequences.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsMonitor {
    dimension: usize,
    margin: f64,
    best_level: f64,
    max_norm: f64,
}

impl PsMonitor {
    pub fn new(dimension: usize, margin: f64) -> Self {
        PsMonitor { dimension, margin, best_level: f64::INFINITY, max_norm: 0.0 }
    }

    /// `√(N(c_est + 1))·(1 + margin)` with `c_est` the lowest level seen so far.
    pub fn cap(&self) -> f64 {
        let c = if self.best_level.is_finite() { self.best_level.max(0.0) } else { 0.0 };
        (self.dimension as f64 * (c + 1.0)).sqrt() * (1.0 + self.margin)
    }

    pub fn max_norm(&self) -> f64 {
        self.max_norm
    }

    /// Records `‖v_k‖_E` and `I(v_k)`; errors once the norm exceeds the cap.
    pub fn observe(&mut self, iteration: usize, norm: f64, level: f64) -> Result<()> {
        self.best_level = self.best_level.min(level);
        self.max_norm = self.max_norm.max(norm);
        let cap = self.cap();
        if !(norm <= cap) {
            return Err(Error::PsBound { iteration, norm, cap });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationDiagnostic {
    pub radius: f64,
    /// `sup_y ∫_{B_r(y)} |v|²` over the candidate centers.
    pub mass: f64,
    /// `mass / ‖v‖₂²`.
    pub fraction: f64,
    pub location: Vec<f64>,
    /// `mass < 10⁻⁶ ‖v‖₂²`.
    pub vanishing: bool,
}

/// Largest `L²` mass of `v` in a ball of radius `r`.
///
/// Radial fields use the ball about the origin; box fields scan centers on a
/// lattice of at most 16 points per side.
pub fn concentration_diagnostic(v: &Field, r: f64) -> ConcentrationDiagnostic {
    let total = v.norm_l2_sq();
    let (mass, location) = match &**v.grid() {
        Grid::Radial(g) => (v.ball_mass(r), vec![0.0; g.dimension()]),
        Grid::Periodic(b) => {
            let m = b.cells_per_side();
            let stride = (m / 16).max(1);
            let l = b.side() as f64;
            let w = b.spacing().powi(3);
            let vals = v.values();
            let mut best = (-1.0, vec![0.0; 3]);
            for ck in (0..m).step_by(stride) {
                for cj in (0..m).step_by(stride) {
                    for ci in (0..m).step_by(stride) {
                        let c = b.coords(b.index(ci, cj, ck));
                        let mut s = 0.0;
                        for (idx, val) in vals.iter().enumerate() {
                            let x = b.coords(idx);
                            let d2: f64 = (0..3)
                                .map(|i| {
                                    let d = (x[i] - c[i]).rem_euclid(l);
                                    let d = d.min(l - d);
                                    d * d
                                })
                                .sum();
                            if d2 < r * r {
                                s += w * val * val;
                            }
                        }
                        if s > best.0 {
                            best = (s, c.to_vec());
                        }
                    }
                }
            }
            (best.0.max(0.0), best.1)
        }
    };
    let fraction = if total > 0.0 { mass / total } else { 0.0 };
    ConcentrationDiagnostic { radius: r, mass, fraction, location, vanishing: mass < 1e-6 * total }
}

/// Default concentration radius: a quarter of `R` or of the box side.
pub fn default_concentration_radius(grid: &Grid) -> f64 {
    match grid {
        Grid::Radial(g) => g.radius() / 4.0,
        Grid::Periodic(b) => b.side() as f64 / 4.0,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub converged: bool,
    pub iterations: usize,
    /// `c = Ψ(w_final)`.
    pub level: f64,
    pub energy: EnergyBreakdown,
    pub fibering: FiberingResult,
    /// `‖v*‖²_E`.
    pub norm_sq: f64,
    /// `⟨I'(v*), v*⟩`.
    pub nehari_residual: f64,
    pub gradient_norm: f64,
    pub weak_residual_modified: f64,
    pub weak_residual_original: f64,
    pub concentration: ConcentrationDiagnostic,
    /// Smallest concentration fraction seen along the trajectory.
    pub min_trajectory_fraction: f64,
    pub vanishing_flagged: bool,
    pub ps_max_norm: f64,
    pub ps_cap: f64,
    pub sobolev_constant: f64,
    /// `(1/N) S^{N/2}`.
    pub threshold: f64,
    pub below_threshold: bool,
    pub min_value: f64,
    pub max_value: f64,
    pub lemma_checks: Vec<PropertyReport>,
    pub warnings: Vec<String>,
    pub grid: String,
    #[serde(skip)]
    pub v_star: Field,
    #[serde(skip)]
    pub u_star: Field,
    #[serde(skip)]
    pub psi_history: Vec<f64>,
    #[serde(skip)]
    pub norm_history: Vec<f64>,
}

/// Returns `(S, (1/N) S^{N/2})`; values are cached per dimension.
pub fn level_threshold(dimension: usize) -> Result<(f64, f64)> {
    static CACHE: OnceLock<Mutex<BTreeMap<usize, (f64, f64)>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(BTreeMap::new()));
    if let Some(&hit) = cache.lock().expect("threshold cache").get(&dimension) {
        return Ok(hit);
    }
    let s = sobolev_constant(dimension, 131_072)?.value;
    let pair = (s, s.powf(dimension as f64 / 2.0) / dimension as f64);
    cache.lock().expect("threshold cache").insert(dimension, pair);
    Ok(pair)
}

/// Runs the transform and growth suites; `Err` on a hard failure, warnings for (4).
pub fn precheck(model: &ModelSpec) -> Result<(Vec<PropertyReport>, Vec<String>)> {
    let g = check_g_assumptions(model.transform(), &log_samples(-6.0, 6.0, 4));
    let dim = model.dimension();
    let xs = vec![vec![0.0; dim], {
        let mut x = vec![0.0; dim];
        x[0] = 0.25;
        x
    }];
    let growth = check_growth_conditions(model, &default_s_samples(), &xs);
    let mut warnings = Vec::new();
    let mut hard = Vec::new();
    for e in g.failures() {
        hard.push(format!("{}: {}", g.title, e.name));
    }
    for e in growth.failures() {
        if e.name.starts_with("(4)") {
            warnings.push(format!("{} fails; the level bound below (1/N)S^(N/2) is not guaranteed", e.name));
        } else {
            hard.push(format!("{}: {}", growth.title, e.name));
        }
    }
    if !hard.is_empty() {
        return Err(Error::Assumption(hard.join("; ")));
    }
    Ok((vec![g, growth], warnings))
}

/// Builds the grid and initial guess from `config` and minimizes.
pub fn minimize_ground_state(model: &ModelSpec, config: &SolveConfig) -> Result<SolveReport> {
    config.validate()?;
    let grid = config.grid.build(model.dimension())?;
    let problem = Problem::new(model.clone(), grid)?;
    let initial = initial_field(&problem, &config.initial)?;
    minimize_from(&problem, config, initial)
}

/// The Gaussian initial guess on the problem grid.
pub fn initial_field(problem: &Problem, guess: &InitialGuess) -> Result<Field> {
    match guess {
        InitialGuess::Gaussian { center, width } => {
            let width = width.unwrap_or(4.0 * default_concentration_radius(problem.grid()) / 10.0);
            let mut values: Vec<f64> = (0..problem.grid().len())
                .map(|j| (-((problem.grid().distance(j) - center) / width).powi(2)).exp())
                .collect();
            problem.constrain(&mut values);
            problem.field(values)
        }
        InitialGuess::File { path } => {
            Err(Error::InvalidParameter(format!("initial guess file {path} must be loaded by the caller")))
        }
    }
}

struct Iterate {
    w: Vec<f64>,
    eval: PsiEval,
}

/// Minimizes `Ψ` from `initial` (any nonzero field; it is clamped and normalized first).
pub fn minimize_from(problem: &Problem, config: &SolveConfig, initial: Field) -> Result<SolveReport> {
    config.validate()?;
    let (lemma_checks, warnings) = precheck(problem.model())?;
    let dim = problem.model().dimension();
    let conc_r = config.concentration_radius.unwrap_or_else(|| default_concentration_radius(problem.grid()));
    let normalize = |mut w: Vec<f64>| -> Option<Vec<f64>> {
        if config.positivity_clamp {
            w.iter_mut().for_each(|x| *x = x.max(0.0));
        }
        problem.constrain(&mut w);
        let n = problem.norm_e(&w);
        (n > 0.0 && n.is_finite()).then(|| w.into_iter().map(|x| x / n).collect())
    };
    let w0 = normalize(initial.into_values())
        .ok_or_else(|| Error::InvalidParameter("initial guess vanishes after clamping".into()))?;
    let eval = psi_eval_values(problem, &w0, None)?;
    let mut cur = Iterate { w: w0, eval };
    let mut monitor = PsMonitor::new(dim, config.ps_margin);
    let mut psi_history = vec![cur.eval.fibering.value];
    let mut norm_history = vec![cur.eval.fibering.t_star];
    monitor.observe(0, cur.eval.fibering.t_star, cur.eval.fibering.value)?;
    let mut min_fraction = 1.0f64;
    let mut vanishing = false;
    let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;
    let mut alpha = 0.1 / cur.eval.gradient_norm.max(1e-300);
    let mut converged = false;
    let mut iterations = 0;
    let slack = |psi: f64| 1e-13 * psi.abs().max(1.0);
    let is_box = matches!(&**problem.grid(), Grid::Periodic(_));

    for k in 1..=config.max_iterations {
        if cur.eval.gradient_norm <= config.gradient_tol {
            converged = true;
            break;
        }
        iterations = k;
        let g = &cur.eval.gradient;
        let trial_alpha = match config.step_rule {
            StepRule::Fixed { alpha } => alpha,
            StepRule::Armijo => (alpha * 2.0).min(1e8),
            StepRule::BarzilaiBorwein => match &prev {
                Some((pw, pg)) => {
                    let s: Vec<f64> = cur.w.iter().zip(pw).map(|(a, b)| a - b).collect();
                    let y: Vec<f64> = g.iter().zip(pg).map(|(a, b)| a - b).collect();
                    let sy = problem.inner_e(&s, &y);
                    let ss = problem.inner_e(&s, &s);
                    if sy > 0.0 { (ss / sy).clamp(1e-8, 1e8) } else { alpha }
                }
                None => alpha,
            },
        };
        let psi0 = cur.eval.fibering.value;
        let mut a = trial_alpha;
        let mut accepted = None;
        for _ in 0..60 {
            let trial: Vec<f64> = cur.w.iter().zip(g).map(|(w, d)| w - a * d).collect();
            if let Some(wn) = normalize(trial) {
                if let Ok(ev) = psi_eval_values(problem, &wn, Some(cur.eval.fibering.t_star)) {
                    if matches!(config.step_rule, StepRule::Fixed { .. }) {
                        accepted = Some((wn, ev));
                        break;
                    }
                    let diff: Vec<f64> = cur.w.iter().zip(&wn).map(|(a, b)| a - b).collect();
                    let pred = problem.inner_e(g, &diff);
                    if ev.fibering.value <= psi0 - 1e-4 * pred + slack(psi0) {
                        accepted = Some((wn, ev));
                        break;
                    }
                }
            }
            a *= 0.5;
        }
        let Some((wn, ev)) = accepted else {
            break;
        };
        alpha = a;
        prev = Some((std::mem::take(&mut cur.w), std::mem::take(&mut cur.eval.gradient)));
        cur = Iterate { w: wn, eval: ev };
        psi_history.push(cur.eval.fibering.value);
        norm_history.push(cur.eval.fibering.t_star);
        monitor.observe(k, cur.eval.fibering.t_star, cur.eval.fibering.value)?;

        if !is_box || k % 10 == 0 {
            let field = problem.field(cur.w.clone())?;
            let d = concentration_diagnostic(&field, conc_r);
            min_fraction = min_fraction.min(d.fraction);
            vanishing |= d.vanishing;
            if is_box && config.recenter {
                if let Some(shifted) = recenter(problem, &field, &d)? {
                    let ev = psi_eval_values(problem, shifted.values(), Some(cur.eval.fibering.t_star))?;
                    cur = Iterate { w: shifted.into_values(), eval: ev };
                    prev = None;
                }
            }
        }
    }
    if cur.eval.gradient_norm <= config.gradient_tol {
        converged = true;
    }

    let t = cur.eval.fibering.t_star;
    let v_star = problem.field(cur.w.iter().map(|x| t * x).collect())?;
    let u_star = problem.back_transform(&v_star)?;
    let energy = problem.energy(&v_star);
    let bank = problem.test_bank();
    let concentration = concentration_diagnostic(&v_star, conc_r);
    min_fraction = min_fraction.min(concentration.fraction);
    vanishing |= concentration.vanishing;
    let (s, threshold) = level_threshold(dim)?;
    let level = cur.eval.fibering.value;
    Ok(SolveReport {
        converged,
        iterations,
        level,
        energy,
        norm_sq: problem.inner_e(v_star.values(), v_star.values()),
        nehari_residual: nehari_residual(problem, &v_star),
        gradient_norm: cur.eval.gradient_norm,
        weak_residual_modified: problem.weak_residual_modified(&v_star, &bank),
        weak_residual_original: problem.weak_residual_original(&u_star, &bank),
        concentration,
        min_trajectory_fraction: min_fraction,
        vanishing_flagged: vanishing,
        ps_max_norm: monitor.max_norm(),
        ps_cap: monitor.cap(),
        sobolev_constant: s,
        threshold,
        below_threshold: level < threshold,
        min_value: v_star.min(),
        max_value: v_star.values().iter().copied().fold(f64::NEG_INFINITY, f64::max),
        lemma_checks,
        warnings,
        grid: problem.grid().fingerprint(),
        fibering: cur.eval.fibering,
        v_star,
        u_star,
        psi_history,
        norm_history,
    })
}

/// Rolls a box field by whole periods of `V` so its concentration sits at the box center.
fn recenter(problem: &Problem, field: &Field, d: &ConcentrationDiagnostic) -> Result<Option<Field>> {
    let Grid::Periodic(b) = &**field.grid() else {
        return Ok(None);
    };
    let m = b.cells_per_side();
    let side = b.side() as usize;
    if m % side != 0 {
        return Ok(None);
    }
    let period = (m / side) as isize;
    let period = if problem.model().potential().constant().is_some() { 1 } else { period };
    let l = b.side() as f64;
    let mut shift = [0isize; 3];
    for i in 0..3 {
        let cells = ((l / 2.0 - d.location[i]) / b.spacing()).round() as isize;
        shift[i] = (cells as f64 / period as f64).round() as isize * period;
    }
    if shift.iter().all(|s| s.abs() <= period.max(1)) {
        return Ok(None);
    }
    field.roll(shift).map(Some)
}

/// Post-solve certificate: `c > 0`, `‖v‖² ≥ 2c`, `c < (1/N)S^{N/2}` and `v` on the manifold.
pub fn level_certificate(report: &SolveReport, problem: &Problem, tol: f64) -> Result<PropertyReport> {
    let v = &report.v_star;
    let norm_sq = problem.inner_e(v.values(), v.values());
    let rel = if norm_sq > 0.0 { nehari_residual(problem, v).abs() / norm_sq } else { f64::INFINITY };
    if !(rel <= tol.max(1e-3)) {
        return Err(Error::NotOnManifold(rel));
    }
    let c = report.level;
    let mut cert = PropertyReport::new("level certificate");
    cert.push_measured("c > 0", "solution", (-c).max(0.0), Some(c), c > 0.0);
    cert.push_measured("|v|^2 >= 2c", "solution", (2.0 * c - norm_sq).max(0.0), Some(norm_sq), norm_sq >= 2.0 * c);
    cert.push_measured(
        "c < (1/N) S^(N/2)",
        "solution",
        (c - report.threshold).max(0.0),
        Some(report.threshold - c),
        c < report.threshold,
    );
    cert.push_measured("Nehari residual <= tol |v|^2", "solution", rel, Some(rel), rel <= tol);
    Ok(cert)
}
