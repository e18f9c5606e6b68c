//! Property suites over seeded random fields: transform, growth, fibering and
//! the agreement of the transformed and original formulations.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functional::Problem;
use crate::grid::{Field, Grid};
use crate::nehari::{derivative_sign_pattern, fibering_map, project_nehari};
use crate::nonlinearity::{check_growth_conditions, default_s_samples, h_integral_mismatch, ModelSpec, Nonlinearity};
use crate::report::PropertyReport;
use crate::transform::{check_g_assumptions, log_samples, TransformKind};

pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    G,
    Growth,
    Fibering,
    FunctionalEquivalence,
    All,
}

impl Suite {
    pub fn name(&self) -> &'static str {
        match self {
            Suite::G => "g",
            Suite::Growth => "growth",
            Suite::Fibering => "fibering",
            Suite::FunctionalEquivalence => "functional-equivalence",
            Suite::All => "all",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "g" => Ok(Suite::G),
            "growth" => Ok(Suite::Growth),
            "fibering" => Ok(Suite::Fibering),
            "functional-equivalence" => Ok(Suite::FunctionalEquivalence),
            "all" => Ok(Suite::All),
            other => Err(Error::InvalidParameter(format!(
                "unknown suite '{other}' (expected g, growth, fibering, functional-equivalence or all)"
            ))),
        }
    }
}

/// Positive sums of one to three Gaussian bumps, drawn from a ChaCha8 stream.
///
/// On radial grids the bumps are shells `a·exp(−((r − c)/w)²)` with `c ∈ [0, R/4]`;
/// on the box they are centered at uniform points. Widths are log-uniform in
/// `[L/40, L/8]` and amplitudes log-uniform in `[0.1, 3]`, `L` the domain size.
pub fn random_bump_fields(problem: &Problem, count: usize, rng: &mut ChaCha8Rng) -> Vec<Field> {
    let grid = problem.grid();
    let scale = match &**grid {
        Grid::Radial(g) => g.radius(),
        Grid::Periodic(b) => b.side() as f64,
    };
    let log_uniform = |rng: &mut ChaCha8Rng, lo: f64, hi: f64| (rng.random_range(lo.ln()..hi.ln())).exp();
    (0..count)
        .map(|_| {
            let k = rng.random_range(1..=3);
            let mut values = vec![0.0; grid.len()];
            for _ in 0..k {
                let a = log_uniform(rng, 0.1, 3.0);
                let w = log_uniform(rng, scale / 40.0, scale / 8.0);
                match &**grid {
                    Grid::Radial(g) => {
                        let c = rng.random_range(0.0..scale / 4.0);
                        for (v, &r) in values.iter_mut().zip(g.nodes()) {
                            *v += a * (-((r - c) / w).powi(2)).exp();
                        }
                    }
                    Grid::Periodic(b) => {
                        let center: [f64; 3] = std::array::from_fn(|_| rng.random_range(0.0..scale));
                        for (j, v) in values.iter_mut().enumerate() {
                            let x = b.coords(j);
                            let d2: f64 = (0..3)
                                .map(|i| {
                                    let d = (x[i] - center[i]).rem_euclid(scale);
                                    let d = d.min(scale - d);
                                    d * d
                                })
                                .sum();
                            *v += a * (-d2 / (w * w)).exp();
                        }
                    }
                }
            }
            problem.constrain(&mut values);
            problem.field(values).expect("finite bump field")
        })
        .collect()
}

/// Maximizer of `t ↦ I(tv)` by golden-section search in `ln t` over `[10⁻⁶, 10⁶]`.
pub fn golden_section_maximizer(problem: &Problem, v: &Field) -> Result<f64> {
    let f = |s: f64| fibering_map(problem, v, s.exp());
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (1e-6f64.ln(), 1e6f64.ln());
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    while b - a > 1e-12 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d)?;
        }
    }
    Ok((0.5 * (a + b)).exp())
}

/// Transform properties on a 12-decade ladder, plus the closed form of `G` against quadrature.
pub fn g_suite(model: &ModelSpec) -> Result<PropertyReport> {
    let samples = log_samples(-6.0, 6.0, 4);
    let tr = model.transform();
    let mut report = check_g_assumptions(tr, &samples);
    if tr.kind() == TransformKind::SuperfluidFilm {
        let mut worst: f64 = 0.0;
        for &t in &samples {
            let closed = tr.primitive_closed(t).expect("closed form");
            let quad = tr.primitive_by_quadrature(t)?;
            worst = worst.max((closed - quad).abs() / closed.abs().max(1.0));
        }
        report.push("G closed form vs quadrature", "12-decade ladder, relative to max(1,|G|)", worst, worst <= 1e-10);
    }
    Ok(report)
}

/// Growth properties and the `H = ∫h` identity on `s ∈ [0, 10³]`.
pub fn growth_suite(model: &ModelSpec) -> Result<PropertyReport> {
    let n = model.dimension();
    let r = model.omega_radius();
    let mut inside = vec![0.0; n];
    inside[0] = 0.5 * r;
    let mut xs = vec![vec![0.0; n], inside];
    if model.potential().constant().is_none() {
        let mut x = vec![0.25; n];
        x[0] = 0.1;
        xs.push(x);
    }
    let mut report = check_growth_conditions(model, &default_s_samples(), &xs);
    let s: Vec<f64> = (0..=300).map(|k| 1e3 * k as f64 / 300.0).chain(log_samples(-6.0, 0.0, 4)).collect();
    let mut worst: f64 = 0.0;
    for x in &xs {
        worst = worst.max(h_integral_mismatch(model, model.v_eval(x), &s)?);
    }
    report.push("H = integral of h", "s in [0, 1e3], relative to max(1,|H|)", worst, worst <= 1e-8);
    Ok(report)
}

/// Single sign change of `M'` and the projection against golden-section search
/// over `count` random fields; for Identity with zero `f` also the closed form
/// `t_v = (‖v‖²_E / ∫|v|^{2*})^{1/(2*−2)}`.
pub fn fibering_suite(model: &ModelSpec, grid: &Arc<Grid>, count: usize, seed: u64) -> Result<PropertyReport> {
    let problem = Problem::new(model.clone(), grid.clone())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fields = random_bump_fields(&problem, count, &mut rng);
    let ladder = log_samples(-6.0, 6.0, 8);
    let closed = model.transform().kind() == TransformKind::Identity && *model.nonlinearity() == Nonlinearity::Zero;
    let crit = model.critical_exponent();
    let rows = fields
        .par_iter()
        .map(|v| {
            let pattern = derivative_sign_pattern(&problem, v, &ladder)?;
            let changes = pattern.windows(2).filter(|w| w[0] != w[1]).count();
            let starts_positive = pattern.first().copied().unwrap_or(false);
            let fr = project_nehari(&problem, v)?;
            let oracle = golden_section_maximizer(&problem, v)?;
            let closed_err = if closed {
                let t = (problem.inner_e(v.values(), v.values()) / problem.crit_integral(v.values()))
                    .powf(1.0 / (crit - 2.0));
                (fr.t_star / t - 1.0).abs()
            } else {
                0.0
            };
            Ok((changes == 1 && starts_positive, (fr.t_star / oracle - 1.0).abs(), closed_err))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut report = PropertyReport::new(format!("fibering, {count} random fields, seed {seed}"));
    let bad = rows.iter().filter(|r| !r.0).count();
    report.push("M' has one sign change (+ to -)", "t in [1e-6, 1e6], 8 per decade; worst = failing fields", bad as f64, bad == 0);
    let worst = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    report.push("projection vs golden-section oracle", "relative error in t_v", worst, worst <= 1e-6);
    if closed {
        let worst = rows.iter().map(|r| r.2).fold(0.0, f64::max);
        report.push("projection vs closed form", "relative error in t_v", worst, worst <= 1e-10);
    }
    Ok(report)
}

/// Worst `|⟨I'(v), φ⟩ − DQ|/(1 + |DQ|)` over `pairs` random `(v, φ)`, `DQ` the central
/// difference quotient of `I` with step `step`.
pub fn gradient_check(problem: &Problem, pairs: usize, step: f64, rng: &mut ChaCha8Rng) -> f64 {
    let vs = random_bump_fields(problem, pairs, rng);
    let phis = random_bump_fields(problem, pairs, rng);
    vs.iter()
        .zip(&phis)
        .map(|(v, phi)| {
            let plus: Vec<f64> = v.values().iter().zip(phi.values()).map(|(a, b)| a + step * b).collect();
            let minus: Vec<f64> = v.values().iter().zip(phi.values()).map(|(a, b)| a - step * b).collect();
            let dq = (problem.energy_values(&plus).total - problem.energy_values(&minus).total) / (2.0 * step);
            let an = problem.pairing(v.values(), phi.values());
            (an - dq).abs() / (1.0 + dq.abs())
        })
        .fold(0.0, f64::max)
}

/// Energy split, gradient against difference quotients, and the transformed versus
/// original weak residuals on random fields.
pub fn functional_equivalence_suite(model: &ModelSpec, grid: &Arc<Grid>, count: usize, seed: u64) -> Result<PropertyReport> {
    let problem = Problem::new(model.clone(), grid.clone())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = PropertyReport::new(format!("functional equivalence, {count} random fields, seed {seed}"));
    let fields = random_bump_fields(&problem, count, &mut rng);
    let split = fields
        .iter()
        .map(|v| {
            let e = problem.energy(v);
            (e.total - (e.kinetic + e.potential - e.h_part - e.critical)).abs() / e.total.abs().max(1.0)
        })
        .fold(0.0, f64::max);
    report.push("I = kinetic + potential - H part - critical", "random fields", split, split <= 1e-12);
    let g = gradient_check(&problem, 20, 1e-4, &mut rng);
    report.push("<I'(v), phi> vs central differences", "20 random pairs, step 1e-4", g, g <= 1e-4);
    let bank = problem.test_bank();
    let mismatch = fields
        .par_iter()
        .map(|v| {
            let u = problem.back_transform(v)?;
            let a = problem.weak_residual_modified(v, &bank);
            let b = problem.weak_residual_original(&u, &bank);
            Ok((a - b).abs() / a.max(b).max(f64::MIN_POSITIVE))
        })
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    report.push("transformed vs original weak residual", "random fields, relative", mismatch, mismatch <= 1e-2);
    Ok(report)
}

/// Number of random fields drawn by the fibering and equivalence suites.
pub const SUITE_FIELDS: usize = 100;

/// Runs a suite; `All` runs the four suites in order.
pub fn run_suite(model: &ModelSpec, grid: &Arc<Grid>, suite: Suite, seed: u64) -> Result<Vec<PropertyReport>> {
    Ok(match suite {
        Suite::G => vec![g_suite(model)?],
        Suite::Growth => vec![growth_suite(model)?],
        Suite::Fibering => vec![fibering_suite(model, grid, SUITE_FIELDS, seed)?],
        Suite::FunctionalEquivalence => vec![functional_equivalence_suite(model, grid, 10, seed)?],
        Suite::All => {
            let mut out = Vec::new();
            for s in [Suite::G, Suite::Growth, Suite::Fibering, Suite::FunctionalEquivalence] {
                out.extend(run_suite(model, grid, s, seed)?);
            }
            out
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nonlinearity::Potential;
    use crate::transform::TransformSpec;

    #[test]
    fn suite_names_round_trip() {
        for s in [Suite::G, Suite::Growth, Suite::Fibering, Suite::FunctionalEquivalence, Suite::All] {
            assert_eq!(s.name().parse::<Suite>().unwrap(), s);
        }
        assert!("lemma".parse::<Suite>().is_err());
    }

    #[test]
    fn random_fields_are_seeded_and_positive() {
        let model =
            ModelSpec::new(3, TransformSpec::identity(), Potential::Constant { v0: 1.0 }, Nonlinearity::Zero).unwrap();
        let p = Problem::new(model, Grid::radial(3, 10.0, 256).unwrap()).unwrap();
        let a = random_bump_fields(&p, 5, &mut ChaCha8Rng::seed_from_u64(7));
        let b = random_bump_fields(&p, 5, &mut ChaCha8Rng::seed_from_u64(7));
        let c = random_bump_fields(&p, 5, &mut ChaCha8Rng::seed_from_u64(8));
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.iter().all(|f| f.values().iter().all(|&x| x >= 0.0) && f.max_abs() > 0.0));
    }

    #[test]
    fn golden_section_agrees_on_closed_form() {
        let model =
            ModelSpec::new(3, TransformSpec::identity(), Potential::Constant { v0: 1.0 }, Nonlinearity::Zero).unwrap();
        let p = Problem::new(model, Grid::radial(3, 10.0, 256).unwrap()).unwrap();
        let v = &random_bump_fields(&p, 1, &mut ChaCha8Rng::seed_from_u64(1))[0];
        let t = (p.inner_e(v.values(), v.values()) / p.crit_integral(v.values())).powf(0.25);
        assert!((golden_section_maximizer(&p, v).unwrap() / t - 1.0).abs() < 1e-6);
    }
}
