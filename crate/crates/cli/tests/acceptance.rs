use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::{Command, Stdio};
use std::time::Instant;

use quasiground::critical::{eps_sweep, level_bound_check, InstantonParams};
use quasiground::functional::{sobolev_constant, Problem};
use quasiground::grid::Grid;
use quasiground::nonlinearity::{ModelSpec, Nonlinearity, Potential};
use quasiground::report::PropertyReport;
use quasiground::solver::{level_threshold, minimize_ground_state, GridSpec, SolveConfig, SolveReport};
use quasiground::transform::TransformSpec;
use quasiground::verify::{fibering_suite, g_suite, gradient_check, growth_suite, DEFAULT_SEED};
use quasiground::Error;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn model(dimension: usize, transform: TransformSpec, nl: Nonlinearity) -> ModelSpec {
    ModelSpec::new(dimension, transform, Potential::Constant { v0: 1.0 }, nl).unwrap()
}

fn power(mu: f64, q: f64) -> Nonlinearity {
    Nonlinearity::TransformedPower { mu, q }
}

fn transforms() -> Vec<TransformSpec> {
    vec![TransformSpec::identity(), TransformSpec::superfluid_film(), TransformSpec::laser_channeling().unwrap()]
}

fn failures(reports: &[PropertyReport]) -> String {
    let bad: Vec<String> = reports
        .iter()
        .flat_map(|r| r.failures().map(move |e| format!("{} / {} ({:e})", r.title, e.name, e.worst_violation)))
        .collect();
    if bad.is_empty() {
        "all entries pass".into()
    } else {
        bad.join("; ")
    }
}

/// `S = πN(N−2)(Γ(N/2)/Γ(N))^{2/N}`.
fn talenti(dimension: usize) -> f64 {
    let ratio = match dimension {
        3 => (PI.sqrt() / 2.0) / 2.0,
        4 => 1.0 / 6.0,
        _ => unreachable!(),
    };
    let n = dimension as f64;
    PI * n * (n - 2.0) * ratio.powf(2.0 / n)
}

/// Positive radial solutions of the discrete equation
/// `−κ_{j+1/2}(v_{j+1} − v_j) + κ_{j−1/2}(v_j − v_{j−1}) + w_j(v_j − v_j⁵) = 0`, `v_n = 0`,
/// on the shell grid of `B_R ⊂ ℝ³`, found by shooting on `v_0`. Returns the lowest energy.
fn shooting_oracle(radius: f64, n: usize) -> f64 {
    let h = radius / n as f64;
    let sigma = 4.0 * PI;
    let w: Vec<f64> = (0..=n)
        .map(|j| {
            let lo = if j == 0 { 0.0 } else { (j as f64 - 0.5) * h };
            let hi = if j == n { radius } else { (j as f64 + 0.5) * h };
            sigma / 3.0 * (hi.powi(3) - lo.powi(3))
        })
        .collect();
    let kappa: Vec<f64> = (0..n).map(|j| sigma * ((j as f64 + 0.5) * h).powi(2) / h).collect();

    // `true` when the trajectory crosses zero, `false` when it turns up or stays positive.
    let march = |a: f64| -> (bool, Vec<f64>) {
        let mut v = vec![a];
        for j in 0..n {
            let inflow = if j > 0 { kappa[j - 1] * (v[j] - v[j - 1]) } else { 0.0 };
            let next = v[j] + (inflow + w[j] * (v[j] - v[j].powi(5))) / kappa[j];
            if next <= 0.0 {
                return (true, v);
            }
            if next > v[j] {
                return (false, v);
            }
            v.push(next);
        }
        (false, v)
    };
    let energy = |v: &[f64]| -> f64 {
        let mut full = v.to_vec();
        full.resize(n + 1, 0.0);
        full[n] = 0.0;
        let grad: f64 = (0..n).map(|j| kappa[j] * (full[j + 1] - full[j]).powi(2)).sum();
        let mass: f64 = (0..=n).map(|j| w[j] * full[j] * full[j]).sum();
        let crit: f64 = (0..=n).map(|j| w[j] * full[j].powi(6)).sum();
        0.5 * grad + 0.5 * mass - crit / 6.0
    };

    let amplitudes: Vec<f64> = (0..=300).map(|k| 10f64.powf(-2.0 + k as f64 / 50.0)).collect();
    let classes: Vec<bool> = amplitudes.iter().map(|&a| march(a).0).collect();
    let mut best = f64::INFINITY;
    for k in 0..amplitudes.len() - 1 {
        if classes[k] == classes[k + 1] {
            continue;
        }
        let (mut lo, mut hi) = (amplitudes[k], amplitudes[k + 1]);
        let lo_class = classes[k];
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if march(mid).0 == lo_class {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let (_, lo_path) = march(lo);
        let (_, hi_path) = march(hi);
        let path = if lo_path.len() >= hi_path.len() { lo_path } else { hi_path };
        let e = energy(&path);
        if e > 0.0 {
            best = best.min(e);
        }
    }
    best
}

fn solve(m: &ModelSpec, grid: GridSpec) -> SolveReport {
    minimize_ground_state(m, &SolveConfig { grid, ..Default::default() }).unwrap()
}

struct Solves {
    control: SolveReport,
    bn: SolveReport,
    film: SolveReport,
    film_secs: f64,
    control_secs: f64,
    laser: SolveReport,
}

fn solves() -> Solves {
    let grid = GridSpec::Radial { radius: 40.0, n: 4096 };
    let start = Instant::now();
    let control = solve(&model(3, TransformSpec::identity(), Nonlinearity::Zero), grid);
    let control_secs = start.elapsed().as_secs_f64();
    let bn = solve(&model(3, TransformSpec::identity(), power(1.0, 5.0)), grid);
    let start = Instant::now();
    let film = solve(&model(3, TransformSpec::superfluid_film(), power(1.0, 5.0)), grid);
    let film_secs = start.elapsed().as_secs_f64();
    let laser = solve(&model(3, TransformSpec::laser_channeling().unwrap(), power(1.0, 5.0)), grid);
    Solves { control, bn, film, film_secs, control_secs, laser }
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let reports: Vec<PropertyReport> =
        transforms().into_iter().map(|tr| g_suite(&model(3, tr, power(1.0, 5.0))).unwrap()).collect();
    let secs = start.elapsed().as_secs_f64();
    let pass = reports.iter().all(|r| r.pass) && secs < 5.0;
    outcome(pass, format!("{}; {secs:.2} s", failures(&reports)))
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let mut reports = Vec::new();
    for (n, q) in [(3, 5.0), (4, 3.0), (5, 3.0)] {
        for tr in transforms() {
            reports.push(growth_suite(&model(n, tr, power(1.0, q))).unwrap());
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = reports.iter().all(|r| r.pass) && secs < 10.0;
    outcome(pass, format!("{}; {secs:.2} s", failures(&reports)))
}

fn criterion_3() -> Outcome {
    let grid = Grid::radial(3, 10.0, 1024).unwrap();
    let start = Instant::now();
    let mut models = vec![model(3, TransformSpec::identity(), Nonlinearity::Zero)];
    models.extend(transforms().into_iter().map(|tr| model(3, tr, power(1.0, 5.0))));
    let reports: Vec<PropertyReport> =
        models.iter().map(|m| fibering_suite(m, &grid, 100, DEFAULT_SEED).unwrap()).collect();
    let secs = start.elapsed().as_secs_f64();
    let closed = reports[0].entry("projection vs closed form").map(|e| e.worst_violation);
    let pass = reports.iter().all(|r| r.pass) && closed.is_some() && secs < 30.0;
    outcome(pass, format!("{}; closed form {:e}; {secs:.2} s", failures(&reports), closed.unwrap_or(f64::NAN)))
}

fn criterion_4() -> Outcome {
    let grid = Grid::radial(3, 10.0, 1024).unwrap();
    let mut worst: f64 = 0.0;
    for tr in transforms() {
        let p = Problem::new(model(3, tr, power(1.0, 5.0)), grid.clone()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(DEFAULT_SEED);
        worst = worst.max(gradient_check(&p, 20, 1e-4, &mut rng));
    }
    outcome(worst <= 1e-4, format!("worst relative error {worst:e}"))
}

fn criterion_5(s: &Solves) -> Outcome {
    let (a, b) = (s.film.weak_residual_modified, s.film.weak_residual_original);
    let rel = (a - b).abs() / a.max(b);
    outcome(
        s.film.converged && rel <= 1e-2,
        format!("modified {a:e}, original {b:e}, relative difference {rel:e}"),
    )
}

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let s3 = sobolev_constant(3, 16_384).unwrap().value;
    let s4 = sobolev_constant(4, 16_384).unwrap().value;
    let secs = start.elapsed().as_secs_f64();
    let (e3, e4) = ((s3 / talenti(3) - 1.0).abs(), (s4 / talenti(4) - 1.0).abs());
    outcome(
        e3 <= 5e-3 && e4 <= 5e-3 && secs < 20.0,
        format!("S(3) = {s3:.6} (rel {e3:.1e}), S(4) = {s4:.6} (rel {e4:.1e}); {secs:.2} s"),
    )
}

fn criterion_7() -> Outcome {
    let start = Instant::now();
    let bn = |n: usize| model(n, TransformSpec::identity(), power(1.0, if n == 3 { 5.0 } else { 3.0 }));
    let small = [3e-3, 1e-3, 3e-4, 1e-4, 3e-5, 1e-5];
    let r3 = eps_sweep(&bn(3), &small, &Grid::radial(3, 1.05, 65_536).unwrap()).unwrap();
    let r5 = eps_sweep(&bn(5), &small, &Grid::radial(5, 1.05, 65_536).unwrap()).unwrap();
    let r4 = eps_sweep(&bn(4), &[3e-4, 1e-4, 3e-5, 1e-5, 3e-6, 1e-6], &Grid::radial(4, 1.05, 65_536).unwrap())
        .unwrap();
    let secs = start.elapsed().as_secs_f64();
    let (g3, l3, l5, spread) = (r3.gradient_fit.slope, r3.l2_fit.slope, r5.l2_fit.slope, r4.l2_ratio_spread);
    let pass = (g3 - 0.5).abs() <= 0.1
        && (l3 - 0.5).abs() <= 0.1
        && (l5 - 1.0).abs() <= 0.1
        && spread <= 0.25
        && secs < 60.0;
    outcome(
        pass,
        format!("N=3 gradient {g3:.4}, L2 {l3:.4}; N=5 L2 {l5:.4}; N=4 spread {:.1}%; {secs:.2} s", 100.0 * spread),
    )
}

fn criterion_8() -> Outcome {
    let grid = Grid::radial(3, 1.05, 4096).unwrap();
    let p = InstantonParams::new(3, 0.05, 1.0).unwrap();
    let bounds: Vec<_> = [1.0, 10.0, 100.0]
        .iter()
        .map(|&mu| level_bound_check(&model(3, TransformSpec::identity(), power(mu, 5.0)), &p, &grid).unwrap())
        .collect();
    let margins: Vec<f64> = bounds.iter().map(|b| b.margin).collect();
    let increasing = margins.windows(2).all(|w| w[1] > w[0]);
    let pass = bounds[0].margin > 0.0 && increasing;
    outcome(
        pass,
        format!(
            "eps = 0.05, mu = 1: max level {:.4} vs threshold {:.4}; margins over mu = 1, 10, 100: {:.4}, {:.4}, {:.4}",
            bounds[0].max_level, bounds[0].threshold, margins[0], margins[1], margins[2]
        ),
    )
}

fn criterion_9(s: &Solves) -> Outcome {
    let oracle = shooting_oracle(40.0, 4096);
    let rel = (s.control.level / oracle - 1.0).abs();
    let f = &s.film;
    let nehari_ok = f.nehari_residual.abs() <= 1e-6 * f.norm_sq;
    let pass = s.control.converged
        && rel <= 1e-3
        && f.converged
        && nehari_ok
        && f.level > 0.0
        && f.norm_sq >= 2.0 * f.level
        && f.level < f.threshold
        && f.min_value >= 0.0
        && f.concentration.fraction >= 0.5
        && s.film_secs < 60.0
        && s.control_secs < 60.0;
    outcome(
        pass,
        format!(
            "control c = {:.8} vs shooting {oracle:.8} (rel {rel:.1e}, {:.1} s); film c = {:.6}, |v|^2 = {:.4}, \
             nehari {:.1e}, min v {:e}, B_R/4 fraction {:.4}, threshold {:.4}, {:.1} s",
            s.control.level,
            s.control_secs,
            f.level,
            f.norm_sq,
            f.nehari_residual.abs() / f.norm_sq,
            f.min_value,
            f.concentration.fraction,
            f.threshold,
            s.film_secs
        ),
    )
}

fn criterion_10(s: &Solves) -> Outcome {
    let runs = [&s.control, &s.bn, &s.film, &s.laser];
    let within = runs.iter().all(|r| r.ps_max_norm <= r.ps_cap);
    let worst = runs.iter().map(|r| r.ps_max_norm / r.ps_cap).fold(0.0, f64::max);
    let bad = SolveConfig { grid: GridSpec::Radial { radius: 20.0, n: 1024 }, ps_margin: -0.99, ..Default::default() };
    let negative = minimize_ground_state(&model(3, TransformSpec::identity(), power(1.0, 5.0)), &bad);
    let flagged = matches!(negative, Err(Error::PsBound { .. }));
    outcome(within && flagged, format!("worst norm/cap {worst:.4}; mis-scaled cap flagged: {flagged}"))
}

fn criterion_11(s: &Solves) -> Outcome {
    let doubled = solve(
        &model(3, TransformSpec::identity(), power(1.0, 5.0)),
        GridSpec::Radial { radius: 40.0, n: 4096 }.doubled(),
    );
    let rel = (doubled.level / s.bn.level - 1.0).abs();
    outcome(
        doubled.converged && rel <= 1e-2,
        format!("c(40, 4096) = {:.8}, c(80, 8192) = {:.8}, change {rel:.1e}", s.bn.level, doubled.level),
    )
}

fn criterion_12() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bn.json");
    std::fs::write(
        &config,
        r#"{
  "model": {
    "dimension": 3,
    "transform": {"kind": "identity"},
    "potential": {"kind": "constant", "v0": 1.0},
    "nonlinearity": {"kind": "transformed_power", "mu": 1.0, "q": 5.0}
  },
  "grid": {"kind": "radial", "radius": 20.0, "n": 1024},
  "seed": 7
}"#,
    )
    .unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_quasiground"))
            .args(["solve", "--config"])
            .arg(&config)
            .arg("--out")
            .arg(&out)
            .stdout(Stdio::null())
            .status()
            .unwrap();
        (status.code(), std::fs::read(out.join("solve_report.json")).unwrap())
    };
    let (c1, a) = run("first");
    let (c2, b) = run("second");
    outcome(
        c1 == Some(0) && c2 == Some(0) && a == b,
        format!("exit codes {c1:?}, {c2:?}; {} bytes; identical: {}", a.len(), a == b),
    )
}

fn main() {
    let threshold = level_threshold(3).unwrap().1;
    println!("acceptance: (1/3) S^(3/2) = {threshold:.6}");
    let mut cached: Option<Solves> = None;
    let mut all = true;
    for k in 1..=12 {
        let result = catch_unwind(AssertUnwindSafe(|| {
            if matches!(k, 5 | 9 | 10 | 11) && cached.is_none() {
                cached = Some(solves());
            }
            match k {
                1 => criterion_1(),
                2 => criterion_2(),
                3 => criterion_3(),
                4 => criterion_4(),
                5 => criterion_5(cached.as_ref().unwrap()),
                6 => criterion_6(),
                7 => criterion_7(),
                8 => criterion_8(),
                9 => criterion_9(cached.as_ref().unwrap()),
                10 => criterion_10(cached.as_ref().unwrap()),
                11 => criterion_11(cached.as_ref().unwrap()),
                _ => criterion_12(),
            }
        }));
        let o = result.unwrap_or_else(|_| outcome(false, "panicked"));
        all &= o.pass;
        println!("criterion {k}: {} {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    if !all {
        std::process::exit(1);
    }
}
