use std::f64::consts::PI;

use proptest::prelude::*;
use quasiground::critical::{
    cutoff, eps_sweep, instanton_profile, level_bound_check, phi_identity_check, test_function, InstantonParams,
};
use quasiground::grid::Grid;
use quasiground::nonlinearity::{ModelSpec, Nonlinearity, Potential};
use quasiground::transform::TransformSpec;

/// `S = πN(N−2)(Γ(N/2)/Γ(N))^{2/N}` with the Gamma values written out.
fn talenti(dimension: usize) -> f64 {
    let ratio = match dimension {
        3 => (PI.sqrt() / 2.0) / 2.0,
        4 => 1.0 / 6.0,
        5 => (0.75 * PI.sqrt()) / 24.0,
        _ => unreachable!(),
    };
    let n = dimension as f64;
    PI * n * (n - 2.0) * f64::powf(ratio, 2.0 / n)
}

fn bn(dimension: usize, mu: f64) -> ModelSpec {
    let q = if dimension == 3 { 5.0 } else { 3.0 };
    ModelSpec::new(dimension, TransformSpec::identity(), Potential::Constant { v0: 1.0 }, Nonlinearity::TransformedPower { mu, q })
        .unwrap()
}

#[test]
fn talenti_oracle_values() {
    assert!((talenti(3) - 5.4779).abs() < 1e-4);
    assert!((talenti(4) - 10.2604).abs() < 1e-4);
}

#[test]
fn three_dimensional_sweep() {
    let grid = Grid::radial(3, 1.05, 65_536).unwrap();
    let eps = [3e-3, 1e-3, 3e-4, 1e-4, 3e-5, 1e-5];
    let r = eps_sweep(&bn(3, 1.0), &eps, &grid).unwrap();
    assert!((r.gradient_fit.slope - 0.5).abs() <= 0.1, "{:?}", r.gradient_fit);
    assert!((r.l2_fit.slope - 0.5).abs() <= 0.1, "{:?}", r.l2_fit);
    assert!((r.sobolev_constant / talenti(3) - 1.0).abs() <= 1e-6);
    assert!((r.k_extrapolated / talenti(3).powf(1.5) - 1.0).abs() <= 1e-3, "{}", r.k_extrapolated);
    for p in &r.points {
        assert!((p.v_crit_norm - 1.0).abs() <= 1e-10);
        assert!(p.gradient_excess > 0.0);
    }
    assert!(r.t_bounds.0 > 0.0 && r.t_bounds.1.is_finite());
    assert!(r.final_margin > 0.0);
    assert!(r.level_upper_bound < r.threshold);
    assert!(r.core_ratio_growing);
    assert!(r.f4_holds);
    assert_eq!(r.to_csv().lines().count(), eps.len() + 1);
}

#[test]
fn five_dimensional_l2_rate() {
    let grid = Grid::radial(5, 1.05, 65_536).unwrap();
    let r = eps_sweep(&bn(5, 1.0), &[3e-3, 1e-3, 3e-4, 1e-4, 3e-5, 1e-5], &grid).unwrap();
    assert!((r.l2_fit.slope - 1.0).abs() <= 0.1, "{:?}", r.l2_fit);
    assert!((r.k_extrapolated / talenti(5).powf(2.5) - 1.0).abs() <= 1e-3, "{}", r.k_extrapolated);
}

#[test]
fn four_dimensional_log_ratio() {
    let grid = Grid::radial(4, 1.05, 65_536).unwrap();
    let r = eps_sweep(&bn(4, 1.0), &[3e-4, 1e-4, 3e-5, 1e-5, 3e-6, 1e-6], &grid).unwrap();
    assert!(r.l2_ratio_spread <= 0.25, "{}", r.l2_ratio_spread);
    assert!((r.k_extrapolated / talenti(4).powi(2) - 1.0).abs() <= 1e-3, "{}", r.k_extrapolated);
}

#[test]
fn sweep_rejects_bad_lists() {
    let grid = Grid::radial(3, 1.05, 4096).unwrap();
    assert!(eps_sweep(&bn(3, 1.0), &[1e-2, 1e-3, 1e-4], &grid).is_err());
    assert!(eps_sweep(&bn(3, 1.0), &[1e-2, 1e-3, 2e-3, 1e-4, 1e-5], &grid).is_err());
}

#[test]
fn margin_grows_with_mu() {
    let grid = Grid::radial(3, 1.05, 4096).unwrap();
    let p = InstantonParams::new(3, 0.05, 1.0).unwrap();
    let margins: Vec<f64> =
        [1.0, 10.0, 100.0].iter().map(|&mu| level_bound_check(&bn(3, mu), &p, &grid).unwrap().margin).collect();
    assert!(margins.windows(2).all(|w| w[1] > w[0]), "{margins:?}");
    assert!(margins[2] > 0.0);
}

#[test]
fn superfluid_film_level_drops_below_threshold() {
    let grid = Grid::radial(3, 1.05, 65_536).unwrap();
    let model = ModelSpec::new(
        3,
        TransformSpec::superfluid_film(),
        Potential::Constant { v0: 1.0 },
        Nonlinearity::TransformedPower { mu: 1.0, q: 5.0 },
    )
    .unwrap();
    let p = InstantonParams::new(3, 1e-5, 1.0).unwrap();
    let b = level_bound_check(&model, &p, &grid).unwrap();
    assert!(b.f4_holds);
    assert!(b.below_threshold, "{b:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cutoff_is_a_monotone_bridge(rho in 0.1f64..5.0, a in 0.0f64..1.2, b in 0.0f64..1.2) {
        let (lo, hi) = (a.min(b) * rho, a.max(b) * rho);
        let (cl, ch) = (cutoff(rho, lo), cutoff(rho, hi));
        prop_assert!((0.0..=1.0).contains(&cl) && (0.0..=1.0).contains(&ch));
        prop_assert!(ch <= cl);
        prop_assert!((cutoff(rho, 0.75 * rho) - 0.5).abs() <= 1e-14);
    }

    #[test]
    fn instanton_scaling(eps in 1e-4f64..1.0, r in 0.0f64..10.0, lambda in 0.1f64..10.0) {
        for n in [3usize, 4, 5] {
            // ω_{λ²ε}(λr) = λ^{−(N−2)/2} ω_ε(r).
            let lhs = instanton_profile(n, lambda * lambda * eps, lambda * r);
            let rhs = lambda.powf(-(n as f64 - 2.0) / 2.0) * instanton_profile(n, eps, r);
            prop_assert!((lhs / rhs - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn fibering_of_pure_critical_term(eps in 2e-3f64..0.2) {
        let grid = Grid::radial(3, 1.05, 2048).unwrap();
        let id = phi_identity_check(&InstantonParams::new(3, eps, 1.0).unwrap(), &grid).unwrap();
        prop_assert!(id.s_error() <= 1e-6);
        prop_assert!(id.phi_error() <= 1e-8);
    }

    #[test]
    fn test_function_is_normalized(eps in 2e-3f64..0.2, rho in 0.5f64..1.0) {
        let grid = Grid::radial(4, 1.05, 2048).unwrap();
        let tf = test_function(&InstantonParams::new(4, eps * rho * rho, rho).unwrap(), &grid).unwrap();
        prop_assert!((tf.v.norm_lcrit() - 1.0).abs() <= 1e-10);
        prop_assert!(tf.u.values().iter().all(|&x| x >= 0.0));
    }
}
