use std::f64::consts::PI;

use proptest::prelude::*;
use quasiground::grid::{ball_volume, Boundary, Field, Grid, RadialGrid};

fn gaussian(grid: &std::sync::Arc<Grid>, w: f64) -> Field {
    Field::from_radial_fn(grid.clone(), Boundary::DirichletAtR, |r| (-(r / w).powi(2)).exp()).unwrap()
}

/// Max |Δv − (4r² − 6)e^{−r²}| over nodes with r ≤ 4.
fn laplacian_error(n: usize) -> f64 {
    let grid = Grid::radial(3, 8.0, n).unwrap();
    let lap = gaussian(&grid, 1.0).laplacian();
    (0..grid.len())
        .filter(|&j| grid.distance(j) <= 4.0)
        .map(|j| {
            let r = grid.distance(j);
            (lap.values()[j] - (4.0 * r * r - 6.0) * (-r * r).exp()).abs()
        })
        .fold(0.0, f64::max)
}

#[test]
fn laplacian_is_second_order() {
    let errors: Vec<f64> = [128, 256, 512, 1024].iter().map(|&n| laplacian_error(n)).collect();
    for w in errors.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!((1.8..=2.2).contains(&order), "order {order} from {errors:?}");
    }
}

#[test]
fn laplacian_of_quadratic() {
    let grid = Grid::radial(3, 2.0, 512).unwrap();
    let v = Field::from_radial_fn(grid.clone(), Boundary::Free, |r| r * r).unwrap();
    let lap = v.laplacian();
    let worst = (0..grid.len() - 1).map(|j| (lap.values()[j] / 6.0 - 1.0).abs()).fold(0.0, f64::max);
    assert!(worst <= 1e-6, "{worst}");
    let c = Field::from_radial_fn(grid.clone(), Boundary::Free, |_| 3.5).unwrap().laplacian();
    assert!(c.values()[..grid.len() - 1].iter().all(|x| x.abs() <= 1e-10));
}

#[test]
fn gaussian_moments() {
    let grid = Grid::radial(3, 10.0, 4096).unwrap();
    let v = gaussian(&grid, 1.0);
    assert!((v.integrate() / PI.powf(1.5) - 1.0).abs() <= 1e-4);
    // ∫ r² e^{-r²} over ℝ³ = (3/2) π^{3/2}.
    let m2 = Field::from_radial_fn(grid.clone(), Boundary::DirichletAtR, |r| r * r * (-r * r).exp()).unwrap();
    assert!((m2.integrate() / (1.5 * PI.powf(1.5)) - 1.0).abs() <= 1e-4);
}

#[test]
fn polynomial_quadrature() {
    for dim in [3, 4, 5] {
        let grid = Grid::radial(dim, 2.5, 1024).unwrap();
        let vol = ball_volume(dim, 2.5);
        assert!((grid.volume() / vol - 1.0).abs() <= 1e-3);
        for k in 0..=2 {
            let f = Field::from_radial_fn(grid.clone(), Boundary::Free, |r| r.powi(k)).unwrap();
            let d = dim as f64;
            let exact = vol * d / (d + k as f64) * 2.5f64.powi(k);
            assert!((f.integrate() / exact - 1.0).abs() <= 1e-3, "N={dim} k={k}");
        }
    }
}

#[test]
fn gaussian_l2_norm_converges() {
    let exact = (PI / 2.0).powf(1.5);
    let errs: Vec<f64> = [256, 512, 1024, 2048]
        .iter()
        .map(|&n| (gaussian(&Grid::radial(3, 10.0, n).unwrap(), 1.0).norm_l2_sq() - exact).abs())
        .collect();
    let orders: Vec<f64> = errs.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    assert!(orders.iter().all(|&p| p >= 1.9), "{orders:?}");
}

#[test]
fn refinement_and_interpolation() {
    let base = RadialGrid::new(3, 4.0, 64).unwrap();
    let g1 = std::sync::Arc::new(Grid::Radial(base.clone()));
    let g2 = std::sync::Arc::new(Grid::Radial(base.refine(2).unwrap()));
    let v = Field::from_radial_fn(g1.clone(), Boundary::Free, |r| r * r).unwrap();
    assert_eq!(v.interpolate(std::sync::Arc::new(Grid::Radial(base.refine(1).unwrap()))).unwrap(), v);
    let fine = v.interpolate(g2.clone()).unwrap();
    for j in 0..g1.len() {
        assert_eq!(fine.values()[2 * j], v.values()[j]);
    }
}

#[test]
fn energy_norm_dominates_h1() {
    let grid = Grid::radial(3, 10.0, 1024).unwrap();
    let v = gaussian(&grid, 1.3);
    for v0 in [0.25f64, 1.0, 4.0] {
        let pot = vec![v0; grid.len()];
        let d1 = v0.min(1.0);
        assert!(v.norm_e(&pot).powi(2) >= d1 * v.norm_h1().powi(2) * (1.0 - 1e-14));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn summation_by_parts(a in 0.1f64..5.0, w in 0.3f64..2.0, c in 0.0f64..3.0) {
        let grid = Grid::radial(3, 12.0, 2048).unwrap();
        let v = Field::from_radial_fn(grid.clone(), Boundary::DirichletAtR, |r| a * (-((r - c) / w).powi(2)).exp())
            .unwrap();
        let lap = v.laplacian();
        let pairing: f64 = (0..grid.len()).map(|j| -grid.weight(j) * lap.values()[j] * v.values()[j]).sum();
        let g = v.gradient_sq();
        prop_assert!((pairing - g).abs() <= 1e-3 * g);
    }

    #[test]
    fn norms_are_homogeneous(s in -4.0f64..4.0, w in 0.3f64..2.0) {
        let grid = Grid::radial(4, 8.0, 512).unwrap();
        let v = gaussian(&grid, w);
        let sv = v.scale(s);
        prop_assert!((sv.norm_l2() - s.abs() * v.norm_l2()).abs() <= 1e-12 * v.norm_l2().max(1.0) * s.abs().max(1.0));
        prop_assert!((sv.norm_lcrit() - s.abs() * v.norm_lcrit()).abs() <= 1e-12 * v.norm_lcrit().max(1.0) * s.abs().max(1.0));
        prop_assert!((sv.gradient_sq() - s * s * v.gradient_sq()).abs() <= 1e-12 * v.gradient_sq().max(1.0) * s * s);
    }
}
