//! Discretizations: a finite-volume radial grid on `B_R ⊂ ℝ^N` and a small
//! periodic box in `ℝ³`, with fields, quadrature, norms and shifted solves.
//!
//! Both grids expose the same structure: nodal control volumes `w_j` and edge
//! coefficients `κ_e`, with the Dirichlet energy `∫|∇v|² ≈ Σ_e κ_e (v_b − v_a)²`
//! and the Laplacian `Δv = −(Av)/w`, `A` the stiffness matrix of that form.

use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nonlinearity::Potential;

/// Surface measure of the unit sphere in `ℝ^N`, `2π^{N/2}/Γ(N/2)`.
pub fn sphere_area(dimension: usize) -> f64 {
    // σ_{N-1} = 2π^{N/2}/Γ(N/2); Γ at half-integers by recurrence.
    let n = dimension;
    let pi = std::f64::consts::PI;
    let gamma_half_n = if n.is_multiple_of(2) {
        (1..n / 2).map(|k| k as f64).product::<f64>()
    } else {
        let mut g = pi.sqrt();
        let mut x = 0.5;
        while x < n as f64 / 2.0 - 0.25 {
            g *= x;
            x += 1.0;
        }
        g
    };
    2.0 * pi.powf(n as f64 / 2.0) / gamma_half_n
}

/// Volume of the ball of radius `r` in `ℝ^N`.
pub fn ball_volume(dimension: usize, r: f64) -> f64 {
    sphere_area(dimension) / dimension as f64 * r.powi(dimension as i32)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    /// `v(R) = 0`.
    DirichletAtR,
    /// Natural (zero-flux) condition at `R`.
    Free,
    /// Periodic box.
    Periodic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadialGrid {
    dimension: usize,
    radius: f64,
    n: usize,
    h: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    kappa: Vec<f64>,
}

impl RadialGrid {
    /// Nodes `r_j = jR/n`, `j = 0..=n`; cell `j` is the shell `|r − r_j| < h/2` clipped to `[0, R]`.
    pub fn new(dimension: usize, radius: f64, n: usize) -> Result<Self> {
        if dimension < 3 {
            return Err(Error::Grid(format!("dimension must be at least 3, got {dimension}")));
        }
        if n < 16 {
            return Err(Error::Grid(format!("need at least 16 intervals, got {n}")));
        }
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::Grid(format!("radius must be positive, got {radius}")));
        }
        let h = radius / n as f64;
        let sigma = sphere_area(dimension);
        let nn = dimension as i32;
        let c = sigma / dimension as f64;
        let nodes: Vec<f64> = (0..=n).map(|j| j as f64 * h).collect();
        let weights: Vec<f64> = (0..=n)
            .map(|j| {
                let lo = if j == 0 { 0.0 } else { (j as f64 - 0.5) * h };
                let hi = if j == n { radius } else { (j as f64 + 0.5) * h };
                c * (hi.powi(nn) - lo.powi(nn))
            })
            .collect();
        let kappa: Vec<f64> = (0..n).map(|j| sigma * ((j as f64 + 0.5) * h).powi(nn - 1) / h).collect();
        Ok(RadialGrid { dimension, radius, n, h, nodes, weights, kappa })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Number of intervals; there are `n + 1` nodes.
    pub fn intervals(&self) -> usize {
        self.n
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Edge coefficients `κ_{j+1/2} = σ r_{j+1/2}^{N−1}/h`.
    pub fn kappa(&self) -> &[f64] {
        &self.kappa
    }

    pub fn refine(&self, factor: usize) -> Result<Self> {
        if factor == 0 {
            return Err(Error::Grid("refinement factor must be positive".into()));
        }
        Self::new(self.dimension, self.radius, self.n * factor)
    }
}

/// Periodic cube `[0, L)³` with `m` cells per side.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxGrid {
    m: usize,
    side: u32,
    h: f64,
}

impl BoxGrid {
    pub fn new(m: usize, side: u32) -> Result<Self> {
        if !(8..=64).contains(&m) {
            return Err(Error::Grid(format!("box needs 8 <= m <= 64 cells per side, got {m}")));
        }
        if side < 1 {
            return Err(Error::Grid("box side must be a positive integer".into()));
        }
        Ok(BoxGrid { m, side, h: side as f64 / m as f64 })
    }

    pub fn cells_per_side(&self) -> usize {
        self.m
    }

    pub fn side(&self) -> u32 {
        self.side
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.m * (j + self.m * k)
    }

    pub fn coords(&self, idx: usize) -> [f64; 3] {
        let m = self.m;
        let (i, j, k) = (idx % m, (idx / m) % m, idx / (m * m));
        [i as f64 * self.h, j as f64 * self.h, k as f64 * self.h]
    }

    /// Minimum-image distance from the box center `(L/2, L/2, L/2)`.
    pub fn distance_from_center(&self, idx: usize) -> f64 {
        let c = self.side as f64 / 2.0;
        self.coords(idx).iter().map(|x| (x - c) * (x - c)).sum::<f64>().sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Grid {
    Radial(RadialGrid),
    Periodic(BoxGrid),
}

impl Grid {
    pub fn radial(dimension: usize, radius: f64, n: usize) -> Result<Arc<Grid>> {
        Ok(Arc::new(Grid::Radial(RadialGrid::new(dimension, radius, n)?)))
    }

    pub fn periodic_box(m: usize, side: u32) -> Result<Arc<Grid>> {
        Ok(Arc::new(Grid::Periodic(BoxGrid::new(m, side)?)))
    }

    pub fn dimension(&self) -> usize {
        match self {
            Grid::Radial(g) => g.dimension,
            Grid::Periodic(_) => 3,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Grid::Radial(g) => g.n + 1,
            Grid::Periodic(b) => b.m * b.m * b.m,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Node spacing `h`.
    pub fn spacing(&self) -> f64 {
        match self {
            Grid::Radial(g) => g.h,
            Grid::Periodic(b) => b.h,
        }
    }

    /// Radius of the largest ball about the center that the grid covers.
    pub fn inner_radius(&self) -> f64 {
        match self {
            Grid::Radial(g) => g.radius,
            Grid::Periodic(b) => b.side as f64 / 2.0,
        }
    }

    pub fn as_radial(&self) -> Option<&RadialGrid> {
        match self {
            Grid::Radial(g) => Some(g),
            Grid::Periodic(_) => None,
        }
    }

    pub fn as_box(&self) -> Option<&BoxGrid> {
        match self {
            Grid::Periodic(b) => Some(b),
            Grid::Radial(_) => None,
        }
    }

    /// Control volume of each node.
    pub fn weight(&self, j: usize) -> f64 {
        match self {
            Grid::Radial(g) => g.weights[j],
            Grid::Periodic(b) => b.h * b.h * b.h,
        }
    }

    pub fn weights(&self) -> Vec<f64> {
        (0..self.len()).map(|j| self.weight(j)).collect()
    }

    /// Total measure of the computational domain.
    pub fn volume(&self) -> f64 {
        match self {
            Grid::Radial(g) => ball_volume(g.dimension, g.radius),
            Grid::Periodic(b) => (b.side as f64).powi(3),
        }
    }

    /// Distance of node `j` from the concentration center (origin or box center).
    pub fn distance(&self, j: usize) -> f64 {
        match self {
            Grid::Radial(g) => g.nodes[j],
            Grid::Periodic(b) => b.distance_from_center(j),
        }
    }

    /// A representative point of node `j` in `ℝ^N` (on the first axis for radial grids).
    pub fn point(&self, j: usize) -> Vec<f64> {
        match self {
            Grid::Radial(g) => {
                let mut x = vec![0.0; g.dimension];
                x[0] = g.nodes[j];
                x
            }
            Grid::Periodic(b) => b.coords(j).to_vec(),
        }
    }

    /// Calls `f(a, b, κ)` for every edge of the stencil.
    pub fn for_each_edge<F: FnMut(usize, usize, f64)>(&self, mut f: F) {
        match self {
            Grid::Radial(g) => {
                for (j, &k) in g.kappa.iter().enumerate() {
                    f(j, j + 1, k);
                }
            }
            Grid::Periodic(b) => {
                let m = b.m;
                let kappa = b.h;
                for k in 0..m {
                    for j in 0..m {
                        for i in 0..m {
                            let a = b.index(i, j, k);
                            f(a, b.index((i + 1) % m, j, k), kappa);
                            f(a, b.index(i, (j + 1) % m, k), kappa);
                            f(a, b.index(i, j, (k + 1) % m), kappa);
                        }
                    }
                }
            }
        }
    }

    /// `∫ ∇a·∇b ≈ Σ_e κ_e (a_b − a_a)(b_b − b_a)`.
    pub fn dirichlet_form(&self, a: &[f64], b: &[f64]) -> f64 {
        let mut s = 0.0;
        self.for_each_edge(|i, j, k| s += k * (a[j] - a[i]) * (b[j] - b[i]));
        s
    }

    /// Stiffness matrix applied to `v`: `(Av)_j = Σ_{e ∋ j} κ_e (v_j − v_other)`.
    pub fn stiffness_apply(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; v.len()];
        self.for_each_edge(|i, j, k| {
            let flux = k * (v[j] - v[i]);
            out[i] -= flux;
            out[j] += flux;
        });
        out
    }

    /// `Σ w_j v_j`.
    pub fn integrate_values(&self, v: &[f64]) -> f64 {
        match self {
            Grid::Radial(g) => g.weights.iter().zip(v).map(|(w, x)| w * x).sum(),
            Grid::Periodic(b) => b.h.powi(3) * v.iter().sum::<f64>(),
        }
    }

    /// Nodal values of `V`; the radial backend needs a constant potential.
    /// `∫_{B_r} f` about the origin (radial) or the box center, from nodal values of `f`;
    /// radial cells crossing `r` are counted by their volume fraction.
    pub fn ball_integral(&self, r: f64, f: &[f64]) -> f64 {
        match self {
            Grid::Radial(g) => {
                let nn = g.dimension as i32;
                let c = sphere_area(g.dimension) / g.dimension as f64;
                let mut m = 0.0;
                for j in 0..=g.n {
                    let lo = if j == 0 { 0.0 } else { (j as f64 - 0.5) * g.h };
                    let hi = if j == g.n { g.radius } else { (j as f64 + 0.5) * g.h };
                    if lo >= r {
                        break;
                    }
                    m += c * (hi.min(r).powi(nn) - lo.powi(nn)) * f[j];
                }
                m
            }
            Grid::Periodic(b) => {
                let w = b.h.powi(3);
                (0..f.len()).filter(|&j| b.distance_from_center(j) < r).map(|j| w * f[j]).sum()
            }
        }
    }

    pub fn potential_values(&self, potential: &Potential) -> Result<Vec<f64>> {
        match self {
            Grid::Radial(g) => match potential.constant() {
                Some(v0) => Ok(vec![v0; g.n + 1]),
                None => Err(Error::Grid("radial grid supports only a constant potential".into())),
            },
            Grid::Periodic(b) => Ok((0..self.len()).map(|j| potential.eval(&b.coords(j))).collect()),
        }
    }

    /// Solves `(A + W diag(c)) z = rhs` with the boundary condition applied; `c > 0`.
    pub fn solve_shifted(&self, c: &[f64], rhs: &[f64], boundary: Boundary) -> Vec<f64> {
        match self {
            Grid::Radial(g) => solve_radial(g, c, rhs, boundary),
            Grid::Periodic(_) => self.solve_cg(c, rhs),
        }
    }

    fn solve_cg(&self, c: &[f64], rhs: &[f64]) -> Vec<f64> {
        let w = self.weight(0);
        let diag_k = 6.0 * self.as_box().map(|b| b.h).unwrap_or(1.0);
        let op = |x: &[f64]| -> Vec<f64> {
            let mut y = self.stiffness_apply(x);
            for (j, yj) in y.iter_mut().enumerate() {
                *yj += w * c[j] * x[j];
            }
            y
        };
        let diag: Vec<f64> = c.iter().map(|cj| diag_k + w * cj).collect();
        let n = rhs.len();
        let mut x = vec![0.0; n];
        let mut r = rhs.to_vec();
        let mut z: Vec<f64> = r.iter().zip(&diag).map(|(a, d)| a / d).collect();
        let mut p = z.clone();
        let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let norm0 = rhs.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm0 == 0.0 {
            return x;
        }
        for _ in 0..10 * n {
            let ap = op(&p);
            let alpha = rz / p.iter().zip(&ap).map(|(a, b)| a * b).sum::<f64>();
            for j in 0..n {
                x[j] += alpha * p[j];
                r[j] -= alpha * ap[j];
            }
            if r.iter().map(|a| a * a).sum::<f64>().sqrt() <= 1e-14 * norm0 {
                break;
            }
            z = r.iter().zip(&diag).map(|(a, d)| a / d).collect();
            let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
            let beta = rz_new / rz;
            rz = rz_new;
            for j in 0..n {
                p[j] = z[j] + beta * p[j];
            }
        }
        x
    }

    /// Short description used in manifests and reports.
    pub fn fingerprint(&self) -> String {
        match self {
            Grid::Radial(g) => format!("radial N={} R={} n={}", g.dimension, g.radius, g.n),
            Grid::Periodic(b) => format!("box N=3 L={} m={}", b.side, b.m),
        }
    }
}

fn solve_radial(g: &RadialGrid, c: &[f64], rhs: &[f64], boundary: Boundary) -> Vec<f64> {
    let len = g.n + 1;
    let unknowns = if boundary == Boundary::DirichletAtR { g.n } else { len };
    let mut diag = vec![0.0; unknowns];
    let mut upper = vec![0.0; unknowns];
    let mut lower = vec![0.0; unknowns];
    for j in 0..unknowns {
        diag[j] = g.weights[j] * c[j];
        if j > 0 {
            diag[j] += g.kappa[j - 1];
            lower[j] = -g.kappa[j - 1];
        }
        if j < g.n {
            diag[j] += g.kappa[j];
            upper[j] = -g.kappa[j];
        }
    }
    // Thomas algorithm.
    let mut cp = vec![0.0; unknowns];
    let mut dp = vec![0.0; unknowns];
    cp[0] = upper[0] / diag[0];
    dp[0] = rhs[0] / diag[0];
    for j in 1..unknowns {
        let m = diag[j] - lower[j] * cp[j - 1];
        cp[j] = upper[j] / m;
        dp[j] = (rhs[j] - lower[j] * dp[j - 1]) / m;
    }
    let mut z = vec![0.0; len];
    z[unknowns - 1] = dp[unknowns - 1];
    for j in (0..unknowns - 1).rev() {
        z[j] = dp[j] - cp[j] * z[j + 1];
    }
    z
}

/// A function sampled at the nodes of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Arc<Grid>,
    values: Vec<f64>,
    boundary: Boundary,
}

impl Field {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>, boundary: Boundary) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Grid(format!("expected {} values, got {}", grid.len(), values.len())));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Grid(format!("field value {bad} is not finite")));
        }
        match (&*grid, boundary) {
            (Grid::Radial(_), Boundary::Periodic) => {
                return Err(Error::Grid("radial grids take DirichletAtR or Free boundaries".into()))
            }
            (Grid::Periodic(_), b) if b != Boundary::Periodic => {
                return Err(Error::Grid("box grids are periodic".into()))
            }
            _ => {}
        }
        if boundary == Boundary::DirichletAtR && values[values.len() - 1] != 0.0 {
            return Err(Error::Grid("DirichletAtR field must vanish at R".into()));
        }
        Ok(Field { grid, values, boundary })
    }

    /// Samples `f(distance)` at every node; under `DirichletAtR` the last node is set to 0.
    pub fn from_radial_fn<F: Fn(f64) -> f64>(grid: Arc<Grid>, boundary: Boundary, f: F) -> Result<Self> {
        let mut values: Vec<f64> = (0..grid.len()).map(|j| f(grid.distance(j))).collect();
        if boundary == Boundary::DirichletAtR {
            *values.last_mut().expect("non-empty") = 0.0;
        }
        Self::new(grid, values, boundary)
    }

    pub fn zeros(grid: Arc<Grid>, boundary: Boundary) -> Result<Self> {
        let n = grid.len();
        Self::new(grid, vec![0.0; n], boundary)
    }

    /// The natural boundary for the grid: `DirichletAtR` for radial, `Periodic` for the box.
    pub fn default_boundary(grid: &Grid) -> Boundary {
        match grid {
            Grid::Radial(_) => Boundary::DirichletAtR,
            Grid::Periodic(_) => Boundary::Periodic,
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Same grid and boundary with new values; the boundary constraint is re-applied.
    pub fn with_values(&self, mut values: Vec<f64>) -> Result<Self> {
        self.constrain(&mut values);
        Self::new(self.grid.clone(), values, self.boundary)
    }

    /// Zeroes the constrained node, if any.
    pub fn constrain(&self, values: &mut [f64]) {
        if self.boundary == Boundary::DirichletAtR {
            if let Some(last) = values.last_mut() {
                *last = 0.0;
            }
        }
    }

    pub fn map<F: Fn(f64) -> f64>(&self, f: F) -> Result<Self> {
        self.with_values(self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn scale(&self, c: f64) -> Self {
        Field { grid: self.grid.clone(), values: self.values.iter().map(|v| c * v).collect(), boundary: self.boundary }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `Δv = −(Av)/w`; zero at a Dirichlet node.
    pub fn laplacian(&self) -> Field {
        let av = self.grid.stiffness_apply(&self.values);
        let mut values: Vec<f64> = av.iter().enumerate().map(|(j, a)| -a / self.grid.weight(j)).collect();
        self.constrain(&mut values);
        Field { grid: self.grid.clone(), values, boundary: self.boundary }
    }

    pub fn integrate(&self) -> f64 {
        self.grid.integrate_values(&self.values)
    }

    /// `∫|∇v|²`.
    pub fn gradient_sq(&self) -> f64 {
        self.grid.dirichlet_form(&self.values, &self.values)
    }

    pub fn norm_l2_sq(&self) -> f64 {
        (0..self.values.len()).map(|j| self.grid.weight(j) * self.values[j] * self.values[j]).sum()
    }

    pub fn norm_l2(&self) -> f64 {
        self.norm_l2_sq().sqrt()
    }

    /// `∫|v|^p`.
    pub fn lp_integral(&self, p: f64) -> f64 {
        (0..self.values.len()).map(|j| self.grid.weight(j) * self.values[j].abs().powf(p)).sum()
    }

    pub fn norm_lp(&self, p: f64) -> f64 {
        self.lp_integral(p).powf(1.0 / p)
    }

    /// `‖v‖_{2*}` for the grid dimension.
    pub fn norm_lcrit(&self) -> f64 {
        self.norm_lp(crate::nonlinearity::critical_exponent(self.grid.dimension()))
    }

    pub fn norm_h1(&self) -> f64 {
        (self.gradient_sq() + self.norm_l2_sq()).sqrt()
    }

    /// `⟨a, b⟩_E = ∫∇a·∇b + ∫V a b` with nodal potential values.
    pub fn inner_e(&self, other: &Field, potential: &[f64]) -> f64 {
        e_inner(&self.grid, &self.values, &other.values, potential)
    }

    pub fn norm_e(&self, potential: &[f64]) -> f64 {
        e_inner(&self.grid, &self.values, &self.values, potential).sqrt()
    }

    /// `∫_{B_r} |v|²` about the concentration center, with the cell crossing `r` counted fractionally.
    pub fn ball_mass(&self, r: f64) -> f64 {
        let sq: Vec<f64> = self.values.iter().map(|v| v * v).collect();
        self.grid.ball_integral(r, &sq)
    }

    /// Linear interpolation onto another radial grid of the same dimension.
    pub fn interpolate(&self, target: Arc<Grid>) -> Result<Field> {
        let (Grid::Radial(src), Grid::Radial(dst)) = (&*self.grid, &*target) else {
            return Err(Error::Grid("interpolation is defined between radial grids".into()));
        };
        if src.dimension != dst.dimension {
            return Err(Error::Grid("interpolation between grids of different dimension".into()));
        }
        let last = *self.values.last().expect("non-empty");
        let mut values: Vec<f64> = dst
            .nodes
            .iter()
            .map(|&r| {
                if r >= src.radius {
                    return if self.boundary == Boundary::DirichletAtR { 0.0 } else { last };
                }
                let x = r / src.h;
                let j = (x.floor() as usize).min(src.n - 1);
                let t = x - j as f64;
                (1.0 - t) * self.values[j] + t * self.values[j + 1]
            })
            .collect();
        if self.boundary == Boundary::DirichletAtR {
            *values.last_mut().expect("non-empty") = 0.0;
        }
        Field::new(target, values, self.boundary)
    }

    /// Cyclic shift of a box field by whole cells.
    pub fn roll(&self, shift: [isize; 3]) -> Result<Field> {
        let Grid::Periodic(b) = &*self.grid else {
            return Err(Error::Grid("roll is defined on the periodic box".into()));
        };
        let m = b.m as isize;
        let mut values = vec![0.0; self.values.len()];
        for k in 0..b.m {
            for j in 0..b.m {
                for i in 0..b.m {
                    let src = b.index(i, j, k);
                    let di = (i as isize + shift[0]).rem_euclid(m) as usize;
                    let dj = (j as isize + shift[1]).rem_euclid(m) as usize;
                    let dk = (k as isize + shift[2]).rem_euclid(m) as usize;
                    values[b.index(di, dj, dk)] = self.values[src];
                }
            }
        }
        Field::new(self.grid.clone(), values, self.boundary)
    }

    /// CSV with a header: `r,value` for radial grids, `x,y,z,value` for the box.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        match &*self.grid {
            Grid::Radial(g) => {
                out.push_str("r,value\n");
                for (r, v) in g.nodes.iter().zip(&self.values) {
                    let _ = writeln!(out, "{r:e},{v:e}");
                }
            }
            Grid::Periodic(b) => {
                out.push_str("x,y,z,value\n");
                for (j, v) in self.values.iter().enumerate() {
                    let [x, y, z] = b.coords(j);
                    let _ = writeln!(out, "{x:e},{y:e},{z:e},{v:e}");
                }
            }
        }
        out
    }
}

/// `Σ_e κ_e Δa Δb + Σ_j w_j V_j a_j b_j`.
pub fn e_inner(grid: &Grid, a: &[f64], b: &[f64], potential: &[f64]) -> f64 {
    let mut s = grid.dirichlet_form(a, b);
    for j in 0..a.len() {
        s += grid.weight(j) * potential[j] * a[j] * b[j];
    }
    s
}
