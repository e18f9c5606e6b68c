//! The dual transform `v = G(u)`, `G(t) = ∫₀ᵗ g`, and its inverse.
//!
//! Every [`TransformSpec`] is immutable after construction. Kinds without a
//! closed-form primitive carry a cumulative quadrature table, and every kind
//! except the identity carries a Hermite table seeding the Newton inverse.

use std::f64::consts::SQRT_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{gauss_kronrod_panel, integrate_adaptive};
use crate::report::{scaled, PropertyReport};

pub const DEFAULT_QUADRATURE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransformKind {
    /// `g ≡ 1`: the semilinear case.
    Identity,
    /// `g²(t) = 1 + 2t²`.
    SuperfluidFilm,
    /// `g²(t) = 1 + t²/(2(1 + t²))`.
    LaserChanneling,
    /// `g` given by samples on `t ≥ 0`, monotone cubic in between.
    Tabulated,
}

/// Monotone piecewise-cubic Hermite interpolant on `t ≥ 0`, constant past the last knot.
#[derive(Debug, Clone, PartialEq)]
pub struct MonotoneCubic {
    knots: Vec<f64>,
    values: Vec<f64>,
    slopes: Vec<f64>,
}

impl MonotoneCubic {
    pub fn new(knots: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let m = knots.len();
        if m < 2 || values.len() != m {
            return Err(Error::InvalidParameter(
                "tabulated g needs at least two (t, g) samples of equal length".into(),
            ));
        }
        if knots[0] != 0.0 {
            return Err(Error::InvalidParameter("tabulated g must start at t = 0".into()));
        }
        if knots.windows(2).any(|w| !(w[1] > w[0])) || knots.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidParameter("tabulated t must be finite and strictly increasing".into()));
        }
        if values.iter().any(|g| !(g.is_finite() && *g > 0.0)) {
            return Err(Error::InvalidParameter("tabulated g must be finite and positive".into()));
        }
        let secants: Vec<f64> =
            (0..m - 1).map(|k| (values[k + 1] - values[k]) / (knots[k + 1] - knots[k])).collect();
        let mut slopes = vec![0.0; m];
        // Zero slope at t = 0 keeps the even extension C¹; zero at the last knot
        // matches the constant continuation.
        for k in 1..m - 1 {
            let (d0, d1) = (secants[k - 1], secants[k]);
            if d0 * d1 > 0.0 {
                let h0 = knots[k] - knots[k - 1];
                let h1 = knots[k + 1] - knots[k];
                let w1 = 2.0 * h1 + h0;
                let w2 = h1 + 2.0 * h0;
                slopes[k] = (w1 + w2) / (w1 / d0 + w2 / d1);
            }
        }
        Ok(MonotoneCubic { knots, values, slopes })
    }

    fn locate(&self, t: f64) -> Option<usize> {
        let last = *self.knots.last().expect("non-empty");
        if t >= last {
            return None;
        }
        let k = self.knots.partition_point(|&x| x <= t);
        Some(k.saturating_sub(1))
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self.locate(t) {
            None => *self.values.last().expect("non-empty"),
            Some(k) => {
                let h = self.knots[k + 1] - self.knots[k];
                let x = (t - self.knots[k]) / h;
                let (x2, x3) = (x * x, x * x * x);
                let h00 = 2.0 * x3 - 3.0 * x2 + 1.0;
                let h10 = x3 - 2.0 * x2 + x;
                let h01 = -2.0 * x3 + 3.0 * x2;
                let h11 = x3 - x2;
                h00 * self.values[k]
                    + h10 * h * self.slopes[k]
                    + h01 * self.values[k + 1]
                    + h11 * h * self.slopes[k + 1]
            }
        }
    }

    pub fn derivative(&self, t: f64) -> f64 {
        match self.locate(t) {
            None => 0.0,
            Some(k) => {
                let h = self.knots[k + 1] - self.knots[k];
                let x = (t - self.knots[k]) / h;
                let x2 = x * x;
                let d00 = (6.0 * x2 - 6.0 * x) / h;
                let d10 = 3.0 * x2 - 4.0 * x + 1.0;
                let d01 = (-6.0 * x2 + 6.0 * x) / h;
                let d11 = 3.0 * x2 - 2.0 * x;
                d00 * self.values[k]
                    + d10 * self.slopes[k]
                    + d01 * self.values[k + 1]
                    + d11 * self.slopes[k + 1]
            }
        }
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tail {
    /// `g` is constant past the table.
    Constant(f64),
    /// `g(τ) → g∞` like `1/τ²`; integrate the remainder in `x = 1/τ`.
    LaserAsymptotic,
}

/// Cumulative values of `G` at breakpoints; one Kronrod panel finishes each lookup.
#[derive(Debug, Clone, PartialEq)]
struct PrimitiveTable {
    nodes: Vec<f64>,
    cumulative: Vec<f64>,
    tail: Tail,
}

/// Hermite table of `G⁻¹` sampled at `s_k = G(t_k)`, used to seed Newton.
#[derive(Debug, Clone, PartialEq)]
struct InverseTable {
    s: Vec<f64>,
    t: Vec<f64>,
    slope: Vec<f64>,
}

impl InverseTable {
    /// Initial guess and a bracket `[lo, hi]` for `G⁻¹(s)`, `s ≥ 0`.
    fn guess(&self, s: f64) -> Option<(f64, f64, f64)> {
        let last = *self.s.last()?;
        if s >= last {
            return None;
        }
        let k = self.s.partition_point(|&x| x <= s).saturating_sub(1);
        let h = self.s[k + 1] - self.s[k];
        let x = (s - self.s[k]) / h;
        let (x2, x3) = (x * x, x * x * x);
        let t = (2.0 * x3 - 3.0 * x2 + 1.0) * self.t[k]
            + (x3 - 2.0 * x2 + x) * h * self.slope[k]
            + (-2.0 * x3 + 3.0 * x2) * self.t[k + 1]
            + (x3 - x2) * h * self.slope[k + 1];
        Some((t.clamp(self.t[k], self.t[k + 1]), self.t[k], self.t[k + 1]))
    }
}

#[derive(Debug, Clone)]
pub struct TransformSpec {
    kind: TransformKind,
    tabulated: Option<MonotoneCubic>,
    primitive_table: Option<PrimitiveTable>,
    inverse_table: Option<InverseTable>,
    quadrature_tol: f64,
}

const LASER_G_INF: f64 = 1.224_744_871_391_589; // sqrt(3/2)
const LASER_TABLE_END: f64 = 1.0e3;

impl TransformSpec {
    pub fn identity() -> Self {
        Self::bare(TransformKind::Identity, None)
    }

    pub fn superfluid_film() -> Self {
        let mut spec = Self::bare(TransformKind::SuperfluidFilm, None);
        spec.inverse_table = Some(spec.build_inverse_table());
        spec
    }

    pub fn laser_channeling() -> Result<Self> {
        let mut spec = Self::bare(TransformKind::LaserChanneling, None);
        let mut nodes: Vec<f64> = (0..=128).map(|k| k as f64 / 16.0).collect();
        let mut t = 8.0;
        while t < LASER_TABLE_END {
            t = (t * 1.1).min(LASER_TABLE_END);
            nodes.push(t);
        }
        spec.primitive_table = Some(spec.build_primitive_table(nodes, Tail::LaserAsymptotic)?);
        spec.inverse_table = Some(spec.build_inverse_table());
        Ok(spec)
    }

    /// `g` from samples `(t_i, g_i)`, `t_0 = 0`. Assumption checks are the caller's job.
    pub fn tabulated(t: Vec<f64>, g: Vec<f64>) -> Result<Self> {
        let cubic = MonotoneCubic::new(t, g)?;
        let nodes = cubic.knots().to_vec();
        let tail = Tail::Constant(*cubic.values().last().expect("non-empty"));
        let mut spec = Self::bare(TransformKind::Tabulated, Some(cubic));
        spec.primitive_table = Some(spec.build_primitive_table(nodes, tail)?);
        spec.inverse_table = Some(spec.build_inverse_table());
        Ok(spec)
    }

    pub fn from_kind(kind: TransformKind) -> Result<Self> {
        match kind {
            TransformKind::Identity => Ok(Self::identity()),
            TransformKind::SuperfluidFilm => Ok(Self::superfluid_film()),
            TransformKind::LaserChanneling => Self::laser_channeling(),
            TransformKind::Tabulated => Err(Error::InvalidParameter(
                "tabulated transform needs samples; use TransformSpec::tabulated".into(),
            )),
        }
    }

    fn bare(kind: TransformKind, tabulated: Option<MonotoneCubic>) -> Self {
        TransformSpec {
            kind,
            tabulated,
            primitive_table: None,
            inverse_table: None,
            quadrature_tol: DEFAULT_QUADRATURE_TOL,
        }
    }

    pub fn kind(&self) -> TransformKind {
        self.kind
    }

    pub fn quadrature_tol(&self) -> f64 {
        self.quadrature_tol
    }

    pub fn tabulated_samples(&self) -> Option<&MonotoneCubic> {
        self.tabulated.as_ref()
    }

    /// `g(t)`; even by construction.
    pub fn g(&self, t: f64) -> f64 {
        let a = t.abs();
        match self.kind {
            TransformKind::Identity => 1.0,
            TransformKind::SuperfluidFilm => (1.0 + 2.0 * a * a).sqrt(),
            TransformKind::LaserChanneling => {
                let a2 = a * a;
                (1.0 + a2 / (2.0 * (1.0 + a2))).sqrt()
            }
            TransformKind::Tabulated => self.tabulated.as_ref().expect("tabulated data").eval(a),
        }
    }

    /// Checked `g(t)`: rejects non-finite arguments.
    pub fn g_eval(&self, t: f64) -> Result<f64> {
        if !t.is_finite() {
            return Err(Error::Domain(format!("g evaluated at non-finite t = {t}")));
        }
        Ok(self.g(t))
    }

    /// `g'(t)`; odd because `g` is even.
    pub fn g_prime(&self, t: f64) -> f64 {
        let a = t.abs();
        let d = match self.kind {
            TransformKind::Identity => 0.0,
            TransformKind::SuperfluidFilm => 2.0 * a / (1.0 + 2.0 * a * a).sqrt(),
            TransformKind::LaserChanneling => {
                let q = 1.0 + a * a;
                a / (2.0 * self.g(a) * q * q)
            }
            TransformKind::Tabulated => self.tabulated.as_ref().expect("tabulated data").derivative(a),
        };
        if t < 0.0 { -d } else { d }
    }

    /// `lim g(t)` as `t → ∞` when `g` is bounded.
    pub fn g_limit(&self) -> Option<f64> {
        match self.kind {
            TransformKind::Identity => Some(1.0),
            TransformKind::SuperfluidFilm => None,
            TransformKind::LaserChanneling => Some(LASER_G_INF),
            TransformKind::Tabulated => self.tabulated.as_ref().and_then(|c| c.values().last().copied()),
        }
    }

    /// Closed-form `G`, when the kind has one.
    pub fn primitive_closed(&self, t: f64) -> Option<f64> {
        match self.kind {
            TransformKind::Identity => Some(t),
            TransformKind::SuperfluidFilm => {
                let a = t.abs();
                let v = 0.5 * a * (1.0 + 2.0 * a * a).sqrt() + (SQRT_2 * a).asinh() / (2.0 * SQRT_2);
                Some(v.copysign(t))
            }
            _ => None,
        }
    }

    /// `G(t)`: closed form where available, otherwise the cumulative quadrature table.
    pub fn primitive(&self, t: f64) -> f64 {
        if let Some(v) = self.primitive_closed(t) {
            return v;
        }
        let a = t.abs();
        let table = self.primitive_table.as_ref().expect("primitive table built at construction");
        let end = *table.nodes.last().expect("non-empty");
        let v = if a < end {
            let k = table.nodes.partition_point(|&x| x <= a).saturating_sub(1);
            let g = |x: f64| self.g(x);
            table.cumulative[k] + gauss_kronrod_panel(&g, table.nodes[k], a).0
        } else {
            let base = *table.cumulative.last().expect("non-empty");
            match table.tail {
                Tail::Constant(g_end) => base + g_end * (a - end),
                Tail::LaserAsymptotic => base + LASER_G_INF * (a - end) + laser_tail(a, end),
            }
        };
        v.copysign(t)
    }

    /// Checked `G(t)`.
    pub fn primitive_eval(&self, t: f64) -> Result<f64> {
        if !t.is_finite() {
            return Err(Error::Domain(format!("G evaluated at non-finite t = {t}")));
        }
        Ok(self.primitive(t))
    }

    /// `G(t)` by direct adaptive quadrature of `g` on `[0, |t|]`, bypassing tables and closed forms.
    pub fn primitive_by_quadrature(&self, t: f64) -> Result<f64> {
        if !t.is_finite() {
            return Err(Error::Domain(format!("G evaluated at non-finite t = {t}")));
        }
        let a = t.abs();
        let mut breaks = vec![0.0];
        if let Some(c) = &self.tabulated {
            breaks.extend(c.knots().iter().copied().filter(|&k| k > 0.0 && k < a));
        }
        breaks.push(a);
        let mut total = 0.0;
        let tol = self.quadrature_tol / breaks.len() as f64;
        for w in breaks.windows(2) {
            total += integrate_adaptive(|x| self.g(x), w[0], w[1], tol.max(1e-15 * a), 10_000)?.value;
        }
        Ok(total.copysign(t))
    }

    /// `G⁻¹(s)` by safeguarded Newton with bisection fallback; odd in `s`.
    pub fn inverse(&self, s: f64) -> f64 {
        match self.kind {
            TransformKind::Identity => s,
            _ => {
                let a = s.abs();
                if a == 0.0 {
                    return 0.0;
                }
                self.inverse_positive(a).copysign(s)
            }
        }
    }

    /// Checked `G⁻¹(s)`.
    pub fn inverse_eval(&self, s: f64) -> Result<f64> {
        if !s.is_finite() {
            return Err(Error::Domain(format!("inverse evaluated at non-finite s = {s}")));
        }
        let t = self.inverse(s);
        if !t.is_finite() {
            return Err(Error::Invariant(format!("inverse of {s} failed to bracket")));
        }
        Ok(t)
    }

    fn inverse_positive(&self, s: f64) -> f64 {
        let (t0, mut lo, mut hi) = match self.inverse_table.as_ref().and_then(|tab| tab.guess(s)) {
            Some(seed) => seed,
            None => {
                // |G⁻¹(s)| ≤ |s| when g ≥ g(0) = 1; keep growing in case g(0) < 1.
                let mut hi = s;
                let mut grow = 0;
                while self.primitive(hi) < s {
                    hi *= 2.0;
                    grow += 1;
                    if grow > 2000 || !hi.is_finite() {
                        return f64::NAN;
                    }
                }
                (hi, 0.0, hi)
            }
        };
        let tol = self.quadrature_tol.max(2.0 * f64::EPSILON * s);
        let mut t = t0;
        for _ in 0..200 {
            let r = self.primitive(t) - s;
            if r.abs() <= tol {
                return t;
            }
            if r > 0.0 {
                hi = hi.min(t);
            } else {
                lo = lo.max(t);
            }
            let mut next = t - r / self.g(t);
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if (next - t).abs() <= 2.0 * f64::EPSILON * t.abs() || hi - lo <= 2.0 * f64::EPSILON * hi {
                return next;
            }
            t = next;
        }
        t
    }

    fn build_primitive_table(&self, nodes: Vec<f64>, tail: Tail) -> Result<PrimitiveTable> {
        let tol = self.quadrature_tol / nodes.len() as f64;
        let mut cumulative = Vec::with_capacity(nodes.len());
        let mut acc = 0.0;
        cumulative.push(0.0);
        for w in nodes.windows(2) {
            let q = integrate_adaptive(|x| self.g(x), w[0], w[1], tol, 1000)?;
            acc += q.value;
            cumulative.push(acc);
        }
        Ok(PrimitiveTable { nodes, cumulative, tail })
    }

    fn build_inverse_table(&self) -> InverseTable {
        let mut t: Vec<f64> = (0..=256).map(|k| k as f64 / 32.0).collect();
        let mut x = 8.0;
        while self.primitive(x) < 1.0e7 {
            x *= 1.05;
            t.push(x);
        }
        let s: Vec<f64> = t.iter().map(|&x| self.primitive(x)).collect();
        let slope: Vec<f64> = t.iter().map(|&x| 1.0 / self.g(x)).collect();
        InverseTable { s, t, slope }
    }
}

/// `∫_end^a (g(τ) − g∞) dτ` for the laser-channeling `g`, integrated in `x = 1/τ`.
fn laser_tail(a: f64, end: f64) -> f64 {
    // g(1/x)² = 1 + 1/(2(1 + x²)); the remainder divided by x² stays smooth at x = 0.
    let integrand = |x: f64| {
        let q = 1.0 + x * x;
        let g = (1.0 + 0.5 / q).sqrt();
        -0.5 / (q * (g + LASER_G_INF))
    };
    let lo = if a.is_infinite() { 0.0 } else { 1.0 / a };
    gauss_kronrod_panel(&integrand, lo, 1.0 / end).0
}

/// Sampled verification of assumption (g) and the resulting properties of `G` and `G⁻¹`.
///
/// Samples are read both as `t` (for `g`, `G`) and as `s` (for `G⁻¹`); their
/// absolute values and negatives are included automatically.
pub fn check_g_assumptions(spec: &TransformSpec, samples: &[f64]) -> PropertyReport {
    let mut report = PropertyReport::new(format!("transform {:?}", spec.kind()));
    let mut pos: Vec<f64> = samples.iter().map(|x| x.abs()).filter(|x| *x > 0.0 && x.is_finite()).collect();
    pos.sort_by(f64::total_cmp);
    pos.dedup();
    let domain = match (pos.first(), pos.last()) {
        (Some(a), Some(b)) => format!("{} samples, |t| in [{a:.1e}, {b:.1e}]", pos.len()),
        _ => "no positive samples".to_string(),
    };
    let mut signed: Vec<f64> = pos.iter().rev().map(|x| -x).chain([0.0]).chain(pos.iter().copied()).collect();
    signed.dedup();

    let g0 = spec.g(0.0);
    let e = (g0 - 1.0).abs();
    report.push("g(0) = 1", "t = 0", e, e <= 1e-12);

    let worst_even = pos.iter().map(|&t| (spec.g(t) - spec.g(-t)).abs()).fold(0.0, f64::max);
    report.push("g even", &domain, worst_even, worst_even == 0.0);

    let worst_pos = signed.iter().map(|&t| (-spec.g(t)).max(0.0)).fold(0.0, f64::max);
    report.push("g > 0", &domain, worst_pos, signed.iter().all(|&t| spec.g(t) > 0.0));

    let worst_gp = pos.iter().map(|&t| (-spec.g_prime(t)).max(0.0)).fold(0.0, f64::max);
    report.push("g'(t) >= 0 for t >= 0", &domain, worst_gp, worst_gp <= 1e-12);

    // (1) G and G⁻¹ strictly increasing and odd.
    let big_g: Vec<f64> = signed.iter().map(|&t| spec.primitive(t)).collect();
    let inv: Vec<f64> = signed.iter().map(|&s| spec.inverse(s)).collect();
    let mut worst1: f64 = 0.0;
    let mut ok1 = true;
    for w in big_g.windows(2).chain(inv.windows(2)) {
        if !(w[1] > w[0]) {
            ok1 = false;
            worst1 = worst1.max(w[0] - w[1]);
        }
    }
    for &t in &pos {
        let odd_g = (spec.primitive(t) + spec.primitive(-t)).abs();
        let odd_i = (spec.inverse(t) + spec.inverse(-t)).abs();
        worst1 = worst1.max(odd_g).max(odd_i);
        ok1 &= odd_g == 0.0 && odd_i == 0.0;
    }
    report.push("(1) G, G^-1 strictly increasing and odd", &domain, worst1, ok1);

    // (2) G(t) ≤ g(t) t on t ≥ 0.
    let worst2 = pos
        .iter()
        .map(|&t| {
            let gt = spec.g(t) * t;
            (spec.primitive(t) - gt - scaled(1e-12, gt)).max(0.0)
        })
        .fold(0.0, f64::max);
    report.push("(2) G(t) <= g(t) t", &domain, worst2, worst2 == 0.0);

    // (3) |G⁻¹(s)| ≤ |s| / g(0).
    let worst3 = signed
        .iter()
        .map(|&s| (spec.inverse(s).abs() - s.abs() / g0 - scaled(1e-12, s)).max(0.0))
        .fold(0.0, f64::max);
    report.push("(3) |G^-1(s)| <= |s|/g(0)", &domain, worst3, worst3 == 0.0);

    // (4) G⁻¹(s) / (s g(G⁻¹(s))) non-increasing on s > 0.
    let ratio4: Vec<f64> = pos
        .iter()
        .map(|&s| {
            let t = spec.inverse(s);
            t / (s * spec.g(t))
        })
        .collect();
    let worst4 = non_increasing_violation(&ratio4);
    report.push("(4) G^-1(s)/(s g(G^-1(s))) non-increasing", &domain, worst4, worst4 == 0.0);

    // (5) G⁻¹(s)/s non-increasing with limit 1/g(0) at 0⁺.
    let ratio5: Vec<f64> = pos.iter().map(|&s| spec.inverse(s) / s).collect();
    let worst5 = non_increasing_violation(&ratio5);
    report.push("(5a) G^-1(s)/s non-increasing", &domain, worst5, worst5 == 0.0);
    if let Some(&r0) = ratio5.first() {
        let e = (r0 - 1.0 / g0).abs();
        report.push_measured(
            "(5b) G^-1(s)/s -> 1/g(0) as s -> 0+",
            format!("s = {:.1e}", pos[0]),
            e,
            Some(r0),
            e <= 1e-6,
        );
    }

    let worst_rt = signed
        .iter()
        .map(|&s| (spec.primitive(spec.inverse(s)) - s).abs() / s.abs().max(1.0))
        .fold(0.0, f64::max);
    let rt_tol = 2.0 * spec.quadrature_tol();
    report.push("round trip |G(G^-1(s)) - s| / max(1,|s|)", &domain, worst_rt, worst_rt <= rt_tol);
    report
}

/// Largest increase along a sequence that should not increase, beyond relative slack 1e-12.
pub fn non_increasing_violation(values: &[f64]) -> f64 {
    values
        .windows(2)
        .map(|w| (w[1] - w[0] - scaled(1e-12, w[0])).max(0.0))
        .fold(0.0, f64::max)
}

/// Log-spaced samples `10^lo ..= 10^hi` with `per_decade` points per decade.
pub fn log_samples(lo: f64, hi: f64, per_decade: usize) -> Vec<f64> {
    let n = ((hi - lo) * per_decade as f64).round() as usize;
    (0..=n).map(|k| 10f64.powf(lo + (hi - lo) * k as f64 / n as f64)).collect()
}
