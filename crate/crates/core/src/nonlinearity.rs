//! The potential `V`, nonlinearity `f`, and the transformed pair `(h, H)`.
//!
//! For the supported family `f(t) = μ g(t)|G(t)|^{q−2}G(t)` (zero for `t ≤ 0`)
//! the transformed terms reduce to
//! `h(x,s) = V(x)(s − G⁻¹(s)/g(G⁻¹(s))) + μ s^{q−1}` and
//! `H(x,s) = ½V(x)(s² − G⁻¹(s)²) + μ s^q/q`, the power terms present only for `s > 0`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::integrate_adaptive;
use crate::report::{scaled, trend_to_infinity, trend_to_zero, PropertyReport};
use crate::transform::{log_samples, TransformSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Potential {
    Constant { v0: f64 },
    /// `V(x) = v0 + amplitude · ∏ cos(2π x_i)`.
    CosinePerturbed { v0: f64, amplitude: f64 },
}

impl Potential {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match *self {
            Potential::Constant { v0 } => v0,
            Potential::CosinePerturbed { v0, amplitude } => {
                v0 + amplitude * x.iter().map(|xi| (2.0 * PI * xi).cos()).product::<f64>()
            }
        }
    }

    pub fn min(&self) -> f64 {
        match *self {
            Potential::Constant { v0 } => v0,
            Potential::CosinePerturbed { v0, amplitude } => v0 - amplitude.abs(),
        }
    }

    pub fn max(&self) -> f64 {
        match *self {
            Potential::Constant { v0 } => v0,
            Potential::CosinePerturbed { v0, amplitude } => v0 + amplitude.abs(),
        }
    }

    /// The constant value, if `V` does not depend on `x`.
    pub fn constant(&self) -> Option<f64> {
        match *self {
            Potential::Constant { v0 } => Some(v0),
            Potential::CosinePerturbed { .. } => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Potential::Constant { v0 } if v0.is_finite() && v0 > 0.0 => Ok(()),
            Potential::Constant { v0 } => Err(Error::InvalidParameter(format!("V0 must be positive, got {v0}"))),
            Potential::CosinePerturbed { v0, amplitude } => {
                if !(v0.is_finite() && v0 > 0.0) {
                    Err(Error::InvalidParameter(format!("V0 must be positive, got {v0}")))
                } else if !(amplitude.is_finite() && (0.0..v0).contains(&amplitude)) {
                    Err(Error::InvalidParameter(format!("amplitude must lie in [0, V0), got {amplitude}")))
                } else {
                    Ok(())
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Nonlinearity {
    Zero,
    TransformedPower { mu: f64, q: f64 },
}

#[derive(Debug, Clone)]
pub struct ModelSpec {
    dimension: usize,
    transform: TransformSpec,
    potential: Potential,
    nonlinearity: Nonlinearity,
    omega_radius: f64,
}

impl ModelSpec {
    pub fn new(
        dimension: usize,
        transform: TransformSpec,
        potential: Potential,
        nonlinearity: Nonlinearity,
    ) -> Result<Self> {
        Self::with_omega(dimension, transform, potential, nonlinearity, 1.0)
    }

    /// Like [`ModelSpec::new`] with Ω the ball of the given radius about the origin.
    pub fn with_omega(
        dimension: usize,
        transform: TransformSpec,
        potential: Potential,
        nonlinearity: Nonlinearity,
        omega_radius: f64,
    ) -> Result<Self> {
        if dimension < 3 {
            return Err(Error::InvalidParameter(format!("dimension must be at least 3, got {dimension}")));
        }
        potential.validate()?;
        if !(omega_radius.is_finite() && omega_radius > 0.0) {
            return Err(Error::InvalidParameter(format!("omega radius must be positive, got {omega_radius}")));
        }
        let crit = critical_exponent(dimension);
        if let Nonlinearity::TransformedPower { mu, q } = nonlinearity {
            if !(mu.is_finite() && mu > 0.0) {
                return Err(Error::InvalidParameter(format!("mu must be positive, got {mu}")));
            }
            if !(q > 2.0 && q < crit) {
                return Err(Error::InvalidParameter(format!("q must lie in (2, {crit}), got {q}")));
            }
        }
        Ok(ModelSpec { dimension, transform, potential, nonlinearity, omega_radius })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn transform(&self) -> &TransformSpec {
        &self.transform
    }

    pub fn potential(&self) -> &Potential {
        &self.potential
    }

    pub fn nonlinearity(&self) -> &Nonlinearity {
        &self.nonlinearity
    }

    pub fn omega_radius(&self) -> f64 {
        self.omega_radius
    }

    /// `2* = 2N/(N−2)`.
    pub fn critical_exponent(&self) -> f64 {
        critical_exponent(self.dimension)
    }

    /// Same model with a different nonlinearity.
    pub fn with_nonlinearity(&self, nonlinearity: Nonlinearity) -> Result<Self> {
        Self::with_omega(self.dimension, self.transform.clone(), self.potential, nonlinearity, self.omega_radius)
    }

    pub fn v_eval(&self, x: &[f64]) -> f64 {
        self.potential.eval(x)
    }

    pub fn f_eval(&self, _x: &[f64], t: f64) -> f64 {
        match self.nonlinearity {
            Nonlinearity::TransformedPower { mu, q } if t > 0.0 => {
                let big_g = self.transform.primitive(t);
                mu * self.transform.g(t) * big_g.powf(q - 1.0)
            }
            _ => 0.0,
        }
    }

    pub fn big_f_eval(&self, _x: &[f64], t: f64) -> f64 {
        match self.nonlinearity {
            Nonlinearity::TransformedPower { mu, q } if t > 0.0 => mu * self.transform.primitive(t).powf(q) / q,
            _ => 0.0,
        }
    }

    pub fn h_eval(&self, x: &[f64], s: f64) -> f64 {
        self.h_with_v(self.v_eval(x), s)
    }

    pub fn big_h_eval(&self, x: &[f64], s: f64) -> f64 {
        self.big_h_with_v(self.v_eval(x), s)
    }

    /// `h(x, s)` given the value `vx = V(x)`.
    pub fn h_with_v(&self, vx: f64, s: f64) -> f64 {
        self.h_pair_with_v(vx, s).0
    }

    /// `H(x, s)` given the value `vx = V(x)`.
    pub fn big_h_with_v(&self, vx: f64, s: f64) -> f64 {
        self.h_pair_with_v(vx, s).1
    }

    /// `(h, H)` at `s` with a single inverse evaluation.
    pub fn h_pair_with_v(&self, vx: f64, s: f64) -> (f64, f64) {
        let t = self.transform.inverse(s);
        let (lin_h, lin_big) = if t == s {
            (0.0, 0.0)
        } else {
            (vx * (s - t / self.transform.g(t)), 0.5 * vx * (s - t) * (s + t))
        };
        match self.nonlinearity {
            Nonlinearity::TransformedPower { mu, q } if s > 0.0 => {
                let p = mu * s.powf(q - 1.0);
                (lin_h + p, lin_big + p * s / q)
            }
            _ => (lin_h, lin_big),
        }
    }

    /// `q(s) = G⁻¹(s)/g(G⁻¹(s))`, the potential term of the modified equation.
    pub fn potential_term(&self, s: f64) -> f64 {
        let t = self.transform.inverse(s);
        t / self.transform.g(t)
    }
}

pub fn critical_exponent(dimension: usize) -> f64 {
    let n = dimension as f64;
    2.0 * n / (n - 2.0)
}

/// Largest `|H(s) − ∫₀ˢ h|` relative to `max(1, |H(s)|)` over the sorted nonnegative samples.
pub fn h_integral_mismatch(model: &ModelSpec, vx: f64, s_samples: &[f64]) -> Result<f64> {
    let mut pts: Vec<f64> = s_samples.iter().copied().filter(|s| *s >= 0.0 && s.is_finite()).collect();
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let mut acc = 0.0;
    let mut prev = 0.0;
    let mut worst: f64 = 0.0;
    for &s in &pts {
        if s > prev {
            let panel_scale = model.big_h_with_v(vx, s).abs().max(1.0);
            let q = integrate_adaptive(|x| model.h_with_v(vx, x), prev, s, 1e-14 * panel_scale, 4000)?;
            acc += q.value;
            prev = s;
        }
        let big = model.big_h_with_v(vx, s);
        worst = worst.max((big - acc).abs() / big.abs().max(1.0));
    }
    Ok(worst)
}

/// Sampled verification of (V), (f2)–(f4) and the growth properties of `h`, `H`.
///
/// `s_samples` should be a log ladder (e.g. `10⁻⁶ ..= 10⁶`); negative values are
/// added for the sign-symmetric checks. `x_samples` are points in `ℝ^N`.
pub fn check_growth_conditions(model: &ModelSpec, s_samples: &[f64], x_samples: &[Vec<f64>]) -> PropertyReport {
    let mut report = PropertyReport::new(format!("growth N={} {:?}", model.dimension(), model.nonlinearity()));
    let crit = model.critical_exponent();
    let n = model.dimension();
    let mut s: Vec<f64> = s_samples.iter().map(|x| x.abs()).filter(|x| *x > 0.0 && x.is_finite()).collect();
    s.sort_by(f64::total_cmp);
    s.dedup();
    let domain = match (s.first(), s.last()) {
        (Some(a), Some(b)) => format!("s in [{a:.0e}, {b:.0e}], {} points x", x_samples.len()),
        _ => "no samples".into(),
    };
    let origin = vec![0.0; n];
    let xs: Vec<&[f64]> = if x_samples.is_empty() {
        vec![origin.as_slice()]
    } else {
        x_samples.iter().map(|x| x.as_slice()).collect()
    };
    let tr = model.transform();

    // (V)
    let vmin = xs.iter().map(|x| model.v_eval(x)).fold(f64::INFINITY, f64::min);
    report.push_measured("(V) V > 0", &domain, (-vmin).max(0.0), Some(vmin), vmin > 0.0);
    let mut per: f64 = 0.0;
    for x in &xs {
        for i in 0..x.len() {
            let mut y = x.to_vec();
            y[i] += 1.0;
            per = per.max((model.v_eval(&y) - model.v_eval(x)).abs());
        }
    }
    report.push("(V) 1-periodic", &domain, per, per <= 1e-12 * model.potential().max());

    // Ladders in t = G⁻¹(s) for the assumptions on f.
    let t: Vec<f64> = s.iter().map(|&x| tr.inverse(x)).collect();
    let rev = |v: Vec<f64>| -> Vec<f64> { v.into_iter().rev().collect() };
    let x0 = xs[0];

    let f_over_gg: Vec<f64> = t.iter().map(|&t| model.f_eval(x0, t) / (tr.g(t) * tr.primitive(t))).collect();
    let (ok, ratio) = trend_to_zero(&rev(f_over_gg.clone()));
    report.push_measured("(f2) f/(gG) -> 0 as t -> 0", &domain, ratio, Some(ratio), ok);
    let f_over_crit: Vec<f64> =
        t.iter().map(|&t| model.f_eval(x0, t) / (tr.g(t) * tr.primitive(t).powf(crit - 1.0))).collect();
    let (ok, ratio) = trend_to_zero(&f_over_crit);
    report.push_measured("(f2) f/(g G^(2*-1)) -> 0 as t -> inf", &domain, ratio, Some(ratio), ok);
    let worst = crate::transform::non_increasing_violation(&rev(f_over_gg));
    report.push("(f3) f/(gG) non-decreasing", &domain, worst, worst == 0.0);

    // Per-x ladders for h and H.
    let mut w1a: (bool, f64) = (true, 0.0);
    let mut w1b: (bool, f64) = (true, 0.0);
    let mut w2a: (bool, f64) = (true, 0.0);
    let mut w2b: (bool, f64) = (true, 0.0);
    let mut w3: f64 = 0.0;
    let mut w5: f64 = 0.0;
    let mut neg: f64 = 0.0;
    let mut c_delta = [0.0f64; 2];
    let mut c_delta_big = [0.0f64; 2];
    let deltas = [1e-2, 1e-1];
    let merge = |acc: &mut (bool, f64), (ok, r): (bool, f64), toward_zero: bool| {
        acc.0 &= ok;
        acc.1 = if toward_zero { acc.1.max(r) } else if acc.1 == 0.0 { r } else { acc.1.min(r) };
    };
    let mut w4: Option<(bool, f64)> = None;
    for x in &xs {
        let vx = model.v_eval(x);
        let pairs: Vec<(f64, f64)> = s.iter().map(|&s| model.h_pair_with_v(vx, s)).collect();
        let h_over_s: Vec<f64> = s.iter().zip(&pairs).map(|(s, p)| p.0 / s).collect();
        merge(&mut w1a, trend_to_zero(&rev(h_over_s.clone())), true);
        let r: Vec<f64> = s.iter().zip(&pairs).map(|(s, p)| p.0 / s.powf(crit - 1.0)).collect();
        merge(&mut w1b, trend_to_zero(&r), true);
        let r: Vec<f64> = s.iter().zip(&pairs).map(|(s, p)| p.1 / (s * s)).collect();
        merge(&mut w2a, trend_to_zero(&rev(r)), true);
        let r: Vec<f64> = s.iter().zip(&pairs).map(|(s, p)| p.1 / s.powf(crit)).collect();
        merge(&mut w2b, trend_to_zero(&r), true);
        w3 = w3.max(crate::transform::non_increasing_violation(
            &h_over_s.iter().rev().copied().collect::<Vec<_>>(),
        ));
        for sign in [1.0, -1.0] {
            for &sv in &s {
                let sv = sign * sv;
                let (h, big) = model.h_pair_with_v(vx, sv);
                w5 = w5.max((big - 0.5 * h * sv - scaled(1e-10, big)).max(0.0));
                w5 = w5.max((-big - scaled(1e-10, big)).max(0.0));
                neg = neg.max((-h * sv.signum() - scaled(1e-10, h)).max(0.0));
                let a = sv.abs();
                for (k, d) in deltas.iter().enumerate() {
                    c_delta[k] = c_delta[k].max((h.abs() - d * a) / a.powf(crit - 1.0));
                    c_delta_big[k] = c_delta_big[k].max((big - 0.5 * d * a * a) * crit / a.powf(crit));
                }
            }
        }
        let inside = x.iter().map(|c| c * c).sum::<f64>().sqrt() < model.omega_radius() || n >= 5;
        if inside {
            let ladder: Vec<(f64, f64)> = if n == 4 {
                s.iter().zip(&pairs).filter(|(s, _)| **s >= 10.0).map(|(s, p)| (*s, p.1)).collect()
            } else {
                s.iter().zip(&pairs).map(|(s, p)| (*s, p.1)).collect()
            };
            let r: Vec<f64> = ladder
                .iter()
                .map(|&(s, big)| match n {
                    3 => big / s.powi(4),
                    4 => big / (s * s * s.ln()),
                    _ => big / (s * s),
                })
                .collect();
            let t = trend_to_infinity(&r);
            let acc = w4.get_or_insert((true, f64::INFINITY));
            acc.0 &= t.0;
            acc.1 = acc.1.min(t.1);
        }
    }
    report.push_measured("(1) h/s -> 0 as s -> 0+", &domain, w1a.1, Some(w1a.1), w1a.0);
    report.push_measured("(1) h/s^(2*-1) -> 0 as s -> inf", &domain, w1b.1, Some(w1b.1), w1b.0);
    report.push_measured("(2) H/s^2 -> 0 as s -> 0+", &domain, w2a.1, Some(w2a.1), w2a.0);
    report.push_measured("(2) H/s^2* -> 0 as s -> inf", &domain, w2b.1, Some(w2b.1), w2b.0);
    report.push("(3) h/s non-decreasing on s > 0", &domain, w3, w3 == 0.0);
    let label4 = match n {
        3 => "(4) H/s^4 -> inf on Omega",
        4 => "(4) H/(s^2 ln s) -> inf on Omega (s >= 10)",
        _ => "(4) H/s^2 -> inf",
    };
    match w4 {
        Some((ok, ratio)) => report.push_measured(label4, &domain, ratio, Some(ratio), ok),
        None => report.push(label4, "no x sample inside Omega", f64::NAN, false),
    }
    report.push("(5) h s / 2 >= H >= 0", &domain, w5, w5 == 0.0);
    for (k, d) in deltas.iter().enumerate() {
        let c = c_delta[k].max(c_delta_big[k]).max(0.0);
        let ok = neg == 0.0 && c.is_finite();
        report.push_measured(format!("(6) h <= d|s| + C_d|s|^(2*-1), d = {d}"), &domain, neg, Some(c), ok);
    }
    report
}

/// Default growth ladder: 4 points per decade over `[1e-6, 1e6]`.
pub fn default_s_samples() -> Vec<f64> {
    log_samples(-6.0, 6.0, 4)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bn(n: usize, q: f64) -> ModelSpec {
        ModelSpec::new(
            n,
            TransformSpec::identity(),
            Potential::Constant { v0: 1.0 },
            Nonlinearity::TransformedPower { mu: 1.0, q },
        )
        .unwrap()
    }

    #[test]
    fn potential_values() {
        let cp = Potential::CosinePerturbed { v0: 1.0, amplitude: 0.5 };
        assert_eq!(cp.eval(&[0.0, 0.0, 0.0]), 1.5);
        assert!((cp.eval(&[0.5, 0.0, 0.0]) - 0.5).abs() < 1e-15);
        assert_eq!(Potential::Constant { v0: 1.0 }.eval(&[3.0, 1.0, 2.0]), 1.0);
        let x = [0.3, -1.7, 2.2];
        for i in 0..3 {
            let mut y = x;
            y[i] += 1.0;
            assert!((cp.eval(&y) - cp.eval(&x)).abs() < 1e-14);
        }
        assert!(Potential::CosinePerturbed { v0: 1.0, amplitude: 1.0 }.validate().is_err());
        assert!(Potential::Constant { v0: 0.0 }.validate().is_err());
    }

    #[test]
    fn f_and_primitive() {
        let m = bn(3, 5.0);
        let x = [0.0; 3];
        assert_eq!(m.f_eval(&x, 2.0), 16.0);
        assert!((m.big_f_eval(&x, 2.0) - 32.0 / 5.0).abs() < 1e-14);
        assert_eq!(m.f_eval(&x, -1.0), 0.0);
        assert_eq!(m.big_f_eval(&x, -1.0), 0.0);
        let quad = integrate_adaptive(|t| m.f_eval(&x, t), 0.0, 2.0, 1e-13, 100).unwrap().value;
        assert!((quad - 6.4).abs() < 1e-12);
        let sf = ModelSpec::new(
            3,
            TransformSpec::superfluid_film(),
            Potential::Constant { v0: 1.0 },
            Nonlinearity::TransformedPower { mu: 2.0, q: 4.0 },
        )
        .unwrap();
        let quad = integrate_adaptive(|t| sf.f_eval(&x, t), 0.0, 1.3, 1e-13, 1000).unwrap().value;
        assert!((quad - sf.big_f_eval(&x, 1.3)).abs() < 1e-11);
    }

    #[test]
    fn h_examples() {
        let zero_id =
            ModelSpec::new(3, TransformSpec::identity(), Potential::Constant { v0: 1.0 }, Nonlinearity::Zero).unwrap();
        assert_eq!(zero_id.h_eval(&[0.0; 3], 1.7), 0.0);
        assert_eq!(zero_id.big_h_eval(&[0.0; 3], -2.0), 0.0);
        let m = bn(3, 5.0);
        assert!((m.h_eval(&[0.0; 3], 2.0) - 16.0).abs() < 1e-13);
        assert!((m.big_h_eval(&[0.0; 3], 2.0) - 6.4).abs() < 1e-13);
        let sf =
            ModelSpec::new(3, TransformSpec::superfluid_film(), Potential::Constant { v0: 1.0 }, Nonlinearity::Zero)
                .unwrap();
        let t = sf.transform().inverse(1.0);
        let g = sf.transform().g(t);
        assert!((sf.h_eval(&[0.0; 3], 1.0) - (1.0 - t / g)).abs() < 1e-15);
        // Bisection oracle on the closed-form G, independent of the Newton inverse.
        let big_g = |t: f64| 0.5 * t * (1.0 + 2.0 * t * t).sqrt() + (2f64.sqrt() * t).asinh() / (2.0 * 2f64.sqrt());
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if big_g(mid) < 1.0 {
                lo = mid
            } else {
                hi = mid
            }
        }
        let t_ref = 0.5 * (lo + hi);
        let h_ref = 1.0 - t_ref / (1.0 + 2.0 * t_ref * t_ref).sqrt();
        assert!((t - t_ref).abs() < 1e-14);
        assert!((sf.h_eval(&[0.0; 3], 1.0) - h_ref).abs() < 1e-14);
        assert!((sf.h_eval(&[0.0; 3], 1.0) - 0.460_540_9).abs() < 1e-7);
        assert!((sf.big_h_eval(&[0.0; 3], 1.0) - 0.5 * (1.0 - t_ref * t_ref)).abs() < 1e-14);
    }

    #[test]
    fn validation() {
        let id = TransformSpec::identity;
        let c = Potential::Constant { v0: 1.0 };
        assert!(ModelSpec::new(2, id(), c, Nonlinearity::Zero).is_err());
        assert!(ModelSpec::new(3, id(), c, Nonlinearity::TransformedPower { mu: 1.0, q: 6.0 }).is_err());
        assert!(ModelSpec::new(3, id(), c, Nonlinearity::TransformedPower { mu: 0.0, q: 4.0 }).is_err());
        assert!(ModelSpec::new(4, id(), c, Nonlinearity::TransformedPower { mu: 1.0, q: 3.0 }).is_ok());
    }

    #[test]
    fn growth_reports() {
        let s = default_s_samples();
        let r = check_growth_conditions(&bn(3, 5.0), &s, &[]);
        assert!(r.pass, "{r}");
        let r = check_growth_conditions(&bn(3, 3.0), &s, &[]);
        assert!(!r.entry("(4)").unwrap().pass, "{r}");
        let zero =
            ModelSpec::new(3, TransformSpec::identity(), Potential::Constant { v0: 1.0 }, Nonlinearity::Zero).unwrap();
        let r = check_growth_conditions(&zero, &s, &[]);
        for name in ["(1)", "(2)", "(5)", "(6)"] {
            assert!(r.entries.iter().filter(|e| e.name.starts_with(name)).all(|e| e.pass), "{name}: {r}");
        }
        assert!(!r.entry("(4)").unwrap().pass);
    }

    #[test]
    fn growth_passes_for_all_transforms() {
        let s = default_s_samples();
        let xs = [vec![0.0, 0.0, 0.0], vec![0.25, 0.1, -0.3]];
        for tr in [TransformSpec::identity(), TransformSpec::superfluid_film(), TransformSpec::laser_channeling().unwrap()] {
            for (n, q) in [(3, 5.0), (4, 3.0), (5, 3.0)] {
                let x: Vec<Vec<f64>> = xs.iter().map(|p| { let mut p = p.clone(); p.resize(n, 0.0); p }).collect();
                for pot in [Potential::Constant { v0: 1.0 }, Potential::CosinePerturbed { v0: 1.0, amplitude: 0.5 }] {
                    let m = ModelSpec::new(n, tr.clone(), pot, Nonlinearity::TransformedPower { mu: 1.0, q }).unwrap();
                    let r = check_growth_conditions(&m, &s, &x);
                    assert!(r.pass, "{:?} {r}", tr.kind());
                }
            }
        }
    }

    #[test]
    fn h_integral_identity() {
        let sf = ModelSpec::new(
            3,
            TransformSpec::superfluid_film(),
            Potential::Constant { v0: 1.0 },
            Nonlinearity::TransformedPower { mu: 1.0, q: 5.0 },
        )
        .unwrap();
        let s = log_samples(-3.0, 3.0, 4);
        assert!(h_integral_mismatch(&sf, 1.0, &s).unwrap() < 1e-8);
    }
}
