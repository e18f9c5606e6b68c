use std::fmt;

use serde::{Deserialize, Serialize};

/// One sampled property check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyEntry {
    pub name: String,
    /// Human-readable description of the sampled domain.
    pub domain: String,
    /// Largest observed violation (0 when the property holds with slack).
    pub worst_violation: f64,
    /// Optional measured quantity (fitted constant, trend ratio, ...).
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub measured: Option<f64>,
    pub pass: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PropertyReport {
    pub title: String,
    pub entries: Vec<PropertyEntry>,
    pub pass: bool,
}

impl PropertyReport {
    pub fn new(title: impl Into<String>) -> Self {
        PropertyReport { title: title.into(), entries: Vec::new(), pass: true }
    }

    pub fn push(
        &mut self,
        name: impl Into<String>,
        domain: impl Into<String>,
        worst_violation: f64,
        pass: bool,
    ) {
        self.push_measured(name, domain, worst_violation, None, pass);
    }

    pub fn push_measured(
        &mut self,
        name: impl Into<String>,
        domain: impl Into<String>,
        worst_violation: f64,
        measured: Option<f64>,
        pass: bool,
    ) {
        self.entries.push(PropertyEntry {
            name: name.into(),
            domain: domain.into(),
            worst_violation,
            measured,
            pass,
        });
        self.pass = self.entries.iter().all(|e| e.pass);
    }

    pub fn entry(&self, prefix: &str) -> Option<&PropertyEntry> {
        self.entries.iter().find(|e| e.name.starts_with(prefix))
    }

    pub fn failures(&self) -> impl Iterator<Item = &PropertyEntry> {
        self.entries.iter().filter(|e| !e.pass)
    }

    /// Merge another report's entries, prefixing names with its title.
    pub fn extend(&mut self, other: PropertyReport) {
        for mut e in other.entries {
            e.name = format!("{}: {}", other.title, e.name);
            self.entries.push(e);
        }
        self.pass = self.entries.iter().all(|e| e.pass);
    }
}

impl fmt::Display for PropertyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} [{}]", self.title, if self.pass { "PASS" } else { "FAIL" })?;
        for e in &self.entries {
            write!(
                f,
                "  {:<4} {:<58} worst={:<11.3e}",
                if e.pass { "ok" } else { "FAIL" },
                e.name,
                e.worst_violation
            )?;
            if let Some(m) = e.measured {
                write!(f, " measured={m:.6e}")?;
            }
            writeln!(f, "  on {}", e.domain)?;
        }
        Ok(())
    }
}

/// Absolute slack scaled to the magnitude of the compared quantities.
///
/// f64 cannot resolve a fixed absolute tolerance once values reach ~1e4, so
/// sampled inequalities compare against `tol * max(1, |scale|)`.
pub(crate) fn scaled(tol: f64, scale: f64) -> f64 {
    tol * scale.abs().max(1.0)
}

/// Limit trend over a ladder ordered toward the limit: `|last| < 1e-3 |first|`,
/// and `|values|` non-increasing over the half nearest the limit.
///
/// Returns the pass flag and the ratio `|last| / |first|` (0 for an identically zero ladder).
pub(crate) fn trend_to_zero(values: &[f64]) -> (bool, f64) {
    let (Some(first), Some(last)) = (values.first(), values.last()) else {
        return (false, f64::NAN);
    };
    let (a, b) = (first.abs(), last.abs());
    if values.iter().all(|v| *v == 0.0) {
        return (true, 0.0);
    }
    if !values.iter().all(|v| v.is_finite()) || a == 0.0 {
        return (false, f64::INFINITY);
    }
    let monotone = values[values.len() / 2..]
        .windows(2)
        .all(|w| w[1].abs() <= w[0].abs() + scaled(1e-12, w[0]));
    (b < 1e-3 * a && monotone, b / a)
}

/// Divergence trend over a ladder ordered toward the limit: `last > 1e3 first > 0`,
/// and non-decreasing over the half nearest the limit.
pub(crate) fn trend_to_infinity(values: &[f64]) -> (bool, f64) {
    let (Some(&a), Some(&b)) = (values.first(), values.last()) else {
        return (false, f64::NAN);
    };
    if !values.iter().all(|v| v.is_finite()) || !(a > 0.0) {
        return (false, if a == 0.0 && b == 0.0 { 0.0 } else { b / a });
    }
    let monotone = values[values.len() / 2..]
        .windows(2)
        .all(|w| w[1] >= w[0] - scaled(1e-12, w[0]));
    (b > 1e3 * a && monotone, b / a)
}
