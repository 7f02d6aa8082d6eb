//! The constrained phase space `T*S² ⊂ ℝ⁶`, its coordinate charts, the
//! momentum map `(J, H)` and the classification of momentum values.

use std::f64::consts::TAU;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Values below `h = j²/2 − OUTSIDE_TOL` lie outside the momentum image.
pub const OUTSIDE_TOL: f64 = 1e-12;
/// Width of the band classified as boundary or focus-focus.
pub const STRATUM_BAND: f64 = 1e-10;

/// Formats a float with 17 significant digits.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

/// Reduces an angle into `[0, 2π)`.
pub fn wrap_tau(a: f64) -> f64 {
    let r = a.rem_euclid(TAU);
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Reduces an angle into `(-π, π]`.
pub fn wrap_pi(a: f64) -> f64 {
    let r = wrap_tau(a);
    if r > std::f64::consts::PI {
        r - TAU
    } else {
        r
    }
}

/// A point `(x, y, z, u, v, w)` of `T*S²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub u: f64,
    pub v: f64,
    pub w: f64,
}

impl PhasePoint {
    /// Builds a point without enforcing the constraints.
    pub const fn new(x: f64, y: f64, z: f64, u: f64, v: f64, w: f64) -> Self {
        Self { x, y, z, u, v, w }
    }

    pub fn from_array(a: [f64; 6]) -> Self {
        Self::new(a[0], a[1], a[2], a[3], a[4], a[5])
    }

    pub fn to_array(self) -> [f64; 6] {
        [self.x, self.y, self.z, self.u, self.v, self.w]
    }

    /// The point `(1, 0, 0, 0, j, √(2(h − V(0)) − j²))` on the zero section of
    /// the angle coordinates.
    pub fn section_point(j: f64, h: f64, potential: &dyn Potential) -> Result<Self> {
        let w2 = 2.0 * (h - potential.value(0.0)) - j * j;
        if w2 < -OUTSIDE_TOL {
            return Err(Error::Domain(format!("({j}, {h}) is outside the momentum image")));
        }
        Ok(Self::new(1.0, 0.0, 0.0, 0.0, j, w2.max(0.0).sqrt()))
    }

    /// `(|r|² − 1, r·p)`.
    pub fn constraint_residuals(&self) -> (f64, f64) {
        (
            self.x * self.x + self.y * self.y + self.z * self.z - 1.0,
            self.x * self.u + self.y * self.v + self.z * self.w,
        )
    }

    pub fn is_constrained(&self, tol: f64) -> bool {
        let (a, b) = self.constraint_residuals();
        a.abs() <= tol && b.abs() <= tol
    }

    /// Euclidean distance in `ℝ⁶`.
    pub fn distance(&self, other: &Self) -> f64 {
        self.to_array()
            .iter()
            .zip(other.to_array())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    /// Rotation about the `z` axis by `s` (the flow of `J`).
    pub fn rotate(&self, s: f64) -> Self {
        let (sn, cs) = s.sin_cos();
        Self::new(
            cs * self.x - sn * self.y,
            sn * self.x + cs * self.y,
            self.z,
            cs * self.u - sn * self.v,
            sn * self.u + cs * self.v,
            self.w,
        )
    }

    pub fn csv_header() -> &'static str {
        "x,y,z,u,v,w"
    }

    pub fn to_csv_row(&self) -> String {
        self.to_array().map(fmt17).join(",")
    }

    pub fn from_csv_row(row: &str) -> Result<Self> {
        let vals: Vec<f64> = row
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Domain(format!("bad CSV row {row:?}: {e}")))?;
        let arr: [f64; 6] = vals
            .try_into()
            .map_err(|_| Error::Domain(format!("expected 6 fields in {row:?}")))?;
        Ok(Self::from_array(arr))
    }

    /// JSON object with 17 significant digits per component.
    pub fn to_json(&self) -> String {
        let names = ["x", "y", "z", "u", "v", "w"];
        let body: Vec<String> = names
            .iter()
            .zip(self.to_array())
            .map(|(n, v)| format!("\"{n}\":{}", fmt17(v)))
            .collect();
        format!("{{{}}}", body.join(","))
    }
}

/// Normalizes the position to the unit sphere and removes the radial
/// momentum component.
pub fn project(raw: [f64; 6]) -> Result<PhasePoint> {
    let [x, y, z, u, v, w] = raw;
    if raw.iter().any(|c| !c.is_finite()) {
        return Err(Error::DegenerateInput("non-finite component".into()));
    }
    let norm = (x * x + y * y + z * z).sqrt();
    if norm < 1e-8 {
        return Err(Error::DegenerateInput(format!("position norm {norm:e} below 1e-8")));
    }
    let (x, y, z) = (x / norm, y / norm, z / norm);
    let radial = x * u + y * v + z * w;
    Ok(PhasePoint::new(x, y, z, u - radial * x, v - radial * y, w - radial * z))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Chart {
    North,
    South,
    Equator,
}

impl Chart {
    pub fn name(self) -> &'static str {
        match self {
            Chart::North => "north",
            Chart::South => "south",
            Chart::Equator => "equator",
        }
    }

    /// `+1` on the northern hemisphere chart, `−1` on the southern one.
    fn hemisphere(self) -> f64 {
        match self {
            Chart::South => -1.0,
            _ => 1.0,
        }
    }
}

impl fmt::Display for Chart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Chart coordinates: `(ρ, η, θ, φ)` on North/South, `(z, w, θ, φ)` on Equator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChartPoint {
    pub chart: Chart,
    pub coords: [f64; 4],
}

impl ChartPoint {
    pub fn new(chart: Chart, coords: [f64; 4]) -> Self {
        Self { chart, coords }
    }

    /// `δ = φ − θ`.
    pub fn delta(&self) -> f64 {
        self.coords[3] - self.coords[2]
    }

    fn domain_err(&self, reason: impl Into<String>) -> Error {
        Error::ChartDomain {
            chart: self.chart.name(),
            reason: reason.into(),
        }
    }

    pub fn check_domain(&self) -> Result<()> {
        let [a, b, theta, phi] = self.coords;
        if !(a.is_finite() && b.is_finite() && theta.is_finite() && phi.is_finite()) {
            return Err(self.domain_err("non-finite coordinate"));
        }
        match self.chart {
            Chart::North | Chart::South => {
                if !(0.0..1.0).contains(&a) {
                    return Err(self.domain_err(format!("ρ = {a} outside [0, 1)")));
                }
                if b < 0.0 {
                    return Err(self.domain_err(format!("η = {b} negative")));
                }
            }
            Chart::Equator => {
                if a.abs() >= 1.0 {
                    return Err(self.domain_err(format!("z = {a} outside (-1, 1)")));
                }
                if self.delta().cos().abs() < 1e-12 {
                    return Err(self.domain_err("cos δ = 0"));
                }
            }
        }
        Ok(())
    }
}

fn azimuth(a: f64, b: f64) -> f64 {
    if a == 0.0 && b == 0.0 {
        0.0
    } else {
        wrap_tau(b.atan2(a))
    }
}

/// Expresses `p` in `chart`; `θ := 0` at `ρ = 0` and `φ := 0` at `η = 0`.
///
/// The equator chart accepts any `|z| < 1`; its inverse additionally needs
/// `cos δ ≠ 0`, which fails on `z w = 0`.
pub fn to_chart(p: &PhasePoint, chart: Chart) -> Result<ChartPoint> {
    let theta = azimuth(p.x, p.y);
    let phi = azimuth(p.u, p.v);
    let coords = match chart {
        Chart::North | Chart::South => {
            if p.z * chart.hemisphere() <= 0.0 {
                return Err(Error::ChartDomain {
                    chart: chart.name(),
                    reason: format!("z = {} on the wrong hemisphere", p.z),
                });
            }
            let rho = p.x.hypot(p.y);
            if rho >= 1.0 {
                return Err(Error::ChartDomain {
                    chart: chart.name(),
                    reason: format!("ρ = {rho} not below 1"),
                });
            }
            [rho, p.u.hypot(p.v), theta, phi]
        }
        Chart::Equator => {
            if p.z.abs() >= 1.0 {
                return Err(Error::ChartDomain {
                    chart: chart.name(),
                    reason: format!("z = {} outside (-1, 1)", p.z),
                });
            }
            [p.z, p.w, theta, phi]
        }
    };
    Ok(ChartPoint::new(chart, coords))
}

/// The natural chart for `p`: North for `z > 0`, South for `z < 0`.
pub fn hemisphere_chart(p: &PhasePoint) -> Result<ChartPoint> {
    if p.z > 0.0 {
        to_chart(p, Chart::North)
    } else if p.z < 0.0 {
        to_chart(p, Chart::South)
    } else {
        Err(Error::ChartDomain {
            chart: "north/south",
            reason: "point on the equator z = 0".into(),
        })
    }
}

pub fn from_chart(c: &ChartPoint) -> Result<PhasePoint> {
    c.check_domain()?;
    let [a, b, theta, phi] = c.coords;
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    match c.chart {
        Chart::North | Chart::South => {
            let (rho, eta) = (a, b);
            let sigma = c.chart.hemisphere();
            let zabs = ((1.0 - rho) * (1.0 + rho)).sqrt();
            let w = -sigma * rho * eta * c.delta().cos() / zabs;
            Ok(PhasePoint::new(rho * ct, rho * st, sigma * zabs, eta * cp, eta * sp, w))
        }
        Chart::Equator => {
            let (z, w) = (a, b);
            let rho = ((1.0 - z) * (1.0 + z)).sqrt();
            let lam = -z * w / (rho * c.delta().cos());
            Ok(PhasePoint::new(rho * ct, rho * st, z, lam * cp, lam * sp, w))
        }
    }
}

/// An admissible potential `V(z)` on `[-1, 1]` together with `V′`.
pub trait Potential: Send + Sync {
    fn value(&self, z: f64) -> f64;
    fn derivative(&self, z: f64) -> f64;

    fn name(&self) -> String {
        "custom".into()
    }

    /// `true` only for `V(z) = z²`, which unlocks the closed forms.
    fn is_quadratic(&self) -> bool {
        false
    }

    /// `Ṽ(ρ) = V(±√(1 − ρ²))` on the North (`+`) or South (`−`) chart.
    fn profile(&self, chart: Chart, rho: f64) -> f64 {
        self.value(chart.hemisphere() * ((1.0 - rho) * (1.0 + rho)).sqrt())
    }

    /// `dṼ/dρ`.
    fn profile_derivative(&self, chart: Chart, rho: f64) -> f64 {
        let zabs = ((1.0 - rho) * (1.0 + rho)).sqrt();
        let sigma = chart.hemisphere();
        -sigma * rho / zabs * self.derivative(sigma * zabs)
    }
}

/// `V(z) = z²`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Quadratic;

impl Potential for Quadratic {
    fn value(&self, z: f64) -> f64 {
        z * z
    }
    fn derivative(&self, z: f64) -> f64 {
        2.0 * z
    }
    fn name(&self) -> String {
        "z^2".into()
    }
    fn is_quadratic(&self) -> bool {
        true
    }
    fn profile(&self, _chart: Chart, rho: f64) -> f64 {
        (1.0 - rho) * (1.0 + rho)
    }
    fn profile_derivative(&self, _chart: Chart, rho: f64) -> f64 {
        -2.0 * rho
    }
}

/// `V(z) = Σ cᵢ zⁱ`.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    pub coefficients: Vec<f64>,
}

impl Polynomial {
    pub fn new(coefficients: Vec<f64>) -> Self {
        Self { coefficients }
    }

    /// `z² (1 + 0.3 z (1 − z²))`: asymmetric, unimodal, `V(±1) = 1`.
    pub fn skewed_quartic() -> Self {
        Self::new(vec![0.0, 0.0, 1.0, 0.3, 0.0, -0.3])
    }
}

impl Potential for Polynomial {
    fn value(&self, z: f64) -> f64 {
        self.coefficients.iter().rev().fold(0.0, |acc, c| acc * z + c)
    }
    fn derivative(&self, z: f64) -> f64 {
        self.coefficients
            .iter()
            .enumerate()
            .skip(1)
            .rev()
            .fold(0.0, |acc, (i, c)| acc * z + i as f64 * c)
    }
    fn name(&self) -> String {
        let terms: Vec<String> = self
            .coefficients
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != 0.0)
            .map(|(i, c)| format!("{c}*z^{i}"))
            .collect();
        if terms.is_empty() {
            "0".into()
        } else {
            terms.join(" + ")
        }
    }
}

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A potential given by a pair of closures for `V` and `V′`.
#[derive(Clone)]
pub struct FnPotential {
    label: String,
    value: ScalarFn,
    derivative: ScalarFn,
}

impl FnPotential {
    pub fn new(
        label: impl Into<String>,
        value: impl Fn(f64) -> f64 + Send + Sync + 'static,
        derivative: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            label: label.into(),
            value: Arc::new(value),
            derivative: Arc::new(derivative),
        }
    }
}

impl fmt::Debug for FnPotential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnPotential").field("label", &self.label).finish()
    }
}

impl Potential for FnPotential {
    fn value(&self, z: f64) -> f64 {
        (self.value)(z)
    }
    fn derivative(&self, z: f64) -> f64 {
        (self.derivative)(z)
    }
    fn name(&self) -> String {
        self.label.clone()
    }
}

/// Checks `V(±1) = 1`, `V(0) = 0`, strict unimodality on a `1e-3` grid, and
/// that `V′` agrees with a central difference of `V`.
pub fn validate_potential(potential: &dyn Potential) -> Result<()> {
    let bad = |msg: String| Err(Error::InvalidPotential(msg));
    for (z, want) in [(-1.0, 1.0), (0.0, 0.0), (1.0, 1.0)] {
        let got = potential.value(z);
        if !got.is_finite() || (got - want).abs() > 1e-9 {
            return bad(format!("V({z}) = {got}, expected {want}"));
        }
    }
    let n = 2000;
    let mut prev = potential.value(-1.0);
    for i in 1..=n {
        let z = -1.0 + 2.0 * i as f64 / n as f64;
        let cur = potential.value(z);
        let increasing = z > 0.0;
        if !cur.is_finite() || (increasing && cur <= prev) || (!increasing && cur >= prev) {
            return bad(format!("not strictly unimodal near z = {z:.3}"));
        }
        prev = cur;
    }
    let step = 1e-5;
    for i in 0..=40 {
        let z = (-1.0 + i as f64 / 20.0).clamp(-1.0 + step, 1.0 - step);
        let fd = (potential.value(z + step) - potential.value(z - step)) / (2.0 * step);
        let d = potential.derivative(z);
        if !d.is_finite() || (fd - d).abs() > 1e-5 * (1.0 + d.abs()) {
            return bad(format!("V′({z:.3}) = {d} disagrees with the difference quotient {fd}"));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Stratum {
    Regular,
    EllipticBoundary,
    FocusFocus,
    Outside,
}

impl fmt::Display for Stratum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stratum::Regular => "regular",
            Stratum::EllipticBoundary => "elliptic-boundary",
            Stratum::FocusFocus => "focus-focus",
            Stratum::Outside => "outside",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentumValue {
    pub j: f64,
    pub h: f64,
    pub stratum: Stratum,
}

impl MomentumValue {
    pub fn new(j: f64, h: f64) -> Self {
        Self {
            j,
            h,
            stratum: classify(j, h),
        }
    }

    /// Fails unless the value is regular.
    pub fn require_regular(&self, reason: &'static str) -> Result<()> {
        if self.stratum == Stratum::Regular {
            Ok(())
        } else {
            Err(Error::Stratum {
                j: self.j,
                h: self.h,
                stratum: self.stratum,
                reason,
            })
        }
    }
}

pub fn classify(j: f64, h: f64) -> Stratum {
    let excess = h - 0.5 * j * j;
    if excess < -OUTSIDE_TOL {
        Stratum::Outside
    } else if excess <= STRATUM_BAND {
        Stratum::EllipticBoundary
    } else if j.hypot(h - 1.0) <= STRATUM_BAND {
        Stratum::FocusFocus
    } else {
        Stratum::Regular
    }
}

/// `J = xv − yu`, `H = |p|²/2 + V(z)`.
pub fn momentum_map(p: &PhasePoint, potential: &dyn Potential) -> MomentumValue {
    let j = p.x * p.v - p.y * p.u;
    let h = 0.5 * (p.u * p.u + p.v * p.v + p.w * p.w) + potential.value(p.z);
    MomentumValue::new(j, h)
}

/// `(J, H)` evaluated directly from chart coordinates.
pub fn momentum_in_chart(c: &ChartPoint, potential: &dyn Potential) -> Result<(f64, f64)> {
    c.check_domain()?;
    let [a, b, _, _] = c.coords;
    let (sd, cd) = c.delta().sin_cos();
    Ok(match c.chart {
        Chart::North | Chart::South => {
            let (rho, eta) = (a, b);
            let one_m = (1.0 - rho) * (1.0 + rho);
            let j = rho * eta * sd;
            let h = 0.5 * eta * eta * (1.0 - rho * rho * sd * sd) / one_m + potential.profile(c.chart, rho);
            (j, h)
        }
        Chart::Equator => {
            let (z, w) = (a, b);
            let j = sd / cd * z * w;
            let h = 0.5 * w * w * (1.0 + z * z / ((1.0 - z) * (1.0 + z) * cd * cd)) + potential.value(z);
            (j, h)
        }
    })
}

/// Coefficient matrix `Ω` of the chart's symplectic form, so that
/// `ω(a, b) = aᵀ Ω b`.
pub fn symplectic_matrix(c: &ChartPoint) -> Result<[[f64; 4]; 4]> {
    c.check_domain()?;
    let [a, b, _, _] = c.coords;
    let (sd, cd) = c.delta().sin_cos();
    // upper-triangular coefficients (01, 02, 03, 12, 13, 23)
    let coeffs = match c.chart {
        Chart::North | Chart::South => {
            let (rho, eta) = (a, b);
            let one_m = (1.0 - rho) * (1.0 + rho);
            [
                cd / one_m,
                rho * rho * eta * sd / one_m,
                -eta * sd / one_m,
                -rho * sd,
                0.0,
                rho * eta * cd,
            ]
        }
        Chart::Equator => {
            let (z, w) = (a, b);
            let td = sd / cd;
            [
                1.0 / ((1.0 - z) * (1.0 + z)),
                w * td,
                0.0,
                z * td,
                0.0,
                -z * w / (cd * cd),
            ]
        }
    };
    let mut m = [[0.0; 4]; 4];
    let pairs = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];
    for ((i, j), v) in pairs.into_iter().zip(coeffs) {
        m[i][j] = v;
        m[j][i] = -v;
    }
    Ok(m)
}

/// Evaluates the chart's symplectic form on two tangent vectors.
pub fn symplectic_eval(c: &ChartPoint, t1: [f64; 4], t2: [f64; 4]) -> Result<f64> {
    let m = symplectic_matrix(c)?;
    let mut acc = 0.0;
    for i in 0..4 {
        for j in (i + 1)..4 {
            acc += m[i][j] * (t1[i] * t2[j] - t1[j] * t2[i]);
        }
    }
    Ok(acc)
}

/// The ambient form `dx∧du + dy∧dv + dz∧dw` on tangent vectors of `ℝ⁶`.
pub fn ambient_form(a: [f64; 6], b: [f64; 6]) -> f64 {
    (0..3).map(|i| a[i] * b[i + 3] - a[i + 3] * b[i]).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_2;

    fn close(a: &PhasePoint, b: &PhasePoint, tol: f64) -> bool {
        a.distance(b) <= tol
    }

    #[test]
    fn projection_examples() {
        let p = project([1.0, 0.0, 0.0, 0.0, 1.0, 0.0]).unwrap();
        assert_eq!(p, PhasePoint::new(1.0, 0.0, 0.0, 0.0, 1.0, 0.0));
        let p = project([2.0, 0.0, 0.0, 0.0, 1.0, 0.0]).unwrap();
        assert_eq!(p, PhasePoint::new(1.0, 0.0, 0.0, 0.0, 1.0, 0.0));
        let p = project([1.0, 0.0, 0.0, 0.3, 1.0, 0.0]).unwrap();
        assert_eq!(p, PhasePoint::new(1.0, 0.0, 0.0, 0.0, 1.0, 0.0));
        assert!(matches!(project([1e-9, 0.0, 0.0, 1.0, 0.0, 0.0]), Err(Error::DegenerateInput(_))));
    }

    #[test]
    fn chart_examples() {
        let pole = PhasePoint::new(0.0, 0.0, 1.0, 1.0, 0.0, 0.0);
        let c = to_chart(&pole, Chart::North).unwrap();
        assert_eq!(c.coords, [0.0, 1.0, 0.0, 0.0]);

        let eq = PhasePoint::new(1.0, 0.0, 0.0, 0.0, 1.0, 0.0);
        let c = to_chart(&eq, Chart::Equator).unwrap();
        assert_eq!(c.coords, [0.0, 0.0, 0.0, FRAC_PI_2]);
        // cos δ = 0 here, so the equator chart cannot be inverted
        assert!(matches!(from_chart(&c), Err(Error::ChartDomain { .. })));
        assert!(to_chart(&eq, Chart::North).is_err());

        let c = ChartPoint::new(Chart::North, [0.5, 1.0, 0.0, FRAC_PI_2]);
        assert!(from_chart(&c).unwrap().w.abs() < 1e-16);
    }

    #[test]
    fn south_mirror_negates_z_and_w() {
        let c = ChartPoint::new(Chart::North, [0.6, 0.8, 0.3, 1.1]);
        let n = from_chart(&c).unwrap();
        let s = from_chart(&ChartPoint::new(Chart::South, c.coords)).unwrap();
        assert_eq!((n.x, n.y, n.u, n.v), (s.x, s.y, s.u, s.v));
        assert_eq!(n.z, -s.z);
        assert_eq!(n.w, -s.w);
    }

    #[test]
    fn momentum_examples() {
        // h = j²/2 exactly: a horizontal great-circle orbit on the boundary
        let m = momentum_map(&PhasePoint::new(1.0, 0.0, 0.0, 0.0, 2.0, 0.0), &Quadratic);
        assert_eq!((m.j, m.h, m.stratum), (2.0, 2.0, Stratum::EllipticBoundary));
        let m = momentum_map(&PhasePoint::new(1.0, 0.0, 0.0, 0.0, 1.0, 1.0), &Quadratic);
        assert_eq!((m.j, m.h, m.stratum), (1.0, 1.0, Stratum::Regular));
        let m = momentum_map(&PhasePoint::new(0.0, 0.0, 1.0, 0.0, 0.0, 0.0), &Quadratic);
        assert_eq!((m.j, m.h, m.stratum), (0.0, 1.0, Stratum::FocusFocus));
        for j in [-1.3, 0.0, 0.7] {
            let m = momentum_map(&PhasePoint::new(1.0, 0.0, 0.0, 0.0, j, 0.0), &Quadratic);
            assert_eq!(m.stratum, Stratum::EllipticBoundary);
        }
    }

    #[test]
    fn classify_examples() {
        assert_eq!(classify(0.0, -0.1), Stratum::Outside);
        assert_eq!(classify(1.0, 0.5), Stratum::EllipticBoundary);
        assert_eq!(classify(0.3, 1.0), Stratum::Regular);
        assert_eq!(classify(0.0, 1.0), Stratum::FocusFocus);
        assert_eq!(classify(0.0, 1.0 + 1e-11), Stratum::FocusFocus);
        assert_eq!(classify(0.0, 1.0 + 1e-9), Stratum::Regular);
    }

    #[test]
    fn potentials_validate() {
        validate_potential(&Quadratic).unwrap();
        validate_potential(&Polynomial::skewed_quartic()).unwrap();
        validate_potential(&Polynomial::new(vec![0.0, 0.0, 0.0, 0.0, 1.0])).unwrap();
        assert!(validate_potential(&Polynomial::new(vec![0.0, 1.0])).is_err());
        let wrong = FnPotential::new("z^2", |z| z * z, |z| z);
        assert!(validate_potential(&wrong).is_err());
    }

    #[test]
    fn profile_derivative_matches_difference() {
        let v = Polynomial::skewed_quartic();
        for chart in [Chart::North, Chart::South] {
            for &rho in &[0.1, 0.5, 0.9] {
                let e = 1e-6;
                let fd = (v.profile(chart, rho + e) - v.profile(chart, rho - e)) / (2.0 * e);
                assert!((fd - v.profile_derivative(chart, rho)).abs() < 1e-8);
                assert!((Quadratic.profile(chart, rho) - (1.0 - rho * rho)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn serialization_formats() {
        let p = PhasePoint::new(0.1, -0.2, 0.3, 1.0 / 3.0, 0.0, -1e-20);
        let row = p.to_csv_row();
        assert_eq!(row.split(',').next().unwrap(), "1.0000000000000001e-1");
        assert_eq!(PhasePoint::from_csv_row(&row).unwrap(), p);
        let back: PhasePoint = serde_json::from_str(&p.to_json()).unwrap();
        assert_eq!(back, p);
    }

    fn constrained() -> impl Strategy<Value = PhasePoint> {
        (
            -1.0..1.0f64,
            0.0..TAU,
            -2.0..2.0f64,
            -2.0..2.0f64,
            -2.0..2.0f64,
        )
            .prop_map(|(z, th, u, v, w)| {
                let r = (1.0 - z * z).sqrt();
                project([r * th.cos(), r * th.sin(), z, u, v, w]).unwrap()
            })
    }

    fn ambient_jacobian(c: &ChartPoint) -> [[f64; 4]; 6] {
        let e = 1e-6;
        let mut jac = [[0.0; 4]; 6];
        for k in 0..4 {
            let mut hi = *c;
            let mut lo = *c;
            hi.coords[k] += e;
            lo.coords[k] -= e;
            let a = from_chart(&hi).unwrap().to_array();
            let b = from_chart(&lo).unwrap().to_array();
            for (row, (x, y)) in jac.iter_mut().zip(a.iter().zip(&b)) {
                row[k] = (x - y) / (2.0 * e);
            }
        }
        jac
    }

    proptest! {
        #[test]
        fn project_is_idempotent(raw in prop::array::uniform6(-3.0..3.0f64)) {
            prop_assume!((raw[0] * raw[0] + raw[1] * raw[1] + raw[2] * raw[2]).sqrt() > 1e-3);
            let p = project(raw).unwrap();
            prop_assert!(p.is_constrained(1e-12));
            let q = project(p.to_array()).unwrap();
            prop_assert!(close(&p, &q, 1e-12));
        }

        #[test]
        fn hemisphere_round_trip(p in constrained()) {
            prop_assume!(p.z.abs() > 1e-6 && p.x.hypot(p.y) > 1e-6);
            let chart = if p.z > 0.0 { Chart::North } else { Chart::South };
            let c = to_chart(&p, chart).unwrap();
            let q = from_chart(&c).unwrap();
            prop_assert!(close(&p, &q, 1e-10 * (1.0 + p.w.abs() / p.z.abs())));
            let c2 = to_chart(&q, chart).unwrap();
            for i in 0..2 {
                prop_assert!((c.coords[i] - c2.coords[i]).abs() < 1e-10);
            }
        }

        #[test]
        fn equator_round_trip_and_overlap(p in constrained()) {
            prop_assume!(p.z.abs() > 1e-3 && p.z.abs() < 0.999 && p.w.abs() > 1e-3);
            let c = to_chart(&p, Chart::Equator).unwrap();
            let q = from_chart(&c).unwrap();
            prop_assert!(close(&p, &q, 1e-10));
            let chart = if p.z > 0.0 { Chart::North } else { Chart::South };
            let r = from_chart(&to_chart(&p, chart).unwrap()).unwrap();
            prop_assert!(close(&q, &r, 1e-10));
        }

        #[test]
        fn chart_momentum_matches_cartesian(p in constrained()) {
            // the chart formula for H loses digits like 1/z² near the equator
            prop_assume!(p.z.abs() > 0.1);
            let chart = if p.z > 0.0 { Chart::North } else { Chart::South };
            let v = Polynomial::skewed_quartic();
            let c = to_chart(&p, chart).unwrap();
            let (j, h) = momentum_in_chart(&c, &v).unwrap();
            let m = momentum_map(&p, &v);
            prop_assert!((j - m.j).abs() < 1e-12 * (1.0 + m.j.abs()));
            prop_assert!((h - m.h).abs() < 1e-12 * (1.0 + m.h.abs()));
        }

        #[test]
        fn symplectic_forms_are_pullbacks(
            p in constrained(),
            t1 in prop::array::uniform4(-1.0..1.0f64),
            t2 in prop::array::uniform4(-1.0..1.0f64),
        ) {
            prop_assume!(p.z.abs() > 0.05 && p.z.abs() < 0.95 && p.w.abs() > 0.05);
            prop_assume!(p.u.hypot(p.v) > 0.05);
            let charts = [if p.z > 0.0 { Chart::North } else { Chart::South }, Chart::Equator];
            for chart in charts {
                let c = to_chart(&p, chart).unwrap();
                prop_assume!(c.delta().cos().abs() > 0.05);
                let jac = ambient_jacobian(&c);
                let push = |t: [f64; 4]| {
                    let mut out = [0.0; 6];
                    for i in 0..6 {
                        out[i] = (0..4).map(|k| jac[i][k] * t[k]).sum();
                    }
                    out
                };
                let chart_val = symplectic_eval(&c, t1, t2).unwrap();
                let ambient = ambient_form(push(t1), push(t2));
                prop_assert!((chart_val - ambient).abs() < 1e-7 * (1.0 + ambient.abs()),
                    "{chart}: {chart_val} vs {ambient}");
                prop_assert_eq!(symplectic_eval(&c, t1, t1).unwrap(), 0.0);
                prop_assert_eq!(chart_val, -symplectic_eval(&c, t2, t1).unwrap());
            }
        }
    }
}
