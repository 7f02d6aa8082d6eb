#![allow(clippy::excessive_precision)]
//! Globally adaptive Gauss–Kronrod (7/15) quadrature.
//!
//! The interval with the largest error estimate is bisected until the summed
//! estimate drops below `max(abs_tol, rel_tol * |I|)`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

// Gauss weights for the odd-indexed Kronrod nodes (XGK[1], XGK[3], XGK[5], XGK[7]).
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Tolerances and subdivision budget for [`integrate`].
#[derive(Debug, Clone, Copy)]
pub struct QuadConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadConfig {
    fn default() -> Self {
        Self {
            abs_tol: 1e-14,
            rel_tol: 1e-13,
            max_intervals: 4000,
        }
    }
}

impl QuadConfig {
    pub fn with_tol(abs_tol: f64, rel_tol: f64) -> Self {
        Self {
            abs_tol,
            rel_tol,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> Segment {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for i in 0..7 {
        let dx = half * XGK[i];
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[i] * pair;
        if i % 2 == 1 {
            gauss += WG[i / 2] * pair;
        }
    }
    let value = kronrod * half;
    let error = ((kronrod - gauss) * half).abs();
    Segment { a, b, value, error }
}

/// Integrates `f` over `[a, b]`; `b < a` yields the negated integral.
///
/// The integrand is never evaluated at the endpoints, so integrable endpoint
/// singularities are tolerated.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, cfg: QuadConfig) -> Result<Estimate> {
    if a == b {
        return Ok(Estimate {
            value: 0.0,
            error: 0.0,
        });
    }
    if b < a {
        let est = integrate(f, b, a, cfg)?;
        return Ok(Estimate {
            value: -est.value,
            error: est.error,
        });
    }

    let first = kronrod15(&mut f, a, b);
    let mut total = first.value;
    let mut total_err = first.error;
    let mut heap = BinaryHeap::new();
    heap.push(first);

    while heap.len() < cfg.max_intervals {
        let target = cfg.abs_tol.max(cfg.rel_tol * total.abs());
        if total_err <= target {
            break;
        }
        let worst = heap.pop().expect("heap never empties");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // interval exhausted at machine resolution
            heap.push(worst);
            break;
        }
        let left = kronrod15(&mut f, worst.a, mid);
        let right = kronrod15(&mut f, mid, worst.b);
        total += left.value + right.value - worst.value;
        total_err += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
    }

    // re-sum to shed the drift of incremental updates
    let (value, error) = heap
        .iter()
        .fold((0.0, 0.0), |(v, e), s| (v + s.value, e + s.error));
    let target = cfg.abs_tol.max(cfg.rel_tol * value.abs());
    if !value.is_finite() || error > target * 1e3 {
        return Err(Error::QuadratureFailure {
            error,
            tolerance: target,
        });
    }
    Ok(Estimate { value, error })
}

/// Convenience wrapper returning only the value.
pub fn integrate_value<F: FnMut(f64) -> f64>(f: F, a: f64, b: f64, cfg: QuadConfig) -> Result<f64> {
    integrate(f, a, b, cfg).map(|e| e.value)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomials_up_to_degree_22_are_exact_on_one_panel() {
        // K15 is exact for degree 22, G7 for degree 13
        let mut f = |x: f64| x.powi(22) + 3.0 * x.powi(7) - x;
        let seg = kronrod15(&mut f, -1.0, 1.0);
        assert!((seg.value - 2.0 / 23.0).abs() < 1e-15);
    }

    #[test]
    fn smooth_integrands() {
        let est = integrate(f64::sin, 0.0, std::f64::consts::PI, QuadConfig::default()).unwrap();
        assert!((est.value - 2.0).abs() < 1e-14);
        let est = integrate(|x: f64| (-x * x).exp(), -6.0, 6.0, QuadConfig::default()).unwrap();
        assert!((est.value - std::f64::consts::PI.sqrt()).abs() < 1e-13);
    }

    #[test]
    fn endpoint_singularities_are_tolerated() {
        // ∫₀¹ x^{-1/2} dx = 2, ∫₀¹ ln x dx = -1
        let v = integrate_value(|x: f64| 1.0 / x.sqrt(), 0.0, 1.0, QuadConfig::with_tol(1e-11, 1e-11)).unwrap();
        assert!((v - 2.0).abs() < 1e-9);
        let v = integrate_value(f64::ln, 0.0, 1.0, QuadConfig::default()).unwrap();
        assert!((v + 1.0).abs() < 1e-12);
    }

    #[test]
    fn reversed_bounds_negate() {
        let a = integrate_value(|x: f64| x * x, 0.0, 2.0, QuadConfig::default()).unwrap();
        let b = integrate_value(|x: f64| x * x, 2.0, 0.0, QuadConfig::default()).unwrap();
        assert_eq!(a, -b);
    }

    #[test]
    fn non_integrable_singularity_fails() {
        let r = integrate(|x: f64| 1.0 / x, 0.0, 1.0, QuadConfig { max_intervals: 200, ..Default::default() });
        assert!(matches!(r, Err(Error::QuadratureFailure { .. })));
    }
}
