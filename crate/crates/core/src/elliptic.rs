//! Legendre elliptic integrals of the first and third kinds and the Jacobi
//! amplitude, built on Carlson's symmetric forms.
//!
//! Every function takes the **modulus** `k`, which enters the integrands as
//! `1 - k² sin² t`. No parameter-`m` interface is exposed.
//!
//! ```text
//! F(γ, k)    = ∫₀^γ dt / √(1 − k² sin² t)
//! K(k)       = F(π/2, k)
//! Π(γ, n, k) = ∫₀^γ dt / ((1 − n sin² t) √(1 − k² sin² t))
//! Π(n, k)    = Π(π/2, n, k)
//! am(F(γ, k), k) = γ,   sn = sin ∘ am
//! ```
//!
//! Amplitudes outside `[-π/2, π/2]` are handled through the quasi-periodicity
//! `F(γ + π) = F(γ) + 2K` and `Π(γ + π) = Π(γ) + 2Π(n)`.

use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{Error, Result};

/// Complete integrals and `am` refuse moduli closer than this to 1.
pub const MODULUS_GUARD: f64 = 1e-12;

const ERRTOL_RF: f64 = 8e-4;
const ERRTOL_RC: f64 = 8e-4;
const ERRTOL_RJ: f64 = 5e-4;

/// Carlson's `R_F(x, y, z)`; at most one argument may vanish.
pub fn carlson_rf(x: f64, y: f64, z: f64) -> f64 {
    debug_assert!(x >= 0.0 && y >= 0.0 && z >= 0.0);
    let (mut x, mut y, mut z) = (x, y, z);
    let (mut ave, mut dx, mut dy, mut dz);
    loop {
        let (sx, sy, sz) = (x.sqrt(), y.sqrt(), z.sqrt());
        let lambda = sx * (sy + sz) + sy * sz;
        x = 0.25 * (x + lambda);
        y = 0.25 * (y + lambda);
        z = 0.25 * (z + lambda);
        ave = (x + y + z) / 3.0;
        dx = (ave - x) / ave;
        dy = (ave - y) / ave;
        dz = (ave - z) / ave;
        if dx.abs().max(dy.abs()).max(dz.abs()) <= ERRTOL_RF {
            break;
        }
    }
    let e2 = dx * dy - dz * dz;
    let e3 = dx * dy * dz;
    (1.0 + (e2 / 24.0 - 0.1 - 3.0 / 44.0 * e3) * e2 + e3 / 14.0) / ave.sqrt()
}

/// Carlson's degenerate `R_C(x, y)` for `y > 0`.
pub fn carlson_rc(x: f64, y: f64) -> f64 {
    debug_assert!(x >= 0.0 && y > 0.0);
    let (mut x, mut y) = (x, y);
    let (mut ave, mut s);
    loop {
        let lambda = 2.0 * x.sqrt() * y.sqrt() + y;
        x = 0.25 * (x + lambda);
        y = 0.25 * (y + lambda);
        ave = (x + y + y) / 3.0;
        s = (y - ave) / ave;
        if s.abs() <= ERRTOL_RC {
            break;
        }
    }
    (1.0 + s * s * (0.3 + s * (1.0 / 7.0 + s * (0.375 + s * 9.0 / 22.0)))) / ave.sqrt()
}

/// Carlson's `R_J(x, y, z, p)` for `p > 0`; at most one of `x, y, z` may vanish.
pub fn carlson_rj(x: f64, y: f64, z: f64, p: f64) -> f64 {
    debug_assert!(x >= 0.0 && y >= 0.0 && z >= 0.0 && p > 0.0);
    const C1: f64 = 3.0 / 14.0;
    const C2: f64 = 1.0 / 3.0;
    const C3: f64 = 3.0 / 22.0;
    const C4: f64 = 3.0 / 26.0;
    const C5: f64 = 0.75 * C3;
    const C6: f64 = 1.5 * C4;
    const C7: f64 = 0.5 * C2;
    const C8: f64 = C3 + C3;

    let (mut x, mut y, mut z, mut p) = (x, y, z, p);
    let mut sum = 0.0;
    let mut fac = 1.0;
    let (mut ave, mut dx, mut dy, mut dz, mut dp);
    loop {
        let (sx, sy, sz) = (x.sqrt(), y.sqrt(), z.sqrt());
        let lambda = sx * (sy + sz) + sy * sz;
        let alpha = (p * (sx + sy + sz) + sx * sy * sz).powi(2);
        let beta = p * (p + lambda).powi(2);
        sum += fac * carlson_rc(alpha, beta);
        fac *= 0.25;
        x = 0.25 * (x + lambda);
        y = 0.25 * (y + lambda);
        z = 0.25 * (z + lambda);
        p = 0.25 * (p + lambda);
        ave = 0.2 * (x + y + z + p + p);
        dx = (ave - x) / ave;
        dy = (ave - y) / ave;
        dz = (ave - z) / ave;
        dp = (ave - p) / ave;
        if dx.abs().max(dy.abs()).max(dz.abs()).max(dp.abs()) <= ERRTOL_RJ {
            break;
        }
    }
    let ea = dx * (dy + dz) + dy * dz;
    let eb = dx * dy * dz;
    let ec = dp * dp;
    let ed = ea - 3.0 * ec;
    let ee = eb + 2.0 * dp * (ea - ec);
    3.0 * sum
        + fac
            * (1.0 + ed * (-C1 + C5 * ed - C6 * ee) + eb * (C7 + dp * (-C8 + dp * C4))
                + dp * ea * (C2 - dp * C3)
                - C2 * dp * ec)
            / (ave * ave.sqrt())
}

fn complementary(k: f64) -> f64 {
    (1.0 - k) * (1.0 + k)
}

fn check_complete_modulus(k: f64) -> Result<()> {
    if !k.is_finite() || k.abs() > 1.0 - MODULUS_GUARD {
        return Err(Error::Domain(format!(
            "modulus {k} outside [0, 1 - {MODULUS_GUARD:e}]; the complete integral diverges"
        )));
    }
    Ok(())
}

/// Splits `gamma` into `m·π + r` with `r ∈ [-π/2, π/2]`.
fn reduce_amplitude(gamma: f64) -> (f64, f64) {
    let m = (gamma / PI).round();
    (m, gamma - m * PI)
}

/// Complete integral of the first kind `K(k)`.
pub fn ellint_k(k: f64) -> Result<f64> {
    check_complete_modulus(k)?;
    Ok(carlson_rf(0.0, complementary(k), 1.0))
}

/// Incomplete integral of the first kind `F(γ, k)`.
pub fn ellint_f(gamma: f64, k: f64) -> Result<f64> {
    if !gamma.is_finite() || !k.is_finite() {
        return Err(Error::Domain(format!("non-finite argument F({gamma}, {k})")));
    }
    if k == 0.0 {
        return Ok(gamma);
    }
    let (m, r) = reduce_amplitude(gamma);
    let (s, c) = r.sin_cos();
    let delta2 = c * c + complementary(k) * s * s;
    if delta2 <= 0.0 || (k.abs() >= 1.0 && r.abs() >= FRAC_PI_2 - 1e-15) {
        return Err(Error::Domain(format!(
            "integrand pole: k² sin²γ ≥ 1 on [0, {gamma}] for k = {k}"
        )));
    }
    let base = s * carlson_rf(c * c, delta2, 1.0);
    if m == 0.0 {
        Ok(base)
    } else {
        Ok(base + 2.0 * m * ellint_k(k)?)
    }
}

/// Complete integral of the third kind `Π(n, k)` for `n < 1`.
pub fn ellint_pi_complete(n: f64, k: f64) -> Result<f64> {
    ellint_pi_complete_nc(n, 1.0 - n, k)
}

/// `Π(n, k)` with the complement `nc = 1 − n` supplied separately, for
/// characteristics so close to 1 that `1 − n` cannot be formed accurately.
pub fn ellint_pi_complete_nc(n: f64, nc: f64, k: f64) -> Result<f64> {
    check_complete_modulus(k)?;
    if !n.is_finite() || !nc.is_finite() || nc <= 0.0 {
        return Err(Error::Domain(format!(
            "characteristic {n} ≥ 1: the complete third-kind integral has a pole"
        )));
    }
    let kc2 = complementary(k);
    Ok(carlson_rf(0.0, kc2, 1.0) + n / 3.0 * carlson_rj(0.0, kc2, 1.0, nc))
}

/// Incomplete integral of the third kind `Π(γ, n, k)`.
pub fn ellint_pi(gamma: f64, n: f64, k: f64) -> Result<f64> {
    ellint_pi_nc(gamma, n, 1.0 - n, k)
}

/// `Π(γ, n, k)` with the complement `nc = 1 − n` supplied separately.
pub fn ellint_pi_nc(gamma: f64, n: f64, nc: f64, k: f64) -> Result<f64> {
    if !gamma.is_finite() || !n.is_finite() || !nc.is_finite() || !k.is_finite() {
        return Err(Error::Domain(format!("non-finite argument Π({gamma}, {n}, {k})")));
    }
    if n == 0.0 {
        return ellint_f(gamma, k);
    }
    let (m, r) = reduce_amplitude(gamma);
    let (s, c) = r.sin_cos();
    let s2 = s * s;
    let delta2 = c * c + complementary(k) * s2;
    if delta2 <= 0.0 || (k.abs() >= 1.0 && r.abs() >= FRAC_PI_2 - 1e-15) {
        return Err(Error::Domain(format!(
            "integrand pole: k² sin²γ ≥ 1 on [0, {gamma}] for k = {k}"
        )));
    }
    // 1 − n sin²γ = cos²γ + (1 − n) sin²γ
    let p = if nc >= 0.0 { c * c + nc * s2 } else { 1.0 - n * s2 };
    if p <= 0.0 || (m != 0.0 && nc <= 0.0) {
        return Err(Error::Domain(format!(
            "characteristic pole: n sin²t = 1 on [0, {gamma}] for n = {n}"
        )));
    }
    let base = s * carlson_rf(c * c, delta2, 1.0) + n / 3.0 * s * s2 * carlson_rj(c * c, delta2, 1.0, p);
    if m == 0.0 {
        Ok(base)
    } else {
        Ok(base + 2.0 * m * ellint_pi_complete_nc(n, nc, k)?)
    }
}

/// Jacobi amplitude: the `γ` with `F(γ, k) = f`.
///
/// Newton iteration on `F` inside a bisection bracket, seeded by the
/// `k → 0` (linear) or `k → 1` (Gudermannian) asymptotics.
pub fn jacobi_am(f: f64, k: f64) -> Result<f64> {
    check_complete_modulus(k)?;
    if !f.is_finite() {
        return Err(Error::Domain(format!("non-finite argument am({f}, {k})")));
    }
    if k == 0.0 {
        return Ok(f);
    }
    let quarter = ellint_k(k)?;
    let m = (f / (2.0 * quarter)).round();
    let r = f - 2.0 * m * quarter;
    let target = r.abs().min(quarter);

    let (mut lo, mut hi) = (0.0_f64, FRAC_PI_2);
    let mut gamma = if k.abs() < 0.9 {
        target * FRAC_PI_2 / quarter
    } else {
        target.sinh().atan()
    }
    .clamp(lo, hi);

    let kc2 = complementary(k);
    for _ in 0..100 {
        let (s, c) = gamma.sin_cos();
        let residual = s * carlson_rf(c * c, c * c + kc2 * s * s, 1.0) - target;
        if residual == 0.0 {
            break;
        }
        if residual > 0.0 {
            hi = gamma;
        } else {
            lo = gamma;
        }
        let step = residual * (c * c + kc2 * s * s).sqrt();
        let mut next = gamma - step;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        let moved = (next - gamma).abs();
        gamma = next;
        if moved <= 2.0 * f64::EPSILON * gamma.max(1e-300) || hi - lo <= 2.0 * f64::EPSILON {
            break;
        }
    }
    Ok(r.signum() * gamma + m * PI)
}

/// Jacobi elliptic sine `sn(f, k) = sin am(f, k)`.
pub fn jacobi_sn(f: f64, k: f64) -> Result<f64> {
    jacobi_am(f, k).map(f64::sin)
}

/// Jacobi elliptic cosine `cn(f, k) = cos am(f, k)`.
pub fn jacobi_cn(f: f64, k: f64) -> Result<f64> {
    jacobi_am(f, k).map(f64::cos)
}

/// Delta amplitude `dn(f, k) = √(1 − k² sn²)`.
pub fn jacobi_dn(f: f64, k: f64) -> Result<f64> {
    let s = jacobi_sn(f, k)?;
    Ok((1.0 - k * k * s * s).sqrt())
}
