//! Real orthonormal spherical harmonics from the normalized associated
//! Legendre recurrence.

use std::f64::consts::PI;

use crate::mesh::Point;

pub const MAX_DEGREE: usize = 20;

/// Normalized `P̄_ℓ^m(z)` with `∫ P̄² dΩ = 1` once the azimuthal factor is
/// included, no Condon–Shortley phase.
pub fn normalized_legendre(l: usize, m: usize, z: f64) -> f64 {
    assert!(m <= l, "order exceeds degree");
    let s = (1.0 - z * z).max(0.0).sqrt();
    let mut pmm = (1.0 / (4.0 * PI)).sqrt();
    for k in 1..=m {
        pmm *= ((2 * k + 1) as f64 / (2 * k) as f64).sqrt() * s;
    }
    if l == m {
        return pmm;
    }
    let mut prev = pmm;
    let mut cur = z * ((2 * m + 3) as f64).sqrt() * pmm;
    for ll in m + 2..=l {
        let (lf, mf) = (ll as f64, m as f64);
        let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
        let b = (((lf - 1.0).powi(2) - mf * mf) / (4.0 * (lf - 1.0).powi(2) - 1.0)).sqrt();
        let next = a * (z * cur - b * prev);
        prev = cur;
        cur = next;
    }
    cur
}

/// `Y_ℓ^m` at the radial projection of `x` onto the unit sphere: cosine
/// azimuthal factor for `m > 0`, sine for `m < 0`.
pub fn real_spherical_harmonic(l: usize, m: i64, x: &Point) -> f64 {
    assert!(l <= MAX_DEGREE, "degree above {MAX_DEGREE}");
    let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
    let z = (x[2] / r).clamp(-1.0, 1.0);
    let phi = x[1].atan2(x[0]);
    let am = m.unsigned_abs() as usize;
    let p = normalized_legendre(l, am, z);
    match m {
        0 => p,
        m if m > 0 => std::f64::consts::SQRT_2 * p * (am as f64 * phi).cos(),
        _ => std::f64::consts::SQRT_2 * p * (am as f64 * phi).sin(),
    }
}
