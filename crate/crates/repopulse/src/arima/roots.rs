//! Polynomial root finding and the root-reflection projection that keeps
//! AR/MA coefficient vectors stationary and invertible.

use num_complex::Complex64;

/// Minimum modulus enforced for characteristic roots after projection.
/// Roots on or just inside the unit circle are pushed to this radius so the
/// strict "outside the unit circle" condition holds with a numeric margin.
const ROOT_MARGIN: f64 = 1.001;

/// Roots of a real polynomial given constant-first coefficients
/// c_0 + c_1 z + ... + c_m z^m (Durand–Kerner simultaneous iteration).
/// The leading coefficient must be non-zero.
pub fn polynomial_roots(coeffs: &[f64]) -> Vec<Complex64> {
    let degree = coeffs.len() - 1;
    assert!(degree >= 1, "need degree >= 1");
    assert!(coeffs[degree] != 0.0, "leading coefficient must be non-zero");
    // monic normalization
    let monic: Vec<Complex64> = coeffs.iter().map(|&c| Complex64::new(c / coeffs[degree], 0.0)).collect();
    let eval = |z: Complex64| {
        let mut acc = Complex64::new(0.0, 0.0);
        for &c in monic.iter().rev() {
            acc = acc * z + c;
        }
        acc
    };
    let seed = Complex64::new(0.4, 0.9);
    let mut roots: Vec<Complex64> = (0..degree).map(|k| seed.powu(k as u32 + 1)).collect();
    for _ in 0..500 {
        let mut max_step = 0.0f64;
        for i in 0..degree {
            let mut denom = Complex64::new(1.0, 0.0);
            for j in 0..degree {
                if j != i {
                    denom *= roots[i] - roots[j];
                }
            }
            let step = eval(roots[i]) / denom;
            roots[i] -= step;
            max_step = max_step.max(step.norm());
        }
        if max_step < 1e-13 {
            break;
        }
    }
    roots
}

/// Reflects any characteristic root inside (or on) the unit circle to its
/// reciprocal conjugate outside, then rebuilds the coefficient tail.
///
/// `tail` holds the lag coefficients and `sign` their orientation in the
/// characteristic polynomial 1 + sign*c_1 z + ... + sign*c_m z^m: use
/// sign = -1 for the AR polynomial (1 - φ_1 z - ...), +1 for MA
/// (1 + θ_1 z + ...). The returned tail has the same length and convention.
pub fn reflect_to_unit_exterior(tail: &[f64], sign: f64) -> Vec<f64> {
    // characteristic polynomial, constant-first
    let mut poly: Vec<f64> = std::iter::once(1.0).chain(tail.iter().map(|&c| sign * c)).collect();
    // drop numerically-zero high-order terms so the root finder sees the
    // true degree
    while poly.len() > 1 && poly.last().unwrap().abs() < 1e-12 {
        poly.pop();
    }
    let effective_degree = poly.len() - 1;
    if effective_degree == 0 {
        return vec![0.0; tail.len()];
    }

    let mut roots = polynomial_roots(&poly);
    for r in &mut roots {
        let modulus = r.norm();
        if modulus < 1.0 {
            *r = r.conj().inv(); // reciprocal of the conjugate
        }
        let modulus = r.norm();
        if modulus < ROOT_MARGIN {
            *r *= ROOT_MARGIN / modulus;
        }
    }

    // rebuild prod_i (1 - z / r_i); the constant term is 1 by construction
    let mut coeffs = vec![Complex64::new(1.0, 0.0)];
    for r in &roots {
        let inv = r.inv();
        let mut next = vec![Complex64::new(0.0, 0.0); coeffs.len() + 1];
        for (k, &c) in coeffs.iter().enumerate() {
            next[k] += c;
            next[k + 1] -= c * inv;
        }
        coeffs = next;
    }

    let mut out = vec![0.0; tail.len()];
    for k in 1..coeffs.len() {
        debug_assert!(coeffs[k].im.abs() < 1e-6, "imaginary residue {}", coeffs[k].im);
        out[k - 1] = sign * coeffs[k].re;
    }
    out
}

fn characteristic_roots(tail: &[f64], sign: f64) -> Vec<Complex64> {
    let mut poly: Vec<f64> = std::iter::once(1.0).chain(tail.iter().map(|&c| sign * c)).collect();
    while poly.len() > 1 && poly.last().unwrap().abs() < 1e-12 {
        poly.pop();
    }
    if poly.len() == 1 {
        return Vec::new();
    }
    polynomial_roots(&poly)
}

/// True when some AR characteristic root lies within `tol` of an MA root
/// in the complex plane. Such a near-common factor makes the ARMA model
/// effectively unidentifiable — the shared factor cancels, leaving a
/// lower-order process wearing extra parameters.
pub fn near_common_factor(ar: &[f64], ma: &[f64], tol: f64) -> bool {
    if ar.is_empty() || ma.is_empty() {
        return false;
    }
    let ar_roots = characteristic_roots(ar, -1.0);
    let ma_roots = characteristic_roots(ma, 1.0);
    ar_roots
        .iter()
        .any(|a| ma_roots.iter().any(|m| (a - m).norm() < tol))
}

/// True when every root of the characteristic polynomial lies strictly
/// outside the unit circle.
pub fn roots_outside_unit_circle(tail: &[f64], sign: f64) -> bool {
    characteristic_roots(tail, sign).iter().all(|r| r.norm() > 1.0)
}
