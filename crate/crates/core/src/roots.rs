//! Simultaneous-iteration (Durand-Kerner / Weierstrass) polynomial roots.

use num_complex::Complex64;
use thiserror::Error;

/// Radius of the circle holding the initial root estimates.
pub const INIT_RADIUS: f64 = 0.9;
/// Angular offset of the first estimate; keeps guesses off the real axis.
const INIT_PHASE: f64 = 0.4;
pub const STEP_TOLERANCE: f64 = 1e-12;
pub const RESIDUAL_TOLERANCE: f64 = 1e-8;
pub const MAX_ITERATIONS: usize = 200;

#[derive(Debug, Error, PartialEq)]
pub enum RootError {
    #[error(
        "root finder did not converge after {iterations} iterations (worst residual {residual:e})"
    )]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("polynomial has no roots to find")]
    Constant,
    #[error("leading coefficient is zero or not finite")]
    BadLeading,
}

/// Horner evaluation; `coeffs` are in descending powers.
pub fn eval(coeffs: &[f64], z: Complex64) -> Complex64 {
    coeffs
        .iter()
        .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
}

/// Finds all complex roots of the polynomial with real coefficients given in
/// descending powers.
///
/// Iterates until every update is below [`STEP_TOLERANCE`] or
/// [`MAX_ITERATIONS`] is reached, then requires every residual to be below
/// [`RESIDUAL_TOLERANCE`].
pub fn find_roots(coeffs: &[f64]) -> Result<Vec<Complex64>, RootError> {
    let lead = *coeffs.first().ok_or(RootError::Constant)?;
    if lead == 0.0 || !lead.is_finite() {
        return Err(RootError::BadLeading);
    }
    let degree = coeffs.len() - 1;
    if degree == 0 {
        return Err(RootError::Constant);
    }
    let monic: Vec<f64> = coeffs.iter().map(|c| c / lead).collect();

    let mut roots: Vec<Complex64> = (0..degree)
        .map(|k| {
            let theta = 2.0 * std::f64::consts::PI * k as f64 / degree as f64 + INIT_PHASE;
            Complex64::from_polar(INIT_RADIUS, theta)
        })
        .collect();
    let mut next = roots.clone();

    for _ in 0..MAX_ITERATIONS {
        let mut max_step = 0.0f64;
        for i in 0..degree {
            let zi = roots[i];
            let mut denom = Complex64::new(1.0, 0.0);
            for (j, &zj) in roots.iter().enumerate() {
                if j != i {
                    denom *= zi - zj;
                }
            }
            // Coincident estimates: nudge rather than divide by zero.
            if denom.norm() == 0.0 {
                denom = Complex64::new(f64::EPSILON, 0.0);
            }
            let step = eval(&monic, zi) / denom;
            next[i] = zi - step;
            max_step = max_step.max(step.norm());
        }
        std::mem::swap(&mut roots, &mut next);
        if !max_step.is_finite() {
            break;
        }
        if max_step < STEP_TOLERANCE {
            break;
        }
    }

    let residual = roots
        .iter()
        .map(|&z| eval(&monic, z).norm())
        .fold(
            0.0f64,
            |a, b| if b.is_nan() { f64::INFINITY } else { a.max(b) },
        );
    if residual < RESIDUAL_TOLERANCE {
        Ok(roots)
    } else {
        Err(RootError::NoConvergence {
            iterations: MAX_ITERATIONS,
            residual,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sorted(mut v: Vec<Complex64>) -> Vec<Complex64> {
        v.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        v
    }

    #[test]
    fn quadratic_real_roots() {
        // (z - 0.5)(z + 0.25)
        let r = sorted(find_roots(&[1.0, -0.25, -0.125]).unwrap());
        assert!((r[0] - Complex64::new(-0.25, 0.0)).norm() < 1e-10);
        assert!((r[1] - Complex64::new(0.5, 0.0)).norm() < 1e-10);
    }

    #[test]
    fn complex_pair() {
        // z^2 + 1
        let r = sorted(find_roots(&[1.0, 0.0, 1.0]).unwrap());
        assert!((r[0].im.abs() - 1.0).abs() < 1e-10);
        assert!(r[0].re.abs() < 1e-10);
    }

    #[test]
    fn non_monic_input() {
        let r = find_roots(&[2.0, -1.0]).unwrap();
        assert!((r[0] - Complex64::new(0.5, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn rejects_constants() {
        assert_eq!(find_roots(&[3.0]), Err(RootError::Constant));
        assert_eq!(find_roots(&[]), Err(RootError::Constant));
        assert_eq!(find_roots(&[0.0, 1.0]), Err(RootError::BadLeading));
    }

    #[test]
    fn roots_of_unity_degree_eighteen() {
        let mut c = vec![0.0; 19];
        c[0] = 1.0;
        c[18] = -0.5;
        let r = find_roots(&c).unwrap();
        let radius = 0.5f64.powf(1.0 / 18.0);
        for z in r {
            assert!((z.norm() - radius).abs() < 1e-9);
        }
    }
}
