//! Entire-in-lambda basis functions for `-y'' = lambda y`:
//! `C(u, lambda) = cos(k u)` and `S(u, lambda) = sin(k u)/k` with
//! `k = sqrt(lambda)`, continued through lambda <= 0 as cosh/sinh.

/// `cos(sqrt(lambda) u)`, continued to `cosh(sqrt(-lambda) u)` for
/// negative lambda.
pub(crate) fn cos_like(u: f64, lambda: f64) -> f64 {
    let t2 = lambda * u * u;
    if t2 > 1e-12 {
        t2.sqrt().cos()
    } else if t2 < -1e-12 {
        (-t2).sqrt().cosh()
    } else {
        1.0 - t2 / 2.0 + t2 * t2 / 24.0
    }
}

/// `sin(sqrt(lambda) u)/sqrt(lambda)`, continued to
/// `sinh(sqrt(-lambda) u)/sqrt(-lambda)`; equals `u` at lambda = 0.
pub(crate) fn sin_like(u: f64, lambda: f64) -> f64 {
    let t2 = lambda * u * u;
    if t2 > 1e-12 {
        let t = t2.sqrt();
        u * t.sin() / t
    } else if t2 < -1e-12 {
        let t = (-t2).sqrt();
        u * t.sinh() / t
    } else {
        u * (1.0 - t2 / 6.0 + t2 * t2 / 120.0)
    }
}

/// `cosh(sqrt(m2))` for m2 >= 0, `cos(sqrt(-m2))` for m2 < 0.
pub(crate) fn cosh_like(m2: f64) -> f64 {
    if m2 > 1e-12 {
        m2.sqrt().cosh()
    } else if m2 < -1e-12 {
        (-m2).sqrt().cos()
    } else {
        1.0 + m2 / 2.0 + m2 * m2 / 24.0
    }
}

/// `sinh(sqrt(m2))/sqrt(m2)` for m2 >= 0, `sin(sqrt(-m2))/sqrt(-m2)` for
/// m2 < 0; equals 1 at m2 = 0.
pub(crate) fn sinhc_like(m2: f64) -> f64 {
    if m2 > 1e-12 {
        let t = m2.sqrt();
        t.sinh() / t
    } else if m2 < -1e-12 {
        let t = (-m2).sqrt();
        t.sin() / t
    } else {
        1.0 + m2 / 6.0 + m2 * m2 / 120.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_trig_for_positive_lambda() {
        let (u, lam) = (1.3, 4.0);
        assert!((cos_like(u, lam) - (2.0 * u).cos()).abs() < 1e-14);
        assert!((sin_like(u, lam) - (2.0 * u).sin() / 2.0).abs() < 1e-14);
    }

    #[test]
    fn matches_hyperbolic_for_negative_lambda() {
        let (u, lam) = (0.7, -9.0);
        assert!((cos_like(u, lam) - (3.0 * u).cosh()).abs() < 1e-12);
        assert!((sin_like(u, lam) - (3.0 * u).sinh() / 3.0).abs() < 1e-12);
    }

    #[test]
    fn continuous_through_zero() {
        for &u in &[0.2, 1.0, 2.9] {
            let a = cos_like(u, 1e-13);
            let b = cos_like(u, -1e-13);
            assert!((a - b).abs() < 1e-12);
            let a = sin_like(u, 1e-13);
            let b = sin_like(u, -1e-13);
            assert!((a - b).abs() < 1e-12);
            assert!((sin_like(u, 0.0) - u).abs() < 1e-15);
        }
    }
}
