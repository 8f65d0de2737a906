//! Gamma function by the Lanczos approximation (g = 7, nine coefficients),
//! with the reflection formula below 1/2.

use std::f64::consts::PI;

use crate::error::{Error, Result};

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// `Gamma(z)` for `z > 0`.
pub fn gamma(z: f64) -> Result<f64> {
    if !(z.is_finite() && z > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "gamma is only evaluated for finite z > 0, got {z}"
        )));
    }
    Ok(gamma_unchecked(z))
}

pub(crate) fn gamma_unchecked(z: f64) -> f64 {
    if z < 0.5 {
        PI / ((PI * z).sin() * gamma_unchecked(1.0 - z))
    } else {
        let z = z - 1.0;
        let mut acc = LANCZOS_COEF[0];
        for (i, c) in LANCZOS_COEF.iter().enumerate().skip(1) {
            acc += c / (z + i as f64);
        }
        let t = z + LANCZOS_G + 0.5;
        (2.0 * PI).sqrt() * t.powf(z + 0.5) * (-t).exp() * acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    /// Composite Simpson on `[0, upper]`.
    fn simpson(f: impl Fn(f64) -> f64, upper: f64) -> f64 {
        let steps = 200_000;
        let h = upper / steps as f64;
        let mut s = f(0.0) + f(upper);
        for i in 1..steps {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(i as f64 * h);
        }
        s * h / 3.0
    }

    /// The defining integral after a substitution that leaves a smooth
    /// integrand: `t = u^(1/z)` for `z < 1`, `t = s^2` otherwise.
    fn gamma_by_quadrature(z: f64) -> f64 {
        if z < 1.0 {
            simpson(|u| (-u.powf(1.0 / z)).exp(), 40f64.powf(z)) / z
        } else {
            2.0 * simpson(|s| s.powf(2.0 * z - 1.0) * (-s * s).exp(), 10.0)
        }
    }

    #[test]
    fn known_values() {
        assert!(rel(gamma(0.5).unwrap(), PI.sqrt()) < 1e-13);
        assert!(rel(gamma(5.0).unwrap(), 24.0) < 1e-13);
        assert!(rel(gamma(1.0).unwrap(), 1.0) < 1e-13);
        // 29! = 8841761993739701954543616000000
        assert!(rel(gamma(30.0).unwrap(), 8.841_761_993_739_702e30) < 1e-12);
    }

    #[test]
    fn sixth_matches_integral() {
        let oracle = gamma_by_quadrature(1.0 / 6.0);
        assert!(rel(oracle, 5.5663) < 1e-4);
        assert!(rel(gamma(1.0 / 6.0).unwrap(), oracle) < 1e-10);
    }

    #[test]
    fn matches_quadrature_on_a_grid() {
        for z in [0.05, 0.3, 0.75, 1.5, 2.2, 4.5] {
            let oracle = gamma_by_quadrature(z);
            assert!(rel(gamma(z).unwrap(), oracle) < 1e-10, "z = {z}");
        }
    }

    #[test]
    fn recurrence() {
        let mut z = 0.1;
        while z <= 20.0 {
            let lhs = gamma(z + 1.0).unwrap();
            let rhs = z * gamma(z).unwrap();
            assert!(rel(lhs, rhs) < 1e-9, "z = {z}");
            z += 0.037;
        }
    }

    #[test]
    fn rejects_non_positive() {
        assert!(gamma(0.0).is_err());
        assert!(gamma(-1.5).is_err());
        assert!(gamma(f64::NAN).is_err());
    }
}
