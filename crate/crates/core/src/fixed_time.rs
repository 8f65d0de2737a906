//! The scalar fixed-time system `x' = -(alpha|x|^p + beta|x|^q)^k sign(x)`,
//! its uniform settling bound and a Lyapunov decay-rate check built on it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::gamma_unchecked;

/// Parameter vector `(alpha, beta, p, q, k)` with `alpha, beta, p, q, k > 0`,
/// `k*p < 1` and `k*q > 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawRho")]
pub struct RhoParams {
    pub alpha: f64,
    pub beta: f64,
    pub p: f64,
    pub q: f64,
    pub k: f64,
}

#[derive(Deserialize)]
struct RawRho {
    alpha: f64,
    beta: f64,
    p: f64,
    q: f64,
    k: f64,
}

impl TryFrom<RawRho> for RhoParams {
    type Error = Error;

    fn try_from(r: RawRho) -> Result<Self> {
        RhoParams::new(r.alpha, r.beta, r.p, r.q, r.k)
    }
}

impl RhoParams {
    pub fn new(alpha: f64, beta: f64, p: f64, q: f64, k: f64) -> Result<Self> {
        for (name, v) in [("alpha", alpha), ("beta", beta), ("p", p), ("q", q), ("k", k)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParams(format!(
                    "{name} must be finite and positive, got {v}"
                )));
            }
        }
        if k * p >= 1.0 {
            return Err(Error::InvalidParams(format!(
                "fixed-time condition k*p < 1 violated: k*p = {}",
                k * p
            )));
        }
        if k * q <= 1.0 {
            return Err(Error::InvalidParams(format!(
                "fixed-time condition k*q > 1 violated: k*q = {}",
                k * q
            )));
        }
        Ok(Self {
            alpha,
            beta,
            p,
            q,
            k,
        })
    }

    /// `(alpha v^p + beta v^q)^k` for `v >= 0`.
    #[inline]
    pub fn rate(&self, v: f64) -> f64 {
        (self.alpha * v.powf(self.p) + self.beta * v.powf(self.q)).powf(self.k)
    }

    /// Uniform settling bound of the scalar system:
    ///
    /// `gamma = G((1-kp)/(q-p)) G((kq-1)/(q-p)) / (alpha^k G(k) (q-p)) * (alpha/beta)^((1-kp)/(q-p))`.
    ///
    /// Every trajectory reaches the origin no later than this, and the bound
    /// is approached as `|x0| -> inf`.
    pub fn settling_bound(&self) -> f64 {
        let Self {
            alpha,
            beta,
            p,
            q,
            k,
        } = *self;
        let spread = q - p;
        let low = (1.0 - k * p) / spread;
        let high = (k * q - 1.0) / spread;
        gamma_unchecked(low) * gamma_unchecked(high)
            / (alpha.powf(k) * gamma_unchecked(k) * spread)
            * (alpha / beta).powf(low)
    }
}

/// Largest fraction of `|x|` a single oracle step may remove.
const ORACLE_MAX_RELATIVE_STEP: f64 = 1e-3;

/// Brute-force settling time of the scalar system from `x0`.
///
/// Explicit Euler with step `h`, stopped once `|x| < 1e-9 max(1, |x0|)`.
/// Where a step of length `h` would remove more than 0.1% of `|x|` (the
/// stiff region far from the origin when `kq > 1`, and the final approach
/// to the origin) the step is shortened to that limit, so the iterate never
/// overshoots and the recorded time stays well defined.
///
/// Fails with [`Error::NonTermination`] if the elapsed time exceeds ten
/// times the analytic bound.
pub fn scalar_settling_oracle(rho: &RhoParams, x0: f64, h: f64) -> Result<f64> {
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::InvalidArgument(format!("step must be positive, got {h}")));
    }
    if !x0.is_finite() {
        return Err(Error::InvalidArgument(format!("initial state must be finite, got {x0}")));
    }
    let threshold = 1e-9 * x0.abs().max(1.0);
    let limit = 10.0 * rho.settling_bound();
    // The vector field is odd, so the magnitude evolves identically for +x0 and -x0.
    let mut y = x0.abs();
    let mut t = 0.0;
    while y >= threshold {
        let speed = rho.rate(y);
        let dt = h.min(ORACLE_MAX_RELATIVE_STEP * y / speed);
        y -= dt * speed;
        t += dt;
        if t > limit {
            return Err(Error::NonTermination { limit });
        }
    }
    Ok(t)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateCheckOptions {
    /// Allowed relative shortfall of the observed decay against the bound.
    pub rel_slack: f64,
    /// Segments with an endpoint at or below this value are skipped.
    pub floor: f64,
}

impl Default for RateCheckOptions {
    fn default() -> Self {
        Self {
            rel_slack: 0.05,
            floor: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateCheck {
    pub passed: bool,
    /// Largest relative excess `(slope - bound) / |bound|` over checked
    /// segments, clamped at zero.
    pub max_violation: f64,
    /// Time of the segment start where `max_violation` was attained.
    pub worst_time: Option<f64>,
    pub checked_segments: usize,
}

/// Checks `dV/dt <= -(gamma/T_c) (alpha V^p + beta V^q)^k` on a sampled
/// trace.
///
/// Each segment's forward-difference slope is compared with the bound
/// evaluated at the segment's smaller endpoint: the right-hand side is
/// increasing in `V`, so that is the weakest rate the inequality can imply
/// over the whole segment.
pub fn lyapunov_rate_check(
    times: &[f64],
    values: &[f64],
    rho: &RhoParams,
    t_c: f64,
    opts: RateCheckOptions,
) -> Result<RateCheck> {
    if times.len() != values.len() {
        return Err(Error::DimensionMismatch {
            expected: times.len(),
            found: values.len(),
        });
    }
    if times.len() < 2 {
        return Err(Error::InvalidArgument(
            "rate check needs at least two samples".into(),
        ));
    }
    if !(t_c.is_finite() && t_c > 0.0) {
        return Err(Error::InvalidArgument(format!("T_c must be positive, got {t_c}")));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidArgument("sample times must be strictly increasing".into()));
    }
    if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::InvalidArgument("Lyapunov values must be finite and non-negative".into()));
    }
    let coef = rho.settling_bound() / t_c;
    let mut max_excess = f64::NEG_INFINITY;
    let mut worst_time = None;
    let mut checked = 0;
    for k in 0..times.len() - 1 {
        let (v0, v1) = (values[k], values[k + 1]);
        if v0 <= opts.floor || v1 <= opts.floor {
            continue;
        }
        checked += 1;
        let slope = (v1 - v0) / (times[k + 1] - times[k]);
        let bound = -coef * rho.rate(v0.min(v1));
        let excess = (slope - bound) / bound.abs();
        if excess > max_excess {
            max_excess = excess;
            worst_time = Some(times[k]);
        }
    }
    let max_violation = max_excess.max(0.0);
    Ok(RateCheck {
        passed: checked == 0 || max_excess <= opts.rel_slack,
        max_violation,
        worst_time,
        checked_segments: checked,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example_rho() -> RhoParams {
        RhoParams::new(1.0, 2.0, 1.5, 3.0, 0.5).unwrap()
    }

    #[test]
    fn validation_names_the_violated_condition() {
        let e = RhoParams::new(1.0, 1.0, 1.0, 3.0, 1.0).unwrap_err();
        assert!(e.to_string().contains("k*p < 1"), "{e}");
        let e = RhoParams::new(1.0, 1.0, 0.1, 0.9, 1.0).unwrap_err();
        assert!(e.to_string().contains("k*q > 1"), "{e}");
        assert!(RhoParams::new(0.0, 1.0, 0.5, 2.0, 1.0).is_err());
        assert!(RhoParams::new(1.0, 1.0, 0.5, 2.0, f64::INFINITY).is_err());
    }

    #[test]
    fn settling_bound_reference_values() {
        // Back-computed from kappa = 178.88 = n gamma / (lambda_2 T_c), n = 10, lambda_2 = 0.27935.
        let g = example_rho().settling_bound();
        assert!((g - 4.9969).abs() < 1e-3, "{g}");
        assert!((10.0 * g / 0.27935 - 178.88).abs() / 178.88 < 1e-3);

        // Gamma(1/3) Gamma(2/3) = 2 pi / sqrt(3).
        let rho = RhoParams::new(1.0, 1.0, 0.5, 2.0, 1.0).unwrap();
        let expected = 2.0 * std::f64::consts::PI / 3f64.sqrt() / 1.5;
        assert!((rho.settling_bound() - expected).abs() < 1e-12);
        assert!((expected - 2.4184).abs() < 1e-4);
    }

    #[test]
    fn settling_bound_beta_scaling() {
        let a = RhoParams::new(1.3, 0.7, 0.4, 2.5, 0.8).unwrap();
        let b = RhoParams { beta: 4.0 * a.beta, ..a };
        let exponent = (1.0 - a.k * a.p) / (a.q - a.p);
        let ratio = b.settling_bound() / a.settling_bound();
        assert!((ratio - 0.25f64.powf(exponent)).abs() < 1e-12);
    }

    #[test]
    fn oracle_zero_and_symmetry() {
        let rho = example_rho();
        assert_eq!(scalar_settling_oracle(&rho, 0.0, 1e-4).unwrap(), 0.0);
        let a = scalar_settling_oracle(&rho, 3.7, 1e-5).unwrap();
        let b = scalar_settling_oracle(&rho, -3.7, 1e-5).unwrap();
        assert_eq!(a, b);
    }

    /// `int_a^b dx / rate(x)` by Simpson's rule in `s = ln x`.
    fn time_integral(rho: &RhoParams, a: f64, b: f64) -> f64 {
        let (lo, hi) = (a.ln(), b.ln());
        let steps = 200_000;
        let h = (hi - lo) / steps as f64;
        let f = |s: f64| {
            let x = s.exp();
            x / rho.rate(x)
        };
        let mut acc = f(lo) + f(hi);
        for i in 1..steps {
            acc += if i % 2 == 1 { 4.0 } else { 2.0 } * f(lo + i as f64 * h);
        }
        acc * h / 3.0
    }

    #[test]
    fn bound_is_the_full_integral() {
        for rho in [example_rho(), RhoParams::new(0.7, 3.0, 0.2, 1.4, 1.1).unwrap()] {
            let total = time_integral(&rho, 1e-40, 1e40);
            assert!((total - rho.settling_bound()).abs() < 1e-6 * total, "{total}");
        }
    }

    #[test]
    fn oracle_matches_the_truncated_integral() {
        // The stopping threshold 1e-9 |x0| = 1e-3 drops the final approach to
        // the origin, worth about 0.71 s here, so the oracle lands near 0.86 gamma.
        let rho = example_rho();
        let g = rho.settling_bound();
        let far = scalar_settling_oracle(&rho, 1e6, 1e-6).unwrap();
        let expected = time_integral(&rho, 1e-3, 1e6);
        assert!(far <= g, "T = {far}, gamma = {g}");
        assert!((far - expected).abs() < 2e-3 * expected, "T = {far}, integral = {expected}");
        assert!(far >= 0.85 * g);
        let near = scalar_settling_oracle(&rho, 1.0, 1e-6).unwrap();
        assert!(near < far);
        assert!((near - time_integral(&rho, 1e-9, 1.0)).abs() < 2e-3 * near);
    }

    #[test]
    fn oracle_rejects_bad_step() {
        assert!(scalar_settling_oracle(&example_rho(), 1.0, 0.0).is_err());
        assert!(scalar_settling_oracle(&example_rho(), 1.0, -1e-3).is_err());
    }

    #[test]
    fn rate_check_trivial_traces() {
        let rho = example_rho();
        let times: Vec<f64> = (0..10).map(|i| i as f64 * 0.1).collect();
        let zero = vec![0.0; 10];
        let r = lyapunov_rate_check(&times, &zero, &rho, 1.0, Default::default()).unwrap();
        assert!(r.passed);
        assert_eq!(r.max_violation, 0.0);

        let flat = vec![2.0; 10];
        let r = lyapunov_rate_check(&times, &flat, &rho, 1.0, Default::default()).unwrap();
        assert!(!r.passed);
        assert!(r.max_violation > 0.0);

        assert!(lyapunov_rate_check(&[0.0], &[1.0], &rho, 1.0, Default::default()).is_err());
        assert!(
            lyapunov_rate_check(&[0.0, 0.0], &[1.0, 0.5], &rho, 1.0, Default::default()).is_err()
        );
    }

    #[test]
    fn rate_check_accepts_equality_case() {
        // Integrate V' = -(gamma/T_c) g(V) finely and sample it coarsely.
        let rho = example_rho();
        let t_c = 2.0;
        let coef = rho.settling_bound() / t_c;
        let dt = 1e-7;
        let mut v: f64 = 50.0;
        let mut t = 0.0;
        let (mut times, mut values) = (vec![0.0], vec![v]);
        let mut step = 0u64;
        while v > 1e-6 {
            v -= dt * coef * rho.rate(v);
            t += dt;
            step += 1;
            if step % 1000 == 0 {
                times.push(t);
                values.push(v.max(0.0));
            }
        }
        let r = lyapunov_rate_check(&times, &values, &rho, t_c, Default::default()).unwrap();
        assert!(r.passed, "{r:?}");
        assert!(r.checked_segments > 10);
        // The same trace is too slow for a tighter time budget.
        let r = lyapunov_rate_check(&times, &values, &rho, t_c / 2.0, Default::default()).unwrap();
        assert!(!r.passed);
    }
}
