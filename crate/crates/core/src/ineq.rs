//! Numerical oracles for the supporting inequalities on
//! `f(x) = x (alpha x^p + beta x^q)^k`: monotonicity, convexity, the
//! Jensen-type bound and ordering of p-norms.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fixed_time::RhoParams;

/// Margins below `-MARGIN_TOL` count as violations.
pub const MARGIN_TOL: f64 = 1e-12;
/// Allowed relative gap between the closed-form and finite-difference
/// second derivatives.
pub const SECOND_DERIVATIVE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolyFunc {
    pub rho: RhoParams,
}

fn check_domain(x: f64) -> Result<()> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("f is evaluated for finite x > 0, got {x}")))
    }
}

impl PolyFunc {
    pub fn new(rho: RhoParams) -> Self {
        Self { rho }
    }

    fn inner(&self, x: f64) -> f64 {
        self.rho.alpha * x.powf(self.rho.p) + self.rho.beta * x.powf(self.rho.q)
    }

    fn eval(&self, x: f64) -> f64 {
        x * self.inner(x).powf(self.rho.k)
    }

    pub fn f_eval(&self, x: f64) -> Result<f64> {
        check_domain(x)?;
        Ok(self.eval(x))
    }

    /// `g^(k-1) (alpha (kp+1) x^p + beta (kq+1) x^q)` with
    /// `g = alpha x^p + beta x^q`.
    pub fn f_derivative(&self, x: f64) -> Result<f64> {
        check_domain(x)?;
        let RhoParams { alpha, beta, p, q, k } = self.rho;
        Ok(self.inner(x).powf(k - 1.0)
            * (alpha * (k * p + 1.0) * x.powf(p) + beta * (k * q + 1.0) * x.powf(q)))
    }

    /// Closed-form second derivative, positive for every `x > 0`.
    pub fn f_second_derivative(&self, x: f64) -> Result<f64> {
        check_domain(x)?;
        let RhoParams { alpha, beta, p, q, k } = self.rho;
        let (xp, xq) = (x.powf(p), x.powf(q));
        let poly = alpha * alpha * p * (k * p + 1.0) * xp * xp
            + alpha * beta * (2.0 * k * p * q + p + q + (q - p).powi(2)) * xp * xq
            + beta * beta * q * (k * q + 1.0) * xq * xq;
        Ok(k / x * self.inner(x).powf(k - 2.0) * poly)
    }
}

/// `lhs >= rhs` with `margin = (lhs - rhs) / |lhs|` (zero when both vanish).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InequalityCheck {
    pub holds: bool,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
}

impl InequalityCheck {
    fn new(lhs: f64, rhs: f64) -> Self {
        let margin = if lhs == rhs {
            0.0
        } else {
            (lhs - rhs) / lhs.abs().max(rhs.abs())
        };
        Self {
            holds: margin >= -MARGIN_TOL,
            lhs,
            rhs,
            margin,
        }
    }
}

/// Mean of `f(a_i)` against `f(mean a)`.
pub fn jensen_poly_check(pf: &PolyFunc, a: &[f64]) -> Result<InequalityCheck> {
    if a.is_empty() {
        return Err(Error::InvalidArgument("empty sequence".into()));
    }
    for v in a {
        check_domain(*v)?;
    }
    let n = a.len() as f64;
    let lhs = a.iter().map(|v| pf.eval(*v)).sum::<f64>() / n;
    let rhs = pf.eval(a.iter().sum::<f64>() / n);
    Ok(InequalityCheck::new(lhs, rhs))
}

/// `||z||_p`, computed on `z / max|z|` so large entries do not overflow.
/// `p = inf` gives the max norm.
pub fn p_norm(z: &[f64], p: f64) -> f64 {
    let m = z.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if m == 0.0 || p.is_infinite() {
        return m;
    }
    m * z.iter().map(|v| (v.abs() / m).powf(p)).sum::<f64>().powf(1.0 / p)
}

/// `||z||_l <= ||z||_r` for `l >= r >= 1`; reported as `||z||_r >= ||z||_l`.
pub fn norm_ordering_check(z: &[f64], l: f64, r: f64) -> Result<InequalityCheck> {
    if !(r >= 1.0 && l >= r) {
        return Err(Error::InvalidArgument(format!("need l >= r >= 1, got l = {l}, r = {r}")));
    }
    if z.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("vector must be finite".into()));
    }
    Ok(InequalityCheck::new(p_norm(z, r), p_norm(z, l)))
}

/// Draws `rho` with `alpha, beta in [0.1, 10]`, `k in [0.1, 3]`,
/// `kp in (0, 1)` and `kq in (1, 10)`.
pub fn sample_rho<R: Rng + ?Sized>(rng: &mut R) -> RhoParams {
    loop {
        let alpha = rng.gen_range(0.1..=10.0);
        let beta = rng.gen_range(0.1..=10.0);
        let k = rng.gen_range(0.1..=3.0);
        let kp: f64 = rng.gen_range(0.01..0.99);
        let kq: f64 = rng.gen_range(1.01..10.0);
        if let Ok(rho) = RhoParams::new(alpha, beta, kp / k, kq / k, k) {
            return rho;
        }
    }
}

/// Largest argument for which `f` stays far below `f64::MAX` (with room
/// for averaging a dozen terms), capped at `cap`.
fn finite_limit(pf: &PolyFunc, cap: f64) -> f64 {
    let r = &pf.rho;
    let max_ln = 290.0 * std::f64::consts::LN_10 / r.k.max(1.0);
    let ln_x = (max_ln - r.alpha.max(r.beta).max(1.0).ln() - 2.0f64.ln()) / r.q.max(r.p);
    (ln_x.exp() / 24.0).min(cap)
}

fn log_uniform<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    rng.gen_range(lo.ln()..hi.ln()).exp()
}

/// Second derivative by Ridders' extrapolation of central differences.
pub fn second_derivative_fd(f: impl Fn(f64) -> f64, x: f64, h0: f64) -> f64 {
    const CON2: f64 = 1.4 * 1.4;
    const NTAB: usize = 12;
    let central = |h: f64| (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h);
    let mut a = [[0.0f64; NTAB]; NTAB];
    let mut h = h0;
    a[0][0] = central(h);
    let mut best = a[0][0];
    let mut err = f64::INFINITY;
    for i in 1..NTAB {
        h /= 1.4;
        a[0][i] = central(h);
        let mut fac = CON2;
        for j in 1..=i {
            a[j][i] = (a[j - 1][i] * fac - a[j - 1][i - 1]) / (fac - 1.0);
            fac *= CON2;
            let e = (a[j][i] - a[j - 1][i]).abs().max((a[j][i] - a[j - 1][i - 1]).abs());
            if e <= err {
                err = e;
                best = a[j][i];
            }
        }
        if (a[i][i] - a[i - 1][i - 1]).abs() >= 2.0 * err {
            break;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LemmaOutcome {
    pub name: String,
    pub cases: usize,
    pub violations: usize,
    pub worst_margin: f64,
}

impl LemmaOutcome {
    fn new(name: &str) -> Self {
        Self {
            name: name.into(),
            cases: 0,
            violations: 0,
            worst_margin: f64::INFINITY,
        }
    }

    fn record(&mut self, margin: f64) {
        self.cases += 1;
        if !(margin >= -MARGIN_TOL) {
            self.violations += 1;
        }
        // NaN margins count as violations and as the worst case.
        if margin.is_nan() || margin < self.worst_margin {
            self.worst_margin = margin;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LemmaSuiteReport {
    pub seed: u64,
    pub outcomes: Vec<LemmaOutcome>,
}

impl LemmaSuiteReport {
    pub fn passed(&self) -> bool {
        self.outcomes.iter().all(|o| o.violations == 0)
    }
}

/// Runs `cases` randomized instances of every check. All margins are
/// relative; the finite-difference check records
/// `SECOND_DERIVATIVE_TOL - relative error`.
pub fn run_lemma_suite(cases: usize, seed: u64) -> LemmaSuiteReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mono_pairs = LemmaOutcome::new("monotonicity: x1 < x2 implies f(x1) < f(x2)");
    let mut mono_deriv = LemmaOutcome::new("monotonicity: finite-difference f' > 0");
    let mut chord = LemmaOutcome::new("convexity: midpoint below chord");
    let mut second = LemmaOutcome::new("convexity: closed-form f'' matches finite differences");
    let mut jensen = LemmaOutcome::new("Jensen-type bound on f");
    let mut norms = LemmaOutcome::new("p-norm ordering");

    for _ in 0..cases {
        let pf = PolyFunc::new(sample_rho(&mut rng));

        // Arguments are kept where f is finite; overflow says nothing about
        // the inequalities.
        let hi = finite_limit(&pf, 1e3);
        let x1 = log_uniform(&mut rng, 1e-3, hi / 1e3);
        let x2 = x1 * log_uniform(&mut rng, 1.0 + 1e-6, 1e3);
        let (f1, f2) = (pf.eval(x1), pf.eval(x2));
        mono_pairs.record((f2 - f1) / f2);

        let x = log_uniform(&mut rng, 1e-3, hi);
        let hd = 1e-6 * x;
        let slope = (pf.eval(x + hd) - pf.eval(x - hd)) / (2.0 * hd);
        mono_deriv.record(slope * x / pf.eval(x));

        let mid = 0.5 * (x1 + x2);
        let avg = 0.5 * (f1 + f2);
        chord.record((avg - pf.eval(mid)) / avg);

        let x = log_uniform(&mut rng, 1e-2, hi.min(1e2));
        let exact = pf.f_second_derivative(x).unwrap_or(f64::NAN);
        // The curvature varies on a scale of about x / q.
        let fd = second_derivative_fd(|y| pf.eval(y), x, 0.1 * x / pf.rho.q.max(1.0));
        let positive = if exact > 0.0 { 0.0 } else { -1.0 };
        second.record((SECOND_DERIVATIVE_TOL - ((fd - exact) / exact).abs()).min(positive));

        let len = rng.gen_range(1..=12);
        let a: Vec<f64> = (0..len).map(|_| log_uniform(&mut rng, 1e-3, hi)).collect();
        jensen.record(jensen_poly_check(&pf, &a).map_or(f64::NAN, |c| c.margin));

        let len = rng.gen_range(1..=12);
        let scale = log_uniform(&mut rng, 1e-6, 1e6);
        let z: Vec<f64> = (0..len)
            .map(|_| {
                if rng.gen_bool(0.1) {
                    0.0
                } else {
                    scale * rng.gen_range(-1.0..1.0)
                }
            })
            .collect();
        let r = rng.gen_range(1.0..6.0);
        let l = if rng.gen_bool(0.1) {
            f64::INFINITY
        } else {
            r + rng.gen_range(0.0..6.0)
        };
        norms.record(norm_ordering_check(&z, l, r).map_or(f64::NAN, |c| c.margin));
    }

    LemmaSuiteReport {
        seed,
        outcomes: vec![mono_pairs, mono_deriv, chord, second, jensen, norms],
    }
}
