//! Post-hoc checks on simulated traces: settling detection, Lyapunov
//! traces and average consensus.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::graph::WeightedGraph;
use crate::linalg::{mean, mean_centered, norm2};
use crate::protocol::Variant;
use crate::sim::SimTrace;

/// Default settling band on the diameter, in state units.
pub const DEFAULT_SETTLE_TOL: f64 = 1e-3;

/// `max x - min x`.
pub fn diameter(x: &[f64]) -> Result<f64> {
    if x.is_empty() {
        return Err(Error::InvalidArgument("diameter of an empty state".into()));
    }
    Ok(diameter_unchecked(x))
}

pub(crate) fn diameter_unchecked(x: &[f64]) -> f64 {
    let (lo, hi) = x
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(*v), hi.max(*v)));
    hi - lo
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SettlingReport {
    pub settled: bool,
    /// First recorded time after which the diameter stays within the band.
    pub t_settle: Option<f64>,
    pub tol_abs: f64,
    /// Largest diameter from the first entry into the band onwards; shows
    /// chatter or re-exits.
    pub post_settle_max_diameter: Option<f64>,
    pub final_diameter: f64,
    pub bound_t_c: Option<f64>,
    pub bound_satisfied: Option<bool>,
}

/// Finds when the diameter enters `[0, tol_abs]` for good.
pub fn detect_settling(trace: &SimTrace, tol_abs: f64, t_c: Option<f64>) -> SettlingReport {
    let d = &trace.diameter;
    let final_diameter = d.last().copied().unwrap_or(f64::NAN);
    let inside = |v: &f64| *v <= tol_abs;
    let t_settle = if d.last().is_some_and(inside) {
        let first_after = d.iter().rposition(|v| !inside(v)).map_or(0, |i| i + 1);
        Some(trace.times[first_after])
    } else {
        None
    };
    let post_settle_max_diameter = d
        .iter()
        .position(inside)
        .map(|i| d[i..].iter().copied().fold(0.0, f64::max));
    let bound_satisfied = t_c.map(|tc| t_settle.is_some_and(|ts| ts <= tc));
    SettlingReport {
        settled: t_settle.is_some(),
        t_settle,
        tol_abs,
        post_settle_max_diameter,
        final_diameter,
        bound_t_c: t_c,
        bound_satisfied,
    }
}

/// `V = (1/n) sqrt(lambda_2 delta' Q delta)` on a static topology, with
/// `delta` the mean-centred state.
pub fn lyapunov_trace_a(trace: &SimTrace, g: &WeightedGraph) -> Result<Vec<f64>> {
    check_len(g.n(), trace.n())?;
    let lambda2 = g.algebraic_connectivity()?;
    let n = g.n() as f64;
    Ok(trace
        .states
        .iter()
        .map(|x| {
            let delta = mean_centered(x);
            let form: f64 = g
                .edges()
                .iter()
                .map(|e| e.weight * (delta[e.i] - delta[e.j]).powi(2))
                .sum();
            (lambda2 * form).sqrt() / n
        })
        .collect())
}

/// `V = sqrt(lambda_2* delta' delta) / M`, independent of the active
/// topology.
pub fn lyapunov_trace_b(trace: &SimTrace, lambda2_star: f64, m: usize) -> Result<Vec<f64>> {
    if !(lambda2_star.is_finite() && lambda2_star > 0.0) || m == 0 {
        return Err(Error::InvalidArgument(format!(
            "need lambda_2* > 0 and M > 0, got {lambda2_star} and {m}"
        )));
    }
    let scale = lambda2_star.sqrt() / m as f64;
    Ok(trace
        .states
        .iter()
        .map(|x| scale * norm2(&mean_centered(x)))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AverageConsensusReport {
    pub applicable: bool,
    pub reason: Option<String>,
    pub initial_mean: f64,
    /// `max_t |mean(x(t)) - mean(x(0))|`.
    pub max_mean_drift: f64,
    /// Midrange of the final state, when it is within the band.
    pub consensus_value: Option<f64>,
    pub consensus_error: Option<f64>,
}

/// Compares the consensus value with the initial average. Only protocol B
/// without disturbance and with equal gains conserves the mean; other runs
/// are reported as not applicable but the numbers are still filled in.
pub fn average_consensus_check(trace: &SimTrace, tol_abs: f64) -> AverageConsensusReport {
    let reason = if trace.meta.variant != Variant::B {
        Some("protocol A does not conserve the average".to_string())
    } else if !trace.meta.undisturbed {
        Some("disturbances shift the average".to_string())
    } else if !trace.meta.equal_gains {
        Some("unequal gains break conservation of the average".to_string())
    } else {
        None
    };
    let initial_mean = mean(&trace.states[0]);
    let max_mean_drift = trace
        .states
        .iter()
        .map(|x| (mean(x) - initial_mean).abs())
        .fold(0.0, f64::max);
    let last = trace.final_state();
    let consensus_value = (diameter_unchecked(last) <= tol_abs).then(|| {
        let lo = last.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = last.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lo + hi)
    });
    AverageConsensusReport {
        applicable: reason.is_none(),
        reason,
        initial_mean,
        max_mean_drift,
        consensus_value,
        consensus_error: consensus_value.map(|v| (v - initial_mean).abs()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::TraceMeta;

    fn meta(variant: Variant) -> TraceMeta {
        TraceMeta {
            variant,
            undisturbed: true,
            equal_gains: true,
            h: 1e-3,
        }
    }

    fn trace(states: Vec<Vec<f64>>, variant: Variant) -> SimTrace {
        let times = (0..states.len()).map(|k| k as f64 * 0.1).collect();
        let sigma = vec![0; states.len()];
        SimTrace::from_records(times, states, sigma, None, meta(variant)).unwrap()
    }

    #[test]
    fn diameter_values() {
        assert_eq!(diameter(&[4.0; 5]).unwrap(), 0.0);
        assert_eq!(diameter(&[-1.0, 2.0, 0.0]).unwrap(), 3.0);
        assert_eq!(diameter(&[0.0, 2.0, -1.0]).unwrap(), 3.0);
        assert!(diameter(&[]).is_err());
    }

    #[test]
    fn settling_of_constant_consensus() {
        let tr = trace(vec![vec![1.0, 1.0]; 5], Variant::A);
        let r = detect_settling(&tr, 1e-3, Some(1.0));
        assert_eq!(r.t_settle, Some(0.0));
        assert_eq!(r.bound_satisfied, Some(true));
        assert_eq!(r.post_settle_max_diameter, Some(0.0));
    }

    #[test]
    fn diverging_trace_does_not_settle() {
        let states = (0..5).map(|k| vec![0.0, k as f64]).collect();
        let r = detect_settling(&trace(states, Variant::A), 1e-3, Some(1.0));
        assert!(!r.settled);
        assert_eq!(r.t_settle, None);
        assert_eq!(r.bound_satisfied, Some(false));
    }

    #[test]
    fn re_exit_moves_the_settling_time() {
        let d = [1.0, 1e-4, 2e-3, 1e-4, 0.0];
        let states = d.iter().map(|v| vec![0.0, *v]).collect();
        let r = detect_settling(&trace(states, Variant::A), 1e-3, Some(0.25));
        assert!((r.t_settle.unwrap() - 0.3).abs() < 1e-12);
        assert_eq!(r.post_settle_max_diameter, Some(2e-3));
        assert_eq!(r.bound_satisfied, Some(false));
        let loose = detect_settling(&trace(d.iter().map(|v| vec![0.0, *v]).collect(), Variant::A), 5e-3, None);
        assert!((loose.t_settle.unwrap() - 0.1).abs() < 1e-12);
        assert_eq!(loose.bound_satisfied, None);
    }

    #[test]
    fn lyapunov_traces_vanish_at_consensus() {
        let g = WeightedGraph::cycle(4).unwrap();
        let tr = trace(vec![vec![3.0; 4]; 3], Variant::A);
        assert!(lyapunov_trace_a(&tr, &g).unwrap().iter().all(|v| *v == 0.0));
        assert!(lyapunov_trace_b(&tr, 0.5, 4).unwrap().iter().all(|v| *v == 0.0));
        assert!(lyapunov_trace_b(&tr, 0.0, 4).is_err());
        assert!(lyapunov_trace_b(&tr, 0.5, 0).is_err());
        assert!(lyapunov_trace_a(&tr, &WeightedGraph::cycle(5).unwrap()).is_err());
    }

    #[test]
    fn lyapunov_a_matches_matrix_form() {
        let g = WeightedGraph::new(3, [(0, 1, 1.0), (1, 2, 2.0), (0, 2, 0.5)]).unwrap();
        let x = vec![1.0, -2.0, 0.5];
        let tr = trace(vec![x.clone()], Variant::A);
        let delta = mean_centered(&x);
        let q = g.laplacian().q;
        let want = (g.algebraic_connectivity().unwrap() * q.quadratic_form(&delta)).sqrt() / 3.0;
        assert!((lyapunov_trace_a(&tr, &g).unwrap()[0] - want).abs() < 1e-14);
    }

    #[test]
    fn lyapunov_b_scales_with_disagreement() {
        let x = vec![1.0, -2.0, 0.5, 4.0];
        let doubled: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        let tr = trace(vec![x, doubled], Variant::B);
        let v = lyapunov_trace_b(&tr, 0.3, 5).unwrap();
        assert!((v[1] - 2.0 * v[0]).abs() < 1e-14);
    }

    #[test]
    fn average_check_on_symmetric_pair() {
        let tr = trace(vec![vec![1.0, -1.0], vec![0.0, 0.0]], Variant::B);
        let r = average_consensus_check(&tr, 1e-3);
        assert!(r.applicable);
        assert_eq!(r.consensus_value, Some(0.0));
        assert_eq!(r.consensus_error, Some(0.0));

        let a = average_consensus_check(&trace(vec![vec![1.0, -1.0], vec![0.5, 0.5]], Variant::A), 1e-3);
        assert!(!a.applicable);
        assert!(a.reason.unwrap().contains("protocol A"));
    }
}
