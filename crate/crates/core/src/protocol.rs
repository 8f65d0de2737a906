//! The two consensus laws and the closed-loop vector field.
//!
//! With `phi(z) = [(alpha|z|^p + beta|z|^q)^k + zeta] sign(z)`:
//!
//! - variant `A`: `u_i = kappa_i phi(e_i)`, `e_i = sum_j a_ij (x_j - x_i)`;
//! - variant `B`: `u_i = kappa_i sum_j sqrt(a_ij) phi(e_ij)`,
//!   `e_ij = sqrt(a_ij) (x_j - x_i)`.
//!
//! `sign(0)` is taken as `0`, so exact consensus is an equilibrium.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::fixed_time::RhoParams;
use crate::graph::WeightedGraph;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    /// One nonlinearity per agent on the aggregated neighbour error.
    A,
    /// One nonlinearity per incident edge; conserves the state sum when
    /// gains are equal.
    B,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams")]
pub struct ProtocolParams {
    pub rho: RhoParams,
    pub zeta: f64,
    /// Per-agent gains `kappa_i`.
    pub kappa: Vec<f64>,
    pub variant: Variant,
}

#[derive(Deserialize)]
struct RawParams {
    rho: RhoParams,
    zeta: f64,
    kappa: Vec<f64>,
    variant: Variant,
}

impl TryFrom<RawParams> for ProtocolParams {
    type Error = Error;

    fn try_from(r: RawParams) -> Result<Self> {
        ProtocolParams::new(r.rho, r.zeta, r.kappa, r.variant)
    }
}

impl ProtocolParams {
    pub fn new(rho: RhoParams, zeta: f64, kappa: Vec<f64>, variant: Variant) -> Result<Self> {
        if !(zeta.is_finite() && zeta >= 0.0) {
            return Err(Error::InvalidParams(format!("zeta must be >= 0, got {zeta}")));
        }
        if kappa.is_empty() {
            return Err(Error::InvalidParams("at least one gain is required".into()));
        }
        if let Some(bad) = kappa.iter().find(|k| !(k.is_finite() && **k > 0.0)) {
            return Err(Error::InvalidParams(format!("gains must be positive, got {bad}")));
        }
        Ok(Self {
            rho,
            zeta,
            kappa,
            variant,
        })
    }

    /// Same gain for all `n` agents.
    pub fn uniform(rho: RhoParams, zeta: f64, kappa: f64, n: usize, variant: Variant) -> Result<Self> {
        Self::new(rho, zeta, vec![kappa; n], variant)
    }

    pub fn n(&self) -> usize {
        self.kappa.len()
    }

    /// `kappa = min_i kappa_i`.
    pub fn min_gain(&self) -> f64 {
        self.kappa.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn has_equal_gains(&self) -> bool {
        self.kappa.windows(2).all(|w| w[0] == w[1])
    }

    #[inline]
    pub fn phi(&self, z: f64) -> f64 {
        phi(z, &self.rho, self.zeta)
    }
}

/// `[(alpha|z|^p + beta|z|^q)^k + zeta] sign(z)` with `sign(0) = 0`.
#[inline]
pub fn phi(z: f64, rho: &RhoParams, zeta: f64) -> f64 {
    if z == 0.0 {
        return 0.0;
    }
    let m = z.abs();
    (rho.rate(m) + zeta).copysign(z)
}

/// Protocol `A` on a single topology.
pub fn control_a(g: &WeightedGraph, x: &[f64], params: &ProtocolParams) -> Result<Vec<f64>> {
    check_len(g.n(), x.len())?;
    check_len(g.n(), params.n())?;
    let mut u = vec![0.0; g.n()];
    control_a_into(g, x, params, &mut u);
    Ok(u)
}

/// Protocol `B` on a single topology.
pub fn control_b(g: &WeightedGraph, x: &[f64], params: &ProtocolParams) -> Result<Vec<f64>> {
    check_len(g.n(), x.len())?;
    check_len(g.n(), params.n())?;
    let mut u = vec![0.0; g.n()];
    control_b_into(g, x, params, &mut u);
    Ok(u)
}

/// Dispatches on `params.variant`.
pub fn control(g: &WeightedGraph, x: &[f64], params: &ProtocolParams) -> Result<Vec<f64>> {
    match params.variant {
        Variant::A => control_a(g, x, params),
        Variant::B => control_b(g, x, params),
    }
}

/// `x' = u + d`, the vector field integrated by the simulator.
pub fn closed_loop_field(
    g: &WeightedGraph,
    x: &[f64],
    params: &ProtocolParams,
    d: &[f64],
) -> Result<Vec<f64>> {
    check_len(g.n(), d.len())?;
    let mut u = control(g, x, params)?;
    for (ui, di) in u.iter_mut().zip(d) {
        *ui += di;
    }
    Ok(u)
}

pub(crate) fn control_a_into(g: &WeightedGraph, x: &[f64], params: &ProtocolParams, u: &mut [f64]) {
    g.neighbor_errors_into(x, u);
    for (ui, ki) in u.iter_mut().zip(&params.kappa) {
        *ui = ki * params.phi(*ui);
    }
}

pub(crate) fn control_b_into(g: &WeightedGraph, x: &[f64], params: &ProtocolParams, u: &mut [f64]) {
    u.iter_mut().for_each(|v| *v = 0.0);
    for (i, j, s) in g.sqrt_weighted_edges() {
        // phi is odd: the j-side error is the negation of the i-side one.
        let f = s * params.phi(s * (x[j] - x[i]));
        u[i] += f;
        u[j] -= f;
    }
    for (ui, ki) in u.iter_mut().zip(&params.kappa) {
        *ui *= ki;
    }
}

pub(crate) fn control_into(g: &WeightedGraph, x: &[f64], params: &ProtocolParams, u: &mut [f64]) {
    match params.variant {
        Variant::A => control_a_into(g, x, params, u),
        Variant::B => control_b_into(g, x, params, u),
    }
}

/// Gains for a switched network: either one parameter set shared by every
/// topology, or one per topology (the active topology's set is used).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GainSchedule {
    Shared(ProtocolParams),
    PerTopology(Vec<ProtocolParams>),
}

impl From<ProtocolParams> for GainSchedule {
    fn from(p: ProtocolParams) -> Self {
        GainSchedule::Shared(p)
    }
}

impl GainSchedule {
    pub fn for_topology(&self, index: usize) -> &ProtocolParams {
        match self {
            GainSchedule::Shared(p) => p,
            GainSchedule::PerTopology(ps) => &ps[index],
        }
    }

    pub fn all(&self) -> &[ProtocolParams] {
        match self {
            GainSchedule::Shared(p) => std::slice::from_ref(p),
            GainSchedule::PerTopology(ps) => ps,
        }
    }

    pub fn variant(&self) -> Variant {
        self.all()[0].variant
    }

    /// Checks the schedule fits `topologies` graphs on `n` agents.
    pub fn validate(&self, topologies: usize, n: usize) -> Result<()> {
        if let GainSchedule::PerTopology(ps) = self {
            if ps.len() != topologies {
                return Err(Error::InvalidParams(format!(
                    "{} per-topology gain sets for {} topologies",
                    ps.len(),
                    topologies
                )));
            }
        }
        let variant = self.variant();
        for p in self.all() {
            check_len(n, p.n())?;
            if p.variant != variant {
                return Err(Error::InvalidParams(
                    "per-topology gain sets mix protocol variants".into(),
                ));
            }
        }
        Ok(())
    }

    /// Every agent uses the same gain at every instant.
    pub fn has_equal_gains(&self) -> bool {
        self.all().iter().all(ProtocolParams::has_equal_gains)
    }

    /// Smallest gain over agents and topologies.
    pub fn min_gain(&self) -> f64 {
        self.all()
            .iter()
            .map(ProtocolParams::min_gain)
            .fold(f64::INFINITY, f64::min)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rho() -> RhoParams {
        RhoParams::new(1.0, 2.0, 1.5, 3.0, 0.5).unwrap()
    }

    fn edge() -> WeightedGraph {
        WeightedGraph::new(2, [(0, 1, 1.0)]).unwrap()
    }

    #[test]
    fn phi_values() {
        let r = rho();
        assert_eq!(phi(0.0, &r, 0.3), 0.0);
        assert!((phi(1.0, &r, 0.0) - 3f64.sqrt()).abs() < 1e-15);
        assert!((phi(-1.0, &r, 0.5) + 3f64.sqrt() + 0.5).abs() < 1e-15);
        for z in [1e-6, 0.3, 2.0, 150.0] {
            assert_eq!(phi(-z, &r, 0.1), -phi(z, &r, 0.1));
        }
    }

    #[test]
    fn two_agent_controls_by_hand() {
        let g = edge();
        let s3 = 3f64.sqrt();
        let pa = ProtocolParams::uniform(rho(), 0.0, 1.0, 2, Variant::A).unwrap();
        let u = control_a(&g, &[1.0, 0.0], &pa).unwrap();
        assert!((u[0] + s3).abs() < 1e-15 && (u[1] - s3).abs() < 1e-15);

        let kappa = 2.5;
        let pb = ProtocolParams::uniform(rho(), 0.0, kappa, 2, Variant::B).unwrap();
        let u = control_b(&g, &[1.0, 0.0], &pb).unwrap();
        assert!((u[0] + kappa * s3).abs() < 1e-14 && (u[1] - kappa * s3).abs() < 1e-14);
        assert_eq!(u[0] + u[1], 0.0);
    }

    #[test]
    fn consensus_is_an_equilibrium() {
        let g = WeightedGraph::complete(4).unwrap();
        let x = [3.25; 4];
        for variant in [Variant::A, Variant::B] {
            let p = ProtocolParams::uniform(rho(), 0.2, 5.0, 4, variant).unwrap();
            assert_eq!(control(&g, &x, &p).unwrap(), vec![0.0; 4]);
            let xdot = closed_loop_field(&g, &x, &p, &[0.0; 4]).unwrap();
            assert_eq!(xdot, vec![0.0; 4]);
        }
    }

    #[test]
    fn disturbance_is_added() {
        let p = ProtocolParams::uniform(rho(), 0.0, 1.0, 2, Variant::A).unwrap();
        let xdot = closed_loop_field(&edge(), &[0.0, 0.0], &p, &[0.5, -0.25]).unwrap();
        assert_eq!(xdot, vec![0.5, -0.25]);
    }

    #[test]
    fn dimension_checks() {
        let p = ProtocolParams::uniform(rho(), 0.0, 1.0, 2, Variant::A).unwrap();
        assert!(control_a(&edge(), &[1.0], &p).is_err());
        assert!(closed_loop_field(&edge(), &[1.0, 2.0], &p, &[0.0]).is_err());
        let p3 = ProtocolParams::uniform(rho(), 0.0, 1.0, 3, Variant::B).unwrap();
        assert!(control_b(&edge(), &[1.0, 2.0], &p3).is_err());
    }

    #[test]
    fn params_validation() {
        assert!(ProtocolParams::new(rho(), -0.1, vec![1.0], Variant::A).is_err());
        assert!(ProtocolParams::new(rho(), 0.0, vec![1.0, 0.0], Variant::A).is_err());
        assert!(ProtocolParams::new(rho(), 0.0, vec![], Variant::A).is_err());
        let p = ProtocolParams::new(rho(), 0.0, vec![2.0, 1.0, 3.0], Variant::B).unwrap();
        assert_eq!(p.min_gain(), 1.0);
        assert!(!p.has_equal_gains());
    }

    #[test]
    fn schedule_validation() {
        let p = ProtocolParams::uniform(rho(), 0.0, 1.0, 3, Variant::A).unwrap();
        let s = GainSchedule::PerTopology(vec![p.clone(), p.clone()]);
        assert!(s.validate(2, 3).is_ok());
        assert!(s.validate(3, 3).is_err());
        assert!(s.validate(2, 4).is_err());
        let mut pb = p.clone();
        pb.variant = Variant::B;
        assert!(GainSchedule::PerTopology(vec![p, pb]).validate(2, 3).is_err());
    }
}
