//! Gain design for the three convergence results and independent
//! re-verification of the resulting certificates.
//!
//! | theorem | protocol | network  | conditions                                          |
//! |---------|----------|----------|-----------------------------------------------------|
//! | `T3`    | A        | switched | `kappa zeta >= L` (fixed time, no explicit bound)   |
//! | `T4`    | A        | static   | `kappa_i >= n gamma / (lambda_2 T_c)`, `kappa zeta >= L` |
//! | `T5`    | B        | switched | `kappa_i >= M gamma / (lambda_2* T_c)`, `zeta >= L / (kappa sqrt(lambda_2*))` |
//!
//! `kappa` is the smallest agent gain, `M` the smallest edge count and
//! `lambda_2*` the smallest algebraic connectivity over the collection.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fixed_time::RhoParams;
use crate::graph::{WeightedGraph, CONNECTIVITY_TOL};
use crate::protocol::{GainSchedule, ProtocolParams, Variant};

/// Time budget used to size per-topology gains for the fixed-time design,
/// which has no budget of its own.
pub const T3_REFERENCE_TC: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Theorem {
    /// Protocol A, arbitrary switching among connected graphs, fixed time.
    #[serde(rename = "t3")]
    T3FixedTimeA,
    /// Protocol A, static connected graph, predefined time.
    #[serde(rename = "t4")]
    T4PredefinedStaticA,
    /// Protocol B, arbitrary switching among connected graphs, predefined time.
    #[serde(rename = "t5")]
    T5PredefinedSwitchedB,
}

impl Theorem {
    pub fn variant(self) -> Variant {
        match self {
            Theorem::T3FixedTimeA | Theorem::T4PredefinedStaticA => Variant::A,
            Theorem::T5PredefinedSwitchedB => Variant::B,
        }
    }
}

/// `lhs >= rhs`, with `slack = lhs - rhs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Inequality {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
}

impl Inequality {
    fn new(name: impl Into<String>, lhs: f64, rhs: f64) -> Self {
        Self {
            name: name.into(),
            lhs,
            rhs,
            slack: lhs - rhs,
        }
    }

    pub fn holds(&self) -> bool {
        self.slack >= 0.0
    }

    /// Slack relative to the right-hand side.
    pub fn relative_slack(&self) -> f64 {
        if self.rhs == 0.0 {
            self.slack
        } else {
            self.slack / self.rhs.abs()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainCertificate {
    pub theorem: Theorem,
    pub gains: GainSchedule,
    /// Predefined time; absent for the fixed-time design.
    pub t_c: Option<f64>,
    /// Bound `L` on the Euclidean norm of the disturbance vector.
    pub disturbance_bound: f64,
    pub settling_bound: f64,
    pub connectivity: Vec<f64>,
    pub edge_counts: Vec<usize>,
    pub inequalities: Vec<Inequality>,
    pub notes: Vec<String>,
}

impl GainCertificate {
    pub fn holds(&self) -> bool {
        self.inequalities.iter().all(Inequality::holds)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertificateReport {
    pub theorem: Theorem,
    pub passed: bool,
    pub entries: Vec<Inequality>,
    pub notes: Vec<String>,
}

/// Euclidean norm bound from per-agent bounds `|d_i| <= L_i`.
pub fn disturbance_norm_bound(per_agent: &[f64]) -> f64 {
    per_agent.iter().map(|l| l * l).sum::<f64>().sqrt()
}

/// `scale * gamma / (lambda_2 * T_c)` for each connectivity value. With
/// `scale = n` this is the static protocol-A requirement per topology, with
/// `scale = M` the protocol-B one.
pub fn per_topology_gains(scale: f64, gamma: f64, connectivity: &[f64], t_c: f64) -> Vec<f64> {
    connectivity
        .iter()
        .map(|l2| required_gain(scale, gamma, *l2, t_c))
        .collect()
}

fn required_gain(scale: f64, gamma: f64, lambda2: f64, t_c: f64) -> f64 {
    scale * gamma / (lambda2 * t_c)
}

/// Smallest `zeta` with `kappa * zeta >= bound` in floating point.
fn offset_for(bound: f64, kappa: f64) -> f64 {
    let mut zeta = bound / kappa;
    while kappa * zeta < bound {
        zeta = zeta.next_up();
    }
    zeta
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")))
    }
}

fn check_inputs(t_c: Option<f64>, l: f64, margin: f64) -> Result<()> {
    if let Some(t) = t_c {
        check_positive("T_c", t)?;
    }
    if !(l.is_finite() && l >= 0.0) {
        return Err(Error::InvalidArgument(format!("disturbance bound must be >= 0, got {l}")));
    }
    if !(margin.is_finite() && margin >= 1.0) {
        return Err(Error::InvalidArgument(format!("margin must be >= 1, got {margin}")));
    }
    Ok(())
}

/// Connectivity of each graph; rejects empty, disconnected or mismatched
/// collections.
fn collection_connectivity(graphs: &[WeightedGraph]) -> Result<Vec<f64>> {
    let first = graphs
        .first()
        .ok_or_else(|| Error::InvalidArgument("empty graph collection".into()))?;
    graphs
        .iter()
        .enumerate()
        .map(|(index, g)| {
            if g.n() != first.n() {
                return Err(Error::DimensionMismatch {
                    expected: first.n(),
                    found: g.n(),
                });
            }
            if g.n() < 2 || !g.is_connected() {
                return Err(Error::Disconnected { index });
            }
            g.algebraic_connectivity()
        })
        .collect()
}

fn min_of(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Uniform gains for protocol A on one static graph.
pub fn design_t4_static_a(
    g: &WeightedGraph,
    rho: RhoParams,
    t_c: f64,
    l: f64,
    margin: f64,
) -> Result<GainCertificate> {
    check_inputs(Some(t_c), l, margin)?;
    let lambda2 = collection_connectivity(std::slice::from_ref(g))?[0];
    let gamma = rho.settling_bound();
    let kappa = margin * required_gain(g.n() as f64, gamma, lambda2, t_c);
    let zeta = offset_for(l, kappa);
    let params = ProtocolParams::uniform(rho, zeta, kappa, g.n(), Variant::A)?;
    let mut cert = GainCertificate {
        theorem: Theorem::T4PredefinedStaticA,
        gains: params.into(),
        t_c: Some(t_c),
        disturbance_bound: l,
        settling_bound: gamma,
        connectivity: vec![lambda2],
        edge_counts: vec![g.edge_count()],
        inequalities: Vec::new(),
        notes: Vec::new(),
    };
    cert.inequalities = evaluate(&cert, std::slice::from_ref(g))?.entries;
    Ok(cert)
}

/// Protocol A under switching. `topology_gains` gives one uniform gain per
/// graph; when absent each graph gets `n gamma / lambda_2(X_l)` (the static
/// design at a one-second reference budget). `zeta` is sized so that the
/// smallest gain times `zeta` covers `l`.
pub fn design_t3_switched_a(
    graphs: &[WeightedGraph],
    rho: RhoParams,
    l: f64,
    topology_gains: Option<&[f64]>,
) -> Result<GainCertificate> {
    check_inputs(None, l, 1.0)?;
    let connectivity = collection_connectivity(graphs)?;
    let n = graphs[0].n();
    let gamma = rho.settling_bound();
    let kappas = match topology_gains {
        Some(k) => {
            if k.len() != graphs.len() {
                return Err(Error::DimensionMismatch {
                    expected: graphs.len(),
                    found: k.len(),
                });
            }
            k.to_vec()
        }
        None => per_topology_gains(n as f64, gamma, &connectivity, T3_REFERENCE_TC),
    };
    let zeta = offset_for(l, min_of(&kappas));
    let sets = kappas
        .iter()
        .map(|k| ProtocolParams::uniform(rho, zeta, *k, n, Variant::A))
        .collect::<Result<Vec<_>>>()?;
    let mut cert = GainCertificate {
        theorem: Theorem::T3FixedTimeA,
        gains: GainSchedule::PerTopology(sets),
        t_c: None,
        disturbance_bound: l,
        settling_bound: gamma,
        connectivity,
        edge_counts: graphs.iter().map(WeightedGraph::edge_count).collect(),
        inequalities: Vec::new(),
        notes: Vec::new(),
    };
    cert.inequalities = evaluate(&cert, graphs)?.entries;
    Ok(cert)
}

/// Uniform gains for protocol B valid under arbitrary switching within the
/// collection.
pub fn design_t5_switched_b(
    graphs: &[WeightedGraph],
    rho: RhoParams,
    t_c: f64,
    l: f64,
    margin: f64,
) -> Result<GainCertificate> {
    check_inputs(Some(t_c), l, margin)?;
    let connectivity = collection_connectivity(graphs)?;
    let n = graphs[0].n();
    let lambda2_star = min_of(&connectivity);
    let m_min = graphs.iter().map(WeightedGraph::edge_count).min().unwrap_or(0);
    let gamma = rho.settling_bound();
    let kappa = margin * required_gain(m_min as f64, gamma, lambda2_star, t_c);
    let zeta = l / (kappa * lambda2_star.sqrt());
    let params = ProtocolParams::uniform(rho, zeta, kappa, n, Variant::B)?;
    let mut cert = GainCertificate {
        theorem: Theorem::T5PredefinedSwitchedB,
        gains: params.into(),
        t_c: Some(t_c),
        disturbance_bound: l,
        settling_bound: gamma,
        connectivity,
        edge_counts: graphs.iter().map(WeightedGraph::edge_count).collect(),
        inequalities: Vec::new(),
        notes: Vec::new(),
    };
    let report = evaluate(&cert, graphs)?;
    cert.inequalities = report.entries;
    cert.notes = report.notes;
    Ok(cert)
}

/// Re-derives every condition of the certificate's theorem from the graphs
/// and parameters, ignoring the stored inequalities. Problems are reported
/// as failed entries, never as errors.
pub fn verify_certificate(cert: &GainCertificate, graphs: &[WeightedGraph]) -> CertificateReport {
    evaluate(cert, graphs).unwrap_or_else(|e| CertificateReport {
        theorem: cert.theorem,
        passed: false,
        entries: Vec::new(),
        notes: vec![format!("certificate could not be evaluated: {e}")],
    })
}

fn evaluate(cert: &GainCertificate, graphs: &[WeightedGraph]) -> Result<CertificateReport> {
    let mut entries = Vec::new();
    let mut notes = Vec::new();
    if graphs.is_empty() {
        return Err(Error::InvalidArgument("empty graph collection".into()));
    }
    let n = graphs[0].n();
    cert.gains.validate(graphs.len(), n)?;
    let sets = cert.gains.all();
    let rho = sets[0].rho;
    if sets.iter().any(|p| p.rho != rho) {
        return Err(Error::InvalidParams("gain sets disagree on rho".into()));
    }
    if cert.gains.variant() != cert.theorem.variant() {
        notes.push(format!(
            "protocol variant {:?} does not match the theorem's variant {:?}",
            cert.gains.variant(),
            cert.theorem.variant()
        ));
    }
    let gamma = rho.settling_bound();
    let connectivity: Vec<f64> = graphs
        .iter()
        .map(|g| if g.n() < 2 { Ok(0.0) } else { g.algebraic_connectivity() })
        .collect::<Result<_>>()?;
    for (l, g) in graphs.iter().enumerate() {
        entries.push(Inequality::new(
            format!("lambda_2(X_{l}) > 0 (connected)"),
            connectivity[l],
            CONNECTIVITY_TOL,
        ));
        if !g.is_connected() {
            notes.push(format!("graph {l} is disconnected"));
        }
    }
    let l_bound = cert.disturbance_bound;
    let need_tc = || {
        cert.t_c
            .ok_or_else(|| Error::InvalidArgument("predefined-time certificate without T_c".into()))
    };
    match cert.theorem {
        Theorem::T3FixedTimeA => {
            for (idx, p) in sets.iter().enumerate() {
                let label = if sets.len() > 1 {
                    format!(" [topology {idx}]")
                } else {
                    String::new()
                };
                entries.push(Inequality::new(
                    format!("kappa * zeta >= L{label}"),
                    p.min_gain() * p.zeta,
                    l_bound,
                ));
            }
        }
        Theorem::T4PredefinedStaticA => {
            if graphs.len() != 1 {
                notes.push(format!(
                    "static design certifies exactly one topology, got {}",
                    graphs.len()
                ));
                entries.push(Inequality::new("single topology", 1.0, graphs.len() as f64));
            }
            let t_c = need_tc()?;
            for (idx, p) in sets.iter().enumerate() {
                let l2 = connectivity[idx.min(connectivity.len() - 1)];
                entries.push(Inequality::new(
                    "kappa_i >= n gamma / (lambda_2 T_c)",
                    p.min_gain(),
                    required_gain(n as f64, gamma, l2, t_c),
                ));
                entries.push(Inequality::new("kappa * zeta >= L", p.min_gain() * p.zeta, l_bound));
            }
        }
        Theorem::T5PredefinedSwitchedB => {
            let t_c = need_tc()?;
            let lambda2_star = min_of(&connectivity);
            let m_min = graphs.iter().map(WeightedGraph::edge_count).min().unwrap_or(0);
            let kappa = cert.gains.min_gain();
            let kappa_max = sets
                .iter()
                .flat_map(|p| p.kappa.iter().copied())
                .fold(f64::NEG_INFINITY, f64::max);
            for p in sets {
                entries.push(Inequality::new(
                    "kappa_i >= M gamma / (lambda_2* T_c)",
                    p.min_gain(),
                    required_gain(m_min as f64, gamma, lambda2_star, t_c),
                ));
                entries.push(Inequality::new(
                    "zeta >= L / (kappa sqrt(lambda_2*)), kappa = min kappa_i",
                    p.zeta,
                    l_bound / (kappa * lambda2_star.sqrt()),
                ));
            }
            notes.push(format!(
                "the zeta condition uses kappa = min kappa_i = {kappa}; with kappa = max kappa_i = {kappa_max} it would read zeta >= {}",
                l_bound / (kappa_max * lambda2_star.sqrt())
            ));
        }
    }
    Ok(CertificateReport {
        theorem: cert.theorem,
        passed: entries.iter().all(Inequality::holds),
        entries,
        notes,
    })
}
