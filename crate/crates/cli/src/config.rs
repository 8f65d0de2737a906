//! Experiment configuration and its resolution into simulator inputs.

use std::path::PathBuf;

use anyhow::{anyhow, bail, Context, Result};
use consensus_core::gains::{
    design_t3_switched_a, design_t4_static_a, design_t5_switched_b, disturbance_norm_bound,
};
use consensus_core::sim::{DEFAULT_DWELL, DEFAULT_RECORD_EVERY, QUICK_STEP};
use consensus_core::{
    analysis::DEFAULT_SETTLE_TOL, DisturbanceModel, Error, GainCertificate, GainSchedule,
    ProtocolParams, RhoParams, SimOptions, SwitchedNetwork, Theorem, Variant, WeightedGraph,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// A gain given as one number for every agent or one per agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Kappa {
    Uniform(f64),
    PerAgent(Vec<f64>),
}

impl Kappa {
    fn expand(&self, n: usize) -> Vec<f64> {
        match self {
            Kappa::Uniform(k) => vec![*k; n],
            Kappa::PerAgent(v) => v.clone(),
        }
    }
}

/// Explicit protocol parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolSpec {
    pub variant: Variant,
    pub rho: RhoParams,
    pub zeta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<Kappa>,
    /// One gain set per graph, applied while that graph is active.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa_per_topology: Option<Vec<Kappa>>,
}

/// Gains computed from one of the theorems.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignSpec {
    pub theorem: Theorem,
    pub rho: RhoParams,
    /// Required for t4 and t5.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_c: Option<f64>,
    /// Defaults to the Euclidean norm of the disturbance model's bounds.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub disturbance_bound: Option<f64>,
    #[serde(default = "one")]
    pub margin: f64,
    /// t3 only: one uniform gain per graph.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub topology_gains: Option<Vec<f64>>,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    /// Drives any randomness the run needs (currently the default schedule).
    #[serde(default)]
    pub seed: u64,
    pub graphs: Vec<WeightedGraph>,
    /// `[t_start, graph_index]` pairs. When absent a single graph is used
    /// throughout, and several graphs switch at random every `dwell_min`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<Vec<(f64, usize)>>,
    #[serde(default = "default_dwell")]
    pub dwell_min: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub protocol: Option<ProtocolSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub design: Option<DesignSpec>,
    #[serde(default = "zero_disturbance")]
    pub disturbance: DisturbanceModel,
    pub x0: Vec<f64>,
    #[serde(default = "default_step")]
    pub h: f64,
    pub t_end: f64,
    #[serde(default = "default_record_every")]
    pub record_every: usize,
    #[serde(default)]
    pub record_controls: bool,
    #[serde(default = "default_tol")]
    pub settle_tol: f64,
    /// Declared bound for runs with explicit gains; designs carry their own.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_c: Option<f64>,
    #[serde(default)]
    pub output: OutputSpec,
}

fn default_dwell() -> f64 {
    DEFAULT_DWELL
}
fn zero_disturbance() -> DisturbanceModel {
    DisturbanceModel::Zero
}
fn default_step() -> f64 {
    QUICK_STEP
}
fn default_record_every() -> usize {
    DEFAULT_RECORD_EVERY
}
fn default_tol() -> f64 {
    DEFAULT_SETTLE_TOL
}

/// Everything [`consensus_core::simulate`] needs, plus the certificate when
/// the gains were designed.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub network: SwitchedNetwork,
    pub gains: GainSchedule,
    pub certificate: Option<GainCertificate>,
    pub t_c: Option<f64>,
    pub options: SimOptions,
}

fn theorem_label(t: Theorem) -> &'static str {
    match t {
        Theorem::T3FixedTimeA => "Theorem 3 (t3)",
        Theorem::T4PredefinedStaticA => "Theorem 4 (t4)",
        Theorem::T5PredefinedSwitchedB => "Theorem 5 (t5)",
    }
}

impl SimConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).context("invalid experiment configuration")
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        Self::from_json(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn n(&self) -> Result<usize> {
        self.graphs
            .first()
            .map(WeightedGraph::n)
            .ok_or_else(|| anyhow!("graphs: at least one graph is required"))
    }

    /// The parameter vector from whichever of `protocol` / `design` is set.
    pub fn rho(&self) -> Result<RhoParams> {
        match (&self.protocol, &self.design) {
            (Some(p), _) => Ok(p.rho),
            (None, Some(d)) => Ok(d.rho),
            (None, None) => bail!("config needs either `protocol` or `design`"),
        }
    }

    pub fn network(&self) -> Result<SwitchedNetwork> {
        let n = self.n()?;
        for (i, g) in self.graphs.iter().enumerate() {
            if g.n() != n {
                bail!("graphs[{i}]: has {} vertices, graphs[0] has {n}", g.n());
            }
        }
        let network = match &self.schedule {
            Some(s) => SwitchedNetwork::new(self.graphs.clone(), s.clone(), self.dwell_min),
            None if self.graphs.len() == 1 => {
                SwitchedNetwork::new(self.graphs.clone(), vec![(0.0, 0)], self.dwell_min)
            }
            None => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                SwitchedNetwork::random_schedule(self.graphs.clone(), self.dwell_min, self.t_end, &mut rng)
            }
        };
        network.context("schedule")
    }

    /// Disturbance norm bound used by designs.
    pub fn disturbance_bound(&self) -> Result<f64> {
        let n = self.n()?;
        if let Some(l) = self.design.as_ref().and_then(|d| d.disturbance_bound) {
            return Ok(l);
        }
        Ok(disturbance_norm_bound(&self.disturbance.bounds(n).context("disturbance")?))
    }

    /// Designs gains under `design` with `theorem` (or the config's own
    /// theorem when `None`).
    pub fn certificate(&self, theorem: Option<Theorem>, margin: Option<f64>) -> Result<GainCertificate> {
        let d = self
            .design
            .as_ref()
            .ok_or_else(|| anyhow!("design: missing (needed to compute gains)"))?;
        let theorem = theorem.unwrap_or(d.theorem);
        let margin = margin.unwrap_or(d.margin);
        let l = self.disturbance_bound()?;
        let label = theorem_label(theorem);
        let need_tc = || d.t_c.ok_or_else(|| anyhow!("design.t_c: required by {label}"));
        let result = match theorem {
            Theorem::T4PredefinedStaticA => {
                if self.graphs.len() != 1 {
                    bail!(
                        "graphs: {label} certifies a static network, but {} graphs are listed",
                        self.graphs.len()
                    );
                }
                design_t4_static_a(&self.graphs[0], d.rho, need_tc()?, l, margin)
            }
            Theorem::T3FixedTimeA => design_t3_switched_a(&self.graphs, d.rho, l, d.topology_gains.as_deref()),
            Theorem::T5PredefinedSwitchedB => design_t5_switched_b(&self.graphs, d.rho, need_tc()?, l, margin),
        };
        result.map_err(|e| match e {
            Error::Disconnected { index } => anyhow!(
                "graphs[{index}]: disconnected; {label} requires every topology to be connected"
            ),
            other => anyhow!("design: {other}"),
        })
    }

    fn explicit_gains(&self, p: &ProtocolSpec, n: usize) -> Result<GainSchedule> {
        let build = |k: &Kappa, what: &str| {
            if let Kappa::PerAgent(v) = k {
                if v.len() != n {
                    bail!("{what}: expected {n} gains, found {}", v.len());
                }
            }
            ProtocolParams::new(p.rho, p.zeta, k.expand(n), p.variant).with_context(|| what.to_string())
        };
        match (&p.kappa, &p.kappa_per_topology) {
            (Some(k), None) => Ok(build(k, "protocol.kappa")?.into()),
            (None, Some(ks)) => {
                if ks.len() != self.graphs.len() {
                    bail!(
                        "protocol.kappa_per_topology: {} gain sets for {} graphs",
                        ks.len(),
                        self.graphs.len()
                    );
                }
                let sets = ks
                    .iter()
                    .enumerate()
                    .map(|(i, k)| build(k, &format!("protocol.kappa_per_topology[{i}]")))
                    .collect::<Result<Vec<_>>>()?;
                Ok(GainSchedule::PerTopology(sets))
            }
            (Some(_), Some(_)) => bail!("protocol: give either `kappa` or `kappa_per_topology`, not both"),
            (None, None) => bail!("protocol: `kappa` or `kappa_per_topology` is required"),
        }
    }

    /// Validates the whole configuration and prepares the simulator inputs.
    pub fn resolve(&self) -> Result<Resolved> {
        let n = self.n()?;
        if self.x0.len() != n {
            bail!("x0: expected {n} entries, found {}", self.x0.len());
        }
        if let Some(bad) = self.x0.iter().position(|v| !v.is_finite()) {
            bail!("x0[{bad}]: not a finite number");
        }
        if !(self.settle_tol.is_finite() && self.settle_tol > 0.0) {
            bail!("settle_tol: must be positive");
        }
        self.disturbance.validate(n).context("disturbance")?;
        let network = self.network()?;
        let (gains, certificate, t_c) = match (&self.protocol, &self.design) {
            (Some(_), Some(_)) => bail!("config: give either `protocol` or `design`, not both"),
            (None, None) => bail!("config: either explicit gains (`protocol`) or a design directive (`design`) is required"),
            (Some(p), None) => {
                if let Some(t) = self.t_c {
                    if !(t.is_finite() && t > 0.0) {
                        bail!("t_c: must be positive");
                    }
                }
                (self.explicit_gains(p, n)?, None, self.t_c)
            }
            (None, Some(_)) => {
                if self.t_c.is_some() {
                    bail!("t_c: set the bound in `design.t_c` when gains are designed");
                }
                let cert = self.certificate(None, None)?;
                (cert.gains.clone(), Some(cert.clone()), cert.t_c)
            }
        };
        let options = SimOptions {
            h: self.h,
            t_end: self.t_end,
            record_every: self.record_every,
            record_controls: self.record_controls,
        };
        Ok(Resolved {
            network,
            gains,
            certificate,
            t_c,
            options,
        })
    }
}
