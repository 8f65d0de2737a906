//! Fixed-step explicit Euler integration of the switched, disturbed closed
//! loop.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::diameter_unchecked;
use crate::error::{check_len, Error, Result};
use crate::graph::WeightedGraph;
use crate::linalg::{mean_centered, norm2};
use crate::protocol::{control_into, GainSchedule, Variant};

pub const DEFAULT_DWELL: f64 = 0.05;
/// Relative slack on dwell checks, so gaps built as `k * dwell` pass.
const DWELL_RTOL: f64 = 1e-9;
/// Step used by the acceptance runs.
pub const ACCEPTANCE_STEP: f64 = 1e-5;
/// Step for quick exploratory runs.
pub const QUICK_STEP: f64 = 1e-4;
pub const DEFAULT_RECORD_EVERY: usize = 10;
pub const DEFAULT_FREQUENCY: f64 = 40.0;
pub const DEFAULT_PHASE_STEP: f64 = 0.1;

/// A topology collection plus a piecewise-constant switching signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawNetwork", into = "RawNetwork")]
pub struct SwitchedNetwork {
    graphs: Vec<WeightedGraph>,
    schedule: Vec<(f64, usize)>,
    dwell_min: f64,
}

#[derive(Serialize, Deserialize)]
struct RawNetwork {
    graphs: Vec<WeightedGraph>,
    schedule: Vec<(f64, usize)>,
    #[serde(default = "default_dwell")]
    dwell_min: f64,
}

fn default_dwell() -> f64 {
    DEFAULT_DWELL
}

impl TryFrom<RawNetwork> for SwitchedNetwork {
    type Error = Error;
    fn try_from(r: RawNetwork) -> Result<Self> {
        SwitchedNetwork::new(r.graphs, r.schedule, r.dwell_min)
    }
}

impl From<SwitchedNetwork> for RawNetwork {
    fn from(s: SwitchedNetwork) -> Self {
        RawNetwork {
            graphs: s.graphs,
            schedule: s.schedule,
            dwell_min: s.dwell_min,
        }
    }
}

impl SwitchedNetwork {
    pub fn new(graphs: Vec<WeightedGraph>, schedule: Vec<(f64, usize)>, dwell_min: f64) -> Result<Self> {
        let first = graphs
            .first()
            .ok_or_else(|| Error::InvalidSchedule("no graphs".into()))?;
        for g in &graphs {
            check_len(first.n(), g.n())?;
        }
        if !(dwell_min.is_finite() && dwell_min > 0.0) {
            return Err(Error::InvalidSchedule(format!("dwell_min must be positive, got {dwell_min}")));
        }
        match schedule.first() {
            Some((t, _)) if *t == 0.0 => {}
            _ => return Err(Error::InvalidSchedule("schedule must start at t = 0".into())),
        }
        for &(t, idx) in &schedule {
            if !t.is_finite() {
                return Err(Error::InvalidSchedule(format!("non-finite switch time {t}")));
            }
            if idx >= graphs.len() {
                return Err(Error::InvalidSchedule(format!(
                    "graph index {idx} out of range for {} graphs",
                    graphs.len()
                )));
            }
        }
        for w in schedule.windows(2) {
            let gap = w[1].0 - w[0].0;
            if !(gap > 0.0) {
                return Err(Error::InvalidSchedule("switch times must be strictly increasing".into()));
            }
            if gap < dwell_min * (1.0 - DWELL_RTOL) {
                return Err(Error::InvalidSchedule(format!(
                    "switch at t = {} follows the previous one after {gap} < dwell {dwell_min}",
                    w[1].0
                )));
            }
        }
        Ok(Self {
            graphs,
            schedule,
            dwell_min,
        })
    }

    /// One graph, never switching.
    pub fn fixed(g: WeightedGraph) -> Self {
        Self {
            graphs: vec![g],
            schedule: vec![(0.0, 0)],
            dwell_min: DEFAULT_DWELL,
        }
    }

    /// Switches every `dwell` seconds on `[0, t_end)` to a uniformly drawn
    /// graph different from the current one.
    pub fn random_schedule<R: Rng + ?Sized>(
        graphs: Vec<WeightedGraph>,
        dwell: f64,
        t_end: f64,
        rng: &mut R,
    ) -> Result<Self> {
        if graphs.is_empty() {
            return Err(Error::InvalidSchedule("no graphs".into()));
        }
        if !(dwell.is_finite() && dwell > 0.0 && t_end.is_finite() && t_end > 0.0) {
            return Err(Error::InvalidSchedule("dwell and t_end must be positive".into()));
        }
        let m = graphs.len();
        let mut schedule = vec![(0.0, rng.gen_range(0..m))];
        let mut k = 1;
        while (k as f64) * dwell < t_end {
            let prev = schedule[k - 1].1;
            let next = if m == 1 {
                0
            } else {
                (prev + rng.gen_range(1..m)) % m
            };
            schedule.push((k as f64 * dwell, next));
            k += 1;
        }
        Self::new(graphs, schedule, dwell)
    }

    pub fn graphs(&self) -> &[WeightedGraph] {
        &self.graphs
    }

    pub fn schedule(&self) -> &[(f64, usize)] {
        &self.schedule
    }

    pub fn dwell_min(&self) -> f64 {
        self.dwell_min
    }

    pub fn n(&self) -> usize {
        self.graphs[0].n()
    }

    /// Active graph index at `t`, right-continuous.
    pub fn sigma_at(&self, t: f64) -> Result<usize> {
        if !(t >= 0.0) {
            return Err(Error::InvalidArgument(format!("sigma is defined for t >= 0, got {t}")));
        }
        let pos = self.schedule.partition_point(|(ts, _)| *ts <= t);
        Ok(self.schedule[pos - 1].1)
    }
}

/// Additive disturbance `d(t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DisturbanceModel {
    Zero,
    /// `d_i(t) = L_i sin(frequency t + i phase_step)` with 1-based `i`.
    Sinusoid {
        amplitude: Vec<f64>,
        #[serde(default = "default_frequency")]
        frequency: f64,
        #[serde(default = "default_phase_step")]
        phase_step: f64,
    },
    /// Zero-order hold through tabulated samples; `values[k]` applies on
    /// `[times[k], times[k+1])`, and before `times[0]` nothing is applied.
    Table { times: Vec<f64>, values: Vec<Vec<f64>> },
}

fn default_frequency() -> f64 {
    DEFAULT_FREQUENCY
}

fn default_phase_step() -> f64 {
    DEFAULT_PHASE_STEP
}

impl DisturbanceModel {
    /// `sin(40 t + 0.1 i)` on every agent.
    pub fn benchmark(n: usize) -> Self {
        DisturbanceModel::Sinusoid {
            amplitude: vec![1.0; n],
            frequency: DEFAULT_FREQUENCY,
            phase_step: DEFAULT_PHASE_STEP,
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            DisturbanceModel::Zero => true,
            DisturbanceModel::Sinusoid { amplitude, .. } => amplitude.iter().all(|a| *a == 0.0),
            DisturbanceModel::Table { values, .. } => values.iter().flatten().all(|v| *v == 0.0),
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        match self {
            DisturbanceModel::Zero => Ok(()),
            DisturbanceModel::Sinusoid {
                amplitude,
                frequency,
                phase_step,
            } => {
                check_len(n, amplitude.len())?;
                if amplitude.iter().chain([frequency, phase_step]).any(|v| !v.is_finite()) {
                    return Err(Error::InvalidArgument("non-finite disturbance parameter".into()));
                }
                if amplitude.iter().any(|a| *a < 0.0) {
                    return Err(Error::InvalidArgument("disturbance amplitudes must be >= 0".into()));
                }
                Ok(())
            }
            DisturbanceModel::Table { times, values } => {
                check_len(times.len(), values.len())?;
                if times.windows(2).any(|w| !(w[1] > w[0])) || times.iter().any(|t| !t.is_finite()) {
                    return Err(Error::InvalidArgument(
                        "disturbance table times must be finite and strictly increasing".into(),
                    ));
                }
                for row in values {
                    check_len(n, row.len())?;
                    if row.iter().any(|v| !v.is_finite()) {
                        return Err(Error::InvalidArgument("non-finite disturbance sample".into()));
                    }
                }
                Ok(())
            }
        }
    }

    pub fn disturbance_at(&self, t: f64, n: usize) -> Result<Vec<f64>> {
        self.validate(n)?;
        let mut d = vec![0.0; n];
        self.fill(t, &mut d);
        Ok(d)
    }

    /// Per-agent bounds `L_i` with `|d_i(t)| <= L_i`.
    pub fn bounds(&self, n: usize) -> Result<Vec<f64>> {
        self.validate(n)?;
        Ok(match self {
            DisturbanceModel::Zero => vec![0.0; n],
            DisturbanceModel::Sinusoid { amplitude, .. } => amplitude.clone(),
            DisturbanceModel::Table { values, .. } => (0..n)
                .map(|i| values.iter().map(|row| row[i].abs()).fold(0.0, f64::max))
                .collect(),
        })
    }

    fn fill(&self, t: f64, d: &mut [f64]) {
        match self {
            DisturbanceModel::Zero => d.iter_mut().for_each(|v| *v = 0.0),
            DisturbanceModel::Sinusoid {
                amplitude,
                frequency,
                phase_step,
            } => {
                for (i, (di, a)) in d.iter_mut().zip(amplitude).enumerate() {
                    *di = a * (frequency * t + (i + 1) as f64 * phase_step).sin();
                }
            }
            DisturbanceModel::Table { times, values } => {
                let pos = times.partition_point(|ts| *ts <= t);
                if pos == 0 {
                    d.iter_mut().for_each(|v| *v = 0.0);
                } else {
                    d.copy_from_slice(&values[pos - 1]);
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimOptions {
    pub h: f64,
    pub t_end: f64,
    #[serde(default = "default_record_every")]
    pub record_every: usize,
    #[serde(default)]
    pub record_controls: bool,
}

fn default_record_every() -> usize {
    DEFAULT_RECORD_EVERY
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            h: QUICK_STEP,
            t_end: 1.0,
            record_every: DEFAULT_RECORD_EVERY,
            record_controls: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceMeta {
    pub variant: Variant,
    pub undisturbed: bool,
    pub equal_gains: bool,
    pub h: f64,
}

/// Recorded trajectory with per-sample diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimTrace {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub sigma: Vec<usize>,
    pub controls: Option<Vec<Vec<f64>>>,
    /// `max x - min x`.
    pub diameter: Vec<f64>,
    /// Euclidean norm of the mean-centred state.
    pub disagreement: Vec<f64>,
    pub meta: TraceMeta,
}

impl SimTrace {
    /// Rebuilds a trace from recorded columns, recomputing diagnostics.
    pub fn from_records(
        times: Vec<f64>,
        states: Vec<Vec<f64>>,
        sigma: Vec<usize>,
        controls: Option<Vec<Vec<f64>>>,
        meta: TraceMeta,
    ) -> Result<Self> {
        check_len(times.len(), states.len())?;
        check_len(times.len(), sigma.len())?;
        let n = states
            .first()
            .map(Vec::len)
            .ok_or_else(|| Error::InvalidArgument("empty trace".into()))?;
        if n == 0 {
            return Err(Error::InvalidArgument("trace has no agents".into()));
        }
        for s in &states {
            check_len(n, s.len())?;
            if s.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidArgument("trace contains non-finite states".into()));
            }
        }
        if let Some(c) = &controls {
            check_len(times.len(), c.len())?;
            for row in c {
                check_len(n, row.len())?;
            }
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument("trace times must be strictly increasing".into()));
        }
        let diameter = states.iter().map(|s| diameter_unchecked(s)).collect();
        let disagreement = states.iter().map(|s| norm2(&mean_centered(s))).collect();
        Ok(Self {
            times,
            states,
            sigma,
            controls,
            diameter,
            disagreement,
            meta,
        })
    }

    pub fn n(&self) -> usize {
        self.states[0].len()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_state(&self) -> &[f64] {
        self.states.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

/// Snaps schedule times to the step grid; returns `(step, graph)` pairs.
fn snap_schedule(net: &SwitchedNetwork, h: f64, steps: usize) -> Result<Vec<(usize, usize)>> {
    let mut out: Vec<(usize, usize)> = Vec::with_capacity(net.schedule.len());
    for &(t, idx) in &net.schedule {
        let k = (t / h).round();
        if k > steps as f64 {
            return Err(Error::InvalidSchedule(format!(
                "switch at t = {t} lies beyond t_end = {}",
                steps as f64 * h
            )));
        }
        let k = k as usize;
        if let Some(&(prev, _)) = out.last() {
            if ((k - prev.min(k)) as f64) * h < net.dwell_min * (1.0 - DWELL_RTOL) {
                return Err(Error::InvalidSchedule(format!(
                    "switch at t = {t} violates the dwell time after snapping to h = {h}"
                )));
            }
        }
        out.push((k, idx));
    }
    Ok(out)
}

/// Integrates `x' = u(x, sigma(t)) + d(t)` from `x0` with explicit Euler.
///
/// Sample `k` holds the state at `t_k = k h`, the topology active at `t_k`
/// and the control applied over `[t_k, t_{k+1})`. Every `record_every`-th
/// sample is kept, along with the first and the last.
pub fn simulate(
    net: &SwitchedNetwork,
    x0: &[f64],
    gains: &GainSchedule,
    dist: &DisturbanceModel,
    opts: &SimOptions,
) -> Result<SimTrace> {
    let n = net.n();
    check_len(n, x0.len())?;
    gains.validate(net.graphs.len(), n)?;
    dist.validate(n)?;
    if !(opts.h.is_finite() && opts.h > 0.0) {
        return Err(Error::InvalidArgument(format!("step must be positive, got {}", opts.h)));
    }
    if !(opts.t_end.is_finite() && opts.t_end > 0.0) {
        return Err(Error::InvalidArgument(format!("t_end must be positive, got {}", opts.t_end)));
    }
    if opts.record_every == 0 {
        return Err(Error::InvalidArgument("record_every must be at least 1".into()));
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("initial state must be finite".into()));
    }
    let steps = (opts.t_end / opts.h).round().max(1.0) as usize;
    let switches = snap_schedule(net, opts.h, steps)?;

    let capacity = steps / opts.record_every + 2;
    let mut times = Vec::with_capacity(capacity);
    let mut states = Vec::with_capacity(capacity);
    let mut sigmas = Vec::with_capacity(capacity);
    let mut controls = opts.record_controls.then(|| Vec::with_capacity(capacity));

    let mut x = x0.to_vec();
    let mut u = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut next_switch = 1;
    let mut sigma = switches[0].1;
    for k in 0..=steps {
        while next_switch < switches.len() && switches[next_switch].0 <= k {
            sigma = switches[next_switch].1;
            next_switch += 1;
        }
        let t = k as f64 * opts.h;
        let params = gains.for_topology(sigma);
        control_into(&net.graphs[sigma], &x, params, &mut u);
        if k % opts.record_every == 0 || k == steps {
            times.push(t);
            states.push(x.clone());
            sigmas.push(sigma);
            if let Some(c) = controls.as_mut() {
                c.push(u.clone());
            }
        }
        if k == steps {
            break;
        }
        dist.fill(t, &mut d);
        for ((xi, ui), di) in x.iter_mut().zip(&u).zip(&d) {
            *xi += opts.h * (ui + di);
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::BlowUp {
                t: (k + 1) as f64 * opts.h,
            });
        }
    }

    let meta = TraceMeta {
        variant: gains.variant(),
        undisturbed: dist.is_zero(),
        equal_gains: gains.has_equal_gains(),
        h: opts.h,
    };
    let diameter = states.iter().map(|s| diameter_unchecked(s)).collect();
    let disagreement = states.iter().map(|s| norm2(&mean_centered(s))).collect();
    Ok(SimTrace {
        times,
        states,
        sigma: sigmas,
        controls,
        diameter,
        disagreement,
        meta,
    })
}
