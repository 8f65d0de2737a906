//! Parameter sweeps over `rho` around a template configuration.

use anyhow::{bail, Context, Result};
use consensus_core::RhoParams;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::SimConfig;
use crate::experiment::run_experiment;

pub const THREADS_ENV: &str = "CONSENSUS_LAB_THREADS";

/// Values per parameter; an empty list keeps the template's value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepGrid {
    #[serde(default)]
    pub alpha: Vec<f64>,
    #[serde(default)]
    pub beta: Vec<f64>,
    #[serde(default)]
    pub p: Vec<f64>,
    #[serde(default)]
    pub q: Vec<f64>,
    #[serde(default)]
    pub k: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridPoint {
    pub alpha: f64,
    pub beta: f64,
    pub p: f64,
    pub q: f64,
    pub k: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PointStatus {
    Ok,
    Skipped,
    Failed,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub point: GridPoint,
    pub status: PointStatus,
    pub reason: Option<String>,
    pub t_settle: Option<f64>,
    pub t_c: Option<f64>,
    pub slack: Option<f64>,
    pub bound_satisfied: Option<bool>,
}

impl SweepGrid {
    /// Cartesian product in `alpha, beta, p, q, k` order.
    pub fn points(&self, base: RhoParams) -> Vec<GridPoint> {
        let axis = |v: &Vec<f64>, d: f64| if v.is_empty() { vec![d] } else { v.clone() };
        let mut out = Vec::new();
        for alpha in axis(&self.alpha, base.alpha) {
            for beta in axis(&self.beta, base.beta) {
                for p in axis(&self.p, base.p) {
                    for q in axis(&self.q, base.q) {
                        for k in axis(&self.k, base.k) {
                            out.push(GridPoint { alpha, beta, p, q, k });
                        }
                    }
                }
            }
        }
        out
    }
}

/// Thread cap from `CONSENSUS_LAB_THREADS`, if set.
pub fn thread_cap() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => {
            let n: usize = v
                .trim()
                .parse()
                .with_context(|| format!("{THREADS_ENV}={v:?} is not a thread count"))?;
            if n == 0 {
                bail!("{THREADS_ENV} must be at least 1");
            }
            Ok(Some(n))
        }
        Err(_) => Ok(None),
    }
}

fn with_rho(template: &SimConfig, rho: RhoParams) -> SimConfig {
    let mut cfg = template.clone();
    if let Some(p) = cfg.protocol.as_mut() {
        p.rho = rho;
    }
    if let Some(d) = cfg.design.as_mut() {
        d.rho = rho;
    }
    cfg
}

fn run_point(template: &SimConfig, point: GridPoint) -> SweepRow {
    let mut row = SweepRow {
        point,
        status: PointStatus::Skipped,
        reason: None,
        t_settle: None,
        t_c: None,
        slack: None,
        bound_satisfied: None,
    };
    let rho = match RhoParams::new(point.alpha, point.beta, point.p, point.q, point.k) {
        Ok(r) => r,
        Err(e) => {
            row.reason = Some(e.to_string());
            return row;
        }
    };
    match run_experiment(&with_rho(template, rho)) {
        Err(e) => row.reason = Some(format!("{e:#}")),
        Ok(out) => {
            let r = out.report;
            row.t_c = r.t_c;
            row.bound_satisfied = r.bound_satisfied;
            if let Some(f) = r.failure {
                row.status = PointStatus::Failed;
                row.reason = Some(f);
            } else {
                row.status = PointStatus::Ok;
                row.t_settle = r.settling.and_then(|s| s.t_settle);
                row.slack = row.t_c.zip(row.t_settle).map(|(tc, ts)| tc - ts);
            }
        }
    }
    row
}

/// Runs every grid point in parallel. Invalid points are kept with a
/// reason. Rows are sorted by slack, smallest first; rows without a slack
/// follow in grid order.
pub fn sweep(template: &SimConfig, grid: &SweepGrid, threads: Option<usize>) -> Result<Vec<SweepRow>> {
    let base = template.rho()?;
    let points = grid.points(base);
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder.build()?;
    let mut rows: Vec<SweepRow> =
        pool.install(|| points.par_iter().map(|p| run_point(template, *p)).collect());
    rows.sort_by(|a, b| match (a.slack, b.slack) {
        (Some(x), Some(y)) => x.total_cmp(&y),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => std::cmp::Ordering::Equal,
    });
    Ok(rows)
}

/// CSV summary: one line per grid point.
pub fn write_summary<W: std::io::Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["alpha", "beta", "p", "q", "k", "status", "t_settle", "t_c", "slack", "bound_satisfied", "reason"])?;
    let f = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
    for r in rows {
        let p = r.point;
        w.write_record([
            p.alpha.to_string(),
            p.beta.to_string(),
            p.p.to_string(),
            p.q.to_string(),
            p.k.to_string(),
            serde_json::to_value(r.status)?.as_str().unwrap_or_default().to_string(),
            f(r.t_settle),
            f(r.t_c),
            f(r.slack),
            r.bound_satisfied.map_or(String::new(), |b| b.to_string()),
            r.reason.clone().unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
