//! Single experiment runs: simulate, analyse, write the trace and report.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use consensus_core::analysis::{
    average_consensus_check, lyapunov_trace_a, lyapunov_trace_b, AverageConsensusReport,
};
use consensus_core::fixed_time::{lyapunov_rate_check, RateCheck, RateCheckOptions};
use consensus_core::gains::{verify_certificate, CertificateReport};
use consensus_core::sim::TraceMeta;
use consensus_core::{
    detect_settling, simulate, GainCertificate, SettlingReport, SimTrace, SwitchedNetwork, Theorem,
    Variant,
};
use serde::Serialize;

use crate::config::{Resolved, SimConfig};

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub seed: u64,
    pub n: usize,
    pub variant: Variant,
    pub h: f64,
    pub t_end: f64,
    pub schedule: Vec<(f64, usize)>,
    pub t_c: Option<f64>,
    pub certificate: Option<GainCertificate>,
    pub certificate_check: Option<CertificateReport>,
    pub settling: Option<SettlingReport>,
    pub lyapunov: Option<RateCheck>,
    pub average_consensus: Option<AverageConsensusReport>,
    /// Set when the simulation itself failed (e.g. blew up).
    pub failure: Option<String>,
    pub bound_satisfied: Option<bool>,
    pub success: bool,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub report: ExperimentReport,
    pub trace: Option<SimTrace>,
}

/// Largest Lyapunov value among samples already inside the settling band.
/// Below it the trace is dominated by chatter and is not rate checked.
pub fn settled_floor(values: &[f64], diameters: &[f64], tol: f64) -> f64 {
    values
        .iter()
        .zip(diameters)
        .filter(|(_, d)| **d <= tol)
        .map(|(v, _)| *v)
        .fold(0.0, f64::max)
}

/// Rate check of the Lyapunov function the certificate's theorem uses;
/// `None` for the fixed-time design, which has no predefined time.
pub fn lyapunov_check(
    trace: &SimTrace,
    cert: &GainCertificate,
    network: &SwitchedNetwork,
    tol: f64,
) -> Result<Option<RateCheck>> {
    let Some(t_c) = cert.t_c else {
        return Ok(None);
    };
    let values = match cert.theorem {
        Theorem::T3FixedTimeA => return Ok(None),
        Theorem::T4PredefinedStaticA => lyapunov_trace_a(trace, &network.graphs()[0])?,
        Theorem::T5PredefinedSwitchedB => {
            let lambda2_star = cert.connectivity.iter().copied().fold(f64::INFINITY, f64::min);
            let m = cert.edge_counts.iter().copied().min().unwrap_or(0);
            lyapunov_trace_b(trace, lambda2_star, m)?
        }
    };
    let rho = cert.gains.all()[0].rho;
    let opts = RateCheckOptions {
        floor: settled_floor(&values, &trace.diameter, tol),
        ..RateCheckOptions::default()
    };
    Ok(Some(lyapunov_rate_check(&trace.times, &values, &rho, t_c, opts)?))
}

/// Runs a validated configuration. Configuration errors are returned as
/// errors; a simulation that fails produces a failed report instead.
pub fn run_experiment(cfg: &SimConfig) -> Result<ExperimentOutcome> {
    let resolved = cfg.resolve()?;
    run_resolved(cfg, &resolved)
}

pub fn run_resolved(cfg: &SimConfig, r: &Resolved) -> Result<ExperimentOutcome> {
    let n = r.network.n();
    let certificate_check = r
        .certificate
        .as_ref()
        .map(|c| verify_certificate(c, r.network.graphs()));
    let mut report = ExperimentReport {
        seed: cfg.seed,
        n,
        variant: r.gains.variant(),
        h: r.options.h,
        t_end: r.options.t_end,
        schedule: r.network.schedule().to_vec(),
        t_c: r.t_c,
        certificate: r.certificate.clone(),
        certificate_check,
        settling: None,
        lyapunov: None,
        average_consensus: None,
        failure: None,
        bound_satisfied: None,
        success: false,
    };
    let trace = match simulate(&r.network, &cfg.x0, &r.gains, &cfg.disturbance, &r.options) {
        Ok(t) => t,
        Err(e) => {
            report.failure = Some(e.to_string());
            report.bound_satisfied = r.t_c.map(|_| false);
            return Ok(ExperimentOutcome { report, trace: None });
        }
    };
    let settling = detect_settling(&trace, cfg.settle_tol, r.t_c);
    report.bound_satisfied = settling.bound_satisfied;
    report.settling = Some(settling);
    if let Some(cert) = &r.certificate {
        report.lyapunov = lyapunov_check(&trace, cert, &r.network, cfg.settle_tol)?;
    }
    report.average_consensus = Some(average_consensus_check(&trace, cfg.settle_tol));
    report.success = report.bound_satisfied != Some(false)
        && report.certificate_check.as_ref().is_none_or(|c| c.passed);
    Ok(ExperimentOutcome {
        report,
        trace: Some(trace),
    })
}

/// Writes the trace as CSV: `t, x_1..x_n, sigma, [u_1..u_n,] V_diam`.
/// Floats use Rust's shortest round-trip formatting, so output is
/// reproducible bit for bit.
pub fn write_trace_csv<W: Write>(trace: &SimTrace, out: W) -> Result<()> {
    let n = trace.n();
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["t".to_string()];
    header.extend((1..=n).map(|i| format!("x_{i}")));
    header.push("sigma".into());
    if trace.controls.is_some() {
        header.extend((1..=n).map(|i| format!("u_{i}")));
    }
    header.push("V_diam".into());
    w.write_record(&header)?;
    let mut row = Vec::with_capacity(header.len());
    for k in 0..trace.len() {
        row.clear();
        row.push(trace.times[k].to_string());
        row.extend(trace.states[k].iter().map(f64::to_string));
        row.push(trace.sigma[k].to_string());
        if let Some(u) = &trace.controls {
            row.extend(u[k].iter().map(f64::to_string));
        }
        row.push(trace.diameter[k].to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a trace written by [`write_trace_csv`]. The returned trace carries
/// placeholder metadata (protocol A, disturbed).
pub fn read_trace_csv<R: Read>(input: R) -> Result<SimTrace> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.clone();
    let n = header.iter().filter(|h| h.starts_with("x_")).count();
    let has_u = header.iter().any(|h| h.starts_with("u_"));
    if n == 0 || header.get(0) != Some("t") || header.get(n + 1) != Some("sigma") {
        bail!("not a trace file: expected columns t, x_1..x_n, sigma, ...");
    }
    let (mut times, mut states, mut sigma) = (Vec::new(), Vec::new(), Vec::new());
    let mut controls = has_u.then(Vec::new);
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let num = |i: usize| -> Result<f64> {
            rec.get(i)
                .context("short row")?
                .parse()
                .with_context(|| format!("row {}: column {}", line + 2, i + 1))
        };
        times.push(num(0)?);
        states.push((1..=n).map(num).collect::<Result<Vec<_>>>()?);
        sigma.push(
            rec.get(n + 1)
                .context("short row")?
                .parse()
                .with_context(|| format!("row {}: sigma", line + 2))?,
        );
        if let Some(c) = controls.as_mut() {
            c.push((n + 2..2 * n + 2).map(num).collect::<Result<Vec<_>>>()?);
        }
    }
    let meta = TraceMeta {
        variant: Variant::A,
        undisturbed: false,
        equal_gains: false,
        h: times.get(1).zip(times.first()).map_or(0.0, |(b, a)| b - a),
    };
    Ok(SimTrace::from_records(times, states, sigma, controls, meta)?)
}

pub fn write_trace_file(trace: &SimTrace, path: &Path) -> Result<()> {
    let f = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    write_trace_csv(trace, BufWriter::new(f))
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let f = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    let mut w = BufWriter::new(f);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    Ok(())
}

/// Runs `cfg` and writes the outputs named in its `output` section, or the
/// overrides when given.
pub fn run_and_write(
    cfg: &SimConfig,
    trace_path: Option<&Path>,
    report_path: Option<&Path>,
) -> Result<ExperimentOutcome> {
    let outcome = run_experiment(cfg)?;
    if let (Some(p), Some(tr)) = (trace_path.or(cfg.output.trace.as_deref()), &outcome.trace) {
        write_trace_file(tr, p)?;
    }
    if let Some(p) = report_path.or(cfg.output.report.as_deref()) {
        write_json(&outcome.report, p)?;
    }
    Ok(outcome)
}
