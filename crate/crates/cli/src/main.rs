use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use consensus_core::analysis::DEFAULT_SETTLE_TOL;
use consensus_core::gains::{
    design_t3_switched_a, design_t4_static_a, design_t5_switched_b, verify_certificate,
};
use consensus_core::ineq::run_lemma_suite;
use consensus_core::{detect_settling, scalar_settling_oracle, RhoParams, WeightedGraph};
use consensus_lab::experiment::{read_trace_csv, run_and_write, write_json};
use consensus_lab::reproduce::{render_table, Case, ReproOptions};
use consensus_lab::sweep::{thread_cap, write_summary, SweepGrid};
use consensus_lab::{reproduce, sweep, SimConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Parser)]
#[command(name = "consensus-lab", version, about = "Predefined-time consensus simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment from a JSON config.
    Simulate {
        config: PathBuf,
        /// Trace CSV path (overrides the config).
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Report JSON path (overrides the config).
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Compute gains from one of the theorems and print the certificate.
    DesignGains {
        /// JSON file with one graph or a list of graphs.
        #[arg(long)]
        graphs: PathBuf,
        #[arg(long, value_enum)]
        theorem: TheoremArg,
        /// alpha,beta,p,q,k
        #[arg(long, value_parser = parse_rho)]
        rho: RhoParams,
        #[arg(long)]
        t_c: Option<f64>,
        /// Bound on the Euclidean norm of the disturbance vector.
        #[arg(long, default_value_t = 0.0)]
        l: f64,
        #[arg(long, default_value_t = 1.0)]
        margin: f64,
        /// t3 only: comma-separated gain per graph.
        #[arg(long, value_delimiter = ',')]
        topology_gains: Option<Vec<f64>>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate gamma(rho), optionally against the scalar oracle.
    SettlingBound {
        #[arg(long, value_parser = parse_rho)]
        rho: RhoParams,
        /// Initial conditions for the oracle.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        x0: Vec<f64>,
        #[arg(long, default_value_t = 1e-6)]
        h: f64,
    },
    /// Settling analysis of a trace CSV.
    Analyze {
        trace: PathBuf,
        #[arg(long, default_value_t = DEFAULT_SETTLE_TOL)]
        tol: f64,
        #[arg(long)]
        t_c: Option<f64>,
    },
    /// Property checks.
    Verify {
        #[command(subcommand)]
        what: VerifyCommand,
    },
    /// Rerun a published example on calibrated stand-in topologies.
    Reproduce {
        #[arg(value_enum)]
        case: CaseArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Euler step; 1e-6 for example3 and table3, 1e-5 otherwise.
        #[arg(long)]
        h: Option<f64>,
        #[arg(long, default_value_t = 1.0)]
        t_end: f64,
        /// Also write the report as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Run a config template over a grid of rho values.
    Sweep {
        config: PathBuf,
        /// JSON grid: {"alpha": [...], "beta": [...], "p": [...], "q": [...], "k": [...]}
        #[arg(long)]
        grid: PathBuf,
        /// Summary CSV path; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Graph utilities.
    Graph {
        #[command(subcommand)]
        what: GraphCommand,
    },
}

#[derive(Subcommand)]
enum VerifyCommand {
    /// Randomised checks of the supporting inequalities.
    Lemmas {
        #[arg(long, default_value_t = 10_000)]
        cases: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Subcommand)]
enum GraphCommand {
    /// Generate a graph as JSON.
    Gen {
        #[arg(long, value_enum)]
        kind: GraphKind,
        #[arg(long)]
        n: usize,
        /// Extra-edge probability for random graphs.
        #[arg(long, default_value_t = 0.2)]
        p: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Rescale weights to this algebraic connectivity.
        #[arg(long)]
        lambda2: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum TheoremArg {
    T3,
    T4,
    T5,
}

#[derive(Clone, Copy, ValueEnum)]
enum CaseArg {
    Example1,
    Example2,
    Example3,
    Table3,
}

#[derive(Clone, Copy, ValueEnum)]
enum GraphKind {
    Path,
    Cycle,
    Star,
    Complete,
    Random,
}

fn parse_rho(s: &str) -> Result<RhoParams, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|e| format!("{x:?}: {e}")))
        .collect::<Result<_, _>>()?;
    let [alpha, beta, p, q, k] = v[..] else {
        return Err("expected alpha,beta,p,q,k".into());
    };
    RhoParams::new(alpha, beta, p, q, k).map_err(|e| e.to_string())
}

fn read_graphs(path: &Path) -> Result<Vec<WeightedGraph>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let value: serde_json::Value = serde_json::from_str(&text).with_context(|| format!("in {}", path.display()))?;
    let graphs = if value.is_array() {
        serde_json::from_value(value)?
    } else {
        vec![serde_json::from_value(value)?]
    };
    Ok(graphs)
}

fn emit_json<T: serde::Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => write_json(value, p),
        None => {
            let stdout = io::stdout();
            let mut w = stdout.lock();
            serde_json::to_writer_pretty(&mut w, value)?;
            writeln!(w)?;
            Ok(())
        }
    }
}

fn status(ok: bool) -> ExitCode {
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Simulate { config, trace, report } => {
            let cfg = SimConfig::load(&config)?;
            let out = run_and_write(&cfg, trace.as_deref(), report.as_deref())?;
            let r = &out.report;
            if let Some(f) = &r.failure {
                eprintln!("simulation failed: {f}");
            }
            if let Some(s) = &r.settling {
                println!(
                    "t_settle {}  T_c {}  bound satisfied {}",
                    s.t_settle.map_or("-".into(), |t| t.to_string()),
                    r.t_c.map_or("-".into(), |t| t.to_string()),
                    r.bound_satisfied.map_or("-".into(), |b| b.to_string()),
                );
            }
            if report.is_none() && cfg.output.report.is_none() {
                emit_json(r, None)?;
            }
            Ok(status(r.success))
        }
        Command::DesignGains {
            graphs,
            theorem,
            rho,
            t_c,
            l,
            margin,
            topology_gains,
            out,
        } => {
            let graphs = read_graphs(&graphs)?;
            let need_tc = || t_c.context("--t-c is required for this theorem");
            let cert = match theorem {
                TheoremArg::T3 => design_t3_switched_a(&graphs, rho, l, topology_gains.as_deref())?,
                TheoremArg::T4 => {
                    let [g] = &graphs[..] else {
                        bail!("t4 is for a single static graph; {} given", graphs.len());
                    };
                    design_t4_static_a(g, rho, need_tc()?, l, margin)?
                }
                TheoremArg::T5 => design_t5_switched_b(&graphs, rho, need_tc()?, l, margin)?,
            };
            let check = verify_certificate(&cert, &graphs);
            emit_json(&cert, out.as_deref())?;
            Ok(status(check.passed))
        }
        Command::SettlingBound { rho, x0, h } => {
            let gamma = rho.settling_bound();
            println!("gamma {gamma}");
            for x in x0 {
                let t = scalar_settling_oracle(&rho, x, h)?;
                println!("x0 {x}  oracle {t}  ratio {}", t / gamma);
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Analyze { trace, tol, t_c } => {
            let f = File::open(&trace).with_context(|| format!("cannot open {}", trace.display()))?;
            let tr = read_trace_csv(io::BufReader::new(f))?;
            let report = detect_settling(&tr, tol, t_c);
            emit_json(&report, None)?;
            Ok(status(report.bound_satisfied != Some(false)))
        }
        Command::Verify {
            what: VerifyCommand::Lemmas { cases, seed },
        } => {
            let report = run_lemma_suite(cases, seed);
            for o in &report.outcomes {
                println!(
                    "{:<40} cases {:>7}  violations {:>3}  worst margin {:.3e}",
                    o.name, o.cases, o.violations, o.worst_margin
                );
            }
            Ok(status(report.passed()))
        }
        Command::Reproduce { case, seed, h, t_end, json } => {
            let case = match case {
                CaseArg::Example1 => Case::Example1,
                CaseArg::Example2 => Case::Example2,
                CaseArg::Example3 => Case::Example3,
                CaseArg::Table3 => Case::Table3,
            };
            let report = reproduce(case, &ReproOptions { seed, h, t_end })?;
            print!("{}", render_table(&report));
            if let Some(p) = json {
                write_json(&report, &p)?;
            }
            Ok(status(report.passed))
        }
        Command::Sweep { config, grid, out } => {
            let cfg = SimConfig::load(&config)?;
            let text = std::fs::read_to_string(&grid).with_context(|| format!("cannot read {}", grid.display()))?;
            let grid: SweepGrid = serde_json::from_str(&text).with_context(|| format!("in {}", grid.display()))?;
            let rows = sweep(&cfg, &grid, thread_cap()?)?;
            match out {
                Some(p) => write_summary(&rows, BufWriter::new(File::create(&p)?))?,
                None => write_summary(&rows, io::stdout().lock())?,
            }
            Ok(status(rows.iter().all(|r| r.bound_satisfied != Some(false))))
        }
        Command::Graph {
            what: GraphCommand::Gen { kind, n, p, seed, lambda2, out },
        } => {
            let g = match kind {
                GraphKind::Path => WeightedGraph::path(n)?,
                GraphKind::Cycle => WeightedGraph::cycle(n)?,
                GraphKind::Star => WeightedGraph::star(n)?,
                GraphKind::Complete => WeightedGraph::complete(n)?,
                GraphKind::Random => WeightedGraph::random_connected(n, p, &mut ChaCha8Rng::seed_from_u64(seed))?,
            };
            let g = match lambda2 {
                Some(t) => g.scaled_to_connectivity(t)?,
                None => g,
            };
            emit_json(&g, out.as_deref())?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
