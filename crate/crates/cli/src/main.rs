//! `lifecd` command-line front end.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use lifecd::engine::DEFAULT_N_MAX_CAP;
use lifecd::export::{compare_csv, distribution_csv, sweep_csv, SweepRow};
use lifecd::sim::{derive_seeds, ks_distance};
use lifecd::{
    exact_distribution, golfar_bound, monte_carlo, parse_graph, run_lifecd, DistError,
    EngineConfig, EngineError, EngineReport, FailureGraph, GraphError, NodeId, OracleError,
    SimError, ValidationError,
};

#[derive(Parser, Debug)]
#[command(
    name = "lifecd",
    version,
    about = "Convergence-time distributions for max-consensus over lossy links"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Analytic distribution as `k,pmf,cdf`.
    Compute(Opts),
    /// Monte Carlo distribution as `k,pmf,cdf` plus a JSON metadata sidecar.
    Simulate(Opts),
    /// Analytic and simulated distributions side by side.
    Compare(Opts),
    /// Expected convergence time while one link's failure probability varies.
    Sweep(Opts),
    /// Smallest round count reached with probability at least `--tau`.
    Deadline(Opts),
    /// Exact distribution by enumerating informed sets (at most 20 nodes).
    Oracle(Opts),
}

#[derive(Args, Debug, Clone)]
struct Opts {
    /// Graph file with one `i,j,p` link per line.
    #[arg(long)]
    graph: PathBuf,
    /// Node initially holding the maximum.
    #[arg(long, default_value_t = NodeId(1))]
    source: NodeId,
    /// Largest acceptable truncated probability mass.
    #[arg(long, default_value = "1e-6")]
    eps: f64,
    /// Upper limit for the truncation length.
    #[arg(long = "nmax-cap", default_value_t = DEFAULT_N_MAX_CAP)]
    nmax_cap: usize,
    /// Monte Carlo runs.
    #[arg(long, default_value_t = 5000, value_parser = clap::value_parser!(u64).range(1..))]
    runs: u64,
    /// Master seed for all randomness.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Confidence level in (0, 1) for `deadline`.
    #[arg(long)]
    tau: Option<f64>,
    /// Link and grid for `sweep`, e.g. `3-5:0.01:0.99:0.02`.
    #[arg(long)]
    sweep: Option<SweepSpec>,
    /// Output file (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON metadata path for `simulate` (default `<out>.json`, or stderr).
    #[arg(long)]
    meta: Option<PathBuf>,
    /// Print the reduction log to stderr.
    #[arg(long)]
    trace: bool,
}

#[derive(Debug, Clone, PartialEq)]
struct SweepSpec {
    a: NodeId,
    b: NodeId,
    values: Vec<f64>,
}

impl FromStr for SweepSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        let [edge, start, stop, step] = parts[..] else {
            return Err("expected EDGE:START:STOP:STEP".into());
        };
        let (a, b) = edge
            .split_once('-')
            .ok_or_else(|| format!("link `{edge}` must look like `3-5`"))?;
        let a: NodeId = a.trim().parse().map_err(|e| format!("{e}"))?;
        let b: NodeId = b.trim().parse().map_err(|e| format!("{e}"))?;
        let num = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("`{t}`: {e}"));
        let (start, stop, step) = (num(start)?, num(stop)?, num(step)?);
        if step.is_nan() || step <= 0.0 {
            return Err("step must be positive".into());
        }
        if !(0.0..1.0).contains(&start) || !(start..1.0).contains(&stop) {
            return Err("need 0 <= start <= stop < 1".into());
        }
        let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
        let values = (0..count)
            .map(|i| ((start + i as f64 * step) * 1e12).round() / 1e12)
            .collect();
        Ok(Self { a, b, values })
    }
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Input(String),
    Numeric(String),
    Io(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Input(_) => 3,
            CliError::Numeric(_) => 4,
            CliError::Io(_) => 1,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Input(m) | CliError::Numeric(m) | CliError::Io(m) => m,
        }
    }
}

impl From<GraphError> for CliError {
    fn from(e: GraphError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<ValidationError> for CliError {
    fn from(e: ValidationError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<DistError> for CliError {
    fn from(e: DistError) -> Self {
        match e {
            DistError::TailTooHeavy { .. } => CliError::Numeric(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<EngineError> for CliError {
    fn from(e: EngineError) -> Self {
        match e {
            EngineError::Validation(_) | EngineError::Tree(_) => CliError::Input(e.to_string()),
            EngineError::InvalidConfig(_) => CliError::Usage(e.to_string()),
            EngineError::Dist(d) => d.into(),
            _ => CliError::Numeric(e.to_string()),
        }
    }
}

impl From<OracleError> for CliError {
    fn from(e: OracleError) -> Self {
        match e {
            OracleError::ZeroHorizon => CliError::Usage(e.to_string()),
            OracleError::Dist(d) => d.into(),
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Validation(_) => CliError::Input(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    match cli.command {
        Command::Compute(o) => cmd_compute(&o),
        Command::Simulate(o) => cmd_simulate(&o),
        Command::Compare(o) => cmd_compare(&o),
        Command::Sweep(o) => cmd_sweep(&o),
        Command::Deadline(o) => cmd_deadline(&o),
        Command::Oracle(o) => cmd_oracle(&o),
    }
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("LIFECD_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw.trim().parse().ok().filter(|&t| t > 0).ok_or_else(|| {
        CliError::Usage(format!(
            "LIFECD_THREADS must be a positive integer, got `{raw}`"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Usage(e.to_string()))
}

fn load_graph(o: &Opts) -> Result<FailureGraph, CliError> {
    let text = fs::read_to_string(&o.graph)
        .map_err(|e| CliError::Input(format!("{}: {e}", o.graph.display())))?;
    let g =
        parse_graph(&text).map_err(|e| CliError::Input(format!("{}: {e}", o.graph.display())))?;
    if !g.contains(o.source) {
        return Err(ValidationError::NodeOutOfRange(o.source.0, g.node_count()).into());
    }
    if g.node_count() == 1 {
        eprintln!("warning: trivial network (single node)");
    }
    Ok(g)
}

fn engine_config(o: &Opts) -> EngineConfig {
    EngineConfig {
        eps_trunc: o.eps,
        n_max_cap: o.nmax_cap,
    }
}

fn emit(o: &Opts, body: &str) -> Result<(), CliError> {
    match &o.out {
        Some(path) => write_file(path, body),
        None => io::stdout()
            .lock()
            .write_all(body.as_bytes())
            .map_err(|e| CliError::Io(format!("stdout: {e}"))),
    }
}

fn write_file(path: &Path, body: &str) -> Result<(), CliError> {
    fs::write(path, body).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn analytic(g: &FailureGraph, o: &Opts) -> Result<EngineReport, CliError> {
    let report = run_lifecd(g, o.source, &engine_config(o))?;
    if o.trace {
        for step in &report.reduction_trace {
            eprintln!("{step}");
        }
    }
    Ok(report)
}

fn summarize(g: &FailureGraph, r: &EngineReport) -> Result<(), CliError> {
    eprintln!(
        "E[Z]={:.6} exact={} tail_mass={:e} n_max={} golfar={:.6}",
        r.expected_value,
        r.exact,
        r.tail_mass(),
        r.n_max(),
        golfar_bound(g, Some(r.source))?
    );
    Ok(())
}

fn cmd_compute(o: &Opts) -> Result<(), CliError> {
    let g = load_graph(o)?;
    let r = analytic(&g, o)?;
    summarize(&g, &r)?;
    emit(o, &distribution_csv(&r.distribution))
}

fn cmd_simulate(o: &Opts) -> Result<(), CliError> {
    let g = load_graph(o)?;
    let mc = monte_carlo(&g, o.source, o.runs as usize, o.seed)?;
    let meta =
        serde_json::to_string_pretty(&mc.metadata()).map_err(|e| CliError::Io(e.to_string()))?;
    eprintln!(
        "mean={:.6} std={:.6} std_error={:.6} runs={}",
        mc.sample_mean,
        mc.sample_std,
        mc.std_error(),
        mc.run_count()
    );
    emit(o, &distribution_csv(&mc.distribution))?;
    let meta_path = o.meta.clone().or_else(|| {
        o.out.as_ref().map(|p| {
            let mut s = p.clone().into_os_string();
            s.push(".json");
            PathBuf::from(s)
        })
    });
    match meta_path {
        Some(path) => write_file(&path, &(meta + "\n")),
        None => {
            eprintln!("{meta}");
            Ok(())
        }
    }
}

fn cmd_compare(o: &Opts) -> Result<(), CliError> {
    let g = load_graph(o)?;
    let r = analytic(&g, o)?;
    let mc = monte_carlo(&g, o.source, o.runs as usize, o.seed)?;
    summarize(&g, &r)?;
    eprintln!(
        "sim_mean={:.6} std_error={:.6} ks={:.6}",
        mc.sample_mean,
        mc.std_error(),
        ks_distance(&r.distribution, &mc.distribution)
    );
    emit(o, &compare_csv(&r.distribution, &mc.distribution))
}

fn cmd_sweep(o: &Opts) -> Result<(), CliError> {
    let spec = o
        .sweep
        .as_ref()
        .ok_or_else(|| CliError::Usage("sweep needs --sweep EDGE:START:STOP:STEP".into()))?;
    let g = load_graph(o)?;
    if g.edge_prob(spec.a, spec.b).is_none() {
        return Err(GraphError::UnknownEdge(spec.a, spec.b).into());
    }
    let cfg = engine_config(o);
    let seeds = derive_seeds(o.seed, spec.values.len());
    let rows: Vec<SweepRow> = spec
        .values
        .par_iter()
        .zip(seeds)
        .map(|(&p, seed)| -> Result<SweepRow, CliError> {
            let h = g.with_edge_prob(spec.a, spec.b, p)?;
            let calc = run_lifecd(&h, o.source, &cfg)?.expected_value;
            let sim = monte_carlo(&h, o.source, o.runs as usize, seed)?.sample_mean;
            let golfar = golfar_bound(&h, Some(o.source))?;
            Ok(SweepRow {
                p,
                calc,
                sim,
                golfar,
            })
        })
        .collect::<Result<_, _>>()?;
    emit(o, &sweep_csv(&rows))
}

fn cmd_deadline(o: &Opts) -> Result<(), CliError> {
    let tau = o
        .tau
        .ok_or_else(|| CliError::Usage("deadline needs --tau".into()))?;
    if !(tau > 0.0 && tau < 1.0) {
        return Err(CliError::Usage(format!("--tau {tau} outside (0, 1)")));
    }
    let g = load_graph(o)?;
    // The quantile needs covered mass of at least tau.
    let mut opts = o.clone();
    opts.eps = o.eps.min((1.0 - tau) / 2.0);
    let r = analytic(&g, &opts)?;
    let k = r.distribution.deadline_quantile(tau)?;
    eprintln!("tau={tau} k={k} cdf={}", r.distribution.cdf()[k]);
    emit(o, &format!("{k}\n"))
}

fn cmd_oracle(o: &Opts) -> Result<(), CliError> {
    let g = load_graph(o)?;
    let horizon = run_lifecd(&g, o.source, &engine_config(o))?.n_max();
    let d = exact_distribution(&g, o.source, horizon)?;
    eprintln!(
        "E[Z]={:.6} tail_mass={:e} n_max={}",
        d.expectation(),
        d.tail_mass(),
        d.n_max()
    );
    emit(o, &distribution_csv(&d))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_grid() {
        let s: SweepSpec = "3-5:0.01:0.99:0.02".parse().unwrap();
        assert_eq!((s.a, s.b), (NodeId(3), NodeId(5)));
        assert_eq!(s.values.len(), 50);
        assert_eq!(s.values[0], 0.01);
        assert_eq!(s.values[14], 0.29);
        assert_eq!(s.values[49], 0.99);
        let one: SweepSpec = "1-2:0.5:0.5:0.1".parse().unwrap();
        assert_eq!(one.values, vec![0.5]);
    }

    #[test]
    fn bad_sweeps() {
        for bad in [
            "3-5:0.1:0.9",
            "35:0.1:0.9:0.1",
            "3-5:0.1:0.9:0",
            "3-5:0.5:0.4:0.1",
            "3-5:0.1:1.0:0.1",
            "x-5:0.1:0.2:0.1",
        ] {
            assert!(bad.parse::<SweepSpec>().is_err(), "{bad}");
        }
    }

    #[test]
    fn eps_default_matches_engine() {
        let cli = Cli::try_parse_from(["lifecd", "compute", "--graph", "g.csv"]).unwrap();
        let Command::Compute(o) = cli.command else {
            unreachable!()
        };
        assert_eq!(o.eps, lifecd::engine::DEFAULT_EPS_TRUNC);
    }

    #[test]
    fn exit_codes() {
        let tail = DistError::TailTooHeavy {
            tau: 0.9,
            covered: 0.5,
            n_max: 4,
        };
        assert_eq!(CliError::from(tail).code(), 4);
        let exhausted = EngineError::TruncationExhausted {
            tail: 0.1,
            eps: 1e-6,
            cap: 16,
        };
        assert_eq!(CliError::from(exhausted).code(), 4);
        assert_eq!(CliError::from(OracleError::TooLarge(30)).code(), 3);
        assert_eq!(
            CliError::from(GraphError::UnknownEdge(NodeId(1), NodeId(2))).code(),
            3
        );
        assert_eq!(
            CliError::from(EngineError::InvalidConfig("eps".into())).code(),
            2
        );
    }
}
