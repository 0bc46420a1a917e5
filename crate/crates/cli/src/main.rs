//! `graphtv` command-line front end.
//!
//! Exit codes: 0 on success, 2 for invalid arguments or input, 3 when a
//! computation fails numerically or does not converge.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use graphtv::experiments::{preset, run_experiment, write_outputs, ExperimentConfig, Manifest, PRESETS};
use graphtv::graphs::{
    build_augmented_path, build_complete, build_cycle_power, build_erdos_renyi, build_grid, build_hypercube,
    build_path, build_random_regular, build_star, incidence, parse_edge_list, Family, Graph, IncidenceMatrix,
};
use graphtv::spectral::{rho, RhoMethod, DEFAULT_DENSE_CAP};
use graphtv::tvsolver::{
    denoise, denoise_path_exact, kkt_certificate, lambda_value, objective, Algorithm, DenoiseProblem, DenoiseResult,
    LambdaRule, RuleKind, SolverOptions, DEFAULT_MAX_ITER, DEFAULT_TOL,
};

const EXIT_INVALID: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

#[derive(Parser)]
#[command(name = "graphtv", version, about = "Total-variation denoising on graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute rho, the spectral gap and the compatibility bound of a graph.
    Spectral(SpectralArgs),
    /// Denoise a vector on a graph.
    Denoise(DenoiseArgs),
    /// Run a Monte Carlo experiment from a config, manifest or preset.
    Experiment(ExperimentArgs),
    /// Write a graph as a 1-based edge list.
    Graph(GraphCmdArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum FamilyArg {
    Path,
    Grid,
    Hypercube,
    Complete,
    Star,
    CyclePower,
    ErdosRenyi,
    RandomRegular,
    /// Read `--edges FILE`.
    Edges,
}

#[derive(Args, Clone, Debug, Serialize)]
struct GraphArgs {
    #[arg(long, value_enum)]
    graph: FamilyArg,
    /// Vertex count (path, complete, star, cycle power, random graphs, edge lists).
    #[arg(long)]
    n: Option<usize>,
    /// Grid or hypercube dimension, or the degree of a random regular graph.
    #[arg(long)]
    d: Option<usize>,
    /// Grid side length.
    #[arg(long)]
    side: Option<usize>,
    /// Cycle power.
    #[arg(long)]
    k: Option<usize>,
    /// Edge probability of G(n, p).
    #[arg(long)]
    p: Option<f64>,
    /// Expected degree of G(n, p); sets `p = degree / n`.
    #[arg(long)]
    expected_degree: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    edges: Option<PathBuf>,
}

fn need<T: Copy>(v: Option<T>, flag: &str, graph: FamilyArg) -> anyhow::Result<T> {
    v.ok_or_else(|| invalid(format!("--graph {graph:?} needs --{flag}").to_lowercase()))
}

fn invalid(msg: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(graphtv::Error::InvalidArgument(msg.into()))
}

impl GraphArgs {
    fn build(&self) -> anyhow::Result<Graph> {
        let f = self.graph;
        let g = match f {
            FamilyArg::Path => build_path(need(self.n, "n", f)?)?,
            FamilyArg::Grid => build_grid(need(self.d, "d", f)?, need(self.side, "side", f)?)?,
            FamilyArg::Hypercube => build_hypercube(need(self.d, "d", f)?)?,
            FamilyArg::Complete => build_complete(need(self.n, "n", f)?)?,
            FamilyArg::Star => build_star(need(self.n, "n", f)?)?,
            FamilyArg::CyclePower => build_cycle_power(need(self.n, "n", f)?, need(self.k, "k", f)?)?,
            FamilyArg::ErdosRenyi => {
                let n = need(self.n, "n", f)?;
                let p = match (self.p, self.expected_degree) {
                    (Some(p), None) => p,
                    (None, Some(deg)) => (deg / n.max(1) as f64).min(1.0),
                    _ => return Err(invalid("--graph erdos-renyi needs exactly one of --p and --expected-degree")),
                };
                build_erdos_renyi(n, p, self.seed)?
            }
            FamilyArg::RandomRegular => build_random_regular(need(self.n, "n", f)?, need(self.d, "d", f)?, self.seed)?,
            FamilyArg::Edges => {
                let path = self.edges.as_ref().ok_or_else(|| invalid("--graph edges needs --edges FILE"))?;
                let text = read_input(path)?;
                parse_edge_list(&text, self.n)?
            }
        };
        Ok(g)
    }
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum MethodArg {
    Dense,
    Structured,
}

#[derive(Args, Debug, Serialize)]
struct SpectralArgs {
    #[command(flatten)]
    graph: GraphArgs,
    /// Use the path incidence matrix with an extra row anchoring the first vertex.
    #[arg(long)]
    augmented: bool,
    #[arg(long, value_enum, default_value = "dense")]
    method: MethodArg,
    /// Output JSON file (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum OracleArg {
    /// Direct 1D solver; path graphs only.
    TautString,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum AlgorithmArg {
    Auto,
    PrimalDual,
}

#[derive(Args, Debug, Serialize)]
struct DenoiseArgs {
    /// Observations, one number per line; `#` starts a comment.
    #[arg(long)]
    y: PathBuf,
    #[command(flatten)]
    graph: GraphArgs,
    /// Tuning rule: manual, theorem_general, grid_2d, grid_high_dim, hypercube,
    /// star, complete, random_gap, cycle_power.
    #[arg(long, default_value = "manual")]
    lambda_rule: String,
    /// Regularization weight for the manual rule.
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    sigma: f64,
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    #[arg(long, default_value_t = 1.0)]
    constant_c: f64,
    #[arg(long, default_value_t = DEFAULT_TOL)]
    tol: f64,
    #[arg(long, default_value_t = DEFAULT_MAX_ITER)]
    max_iter: usize,
    #[arg(long, value_enum, default_value = "auto")]
    algorithm: AlgorithmArg,
    /// Solve with a direct reference algorithm instead of the general solver.
    #[arg(long, value_enum)]
    oracle: Option<OracleArg>,
    /// Output JSON report (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the estimate as a vector file.
    #[arg(long)]
    theta_out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct ExperimentArgs {
    /// Experiment config, or a manifest.json from an earlier run.
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    config: Option<PathBuf>,
    #[arg(long)]
    preset: Option<String>,
    /// Override the number of trials.
    #[arg(long)]
    trials: Option<usize>,
    /// Override the master seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
    /// Worker threads (machine parallelism by default).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args, Debug, Serialize)]
struct GraphCmdArgs {
    #[command(flatten)]
    graph: GraphArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Outcome {
    Done,
    NotConverged(String),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_INVALID) } else { ExitCode::SUCCESS };
        }
    };
    let result = match &cli.command {
        Command::Spectral(a) => cmd_spectral(a),
        Command::Denoise(a) => cmd_denoise(a),
        Command::Experiment(a) => cmd_experiment(a),
        Command::Graph(a) => cmd_graph(a),
    };
    match result {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::NotConverged(msg)) => {
            eprintln!("graphtv: {msg}");
            ExitCode::from(EXIT_NUMERICAL)
        }
        Err(e) => {
            eprintln!("graphtv: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<graphtv::Error>() {
        Some(graphtv::Error::Degenerate(_) | graphtv::Error::GenerationFailure(_)) => EXIT_NUMERICAL,
        _ => EXIT_INVALID,
    }
}

fn read_input(path: &Path) -> anyhow::Result<String> {
    fs::read_to_string(path)
        .map_err(graphtv::Error::from)
        .with_context(|| format!("cannot read {}", path.display()))
}

/// Writes `text` to `out` (or stdout) and drops a manifest next to it.
fn emit(out: Option<&Path>, text: &str, command: &str, config: &impl Serialize) -> anyhow::Result<()> {
    match out {
        None => print!("{text}"),
        Some(path) => {
            let dir = output_dir(path)?;
            fs::write(path, text).map_err(graphtv::Error::from).with_context(|| format!("cannot write {}", path.display()))?;
            Manifest::new(command, config)?.write(&dir)?;
        }
    }
    Ok(())
}

fn output_dir(path: &Path) -> anyhow::Result<PathBuf> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&dir).map_err(graphtv::Error::from)?;
    Ok(dir)
}

/// Parses one number per line; blank lines and `#` comments are skipped.
fn parse_vector(text: &str) -> anyhow::Result<Vec<f64>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let v: f64 = body
            .parse()
            .map_err(|_| anyhow::Error::new(graphtv::Error::Parse(format!("line {}: '{body}' is not a number", i + 1))))?;
        out.push(v);
    }
    Ok(out)
}

fn format_vector(header: &[String], v: &[f64]) -> String {
    let mut s = String::new();
    for h in header {
        s.push_str("# ");
        s.push_str(h);
        s.push('\n');
    }
    for x in v {
        s.push_str(&format!("{x}\n"));
    }
    s
}

fn grid_like(f: &Family) -> bool {
    matches!(f, Family::Grid { .. } | Family::Hypercube { .. } | Family::Path)
}

fn cmd_spectral(a: &SpectralArgs) -> anyhow::Result<Outcome> {
    let method = match a.method {
        MethodArg::Dense => RhoMethod::DensePseudoinverse,
        MethodArg::Structured => RhoMethod::EigensumStructured,
    };
    let d: IncidenceMatrix = if a.augmented {
        if a.graph.graph != FamilyArg::Path {
            bail!(invalid("--augmented applies to --graph path only"));
        }
        build_augmented_path(need(a.graph.n, "n", FamilyArg::Path)?)?
    } else {
        incidence(&a.graph.build()?)
    };
    let report = rho(&d, method)?;
    emit(a.out.as_deref(), &(report.to_json()? + "\n"), "spectral", a)?;
    Ok(Outcome::Done)
}

#[derive(Serialize)]
struct DenoiseReport {
    lambda: f64,
    lambda_rule: String,
    n: usize,
    m: usize,
    #[serde(flatten)]
    result: DenoiseResult,
}

fn cmd_denoise(a: &DenoiseArgs) -> anyhow::Result<Outcome> {
    let y = parse_vector(&read_input(&a.y)?)?;
    let g = a.graph.build()?;
    if y.len() != g.n() {
        bail!(invalid(format!("{} observations for a graph with {} vertices", y.len(), g.n())));
    }
    let d = incidence(&g);
    let rule_kind: RuleKind = a.lambda_rule.parse()?;
    let rule = match rule_kind {
        RuleKind::Manual => LambdaRule::manual(a.lambda.ok_or_else(|| invalid("the manual rule needs --lambda"))?),
        _ => {
            if a.lambda.is_some() {
                bail!(invalid("--lambda only applies to the manual rule"));
            }
            LambdaRule::new(rule_kind, a.sigma, a.delta).with_constant(a.constant_c)
        }
    };
    let rho_value = if rule_kind == RuleKind::TheoremGeneral {
        let method = if g.n() > DEFAULT_DENSE_CAP && grid_like(g.family()) {
            RhoMethod::EigensumStructured
        } else {
            RhoMethod::DensePseudoinverse
        };
        Some(rho(&d, method)?.rho)
    } else {
        None
    };
    let lambda = lambda_value(&rule, &g, rho_value)?;
    let problem = DenoiseProblem::new(&y, &d, lambda)?;
    let result = match a.oracle {
        Some(OracleArg::TautString) => {
            if *g.family() != Family::Path {
                bail!(invalid("the taut-string oracle needs --graph path"));
            }
            if y.iter().any(|v| !v.is_finite()) {
                bail!(graphtv::Error::InvalidInput("observations contain NaN or infinity".into()));
            }
            let theta = denoise_path_exact(&y, lambda);
            let (z, residual) = kkt_certificate(&problem, &theta);
            let scale = 1.0 + y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let feas = z.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            DenoiseResult {
                objective: objective(&d, &y, &theta, lambda),
                theta_hat: theta,
                dual_z: z,
                iterations: 0,
                stationarity_residual: residual,
                dual_feasibility: feas,
                converged: residual <= a.tol * scale && feas <= 1.0 + a.tol,
                method: "taut_string".into(),
                warnings: Vec::new(),
            }
        }
        None => {
            let algorithm = match a.algorithm {
                AlgorithmArg::Auto => Algorithm::Auto,
                AlgorithmArg::PrimalDual => Algorithm::PrimalDual,
            };
            denoise(&problem, &SolverOptions { tol: a.tol, max_iter: a.max_iter, algorithm })?
        }
    };
    for w in &result.warnings {
        eprintln!("graphtv: warning: {w}");
    }
    if let Some(path) = &a.theta_out {
        let header = [
            format!("lambda {lambda}"),
            format!("method {}", result.method),
            format!("stationarity_residual {:e}", result.stationarity_residual),
            format!("dual_feasibility {}", result.dual_feasibility),
            format!("converged {}", result.converged),
        ];
        output_dir(path)?;
        fs::write(path, format_vector(&header, &result.theta_hat)).map_err(graphtv::Error::from)?;
    }
    let converged = result.converged;
    let report = DenoiseReport { lambda, lambda_rule: rule_kind.to_string(), n: g.n(), m: g.m(), result };
    emit(a.out.as_deref(), &(serde_json::to_string_pretty(&report)? + "\n"), "denoise", a)?;
    if converged {
        Ok(Outcome::Done)
    } else {
        Ok(Outcome::NotConverged(format!(
            "solver did not certify the solution (residual {:e}, dual feasibility {})",
            report.result.stationarity_residual, report.result.dual_feasibility
        )))
    }
}

fn load_config(a: &ExperimentArgs) -> anyhow::Result<ExperimentConfig> {
    let mut cfg = match (&a.config, &a.preset) {
        (Some(path), None) => {
            let value: serde_json::Value = serde_json::from_str(&read_input(path)?)
                .map_err(|e| invalid(format!("{} is not valid JSON: {e}", path.display())))?;
            // a manifest wraps the resolved config
            let inner = match value.get("config") {
                Some(c) if value.get("tool").is_some() => c.clone(),
                _ => value,
            };
            serde_json::from_value(inner).map_err(|e| invalid(format!("bad experiment config: {e}")))?
        }
        (None, Some(name)) => preset(name)?,
        _ => return Err(invalid(format!("give --config FILE or --preset NAME ({})", PRESETS.join(", ")))),
    };
    if let Some(t) = a.trials {
        cfg.trials = t;
    }
    if let Some(s) = a.seed {
        cfg.master_seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_experiment(a: &ExperimentArgs) -> anyhow::Result<Outcome> {
    let cfg = load_config(a)?;
    let records = run_experiment(&cfg, a.threads)?;
    write_outputs(&a.out, &cfg, &records).with_context(|| format!("cannot write results to {}", a.out.display()))?;
    let failed = records.iter().filter(|r| !r.converged).count();
    eprintln!("graphtv: {} records written to {}", records.len(), a.out.display());
    if failed > 0 {
        return Ok(Outcome::NotConverged(format!("{failed} of {} records did not converge", records.len())));
    }
    Ok(Outcome::Done)
}

fn cmd_graph(a: &GraphCmdArgs) -> anyhow::Result<Outcome> {
    let g = a.graph.build()?;
    emit(a.out.as_deref(), &g.to_edge_list(), "graph", a)?;
    Ok(Outcome::Done)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vector_format_round_trips() {
        let v = vec![1.5, -2.0, 1e-300, 0.1 + 0.2];
        let text = format_vector(&["note".into()], &v);
        assert_eq!(parse_vector(&text).unwrap(), v);
        assert_eq!(parse_vector("1\n\n# c\n2 # tail\n").unwrap(), vec![1.0, 2.0]);
        assert!(parse_vector("1\nx\n").is_err());
    }

    #[test]
    fn error_codes() {
        assert_eq!(exit_code(&invalid("x")), EXIT_INVALID);
        assert_eq!(exit_code(&anyhow::anyhow!(graphtv::Error::Degenerate("x".into()))), EXIT_NUMERICAL);
        assert_eq!(exit_code(&anyhow::anyhow!("other")), EXIT_INVALID);
    }
}
