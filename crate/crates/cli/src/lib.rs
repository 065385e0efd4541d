//! `stargraph` command line. Every subcommand reads one config file; with
//! `--server URL` the computation runs on a stargraph service, otherwise
//! in-process. Artifacts are always written locally.
//!
//! Exit codes: 0 success, 1 computation or filesystem failure, 2 usage or
//! configuration error, 3 a sweep whose outcome differs from the expected one.

use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use num_complex::Complex64;

use stargraph_client::{Client, ClientError};
use stargraph_core::api::{
    self, ConditionsRequest, ConditionsResponse, ResonanceRequest, ResonanceResponse,
    SolveRequest, SolveResponse,
};
use stargraph_core::experiments::write_report;
use stargraph_core::linalg::CMatrix;
use stargraph_core::report::{write_resonance_csv, write_solution_csv};
use stargraph_core::{Config, ConvergenceReport, SweepSpec};

#[derive(Debug, Parser)]
#[command(name = "stargraph", version, about = "Schrödinger operators on star graphs")]
pub struct Cli {
    /// Run configuration (TOML, or JSON by extension).
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Output directory; must exist. Defaults to the config's output.dir, then ".".
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,

    /// Seed for randomized checks (overrides the config).
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,

    /// Worker threads for in-process sweeps.
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,

    /// Validate the config and output directory, then stop.
    #[arg(long, global = true)]
    pub dry_run: bool,

    /// Base URL of a stargraph service, e.g. http://127.0.0.1:8080.
    #[arg(long, global = true, value_name = "URL")]
    pub server: Option<String>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Zero-energy resonance space of the short-range potential.
    Resonance,
    /// Limit vertex conditions and their checks.
    Conditions,
    /// One resolvent problem.
    Solve,
    /// Convergence sweep over epsilon.
    Sweep,
    /// List the built-in scenarios.
    Scenarios,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Core(#[from] stargraph_core::Error),

    #[error(transparent)]
    Client(#[from] ClientError),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Core(e) if e.is_input_error() => 2,
            CliError::Client(e) if e.is_input_error() => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

enum Backend {
    Local,
    Remote {
        client: Client,
        rt: tokio::runtime::Runtime,
    },
}

impl Backend {
    fn new(server: Option<&str>) -> Result<Self> {
        match server {
            None => Ok(Backend::Local),
            Some(url) => {
                let client = Client::new(url).map_err(|e| CliError::Usage(e.to_string()))?;
                let rt = tokio::runtime::Builder::new_current_thread()
                    .enable_all()
                    .build()?;
                Ok(Backend::Remote { client, rt })
            }
        }
    }

    fn resonance(&self, req: &ResonanceRequest) -> Result<ResonanceResponse> {
        match self {
            Backend::Local => Ok(api::resonance(req)?),
            Backend::Remote { client, rt } => Ok(rt.block_on(client.resonance(req))?),
        }
    }

    fn conditions(&self, req: &ConditionsRequest) -> Result<ConditionsResponse> {
        match self {
            Backend::Local => Ok(api::conditions(req)?),
            Backend::Remote { client, rt } => Ok(rt.block_on(client.conditions(req))?),
        }
    }

    fn solve(&self, req: &SolveRequest) -> Result<SolveResponse> {
        match self {
            Backend::Local => Ok(api::solve(req)?),
            Backend::Remote { client, rt } => Ok(rt.block_on(client.solve(req))?),
        }
    }

    fn sweep(&self, spec: &SweepSpec) -> Result<ConvergenceReport> {
        match self {
            Backend::Local => Ok(api::sweep(spec)?),
            Backend::Remote { client, rt } => Ok(rt.block_on(client.sweep(spec))?),
        }
    }

    fn scenarios(&self) -> Result<Vec<SweepSpec>> {
        match self {
            Backend::Local => Ok(api::scenarios()),
            Backend::Remote { client, rt } => Ok(rt.block_on(client.scenarios())?),
        }
    }
}

/// Runs one command, writing the human-readable report to `w`. Returns
/// the exit code on success.
pub fn run(cli: &Cli, w: &mut dyn Write) -> Result<u8> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be positive".into()));
        }
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let backend = Backend::new(cli.server.as_deref())?;
    if cli.command == Command::Scenarios {
        return scenarios(&backend, w);
    }
    let path = cli
        .config
        .as_deref()
        .ok_or_else(|| CliError::Usage("--config is required".into()))?;
    let cfg = Config::load(path).map_err(|e| match e {
        stargraph_core::Error::Io(io) => {
            CliError::Usage(format!("cannot read {}: {io}", path.display()))
        }
        other => other.into(),
    })?;
    cfg.validate()?;
    let out = cli
        .out
        .clone()
        .or_else(|| cfg.output.dir.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    if !out.is_dir() {
        return Err(io::Error::new(
            io::ErrorKind::NotFound,
            format!("output directory {} does not exist", out.display()),
        )
        .into());
    }
    match cli.command {
        Command::Resonance => {
            let req = cfg.resonance_request()?;
            if cli.dry_run {
                return dry_run(w, "resonance", req.short_range.edge_count(), &out);
            }
            resonance(&backend.resonance(&req)?, &out, w)
        }
        Command::Conditions => {
            let req = cfg.conditions_request(cli.seed)?;
            if cli.dry_run {
                return dry_run(w, "conditions", req.coulomb.edge_count(), &out);
            }
            conditions(&backend.conditions(&req)?, &req, &out, w)
        }
        Command::Solve => {
            let req = cfg.solve_request()?;
            if cli.dry_run {
                return dry_run(w, "solve", req.problem.graph.edge_count(), &out);
            }
            solve(&backend.solve(&req)?, &out, w)
        }
        Command::Sweep => {
            let spec = cfg.sweep_spec()?;
            if cli.dry_run {
                writeln!(
                    w,
                    "sweep over {} eps x {} zeta for {}",
                    spec.eps.len(),
                    spec.zetas.len(),
                    spec.scenario.id
                )?;
                return dry_run(w, "sweep", spec.scenario.edge_count(), &out);
            }
            sweep(&backend.sweep(&spec)?, &out, w)
        }
        Command::Scenarios => unreachable!(),
    }
}

fn dry_run(w: &mut dyn Write, what: &str, n: usize, out: &Path) -> Result<u8> {
    writeln!(w, "config ok: {what} on {n} edges, output to {}", out.display())?;
    Ok(0)
}

fn fmt_c(z: Complex64) -> String {
    // no "-0.000000" for values that round to zero
    let snap = |x: f64| if x.abs() < 5e-7 { 0.0 } else { x };
    format!("{:>11.6}{:+.6}i", snap(z.re), snap(z.im))
}

fn write_matrix(w: &mut dyn Write, name: &str, m: &CMatrix) -> io::Result<()> {
    writeln!(w, "{name} =")?;
    if m.ncols() == 0 {
        return writeln!(w, "  (empty, {} rows)", m.nrows());
    }
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| fmt_c(m[(i, j)])).collect();
        writeln!(w, "  [{} ]", row.join("  "))?;
    }
    Ok(())
}

fn sci(xs: &[f64]) -> String {
    xs.iter().map(|x| format!("{x:.3e}")).collect::<Vec<_>>().join(" ")
}

fn resonance(res: &ResonanceResponse, out: &Path, w: &mut dyn Write) -> Result<u8> {
    writeln!(w, "r = {}", res.rank)?;
    writeln!(w, "singular values: {}", sci(&res.singular_values))?;
    writeln!(w, "tol = {:.1e}, psi -> psi(1) injective: {}", res.tol, res.injective)?;
    write_matrix(w, "L", &res.l)?;
    let r = &res.residuals;
    writeln!(
        w,
        "residuals: continuity {:.1e}, kirchhoff {:.1e}, psi'(1) {:.1e}, ode {:.1e}",
        r.continuity, r.kirchhoff, r.boundary_derivative, r.ode
    )?;
    let path = out.join("resonance.csv");
    write_resonance_csv(res, &path)?;
    writeln!(w, "wrote {}", path.display())?;
    Ok(0)
}

fn one_based(v: &[usize]) -> String {
    let s: Vec<String> = v.iter().map(|k| (k + 1).to_string()).collect();
    format!("{{{}}}", s.join(", "))
}

fn conditions(
    res: &ConditionsResponse,
    req: &ConditionsRequest,
    out: &Path,
    w: &mut dyn Write,
) -> Result<u8> {
    writeln!(w, "r = {}", res.rank)?;
    write!(w, "{}", res.conditions)?;
    write_matrix(w, "A", &res.conditions.a)?;
    write_matrix(w, "B", &res.conditions.b)?;
    let sa = &res.self_adjoint;
    writeln!(
        w,
        "self-adjoint: {} (rank ratio {:.3e}, |AB* - BA*| = {:.1e})",
        sa.self_adjoint, sa.rank_ratio, sa.hermitian_defect
    )?;
    writeln!(
        w,
        "Green identity: {:.1e} on a basis, {:.1e} on {} random pairs (seed {})",
        res.green_residual, res.green_sampled, req.samples, req.seed
    )?;
    writeln!(
        w,
        "convergence condition: {} (residual {:.1e}, tol {:.1e})",
        if res.convergence.holds { "holds" } else { "fails" },
        res.convergence.residual,
        req.condition_tol
    )?;
    let p = &res.partition;
    write!(w, "partition: non-resonant edges {}", one_based(&p.non_resonant_edges))?;
    for b in &p.blocks {
        write!(w, "; block edges {} columns {}", one_based(&b.edges), one_based(&b.columns))?;
    }
    writeln!(w, " ({})", if p.exact { "exact" } else { "approximate" })?;
    if let Some(u) = &res.user {
        writeln!(
            w,
            "user conditions: self-adjoint {} (rank ratio {:.3e}, |AB* - BA*| = {:.1e}, Green {:.1e})",
            u.self_adjoint.self_adjoint,
            u.self_adjoint.rank_ratio,
            u.self_adjoint.hermitian_defect,
            u.green_residual
        )?;
    }
    let path = out.join("conditions.json");
    std::fs::write(&path, serde_json::to_string_pretty(res).map_err(io::Error::from)?)?;
    writeln!(w, "wrote {}", path.display())?;
    Ok(0)
}

fn solve(res: &SolveResponse, out: &Path, w: &mut dyn Write) -> Result<u8> {
    writeln!(w, "zeta = {}", fmt_c(res.zeta).trim_start())?;
    for (k, v) in res.vertex_values.iter().enumerate() {
        writeln!(w, "y_{}(0) = {}", k + 1, fmt_c(*v).trim_start())?;
    }
    writeln!(
        w,
        "|y| = {:.6e}, |f| = {:.6e}, residual {:.1e}",
        res.l2_norm, res.forcing_l2_norm, res.residual
    )?;
    if let Some(q) = &res.quasi {
        for (k, d) in q.qderivs.iter().enumerate() {
            writeln!(w, "phi^[1]_{}(a) = {}", k + 1, fmt_c(*d).trim_start())?;
        }
        writeln!(w, "window fit residual {:.1e} (reliable: {})", q.fit_residual, q.reliable)?;
    }
    for path in write_solution_csv(res, out, "solution")? {
        writeln!(w, "wrote {}", path.display())?;
    }
    Ok(0)
}

fn sweep(report: &ConvergenceReport, out: &Path, w: &mut dyn Write) -> Result<u8> {
    writeln!(
        w,
        "{}: r = {}, convergence condition {} (residual {:.1e})",
        report.scenario,
        report.resonance_rank,
        if report.condition_holds { "holds" } else { "fails" },
        report.condition_residual
    )?;
    writeln!(w, "{:>10} {:>22} {:>12} {:>12}", "eps", "zeta", "vs limit", "vs dirichlet")?;
    for r in &report.rows {
        writeln!(
            w,
            "{:>10.4e} {:>22} {:>12.4e} {:>12.4e}",
            r.eps,
            fmt_c(r.zeta).trim_start(),
            r.err_vs_limit,
            r.err_vs_dirichlet
        )?;
    }
    for z in &report.zetas {
        let show = |f: &stargraph_core::experiments::RateFit| {
            if f.conclusive {
                format!("p = {:.3} +- {:.3} ({} points)", f.p, f.std_error, f.points)
            } else {
                format!("inconclusive ({} points above the floor)", f.points)
            }
        };
        writeln!(w, "zeta = {}: {:?}", fmt_c(z.zeta).trim_start(), z.outcome)?;
        writeln!(w, "  vs limit:     {}", show(&z.fit_vs_limit))?;
        writeln!(w, "  vs dirichlet: {}", show(&z.fit_vs_dirichlet))?;
        writeln!(w, "  error floor {:.1e}", z.error_floor)?;
    }
    writeln!(
        w,
        "outcome {:?}, expected {:?}: {}",
        report.outcome,
        report.expected,
        if report.passed { "PASS" } else { "FAIL" }
    )?;
    write_report(report, out)?;
    writeln!(w, "wrote {}", out.join(format!("{}.csv", report.scenario)).display())?;
    Ok(if report.passed { 0 } else { 3 })
}

fn scenarios(backend: &Backend, w: &mut dyn Write) -> Result<u8> {
    for s in backend.scenarios()? {
        writeln!(
            w,
            "{:<34} n = {}  expect {:?}  {}",
            s.scenario.id,
            s.scenario.edge_count(),
            s.scenario.expected,
            s.scenario.description
        )?;
    }
    Ok(0)
}
