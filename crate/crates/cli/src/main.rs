//! `kirchhoff`: command-line driver for the radial Kirchhoff solver.
//!
//! Every subcommand reads one JSON configuration, writes its results under
//! `<output_dir>/<command>/` and keeps standard output empty. Diagnostics go
//! to standard error. Exit status: 0 on success, 1 on solver failure or a
//! failed suite check, 2 on a configuration error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use kirchhoff_core::config::{load_config, Config, LoadedConfig};
use kirchhoff_core::minimax::{relative_pohozaev, CriticalPoint};
use kirchhoff_core::model::{CheckStatus, PerturbationParams, Problem, ValidationReport};
use kirchhoff_core::report::{csv_document, fmt_f64, write_report, write_text, RunManifest};
use kirchhoff_core::study::{
    dilation_factor, dilation_oracle, doubling_sweep, limit_study, shoot_schrodinger,
    OracleSummary,
};
use kirchhoff_core::suite::{run_suite, SuiteReport};
use kirchhoff_core::{build_grid, Error};

/// Overrides `output_dir` of the configuration when set.
const OUTPUT_ENV: &str = "KIRCHHOFF_OUTPUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "kirchhoff", version, about = "Radial solver for the Kirchhoff equation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Load the configuration and print the hypothesis table.
    Validate { config: PathBuf },
    /// Positive ground state by mountain pass.
    Ground { config: PathBuf },
    /// Sign-changing minimax point at the configured perturbation strength.
    Nodal { config: PathBuf },
    /// Nodal minimax followed by continuation to the unperturbed problem.
    Continuation { config: PathBuf },
    /// Energy-doubling sweep over `study.b_values`.
    Doubling { config: PathBuf },
    /// Distance of nodal solutions to the local one-node solution as b → 0.
    Limit { config: PathBuf },
    /// Shooting solution of the local problem, dilated to the configured b.
    Oracle {
        config: PathBuf,
        /// Number of interior zeros.
        #[arg(long, default_value_t = 0)]
        nodes: usize,
    },
    /// Invariant and property battery; fails on any failed check.
    Suite { config: PathBuf },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Validate { .. } => "validate",
            Command::Ground { .. } => "ground",
            Command::Nodal { .. } => "nodal",
            Command::Continuation { .. } => "continuation",
            Command::Doubling { .. } => "doubling",
            Command::Limit { .. } => "limit",
            Command::Oracle { .. } => "oracle",
            Command::Suite { .. } => "suite",
        }
    }

    fn config_path(&self) -> &Path {
        match self {
            Command::Validate { config }
            | Command::Ground { config }
            | Command::Nodal { config }
            | Command::Continuation { config }
            | Command::Doubling { config }
            | Command::Limit { config }
            | Command::Oracle { config, .. }
            | Command::Suite { config } => config,
        }
    }
}

/// Failure of a run, mapped onto the exit status.
enum Failure {
    Config(Error),
    Solver(Error),
    Checks(usize),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Solver(e)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(Failure::Solver(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(Failure::Checks(n)) => {
            eprintln!("error: {n} suite check(s) failed");
            ExitCode::from(1)
        }
    }
}

fn output_root(config: &Config) -> PathBuf {
    match std::env::var_os(OUTPUT_ENV) {
        Some(dir) if !dir.is_empty() => PathBuf::from(dir),
        _ => config.output_dir.clone(),
    }
}

/// Single writer for one command's output directory.
struct Output {
    dir: PathBuf,
    command: &'static str,
    hash: String,
    seed: u64,
}

impl Output {
    fn new(loaded: &LoadedConfig, command: &'static str) -> Result<Self, Error> {
        let dir = output_root(&loaded.config).join(command);
        fs::create_dir_all(&dir).map_err(|source| Error::Io {
            path: dir.clone(),
            source,
        })?;
        Ok(Output {
            dir,
            command,
            hash: loaded.hash.clone(),
            seed: loaded.config.seed,
        })
    }

    fn json<T: Serialize>(&self, name: &str, value: &T) -> Result<(), Error> {
        write_report(value, &self.dir.join(name))
    }

    fn text(&self, name: &str, text: &str) -> Result<(), Error> {
        write_text(&self.dir.join(name), text)
    }

    fn profile(&self, name: &str, point: &CriticalPoint) -> Result<(), Error> {
        let grid = point.grid.build()?;
        self.text(name, &point.u.to_csv(&grid))
    }

    fn manifest<T: Serialize>(&self, results: T) -> Result<(), Error> {
        let manifest = RunManifest::new(self.command, &self.hash, self.seed, results);
        self.json("manifest.json", &manifest)?;
        eprintln!("wrote {}", self.dir.display());
        Ok(())
    }
}

fn run(command: &Command) -> Result<(), Failure> {
    let loaded = load_config(command.config_path()).map_err(Failure::Config)?;
    let cfg = &loaded.config;
    let out = Output::new(&loaded, command.name())?;
    match command {
        Command::Validate { .. } => return validate(&loaded.validation, &out),
        Command::Ground { .. } => ground(cfg, &out)?,
        Command::Nodal { .. } => nodal(cfg, &out)?,
        Command::Continuation { .. } => continuation(cfg, &out)?,
        Command::Doubling { .. } => doubling(cfg, &out)?,
        Command::Limit { .. } => limit(cfg, &out)?,
        Command::Oracle { nodes, .. } => oracle(cfg, *nodes, &out)?,
        Command::Suite { .. } => return suite(cfg, &out),
    }
    Ok(())
}

fn status_label(status: CheckStatus) -> &'static str {
    match status {
        CheckStatus::Pass => "pass",
        CheckStatus::Fail => "FAIL",
        CheckStatus::NotChecked => "n/a",
    }
}

fn validate(report: &ValidationReport, out: &Output) -> Result<(), Failure> {
    let width = report.checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
    for c in &report.checks {
        eprintln!(
            "{:<width$}  {:<4}  {}",
            c.name,
            status_label(c.status),
            c.detail
        );
    }
    out.manifest(report)?;
    if report.all_pass() {
        Ok(())
    } else {
        Err(Failure::Config(Error::Config(
            "the model violates at least one hypothesis".into(),
        )))
    }
}

/// Level and diagnostics of one critical point, for manifests.
#[derive(Serialize)]
struct PointSummary {
    level: f64,
    lambda: f64,
    beta: f64,
    fixed_point_gap: f64,
    residual_sup: f64,
    pohozaev_residual: Option<f64>,
    sign_changes: usize,
    r_max: f64,
    n: usize,
}

fn summarize(point: &CriticalPoint) -> PointSummary {
    PointSummary {
        level: point.level,
        lambda: point.lambda,
        beta: point.beta,
        fixed_point_gap: point.fixed_point_gap,
        residual_sup: point.report.residual_sup,
        pohozaev_residual: point.report.pohozaev_res,
        sign_changes: point.report.sign_changes,
        r_max: point.grid.r_max,
        n: point.grid.n,
    }
}

fn ground(cfg: &Config, out: &Output) -> Result<(), Error> {
    let problem = cfg.problem()?;
    let run = cfg.ground.run(&problem, &cfg.flow)?;
    out.json("ground.json", &run)?;
    out.profile("ground_profile.csv", &run.point)?;
    #[derive(Serialize)]
    struct Results {
        eps_cone: f64,
        sweeps: usize,
        endpoint_factor: f64,
        path_max_initial: f64,
        point: PointSummary,
    }
    out.manifest(Results {
        eps_cone: cfg.flow.eps_cone,
        sweeps: run.outcome.sweeps,
        endpoint_factor: run.outcome.endpoint_factor,
        path_max_initial: run.outcome.path_max_initial,
        point: summarize(&run.point),
    })
}

fn nodal(cfg: &Config, out: &Output) -> Result<(), Error> {
    let run = cfg.nodal.run_minimax(&cfg.problem()?, &cfg.flow)?;
    out.json("nodal.json", &run)?;
    out.profile("nodal_profile.csv", &run.point)?;
    #[derive(Serialize)]
    struct Results {
        r_scale: f64,
        eps_cone: f64,
        initial_max: f64,
        c_r: f64,
        sweeps: usize,
        lmm_iterations: usize,
        newton_iterations: usize,
        point: PointSummary,
    }
    out.manifest(Results {
        r_scale: run.setup.r_scale,
        eps_cone: cfg.flow.eps_cone,
        initial_max: run.outcome.initial_max,
        c_r: run.outcome.c_r,
        sweeps: run.outcome.sweeps,
        lmm_iterations: run.outcome.lmm_iterations,
        newton_iterations: run.outcome.newton_iterations,
        point: summarize(&run.point),
    })
}

fn continuation(cfg: &Config, out: &Output) -> Result<(), Error> {
    let run = cfg.nodal.run_continuation(&cfg.problem()?, &cfg.flow)?;
    let outcome = &run.outcome;
    out.json("continuation.json", &run)?;
    out.profile("initial_profile.csv", &outcome.initial.point)?;
    out.profile("final_profile.csv", &outcome.point)?;
    out.text(
        "trace.csv",
        &csv_document(
            &["param", "level", "distance", "gap", "newton_iterations", "r_max"],
            outcome.trace.iter().map(|s| {
                vec![
                    fmt_f64(s.param),
                    fmt_f64(s.level),
                    fmt_f64(s.distance),
                    fmt_f64(s.gap),
                    s.newton_iterations.to_string(),
                    fmt_f64(s.r_max),
                ]
            }),
        ),
    )?;
    #[derive(Serialize)]
    struct Results {
        r_scale: f64,
        eps_cone: f64,
        initial_max: f64,
        steps: usize,
        newton_iterations: usize,
        initial: PointSummary,
        point: PointSummary,
    }
    out.manifest(Results {
        r_scale: run.setup.r_scale,
        eps_cone: cfg.flow.eps_cone,
        initial_max: outcome.initial.initial_max,
        steps: outcome.trace.len(),
        newton_iterations: outcome.trace.iter().map(|s| s.newton_iterations).sum(),
        initial: summarize(&outcome.initial.point),
        point: summarize(&outcome.point),
    })
}

fn doubling(cfg: &Config, out: &Output) -> Result<(), Error> {
    let report = doubling_sweep(&cfg.model, &cfg.perturbation, &cfg.study, &cfg.flow)?;
    out.json("doubling.json", &report)?;
    out.text("doubling.csv", &report.to_csv())?;
    for row in &report.rows {
        let b = fmt_f64(row.b);
        for (tag, point) in [("ground", &row.ground), ("nodal", &row.nodal)] {
            if let Some(point) = point {
                out.profile(&format!("{tag}_b{b}.csv"), point)?;
            }
        }
        for failure in &row.failures {
            eprintln!("b = {b}: {failure}");
        }
    }
    #[derive(Serialize)]
    struct Row {
        b: f64,
        c_b: Option<f64>,
        m_b: Option<f64>,
        margin: Option<f64>,
        verdict: &'static str,
    }
    #[derive(Serialize)]
    struct Results {
        eps_cone: f64,
        b_star: Option<f64>,
        rows: Vec<Row>,
        c_increasing: bool,
        c_trend: bool,
        m_trend: bool,
    }
    out.manifest(Results {
        eps_cone: cfg.flow.eps_cone,
        b_star: report.b_star,
        rows: report
            .rows
            .iter()
            .map(|r| Row {
                b: r.b,
                c_b: r.c_b,
                m_b: r.m_b,
                margin: r.margin,
                verdict: r.verdict.as_str(),
            })
            .collect(),
        c_increasing: report.c_increasing,
        c_trend: report.c_trend,
        m_trend: report.m_trend,
    })
}

fn limit(cfg: &Config, out: &Output) -> Result<(), Error> {
    let report = limit_study(&cfg.model, &cfg.perturbation, &cfg.study, &cfg.flow)?;
    out.json("limit.json", &report)?;
    out.text(
        "limit.csv",
        &csv_document(
            &["b", "distance", "level", "energy_gap", "fit", "oracle_distance"],
            report.rows.iter().map(|r| {
                vec![
                    fmt_f64(r.b),
                    fmt_f64(r.distance),
                    fmt_f64(r.level),
                    fmt_f64(r.energy_gap),
                    fmt_f64(r.fit),
                    fmt_f64(r.oracle_distance),
                ]
            }),
        ),
    )?;
    out.manifest(&report)
}

fn oracle(cfg: &Config, nodes: usize, out: &Output) -> Result<(), Error> {
    let model = &cfg.model;
    let local = model.with_b(0.0)?;
    let grid = cfg.grid.build()?;
    let w = shoot_schrodinger(&local, nodes, &grid, &cfg.study.shooting)?;
    let (solution, grid) = if model.b == 0.0 {
        (w, grid)
    } else {
        let s = dilation_factor(model.a, model.b, w.integrals.grad);
        let stretched = build_grid(grid.r_max() * s, grid.n())?;
        (dilation_oracle(&w, model, &stretched)?, stretched)
    };
    let off = PerturbationParams::off(cfg.perturbation.alpha, cfg.perturbation.r_exp, model)?;
    let problem = Problem::new(model.clone(), off, grid.clone())?;
    #[derive(Serialize)]
    struct Results {
        b: f64,
        r_max: f64,
        n: usize,
        relative_pohozaev: Option<f64>,
        solution: OracleSummary,
    }
    let results = Results {
        b: model.b,
        r_max: grid.r_max(),
        n: grid.n(),
        relative_pohozaev: relative_pohozaev(&problem, &solution.u),
        solution: solution.summary(),
    };
    out.json("oracle.json", &results)?;
    out.text("oracle_profile.csv", &solution.u.to_csv(&grid))?;
    out.manifest(&results)
}

fn suite(cfg: &Config, out: &Output) -> Result<(), Failure> {
    let report: SuiteReport = run_suite(cfg)?;
    let width = report.checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
    for c in &report.checks {
        eprintln!(
            "{:<width$}  {}  value {:.6e}  threshold {:.3e}  {}",
            c.name,
            if c.passed { "pass" } else { "FAIL" },
            c.value,
            c.threshold,
            c.detail
        );
    }
    out.json("suite.json", &report)?;
    out.manifest(&report)?;
    match report.checks.iter().filter(|c| !c.passed).count() {
        0 => Ok(()),
        n => Err(Failure::Checks(n)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn oracle_takes_a_node_count() {
        let cli = Cli::try_parse_from(["kirchhoff", "oracle", "c.json", "--nodes", "1"]).unwrap();
        match cli.command {
            Command::Oracle { nodes, ref config } => {
                assert_eq!(nodes, 1);
                assert_eq!(config, Path::new("c.json"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_subcommands_are_rejected() {
        assert!(Cli::try_parse_from(["kirchhoff", "solve", "c.json"]).is_err());
        assert!(Cli::try_parse_from(["kirchhoff", "ground"]).is_err());
    }
}
