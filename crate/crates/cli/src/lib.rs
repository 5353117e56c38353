//! Command line front end: file loading, command dispatch, reports and run manifests.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use tvflow::bv::total_variation;
use tvflow::io::{self, ConfigFile};
use tvflow::mms::{doubling_constant, Domain, MetricMeasureSpace};
use tvflow::oracle::minimizing_movements;
use tvflow::relax::{energy_bounds, minimize_f_eps_with, RelaxConfig, SolverOptions};
use tvflow::timefn::{l2_norm_sq_st, mollify};
use tvflow::varsol::{
    comparison_test, initial_condition_check, parabolic_battery, regularity_and_energy_check, variational_battery,
    Certificate, Provenance, Slack, VerificationReport,
};
use tvflow::{CandidateSolution, Error, TimeGrid, VertexFunction};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_CHECK_FAILURE: i32 = 1;
pub const EXIT_INPUT_ERROR: i32 = 2;
pub const EXIT_NOT_CONVERGED: i32 = 3;

const BATTERY_SIZE: usize = 50;

#[derive(Debug, Parser)]
#[command(name = "tvflow", version, about = "Total variation flow on finite metric measure spaces")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print TV(u0; omega*).
    Tv(Common),
    /// Print the doubling constant of the graph.
    Doubling(Common),
    /// Mollify a trajectory in time.
    Mollify(MollifyArgs),
    /// Minimize the relaxed functional and write the minimizer and its report.
    Relax(Common),
    /// Compute the minimizing movements trajectory.
    Flow(Common),
    /// Run the verification suite on a trajectory.
    Verify(VerifyArgs),
    /// Solve over lists of epsilon and N and tabulate the distance to minimizing movements.
    Sweep(SweepArgs),
    /// Solve for two ordered data and check that the solutions stay ordered.
    Compare(CompareArgs),
}

#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct Common {
    /// JSON configuration; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub graph: Option<PathBuf>,
    /// Comma-separated vertex ids of omega.
    #[arg(long, value_delimiter = ',')]
    pub omega: Option<Vec<String>>,
    /// Comma-separated vertex ids of omega*.
    #[arg(long = "omega-star", value_delimiter = ',')]
    pub omega_star: Option<Vec<String>>,
    #[arg(long)]
    pub u0: Option<PathBuf>,
    #[arg(long = "T")]
    pub horizon: Option<f64>,
    #[arg(long = "N")]
    pub steps: Option<usize>,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub tol: Option<f64>,
    /// Nonzero seeds start the solver from a seeded random dual point.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Iteration cap of the relaxed solver.
    #[arg(long = "max-iter")]
    pub max_iter: Option<usize>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct MollifyArgs {
    #[command(flatten)]
    pub common: Common,
    /// Trajectory CSV; its grid is read from the sidecar.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub h: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub common: Common,
    /// Trajectory CSV; its grid is read from the sidecar.
    #[arg(long)]
    pub trajectory: PathBuf,
    /// Scaled duality gap of the solve that produced the trajectory.
    #[arg(long, default_value_t = 0.0)]
    pub gap: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: Common,
    /// Comma-separated epsilon values; defaults to 2^-2, ..., 2^-7.
    #[arg(long = "eps-list", value_delimiter = ',')]
    pub eps_list: Option<Vec<f64>>,
    /// Comma-separated step counts; defaults to the configured N.
    #[arg(long = "N-list", value_delimiter = ',')]
    pub n_list: Option<Vec<usize>>,
    /// Upper bound on concurrently running solves.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CompareArgs {
    #[command(flatten)]
    pub common: Common,
    /// Upper datum; must dominate u0 at every vertex.
    #[arg(long)]
    pub v0: PathBuf,
}

/// Record of one invocation, written next to its outputs.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub tool_version: String,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub outputs: Vec<PathBuf>,
}

#[derive(Debug)]
pub struct Inputs {
    pub space: MetricMeasureSpace,
    pub domain: Domain,
    pub u0: Option<VertexFunction>,
    pub settings: Settings,
    /// Every file read, in reading order.
    pub files: Vec<PathBuf>,
}

/// Numeric settings after merging the configuration file with flags.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Settings {
    pub horizon: f64,
    pub steps: usize,
    pub epsilon: f64,
    pub tol: f64,
}

const DEFAULT_SETTINGS: Settings = Settings { horizon: 1.0, steps: 64, epsilon: 0.0625, tol: 1e-6 };

/// Command failure carrying its exit status.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub kind: String,
    pub message: String,
}

impl Failure {
    pub fn to_json(&self) -> String {
        json!({ "error": self.kind, "message": self.message, "exit_code": self.code }).to_string()
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::MaxIterationsExceeded { .. } => EXIT_NOT_CONVERGED,
            _ => EXIT_INPUT_ERROR,
        };
        Failure { code, kind: e.kind().to_string(), message: e.to_string() }
    }
}

fn missing(what: &str) -> Failure {
    Failure { code: EXIT_INPUT_ERROR, kind: "MissingInput".into(), message: format!("{what} is required for this command") }
}

/// Successful run: the exit status, a line for standard output, and the manifest.
#[derive(Debug)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub manifest: RunManifest,
}

/// Graph, domain and datum from the configuration file and flags.
pub fn load_inputs(common: &Common) -> Result<Inputs, Failure> {
    let config = match &common.config {
        Some(p) => io::load_config(p)?,
        None => ConfigFile::default(),
    };
    let mut files: Vec<PathBuf> = common.config.iter().cloned().collect();
    let graph = common.graph.clone().or(config.graph).ok_or_else(|| missing("--graph"))?;
    files.push(graph.clone());
    let space = io::load_graph(&graph)?;
    let omega_ids = common.omega.clone().or(config.omega);
    let star_ids = common.omega_star.clone().or(config.omega_star);
    let all: Vec<usize> = (0..space.len()).collect();
    let star = match &star_ids {
        Some(ids) => io::resolve_ids(&space, ids)?,
        None => all.clone(),
    };
    let omega = match &omega_ids {
        Some(ids) => io::resolve_ids(&space, ids)?,
        None => star.clone(),
    };
    let domain = Domain::new(&space, &omega, &star)?;
    let u0 = match common.u0.clone().or(config.u0) {
        Some(p) => {
            let u0 = io::load_vertex_function(&p, &space)?;
            files.push(p);
            Some(u0)
        }
        None => None,
    };
    let settings = Settings {
        horizon: common.horizon.or(config.horizon).unwrap_or(DEFAULT_SETTINGS.horizon),
        steps: common.steps.or(config.steps).unwrap_or(DEFAULT_SETTINGS.steps),
        epsilon: common.eps.or(config.epsilon).unwrap_or(DEFAULT_SETTINGS.epsilon),
        tol: common.tol.or(config.tol).unwrap_or(DEFAULT_SETTINGS.tol),
    };
    Ok(Inputs { space, domain, u0, settings, files })
}

impl Inputs {
    fn u0(&self) -> Result<&VertexFunction, Failure> {
        self.u0.as_ref().ok_or_else(|| missing("--u0"))
    }

    fn grid(&self) -> Result<TimeGrid, Failure> {
        Ok(TimeGrid::new(self.settings.horizon, self.settings.steps)?)
    }

    fn solver_options(&self, common: &Common) -> SolverOptions {
        let defaults = SolverOptions::default();
        SolverOptions {
            max_iter: common.max_iter.unwrap_or(defaults.max_iter),
            seed: (common.seed != 0).then_some(common.seed),
        }
    }

    fn relax_config(&self) -> Result<RelaxConfig, Failure> {
        Ok(RelaxConfig::new(
            self.space.clone(),
            self.domain.clone(),
            self.grid()?,
            self.u0()?.clone(),
            self.settings.epsilon,
            self.settings.tol,
        )?)
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Hash of everything that determines the outputs: the arguments, the
/// merged settings and the contents of every input file.
fn config_hash(command: &str, args: &Value, inputs: &Inputs, files: &[&Path]) -> Result<String, Failure> {
    let mut digests = Vec::new();
    for f in files {
        let bytes = std::fs::read(f).map_err(|source| Error::Io { path: f.to_path_buf(), source })?;
        digests.push(sha256_hex(&bytes));
    }
    let mut args = args.clone();
    if let Some(map) = args.as_object_mut() {
        map.remove("out");
        if let Some(common) = map.get_mut("common").and_then(Value::as_object_mut) {
            common.remove("out");
        }
    }
    let canonical = json!({
        "command": command,
        "args": args,
        "settings": inputs.settings,
        "files": digests,
    });
    Ok(sha256_hex(canonical.to_string().as_bytes()))
}

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

/// JSON with keys in sorted order, so that equal values serialize identically.
pub fn canonical_json(value: &impl Serialize) -> String {
    let v = serde_json::to_value(value).expect("report serializes");
    serde_json::to_string_pretty(&v).expect("value serializes") + "\n"
}

/// Writes `<stem>.json` and the flat `<stem>.csv` twin, one row per check.
pub fn write_report(report: &VerificationReport, dir: &Path, stem: &str) -> Result<Vec<PathBuf>, Failure> {
    let json_path = dir.join(format!("{stem}.json"));
    io::write_file(&json_path, &canonical_json(report))?;
    let mut csv = String::from("name,property,lhs,rhs,residual,tolerance,pass\n");
    for c in &report.checks {
        csv.push_str(&format!(
            "{},{},{:?},{:?},{:?},{:?},{}\n",
            c.name, c.property, c.lhs, c.rhs, c.residual, c.tolerance, c.pass
        ));
    }
    let csv_path = dir.join(format!("{stem}.csv"));
    io::write_file(&csv_path, &csv)?;
    Ok(vec![json_path, csv_path])
}

fn write_json(path: PathBuf, value: &impl Serialize) -> Result<PathBuf, Failure> {
    io::write_file(&path, &canonical_json(value))?;
    Ok(path)
}

/// Runs a parsed command line; the manifest is written to `<out>/manifest.json`.
pub fn run(cli: Cli) -> Result<Outcome, Failure> {
    let started = unix_now();
    let (name, common, args) = match &cli.command {
        Command::Tv(c) => ("tv", c.clone(), json!(c)),
        Command::Doubling(c) => ("doubling", c.clone(), json!(c)),
        Command::Mollify(a) => ("mollify", a.common.clone(), json!(a)),
        Command::Relax(c) => ("relax", c.clone(), json!(c)),
        Command::Flow(c) => ("flow", c.clone(), json!(c)),
        Command::Verify(a) => ("verify", a.common.clone(), json!(a)),
        Command::Sweep(a) => ("sweep", a.common.clone(), json!(a)),
        Command::Compare(a) => ("compare", a.common.clone(), json!(a)),
    };
    let inputs = load_inputs(&common)?;
    let mut files: Vec<&Path> = inputs.files.iter().map(PathBuf::as_path).collect();
    let extra: Vec<PathBuf> = match &cli.command {
        Command::Mollify(a) => vec![a.input.clone(), io::sidecar_path(&a.input)],
        Command::Verify(a) => vec![a.trajectory.clone(), io::sidecar_path(&a.trajectory)],
        Command::Compare(a) => vec![a.v0.clone()],
        _ => Vec::new(),
    };
    files.extend(extra.iter().map(PathBuf::as_path));
    let hash = config_hash(name, &args, &inputs, &files)?;
    let out = common.out.as_path();

    let (code, stdout, mut outputs) = match &cli.command {
        Command::Tv(_) => {
            let value = total_variation(&inputs.space, inputs.u0()?, inputs.domain.omega_star()).value;
            (EXIT_PASS, format!("{value:?}"), Vec::new())
        }
        Command::Doubling(_) => (EXIT_PASS, format!("{:?}", doubling_constant(&inputs.space)), Vec::new()),
        Command::Mollify(a) => cmd_mollify(&inputs, a, out)?,
        Command::Relax(_) => cmd_relax(&inputs, inputs.solver_options(&common), out)?,
        Command::Flow(_) => cmd_flow(&inputs, out)?,
        Command::Verify(a) => cmd_verify(&inputs, a, out)?,
        Command::Sweep(a) => cmd_sweep(&inputs, a, out)?,
        Command::Compare(a) => cmd_compare(&inputs, a, out)?,
    };

    let manifest_path = out.join("manifest.json");
    outputs.push(manifest_path.clone());
    let manifest = RunManifest {
        command: name.to_string(),
        config_hash: hash,
        seed: common.seed,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        started_unix: started,
        finished_unix: unix_now(),
        outputs,
    };
    write_json(manifest_path, &manifest)?;
    Ok(Outcome { code, stdout, manifest })
}

type CommandResult = Result<(i32, String, Vec<PathBuf>), Failure>;

fn cmd_mollify(inputs: &Inputs, a: &MollifyArgs, out: &Path) -> CommandResult {
    let (v, _) = io::load_space_time(&a.input, &inputs.space)?;
    let anchor = match &inputs.u0 {
        Some(u0) => u0.clone(),
        None => v.slice(0).clone(),
    };
    let m = mollify(&v, a.h, &anchor)?;
    let paths = io::write_space_time(&out.join("mollified.csv"), &inputs.space, &m.values, Some("mollified"))?;
    Ok((EXIT_PASS, format!("wrote {}", paths[0].display()), paths))
}

fn cmd_relax(inputs: &Inputs, opts: SolverOptions, out: &Path) -> CommandResult {
    let cfg = inputs.relax_config()?;
    let report = minimize_f_eps_with(&cfg, &opts)?;
    let mut paths = io::write_space_time(&out.join("minimizer.csv"), &inputs.space, &report.minimizer, Some("relax"))?;
    paths.push(write_json(out.join("solver_report.json"), &report.summary())?);
    let checks = VerificationReport::new(energy_bounds(&cfg, &report)?);
    paths.extend(write_report(&checks, out, "energy_bounds")?);
    let code = if !report.converged {
        EXIT_NOT_CONVERGED
    } else if !checks.all_pass() {
        EXIT_CHECK_FAILURE
    } else {
        EXIT_PASS
    };
    let line = format!(
        "value {:?}, gap {:e}, scaled gap {:e}, {} iterations, converged {}",
        report.primal_value, report.dual_gap, report.scaled_gap, report.iterations, report.converged
    );
    Ok((code, line, paths))
}

fn cmd_flow(inputs: &Inputs, out: &Path) -> CommandResult {
    let traj = minimizing_movements(&inputs.space, &inputs.domain, inputs.u0()?, inputs.grid()?)?;
    let paths = io::write_space_time(&out.join("flow.csv"), &inputs.space, &traj.values, Some(traj.method.tag()))?;
    Ok((EXIT_PASS, format!("wrote {}", paths[0].display()), paths))
}

fn cmd_verify(inputs: &Inputs, a: &VerifyArgs, out: &Path) -> CommandResult {
    let (u, _) = io::load_space_time(&a.trajectory, &inputs.space)?;
    let grid = u.grid();
    let cert = Certificate { gap: a.gap, dt: grid.dt(), eps: inputs.settings.epsilon };
    let c = CandidateSolution::new(
        inputs.space.clone(),
        inputs.domain.clone(),
        inputs.u0()?.clone(),
        u,
        Provenance::File,
        cert,
    )?;
    let slack = Slack::standard(c.tv_u0());
    let mut report = initial_condition_check(&c, slack);
    report.extend(regularity_and_energy_check(&c, slack));
    report.extend(variational_battery(&c, BATTERY_SIZE, a.common.seed, slack)?);
    report.extend(parabolic_battery(&c, BATTERY_SIZE, a.common.seed.wrapping_add(1), slack)?);
    let paths = write_report(&report, out, "verification")?;
    let failed = report.failures().count();
    let code = if failed == 0 { EXIT_PASS } else { EXIT_CHECK_FAILURE };
    Ok((code, format!("{} checks, {failed} failed", report.checks.len()), paths))
}

#[derive(Debug, Clone, Serialize)]
struct SweepRow {
    epsilon: f64,
    steps: usize,
    l2_distance: f64,
    dual_gap: f64,
    scaled_gap: f64,
    iterations: usize,
    converged: bool,
}

fn cmd_sweep(inputs: &Inputs, a: &SweepArgs, out: &Path) -> CommandResult {
    let eps_list = a.eps_list.clone().unwrap_or_else(|| (2..=7).map(|j| 2f64.powi(-j)).collect());
    let n_list = a.n_list.clone().unwrap_or_else(|| vec![inputs.settings.steps]);
    let u0 = inputs.u0()?;
    let mut jobs = Vec::new();
    for &n in &n_list {
        for &eps in &eps_list {
            let grid = TimeGrid::new(inputs.settings.horizon, n)?;
            jobs.push(RelaxConfig::new(
                inputs.space.clone(),
                inputs.domain.clone(),
                grid,
                u0.clone(),
                eps,
                inputs.settings.tol,
            )?);
        }
    }
    let opts = inputs.solver_options(&a.common);
    let solve = |cfg: &RelaxConfig| -> Result<SweepRow, Error> {
        let oracle = minimizing_movements(&cfg.space, &cfg.domain, &cfg.u0, cfg.grid)?;
        let r = minimize_f_eps_with(cfg, &opts)?;
        let diff = r.minimizer.zip_map(&oracle.values, |x, y| x - y)?;
        Ok(SweepRow {
            epsilon: cfg.epsilon,
            steps: cfg.grid.steps(),
            l2_distance: l2_norm_sq_st(&cfg.space, &diff, cfg.domain.omega_star(), 0, cfg.grid.steps()).sqrt(),
            dual_gap: r.dual_gap,
            scaled_gap: r.scaled_gap,
            iterations: r.iterations,
            converged: r.converged,
        })
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(a.jobs.max(1))
        .build()
        .map_err(|e| Failure { code: EXIT_INPUT_ERROR, kind: "InvalidParameter".into(), message: e.to_string() })?;
    let rows: Vec<SweepRow> = pool.install(|| jobs.par_iter().map(solve).collect::<Result<Vec<_>, Error>>())?;

    let mut csv = String::from("epsilon,N,l2_distance,dual_gap,scaled_gap,iterations,converged\n");
    for r in &rows {
        csv.push_str(&format!(
            "{:?},{},{:?},{:?},{:?},{},{}\n",
            r.epsilon, r.steps, r.l2_distance, r.dual_gap, r.scaled_gap, r.iterations, r.converged
        ));
    }
    let csv_path = out.join("sweep.csv");
    io::write_file(&csv_path, &csv)?;
    let json_path = write_json(out.join("sweep.json"), &rows)?;
    let code = if rows.iter().all(|r| r.converged) { EXIT_PASS } else { EXIT_NOT_CONVERGED };
    Ok((code, format!("{} solves", rows.len()), vec![csv_path, json_path]))
}

fn cmd_compare(inputs: &Inputs, a: &CompareArgs, out: &Path) -> CommandResult {
    let cfg = inputs.relax_config()?;
    let v0 = io::load_vertex_function(&a.v0, &inputs.space)?;
    let opts = inputs.solver_options(&a.common);
    let outcome = comparison_test(&cfg, &cfg.u0, &v0, &opts, Slack::pointwise(&cfg))?;
    let paths = write_report(&outcome.report, out, "comparison")?;
    let code = if !(outcome.lower.converged && outcome.upper.converged) {
        EXIT_NOT_CONVERGED
    } else if !outcome.report.all_pass() {
        EXIT_CHECK_FAILURE
    } else {
        EXIT_PASS
    };
    let order = &outcome.report.checks[0];
    Ok((code, format!("largest excess {:e}, tolerance {:e}", order.lhs, order.tolerance), paths))
}
