//! Command-line driver: one subcommand per study, JSON and CSV artifacts plus
//! a manifest in the output directory.

use std::ffi::OsString;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::bounds::{self, BoundsReport};
use crate::cell_solver::{self, Microstructure, NamedGeometry};
use crate::error::Error;
use crate::laminate::{self, LaminateSpec, MatrixPhase};
use crate::perturbation::{self, StudySpec};
use crate::tensor::{PhasePair, SymTensor};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_SOLVER: i32 = 2;
pub const EXIT_BOUND_VIOLATION: i32 = 3;

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_OUT: &str = "polarize-out";
pub const THREADS_ENV: &str = "POLARIZE_THREADS";

/// Comma-separated real vector, `1,0` on the command line and `[1, 0]` in JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Vector(pub Vec<f64>);

impl FromStr for Vector {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        s.split(',')
            .map(|v| v.trim().parse::<f64>().map_err(|e| format!("{v:?}: {e}")))
            .collect::<Result<_, _>>()
            .map(Vector)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
pub struct GlobalArgs {
    /// Background (matrix) conductivity.
    #[arg(long, global = true)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma0: Option<f64>,
    /// Inclusion conductivity, below gamma0.
    #[arg(long, global = true)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma1: Option<f64>,
    /// Solver relative residual.
    #[arg(long, global = true)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    /// Seed for randomized geometries; never defaulted.
    #[arg(long, global = true)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    /// Exit with status 3 when a bound check fails.
    #[arg(long, global = true)]
    #[serde(default)]
    pub strict: bool,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LaminateArgs {
    /// Laminate spec file; replaces the other laminate flags.
    #[arg(long, conflicts_with_all = ["theta", "rank", "dir", "weights", "stages"])]
    #[serde(default)]
    pub spec: Option<PathBuf>,
    #[arg(long)]
    #[serde(default)]
    pub theta: Option<f64>,
    /// Number of lamination directions; checked against `--dir`.
    #[arg(long)]
    #[serde(default)]
    pub rank: Option<usize>,
    /// Unit lamination direction, repeated once per stage.
    #[arg(long = "dir")]
    #[serde(default)]
    pub dir: Vec<Vector>,
    /// Lamination weights, required above rank 1.
    #[arg(long, conflicts_with = "stages")]
    #[serde(default)]
    pub weights: Option<Vector>,
    /// Stage proportions instead of weights and theta.
    #[arg(long)]
    #[serde(default)]
    pub stages: Option<Vector>,
    #[arg(long, default_value = "gamma0")]
    #[serde(default = "default_matrix")]
    pub matrix: MatrixArg,
}

fn default_matrix() -> MatrixArg {
    MatrixArg::Gamma0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatrixArg {
    Gamma0,
    Gamma1,
}

impl From<MatrixArg> for MatrixPhase {
    fn from(m: MatrixArg) -> Self {
        match m {
            MatrixArg::Gamma0 => MatrixPhase::Gamma0,
            MatrixArg::Gamma1 => MatrixPhase::Gamma1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HomogenizeArgs {
    /// Microstructure file, or a named geometry such as `disk(0.3)` or
    /// `random(0.3,7,4)` (fraction, seed, grain).
    #[arg(long)]
    pub micro: String,
    /// Dimension of a named geometry.
    #[arg(long, default_value_t = 2)]
    #[serde(default = "default_dim")]
    pub dim: usize,
    /// Grid resolution of a named geometry.
    #[arg(long, default_value_t = 64)]
    #[serde(default = "default_resolution")]
    pub resolution: usize,
}

fn default_dim() -> usize {
    2
}

fn default_resolution() -> usize {
    64
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsArgs {
    /// Tensor file `{"dim": N, "matrix": [[...], ...]}`.
    #[arg(long)]
    pub tensor: PathBuf,
    /// Volume fraction; 0 checks the zero-volume bounds.
    #[arg(long)]
    pub theta: f64,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionArgs {
    #[arg(long)]
    pub theta: f64,
    /// Samples per curve.
    #[arg(long)]
    pub points: usize,
    #[arg(long, default_value_t = 2)]
    #[serde(default = "default_dim")]
    pub dim: usize,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiluteArgs {
    /// Target eigenvalues of the zero-volume polarization tensor.
    #[arg(long)]
    pub target: Vector,
    /// Number of fractions `theta_n = 2^-n`, `n = 1..=steps`.
    #[arg(long)]
    pub steps: u32,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbArgs {
    /// Study spec file; `gamma0`/`gamma1` fall back to the global flags.
    #[arg(long)]
    pub problem: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(tag = "subcommand", rename_all = "snake_case")]
pub enum Command {
    /// Effective and polarization tensors of a sequential laminate.
    Laminate(LaminateArgs),
    /// Periodic cell homogenization of a pixel microstructure.
    Homogenize(HomogenizeArgs),
    /// Check a polarization tensor against the bounds.
    Bounds(BoundsArgs),
    /// Boundary curves of the attainable eigenvalue region.
    Region(RegionArgs),
    /// Dilution study toward a zero-volume target.
    Dilute(DiluteArgs),
    /// Boundary current perturbation study on the unit square.
    Perturb(PerturbArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Self::Laminate(_) => "laminate",
            Self::Homogenize(_) => "homogenize",
            Self::Bounds(_) => "bounds",
            Self::Region(_) => "region",
            Self::Dilute(_) => "dilute",
            Self::Perturb(_) => "perturb",
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "polarize", version, about = "Polarization and homogenized tensors of two-phase composites")]
struct Cli {
    /// JSON run config holding `subcommand` and its fields; flags given on
    /// the command line take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Debug, Deserialize)]
struct ConfigFile {
    #[serde(flatten)]
    global: GlobalArgs,
    #[serde(flatten)]
    command: Command,
}

/// Fully resolved run configuration, echoed in the manifest.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub gamma0: Option<f64>,
    pub gamma1: Option<f64>,
    pub tol: f64,
    pub seed: Option<u64>,
    pub out: PathBuf,
    pub strict: bool,
    #[serde(flatten)]
    pub command: Command,
}

impl RunConfig {
    fn phases(&self) -> Result<PhasePair, Failure> {
        match (self.gamma0, self.gamma1) {
            (Some(g0), Some(g1)) => Ok(PhasePair::new(g0, g1)?),
            (None, _) => Err(Failure::invalid("missing --gamma0")),
            (_, None) => Err(Failure::invalid("missing --gamma1")),
        }
    }
}

/// A failed run: exit status and message.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn invalid(msg: impl Into<String>) -> Self {
        Self { code: EXIT_INVALID, message: msg.into() }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::SolverDiverged { .. } | Error::EigenNoConvergence { .. } => EXIT_SOLVER,
            _ => EXIT_INVALID,
        };
        Self { code, message: e.to_string() }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Error::from(e).into()
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Error::from(e).into()
    }
}

/// Artifacts of a run, in write order.
#[derive(Debug, Default)]
pub struct Outcome {
    pub files: Vec<(String, String)>,
    /// Set when a bound check failed.
    pub violation: Option<String>,
}

impl Outcome {
    fn add(&mut self, name: &str, content: String) {
        self.files.push((name.to_string(), content));
    }

    fn check(&mut self, what: &str, report: &BoundsReport) {
        if !report.all_ok() && self.violation.is_none() {
            self.violation = Some(format!("{what} violates the bounds (worst slack {:e})", report.slacks.min().unwrap_or(f64::NAN)));
        }
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    artifact: &'static str,
    version: &'static str,
    subcommand: &'static str,
    seed: Option<u64>,
    config: &'a RunConfig,
    files: Vec<&'a str>,
    bound_violation: Option<&'a str>,
}

fn pretty<T: Serialize>(v: &T) -> Result<String, Failure> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::invalid(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::invalid(format!("{}: {e}", path.display())))
}

/// Merges the command line over the config file into a run config.
fn resolve(cli: Cli) -> Result<RunConfig, Failure> {
    let (file_global, file_command) = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Failure::invalid(format!("{}: {e}", path.display())))?;
            if text.trim().is_empty() {
                return Err(Failure::invalid(format!("{}: config is empty, missing field `subcommand`", path.display())));
            }
            let cfg: ConfigFile =
                serde_json::from_str(&text).map_err(|e| Failure::invalid(format!("{}: {e}", path.display())))?;
            (cfg.global, Some(cfg.command))
        }
        None => (GlobalArgs::default(), None),
    };
    let command = cli
        .command
        .or(file_command)
        .ok_or_else(|| Failure::invalid("missing `subcommand`: give one on the command line or in --config"))?;
    let g = cli.global;
    let tol = g.tol.or(file_global.tol).unwrap_or(DEFAULT_TOL);
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Failure::invalid(format!("--tol {tol} must lie in (0, 1)")));
    }
    Ok(RunConfig {
        gamma0: g.gamma0.or(file_global.gamma0),
        gamma1: g.gamma1.or(file_global.gamma1),
        tol,
        seed: g.seed.or(file_global.seed),
        out: g.out.or(file_global.out).unwrap_or_else(|| PathBuf::from(DEFAULT_OUT)),
        strict: g.strict || file_global.strict,
        command,
    })
}

/// Executes a resolved config and returns its artifacts without writing them.
pub fn execute(cfg: &RunConfig) -> Result<Outcome, Failure> {
    let mut out = Outcome::default();
    match &cfg.command {
        Command::Laminate(a) => run_laminate(cfg, a, &mut out)?,
        Command::Homogenize(a) => run_homogenize(cfg, a, &mut out)?,
        Command::Bounds(a) => run_bounds(cfg, a, &mut out)?,
        Command::Region(a) => {
            let curves = bounds::sample_region_curves(a.dim, a.theta, cfg.phases()?, a.points)?;
            out.add("region.csv", curves.to_csv());
        }
        Command::Dilute(a) => run_dilute(cfg, a, &mut out)?,
        Command::Perturb(a) => run_perturb(cfg, a, &mut out)?,
    }
    Ok(out)
}

fn laminate_spec(a: &LaminateArgs) -> Result<LaminateSpec, Failure> {
    if let Some(path) = &a.spec {
        return read_json(path);
    }
    let dirs: Vec<Vec<f64>> = a.dir.iter().map(|d| d.0.clone()).collect();
    let dim = dirs.first().map(Vec::len).ok_or_else(|| Failure::invalid("missing --dir"))?;
    if let Some(rank) = a.rank {
        if rank != dirs.len() {
            return Err(Failure::invalid(format!("--rank {rank} but {} --dir given", dirs.len())));
        }
    }
    let matrix = a.matrix.into();
    if let Some(stages) = &a.stages {
        if a.theta.is_some() {
            return Err(Failure::invalid("--theta is implied by --stages"));
        }
        return Ok(LaminateSpec::with_stages(dim, dirs, stages.0.clone(), matrix)?);
    }
    let theta = a.theta.ok_or_else(|| Failure::invalid("missing --theta"))?;
    let weights = match &a.weights {
        Some(w) => w.0.clone(),
        None if dirs.len() == 1 => vec![1.0],
        None => return Err(Failure::invalid("missing --weights for a rank above 1")),
    };
    Ok(LaminateSpec::with_weights(dim, dirs, weights, theta, matrix)?)
}

#[derive(Serialize)]
struct LaminateOutput<'a> {
    spec: &'a LaminateSpec,
    theta: f64,
    gamma_star: SymTensor,
    m_theta: SymTensor,
    bounds: BoundsReport,
}

fn run_laminate(cfg: &RunConfig, a: &LaminateArgs, out: &mut Outcome) -> Result<(), Failure> {
    let phases = cfg.phases()?;
    let spec = laminate_spec(a)?;
    let theta = spec.theta();
    let gamma_star = laminate::laminate_effective_tensor(&spec, phases)?;
    let m_theta = laminate::laminate_polarization(&spec, phases)?;
    let report = check_at(&m_theta, theta, phases)?;
    out.check("laminate polarization tensor", &report);
    out.add(
        "laminate.json",
        pretty(&LaminateOutput { spec: &spec, theta, gamma_star, m_theta, bounds: report })?,
    );
    Ok(())
}

/// The bound check appropriate to `theta`.
fn check_at(m: &SymTensor, theta: f64, phases: PhasePair) -> Result<BoundsReport, Failure> {
    Ok(if theta == 0.0 {
        bounds::check_trace_zero(m, phases)?
    } else if theta < 1.0 {
        bounds::check_trace_theta(m, theta, phases)?
    } else {
        bounds::check_pointwise(m, theta, phases)?
    })
}

fn load_micro(cfg: &RunConfig, a: &HomogenizeArgs) -> Result<Microstructure, Failure> {
    let path = Path::new(&a.micro);
    if path.is_file() {
        return Ok(Microstructure::load(path)?);
    }
    let named = NamedGeometry::parse(&a.micro)
        .map_err(|e| Failure::invalid(format!("--micro {:?} is neither a file nor a geometry: {e}", a.micro)))?;
    Ok(named.build(a.dim, a.resolution, cfg.seed)?)
}

fn run_homogenize(cfg: &RunConfig, a: &HomogenizeArgs, out: &mut Outcome) -> Result<(), Failure> {
    let phases = cfg.phases()?;
    let micro = load_micro(cfg, a)?;
    let res = cell_solver::homogenize(&micro, phases, cfg.tol)?;
    if let Some(report) = &res.bounds {
        out.check("cell polarization tensor", report);
    }
    out.add("homogenize.json", pretty(&res)?);
    Ok(())
}

fn run_bounds(cfg: &RunConfig, a: &BoundsArgs, out: &mut Outcome) -> Result<(), Failure> {
    let phases = cfg.phases()?;
    let m: SymTensor = read_json(&a.tensor)?;
    let report = check_at(&m, a.theta, phases)?;
    out.check("tensor", &report);
    out.add("bounds.json", pretty(&report)?);
    Ok(())
}

#[derive(Serialize)]
struct DiluteOutput<'a> {
    target: &'a [f64],
    trace: &'a laminate::DilutionTrace,
    limit_eigenvalues: Vec<f64>,
    bounds: BoundsReport,
}

fn run_dilute(cfg: &RunConfig, a: &DiluteArgs, out: &mut Outcome) -> Result<(), Failure> {
    let phases = cfg.phases()?;
    if a.steps < 2 || a.steps > 60 {
        return Err(Failure::invalid(format!("--steps {} must lie in 2..=60", a.steps)));
    }
    let thetas: Vec<f64> = (1..=a.steps).map(|n| 0.5f64.powi(n as i32)).collect();
    let trace = laminate::run_dilution_study(&a.target.0, &thetas, phases)?;
    let dim = a.target.0.len();
    let mut csv = String::from("n,theta");
    for i in 1..=dim {
        csv += &format!(",lambda{i}");
    }
    csv += ",trace\n";
    for (n, (t, m)) in thetas.iter().zip(&trace.tensors).enumerate() {
        let eig = m.eigenvalues()?;
        csv += &format!("{},{:.17e}", n + 1, t);
        for v in &eig {
            csv += &format!(",{v:.17e}");
        }
        csv += &format!(",{:.17e}\n", m.trace());
    }
    let report = bounds::check_trace_zero(&trace.limit_estimate, phases)?;
    out.check("extrapolated zero-volume tensor", &report);
    let limit_eigenvalues = trace.limit_eigenvalues()?;
    out.add("dilute.csv", csv);
    out.add(
        "dilute.json",
        pretty(&DiluteOutput { target: &a.target.0, trace: &trace, limit_eigenvalues, bounds: report })?,
    );
    Ok(())
}

fn run_perturb(cfg: &RunConfig, a: &PerturbArgs, out: &mut Outcome) -> Result<(), Failure> {
    let mut value: serde_json::Value = read_json(&a.problem)?;
    let obj = value
        .as_object_mut()
        .ok_or_else(|| Failure::invalid(format!("{}: expected a JSON object", a.problem.display())))?;
    for (key, flag) in [("gamma0", cfg.gamma0), ("gamma1", cfg.gamma1)] {
        if !obj.contains_key(key) {
            let v = flag.ok_or_else(|| Failure::invalid(format!("missing `{key}` in the problem file and on the command line")))?;
            obj.insert(key.into(), v.into());
        }
    }
    let spec: StudySpec =
        serde_json::from_value(value).map_err(|e| Failure::invalid(format!("{}: {e}", a.problem.display())))?;
    let table = perturbation::convergence_study(&spec, cfg.tol)?;
    out.add("perturb.csv", table.to_csv());
    out.add("perturb.json", pretty(&table)?);
    Ok(())
}

/// Writes the artifacts and the manifest into the output directory.
pub fn write_outputs(cfg: &RunConfig, outcome: &Outcome) -> Result<(), Failure> {
    std::fs::create_dir_all(&cfg.out)?;
    for (name, content) in &outcome.files {
        std::fs::write(cfg.out.join(name), content)?;
    }
    let manifest = Manifest {
        artifact: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        subcommand: cfg.command.name(),
        seed: cfg.seed,
        config: cfg,
        files: outcome.files.iter().map(|(n, _)| n.as_str()).collect(),
        bound_violation: outcome.violation.as_deref(),
    };
    std::fs::write(cfg.out.join("manifest.json"), pretty(&manifest)?)?;
    Ok(())
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(v) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Failure::invalid(format!("{THREADS_ENV}={v:?} is not a positive integer")))?;
    // a pool configured earlier in the process is kept
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Parses `args`, runs, writes outputs, and returns the exit status. The
/// primary artifact goes to stdout and failures to stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run_with_output(args, &mut std::io::stdout())
}

/// [`run`] with the primary artifact written to `stdout`.
pub fn run_with_output<I, T>(args: I, stdout: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match run_cli(cli, stdout) {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {f}");
            f.code
        }
    }
}

fn run_cli(cli: Cli, stdout: &mut dyn Write) -> Result<i32, Failure> {
    configure_threads()?;
    let cfg = resolve(cli)?;
    let outcome = execute(&cfg)?;
    write_outputs(&cfg, &outcome)?;
    if let Some((_, content)) = outcome.files.first() {
        stdout.write_all(content.as_bytes())?;
    }
    match &outcome.violation {
        Some(v) if cfg.strict => {
            eprintln!("error: {v}");
            Ok(EXIT_BOUND_VIOLATION)
        }
        Some(v) => {
            eprintln!("warning: {v}");
            Ok(EXIT_OK)
        }
        None => Ok(EXIT_OK),
    }
}
