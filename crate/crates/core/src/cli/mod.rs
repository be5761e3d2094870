//! Command-line front end: `solve`, `study` and `verify`.
//!
//! Exit codes: 0 success, 2 invalid configuration (nothing written),
//! 3 computation failure (partial outputs kept), 1 anything else.

mod config;

pub use config::{parse_config, read_config, Command, Overrides, RunConfig, MAX_PS, PROBLEMS};

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{error, info, warn};
use serde::Serialize;

use crate::adapt::{run_study_with, write_csv, CycleData, StudyConfig, StudyMode, StudyRecord};
use crate::io::{write_constants_csv, write_estimates_csv, write_mesh_vtk, write_slice_vtk, VtkFields};
use crate::mesh::RefinementPolicy;
use crate::problem::{builtin_problem, linear_problem, ProblemSpec};
use crate::verify::{run_verification, saturation_on_study, VerifyConfig};
use crate::{Error, Result};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "sthdg", version, about = "Space-time HDG for advection-diffusion with adaptive refinement")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Sub,
}

#[derive(Subcommand, Debug)]
pub enum Sub {
    /// Solve once on the initial mesh and dump the solution.
    Solve(Flags),
    /// Run a uniform or adaptive refinement study.
    Study(Flags),
    /// Measure inequality, bubble and saturation constants.
    Verify(Flags),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum DtPolicyArg {
    /// δt proportional to h
    H,
    /// δt proportional to h²
    H2,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Uniform,
    Amr,
}

#[derive(Args, Debug, Clone, Default)]
pub struct Flags {
    /// key = value config file; flags override it
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub problem: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub ps: Option<usize>,
    #[arg(long)]
    pub cycles: Option<usize>,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    #[arg(long, value_enum)]
    pub dt_policy: Option<DtPolicyArg>,
    /// time slabs of the initial mesh
    #[arg(long)]
    pub slabs: Option<usize>,
    /// cells per spatial axis of the initial mesh
    #[arg(long)]
    pub cells: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    pub refine_fraction: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub coarsen_fraction: Option<f64>,
    /// uniform levels of the constant sweep
    #[arg(long)]
    pub levels: Option<usize>,
    /// random samples per element shape
    #[arg(long)]
    pub samples: Option<usize>,
    /// adaptive cycles at which to measure the saturation ratio
    #[arg(long, value_delimiter = ',')]
    pub saturation_levels: Option<Vec<usize>>,
    /// times at which to write spatial slices
    #[arg(long, value_delimiter = ',')]
    pub slice_times: Option<Vec<f64>>,
    /// skip the VTK dumps
    #[arg(long)]
    pub no_vtk: bool,
    /// record real timings in study.csv (breaks byte-identical reruns)
    #[arg(long)]
    pub wall_clock: bool,
}

impl Flags {
    fn overrides(&self) -> Overrides {
        Overrides {
            problem: self.problem.clone(),
            eps: self.eps,
            dim: self.dim,
            ps: self.ps,
            dt_policy: self.dt_policy.map(|p| match p {
                DtPolicyArg::H => RefinementPolicy::Proportional,
                DtPolicyArg::H2 => RefinementPolicy::Quadratic,
            }),
            slabs: self.slabs,
            cells: self.cells,
            mode: self.mode.map(|m| match m {
                ModeArg::Uniform => StudyMode::Uniform,
                ModeArg::Amr => StudyMode::Amr,
            }),
            cycles: self.cycles,
            refine_fraction: self.refine_fraction,
            coarsen_fraction: self.coarsen_fraction,
            levels: self.levels,
            samples: self.samples,
            saturation_levels: self.saturation_levels.clone(),
            out: self.out.clone(),
            vtk: self.no_vtk.then_some(false),
            slice_times: self.slice_times.clone(),
            wall_clock: self.wall_clock.then_some(true),
            seed: self.seed,
            threads: self.threads,
        }
    }
}

/// Defaults, then the config file, then flags.
pub fn resolve(cli: &Cli) -> Result<RunConfig> {
    let (command, flags) = match &cli.command {
        Sub::Solve(f) => (Command::Solve, f),
        Sub::Study(f) => (Command::Study, f),
        Sub::Verify(f) => (Command::Verify, f),
    };
    let file = match &flags.config {
        Some(p) => read_config(p)?,
        None => Overrides::default(),
    };
    RunConfig::resolve(command, &file.overlay(&flags.overrides()))
}

pub fn problem_for(cfg: &RunConfig) -> Result<ProblemSpec> {
    match cfg.problem.as_str() {
        "linear" => linear_problem(cfg.dim, cfg.eps, [1.0, 0.5]),
        name => builtin_problem(name, cfg.eps),
    }
}

fn study_config(cfg: &RunConfig, mode: StudyMode, cycles: usize) -> StudyConfig {
    let mut s = StudyConfig::new(mode, cycles, cfg.ps, cfg.dt_policy);
    s.n_slabs = cfg.slabs;
    s.n_cells = cfg.cells;
    s.refine_fraction = cfg.refine_fraction;
    s.coarsen_fraction = cfg.coarsen_fraction;
    s
}

#[derive(Serialize)]
struct Manifest<'a> {
    package: &'static str,
    version: &'static str,
    config: &'a RunConfig,
    status: String,
    artifacts: Vec<String>,
    records: &'a [StudyRecord],
}

/// Where a run writes, and what it wrote.
struct Outputs {
    dir: PathBuf,
    written: Vec<String>,
}

impl Outputs {
    fn create(&mut self, name: &str) -> Result<BufWriter<File>> {
        if !self.written.iter().any(|w| w == name) {
            self.written.push(name.to_string());
        }
        Ok(BufWriter::new(File::create(self.dir.join(name))?))
    }
}

/// Result of executing a validated config: records for the manifest and
/// the error that stopped the computation, if any.
struct Executed {
    records: Vec<StudyRecord>,
    failure: Option<Error>,
}

fn write_vtks(out: &mut Outputs, cfg: &RunConfig, stem: &str, c: &CycleData) -> Result<()> {
    if !cfg.vtk {
        return Ok(());
    }
    let eta = c.estimate.eta_k();
    let fields = VtkFields { solution: Some((c.disc, c.solution)), eta: Some(&eta) };
    write_mesh_vtk(out.create(&format!("{stem}.vtk"))?, c.mesh, fields)?;
    for (i, &t) in cfg.slice_times.iter().enumerate() {
        write_slice_vtk(out.create(&format!("{stem}_slice{i}.vtk"))?, c.mesh, c.disc, c.solution, t)?;
    }
    Ok(())
}

fn execute(cfg: &RunConfig, spec: &ProblemSpec, out: &mut Outputs) -> Result<Executed> {
    match cfg.command {
        Command::Solve | Command::Study => {
            let solve = cfg.command == Command::Solve;
            let scfg = if solve { study_config(cfg, StudyMode::Uniform, 1) } else { study_config(cfg, cfg.mode, cfg.cycles) };
            let mut done: Vec<StudyRecord> = Vec::new();
            let res = run_study_with(spec, &scfg, |c| {
                let stem = if solve { "solution".to_string() } else { format!("cycle_{:02}", c.record.cycle) };
                write_vtks(out, cfg, &stem, c)?;
                let name = if solve { "estimates.csv".to_string() } else { format!("estimates_{:02}.csv", c.record.cycle) };
                write_estimates_csv(out.create(&name)?, c.estimate)?;
                if !solve {
                    // rewritten every cycle so an interrupted study leaves its rows behind
                    done.push(c.record.clone());
                    write_csv(out.create("study.csv")?, &done, cfg.wall_clock)?;
                }
                Ok(())
            });
            Ok(Executed { records: res.records, failure: res.failure })
        }
        Command::Verify => {
            let vcfg = VerifyConfig {
                levels: cfg.levels,
                n_slabs: cfg.slabs,
                n_cells: cfg.cells,
                ps: cfg.ps,
                policy: cfg.dt_policy,
                samples: cfg.samples,
                seed: cfg.seed,
            };
            let mut failure = None;
            let mut reports = match run_verification(spec, &vcfg) {
                Ok(r) => r,
                Err(e) => {
                    failure = Some(e);
                    Vec::new()
                }
            };
            if failure.is_none() && !cfg.saturation_levels.is_empty() {
                if spec.exact.is_none() {
                    warn!("{} has no exact solution; skipping the saturation ratio", spec.name);
                } else {
                    let levels = &cfg.saturation_levels;
                    let study = study_config(cfg, StudyMode::Amr, levels.iter().max().unwrap() + 1);
                    match saturation_on_study(spec, &study, levels) {
                        Ok(r) => reports.extend(r),
                        Err(e) => failure = Some(e),
                    }
                }
            }
            write_constants_csv(out.create("constants.csv")?, &reports)?;
            Ok(Executed { records: Vec::new(), failure })
        }
    }
}

/// Execute a validated config, writing artifacts under `cfg.out`. Returns
/// the exit code.
pub fn run(cfg: &RunConfig) -> i32 {
    let spec = match problem_for(cfg) {
        Ok(s) => s,
        Err(e) => {
            error!("{e}");
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    if let Some(n) = cfg.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            warn!("could not cap the thread pool: {e}");
        }
    }
    if let Err(e) = fs::create_dir_all(&cfg.out) {
        eprintln!("error: cannot create {}: {e}", cfg.out.display());
        return EXIT_FAILURE;
    }
    let mut out = Outputs { dir: cfg.out.clone(), written: Vec::new() };
    info!("{:?} {} eps={} into {}", cfg.command, cfg.problem, cfg.eps, cfg.out.display());
    let (code, status, records) = match execute(cfg, &spec, &mut out) {
        Ok(Executed { records, failure: None }) => (EXIT_OK, "ok".to_string(), records),
        Ok(Executed { records, failure: Some(e) }) => {
            eprintln!("error: {e}");
            let code = if matches!(e, Error::Io(_)) { EXIT_FAILURE } else { EXIT_SOLVER };
            (code, format!("failed: {e}"), records)
        }
        Err(e) => {
            eprintln!("error: {e}");
            (EXIT_FAILURE, format!("failed: {e}"), Vec::new())
        }
    };
    let manifest = Manifest {
        package: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        config: cfg,
        status,
        artifacts: out.written.clone(),
        records: &records,
    };
    if let Err(e) = write_manifest(&cfg.out, &manifest) {
        eprintln!("error: cannot write run.json: {e}");
        return if code == EXIT_OK { EXIT_FAILURE } else { code };
    }
    code
}

fn write_manifest(dir: &Path, m: &Manifest) -> Result<()> {
    let f = BufWriter::new(File::create(dir.join("run.json"))?);
    serde_json::to_writer_pretty(f, m).map_err(|e| Error::Io(e.into()))
}

fn init_logging() {
    let env = env_logger::Env::new().filter_or("STHDG_LOG", "warn");
    let _ = env_logger::Builder::from_env(env).try_init();
}

/// Parse arguments, run, and return the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    init_logging();
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match resolve(&cli) {
        Ok(cfg) => run(&cfg),
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_CONFIG
        }
    }
}
