//! Run configuration: a `key = value` file with sections, overlaid by
//! command-line flags, then checked before anything runs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use crate::adapt::StudyMode;
use crate::mesh::RefinementPolicy;
use crate::problem::BUILTIN_NAMES;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Solve,
    Study,
    Verify,
}

/// Every key a config file may set, by section.
const KEYS: &[(&str, &[&str])] = &[
    ("problem", &["name", "eps", "dim"]),
    ("discretization", &["ps", "dt_policy"]),
    ("mesh", &["slabs", "cells"]),
    ("study", &["mode", "cycles", "refine_fraction", "coarsen_fraction"]),
    ("verify", &["levels", "samples", "saturation_levels"]),
    ("output", &["out", "vtk", "slice_times", "wall_clock"]),
    ("run", &["seed", "threads"]),
];

/// Settings that may come from a file or from flags. `None` means unset.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub problem: Option<String>,
    pub eps: Option<f64>,
    pub dim: Option<usize>,
    pub ps: Option<usize>,
    pub dt_policy: Option<RefinementPolicy>,
    pub slabs: Option<usize>,
    pub cells: Option<usize>,
    pub mode: Option<StudyMode>,
    pub cycles: Option<usize>,
    pub refine_fraction: Option<f64>,
    pub coarsen_fraction: Option<f64>,
    pub levels: Option<usize>,
    pub samples: Option<usize>,
    pub saturation_levels: Option<Vec<usize>>,
    pub out: Option<PathBuf>,
    pub vtk: Option<bool>,
    pub slice_times: Option<Vec<f64>>,
    pub wall_clock: Option<bool>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
}

macro_rules! overlay {
    ($dst:ident, $src:ident, $($f:ident),*) => { $( if $src.$f.is_some() { $dst.$f = $src.$f.clone(); } )* };
}

impl Overrides {
    /// `other` wins wherever it is set.
    pub fn overlay(mut self, other: &Overrides) -> Overrides {
        overlay!(
            self, other, problem, eps, dim, ps, dt_policy, slabs, cells, mode, cycles, refine_fraction, coarsen_fraction,
            levels, samples, saturation_levels, out, vtk, slice_times, wall_clock, seed, threads
        );
        self
    }
}

pub fn parse_policy(s: &str) -> Result<RefinementPolicy> {
    match s {
        "h" => Ok(RefinementPolicy::Proportional),
        "h2" => Ok(RefinementPolicy::Quadratic),
        _ => Err(Error::Config(format!("dt_policy must be 'h' or 'h2', got '{s}'"))),
    }
}

pub fn parse_mode(s: &str) -> Result<StudyMode> {
    match s {
        "uniform" => Ok(StudyMode::Uniform),
        "amr" => Ok(StudyMode::Amr),
        _ => Err(Error::Config(format!("mode must be 'uniform' or 'amr', got '{s}'"))),
    }
}

fn scalar<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| Error::Config(format!("cannot parse {key} = '{v}'")))
}

fn list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    if v.trim().is_empty() {
        return Ok(Vec::new());
    }
    v.split(',').map(|s| scalar(key, s.trim())).collect()
}

fn boolean(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Config(format!("{key} must be true or false, got '{v}'"))),
    }
}

/// Parse config text. Keys outside any section are looked up by name.
pub fn parse_config(text: &str) -> Result<Overrides> {
    let mut section: Option<String> = None;
    let mut seen: BTreeMap<&str, usize> = BTreeMap::new();
    let mut o = Overrides::default();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split(['#', ';']).next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let at = |msg: String| Error::Config(format!("line {}: {msg}", n + 1));
        if let Some(name) = line.strip_prefix('[') {
            let name = name.strip_suffix(']').ok_or_else(|| at(format!("malformed section header '{line}'")))?.trim();
            if !KEYS.iter().any(|(s, _)| *s == name) {
                return Err(at(format!("unknown section [{name}]")));
            }
            section = Some(name.to_string());
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| at(format!("expected key = value, got '{line}'")))?;
        let (key, value) = (key.trim(), value.trim());
        let owner = KEYS.iter().find(|(_, ks)| ks.contains(&key)).map(|(s, _)| *s);
        let owner = match (owner, &section) {
            (None, _) => return Err(at(format!("unknown key '{key}'"))),
            (Some(s), Some(cur)) if s != cur => return Err(at(format!("key '{key}' belongs in [{s}], not [{cur}]"))),
            (Some(s), _) => s,
        };
        let key: &'static str = KEYS.iter().find(|(s, _)| *s == owner).unwrap().1.iter().find(|k| **k == key).unwrap();
        if let Some(prev) = seen.insert(key, n + 1) {
            return Err(at(format!("'{key}' already set on line {prev}")));
        }
        match key {
            "name" => o.problem = Some(value.to_string()),
            "eps" => o.eps = Some(scalar(key, value)?),
            "dim" => o.dim = Some(scalar(key, value)?),
            "ps" => o.ps = Some(scalar(key, value)?),
            "dt_policy" => o.dt_policy = Some(parse_policy(value)?),
            "slabs" => o.slabs = Some(scalar(key, value)?),
            "cells" => o.cells = Some(scalar(key, value)?),
            "mode" => o.mode = Some(parse_mode(value)?),
            "cycles" => o.cycles = Some(scalar(key, value)?),
            "refine_fraction" => o.refine_fraction = Some(scalar(key, value)?),
            "coarsen_fraction" => o.coarsen_fraction = Some(scalar(key, value)?),
            "levels" => o.levels = Some(scalar(key, value)?),
            "samples" => o.samples = Some(scalar(key, value)?),
            "saturation_levels" => o.saturation_levels = Some(list(key, value)?),
            "out" => o.out = Some(PathBuf::from(value)),
            "vtk" => o.vtk = Some(boolean(key, value)?),
            "slice_times" => o.slice_times = Some(list(key, value)?),
            "wall_clock" => o.wall_clock = Some(boolean(key, value)?),
            "seed" => o.seed = Some(scalar(key, value)?),
            "threads" => o.threads = Some(scalar(key, value)?),
            _ => unreachable!("key table and match disagree on '{key}'"),
        }
    }
    Ok(o)
}

pub fn read_config(path: &Path) -> Result<Overrides> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read config file {}: {e}", path.display())))?;
    parse_config(&text)
}

/// A validated run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: Command,
    pub problem: String,
    pub eps: f64,
    pub dim: usize,
    pub ps: usize,
    pub dt_policy: RefinementPolicy,
    pub slabs: usize,
    pub cells: usize,
    pub mode: StudyMode,
    pub cycles: usize,
    pub refine_fraction: f64,
    pub coarsen_fraction: f64,
    pub levels: usize,
    pub samples: usize,
    pub saturation_levels: Vec<usize>,
    pub out: PathBuf,
    pub vtk: bool,
    pub slice_times: Vec<f64>,
    pub wall_clock: bool,
    pub seed: u64,
    pub threads: Option<usize>,
}

/// Problems the CLI knows: the three benchmarks (d = 2) and `linear`,
/// whose exact solution lies in the discrete space (d = 1 or 2).
pub const PROBLEMS: [&str; 4] = ["rotating_pulse", "boundary_layer", "interior_layer", "linear"];

/// Largest spatial degree accepted on the command line.
pub const MAX_PS: usize = 4;

impl RunConfig {
    /// Fill defaults and validate.
    pub fn resolve(command: Command, o: &Overrides) -> Result<RunConfig> {
        let bad = |m: String| Err(Error::Config(m));
        let problem = o.problem.clone().unwrap_or_else(|| "rotating_pulse".into());
        if !PROBLEMS.contains(&problem.as_str()) {
            return bad(format!("unknown problem '{problem}' (known: {})", PROBLEMS.join(", ")));
        }
        let dim = o.dim.unwrap_or(2);
        if !(1..=2).contains(&dim) {
            return bad(format!("dim must be 1 or 2, got {dim}"));
        }
        if BUILTIN_NAMES.contains(&problem.as_str()) && dim != 2 {
            return bad(format!("{problem} is a two-dimensional problem, got dim = {dim}"));
        }
        let eps = o.eps.unwrap_or(1e-3);
        if !(eps.is_finite() && eps > 0.0) {
            return bad(format!("eps must be a positive number, got {eps}"));
        }
        let ps = o.ps.unwrap_or(1);
        if !(1..=MAX_PS).contains(&ps) {
            return bad(format!("ps must lie in 1..={MAX_PS}, got {ps}"));
        }
        let default_policy = if command == Command::Verify { RefinementPolicy::Quadratic } else { RefinementPolicy::Proportional };
        let slabs = o.slabs.unwrap_or(2);
        let cells = o.cells.unwrap_or(if command == Command::Verify { 4 } else { 2 });
        if slabs == 0 || cells == 0 {
            return bad("slabs and cells must be at least 1".into());
        }
        let cycles = o.cycles.unwrap_or(if command == Command::Solve { 1 } else { 8 });
        if cycles == 0 {
            return bad("cycles must be at least 1".into());
        }
        let refine_fraction = o.refine_fraction.unwrap_or(0.25);
        let coarsen_fraction = o.coarsen_fraction.unwrap_or(0.10);
        let frac_ok = |f: f64| (0.0..=1.0).contains(&f);
        if !frac_ok(refine_fraction) || !frac_ok(coarsen_fraction) || refine_fraction + coarsen_fraction > 1.0 {
            return bad(format!(
                "marking fractions {refine_fraction} and {coarsen_fraction} must lie in [0,1] and sum to at most 1"
            ));
        }
        let levels = o.levels.unwrap_or(3);
        let samples = o.samples.unwrap_or(crate::verify::DEFAULT_SAMPLES);
        if levels == 0 || samples == 0 {
            return bad("levels and samples must be at least 1".into());
        }
        let slice_times = o.slice_times.clone().unwrap_or_default();
        if let Some(t) = slice_times.iter().find(|t| !(0.0..=1.0).contains(*t)) {
            return bad(format!("slice time {t} outside [0, 1]"));
        }
        if o.threads == Some(0) {
            return bad("threads must be at least 1".into());
        }
        Ok(RunConfig {
            command,
            problem,
            eps,
            dim,
            ps,
            dt_policy: o.dt_policy.unwrap_or(default_policy),
            slabs,
            cells,
            mode: o.mode.unwrap_or(StudyMode::Amr),
            cycles,
            refine_fraction,
            coarsen_fraction,
            levels,
            samples,
            saturation_levels: o.saturation_levels.clone().unwrap_or_else(|| vec![2, 3, 4]),
            out: o.out.clone().unwrap_or_else(|| PathBuf::from("out")),
            vtk: o.vtk.unwrap_or(true),
            slice_times,
            wall_clock: o.wall_clock.unwrap_or(false),
            seed: o.seed.unwrap_or(0),
            threads: o.threads,
        })
    }
}
