//! Fixed-fraction marking and the solve, estimate, mark, refine loop.

use std::io::Write;
use std::time::Instant;

use log::info;
use serde::{Deserialize, Serialize};

use crate::assembly::{assemble, DiscreteSolution, Discretization};
use crate::estimator::{efficiency_index, error_norms, estimate, Estimate, NormReport};
use crate::mesh::{RefinementPolicy, SpaceTimeMesh};
use crate::problem::ProblemSpec;
use crate::solver::{solve, solve_time_blocks, SolveReport};
use crate::{Error, Result};

pub const CSV_HEADER: &str = "cycle,n_elements,n_dofs,eta,true_error,eff_index,wall_ms";

/// Refine the top `refine_fraction` and coarsen the bottom
/// `coarsen_fraction` of elements by η_K (descending, ties by ascending id).
pub fn mark(estimates: &[(u64, f64)], refine_fraction: f64, coarsen_fraction: f64) -> Result<(Vec<u64>, Vec<u64>)> {
    if estimates.is_empty() {
        return Err(Error::InvalidArgument("no element estimates to mark".into()));
    }
    let ok = |f: f64| (0.0..=1.0).contains(&f);
    if !ok(refine_fraction) || !ok(coarsen_fraction) || refine_fraction + coarsen_fraction > 1.0 {
        return Err(Error::InvalidArgument(format!(
            "marking fractions {refine_fraction} and {coarsen_fraction} must lie in [0,1] and sum to at most 1"
        )));
    }
    let mut order: Vec<(u64, f64)> = estimates.to_vec();
    order.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let n = order.len();
    let nr = ((refine_fraction * n as f64).ceil() as usize).min(n);
    let nc = ((coarsen_fraction * n as f64).floor() as usize).min(n - nr);
    let refine = order[..nr].iter().map(|e| e.0).collect();
    let coarsen = order[n - nc..].iter().map(|e| e.0).collect();
    Ok((refine, coarsen))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StudyMode {
    Uniform,
    Amr,
}

#[derive(Debug, Clone, Serialize)]
pub struct StudyConfig {
    pub mode: StudyMode,
    pub cycles: usize,
    pub ps: usize,
    pub policy: RefinementPolicy,
    pub n_slabs: usize,
    pub n_cells: usize,
    pub refine_fraction: f64,
    pub coarsen_fraction: f64,
    /// forward substitution over time blocks instead of one global LU
    pub time_blocks: bool,
}

impl StudyConfig {
    pub fn new(mode: StudyMode, cycles: usize, ps: usize, policy: RefinementPolicy) -> Self {
        StudyConfig {
            mode,
            cycles,
            ps,
            policy,
            n_slabs: 2,
            n_cells: 4,
            refine_fraction: 0.25,
            coarsen_fraction: 0.10,
            time_blocks: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyRecord {
    pub cycle: usize,
    pub n_elements: usize,
    pub n_dofs: usize,
    pub eta: f64,
    /// NaN when no exact solution is known
    pub true_error: f64,
    pub eff_index: Option<f64>,
    pub wall_ms: f64,
}

/// Everything produced by one cycle, handed to the study observer.
pub struct CycleData<'a> {
    pub mesh: &'a SpaceTimeMesh,
    pub disc: &'a Discretization,
    pub solution: &'a DiscreteSolution,
    pub estimate: &'a Estimate,
    pub norms: Option<&'a NormReport>,
    pub solve: &'a SolveReport,
    pub record: &'a StudyRecord,
}

/// Records of a study; `failure` holds the error that stopped it early.
#[derive(Debug)]
pub struct StudyResult {
    pub records: Vec<StudyRecord>,
    pub failure: Option<Error>,
}

/// Assemble and solve on `mesh`.
pub fn solve_on(
    mesh: &SpaceTimeMesh,
    spec: &ProblemSpec,
    disc: &Discretization,
    time_blocks: bool,
) -> Result<(DiscreteSolution, SolveReport)> {
    let (sys, dofmap) = assemble(mesh, spec, disc);
    let (x, rep) = if time_blocks {
        let blocks = dofmap.time_blocks(mesh);
        solve_time_blocks(&sys, &blocks)?
    } else {
        solve(&sys)?
    };
    Ok((DiscreteSolution { dofmap, values: x }, rep))
}

pub fn run_study(spec: &ProblemSpec, cfg: &StudyConfig) -> StudyResult {
    run_study_with(spec, cfg, |_| Ok(()))
}

/// The study loop; `observe` runs after each cycle's records are final.
pub fn run_study_with<F>(spec: &ProblemSpec, cfg: &StudyConfig, mut observe: F) -> StudyResult
where
    F: FnMut(&CycleData) -> Result<()>,
{
    let mut records = Vec::new();
    let failure = (|| -> Result<()> {
        if cfg.cycles == 0 {
            return Err(Error::InvalidArgument("a study needs at least one cycle".into()));
        }
        let disc = Discretization::new(spec.domain.d, cfg.ps);
        let mut mesh = SpaceTimeMesh::build_initial(spec.domain.clone(), cfg.n_slabs, cfg.n_cells, cfg.policy)?;
        for cycle in 0..cfg.cycles {
            let start = Instant::now();
            let (sol, srep) = solve_on(&mesh, spec, &disc, cfg.time_blocks)?;
            let est = estimate(&mesh, &disc, spec, &sol);
            let norms = if spec.exact.is_some() { Some(error_norms(&mesh, &disc, spec, &sol)?) } else { None };
            let true_error = norms.as_ref().map_or(f64::NAN, |n| n.st);
            let record = StudyRecord {
                cycle,
                n_elements: mesh.n_elements(),
                n_dofs: sol.dofmap.n_dofs,
                eta: est.eta,
                true_error,
                eff_index: efficiency_index(est.eta, true_error),
                wall_ms: start.elapsed().as_secs_f64() * 1e3,
            };
            info!(
                "cycle {cycle}: {} elements, {} dofs, eta {:.4e}, error {:.4e}",
                record.n_elements, record.n_dofs, record.eta, record.true_error
            );
            records.push(record.clone());
            observe(&CycleData {
                mesh: &mesh,
                disc: &disc,
                solution: &sol,
                estimate: &est,
                norms: norms.as_ref(),
                solve: &srep,
                record: &record,
            })?;
            if cycle + 1 == cfg.cycles {
                break;
            }
            mesh = match cfg.mode {
                StudyMode::Uniform => {
                    let all: Vec<u64> = mesh.elements.iter().map(|e| e.id).collect();
                    mesh.refine_and_coarsen(&all, &[])?
                }
                StudyMode::Amr => {
                    let pairs: Vec<(u64, f64)> = est.elements.iter().map(|e| (e.id, e.eta)).collect();
                    let (r, c) = mark(&pairs, cfg.refine_fraction, cfg.coarsen_fraction)?;
                    mesh.refine_and_coarsen(&r, &c)?
                }
            };
        }
        Ok(())
    })()
    .err();
    StudyResult { records, failure }
}

fn fmt_num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:e}")
    } else {
        "nan".to_string()
    }
}

/// Write records in the study CSV layout. With `wall_clock` unset the
/// timing column is 0 so that repeated runs give identical files.
pub fn write_csv<W: Write>(mut w: W, records: &[StudyRecord], wall_clock: bool) -> std::io::Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in records {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            r.cycle,
            r.n_elements,
            r.n_dofs,
            fmt_num(r.eta),
            fmt_num(r.true_error),
            fmt_num(r.eff_index.unwrap_or(f64::NAN)),
            if wall_clock { format!("{:.3}", r.wall_ms) } else { "0".to_string() }
        )?;
    }
    Ok(())
}

/// Least-squares slope of log(y) against log(x).
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{linear_problem, rotating_pulse};

    #[test]
    fn mark_examples() {
        let est = vec![(10, 4.0), (11, 3.0), (12, 2.0), (13, 1.0)];
        let (r, c) = mark(&est, 0.25, 0.10).unwrap();
        assert_eq!(r, vec![10]);
        assert!(c.is_empty());
        let est: Vec<(u64, f64)> = (0..10).rev().map(|i| (i, 1.0)).collect();
        let (r, c) = mark(&est, 0.25, 0.10).unwrap();
        assert_eq!(r, vec![0, 1, 2]);
        assert_eq!(c, vec![9]);
        let (r, c) = mark(&est, 0.0, 0.0).unwrap();
        assert!(r.is_empty() && c.is_empty());
        assert!(mark(&[], 0.25, 0.1).is_err());
        assert!(mark(&est, 0.8, 0.3).is_err());
    }

    #[test]
    fn marks_are_disjoint() {
        let est: Vec<(u64, f64)> = (0..7).map(|i| (i, (i * 37 % 11) as f64)).collect();
        let (r, c) = mark(&est, 0.6, 0.4).unwrap();
        assert_eq!(r.len() + c.len(), 7);
        assert!(r.iter().all(|x| !c.contains(x)));
    }

    #[test]
    fn uniform_study_multiplies_elements() {
        let spec = linear_problem(1, 1.0, [1.0, 0.0]).unwrap();
        let mut cfg = StudyConfig::new(StudyMode::Uniform, 3, 1, RefinementPolicy::Proportional);
        cfg.n_slabs = 1;
        cfg.n_cells = 2;
        let res = run_study(&spec, &cfg);
        assert!(res.failure.is_none());
        let n: Vec<usize> = res.records.iter().map(|r| r.n_elements).collect();
        assert_eq!(n, vec![2, 8, 32]);
        for r in &res.records {
            assert!(r.true_error < 1e-9 && r.eta < 1e-9);
        }
    }

    #[test]
    fn amr_study_records_and_is_deterministic() {
        let spec = rotating_pulse(1e-2).unwrap();
        let mut cfg = StudyConfig::new(StudyMode::Amr, 3, 1, RefinementPolicy::Proportional);
        cfg.n_cells = 4;
        let a = run_study(&spec, &cfg);
        let b = run_study(&spec, &cfg);
        assert!(a.failure.is_none());
        assert_eq!(a.records.len(), 3);
        let (mut ca, mut cb) = (Vec::new(), Vec::new());
        write_csv(&mut ca, &a.records, false).unwrap();
        write_csv(&mut cb, &b.records, false).unwrap();
        assert_eq!(ca, cb);
        let text = String::from_utf8(ca).unwrap();
        assert!(text.starts_with("cycle,n_elements,n_dofs,eta,true_error,eff_index,wall_ms\n"));
        for w in a.records.windows(2) {
            assert!(w[1].n_dofs > w[0].n_dofs);
        }
        assert!(a.records.iter().all(|r| r.eta > 0.0 && r.true_error > 0.0 && r.eff_index.unwrap() > 0.0));
    }

    #[test]
    fn zero_cycles_is_an_error() {
        let spec = rotating_pulse(1e-2).unwrap();
        let cfg = StudyConfig::new(StudyMode::Amr, 0, 1, RefinementPolicy::Proportional);
        let res = run_study(&spec, &cfg);
        assert!(res.records.is_empty());
        assert!(matches!(res.failure, Some(Error::InvalidArgument(_))));
    }

    #[test]
    fn slope_of_power_law() {
        let x = [10.0, 100.0, 1000.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(-0.5)).collect();
        assert!((loglog_slope(&x, &y) + 0.5).abs() < 1e-12);
    }
}
