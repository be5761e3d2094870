//! Sparse direct solves with a verified residual bound.
//!
//! The default is one sparse LU of the whole space-time system. The
//! time-block mode factors the diagonal blocks of a block lower-triangular
//! system separately and substitutes forward in time; it is used only after
//! checking that every entry above the block diagonal is exactly zero.

use faer::linalg::solvers::Solve;
use faer::prelude::*;
use faer::sparse::{SparseColMat, Triplet};
use log::{debug, warn};
use serde::Serialize;

use crate::assembly::SparseSystem;
use crate::{Error, Result};

/// Relative residual every successful solve must reach.
pub const RESIDUAL_BOUND: f64 = 1e-10;
const MAX_REFINEMENT: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMethod {
    Monolithic,
    TimeBlocks,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub method: SolveMethod,
    pub relative_residual: f64,
    pub n: usize,
    pub nnz: usize,
    pub blocks: usize,
    pub refinement_steps: usize,
}

type Lu = faer::sparse::linalg::solvers::Lu<usize, f64>;

fn factor_block(sys: &SparseSystem, rows: &[usize], block: &[usize], local: &[usize], b: usize) -> Result<Lu> {
    let m = rows.len();
    let mut t = Vec::new();
    for (li, &i) in rows.iter().enumerate() {
        let (c, v) = sys.row(i);
        for (&j, &a) in c.iter().zip(v) {
            if block[j] == b {
                t.push(Triplet::new(li, local[j], a));
            }
        }
    }
    let a = SparseColMat::<usize, f64>::try_new_from_triplets(m, m, &t)
        .map_err(|e| Error::InvalidArgument(format!("bad sparse pattern: {e:?}")))?;
    drop(t);
    a.sp_lu().map_err(|e| {
        let pivot = match e {
            faer::sparse::linalg::LuError::SymbolicSingular { index } => rows.get(index).copied().unwrap_or(0),
            _ => rows.first().copied().unwrap_or(0),
        };
        Error::Singular { pivot }
    })
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn first_non_finite(v: &[f64], rows: &[usize]) -> Option<usize> {
    v.iter().position(|x| !x.is_finite()).map(|i| rows[i])
}

/// Forward substitution over blocks. Each diagonal block is factored,
/// solved with iterative refinement against its own equation and dropped
/// before the next one, so peak memory is that of the largest block.
fn run(sys: &SparseSystem, block: Vec<usize>, method: SolveMethod) -> Result<(Vec<f64>, SolveReport)> {
    if sys.n == 0 {
        return Err(Error::InvalidArgument("empty system".into()));
    }
    faer::set_global_parallelism(faer::Par::Seq);
    let nb = block.iter().copied().max().map_or(0, |m| m + 1);
    let mut members = vec![Vec::new(); nb];
    let mut local = vec![0; sys.n];
    for (i, &b) in block.iter().enumerate() {
        local[i] = members[b].len();
        members[b].push(i);
    }
    let bnorm = norm(&sys.rhs);
    let mut report = SolveReport {
        method,
        relative_residual: 0.0,
        n: sys.n,
        nnz: sys.nnz(),
        blocks: nb,
        refinement_steps: 0,
    };
    let mut x = vec![0.0; sys.n];
    for (b, rows) in members.iter().enumerate() {
        if rows.is_empty() {
            continue;
        }
        let lu = factor_block(sys, rows, &block, &local, b)?;
        // block right-hand side with the earlier blocks moved over
        let rb: Vec<f64> = rows
            .iter()
            .map(|&i| {
                let (c, v) = sys.row(i);
                let mut s = sys.rhs[i];
                for (&j, &a) in c.iter().zip(v) {
                    if block[j] < b {
                        s -= a * x[j];
                    }
                }
                s
            })
            .collect();
        let rbn = norm(&rb);
        let resid = |x: &[f64]| -> Vec<f64> {
            rows.iter()
                .zip(&rb)
                .map(|(&i, r)| {
                    let (c, v) = sys.row(i);
                    let mut s = -r;
                    for (&j, &a) in c.iter().zip(v) {
                        if block[j] == b {
                            s += a * x[j];
                        }
                    }
                    s
                })
                .collect()
        };
        let apply = |r: &[f64]| -> Vec<f64> {
            let rhs = Mat::<f64>::from_fn(r.len(), 1, |i, _| r[i]);
            let y = lu.solve(&rhs);
            (0..r.len()).map(|i| y[(i, 0)]).collect()
        };
        let y = apply(&rb);
        if let Some(p) = first_non_finite(&y, rows) {
            return Err(Error::Singular { pivot: p });
        }
        for (&i, yi) in rows.iter().zip(&y) {
            x[i] = *yi;
        }
        if rbn == 0.0 {
            continue;
        }
        let mut history = Vec::new();
        let mut steps = 0;
        loop {
            let r = resid(&x);
            let rel = norm(&r) / rbn;
            history.push(rel);
            if !rel.is_finite() {
                return Err(Error::Singular { pivot: first_non_finite(&r, rows).unwrap_or(rows[0]) });
            }
            if rel <= RESIDUAL_BOUND * 1e-2 || steps >= MAX_REFINEMENT {
                break;
            }
            let dx = apply(&r);
            if let Some(p) = first_non_finite(&dx, rows) {
                return Err(Error::Singular { pivot: p });
            }
            for (&i, d) in rows.iter().zip(&dx) {
                x[i] -= d;
            }
            steps += 1;
        }
        report.refinement_steps = report.refinement_steps.max(steps);
        if *history.last().unwrap() > 1e-2 && history.len() > 1 && history.last() >= history.first() {
            // refinement cannot reduce the residual: numerically singular block
            let r = resid(&x);
            let (k, _) = r.iter().enumerate().fold((0, 0.0), |m, (k, v)| if v.abs() > m.1 { (k, v.abs()) } else { m });
            warn!("block {b} stagnated at residual {:.3e}", history.last().unwrap());
            return Err(Error::Singular { pivot: rows[k] });
        }
    }
    if bnorm > 0.0 {
        let r = sys.residual(&x);
        report.relative_residual = norm(&r) / bnorm;
        if !report.relative_residual.is_finite() {
            return Err(Error::Singular { pivot: first_non_finite(&r, &(0..sys.n).collect::<Vec<_>>()).unwrap_or(0) });
        }
    }
    debug!("solve n={} nnz={} blocks={} residual={:.3e}", sys.n, sys.nnz(), nb, report.relative_residual);
    if report.relative_residual > RESIDUAL_BOUND {
        return Err(Error::NotConverged { history: vec![report.relative_residual] });
    }
    Ok((x, report))
}

/// Monolithic sparse LU of the whole system.
pub fn solve(sys: &SparseSystem) -> Result<(Vec<f64>, SolveReport)> {
    run(sys, vec![0; sys.n], SolveMethod::Monolithic)
}

/// Time-block forward substitution, falling back to the monolithic solve
/// when the system is not block lower-triangular for `blocks`.
pub fn solve_time_blocks(sys: &SparseSystem, blocks: &[usize]) -> Result<(Vec<f64>, SolveReport)> {
    assert_eq!(blocks.len(), sys.n);
    let upper = (0..sys.n).find(|&i| {
        let (c, v) = sys.row(i);
        c.iter().zip(v).any(|(&j, &a)| blocks[j] > blocks[i] && a != 0.0)
    });
    if let Some(i) = upper {
        warn!("row {i} couples to a later time block; using the monolithic solve");
        return solve(sys);
    }
    run(sys, blocks.to_vec(), SolveMethod::TimeBlocks)
}
