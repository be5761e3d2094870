//! Numerical checks of the analysis: subgrids and Galerkin orthogonality,
//! the saturation ratio, nodal averaging, bubble functions and measured
//! inequality constants.

mod averaging;
mod constants;
mod subgrid;

pub use averaging::{AveragedField, AveragingOperator};
pub use constants::{
    bubble_constants, element_bubble, facet_bubble, inequality_constants, kappa_for, level_drift, oswald_constant,
    random_element_field, BubbleKind, ConstantReport, DEFAULT_SAMPLES,
};
pub use subgrid::{
    check_galerkin_orthogonality, measure_saturation, orthogonality_defect, solve_pair, subgrid_restrict,
    Orthogonality, Restriction, Saturation, SubgridPair, SubgridSolve, SATURATION_FLOOR,
};

use log::info;

use crate::adapt::{run_study_with, StudyConfig};
use crate::assembly::Discretization;
use crate::estimator::regime_and_weights;
use crate::mesh::{RefinementPolicy, SpaceTimeMesh};
use crate::problem::ProblemSpec;
use crate::Result;

/// Settings of the constant-measurement sweep.
#[derive(Debug, Clone)]
pub struct VerifyConfig {
    pub levels: usize,
    pub n_slabs: usize,
    pub n_cells: usize,
    pub ps: usize,
    pub policy: RefinementPolicy,
    pub samples: usize,
    pub seed: u64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            levels: 3,
            n_slabs: 2,
            n_cells: 4,
            ps: 1,
            policy: RefinementPolicy::Quadratic,
            samples: DEFAULT_SAMPLES,
            seed: 0,
        }
    }
}

/// The initial mesh refined uniformly `level` times.
pub fn uniform_level(spec: &ProblemSpec, cfg: &VerifyConfig, level: usize) -> Result<SpaceTimeMesh> {
    let mut mesh = SpaceTimeMesh::build_initial(spec.domain.clone(), cfg.n_slabs, cfg.n_cells, cfg.policy)?;
    for _ in 0..level {
        let all: Vec<u64> = mesh.elements.iter().map(|e| e.id).collect();
        mesh = mesh.refine_and_coarsen(&all, &[])?;
    }
    Ok(mesh)
}

/// All inequality, averaging and bubble constants on `cfg.levels` uniform levels.
pub fn run_verification(spec: &ProblemSpec, cfg: &VerifyConfig) -> Result<Vec<ConstantReport>> {
    let disc = Discretization::new(spec.domain.d, cfg.ps);
    let mut out = Vec::new();
    for level in 0..cfg.levels {
        let mesh = uniform_level(spec, cfg, level)?;
        info!("verification level {level}: {} elements", mesh.n_elements());
        // the same draws on every level, so shape-invariant ratios agree exactly
        out.extend(inequality_constants(&mesh, &disc, spec.eps, cfg.samples, cfg.seed, level));
        out.push(oswald_constant(&mesh, &disc, cfg.samples, cfg.seed, level));
        let e = &mesh.elements[0];
        out.extend(bubble_constants(&disc, &e.geom, BubbleKind::Element, 1.0, level)?);
        let kappa = kappa_for(spec.eps, regime_and_weights(e, spec.eps).eps_tilde);
        out.extend(bubble_constants(&disc, &e.geom, BubbleKind::Facet { axis: 1 }, kappa, level)?);
    }
    Ok(out)
}

/// ρ̂ on the meshes of the given cycles of an adaptive study, as constant
/// rows named `saturation` (NaN when flagged).
pub fn saturation_on_study(spec: &ProblemSpec, study: &StudyConfig, levels: &[usize]) -> Result<Vec<ConstantReport>> {
    let mut cfg = study.clone();
    cfg.cycles = levels.iter().max().map_or(0, |m| m + 1);
    let mut out = Vec::new();
    let res = run_study_with(spec, &cfg, |c| {
        if levels.contains(&c.record.cycle) {
            let s = measure_saturation(spec, c.mesh, c.disc)?;
            info!("saturation at cycle {}: {:?}", c.record.cycle, s);
            out.push(ConstantReport {
                inequality: "saturation".into(),
                level: c.record.cycle,
                samples: 1,
                constant: s.rho.unwrap_or(f64::NAN),
            });
        }
        Ok(())
    });
    match res.failure {
        Some(e) => Err(e),
        None => Ok(out),
    }
}

#[cfg(test)]
mod tests;
