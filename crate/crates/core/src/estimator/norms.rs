//! The energy-type norms |||·|||_{s,h}, |||·|||_{sT,h} of the error u − u_h.

use rayon::prelude::*;
use serde::Serialize;

use super::{regime_and_weights, Estimate};
use crate::assembly::{facet_upwind_all, DiscreteSolution, Discretization, FacetUpwind};
use crate::fe::PointSet;
use crate::mesh::{FacetKind, SpaceTimeMesh};
use crate::problem::{ExactSolution, ProblemSpec};
use crate::{Error, Result};

/// Squared contributions of one element. T factors are not applied.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct NormBreakdown {
    /// ‖v‖²_K
    pub l2: f64,
    /// ‖|β_s − ½β·n|^½ [[v]]‖²_{∂K}
    pub upwind_jump: f64,
    /// ‖|½β·n|^½ μ‖² over the Neumann-type facets of ∂K
    pub neumann: f64,
    /// ε‖∇̄v‖²_K
    pub gradient: f64,
    /// ε h_K⁻¹ ‖[[v]]‖²_{Q_K}
    pub penalty: f64,
    /// τ_ε ‖∂_t v‖²_K
    pub time: f64,
}

impl NormBreakdown {
    /// Local |||v|||²_{sT,h,K}.
    pub fn st_sq(&self, t_end: f64) -> f64 {
        self.l2 + self.upwind_jump + t_end * (self.neumann + self.gradient) + self.penalty + self.time
    }

    /// Element part of |||v|||²_{s,h}.
    pub fn s_sq(&self) -> f64 {
        self.l2 + self.upwind_jump + self.neumann + self.gradient + self.penalty + self.time
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct NormReport {
    pub elements: Vec<NormBreakdown>,
    pub t_end: f64,
    /// |||u − u_h|||_{sT,h}
    pub st: f64,
    /// |||u − u_h|||_{s,h}
    pub s: f64,
}

fn element_norms(
    mesh: &SpaceTimeMesh,
    disc: &Discretization,
    spec: &ProblemSpec,
    exact: &dyn ExactSolution,
    sol: &DiscreteSolution,
    upwind: &[FacetUpwind],
    k: usize,
) -> NormBreakdown {
    let e = &mesh.elements[k];
    let eps = spec.eps;
    let wts = regime_and_weights(e, eps);
    let c = sol.element(k);
    let n = disc.n_estimator;
    let mut nb = NormBreakdown::default();

    let pts = PointSet::gauss(&e.geom, n);
    let tab = disc.element.tabulate(&e.geom, &pts);
    for q in 0..tab.nq {
        let x = &tab.x[q];
        let w = tab.w[q];
        let g = exact.gradient(x);
        nb.l2 += w * (exact.value(x) - tab.value(c, q)).powi(2);
        nb.time += w * (g[0] - tab.deriv(c, 0, q)).powi(2);
        for a in 1..mesh.dim() {
            nb.gradient += w * (g[a] - tab.deriv(c, a, q)).powi(2);
        }
    }
    nb.time *= wts.tau_eps;
    nb.gradient *= eps;

    let mut jq = 0.0;
    for a in 0..mesh.dim() {
        for side in 0..2 {
            for &f in e.face(a, side) {
                let fc = &mesh.facets[f];
                let o = fc.owners.iter().position(|o| o.element == k && o.side == side).unwrap();
                let sigma = fc.owners[o].normal_sign();
                let fpts = PointSet::gauss(&fc.geom, n);
                let te = disc.element.tabulate(&e.geom, &fpts);
                let tf = disc.facet[a].tabulate(&fc.geom, &fpts);
                let lam = sol.facet(f);
                let bs = upwind[f].beta_s;
                for q in 0..te.nq {
                    let x = &te.x[q];
                    let w = te.w[q];
                    let u = exact.value(x);
                    // [[u − u_h]] = (u − u_h) − (u − λ_h)
                    let mu = u - tf.value(lam, q);
                    let jump = (u - te.value(c, q)) - mu;
                    let bn = sigma * spec.beta_st(x)[a];
                    nb.upwind_jump += w * (bs - 0.5 * bn).abs() * jump * jump;
                    if fc.kind == FacetKind::Q {
                        jq += w * jump * jump;
                    }
                    if fc.tag.is_neumann() {
                        nb.neumann += w * (0.5 * bn).abs() * mu * mu;
                    }
                }
            }
        }
    }
    nb.penalty = eps / e.h * jq;
    nb
}

/// Norms of u − u_h, with the exact solution of `spec`.
pub fn error_norms(
    mesh: &SpaceTimeMesh,
    disc: &Discretization,
    spec: &ProblemSpec,
    sol: &DiscreteSolution,
) -> Result<NormReport> {
    let exact = spec.exact.as_ref().ok_or(Error::MissingExactSolution)?;
    Ok(norms_against(mesh, disc, spec, &**exact, sol))
}

/// Norms of `exact − u_h` for an arbitrary reference field.
pub fn norms_against(
    mesh: &SpaceTimeMesh,
    disc: &Discretization,
    spec: &ProblemSpec,
    exact: &dyn ExactSolution,
    sol: &DiscreteSolution,
) -> NormReport {
    let upwind = facet_upwind_all(mesh, spec, disc);
    let elements: Vec<NormBreakdown> = (0..mesh.n_elements())
        .into_par_iter()
        .map(|k| element_norms(mesh, disc, spec, exact, sol, &upwind, k))
        .collect();
    let t_end = mesh.domain.t_end;
    let st = elements.iter().map(|b| b.st_sq(t_end)).sum::<f64>().sqrt();
    let s = elements.iter().map(|b| b.s_sq()).sum::<f64>().sqrt();
    NormReport { elements, t_end, st, s }
}

/// η^K / (Σ_{K' ∈ {K} ∪ ω_K} ε^{-1/2} ε̃_{K'}^{-1/2} |||u − u_h|||_{sT,h,K'} + osc_K + osc_N)
/// per element; NaN where numerator and denominator both vanish.
pub fn local_efficiency(mesh: &SpaceTimeMesh, spec: &ProblemSpec, est: &Estimate, norms: &NormReport) -> Vec<f64> {
    let eps = spec.eps;
    let local: Vec<f64> = mesh
        .elements
        .iter()
        .zip(&norms.elements)
        .map(|(e, b)| {
            let w = regime_and_weights(e, eps);
            (eps * w.eps_tilde).powf(-0.5) * b.st_sq(norms.t_end).sqrt()
        })
        .collect();
    (0..mesh.n_elements())
        .map(|k| {
            let ee = &est.elements[k];
            let patch: f64 = local[k] + mesh.face_neighbors(k).iter().map(|&j| local[j]).sum::<f64>();
            let den = patch + ee.osc_k + ee.osc_n;
            if den > 0.0 {
                ee.eta / den
            } else if ee.eta == 0.0 {
                f64::NAN
            } else {
                f64::INFINITY
            }
        })
        .collect()
}
