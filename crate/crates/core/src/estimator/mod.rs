//! Residual a posteriori estimator, error norms and efficiency diagnostics.

mod norms;

pub use norms::{error_norms, local_efficiency, norms_against, NormBreakdown, NormReport};

use rayon::prelude::*;
use serde::Serialize;

use crate::assembly::{facet_upwind_all, neumann_data, DiscreteSolution, Discretization, FacetUpwind};
use crate::fe::{self, PointSet, Tabulation, MAX_AXES};
use crate::mesh::{BoundaryTag, Element, FacetKind, SpaceTimeMesh};
use crate::problem::ProblemSpec;
use crate::{Error, Result};

/// Size class of a space-time element relative to ε.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    /// δt ≤ h ≤ ε
    Diffusive,
    /// δt ≤ ε < h
    Mixed,
    /// ε < δt ≤ h
    Convective,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegimeWeights {
    pub regime: Regime,
    pub eps_tilde: f64,
    /// τ_ε = Δt_K ε̃
    pub tau_eps: f64,
    /// λ_K = min{1, h_K ε^{-1/2}}
    pub lambda: f64,
}

impl RegimeWeights {
    /// Classification from the own step `dt`, spatial size `h`, slab width
    /// `slab_dt` and ε. Elements with δt > h (outside the three classes)
    /// are diffusive when δt ≤ ε and convective otherwise.
    pub fn new(h: f64, dt: f64, slab_dt: f64, eps: f64) -> Self {
        let regime = if dt.max(h) <= eps {
            Regime::Diffusive
        } else if dt <= eps {
            Regime::Mixed
        } else {
            Regime::Convective
        };
        let eps_tilde = match regime {
            Regime::Diffusive => 1.0,
            Regime::Mixed => eps.sqrt(),
            Regime::Convective => eps,
        };
        RegimeWeights { regime, eps_tilde, tau_eps: slab_dt * eps_tilde, lambda: (h / eps.sqrt()).min(1.0) }
    }
}

pub fn regime_and_weights(e: &Element, eps: f64) -> RegimeWeights {
    RegimeWeights::new(e.h, e.dt, e.slab_dt, eps)
}

/// All estimator terms of one element.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ElementEstimate {
    pub id: u64,
    pub eta_r: f64,
    pub eta_j1: f64,
    pub eta_j21: f64,
    pub eta_j22: f64,
    pub eta_j3q: f64,
    pub eta_j3r: f64,
    pub eta_bc1: f64,
    pub eta_bc2: f64,
    pub eta: f64,
    pub osc_k: f64,
    pub osc_n: f64,
}

impl ElementEstimate {
    fn terms(&self) -> [f64; 8] {
        [self.eta_r, self.eta_j1, self.eta_j21, self.eta_j22, self.eta_j3q, self.eta_j3r, self.eta_bc1, self.eta_bc2]
    }

    /// (η^K)² from its terms.
    pub fn sum_of_squares(&self) -> f64 {
        self.terms().iter().map(|t| t * t).sum()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Estimate {
    /// in mesh element order
    pub elements: Vec<ElementEstimate>,
    pub eta: f64,
}

impl Estimate {
    /// η_K by element index.
    pub fn eta_k(&self) -> Vec<f64> {
        self.elements.iter().map(|e| e.eta).collect()
    }
}

/// R_h^K = f + εΔ̄u_h − ∂_t u_h − β̄·∇̄u_h at tabulation point `q`.
fn interior_residual_tab(spec: &ProblemSpec, tab: &Tabulation, c: &[f64], q: usize) -> f64 {
    let x = &tab.x[q];
    let b = spec.beta_st(x);
    let adv: f64 = (0..tab.dim).map(|a| b[a] * tab.deriv(c, a, q)).sum();
    (spec.source)(x) + spec.eps * tab.laplacian(c, q) - adv
}

/// R_h^K of element `k` at the point `p`.
pub fn interior_residual(
    mesh: &SpaceTimeMesh,
    disc: &Discretization,
    spec: &ProblemSpec,
    sol: &DiscreteSolution,
    k: usize,
    p: &[f64; MAX_AXES],
) -> f64 {
    let e = &mesh.elements[k];
    let pts = PointSet::grid((0..mesh.dim()).map(|a| vec![p[a]]).collect());
    let tab = disc.element.tabulate(&e.geom, &pts);
    interior_residual_tab(spec, &tab, sol.element(k), 0)
}

/// R_h^N = g − ε∇̄u_h·n̄ + ζ⁻u_h(β·n) at a point of a Neumann-type facet.
pub fn neumann_residual(
    mesh: &SpaceTimeMesh,
    disc: &Discretization,
    spec: &ProblemSpec,
    sol: &DiscreteSolution,
    f: usize,
    p: &[f64; MAX_AXES],
) -> Result<f64> {
    let fc = &mesh.facets[f];
    if !fc.tag.is_neumann() {
        return Err(Error::WrongBoundary(fc.id));
    }
    let k = fc.owners[0].element;
    let e = &mesh.elements[k];
    let pts = PointSet::grid((0..mesh.dim()).map(|a| vec![p[a]]).collect());
    let tab = disc.element.tabulate(&e.geom, &pts);
    Ok(neumann_residual_tab(spec, fc, &tab, sol.element(k), 0))
}

fn neumann_residual_tab(spec: &ProblemSpec, fc: &crate::mesh::Facet, tab: &Tabulation, c: &[f64], q: usize) -> f64 {
    let x = &tab.x[q];
    let sigma = fc.owners[0].normal_sign();
    let a = fc.axis;
    let bn = sigma * spec.beta_st(x)[a];
    let dn = if a >= 1 { sigma * tab.deriv(c, a, q) } else { 0.0 };
    let zm = if bn < 0.0 { 1.0 } else { 0.0 };
    neumann_data(spec, fc, x) - spec.eps * dn + zm * tab.value(c, q) * bn
}

/// ‖v − Πv‖² for samples `v` at the tabulation points.
fn projection_defect(tab: &Tabulation, v: &[f64]) -> f64 {
    let pc = fe::l2_project_tab(tab, |q| v[q]);
    (0..tab.nq).map(|q| tab.w[q] * (v[q] - tab.value(&pc, q)).powi(2)).sum()
}

fn weighted_sq(w: &[f64], v: &[f64]) -> f64 {
    w.iter().zip(v).map(|(a, b)| a * b * b).sum()
}

fn element_estimate(
    mesh: &SpaceTimeMesh,
    disc: &Discretization,
    spec: &ProblemSpec,
    sol: &DiscreteSolution,
    upwind: &[FacetUpwind],
    k: usize,
) -> ElementEstimate {
    let e = &mesh.elements[k];
    let eps = spec.eps;
    let h = e.h;
    let wts = regime_and_weights(e, eps);
    let c = sol.element(k);
    let n = disc.n_estimator;

    let pts = PointSet::gauss(&e.geom, n);
    let tab = disc.element.tabulate(&e.geom, &pts);
    let r: Vec<f64> = (0..tab.nq).map(|q| interior_residual_tab(spec, &tab, c, q)).collect();
    let rr = weighted_sq(&tab.w, &r);
    // the defect of smooth data is small, so it gets a richer rule
    let n_osc = n + 2;
    let pts = PointSet::gauss(&e.geom, n_osc);
    let tab = disc.element.tabulate(&e.geom, &pts);
    let r: Vec<f64> = (0..tab.nq).map(|q| interior_residual_tab(spec, &tab, c, q)).collect();
    let osc_k = projection_defect(&tab, &r);

    let (mut j1, mut jq, mut j3q, mut j3r, mut bc1, mut bc2, mut osc_n) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
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
                let jump: Vec<f64> = (0..te.nq).map(|q| te.value(c, q) - tf.value(lam, q)).collect();
                let upw: Vec<f64> =
                    (0..te.nq).map(|q| te.w[q] * (bs - 0.5 * sigma * spec.beta_st(&te.x[q])[a]).abs()).collect();
                match fc.kind {
                    FacetKind::R => j3r += weighted_sq(&upw, &jump),
                    FacetKind::Q => {
                        j3q += weighted_sq(&upw, &jump);
                        jq += weighted_sq(&te.w, &jump);
                    }
                }
                if fc.kind == FacetKind::Q && fc.tag == BoundaryTag::Interior {
                    let other = fc.owners[1 - o].element;
                    let tn = disc.element.tabulate(&mesh.elements[other].geom, &fpts);
                    let cn = sol.element(other);
                    let gj: Vec<f64> = (0..te.nq).map(|q| te.deriv(c, a, q) - tn.deriv(cn, a, q)).collect();
                    j1 += fc.h * weighted_sq(&te.w, &gj);
                }
                if fc.tag.is_neumann() {
                    let rn: Vec<f64> = (0..te.nq).map(|q| neumann_residual_tab(spec, fc, &te, c, q)).collect();
                    let s = weighted_sq(&te.w, &rn);
                    match fc.tag {
                        BoundaryTag::Omega0 => bc2 += s,
                        BoundaryTag::NeumannLateral => bc1 += s,
                        _ => {}
                    }
                    let fpts = PointSet::gauss(&fc.geom, n_osc);
                    let te = disc.element.tabulate(&e.geom, &fpts);
                    let tf = disc.facet[a].tabulate(&fc.geom, &fpts);
                    let rn: Vec<f64> = (0..te.nq).map(|q| neumann_residual_tab(spec, fc, &te, c, q)).collect();
                    osc_n += projection_defect(&tf, &rn);
                }
            }
        }
    }
    let mut est = ElementEstimate {
        id: e.id,
        eta_r: wts.lambda * rr.sqrt(),
        eta_j1: (eps * j1).sqrt(),
        eta_j21: (eps / h * jq).sqrt(),
        eta_j22: (h.sqrt() / eps * jq).sqrt(),
        eta_j3q: j3q.sqrt(),
        eta_j3r: j3r.sqrt(),
        eta_bc1: (h / eps * bc1).sqrt(),
        eta_bc2: bc2.sqrt(),
        eta: 0.0,
        osc_k: wts.lambda * osc_k.sqrt(),
        osc_n: (h / eps * osc_n).sqrt(),
    };
    est.eta = est.sum_of_squares().sqrt();
    est
}

/// Per-element estimator terms and the global η.
pub fn estimate(mesh: &SpaceTimeMesh, disc: &Discretization, spec: &ProblemSpec, sol: &DiscreteSolution) -> Estimate {
    let upwind = facet_upwind_all(mesh, spec, disc);
    let elements: Vec<ElementEstimate> = (0..mesh.n_elements())
        .into_par_iter()
        .map(|k| element_estimate(mesh, disc, spec, sol, &upwind, k))
        .collect();
    let eta = elements.iter().map(|e| e.eta * e.eta).sum::<f64>().sqrt();
    Estimate { elements, eta }
}

/// η / |||u − u_h|||; `None` when the error vanishes (0/0 or x/0).
pub fn efficiency_index(eta: f64, error: f64) -> Option<f64> {
    if error > 0.0 && error.is_finite() && eta.is_finite() {
        Some(eta / error)
    } else {
        None
    }
}
