//! Element-local HDG tensors including all facet pieces of ∂K.

use super::{DofMap, Discretization};
use crate::fe::{PointSet, MAX_AXES};
use crate::mesh::{BoundaryTag, Facet, SpaceTimeMesh};
use crate::problem::ProblemSpec;

/// Which parts of a_h to assemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FormParts {
    pub diffusion: bool,
    pub advection: bool,
}

impl FormParts {
    pub const FULL: FormParts = FormParts { diffusion: true, advection: true };
    pub const DIFFUSION: FormParts = FormParts { diffusion: true, advection: false };
}

/// Upwind data of one facet.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FacetUpwind {
    /// β_s = max |β·n| over the facet samples
    pub beta_s: f64,
}

/// β_s from the facet's quadrature points and vertices.
pub fn facet_upwind(f: &Facet, spec: &ProblemSpec, n: usize) -> FacetUpwind {
    let g = &f.geom;
    let pts = PointSet::gauss(g, n);
    let mut m: f64 = 0.0;
    for q in 0..pts.len() {
        m = m.max(spec.beta_st(&pts.point(q))[f.axis].abs());
    }
    let dim = g.dim;
    for c in 0..(1usize << dim) {
        let mut p = [0.0; MAX_AXES];
        for a in 0..dim {
            p[a] = if (c >> a) & 1 == 0 { g.lo[a] } else { g.hi[a] };
        }
        m = m.max(spec.beta_st(&p)[f.axis].abs());
    }
    FacetUpwind { beta_s: m }
}

/// g on a Neumann-type facet: initial data on Ω₀, zero on Ω_T and the
/// lateral Neumann data elsewhere.
pub fn neumann_data(spec: &ProblemSpec, fc: &Facet, x: &[f64; MAX_AXES]) -> f64 {
    match fc.tag {
        BoundaryTag::Omega0 => (spec.initial)(x),
        BoundaryTag::OmegaT => 0.0,
        _ => (spec.neumann)(x, &fc.normal(0)),
    }
}

/// Dense local system on the element dofs followed by the dofs of every
/// facet piece of ∂K (faces in order (axis, side), pieces in facet order).
#[derive(Debug, Clone)]
pub struct LocalSystem {
    pub dofs: Vec<usize>,
    pub n: usize,
    /// row-major, row = test function
    pub mat: Vec<f64>,
    pub rhs: Vec<f64>,
}

/// Volume block (ε∇̄u, ∇̄v)_K − (βu, ∇v)_K, row-major with row = test.
pub fn volume_matrix(mesh: &SpaceTimeMesh, spec: &ProblemSpec, disc: &Discretization, k: usize, parts: FormParts) -> Vec<f64> {
    let e = &mesh.elements[k];
    let dim = mesh.dim();
    let nbe = disc.element_dofs();
    let mut mat = vec![0.0; nbe * nbe];
    let pts = PointSet::gauss(&e.geom, disc.n_assembly);
    let tab = disc.element.tabulate(&e.geom, &pts);
    let mut adv = vec![0.0; nbe];
    for q in 0..tab.nq {
        let w = tab.w[q];
        let beta = spec.beta_st(&tab.x[q]);
        let phi = tab.phi_at(q);
        for i in 0..nbe {
            adv[i] = (0..dim).map(|a| beta[a] * tab.d1[a][q * nbe + i]).sum();
        }
        for i in 0..nbe {
            let row = &mut mat[i * nbe..(i + 1) * nbe];
            for j in 0..nbe {
                let mut v = 0.0;
                if parts.diffusion {
                    for a in 1..dim {
                        v += spec.eps * tab.d1[a][q * nbe + j] * tab.d1[a][q * nbe + i];
                    }
                }
                if parts.advection {
                    v -= phi[j] * adv[i];
                }
                row[j] += w * v;
            }
        }
    }
    mat
}

pub fn element_system(
    mesh: &SpaceTimeMesh,
    spec: &ProblemSpec,
    disc: &Discretization,
    dofmap: &DofMap,
    upwind: &[FacetUpwind],
    k: usize,
    parts: FormParts,
) -> LocalSystem {
    let e = &mesh.elements[k];
    let dim = mesh.dim();
    let eps = spec.eps;
    let nbe = disc.element_dofs();
    let mut dofs: Vec<usize> = dofmap.element_range(k).collect();
    let mut pieces = Vec::new();
    for a in 0..dim {
        for side in 0..2 {
            for &f in e.face(a, side) {
                let o = mesh.facets[f].owners.iter().position(|o| o.element == k && o.side == side).unwrap();
                pieces.push((f, o, dofs.len()));
                dofs.extend(dofmap.facet_range(f));
            }
        }
    }
    let n = dofs.len();
    let mut mat = vec![0.0; n * n];
    let mut rhs = vec![0.0; n];

    let vol = volume_matrix(mesh, spec, disc, k, parts);
    for i in 0..nbe {
        mat[i * n..i * n + nbe].copy_from_slice(&vol[i * nbe..(i + 1) * nbe]);
    }
    // (f, v) with the data rule
    let pts = PointSet::gauss(&e.geom, disc.n_estimator);
    let tab = disc.element.tabulate(&e.geom, &pts);
    for q in 0..tab.nq {
        let fw = tab.w[q] * (spec.source)(&tab.x[q]);
        for (i, p) in tab.phi_at(q).iter().enumerate() {
            rhs[i] += fw * p;
        }
    }

    for &(f, o, off) in &pieces {
        let fc = &mesh.facets[f];
        let a = fc.axis;
        let sigma = fc.owners[o].normal_sign();
        let fb = &disc.facet[a];
        let nbf = fb.len();
        let pts = PointSet::gauss(&fc.geom, disc.n_assembly);
        let te = disc.element.tabulate(&e.geom, &pts);
        let tf = fb.tabulate(&fc.geom, &pts);
        let bs = upwind[f].beta_s;
        let tau = eps * disc.alpha / fc.h;
        let is_q = a >= 1;
        let neumann = fc.tag.is_neumann();
        for q in 0..te.nq {
            let w = te.w[q];
            let x = te.x[q];
            let bn = sigma * spec.beta_st(&x)[a];
            let phi = te.phi_at(q);
            let dn = te.d1_at(a, q);
            let psi = tf.phi_at(q);
            if parts.advection {
                // ⟨(β·n)λ + β_s[[u]], [[v]]⟩
                let c = bn - bs;
                for i in 0..nbe {
                    for j in 0..nbe {
                        mat[i * n + j] += w * bs * phi[j] * phi[i];
                    }
                    for j in 0..nbf {
                        mat[i * n + off + j] += w * c * psi[j] * phi[i];
                    }
                }
                for i in 0..nbf {
                    for j in 0..nbe {
                        mat[(off + i) * n + j] -= w * bs * phi[j] * psi[i];
                    }
                    for j in 0..nbf {
                        mat[(off + i) * n + off + j] -= w * c * psi[j] * psi[i];
                    }
                }
                if neumann {
                    let zp = if bn > 0.0 { 1.0 } else { 0.0 };
                    for i in 0..nbf {
                        for j in 0..nbf {
                            mat[(off + i) * n + off + j] += w * zp * bn * psi[j] * psi[i];
                        }
                    }
                }
            }
            if parts.diffusion && is_q {
                // ⟨τ[[u]],[[v]]⟩ − ⟨ε[[u]],∂_n v⟩ − ⟨ε∂_n u,[[v]]⟩
                for i in 0..nbe {
                    let dni = sigma * dn[i];
                    for j in 0..nbe {
                        let dnj = sigma * dn[j];
                        mat[i * n + j] += w * (tau * phi[j] * phi[i] - eps * phi[j] * dni - eps * dnj * phi[i]);
                    }
                    for j in 0..nbf {
                        mat[i * n + off + j] += w * (-tau * psi[j] * phi[i] + eps * psi[j] * dni);
                    }
                }
                for i in 0..nbf {
                    for j in 0..nbe {
                        let dnj = sigma * dn[j];
                        mat[(off + i) * n + j] += w * (-tau * phi[j] * psi[i] + eps * dnj * psi[i]);
                    }
                    for j in 0..nbf {
                        mat[(off + i) * n + off + j] += w * tau * psi[j] * psi[i];
                    }
                }
            }
        }
        if neumann {
            // ⟨g, μ⟩
            let pts = PointSet::gauss(&fc.geom, disc.n_estimator);
            let tf = fb.tabulate(&fc.geom, &pts);
            for q in 0..tf.nq {
                let x = tf.x[q];
                let gw = tf.w[q] * neumann_data(spec, fc, &x);
                for (i, p) in tf.phi_at(q).iter().enumerate() {
                    rhs[off + i] += gw * p;
                }
            }
        }
    }
    LocalSystem { dofs, n, mat, rhs }
}
