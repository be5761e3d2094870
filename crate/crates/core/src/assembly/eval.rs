//! Pointwise evaluation of discrete fields and construction of discrete
//! states from functions.

use super::{DiscreteSolution, Discretization, DofMap};
use crate::fe::{self, BoxGeom, TensorBasis, MAX_AXES};
use crate::mesh::SpaceTimeMesh;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldQuantity {
    Value,
    SpatialGradient,
    TimeDerivative,
    SpatialLaplacian,
}

/// Evaluate the element field of element `k` at physical point `p`.
/// Returns one number, or `d` numbers for the spatial gradient.
pub fn field_evaluate(
    mesh: &SpaceTimeMesh,
    disc: &Discretization,
    sol: &DiscreteSolution,
    k: usize,
    p: &[f64; MAX_AXES],
    what: FieldQuantity,
) -> Vec<f64> {
    let e = &mesh.elements[k];
    debug_assert!(e.geom.contains(p, 1e-12), "point outside element");
    let dim = mesh.dim();
    let r: Vec<f64> = (0..dim).map(|a| e.geom.to_ref(a, p[a])).collect();
    let ev = disc.element.evaluate(&r);
    let c = sol.element(k);
    let dot = |v: &[f64]| c.iter().zip(v).map(|(x, y)| x * y).sum::<f64>();
    let scale = |a: usize| 2.0 / e.geom.extent(a);
    match what {
        FieldQuantity::Value => vec![dot(&ev.values)],
        FieldQuantity::TimeDerivative => vec![dot(&ev.d1[0]) * scale(0)],
        FieldQuantity::SpatialGradient => (1..dim).map(|a| dot(&ev.d1[a]) * scale(a)).collect(),
        FieldQuantity::SpatialLaplacian => vec![(1..dim).map(|a| dot(&ev.d2[a]) * scale(a) * scale(a)).sum()],
    }
}

/// Value of the facet unknown λ_h of facet `f` at physical point `p`.
pub fn facet_evaluate(mesh: &SpaceTimeMesh, disc: &Discretization, sol: &DiscreteSolution, f: usize, p: &[f64; MAX_AXES]) -> f64 {
    let fc = &mesh.facets[f];
    debug_assert!(fc.geom.contains(p, 1e-12), "point outside facet");
    let r: Vec<f64> = (0..mesh.dim()).map(|a| fc.geom.to_ref(a, p[a])).collect();
    let ev = disc.facet[fc.axis].evaluate(&r);
    sol.facet(f).iter().zip(&ev.values).map(|(x, y)| x * y).sum()
}

fn nodal(basis: &TensorBasis, g: &BoxGeom, f: &dyn Fn(&[f64; MAX_AXES]) -> f64) -> Vec<f64> {
    (0..basis.len())
        .map(|i| {
            let r = basis.node(i);
            let mut p = [0.0; MAX_AXES];
            for a in 0..g.dim {
                p[a] = g.from_ref(a, r[a]);
            }
            f(&p)
        })
        .collect()
}

/// Nodal interpolation of `f` into element and facet spaces.
pub fn interpolate<F>(mesh: &SpaceTimeMesh, disc: &Discretization, f: F) -> DiscreteSolution
where
    F: Fn(&[f64; MAX_AXES]) -> f64,
{
    let mut sol = DiscreteSolution::zeros(DofMap::new(mesh, disc));
    for (k, e) in mesh.elements.iter().enumerate() {
        let v = nodal(&disc.element, &e.geom, &f);
        let r = sol.dofmap.element_range(k);
        sol.values[r].copy_from_slice(&v);
    }
    for (i, fc) in mesh.facets.iter().enumerate() {
        let v = nodal(&disc.facet[fc.axis], &fc.geom, &f);
        let r = sol.dofmap.facet_range(i);
        sol.values[r].copy_from_slice(&v);
    }
    sol
}

/// Element-wise and facet-wise L² projections of `f`.
pub fn project<F>(mesh: &SpaceTimeMesh, disc: &Discretization, f: F) -> DiscreteSolution
where
    F: Fn(&[f64; MAX_AXES]) -> f64,
{
    let mut sol = DiscreteSolution::zeros(DofMap::new(mesh, disc));
    for (k, e) in mesh.elements.iter().enumerate() {
        let v = fe::l2_project(&disc.element, &e.geom, disc.n_estimator, &f);
        let r = sol.dofmap.element_range(k);
        sol.values[r].copy_from_slice(&v);
    }
    for (i, fc) in mesh.facets.iter().enumerate() {
        let v = fe::l2_project(&disc.facet[fc.axis], &fc.geom, disc.n_estimator, &f);
        let r = sol.dofmap.facet_range(i);
        sol.values[r].copy_from_slice(&v);
    }
    sol
}
