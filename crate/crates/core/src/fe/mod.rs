//! Finite element building blocks: quadrature, Lagrange bases, tensor
//! tabulation on boxes and local L² projections.

pub mod basis;
pub mod geometry;
pub mod lagrange;
pub mod quadrature;

pub use basis::{BasisEval, Tabulation, TensorBasis};
pub use geometry::{BoxGeom, PointSet, MAX_AXES};
pub use quadrature::{gauss_legendre, gauss_rule, QuadratureRule};

use nalgebra::{DMatrix, DVector};

/// Gauss points per axis for assembling the bilinear form.
pub fn assembly_points(ps: usize) -> usize {
    ps.max(1) + 2
}

/// Gauss points per axis for data, residual and error integrals.
pub fn estimator_points(ps: usize) -> usize {
    assembly_points(ps) + 2
}

/// Mass matrix Σ_q w φ_i φ_j of a tabulation.
pub fn mass_matrix(tab: &Tabulation) -> DMatrix<f64> {
    let nb = tab.nb;
    let mut m = DMatrix::zeros(nb, nb);
    for q in 0..tab.nq {
        let p = tab.phi_at(q);
        let w = tab.w[q];
        for i in 0..nb {
            let wi = w * p[i];
            for j in 0..nb {
                m[(i, j)] += wi * p[j];
            }
        }
    }
    m
}

/// L² projection of `field` onto the span of `basis` on the box `geom`
/// (element or facet), using `n` Gauss points per axis.
pub fn l2_project<F>(basis: &TensorBasis, geom: &BoxGeom, n: usize, field: F) -> Vec<f64>
where
    F: Fn(&[f64; MAX_AXES]) -> f64,
{
    let pts = PointSet::gauss(geom, n);
    let tab = basis.tabulate(geom, &pts);
    l2_project_tab(&tab, |q| field(&tab.x[q]))
}

/// L² projection given field samples at the tabulation points.
pub fn l2_project_tab<F>(tab: &Tabulation, sample: F) -> Vec<f64>
where
    F: Fn(usize) -> f64,
{
    let m = mass_matrix(tab);
    let mut rhs = DVector::zeros(tab.nb);
    for q in 0..tab.nq {
        let s = sample(q) * tab.w[q];
        let p = tab.phi_at(q);
        for i in 0..tab.nb {
            rhs[i] += s * p[i];
        }
    }
    let chol = m.cholesky().expect("Gram matrix of a nondegenerate box is SPD");
    chol.solve(&rhs).iter().copied().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn projection_reproduces_space_members() {
        let b = TensorBasis::element(2, 2);
        let g = BoxGeom::new(&[0.0, -0.5, 0.0], &[0.25, 0.0, 0.5]);
        let f = |x: &[f64; 3]| 1.0 + x[0] * x[1] * x[2] * x[2] - 3.0 * x[1] * x[1];
        let c = l2_project(&b, &g, 5, f);
        let pts = PointSet::gauss(&g, 4);
        let tab = b.tabulate(&g, &pts);
        for q in 0..tab.nq {
            assert!((tab.value(&c, q) - f(&tab.x[q])).abs() < 1e-12);
        }
    }

    #[test]
    fn projection_of_x_squared_is_one_third() {
        let b = TensorBasis::element(1, 1);
        let g = BoxGeom::new(&[-1.0, -1.0], &[1.0, 1.0]);
        let c = l2_project(&b, &g, 4, |x| x[1] * x[1]);
        for v in c {
            assert!((v - 1.0 / 3.0).abs() < 1e-13);
        }
    }

    #[test]
    fn projection_residual_is_orthogonal_and_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let b = TensorBasis::element(2, 1);
        let g = BoxGeom::new(&[0.0, 0.0, 0.0], &[0.1, 0.2, 0.2]);
        for _ in 0..10 {
            let (a1, a2, a3): (f64, f64, f64) = (rng.gen(), rng.gen(), rng.gen());
            let f = move |x: &[f64; 3]| (a1 * 7.0 * x[1]).sin() * (a2 * 5.0 * x[0] + a3 * x[2]).exp();
            let n = estimator_points(1) + 2;
            let c = l2_project(&b, &g, n, f);
            let pts = PointSet::gauss(&g, n);
            let tab = b.tabulate(&g, &pts);
            let mut norm_v = 0.0;
            let mut norm_p = 0.0;
            let mut ortho = vec![0.0; b.len()];
            let mut scale = 0.0;
            for q in 0..tab.nq {
                let v = f(&tab.x[q]);
                let p = tab.value(&c, q);
                norm_v += tab.w[q] * v * v;
                norm_p += tab.w[q] * p * p;
                for i in 0..b.len() {
                    ortho[i] += tab.w[q] * (v - p) * tab.phi_at(q)[i];
                    scale += tab.w[q] * (v.abs()) * tab.phi_at(q)[i].abs();
                }
            }
            assert!(norm_p <= norm_v * (1.0 + 1e-14));
            for o in ortho {
                assert!(o.abs() <= 1e-12 * scale);
            }
        }
    }

    #[test]
    fn facet_trace_of_projection_commutes_on_space_members() {
        // v ∈ Q^(1,1): trace of Π_h v on the face x = hi equals Π^F of the trace
        let b = TensorBasis::element(1, 1);
        let g = BoxGeom::new(&[0.0, 0.0], &[1.0, 2.0]);
        let f = |x: &[f64; 3]| 2.0 + x[0] - x[0] * x[1];
        let c = l2_project(&b, &g, 3, f);
        let face = g.face(1, 1);
        let fb = TensorBasis::facet(1, 1, 1);
        let cf = l2_project(&fb, &face, 3, f);
        let pts = PointSet::gauss(&face, 3);
        let te = b.tabulate(&g, &pts);
        let tf = fb.tabulate(&face, &pts);
        for q in 0..te.nq {
            assert!((te.value(&c, q) - tf.value(&cf, q)).abs() < 1e-13);
        }
    }
}
