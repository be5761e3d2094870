//! Measured constants of the inverse, trace, projection, averaging and
//! bubble-function inequalities.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::averaging::AveragingOperator;
use crate::assembly::{DiscreteSolution, Discretization, DofMap};
use crate::estimator::regime_and_weights;
use crate::fe::{self, BoxGeom, PointSet, Tabulation, TensorBasis, MAX_AXES};
use crate::mesh::{BoundaryTag, FacetKind, RefinementPolicy, SpaceTimeMesh};
use crate::{Error, Result};

/// Sample count per element shape when none is given.
pub const DEFAULT_SAMPLES: usize = 200;

/// Best constant of one inequality on one mesh level: the largest observed
/// ratio for upper bounds, the smallest for lower bounds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstantReport {
    pub inequality: String,
    pub level: usize,
    pub samples: usize,
    pub constant: f64,
}

impl ConstantReport {
    fn new(name: &str, level: usize, samples: usize, constant: f64) -> Self {
        ConstantReport { inequality: name.to_string(), level, samples, constant }
    }
}

fn random_coeffs(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn sq_norm(tab: &Tabulation, c: &[f64]) -> f64 {
    (0..tab.nq).map(|q| tab.w[q] * tab.value(c, q).powi(2)).sum()
}

fn sq_deriv(tab: &Tabulation, c: &[f64], axes: std::ops::Range<usize>) -> f64 {
    (0..tab.nq)
        .map(|q| tab.w[q] * axes.clone().map(|a| tab.deriv(c, a, q).powi(2)).sum::<f64>())
        .sum()
}

fn ratio(num: f64, den: f64) -> Option<f64> {
    (den > 1e-300 && num.is_finite()).then(|| num / den)
}

#[derive(Default)]
struct Extremes(BTreeMap<&'static str, f64>);

impl Extremes {
    fn max(&mut self, name: &'static str, v: Option<f64>) {
        if let Some(v) = v {
            let e = self.0.entry(name).or_insert(0.0);
            *e = e.max(v);
        }
    }

    fn min(&mut self, name: &'static str, v: Option<f64>) {
        if let Some(v) = v {
            let e = self.0.entry(name).or_insert(f64::INFINITY);
            *e = e.min(v);
        }
    }

    fn reports(self, level: usize, samples: usize) -> Vec<ConstantReport> {
        self.0.into_iter().map(|(n, v)| ConstantReport::new(n, level, samples, v)).collect()
    }
}

/// Representative element of every distinct shape (lattice extents).
fn shapes(mesh: &SpaceTimeMesh) -> Vec<usize> {
    let dim = mesh.dim();
    let mut seen: BTreeMap<Vec<i64>, usize> = BTreeMap::new();
    for (k, e) in mesh.elements.iter().enumerate() {
        let key: Vec<i64> = (0..dim).map(|a| e.hi[a] - e.lo[a]).collect();
        seen.entry(key).or_insert(k);
    }
    seen.into_values().collect()
}

/// Inverse, trace, projection and (for δt = O(h²) meshes) quasi-interpolation
/// constants over random functions on every element shape of `mesh`.
pub fn inequality_constants(
    mesh: &SpaceTimeMesh,
    disc: &Discretization,
    eps: f64,
    samples: usize,
    seed: u64,
    level: usize,
) -> Vec<ConstantReport> {
    let dim = mesh.dim();
    let n = disc.n_estimator;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ex = Extremes::default();
    // an H¹ sample space richer than V_h
    let mut rich_deg = vec![3];
    rich_deg.extend(std::iter::repeat(disc.ps + 2).take(dim - 1));
    let rich = TensorBasis::new(&rich_deg);
    let n_rich = rich_deg.iter().max().unwrap() + 2;
    let quasi = mesh.policy == RefinementPolicy::Quadratic;

    for k in shapes(mesh) {
        let e = &mesh.elements[k];
        let (h, dt) = (e.h, e.dt);
        let lambda = regime_and_weights(e, eps).lambda;
        let g = &e.geom;
        let tab = disc.element.tabulate(g, &PointSet::gauss(g, n));
        let faces: Vec<(usize, BoxGeom)> =
            (0..dim).flat_map(|a| (0..2).map(move |s| (a, g.face(a, s)))).collect();
        let ftabs: Vec<(usize, Tabulation, Tabulation)> = faces
            .iter()
            .map(|(a, f)| {
                let p = PointSet::gauss(f, n);
                (*a, disc.element.tabulate(g, &p), disc.facet[*a].tabulate(f, &p))
            })
            .collect();
        let rtab = rich.tabulate(g, &PointSet::gauss(g, n_rich));
        let rtab_v = disc.element.tabulate(g, &PointSet::gauss(g, n_rich));
        let rftabs: Vec<(usize, Tabulation, Tabulation, Tabulation)> = faces
            .iter()
            .map(|(a, f)| {
                let p = PointSet::gauss(f, n_rich);
                (*a, rich.tabulate(g, &p), disc.element.tabulate(g, &p), disc.facet[*a].tabulate(f, &p))
            })
            .collect();

        for _ in 0..samples {
            let c = random_coeffs(&mut rng, disc.element_dofs());
            let v2 = sq_norm(&tab, &c);
            let vn = v2.sqrt();
            ex.max("inverse_time", ratio(sq_deriv(&tab, &c, 0..1).sqrt(), vn / dt));
            ex.max("inverse_space", ratio(sq_deriv(&tab, &c, 1..dim).sqrt(), vn / h));
            let (mut q2, mut r2) = (0.0, 0.0);
            let (mut mu2, mut dmu2) = (0.0, 0.0);
            for (a, te, tf) in &ftabs {
                if *a == 0 {
                    r2 += sq_norm(te, &c);
                } else {
                    q2 += sq_norm(te, &c);
                    let m = random_coeffs(&mut rng, tf.nb);
                    mu2 += sq_norm(tf, &m);
                    dmu2 += sq_deriv(tf, &m, 0..1);
                }
            }
            ex.max("trace_q", ratio(q2.sqrt(), vn / h.sqrt()));
            ex.max("trace_r", ratio(r2.sqrt(), vn / dt.sqrt()));
            ex.max("facet_inverse_time", ratio(dmu2.sqrt(), mu2.sqrt() / dt));

            // H¹ samples
            let w = random_coeffs(&mut rng, rich.len());
            let w2 = sq_norm(&rtab, &w);
            let wt = sq_deriv(&rtab, &w, 0..1).sqrt();
            let wx = sq_deriv(&rtab, &w, 1..dim).sqrt();
            let pw = fe::l2_project_tab(&rtab_v, |q| rtab.value(&w, q));
            let defect2: f64 = (0..rtab.nq).map(|q| rtab.w[q] * (rtab.value(&w, q) - rtab_v.value(&pw, q)).powi(2)).sum();
            let se = eps.sqrt();
            let scale = h * se * wt + se * wx;
            if quasi {
                ex.max("quasi_interp_k", ratio(defect2.sqrt(), lambda * (scale + w2.sqrt())));
            }
            let (mut lq, mut lr) = (0.0f64, 0.0f64);
            for (a, tw, tv, tf) in &rftabs {
                let tr2 = sq_norm(tw, &w);
                let d2: f64 = (0..tw.nq).map(|q| tw.w[q] * (tw.value(&w, q) - tv.value(&pw, q)).powi(2)).sum();
                let pf = fe::l2_project_tab(tf, |q| tw.value(&w, q));
                let pp2: f64 = (0..tw.nq).map(|q| tw.w[q] * (tv.value(&pw, q) - tf.value(&pf, q)).powi(2)).sum();
                if *a == 0 {
                    lr = lr.max(ratio(tr2, w2 / dt + w2.sqrt() * wt).unwrap_or(0.0));
                    ex.max("projection_r", ratio(pp2.sqrt(), dt.sqrt() * wt));
                    if quasi {
                        ex.max("quasi_interp_r", ratio(d2.sqrt(), scale / se));
                    }
                } else {
                    lq = lq.max(ratio(tr2, w2 / h + w2.sqrt() * wx).unwrap_or(0.0));
                    ex.max("projection_q", ratio(pp2.sqrt(), h.sqrt() * wx));
                    if quasi {
                        ex.max("quasi_interp_q", ratio(d2.sqrt(), h.sqrt() / se * scale));
                    }
                }
            }
            ex.max("local_trace_q", Some(lq.sqrt()));
            ex.max("local_trace_r", Some(lr.sqrt()));
        }
    }
    ex.reports(level, samples)
}

/// Random element field with zero facet part.
pub fn random_element_field(mesh: &SpaceTimeMesh, disc: &Discretization, rng: &mut ChaCha8Rng) -> DiscreteSolution {
    let mut s = DiscreteSolution::zeros(DofMap::new(mesh, disc));
    let ne = s.dofmap.n_element_unknowns();
    for v in &mut s.values[..ne] {
        *v = rng.gen_range(-1.0..1.0);
    }
    s
}

/// Jump weights of the averaging bound: for every element the facets
/// touching its closure with h_K^{1/2} (Q) or δt_K^{1/2} (R).
fn oswald_patches(mesh: &SpaceTimeMesh) -> Vec<Vec<(usize, f64)>> {
    let dim = mesh.dim();
    (0..mesh.n_elements())
        .map(|k| {
            let e = &mesh.elements[k];
            let mut cand: Vec<usize> = std::iter::once(k)
                .chain(mesh.vertex_neighbors(k))
                .flat_map(|j| mesh.elements[j].faces.iter().flatten().copied().collect::<Vec<_>>())
                .collect();
            cand.sort_unstable();
            cand.dedup();
            cand.into_iter()
                .filter(|&f| {
                    let fc = &mesh.facets[f];
                    matches!(fc.tag, BoundaryTag::Interior | BoundaryTag::Dirichlet)
                        && (0..dim).all(|a| fc.lo[a] <= e.hi[a] && fc.hi[a] >= e.lo[a])
                })
                .map(|f| {
                    let w = match mesh.facets[f].kind {
                        FacetKind::Q => e.h.sqrt(),
                        FacetKind::R => e.dt.sqrt(),
                    };
                    (f, w)
                })
                .collect()
        })
        .collect()
}

/// c in ‖v − I_h^c v‖_K ≤ c(Σ_Q h^{1/2}‖[[v]]‖_F + Σ_R δt^{1/2}‖[[v]]‖_F), with
/// the jump on Γ_D taken as the trace itself.
pub fn oswald_constant(
    mesh: &SpaceTimeMesh,
    disc: &Discretization,
    samples: usize,
    seed: u64,
    level: usize,
) -> ConstantReport {
    let op = AveragingOperator::new(mesh, disc);
    let patches = oswald_patches(mesh);
    let ftabs: Vec<Vec<Tabulation>> = mesh
        .facets
        .iter()
        .map(|fc| {
            let p = PointSet::gauss(&fc.geom, disc.n_estimator);
            fc.owners.iter().map(|o| disc.element.tabulate(&mesh.elements[o.element].geom, &p)).collect()
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: f64 = 0.0;
    for _ in 0..samples {
        let v = random_element_field(mesh, disc, &mut rng);
        let defect = op.defect(&v, &op.apply(&v));
        let jumps: Vec<f64> = mesh
            .facets
            .iter()
            .zip(&ftabs)
            .map(|(fc, t)| {
                let c0 = v.element(fc.owners[0].element);
                let s: f64 = (0..t[0].nq)
                    .map(|q| {
                        let other = if t.len() == 2 { t[1].value(v.element(fc.owners[1].element), q) } else { 0.0 };
                        t[0].w[q] * (t[0].value(c0, q) - other).powi(2)
                    })
                    .sum();
                s.sqrt()
            })
            .collect();
        for (k, patch) in patches.iter().enumerate() {
            let rhs: f64 = patch.iter().map(|&(f, w)| w * jumps[f]).sum();
            if let Some(r) = ratio(defect[k], rhs) {
                best = best.max(r);
            }
        }
    }
    ConstantReport::new("oswald", level, samples, best)
}

/// Which bubble to measure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BubbleKind {
    Element,
    /// bubble of the low face with the given spatial normal axis
    Facet { axis: usize },
}

/// ψ_K at reference point `r`, normalized to a maximum of one.
pub fn element_bubble(r: &[f64], dim: usize) -> f64 {
    let m = 1i32 << (dim - 1);
    (0..dim).map(|a| (1.0 - r[a] * r[a]).powi(m)).product()
}

/// ψ_{F,κ} on the reference element for the face r_axis = −1, and its
/// reference gradient.
pub fn facet_bubble(r: &[f64], dim: usize, axis: usize, kappa: f64) -> (f64, [f64; MAX_AXES]) {
    let m = 1i32 << (dim - 1);
    let s = (r[axis] + 1.0) / (2.0 * kappa);
    let mut grad = [0.0; MAX_AXES];
    if s >= 1.0 {
        return (0.0, grad);
    }
    let normal = (1.0 - s).powi(m);
    let dnormal = -(m as f64) * (1.0 - s).powi(m - 1) / (2.0 * kappa);
    let tang: Vec<(f64, f64)> = (0..dim)
        .map(|b| {
            if b == axis {
                (1.0, 0.0)
            } else {
                let u = 1.0 - r[b] * r[b];
                (u.powi(m / 2), (m / 2) as f64 * u.powi(m / 2 - 1) * (-2.0 * r[b]))
            }
        })
        .collect();
    let tp: f64 = tang.iter().map(|t| t.0).product();
    for b in 0..dim {
        grad[b] = if b == axis {
            dnormal * tp
        } else {
            let others: f64 = (0..dim).filter(|&c| c != b).map(|c| tang[c].0).product();
            normal * tang[b].1 * others
        };
    }
    (normal * tp, grad)
}

/// κ = (ε̃ ε)^{1/2}, clamped into [1e-6, 1].
pub fn kappa_for(eps: f64, eps_tilde: f64) -> f64 {
    (eps_tilde * eps).sqrt().clamp(1e-6, 1.0)
}

/// Gram matrix Σ_q w_q s_q f_q f_qᵀ of the rows `f(q)`.
fn gram(nq: usize, nb: usize, mut f: impl FnMut(usize) -> (f64, Vec<f64>)) -> DMatrix<f64> {
    let mut g = DMatrix::zeros(nb, nb);
    for q in 0..nq {
        let (w, v) = f(q);
        let v = DVector::from_vec(v);
        g += w * &v * v.transpose();
    }
    g
}

/// Smallest and largest λ with A x = λ M x, M positive definite.
fn rayleigh_range(a: &DMatrix<f64>, m: &DMatrix<f64>) -> (f64, f64) {
    let l = m.clone().cholesky().expect("mass matrix is positive definite").l();
    let li = l.try_inverse().expect("triangular factor is invertible");
    let s = &li * a * li.transpose();
    let ev = ((&s + s.transpose()) * 0.5).symmetric_eigenvalues();
    (ev.min(), ev.max())
}

/// Bubble-function constants. Every ratio is a Rayleigh quotient over the
/// polynomial space, so the best constant is an extreme generalized
/// eigenvalue; `samples` in the report is the dimension of that space.
/// Element ratios are taken on `geom`, facet ratios on the reference element.
pub fn bubble_constants(
    disc: &Discretization,
    geom: &BoxGeom,
    kind: BubbleKind,
    kappa: f64,
    level: usize,
) -> Result<Vec<ConstantReport>> {
    if !(kappa > 0.0 && kappa <= 1.0) {
        return Err(Error::InvalidArgument(format!("bubble squeeze κ = {kappa} outside (0, 1]")));
    }
    let dim = geom.dim;
    let m = 1usize << (dim - 1);
    // exact for ψ²v²
    let n = 2 * m + disc.ps + 2;
    let mut ex = Extremes::default();
    let nb = match kind {
        BubbleKind::Element => {
            let tab = disc.element.tabulate(geom, &PointSet::gauss(geom, n));
            let nb = tab.nb;
            let psi: Vec<f64> = (0..tab.nq)
                .map(|q| {
                    let r: Vec<f64> = (0..dim).map(|a| geom.to_ref(a, tab.x[q][a])).collect();
                    element_bubble(&r, dim)
                })
                .collect();
            let phi = |q: usize| tab.phi_at(q).to_vec();
            let mass = gram(tab.nq, nb, |q| (tab.w[q], phi(q)));
            let p1 = gram(tab.nq, nb, |q| (tab.w[q] * psi[q], phi(q)));
            let p2 = gram(tab.nq, nb, |q| (tab.w[q] * psi[q] * psi[q], phi(q)));
            ex.max("bubble_element_l2", Some(rayleigh_range(&p2, &mass).1.sqrt()));
            ex.min("bubble_element_c2", Some(rayleigh_range(&p1, &mass).0));
            nb
        }
        BubbleKind::Facet { axis } => {
            if axis == 0 || axis >= dim {
                return Err(Error::InvalidArgument(format!("facet bubbles need a spatial normal, got axis {axis}")));
            }
            let basis = &disc.facet[axis];
            let nb = basis.len();
            let lo = vec![-1.0; dim];
            let mut hi = vec![1.0; dim];
            hi[axis] = 2.0 * kappa - 1.0;
            let squeezed = BoxGeom::new(&lo, &hi);
            let face = BoxGeom::new(&lo, &vec![1.0; dim]).face(axis, 0);
            let tk = basis.tabulate(&squeezed, &PointSet::gauss(&squeezed, n));
            let tf = basis.tabulate(&face, &PointSet::gauss(&face, n));
            let bk: Vec<(f64, [f64; MAX_AXES])> = tk.x.iter().map(|x| facet_bubble(x, dim, axis, kappa)).collect();
            let bf: Vec<f64> = tf.x.iter().map(|x| facet_bubble(x, dim, axis, kappa).0).collect();
            let mass = gram(tf.nq, nb, |q| (tf.w[q], tf.phi_at(q).to_vec()));
            let p1 = gram(tf.nq, nb, |q| (tf.w[q] * bf[q], tf.phi_at(q).to_vec()));
            let p2 = gram(tf.nq, nb, |q| (tf.w[q] * bf[q] * bf[q], tf.phi_at(q).to_vec()));
            let k2 = gram(tk.nq, nb, |q| (tk.w[q], tk.phi_at(q).iter().map(|v| bk[q].0 * v).collect()));
            let mut g2 = DMatrix::zeros(nb, nb);
            for b in 1..dim {
                g2 += gram(tk.nq, nb, |q| {
                    let (p, dp) = bk[q];
                    let row = (0..nb).map(|i| dp[b] * tk.phi_at(q)[i] + p * tk.d1_at(b, q)[i]).collect();
                    (tk.w[q], row)
                });
            }
            ex.max("bubble_facet_trace", Some(rayleigh_range(&p2, &mass).1.sqrt()));
            ex.min("bubble_facet_c2", Some(rayleigh_range(&p1, &mass).0));
            ex.max("bubble_facet_l2", Some((rayleigh_range(&k2, &mass).1 / kappa).sqrt()));
            ex.max("bubble_facet_grad", Some((rayleigh_range(&g2, &mass).1 * kappa).sqrt()));
            nb
        }
    };
    Ok(ex.reports(level, nb))
}

/// max/min of a constant across levels.
pub fn level_drift(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    if min > 0.0 {
        max / min
    } else {
        f64::INFINITY
    }
}
