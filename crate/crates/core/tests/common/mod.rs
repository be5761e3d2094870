//! Shared fixtures and pointwise oracles for the integration tests. The
//! oracles re-derive every quantity from field evaluation on tensor Gauss
//! rules built here, independent of the library's tabulations.
#![allow(dead_code)]

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sthdg::assembly::{facet_evaluate, field_evaluate, DiscreteSolution, Discretization, DofMap, FieldQuantity};
use sthdg::estimator::regime_and_weights;
use sthdg::fe::{gauss_legendre, BoxGeom};
use sthdg::mesh::{BoundaryTag, Domain, RefinementPolicy, SpaceTimeMesh};
use sthdg::problem::{ExactSolution, Point, ProblemSpec};

/// u = sin(t + x₁) cos(x₂) advected by a rigid rotation.
pub struct Smooth;

impl ExactSolution for Smooth {
    fn value(&self, p: &Point) -> f64 {
        (p[0] + p[1]).sin() * p[2].cos()
    }
    fn gradient(&self, p: &Point) -> [f64; 3] {
        let c = (p[0] + p[1]).cos() * p[2].cos();
        [c, c, -(p[0] + p[1]).sin() * p[2].sin()]
    }
    fn laplacian(&self, p: &Point) -> f64 {
        -2.0 * self.value(p)
    }
}

/// Smooth data on the unit box; `neumann` puts x₁ = 0 on Γ_N.
pub fn smooth_problem(d: usize, eps: f64, neumann: bool) -> ProblemSpec {
    let mut dom = Domain::new(1.0, &vec![0.0; d], &vec![1.0; d]);
    if neumann {
        dom.lateral_neumann[0] = [true, false];
    }
    ProblemSpec::from_exact("smooth", eps, dom, Arc::new(|p: &Point| [-p[2] + 0.5, p[1] - 0.5]), Arc::new(Smooth))
        .unwrap()
}

pub fn initial_mesh(spec: &ProblemSpec, slabs: usize, cells: usize) -> SpaceTimeMesh {
    SpaceTimeMesh::build_initial(spec.domain.clone(), slabs, cells, RefinementPolicy::Proportional).unwrap()
}

/// Two slabs, two cells per axis, first element refined once.
pub fn hanging_mesh(spec: &ProblemSpec) -> SpaceTimeMesh {
    let m = initial_mesh(spec, 2, 2);
    m.refine_and_coarsen(&[m.elements[0].id], &[]).unwrap()
}

pub fn random_solution(mesh: &SpaceTimeMesh, disc: &Discretization, seed: u64) -> DiscreteSolution {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = DiscreteSolution::zeros(DofMap::new(mesh, disc));
    for v in &mut s.values {
        *v = rng.gen_range(-1.0..1.0);
    }
    s
}

/// Tensor Gauss rule on a box, built directly from the 1D rule.
pub fn oracle_points(g: &BoxGeom, n: usize) -> Vec<([f64; 3], f64)> {
    let (z, w) = gauss_legendre(n);
    let mut out = vec![([0.0; 3], 1.0)];
    for a in 0..g.dim {
        let mut next = Vec::new();
        for (p, wt) in &out {
            if g.hi[a] == g.lo[a] {
                let mut q = *p;
                q[a] = g.lo[a];
                next.push((q, *wt));
                continue;
            }
            let half = 0.5 * (g.hi[a] - g.lo[a]);
            for (zi, wi) in z.iter().zip(&w) {
                let mut q = *p;
                q[a] = g.lo[a] + half * (zi + 1.0);
                next.push((q, wt * wi * half));
            }
        }
        out = next;
    }
    out
}

/// max |β·n| over a dense sample of the facet and its corners.
pub fn oracle_beta_s(spec: &ProblemSpec, g: &BoxGeom, a: usize) -> f64 {
    let mut pts: Vec<[f64; 3]> = oracle_points(g, 40).into_iter().map(|(p, _)| p).collect();
    for c in 0..(1 << g.dim) {
        let mut p = [0.0; 3];
        for ax in 0..g.dim {
            p[ax] = if (c >> ax) & 1 == 0 { g.lo[ax] } else { g.hi[ax] };
        }
        pts.push(p);
    }
    pts.iter().map(|p| spec.beta_st(p)[a].abs()).fold(0.0, f64::max)
}

/// ‖v − Πv‖² on `g` for the basis `basis`, with Π computed at `n` points.
pub fn oracle_defect(basis: &sthdg::fe::TensorBasis, g: &BoxGeom, n: usize, v: &dyn Fn(&[f64; 3]) -> f64) -> f64 {
    let c = sthdg::fe::l2_project(basis, g, n, v);
    oracle_points(g, n)
        .iter()
        .map(|(p, w)| {
            let r: Vec<f64> = (0..g.dim).map(|a| g.to_ref(a, p[a])).collect();
            let ev = basis.evaluate(&r);
            let pv: f64 = c.iter().zip(&ev.values).map(|(x, y)| x * y).sum();
            w * (v(p) - pv).powi(2)
        })
        .sum()
}

/// Every estimator term re-derived from pointwise evaluation.
pub fn oracle_estimate(
    mesh: &SpaceTimeMesh,
    disc: &Discretization,
    spec: &ProblemSpec,
    sol: &DiscreteSolution,
    k: usize,
    n: usize,
) -> [f64; 10] {
    let e = &mesh.elements[k];
    let eps = spec.eps;
    let h = e.h;
    let lam = (h / eps.sqrt()).min(1.0);
    let dim = mesh.dim();
    let val = |k: usize, p: &[f64; 3], w: FieldQuantity| field_evaluate(mesh, disc, sol, k, p, w);
    let resid = |p: &[f64; 3]| {
        let b = (spec.beta)(p);
        let g = val(k, p, FieldQuantity::SpatialGradient);
        let bg: f64 = (0..dim - 1).map(|i| b[i] * g[i]).sum();
        (spec.source)(p) + eps * val(k, p, FieldQuantity::SpatialLaplacian)[0]
            - val(k, p, FieldQuantity::TimeDerivative)[0]
            - bg
    };
    let rr: f64 = oracle_points(&e.geom, n).iter().map(|(p, w)| w * resid(p).powi(2)).sum();
    let osc_k = oracle_defect(&disc.element, &e.geom, n, &resid);

    let (mut j1, mut jq, mut j3q, mut j3r, mut bc1, mut bc2, mut oscn) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    for a in 0..dim {
        for side in 0..2 {
            let sign = if side == 1 { 1.0 } else { -1.0 };
            for &f in e.face(a, side) {
                let fc = &mesh.facets[f];
                let bs = oracle_beta_s(spec, &fc.geom, a);
                let rn = |p: &[f64; 3]| {
                    let bn = sign * spec.beta_st(p)[a];
                    let u = val(k, p, FieldQuantity::Value)[0];
                    let dn = if a >= 1 { sign * val(k, p, FieldQuantity::SpatialGradient)[a - 1] } else { 0.0 };
                    let g = match fc.tag {
                        BoundaryTag::Omega0 => (spec.initial)(p),
                        BoundaryTag::OmegaT => 0.0,
                        _ => {
                            let mut nn = [0.0; 3];
                            nn[a] = sign;
                            (spec.neumann)(p, &nn)
                        }
                    };
                    g - eps * dn + if bn < 0.0 { u * bn } else { 0.0 }
                };
                for (p, w) in oracle_points(&fc.geom, n) {
                    let jump = val(k, &p, FieldQuantity::Value)[0] - facet_evaluate(mesh, disc, sol, f, &p);
                    let wt = (bs - 0.5 * sign * spec.beta_st(&p)[a]).abs();
                    if a == 0 {
                        j3r += w * wt * jump * jump;
                    } else {
                        j3q += w * wt * jump * jump;
                        jq += w * jump * jump;
                        if fc.tag == BoundaryTag::Interior {
                            let other = fc.owners.iter().map(|o| o.element).find(|&o| o != k).unwrap();
                            let gj = val(k, &p, FieldQuantity::SpatialGradient)[a - 1]
                                - val(other, &p, FieldQuantity::SpatialGradient)[a - 1];
                            // fine-side spatial size
                            let hf = fc.owners.iter().map(|o| mesh.elements[o.element].h).fold(f64::INFINITY, f64::min);
                            j1 += hf * w * gj * gj;
                        }
                    }
                    if fc.tag == BoundaryTag::NeumannLateral {
                        bc1 += w * rn(&p).powi(2);
                    }
                    if fc.tag == BoundaryTag::Omega0 {
                        bc2 += w * rn(&p).powi(2);
                    }
                }
                if fc.tag.is_neumann() {
                    oscn += oracle_defect(&disc.facet[a], &fc.geom, n, &rn);
                }
            }
        }
    }
    [
        lam * rr.sqrt(),
        (eps * j1).sqrt(),
        (eps / h * jq).sqrt(),
        (h.sqrt() / eps * jq).sqrt(),
        j3q.sqrt(),
        j3r.sqrt(),
        (h / eps * bc1).sqrt(),
        bc2.sqrt(),
        lam * osc_k.sqrt(),
        (h / eps * oscn).sqrt(),
    ]
}

pub fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1e-12)
}

/// Norm terms from pointwise evaluation at `n` points per axis.
pub fn oracle_norms(mesh: &SpaceTimeMesh, disc: &Discretization, spec: &ProblemSpec, sol: &DiscreteSolution, k: usize, n: usize) -> [f64; 6] {
    let ex = spec.exact.clone().unwrap();
    let e = &mesh.elements[k];
    let dim = mesh.dim();
    let w = regime_and_weights(e, spec.eps);
    let mut out = [0.0; 6];
    for (p, wt) in oracle_points(&e.geom, n) {
        let g = ex.gradient(&p);
        let gh = field_evaluate(mesh, disc, sol, k, &p, FieldQuantity::SpatialGradient);
        out[0] += wt * (ex.value(&p) - field_evaluate(mesh, disc, sol, k, &p, FieldQuantity::Value)[0]).powi(2);
        out[3] += wt * spec.eps * (1..dim).map(|a| (g[a] - gh[a - 1]).powi(2)).sum::<f64>();
        out[5] += wt * w.tau_eps * (g[0] - field_evaluate(mesh, disc, sol, k, &p, FieldQuantity::TimeDerivative)[0]).powi(2);
    }
    for a in 0..dim {
        for side in 0..2 {
            let sign = if side == 1 { 1.0 } else { -1.0 };
            for &f in e.face(a, side) {
                let fc = &mesh.facets[f];
                let bs = oracle_beta_s(spec, &fc.geom, a);
                for (p, wt) in oracle_points(&fc.geom, n) {
                    let uh = field_evaluate(mesh, disc, sol, k, &p, FieldQuantity::Value)[0];
                    let lh = facet_evaluate(mesh, disc, sol, f, &p);
                    let bn = sign * spec.beta_st(&p)[a];
                    out[1] += wt * (bs - 0.5 * bn).abs() * (lh - uh).powi(2);
                    if fc.tag.is_neumann() {
                        out[2] += wt * 0.5 * bn.abs() * (ex.value(&p) - lh).powi(2);
                    }
                    if a > 0 {
                        out[4] += wt * spec.eps / e.h * (lh - uh).powi(2);
                    }
                }
            }
        }
    }
    out
}


/// a_h(u, v) and ℓ(v) from pointwise evaluation at `n` points per axis.
pub fn oracle_form(
    mesh: &SpaceTimeMesh,
    disc: &Discretization,
    spec: &ProblemSpec,
    u: &DiscreteSolution,
    v: &DiscreteSolution,
    n: usize,
) -> (f64, f64) {
    let dim = mesh.dim();
    let eps = spec.eps;
    let alpha = 8.0 * (disc.ps * disc.ps) as f64;
    let (mut a, mut l) = (0.0, 0.0);
    for k in 0..mesh.n_elements() {
        let e = &mesh.elements[k];
        let val = |s: &DiscreteSolution, p: &[f64; 3], w: FieldQuantity| field_evaluate(mesh, disc, s, k, p, w);
        for (p, w) in oracle_points(&e.geom, n) {
            let b = spec.beta_st(&p);
            let (gu, gv) = (val(u, &p, FieldQuantity::SpatialGradient), val(v, &p, FieldQuantity::SpatialGradient));
            let mut grad_v = vec![val(v, &p, FieldQuantity::TimeDerivative)[0]];
            grad_v.extend(&gv);
            let diff: f64 = (0..dim - 1).map(|i| eps * gu[i] * gv[i]).sum();
            let adv: f64 = (0..dim).map(|i| b[i] * grad_v[i]).sum();
            a += w * (diff - val(u, &p, FieldQuantity::Value)[0] * adv);
            l += w * (spec.source)(&p) * val(v, &p, FieldQuantity::Value)[0];
        }
        for ax in 0..dim {
            for side in 0..2 {
                let sign = if side == 1 { 1.0 } else { -1.0 };
                for &f in e.face(ax, side) {
                    let fc = &mesh.facets[f];
                    let bs = oracle_beta_s(spec, &fc.geom, ax);
                    let tau = eps * alpha / fc.h;
                    for (p, w) in oracle_points(&fc.geom, n) {
                        let (uk, vk) = (val(u, &p, FieldQuantity::Value)[0], val(v, &p, FieldQuantity::Value)[0]);
                        let (lam, mu) = (facet_evaluate(mesh, disc, u, f, &p), facet_evaluate(mesh, disc, v, f, &p));
                        let bn = sign * spec.beta_st(&p)[ax];
                        a += w * (bn * lam + bs * (uk - lam)) * (vk - mu);
                        if fc.tag.is_neumann() {
                            if bn > 0.0 {
                                a += w * bn * lam * mu;
                            }
                            let g = match fc.tag {
                                BoundaryTag::Omega0 => (spec.initial)(&p),
                                BoundaryTag::OmegaT => 0.0,
                                _ => {
                                    let mut nn = [0.0; 3];
                                    nn[ax] = sign;
                                    (spec.neumann)(&p, &nn)
                                }
                            };
                            l += w * g * mu;
                        }
                        if ax >= 1 {
                            let dnu = sign * val(u, &p, FieldQuantity::SpatialGradient)[ax - 1];
                            let dnv = sign * val(v, &p, FieldQuantity::SpatialGradient)[ax - 1];
                            a += w * (tau * (uk - lam) * (vk - mu) - eps * (uk - lam) * dnv - eps * dnu * (vk - mu));
                        }
                    }
                }
            }
        }
    }
    (a, l)
}
