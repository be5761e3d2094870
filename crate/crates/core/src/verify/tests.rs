use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::assembly::{assemble_with, field_evaluate, interpolate, DiscreteSolution, DofMap, FieldQuantity, FormParts};
use crate::fe::{gauss_legendre, BoxGeom, PointSet, MAX_AXES};
use crate::mesh::{Domain, FacetKind};
use crate::problem::{linear_problem, rotating_pulse};

fn pulse_mesh(n_slabs: usize, n_cells: usize, hanging: bool) -> (ProblemSpec, SpaceTimeMesh) {
    let spec = rotating_pulse(1e-3).unwrap();
    let mut m = SpaceTimeMesh::build_initial(spec.domain.clone(), n_slabs, n_cells, RefinementPolicy::Proportional).unwrap();
    if hanging {
        m = m.refine_and_coarsen(&[m.elements[1].id], &[]).unwrap();
    }
    (spec, m)
}

fn random_state(mesh: &SpaceTimeMesh, disc: &Discretization, rng: &mut ChaCha8Rng) -> DiscreteSolution {
    let mut s = DiscreteSolution::zeros(DofMap::new(mesh, disc));
    for v in &mut s.values {
        *v = rng.gen_range(-1.0..1.0);
    }
    s
}

#[test]
fn subgrid_structure() {
    let (_, mesh) = pulse_mesh(2, 2, true);
    let pair = SubgridPair::new(&mesh).unwrap();
    assert_eq!(pair.fine.n_elements(), 2 * mesh.n_elements());
    assert_eq!(pair.new_facets.len(), mesh.n_elements());
    for &f in &pair.new_facets {
        assert_eq!(pair.fine.facets[f].kind, FacetKind::R);
    }
    for (k, e) in pair.fine.elements.iter().enumerate() {
        let p = &mesh.elements[pair.parent[k]];
        for a in 1..mesh.dim() {
            assert_eq!((e.lo[a], e.hi[a]), (p.lo[a], p.hi[a]));
        }
        assert_eq!(2 * (e.hi[0] - e.lo[0]), p.hi[0] - p.lo[0], "time halved");
    }
    for (k, ch) in pair.children.iter().enumerate() {
        assert_eq!(pair.fine.elements[ch[0]].lo[0], mesh.elements[k].lo[0]);
        assert_eq!(pair.fine.elements[ch[1]].hi[0], mesh.elements[k].hi[0]);
    }
}

#[test]
fn restricting_a_constant_state_gives_a_constant_state() {
    let (_, mesh) = pulse_mesh(2, 2, true);
    let disc = Discretization::new(2, 2);
    let pair = SubgridPair::new(&mesh).unwrap();
    let c = interpolate(&mesh, &disc, |_| 0.75);
    let r = subgrid_restrict(&pair, &disc, &c).unwrap();
    assert!(r.values.iter().all(|v| (v - 0.75).abs() < 1e-12));
}

#[test]
fn new_facets_carry_the_element_trace() {
    let (_, mesh) = pulse_mesh(1, 2, true);
    let disc = Discretization::new(2, 1);
    let pair = SubgridPair::new(&mesh).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let u = random_state(&mesh, &disc, &mut rng);
    let r = subgrid_restrict(&pair, &disc, &u).unwrap();
    for &f in &pair.new_facets {
        let fc = &pair.fine.facets[f];
        let k = pair.parent[fc.owners[0].element];
        for _ in 0..5 {
            let mut p = [0.0; MAX_AXES];
            for a in 0..fc.geom.dim {
                p[a] = fc.geom.lo[a] + rng.gen::<f64>() * fc.geom.extent(a);
            }
            let want = field_evaluate(&mesh, &disc, &u, k, &p, FieldQuantity::Value)[0];
            let got = crate::assembly::facet_evaluate(&pair.fine, &disc, &r, f, &p);
            assert!((want - got).abs() < 1e-12, "{want} vs {got}");
        }
    }
}

#[test]
fn restriction_rejects_foreign_states() {
    let (_, mesh) = pulse_mesh(1, 2, false);
    let (_, other) = pulse_mesh(2, 2, false);
    let disc = Discretization::new(2, 1);
    let pair = SubgridPair::new(&mesh).unwrap();
    let u = interpolate(&other, &disc, |_| 1.0);
    assert!(matches!(subgrid_restrict(&pair, &disc, &u), Err(crate::Error::MeshMismatch(_))));
}

#[test]
fn restricted_forms_agree_on_random_pairs() {
    for (d, ps) in [(1, 1), (2, 1), (2, 2)] {
        let spec = if d == 2 { rotating_pulse(1e-3).unwrap() } else { linear_problem(1, 0.1, [0.7, 0.0]).unwrap() };
        let mut mesh = SpaceTimeMesh::build_initial(spec.domain.clone(), 2, 2, RefinementPolicy::Proportional).unwrap();
        mesh = mesh.refine_and_coarsen(&[mesh.elements[0].id], &[]).unwrap();
        let disc = Discretization::new(d, ps);
        let pair = SubgridPair::new(&mesh).unwrap();
        let g = pair.restriction(&disc);
        let (a_h, _) = assemble_with(&mesh, &spec, &disc, FormParts::FULL, false);
        let (a_f, _) = assemble_with(&pair.fine, &spec, &disc, FormParts::FULL, false);
        let mut rng = ChaCha8Rng::seed_from_u64(20 + d as u64);
        for _ in 0..20 {
            let u = random_state(&mesh, &disc, &mut rng);
            let v = random_state(&mesh, &disc, &mut rng);
            let coarse = a_h.bilinear(&v.values, &u.values);
            let fine = a_f.bilinear(&g.apply(&v.values), &g.apply(&u.values));
            assert!((coarse - fine).abs() <= 1e-10 * coarse.abs().max(1.0), "d={d} ps={ps}: {coarse} vs {fine}");
        }
    }
}

#[test]
fn galerkin_orthogonality_on_the_pulse() {
    let disc = Discretization::new(2, 1);
    for hanging in [false, true] {
        let (spec, mesh) = pulse_mesh(2, 4, hanging);
        let o = check_galerkin_orthogonality(&spec, &mesh, &disc).unwrap();
        assert!(o.max_abs <= 1e-9 * o.scale.max(1.0), "{o:?}");
    }
}

#[test]
fn galerkin_orthogonality_single_element() {
    let spec = linear_problem(1, 0.3, [0.5, 0.0]).unwrap();
    let mesh = SpaceTimeMesh::build_initial(spec.domain.clone(), 1, 1, RefinementPolicy::Proportional).unwrap();
    let o = check_galerkin_orthogonality(&spec, &mesh, &Discretization::new(1, 1)).unwrap();
    assert!(o.max_abs <= 1e-11, "{o:?}");
}

#[test]
fn perturbing_the_subgrid_solution_breaks_orthogonality() {
    let (spec, mesh) = pulse_mesh(1, 4, false);
    let disc = Discretization::new(2, 1);
    let pair = SubgridPair::new(&mesh).unwrap();
    let s = solve_pair(&pair, &spec, &disc).unwrap();
    let exact = orthogonality_defect(&s, &s.fine.values);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let delta: Vec<f64> = (0..s.fine.values.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let u: Vec<f64> = s.fine.values.iter().zip(&delta).map(|(a, b)| a + 1e-3 * b).collect();
    let broken = orthogonality_defect(&s, &u);
    // linearity: the defect is exactly the response to the perturbation
    let zero: Vec<f64> = vec![0.0; delta.len()];
    let t = s.restriction.apply_transpose(&s.form.matvec(&delta));
    let expect = t
        .iter()
        .zip(&s.coarse_free)
        .filter(|(_, &f)| f)
        .map(|(x, _)| x.abs())
        .fold(0.0, f64::max)
        * 1e-3;
    assert!(exact.max_abs < 1e-9 * exact.scale.max(1.0));
    assert!(broken.max_abs > 1e3 * exact.max_abs.max(1e-15));
    assert!((broken.max_abs - expect).abs() <= 1e-6 * expect + exact.max_abs, "{} vs {expect}", broken.max_abs);
    let _ = zero;
}

#[test]
fn saturation_is_flagged_for_exact_solutions() {
    let spec = linear_problem(1, 1.0, [1.0, 0.0]).unwrap();
    let mesh = SpaceTimeMesh::build_initial(spec.domain.clone(), 2, 2, RefinementPolicy::Proportional).unwrap();
    let s = measure_saturation(&spec, &mesh, &Discretization::new(1, 1)).unwrap();
    assert!(s.numerator <= 1e-10 && s.denominator <= 1e-10, "{s:?}");
    assert_eq!(s.rho, None);
}

#[test]
fn saturation_is_measured_on_the_pulse() {
    let (spec, mesh) = pulse_mesh(2, 4, false);
    let s = measure_saturation(&spec, &mesh, &Discretization::new(2, 1)).unwrap();
    let rho = s.rho.expect("pulse is not exact");
    assert!(rho > 0.0 && rho.is_finite(), "{s:?}");
}

fn unit_mesh(d: usize, n_slabs: usize, n_cells: usize, neumann: bool) -> SpaceTimeMesh {
    let mut dom = Domain::new(1.0, &vec![0.0; d], &vec![1.0; d]);
    if neumann {
        dom.lateral_neumann = vec![[true; 2]; d];
    }
    SpaceTimeMesh::build_initial(dom, n_slabs, n_cells, RefinementPolicy::Proportional).unwrap()
}

#[test]
fn averaging_two_elements() {
    let mesh = unit_mesh(1, 1, 2, true);
    let disc = Discretization::new(1, 1);
    let mut v = DiscreteSolution::zeros(DofMap::new(&mesh, &disc));
    let right = if mesh.elements[0].lo[1] == 0 { 1 } else { 0 };
    for i in v.dofmap.element_range(right) {
        v.values[i] = 1.0;
    }
    let op = AveragingOperator::new(&mesh, &disc);
    let field = op.apply(&v);
    for t in [0.0, 0.3, 1.0] {
        for k in 0..2 {
            let got = op.evaluate_in(&disc, &field, k, &[t, 0.5, 0.0]);
            assert!((got - 0.5).abs() < 1e-12);
        }
        assert!((op.evaluate_in(&disc, &field, right, &[t, 1.0, 0.0]) - 1.0).abs() < 1e-12);
    }
}

#[test]
fn averaging_fixes_continuous_fields() {
    // in V_h globally, so continuous across hanging facets too
    let f = |p: &[f64; MAX_AXES]| (1.0 + p[0]) * p[1] * (1.0 - p[1]) * p[2] * (1.0 - p[2]);
    let mut mesh = unit_mesh(2, 2, 2, false);
    mesh = mesh.refine_and_coarsen(&[mesh.elements[0].id], &[]).unwrap();
    let disc = Discretization::new(2, 2);
    let v = interpolate(&mesh, &disc, f);
    let op = AveragingOperator::new(&mesh, &disc);
    let defect = op.defect(&v, &op.apply(&v));
    assert!(defect.iter().all(|&x| x <= 1e-12), "{defect:?}");
}

#[test]
fn averaged_fields_are_continuous_and_vanish_on_dirichlet() {
    let mut mesh = unit_mesh(2, 2, 2, false);
    mesh = mesh.refine_and_coarsen(&[mesh.elements[3].id], &[]).unwrap();
    let disc = Discretization::new(2, 1);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let v = random_element_field(&mesh, &disc, &mut rng);
    let op = AveragingOperator::new(&mesh, &disc);
    let field = op.apply(&v);
    for fc in &mesh.facets {
        let pts = PointSet::gauss(&fc.geom, 3);
        for q in 0..pts.len() {
            let p = pts.point(q);
            let a = op.evaluate_in(&disc, &field, fc.owners[0].element, &p);
            if fc.owners.len() == 2 {
                let b = op.evaluate_in(&disc, &field, fc.owners[1].element, &p);
                assert!((a - b).abs() <= 1e-12, "mismatch {a} {b}");
            } else if fc.tag == crate::mesh::BoundaryTag::Dirichlet {
                assert!(a.abs() <= 1e-12);
            }
        }
    }
}

#[test]
fn oswald_constant_is_level_stable() {
    let spec = rotating_pulse(1e-2).unwrap();
    let cfg = VerifyConfig { samples: 20, ..VerifyConfig::default() };
    let disc = Discretization::new(2, 1);
    let c: Vec<f64> = (0..3)
        .map(|l| oswald_constant(&uniform_level(&spec, &cfg, l).unwrap(), &disc, 20, 1, l).constant)
        .collect();
    assert!(c.iter().all(|x| x.is_finite() && *x > 0.0), "{c:?}");
    assert!(level_drift(&c) <= 2.0, "{c:?}");
}

#[test]
fn element_bubble_vanishes_on_the_boundary_and_peaks_at_one() {
    for dim in [2, 3] {
        let (z, _) = gauss_legendre(5);
        for a in 0..dim {
            for s in [-1.0, 1.0] {
                for &x in &z {
                    let mut r = [x; MAX_AXES];
                    r[a] = s;
                    assert!(element_bubble(&r, dim).abs() <= 1e-12);
                }
            }
        }
        let n: usize = 41;
        let mut m: f64 = 0.0;
        for i in 0..n.pow(dim as u32) {
            let mut r = [0.0; MAX_AXES];
            let mut rem = i;
            for a in 0..dim {
                r[a] = -1.0 + 2.0 * (rem % n) as f64 / (n - 1) as f64;
                rem /= n;
            }
            m = m.max(element_bubble(&r, dim));
        }
        assert!((m - 1.0).abs() <= 1e-3);
    }
}

#[test]
fn facet_bubble_shape() {
    for kappa in [1.0, 0.25, 1e-3] {
        let dim = 3;
        // one on the facet centre, zero on the facet boundary and past the squeeze
        assert!((facet_bubble(&[0.0, -1.0, 0.0], dim, 1, kappa).0 - 1.0).abs() < 1e-14);
        assert_eq!(facet_bubble(&[1.0, -1.0, 0.3], dim, 1, kappa).0, 0.0);
        assert_eq!(facet_bubble(&[0.1, 2.0 * kappa - 1.0, 0.3], dim, 1, kappa).0, 0.0);
        // gradient against central differences
        let r = [0.2, -1.0 + 0.3 * kappa, -0.4];
        let (_, g) = facet_bubble(&r, dim, 1, kappa);
        for b in 0..dim {
            let hstep = 1e-6 * kappa;
            let mut rp = r;
            let mut rm = r;
            rp[b] += hstep;
            rm[b] -= hstep;
            let fd = (facet_bubble(&rp, dim, 1, kappa).0 - facet_bubble(&rm, dim, 1, kappa).0) / (2.0 * hstep);
            assert!((fd - g[b]).abs() <= 1e-5 * (1.0 + g[b].abs()), "axis {b}: {fd} vs {}", g[b]);
        }
    }
}

/// min and max of the generalized eigenproblem A x = λ M x.
fn gen_eig(a: &DMatrix<f64>, m: &DMatrix<f64>) -> (f64, f64) {
    let l = m.clone().cholesky().unwrap().l();
    let li = l.try_inverse().unwrap();
    let s = &li * a * li.transpose();
    let s = (&s + s.transpose()) * 0.5;
    let ev = s.symmetric_eigenvalues();
    (ev.min(), ev.max())
}

/// Weighted Gram matrix ∫ w φ_i φ_j and derivative Gram matrix on a box with
/// an independently built tensor Gauss rule.
fn oracle_grams(geom: &BoxGeom, ps: usize, weight: &dyn Fn(&[f64]) -> f64, deriv_axis: Option<usize>) -> DMatrix<f64> {
    let basis = crate::fe::TensorBasis::element(geom.dim - 1, ps);
    let n: usize = 12;
    let (z, w) = gauss_legendre(n);
    let nb = basis.len();
    let mut g = DMatrix::zeros(nb, nb);
    let dim = geom.dim;
    for i in 0..n.pow(dim as u32) {
        let mut r = [0.0; MAX_AXES];
        let mut wt = 1.0;
        let mut rem = i;
        for a in 0..dim {
            r[a] = z[rem % n];
            wt *= w[rem % n] * 0.5 * geom.extent(a);
            rem /= n;
        }
        let ev = basis.evaluate(&r[..dim]);
        let vals: Vec<f64> = match deriv_axis {
            None => ev.values.clone(),
            Some(a) => ev.d1[a].iter().map(|v| v * 2.0 / geom.extent(a)).collect(),
        };
        let wr = weight(&r[..dim]);
        for p in 0..nb {
            for q in 0..nb {
                g[(p, q)] += wt * wr * vals[p] * vals[q];
            }
        }
    }
    g
}

fn level_geom(level: usize) -> BoxGeom {
    let h = 0.5f64.powi(level as i32);
    BoxGeom::new(&[0.0, 0.0], &[0.3 * h, h])
}

#[test]
fn element_bubble_constant_matches_eigenvalue_and_is_level_stable() {
    let disc = Discretization::new(1, 1);
    let mut c2 = Vec::new();
    for level in 0..3 {
        let g = level_geom(level);
        let rep = bubble_constants(&disc, &g, BubbleKind::Element, 1.0, level).unwrap();
        let got = rep.iter().find(|r| r.inequality == "bubble_element_c2").unwrap().constant;
        let m = oracle_grams(&g, 1, &|_| 1.0, None);
        let mp = oracle_grams(&g, 1, &|r| element_bubble(r, 2), None);
        let (lmin, lmax) = gen_eig(&mp, &m);
        assert!(got > 0.0);
        assert!((got - lmin).abs() <= 1e-10 * lmin && lmin < lmax, "{got} vs {lmin}");
        c2.push(got);
    }
    assert!(level_drift(&c2) <= 1.01, "{c2:?}");
}

#[test]
fn inverse_time_constant_is_refinement_invariant() {
    let mut oracle = Vec::new();
    for level in 0..3 {
        let g = level_geom(level);
        let m = oracle_grams(&g, 1, &|_| 1.0, None);
        let k = oracle_grams(&g, 1, &|_| 1.0, Some(0));
        let (_, lmax) = gen_eig(&k, &m);
        oracle.push(lmax.sqrt() * g.extent(0));
    }
    assert!(level_drift(&oracle) <= 1.01, "{oracle:?}");
    let spec = linear_problem(1, 1.0, [1.0, 0.0]).unwrap();
    let disc = Discretization::new(1, 1);
    let cfg = VerifyConfig { n_cells: 1, policy: RefinementPolicy::Proportional, ..VerifyConfig::default() };
    let mut measured = Vec::new();
    for level in 0..3 {
        let mesh = uniform_level(&spec, &cfg, level).unwrap();
        let rep = inequality_constants(&mesh, &disc, 1.0, 200, 3, level);
        let c = rep.iter().find(|r| r.inequality == "inverse_time").unwrap().constant;
        assert!(c <= oracle[0] * (1.0 + 1e-10), "{c} above the best constant {}", oracle[0]);
        measured.push(c);
    }
    assert!(level_drift(&measured) <= 1.01, "{measured:?}");
}

#[test]
fn constant_fields_have_no_derivative() {
    let disc = Discretization::new(2, 2);
    let g = BoxGeom::new(&[0.0, 0.0, 0.0], &[0.1, 0.2, 0.3]);
    let tab = disc.element.tabulate(&g, &PointSet::gauss(&g, 4));
    let c = vec![2.5; disc.element_dofs()];
    for q in 0..tab.nq {
        for a in 0..3 {
            assert!(tab.deriv(&c, a, q).abs() < 1e-11);
        }
    }
}

#[test]
fn trace_ratio_scales_like_inverse_root_h() {
    let disc = Discretization::new(1, 1);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let c: Vec<f64> = (0..disc.element_dofs()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let raw = |g: &BoxGeom| {
        let tab = disc.element.tabulate(g, &PointSet::gauss(g, 4));
        let v2: f64 = (0..tab.nq).map(|q| tab.w[q] * tab.value(&c, q).powi(2)).sum();
        let mut f2 = 0.0;
        for s in 0..2 {
            let f = g.face(1, s);
            let t = disc.element.tabulate(g, &PointSet::gauss(&f, 4));
            f2 += (0..t.nq).map(|q| t.w[q] * t.value(&c, q).powi(2)).sum::<f64>();
        }
        (f2 / v2).sqrt()
    };
    let r0 = raw(&level_geom(0));
    let r1 = raw(&level_geom(1));
    assert!((r1 / r0 / 2f64.sqrt() - 1.0).abs() <= 0.1, "{}", r1 / r0);
}

#[test]
fn degenerate_kappa_is_rejected() {
    let disc = Discretization::new(1, 1);
    let g = level_geom(0);
    for k in [0.0, -0.1, 1.5, f64::NAN] {
        assert!(bubble_constants(&disc, &g, BubbleKind::Facet { axis: 1 }, k, 0).is_err());
    }
    assert!(bubble_constants(&disc, &g, BubbleKind::Facet { axis: 0 }, 0.5, 0).is_err());
    assert_eq!(kappa_for(1e-20, 1e-20), 1e-6);
    assert_eq!(kappa_for(4.0, 1.0), 1.0);
}

#[test]
fn verification_constants_are_positive_and_level_stable() {
    let spec = rotating_pulse(1.0).unwrap();
    let cfg = VerifyConfig { samples: 30, ..VerifyConfig::default() };
    let reps = run_verification(&spec, &cfg).unwrap();
    let mut names: Vec<&str> = reps.iter().map(|r| r.inequality.as_str()).collect();
    names.sort_unstable();
    names.dedup();
    assert!(names.contains(&"quasi_interp_k") && names.contains(&"oswald") && names.contains(&"bubble_facet_c2"));
    for n in names {
        let v: Vec<f64> = reps.iter().filter(|r| r.inequality == n).map(|r| r.constant).collect();
        assert_eq!(v.len(), 3, "{n}");
        assert!(v.iter().all(|x| x.is_finite() && *x > 0.0), "{n}: {v:?}");
        assert!(level_drift(&v) <= 2.0, "{n}: {v:?}");
    }
}
