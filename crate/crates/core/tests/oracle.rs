mod common;

use common::*;
use sthdg::assembly::{assemble_with, Discretization, FormParts};
use sthdg::estimator::{error_norms, estimate};

#[test]
fn bilinear_form_matches_pointwise_oracle() {
    for (d, ps, eps) in [(1, 1, 0.1), (1, 2, 0.03), (2, 1, 0.2), (2, 2, 0.05)] {
        let disc = Discretization::new(d, ps);
        // on one element β·n changes sign inside the Neumann facet, where
        // neither rule integrates the upwind indicator exactly
        let plain = smooth_problem(d, eps, false);
        let spec = smooth_problem(d, eps, true);
        let cases = [(&plain, initial_mesh(&plain, 1, 1)), (&spec, initial_mesh(&spec, 1, 2)), (&spec, hanging_mesh(&spec))];
        for (spec, mesh) in cases {
            let spec: &sthdg::problem::ProblemSpec = spec;
            let (sys, _) = assemble_with(&mesh, spec, &disc, FormParts::FULL, false);
            for seed in 0..3 {
                let u = random_solution(&mesh, &disc, 2 * seed);
                let v = random_solution(&mesh, &disc, 2 * seed + 1);
                let (a, l) = oracle_form(&mesh, &disc, spec, &u, &v, 2 * disc.n_estimator);
                let got_a = sys.bilinear(&v.values, &u.values);
                let got_l: f64 = sys.rhs.iter().zip(&v.values).map(|(x, y)| x * y).sum();
                assert!(close(got_a, a, 1e-8), "d={d} ps={ps}: a_h {got_a} vs {a}");
                assert!(close(got_l, l, 1e-8), "d={d} ps={ps}: rhs {got_l} vs {l}");
            }
        }
    }
}

#[test]
fn terms_match_high_order_oracle() {
    for (d, ps, eps) in [(1, 1, 0.1), (1, 2, 0.03), (2, 1, 0.2), (2, 2, 0.05)] {
        let spec = smooth_problem(d, eps, true);
        let mesh = hanging_mesh(&spec);
        let disc = Discretization::new(d, ps);
        let sol = random_solution(&mesh, &disc, 7 + ps as u64);
        let est = estimate(&mesh, &disc, &spec, &sol);
        for k in 0..mesh.n_elements() {
            let o = oracle_estimate(&mesh, &disc, &spec, &sol, k, 2 * disc.n_estimator);
            let e = &est.elements[k];
            let got = [e.eta_r, e.eta_j1, e.eta_j21, e.eta_j22, e.eta_j3q, e.eta_j3r, e.eta_bc1, e.eta_bc2, e.osc_k, e.osc_n];
            for (i, (g, w)) in got.iter().zip(&o).enumerate() {
                assert!(close(*g, *w, 1e-8), "d={d} ps={ps} element {k} term {i}: {g} vs {w}");
            }
        }
        let sum: f64 = est.elements.iter().map(|e| e.sum_of_squares()).sum();
        assert!((est.eta * est.eta - sum).abs() <= 1e-12 * est.eta * est.eta);
        assert!(est.elements.iter().any(|e| e.eta_bc1 > 0.0 && e.eta_bc2 > 0.0 || e.eta_bc1 > 0.0));
    }
}

#[test]
fn norms_match_oracle() {
    for (d, ps) in [(1, 1), (2, 2)] {
        let spec = smooth_problem(d, 0.07, true);
        let mesh = hanging_mesh(&spec);
        let disc = Discretization::new(d, ps);
        let sol = random_solution(&mesh, &disc, 11);
        let rep = error_norms(&mesh, &disc, &spec, &sol).unwrap();
        for k in 0..mesh.n_elements() {
            let o = oracle_norms(&mesh, &disc, &spec, &sol, k, 2 * disc.n_estimator);
            let b = &rep.elements[k];
            let got = [b.l2, b.upwind_jump, b.neumann, b.gradient, b.penalty, b.time];
            for (i, (g, w)) in got.iter().zip(&o).enumerate() {
                assert!(close(*g, *w, 1e-8), "d={d} element {k} term {i}: {g} vs {w}");
            }
        }
        let st: f64 = rep.elements.iter().map(|b| b.st_sq(1.0)).sum();
        assert!((rep.st * rep.st - st).abs() <= 1e-12 * st);
    }
}


