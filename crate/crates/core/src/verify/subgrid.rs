//! The time-halved subgrid, the restriction γ onto it, Galerkin
//! orthogonality and the saturation ratio.

use crate::adapt::solve_on;
use crate::assembly::{assemble_with, DiscreteSolution, Discretization, DofMap, FormParts, SparseSystem};
use crate::estimator::regime_and_weights;
use crate::fe::{PointSet, MAX_AXES};
use crate::mesh::{FacetKind, SpaceTimeMesh};
use crate::problem::{ExactSolution, ProblemSpec};
use crate::solver::solve_time_blocks;
use crate::{Error, Result};

/// A mesh together with its subgrid, every element split once in time.
#[derive(Debug, Clone)]
pub struct SubgridPair<'a> {
    pub coarse: &'a SpaceTimeMesh,
    pub fine: SpaceTimeMesh,
    /// coarse element of every subgrid element
    pub parent: Vec<usize>,
    /// (lower, upper) subgrid halves of every coarse element
    pub children: Vec<[usize; 2]>,
    /// subgrid facets created inside coarse elements
    pub new_facets: Vec<usize>,
    /// coarse facet containing each subgrid facet, `None` for new ones
    pub coarse_facet: Vec<Option<usize>>,
}

impl<'a> SubgridPair<'a> {
    pub fn new(coarse: &'a SpaceTimeMesh) -> Result<Self> {
        let fine = coarse.split_in_time()?;
        let mut node_elem = vec![usize::MAX; coarse.nodes.len()];
        for (k, e) in coarse.elements.iter().enumerate() {
            node_elem[e.node] = k;
        }
        let parent: Vec<usize> = fine.elements.iter().map(|e| node_elem[coarse.locate(&e.lo)]).collect();
        let mut children = vec![[usize::MAX; 2]; coarse.n_elements()];
        for (k, e) in fine.elements.iter().enumerate() {
            let p = parent[k];
            let slot = usize::from(e.lo[0] != coarse.elements[p].lo[0]);
            children[p][slot] = k;
        }
        if children.iter().flatten().any(|&c| c == usize::MAX) {
            return Err(Error::MeshMismatch("subgrid does not split every element in two".into()));
        }

        let mut new_facets = Vec::new();
        let mut coarse_facet = Vec::with_capacity(fine.n_facets());
        for (f, fc) in fine.facets.iter().enumerate() {
            let ps: Vec<usize> = fc.owners.iter().map(|o| parent[o.element]).collect();
            if ps.len() == 2 && ps[0] == ps[1] {
                debug_assert_eq!(fc.kind, FacetKind::R);
                new_facets.push(f);
                coarse_facet.push(None);
                continue;
            }
            let o = fc.owners[0];
            let ce = &coarse.elements[parent[o.element]];
            let dim = coarse.dim();
            let found = ce.face(fc.axis, o.side).iter().copied().find(|&c| {
                let cf = &coarse.facets[c];
                (0..dim).all(|a| cf.lo[a] <= fc.lo[a] && cf.hi[a] >= fc.hi[a])
            });
            match found {
                Some(c) => coarse_facet.push(Some(c)),
                None => return Err(Error::MeshMismatch(format!("subgrid facet {f} has no coarse facet"))),
            }
        }
        Ok(SubgridPair { coarse, fine, parent, children, new_facets, coarse_facet })
    }

    /// The linear map γ as sparse rows over the coarse dofs.
    pub fn restriction(&self, disc: &Discretization) -> Restriction {
        let cdm = DofMap::new(self.coarse, disc);
        let fdm = DofMap::new(&self.fine, disc);
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); fdm.n_dofs];
        let dim = self.coarse.dim();
        let to_ref = |g: &crate::fe::BoxGeom, p: &[f64; MAX_AXES]| -> Vec<f64> {
            (0..dim).map(|a| g.to_ref(a, p[a])).collect()
        };
        let mut fill = |row: usize, cols: std::ops::Range<usize>, vals: &[f64]| {
            rows[row] = cols.zip(vals).filter(|(_, v)| **v != 0.0).map(|(c, v)| (c, *v)).collect();
        };
        for (k, e) in self.fine.elements.iter().enumerate() {
            let pk = self.parent[k];
            let pg = &self.coarse.elements[pk].geom;
            for (i, row) in fdm.element_range(k).enumerate() {
                let p = node_point(&disc.element.node(i), &e.geom);
                let ev = disc.element.evaluate(&to_ref(pg, &p));
                fill(row, cdm.element_range(pk), &ev.values);
            }
        }
        for (f, fc) in self.fine.facets.iter().enumerate() {
            let basis = &disc.facet[fc.axis];
            for (i, row) in fdm.facet_range(f).enumerate() {
                let p = node_point(&basis.node(i), &fc.geom);
                match self.coarse_facet[f] {
                    // trace of the element polynomial on the new facets
                    None => {
                        let pk = self.parent[fc.owners[0].element];
                        let ev = disc.element.evaluate(&to_ref(&self.coarse.elements[pk].geom, &p));
                        fill(row, cdm.element_range(pk), &ev.values);
                    }
                    Some(c) => {
                        let ev = basis.evaluate(&to_ref(&self.coarse.facets[c].geom, &p));
                        fill(row, cdm.facet_range(c), &ev.values);
                    }
                }
            }
        }
        Restriction { n_coarse: cdm.n_dofs, rows, coarse: cdm, fine: fdm }
    }
}

fn node_point(r: &[f64; MAX_AXES], g: &crate::fe::BoxGeom) -> [f64; MAX_AXES] {
    let mut p = [0.0; MAX_AXES];
    for a in 0..g.dim {
        p[a] = g.from_ref(a, r[a]);
    }
    p
}

/// γ_ℏ as a sparse matrix, one row per subgrid dof.
#[derive(Debug, Clone)]
pub struct Restriction {
    pub n_coarse: usize,
    pub rows: Vec<Vec<(usize, f64)>>,
    pub coarse: DofMap,
    pub fine: DofMap,
}

impl Restriction {
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.rows.iter().map(|r| r.iter().map(|&(j, v)| v * x[j]).sum()).collect()
    }

    pub fn apply_transpose(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_coarse];
        for (r, &yi) in self.rows.iter().zip(y) {
            for &(j, v) in r {
                out[j] += v * yi;
            }
        }
        out
    }

    /// γ_ℏ of a coarse discrete state.
    pub fn restrict(&self, sol: &DiscreteSolution) -> Result<DiscreteSolution> {
        if sol.dofmap.n_dofs != self.n_coarse || sol.dofmap.elem_offset.len() != self.coarse.elem_offset.len() {
            return Err(Error::MeshMismatch(format!(
                "state has {} dofs, the coarse mesh {}",
                sol.dofmap.n_dofs, self.n_coarse
            )));
        }
        Ok(DiscreteSolution { dofmap: self.fine.clone(), values: self.apply(&sol.values) })
    }
}

/// Convenience wrapper around [`SubgridPair::restriction`].
pub fn subgrid_restrict(pair: &SubgridPair, disc: &Discretization, sol: &DiscreteSolution) -> Result<DiscreteSolution> {
    pair.restriction(disc).restrict(sol)
}

/// Coarse and subgrid solutions of one problem. The subgrid takes its
/// Dirichlet values from γ_ℏ u_h so that both discrete problems share g_D.
#[derive(Debug, Clone)]
pub struct SubgridSolve {
    pub coarse: DiscreteSolution,
    pub fine: DiscreteSolution,
    /// γ_ℏ u_h
    pub restricted: DiscreteSolution,
    /// a_ℏ without boundary rows replaced
    pub form: SparseSystem,
    /// coarse dofs that carry a test function (not Dirichlet)
    pub coarse_free: Vec<bool>,
    pub restriction: Restriction,
}

pub fn solve_pair(pair: &SubgridPair, spec: &ProblemSpec, disc: &Discretization) -> Result<SubgridSolve> {
    let (coarse, _) = solve_on(pair.coarse, spec, disc, true)?;
    let mut coarse_free = vec![true; coarse.dofmap.n_dofs];
    for &(i, _) in &coarse.dofmap.dirichlet {
        coarse_free[i] = false;
    }
    let restriction = pair.restriction(disc);
    let restricted = restriction.restrict(&coarse)?;
    let (form, fdm) = assemble_with(&pair.fine, spec, disc, FormParts::FULL, false);
    let mut sys = form.clone();
    for &(i, _) in &fdm.dirichlet {
        sys.set_identity_row(i, restricted.values[i]);
    }
    let (x, _) = solve_time_blocks(&sys, &fdm.time_blocks(&pair.fine))?;
    let fine = DiscreteSolution { dofmap: fdm, values: x };
    Ok(SubgridSolve { coarse, fine, restricted, form, coarse_free, restriction })
}

/// max over coarse test functions v_h of |a_ℏ(u − γ_ℏu_h, γ_ℏv_h)|.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Orthogonality {
    pub max_abs: f64,
    /// the same maximum of |a_ℏ(u, γ_ℏv_h)|
    pub scale: f64,
}

impl Orthogonality {
    pub fn relative(&self) -> f64 {
        if self.scale > 0.0 {
            self.max_abs / self.scale
        } else {
            self.max_abs
        }
    }
}

/// Orthogonality defect of an arbitrary subgrid state `u` against γ_ℏ u_h.
pub fn orthogonality_defect(s: &SubgridSolve, u: &[f64]) -> Orthogonality {
    let d: Vec<f64> = u.iter().zip(&s.restricted.values).map(|(a, b)| a - b).collect();
    let t = s.restriction.apply_transpose(&s.form.matvec(&d));
    let sc = s.restriction.apply_transpose(&s.form.matvec(u));
    let max_free = |v: &[f64]| {
        v.iter().zip(&s.coarse_free).filter(|(_, &f)| f).map(|(x, _)| x.abs()).fold(0.0, f64::max)
    };
    Orthogonality { max_abs: max_free(&t), scale: max_free(&sc) }
}

pub fn check_galerkin_orthogonality(spec: &ProblemSpec, mesh: &SpaceTimeMesh, disc: &Discretization) -> Result<Orthogonality> {
    let pair = SubgridPair::new(mesh)?;
    let s = solve_pair(&pair, spec, disc)?;
    Ok(orthogonality_defect(&s, &s.fine.values))
}

/// ρ̂ with its numerator and denominator (already square-rooted).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Saturation {
    pub numerator: f64,
    pub denominator: f64,
    /// `None` when the coarse time-derivative error vanishes
    pub rho: Option<f64>,
}

/// Below this the coarse solution is exact in time and ρ̂ is undefined.
pub const SATURATION_FLOOR: f64 = 1e-10;

fn time_derivative_error(
    mesh: &SpaceTimeMesh,
    disc: &Discretization,
    exact: &dyn ExactSolution,
    sol: &DiscreteSolution,
    k: usize,
) -> f64 {
    let e = &mesh.elements[k];
    let pts = PointSet::gauss(&e.geom, disc.n_estimator);
    let tab = disc.element.tabulate(&e.geom, &pts);
    let c = sol.element(k);
    (0..tab.nq).map(|q| tab.w[q] * (exact.gradient(&tab.x[q])[0] - tab.deriv(c, 0, q)).powi(2)).sum()
}

/// Both sums use the weights τ_ε of the coarse elements.
pub fn measure_saturation(spec: &ProblemSpec, mesh: &SpaceTimeMesh, disc: &Discretization) -> Result<Saturation> {
    let exact = spec.exact.as_ref().ok_or(Error::MissingExactSolution)?;
    let pair = SubgridPair::new(mesh)?;
    let s = solve_pair(&pair, spec, disc)?;
    let tau: Vec<f64> = mesh.elements.iter().map(|e| regime_and_weights(e, spec.eps).tau_eps).collect();
    let den: f64 = (0..mesh.n_elements())
        .map(|k| tau[k] * time_derivative_error(mesh, disc, &**exact, &s.coarse, k))
        .sum();
    let num: f64 = (0..pair.fine.n_elements())
        .map(|k| tau[pair.parent[k]] * time_derivative_error(&pair.fine, disc, &**exact, &s.fine, k))
        .sum();
    let (numerator, denominator) = (num.sqrt(), den.sqrt());
    let rho = (denominator > SATURATION_FLOOR).then(|| numerator / denominator);
    Ok(Saturation { numerator, denominator, rho })
}
