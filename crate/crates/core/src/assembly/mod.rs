//! Global HDG system: dof numbering, local tensors and scatter.

mod eval;
mod local;
mod sparse;

pub use eval::{facet_evaluate, field_evaluate, interpolate, project, FieldQuantity};
pub use local::{element_system, neumann_data, volume_matrix, facet_upwind, FacetUpwind, FormParts, LocalSystem};
pub use sparse::SparseSystem;

use rayon::prelude::*;

use crate::fe::{self, TensorBasis};
use crate::mesh::{BoundaryTag, FacetKind, SpaceTimeMesh, T_UNIT};
use crate::problem::ProblemSpec;

/// Bases, quadrature orders and penalty for a fixed (d, p_s).
#[derive(Debug, Clone)]
pub struct Discretization {
    pub d: usize,
    pub ps: usize,
    pub element: TensorBasis,
    /// facet bases by normal axis
    pub facet: Vec<TensorBasis>,
    pub n_assembly: usize,
    pub n_estimator: usize,
    /// interior penalty α = 8 p_s²
    pub alpha: f64,
}

impl Discretization {
    pub fn new(d: usize, ps: usize) -> Self {
        assert!(ps >= 1, "spatial degree must be at least 1");
        Discretization {
            d,
            ps,
            element: TensorBasis::element(d, ps),
            facet: (0..=d).map(|a| TensorBasis::facet(d, ps, a)).collect(),
            n_assembly: fe::assembly_points(ps),
            n_estimator: fe::estimator_points(ps),
            alpha: 8.0 * (ps * ps) as f64,
        }
    }

    pub fn element_dofs(&self) -> usize {
        self.element.len()
    }

    pub fn facet_dofs(&self, axis: usize) -> usize {
        self.facet[axis].len()
    }
}

/// Element dofs first (in mesh element order), then facet dofs (in facet order).
#[derive(Debug, Clone, PartialEq)]
pub struct DofMap {
    pub n_element_dofs: usize,
    pub elem_offset: Vec<usize>,
    pub facet_offset: Vec<usize>,
    pub facet_ndofs: Vec<usize>,
    pub n_dofs: usize,
    /// constrained facet dofs and their prescribed values
    pub dirichlet: Vec<(usize, f64)>,
}

impl DofMap {
    pub fn new(mesh: &SpaceTimeMesh, disc: &Discretization) -> Self {
        let nbe = disc.element_dofs();
        let elem_offset: Vec<usize> = (0..mesh.n_elements()).map(|k| k * nbe).collect();
        let mut off = mesh.n_elements() * nbe;
        let mut facet_offset = Vec::with_capacity(mesh.n_facets());
        let mut facet_ndofs = Vec::with_capacity(mesh.n_facets());
        for f in &mesh.facets {
            facet_offset.push(off);
            let n = disc.facet_dofs(f.axis);
            facet_ndofs.push(n);
            off += n;
        }
        DofMap { n_element_dofs: nbe, elem_offset, facet_offset, facet_ndofs, n_dofs: off, dirichlet: Vec::new() }
    }

    pub fn element_range(&self, k: usize) -> std::ops::Range<usize> {
        self.elem_offset[k]..self.elem_offset[k] + self.n_element_dofs
    }

    pub fn facet_range(&self, f: usize) -> std::ops::Range<usize> {
        self.facet_offset[f]..self.facet_offset[f] + self.facet_ndofs[f]
    }

    pub fn n_element_unknowns(&self) -> usize {
        self.elem_offset.len() * self.n_element_dofs
    }

    /// Time-block index of every dof. Blocks are separated by time levels no
    /// element straddles; a facet on such a level belongs to the block above.
    pub fn time_blocks(&self, mesh: &SpaceTimeMesh) -> Vec<usize> {
        let cuts = time_cuts(mesh);
        let block_of = |t: i64| cuts.partition_point(|&c| c <= t).saturating_sub(1).min(cuts.len() - 2);
        let mut blocks = vec![0usize; self.n_dofs];
        for (k, e) in mesh.elements.iter().enumerate() {
            let b = block_of(e.lo[0]);
            for i in self.element_range(k) {
                blocks[i] = b;
            }
        }
        for (f, fc) in mesh.facets.iter().enumerate() {
            let b = block_of(fc.lo[0]);
            for i in self.facet_range(f) {
                blocks[i] = b;
            }
        }
        blocks
    }
}

/// Lattice times, including 0 and T, that no element straddles.
pub fn time_cuts(mesh: &SpaceTimeMesh) -> Vec<i64> {
    let mut times: Vec<i64> = mesh.elements.iter().flat_map(|e| [e.lo[0], e.hi[0]]).collect();
    times.sort_unstable();
    times.dedup();
    // covered[i]: interval (times[i], times[i+1]) lies inside some element,
    // so the level times[i] is straddled if an element covers both sides
    let mut delta = vec![0i64; times.len() + 1];
    for e in &mesh.elements {
        let a = times.binary_search(&e.lo[0]).unwrap();
        let b = times.binary_search(&e.hi[0]).unwrap();
        // interior levels a+1..b are straddled
        if b > a + 1 {
            delta[a + 1] += 1;
            delta[b] -= 1;
        }
    }
    let mut cuts = Vec::new();
    let mut run = 0;
    for (i, &t) in times.iter().enumerate() {
        run += delta[i];
        if run == 0 {
            cuts.push(t);
        }
    }
    debug_assert!(cuts.first() == Some(&0));
    debug_assert!(cuts.last() == Some(&(mesh.n_slabs as i64 * T_UNIT)));
    cuts
}

/// Coefficient vector over a [`DofMap`].
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteSolution {
    pub dofmap: DofMap,
    pub values: Vec<f64>,
}

impl DiscreteSolution {
    pub fn zeros(dofmap: DofMap) -> Self {
        let n = dofmap.n_dofs;
        DiscreteSolution { dofmap, values: vec![0.0; n] }
    }

    pub fn element(&self, k: usize) -> &[f64] {
        &self.values[self.dofmap.element_range(k)]
    }

    pub fn facet(&self, f: usize) -> &[f64] {
        &self.values[self.dofmap.facet_range(f)]
    }
}

/// Per-facet advection data shared by assembly and estimation.
pub fn facet_upwind_all(mesh: &SpaceTimeMesh, spec: &ProblemSpec, disc: &Discretization) -> Vec<FacetUpwind> {
    mesh.facets.par_iter().map(|f| facet_upwind(f, spec, disc.n_assembly)).collect()
}

/// Assemble the full system with the given form parts. Dirichlet rows are
/// replaced by identity rows carrying the L² projection of g_D when
/// `apply_dirichlet` is set.
pub fn assemble_with(
    mesh: &SpaceTimeMesh,
    spec: &ProblemSpec,
    disc: &Discretization,
    parts: FormParts,
    apply_dirichlet: bool,
) -> (SparseSystem, DofMap) {
    let mut dofmap = DofMap::new(mesh, disc);
    let upwind = facet_upwind_all(mesh, spec, disc);
    let mut sys = pattern(mesh, &dofmap);
    // local tensors in parallel, scattered in element order so the sums
    // are independent of the thread count
    const CHUNK: usize = 512;
    for start in (0..mesh.n_elements()).step_by(CHUNK) {
        let end = (start + CHUNK).min(mesh.n_elements());
        let locals: Vec<LocalSystem> = (start..end)
            .into_par_iter()
            .map(|k| element_system(mesh, spec, disc, &dofmap, &upwind, k, parts))
            .collect();
        for l in &locals {
            for (a, &ga) in l.dofs.iter().enumerate() {
                sys.rhs[ga] += l.rhs[a];
                for (b, &gb) in l.dofs.iter().enumerate() {
                    let v = l.mat[a * l.n + b];
                    if v != 0.0 {
                        sys.add(ga, gb, v);
                    }
                }
            }
        }
    }

    let dirichlet: Vec<(usize, Vec<f64>)> = mesh
        .facets
        .par_iter()
        .enumerate()
        .filter(|(_, f)| f.tag == BoundaryTag::Dirichlet)
        .map(|(i, f)| {
            let b = &disc.facet[f.axis];
            (i, fe::l2_project(b, &f.geom, disc.n_estimator, |p| (spec.dirichlet)(p)))
        })
        .collect();
    for (f, vals) in dirichlet {
        for (i, v) in dofmap.facet_range(f).zip(vals) {
            dofmap.dirichlet.push((i, v));
        }
    }
    if apply_dirichlet {
        for &(i, v) in &dofmap.dirichlet {
            sys.set_identity_row(i, v);
        }
    }
    (sys, dofmap)
}

/// Dofs coupled through one element: its own and those of every facet piece of ∂K.
fn element_dofs(mesh: &SpaceTimeMesh, dofmap: &DofMap, k: usize) -> Vec<usize> {
    let mut d: Vec<usize> = dofmap.element_range(k).collect();
    for face in &mesh.elements[k].faces {
        for &f in face {
            d.extend(dofmap.facet_range(f));
        }
    }
    d
}

/// Sparsity of the HDG coupling: element rows see every dof of the
/// element's clique, facet rows see their own facet and the owners.
fn pattern(mesh: &SpaceTimeMesh, dofmap: &DofMap) -> SparseSystem {
    let n = dofmap.n_dofs;
    let mut row_ptr = Vec::with_capacity(n + 1);
    row_ptr.push(0);
    let mut col_idx = Vec::new();
    for k in 0..mesh.n_elements() {
        let mut row = element_dofs(mesh, dofmap, k);
        row.sort_unstable();
        for _ in dofmap.element_range(k) {
            col_idx.extend_from_slice(&row);
            row_ptr.push(col_idx.len());
        }
    }
    for (f, fc) in mesh.facets.iter().enumerate() {
        let mut row: Vec<usize> = dofmap.facet_range(f).collect();
        for o in &fc.owners {
            row.extend(dofmap.element_range(o.element));
        }
        row.sort_unstable();
        for _ in dofmap.facet_range(f) {
            col_idx.extend_from_slice(&row);
            row_ptr.push(col_idx.len());
        }
    }
    SparseSystem::from_pattern(n, row_ptr, col_idx, vec![0.0; n])
}

/// The HDG system a_h(u_h, v_h) = (f, v_h) + ⟨g, μ_h⟩ with Dirichlet rows replaced.
pub fn assemble(mesh: &SpaceTimeMesh, spec: &ProblemSpec, disc: &Discretization) -> (SparseSystem, DofMap) {
    assemble_with(mesh, spec, disc, FormParts::FULL, true)
}

/// Number of Q- and R-facets, for reporting.
pub fn facet_counts(mesh: &SpaceTimeMesh) -> (usize, usize) {
    let q = mesh.facets.iter().filter(|f| f.kind == FacetKind::Q).count();
    (q, mesh.n_facets() - q)
}
