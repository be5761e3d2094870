//! Space-time box meshes with slabs, hanging facets and Q/R classification.
//!
//! Geometry lives on an integer lattice so that point location and facet
//! matching are exact: one slab spans [`T_UNIT`] lattice units in time, one
//! initial cell spans [`X_UNIT`] units per spatial axis. Elements are the
//! leaves of a refinement forest rooted at the initial tensor mesh.

mod build;
mod refine;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::fe::{BoxGeom, MAX_AXES};
use crate::{Error, Result};

pub use refine::MAX_LEVEL;

pub const T_UNIT: i64 = 1 << 40;
pub const X_UNIT: i64 = 1 << 30;

/// How many temporal children a refinement creates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RefinementPolicy {
    /// δt and h are halved together (δt ∝ h).
    Proportional,
    /// δt is quartered while h is halved (δt ∝ h²).
    Quadratic,
}

impl RefinementPolicy {
    pub fn time_children(self) -> usize {
        match self {
            RefinementPolicy::Proportional => 2,
            RefinementPolicy::Quadratic => 4,
        }
    }
}

/// The space-time box I × Ω with I = (0, T].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub d: usize,
    pub t_end: f64,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    /// `lateral_neumann[i][side]`: the lateral face x_i = lo (side 0) or hi
    /// (side 1) belongs to Γ_N. Everything else on the lateral boundary is Γ_D.
    pub lateral_neumann: Vec<[bool; 2]>,
}

impl Domain {
    /// Dirichlet on the whole lateral boundary.
    pub fn new(t_end: f64, lo: &[f64], hi: &[f64]) -> Self {
        Domain {
            d: lo.len(),
            t_end,
            lo: lo.to_vec(),
            hi: hi.to_vec(),
            lateral_neumann: vec![[false; 2]; lo.len()],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=2).contains(&self.d) || self.lo.len() != self.d || self.hi.len() != self.d {
            return Err(Error::InvalidDomain(format!("spatial dimension {} not supported", self.d)));
        }
        if self.lateral_neumann.len() != self.d {
            return Err(Error::InvalidDomain("boundary flags do not match dimension".into()));
        }
        if !(self.t_end > 0.0) || !self.t_end.is_finite() {
            return Err(Error::InvalidDomain(format!("final time {} must be positive", self.t_end)));
        }
        for i in 0..self.d {
            if !(self.hi[i] > self.lo[i]) || !self.hi[i].is_finite() || !self.lo[i].is_finite() {
                return Err(Error::InvalidDomain(format!(
                    "spatial extent [{}, {}] on axis {} is degenerate",
                    self.lo[i],
                    self.hi[i],
                    i + 1
                )));
            }
        }
        Ok(())
    }

    pub fn volume(&self) -> f64 {
        self.t_end * (0..self.d).map(|i| self.hi[i] - self.lo[i]).product::<f64>()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FacetKind {
    /// n_t = 0
    Q,
    /// n̄ = 0
    R,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BoundaryTag {
    Interior,
    Dirichlet,
    NeumannLateral,
    Omega0,
    OmegaT,
}

impl BoundaryTag {
    /// Part of ∂𝓔_N (lateral Neumann, bottom and top).
    pub fn is_neumann(self) -> bool {
        matches!(self, BoundaryTag::NeumannLateral | BoundaryTag::Omega0 | BoundaryTag::OmegaT)
    }
}

/// One side of a facet: the element and which of its faces along the facet
/// normal axis touches the facet (0 = low face, outward normal −e_a;
/// 1 = high face, outward normal +e_a).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FacetSide {
    pub element: usize,
    pub side: usize,
}

impl FacetSide {
    pub fn normal_sign(&self) -> f64 {
        if self.side == 1 {
            1.0
        } else {
            -1.0
        }
    }
}

#[derive(Debug, Clone)]
pub struct Facet {
    pub id: u64,
    pub kind: FacetKind,
    /// normal axis (0 for R-facets)
    pub axis: usize,
    pub lo: [i64; MAX_AXES],
    pub hi: [i64; MAX_AXES],
    pub geom: BoxGeom,
    pub tag: BoundaryTag,
    /// One owner for boundary facets. Two for interior facets, ordered
    /// (low-side element, high-side element) along the normal axis.
    pub owners: Vec<FacetSide>,
    /// Index into `owners` of the element whose face equals this facet.
    pub fine: usize,
    /// The two owners have faces of different size.
    pub hanging: bool,
    /// Spatial size of the fine-side element.
    pub h: f64,
}

impl Facet {
    pub fn is_boundary(&self) -> bool {
        self.tag != BoundaryTag::Interior
    }

    pub fn is_hanging(&self) -> bool {
        self.hanging
    }

    /// Index into `owners` of the coarse side of a hanging facet.
    pub fn coarse_side(&self) -> Option<usize> {
        if self.hanging {
            Some(1 - self.fine)
        } else {
            None
        }
    }

    /// Outward unit normal seen from `owners[k]`.
    pub fn normal(&self, k: usize) -> [f64; MAX_AXES] {
        let mut n = [0.0; MAX_AXES];
        n[self.axis] = self.owners[k].normal_sign();
        n
    }
}

#[derive(Debug, Clone)]
pub struct Element {
    pub id: u64,
    pub level: u8,
    pub lo: [i64; MAX_AXES],
    pub hi: [i64; MAX_AXES],
    pub slab: usize,
    pub geom: BoxGeom,
    /// spatial edge length h_K
    pub h: f64,
    /// own time step δt_K
    pub dt: f64,
    /// slab width Δt_K
    pub slab_dt: f64,
    /// facet pieces per face, indexed `2 * axis + side`
    pub faces: Vec<Vec<usize>>,
    pub(crate) node: usize,
}

impl Element {
    pub fn face(&self, axis: usize, side: usize) -> &[usize] {
        &self.faces[2 * axis + side]
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Node {
    pub id: u64,
    pub level: u8,
    pub lo: [i64; MAX_AXES],
    pub hi: [i64; MAX_AXES],
    pub slab: usize,
    pub root: usize,
    /// children and the per-axis split counts
    pub children: Option<(Vec<usize>, [usize; MAX_AXES])>,
}

/// Space-time mesh: leaves of a refinement forest plus the facet list.
#[derive(Debug, Clone)]
pub struct SpaceTimeMesh {
    pub domain: Domain,
    pub n_slabs: usize,
    pub n_cells: usize,
    pub policy: RefinementPolicy,
    pub(crate) nodes: Vec<Node>,
    pub(crate) roots: Vec<usize>,
    pub elements: Vec<Element>,
    pub facets: Vec<Facet>,
    id_index: HashMap<u64, usize>,
}

impl SpaceTimeMesh {
    pub fn d(&self) -> usize {
        self.domain.d
    }

    /// Number of space-time axes.
    pub fn dim(&self) -> usize {
        self.domain.d + 1
    }

    pub fn n_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn n_facets(&self) -> usize {
        self.facets.len()
    }

    /// Slab boundaries t_0 < … < t_N.
    pub fn slab_times(&self) -> Vec<f64> {
        (0..=self.n_slabs).map(|n| self.time_of(n as i64 * T_UNIT)).collect()
    }

    pub fn time_of(&self, l: i64) -> f64 {
        self.domain.t_end * l as f64 / (self.n_slabs as f64 * T_UNIT as f64)
    }

    pub fn space_of(&self, axis: usize, l: i64) -> f64 {
        let i = axis - 1;
        let (a, b) = (self.domain.lo[i], self.domain.hi[i]);
        a + (b - a) * l as f64 / (self.n_cells as f64 * X_UNIT as f64)
    }

    pub fn coord_of(&self, axis: usize, l: i64) -> f64 {
        if axis == 0 {
            self.time_of(l)
        } else {
            self.space_of(axis, l)
        }
    }

    pub(crate) fn lattice_max(&self, axis: usize) -> i64 {
        if axis == 0 {
            self.n_slabs as i64 * T_UNIT
        } else {
            self.n_cells as i64 * X_UNIT
        }
    }

    pub(crate) fn geom_of(&self, lo: &[i64; MAX_AXES], hi: &[i64; MAX_AXES]) -> BoxGeom {
        let dim = self.dim();
        let l: Vec<f64> = (0..dim).map(|a| self.coord_of(a, lo[a])).collect();
        let h: Vec<f64> = (0..dim).map(|a| self.coord_of(a, hi[a])).collect();
        BoxGeom::new(&l, &h)
    }

    pub fn element_index(&self, id: u64) -> Result<usize> {
        self.id_index.get(&id).copied().ok_or(Error::UnknownElement(id))
    }

    pub fn element_by_id(&self, id: u64) -> Result<&Element> {
        Ok(&self.elements[self.element_index(id)?])
    }

    pub fn facet_index(&self, id: u64) -> Result<usize> {
        let i = id as usize;
        if i < self.facets.len() {
            Ok(i)
        } else {
            Err(Error::UnknownFacet(id))
        }
    }

    /// Indices of elements sharing a facet with element `k` (ω_K without K).
    pub fn face_neighbors(&self, k: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self.elements[k]
            .faces
            .iter()
            .flatten()
            .flat_map(|&f| self.facets[f].owners.iter().map(|o| o.element))
            .filter(|&e| e != k)
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Indices of elements whose closure touches the closure of element `k` (σ_K without K).
    pub fn vertex_neighbors(&self, k: usize) -> Vec<usize> {
        let target = &self.elements[k];
        let dim = self.dim();
        let touches = |e: &Element| (0..dim).all(|a| e.lo[a] <= target.hi[a] && e.hi[a] >= target.lo[a]);
        let mut seen = vec![k];
        let mut frontier = vec![k];
        // corner neighbours are at most `dim` face hops away
        for _ in 0..dim {
            let mut next = Vec::new();
            for &e in &frontier {
                for n in self.face_neighbors(e) {
                    if !seen.contains(&n) && touches(&self.elements[n]) {
                        seen.push(n);
                        next.push(n);
                    }
                }
            }
            frontier = next;
        }
        let mut out: Vec<usize> = seen.into_iter().filter(|&e| e != k).collect();
        out.sort_unstable();
        out
    }

    /// ω_K by element id, returned as ids.
    pub fn omega_k(&self, id: u64) -> Result<Vec<u64>> {
        let k = self.element_index(id)?;
        Ok(self.face_neighbors(k).into_iter().map(|e| self.elements[e].id).collect())
    }

    /// σ_K by element id, returned as ids.
    pub fn sigma_k(&self, id: u64) -> Result<Vec<u64>> {
        let k = self.element_index(id)?;
        Ok(self.vertex_neighbors(k).into_iter().map(|e| self.elements[e].id).collect())
    }

    /// ω_F: the elements owning facet `id`.
    pub fn omega_f(&self, id: u64) -> Result<Vec<u64>> {
        let f = self.facet_index(id)?;
        let mut v: Vec<u64> = self.facets[f].owners.iter().map(|o| self.elements[o.element].id).collect();
        v.sort_unstable();
        Ok(v)
    }

    /// max_K Δt_K / δt_K.
    pub fn max_time_step_ratio(&self) -> f64 {
        self.elements.iter().map(|e| e.slab_dt / e.dt).fold(1.0, f64::max)
    }

    pub fn max_level(&self) -> u8 {
        self.elements.iter().map(|e| e.level).max().unwrap_or(0)
    }

    /// Check the structural invariants. Returns a description of the first
    /// violation found.
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        let vol: f64 = self.elements.iter().map(|e| e.geom.measure()).sum();
        let expect = self.domain.volume();
        if (vol - expect).abs() > 1e-12 * expect {
            return Err(format!("element measures sum to {vol}, domain has {expect}"));
        }
        let dim = self.dim();
        for (k, e) in self.elements.iter().enumerate() {
            let s0 = e.slab as i64 * T_UNIT;
            if e.lo[0] < s0 || e.hi[0] > s0 + T_UNIT {
                return Err(format!("element {k} crosses a slab boundary"));
            }
            if !(e.h > 0.0 && e.dt > 0.0 && e.dt <= e.slab_dt * (1.0 + 1e-14)) {
                return Err(format!("element {k} has invalid sizes"));
            }
            for a in 0..dim {
                for side in 0..2 {
                    let face = e.geom.face(a, side);
                    let m: f64 = e.face(a, side).iter().map(|&f| self.facets[f].geom.measure()).sum();
                    let fm = face.measure();
                    if (m - fm).abs() > 1e-12 * fm {
                        return Err(format!("face ({a},{side}) of element {k} is not tiled by its facets"));
                    }
                    for &f in e.face(a, side) {
                        let fc = &self.facets[f];
                        if fc.axis != a || !fc.owners.iter().any(|o| o.element == k && o.side == side) {
                            return Err(format!("facet {f} inconsistent with element {k}"));
                        }
                    }
                }
            }
        }
        for (i, f) in self.facets.iter().enumerate() {
            let n_own = f.owners.len();
            match f.tag {
                BoundaryTag::Interior => {
                    if n_own != 2 || f.owners[0].element == f.owners[1].element {
                        return Err(format!("interior facet {i} has {n_own} owners"));
                    }
                    let (l0, l1) = (self.elements[f.owners[0].element].level, self.elements[f.owners[1].element].level);
                    if (l0 as i32 - l1 as i32).abs() > 1 {
                        return Err(format!("levels {l0} and {l1} meet across facet {i}"));
                    }
                }
                _ => {
                    if n_own != 1 {
                        return Err(format!("boundary facet {i} has {n_own} owners"));
                    }
                }
            }
            if (f.kind == FacetKind::Q) != (f.axis != 0) {
                return Err(format!("facet {i} kind does not match its normal"));
            }
        }
        Ok(())
    }
}
