//! Initial tensor mesh and reconstruction of elements/facets from the forest.

use std::collections::HashMap;

use super::{
    BoundaryTag, Domain, Element, Facet, FacetKind, FacetSide, Node, RefinementPolicy, SpaceTimeMesh, T_UNIT,
    X_UNIT,
};
use crate::fe::MAX_AXES;
use crate::{Error, Result};

/// Bits reserved for the root index in element ids.
const ROOT_BITS: u32 = 18;
const PATH_SHIFT: u32 = 40;
const DEPTH_SHIFT: u32 = 58;

pub(crate) fn root_id(root: usize) -> u64 {
    (root as u64) << PATH_SHIFT
}

/// Id of child `c` of the node with id `parent` at depth `level`.
pub(crate) fn child_id(parent: u64, level: u8, c: usize) -> u64 {
    debug_assert!(c < 16);
    let path_mask = (1u64 << PATH_SHIFT) - 1;
    let root = (parent >> PATH_SHIFT) & ((1u64 << ROOT_BITS) - 1);
    let path = (parent & path_mask) | ((c as u64) << (4 * level as u32));
    ((level as u64 + 1) << DEPTH_SHIFT) | (root << PATH_SHIFT) | path
}

impl SpaceTimeMesh {
    /// Uniform tensor mesh with `n_slabs` time slabs and `n_cells` cells per
    /// spatial axis.
    pub fn build_initial(domain: Domain, n_slabs: usize, n_cells: usize, policy: RefinementPolicy) -> Result<Self> {
        domain.validate()?;
        if n_slabs == 0 || n_cells == 0 {
            return Err(Error::InvalidDomain("need at least one slab and one cell per axis".into()));
        }
        let d = domain.d;
        let n_roots = n_slabs * n_cells.pow(d as u32);
        if n_roots >= 1 << ROOT_BITS {
            return Err(Error::InvalidDomain(format!("{n_roots} initial elements exceed the id space")));
        }
        let mut nodes = Vec::with_capacity(n_roots);
        for r in 0..n_roots {
            let mut rem = r;
            let mut lo = [0i64; MAX_AXES];
            let mut hi = [0i64; MAX_AXES];
            for a in 1..=d {
                let j = (rem % n_cells) as i64;
                rem /= n_cells;
                lo[a] = j * X_UNIT;
                hi[a] = (j + 1) * X_UNIT;
            }
            let slab = rem;
            lo[0] = slab as i64 * T_UNIT;
            hi[0] = lo[0] + T_UNIT;
            nodes.push(Node { id: root_id(r), level: 0, lo, hi, slab, root: r, children: None });
        }
        let roots = (0..n_roots).collect();
        Self::from_forest(domain, n_slabs, n_cells, policy, nodes, roots)
    }

    pub(crate) fn from_forest(
        domain: Domain,
        n_slabs: usize,
        n_cells: usize,
        policy: RefinementPolicy,
        nodes: Vec<Node>,
        roots: Vec<usize>,
    ) -> Result<Self> {
        let mut mesh = SpaceTimeMesh {
            domain,
            n_slabs,
            n_cells,
            policy,
            nodes,
            roots,
            elements: Vec::new(),
            facets: Vec::new(),
            id_index: HashMap::new(),
        };
        mesh.rebuild();
        Ok(mesh)
    }

    fn rebuild(&mut self) {
        let dim = self.dim();
        let mut leaves: Vec<usize> = Vec::new();
        let mut stack: Vec<usize> = self.roots.iter().rev().copied().collect();
        while let Some(n) = stack.pop() {
            match &self.nodes[n].children {
                Some((ch, _)) => stack.extend(ch.iter().rev()),
                None => leaves.push(n),
            }
        }
        // canonical order: lower corner, time first, then the highest spatial axis
        leaves.sort_by(|&a, &b| {
            let (na, nb) = (&self.nodes[a], &self.nodes[b]);
            let ka: Vec<i64> = std::iter::once(na.lo[0]).chain((1..dim).rev().map(|x| na.lo[x])).collect();
            let kb: Vec<i64> = std::iter::once(nb.lo[0]).chain((1..dim).rev().map(|x| nb.lo[x])).collect();
            ka.cmp(&kb)
        });
        let slab_dt = self.domain.t_end / self.n_slabs as f64;
        let mut elements = Vec::with_capacity(leaves.len());
        for &n in &leaves {
            let node = &self.nodes[n];
            let geom = self.geom_of(&node.lo, &node.hi);
            let h = (1..dim).map(|a| geom.extent(a)).fold(0.0, f64::max);
            elements.push(Element {
                id: node.id,
                level: node.level,
                lo: node.lo,
                hi: node.hi,
                slab: node.slab,
                geom,
                h,
                dt: geom.extent(0),
                slab_dt,
                faces: vec![Vec::new(); 2 * dim],
                node: n,
            });
        }
        let mut node_elem = vec![usize::MAX; self.nodes.len()];
        for (k, &n) in leaves.iter().enumerate() {
            node_elem[n] = k;
        }
        self.id_index = elements.iter().enumerate().map(|(k, e)| (e.id, k)).collect();
        self.elements = elements;

        let mut facets: Vec<Facet> = Vec::new();
        for k in 0..self.elements.len() {
            for a in 0..dim {
                for side in 0..2 {
                    if let Some(f) = self.make_facet(k, a, side, &node_elem, facets.len()) {
                        facets.push(f);
                    }
                }
            }
        }
        for (i, f) in facets.iter().enumerate() {
            for o in &f.owners {
                self.elements[o.element].faces[2 * f.axis + o.side].push(i);
            }
        }
        self.facets = facets;
    }

    /// Facet on face (`a`, `side`) of element `k`, if this element is the
    /// one responsible for creating it.
    fn make_facet(&self, k: usize, a: usize, side: usize, node_elem: &[usize], id: usize) -> Option<Facet> {
        let dim = self.dim();
        let e = &self.elements[k];
        let plane = if side == 0 { e.lo[a] } else { e.hi[a] };
        let mut lo = e.lo;
        let mut hi = e.hi;
        lo[a] = plane;
        hi[a] = plane;
        let kind = if a == 0 { FacetKind::R } else { FacetKind::Q };
        let geom = self.geom_of(&lo, &hi);
        let on_boundary = plane == 0 || plane == self.lattice_max(a);
        if on_boundary {
            let tag = if a == 0 {
                if side == 0 {
                    BoundaryTag::Omega0
                } else {
                    BoundaryTag::OmegaT
                }
            } else if self.domain.lateral_neumann[a - 1][side] {
                BoundaryTag::NeumannLateral
            } else {
                BoundaryTag::Dirichlet
            };
            return Some(Facet {
                id: id as u64,
                kind,
                axis: a,
                lo,
                hi,
                geom,
                tag,
                owners: vec![FacetSide { element: k, side }],
                fine: 0,
                hanging: false,
                h: e.h,
            });
        }
        let mut probe = [0i64; MAX_AXES];
        for b in 0..dim {
            probe[b] = (e.lo[b] + e.hi[b]) / 2;
        }
        probe[a] = if side == 0 { plane - 1 } else { plane };
        let nb_node = self.locate(&probe);
        let nbk = node_elem[nb_node];
        debug_assert!(nbk != usize::MAX);
        let nb = &self.elements[nbk];
        let others = (0..dim).filter(|&b| b != a);
        let equal = others.clone().all(|b| nb.lo[b] == e.lo[b] && nb.hi[b] == e.hi[b]);
        let contains = others.clone().all(|b| nb.lo[b] <= e.lo[b] && nb.hi[b] >= e.hi[b]);
        let (hanging, create) = if equal {
            (false, side == 1)
        } else if contains {
            (true, true)
        } else {
            debug_assert!(others.clone().all(|b| nb.lo[b] >= e.lo[b] && nb.hi[b] <= e.hi[b]));
            (false, false)
        };
        if !create {
            return None;
        }
        let me = FacetSide { element: k, side };
        let them = FacetSide { element: nbk, side: 1 - side };
        let (owners, fine) = if side == 1 { (vec![me, them], 0) } else { (vec![them, me], 1) };
        Some(Facet {
            id: id as u64,
            kind,
            axis: a,
            lo,
            hi,
            geom,
            tag: BoundaryTag::Interior,
            owners,
            fine,
            hanging,
            h: e.h.min(nb.h),
        })
    }

    /// Leaf node containing lattice point `p` (boxes are half-open).
    pub(crate) fn locate(&self, p: &[i64; MAX_AXES]) -> usize {
        let d = self.d();
        let mut r = 0usize;
        let mut stride = 1usize;
        for a in 1..=d {
            let j = ((p[a] / X_UNIT) as usize).min(self.n_cells - 1);
            r += j * stride;
            stride *= self.n_cells;
        }
        let slab = ((p[0] / T_UNIT) as usize).min(self.n_slabs - 1);
        r += slab * stride;
        let mut n = self.roots[r];
        while let Some((ch, split)) = &self.nodes[n].children {
            let node = &self.nodes[n];
            let mut c = 0usize;
            let mut st = 1usize;
            for a in 0..=d {
                let k = split[a] as i64;
                let ext = node.hi[a] - node.lo[a];
                let j = (((p[a] - node.lo[a]) * k) / ext).clamp(0, k - 1);
                c += j as usize * st;
                st *= split[a];
            }
            n = ch[c];
        }
        n
    }
}
