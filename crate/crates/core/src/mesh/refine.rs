//! Refinement with 1-irregularity closure, sibling-group coarsening and the
//! time-only split used for subgrids.

use log::{debug, info};

use super::build::child_id;
use super::{Node, SpaceTimeMesh};
use crate::fe::MAX_AXES;
use crate::{Error, Result};

/// Deepest refinement level representable in element ids.
pub const MAX_LEVEL: u8 = 10;

impl SpaceTimeMesh {
    /// Refine the elements in `refine_ids` (plus closure) and coarsen full
    /// sibling groups contained in `coarsen_ids`.
    pub fn refine_and_coarsen(&self, refine_ids: &[u64], coarsen_ids: &[u64]) -> Result<SpaceTimeMesh> {
        let n = self.elements.len();
        let mut refine = vec![false; n];
        for &id in refine_ids {
            refine[self.element_index(id)?] = true;
        }
        let mut coarsen = vec![false; n];
        for &id in coarsen_ids {
            let k = self.element_index(id)?;
            if refine[k] {
                return Err(Error::InvalidArgument(format!("element {id} marked for refinement and coarsening")));
            }
            if self.elements[k].level == 0 {
                debug!("ignoring coarsen request on level-0 element {id}");
                continue;
            }
            coarsen[k] = true;
        }

        self.close_refinement(&mut refine);
        if let Some(k) = (0..n).find(|&k| refine[k] && self.elements[k].level >= MAX_LEVEL) {
            let _ = k;
            return Err(Error::DepthLimit(MAX_LEVEL));
        }
        let new_level: Vec<u8> = (0..n).map(|k| self.elements[k].level + refine[k] as u8).collect();

        // parents whose children are all leaves, all marked, none refined,
        // and whose merge keeps every neighbour within one level
        let mut merge = vec![false; self.nodes.len()];
        let mut n_merged = 0;
        for (p, node) in self.nodes.iter().enumerate() {
            let Some((ch, _)) = &node.children else { continue };
            let ks: Option<Vec<usize>> = ch
                .iter()
                .map(|&c| self.id_index.get(&self.nodes[c].id).copied())
                .collect();
            let Some(ks) = ks else { continue };
            if !ks.iter().all(|&k| coarsen[k] && !refine[k]) {
                continue;
            }
            let ok = ks.iter().all(|&k| {
                self.face_neighbors(k)
                    .into_iter()
                    .filter(|m| !ks.contains(m))
                    .all(|m| new_level[m] <= node.level + 1)
            });
            if ok {
                merge[p] = true;
                n_merged += 1;
            }
        }

        let n_refined = refine.iter().filter(|&&r| r).count();
        info!("refining {n_refined} elements, merging {n_merged} sibling groups");
        let kt = self.policy.time_children();
        let mut split = [2usize; MAX_AXES];
        split[0] = kt;
        let refine_nodes: Vec<bool> = {
            let mut v = vec![false; self.nodes.len()];
            for k in 0..n {
                if refine[k] {
                    v[self.elements[k].node] = true;
                }
            }
            v
        };
        self.rebuild_forest(|node_idx| {
            if refine_nodes[node_idx] {
                Action::Split(split)
            } else if merge[node_idx] {
                Action::Merge
            } else {
                Action::Keep
            }
        })
    }

    /// Extend `refine` until no element would end up more than one level
    /// coarser than a face neighbour.
    pub(crate) fn close_refinement(&self, refine: &mut [bool]) {
        let mut work: Vec<usize> = (0..refine.len()).filter(|&k| refine[k]).collect();
        while let Some(k) = work.pop() {
            let lk = self.elements[k].level;
            for m in self.face_neighbors(k) {
                if !refine[m] && self.elements[m].level < lk {
                    refine[m] = true;
                    work.push(m);
                }
            }
        }
    }

    /// Split every element once in time (halving δt), keeping spatial footprints.
    pub fn split_in_time(&self) -> Result<SpaceTimeMesh> {
        if self.max_level() >= MAX_LEVEL {
            return Err(Error::DepthLimit(MAX_LEVEL));
        }
        let leaves: Vec<bool> = {
            let mut v = vec![false; self.nodes.len()];
            for e in &self.elements {
                v[e.node] = true;
            }
            v
        };
        let mut split = [1usize; MAX_AXES];
        split[0] = 2;
        self.rebuild_forest(|n| if leaves[n] { Action::Split(split) } else { Action::Keep })
    }

    /// Copy the reachable forest applying `action` to each node.
    fn rebuild_forest<F>(&self, action: F) -> Result<SpaceTimeMesh>
    where
        F: Fn(usize) -> Action,
    {
        let dim = self.dim();
        let mut nodes: Vec<Node> = Vec::with_capacity(self.nodes.len());
        let mut roots = Vec::with_capacity(self.roots.len());
        // (old index, new index)
        let mut stack: Vec<(usize, usize)> = Vec::new();
        for &r in &self.roots {
            let mut nr = self.nodes[r].clone();
            nr.children = None;
            roots.push(nodes.len());
            stack.push((r, nodes.len()));
            nodes.push(nr);
        }
        while let Some((old, new)) = stack.pop() {
            match (action(old), &self.nodes[old].children) {
                (Action::Merge, _) => {}
                (Action::Split(split), None) => {
                    let parent = self.nodes[old].clone();
                    let mut ch = Vec::new();
                    let total: usize = split[..dim].iter().product();
                    for c in 0..total {
                        let mut rem = c;
                        let mut lo = parent.lo;
                        let mut hi = parent.hi;
                        for a in 0..dim {
                            let k = split[a] as i64;
                            let j = (rem % split[a]) as i64;
                            rem /= split[a];
                            let ext = (parent.hi[a] - parent.lo[a]) / k;
                            lo[a] = parent.lo[a] + j * ext;
                            hi[a] = lo[a] + ext;
                        }
                        ch.push(nodes.len());
                        nodes.push(Node {
                            id: child_id(parent.id, parent.level, c),
                            level: parent.level + 1,
                            lo,
                            hi,
                            slab: parent.slab,
                            root: parent.root,
                            children: None,
                        });
                    }
                    nodes[new].children = Some((ch, split));
                }
                (_, Some((ch, split))) => {
                    let mut newch = Vec::with_capacity(ch.len());
                    for &c in ch {
                        let mut nc = self.nodes[c].clone();
                        nc.children = None;
                        newch.push(nodes.len());
                        stack.push((c, nodes.len()));
                        nodes.push(nc);
                    }
                    nodes[new].children = Some((newch, *split));
                }
                (Action::Keep, None) => {}
            }
        }
        SpaceTimeMesh::from_forest(self.domain.clone(), self.n_slabs, self.n_cells, self.policy, nodes, roots)
    }

    /// Ids of the siblings of element `id` including itself, or `None` for
    /// a root element.
    pub fn sibling_group(&self, id: u64) -> Result<Option<Vec<u64>>> {
        let k = self.element_index(id)?;
        let node = self.elements[k].node;
        Ok(self
            .nodes
            .iter()
            .find(|n| n.children.as_ref().is_some_and(|(ch, _)| ch.contains(&node)))
            .map(|p| p.children.as_ref().unwrap().0.iter().map(|&c| self.nodes[c].id).collect()))
    }
}

enum Action {
    Keep,
    Split([usize; MAX_AXES]),
    Merge,
}
