//! Nodal averaging I_h^c onto continuous piecewise polynomials.
//!
//! The conforming refinement used here is the tensor lattice of all element
//! breakpoints. On a mesh without hanging facets it is the mesh itself;
//! with hanging facets it is finer than strictly necessary, which is
//! harmless for the small meshes this is meant for.

use std::collections::HashMap;

use crate::assembly::{DiscreteSolution, Discretization};
use crate::fe::{BoxGeom, PointSet, Tabulation, MAX_AXES};
use crate::mesh::SpaceTimeMesh;

#[derive(Debug, Clone)]
struct Cell {
    element: usize,
    /// global node of every cell basis function
    nodes: Vec<usize>,
    /// element basis at the cell quadrature points
    elem_tab: Tabulation,
    /// cell basis at the same points
    cell_tab: Tabulation,
    geom: BoxGeom,
}

/// Precomputed averaging map for one mesh and discretization.
#[derive(Debug, Clone)]
pub struct AveragingOperator {
    /// per global node: (element, element basis values at the node)
    contrib: Vec<Vec<(usize, Vec<f64>)>>,
    dirichlet: Vec<bool>,
    cells: Vec<Cell>,
    /// cells of every element
    element_cells: Vec<Vec<usize>>,
}

/// I_h^c v as values at the global nodes.
#[derive(Debug, Clone)]
pub struct AveragedField {
    pub node_values: Vec<f64>,
}

impl AveragingOperator {
    pub fn new(mesh: &SpaceTimeMesh, disc: &Discretization) -> Self {
        let dim = mesh.dim();
        let basis = &disc.element;
        let deg: Vec<usize> = (0..dim).map(|a| basis.degrees[a]).collect();
        let breaks: Vec<Vec<i64>> = (0..dim)
            .map(|a| {
                let mut v: Vec<i64> = mesh.elements.iter().flat_map(|e| [e.lo[a], e.hi[a]]).collect();
                v.sort_unstable();
                v.dedup();
                v
            })
            .collect();
        let n_int: Vec<usize> = breaks.iter().map(|b| b.len() - 1).collect();
        // coordinate of global node g on axis a
        let coord = |a: usize, g: usize| -> f64 {
            let i = (g / deg[a]).min(n_int[a] - 1);
            let j = g - i * deg[a];
            let (lo, hi) = (mesh.coord_of(a, breaks[a][i]), mesh.coord_of(a, breaks[a][i + 1]));
            lo + 0.5 * (basis.axis(a).nodes[j] + 1.0) * (hi - lo)
        };
        let mut index: HashMap<[usize; MAX_AXES], usize> = HashMap::new();
        let mut contrib: Vec<Vec<(usize, Vec<f64>)>> = Vec::new();
        let mut dirichlet: Vec<bool> = Vec::new();
        let mut cells = Vec::new();
        let mut element_cells = vec![Vec::new(); mesh.n_elements()];

        for (k, e) in mesh.elements.iter().enumerate() {
            let range: Vec<(usize, usize)> = (0..dim)
                .map(|a| {
                    let lo = breaks[a].binary_search(&e.lo[a]).unwrap();
                    let hi = breaks[a].binary_search(&e.hi[a]).unwrap();
                    (lo, hi)
                })
                .collect();
            // global nodes in the closure of K, each visited once
            let counts: Vec<usize> = (0..dim).map(|a| (range[a].1 - range[a].0) * deg[a] + 1).collect();
            let total: usize = counts.iter().product();
            for m in 0..total {
                let mut key = [0usize; MAX_AXES];
                let mut rem = m;
                let mut p = [0.0; MAX_AXES];
                for a in 0..dim {
                    key[a] = range[a].0 * deg[a] + rem % counts[a];
                    rem /= counts[a];
                    p[a] = coord(a, key[a]);
                }
                let next = index.len();
                let id = *index.entry(key).or_insert(next);
                if id == next {
                    contrib.push(Vec::new());
                    let on_dirichlet = (1..dim).any(|a| {
                        let side = if key[a] == 0 {
                            0
                        } else if key[a] == n_int[a] * deg[a] {
                            1
                        } else {
                            return false;
                        };
                        !mesh.domain.lateral_neumann[a - 1][side]
                    });
                    dirichlet.push(on_dirichlet);
                }
                let r: Vec<f64> = (0..dim).map(|a| e.geom.to_ref(a, p[a])).collect();
                contrib[id].push((k, basis.evaluate(&r).values));
            }
            // cells of K
            let ccounts: Vec<usize> = (0..dim).map(|a| range[a].1 - range[a].0).collect();
            let ncell: usize = ccounts.iter().product();
            for m in 0..ncell {
                let mut ci = [0usize; MAX_AXES];
                let mut rem = m;
                let mut lo = [0.0; MAX_AXES];
                let mut hi = [0.0; MAX_AXES];
                for a in 0..dim {
                    ci[a] = range[a].0 + rem % ccounts[a];
                    rem /= ccounts[a];
                    lo[a] = mesh.coord_of(a, breaks[a][ci[a]]);
                    hi[a] = mesh.coord_of(a, breaks[a][ci[a] + 1]);
                }
                let geom = BoxGeom::new(&lo[..dim], &hi[..dim]);
                let nodes = (0..basis.len())
                    .map(|i| {
                        let s = basis.split(i);
                        let mut key = [0usize; MAX_AXES];
                        for a in 0..dim {
                            key[a] = ci[a] * deg[a] + s[a];
                        }
                        index[&key]
                    })
                    .collect();
                let pts = PointSet::gauss(&geom, disc.n_estimator);
                element_cells[k].push(cells.len());
                cells.push(Cell {
                    element: k,
                    nodes,
                    elem_tab: basis.tabulate(&e.geom, &pts),
                    cell_tab: basis.tabulate(&geom, &pts),
                    geom,
                });
            }
        }
        AveragingOperator { contrib, dirichlet, cells, element_cells }
    }

    pub fn n_nodes(&self) -> usize {
        self.contrib.len()
    }

    /// Node values: the mean over the elements touching the node, zero on Γ_D.
    pub fn apply(&self, v: &DiscreteSolution) -> AveragedField {
        let node_values = self
            .contrib
            .iter()
            .zip(&self.dirichlet)
            .map(|(c, &dir)| {
                if dir {
                    return 0.0;
                }
                let s: f64 = c.iter().map(|(k, phi)| dot(v.element(*k), phi)).sum();
                s / c.len() as f64
            })
            .collect();
        AveragedField { node_values }
    }

    /// ‖v − I_h^c v‖_K for every element.
    pub fn defect(&self, v: &DiscreteSolution, field: &AveragedField) -> Vec<f64> {
        self.element_cells
            .iter()
            .map(|cs| {
                cs.iter()
                    .map(|&c| {
                        let cell = &self.cells[c];
                        let cv: Vec<f64> = cell.nodes.iter().map(|&n| field.node_values[n]).collect();
                        let vk = v.element(cell.element);
                        (0..cell.elem_tab.nq)
                            .map(|q| {
                                cell.elem_tab.w[q] * (cell.elem_tab.value(vk, q) - cell.cell_tab.value(&cv, q)).powi(2)
                            })
                            .sum::<f64>()
                    })
                    .sum::<f64>()
                    .sqrt()
            })
            .collect()
    }

    /// I_h^c v at `p`, evaluated with the polynomial of the cell of
    /// element `k` nearest to `p`.
    pub fn evaluate_in(&self, disc: &Discretization, field: &AveragedField, k: usize, p: &[f64; MAX_AXES]) -> f64 {
        let dist = |g: &BoxGeom| -> f64 {
            (0..g.dim).map(|a| (g.lo[a] - p[a]).max(p[a] - g.hi[a]).max(0.0)).sum()
        };
        let c = self.element_cells[k]
            .iter()
            .copied()
            .min_by(|&a, &b| dist(&self.cells[a].geom).total_cmp(&dist(&self.cells[b].geom)))
            .expect("every element has a cell");
        let cell = &self.cells[c];
        let r: Vec<f64> = (0..cell.geom.dim).map(|a| cell.geom.to_ref(a, p[a]).clamp(-1.0, 1.0)).collect();
        let ev = disc.element.evaluate(&r);
        cell.nodes.iter().zip(&ev.values).map(|(&n, v)| field.node_values[n] * v).sum()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
