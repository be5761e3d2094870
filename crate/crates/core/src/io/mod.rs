//! Artifact writers: legacy ASCII VTK dumps and CSV tables.
//!
//! VTK coordinates are (x₁, t) for d = 1 and (x₁, x₂, t) for d = 2, so time
//! is the last axis a viewer shows. Points are not shared between cells,
//! which lets discontinuous fields go into point data unchanged.

use std::io::{self, Write};

use crate::assembly::{field_evaluate, DiscreteSolution, Discretization, FieldQuantity};
use crate::estimator::Estimate;
use crate::fe::MAX_AXES;
use crate::mesh::SpaceTimeMesh;
use crate::verify::ConstantReport;

pub const CONSTANTS_HEADER: &str = "inequality,level,samples,constant";
pub const ESTIMATES_HEADER: &str = "id,eta_r,eta_j1,eta_j21,eta_j22,eta_j3q,eta_j3r,eta_bc1,eta_bc2,eta,osc_k,osc_n";

const VTK_LINE: u8 = 3;
const VTK_QUAD: u8 = 9;
const VTK_HEXAHEDRON: u8 = 12;

/// Unit-box corners in VTK order, as (x₁, x₂, t) offsets.
const HEX_CORNERS: [[usize; 3]; 8] =
    [[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0], [0, 0, 1], [1, 0, 1], [1, 1, 1], [0, 1, 1]];
const QUAD_CORNERS: [[usize; 2]; 4] = [[0, 0], [1, 0], [1, 1], [0, 1]];

/// Data to attach to a mesh dump.
#[derive(Default, Clone, Copy)]
pub struct VtkFields<'a> {
    pub solution: Option<(&'a Discretization, &'a DiscreteSolution)>,
    pub eta: Option<&'a [f64]>,
}

fn header<W: Write>(w: &mut W, title: &str) -> io::Result<()> {
    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "{title}")?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET UNSTRUCTURED_GRID")
}

fn cells<W: Write>(w: &mut W, n_cells: usize, per_cell: usize, kind: u8) -> io::Result<()> {
    writeln!(w, "CELLS {} {}", n_cells, n_cells * (per_cell + 1))?;
    for c in 0..n_cells {
        write!(w, "{per_cell}")?;
        for i in 0..per_cell {
            write!(w, " {}", c * per_cell + i)?;
        }
        writeln!(w)?;
    }
    writeln!(w, "CELL_TYPES {n_cells}")?;
    for _ in 0..n_cells {
        writeln!(w, "{kind}")?;
    }
    Ok(())
}

fn scalars<W: Write>(w: &mut W, name: &str, ty: &str, values: impl Iterator<Item = String>) -> io::Result<()> {
    writeln!(w, "SCALARS {name} {ty} 1")?;
    writeln!(w, "LOOKUP_TABLE default")?;
    for v in values {
        writeln!(w, "{v}")?;
    }
    Ok(())
}

/// Space-time points of the cell corners of element `k`, in VTK order.
fn element_corners(mesh: &SpaceTimeMesh, k: usize) -> Vec<[f64; MAX_AXES]> {
    let g = &mesh.elements[k].geom;
    let pick = |a: usize, s: usize| if s == 0 { g.lo[a] } else { g.hi[a] };
    if mesh.d() == 1 {
        QUAD_CORNERS.iter().map(|c| [pick(0, c[1]), pick(1, c[0]), 0.0]).collect()
    } else {
        HEX_CORNERS.iter().map(|c| [pick(0, c[2]), pick(1, c[0]), pick(2, c[1])]).collect()
    }
}

/// Whole space-time mesh: hexahedra for d = 2, quads for d = 1, with cell
/// data `level`, `slab` and optionally `eta_K`, and point data `u_h`.
pub fn write_mesh_vtk<W: Write>(mut w: W, mesh: &SpaceTimeMesh, fields: VtkFields) -> io::Result<()> {
    let n = mesh.n_elements();
    let (per_cell, kind) = if mesh.d() == 1 { (4, VTK_QUAD) } else { (8, VTK_HEXAHEDRON) };
    header(&mut w, &format!("space-time mesh, {n} elements"))?;
    let corners: Vec<Vec<[f64; MAX_AXES]>> = (0..n).map(|k| element_corners(mesh, k)).collect();
    writeln!(w, "POINTS {} double", n * per_cell)?;
    for p in corners.iter().flatten() {
        if mesh.d() == 1 {
            writeln!(w, "{} {} 0", p[1], p[0])?;
        } else {
            writeln!(w, "{} {} {}", p[1], p[2], p[0])?;
        }
    }
    cells(&mut w, n, per_cell, kind)?;
    writeln!(w, "CELL_DATA {n}")?;
    scalars(&mut w, "level", "int", mesh.elements.iter().map(|e| e.level.to_string()))?;
    scalars(&mut w, "slab", "int", mesh.elements.iter().map(|e| e.slab.to_string()))?;
    if let Some(eta) = fields.eta {
        scalars(&mut w, "eta_K", "double", eta.iter().map(|v| v.to_string()))?;
    }
    if let Some((disc, sol)) = fields.solution {
        writeln!(w, "POINT_DATA {}", n * per_cell)?;
        let values = corners.iter().enumerate().flat_map(|(k, cs)| {
            cs.iter().map(move |p| field_evaluate(mesh, disc, sol, k, p, FieldQuantity::Value)[0].to_string())
        });
        scalars(&mut w, "u_h", "double", values)?;
    }
    Ok(())
}

/// Elements cut by the plane t = `t`. The top of the time interval belongs
/// to the last elements; everywhere else an element owns [t_lo, t_hi).
fn slice_elements(mesh: &SpaceTimeMesh, t: f64) -> Vec<usize> {
    let t_end = mesh.domain.t_end;
    (0..mesh.n_elements())
        .filter(|&k| {
            let g = &mesh.elements[k].geom;
            g.lo[0] <= t && (t < g.hi[0] || (t >= t_end && g.hi[0] >= t_end))
        })
        .collect()
}

/// u_h on the spatial slice t = `t`: quads for d = 2, lines for d = 1.
pub fn write_slice_vtk<W: Write>(
    mut w: W,
    mesh: &SpaceTimeMesh,
    disc: &Discretization,
    sol: &DiscreteSolution,
    t: f64,
) -> io::Result<()> {
    let ks = slice_elements(mesh, t);
    let (per_cell, kind) = if mesh.d() == 1 { (2, VTK_LINE) } else { (4, VTK_QUAD) };
    header(&mut w, &format!("slice t = {t}"))?;
    let points: Vec<(usize, [f64; MAX_AXES])> = ks
        .iter()
        .flat_map(|&k| {
            let g = &mesh.elements[k].geom;
            let pick = move |a: usize, s: usize| if s == 0 { g.lo[a] } else { g.hi[a] };
            let pts: Vec<[f64; MAX_AXES]> = if mesh.d() == 1 {
                (0..2).map(|s| [t, pick(1, s), 0.0]).collect()
            } else {
                QUAD_CORNERS.iter().map(|c| [t, pick(1, c[0]), pick(2, c[1])]).collect()
            };
            pts.into_iter().map(move |p| (k, p))
        })
        .collect();
    writeln!(w, "POINTS {} double", points.len())?;
    for (_, p) in &points {
        writeln!(w, "{} {} {}", p[1], p[2], p[0])?;
    }
    cells(&mut w, ks.len(), per_cell, kind)?;
    writeln!(w, "CELL_DATA {}", ks.len())?;
    scalars(&mut w, "level", "int", ks.iter().map(|&k| mesh.elements[k].level.to_string()))?;
    writeln!(w, "POINT_DATA {}", points.len())?;
    let values = points.iter().map(|(k, p)| field_evaluate(mesh, disc, sol, *k, p, FieldQuantity::Value)[0].to_string());
    scalars(&mut w, "u_h", "double", values)
}

/// Per-element estimator breakdown, one row per element in mesh order.
pub fn write_estimates_csv<W: Write>(mut w: W, est: &Estimate) -> io::Result<()> {
    writeln!(w, "{ESTIMATES_HEADER}")?;
    for e in &est.elements {
        writeln!(
            w,
            "{},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
            e.id, e.eta_r, e.eta_j1, e.eta_j21, e.eta_j22, e.eta_j3q, e.eta_j3r, e.eta_bc1, e.eta_bc2, e.eta, e.osc_k, e.osc_n
        )?;
    }
    Ok(())
}

pub fn write_constants_csv<W: Write>(mut w: W, reports: &[ConstantReport]) -> io::Result<()> {
    writeln!(w, "{CONSTANTS_HEADER}")?;
    for r in reports {
        let c = if r.constant.is_finite() { format!("{:e}", r.constant) } else { "nan".into() };
        writeln!(w, "{},{},{},{}", r.inequality, r.level, r.samples, c)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests;
