use super::*;
use crate::assembly::interpolate;
use crate::mesh::{Domain, RefinementPolicy};

fn mesh(d: usize) -> SpaceTimeMesh {
    let dom = Domain::new(1.0, &vec![0.0; d], &vec![1.0; d]);
    SpaceTimeMesh::build_initial(dom, 2, 2, RefinementPolicy::Proportional).unwrap()
}

fn dump(mesh: &SpaceTimeMesh, fields: VtkFields) -> String {
    let mut buf = Vec::new();
    write_mesh_vtk(&mut buf, mesh, fields).unwrap();
    String::from_utf8(buf).unwrap()
}

/// Lines after `key`, up to the next section.
fn section<'a>(text: &'a str, key: &str) -> Vec<&'a str> {
    let mut it = text.lines().skip_while(|l| !l.starts_with(key));
    it.next().expect("section present");
    it.take_while(|l| !l.chars().next().is_some_and(|c| c.is_ascii_uppercase())).collect()
}

fn points(text: &str) -> Vec<[f64; 3]> {
    section(text, "POINTS")
        .iter()
        .map(|l| {
            let v: Vec<f64> = l.split(' ').map(|s| s.parse().unwrap()).collect();
            [v[0], v[1], v[2]]
        })
        .collect()
}

#[test]
fn quads_for_one_space_dimension() {
    let m = mesh(1);
    let text = dump(&m, VtkFields::default());
    assert!(text.starts_with("# vtk DataFile Version 3.0\n"));
    assert!(text.contains("POINTS 16 double\n"));
    assert!(text.contains("CELLS 4 20\n"));
    assert_eq!(section(&text, "CELL_TYPES"), vec!["9"; 4]);
    assert!(text.contains("SCALARS level int 1") && text.contains("SCALARS slab int 1"));
    assert!(!text.contains("eta_K") && !text.contains("POINT_DATA"));
}

#[test]
fn hexahedra_are_positively_oriented() {
    let m = mesh(2);
    let text = dump(&m, VtkFields::default());
    assert_eq!(section(&text, "CELL_TYPES"), vec!["12"; 8]);
    let p = points(&text);
    for c in p.chunks(8) {
        let d = |i: usize| [c[i][0] - c[0][0], c[i][1] - c[0][1], c[i][2] - c[0][2]];
        let (a, b, z) = (d(1), d(3), d(4));
        let vol = (a[1] * b[2] - a[2] * b[1]) * z[0] + (a[2] * b[0] - a[0] * b[2]) * z[1] + (a[0] * b[1] - a[1] * b[0]) * z[2];
        assert!(vol > 0.0);
        // time is the third coordinate and halves are slabs
        assert!(c.iter().all(|q| q[2] == 0.0 || q[2] == 0.5 || q[2] == 1.0));
    }
}

#[test]
fn point_data_reproduces_a_linear_field() {
    let m = mesh(2);
    let disc = Discretization::new(2, 1);
    let f = |p: &[f64; MAX_AXES]| 1.0 + 2.0 * p[0] - p[1] + 0.5 * p[2];
    let u = interpolate(&m, &disc, f);
    let eta: Vec<f64> = (0..m.n_elements()).map(|k| k as f64).collect();
    let text = dump(&m, VtkFields { solution: Some((&disc, &u)), eta: Some(&eta) });
    assert!(text.contains("SCALARS eta_K double 1"));
    let pts = points(&text);
    let tail = text.split("SCALARS u_h double 1\nLOOKUP_TABLE default\n").nth(1).unwrap();
    let vals: Vec<f64> = tail.lines().map(|l| l.parse().unwrap()).collect();
    assert_eq!(vals.len(), pts.len());
    for (v, p) in vals.iter().zip(&pts) {
        assert!((v - f(&[p[2], p[0], p[1]])).abs() < 1e-12);
    }
}

#[test]
fn slices_pick_the_right_slab() {
    let m = mesh(2);
    let disc = Discretization::new(2, 1);
    let u = interpolate(&m, &disc, |p| p[0]);
    for (t, n) in [(0.0, 4), (0.25, 4), (0.5, 4), (1.0, 4)] {
        let mut buf = Vec::new();
        write_slice_vtk(&mut buf, &m, &disc, &u, t).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains(&format!("CELLS {n} {}\n", 5 * n)), "t={t}");
        let tail = text.split("SCALARS u_h double 1\nLOOKUP_TABLE default\n").nth(1).unwrap();
        assert!(tail.lines().all(|l| (l.parse::<f64>().unwrap() - t).abs() < 1e-12));
    }
    let mut buf = Vec::new();
    write_slice_vtk(&mut buf, &mesh(1), &Discretization::new(1, 1), &interpolate(&mesh(1), &Discretization::new(1, 1), |_| 0.0), 0.7)
        .unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(section(&text, "CELL_TYPES"), vec!["3"; 2]);
}

#[test]
fn constants_table() {
    let reps = vec![
        ConstantReport { inequality: "trace_q".into(), level: 1, samples: 200, constant: 0.5 },
        ConstantReport { inequality: "saturation".into(), level: 2, samples: 1, constant: f64::NAN },
    ];
    let mut buf = Vec::new();
    write_constants_csv(&mut buf, &reps).unwrap();
    assert_eq!(String::from_utf8(buf).unwrap(), "inequality,level,samples,constant\ntrace_q,1,200,5e-1\nsaturation,2,1,nan\n");
}
