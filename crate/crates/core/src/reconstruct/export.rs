//! Wavefront OBJ surface meshes and legacy ASCII VTK unstructured grids.
//! Coordinates use the shortest round-trip decimal form, so output is
//! bit-stable and parses back exactly.

use std::fmt::Write as _;

use super::mesh::{Cell, QuadSurfaceMesh, VolumeMesh};
use crate::geometry::Point3;
use crate::{Error, Result};

const VTK_WEDGE: u8 = 13;
const VTK_HEXAHEDRON: u8 = 12;

/// One named object per mesh; face indices are 1-based and global.
pub fn write_obj<'a>(meshes: impl IntoIterator<Item = (String, &'a QuadSurfaceMesh)>) -> String {
    let mut out = String::from("# yarn surface meshes\n");
    let mut offset = 1;
    for (name, m) in meshes {
        writeln!(out, "o {name}").unwrap();
        for p in &m.vertices {
            writeln!(out, "v {} {} {}", p.x, p.y, p.z).unwrap();
        }
        for q in &m.quads {
            writeln!(
                out,
                "f {} {} {} {}",
                q[0] + offset,
                q[1] + offset,
                q[2] + offset,
                q[3] + offset
            )
            .unwrap();
        }
        for t in &m.cap_triangles {
            writeln!(
                out,
                "f {} {} {}",
                t[0] + offset,
                t[1] + offset,
                t[2] + offset
            )
            .unwrap();
        }
        offset += m.vertices.len();
    }
    out
}

fn num<T: std::str::FromStr>(tok: Option<&str>, at: &str, what: &str) -> Result<T> {
    tok.and_then(|t| t.parse().ok())
        .ok_or_else(|| Error::parse(at, format!("missing or malformed {what}")))
}

/// Parse OBJ text written by [`write_obj`]: objects in order, indices made
/// local to each object.
pub fn parse_obj(text: &str, source: &str) -> Result<Vec<(String, QuadSurfaceMesh)>> {
    let mut out: Vec<(String, QuadSurfaceMesh)> = Vec::new();
    let mut base = 0usize;
    let mut total = 0usize;
    for (i, line) in text.lines().enumerate() {
        let at = format!("{source}:{}", i + 1);
        let mut tok = line.split_whitespace();
        match tok.next() {
            None | Some("#") => {}
            Some("o") => {
                base = total;
                let name = tok.collect::<Vec<_>>().join(" ");
                out.push((
                    name,
                    QuadSurfaceMesh {
                        vertices: Vec::new(),
                        quads: Vec::new(),
                        cap_triangles: Vec::new(),
                    },
                ));
            }
            Some(kind @ ("v" | "f")) => {
                let Some((_, mesh)) = out.last_mut() else {
                    return Err(Error::parse(&at, format!("'{kind}' before any object")));
                };
                if kind == "v" {
                    let x = num(tok.next(), &at, "x")?;
                    let y = num(tok.next(), &at, "y")?;
                    let z = num(tok.next(), &at, "z")?;
                    mesh.vertices.push(Point3::new(x, y, z));
                    total += 1;
                } else {
                    let idx: Vec<usize> = tok
                        .map(|t| {
                            let v: usize = num(Some(t), &at, "face index")?;
                            v.checked_sub(1 + base)
                                .filter(|&l| l < mesh.vertices.len())
                                .ok_or_else(|| {
                                    Error::parse(&at, format!("face index {v} outside its object"))
                                })
                        })
                        .collect::<Result<_>>()?;
                    match idx.len() {
                        4 => mesh.quads.push([idx[0], idx[1], idx[2], idx[3]]),
                        3 => mesh.cap_triangles.push([idx[0], idx[1], idx[2]]),
                        n => return Err(Error::parse(&at, format!("face with {n} vertices"))),
                    }
                }
            }
            Some(other) => return Err(Error::parse(&at, format!("unsupported record '{other}'"))),
        }
    }
    Ok(out)
}

/// Legacy VTK node order for a wedge: the base triangle's normal points
/// away from the top, the reverse of [`Cell::Wedge`].
fn to_vtk(cell: &Cell) -> (u8, Vec<usize>) {
    match cell {
        Cell::Wedge(n) => (VTK_WEDGE, vec![n[0], n[2], n[1], n[3], n[5], n[4]]),
        Cell::Hexahedron(n) => (VTK_HEXAHEDRON, n.to_vec()),
    }
}

pub fn write_vtk(mesh: &VolumeMesh, title: &str) -> String {
    let mut out = String::new();
    out.push_str("# vtk DataFile Version 3.0\n");
    writeln!(out, "{}", title.lines().next().unwrap_or("")).unwrap();
    out.push_str("ASCII\nDATASET UNSTRUCTURED_GRID\n");
    writeln!(out, "POINTS {} double", mesh.vertices.len()).unwrap();
    for p in &mesh.vertices {
        writeln!(out, "{} {} {}", p.x, p.y, p.z).unwrap();
    }
    let size: usize = mesh.cells.iter().map(|c| c.nodes().len() + 1).sum();
    writeln!(out, "CELLS {} {size}", mesh.cells.len()).unwrap();
    let mut types = String::new();
    for c in &mesh.cells {
        let (t, nodes) = to_vtk(c);
        let list: Vec<String> = nodes.iter().map(|n| n.to_string()).collect();
        writeln!(out, "{} {}", nodes.len(), list.join(" ")).unwrap();
        writeln!(types, "{t}").unwrap();
    }
    writeln!(out, "CELL_TYPES {}", mesh.cells.len()).unwrap();
    out.push_str(&types);
    writeln!(out, "CELL_DATA {}", mesh.cells.len()).unwrap();
    out.push_str("SCALARS yarn_id int 1\nLOOKUP_TABLE default\n");
    for l in &mesh.cell_labels {
        writeln!(out, "{l}").unwrap();
    }
    out
}

/// Parse VTK text written by [`write_vtk`].
pub fn parse_vtk(text: &str, source: &str) -> Result<VolumeMesh> {
    let mut lines = text.lines().enumerate().peekable();
    let mut next = |what: &str| -> Result<(String, Vec<String>)> {
        let (i, l) = lines.next().ok_or_else(|| {
            Error::parse(source, format!("unexpected end of file, expected {what}"))
        })?;
        Ok((
            format!("{source}:{}", i + 1),
            l.split_whitespace().map(str::to_string).collect(),
        ))
    };
    let expect = |got: &(String, Vec<String>), key: &str| -> Result<()> {
        if got.1.first().map(String::as_str) == Some(key) {
            Ok(())
        } else {
            Err(Error::parse(&got.0, format!("expected {key}")))
        }
    };
    let header = next("header")?;
    if !header.1.join(" ").starts_with("# vtk DataFile") {
        return Err(Error::parse(&header.0, "not a legacy VTK file"));
    }
    next("title")?;
    expect(&next("ASCII")?, "ASCII")?;
    let ds = next("DATASET")?;
    if ds.1 != ["DATASET", "UNSTRUCTURED_GRID"] {
        return Err(Error::parse(&ds.0, "expected DATASET UNSTRUCTURED_GRID"));
    }
    let pts = next("POINTS")?;
    expect(&pts, "POINTS")?;
    let n_pts: usize = num(pts.1.get(1).map(String::as_str), &pts.0, "point count")?;
    let mut vertices = Vec::with_capacity(n_pts);
    for _ in 0..n_pts {
        let (at, t) = next("point")?;
        let c = |k: usize, w: &str| num::<f64>(t.get(k).map(String::as_str), &at, w);
        vertices.push(Point3::new(c(0, "x")?, c(1, "y")?, c(2, "z")?));
    }
    let cells_line = next("CELLS")?;
    expect(&cells_line, "CELLS")?;
    let n_cells: usize = num(
        cells_line.1.get(1).map(String::as_str),
        &cells_line.0,
        "cell count",
    )?;
    let mut raw = Vec::with_capacity(n_cells);
    for _ in 0..n_cells {
        let (at, t) = next("cell")?;
        let ids: Vec<usize> = t
            .iter()
            .map(|s| num(Some(s.as_str()), &at, "node index"))
            .collect::<Result<_>>()?;
        if ids.is_empty() || ids[0] + 1 != ids.len() || ids[1..].iter().any(|&i| i >= n_pts) {
            return Err(Error::parse(&at, "malformed cell connectivity"));
        }
        raw.push((at, ids[1..].to_vec()));
    }
    let types_line = next("CELL_TYPES")?;
    expect(&types_line, "CELL_TYPES")?;
    let mut cells = Vec::with_capacity(n_cells);
    for (cat, n) in raw {
        let (at, t) = next("cell type")?;
        let ty: u8 = num(t.first().map(String::as_str), &at, "cell type")?;
        cells.push(match (ty, n.len()) {
            (VTK_WEDGE, 6) => Cell::Wedge([n[0], n[2], n[1], n[3], n[5], n[4]]),
            (VTK_HEXAHEDRON, 8) => {
                Cell::Hexahedron([n[0], n[1], n[2], n[3], n[4], n[5], n[6], n[7]])
            }
            _ => {
                return Err(Error::parse(
                    &cat,
                    format!("cell type {ty} with {} nodes", n.len()),
                ))
            }
        });
    }
    expect(&next("CELL_DATA")?, "CELL_DATA")?;
    expect(&next("SCALARS")?, "SCALARS")?;
    expect(&next("LOOKUP_TABLE")?, "LOOKUP_TABLE")?;
    let mut cell_labels = Vec::with_capacity(n_cells);
    for _ in 0..n_cells {
        let (at, t) = next("cell label")?;
        cell_labels.push(num(t.first().map(String::as_str), &at, "yarn_id")?);
    }
    Ok(VolumeMesh {
        vertices,
        cells,
        cell_labels,
    })
}
