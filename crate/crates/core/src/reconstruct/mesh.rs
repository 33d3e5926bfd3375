//! Reinforcement surface and volume meshes, and the voxel composite mesh.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::fit::ReconstructedYarn;
use crate::geometry::{min_twist_offset, Aabb, CrossSection, Point3, Vector3, KEYPOINTS};
use crate::voxelizer::{rasterize_sections, Grid};
use crate::{Error, Result};

/// Faces smaller than this are degenerate.
pub const MIN_FACE_AREA: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadSurfaceMesh {
    pub vertices: Vec<Point3>,
    pub quads: Vec<[usize; 4]>,
    pub cap_triangles: Vec<[usize; 3]>,
}

impl QuadSurfaceMesh {
    /// Every face as a vertex loop.
    pub fn faces(&self) -> impl Iterator<Item = Vec<usize>> + '_ {
        self.quads
            .iter()
            .map(|q| q.to_vec())
            .chain(self.cap_triangles.iter().map(|t| t.to_vec()))
    }

    /// Count of directed edges per undirected edge, or `None` when some
    /// directed edge repeats (inconsistent orientation).
    fn edge_uses(&self) -> Option<HashMap<(usize, usize), usize>> {
        let mut directed = std::collections::HashSet::new();
        let mut uses = HashMap::new();
        for f in self.faces() {
            for i in 0..f.len() {
                let (a, b) = (f[i], f[(i + 1) % f.len()]);
                if !directed.insert((a, b)) {
                    return None;
                }
                *uses.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        Some(uses)
    }

    /// Closed and consistently oriented: every edge is used by exactly two
    /// faces, once in each direction.
    pub fn is_watertight(&self) -> bool {
        self.edge_uses()
            .is_some_and(|u| u.values().all(|&c| c == 2))
    }

    /// V − E + F.
    pub fn euler_characteristic(&self) -> i64 {
        let mut edges = std::collections::HashSet::new();
        for f in self.faces() {
            for i in 0..f.len() {
                let (a, b) = (f[i], f[(i + 1) % f.len()]);
                edges.insert((a.min(b), a.max(b)));
            }
        }
        self.vertices.len() as i64 - edges.len() as i64
            + (self.quads.len() + self.cap_triangles.len()) as i64
    }

    /// Enclosed volume by the divergence theorem.
    pub fn enclosed_volume(&self) -> f64 {
        let v = &self.vertices;
        let q: f64 = self
            .quads
            .iter()
            .map(|f| quad_volume(v[f[0]], v[f[1]], v[f[2]], v[f[3]]))
            .sum();
        let t: f64 = self
            .cap_triangles
            .iter()
            .map(|f| tri_volume(v[f[0]], v[f[1]], v[f[2]]))
            .sum();
        q + t
    }

    pub fn min_face_area(&self) -> f64 {
        self.faces()
            .map(|f| face_area(&f.iter().map(|&i| self.vertices[i]).collect::<Vec<_>>()))
            .fold(f64::INFINITY, f64::min)
    }

    /// Append `other`, offsetting its indices.
    pub fn append(&mut self, other: &QuadSurfaceMesh) {
        let o = self.vertices.len();
        self.vertices.extend_from_slice(&other.vertices);
        self.quads
            .extend(other.quads.iter().map(|q| q.map(|i| i + o)));
        self.cap_triangles
            .extend(other.cap_triangles.iter().map(|t| t.map(|i| i + o)));
    }
}

/// Signed volume contribution of triangle `abc`.
fn tri_volume(a: Point3, b: Point3, c: Point3) -> f64 {
    a.coords.dot(&b.coords.cross(&c.coords)) / 6.0
}

/// Quad contribution averaged over both diagonal splits, so it does not
/// depend on where the loop starts.
fn quad_volume(a: Point3, b: Point3, c: Point3, d: Point3) -> f64 {
    let s1 = tri_volume(a, b, c) + tri_volume(a, c, d);
    let s2 = tri_volume(a, b, d) + tri_volume(b, c, d);
    0.5 * (s1 + s2)
}

/// Area of a polygon loop from its vector area.
fn face_area(pts: &[Point3]) -> f64 {
    let mut n = Vector3::zeros();
    for i in 0..pts.len() {
        n += pts[i].coords.cross(&pts[(i + 1) % pts.len()].coords);
    }
    0.5 * n.norm()
}

/// Rings reindexed so that keypoint `k` of each ring joins keypoint `k` of
/// the next with minimal twist.
fn aligned_rings(sections: &[CrossSection]) -> Result<Vec<[Point3; KEYPOINTS]>> {
    if sections.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "meshing needs at least 2 sections, got {}",
            sections.len()
        )));
    }
    let mut rings = vec![sections[0].contour];
    for (i, w) in sections.windows(2).enumerate() {
        let (a, b) = (&w[0], &w[1]);
        let moved = (b.center - a.center).norm();
        let spread = a
            .contour
            .iter()
            .zip(&b.contour)
            .map(|(p, q)| (q - p).norm())
            .fold(0.0, f64::max);
        if moved <= 1e-9 && spread <= 1e-9 {
            return Err(Error::DegenerateGeometry(format!(
                "sections {i} and {} coincide at station {}",
                i + 1,
                b.station
            )));
        }
        let prev = rings[i];
        let k = min_twist_offset(&prev, &b.contour);
        rings.push(std::array::from_fn(|j| b.contour[(j + k) % KEYPOINTS]));
    }
    Ok(rings)
}

/// Capped quad tube through the yarn's sections.
pub fn build_surface_mesh(yarn: &ReconstructedYarn) -> Result<QuadSurfaceMesh> {
    let rings = aligned_rings(&yarn.sections)?;
    let s = rings.len();
    let mut vertices: Vec<Point3> = rings.iter().flatten().copied().collect();
    let c0 = vertices.len();
    vertices.push(yarn.sections[0].center);
    vertices.push(yarn.sections[s - 1].center);
    let v = |i: usize, k: usize| i * KEYPOINTS + k % KEYPOINTS;
    let mut quads = Vec::with_capacity(KEYPOINTS * (s - 1));
    for i in 0..s - 1 {
        for k in 0..KEYPOINTS {
            quads.push([v(i, k), v(i, k + 1), v(i + 1, k + 1), v(i + 1, k)]);
        }
    }
    let mut caps = Vec::with_capacity(2 * KEYPOINTS);
    for k in 0..KEYPOINTS {
        caps.push([c0, v(0, k + 1), v(0, k)]);
    }
    for k in 0..KEYPOINTS {
        caps.push([c0 + 1, v(s - 1, k), v(s - 1, k + 1)]);
    }
    let mut mesh = QuadSurfaceMesh {
        vertices,
        quads,
        cap_triangles: caps,
    };
    if mesh.enclosed_volume() < 0.0 {
        for q in &mut mesh.quads {
            q.reverse();
        }
        for t in &mut mesh.cap_triangles {
            t.reverse();
        }
    }
    let min_area = mesh.min_face_area();
    if !(min_area > MIN_FACE_AREA) {
        return Err(Error::DegenerateGeometry(format!(
            "yarn {} has a face of area {min_area:e}",
            yarn.id
        )));
    }
    Ok(mesh)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Cell {
    /// Bottom triangle `0 1 2`, counter-clockwise seen from the top
    /// triangle `3 4 5`.
    Wedge([usize; 6]),
    /// Bottom quad `0 1 2 3`, counter-clockwise seen from the top quad
    /// `4 5 6 7`.
    Hexahedron([usize; 8]),
}

impl Cell {
    pub fn nodes(&self) -> &[usize] {
        match self {
            Cell::Wedge(n) => n,
            Cell::Hexahedron(n) => n,
        }
    }

    /// Outward-oriented boundary faces.
    fn faces(&self) -> Vec<Vec<usize>> {
        match self {
            Cell::Wedge(n) => vec![
                vec![n[0], n[2], n[1]],
                vec![n[3], n[4], n[5]],
                vec![n[0], n[1], n[4], n[3]],
                vec![n[1], n[2], n[5], n[4]],
                vec![n[2], n[0], n[3], n[5]],
            ],
            Cell::Hexahedron(n) => vec![
                vec![n[0], n[3], n[2], n[1]],
                vec![n[4], n[5], n[6], n[7]],
                vec![n[0], n[1], n[5], n[4]],
                vec![n[1], n[2], n[6], n[5]],
                vec![n[2], n[3], n[7], n[6]],
                vec![n[3], n[0], n[4], n[7]],
            ],
        }
    }

    pub fn volume(&self, vertices: &[Point3]) -> f64 {
        self.faces()
            .iter()
            .map(|f| {
                let p: Vec<Point3> = f.iter().map(|&i| vertices[i]).collect();
                match p.len() {
                    3 => tri_volume(p[0], p[1], p[2]),
                    _ => quad_volume(p[0], p[1], p[2], p[3]),
                }
            })
            .sum()
    }

    /// Smallest corner Jacobian (triple product of the three edges leaving
    /// a node, ordered right-handed); positive for a valid cell.
    pub fn min_corner_jacobian(&self, vertices: &[Point3]) -> f64 {
        let corners: Vec<[usize; 4]> = match self {
            Cell::Wedge(n) => vec![
                [n[0], n[1], n[2], n[3]],
                [n[1], n[2], n[0], n[4]],
                [n[2], n[0], n[1], n[5]],
                [n[3], n[5], n[4], n[0]],
                [n[4], n[3], n[5], n[1]],
                [n[5], n[4], n[3], n[2]],
            ],
            Cell::Hexahedron(n) => vec![
                [n[0], n[1], n[3], n[4]],
                [n[1], n[2], n[0], n[5]],
                [n[2], n[3], n[1], n[6]],
                [n[3], n[0], n[2], n[7]],
                [n[4], n[7], n[5], n[0]],
                [n[5], n[4], n[6], n[1]],
                [n[6], n[5], n[7], n[2]],
                [n[7], n[6], n[4], n[3]],
            ],
        };
        corners
            .iter()
            .map(|c| {
                let o = vertices[c[0]];
                (vertices[c[1]] - o).dot(&(vertices[c[2]] - o).cross(&(vertices[c[3]] - o)))
            })
            .fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolumeMesh {
    pub vertices: Vec<Point3>,
    pub cells: Vec<Cell>,
    /// Yarn id per cell, 0 for matrix.
    pub cell_labels: Vec<u32>,
}

impl VolumeMesh {
    pub fn total_volume(&self) -> f64 {
        self.cells.iter().map(|c| c.volume(&self.vertices)).sum()
    }

    /// Append `other`, offsetting its indices.
    pub fn append(&mut self, other: &VolumeMesh) {
        let o = self.vertices.len();
        self.vertices.extend_from_slice(&other.vertices);
        self.cells.extend(other.cells.iter().map(|c| match c {
            Cell::Wedge(n) => Cell::Wedge(n.map(|i| i + o)),
            Cell::Hexahedron(n) => Cell::Hexahedron(n.map(|i| i + o)),
        }));
        self.cell_labels.extend_from_slice(&other.cell_labels);
    }
}

/// Ten wedges per segment fanning from the center polyline.
pub fn build_volume_mesh(yarn: &ReconstructedYarn) -> Result<VolumeMesh> {
    let rings = aligned_rings(&yarn.sections)?;
    let s = rings.len();
    let stride = KEYPOINTS + 1;
    let mut vertices = Vec::with_capacity(s * stride);
    for (ring, sec) in rings.iter().zip(&yarn.sections) {
        vertices.push(sec.center);
        vertices.extend_from_slice(ring);
    }
    // wedge orientation follows the ring winding about the path direction
    let probe = Cell::Wedge([0, 1, 2, stride, stride + 1, stride + 2]);
    let flip = probe.volume(&vertices) < 0.0;
    let mut cells = Vec::with_capacity(KEYPOINTS * (s - 1));
    for i in 0..s - 1 {
        let (b, t) = (i * stride, (i + 1) * stride);
        for k in 0..KEYPOINTS {
            let (k0, k1) = (1 + k, 1 + (k + 1) % KEYPOINTS);
            let cell = if flip {
                Cell::Wedge([b, b + k1, b + k0, t, t + k1, t + k0])
            } else {
                Cell::Wedge([b, b + k0, b + k1, t, t + k0, t + k1])
            };
            // notched detected contours can leave a corner non-convex while
            // the cell stays valid; only a non-positive volume is an inversion
            if !(cell.volume(&vertices) > 0.0) {
                return Err(Error::SelfIntersection {
                    station: yarn.sections[i].station,
                    detail: format!("yarn {} wedge {k} of segment {i} is inverted", yarn.id),
                });
            }
            cells.push(cell);
        }
    }
    Ok(VolumeMesh {
        vertices,
        cell_labels: vec![yarn.id; cells.len()],
        cells,
    })
}

/// Voxel hexahedral mesh of `bbox`; cells whose center lies inside a yarn
/// carry that yarn's id, overlaps going to the nearest section center.
pub fn build_composite_mesh(
    yarns: &[ReconstructedYarn],
    bbox: &Aabb,
    unit_um: f64,
    voxel_size_um: f64,
    budget: u64,
) -> Result<(VolumeMesh, Grid)> {
    let grid = Grid::for_bbox(bbox, unit_um, voxel_size_um)?;
    grid.check_budget(budget)?;
    let nodes = (grid.dims[0] as u64 + 1) * (grid.dims[1] as u64 + 1) * (grid.dims[2] as u64 + 1);
    if nodes > budget {
        return Err(Error::BudgetExceeded {
            requested: nodes,
            budget,
        });
    }
    for y in yarns {
        if y.id == 0 || y.id > u16::MAX as u32 {
            return Err(Error::Domain(format!(
                "yarn id {} does not fit a label",
                y.id
            )));
        }
    }
    let input: Vec<(u16, &[CrossSection])> = yarns
        .iter()
        .map(|y| (y.id as u16, y.sections.as_slice()))
        .collect();
    let labels = rasterize_sections(&input, &grid)?;
    let [nx, ny, nz] = grid.dims;
    let h = grid.h();
    let mut vertices = Vec::with_capacity(nodes as usize);
    for k in 0..=nz {
        for j in 0..=ny {
            for i in 0..=nx {
                vertices.push(grid.origin + Vector3::new(i as f64, j as f64, k as f64) * h);
            }
        }
    }
    let node = |i: usize, j: usize, k: usize| i + (nx + 1) * (j + (ny + 1) * k);
    let mut cells = Vec::with_capacity(grid.len() as usize);
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                cells.push(Cell::Hexahedron([
                    node(i, j, k),
                    node(i + 1, j, k),
                    node(i + 1, j + 1, k),
                    node(i, j + 1, k),
                    node(i, j, k + 1),
                    node(i + 1, j, k + 1),
                    node(i + 1, j + 1, k + 1),
                    node(i, j + 1, k + 1),
                ]));
            }
        }
    }
    Ok((
        VolumeMesh {
            vertices,
            cells,
            cell_labels: labels.into_iter().map(u32::from).collect(),
        },
        grid,
    ))
}

/// Fraction of cells labeled 0.
pub fn matrix_fraction(mesh: &VolumeMesh) -> f64 {
    if mesh.cells.is_empty() {
        return 0.0;
    }
    mesh.cell_labels.iter().filter(|&&l| l == 0).count() as f64 / mesh.cells.len() as f64
}
