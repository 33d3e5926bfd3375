//! Point-in-envelope test for a yarn lofted linearly between consecutive
//! 10-gon sections.
//!
//! Segment `i` is the slab between the planes of sections `i` and `i + 1`
//! (normals oriented along the yarn). A point inside the slab gets the
//! interpolation weight `f = d0 / (d0 - d1)` from its signed plane
//! distances; the interpolated plane at `f` carries the keypoint-wise
//! interpolated ring, expressed in a frame parallel-transported from
//! section `i`. Adjacent slabs share a plane, so the envelope has no gaps
//! at bends.

use crate::geometry::{
    min_twist_offset, CrossSection, Point2, Point3, SectionFrame, Vector3, KEYPOINTS,
};
use crate::voxelizer::Grid;
use crate::{par, Error, Result};

/// Rotate `u` by the minimal rotation taking unit `a` onto unit `b`.
fn transport(a: &Vector3, b: &Vector3, u: &Vector3) -> Vector3 {
    let v = a.cross(b);
    let c = a.dot(b);
    if c <= -1.0 + 1e-12 {
        return -u;
    }
    u * c + v.cross(u) + v * (v.dot(u) / (1.0 + c))
}

fn point_in_polygon(p: &Point2, ring: &[Point2; KEYPOINTS]) -> bool {
    let mut inside = false;
    let mut j = KEYPOINTS - 1;
    for i in 0..KEYPOINTS {
        let (a, b) = (ring[i], ring[j]);
        if (a.y > p.y) != (b.y > p.y) && p.x < (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x {
            inside = !inside;
        }
        j = i;
    }
    inside
}

struct Segment {
    id: u16,
    c0: Point3,
    c1: Point3,
    n0: Vector3,
    n1: Vector3,
    e1: Vector3,
    ring0: [Point2; KEYPOINTS],
    ring1: [Point2; KEYPOINTS],
    lo: [usize; 3],
    hi: [usize; 3],
}

impl Segment {
    fn new(id: u16, a: &CrossSection, b: &CrossSection, grid: &Grid) -> Result<Self> {
        let chord = b.center - a.center;
        if chord.norm() <= 1e-12 {
            return Err(Error::DegenerateGeometry(format!(
                "yarn {id}: consecutive sections share center at station {:.3}",
                a.station
            )));
        }
        let orient = |s: &CrossSection| -> Result<Vector3> {
            let n = s.newell_normal();
            if n.norm() <= 1e-12 {
                return Err(Error::DegenerateGeometry(format!(
                    "yarn {id}: section at station {:.3} has no area",
                    s.station
                )));
            }
            let n = n.normalize();
            Ok(if n.dot(&chord) < 0.0 { -n } else { n })
        };
        let (n0, n1) = (orient(a)?, orient(b)?);
        let f0 = SectionFrame::canonical(a.center, n0)?;
        let e1_1 = transport(&n0, &n1, &f0.e1);
        let e2_1 = n1.cross(&e1_1);
        let k = min_twist_offset(&a.contour, &b.contour);
        let ring0 = a.contour.map(|p| f0.to_local(&p));
        let ring1: [Point2; KEYPOINTS] = std::array::from_fn(|i| {
            let d = b.contour[(i + k) % KEYPOINTS] - b.center;
            Point2::new(d.dot(&e1_1), d.dot(&e2_1))
        });

        let h = grid.h();
        let mut lo = [0; 3];
        let mut hi = [0; 3];
        for ax in 0..3 {
            let vals = a.contour.iter().chain(b.contour.iter()).map(|p| p[ax]);
            let (mn, mx) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(l, u), v| {
                (l.min(v), u.max(v))
            });
            let pad = h + 0.05 * (mx - mn);
            let to_idx = |v: f64| (v - grid.origin[ax]) / h - 0.5;
            lo[ax] = to_idx(mn - pad).floor().max(0.0) as usize;
            hi[ax] = ((to_idx(mx + pad).ceil() + 1.0).max(0.0) as usize).min(grid.dims[ax]);
        }
        Ok(Self {
            id,
            c0: a.center,
            c1: b.center,
            n0,
            n1,
            e1: f0.e1,
            ring0,
            ring1,
            lo,
            hi,
        })
    }

    /// Distance to the nearer end center when `x` lies inside.
    fn contains(&self, x: &Point3) -> Option<f64> {
        let d0 = (x - self.c0).dot(&self.n0);
        if d0 < 0.0 {
            return None;
        }
        let d1 = (x - self.c1).dot(&self.n1);
        if d1 > 0.0 {
            return None;
        }
        let f = if d0 - d1 > 0.0 { d0 / (d0 - d1) } else { 0.0 };
        let c = self.c0 + (self.c1 - self.c0) * f;
        let n = (self.n0 + (self.n1 - self.n0) * f).normalize();
        let e1 = transport(&self.n0, &n, &self.e1);
        let e2 = n.cross(&e1);
        let q = x - c;
        let p = Point2::new(q.dot(&e1), q.dot(&e2));
        let ring: [Point2; KEYPOINTS] =
            std::array::from_fn(|i| self.ring0[i] + (self.ring1[i] - self.ring0[i]) * f);
        if !point_in_polygon(&p, &ring) {
            return None;
        }
        Some((x - self.c0).norm().min((x - self.c1).norm()))
    }
}

/// Label grid for the given `(id, sections)` yarns; 0 where no yarn is.
pub fn rasterize_sections(yarns: &[(u16, &[CrossSection])], grid: &Grid) -> Result<Vec<u16>> {
    let mut segments = Vec::new();
    for &(id, sections) in yarns {
        if id == 0 {
            return Err(Error::Domain(
                "yarn label 0 is reserved for the matrix".into(),
            ));
        }
        for w in sections.windows(2) {
            segments.push(Segment::new(id, &w[0], &w[1], grid)?);
        }
    }
    let [nx, ny, nz] = grid.dims;
    let mut by_plane: Vec<Vec<usize>> = vec![Vec::new(); nz];
    for (s, seg) in segments.iter().enumerate() {
        for plane in by_plane.iter_mut().take(seg.hi[2]).skip(seg.lo[2]) {
            plane.push(s);
        }
    }
    let mut labels = vec![0u16; nx * ny * nz];
    if labels.is_empty() {
        return Ok(labels);
    }
    par::for_each_chunk_mut(&mut labels, nx * ny, |k, plane| {
        let mut best = vec![f64::INFINITY; nx * ny];
        for &s in &by_plane[k] {
            let seg = &segments[s];
            for j in seg.lo[1]..seg.hi[1] {
                for i in seg.lo[0]..seg.hi[0] {
                    let Some(d) = seg.contains(&grid.center(i, j, k)) else {
                        continue;
                    };
                    let at = i + nx * j;
                    let cur = plane[at];
                    if cur == seg.id {
                        best[at] = best[at].min(d);
                    } else if d < best[at] || (d == best[at] && (cur == 0 || seg.id < cur)) {
                        best[at] = d;
                        plane[at] = seg.id;
                    }
                }
            }
        }
    });
    Ok(labels)
}
