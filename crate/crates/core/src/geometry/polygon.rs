//! Closed planar polygons in local (u, v) coordinates.

use super::{Point2, Vector2};
use crate::{Error, Result};

/// Shoelace signed area; positive for counter-clockwise rings.
pub fn signed_area(ring: &[Point2]) -> f64 {
    let n = ring.len();
    let mut acc = 0.0;
    for i in 0..n {
        let (a, b) = (ring[i], ring[(i + 1) % n]);
        acc += a.x * b.y - b.x * a.y;
    }
    0.5 * acc
}

/// Mean of the ring vertices.
pub fn polygon_centroid(ring: &[Point2]) -> Point2 {
    let sum = ring.iter().fold(Vector2::zeros(), |acc, p| acc + p.coords);
    Point2::from(sum / ring.len() as f64)
}

fn orient(a: &Point2, b: &Point2, c: &Point2) -> f64 {
    (b - a).perp(&(c - a))
}

fn on_segment(a: &Point2, b: &Point2, p: &Point2) -> bool {
    p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
}

fn segments_intersect(a: &Point2, b: &Point2, c: &Point2, d: &Point2) -> bool {
    let (d1, d2) = (orient(c, d, a), orient(c, d, b));
    let (d3, d4) = (orient(a, b, c), orient(a, b, d));
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && on_segment(c, d, a))
        || (d2 == 0.0 && on_segment(c, d, b))
        || (d3 == 0.0 && on_segment(a, b, c))
        || (d4 == 0.0 && on_segment(a, b, d))
}

/// True when no two non-adjacent edges of the closed ring touch.
pub fn is_simple(ring: &[Point2]) -> bool {
    let n = ring.len();
    if n < 3 {
        return false;
    }
    for i in 0..n {
        let (a, b) = (ring[i], ring[(i + 1) % n]);
        if a == b {
            return false;
        }
        for j in i + 1..n {
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if adjacent {
                continue;
            }
            let (c, d) = (ring[j], ring[(j + 1) % n]);
            if segments_intersect(&a, &b, &c, &d) {
                return false;
            }
        }
    }
    true
}

fn cumulative_closed(ring: &[Point2]) -> (Vec<f64>, f64) {
    let n = ring.len();
    let mut cum = Vec::with_capacity(n + 1);
    let mut total = 0.0;
    cum.push(0.0);
    for i in 0..n {
        total += (ring[(i + 1) % n] - ring[i]).norm();
        cum.push(total);
    }
    (cum, total)
}

/// `n` points at equal arc-length spacing around a closed ring, the first at
/// arc-length offset `start` from vertex 0, following vertex order.
pub fn resample_closed(ring: &[Point2], n: usize, start: f64) -> Result<Vec<Point2>> {
    if n < 2 {
        return Err(Error::Domain(format!("resample count {n} < 2")));
    }
    let (cum, total) = cumulative_closed(ring);
    if !(total > 0.0) {
        return Err(Error::DegenerateGeometry(
            "cannot resample a zero-length contour".into(),
        ));
    }
    let m = ring.len();
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let s = (start + total * k as f64 / n as f64).rem_euclid(total);
        // largest i with cum[i] <= s
        let i = match cum.binary_search_by(|c| c.partial_cmp(&s).unwrap()) {
            Ok(i) => i.min(m - 1),
            Err(i) => (i - 1).min(m - 1),
        };
        let len = cum[i + 1] - cum[i];
        let f = if len > 0.0 { (s - cum[i]) / len } else { 0.0 };
        let (a, b) = (ring[i], ring[(i + 1) % m]);
        out.push(a + (b - a) * f);
    }
    Ok(out)
}

/// Canonical keypoint ring from a dense closed contour: counter-clockwise,
/// starting at the contour point of maximum u (the arc-length midpoint of
/// the extreme run when several vertices tie), `n` points at equal
/// arc-length spacing.
pub fn canonical_resample_closed(contour: &[Point2], n: usize) -> Result<Vec<Point2>> {
    if contour.len() < 3 {
        return Err(Error::InvalidContour(format!(
            "closed contour needs at least 3 points, got {}",
            contour.len()
        )));
    }
    let area = signed_area(contour);
    if area == 0.0 {
        return Err(Error::DegenerateGeometry("contour encloses no area".into()));
    }
    let ring: Vec<Point2> = if area > 0.0 {
        contour.to_vec()
    } else {
        contour.iter().rev().copied().collect()
    };
    let m = ring.len();
    let (cum, total) = cumulative_closed(&ring);
    let scale = ring
        .iter()
        .fold(0.0_f64, |a, p| a.max(p.x.abs()).max(p.y.abs()))
        .max(1.0);
    let eps = 1e-9 * scale;
    let best = (0..m)
        .max_by(|&i, &j| {
            ring[i]
                .x
                .partial_cmp(&ring[j].x)
                .unwrap()
                .then(ring[j].y.partial_cmp(&ring[i].y).unwrap())
        })
        .unwrap();
    let umax = ring[best].x;
    let mut first = best;
    let mut steps_back = 0;
    while steps_back < m - 1 && ring[(first + m - 1) % m].x >= umax - eps {
        first = (first + m - 1) % m;
        steps_back += 1;
    }
    let mut last = best;
    let mut steps_fwd = 0;
    while steps_back + steps_fwd < m - 1 && ring[(last + 1) % m].x >= umax - eps {
        last = (last + 1) % m;
        steps_fwd += 1;
    }
    let s_first = cum[first];
    let mut s_last = cum[last];
    if s_last < s_first {
        s_last += total;
    }
    let start = 0.5 * (s_first + s_last);
    resample_closed(&ring, n, start)
}

/// Reorder an existing ring into canonical order without resampling:
/// counter-clockwise, index 0 at the vertex of maximum u.
pub fn canonicalize_ring(ring: &[Point2]) -> Vec<Point2> {
    let mut r: Vec<Point2> = if signed_area(ring) >= 0.0 {
        ring.to_vec()
    } else {
        ring.iter().rev().copied().collect()
    };
    if let Some(best) = (0..r.len()).max_by(|&i, &j| {
        r[i].x
            .partial_cmp(&r[j].x)
            .unwrap()
            .then(r[j].y.partial_cmp(&r[i].y).unwrap())
    }) {
        r.rotate_left(best);
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn circle(n: usize, r: f64) -> Vec<Point2> {
        (0..n)
            .map(|i| {
                let t = 2.0 * PI * i as f64 / n as f64;
                Point2::new(r * t.cos(), r * t.sin())
            })
            .collect()
    }

    #[test]
    fn dense_circle_gives_regular_decagon() {
        let ring = canonical_resample_closed(&circle(20_000, 1.0), 10).unwrap();
        let chords: Vec<f64> = (0..10)
            .map(|i| (ring[(i + 1) % 10] - ring[i]).norm())
            .collect();
        let expected = 2.0 * (PI / 10.0).sin();
        for c in chords {
            assert!((c - expected).abs() < 1e-3, "chord {c} vs {expected}");
        }
        assert_relative_eq!(ring[0].x, 1.0, epsilon = 1e-9);
        assert_relative_eq!(ring[0].y, 0.0, epsilon = 1e-9);
    }

    #[test]
    fn canonical_order_is_ccw_from_any_input_orientation() {
        let cw: Vec<Point2> = circle(400, 2.0).into_iter().rev().collect();
        let ring = canonical_resample_closed(&cw, 10).unwrap();
        assert!(signed_area(&ring) > 0.0);
        // second keypoint is counter-clockwise from the first
        assert!(ring[1].y > 0.0);
    }

    #[test]
    fn flat_extreme_run_starts_at_its_midpoint() {
        let square = vec![
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(1.0, 0.5),
            Point2::new(1.0, 1.0),
            Point2::new(0.0, 1.0),
        ];
        let ring = canonical_resample_closed(&square, 4).unwrap();
        assert_relative_eq!(ring[0].x, 1.0);
        assert_relative_eq!(ring[0].y, 0.5);
    }

    #[test]
    fn simple_and_self_intersecting() {
        let sq = vec![
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(1.0, 1.0),
            Point2::new(0.0, 1.0),
        ];
        assert!(is_simple(&sq));
        let bow = vec![
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 1.0),
            Point2::new(1.0, 0.0),
            Point2::new(0.0, 1.0),
        ];
        assert!(!is_simple(&bow));
    }

    #[test]
    fn canonicalize_rotates_to_max_u() {
        let ring = circle(10, 1.0);
        let mut shifted = ring.clone();
        shifted.rotate_left(3);
        let c = canonicalize_ring(&shifted);
        assert_eq!(c, ring);
    }
}
