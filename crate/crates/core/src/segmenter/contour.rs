//! Connected components and marching-squares boundary loops on label
//! images. Pixel `(u, v)` covers `[u, u+1] × [v, v+1]`; its center is at
//! `(u + 0.5, v + 0.5)`.

use std::collections::HashMap;

use crate::geometry::{signed_area, Point2};

/// One 8-connected region of equal non-zero label.
#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    pub label: u16,
    pub pixels: Vec<(usize, usize)>,
}

impl Component {
    pub fn area(&self) -> usize {
        self.pixels.len()
    }
}

/// 8-connected components of every non-zero label, in scan order of their
/// first pixel.
pub fn components(img: &[u16], width: usize, height: usize) -> Vec<Component> {
    let mut seen = vec![false; img.len()];
    let mut out = Vec::new();
    let mut stack = Vec::new();
    for start in 0..img.len() {
        let label = img[start];
        if label == 0 || seen[start] {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        let mut pixels = Vec::new();
        while let Some(p) = stack.pop() {
            let (u, v) = (p % width, p / width);
            pixels.push((u, v));
            for dv in -1i64..=1 {
                for du in -1i64..=1 {
                    let (nu, nv) = (u as i64 + du, v as i64 + dv);
                    if (du == 0 && dv == 0)
                        || nu < 0
                        || nv < 0
                        || nu >= width as i64
                        || nv >= height as i64
                    {
                        continue;
                    }
                    let q = nu as usize + width * nv as usize;
                    if !seen[q] && img[q] == label {
                        seen[q] = true;
                        stack.push(q);
                    }
                }
            }
        }
        pixels.sort_unstable_by_key(|&(u, v)| (v, u));
        out.push(Component { label, pixels });
    }
    out
}

/// Closed boundary loops of a pixel set at the half-way iso level between
/// inside and outside pixel centers. Diagonal saddles are resolved as
/// connected, matching 8-connectivity. Outer loops are counter-clockwise,
/// holes clockwise.
pub fn boundary_loops(pixels: &[(usize, usize)]) -> Vec<Vec<Point2>> {
    if pixels.is_empty() {
        return Vec::new();
    }
    let umin = pixels.iter().map(|p| p.0).min().unwrap();
    let vmin = pixels.iter().map(|p| p.1).min().unwrap();
    let w = pixels.iter().map(|p| p.0).max().unwrap() - umin + 1;
    let h = pixels.iter().map(|p| p.1).max().unwrap() - vmin + 1;
    let mut mask = vec![false; w * h];
    for &(u, v) in pixels {
        mask[(u - umin) + w * (v - vmin)] = true;
    }
    let inside = |x: i64, y: i64| {
        x >= 0
            && y >= 0
            && (x as usize) < w
            && (y as usize) < h
            && mask[x as usize + w * y as usize]
    };

    // vertices in doubled pixel-center coordinates; one outgoing edge each
    let mut next: HashMap<(i64, i64), (i64, i64)> = HashMap::new();
    for y in -1..h as i64 {
        for x in -1..w as i64 {
            // corners counter-clockwise, with the edge midpoint that follows each
            let corners = [(x, y), (x + 1, y), (x + 1, y + 1), (x, y + 1)];
            let vals = corners.map(|(cx, cy)| inside(cx, cy));
            if vals.iter().all(|&b| b) || vals.iter().all(|&b| !b) {
                continue;
            }
            let mid = |i: usize| {
                let (a, b) = (corners[i], corners[(i + 1) % 4]);
                (a.0 + b.0, a.1 + b.1)
            };
            for i in 0..4 {
                if vals[i] && !vals[(i + 1) % 4] {
                    // in -> out crossing; pair with the next out -> in crossing
                    let mut j = (i + 1) % 4;
                    while !(!vals[j] && vals[(j + 1) % 4]) {
                        j = (j + 1) % 4;
                    }
                    next.insert(mid(i), mid(j));
                }
            }
        }
    }

    let mut keys: Vec<(i64, i64)> = next.keys().copied().collect();
    keys.sort_unstable_by_key(|&(x, y)| (y, x));
    let mut used = std::collections::HashSet::new();
    let mut loops = Vec::new();
    for start in keys {
        if used.contains(&start) {
            continue;
        }
        let mut ring = Vec::new();
        let mut cur = start;
        while used.insert(cur) {
            ring.push(Point2::new(
                cur.0 as f64 / 2.0 + umin as f64 + 0.5,
                cur.1 as f64 / 2.0 + vmin as f64 + 0.5,
            ));
            cur = next[&cur];
        }
        loops.push(ring);
    }
    loops
}

/// The loop enclosing the largest area.
pub fn outer_boundary(pixels: &[(usize, usize)]) -> Option<Vec<Point2>> {
    boundary_loops(pixels)
        .into_iter()
        .filter(|l| l.len() >= 3)
        .max_by(|a, b| {
            signed_area(a)
                .abs()
                .partial_cmp(&signed_area(b).abs())
                .unwrap()
        })
}
