//! Completion of interior gaps by keypoint-wise interpolation.

use super::track::YarnTrack;
use crate::geometry::{min_twist_offset, Point2, Point3, KEYPOINTS};
use crate::segmenter::SectionDetection;

/// Retained neighbors used on each side of a longer gap.
const SPLINE_NEIGHBORS: usize = 2;

/// Fill every interior gap. Single-slice gaps are interpolated linearly,
/// longer gaps by a natural cubic spline per keypoint channel through up to
/// two retained sections on each side, parameterized by slice index.
/// Boundary gaps are left as reported. Idempotent.
pub fn complete_missing(track: &YarnTrack) -> YarnTrack {
    if track.gaps.is_empty() {
        return track.clone();
    }
    let retained: Vec<usize> = (0..track.sections.len())
        .filter(|&i| !track.completed[i])
        .collect();
    let mut out: Vec<(SectionDetection, bool)> = Vec::with_capacity(track.n_slices);
    for (pos, sec) in track.sections.iter().enumerate() {
        out.push((sec.clone(), track.completed[pos]));
        let Some(next) = track.sections.get(pos + 1) else {
            break;
        };
        let (s0, s1) = (sec.slice_index, next.slice_index);
        if s1 == s0 + 1 {
            continue;
        }
        // neighbors among retained sections only, so repeated calls agree
        let left: Vec<usize> = retained.iter().copied().filter(|&i| i <= pos).collect();
        let right: Vec<usize> = retained.iter().copied().filter(|&i| i > pos).collect();
        let picks: Vec<usize> = if s1 == s0 + 2 {
            vec![pos, pos + 1]
        } else {
            let l = &left[left.len().saturating_sub(SPLINE_NEIGHBORS)..];
            let r = &right[..right.len().min(SPLINE_NEIGHBORS)];
            l.iter().chain(r).copied().collect()
        };
        let anchor = lift2(&track.sections[pos].contour);
        let knots: Vec<f64> = picks
            .iter()
            .map(|&i| track.sections[i].slice_index as f64)
            .collect();
        let rings: Vec<[Point2; KEYPOINTS]> = picks
            .iter()
            .map(|&i| {
                let c = &track.sections[i].contour;
                let k = min_twist_offset(&anchor, &lift2(c));
                std::array::from_fn(|j| c[(j + k) % KEYPOINTS])
            })
            .collect();
        let confidence = sec.confidence.min(next.confidence);
        let label = if sec.true_label == next.true_label {
            sec.true_label
        } else {
            None
        };
        for s in s0 + 1..s1 {
            let t = s as f64;
            let contour: [Point2; KEYPOINTS] = std::array::from_fn(|j| {
                let xs: Vec<f64> = rings.iter().map(|r| r[j].x).collect();
                let ys: Vec<f64> = rings.iter().map(|r| r[j].y).collect();
                Point2::new(natural_cubic(&knots, &xs, t), natural_cubic(&knots, &ys, t))
            });
            out.push((
                SectionDetection::from_contour(track.axis, s, contour, confidence, label),
                true,
            ));
        }
    }
    let (sections, completed) = out.into_iter().unzip();
    let mut t = YarnTrack {
        sections,
        completed,
        ..track.clone()
    };
    t.refresh_gaps();
    t
}

fn lift2(c: &[Point2; KEYPOINTS]) -> [Point3; KEYPOINTS] {
    c.map(|p| Point3::new(p.x, p.y, 0.0))
}

/// Natural cubic spline through `(x[i], y[i])` evaluated at `t`; linear for
/// two knots. `x` strictly increasing.
pub(crate) fn natural_cubic(x: &[f64], y: &[f64], t: f64) -> f64 {
    let n = x.len();
    debug_assert!(n >= 2 && y.len() == n);
    // second derivatives m[0] = m[n-1] = 0, tridiagonal solve for the rest
    let mut m = vec![0.0; n];
    if n > 2 {
        let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let k = n - 2;
        let mut diag = vec![0.0; k];
        let mut rhs = vec![0.0; k];
        for i in 0..k {
            diag[i] = 2.0 * (h[i] + h[i + 1]);
            rhs[i] = 6.0 * ((y[i + 2] - y[i + 1]) / h[i + 1] - (y[i + 1] - y[i]) / h[i]);
        }
        for i in 1..k {
            let w = h[i] / diag[i - 1];
            diag[i] -= w * h[i];
            rhs[i] -= w * rhs[i - 1];
        }
        for i in (0..k).rev() {
            let upper = if i + 1 < k { h[i + 1] * m[i + 2] } else { 0.0 };
            m[i + 1] = (rhs[i] - upper) / diag[i];
        }
    }
    let seg = (0..n - 1).find(|&i| t <= x[i + 1]).unwrap_or(n - 2);
    let (x0, x1) = (x[seg], x[seg + 1]);
    let h = x1 - x0;
    let (a, b) = ((x1 - t) / h, (t - x0) / h);
    a * y[seg]
        + b * y[seg + 1]
        + ((a * a * a - a) * m[seg] + (b * b * b - b) * m[seg + 1]) * h * h / 6.0
}
