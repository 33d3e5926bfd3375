//! Lifting of in-slice keypoints to 3D and path fitting.

use serde::{Deserialize, Serialize};

use super::track::YarnTrack;
use crate::geometry::{
    bspline_fit_with, BSplineCurve, CrossSection, FitOptions, Point3, Polyline, DEFAULT_DEGREE,
    KEYPOINTS,
};
use crate::synthgen::Family;
use crate::voxelizer::{Grid, SliceAxis};
use crate::{Error, Result};

/// Minimum sections for a fit.
pub const MIN_SECTIONS: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructedYarn {
    pub id: u32,
    pub family: Family,
    pub path: BSplineCurve,
    /// Ordered along the path; stations strictly increasing.
    pub sections: Vec<CrossSection>,
    pub completed: Vec<bool>,
    /// Majority oracle label of the source detections, for evaluation only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub true_label: Option<u32>,
}

impl ReconstructedYarn {
    pub fn centers(&self) -> Vec<Point3> {
        self.sections.iter().map(|s| s.center).collect()
    }
}

/// Default control count `max(4, S/4)`.
pub fn default_controls(n_sections: usize) -> usize {
    (n_sections / 4).max(4)
}

/// World position of in-slice point `(u, v)` on slice `index`.
pub fn lift_point(grid: &Grid, axis: SliceAxis, index: usize, u: f64, v: f64) -> Point3 {
    let h = grid.h();
    let mut p = grid.origin;
    p[axis.normal_axis()] += (index as f64 + 0.5) * h;
    p[axis.u_axis()] += u * h;
    p[2] += v * h;
    p
}

/// Lift every section to 3D, fit a cubic B-spline through the centers and
/// restation the sections by arc length along it. Rings are oriented
/// counter-clockwise about the direction of travel.
pub fn lift_and_fit(
    track: &YarnTrack,
    grid: &Grid,
    id: u32,
    n_controls: Option<usize>,
) -> Result<ReconstructedYarn> {
    let s = track.sections.len();
    if s < MIN_SECTIONS {
        return Err(Error::InsufficientData(format!(
            "track has {s} sections, at least {MIN_SECTIONS} are needed"
        )));
    }
    if !track.gaps.is_empty() {
        return Err(Error::Domain("track has unfilled interior gaps".into()));
    }
    let mut sections: Vec<CrossSection> = track
        .sections
        .iter()
        .map(|d| {
            CrossSection::from_contour(
                d.contour
                    .map(|q| lift_point(grid, track.axis, d.slice_index, q.x, q.y)),
                0.0,
            )
        })
        .collect();
    let dir = sections[s - 1].center - sections[0].center;
    if sections[0].newell_normal().dot(&dir) < 0.0 {
        for sec in &mut sections {
            let c = sec.contour;
            sec.contour = std::array::from_fn(|k| c[(KEYPOINTS - k) % KEYPOINTS]);
        }
    }
    let centers = Polyline::new(sections.iter().map(|c| c.center).collect())?;
    let nc = n_controls
        .unwrap_or_else(|| default_controls(s))
        .clamp(DEFAULT_DEGREE + 1, s);
    // orthogonal refinement chases detection noise and can fold the path
    let opts = FitOptions {
        param_correction_iters: 0,
        ..FitOptions::new(DEFAULT_DEGREE, nc)
    };
    let path = bspline_fit_with(&centers, opts)?;
    let mut last = f64::NEG_INFINITY;
    for sec in &mut sections {
        let st = path.arc_length_at(path.closest_param(&sec.center));
        if st <= last {
            return Err(Error::DegenerateGeometry(format!(
                "stations do not increase at arc length {st:.4}"
            )));
        }
        sec.station = st;
        last = st;
    }
    Ok(ReconstructedYarn {
        id,
        family: track.family,
        path,
        sections,
        completed: track.completed.clone(),
        true_label: track.majority_label(),
    })
}
