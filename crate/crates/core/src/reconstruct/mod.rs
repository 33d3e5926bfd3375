//! Reconstruction of a meshed textile from per-slice detections: tracking,
//! gap completion, lifting and path fitting, and reinforcement and
//! composite meshes.

mod complete;
mod export;
mod fit;
mod mesh;
mod track;

pub use complete::complete_missing;
pub use export::{parse_obj, parse_vtk, write_obj, write_vtk};
pub use fit::{default_controls, lift_and_fit, lift_point, ReconstructedYarn, MIN_SECTIONS};
pub use mesh::{
    build_composite_mesh, build_surface_mesh, build_volume_mesh, matrix_fraction, Cell,
    QuadSurfaceMesh, VolumeMesh, MIN_FACE_AREA,
};
pub use track::{track_yarns, DiscardedTrack, Gap, TrackParams, YarnTrack};

use serde::{Deserialize, Serialize};

use crate::segmenter::DetectionSet;
use crate::synthgen::Family;
use crate::voxelizer::{Grid, SliceAxis};
use crate::{fsio, par, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ReconstructParams {
    #[serde(flatten)]
    pub track: TrackParams,
    /// Spline control count; `max(4, S/4)` when absent.
    pub n_controls: Option<usize>,
}

/// Per-yarn bookkeeping of what completion did.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YarnSummary {
    pub id: u32,
    pub family: Family,
    pub axis: SliceAxis,
    pub n_sections: usize,
    pub n_completed: usize,
    /// Interior gaps present before completion, all filled.
    pub filled_gaps: Vec<Gap>,
    /// Gaps at the track ends, left unfilled.
    pub boundary_gaps: Vec<Gap>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reconstruction {
    pub yarns: Vec<ReconstructedYarn>,
    pub summaries: Vec<YarnSummary>,
    pub discarded: Vec<DiscardedTrack>,
}

/// Track each set (sequential per axis), then complete and fit every track
/// in parallel. Ids run from 1, warp tracks first.
pub fn reconstruct_all(
    sets: &[DetectionSet],
    grid: &Grid,
    params: &ReconstructParams,
) -> Result<Reconstruction> {
    let mut ordered: Vec<&DetectionSet> = sets.iter().collect();
    ordered.sort_by_key(|s| crate::segmenter::transverse_family(s.axis));
    let mut tracks = Vec::new();
    let mut discarded = Vec::new();
    for set in ordered {
        if set.slices.iter().filter(|s| !s.is_empty()).count() < 2 {
            return Err(Error::InsufficientData(format!(
                "{} detections cover fewer than 2 slices",
                set.axis
            )));
        }
        let (t, d) = track_yarns(set, &params.track);
        tracks.extend(t);
        discarded.extend(d);
    }
    let indexed: Vec<(u32, YarnTrack)> = tracks
        .into_iter()
        .enumerate()
        .map(|(i, t)| (i as u32 + 1, t))
        .collect();
    let results = par::try_map(&indexed, |(id, raw)| {
        let done = complete_missing(raw);
        let yarn = lift_and_fit(&done, grid, *id, params.n_controls)?;
        let summary = YarnSummary {
            id: *id,
            family: raw.family,
            axis: raw.axis,
            n_sections: done.sections.len(),
            n_completed: done.completed.iter().filter(|&&c| c).count(),
            filled_gaps: raw.gaps.clone(),
            boundary_gaps: done.boundary_gaps.clone(),
        };
        Ok::<_, Error>((yarn, summary))
    })?;
    let (yarns, summaries) = results.into_iter().unzip();
    Ok(Reconstruction {
        yarns,
        summaries,
        discarded,
    })
}

pub fn yarns_to_json(yarns: &[ReconstructedYarn]) -> String {
    let mut s = serde_json::to_string_pretty(yarns).expect("yarns serialize");
    s.push('\n');
    s
}

pub fn yarns_from_json(text: &str, source: &str) -> Result<Vec<ReconstructedYarn>> {
    let yarns: Vec<ReconstructedYarn> =
        serde_json::from_str(text).map_err(|e| Error::parse(source, e))?;
    for y in &yarns {
        if y.sections.len() != y.completed.len() {
            return Err(Error::parse(
                source,
                format!("yarn {}: field completed has the wrong length", y.id),
            ));
        }
        if !y.sections.windows(2).all(|w| w[1].station > w[0].station) {
            return Err(Error::parse(
                source,
                format!("yarn {}: field sections has non-increasing stations", y.id),
            ));
        }
    }
    Ok(yarns)
}

pub fn read_yarns(path: &std::path::Path) -> Result<Vec<ReconstructedYarn>> {
    yarns_from_json(&fsio::read_string(path)?, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point3;

    #[test]
    fn batch_reconstruction_assigns_ids() {
        let set = track::tests::parallel_set(3, 20);
        let grid = Grid {
            dims: [20, 120, 60],
            voxel_size_um: 1.0,
            origin: Point3::origin(),
            unit_um: 1.0,
        };
        let r = reconstruct_all(&[set], &grid, &ReconstructParams::default()).unwrap();
        assert_eq!(
            r.yarns.iter().map(|y| y.id).collect::<Vec<_>>(),
            vec![1, 2, 3]
        );
        assert!(r
            .summaries
            .iter()
            .all(|s| s.n_sections == 20 && s.n_completed == 0));
        let text = yarns_to_json(&r.yarns);
        assert_eq!(yarns_from_json(&text, "y.json").unwrap(), r.yarns);
        let err = yarns_from_json("[{\"id\": 1}]", "y.json")
            .unwrap_err()
            .to_string();
        assert!(err.contains("y.json") && err.contains("family"), "{err}");
    }

    #[test]
    fn single_slice_input_is_insufficient() {
        let set = track::tests::parallel_set(2, 1);
        let grid = Grid {
            dims: [1, 80, 60],
            voxel_size_um: 1.0,
            origin: Point3::origin(),
            unit_um: 1.0,
        };
        assert!(matches!(
            reconstruct_all(&[set], &grid, &ReconstructParams::default()),
            Err(Error::InsufficientData(_))
        ));
    }
}
