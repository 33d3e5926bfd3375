//! Per-slice yarn instance detections in keypoint form: 10 contour
//! keypoints plus their centroid, produced by an oracle that reads label
//! slices, and a seeded degradation that emulates detector errors.
//!
//! Keypoints are continuous in-slice coordinates in voxel units, pixel
//! `(u, v)` spanning `[u, u+1] × [v, v+1]`.

mod contour;
mod jsonl;

pub use contour::{boundary_loops, components, outer_boundary, Component};
pub use jsonl::{group_by_axis, parse_jsonl, to_jsonl};

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::geometry::{
    canonical_resample_closed, is_simple, polygon_centroid, Point2, Vector2, KEYPOINTS,
};
use crate::synthgen::Family;
use crate::voxelizer::{SliceAxis, SliceDataset};
use crate::{par, seeds, Error, Result};

/// Components smaller than this many pixels are skipped.
pub const DEFAULT_MIN_AREA: usize = 12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectionDetection {
    pub axis: SliceAxis,
    pub slice_index: usize,
    pub contour: [Point2; KEYPOINTS],
    pub center: Point2,
    pub confidence: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub true_label: Option<u32>,
}

impl SectionDetection {
    /// Detection whose center is the centroid of `contour`.
    pub fn from_contour(
        axis: SliceAxis,
        slice_index: usize,
        contour: [Point2; KEYPOINTS],
        confidence: f64,
        true_label: Option<u32>,
    ) -> Self {
        Self {
            axis,
            slice_index,
            center: polygon_centroid(&contour),
            contour,
            confidence,
            true_label,
        }
    }

    /// Check the center-centroid, simplicity and bounds invariants.
    pub fn validate(&self, width: f64, height: f64, centroid_tol: f64) -> Result<()> {
        let off = (polygon_centroid(&self.contour) - self.center).norm();
        if off > centroid_tol {
            return Err(Error::InvalidContour(format!(
                "center is {off:.3} from the contour centroid"
            )));
        }
        if !is_simple(&self.contour) {
            return Err(Error::InvalidContour("contour self-intersects".into()));
        }
        let inside = |p: &Point2| p.x >= 0.0 && p.y >= 0.0 && p.x <= width && p.y <= height;
        if !self.contour.iter().all(inside) {
            return Err(Error::InvalidContour("keypoint outside the slice".into()));
        }
        if !(0.0..=1.0).contains(&self.confidence) {
            return Err(Error::InvalidContour("confidence outside [0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Oracle,
    Degraded,
    External,
}

/// Detections of one slice axis, indexed by slice.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionSet {
    pub axis: SliceAxis,
    pub width: usize,
    pub height: usize,
    pub slices: Vec<Vec<SectionDetection>>,
    pub provenance: Provenance,
}

impl DetectionSet {
    pub fn n_slices(&self) -> usize {
        self.slices.len()
    }

    pub fn count(&self) -> usize {
        self.slices.iter().map(Vec::len).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = &SectionDetection> {
        self.slices.iter().flatten()
    }
}

/// Component below the minimum area.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkipRecord {
    pub axis: SliceAxis,
    pub slice_index: usize,
    pub label: u32,
    pub area: usize,
}

/// One detection per 8-connected component of each non-zero label, in
/// component scan order. The component border is traced by marching
/// squares and resampled to the canonical 10-keypoint ring.
pub fn detect_oracle(
    img: &[u16],
    width: usize,
    height: usize,
    axis: SliceAxis,
    slice_index: usize,
    min_area: usize,
) -> (Vec<SectionDetection>, Vec<SkipRecord>) {
    let mut found = Vec::new();
    let mut skipped = Vec::new();
    for comp in components(img, width, height) {
        let skip = SkipRecord {
            axis,
            slice_index,
            label: comp.label as u32,
            area: comp.area(),
        };
        if comp.area() < min_area {
            skipped.push(skip);
            continue;
        }
        let ring = outer_boundary(&comp.pixels)
            .and_then(|dense| canonical_resample_closed(&dense, KEYPOINTS).ok())
            .filter(|r| is_simple(r));
        match ring {
            Some(r) => {
                let contour: [Point2; KEYPOINTS] = r.try_into().expect("resampled to KEYPOINTS");
                found.push(SectionDetection::from_contour(
                    axis,
                    slice_index,
                    contour,
                    1.0,
                    Some(comp.label as u32),
                ));
            }
            None => skipped.push(skip),
        }
    }
    (found, skipped)
}

/// Which yarns a detector reports on a slice axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum FamilyFilter {
    /// Every labeled component.
    All,
    /// Only yarns cut across: warp on YZ slices, weft on XZ slices.
    #[default]
    Transverse,
}

/// Family of the yarns cut across by slices of `axis`.
pub fn transverse_family(axis: SliceAxis) -> Family {
    match axis {
        SliceAxis::YZ => Family::Warp,
        SliceAxis::XZ => Family::Weft,
    }
}

/// Run the oracle on every slice of a label dataset.
pub fn detect_batch(
    dataset: &SliceDataset<u16>,
    label_map: &BTreeMap<u32, Family>,
    filter: FamilyFilter,
    min_area: usize,
) -> (DetectionSet, Vec<SkipRecord>) {
    let keep = transverse_family(dataset.axis);
    let per_slice = par::map_range(dataset.len(), |s| {
        let img: Vec<u16> = match filter {
            FamilyFilter::All => dataset.slices[s].clone(),
            FamilyFilter::Transverse => dataset.slices[s]
                .iter()
                .map(|&l| match label_map.get(&(l as u32)) {
                    Some(f) if *f == keep => l,
                    _ => 0,
                })
                .collect(),
        };
        detect_oracle(
            &img,
            dataset.width,
            dataset.height,
            dataset.axis,
            dataset.index_origin + s,
            min_area,
        )
    });
    let mut slices = Vec::with_capacity(per_slice.len());
    let mut skipped = Vec::new();
    for (d, s) in per_slice {
        slices.push(d);
        skipped.extend(s);
    }
    (
        DetectionSet {
            axis: dataset.axis,
            width: dataset.width,
            height: dataset.height,
            slices,
            provenance: Provenance::Oracle,
        },
        skipped,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DegradeParams {
    pub keypoint_jitter_sigma: f64,
    pub section_dropout_p: f64,
    pub confidence_floor: f64,
    pub seed: u64,
}

impl Default for DegradeParams {
    fn default() -> Self {
        Self {
            keypoint_jitter_sigma: 0.5,
            section_dropout_p: 0.2,
            confidence_floor: 0.1,
            seed: 0,
        }
    }
}

impl DegradeParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.section_dropout_p) {
            return Err(Error::Domain("section_dropout_p must lie in [0, 1]".into()));
        }
        if !(0.0..=1.0).contains(&self.confidence_floor) {
            return Err(Error::Domain("confidence_floor must lie in [0, 1]".into()));
        }
        if !(self.keypoint_jitter_sigma >= 0.0) || !self.keypoint_jitter_sigma.is_finite() {
            return Err(Error::Domain("keypoint_jitter_sigma must be >= 0".into()));
        }
        Ok(())
    }
}

fn jitter(
    det: &SectionDetection,
    normal: &Normal<f64>,
    rng: &mut ChaCha8Rng,
    width: f64,
    height: f64,
) -> Option<[Point2; KEYPOINTS]> {
    for _ in 0..8 {
        let c = det.contour.map(|p| {
            let q = p + Vector2::new(normal.sample(rng), normal.sample(rng));
            Point2::new(q.x.clamp(0.0, width), q.y.clamp(0.0, height))
        });
        if is_simple(&c) {
            return Some(c);
        }
    }
    None
}

/// Drop each detection with probability `p`, jitter surviving keypoints,
/// recompute centers as centroids. Confidence decays with the mean keypoint
/// displacement `d` as `exp(-d / 2)`, floored. Each slice draws from its own
/// seeded stream; a jittered contour that self-intersects is redrawn up to
/// 8 times and otherwise kept unjittered.
pub fn degrade(set: &DetectionSet, params: &DegradeParams) -> Result<DetectionSet> {
    params.validate()?;
    let normal =
        Normal::new(0.0, params.keypoint_jitter_sigma).map_err(|e| Error::Domain(e.to_string()))?;
    let stream = seeds::derive(params.seed, set.axis.as_str());
    let (w, h) = (set.width as f64, set.height as f64);
    let slices = par::map_range(set.slices.len(), |s| {
        let mut rng = ChaCha8Rng::seed_from_u64(seeds::derive_indexed(stream, s as u64));
        let mut out = Vec::new();
        for det in &set.slices[s] {
            if rng.random::<f64>() < params.section_dropout_p {
                continue;
            }
            if params.keypoint_jitter_sigma == 0.0 {
                out.push(SectionDetection {
                    confidence: det.confidence.max(params.confidence_floor),
                    ..det.clone()
                });
                continue;
            }
            let contour = jitter(det, &normal, &mut rng, w, h).unwrap_or(det.contour);
            let moved = contour
                .iter()
                .zip(&det.contour)
                .map(|(a, b)| (a - b).norm())
                .sum::<f64>()
                / KEYPOINTS as f64;
            let confidence = (det.confidence * (-moved / 2.0).exp()).max(params.confidence_floor);
            out.push(SectionDetection::from_contour(
                det.axis,
                det.slice_index,
                contour,
                confidence,
                det.true_label,
            ));
        }
        out
    });
    Ok(DetectionSet {
        slices,
        provenance: Provenance::Degraded,
        ..set.clone()
    })
}
