//! Detections as JSON lines, one record per detection.

use std::collections::BTreeMap;

use super::{DetectionSet, Provenance, SectionDetection};
use crate::geometry::Tolerances;
use crate::voxelizer::{slice_count, SliceAxis};
use crate::{Error, Result};

pub fn to_jsonl<'a>(detections: impl IntoIterator<Item = &'a SectionDetection>) -> String {
    let mut out = String::new();
    for d in detections {
        out.push_str(&serde_json::to_string(d).expect("detections serialize"));
        out.push('\n');
    }
    out
}

/// Parse records; errors name `source`, the line and the offending field.
/// Each record must satisfy the center-centroid and simplicity invariants.
pub fn parse_jsonl(text: &str, source: &str) -> Result<Vec<SectionDetection>> {
    let tol = Tolerances::default().centroid;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let at = format!("{source}:{}", i + 1);
        let d: SectionDetection = serde_json::from_str(line).map_err(|e| Error::parse(&at, e))?;
        d.validate(f64::INFINITY, f64::INFINITY, tol)
            .map_err(|e| Error::parse(&at, format!("field contour/center: {e}")))?;
        out.push(d);
    }
    Ok(out)
}

/// Group records into one set per axis present. Slice counts come from the
/// volume `dims` when known, else from the largest index seen; slice sizes
/// likewise.
pub fn group_by_axis(
    records: Vec<SectionDetection>,
    dims: Option<[usize; 3]>,
    provenance: Provenance,
) -> Vec<DetectionSet> {
    let mut by_axis: BTreeMap<SliceAxis, Vec<SectionDetection>> = BTreeMap::new();
    for r in records {
        by_axis.entry(r.axis).or_default().push(r);
    }
    by_axis
        .into_iter()
        .map(|(axis, recs)| {
            let (n, width, height) = match dims {
                Some(d) => (slice_count(d, axis), d[axis.u_axis()], d[2]),
                None => {
                    let n = recs.iter().map(|r| r.slice_index + 1).max().unwrap_or(0);
                    let ext = |f: fn(&crate::geometry::Point2) -> f64| {
                        recs.iter()
                            .flat_map(|r| r.contour.iter())
                            .map(f)
                            .fold(0.0, f64::max)
                            .ceil() as usize
                    };
                    (n, ext(|p| p.x), ext(|p| p.y))
                }
            };
            let mut slices =
                vec![Vec::new(); n.max(recs.iter().map(|r| r.slice_index + 1).max().unwrap_or(0))];
            for r in recs {
                let s = r.slice_index;
                slices[s].push(r);
            }
            DetectionSet {
                axis,
                width,
                height,
                slices,
                provenance,
            }
        })
        .collect()
}
