//! Slice-to-slice association of detections into yarn tracks.

use serde::{Deserialize, Serialize};

use crate::segmenter::{transverse_family, DetectionSet, SectionDetection};
use crate::synthgen::Family;
use crate::voxelizer::SliceAxis;

/// Inclusive run of missing slice indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Gap {
    pub start: usize,
    pub end: usize,
}

impl Gap {
    pub fn len(&self) -> usize {
        self.end + 1 - self.start
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YarnTrack {
    pub axis: SliceAxis,
    pub family: Family,
    /// Strictly increasing slice indices.
    pub sections: Vec<SectionDetection>,
    /// Parallel to `sections`: true for sections synthesized by completion.
    pub completed: Vec<bool>,
    /// Missing runs between retained sections.
    pub gaps: Vec<Gap>,
    /// Missing runs before the first or after the last retained section.
    pub boundary_gaps: Vec<Gap>,
    pub n_slices: usize,
}

impl YarnTrack {
    pub fn new(axis: SliceAxis, n_slices: usize, sections: Vec<SectionDetection>) -> Self {
        let mut t = Self {
            axis,
            family: transverse_family(axis),
            completed: vec![false; sections.len()],
            sections,
            gaps: Vec::new(),
            boundary_gaps: Vec::new(),
            n_slices,
        };
        t.refresh_gaps();
        t
    }

    pub fn slice_indices(&self) -> Vec<usize> {
        self.sections.iter().map(|s| s.slice_index).collect()
    }

    pub fn first_slice(&self) -> Option<usize> {
        self.sections.first().map(|s| s.slice_index)
    }

    pub fn last_slice(&self) -> Option<usize> {
        self.sections.last().map(|s| s.slice_index)
    }

    /// Recompute both gap lists from the section indices.
    pub fn refresh_gaps(&mut self) {
        self.gaps.clear();
        self.boundary_gaps.clear();
        let idx = self.slice_indices();
        let (Some(&first), Some(&last)) = (idx.first(), idx.last()) else {
            return;
        };
        if first > 0 {
            self.boundary_gaps.push(Gap {
                start: 0,
                end: first - 1,
            });
        }
        for w in idx.windows(2) {
            if w[1] > w[0] + 1 {
                self.gaps.push(Gap {
                    start: w[0] + 1,
                    end: w[1] - 1,
                });
            }
        }
        if last + 1 < self.n_slices {
            self.boundary_gaps.push(Gap {
                start: last + 1,
                end: self.n_slices - 1,
            });
        }
    }

    /// Most frequent oracle label among retained sections.
    pub fn majority_label(&self) -> Option<u32> {
        let mut counts = std::collections::BTreeMap::new();
        for s in &self.sections {
            if let Some(l) = s.true_label {
                *counts.entry(l).or_insert(0usize) += 1;
            }
        }
        counts
            .into_iter()
            .max_by_key(|&(l, c)| (c, std::cmp::Reverse(l)))
            .map(|(l, _)| l)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrackParams {
    /// Largest center displacement accepted between associated sections.
    pub d_gate: f64,
    /// Tracks with fewer sections are discarded.
    pub l_min: usize,
    /// A track is closed after this many consecutive slices without a match.
    pub max_gap: usize,
}

impl Default for TrackParams {
    fn default() -> Self {
        Self::for_ellipse(12.0, 5.0)
    }
}

impl TrackParams {
    /// Gate of 1.5·max(a, b).
    pub fn for_ellipse(a: f64, b: f64) -> Self {
        Self {
            d_gate: 1.5 * a.max(b),
            l_min: 4,
            max_gap: 8,
        }
    }
}

/// Track shorter than `l_min`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscardedTrack {
    pub axis: SliceAxis,
    pub first_slice: usize,
    pub len: usize,
}

/// Greedy nearest-center association in slice order. Each slice's
/// detections are matched one-to-one to open tracks by increasing center
/// distance within `d_gate`; the rest seed new tracks. Oracle labels are
/// not consulted.
pub fn track_yarns(
    set: &DetectionSet,
    params: &TrackParams,
) -> (Vec<YarnTrack>, Vec<DiscardedTrack>) {
    let mut tracks: Vec<Vec<SectionDetection>> = Vec::new();
    for (s, dets) in set.slices.iter().enumerate() {
        let open: Vec<usize> = (0..tracks.len())
            .filter(|&t| {
                let last = tracks[t]
                    .last()
                    .expect("tracks are never empty")
                    .slice_index;
                last < s && s - last <= params.max_gap + 1
            })
            .collect();
        let mut pairs = Vec::new();
        for &t in &open {
            let c = tracks[t].last().unwrap().center;
            for (d, det) in dets.iter().enumerate() {
                let dist = (det.center - c).norm();
                if dist <= params.d_gate {
                    pairs.push((dist, t, d));
                }
            }
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let mut track_used = vec![false; tracks.len()];
        let mut det_used = vec![false; dets.len()];
        for (_, t, d) in pairs {
            if !track_used[t] && !det_used[d] {
                track_used[t] = true;
                det_used[d] = true;
                tracks[t].push(dets[d].clone());
            }
        }
        for (d, det) in dets.iter().enumerate() {
            if !det_used[d] {
                tracks.push(vec![det.clone()]);
            }
        }
    }
    let mut kept = Vec::new();
    let mut discarded = Vec::new();
    for t in tracks {
        if t.len() < params.l_min {
            log::info!(
                "discarding {} track starting at slice {} with {} sections",
                set.axis,
                t[0].slice_index,
                t.len()
            );
            discarded.push(DiscardedTrack {
                axis: set.axis,
                first_slice: t[0].slice_index,
                len: t.len(),
            });
        } else {
            kept.push(YarnTrack::new(set.axis, set.n_slices(), t));
        }
    }
    (kept, discarded)
}
