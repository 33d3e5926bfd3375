//! 2.5D slice stacks. An XZ slice fixes `y` (pixels `u = x`, `v = z`), a YZ
//! slice fixes `x` (pixels `u = y`, `v = z`); pixel `(u, v)` is stored at
//! `u + width·v`.

use serde::{Deserialize, Serialize};

use super::Volume;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SliceAxis {
    XZ,
    YZ,
}

impl SliceAxis {
    pub fn as_str(&self) -> &'static str {
        match self {
            SliceAxis::XZ => "XZ",
            SliceAxis::YZ => "YZ",
        }
    }

    /// Volume axis the slice index runs along (1 = Y, 0 = X).
    pub fn normal_axis(&self) -> usize {
        match self {
            SliceAxis::XZ => 1,
            SliceAxis::YZ => 0,
        }
    }

    /// Volume axis of the in-slice `u` coordinate.
    pub fn u_axis(&self) -> usize {
        match self {
            SliceAxis::XZ => 0,
            SliceAxis::YZ => 1,
        }
    }

    /// Voxel `(i, j, k)` of in-slice pixel `(u, v)` on slice `index`.
    pub fn voxel(&self, index: usize, u: usize, v: usize) -> [usize; 3] {
        match self {
            SliceAxis::XZ => [u, index, v],
            SliceAxis::YZ => [index, u, v],
        }
    }
}

impl std::fmt::Display for SliceAxis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for SliceAxis {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_uppercase().as_str() {
            "XZ" => Ok(SliceAxis::XZ),
            "YZ" => Ok(SliceAxis::YZ),
            _ => Err(format!("unknown slice axis {s:?} (expected XZ or YZ)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SliceDataset<T> {
    pub axis: SliceAxis,
    pub index_origin: usize,
    pub width: usize,
    pub height: usize,
    pub slices: Vec<Vec<T>>,
}

impl<T> SliceDataset<T> {
    pub fn len(&self) -> usize {
        self.slices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slices.is_empty()
    }
}

/// Number of slices a volume of `dims` yields along `axis`.
pub fn slice_count(dims: [usize; 3], axis: SliceAxis) -> usize {
    dims[axis.normal_axis()]
}

pub fn extract_slices<T: Copy>(volume: &Volume<T>, axis: SliceAxis) -> SliceDataset<T> {
    let [nx, ny, nz] = volume.grid.dims;
    let width = volume.grid.dims[axis.u_axis()];
    let slices = (0..slice_count(volume.grid.dims, axis))
        .map(|s| {
            let mut img = Vec::with_capacity(width * nz);
            for k in 0..nz {
                match axis {
                    SliceAxis::XZ => {
                        let row = nx * (s + ny * k);
                        img.extend_from_slice(&volume.data[row..row + nx]);
                    }
                    SliceAxis::YZ => {
                        img.extend((0..ny).map(|j| volume.data[s + nx * (j + ny * k)]))
                    }
                }
            }
            img
        })
        .collect();
    SliceDataset {
        axis,
        index_origin: 0,
        width,
        height: nz,
        slices,
    }
}

/// Inverse of [`extract_slices`]: volume dims and X-fastest data.
pub fn restack<T: Copy + Default>(ds: &SliceDataset<T>) -> ([usize; 3], Vec<T>) {
    let n = ds.slices.len();
    let dims = match ds.axis {
        SliceAxis::XZ => [ds.width, n, ds.height],
        SliceAxis::YZ => [n, ds.width, ds.height],
    };
    let [nx, ny, _] = dims;
    let mut data = vec![T::default(); dims.iter().product()];
    for (s, img) in ds.slices.iter().enumerate() {
        for v in 0..ds.height {
            for u in 0..ds.width {
                let [i, j, k] = ds.axis.voxel(s, u, v);
                data[i + nx * (j + ny * k)] = img[u + ds.width * v];
            }
        }
    }
    (dims, data)
}
