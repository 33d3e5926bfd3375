//! Label volumes from parametric yarns, 2.5D slice datasets and procedural
//! pseudo-CT rendering.
//!
//! Voxel `(i, j, k)` has its center at `origin + (i + 0.5, j + 0.5, k + 0.5)·h`
//! in model units, where `h = voxel_size_um / unit_um`; storage is X-fastest,
//! `index = i + nx·(j + ny·k)`.

mod io;
mod loft;
mod render;
mod slices;

pub use io::{read_header, read_volume, sidecar_path, write_header, write_volume, Voxel};
pub use loft::rasterize_sections;
pub use render::{render_slice, render_volume, RenderParams};
pub use slices::{extract_slices, restack, slice_count, SliceAxis, SliceDataset};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::geometry::{Aabb, Point3};
use crate::synthgen::{Family, TextileModel};
use crate::{Error, Result};

/// Default voxel budget: 2^28 voxels.
pub const DEFAULT_BUDGET: u64 = 1 << 28;

pub const AXIS_CONVENTION: &str =
    "x-fastest; index = x + nx*(y + ny*z); X warp, Y weft, Z thickness";

/// Placement and resolution of a voxel grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub dims: [usize; 3],
    pub voxel_size_um: f64,
    /// Corner of voxel (0, 0, 0), model units.
    pub origin: Point3,
    pub unit_um: f64,
}

impl Grid {
    /// Grid covering `bbox`: `dims = max(1, round(extent / h))` per axis.
    pub fn for_bbox(bbox: &Aabb, unit_um: f64, voxel_size_um: f64) -> Result<Self> {
        if !(voxel_size_um > 0.0) || !voxel_size_um.is_finite() {
            return Err(Error::Domain(format!(
                "voxel size {voxel_size_um} must be positive"
            )));
        }
        if !(unit_um > 0.0) {
            return Err(Error::Domain(format!(
                "unit size {unit_um} must be positive"
            )));
        }
        let h = voxel_size_um / unit_um;
        let e = bbox.extent();
        if !(0..3).all(|i| e[i].is_finite() && e[i] >= 0.0) {
            return Err(Error::Domain("bounding box is empty or not finite".into()));
        }
        let dims = [0, 1, 2].map(|i| ((e[i] / h).round() as usize).max(1));
        Ok(Self {
            dims,
            voxel_size_um,
            origin: bbox.min,
            unit_um,
        })
    }

    /// Voxel edge length in model units.
    pub fn h(&self) -> f64 {
        self.voxel_size_um / self.unit_um
    }

    pub fn len(&self) -> u64 {
        self.dims.iter().map(|&d| d as u64).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    pub fn center(&self, i: usize, j: usize, k: usize) -> Point3 {
        let h = self.h();
        self.origin + nalgebra::Vector3::new(i as f64 + 0.5, j as f64 + 0.5, k as f64 + 0.5) * h
    }

    pub fn check_budget(&self, budget: u64) -> Result<()> {
        let requested = self.len();
        if requested > budget {
            return Err(Error::BudgetExceeded { requested, budget });
        }
        Ok(())
    }
}

/// Dense voxel grid with the yarn-id to family map of its source model.
#[derive(Debug, Clone, PartialEq)]
pub struct Volume<T> {
    pub grid: Grid,
    pub label_map: BTreeMap<u32, Family>,
    pub data: Vec<T>,
}

pub type LabelVolume = Volume<u16>;
pub type GrayVolume = Volume<f32>;

impl<T: Copy> Volume<T> {
    pub fn dims(&self) -> [usize; 3] {
        self.grid.dims
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> T {
        self.data[self.grid.index(i, j, k)]
    }
}

/// On-disk sidecar describing a raw volume.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolumeHeader {
    pub dims: [usize; 3],
    pub voxel_size_um: f64,
    pub dtype: String,
    pub axis_convention: String,
    pub origin: [f64; 3],
    pub unit_um: f64,
    pub label_map: BTreeMap<u32, Family>,
}

impl VolumeHeader {
    pub fn new(grid: &Grid, dtype: &str, label_map: BTreeMap<u32, Family>) -> Self {
        Self {
            dims: grid.dims,
            voxel_size_um: grid.voxel_size_um,
            dtype: dtype.to_string(),
            axis_convention: AXIS_CONVENTION.to_string(),
            origin: [grid.origin.x, grid.origin.y, grid.origin.z],
            unit_um: grid.unit_um,
            label_map,
        }
    }

    pub fn grid(&self) -> Grid {
        Grid {
            dims: self.dims,
            voxel_size_um: self.voxel_size_um,
            origin: Point3::from(self.origin),
            unit_um: self.unit_um,
        }
    }

    pub fn n_voxels(&self) -> u64 {
        self.dims.iter().map(|&d| d as u64).product()
    }
}

pub fn label_map(model: &TextileModel) -> BTreeMap<u32, Family> {
    model.yarns.iter().map(|y| (y.id, y.family)).collect()
}

/// Header a voxelization of `model` would produce, without materializing it.
pub fn dimension_check(model: &TextileModel, voxel_size_um: f64) -> Result<VolumeHeader> {
    let grid = Grid::for_bbox(&model.bbox, model.unit_um, voxel_size_um)?;
    Ok(VolumeHeader::new(&grid, u16::DTYPE, label_map(model)))
}

/// Rasterize every yarn of `model`. A voxel is labeled with the yarn whose
/// lofted envelope contains its center; among several, the one with the
/// nearest section center wins, then the lowest id.
pub fn voxelize(model: &TextileModel, voxel_size_um: f64, budget: u64) -> Result<LabelVolume> {
    if model.yarns.is_empty() {
        return Err(Error::EmptyModel);
    }
    let grid = Grid::for_bbox(&model.bbox, model.unit_um, voxel_size_um)?;
    grid.check_budget(budget)?;
    let mut yarns = Vec::with_capacity(model.yarns.len());
    for y in &model.yarns {
        let id = u16::try_from(y.id)
            .map_err(|_| Error::Domain(format!("yarn id {} does not fit a 16-bit label", y.id)))?;
        yarns.push((id, y.sections.as_slice()));
    }
    let data = rasterize_sections(&yarns, &grid)?;
    Ok(Volume {
        grid,
        label_map: label_map(model),
        data,
    })
}

/// Voxel count per label; counts sum to the voxel count.
pub fn label_histogram(volume: &LabelVolume) -> BTreeMap<u16, u64> {
    let mut h = BTreeMap::new();
    for &v in &volume.data {
        *h.entry(v).or_insert(0) += 1;
    }
    h
}
