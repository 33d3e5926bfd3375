//! Procedural pseudo-CT: flat matrix level, yarns at a base level plus a
//! family-dependent striped fiber texture running across the fibers,
//! additive Gaussian noise, optional concentric ring artifacts, clamped to
//! [0, 1].

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{GrayVolume, LabelVolume, SliceAxis, Volume};
use crate::synthgen::Family;
use crate::{par, seeds, Error, Result};

const RING_AMPLITUDE: f64 = 0.05;
const RING_PERIOD: f64 = 12.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RenderParams {
    pub matrix_level: f64,
    pub yarn_base_level: f64,
    pub warp_contrast: f64,
    pub weft_contrast: f64,
    /// Stripe period in voxels.
    pub fiber_texture_period: f64,
    pub noise_sigma: f64,
    pub rings: bool,
    pub seed: u64,
}

impl Default for RenderParams {
    fn default() -> Self {
        Self {
            matrix_level: 0.2,
            yarn_base_level: 0.5,
            warp_contrast: 0.2,
            weft_contrast: 0.1,
            fiber_texture_period: 6.0,
            noise_sigma: 0.03,
            rings: false,
            seed: 0,
        }
    }
}

impl RenderParams {
    pub fn validate(&self) -> Result<()> {
        let levels = [
            ("matrix_level", self.matrix_level),
            ("yarn_base_level", self.yarn_base_level),
            ("warp_contrast", self.warp_contrast),
            ("weft_contrast", self.weft_contrast),
        ];
        for (name, v) in levels {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Domain(format!(
                    "render {name} = {v} must lie in [0, 1]"
                )));
            }
        }
        if !(self.noise_sigma >= 0.0) || !self.noise_sigma.is_finite() {
            return Err(Error::Domain("render noise_sigma must be >= 0".into()));
        }
        if !(self.fiber_texture_period > 0.0) {
            return Err(Error::Domain(
                "fiber_texture_period must be positive".into(),
            ));
        }
        Ok(())
    }

    fn contrast(&self, family: Family) -> f64 {
        match family {
            Family::Warp => self.warp_contrast,
            Family::Weft => self.weft_contrast,
        }
    }
}

struct Shader<'a> {
    params: &'a RenderParams,
    label_map: &'a BTreeMap<u32, Family>,
    noise: Option<Normal<f64>>,
    ring_center: (f64, f64),
}

impl<'a> Shader<'a> {
    fn new(
        params: &'a RenderParams,
        label_map: &'a BTreeMap<u32, Family>,
        dims: [usize; 3],
    ) -> Result<Self> {
        params.validate()?;
        let noise = if params.noise_sigma > 0.0 {
            Some(Normal::new(0.0, params.noise_sigma).map_err(|e| Error::Domain(e.to_string()))?)
        } else {
            None
        };
        Ok(Self {
            params,
            label_map,
            noise,
            ring_center: (0.5 * dims[0] as f64, 0.5 * dims[1] as f64),
        })
    }

    fn shade(&self, label: u16, [i, j, _]: [usize; 3], rng: &mut ChaCha8Rng) -> f32 {
        let p = self.params;
        let mut value = if label == 0 {
            p.matrix_level
        } else {
            // unknown labels render as warp
            let family = self
                .label_map
                .get(&(label as u32))
                .copied()
                .unwrap_or(Family::Warp);
            let across = match family {
                Family::Warp => j as f64 + 0.5,
                Family::Weft => i as f64 + 0.5,
            };
            let stripe = (std::f64::consts::TAU * across / p.fiber_texture_period).cos();
            p.yarn_base_level + p.contrast(family) * (0.75 + 0.25 * stripe)
        };
        if p.rings {
            let r =
                (i as f64 + 0.5 - self.ring_center.0).hypot(j as f64 + 0.5 - self.ring_center.1);
            value += RING_AMPLITUDE * (std::f64::consts::TAU * r / RING_PERIOD).sin();
        }
        if let Some(n) = &self.noise {
            value += n.sample(rng);
        }
        value.clamp(0.0, 1.0) as f32
    }
}

/// Render a label volume; each z-plane draws noise from its own stream.
pub fn render_volume(labels: &LabelVolume, params: &RenderParams) -> Result<GrayVolume> {
    let shader = Shader::new(params, &labels.label_map, labels.grid.dims)?;
    let [nx, ny, _] = labels.grid.dims;
    let mut data = vec![0f32; labels.data.len()];
    if !data.is_empty() {
        par::for_each_chunk_mut(&mut data, nx * ny, |k, plane| {
            let mut rng = ChaCha8Rng::seed_from_u64(seeds::derive_indexed(params.seed, k as u64));
            let src = &labels.data[k * nx * ny..(k + 1) * nx * ny];
            for j in 0..ny {
                for i in 0..nx {
                    plane[i + nx * j] = shader.shade(src[i + nx * j], [i, j, k], &mut rng);
                }
            }
        });
    }
    Ok(Volume {
        grid: labels.grid,
        label_map: labels.label_map.clone(),
        data,
    })
}

/// Render one label slice (`width × height`, pixel `(u, v)` at `u + width·v`)
/// taken at `index` along `axis` from a volume of `dims`.
pub fn render_slice(
    labels: &[u16],
    width: usize,
    axis: SliceAxis,
    index: usize,
    dims: [usize; 3],
    label_map: &BTreeMap<u32, Family>,
    params: &RenderParams,
) -> Result<Vec<f32>> {
    let shader = Shader::new(params, label_map, dims)?;
    if width == 0 || !labels.len().is_multiple_of(width) {
        return Err(Error::Domain(format!(
            "slice of {} pixels is not a multiple of width {width}",
            labels.len()
        )));
    }
    let stream = seeds::derive(params.seed, axis.as_str());
    let mut rng = ChaCha8Rng::seed_from_u64(seeds::derive_indexed(stream, index as u64));
    Ok(labels
        .iter()
        .enumerate()
        .map(|(p, &l)| shader.shade(l, axis.voxel(index, p % width, p / width), &mut rng))
        .collect())
}
