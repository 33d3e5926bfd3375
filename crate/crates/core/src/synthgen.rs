//! Parametric layer-to-layer angle-interlock textiles and their kinematic
//! compaction.
//!
//! Yarn levels are stacked about the mid-thickness plane. At every cross-over
//! station a yarn is displaced by the crimp amplitude with a sign that
//! alternates with the column parity; a warp yarn whose level coincides with
//! a weft level of the crossed column is forced half a layer up or down
//! instead. Between stations the profile follows a half-cosine, and it is
//! flat from the last station to the cell boundary. Each path is a cubic
//! B-spline fitted to that profile; sections are elliptical and sit on the
//! path at equal arc-length stations, normal to the tangent.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::geometry::{
    bspline_fit_with, ellipse_section, is_simple, Aabb, BSplineCurve, CrossSection, FitOptions,
    Point3, Polyline, Tolerances, Vector3, DEFAULT_DEGREE,
};
use crate::{par, seeds, Error, Result};

/// Current model document schema version.
pub const MODEL_SCHEMA: u32 = 1;

/// Maximum distance of a section center from its yarn path.
pub const PATH_TOLERANCE: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Warp,
    Weft,
}

impl Family {
    pub fn as_str(&self) -> &'static str {
        match self {
            Family::Warp => "warp",
            Family::Weft => "weft",
        }
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Weave layout. Spacings are per axis: X between weft columns, Y between
/// warp columns, Z between yarn layers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WeaveSpec {
    pub n_warp_columns: usize,
    pub n_weft_columns: usize,
    /// Yarns per warp column, cycled over the columns.
    pub warp_sequence: Vec<usize>,
    /// Yarns per weft column, cycled over the columns.
    pub weft_sequence: Vec<usize>,
    pub yarn_spacing: [f64; 3],
    pub crimp_amplitude: f64,
    pub ellipse_a: f64,
    pub ellipse_b: f64,
    /// Reserved for stochastic variants; generation itself is deterministic.
    pub seed: u64,
}

impl Default for WeaveSpec {
    /// Desk-scale cell: 8 warp + 8 weft yarns in about 160 × 160 × 74 units.
    fn default() -> Self {
        Self {
            n_warp_columns: 4,
            n_weft_columns: 4,
            warp_sequence: vec![3, 1],
            weft_sequence: vec![2],
            yarn_spacing: [40.0, 40.0, 28.0],
            crimp_amplitude: 3.0,
            ellipse_a: 12.0,
            ellipse_b: 5.0,
            seed: 0,
        }
    }
}

impl WeaveSpec {
    /// Layout of the scanned sample: 11 warp planes of 4/3 yarns and
    /// 8 weft columns of 5/4 yarns.
    pub fn acquired_sample() -> Self {
        Self {
            n_warp_columns: 11,
            n_weft_columns: 8,
            warp_sequence: vec![4, 3],
            weft_sequence: vec![5, 4],
            ..Self::default()
        }
    }

    /// Layout of the simulated cell: same pattern, 8 warp planes.
    pub fn simulated_cell() -> Self {
        Self {
            n_warp_columns: 8,
            ..Self::acquired_sample()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Domain(format!("weave spec: {m}")));
        if self.n_warp_columns == 0 || self.n_weft_columns == 0 {
            return bad("column counts must be >= 1");
        }
        if self.warp_sequence.is_empty() || self.weft_sequence.is_empty() {
            return bad("yarn sequences must not be empty");
        }
        if self
            .warp_sequence
            .iter()
            .chain(&self.weft_sequence)
            .any(|&c| c == 0)
        {
            return bad("yarn counts must be >= 1");
        }
        if !self.yarn_spacing.iter().all(|s| *s > 0.0 && s.is_finite()) {
            return bad("spacings must be positive");
        }
        if !(self.ellipse_a > 0.0 && self.ellipse_b > 0.0) {
            return bad("ellipse axes must be positive");
        }
        if !(self.crimp_amplitude >= 0.0) {
            return bad("crimp amplitude must be >= 0");
        }
        Ok(())
    }

    pub fn warp_count_in(&self, column: usize) -> usize {
        self.warp_sequence[column % self.warp_sequence.len()]
    }

    pub fn weft_count_in(&self, column: usize) -> usize {
        self.weft_sequence[column % self.weft_sequence.len()]
    }

    pub fn warp_count(&self) -> usize {
        (0..self.n_warp_columns)
            .map(|c| self.warp_count_in(c))
            .sum()
    }

    pub fn weft_count(&self) -> usize {
        (0..self.n_weft_columns)
            .map(|d| self.weft_count_in(d))
            .sum()
    }

    /// Cell extent along X and Y.
    pub fn footprint(&self) -> (f64, f64) {
        (
            self.n_weft_columns as f64 * self.yarn_spacing[0],
            self.n_warp_columns as f64 * self.yarn_spacing[1],
        )
    }

    fn weft_levels(&self, column: usize) -> Vec<f64> {
        stacked_levels(self.weft_count_in(column), self.yarn_spacing[2], 0.0)
    }

    fn warp_levels(&self, column: usize) -> Vec<f64> {
        let n = self.warp_count_in(column);
        let same_parity = (n + self.weft_sequence[0]).is_multiple_of(2);
        let offset = if same_parity {
            0.5 * self.yarn_spacing[2]
        } else {
            0.0
        };
        stacked_levels(n, self.yarn_spacing[2], offset)
    }
}

fn stacked_levels(n: usize, spacing: f64, offset: f64) -> Vec<f64> {
    (0..n)
        .map(|k| (k as f64 - (n as f64 - 1.0) / 2.0) * spacing + offset)
        .collect()
}

/// Fiber content of every yarn.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FiberSpec {
    pub fiber_radius: f64,
    pub fibers_per_yarn: u32,
}

impl Default for FiberSpec {
    /// 3.5 µm fibers at 20 µm per unit; the count gives Vf ≈ 0.6 on the
    /// default desk section.
    fn default() -> Self {
        Self {
            fiber_radius: 0.175,
            fibers_per_yarn: 1088,
        }
    }
}

impl FiberSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.fiber_radius > 0.0) || self.fibers_per_yarn < 1 {
            return Err(Error::Domain(
                "fiber radius must be > 0 and fiber count >= 1".into(),
            ));
        }
        Ok(())
    }

    /// Fiber count giving volume fraction `vf` in a section of area `area`.
    pub fn for_target_vf(area: f64, fiber_radius: f64, vf: f64) -> Self {
        let per_fiber = std::f64::consts::PI * fiber_radius * fiber_radius;
        Self {
            fiber_radius,
            fibers_per_yarn: ((vf * area / per_fiber).round() as u32).max(1),
        }
    }

    /// Total fiber area per section.
    pub fn fiber_area(&self) -> f64 {
        self.fibers_per_yarn as f64 * std::f64::consts::PI * self.fiber_radius.powi(2)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YarnModel {
    pub id: u32,
    pub family: Family,
    pub path: BSplineCurve,
    pub sections: Vec<CrossSection>,
}

impl YarnModel {
    pub fn centers(&self) -> Vec<Point3> {
        self.sections.iter().map(|s| s.center).collect()
    }

    /// Dense polyline along the path, `n` points equally spaced in parameter.
    pub fn path_polyline(&self, n: usize) -> Result<Polyline> {
        Polyline::new_dedup(self.path.sample_uniform(n))
    }

    pub fn validate(&self, tol: &Tolerances) -> Result<()> {
        let ctx = |m: String| Error::InvalidModel(format!("yarn {}: {m}", self.id));
        if self.sections.len() < 2 {
            return Err(ctx("needs at least 2 sections".into()));
        }
        if !self
            .sections
            .windows(2)
            .all(|w| w[1].station > w[0].station)
        {
            return Err(ctx("stations must be strictly increasing".into()));
        }
        for (i, s) in self.sections.iter().enumerate() {
            s.validate(tol)
                .map_err(|e| ctx(format!("section {i}: {e}")))?;
            let t = self.path.closest_param(&s.center);
            let off = (self.path.point_at(t) - s.center).norm();
            if off > PATH_TOLERANCE {
                return Err(ctx(format!("section {i} center is {off:.3} off the path")));
            }
        }
        Ok(())
    }
}

/// Full parametric textile description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextileModel {
    pub schema: u32,
    /// Physical size of one model length unit, in micrometres.
    pub unit_um: f64,
    pub weave: WeaveSpec,
    pub fibers: FiberSpec,
    pub bbox: Aabb,
    pub thickness: f64,
    pub yarns: Vec<YarnModel>,
}

impl TextileModel {
    pub fn mid_plane(&self) -> f64 {
        self.bbox.min.z + 0.5 * self.thickness
    }

    pub fn yarn(&self, id: u32) -> Option<&YarnModel> {
        self.yarns.iter().find(|y| y.id == id)
    }

    pub fn count(&self, family: Family) -> usize {
        self.yarns.iter().filter(|y| y.family == family).count()
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema != MODEL_SCHEMA {
            return Err(Error::InvalidModel(format!(
                "unsupported schema {} (expected {MODEL_SCHEMA})",
                self.schema
            )));
        }
        if !(self.unit_um > 0.0) {
            return Err(Error::InvalidModel("unit_um must be positive".into()));
        }
        let mut ids: Vec<u32> = self.yarns.iter().map(|y| y.id).collect();
        ids.sort_unstable();
        if ids.iter().enumerate().any(|(i, &id)| id as usize != i + 1) {
            return Err(Error::InvalidModel(
                "yarn ids must be 1..n without gaps".into(),
            ));
        }
        let tol = Tolerances::default();
        for y in &self.yarns {
            y.validate(&tol)?;
            for s in &y.sections {
                if !s.contour.iter().all(|p| self.bbox.contains(p, 1e-9)) {
                    return Err(Error::InvalidModel(format!(
                        "yarn {} has keypoints outside the bounding box",
                        y.id
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::parse("model", e))
    }

    /// Parse and validate a model document; `source` names it in errors.
    pub fn from_json(text: &str, source: &str) -> Result<Self> {
        let model: TextileModel =
            serde_json::from_str(text).map_err(|e| Error::parse(source, e))?;
        model.validate()?;
        Ok(model)
    }
}

/// Profile through cross-over stations: half-cosine blends between
/// consecutive targets, flat outside the first and last station.
fn crimp_profile(stations: &[f64], targets: &[f64], x: f64) -> f64 {
    if x <= stations[0] {
        return targets[0];
    }
    let last = stations.len() - 1;
    if x >= stations[last] {
        return targets[last];
    }
    let i = stations.partition_point(|&s| s <= x) - 1;
    let t = (x - stations[i]) / (stations[i + 1] - stations[i]);
    let blend = 0.5 * (1.0 - (std::f64::consts::PI * t).cos());
    targets[i] + (targets[i + 1] - targets[i]) * blend
}

fn alternating(i: usize) -> f64 {
    if i.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

struct YarnPlan {
    family: Family,
    /// Fixed in-plane coordinate (Y for warp, X for weft).
    offset: f64,
    stations: Vec<f64>,
    targets: Vec<f64>,
    length: f64,
}

fn plan_yarns(spec: &WeaveSpec) -> Vec<YarnPlan> {
    let [sx, sy, sz] = spec.yarn_spacing;
    let (lx, ly) = spec.footprint();
    let amp = spec.crimp_amplitude;
    let coincides =
        |level: f64, others: &[f64]| others.iter().any(|o| (o - level).abs() < 0.25 * sz);
    let weft_x: Vec<f64> = (0..spec.n_weft_columns)
        .map(|d| (d as f64 + 0.5) * sx)
        .collect();
    let warp_y: Vec<f64> = (0..spec.n_warp_columns)
        .map(|c| (c as f64 + 0.5) * sy)
        .collect();

    let mut plans = Vec::new();
    for (c, &y) in warp_y.iter().enumerate() {
        for level in spec.warp_levels(c) {
            let targets = (0..spec.n_weft_columns)
                .map(|d| {
                    let sign = alternating(c + d);
                    let shift = if coincides(level, &spec.weft_levels(d)) {
                        0.5 * sz
                    } else {
                        amp
                    };
                    level + sign * shift
                })
                .collect();
            plans.push(YarnPlan {
                family: Family::Warp,
                offset: y,
                stations: weft_x.clone(),
                targets,
                length: lx,
            });
        }
    }
    for (d, &x) in weft_x.iter().enumerate() {
        for level in spec.weft_levels(d) {
            let targets = (0..spec.n_warp_columns)
                .map(|c| {
                    let sign = alternating(c + d);
                    let shift = if coincides(level, &spec.warp_levels(c)) {
                        0.0
                    } else {
                        amp
                    };
                    level + sign * shift
                })
                .collect();
            plans.push(YarnPlan {
                family: Family::Weft,
                offset: x,
                stations: warp_y.clone(),
                targets,
                length: ly,
            });
        }
    }
    plans
}

fn build_yarn(plan: &YarnPlan, id: u32, spec: &WeaveSpec, n_sections: usize) -> Result<YarnModel> {
    let n_dense = 24 * (plan.stations.len() + 1) + 1;
    let dense: Vec<Point3> = (0..n_dense)
        .map(|i| {
            let s = plan.length * i as f64 / (n_dense - 1) as f64;
            let z = crimp_profile(&plan.stations, &plan.targets, s);
            match plan.family {
                Family::Warp => Point3::new(s, plan.offset, z),
                Family::Weft => Point3::new(plan.offset, s, z),
            }
        })
        .collect();
    let n_controls = (4 * plan.stations.len() + 4).min(n_dense);
    let opts = FitOptions {
        param_correction_iters: 0,
        ..FitOptions::new(DEFAULT_DEGREE, n_controls)
    };
    let path = bspline_fit_with(&Polyline::new(dense)?, opts)?;
    let total = path.arc_length();
    let sections = (0..n_sections)
        .map(|i| {
            let station = total * i as f64 / (n_sections - 1) as f64;
            let t = path.param_at_arc_length(station);
            let mut s = ellipse_section(
                path.point_at(t),
                path.tangent_at(t),
                spec.ellipse_a,
                spec.ellipse_b,
                0.0,
            )?;
            s.station = station;
            Ok(s)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(YarnModel {
        id,
        family: plan.family,
        path,
        sections,
    })
}

/// Smallest distance between the paths of two yarns, by dense sampling.
fn axis_distance(a: &[Point3], b: &[Point3]) -> f64 {
    let mut best = f64::INFINITY;
    for p in a {
        for q in b {
            best = best.min((p - q).norm_squared());
        }
    }
    best.sqrt()
}

fn check_feasible(yarns: &[YarnModel], min_gap: f64) -> Result<()> {
    let samples: Vec<Vec<Point3>> = par::map(yarns, |y| y.path.sample_uniform(200));
    let boxes: Vec<Aabb> = samples.iter().map(Aabb::from_points).collect();
    let pairs: Vec<(usize, usize)> = (0..yarns.len())
        .flat_map(|i| (i + 1..yarns.len()).map(move |j| (i, j)))
        .filter(|&(i, j)| {
            (0..3).all(|k| {
                boxes[i].min[k] - min_gap <= boxes[j].max[k]
                    && boxes[j].min[k] - min_gap <= boxes[i].max[k]
            })
        })
        .collect();
    let dists = par::map(&pairs, |&(i, j)| axis_distance(&samples[i], &samples[j]));
    for (&(i, j), d) in pairs.iter().zip(dists) {
        if d < min_gap {
            return Err(Error::InfeasibleWeave(format!(
                "axes of yarns {} and {} come within {d:.3} (minimum {min_gap})",
                yarns[i].id, yarns[j].id
            )));
        }
    }
    Ok(())
}

/// Generate an interlock textile with `n_sections_warp` / `n_sections_weft`
/// sections per warp / weft yarn.
pub fn generate_interlock(
    spec: &WeaveSpec,
    fibers: &FiberSpec,
    n_sections_warp: usize,
    n_sections_weft: usize,
) -> Result<TextileModel> {
    spec.validate()?;
    fibers.validate()?;
    if n_sections_warp < 2 || n_sections_weft < 2 {
        return Err(Error::Domain("each yarn needs at least 2 sections".into()));
    }
    let plans = plan_yarns(spec);
    let mut yarns = par::try_map(&(0..plans.len()).collect::<Vec<_>>(), |&i| {
        let plan = &plans[i];
        let n = match plan.family {
            Family::Warp => n_sections_warp,
            Family::Weft => n_sections_weft,
        };
        build_yarn(plan, i as u32 + 1, spec, n)
    })?;
    check_feasible(&yarns, spec.ellipse_b)?;

    // thickness: symmetric about the mid plane with a one-unit margin
    let zmax = yarns
        .iter()
        .flat_map(|y| y.sections.iter().flat_map(|s| s.contour.iter()))
        .map(|p| p.z.abs())
        .fold(0.0, f64::max);
    let thickness = 2.0 * (zmax + 1.0).ceil();
    let lift = Vector3::new(0.0, 0.0, 0.5 * thickness);
    for y in yarns.iter_mut() {
        y.path = y.path.map_controls(|p| p + lift);
        for s in y.sections.iter_mut() {
            *s = s.translated(&lift);
        }
    }
    let (lx, ly) = spec.footprint();
    let nominal = Aabb::new(Point3::origin(), Point3::new(lx, ly, thickness));
    let bbox = nominal.union(&keypoint_box(&yarns));
    Ok(TextileModel {
        schema: MODEL_SCHEMA,
        unit_um: 20.0,
        weave: spec.clone(),
        fibers: *fibers,
        bbox,
        thickness,
        yarns,
    })
}

fn keypoint_box(yarns: &[YarnModel]) -> Aabb {
    Aabb::from_points(
        yarns
            .iter()
            .flat_map(|y| y.sections.iter().flat_map(|s| s.contour.iter())),
    )
}

/// Flatten a section about its center: scale the in-plane thickness
/// direction by `s` and the in-plane transverse direction by `1/s`.
fn flatten_section(sec: &CrossSection, new_center: Point3, s: f64) -> Result<CrossSection> {
    let n = sec.newell_normal().normalize();
    let up = Vector3::z() - n * n.z;
    let contour = if up.norm() < 1e-9 {
        sec.contour.map(|p| new_center + (p - sec.center))
    } else {
        let w = up.normalize();
        let h = n.cross(&w);
        sec.contour.map(|p| {
            let d = p - sec.center;
            new_center + w * (d.dot(&w) * s) + h * (d.dot(&h) / s) + n * d.dot(&n)
        })
    };
    Ok(CrossSection {
        contour,
        center: new_center,
        station: sec.station,
    })
}

/// Kinematic compaction in `n_steps` equal thickness increments down to
/// `h_final`. Returns the models after steps 1..=n_steps.
pub fn compaction_sequence(
    model: &TextileModel,
    h_final: f64,
    n_steps: usize,
) -> Result<Vec<TextileModel>> {
    let h_init = model.thickness;
    if !(h_final > 0.0) || h_final > h_init {
        return Err(Error::Domain(format!(
            "final thickness {h_final} must lie in (0, {h_init}]"
        )));
    }
    if n_steps < 1 {
        return Err(Error::Domain("compaction needs at least one step".into()));
    }
    let increment = (h_init - h_final) / n_steps as f64;
    let mid = model.mid_plane();
    (1..=n_steps)
        .map(|k| {
            let h_k = if k == n_steps {
                h_final
            } else {
                h_init - k as f64 * increment
            };
            compact_to(model, h_k, mid)
        })
        .collect()
}

fn compact_to(model: &TextileModel, h_k: f64, mid: f64) -> Result<TextileModel> {
    if h_k == model.thickness {
        return Ok(model.clone());
    }
    let s = h_k / model.thickness;
    let squeeze = |p: &Point3| Point3::new(p.x, p.y, mid + (p.z - mid) * s);
    let yarns = par::try_map(&model.yarns, |y| {
        let path = y.path.map_controls(squeeze);
        let sections = y
            .sections
            .iter()
            .map(|sec| {
                let mut out = flatten_section(sec, squeeze(&sec.center), s)?;
                out.station = path.arc_length_at(path.closest_param(&out.center));
                Ok(out)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok::<_, Error>(YarnModel {
            id: y.id,
            family: y.family,
            path,
            sections,
        })
    })?;
    let nominal = Aabb::new(
        Point3::new(model.bbox.min.x, model.bbox.min.y, mid - 0.5 * h_k),
        Point3::new(model.bbox.max.x, model.bbox.max.y, mid + 0.5 * h_k),
    );
    let bbox = nominal.union(&keypoint_box(&yarns));
    Ok(TextileModel {
        thickness: h_k,
        bbox,
        yarns,
        ..model.clone()
    })
}

/// Jitter every contour keypoint with zero-mean Gaussian noise of standard
/// deviation `sigma`; centers become the centroid of the jittered contour.
/// Sections leaving the planarity tolerance are projected back onto their
/// best-fit plane; a draw that self-intersects is redrawn (up to 8 times)
/// and otherwise the section is left unchanged.
pub fn perturb_model(model: &TextileModel, sigma: f64, seed: u64) -> Result<TextileModel> {
    if !(sigma >= 0.0) {
        return Err(Error::Domain(format!("jitter sigma {sigma} must be >= 0")));
    }
    if sigma == 0.0 {
        return Ok(model.clone());
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::Domain(e.to_string()))?;
    let tol = Tolerances::default();
    let yarns = par::map(&model.yarns, |y| {
        let mut rng = ChaCha8Rng::seed_from_u64(seeds::derive_indexed(seed, y.id as u64));
        let sections = y
            .sections
            .iter()
            .map(|sec| jitter_section(sec, &normal, &mut rng, &tol))
            .collect();
        YarnModel {
            id: y.id,
            family: y.family,
            path: y.path.clone(),
            sections,
        }
    });
    let bbox = model.bbox.union(&keypoint_box(&yarns));
    Ok(TextileModel {
        yarns,
        bbox,
        ..model.clone()
    })
}

fn jitter_section(
    sec: &CrossSection,
    normal: &Normal<f64>,
    rng: &mut ChaCha8Rng,
    tol: &Tolerances,
) -> CrossSection {
    for _ in 0..8 {
        let mut contour = sec.contour;
        for p in contour.iter_mut() {
            *p += Vector3::new(normal.sample(rng), normal.sample(rng), normal.sample(rng));
        }
        let mut out = CrossSection::from_contour(contour, sec.station);
        match out.planarity_error() {
            Ok(e) if e > tol.plane => match out.projected_to_plane() {
                Ok(p) => out = CrossSection::from_contour(p.contour, sec.station),
                Err(_) => continue,
            },
            Ok(_) => {}
            Err(_) => continue,
        }
        if out.local_ring().map(|r| is_simple(&r)).unwrap_or(false) {
            return out;
        }
    }
    sec.clone()
}
