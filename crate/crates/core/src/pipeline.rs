//! Configuration, per-stage commands with their file formats, and the
//! end-to-end runner that writes a manifest of digested artifacts.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::geometry::{ellipse_section, section_area, Point3, Vector3};
use crate::reconstruct::{
    build_composite_mesh, build_surface_mesh, build_volume_mesh, reconstruct_all, write_obj,
    write_vtk, yarns_to_json, ReconstructParams, Reconstruction, TrackParams, VolumeMesh,
};
use crate::segmenter::{
    degrade, detect_batch, group_by_axis, parse_jsonl, to_jsonl, DegradeParams, DetectionSet,
    FamilyFilter, Provenance, DEFAULT_MIN_AREA,
};
use crate::synthgen::{
    compaction_sequence, generate_interlock, FiberSpec, TextileModel, WeaveSpec,
};
use crate::validate::{
    histogram_csv, match_and_assess_paths, path_table, vf_distribution, vf_table, ValidationReport,
    DEFAULT_N_BINS, DEFAULT_RESAMPLE_N,
};
use crate::voxelizer::{
    dimension_check, extract_slices, read_header, read_volume, render_volume, sidecar_path,
    voxelize, write_header, write_volume, Grid, LabelVolume, RenderParams, SliceAxis,
    DEFAULT_BUDGET,
};
use crate::{fsio, seeds, Error, Result};

pub const TOOL_NAME: &str = "textile";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Pipeline stages; failures in stage `k` exit with `10 + k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Generate = 1,
    Compact = 2,
    Voxelize = 3,
    Render = 4,
    Segment = 5,
    Degrade = 6,
    Reconstruct = 7,
    Validate = 8,
}

impl Stage {
    pub fn number(self) -> i32 {
        self as i32
    }

    pub fn name(self) -> &'static str {
        match self {
            Stage::Generate => "generate",
            Stage::Compact => "compact",
            Stage::Voxelize => "voxelize",
            Stage::Render => "render",
            Stage::Segment => "segment",
            Stage::Degrade => "degrade",
            Stage::Reconstruct => "reconstruct",
            Stage::Validate => "validate",
        }
    }
}

/// An error with the stage it happened in.
#[derive(Debug, thiserror::Error)]
#[error("{} stage failed: {source}", stage.name())]
pub struct StageError {
    pub stage: Stage,
    #[source]
    pub source: Error,
}

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_IO: i32 = 3;

/// Config errors 2, I/O and malformed input files 3, other failures
/// `10 + stage`.
pub fn exit_code(err: &StageError) -> i32 {
    match err.source {
        Error::Config(_) => EXIT_CONFIG,
        Error::Io { .. } | Error::Parse { .. } => EXIT_IO,
        _ => 10 + err.stage.number(),
    }
}

trait InStage<T> {
    fn stage(self, stage: Stage) -> std::result::Result<T, StageError>;
}

impl<T> InStage<T> for Result<T> {
    fn stage(self, stage: Stage) -> std::result::Result<T, StageError> {
        self.map_err(|source| StageError { stage, source })
    }
}

pub type StageResult<T> = std::result::Result<T, StageError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerateConfig {
    pub sections_per_warp: usize,
    pub sections_per_weft: usize,
    /// When set, the fiber count is chosen for this Vf on the nominal section.
    pub target_vf: Option<f64>,
}

impl Default for GenerateConfig {
    fn default() -> Self {
        Self {
            sections_per_warp: 41,
            sections_per_weft: 41,
            target_vf: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompactConfig {
    /// Final thickness in model units; compaction is skipped when absent.
    pub h_final: Option<f64>,
    pub n_steps: usize,
}

impl Default for CompactConfig {
    fn default() -> Self {
        Self {
            h_final: None,
            n_steps: 12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VoxelConfig {
    pub voxel_size_um: f64,
    pub budget: u64,
    /// Compute the volume header only.
    pub dimension_check: bool,
}

impl Default for VoxelConfig {
    fn default() -> Self {
        Self {
            voxel_size_um: 20.0,
            budget: DEFAULT_BUDGET,
            dimension_check: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SegmentConfig {
    pub axes: Vec<SliceAxis>,
    pub min_area: usize,
    pub filter: FamilyFilter,
}

impl Default for SegmentConfig {
    fn default() -> Self {
        Self {
            axes: vec![SliceAxis::XZ, SliceAxis::YZ],
            min_area: DEFAULT_MIN_AREA,
            filter: FamilyFilter::Transverse,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DegradeConfig {
    pub enabled: bool,
    pub keypoint_jitter_sigma: f64,
    pub section_dropout_p: f64,
    pub confidence_floor: f64,
}

impl Default for DegradeConfig {
    fn default() -> Self {
        let d = DegradeParams::default();
        Self {
            enabled: true,
            keypoint_jitter_sigma: d.keypoint_jitter_sigma,
            section_dropout_p: d.section_dropout_p,
            confidence_floor: d.confidence_floor,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReconstructConfig {
    /// Association gate in voxels; 1.5·max(a, b) when absent.
    pub d_gate: Option<f64>,
    pub l_min: usize,
    pub max_gap: usize,
    /// Spline controls per yarn; max(4, S/4) when absent.
    pub n_controls: Option<usize>,
    /// Voxel size of the composite mesh.
    pub composite_voxel_um: f64,
}

impl Default for ReconstructConfig {
    fn default() -> Self {
        let t = TrackParams::default();
        Self {
            d_gate: None,
            l_min: t.l_min,
            max_gap: t.max_gap,
            n_controls: None,
            composite_voxel_um: 80.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidateConfig {
    pub resample_n: usize,
    pub n_bins: usize,
}

impl Default for ValidateConfig {
    fn default() -> Self {
        Self {
            resample_n: DEFAULT_RESAMPLE_N,
            n_bins: DEFAULT_N_BINS,
        }
    }
}

/// Every knob of a run. Each section defaults independently, so an empty
/// file is a valid desk-scale configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub out_dir: PathBuf,
    pub weave: WeaveSpec,
    pub fibers: FiberSpec,
    pub generate: GenerateConfig,
    pub compact: CompactConfig,
    pub voxelize: VoxelConfig,
    pub render: RenderParams,
    pub segment: SegmentConfig,
    pub degrade: DegradeConfig,
    pub reconstruct: ReconstructConfig,
    pub validate: ValidateConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out_dir: PathBuf::from("run"),
            weave: WeaveSpec::default(),
            fibers: FiberSpec::default(),
            generate: GenerateConfig::default(),
            compact: CompactConfig::default(),
            voxelize: VoxelConfig::default(),
            render: RenderParams::default(),
            segment: SegmentConfig::default(),
            degrade: DegradeConfig::default(),
            reconstruct: ReconstructConfig::default(),
            validate: ValidateConfig::default(),
        }
    }
}

fn config_err(e: impl std::fmt::Display) -> Error {
    Error::Config(e.to_string())
}

impl PipelineConfig {
    pub fn from_toml(text: &str, source: &str) -> Result<Self> {
        let cfg: Self =
            toml::from_str(text).map_err(|e| Error::Config(format!("{source}: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Defaults when `path` is `None`.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => {
                let cfg = Self::default();
                cfg.validate()?;
                Ok(cfg)
            }
            Some(p) => Self::from_toml(&fsio::read_string(p)?, &p.display().to_string()),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Check every sub-config; failures are config errors.
    pub fn validate(&self) -> Result<()> {
        self.weave.validate().map_err(config_err)?;
        self.fibers.validate().map_err(config_err)?;
        self.render.validate().map_err(config_err)?;
        self.degrade_params().validate().map_err(config_err)?;
        let g = &self.generate;
        if g.sections_per_warp < 2 || g.sections_per_weft < 2 {
            return Err(config_err("generate: at least 2 sections per yarn"));
        }
        if let Some(vf) = g.target_vf {
            if !(vf > 0.0 && vf <= 1.0) {
                return Err(config_err(format!(
                    "generate.target_vf = {vf} must lie in (0, 1]"
                )));
            }
        }
        if let Some(h) = self.compact.h_final {
            if !(h > 0.0) {
                return Err(config_err("compact.h_final must be positive"));
            }
        }
        if self.compact.n_steps < 1 {
            return Err(config_err("compact.n_steps must be >= 1"));
        }
        let positive = [
            ("voxelize.voxel_size_um", self.voxelize.voxel_size_um),
            (
                "reconstruct.composite_voxel_um",
                self.reconstruct.composite_voxel_um,
            ),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(config_err(format!("{name} = {v} must be positive")));
            }
        }
        if self.segment.axes.is_empty() {
            return Err(config_err("segment.axes must not be empty"));
        }
        if let Some(d) = self.reconstruct.d_gate {
            if !(d > 0.0) {
                return Err(config_err("reconstruct.d_gate must be positive"));
            }
        }
        if self.reconstruct.l_min < 2 {
            return Err(config_err("reconstruct.l_min must be >= 2"));
        }
        if self.validate.resample_n < 2 || self.validate.n_bins < 1 {
            return Err(config_err(
                "validate.resample_n must be >= 2 and n_bins >= 1",
            ));
        }
        Ok(())
    }

    pub fn stage_seed(&self, stage: Stage) -> u64 {
        seeds::derive(self.seed, stage.name())
    }

    pub fn fiber_spec(&self) -> Result<FiberSpec> {
        match self.generate.target_vf {
            None => Ok(self.fibers),
            Some(vf) => {
                let nominal = ellipse_section(
                    Point3::origin(),
                    Vector3::x(),
                    self.weave.ellipse_a,
                    self.weave.ellipse_b,
                    0.0,
                )?;
                Ok(FiberSpec::for_target_vf(
                    section_area(&nominal)?,
                    self.fibers.fiber_radius,
                    vf,
                ))
            }
        }
    }

    pub fn render_params(&self) -> RenderParams {
        RenderParams {
            seed: self.stage_seed(Stage::Render),
            ..self.render.clone()
        }
    }

    pub fn degrade_params(&self) -> DegradeParams {
        DegradeParams {
            keypoint_jitter_sigma: self.degrade.keypoint_jitter_sigma,
            section_dropout_p: self.degrade.section_dropout_p,
            confidence_floor: self.degrade.confidence_floor,
            seed: self.stage_seed(Stage::Degrade),
        }
    }

    /// Tracking gate and length filter, the gate defaulting to the yarn size
    /// converted to voxels.
    pub fn reconstruct_params(&self, grid: &Grid) -> ReconstructParams {
        let h = grid.h();
        let nominal = TrackParams::for_ellipse(self.weave.ellipse_a / h, self.weave.ellipse_b / h);
        ReconstructParams {
            track: TrackParams {
                d_gate: self.reconstruct.d_gate.unwrap_or(nominal.d_gate),
                l_min: self.reconstruct.l_min,
                max_gap: self.reconstruct.max_gap,
            },
            n_controls: self.reconstruct.n_controls,
        }
    }
}

/// Standard artifact names inside an output directory.
pub mod files {
    pub const MODEL: &str = "model.json";
    pub const LABELS: &str = "labels.raw";
    pub const PSEUDO_CT: &str = "pseudo_ct.raw";
    pub const DETECTIONS: &str = "detections.jsonl";
    pub const DEGRADED: &str = "detections_degraded.jsonl";
    pub const YARNS: &str = "yarns.json";
    pub const SUMMARY: &str = "reconstruction.json";
    pub const SURFACE: &str = "reinforcement.obj";
    pub const VOLUME: &str = "reinforcement.vtk";
    pub const COMPOSITE: &str = "composite.vtk";
    pub const REPORT: &str = "report.json";
    pub const PATH_TABLE: &str = "paths.txt";
    pub const VF_TABLE: &str = "vf.txt";
    pub const HISTOGRAM: &str = "vf_histogram.csv";
    pub const MANIFEST: &str = "manifest.json";
}

fn json_pretty<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("value serializes");
    s.push('\n');
    s
}

pub fn read_model(path: &Path) -> Result<TextileModel> {
    TextileModel::from_json(&fsio::read_string(path)?, &path.display().to_string())
}

pub fn generate_model(cfg: &PipelineConfig) -> Result<TextileModel> {
    generate_interlock(
        &cfg.weave,
        &cfg.fiber_spec()?,
        cfg.generate.sections_per_warp,
        cfg.generate.sections_per_weft,
    )
}

/// Writes `model.json`.
pub fn cmd_generate(cfg: &PipelineConfig, out: &Path) -> StageResult<PathBuf> {
    let model = generate_model(cfg).stage(Stage::Generate)?;
    let path = out.join(files::MODEL);
    let text = model.to_json().stage(Stage::Generate)?;
    fsio::write_atomic(&path, text.as_bytes()).stage(Stage::Generate)?;
    Ok(path)
}

/// Writes `model_01.json` … one file per step.
pub fn cmd_compact(
    model: &Path,
    h_final: f64,
    n_steps: usize,
    out: &Path,
) -> StageResult<Vec<PathBuf>> {
    let m = read_model(model).stage(Stage::Compact)?;
    let seq = compaction_sequence(&m, h_final, n_steps).stage(Stage::Compact)?;
    let width = n_steps.to_string().len().max(2);
    let mut paths = Vec::new();
    for (k, step) in seq.iter().enumerate() {
        let path = out.join(format!("model_{:0width$}.json", k + 1));
        let text = step.to_json().stage(Stage::Compact)?;
        fsio::write_atomic(&path, text.as_bytes()).stage(Stage::Compact)?;
        paths.push(path);
    }
    Ok(paths)
}

/// Writes `labels.raw` and its sidecar, or only the sidecar in dimension
/// check mode. Returns the sidecar path.
pub fn cmd_voxelize(model: &Path, voxel: &VoxelConfig, out: &Path) -> StageResult<PathBuf> {
    let m = read_model(model).stage(Stage::Voxelize)?;
    let raw = out.join(files::LABELS);
    if voxel.dimension_check {
        let header = dimension_check(&m, voxel.voxel_size_um).stage(Stage::Voxelize)?;
        let side = sidecar_path(&raw);
        write_header(&side, &header).stage(Stage::Voxelize)?;
        return Ok(side);
    }
    let vol = voxelize(&m, voxel.voxel_size_um, voxel.budget).stage(Stage::Voxelize)?;
    write_volume(&raw, &vol).stage(Stage::Voxelize)
}

/// Writes `pseudo_ct.raw` and its sidecar.
pub fn cmd_render(labels: &Path, params: &RenderParams, out: &Path) -> StageResult<PathBuf> {
    let vol: LabelVolume = read_volume(labels).stage(Stage::Render)?;
    let gray = render_volume(&vol, params).stage(Stage::Render)?;
    write_volume(&out.join(files::PSEUDO_CT), &gray).stage(Stage::Render)
}

pub fn segment_volume(vol: &LabelVolume, seg: &SegmentConfig) -> Vec<DetectionSet> {
    let mut axes = seg.axes.clone();
    axes.sort();
    axes.dedup();
    axes.iter()
        .map(|&axis| {
            let ds = extract_slices(vol, axis);
            let (set, skipped) = detect_batch(&ds, &vol.label_map, seg.filter, seg.min_area);
            if !skipped.is_empty() {
                log::info!(
                    "{axis}: skipped {} components below {} pixels",
                    skipped.len(),
                    seg.min_area
                );
            }
            set
        })
        .collect()
}

fn sets_to_jsonl(sets: &[DetectionSet]) -> String {
    sets.iter().map(|s| to_jsonl(s.iter())).collect()
}

/// Writes `detections.jsonl`, XZ records before YZ, slice order within.
pub fn cmd_segment(labels: &Path, seg: &SegmentConfig, out: &Path) -> StageResult<PathBuf> {
    let vol: LabelVolume = read_volume(labels).stage(Stage::Segment)?;
    let sets = segment_volume(&vol, seg);
    let path = out.join(files::DETECTIONS);
    fsio::write_atomic(&path, sets_to_jsonl(&sets).as_bytes()).stage(Stage::Segment)?;
    Ok(path)
}

/// Read detections; slice counts come from the volume sidecar when given.
pub fn read_detections(
    path: &Path,
    header: Option<&Path>,
    provenance: Provenance,
) -> Result<Vec<DetectionSet>> {
    let records = parse_jsonl(&fsio::read_string(path)?, &path.display().to_string())?;
    let dims = match header {
        Some(h) => Some(read_header(h)?.dims),
        None => None,
    };
    Ok(group_by_axis(records, dims, provenance))
}

/// Writes `detections_degraded.jsonl`.
pub fn cmd_degrade(
    detections: &Path,
    header: Option<&Path>,
    params: &DegradeParams,
    out: &Path,
) -> StageResult<PathBuf> {
    let sets = read_detections(detections, header, Provenance::Oracle).stage(Stage::Degrade)?;
    let degraded = sets
        .iter()
        .map(|s| degrade(s, params))
        .collect::<Result<Vec<_>>>()
        .stage(Stage::Degrade)?;
    let path = out.join(files::DEGRADED);
    fsio::write_atomic(&path, sets_to_jsonl(&degraded).as_bytes()).stage(Stage::Degrade)?;
    Ok(path)
}

/// Reconstruction artifacts: yarns, per-yarn summaries, reinforcement
/// surface and volume meshes, composite mesh.
pub fn write_reconstruction(
    rec: &Reconstruction,
    model_bbox: &crate::geometry::Aabb,
    unit_um: f64,
    cfg: &PipelineConfig,
    out: &Path,
) -> StageResult<Vec<PathBuf>> {
    let st = Stage::Reconstruct;
    let surfaces = crate::par::try_map(&rec.yarns, build_surface_mesh).stage(st)?;
    let volumes = crate::par::try_map(&rec.yarns, build_volume_mesh).stage(st)?;
    let mut reinforcement = VolumeMesh {
        vertices: Vec::new(),
        cells: Vec::new(),
        cell_labels: Vec::new(),
    };
    for v in &volumes {
        reinforcement.append(v);
    }
    let (composite, _) = build_composite_mesh(
        &rec.yarns,
        model_bbox,
        unit_um,
        cfg.reconstruct.composite_voxel_um,
        cfg.voxelize.budget,
    )
    .stage(st)?;
    let obj = write_obj(
        rec.yarns
            .iter()
            .zip(&surfaces)
            .map(|(y, m)| (format!("yarn_{}", y.id), m)),
    );
    let outputs = [
        (files::YARNS, yarns_to_json(&rec.yarns)),
        (
            files::SUMMARY,
            json_pretty(&(&rec.summaries, &rec.discarded)),
        ),
        (files::SURFACE, obj),
        (
            files::VOLUME,
            write_vtk(&reinforcement, "reinforcement wedge mesh"),
        ),
        (
            files::COMPOSITE,
            write_vtk(&composite, "composite voxel mesh"),
        ),
    ];
    let mut paths = Vec::new();
    for (name, text) in outputs {
        let p = out.join(name);
        fsio::write_atomic(&p, text.as_bytes()).stage(st)?;
        paths.push(p);
    }
    Ok(paths)
}

/// Track, complete, fit and mesh; the volume sidecar supplies slice
/// geometry, the model only the composite box.
pub fn cmd_reconstruct(
    detections: &Path,
    header: &Path,
    model: &Path,
    cfg: &PipelineConfig,
    out: &Path,
) -> StageResult<Vec<PathBuf>> {
    let st = Stage::Reconstruct;
    let h = read_header(header).stage(st)?;
    let grid = h.grid();
    let sets = read_detections(detections, Some(header), Provenance::External).stage(st)?;
    let m = read_model(model).stage(st)?;
    let rec = reconstruct_all(&sets, &grid, &cfg.reconstruct_params(&grid)).stage(st)?;
    write_reconstruction(&rec, &m.bbox, m.unit_um, cfg, out)
}

pub fn assess(
    model: &TextileModel,
    yarns: &[crate::reconstruct::ReconstructedYarn],
    cfg: &PipelineConfig,
) -> Result<ValidationReport> {
    Ok(ValidationReport {
        paths: match_and_assess_paths(
            model,
            yarns,
            cfg.voxelize.voxel_size_um,
            cfg.validate.resample_n,
        )?,
        vf: vf_distribution(yarns, &model.fibers, cfg.validate.n_bins)?,
    })
}

pub fn write_report(report: &ValidationReport, out: &Path) -> StageResult<Vec<PathBuf>> {
    let outputs = [
        (files::REPORT, report.to_json()),
        (files::PATH_TABLE, path_table(&report.paths)),
        (files::VF_TABLE, vf_table(&report.vf)),
        (files::HISTOGRAM, histogram_csv(&report.vf)),
    ];
    let mut paths = Vec::new();
    for (name, text) in outputs {
        let p = out.join(name);
        fsio::write_atomic(&p, text.as_bytes()).stage(Stage::Validate)?;
        paths.push(p);
    }
    Ok(paths)
}

/// Writes `report.json`, both tables and the histogram CSV.
pub fn cmd_validate(
    model: &Path,
    yarns: &Path,
    cfg: &PipelineConfig,
    out: &Path,
) -> StageResult<ValidationReport> {
    let st = Stage::Validate;
    let m = read_model(model).stage(st)?;
    let y = crate::reconstruct::read_yarns(yarns).stage(st)?;
    let report = assess(&m, &y, cfg).stage(st)?;
    write_report(&report, out)?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: Stage,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    /// Relative to the output directory.
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub config: PipelineConfig,
    pub timings: Vec<StageTiming>,
    pub files: Vec<FileEntry>,
}

impl RunManifest {
    pub fn from_json(text: &str, source: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::parse(source, e))
    }

    /// Re-hash every listed file under `root`; returns the mismatching paths.
    pub fn verify(&self, root: &Path) -> Result<Vec<String>> {
        let mut bad = Vec::new();
        for f in &self.files {
            let bytes = fsio::read(&root.join(&f.path))?;
            if bytes.len() as u64 != f.bytes || fsio::sha256_hex(&bytes) != f.sha256 {
                bad.push(f.path.clone());
            }
        }
        Ok(bad)
    }
}

fn entry(root: &Path, path: &Path) -> Result<FileEntry> {
    let bytes = fsio::read(path)?;
    let rel = path.strip_prefix(root).unwrap_or(path);
    Ok(FileEntry {
        path: rel.to_string_lossy().replace('\\', "/"),
        bytes: bytes.len() as u64,
        sha256: fsio::sha256_hex(&bytes),
    })
}

/// Full run into `cfg.out_dir`; the manifest is written last.
pub fn cmd_pipeline(cfg: &PipelineConfig) -> StageResult<RunManifest> {
    cfg.validate().stage(Stage::Generate)?;
    let out = cfg.out_dir.as_path();
    let mut timings = Vec::new();
    let mut written: Vec<PathBuf> = Vec::new();
    let mut timed = |stage: Stage, t0: Instant| {
        let seconds = t0.elapsed().as_secs_f64();
        log::info!("{} done in {seconds:.2} s", stage.name());
        timings.push(StageTiming { stage, seconds });
    };

    let t0 = Instant::now();
    let model = generate_model(cfg).stage(Stage::Generate)?;
    let model_path = out.join(files::MODEL);
    fsio::write_atomic(
        &model_path,
        model.to_json().stage(Stage::Generate)?.as_bytes(),
    )
    .stage(Stage::Generate)?;
    written.push(model_path.clone());
    timed(Stage::Generate, t0);

    if let Some(h_final) = cfg.compact.h_final {
        let t0 = Instant::now();
        let dir = out.join("compaction");
        written.extend(cmd_compact(
            &model_path,
            h_final,
            cfg.compact.n_steps,
            &dir,
        )?);
        timed(Stage::Compact, t0);
    }

    let t0 = Instant::now();
    let raw = out.join(files::LABELS);
    let labels =
        voxelize(&model, cfg.voxelize.voxel_size_um, cfg.voxelize.budget).stage(Stage::Voxelize)?;
    let header = write_volume(&raw, &labels).stage(Stage::Voxelize)?;
    written.extend([raw, header.clone()]);
    timed(Stage::Voxelize, t0);

    let t0 = Instant::now();
    let gray = render_volume(&labels, &cfg.render_params()).stage(Stage::Render)?;
    let ct = out.join(files::PSEUDO_CT);
    let ct_side = write_volume(&ct, &gray).stage(Stage::Render)?;
    written.extend([ct, ct_side]);
    drop(gray);
    timed(Stage::Render, t0);

    let t0 = Instant::now();
    let mut sets = segment_volume(&labels, &cfg.segment);
    let det_path = out.join(files::DETECTIONS);
    fsio::write_atomic(&det_path, sets_to_jsonl(&sets).as_bytes()).stage(Stage::Segment)?;
    written.push(det_path);
    timed(Stage::Segment, t0);

    if cfg.degrade.enabled {
        let t0 = Instant::now();
        let params = cfg.degrade_params();
        sets = sets
            .iter()
            .map(|s| degrade(s, &params))
            .collect::<Result<Vec<_>>>()
            .stage(Stage::Degrade)?;
        let p = out.join(files::DEGRADED);
        fsio::write_atomic(&p, sets_to_jsonl(&sets).as_bytes()).stage(Stage::Degrade)?;
        written.push(p);
        timed(Stage::Degrade, t0);
    }

    let t0 = Instant::now();
    let rec = reconstruct_all(&sets, &labels.grid, &cfg.reconstruct_params(&labels.grid))
        .stage(Stage::Reconstruct)?;
    written.extend(write_reconstruction(
        &rec,
        &model.bbox,
        model.unit_um,
        cfg,
        out,
    )?);
    timed(Stage::Reconstruct, t0);

    let t0 = Instant::now();
    let report = assess(&model, &rec.yarns, cfg).stage(Stage::Validate)?;
    written.extend(write_report(&report, out)?);
    timed(Stage::Validate, t0);

    let files = written
        .iter()
        .map(|p| entry(out, p))
        .collect::<Result<Vec<_>>>()
        .stage(Stage::Validate)?;
    let manifest = RunManifest {
        tool: TOOL_NAME.into(),
        version: TOOL_VERSION.into(),
        config: cfg.clone(),
        timings,
        files,
    };
    fsio::write_atomic(
        &out.join(files::MANIFEST),
        json_pretty(&manifest).as_bytes(),
    )
    .stage(Stage::Validate)?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_the_desk_default() {
        let cfg = PipelineConfig::from_toml("", "empty.toml").unwrap();
        assert_eq!(cfg, PipelineConfig::default());
        assert_eq!(cfg.weave.warp_count() + cfg.weave.weft_count(), 16);
    }

    #[test]
    fn config_round_trips_through_toml() {
        let mut cfg = PipelineConfig {
            seed: 42,
            ..PipelineConfig::default()
        };
        cfg.compact.h_final = Some(50.0);
        cfg.reconstruct.d_gate = Some(9.5);
        let back = PipelineConfig::from_toml(&cfg.to_toml(), "c.toml").unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn bad_values_are_config_errors() {
        for text in [
            "unknown_key = 1",
            "[voxelize]\nvoxel_size_um = -1.0",
            "[degrade]\nsection_dropout_p = 2.0",
            "[weave]\nellipse_a = 0.0",
            "seed = \"x\"",
        ] {
            let err = PipelineConfig::from_toml(text, "c.toml").unwrap_err();
            assert!(matches!(err, Error::Config(_)), "{text}: {err}");
        }
    }

    #[test]
    fn stage_seeds_differ_and_are_stable() {
        let cfg = PipelineConfig::default();
        assert_ne!(
            cfg.stage_seed(Stage::Render),
            cfg.stage_seed(Stage::Degrade)
        );
        assert_eq!(cfg.stage_seed(Stage::Render), seeds::derive(0, "render"));
    }

    #[test]
    fn exit_codes() {
        let e = |stage, source| StageError { stage, source };
        assert_eq!(exit_code(&e(Stage::Voxelize, Error::Config("x".into()))), 2);
        assert_eq!(exit_code(&e(Stage::Voxelize, Error::parse("f", "m"))), 3);
        assert_eq!(exit_code(&e(Stage::Voxelize, Error::EmptyModel)), 13);
        assert_eq!(
            exit_code(&e(Stage::Validate, Error::Domain("d".into()))),
            18
        );
    }

    #[test]
    fn target_vf_sets_fiber_count() {
        let mut cfg = PipelineConfig::default();
        cfg.generate.target_vf = Some(0.6);
        let f = cfg.fiber_spec().unwrap();
        let nominal = ellipse_section(Point3::origin(), Vector3::x(), 12.0, 5.0, 0.0).unwrap();
        let vf = f.fiber_area() / section_area(&nominal).unwrap();
        assert!((vf - 0.6).abs() < 1e-3);
    }
}
