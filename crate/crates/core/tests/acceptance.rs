//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails. Tolerances and runtime limits are fixed here.

use std::collections::BTreeSet;
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use textile_core::geometry::{
    ellipse_section, section_area, Aabb, CrossSection, Point3, Polyline, Vector3, KEYPOINTS,
};
use textile_core::pipeline::{
    cmd_pipeline, generate_model, segment_volume, PipelineConfig, RunManifest,
};
use textile_core::reconstruct::{
    build_surface_mesh, build_volume_mesh, reconstruct_all, Reconstruction, YarnSummary,
};
use textile_core::segmenter::{degrade, DegradeParams, DetectionSet};
use textile_core::synthgen::{compaction_sequence, FiberSpec, TextileModel};
use textile_core::validate::{
    fiber_volume_fraction, hausdorff, hex_packing_limit, match_and_assess_paths, vf_distribution,
};
use textile_core::voxelizer::{
    dimension_check, slice_count, voxelize, Grid, LabelVolume, SliceAxis,
};

type Check = Result<String, String>;
/// Inclusive slice ranges: interior runs, then runs at the track ends.
type Runs = (Vec<(usize, usize)>, Vec<(usize, usize)>);

struct Fixture {
    cfg: PipelineConfig,
    model: TextileModel,
    labels: LabelVolume,
    clean: Vec<DetectionSet>,
    setup_s: f64,
}

fn fixture() -> Fixture {
    let t0 = Instant::now();
    let mut cfg = PipelineConfig::default();
    cfg.generate.target_vf = Some(0.6);
    let model = generate_model(&cfg).expect("desk model");
    let labels =
        voxelize(&model, cfg.voxelize.voxel_size_um, cfg.voxelize.budget).expect("voxelize");
    let clean = segment_volume(&labels, &cfg.segment);
    Fixture {
        cfg,
        model,
        labels,
        clean,
        setup_s: t0.elapsed().as_secs_f64(),
    }
}

fn within(limit_s: f64, seconds: f64) -> Check {
    if seconds < limit_s {
        Ok(format!("{seconds:.2} s < {limit_s} s"))
    } else {
        Err(format!("took {seconds:.2} s, limit {limit_s} s"))
    }
}

fn with_extent(fx: &Fixture, extent: [f64; 3]) -> TextileModel {
    let mut m = fx.model.clone();
    // 20 µm per model unit, so an extent in voxels is an extent in units
    m.bbox = Aabb::new(
        Point3::origin(),
        Point3::new(extent[0], extent[1], extent[2]),
    );
    m
}

fn criterion_1(fx: &Fixture) -> Check {
    let t0 = Instant::now();
    let pre = dimension_check(&with_extent(fx, [1698.0, 1814.0, 402.0]), 20.0)
        .map_err(|e| e.to_string())?;
    let post = dimension_check(&with_extent(fx, [1401.0, 1401.0, 321.0]), 20.0)
        .map_err(|e| e.to_string())?;
    let xz = slice_count(pre.dims, SliceAxis::XZ);
    let yz = slice_count(pre.dims, SliceAxis::YZ);
    let secs = t0.elapsed().as_secs_f64();
    if pre.dims != [1698, 1814, 402]
        || post.dims != [1401, 1401, 321]
        || xz + yz != 3512
        || (xz, yz) != (1814, 1698)
    {
        return Err(format!(
            "dims {:?} and {:?}, slices {xz} + {yz}",
            pre.dims, post.dims
        ));
    }
    let t = within(1.0, secs)?;
    Ok(format!(
        "1698x1814x402, 1401x1401x321, 1814 + 1698 = 3512 slices; {t}"
    ))
}

fn criterion_2(fx: &Fixture) -> Check {
    let t0 = Instant::now();
    let h_init = fx.model.thickness;
    let h_final = 0.6 * h_init;
    let steps = compaction_sequence(&fx.model, h_final, 12).map_err(|e| e.to_string())?;
    let mid = fx.model.mid_plane();
    let mut worst_h = 0.0f64;
    let mut worst_mid = 0.0f64;
    for (k, m) in steps.iter().enumerate() {
        let expect = h_init - (k + 1) as f64 * (h_init - h_final) / 12.0;
        worst_h = worst_h.max((m.thickness - expect).abs() / expect);
        worst_mid = worst_mid.max((m.mid_plane() - mid).abs() / mid.abs().max(1.0));
        let s = m.thickness / h_init;
        for (y0, yk) in fx.model.yarns.iter().zip(&m.yarns) {
            for (a, b) in y0.sections.iter().zip(&yk.sections) {
                let expect_z = mid + (a.center.z - mid) * s;
                let err = (b.center.z - expect_z)
                    .abs()
                    .max((b.center.x - a.center.x).abs())
                    .max((b.center.y - a.center.y).abs());
                worst_mid = worst_mid.max(err / h_init);
            }
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    if steps.len() != 12 || worst_h > 1e-9 || worst_mid > 1e-9 {
        return Err(format!(
            "{} steps, thickness rel err {worst_h:.2e}, mid-plane rel err {worst_mid:.2e}",
            steps.len()
        ));
    }
    let t = within(1.0, secs)?;
    Ok(format!(
        "12 steps, thickness rel err {worst_h:.1e}, mid-plane rel err {worst_mid:.1e}; {t}"
    ))
}

fn round_trip(fx: &Fixture, sets: &[DetectionSet]) -> Result<(Reconstruction, Vec<f64>), String> {
    let grid: Grid = fx.labels.grid;
    let rec = reconstruct_all(sets, &grid, &fx.cfg.reconstruct_params(&grid))
        .map_err(|e| e.to_string())?;
    let report = match_and_assess_paths(
        &fx.model,
        &rec.yarns,
        fx.cfg.voxelize.voxel_size_um,
        fx.cfg.validate.resample_n,
    )
    .map_err(|e| e.to_string())?;
    if !report.unmatched_gt.is_empty() || !report.unmatched_rec.is_empty() {
        return Err(format!(
            "unmatched ground truth {:?}, unmatched reconstructed {:?}",
            report.unmatched_gt, report.unmatched_rec
        ));
    }
    Ok((rec, report.pairs.iter().map(|p| p.symmetric).collect()))
}

fn criterion_3(fx: &Fixture) -> Result<(String, Reconstruction), String> {
    let t0 = Instant::now();
    let (rec, h) = round_trip(fx, &fx.clean)?;
    let secs = fx.setup_s + t0.elapsed().as_secs_f64();
    let n = fx.model.yarns.len();
    let ok = h.iter().filter(|&&d| d <= 2.0).count();
    let max = h.iter().cloned().fold(0.0, f64::max);
    if rec.yarns.len() != n || ok != n {
        return Err(format!(
            "{} tracks for {n} yarns, {ok}/{n} within 2 voxels, max {max:.3}",
            rec.yarns.len()
        ));
    }
    let t = within(60.0, secs)?;
    Ok((
        format!("{n} tracks for {n} yarns, all within 2 voxels (max {max:.3}); {t}"),
        rec,
    ))
}

/// Slices without a detection of `label`, split into interior runs and
/// runs touching either end of the track.
fn missing_runs(set: &DetectionSet, label: u32) -> Runs {
    let present: Vec<usize> = (0..set.n_slices())
        .filter(|&s| set.slices[s].iter().any(|d| d.true_label == Some(label)))
        .collect();
    let (mut interior, mut boundary) = (Vec::new(), Vec::new());
    let (Some(&first), Some(&last)) = (present.first(), present.last()) else {
        return (interior, boundary);
    };
    if first > 0 {
        boundary.push((0, first - 1));
    }
    for w in present.windows(2) {
        if w[1] > w[0] + 1 {
            interior.push((w[0] + 1, w[1] - 1));
        }
    }
    if last + 1 < set.n_slices() {
        boundary.push((last + 1, set.n_slices() - 1));
    }
    (interior, boundary)
}

fn gaps_of(s: &YarnSummary) -> Runs {
    (
        s.filled_gaps.iter().map(|g| (g.start, g.end)).collect(),
        s.boundary_gaps.iter().map(|g| (g.start, g.end)).collect(),
    )
}

fn criterion_4(fx: &Fixture) -> Check {
    let t0 = Instant::now();
    let params = DegradeParams {
        keypoint_jitter_sigma: 0.5,
        section_dropout_p: 0.2,
        confidence_floor: 0.1,
        seed: 20_240_531,
    };
    let degraded: Vec<DetectionSet> = fx
        .clean
        .iter()
        .map(|s| degrade(s, &params))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let (rec, h) = round_trip(fx, &degraded)?;
    let secs = fx.setup_s + t0.elapsed().as_secs_f64();
    let n = h.len();
    let ok = h.iter().filter(|&&d| d <= 3.0).count();
    let max = h.iter().cloned().fold(0.0, f64::max);
    let mut injected = 0;
    let mut boundary = 0;
    for (y, s) in rec.yarns.iter().zip(&rec.summaries) {
        let label = y
            .true_label
            .ok_or(format!("yarn {} has no majority label", y.id))?;
        let set = degraded
            .iter()
            .find(|d| d.axis == s.axis)
            .expect("axis present");
        let (want_interior, want_boundary) = missing_runs(set, label);
        let (got_interior, got_boundary) = gaps_of(s);
        let filled: usize = want_interior.iter().map(|(a, b)| b - a + 1).sum();
        let missing_at_ends: usize = want_boundary.iter().map(|(a, b)| b - a + 1).sum();
        if got_interior != want_interior
            || got_boundary != want_boundary
            || s.n_completed != filled
            || s.n_sections + missing_at_ends != set.n_slices()
            || y.completed.iter().filter(|&&c| c).count() != filled
        {
            return Err(format!(
                "yarn {}: interior {got_interior:?} vs {want_interior:?}, boundary {got_boundary:?} vs {want_boundary:?}",
                y.id
            ));
        }
        injected += want_interior.len();
        boundary += want_boundary.len();
    }
    if (ok as f64) < 0.95 * n as f64 || n != fx.model.yarns.len() {
        return Err(format!("{ok}/{n} yarns within 3 voxels, max {max:.3}"));
    }
    let t = within(90.0, secs)?;
    Ok(format!(
        "{ok}/{n} within 3 voxels (max {max:.3}), {injected} interior gaps filled, {boundary} boundary gaps reported; {t}"
    ))
}

fn criterion_5(rec: &Reconstruction) -> Check {
    let t0 = Instant::now();
    let mut worst = 0.0f64;
    for y in &rec.yarns {
        let s = y.sections.len();
        let surf = build_surface_mesh(y).map_err(|e| format!("yarn {}: {e}", y.id))?;
        let vol = build_volume_mesh(y).map_err(|e| format!("yarn {}: {e}", y.id))?;
        if surf.quads.len() != KEYPOINTS * (s - 1) || surf.cap_triangles.len() != 2 * KEYPOINTS {
            return Err(format!(
                "yarn {}: {} quads, {} cap triangles for {s} sections",
                y.id,
                surf.quads.len(),
                surf.cap_triangles.len()
            ));
        }
        if !surf.is_watertight() || surf.euler_characteristic() != 2 {
            return Err(format!(
                "yarn {}: watertight {}, chi {}",
                y.id,
                surf.is_watertight(),
                surf.euler_characteristic()
            ));
        }
        let (a, b) = (surf.enclosed_volume(), vol.total_volume());
        worst = worst.max((a - b).abs() / b);
    }
    let secs = t0.elapsed().as_secs_f64();
    if worst > 0.01 {
        return Err(format!(
            "surface vs wedge volume differ by {:.3}%",
            100.0 * worst
        ));
    }
    let t = within(10.0, secs)?;
    Ok(format!(
        "{} yarns: 10(S-1) quads + 20 caps, watertight, chi 2, volume agreement {:.1e}; {t}",
        rec.yarns.len(),
        worst
    ))
}

/// A 1000-fiber spec whose area over `area` is exactly `raw` up to rounding.
fn fibers_for_raw(area: f64, raw: f64) -> FiberSpec {
    FiberSpec {
        fiber_radius: (raw * area / (1000.0 * std::f64::consts::PI)).sqrt(),
        fibers_per_yarn: 1000,
    }
}

fn criterion_6(fx: &Fixture, rec: &Reconstruction) -> Check {
    let t0 = Instant::now();
    let report = vf_distribution(&rec.yarns, &fx.model.fibers, fx.cfg.validate.n_bins)
        .map_err(|e| e.to_string())?;
    let all: Vec<f64> = report
        .yarns
        .iter()
        .flat_map(|y| y.values.iter().copied())
        .collect();
    if !(0.55..=0.65).contains(&report.mean) || all.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(format!("mean Vf {:.4}, range check failed", report.mean));
    }
    let sec = ellipse_section(
        Point3::new(1.0, 2.0, 3.0),
        Vector3::new(1.0, 1.0, 0.5),
        12.0,
        5.0,
        0.3,
    )
    .map_err(|e| e.to_string())?;
    let area = section_area(&sec).map_err(|e| e.to_string())?;
    let limit = hex_packing_limit();
    let mut cases = 0;
    for raw in [
        0.5,
        0.9,
        0.92,
        limit * (1.0 + 1e-9),
        0.999,
        1.0 + 1e-9,
        1.05,
        2.0,
    ] {
        let v =
            fiber_volume_fraction(&sec, &fibers_for_raw(area, raw)).map_err(|e| e.to_string())?;
        let expect_vf = v.raw.min(1.0);
        if v.capped != (v.raw > 1.0) || v.over_hex != (expect_vf > limit) || v.vf != expect_vf {
            return Err(format!("raw {raw}: {v:?}"));
        }
        if (raw > 1.0) != v.capped || (raw.min(1.0) > limit) != v.over_hex {
            return Err(format!("raw {raw} constructed as {}: {v:?}", v.raw));
        }
        cases += 1;
    }
    let secs = t0.elapsed().as_secs_f64();
    let t = within(5.0, secs)?;
    Ok(format!(
        "mean Vf {:.4} over {} sections, all in [0, 1], {cases} flag edge cases; {t}",
        report.mean, report.total_sections
    ))
}

fn criterion_7() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut manifests: Vec<RunManifest> = Vec::new();
    for run in ["a", "b"] {
        let mut cfg = PipelineConfig {
            seed: 7,
            out_dir: dir.path().join(run),
            ..PipelineConfig::default()
        };
        cfg.compact.h_final = Some(8.0);
        let m = cmd_pipeline(&cfg).map_err(|e| e.to_string())?;
        let bad = m.verify(&cfg.out_dir).map_err(|e| e.to_string())?;
        if !bad.is_empty() {
            return Err(format!("digests do not match after run {run}: {bad:?}"));
        }
        manifests.push(m);
    }
    let (a, b) = (&manifests[0], &manifests[1]);
    if a.files != b.files {
        let differ: BTreeSet<&str> = a
            .files
            .iter()
            .zip(&b.files)
            .filter(|(x, y)| x != y)
            .map(|(x, _)| x.path.as_str())
            .collect();
        return Err(format!("artifacts differ: {differ:?}"));
    }
    Ok(format!(
        "{} artifacts byte-identical across two runs, digests verified",
        a.files.len()
    ))
}

fn brute_force_one_sided(a: &[Point3], b: &[Point3]) -> f64 {
    a.iter()
        .map(|p| {
            b.iter()
                .map(|q| (p - q).norm())
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
}

/// Points every `step` along each segment, vertices included.
fn dense(points: &[Point3], step: f64) -> Vec<Point3> {
    let mut out = vec![points[0]];
    for w in points.windows(2) {
        let n = ((w[1] - w[0]).norm() / step).ceil().max(1.0) as usize;
        out.extend((1..=n).map(|i| w[0] + (w[1] - w[0]) * (i as f64 / n as f64)));
    }
    out
}

fn random_polyline(rng: &mut ChaCha8Rng) -> Vec<Point3> {
    let n = rng.random_range(2..12);
    let mut p = Point3::new(
        rng.random_range(-20.0..20.0),
        rng.random_range(-20.0..20.0),
        rng.random_range(-5.0..5.0),
    );
    let mut pts = vec![p];
    for _ in 1..n {
        p += Vector3::new(
            rng.random_range(-8.0..8.0),
            rng.random_range(-8.0..8.0),
            rng.random_range(-3.0..3.0),
        );
        pts.push(p);
    }
    pts
}

fn shoelace(ring: &[(f64, f64)]) -> f64 {
    let n = ring.len();
    0.5 * (0..n)
        .map(|i| ring[i].0 * ring[(i + 1) % n].1 - ring[(i + 1) % n].0 * ring[i].1)
        .sum::<f64>()
        .abs()
}

fn criterion_8() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst = 0.0f64;
    for pair in 0..25 {
        let (pa, pb) = (random_polyline(&mut rng), random_polyline(&mut rng));
        let (a, b) = (
            Polyline::new(pa.clone()).map_err(|e| e.to_string())?,
            Polyline::new(pb.clone()).map_err(|e| e.to_string())?,
        );
        if a.length() == 0.0 || b.length() == 0.0 {
            continue;
        }
        let tol = a.length().max(b.length()) / 200.0;
        let got = hausdorff(&a, &b, 200).map_err(|e| e.to_string())?;
        let step = tol / 50.0;
        let (da, db) = (dense(&pa, step), dense(&pb, step));
        let oracle = brute_force_one_sided(&da, &db).max(brute_force_one_sided(&db, &da));
        let err = (got.symmetric - oracle).abs();
        if err > tol {
            return Err(format!(
                "pair {pair}: hausdorff {:.4} vs oracle {oracle:.4}, tol {tol:.4}",
                got.symmetric
            ));
        }
        worst = worst.max(err / tol);
    }
    let mut area_err = 0.0f64;
    for k in 0..25 {
        let (a, b) = (rng.random_range(0.5..20.0), rng.random_range(0.5..20.0));
        let rot = rng.random_range(0.0..std::f64::consts::TAU);
        let normal = Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(0.1..1.0),
        );
        let center = Point3::new(
            rng.random_range(-50.0..50.0),
            rng.random_range(-50.0..50.0),
            rng.random_range(-50.0..50.0),
        );
        let ring: Vec<(f64, f64)> = (0..KEYPOINTS)
            .map(|i| {
                let t = rot + std::f64::consts::TAU * i as f64 / KEYPOINTS as f64;
                (a * t.cos(), b * t.sin())
            })
            .collect();
        let n = normal.normalize();
        let u = n.cross(&Vector3::new(0.3, -0.7, 0.2)).normalize();
        let v = n.cross(&u);
        let contour: [Point3; KEYPOINTS] =
            std::array::from_fn(|i| center + u * ring[i].0 + v * ring[i].1);
        let sec = CrossSection::from_contour(contour, 0.0);
        let got = section_area(&sec).map_err(|e| e.to_string())?;
        let analytic =
            0.5 * KEYPOINTS as f64 * a * b * (std::f64::consts::TAU / KEYPOINTS as f64).sin();
        let lace = shoelace(&ring);
        let err = ((got - analytic).abs() / analytic).max((lace - analytic).abs() / analytic);
        if err > 1e-9 {
            return Err(format!(
                "decagon {k} ({a:.3} x {b:.3}): area {got} vs {analytic}"
            ));
        }
        area_err = area_err.max(err);
    }
    Ok(format!(
        "25 pairs within length/200 (worst {:.2} of tol), 25 decagon areas within {area_err:.1e}",
        worst
    ))
}

fn report(n: usize, name: &str, result: &Check, failures: &mut usize) {
    match result {
        Ok(detail) => println!("criterion {n} [{name}]: PASS  {detail}"),
        Err(detail) => {
            *failures += 1;
            println!("criterion {n} [{name}]: FAIL  {detail}");
        }
    }
}

fn main() -> ExitCode {
    // a libtest filter argument names a single test; run all or nothing
    let args: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    if !args.is_empty() && !args.iter().any(|a| "acceptance".contains(a.as_str())) {
        return ExitCode::SUCCESS;
    }
    let fx = fixture();
    let mut failures = 0;
    report(1, "volume bookkeeping", &criterion_1(&fx), &mut failures);
    report(2, "compaction", &criterion_2(&fx), &mut failures);
    let c3 = criterion_3(&fx);
    report(
        3,
        "clean round trip",
        &c3.as_ref().map(|(s, _)| s.clone()).map_err(|e| e.clone()),
        &mut failures,
    );
    report(4, "degraded round trip", &criterion_4(&fx), &mut failures);
    match &c3 {
        Ok((_, rec)) => {
            report(5, "mesh integrity", &criterion_5(rec), &mut failures);
            report(
                6,
                "Vf self-consistency",
                &criterion_6(&fx, rec),
                &mut failures,
            );
        }
        Err(_) => {
            let skipped: Check = Err("clean reconstruction unavailable".into());
            report(5, "mesh integrity", &skipped, &mut failures);
            report(6, "Vf self-consistency", &skipped, &mut failures);
        }
    }
    report(7, "determinism", &criterion_7(), &mut failures);
    report(8, "metric oracles", &criterion_8(), &mut failures);
    println!("acceptance: {} of 8 criteria passed", 8 - failures);
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
