//! Every artifact of a full run re-parses and re-serializes to identical bytes.

use std::path::Path;
use std::sync::OnceLock;

use textile_core::pipeline::{cmd_pipeline, files, PipelineConfig, RunManifest};
use textile_core::reconstruct::{
    parse_obj, parse_vtk, write_obj, write_vtk, yarns_from_json, yarns_to_json, DiscardedTrack,
    YarnSummary,
};
use textile_core::segmenter::{parse_jsonl, to_jsonl};
use textile_core::synthgen::TextileModel;
use textile_core::validate::{parse_histogram_csv, ValidationReport};
use textile_core::voxelizer::{read_volume, sidecar_path, write_volume};

struct Run {
    _dir: tempfile::TempDir,
    root: std::path::PathBuf,
    manifest: RunManifest,
}

fn run() -> &'static Run {
    static RUN: OnceLock<Run> = OnceLock::new();
    RUN.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = PipelineConfig {
            out_dir: dir.path().to_path_buf(),
            ..PipelineConfig::default()
        };
        cfg.compact.h_final = Some(8.0);
        cfg.compact.n_steps = 3;
        let manifest = cmd_pipeline(&cfg).unwrap();
        Run {
            root: dir.path().to_path_buf(),
            _dir: dir,
            manifest,
        }
    })
}

fn text(name: &str) -> String {
    std::fs::read_to_string(run().root.join(name)).unwrap()
}

fn pretty<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).unwrap() + "\n"
}

#[test]
fn manifest_lists_every_artifact_with_matching_digests() {
    let r = run();
    assert!(r.manifest.verify(&r.root).unwrap().is_empty());
    let listed: Vec<&str> = r.manifest.files.iter().map(|f| f.path.as_str()).collect();
    for name in [
        files::MODEL,
        files::LABELS,
        files::DETECTIONS,
        files::YARNS,
        files::COMPOSITE,
        files::REPORT,
    ] {
        assert!(listed.contains(&name), "{name} missing from manifest");
    }
    assert!(listed.contains(&"compaction/model_03.json"));
    let back = RunManifest::from_json(&text(files::MANIFEST), "manifest.json").unwrap();
    assert_eq!(back, r.manifest);
    assert_eq!(pretty(&back), text(files::MANIFEST));
}

#[test]
fn model_round_trips() {
    let t = text(files::MODEL);
    let m = TextileModel::from_json(&t, "model.json").unwrap();
    assert_eq!(m.schema, 1);
    assert_eq!(m.to_json().unwrap(), t);
}

fn volume_round_trip<T: textile_core::voxelizer::Voxel>(name: &str) {
    let src = run().root.join(name);
    let vol: textile_core::voxelizer::Volume<T> = read_volume(&src).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let dst = dir.path().join(name);
    write_volume(&dst, &vol).unwrap();
    for (a, b) in [
        (src.clone(), dst.clone()),
        (sidecar_path(&src), sidecar_path(&dst)),
    ] {
        assert!(
            std::fs::read(&a).unwrap() == std::fs::read(&b).unwrap(),
            "{}",
            a.display()
        );
    }
}

#[test]
fn volumes_round_trip() {
    volume_round_trip::<u16>(files::LABELS);
    volume_round_trip::<f32>(files::PSEUDO_CT);
}

#[test]
fn detections_round_trip() {
    for name in [files::DETECTIONS, files::DEGRADED] {
        let t = text(name);
        let recs = parse_jsonl(&t, name).unwrap();
        assert!(!recs.is_empty());
        assert_eq!(to_jsonl(recs.iter()), t);
    }
}

#[test]
fn reconstruction_round_trips() {
    let t = text(files::YARNS);
    let yarns = yarns_from_json(&t, "yarns.json").unwrap();
    assert_eq!(yarns_to_json(&yarns), t);
    let s = text(files::SUMMARY);
    let parsed: (Vec<YarnSummary>, Vec<DiscardedTrack>) = serde_json::from_str(&s).unwrap();
    assert_eq!(parsed.0.len(), yarns.len());
    assert_eq!(pretty(&parsed), s);
}

#[test]
fn meshes_round_trip() {
    let obj = text(files::SURFACE);
    let meshes = parse_obj(&obj, "reinforcement.obj").unwrap();
    assert_eq!(meshes.len(), 16);
    assert_eq!(write_obj(meshes.iter().map(|(n, m)| (n.clone(), m))), obj);
    for name in [files::VOLUME, files::COMPOSITE] {
        let t = text(name);
        let title = t.lines().nth(1).unwrap();
        assert_eq!(write_vtk(&parse_vtk(&t, name).unwrap(), title), t);
    }
}

#[test]
fn report_and_tables_round_trip() {
    let t = text(files::REPORT);
    let report = ValidationReport::from_json(&t, "report.json").unwrap();
    assert_eq!(report.to_json(), t);
    let bins = parse_histogram_csv(&text(files::HISTOGRAM), "vf_histogram.csv").unwrap();
    assert_eq!(bins, report.vf.histogram);
    assert!(text(files::PATH_TABLE).lines().count() > report.paths.pairs.len());
}

#[test]
fn malformed_artifacts_name_file_and_field() {
    let e = yarns_from_json("[{\"id\": 1, \"family\": \"warp\"}]", "broken.json")
        .unwrap_err()
        .to_string();
    assert!(e.contains("broken.json") && e.contains("path"), "{e}");
    let e = parse_jsonl("{\"axis\": \"XZ\"}\n", "d.jsonl")
        .unwrap_err()
        .to_string();
    assert!(e.contains("d.jsonl") && e.contains("slice_index"), "{e}");
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("none.raw");
    let e = read_volume::<u16>(Path::new(&missing))
        .unwrap_err()
        .to_string();
    assert!(e.contains("none"), "{e}");
}
