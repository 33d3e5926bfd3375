//! Validation of a reconstruction against ground truth: Hausdorff distance
//! between yarn paths and intra-yarn fiber volume fraction.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::geometry::{resample_arclength, section_area, CrossSection, Point3, Polyline};
use crate::reconstruct::ReconstructedYarn;
use crate::synthgen::{Family, FiberSpec, TextileModel};
use crate::{par, Error, Result};

/// Default arc-length resampling for path comparison.
pub const DEFAULT_RESAMPLE_N: usize = 200;
pub const DEFAULT_N_BINS: usize = 20;

/// Density of hexagonally packed circles, π/(2√3).
pub fn hex_packing_limit() -> f64 {
    std::f64::consts::PI / (2.0 * 3f64.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hausdorff {
    pub a_to_b: f64,
    pub b_to_a: f64,
    pub symmetric: f64,
}

fn directed(a: &[Point3], b: &[Point3]) -> f64 {
    a.iter()
        .map(|p| {
            b.iter()
                .map(|q| (p - q).norm_squared())
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
        .sqrt()
}

/// Hausdorff distances between the point sets of both polylines resampled
/// to `resample_n` points by arc length. Accurate to about length/resample_n.
pub fn hausdorff(a: &Polyline, b: &Polyline, resample_n: usize) -> Result<Hausdorff> {
    if resample_n < 2 {
        return Err(Error::Domain(format!(
            "resample_n must be >= 2, got {resample_n}"
        )));
    }
    if !(a.length() > 0.0) || !(b.length() > 0.0) {
        return Err(Error::DegenerateGeometry("polyline has zero length".into()));
    }
    let ra = resample_arclength(a.points(), resample_n)?;
    let rb = resample_arclength(b.points(), resample_n)?;
    let a_to_b = directed(&ra, &rb);
    let b_to_a = directed(&rb, &ra);
    Ok(Hausdorff {
        a_to_b,
        b_to_a,
        symmetric: a_to_b.max(b_to_a),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathPair {
    pub gt_id: u32,
    pub rec_id: u32,
    pub family: Family,
    /// Distances in voxels.
    pub gt_to_rec: f64,
    pub rec_to_gt: f64,
    pub symmetric: f64,
    /// Same distances in µm.
    pub gt_to_rec_um: f64,
    pub rec_to_gt_um: f64,
    pub symmetric_um: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathReport {
    pub voxel_size_um: f64,
    pub resample_n: usize,
    pub pairs: Vec<PathPair>,
    pub unmatched_gt: Vec<u32>,
    pub unmatched_rec: Vec<u32>,
    /// Sum of matched symmetric distances, voxels.
    pub total_cost: f64,
    pub max_symmetric: f64,
    /// Per-family count differences, reported rather than fatal.
    pub count_mismatches: Vec<String>,
}

/// Match yarns within each family greedily by smallest symmetric Hausdorff
/// distance and tabulate every pair.
pub fn match_and_assess_paths(
    gt: &TextileModel,
    rec: &[ReconstructedYarn],
    voxel_size_um: f64,
    resample_n: usize,
) -> Result<PathReport> {
    if gt.yarns.is_empty() || rec.is_empty() {
        return Err(Error::InsufficientData(
            "path assessment needs yarns on both sides".into(),
        ));
    }
    if !(voxel_size_um > 0.0) {
        return Err(Error::Domain(format!(
            "voxel size {voxel_size_um} must be positive"
        )));
    }
    let to_vox = gt.unit_um / voxel_size_um;
    let dense = resample_n.max(DEFAULT_RESAMPLE_N) * 4;
    let gt_lines: Vec<Polyline> = gt
        .yarns
        .iter()
        .map(|y| y.path_polyline(dense))
        .collect::<Result<_>>()?;
    let rec_lines: Vec<Polyline> = rec
        .iter()
        .map(|y| Polyline::new_dedup(y.path.sample_uniform(dense)))
        .collect::<Result<_>>()?;
    let mut report = PathReport {
        voxel_size_um,
        resample_n,
        pairs: Vec::new(),
        unmatched_gt: Vec::new(),
        unmatched_rec: Vec::new(),
        total_cost: 0.0,
        max_symmetric: 0.0,
        count_mismatches: Vec::new(),
    };
    for family in [Family::Warp, Family::Weft] {
        let g: Vec<usize> = (0..gt.yarns.len())
            .filter(|&i| gt.yarns[i].family == family)
            .collect();
        let r: Vec<usize> = (0..rec.len())
            .filter(|&i| rec[i].family == family)
            .collect();
        if g.len() != r.len() {
            report.count_mismatches.push(format!(
                "{family}: {} ground-truth yarns, {} reconstructed",
                g.len(),
                r.len()
            ));
        }
        let jobs: Vec<(usize, usize)> = g
            .iter()
            .flat_map(|&i| r.iter().map(move |&j| (i, j)))
            .collect();
        let dists = par::try_map(&jobs, |&(i, j)| {
            hausdorff(&gt_lines[i], &rec_lines[j], resample_n)
        })?;
        let mut order: Vec<usize> = (0..jobs.len()).collect();
        order.sort_by(|&x, &y| {
            dists[x]
                .symmetric
                .total_cmp(&dists[y].symmetric)
                .then(jobs[x].cmp(&jobs[y]))
        });
        let (mut g_used, mut r_used) = (vec![false; gt.yarns.len()], vec![false; rec.len()]);
        let mut pairs = Vec::new();
        for k in order {
            let (i, j) = jobs[k];
            if g_used[i] || r_used[j] {
                continue;
            }
            g_used[i] = true;
            r_used[j] = true;
            let d = dists[k];
            pairs.push(PathPair {
                gt_id: gt.yarns[i].id,
                rec_id: rec[j].id,
                family,
                gt_to_rec: d.a_to_b * to_vox,
                rec_to_gt: d.b_to_a * to_vox,
                symmetric: d.symmetric * to_vox,
                gt_to_rec_um: d.a_to_b * gt.unit_um,
                rec_to_gt_um: d.b_to_a * gt.unit_um,
                symmetric_um: d.symmetric * gt.unit_um,
            });
        }
        pairs.sort_by_key(|p| p.gt_id);
        report.pairs.extend(pairs);
        report
            .unmatched_gt
            .extend(g.iter().filter(|&&i| !g_used[i]).map(|&i| gt.yarns[i].id));
        report
            .unmatched_rec
            .extend(r.iter().filter(|&&j| !r_used[j]).map(|&j| rec[j].id));
    }
    report.total_cost = report.pairs.iter().map(|p| p.symmetric).sum();
    report.max_symmetric = report.pairs.iter().map(|p| p.symmetric).fold(0.0, f64::max);
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SectionVf {
    /// Capped to [0, 1].
    pub vf: f64,
    /// Before capping.
    pub raw: f64,
    /// The cap was applied (raw > 1).
    pub capped: bool,
    /// vf above the hexagonal packing limit.
    pub over_hex: bool,
}

/// `min(1, N_f·π·r_f² / A)` with A the 10-gon shoelace area.
pub fn fiber_volume_fraction(section: &CrossSection, fibers: &FiberSpec) -> Result<SectionVf> {
    fibers.validate()?;
    let area = section_area(section)?;
    if !(area > 0.0) {
        return Err(Error::InvalidContour("section has no area".into()));
    }
    let raw = fibers.fiber_area() / area;
    let vf = raw.min(1.0);
    Ok(SectionVf {
        vf,
        raw,
        capped: raw > 1.0,
        over_hex: vf > hex_packing_limit(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YarnVf {
    pub yarn_id: u32,
    pub family: Family,
    pub n_sections: usize,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub bin_left: f64,
    pub bin_right: f64,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VfReport {
    pub yarns: Vec<YarnVf>,
    pub histogram: Vec<HistogramBin>,
    pub total_sections: usize,
    pub mean: f64,
    pub count_capped: usize,
    pub count_over_hex: usize,
    pub hex_limit: f64,
}

/// Vf of every section, per-yarn statistics and an `n_bins` histogram over
/// [0, 1] (last bin closed).
pub fn vf_distribution(
    yarns: &[ReconstructedYarn],
    fibers: &FiberSpec,
    n_bins: usize,
) -> Result<VfReport> {
    if n_bins < 1 {
        return Err(Error::Domain("histogram needs at least one bin".into()));
    }
    let per_yarn = par::try_map(yarns, |y| {
        y.sections
            .iter()
            .map(|s| fiber_volume_fraction(s, fibers))
            .collect::<Result<Vec<_>>>()
    })?;
    let total: usize = per_yarn.iter().map(Vec::len).sum();
    if total == 0 {
        return Err(Error::InsufficientData("no sections to assess".into()));
    }
    let mut counts = vec![0u64; n_bins];
    let (mut capped, mut over_hex, mut sum) = (0, 0, 0.0);
    let mut stats = Vec::with_capacity(yarns.len());
    for (y, vals) in yarns.iter().zip(&per_yarn) {
        for v in vals {
            counts[((v.vf * n_bins as f64) as usize).min(n_bins - 1)] += 1;
            capped += v.capped as usize;
            over_hex += v.over_hex as usize;
            sum += v.vf;
        }
        let values: Vec<f64> = vals.iter().map(|v| v.vf).collect();
        let n = values.len();
        stats.push(YarnVf {
            yarn_id: y.id,
            family: y.family,
            n_sections: n,
            mean: if n > 0 {
                values.iter().sum::<f64>() / n as f64
            } else {
                0.0
            },
            min: if n > 0 {
                values.iter().copied().fold(f64::INFINITY, f64::min)
            } else {
                0.0
            },
            max: values.iter().copied().fold(0.0, f64::max),
            values,
        });
    }
    Ok(VfReport {
        yarns: stats,
        histogram: counts
            .into_iter()
            .enumerate()
            .map(|(i, count)| HistogramBin {
                bin_left: i as f64 / n_bins as f64,
                bin_right: (i + 1) as f64 / n_bins as f64,
                count,
            })
            .collect(),
        total_sections: total,
        mean: sum / total as f64,
        count_capped: capped,
        count_over_hex: over_hex,
        hex_limit: hex_packing_limit(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub paths: PathReport,
    pub vf: VfReport,
}

impl ValidationReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str, source: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::parse(source, e))
    }
}

/// Left-aligned first column, right-aligned others, two-space gaps.
fn table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for r in rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.len());
        }
    }
    let line = |cells: Vec<&str>| {
        let mut s = String::new();
        for (i, (c, w)) in cells.iter().zip(&widths).enumerate() {
            if i > 0 {
                s.push_str("  ");
            }
            if i == 0 {
                write!(s, "{c:<w$}").unwrap();
            } else {
                write!(s, "{c:>w$}").unwrap();
            }
        }
        s.trim_end().to_string() + "\n"
    };
    let mut out = line(header.to_vec());
    for r in rows {
        out.push_str(&line(r.iter().map(String::as_str).collect()));
    }
    out
}

pub fn path_table(report: &PathReport) -> String {
    let rows: Vec<Vec<String>> = report
        .pairs
        .iter()
        .map(|p| {
            vec![
                p.family.to_string(),
                p.gt_id.to_string(),
                p.rec_id.to_string(),
                format!("{:.3}", p.gt_to_rec),
                format!("{:.3}", p.rec_to_gt),
                format!("{:.3}", p.symmetric),
                format!("{:.1}", p.symmetric_um),
            ]
        })
        .collect();
    let mut out = table(
        &[
            "family",
            "gt_id",
            "rec_id",
            "gt_to_rec_vox",
            "rec_to_gt_vox",
            "symmetric_vox",
            "symmetric_um",
        ],
        &rows,
    );
    for id in &report.unmatched_gt {
        writeln!(out, "unmatched ground-truth yarn {id}").unwrap();
    }
    for id in &report.unmatched_rec {
        writeln!(out, "unmatched reconstructed yarn {id}").unwrap();
    }
    for m in &report.count_mismatches {
        writeln!(out, "count mismatch: {m}").unwrap();
    }
    out
}

pub fn vf_table(report: &VfReport) -> String {
    let rows: Vec<Vec<String>> = report
        .yarns
        .iter()
        .map(|y| {
            vec![
                y.family.to_string(),
                y.yarn_id.to_string(),
                y.n_sections.to_string(),
                format!("{:.4}", y.mean),
                format!("{:.4}", y.min),
                format!("{:.4}", y.max),
            ]
        })
        .collect();
    let mut out = table(
        &[
            "family", "yarn_id", "sections", "vf_mean", "vf_min", "vf_max",
        ],
        &rows,
    );
    writeln!(
        out,
        "sections {}  mean {:.4}  capped {}  over hexagonal limit {}",
        report.total_sections, report.mean, report.count_capped, report.count_over_hex
    )
    .unwrap();
    out
}

pub fn histogram_csv(report: &VfReport) -> String {
    let mut out = String::from("bin_left,bin_right,count\n");
    for b in &report.histogram {
        writeln!(out, "{},{},{}", b.bin_left, b.bin_right, b.count).unwrap();
    }
    out
}

pub fn parse_histogram_csv(text: &str, source: &str) -> Result<Vec<HistogramBin>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, "bin_left,bin_right,count")) => {}
        _ => {
            return Err(Error::parse(
                format!("{source}:1"),
                "expected header bin_left,bin_right,count",
            ))
        }
    }
    lines
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, l)| {
            let at = format!("{source}:{}", i + 1);
            let f: Vec<&str> = l.split(',').collect();
            let bad = |what: &str| Error::parse(&at, format!("field {what} malformed"));
            if f.len() != 3 {
                return Err(Error::parse(&at, "expected 3 fields"));
            }
            Ok(HistogramBin {
                bin_left: f[0].parse().map_err(|_| bad("bin_left"))?,
                bin_right: f[1].parse().map_err(|_| bad("bin_right"))?,
                count: f[2].parse().map_err(|_| bad("count"))?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{ellipse_section, Vector3};
    use crate::reconstruct::ReconstructedYarn;
    use crate::synthgen::{generate_interlock, WeaveSpec};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn line(pts: &[[f64; 3]]) -> Polyline {
        Polyline::new(pts.iter().map(|p| Point3::new(p[0], p[1], p[2])).collect()).unwrap()
    }

    /// Dense brute-force oracle: both polylines sampled every `step`.
    pub(crate) fn brute_force(a: &Polyline, b: &Polyline, step: f64) -> (f64, f64) {
        let dense = |p: &Polyline| -> Vec<Point3> {
            let mut out = Vec::new();
            for w in p.points().windows(2) {
                let n = ((w[1] - w[0]).norm() / step).ceil().max(1.0) as usize;
                for k in 0..n {
                    out.push(w[0] + (w[1] - w[0]) * (k as f64 / n as f64));
                }
            }
            out.push(*p.points().last().unwrap());
            out
        };
        let (da, db) = (dense(a), dense(b));
        (directed(&da, &db), directed(&db, &da))
    }

    #[test]
    fn identical_polylines_are_zero() {
        let a = line(&[[0.0, 0.0, 0.0], [1.0, 2.0, 0.0], [3.0, 2.0, 1.0]]);
        let h = hausdorff(&a, &a, 50).unwrap();
        assert_eq!((h.a_to_b, h.b_to_a, h.symmetric), (0.0, 0.0, 0.0));
    }

    #[test]
    fn translated_copy_distance_is_offset() {
        let a = line(&[[0.0, 0.0, 0.0], [4.0, 1.0, 0.0], [7.0, 0.0, 0.0]]);
        let h = hausdorff(&a, &a.translated(&Vector3::new(0.0, 0.0, 0.7)), 100).unwrap();
        assert!((h.symmetric - 0.7).abs() < 1e-12);
    }

    #[test]
    fn spur_is_one_sided() {
        let a = line(&[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]]);
        let b = line(&[
            [0.0, 0.0, 0.0],
            [0.5, 0.0, 0.0],
            [0.5, 0.3, 0.0],
            [0.5, 0.0, 0.0],
            [1.0, 0.0, 0.0],
        ]);
        let h = hausdorff(&a, &b, 200).unwrap();
        let (ab, ba) = brute_force(&a, &b, 1e-4);
        assert!(ab < 1e-3 && (ba - 0.3).abs() < 1e-3);
        assert!(h.a_to_b <= 1.0 / 200.0, "{}", h.a_to_b);
        assert!((h.b_to_a - 0.3).abs() <= 1.6 / 200.0);
        assert_eq!(h.symmetric, h.b_to_a);
    }

    #[test]
    fn degenerate_inputs_are_rejected() {
        let a = line(&[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]]);
        assert!(matches!(hausdorff(&a, &a, 1), Err(Error::Domain(_))));
    }

    fn rec_from_model(model: &TextileModel) -> Vec<ReconstructedYarn> {
        model
            .yarns
            .iter()
            .map(|y| ReconstructedYarn {
                id: y.id + 100,
                family: y.family,
                path: y.path.clone(),
                sections: y.sections.clone(),
                completed: vec![false; y.sections.len()],
                true_label: Some(y.id),
            })
            .collect()
    }

    #[test]
    fn exact_copy_matches_perfectly() {
        let m = generate_interlock(&WeaveSpec::default(), &FiberSpec::default(), 9, 9).unwrap();
        let rec = rec_from_model(&m);
        let r = match_and_assess_paths(&m, &rec, 20.0, 100).unwrap();
        assert_eq!(r.pairs.len(), m.yarns.len());
        assert!(r
            .pairs
            .iter()
            .all(|p| p.symmetric == 0.0 && p.rec_id == p.gt_id + 100));
        assert!(r.unmatched_gt.is_empty() && r.unmatched_rec.is_empty());

        let mut fewer = rec.clone();
        fewer.remove(3);
        let r = match_and_assess_paths(&m, &fewer, 20.0, 100).unwrap();
        assert_eq!(r.unmatched_gt, vec![m.yarns[3].id]);
        assert_eq!(r.count_mismatches.len(), 1);
        assert!(path_table(&r).contains("unmatched ground-truth yarn"));
    }

    #[test]
    fn jittered_paths_stay_within_three_sigma() {
        let m = generate_interlock(&WeaveSpec::default(), &FiberSpec::default(), 81, 81).unwrap();
        let sigma = 0.5;
        let jittered = crate::synthgen::perturb_model(&m, sigma, 11).unwrap();
        let mut rec = rec_from_model(&jittered);
        for (y, j) in rec.iter_mut().zip(&jittered.yarns) {
            let centers = Polyline::new(j.centers()).unwrap();
            let opts = crate::geometry::FitOptions {
                param_correction_iters: 0,
                ..crate::geometry::FitOptions::new(3, 40)
            };
            y.path = crate::geometry::bspline_fit_with(&centers, opts).unwrap();
        }
        let r = match_and_assess_paths(&m, &rec, 20.0, 200).unwrap();
        assert_eq!(r.pairs.len(), m.yarns.len());
        assert!(r.pairs.iter().all(|p| p.rec_id == p.gt_id + 100));
        assert!(r.max_symmetric <= 3.0 * sigma, "{}", r.max_symmetric);
    }

    #[test]
    fn circle_vf_and_flags() {
        let r_sec = 3.0;
        let s = ellipse_section(Point3::origin(), Vector3::z(), r_sec, r_sec, 0.0).unwrap();
        let area = section_area(&s).unwrap();
        let f = FiberSpec {
            fiber_radius: 0.1,
            fibers_per_yarn: 400,
        };
        let v = fiber_volume_fraction(&s, &f).unwrap();
        assert!((v.vf - 400.0 * PI * 0.01 / area).abs() < 1e-12);
        // areas oracle on the disc: N r_f^2 / R^2, corrected by the decagon ratio
        let decagon_ratio = 10.0 * (2.0 * PI / 10.0).sin() / (2.0 * PI);
        assert!((v.vf * decagon_ratio - 400.0 * 0.01 / 9.0).abs() < 1e-12);
        assert!(!v.capped && !v.over_hex);

        let twice = FiberSpec::for_target_vf(2.0 * area, 0.1, 1.0);
        let v = fiber_volume_fraction(&s, &twice).unwrap();
        assert_eq!(v.vf, 1.0);
        assert!(v.capped && v.over_hex);

        let fiber = PI * 0.01;
        let n_at = |vf: f64| (vf * area / fiber).floor() as u32;
        let hex = hex_packing_limit();
        for (n, expect) in [(n_at(hex), false), (n_at(hex) + 1, true)] {
            let v = fiber_volume_fraction(
                &s,
                &FiberSpec {
                    fiber_radius: 0.1,
                    fibers_per_yarn: n,
                },
            )
            .unwrap();
            assert_eq!(v.over_hex, expect, "{}", v.vf);
            assert_eq!(v.over_hex, v.vf > hex);
        }
    }

    fn yarn_of(sections: Vec<CrossSection>, id: u32) -> ReconstructedYarn {
        let pts = Polyline::new((0..5).map(|i| Point3::new(i as f64, 0.0, 0.0)).collect()).unwrap();
        ReconstructedYarn {
            id,
            family: Family::Warp,
            path: crate::geometry::bspline_fit(&pts, 3, 4).unwrap(),
            completed: vec![false; sections.len()],
            sections,
            true_label: None,
        }
    }

    #[test]
    fn identical_sections_fill_one_bin() {
        let s = ellipse_section(Point3::origin(), Vector3::x(), 3.0, 2.0, 0.0).unwrap();
        let y = yarn_of(vec![s.clone(); 6], 1);
        let f = FiberSpec::for_target_vf(section_area(&s).unwrap(), 0.1, 0.55);
        let r = vf_distribution(&[y.clone(), yarn_of(vec![s; 4], 2)], &f, 10).unwrap();
        assert_eq!(r.histogram.iter().filter(|b| b.count > 0).count(), 1);
        assert_eq!(r.histogram.iter().map(|b| b.count).sum::<u64>(), 10);
        assert_eq!(r.total_sections, 10);
        let yv = &r.yarns[0];
        assert_eq!(yv.min, yv.max);
        assert!((yv.mean - yv.min).abs() < 1e-15);
        let csv = histogram_csv(&r);
        assert_eq!(parse_histogram_csv(&csv, "h.csv").unwrap(), r.histogram);
        assert!(vf_table(&r).lines().count() == 4);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn hausdorff_swap_symmetry(
            pa in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0, -5.0f64..5.0), 2..6),
            pb in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0, -5.0f64..5.0), 2..6),
        ) {
            let mk = |v: &[(f64, f64, f64)]| Polyline::new_dedup(v.iter().map(|p| Point3::new(p.0, p.1, p.2)).collect());
            let (Ok(a), Ok(b)) = (mk(&pa), mk(&pb)) else { return Ok(()); };
            prop_assume!(a.length() > 1e-3 && b.length() > 1e-3);
            let h1 = hausdorff(&a, &b, 40).unwrap();
            let h2 = hausdorff(&b, &a, 40).unwrap();
            prop_assert_eq!(h1.a_to_b, h2.b_to_a);
            prop_assert_eq!(h1.symmetric, h2.symmetric);
            prop_assert!(h1.a_to_b >= 0.0 && h1.symmetric == h1.a_to_b.max(h1.b_to_a));
        }

        #[test]
        fn translation_along_the_normal_of_a_planar_polyline(
            pts in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 2..6),
            dz in -3.0f64..3.0,
        ) {
            let Ok(a) = Polyline::new_dedup(pts.iter().map(|p| Point3::new(p.0, p.1, 0.0)).collect()) else { return Ok(()); };
            prop_assume!(a.length() > 1e-3);
            let h = hausdorff(&a, &a.translated(&Vector3::new(0.0, 0.0, dz)), 50).unwrap();
            prop_assert!((h.symmetric - dz.abs()).abs() < 1e-9);
        }

        #[test]
        fn refinement_stays_within_spacing(
            pa in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0, -5.0f64..5.0), 2..5),
            pb in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0, -5.0f64..5.0), 2..5),
        ) {
            let mk = |v: &[(f64, f64, f64)]| Polyline::new_dedup(v.iter().map(|p| Point3::new(p.0, p.1, p.2)).collect());
            let (Ok(a), Ok(b)) = (mk(&pa), mk(&pb)) else { return Ok(()); };
            prop_assume!(a.length() > 1e-3 && b.length() > 1e-3);
            let spacing = |n: usize| a.length().max(b.length()) / (n - 1) as f64;
            let coarse = hausdorff(&a, &b, 50).unwrap().symmetric;
            for n in [100, 200] {
                let fine = hausdorff(&a, &b, n).unwrap().symmetric;
                prop_assert!(fine <= coarse + spacing(50) + 1e-12);
            }
        }

        #[test]
        fn vf_is_scale_invariant_and_bounded(
            a in 1.0f64..10.0, b in 1.0f64..10.0, s in 0.1f64..10.0, n in 1u32..5000,
        ) {
            let f = FiberSpec { fiber_radius: 0.1, fibers_per_yarn: n };
            let sec = ellipse_section(Point3::origin(), Vector3::y(), a, b, 0.3).unwrap();
            let v1 = fiber_volume_fraction(&sec, &f).unwrap();
            let scaled = ellipse_section(Point3::origin(), Vector3::y(), a * s, b * s, 0.3).unwrap();
            let v2 = fiber_volume_fraction(&scaled, &FiberSpec { fiber_radius: 0.1 * s, ..f }).unwrap();
            prop_assert!((v1.vf - v2.vf).abs() < 1e-9);
            prop_assert!((0.0..=1.0).contains(&v1.vf));
        }
    }
}
