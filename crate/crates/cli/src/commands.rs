//! Subcommand implementations. Inputs and outputs are JSON/CSV; all
//! per-instance iteration is sorted by id so outputs are deterministic.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{anyhow, Context, Result};
use serde::{Deserialize, Serialize};

use polardet_core::approx_score::{error_landscape, rank_by_approximability, score_instance};
use polardet_core::dataset::{
    coco_iou_thresholds, evaluate_with_opts, load_annotations, load_detections,
    InstanceAnnotation, PolygonDetection,
};
use polardet_core::geometry::{
    ray_contour_intersect, reconstruct_polygon, AngleSet, Contour, Point2, PolarParams,
};
use polardet_core::matching::{
    build_cost_matrix, hungarian, one_to_many_assign, write_assignment_csv, Assignment,
    CostMatrix,
};
use polardet_core::sampling::{
    box_sampling_locations, fan_base_grid, OffsetField, SamplingGrid,
};
use polardet_core::supervision::{fd_gradient, pats_targets, rmask_loss, LossKind};
use polardet_core::synthetic::{
    random_convex_contour, random_interior_point, seeded_rng,
};
use polardet_core::RunConfig;

/// One polar-parameter input record.
#[derive(Debug, Serialize, Deserialize)]
pub struct PolarRecord {
    pub x: f64,
    pub y: f64,
    pub distances: Vec<f64>,
}

/// One reconstructed-polygon output record (interleaved coordinates).
#[derive(Debug, Serialize, Deserialize)]
pub struct PolygonRecord {
    pub polygon: Vec<f64>,
}

/// One supervision-target input record.
#[derive(Debug, Serialize, Deserialize)]
pub struct TargetRequest {
    pub contour: Vec<f64>,
    pub start: [f64; 2],
}

/// One supervision-target output record.
#[derive(Debug, Serialize, Deserialize)]
pub struct TargetRecord {
    pub distances: Vec<f64>,
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| {
        anyhow::Error::new(polardet_core::Error::Parse {
            offset: 0,
            message: e.to_string(),
        })
        .context(format!("parsing {}", path.display()))
    })
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn angles_of(cfg: &RunConfig) -> Result<AngleSet> {
    Ok(AngleSet::uniform(cfg.k)?)
}

pub fn reconstruct(
    cfg: &RunConfig,
    input: &Path,
    output: &Path,
    svg: Option<&Path>,
) -> Result<()> {
    let angles = angles_of(cfg)?;
    let records: Vec<PolarRecord> = read_json(input)?;
    let mut out = Vec::with_capacity(records.len());
    let mut polys = Vec::new();
    for (i, rec) in records.iter().enumerate() {
        let params = PolarParams::new(Point2::new(rec.x, rec.y), rec.distances.clone())
            .with_context(|| format!("record {i}"))?;
        let poly = reconstruct_polygon(&params, &angles).with_context(|| format!("record {i}"))?;
        out.push(PolygonRecord {
            polygon: poly.vertices.iter().flat_map(|p| [p.x, p.y]).collect(),
        });
        polys.push(poly);
    }
    write_text(output, &serde_json::to_string_pretty(&out)?)?;
    if let Some(svg_path) = svg {
        write_text(svg_path, &polygons_svg(&polys))?;
    }
    log::info!("reconstructed {} polygons", out.len());
    Ok(())
}

fn polygons_svg(polys: &[polardet_core::Polygon]) -> String {
    let mut min = Point2::new(f64::INFINITY, f64::INFINITY);
    let mut max = Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in polys.iter().flat_map(|p| &p.vertices) {
        min.x = min.x.min(p.x);
        min.y = min.y.min(p.y);
        max.x = max.x.max(p.x);
        max.y = max.y.max(p.y);
    }
    if polys.is_empty() {
        min = Point2::new(0.0, 0.0);
        max = Point2::new(1.0, 1.0);
    }
    let pad = 0.05 * (max.x - min.x).max(max.y - min.y).max(1.0);
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"{} {} {} {}\">\n",
        min.x - pad,
        min.y - pad,
        max.x - min.x + 2.0 * pad,
        max.y - min.y + 2.0 * pad
    );
    for poly in polys {
        let pts: Vec<String> = poly
            .vertices
            .iter()
            .map(|p| format!("{},{}", p.x, p.y))
            .collect();
        svg.push_str(&format!(
            "  <polygon points=\"{}\" fill=\"none\" stroke=\"teal\" stroke-width=\"{}\"/>\n",
            pts.join(" "),
            0.01 * pad.max(0.1)
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

pub fn targets(cfg: &RunConfig, input: &Path, output: &Path) -> Result<()> {
    let angles = angles_of(cfg)?;
    let requests: Vec<TargetRequest> = read_json(input)?;
    let mut out = Vec::with_capacity(requests.len());
    for (i, req) in requests.iter().enumerate() {
        let contour = Contour::from_flat(&req.contour).with_context(|| format!("record {i}"))?;
        let distances =
            pats_targets(&contour, Point2::new(req.start[0], req.start[1]), &angles)
                .with_context(|| format!("record {i}"))?;
        out.push(TargetRecord { distances });
    }
    write_text(output, &serde_json::to_string_pretty(&out)?)?;
    log::info!("computed targets for {} records", out.len());
    Ok(())
}

/// Matching contour for an instance: its largest ring.
fn primary_ring(inst: &InstanceAnnotation) -> &Contour {
    inst.contours
        .iter()
        .max_by(|a, b| a.area().partial_cmp(&b.area()).unwrap())
        .expect("instances always carry at least one ring")
}

pub fn match_cmd(
    cfg: &RunConfig,
    annotations: &Path,
    detections: &Path,
    output: &Path,
    one_to_many: Option<usize>,
    tau: Option<f64>,
) -> Result<()> {
    let angles = angles_of(cfg)?;
    let loaded = load_annotations(annotations)?;
    log_load_summary(&loaded.summary);
    let dets = load_detections(detections, &angles)?;
    let cat_index: BTreeMap<u32, usize> = loaded
        .categories
        .iter()
        .enumerate()
        .map(|(i, &c)| (c, i))
        .collect();
    let n_cats = cat_index.len().max(1);

    // Group per image.
    let mut by_image: BTreeMap<u64, (Vec<&InstanceAnnotation>, Vec<(usize, &PolygonDetection)>)> =
        BTreeMap::new();
    for inst in &loaded.instances {
        by_image.entry(inst.image_id).or_default().0.push(inst);
    }
    for (i, det) in dets.iter().enumerate() {
        by_image.entry(det.image_id).or_default().1.push((i, det));
    }

    let mut csv = Vec::new();
    writeln!(
        csv,
        "image_id,pred_idx,gt_idx,c_class,c_dist,c_rmask,c_inner,total"
    )?;
    for (image_id, (insts, image_dets)) in &by_image {
        if insts.is_empty() || image_dets.is_empty() {
            continue;
        }
        let gts: Vec<(Contour, usize)> = insts
            .iter()
            .map(|inst| {
                let cat = *cat_index
                    .get(&inst.category_id)
                    .ok_or_else(|| anyhow!("category {} missing from table", inst.category_id))?;
                Ok((primary_ring(inst).clone(), cat))
            })
            .collect::<Result<_>>()?;
        let preds: Vec<polardet_core::supervision::LayerPrediction> = image_dets
            .iter()
            .map(|(_, det)| {
                let mut scores = vec![0.0; n_cats];
                if let Some(&idx) = cat_index.get(&det.category_id) {
                    scores[idx] = det.score;
                }
                let params = match &det.geometry {
                    polardet_core::dataset::DetectionGeometry::Polar(p) => p.clone(),
                    polardet_core::dataset::DetectionGeometry::Polygon(_) => {
                        anyhow::bail!("matching requires polar-parameter detections")
                    }
                };
                Ok(polardet_core::supervision::LayerPrediction::new(
                    1, params, scores,
                )?)
            })
            .collect::<Result<_>>()?;
        let matrix = build_cost_matrix(&preds, &gts, &cfg.weights, &angles, cfg.rmask_resolution)?;
        let pairs = match one_to_many {
            None => hungarian(&matrix).pairs,
            Some(m) => {
                let tau = tau.unwrap_or_else(|| 2.0 * median_matched_cost(&matrix));
                one_to_many_assign(&matrix, m, tau)?
            }
        };
        let mut chunk = Vec::new();
        write_assignment_csv(*image_id, &matrix, &Assignment { pairs }, &mut chunk)?;
        // Drop the per-image header; the file has one.
        let text = String::from_utf8(chunk)?;
        for line in text.lines().skip(1) {
            writeln!(csv, "{line}")?;
        }
    }
    write_text(output, &String::from_utf8(csv)?)?;
    Ok(())
}

fn median_matched_cost(matrix: &CostMatrix) -> f64 {
    let assignment = hungarian(matrix);
    let mut costs: Vec<f64> = assignment
        .pairs
        .iter()
        .map(|&(i, j)| matrix.entry(i, j))
        .collect();
    if costs.is_empty() {
        return 0.0;
    }
    costs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    costs[costs.len() / 2]
}

fn log_load_summary(summary: &polardet_core::dataset::LoadSummary) {
    log::info!(
        "annotations: kept {} of {} (rle {}, crowd {}, dropped rings {}, empty {})",
        summary.kept,
        summary.total_annotations,
        summary.skipped_rle,
        summary.skipped_crowd,
        summary.dropped_rings,
        summary.skipped_empty
    );
}

pub fn score(cfg: &RunConfig, annotations: &Path, output: &Path) -> Result<()> {
    let angles = angles_of(cfg)?;
    let loaded = load_annotations(annotations)?;
    log_load_summary(&loaded.summary);
    let mut rows = String::from("instance_id,score,start_x,start_y,k\n");
    let mut instances = loaded.instances;
    instances.sort_by_key(|i| i.id);
    let mut scores = Vec::new();
    for inst in &instances {
        match score_instance(&inst.contours, &angles, cfg.grid_n) {
            Ok((r, fragmented)) => {
                if fragmented {
                    log::warn!("instance {}: fragmented, scored largest ring", inst.id);
                }
                rows.push_str(&format!(
                    "{},{},{},{},{}\n",
                    inst.id, r.score, r.optimal_start.x, r.optimal_start.y, cfg.k
                ));
                scores.push(r.score);
            }
            Err(e) => log::error!("instance {}: {e}; skipped", inst.id),
        }
    }
    write_text(output, &rows)?;
    if !scores.is_empty() {
        scores.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let q = |f: f64| scores[((f * (scores.len() - 1) as f64).round() as usize).min(scores.len() - 1)];
        log::info!(
            "scores: n={} min={:.4} p25={:.4} median={:.4} p75={:.4} max={:.4}",
            scores.len(),
            q(0.0),
            q(0.25),
            q(0.5),
            q(0.75),
            q(1.0)
        );
    }
    Ok(())
}

pub fn landscape(
    cfg: &RunConfig,
    annotations: &Path,
    instance: Option<u64>,
    output: &Path,
    pgm: Option<&Path>,
) -> Result<()> {
    let angles = angles_of(cfg)?;
    let loaded = load_annotations(annotations)?;
    let inst = match instance {
        Some(id) => loaded
            .instances
            .iter()
            .find(|i| i.id == id)
            .ok_or_else(|| anyhow::Error::new(polardet_core::Error::parameter(format!(
                "no instance with id {id}"
            ))))?,
        None => loaded
            .instances
            .first()
            .ok_or_else(|| anyhow!("annotation file has no instances"))?,
    };
    let scape = error_landscape(primary_ring(inst), &angles, cfg.grid_n)?;
    let mut csv = Vec::new();
    scape.write_csv(&mut csv)?;
    write_text(output, &String::from_utf8(csv)?)?;
    if let Some(pgm_path) = pgm {
        let mut buf = Vec::new();
        scape.write_pgm(&mut buf)?;
        fs::write(pgm_path, buf).with_context(|| format!("writing {}", pgm_path.display()))?;
    }
    if let (Some(lo), Some(hi)) = (scape.min(), scape.max()) {
        log::info!("landscape error range [{lo:.4}, {hi:.4}]");
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum GridScheme {
    Polar,
    Box,
}

pub fn grid(
    cfg: &RunConfig,
    input: &Path,
    output: &Path,
    scheme: GridScheme,
    svg: Option<&Path>,
) -> Result<()> {
    let angles = angles_of(cfg)?;
    let records: Vec<PolarRecord> = read_json(input)?;
    let mut csv = String::from("record,ray,t,x,y,level\n");
    let mut grids: Vec<SamplingGrid> = Vec::new();
    for (i, rec) in records.iter().enumerate() {
        let params = PolarParams::new(Point2::new(rec.x, rec.y), rec.distances.clone())
            .with_context(|| format!("record {i}"))?;
        let grid = match scheme {
            GridScheme::Polar => fan_base_grid(&params, &angles, cfg.t)?,
            GridScheme::Box => {
                // Box baseline with a matched budget: bounding box of the
                // reconstruction, 8 heads, K*T/8 points per head.
                let poly = reconstruct_polygon(&params, &angles)?;
                let (lo, hi) = poly.bounding_box();
                let center = Point2::new(0.5 * (lo.x + hi.x), 0.5 * (lo.y + hi.y));
                let size = ((hi.x - lo.x).max(1e-6), (hi.y - lo.y).max(1e-6));
                let points = (cfg.k * cfg.t).div_ceil(8).max(1);
                box_sampling_locations(center, size, &OffsetField::zeros(8, points))?
            }
        };
        let mut chunk = Vec::new();
        grid.write_csv(&mut chunk)?;
        for line in String::from_utf8(chunk)?.lines().skip(1) {
            csv.push_str(&format!("{i},{line}\n"));
        }
        grids.push(grid);
    }
    write_text(output, &csv)?;
    if let Some(svg_path) = svg {
        // Overlay of the first record's grid (most common inspection use).
        let body = grids
            .first()
            .map(|g| g.to_svg(None))
            .unwrap_or_else(|| "<svg xmlns=\"http://www.w3.org/2000/svg\"/>\n".into());
        write_text(svg_path, &body)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum GradSuite {
    All,
    DistOnly,
    RmaskOnly,
}

struct CheckTable {
    rows: Vec<(String, Result<String, String>)>,
}

impl CheckTable {
    fn new() -> Self {
        CheckTable { rows: Vec::new() }
    }

    fn record(&mut self, name: &str, result: Result<String, String>) {
        self.rows.push((name.to_string(), result));
    }

    fn print_and_count_failures(&self) -> usize {
        let mut failures = 0;
        println!("{:<44} {:<6} detail", "check", "status");
        for (name, result) in &self.rows {
            match result {
                Ok(detail) => println!("{name:<44} pass   {detail}"),
                Err(detail) => {
                    failures += 1;
                    println!("{name:<44} FAIL   {detail}");
                }
            }
        }
        failures
    }
}

pub fn gradcheck(cfg: &RunConfig, suite: GradSuite, cases: usize, corrupt: bool) -> Result<()> {
    let angles = angles_of(cfg)?;
    let mut table = CheckTable::new();
    // The corruption hook shifts loss values after computation, which every
    // check below must catch.
    let tweak = |v: f64| if corrupt { v + 0.1 } else { v };

    if suite != GradSuite::RmaskOnly {
        table.record(
            "dist gradient matches L1 subgradient",
            check_dist_gradients(cfg, &angles, cases, tweak),
        );
        table.record(
            "dist gradient flags kinks at zero error",
            check_kink_detection(cfg, &angles, tweak),
        );
    }
    if suite != GradSuite::DistOnly {
        table.record(
            "rmask interior growth is non-positive",
            check_rmask_signs(cfg, &angles, cases, tweak),
        );
        table.record(
            "rmask self-reconstruction is near zero",
            check_self_reconstruction(cfg, &angles, cases, tweak),
        );
        table.record(
            "dynamic targets beat stale targets",
            check_dynamic_reference(cfg, &angles, cases, tweak),
        );
    }

    let failures = table.print_and_count_failures();
    if failures > 0 {
        anyhow::bail!("{failures} gradcheck check(s) failed (seed {})", cfg.seed);
    }
    Ok(())
}

fn check_dist_gradients(
    cfg: &RunConfig,
    angles: &AngleSet,
    cases: usize,
    tweak: impl Fn(f64) -> f64,
) -> Result<String, String> {
    use rand::Rng;
    let mut rng = seeded_rng(cfg.seed.wrapping_add(1));
    let k = angles.len();
    let bounds = (Point2::new(-2.0, -2.0), Point2::new(2.0, 2.0));
    for case in 0..cases {
        let contour = random_convex_contour(&mut rng, bounds, (1.0, 3.0));
        let start = random_interior_point(&mut rng, &contour, 0.1);
        let targets =
            pats_targets(&contour, start, angles).map_err(|e| format!("case {case}: {e}"))?;
        let pred: Vec<f64> = targets
            .iter()
            .map(|t| {
                let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                (t + sign * rng.gen_range(0.05..0.4)).max(1e-3)
            })
            .collect();
        let params = PolarParams::new(start, pred.clone()).unwrap();
        let g = fd_gradient(LossKind::Dist, &params, &contour, angles, 1e-5)
            .map_err(|e| format!("case {case}: {e}"))?;
        if !g.kink_suspect.is_empty() {
            continue;
        }
        for ray in 0..k {
            let analytic = tweak((pred[ray] - targets[ray]).signum() / k as f64);
            if (g.grad[ray + 2] - analytic).abs() > 1e-6 {
                return Err(format!(
                    "case {case} ray {ray}: fd {} vs analytic {analytic}",
                    g.grad[ray + 2]
                ));
            }
        }
    }
    Ok(format!("{cases} cases, K={}", k))
}

fn check_kink_detection(
    cfg: &RunConfig,
    angles: &AngleSet,
    tweak: impl Fn(f64) -> f64,
) -> Result<String, String> {
    let mut rng = seeded_rng(cfg.seed.wrapping_add(2));
    let contour = random_convex_contour(
        &mut rng,
        (Point2::new(-2.0, -2.0), Point2::new(2.0, 2.0)),
        (1.0, 3.0),
    );
    let start = random_interior_point(&mut rng, &contour, 0.1);
    let targets = pats_targets(&contour, start, angles).map_err(|e| e.to_string())?;
    let params = PolarParams::new(start, targets).unwrap();
    let g = fd_gradient(LossKind::Dist, &params, &contour, angles, 1e-5)
        .map_err(|e| e.to_string())?;
    let expected_kinks = tweak(angles.len() as f64);
    if (g.kink_suspect.len() as f64 - expected_kinks).abs() > 0.5 {
        return Err(format!(
            "{} kinks flagged, expected {expected_kinks}",
            g.kink_suspect.len()
        ));
    }
    Ok(format!("{} distance kinks flagged", g.kink_suspect.len()))
}

fn check_rmask_signs(
    cfg: &RunConfig,
    angles: &AngleSet,
    cases: usize,
    tweak: impl Fn(f64) -> f64,
) -> Result<String, String> {
    let mut rng = seeded_rng(cfg.seed.wrapping_add(3));
    let bounds = (Point2::new(-2.0, -2.0), Point2::new(2.0, 2.0));
    for case in 0..cases {
        let contour = random_convex_contour(&mut rng, bounds, (1.5, 3.0));
        let start = random_interior_point(&mut rng, &contour, 0.15);
        let targets = ray_contour_intersect(&contour, start, angles)
            .map_err(|e| format!("case {case}: {e}"))?;
        let pred: Vec<f64> = targets.iter().map(|t| 0.5 * t).collect();
        let params = PolarParams::new(start, pred).unwrap();
        let g = fd_gradient(
            LossKind::Rmask {
                resolution: cfg.rmask_resolution,
            },
            &params,
            &contour,
            angles,
            1e-4,
        )
        .map_err(|e| format!("case {case}: {e}"))?;
        for (ray, &v) in g.grad[2..].iter().enumerate() {
            if tweak(v) > 1e-9 {
                return Err(format!("case {case} ray {ray}: gradient {v} > 0"));
            }
        }
    }
    Ok(format!("{cases} interior predictions"))
}

fn check_self_reconstruction(
    cfg: &RunConfig,
    angles: &AngleSet,
    cases: usize,
    tweak: impl Fn(f64) -> f64,
) -> Result<String, String> {
    let mut rng = seeded_rng(cfg.seed.wrapping_add(4));
    let bounds = (Point2::new(-2.0, -2.0), Point2::new(2.0, 2.0));
    let mut worst = 0.0f64;
    for case in 0..cases {
        let raw = random_convex_contour(&mut rng, bounds, (1.0, 3.0));
        let pole = random_interior_point(&mut rng, &raw, 0.1);
        let d = ray_contour_intersect(&raw, pole, angles)
            .map_err(|e| format!("case {case}: {e}"))?;
        let params = PolarParams::new(pole, d).unwrap();
        let gt = Contour::new(
            reconstruct_polygon(&params, angles)
                .map_err(|e| e.to_string())?
                .vertices,
        )
        .map_err(|e| e.to_string())?;
        let loss = tweak(
            rmask_loss(&gt, &params, angles, cfg.rmask_resolution)
                .map_err(|e| format!("case {case}: {e}"))?,
        );
        worst = worst.max(loss);
        if loss > 0.02 {
            return Err(format!("case {case}: self-reconstruction loss {loss} > 0.02"));
        }
    }
    Ok(format!("worst loss {worst:.4} over {cases} cases"))
}

fn check_dynamic_reference(
    cfg: &RunConfig,
    angles: &AngleSet,
    cases: usize,
    tweak: impl Fn(f64) -> f64,
) -> Result<String, String> {
    use rand::Rng;
    let mut rng = seeded_rng(cfg.seed.wrapping_add(5));
    let bounds = (Point2::new(-2.0, -2.0), Point2::new(2.0, 2.0));
    let mut wins = 0usize;
    for case in 0..cases {
        let contour = random_convex_contour(&mut rng, bounds, (1.5, 3.0));
        let s0 = random_interior_point(&mut rng, &contour, 0.12);
        let s1 = loop {
            let cand = Point2::new(
                s0.x + rng.gen_range(-0.3..0.3) * contour.diameter(),
                s0.y + rng.gen_range(-0.3..0.3) * contour.diameter(),
            );
            if contour.strictly_inside(cand, 0.02 * contour.diameter())
                && cand.dist(s0) > 0.05 * contour.diameter()
            {
                break cand;
            }
        };
        let stale = ray_contour_intersect(&contour, s0, angles).map_err(|e| e.to_string())?;
        let dynamic = ray_contour_intersect(&contour, s1, angles).map_err(|e| e.to_string())?;
        let loss_stale = rmask_loss(
            &contour,
            &PolarParams::new(s1, stale).unwrap(),
            angles,
            cfg.rmask_resolution,
        )
        .map_err(|e| format!("case {case}: {e}"))?;
        let loss_dynamic = tweak(
            rmask_loss(
                &contour,
                &PolarParams::new(s1, dynamic).unwrap(),
                angles,
                cfg.rmask_resolution,
            )
            .map_err(|e| format!("case {case}: {e}"))?,
        );
        if loss_dynamic <= loss_stale {
            wins += 1;
        }
    }
    let needed = (cases as f64 * 0.95).ceil() as usize;
    if wins < needed {
        return Err(format!("dynamic better in only {wins}/{cases} (need {needed})"));
    }
    Ok(format!("{wins}/{cases} cases"))
}

#[allow(clippy::too_many_arguments)]
pub fn eval(
    cfg: &RunConfig,
    annotations: &Path,
    detections: &Path,
    subset_fraction: Option<f64>,
    output: Option<&Path>,
    csv: Option<&Path>,
    raster_res: usize,
    max_dets: usize,
) -> Result<()> {
    let angles = angles_of(cfg)?;
    let loaded = load_annotations(annotations)?;
    log_load_summary(&loaded.summary);
    let dets = load_detections(detections, &angles)?;
    let subset: std::collections::HashSet<u64> = match subset_fraction {
        None => loaded.instances.iter().map(|i| i.id).collect(),
        Some(fraction) => {
            let ranked: Vec<(u64, Contour)> = loaded
                .instances
                .iter()
                .map(|i| (i.id, primary_ring(i).clone()))
                .collect();
            rank_by_approximability(&ranked, &angles, cfg.grid_n, fraction)?
                .into_iter()
                .collect()
        }
    };
    let report = evaluate_with_opts(
        &loaded.instances,
        &dets,
        &subset,
        &coco_iou_thresholds(),
        raster_res,
        &angles,
        max_dets,
        false,
    )?;
    let json = serde_json::to_string_pretty(&report)?;
    match output {
        Some(path) => write_text(path, &json)?,
        None => println!("{json}"),
    }
    if let Some(csv_path) = csv {
        write_text(csv_path, &polardet_core::dataset::report_csv(&report))?;
    }
    log::info!(
        "mAP {:.4} AP50 {:.4} AP75 {:.4} over {} instances",
        report.map,
        report.ap50,
        report.ap75,
        report.counts.gt_evaluated
    );
    Ok(())
}
