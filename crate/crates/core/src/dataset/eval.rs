//! COCO-protocol mask AP over polygon instances.
//!
//! IoU between a detection and a single-ring GT uses the exact clipping
//! oracle; multi-ring GTs fall back to binary rasterization of the ring
//! union over the pair's bounding box.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{exact_polygon_iou, AngleSet, Point2, Polygon};
use crate::raster::union_frame;

use super::coco::{InstanceAnnotation, PolygonDetection};

/// COCO detection cap per image.
pub const DEFAULT_MAX_DETECTIONS: usize = 100;

/// The standard COCO IoU thresholds 0.50:0.05:0.95.
pub fn coco_iou_thresholds() -> Vec<f64> {
    (0..10).map(|i| (50 + 5 * i) as f64 / 100.0).collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct EvalCounts {
    pub images: usize,
    pub gt_total: usize,
    pub gt_evaluated: usize,
    pub gt_ignored: usize,
    pub detections: usize,
    pub detections_capped: usize,
    pub categories: usize,
}

/// Evaluation report: mAP over thresholds and categories plus the standard
/// AP50/AP75 slices.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    #[serde(rename = "mAP")]
    pub map: f64,
    #[serde(rename = "AP50")]
    pub ap50: f64,
    #[serde(rename = "AP75")]
    pub ap75: f64,
    /// Mean AP over thresholds per category id.
    pub per_category: BTreeMap<u32, f64>,
    pub counts: EvalCounts,
    /// Set when no ground truth was evaluated (e.g. an empty subset).
    pub empty: bool,
}

impl EvalReport {
    fn zero(counts: EvalCounts) -> Self {
        EvalReport {
            map: 0.0,
            ap50: 0.0,
            ap75: 0.0,
            per_category: BTreeMap::new(),
            counts,
            empty: counts.gt_evaluated == 0,
        }
    }
}

/// Report as CSV: metric rows then per-category rows.
pub fn report_csv(report: &EvalReport) -> String {
    let mut out = String::from("metric,value\n");
    out.push_str(&format!("mAP,{}\n", report.map));
    out.push_str(&format!("AP50,{}\n", report.ap50));
    out.push_str(&format!("AP75,{}\n", report.ap75));
    for (cat, ap) in &report.per_category {
        out.push_str(&format!("AP_category_{cat},{ap}\n"));
    }
    out
}

/// Binary occupancy mask of a set of rings (even-odd per ring, union across
/// rings) over `res x res` cells of `frame`.
fn binary_union_mask(
    rings: &[&[Point2]],
    frame: &crate::raster::Frame,
    res: usize,
) -> Vec<bool> {
    let mut mask = vec![false; res * res];
    let mut xs: Vec<f64> = Vec::new();
    for ring in rings {
        let cells: Vec<Point2> = ring
            .iter()
            .map(|p| {
                let (u, v) = frame.pixel_to_cell(*p);
                Point2::new(u, v)
            })
            .collect();
        let n = cells.len();
        for row in 0..res {
            let y = row as f64 + 0.5;
            xs.clear();
            for i in 0..n {
                let a = cells[i];
                let b = cells[(i + 1) % n];
                if (a.y > y) != (b.y > y) {
                    xs.push(a.x + (y - a.y) * (b.x - a.x) / (b.y - a.y));
                }
            }
            xs.sort_by(|p, q| p.partial_cmp(q).unwrap());
            for pair in xs.chunks_exact(2) {
                let c0 = ((pair[0] - 0.5).ceil().max(0.0)) as usize;
                let c1f = (pair[1] - 0.5).ceil() - 1.0;
                if c1f < c0 as f64 {
                    continue;
                }
                let c1 = (c1f as usize).min(res - 1);
                for c in c0..=c1 {
                    mask[row * res + c] = true;
                }
            }
        }
    }
    mask
}

fn binary_mask_iou(a: &[bool], b: &[bool]) -> f64 {
    let mut inter = 0usize;
    let mut union = 0usize;
    for (&x, &y) in a.iter().zip(b) {
        inter += (x && y) as usize;
        union += (x || y) as usize;
    }
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// IoU between one detection polygon and one GT instance.
fn pair_iou(
    det: &Polygon,
    gt: &InstanceAnnotation,
    raster_resolution: usize,
    force_raster: bool,
) -> f64 {
    if gt.contours.len() == 1 && !force_raster {
        return exact_polygon_iou(det, &gt.contours[0].to_polygon());
    }
    let mut rings: Vec<&[Point2]> = vec![det.vertices.as_slice()];
    for c in &gt.contours {
        rings.push(c.vertices());
    }
    let Ok(frame) = union_frame(&rings, raster_resolution, raster_resolution) else {
        return 0.0;
    };
    let det_mask = binary_union_mask(&rings[..1], &frame, raster_resolution);
    let gt_mask = binary_union_mask(&rings[1..], &frame, raster_resolution);
    binary_mask_iou(&det_mask, &gt_mask)
}

struct ResolvedDet {
    input_idx: usize,
    image_id: u64,
    category_id: u32,
    score: f64,
    polygon: Polygon,
}

/// Per-detection outcome at one IoU threshold.
#[derive(Clone, Copy)]
struct DetOutcome {
    score: f64,
    input_idx: usize,
    /// Some(true) = TP, Some(false) = ignored, None = FP.
    matched: Option<bool>,
}

/// Full-set evaluation; equivalent to [`evaluate_subset`] over all GT ids.
pub fn evaluate(
    gts: &[InstanceAnnotation],
    dets: &[PolygonDetection],
    iou_thresholds: &[f64],
    raster_resolution: usize,
    angles: &AngleSet,
) -> Result<EvalReport> {
    let all: HashSet<u64> = gts.iter().map(|g| g.id).collect();
    evaluate_subset(gts, dets, &all, iou_thresholds, raster_resolution, angles)
}

/// Evaluation restricted to the GT instances in `subset_ids`. Excluded GTs
/// are ignored crowd-style: detections matched to them are neither true nor
/// false positives.
pub fn evaluate_subset(
    gts: &[InstanceAnnotation],
    dets: &[PolygonDetection],
    subset_ids: &HashSet<u64>,
    iou_thresholds: &[f64],
    raster_resolution: usize,
    angles: &AngleSet,
) -> Result<EvalReport> {
    evaluate_with_opts(
        gts,
        dets,
        subset_ids,
        iou_thresholds,
        raster_resolution,
        angles,
        DEFAULT_MAX_DETECTIONS,
        false,
    )
}

pub fn evaluate_with_opts(
    gts: &[InstanceAnnotation],
    dets: &[PolygonDetection],
    subset_ids: &HashSet<u64>,
    iou_thresholds: &[f64],
    raster_resolution: usize,
    angles: &AngleSet,
    max_dets_per_image: usize,
    force_raster: bool,
) -> Result<EvalReport> {
    if iou_thresholds.is_empty() {
        return Err(Error::parameter("at least one IoU threshold required"));
    }
    let gt_ids: HashSet<u64> = gts.iter().map(|g| g.id).collect();
    for id in subset_ids {
        if !gt_ids.contains(id) {
            return Err(Error::parameter(format!("unknown subset gt id {id}")));
        }
    }
    let categories: BTreeSet<u32> = gts.iter().map(|g| g.category_id).collect();
    for d in dets {
        if !categories.contains(&d.category_id) && !categories.is_empty() {
            return Err(Error::parameter(format!(
                "detection category {} not present in ground truth",
                d.category_id
            )));
        }
    }

    // Resolve detection geometry once and cap per image by score.
    let mut resolved: Vec<ResolvedDet> = dets
        .iter()
        .enumerate()
        .map(|(input_idx, d)| {
            Ok(ResolvedDet {
                input_idx,
                image_id: d.image_id,
                category_id: d.category_id,
                score: d.score,
                polygon: d.to_polygon(angles)?,
            })
        })
        .collect::<Result<_>>()?;
    let mut capped = 0usize;
    {
        let mut per_image: HashMap<u64, Vec<usize>> = HashMap::new();
        for (i, d) in resolved.iter().enumerate() {
            per_image.entry(d.image_id).or_default().push(i);
        }
        let mut keep = vec![true; resolved.len()];
        for idxs in per_image.values_mut() {
            idxs.sort_by(|&a, &b| {
                resolved[b]
                    .score
                    .partial_cmp(&resolved[a].score)
                    .unwrap()
                    .then(resolved[a].input_idx.cmp(&resolved[b].input_idx))
            });
            for &drop in idxs.iter().skip(max_dets_per_image) {
                keep[drop] = false;
                capped += 1;
            }
        }
        let mut it = keep.iter();
        resolved.retain(|_| *it.next().unwrap());
    }

    let image_ids: BTreeSet<u64> = gts
        .iter()
        .map(|g| g.image_id)
        .chain(resolved.iter().map(|d| d.image_id))
        .collect();

    let counts = EvalCounts {
        images: image_ids.len(),
        gt_total: gts.len(),
        gt_evaluated: gts.iter().filter(|g| subset_ids.contains(&g.id)).count(),
        gt_ignored: gts.len() - gts.iter().filter(|g| subset_ids.contains(&g.id)).count(),
        detections: dets.len(),
        detections_capped: capped,
        categories: categories.len(),
    };
    if categories.is_empty() {
        return Ok(EvalReport::zero(counts));
    }

    // Group per (image, category) and match greedily per threshold.
    let mut groups: BTreeMap<(u64, u32), (Vec<usize>, Vec<usize>)> = BTreeMap::new();
    for (gi, g) in gts.iter().enumerate() {
        groups.entry((g.image_id, g.category_id)).or_default().0.push(gi);
    }
    for (di, d) in resolved.iter().enumerate() {
        groups.entry((d.image_id, d.category_id)).or_default().1.push(di);
    }

    let group_results: Vec<(u32, Vec<Vec<DetOutcome>>)> = groups
        .par_iter()
        .map(|(&(_, category), (gt_idx, det_idx))| {
            let mut det_order: Vec<usize> = det_idx.clone();
            det_order.sort_by(|&a, &b| {
                resolved[b]
                    .score
                    .partial_cmp(&resolved[a].score)
                    .unwrap()
                    .then(resolved[a].input_idx.cmp(&resolved[b].input_idx))
            });
            // GT order: evaluated first, ignored last (pycocotools layout).
            let mut gt_order: Vec<usize> = gt_idx.clone();
            gt_order.sort_by_key(|&g| (!subset_ids.contains(&gts[g].id) as u8, gts[g].id));
            let ignored: Vec<bool> = gt_order
                .iter()
                .map(|&g| !subset_ids.contains(&gts[g].id))
                .collect();
            let iou: Vec<Vec<f64>> = det_order
                .iter()
                .map(|&d| {
                    gt_order
                        .iter()
                        .map(|&g| {
                            pair_iou(&resolved[d].polygon, &gts[g], raster_resolution, force_raster)
                        })
                        .collect()
                })
                .collect();
            let per_threshold: Vec<Vec<DetOutcome>> = iou_thresholds
                .iter()
                .map(|&t| {
                    let mut gt_matched = vec![false; gt_order.len()];
                    det_order
                        .iter()
                        .enumerate()
                        .map(|(di, &d)| {
                            let mut best = t;
                            let mut best_g: Option<usize> = None;
                            for (gi, &_g) in gt_order.iter().enumerate() {
                                if gt_matched[gi] {
                                    continue;
                                }
                                // Once a real match exists, do not trade it
                                // for an ignored GT.
                                if ignored[gi] && best_g.map_or(false, |b| !ignored[b]) {
                                    break;
                                }
                                if iou[di][gi] >= best
                                    && (best_g.is_none() || iou[di][gi] > best)
                                {
                                    best = iou[di][gi];
                                    best_g = Some(gi);
                                }
                            }
                            let matched = best_g.map(|g| {
                                gt_matched[g] = true;
                                !ignored[g]
                            });
                            DetOutcome {
                                score: resolved[d].score,
                                input_idx: resolved[d].input_idx,
                                matched,
                            }
                        })
                        .collect()
                })
                .collect();
            (category, per_threshold)
        })
        .collect();

    // Per category: positives and per-threshold AP.
    let mut npos: BTreeMap<u32, usize> = BTreeMap::new();
    for g in gts {
        if subset_ids.contains(&g.id) {
            *npos.entry(g.category_id).or_default() += 1;
        }
    }
    let n_thresh = iou_thresholds.len();
    let mut per_cat_threshold_ap: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
    for &cat in &categories {
        let positives = npos.get(&cat).copied().unwrap_or(0);
        if positives == 0 {
            continue;
        }
        let mut aps = Vec::with_capacity(n_thresh);
        for t_idx in 0..n_thresh {
            let mut outcomes: Vec<DetOutcome> = group_results
                .iter()
                .filter(|(c, _)| *c == cat)
                .flat_map(|(_, per_t)| per_t[t_idx].iter().copied())
                .collect();
            outcomes.sort_by(|a, b| {
                b.score
                    .partial_cmp(&a.score)
                    .unwrap()
                    .then(a.input_idx.cmp(&b.input_idx))
            });
            aps.push(average_precision(&outcomes, positives));
        }
        per_cat_threshold_ap.insert(cat, aps);
    }

    if per_cat_threshold_ap.is_empty() {
        return Ok(EvalReport::zero(counts));
    }
    let per_category: BTreeMap<u32, f64> = per_cat_threshold_ap
        .iter()
        .map(|(&cat, aps)| (cat, aps.iter().sum::<f64>() / n_thresh as f64))
        .collect();
    let map = per_category.values().sum::<f64>() / per_category.len() as f64;
    let mean_at = |target: f64| -> f64 {
        match iou_thresholds
            .iter()
            .position(|&t| (t - target).abs() < 1e-9)
        {
            Some(idx) => {
                per_cat_threshold_ap.values().map(|aps| aps[idx]).sum::<f64>()
                    / per_cat_threshold_ap.len() as f64
            }
            None => 0.0,
        }
    };
    Ok(EvalReport {
        map,
        ap50: mean_at(0.50),
        ap75: mean_at(0.75),
        per_category,
        counts,
        empty: counts.gt_evaluated == 0,
    })
}

/// 101-point interpolated AP from score-sorted outcomes.
fn average_precision(outcomes: &[DetOutcome], npos: usize) -> f64 {
    let mut precisions = Vec::new();
    let mut recalls = Vec::new();
    let mut tp = 0usize;
    let mut fp = 0usize;
    for o in outcomes {
        match o.matched {
            Some(true) => tp += 1,
            Some(false) => continue, // ignored detection
            None => fp += 1,
        }
        precisions.push(tp as f64 / (tp + fp) as f64);
        recalls.push(tp as f64 / npos as f64);
    }
    if precisions.is_empty() {
        return 0.0;
    }
    // Monotone precision envelope from the right.
    for i in (0..precisions.len() - 1).rev() {
        precisions[i] = precisions[i].max(precisions[i + 1]);
    }
    let mut ap = 0.0;
    for r in 0..=100 {
        let target = r as f64 / 100.0;
        if let Some(idx) = recalls.iter().position(|&rec| rec >= target - 1e-12) {
            ap += precisions[idx];
        }
    }
    ap / 101.0
}
