//! Supervision-target generation and polygon losses.
//!
//! Targets are position-aware: ground-truth radial distances are recomputed
//! from the current predicted starting point by ray-contour intersection, so
//! the supervision reference tracks the moving pole. Targets are always
//! constants with respect to the prediction (the detachment rule); the
//! finite-difference harness below enforces that by freezing targets across
//! each perturbation pair.

use serde::{Deserialize, Serialize};

use crate::config::DEFAULT_DECODER_LAYERS;
use crate::error::{Error, Result};
use crate::geometry::{
    ray_contour_intersect, reconstruct_polygon, AngleSet, Contour, Point2, PolarParams, AREA_EPS,
};
use crate::matching::interior_pole;
use crate::raster::{rasterize_with_mode, soft_iou, union_frame, RasterMode};

/// Focal-loss focusing exponent.
pub const FOCAL_GAMMA: f64 = 2.0;
/// Focal-loss positive-class weight.
pub const FOCAL_ALPHA: f64 = 0.25;
/// Scores are clamped away from 0 so costs stay finite.
const SCORE_FLOOR: f64 = 1e-12;
/// Predictions whose largest radial distance is below this are degenerate.
const DEGENERATE_DIST: f64 = 1e-9;

/// Loss/cost coefficients (class, dist, rmask, inner).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostWeights {
    pub class: f64,
    pub dist: f64,
    pub rmask: f64,
    pub inner: f64,
}

impl Default for CostWeights {
    fn default() -> Self {
        CostWeights {
            class: 2.0,
            dist: 5.0,
            rmask: 2.0,
            inner: 5.0,
        }
    }
}

impl CostWeights {
    pub fn new(class: f64, dist: f64, rmask: f64, inner: f64) -> Result<Self> {
        let w = CostWeights {
            class,
            dist,
            rmask,
            inner,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("class", self.class),
            ("dist", self.dist),
            ("rmask", self.rmask),
            ("inner", self.inner),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::parameter(format!(
                    "weight {name} must be finite and >= 0, got {v}"
                )));
            }
        }
        Ok(())
    }

    pub fn scaled(&self, factor: f64) -> CostWeights {
        CostWeights {
            class: self.class * factor,
            dist: self.dist * factor,
            rmask: self.rmask * factor,
            inner: self.inner * factor,
        }
    }
}

/// One decoder layer's output for a single query.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerPrediction {
    /// 1-based decoder layer index.
    pub layer_index: usize,
    pub params: PolarParams,
    /// Per-category scores in [0, 1].
    pub class_scores: Vec<f64>,
}

impl LayerPrediction {
    pub fn new(layer_index: usize, params: PolarParams, class_scores: Vec<f64>) -> Result<Self> {
        Self::with_depth(layer_index, params, class_scores, DEFAULT_DECODER_LAYERS)
    }

    pub fn with_depth(
        layer_index: usize,
        params: PolarParams,
        class_scores: Vec<f64>,
        depth: usize,
    ) -> Result<Self> {
        if layer_index == 0 || layer_index > depth {
            return Err(Error::parameter(format!(
                "layer index {layer_index} outside 1..={depth}"
            )));
        }
        if let Some(s) = class_scores
            .iter()
            .find(|s| !s.is_finite() || **s < 0.0 || **s > 1.0)
        {
            return Err(Error::parameter(format!("class score {s} outside [0, 1]")));
        }
        Ok(LayerPrediction {
            layer_index,
            params,
            class_scores,
        })
    }
}

/// Ground-truth radial distances for the current predicted start: the
/// ray-contour intersection of the GT contour from `predicted_start`.
///
/// The result is a constant target; nothing may differentiate through the
/// start used here.
pub fn pats_targets(
    contour: &Contour,
    predicted_start: Point2,
    angles: &AngleSet,
) -> Result<Vec<f64>> {
    ray_contour_intersect(contour, predicted_start, angles)
}

/// Mean absolute distance error `(1/K) * sum |d_k - d_hat_k|`.
pub fn dist_loss(target: &[f64], predicted: &[f64]) -> Result<f64> {
    if target.len() != predicted.len() {
        return Err(Error::Dimension {
            context: "dist_loss target vs prediction",
            expected: target.len(),
            actual: predicted.len(),
        });
    }
    let k = target.len() as f64;
    Ok(target
        .iter()
        .zip(predicted)
        .map(|(t, p)| (t - p).abs())
        .sum::<f64>()
        / k)
}

/// Rasterized-mask loss details.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RmaskDetail {
    pub value: f64,
    /// Prediction had (near-)zero extent; the loss is pinned to 1.
    pub degenerate: bool,
    /// Reconstructed polygon has crossing edges (rasterized even-odd).
    pub self_intersecting: bool,
}

/// `1 - soft IoU` between the rasterized prediction and rasterized GT
/// contour over their union bounding-box frame.
pub fn rmask_loss(
    contour: &Contour,
    predicted: &PolarParams,
    angles: &AngleSet,
    resolution: usize,
) -> Result<f64> {
    Ok(rmask_loss_detailed(contour, predicted, angles, resolution, RasterMode::Supersample)?.value)
}

pub fn rmask_loss_detailed(
    contour: &Contour,
    predicted: &PolarParams,
    angles: &AngleSet,
    resolution: usize,
    mode: RasterMode,
) -> Result<RmaskDetail> {
    let max_dist = predicted.distances.iter().cloned().fold(0.0f64, f64::max);
    if max_dist <= DEGENERATE_DIST {
        return Ok(RmaskDetail {
            value: 1.0,
            degenerate: true,
            self_intersecting: false,
        });
    }
    let poly = reconstruct_polygon(predicted, angles)?;
    if poly.area() <= AREA_EPS {
        return Ok(RmaskDetail {
            value: 1.0,
            degenerate: true,
            self_intersecting: false,
        });
    }
    let self_intersecting = !poly.is_simple();
    let frame = union_frame(
        &[poly.vertices.as_slice(), contour.vertices()],
        resolution,
        resolution,
    )?;
    let pred_mask = rasterize_with_mode(&poly, resolution, resolution, &frame, mode)?;
    let gt_mask = rasterize_with_mode(
        &contour.to_polygon(),
        resolution,
        resolution,
        &frame,
        mode,
    )?;
    Ok(RmaskDetail {
        value: (1.0 - soft_iou(&pred_mask, &gt_mask)?).clamp(0.0, 1.0),
        degenerate: false,
        self_intersecting,
    })
}

/// Focal classification loss on the GT-category score.
pub fn focal_class_loss(score: f64) -> f64 {
    let p = score.clamp(SCORE_FLOOR, 1.0);
    -FOCAL_ALPHA * (1.0 - p).powf(FOCAL_GAMMA) * p.ln()
}

/// Unweighted per-term losses for one matched pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LossBreakdown {
    pub class: f64,
    pub dist: f64,
    pub rmask: f64,
}

impl LossBreakdown {
    /// `lambda_class * L_class + lambda_dist * L_dist + lambda_rmask * L_rmask`.
    pub fn weighted_total(&self, weights: &CostWeights) -> f64 {
        weights.class * self.class + weights.dist * self.dist + weights.rmask * self.rmask
    }
}

/// Combined training objective for one matched prediction, with the per-term
/// breakdown for diagnostics.
///
/// Targets come from the prediction's own start when it lies strictly inside
/// the contour; otherwise from the contour's interior pole (the same
/// fallback the matcher uses), keeping the loss total.
pub fn total_loss(
    pred: &LayerPrediction,
    contour: &Contour,
    gt_category: usize,
    weights: &CostWeights,
    angles: &AngleSet,
    resolution: usize,
) -> Result<(f64, LossBreakdown)> {
    let score = *pred
        .class_scores
        .get(gt_category)
        .ok_or_else(|| {
            Error::parameter(format!(
                "category index {gt_category} out of range ({} scores)",
                pred.class_scores.len()
            ))
        })?;
    let class = focal_class_loss(score);
    let targets = match pats_targets(contour, pred.params.start, angles) {
        Ok(t) => t,
        Err(Error::Domain { .. }) => {
            ray_contour_intersect(contour, interior_pole(contour)?, angles)?
        }
        Err(e) => return Err(e),
    };
    let dist = dist_loss(&targets, &pred.params.distances)?;
    let rmask = rmask_loss(contour, &pred.params, angles, resolution)?;
    let breakdown = LossBreakdown { class, dist, rmask };
    Ok((breakdown.weighted_total(weights), breakdown))
}

/// Residual parameter update: `s' = s + ds`, `D' = clamp(D + dD, >= 0)`.
/// Returns the refined parameters and how many distances were clamped.
///
/// The first decoder layer passes the box center with all-zero distances as
/// `previous`, making `delta_distances` the absolute initial distances.
pub fn refine_params(
    previous: &PolarParams,
    delta_start: Point2,
    delta_distances: &[f64],
) -> Result<(PolarParams, usize)> {
    if delta_distances.len() != previous.distances.len() {
        return Err(Error::Dimension {
            context: "refine_params distance deltas",
            expected: previous.distances.len(),
            actual: delta_distances.len(),
        });
    }
    let mut clamped = 0usize;
    let distances = previous
        .distances
        .iter()
        .zip(delta_distances)
        .map(|(d, dd)| {
            let v = d + dd;
            if v < 0.0 {
                clamped += 1;
                0.0
            } else {
                v
            }
        })
        .collect();
    let params = PolarParams::new(previous.start.add(delta_start), distances)?;
    Ok((params, clamped))
}

/// Which loss the finite-difference harness evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    Dist,
    /// RMask in exact-coverage mode (piecewise smooth).
    Rmask { resolution: usize },
}

/// Central finite differences of a loss over the K+2 polar parameters
/// (start x, start y, then the K distances).
#[derive(Debug, Clone, PartialEq)]
pub struct FdGradient {
    /// d loss / d parameter, length K+2.
    pub grad: Vec<f64>,
    /// Parameter indices whose perturbation moved the start outside the
    /// contour; reported rather than failing.
    pub boundary_affected: Vec<usize>,
    /// Indices where forward/backward slopes disagree (L1 kink or coverage
    /// breakpoint); the central value there is a subgradient midpoint.
    pub kink_suspect: Vec<usize>,
}

/// Finite-difference gradient of `loss` at `at`.
///
/// Distance targets are computed once at the base start and frozen for every
/// perturbed evaluation, mirroring the detachment of targets from the
/// prediction path.
pub fn fd_gradient(
    loss: LossKind,
    at: &PolarParams,
    contour: &Contour,
    angles: &AngleSet,
    step: f64,
) -> Result<FdGradient> {
    if !(step > 0.0) || !step.is_finite() {
        return Err(Error::parameter(format!("step must be > 0, got {step}")));
    }
    if at.distances.len() != angles.len() {
        return Err(Error::Dimension {
            context: "fd_gradient distances vs angles",
            expected: angles.len(),
            actual: at.distances.len(),
        });
    }
    // Frozen targets for the dist loss; rmask needs none.
    let frozen_targets = match loss {
        LossKind::Dist => Some(pats_targets(contour, at.start, angles)?),
        LossKind::Rmask { .. } => None,
    };
    let eval = |params: &PolarParams| -> Result<f64> {
        match loss {
            LossKind::Dist => dist_loss(frozen_targets.as_ref().unwrap(), &params.distances),
            LossKind::Rmask { resolution } => Ok(rmask_loss_detailed(
                contour,
                params,
                angles,
                resolution,
                RasterMode::Exact,
            )?
            .value),
        }
    };
    let n = at.distances.len() + 2;
    let mut grad = Vec::with_capacity(n);
    let mut boundary_affected = Vec::new();
    let mut kink_suspect = Vec::new();
    let base = eval(at)?;
    for idx in 0..n {
        let mut plus = at.clone();
        let mut minus = at.clone();
        match idx {
            0 => {
                plus.start.x += step;
                minus.start.x -= step;
            }
            1 => {
                plus.start.y += step;
                minus.start.y -= step;
            }
            _ => {
                plus.distances[idx - 2] = (at.distances[idx - 2] + step).max(0.0);
                minus.distances[idx - 2] = (at.distances[idx - 2] - step).max(0.0);
            }
        }
        if idx < 2
            && (!contour.strictly_inside(plus.start, 0.0)
                || !contour.strictly_inside(minus.start, 0.0))
        {
            boundary_affected.push(idx);
        }
        let f_plus = eval(&plus)?;
        let f_minus = eval(&minus)?;
        // Effective offsets account for clamping at d = 0.
        let (off_plus, off_minus) = if idx >= 2 {
            (
                plus.distances[idx - 2] - at.distances[idx - 2],
                at.distances[idx - 2] - minus.distances[idx - 2],
            )
        } else {
            (step, step)
        };
        let span = off_plus + off_minus;
        let central = if span > 0.0 {
            (f_plus - f_minus) / span
        } else {
            0.0
        };
        let slope_fwd = if off_plus > 0.0 {
            (f_plus - base) / off_plus
        } else {
            central
        };
        let slope_bwd = if off_minus > 0.0 {
            (base - f_minus) / off_minus
        } else {
            central
        };
        if (slope_fwd - slope_bwd).abs() > 1e-6 * (1.0 + slope_fwd.abs().max(slope_bwd.abs())) {
            kink_suspect.push(idx);
        }
        grad.push(central);
    }
    Ok(FdGradient {
        grad,
        boundary_affected,
        kink_suspect,
    })
}

/// One CSV row of a per-layer loss breakdown.
#[derive(Debug, Clone, PartialEq)]
pub struct LossCsvRow {
    pub instance_id: u64,
    pub layer: usize,
    pub breakdown: LossBreakdown,
    pub total: f64,
}

/// Emit loss breakdowns as CSV (header + one row per entry).
pub fn write_loss_csv<W: std::io::Write>(rows: &[LossCsvRow], w: &mut W) -> Result<()> {
    writeln!(w, "instance_id,layer,l_class,l_dist,l_rmask,total")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.instance_id, r.layer, r.breakdown.class, r.breakdown.dist, r.breakdown.rmask, r.total
        )?;
    }
    Ok(())
}
