//! Polygon approximability: the best achievable IoU between a contour and
//! any polar reconstruction over interior starting points, found by lattice
//! search with one local refinement. The error landscape over starting
//! points is non-smooth and can change abruptly, so no continuous optimizer
//! is used.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{
    exact_polygon_iou, ray_contour_intersect, reconstruct_polygon, AngleSet, Contour, Point2,
    Polygon, PolarParams, BOUNDARY_TOL,
};
use crate::matching::interior_pole;

/// Outcome of the optimal-polygon search for one contour.
#[derive(Debug, Clone, PartialEq)]
pub struct ApproxResult {
    /// Max IoU between the contour and a reconstruction from any probed
    /// interior start.
    pub score: f64,
    pub optimal_start: Point2,
    pub optimal_polygon: Polygon,
    /// Lattice resolution used for the coarse pass.
    pub search_resolution: usize,
}

fn iou_from_start(contour: &Contour, start: Point2, angles: &AngleSet) -> Option<f64> {
    let distances = ray_contour_intersect(contour, start, angles).ok()?;
    let params = PolarParams::new(start, distances).ok()?;
    let poly = reconstruct_polygon(&params, angles).ok()?;
    Some(exact_polygon_iou(&poly, &contour.to_polygon()))
}

/// Grid-search the approximability score: evaluate the exact IoU at every
/// strictly-interior cell center of a `grid_n x grid_n` lattice over the
/// bounding box, then refine once around the best cell at 4x resolution.
pub fn approximability_score(
    contour: &Contour,
    angles: &AngleSet,
    grid_n: usize,
) -> Result<ApproxResult> {
    if grid_n < 4 {
        return Err(Error::parameter(format!("grid_n must be >= 4, got {grid_n}")));
    }
    let (lo, hi) = contour.bounding_box();
    let step_x = (hi.x - lo.x) / grid_n as f64;
    let step_y = (hi.y - lo.y) / grid_n as f64;
    let lattice: Vec<Point2> = (0..grid_n * grid_n)
        .map(|idx| {
            Point2::new(
                lo.x + step_x * ((idx % grid_n) as f64 + 0.5),
                lo.y + step_y * ((idx / grid_n) as f64 + 0.5),
            )
        })
        .filter(|p| contour.strictly_inside(*p, BOUNDARY_TOL))
        .collect();

    let mut candidates: Vec<Point2> = lattice;
    // Always probe the centroid / deepest interior point too: cheap, often
    // near-optimal on regular shapes, and the only candidates left for
    // sliver contours whose lattice has no interior cell center.
    let centroid = contour.centroid();
    if contour.strictly_inside(centroid, BOUNDARY_TOL) {
        candidates.push(centroid);
    }
    if candidates.is_empty() {
        candidates.push(interior_pole(contour)?);
    }

    let scored: Vec<(f64, Point2)> = candidates
        .par_iter()
        .filter_map(|p| iou_from_start(contour, *p, angles).map(|iou| (iou, *p)))
        .collect();
    let (mut best_iou, mut best_start) = scored
        .into_iter()
        .max_by(|a, b| a.0.partial_cmp(&b.0).unwrap())
        .ok_or_else(|| Error::Domain {
            reason: "no interior starting point could be evaluated",
            x: contour.centroid().x,
            y: contour.centroid().y,
        })?;

    // One refinement level: a denser sub-lattice (step / 4) spanning the
    // neighboring cells of the best point.
    let fine: Vec<Point2> = (0..81)
        .map(|idx| {
            let dx = (idx % 9) as f64 - 4.0;
            let dy = (idx / 9) as f64 - 4.0;
            Point2::new(
                best_start.x + dx * step_x / 4.0,
                best_start.y + dy * step_y / 4.0,
            )
        })
        .filter(|p| contour.strictly_inside(*p, BOUNDARY_TOL))
        .collect();
    let refined: Vec<(f64, Point2)> = fine
        .par_iter()
        .filter_map(|p| iou_from_start(contour, *p, angles).map(|iou| (iou, *p)))
        .collect();
    for (iou, p) in refined {
        if iou > best_iou {
            best_iou = iou;
            best_start = p;
        }
    }

    let distances = ray_contour_intersect(contour, best_start, angles)?;
    let optimal_polygon =
        reconstruct_polygon(&PolarParams::new(best_start, distances)?, angles)?;
    Ok(ApproxResult {
        score: best_iou,
        optimal_start: best_start,
        optimal_polygon,
        search_resolution: grid_n,
    })
}

/// Score a multi-ring instance on its largest ring. Returns the result and
/// whether the instance was fragmented (more than one ring).
pub fn score_instance(
    rings: &[Contour],
    angles: &AngleSet,
    grid_n: usize,
) -> Result<(ApproxResult, bool)> {
    let largest = rings
        .iter()
        .max_by(|a, b| a.area().partial_cmp(&b.area()).unwrap())
        .ok_or_else(|| Error::parameter("instance has no rings"))?;
    Ok((
        approximability_score(largest, angles, grid_n)?,
        rings.len() > 1,
    ))
}

/// Sort instances by descending approximability and return the ids of the
/// top `ceil(top_fraction * n)`. Ties break by ascending id.
pub fn rank_by_approximability(
    instances: &[(u64, Contour)],
    angles: &AngleSet,
    grid_n: usize,
    top_fraction: f64,
) -> Result<Vec<u64>> {
    if !(top_fraction > 0.0 && top_fraction <= 1.0) {
        return Err(Error::parameter(format!(
            "top_fraction must be in (0, 1], got {top_fraction}"
        )));
    }
    if instances.is_empty() {
        return Ok(vec![]);
    }
    let mut scored: Vec<(u64, f64)> = instances
        .par_iter()
        .map(|(id, c)| Ok((*id, approximability_score(c, angles, grid_n)?.score)))
        .collect::<Result<_>>()?;
    scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    let keep = (top_fraction * instances.len() as f64).ceil() as usize;
    Ok(scored.into_iter().take(keep).map(|(id, _)| id).collect())
}

/// Representation error sampled over the interior of a contour.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorLandscape {
    pub grid_n: usize,
    pub min_corner: Point2,
    pub step_x: f64,
    pub step_y: f64,
    /// Row-major `grid_n x grid_n`; `None` marks cells whose center is not
    /// strictly interior.
    pub values: Vec<Option<f64>>,
}

impl ErrorLandscape {
    pub fn present_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().filter_map(|v| *v)
    }

    pub fn min(&self) -> Option<f64> {
        self.present_values().fold(None, |acc, v| {
            Some(acc.map_or(v, |a: f64| a.min(v)))
        })
    }

    pub fn max(&self) -> Option<f64> {
        self.present_values().fold(None, |acc, v| {
            Some(acc.map_or(v, |a: f64| a.max(v)))
        })
    }

    /// CSV grid: `row,col,x,y,error` with absent cells skipped.
    pub fn write_csv<W: std::io::Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "row,col,x,y,error")?;
        for row in 0..self.grid_n {
            for col in 0..self.grid_n {
                if let Some(v) = self.values[row * self.grid_n + col] {
                    let x = self.min_corner.x + self.step_x * (col as f64 + 0.5);
                    let y = self.min_corner.y + self.step_y * (row as f64 + 0.5);
                    writeln!(w, "{row},{col},{x},{y},{v}")?;
                }
            }
        }
        Ok(())
    }

    /// PGM heat image: brighter = lower error; absent cells are black.
    pub fn write_pgm<W: std::io::Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "P5\n{} {}\n255", self.grid_n, self.grid_n)?;
        let bytes: Vec<u8> = self
            .values
            .iter()
            .map(|v| match v {
                Some(err) => ((1.0 - err.clamp(0.0, 1.0)) * 255.0).round() as u8,
                None => 0u8,
            })
            .collect();
        w.write_all(&bytes)?;
        Ok(())
    }
}

/// Representation error at each strictly-interior lattice cell center.
pub fn error_landscape(
    contour: &Contour,
    angles: &AngleSet,
    grid_n: usize,
) -> Result<ErrorLandscape> {
    if grid_n < 4 {
        return Err(Error::parameter(format!("grid_n must be >= 4, got {grid_n}")));
    }
    let (lo, hi) = contour.bounding_box();
    let step_x = (hi.x - lo.x) / grid_n as f64;
    let step_y = (hi.y - lo.y) / grid_n as f64;
    let values: Vec<Option<f64>> = (0..grid_n * grid_n)
        .into_par_iter()
        .map(|idx| {
            let p = Point2::new(
                lo.x + step_x * ((idx % grid_n) as f64 + 0.5),
                lo.y + step_y * ((idx / grid_n) as f64 + 0.5),
            );
            if contour.strictly_inside(p, BOUNDARY_TOL) {
                iou_from_start(contour, p, angles).map(|iou| 1.0 - iou)
            } else {
                None
            }
        })
        .collect();
    Ok(ErrorLandscape {
        grid_n,
        min_corner: lo,
        step_x,
        step_y,
        values,
    })
}
