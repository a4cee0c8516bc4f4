//! Deterministic sampling geometry of polar deformable attention: fan-shaped
//! base grids, distance-modulated offsets, the box-oriented baseline scheme,
//! multi-level coordinates and bilinear feature lookup.
//!
//! No learned parameters live here; offset fields are supplied by callers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{point_in_contour, AngleSet, Contour, Point2, PolarParams};

/// Feature-pyramid strides, finest to coarsest.
pub const LEVEL_STRIDES: [u32; 4] = [8, 16, 32, 64];
/// Default near-boundary band width as a fraction of the contour diameter.
pub const DEFAULT_BAND_FRACTION: f64 = 0.05;

/// Externally supplied sampling offsets, shaped (groups x points). For the
/// polar scheme groups = rays; for the box scheme groups = heads.
#[derive(Debug, Clone, PartialEq)]
pub struct OffsetField {
    pub groups: usize,
    pub points: usize,
    offsets: Vec<(f64, f64)>,
}

impl OffsetField {
    pub fn new(groups: usize, points: usize, offsets: Vec<(f64, f64)>) -> Result<Self> {
        if offsets.len() != groups * points {
            return Err(Error::Dimension {
                context: "offset field shape",
                expected: groups * points,
                actual: offsets.len(),
            });
        }
        if offsets.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
            return Err(Error::parameter("offsets must be finite"));
        }
        Ok(OffsetField {
            groups,
            points,
            offsets,
        })
    }

    pub fn zeros(groups: usize, points: usize) -> Self {
        OffsetField {
            groups,
            points,
            offsets: vec![(0.0, 0.0); groups * points],
        }
    }

    pub fn at(&self, group: usize, point: usize) -> (f64, f64) {
        self.offsets[group * self.points + point]
    }

    pub fn set(&mut self, group: usize, point: usize, value: (f64, f64)) {
        self.offsets[group * self.points + point] = value;
    }
}

/// Per-ray, per-point sampling locations in image pixels, each tagged with a
/// feature-level index into [`LEVEL_STRIDES`]. Points are distributed
/// round-robin across the four levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingGrid {
    pub rays: usize,
    pub points_per_ray: usize,
    /// Ray-major: index `k * points_per_ray + t`.
    pub locations: Vec<Point2>,
    /// Feature-level index per location.
    pub levels: Vec<usize>,
}

impl SamplingGrid {
    fn from_locations(rays: usize, points_per_ray: usize, locations: Vec<Point2>) -> Self {
        let levels = (0..locations.len())
            .map(|i| i % LEVEL_STRIDES.len())
            .collect();
        SamplingGrid {
            rays,
            points_per_ray,
            locations,
            levels,
        }
    }

    pub fn at(&self, ray: usize, point: usize) -> Point2 {
        self.locations[ray * self.points_per_ray + point]
    }

    pub fn level_stride(&self, idx: usize) -> u32 {
        LEVEL_STRIDES[self.levels[idx]]
    }

    /// Location expressed in the cell coordinates of its assigned level.
    pub fn level_coords(&self, idx: usize) -> (f64, f64) {
        let stride = self.level_stride(idx) as f64;
        let p = self.locations[idx];
        (p.x / stride, p.y / stride)
    }

    /// CSV export: `ray,t,x,y,level`.
    pub fn write_csv<W: std::io::Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "ray,t,x,y,level")?;
        for k in 0..self.rays {
            for t in 0..self.points_per_ray {
                let idx = k * self.points_per_ray + t;
                let p = self.locations[idx];
                writeln!(w, "{},{},{},{},{}", k, t, p.x, p.y, self.levels[idx])?;
            }
        }
        Ok(())
    }

    /// SVG overlay of the sampling points, optionally over a contour.
    pub fn to_svg(&self, contour: Option<&Contour>) -> String {
        let mut min = Point2::new(f64::INFINITY, f64::INFINITY);
        let mut max = Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        let mut extend = |p: &Point2| {
            min.x = min.x.min(p.x);
            min.y = min.y.min(p.y);
            max.x = max.x.max(p.x);
            max.y = max.y.max(p.y);
        };
        for p in &self.locations {
            extend(p);
        }
        if let Some(c) = contour {
            for p in c.vertices() {
                extend(p);
            }
        }
        let pad = 0.05 * (max.x - min.x).max(max.y - min.y).max(1.0);
        let (x0, y0) = (min.x - pad, min.y - pad);
        let (w, h) = (max.x - min.x + 2.0 * pad, max.y - min.y + 2.0 * pad);
        let mut svg = format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"{x0} {y0} {w} {h}\">\n"
        );
        if let Some(c) = contour {
            let pts: Vec<String> = c
                .vertices()
                .iter()
                .map(|p| format!("{},{}", p.x, p.y))
                .collect();
            svg.push_str(&format!(
                "  <polygon points=\"{}\" fill=\"none\" stroke=\"black\" stroke-width=\"{}\"/>\n",
                pts.join(" "),
                0.004 * w.max(h)
            ));
        }
        let r = 0.006 * w.max(h);
        for p in &self.locations {
            svg.push_str(&format!(
                "  <circle cx=\"{}\" cy=\"{}\" r=\"{r}\" fill=\"crimson\"/>\n",
                p.x, p.y
            ));
        }
        svg.push_str("</svg>\n");
        svg
    }
}

/// One attention head per ray; mismatched configurations are rejected.
pub fn check_head_ray_match(heads: usize, rays: usize) -> Result<()> {
    if heads != rays {
        return Err(Error::parameter(format!(
            "polar attention requires one head per ray: {heads} heads vs {rays} rays"
        )));
    }
    Ok(())
}

/// Fan-shaped base grid: `g_{k,t} = s + d_k * (t / T) * u_k` for t = 1..T.
/// Rays with zero distance collapse onto the start.
pub fn fan_base_grid(
    params: &PolarParams,
    angles: &AngleSet,
    t_points: usize,
) -> Result<SamplingGrid> {
    if t_points < 1 {
        return Err(Error::parameter("T must be >= 1"));
    }
    if params.distances.len() != angles.len() {
        return Err(Error::Dimension {
            context: "fan_base_grid distances vs angles",
            expected: angles.len(),
            actual: params.distances.len(),
        });
    }
    let k = angles.len();
    let mut locations = Vec::with_capacity(k * t_points);
    for (ray, &d) in params.distances.iter().enumerate() {
        let u = angles.direction(ray);
        for t in 1..=t_points {
            let frac = d * t as f64 / t_points as f64;
            locations.push(Point2::new(
                params.start.x + frac * u.x,
                params.start.y + frac * u.y,
            ));
        }
    }
    Ok(SamplingGrid::from_locations(k, t_points, locations))
}

/// Fan grid plus offsets modulated by the per-ray distance:
/// `g_{k,t} = base_{k,t} + offset_{k,t} * (d_k * u_k / T)` elementwise.
/// A zero offset field reproduces [`fan_base_grid`] exactly.
pub fn polar_sampling_locations(
    params: &PolarParams,
    angles: &AngleSet,
    t_points: usize,
    offsets: &OffsetField,
) -> Result<SamplingGrid> {
    if offsets.groups != angles.len() || offsets.points != t_points {
        return Err(Error::Dimension {
            context: "polar sampling offset shape",
            expected: angles.len() * t_points,
            actual: offsets.groups * offsets.points,
        });
    }
    let mut grid = fan_base_grid(params, angles, t_points)?;
    for ray in 0..grid.rays {
        let u = angles.direction(ray);
        let d = params.distances[ray];
        let mod_x = d * u.x / t_points as f64;
        let mod_y = d * u.y / t_points as f64;
        for t in 0..t_points {
            let (ox, oy) = offsets.at(ray, t);
            let idx = ray * t_points + t;
            grid.locations[idx].x += ox * mod_x;
            grid.locations[idx].y += oy * mod_y;
        }
    }
    Ok(grid)
}

/// Box-oriented baseline: `g = center + offset * (w, h)` elementwise.
pub fn box_sampling_locations(
    center: Point2,
    size: (f64, f64),
    offsets: &OffsetField,
) -> Result<SamplingGrid> {
    let (w, h) = size;
    if !(w > 0.0 && h > 0.0) {
        return Err(Error::parameter(format!(
            "box size must be positive, got ({w}, {h})"
        )));
    }
    let mut locations = Vec::with_capacity(offsets.groups * offsets.points);
    for g in 0..offsets.groups {
        for t in 0..offsets.points {
            let (ox, oy) = offsets.at(g, t);
            locations.push(Point2::new(center.x + ox * w, center.y + oy * h));
        }
    }
    Ok(SamplingGrid::from_locations(
        offsets.groups,
        offsets.points,
        locations,
    ))
}

/// A multi-channel feature grid at one pyramid level.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    /// Row-major, channel-minor: index `(row * width + col) * channels + c`.
    pub values: Vec<f64>,
    pub stride: u32,
}

impl FeatureMap {
    pub fn new(
        height: usize,
        width: usize,
        channels: usize,
        values: Vec<f64>,
        stride: u32,
    ) -> Result<Self> {
        if !LEVEL_STRIDES.contains(&stride) {
            return Err(Error::parameter(format!(
                "stride {stride} not in {LEVEL_STRIDES:?}"
            )));
        }
        if values.len() != height * width * channels {
            return Err(Error::Dimension {
                context: "feature map values",
                expected: height * width * channels,
                actual: values.len(),
            });
        }
        Ok(FeatureMap {
            height,
            width,
            channels,
            values,
            stride,
        })
    }

    fn at(&self, col: i64, row: i64, channel: usize) -> f64 {
        if col < 0 || row < 0 || col >= self.width as i64 || row >= self.height as i64 {
            return 0.0;
        }
        self.values[(row as usize * self.width + col as usize) * self.channels + channel]
    }
}

/// Bilinear interpolation at an image-pixel location, with cell centers at
/// `(i + 0.5) * stride` and zero padding outside the map.
pub fn bilinear_sample(map: &FeatureMap, at: Point2) -> Vec<f64> {
    let u = at.x / map.stride as f64 - 0.5;
    let v = at.y / map.stride as f64 - 0.5;
    let c0 = u.floor();
    let r0 = v.floor();
    let fu = u - c0;
    let fv = v - r0;
    let (c0, r0) = (c0 as i64, r0 as i64);
    let mut out = Vec::with_capacity(map.channels);
    for ch in 0..map.channels {
        let v00 = map.at(c0, r0, ch);
        let v10 = map.at(c0 + 1, r0, ch);
        let v01 = map.at(c0, r0 + 1, ch);
        let v11 = map.at(c0 + 1, r0 + 1, ch);
        out.push(
            v00 * (1.0 - fu) * (1.0 - fv)
                + v10 * fu * (1.0 - fv)
                + v01 * (1.0 - fu) * fv
                + v11 * fu * fv,
        );
    }
    out
}

/// Where a sampling grid's attention budget lands relative to a contour.
/// `interior + exterior = 1`; `near_boundary` counts points within the band
/// on either side and overlaps both.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoverageStats {
    pub near_boundary: f64,
    pub interior: f64,
    pub exterior: f64,
}

pub fn grid_coverage_stats(grid: &SamplingGrid, contour: &Contour) -> CoverageStats {
    grid_coverage_stats_with_band(grid, contour, DEFAULT_BAND_FRACTION)
}

pub fn grid_coverage_stats_with_band(
    grid: &SamplingGrid,
    contour: &Contour,
    band_fraction: f64,
) -> CoverageStats {
    let band = band_fraction * contour.diameter();
    let total = grid.locations.len() as f64;
    let mut near = 0usize;
    let mut interior = 0usize;
    for p in &grid.locations {
        if contour.distance_to_boundary(*p) <= band {
            near += 1;
        }
        if point_in_contour(contour, *p) {
            interior += 1;
        }
    }
    CoverageStats {
        near_boundary: near as f64 / total,
        interior: interior as f64 / total,
        exterior: 1.0 - interior as f64 / total,
    }
}
