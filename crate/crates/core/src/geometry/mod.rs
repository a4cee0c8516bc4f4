//! Analytic polygon geometry: polar reconstruction, ray-contour
//! intersection, point-in-polygon, areas and exact polygon IoU.
//!
//! Everything here is pure and allocation-light; these routines are the
//! ground truth the rasterized losses are checked against.

mod clip;

pub use clip::{convex_clip, intersection_area, is_convex};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Distance below which a point counts as lying on a boundary.
pub const BOUNDARY_TOL: f64 = 1e-9;
/// Determinant threshold for treating a ray and an edge as parallel.
pub const PARALLEL_EPS: f64 = 1e-12;
/// Areas below this are treated as degenerate.
pub const AREA_EPS: f64 = 1e-12;

/// A 2D point in image pixels.
#[derive(Debug, Copy, Clone, PartialEq, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub fn new(x: f64, y: f64) -> Self {
        Point2 { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn add(&self, other: Point2) -> Point2 {
        Point2::new(self.x + other.x, self.y + other.y)
    }

    pub fn sub(&self, other: Point2) -> Point2 {
        Point2::new(self.x - other.x, self.y - other.y)
    }

    pub fn dist(&self, other: Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Cross product of (b - a) and (c - a).
#[inline]
pub fn cross(a: Point2, b: Point2, c: Point2) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

/// Signed shoelace area of a closed vertex ring.
pub fn signed_area(vertices: &[Point2]) -> f64 {
    let n = vertices.len();
    if n < 3 {
        return 0.0;
    }
    let mut acc = 0.0;
    for i in 0..n {
        let a = vertices[i];
        let b = vertices[(i + 1) % n];
        acc += a.x * b.y - b.x * a.y;
    }
    acc * 0.5
}

/// Distance from `p` to the segment `a`-`b`.
pub fn point_segment_distance(p: Point2, a: Point2, b: Point2) -> f64 {
    let ex = b.x - a.x;
    let ey = b.y - a.y;
    let len2 = ex * ex + ey * ey;
    if len2 <= 0.0 {
        return p.dist(a);
    }
    let t = (((p.x - a.x) * ex + (p.y - a.y) * ey) / len2).clamp(0.0, 1.0);
    p.dist(Point2::new(a.x + t * ex, a.y + t * ey))
}

/// An explicit closed polygon. Unlike [`Contour`], no simplicity check is
/// performed: reconstructed polygons from noisy parameters may be degenerate
/// and are still representable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polygon {
    pub vertices: Vec<Point2>,
}

impl Polygon {
    pub fn new(vertices: Vec<Point2>) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(Error::parameter(format!(
                "polygon needs >= 3 vertices, got {}",
                vertices.len()
            )));
        }
        if let Some(p) = vertices.iter().find(|p| !p.is_finite()) {
            return Err(Error::Domain {
                reason: "non-finite polygon vertex",
                x: p.x,
                y: p.y,
            });
        }
        Ok(Polygon { vertices })
    }

    pub fn area(&self) -> f64 {
        signed_area(&self.vertices).abs()
    }

    pub fn bounding_box(&self) -> (Point2, Point2) {
        bounding_box(&self.vertices)
    }

    pub fn translate(&self, t: Point2) -> Polygon {
        Polygon {
            vertices: self.vertices.iter().map(|v| v.add(t)).collect(),
        }
    }

    /// O(n^2) check for properly crossing edge pairs. Used for diagnostics.
    pub fn is_simple(&self) -> bool {
        ring_is_simple(&self.vertices)
    }
}

/// Axis-aligned bounding box of a vertex set.
pub fn bounding_box(vertices: &[Point2]) -> (Point2, Point2) {
    let mut min = Point2::new(f64::INFINITY, f64::INFINITY);
    let mut max = Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    for v in vertices {
        min.x = min.x.min(v.x);
        min.y = min.y.min(v.y);
        max.x = max.x.max(v.x);
        max.y = max.y.max(v.y);
    }
    (min, max)
}

fn segments_properly_cross(a: Point2, b: Point2, c: Point2, d: Point2) -> bool {
    let d1 = cross(c, d, a);
    let d2 = cross(c, d, b);
    let d3 = cross(a, b, c);
    let d4 = cross(a, b, d);
    ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
}

fn collinear_segments_overlap(a: Point2, b: Point2, c: Point2, d: Point2) -> bool {
    // All four points collinear: check 1D interval overlap with positive length.
    let eps = 1e-12;
    if cross(a, b, c).abs() > eps || cross(a, b, d).abs() > eps {
        return false;
    }
    let ex = b.x - a.x;
    let ey = b.y - a.y;
    let proj = |p: Point2| (p.x - a.x) * ex + (p.y - a.y) * ey;
    let (s0, s1): (f64, f64) = (0.0, ex * ex + ey * ey);
    let (mut t0, mut t1) = (proj(c), proj(d));
    if t0 > t1 {
        std::mem::swap(&mut t0, &mut t1);
    }
    let lo = s0.max(t0);
    let hi = s1.min(t1);
    hi - lo > eps * (1.0 + s1.abs())
}

fn ring_is_simple(vertices: &[Point2]) -> bool {
    let n = vertices.len();
    for i in 0..n {
        let a = vertices[i];
        let b = vertices[(i + 1) % n];
        for j in (i + 1)..n {
            // Skip adjacent edges (shared endpoint).
            if j == i || (j + 1) % n == i || (i + 1) % n == j {
                continue;
            }
            let c = vertices[j];
            let d = vertices[(j + 1) % n];
            if segments_properly_cross(a, b, c, d) || collinear_segments_overlap(a, b, c, d) {
                return false;
            }
        }
    }
    true
}

/// A validated ground-truth instance boundary: a simple closed polygon,
/// normalized to counter-clockwise orientation. Consecutive duplicate
/// vertices are removed on construction; collinear vertices are kept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contour {
    vertices: Vec<Point2>,
}

impl Contour {
    pub fn new(raw: Vec<Point2>) -> Result<Self> {
        if let Some(p) = raw.iter().find(|p| !p.is_finite()) {
            return Err(Error::Domain {
                reason: "non-finite contour vertex",
                x: p.x,
                y: p.y,
            });
        }
        let mut vertices: Vec<Point2> = Vec::with_capacity(raw.len());
        for v in raw {
            if let Some(last) = vertices.last() {
                if last.dist(v) <= BOUNDARY_TOL {
                    continue;
                }
            }
            vertices.push(v);
        }
        // Drop an explicit closing vertex.
        while vertices.len() >= 2
            && vertices[0].dist(*vertices.last().unwrap()) <= BOUNDARY_TOL
        {
            vertices.pop();
        }
        if vertices.len() < 3 {
            return Err(Error::InvalidContour(format!(
                "needs >= 3 distinct vertices, got {}",
                vertices.len()
            )));
        }
        let area = signed_area(&vertices);
        if area.abs() <= AREA_EPS {
            return Err(Error::InvalidContour("zero signed area".into()));
        }
        if area < 0.0 {
            vertices.reverse();
        }
        if !ring_is_simple(&vertices) {
            return Err(Error::InvalidContour("self-intersecting boundary".into()));
        }
        Ok(Contour { vertices })
    }

    /// Build from interleaved `[x1, y1, x2, y2, ...]` coordinates.
    pub fn from_flat(coords: &[f64]) -> Result<Self> {
        if coords.len() % 2 != 0 {
            return Err(Error::InvalidContour(format!(
                "odd coordinate count {}",
                coords.len()
            )));
        }
        Contour::new(
            coords
                .chunks_exact(2)
                .map(|c| Point2::new(c[0], c[1]))
                .collect(),
        )
    }

    pub fn vertices(&self) -> &[Point2] {
        &self.vertices
    }

    pub fn area(&self) -> f64 {
        signed_area(&self.vertices)
    }

    pub fn bounding_box(&self) -> (Point2, Point2) {
        bounding_box(&self.vertices)
    }

    /// Area centroid.
    pub fn centroid(&self) -> Point2 {
        let n = self.vertices.len();
        let mut cx = 0.0;
        let mut cy = 0.0;
        let mut a = 0.0;
        for i in 0..n {
            let p = self.vertices[i];
            let q = self.vertices[(i + 1) % n];
            let w = p.x * q.y - q.x * p.y;
            cx += (p.x + q.x) * w;
            cy += (p.y + q.y) * w;
            a += w;
        }
        let a = a * 0.5;
        Point2::new(cx / (6.0 * a), cy / (6.0 * a))
    }

    /// Maximum pairwise vertex distance.
    pub fn diameter(&self) -> f64 {
        let mut best: f64 = 0.0;
        for (i, a) in self.vertices.iter().enumerate() {
            for b in &self.vertices[i + 1..] {
                best = best.max(a.dist(*b));
            }
        }
        best
    }

    /// Minimum distance from `p` to the boundary.
    pub fn distance_to_boundary(&self, p: Point2) -> f64 {
        let n = self.vertices.len();
        let mut best = f64::INFINITY;
        for i in 0..n {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            best = best.min(point_segment_distance(p, a, b));
        }
        best
    }

    /// Winding number of `p` with respect to the boundary.
    pub fn winding_number(&self, p: Point2) -> i32 {
        let n = self.vertices.len();
        let mut winding = 0i32;
        for i in 0..n {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            if a.y <= p.y {
                if b.y > p.y && cross(a, b, p) > 0.0 {
                    winding += 1;
                }
            } else if b.y <= p.y && cross(a, b, p) < 0.0 {
                winding -= 1;
            }
        }
        winding
    }

    /// True when `p` is strictly inside with at least `margin` clearance from
    /// the boundary.
    pub fn strictly_inside(&self, p: Point2, margin: f64) -> bool {
        self.distance_to_boundary(p) > margin && self.winding_number(p) != 0
    }

    pub fn translate(&self, t: Point2) -> Contour {
        Contour {
            vertices: self.vertices.iter().map(|v| v.add(t)).collect(),
        }
    }

    pub fn scale(&self, factor: f64) -> Result<Contour> {
        Contour::new(
            self.vertices
                .iter()
                .map(|v| Point2::new(v.x * factor, v.y * factor))
                .collect(),
        )
    }

    pub fn to_polygon(&self) -> Polygon {
        Polygon {
            vertices: self.vertices.clone(),
        }
    }
}

/// K uniformly spaced ray angles. The first angle defaults to 0 and is
/// exposed as a phase knob.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngleSet {
    thetas: Vec<f64>,
}

impl AngleSet {
    /// Uniform angles `theta_k = 2*pi*(k-1)/K` with phase 0.
    pub fn uniform(k: usize) -> Result<Self> {
        Self::with_phase(k, 0.0)
    }

    /// Uniform angles offset by `phase`.
    pub fn with_phase(k: usize, phase: f64) -> Result<Self> {
        if k < 3 {
            return Err(Error::parameter(format!("K must be >= 3, got {k}")));
        }
        if !phase.is_finite() {
            return Err(Error::parameter("phase must be finite"));
        }
        let thetas = (0..k)
            .map(|i| phase + 2.0 * std::f64::consts::PI * (i as f64) / (k as f64))
            .collect();
        Ok(AngleSet { thetas })
    }

    pub fn len(&self) -> usize {
        self.thetas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thetas.is_empty()
    }

    pub fn thetas(&self) -> &[f64] {
        &self.thetas
    }

    /// Unit direction of ray `k`.
    pub fn direction(&self, k: usize) -> Point2 {
        Point2::new(self.thetas[k].cos(), self.thetas[k].sin())
    }
}

/// Polar parameters: a starting point plus K nonnegative radial distances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolarParams {
    pub start: Point2,
    pub distances: Vec<f64>,
}

impl PolarParams {
    pub fn new(start: Point2, distances: Vec<f64>) -> Result<Self> {
        if !start.is_finite() {
            return Err(Error::Domain {
                reason: "non-finite starting point",
                x: start.x,
                y: start.y,
            });
        }
        if let Some(d) = distances.iter().find(|d| !d.is_finite() || **d < 0.0) {
            return Err(Error::parameter(format!(
                "radial distances must be finite and >= 0, got {d}"
            )));
        }
        Ok(PolarParams { start, distances })
    }

    pub fn rays(&self) -> usize {
        self.distances.len()
    }
}

/// Place one vertex per ray at `start + d_k * (cos theta_k, sin theta_k)`.
///
/// Zero distances collapse the corresponding vertex onto the start; the
/// result is still returned (degenerate vertices are allowed downstream).
pub fn reconstruct_polygon(params: &PolarParams, angles: &AngleSet) -> Result<Polygon> {
    if params.distances.len() != angles.len() {
        return Err(Error::Dimension {
            context: "reconstruct_polygon distances vs angles",
            expected: angles.len(),
            actual: params.distances.len(),
        });
    }
    let vertices = params
        .distances
        .iter()
        .zip(angles.thetas())
        .map(|(&d, &theta)| {
            Point2::new(
                params.start.x + d * theta.cos(),
                params.start.y + d * theta.sin(),
            )
        })
        .collect();
    Polygon::new(vertices)
}

/// True when `p` is inside the contour; boundary points (within
/// [`BOUNDARY_TOL`]) count as inside.
pub fn point_in_contour(contour: &Contour, p: Point2) -> bool {
    if contour.distance_to_boundary(p) <= BOUNDARY_TOL {
        return true;
    }
    contour.winding_number(p) != 0
}

/// Absolute shoelace area.
pub fn polygon_area(poly: &Polygon) -> f64 {
    poly.area()
}

/// Distance from `start` to the farthest boundary intersection along each
/// ray. This is the ray-contour intersection map used to generate polar
/// ground truth; the farthest-hit convention maximizes covered area on
/// non-convex contours.
///
/// `start` must be strictly inside the contour.
pub fn ray_contour_intersect(
    contour: &Contour,
    start: Point2,
    angles: &AngleSet,
) -> Result<Vec<f64>> {
    if !contour.strictly_inside(start, BOUNDARY_TOL) {
        return Err(Error::Domain {
            reason: "starting point not strictly inside contour",
            x: start.x,
            y: start.y,
        });
    }
    let verts = contour.vertices();
    let n = verts.len();
    let mut out = Vec::with_capacity(angles.len());
    for k in 0..angles.len() {
        let u = angles.direction(k);
        let mut t_max: f64 = 0.0;
        for i in 0..n {
            let a = verts[i];
            let b = verts[(i + 1) % n];
            let ex = b.x - a.x;
            let ey = b.y - a.y;
            let det = u.x * ey - u.y * ex;
            let wx = a.x - start.x;
            let wy = a.y - start.y;
            if det.abs() > PARALLEL_EPS {
                let t = (wx * ey - wy * ex) / det;
                let v = (wx * u.y - wy * u.x) / det;
                if t >= 0.0 && (-1e-12..=1.0 + 1e-12).contains(&v) {
                    t_max = t_max.max(t);
                }
            } else {
                // Parallel edge: only collinear overlap can contribute, and it
                // contributes its farthest endpoint.
                let off = wx * u.y - wy * u.x;
                if off.abs() <= BOUNDARY_TOL {
                    let ta = wx * u.x + wy * u.y;
                    let tb = (b.x - start.x) * u.x + (b.y - start.y) * u.y;
                    let far = ta.max(tb);
                    if far >= 0.0 {
                        t_max = t_max.max(far);
                    }
                }
            }
        }
        debug_assert!(t_max > 0.0, "interior start must hit the boundary");
        out.push(t_max);
    }
    Ok(out)
}

/// Exact IoU of two polygons along with a degeneracy flag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IouResult {
    pub iou: f64,
    /// Set when either input has (near-)zero area; the IoU is then 0.
    pub degenerate: bool,
}

/// Exact polygon-polygon IoU via polygon clipping. Returns 0 (flagged) for
/// degenerate zero-area inputs.
pub fn exact_polygon_iou_detailed(a: &Polygon, b: &Polygon) -> IouResult {
    let area_a = a.area();
    let area_b = b.area();
    if area_a <= AREA_EPS || area_b <= AREA_EPS {
        return IouResult {
            iou: 0.0,
            degenerate: true,
        };
    }
    let inter = intersection_area(&a.vertices, &b.vertices)
        .max(0.0)
        .min(area_a.min(area_b));
    let union = area_a + area_b - inter;
    IouResult {
        iou: (inter / union).clamp(0.0, 1.0),
        degenerate: false,
    }
}

/// Exact polygon-polygon IoU in `[0, 1]`.
pub fn exact_polygon_iou(a: &Polygon, b: &Polygon) -> f64 {
    exact_polygon_iou_detailed(a, b).iou
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    pub(crate) fn square(x0: f64, y0: f64, x1: f64, y1: f64) -> Contour {
        Contour::new(vec![
            Point2::new(x0, y0),
            Point2::new(x1, y0),
            Point2::new(x1, y1),
            Point2::new(x0, y1),
        ])
        .unwrap()
    }

    /// Concave test shape: two vertical prongs joined by a base.
    pub(crate) fn u_shape() -> Contour {
        Contour::from_flat(&[
            0.0, 0.0, 5.0, 0.0, 5.0, 5.0, 4.0, 5.0, 4.0, 1.0, 1.0, 1.0, 1.0, 5.0, 0.0, 5.0,
        ])
        .unwrap()
    }

    #[test]
    fn contour_rejects_self_intersection() {
        let bowtie = Contour::from_flat(&[0.0, 0.0, 2.0, 2.0, 2.0, 0.0, 0.0, 2.0]);
        assert!(bowtie.is_err());
    }

    #[test]
    fn contour_rejects_degenerate() {
        assert!(Contour::from_flat(&[0.0, 0.0, 1.0, 1.0, 2.0, 2.0]).is_err());
        assert!(Contour::from_flat(&[0.0, 0.0, 1.0, 0.0]).is_err());
    }

    #[test]
    fn contour_normalizes_to_ccw_and_dedupes() {
        // Clockwise square with a duplicated vertex and explicit closure.
        let c = Contour::from_flat(&[
            0.0, 0.0, 0.0, 2.0, 2.0, 2.0, 2.0, 2.0, 2.0, 0.0, 0.0, 0.0,
        ])
        .unwrap();
        assert_eq!(c.vertices().len(), 4);
        assert!(c.area() > 0.0);
    }

    #[test]
    fn reconstruct_axis_symmetric_diamond() {
        let angles = AngleSet::uniform(4).unwrap();
        let p = PolarParams::new(Point2::new(1.0, 1.0), vec![2.0; 4]).unwrap();
        let poly = reconstruct_polygon(&p, &angles).unwrap();
        let expect = [(3.0, 1.0), (1.0, 3.0), (-1.0, 1.0), (1.0, -1.0)];
        for (v, (ex, ey)) in poly.vertices.iter().zip(expect) {
            assert_abs_diff_eq!(v.x, ex, epsilon = 1e-12);
            assert_abs_diff_eq!(v.y, ey, epsilon = 1e-12);
        }
    }

    #[test]
    fn reconstruct_unit_diamond_area() {
        let angles = AngleSet::uniform(4).unwrap();
        let p = PolarParams::new(Point2::new(0.0, 0.0), vec![1.0; 4]).unwrap();
        let poly = reconstruct_polygon(&p, &angles).unwrap();
        assert_abs_diff_eq!(polygon_area(&poly), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn reconstruct_regular_32gon_area() {
        // Shoelace on the computed vertices must match (K/2) r^2 sin(2 pi / K).
        let k = 32;
        let angles = AngleSet::uniform(k).unwrap();
        let p = PolarParams::new(Point2::new(10.0, 10.0), vec![5.0; k]).unwrap();
        let poly = reconstruct_polygon(&p, &angles).unwrap();
        let expected = (k as f64 / 2.0) * 25.0 * (2.0 * std::f64::consts::PI / k as f64).sin();
        assert_abs_diff_eq!(expected, 78.03612880645, epsilon = 1e-9);
        assert_abs_diff_eq!(polygon_area(&poly), expected, epsilon = 1e-9);
    }

    #[test]
    fn reconstruct_dimension_mismatch() {
        let angles = AngleSet::uniform(4).unwrap();
        let p = PolarParams::new(Point2::new(0.0, 0.0), vec![1.0; 5]).unwrap();
        assert!(matches!(
            reconstruct_polygon(&p, &angles),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn ray_intersect_centered_square() {
        let c = square(0.0, 0.0, 4.0, 4.0);
        let angles = AngleSet::uniform(4).unwrap();
        let d = ray_contour_intersect(&c, Point2::new(2.0, 2.0), &angles).unwrap();
        for v in d {
            assert_abs_diff_eq!(v, 2.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn ray_intersect_offset_square() {
        let c = square(0.0, 0.0, 4.0, 4.0);
        let angles = AngleSet::uniform(4).unwrap();
        let d = ray_contour_intersect(&c, Point2::new(1.0, 2.0), &angles).unwrap();
        let expect = [3.0, 2.0, 1.0, 2.0];
        for (v, e) in d.iter().zip(expect) {
            assert_abs_diff_eq!(*v, e, epsilon = 1e-12);
        }
    }

    #[test]
    fn ray_intersect_takes_farthest_hit_across_notch() {
        let c = u_shape();
        let angles = AngleSet::uniform(4).unwrap();
        let d = ray_contour_intersect(&c, Point2::new(0.5, 3.0), &angles).unwrap();
        // theta = 0 crosses the notch and exits at x = 5.
        assert_abs_diff_eq!(d[0], 4.5, epsilon = 1e-12);
    }

    #[test]
    fn ray_intersect_rejects_outside_start() {
        let c = square(0.0, 0.0, 4.0, 4.0);
        let angles = AngleSet::uniform(4).unwrap();
        let err = ray_contour_intersect(&c, Point2::new(5.0, 5.0), &angles).unwrap_err();
        match err {
            Error::Domain { x, y, .. } => {
                assert_eq!((x, y), (5.0, 5.0));
            }
            other => panic!("expected domain error, got {other:?}"),
        }
        // On-boundary starts are rejected too.
        assert!(ray_contour_intersect(&c, Point2::new(0.0, 2.0), &angles).is_err());
    }

    #[test]
    fn point_in_contour_square() {
        let c = square(0.0, 0.0, 4.0, 4.0);
        assert!(point_in_contour(&c, Point2::new(2.0, 2.0)));
        assert!(!point_in_contour(&c, Point2::new(5.0, 5.0)));
        // Boundary counts as inside.
        assert!(point_in_contour(&c, Point2::new(0.0, 2.0)));
        assert!(point_in_contour(&c, Point2::new(4.0, 4.0)));
    }

    #[test]
    fn point_in_contour_notch_is_outside() {
        let c = u_shape();
        assert!(!point_in_contour(&c, Point2::new(2.5, 3.0)));
        assert!(point_in_contour(&c, Point2::new(0.5, 3.0)));
        assert!(point_in_contour(&c, Point2::new(2.5, 0.5)));
    }

    #[test]
    fn polygon_area_examples() {
        let sq = square(0.0, 0.0, 2.0, 2.0).to_polygon();
        assert_abs_diff_eq!(polygon_area(&sq), 4.0, epsilon = 1e-12);
        let tri = Polygon::new(vec![
            Point2::new(0.0, 0.0),
            Point2::new(4.0, 0.0),
            Point2::new(0.0, 3.0),
        ])
        .unwrap();
        assert_abs_diff_eq!(polygon_area(&tri), 6.0, epsilon = 1e-12);
    }

    #[test]
    fn iou_identical_squares() {
        let a = square(0.0, 0.0, 2.0, 2.0).to_polygon();
        assert_abs_diff_eq!(exact_polygon_iou(&a, &a), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn iou_overlapping_squares_one_third() {
        let a = square(0.0, 0.0, 2.0, 2.0).to_polygon();
        let b = square(1.0, 0.0, 3.0, 2.0).to_polygon();
        assert_abs_diff_eq!(exact_polygon_iou(&a, &b), 1.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn iou_diamond_in_square_is_half() {
        let angles = AngleSet::uniform(4).unwrap();
        let p = PolarParams::new(Point2::new(0.0, 0.0), vec![1.0; 4]).unwrap();
        let diamond = reconstruct_polygon(&p, &angles).unwrap();
        let sq = square(-1.0, -1.0, 1.0, 1.0).to_polygon();
        assert_abs_diff_eq!(exact_polygon_iou(&diamond, &sq), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn iou_disjoint_is_zero() {
        let a = square(0.0, 0.0, 1.0, 1.0).to_polygon();
        let b = square(5.0, 5.0, 6.0, 6.0).to_polygon();
        assert_abs_diff_eq!(exact_polygon_iou(&a, &b), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn iou_degenerate_flagged() {
        let a = square(0.0, 0.0, 1.0, 1.0).to_polygon();
        let line = Polygon::new(vec![
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(2.0, 0.0),
        ])
        .unwrap();
        let r = exact_polygon_iou_detailed(&a, &line);
        assert_eq!(r.iou, 0.0);
        assert!(r.degenerate);
    }

    #[test]
    fn iou_nonconvex_u_shape_against_square() {
        // Square covering the whole U bounding box: IoU = area(U) / area(box).
        let u = u_shape().to_polygon();
        let bbox = square(0.0, 0.0, 5.0, 5.0).to_polygon();
        let expected = u.area() / 25.0;
        assert_abs_diff_eq!(exact_polygon_iou(&u, &bbox), expected, epsilon = 1e-9);
    }
}
