//! Fixed-resolution soft masks: polygon rasterization, soft IoU and
//! representation error.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    bounding_box, exact_polygon_iou, ray_contour_intersect, reconstruct_polygon, signed_area,
    AngleSet, Contour, Point2, Polygon, PolarParams, AREA_EPS,
};

/// Supersampling grid per cell side (4x4 = 16 samples per cell).
const SUBSAMPLES: usize = 4;
/// Fractional padding added to each side of a union bounding box (5% growth
/// per dimension in total).
const FRAME_PAD: f64 = 0.025;

/// Axis-aligned affine map from mask-cell space to image pixel space:
/// `pixel = origin + (scale_x * u, scale_y * v)`.
#[derive(Debug, Copy, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub origin: Point2,
    pub scale_x: f64,
    pub scale_y: f64,
}

impl Frame {
    pub fn new(origin: Point2, scale_x: f64, scale_y: f64) -> Result<Self> {
        let f = Frame {
            origin,
            scale_x,
            scale_y,
        };
        if !f.is_invertible() {
            return Err(Error::parameter(format!(
                "frame is not invertible (scales {scale_x}, {scale_y})"
            )));
        }
        Ok(f)
    }

    pub fn is_invertible(&self) -> bool {
        self.origin.is_finite()
            && self.scale_x.is_finite()
            && self.scale_y.is_finite()
            && self.scale_x.abs() > 1e-300
            && self.scale_y.abs() > 1e-300
    }

    /// Frame mapping a `width x height` grid onto the pixel rect `[min, max]`.
    pub fn from_bounds(min: Point2, max: Point2, width: usize, height: usize) -> Result<Self> {
        Frame::new(
            min,
            (max.x - min.x) / width as f64,
            (max.y - min.y) / height as f64,
        )
    }

    pub fn cell_to_pixel(&self, u: f64, v: f64) -> Point2 {
        Point2::new(
            self.origin.x + self.scale_x * u,
            self.origin.y + self.scale_y * v,
        )
    }

    pub fn pixel_to_cell(&self, p: Point2) -> (f64, f64) {
        (
            (p.x - self.origin.x) / self.scale_x,
            (p.y - self.origin.y) / self.scale_y,
        )
    }

    pub fn approx_eq(&self, other: &Frame) -> bool {
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * (1.0 + a.abs().max(b.abs()));
        close(self.origin.x, other.origin.x)
            && close(self.origin.y, other.origin.y)
            && close(self.scale_x, other.scale_x)
            && close(self.scale_y, other.scale_y)
    }
}

/// Tight bounding box of all given vertex rings, expanded by 5% per
/// dimension. This is the loss frame: scale-invariant and clipping neither
/// shape.
pub fn union_frame(rings: &[&[Point2]], width: usize, height: usize) -> Result<Frame> {
    let mut min = Point2::new(f64::INFINITY, f64::INFINITY);
    let mut max = Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    for ring in rings {
        let (lo, hi) = bounding_box(ring);
        min.x = min.x.min(lo.x);
        min.y = min.y.min(lo.y);
        max.x = max.x.max(hi.x);
        max.y = max.y.max(hi.y);
    }
    if !min.is_finite() || !max.is_finite() {
        return Err(Error::parameter("union_frame needs at least one vertex"));
    }
    let w = (max.x - min.x).max(1e-6);
    let h = (max.y - min.y).max(1e-6);
    Frame::from_bounds(
        Point2::new(min.x - FRAME_PAD * w, min.y - FRAME_PAD * h),
        Point2::new(max.x + FRAME_PAD * w, max.y + FRAME_PAD * h),
        width,
        height,
    )
}

/// How cell coverage is computed.
#[derive(Debug, Copy, Clone, PartialEq, Eq, Default)]
pub enum RasterMode {
    /// 4x4 even-odd point sampling per cell. Piecewise constant in the
    /// polygon parameters.
    #[default]
    Supersample,
    /// Analytic coverage via signed triangle decomposition clipped per cell.
    /// Piecewise smooth in the polygon parameters; used by gradient checks.
    Exact,
}

/// A `width x height` grid of per-cell coverage fractions in `[0, 1]`,
/// row-major, with the frame mapping cells to pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftMask {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
    pub frame: Frame,
}

impl SoftMask {
    pub fn at(&self, col: usize, row: usize) -> f64 {
        self.values[row * self.width + col]
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Binary P5 PGM dump (8-bit, row-major) for visual inspection.
    pub fn write_pgm<W: std::io::Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "P5\n{} {}\n255", self.width, self.height)?;
        let bytes: Vec<u8> = self
            .values
            .iter()
            .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
            .collect();
        w.write_all(&bytes)?;
        Ok(())
    }
}

/// Rasterize a polygon into a soft coverage mask with the default
/// supersampling mode.
pub fn rasterize(poly: &Polygon, width: usize, height: usize, frame: &Frame) -> Result<SoftMask> {
    rasterize_with_mode(poly, width, height, frame, RasterMode::Supersample)
}

pub fn rasterize_with_mode(
    poly: &Polygon,
    width: usize,
    height: usize,
    frame: &Frame,
    mode: RasterMode,
) -> Result<SoftMask> {
    if width < 2 || height < 2 {
        return Err(Error::parameter(format!(
            "mask resolution must be >= 2, got {width}x{height}"
        )));
    }
    if !frame.is_invertible() {
        return Err(Error::parameter("non-invertible frame"));
    }
    // Work in cell space; the frame is axis-aligned so the polygon stays a
    // polygon under the inverse map.
    let cell_verts: Vec<Point2> = poly
        .vertices
        .iter()
        .map(|p| {
            let (u, v) = frame.pixel_to_cell(*p);
            Point2::new(u, v)
        })
        .collect();
    let values = match mode {
        RasterMode::Supersample => supersample_coverage(&cell_verts, width, height),
        RasterMode::Exact => exact_coverage(&cell_verts, width, height),
    };
    Ok(SoftMask {
        width,
        height,
        values,
        frame: *frame,
    })
}

/// Even-odd crossings of the ring with the horizontal line `y`, sorted.
fn row_crossings(verts: &[Point2], y: f64, out: &mut Vec<f64>) {
    out.clear();
    let n = verts.len();
    for i in 0..n {
        let a = verts[i];
        let b = verts[(i + 1) % n];
        if (a.y > y) != (b.y > y) {
            out.push(a.x + (y - a.y) * (b.x - a.x) / (b.y - a.y));
        }
    }
    out.sort_by(|p, q| p.partial_cmp(q).unwrap());
}

/// Per-cell coverage from a 4x4 subgrid of even-odd point-in-polygon tests.
/// Each sub-row is resolved with one crossing list, which is exactly
/// equivalent to testing every sub-sample individually.
fn supersample_coverage(verts: &[Point2], width: usize, height: usize) -> Vec<f64> {
    let mut values = vec![0.0; width * height];
    let weight = 1.0 / (SUBSAMPLES * SUBSAMPLES) as f64;
    let sub_step = 1.0 / SUBSAMPLES as f64;
    let sub_cols = width * SUBSAMPLES;
    let mut xs: Vec<f64> = Vec::new();
    for row in 0..height {
        for j in 0..SUBSAMPLES {
            let y = row as f64 + (j as f64 + 0.5) * sub_step;
            row_crossings(verts, y, &mut xs);
            let row_base = row * width;
            for pair in xs.chunks_exact(2) {
                let (x0, x1) = (pair[0], pair[1]);
                // Sub-column centers at (k + 0.5) * sub_step, half-open [x0, x1).
                let k0 = ((x0 / sub_step - 0.5).ceil().max(0.0)) as usize;
                if x1 <= x0 {
                    continue;
                }
                let k1f = (x1 / sub_step - 0.5).ceil() - 1.0;
                if k1f < k0 as f64 {
                    continue;
                }
                let k1 = (k1f as usize).min(sub_cols - 1);
                for k in k0..=k1 {
                    values[row_base + k / SUBSAMPLES] += weight;
                }
            }
        }
    }
    for v in &mut values {
        *v = v.clamp(0.0, 1.0);
    }
    values
}

/// Analytic per-cell coverage: signed fan triangles clipped against each
/// cell square. Winding coverage, clamped to [0, 1]; identical to even-odd
/// on simple polygons.
fn exact_coverage(verts: &[Point2], width: usize, height: usize) -> Vec<f64> {
    let mut values = vec![0.0; width * height];
    if verts.len() < 3 {
        return values;
    }
    let ccw: Vec<Point2> = if signed_area(verts) < 0.0 {
        verts.iter().rev().copied().collect()
    } else {
        verts.to_vec()
    };
    let v0 = ccw[0];
    for w in ccw[1..].windows(2) {
        let tri_area = signed_area(&[v0, w[0], w[1]]);
        if tri_area.abs() <= 1e-15 {
            continue;
        }
        let sign = tri_area.signum();
        let tri = if sign > 0.0 {
            [v0, w[0], w[1]]
        } else {
            [v0, w[1], w[0]]
        };
        let (lo, hi) = bounding_box(&tri);
        let c0 = (lo.x.floor().max(0.0)) as usize;
        let r0 = (lo.y.floor().max(0.0)) as usize;
        if lo.x >= width as f64 || lo.y >= height as f64 || hi.x <= 0.0 || hi.y <= 0.0 {
            continue;
        }
        let c1 = (hi.x.ceil().min(width as f64) as usize).min(width);
        let r1 = (hi.y.ceil().min(height as f64) as usize).min(height);
        for row in r0..r1 {
            for col in c0..c1 {
                let cell = [
                    Point2::new(col as f64, row as f64),
                    Point2::new(col as f64 + 1.0, row as f64),
                    Point2::new(col as f64 + 1.0, row as f64 + 1.0),
                    Point2::new(col as f64, row as f64 + 1.0),
                ];
                let clipped = crate::geometry::convex_clip(&tri, &cell);
                if clipped.len() >= 3 {
                    values[row * width + col] += sign * signed_area(&clipped).abs();
                }
            }
        }
    }
    for v in &mut values {
        *v = v.clamp(0.0, 1.0);
    }
    values
}

/// Elementwise `sum(min) / sum(max)` of two masks over the same frame.
/// Two all-zero masks compare as identical, giving 1.0.
pub fn soft_iou(a: &SoftMask, b: &SoftMask) -> Result<f64> {
    if a.width != b.width || a.height != b.height {
        return Err(Error::Dimension {
            context: "soft_iou mask shapes",
            expected: a.values.len(),
            actual: b.values.len(),
        });
    }
    if !a.frame.approx_eq(&b.frame) {
        return Err(Error::parameter("soft_iou frames differ"));
    }
    let mut inter = 0.0;
    let mut union = 0.0;
    for (&x, &y) in a.values.iter().zip(&b.values) {
        inter += x.min(y);
        union += x.max(y);
    }
    if union <= 0.0 {
        // Both masks all-zero: identical by definition. Degenerate
        // predictions land here and are flagged by callers.
        return Ok(1.0);
    }
    Ok((inter / union).clamp(0.0, 1.0))
}

/// `1 - IoU` between a contour and its own polar reconstruction from
/// `start`, computed with the exact clipping oracle.
pub fn representation_error(
    contour: &Contour,
    start: Point2,
    angles: &AngleSet,
) -> Result<f64> {
    let distances = ray_contour_intersect(contour, start, angles)?;
    let params = PolarParams::new(start, distances)?;
    let poly = reconstruct_polygon(&params, angles)?;
    if poly.area() <= AREA_EPS {
        return Ok(1.0);
    }
    Ok(1.0 - exact_polygon_iou(&poly, &contour.to_polygon()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn square_poly(x0: f64, y0: f64, x1: f64, y1: f64) -> Polygon {
        Polygon::new(vec![
            Point2::new(x0, y0),
            Point2::new(x1, y0),
            Point2::new(x1, y1),
            Point2::new(x0, y1),
        ])
        .unwrap()
    }

    fn square_contour(x0: f64, y0: f64, x1: f64, y1: f64) -> Contour {
        Contour::new(square_poly(x0, y0, x1, y1).vertices).unwrap()
    }

    #[test]
    fn full_frame_square_is_all_ones() {
        let frame = Frame::from_bounds(Point2::new(0.0, 0.0), Point2::new(8.0, 8.0), 16, 16)
            .unwrap();
        let poly = square_poly(0.0, 0.0, 8.0, 8.0);
        for mode in [RasterMode::Supersample, RasterMode::Exact] {
            let m = rasterize_with_mode(&poly, 16, 16, &frame, mode).unwrap();
            assert!(m.values.iter().all(|&v| (v - 1.0).abs() < 1e-12), "{mode:?}");
        }
    }

    #[test]
    fn disjoint_polygon_is_all_zeros() {
        let frame = Frame::from_bounds(Point2::new(0.0, 0.0), Point2::new(8.0, 8.0), 16, 16)
            .unwrap();
        let poly = square_poly(100.0, 100.0, 108.0, 108.0);
        let m = rasterize(&poly, 16, 16, &frame).unwrap();
        assert!(m.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn left_half_square_splits_columns() {
        let frame = Frame::from_bounds(Point2::new(0.0, 0.0), Point2::new(32.0, 32.0), 32, 32)
            .unwrap();
        let poly = square_poly(0.0, 0.0, 16.0, 32.0);
        let m = rasterize(&poly, 32, 32, &frame).unwrap();
        for row in 0..32 {
            for col in 0..32 {
                let want = if col < 16 { 1.0 } else { 0.0 };
                assert_eq!(m.at(col, row), want, "cell ({col},{row})");
            }
        }
    }

    #[test]
    fn exact_mode_matches_analytic_half_cell() {
        // Square covering x in [0, 4.5] of a 9-wide frame: column 4 half covered.
        let frame = Frame::from_bounds(Point2::new(0.0, 0.0), Point2::new(9.0, 4.0), 9, 4)
            .unwrap();
        let poly = square_poly(0.0, 0.0, 4.5, 4.0);
        let m = rasterize_with_mode(&poly, 9, 4, &frame, RasterMode::Exact).unwrap();
        assert_abs_diff_eq!(m.at(3, 1), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m.at(4, 1), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(m.at(5, 1), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn invalid_frame_is_parameter_error() {
        let poly = square_poly(0.0, 0.0, 1.0, 1.0);
        let frame = Frame {
            origin: Point2::new(0.0, 0.0),
            scale_x: 0.0,
            scale_y: 1.0,
        };
        assert!(rasterize(&poly, 8, 8, &frame).is_err());
        assert!(Frame::new(Point2::new(0.0, 0.0), 0.0, 1.0).is_err());
    }

    #[test]
    fn soft_iou_identical_and_disjoint() {
        let frame = Frame::from_bounds(Point2::new(0.0, 0.0), Point2::new(8.0, 8.0), 16, 16)
            .unwrap();
        let a = rasterize(&square_poly(0.0, 0.0, 3.0, 8.0), 16, 16, &frame).unwrap();
        let b = rasterize(&square_poly(5.0, 0.0, 8.0, 8.0), 16, 16, &frame).unwrap();
        assert_abs_diff_eq!(soft_iou(&a, &a).unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(soft_iou(&a, &b).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn soft_iou_one_third_case() {
        let frame = Frame::from_bounds(Point2::new(0.0, 0.0), Point2::new(3.0, 3.0), 32, 32)
            .unwrap();
        let a = rasterize(&square_poly(0.0, 0.0, 2.0, 2.0), 32, 32, &frame).unwrap();
        let b = rasterize(&square_poly(1.0, 0.0, 3.0, 2.0), 32, 32, &frame).unwrap();
        let v = soft_iou(&a, &b).unwrap();
        assert!((v - 1.0 / 3.0).abs() <= 0.02, "soft IoU {v}");
    }

    #[test]
    fn soft_iou_mismatch_errors() {
        let f1 = Frame::from_bounds(Point2::new(0.0, 0.0), Point2::new(8.0, 8.0), 16, 16)
            .unwrap();
        let f2 = Frame::from_bounds(Point2::new(0.0, 0.0), Point2::new(9.0, 8.0), 16, 16)
            .unwrap();
        let sq = square_poly(0.0, 0.0, 4.0, 4.0);
        let a = rasterize(&sq, 16, 16, &f1).unwrap();
        let b = rasterize(&sq, 8, 8, &Frame::from_bounds(
            Point2::new(0.0, 0.0),
            Point2::new(8.0, 8.0),
            8,
            8,
        )
        .unwrap())
        .unwrap();
        assert!(soft_iou(&a, &b).is_err());
        let c = rasterize(&sq, 16, 16, &f2).unwrap();
        assert!(soft_iou(&a, &c).is_err());
    }

    #[test]
    fn all_zero_masks_compare_equal() {
        let frame = Frame::from_bounds(Point2::new(0.0, 0.0), Point2::new(8.0, 8.0), 8, 8)
            .unwrap();
        let far = square_poly(50.0, 50.0, 51.0, 51.0);
        let a = rasterize(&far, 8, 8, &frame).unwrap();
        assert_abs_diff_eq!(soft_iou(&a, &a).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn representation_error_square_center_half() {
        let c = square_contour(0.0, 0.0, 4.0, 4.0);
        let angles = AngleSet::uniform(4).unwrap();
        let e = representation_error(&c, Point2::new(2.0, 2.0), &angles).unwrap();
        assert_abs_diff_eq!(e, 0.5, epsilon = 1e-9);
    }

    #[test]
    fn representation_error_vanishes_with_many_rays() {
        let circle: Vec<Point2> = (0..1024)
            .map(|i| {
                let t = 2.0 * std::f64::consts::PI * i as f64 / 1024.0;
                Point2::new(10.0 + 3.0 * t.cos(), 10.0 + 3.0 * t.sin())
            })
            .collect();
        let c = Contour::new(circle).unwrap();
        let angles = AngleSet::uniform(256).unwrap();
        let e = representation_error(&c, Point2::new(10.0, 10.0), &angles).unwrap();
        assert!(e < 0.001, "error {e}");
    }

    #[test]
    fn representation_error_fixed_point_is_zero() {
        let angles = AngleSet::uniform(8).unwrap();
        let params =
            PolarParams::new(Point2::new(5.0, 5.0), vec![3.0, 2.0, 4.0, 2.5, 3.0, 2.0, 3.5, 2.2])
                .unwrap();
        let poly = reconstruct_polygon(&params, &angles).unwrap();
        let c = Contour::new(poly.vertices).unwrap();
        let e = representation_error(&c, Point2::new(5.0, 5.0), &angles).unwrap();
        assert!(e.abs() < 1e-9, "error {e}");
    }

    #[test]
    fn union_frame_covers_both_shapes() {
        let a = square_poly(0.0, 0.0, 2.0, 2.0);
        let b = square_poly(3.0, 1.0, 5.0, 6.0);
        let f = union_frame(&[&a.vertices, &b.vertices], 32, 32).unwrap();
        let lo = f.cell_to_pixel(0.0, 0.0);
        let hi = f.cell_to_pixel(32.0, 32.0);
        assert!(lo.x < 0.0 && lo.y < 0.0);
        assert!(hi.x > 5.0 && hi.y > 6.0);
        // 5% expansion per dimension.
        assert_abs_diff_eq!(hi.x - lo.x, 5.0 * 1.05, epsilon = 1e-9);
        assert_abs_diff_eq!(hi.y - lo.y, 6.0 * 1.05, epsilon = 1e-9);
    }

    #[test]
    fn pgm_dump_has_header_and_payload() {
        let frame = Frame::from_bounds(Point2::new(0.0, 0.0), Point2::new(4.0, 4.0), 4, 4)
            .unwrap();
        let m = rasterize(&square_poly(0.0, 0.0, 4.0, 4.0), 4, 4, &frame).unwrap();
        let mut buf = Vec::new();
        m.write_pgm(&mut buf).unwrap();
        assert!(buf.starts_with(b"P5\n4 4\n255\n"));
        assert_eq!(buf.len(), b"P5\n4 4\n255\n".len() + 16);
        assert_eq!(*buf.last().unwrap(), 255u8);
    }

    #[test]
    fn coverage_monotone_under_containment() {
        let frame = Frame::from_bounds(Point2::new(0.0, 0.0), Point2::new(10.0, 10.0), 32, 32)
            .unwrap();
        let inner = square_poly(2.3, 2.7, 6.1, 6.9);
        let outer = square_poly(1.9, 2.0, 8.0, 7.5);
        for mode in [RasterMode::Supersample, RasterMode::Exact] {
            let a = rasterize_with_mode(&inner, 32, 32, &frame, mode).unwrap();
            let b = rasterize_with_mode(&outer, 32, 32, &frame, mode).unwrap();
            for (x, y) in a.values.iter().zip(&b.values) {
                assert!(x <= &(y + 1e-9));
            }
        }
    }
}
