//! Polygon clipping primitives behind the exact IoU.
//!
//! Convex pairs are clipped directly (Sutherland-Hodgman). General simple
//! polygons go through a signed triangle-fan decomposition: the indicator of
//! a simple polygon equals the signed sum of its fan triangles' indicators,
//! so the intersection area of two polygons is the double sum of signed
//! pairwise triangle-triangle intersection areas. This avoids tracking
//! intersection topology entirely.

use super::{bounding_box, cross, signed_area, Point2};

/// True when the ring turns in one direction only (collinear runs allowed).
pub fn is_convex(vertices: &[Point2]) -> bool {
    let n = vertices.len();
    if n < 3 {
        return false;
    }
    let mut sign = 0.0f64;
    for i in 0..n {
        let c = cross(vertices[i], vertices[(i + 1) % n], vertices[(i + 2) % n]);
        if c.abs() <= 1e-12 {
            continue;
        }
        if sign == 0.0 {
            sign = c.signum();
        } else if c.signum() != sign {
            return false;
        }
    }
    true
}

/// Clip `subject` against a convex counter-clockwise `clip` ring
/// (Sutherland-Hodgman). The subject may be any polygon; the output ring's
/// signed area equals the area of the clipped region.
///
/// Points within a scale-relative epsilon of a clip line count as inside,
/// which keeps vertices lying exactly on the boundary (inscribed polygons)
/// from producing parallel-line 0/0 intersections.
pub fn convex_clip(subject: &[Point2], clip: &[Point2]) -> Vec<Point2> {
    let scale = subject
        .iter()
        .chain(clip)
        .fold(1.0f64, |m, p| m.max(p.x.abs()).max(p.y.abs()));
    let eps = 1e-12 * scale * scale;
    let mut output: Vec<Point2> = subject.to_vec();
    let m = clip.len();
    for i in 0..m {
        if output.is_empty() {
            break;
        }
        let a = clip[i];
        let b = clip[(i + 1) % m];
        let input = std::mem::take(&mut output);
        let n = input.len();
        for j in 0..n {
            let cur = input[j];
            let next = input[(j + 1) % n];
            let cur_in = cross(a, b, cur) >= -eps;
            let next_in = cross(a, b, next) >= -eps;
            if cur_in {
                output.push(cur);
                if !next_in {
                    output.push(line_intersection(a, b, cur, next));
                }
            } else if next_in {
                output.push(line_intersection(a, b, cur, next));
            }
        }
    }
    output
}

/// Intersection of the infinite line a-b with the segment line c-d. The
/// epsilon classification above keeps callers away from parallel cases; if
/// one slips through, the segment endpoint is the best available answer.
fn line_intersection(a: Point2, b: Point2, c: Point2, d: Point2) -> Point2 {
    let r = Point2::new(b.x - a.x, b.y - a.y);
    let s = Point2::new(d.x - c.x, d.y - c.y);
    let denom = r.x * s.y - r.y * s.x;
    if denom.abs() < 1e-300 {
        return c;
    }
    let t = ((c.x - a.x) * s.y - (c.y - a.y) * s.x) / denom;
    Point2::new(a.x + t * r.x, a.y + t * r.y)
}

fn orient_ccw(vertices: &[Point2]) -> Vec<Point2> {
    if signed_area(vertices) < 0.0 {
        vertices.iter().rev().copied().collect()
    } else {
        vertices.to_vec()
    }
}

/// Intersection area of two triangles given in CCW order.
fn tri_tri_intersection_area(t1: &[Point2; 3], t2: &[Point2; 3]) -> f64 {
    let clipped = convex_clip(t1, t2);
    if clipped.len() < 3 {
        return 0.0;
    }
    signed_area(&clipped).abs()
}

/// Signed fan triangles of a CCW ring: (v0, vi, vi+1) with the sign of each
/// triangle's own orientation.
fn signed_fan(vertices: &[Point2]) -> Vec<([Point2; 3], f64)> {
    let mut out = Vec::with_capacity(vertices.len().saturating_sub(2));
    let v0 = vertices[0];
    for w in vertices[1..].windows(2) {
        let t = [v0, w[0], w[1]];
        let a = signed_area(&t);
        if a.abs() <= 1e-15 {
            continue;
        }
        out.push((if a > 0.0 { t } else { [t[0], t[2], t[1]] }, a.signum()));
    }
    out
}

/// Area of the intersection of two simple polygons (any orientation).
pub fn intersection_area(a: &[Point2], b: &[Point2]) -> f64 {
    if a.len() < 3 || b.len() < 3 {
        return 0.0;
    }
    let (amin, amax) = bounding_box(a);
    let (bmin, bmax) = bounding_box(b);
    if amin.x > bmax.x || bmin.x > amax.x || amin.y > bmax.y || bmin.y > amax.y {
        return 0.0;
    }
    let a = orient_ccw(a);
    let b = orient_ccw(b);
    if is_convex(&a) && is_convex(&b) {
        let clipped = convex_clip(&a, &b);
        if clipped.len() < 3 {
            return 0.0;
        }
        return signed_area(&clipped).abs();
    }
    let fan_a = signed_fan(&a);
    let fan_b = signed_fan(&b);
    let boxes_b: Vec<(Point2, Point2)> = fan_b.iter().map(|(t, _)| bounding_box(t)).collect();
    let mut total = 0.0;
    for (ta, sa) in &fan_a {
        let (lo_a, hi_a) = bounding_box(ta);
        for ((tb, sb), (lo_b, hi_b)) in fan_b.iter().zip(&boxes_b) {
            if lo_a.x > hi_b.x || lo_b.x > hi_a.x || lo_a.y > hi_b.y || lo_b.y > hi_a.y {
                continue;
            }
            let inter = tri_tri_intersection_area(ta, tb);
            if inter > 0.0 {
                total += sa * sb * inter;
            }
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Vec<Point2> {
        vec![
            Point2::new(x0, y0),
            Point2::new(x1, y0),
            Point2::new(x1, y1),
            Point2::new(x0, y1),
        ]
    }

    #[test]
    fn convex_clip_overlapping_rects() {
        let a = rect(0.0, 0.0, 2.0, 2.0);
        let b = rect(1.0, 1.0, 3.0, 3.0);
        let c = convex_clip(&a, &b);
        assert_abs_diff_eq!(signed_area(&c).abs(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn intersection_area_convex_fast_path() {
        let a = rect(0.0, 0.0, 4.0, 4.0);
        let b = rect(2.0, 1.0, 6.0, 3.0);
        assert_abs_diff_eq!(intersection_area(&a, &b), 4.0, epsilon = 1e-12);
    }

    #[test]
    fn intersection_area_orientation_independent() {
        let a = rect(0.0, 0.0, 4.0, 4.0);
        let mut a_cw = a.clone();
        a_cw.reverse();
        let b = rect(2.0, 1.0, 6.0, 3.0);
        assert_abs_diff_eq!(
            intersection_area(&a, &b),
            intersection_area(&a_cw, &b),
            epsilon = 1e-12
        );
    }

    #[test]
    fn intersection_area_nonconvex_matches_decomposition() {
        // L-shape = 3x3 square minus the top-right 2x2 block.
        let l_shape = vec![
            Point2::new(0.0, 0.0),
            Point2::new(3.0, 0.0),
            Point2::new(3.0, 1.0),
            Point2::new(1.0, 1.0),
            Point2::new(1.0, 3.0),
            Point2::new(0.0, 3.0),
        ];
        // Rect covering the removed block only: intersection must be 0.
        let hole = rect(1.5, 1.5, 3.0, 3.0);
        assert_abs_diff_eq!(intersection_area(&l_shape, &hole), 0.0, epsilon = 1e-12);
        // Full bounding box: intersection = area of the L = 5.
        let bb = rect(0.0, 0.0, 3.0, 3.0);
        assert_abs_diff_eq!(intersection_area(&l_shape, &bb), 5.0, epsilon = 1e-12);
        // A rect straddling the notch corner. Inside the L:
        // [0.5,2]x[0.5,1] (0.75) plus [0.5,1]x[1,2] (0.5).
        let straddle = rect(0.5, 0.5, 2.0, 2.0);
        assert_abs_diff_eq!(intersection_area(&l_shape, &straddle), 1.25, epsilon = 1e-12);
    }

    #[test]
    fn is_convex_detects() {
        assert!(is_convex(&rect(0.0, 0.0, 1.0, 1.0)));
        let l_shape = vec![
            Point2::new(0.0, 0.0),
            Point2::new(3.0, 0.0),
            Point2::new(3.0, 1.0),
            Point2::new(1.0, 1.0),
            Point2::new(1.0, 3.0),
            Point2::new(0.0, 3.0),
        ];
        assert!(!is_convex(&l_shape));
    }
}
