//! Seeded synthetic shape generators for self-checks, property suites and
//! benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::geometry::{cross, AngleSet, Contour, Point2, Polygon, PolarParams};
use crate::matching::interior_pole;

/// Deterministic generator for a seed.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Axis-aligned square contour centered at (cx, cy).
pub fn square_contour(cx: f64, cy: f64, half: f64) -> Contour {
    Contour::from_flat(&[
        cx - half,
        cy - half,
        cx + half,
        cy - half,
        cx + half,
        cy + half,
        cx - half,
        cy + half,
    ])
    .expect("square is a valid contour")
}

/// Regular n-gon approximation of a circle.
pub fn circle_contour(center: Point2, radius: f64, n: usize) -> Contour {
    Contour::new(
        (0..n)
            .map(|i| {
                let t = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
                Point2::new(center.x + radius * t.cos(), center.y + radius * t.sin())
            })
            .collect(),
    )
    .expect("circle polygon is a valid contour")
}

/// The concave two-prong test shape.
pub fn u_shape() -> Contour {
    Contour::from_flat(&[
        0.0, 0.0, 5.0, 0.0, 5.0, 5.0, 4.0, 5.0, 4.0, 1.0, 1.0, 1.0, 1.0, 5.0, 0.0, 5.0,
    ])
    .expect("u-shape is a valid contour")
}

/// Regular K-gon matching a polar reconstruction from its centroid.
pub fn regular_kgon(center: Point2, radius: f64, k: usize, phase: f64) -> Result<Contour> {
    let angles = AngleSet::with_phase(k, phase)?;
    let params = PolarParams::new(center, vec![radius; k])?;
    let poly = crate::geometry::reconstruct_polygon(&params, &angles)?;
    Contour::new(poly.vertices)
}

/// Andrew monotone chain; returns the hull counter-clockwise.
fn convex_hull(mut points: Vec<Point2>) -> Vec<Point2> {
    points.sort_by(|a, b| a.x.partial_cmp(&b.x).unwrap().then(a.y.partial_cmp(&b.y).unwrap()));
    points.dedup_by(|a, b| a.dist(*b) < 1e-12);
    if points.len() < 3 {
        return points;
    }
    let mut lower: Vec<Point2> = Vec::new();
    for &p in &points {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<Point2> = Vec::new();
    for &p in points.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

/// Random convex contour: the hull of points scattered in a disc of random
/// radius, at a random center inside `center_box`.
pub fn random_convex_contour(
    rng: &mut ChaCha8Rng,
    center_box: (Point2, Point2),
    radius_range: (f64, f64),
) -> Contour {
    loop {
        let cx = rng.gen_range(center_box.0.x..=center_box.1.x);
        let cy = rng.gen_range(center_box.0.y..=center_box.1.y);
        let r = rng.gen_range(radius_range.0..=radius_range.1);
        let n = rng.gen_range(8..=20);
        let pts: Vec<Point2> = (0..n)
            .map(|_| {
                let theta = rng.gen_range(0.0..2.0 * std::f64::consts::PI);
                let rho = r * rng.gen_range(0.4f64..=1.0).sqrt();
                Point2::new(cx + rho * theta.cos(), cy + rho * theta.sin())
            })
            .collect();
        let hull = convex_hull(pts);
        if hull.len() >= 3 {
            if let Ok(c) = Contour::new(hull) {
                return c;
            }
        }
    }
}

/// Random simple (star-shaped, generally non-convex) contour: sorted angles
/// with a minimum gap and radii varying in `[0.25 r, r]` around a random
/// center.
pub fn random_simple_contour(
    rng: &mut ChaCha8Rng,
    center_box: (Point2, Point2),
    radius_range: (f64, f64),
) -> Contour {
    loop {
        let cx = rng.gen_range(center_box.0.x..=center_box.1.x);
        let cy = rng.gen_range(center_box.0.y..=center_box.1.y);
        let r = rng.gen_range(radius_range.0..=radius_range.1);
        let n = rng.gen_range(6..=16);
        let mut thetas: Vec<f64> = (0..n)
            .map(|_| rng.gen_range(0.0..2.0 * std::f64::consts::PI))
            .collect();
        thetas.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let min_gap = 0.05 * 2.0 * std::f64::consts::PI / n as f64;
        let ok_gaps = thetas
            .windows(2)
            .all(|w| w[1] - w[0] > min_gap)
            && (2.0 * std::f64::consts::PI - (thetas[n - 1] - thetas[0])) > min_gap;
        if !ok_gaps {
            continue;
        }
        let verts: Vec<Point2> = thetas
            .iter()
            .map(|&t| {
                let rho = rng.gen_range(0.25 * r..=r);
                Point2::new(cx + rho * t.cos(), cy + rho * t.sin())
            })
            .collect();
        if let Ok(c) = Contour::new(verts) {
            return c;
        }
    }
}

/// A strictly-interior point with clearance at least `margin_fraction` of
/// the contour diameter, by rejection sampling over the bounding box.
pub fn random_interior_point(
    rng: &mut ChaCha8Rng,
    contour: &Contour,
    margin_fraction: f64,
) -> Point2 {
    let (lo, hi) = contour.bounding_box();
    let margin = margin_fraction * contour.diameter();
    for _ in 0..20_000 {
        let p = Point2::new(rng.gen_range(lo.x..=hi.x), rng.gen_range(lo.y..=hi.y));
        if contour.strictly_inside(p, margin) {
            return p;
        }
    }
    interior_pole(contour).expect("valid contour has an interior point")
}

/// Random polar parameters with start inside the contour and noisy versions
/// of its own targets as distances.
pub fn noisy_prediction(
    rng: &mut ChaCha8Rng,
    contour: &Contour,
    angles: &AngleSet,
    noise: f64,
) -> Result<(Point2, PolarParams)> {
    let start = random_interior_point(rng, contour, 0.02);
    let targets = crate::geometry::ray_contour_intersect(contour, start, angles)?;
    let distances: Vec<f64> = targets
        .iter()
        .map(|d| (d * (1.0 + rng.gen_range(-noise..=noise))).max(0.0))
        .collect();
    Ok((start, PolarParams::new(start, distances)?))
}

/// A random convex polygon pair with overlapping extents, for IoU sweeps.
pub fn random_convex_pair(rng: &mut ChaCha8Rng) -> (Polygon, Polygon) {
    let a = random_convex_contour(
        rng,
        (Point2::new(-2.0, -2.0), Point2::new(2.0, 2.0)),
        (2.0, 5.0),
    );
    let b = random_convex_contour(
        rng,
        (Point2::new(-2.0, -2.0), Point2::new(2.0, 2.0)),
        (2.0, 5.0),
    );
    (a.to_polygon(), b.to_polygon())
}
