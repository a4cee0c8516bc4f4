//! Criterion benchmarks for the hot paths: ray-contour intersection, exact
//! IoU, rasterization, Hungarian matching and approximability search.

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};

use polardet_core::approx_score::approximability_score;
use polardet_core::geometry::{
    exact_polygon_iou, ray_contour_intersect, reconstruct_polygon, AngleSet, Point2, PolarParams,
};
use polardet_core::matching::{hungarian, CostMatrix};
use polardet_core::raster::{rasterize, soft_iou, union_frame};
use polardet_core::supervision::CostWeights;
use polardet_core::synthetic::{
    random_convex_contour, random_interior_point, random_simple_contour, seeded_rng, u_shape,
};

fn bench_ray_intersect(c: &mut Criterion) {
    let mut rng = seeded_rng(1);
    let bounds = (Point2::new(-2.0, -2.0), Point2::new(2.0, 2.0));
    let contour = random_simple_contour(&mut rng, bounds, (1.0, 3.0));
    let start = random_interior_point(&mut rng, &contour, 0.1);
    let angles = AngleSet::uniform(32).unwrap();
    c.bench_function("ray_contour_intersect_k32", |b| {
        b.iter(|| ray_contour_intersect(&contour, start, &angles).unwrap())
    });
}

fn bench_exact_iou(c: &mut Criterion) {
    let mut rng = seeded_rng(2);
    let bounds = (Point2::new(-2.0, -2.0), Point2::new(2.0, 2.0));
    let a = random_convex_contour(&mut rng, bounds, (1.0, 3.0)).to_polygon();
    let b_poly = random_convex_contour(&mut rng, bounds, (1.0, 3.0)).to_polygon();
    c.bench_function("exact_iou_convex_pair", |bch| {
        bch.iter(|| exact_polygon_iou(&a, &b_poly))
    });

    let u = u_shape().to_polygon();
    let angles = AngleSet::uniform(32).unwrap();
    let params = PolarParams::new(Point2::new(0.5, 0.5), vec![2.0; 32]).unwrap();
    let star = reconstruct_polygon(&params, &angles).unwrap();
    c.bench_function("exact_iou_nonconvex_pair", |bch| {
        bch.iter(|| exact_polygon_iou(&u, &star))
    });
}

fn bench_rasterize(c: &mut Criterion) {
    let mut rng = seeded_rng(3);
    let bounds = (Point2::new(-2.0, -2.0), Point2::new(2.0, 2.0));
    let a = random_convex_contour(&mut rng, bounds, (1.0, 3.0)).to_polygon();
    let b_poly = random_convex_contour(&mut rng, bounds, (1.0, 3.0)).to_polygon();
    for res in [32usize, 128] {
        let frame =
            union_frame(&[a.vertices.as_slice(), b_poly.vertices.as_slice()], res, res).unwrap();
        c.bench_function(&format!("rasterize_pair_soft_iou_{res}"), |bch| {
            bch.iter(|| {
                let ra = rasterize(&a, res, res, &frame).unwrap();
                let rb = rasterize(&b_poly, res, res, &frame).unwrap();
                soft_iou(&ra, &rb).unwrap()
            })
        });
    }
}

fn bench_hungarian(c: &mut Criterion) {
    use rand::Rng;
    let mut rng = seeded_rng(4);
    let n = 50;
    let total: Vec<f64> = (0..n * n).map(|_| rng.gen_range(0.0..10.0)).collect();
    let zeros = vec![0.0; n * n];
    let m = CostMatrix::from_terms(
        n,
        n,
        total,
        zeros.clone(),
        zeros.clone(),
        zeros,
        &CostWeights::new(1.0, 0.0, 0.0, 0.0).unwrap(),
    )
    .unwrap();
    c.bench_function("hungarian_50x50", |b| {
        b.iter_batched(|| m.clone(), |m| hungarian(&m), BatchSize::SmallInput)
    });
}

fn bench_approximability(c: &mut Criterion) {
    let contour = u_shape();
    let angles = AngleSet::uniform(32).unwrap();
    c.bench_function("approximability_u_shape_grid16", |b| {
        b.iter(|| approximability_score(&contour, &angles, 16).unwrap())
    });
}

criterion_group!(
    benches,
    bench_ray_intersect,
    bench_exact_iou,
    bench_rasterize,
    bench_hungarian,
    bench_approximability
);
criterion_main!(benches);
