//! Bipartite assignment between predictions and ground-truth instances:
//! cost matrix assembly, Hungarian one-to-one matching and the one-to-many
//! variant used by hybrid supervision.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{
    point_in_contour, ray_contour_intersect, AngleSet, Contour, Point2, BOUNDARY_TOL,
};
use crate::supervision::{dist_loss, focal_class_loss, rmask_loss, CostWeights, LayerPrediction};

/// Binary penalty for starting points outside the instance region.
/// Boundary points count as inside, so a start on the contour costs 0.
pub fn inner_cost(contour: &Contour, start: Point2) -> f64 {
    if point_in_contour(contour, start) {
        0.0
    } else {
        1.0
    }
}

/// An interior reference point for a contour: the centroid when it lies
/// strictly inside, otherwise the center of the deepest interior cell of a
/// bounding-box lattice (escalating resolution until one is found).
pub fn interior_pole(contour: &Contour) -> Result<Point2> {
    let centroid = contour.centroid();
    if contour.strictly_inside(centroid, BOUNDARY_TOL) {
        return Ok(centroid);
    }
    let (lo, hi) = contour.bounding_box();
    let mut n = 32usize;
    while n <= 256 {
        let mut best: Option<(f64, Point2)> = None;
        for row in 0..n {
            for col in 0..n {
                let p = Point2::new(
                    lo.x + (hi.x - lo.x) * (col as f64 + 0.5) / n as f64,
                    lo.y + (hi.y - lo.y) * (row as f64 + 0.5) / n as f64,
                );
                if contour.strictly_inside(p, BOUNDARY_TOL) {
                    let d = contour.distance_to_boundary(p);
                    if best.map_or(true, |(bd, _)| d > bd) {
                        best = Some((d, p));
                    }
                }
            }
        }
        if let Some((_, p)) = best {
            return Ok(p);
        }
        n *= 2;
    }
    Err(Error::Domain {
        reason: "no interior point found for contour",
        x: centroid.x,
        y: centroid.y,
    })
}

/// Per-pair matching costs with the per-term tensors retained for
/// diagnostics. Row-major over (prediction, gt).
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    pub rows: usize,
    pub cols: usize,
    pub total: Vec<f64>,
    pub class_term: Vec<f64>,
    pub dist_term: Vec<f64>,
    pub rmask_term: Vec<f64>,
    pub inner_term: Vec<f64>,
}

/// `lambda_class*C_class + lambda_dist*C_dist + lambda_rmask*C_rmask +
/// lambda_inner*C_inner`.
pub fn combine_cost(class: f64, dist: f64, rmask: f64, inner: f64, w: &CostWeights) -> f64 {
    w.class * class + w.dist * dist + w.rmask * rmask + w.inner * inner
}

impl CostMatrix {
    pub fn entry(&self, pred: usize, gt: usize) -> f64 {
        self.total[pred * self.cols + gt]
    }

    pub fn term_at(&self, terms: &[f64], pred: usize, gt: usize) -> f64 {
        terms[pred * self.cols + gt]
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0 || self.cols == 0
    }

    /// Build directly from per-term tensors (row-major).
    pub fn from_terms(
        rows: usize,
        cols: usize,
        class_term: Vec<f64>,
        dist_term: Vec<f64>,
        rmask_term: Vec<f64>,
        inner_term: Vec<f64>,
        weights: &CostWeights,
    ) -> Result<Self> {
        let n = rows * cols;
        for (name, t) in [
            ("class", &class_term),
            ("dist", &dist_term),
            ("rmask", &rmask_term),
            ("inner", &inner_term),
        ] {
            if t.len() != n {
                return Err(Error::Dimension {
                    context: "cost matrix term tensor",
                    expected: n,
                    actual: t.len(),
                });
            }
            if let Some(v) = t.iter().find(|v| !v.is_finite()) {
                return Err(Error::parameter(format!("non-finite {name} term {v}")));
            }
        }
        let total = (0..n)
            .map(|i| combine_cost(class_term[i], dist_term[i], rmask_term[i], inner_term[i], weights))
            .collect();
        Ok(CostMatrix {
            rows,
            cols,
            total,
            class_term,
            dist_term,
            rmask_term,
            inner_term,
        })
    }
}

/// Assemble the full matching-cost matrix between predictions and GT
/// instances.
///
/// Distance targets use the prediction's own start when it is strictly
/// inside the GT; otherwise targets fall back to the GT's interior pole and
/// the inner term carries the penalty. All entries stay finite.
pub fn build_cost_matrix(
    preds: &[LayerPrediction],
    gts: &[(Contour, usize)],
    weights: &CostWeights,
    angles: &AngleSet,
    rmask_resolution: usize,
) -> Result<CostMatrix> {
    if preds.is_empty() {
        return Err(Error::parameter("prediction set must be nonempty"));
    }
    let rows = preds.len();
    let cols = gts.len();
    if cols == 0 {
        return CostMatrix::from_terms(rows, 0, vec![], vec![], vec![], vec![], weights);
    }
    // Fallback targets per GT, computed once.
    let fallback_targets: Vec<Vec<f64>> = gts
        .iter()
        .map(|(c, _)| ray_contour_intersect(c, interior_pole(c)?, angles))
        .collect::<Result<_>>()?;

    let cells: Vec<(f64, f64, f64, f64)> = (0..rows * cols)
        .into_par_iter()
        .map(|idx| {
            let i = idx / cols;
            let j = idx % cols;
            let pred = &preds[i];
            let (contour, category) = &gts[j];
            let score = *pred.class_scores.get(*category).ok_or_else(|| {
                Error::parameter(format!(
                    "gt category {category} out of range ({} scores)",
                    pred.class_scores.len()
                ))
            })?;
            let class = focal_class_loss(score);
            let start = pred.params.start;
            let dist = if contour.strictly_inside(start, BOUNDARY_TOL) {
                let targets = ray_contour_intersect(contour, start, angles)?;
                dist_loss(&targets, &pred.params.distances)?
            } else {
                dist_loss(&fallback_targets[j], &pred.params.distances)?
            };
            let rmask = rmask_loss(contour, &pred.params, angles, rmask_resolution)?;
            let inner = inner_cost(contour, start);
            Ok((class, dist, rmask, inner))
        })
        .collect::<Result<_>>()?;

    let mut class_term = Vec::with_capacity(rows * cols);
    let mut dist_term = Vec::with_capacity(rows * cols);
    let mut rmask_term = Vec::with_capacity(rows * cols);
    let mut inner_term = Vec::with_capacity(rows * cols);
    for (c, d, r, n) in cells {
        class_term.push(c);
        dist_term.push(d);
        rmask_term.push(r);
        inner_term.push(n);
    }
    CostMatrix::from_terms(rows, cols, class_term, dist_term, rmask_term, inner_term, weights)
}

/// A one-to-one assignment; predictions absent from `pairs` are unmatched.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    /// (prediction index, gt index), sorted by prediction index.
    pub pairs: Vec<(usize, usize)>,
}

impl Assignment {
    pub fn total_cost(&self, matrix: &CostMatrix) -> f64 {
        self.pairs.iter().map(|&(i, j)| matrix.entry(i, j)).sum()
    }
}

/// Minimum-cost one-to-one assignment (Kuhn-Munkres with potentials).
/// Matches `min(rows, cols)` pairs. Rows are processed in prediction order
/// and equal-cost columns resolve to the smallest index, so the result is
/// deterministic.
pub fn hungarian(matrix: &CostMatrix) -> Assignment {
    if matrix.is_empty() {
        return Assignment { pairs: vec![] };
    }
    let (rows, cols) = (matrix.rows, matrix.cols);
    let mut pairs = if rows <= cols {
        solve_rows_le_cols(rows, cols, |i, j| matrix.entry(i, j))
            .into_iter()
            .enumerate()
            .map(|(i, j)| (i, j))
            .collect::<Vec<_>>()
    } else {
        solve_rows_le_cols(cols, rows, |j, i| matrix.entry(i, j))
            .into_iter()
            .enumerate()
            .map(|(j, i)| (i, j))
            .collect::<Vec<_>>()
    };
    pairs.sort_unstable();
    Assignment { pairs }
}

/// Potentials-based assignment for an n x m cost matrix with n <= m.
/// Returns the assigned column per row.
fn solve_rows_le_cols<F: Fn(usize, usize) -> f64>(n: usize, m: usize, cost: F) -> Vec<usize> {
    const UNSET: usize = usize::MAX;
    let mut u = vec![0.0f64; n];
    let mut v = vec![0.0f64; m + 1];
    // col_row[j] = row currently assigned to column j (1-based columns;
    // column 0 is the virtual source).
    let mut col_row = vec![UNSET; m + 1];
    let mut way = vec![0usize; m + 1];
    for row in 0..n {
        col_row[0] = row;
        let mut j0 = 0usize;
        let mut min_v = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = col_row[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let reduced = cost(i0, j - 1) - u[i0] - v[j];
                if reduced < min_v[j] {
                    min_v[j] = reduced;
                    way[j] = j0;
                }
                if min_v[j] < delta {
                    delta = min_v[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    if col_row[j] != UNSET {
                        u[col_row[j]] += delta;
                    }
                    v[j] -= delta;
                } else {
                    min_v[j] -= delta;
                }
            }
            j0 = j1;
            if col_row[j0] == UNSET {
                break;
            }
        }
        // Unwind the augmenting path.
        while j0 != 0 {
            let j1 = way[j0];
            col_row[j0] = col_row[j1];
            j0 = j1;
        }
    }
    let mut row_col = vec![UNSET; n];
    for j in 1..=m {
        if col_row[j] != UNSET {
            row_col[col_row[j]] = j - 1;
        }
    }
    row_col
}

/// Per GT, the up-to-`m` lowest-cost predictions with cost <= `tau`. A
/// prediction may serve several GTs when it clears the threshold for each.
/// Pairs are ordered by (gt, cost rank).
pub fn one_to_many_assign(matrix: &CostMatrix, m: usize, tau: f64) -> Result<Vec<(usize, usize)>> {
    if m < 1 {
        return Err(Error::parameter("one-to-many m must be >= 1"));
    }
    let mut pairs = Vec::new();
    for j in 0..matrix.cols {
        let mut candidates: Vec<(f64, usize)> = (0..matrix.rows)
            .map(|i| (matrix.entry(i, j), i))
            .filter(|(c, _)| *c <= tau)
            .collect();
        candidates.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        for (_, i) in candidates.into_iter().take(m) {
            pairs.push((i, j));
        }
    }
    Ok(pairs)
}

/// Assignment dump: one CSV row per matched pair with the per-term costs.
pub fn write_assignment_csv<W: std::io::Write>(
    image_id: u64,
    matrix: &CostMatrix,
    assignment: &Assignment,
    w: &mut W,
) -> Result<()> {
    writeln!(w, "image_id,pred_idx,gt_idx,c_class,c_dist,c_rmask,c_inner,total")?;
    for &(i, j) in &assignment.pairs {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            image_id,
            i,
            j,
            matrix.term_at(&matrix.class_term, i, j),
            matrix.term_at(&matrix.dist_term, i, j),
            matrix.term_at(&matrix.rmask_term, i, j),
            matrix.term_at(&matrix.inner_term, i, j),
            matrix.entry(i, j)
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{reconstruct_polygon, PolarParams};
    use approx::assert_abs_diff_eq;

    fn square(x0: f64, y0: f64, x1: f64, y1: f64) -> Contour {
        Contour::from_flat(&[x0, y0, x1, y0, x1, y1, x0, y1]).unwrap()
    }

    fn matrix_from(rows: usize, cols: usize, total: Vec<f64>) -> CostMatrix {
        let n = rows * cols;
        CostMatrix::from_terms(
            rows,
            cols,
            total.clone(),
            vec![0.0; n],
            vec![0.0; n],
            vec![0.0; n],
            &CostWeights::new(1.0, 0.0, 0.0, 0.0).unwrap(),
        )
        .unwrap()
    }

    /// Exhaustive assignment oracle: every element of the smaller side must
    /// take a distinct element of the larger side.
    fn brute_force_min(matrix: &CostMatrix) -> f64 {
        let transpose = matrix.rows > matrix.cols;
        let (small, large) = if transpose {
            (matrix.cols, matrix.rows)
        } else {
            (matrix.rows, matrix.cols)
        };
        let cost = |s: usize, l: usize| {
            if transpose {
                matrix.entry(l, s)
            } else {
                matrix.entry(s, l)
            }
        };
        fn recurse(
            small: usize,
            large: usize,
            row: usize,
            used: &mut [bool],
            acc: f64,
            best: &mut f64,
            cost: &dyn Fn(usize, usize) -> f64,
        ) {
            if row == small {
                *best = best.min(acc);
                return;
            }
            for j in 0..large {
                if !used[j] {
                    used[j] = true;
                    recurse(small, large, row + 1, used, acc + cost(row, j), best, cost);
                    used[j] = false;
                }
            }
        }
        let mut best = f64::INFINITY;
        recurse(small, large, 0, &mut vec![false; large], 0.0, &mut best, &cost);
        best
    }

    #[test]
    fn inner_cost_examples() {
        let c = square(0.0, 0.0, 4.0, 4.0);
        assert_eq!(inner_cost(&c, Point2::new(2.0, 2.0)), 0.0);
        assert_eq!(inner_cost(&c, Point2::new(9.0, 2.0)), 1.0);
        assert_eq!(inner_cost(&c, Point2::new(4.0, 2.0)), 0.0);
    }

    #[test]
    fn interior_pole_simple_and_crescent() {
        let c = square(0.0, 0.0, 4.0, 4.0);
        let p = interior_pole(&c).unwrap();
        assert!(c.strictly_inside(p, 1e-9));

        // Horseshoe whose centroid falls in the notch.
        let h = Contour::from_flat(&[
            0.0, 0.0, 7.0, 0.0, 7.0, 7.0, 6.0, 7.0, 6.0, 1.0, 1.0, 1.0, 1.0, 7.0, 0.0, 7.0,
        ])
        .unwrap();
        let p = interior_pole(&h).unwrap();
        assert!(h.strictly_inside(p, 1e-9));
    }

    #[test]
    fn hungarian_2x2_and_single() {
        let m = matrix_from(2, 2, vec![1.0, 2.0, 2.0, 1.0]);
        let a = hungarian(&m);
        assert_eq!(a.pairs, vec![(0, 0), (1, 1)]);
        assert_abs_diff_eq!(a.total_cost(&m), 2.0);

        let single = matrix_from(1, 1, vec![5.0]);
        assert_eq!(hungarian(&single).pairs, vec![(0, 0)]);
    }

    #[test]
    fn hungarian_rectangular_both_ways() {
        // 2 preds x 3 gts: best total = 1 + 2 = 3 via (0,2),(1,0).
        let m = matrix_from(2, 3, vec![9.0, 9.0, 1.0, 2.0, 9.0, 9.0]);
        let a = hungarian(&m);
        assert_eq!(a.pairs.len(), 2);
        assert_abs_diff_eq!(a.total_cost(&m), 3.0);

        // 3 preds x 2 gts: one prediction stays unmatched.
        let m = matrix_from(3, 2, vec![8.0, 1.0, 1.0, 8.0, 5.0, 5.0]);
        let a = hungarian(&m);
        assert_eq!(a.pairs.len(), 2);
        assert_abs_diff_eq!(a.total_cost(&m), 2.0);
    }

    #[test]
    fn hungarian_matches_brute_force_on_random_matrices() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..40 {
            let rows = rng.gen_range(1..=6);
            let cols = rng.gen_range(1..=6);
            let total: Vec<f64> = (0..rows * cols)
                .map(|_| rng.gen_range(0.0..10.0f64))
                .collect();
            let m = matrix_from(rows, cols, total);
            let a = hungarian(&m);
            assert_eq!(a.pairs.len(), rows.min(cols));
            let best = brute_force_min(&m);
            assert!((a.total_cost(&m) - best).abs() < 1e-9, "{a:?} vs {best}");
        }
    }

    #[test]
    fn hungarian_invariant_under_constant_shift() {
        let m = matrix_from(3, 3, vec![4.0, 1.0, 3.0, 2.0, 0.0, 5.0, 3.0, 2.0, 2.0]);
        let shifted = matrix_from(3, 3, m.total.iter().map(|v| v + 10.0).collect());
        let a = hungarian(&m);
        let b = hungarian(&shifted);
        assert_eq!(a.pairs, b.pairs);
        assert_abs_diff_eq!(b.total_cost(&shifted), a.total_cost(&m) + 30.0, epsilon = 1e-9);
    }

    #[test]
    fn one_to_many_examples() {
        let m = matrix_from(4, 1, vec![0.1, 0.2, 0.9, 1.5]);
        let pairs = one_to_many_assign(&m, 2, 1.0).unwrap();
        assert_eq!(pairs, vec![(0, 0), (1, 0)]);

        // tau below all costs -> empty.
        assert!(one_to_many_assign(&m, 2, 0.05).unwrap().is_empty());

        // m=1, tau=inf -> per-GT argmin, duplicates allowed across GTs.
        let m2 = matrix_from(2, 2, vec![0.1, 0.2, 0.5, 0.9]);
        let pairs = one_to_many_assign(&m2, 1, f64::INFINITY).unwrap();
        assert_eq!(pairs, vec![(0, 0), (0, 1)]);

        assert!(one_to_many_assign(&m, 0, 1.0).is_err());
    }

    #[test]
    fn perfect_prediction_has_zero_entry() {
        // GT that is its own K=4 reconstruction, prediction identical.
        let angles = AngleSet::uniform(4).unwrap();
        let start = Point2::new(2.0, 2.0);
        let params = PolarParams::new(start, vec![1.5, 1.0, 1.2, 0.8]).unwrap();
        let gt = Contour::new(reconstruct_polygon(&params, &angles).unwrap().vertices).unwrap();
        let pred = LayerPrediction::new(1, params, vec![1.0]).unwrap();
        let m = build_cost_matrix(&[pred], &[(gt, 0)], &CostWeights::default(), &angles, 32)
            .unwrap();
        assert_abs_diff_eq!(m.entry(0, 0), 0.0, epsilon = 1e-9);
    }

    #[test]
    fn outside_start_adds_exactly_lambda_inner() {
        // With the rmask weight zeroed and both candidates matching their own
        // targets exactly, the only difference is the inner term.
        let angles = AngleSet::uniform(8).unwrap();
        let gt = square(0.0, 0.0, 6.0, 6.0);
        let weights = CostWeights::new(2.0, 5.0, 0.0, 5.0).unwrap();

        let s_in = Point2::new(2.0, 3.0);
        let d_in = ray_contour_intersect(&gt, s_in, &angles).unwrap();
        let inside = LayerPrediction::new(
            1,
            PolarParams::new(s_in, d_in).unwrap(),
            vec![1.0],
        )
        .unwrap();

        let s_out = Point2::new(20.0, 3.0);
        let pole = interior_pole(&gt).unwrap();
        let d_out = ray_contour_intersect(&gt, pole, &angles).unwrap();
        let outside = LayerPrediction::new(
            1,
            PolarParams::new(s_out, d_out).unwrap(),
            vec![1.0],
        )
        .unwrap();

        let m = build_cost_matrix(
            &[inside, outside],
            &[(gt, 0)],
            &weights,
            &angles,
            32,
        )
        .unwrap();
        assert_abs_diff_eq!(m.entry(1, 0) - m.entry(0, 0), 5.0, epsilon = 1e-9);
        assert_eq!(m.term_at(&m.inner_term, 0, 0), 0.0);
        assert_eq!(m.term_at(&m.inner_term, 1, 0), 1.0);
    }

    #[test]
    fn entries_are_the_weighted_term_combination() {
        let class = vec![0.1, 0.2, 0.3, 0.4];
        let dist = vec![1.0, 0.5, 0.25, 0.0];
        let rmask = vec![0.9, 0.8, 0.7, 0.6];
        let inner = vec![0.0, 1.0, 1.0, 0.0];
        let w = CostWeights::default();
        let m = CostMatrix::from_terms(2, 2, class.clone(), dist.clone(), rmask.clone(), inner.clone(), &w)
            .unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let idx = i * 2 + j;
                assert_abs_diff_eq!(
                    m.entry(i, j),
                    2.0 * class[idx] + 5.0 * dist[idx] + 2.0 * rmask[idx] + 5.0 * inner[idx],
                    epsilon = 1e-12
                );
            }
        }
    }

    #[test]
    fn weight_scaling_preserves_selections() {
        let angles = AngleSet::uniform(8).unwrap();
        let gt1 = square(0.0, 0.0, 6.0, 6.0);
        let gt2 = square(10.0, 0.0, 18.0, 8.0);
        let mk = |x: f64, y: f64, d: f64| {
            LayerPrediction::new(
                1,
                PolarParams::new(Point2::new(x, y), vec![d; 8]).unwrap(),
                vec![0.7],
            )
            .unwrap()
        };
        let preds = vec![mk(3.0, 3.0, 2.0), mk(14.0, 4.0, 3.0), mk(5.0, 5.0, 1.0)];
        let gts = vec![(gt1, 0), (gt2, 0)];
        let w = CostWeights::default();
        let m1 = build_cost_matrix(&preds, &gts, &w, &angles, 32).unwrap();
        let m2 = build_cost_matrix(&preds, &gts, &w.scaled(3.0), &angles, 32).unwrap();
        assert_eq!(hungarian(&m1).pairs, hungarian(&m2).pairs);
        let tau1 = 5.0;
        assert_eq!(
            one_to_many_assign(&m1, 2, tau1).unwrap(),
            one_to_many_assign(&m2, 2, tau1 * 3.0).unwrap()
        );
    }

    #[test]
    fn empty_gt_set_yields_empty_matrix() {
        let angles = AngleSet::uniform(4).unwrap();
        let pred = LayerPrediction::new(
            1,
            PolarParams::new(Point2::new(0.0, 0.0), vec![1.0; 4]).unwrap(),
            vec![0.5],
        )
        .unwrap();
        let m = build_cost_matrix(&[pred], &[], &CostWeights::default(), &angles, 32).unwrap();
        assert!(m.is_empty());
        assert!(hungarian(&m).pairs.is_empty());
    }

    #[test]
    fn assignment_csv_lists_terms() {
        let m = matrix_from(1, 1, vec![2.5]);
        let a = hungarian(&m);
        let mut buf = Vec::new();
        write_assignment_csv(3, &m, &a, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("image_id,pred_idx,gt_idx,"));
        assert!(text.lines().nth(1).unwrap().starts_with("3,0,0,"));
    }
}
