//! Annotation and detection ingestion plus COCO-style mask AP evaluation.

mod coco;
mod eval;

pub use coco::{
    load_annotations, load_detections, parse_annotations_str, parse_detections_str,
    DetectionGeometry, InstanceAnnotation, LoadSummary, LoadedAnnotations, PolygonDetection,
};
pub use eval::{
    coco_iou_thresholds, evaluate, evaluate_subset, evaluate_with_opts, report_csv, EvalCounts,
    EvalReport, DEFAULT_MAX_DETECTIONS,
};

/// The payloads of the `n` highest-scoring candidates. Ties keep input
/// order (stable).
pub fn topn_by_score<T>(candidates: Vec<(f64, T)>, n: usize) -> Vec<T> {
    let mut indexed: Vec<(usize, f64, T)> = candidates
        .into_iter()
        .enumerate()
        .map(|(i, (s, p))| (i, s, p))
        .collect();
    indexed.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    indexed.into_iter().take(n).map(|(_, _, p)| p).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn topn_picks_highest_scores() {
        let out = topn_by_score(vec![(0.9, "a"), (0.1, "b"), (0.5, "c")], 2);
        assert_eq!(out, vec!["a", "c"]);
    }

    #[test]
    fn topn_zero_and_overflow() {
        let out: Vec<&str> = topn_by_score(vec![(0.9, "a")], 0);
        assert!(out.is_empty());
        let out = topn_by_score(vec![(0.2, "a"), (0.7, "b")], 10);
        assert_eq!(out, vec!["b", "a"]);
    }

    #[test]
    fn topn_ties_keep_input_order() {
        let out = topn_by_score(vec![(0.5, "first"), (0.5, "second"), (0.5, "third")], 2);
        assert_eq!(out, vec!["first", "second"]);
    }
}
