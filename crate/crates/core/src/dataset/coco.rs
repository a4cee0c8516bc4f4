//! COCO-style polygon annotation and detection JSON ingestion.
//!
//! Only polygon-format segmentations are supported; RLE-encoded and crowd
//! instances are skipped with counted warnings.

use std::collections::BTreeSet;
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::geometry::{
    bounding_box, reconstruct_polygon, AngleSet, Contour, Point2, Polygon, PolarParams,
};

#[derive(Debug, Deserialize)]
struct CocoFile {
    #[serde(default)]
    images: Vec<CocoImage>,
    #[serde(default)]
    annotations: Vec<CocoAnnotation>,
    #[serde(default)]
    categories: Vec<CocoCategory>,
}

#[derive(Debug, Deserialize)]
struct CocoImage {
    id: u64,
}

#[derive(Debug, Deserialize)]
struct CocoCategory {
    id: u32,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum Segmentation {
    Polygons(Vec<Vec<f64>>),
    /// RLE object (or anything else non-polygon); skipped with a count.
    Rle(serde::de::IgnoredAny),
}

#[derive(Debug, Deserialize)]
struct CocoAnnotation {
    id: u64,
    image_id: u64,
    category_id: u32,
    #[serde(default)]
    iscrowd: i64,
    segmentation: Option<Segmentation>,
    #[serde(default)]
    bbox: Option<[f64; 4]>,
}

/// One parsed ground-truth instance. Multi-ring segmentations keep all
/// valid rings and set the fragmentation flag.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceAnnotation {
    pub id: u64,
    pub image_id: u64,
    pub category_id: u32,
    pub contours: Vec<Contour>,
    pub iscrowd: bool,
    /// `[x, y, w, h]`; derived from the rings when absent in the file.
    pub bbox: [f64; 4],
    pub fragmented: bool,
}

/// Skip counters accumulated during ingestion.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize)]
pub struct LoadSummary {
    pub total_annotations: usize,
    pub kept: usize,
    pub skipped_rle: usize,
    pub skipped_crowd: usize,
    /// Rings with fewer than 3 points or failing contour validation.
    pub dropped_rings: usize,
    /// Instances whose rings were all dropped.
    pub skipped_empty: usize,
}

#[derive(Debug, Clone)]
pub struct LoadedAnnotations {
    pub instances: Vec<InstanceAnnotation>,
    /// Category ids present in the file's category table (sorted), or the
    /// ids observed on instances when the table is absent.
    pub categories: Vec<u32>,
    pub image_ids: Vec<u64>,
    pub summary: LoadSummary,
}

fn byte_offset(text: &str, line: usize, column: usize) -> usize {
    // serde_json reports 1-based line/column.
    let mut offset = 0usize;
    for (i, l) in text.lines().enumerate() {
        if i + 1 == line {
            return offset + column.saturating_sub(1);
        }
        offset += l.len() + 1;
    }
    offset
}

fn parse_json<'a, T: Deserialize<'a>>(text: &'a str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::Parse {
        offset: byte_offset(text, e.line(), e.column()),
        message: e.to_string(),
    })
}

/// Parse annotation JSON from a string. See [`load_annotations`].
pub fn parse_annotations_str(text: &str) -> Result<LoadedAnnotations> {
    let file: CocoFile = parse_json(text)?;
    let mut summary = LoadSummary {
        total_annotations: file.annotations.len(),
        ..LoadSummary::default()
    };
    let mut instances = Vec::new();
    for ann in file.annotations {
        if ann.iscrowd != 0 {
            summary.skipped_crowd += 1;
            continue;
        }
        let rings = match ann.segmentation {
            Some(Segmentation::Polygons(rings)) => rings,
            Some(Segmentation::Rle(_)) => {
                summary.skipped_rle += 1;
                continue;
            }
            None => {
                summary.skipped_empty += 1;
                continue;
            }
        };
        let mut contours = Vec::new();
        for ring in rings {
            if ring.len() < 6 {
                summary.dropped_rings += 1;
                continue;
            }
            match Contour::from_flat(&ring) {
                Ok(c) => contours.push(c),
                Err(_) => summary.dropped_rings += 1,
            }
        }
        if contours.is_empty() {
            summary.skipped_empty += 1;
            continue;
        }
        let bbox = ann.bbox.unwrap_or_else(|| {
            let all: Vec<Point2> = contours
                .iter()
                .flat_map(|c| c.vertices().iter().copied())
                .collect();
            let (lo, hi) = bounding_box(&all);
            [lo.x, lo.y, hi.x - lo.x, hi.y - lo.y]
        });
        summary.kept += 1;
        instances.push(InstanceAnnotation {
            id: ann.id,
            image_id: ann.image_id,
            category_id: ann.category_id,
            fragmented: contours.len() > 1,
            contours,
            iscrowd: false,
            bbox,
        });
    }
    let categories: Vec<u32> = if file.categories.is_empty() {
        instances
            .iter()
            .map(|i| i.category_id)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    } else {
        file.categories
            .iter()
            .map(|c| c.id)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    };
    let mut image_ids: Vec<u64> = if file.images.is_empty() {
        instances
            .iter()
            .map(|i| i.image_id)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    } else {
        file.images.iter().map(|i| i.id).collect()
    };
    image_ids.sort_unstable();
    image_ids.dedup();
    Ok(LoadedAnnotations {
        instances,
        categories,
        image_ids,
        summary,
    })
}

/// Load a COCO-style annotation file (polygon segmentations only).
pub fn load_annotations(path: &Path) -> Result<LoadedAnnotations> {
    let text = std::fs::read_to_string(path)?;
    parse_annotations_str(&text)
}

#[derive(Debug, Deserialize)]
struct PolarRecord {
    x: f64,
    y: f64,
    distances: Vec<f64>,
}

#[derive(Debug, Deserialize)]
struct DetectionRecord {
    image_id: u64,
    category_id: u32,
    score: f64,
    #[serde(default)]
    polar: Option<PolarRecord>,
    #[serde(default)]
    polygon: Option<Vec<f64>>,
}

/// Detection geometry: polar parameters or an explicit vertex list.
#[derive(Debug, Clone, PartialEq)]
pub enum DetectionGeometry {
    Polar(PolarParams),
    Polygon(Polygon),
}

/// A scored polygon detection.
#[derive(Debug, Clone, PartialEq)]
pub struct PolygonDetection {
    pub image_id: u64,
    pub category_id: u32,
    pub score: f64,
    pub geometry: DetectionGeometry,
}

impl PolygonDetection {
    /// Resolve to an explicit polygon, reconstructing from polar parameters
    /// when needed.
    pub fn to_polygon(&self, angles: &AngleSet) -> Result<Polygon> {
        match &self.geometry {
            DetectionGeometry::Polar(p) => reconstruct_polygon(p, angles),
            DetectionGeometry::Polygon(p) => Ok(p.clone()),
        }
    }
}

/// Parse detection JSON: an array of
/// `{image_id, category_id, score, polar: {x, y, distances}}` or
/// `{..., polygon: [x1, y1, ...]}` records.
pub fn parse_detections_str(text: &str, angles: &AngleSet) -> Result<Vec<PolygonDetection>> {
    let records: Vec<DetectionRecord> = parse_json(text)?;
    let mut out = Vec::with_capacity(records.len());
    for (idx, rec) in records.into_iter().enumerate() {
        if !(0.0..=1.0).contains(&rec.score) || !rec.score.is_finite() {
            return Err(Error::parameter(format!(
                "detection {idx}: score {} outside [0, 1]",
                rec.score
            )));
        }
        let geometry = match (rec.polar, rec.polygon) {
            (Some(p), None) => {
                if p.distances.len() != angles.len() {
                    return Err(Error::Dimension {
                        context: "detection polar distances vs configured K",
                        expected: angles.len(),
                        actual: p.distances.len(),
                    });
                }
                DetectionGeometry::Polar(PolarParams::new(Point2::new(p.x, p.y), p.distances)?)
            }
            (None, Some(flat)) => {
                if flat.len() % 2 != 0 || flat.len() < 6 {
                    return Err(Error::parameter(format!(
                        "detection {idx}: polygon needs >= 3 (x, y) pairs"
                    )));
                }
                DetectionGeometry::Polygon(Polygon::new(
                    flat.chunks_exact(2)
                        .map(|c| Point2::new(c[0], c[1]))
                        .collect(),
                )?)
            }
            _ => {
                return Err(Error::parameter(format!(
                    "detection {idx}: exactly one of `polar` or `polygon` required"
                )))
            }
        };
        out.push(PolygonDetection {
            image_id: rec.image_id,
            category_id: rec.category_id,
            score: rec.score,
            geometry,
        });
    }
    Ok(out)
}

/// Load a detection JSON file.
pub fn load_detections(path: &Path, angles: &AngleSet) -> Result<Vec<PolygonDetection>> {
    let text = std::fs::read_to_string(path)?;
    parse_detections_str(&text, angles)
}
