//! Annotation file format and importers.
//!
//! ```json
//! {"width": 4096, "height": 4096, "mpp": 0.15,
//!  "lines": [{"id": "0", "points": [[1, 2], [30, 40]], "category": "Curb",
//!             "line_type": "Solid", "start": "natural", "end": "cut"}]}
//! ```

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    dedup_consecutive, EndpointKind, LineCategory, LineRecord, LineType, Point2, VectorMap,
    DEFAULT_METERS_PER_PIXEL,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnotationLine {
    pub id: String,
    pub points: Vec<Point2>,
    pub category: LineCategory,
    pub line_type: LineType,
    #[serde(default)]
    pub start: EndpointKind,
    #[serde(default)]
    pub end: EndpointKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnotationFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame_id: Option<String>,
    pub width: u32,
    pub height: u32,
    #[serde(default = "default_mpp")]
    pub mpp: f64,
    pub lines: Vec<AnnotationLine>,
}

fn default_mpp() -> f64 {
    DEFAULT_METERS_PER_PIXEL
}

impl From<&VectorMap> for AnnotationFile {
    fn from(map: &VectorMap) -> Self {
        AnnotationFile {
            frame_id: Some(map.frame_id.clone()),
            width: map.width_px,
            height: map.height_px,
            mpp: map.meters_per_pixel,
            lines: map
                .lines
                .iter()
                .map(|l| AnnotationLine {
                    id: l.id.clone(),
                    points: l.points.clone(),
                    category: l.category,
                    line_type: l.line_type,
                    start: l.start_kind,
                    end: l.end_kind,
                    score: l.score,
                })
                .collect(),
        }
    }
}

impl AnnotationFile {
    /// Converts to a map and validates it; errors name the offending line.
    pub fn into_map(self, default_frame_id: &str) -> Result<VectorMap> {
        let map = VectorMap {
            frame_id: self.frame_id.unwrap_or_else(|| default_frame_id.to_string()),
            width_px: self.width,
            height_px: self.height,
            meters_per_pixel: self.mpp,
            lines: self
                .lines
                .into_iter()
                .map(|l| LineRecord {
                    id: l.id,
                    points: l.points,
                    category: l.category,
                    line_type: l.line_type,
                    start_kind: l.start,
                    end_kind: l.end,
                    score: l.score,
                })
                .collect(),
        };
        if !(map.meters_per_pixel > 0.0 && map.meters_per_pixel.is_finite()) {
            return Err(Error::Schema {
                path: "mpp".into(),
                message: format!("must be positive, got {}", map.meters_per_pixel),
            });
        }
        for (i, l) in map.lines.iter().enumerate() {
            l.validate().map_err(|e| Error::Schema {
                path: format!("lines[{i}]"),
                message: e.to_string(),
            })?;
        }
        Ok(map)
    }
}

/// Parses JSON text, reporting the JSON path of the first schema violation.
pub fn from_json_path<T: serde::de::DeserializeOwned>(text: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::Schema {
            path,
            message: e.into_inner().to_string(),
        }
    })
}

/// Reads an annotation document.
pub fn parse_annotation(text: &str, default_frame_id: &str) -> Result<VectorMap> {
    from_json_path::<AnnotationFile>(text)?.into_map(default_frame_id)
}

/// Writes an annotation document (pretty-printed, stable key order).
pub fn annotation_to_json(map: &VectorMap) -> String {
    serde_json::to_string_pretty(&AnnotationFile::from(map)).expect("annotation serializes")
}

fn squash(s: &str) -> String {
    s.chars().filter(|c| c.is_ascii_alphanumeric()).collect::<String>().to_ascii_lowercase()
}

fn osm_category(raw: &str) -> Option<LineCategory> {
    match squash(raw).trim_end_matches("line") {
        "curb" | "kerb" => Some(LineCategory::Curb),
        "lane" => Some(LineCategory::LaneLine),
        "virtual" => Some(LineCategory::VirtualLine),
        _ => None,
    }
}

fn osm_line_type(raw: &str) -> LineType {
    match squash(raw).trim_end_matches("line") {
        "solid" => LineType::Solid,
        "thicksolid" => LineType::ThickSolid,
        "dashed" => LineType::Dashed,
        "shortdashed" => LineType::ShortDashed,
        _ => LineType::Other,
    }
}

#[derive(Deserialize)]
struct OsmLine {
    category: String,
    #[serde(default)]
    line_type: Option<String>,
    points: Vec<Point2>,
}

#[derive(Deserialize)]
struct OsmImage {
    image_width: u32,
    image_height: u32,
    lines: Vec<OsmLine>,
}

/// Result of importing a dataset-native annotation file.
#[derive(Clone, Debug, PartialEq)]
pub struct Imported {
    pub maps: Vec<VectorMap>,
    pub warnings: Vec<String>,
}

/// Imports an OpenSatMap-style file: an object keyed by image name, each
/// holding `image_width`, `image_height` and `lines` with free-text
/// `category` / `line_type` labels and pixel `points`.
///
/// Labels are matched case- and punctuation-insensitively. Lines with an
/// unknown category or fewer than two distinct points are skipped with a
/// warning; unknown line types map to `Other`.
pub fn import_opensatmap(text: &str, meters_per_pixel: f64) -> Result<Imported> {
    let images: BTreeMap<String, OsmImage> = from_json_path(text)?;
    let mut maps = Vec::with_capacity(images.len());
    let mut warnings = Vec::new();
    for (name, img) in images {
        let mut lines = Vec::with_capacity(img.lines.len());
        for (i, raw) in img.lines.into_iter().enumerate() {
            let Some(category) = osm_category(&raw.category) else {
                warnings.push(format!("{name}: line {i}: unknown category {:?}", raw.category));
                continue;
            };
            let line_type = raw.line_type.as_deref().map_or(LineType::Other, osm_line_type);
            let mut points = raw.points;
            dedup_consecutive(&mut points);
            match LineRecord::new(i.to_string(), points, category, line_type) {
                Ok(l) => lines.push(l),
                Err(e) => warnings.push(format!("{name}: line {i}: {e}")),
            }
        }
        maps.push(
            VectorMap::empty(name, img.image_width, img.image_height)
                .with_mpp(meters_per_pixel)
                .with_lines(lines),
        );
    }
    Ok(Imported { maps, warnings })
}
