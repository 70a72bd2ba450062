//! Domain types shared by every stage: points, lane-line records, vector maps
//! and oriented patch frames, plus the rigid transforms between a parent image
//! and a patch.
//!
//! Conventions used throughout the crate:
//! - Pixel coordinates are continuous, `x` grows to the right and `y` grows
//!   downward (image convention).
//! - Patch angles are counter-clockwise *as seen on screen*, i.e. in image
//!   axes with `y` pointing down.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ground resolution of zoom-20 satellite imagery in meters per pixel.
pub const DEFAULT_METERS_PER_PIXEL: f64 = 0.15;

/// Default square patch extent in pixels.
pub const DEFAULT_PATCH_SIZE: u32 = 896;

/// A point in continuous pixel coordinates.
///
/// Serialized as a two-element array `[x, y]`.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn distance(&self, other: &Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn distance_sq(&self, other: &Point2) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }

    pub fn norm(&self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn lerp(&self, other: &Point2, t: f64) -> Point2 {
        Point2::new(
            self.x + (other.x - self.x) * t,
            self.y + (other.y - self.y) * t,
        )
    }

    pub fn midpoint(&self, other: &Point2) -> Point2 {
        Point2::new(0.5 * (self.x + other.x), 0.5 * (self.y + other.y))
    }
}

impl From<[f64; 2]> for Point2 {
    fn from([x, y]: [f64; 2]) -> Self {
        Point2::new(x, y)
    }
}

impl From<Point2> for [f64; 2] {
    fn from(p: Point2) -> Self {
        [p.x, p.y]
    }
}

impl From<(f64, f64)> for Point2 {
    fn from((x, y): (f64, f64)) -> Self {
        Point2::new(x, y)
    }
}

macro_rules! named_enum {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        pub enum $name {
            $(
                #[serde(rename = $text)]
                $variant,
            )+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn name(&self) -> &'static str {
                match self {
                    $($name::$variant => $text,)+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.name())
            }
        }

        impl FromStr for $name {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($text => Ok($name::$variant),)+
                    other => Err(Error::InvalidInput(format!(
                        concat!("unknown ", stringify!($name), " {:?}"),
                        other
                    ))),
                }
            }
        }
    };
}

named_enum! {
    /// Semantic class of a lane-level line.
    LineCategory {
        Curb => "Curb",
        LaneLine => "LaneLine",
        VirtualLine => "VirtualLine",
    }
}

named_enum! {
    /// Painted style of a line.
    LineType {
        Solid => "Solid",
        ThickSolid => "ThickSolid",
        Dashed => "Dashed",
        ShortDashed => "ShortDashed",
        Other => "Other",
    }
}

/// Whether a line endpoint is a real start/end of the line or was produced by
/// cutting the line at a patch border.
///
/// Which end is the start and which the end follows from the point order, so
/// only this distinction is stored.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EndpointKind {
    #[default]
    Natural,
    Cut,
}

impl EndpointKind {
    pub const ALL: &'static [EndpointKind] = &[EndpointKind::Natural, EndpointKind::Cut];

    /// CamelCase name used by the token vocabulary.
    pub fn name(&self) -> &'static str {
        match self {
            EndpointKind::Natural => "Natural",
            EndpointKind::Cut => "Cut",
        }
    }

    pub fn is_cut(&self) -> bool {
        matches!(self, EndpointKind::Cut)
    }
}

impl fmt::Display for EndpointKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Which end of a polyline.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum End {
    Start,
    End,
}

/// One lane-line instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineRecord {
    pub id: String,
    pub points: Vec<Point2>,
    pub category: LineCategory,
    pub line_type: LineType,
    pub start_kind: EndpointKind,
    pub end_kind: EndpointKind,
    /// Confidence in `[0, 1]`, present on predictions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
}

impl LineRecord {
    /// Builds a line with natural endpoints and no score, validating the
    /// point list.
    pub fn new(
        id: impl Into<String>,
        points: Vec<Point2>,
        category: LineCategory,
        line_type: LineType,
    ) -> Result<Self> {
        let line = LineRecord {
            id: id.into(),
            points,
            category,
            line_type,
            start_kind: EndpointKind::Natural,
            end_kind: EndpointKind::Natural,
            score: None,
        };
        line.validate()?;
        Ok(line)
    }

    pub fn with_kinds(mut self, start: EndpointKind, end: EndpointKind) -> Self {
        self.start_kind = start;
        self.end_kind = end;
        self
    }

    pub fn with_score(mut self, score: Option<f64>) -> Self {
        self.score = score;
        self
    }

    /// Checks the record invariants: at least two points, all finite, no two
    /// consecutive points identical, score within `[0, 1]`.
    pub fn validate(&self) -> Result<()> {
        if self.points.len() < 2 {
            return Err(Error::InvalidGeometry(format!(
                "line {:?} has {} point(s), need at least 2",
                self.id,
                self.points.len()
            )));
        }
        if let Some(i) = self.points.iter().position(|p| !p.is_finite()) {
            return Err(Error::InvalidGeometry(format!(
                "line {:?} has a non-finite point at index {i}",
                self.id
            )));
        }
        if let Some(i) = self.points.windows(2).position(|w| w[0] == w[1]) {
            return Err(Error::InvalidGeometry(format!(
                "line {:?} repeats point {} at index {}",
                self.id,
                i,
                i + 1
            )));
        }
        if let Some(s) = self.score {
            if !(0.0..=1.0).contains(&s) {
                return Err(Error::InvalidInput(format!(
                    "line {:?} has score {s} outside [0, 1]",
                    self.id
                )));
            }
        }
        Ok(())
    }

    pub fn kind(&self, end: End) -> EndpointKind {
        match end {
            End::Start => self.start_kind,
            End::End => self.end_kind,
        }
    }

    pub fn endpoint(&self, end: End) -> Point2 {
        match end {
            End::Start => self.points[0],
            End::End => self.points[self.points.len() - 1],
        }
    }

    /// Same line traversed in the opposite direction.
    pub fn reversed(&self) -> LineRecord {
        let mut points = self.points.clone();
        points.reverse();
        LineRecord {
            points,
            start_kind: self.end_kind,
            end_kind: self.start_kind,
            ..self.clone()
        }
    }

    pub fn length_px(&self) -> f64 {
        path_length_px(&self.points)
    }

    /// Applies `f` to every point and drops consecutive duplicates it creates.
    pub fn map_points(&self, f: impl Fn(Point2) -> Point2) -> LineRecord {
        let mut points: Vec<Point2> = self.points.iter().map(|p| f(*p)).collect();
        dedup_consecutive(&mut points);
        LineRecord {
            points,
            ..self.clone()
        }
    }
}

/// Removes consecutive identical points in place.
pub fn dedup_consecutive(points: &mut Vec<Point2>) {
    points.dedup_by(|b, a| a == b);
}

/// Total Euclidean length of a point sequence in pixels.
pub fn path_length_px(points: &[Point2]) -> f64 {
    points.windows(2).map(|w| w[0].distance(&w[1])).sum()
}

/// Polyline length in meters.
pub fn polyline_length(points: &[Point2], meters_per_pixel: f64) -> Result<f64> {
    if points.len() < 2 {
        return Err(Error::InvalidGeometry(format!(
            "polyline has {} point(s), need at least 2",
            points.len()
        )));
    }
    Ok(path_length_px(points) * meters_per_pixel)
}

/// A set of lines in one coordinate frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VectorMap {
    pub frame_id: String,
    pub width_px: u32,
    pub height_px: u32,
    pub meters_per_pixel: f64,
    pub lines: Vec<LineRecord>,
}

impl VectorMap {
    pub fn empty(frame_id: impl Into<String>, width_px: u32, height_px: u32) -> Self {
        VectorMap {
            frame_id: frame_id.into(),
            width_px,
            height_px,
            meters_per_pixel: DEFAULT_METERS_PER_PIXEL,
            lines: Vec::new(),
        }
    }

    pub fn with_lines(mut self, lines: Vec<LineRecord>) -> Self {
        self.lines = lines;
        self
    }

    pub fn with_mpp(mut self, meters_per_pixel: f64) -> Self {
        self.meters_per_pixel = meters_per_pixel;
        self
    }

    pub fn is_empty(&self) -> bool {
        self.lines.is_empty()
    }

    pub fn len(&self) -> usize {
        self.lines.len()
    }

    /// Validates every line plus the frame invariants.
    pub fn validate(&self) -> Result<()> {
        if !(self.meters_per_pixel > 0.0 && self.meters_per_pixel.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "meters_per_pixel must be positive, got {}",
                self.meters_per_pixel
            )));
        }
        self.lines.iter().try_for_each(LineRecord::validate)
    }

    /// True when every point lies inside `[0, width] x [0, height]` up to `tol`.
    pub fn within_extent(&self, tol: f64) -> bool {
        let (w, h) = (self.width_px as f64, self.height_px as f64);
        self.lines.iter().flat_map(|l| &l.points).all(|p| {
            p.x >= -tol && p.y >= -tol && p.x <= w + tol && p.y <= h + tol
        })
    }
}

/// `(sin, cos)` of an angle in degrees, exact for multiples of 90.
pub fn sin_cos_deg(deg: f64) -> (f64, f64) {
    let d = deg.rem_euclid(360.0);
    if d == 0.0 {
        (0.0, 1.0)
    } else if d == 90.0 {
        (1.0, 0.0)
    } else if d == 180.0 {
        (0.0, -1.0)
    } else if d == 270.0 {
        (-1.0, 0.0)
    } else {
        d.to_radians().sin_cos()
    }
}

/// Rotates a vector counter-clockwise on screen (image axes, y down).
pub fn rotate_ccw(v: Point2, deg: f64) -> Point2 {
    let (s, c) = sin_cos_deg(deg);
    Point2::new(c * v.x + s * v.y, -s * v.x + c * v.y)
}

/// Normalizes an angle in degrees to `[0, 360)`.
pub fn normalize_deg(deg: f64) -> f64 {
    let d = deg.rem_euclid(360.0);
    // rem_euclid can round up to exactly 360 for tiny negative inputs
    if d >= 360.0 {
        0.0
    } else {
        d
    }
}

/// An oriented rectangular window into a parent image.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatchFrame {
    /// Patch center in parent pixels.
    pub center: Point2,
    /// Inclination in degrees, counter-clockwise in image axes, in `[0, 360)`.
    pub angle_deg: f64,
    pub width_px: u32,
    pub height_px: u32,
    pub parent_width_px: u32,
    pub parent_height_px: u32,
}

impl PatchFrame {
    pub fn new(
        center: Point2,
        angle_deg: f64,
        width_px: u32,
        height_px: u32,
        parent_width_px: u32,
        parent_height_px: u32,
    ) -> Result<Self> {
        if width_px == 0 || height_px == 0 {
            return Err(Error::InvalidInput(format!(
                "patch extent must be positive, got {width_px}x{height_px}"
            )));
        }
        if !center.is_finite() || !angle_deg.is_finite() {
            return Err(Error::InvalidInput("non-finite patch frame".into()));
        }
        Ok(PatchFrame {
            center,
            angle_deg: normalize_deg(angle_deg),
            width_px,
            height_px,
            parent_width_px,
            parent_height_px,
        })
    }

    /// Axis-aligned square frame whose top-left corner sits at `(x0, y0)`.
    pub fn axis_aligned(x0: f64, y0: f64, size: u32, parent_width: u32, parent_height: u32) -> Self {
        let half = size as f64 / 2.0;
        PatchFrame {
            center: Point2::new(x0 + half, y0 + half),
            angle_deg: 0.0,
            width_px: size,
            height_px: size,
            parent_width_px: parent_width,
            parent_height_px: parent_height,
        }
    }

    fn half_extent(&self) -> Point2 {
        Point2::new(self.width_px as f64 / 2.0, self.height_px as f64 / 2.0)
    }

    /// Top-left corner in parent pixels when the frame is axis-aligned.
    pub fn origin(&self) -> Point2 {
        let h = self.half_extent();
        Point2::new(self.center.x - h.x, self.center.y - h.y)
    }
}

/// Maps a parent-frame point into patch-local pixels.
///
/// The result may fall outside the patch rectangle.
pub fn world_to_patch(p: Point2, frame: &PatchFrame) -> Point2 {
    let d = Point2::new(p.x - frame.center.x, p.y - frame.center.y);
    let r = rotate_ccw(d, -frame.angle_deg);
    let h = frame.half_extent();
    Point2::new(r.x + h.x, r.y + h.y)
}

/// Inverse of [`world_to_patch`].
pub fn patch_to_world(p: Point2, frame: &PatchFrame) -> Point2 {
    let h = frame.half_extent();
    let d = Point2::new(p.x - h.x, p.y - h.y);
    let r = rotate_ccw(d, frame.angle_deg);
    Point2::new(r.x + frame.center.x, r.y + frame.center.y)
}
