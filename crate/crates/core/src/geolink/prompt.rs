use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::codec::round_half_up;
use crate::error::{Error, Result};
use crate::model::{normalize_deg, Point2};

/// Which inputs accompany the request.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PromptMode {
    Bev,
    Pv,
    BevPv,
    /// Satellite image plus a start and an end point.
    BevEndpoints,
    /// Satellite image plus a trace of positions and headings.
    BevTrace,
    BevPvTrace,
}

impl PromptMode {
    pub const ALL: [PromptMode; 6] = [
        PromptMode::Bev,
        PromptMode::Pv,
        PromptMode::BevPv,
        PromptMode::BevEndpoints,
        PromptMode::BevTrace,
        PromptMode::BevPvTrace,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            PromptMode::Bev => "bev",
            PromptMode::Pv => "pv",
            PromptMode::BevPv => "bev-pv",
            PromptMode::BevEndpoints => "bev-endpoints",
            PromptMode::BevTrace => "bev-trace",
            PromptMode::BevPvTrace => "bev-pv-trace",
        }
    }
}

impl fmt::Display for PromptMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PromptMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PromptMode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown prompt mode {s:?}")))
    }
}

/// A position in satellite pixels with a heading in degrees.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PosedPoint {
    pub point: Point2,
    pub heading_deg: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PromptArgs {
    pub pv: Option<Vec<PosedPoint>>,
    pub endpoints: Option<(Point2, Point2)>,
    pub trace: Option<Vec<PosedPoint>>,
}

fn int(v: f64) -> i64 {
    round_half_up(v)
}

/// Whole degrees in `0..=359`.
fn angle(deg: f64) -> i64 {
    int(normalize_deg(deg)).rem_euclid(360)
}

fn point(p: &Point2) -> String {
    format!("[{},{}]", int(p.x), int(p.y))
}

fn pv_list(items: &[PosedPoint]) -> String {
    let body: Vec<String> = items
        .iter()
        .map(|e| format!("{{<pv frame>, point: {}, angle: {}}}", point(&e.point), angle(e.heading_deg)))
        .collect();
    format!("[{}]", body.join(", "))
}

fn trace_list(items: &[PosedPoint]) -> String {
    let body: Vec<String> = items
        .iter()
        .map(|e| format!("{{point: {}, angle: {}}}", point(&e.point), angle(e.heading_deg)))
        .collect();
    format!("[{}]", body.join(","))
}

fn required<'a, T>(v: &'a Option<Vec<T>>, mode: PromptMode, what: &'static str) -> Result<&'a [T]> {
    match v {
        Some(items) if !items.is_empty() => Ok(items),
        _ => Err(Error::MissingArgument { mode: mode.name(), what }),
    }
}

/// Prompt text for a generation mode. Coordinates are rounded to whole
/// pixels and headings to whole degrees.
pub fn build_prompt(mode: PromptMode, args: &PromptArgs) -> Result<String> {
    Ok(match mode {
        PromptMode::Bev => "<image>Please construct the entire road map in the satellite image.".into(),
        PromptMode::Pv => format!(
            "Please construct the road map referring to the perspective frames: {}",
            pv_list(required(&args.pv, mode, "pv frames")?)
        ),
        PromptMode::BevPv => format!(
            "<image>Please construct the entire road map in the satellite image, referring to the perspective frames: {}",
            pv_list(required(&args.pv, mode, "pv frames")?)
        ),
        PromptMode::BevEndpoints => {
            let (a, b) = args
                .endpoints
                .ok_or(Error::MissingArgument { mode: mode.name(), what: "endpoints" })?;
            format!(
                "<image>Please construct the road map from ({},{}) to ({},{}) in the satellite image.",
                int(a.x),
                int(a.y),
                int(b.x),
                int(b.y)
            )
        }
        PromptMode::BevTrace => format!(
            "<image>Please construct the target road map in the satellite image, around the trace points: {}",
            trace_list(required(&args.trace, mode, "trace points")?)
        ),
        PromptMode::BevPvTrace => format!(
            "<image>Please construct the target road map in the satellite image, referring to the perspective frames and trace points: {}",
            pv_list(required(&args.pv, mode, "pv frames")?)
        ),
    })
}
