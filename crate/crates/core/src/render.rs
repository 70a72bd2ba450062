//! SVG rendering of vector maps.

use std::fmt::Write;

use crate::model::{LineCategory, VectorMap};

const INSTANCE_PALETTE: [&str; 12] = [
    "#e6194b", "#3cb44b", "#4363d8", "#f58231", "#911eb4", "#42d4f4", "#f032e6", "#bfef45",
    "#469990", "#9a6324", "#800000", "#000075",
];

pub fn category_color(c: LineCategory) -> &'static str {
    match c {
        LineCategory::Curb => "#d62728",
        LineCategory::LaneLine => "#1f77b4",
        LineCategory::VirtualLine => "#2ca02c",
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SvgOptions {
    pub stroke_width_px: f64,
    /// Color each line individually instead of by category.
    pub by_instance: bool,
}

impl Default for SvgOptions {
    fn default() -> Self {
        SvgOptions {
            stroke_width_px: 6.0,
            by_instance: false,
        }
    }
}

/// One `<path>` per line, in map pixel coordinates.
pub fn render_svg(map: &VectorMap, opts: &SvgOptions) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#,
        w = map.width_px,
        h = map.height_px
    );
    for (i, line) in map.lines.iter().enumerate() {
        let color = if opts.by_instance {
            INSTANCE_PALETTE[i % INSTANCE_PALETTE.len()]
        } else {
            category_color(line.category)
        };
        let mut d = String::new();
        for (j, p) in line.points.iter().enumerate() {
            let _ = write!(d, "{}{} {}", if j == 0 { "M" } else { " L" }, p.x, p.y);
        }
        let _ = writeln!(
            out,
            r#"  <path d="{d}" fill="none" stroke="{color}" stroke-width="{}" stroke-linecap="round" stroke-linejoin="round"/>"#,
            opts.stroke_width_px
        );
    }
    out.push_str("</svg>\n");
    out
}
