//! Polyline clipping against axis-aligned rectangles.
//!
//! Segments are clipped parametrically (Liang-Barsky). Intersection points are
//! snapped onto the boundary they were computed against, so clip-created
//! endpoints lie exactly on the rectangle border.

use crate::model::{dedup_consecutive, Point2};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Rect { x0, y0, x1, y1 }
    }

    /// `[0, width] x [0, height]`.
    pub fn sized(width: f64, height: f64) -> Self {
        Rect::new(0.0, 0.0, width, height)
    }

    pub fn contains(&self, p: &Point2, tol: f64) -> bool {
        p.x >= self.x0 - tol && p.x <= self.x1 + tol && p.y >= self.y0 - tol && p.y <= self.y1 + tol
    }

    /// Distance from `p` to the rectangle boundary (inside or outside).
    pub fn border_distance(&self, p: &Point2) -> f64 {
        if self.contains(p, 0.0) {
            (p.x - self.x0).min(self.x1 - p.x).min(p.y - self.y0).min(self.y1 - p.y)
        } else {
            self.outside_distance(p)
        }
    }

    /// Distance from `p` to the closed rectangle; zero inside.
    pub fn outside_distance(&self, p: &Point2) -> f64 {
        let dx = (self.x0 - p.x).max(0.0).max(p.x - self.x1);
        let dy = (self.y0 - p.y).max(0.0).max(p.y - self.y1);
        dx.hypot(dy)
    }

    fn clamp(&self, p: Point2) -> Point2 {
        Point2::new(p.x.clamp(self.x0, self.x1), p.y.clamp(self.y0, self.y1))
    }
}

/// One maximal piece of a polyline inside the rectangle.
#[derive(Clone, Debug, PartialEq)]
pub struct ClippedRun {
    pub points: Vec<Point2>,
    /// The first point was created by clipping rather than being the
    /// polyline's own first point.
    pub entered_at_start: bool,
    /// The last point was created by clipping.
    pub exited_at_end: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Edge {
    Left,
    Right,
    Top,
    Bottom,
}

struct SegmentClip {
    t0: f64,
    t1: f64,
    enter_edge: Option<Edge>,
    exit_edge: Option<Edge>,
}

fn clip_segment(a: Point2, b: Point2, r: &Rect) -> Option<SegmentClip> {
    let dx = b.x - a.x;
    let dy = b.y - a.y;
    let checks = [
        (-dx, a.x - r.x0, Edge::Left),
        (dx, r.x1 - a.x, Edge::Right),
        (-dy, a.y - r.y0, Edge::Top),
        (dy, r.y1 - a.y, Edge::Bottom),
    ];
    let mut out = SegmentClip {
        t0: 0.0,
        t1: 1.0,
        enter_edge: None,
        exit_edge: None,
    };
    for (p, q, edge) in checks {
        if p == 0.0 {
            if q < 0.0 {
                return None;
            }
            continue;
        }
        let t = q / p;
        if p < 0.0 {
            if t > out.t1 {
                return None;
            }
            if t > out.t0 {
                out.t0 = t;
                out.enter_edge = Some(edge);
            }
        } else {
            if t < out.t0 {
                return None;
            }
            if t < out.t1 {
                out.t1 = t;
                out.exit_edge = Some(edge);
            }
        }
    }
    Some(out)
}

fn point_at(a: Point2, b: Point2, t: f64, edge: Option<Edge>, r: &Rect) -> Point2 {
    let Some(edge) = edge else {
        return if t == 0.0 { a } else if t == 1.0 { b } else { a.lerp(&b, t) };
    };
    let p = r.clamp(a.lerp(&b, t));
    match edge {
        Edge::Left => Point2::new(r.x0, p.y),
        Edge::Right => Point2::new(r.x1, p.y),
        Edge::Top => Point2::new(p.x, r.y0),
        Edge::Bottom => Point2::new(p.x, r.y1),
    }
}

/// Splits a polyline into its maximal pieces inside `rect`.
///
/// Runs that degenerate to a single point (grazing contact) are dropped. A
/// polyline entirely outside yields an empty list.
pub fn clip_polyline_to_rect(points: &[Point2], rect: &Rect) -> Vec<ClippedRun> {
    let mut runs = Vec::new();
    let mut current: Option<ClippedRun> = None;

    let close = |run: ClippedRun, exited: bool, runs: &mut Vec<ClippedRun>| {
        let mut run = ClippedRun {
            exited_at_end: exited,
            ..run
        };
        dedup_consecutive(&mut run.points);
        if run.points.len() >= 2 {
            runs.push(run);
        }
    };

    for (i, w) in points.windows(2).enumerate() {
        let (a, b) = (w[0], w[1]);
        let Some(seg) = clip_segment(a, b, rect) else {
            if let Some(run) = current.take() {
                close(run, true, &mut runs);
            }
            continue;
        };
        if seg.t0 > 0.0 {
            if let Some(run) = current.take() {
                close(run, true, &mut runs);
            }
        }
        let run = current.get_or_insert_with(|| ClippedRun {
            points: vec![point_at(a, b, seg.t0, seg.enter_edge, rect)],
            entered_at_start: !(i == 0 && seg.t0 == 0.0),
            exited_at_end: false,
        });
        run.points.push(point_at(a, b, seg.t1, seg.exit_edge, rect));
        if seg.t1 < 1.0 {
            let run = current.take().expect("run just inserted");
            close(run, true, &mut runs);
        }
    }
    if let Some(run) = current.take() {
        close(run, false, &mut runs);
    }
    runs
}
