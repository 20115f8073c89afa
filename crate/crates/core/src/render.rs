//! Deterministic SVG frames of a trace.
//!
//! Robots are dots coloured by phase, pattern coordinates are crosses
//! (placed with the final alignment) and path vertices are open circles.
//! Every frame of a trace shares one view box so frames can be flipped
//! through. Numbers are printed with fixed precision, so equal input gives
//! byte-identical output.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::protocol::Phase;
use crate::simulator::{RoundRecord, Trace};

const CANVAS: f64 = 800.0;
const MARGIN: f64 = 20.0;

/// Indices of the records to draw: every `every`-th round plus the last.
pub fn frame_indices(records: usize, every: usize) -> Vec<usize> {
    let every = every.max(1);
    let mut v: Vec<usize> = (0..records).step_by(every).collect();
    if records > 0 && v.last() != Some(&(records - 1)) {
        v.push(records - 1);
    }
    v
}

fn phase_colour(p: Option<&Phase>) -> &'static str {
    match p {
        Some(Phase::InitialNearGathering) => "#7f7f7f",
        Some(Phase::InDrawingFormation) => "#1f77b4",
        Some(Phase::InIntermediateDrawingFormation) => "#ff7f0e",
        Some(Phase::Dropped) => "#2ca02c",
        Some(Phase::StarScaling) => "#9467bd",
        None => "#000000",
    }
}

/// Maps world coordinates to the canvas (y pointing up in the world).
struct View {
    min: Point,
    scale: f64,
    height: f64,
}

impl View {
    fn fit(points: impl Iterator<Item = Point>) -> View {
        let (mut lo, mut hi) = (Point::new(f64::INFINITY, f64::INFINITY), Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY));
        for p in points {
            lo = Point::new(lo.x.min(p.x), lo.y.min(p.y));
            hi = Point::new(hi.x.max(p.x), hi.y.max(p.y));
        }
        if !lo.x.is_finite() {
            lo = Point::new(-1.0, -1.0);
            hi = Point::new(1.0, 1.0);
        }
        let extent = (hi.x - lo.x).max(hi.y - lo.y).max(1.0);
        let scale = (CANVAS - 2.0 * MARGIN) / extent;
        View { min: lo, scale, height: (hi.y - lo.y) * scale + 2.0 * MARGIN }
    }

    fn map(&self, p: Point) -> (f64, f64) {
        (MARGIN + (p.x - self.min.x) * self.scale, self.height - MARGIN - (p.y - self.min.y) * self.scale)
    }
}

/// Pattern coordinates in the global frame, if the trace has an alignment.
fn placed_pattern(trace: &Trace) -> Vec<Point> {
    match trace.summary.alignment {
        Some(a) => trace.summary.pattern.iter().map(|&p| a.apply(p)).collect(),
        None => vec![],
    }
}

fn view_for(trace: &Trace, crosses: &[Point]) -> View {
    let robots = trace.records.iter().flat_map(|r| r.positions.iter().copied());
    let paths = trace.summary.paths.iter().flatten().copied();
    View::fit(robots.chain(paths).chain(crosses.iter().copied()))
}

fn frame(trace: &Trace, rec: &RoundRecord, view: &View, crosses: &[Point]) -> String {
    let mut s = String::new();
    let w = CANVAS;
    let h = view.height;
    // Writing into a String cannot fail.
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.3} {h:.3}">"#);
    let _ = writeln!(s, r##"<rect width="100%" height="100%" fill="#ffffff"/>"##);
    let _ = writeln!(s, r##"<g id="paths" fill="none" stroke="#bbbbbb" stroke-width="0.5">"##);
    for path in &trace.summary.paths {
        for v in path {
            let (x, y) = view.map(*v);
            let _ = writeln!(s, r#"<circle cx="{x:.3}" cy="{y:.3}" r="2.000"/>"#);
        }
    }
    let _ = writeln!(s, "</g>");
    let _ = writeln!(s, r##"<g id="pattern" stroke="#d62728" stroke-width="1">"##);
    for p in crosses {
        let (x, y) = view.map(*p);
        let _ = writeln!(
            s,
            r#"<path d="M{:.3} {:.3}L{:.3} {:.3}M{:.3} {:.3}L{:.3} {:.3}"/>"#,
            x - 4.0,
            y - 4.0,
            x + 4.0,
            y + 4.0,
            x - 4.0,
            y + 4.0,
            x + 4.0,
            y - 4.0
        );
    }
    let _ = writeln!(s, "</g>");
    let _ = writeln!(s, r#"<g id="robots">"#);
    for (i, p) in rec.positions.iter().enumerate() {
        let (x, y) = view.map(*p);
        let c = phase_colour(rec.phases.get(i));
        let _ = writeln!(s, r#"<circle cx="{x:.3}" cy="{y:.3}" r="3.000" fill="{c}"/>"#);
    }
    let _ = writeln!(s, "</g>");
    let _ = writeln!(
        s,
        r#"<text x="{MARGIN:.0}" y="{:.0}" font-family="monospace" font-size="14">round {} · {} events</text>"#,
        MARGIN,
        rec.round,
        rec.events.len()
    );
    s.push_str("</svg>\n");
    s
}

/// Renders the sampled frames as `(file name, SVG text)` pairs.
pub fn render_trace(trace: &Trace, every: usize) -> Vec<(String, String)> {
    let crosses = placed_pattern(trace);
    let view = view_for(trace, &crosses);
    frame_indices(trace.records.len(), every)
        .into_iter()
        .map(|k| {
            let rec = &trace.records[k];
            (format!("frame_{:06}.svg", rec.round), frame(trace, rec, &view, &crosses))
        })
        .collect()
}

/// Writes the frames into `dir` (created if needed) and returns their paths.
pub fn write_frames(trace: &Trace, dir: &Path, every: usize) -> Result<Vec<PathBuf>> {
    if every == 0 {
        return Err(Error::Config("--every must be at least 1".into()));
    }
    fs::create_dir_all(dir)?;
    let mut out = vec![];
    for (name, svg) in render_trace(trace, every) {
        let p = dir.join(name);
        fs::write(&p, svg)?;
        out.push(p);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::registration::Alignment;
    use crate::simulator::{FinalRecord, Verdict};

    fn toy(rounds: usize) -> Trace {
        let records = (0..rounds)
            .map(|t| RoundRecord {
                round: t,
                positions: vec![Point::new(t as f64 * 0.1, 0.0), Point::new(0.0, 1.0)],
                phases: vec![Phase::InDrawingFormation, Phase::Dropped],
                events: vec![],
            })
            .collect();
        Trace {
            records,
            summary: FinalRecord {
                verdict: Verdict::Formed,
                rounds: rounds - 1,
                max_error: 0.0,
                alignment: Some(Alignment { rotation: 0.0, translation: Point::ORIGIN }),
                reason: None,
                pattern: vec![Point::new(0.9, 0.0), Point::new(0.0, 1.0)],
                paths: vec![vec![Point::new(0.5, 0.5)]],
            },
        }
    }

    #[test]
    fn sampling_includes_the_final_round() {
        assert_eq!(frame_indices(10, 5), vec![0, 5, 9]);
        assert_eq!(frame_indices(11, 5), vec![0, 5, 10]);
        assert_eq!(frame_indices(1, 3), vec![0]);
        assert!(frame_indices(0, 3).is_empty());
    }

    #[test]
    fn frames_are_deterministic_and_complete() {
        let t = toy(10);
        let a = render_trace(&t, 5);
        assert_eq!(a.iter().map(|f| f.0.as_str()).collect::<Vec<_>>(), ["frame_000000.svg", "frame_000005.svg", "frame_000009.svg"]);
        assert_eq!(a, render_trace(&t, 5));
        let svg = &a[0].1;
        assert_eq!(svg.matches("<path").count(), 2);
        assert_eq!(svg.matches("r=\"3.000\"").count(), 2);
        assert!(svg.contains("round 0"));
    }
}
