//! SVG figures of a run: search trees, certified ellipses, planned paths and
//! executed trajectories drawn over the occupancy grid.

use std::fmt::Write as _;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::certificates::project_ellipsoid;
use crate::harness::RunArtifact;
use crate::workspace::{GridWorld, Rect};

#[derive(Debug, Error)]
pub enum RenderError {
    #[error("artifact has no {0} to draw")]
    Missing(&'static str),
    #[error("cannot rebuild the scene: {0}")]
    Scene(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FigureKind {
    Trees,
    Ellipses,
    Paths,
    Executed,
}

impl FigureKind {
    pub const ALL: [FigureKind; 4] = [Self::Trees, Self::Ellipses, Self::Paths, Self::Executed];

    pub fn name(self) -> &'static str {
        match self {
            Self::Trees => "trees",
            Self::Ellipses => "ellipses",
            Self::Paths => "paths",
            Self::Executed => "executed",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }
}

const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];
const SCALE: f64 = 6.0;
const MARGIN: f64 = 20.0;

fn color(agent: usize) -> &'static str {
    COLORS[agent % COLORS.len()]
}

/// Semi-axes and rotation (degrees, counter-clockwise in world frame) of
/// `{d : dᵀ shape⁻¹ d ≤ 1}` for a 2×2 positive-definite `shape`.
pub fn ellipse_geometry(shape: &DMatrix<f64>) -> (f64, f64, f64) {
    let eig = SymmetricEigen::new((shape + shape.transpose()) * 0.5);
    let (major, minor) = if eig.eigenvalues[0] >= eig.eigenvalues[1] { (0, 1) } else { (1, 0) };
    let v = eig.eigenvectors.column(major);
    let angle = v[1].atan2(v[0]).to_degrees();
    (
        eig.eigenvalues[major].max(0.0).sqrt(),
        eig.eigenvalues[minor].max(0.0).sqrt(),
        angle,
    )
}

struct Canvas {
    bounds: Rect,
    body: String,
}

impl Canvas {
    fn new(bounds: Rect) -> Self {
        Self {
            bounds,
            body: String::new(),
        }
    }

    fn x(&self, wx: f64) -> f64 {
        MARGIN + (wx - self.bounds.xmin) * SCALE
    }

    /// World `y` grows upward, SVG `y` downward.
    fn y(&self, wy: f64) -> f64 {
        MARGIN + (self.bounds.ymax - wy) * SCALE
    }

    fn rect(&mut self, r: &Rect, style: &str) {
        let (x, y) = (self.x(r.xmin), self.y(r.ymax));
        let (w, h) = ((r.xmax - r.xmin) * SCALE, (r.ymax - r.ymin) * SCALE);
        let _ = writeln!(self.body, r#"<rect x="{x:.2}" y="{y:.2}" width="{w:.2}" height="{h:.2}" {style}/>"#);
    }

    fn line(&mut self, a: [f64; 2], b: [f64; 2], style: &str) {
        let _ = writeln!(
            self.body,
            r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" {style}/>"#,
            self.x(a[0]),
            self.y(a[1]),
            self.x(b[0]),
            self.y(b[1])
        );
    }

    fn polyline(&mut self, pts: impl IntoIterator<Item = [f64; 2]>, style: &str) {
        let points: Vec<String> = pts
            .into_iter()
            .map(|p| format!("{:.2},{:.2}", self.x(p[0]), self.y(p[1])))
            .collect();
        let _ = writeln!(self.body, r#"<polyline points="{}" fill="none" {style}/>"#, points.join(" "));
    }

    fn circle(&mut self, c: [f64; 2], r: f64, style: &str) {
        let _ = writeln!(
            self.body,
            r#"<circle cx="{:.2}" cy="{:.2}" r="{r:.2}" {style}/>"#,
            self.x(c[0]),
            self.y(c[1])
        );
    }

    fn ellipse(&mut self, c: [f64; 2], shape: &DMatrix<f64>, style: &str) {
        let (a, b, angle) = ellipse_geometry(shape);
        let (cx, cy) = (self.x(c[0]), self.y(c[1]));
        // The y flip turns a counter-clockwise world angle into a clockwise one.
        let _ = writeln!(
            self.body,
            r#"<ellipse cx="{cx:.2}" cy="{cy:.2}" rx="{:.2}" ry="{:.2}" transform="rotate({:.3} {cx:.2} {cy:.2})" {style}/>"#,
            a * SCALE,
            b * SCALE,
            -angle
        );
    }

    fn finish(self, title: &str) -> String {
        let w = (self.bounds.xmax - self.bounds.xmin) * SCALE + 2.0 * MARGIN;
        let h = (self.bounds.ymax - self.bounds.ymin) * SCALE + 2.0 * MARGIN;
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w:.0}\" height=\"{h:.0}\" viewBox=\"0 0 {w:.0} {h:.0}\">\n\
             <title>{title}</title>\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n{}</svg>\n",
            self.body
        )
    }
}

fn draw_grid(canvas: &mut Canvas, grid: &GridWorld) {
    for c in grid.cells() {
        let r = grid.rect(c).expect("cells() yields in-grid cells");
        let style = if grid.is_blocked(c) {
            r##"fill="#555555" stroke="#bbbbbb" stroke-width="0.5""##
        } else {
            r##"fill="none" stroke="#dddddd" stroke-width="0.5""##
        };
        canvas.rect(&r, style);
    }
}

fn draw_endpoints(canvas: &mut Canvas, art: &RunArtifact) {
    for (i, a) in art.scenario.agents.iter().enumerate() {
        canvas.circle(a.start, 4.0, &format!(r#"fill="{}""#, color(i)));
        canvas.circle(a.goal, 5.0, &format!(r#"fill="none" stroke="{}" stroke-width="2""#, color(i)));
    }
}

pub fn render_svg(art: &RunArtifact, kind: FigureKind) -> Result<String, RenderError> {
    let grid = art.scenario.grid().map_err(|e| RenderError::Scene(e.to_string()))?;
    if art.agents.is_empty() {
        return Err(RenderError::Missing("agents"));
    }
    let mut canvas = Canvas::new(grid.bounds());
    draw_grid(&mut canvas, &grid);
    let center = |c| {
        let p = grid.center(c).expect("stored cells lie in the grid");
        [p.x, p.y]
    };
    match kind {
        FigureKind::Trees => {
            for (i, a) in art.agents.iter().enumerate() {
                let style = format!(r#"stroke="{}" stroke-width="1" stroke-opacity="0.6""#, color(i));
                for node in &a.tree.nodes {
                    if let Some(p) = node.parent {
                        canvas.line(center(a.tree.nodes[p].cell), center(node.cell), &style);
                    }
                }
            }
        }
        FigureKind::Ellipses => {
            let model = art.scenario.model().map_err(|e| RenderError::Scene(e.to_string()))?;
            for (i, a) in art.agents.iter().enumerate() {
                if a.path.edge_certs.is_empty() && a.path.root_cert.is_none() {
                    return Err(RenderError::Missing("certificates"));
                }
                let style = format!(
                    r#"fill="{0}" fill-opacity="0.12" stroke="{0}" stroke-width="1""#,
                    color(i)
                );
                for cert in a.path.root_cert.iter().chain(&a.path.edge_certs) {
                    let proj = project_ellipsoid(cert, model.c()).map_err(|e| RenderError::Scene(e.to_string()))?;
                    canvas.ellipse([proj.center[0], proj.center[1]], &proj.shape(), &style);
                }
                canvas.polyline(a.path.waypoints.iter().copied(), &format!(r#"stroke="{}" stroke-width="1.5""#, color(i)));
            }
        }
        FigureKind::Paths => {
            for (i, a) in art.agents.iter().enumerate() {
                let c = color(i);
                canvas.polyline(a.path.waypoints.iter().copied(), &format!(r#"stroke="{c}" stroke-width="2.5""#));
                for w in &a.path.waypoints {
                    canvas.circle(*w, 2.0, &format!(r#"fill="{c}""#));
                }
            }
        }
        FigureKind::Executed => {
            if art.certified.traces.len() != art.agents.len() {
                return Err(RenderError::Missing("executed trajectories"));
            }
            for (i, t) in art.certified.traces.iter().enumerate() {
                let c = color(i);
                canvas.polyline(t.outputs.iter().map(|y| [y[0], y[1]]), &format!(r#"stroke="{c}" stroke-width="2""#));
                for &(k, _) in &t.violations {
                    canvas.circle([t.outputs[k][0], t.outputs[k][1]], 3.0, r#"fill="black""#);
                }
            }
            if let Some(b) = &art.baseline {
                for (i, t) in b.execution.traces.iter().enumerate() {
                    canvas.polyline(
                        t.outputs.iter().map(|y| [y[0], y[1]]),
                        &format!(r#"stroke="{}" stroke-width="1.5" stroke-dasharray="5,3""#, color(i)),
                    );
                }
            }
        }
    }
    draw_endpoints(&mut canvas, art);
    Ok(canvas.finish(&format!("{}: {}", art.scenario.name, kind.name())))
}
