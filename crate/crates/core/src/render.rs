//! Static SVG / Graphviz DOT rendering of node saliency.
//!
//! Node fill is a linear interpolation from [`LOW_COLOR`] (saliency 0) to
//! [`HIGH_COLOR`] (saliency 1) over the min-max normalized map, each RGB
//! channel rounded to the nearest integer. Nodes sit at their positions, or on
//! a grid of `ceil(sqrt(N))` columns when the graph has none.

use std::fmt::Write;

use crate::error::{Error, Result};
use crate::graph::{minmax_normalize, Graph, NodeVector};

pub const LOW_COLOR: [u8; 3] = [0xf7, 0xf7, 0xf7];
pub const HIGH_COLOR: [u8; 3] = [0xb2, 0x18, 0x2b];

const CANVAS: f64 = 480.0;
const MARGIN: f64 = 20.0;
const RADIUS: f64 = 8.0;

/// Hex fill for a normalized saliency value in `[0, 1]`.
pub fn colormap(t: f64) -> String {
    let t = t.clamp(0.0, 1.0);
    let ch = |i: usize| {
        let (lo, hi) = (f64::from(LOW_COLOR[i]), f64::from(HIGH_COLOR[i]));
        (lo + t * (hi - lo)).round() as u8
    };
    format!("#{:02x}{:02x}{:02x}", ch(0), ch(1), ch(2))
}

pub fn hex(rgb: [u8; 3]) -> String {
    format!("#{:02x}{:02x}{:02x}", rgb[0], rgb[1], rgb[2])
}

/// Node coordinates: stored positions, or the grid fallback.
pub fn layout(g: &Graph) -> Vec<[f64; 2]> {
    let n = g.num_nodes();
    match g.positions() {
        Some(p) => (0..n).map(|i| [p[(i, 0)], p[(i, 1)]]).collect(),
        None => {
            let cols = (n as f64).sqrt().ceil() as usize;
            (0..n).map(|i| [(i % cols) as f64, (i / cols) as f64]).collect()
        }
    }
}

fn fit_to_canvas(points: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let bounds = |k: usize| {
        points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
            (lo.min(p[k]), hi.max(p[k]))
        })
    };
    let (x0, x1) = bounds(0);
    let (y0, y1) = bounds(1);
    let span = (x1 - x0).max(y1 - y0);
    let inner = CANVAS - 2.0 * MARGIN;
    points
        .iter()
        .map(|p| {
            if span > 0.0 {
                [
                    MARGIN + (p[0] - x0) / span * inner,
                    MARGIN + (p[1] - y0) / span * inner,
                ]
            } else {
                [CANVAS / 2.0, CANVAS / 2.0]
            }
        })
        .collect()
}

type Prepared = (Vec<[f64; 2]>, Vec<f64>, Vec<(usize, usize)>);

fn prepare(g: &Graph, saliency: &[f64]) -> Result<Prepared> {
    if saliency.len() != g.num_nodes() {
        return Err(Error::dim("saliency", g.num_nodes(), saliency.len()));
    }
    let norm = minmax_normalize(&NodeVector::new(saliency.to_vec()))?.into_vec();
    let a = g.adjacency();
    let n = g.num_nodes();
    let edges = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .filter(|&(i, j)| a[(i, j)] != 0.0 || a[(j, i)] != 0.0)
        .collect();
    Ok((fit_to_canvas(&layout(g)), norm, edges))
}

pub fn render_svg(g: &Graph, saliency: &[f64]) -> Result<String> {
    let (pts, norm, edges) = prepare(g, saliency)?;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{CANVAS}" height="{CANVAS}" viewBox="0 0 {CANVAS} {CANVAS}">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(out, r##"<g stroke="#808080" stroke-width="1">"##);
    for (i, j) in edges {
        let _ = writeln!(
            out,
            r#"<line x1="{:.3}" y1="{:.3}" x2="{:.3}" y2="{:.3}"/>"#,
            pts[i][0], pts[i][1], pts[j][0], pts[j][1]
        );
    }
    let _ = writeln!(out, "</g>");
    let _ = writeln!(out, r#"<g stroke="black" stroke-width="0.5">"#);
    for (i, p) in pts.iter().enumerate() {
        let _ = writeln!(
            out,
            r#"<circle cx="{:.3}" cy="{:.3}" r="{RADIUS}" fill="{}"><title>node {i}: {}</title></circle>"#,
            p[0],
            p[1],
            colormap(norm[i]),
            saliency[i]
        );
    }
    let _ = writeln!(out, "</g>");
    out.push_str("</svg>\n");
    Ok(out)
}

pub fn render_dot(g: &Graph, saliency: &[f64]) -> Result<String> {
    let (pts, norm, edges) = prepare(g, saliency)?;
    let mut out = String::from("graph saliency {\n  node [shape=circle, style=filled];\n");
    for (i, p) in pts.iter().enumerate() {
        // DOT's y axis points up
        let _ = writeln!(
            out,
            "  {i} [pos=\"{:.3},{:.3}!\", fillcolor=\"{}\", tooltip=\"{}\"];",
            p[0],
            CANVAS - p[1],
            colormap(norm[i]),
            saliency[i]
        );
    }
    for (i, j) in edges {
        let _ = writeln!(out, "  {i} -- {j};");
    }
    out.push_str("}\n");
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::Matrix;

    #[test]
    fn colormap_endpoints_and_monotone() {
        assert_eq!(colormap(0.0), hex(LOW_COLOR));
        assert_eq!(colormap(1.0), hex(HIGH_COLOR));
        assert_eq!(colormap(2.0), hex(HIGH_COLOR));
        let red = |t: f64| u8::from_str_radix(&colormap(t)[1..3], 16).unwrap();
        let mut last = 255;
        for k in 0..=20 {
            let r = red(k as f64 / 20.0);
            assert!(r <= last);
            last = r;
        }
    }

    #[test]
    fn grid_fallback_layout() {
        let g = Graph::new(Matrix::zeros(5, 1), Matrix::zeros(5, 5)).unwrap();
        assert_eq!(
            layout(&g),
            vec![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [0.0, 1.0], [1.0, 1.0]]
        );
    }

    #[test]
    fn svg_structure() {
        let a = Matrix::from_rows(&[[0.0, 1.0, 0.0], [1.0, 0.0, 1.0], [0.0, 1.0, 0.0]]).unwrap();
        let g = Graph::new(Matrix::zeros(3, 1), a).unwrap();
        let svg = render_svg(&g, &[0.0, 3.0, 0.0]).unwrap();
        assert_eq!(svg.matches("<circle").count(), 3);
        assert_eq!(svg.matches("<line").count(), 2);
        assert_eq!(svg.matches(&hex(HIGH_COLOR)).count(), 1);
        let dot = render_dot(&g, &[0.0, 3.0, 0.0]).unwrap();
        assert!(dot.contains("0 -- 1;") && dot.contains("1 -- 2;"));
        assert!(render_svg(&g, &[0.0]).is_err());
    }

    #[test]
    fn single_node_is_centered() {
        let g = Graph::new(Matrix::zeros(1, 1), Matrix::zeros(1, 1)).unwrap();
        let svg = render_svg(&g, &[1.0]).unwrap();
        assert!(svg.contains(r#"cx="240.000" cy="240.000""#));
    }
}
