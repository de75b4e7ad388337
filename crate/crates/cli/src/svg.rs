//! Static SVG figures. Coordinates are printed with fixed precision so the
//! files are byte-stable across runs.

use std::f64::consts::PI;
use std::fmt::Write as _;

use tabgraph_core::communities::HierPartition;
use tabgraph_core::graph::Digraph;
use tabgraph_core::spectral::{TorusEmbedding, TORUS_MINOR_RADIUS, TORUS_RADIUS_FLOOR};

const SIZE: f64 = 800.0;
const MARGIN: f64 = 60.0;
const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22",
    "#17becf",
];

fn color(block: usize) -> &'static str {
    PALETTE[block % PALETTE.len()]
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

fn open(title: &str) -> String {
    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    )
    .unwrap();
    writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    writeln!(
        s,
        r#"<text x="{:.1}" y="24" font-family="sans-serif" font-size="16" text-anchor="middle">{}</text>"#,
        SIZE / 2.0,
        escape(title)
    )
    .unwrap();
    s
}

fn close(mut s: String) -> String {
    s.push_str("</svg>\n");
    s
}

fn vertex(s: &mut String, x: f64, y: f64, r: f64, fill: &str, name: &str) {
    writeln!(
        s,
        r#"<circle cx="{x:.2}" cy="{y:.2}" r="{r:.2}" fill="{fill}" stroke="black" stroke-width="0.5"><title>{}</title></circle>"#,
        escape(name)
    )
    .unwrap();
}

/// Node-link drawing of `g` at layout positions in `[0, 1]²`. Edge opacity
/// follows relative weight; vertices are colored by `blocks`.
pub fn graph_svg(g: &Digraph, pos: &[[f64; 2]], blocks: &[usize], title: &str) -> String {
    let span = SIZE - 2.0 * MARGIN;
    let at = |u: usize| (MARGIN + pos[u][0] * span, MARGIN + pos[u][1] * span);
    let mut s = open(title);
    let max_w = g.edges().map(|e| e.2).fold(0.0, f64::max);
    s.push_str("<g stroke=\"#444\">\n");
    for (u, v, w) in g.edges() {
        let ((x1, y1), (x2, y2)) = (at(u), at(v));
        let opacity = if max_w > 0.0 { 0.1 + 0.9 * w / max_w } else { 0.1 };
        writeln!(
            s,
            r#"<line x1="{x1:.2}" y1="{y1:.2}" x2="{x2:.2}" y2="{y2:.2}" stroke-opacity="{opacity:.3}"/>"#
        )
        .unwrap();
    }
    s.push_str("</g>\n");
    for u in 0..g.n() {
        let (x, y) = at(u);
        vertex(&mut s, x, y, 6.0, color(blocks[u]), g.name(u));
        writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="10">{}</text>"#,
            x + 8.0,
            y + 3.0,
            escape(g.name(u))
        )
        .unwrap();
    }
    close(s)
}

/// The torus unrolled onto the square of phase pairs. Larger dots are
/// stronger hubs; vertices with an undefined phase are listed below.
pub fn torus_svg(g: &Digraph, emb: &TorusEmbedding, blocks: &[usize]) -> String {
    let span = SIZE - 2.0 * MARGIN;
    let mut s = open(&format!("magnetic eigenvector phases, q = {}", emb.q));
    writeln!(
        s,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{span}" height="{span}" fill="none" stroke="black"/>"#
    )
    .unwrap();
    for (label, x, y, anchor) in [
        ("θ1 = 0", MARGIN, SIZE - MARGIN + 18.0, "start"),
        ("θ1 = 2π", SIZE - MARGIN, SIZE - MARGIN + 18.0, "end"),
        ("θ2 = 0", MARGIN - 6.0, SIZE - MARGIN, "end"),
        ("θ2 = 2π", MARGIN - 6.0, MARGIN + 10.0, "end"),
    ] {
        writeln!(
            s,
            r#"<text x="{x:.1}" y="{y:.1}" font-family="sans-serif" font-size="12" text-anchor="{anchor}">{label}</text>"#
        )
        .unwrap();
    }
    let mut undefined = Vec::new();
    for (u, p) in emb.points.iter().enumerate() {
        match (p.theta1, p.theta2) {
            (Some(t1), Some(t2)) => {
                let x = MARGIN + t1 / (2.0 * PI) * span;
                let y = SIZE - MARGIN - t2 / (2.0 * PI) * span;
                let hubness = (TORUS_MINOR_RADIUS + TORUS_RADIUS_FLOOR - p.r) / TORUS_MINOR_RADIUS;
                vertex(&mut s, x, y, 4.0 + 8.0 * hubness, color(blocks[u]), g.name(u));
            }
            _ => undefined.push(escape(g.name(u))),
        }
    }
    if !undefined.is_empty() {
        writeln!(
            s,
            r#"<text x="{MARGIN}" y="{:.1}" font-family="sans-serif" font-size="11">undefined phase: {}</text>"#,
            SIZE - 14.0,
            undefined.join(", ")
        )
        .unwrap();
    }
    close(s)
}

/// Radial tree of the block hierarchy: vertices on the outer ring, each
/// level's blocks on an inner ring, the single top block at the center.
pub fn hierarchy_svg(g: &Digraph, part: &HierPartition) -> String {
    let n = g.n();
    let depth = part.levels.len();
    let projections: Vec<Vec<usize>> = (0..depth).map(|l| part.project(l)).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&u| {
        let path: Vec<usize> = projections.iter().rev().map(|p| p[u]).collect();
        (path, u)
    });
    let center = SIZE / 2.0;
    let outer = center - MARGIN - 20.0;
    let polar = |radius: f64, slot: f64| {
        let a = 2.0 * PI * slot / n.max(1) as f64 - PI / 2.0;
        (center + radius * a.cos(), center + radius * a.sin())
    };
    let ring = |l: usize| outer * (depth - 1 - l) as f64 / depth as f64;

    // mean leaf slot of every block on every level
    let mut slot_of = vec![0.0; n];
    for (i, &u) in order.iter().enumerate() {
        slot_of[u] = i as f64;
    }
    let block_slots: Vec<Vec<f64>> = (0..depth)
        .map(|l| {
            let b = part.blocks_per_level[l];
            let (mut sum, mut count) = (vec![0.0f64; b], vec![0.0f64; b]);
            for u in 0..n {
                sum[projections[l][u]] += slot_of[u];
                count[projections[l][u]] += 1.0;
            }
            sum.iter().zip(&count).map(|(s, c)| s / c.max(1.0)).collect()
        })
        .collect();

    let mut s = open(&format!("block hierarchy, blocks per level {:?}", part.blocks_per_level));
    s.push_str("<g stroke=\"#888\" stroke-width=\"1\">\n");
    let mut line = |a: (f64, f64), b: (f64, f64)| {
        writeln!(
            s,
            r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}"/>"#,
            a.0, a.1, b.0, b.1
        )
        .unwrap();
    };
    for u in 0..n {
        let b = part.levels[0][u];
        line(polar(outer, slot_of[u]), polar(ring(0), block_slots[0][b]));
    }
    for l in 1..depth {
        for (child, &parent) in part.levels[l].iter().enumerate() {
            line(
                polar(ring(l - 1), block_slots[l - 1][child]),
                polar(ring(l), block_slots[l][parent]),
            );
        }
    }
    s.push_str("</g>\n");
    for l in 0..depth {
        for (b, slot) in block_slots[l].iter().enumerate() {
            let (x, y) = polar(ring(l), *slot);
            writeln!(
                s,
                r##"<circle cx="{x:.2}" cy="{y:.2}" r="5" fill="#ddd" stroke="black"><title>level {l} block {b}</title></circle>"##
            )
            .unwrap();
        }
    }
    for u in 0..n {
        let (x, y) = polar(outer, slot_of[u]);
        vertex(&mut s, x, y, 6.0, color(part.levels[0][u]), g.name(u));
        let (lx, ly) = polar(outer + 14.0, slot_of[u]);
        writeln!(
            s,
            r#"<text x="{lx:.2}" y="{ly:.2}" font-family="sans-serif" font-size="10" text-anchor="middle">{}</text>"#,
            escape(g.name(u))
        )
        .unwrap();
    }
    close(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Digraph {
        Digraph::from_edges(
            vec!["a<b".into(), "c".into(), "d".into()],
            [(0, 1, 1.0), (1, 2, 0.5), (2, 0, 2.0)],
        )
        .unwrap()
    }

    #[test]
    fn graph_svg_escapes_names() {
        let g = sample();
        let s = graph_svg(&g, &[[0.0, 0.0], [1.0, 0.5], [0.5, 1.0]], &[0, 1, 0], "t & u");
        assert!(s.starts_with("<svg"));
        assert!(s.ends_with("</svg>\n"));
        assert!(s.contains("a&lt;b"));
        assert!(s.contains("t &amp; u"));
        assert_eq!(s.matches("<line").count(), 3);
        assert_eq!(s.matches("<circle").count(), 3);
    }

    #[test]
    fn hierarchy_draws_every_block() {
        let g = sample();
        let part = HierPartition::new(vec![vec![0, 0, 1], vec![0, 0]], 3).unwrap();
        let s = hierarchy_svg(&g, &part);
        // three vertices, two level-0 blocks, one root
        assert_eq!(s.matches("<circle").count(), 6);
        assert_eq!(s.matches("<line").count(), 3 + 2);
    }
}
