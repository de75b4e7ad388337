//! Disparity-filter backbone on out-edges.
//!
//! For a source `u` with out-strength `s(u)` and `k` positive out-edges, an
//! edge of weight `w` has normalized weight `p = w/s(u)` and significance
//! `(1 − p)^(k−1)`, the probability that a uniform random split of `s(u)`
//! across `k` edges gives this edge a share at least `p`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Digraph;

pub const DEFAULT_ALPHA: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DisparityScore {
    pub source: usize,
    pub target: usize,
    pub weight: f64,
    pub p: f64,
    pub w_alpha: f64,
    pub k_out: usize,
}

/// Significance of a normalized weight `p` at a source with `k_out` edges.
/// A sole out-edge scores 0 and is therefore always retained.
pub fn disparity_pvalue(p: f64, k_out: usize) -> f64 {
    if k_out <= 1 {
        return 0.0;
    }
    (1.0 - p).max(0.0).powi(k_out as i32 - 1)
}

/// Scores of every positive-weight edge, in edge order.
pub fn disparity_scores(g: &Digraph) -> Vec<DisparityScore> {
    let mut out = Vec::with_capacity(g.edge_count());
    for u in 0..g.n() {
        let edges: Vec<(usize, f64)> = g.out_edges(u).filter(|(_, w)| *w > 0.0).collect();
        let strength: f64 = edges.iter().map(|(_, w)| w).sum();
        let k_out = edges.len();
        for (v, w) in edges {
            let p = (w / strength).min(1.0);
            out.push(DisparityScore {
                source: u,
                target: v,
                weight: w,
                p,
                w_alpha: disparity_pvalue(p, k_out),
                k_out,
            });
        }
    }
    out
}

/// Keep the edges with `w_alpha ≤ alpha`; the vertex set is unchanged.
pub fn backbone(g: &Digraph, alpha: f64) -> Result<Digraph> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "alpha must lie in (0, 1], got {alpha}"
        )));
    }
    let mut out = Digraph::new(g.names().to_vec())?;
    for s in disparity_scores(g) {
        if s.w_alpha <= alpha {
            out.add_edge(s.source, s.target, s.weight)?;
        }
    }
    Ok(out)
}

/// CSV with header `source,target,weight,p,w_alpha,k_out`, vertices by name.
pub fn write_scores_csv<W: Write>(g: &Digraph, scores: &[DisparityScore], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["source", "target", "weight", "p", "w_alpha", "k_out"])?;
    for s in scores {
        w.write_record([
            g.name(s.source).to_string(),
            g.name(s.target).to_string(),
            s.weight.to_string(),
            s.p.to_string(),
            s.w_alpha.to_string(),
            s.k_out.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
