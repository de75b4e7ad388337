//! HITS hub and authority scores by power iteration on the weight matrix.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Digraph;

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HitsScores {
    pub hub: Vec<f64>,
    pub authority: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

fn normalize(v: &mut [f64]) {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
}

fn max_change(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Iterates `a ← Wᵀh`, `h ← Wa` from uniform vectors, L2-normalizing both,
/// until no entry moves by `tol` or more.
pub fn hits(g: &Digraph, tol: f64, max_iter: usize) -> Result<HitsScores> {
    if g.edge_count() == 0 || g.edges().all(|(_, _, w)| w == 0.0) {
        return Err(Error::NoEdges);
    }
    let n = g.n();
    let edges: Vec<(usize, usize, f64)> = g.edges().collect();
    let mut hub = vec![1.0 / (n as f64).sqrt(); n];
    let mut authority = hub.clone();
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        iterations += 1;
        let mut next_auth = vec![0.0; n];
        for &(u, v, w) in &edges {
            next_auth[v] += w * hub[u];
        }
        normalize(&mut next_auth);
        let mut next_hub = vec![0.0; n];
        for &(u, v, w) in &edges {
            next_hub[u] += w * next_auth[v];
        }
        normalize(&mut next_hub);
        let change = max_change(&hub, &next_hub).max(max_change(&authority, &next_auth));
        hub = next_hub;
        authority = next_auth;
        if change < tol {
            converged = true;
            break;
        }
    }
    Ok(HitsScores {
        hub,
        authority,
        iterations,
        converged,
    })
}

/// CSV `vertex,hub,authority`.
pub fn write_hits_csv<W: Write>(g: &Digraph, scores: &HitsScores, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["vertex", "hub", "authority"])?;
    for u in 0..g.n() {
        w.write_record([
            g.name(u).to_string(),
            scores.hub[u].to_string(),
            scores.authority[u].to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use nalgebra::{DMatrix, SymmetricEigen};
    use rand::Rng as _;

    fn random_graph(rng: &mut rng::Rng, n: usize) -> Digraph {
        let mut g = Digraph::with_vertices(n);
        for u in 0..n {
            for v in 0..n {
                if u != v && rng.random_bool(0.2) {
                    g.add_edge(u, v, rng.random_range(0.01..3.0)).unwrap();
                }
            }
        }
        g
    }

    fn dominant(m: DMatrix<f64>) -> Vec<f64> {
        let eig = SymmetricEigen::new(m);
        let top = eig.eigenvalues.imax();
        let v: Vec<f64> = eig.eigenvectors.column(top).iter().copied().collect();
        let sign = if v.iter().sum::<f64>() < 0.0 { -1.0 } else { 1.0 };
        v.iter().map(|x| x * sign).collect()
    }

    fn cosine(a: &[f64], b: &[f64]) -> f64 {
        let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        dot / (na * nb)
    }

    #[test]
    fn single_edge() {
        let g = Digraph::from_edges(vec!["u".into(), "v".into()], [(0, 1, 2.0)]).unwrap();
        let s = hits(&g, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        assert!(s.converged);
        assert_eq!(s.hub, vec![1.0, 0.0]);
        assert_eq!(s.authority, vec![0.0, 1.0]);
    }

    #[test]
    fn symmetric_graph_hub_equals_authority() {
        let mut rng = rng::seeded(1);
        let mut g = Digraph::with_vertices(12);
        for u in 0..12 {
            for v in u + 1..12 {
                if rng.random_bool(0.4) {
                    let w = rng.random_range(0.1..2.0);
                    g.add_edge(u, v, w).unwrap();
                    g.add_edge(v, u, w).unwrap();
                }
            }
        }
        let s = hits(&g, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        assert!(s.converged);
        assert!(max_change(&s.hub, &s.authority) < 1e-9);
    }

    #[test]
    fn agrees_with_dense_eigenvectors() {
        let mut rng = rng::seeded(2);
        for _ in 0..20 {
            let g = random_graph(&mut rng, 30);
            let w = DMatrix::from_fn(30, 30, |u, v| g.weight(u, v));
            let s = hits(&g, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
            assert!(s.converged);
            assert!(s.hub.iter().chain(&s.authority).all(|x| *x >= 0.0));
            assert!(cosine(&s.hub, &dominant(&w * w.transpose())) >= 1.0 - 1e-8);
            assert!(cosine(&s.authority, &dominant(w.transpose() * &w)) >= 1.0 - 1e-8);
        }
    }

    #[test]
    fn scale_invariant() {
        let mut rng = rng::seeded(3);
        let g = random_graph(&mut rng, 30);
        let a = hits(&g, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        for c in [1e-3, 0.5, 7.0, 1e4] {
            let b = hits(&g.scaled(c), DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
            assert!(max_change(&a.hub, &b.hub) <= 1e-12);
            assert!(max_change(&a.authority, &b.authority) <= 1e-12);
        }
    }

    #[test]
    fn edgeless_graph_is_an_error() {
        assert!(matches!(
            hits(&Digraph::with_vertices(3), DEFAULT_TOL, DEFAULT_MAX_ITER),
            Err(Error::NoEdges)
        ));
    }

    #[test]
    fn csv_rows_follow_vertices() {
        let g = Digraph::from_edges(vec!["u".into(), "v".into()], [(0, 1, 2.0)]).unwrap();
        let s = hits(&g, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        let mut buf = Vec::new();
        write_hits_csv(&g, &s, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "vertex,hub,authority\nu,1,0\nv,0,1\n");
    }
}
