//! Fruchterman–Reingold force-directed layout.

use rand::Rng as _;
use tabgraph_core::graph::{decompose, Digraph};
use tabgraph_core::rng;

/// Positions in `[0, 1]²` for every vertex. Forces act on the symmetrized
/// graph with attraction scaled by relative edge weight; the temperature
/// cools linearly to zero over `iterations` steps.
pub fn fr_layout(g: &Digraph, iterations: usize, seed: u64) -> Vec<[f64; 2]> {
    let n = g.n();
    if n == 0 {
        return Vec::new();
    }
    if n == 1 {
        return vec![[0.5, 0.5]];
    }
    let dec = decompose(g);
    let mut springs = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            let w = dec.sym(u, v);
            if w > 0.0 {
                springs.push((u, v, w));
            }
        }
    }
    let max_w = springs.iter().map(|s| s.2).fold(0.0, f64::max);
    let k = (1.0 / n as f64).sqrt();
    let mut rng = rng::seeded(seed);
    let mut pos: Vec<[f64; 2]> = (0..n).map(|_| [rng.random(), rng.random()]).collect();
    let mut disp = vec![[0.0; 2]; n];
    for it in 0..iterations {
        let temperature = 0.1 * (1.0 - it as f64 / iterations as f64);
        disp.iter_mut().for_each(|d| *d = [0.0; 2]);
        for u in 0..n {
            for v in u + 1..n {
                let dx = pos[u][0] - pos[v][0];
                let dy = pos[u][1] - pos[v][1];
                let d2 = (dx * dx + dy * dy).max(1e-12);
                let f = k * k / d2;
                disp[u][0] += dx * f;
                disp[u][1] += dy * f;
                disp[v][0] -= dx * f;
                disp[v][1] -= dy * f;
            }
        }
        for &(u, v, w) in &springs {
            let dx = pos[u][0] - pos[v][0];
            let dy = pos[u][1] - pos[v][1];
            let d = (dx * dx + dy * dy).sqrt();
            let f = d / k * (w / max_w);
            disp[u][0] -= dx * f;
            disp[u][1] -= dy * f;
            disp[v][0] += dx * f;
            disp[v][1] += dy * f;
        }
        for (p, d) in pos.iter_mut().zip(&disp) {
            let len = (d[0] * d[0] + d[1] * d[1]).sqrt();
            if len > 0.0 {
                let step = len.min(temperature);
                p[0] += d[0] / len * step;
                p[1] += d[1] / len * step;
            }
        }
    }
    normalize(&mut pos);
    pos
}

/// Min-max scale each axis onto `[0, 1]`; a flat axis maps to 0.5.
fn normalize(pos: &mut [[f64; 2]]) {
    for axis in 0..2 {
        let lo = pos.iter().map(|p| p[axis]).fold(f64::INFINITY, f64::min);
        let hi = pos.iter().map(|p| p[axis]).fold(f64::NEG_INFINITY, f64::max);
        for p in pos.iter_mut() {
            p[axis] = if hi > lo { (p[axis] - lo) / (hi - lo) } else { 0.5 };
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_cliques() -> Digraph {
        let mut g = Digraph::with_vertices(10);
        for c in 0..2 {
            for u in c * 5..(c + 1) * 5 {
                for v in c * 5..(c + 1) * 5 {
                    if u != v {
                        g.add_edge(u, v, 1.0).unwrap();
                    }
                }
            }
        }
        g
    }

    fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
        ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
    }

    #[test]
    fn single_vertex_is_centered() {
        assert_eq!(fr_layout(&Digraph::with_vertices(1), 500, 1), vec![[0.5, 0.5]]);
        assert!(fr_layout(&Digraph::with_vertices(0), 500, 1).is_empty());
    }

    #[test]
    fn cliques_stay_together() {
        let g = two_cliques();
        let pos = fr_layout(&g, 500, 3);
        let (mut within, mut cross) = (Vec::new(), Vec::new());
        for u in 0..10 {
            for v in u + 1..10 {
                let d = dist(pos[u], pos[v]);
                if u / 5 == v / 5 { within.push(d) } else { cross.push(d) }
            }
        }
        let mean = |x: &[f64]| x.iter().sum::<f64>() / x.len() as f64;
        assert!(mean(&within) < mean(&cross));
        assert!(pos.iter().flatten().all(|x| (0.0..=1.0).contains(x)));
    }

    #[test]
    fn deterministic_under_seed() {
        let g = two_cliques();
        assert_eq!(fr_layout(&g, 200, 9), fr_layout(&g, 200, 9));
        assert_ne!(fr_layout(&g, 200, 9), fr_layout(&g, 200, 10));
    }
}
