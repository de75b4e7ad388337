//! Magnetic Laplacians of weighted digraphs, a dense Hermitian eigensolver,
//! the toroidal phase embedding and the circular frustration functional.
//!
//! With `w_s`, `w_a` the symmetric and antisymmetric parts of the weights,
//! `a(v,u) = 2·w_a(u,v)` and `γ_q(u,v) = exp(2πi·q·a(v,u))`, the magnetic
//! Laplacian has diagonal `d(u) = Σ_v w_s(u,v)` and off-diagonal entries
//! `−w_s(u,v)·γ_q(u,v)`. The normalized form divides entries by
//! `sqrt(d(u)·d(v))`, which keeps it Hermitian.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{decompose, induced_subgraph, Digraph};

pub const DEFAULT_CHARGE: f64 = 0.1;
pub const TORUS_MAJOR_RADIUS: f64 = 3.0;
pub const TORUS_MINOR_RADIUS: f64 = 1.0;
pub const TORUS_RADIUS_FLOOR: f64 = 0.1;

const HERMITIAN_TOL: f64 = 1e-12;

/// Dense complex matrix with `H[u][v] == conj(H[v][u])`.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix {
    n: usize,
    data: Vec<Complex64>,
}

impl HermitianMatrix {
    /// Checked constructor from row-major entries.
    pub fn new(n: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::InvalidArgument(format!(
                "expected {} entries, got {}",
                n * n,
                data.len()
            )));
        }
        let mut worst = 0.0f64;
        for u in 0..n {
            for v in u..n {
                worst = worst.max((data[u * n + v] - data[v * n + u].conj()).norm());
            }
        }
        if worst > HERMITIAN_TOL {
            return Err(Error::NotHermitian(worst));
        }
        Ok(Self { n, data })
    }

    /// Build from the upper triangle; the lower triangle is its conjugate and
    /// the diagonal keeps only its real part.
    pub fn from_upper(n: usize, mut entry: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = vec![Complex64::new(0.0, 0.0); n * n];
        for u in 0..n {
            data[u * n + u] = Complex64::new(entry(u, u).re, 0.0);
            for v in u + 1..n {
                let z = entry(u, v);
                data[u * n + v] = z;
                data[v * n + u] = z.conj();
            }
        }
        Self { n, data }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, u: usize, v: usize) -> Complex64 {
        self.data[u * self.n + v]
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn mul_vec(&self, x: &[Complex64]) -> Vec<Complex64> {
        (0..self.n)
            .map(|u| {
                self.data[u * self.n..(u + 1) * self.n]
                    .iter()
                    .zip(x)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect()
    }

    /// `x* H x`, real for Hermitian `H`.
    pub fn quadratic_form(&self, x: &[Complex64]) -> f64 {
        self.mul_vec(x)
            .iter()
            .zip(x)
            .map(|(hx, xi)| (xi.conj() * hx).re)
            .sum()
    }
}

pub fn magnetic_laplacian(g: &Digraph, q: f64, normalized: bool) -> Result<HermitianMatrix> {
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::InvalidArgument(format!(
            "charge must lie in [0, 1], got {q}"
        )));
    }
    let dec = decompose(g);
    let degrees = dec.degrees();
    if normalized {
        if let Some(u) = degrees.iter().position(|d| *d <= 0.0) {
            return Err(Error::IsolatedVertex(g.name(u).to_string()));
        }
    }
    Ok(HermitianMatrix::from_upper(g.n(), |u, v| {
        if u == v {
            let d = if normalized { 1.0 } else { degrees[u] };
            return Complex64::new(d, 0.0);
        }
        let ws = dec.sym(u, v);
        if ws == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        let phase = Complex64::from_polar(1.0, 2.0 * PI * q * dec.flow(v, u));
        let scale = if normalized {
            (degrees[u] * degrees[v]).sqrt()
        } else {
            1.0
        };
        -phase * (ws / scale)
    }))
}

/// Ascending eigenpairs of a Hermitian matrix.
#[derive(Debug, Clone)]
pub struct SpectralResult {
    pub eigenvalues: Vec<f64>,
    /// Unit-norm, largest-magnitude component real and positive.
    pub eigenvectors: Vec<Vec<Complex64>>,
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn fix_gauge(v: &mut [Complex64]) {
    let max = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if max == 0.0 {
        return;
    }
    // first near-maximal component, so exact ties resolve by index
    let pivot = v
        .iter()
        .position(|z| z.norm() >= max * (1.0 - 1e-9))
        .expect("maximum exists");
    let rot = v[pivot].conj() / v[pivot].norm();
    v.iter_mut().for_each(|z| *z *= rot);
    v[pivot] = Complex64::new(v[pivot].re, 0.0);
}

/// The `k` smallest eigenpairs, via the real symmetric matrix
/// `[[Re H, −Im H], [Im H, Re H]]`, whose spectrum is that of `H` with every
/// eigenvalue doubled.
pub fn hermitian_eigs(h: &HermitianMatrix, k: usize) -> Result<SpectralResult> {
    let n = h.n();
    if k > n {
        return Err(Error::InvalidArgument(format!(
            "requested {k} eigenpairs of a {n}×{n} matrix"
        )));
    }
    let real = DMatrix::from_fn(2 * n, 2 * n, |i, j| {
        let z = h.get(i % n, j % n);
        match (i < n, j < n) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    });
    let eig = SymmetricEigen::new(real);
    let mut order: Vec<usize> = (0..2 * n).collect();
    order.sort_by(|a, b| eig.eigenvalues[*a].total_cmp(&eig.eigenvalues[*b]));

    let tol = 1e-9 * h.frobenius_norm().max(1.0);
    let mut eigenvalues = Vec::with_capacity(n);
    let mut eigenvectors: Vec<Vec<Complex64>> = Vec::with_capacity(n);
    let mut start = 0;
    while start < order.len() && eigenvectors.len() < k {
        let mut end = start + 1;
        while end < order.len()
            && eig.eigenvalues[order[end]] - eig.eigenvalues[order[end - 1]] <= tol
        {
            end += 1;
        }
        // complex Gram–Schmidt inside the cluster, largest residual first
        let mut candidates: Vec<Vec<Complex64>> = order[start..end]
            .iter()
            .map(|&c| {
                let col = eig.eigenvectors.column(c);
                (0..n).map(|i| Complex64::new(col[i], col[i + n])).collect()
            })
            .collect();
        let mut picked: Vec<Vec<Complex64>> = Vec::new();
        loop {
            for cand in candidates.iter_mut() {
                if let Some(last) = picked.last() {
                    let proj = dot(last, cand);
                    cand.iter_mut().zip(last).for_each(|(c, l)| *c -= proj * l);
                }
            }
            let Some((best, size)) = candidates
                .iter()
                .map(|c| norm(c))
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(&b.1))
            else {
                break;
            };
            if size <= 1e-3 {
                break;
            }
            let mut v = candidates.swap_remove(best);
            v.iter_mut().for_each(|z| *z /= size);
            picked.push(v);
        }
        for mut v in picked {
            fix_gauge(&mut v);
            eigenvalues.push(h.quadratic_form(&v));
            eigenvectors.push(v);
        }
        start = end;
    }
    let mut pairs: Vec<(f64, Vec<Complex64>)> = eigenvalues.into_iter().zip(eigenvectors).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.truncate(k);
    let (eigenvalues, eigenvectors) = pairs.into_iter().unzip();
    Ok(SpectralResult {
        eigenvalues,
        eigenvectors,
    })
}

/// `η = (1/(2·vol)) Σ_{u,v} w_s(u,v)·|e^{iθ(u)} − γ_q(u,v)·e^{iθ(v)}|²`
/// over ordered pairs, with `vol = Σ_u d(u)`.
pub fn frustration(g: &Digraph, q: f64, theta: &[f64]) -> Result<f64> {
    if theta.len() != g.n() {
        return Err(Error::InvalidArgument(format!(
            "{} angles for {} vertices",
            theta.len(),
            g.n()
        )));
    }
    let dec = decompose(g);
    let vol = dec.volume();
    if vol <= 0.0 {
        return Err(Error::ZeroVolume);
    }
    let mut total = 0.0;
    for u in 0..g.n() {
        for v in 0..g.n() {
            let ws = dec.sym(u, v);
            if u == v || ws == 0.0 {
                continue;
            }
            let gamma = Complex64::from_polar(1.0, 2.0 * PI * q * dec.flow(v, u));
            let diff = Complex64::from_polar(1.0, theta[u]) - gamma * Complex64::from_polar(1.0, theta[v]);
            total += ws * diff.norm_sqr();
        }
    }
    Ok(total / (2.0 * vol))
}

fn phase(z: Complex64, scale: f64) -> Option<f64> {
    (z.norm() > 1e-12 * scale).then(|| z.arg().rem_euclid(2.0 * PI))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TorusPoint {
    /// Phase of the lowest eigenvector; `None` where its component vanishes.
    pub theta1: Option<f64>,
    /// Phase of the second eigenvector.
    pub theta2: Option<f64>,
    pub r: f64,
    pub xyz: Option<[f64; 3]>,
    /// Weak component the vertex belongs to, in order of first vertex.
    pub component: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TorusEmbedding {
    pub q: f64,
    pub points: Vec<TorusPoint>,
}

/// Phases of the two lowest eigenvectors of the normalized magnetic
/// Laplacian, computed per weak component, placed on a torus whose tube
/// radius shrinks with the hub score. Isolated vertices get no phases.
pub fn torus_embedding(g: &Digraph, q: f64, hub: &[f64]) -> Result<TorusEmbedding> {
    if hub.len() != g.n() {
        return Err(Error::InvalidArgument(format!(
            "{} hub scores for {} vertices",
            hub.len(),
            g.n()
        )));
    }
    let max_hub = hub.iter().cloned().fold(0.0, f64::max);
    let mut points: Vec<TorusPoint> = hub
        .iter()
        .map(|h| TorusPoint {
            theta1: None,
            theta2: None,
            r: TORUS_MINOR_RADIUS * (1.0 - if max_hub > 0.0 { h / max_hub } else { 0.0 })
                + TORUS_RADIUS_FLOOR,
            xyz: None,
            component: 0,
        })
        .collect();
    for (c, members) in g.weak_components().into_iter().enumerate() {
        for &u in &members {
            points[u].component = c;
        }
        if members.len() < 2 {
            continue;
        }
        let sub = induced_subgraph(g, &members)?;
        let h = magnetic_laplacian(&sub, q, true)?;
        let spec = hermitian_eigs(&h, 2)?;
        let scale = |v: &[Complex64]| v.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let (s1, s2) = (scale(&spec.eigenvectors[0]), scale(&spec.eigenvectors[1]));
        for (i, &u) in members.iter().enumerate() {
            let p = &mut points[u];
            p.theta1 = phase(spec.eigenvectors[0][i], s1);
            p.theta2 = phase(spec.eigenvectors[1][i], s2);
            if let (Some(t1), Some(t2)) = (p.theta1, p.theta2) {
                let ring = TORUS_MAJOR_RADIUS + p.r * t2.cos();
                p.xyz = Some([ring * t1.cos(), ring * t1.sin(), p.r * t2.sin()]);
            }
        }
    }
    Ok(TorusEmbedding { q, points })
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// CSV `vertex,theta1,theta2,r,x,y,z`; undefined phases are empty fields.
pub fn write_embedding_csv<W: Write>(g: &Digraph, emb: &TorusEmbedding, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["vertex", "theta1", "theta2", "r", "x", "y", "z"])?;
    for (u, p) in emb.points.iter().enumerate() {
        let [x, y, z] = p.xyz.map_or([None; 3], |c| c.map(Some));
        w.write_record([
            g.name(u).to_string(),
            opt(p.theta1),
            opt(p.theta2),
            p.r.to_string(),
            opt(x),
            opt(y),
            opt(z),
        ])?;
    }
    w.flush()?;
    Ok(())
}
