//! Random-walk vertex embeddings: second-order biased walks over out-edges
//! and skip-gram training with negative sampling.

use std::io::Write;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{decompose, Digraph};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WalkParams {
    pub walk_length: usize,
    pub walks_per_vertex: usize,
    /// Return parameter: stepping back to the previous vertex has bias `1/p`.
    pub p: f64,
    /// In-out parameter: moving away from the previous vertex has bias `1/q`.
    pub q: f64,
    /// Walk the symmetrized graph instead of following edge direction.
    pub symmetrize: bool,
}

impl Default for WalkParams {
    fn default() -> Self {
        Self {
            walk_length: 80,
            walks_per_vertex: 10,
            p: 1.0,
            q: 1.0,
            symmetrize: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WalkCorpus {
    /// Ordered by round, then start vertex.
    pub walks: Vec<Vec<usize>>,
    pub n_vertices: usize,
    pub params: WalkParams,
    pub seed: u64,
}

fn walk_from(
    start: usize,
    adjacency: &[Vec<(usize, f64)>],
    linked: &[Vec<bool>],
    params: &WalkParams,
    rng: &mut rng::Rng,
) -> Vec<usize> {
    let mut walk = Vec::with_capacity(params.walk_length);
    walk.push(start);
    let mut weights = Vec::new();
    while walk.len() < params.walk_length {
        let here = *walk.last().expect("walk is nonempty");
        let options = &adjacency[here];
        if options.is_empty() {
            break;
        }
        let prev = (walk.len() >= 2).then(|| walk[walk.len() - 2]);
        weights.clear();
        weights.extend(options.iter().map(|&(x, w)| match prev {
            None => w,
            Some(t) if x == t => w / params.p,
            Some(t) if linked[t][x] => w,
            Some(_) => w / params.q,
        }));
        let total: f64 = weights.iter().sum();
        let mut target = rng.random::<f64>() * total;
        let mut pick = options.len() - 1;
        for (k, w) in weights.iter().enumerate() {
            if target < *w {
                pick = k;
                break;
            }
            target -= w;
        }
        walk.push(options[pick].0);
    }
    walk
}

/// `walks_per_vertex` walks from every vertex. Each start vertex draws from
/// its own seeded stream, so the corpus does not depend on thread count.
pub fn generate_walks(g: &Digraph, params: &WalkParams, seed: u64) -> Result<WalkCorpus> {
    if g.edges().all(|(_, _, w)| w <= 0.0) {
        return Err(Error::NoEdges);
    }
    if !(params.p > 0.0 && params.q > 0.0) || params.walk_length == 0 {
        return Err(Error::InvalidArgument(
            "p and q must be positive and walk_length nonzero".into(),
        ));
    }
    let n = g.n();
    let adjacency: Vec<Vec<(usize, f64)>> = if params.symmetrize {
        let dec = decompose(g);
        (0..n)
            .map(|u| {
                (0..n)
                    .filter(|v| *v != u && dec.sym(u, *v) > 0.0)
                    .map(|v| (v, dec.sym(u, v)))
                    .collect()
            })
            .collect()
    } else {
        g.out_adjacency()
            .into_iter()
            .map(|a| a.into_iter().filter(|(_, w)| *w > 0.0).collect())
            .collect()
    };
    let mut linked = vec![vec![false; n]; n];
    for (u, a) in adjacency.iter().enumerate() {
        for (v, _) in a {
            linked[u][*v] = true;
        }
    }
    let per_vertex: Vec<Vec<Vec<usize>>> = (0..n)
        .into_par_iter()
        .map(|v| {
            let mut rng = rng::seeded(rng::derive(seed, v as u64));
            (0..params.walks_per_vertex)
                .map(|_| walk_from(v, &adjacency, &linked, params, &mut rng))
                .collect()
        })
        .collect();
    let mut walks = Vec::with_capacity(n * params.walks_per_vertex);
    for round in 0..params.walks_per_vertex {
        for vertex_walks in &per_vertex {
            walks.push(vertex_walks[round].clone());
        }
    }
    Ok(WalkCorpus {
        walks,
        n_vertices: n,
        params: *params,
        seed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmbedParams {
    pub dims: usize,
    pub window: usize,
    pub negative: usize,
    pub epochs: usize,
    pub learning_rate: f64,
}

impl Default for EmbedParams {
    fn default() -> Self {
        Self {
            dims: 64,
            window: 5,
            negative: 5,
            epochs: 5,
            learning_rate: 0.025,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingTable {
    pub names: Vec<String>,
    pub vectors: Vec<Vec<f64>>,
}

impl EmbeddingTable {
    pub fn dims(&self) -> usize {
        self.vectors.first().map_or(0, Vec::len)
    }

    pub fn cosine(&self, u: usize, v: usize) -> f64 {
        cosine(&self.vectors[u], &self.vectors[v])
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    dot / (na * nb)
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Skip-gram with negative sampling over every (center, context) pair within
/// `window` positions. Negatives come from corpus frequencies raised to 3/4.
/// Training is sequential, so results depend only on the seed.
pub fn train_embeddings(
    corpus: &WalkCorpus,
    names: &[String],
    params: &EmbedParams,
    seed: u64,
) -> Result<EmbeddingTable> {
    let n = corpus.n_vertices;
    if corpus.walks.is_empty() {
        return Err(Error::Empty("walk corpus".into()));
    }
    if names.len() != n {
        return Err(Error::InvalidArgument(format!(
            "{} names for {n} vertices",
            names.len()
        )));
    }
    if params.dims == 0 || params.epochs == 0 {
        return Err(Error::InvalidArgument("dims and epochs must be positive".into()));
    }
    let dims = params.dims;
    let mut rng = rng::seeded(seed);
    let mut input: Vec<f64> = (0..n * dims)
        .map(|_| (rng.random::<f64>() - 0.5) / dims as f64)
        .collect();
    let mut output = vec![0.0; n * dims];

    let mut freq = vec![0.0f64; n];
    corpus.walks.iter().flatten().for_each(|v| freq[*v] += 1.0);
    let noise = WeightedIndex::new(freq.iter().map(|f| f.powf(0.75)))
        .map_err(|e| Error::InvalidArgument(format!("negative sampling table: {e}")))?;

    let tokens: usize = corpus.walks.iter().map(Vec::len).sum();
    let total = (tokens * params.epochs) as f64;
    let mut seen = 0usize;
    let mut grad = vec![0.0; dims];
    for _ in 0..params.epochs {
        for walk in &corpus.walks {
            for (i, &center) in walk.iter().enumerate() {
                let lr = params.learning_rate * (1.0 - seen as f64 / total).max(1e-4);
                seen += 1;
                let lo = i.saturating_sub(params.window);
                let hi = (i + params.window + 1).min(walk.len());
                for (j, &context) in walk.iter().enumerate().take(hi).skip(lo) {
                    if j == i {
                        continue;
                    }
                    grad.iter_mut().for_each(|g| *g = 0.0);
                    let c = &input[center * dims..(center + 1) * dims];
                    let c: Vec<f64> = c.to_vec();
                    for d in 0..=params.negative {
                        let (target, label) = if d == 0 {
                            (context, 1.0)
                        } else {
                            let t = noise.sample(&mut rng);
                            if t == context {
                                continue;
                            }
                            (t, 0.0)
                        };
                        let out = &mut output[target * dims..(target + 1) * dims];
                        let f: f64 = c.iter().zip(out.iter()).map(|(a, b)| a * b).sum();
                        let g = (label - sigmoid(f)) * lr;
                        for k in 0..dims {
                            grad[k] += g * out[k];
                            out[k] += g * c[k];
                        }
                    }
                    input[center * dims..(center + 1) * dims]
                        .iter_mut()
                        .zip(&grad)
                        .for_each(|(x, g)| *x += g);
                }
            }
        }
    }
    let vectors: Vec<Vec<f64>> = input.chunks(dims).map(<[f64]>::to_vec).collect();
    if vectors.iter().flatten().any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument("training diverged".into()));
    }
    Ok(EmbeddingTable {
        names: names.to_vec(),
        vectors,
    })
}

/// The `k` vertices most cosine-similar to `vertex`, excluding itself.
/// Ties go to the lower vertex id.
pub fn most_similar(table: &EmbeddingTable, vertex: usize, k: usize) -> Result<Vec<(usize, f64)>> {
    let n = table.vectors.len();
    if vertex >= n {
        return Err(Error::UnknownVertex(vertex.to_string()));
    }
    if k >= n {
        return Err(Error::InvalidArgument(format!(
            "k = {k} must be below the vertex count {n}"
        )));
    }
    let mut scored: Vec<(usize, f64)> = (0..n)
        .filter(|v| *v != vertex)
        .map(|v| (v, table.cosine(vertex, v)))
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    scored.truncate(k);
    Ok(scored)
}

pub fn most_similar_by_name(table: &EmbeddingTable, name: &str, k: usize) -> Result<Vec<(String, f64)>> {
    let v = table
        .index_of(name)
        .ok_or_else(|| Error::UnknownVertex(name.to_string()))?;
    Ok(most_similar(table, v, k)?
        .into_iter()
        .map(|(u, c)| (table.names[u].clone(), c))
        .collect())
}

/// CSV `vertex,v0,…,v{d−1}`.
pub fn write_embeddings_csv<W: Write>(table: &EmbeddingTable, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["vertex".to_string()];
    header.extend((0..table.dims()).map(|d| format!("v{d}")));
    w.write_record(&header)?;
    for (name, v) in table.names.iter().zip(&table.vectors) {
        let mut rec = vec![name.clone()];
        rec.extend(v.iter().map(f64::to_string));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
