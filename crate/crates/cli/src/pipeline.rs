//! Stage runners and the end-to-end pipeline.
//!
//! Every artifact goes through [`Artifacts`], which hashes what it writes.
//! A failed run leaves its earlier outputs in place next to a `FAILED` file
//! naming the stage and the error.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};
use tabgraph_core::centrality::{hits, write_hits_csv, HitsScores, DEFAULT_MAX_ITER, DEFAULT_TOL};
use tabgraph_core::communities::{infer_best_of, quantize, score_parts, HierPartition};
use tabgraph_core::diagnostics::Diagnostic;
use tabgraph_core::embed::{generate_walks, train_embeddings, write_embeddings_csv, EmbeddingTable};
use tabgraph_core::graph::{export, import, Digraph, Format};
use tabgraph_core::interp_graph::{build_global_graph, InterpBuild};
use tabgraph_core::rng;
use tabgraph_core::sparsify::{backbone, disparity_scores, write_scores_csv};
use tabgraph_core::spectral::{torus_embedding, write_embedding_csv, TorusEmbedding};
use tabgraph_core::tabular::{encode, load_csv, ColumnSpec, EncodedTable};

use crate::config::{ConfigError, PipelineConfig, SpectralGraph};
use crate::layout::fr_layout;
use crate::svg;

pub const FAILED_MARKER: &str = "FAILED";
pub const RUN_MANIFEST: &str = "run_manifest.json";

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: tabgraph_core::Error,
    },
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: io::Error },
}

impl PipelineError {
    /// 2 for configuration problems, 3 for a failing stage.
    pub fn exit_code(&self) -> u8 {
        match self {
            PipelineError::Config(_) => 2,
            _ => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, PipelineError>;

trait InStage<T> {
    fn in_stage(self, stage: &'static str) -> Result<T>;
}

impl<T> InStage<T> for tabgraph_core::Result<T> {
    fn in_stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|source| PipelineError::Stage { stage, source })
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ArtifactRecord {
    pub file: String,
    pub sha256: String,
}

/// Output directory plus the ordered record of files written into it.
#[derive(Debug)]
pub struct Artifacts {
    dir: PathBuf,
    records: Vec<ArtifactRecord>,
}

impl Artifacts {
    /// Create `dir` and clear the markers of any previous run.
    pub fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|source| PipelineError::Write {
            path: dir.to_path_buf(),
            source,
        })?;
        for stale in [FAILED_MARKER, RUN_MANIFEST] {
            let path = dir.join(stale);
            if path.exists() {
                fs::remove_file(&path).map_err(|source| PipelineError::Write { path, source })?;
            }
        }
        Ok(Self {
            dir: dir.to_path_buf(),
            records: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn records(&self) -> &[ArtifactRecord] {
        &self.records
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(|source| PipelineError::Write { path, source })?;
        self.records.push(ArtifactRecord {
            file: name.to_string(),
            sha256: sha256_hex(bytes),
        });
        Ok(())
    }

    fn write_with(&mut self, name: &str, f: impl FnOnce(&mut Vec<u8>) -> tabgraph_core::Result<()>) -> Result<()> {
        let mut buf = Vec::new();
        f(&mut buf).in_stage("export")?;
        self.write(name, &buf)
    }

    /// Leave the `FAILED` marker. Errors here are reported but not fatal,
    /// since the run has already failed.
    pub fn mark_failed(&self, err: &PipelineError) {
        let path = self.dir.join(FAILED_MARKER);
        if let Err(e) = fs::write(&path, format!("{err}\n")) {
            eprintln!("cannot write {}: {e}", path.display());
        }
    }
}

/// Seeds of every stochastic stage, derived from the master seed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StageSeeds {
    pub master: u64,
    pub nsbm_candidates: Vec<u64>,
    pub walks: u64,
    pub embedding: u64,
    pub layout: u64,
}

impl StageSeeds {
    pub fn new(cfg: &PipelineConfig) -> Self {
        let m = cfg.master_seed;
        Self {
            master: m,
            nsbm_candidates: (0..cfg.nsbm_restarts as u64).map(|i| rng::derive(m, 100 + i)).collect(),
            walks: rng::derive(m, 1),
            embedding: rng::derive(m, 2),
            layout: rng::derive(m, 3),
        }
    }
}

pub fn to_json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(value).expect("plain data serializes");
    s.push('\n');
    s.into_bytes()
}

/// Load and encode the configured input. Returns the table, the ingest
/// diagnostics and the input's hash.
pub fn ingest(cfg: &PipelineConfig) -> Result<(EncodedTable, Vec<Diagnostic>, String)> {
    let path = cfg
        .input
        .as_ref()
        .ok_or_else(|| ConfigError::Invalid("no input table given".into()))?;
    let bytes = fs::read(path).map_err(|e| PipelineError::Stage {
        stage: "ingest",
        source: e.into(),
    })?;
    let raw = load_csv(path, cfg.header).in_stage("ingest")?;
    let encoded = encode(&raw, &cfg.encode).in_stage("ingest")?;
    Ok((encoded.table, encoded.diagnostics, sha256_hex(&bytes)))
}

#[derive(Serialize)]
struct TableManifest<'a> {
    n_rows: usize,
    n_columns: usize,
    columns: &'a [ColumnSpec],
}

pub fn write_table_manifest(art: &mut Artifacts, table: &EncodedTable) -> Result<()> {
    art.write(
        "table.json",
        &to_json_bytes(&TableManifest {
            n_rows: table.n_rows(),
            n_columns: table.n_cols(),
            columns: table.specs(),
        }),
    )
}

pub fn write_graph(art: &mut Artifacts, stem: &str, g: &Digraph) -> Result<()> {
    art.write(&format!("{stem}.graphml"), export(g, Format::GraphMl).as_bytes())?;
    art.write(&format!("{stem}.json"), export(g, Format::Json).as_bytes())
}

pub fn write_diagnostics(art: &mut Artifacts, diags: &[Diagnostic]) -> Result<()> {
    let text: String = diags.iter().map(|d| d.to_json_line() + "\n").collect();
    art.write("diagnostics.jsonl", text.as_bytes())
}

/// Read a graph, choosing the format from the file extension.
pub fn read_graph(path: &Path) -> Result<Digraph> {
    let format = match path.extension().and_then(|e| e.to_str()) {
        Some(ext) => ext.parse::<Format>(),
        None => Err(tabgraph_core::Error::InvalidArgument(format!(
            "cannot tell the format of {}",
            path.display()
        ))),
    }
    .map_err(|e| ConfigError::Invalid(e.to_string()))?;
    let text = fs::read_to_string(path).map_err(|e| ConfigError::Invalid(format!("{}: {e}", path.display())))?;
    import(&text, format).in_stage("load graph")
}

pub fn build_stage(art: &mut Artifacts, cfg: &PipelineConfig, table: &EncodedTable) -> Result<InterpBuild> {
    let build = build_global_graph(table, &cfg.gbm, cfg.master_seed).in_stage("build-graph")?;
    let mut manifest = build.manifest().to_json();
    manifest.push('\n');
    art.write("models.json", manifest.as_bytes())?;
    write_graph(art, "graph", &build.graph)?;
    Ok(build)
}

pub fn hits_stage(art: &mut Artifacts, g: &Digraph) -> Result<HitsScores> {
    let scores = hits(g, DEFAULT_TOL, DEFAULT_MAX_ITER).in_stage("hits")?;
    art.write_with("hits.csv", |buf| write_hits_csv(g, &scores, buf))?;
    Ok(scores)
}

pub fn filter_stage(art: &mut Artifacts, g: &Digraph, alpha: f64) -> Result<Digraph> {
    let scores = disparity_scores(g);
    let kept = backbone(g, alpha).in_stage("filter")?;
    art.write_with("disparity.csv", |buf| write_scores_csv(g, &scores, buf))?;
    write_graph(art, "backbone", &kept)?;
    Ok(kept)
}

/// Best of the configured restarts by description length.
pub fn communities(g: &Digraph, cfg: &PipelineConfig, seeds: &StageSeeds) -> Result<(HierPartition, u64)> {
    infer_best_of(g, &seeds.nsbm_candidates, &cfg.nsbm).in_stage("communities")
}

pub fn write_partition(art: &mut Artifacts, g: &Digraph, part: &HierPartition, cfg: &PipelineConfig) -> Result<()> {
    let parts = score_parts(&quantize(g, cfg.nsbm.max_multiplicity), part).in_stage("communities")?;
    let mut json = part.to_json(g, &parts);
    json.push('\n');
    art.write("partition.json", json.as_bytes())?;
    art.write("hierarchy.svg", svg::hierarchy_svg(g, part).as_bytes())
}

/// Torus embedding of `g` with radii from `g`'s own hub scores.
pub fn spectral(g: &Digraph, hub: &[f64], charge: f64) -> Result<TorusEmbedding> {
    torus_embedding(g, charge, hub).in_stage("spectral")
}

pub fn write_spectral(art: &mut Artifacts, g: &Digraph, emb: &TorusEmbedding, blocks: &[usize]) -> Result<()> {
    art.write_with("spectral.csv", |buf| write_embedding_csv(g, emb, buf))?;
    art.write("torus.svg", svg::torus_svg(g, emb, blocks).as_bytes())
}

pub fn embed_stage(art: &mut Artifacts, g: &Digraph, cfg: &PipelineConfig, seeds: &StageSeeds) -> Result<EmbeddingTable> {
    let corpus = generate_walks(g, &cfg.walk, seeds.walks).in_stage("embed")?;
    let table = train_embeddings(&corpus, g.names(), &cfg.embed, seeds.embedding).in_stage("embed")?;
    art.write_with("embeddings.csv", |buf| write_embeddings_csv(&table, buf))?;
    Ok(table)
}

pub fn layout_stage(
    art: &mut Artifacts,
    name: &str,
    g: &Digraph,
    blocks: &[usize],
    cfg: &PipelineConfig,
    seeds: &StageSeeds,
) -> Result<Vec<[f64; 2]>> {
    let pos = fr_layout(g, cfg.layout_iterations, seeds.layout);
    art.write(name, svg::graph_svg(g, &pos, blocks, name.trim_end_matches(".svg")).as_bytes())?;
    Ok(pos)
}

/// Outputs of the graph-analysis stages.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub hits: HitsScores,
    pub backbone: Digraph,
    pub torus: TorusEmbedding,
    pub partition: HierPartition,
    pub nsbm_seed: u64,
    pub embeddings: EmbeddingTable,
}

/// HITS, backbone, spectral, communities, embeddings and layouts of `g`.
pub fn analyze(art: &mut Artifacts, g: &Digraph, cfg: &PipelineConfig, seeds: &StageSeeds) -> Result<Analysis> {
    let hits = hits_stage(art, g)?;
    let kept = filter_stage(art, g, cfg.alpha)?;
    let (partition, nsbm_seed) = communities(g, cfg, seeds)?;
    let blocks = partition.levels[0].clone();
    let torus = match cfg.spectral_graph {
        SpectralGraph::Global => spectral(g, &hits.hub, cfg.charge)?,
        SpectralGraph::Backbone => {
            let hub = hits_on(&kept)?;
            spectral(&kept, &hub, cfg.charge)?
        }
    };
    let spectral_graph = match cfg.spectral_graph {
        SpectralGraph::Global => g,
        SpectralGraph::Backbone => &kept,
    };
    write_spectral(art, spectral_graph, &torus, &blocks)?;
    write_partition(art, g, &partition, cfg)?;
    let embeddings = embed_stage(art, g, cfg, seeds)?;
    layout_stage(art, "layout.svg", g, &blocks, cfg, seeds)?;
    layout_stage(art, "layout_backbone.svg", &kept, &blocks, cfg, seeds)?;
    Ok(Analysis {
        hits,
        backbone: kept,
        torus,
        partition,
        nsbm_seed,
        embeddings,
    })
}

/// Hub scores, all zero for a graph without edges.
fn hits_on(g: &Digraph) -> Result<Vec<f64>> {
    match hits(g, DEFAULT_TOL, DEFAULT_MAX_ITER) {
        Ok(s) => Ok(s.hub),
        Err(tabgraph_core::Error::NoEdges) => Ok(vec![0.0; g.n()]),
        Err(e) => Err(e).in_stage("spectral"),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Versions {
    pub tabgraph_cli: &'static str,
    pub tabgraph_core: &'static str,
}

impl Default for Versions {
    fn default() -> Self {
        Self {
            tabgraph_cli: env!("CARGO_PKG_VERSION"),
            tabgraph_core: tabgraph_core::VERSION,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub versions: Versions,
    pub config: PipelineConfig,
    pub input_sha256: Option<String>,
    pub seeds: StageSeeds,
    pub nsbm_seed: u64,
    /// Vertices a refinement ran on, by name.
    pub selection: Option<Vec<String>>,
    pub artifacts: Vec<ArtifactRecord>,
}

impl RunManifest {
    pub fn write(&self, dir: &Path) -> Result<()> {
        let path = dir.join(RUN_MANIFEST);
        fs::write(&path, to_json_bytes(self)).map_err(|source| PipelineError::Write { path, source })
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub build: InterpBuild,
    pub analysis: Analysis,
    pub manifest: RunManifest,
}

/// Run every stage on the configured input, writing into `cfg.out`.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<RunOutput> {
    cfg.validate()?;
    if cfg.input.is_none() {
        return Err(ConfigError::Invalid("no input table given".into()).into());
    }
    let mut art = Artifacts::create(&cfg.out)?;
    let out = run_stages(&mut art, cfg);
    if let Err(e) = &out {
        art.mark_failed(e);
    }
    out
}

fn run_stages(art: &mut Artifacts, cfg: &PipelineConfig) -> Result<RunOutput> {
    let seeds = StageSeeds::new(cfg);
    let (table, mut diags, input_sha256) = ingest(cfg)?;
    write_table_manifest(art, &table)?;
    let build = build_stage(art, cfg, &table)?;
    diags.extend(build.diagnostics.iter().cloned());
    let analysis = analyze(art, &build.graph, cfg, &seeds)?;
    write_diagnostics(art, &diags)?;
    let manifest = RunManifest {
        command: "pipeline".into(),
        versions: Versions::default(),
        config: cfg.clone(),
        input_sha256: Some(input_sha256),
        seeds,
        nsbm_seed: analysis.nsbm_seed,
        selection: None,
        artifacts: art.records().to_vec(),
    };
    manifest.write(art.dir())?;
    Ok(RunOutput {
        build,
        analysis,
        manifest,
    })
}
