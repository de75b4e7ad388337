//! Re-run the analysis stages on part of a finished run.
//!
//! By default the subgraph keeps the original edge weights. With `retrain`
//! the models are refit on the selected columns only, which changes the
//! weights.

use std::fs;
use std::path::{Path, PathBuf};

use tabgraph_core::communities::HierPartition;
use tabgraph_core::graph::{induced_subgraph, Digraph};
use tabgraph_core::Error;

use crate::config::{ConfigError, PipelineConfig};
use crate::pipeline::{
    analyze, build_stage, ingest, read_graph, sha256_hex, write_diagnostics, write_graph, write_table_manifest,
    Analysis, Artifacts, PipelineError, Result, RunManifest, StageSeeds, Versions,
};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Selection {
    Vertices(Vec<String>),
    /// Every vertex whose block at `level` is `block`.
    Group { level: usize, block: usize },
}

impl Selection {
    fn label(&self) -> String {
        match self {
            Selection::Group { level, block } => format!("level{level}-block{block}"),
            Selection::Vertices(names) => format!("vertices-{}", &sha256_hex(names.join("\n").as_bytes())[..12]),
        }
    }
}

fn stage_err(source: Error) -> PipelineError {
    PipelineError::Stage { stage: "refine", source }
}

/// Vertex indices of the selection, ascending.
pub fn resolve(bundle: &Path, g: &Digraph, selection: &Selection) -> Result<Vec<usize>> {
    let mut subset = match selection {
        Selection::Vertices(names) => names
            .iter()
            .map(|n| g.index_of(n).ok_or_else(|| stage_err(Error::UnknownVertex(n.clone()))))
            .collect::<Result<Vec<_>>>()?,
        Selection::Group { level, block } => {
            let part = read_partition(bundle, g.n())?;
            if *level >= part.levels.len() {
                return Err(stage_err(Error::InvalidArgument(format!(
                    "partition has {} levels, asked for level {level}",
                    part.levels.len()
                ))));
            }
            let blocks = part.project(*level);
            (0..g.n()).filter(|u| blocks[*u] == *block).collect()
        }
    };
    subset.sort_unstable();
    subset.dedup();
    if subset.is_empty() {
        return Err(stage_err(Error::Empty("selection matches no vertex".into())));
    }
    Ok(subset)
}

fn read_partition(bundle: &Path, n: usize) -> Result<HierPartition> {
    #[derive(serde::Deserialize)]
    struct Doc {
        levels: Vec<Vec<usize>>,
    }
    let path = bundle.join("partition.json");
    let text = fs::read_to_string(&path).map_err(|e| stage_err(e.into()))?;
    let doc: Doc = serde_json::from_str(&text).map_err(|e| stage_err(e.into()))?;
    HierPartition::new(doc.levels, n).map_err(stage_err)
}

#[derive(Debug, Clone)]
pub struct RefineOutput {
    pub dir: PathBuf,
    pub graph: Digraph,
    pub analysis: Analysis,
    pub manifest: RunManifest,
}

/// Analyze the selected part of the run in `bundle`. Outputs go to
/// `bundle/refine/<label>/`.
pub fn refine(bundle: &Path, selection: &Selection, cfg: &PipelineConfig, retrain: bool) -> Result<RefineOutput> {
    cfg.validate()?;
    if retrain && cfg.input.is_none() {
        return Err(ConfigError::Invalid("--retrain needs the input table".into()).into());
    }
    let g = read_graph(&bundle.join("graph.json"))?;
    let subset = resolve(bundle, &g, selection)?;
    let dir = bundle.join("refine").join(selection.label());
    let mut art = Artifacts::create(&dir)?;
    let out = refine_stages(&mut art, &g, &subset, cfg, retrain);
    if let Err(e) = &out {
        art.mark_failed(e);
    }
    out
}

fn refine_stages(
    art: &mut Artifacts,
    g: &Digraph,
    subset: &[usize],
    cfg: &PipelineConfig,
    retrain: bool,
) -> Result<RefineOutput> {
    let seeds = StageSeeds::new(cfg);
    let names: Vec<String> = subset.iter().map(|u| g.name(*u).to_string()).collect();
    let (sub, input_sha256) = if retrain {
        let (table, mut diags, hash) = ingest(cfg)?;
        let cols = names
            .iter()
            .map(|n| {
                table
                    .specs()
                    .iter()
                    .position(|s| &s.name == n)
                    .ok_or_else(|| stage_err(Error::UnknownVertex(n.clone())))
            })
            .collect::<Result<Vec<_>>>()?;
        let table = table.select_columns(&cols).map_err(stage_err)?;
        write_table_manifest(art, &table)?;
        let build = build_stage(art, cfg, &table)?;
        diags.extend(build.diagnostics.iter().cloned());
        write_diagnostics(art, &diags)?;
        (build.graph, Some(hash))
    } else {
        let sub = induced_subgraph(g, subset).map_err(stage_err)?;
        write_graph(art, "graph", &sub)?;
        (sub, None)
    };
    let analysis = analyze(art, &sub, cfg, &seeds)?;
    let manifest = RunManifest {
        command: if retrain { "refine --retrain" } else { "refine" }.into(),
        versions: Versions::default(),
        config: cfg.clone(),
        input_sha256,
        seeds,
        nsbm_seed: analysis.nsbm_seed,
        selection: Some(names),
        artifacts: art.records().to_vec(),
    };
    manifest.write(art.dir())?;
    Ok(RefineOutput {
        dir: art.dir().to_path_buf(),
        graph: sub,
        analysis,
        manifest,
    })
}
