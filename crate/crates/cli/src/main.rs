use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use tabgraph_core::embed::most_similar_by_name;
use tabgraph_core::tabular::{generate_synthetic_table, SyntheticSpec};

use tabgraph_cli::config::{ConfigError, PipelineConfig};
use tabgraph_cli::pipeline::{
    self, build_stage, embed_stage, filter_stage, hits_stage, ingest, read_graph, run_pipeline, to_json_bytes,
    write_diagnostics, write_partition, write_spectral, write_table_manifest, Artifacts, PipelineError, StageSeeds,
};
use tabgraph_cli::refine::{refine, Selection};

#[derive(Parser)]
#[command(name = "tabgraph", version, about = "Interpretability graphs of tabular data")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// `key = value` config file; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Disparity filter significance level.
    #[arg(long, global = true)]
    alpha: Option<f64>,
    /// Magnetic Laplacian charge.
    #[arg(long, global = true)]
    charge: Option<f64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Input CSV table.
    #[arg(long, global = true)]
    input: Option<PathBuf>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Any other config key, repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic table with planted column groups.
    Synth {
        #[arg(long, default_value_t = 4)]
        groups: usize,
        #[arg(long, default_value_t = 6)]
        cols_per_group: usize,
        #[arg(long, default_value_t = 4000)]
        rows: usize,
        #[arg(long, default_value_t = 0.9)]
        strength: f64,
        #[arg(long, default_value_t = 0.3)]
        noise: f64,
    },
    /// Encode the input table and write its manifest.
    Ingest,
    /// Fit one model per column and write the interpretability graph.
    BuildGraph,
    /// Hub and authority scores of a graph.
    Hits {
        #[arg(long)]
        graph: PathBuf,
    },
    /// Disparity filter backbone of a graph.
    Filter {
        #[arg(long)]
        graph: PathBuf,
    },
    /// Magnetic eigenvector phases and torus plot of a graph.
    Spectral {
        #[arg(long)]
        graph: PathBuf,
    },
    /// Nested block model partition of a graph.
    Communities {
        #[arg(long)]
        graph: PathBuf,
    },
    /// Random-walk embeddings of a graph's vertices.
    Embed {
        #[arg(long)]
        graph: PathBuf,
        /// Walk the symmetrized graph.
        #[arg(long)]
        symmetrize: bool,
        /// Vertices to list neighbors for, written to similar.json.
        #[arg(long, value_delimiter = ',')]
        query: Vec<String>,
        #[arg(long, default_value_t = 5)]
        k: usize,
    },
    /// Re-run the analysis on part of a finished pipeline run.
    Refine {
        /// Output directory of the earlier run.
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long, value_delimiter = ',', conflicts_with = "group")]
        vertices: Vec<String>,
        /// Block id in the run's partition.
        #[arg(long)]
        group: Option<usize>,
        #[arg(long, default_value_t = 0)]
        level: usize,
        /// Refit the models on the selected columns instead of reusing weights.
        #[arg(long)]
        retrain: bool,
    },
    /// Every stage, end to end.
    Pipeline,
}

fn load_config(common: &Common) -> Result<PipelineConfig, ConfigError> {
    let mut cfg = match &common.config {
        Some(path) => PipelineConfig::from_file(path)?,
        None => PipelineConfig::default(),
    };
    for pair in &common.set {
        let (key, value) = pair
            .split_once('=')
            .ok_or_else(|| ConfigError::Invalid(format!("--set expects KEY=VALUE, got {pair:?}")))?;
        if !cfg.set(key.trim(), value.trim())? {
            return Err(ConfigError::Invalid(format!("unknown key {:?}", key.trim())));
        }
    }
    if let Some(seed) = common.seed {
        cfg.master_seed = seed;
    }
    if let Some(alpha) = common.alpha {
        cfg.alpha = alpha;
    }
    if let Some(charge) = common.charge {
        cfg.charge = charge;
    }
    if let Some(out) = &common.out {
        cfg.out = out.clone();
    }
    if let Some(input) = &common.input {
        cfg.input = Some(input.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

#[derive(Serialize)]
struct Neighbor {
    vertex: String,
    cosine: f64,
}

fn run(cli: Cli) -> Result<(), PipelineError> {
    let mut cfg = load_config(&cli.common)?;
    if let Some(n) = cli.common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| ConfigError::Invalid(format!("thread pool: {e}")))?;
    }
    let seeds = StageSeeds::new(&cfg);
    if let Command::Pipeline = cli.command {
        let out = run_pipeline(&cfg)?;
        println!(
            "wrote {} artifacts to {}; blocks per level {:?}",
            out.manifest.artifacts.len(),
            cfg.out.display(),
            out.analysis.partition.blocks_per_level
        );
        return Ok(());
    }
    if let Command::Refine { bundle, vertices, group, level, retrain } = &cli.command {
        let selection = match group {
            Some(block) => Selection::Group { level: *level, block: *block },
            None if !vertices.is_empty() => Selection::Vertices(vertices.clone()),
            None => return Err(ConfigError::Invalid("refine needs --vertices or --group".into()).into()),
        };
        let out = refine(bundle, &selection, &cfg, *retrain)?;
        println!("wrote {} artifacts to {}", out.manifest.artifacts.len(), out.dir.display());
        return Ok(());
    }

    let mut art = Artifacts::create(&cfg.out)?;
    let result = (|| -> Result<(), PipelineError> {
        match &cli.command {
            Command::Synth { groups, cols_per_group, rows, strength, noise } => {
                let spec = SyntheticSpec {
                    n_groups: *groups,
                    cols_per_group: *cols_per_group,
                    n_rows: *rows,
                    within_strength: *strength,
                    noise_sd: *noise,
                    seed: cfg.master_seed,
                };
                let (table, truth) = generate_synthetic_table(&spec)
                    .map_err(|e| ConfigError::Invalid(e.to_string()))?;
                let mut buf = Vec::new();
                table
                    .write_csv(&mut buf)
                    .map_err(|source| PipelineError::Stage { stage: "synth", source })?;
                art.write("synthetic.csv", &buf)?;
                let mut groups_csv = String::from("column,group\n");
                for (name, g) in table.names().iter().zip(&truth) {
                    groups_csv.push_str(&format!("{name},{g}\n"));
                }
                art.write("groups.csv", groups_csv.as_bytes())?;
            }
            Command::Ingest => {
                let (table, diags, _) = ingest(&cfg)?;
                write_table_manifest(&mut art, &table)?;
                write_diagnostics(&mut art, &diags)?;
            }
            Command::BuildGraph => {
                let (table, mut diags, _) = ingest(&cfg)?;
                write_table_manifest(&mut art, &table)?;
                let build = build_stage(&mut art, &cfg, &table)?;
                diags.extend(build.diagnostics.iter().cloned());
                write_diagnostics(&mut art, &diags)?;
            }
            Command::Hits { graph } => {
                hits_stage(&mut art, &read_graph(graph)?)?;
            }
            Command::Filter { graph } => {
                filter_stage(&mut art, &read_graph(graph)?, cfg.alpha)?;
            }
            Command::Spectral { graph } => {
                let g = read_graph(graph)?;
                let hub = hits_stage(&mut art, &g)?.hub;
                let emb = pipeline::spectral(&g, &hub, cfg.charge)?;
                write_spectral(&mut art, &g, &emb, &vec![0; g.n()])?;
            }
            Command::Communities { graph } => {
                let g = read_graph(graph)?;
                let (part, _) = pipeline::communities(&g, &cfg, &seeds)?;
                write_partition(&mut art, &g, &part, &cfg)?;
            }
            Command::Embed { graph, symmetrize, query, k } => {
                let g = read_graph(graph)?;
                cfg.walk.symmetrize |= *symmetrize;
                let table = embed_stage(&mut art, &g, &cfg, &seeds)?;
                if !query.is_empty() {
                    let mut answers = std::collections::BTreeMap::new();
                    for name in query {
                        let ranked = most_similar_by_name(&table, name, *k)
                            .map_err(|source| PipelineError::Stage { stage: "embed", source })?;
                        let ranked: Vec<Neighbor> = ranked
                            .into_iter()
                            .map(|(vertex, cosine)| Neighbor { vertex, cosine })
                            .collect();
                        answers.insert(name.clone(), ranked);
                    }
                    art.write("similar.json", &to_json_bytes(&answers))?;
                }
            }
            Command::Pipeline | Command::Refine { .. } => unreachable!("handled above"),
        }
        Ok(())
    })();
    if let Err(e) = &result {
        art.mark_failed(e);
    }
    result
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
