use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tabgraph_cli::config::PipelineConfig;
use tabgraph_cli::pipeline::run_pipeline;
use tabgraph_cli::refine::{refine, Selection};
use tabgraph_core::communities::{description_length, nmi, HierPartition};
use tabgraph_core::graph::{import, Format};
use tabgraph_core::tabular::{generate_synthetic_table, SyntheticSpec};

fn tabgraph(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tabgraph")).args(args).output().unwrap()
}

fn small_table(dir: &Path, groups: usize, cols: usize, rows: usize) -> (std::path::PathBuf, Vec<usize>) {
    let spec = SyntheticSpec {
        n_groups: groups,
        cols_per_group: cols,
        n_rows: rows,
        within_strength: 0.9,
        noise_sd: 0.3,
        seed: 3,
    };
    let (table, truth) = generate_synthetic_table(&spec).unwrap();
    let path = dir.join("table.csv");
    table.write_csv(fs::File::create(&path).unwrap()).unwrap();
    (path, truth)
}

fn quick_config(input: &Path, out: &Path) -> PipelineConfig {
    let mut cfg = PipelineConfig {
        input: Some(input.to_path_buf()),
        out: out.to_path_buf(),
        master_seed: 5,
        ..Default::default()
    };
    cfg.gbm.n_trees = 30;
    cfg.walk.walks_per_vertex = 4;
    cfg.embed.dims = 16;
    cfg.layout_iterations = 100;
    cfg
}

#[test]
fn config_problems_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let out = out.to_str().unwrap();
    assert_eq!(tabgraph(&["pipeline", "--alpha", "0", "--out", out]).status.code(), Some(2));
    assert_eq!(tabgraph(&["pipeline", "--charge", "2", "--out", out]).status.code(), Some(2));
    assert_eq!(tabgraph(&["pipeline", "--set", "colour=red", "--out", out]).status.code(), Some(2));
    assert_eq!(tabgraph(&["pipeline", "--out", out]).status.code(), Some(2));
    let cfg = dir.path().join("bad.conf");
    fs::write(&cfg, "seed = 1\nalpha\n").unwrap();
    let o = tabgraph(&["pipeline", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));
}

#[test]
fn stage_failure_exits_with_3_and_leaves_marker() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("two.csv");
    fs::write(&input, "a,b\n1,2\n3,5\n4,4\n2,2\n").unwrap();
    let out = dir.path().join("run");
    let o = tabgraph(&["pipeline", "--input", input.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(out.join("table.json").is_file(), "earlier outputs are kept");
    let marker = fs::read_to_string(out.join("FAILED")).unwrap();
    assert!(marker.starts_with("build-graph"));
    assert!(!out.join("run_manifest.json").exists());
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let (input, _) = small_table(dir.path(), 3, 2, 300);
    let cfg = dir.path().join("run.conf");
    fs::write(&cfg, "input = table.csv\nseed = 4\ngbm.n_trees = 10\nwalk.per_vertex = 2\nembed.dims = 8\nlayout.iterations = 20\n").unwrap();
    let out = dir.path().join("run");
    let o = tabgraph(&["pipeline", "--config", cfg.to_str().unwrap(), "--seed", "9", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("run_manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["master_seed"], 9);
    assert_eq!(manifest["config"]["gbm"]["n_trees"], 10);
    assert_eq!(manifest["config"]["input"], "table.csv");
    assert!(input.is_file());
}

#[test]
fn pipeline_artifacts_and_single_stage_commands() {
    let dir = tempfile::tempdir().unwrap();
    let (input, _) = small_table(dir.path(), 3, 3, 600);
    let out = dir.path().join("run");
    let cfg = quick_config(&input, &out);
    let run = run_pipeline(&cfg).unwrap();

    let expected = [
        "table.json", "models.json", "graph.graphml", "graph.json", "hits.csv", "disparity.csv", "backbone.graphml",
        "backbone.json", "spectral.csv", "torus.svg", "partition.json", "hierarchy.svg", "embeddings.csv",
        "layout.svg", "layout_backbone.svg", "diagnostics.jsonl",
    ];
    let written: Vec<&str> = run.manifest.artifacts.iter().map(|a| a.file.as_str()).collect();
    assert_eq!(written, expected);
    for a in &run.manifest.artifacts {
        let bytes = fs::read(out.join(&a.file)).unwrap();
        assert_eq!(tabgraph_cli::pipeline::sha256_hex(&bytes), a.sha256);
        let text = String::from_utf8(bytes).unwrap();
        match a.file.rsplit('.').next().unwrap() {
            "json" => {
                serde_json::from_str::<serde_json::Value>(&text).unwrap();
            }
            "svg" => assert!(text.starts_with("<svg") && text.ends_with("</svg>\n")),
            "graphml" => assert_eq!(import(&text, Format::GraphMl).unwrap().n(), 9),
            _ => {}
        }
    }
    let header = |f: &str| fs::read_to_string(out.join(f)).unwrap().lines().next().unwrap().to_string();
    assert_eq!(header("hits.csv"), "vertex,hub,authority");
    assert_eq!(header("spectral.csv"), "vertex,theta1,theta2,r,x,y,z");
    assert_eq!(header("disparity.csv"), "source,target,weight,p,w_alpha,k_out");
    assert!(header("embeddings.csv").starts_with("vertex,v0,v1,"));
    let manifest = fs::read_to_string(out.join("run_manifest.json")).unwrap();
    assert!(!manifest.contains(dir.path().to_str().unwrap()), "no absolute paths");

    // alpha = 1 keeps every edge
    let graph = out.join("graph.json");
    let filtered = dir.path().join("filtered");
    let o = tabgraph(&["filter", "--graph", graph.to_str().unwrap(), "--alpha", "1", "--out", filtered.to_str().unwrap()]);
    assert!(o.status.success());
    let full = import(&fs::read_to_string(&graph).unwrap(), Format::Json).unwrap();
    let kept = import(&fs::read_to_string(filtered.join("backbone.json")).unwrap(), Format::Json).unwrap();
    assert_eq!(kept.edge_count(), full.edge_count());

    // single-stage commands reproduce the pipeline's stage outputs
    let stages = dir.path().join("stages");
    let s = stages.to_str().unwrap();
    let g = graph.to_str().unwrap();
    for cmd in ["hits", "communities"] {
        let o = tabgraph(&[cmd, "--graph", g, "--seed", "5", "--out", s]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    assert_eq!(fs::read(stages.join("hits.csv")).unwrap(), fs::read(out.join("hits.csv")).unwrap());
    assert_eq!(fs::read(stages.join("partition.json")).unwrap(), fs::read(out.join("partition.json")).unwrap());
    let o = tabgraph(&["embed", "--graph", g, "--out", s, "--set", "embed.dims=8", "--query", "g0_c0", "--k", "3"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let similar: serde_json::Value = serde_json::from_str(&fs::read_to_string(stages.join("similar.json")).unwrap()).unwrap();
    assert_eq!(similar["g0_c0"].as_array().unwrap().len(), 3);
    let o = tabgraph(&["embed", "--graph", g, "--out", s, "--query", "nope"]);
    assert_eq!(o.status.code(), Some(3));

    // refinement on every vertex reproduces the analysis outputs
    let all: Vec<String> = full.names().to_vec();
    let refined = refine(&out, &Selection::Vertices(all), &cfg, false).unwrap();
    for f in ["hits.csv", "backbone.json", "spectral.csv", "partition.json", "embeddings.csv", "torus.svg"] {
        assert_eq!(fs::read(refined.dir.join(f)).unwrap(), fs::read(out.join(f)).unwrap(), "{f}");
    }
    assert!(refine(&out, &Selection::Vertices(vec!["nope".into()]), &cfg, false).is_err());
    assert!(refine(&out, &Selection::Group { level: 0, block: 99 }, &cfg, false).is_err());
}

#[test]
fn refinement_of_planted_groups() {
    let dir = tempfile::tempdir().unwrap();
    let (input, truth) = small_table(dir.path(), 3, 6, 1500);
    let out = dir.path().join("run");
    let cfg = quick_config(&input, &out);
    let run = run_pipeline(&cfg).unwrap();
    assert_eq!(nmi(&run.analysis.partition.levels[0], &truth), 1.0);

    // union of two planted groups: no block mixes them. A weak column may
    // still split off on its own when that lowers the description length.
    let union: Vec<String> = run.build.graph.names()[..12].to_vec();
    for seed in 0..5 {
        let cfg = PipelineConfig { master_seed: seed, ..cfg.clone() };
        let r = refine(&out, &Selection::Vertices(union.clone()), &cfg, false).unwrap();
        let blocks = &r.analysis.partition.levels[0];
        for u in 0..12 {
            for v in 0..12 {
                if truth[u] != truth[v] {
                    assert_ne!(blocks[u], blocks[v], "seed {seed}: {blocks:?}");
                }
            }
        }
    }

    // one planted group: the inferred hierarchy ends in a single block and
    // its description length is no worse than the one-block partition
    let r = refine(&out, &Selection::Group { level: 0, block: run.analysis.partition.levels[0][0] }, &cfg, false).unwrap();
    let part = &r.analysis.partition;
    assert_eq!(part.blocks_per_level.last(), Some(&1));
    let n = r.graph.n();
    let one_block = HierPartition::new(vec![vec![0; n]], n).unwrap();
    assert!(part.description_length <= description_length(&r.graph, &one_block).unwrap() + 1e-9);

    // retraining on the selected columns rebuilds the weights
    let cfg_retrain = cfg.clone();
    let r = refine(&out, &Selection::Vertices(union), &cfg_retrain, true).unwrap();
    assert!(r.dir.join("models.json").is_file());
    assert_eq!(r.graph.n(), 12);
    assert!(r.manifest.input_sha256.is_some());
}
