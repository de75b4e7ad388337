use tabgraph_core::centrality::{hits, DEFAULT_MAX_ITER, DEFAULT_TOL};
use tabgraph_core::communities::{infer_best_of, nmi, NsbmParams};
use tabgraph_core::embed::{generate_walks, most_similar, train_embeddings, EmbedParams, WalkParams};
use tabgraph_core::gbm::GbmParams;
use tabgraph_core::interp_graph::build_global_graph;
use tabgraph_core::sparsify::backbone;
use tabgraph_core::spectral::{torus_embedding, DEFAULT_CHARGE};
use tabgraph_core::tabular::{generate_synthetic_table, SyntheticSpec};

#[test]
fn planted_table_through_every_stage() {
    let spec = SyntheticSpec {
        n_groups: 3,
        cols_per_group: 6,
        n_rows: 1500,
        within_strength: 0.9,
        noise_sd: 0.3,
        seed: 11,
    };
    let (table, truth) = generate_synthetic_table(&spec).unwrap();
    let params = GbmParams { n_trees: 30, ..Default::default() };
    let build = build_global_graph(&table, &params, 1).unwrap();
    let g = &build.graph;
    assert_eq!(g.n(), 18);
    assert!(build.accuracies().iter().all(|a| *a > 0.5));

    let within: f64 = g.edges().filter(|(u, v, _)| truth[*u] == truth[*v]).map(|e| e.2).sum();
    let across: f64 = g.edges().filter(|(u, v, _)| truth[*u] != truth[*v]).map(|e| e.2).sum();
    assert!(within > 5.0 * across, "{within} vs {across}");

    let kept = backbone(g, 0.1).unwrap();
    assert!(kept.edge_count() <= g.edge_count());

    let scores = hits(g, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
    assert!(scores.converged);
    let torus = torus_embedding(g, DEFAULT_CHARGE, &scores.hub).unwrap();
    assert_eq!(torus.points.len(), 18);

    let seeds: Vec<u64> = (0..3).collect();
    let (part, _) = infer_best_of(g, &seeds, &NsbmParams::default()).unwrap();
    assert_eq!(nmi(&part.levels[0], &truth), 1.0);

    let walks = WalkParams { walks_per_vertex: 5, ..Default::default() };
    let corpus = generate_walks(g, &walks, 2).unwrap();
    let embed = EmbedParams { dims: 16, ..Default::default() };
    let emb = train_embeddings(&corpus, g.names(), &embed, 3).unwrap();
    let nearest = most_similar(&emb, 0, 3).unwrap();
    assert!(nearest.iter().all(|(v, _)| truth[*v] == truth[0]), "{nearest:?}");
}
