//! Interpretability graph: one model per column, edges weighted by how much
//! each column's SHAP values contribute to predicting every other column.
//!
//! Edge `u → v` carries `Acc(v)·ε(u→v) / Σ_z ε(z→v)`, where `ε(u→v)` is the
//! mean absolute SHAP value of feature `u` in the model predicting `v`. The
//! in-strength of every vertex therefore equals its model's held-out
//! accuracy. Targets whose attributions are all zero get no in-edges.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagnostics::Diagnostic;
use crate::error::{Error, Result};
use crate::gbm::{fit, FeatureMatrix, GbmModel, GbmParams, Task};
use crate::graph::Digraph;
use crate::tabular::EncodedTable;
use crate::treeshap::{mean_abs_over_outputs, tree_shap};

#[derive(Debug, Clone)]
pub struct InterpBuild {
    /// Model per column; `None` where the fit failed.
    pub models: Vec<Option<GbmModel>>,
    /// `epsilon[u][v]` = mean `|φ|` of column `u` in the model for `v`.
    pub epsilon: Vec<Vec<f64>>,
    pub graph: Digraph,
    pub seed: u64,
    pub params: GbmParams,
    pub diagnostics: Vec<Diagnostic>,
    table: EncodedTable,
}

impl InterpBuild {
    pub fn table(&self) -> &EncodedTable {
        &self.table
    }

    /// `Acc(v)` per column, 0 for columns without a model.
    pub fn accuracies(&self) -> Vec<f64> {
        self.models
            .iter()
            .map(|m| m.as_ref().map_or(0.0, |m| m.acc))
            .collect()
    }

    pub fn manifest(&self) -> BuildManifest {
        let columns = self
            .table
            .specs()
            .iter()
            .zip(&self.models)
            .map(|(spec, model)| ManifestColumn {
                name: spec.name.clone(),
                index: spec.index,
                task: Task::for_column(spec),
                seed: column_seed(self.seed, spec.index),
                fitted: model.is_some(),
                acc: model.as_ref().map_or(0.0, |m| m.acc),
            })
            .collect();
        BuildManifest {
            master_seed: self.seed,
            n_rows: self.table.n_rows(),
            params: self.params,
            columns,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestColumn {
    pub name: String,
    pub index: usize,
    pub task: Task,
    pub seed: u64,
    pub fitted: bool,
    pub acc: f64,
}

/// Per-column fit record written next to the graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildManifest {
    pub master_seed: u64,
    pub n_rows: usize,
    pub params: GbmParams,
    pub columns: Vec<ManifestColumn>,
}

impl BuildManifest {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }
}

pub fn column_seed(master_seed: u64, column: usize) -> u64 {
    master_seed ^ column as u64
}

fn feature_row(row: &[f64], target: usize) -> Vec<f64> {
    row.iter()
        .enumerate()
        .filter(|(c, _)| *c != target)
        .map(|(_, v)| *v)
        .collect()
}

fn fit_column(
    table: &EncodedTable,
    target: usize,
    params: &GbmParams,
    master_seed: u64,
) -> Result<GbmModel> {
    let n = table.n_rows();
    let k = table.n_cols() - 1;
    let mut data = Vec::with_capacity(n * k);
    for r in 0..n {
        data.extend(feature_row(table.row(r), target));
    }
    let x = FeatureMatrix::new(data, n, k)?;
    let y = table.column(target);
    let spec = &table.specs()[target];
    let mut model = fit(
        &x,
        &y,
        Task::for_column(spec),
        params,
        column_seed(master_seed, target),
    )?;
    model.feature_columns = (0..table.n_cols()).filter(|c| *c != target).collect();
    model.target = Some(spec.clone());
    Ok(model)
}

/// `|φ|` of every table column in `model` for one row, indexed by column.
fn row_attributions(model: &GbmModel, table_row: &[f64]) -> Vec<f64> {
    let target = model.target.as_ref().map_or(usize::MAX, |t| t.index);
    let phi = mean_abs_over_outputs(&tree_shap(model, &feature_row(table_row, target)));
    let mut out = vec![0.0; table_row.len()];
    for (f, col) in model.feature_columns.iter().enumerate() {
        out[*col] = phi[f];
    }
    out
}

/// Graph from an `ε` matrix (`epsilon[u][v]`) and per-target accuracies.
pub fn graph_from_epsilon(names: Vec<String>, epsilon: &[Vec<f64>], acc: &[f64]) -> Result<Digraph> {
    let n = names.len();
    let mut g = Digraph::new(names)?;
    for v in 0..n {
        let total: f64 = (0..n).filter(|u| *u != v).map(|u| epsilon[u][v]).sum();
        if total <= 0.0 {
            continue;
        }
        for u in (0..n).filter(|u| *u != v) {
            let w = acc[v] * epsilon[u][v] / total;
            if w > 0.0 {
                g.add_edge(u, v, w)?;
            }
        }
    }
    Ok(g)
}

/// Fit one model per column (in parallel) and assemble the global graph.
/// Columns whose fit fails are kept as isolated vertices with a diagnostic.
pub fn build_global_graph(
    table: &EncodedTable,
    params: &GbmParams,
    master_seed: u64,
) -> Result<InterpBuild> {
    let n = table.n_cols();
    if n < 3 {
        return Err(Error::InvalidArgument(format!(
            "need at least 3 columns, got {n}"
        )));
    }
    let per_column: Vec<(Option<GbmModel>, Vec<f64>, Option<Diagnostic>)> = (0..n)
        .into_par_iter()
        .map(|c| match fit_column(table, c, params, master_seed) {
            Ok(model) => {
                let mut eps = vec![0.0; n];
                for r in 0..table.n_rows() {
                    for (e, a) in eps.iter_mut().zip(row_attributions(&model, table.row(r))) {
                        *e += a;
                    }
                }
                let rows = table.n_rows() as f64;
                eps.iter_mut().for_each(|e| *e /= rows);
                (Some(model), eps, None)
            }
            Err(e) => {
                let name = &table.specs()[c].name;
                let diag = Diagnostic::new("interp_graph", "fit_failed", format!("{name}: {e}"))
                    .with_column(name.clone());
                (None, vec![0.0; n], Some(diag))
            }
        })
        .collect();

    let mut models = Vec::with_capacity(n);
    let mut epsilon = vec![vec![0.0; n]; n];
    let mut diagnostics = Vec::new();
    for (v, (model, eps, diag)) in per_column.into_iter().enumerate() {
        for u in 0..n {
            epsilon[u][v] = eps[u];
        }
        models.push(model);
        diagnostics.extend(diag);
    }
    for (v, model) in models.iter().enumerate() {
        if model.is_some() && (0..n).all(|u| epsilon[u][v] == 0.0) {
            let name = &table.specs()[v].name;
            diagnostics.push(
                Diagnostic::new(
                    "interp_graph",
                    "zero_attribution",
                    format!("{name}: all attributions are zero; no in-edges"),
                )
                .with_column(name.clone()),
            );
        }
    }
    let acc: Vec<f64> = models
        .iter()
        .map(|m| m.as_ref().map_or(0.0, |m| m.acc))
        .collect();
    let graph = graph_from_epsilon(table.names(), &epsilon, &acc)?;
    Ok(InterpBuild {
        models,
        epsilon,
        graph,
        seed: master_seed,
        params: *params,
        diagnostics,
        table: table.clone(),
    })
}

/// `ε` from a single row's attributions, `epsilon[u][v]`.
pub fn local_epsilon(build: &InterpBuild, row: usize) -> Result<Vec<Vec<f64>>> {
    let table = &build.table;
    if row >= table.n_rows() {
        return Err(Error::InvalidArgument(format!(
            "row {row} out of range (table has {} rows)",
            table.n_rows()
        )));
    }
    let n = table.n_cols();
    let mut epsilon = vec![vec![0.0; n]; n];
    for (v, model) in build.models.iter().enumerate() {
        if let Some(model) = model {
            for (u, a) in row_attributions(model, table.row(row)).into_iter().enumerate() {
                epsilon[u][v] = a;
            }
        }
    }
    Ok(epsilon)
}

/// Per-instance graph: the global models and accuracies, with `ε` taken
/// from one row.
pub fn build_local_graph(build: &InterpBuild, row: usize) -> Result<Digraph> {
    let epsilon = local_epsilon(build, row)?;
    graph_from_epsilon(build.table.names(), &epsilon, &build.accuracies())
}

pub fn build_local_graphs(build: &InterpBuild, rows: &[usize]) -> Result<Vec<Digraph>> {
    rows.par_iter().map(|r| build_local_graph(build, *r)).collect()
}
