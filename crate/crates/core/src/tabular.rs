//! Tabular input: CSV ingestion, type inference and encoding, and a
//! synthetic generator with planted groups of dependent columns.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::io::{Read, Write};
use std::path::Path;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::diagnostics::Diagnostic;
use crate::error::{Error, Result};
use crate::rng;

/// Cells exactly as read from the CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    pub names: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ColumnKind {
    /// Codes `0..labels.len()` index into `labels`, which are sorted.
    Categorical { labels: Vec<String> },
    Numeric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    #[serde(flatten)]
    pub kind: ColumnKind,
    pub index: usize,
}

impl ColumnSpec {
    pub fn numeric(name: impl Into<String>, index: usize) -> Self {
        Self {
            name: name.into(),
            kind: ColumnKind::Numeric,
            index,
        }
    }

    pub fn cardinality(&self) -> Option<usize> {
        match &self.kind {
            ColumnKind::Categorical { labels } => Some(labels.len()),
            ColumnKind::Numeric => None,
        }
    }

    pub fn is_categorical(&self) -> bool {
        matches!(self.kind, ColumnKind::Categorical { .. })
    }
}

/// Rows × typed columns, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedTable {
    specs: Vec<ColumnSpec>,
    values: Vec<f64>,
    n_rows: usize,
}

impl EncodedTable {
    pub fn new(specs: Vec<ColumnSpec>, values: Vec<f64>, n_rows: usize) -> Result<Self> {
        let n_cols = specs.len();
        if n_rows == 0 || n_cols == 0 {
            return Err(Error::Empty("table has no rows or no columns".into()));
        }
        if values.len() != n_rows * n_cols {
            return Err(Error::InvalidArgument(format!(
                "value buffer has {} entries, expected {n_rows}×{n_cols}",
                values.len()
            )));
        }
        let mut seen = HashSet::new();
        for (i, spec) in specs.iter().enumerate() {
            if spec.index != i {
                return Err(Error::InvalidArgument(format!(
                    "column {:?} has index {}, expected {i}",
                    spec.name, spec.index
                )));
            }
            if !seen.insert(spec.name.as_str()) {
                return Err(Error::InvalidArgument(format!(
                    "duplicate column name {:?}",
                    spec.name
                )));
            }
            if let Some(k) = spec.cardinality() {
                if k < 2 {
                    return Err(Error::InvalidArgument(format!(
                        "categorical column {:?} has cardinality {k}",
                        spec.name
                    )));
                }
            }
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite value in table".into()));
        }
        Ok(Self {
            specs,
            values,
            n_rows,
        })
    }

    pub fn specs(&self) -> &[ColumnSpec] {
        &self.specs
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.specs.len()
    }

    pub fn names(&self) -> Vec<String> {
        self.specs.iter().map(|s| s.name.clone()).collect()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.n_cols() + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        let m = self.n_cols();
        &self.values[row * m..(row + 1) * m]
    }

    pub fn column(&self, col: usize) -> Vec<f64> {
        (0..self.n_rows).map(|r| self.get(r, col)).collect()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Raw label for a cell: the stored label for categoricals, the
    /// shortest round-trip decimal for numerics.
    pub fn label(&self, row: usize, col: usize) -> String {
        let v = self.get(row, col);
        match &self.specs[col].kind {
            ColumnKind::Categorical { labels } => labels[v as usize].clone(),
            ColumnKind::Numeric => format!("{v}"),
        }
    }

    /// Copy with column `col` replaced by `values`.
    pub fn with_column(&self, col: usize, values: &[f64]) -> Result<Self> {
        if values.len() != self.n_rows {
            return Err(Error::InvalidArgument("column length mismatch".into()));
        }
        let mut out = self.clone();
        let m = self.n_cols();
        for (r, v) in values.iter().enumerate() {
            out.values[r * m + col] = *v;
        }
        Ok(out)
    }

    /// Restrict to a subset of columns, reindexing specs.
    pub fn select_columns(&self, cols: &[usize]) -> Result<Self> {
        let specs = cols
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                let mut s = self
                    .specs
                    .get(c)
                    .cloned()
                    .ok_or_else(|| Error::InvalidArgument(format!("no column {c}")))?;
                s.index = i;
                Ok(s)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut values = Vec::with_capacity(self.n_rows * cols.len());
        for r in 0..self.n_rows {
            values.extend(cols.iter().map(|&c| self.get(r, c)));
        }
        Self::new(specs, values, self.n_rows)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(self.specs.iter().map(|s| s.name.as_str()))?;
        for r in 0..self.n_rows {
            w.write_record((0..self.n_cols()).map(|c| self.label(r, c)))?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn load_csv(path: impl AsRef<Path>, header: bool) -> Result<RawTable> {
    let file = std::fs::File::open(path)?;
    parse_csv(file, header)
}

pub fn parse_csv<R: Read>(reader: R, header: bool) -> Result<RawTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);
    let mut names: Option<Vec<String>> = None;
    let mut rows = Vec::new();
    let mut width = None;
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let cells: Vec<String> = record.iter().map(str::to_string).collect();
        match width {
            None => width = Some(cells.len()),
            Some(w) if w != cells.len() => {
                return Err(Error::RaggedRow {
                    line,
                    expected: w,
                    found: cells.len(),
                })
            }
            _ => {}
        }
        if header && names.is_none() {
            names = Some(cells);
        } else {
            rows.push(cells);
        }
    }
    let Some(width) = width else {
        return Err(Error::Empty("csv file is empty".into()));
    };
    if rows.is_empty() {
        return Err(Error::Empty("csv file has no data rows".into()));
    }
    let names = names.unwrap_or_else(|| (0..width).map(|i| format!("c{i}")).collect());
    Ok(RawTable { names, rows })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissingPolicy {
    DropRow,
    Error,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EncodeOptions {
    pub categorical_max_cardinality: usize,
    pub missing_policy: MissingPolicy,
}

impl Default for EncodeOptions {
    fn default() -> Self {
        Self {
            categorical_max_cardinality: 32,
            missing_policy: MissingPolicy::DropRow,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Encoded {
    pub table: EncodedTable,
    pub diagnostics: Vec<Diagnostic>,
}

fn is_missing(cell: &str) -> bool {
    let t = cell.trim();
    t.is_empty() || t == "NA"
}

pub fn encode(raw: &RawTable, opts: &EncodeOptions) -> Result<Encoded> {
    if raw.rows.is_empty() || raw.names.is_empty() {
        return Err(Error::Empty("raw table has no rows or columns".into()));
    }
    let mut seen = HashSet::new();
    for name in &raw.names {
        if !seen.insert(name.as_str()) {
            return Err(Error::InvalidArgument(format!(
                "duplicate column name {name:?}"
            )));
        }
    }
    let mut diagnostics = Vec::new();

    let mut kept_rows: Vec<&Vec<String>> = Vec::with_capacity(raw.rows.len());
    for (r, row) in raw.rows.iter().enumerate() {
        if let Some(c) = row.iter().position(|cell| is_missing(cell)) {
            match opts.missing_policy {
                MissingPolicy::Error => {
                    return Err(Error::MissingValue {
                        row: r,
                        column: raw.names[c].clone(),
                    })
                }
                MissingPolicy::DropRow => continue,
            }
        }
        kept_rows.push(row);
    }
    let dropped = raw.rows.len() - kept_rows.len();
    if dropped > 0 {
        diagnostics.push(Diagnostic::new(
            "ingest",
            "rows_dropped",
            format!("{dropped} rows with missing values dropped"),
        ));
    }
    if kept_rows.is_empty() {
        return Err(Error::Empty("every row has a missing value".into()));
    }
    let n_rows = kept_rows.len();

    let mut specs = Vec::new();
    let mut columns: Vec<Vec<f64>> = Vec::new();
    for (c, name) in raw.names.iter().enumerate() {
        let cells: Vec<&str> = kept_rows.iter().map(|row| row[c].trim()).collect();
        let parsed: Option<Vec<f64>> = cells
            .iter()
            .map(|s| s.parse::<f64>().ok().filter(|v| v.is_finite()))
            .collect();
        let distinct: BTreeSet<&str> = cells.iter().copied().collect();
        let categorical = parsed.is_none() || distinct.len() <= opts.categorical_max_cardinality;
        let (kind, values) = if categorical {
            let labels: Vec<String> = distinct.iter().map(|s| s.to_string()).collect();
            let code: BTreeMap<&str, usize> =
                distinct.iter().enumerate().map(|(i, s)| (*s, i)).collect();
            let values = cells.iter().map(|s| code[s] as f64).collect();
            (ColumnKind::Categorical { labels }, values)
        } else {
            (ColumnKind::Numeric, parsed.unwrap_or_default())
        };
        let degenerate = match &kind {
            ColumnKind::Categorical { labels } => labels.len() < 2,
            ColumnKind::Numeric => values.iter().all(|v| *v == values[0]),
        };
        if degenerate {
            diagnostics.push(
                Diagnostic::new("ingest", "zero_variance", "constant column removed")
                    .with_column(name.clone()),
            );
            continue;
        }
        specs.push(ColumnSpec {
            name: name.clone(),
            kind,
            index: specs.len(),
        });
        columns.push(values);
    }
    if specs.is_empty() {
        return Err(Error::AllColumnsDegenerate);
    }
    let mut values = Vec::with_capacity(n_rows * specs.len());
    for r in 0..n_rows {
        values.extend(columns.iter().map(|col| col[r]));
    }
    let table = EncodedTable::new(specs, values, n_rows)?;
    Ok(Encoded { table, diagnostics })
}

/// Parameters of the planted-group generator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_groups: usize,
    pub cols_per_group: usize,
    pub n_rows: usize,
    pub within_strength: f64,
    pub noise_sd: f64,
    pub seed: u64,
}

/// Columns in group `g` are `within_strength·z_g + noise_sd·ε` with one
/// standard-normal latent `z_g` per row and group. Returns the table and
/// the group of every column.
pub fn generate_synthetic_table(spec: &SyntheticSpec) -> Result<(EncodedTable, Vec<usize>)> {
    let SyntheticSpec {
        n_groups,
        cols_per_group,
        n_rows,
        within_strength,
        noise_sd,
        seed,
    } = *spec;
    if n_groups == 0 || cols_per_group == 0 || n_rows == 0 {
        return Err(Error::InvalidArgument("counts must be positive".into()));
    }
    if !(within_strength > 0.0 && within_strength <= 1.0) {
        return Err(Error::InvalidArgument(
            "within_strength must lie in (0, 1]".into(),
        ));
    }
    if !(noise_sd >= 0.0 && noise_sd.is_finite()) {
        return Err(Error::InvalidArgument("noise_sd must be ≥ 0".into()));
    }
    let n_cols = n_groups * cols_per_group;
    let mut rng = rng::seeded(seed);
    let mut values = Vec::with_capacity(n_rows * n_cols);
    let mut latent = vec![0.0; n_groups];
    for _ in 0..n_rows {
        for z in latent.iter_mut() {
            *z = StandardNormal.sample(&mut rng);
        }
        for z in &latent {
            for _ in 0..cols_per_group {
                let e: f64 = StandardNormal.sample(&mut rng);
                values.push(within_strength * z + noise_sd * e);
            }
        }
    }
    let mut specs = Vec::with_capacity(n_cols);
    let mut groups = Vec::with_capacity(n_cols);
    for g in 0..n_groups {
        for j in 0..cols_per_group {
            specs.push(ColumnSpec::numeric(format!("g{g}_c{j}"), specs.len()));
            groups.push(g);
        }
    }
    Ok((EncodedTable::new(specs, values, n_rows)?, groups))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raw(csv: &str, header: bool) -> RawTable {
        parse_csv(csv.as_bytes(), header).unwrap()
    }

    fn pearson(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let ma = a.iter().sum::<f64>() / n;
        let mb = b.iter().sum::<f64>() / n;
        let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
        for (x, y) in a.iter().zip(b) {
            sab += (x - ma) * (y - mb);
            saa += (x - ma) * (x - ma);
            sbb += (y - mb) * (y - mb);
        }
        sab / (saa * sbb).sqrt()
    }

    #[test]
    fn header_and_rows() {
        let t = raw("a,b\n1,2\n3,4\n5,6\n", true);
        assert_eq!(t.names, vec!["a", "b"]);
        assert_eq!(t.rows.len(), 3);
    }

    #[test]
    fn headerless_names() {
        let t = raw("1,2\n3,4\n", false);
        assert_eq!(t.names, vec!["c0", "c1"]);
        assert_eq!(t.rows.len(), 2);
    }

    #[test]
    fn ragged_row_reports_line() {
        let err = parse_csv("a,b,c\n1,2,3\n4,5\n6,7,8\n".as_bytes(), true).unwrap_err();
        match err {
            Error::RaggedRow {
                line,
                expected,
                found,
            } => {
                assert_eq!(line, 3);
                assert_eq!(expected, 3);
                assert_eq!(found, 2);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_file_is_error() {
        assert!(matches!(parse_csv("".as_bytes(), true), Err(Error::Empty(_))));
    }

    #[test]
    fn quoted_cells() {
        let t = raw("name,v\n\"x, y\",1\n\"z\"\"q\",2\n", true);
        assert_eq!(t.rows[0][0], "x, y");
        assert_eq!(t.rows[1][0], "z\"q");
    }

    #[test]
    fn categorical_codes_follow_sorted_labels() {
        let t = raw("ans,v\nyes,1\nno,2\nyes,3\n", true);
        let enc = encode(&t, &EncodeOptions::default()).unwrap();
        let col = enc.table.column(0);
        assert_eq!(col, vec![1.0, 0.0, 1.0]);
        assert_eq!(enc.table.specs()[0].cardinality(), Some(2));
        assert_eq!(enc.table.label(0, 0), "yes");
    }

    #[test]
    fn constant_column_removed_with_warning() {
        let t = raw("k,v\n5,1\n5,2\n5,3\n", true);
        let enc = encode(&t, &EncodeOptions::default()).unwrap();
        assert_eq!(enc.table.names(), vec!["v"]);
        assert_eq!(enc.diagnostics.len(), 1);
        assert_eq!(enc.diagnostics[0].kind, "zero_variance");
        assert_eq!(enc.diagnostics[0].column.as_deref(), Some("k"));
        assert!(enc.diagnostics[0].to_json_line().starts_with('{'));
    }

    #[test]
    fn many_distinct_floats_are_numeric() {
        let mut csv = String::from("x\n");
        for i in 0..40 {
            csv.push_str(&format!("{}.5\n", i));
        }
        let enc = encode(&raw(&csv, true), &EncodeOptions::default()).unwrap();
        assert_eq!(enc.table.specs()[0].kind, ColumnKind::Numeric);
        assert_eq!(enc.table.get(3, 0), 3.5);
    }

    #[test]
    fn all_degenerate_is_error() {
        let t = raw("a,b\n1,x\n1,x\n", true);
        assert!(matches!(
            encode(&t, &EncodeOptions::default()),
            Err(Error::AllColumnsDegenerate)
        ));
    }

    #[test]
    fn missing_policies() {
        let t = raw("a,b\n1,2\n,3\n4,5\n6,7\n", true);
        let strict = EncodeOptions {
            missing_policy: MissingPolicy::Error,
            ..Default::default()
        };
        match encode(&t, &strict) {
            Err(Error::MissingValue { row, column }) => {
                assert_eq!(row, 1);
                assert_eq!(column, "a");
            }
            other => panic!("unexpected {other:?}"),
        }
        let enc = encode(&t, &EncodeOptions::default()).unwrap();
        assert_eq!(enc.table.n_rows(), 3);
        assert!(enc.diagnostics.iter().any(|d| d.kind == "rows_dropped"));
    }

    #[test]
    fn decoding_reproduces_labels() {
        let t = raw("c,n\nred,1\nblue,2\ngreen,3\nred,4\n", true);
        let enc = encode(&t, &EncodeOptions::default()).unwrap();
        for (r, row) in t.rows.iter().enumerate() {
            assert_eq!(enc.table.label(r, 0), row[0]);
        }
    }

    #[test]
    fn encoding_is_deterministic() {
        let csv = "a,b,c\nx,1.5,3\ny,2.5,1\nx,0.5,2\n";
        let a = encode(&raw(csv, true), &EncodeOptions::default()).unwrap();
        let b = encode(&raw(csv, true), &EncodeOptions::default()).unwrap();
        assert_eq!(a.table, b.table);
    }

    #[test]
    fn synthetic_within_group_correlation_dominates() {
        let spec = SyntheticSpec {
            n_groups: 4,
            cols_per_group: 6,
            n_rows: 4000,
            within_strength: 0.9,
            noise_sd: 0.3,
            seed: 7,
        };
        let (t, groups) = generate_synthetic_table(&spec).unwrap();
        assert_eq!(t.n_cols(), 24);
        let cols: Vec<Vec<f64>> = (0..24).map(|c| t.column(c)).collect();
        let (mut within, mut nw, mut across, mut na) = (0.0, 0, 0.0, 0);
        for i in 0..24 {
            for j in (i + 1)..24 {
                let r = pearson(&cols[i], &cols[j]).abs();
                if groups[i] == groups[j] {
                    within += r;
                    nw += 1;
                } else {
                    across += r;
                    na += 1;
                }
            }
        }
        let (within, across) = (within / nw as f64, across / na as f64);
        assert!(within - across >= 0.3, "within {within} across {across}");
    }

    #[test]
    fn synthetic_limit_gives_identical_columns() {
        let spec = SyntheticSpec {
            n_groups: 2,
            cols_per_group: 3,
            n_rows: 50,
            within_strength: 1.0,
            noise_sd: 0.0,
            seed: 1,
        };
        let (t, _) = generate_synthetic_table(&spec).unwrap();
        assert_eq!(t.column(0), t.column(1));
        assert_eq!(t.column(3), t.column(5));
        assert_ne!(t.column(0), t.column(3));
    }

    #[test]
    fn synthetic_is_deterministic() {
        let spec = SyntheticSpec {
            n_groups: 3,
            cols_per_group: 2,
            n_rows: 100,
            within_strength: 0.7,
            noise_sd: 0.5,
            seed: 99,
        };
        let (a, _) = generate_synthetic_table(&spec).unwrap();
        let (b, _) = generate_synthetic_table(&spec).unwrap();
        assert_eq!(a.values(), b.values());
    }
}
