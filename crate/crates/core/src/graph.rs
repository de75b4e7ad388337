//! Weighted directed graph over named vertices.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Weighted digraph: vertices `0..n` with unique names, at most one edge per
/// ordered pair, no self-loops, finite non-negative weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Digraph {
    names: Vec<String>,
    edges: BTreeMap<(usize, usize), f64>,
}

impl Digraph {
    pub fn new(names: Vec<String>) -> Result<Self> {
        let mut seen = HashMap::with_capacity(names.len());
        for (i, name) in names.iter().enumerate() {
            if seen.insert(name.as_str(), i).is_some() {
                return Err(Error::InvalidGraph(format!("duplicate vertex name {name:?}")));
            }
        }
        Ok(Self {
            names,
            edges: BTreeMap::new(),
        })
    }

    /// Graph on `n` vertices named `v0..v{n-1}`.
    pub fn with_vertices(n: usize) -> Self {
        Self {
            names: (0..n).map(|i| format!("v{i}")).collect(),
            edges: BTreeMap::new(),
        }
    }

    pub fn from_edges(
        names: Vec<String>,
        edges: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self> {
        let mut g = Self::new(names)?;
        for (u, v, w) in edges {
            g.add_edge(u, v, w)?;
        }
        Ok(g)
    }

    pub fn add_edge(&mut self, u: usize, v: usize, w: f64) -> Result<()> {
        let n = self.n();
        if u >= n || v >= n {
            return Err(Error::InvalidGraph(format!(
                "edge ({u}, {v}) out of range for {n} vertices"
            )));
        }
        if u == v {
            return Err(Error::InvalidGraph(format!("self-loop at vertex {u}")));
        }
        if !(w.is_finite() && w >= 0.0) {
            return Err(Error::InvalidGraph(format!(
                "edge ({u}, {v}) has invalid weight {w}"
            )));
        }
        if self.edges.insert((u, v), w).is_some() {
            return Err(Error::InvalidGraph(format!("duplicate edge ({u}, {v})")));
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.names.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, v: usize) -> &str {
        &self.names[v]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// `w(u, v)`, zero when the edge is absent.
    pub fn weight(&self, u: usize, v: usize) -> f64 {
        self.edges.get(&(u, v)).copied().unwrap_or(0.0)
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.edges.contains_key(&(u, v))
    }

    /// Edges as `(u, v, w)` in lexicographic `(u, v)` order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.edges.iter().map(|(&(u, v), &w)| (u, v, w))
    }

    pub fn out_edges(&self, u: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.edges
            .range((u, 0)..(u + 1, 0))
            .map(|(&(_, v), &w)| (v, w))
    }

    /// Per-vertex in-edge lists `(source, w)`, sources ascending.
    pub fn in_adjacency(&self) -> Vec<Vec<(usize, f64)>> {
        let mut adj = vec![Vec::new(); self.n()];
        for (u, v, w) in self.edges() {
            adj[v].push((u, w));
        }
        adj
    }

    pub fn out_adjacency(&self) -> Vec<Vec<(usize, f64)>> {
        let mut adj = vec![Vec::new(); self.n()];
        for (u, v, w) in self.edges() {
            adj[u].push((v, w));
        }
        adj
    }

    /// Out-strength `s(u)`.
    pub fn out_strength(&self, u: usize) -> f64 {
        self.out_edges(u).map(|(_, w)| w).sum()
    }

    /// In-strength `k_in(v)`.
    pub fn in_strength(&self, v: usize) -> f64 {
        self.edges().filter(|e| e.1 == v).map(|e| e.2).sum()
    }

    /// Dense row-major weight matrix `W[u][v] = w(u, v)`.
    pub fn weight_matrix(&self) -> Vec<Vec<f64>> {
        let n = self.n();
        let mut m = vec![vec![0.0; n]; n];
        for (u, v, w) in self.edges() {
            m[u][v] = w;
        }
        m
    }

    /// Copy keeping only the edges for which `keep` returns true.
    pub fn filter_edges(&self, mut keep: impl FnMut(usize, usize, f64) -> bool) -> Digraph {
        Digraph {
            names: self.names.clone(),
            edges: self
                .edges
                .iter()
                .filter(|(&(u, v), &w)| keep(u, v, w))
                .map(|(&k, &w)| (k, w))
                .collect(),
        }
    }

    /// Copy with every weight multiplied by `factor > 0`.
    pub fn scaled(&self, factor: f64) -> Digraph {
        Digraph {
            names: self.names.clone(),
            edges: self.edges.iter().map(|(&k, &w)| (k, w * factor)).collect(),
        }
    }

    /// Undirected connected components of the support graph, each sorted,
    /// ordered by smallest member.
    pub fn weak_components(&self) -> Vec<Vec<usize>> {
        let n = self.n();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for (u, v, w) in self.edges() {
            if w > 0.0 {
                let (a, b) = (find(&mut parent, u), find(&mut parent, v));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
        let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for v in 0..n {
            let r = find(&mut parent, v);
            groups.entry(r).or_default().push(v);
        }
        groups.into_values().collect()
    }
}

/// Symmetric part `w_s` and flow `a` of a digraph's weight function.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    n: usize,
    sym: Vec<f64>,
    anti: Vec<f64>,
}

impl Decomposition {
    pub fn n(&self) -> usize {
        self.n
    }

    /// `w_s(u, v) = (w(u,v) + w(v,u)) / 2`.
    pub fn sym(&self, u: usize, v: usize) -> f64 {
        self.sym[u * self.n + v]
    }

    /// `w_a(u, v) = (w(u,v) − w(v,u)) / 2`.
    pub fn anti(&self, u: usize, v: usize) -> f64 {
        self.anti[u * self.n + v]
    }

    /// Flow into `v` due to `u`: `a(v, u) = 2·w_a(u, v)`.
    pub fn flow(&self, v: usize, u: usize) -> f64 {
        2.0 * self.anti(u, v)
    }

    /// `d(u) = Σ_v w_s(u, v)`.
    pub fn degree(&self, u: usize) -> f64 {
        self.sym[u * self.n..(u + 1) * self.n].iter().sum()
    }

    pub fn degrees(&self) -> Vec<f64> {
        (0..self.n).map(|u| self.degree(u)).collect()
    }

    /// `vol(G_s) = Σ_u d(u)`.
    pub fn volume(&self) -> f64 {
        self.degrees().iter().sum()
    }
}

pub fn decompose(g: &Digraph) -> Decomposition {
    let n = g.n();
    let mut sym = vec![0.0; n * n];
    let mut anti = vec![0.0; n * n];
    for (u, v, w) in g.edges() {
        let r = g.weight(v, u);
        sym[u * n + v] = (w + r) / 2.0;
        sym[v * n + u] = (w + r) / 2.0;
        anti[u * n + v] = (w - r) / 2.0;
        anti[v * n + u] = (r - w) / 2.0;
    }
    Decomposition { n, sym, anti }
}

/// Subgraph on `subset` (in the given order) with every edge whose endpoints
/// both survive.
pub fn induced_subgraph(g: &Digraph, subset: &[usize]) -> Result<Digraph> {
    if subset.is_empty() {
        return Err(Error::InvalidArgument("empty vertex subset".into()));
    }
    let mut position = HashMap::with_capacity(subset.len());
    for (i, &v) in subset.iter().enumerate() {
        if v >= g.n() {
            return Err(Error::InvalidArgument(format!("vertex {v} out of range")));
        }
        if position.insert(v, i).is_some() {
            return Err(Error::InvalidArgument(format!("vertex {v} repeated")));
        }
    }
    let names = subset.iter().map(|&v| g.names[v].clone()).collect();
    let mut sub = Digraph::new(names)?;
    for (u, v, w) in g.edges() {
        if let (Some(&a), Some(&b)) = (position.get(&u), position.get(&v)) {
            sub.edges.insert((a, b), w);
        }
    }
    Ok(sub)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    GraphMl,
    Json,
    Dot,
}

impl std::str::FromStr for Format {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "graphml" => Ok(Format::GraphMl),
            "json" => Ok(Format::Json),
            "dot" | "gv" => Ok(Format::Dot),
            other => Err(Error::InvalidArgument(format!("unknown graph format {other:?}"))),
        }
    }
}

/// Weight with 17 significant digits, enough for a lossless round-trip.
fn fmt_weight(w: f64) -> String {
    format!("{w:.16e}")
}

pub fn export(g: &Digraph, format: Format) -> String {
    match format {
        Format::GraphMl => graphml::write(g),
        Format::Json => {
            let doc = JsonGraph {
                vertices: g.names.clone(),
                edges: g.edges().collect(),
            };
            let mut s = serde_json::to_string_pretty(&doc).expect("graph serializes");
            s.push('\n');
            s
        }
        Format::Dot => dot::write(g),
    }
}

pub fn import(text: &str, format: Format) -> Result<Digraph> {
    match format {
        Format::GraphMl => graphml::read(text),
        Format::Json => {
            let doc: JsonGraph = serde_json::from_str(text).map_err(|e| Error::Parse {
                line: e.line(),
                column: e.column(),
                message: e.to_string(),
            })?;
            Digraph::from_edges(doc.vertices, doc.edges)
        }
        Format::Dot => dot::read(text),
    }
}

#[derive(Serialize, Deserialize)]
struct JsonGraph {
    vertices: Vec<String>,
    edges: Vec<(usize, usize, f64)>,
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let offset = offset.min(text.len());
    let before = &text[..offset];
    let line = before.matches('\n').count() + 1;
    let column = offset - before.rfind('\n').map(|p| p + 1).unwrap_or(0) + 1;
    (line, column)
}

mod graphml {
    use super::*;
    use quick_xml::events::{BytesStart, Event};
    use quick_xml::escape::escape;
    use quick_xml::Reader;

    pub fn write(g: &Digraph) -> String {
        let mut s = String::new();
        s.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
        s.push_str("<graphml xmlns=\"http://graphml.graphdrawing.org/xmlns\">\n");
        s.push_str("  <key id=\"name\" for=\"node\" attr.name=\"name\" attr.type=\"string\"/>\n");
        s.push_str("  <key id=\"w\" for=\"edge\" attr.name=\"w\" attr.type=\"double\"/>\n");
        s.push_str("  <graph id=\"G\" edgedefault=\"directed\">\n");
        for (i, name) in g.names().iter().enumerate() {
            s.push_str(&format!(
                "    <node id=\"n{i}\"><data key=\"name\">{}</data></node>\n",
                escape(name.as_str())
            ));
        }
        for (u, v, w) in g.edges() {
            s.push_str(&format!(
                "    <edge source=\"n{u}\" target=\"n{v}\"><data key=\"w\">{}</data></edge>\n",
                fmt_weight(w)
            ));
        }
        s.push_str("  </graph>\n</graphml>\n");
        s
    }

    enum Open {
        Node,
        Edge,
    }

    struct Pending {
        nodes: Vec<(String, Option<String>)>,
        edges: Vec<(String, String, Option<f64>, usize)>,
    }

    fn attr(e: &BytesStart, key: &str, text: &str, pos: usize) -> Result<Option<String>> {
        for a in e.attributes() {
            let a = a.map_err(|err| perr(text, pos, err.to_string()))?;
            if a.key.as_ref() == key.as_bytes() {
                let v = a
                    .unescape_value()
                    .map_err(|err| perr(text, pos, err.to_string()))?;
                return Ok(Some(v.into_owned()));
            }
        }
        Ok(None)
    }

    fn perr(text: &str, pos: usize, message: impl Into<String>) -> Error {
        let (line, column) = line_col(text, pos);
        Error::Parse {
            line,
            column,
            message: message.into(),
        }
    }

    pub fn read(text: &str) -> Result<Digraph> {
        let mut reader = Reader::from_str(text);
        reader.config_mut().trim_text(true);
        let mut pending = Pending {
            nodes: Vec::new(),
            edges: Vec::new(),
        };
        let mut open: Option<Open> = None;
        let mut data_key: Option<String> = None;
        let mut saw_graph = false;
        loop {
            let mut pos = reader.buffer_position() as usize;
            pos += text[pos..].len() - text[pos..].trim_start().len();
            let event = reader
                .read_event()
                .map_err(|err| perr(text, pos, err.to_string()))?;
            match event {
                Event::Start(e) | Event::Empty(e) => match e.name().as_ref() {
                    b"graph" => {
                        saw_graph = true;
                        if let Some(d) = attr(&e, "edgedefault", text, pos)? {
                            if d != "directed" {
                                return Err(perr(text, pos, "graph must be directed"));
                            }
                        }
                    }
                    b"node" => {
                        let id = attr(&e, "id", text, pos)?
                            .ok_or_else(|| perr(text, pos, "node without id"))?;
                        pending.nodes.push((id, None));
                        open = Some(Open::Node);
                    }
                    b"edge" => {
                        let s = attr(&e, "source", text, pos)?
                            .ok_or_else(|| perr(text, pos, "edge without source"))?;
                        let t = attr(&e, "target", text, pos)?
                            .ok_or_else(|| perr(text, pos, "edge without target"))?;
                        if let Some(d) = attr(&e, "directed", text, pos)? {
                            if d == "false" {
                                return Err(perr(text, pos, "undirected edge"));
                            }
                        }
                        pending.edges.push((s, t, None, pos));
                        open = Some(Open::Edge);
                    }
                    b"data" => {
                        data_key = attr(&e, "key", text, pos)?;
                    }
                    _ => {}
                },
                Event::Text(t) => {
                    let value = t
                        .unescape()
                        .map_err(|err| perr(text, pos, err.to_string()))?
                        .into_owned();
                    match (&open, data_key.as_deref()) {
                        (Some(Open::Node), Some("name")) => {
                            if let Some(last) = pending.nodes.last_mut() {
                                last.1 = Some(value);
                            }
                        }
                        (Some(Open::Edge), Some("w")) => {
                            let w: f64 = value.trim().parse().map_err(|_| {
                                perr(text, pos, format!("invalid weight {value:?}"))
                            })?;
                            if let Some(last) = pending.edges.last_mut() {
                                last.2 = Some(w);
                            }
                        }
                        _ => {}
                    }
                }
                Event::End(e) => match e.name().as_ref() {
                    b"node" | b"edge" => open = None,
                    b"data" => data_key = None,
                    _ => {}
                },
                Event::Eof => break,
                _ => {}
            }
        }
        if !saw_graph {
            return Err(perr(text, 0, "no <graph> element"));
        }
        let mut index = HashMap::new();
        let mut names = Vec::with_capacity(pending.nodes.len());
        for (i, (id, name)) in pending.nodes.into_iter().enumerate() {
            names.push(name.unwrap_or_else(|| id.clone()));
            index.insert(id, i);
        }
        let mut g = Digraph::new(names)?;
        for (s, t, w, pos) in pending.edges {
            let u = *index
                .get(&s)
                .ok_or_else(|| perr(text, pos, format!("unknown node {s:?}")))?;
            let v = *index
                .get(&t)
                .ok_or_else(|| perr(text, pos, format!("unknown node {t:?}")))?;
            let w = w.ok_or_else(|| perr(text, pos, "edge without weight"))?;
            g.add_edge(u, v, w)?;
        }
        Ok(g)
    }
}

mod dot {
    use super::*;

    fn quote(s: &str) -> String {
        let mut out = String::with_capacity(s.len() + 2);
        out.push('"');
        for ch in s.chars() {
            match ch {
                '"' => out.push_str("\\\""),
                '\\' => out.push_str("\\\\"),
                '\n' => out.push_str("\\n"),
                c => out.push(c),
            }
        }
        out.push('"');
        out
    }

    pub fn write(g: &Digraph) -> String {
        let mut s = String::from("digraph G {\n");
        for name in g.names() {
            s.push_str(&format!("  {};\n", quote(name)));
        }
        for (u, v, w) in g.edges() {
            s.push_str(&format!(
                "  {} -> {} [weight={}];\n",
                quote(g.name(u)),
                quote(g.name(v)),
                fmt_weight(w)
            ));
        }
        s.push_str("}\n");
        s
    }

    #[derive(Debug, Clone, PartialEq)]
    enum Tok {
        Id(String),
        Arrow,
        Sym(char),
    }

    struct Lexer<'a> {
        text: &'a str,
        chars: std::iter::Peekable<std::str::CharIndices<'a>>,
    }

    impl<'a> Lexer<'a> {
        fn err(&self, pos: usize, msg: impl Into<String>) -> Error {
            let (line, column) = line_col(self.text, pos);
            Error::Parse {
                line,
                column,
                message: msg.into(),
            }
        }

        fn tokens(mut self) -> Result<Vec<(Tok, usize)>> {
            let mut out = Vec::new();
            while let Some(&(pos, c)) = self.chars.peek() {
                if c.is_whitespace() {
                    self.chars.next();
                } else if c == '/' {
                    self.chars.next();
                    match self.chars.next() {
                        Some((_, '/')) => {
                            for (_, c) in self.chars.by_ref() {
                                if c == '\n' {
                                    break;
                                }
                            }
                        }
                        _ => return Err(self.err(pos, "unexpected '/'")),
                    }
                } else if c == '"' {
                    self.chars.next();
                    let mut s = String::new();
                    loop {
                        match self.chars.next() {
                            Some((_, '"')) => break,
                            Some((_, '\\')) => match self.chars.next() {
                                Some((_, 'n')) => s.push('\n'),
                                Some((_, c)) => s.push(c),
                                None => return Err(self.err(pos, "unterminated string")),
                            },
                            Some((_, c)) => s.push(c),
                            None => return Err(self.err(pos, "unterminated string")),
                        }
                    }
                    out.push((Tok::Id(s), pos));
                } else if c == '-' {
                    self.chars.next();
                    if let Some(&(_, '>')) = self.chars.peek() {
                        self.chars.next();
                        out.push((Tok::Arrow, pos));
                    } else {
                        let mut s = String::from("-");
                        self.bare(&mut s);
                        out.push((Tok::Id(s), pos));
                    }
                } else if "{}[];,=".contains(c) {
                    self.chars.next();
                    out.push((Tok::Sym(c), pos));
                } else if c.is_alphanumeric() || c == '_' || c == '.' {
                    let mut s = String::new();
                    self.bare(&mut s);
                    out.push((Tok::Id(s), pos));
                } else {
                    return Err(self.err(pos, format!("unexpected character {c:?}")));
                }
            }
            Ok(out)
        }

        fn bare(&mut self, s: &mut String) {
            while let Some(&(_, c)) = self.chars.peek() {
                if c.is_alphanumeric() || c == '_' || c == '.' || c == '+' || c == '-' {
                    if c == '-' && s.ends_with(|p: char| p != 'e' && p != 'E') {
                        break;
                    }
                    s.push(c);
                    self.chars.next();
                } else {
                    break;
                }
            }
        }
    }

    pub fn read(text: &str) -> Result<Digraph> {
        let toks = Lexer {
            text,
            chars: text.char_indices().peekable(),
        }
        .tokens()?;
        let err = |pos: usize, msg: String| {
            let (line, column) = line_col(text, pos);
            Error::Parse {
                line,
                column,
                message: msg,
            }
        };
        let end = text.len();
        let mut i = 0;
        let at = |i: usize| toks.get(i).map(|t| t.1).unwrap_or(end);

        match toks.get(i) {
            Some((Tok::Id(k), _)) if k == "digraph" => i += 1,
            _ => return Err(err(at(i), "expected 'digraph'".into())),
        }
        if let Some((Tok::Id(_), _)) = toks.get(i) {
            i += 1;
        }
        if toks.get(i).map(|t| &t.0) != Some(&Tok::Sym('{')) {
            return Err(err(at(i), "expected '{'".into()));
        }
        i += 1;

        let mut names: Vec<String> = Vec::new();
        let mut index: HashMap<String, usize> = HashMap::new();
        let mut edges: Vec<(usize, usize, f64, usize)> = Vec::new();
        let mut intern = |name: &str, names: &mut Vec<String>| -> usize {
            *index.entry(name.to_string()).or_insert_with(|| {
                names.push(name.to_string());
                names.len() - 1
            })
        };
        loop {
            match toks.get(i) {
                Some((Tok::Sym('}'), _)) => {
                    i += 1;
                    break;
                }
                Some((Tok::Sym(';'), _)) => i += 1,
                Some((Tok::Id(a), pos)) => {
                    let pos = *pos;
                    i += 1;
                    let u = intern(a, &mut names);
                    let target = if toks.get(i).map(|t| &t.0) == Some(&Tok::Arrow) {
                        i += 1;
                        match toks.get(i) {
                            Some((Tok::Id(b), _)) => {
                                i += 1;
                                Some(intern(b, &mut names))
                            }
                            _ => return Err(err(at(i), "expected edge target".into())),
                        }
                    } else {
                        None
                    };
                    let mut weight = None;
                    if toks.get(i).map(|t| &t.0) == Some(&Tok::Sym('[')) {
                        i += 1;
                        loop {
                            match toks.get(i) {
                                Some((Tok::Sym(']'), _)) => {
                                    i += 1;
                                    break;
                                }
                                Some((Tok::Sym(',' | ';'), _)) => i += 1,
                                Some((Tok::Id(key), kpos)) => {
                                    let kpos = *kpos;
                                    if toks.get(i + 1).map(|t| &t.0) != Some(&Tok::Sym('=')) {
                                        return Err(err(at(i + 1), "expected '='".into()));
                                    }
                                    let value = match toks.get(i + 2) {
                                        Some((Tok::Id(v), _)) => v.clone(),
                                        _ => {
                                            return Err(err(at(i + 2), "expected value".into()))
                                        }
                                    };
                                    if key == "weight" {
                                        weight = Some(value.parse::<f64>().map_err(|_| {
                                            err(kpos, format!("invalid weight {value:?}"))
                                        })?);
                                    }
                                    i += 3;
                                }
                                _ => return Err(err(at(i), "malformed attribute list".into())),
                            }
                        }
                    }
                    if let Some(v) = target {
                        edges.push((u, v, weight.unwrap_or(1.0), pos));
                    }
                }
                _ => return Err(err(at(i), "unexpected token".into())),
            }
        }
        if i != toks.len() {
            return Err(err(at(i), "trailing input after graph".into()));
        }
        let mut g = Digraph::new(names)?;
        for (u, v, w, pos) in edges {
            g.add_edge(u, v, w).map_err(|e| err(pos, e.to_string()))?;
        }
        Ok(g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn triangle() -> Digraph {
        Digraph::from_edges(
            vec!["a".into(), "b".into(), "c".into()],
            [(0, 1, 1.0), (1, 0, 0.5), (1, 2, 2.0), (2, 0, 0.25)],
        )
        .unwrap()
    }

    #[test]
    fn single_edge_decomposition() {
        let g = Digraph::from_edges(vec!["u".into(), "v".into()], [(0, 1, 1.0)]).unwrap();
        let d = decompose(&g);
        assert_eq!(d.sym(0, 1), 0.5);
        assert_eq!(d.flow(1, 0), 1.0);
        assert_eq!(d.flow(0, 1), -1.0);
    }

    #[test]
    fn symmetric_pair_has_no_flow() {
        let g =
            Digraph::from_edges(vec!["u".into(), "v".into()], [(0, 1, 1.0), (1, 0, 1.0)]).unwrap();
        let d = decompose(&g);
        assert_eq!(d.sym(0, 1), 1.0);
        assert_eq!(d.flow(1, 0), 0.0);
    }

    #[test]
    fn rejects_invalid_edges() {
        let mut g = Digraph::with_vertices(2);
        assert!(g.add_edge(0, 0, 1.0).is_err());
        assert!(g.add_edge(0, 1, -1.0).is_err());
        assert!(g.add_edge(0, 1, f64::NAN).is_err());
        assert!(g.add_edge(0, 2, 1.0).is_err());
        g.add_edge(0, 1, 1.0).unwrap();
        assert!(g.add_edge(0, 1, 2.0).is_err());
        assert!(Digraph::new(vec!["a".into(), "a".into()]).is_err());
    }

    #[test]
    fn induced_subgraphs() {
        let g = triangle();
        assert_eq!(induced_subgraph(&g, &[0, 1, 2]).unwrap(), g);
        let single = induced_subgraph(&g, &[1]).unwrap();
        assert_eq!((single.n(), single.edge_count()), (1, 0));
        let pair = induced_subgraph(&g, &[0, 1]).unwrap();
        assert_eq!(pair.names(), &["a".to_string(), "b".to_string()]);
        let e: Vec<_> = pair.edges().collect();
        assert_eq!(e, vec![(0, 1, 1.0), (1, 0, 0.5)]);
        assert!(induced_subgraph(&g, &[]).is_err());
        assert!(induced_subgraph(&g, &[5]).is_err());
    }

    #[test]
    fn round_trips_every_format() {
        let mut g = triangle();
        g = g.scaled(1.0 / 3.0);
        for f in [Format::GraphMl, Format::Json, Format::Dot] {
            let back = import(&export(&g, f), f).unwrap();
            assert_eq!(back, g, "{f:?}");
        }
    }

    #[test]
    fn edgeless_round_trip() {
        let g = Digraph::new(vec!["x y".into(), "q\"<&>".into()]).unwrap();
        for f in [Format::GraphMl, Format::Json, Format::Dot] {
            assert_eq!(import(&export(&g, f), f).unwrap(), g, "{f:?}");
        }
    }

    #[test]
    fn json_fixture_parses() {
        let text = r#"{"vertices":["a","b","c"], "edges":[[0,1,0.5],[2,0,1.25]]}"#;
        let g = import(text, Format::Json).unwrap();
        assert_eq!(g.n(), 3);
        assert_eq!(g.weight(2, 0), 1.25);
        assert_eq!(g.weight(0, 2), 0.0);
    }

    #[test]
    fn malformed_inputs_report_location() {
        match import("{\"vertices\": [\"a\"],\n \"edges\": [[0,1,", Format::Json) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        match import("digraph G {\n  \"a\" -> ;\n}", Format::Dot) {
            Err(Error::Parse { line, column, .. }) => assert_eq!((line, column), (2, 10)),
            other => panic!("unexpected {other:?}"),
        }
        let bad = "<graphml><graph edgedefault=\"directed\">\n<node id=\"n0\"/>\n<edge source=\"n0\" target=\"n9\"><data key=\"w\">1</data></edge></graph></graphml>";
        match import(bad, Format::GraphMl) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn weak_components_split() {
        let g = Digraph::from_edges(
            (0..5).map(|i| format!("{i}")).collect(),
            [(0, 1, 1.0), (3, 2, 1.0)],
        )
        .unwrap();
        assert_eq!(g.weak_components(), vec![vec![0, 1], vec![2, 3], vec![4]]);
    }

    fn arb_graph() -> impl Strategy<Value = Digraph> {
        (1usize..8).prop_flat_map(|n| {
            proptest::collection::vec((0..n, 0..n, 0.0f64..1e6), 0..(n * n)).prop_map(
                move |edges| {
                    let mut g = Digraph::with_vertices(n);
                    for (u, v, w) in edges {
                        if u != v && !g.has_edge(u, v) {
                            g.add_edge(u, v, w).unwrap();
                        }
                    }
                    g
                },
            )
        })
    }

    proptest! {
        #[test]
        fn decomposition_reconstructs_weights(g in arb_graph()) {
            let d = decompose(&g);
            for u in 0..g.n() {
                for v in 0..g.n() {
                    let w = g.weight(u, v);
                    let scale = w.max(g.weight(v, u)).max(1.0);
                    prop_assert!((d.sym(u, v) + d.anti(u, v) - w).abs() <= 4.0 * f64::EPSILON * scale);
                    prop_assert_eq!(d.flow(u, v), -d.flow(v, u));
                }
            }
        }

        #[test]
        fn serialization_is_bit_faithful(g in arb_graph()) {
            for f in [Format::GraphMl, Format::Json, Format::Dot] {
                let back = import(&export(&g, f), f).unwrap();
                prop_assert_eq!(&back, &g);
            }
        }
    }
}
