//! Plain-text graph files.
//!
//! - edges: one `u v` pair of non-negative integers per line, `#` comments
//! - features: CSV of floats, row index = node id, optional header row
//! - labels: one non-negative integer per line, row index = node id

use std::fs;
use std::io::Write;
use std::path::Path;

use super::graph::{BuildStats, Graph};
use crate::diffcore::Tensor;
use crate::error::{Result, SignaError};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LoadOptions {
    /// Skip the first row of the feature CSV.
    pub feature_header: bool,
}

#[derive(Debug, Clone)]
pub struct LoadedGraph {
    pub graph: Graph,
    pub stats: BuildStats,
}

fn ingest(path: &Path, line: usize, msg: impl Into<String>) -> SignaError {
    SignaError::Ingestion {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| SignaError::io(path, e))
}

fn parse_edges(path: &Path, num_nodes: usize) -> Result<Vec<(usize, usize)>> {
    let text = read(path)?;
    let mut edges = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let lineno = i + 1;
        let mut parts = line.split_whitespace();
        let (Some(a), Some(b), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(ingest(path, lineno, "expected exactly two node ids"));
        };
        let parse = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| ingest(path, lineno, format!("invalid node id `{s}`")))
        };
        let (u, v) = (parse(a)?, parse(b)?);
        if u >= num_nodes || v >= num_nodes {
            return Err(ingest(
                path,
                lineno,
                format!(
                    "node id {} out of range for {num_nodes} feature rows",
                    u.max(v)
                ),
            ));
        }
        edges.push((u, v));
    }
    Ok(edges)
}

fn parse_features(path: &Path, header: bool) -> Result<Tensor> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| ingest(path, 0, e.to_string()))?;
    let mut width = None;
    let mut rows = 0usize;
    let mut data = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            ingest(path, line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let w = *width.get_or_insert(record.len());
        if record.len() != w {
            return Err(ingest(
                path,
                line,
                format!("ragged row: {} fields, expected {w}", record.len()),
            ));
        }
        for field in record.iter() {
            let x: f64 = field
                .parse()
                .map_err(|_| ingest(path, line, format!("invalid float `{field}`")))?;
            if !x.is_finite() {
                return Err(ingest(path, line, format!("non-finite feature `{field}`")));
            }
            data.push(x);
        }
        rows += 1;
    }
    let width = width.unwrap_or(0);
    if rows == 0 || width == 0 {
        return Err(ingest(path, 0, "feature file has no rows"));
    }
    Tensor::new(vec![rows, width], data)
}

fn parse_labels(path: &Path, num_nodes: usize) -> Result<Vec<usize>> {
    let text = read(path)?;
    let mut labels = Vec::with_capacity(num_nodes);
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let label = line
            .parse::<usize>()
            .map_err(|_| ingest(path, i + 1, format!("invalid label `{line}`")))?;
        labels.push(label);
    }
    if labels.len() != num_nodes {
        return Err(ingest(
            path,
            text.lines().count(),
            format!("{} labels for {num_nodes} nodes", labels.len()),
        ));
    }
    Ok(labels)
}

/// Reads a graph; the node count is the number of feature rows.
pub fn load_graph(
    edge_path: impl AsRef<Path>,
    feature_path: impl AsRef<Path>,
    label_path: Option<&Path>,
    options: LoadOptions,
) -> Result<LoadedGraph> {
    let (edge_path, feature_path) = (edge_path.as_ref(), feature_path.as_ref());
    let features = parse_features(feature_path, options.feature_header)?;
    let n = features.rows();
    let edges = parse_edges(edge_path, n)?;
    let labels = label_path.map(|p| parse_labels(p, n)).transpose()?;
    let (graph, stats) = Graph::from_edges(n, &edges, features, labels)?;
    if stats.self_loops_dropped > 0 {
        log::warn!(
            "{}: dropped {} self-loop(s)",
            edge_path.display(),
            stats.self_loops_dropped
        );
    }
    Ok(LoadedGraph { graph, stats })
}

fn write_file(path: &Path, body: &str) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| SignaError::io(path, e))?;
    f.write_all(body.as_bytes())
        .map_err(|e| SignaError::io(path, e))
}

pub fn write_edge_list(g: &Graph, path: impl AsRef<Path>) -> Result<()> {
    let mut body = String::new();
    for (u, v) in g.edges() {
        body.push_str(&format!("{u} {v}\n"));
    }
    write_file(path.as_ref(), &body)
}

/// Writes features with 17 significant digits so they reload bit-exactly.
pub fn write_features_csv(features: &Tensor, path: impl AsRef<Path>) -> Result<()> {
    let mut body = String::new();
    for i in 0..features.rows() {
        let row: Vec<String> = features
            .row(i)
            .iter()
            .map(|x| format!("{x:.16e}"))
            .collect();
        body.push_str(&row.join(","));
        body.push('\n');
    }
    write_file(path.as_ref(), &body)
}

pub fn write_labels(labels: &[usize], path: impl AsRef<Path>) -> Result<()> {
    let body: String = labels.iter().map(|l| format!("{l}\n")).collect();
    write_file(path.as_ref(), &body)
}
