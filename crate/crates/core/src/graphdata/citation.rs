//! Tab-separated citation network format.
//!
//! Content file: `node_id<TAB>f_1<TAB>...<TAB>f_d<TAB>label`.
//! Cites file: `cited_id<TAB>citing_id`.

use std::collections::HashMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use log::warn;
use ndarray::Array2;

use super::{Adjacency, AttributedGraph, GraphView, LabelVector, NodeFeatures};
use crate::error::{arg_err, Error, Result};

/// A loaded citation graph plus the bookkeeping needed for reporting.
#[derive(Clone, Debug)]
pub struct CitationDataset {
    pub graph: AttributedGraph,
    /// Original node identifiers, in node-index order.
    pub node_ids: Vec<String>,
    /// Label strings; index `c` names class `c` (first-appearance order).
    pub label_names: Vec<String>,
    /// Cites lines referencing an id missing from the content file.
    pub dropped_edges: usize,
    /// Feature values other than 0 or 1.
    pub nonbinary_values: usize,
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        source_name: path.display().to_string(),
        line,
        message: message.into(),
    }
}

pub fn load_citation_dataset(
    content_path: impl AsRef<Path>,
    cites_path: impl AsRef<Path>,
) -> Result<CitationDataset> {
    let content_path = content_path.as_ref();
    let cites_path = cites_path.as_ref();
    let content = fs::read_to_string(content_path)?;

    let mut node_ids = Vec::new();
    let mut index_of: HashMap<String, usize> = HashMap::new();
    let mut label_names: Vec<String> = Vec::new();
    let mut label_index: HashMap<String, usize> = HashMap::new();
    let mut labels = Vec::new();
    let mut values = Vec::new();
    let mut d: Option<usize> = None;
    let mut nonbinary_values = 0;

    for (lineno, line) in content.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() < 2 {
            return Err(parse_err(content_path, lineno, "expected id, features and label"));
        }
        let id = fields[0].trim();
        let label = fields[fields.len() - 1].trim();
        let feats = &fields[1..fields.len() - 1];
        match d {
            None => d = Some(feats.len()),
            Some(d) if d != feats.len() => {
                return Err(parse_err(
                    content_path,
                    lineno,
                    format!("expected {d} features, found {}", feats.len()),
                ))
            }
            _ => {}
        }
        for f in feats {
            let v: f64 = f.trim().parse().map_err(|_| {
                parse_err(content_path, lineno, format!("bad feature value {f:?}"))
            })?;
            if !v.is_finite() {
                return Err(parse_err(content_path, lineno, "non-finite feature value"));
            }
            if v != 0.0 && v != 1.0 {
                nonbinary_values += 1;
            }
            values.push(v);
        }
        if index_of.insert(id.to_string(), node_ids.len()).is_some() {
            return Err(parse_err(content_path, lineno, format!("duplicate node id {id:?}")));
        }
        node_ids.push(id.to_string());
        let next = label_names.len();
        let class = *label_index.entry(label.to_string()).or_insert_with(|| {
            label_names.push(label.to_string());
            next
        });
        labels.push(class);
    }
    if nonbinary_values > 0 {
        warn!(
            "{}: {nonbinary_values} feature values are not 0/1",
            content_path.display()
        );
    }

    let n = node_ids.len();
    let d = d.unwrap_or(0);
    let cites = fs::read_to_string(cites_path)?;
    let mut edges = Vec::new();
    let mut dropped_edges = 0;
    for (lineno, line) in cites.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
        if fields.len() != 2 {
            return Err(parse_err(cites_path, lineno + 1, "expected `cited<TAB>citing`"));
        }
        match (index_of.get(fields[0]), index_of.get(fields[1])) {
            (Some(&a), Some(&b)) => edges.push((a, b)),
            _ => dropped_edges += 1,
        }
    }
    if dropped_edges > 0 {
        warn!(
            "{}: dropped {dropped_edges} edges with unknown node ids",
            cites_path.display()
        );
    }

    let features = NodeFeatures::new(
        Array2::from_shape_vec((n, d), values).map_err(|e| arg_err(e.to_string()))?,
    )?;
    // a single observed class still needs k >= 2 to form a valid label space
    let k = label_names.len().max(2);
    let graph = AttributedGraph::new(
        Adjacency::from_edges(n, edges)?,
        features,
        Some(LabelVector::new(labels, k)?),
    )?;
    Ok(CitationDataset {
        graph,
        node_ids,
        label_names,
        dropped_edges,
        nonbinary_values,
    })
}

/// Writes a labeled graph in the content/cites format. Node ids are the node
/// indices; class `c` is written as `label_names[c]` or `c<index>`.
pub fn write_citation_dataset(
    graph: &AttributedGraph,
    label_names: Option<&[String]>,
    content_path: impl AsRef<Path>,
    cites_path: impl AsRef<Path>,
) -> Result<()> {
    let labels = graph
        .labels()
        .ok_or_else(|| arg_err("cannot write an unlabeled graph"))?;
    let mut content = BufWriter::new(fs::File::create(content_path)?);
    let x = graph.features().matrix();
    for i in 0..graph.n() {
        write!(content, "{i}")?;
        for v in x.row(i) {
            write!(content, "\t{v}")?;
        }
        let y = labels.as_slice()[i];
        match label_names {
            Some(names) => writeln!(content, "\t{}", names[y])?,
            None => writeln!(content, "\tc{y}")?,
        }
    }
    content.flush()?;

    let mut cites = BufWriter::new(fs::File::create(cites_path)?);
    for (i, j) in graph.adjacency().edges() {
        writeln!(cites, "{i}\t{j}")?;
    }
    cites.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
        let p = dir.join(name);
        fs::File::create(&p).unwrap().write_all(body.as_bytes()).unwrap();
        p
    }

    #[test]
    fn three_nodes_without_cites() {
        let dir = tempfile::tempdir().unwrap();
        let content = write(
            dir.path(),
            "c.content",
            "a\t0\t1\tNeural\nb\t1\t1\tTheory\nc\t0\t0\tNeural\n",
        );
        let cites = write(dir.path(), "c.cites", "");
        let ds = load_citation_dataset(&content, &cites).unwrap();
        assert_eq!(ds.graph.n(), 3);
        assert_eq!(ds.graph.adjacency().num_edges(), 0);
        assert!((0..3).all(|i| ds.graph.adjacency().degree(i) == 0));
        assert_eq!(ds.label_names, vec!["Neural", "Theory"]);
        assert_eq!(ds.graph.labels().unwrap().as_slice(), &[0, 1, 0]);
        assert_eq!(ds.graph.d(), 2);
    }

    #[test]
    fn edges_symmetrized_and_dangling_dropped() {
        let dir = tempfile::tempdir().unwrap();
        let content = write(dir.path(), "c", "a\t1\tx\nb\t0\ty\nc\t1\tx\n");
        let cites = write(dir.path(), "e", "a\tb\nb\ta\nc\tzz\nc\ta\n");
        let ds = load_citation_dataset(&content, &cites).unwrap();
        assert_eq!(ds.dropped_edges, 1);
        assert_eq!(ds.graph.adjacency().num_edges(), 2);
        assert!(ds.graph.adjacency().has_edge(0, 2));
        assert!(ds.graph.adjacency().check_invariants());
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let content = write(dir.path(), "c", "a\t1\tx\nb\tfoo\ty\n");
        let cites = write(dir.path(), "e", "");
        match load_citation_dataset(&content, &cites) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn nonbinary_values_are_counted() {
        let dir = tempfile::tempdir().unwrap();
        let content = write(dir.path(), "c", "a\t0.5\tx\nb\t2\ty\n");
        let cites = write(dir.path(), "e", "");
        let ds = load_citation_dataset(&content, &cites).unwrap();
        assert_eq!(ds.nonbinary_values, 2);
    }
}
