use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::corpus::Corpus;
use crate::error::{Error, Result};

/// Weighted directed hyperlink graph between domains.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceGraph {
    nodes: Vec<String>,
    index: HashMap<String, usize>,
    /// Out-edges per node, sorted by target.
    out: Vec<Vec<(usize, f64)>>,
    edges: BTreeMap<(usize, usize), u64>,
}

impl SourceGraph {
    pub fn from_edges(nodes: Vec<String>, edges: BTreeMap<(usize, usize), u64>) -> Result<Self> {
        let index: HashMap<String, usize> = nodes.iter().enumerate().map(|(i, n)| (n.clone(), i)).collect();
        if index.len() != nodes.len() {
            return Err(Error::invalid("duplicate node names"));
        }
        let mut out = vec![Vec::new(); nodes.len()];
        for (&(u, v), &w) in &edges {
            if u >= nodes.len() || v >= nodes.len() {
                return Err(Error::invalid(format!("edge ({u},{v}) out of range")));
            }
            if u == v {
                return Err(Error::invalid(format!("self-loop on {}", nodes[u])));
            }
            if w == 0 {
                return Err(Error::invalid("edge weights must be >= 1"));
            }
            out[u].push((v, w as f64));
        }
        Ok(Self { nodes, index, out, edges })
    }

    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn node_index(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn out_edges(&self, u: usize) -> &[(usize, f64)] {
        &self.out[u]
    }

    pub fn weight(&self, u: usize, v: usize) -> u64 {
        self.edges.get(&(u, v)).copied().unwrap_or(0)
    }

    pub fn weight_by_name(&self, u: &str, v: &str) -> u64 {
        match (self.node_index(u), self.node_index(v)) {
            (Some(a), Some(b)) => self.weight(a, b),
            _ => 0,
        }
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.edges.contains_key(&(u, v))
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// `src<TAB>dst<TAB>weight` lines in node order.
    pub fn to_tsv(&self) -> String {
        let mut s = String::new();
        for (&(u, v), w) in &self.edges {
            let _ = writeln!(s, "{}\t{}\t{}", self.nodes[u], self.nodes[v], w);
        }
        s
    }

    pub fn save_tsv(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_tsv())?;
        Ok(())
    }

    /// Parses an edge list. Isolated nodes cannot be represented in TSV, so
    /// `extra_nodes` lets callers restore them.
    pub fn from_tsv(text: &str, extra_nodes: &[String]) -> Result<Self> {
        let mut triples = Vec::new();
        let mut names: BTreeSet<String> = extra_nodes.iter().cloned().collect();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split('\t').collect();
            let [src, dst, w] = parts.as_slice() else {
                return Err(Error::Parse { line: i + 1, message: "expected 3 tab-separated fields".into() });
            };
            let w: u64 =
                w.trim().parse().map_err(|e| Error::Parse { line: i + 1, message: format!("bad weight: {e}") })?;
            names.insert(src.to_string());
            names.insert(dst.to_string());
            triples.push((src.to_string(), dst.to_string(), w));
        }
        let nodes: Vec<String> = names.into_iter().collect();
        let index: HashMap<&str, usize> = nodes.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
        let mut edges = BTreeMap::new();
        for (s, d, w) in triples {
            *edges.entry((index[s.as_str()], index[d.as_str()])).or_insert(0) += w;
        }
        Self::from_edges(nodes, edges)
    }

    pub fn load_tsv(path: &Path) -> Result<Self> {
        Self::from_tsv(&fs::read_to_string(path)?, &[])
    }
}

/// Nodes are all sources plus every linked domain (sorted); `weight(u, v)`
/// counts the articles of `u` that link to `v` at least once.
pub fn build_graph(corpus: &Corpus) -> SourceGraph {
    let mut names: BTreeSet<&str> = corpus.sources().iter().map(String::as_str).collect();
    for a in corpus.articles() {
        names.extend(a.links.iter().map(String::as_str));
    }
    let nodes: Vec<String> = names.into_iter().map(String::from).collect();
    let index: HashMap<&str, usize> = nodes.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
    let mut edges: BTreeMap<(usize, usize), u64> = BTreeMap::new();
    for a in corpus.articles() {
        let u = index[a.source.as_str()];
        let targets: BTreeSet<usize> = a.links.iter().map(|l| index[l.as_str()]).collect();
        for v in targets {
            if v != u {
                *edges.entry((u, v)).or_insert(0) += 1;
            }
        }
    }
    SourceGraph::from_edges(nodes, edges).expect("edges built from valid indices")
}
