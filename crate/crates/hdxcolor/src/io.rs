//! Instance files.
//!
//! Graph files are plain text: a header line `n m`, then `m` lines `u v`
//! with 0-based vertices. Blank lines and lines starting with `#` are
//! skipped. List files are JSON maps from element id to a color array;
//! the key `"all": q` gives every element not listed explicitly the list
//! `[1..q]`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use crate::graphs::{Graph, GraphError, Kind, ListColoringInstance};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("graph file line {line}: {msg}")]
    Graph { line: usize, msg: String },
    #[error("lists: {0}")]
    Lists(String),
    #[error("lists: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Instance(#[from] GraphError),
}

pub type Result<T> = std::result::Result<T, IoError>;

pub fn parse_graph(text: &str) -> Result<Graph> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let pair = |line: usize, l: &str| -> Result<(usize, usize)> {
        let bad = |msg: &str| IoError::Graph {
            line,
            msg: format!("{msg}: {l:?}"),
        };
        let mut it = l.split_whitespace();
        let a = it.next().ok_or_else(|| bad("expected two integers"))?;
        let b = it.next().ok_or_else(|| bad("expected two integers"))?;
        if it.next().is_some() {
            return Err(bad("expected two integers"));
        }
        Ok((
            a.parse().map_err(|_| bad("not an integer"))?,
            b.parse().map_err(|_| bad("not an integer"))?,
        ))
    };
    let (line, header) = lines.next().ok_or(IoError::Graph {
        line: 1,
        msg: "missing header \"n m\"".into(),
    })?;
    let (n, m) = pair(line, header)?;
    let edges = lines.map(|(i, l)| pair(i, l)).collect::<Result<Vec<_>>>()?;
    if edges.len() != m {
        return Err(IoError::Graph {
            line,
            msg: format!("header announces {m} edges, found {}", edges.len()),
        });
    }
    Ok(Graph::from_edges(n, &edges)?)
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ListEntry {
    All(u32),
    Colors(Vec<u32>),
}

fn range(q: u32) -> Vec<u32> {
    (1..=q).collect()
}

/// Lists for `count` elements from a JSON map.
pub fn parse_lists(text: &str, count: usize) -> Result<Vec<Vec<u32>>> {
    let raw: BTreeMap<String, ListEntry> = serde_json::from_str(text)?;
    let mut all = None;
    let mut lists: Vec<Option<Vec<u32>>> = vec![None; count];
    for (key, entry) in raw {
        match (key.as_str(), entry) {
            ("all", ListEntry::All(q)) => all = Some(q),
            ("all", ListEntry::Colors(_)) => {
                return Err(IoError::Lists("\"all\" takes a palette size".into()))
            }
            (k, ListEntry::Colors(c)) => {
                let id: usize = k
                    .parse()
                    .map_err(|_| IoError::Lists(format!("bad element id {k:?}")))?;
                *lists
                    .get_mut(id)
                    .ok_or_else(|| IoError::Lists(format!("element {id} out of range")))? = Some(c);
            }
            (k, ListEntry::All(_)) => {
                return Err(IoError::Lists(format!(
                    "list of element {k} must be an array"
                )))
            }
        }
    }
    lists
        .into_iter()
        .enumerate()
        .map(|(i, l)| {
            l.or_else(|| all.map(range))
                .ok_or_else(|| IoError::Lists(format!("no list for element {i}")))
        })
        .collect()
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| IoError::Read {
        path: path.to_owned(),
        source,
    })
}

/// Builds an instance from a graph file and either `all:q` or a lists file.
pub fn load_instance(graph: &Path, lists: &str, kind: Kind) -> Result<ListColoringInstance> {
    let g = parse_graph(&read(graph)?)?;
    let count = match kind {
        Kind::Vertex => g.vertex_count(),
        Kind::Edge => g.edge_count(),
    };
    let lists = match lists.strip_prefix("all:") {
        Some(q) => {
            let q: u32 = q
                .trim()
                .parse()
                .map_err(|_| IoError::Lists(format!("bad palette size in {lists:?}")))?;
            vec![range(q); count]
        }
        None => parse_lists(&read(Path::new(lists))?, count)?,
    };
    Ok(ListColoringInstance::new(kind, g, lists)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn graph_file() {
        let g = parse_graph("# path\n3 2\n0 1\n\n1 2\n").unwrap();
        assert_eq!(g, Graph::path(3));
        assert!(matches!(
            parse_graph("3 2\n0 1\n"),
            Err(IoError::Graph { .. })
        ));
        assert!(matches!(
            parse_graph("2 1\n0 x\n"),
            Err(IoError::Graph { line: 2, .. })
        ));
        assert!(matches!(
            parse_graph("2 1\n0 0\n"),
            Err(IoError::Instance(GraphError::SelfLoop(0)))
        ));
        assert!(matches!(parse_graph(""), Err(IoError::Graph { .. })));
        assert_eq!(parse_graph("4 0").unwrap().vertex_count(), 4);
    }

    #[test]
    fn lists_file() {
        assert_eq!(
            parse_lists(r#"{"all": 2, "1": [3, 1]}"#, 3).unwrap(),
            vec![vec![1, 2], vec![3, 1], vec![1, 2]]
        );
        assert_eq!(
            parse_lists(r#"{"0": [1], "1": [2]}"#, 2).unwrap(),
            vec![vec![1], vec![2]]
        );
        assert!(parse_lists(r#"{"0": [1]}"#, 2).is_err());
        assert!(parse_lists(r#"{"5": [1]}"#, 2).is_err());
        assert!(parse_lists(r#"{"all": [1]}"#, 2).is_err());
        assert!(parse_lists("[1]", 2).is_err());
    }

    #[test]
    fn instance_from_files() {
        let dir = std::env::temp_dir().join(format!("hdxcolor-io-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let g = dir.join("star.txt");
        std::fs::write(&g, "3 2\n0 1\n0 2\n").unwrap();
        let l = dir.join("lists.json");
        std::fs::write(&l, r#"{"0": [1, 2], "1": [2, 3]}"#).unwrap();
        let e = load_instance(&g, l.to_str().unwrap(), Kind::Edge).unwrap();
        assert_eq!(e.lists(), &[vec![1, 2], vec![2, 3]]);
        let v = load_instance(&g, "all:3", Kind::Vertex).unwrap();
        assert_eq!(v.element_count(), 3);
        assert!(matches!(
            load_instance(&dir.join("nope"), "all:3", Kind::Vertex),
            Err(IoError::Read { .. })
        ));
        assert!(load_instance(&g, "all:x", Kind::Vertex).is_err());
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
