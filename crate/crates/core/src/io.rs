//! File formats: edge-list and JSON digraphs, plus JSON colorings, list
//! assignments and reserve plans.
//!
//! Edge-list format: first line is the vertex count, each following
//! non-empty line is `u v` for an arc u -> v, `#` starts a comment.
//! Digraph JSON: `{"n": 3, "arcs": [[0,1],[1,2]]}`.
//! Coloring JSON: `{"colors": {"u,v": c-or-null, ...}}`.
//! Lists JSON: `{"lists": {"u,v": [c, ...], ...}}`.
//! Reserve JSON: `{"reserve": {"v": [c, ...], ...}}`.

use crate::coloring::{Color, ListAssignment, PartialColoring};
use crate::digraph::{Digraph, DigraphError, Vertex};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    EdgeList,
    Json,
}

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("bad json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid digraph: {0}")]
    Digraph(#[from] DigraphError),
    #[error("unknown arc ({0}, {1})")]
    UnknownArc(Vertex, Vertex),
    #[error("bad arc key {0:?}; expected \"u,v\"")]
    BadArcKey(String),
}

#[derive(Serialize, Deserialize)]
struct DigraphJson {
    n: u32,
    arcs: Vec<(Vertex, Vertex)>,
}

pub fn parse_digraph(text: &str, format: Format) -> Result<Digraph, ParseError> {
    match format {
        Format::Json => {
            let dj: DigraphJson = serde_json::from_str(text)?;
            Ok(Digraph::new(dj.n, dj.arcs)?)
        }
        Format::EdgeList => parse_edge_list(text),
    }
}

pub fn serialize_digraph(d: &Digraph, format: Format) -> String {
    match format {
        Format::Json => {
            let dj = DigraphJson { n: d.n(), arcs: d.arcs().to_vec() };
            serde_json::to_string(&dj).expect("digraph serializes")
        }
        Format::EdgeList => {
            let mut out = String::new();
            out.push_str(&format!("{}\n", d.n()));
            for &(u, v) in d.arcs() {
                out.push_str(&format!("{u} {v}\n"));
            }
            out
        }
    }
}

fn parse_edge_list(text: &str) -> Result<Digraph, ParseError> {
    let mut n: Option<u32> = None;
    let mut arcs = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if n.is_none() {
            n = Some(content.parse().map_err(|_| ParseError::Syntax {
                line,
                message: format!("expected vertex count, got {content:?}"),
            })?);
            continue;
        }
        let mut it = content.split_whitespace();
        let u = parse_vertex(it.next(), line)?;
        let v = parse_vertex(it.next(), line)?;
        if let Some(extra) = it.next() {
            return Err(ParseError::Syntax {
                line,
                message: format!("trailing token {extra:?}"),
            });
        }
        arcs.push((u, v));
    }
    let n = n.ok_or(ParseError::Syntax { line: 0, message: "empty input".into() })?;
    Ok(Digraph::new(n, arcs)?)
}

fn parse_vertex(tok: Option<&str>, line: usize) -> Result<Vertex, ParseError> {
    let tok = tok.ok_or(ParseError::Syntax { line, message: "expected \"u v\"".into() })?;
    tok.parse().map_err(|_| ParseError::Syntax {
        line,
        message: format!("bad vertex {tok:?}"),
    })
}

fn arc_key(u: Vertex, v: Vertex) -> String {
    format!("{u},{v}")
}

fn parse_arc_key(key: &str) -> Result<(Vertex, Vertex), ParseError> {
    let bad = || ParseError::BadArcKey(key.to_string());
    let (a, b) = key.split_once(',').ok_or_else(bad)?;
    let u = a.trim().parse().map_err(|_| bad())?;
    let v = b.trim().parse().map_err(|_| bad())?;
    Ok((u, v))
}

#[derive(Serialize, Deserialize)]
struct ColoringJson {
    colors: BTreeMap<String, Option<Color>>,
}

pub fn coloring_to_json(d: &Digraph, gamma: &PartialColoring) -> String {
    let colors = d
        .arcs()
        .iter()
        .enumerate()
        .map(|(a, &(u, v))| (arc_key(u, v), gamma.color(a)))
        .collect();
    serde_json::to_string_pretty(&ColoringJson { colors }).expect("coloring serializes")
}

pub fn coloring_from_json(d: &Digraph, text: &str) -> Result<PartialColoring, ParseError> {
    let cj: ColoringJson = serde_json::from_str(text)?;
    let mut gamma = PartialColoring::new(d);
    for (key, color) in cj.colors {
        let (u, v) = parse_arc_key(&key)?;
        let a = d.arc_id(u, v).ok_or(ParseError::UnknownArc(u, v))?;
        if let Some(c) = color {
            gamma.assign(d, a, c);
        }
    }
    Ok(gamma)
}

#[derive(Serialize, Deserialize)]
struct ListsJson {
    lists: BTreeMap<String, Vec<Color>>,
}

pub fn lists_to_json(d: &Digraph, lists: &ListAssignment) -> String {
    let m = d
        .arcs()
        .iter()
        .enumerate()
        .map(|(a, &(u, v))| (arc_key(u, v), lists.get(a).to_vec()))
        .collect();
    serde_json::to_string_pretty(&ListsJson { lists: m }).expect("lists serialize")
}

pub fn lists_from_json(d: &Digraph, text: &str) -> Result<ListAssignment, ParseError> {
    let lj: ListsJson = serde_json::from_str(text)?;
    let mut lists = ListAssignment::empty(d);
    for (key, colors) in lj.lists {
        let (u, v) = parse_arc_key(&key)?;
        let a = d.arc_id(u, v).ok_or(ParseError::UnknownArc(u, v))?;
        lists.set(a, colors);
    }
    Ok(lists)
}

#[derive(Serialize, Deserialize)]
struct ReserveJson {
    reserve: BTreeMap<String, Vec<Color>>,
}

pub fn reserve_to_json(reserve: &[Vec<Color>]) -> String {
    let m = reserve
        .iter()
        .enumerate()
        .filter(|(_, cs)| !cs.is_empty())
        .map(|(v, cs)| (v.to_string(), cs.clone()))
        .collect();
    serde_json::to_string_pretty(&ReserveJson { reserve: m }).expect("reserve serializes")
}

pub fn reserve_from_json(n: u32, text: &str) -> Result<Vec<Vec<Color>>, ParseError> {
    let rj: ReserveJson = serde_json::from_str(text)?;
    let mut out = vec![Vec::new(); n as usize];
    for (key, mut colors) in rj.reserve {
        let v: u32 = key
            .trim()
            .parse()
            .map_err(|_| ParseError::BadArcKey(key.clone()))?;
        if v >= n {
            return Err(ParseError::Syntax {
                line: 0,
                message: format!("vertex {v} out of range"),
            });
        }
        colors.sort_unstable();
        colors.dedup();
        out[v as usize] = colors;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::symmetric_complete;

    #[test]
    fn edge_list_round_trip() {
        let text = "3\n0 1\n1 2\n";
        let d = parse_digraph(text, Format::EdgeList).unwrap();
        assert_eq!(d.n(), 3);
        assert_eq!(d.arcs(), &[(0, 1), (1, 2)]);
        let back = serialize_digraph(&d, Format::EdgeList);
        assert_eq!(parse_digraph(&back, Format::EdgeList).unwrap(), d);
    }

    #[test]
    fn edge_list_comments_and_errors() {
        let d = parse_digraph("# header\n2 # two vertices\n0 1\n\n", Format::EdgeList).unwrap();
        assert_eq!(d.num_arcs(), 1);
        assert!(matches!(
            parse_digraph("2\n0 0\n", Format::EdgeList),
            Err(ParseError::Digraph(DigraphError::Loop(0)))
        ));
        assert!(matches!(
            parse_digraph("2\n0 x\n", Format::EdgeList),
            Err(ParseError::Syntax { line: 2, .. })
        ));
        assert!(matches!(
            parse_digraph("2\n0 1 5\n", Format::EdgeList),
            Err(ParseError::Syntax { line: 2, .. })
        ));
    }

    #[test]
    fn json_round_trip_k3() {
        let d = symmetric_complete(3);
        let js = serialize_digraph(&d, Format::Json);
        assert_eq!(parse_digraph(&js, Format::Json).unwrap(), d);
    }

    #[test]
    fn coloring_round_trip() {
        let d = symmetric_complete(3);
        let mut gamma = PartialColoring::new(&d);
        gamma.assign(&d, 0, 5);
        gamma.assign(&d, 3, 2);
        let js = coloring_to_json(&d, &gamma);
        let back = coloring_from_json(&d, &js).unwrap();
        assert_eq!(back.color(0), Some(5));
        assert_eq!(back.color(1), None);
        assert_eq!(back.color(3), Some(2));
    }

    #[test]
    fn lists_round_trip() {
        let d = symmetric_complete(3);
        let mut lists = ListAssignment::uniform(&d, 3);
        lists.remove_color(2, 1);
        let js = lists_to_json(&d, &lists);
        let back = lists_from_json(&d, &js).unwrap();
        assert_eq!(back.get(2), &[0, 2]);
        assert_eq!(back.get(0), &[0, 1, 2]);
    }
}
