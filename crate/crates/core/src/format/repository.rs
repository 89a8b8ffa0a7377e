//! Line-oriented `.trace` repository format.
//!
//! ```text
//! NODE <id> <kind> "<title>" [scope=<system|component>] [level=<label>]
//! EDGE <src> <dst> <kind>
//! ```
//!
//! Blank lines and lines starting with `#` are ignored. Edges may refer to
//! nodes declared later in the file.

use crate::trace::{EdgeKind, NodeKind, TraceEdge, TraceError, TraceGraph, TraceNode};

use super::FormatError;

fn malformed(line: usize, message: impl std::fmt::Display) -> FormatError {
    FormatError::Malformed(format!("line {line}: {message}"))
}

/// Splits on whitespace; double-quoted words may contain spaces and the
/// escapes `\"` and `\\`. Returns each word with a flag telling whether it
/// was quoted.
fn words(text: &str, line: usize) -> Result<Vec<(String, bool)>, FormatError> {
    let mut out = Vec::new();
    let mut chars = text.chars().peekable();
    while let Some(&c) = chars.peek() {
        if c.is_whitespace() {
            chars.next();
            continue;
        }
        if c == '"' {
            chars.next();
            let mut word = String::new();
            loop {
                match chars.next() {
                    None => return Err(malformed(line, "unterminated quoted title")),
                    Some('"') => break,
                    Some('\\') => match chars.next() {
                        Some(e @ ('"' | '\\')) => word.push(e),
                        _ => return Err(malformed(line, "invalid escape in quoted title")),
                    },
                    Some(c) => word.push(c),
                }
            }
            if chars.peek().is_some_and(|c| !c.is_whitespace()) {
                return Err(malformed(
                    line,
                    "quoted title must be followed by whitespace",
                ));
            }
            out.push((word, true));
        } else {
            let mut word = String::new();
            while let Some(&c) = chars.peek() {
                if c.is_whitespace() {
                    break;
                }
                if c == '"' {
                    return Err(malformed(line, "stray quote"));
                }
                word.push(c);
                chars.next();
            }
            out.push((word, false));
        }
    }
    Ok(out)
}

fn bare<'a>(word: &'a (String, bool), line: usize, what: &str) -> Result<&'a str, FormatError> {
    if word.1 {
        return Err(malformed(line, format!("{what} must not be quoted")));
    }
    Ok(&word.0)
}

fn parse_node(w: &[(String, bool)], line: usize) -> Result<TraceNode, FormatError> {
    if w.len() < 4 {
        return Err(malformed(
            line,
            "NODE needs an id, a kind and a quoted title",
        ));
    }
    let id = bare(&w[1], line, "node id")?;
    let kind_text = bare(&w[2], line, "node kind")?;
    let kind = NodeKind::parse(kind_text)
        .ok_or_else(|| malformed(line, format!("unknown node kind `{kind_text}`")))?;
    if !w[3].1 {
        return Err(malformed(line, "node title must be quoted"));
    }
    let mut node = TraceNode::new(id, kind, w[3].0.clone());
    for word in &w[4..] {
        let text = bare(word, line, "metadata")?;
        let (key, value) = text
            .split_once('=')
            .ok_or_else(|| malformed(line, format!("expected key=value, found `{text}`")))?;
        let slot = match key {
            "scope" => {
                if value != "system" && value != "component" {
                    return Err(malformed(
                        line,
                        format!("scope must be system or component, found `{value}`"),
                    ));
                }
                &mut node.scope
            }
            "level" => &mut node.level,
            _ => return Err(malformed(line, format!("unknown metadata key `{key}`"))),
        };
        if slot.replace(value.to_string()).is_some() {
            return Err(malformed(line, format!("metadata `{key}` given twice")));
        }
    }
    Ok(node)
}

pub fn parse_repository(bytes: &[u8]) -> Result<TraceGraph, FormatError> {
    let text = std::str::from_utf8(bytes).map_err(|e| FormatError::Malformed(e.to_string()))?;
    let mut graph = TraceGraph::new();
    let mut edges = Vec::new();

    for (index, raw) in text.lines().enumerate() {
        let line = index + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let w = words(trimmed, line)?;
        match bare(&w[0], line, "record type")? {
            "NODE" => {
                let node = parse_node(&w, line)?;
                let added = graph
                    .add_node(node.clone())
                    .map_err(|e| malformed(line, e))?;
                if !added && graph.node(&node.id) != Some(&node) {
                    return Err(malformed(
                        line,
                        format!("node `{}` redeclared differently", node.id),
                    ));
                }
            }
            "EDGE" => {
                if w.len() != 4 {
                    return Err(malformed(
                        line,
                        "EDGE needs a source, a destination and a kind",
                    ));
                }
                let kind_text = bare(&w[3], line, "edge kind")?;
                let kind = EdgeKind::parse(kind_text)
                    .ok_or_else(|| malformed(line, format!("unknown edge kind `{kind_text}`")))?;
                let edge = TraceEdge::new(
                    bare(&w[1], line, "edge source")?,
                    bare(&w[2], line, "edge target")?,
                    kind,
                );
                edges.push((line, edge));
            }
            other => return Err(malformed(line, format!("unknown record `{other}`"))),
        }
    }

    for (line, edge) in edges {
        match graph.add_edge(edge) {
            Ok(_) => {}
            Err(TraceError::UnknownNode(id)) => return Err(FormatError::DanglingEdge { line, id }),
            Err(e) => return Err(FormatError::Schema(format!("line {line}: {e}"))),
        }
    }
    Ok(graph)
}

fn quote(text: &str) -> String {
    let mut out = String::with_capacity(text.len() + 2);
    out.push('"');
    for c in text.chars() {
        if c == '"' || c == '\\' {
            out.push('\\');
        }
        out.push(c);
    }
    out.push('"');
    out
}

pub fn node_record(node: &TraceNode) -> String {
    let mut out = format!("NODE {} {} {}", node.id, node.kind, quote(&node.title));
    if let Some(scope) = &node.scope {
        out.push_str(&format!(" scope={scope}"));
    }
    if let Some(level) = &node.level {
        out.push_str(&format!(" level={level}"));
    }
    out
}

pub fn edge_record(edge: &TraceEdge) -> String {
    format!("EDGE {} {} {}", edge.src, edge.dst, edge.kind)
}

/// All nodes, then all edges, in insertion order.
pub fn serialize_repository(graph: &TraceGraph) -> String {
    let mut out = String::new();
    for n in graph.nodes() {
        out.push_str(&node_record(n));
        out.push('\n');
    }
    for e in graph.edges() {
        out.push_str(&edge_record(e));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const REPO: &str = "# demo\n\
NODE CR4.1 clause \"CR 4.1 Information confidentiality\"\n\
NODE CR4.3 clause \"CR 4.3 Use of cryptography\"\n\
\n\
NODE SR1 requirement \"Keep \\\"it\\\" secret\" scope=component level=L4\n\
EDGE CR4.1 SR1 splice\n\
EDGE CR4.3 SR1 splice\n";

    #[test]
    fn parses_nodes_edges_and_metadata() {
        let g = parse_repository(REPO.as_bytes()).unwrap();
        assert_eq!(g.nodes().len(), 3);
        let sr1 = g.node("SR1").unwrap();
        assert_eq!(sr1.title, "Keep \"it\" secret");
        assert_eq!(sr1.level.as_deref(), Some("L4"));
        let splices = g
            .edges()
            .iter()
            .filter(|e| e.dst == "SR1" && e.kind == EdgeKind::Splice);
        assert_eq!(splices.count(), 2);
    }

    #[test]
    fn serialization_round_trips() {
        let g = parse_repository(REPO.as_bytes()).unwrap();
        let text = serialize_repository(&g);
        assert_eq!(parse_repository(text.as_bytes()).unwrap(), g);
    }

    #[test]
    fn empty_and_dangling() {
        assert!(parse_repository(b"").unwrap().nodes().is_empty());
        assert!(matches!(
            parse_repository(b"NODE A clause \"a\"\nEDGE A SRX splice\n"),
            Err(FormatError::DanglingEdge { line: 2, .. })
        ));
    }

    #[test]
    fn edges_may_precede_their_nodes() {
        let g = parse_repository(b"EDGE A B child\nNODE A clause \"a\"\nNODE B clause \"b\"\n")
            .unwrap();
        assert_eq!(g.edges().len(), 1);
    }

    #[test]
    fn malformed_lines() {
        for bad in [
            "NODE A clause title\n",
            "NODE A thing \"t\"\n",
            "NODE A clause \"t\" scope=galaxy\n",
            "NODE A clause \"unterminated\n",
            "LINK A B\n",
            "EDGE A B\n",
        ] {
            assert!(
                matches!(
                    parse_repository(bad.as_bytes()),
                    Err(FormatError::Malformed(_))
                ),
                "{bad:?}"
            );
        }
    }

    #[test]
    fn typing_violations_are_schema_errors() {
        let doc = b"NODE A clause \"a\"\nNODE R requirement \"r\"\nEDGE R A splice\n";
        assert!(matches!(parse_repository(doc), Err(FormatError::Schema(_))));
    }
}
