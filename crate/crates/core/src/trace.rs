//! Requirements traceability graph: standard clauses, system requirements,
//! secure links and the FB instances generated for them.

use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::compiler::{CompilationOutcome, LinkStatus};
use crate::model::SecureLinkAnnotation;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TraceError {
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("unknown requirement `{0}`")]
    UnknownRequirement(String),
    #[error("node `{id}` already exists as a {existing}")]
    ConflictingNode { id: String, existing: NodeKind },
    #[error("{kind} edge {src} -> {dst} must join a {want_src} to a {want_dst}")]
    EdgeTyping {
        src: String,
        dst: String,
        kind: EdgeKind,
        want_src: NodeKind,
        want_dst: NodeKind,
    },
    #[error("child edge {src} -> {dst} breaks the clause forest")]
    NotAForest { src: String, dst: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum NodeKind {
    Clause,
    Requirement,
    SecureLink,
    FbInstance,
}

impl NodeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            NodeKind::Clause => "clause",
            NodeKind::Requirement => "requirement",
            NodeKind::SecureLink => "secure-link",
            NodeKind::FbInstance => "fb-instance",
        }
    }

    pub fn parse(text: &str) -> Option<Self> {
        Some(match text {
            "clause" => NodeKind::Clause,
            "requirement" => NodeKind::Requirement,
            "secure-link" => NodeKind::SecureLink,
            "fb-instance" => NodeKind::FbInstance,
            _ => return None,
        })
    }
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EdgeKind {
    Child,
    Splice,
    Implements,
    Replaces,
}

impl EdgeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EdgeKind::Child => "child",
            EdgeKind::Splice => "splice",
            EdgeKind::Implements => "implements",
            EdgeKind::Replaces => "replaces",
        }
    }

    pub fn parse(text: &str) -> Option<Self> {
        Some(match text {
            "child" => EdgeKind::Child,
            "splice" => EdgeKind::Splice,
            "implements" => EdgeKind::Implements,
            "replaces" => EdgeKind::Replaces,
            _ => return None,
        })
    }

    /// Node kinds an edge of this kind must join.
    pub fn endpoints(self) -> (NodeKind, NodeKind) {
        match self {
            EdgeKind::Child => (NodeKind::Clause, NodeKind::Clause),
            EdgeKind::Splice => (NodeKind::Clause, NodeKind::Requirement),
            EdgeKind::Implements => (NodeKind::Requirement, NodeKind::SecureLink),
            EdgeKind::Replaces => (NodeKind::SecureLink, NodeKind::FbInstance),
        }
    }
}

impl fmt::Display for EdgeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceNode {
    pub id: String,
    pub kind: NodeKind,
    pub title: String,
    /// `system` or `component`.
    pub scope: Option<String>,
    /// Target security level, carried as an opaque label.
    pub level: Option<String>,
}

impl TraceNode {
    pub fn new(id: impl Into<String>, kind: NodeKind, title: impl Into<String>) -> Self {
        TraceNode {
            id: id.into(),
            kind,
            title: title.into(),
            scope: None,
            level: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TraceEdge {
    pub src: String,
    pub dst: String,
    pub kind: EdgeKind,
}

impl TraceEdge {
    pub fn new(src: impl Into<String>, dst: impl Into<String>, kind: EdgeKind) -> Self {
        TraceEdge {
            src: src.into(),
            dst: dst.into(),
            kind,
        }
    }
}

/// Nodes and edges keep insertion order so that persisted repositories
/// only ever grow at the end.
#[derive(Debug, Clone, Default)]
pub struct TraceGraph {
    nodes: Vec<TraceNode>,
    index: HashMap<String, usize>,
    edges: Vec<TraceEdge>,
    edge_set: HashSet<TraceEdge>,
}

impl PartialEq for TraceGraph {
    fn eq(&self, other: &Self) -> bool {
        self.nodes == other.nodes && self.edges == other.edges
    }
}

impl Eq for TraceGraph {}

impl TraceGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn nodes(&self) -> &[TraceNode] {
        &self.nodes
    }

    pub fn edges(&self) -> &[TraceEdge] {
        &self.edges
    }

    pub fn node(&self, id: &str) -> Option<&TraceNode> {
        self.index.get(id).map(|&i| &self.nodes[i])
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    /// Adds a node. Re-adding an id with the same kind keeps the existing
    /// node and returns `false`.
    pub fn add_node(&mut self, node: TraceNode) -> Result<bool, TraceError> {
        if let Some(existing) = self.node(&node.id) {
            if existing.kind != node.kind {
                return Err(TraceError::ConflictingNode {
                    id: node.id,
                    existing: existing.kind,
                });
            }
            return Ok(false);
        }
        self.index.insert(node.id.clone(), self.nodes.len());
        self.nodes.push(node);
        Ok(true)
    }

    /// Adds a typed edge; duplicates are ignored and return `false`.
    pub fn add_edge(&mut self, edge: TraceEdge) -> Result<bool, TraceError> {
        let src = self
            .node(&edge.src)
            .ok_or_else(|| TraceError::UnknownNode(edge.src.clone()))?;
        let dst = self
            .node(&edge.dst)
            .ok_or_else(|| TraceError::UnknownNode(edge.dst.clone()))?;
        let (want_src, want_dst) = edge.kind.endpoints();
        if src.kind != want_src || dst.kind != want_dst {
            return Err(TraceError::EdgeTyping {
                src: edge.src,
                dst: edge.dst,
                kind: edge.kind,
                want_src,
                want_dst,
            });
        }
        if self.edge_set.contains(&edge) {
            return Ok(false);
        }
        if edge.kind == EdgeKind::Child {
            let has_parent = self
                .edges
                .iter()
                .any(|e| e.kind == EdgeKind::Child && e.dst == edge.dst);
            if has_parent || edge.src == edge.dst || self.is_clause_ancestor(&edge.dst, &edge.src) {
                return Err(TraceError::NotAForest {
                    src: edge.src,
                    dst: edge.dst,
                });
            }
        }
        self.edge_set.insert(edge.clone());
        self.edges.push(edge);
        Ok(true)
    }

    /// True when `ancestor` reaches `node` through child edges.
    fn is_clause_ancestor(&self, ancestor: &str, node: &str) -> bool {
        let mut current = node.to_string();
        loop {
            let parent = self
                .edges
                .iter()
                .find(|e| e.kind == EdgeKind::Child && e.dst == current);
            match parent {
                None => return false,
                Some(e) if e.src == ancestor => return true,
                Some(e) => current = e.src.clone(),
            }
        }
    }

    fn reach(&self, start: &str, forward: bool) -> Result<BTreeSet<String>, TraceError> {
        if !self.contains(start) {
            return Err(TraceError::UnknownNode(start.to_string()));
        }
        let mut adjacency: HashMap<&str, Vec<&str>> = HashMap::new();
        for e in &self.edges {
            let (from, to) = if forward {
                (e.src.as_str(), e.dst.as_str())
            } else {
                (e.dst.as_str(), e.src.as_str())
            };
            adjacency.entry(from).or_default().push(to);
        }
        let mut seen = BTreeSet::new();
        let mut queue = VecDeque::from([start]);
        while let Some(id) = queue.pop_front() {
            for &next in adjacency.get(id).into_iter().flatten() {
                if next != start && seen.insert(next.to_string()) {
                    queue.push_back(next);
                }
            }
        }
        Ok(seen)
    }
}

/// Every node reachable from `id` along edge direction.
pub fn trace_forward(g: &TraceGraph, id: &str) -> Result<BTreeSet<String>, TraceError> {
    g.reach(id, true)
}

/// Every node from which `id` is reachable.
pub fn trace_back(g: &TraceGraph, id: &str) -> Result<BTreeSet<String>, TraceError> {
    g.reach(id, false)
}

/// Records secure-link nodes, `implements` edges and, for woven links,
/// `replaces` edges to every generated instance. Idempotent.
pub fn apply_compile_events(
    g: &TraceGraph,
    outcome: &CompilationOutcome,
    links: &[SecureLinkAnnotation],
) -> Result<TraceGraph, TraceError> {
    let mut out = g.clone();
    for link in links {
        match out.node(&link.requirement) {
            Some(n) if n.kind == NodeKind::Requirement => {}
            _ => return Err(TraceError::UnknownRequirement(link.requirement.clone())),
        }
    }
    for link in links {
        out.add_node(TraceNode::new(
            &link.link_id,
            NodeKind::SecureLink,
            format!("{} secure link", link.mechanism),
        ))?;
        out.add_edge(TraceEdge::new(
            &link.requirement,
            &link.link_id,
            EdgeKind::Implements,
        ))?;
    }
    for event in &outcome.trace_events {
        if event.status != LinkStatus::Instantiated {
            continue;
        }
        if !out.contains(&event.link_id) {
            out.add_node(TraceNode::new(
                &event.link_id,
                NodeKind::SecureLink,
                format!("{} secure link", event.mechanism),
            ))?;
        }
        for inst in &event.instances {
            out.add_node(TraceNode::new(inst, NodeKind::FbInstance, &event.mechanism))?;
            out.add_edge(TraceEdge::new(&event.link_id, inst, EdgeKind::Replaces))?;
        }
    }
    for kx in &outcome.shared_key_exchanges {
        for inst in &kx.instances {
            out.add_node(TraceNode::new(inst, NodeKind::FbInstance, &kx.mechanism))?;
            for link in &kx.link_ids {
                if out.contains(link) {
                    out.add_edge(TraceEdge::new(link, inst, EdgeKind::Replaces))?;
                }
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageReport {
    pub requirements: usize,
    pub implemented: usize,
    pub requirement_coverage: f64,
    pub spliced_clauses: usize,
    pub clauses_reaching_instances: usize,
    pub clause_coverage: f64,
    pub uncovered: Vec<String>,
    /// No requirements at all; the coverage figure carries no information.
    pub vacuous: bool,
}

fn ratio(part: usize, whole: usize) -> f64 {
    if whole == 0 {
        1.0
    } else {
        part as f64 / whole as f64
    }
}

pub fn coverage(g: &TraceGraph) -> CoverageReport {
    let implemented_ids: HashSet<&str> = g
        .edges
        .iter()
        .filter(|e| e.kind == EdgeKind::Implements)
        .map(|e| e.src.as_str())
        .collect();
    let requirements: Vec<&TraceNode> = g
        .nodes
        .iter()
        .filter(|n| n.kind == NodeKind::Requirement)
        .collect();
    let mut uncovered: Vec<String> = requirements
        .iter()
        .filter(|n| !implemented_ids.contains(n.id.as_str()))
        .map(|n| n.id.clone())
        .collect();
    uncovered.sort();

    let spliced: BTreeSet<&str> = g
        .edges
        .iter()
        .filter(|e| e.kind == EdgeKind::Splice)
        .map(|e| e.src.as_str())
        .collect();
    let reaching = spliced
        .iter()
        .filter(|id| {
            trace_forward(g, id).is_ok_and(|set| {
                set.iter()
                    .any(|n| g.node(n).is_some_and(|n| n.kind == NodeKind::FbInstance))
            })
        })
        .count();

    let implemented = requirements.len() - uncovered.len();
    CoverageReport {
        requirements: requirements.len(),
        implemented,
        requirement_coverage: ratio(implemented, requirements.len()),
        spliced_clauses: spliced.len(),
        clauses_reaching_instances: reaching,
        clause_coverage: ratio(reaching, spliced.len()),
        uncovered,
        vacuous: requirements.is_empty(),
    }
}
