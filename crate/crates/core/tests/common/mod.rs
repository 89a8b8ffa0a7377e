#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::sync::OnceLock;

use seclink_core::format::parse_repository;
use seclink_core::library::load_library;
use seclink_core::model::{
    Connection, DeploymentMapping, Endpoint, EventDecl, FbInstance, FbNetwork, FbType,
    SecureLinkAnnotation, Token, VarDecl,
};
use seclink_core::{SecurityLibrary, SystemDocument, TraceGraph};

pub fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn library() -> &'static SecurityLibrary {
    static LIB: OnceLock<SecurityLibrary> = OnceLock::new();
    LIB.get_or_init(|| load_library(&root().join("library")).unwrap())
}

pub fn repository() -> TraceGraph {
    static REPO: OnceLock<TraceGraph> = OnceLock::new();
    REPO.get_or_init(|| {
        parse_repository(&std::fs::read(root().join("fixtures/imcs.trace")).unwrap()).unwrap()
    })
    .clone()
}

/// Mechanisms that can annotate a link directly.
pub const LINK_MECHANISMS: [&str; 3] = ["AEAD_L", "AEAD_TLS", "Hash"];

/// Raw description of a random system, turned into a document by [`build`].
/// (src instance, output, trg instance, input, mechanism, dataLen override)
pub type DataSpec = (usize, usize, usize, usize, Option<usize>, Option<String>);

#[derive(Debug, Clone)]
pub struct Recipe {
    pub instances: usize,
    pub devices: Vec<usize>,
    pub data: Vec<DataSpec>,
    pub events: Vec<(usize, usize)>,
}

fn node_type() -> FbType {
    let mut t = FbType::new("Node");
    t.event_inputs = vec![EventDecl::new("REQ", &["I1", "I2"])];
    t.event_outputs = vec![EventDecl::new("CNF", &["O1", "O2"])];
    t.input_vars = vec![VarDecl::new("I1", "INT"), VarDecl::new("I2", "INT")];
    t.output_vars = vec![VarDecl::new("O1", "INT"), VarDecl::new("O2", "INT")];
    t.loc = 3;
    t
}

pub fn build(recipe: &Recipe) -> SystemDocument {
    let mut fbn = FbNetwork::default();
    let ty = node_type();
    fbn.types.insert(ty.name.clone(), ty);
    let name = |i: usize| format!("N{}", i % recipe.instances);
    for i in 0..recipe.instances {
        fbn.instances.push(FbInstance::new(name(i), "Node"));
    }
    let mut taken = std::collections::HashSet::new();
    for (k, (s, o, t, i, mech, len)) in recipe.data.iter().enumerate() {
        let trg = Endpoint::port(name(*t), format!("I{}", i % 2 + 1));
        if !taken.insert(trg.to_string()) {
            continue;
        }
        let mut c = Connection::data(Endpoint::port(name(*s), format!("O{}", o % 2 + 1)), trg);
        if let Some(m) = mech {
            let mut values = std::collections::BTreeMap::new();
            if let Some(v) = len {
                values.insert("dataLen".to_string(), v.clone());
            }
            c = c.with_secure_link(SecureLinkAnnotation {
                link_id: format!("SL{k}"),
                requirement: if k % 2 == 0 { "SR1" } else { "SR2" }.into(),
                mechanism: LINK_MECHANISMS[m % LINK_MECHANISMS.len()].into(),
                values,
            });
        }
        fbn.connections.push(c);
    }
    for (s, t) in &recipe.events {
        fbn.connections.push(Connection::event(
            Endpoint::port(name(*s), "CNF"),
            Endpoint::port(name(*t), "REQ"),
        ));
    }
    let mut mapping = DeploymentMapping::default();
    for d in 0..3 {
        mapping.devices.insert(format!("D{d}"));
    }
    for i in 0..recipe.instances {
        let d = recipe.devices.get(i).copied().unwrap_or(0) % 3;
        mapping.assign(name(i), format!("D{d}"));
    }
    SystemDocument {
        name: "Random".into(),
        application: "App".into(),
        network: fbn,
        mapping,
    }
}

/// Straight counting, kept apart from the library's bookkeeping.
pub fn halstead_oracle(tokens: &[Token]) -> [f64; 9] {
    let ops: Vec<&str> = tokens
        .iter()
        .filter(|t| t.text.starts_with(|c: char| "-+*/=(;".contains(c)))
        .map(|t| t.text.as_str())
        .collect();
    let rands: Vec<&str> = tokens
        .iter()
        .filter(|t| !t.text.starts_with(|c: char| "-+*/=(;".contains(c)))
        .map(|t| t.text.as_str())
        .collect();
    let n1 = ops.iter().collect::<BTreeSet<_>>().len() as f64;
    let n2 = rands.iter().collect::<BTreeSet<_>>().len() as f64;
    let (big1, big2) = (ops.len() as f64, rands.len() as f64);
    let lg = |x: f64| if x > 0.0 { x * x.log2() } else { 0.0 };
    let n = big1 + big2;
    let voc = n1 + n2;
    let nhat = lg(n1) + lg(n2);
    let v = if voc > 0.0 { n * voc.log2() } else { 0.0 };
    let d = if n2 > 0.0 { n1 / 2.0 * big2 / n2 } else { 0.0 };
    [n, voc, nhat, nhat / n, v, d, d * v, n1, n2]
}

pub fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * (1.0 + a.abs().max(b.abs()))
}

/// Components and independent cycles by union-find.
pub fn cycle_rank(nodes: usize, edges: &[(usize, usize)]) -> (i64, i64) {
    let mut parent: Vec<usize> = (0..nodes).collect();
    fn find(p: &mut Vec<usize>, x: usize) -> usize {
        if p[x] != x {
            let r = find(p, p[x]);
            p[x] = r;
        }
        p[x]
    }
    let mut extra = 0;
    for &(a, b) in edges {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra == rb {
            extra += 1;
        } else {
            parent[ra] = rb;
        }
    }
    let components = (0..nodes).filter(|&x| find(&mut parent, x) == x).count();
    (components as i64, extra)
}

/// Transitive closure by Warshall, indexed by node insertion order.
pub fn closure(g: &TraceGraph) -> Vec<Vec<bool>> {
    let ids: Vec<&str> = g.nodes().iter().map(|n| n.id.as_str()).collect();
    let at = |id: &str| ids.iter().position(|x| *x == id).unwrap();
    let n = ids.len();
    let mut r = vec![vec![false; n]; n];
    for e in g.edges() {
        r[at(&e.src)][at(&e.dst)] = true;
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if r[i][k] && r[k][j] {
                    r[i][j] = true;
                }
            }
        }
    }
    r
}

pub mod strategies {
    use proptest::prelude::*;
    use seclink_core::model::Token;
    use seclink_core::trace::{EdgeKind, NodeKind, TraceEdge, TraceNode};
    use seclink_core::TraceGraph;

    use super::Recipe;

    pub fn token() -> impl Strategy<Value = Token> {
        prop_oneof![
            "[-+*/=(;]{1,2}".prop_map(Token::operator),
            "[a-e0-3]{1,2}".prop_map(Token::operand),
        ]
    }

    pub fn graph() -> impl Strategy<Value = (usize, Vec<(usize, usize)>)> {
        (1..15usize).prop_flat_map(|n| (Just(n), proptest::collection::vec((0..n, 0..n), 0..3 * n)))
    }

    const KINDS: [NodeKind; 4] = [
        NodeKind::Clause,
        NodeKind::Requirement,
        NodeKind::SecureLink,
        NodeKind::FbInstance,
    ];
    const EDGES: [EdgeKind; 4] = [
        EdgeKind::Child,
        EdgeKind::Splice,
        EdgeKind::Implements,
        EdgeKind::Replaces,
    ];

    pub fn trace_graph() -> impl Strategy<Value = TraceGraph> {
        (1..=20usize)
            .prop_flat_map(|n| {
                (
                    proptest::collection::vec(0..4usize, n),
                    proptest::collection::vec((0..n, 0..n, 0..4usize), 0..3 * n),
                )
            })
            .prop_map(|(kinds, edges)| {
                let mut g = TraceGraph::new();
                for (i, k) in kinds.iter().enumerate() {
                    let mut node =
                        TraceNode::new(format!("X{i}"), KINDS[*k], format!("node \"{i}\""));
                    if KINDS[*k] == NodeKind::Requirement {
                        node.level = Some("L2".into());
                        node.scope = Some("system".into());
                    }
                    g.add_node(node).unwrap();
                }
                for (s, d, k) in edges {
                    // Ill-typed and forest-breaking edges are refused; keep the rest.
                    let _ = g.add_edge(TraceEdge::new(format!("X{s}"), format!("X{d}"), EDGES[k]));
                }
                g
            })
    }

    pub fn recipe(max_instances: usize, max_links: usize) -> impl Strategy<Value = Recipe> {
        (1..=max_instances).prop_flat_map(move |n| {
            let value = prop_oneof![
                Just(None),
                "[0-9]{1,3}".prop_map(Some),
                Just(Some("a<b&\"c\"".to_string())),
            ];
            (
                Just(n),
                proptest::collection::vec(0..3usize, n),
                proptest::collection::vec(
                    (
                        0..n,
                        0..2usize,
                        0..n,
                        0..2usize,
                        proptest::option::of(0..3usize),
                        value,
                    ),
                    0..=max_links,
                ),
                proptest::collection::vec((0..n, 0..n), 0..n * 2),
            )
                .prop_map(|(instances, devices, data, events)| Recipe {
                    instances,
                    devices,
                    data,
                    events,
                })
        })
    }
}
