//! Security mechanisms: reusable network fragments with an entry and exit
//! connection, configurable parameters and a send/receive partition.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::format::{parse_mechanism, FormatError};
use crate::model::{
    is_identifier, Connection, Endpoint, FbNetwork, PortDirection, PortKind, PortRef, Resolved,
};

#[derive(Debug, Error)]
pub enum LibraryError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Format { path: PathBuf, source: FormatError },
    #[error("mechanism `{0}` is declared by more than one file")]
    DuplicateMechanismName(String),
    #[error("mechanism `{mechanism}` has no parameter `{param}`")]
    UnknownParam { mechanism: String, param: String },
    #[error("parameter `{param}` of mechanism `{mechanism}` has neither a value nor a default")]
    MissingParam { mechanism: String, param: String },
    #[error("link id `{0}` is not an identifier")]
    InvalidLinkId(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MechanismKind {
    Send,
    Receive,
    SendReceive,
}

impl fmt::Display for MechanismKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MechanismKind::Send => "send",
            MechanismKind::Receive => "receive",
            MechanismKind::SendReceive => "send-receive",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MechanismParam {
    pub name: String,
    pub port: PortRef,
    pub default: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MechanismSignature {
    /// Entry connection; its source is open.
    pub cin: Connection,
    /// Exit connection; its target is open.
    pub cout: Connection,
    /// Sorted by name.
    pub params: Vec<MechanismParam>,
}

impl MechanismSignature {
    pub fn cin_target(&self) -> Option<&PortRef> {
        self.cin.trg.as_port()
    }

    pub fn cout_source(&self) -> Option<&PortRef> {
        self.cout.src.as_port()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SecurityMechanism {
    pub name: String,
    pub network: FbNetwork,
    pub signature: MechanismSignature,
    /// Sending side.
    pub partition_a: BTreeSet<String>,
    /// Receiving side.
    pub partition_b: BTreeSet<String>,
    pub is_key_exchange: bool,
    pub key_exchange_ref: Option<String>,
}

impl SecurityMechanism {
    pub fn kind(&self) -> MechanismKind {
        classify(self)
    }

    pub fn param(&self, name: &str) -> Option<&MechanismParam> {
        self.signature.params.iter().find(|p| p.name == name)
    }
}

pub fn classify(sm: &SecurityMechanism) -> MechanismKind {
    match (sm.partition_a.is_empty(), sm.partition_b.is_empty()) {
        (true, _) => MechanismKind::Receive,
        (false, true) => MechanismKind::Send,
        (false, false) => MechanismKind::SendReceive,
    }
}

fn violation(sm: &SecurityMechanism, message: impl fmt::Display) -> FormatError {
    FormatError::Signature(format!("mechanism `{}`: {message}", sm.name))
}

/// Structural checks on signature and partitions. The inner network is
/// assumed to have passed network validation already.
pub fn validate_signature(sm: &SecurityMechanism) -> Result<(), FormatError> {
    let sig = &sm.signature;
    let fbn = &sm.network;

    if !sig.cin.src.is_open() {
        return Err(violation(
            sm,
            "the entry connection must have an open source",
        ));
    }
    if !sig.cout.trg.is_open() {
        return Err(violation(
            sm,
            "the exit connection must have an open target",
        ));
    }
    let (Some(cin_dst), Some(cout_src)) = (sig.cin_target(), sig.cout_source()) else {
        return Err(violation(
            sm,
            "entry and exit connections must touch the mechanism network",
        ));
    };
    if !fbn.connections.contains(&sig.cin) {
        return Err(violation(
            sm,
            format!("no data connection from #OPEN to `{cin_dst}`; the entry source must be open"),
        ));
    }
    if !fbn.connections.contains(&sig.cout) {
        return Err(violation(
            sm,
            format!("no data connection from `{cout_src}` to #OPEN; the exit target must be open"),
        ));
    }
    for c in &fbn.connections {
        let open = c.src.is_open() || c.trg.is_open();
        if open && c != &sig.cin && c != &sig.cout {
            return Err(violation(
                sm,
                format!("{c} is open but is neither entry nor exit"),
            ));
        }
        if c.secure_link.is_some() {
            return Err(violation(
                sm,
                "mechanism networks cannot carry secure links",
            ));
        }
    }

    let names: BTreeSet<String> = fbn.instances.iter().map(|i| i.name.clone()).collect();
    if let Some(both) = sm.partition_a.intersection(&sm.partition_b).next() {
        return Err(violation(sm, format!("`{both}` is in both partitions")));
    }
    let covered: BTreeSet<String> = sm.partition_a.union(&sm.partition_b).cloned().collect();
    if covered != names {
        let missing: Vec<_> = names.difference(&covered).cloned().collect();
        let extra: Vec<_> = covered.difference(&names).cloned().collect();
        return Err(violation(
            sm,
            format!("partitions must cover the instances exactly (missing {missing:?}, unknown {extra:?})"),
        ));
    }
    if !sm.partition_a.is_empty() && !sm.partition_a.contains(&cin_dst.instance) {
        return Err(violation(
            sm,
            "the entry block must belong to the sending partition",
        ));
    }
    if !sm.partition_b.is_empty() && !sm.partition_b.contains(&cout_src.instance) {
        return Err(violation(
            sm,
            "the exit block must belong to the receiving partition",
        ));
    }

    let mut seen = HashSet::new();
    for p in &sig.params {
        if !seen.insert(p.name.as_str()) {
            return Err(violation(
                sm,
                format!("parameter `{}` declared twice", p.name),
            ));
        }
        match fbn.resolve_endpoint(&Endpoint::Port(p.port.clone())) {
            Ok(Resolved::Port { decl, .. })
                if decl.kind == PortKind::Data && decl.direction == PortDirection::Input => {}
            _ => {
                return Err(violation(
                    sm,
                    format!(
                        "parameter `{}` must name an input variable, found `{}`",
                        p.name, p.port
                    ),
                ))
            }
        }
        let wired = fbn
            .data_connections()
            .any(|c| c.trg.as_port() == Some(&p.port));
        if wired {
            return Err(violation(
                sm,
                format!("parameter port `{}` has an incoming connection", p.port),
            ));
        }
    }
    let mut ports = HashSet::new();
    for p in &sig.params {
        if !ports.insert(&p.port) {
            return Err(violation(
                sm,
                format!("port `{}` is bound to two parameters", p.port),
            ));
        }
    }

    if sm.is_key_exchange && sm.key_exchange_ref.is_some() {
        return Err(violation(
            sm,
            "a key exchange cannot itself require a key exchange",
        ));
    }
    Ok(())
}

/// A renamed copy of a mechanism network, ready to be woven into a system.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fragment {
    pub mechanism: String,
    pub network: FbNetwork,
    pub partition_a: BTreeSet<String>,
    pub partition_b: BTreeSet<String>,
    pub cin_target: PortRef,
    pub cout_source: PortRef,
}

impl Fragment {
    pub fn instance_names(&self) -> Vec<String> {
        self.network
            .instances
            .iter()
            .map(|i| i.name.clone())
            .collect()
    }
}

pub fn instance_name(original: &str, link_id: &str) -> String {
    format!("{original}_{link_id}")
}

/// Copies `sm` with every instance renamed to `<name>_<link_id>` and every
/// parameter assigned from `values` or its default.
pub fn instantiate(
    sm: &SecurityMechanism,
    link_id: &str,
    values: &BTreeMap<String, String>,
) -> Result<Fragment, LibraryError> {
    if !is_identifier(link_id) {
        return Err(LibraryError::InvalidLinkId(link_id.to_string()));
    }
    if let Some(unknown) = values.keys().find(|k| sm.param(k).is_none()) {
        return Err(LibraryError::UnknownParam {
            mechanism: sm.name.clone(),
            param: unknown.clone(),
        });
    }

    let rename = |name: &str| instance_name(name, link_id);
    let rename_port = |p: &PortRef| PortRef::new(rename(&p.instance), p.port.clone());
    let rename_endpoint = |e: &Endpoint| match e {
        Endpoint::Open => Endpoint::Open,
        Endpoint::Port(p) => Endpoint::Port(rename_port(p)),
    };

    let mut network = FbNetwork {
        types: sm.network.types.clone(),
        ..FbNetwork::default()
    };
    for inst in &sm.network.instances {
        let mut copy = inst.clone();
        copy.name = rename(&inst.name);
        network.instances.push(copy);
    }
    network.canonicalize();
    network.connections = sm
        .network
        .connections
        .iter()
        .map(|c| Connection {
            kind: c.kind,
            src: rename_endpoint(&c.src),
            trg: rename_endpoint(&c.trg),
            secure_link: None,
        })
        .collect();

    for p in &sm.signature.params {
        let value = values.get(&p.name).or(p.default.as_ref()).ok_or_else(|| {
            LibraryError::MissingParam {
                mechanism: sm.name.clone(),
                param: p.name.clone(),
            }
        })?;
        let target = rename_port(&p.port);
        network
            .instance_mut(&target.instance)
            .expect("signature validation guarantees the parameter instance exists")
            .parameters
            .insert(target.port, value.clone());
    }

    let cin_target = sm
        .signature
        .cin_target()
        .expect("validated entry connection");
    let cout_source = sm
        .signature
        .cout_source()
        .expect("validated exit connection");
    Ok(Fragment {
        mechanism: sm.name.clone(),
        network,
        partition_a: sm.partition_a.iter().map(|n| rename(n)).collect(),
        partition_b: sm.partition_b.iter().map(|n| rename(n)).collect(),
        cin_target: rename_port(cin_target),
        cout_source: rename_port(cout_source),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SecurityLibrary {
    pub mechanisms: BTreeMap<String, SecurityMechanism>,
}

impl SecurityLibrary {
    pub fn get(&self, name: &str) -> Option<&SecurityMechanism> {
        self.mechanisms.get(name)
    }

    pub fn insert(&mut self, sm: SecurityMechanism) -> Result<(), LibraryError> {
        if self.mechanisms.contains_key(&sm.name) {
            return Err(LibraryError::DuplicateMechanismName(sm.name));
        }
        self.mechanisms.insert(sm.name.clone(), sm);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.mechanisms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mechanisms.is_empty()
    }
}

/// Loads every `*.mech.xml` file in `dir`, in file-name order.
pub fn load_library(dir: &Path) -> Result<SecurityLibrary, LibraryError> {
    let io = |source| LibraryError::Io {
        path: dir.to_path_buf(),
        source,
    };
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(io)?
        .map(|entry| entry.map(|e| e.path()))
        .collect::<Result<_, _>>()
        .map_err(io)?;
    paths.retain(|p| {
        p.is_file()
            && p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.ends_with(".mech.xml"))
    });
    paths.sort();

    let mut lib = SecurityLibrary::default();
    for path in paths {
        let bytes = std::fs::read(&path).map_err(|source| LibraryError::Io {
            path: path.clone(),
            source,
        })?;
        let sm = parse_mechanism(&bytes).map_err(|source| LibraryError::Format {
            path: path.clone(),
            source,
        })?;
        lib.insert(sm)?;
    }
    Ok(lib)
}
