//! Secure-link compilation: every secure link between blocks on different
//! devices is replaced by a mapped, wired and configured instance of its
//! security mechanism. Key exchanges are emitted once per device pair.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::format::SystemDocument;
use crate::library::{instantiate, Fragment, LibraryError, SecurityLibrary};
use crate::model::{
    validate_network, Connection, ConnectionKind, DeploymentMapping, Endpoint, FbNetwork, FbType,
    PortRef, SecureLinkAnnotation, ValidationReport,
};
use crate::trace::{NodeKind, TraceGraph};

#[derive(Debug, Error)]
pub enum CompileError {
    #[error("input system is invalid:\n{0}")]
    InvalidInput(ValidationReport),
    #[error("instance `{0}` is not mapped to any device")]
    UnmappedInstance(String),
    #[error("secure link `{link}` names unknown mechanism `{mechanism}`")]
    UnknownMechanism { link: String, mechanism: String },
    #[error("secure link `{link}` names unknown requirement `{requirement}`")]
    UnknownRequirement { link: String, requirement: String },
    #[error("secure link `{0}` has an open endpoint and cannot be placed on a device pair")]
    OpenEndpointOnCrossDeviceLink(String),
    #[error(
        "mechanism `{mechanism}` requires `{key_exchange}`, which is not a key-exchange mechanism"
    )]
    NotAKeyExchange {
        mechanism: String,
        key_exchange: String,
    },
    #[error("type `{0}` is defined differently by the system and a mechanism")]
    TypeConflict(String),
    #[error("generated instance name `{0}` is already in use")]
    NameCollision(String),
    #[error(transparent)]
    Library(#[from] LibraryError),
    #[error("compiled network failed validation:\n{0}")]
    InvalidOutput(ValidationReport),
}

fn device_of(mapping: &DeploymentMapping, instance: &str) -> Result<String, CompileError> {
    mapping
        .device_of(instance)
        .map(str::to_string)
        .map_err(|_| CompileError::UnmappedInstance(instance.to_string()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CompileOptions {
    /// One key exchange per device pair instead of one per link.
    pub share_key_exchanges: bool,
}

impl Default for CompileOptions {
    fn default() -> Self {
        CompileOptions {
            share_key_exchanges: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinkStatus {
    Instantiated,
    SkippedColocated,
}

impl LinkStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            LinkStatus::Instantiated => "instantiated",
            LinkStatus::SkippedColocated => "skipped-colocated",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceEvent {
    pub link_id: String,
    pub mechanism: String,
    /// Generated instance names, sorted. Empty for skipped links.
    pub instances: Vec<String>,
    pub status: LinkStatus,
}

/// Unordered device pair, stored sorted.
pub type DevicePair = (String, String);

fn pair(a: &str, b: &str) -> DevicePair {
    if a <= b {
        (a.to_string(), b.to_string())
    } else {
        (b.to_string(), a.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeyExchangePlan {
    pub devices: DevicePair,
    pub mechanism: String,
    pub link_ids: Vec<String>,
    /// Device of the sending partition, then of the receiving partition.
    pub orientation: (String, String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeyExchangeInstance {
    /// Suffix used when renaming the key-exchange blocks.
    pub id: String,
    pub devices: DevicePair,
    pub mechanism: String,
    pub link_ids: Vec<String>,
    pub instances: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompilationOutcome {
    pub network: FbNetwork,
    pub mapping: DeploymentMapping,
    pub trace_events: Vec<TraceEvent>,
    pub shared_key_exchanges: Vec<KeyExchangeInstance>,
}

impl CompilationOutcome {
    pub fn count(&self, status: LinkStatus) -> usize {
        self.trace_events
            .iter()
            .filter(|e| e.status == status)
            .count()
    }

    /// e.g. `3 instantiated, 0 skipped, 2 key exchanges (1 shared by 2 links)`
    pub fn summary(&self) -> String {
        let mut out = format!(
            "{} instantiated, {} skipped",
            self.count(LinkStatus::Instantiated),
            self.count(LinkStatus::SkippedColocated)
        );
        let total = self.shared_key_exchanges.len();
        if total > 0 {
            let plural = if total == 1 { "" } else { "s" };
            out.push_str(&format!(", {total} key exchange{plural}"));
            let shared: Vec<_> = self
                .shared_key_exchanges
                .iter()
                .filter(|k| k.link_ids.len() > 1)
                .collect();
            if !shared.is_empty() {
                let links: usize = shared.iter().map(|k| k.link_ids.len()).sum();
                out.push_str(&format!(" ({} shared by {links} links)", shared.len()));
            }
        }
        out
    }

    /// The compiled system, named like `template`.
    pub fn to_system(&self, template: &SystemDocument) -> SystemDocument {
        SystemDocument {
            name: template.name.clone(),
            application: template.application.clone(),
            network: self.network.clone(),
            mapping: self.mapping.clone(),
        }
    }
}

pub fn strip_annotations(fbn: &FbNetwork) -> FbNetwork {
    fbn.strip_annotations()
}

/// Plans shared key exchanges: one entry per unordered device pair and
/// key-exchange mechanism, sorted by pair then mechanism.
pub fn plan_key_exchanges(
    links: &[(SecureLinkAnnotation, DevicePair)],
    lib: &SecurityLibrary,
) -> Result<Vec<KeyExchangePlan>, CompileError> {
    plan(links, lib, true)
}

/// `links` carry the (source device, target device) of each link in
/// processing order.
fn plan(
    links: &[(SecureLinkAnnotation, DevicePair)],
    lib: &SecurityLibrary,
    share: bool,
) -> Result<Vec<KeyExchangePlan>, CompileError> {
    let mut entries: Vec<KeyExchangePlan> = Vec::new();
    for (sl, (src_dev, trg_dev)) in links {
        let sm = lib
            .get(&sl.mechanism)
            .ok_or_else(|| CompileError::UnknownMechanism {
                link: sl.link_id.clone(),
                mechanism: sl.mechanism.clone(),
            })?;
        let Some(kx) = &sm.key_exchange_ref else {
            continue;
        };
        let devices = pair(src_dev, trg_dev);
        let existing = entries
            .iter_mut()
            .find(|e| share && e.devices == devices && &e.mechanism == kx);
        match existing {
            Some(e) => e.link_ids.push(sl.link_id.clone()),
            None => entries.push(KeyExchangePlan {
                devices,
                mechanism: kx.clone(),
                link_ids: vec![sl.link_id.clone()],
                orientation: (src_dev.clone(), trg_dev.clone()),
            }),
        }
    }
    entries.sort_by(|a, b| (&a.devices, &a.mechanism).cmp(&(&b.devices, &b.mechanism)));
    Ok(entries)
}

fn merge_types(
    into: &mut BTreeMap<String, FbType>,
    from: &BTreeMap<String, FbType>,
) -> Result<(), CompileError> {
    for (name, ty) in from {
        match into.get(name) {
            Some(existing) if existing != ty => {
                return Err(CompileError::TypeConflict(name.clone()))
            }
            Some(_) => {}
            None => {
                into.insert(name.clone(), ty.clone());
            }
        }
    }
    Ok(())
}

fn add_fragment(
    out: &mut FbNetwork,
    mapping: &mut DeploymentMapping,
    frag: &Fragment,
    a_device: &str,
    b_device: &str,
) -> Result<(), CompileError> {
    merge_types(&mut out.types, &frag.network.types)?;
    for inst in &frag.network.instances {
        if out.instance(&inst.name).is_some() {
            return Err(CompileError::NameCollision(inst.name.clone()));
        }
        out.instances.push(inst.clone());
        let device = if frag.partition_a.contains(&inst.name) {
            a_device
        } else {
            b_device
        };
        mapping.assign(&inst.name, device);
    }
    Ok(())
}

fn associated_event(fbn: &FbNetwork, port: &PortRef) -> Option<PortRef> {
    fbn.type_of(&port.instance)
        .and_then(|t| t.associated_event(&port.port))
        .map(|e| PortRef::new(port.instance.clone(), e))
}

/// Weaves every cross-device secure link of `sys`, in document order.
pub fn compile(
    sys: &SystemDocument,
    lib: &SecurityLibrary,
    graph: &TraceGraph,
    options: CompileOptions,
) -> Result<CompilationOutcome, CompileError> {
    let report = sys.validate();
    if !report.is_valid() {
        return Err(CompileError::InvalidInput(report));
    }
    for inst in &sys.network.instances {
        device_of(&sys.mapping, &inst.name)?;
    }

    struct Planned<'a> {
        conn: &'a Connection,
        link: &'a SecureLinkAnnotation,
        src: &'a PortRef,
        trg: &'a PortRef,
        src_dev: String,
        trg_dev: String,
    }
    let mut planned = Vec::new();
    for (conn, link) in sys.network.secure_links() {
        let sm = lib
            .get(&link.mechanism)
            .ok_or_else(|| CompileError::UnknownMechanism {
                link: link.link_id.clone(),
                mechanism: link.mechanism.clone(),
            })?;
        if let Some(kx) = &sm.key_exchange_ref {
            match lib.get(kx) {
                None => {
                    return Err(CompileError::UnknownMechanism {
                        link: link.link_id.clone(),
                        mechanism: kx.clone(),
                    })
                }
                Some(k) if !k.is_key_exchange => {
                    return Err(CompileError::NotAKeyExchange {
                        mechanism: sm.name.clone(),
                        key_exchange: kx.clone(),
                    })
                }
                Some(_) => {}
            }
        }
        match graph.node(&link.requirement) {
            Some(n) if n.kind == NodeKind::Requirement => {}
            _ => {
                return Err(CompileError::UnknownRequirement {
                    link: link.link_id.clone(),
                    requirement: link.requirement.clone(),
                })
            }
        }
        let (Some(src), Some(trg)) = (conn.src.as_port(), conn.trg.as_port()) else {
            return Err(CompileError::OpenEndpointOnCrossDeviceLink(
                link.link_id.clone(),
            ));
        };
        planned.push(Planned {
            conn,
            link,
            src,
            trg,
            src_dev: device_of(&sys.mapping, &src.instance)?,
            trg_dev: device_of(&sys.mapping, &trg.instance)?,
        });
    }

    let mut network = sys.network.strip_annotations();
    let mut mapping = sys.mapping.clone();
    let mut trace_events = Vec::new();
    let mut woven = Vec::new();

    for p in &planned {
        if p.src_dev == p.trg_dev {
            trace_events.push(TraceEvent {
                link_id: p.link.link_id.clone(),
                mechanism: p.link.mechanism.clone(),
                instances: Vec::new(),
                status: LinkStatus::SkippedColocated,
            });
            continue;
        }
        let sm = lib.get(&p.link.mechanism).expect("checked above");
        let frag = instantiate(sm, &p.link.link_id, &p.link.values)?;
        add_fragment(&mut network, &mut mapping, &frag, &p.src_dev, &p.trg_dev)?;

        // The original connection becomes the entry connection.
        let plain = Connection::data(p.conn.src.clone(), p.conn.trg.clone());
        let slot = network
            .connections
            .iter()
            .position(|c| c == &plain)
            .expect("stripped copy keeps every connection");
        network.connections[slot] = Connection::data(
            Endpoint::Port(p.src.clone()),
            Endpoint::Port(frag.cin_target.clone()),
        );

        for c in &frag.network.connections {
            let is_cin = c.kind == ConnectionKind::Data
                && c.src.is_open()
                && c.trg.as_port() == Some(&frag.cin_target);
            if is_cin {
                continue;
            }
            let mut c = c.clone();
            if c.kind == ConnectionKind::Data
                && c.trg.is_open()
                && c.src.as_port() == Some(&frag.cout_source)
            {
                c.trg = Endpoint::Port(p.trg.clone());
            }
            network.connections.push(c);
        }

        let entry = associated_event(&network, &frag.cin_target);
        let exit = associated_event(&network, &frag.cout_source);
        if let (Some(from), Some(to)) = (associated_event(&network, p.src), entry) {
            network
                .connections
                .push(Connection::event(Endpoint::Port(from), Endpoint::Port(to)));
        }
        if let (Some(from), Some(to)) = (exit, associated_event(&network, p.trg)) {
            network
                .connections
                .push(Connection::event(Endpoint::Port(from), Endpoint::Port(to)));
        }

        let mut instances = frag.instance_names();
        instances.sort();
        trace_events.push(TraceEvent {
            link_id: p.link.link_id.clone(),
            mechanism: sm.name.clone(),
            instances,
            status: LinkStatus::Instantiated,
        });
        woven.push((p.link.clone(), (p.src_dev.clone(), p.trg_dev.clone())));
    }

    let mut shared_key_exchanges = Vec::new();
    for entry in plan(&woven, lib, options.share_key_exchanges)? {
        let kx = lib.get(&entry.mechanism).expect("checked above");
        let id = if options.share_key_exchanges {
            format!(
                "{}_{}_{}",
                entry.mechanism, entry.devices.0, entry.devices.1
            )
        } else {
            format!("{}_KX", entry.link_ids[0])
        };
        let frag = instantiate(kx, &id, &BTreeMap::new())?;
        add_fragment(
            &mut network,
            &mut mapping,
            &frag,
            &entry.orientation.0,
            &entry.orientation.1,
        )?;
        network
            .connections
            .extend(frag.network.connections.iter().cloned());
        let mut instances = frag.instance_names();
        instances.sort();
        shared_key_exchanges.push(KeyExchangeInstance {
            id,
            devices: entry.devices,
            mechanism: entry.mechanism,
            link_ids: entry.link_ids,
            instances,
        });
    }

    network.canonicalize();
    let report = validate_network(&network);
    if !report.is_valid() {
        return Err(CompileError::InvalidOutput(report));
    }
    Ok(CompilationOutcome {
        network,
        mapping,
        trace_events,
        shared_key_exchanges,
    })
}
