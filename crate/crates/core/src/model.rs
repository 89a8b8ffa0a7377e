//! Function block networks: types, instances, connections and deployment
//! mappings, plus structural validation of the connection restrictions.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;

use thiserror::Error;

/// Literal used in documents for an unconnected endpoint.
pub const OPEN_ENDPOINT: &str = "#OPEN";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("unknown instance `{0}`")]
    UnknownInstance(String),
    #[error("instance `{instance}` has no port `{port}`")]
    UnknownPort { instance: String, port: String },
    #[error("instance `{0}` is not mapped to any device")]
    UnmappedInstance(String),
}

/// A qualified `Instance.Port` reference.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PortRef {
    pub instance: String,
    pub port: String,
}

impl PortRef {
    pub fn new(instance: impl Into<String>, port: impl Into<String>) -> Self {
        PortRef {
            instance: instance.into(),
            port: port.into(),
        }
    }

    /// Splits at the last `.`; port names never contain dots.
    pub fn parse(text: &str) -> Option<Self> {
        let (instance, port) = text.rsplit_once('.')?;
        if instance.is_empty() || port.is_empty() {
            return None;
        }
        Some(PortRef::new(instance, port))
    }
}

impl fmt::Display for PortRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.instance, self.port)
    }
}

/// Either a concrete port or the unconnected marker.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Endpoint {
    Open,
    Port(PortRef),
}

impl Endpoint {
    pub fn port(instance: impl Into<String>, port: impl Into<String>) -> Self {
        Endpoint::Port(PortRef::new(instance, port))
    }

    pub fn is_open(&self) -> bool {
        matches!(self, Endpoint::Open)
    }

    pub fn as_port(&self) -> Option<&PortRef> {
        match self {
            Endpoint::Open => None,
            Endpoint::Port(p) => Some(p),
        }
    }

    pub fn instance(&self) -> Option<&str> {
        self.as_port().map(|p| p.instance.as_str())
    }

    pub fn parse(text: &str) -> Option<Self> {
        if text == OPEN_ENDPOINT {
            Some(Endpoint::Open)
        } else {
            PortRef::parse(text).map(Endpoint::Port)
        }
    }
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Endpoint::Open => f.write_str(OPEN_ENDPOINT),
            Endpoint::Port(p) => p.fmt(f),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ConnectionKind {
    Event,
    Data,
}

impl fmt::Display for ConnectionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ConnectionKind::Event => "event",
            ConnectionKind::Data => "data",
        })
    }
}

/// Annotation turning a data connection into a secure link.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SecureLinkAnnotation {
    pub link_id: String,
    pub requirement: String,
    pub mechanism: String,
    pub values: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Connection {
    pub kind: ConnectionKind,
    pub src: Endpoint,
    pub trg: Endpoint,
    pub secure_link: Option<SecureLinkAnnotation>,
}

impl Connection {
    pub fn event(src: Endpoint, trg: Endpoint) -> Self {
        Connection {
            kind: ConnectionKind::Event,
            src,
            trg,
            secure_link: None,
        }
    }

    pub fn data(src: Endpoint, trg: Endpoint) -> Self {
        Connection {
            kind: ConnectionKind::Data,
            src,
            trg,
            secure_link: None,
        }
    }

    pub fn with_secure_link(mut self, link: SecureLinkAnnotation) -> Self {
        self.secure_link = Some(link);
        self
    }
}

impl fmt::Display for Connection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} connection ({}, {})", self.kind, self.src, self.trg)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VarDecl {
    pub name: String,
    pub data_type: String,
}

impl VarDecl {
    pub fn new(name: impl Into<String>, data_type: impl Into<String>) -> Self {
        VarDecl {
            name: name.into(),
            data_type: data_type.into(),
        }
    }
}

/// An event port together with the variables sampled on it (`WITH`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventDecl {
    pub name: String,
    pub with: Vec<String>,
}

impl EventDecl {
    pub fn new(name: impl Into<String>, with: &[&str]) -> Self {
        EventDecl {
            name: name.into(),
            with: with.iter().map(|s| s.to_string()).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TokenClass {
    Operator,
    Operand,
}

impl TokenClass {
    pub fn as_str(self) -> &'static str {
        match self {
            TokenClass::Operator => "operator",
            TokenClass::Operand => "operand",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Token {
    pub text: String,
    pub class: TokenClass,
}

impl Token {
    pub fn operator(text: impl Into<String>) -> Self {
        Token {
            text: text.into(),
            class: TokenClass::Operator,
        }
    }

    pub fn operand(text: impl Into<String>) -> Self {
        Token {
            text: text.into(),
            class: TokenClass::Operand,
        }
    }
}

/// Size of a control-flow graph. Signed so that malformed declarations can
/// be represented and rejected by the metrics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ControlFlowGraph {
    pub nodes: i64,
    pub edges: i64,
    pub components: i64,
}

impl ControlFlowGraph {
    pub fn new(nodes: i64, edges: i64, components: i64) -> Self {
        ControlFlowGraph {
            nodes,
            edges,
            components,
        }
    }

    pub fn is_well_formed(&self) -> bool {
        self.nodes >= 1
            && self.edges >= 0
            && self.components >= 1
            && self.components <= self.nodes
            && self.edges >= self.nodes - self.components
    }
}

impl Default for ControlFlowGraph {
    fn default() -> Self {
        ControlFlowGraph::new(1, 0, 1)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Algorithm {
    pub name: String,
    pub tokens: Vec<Token>,
    pub cfg: ControlFlowGraph,
}

/// Execution control chart, reduced to its graph size and an optional
/// token stream.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Ecc {
    pub graph: ControlFlowGraph,
    pub tokens: Vec<Token>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PortDirection {
    Input,
    Output,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PortKind {
    Event,
    Data,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PortDecl {
    pub name: String,
    pub direction: PortDirection,
    pub kind: PortKind,
    /// Declared data type, `None` for event ports.
    pub data_type: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FbType {
    pub name: String,
    pub event_inputs: Vec<EventDecl>,
    pub event_outputs: Vec<EventDecl>,
    pub input_vars: Vec<VarDecl>,
    pub output_vars: Vec<VarDecl>,
    pub algorithms: Vec<Algorithm>,
    pub ecc: Option<Ecc>,
    pub loc: u32,
}

impl FbType {
    pub fn new(name: impl Into<String>) -> Self {
        FbType {
            name: name.into(),
            ..FbType::default()
        }
    }

    pub fn port(&self, name: &str) -> Option<PortDecl> {
        let event = |e: &EventDecl, direction| PortDecl {
            name: e.name.clone(),
            direction,
            kind: PortKind::Event,
            data_type: None,
        };
        let var = |v: &VarDecl, direction| PortDecl {
            name: v.name.clone(),
            direction,
            kind: PortKind::Data,
            data_type: Some(v.data_type.clone()),
        };
        if let Some(e) = self.event_inputs.iter().find(|e| e.name == name) {
            return Some(event(e, PortDirection::Input));
        }
        if let Some(e) = self.event_outputs.iter().find(|e| e.name == name) {
            return Some(event(e, PortDirection::Output));
        }
        if let Some(v) = self.input_vars.iter().find(|v| v.name == name) {
            return Some(var(v, PortDirection::Input));
        }
        self.output_vars
            .iter()
            .find(|v| v.name == name)
            .map(|v| var(v, PortDirection::Output))
    }

    /// The event a variable is sampled on. Only the first association is
    /// returned; validation rejects variables bound to several events.
    pub fn associated_event(&self, var: &str) -> Option<&str> {
        self.event_inputs
            .iter()
            .chain(self.event_outputs.iter())
            .find(|e| e.with.iter().any(|w| w == var))
            .map(|e| e.name.as_str())
    }

    pub fn data_inputs(&self) -> usize {
        self.input_vars.len()
    }

    pub fn data_outputs(&self) -> usize {
        self.output_vars.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FbInstance {
    pub name: String,
    pub type_name: String,
    /// Constant values for input variables, keyed by port name.
    pub parameters: BTreeMap<String, String>,
}

impl FbInstance {
    pub fn new(name: impl Into<String>, type_name: impl Into<String>) -> Self {
        FbInstance {
            name: name.into(),
            type_name: type_name.into(),
            parameters: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FbNetwork {
    pub instances: Vec<FbInstance>,
    pub connections: Vec<Connection>,
    pub types: BTreeMap<String, FbType>,
}

/// Which connections count as outgoing when computing fan-out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FanOutPolicy {
    /// Data connections only, including those with an open target.
    #[default]
    DataOnly,
    /// Event and data connections.
    All,
}

impl FbNetwork {
    pub fn instance(&self, name: &str) -> Option<&FbInstance> {
        self.instances.iter().find(|i| i.name == name)
    }

    pub fn instance_mut(&mut self, name: &str) -> Option<&mut FbInstance> {
        self.instances.iter_mut().find(|i| i.name == name)
    }

    pub fn type_of(&self, instance: &str) -> Option<&FbType> {
        self.instance(instance)
            .and_then(|i| self.types.get(&i.type_name))
    }

    /// Sorts instances by name; connections keep their order.
    pub fn canonicalize(&mut self) {
        self.instances.sort_by(|a, b| a.name.cmp(&b.name));
    }

    pub fn data_connections(&self) -> impl Iterator<Item = &Connection> {
        self.connections
            .iter()
            .filter(|c| c.kind == ConnectionKind::Data)
    }

    pub fn secure_links(&self) -> impl Iterator<Item = (&Connection, &SecureLinkAnnotation)> {
        self.data_connections()
            .filter_map(|c| c.secure_link.as_ref().map(|sl| (c, sl)))
    }

    pub fn resolve_endpoint(&self, endpoint: &Endpoint) -> Result<Resolved<'_>, ModelError> {
        let port = match endpoint {
            Endpoint::Open => return Ok(Resolved::Open),
            Endpoint::Port(p) => p,
        };
        let instance = self
            .instance(&port.instance)
            .ok_or_else(|| ModelError::UnknownInstance(port.instance.clone()))?;
        let decl = self
            .types
            .get(&instance.type_name)
            .and_then(|t| t.port(&port.port))
            .ok_or_else(|| ModelError::UnknownPort {
                instance: port.instance.clone(),
                port: port.port.clone(),
            })?;
        Ok(Resolved::Port { instance, decl })
    }

    /// Number of connections leaving `instance`, open targets included.
    pub fn fan_out(&self, instance: &str, policy: FanOutPolicy) -> Result<usize, ModelError> {
        if self.instance(instance).is_none() {
            return Err(ModelError::UnknownInstance(instance.to_string()));
        }
        Ok(self
            .connections
            .iter()
            .filter(|c| policy == FanOutPolicy::All || c.kind == ConnectionKind::Data)
            .filter(|c| c.src.instance() == Some(instance))
            .count())
    }

    /// Fan-out of every instance in one pass.
    pub fn fan_out_table(&self, policy: FanOutPolicy) -> HashMap<&str, usize> {
        let mut table: HashMap<&str, usize> = self
            .instances
            .iter()
            .map(|i| (i.name.as_str(), 0))
            .collect();
        for c in &self.connections {
            if policy == FanOutPolicy::DataOnly && c.kind != ConnectionKind::Data {
                continue;
            }
            if let Some(count) = c.src.instance().and_then(|n| table.get_mut(n)) {
                *count += 1;
            }
        }
        table
    }

    /// Copy of the network with every secure-link annotation removed.
    pub fn strip_annotations(&self) -> FbNetwork {
        let mut out = self.clone();
        for c in &mut out.connections {
            c.secure_link = None;
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Resolved<'a> {
    Open,
    Port {
        instance: &'a FbInstance,
        decl: PortDecl,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DeploymentMapping {
    pub devices: BTreeSet<String>,
    pub assignment: BTreeMap<String, String>,
}

impl DeploymentMapping {
    pub fn device_of(&self, instance: &str) -> Result<&str, ModelError> {
        self.assignment
            .get(instance)
            .map(String::as_str)
            .ok_or_else(|| ModelError::UnmappedInstance(instance.to_string()))
    }

    pub fn assign(&mut self, instance: impl Into<String>, device: impl Into<String>) {
        self.assignment.insert(instance.into(), device.into());
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DiagnosticCode {
    /// Source and target kinds disagree (event vs. data).
    Restriction1,
    /// Both endpoints open.
    Restriction2,
    /// Two data connections share a target.
    Restriction3,
    DuplicateInstance,
    InvalidName,
    UnknownType,
    UnknownInstance,
    UnknownPort,
    PortDirection,
    DuplicatePort,
    Association,
    MalformedGraph,
    EmptyAlgorithm,
    UnknownParameter,
    ParameterConnected,
    SecureLinkOnEvent,
    DuplicateLinkId,
    InvalidLinkId,
    MappingUnknownInstance,
    MappingUnknownDevice,
}

impl DiagnosticCode {
    pub fn as_str(self) -> &'static str {
        use DiagnosticCode::*;
        match self {
            Restriction1 => "RESTRICTION_1",
            Restriction2 => "RESTRICTION_2",
            Restriction3 => "RESTRICTION_3",
            DuplicateInstance => "DUPLICATE_INSTANCE",
            InvalidName => "INVALID_NAME",
            UnknownType => "UNKNOWN_TYPE",
            UnknownInstance => "UNKNOWN_INSTANCE",
            UnknownPort => "UNKNOWN_PORT",
            PortDirection => "PORT_DIRECTION",
            DuplicatePort => "DUPLICATE_PORT",
            Association => "ASSOCIATION",
            MalformedGraph => "MALFORMED_GRAPH",
            EmptyAlgorithm => "EMPTY_ALGORITHM",
            UnknownParameter => "UNKNOWN_PARAMETER",
            ParameterConnected => "PARAMETER_CONNECTED",
            SecureLinkOnEvent => "SECURE_LINK_ON_EVENT",
            DuplicateLinkId => "DUPLICATE_LINK_ID",
            InvalidLinkId => "INVALID_LINK_ID",
            MappingUnknownInstance => "MAPPING_UNKNOWN_INSTANCE",
            MappingUnknownDevice => "MAPPING_UNKNOWN_DEVICE",
        }
    }
}

impl fmt::Display for DiagnosticCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub code: DiagnosticCode,
    pub message: String,
    /// The offending element, rendered for humans.
    pub element: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {} @ {}", self.code, self.message, self.element)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ValidationReport {
    pub diagnostics: Vec<Diagnostic>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.diagnostics.is_empty()
    }

    pub fn has(&self, code: DiagnosticCode) -> bool {
        self.diagnostics.iter().any(|d| d.code == code)
    }

    fn push(&mut self, code: DiagnosticCode, message: impl Into<String>, element: impl ToString) {
        self.diagnostics.push(Diagnostic {
            code,
            message: message.into(),
            element: element.to_string(),
        });
    }

    pub fn merge(&mut self, other: ValidationReport) {
        self.diagnostics.extend(other.diagnostics);
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for d in &self.diagnostics {
            writeln!(f, "{d}")?;
        }
        Ok(())
    }
}

/// `[A-Za-z_][A-Za-z0-9_]*`
pub fn is_identifier(text: &str) -> bool {
    let mut chars = text.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn is_valid_name(text: &str) -> bool {
    !text.is_empty() && !text.chars().any(char::is_whitespace) && text != OPEN_ENDPOINT
}

pub fn validate_type(ty: &FbType) -> ValidationReport {
    let mut report = ValidationReport::default();
    let element = format!("type {}", ty.name);

    let mut seen = HashSet::new();
    let names = ty
        .event_inputs
        .iter()
        .chain(&ty.event_outputs)
        .map(|e| &e.name)
        .chain(ty.input_vars.iter().chain(&ty.output_vars).map(|v| &v.name));
    for name in names {
        if !is_valid_name(name) || name.contains('.') {
            report.push(
                DiagnosticCode::InvalidName,
                format!("invalid port name `{name}`"),
                &element,
            );
        }
        if !seen.insert(name.as_str()) {
            report.push(
                DiagnosticCode::DuplicatePort,
                format!("port `{name}` declared twice"),
                &element,
            );
        }
    }

    let mut bound: HashMap<&str, Vec<&str>> = HashMap::new();
    for (events, vars, dir) in [
        (&ty.event_inputs, &ty.input_vars, "input"),
        (&ty.event_outputs, &ty.output_vars, "output"),
    ] {
        for e in events.iter() {
            for w in &e.with {
                if !vars.iter().any(|v| &v.name == w) {
                    report.push(
                        DiagnosticCode::Association,
                        format!(
                            "{dir} event `{}` associates `{w}`, which is not an {dir} variable",
                            e.name
                        ),
                        &element,
                    );
                }
                bound.entry(w.as_str()).or_default().push(e.name.as_str());
            }
        }
    }
    for v in ty.input_vars.iter().chain(&ty.output_vars) {
        match bound.get(v.name.as_str()).map(Vec::len).unwrap_or(0) {
            0 => report.push(
                DiagnosticCode::Association,
                format!("variable `{}` is not associated with any event", v.name),
                &element,
            ),
            1 => {}
            _ => report.push(
                DiagnosticCode::Association,
                format!(
                    "variable `{}` is associated with more than one event",
                    v.name
                ),
                &element,
            ),
        }
    }

    for alg in &ty.algorithms {
        if alg.tokens.is_empty() {
            report.push(
                DiagnosticCode::EmptyAlgorithm,
                format!("algorithm `{}` declares no tokens", alg.name),
                &element,
            );
        }
        if !alg.cfg.is_well_formed() {
            report.push(
                DiagnosticCode::MalformedGraph,
                format!(
                    "algorithm `{}` has a malformed control-flow graph",
                    alg.name
                ),
                &element,
            );
        }
    }
    if let Some(ecc) = &ty.ecc {
        if !ecc.graph.is_well_formed() {
            report.push(
                DiagnosticCode::MalformedGraph,
                "malformed ECC graph",
                &element,
            );
        }
    }
    report
}

/// Checks every connection restriction and every type referenced by the
/// network. Diagnostics are reported in a fixed order: types, instances,
/// connections.
pub fn validate_network(fbn: &FbNetwork) -> ValidationReport {
    let mut report = ValidationReport::default();

    for ty in fbn.types.values() {
        report.merge(validate_type(ty));
    }

    let mut names = HashSet::new();
    for inst in &fbn.instances {
        let element = format!("instance {}", inst.name);
        if !is_valid_name(&inst.name) {
            report.push(
                DiagnosticCode::InvalidName,
                format!("invalid instance name `{}`", inst.name),
                &element,
            );
        }
        if !names.insert(inst.name.as_str()) {
            report.push(
                DiagnosticCode::DuplicateInstance,
                format!("instance name `{}` used more than once", inst.name),
                &element,
            );
        }
        match fbn.types.get(&inst.type_name) {
            None => report.push(
                DiagnosticCode::UnknownType,
                format!("type `{}` is not declared", inst.type_name),
                &element,
            ),
            Some(ty) => {
                for param in inst.parameters.keys() {
                    if !ty.input_vars.iter().any(|v| &v.name == param) {
                        report.push(
                            DiagnosticCode::UnknownParameter,
                            format!(
                                "parameter `{param}` is not an input variable of `{}`",
                                ty.name
                            ),
                            &element,
                        );
                    }
                }
            }
        }
    }

    let mut data_targets: HashSet<&PortRef> = HashSet::new();
    let mut link_ids = HashSet::new();
    for c in &fbn.connections {
        if c.src.is_open() && c.trg.is_open() {
            report.push(
                DiagnosticCode::Restriction2,
                "connection between two open endpoints",
                c,
            );
            continue;
        }
        let mut endpoints_ok = true;
        for (endpoint, expected) in [
            (&c.src, PortDirection::Output),
            (&c.trg, PortDirection::Input),
        ] {
            match fbn.resolve_endpoint(endpoint) {
                Ok(Resolved::Open) => {}
                Ok(Resolved::Port { decl, .. }) => {
                    let wanted = match c.kind {
                        ConnectionKind::Event => PortKind::Event,
                        ConnectionKind::Data => PortKind::Data,
                    };
                    if decl.kind != wanted {
                        report.push(
                            DiagnosticCode::Restriction1,
                            format!("`{endpoint}` is not a {} port", c.kind),
                            c,
                        );
                        endpoints_ok = false;
                    }
                    if decl.direction != expected {
                        let side = if expected == PortDirection::Output {
                            "source"
                        } else {
                            "target"
                        };
                        report.push(
                            DiagnosticCode::PortDirection,
                            format!("`{endpoint}` cannot be a connection {side}"),
                            c,
                        );
                        endpoints_ok = false;
                    }
                }
                Err(ModelError::UnknownInstance(name)) => {
                    report.push(
                        DiagnosticCode::UnknownInstance,
                        format!("unknown instance `{name}`"),
                        c,
                    );
                    endpoints_ok = false;
                }
                Err(e) => {
                    report.push(DiagnosticCode::UnknownPort, e.to_string(), c);
                    endpoints_ok = false;
                }
            }
        }

        if c.kind == ConnectionKind::Data {
            if let Endpoint::Port(trg) = &c.trg {
                if !data_targets.insert(trg) {
                    report.push(
                        DiagnosticCode::Restriction3,
                        format!("data input `{trg}` already has an incoming connection"),
                        c,
                    );
                }
                if endpoints_ok {
                    let param_set = fbn
                        .instance(&trg.instance)
                        .is_some_and(|i| i.parameters.contains_key(&trg.port));
                    if param_set {
                        report.push(
                            DiagnosticCode::ParameterConnected,
                            format!("`{trg}` carries a parameter and an incoming connection"),
                            c,
                        );
                    }
                }
            }
        }

        if let Some(sl) = &c.secure_link {
            if c.kind != ConnectionKind::Data {
                report.push(
                    DiagnosticCode::SecureLinkOnEvent,
                    "secure links annotate data connections only",
                    c,
                );
            }
            if !is_identifier(&sl.link_id) {
                report.push(
                    DiagnosticCode::InvalidLinkId,
                    format!("secure link id `{}` is not an identifier", sl.link_id),
                    c,
                );
            }
            if !link_ids.insert(sl.link_id.as_str()) {
                report.push(
                    DiagnosticCode::DuplicateLinkId,
                    format!("secure link id `{}` used more than once", sl.link_id),
                    c,
                );
            }
        }
    }
    report
}

/// Mapping entries must name existing instances and declared devices.
pub fn validate_mapping(fbn: &FbNetwork, mapping: &DeploymentMapping) -> ValidationReport {
    let mut report = ValidationReport::default();
    for (instance, device) in &mapping.assignment {
        let element = format!("mapping {instance} -> {device}");
        if fbn.instance(instance).is_none() {
            report.push(
                DiagnosticCode::MappingUnknownInstance,
                format!("mapped instance `{instance}` does not exist"),
                &element,
            );
        }
        if !mapping.devices.contains(device) {
            report.push(
                DiagnosticCode::MappingUnknownDevice,
                format!("device `{device}` is not declared"),
                &element,
            );
        }
    }
    report
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    /// Two blocks: `A` with outputs, `B` with inputs.
    pub(crate) fn two_block_network() -> FbNetwork {
        let mut src = FbType::new("Src");
        src.event_outputs = vec![
            EventDecl::new("CNF", &["X", "Y"]),
            EventDecl::new("IND", &[]),
        ];
        src.output_vars = vec![VarDecl::new("X", "INT"), VarDecl::new("Y", "INT")];
        let mut dst = FbType::new("Dst");
        dst.event_inputs = vec![
            EventDecl::new("REQ", &["X", "Y"]),
            EventDecl::new("RSP", &[]),
        ];
        dst.input_vars = vec![VarDecl::new("X", "INT"), VarDecl::new("Y", "INT")];
        let mut fbn = FbNetwork::default();
        fbn.types.insert(src.name.clone(), src);
        fbn.types.insert(dst.name.clone(), dst);
        fbn.instances = vec![FbInstance::new("A", "Src"), FbInstance::new("B", "Dst")];
        fbn
    }

    #[test]
    fn empty_network_is_valid() {
        assert!(validate_network(&FbNetwork::default()).is_valid());
    }

    #[test]
    fn open_open_connection_violates_restriction_2() {
        let mut fbn = two_block_network();
        fbn.connections
            .push(Connection::data(Endpoint::Open, Endpoint::Open));
        let report = validate_network(&fbn);
        assert!(report.has(DiagnosticCode::Restriction2));
        assert_eq!(report.diagnostics.len(), 1);
    }

    #[test]
    fn shared_data_target_violates_restriction_3() {
        let mut fbn = two_block_network();
        fbn.connections.push(Connection::data(
            Endpoint::port("A", "X"),
            Endpoint::port("B", "X"),
        ));
        fbn.connections.push(Connection::data(
            Endpoint::port("A", "Y"),
            Endpoint::port("B", "X"),
        ));
        let report = validate_network(&fbn);
        assert!(report.has(DiagnosticCode::Restriction3));
    }

    #[test]
    fn event_fan_in_is_allowed() {
        let mut fbn = two_block_network();
        fbn.connections.push(Connection::event(
            Endpoint::port("A", "CNF"),
            Endpoint::port("B", "REQ"),
        ));
        fbn.connections.push(Connection::event(
            Endpoint::port("A", "IND"),
            Endpoint::port("B", "REQ"),
        ));
        assert!(validate_network(&fbn).is_valid());
    }

    #[test]
    fn kind_mismatch_violates_restriction_1() {
        let mut fbn = two_block_network();
        fbn.connections.push(Connection::data(
            Endpoint::port("A", "CNF"),
            Endpoint::port("B", "X"),
        ));
        assert!(validate_network(&fbn).has(DiagnosticCode::Restriction1));
    }

    #[test]
    fn reversed_direction_is_reported() {
        let mut fbn = two_block_network();
        fbn.connections.push(Connection::data(
            Endpoint::port("B", "X"),
            Endpoint::port("A", "X"),
        ));
        assert!(validate_network(&fbn).has(DiagnosticCode::PortDirection));
    }

    #[test]
    fn duplicate_instance_names_are_rejected() {
        let mut fbn = two_block_network();
        fbn.instances.push(FbInstance::new("A", "Src"));
        assert!(validate_network(&fbn).has(DiagnosticCode::DuplicateInstance));
    }

    #[test]
    fn multi_event_association_is_rejected() {
        let mut fbn = two_block_network();
        let src = fbn.types.get_mut("Src").unwrap();
        src.event_outputs[1].with.push("X".into());
        assert!(validate_network(&fbn).has(DiagnosticCode::Association));
    }

    #[test]
    fn fan_out_counts_by_policy() {
        let mut fbn = two_block_network();
        fbn.connections.push(Connection::event(
            Endpoint::port("A", "CNF"),
            Endpoint::port("B", "REQ"),
        ));
        fbn.connections.push(Connection::event(
            Endpoint::port("A", "IND"),
            Endpoint::port("B", "RSP"),
        ));
        fbn.connections.push(Connection::data(
            Endpoint::port("A", "X"),
            Endpoint::port("B", "X"),
        ));
        assert!(validate_network(&fbn).is_valid());
        assert_eq!(fbn.fan_out("A", FanOutPolicy::All).unwrap(), 3);
        assert_eq!(fbn.fan_out("A", FanOutPolicy::DataOnly).unwrap(), 1);
        assert_eq!(fbn.fan_out("B", FanOutPolicy::All).unwrap(), 0);
        assert_eq!(
            fbn.fan_out("Ghost", FanOutPolicy::All),
            Err(ModelError::UnknownInstance("Ghost".into()))
        );
    }

    #[test]
    fn open_target_counts_toward_fan_out() {
        let mut fbn = two_block_network();
        fbn.connections
            .push(Connection::data(Endpoint::port("A", "Y"), Endpoint::Open));
        assert_eq!(fbn.fan_out("A", FanOutPolicy::DataOnly).unwrap(), 1);
        fbn.connections
            .push(Connection::data(Endpoint::Open, Endpoint::port("B", "Y")));
        assert_eq!(fbn.fan_out("A", FanOutPolicy::DataOnly).unwrap(), 1);
        assert_eq!(fbn.fan_out("B", FanOutPolicy::DataOnly).unwrap(), 0);
    }

    #[test]
    fn resolve_endpoint_cases() {
        let fbn = two_block_network();
        assert_eq!(fbn.resolve_endpoint(&Endpoint::Open), Ok(Resolved::Open));
        match fbn.resolve_endpoint(&Endpoint::port("A", "X")).unwrap() {
            Resolved::Port { instance, decl } => {
                assert_eq!(instance.name, "A");
                assert_eq!(decl.direction, PortDirection::Output);
                assert_eq!(decl.kind, PortKind::Data);
            }
            Resolved::Open => panic!("expected a port"),
        }
        assert_eq!(
            fbn.resolve_endpoint(&Endpoint::port("Ghost", "X")),
            Err(ModelError::UnknownInstance("Ghost".into()))
        );
        assert!(matches!(
            fbn.resolve_endpoint(&Endpoint::port("A", "Nope")),
            Err(ModelError::UnknownPort { .. })
        ));
    }

    #[test]
    fn device_lookup() {
        let mut m = DeploymentMapping::default();
        m.devices.insert("PLC1".into());
        m.assign("A", "PLC1");
        assert_eq!(m.device_of("A"), Ok("PLC1"));
        assert_eq!(
            m.device_of("X"),
            Err(ModelError::UnmappedInstance("X".into()))
        );
    }

    #[test]
    fn endpoint_parsing() {
        assert_eq!(Endpoint::parse("#OPEN"), Some(Endpoint::Open));
        assert_eq!(Endpoint::parse("A.b.X"), Some(Endpoint::port("A.b", "X")));
        assert_eq!(Endpoint::parse("nodot"), None);
        assert_eq!(Endpoint::parse(".X"), None);
    }

    #[test]
    fn identifiers() {
        assert!(is_identifier("SL1"));
        assert!(is_identifier("_x9"));
        assert!(!is_identifier("1SL"));
        assert!(!is_identifier("SL-1"));
        assert!(!is_identifier(""));
    }
}
