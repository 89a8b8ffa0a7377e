use std::collections::BTreeMap;

use crate::model::{
    validate_mapping, validate_network, Connection, ConnectionKind, DeploymentMapping, Endpoint,
    FbInstance, FbNetwork, FbType, SecureLinkAnnotation, ValidationReport,
};
use crate::xml::{self, Element};

use super::fbtype::{fbtype_from_element, fbtype_to_element};
use super::FormatError;

/// A parsed system: one application network, its devices and mapping, and
/// the types it instantiates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SystemDocument {
    pub name: String,
    pub application: String,
    pub network: FbNetwork,
    pub mapping: DeploymentMapping,
}

impl SystemDocument {
    pub fn validate(&self) -> ValidationReport {
        let mut report = validate_network(&self.network);
        report.merge(validate_mapping(&self.network, &self.mapping));
        report
    }
}

fn endpoint(el: &Element, key: &str) -> Result<Endpoint, FormatError> {
    let raw = el.require(key)?;
    Endpoint::parse(raw).ok_or_else(|| {
        FormatError::Schema(format!(
            "`{raw}` is neither `#OPEN` nor an `Instance.Port` reference"
        ))
    })
}

fn named_values(
    parent: &Element,
    child: &str,
    key_attr: &str,
    value_attr: &str,
) -> Result<BTreeMap<String, String>, FormatError> {
    parent.check_children(&[child])?;
    let mut out = BTreeMap::new();
    for el in &parent.children {
        el.check_attrs(&[key_attr, value_attr])?;
        el.check_children(&[])?;
        let key = el.require(key_attr)?.to_string();
        let value = el.require(value_attr)?.to_string();
        if out.insert(key.clone(), value).is_some() {
            return Err(FormatError::Schema(format!(
                "<{child}> `{key}` given twice inside <{}>",
                parent.name
            )));
        }
    }
    Ok(out)
}

fn secure_link_from(el: &Element) -> Result<SecureLinkAnnotation, FormatError> {
    el.check_attrs(&["Id", "Requirement", "Mechanism"])?;
    Ok(SecureLinkAnnotation {
        link_id: el.require("Id")?.to_string(),
        requirement: el.require("Requirement")?.to_string(),
        mechanism: el.require("Mechanism")?.to_string(),
        values: named_values(el, "Param", "Name", "Value")?,
    })
}

fn connections_from(
    list: Option<&Element>,
    kind: ConnectionKind,
) -> Result<Vec<Connection>, FormatError> {
    let Some(list) = list else {
        return Ok(Vec::new());
    };
    list.check_attrs(&[])?;
    list.check_children(&["Connection"])?;
    list.children
        .iter()
        .map(|c| {
            c.check_attrs(&["Source", "Destination"])?;
            let allowed: &[&str] = match kind {
                ConnectionKind::Data => &["SecureLink"],
                ConnectionKind::Event => &[],
            };
            c.check_children(allowed)?;
            Ok(Connection {
                kind,
                src: endpoint(c, "Source")?,
                trg: endpoint(c, "Destination")?,
                secure_link: c.single("SecureLink")?.map(secure_link_from).transpose()?,
            })
        })
        .collect()
}

/// Reads a `SubAppNetwork` element. Instances are sorted by name.
pub(crate) fn network_from_element(
    el: &Element,
    types: BTreeMap<String, FbType>,
) -> Result<FbNetwork, FormatError> {
    el.check_attrs(&[])?;
    el.check_children(&["FB", "EventConnections", "DataConnections"])?;
    let mut fbn = FbNetwork {
        types,
        ..FbNetwork::default()
    };
    for fb in el.children_named("FB") {
        fb.check_attrs(&["Name", "Type"])?;
        let mut inst = FbInstance::new(fb.require("Name")?, fb.require("Type")?);
        inst.parameters = named_values(fb, "Parameter", "Name", "Value")?;
        fbn.instances.push(inst);
    }
    fbn.connections = connections_from(el.single("EventConnections")?, ConnectionKind::Event)?;
    fbn.connections.extend(connections_from(
        el.single("DataConnections")?,
        ConnectionKind::Data,
    )?);
    fbn.canonicalize();
    Ok(fbn)
}

fn connection_to(c: &Connection) -> Element {
    let mut el = Element::new("Connection")
        .attr("Source", c.src.to_string())
        .attr("Destination", c.trg.to_string());
    if let Some(sl) = &c.secure_link {
        let mut link = Element::new("SecureLink")
            .attr("Id", &sl.link_id)
            .attr("Requirement", &sl.requirement)
            .attr("Mechanism", &sl.mechanism);
        for (k, v) in &sl.values {
            link.push(Element::new("Param").attr("Name", k).attr("Value", v));
        }
        el.push(link);
    }
    el
}

pub(crate) fn network_to_element(fbn: &FbNetwork) -> Element {
    let mut el = Element::new("SubAppNetwork");
    let mut instances: Vec<&FbInstance> = fbn.instances.iter().collect();
    instances.sort_by(|a, b| a.name.cmp(&b.name));
    for inst in instances {
        let mut fb = Element::new("FB")
            .attr("Name", &inst.name)
            .attr("Type", &inst.type_name);
        for (k, v) in &inst.parameters {
            fb.push(Element::new("Parameter").attr("Name", k).attr("Value", v));
        }
        el.push(fb);
    }
    for (kind, name) in [
        (ConnectionKind::Event, "EventConnections"),
        (ConnectionKind::Data, "DataConnections"),
    ] {
        let mut list = Element::new(name);
        for c in fbn.connections.iter().filter(|c| c.kind == kind) {
            list.push(connection_to(c));
        }
        if !list.children.is_empty() {
            el.push(list);
        }
    }
    el
}

pub(crate) fn types_from(parent: &Element) -> Result<BTreeMap<String, FbType>, FormatError> {
    let mut types = BTreeMap::new();
    for el in parent.children_named("FBType") {
        let ty = fbtype_from_element(el)?;
        if types.contains_key(&ty.name) {
            return Err(FormatError::Schema(format!(
                "type `{}` declared twice",
                ty.name
            )));
        }
        types.insert(ty.name.clone(), ty);
    }
    Ok(types)
}

/// Parses a system document without running model validation.
pub fn parse_system_unchecked(bytes: &[u8]) -> Result<SystemDocument, FormatError> {
    let root = xml::parse(bytes)?;
    if root.name != "System" {
        return Err(FormatError::Schema(format!(
            "expected <System>, found <{}>",
            root.name
        )));
    }
    root.check_attrs(&["Name"])?;
    root.check_children(&["Device", "Application", "Mapping", "FBType"])?;

    let mut mapping = DeploymentMapping::default();
    for dev in root.children_named("Device") {
        dev.check_attrs(&["Name"])?;
        dev.check_children(&[])?;
        let name = dev.require("Name")?;
        if !mapping.devices.insert(name.to_string()) {
            return Err(FormatError::Schema(format!(
                "device `{name}` declared twice"
            )));
        }
    }

    let app = root.required_single("Application")?;
    app.check_attrs(&["Name"])?;
    app.check_children(&["SubAppNetwork"])?;
    let application = app.require("Name")?.to_string();
    let network = network_from_element(app.required_single("SubAppNetwork")?, types_from(&root)?)?;

    let prefix = format!("{application}.");
    for m in root.children_named("Mapping") {
        m.check_attrs(&["From", "To"])?;
        m.check_children(&[])?;
        let from = m.require("From")?;
        let instance = from.strip_prefix(&prefix).ok_or_else(|| {
            FormatError::Schema(format!(
                "mapping source `{from}` must start with `{prefix}`"
            ))
        })?;
        if mapping.assignment.contains_key(instance) {
            return Err(FormatError::Schema(format!(
                "instance `{instance}` mapped twice"
            )));
        }
        mapping.assign(instance, m.require("To")?);
    }

    Ok(SystemDocument {
        name: root.require("Name")?.to_string(),
        application,
        network,
        mapping,
    })
}

/// Parses and validates a system document.
pub fn parse_system(bytes: &[u8]) -> Result<SystemDocument, FormatError> {
    let sys = parse_system_unchecked(bytes)?;
    let report = sys.validate();
    if !report.is_valid() {
        return Err(FormatError::Model(report));
    }
    Ok(sys)
}

pub fn serialize_system(sys: &SystemDocument) -> Result<String, FormatError> {
    let report = sys.validate();
    if !report.is_valid() {
        return Err(FormatError::Model(report));
    }
    let mut root = Element::new("System").attr("Name", &sys.name);
    for dev in &sys.mapping.devices {
        root.push(Element::new("Device").attr("Name", dev));
    }
    root.push(
        Element::new("Application")
            .attr("Name", &sys.application)
            .child(network_to_element(&sys.network)),
    );
    for (inst, dev) in &sys.mapping.assignment {
        root.push(
            Element::new("Mapping")
                .attr("From", format!("{}.{inst}", sys.application))
                .attr("To", dev),
        );
    }
    for ty in sys.network.types.values() {
        root.push(fbtype_to_element(ty));
    }
    Ok(xml::write(&root))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::DiagnosticCode;

    const MINIMAL: &str = r#"<?xml version="1.0" encoding="UTF-8"?>
<System Name="Demo">
  <Device Name="D1"/>
  <Application Name="App">
    <SubAppNetwork>
      <FB Name="Only" Type="Empty"/>
    </SubAppNetwork>
  </Application>
  <Mapping From="App.Only" To="D1"/>
  <FBType Name="Empty">
    <InterfaceList/>
  </FBType>
</System>
"#;

    #[test]
    fn minimal_document() {
        let sys = parse_system(MINIMAL.as_bytes()).unwrap();
        assert_eq!(sys.network.instances.len(), 1);
        assert!(sys.network.connections.is_empty());
        assert_eq!(sys.mapping.device_of("Only"), Ok("D1"));
        assert_eq!(serialize_system(&sys).unwrap(), MINIMAL);
    }

    #[test]
    fn escaping_survives_round_trip() {
        let mut sys = parse_system(MINIMAL.as_bytes()).unwrap();
        sys.network.instances[0].name = "On<ly&".into();
        sys.mapping.assignment.clear();
        sys.mapping.assign("On<ly&", "D1");
        let text = serialize_system(&sys).unwrap();
        assert!(text.contains("On&lt;ly&amp;"));
        assert_eq!(parse_system(text.as_bytes()).unwrap(), sys);
    }

    #[test]
    fn mapping_prefix_is_required() {
        let doc = MINIMAL.replace("App.Only", "Other.Only");
        assert!(matches!(
            parse_system(doc.as_bytes()),
            Err(FormatError::Schema(_))
        ));
    }

    #[test]
    fn mapping_to_undeclared_device_is_reported() {
        let doc = MINIMAL.replace("To=\"D1\"", "To=\"D9\"");
        match parse_system(doc.as_bytes()) {
            Err(FormatError::Model(r)) => assert!(r.has(DiagnosticCode::MappingUnknownDevice)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn secure_link_on_event_connection_is_a_schema_error() {
        let doc = MINIMAL.replace(
            "<FB Name=\"Only\" Type=\"Empty\"/>",
            "<FB Name=\"Only\" Type=\"Empty\"/><EventConnections><Connection Source=\"Only.A\" Destination=\"Only.B\"><SecureLink Id=\"S\" Requirement=\"R\" Mechanism=\"M\"/></Connection></EventConnections>",
        );
        assert!(matches!(
            parse_system(doc.as_bytes()),
            Err(FormatError::Schema(_))
        ));
    }
}
