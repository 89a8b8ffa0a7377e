use std::collections::BTreeSet;

use crate::library::{validate_signature, MechanismParam, MechanismSignature, SecurityMechanism};
use crate::model::{validate_network, Connection, Endpoint, PortRef};
use crate::xml::{self, Element};

use super::fbtype::fbtype_to_element;
use super::system::{network_from_element, network_to_element, types_from};
use super::{parse_bool, FormatError};

fn port_attr(el: &Element, key: &str) -> Result<PortRef, FormatError> {
    let raw = el.require(key)?;
    PortRef::parse(raw)
        .ok_or_else(|| FormatError::Schema(format!("`{raw}` is not an `Instance.Port` reference")))
}

fn members(el: &Element) -> Result<BTreeSet<String>, FormatError> {
    el.check_attrs(&[])?;
    el.check_children(&["Member"])?;
    let mut out = BTreeSet::new();
    for m in &el.children {
        m.check_attrs(&["Name"])?;
        m.check_children(&[])?;
        let name = m.require("Name")?;
        if !out.insert(name.to_string()) {
            return Err(FormatError::Schema(format!(
                "member `{name}` listed twice in <{}>",
                el.name
            )));
        }
    }
    Ok(out)
}

/// Parses a mechanism, validates its inner network and then its signature.
pub fn parse_mechanism(bytes: &[u8]) -> Result<SecurityMechanism, FormatError> {
    let root = xml::parse(bytes)?;
    if root.name != "SecurityMechanism" {
        return Err(FormatError::Schema(format!(
            "expected <SecurityMechanism>, found <{}>",
            root.name
        )));
    }
    root.check_attrs(&["Name", "KeyExchange", "KeyExchangeRef"])?;
    root.check_children(&[
        "Signature",
        "PartitionA",
        "PartitionB",
        "SubAppNetwork",
        "FBType",
    ])?;

    let sig = root.required_single("Signature")?;
    sig.check_attrs(&["CInDst", "COutSrc"])?;
    sig.check_children(&["Param"])?;
    let mut params = Vec::new();
    for p in &sig.children {
        p.check_attrs(&["Name", "Port", "Default"])?;
        p.check_children(&[])?;
        params.push(MechanismParam {
            name: p.require("Name")?.to_string(),
            port: port_attr(p, "Port")?,
            default: p.get("Default").map(str::to_string),
        });
    }
    params.sort_by(|a, b| a.name.cmp(&b.name));

    let network = network_from_element(root.required_single("SubAppNetwork")?, types_from(&root)?)?;
    let report = validate_network(&network);
    if !report.is_valid() {
        return Err(FormatError::Model(report));
    }

    let sm = SecurityMechanism {
        name: root.require("Name")?.to_string(),
        signature: MechanismSignature {
            cin: Connection::data(Endpoint::Open, Endpoint::Port(port_attr(sig, "CInDst")?)),
            cout: Connection::data(Endpoint::Port(port_attr(sig, "COutSrc")?), Endpoint::Open),
            params,
        },
        network,
        partition_a: members(root.required_single("PartitionA")?)?,
        partition_b: members(root.required_single("PartitionB")?)?,
        is_key_exchange: parse_bool(&root, "KeyExchange")?,
        key_exchange_ref: root.get("KeyExchangeRef").map(str::to_string),
    };
    validate_signature(&sm)?;
    Ok(sm)
}

pub fn serialize_mechanism(sm: &SecurityMechanism) -> String {
    let mut root = Element::new("SecurityMechanism")
        .attr("Name", &sm.name)
        .attr("KeyExchange", sm.is_key_exchange.to_string());
    if let Some(r) = &sm.key_exchange_ref {
        root = root.attr("KeyExchangeRef", r);
    }
    let mut sig = Element::new("Signature");
    if let Some(p) = sm.signature.cin_target() {
        sig = sig.attr("CInDst", p.to_string());
    }
    if let Some(p) = sm.signature.cout_source() {
        sig = sig.attr("COutSrc", p.to_string());
    }
    let mut params: Vec<&MechanismParam> = sm.signature.params.iter().collect();
    params.sort_by(|a, b| a.name.cmp(&b.name));
    for p in params {
        let mut el = Element::new("Param")
            .attr("Name", &p.name)
            .attr("Port", p.port.to_string());
        if let Some(d) = &p.default {
            el = el.attr("Default", d);
        }
        sig.push(el);
    }
    root.push(sig);
    for (name, set) in [
        ("PartitionA", &sm.partition_a),
        ("PartitionB", &sm.partition_b),
    ] {
        let mut part = Element::new(name);
        for m in set {
            part.push(Element::new("Member").attr("Name", m));
        }
        root.push(part);
    }
    root.push(network_to_element(&sm.network));
    for ty in sm.network.types.values() {
        root.push(fbtype_to_element(ty));
    }
    xml::write(&root)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::library::tests::chain_mechanism;
    use crate::library::MechanismKind;

    #[test]
    fn serialized_mechanism_parses_back() {
        let sm = chain_mechanism(&["P"], &["Q"]);
        let text = serialize_mechanism(&sm);
        let back = parse_mechanism(text.as_bytes()).unwrap();
        assert_eq!(back, sm);
        assert_eq!(back.kind(), MechanismKind::SendReceive);
        assert_eq!(serialize_mechanism(&back), text);
    }

    #[test]
    fn entry_with_real_source_is_a_signature_violation() {
        let sm = chain_mechanism(&["P"], &["Q"]);
        let text = serialize_mechanism(&sm).replace(
            "<Connection Source=\"#OPEN\" Destination=\"P.IN\"/>",
            "<Connection Source=\"Q.OUT\" Destination=\"P.IN\"/>",
        );
        assert!(matches!(
            parse_mechanism(text.as_bytes()),
            Err(FormatError::Signature(_))
        ));
    }

    #[test]
    fn missing_partition_element_is_a_schema_error() {
        let sm = chain_mechanism(&["P"], &["Q"]);
        let text = serialize_mechanism(&sm);
        let start = text.find("  <PartitionB>").unwrap();
        let end = text.find("</PartitionB>\n").unwrap() + "</PartitionB>\n".len();
        let cut = format!("{}{}", &text[..start], &text[end..]);
        assert!(matches!(
            parse_mechanism(cut.as_bytes()),
            Err(FormatError::Schema(_))
        ));
    }
}
