use crate::model::{
    validate_type, Algorithm, ControlFlowGraph, Ecc, EventDecl, FbType, Token, VarDecl,
};
use crate::xml::{self, Element};

use super::{parse_count, FormatError};

fn events_from(list: Option<&Element>) -> Result<Vec<EventDecl>, FormatError> {
    let Some(list) = list else {
        return Ok(Vec::new());
    };
    list.check_attrs(&[])?;
    list.check_children(&["Event"])?;
    list.children
        .iter()
        .map(|e| {
            e.check_attrs(&["Name"])?;
            e.check_children(&["With"])?;
            let with = e
                .children
                .iter()
                .map(|w| {
                    w.check_attrs(&["Var"])?;
                    w.check_children(&[])?;
                    Ok(w.require("Var")?.to_string())
                })
                .collect::<Result<_, FormatError>>()?;
            Ok(EventDecl {
                name: e.require("Name")?.to_string(),
                with,
            })
        })
        .collect()
}

fn vars_from(list: Option<&Element>) -> Result<Vec<VarDecl>, FormatError> {
    let Some(list) = list else {
        return Ok(Vec::new());
    };
    list.check_attrs(&[])?;
    list.check_children(&["VarDeclaration"])?;
    list.children
        .iter()
        .map(|v| {
            v.check_attrs(&["Name", "Type"])?;
            v.check_children(&[])?;
            Ok(VarDecl::new(v.require("Name")?, v.require("Type")?))
        })
        .collect()
}

fn token_from(el: &Element) -> Result<Token, FormatError> {
    el.check_attrs(&["Text", "Class"])?;
    el.check_children(&[])?;
    let text = el.require("Text")?;
    match el.require("Class")? {
        "operator" => Ok(Token::operator(text)),
        "operand" => Ok(Token::operand(text)),
        other => Err(FormatError::Schema(format!(
            "token class must be operator or operand, found `{other}`"
        ))),
    }
}

fn token_to(token: &Token) -> Element {
    Element::new("Token")
        .attr("Text", &token.text)
        .attr("Class", token.class.as_str())
}

pub(crate) fn fbtype_from_element(el: &Element) -> Result<FbType, FormatError> {
    el.check_attrs(&["Name", "LOC"])?;
    el.check_children(&["InterfaceList", "ECC", "Algorithm"])?;
    let mut ty = FbType::new(el.require("Name")?);
    if let Some(loc) = el.get("LOC") {
        ty.loc = loc.parse().map_err(|_| {
            FormatError::Schema(format!(
                "LOC of type `{}` must be a non-negative integer",
                ty.name
            ))
        })?;
    }

    if let Some(iface) = el.single("InterfaceList")? {
        iface.check_attrs(&[])?;
        iface.check_children(&["EventInputs", "EventOutputs", "InputVars", "OutputVars"])?;
        ty.event_inputs = events_from(iface.single("EventInputs")?)?;
        ty.event_outputs = events_from(iface.single("EventOutputs")?)?;
        ty.input_vars = vars_from(iface.single("InputVars")?)?;
        ty.output_vars = vars_from(iface.single("OutputVars")?)?;
    }

    if let Some(ecc) = el.single("ECC")? {
        ecc.check_attrs(&["States", "Transitions", "Components"])?;
        ecc.check_children(&["Token"])?;
        let components = match ecc.get("Components") {
            Some(_) => parse_count(ecc, "Components")?,
            None => 1,
        };
        ty.ecc = Some(Ecc {
            graph: ControlFlowGraph::new(
                parse_count(ecc, "States")?,
                parse_count(ecc, "Transitions")?,
                components,
            ),
            tokens: ecc
                .children
                .iter()
                .map(token_from)
                .collect::<Result<_, _>>()?,
        });
    }

    for alg in el.children_named("Algorithm") {
        alg.check_attrs(&["Name"])?;
        alg.check_children(&["CFG", "Token"])?;
        let cfg = match alg.single("CFG")? {
            Some(cfg) => {
                cfg.check_attrs(&["Nodes", "Edges", "Components"])?;
                cfg.check_children(&[])?;
                let components = match cfg.get("Components") {
                    Some(_) => parse_count(cfg, "Components")?,
                    None => 1,
                };
                ControlFlowGraph::new(
                    parse_count(cfg, "Nodes")?,
                    parse_count(cfg, "Edges")?,
                    components,
                )
            }
            None => ControlFlowGraph::default(),
        };
        ty.algorithms.push(Algorithm {
            name: alg.require("Name")?.to_string(),
            tokens: alg
                .children_named("Token")
                .map(token_from)
                .collect::<Result<_, _>>()?,
            cfg,
        });
    }
    Ok(ty)
}

fn events_to(name: &str, events: &[EventDecl]) -> Element {
    let mut list = Element::new(name);
    for e in events {
        let mut ev = Element::new("Event").attr("Name", &e.name);
        for w in &e.with {
            ev.push(Element::new("With").attr("Var", w));
        }
        list.push(ev);
    }
    list
}

fn vars_to(name: &str, vars: &[VarDecl]) -> Element {
    let mut list = Element::new(name);
    for v in vars {
        list.push(
            Element::new("VarDeclaration")
                .attr("Name", &v.name)
                .attr("Type", &v.data_type),
        );
    }
    list
}

pub(crate) fn fbtype_to_element(ty: &FbType) -> Element {
    let mut el = Element::new("FBType").attr("Name", &ty.name);
    if ty.loc > 0 {
        el = el.attr("LOC", ty.loc.to_string());
    }
    let mut iface = Element::new("InterfaceList");
    if !ty.event_inputs.is_empty() {
        iface.push(events_to("EventInputs", &ty.event_inputs));
    }
    if !ty.event_outputs.is_empty() {
        iface.push(events_to("EventOutputs", &ty.event_outputs));
    }
    if !ty.input_vars.is_empty() {
        iface.push(vars_to("InputVars", &ty.input_vars));
    }
    if !ty.output_vars.is_empty() {
        iface.push(vars_to("OutputVars", &ty.output_vars));
    }
    el.push(iface);

    if let Some(ecc) = &ty.ecc {
        let mut e = Element::new("ECC")
            .attr("States", ecc.graph.nodes.to_string())
            .attr("Transitions", ecc.graph.edges.to_string())
            .attr("Components", ecc.graph.components.to_string());
        for t in &ecc.tokens {
            e.push(token_to(t));
        }
        el.push(e);
    }
    for alg in &ty.algorithms {
        let mut a = Element::new("Algorithm").attr("Name", &alg.name).child(
            Element::new("CFG")
                .attr("Nodes", alg.cfg.nodes.to_string())
                .attr("Edges", alg.cfg.edges.to_string())
                .attr("Components", alg.cfg.components.to_string()),
        );
        for t in &alg.tokens {
            a.push(token_to(t));
        }
        el.push(a);
    }
    el
}

/// Parses a standalone type document and validates its interface.
pub fn parse_fbtype(bytes: &[u8]) -> Result<FbType, FormatError> {
    let root = xml::parse(bytes)?;
    if root.name != "FBType" {
        return Err(FormatError::Schema(format!(
            "expected <FBType>, found <{}>",
            root.name
        )));
    }
    let ty = fbtype_from_element(&root)?;
    let report = validate_type(&ty);
    if !report.is_valid() {
        return Err(FormatError::Model(report));
    }
    Ok(ty)
}

pub fn serialize_fbtype(ty: &FbType) -> String {
    xml::write(&fbtype_to_element(ty))
}
