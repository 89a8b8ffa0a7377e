//! Minimal element tree over quick-xml with a canonical writer.
//!
//! Documents in this toolkit carry all data in attributes, so text content
//! other than whitespace is rejected.

use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;

use crate::format::FormatError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Element {
    pub name: String,
    pub attrs: Vec<(String, String)>,
    pub children: Vec<Element>,
}

impl Element {
    pub fn new(name: impl Into<String>) -> Self {
        Element {
            name: name.into(),
            attrs: Vec::new(),
            children: Vec::new(),
        }
    }

    pub fn attr(mut self, key: &str, value: impl Into<String>) -> Self {
        self.attrs.push((key.to_string(), value.into()));
        self
    }

    pub fn child(mut self, child: Element) -> Self {
        self.children.push(child);
        self
    }

    pub fn push(&mut self, child: Element) {
        self.children.push(child);
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.attrs
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn require(&self, key: &str) -> Result<&str, FormatError> {
        self.get(key).ok_or_else(|| {
            FormatError::Schema(format!("<{}> is missing attribute `{key}`", self.name))
        })
    }

    /// Rejects attributes outside `allowed`.
    pub fn check_attrs(&self, allowed: &[&str]) -> Result<(), FormatError> {
        match self
            .attrs
            .iter()
            .find(|(k, _)| !allowed.contains(&k.as_str()))
        {
            Some((k, _)) => Err(FormatError::Schema(format!(
                "unknown attribute `{k}` on <{}>",
                self.name
            ))),
            None => Ok(()),
        }
    }

    /// Rejects child elements outside `allowed`.
    pub fn check_children(&self, allowed: &[&str]) -> Result<(), FormatError> {
        match self
            .children
            .iter()
            .find(|c| !allowed.contains(&c.name.as_str()))
        {
            Some(c) => Err(FormatError::Schema(format!(
                "unknown element <{}> inside <{}>",
                c.name, self.name
            ))),
            None => Ok(()),
        }
    }

    pub fn children_named<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a Element> + 'a {
        self.children.iter().filter(move |c| c.name == name)
    }

    /// At most one child named `name`.
    pub fn single(&self, name: &str) -> Result<Option<&Element>, FormatError> {
        let mut it = self.children.iter().filter(|c| c.name == name);
        let first = it.next();
        if it.next().is_some() {
            return Err(FormatError::Schema(format!(
                "<{}> allows at most one <{name}>",
                self.name
            )));
        }
        Ok(first)
    }

    pub fn required_single(&self, name: &str) -> Result<&Element, FormatError> {
        self.single(name)?.ok_or_else(|| {
            FormatError::Schema(format!("<{}> requires a <{name}> child", self.name))
        })
    }
}

fn start_element(start: &BytesStart<'_>) -> Result<Element, FormatError> {
    let name = String::from_utf8(start.name().as_ref().to_vec())
        .map_err(|e| FormatError::Malformed(e.to_string()))?;
    let mut element = Element::new(name);
    for attr in start.attributes() {
        let attr = attr.map_err(|e| FormatError::Malformed(e.to_string()))?;
        let key = String::from_utf8(attr.key.as_ref().to_vec())
            .map_err(|e| FormatError::Malformed(e.to_string()))?;
        let value = attr
            .unescape_value()
            .map_err(|e| FormatError::Malformed(e.to_string()))?
            .into_owned();
        element.attrs.push((key, value));
    }
    Ok(element)
}

pub fn parse(bytes: &[u8]) -> Result<Element, FormatError> {
    let text = std::str::from_utf8(bytes).map_err(|e| FormatError::Malformed(e.to_string()))?;
    let mut reader = Reader::from_str(text);
    let mut stack: Vec<Element> = Vec::new();
    let mut root: Option<Element> = None;

    loop {
        let event = reader.read_event().map_err(|e| {
            FormatError::Malformed(format!("at byte {}: {e}", reader.buffer_position()))
        })?;
        match event {
            Event::Start(start) => {
                if root.is_some() {
                    return Err(FormatError::Malformed(
                        "content after the root element".into(),
                    ));
                }
                stack.push(start_element(&start)?);
            }
            Event::Empty(start) => {
                let element = start_element(&start)?;
                match stack.last_mut() {
                    Some(parent) => parent.push(element),
                    None if root.is_none() => root = Some(element),
                    None => {
                        return Err(FormatError::Malformed(
                            "content after the root element".into(),
                        ))
                    }
                }
            }
            Event::End(_) => {
                let element = stack
                    .pop()
                    .ok_or_else(|| FormatError::Malformed("unbalanced end tag".into()))?;
                match stack.last_mut() {
                    Some(parent) => parent.push(element),
                    None => root = Some(element),
                }
            }
            Event::Text(t) => {
                let raw = t
                    .unescape()
                    .map_err(|e| FormatError::Malformed(e.to_string()))?;
                if !raw.trim().is_empty() {
                    return Err(FormatError::Schema(format!(
                        "unexpected text content `{}`",
                        raw.trim()
                    )));
                }
            }
            Event::CData(_) => {
                return Err(FormatError::Schema("unexpected CDATA section".into()));
            }
            Event::Decl(_) | Event::Comment(_) | Event::PI(_) | Event::DocType(_) => {}
            Event::Eof => break,
        }
    }
    if !stack.is_empty() {
        return Err(FormatError::Malformed("unexpected end of document".into()));
    }
    root.ok_or_else(|| FormatError::Malformed("document has no root element".into()))
}

fn escape_attr(value: &str, out: &mut String) {
    for c in value.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\n' => out.push_str("&#10;"),
            '\r' => out.push_str("&#13;"),
            '\t' => out.push_str("&#9;"),
            c => out.push(c),
        }
    }
}

fn write_element(element: &Element, depth: usize, out: &mut String) {
    for _ in 0..depth {
        out.push_str("  ");
    }
    out.push('<');
    out.push_str(&element.name);
    for (k, v) in &element.attrs {
        out.push(' ');
        out.push_str(k);
        out.push_str("=\"");
        escape_attr(v, out);
        out.push('"');
    }
    if element.children.is_empty() {
        out.push_str("/>\n");
        return;
    }
    out.push_str(">\n");
    for child in &element.children {
        write_element(child, depth + 1, out);
    }
    for _ in 0..depth {
        out.push_str("  ");
    }
    out.push_str("</");
    out.push_str(&element.name);
    out.push_str(">\n");
}

/// Canonical rendering: XML declaration, two-space indentation, LF endings,
/// attributes in insertion order, empty elements self-closed.
pub fn write(root: &Element) -> String {
    let mut out = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    write_element(root, 0, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_nested_elements_and_attributes() {
        let doc = br#"<?xml version="1.0"?>
<!-- comment -->
<A x="1" y="a&amp;b"><B/><C z="&lt;"></C></A>"#;
        let root = parse(doc).unwrap();
        assert_eq!(root.name, "A");
        assert_eq!(root.get("y"), Some("a&b"));
        assert_eq!(root.children.len(), 2);
        assert_eq!(root.children[1].get("z"), Some("<"));
    }

    #[test]
    fn rejects_text_and_mismatched_tags() {
        assert!(matches!(parse(b"<A>hi</A>"), Err(FormatError::Schema(_))));
        assert!(matches!(
            parse(b"<A><B></A>"),
            Err(FormatError::Malformed(_))
        ));
        assert!(matches!(parse(b"<A>"), Err(FormatError::Malformed(_))));
        assert!(matches!(parse(b""), Err(FormatError::Malformed(_))));
        assert!(matches!(parse(b"<A/><B/>"), Err(FormatError::Malformed(_))));
        assert!(matches!(
            parse(b"<A x=\"1\" x=\"2\"/>"),
            Err(FormatError::Malformed(_))
        ));
    }

    #[test]
    fn writer_round_trips_awkward_values() {
        let root = Element::new("R")
            .attr("v", "a<b>&\"c\"\n\t'd'")
            .child(Element::new("E"));
        let text = write(&root);
        assert_eq!(parse(text.as_bytes()).unwrap(), root);
        assert!(text.ends_with("</R>\n"));
    }
}
