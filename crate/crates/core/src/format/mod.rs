//! Document formats: systems (`.sys.xml`), FB types (`.fbt.xml`),
//! security mechanisms (`.mech.xml`) and trace repositories (`.trace`).
//!
//! All XML writers produce canonical form. Named children such as devices,
//! instances, mappings, types and parameters are sorted by name; ports,
//! connections and tokens keep their document order because that order is
//! meaningful.

mod fbtype;
mod mechanism;
mod repository;
mod system;

use thiserror::Error;

use crate::model::ValidationReport;

pub use fbtype::{parse_fbtype, serialize_fbtype};
pub use mechanism::{parse_mechanism, serialize_mechanism};
pub use repository::{edge_record, node_record, parse_repository, serialize_repository};
pub use system::{parse_system, parse_system_unchecked, serialize_system, SystemDocument};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FormatError {
    #[error("malformed document: {0}")]
    Malformed(String),
    #[error("schema violation: {0}")]
    Schema(String),
    #[error("model violation:\n{0}")]
    Model(ValidationReport),
    #[error("signature violation: {0}")]
    Signature(String),
    #[error("line {line}: edge references unknown node `{id}`")]
    DanglingEdge { line: usize, id: String },
}

pub(crate) fn parse_bool(element: &crate::xml::Element, key: &str) -> Result<bool, FormatError> {
    match element.get(key) {
        None | Some("false") => Ok(false),
        Some("true") => Ok(true),
        Some(other) => Err(FormatError::Schema(format!(
            "attribute `{key}` on <{}> must be true or false, found `{other}`",
            element.name
        ))),
    }
}

pub(crate) fn parse_count(element: &crate::xml::Element, key: &str) -> Result<i64, FormatError> {
    let raw = element.require(key)?;
    raw.parse().map_err(|_| {
        FormatError::Schema(format!(
            "attribute `{key}` on <{}> must be an integer, found `{raw}`",
            element.name
        ))
    })
}
