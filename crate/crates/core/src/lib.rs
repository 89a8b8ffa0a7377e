//! Secure-link compiler and analysis toolkit for IEC 61499 function block
//! networks.
//!
//! Secure links are data connections annotated with a requirement, a
//! security mechanism and parameter values. [`compiler::compile`] replaces
//! each link that crosses devices with an instance of its mechanism taken
//! from a [`library::SecurityLibrary`], records what it generated in a
//! [`trace::TraceGraph`], and leaves a plain network behind. The
//! [`metrics`] module measures networks before and after.

pub mod compiler;
pub mod format;
pub mod library;
pub mod metrics;
pub mod model;
pub mod trace;
mod xml;

pub use compiler::{compile, CompilationOutcome, CompileError, CompileOptions, LinkStatus};
pub use format::{FormatError, SystemDocument};
pub use library::{load_library, SecurityLibrary, SecurityMechanism};
pub use model::{FbNetwork, ValidationReport};
pub use trace::TraceGraph;
