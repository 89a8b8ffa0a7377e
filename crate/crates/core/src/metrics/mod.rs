//! Design complexity, Halstead, McCabe and maintainability metrics over
//! FB networks.

mod design;
mod halstead;
mod mccabe;
mod report;

use serde::Serialize;
use thiserror::Error;

use crate::model::{ControlFlowGraph, FbNetwork, FbType, Token};

pub use design::{
    design_complexity, design_complexity_with, link_design_inputs, AnnotationPolicy,
    DesignComplexity, DesignRow,
};
pub use halstead::{halstead, secure_link_tokens, HalsteadTuple};
pub use mccabe::{cyclomatic, mccabe, McCabeRow};
pub use report::{MetricsReport, MetricsRow, ReportFormat, Sections};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("token stream is empty")]
    EmptyTokenStream,
    #[error("malformed graph: {} nodes, {} edges, {} components", .0.nodes, .0.edges, .0.components)]
    MalformedGraph(ControlFlowGraph),
    #[error("maintainability index undefined: {0}")]
    DomainError(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MaintainabilityResult {
    #[serde(rename = "MI")]
    pub mi: f64,
    #[serde(rename = "V")]
    pub volume: f64,
    #[serde(rename = "M_M")]
    pub m_m: f64,
    #[serde(rename = "LOC")]
    pub loc: f64,
}

/// `171 - 5.2 ln V - 0.23 M_M - 16.2 ln LOC`
pub fn maintainability_index(
    volume: f64,
    m_m: f64,
    loc: f64,
) -> Result<MaintainabilityResult, MetricsError> {
    if !(volume > 0.0 && volume.is_finite()) {
        return Err(MetricsError::DomainError(format!(
            "volume must be positive, got {volume}"
        )));
    }
    if !(loc > 0.0 && loc.is_finite()) {
        return Err(MetricsError::DomainError(format!(
            "LOC must be positive, got {loc}"
        )));
    }
    Ok(MaintainabilityResult {
        mi: 171.0 - 5.2 * volume.ln() - 0.23 * m_m - 16.2 * loc.ln(),
        volume,
        m_m,
        loc,
    })
}

/// Program metrics of one block; Halstead values are summed over its
/// algorithms plus the ECC token stream when one is declared.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockProgram {
    pub instance: String,
    #[serde(rename = "type")]
    pub type_name: String,
    #[serde(rename = "N")]
    pub length: usize,
    #[serde(rename = "V")]
    pub volume: f64,
    #[serde(rename = "D")]
    pub difficulty: f64,
    #[serde(rename = "E")]
    pub effort: f64,
    #[serde(flatten)]
    pub mccabe: McCabeRow,
    #[serde(rename = "LOC")]
    pub loc: u32,
}

pub fn block_program(instance: &str, fb: &FbType) -> Result<BlockProgram, MetricsError> {
    let mut out = BlockProgram {
        instance: instance.to_string(),
        type_name: fb.name.clone(),
        length: 0,
        volume: 0.0,
        difficulty: 0.0,
        effort: 0.0,
        mccabe: mccabe(fb)?,
        loc: fb.loc,
    };
    let ecc_tokens = fb.ecc.iter().map(|e| &e.tokens).filter(|t| !t.is_empty());
    for tokens in fb.algorithms.iter().map(|a| &a.tokens).chain(ecc_tokens) {
        let h = halstead(tokens)?;
        out.length += h.length;
        out.volume += h.volume;
        out.difficulty += h.difficulty;
        out.effort += h.effort;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NetworkMcCabe {
    /// Sum over blocks.
    #[serde(rename = "V_alg")]
    pub v_alg: i64,
    /// Sum over blocks.
    #[serde(rename = "V_cf")]
    pub v_cf: i64,
    /// Mean over blocks.
    #[serde(rename = "M_M")]
    pub m_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NetworkProgramMetrics {
    /// `N`, `n`, `N_hat` and `PR` come from the union token stream. `V` and
    /// `E` are sums over blocks and links, `D` is the mean over blocks.
    pub halstead: HalsteadTuple,
    pub mccabe: NetworkMcCabe,
    #[serde(rename = "LOC")]
    pub loc: u64,
    #[serde(rename = "MI")]
    pub mi: Option<f64>,
    pub aggregation: &'static str,
    pub blocks: Vec<BlockProgram>,
}

fn instance_tokens(fb: &FbType) -> impl Iterator<Item = &Token> {
    fb.algorithms
        .iter()
        .flat_map(|a| a.tokens.iter())
        .chain(fb.ecc.iter().flat_map(|e| e.tokens.iter()))
}

pub fn network_program_metrics(
    fbn: &FbNetwork,
    link_policy: AnnotationPolicy,
) -> Result<NetworkProgramMetrics, MetricsError> {
    let mut stream: Vec<Token> = Vec::new();
    let mut blocks = Vec::new();
    for inst in &fbn.instances {
        let Some(fb) = fbn.types.get(&inst.type_name) else {
            continue;
        };
        stream.extend(instance_tokens(fb).cloned());
        blocks.push(block_program(&inst.name, fb)?);
    }
    let mut link_volume = 0.0;
    let mut link_effort = 0.0;
    if link_policy == AnnotationPolicy::Count {
        for (_, sl) in fbn.secure_links() {
            let tokens = secure_link_tokens(sl);
            let h = halstead(&tokens)?;
            link_volume += h.volume;
            link_effort += h.effort;
            stream.extend(tokens);
        }
    }

    let mut h = HalsteadTuple::from_tokens(&stream);
    let count = blocks.len() as f64;
    h.volume = blocks.iter().map(|b| b.volume).sum::<f64>() + link_volume;
    h.effort = blocks.iter().map(|b| b.effort).sum::<f64>() + link_effort;
    h.difficulty = if blocks.is_empty() {
        0.0
    } else {
        blocks.iter().map(|b| b.difficulty).sum::<f64>() / count
    };

    let mccabe = NetworkMcCabe {
        v_alg: blocks.iter().map(|b| b.mccabe.v_alg).sum(),
        v_cf: blocks.iter().map(|b| b.mccabe.v_cf).sum(),
        m_m: if blocks.is_empty() {
            0.0
        } else {
            blocks.iter().map(|b| b.mccabe.m_m as f64).sum::<f64>() / count
        },
    };
    let loc: u64 = blocks.iter().map(|b| u64::from(b.loc)).sum();
    let mi = maintainability_index(h.volume, mccabe.m_m, loc as f64)
        .ok()
        .map(|r| r.mi);
    Ok(NetworkProgramMetrics {
        halstead: h,
        mccabe,
        loc,
        mi,
        aggregation: "reconstructed",
        blocks,
    })
}
