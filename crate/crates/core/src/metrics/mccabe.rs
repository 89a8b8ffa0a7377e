use serde::Serialize;

use crate::model::{ControlFlowGraph, FbType};

use super::MetricsError;

/// `E - N + 2P`.
pub fn cyclomatic(g: &ControlFlowGraph) -> Result<i64, MetricsError> {
    if !g.is_well_formed() {
        return Err(MetricsError::MalformedGraph(*g));
    }
    Ok(g.edges - g.nodes + 2 * g.components)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct McCabeRow {
    #[serde(rename = "V_alg")]
    pub v_alg: i64,
    #[serde(rename = "V_cf")]
    pub v_cf: i64,
    #[serde(rename = "M_M")]
    pub m_m: i64,
}

/// Sum of algorithm complexities plus the ECC complexity (0 without ECC).
pub fn mccabe(fb: &FbType) -> Result<McCabeRow, MetricsError> {
    let mut v_alg = 0;
    for alg in &fb.algorithms {
        v_alg += cyclomatic(&alg.cfg)?;
    }
    let v_cf = match &fb.ecc {
        Some(ecc) => cyclomatic(&ecc.graph)?,
        None => 0,
    };
    Ok(McCabeRow {
        v_alg,
        v_cf,
        m_m: v_alg + v_cf,
    })
}
