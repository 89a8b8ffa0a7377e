use std::collections::HashSet;

use serde::Serialize;

use crate::model::{SecureLinkAnnotation, Token, TokenClass};

use super::MetricsError;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct HalsteadTuple {
    /// Distinct operators.
    pub n1: usize,
    /// Distinct operands.
    pub n2: usize,
    #[serde(rename = "N1")]
    pub big_n1: usize,
    #[serde(rename = "N2")]
    pub big_n2: usize,
    #[serde(rename = "N")]
    pub length: usize,
    #[serde(rename = "n")]
    pub vocabulary: usize,
    #[serde(rename = "N_hat")]
    pub estimated_length: f64,
    #[serde(rename = "PR")]
    pub purity_ratio: f64,
    #[serde(rename = "V")]
    pub volume: f64,
    #[serde(rename = "D")]
    pub difficulty: f64,
    #[serde(rename = "E")]
    pub effort: f64,
}

fn n_log2_n(n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        n as f64 * (n as f64).log2()
    }
}

impl HalsteadTuple {
    /// Standard formulas from operator/operand counts.
    pub fn from_counts(n1: usize, n2: usize, big_n1: usize, big_n2: usize) -> Self {
        let length = big_n1 + big_n2;
        let vocabulary = n1 + n2;
        let estimated_length = n_log2_n(n1) + n_log2_n(n2);
        let purity_ratio = if length == 0 {
            0.0
        } else {
            estimated_length / length as f64
        };
        let volume = if vocabulary == 0 {
            0.0
        } else {
            length as f64 * (vocabulary as f64).log2()
        };
        let difficulty = if n2 == 0 {
            0.0
        } else {
            (n1 as f64 / 2.0) * (big_n2 as f64 / n2 as f64)
        };
        HalsteadTuple {
            n1,
            n2,
            big_n1,
            big_n2,
            length,
            vocabulary,
            estimated_length,
            purity_ratio,
            volume,
            difficulty,
            effort: difficulty * volume,
        }
    }

    pub fn from_tokens<'a>(tokens: impl IntoIterator<Item = &'a Token>) -> Self {
        let mut operators = HashSet::new();
        let mut operands = HashSet::new();
        let (mut big_n1, mut big_n2) = (0, 0);
        for t in tokens {
            match t.class {
                TokenClass::Operator => {
                    big_n1 += 1;
                    operators.insert(t.text.as_str());
                }
                TokenClass::Operand => {
                    big_n2 += 1;
                    operands.insert(t.text.as_str());
                }
            }
        }
        Self::from_counts(operators.len(), operands.len(), big_n1, big_n2)
    }
}

pub fn halstead(tokens: &[Token]) -> Result<HalsteadTuple, MetricsError> {
    if tokens.is_empty() {
        return Err(MetricsError::EmptyTokenStream);
    }
    Ok(HalsteadTuple::from_tokens(tokens))
}

/// The link id as one operator; requirement, mechanism and each parameter
/// assignment as operands. Operand texts are prefixed with the link id so
/// that links sharing a requirement still contribute distinct tokens.
pub fn secure_link_tokens(sl: &SecureLinkAnnotation) -> Vec<Token> {
    let id = &sl.link_id;
    let mut out = vec![
        Token::operator(id.clone()),
        Token::operand(format!("{id}:{}", sl.requirement)),
        Token::operand(format!("{id}:{}", sl.mechanism)),
    ];
    for (k, v) in &sl.values {
        out.push(Token::operand(format!("{id}:{k}={v}")));
    }
    out
}
