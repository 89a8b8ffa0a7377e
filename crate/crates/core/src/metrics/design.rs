use serde::Serialize;

use crate::model::{FanOutPolicy, FbNetwork, SecureLinkAnnotation};

/// Whether secure-link annotations contribute to a metric.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AnnotationPolicy {
    #[default]
    Count,
    Ignore,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DesignRow {
    pub instance: String,
    pub f_out: usize,
    #[serde(rename = "NI")]
    pub ni: usize,
    #[serde(rename = "NO")]
    pub no: usize,
    #[serde(rename = "S")]
    pub s: f64,
    #[serde(rename = "DC")]
    pub dc: f64,
    #[serde(rename = "C")]
    pub c: f64,
}

impl DesignRow {
    pub fn new(instance: impl Into<String>, f_out: usize, ni: usize, no: usize) -> Self {
        let s = (f_out * f_out) as f64;
        let dc = (ni + no) as f64 / (s + 1.0);
        DesignRow {
            instance: instance.into(),
            f_out,
            ni,
            no,
            s,
            dc,
            c: s + dc,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct DesignComplexity {
    /// One row per instance, in instance order.
    pub rows: Vec<DesignRow>,
    /// Synthetic rows for counted secure links; part of the aggregates but
    /// not of the instance listing.
    pub link_rows: Vec<DesignRow>,
    pub f_out: usize,
    #[serde(rename = "NI")]
    pub ni: usize,
    #[serde(rename = "NO")]
    pub no: usize,
    #[serde(rename = "S_star")]
    pub s_star: f64,
    #[serde(rename = "DC_star")]
    pub dc_star: f64,
    #[serde(rename = "C_star")]
    pub c_star: f64,
}

/// Annotation fields counted as design inputs: the requirement reference and
/// every parameter assignment.
pub fn link_design_inputs(sl: &SecureLinkAnnotation) -> usize {
    1 + sl.values.len()
}

pub fn design_complexity(fbn: &FbNetwork, link_policy: AnnotationPolicy) -> DesignComplexity {
    design_complexity_with(fbn, link_policy, FanOutPolicy::default())
}

pub fn design_complexity_with(
    fbn: &FbNetwork,
    link_policy: AnnotationPolicy,
    fan_out: FanOutPolicy,
) -> DesignComplexity {
    let table = fbn.fan_out_table(fan_out);
    let rows: Vec<DesignRow> = fbn
        .instances
        .iter()
        .map(|inst| {
            let (ni, no) = fbn
                .types
                .get(&inst.type_name)
                .map(|t| (t.data_inputs(), t.data_outputs()))
                .unwrap_or((0, 0));
            DesignRow::new(&inst.name, table[inst.name.as_str()], ni, no)
        })
        .collect();
    let link_rows: Vec<DesignRow> = match link_policy {
        AnnotationPolicy::Ignore => Vec::new(),
        AnnotationPolicy::Count => fbn
            .secure_links()
            .map(|(_, sl)| DesignRow::new(&sl.link_id, 0, link_design_inputs(sl), 0))
            .collect(),
    };

    let mut out = DesignComplexity::default();
    for r in rows.iter().chain(&link_rows) {
        out.f_out += r.f_out;
        out.ni += r.ni;
        out.no += r.no;
        out.s_star += r.s;
        out.dc_star += r.dc;
        out.c_star += r.c;
    }
    out.rows = rows;
    out.link_rows = link_rows;
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::tests::two_block_network;
    use crate::model::{Connection, Endpoint};
    use std::collections::BTreeMap;

    #[test]
    fn row_formulas() {
        let r = DesignRow::new("x", 2, 10, 5);
        assert_eq!(r.s, 4.0);
        assert_eq!(r.dc, 3.0);
        assert_eq!(r.c, 7.0);
        let zero = DesignRow::new("z", 0, 0, 0);
        assert_eq!((zero.s, zero.dc, zero.c), (0.0, 0.0, 0.0));
    }

    #[test]
    fn links_add_pseudo_rows_only_when_counted() {
        let mut fbn = two_block_network();
        let sl = SecureLinkAnnotation {
            link_id: "L".into(),
            requirement: "R".into(),
            mechanism: "M".into(),
            values: BTreeMap::from([("a".into(), "1".into()), ("b".into(), "2".into())]),
        };
        fbn.connections.push(
            Connection::data(Endpoint::port("A", "X"), Endpoint::port("B", "X"))
                .with_secure_link(sl),
        );
        let ignored = design_complexity(&fbn, AnnotationPolicy::Ignore);
        let counted = design_complexity(&fbn, AnnotationPolicy::Count);
        assert_eq!(ignored.rows, counted.rows);
        assert_eq!(counted.link_rows.len(), 1);
        assert_eq!(counted.ni, ignored.ni + 3);
        assert_eq!(counted.s_star, ignored.s_star);
        assert!((counted.dc_star - ignored.dc_star - 3.0).abs() < 1e-12);
        // A: f_out 1, 0 in + 2 out; B: f_out 0, 2 in
        assert_eq!(ignored.s_star, 1.0);
        assert!((ignored.dc_star - (2.0 / 2.0 + 2.0)).abs() < 1e-12);
    }

    #[test]
    fn empty_network_is_all_zero() {
        let d = design_complexity(&FbNetwork::default(), AnnotationPolicy::Count);
        assert_eq!(d, DesignComplexity::default());
    }
}
