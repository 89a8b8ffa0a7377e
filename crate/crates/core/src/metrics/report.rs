use serde::Serialize;

use crate::model::FbNetwork;

use super::{
    design_complexity, network_program_metrics, AnnotationPolicy, DesignComplexity, DesignRow,
    MetricsError, NetworkProgramMetrics,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReportFormat {
    #[default]
    Table,
    Structured,
    Csv,
}

/// Column groups shown in table output.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Sections {
    pub design: bool,
    pub program: bool,
}

impl Default for Sections {
    fn default() -> Self {
        Sections {
            design: true,
            program: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsRow {
    pub name: String,
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
    #[serde(rename = "V_alg")]
    pub v_alg: i64,
    #[serde(rename = "V_cf")]
    pub v_cf: i64,
    #[serde(rename = "M_M")]
    pub m_m: f64,
    #[serde(rename = "MI")]
    pub mi: Option<f64>,
}

impl MetricsRow {
    pub fn new(name: impl Into<String>, d: &DesignComplexity, p: &NetworkProgramMetrics) -> Self {
        let h = &p.halstead;
        MetricsRow {
            name: name.into(),
            f_out: d.f_out,
            ni: d.ni,
            no: d.no,
            s_star: d.s_star,
            dc_star: d.dc_star,
            c_star: d.c_star,
            length: h.length,
            vocabulary: h.vocabulary,
            estimated_length: h.estimated_length,
            purity_ratio: h.purity_ratio,
            volume: h.volume,
            difficulty: h.difficulty,
            effort: h.effort,
            v_alg: p.mccabe.v_alg,
            v_cf: p.mccabe.v_cf,
            m_m: p.mccabe.m_m,
            mi: p.mi,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub links: &'static str,
    /// How network-level `V`, `D` and `E` were obtained.
    pub aggregation: &'static str,
    pub rows: Vec<MetricsRow>,
    /// Per-instance design rows of the first network.
    pub instances: Vec<DesignRow>,
}

impl MetricsReport {
    pub fn new(link_policy: AnnotationPolicy) -> Self {
        MetricsReport {
            links: match link_policy {
                AnnotationPolicy::Count => "count",
                AnnotationPolicy::Ignore => "ignore",
            },
            aggregation: "reconstructed",
            rows: Vec::new(),
            instances: Vec::new(),
        }
    }

    fn policy(&self) -> AnnotationPolicy {
        if self.links == "count" {
            AnnotationPolicy::Count
        } else {
            AnnotationPolicy::Ignore
        }
    }

    pub fn add_network(
        &mut self,
        name: &str,
        fbn: &FbNetwork,
    ) -> Result<&MetricsRow, MetricsError> {
        let design = design_complexity(fbn, self.policy());
        let program = network_program_metrics(fbn, self.policy())?;
        if self.rows.is_empty() {
            self.instances = design.rows.clone();
        }
        self.rows.push(MetricsRow::new(name, &design, &program));
        Ok(self.rows.last().expect("just pushed"))
    }

    pub fn for_network(
        name: &str,
        fbn: &FbNetwork,
        link_policy: AnnotationPolicy,
    ) -> Result<Self, MetricsError> {
        let mut report = MetricsReport::new(link_policy);
        report.add_network(name, fbn)?;
        Ok(report)
    }

    pub fn render(&self, format: ReportFormat, sections: Sections) -> String {
        match format {
            ReportFormat::Table => self.table(sections),
            ReportFormat::Structured => {
                let mut s = serde_json::to_string_pretty(self).expect("report serializes");
                s.push('\n');
                s
            }
            ReportFormat::Csv => self.csv(),
        }
    }

    fn csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        if self.rows.is_empty() {
            w.write_record(CSV_HEADER).expect("in-memory write");
        }
        for row in &self.rows {
            w.serialize(row).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is UTF-8")
    }

    fn table(&self, sections: Sections) -> String {
        let mut header = vec!["name".to_string()];
        if sections.design {
            header.extend(DESIGN_COLUMNS.iter().map(|s| s.to_string()));
        }
        if sections.program {
            header.extend(PROGRAM_COLUMNS.iter().map(|s| s.to_string()));
        }
        let mut body = Vec::new();
        for r in &self.rows {
            let mut line = vec![r.name.clone()];
            if sections.design {
                line.extend([
                    r.f_out.to_string(),
                    r.ni.to_string(),
                    r.no.to_string(),
                    fixed(r.s_star),
                    fixed(r.dc_star),
                    fixed(r.c_star),
                ]);
            }
            if sections.program {
                line.extend([
                    r.length.to_string(),
                    r.vocabulary.to_string(),
                    fixed(r.estimated_length),
                    fixed(r.purity_ratio),
                    fixed(r.volume),
                    fixed(r.difficulty),
                    fixed(r.effort),
                    r.v_alg.to_string(),
                    r.v_cf.to_string(),
                    fixed(r.m_m),
                    r.mi.map(fixed).unwrap_or_else(|| "-".into()),
                ]);
            }
            body.push(line);
        }
        let mut out = align(&header, &body);
        if sections.program {
            out.push_str(&format!(
                "links: {}; network V, D and E aggregation: {}\n",
                self.links, self.aggregation
            ));
        }
        if sections.design && !self.instances.is_empty() {
            out.push('\n');
            let header: Vec<String> = ["instance", "f_out", "NI", "NO", "S", "DC", "C"]
                .iter()
                .map(|s| s.to_string())
                .collect();
            let body: Vec<Vec<String>> = self
                .instances
                .iter()
                .map(|r| {
                    vec![
                        r.instance.clone(),
                        r.f_out.to_string(),
                        r.ni.to_string(),
                        r.no.to_string(),
                        fixed(r.s),
                        fixed(r.dc),
                        fixed(r.c),
                    ]
                })
                .collect();
            out.push_str(&align(&header, &body));
        }
        out
    }
}

const DESIGN_COLUMNS: [&str; 6] = ["f_out", "NI", "NO", "S_star", "DC_star", "C_star"];
const PROGRAM_COLUMNS: [&str; 11] = [
    "N", "n", "N_hat", "PR", "V", "D", "E", "V_alg", "V_cf", "M_M", "MI",
];
const CSV_HEADER: [&str; 18] = [
    "name", "f_out", "NI", "NO", "S_star", "DC_star", "C_star", "N", "n", "N_hat", "PR", "V", "D",
    "E", "V_alg", "V_cf", "M_M", "MI",
];

fn fixed(x: f64) -> String {
    let s = format!("{x:.2}");
    if s == "-0.00" {
        "0.00".into()
    } else {
        s
    }
}

/// First column left-aligned, the rest right-aligned.
fn align(header: &[String], body: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in body {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let mut out = String::new();
    for row in std::iter::once(header).chain(body.iter().map(Vec::as_slice)) {
        let mut line = String::new();
        for (i, (cell, w)) in row.iter().zip(&widths).enumerate() {
            if i == 0 {
                line.push_str(&format!("{cell:<w$}"));
            } else {
                line.push_str(&format!("  {cell:>w$}"));
            }
        }
        out.push_str(line.trim_end());
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_network_renders_all_zero() {
        let r = MetricsReport::for_network("empty", &FbNetwork::default(), AnnotationPolicy::Count)
            .unwrap();
        let row = &r.rows[0];
        assert_eq!((row.f_out, row.ni, row.no, row.length), (0, 0, 0, 0));
        assert_eq!(row.c_star, 0.0);
        let table = r.render(ReportFormat::Table, Sections::default());
        assert!(table.starts_with("name"));
        assert!(table.contains("empty"));
    }

    #[test]
    fn csv_header_order() {
        let r = MetricsReport::for_network("x", &FbNetwork::default(), AnnotationPolicy::Count)
            .unwrap();
        let csv = r.render(ReportFormat::Csv, Sections::default());
        assert_eq!(csv.lines().next().unwrap(), CSV_HEADER.join(","));
        let empty = MetricsReport::new(AnnotationPolicy::Ignore)
            .render(ReportFormat::Csv, Sections::default());
        assert_eq!(empty.trim_end(), CSV_HEADER.join(","));
    }

    #[test]
    fn structured_output_uses_fixed_field_names() {
        let r = MetricsReport::for_network("x", &FbNetwork::default(), AnnotationPolicy::Count)
            .unwrap();
        let v: serde_json::Value =
            serde_json::from_str(&r.render(ReportFormat::Structured, Sections::default())).unwrap();
        let row = &v["rows"][0];
        for key in &CSV_HEADER[1..] {
            assert!(row.get(*key).is_some(), "{key}");
        }
        assert_eq!(v["aggregation"], "reconstructed");
    }

    #[test]
    fn section_selection() {
        let r = MetricsReport::for_network("x", &FbNetwork::default(), AnnotationPolicy::Count)
            .unwrap();
        let design = r.render(
            ReportFormat::Table,
            Sections {
                design: true,
                program: false,
            },
        );
        assert!(design.contains("C_star") && !design.contains("N_hat"));
        let program = r.render(
            ReportFormat::Table,
            Sections {
                design: false,
                program: true,
            },
        );
        assert!(!program.contains("C_star") && program.contains("N_hat"));
    }
}
