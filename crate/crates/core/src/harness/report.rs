use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{mean, DocumentTrace, HarnessError, Method, MethodOutput, MethodRecord, RunConfig};
use crate::attributes::AttributeKind;

/// One aggregated number.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub method: String,
    pub attribute: String,
    pub metric: String,
    pub value: f64,
    /// Documents the value is averaged over.
    pub n: usize,
}

/// Aggregate metrics per method. Rows are ordered by method, then by
/// attribute in canonical order, then overall metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub documents: usize,
    pub rows: Vec<ReportRow>,
}

fn unit(attribute: &str, metric: &str) -> &'static str {
    match (attribute, metric) {
        ("extractiveness" | "specificity", "mad") => "percentage points",
        ("length", "mad") => "words",
        ("topic" | "speaker", "alignment") => "similarity in [0, 1]",
        (_, "coverage" | "satisfied") => "fraction",
        (_, "rouge1" | "quality") => "F1 in [0, 1]",
        (_, "policy_calls") => "calls per document",
        _ => "",
    }
}

impl RunReport {
    /// Aggregates traces. Documents are visited in id order so the result does
    /// not depend on corpus order.
    pub fn from_traces(traces: &[DocumentTrace]) -> Self {
        let mut sorted: Vec<&DocumentTrace> = traces.iter().collect();
        sorted.sort_by(|a, b| a.doc_id.cmp(&b.doc_id));
        let methods: BTreeSet<Method> = sorted.iter().flat_map(|t| t.methods.keys().copied()).collect();
        let mut rows = Vec::new();
        for method in methods {
            let mut push = |attribute: &str, metric: &str, values: &[f64]| {
                if let Some(value) = mean(values) {
                    rows.push(ReportRow {
                        method: method.name().to_string(),
                        attribute: attribute.to_string(),
                        metric: metric.to_string(),
                        value,
                        n: values.len(),
                    });
                }
            };
            let attempted: Vec<&DocumentTrace> = sorted
                .iter()
                .copied()
                .filter(|t| t.methods.contains_key(&method))
                .collect();
            let ok: Vec<(&DocumentTrace, &MethodOutput)> = attempted
                .iter()
                .filter_map(|t| match &t.methods[&method] {
                    MethodRecord::Ok(out) => Some((*t, out.as_ref())),
                    MethodRecord::Failed { .. } => None,
                })
                .collect();
            for kind in AttributeKind::ALL {
                let values: Vec<f64> = ok
                    .iter()
                    .filter(|(t, _)| t.targets.contains(kind))
                    .filter_map(|(_, o)| o.breakdown.per_attribute.get(&kind).copied())
                    .collect();
                let metric = if kind.is_deterministic() { "mad" } else { "alignment" };
                push(kind.name(), metric, &values);
            }
            let coverage: Vec<f64> = attempted
                .iter()
                .map(|t| f64::from(u8::from(matches!(t.methods[&method], MethodRecord::Ok(_)))))
                .collect();
            push("all", "coverage", &coverage);
            let collect = |f: &dyn Fn(&MethodOutput) -> Option<f64>| -> Vec<f64> {
                ok.iter().filter_map(|(_, o)| f(o)).collect()
            };
            push("all", "degree", &collect(&|o| Some(o.breakdown.degree)));
            push(
                "all",
                "satisfied",
                &collect(&|o| Some(f64::from(u8::from(o.satisfied)))),
            );
            push("all", "rouge1", &collect(&|o| o.rouge1));
            push("all", "quality", &collect(&|o| o.quality));
            push("all", "policy_calls", &collect(&|o| Some(o.policy_calls as f64)));
        }
        Self {
            documents: sorted.len(),
            rows,
        }
    }

    pub fn get(&self, method: Method, attribute: &str, metric: &str) -> Option<&ReportRow> {
        self.rows
            .iter()
            .find(|r| r.method == method.name() && r.attribute == attribute && r.metric == metric)
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("method\tattribute\tmetric\tvalue\tn\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{:.6}\t{}",
                r.method, r.attribute, r.metric, r.value, r.n
            );
        }
        out
    }

    pub fn to_markdown(&self, config: Option<&RunConfig>) -> String {
        let mut out = String::from("# Run report\n\n");
        let _ = writeln!(out, "Documents: {}\n", self.documents);
        out.push_str("Deviation rows (`mad`) are lower-is-better; all other rows are higher-is-better except `policy_calls`.\n\n");
        out.push_str("| method | attribute | metric | value | n | unit |\n|---|---|---|---:|---:|---|\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "| {} | {} | {} | {:.4} | {} | {} |",
                r.method,
                r.attribute,
                r.metric,
                r.value,
                r.n,
                unit(&r.attribute, &r.metric)
            );
        }
        if let Some(cfg) = config {
            let _ = write!(out, "\n## Configuration\n\n```toml\n{}```\n", cfg.to_toml());
        }
        out
    }
}

fn trace_file_name(doc_id: &str) -> String {
    let safe: String = doc_id
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') {
                c
            } else {
                '_'
            }
        })
        .collect();
    format!("{safe}.json")
}

fn write_file(path: &Path, contents: &str) -> Result<(), HarnessError> {
    std::fs::write(path, contents).map_err(|e| HarnessError::io(path, e))
}

/// Writes `report.tsv` and `report.md` into `dir`.
pub fn write_report(dir: &Path, report: &RunReport, config: Option<&RunConfig>) -> Result<(), HarnessError> {
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    write_file(&dir.join("report.tsv"), &report.to_tsv())?;
    write_file(&dir.join("report.md"), &report.to_markdown(config))
}

/// Writes the report files plus `traces/<doc-id>.json`.
pub fn write_outputs(
    dir: &Path,
    traces: &[DocumentTrace],
    report: &RunReport,
    config: Option<&RunConfig>,
) -> Result<(), HarnessError> {
    let trace_dir = dir.join("traces");
    std::fs::create_dir_all(&trace_dir).map_err(|e| HarnessError::io(&trace_dir, e))?;
    for t in traces {
        let json = serde_json::to_string_pretty(t).expect("traces serialize") + "\n";
        write_file(&trace_dir.join(trace_file_name(&t.doc_id)), &json)?;
    }
    write_report(dir, report, config)
}

/// Reads every `*.json` trace in `dir`, in file-name order.
pub fn load_traces(dir: &Path) -> Result<Vec<DocumentTrace>, HarnessError> {
    let mut paths: Vec<_> = std::fs::read_dir(dir)
        .map_err(|e| HarnessError::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| {
            let text = std::fs::read_to_string(p).map_err(|e| HarnessError::io(p, e))?;
            serde_json::from_str(&text).map_err(|e| HarnessError::io(p, e))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attributes::{AttributeTarget, AttributeVector, Targets};
    use crate::harness::MethodDetail;
    use crate::reward::DegreeBreakdown;
    use std::collections::BTreeMap;

    fn trace(id: &str, length_dev: f64) -> DocumentTrace {
        let mut per_attribute = BTreeMap::new();
        per_attribute.insert(AttributeKind::Length, length_dev);
        let out = MethodOutput {
            summary: "s".into(),
            measured: AttributeVector::default(),
            breakdown: DegreeBreakdown {
                per_attribute,
                avg_det: length_dev,
                avg_nondet: 0.0,
                degree: 1.0 / length_dev,
            },
            satisfied: false,
            rouge1: None,
            quality: None,
            policy_calls: 1,
            detail: MethodDetail::None,
        };
        let mut methods = BTreeMap::new();
        methods.insert(Method::Single, MethodRecord::Ok(Box::new(out)));
        methods.insert(Method::Paco, MethodRecord::Failed { error: "x".into() });
        DocumentTrace {
            doc_id: id.into(),
            targets: Targets::new(vec![AttributeTarget::Length(10)]).unwrap(),
            methods,
        }
    }

    #[test]
    fn length_mad_is_mean_deviation() {
        let r = RunReport::from_traces(&[trace("a", 4.0), trace("b", 6.0)]);
        let row = r.get(Method::Single, "length", "mad").unwrap();
        assert_eq!((row.value, row.n), (5.0, 2));
        let cov = r.get(Method::Paco, "all", "coverage").unwrap();
        assert_eq!((cov.value, cov.n), (0.0, 2));
        assert!(r.get(Method::Paco, "length", "mad").is_none());
    }

    #[test]
    fn permutation_invariant() {
        let a = RunReport::from_traces(&[trace("a", 0.1), trace("b", 0.2), trace("c", 0.3)]);
        let b = RunReport::from_traces(&[trace("c", 0.3), trace("a", 0.1), trace("b", 0.2)]);
        assert_eq!(a.to_tsv(), b.to_tsv());
    }

    #[test]
    fn traces_round_trip_through_disk() {
        let dir = tempfile::tempdir().unwrap();
        let traces = vec![trace("doc/1", 4.0), trace("b", 6.0)];
        let report = RunReport::from_traces(&traces);
        write_outputs(dir.path(), &traces, &report, None).unwrap();
        assert!(dir.path().join("traces/doc_1.json").exists());
        let loaded = load_traces(&dir.path().join("traces")).unwrap();
        assert_eq!(RunReport::from_traces(&loaded), report);
        let tsv = std::fs::read_to_string(dir.path().join("report.tsv")).unwrap();
        assert!(tsv.starts_with("method\tattribute\tmetric\tvalue\tn\npaco\tall\tcoverage\t0.000000\t2\n"));
        assert!(tsv.contains("\nsingle\tlength\tmad\t5.000000\t2\n"));
    }
}
