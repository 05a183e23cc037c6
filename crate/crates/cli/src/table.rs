//! Side-by-side comparison of simulation reports.

use serde::Serialize;
use serde_json::Value;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub mode: String,
    pub n_nodes: u64,
    pub delta_seconds: f64,
    pub client_rate: f64,
    pub predicted_rps: f64,
    pub measured_rps: f64,
    pub drops: u64,
    pub converged: bool,
}

/// Legacy-to-proposed load ratio for a matching parameter set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioRow {
    pub n_nodes: u64,
    pub delta_seconds: f64,
    pub client_rate: f64,
    pub ratio: f64,
    pub n_over_delta: f64,
}

fn field<'a>(v: &'a Value, name: &str, idx: usize) -> Result<&'a Value, String> {
    v.get(name)
        .ok_or_else(|| format!("report {idx}: missing field `{name}`"))
}

fn num(v: &Value, name: &str, idx: usize) -> Result<f64, String> {
    field(v, name, idx)?
        .as_f64()
        .ok_or_else(|| format!("report {idx}: field `{name}` is not a number"))
}

fn uint(v: &Value, name: &str, idx: usize) -> Result<u64, String> {
    field(v, name, idx)?
        .as_u64()
        .ok_or_else(|| format!("report {idx}: field `{name}` is not an unsigned integer"))
}

impl ReportRow {
    pub fn from_value(v: &Value, idx: usize) -> Result<Self, String> {
        Ok(Self {
            mode: field(v, "mode", idx)?
                .as_str()
                .ok_or_else(|| format!("report {idx}: field `mode` is not a string"))?
                .to_string(),
            n_nodes: uint(v, "n_nodes", idx)?,
            delta_seconds: num(v, "delta_seconds", idx)?,
            client_rate: num(v, "client_rate", idx)?,
            predicted_rps: num(v, "rs_rps_predicted", idx)?,
            measured_rps: num(v, "rs_rps_mean", idx)?,
            drops: uint(v, "rs_drops", idx)?,
            converged: field(v, "consensus_converged", idx)?
                .as_bool()
                .ok_or_else(|| {
                    format!("report {idx}: field `consensus_converged` is not a boolean")
                })?,
        })
    }
}

/// Flattens files holding either one report or an array of them.
pub fn parse_reports(docs: &[Value]) -> Result<Vec<ReportRow>, String> {
    let mut rows = Vec::new();
    for doc in docs {
        let items = match doc {
            Value::Array(a) => a.iter().collect(),
            other => vec![other],
        };
        for item in items {
            rows.push(ReportRow::from_value(item, rows.len())?);
        }
    }
    if rows.is_empty() {
        return Err("no reports given".into());
    }
    Ok(rows)
}

pub fn ratios(rows: &[ReportRow]) -> Vec<RatioRow> {
    let mut out = Vec::new();
    for l in rows.iter().filter(|r| r.mode == "LEGACY") {
        let matching = rows.iter().find(|p| {
            p.mode == "PROPOSED"
                && p.n_nodes == l.n_nodes
                && p.delta_seconds == l.delta_seconds
                && p.client_rate == l.client_rate
        });
        if let Some(p) = matching {
            if p.measured_rps > 0.0 {
                out.push(RatioRow {
                    n_nodes: l.n_nodes,
                    delta_seconds: l.delta_seconds,
                    client_rate: l.client_rate,
                    ratio: l.measured_rps / p.measured_rps,
                    n_over_delta: l.n_nodes as f64 / l.delta_seconds,
                });
            }
        }
    }
    out
}

pub fn render_text(rows: &[ReportRow]) -> String {
    let mut out = format!(
        "{:<9} {:>6} {:>7} {:>8} {:>12} {:>12} {:>9} {:>9}\n",
        "mode", "N", "delta", "k", "predicted", "measured", "drops", "converged"
    );
    for r in rows {
        out.push_str(&format!(
            "{:<9} {:>6} {:>7.2} {:>8.2} {:>12.2} {:>12.2} {:>9} {:>9}\n",
            r.mode,
            r.n_nodes,
            r.delta_seconds,
            r.client_rate,
            r.predicted_rps,
            r.measured_rps,
            r.drops,
            r.converged
        ));
    }
    let ratios = ratios(rows);
    if !ratios.is_empty() {
        out.push_str(&format!(
            "\n{:>6} {:>7} {:>8} {:>14} {:>8}\n",
            "N", "delta", "k", "legacy/prop.", "N/delta"
        ));
        for r in ratios {
            out.push_str(&format!(
                "{:>6} {:>7.2} {:>8.2} {:>14.2} {:>8.2}\n",
                r.n_nodes, r.delta_seconds, r.client_rate, r.ratio, r.n_over_delta
            ));
        }
    }
    out
}

pub fn render_csv(rows: &[ReportRow]) -> String {
    let mut out = String::from(
        "mode,n_nodes,delta_seconds,client_rate,predicted_rps,measured_rps,drops,converged\n",
    );
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.mode,
            r.n_nodes,
            r.delta_seconds,
            r.client_rate,
            r.predicted_rps,
            r.measured_rps,
            r.drops,
            r.converged
        ));
    }
    out
}
