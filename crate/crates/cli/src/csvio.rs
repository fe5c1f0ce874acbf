//! Report and trace CSV formats. Both files open with a schema-version
//! comment line so readers can refuse layouts they do not understand.
//! Counts and objectives print in shortest-round-trip form (byte-stable for
//! reproducibility checks); wall-clock seconds print with fixed precision
//! and can be omitted wholesale for byte-reproducible output.

use std::collections::HashMap;

use anyhow::{bail, Context, Result};

use cg_core::cg::{IterRecord, NetTag, Strategy};

pub const REPORT_SCHEMA: &str = "# schema: report/v1";
pub const TRACE_SCHEMA: &str = "# schema: trace/v1";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RowStatus {
    Ok,
    Error(String),
}

impl RowStatus {
    pub fn is_ok(&self) -> bool {
        matches!(self, RowStatus::Ok)
    }
}

/// One line of a bench report: a (instance, strategy) result or a per-size
/// average row (instance = "average"). Averages make `iterations`
/// fractional, so the count fields are floats throughout.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub instance: String,
    pub customers: usize,
    pub strategy: Strategy,
    pub status: RowStatus,
    pub iterations: f64,
    pub full_network_iterations: f64,
    pub pp_seconds: f64,
    pub rmp_seconds: f64,
    pub total_seconds: f64,
    pub objective: f64,
    /// 100 * (1 - total / baseline total) against the same instance's
    /// baseline row; averages carry the mean of their members' gains.
    pub gain_vs_baseline: Option<f64>,
}

impl ReportRow {
    pub fn is_average(&self) -> bool {
        self.instance == AVERAGE_INSTANCE
    }
}

pub const AVERAGE_INSTANCE: &str = "average";

fn strategy_rank(s: Strategy) -> usize {
    Strategy::ALL.iter().position(|&x| x == s).unwrap()
}

/// Field sanitizer: the formats here never quote, so delimiter and line
/// characters are replaced.
pub fn clean_field(s: &str) -> String {
    s.replace([',', '\n', '\r'], ";")
}

/// Fills gains from matching baseline rows, orders rows by size, instance,
/// and strategy, and appends per-(size, strategy) average rows after each
/// size group.
pub fn assemble_report(mut rows: Vec<ReportRow>) -> Vec<ReportRow> {
    let baseline_totals: HashMap<String, f64> = rows
        .iter()
        .filter(|r| r.strategy == Strategy::Baseline && r.status.is_ok())
        .map(|r| (r.instance.clone(), r.total_seconds))
        .collect();
    for row in &mut rows {
        row.gain_vs_baseline = if !row.status.is_ok() {
            None
        } else if row.strategy == Strategy::Baseline {
            Some(0.0)
        } else {
            baseline_totals
                .get(&row.instance)
                .map(|bt| 100.0 * (1.0 - row.total_seconds / bt))
        };
    }
    rows.sort_by(|a, b| {
        a.customers
            .cmp(&b.customers)
            .then_with(|| a.instance.cmp(&b.instance))
            .then_with(|| strategy_rank(a.strategy).cmp(&strategy_rank(b.strategy)))
    });

    let mut out = Vec::with_capacity(rows.len() + 8);
    let mut i = 0;
    while i < rows.len() {
        let size = rows[i].customers;
        let mut j = i;
        while j < rows.len() && rows[j].customers == size {
            j += 1;
        }
        out.extend_from_slice(&rows[i..j]);
        for s in Strategy::ALL {
            let members: Vec<&ReportRow> = rows[i..j]
                .iter()
                .filter(|r| r.strategy == s && r.status.is_ok())
                .collect();
            if members.is_empty() {
                continue;
            }
            let n = members.len() as f64;
            let mean = |f: fn(&ReportRow) -> f64| members.iter().map(|r| f(r)).sum::<f64>() / n;
            let gains: Vec<f64> = members.iter().filter_map(|r| r.gain_vs_baseline).collect();
            out.push(ReportRow {
                instance: AVERAGE_INSTANCE.to_string(),
                customers: size,
                strategy: s,
                status: RowStatus::Ok,
                iterations: mean(|r| r.iterations),
                full_network_iterations: mean(|r| r.full_network_iterations),
                pp_seconds: mean(|r| r.pp_seconds),
                rmp_seconds: mean(|r| r.rmp_seconds),
                total_seconds: mean(|r| r.total_seconds),
                objective: mean(|r| r.objective),
                gain_vs_baseline: if gains.is_empty() {
                    None
                } else {
                    Some(gains.iter().sum::<f64>() / gains.len() as f64)
                },
            });
        }
        i = j;
    }
    out
}

pub fn write_report(rows: &[ReportRow], timing: bool) -> String {
    let mut out = String::new();
    out.push_str(REPORT_SCHEMA);
    out.push('\n');
    out.push_str("instance,customers,strategy,status,iterations,full_network_iterations");
    if timing {
        out.push_str(",pp_seconds,rmp_seconds,total_seconds");
    }
    out.push_str(",objective");
    if timing {
        out.push_str(",gain_vs_baseline");
    }
    out.push('\n');
    for r in rows {
        let status = match &r.status {
            RowStatus::Ok => "ok".to_string(),
            RowStatus::Error(msg) => format!("error: {}", clean_field(msg)),
        };
        out.push_str(&format!(
            "{},{},{},{},{},{}",
            clean_field(&r.instance),
            r.customers,
            r.strategy,
            status,
            r.iterations,
            r.full_network_iterations
        ));
        if timing {
            out.push_str(&format!(
                ",{:.3},{:.3},{:.3}",
                r.pp_seconds, r.rmp_seconds, r.total_seconds
            ));
        }
        out.push_str(&format!(",{}", r.objective));
        if timing {
            match r.gain_vs_baseline {
                Some(g) => out.push_str(&format!(",{g}")),
                None => out.push(','),
            }
        }
        out.push('\n');
    }
    out
}

pub fn read_report(text: &str) -> Result<Vec<ReportRow>> {
    let mut lines = text.lines();
    let schema = lines.next().context("empty report file")?;
    if schema != REPORT_SCHEMA {
        bail!("unsupported report schema line {schema:?}; this build reads {REPORT_SCHEMA:?}");
    }
    let header = lines.next().context("report missing header")?;
    let cols: Vec<&str> = header.split(',').collect();
    let col = |name: &str| cols.iter().position(|&c| c == name);
    let need =
        |name: &str| col(name).with_context(|| format!("report header missing column {name}"));
    let i_instance = need("instance")?;
    let i_customers = need("customers")?;
    let i_strategy = need("strategy")?;
    let i_status = need("status")?;
    let i_iter = need("iterations")?;
    let i_full = need("full_network_iterations")?;
    let i_obj = need("objective")?;
    let i_pp = col("pp_seconds");
    let i_rmp = col("rmp_seconds");
    let i_total = col("total_seconds");
    let i_gain = col("gain_vs_baseline");

    let mut rows = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        let get = |i: usize| -> Result<&str> {
            f.get(i)
                .copied()
                .with_context(|| format!("report line {}: missing field {}", lineno + 3, i + 1))
        };
        let num = |i: usize| -> Result<f64> {
            let s = get(i)?;
            s.parse::<f64>()
                .with_context(|| format!("report line {}: bad number {s:?}", lineno + 3))
        };
        let status_text = get(i_status)?;
        let status = if status_text == "ok" {
            RowStatus::Ok
        } else if let Some(msg) = status_text.strip_prefix("error: ") {
            RowStatus::Error(msg.to_string())
        } else {
            bail!("report line {}: bad status {status_text:?}", lineno + 3);
        };
        let gain = match i_gain {
            Some(i) => {
                let s = get(i)?;
                if s.is_empty() {
                    None
                } else {
                    Some(s.parse::<f64>().with_context(|| {
                        format!("report line {}: bad gain {s:?}", lineno + 3)
                    })?)
                }
            }
            None => None,
        };
        rows.push(ReportRow {
            instance: get(i_instance)?.to_string(),
            customers: get(i_customers)?
                .parse()
                .with_context(|| format!("report line {}: bad customer count", lineno + 3))?,
            strategy: get(i_strategy)?
                .parse()
                .map_err(|e| anyhow::anyhow!("report line {}: {e}", lineno + 3))?,
            status,
            iterations: num(i_iter)?,
            full_network_iterations: num(i_full)?,
            pp_seconds: i_pp.map(num).transpose()?.unwrap_or(0.0),
            rmp_seconds: i_rmp.map(num).transpose()?.unwrap_or(0.0),
            total_seconds: i_total.map(num).transpose()?.unwrap_or(0.0),
            objective: num(i_obj)?,
            gain_vs_baseline: gain,
        });
    }
    Ok(rows)
}

pub fn write_trace(records: &[IterRecord], timing: bool) -> String {
    let mut out = String::new();
    out.push_str(TRACE_SCHEMA);
    out.push('\n');
    out.push_str("iteration,network,columns,labels");
    if timing {
        out.push_str(",pp_seconds,rmp_seconds");
    }
    out.push_str(",objective\n");
    for r in records {
        out.push_str(&format!(
            "{},{},{},{}",
            r.iteration, r.network, r.columns, r.labels
        ));
        if timing {
            out.push_str(&format!(",{:.6},{:.6}", r.pp_seconds, r.rmp_seconds));
        }
        out.push_str(&format!(",{}\n", r.objective));
    }
    out
}

pub fn read_trace(text: &str) -> Result<Vec<IterRecord>> {
    let mut lines = text.lines();
    let schema = lines.next().context("empty trace file")?;
    if schema != TRACE_SCHEMA {
        bail!("unsupported trace schema line {schema:?}; this build reads {TRACE_SCHEMA:?}");
    }
    let header = lines.next().context("trace missing header")?;
    let cols: Vec<&str> = header.split(',').collect();
    let col = |name: &str| cols.iter().position(|&c| c == name);
    let need =
        |name: &str| col(name).with_context(|| format!("trace header missing column {name}"));
    let i_iter = need("iteration")?;
    let i_net = need("network")?;
    let i_cols = need("columns")?;
    let i_labels = need("labels")?;
    let i_obj = need("objective")?;
    let i_pp = col("pp_seconds");
    let i_rmp = col("rmp_seconds");

    let mut records = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        let get = |i: usize| -> Result<&str> {
            f.get(i)
                .copied()
                .with_context(|| format!("trace line {}: missing field {}", lineno + 3, i + 1))
        };
        let network = match get(i_net)? {
            "full" => NetTag::Full,
            "reduced" => NetTag::Reduced,
            other => bail!("trace line {}: bad network {other:?}", lineno + 3),
        };
        records.push(IterRecord {
            iteration: get(i_iter)?.parse()?,
            network,
            columns: get(i_cols)?.parse()?,
            labels: get(i_labels)?.parse()?,
            pp_seconds: i_pp
                .map(|i| -> Result<f64> { Ok(get(i)?.parse()?) })
                .transpose()?
                .unwrap_or(0.0),
            rmp_seconds: i_rmp
                .map(|i| -> Result<f64> { Ok(get(i)?.parse()?) })
                .transpose()?
                .unwrap_or(0.0),
            objective: get(i_obj)?.parse()?,
        });
    }
    Ok(records)
}
