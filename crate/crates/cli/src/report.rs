//! Report assembly and deterministic emission in json, csv, and aligned
//! table form. Probabilities are printed with 12 significant digits; json
//! key order and row order are fixed, so repeated runs emit identical bytes.

use envariance_core::envariance::EnvarianceVerdict;
use envariance_core::finegrain::{FineGrainingMap, RationalWeightPlan};
use envariance_core::machines::{
    MeasurementMachine, OutcomeStatistics, ParadoxReport, ProbEntry,
};
use envariance_core::statespace::LocalOperator;
use serde::Serialize;

use crate::document::StateDocument;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Table,
}

impl std::fmt::Display for Format {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Format::Json => write!(f, "json"),
            Format::Csv => write!(f, "csv"),
            Format::Table => write!(f, "table"),
        }
    }
}

/// Quote a CSV field when it contains a comma or a quote.
fn csv_field(text: &str) -> String {
    if text.contains(',') || text.contains('"') {
        format!("\"{}\"", text.replace('"', "\"\""))
    } else {
        text.to_owned()
    }
}

/// Value with 12 significant digits, fixed-point.
pub fn sig12(x: f64) -> String {
    if x == 0.0 {
        return "0".to_owned();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let exponent = x.abs().log10().floor() as i32;
    let decimals = (11 - exponent).clamp(0, 17) as usize;
    format!("{x:.decimals$}")
}

#[derive(Serialize)]
pub struct Config {
    pub tolerance: f64,
    pub seed: u64,
    pub format: String,
}

#[derive(Serialize)]
pub struct Report {
    pub command: String,
    pub config: Config,
    pub result: Payload,
    pub warnings: Vec<String>,
}

#[derive(Serialize)]
#[serde(untagged)]
pub enum Payload {
    Envariance(EnvarianceResult),
    Finegrain(FinegrainResult),
    Statistics(StatisticsResult),
    Sample(SampleResult),
    Demo(DemoResult),
}

#[derive(Serialize)]
pub struct OperatorDoc {
    pub targets: Vec<String>,
    pub kind: String,
    /// Row-major matrix with entries as (re, im) pairs.
    pub matrix: Vec<Vec<[f64; 2]>>,
}

impl OperatorDoc {
    pub fn from_operator(op: &LocalOperator) -> Self {
        let m = op.matrix();
        let matrix = (0..m.nrows())
            .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
            .collect();
        OperatorDoc {
            targets: op.targets().to_vec(),
            kind: op.kind().to_string(),
            matrix,
        }
    }
}

#[derive(Serialize)]
pub struct EnvarianceResult {
    pub op: String,
    pub env: Vec<String>,
    pub envariant: bool,
    pub residual: Option<f64>,
    pub counter_op: Option<OperatorDoc>,
}

impl EnvarianceResult {
    pub fn new(op: String, env: Vec<String>, verdict: &EnvarianceVerdict) -> Self {
        EnvarianceResult {
            op,
            env,
            envariant: verdict.envariant,
            residual: verdict.residual,
            counter_op: verdict.counter_op.as_ref().map(OperatorDoc::from_operator),
        }
    }
}

#[derive(Serialize)]
pub struct PlanDoc {
    pub weights: Vec<f64>,
    pub numerators: Vec<u64>,
    pub denominator: u64,
    pub achieved_error: f64,
}

impl PlanDoc {
    pub fn from_plan(plan: &RationalWeightPlan) -> Self {
        PlanDoc {
            weights: plan.weights().to_vec(),
            numerators: plan.numerators().to_vec(),
            denominator: plan.denominator(),
            achieved_error: plan.achieved_error(),
        }
    }
}

#[derive(Serialize)]
pub struct MapDoc {
    pub source_env: String,
    pub fine_env: String,
    pub source_labels: Vec<String>,
    pub blocks: Vec<[usize; 2]>,
}

impl MapDoc {
    pub fn from_map(map: &FineGrainingMap) -> Self {
        MapDoc {
            source_env: map.source_env().to_owned(),
            fine_env: map.fine_env().to_owned(),
            source_labels: map.source_labels().to_vec(),
            blocks: map.blocks().iter().map(|&(s, n)| [s, n]).collect(),
        }
    }
}

#[derive(Serialize)]
pub struct FinegrainResult {
    pub plan: PlanDoc,
    pub map: MapDoc,
    pub state: StateDocument,
}

#[derive(Serialize)]
pub struct ProbRow {
    pub outcome: String,
    pub probability: f64,
}

fn prob_rows(entries: &[ProbEntry]) -> Vec<ProbRow> {
    entries
        .iter()
        .map(|e| ProbRow {
            outcome: e.outcome.clone(),
            probability: e.probability,
        })
        .collect()
}

#[derive(Serialize)]
pub struct StatisticsResult {
    pub machine: String,
    pub locality: Vec<String>,
    pub rule: String,
    pub aggregate_by: Option<String>,
    pub statistics: Vec<ProbRow>,
}

impl StatisticsResult {
    pub fn new(machine: &MeasurementMachine, stats: &OutcomeStatistics) -> Self {
        StatisticsResult {
            machine: machine.name().to_owned(),
            locality: machine.locality().to_vec(),
            rule: stats.rule.to_string(),
            aggregate_by: stats.aggregation.clone(),
            statistics: prob_rows(&stats.entries),
        }
    }
}

#[derive(Serialize)]
pub struct CountRow {
    pub outcome: String,
    pub count: u64,
}

#[derive(Serialize)]
pub struct SampleResult {
    pub machine: String,
    pub rule: String,
    pub n: u64,
    pub seed: u64,
    pub counts: Vec<CountRow>,
}

#[derive(Serialize)]
pub struct MachineDoc {
    pub name: String,
    pub outcomes: usize,
    pub locality: Vec<String>,
    pub numerators: Option<Vec<u64>>,
    pub denominator: Option<u64>,
}

#[derive(Serialize)]
pub struct DemoRow {
    pub machine: String,
    pub state: String,
    pub rule: String,
    pub statistics: Vec<ProbRow>,
    pub born_reference: Vec<ProbRow>,
    pub born_consistent: bool,
    pub condition4_local: bool,
    pub notes: Vec<String>,
}

#[derive(Serialize)]
pub struct DemoResult {
    pub pointer: String,
    pub env: String,
    pub machines: Vec<MachineDoc>,
    pub rows: Vec<DemoRow>,
}

impl DemoResult {
    pub fn from_report(report: &ParadoxReport) -> Self {
        DemoResult {
            pointer: report.pointer.clone(),
            env: report.env.clone(),
            machines: report
                .machines
                .iter()
                .map(|m| MachineDoc {
                    name: m.name.clone(),
                    outcomes: m.outcome_count,
                    locality: m.locality.clone(),
                    numerators: m.plan.as_ref().map(|(n, _)| n.clone()),
                    denominator: m.plan.as_ref().map(|&(_, d)| d),
                })
                .collect(),
            rows: report
                .rows
                .iter()
                .map(|r| DemoRow {
                    machine: r.machine.clone(),
                    state: r.state.clone(),
                    rule: r.rule.to_string(),
                    statistics: prob_rows(&r.statistics),
                    born_reference: prob_rows(&r.born_reference),
                    born_consistent: r.born_consistent,
                    condition4_local: r.condition4_local,
                    notes: r.notes.clone(),
                })
                .collect(),
        }
    }
}

pub fn emit(report: &Report, format: Format) -> String {
    match format {
        Format::Json => {
            let mut text =
                serde_json::to_string_pretty(report).expect("report serializes to json");
            text.push('\n');
            text
        }
        Format::Csv => emit_csv(report),
        Format::Table => emit_table(report),
    }
}

fn emit_csv(report: &Report) -> String {
    let mut out = String::new();
    match &report.result {
        Payload::Statistics(r) => {
            out.push_str("outcome,probability\n");
            for row in &r.statistics {
                out.push_str(&format!(
                    "{},{}\n",
                    csv_field(&row.outcome),
                    sig12(row.probability)
                ));
            }
        }
        Payload::Sample(r) => {
            out.push_str("outcome,count\n");
            for row in &r.counts {
                out.push_str(&format!("{},{}\n", csv_field(&row.outcome), row.count));
            }
        }
        Payload::Envariance(r) => {
            out.push_str("field,value\n");
            out.push_str(&format!("op,{}\n", r.op));
            out.push_str(&format!("env,{}\n", r.env.join("|")));
            out.push_str(&format!("envariant,{}\n", r.envariant));
            if let Some(residual) = r.residual {
                out.push_str(&format!("residual,{}\n", sig12(residual)));
            }
            if let Some(counter) = &r.counter_op {
                out.push_str(&format!("counter_targets,{}\n", counter.targets.join("|")));
                out.push('\n');
                out.push_str("row,col,re,im\n");
                for (i, row) in counter.matrix.iter().enumerate() {
                    for (j, entry) in row.iter().enumerate() {
                        out.push_str(&format!(
                            "{i},{j},{},{}\n",
                            sig12(entry[0]),
                            sig12(entry[1])
                        ));
                    }
                }
            }
        }
        Payload::Finegrain(r) => {
            out.push_str("field,value\n");
            out.push_str(&format!(
                "numerators,{}\n",
                r.plan
                    .numerators
                    .iter()
                    .map(u64::to_string)
                    .collect::<Vec<_>>()
                    .join("|")
            ));
            out.push_str(&format!("denominator,{}\n", r.plan.denominator));
            out.push_str(&format!(
                "achieved_error,{}\n",
                sig12(r.plan.achieved_error)
            ));
            out.push_str(&format!("source_env,{}\n", r.map.source_env));
            out.push_str(&format!("fine_env,{}\n", r.map.fine_env));
            out.push('\n');
            out.push_str("component,re,im\n");
            for c in &r.state.components {
                out.push_str(&format!(
                    "{},{},{}\n",
                    c.labels.join("|"),
                    sig12(c.re),
                    sig12(c.im)
                ));
            }
        }
        Payload::Demo(r) => {
            out.push_str(
                "machine,state,rule,outcome,probability,born_probability,born_consistent,condition4_local\n",
            );
            for row in &r.rows {
                for (stat, born) in row.statistics.iter().zip(&row.born_reference) {
                    out.push_str(&format!(
                        "{},{},{},{},{},{},{},{}\n",
                        csv_field(&row.machine),
                        csv_field(&row.state),
                        row.rule,
                        csv_field(&stat.outcome),
                        sig12(stat.probability),
                        sig12(born.probability),
                        row.born_consistent,
                        row.condition4_local
                    ));
                }
            }
        }
    }
    out
}

fn pad(text: &str, width: usize) -> String {
    format!("{text:<width$}")
}

fn render_rows(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in rows {
        for (i, cell) in row.iter().enumerate() {
            widths[i] = widths[i].max(cell.len());
        }
    }
    let mut out = String::new();
    let line: Vec<String> = header
        .iter()
        .enumerate()
        .map(|(i, h)| pad(h, widths[i]))
        .collect();
    out.push_str(line.join("  ").trim_end());
    out.push('\n');
    for row in rows {
        let line: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(i, cell)| pad(cell, widths[i]))
            .collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
    }
    out
}

fn emit_table(report: &Report) -> String {
    let mut out = String::new();
    out.push_str(&format!("# {}\n", report.command));
    out.push_str(&format!(
        "# tolerance {} seed {}\n",
        report.config.tolerance, report.config.seed
    ));
    match &report.result {
        Payload::Statistics(r) => {
            out.push_str(&format!(
                "machine {}  locality {}  rule {}\n",
                r.machine,
                r.locality.join(","),
                r.rule
            ));
            if let Some(aggregate) = &r.aggregate_by {
                out.push_str(&format!("aggregated by {aggregate}\n"));
            }
            let rows: Vec<Vec<String>> = r
                .statistics
                .iter()
                .map(|e| vec![e.outcome.clone(), sig12(e.probability)])
                .collect();
            out.push_str(&render_rows(&["outcome", "probability"], &rows));
        }
        Payload::Sample(r) => {
            out.push_str(&format!(
                "machine {}  rule {}  n {}  seed {}\n",
                r.machine, r.rule, r.n, r.seed
            ));
            let rows: Vec<Vec<String>> = r
                .counts
                .iter()
                .map(|e| vec![e.outcome.clone(), e.count.to_string()])
                .collect();
            out.push_str(&render_rows(&["outcome", "count"], &rows));
        }
        Payload::Envariance(r) => {
            out.push_str(&format!("op        {}\n", r.op));
            out.push_str(&format!("env       {}\n", r.env.join(",")));
            out.push_str(&format!("envariant {}\n", r.envariant));
            if let Some(residual) = r.residual {
                out.push_str(&format!("residual  {}\n", sig12(residual)));
            }
            if let Some(counter) = &r.counter_op {
                out.push_str(&format!(
                    "counter operation on {} ({}):\n",
                    counter.targets.join(","),
                    counter.kind
                ));
                for row in &counter.matrix {
                    let cells: Vec<String> = row
                        .iter()
                        .map(|e| format!("({}, {})", sig12(e[0]), sig12(e[1])))
                        .collect();
                    out.push_str(&format!("  [{}]\n", cells.join(" ")));
                }
            }
        }
        Payload::Finegrain(r) => {
            out.push_str(&format!(
                "plan n = ({}) / N = {}  achieved error {}\n",
                r.plan
                    .numerators
                    .iter()
                    .map(u64::to_string)
                    .collect::<Vec<_>>()
                    .join(","),
                r.plan.denominator,
                sig12(r.plan.achieved_error)
            ));
            out.push_str(&format!(
                "environment {} → {} with {} labels\n",
                r.map.source_env,
                r.map.fine_env,
                r.plan.denominator
            ));
            let rows: Vec<Vec<String>> = r
                .state
                .components
                .iter()
                .map(|c| vec![c.labels.join(","), sig12(c.re), sig12(c.im)])
                .collect();
            out.push_str(&render_rows(&["component", "re", "im"], &rows));
        }
        Payload::Demo(r) => {
            out.push_str(&format!("pointer {}  environment {}\n", r.pointer, r.env));
            for m in &r.machines {
                let plan = match (&m.numerators, m.denominator) {
                    (Some(n), Some(d)) => format!(
                        "  plan ({})/{}",
                        n.iter().map(u64::to_string).collect::<Vec<_>>().join(","),
                        d
                    ),
                    _ => String::new(),
                };
                out.push_str(&format!(
                    "machine {}: {} outcomes, locality {}{}\n",
                    m.name,
                    m.outcomes,
                    m.locality.join(","),
                    plan
                ));
            }
            let mut rows: Vec<Vec<String>> = Vec::new();
            for row in &r.rows {
                for (stat, born) in row.statistics.iter().zip(&row.born_reference) {
                    rows.push(vec![
                        row.machine.clone(),
                        row.state.clone(),
                        row.rule.to_string(),
                        stat.outcome.clone(),
                        sig12(stat.probability),
                        sig12(born.probability),
                        if row.born_consistent { "yes" } else { "no" }.to_owned(),
                        if row.condition4_local { "yes" } else { "no" }.to_owned(),
                    ]);
                }
            }
            out.push_str(&render_rows(
                &[
                    "machine",
                    "state",
                    "rule",
                    "outcome",
                    "probability",
                    "born",
                    "born-consistent",
                    "condition-4-local",
                ],
                &rows,
            ));
            for row in &r.rows {
                for note in &row.notes {
                    out.push_str(&format!("note [{} / {}]: {}\n", row.machine, row.state, note));
                }
            }
        }
    }
    if !report.warnings.is_empty() {
        for warning in &report.warnings {
            out.push_str(&format!("warning: {warning}\n"));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sig12_examples() {
        assert_eq!(sig12(0.75), "0.750000000000");
        assert_eq!(sig12(1.0), "1.00000000000");
        assert_eq!(sig12(0.0), "0");
        assert_eq!(sig12(2.0 / 3.0), "0.666666666667");
    }

    #[test]
    fn emit_is_deterministic() {
        let report = Report {
            command: "measure --state x.json".to_owned(),
            config: Config {
                tolerance: 1e-9,
                seed: 0,
                format: "json".to_owned(),
            },
            result: Payload::Statistics(StatisticsResult {
                machine: "local(P)".to_owned(),
                locality: vec!["P".to_owned()],
                rule: "born".to_owned(),
                aggregate_by: None,
                statistics: vec![
                    ProbRow {
                        outcome: "P0".to_owned(),
                        probability: 0.75,
                    },
                    ProbRow {
                        outcome: "P1".to_owned(),
                        probability: 0.25,
                    },
                ],
            }),
            warnings: vec![],
        };
        for format in [Format::Json, Format::Csv, Format::Table] {
            assert_eq!(emit(&report, format), emit(&report, format));
        }
        let csv = emit(&report, Format::Csv);
        assert!(csv.starts_with("outcome,probability\n"));
        assert!(csv.contains("P0,0.750000000000\n"));
    }
}
