//! `envariance` — envariance checks, fine-graining, measurement statistics,
//! and the two-state demo report over JSON state documents.
//!
//! Exit codes: 0 success, 1 validation or usage error, 2 numerical failure
//! (a tolerance could not be met).

mod document;
mod report;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;

use envariance_core::envariance::{is_envariant, phase_op, swap_op};
use envariance_core::finegrain::{apply_map, finegrain_env, rationalize};
use envariance_core::machines::{
    finegrained_machine, local_machine, outcome_statistics, paradox_report, sample,
    MeasurementMachine, RegistrationRule,
};
use envariance_core::statespace::{LocalOperator, PureState, SubsystemLayout};
use envariance_core::Tolerances;

use document::StateDocument;
use report::{
    emit, Config, CountRow, DemoResult, EnvarianceResult, FinegrainResult, Format, MapDoc,
    Payload, PlanDoc, Report, SampleResult, StatisticsResult,
};

#[derive(Parser)]
#[command(
    name = "envariance",
    version,
    about = "Envariance verdicts, environment fine-graining, and measurement-machine statistics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Output format
    #[arg(long, value_enum, default_value_t = Format::Table)]
    format: Format,
    /// Normalization and comparison tolerance
    #[arg(long, default_value_t = 1e-9)]
    tolerance: f64,
    /// Sampling seed (used by `sample`, echoed everywhere)
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct MeasureSpec {
    /// State document to load
    #[arg(long)]
    state: PathBuf,
    /// Machine spec: local:PSUB | finegrained:PSUB,ESUB
    #[arg(long)]
    machine: String,
    /// Registration rule: born | branch-count
    #[arg(long)]
    rule: String,
    /// Sum probabilities over outcomes sharing this subsystem's label
    #[arg(long)]
    aggregate_by: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Decide envariance of an operation and construct the counter-operation
    Envcheck {
        /// State document to load
        #[arg(long)]
        state: PathBuf,
        /// Operation spec: phase:SUB:LABEL:RADIANS | swap:SUB:L1:L2
        #[arg(long)]
        op: String,
        /// Environment subsystems, comma separated
        #[arg(long)]
        env: String,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Rewrite a state over an equal-weight fine-grained environment basis
    Finegrain {
        /// State document to load
        #[arg(long)]
        state: PathBuf,
        /// Environment subsystem to fine-grain
        #[arg(long)]
        env: String,
        /// Weight approximation tolerance for the rational plan
        #[arg(long)]
        tol: f64,
        /// Largest denominator the plan search may use
        #[arg(long, default_value_t = 1_000_000)]
        max_denominator: u64,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Outcome statistics of a machine on a state
    Measure {
        #[command(flatten)]
        spec: MeasureSpec,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Seeded draws from a machine's outcome distribution
    Sample {
        #[command(flatten)]
        spec: MeasureSpec,
        /// Number of draws
        #[arg(long)]
        n: u64,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// The built-in two-state comparison table
    DemoPaper {
        #[command(flatten)]
        common: CommonArgs,
    },
}

struct CliError {
    message: String,
    code: u8,
}

impl CliError {
    fn validation(message: impl Into<String>) -> Self {
        CliError {
            message: message.into(),
            code: 1,
        }
    }

    fn compute(err: envariance_core::Error) -> Self {
        CliError {
            code: if err.is_numerical() { 2 } else { 1 },
            message: err.to_string(),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // clap renders its own usage text; keep its exit semantics for
            // --help/--version and fold real usage errors into exit 1.
            use clap::error::ErrorKind;
            if matches!(err.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = err.print();
                return ExitCode::SUCCESS;
            }
            let _ = err.print();
            return ExitCode::from(1);
        }
    };
    let argv: Vec<String> = std::env::args().skip(1).collect();
    let command_echo = argv.join(" ");
    match run(cli.command, command_echo) {
        Ok(rendered) => {
            print!("{rendered}");
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("error: {}", err.message);
            ExitCode::from(err.code)
        }
    }
}

fn load_state(path: &Path, tol: &Tolerances) -> Result<PureState, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::validation(format!("cannot read {}: {e}", path.display())))?;
    let doc: StateDocument = serde_json::from_str(&text)
        .map_err(|e| CliError::validation(format!("parse error in {}: {e}", path.display())))?;
    // Ingestion problems, including a norm check failure, are input
    // validation and exit with code 1.
    doc.to_state(tol)
        .map_err(|e| CliError::validation(format!("invalid state in {}: {e}", path.display())))
}

/// phase:SUB:LABEL:RADIANS | swap:SUB:L1:L2
fn parse_op(layout: &SubsystemLayout, spec: &str) -> Result<LocalOperator, CliError> {
    let parts: Vec<&str> = spec.split(':').collect();
    match parts.as_slice() {
        ["phase", sub, label, radians] => {
            let phi: f64 = radians
                .parse()
                .map_err(|_| CliError::validation(format!("bad radians `{radians}`")))?;
            phase_op(layout, sub, label, phi).map_err(CliError::compute)
        }
        ["swap", sub, l1, l2] => swap_op(layout, sub, l1, l2).map_err(CliError::compute),
        _ => Err(CliError::validation(format!(
            "bad --op `{spec}`, expected phase:SUB:LABEL:RADIANS or swap:SUB:L1:L2"
        ))),
    }
}

/// local:PSUB | finegrained:PSUB,ESUB. The fine-grained machine is built
/// from the given state and the returned state is that state pushed through
/// the machine's basis change.
fn build_machine(
    state: &PureState,
    spec: &str,
    tolerance: f64,
) -> Result<(MeasurementMachine, PureState), CliError> {
    match spec.split_once(':') {
        Some(("local", pointer)) => {
            let machine = local_machine(state.layout(), pointer).map_err(CliError::compute)?;
            Ok((machine, state.clone()))
        }
        Some(("finegrained", rest)) => {
            let (pointer, env) = rest.split_once(',').ok_or_else(|| {
                CliError::validation(format!(
                    "bad --machine `{spec}`, expected finegrained:PSUB,ESUB"
                ))
            })?;
            let machine =
                finegrained_machine(state, pointer, env, tolerance).map_err(CliError::compute)?;
            let map = machine
                .basis_provenance()
                .expect("finegrained machine carries its map");
            let fine = apply_map(state, map).map_err(CliError::compute)?;
            Ok((machine, fine))
        }
        _ => Err(CliError::validation(format!(
            "bad --machine `{spec}`, expected local:PSUB or finegrained:PSUB,ESUB"
        ))),
    }
}

fn parse_rule(rule: &str) -> Result<RegistrationRule, CliError> {
    rule.parse().map_err(CliError::validation)
}

fn machine_warnings(machine: &MeasurementMachine) -> Vec<String> {
    let mut warnings = Vec::new();
    if machine.locality().len() > 1 {
        warnings.push(format!(
            "machine `{}` projects onto {} and is not a condition-4 local machine",
            machine.name(),
            machine.locality().join(",")
        ));
    }
    warnings
}

fn run(command: Command, command_echo: String) -> Result<String, CliError> {
    match command {
        Command::Envcheck {
            state,
            op,
            env,
            common,
        } => {
            let tol = Tolerances::with_normalization(common.tolerance);
            let psi = load_state(&state, &tol)?;
            let operator = parse_op(psi.layout(), &op)?;
            let env_ids: Vec<String> = env.split(',').map(str::to_owned).collect();
            let verdict = is_envariant(&psi, &operator, &env_ids).map_err(CliError::compute)?;
            let report = Report {
                command: command_echo,
                config: config(&common),
                result: Payload::Envariance(EnvarianceResult::new(op, env_ids, &verdict)),
                warnings: vec![],
            };
            Ok(emit(&report, common.format))
        }
        Command::Finegrain {
            state,
            env,
            tol,
            max_denominator,
            common,
        } => {
            let tolerances = Tolerances::with_normalization(common.tolerance);
            let psi = load_state(&state, &tolerances)?;
            let weights: Vec<f64> = psi
                .indexed_components()
                .map(|(_, amp)| amp.norm_sqr())
                .collect();
            let plan = rationalize(&weights, tol, max_denominator).map_err(CliError::compute)?;
            let (fine, map) = finegrain_env(&psi, &env, &plan).map_err(CliError::compute)?;
            let mut warnings = Vec::new();
            if plan.achieved_error() > 0.0 {
                warnings.push(format!(
                    "weights are approximated with error {:e}; equal-weight amplitudes carry the same error",
                    plan.achieved_error()
                ));
            }
            let report = Report {
                command: command_echo,
                config: config(&common),
                result: Payload::Finegrain(FinegrainResult {
                    plan: PlanDoc::from_plan(&plan),
                    map: MapDoc::from_map(&map),
                    state: StateDocument::from_state(&fine),
                }),
                warnings,
            };
            Ok(emit(&report, common.format))
        }
        Command::Measure { spec, common } => {
            let tol = Tolerances::with_normalization(common.tolerance);
            let psi = load_state(&spec.state, &tol)?;
            let rule = parse_rule(&spec.rule)?;
            let (machine, target) = build_machine(&psi, &spec.machine, common.tolerance)?;
            let stats = outcome_statistics(&machine, &target, rule, spec.aggregate_by.as_deref())
                .map_err(CliError::compute)?;
            let report = Report {
                command: command_echo,
                config: config(&common),
                result: Payload::Statistics(StatisticsResult::new(&machine, &stats)),
                warnings: machine_warnings(&machine),
            };
            Ok(emit(&report, common.format))
        }
        Command::Sample { spec, n, common } => {
            if n == 0 {
                return Err(CliError::validation("--n must be at least 1"));
            }
            let tol = Tolerances::with_normalization(common.tolerance);
            let psi = load_state(&spec.state, &tol)?;
            let rule = parse_rule(&spec.rule)?;
            let (machine, target) = build_machine(&psi, &spec.machine, common.tolerance)?;
            let raw = sample(&machine, &target, rule, n, common.seed).map_err(CliError::compute)?;
            let counts = match spec.aggregate_by.as_deref() {
                None => raw
                    .into_iter()
                    .map(|(outcome, count)| CountRow { outcome, count })
                    .collect(),
                Some(subsystem) => {
                    let mut merged: Vec<CountRow> = Vec::new();
                    for (outcome_label, count) in machine
                        .outcomes()
                        .iter()
                        .map(|o| &o.label)
                        .zip(raw.iter().map(|&(_, c)| c))
                    {
                        let label = outcome_label.label_for(subsystem).ok_or_else(|| {
                            CliError::compute(envariance_core::Error::AggregateByMismatch(
                                subsystem.to_owned(),
                            ))
                        })?;
                        match merged.iter_mut().find(|row| row.outcome == label) {
                            Some(row) => row.count += count,
                            None => merged.push(CountRow {
                                outcome: label.to_owned(),
                                count,
                            }),
                        }
                    }
                    merged
                }
            };
            let report = Report {
                command: command_echo,
                config: config(&common),
                result: Payload::Sample(SampleResult {
                    machine: machine.name().to_owned(),
                    rule: rule.to_string(),
                    n,
                    seed: common.seed,
                    counts,
                }),
                warnings: machine_warnings(&machine),
            };
            Ok(emit(&report, common.format))
        }
        Command::DemoPaper { common } => {
            let tol = Tolerances::with_normalization(common.tolerance);
            let (psi1, psi2) = demo_states(&tol)?;
            let table = paradox_report(&psi1, &psi2, "P", "E").map_err(CliError::compute)?;
            let warnings = table
                .rows
                .iter()
                .filter(|row| !row.condition4_local)
                .map(|row| {
                    format!(
                        "row {} / {} uses a machine that is not condition-4 local",
                        row.machine, row.state
                    )
                })
                .collect();
            let report = Report {
                command: command_echo,
                config: config(&common),
                result: Payload::Demo(DemoResult::from_report(&table)),
                warnings,
            };
            Ok(emit(&report, common.format))
        }
    }
}

fn config(common: &CommonArgs) -> Config {
    Config {
        tolerance: common.tolerance,
        seed: common.seed,
        format: common.format.to_string(),
    }
}

/// The two pre-measurement states the demo compares: √3/2,1/2 and
/// √(2/3),√(1/3) over the same layout and environment labels.
fn demo_states(tol: &Tolerances) -> Result<(PureState, PureState), CliError> {
    let layout = || {
        SubsystemLayout::new([
            ("S", vec!["S0", "S1"]),
            ("P", vec!["P0", "P1"]),
            ("E", vec!["E0", "E1"]),
        ])
    };
    let psi1 = PureState::build(
        layout().map_err(CliError::compute)?,
        [
            (
                vec!["S0", "P0", "E0"],
                Complex64::new(3f64.sqrt() / 2.0, 0.0),
            ),
            (vec!["S1", "P1", "E1"], Complex64::new(0.5, 0.0)),
        ],
        tol,
    )
    .map_err(CliError::compute)?;
    let psi2 = PureState::build(
        layout().map_err(CliError::compute)?,
        [
            (
                vec!["S0", "P0", "E0"],
                Complex64::new((2f64 / 3.0).sqrt(), 0.0),
            ),
            (
                vec!["S1", "P1", "E1"],
                Complex64::new((1f64 / 3.0).sqrt(), 0.0),
            ),
        ],
        tol,
    )
    .map_err(CliError::compute)?;
    Ok((psi1, psi2))
}
