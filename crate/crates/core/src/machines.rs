//! Measurement machines: outcome-labeled projector families with a locality
//! descriptor, registration statistics under the Born and branch-counting
//! rules, seeded sampling, and the two-state comparison report.
//!
//! A machine built by [`finegrained_machine`] projects onto the pointer
//! *and* the fine-grained environment basis obtained from one specific
//! input state. The machine keeps that basis change as provenance so it can
//! be reapplied verbatim to other states, which is exactly the comparison
//! [`paradox_report`] tabulates.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::finegrain::{apply_map, finegrain_env, rationalize, FineGrainingMap};
use crate::statespace::{LocalOperator, PureState, SubsystemLayout};

/// Denominator cap used when a machine fine-grains its defining state.
pub const DEFAULT_MAX_DENOMINATOR: u64 = 1_000_000;

/// How registration assigns probabilities to outcomes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RegistrationRule {
    /// probability = ‖P_i ψ‖²
    Born,
    /// probability uniform over outcomes with a surviving component
    BranchCount,
}

impl fmt::Display for RegistrationRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RegistrationRule::Born => write!(f, "born"),
            RegistrationRule::BranchCount => write!(f, "branch-count"),
        }
    }
}

impl FromStr for RegistrationRule {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "born" => Ok(RegistrationRule::Born),
            "branch-count" => Ok(RegistrationRule::BranchCount),
            other => Err(format!("unknown rule `{other}`, expected born|branch-count")),
        }
    }
}

/// Which (subsystem, label) pair(s) an outcome pins down.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OutcomeLabel(Vec<(String, String)>);

impl OutcomeLabel {
    pub fn pairs(&self) -> &[(String, String)] {
        &self.0
    }

    /// The label this outcome assigns to a subsystem, if any.
    pub fn label_for(&self, subsystem: &str) -> Option<&str> {
        self.0
            .iter()
            .find(|(sub, _)| sub == subsystem)
            .map(|(_, label)| label.as_str())
    }
}

impl fmt::Display for OutcomeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (_, label)) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{label}")?;
        }
        Ok(())
    }
}

/// One machine outcome: a label and the projector that registers it.
#[derive(Clone, Debug)]
pub struct MachineOutcome {
    pub label: OutcomeLabel,
    pub projector: LocalOperator,
}

/// An outcome-labeled family of mutually orthogonal projectors together
/// with the subsystems registration acts on.
#[derive(Clone, Debug)]
pub struct MeasurementMachine {
    name: String,
    outcomes: Vec<MachineOutcome>,
    locality: Vec<String>,
    basis_provenance: Option<FineGrainingMap>,
}

impl MeasurementMachine {
    fn new(
        name: String,
        outcomes: Vec<MachineOutcome>,
        locality: Vec<String>,
        basis_provenance: Option<FineGrainingMap>,
        tol: &crate::tolerances::Tolerances,
    ) -> Result<Self> {
        // Pairwise orthogonality: P_i P_j = 0 for i ≠ j.
        for (i, a) in outcomes.iter().enumerate() {
            for b in outcomes.iter().skip(i + 1) {
                if a.projector.targets() == b.projector.targets() {
                    let product = a.projector.matrix() * b.projector.matrix();
                    let dev = product.norm();
                    if dev > tol.operator_algebra {
                        return Err(Error::NotProjector { deviation: dev });
                    }
                }
            }
        }
        // Σ P_i ≤ I over each shared target set.
        if let Some(first) = outcomes.first() {
            let dim = first.projector.matrix().nrows();
            let mut total = DMatrix::<Complex64>::zeros(dim, dim);
            let mut uniform = true;
            for o in &outcomes {
                if o.projector.targets() != first.projector.targets() {
                    uniform = false;
                    break;
                }
                total += o.projector.matrix();
            }
            if uniform {
                let h = (&total + total.adjoint()).scale(0.5);
                let max_eig = crate::statespace::hermitian_eigenvalues(&h)
                    .into_iter()
                    .fold(f64::NEG_INFINITY, f64::max);
                if max_eig > 1.0 + tol.operator_algebra {
                    return Err(Error::NotProjector {
                        deviation: max_eig - 1.0,
                    });
                }
            }
        }
        Ok(MeasurementMachine {
            name,
            outcomes,
            locality,
            basis_provenance,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn outcomes(&self) -> &[MachineOutcome] {
        &self.outcomes
    }

    /// Subsystems the projectors act on nontrivially.
    pub fn locality(&self) -> &[String] {
        &self.locality
    }

    /// The environment basis change this machine was built from, if any.
    pub fn basis_provenance(&self) -> Option<&FineGrainingMap> {
        self.basis_provenance.as_ref()
    }

    /// True when registration touches nothing beyond the pointer.
    pub fn is_local_to(&self, pointer: &str) -> bool {
        self.locality.len() == 1 && self.locality[0] == pointer
    }

    fn find_outcome(&self, outcome: &str) -> Result<&MachineOutcome> {
        self.outcomes
            .iter()
            .find(|o| o.label.to_string() == outcome)
            .ok_or_else(|| Error::UnknownOutcome(outcome.to_owned()))
    }
}

/// One outcome per pointer label, projecting onto |P_k⟩⟨P_k| and leaving
/// every other subsystem untouched.
pub fn local_machine(layout: &SubsystemLayout, pointer: &str) -> Result<MeasurementMachine> {
    let position = layout.position(pointer)?;
    let sub = layout.subsystem(position);
    let tol = crate::tolerances::Tolerances::DEFAULT;
    let mut outcomes = Vec::with_capacity(sub.dim());
    for (k, label) in sub.labels().iter().enumerate() {
        let mut matrix = DMatrix::<Complex64>::zeros(sub.dim(), sub.dim());
        matrix[(k, k)] = Complex64::ONE;
        let projector = LocalOperator::projector(vec![pointer.to_owned()], matrix, &tol)?;
        outcomes.push(MachineOutcome {
            label: OutcomeLabel(vec![(pointer.to_owned(), label.clone())]),
            projector,
        });
    }
    MeasurementMachine::new(
        format!("local({pointer})"),
        outcomes,
        vec![pointer.to_owned()],
        None,
        &tol,
    )
}

/// Build the machine that yields equal-weight registration for `state`:
/// fine-grain the environment at tolerance `tol`, then project onto
/// (pointer label, fine environment label) pairs.
///
/// The result acts on the pointer *and* the environment, so it is not a
/// condition-4 local machine.
pub fn finegrained_machine(
    state: &PureState,
    pointer: &str,
    env: &str,
    tol: f64,
) -> Result<MeasurementMachine> {
    finegrained_machine_with_options(state, pointer, env, tol, true)
}

/// Variant of [`finegrained_machine`] that can drop the pointer projection
/// and project on the fine-grained environment alone.
pub fn finegrained_machine_with_options(
    state: &PureState,
    pointer: &str,
    env: &str,
    tol: f64,
    project_pointer: bool,
) -> Result<MeasurementMachine> {
    let layout = state.layout();
    let pointer_position = layout.position(pointer)?;
    let weights: Vec<f64> = state
        .indexed_components()
        .map(|(_, amp)| amp.norm_sqr())
        .collect();
    let plan = rationalize(&weights, tol, DEFAULT_MAX_DENOMINATOR)?;
    let (fine_state, map) = finegrain_env(state, env, &plan)?;
    let fine_layout = fine_state.layout();
    let fine_position = fine_layout.position(map.fine_env())?;
    let pointer_sub = fine_layout.subsystem(pointer_position);
    let env_sub = fine_layout.subsystem(fine_position);
    let tolerances = *state.tolerances();

    let mut outcomes = Vec::new();
    for (tuple, _) in fine_state.indexed_components() {
        let p = tuple[pointer_position];
        let e = tuple[fine_position];
        let (targets, pairs, matrix) = if project_pointer {
            let dim = pointer_sub.dim() * env_sub.dim();
            let mut m = DMatrix::<Complex64>::zeros(dim, dim);
            let joint = p * env_sub.dim() + e;
            m[(joint, joint)] = Complex64::ONE;
            (
                vec![pointer.to_owned(), map.fine_env().to_owned()],
                vec![
                    (pointer.to_owned(), pointer_sub.label(p).to_owned()),
                    (map.fine_env().to_owned(), env_sub.label(e).to_owned()),
                ],
                m,
            )
        } else {
            let mut m = DMatrix::<Complex64>::zeros(env_sub.dim(), env_sub.dim());
            m[(e, e)] = Complex64::ONE;
            (
                vec![map.fine_env().to_owned()],
                vec![(map.fine_env().to_owned(), env_sub.label(e).to_owned())],
                m,
            )
        };
        let projector = LocalOperator::projector(targets, matrix, &tolerances)?;
        outcomes.push(MachineOutcome {
            label: OutcomeLabel(pairs),
            projector,
        });
    }
    let locality = if project_pointer {
        vec![pointer.to_owned(), map.fine_env().to_owned()]
    } else {
        vec![map.fine_env().to_owned()]
    };
    let name = if project_pointer {
        format!("finegrained({pointer},{})", map.fine_env())
    } else {
        format!("env-only({})", map.fine_env())
    };
    MeasurementMachine::new(name, outcomes, locality, Some(map), &tolerances)
}

/// One probability table entry.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbEntry {
    pub outcome: String,
    pub probability: f64,
}

/// Registration statistics of a machine on a state under one rule.
#[derive(Clone, Debug)]
pub struct OutcomeStatistics {
    pub rule: RegistrationRule,
    pub entries: Vec<ProbEntry>,
    pub aggregation: Option<String>,
}

impl OutcomeStatistics {
    pub fn probability(&self, outcome: &str) -> Option<f64> {
        self.entries
            .iter()
            .find(|e| e.outcome == outcome)
            .map(|e| e.probability)
    }

    pub fn total(&self) -> f64 {
        self.entries.iter().map(|e| e.probability).sum()
    }
}

fn outcome_weights(machine: &MeasurementMachine, state: &PureState) -> Result<Vec<f64>> {
    machine
        .outcomes
        .iter()
        .map(|o| {
            let projected = state
                .apply_matrix(&o.projector)
                .map_err(|_| Error::LayoutMismatch)?;
            Ok(projected.norm_sq())
        })
        .collect()
}

/// Outcome probabilities of `machine` on `state` under `rule`, optionally
/// summed over outcomes sharing one subsystem's label.
pub fn outcome_statistics(
    machine: &MeasurementMachine,
    state: &PureState,
    rule: RegistrationRule,
    aggregate_by: Option<&str>,
) -> Result<OutcomeStatistics> {
    let tol = state.tolerances();
    let weights = outcome_weights(machine, state)?;
    let total: f64 = weights.iter().sum();
    if (1.0 - total) > tol.normalization {
        return Err(Error::IncompleteProjectorFamily {
            residual: 1.0 - total,
        });
    }
    let probabilities: Vec<f64> = match rule {
        RegistrationRule::Born => weights,
        RegistrationRule::BranchCount => {
            let surviving = weights.iter().filter(|&&w| w > tol.branch_threshold).count();
            weights
                .iter()
                .map(|&w| {
                    if w > tol.branch_threshold {
                        1.0 / surviving as f64
                    } else {
                        0.0
                    }
                })
                .collect()
        }
    };

    let entries = match aggregate_by {
        None => machine
            .outcomes
            .iter()
            .zip(&probabilities)
            .map(|(o, &p)| ProbEntry {
                outcome: o.label.to_string(),
                probability: p,
            })
            .collect(),
        Some(subsystem) => {
            let mut merged: Vec<ProbEntry> = Vec::new();
            for (o, &p) in machine.outcomes.iter().zip(&probabilities) {
                let label = o
                    .label
                    .label_for(subsystem)
                    .ok_or_else(|| Error::AggregateByMismatch(subsystem.to_owned()))?;
                match merged.iter_mut().find(|e| e.outcome == label) {
                    Some(entry) => entry.probability += p,
                    None => merged.push(ProbEntry {
                        outcome: label.to_owned(),
                        probability: p,
                    }),
                }
            }
            merged
        }
    };
    Ok(OutcomeStatistics {
        rule,
        entries,
        aggregation: aggregate_by.map(str::to_owned),
    })
}

/// A registered outcome: its pre-normalization weight and the normalized
/// projected state.
#[derive(Clone, Debug)]
pub struct PostMeasurementState {
    pub outcome: String,
    pub weight: f64,
    pub state: PureState,
}

/// Project `state` onto one outcome and renormalize.
pub fn register(
    machine: &MeasurementMachine,
    state: &PureState,
    outcome: &str,
) -> Result<PostMeasurementState> {
    let target = machine.find_outcome(outcome)?;
    let projected = state
        .apply_matrix(&target.projector)
        .map_err(|_| Error::LayoutMismatch)?;
    let weight = projected.norm_sq();
    if weight.sqrt() <= 1e-12 {
        return Err(Error::ZeroWeightOutcome(outcome.to_owned()));
    }
    Ok(PostMeasurementState {
        outcome: outcome.to_owned(),
        weight,
        state: projected.renormalized()?,
    })
}

/// `n` independent draws from the outcome distribution with a seeded,
/// platform-independent generator. Identical seeds give identical counts.
pub fn sample(
    machine: &MeasurementMachine,
    state: &PureState,
    rule: RegistrationRule,
    n: u64,
    seed: u64,
) -> Result<Vec<(String, u64)>> {
    let stats = outcome_statistics(machine, state, rule, None)?;
    let mut counts: Vec<(String, u64)> = stats
        .entries
        .iter()
        .map(|e| (e.outcome.clone(), 0u64))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..n {
        // 53-bit uniform in [0, 1).
        let u = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
        let mut acc = 0.0;
        let mut chosen = counts.len() - 1;
        for (i, entry) in stats.entries.iter().enumerate() {
            acc += entry.probability;
            if u < acc {
                chosen = i;
                break;
            }
        }
        counts[chosen].1 += 1;
    }
    Ok(counts)
}

/// One row of the comparison table: a machine applied to a state under the
/// branch-counting rule, with the Born probabilities as reference.
#[derive(Clone, Debug)]
pub struct ParadoxRow {
    pub machine: String,
    pub state: String,
    pub rule: RegistrationRule,
    pub statistics: Vec<ProbEntry>,
    pub born_reference: Vec<ProbEntry>,
    pub born_consistent: bool,
    pub condition4_local: bool,
    pub notes: Vec<String>,
}

/// Summary of one machine used in the report.
#[derive(Clone, Debug)]
pub struct MachineSummary {
    pub name: String,
    pub outcome_count: usize,
    pub locality: Vec<String>,
    pub plan: Option<(Vec<u64>, u64)>,
}

/// The full two-state comparison showing that the equal-weight machine is
/// different for each initial state.
#[derive(Clone, Debug)]
pub struct ParadoxReport {
    pub pointer: String,
    pub env: String,
    pub machines: Vec<MachineSummary>,
    pub rows: Vec<ParadoxRow>,
}

fn paradox_row(
    machine: &MeasurementMachine,
    machine_name: &str,
    state: &PureState,
    state_name: &str,
    pointer: &str,
) -> Result<ParadoxRow> {
    let tol = state.tolerances();
    let bc = outcome_statistics(machine, state, RegistrationRule::BranchCount, Some(pointer))?;
    let born = outcome_statistics(machine, state, RegistrationRule::Born, Some(pointer))?;
    let born_consistent = bc.entries.iter().zip(&born.entries).all(|(a, b)| {
        a.outcome == b.outcome && (a.probability - b.probability).abs() <= tol.normalization
    });
    let condition4_local = machine.is_local_to(pointer);
    let mut notes = Vec::new();
    if !condition4_local {
        notes.push("registration projects onto the environment as well as the pointer".to_owned());
    }
    let weights = outcome_weights(machine, state)?;
    let surviving: Vec<f64> = weights
        .into_iter()
        .filter(|&w| w > tol.branch_threshold)
        .collect();
    let spread = surviving.iter().fold(f64::NEG_INFINITY, |m, &w| m.max(w))
        - surviving.iter().fold(f64::INFINITY, |m, &w| m.min(w));
    if spread > tol.normalization {
        notes.push("projected weights unequal: envariance assumptions not met".to_owned());
    }
    Ok(ParadoxRow {
        machine: machine_name.to_owned(),
        state: state_name.to_owned(),
        rule: RegistrationRule::BranchCount,
        statistics: bc.entries,
        born_reference: born.entries,
        born_consistent,
        condition4_local,
        notes,
    })
}

/// Tabulate M(ψ₁) on ψ₁, M(ψ₁) on ψ₂ through M(ψ₁)'s own basis change,
/// M(ψ₂) on ψ₂, and the local pointer machine on both states.
///
/// Both states must share one layout (and in particular the same
/// environment labels): the pre-measurement interaction is one linear map,
/// so it entangles a given system-pointer branch with the same environment
/// state regardless of the branch's weight.
pub fn paradox_report(
    psi1: &PureState,
    psi2: &PureState,
    pointer: &str,
    env: &str,
) -> Result<ParadoxReport> {
    if psi1.layout() != psi2.layout() {
        return Err(Error::LayoutMismatch);
    }
    let tol = psi1.tolerances().normalization;
    let m1 = finegrained_machine(psi1, pointer, env, tol)?;
    let m2 = finegrained_machine(psi2, pointer, env, tol)?;
    let map1 = m1.basis_provenance().expect("finegrained machine has a map");
    let map2 = m2.basis_provenance().expect("finegrained machine has a map");
    let psi1_fine = apply_map(psi1, map1)?;
    let psi2_in_m1_basis = apply_map(psi2, map1)?;
    let psi2_fine = apply_map(psi2, map2)?;
    let local = local_machine(psi1.layout(), pointer)?;

    let machines = vec![
        MachineSummary {
            name: "M(psi1)".to_owned(),
            outcome_count: m1.outcomes().len(),
            locality: m1.locality().to_vec(),
            plan: Some((
                map1.blocks().iter().map(|&(_, n)| n as u64).collect(),
                map1.fine_labels().len() as u64,
            )),
        },
        MachineSummary {
            name: "M(psi2)".to_owned(),
            outcome_count: m2.outcomes().len(),
            locality: m2.locality().to_vec(),
            plan: Some((
                map2.blocks().iter().map(|&(_, n)| n as u64).collect(),
                map2.fine_labels().len() as u64,
            )),
        },
        MachineSummary {
            name: "local".to_owned(),
            outcome_count: local.outcomes().len(),
            locality: local.locality().to_vec(),
            plan: None,
        },
    ];

    let rows = vec![
        paradox_row(&m1, "M(psi1)", &psi1_fine, "psi1", pointer)?,
        paradox_row(&m1, "M(psi1)", &psi2_in_m1_basis, "psi2", pointer)?,
        paradox_row(&m2, "M(psi2)", &psi2_fine, "psi2", pointer)?,
        paradox_row(&local, "local", psi1, "psi1", pointer)?,
        paradox_row(&local, "local", psi2, "psi2", pointer)?,
    ];
    Ok(ParadoxReport {
        pointer: pointer.to_owned(),
        env: env.to_owned(),
        machines,
        rows,
    })
}
