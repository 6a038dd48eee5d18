//! Rewriting unequal-weight superpositions as equal-weight ones over an
//! enlarged environment basis, plus the correlated second environment.
//!
//! A [`RationalWeightPlan`] approximates the branch weights by fractions
//! n_k/N over one shared denominator. A [`FineGrainingMap`] realizes the
//! plan as an isometric basis change on the environment factor alone: each
//! original environment label is spread over a block of n_k fresh labels,
//! so every surviving component carries amplitude 1/√N (up to the plan's
//! approximation error). The map is a fixed linear object and can be applied
//! to any state over the same environment labels.

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::statespace::{PureState, SubsystemLayout};

/// Shared-denominator rational approximation of a weight vector.
#[derive(Clone, Debug)]
pub struct RationalWeightPlan {
    weights: Vec<f64>,
    numerators: Vec<u64>,
    denominator: u64,
    achieved_error: f64,
}

impl RationalWeightPlan {
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn numerators(&self) -> &[u64] {
        &self.numerators
    }

    pub fn denominator(&self) -> u64 {
        self.denominator
    }

    /// max_k |n_k/N − w_k|
    pub fn achieved_error(&self) -> f64 {
        self.achieved_error
    }
}

/// Find the smallest denominator N ≤ `max_denominator` such that the
/// largest-remainder rounding n_k = round(w_k·N) (repaired to Σn_k = N,
/// ties to the lower branch index) meets `tol`.
///
/// The scan is exhaustive over N because all branches must share a single
/// denominator; per-branch continued fractions would not compose.
pub fn rationalize(weights: &[f64], tol: f64, max_denominator: u64) -> Result<RationalWeightPlan> {
    if weights.is_empty() {
        return Err(Error::InvalidWeights("weight vector is empty".into()));
    }
    if weights.iter().any(|&w| w.is_nan() || w <= 0.0) {
        return Err(Error::InvalidWeights("weights must be positive".into()));
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidWeights(format!(
            "weights sum to {sum}, expected 1"
        )));
    }
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::InvalidWeights("tolerance must be positive".into()));
    }

    for denominator in weights.len() as u64..=max_denominator {
        if let Some(plan) = allocate(weights, denominator) {
            if plan.achieved_error <= tol {
                return Ok(plan);
            }
        }
    }
    Err(Error::NoPlanWithinBound {
        max_denominator,
        tolerance: tol,
    })
}

/// Largest-remainder allocation of `denominator` units to the weights.
/// Returns `None` when some branch would receive zero units.
fn allocate(weights: &[f64], denominator: u64) -> Option<RationalWeightPlan> {
    let scaled: Vec<f64> = weights.iter().map(|w| w * denominator as f64).collect();
    let mut numerators: Vec<u64> = scaled.iter().map(|&x| x.floor() as u64).collect();
    let assigned: u64 = numerators.iter().sum();
    let missing = denominator.checked_sub(assigned)?;
    if missing > 0 {
        let mut order: Vec<usize> = (0..weights.len()).collect();
        order.sort_by(|&a, &b| {
            let ra = scaled[a] - scaled[a].floor();
            let rb = scaled[b] - scaled[b].floor();
            rb.partial_cmp(&ra).unwrap().then(a.cmp(&b))
        });
        for &k in order.iter().cycle().take(missing as usize) {
            numerators[k] += 1;
        }
    }
    if numerators.contains(&0) {
        return None;
    }
    let achieved_error = numerators
        .iter()
        .zip(weights)
        .map(|(&n, &w)| (n as f64 / denominator as f64 - w).abs())
        .fold(0.0f64, f64::max);
    Some(RationalWeightPlan {
        weights: weights.to_vec(),
        numerators,
        denominator,
        achieved_error,
    })
}

/// The environment basis change realizing a plan: each source environment
/// label maps to an equal-amplitude superposition over its block of
/// fine-grained labels, with the branch phase absorbed into the new basis
/// vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct FineGrainingMap {
    source_env: String,
    fine_env: String,
    fine_labels: Vec<String>,
    source_labels: Vec<String>,
    blocks: Vec<(usize, usize)>,
    isometry: DMatrix<Complex64>,
}

impl FineGrainingMap {
    pub fn source_env(&self) -> &str {
        &self.source_env
    }

    pub fn fine_env(&self) -> &str {
        &self.fine_env
    }

    pub fn fine_labels(&self) -> &[String] {
        &self.fine_labels
    }

    /// Source environment labels the map is defined on, branch order.
    pub fn source_labels(&self) -> &[String] {
        &self.source_labels
    }

    /// Per-branch (start, length) blocks into the fine label list.
    pub fn blocks(&self) -> &[(usize, usize)] {
        &self.blocks
    }

    /// The isometry V (fine dim × source branch count) with V†V = I.
    pub fn isometry(&self) -> &DMatrix<Complex64> {
        &self.isometry
    }

    /// V†V deviation from the identity; zero for a valid map.
    pub fn isometry_deviation(&self) -> f64 {
        let gram = self.isometry.adjoint() * &self.isometry;
        let eye = DMatrix::<Complex64>::identity(gram.nrows(), gram.ncols());
        (gram - eye).norm()
    }
}

/// Rewrite `state` over an equal-weight fine-grained environment basis
/// according to `plan`, returning the new state and the reusable map.
///
/// Branch order is the state's deterministic component order, which must
/// match the plan's weight order.
pub fn finegrain_env(
    state: &PureState,
    env: &str,
    plan: &RationalWeightPlan,
) -> Result<(PureState, FineGrainingMap)> {
    let layout = state.layout();
    let env_position = layout.position(env)?;

    let branches: Vec<(&[usize], Complex64)> = state.indexed_components().collect();
    if branches.len() != plan.numerators.len() {
        return Err(Error::BranchMismatch(format!(
            "state has {} branches, plan has {}",
            branches.len(),
            plan.numerators.len()
        )));
    }
    for (i, (tuple_i, _)) in branches.iter().enumerate() {
        for (tuple_j, _) in branches.iter().skip(i + 1) {
            if tuple_i[env_position] == tuple_j[env_position] {
                let label = layout.subsystem(env_position).label(tuple_i[env_position]);
                return Err(Error::EnvNotSeparating(
                    layout.label_tuple(tuple_i).join(","),
                    layout.label_tuple(tuple_j).join(","),
                    label.to_owned(),
                ));
            }
        }
    }
    for (k, (_, amp)) in branches.iter().enumerate() {
        let weight = amp.norm_sqr();
        if (weight - plan.weights[k]).abs() > state.tolerances().normalization {
            return Err(Error::BranchMismatch(format!(
                "branch {k} has weight {weight}, plan expects {}",
                plan.weights[k]
            )));
        }
    }

    let fine_env = format!("{env}'");
    if layout.contains(&fine_env) {
        return Err(Error::DuplicateSubsystemId(fine_env));
    }
    let total = plan.denominator as usize;
    let fine_labels: Vec<String> = (1..=total).map(|i| format!("{fine_env}_{i}")).collect();

    let mut isometry = DMatrix::<Complex64>::zeros(total, branches.len());
    let mut blocks = Vec::with_capacity(branches.len());
    let mut source_labels = Vec::with_capacity(branches.len());
    let mut offset = 0usize;
    for (k, (tuple, amp)) in branches.iter().enumerate() {
        let n = plan.numerators[k] as usize;
        let phase = amp / amp.norm();
        let entry = phase.conj() / Complex64::new((n as f64).sqrt(), 0.0);
        for i in offset..offset + n {
            isometry[(i, k)] = entry;
        }
        blocks.push((offset, n));
        source_labels.push(
            layout
                .subsystem(env_position)
                .label(tuple[env_position])
                .to_owned(),
        );
        offset += n;
    }

    let map = FineGrainingMap {
        source_env: env.to_owned(),
        fine_env,
        fine_labels,
        source_labels,
        blocks,
        isometry,
    };
    let fine_state = apply_map(state, &map)?;
    Ok((fine_state, map))
}

/// Apply a fine-graining map's isometry to the environment factor of any
/// state over the source labels. The same linear map works for every input
/// state, which is what makes cross-state comparisons meaningful.
pub fn apply_map(state: &PureState, map: &FineGrainingMap) -> Result<PureState> {
    let layout = state.layout();
    let env_position = layout.position(&map.source_env)?;
    if layout.contains(&map.fine_env) {
        return Err(Error::DuplicateSubsystemId(map.fine_env.clone()));
    }

    let new_layout = Arc::new(SubsystemLayout::new(layout.subsystems().iter().map(
        |sub| {
            if sub.id() == map.source_env {
                (map.fine_env.clone(), map.fine_labels.clone())
            } else {
                (sub.id().to_owned(), sub.labels().to_vec())
            }
        },
    ))?);

    let pruning = state.tolerances().pruning;
    let mut components: BTreeMap<Vec<usize>, Complex64> = BTreeMap::new();
    for (tuple, amp) in state.indexed_components() {
        let env_label = layout.subsystem(env_position).label(tuple[env_position]);
        let column = map
            .source_labels
            .iter()
            .position(|l| l == env_label)
            .ok_or_else(|| Error::UnknownSourceLabel(env_label.to_owned()))?;
        let (start, len) = map.blocks[column];
        for i in start..start + len {
            let coeff = map.isometry[(i, column)];
            if coeff.norm() < pruning {
                continue;
            }
            let mut new_tuple = tuple.to_vec();
            new_tuple[env_position] = i;
            *components.entry(new_tuple).or_insert(Complex64::ZERO) += coeff * amp;
        }
    }
    components.retain(|_, amp| amp.norm() >= pruning);
    Ok(PureState::from_indexed(
        new_layout,
        components,
        *state.tolerances(),
    ))
}

/// Append a fresh environment subsystem carrying one label per component,
/// turning each component (…, E′_i) into (…, E′_i, E″_i).
pub fn add_ancilla_env(state: &PureState, new_env_id: &str) -> Result<PureState> {
    let layout = state.layout();
    if layout.contains(new_env_id) {
        return Err(Error::DuplicateSubsystemId(new_env_id.to_owned()));
    }
    let count = state.component_count();
    let labels: Vec<String> = (1..=count).map(|i| format!("{new_env_id}_{i}")).collect();
    let new_layout = Arc::new(SubsystemLayout::new(
        layout
            .subsystems()
            .iter()
            .map(|sub| (sub.id().to_owned(), sub.labels().to_vec()))
            .chain(std::iter::once((new_env_id.to_owned(), labels))),
    )?);
    let components = state
        .indexed_components()
        .enumerate()
        .map(|(i, (tuple, amp))| {
            let mut new_tuple = tuple.to_vec();
            new_tuple.push(i);
            (new_tuple, amp)
        })
        .collect();
    Ok(PureState::from_indexed(
        new_layout,
        components,
        *state.tolerances(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envariance::{composite_swap, swap_op, verify_counter};
    use crate::tolerances::Tolerances;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn se_layout() -> SubsystemLayout {
        SubsystemLayout::new([("S", vec!["S0", "S1"]), ("E", vec!["E0", "E1"])]).unwrap()
    }

    /// √3/2 |S0,E0⟩ + 1/2 |S1,E1⟩ (the ψ₁ weights without a pointer)
    fn psi1_se() -> PureState {
        PureState::build(
            se_layout(),
            [
                (vec!["S0", "E0"], c(3f64.sqrt() / 2.0)),
                (vec!["S1", "E1"], c(0.5)),
            ],
            &Tolerances::DEFAULT,
        )
        .unwrap()
    }

    #[test]
    fn rationalize_three_quarters() {
        let plan = rationalize(&[0.75, 0.25], 1e-9, 1_000_000).unwrap();
        assert_eq!(plan.numerators(), &[3, 1]);
        assert_eq!(plan.denominator(), 4);
        assert!(plan.achieved_error() < 1e-12);
    }

    #[test]
    fn rationalize_two_thirds() {
        let plan = rationalize(&[2.0 / 3.0, 1.0 / 3.0], 1e-9, 1_000_000).unwrap();
        assert_eq!(plan.numerators(), &[2, 1]);
        assert_eq!(plan.denominator(), 3);
    }

    #[test]
    fn rationalize_equal_halves() {
        let plan = rationalize(&[0.5, 0.5], 1e-9, 1_000_000).unwrap();
        assert_eq!(plan.numerators(), &[1, 1]);
        assert_eq!(plan.denominator(), 2);
    }

    #[test]
    fn rationalize_inverse_pi() {
        // Minimal N for [1/π, 1−1/π] at 1e-4, frozen from an exhaustive
        // denominator scan: N = 201 with n = (64, 137).
        let w = 1.0 / std::f64::consts::PI;
        let plan = rationalize(&[w, 1.0 - w], 1e-4, 1_000_000).unwrap();
        assert_eq!(plan.denominator(), 201);
        assert_eq!(plan.numerators(), &[64, 137]);
        assert!(plan.achieved_error() <= 1e-4);
    }

    #[test]
    fn rationalize_respects_bound() {
        let w = 1.0 / std::f64::consts::PI;
        let err = rationalize(&[w, 1.0 - w], 1e-4, 100).unwrap_err();
        assert!(matches!(err, Error::NoPlanWithinBound { .. }));
    }

    #[test]
    fn rationalize_rejects_bad_weights() {
        assert!(matches!(
            rationalize(&[0.5, 0.6], 1e-9, 100).unwrap_err(),
            Error::InvalidWeights(_)
        ));
        assert!(matches!(
            rationalize(&[1.2, -0.2], 1e-9, 100).unwrap_err(),
            Error::InvalidWeights(_)
        ));
    }

    #[test]
    fn finegrain_psi1_gives_four_equal_components() {
        let state = psi1_se();
        let plan = rationalize(&[0.75, 0.25], 1e-9, 100).unwrap();
        let (fine, map) = finegrain_env(&state, "E", &plan).unwrap();
        assert_eq!(fine.component_count(), 4);
        for (_, amp) in fine.indexed_components() {
            assert!((amp.norm() - 0.5).abs() < 1e-12);
        }
        assert_eq!(map.fine_env(), "E'");
        assert_eq!(map.fine_labels().len(), 4);
        assert!(map.isometry_deviation() < 1e-12);
        // Spectators keep their reduced state.
        let before = state.reduced_density(&["S"]).unwrap();
        let after = fine.reduced_density(&["S"]).unwrap();
        assert!(before.frobenius_distance(&after).unwrap() < 1e-12);
    }

    #[test]
    fn finegrain_absorbs_branch_phases() {
        let state = PureState::build(
            se_layout(),
            [
                (vec!["S0", "E0"], Complex64::from_polar(3f64.sqrt() / 2.0, 1.1)),
                (vec!["S1", "E1"], Complex64::from_polar(0.5, -2.3)),
            ],
            &Tolerances::DEFAULT,
        )
        .unwrap();
        let plan = rationalize(&[0.75, 0.25], 1e-9, 100).unwrap();
        let (fine, _) = finegrain_env(&state, "E", &plan).unwrap();
        for (_, amp) in fine.indexed_components() {
            assert!((amp - c(0.5)).norm() < 1e-12, "amplitude {amp} not +1/2");
        }
    }

    #[test]
    fn finegrain_equal_pair_is_relabeling() {
        let a = c(std::f64::consts::FRAC_1_SQRT_2);
        let state = PureState::build(
            se_layout(),
            [(vec!["S0", "E0"], a), (vec!["S1", "E1"], a)],
            &Tolerances::DEFAULT,
        )
        .unwrap();
        let plan = rationalize(&[0.5, 0.5], 1e-9, 100).unwrap();
        let (fine, _) = finegrain_env(&state, "E", &plan).unwrap();
        assert_eq!(fine.component_count(), 2);
        for (_, amp) in fine.indexed_components() {
            assert!((amp.norm() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        }
    }

    #[test]
    fn finegrain_rejects_shared_env_label() {
        let state = PureState::build(
            se_layout(),
            [(vec!["S0", "E0"], c(0.6)), (vec!["S1", "E0"], c(0.8))],
            &Tolerances::DEFAULT,
        )
        .unwrap();
        let plan = rationalize(&[0.36, 0.64], 1e-9, 100).unwrap();
        assert!(matches!(
            finegrain_env(&state, "E", &plan).unwrap_err(),
            Error::EnvNotSeparating(..)
        ));
    }

    #[test]
    fn finegrain_rejects_mismatched_weights() {
        let state = psi1_se();
        let plan = rationalize(&[0.5, 0.5], 1e-9, 100).unwrap();
        assert!(matches!(
            finegrain_env(&state, "E", &plan).unwrap_err(),
            Error::BranchMismatch(_)
        ));
    }

    #[test]
    fn map_pushes_basis_ket_to_block_superposition() {
        let state = psi1_se();
        let plan = rationalize(&[0.75, 0.25], 1e-9, 100).unwrap();
        let (_, map) = finegrain_env(&state, "E", &plan).unwrap();
        let ket = PureState::build(
            se_layout(),
            [(vec!["S0", "E0"], c(1.0))],
            &Tolerances::DEFAULT,
        )
        .unwrap();
        let pushed = apply_map(&ket, &map).unwrap();
        assert_eq!(pushed.component_count(), 3);
        let expected = 1.0 / 3f64.sqrt();
        for (_, amp) in pushed.indexed_components() {
            assert!((amp - c(expected)).norm() < 1e-12);
        }
    }

    #[test]
    fn map_rejects_labels_outside_domain() {
        let layout = SubsystemLayout::new([
            ("S", vec!["S0", "S1"]),
            ("E", vec!["E0", "E1", "E2"]),
        ])
        .unwrap();
        let state = PureState::build(
            layout.clone(),
            [
                (vec!["S0", "E0"], c(3f64.sqrt() / 2.0)),
                (vec!["S1", "E1"], c(0.5)),
            ],
            &Tolerances::DEFAULT,
        )
        .unwrap();
        let plan = rationalize(&[0.75, 0.25], 1e-9, 100).unwrap();
        let (_, map) = finegrain_env(&state, "E", &plan).unwrap();
        let stray = PureState::build(
            layout,
            [(vec!["S0", "E2"], c(1.0))],
            &Tolerances::DEFAULT,
        )
        .unwrap();
        assert!(matches!(
            apply_map(&stray, &map).unwrap_err(),
            Error::UnknownSourceLabel(_)
        ));
    }

    #[test]
    fn ancilla_mirrors_components() {
        let state = psi1_se();
        let plan = rationalize(&[0.75, 0.25], 1e-9, 100).unwrap();
        let (fine, _) = finegrain_env(&state, "E", &plan).unwrap();
        let extended = add_ancilla_env(&fine, "E''").unwrap();
        assert_eq!(extended.layout().len(), 3);
        assert_eq!(extended.component_count(), 4);
        let amp = extended.amplitude(&["S0", "E'_1", "E''_1"]).unwrap();
        assert!((amp - c(0.5)).norm() < 1e-12);
        let amp = extended.amplitude(&["S1", "E'_4", "E''_4"]).unwrap();
        assert!((amp - c(0.5)).norm() < 1e-12);
    }

    #[test]
    fn ancilla_on_single_component_state() {
        let state = PureState::build(
            se_layout(),
            [(vec!["S0", "E0"], c(1.0))],
            &Tolerances::DEFAULT,
        )
        .unwrap();
        let extended = add_ancilla_env(&state, "A").unwrap();
        assert_eq!(extended.component_count(), 1);
        assert!((extended.amplitude(&["S0", "E0", "A_1"]).unwrap() - c(1.0)).norm() < 1e-12);
    }

    #[test]
    fn ancilla_rejects_duplicate_id() {
        let state = psi1_se();
        assert!(matches!(
            add_ancilla_env(&state, "E").unwrap_err(),
            Error::DuplicateSubsystemId(_)
        ));
    }

    #[test]
    fn composite_swap_verdict_uses_degenerate_alignment() {
        // All four Schmidt coefficients across the ({S,E'} | {E''}) cut are
        // equal, so the counter construction has to solve one fully
        // degenerate block.
        use crate::envariance::is_envariant;
        let state = psi1_se();
        let plan = rationalize(&[0.75, 0.25], 1e-9, 100).unwrap();
        let (fine, _) = finegrain_env(&state, "E", &plan).unwrap();
        let extended = add_ancilla_env(&fine, "E''").unwrap();
        let op = composite_swap(
            extended.layout(),
            &["S", "E'"],
            &["S0", "E'_2"],
            &["S1", "E'_4"],
        )
        .unwrap();
        let verdict = is_envariant(&extended, &op, &["E''"]).unwrap();
        assert!(verdict.envariant);
        let counter = verdict.counter_op.unwrap();
        assert!(verify_counter(&extended, &op, &counter).unwrap() < 1e-9);
    }

    #[test]
    fn composite_swap_undone_on_second_environment() {
        // Fine-grain, extend with a second environment, swap (S with E'),
        // counter-swap on E''.
        let state = psi1_se();
        let plan = rationalize(&[0.75, 0.25], 1e-9, 100).unwrap();
        let (fine, _) = finegrain_env(&state, "E", &plan).unwrap();
        let extended = add_ancilla_env(&fine, "E''").unwrap();
        for i in 1..=3u32 {
            let op = composite_swap(
                extended.layout(),
                &["S", "E'"],
                &["S0", &format!("E'_{i}")],
                &["S1", "E'_4"],
            )
            .unwrap();
            let counter =
                swap_op(extended.layout(), "E''", &format!("E''_{i}"), "E''_4").unwrap();
            let residual = verify_counter(&extended, &op, &counter).unwrap();
            assert!(residual < 1e-12, "pair {i}: residual {residual}");
            // The second-environment swap alone cannot move the system's
            // reduced state.
            assert!(crate::envariance::causality_check(&extended, &counter, &["S"]).unwrap());
        }
    }
}
