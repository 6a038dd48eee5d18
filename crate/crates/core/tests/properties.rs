//! Property tests over randomized states, operators, and weight vectors.

use envariance_core::envariance::{causality_check, is_envariant, phase_op, swap_op, verify_counter};
use envariance_core::finegrain::{add_ancilla_env, apply_map, finegrain_env, rationalize};
use envariance_core::machines::{
    local_machine, outcome_statistics, RegistrationRule,
};
use envariance_core::statespace::{schmidt, LocalOperator, PureState, SubsystemLayout};
use envariance_core::Tolerances;

use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

/// A layout of `sub_dims.len()` subsystems named Q0, Q1, … with the given
/// dimensions.
fn layout_from_dims(sub_dims: &[usize]) -> SubsystemLayout {
    SubsystemLayout::new(sub_dims.iter().enumerate().map(|(i, &d)| {
        (
            format!("Q{i}"),
            (0..d).map(|k| format!("Q{i}_{k}")).collect::<Vec<_>>(),
        )
    }))
    .unwrap()
}

/// Random normalized sparse state over the layout.
fn random_state(layout: &SubsystemLayout, components: usize, rng: &mut StdRng) -> PureState {
    let mut list: Vec<(Vec<String>, Complex64)> = Vec::new();
    for _ in 0..components {
        let tuple: Vec<String> = layout
            .subsystems()
            .iter()
            .map(|sub| sub.labels()[rng.random_range(0..sub.dim())].clone())
            .collect();
        let amp = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        list.push((tuple, amp));
    }
    PureState::build_normalized(layout.clone(), list, &Tolerances::DEFAULT)
        .expect("random components survive normalization")
}

/// Haar-ish random unitary from the QR decomposition of a Gaussian-free
/// uniform complex matrix; exact unitarity is what the tests rely on.
fn random_unitary(dim: usize, rng: &mut StdRng) -> DMatrix<Complex64> {
    let raw = DMatrix::from_fn(dim, dim, |_, _| {
        Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    });
    let qr = raw.qr();
    qr.q()
}

fn dims_strategy() -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(1usize..=6, 2..=4)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// ‖Uψ‖ = 1 for every unitary operator application.
    #[test]
    fn unitary_preserves_norm(dims in dims_strategy(), components in 1usize..=6, seed in any::<u64>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let layout = layout_from_dims(&dims);
        let state = random_state(&layout, components, &mut rng);
        let target = rng.random_range(0..dims.len());
        let matrix = random_unitary(dims[target], &mut rng);
        let op = LocalOperator::unitary(vec![format!("Q{target}")], matrix, &Tolerances::DEFAULT)
            .unwrap();
        let moved = state.apply(&op).unwrap();
        prop_assert!((moved.norm_sq() - 1.0).abs() < 1e-10);
    }

    /// Reduced densities have unit trace and no eigenvalue below −1e-9,
    /// for every keep subset.
    #[test]
    fn partial_trace_consistency(dims in dims_strategy(), components in 1usize..=6, seed in any::<u64>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let layout = layout_from_dims(&dims);
        let state = random_state(&layout, components, &mut rng);
        for keep_mask in 1..(1u32 << dims.len()) {
            let keep: Vec<String> = (0..dims.len())
                .filter(|i| keep_mask & (1 << i) != 0)
                .map(|i| format!("Q{i}"))
                .collect();
            let rho = state.reduced_density(&keep).unwrap();
            prop_assert!((rho.trace() - 1.0).abs() < 1e-9);
            prop_assert!(rho.eigenvalues().into_iter().all(|e| e >= -1e-9));
            prop_assert!(rho.contract_deviation() < 1e-9);
        }
    }

    /// Σ λ_k |u_k⟩|v_k⟩ reproduces the source state.
    #[test]
    fn schmidt_reconstruction(dims in dims_strategy(), components in 1usize..=6, seed in any::<u64>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let layout = layout_from_dims(&dims);
        let state = random_state(&layout, components, &mut rng);
        let cut = rng.random_range(1..dims.len());
        let left: Vec<String> = (0..cut).map(|i| format!("Q{i}")).collect();
        let sd = schmidt(&state, &left).unwrap();
        prop_assert!(sd.reconstruction_error(&state) < 1e-9);
        let sum_sq: f64 = sd.coefficients().iter().map(|c| c * c).sum();
        prop_assert!((sum_sq - 1.0).abs() < 1e-9);
    }

    /// Acting on the complement never changes a reduced state, and the
    /// executable causality check agrees.
    #[test]
    fn env_unitary_leaves_reduced_state(dims in prop::collection::vec(1usize..=5, 2..=4),
                                        components in 1usize..=6,
                                        seed in any::<u64>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let layout = layout_from_dims(&dims);
        let state = random_state(&layout, components, &mut rng);
        let env = rng.random_range(0..dims.len());
        let env_id = format!("Q{env}");
        let matrix = random_unitary(dims[env], &mut rng);
        let op = LocalOperator::unitary(vec![env_id.clone()], matrix, &Tolerances::DEFAULT).unwrap();
        let system: Vec<String> = (0..dims.len())
            .filter(|&i| i != env)
            .map(|i| format!("Q{i}"))
            .collect();
        prop_assert!(causality_check(&state, &op, &system).unwrap());
        let before = state.reduced_density(&system).unwrap();
        let after = state.apply(&op).unwrap().reduced_density(&system).unwrap();
        prop_assert!(before.frobenius_distance(&after).unwrap() < 1e-9);
    }

    /// Whenever a verdict says envariant, the constructed counter actually
    /// undoes the operation.
    #[test]
    fn envariance_verdicts_are_sound(weight in 0.05f64..0.95, phi in 0.0f64..std::f64::consts::TAU,
                                     use_swap in any::<bool>(), seed in any::<u64>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let layout = SubsystemLayout::new([
            ("S", vec!["S0".to_owned(), "S1".to_owned()]),
            ("E", vec!["Ea".to_owned(), "Eb".to_owned()]),
        ]).unwrap();
        let alpha = Complex64::from_polar(weight.sqrt(), rng.random_range(0.0..std::f64::consts::TAU));
        let beta = Complex64::from_polar((1.0 - weight).sqrt(), rng.random_range(0.0..std::f64::consts::TAU));
        let state = PureState::build(
            layout.clone(),
            [(vec!["S0", "Ea"], alpha), (vec!["S1", "Eb"], beta)],
            &Tolerances::DEFAULT,
        ).unwrap();
        let op = if use_swap {
            swap_op(&layout, "S", "S0", "S1").unwrap()
        } else {
            phase_op(&layout, "S", "S0", phi).unwrap()
        };
        let verdict = is_envariant(&state, &op, &["E"]).unwrap();
        if verdict.envariant {
            let counter = verdict.counter_op.unwrap();
            prop_assert!(verify_counter(&state, &op, &counter).unwrap() < 1e-9);
        } else {
            prop_assert!(verdict.counter_op.is_none());
        }
        if !use_swap {
            // Distinct environment kets make every single-label phase
            // rotation envariant.
            prop_assert!(verdict.envariant);
        }
    }

    /// Plans satisfy Σ n_k = N and the achieved error bound.
    #[test]
    fn rational_plans_are_valid(raw in prop::collection::vec(0.02f64..1.0, 2..=5)) {
        let total: f64 = raw.iter().sum();
        let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
        let plan = rationalize(&weights, 1e-3, 1_000_000).unwrap();
        prop_assert_eq!(plan.numerators().iter().sum::<u64>(), plan.denominator());
        prop_assert!(plan.achieved_error() <= 1e-3);
        prop_assert!(plan.numerators().iter().all(|&n| n > 0));
    }

    /// Every fine-graining map is an isometry and leaves the reduced state
    /// of all non-environment subsystems unchanged.
    #[test]
    fn finegraining_preserves_spectators(weight in 0.05f64..0.95, seed in any::<u64>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let layout = SubsystemLayout::new([
            ("S", vec!["S0".to_owned(), "S1".to_owned()]),
            ("P", vec!["P0".to_owned(), "P1".to_owned()]),
            ("E", vec!["E0".to_owned(), "E1".to_owned()]),
        ]).unwrap();
        let alpha = Complex64::from_polar(weight.sqrt(), rng.random_range(0.0..std::f64::consts::TAU));
        let beta = Complex64::from_polar((1.0 - weight).sqrt(), rng.random_range(0.0..std::f64::consts::TAU));
        let state = PureState::build(
            layout,
            [(vec!["S0", "P0", "E0"], alpha), (vec!["S1", "P1", "E1"], beta)],
            &Tolerances::DEFAULT,
        ).unwrap();
        let weights: Vec<f64> = state.indexed_components().map(|(_, a)| a.norm_sqr()).collect();
        let plan = rationalize(&weights, 1e-3, 10_000).unwrap();
        let (fine, map) = finegrain_env(&state, "E", &plan).unwrap();
        prop_assert!(map.isometry_deviation() < 1e-10);
        prop_assert!((fine.norm_sq() - 1.0).abs() < 1e-10);
        let before = state.reduced_density(&["S", "P"]).unwrap();
        let after = fine.reduced_density(&["S", "P"]).unwrap();
        prop_assert!(before.frobenius_distance(&after).unwrap() < 1e-9);
    }

    /// Multiplying any component amplitude by a phase changes no statistic
    /// under either rule.
    #[test]
    fn statistics_are_phase_independent(weight in 0.05f64..0.95, phi in 0.0f64..std::f64::consts::TAU,
                                        flip_first in any::<bool>()) {
        let layout = SubsystemLayout::new([
            ("S", vec!["S0".to_owned(), "S1".to_owned()]),
            ("P", vec!["P0".to_owned(), "P1".to_owned()]),
            ("E", vec!["E0".to_owned(), "E1".to_owned()]),
        ]).unwrap();
        let amp0 = Complex64::new(weight.sqrt(), 0.0);
        let amp1 = Complex64::new((1.0 - weight).sqrt(), 0.0);
        let phase = Complex64::from_polar(1.0, phi);
        let (rot0, rot1) = if flip_first { (amp0 * phase, amp1) } else { (amp0, amp1 * phase) };
        let plain = PureState::build(
            layout.clone(),
            [(vec!["S0", "P0", "E0"], amp0), (vec!["S1", "P1", "E1"], amp1)],
            &Tolerances::DEFAULT,
        ).unwrap();
        let rotated = PureState::build(
            layout.clone(),
            [(vec!["S0", "P0", "E0"], rot0), (vec!["S1", "P1", "E1"], rot1)],
            &Tolerances::DEFAULT,
        ).unwrap();
        let machine = local_machine(&layout, "P").unwrap();
        for rule in [RegistrationRule::Born, RegistrationRule::BranchCount] {
            let a = outcome_statistics(&machine, &plain, rule, Some("P")).unwrap();
            let b = outcome_statistics(&machine, &rotated, rule, Some("P")).unwrap();
            for (x, y) in a.entries.iter().zip(&b.entries) {
                prop_assert!((x.probability - y.probability).abs() < 1e-12);
            }
        }
    }

    /// Branch counting coincides with Born exactly on equal-weight support.
    #[test]
    fn branch_count_equals_born_for_equal_weights(n in 2usize..=6) {
        let layout = SubsystemLayout::new([
            ("S", (0..n).map(|k| format!("S{k}")).collect::<Vec<_>>()),
            ("P", (0..n).map(|k| format!("P{k}")).collect::<Vec<_>>()),
        ]).unwrap();
        let amp = Complex64::new(1.0 / (n as f64).sqrt(), 0.0);
        let state = PureState::build(
            layout.clone(),
            (0..n).map(|k| (vec![format!("S{k}"), format!("P{k}")], amp)),
            &Tolerances::DEFAULT,
        ).unwrap();
        let machine = local_machine(&layout, "P").unwrap();
        let born = outcome_statistics(&machine, &state, RegistrationRule::Born, None).unwrap();
        let bc = outcome_statistics(&machine, &state, RegistrationRule::BranchCount, None).unwrap();
        for (x, y) in born.entries.iter().zip(&bc.entries) {
            prop_assert!((x.probability - y.probability).abs() < 1e-9);
        }
    }
}

/// Envariance transfer on ancilla-extended equal-weight states: every
/// matched (composite swap, second-environment counter-swap) pair leaves
/// the state unchanged. Deterministic enumeration rather than proptest
/// because the family is small.
#[test]
fn envariance_transfer_on_ancilla_outputs() {
    use envariance_core::envariance::composite_swap;
    for (w, tol) in [(0.75f64, 1e-9), (2.0 / 3.0, 1e-9), (0.5, 1e-9)] {
        let layout = SubsystemLayout::new([
            ("S", vec!["S0".to_owned(), "S1".to_owned()]),
            ("E", vec!["E0".to_owned(), "E1".to_owned()]),
        ])
        .unwrap();
        let state = PureState::build(
            layout,
            [
                (vec!["S0", "E0"], Complex64::new(w.sqrt(), 0.0)),
                (vec!["S1", "E1"], Complex64::new((1.0 - w).sqrt(), 0.0)),
            ],
            &Tolerances::DEFAULT,
        )
        .unwrap();
        let plan = rationalize(&[w, 1.0 - w], tol, 1000).unwrap();
        let (fine, map) = finegrain_env(&state, "E", &plan).unwrap();
        let extended = add_ancilla_env(&fine, "E''").unwrap();
        let n = map.blocks()[0].1;
        let total = map.fine_labels().len();
        for i in 1..=n {
            for j in n + 1..=total {
                let op = composite_swap(
                    extended.layout(),
                    &["S", "E'"],
                    &["S0", &format!("E'_{i}")],
                    &["S1", &format!("E'_{j}")],
                )
                .unwrap();
                let counter = swap_op(
                    extended.layout(),
                    "E''",
                    &format!("E''_{i}"),
                    &format!("E''_{j}"),
                )
                .unwrap();
                assert!(verify_counter(&extended, &op, &counter).unwrap() < 1e-9);
            }
        }
        // The same map reapplies linearly to other states over the source
        // labels.
        let probe = PureState::build(
            state.layout().clone(),
            [(vec!["S0", "E0"], Complex64::new(1.0, 0.0))],
            &Tolerances::DEFAULT,
        )
        .unwrap();
        let pushed = apply_map(&probe, &map).unwrap();
        assert!((pushed.norm_sq() - 1.0).abs() < 1e-10);
    }
}
