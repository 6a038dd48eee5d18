//! Envariance verdicts and the phase/swap operation builders.
//!
//! An operation on a local system is *envariant* for a state when it can be
//! undone by a unitary acting only on a designated environment subset,
//! leaving the joint state exactly unchanged (no global-phase quotient).
//! The verdict here is decided through reduced-density equality on the
//! non-environment part, and the counter-operation is constructed by
//! matching Schmidt decompositions across the (non-env | env) cut.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::statespace::{
    schmidt, FactorVector, LocalOperator, OperatorKind, PureState, SubsystemLayout,
};
use crate::tolerances::Tolerances;

/// Adjacent Schmidt coefficients closer than this are treated as one
/// degenerate group when aligning the two decompositions.
const DEGENERACY_GAP: f64 = 1e-7;

/// Outcome of an envariance check.
#[derive(Clone, Debug)]
pub struct EnvarianceVerdict {
    /// True when the operation can be undone on the environment alone.
    pub envariant: bool,
    /// The environment counter-operation, present exactly when envariant.
    pub counter_op: Option<LocalOperator>,
    /// ‖U_E U_S ψ − ψ‖ for the constructed counter, when one was built.
    pub residual: Option<f64>,
}

/// Diagonal unitary multiplying one basis label's amplitude by e^{iφ}.
pub fn phase_op(
    layout: &SubsystemLayout,
    subsystem: &str,
    label: &str,
    phi: f64,
) -> Result<LocalOperator> {
    let position = layout.position(subsystem)?;
    let sub = layout.subsystem(position);
    let target = sub.label_index(label)?;
    let mut matrix = DMatrix::<Complex64>::identity(sub.dim(), sub.dim());
    matrix[(target, target)] = Complex64::from_polar(1.0, phi);
    LocalOperator::unitary(vec![subsystem.to_owned()], matrix, &Tolerances::DEFAULT)
}

/// Permutation unitary exchanging two basis labels of one subsystem.
pub fn swap_op(
    layout: &SubsystemLayout,
    subsystem: &str,
    label1: &str,
    label2: &str,
) -> Result<LocalOperator> {
    let position = layout.position(subsystem)?;
    let sub = layout.subsystem(position);
    let a = sub.label_index(label1)?;
    let b = sub.label_index(label2)?;
    if a == b {
        return Err(Error::IdenticalLabels);
    }
    let mut matrix = DMatrix::<Complex64>::identity(sub.dim(), sub.dim());
    matrix[(a, a)] = Complex64::ZERO;
    matrix[(b, b)] = Complex64::ZERO;
    matrix[(a, b)] = Complex64::ONE;
    matrix[(b, a)] = Complex64::ONE;
    LocalOperator::unitary(vec![subsystem.to_owned()], matrix, &Tolerances::DEFAULT)
}

/// Permutation unitary exchanging two joint labels over an ordered target
/// subset, e.g. |S₀,E′_i⟩ ↔ |S₁,E′_j⟩.
pub fn composite_swap(
    layout: &SubsystemLayout,
    targets: &[impl AsRef<str>],
    tuple1: &[impl AsRef<str>],
    tuple2: &[impl AsRef<str>],
) -> Result<LocalOperator> {
    if tuple1.len() != targets.len() || tuple2.len() != targets.len() {
        return Err(Error::TupleLength {
            expected: targets.len(),
            got: tuple1.len().max(tuple2.len()),
        });
    }
    let mut positions = Vec::with_capacity(targets.len());
    for id in targets {
        positions.push(layout.position(id.as_ref())?);
    }
    let mut a = 0usize;
    let mut b = 0usize;
    for ((&p, l1), l2) in positions.iter().zip(tuple1).zip(tuple2) {
        let sub = layout.subsystem(p);
        a = a * sub.dim() + sub.label_index(l1.as_ref())?;
        b = b * sub.dim() + sub.label_index(l2.as_ref())?;
    }
    if a == b {
        return Err(Error::IdenticalLabels);
    }
    let dim: usize = positions.iter().map(|&p| layout.subsystem(p).dim()).product();
    let mut matrix = DMatrix::<Complex64>::identity(dim, dim);
    matrix[(a, a)] = Complex64::ZERO;
    matrix[(b, b)] = Complex64::ZERO;
    matrix[(a, b)] = Complex64::ONE;
    matrix[(b, a)] = Complex64::ONE;
    let ids = targets.iter().map(|t| t.as_ref().to_owned()).collect();
    LocalOperator::unitary(ids, matrix, &Tolerances::DEFAULT)
}

/// ‖counter·op·ψ − ψ‖ for an (operation, candidate counter) pair.
pub fn verify_counter(
    state: &PureState,
    op: &LocalOperator,
    counter: &LocalOperator,
) -> Result<f64> {
    if counter.overlaps(op.targets()) {
        return Err(Error::TargetOverlap);
    }
    let undone = state.apply(op)?.apply(counter)?;
    state.distance(&undone)
}

/// True iff the reduced state of `system` is unchanged by `env_op`.
///
/// For unitary operations on disjoint degrees of freedom this always holds;
/// the check exists as an executable regression of that premise.
pub fn causality_check(
    state: &PureState,
    env_op: &LocalOperator,
    system: &[impl AsRef<str>],
) -> Result<bool> {
    if env_op.kind() != OperatorKind::Unitary {
        return Err(Error::TargetKindError {
            kind: env_op.kind().to_string(),
        });
    }
    if env_op.overlaps(system) {
        return Err(Error::TargetOverlap);
    }
    let before = state.reduced_density(system)?;
    let after = state.apply(env_op)?.reduced_density(system)?;
    Ok(before.frobenius_distance(&after)? <= state.tolerances().normalization)
}

/// Decide whether `op` is envariant for `state` with respect to the
/// environment subset `env`, constructing the counter-operation when it is.
pub fn is_envariant(
    state: &PureState,
    op: &LocalOperator,
    env: &[impl AsRef<str>],
) -> Result<EnvarianceVerdict> {
    if env.is_empty() {
        return Err(Error::EmptyKeepSet);
    }
    if op.overlaps(env) {
        return Err(Error::TargetOverlap);
    }
    let tol = *state.tolerances();
    let layout = state.layout();
    let env_positions = layout.positions_sorted(env)?;
    let rest_positions = layout.complement(&env_positions);
    if rest_positions.is_empty() {
        return Err(Error::InvalidBipartition(
            "environment subset covers the whole layout".into(),
        ));
    }
    let rest_ids: Vec<String> = rest_positions
        .iter()
        .map(|&p| layout.subsystem(p).id().to_owned())
        .collect();

    let transformed = state.apply(op)?;
    let rho = state.reduced_density(&rest_ids)?;
    let rho_after = transformed.reduced_density(&rest_ids)?;
    if rho.frobenius_distance(&rho_after)? > tol.normalization {
        return Ok(EnvarianceVerdict {
            envariant: false,
            counter_op: None,
            residual: None,
        });
    }

    // Equal reduced states on the non-env part mean the two states are
    // purifications of the same density matrix, so a unitary on env maps one
    // onto the other. Build it from the matched Schmidt decompositions.
    let counter = match build_counter(state, &transformed, &rest_ids, &env_positions, &tol) {
        Some(counter) => counter,
        None => {
            return Ok(EnvarianceVerdict {
                envariant: false,
                counter_op: None,
                residual: None,
            })
        }
    };
    let residual = verify_counter(state, op, &counter)?;
    if residual < tol.normalization {
        Ok(EnvarianceVerdict {
            envariant: true,
            counter_op: Some(counter),
            residual: Some(residual),
        })
    } else {
        Ok(EnvarianceVerdict {
            envariant: false,
            counter_op: None,
            residual: Some(residual),
        })
    }
}

/// Construct U_E with (I ⊗ U_E)·op·ψ = ψ by pairing Schmidt vectors of the
/// original and transformed states across the (rest | env) cut, aligning
/// degenerate subspaces through their left-vector overlap matrix, and
/// completing to a full unitary on the untouched orthogonal complement.
fn build_counter(
    state: &PureState,
    transformed: &PureState,
    rest_ids: &[String],
    env_positions: &[usize],
    tol: &Tolerances,
) -> Option<LocalOperator> {
    let sd = schmidt(state, rest_ids).ok()?;
    let sd_after = schmidt(transformed, rest_ids).ok()?;
    let rank = sd.rank().min(sd_after.rank());
    if rank == 0 {
        return None;
    }
    if sd.rank() != sd_after.rank() {
        // Ranks can only disagree through pruning noise; any coefficient
        // beyond the shared rank must be negligible.
        let spill = sd.coefficients()[rank..]
            .iter()
            .chain(&sd_after.coefficients()[rank..])
            .fold(0.0f64, |m, &c| m.max(c));
        if spill > DEGENERACY_GAP {
            return None;
        }
    }
    for k in 0..rank {
        if (sd.coefficients()[k] - sd_after.coefficients()[k]).abs() > DEGENERACY_GAP {
            return None;
        }
    }

    // Degeneracy groups over the shared, descending coefficient list.
    let mut groups: Vec<(usize, usize)> = Vec::new();
    let mut start = 0;
    for k in 1..=rank {
        if k == rank || (sd.coefficients()[k - 1] - sd.coefficients()[k]).abs() > DEGENERACY_GAP {
            groups.push((start, k));
            start = k;
        }
    }

    let layout = state.layout();
    let env_dim = layout.joint_dim(env_positions);
    let mut source = DMatrix::<Complex64>::zeros(env_dim, rank);
    let mut target = DMatrix::<Complex64>::zeros(env_dim, rank);
    for &(lo, hi) in &groups {
        let n = hi - lo;
        let mut overlap = DMatrix::<Complex64>::zeros(n, n);
        for (a, u) in sd.left_basis()[lo..hi].iter().enumerate() {
            for (b, u_after) in sd_after.left_basis()[lo..hi].iter().enumerate() {
                overlap[(a, b)] = u.inner(u_after);
            }
        }
        // Snap to the nearest unitary; residual verification has the final
        // say on whether the alignment succeeded.
        let svd = overlap.clone().svd(true, true);
        let rotation = svd.u? * svd.v_t?;

        let dense_v: Vec<DVector<Complex64>> = sd.right_basis()[lo..hi]
            .iter()
            .map(FactorVector::to_dense)
            .collect();
        for (k, v_after) in sd_after.right_basis()[lo..hi].iter().enumerate() {
            source.set_column(lo + k, &v_after.to_dense());
            let mut mapped = DVector::<Complex64>::zeros(env_dim);
            for (j, v) in dense_v.iter().enumerate() {
                mapped += v * rotation[(j, k)].conj();
            }
            target.set_column(lo + k, &mapped);
        }
    }

    let source_fill = orthonormal_completion(&source, env_dim);
    let target_fill = orthonormal_completion(&target, env_dim);
    if source_fill.ncols() != target_fill.ncols() {
        return None;
    }
    let mut unitary = &target * source.adjoint();
    if source_fill.ncols() > 0 {
        unitary += &target_fill * source_fill.adjoint();
    }
    let env_ids: Vec<String> = env_positions
        .iter()
        .map(|&p| layout.subsystem(p).id().to_owned())
        .collect();
    LocalOperator::unitary(env_ids, unitary, tol).ok()
}

/// Orthonormal basis of the orthogonal complement of the given orthonormal
/// columns, built deterministically from the canonical basis.
fn orthonormal_completion(columns: &DMatrix<Complex64>, dim: usize) -> DMatrix<Complex64> {
    let mut kept: Vec<DVector<Complex64>> = Vec::new();
    let want = dim - columns.ncols();
    for i in 0..dim {
        if kept.len() == want {
            break;
        }
        let mut candidate = DVector::<Complex64>::zeros(dim);
        candidate[i] = Complex64::ONE;
        // Two Gram-Schmidt passes for numerical stability.
        for _ in 0..2 {
            for j in 0..columns.ncols() {
                let col = columns.column(j);
                let proj: Complex64 = col.dotc(&candidate);
                candidate -= DVector::from_column_slice(col.as_slice()) * proj;
            }
            for q in &kept {
                let proj: Complex64 = q.dotc(&candidate);
                candidate -= q * proj;
            }
        }
        let norm = candidate.norm();
        if norm > 1e-8 {
            kept.push(candidate / Complex64::new(norm, 0.0));
        }
    }
    let mut out = DMatrix::<Complex64>::zeros(dim, kept.len());
    for (j, q) in kept.iter().enumerate() {
        out.set_column(j, q);
    }
    out
}
