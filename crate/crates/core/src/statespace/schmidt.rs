//! Schmidt decomposition across a bipartition of the subsystem set.
//!
//! The decomposition is computed from an SVD over the occupied label tuples
//! only, so it stays cheap even when the formal product space is large.

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::statespace::{PureState, SubsystemLayout};

/// A sparse vector living on a subset of a layout's subsystems, keyed by
/// index sub-tuples over those subsystems (in layout order).
#[derive(Clone, Debug, PartialEq)]
pub struct FactorVector {
    layout: Arc<SubsystemLayout>,
    positions: Vec<usize>,
    components: BTreeMap<Vec<usize>, Complex64>,
}

impl FactorVector {
    pub(crate) fn new(
        layout: Arc<SubsystemLayout>,
        positions: Vec<usize>,
        components: BTreeMap<Vec<usize>, Complex64>,
    ) -> Self {
        FactorVector {
            layout,
            positions,
            components,
        }
    }

    /// Layout positions this vector lives on.
    pub fn positions(&self) -> &[usize] {
        &self.positions
    }

    pub fn indexed_components(&self) -> impl Iterator<Item = (&[usize], Complex64)> {
        self.components.iter().map(|(k, &v)| (k.as_slice(), v))
    }

    pub fn labeled_components(&self) -> impl Iterator<Item = (Vec<&str>, Complex64)> {
        self.components.iter().map(|(k, &v)| {
            (
                k.iter()
                    .zip(&self.positions)
                    .map(|(&idx, &p)| self.layout.subsystem(p).label(idx))
                    .collect(),
                v,
            )
        })
    }

    pub fn amplitude(&self, sub_tuple: &[usize]) -> Complex64 {
        self.components
            .get(sub_tuple)
            .copied()
            .unwrap_or(Complex64::ZERO)
    }

    /// ⟨self | other⟩ (conjugate-linear in `self`).
    pub fn inner(&self, other: &FactorVector) -> Complex64 {
        self.components
            .iter()
            .map(|(k, a)| {
                a.conj() * other.components.get(k).copied().unwrap_or(Complex64::ZERO)
            })
            .sum()
    }

    pub fn norm(&self) -> f64 {
        self.components
            .values()
            .map(|a| a.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// Dense coordinates over the joint basis of the vector's positions.
    pub fn to_dense(&self) -> nalgebra::DVector<Complex64> {
        let dim = self.layout.joint_dim(&self.positions);
        let mut v = nalgebra::DVector::zeros(dim);
        for (tuple, amp) in &self.components {
            v[self.layout.joint_index(&self.positions, tuple)] = *amp;
        }
        v
    }

    /// Index sub-tuple occupied by the entry of largest modulus; ties go to
    /// the lexicographically smallest tuple. Used for deterministic ordering
    /// and phase fixing.
    fn dominant_tuple(&self) -> Vec<usize> {
        let mut best: Option<(&Vec<usize>, f64)> = None;
        for (tuple, amp) in &self.components {
            let m = amp.norm();
            match best {
                Some((_, bm)) if m <= bm + 1e-12 => {}
                _ => best = Some((tuple, m)),
            }
        }
        best.map(|(t, _)| t.clone()).unwrap_or_default()
    }

    fn scale(&mut self, factor: Complex64) {
        for amp in self.components.values_mut() {
            *amp *= factor;
        }
    }
}

/// Result of a Schmidt decomposition: non-negative coefficients in descending
/// order with matched orthonormal bases for the two sides.
#[derive(Clone, Debug)]
pub struct SchmidtDecomposition {
    left_ids: Vec<String>,
    right_ids: Vec<String>,
    coefficients: Vec<f64>,
    left_basis: Vec<FactorVector>,
    right_basis: Vec<FactorVector>,
}

impl SchmidtDecomposition {
    pub fn left_ids(&self) -> &[String] {
        &self.left_ids
    }

    pub fn right_ids(&self) -> &[String] {
        &self.right_ids
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn left_basis(&self) -> &[FactorVector] {
        &self.left_basis
    }

    pub fn right_basis(&self) -> &[FactorVector] {
        &self.right_basis
    }

    pub fn rank(&self) -> usize {
        self.coefficients.len()
    }

    /// ‖Σ_k λ_k |u_k⟩|v_k⟩ − ψ‖ against the given source state.
    pub fn reconstruction_error(&self, source: &PureState) -> f64 {
        let mut rebuilt: BTreeMap<Vec<usize>, Complex64> = BTreeMap::new();
        let layout = source.layout();
        for ((lambda, u), v) in self
            .coefficients
            .iter()
            .zip(&self.left_basis)
            .zip(&self.right_basis)
        {
            for (lt, la) in &u.components {
                for (rt, ra) in &v.components {
                    let mut tuple = vec![0usize; layout.len()];
                    for (&p, &idx) in u.positions.iter().zip(lt) {
                        tuple[p] = idx;
                    }
                    for (&p, &idx) in v.positions.iter().zip(rt) {
                        tuple[p] = idx;
                    }
                    *rebuilt.entry(tuple).or_insert(Complex64::ZERO) += lambda * la * ra;
                }
            }
        }
        let mut sum = 0.0;
        for (tuple, amp) in source.indexed_components() {
            let b = rebuilt.remove(tuple).unwrap_or(Complex64::ZERO);
            sum += (amp - b).norm_sqr();
        }
        for amp in rebuilt.values() {
            sum += amp.norm_sqr();
        }
        sum.sqrt()
    }
}

/// Schmidt decomposition of `state` across the bipartition
/// (`left` | complement).
///
/// Coefficients come out descending; ties are broken by the lexicographic
/// order of each left vector's dominant label tuple, and each pair's phase is
/// fixed by making the dominant left entry real positive, so the output is
/// deterministic.
pub fn schmidt(state: &PureState, left: &[impl AsRef<str>]) -> Result<SchmidtDecomposition> {
    let layout = state.layout();
    if left.is_empty() {
        return Err(Error::InvalidBipartition("left subset is empty".into()));
    }
    let left_positions = layout.positions_sorted(left)?;
    let right_positions = layout.complement(&left_positions);
    if right_positions.is_empty() {
        return Err(Error::InvalidBipartition(
            "left subset covers the whole layout".into(),
        ));
    }

    // Occupied sub-tuples on each side, in deterministic order.
    let mut left_tuples: Vec<Vec<usize>> = Vec::new();
    let mut right_tuples: Vec<Vec<usize>> = Vec::new();
    let mut entries: Vec<(Vec<usize>, Vec<usize>, Complex64)> = Vec::new();
    for (tuple, amp) in state.indexed_components() {
        let lt: Vec<usize> = left_positions.iter().map(|&p| tuple[p]).collect();
        let rt: Vec<usize> = right_positions.iter().map(|&p| tuple[p]).collect();
        entries.push((lt, rt, amp));
    }
    for (lt, rt, _) in &entries {
        if !left_tuples.contains(lt) {
            left_tuples.push(lt.clone());
        }
        if !right_tuples.contains(rt) {
            right_tuples.push(rt.clone());
        }
    }
    left_tuples.sort();
    right_tuples.sort();

    let mut amp_matrix = DMatrix::<Complex64>::zeros(left_tuples.len(), right_tuples.len());
    for (lt, rt, amp) in &entries {
        let i = left_tuples.binary_search(lt).unwrap();
        let j = right_tuples.binary_search(rt).unwrap();
        amp_matrix[(i, j)] += amp;
    }

    let svd = amp_matrix.svd(true, true);
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested Vᴴ");
    let singular = svd.singular_values;

    let pruning = state.tolerances().pruning;
    let layout_arc = state.layout_arc();
    let mut triples: Vec<(f64, FactorVector, FactorVector)> = Vec::new();
    for k in 0..singular.len() {
        let lambda = singular[k];
        if lambda < pruning && !triples.is_empty() {
            continue;
        }
        let mut left_components = BTreeMap::new();
        for (i, tuple) in left_tuples.iter().enumerate() {
            let amp = u[(i, k)];
            if amp.norm() >= pruning {
                left_components.insert(tuple.clone(), amp);
            }
        }
        let mut right_components = BTreeMap::new();
        for (j, tuple) in right_tuples.iter().enumerate() {
            let amp = v_t[(k, j)];
            if amp.norm() >= pruning {
                right_components.insert(tuple.clone(), amp);
            }
        }
        if left_components.is_empty() || right_components.is_empty() {
            continue;
        }
        let mut u_vec = FactorVector::new(
            Arc::clone(&layout_arc),
            left_positions.clone(),
            left_components,
        );
        let mut v_vec = FactorVector::new(
            Arc::clone(&layout_arc),
            right_positions.clone(),
            right_components,
        );
        // Phase convention: dominant left entry real positive.
        let dominant = u_vec.dominant_tuple();
        let pivot = u_vec.amplitude(&dominant);
        if pivot.norm() > 0.0 {
            let phase = pivot / pivot.norm();
            u_vec.scale(phase.conj());
            v_vec.scale(phase);
        }
        triples.push((lambda, u_vec, v_vec));
    }

    // Descending by coefficient; near-ties ordered by dominant left label.
    triples.sort_by(|a, b| {
        if (a.0 - b.0).abs() <= 1e-9 {
            a.1.dominant_tuple().cmp(&b.1.dominant_tuple())
        } else {
            b.0.partial_cmp(&a.0).unwrap()
        }
    });

    let left_ids = left_positions
        .iter()
        .map(|&p| layout.subsystem(p).id().to_owned())
        .collect();
    let right_ids = right_positions
        .iter()
        .map(|&p| layout.subsystem(p).id().to_owned())
        .collect();
    let (coefficients, bases): (Vec<f64>, Vec<(FactorVector, FactorVector)>) = triples
        .into_iter()
        .map(|(lambda, u, v)| (lambda, (u, v)))
        .unzip();
    let (left_basis, right_basis) = bases.into_iter().unzip();
    Ok(SchmidtDecomposition {
        left_ids,
        right_ids,
        coefficients,
        left_basis,
        right_basis,
    })
}
