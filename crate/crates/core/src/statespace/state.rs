//! Sparse multipartite pure states and reduced density matrices.

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::statespace::{LocalOperator, OperatorKind, SubsystemLayout};
use crate::tolerances::Tolerances;

/// A normalized pure state stored as a sparse map from full label tuples
/// (as layout indices) to complex amplitudes.
///
/// States in this domain have a handful of components inside formally large
/// product spaces, so only nonzero amplitudes are kept; anything with modulus
/// below the pruning tolerance is dropped at construction and after every
/// transformation.
#[derive(Clone, Debug, PartialEq)]
pub struct PureState {
    layout: Arc<SubsystemLayout>,
    components: BTreeMap<Vec<usize>, Complex64>,
    tol: Tolerances,
}

impl PureState {
    /// Build a state from labeled components, verifying normalization.
    pub fn build<I, L, T>(layout: SubsystemLayout, components: I, tol: &Tolerances) -> Result<Self>
    where
        I: IntoIterator<Item = (L, Complex64)>,
        L: IntoIterator<Item = T>,
        T: AsRef<str>,
    {
        Self::assemble(Arc::new(layout), components, tol, false)
    }

    /// Like [`build`](Self::build) but rescales to unit norm instead of
    /// rejecting an unnormalized component list.
    pub fn build_normalized<I, L, T>(
        layout: SubsystemLayout,
        components: I,
        tol: &Tolerances,
    ) -> Result<Self>
    where
        I: IntoIterator<Item = (L, Complex64)>,
        L: IntoIterator<Item = T>,
        T: AsRef<str>,
    {
        Self::assemble(Arc::new(layout), components, tol, true)
    }

    fn assemble<I, L, T>(
        layout: Arc<SubsystemLayout>,
        components: I,
        tol: &Tolerances,
        normalize: bool,
    ) -> Result<Self>
    where
        I: IntoIterator<Item = (L, Complex64)>,
        L: IntoIterator<Item = T>,
        T: AsRef<str>,
    {
        let mut map: BTreeMap<Vec<usize>, Complex64> = BTreeMap::new();
        for (labels, amp) in components {
            let labels: Vec<T> = labels.into_iter().collect();
            let tuple = layout.index_tuple(&labels)?;
            *map.entry(tuple).or_insert(Complex64::ZERO) += amp;
        }
        map.retain(|_, amp| amp.norm() >= tol.pruning);
        if map.is_empty() {
            return Err(Error::EmptyState);
        }
        let norm_sq: f64 = map.values().map(|a| a.norm_sqr()).sum();
        if normalize {
            let inv = 1.0 / norm_sq.sqrt();
            for amp in map.values_mut() {
                *amp *= inv;
            }
        } else if (norm_sq - 1.0).abs() > tol.normalization {
            return Err(Error::NotNormalized {
                norm_sq,
                tolerance: tol.normalization,
            });
        }
        Ok(PureState {
            layout,
            components: map,
            tol: *tol,
        })
    }

    pub(crate) fn from_indexed(
        layout: Arc<SubsystemLayout>,
        components: BTreeMap<Vec<usize>, Complex64>,
        tol: Tolerances,
    ) -> Self {
        PureState {
            layout,
            components,
            tol,
        }
    }

    pub fn layout(&self) -> &SubsystemLayout {
        &self.layout
    }

    pub(crate) fn layout_arc(&self) -> Arc<SubsystemLayout> {
        Arc::clone(&self.layout)
    }

    pub fn tolerances(&self) -> &Tolerances {
        &self.tol
    }

    /// Number of stored (nonzero) components.
    pub fn component_count(&self) -> usize {
        self.components.len()
    }

    /// Components in deterministic layout order, as index tuples.
    pub fn indexed_components(&self) -> impl Iterator<Item = (&[usize], Complex64)> {
        self.components.iter().map(|(k, &v)| (k.as_slice(), v))
    }

    /// Components in deterministic layout order, as label tuples.
    pub fn labeled_components(&self) -> impl Iterator<Item = (Vec<&str>, Complex64)> {
        self.components
            .iter()
            .map(|(k, &v)| (self.layout.label_tuple(k), v))
    }

    /// Amplitude of a full label tuple (zero if not stored).
    pub fn amplitude(&self, labels: &[impl AsRef<str>]) -> Result<Complex64> {
        let tuple = self.layout.index_tuple(labels)?;
        Ok(self.components.get(&tuple).copied().unwrap_or(Complex64::ZERO))
    }

    pub fn norm_sq(&self) -> f64 {
        self.components.values().map(|a| a.norm_sqr()).sum()
    }

    /// ‖self − other‖₂ over the shared layout. No global-phase quotient:
    /// a state and its phase rotation are at a positive distance.
    pub fn distance(&self, other: &PureState) -> Result<f64> {
        if *self.layout != *other.layout {
            return Err(Error::LayoutMismatch);
        }
        let mut sum = 0.0;
        for (tuple, amp) in &self.components {
            let b = other.components.get(tuple).copied().unwrap_or(Complex64::ZERO);
            sum += (amp - b).norm_sqr();
        }
        for (tuple, amp) in &other.components {
            if !self.components.contains_key(tuple) {
                sum += amp.norm_sqr();
            }
        }
        Ok(sum.sqrt())
    }

    /// Distance after quotienting out a global phase: min over φ of
    /// ‖self − e^{iφ}·other‖₂. Envariance verdicts do not use this.
    pub fn ray_distance(&self, other: &PureState) -> Result<f64> {
        if *self.layout != *other.layout {
            return Err(Error::LayoutMismatch);
        }
        let overlap: Complex64 = self
            .components
            .iter()
            .map(|(tuple, amp)| {
                amp.conj()
                    * other
                        .components
                        .get(tuple)
                        .copied()
                        .unwrap_or(Complex64::ZERO)
            })
            .sum();
        let a = self.norm_sq();
        let b = other.norm_sq();
        Ok((a + b - 2.0 * overlap.norm()).max(0.0).sqrt())
    }

    /// Apply a unitary or isometry-context operator to the target factors.
    pub fn apply(&self, op: &LocalOperator) -> Result<PureState> {
        if op.kind() == OperatorKind::Projector {
            return Err(Error::NonUnitary { deviation: f64::NAN });
        }
        let out = self.apply_matrix(op)?;
        if op.kind() == OperatorKind::Unitary {
            let norm_sq = out.norm_sq();
            if (norm_sq - 1.0).abs() > 10.0 * self.tol.operator_algebra {
                return Err(Error::NonUnitary {
                    deviation: (norm_sq - 1.0).abs(),
                });
            }
        }
        Ok(out)
    }

    /// Apply the operator's matrix without contract checks. Used internally
    /// for projections, where the result is intentionally sub-normalized.
    pub(crate) fn apply_matrix(&self, op: &LocalOperator) -> Result<PureState> {
        let positions = op.target_positions(&self.layout)?;
        let matrix = op.matrix();
        let mut out: BTreeMap<Vec<usize>, Complex64> = BTreeMap::new();
        for (tuple, amp) in &self.components {
            let sub: Vec<usize> = positions.iter().map(|&p| tuple[p]).collect();
            let col = self.layout.joint_index(&positions, &sub);
            for row in 0..matrix.nrows() {
                let coeff = matrix[(row, col)];
                if coeff.norm() < self.tol.pruning {
                    continue;
                }
                let split = self.layout.split_joint_index(&positions, row);
                let mut new_tuple = tuple.clone();
                for (&p, &k) in positions.iter().zip(&split) {
                    new_tuple[p] = k;
                }
                *out.entry(new_tuple).or_insert(Complex64::ZERO) += coeff * amp;
            }
        }
        out.retain(|_, amp| amp.norm() >= self.tol.pruning);
        Ok(PureState {
            layout: Arc::clone(&self.layout),
            components: out,
            tol: self.tol,
        })
    }

    /// Rescale to unit norm. Errors on (numerically) zero states.
    pub fn renormalized(&self) -> Result<PureState> {
        let norm_sq = self.norm_sq();
        if norm_sq.sqrt() < self.tol.pruning {
            return Err(Error::EmptyState);
        }
        let inv = 1.0 / norm_sq.sqrt();
        let components = self
            .components
            .iter()
            .map(|(k, &v)| (k.clone(), v * inv))
            .collect();
        Ok(PureState {
            layout: Arc::clone(&self.layout),
            components,
            tol: self.tol,
        })
    }

    /// Partial trace over the complement of `keep`.
    pub fn reduced_density(&self, keep: &[impl AsRef<str>]) -> Result<DensityMatrix> {
        if keep.is_empty() {
            return Err(Error::EmptyKeepSet);
        }
        let keep_positions = self.layout.positions_sorted(keep)?;
        let traced = self.layout.complement(&keep_positions);
        let dim = self.layout.joint_dim(&keep_positions);
        let mut matrix = DMatrix::<Complex64>::zeros(dim, dim);

        // Group components by the traced-out part; each group contributes an
        // outer product of its kept-part amplitude vector.
        let mut groups: BTreeMap<Vec<usize>, Vec<(usize, Complex64)>> = BTreeMap::new();
        for (tuple, amp) in &self.components {
            let kept: Vec<usize> = keep_positions.iter().map(|&p| tuple[p]).collect();
            let rest: Vec<usize> = traced.iter().map(|&p| tuple[p]).collect();
            let j = self.layout.joint_index(&keep_positions, &kept);
            groups.entry(rest).or_default().push((j, *amp));
        }
        for entries in groups.values() {
            for &(i, a) in entries {
                for &(j, b) in entries {
                    matrix[(i, j)] += a * b.conj();
                }
            }
        }
        let targets = keep_positions
            .iter()
            .map(|&p| self.layout.subsystem(p).id().to_owned())
            .collect();
        Ok(DensityMatrix { targets, matrix })
    }
}

/// Reduced state of a subsystem subset: a Hermitian, trace-one matrix over
/// the joint basis of the kept subsystems in layout order.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    targets: Vec<String>,
    matrix: DMatrix<Complex64>,
}

impl DensityMatrix {
    pub fn targets(&self) -> &[String] {
        &self.targets
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    /// Real eigenvalues in descending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        // Hermitize first so the result is an exactly self-adjoint input.
        let h = (&self.matrix + self.matrix.adjoint()).scale(0.5);
        hermitian_eigenvalues(&h)
    }

    /// Frobenius distance to another reduced state over the same targets.
    pub fn frobenius_distance(&self, other: &DensityMatrix) -> Result<f64> {
        if self.targets != other.targets || self.matrix.shape() != other.matrix.shape() {
            return Err(Error::LayoutMismatch);
        }
        Ok((&self.matrix - &other.matrix).norm())
    }

    /// Deviation from the density-matrix contract: max of the trace error,
    /// the Hermiticity error, and the magnitude of the most negative
    /// eigenvalue.
    pub fn contract_deviation(&self) -> f64 {
        let trace_err = (self.trace() - 1.0).abs();
        let herm_err = (self.matrix.adjoint() - &self.matrix).norm();
        let min_eig = self
            .eigenvalues()
            .into_iter()
            .fold(f64::INFINITY, f64::min)
            .min(0.0)
            .abs();
        trace_err.max(herm_err).max(min_eig)
    }
}

/// Eigenvalues of a Hermitian matrix in descending order, recovered from the
/// SVD: σ_i with the sign of ⟨u_i, v_i⟩. nalgebra's symmetric eigensolver can
/// emit NaNs on sparse complex inputs, while its SVD is dependable.
pub(crate) fn hermitian_eigenvalues(h: &DMatrix<Complex64>) -> Vec<f64> {
    let svd = h.clone().svd(true, true);
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested Vᴴ");
    let mut eigs: Vec<f64> = (0..svd.singular_values.len())
        .map(|i| {
            let sign: Complex64 = u.column(i).dotc(&v_t.row(i).adjoint());
            svd.singular_values[i] * sign.re
        })
        .collect();
    eigs.sort_by(|a, b| b.partial_cmp(a).unwrap());
    eigs
}
