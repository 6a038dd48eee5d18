//! Operators acting on a declared subset of subsystems.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::statespace::SubsystemLayout;
use crate::tolerances::Tolerances;

/// What algebraic contract the operator's matrix satisfies.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OperatorKind {
    /// M†M = I.
    Unitary,
    /// M² = M and M† = M.
    Projector,
    /// Columns orthonormal on their support; used for basis-change context.
    Isometry,
}

impl std::fmt::Display for OperatorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            OperatorKind::Unitary => write!(f, "unitary"),
            OperatorKind::Projector => write!(f, "projector"),
            OperatorKind::Isometry => write!(f, "isometry"),
        }
    }
}

/// A square matrix over the joint basis of an ordered subsystem subset.
///
/// The joint index runs over the targets in their declared order with the
/// last target fastest, matching
/// [`SubsystemLayout::joint_index`](crate::statespace::SubsystemLayout::joint_index).
#[derive(Clone, Debug, PartialEq)]
pub struct LocalOperator {
    targets: Vec<String>,
    matrix: DMatrix<Complex64>,
    kind: OperatorKind,
}

fn identity_deviation(m: &DMatrix<Complex64>) -> f64 {
    let gram = m.adjoint() * m;
    let n = gram.nrows();
    let eye = DMatrix::<Complex64>::identity(n, n);
    (gram - eye).norm()
}

impl LocalOperator {
    /// Wrap a matrix as a unitary on the given targets, verifying M†M = I.
    pub fn unitary(
        targets: Vec<String>,
        matrix: DMatrix<Complex64>,
        tol: &Tolerances,
    ) -> Result<Self> {
        Self::checked(targets, matrix, OperatorKind::Unitary, tol)
    }

    /// Wrap a matrix as a projector, verifying M² = M and M† = M.
    pub fn projector(
        targets: Vec<String>,
        matrix: DMatrix<Complex64>,
        tol: &Tolerances,
    ) -> Result<Self> {
        Self::checked(targets, matrix, OperatorKind::Projector, tol)
    }

    /// Wrap a matrix as an isometry-context operator. The matrix must be
    /// square over the joint target basis; column orthonormality is checked
    /// on the nonzero columns only.
    pub fn isometry(
        targets: Vec<String>,
        matrix: DMatrix<Complex64>,
        tol: &Tolerances,
    ) -> Result<Self> {
        Self::checked(targets, matrix, OperatorKind::Isometry, tol)
    }

    fn checked(
        targets: Vec<String>,
        matrix: DMatrix<Complex64>,
        kind: OperatorKind,
        tol: &Tolerances,
    ) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::TargetMismatch(format!(
                "operator matrix is {}×{}, expected square",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        match kind {
            OperatorKind::Unitary => {
                let dev = identity_deviation(&matrix);
                if dev > tol.operator_algebra {
                    return Err(Error::NonUnitary { deviation: dev });
                }
            }
            OperatorKind::Projector => {
                let idem = (&matrix * &matrix - &matrix).norm();
                let herm = (matrix.adjoint() - &matrix).norm();
                let dev = idem.max(herm);
                if dev > tol.operator_algebra {
                    return Err(Error::NotProjector { deviation: dev });
                }
            }
            OperatorKind::Isometry => {
                // Orthonormality over the occupied columns.
                let gram = matrix.adjoint() * &matrix;
                let mut dev: f64 = 0.0;
                for j in 0..gram.ncols() {
                    let occupied = matrix.column(j).norm() > tol.pruning;
                    for i in 0..gram.nrows() {
                        let expected = if i == j && occupied { 1.0 } else { 0.0 };
                        dev = dev.max((gram[(i, j)] - Complex64::new(expected, 0.0)).norm());
                    }
                }
                if dev > tol.operator_algebra {
                    return Err(Error::NonUnitary { deviation: dev });
                }
            }
        }
        Ok(LocalOperator {
            targets,
            matrix,
            kind,
        })
    }

    /// Identity on the given targets of a layout.
    pub fn identity(layout: &SubsystemLayout, targets: &[impl AsRef<str>]) -> Result<Self> {
        let positions = layout.positions_sorted(targets)?;
        let ids = targets.iter().map(|t| t.as_ref().to_owned()).collect();
        let dim = layout.joint_dim(&positions);
        Ok(LocalOperator {
            targets: ids,
            matrix: DMatrix::identity(dim, dim),
            kind: OperatorKind::Unitary,
        })
    }

    pub fn targets(&self) -> &[String] {
        &self.targets
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    pub fn adjoint(&self) -> LocalOperator {
        LocalOperator {
            targets: self.targets.clone(),
            matrix: self.matrix.adjoint(),
            kind: self.kind,
        }
    }

    /// Positions of the targets inside `layout`, in the operator's declared
    /// order, verifying that each target exists and the joint dimension
    /// matches the matrix.
    pub(crate) fn target_positions(&self, layout: &SubsystemLayout) -> Result<Vec<usize>> {
        let mut positions = Vec::with_capacity(self.targets.len());
        for id in &self.targets {
            let p = layout
                .position(id)
                .map_err(|_| Error::TargetMismatch(format!("layout has no subsystem `{id}`")))?;
            if positions.contains(&p) {
                return Err(Error::TargetMismatch(format!("duplicate target `{id}`")));
            }
            positions.push(p);
        }
        let dim: usize = positions.iter().map(|&p| layout.subsystem(p).dim()).product();
        if dim != self.matrix.nrows() {
            return Err(Error::TargetMismatch(format!(
                "operator matrix dimension {} does not match joint target dimension {}",
                self.matrix.nrows(),
                dim
            )));
        }
        Ok(positions)
    }

    pub fn overlaps(&self, ids: &[impl AsRef<str>]) -> bool {
        ids.iter()
            .any(|id| self.targets.iter().any(|t| t == id.as_ref()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_unitary() {
        let m = DMatrix::from_row_slice(2, 2, &[
            Complex64::new(1.0, 0.0),
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(1.0, 0.0),
        ]);
        let err = LocalOperator::unitary(vec!["S".into()], m, &Tolerances::DEFAULT).unwrap_err();
        assert!(matches!(err, Error::NonUnitary { .. }));
    }

    #[test]
    fn rejects_non_projector() {
        let m = DMatrix::from_row_slice(2, 2, &[
            Complex64::new(0.5, 0.0),
            Complex64::new(0.1, 0.0),
            Complex64::new(0.1, 0.0),
            Complex64::new(0.5, 0.0),
        ]);
        let err = LocalOperator::projector(vec!["S".into()], m, &Tolerances::DEFAULT).unwrap_err();
        assert!(matches!(err, Error::NotProjector { .. }));
    }

    #[test]
    fn accepts_rank_one_projector() {
        let m = DMatrix::from_row_slice(2, 2, &[
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
        ]);
        let p = LocalOperator::projector(vec!["P".into()], m, &Tolerances::DEFAULT).unwrap();
        assert_eq!(p.kind(), OperatorKind::Projector);
    }
}
