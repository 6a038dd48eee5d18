//! Subsystem layouts: named tensor factors with named basis labels.

use std::collections::HashMap;
use std::fmt;

use crate::error::{Error, Result};

/// One tensor factor: an id plus an ordered list of basis labels.
#[derive(Clone, Debug)]
pub struct Subsystem {
    id: String,
    labels: Vec<String>,
    index: HashMap<String, usize>,
}

impl Subsystem {
    fn new(id: String, labels: Vec<String>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::EmptyBasis(id));
        }
        let mut index = HashMap::with_capacity(labels.len());
        for (k, label) in labels.iter().enumerate() {
            if index.insert(label.clone(), k).is_some() {
                return Err(Error::DuplicateLabel {
                    subsystem: id,
                    label: label.clone(),
                });
            }
        }
        Ok(Subsystem { id, labels, index })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    pub fn label(&self, index: usize) -> &str {
        &self.labels[index]
    }

    pub fn label_index(&self, label: &str) -> Result<usize> {
        self.index.get(label).copied().ok_or_else(|| Error::UnknownLabel {
            subsystem: self.id.clone(),
            label: label.to_owned(),
        })
    }
}

impl PartialEq for Subsystem {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id && self.labels == other.labels
    }
}

impl Eq for Subsystem {}

/// Ordered list of subsystems making up the full tensor-product space.
///
/// The layout fixes the canonical ordering used everywhere: component tuples,
/// joint indices of operator targets, and report output all follow the
/// declaration order of subsystems and of labels within each subsystem.
#[derive(Clone, Debug)]
pub struct SubsystemLayout {
    subsystems: Vec<Subsystem>,
    by_id: HashMap<String, usize>,
}

impl SubsystemLayout {
    pub fn new<I, S, L, T>(subsystems: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, L)>,
        S: Into<String>,
        L: IntoIterator<Item = T>,
        T: Into<String>,
    {
        let mut subs = Vec::new();
        let mut by_id = HashMap::new();
        for (id, labels) in subsystems {
            let id = id.into();
            let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
            if by_id.insert(id.clone(), subs.len()).is_some() {
                return Err(Error::DuplicateSubsystemId(id));
            }
            subs.push(Subsystem::new(id, labels)?);
        }
        if subs.is_empty() {
            return Err(Error::EmptyKeepSet);
        }
        Ok(SubsystemLayout {
            subsystems: subs,
            by_id,
        })
    }

    pub fn len(&self) -> usize {
        self.subsystems.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subsystems.is_empty()
    }

    pub fn subsystems(&self) -> &[Subsystem] {
        &self.subsystems
    }

    pub fn subsystem(&self, position: usize) -> &Subsystem {
        &self.subsystems[position]
    }

    pub fn position(&self, id: &str) -> Result<usize> {
        self.by_id
            .get(id)
            .copied()
            .ok_or_else(|| Error::UnknownSubsystem(id.to_owned()))
    }

    pub fn contains(&self, id: &str) -> bool {
        self.by_id.contains_key(id)
    }

    /// Positions of the given subsystem ids, sorted into layout order.
    /// Rejects duplicates and unknown ids.
    pub fn positions_sorted(&self, ids: &[impl AsRef<str>]) -> Result<Vec<usize>> {
        let mut positions = Vec::with_capacity(ids.len());
        for id in ids {
            let p = self.position(id.as_ref())?;
            if positions.contains(&p) {
                return Err(Error::DuplicateSubsystemId(id.as_ref().to_owned()));
            }
            positions.push(p);
        }
        positions.sort_unstable();
        Ok(positions)
    }

    /// Complement of the given positions, in layout order.
    pub fn complement(&self, positions: &[usize]) -> Vec<usize> {
        (0..self.len()).filter(|p| !positions.contains(p)).collect()
    }

    /// Translate a full label tuple into layout indices.
    pub fn index_tuple(&self, labels: &[impl AsRef<str>]) -> Result<Vec<usize>> {
        if labels.len() != self.len() {
            return Err(Error::TupleLength {
                expected: self.len(),
                got: labels.len(),
            });
        }
        labels
            .iter()
            .zip(&self.subsystems)
            .map(|(label, sub)| sub.label_index(label.as_ref()))
            .collect()
    }

    /// Translate layout indices back into label strings.
    pub fn label_tuple(&self, indices: &[usize]) -> Vec<&str> {
        indices
            .iter()
            .zip(&self.subsystems)
            .map(|(&k, sub)| sub.label(k))
            .collect()
    }

    /// Joint dimension of the subsystems at the given positions.
    pub fn joint_dim(&self, positions: &[usize]) -> usize {
        positions.iter().map(|&p| self.subsystems[p].dim()).product()
    }

    /// Joint index of a sub-tuple over the given positions, last position
    /// fastest.
    pub fn joint_index(&self, positions: &[usize], indices: &[usize]) -> usize {
        debug_assert_eq!(positions.len(), indices.len());
        let mut joint = 0;
        for (&p, &k) in positions.iter().zip(indices) {
            joint = joint * self.subsystems[p].dim() + k;
        }
        joint
    }

    /// Inverse of [`joint_index`](Self::joint_index).
    pub fn split_joint_index(&self, positions: &[usize], mut joint: usize) -> Vec<usize> {
        let mut out = vec![0; positions.len()];
        for (slot, &p) in out.iter_mut().zip(positions).rev() {
            let d = self.subsystems[p].dim();
            *slot = joint % d;
            joint /= d;
        }
        out
    }
}

impl PartialEq for SubsystemLayout {
    fn eq(&self, other: &Self) -> bool {
        self.subsystems == other.subsystems
    }
}

impl Eq for SubsystemLayout {}

impl fmt::Display for SubsystemLayout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, sub) in self.subsystems.iter().enumerate() {
            if i > 0 {
                write!(f, " ⊗ ")?;
            }
            write!(f, "{}[{}]", sub.id(), sub.labels().join(","))?;
        }
        Ok(())
    }
}
