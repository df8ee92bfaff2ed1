use super::{RealArray, TensorError};

/// Ordered, uniquely named collection of parameter arrays for one network.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSet {
    entries: Vec<(String, RealArray)>,
    pub version_tag: String,
}

impl ParamSet {
    pub fn new(version_tag: impl Into<String>) -> Self {
        Self {
            entries: Vec::new(),
            version_tag: version_tag.into(),
        }
    }

    pub fn push(&mut self, name: impl Into<String>, array: RealArray) -> Result<(), TensorError> {
        let name = name.into();
        if self.get(&name).is_some() {
            return Err(TensorError::DuplicateName(name));
        }
        self.entries.push((name, array));
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&RealArray> {
        self.entries.iter().find(|(n, _)| n == name).map(|(_, a)| a)
    }

    pub fn entries(&self) -> &[(String, RealArray)] {
        &self.entries
    }

    pub fn arrays(&self) -> impl Iterator<Item = &RealArray> {
        self.entries.iter().map(|(_, a)| a)
    }

    pub fn arrays_mut(&mut self) -> impl Iterator<Item = &mut RealArray> {
        self.entries.iter_mut().map(|(_, a)| a)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Total number of scalar parameters.
    pub fn num_scalars(&self) -> usize {
        self.arrays().map(RealArray::len).sum()
    }

    /// A set with the same names and shapes, every entry zero.
    pub fn zeros_like(&self) -> Self {
        Self {
            entries: self
                .entries
                .iter()
                .map(|(n, a)| (n.clone(), RealArray::zeros(a.shape().to_vec())))
                .collect(),
            version_tag: self.version_tag.clone(),
        }
    }

    /// True when both sets have the same names and shapes in the same order.
    pub fn same_layout(&self, other: &ParamSet) -> bool {
        self.entries.len() == other.entries.len()
            && self
                .entries
                .iter()
                .zip(&other.entries)
                .all(|((na, a), (nb, b))| na == nb && a.shape() == b.shape())
    }

    pub(crate) fn check_layout(&self, other: &ParamSet) -> Result<(), TensorError> {
        if self.same_layout(other) {
            Ok(())
        } else {
            Err(TensorError::LayoutMismatch)
        }
    }

    pub fn check_finite(&self) -> Result<(), TensorError> {
        for (name, a) in &self.entries {
            a.check_finite().map_err(|_| TensorError::NonFiniteEntry(name.clone()))?;
        }
        Ok(())
    }

    pub fn scale(&mut self, factor: f64) {
        self.arrays_mut().for_each(|a| a.scale(factor));
    }

    /// `self += factor * other` entry by entry.
    pub fn add_scaled(&mut self, other: &ParamSet, factor: f64) -> Result<(), TensorError> {
        self.check_layout(other)?;
        for (a, (_, b)) in self.arrays_mut().zip(&other.entries) {
            a.add_scaled(b, factor)?;
        }
        Ok(())
    }

    /// Copy with every entry name prefixed, e.g. `"pi."`.
    pub fn with_prefix(&self, prefix: &str) -> ParamSet {
        ParamSet {
            entries: self
                .entries
                .iter()
                .map(|(n, a)| (format!("{prefix}{n}"), a.clone()))
                .collect(),
            version_tag: self.version_tag.clone(),
        }
    }

    /// Entries whose name starts with `prefix`, with the prefix removed.
    pub fn strip_prefix(&self, prefix: &str) -> ParamSet {
        ParamSet {
            entries: self
                .entries
                .iter()
                .filter_map(|(n, a)| n.strip_prefix(prefix).map(|s| (s.to_string(), a.clone())))
                .collect(),
            version_tag: self.version_tag.clone(),
        }
    }

    /// Largest absolute entry across all arrays.
    pub fn max_abs(&self) -> f64 {
        self.arrays()
            .flat_map(|a| a.data().iter())
            .fold(0.0, |m, v| m.max(v.abs()))
    }
}
