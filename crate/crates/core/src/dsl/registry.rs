use serde::{Deserialize, Serialize};

use super::DslError;

/// Named finite set of anchor points in state space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectSet {
    pub name: String,
    /// State slice the points live in; `None` means the full state.
    pub slice: Option<String>,
    pub points: Vec<Vec<f64>>,
}

impl ObjectSet {
    /// Shared dimensionality of the points, if the set is non-empty.
    pub fn dim(&self) -> Option<usize> {
        self.points.first().map(Vec::len)
    }
}

/// Object sets that quantifiers range over (hazards, unsafe cells, goals).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ObjectRegistry {
    sets: Vec<ObjectSet>,
}

impl ObjectRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(
        &mut self,
        name: impl Into<String>,
        slice: Option<&str>,
        points: Vec<Vec<f64>>,
    ) -> Result<(), DslError> {
        let name = name.into();
        if self.get(&name).is_some() {
            return Err(DslError::DuplicateSet(name));
        }
        if let Some(first) = points.first() {
            if let Some(bad) = points.iter().find(|p| p.len() != first.len()) {
                return Err(DslError::DimensionMismatch {
                    context: format!("set `{name}`"),
                    left: first.len(),
                    right: bad.len(),
                });
            }
        }
        if points.iter().flatten().any(|v| !v.is_finite()) {
            return Err(DslError::NonFiniteAnchor(name));
        }
        self.sets.push(ObjectSet {
            name,
            slice: slice.map(str::to_string),
            points,
        });
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&ObjectSet> {
        self.sets.iter().find(|s| s.name == name)
    }

    pub fn sets(&self) -> &[ObjectSet] {
        &self.sets
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }
}
