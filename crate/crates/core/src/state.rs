//! State vectors and the schema that names their components.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Component {
    pub name: String,
    pub unit: String,
}

/// Names and units of state components plus named index slices
/// (e.g. `pos` = the position components).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateSchema {
    pub components: Vec<Component>,
    pub slices: Vec<(String, Vec<usize>)>,
}

impl StateSchema {
    pub fn new(components: &[(&str, &str)], slices: &[(&str, &[usize])]) -> Self {
        Self {
            components: components
                .iter()
                .map(|(n, u)| Component {
                    name: n.to_string(),
                    unit: u.to_string(),
                })
                .collect(),
            slices: slices.iter().map(|(n, idx)| (n.to_string(), idx.to_vec())).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn slice(&self, name: &str) -> Option<&[usize]> {
        self.slices.iter().find(|(n, _)| n == name).map(|(_, idx)| idx.as_slice())
    }
}

/// Flat real-valued state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateVector(pub Vec<f64>);

impl StateVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

impl From<Vec<f64>> for StateVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}
