use serde::{Deserialize, Serialize};

use super::{ParamSet, TensorError};

/// Plain gradient descent: `param - learning_rate * grad`.
///
/// Non-finite gradients reject the whole step and leave `params` untouched.
pub fn sgd_step(params: &ParamSet, grads: &ParamSet, learning_rate: f64) -> Result<ParamSet, TensorError> {
    check_step(params, grads, learning_rate)?;
    let mut out = params.clone();
    out.add_scaled(grads, -learning_rate)?;
    out.check_finite()?;
    Ok(out)
}

fn check_step(params: &ParamSet, grads: &ParamSet, learning_rate: f64) -> Result<(), TensorError> {
    if !(learning_rate >= 0.0 && learning_rate.is_finite()) {
        return Err(TensorError::InvalidConfig(format!(
            "learning rate must be finite and non-negative, got {learning_rate}"
        )));
    }
    params.check_layout(grads)?;
    grads.check_finite().map_err(|e| match e {
        TensorError::NonFiniteEntry(name) => TensorError::RejectedUpdate(name),
        other => other,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

/// Adam moments for one parameter set.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub m: ParamSet,
    pub v: ParamSet,
    pub t: u64,
}

impl Adam {
    pub fn new(params: &ParamSet) -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: params.zeros_like(),
            v: params.zeros_like(),
            t: 0,
        }
    }

    /// One bias-corrected Adam update in place. On error nothing changes.
    pub fn step(&mut self, params: &mut ParamSet, grads: &ParamSet, learning_rate: f64) -> Result<(), TensorError> {
        check_step(params, grads, learning_rate)?;
        self.m.check_layout(grads)?;
        self.t += 1;
        let t = self.t as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
        for (((p, g), m), v) in params
            .arrays_mut()
            .zip(grads.arrays())
            .zip(self.m.arrays_mut())
            .zip(self.v.arrays_mut())
        {
            let (p, g, m, v) = (p.data_mut(), g.data(), m.data_mut(), v.data_mut());
            for i in 0..p.len() {
                m[i] = b1 * m[i] + (1.0 - b1) * g[i];
                v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                p[i] -= learning_rate * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

/// Either optimizer behind one interface.
#[derive(Debug, Clone, PartialEq)]
pub enum Optimizer {
    Sgd,
    Adam(Adam),
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, params: &ParamSet) -> Self {
        match kind {
            OptimizerKind::Sgd => Optimizer::Sgd,
            OptimizerKind::Adam => Optimizer::Adam(Adam::new(params)),
        }
    }

    pub fn step(&mut self, params: &mut ParamSet, grads: &ParamSet, learning_rate: f64) -> Result<(), TensorError> {
        match self {
            Optimizer::Sgd => {
                *params = sgd_step(params, grads, learning_rate)?;
                Ok(())
            }
            Optimizer::Adam(adam) => adam.step(params, grads, learning_rate),
        }
    }
}
