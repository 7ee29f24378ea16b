use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{NetworkError, NetworkParams, Result};
use crate::numerics::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LrSchedule {
    /// `base_lr · ½(1 + cos(π t / t_max))`
    #[default]
    Cosine,
    Constant,
}

/// Classical momentum buffers plus the schedule position.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState<T = f32> {
    pub velocity: NetworkParams<T>,
    pub momentum: f64,
    pub base_lr: f64,
    pub schedule: LrSchedule,
    pub t: u64,
    pub t_max: u64,
}

impl<T: Scalar> OptimizerState<T> {
    pub fn new(params: &NetworkParams<T>, momentum: f64, base_lr: f64, t_max: u64) -> Result<Self> {
        if !(0.0..1.0).contains(&momentum) {
            return Err(NetworkError::InvalidConfig(format!(
                "momentum must be in [0, 1), got {momentum}"
            )));
        }
        if !(base_lr.is_finite() && base_lr >= 0.0) {
            return Err(NetworkError::InvalidConfig(format!(
                "learning rate must be finite and >= 0, got {base_lr}"
            )));
        }
        let mut velocity = params.clone();
        for l in &mut velocity.layers {
            l.weights.as_mut_slice().fill(T::ZERO);
            l.bias.as_mut_slice().fill(T::ZERO);
        }
        Ok(Self {
            velocity,
            momentum,
            base_lr,
            schedule: LrSchedule::Cosine,
            t: 0,
            t_max,
        })
    }

    pub fn with_schedule(mut self, schedule: LrSchedule) -> Self {
        self.schedule = schedule;
        self
    }
}

/// Learning rate for the current iteration `state.t`.
pub fn cosine_lr<T: Scalar>(state: &OptimizerState<T>) -> Result<f64> {
    if state.t > state.t_max {
        return Err(NetworkError::PastHorizon {
            t: state.t,
            t_max: state.t_max,
        });
    }
    Ok(match state.schedule {
        LrSchedule::Constant => state.base_lr,
        LrSchedule::Cosine if state.t_max == 0 => state.base_lr,
        LrSchedule::Cosine => {
            state.base_lr * 0.5 * (1.0 + (PI * state.t as f64 / state.t_max as f64).cos())
        }
    })
}

/// `v ← μ·v + g; w ← w − lr(t)·v; t ← t + 1`.
///
/// Nothing is modified if any gradient entry is non-finite.
pub fn sgd_momentum_step<T: Scalar>(
    params: &mut NetworkParams<T>,
    grads: &NetworkParams<T>,
    state: &mut OptimizerState<T>,
) -> Result<()> {
    if !params.same_shape(grads) || !params.same_shape(&state.velocity) {
        return Err(NetworkError::Shape(
            "parameters, gradients and momentum buffers differ in shape".into(),
        ));
    }
    if let Some(layer) = grads
        .layers
        .iter()
        .position(|l| !(l.weights.all_finite() && l.bias.all_finite()))
    {
        return Err(NetworkError::NonFiniteGradient {
            layer,
            iteration: state.t,
        });
    }
    let lr = T::from_f64(cosine_lr(state)?);
    let mu = T::from_f64(state.momentum);
    for ((p, g), v) in params
        .layers
        .iter_mut()
        .zip(&grads.layers)
        .zip(&mut state.velocity.layers)
    {
        for (w, (gi, vi)) in p
            .weights
            .as_mut_slice()
            .iter_mut()
            .zip(g.weights.as_slice().iter().zip(v.weights.as_mut_slice()))
        {
            *vi = mu * *vi + *gi;
            *w -= lr * *vi;
        }
        for (w, (gi, vi)) in p
            .bias
            .as_mut_slice()
            .iter_mut()
            .zip(g.bias.as_slice().iter().zip(v.bias.as_mut_slice()))
        {
            *vi = mu * *vi + *gi;
            *w -= lr * *vi;
        }
    }
    state.t += 1;
    Ok(())
}
