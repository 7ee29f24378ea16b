use super::{NetworkError, NetworkParams, Result};
use crate::numerics::{Matrix, Scalar};

/// Post-activation output of every hidden layer plus the logits.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace<T = f32> {
    /// `hidden[l]` is `batch × hidden_dims[l]`, after ReLU.
    pub hidden: Vec<Matrix<T>>,
    /// `batch × num_classes`, no activation.
    pub logits: Matrix<T>,
}

impl<T: Scalar> ForwardTrace<T> {
    /// Last-hidden-layer features (the inputs themselves when there is no hidden layer).
    pub fn features<'a>(&'a self, inputs: &'a Matrix<T>) -> &'a Matrix<T> {
        self.hidden.last().unwrap_or(inputs)
    }
}

pub fn forward<T: Scalar>(params: &NetworkParams<T>, inputs: &Matrix<T>) -> Result<ForwardTrace<T>> {
    if params.layers.is_empty() {
        return Err(NetworkError::Shape("network has no layers".into()));
    }
    if inputs.cols() != params.input_dim() {
        return Err(NetworkError::Shape(format!(
            "inputs have {} columns, network expects {}",
            inputs.cols(),
            params.input_dim()
        )));
    }
    let n_hidden = params.num_hidden();
    let mut hidden = Vec::with_capacity(n_hidden);
    for (l, layer) in params.layers.iter().enumerate() {
        let prev = if l == 0 { inputs } else { &hidden[l - 1] };
        let mut z = prev.matmul(&layer.weights)?;
        z.add_row_inplace(&layer.bias)?;
        if l == n_hidden {
            return Ok(ForwardTrace { hidden, logits: z });
        }
        for v in z.as_mut_slice() {
            if !(*v > T::ZERO) {
                *v = T::ZERO;
            }
        }
        hidden.push(z);
    }
    unreachable!("loop returns at the classification layer")
}
