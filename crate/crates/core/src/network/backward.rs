use super::loss::logit_gradient;
use super::{ForwardTrace, Layer, NetworkError, NetworkParams, Result};
use crate::numerics::{Axis, Matrix, Reduce, Scalar};

/// Exact gradients of the mean cross-entropy with respect to every weight and bias.
pub fn backward<T: Scalar>(
    params: &NetworkParams<T>,
    trace: &ForwardTrace<T>,
    inputs: &Matrix<T>,
    labels: &[usize],
) -> Result<NetworkParams<T>> {
    let n_hidden = params.num_hidden();
    let batch = inputs.rows();
    let consistent = trace.hidden.len() == n_hidden
        && trace.logits.shape() == (batch, params.num_classes())
        && trace
            .hidden
            .iter()
            .zip(&params.layers)
            .all(|(h, l)| h.shape() == (batch, l.weights.cols()))
        && inputs.cols() == params.input_dim();
    if !consistent {
        return Err(NetworkError::Shape(
            "forward trace does not match these parameters and inputs".into(),
        ));
    }

    let mut delta = logit_gradient(&trace.logits, labels)?;
    let mut grads: Vec<Layer<T>> = Vec::with_capacity(params.layers.len());
    for l in (0..params.layers.len()).rev() {
        let input = if l == 0 { inputs } else { &trace.hidden[l - 1] };
        let weights = input.matmul_tn(&delta)?;
        let bias = delta.reduce(Axis::Rows, Reduce::Sum)?;
        grads.push(Layer { weights, bias });
        if l > 0 {
            let mut next = delta.matmul_nt(&params.layers[l].weights)?;
            for (d, &a) in next.as_mut_slice().iter_mut().zip(input.as_slice()) {
                if !(a > T::ZERO) {
                    *d = T::ZERO;
                }
            }
            delta = next;
        }
    }
    grads.reverse();
    Ok(NetworkParams { layers: grads })
}
