//! Fully connected ReLU networks trained with hand-written backpropagation.
//!
//! Layout convention: activations are `batch × width`, weights are
//! `fan_in × fan_out`, so a layer computes `a · W + b`.

mod backward;
mod forward;
mod loss;
mod optim;
mod train;

pub use backward::backward;
pub use forward::{forward, ForwardTrace};
pub use loss::{cross_entropy_loss, softmax_rows};
pub use optim::{cosine_lr, sgd_momentum_step, LrSchedule, OptimizerState};
pub use train::{
    classification_error, evaluate, train_loop, Snapshot, StopReason, TrainConfig, TrainFailure,
    TrainOutcome, Trainer,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::{sample_gaussian, Matrix, NumericsError, Rng, Scalar};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetworkError {
    #[error("invalid architecture: {0}")]
    InvalidArchitecture(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("label {label} out of range for {num_classes} classes (row {row})")]
    LabelOutOfRange {
        row: usize,
        label: usize,
        num_classes: usize,
    },
    #[error("non-finite gradient in layer {layer} at iteration {iteration}")]
    NonFiniteGradient { layer: usize, iteration: u64 },
    #[error("iteration {t} is past the schedule horizon {t_max}")]
    PastHorizon { t: u64, t_max: u64 },
    #[error("invalid training setup: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

pub type Result<T> = std::result::Result<T, NetworkError>;

/// Shape of a ReLU MLP: `input_dim → hidden_dims… → num_classes`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MlpArchitecture {
    pub input_dim: usize,
    #[serde(default = "default_hidden")]
    pub hidden_dims: Vec<usize>,
    pub num_classes: usize,
}

fn default_hidden() -> Vec<usize> {
    vec![256, 256, 256]
}

impl MlpArchitecture {
    pub fn new(input_dim: usize, hidden_dims: Vec<usize>, num_classes: usize) -> Result<Self> {
        let arch = Self {
            input_dim,
            hidden_dims,
            num_classes,
        };
        arch.validate()?;
        Ok(arch)
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.hidden_dims.iter().any(|&d| d == 0) {
            return Err(NetworkError::InvalidArchitecture(
                "all layer widths must be at least 1".into(),
            ));
        }
        if self.num_classes < 2 {
            return Err(NetworkError::InvalidArchitecture(format!(
                "need at least 2 classes, got {}",
                self.num_classes
            )));
        }
        Ok(())
    }

    /// `(fan_in, fan_out)` for every affine layer, classifier last.
    pub fn layer_shapes(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.hidden_dims.len() + 2);
        dims.push(self.input_dim);
        dims.extend_from_slice(&self.hidden_dims);
        dims.push(self.num_classes);
        dims.windows(2).map(|w| (w[0], w[1])).collect()
    }

    /// Width of the last hidden layer (the feature dimension), or the input
    /// width for a network with no hidden layers.
    pub fn feature_dim(&self) -> usize {
        self.hidden_dims.last().copied().unwrap_or(self.input_dim)
    }
}

/// One affine layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer<T = f32> {
    /// `fan_in × fan_out`
    pub weights: Matrix<T>,
    /// `1 × fan_out`
    pub bias: Matrix<T>,
}

impl<T: Scalar> Layer<T> {
    pub fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Self {
            weights: Matrix::zeros(fan_in, fan_out),
            bias: Matrix::zeros(1, fan_out),
        }
    }
}

/// Weights and biases of every layer, classifier last. Gradients use the same type.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams<T = f32> {
    pub layers: Vec<Layer<T>>,
}

impl<T: Scalar> NetworkParams<T> {
    pub fn zeros(arch: &MlpArchitecture) -> Self {
        Self {
            layers: arch
                .layer_shapes()
                .into_iter()
                .map(|(i, o)| Layer::zeros(i, o))
                .collect(),
        }
    }

    pub fn num_hidden(&self) -> usize {
        self.layers.len().saturating_sub(1)
    }

    pub fn input_dim(&self) -> usize {
        self.layers.first().map_or(0, |l| l.weights.rows())
    }

    pub fn num_classes(&self) -> usize {
        self.layers.last().map_or(0, |l| l.weights.cols())
    }

    /// Checks that the layer shapes match `arch` exactly.
    pub fn check_arch(&self, arch: &MlpArchitecture) -> Result<()> {
        let expected = arch.layer_shapes();
        let got: Vec<_> = self.layers.iter().map(|l| l.weights.shape()).collect();
        if expected != got || self.layers.iter().any(|l| l.bias.shape() != (1, l.weights.cols()))
        {
            return Err(NetworkError::Shape(format!(
                "parameters have layer shapes {got:?}, architecture expects {expected:?}"
            )));
        }
        Ok(())
    }

    pub fn all_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.all_finite() && l.bias.all_finite())
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.layers.len() == other.layers.len()
            && self.layers.iter().zip(&other.layers).all(|(a, b)| {
                a.weights.shape() == b.weights.shape() && a.bias.shape() == b.bias.shape()
            })
    }

    /// Flat view over every parameter, layer by layer, weights before bias.
    pub fn iter_values(&self) -> impl Iterator<Item = T> + '_ {
        self.layers.iter().flat_map(|l| {
            l.weights
                .as_slice()
                .iter()
                .chain(l.bias.as_slice())
                .copied()
        })
    }

    pub fn cast<U: Scalar>(&self) -> NetworkParams<U> {
        NetworkParams {
            layers: self
                .layers
                .iter()
                .map(|l| Layer {
                    weights: l.weights.cast(),
                    bias: l.bias.cast(),
                })
                .collect(),
        }
    }
}

/// Weight initialization law.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitScheme {
    /// Gaussian weights with `std = sqrt(2 / fan_in)`, zero biases.
    #[default]
    He,
    /// Weights and biases uniform on `±1 / sqrt(fan_in)`, the default of
    /// common deep-learning frameworks for linear layers.
    UniformFanIn,
}

impl InitScheme {
    fn layer<T: Scalar>(self, fan_in: usize, fan_out: usize, rng: &mut Rng) -> Result<Layer<T>> {
        match self {
            InitScheme::He => Ok(Layer {
                weights: sample_gaussian(rng, fan_in, fan_out, 0.0, (2.0 / fan_in as f64).sqrt())?,
                bias: Matrix::zeros(1, fan_out),
            }),
            InitScheme::UniformFanIn => {
                let bound = 1.0 / (fan_in as f64).sqrt();
                let mut draw = |n: usize| -> Vec<T> {
                    (0..n)
                        .map(|_| T::from_f64(bound * (2.0 * rng.uniform() - 1.0)))
                        .collect()
                };
                let weights = draw(fan_in * fan_out);
                let bias = draw(fan_out);
                Ok(Layer {
                    weights: Matrix::from_vec(fan_in, fan_out, weights)?,
                    bias: Matrix::from_vec(1, fan_out, bias)?,
                })
            }
        }
    }
}

/// He-Gaussian weights (`std = sqrt(2 / fan_in)`) and zero biases.
pub fn init_params<T: Scalar>(arch: &MlpArchitecture, rng: &mut Rng) -> Result<NetworkParams<T>> {
    init_params_with(arch, InitScheme::He, rng)
}

pub fn init_params_with<T: Scalar>(
    arch: &MlpArchitecture,
    scheme: InitScheme,
    rng: &mut Rng,
) -> Result<NetworkParams<T>> {
    arch.validate()?;
    let layers = arch
        .layer_shapes()
        .into_iter()
        .map(|(fan_in, fan_out)| scheme.layer(fan_in, fan_out, rng))
        .collect::<Result<Vec<_>>>()?;
    Ok(NetworkParams { layers })
}

/// Replaces the classification layer with a freshly initialized one for
/// `num_classes` outputs, keeping every hidden layer.
pub fn reinit_head<T: Scalar>(
    params: &NetworkParams<T>,
    num_classes: usize,
    scheme: InitScheme,
    rng: &mut Rng,
) -> Result<NetworkParams<T>> {
    if num_classes < 2 {
        return Err(NetworkError::InvalidArchitecture(format!(
            "need at least 2 classes, got {num_classes}"
        )));
    }
    let fan_in = params
        .layers
        .last()
        .map(|l| l.weights.rows())
        .ok_or_else(|| NetworkError::Shape("network has no layers".into()))?;
    let mut layers = params.layers[..params.layers.len() - 1].to_vec();
    layers.push(scheme.layer(fan_in, num_classes, rng)?);
    Ok(NetworkParams { layers })
}
