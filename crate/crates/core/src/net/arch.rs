use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::linalg::Real;
use crate::error::{Error, Result};
use crate::seed::{self, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Identity,
}

impl Activation {
    #[inline]
    pub(crate) fn apply<T: Real>(self, x: T) -> T {
        match self {
            Activation::Tanh => x.act_tanh(),
            Activation::Identity => x,
        }
    }

    /// Derivative expressed through the activation's output.
    #[inline]
    pub(crate) fn derivative_from_output<T: Real>(self, y: T) -> T {
        match self {
            Activation::Tanh => T::one() - y * y,
            Activation::Identity => T::one(),
        }
    }
}

/// Layer sizes of the two-conv, three-dense regressor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetShape {
    pub input_len: usize,
    pub in_channels: usize,
    pub conv1_filters: usize,
    pub conv1_width: usize,
    pub conv2_filters: usize,
    pub conv2_width: usize,
    pub dense1: usize,
    pub dense2: usize,
    pub outputs: usize,
    pub dense1_activation: Activation,
    pub dense2_activation: Activation,
}

impl Default for NetShape {
    fn default() -> Self {
        NetShape {
            input_len: 500,
            in_channels: 2,
            conv1_filters: 100,
            conv1_width: 50,
            conv2_filters: 100,
            conv2_width: 10,
            dense1: 100,
            dense2: 10,
            outputs: 2,
            dense1_activation: Activation::Tanh,
            dense2_activation: Activation::Identity,
        }
    }
}

/// Parameter tensors in storage order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tensor {
    Conv1Weight,
    Conv1Bias,
    Conv2Weight,
    Conv2Bias,
    Dense1Weight,
    Dense1Bias,
    Dense2Weight,
    Dense2Bias,
    Dense3Weight,
    Dense3Bias,
}

impl Tensor {
    pub const ALL: [Tensor; 10] = [
        Tensor::Conv1Weight,
        Tensor::Conv1Bias,
        Tensor::Conv2Weight,
        Tensor::Conv2Bias,
        Tensor::Dense1Weight,
        Tensor::Dense1Bias,
        Tensor::Dense2Weight,
        Tensor::Dense2Bias,
        Tensor::Dense3Weight,
        Tensor::Dense3Bias,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Tensor::Conv1Weight => "conv1.weight",
            Tensor::Conv1Bias => "conv1.bias",
            Tensor::Conv2Weight => "conv2.weight",
            Tensor::Conv2Bias => "conv2.bias",
            Tensor::Dense1Weight => "dense1.weight",
            Tensor::Dense1Bias => "dense1.bias",
            Tensor::Dense2Weight => "dense2.weight",
            Tensor::Dense2Bias => "dense2.bias",
            Tensor::Dense3Weight => "dense3.weight",
            Tensor::Dense3Bias => "dense3.bias",
        }
    }

    pub fn is_bias(self) -> bool {
        matches!(
            self,
            Tensor::Conv1Bias | Tensor::Conv2Bias | Tensor::Dense1Bias | Tensor::Dense2Bias | Tensor::Dense3Bias
        )
    }
}

impl NetShape {
    /// Miniature variant for finite-difference checks.
    pub fn shrunk() -> Self {
        NetShape {
            input_len: 20,
            in_channels: 2,
            conv1_filters: 3,
            conv1_width: 4,
            conv2_filters: 2,
            conv2_width: 3,
            dense1: 5,
            dense2: 4,
            outputs: 2,
            ..NetShape::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [
            self.input_len,
            self.in_channels,
            self.conv1_filters,
            self.conv1_width,
            self.conv2_filters,
            self.conv2_width,
            self.dense1,
            self.dense2,
            self.outputs,
        ];
        if dims.contains(&0) {
            return Err(Error::Shape(format!("zero-sized layer in {self:?}")));
        }
        if self.input_len < self.conv1_width + self.conv2_width - 1 {
            return Err(Error::Shape(format!(
                "input length {} too short for convolution widths {} and {}",
                self.input_len, self.conv1_width, self.conv2_width
            )));
        }
        Ok(())
    }

    /// Rows after the first valid convolution.
    pub fn conv1_len(&self) -> usize {
        self.input_len - self.conv1_width + 1
    }

    pub fn conv2_len(&self) -> usize {
        self.conv1_len() - self.conv2_width + 1
    }

    pub fn flat_len(&self) -> usize {
        self.conv2_len() * self.conv2_filters
    }

    pub fn input_size(&self) -> usize {
        self.input_len * self.in_channels
    }

    pub fn tensor_len(&self, t: Tensor) -> usize {
        match t {
            Tensor::Conv1Weight => self.conv1_filters * self.conv1_width * self.in_channels,
            Tensor::Conv1Bias => self.conv1_filters,
            Tensor::Conv2Weight => self.conv2_filters * self.conv2_width * self.conv1_filters,
            Tensor::Conv2Bias => self.conv2_filters,
            Tensor::Dense1Weight => self.dense1 * self.flat_len(),
            Tensor::Dense1Bias => self.dense1,
            Tensor::Dense2Weight => self.dense2 * self.dense1,
            Tensor::Dense2Bias => self.dense2,
            Tensor::Dense3Weight => self.outputs * self.dense2,
            Tensor::Dense3Bias => self.outputs,
        }
    }

    /// `(fan_in, fan_out)` of a weight tensor.
    pub fn fans(&self, t: Tensor) -> (usize, usize) {
        match t {
            Tensor::Conv1Weight | Tensor::Conv1Bias => {
                (self.conv1_width * self.in_channels, self.conv1_width * self.conv1_filters)
            }
            Tensor::Conv2Weight | Tensor::Conv2Bias => {
                (self.conv2_width * self.conv1_filters, self.conv2_width * self.conv2_filters)
            }
            Tensor::Dense1Weight | Tensor::Dense1Bias => (self.flat_len(), self.dense1),
            Tensor::Dense2Weight | Tensor::Dense2Bias => (self.dense1, self.dense2),
            Tensor::Dense3Weight | Tensor::Dense3Bias => (self.dense2, self.outputs),
        }
    }

    pub fn offset(&self, t: Tensor) -> usize {
        Tensor::ALL.iter().take_while(|&&x| x != t).map(|&x| self.tensor_len(x)).sum()
    }

    pub fn param_count(&self) -> usize {
        Tensor::ALL.iter().map(|&t| self.tensor_len(t)).sum()
    }
}

/// All weights and biases in one flat buffer, laid out tensor by tensor.
///
/// Convolution filters are stored `[filter][tap][channel]`, dense weights
/// `[out][in]`. Gradients use the same type.
#[derive(Debug, Clone, PartialEq)]
pub struct NetParams<T> {
    pub shape: NetShape,
    pub data: Vec<T>,
}

impl<T: Real> NetParams<T> {
    pub fn zeros(shape: NetShape) -> Self {
        NetParams { shape, data: vec![T::zero(); shape.param_count()] }
    }

    pub fn from_data(shape: NetShape, data: Vec<T>) -> Result<Self> {
        shape.validate()?;
        if data.len() != shape.param_count() {
            return Err(Error::Shape(format!(
                "expected {} parameters, got {}",
                shape.param_count(),
                data.len()
            )));
        }
        Ok(NetParams { shape, data })
    }

    pub fn tensor(&self, t: Tensor) -> &[T] {
        let o = self.shape.offset(t);
        &self.data[o..o + self.shape.tensor_len(t)]
    }

    pub fn tensor_mut(&mut self, t: Tensor) -> &mut [T] {
        let o = self.shape.offset(t);
        let len = self.shape.tensor_len(t);
        &mut self.data[o..o + len]
    }

    pub fn fill_zero(&mut self) {
        self.data.iter_mut().for_each(|v| *v = T::zero());
    }

    pub fn add_assign(&mut self, other: &NetParams<T>) {
        assert_eq!(self.shape, other.shape);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += *b;
        }
    }

    pub fn scale(&mut self, factor: T) {
        self.data.iter_mut().for_each(|v| *v *= factor);
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn cast<U: Real>(&self) -> NetParams<U> {
        NetParams { shape: self.shape, data: self.data.iter().map(|v| U::of(v.f64())).collect() }
    }
}

/// Glorot-uniform weights, zero biases. Each tensor draws from its own stream.
pub fn init_network<T: Real>(shape: NetShape, seed: u64) -> Result<NetParams<T>> {
    shape.validate()?;
    let mut params = NetParams::zeros(shape);
    for (layer, t) in Tensor::ALL.into_iter().enumerate() {
        if t.is_bias() {
            continue;
        }
        let (fan_in, fan_out) = shape.fans(t);
        let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let mut rng = seed::derived_rng(seed, Stream::Init, &[layer as u64]);
        for v in params.tensor_mut(t) {
            *v = T::of(rng.random_range(-bound..bound));
        }
    }
    Ok(params)
}
