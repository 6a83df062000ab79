//! Layer and network descriptions shared by every engine.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::real::Real;
use crate::representation::ReprKind;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Identity,
    Relu,
}

impl Activation {
    #[inline]
    pub fn apply<T: Real>(self, v: T) -> T {
        match self {
            Activation::Identity => v,
            Activation::Relu => v.max(T::zero()),
        }
    }
}

/// Same-padded, stride-1 convolution with an odd square kernel.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvLayer<T> {
    pub kernel: usize,
    pub c_in: usize,
    pub c_out: usize,
    /// Indexed `(k_y, k_x, c_in, c_out)`, row-major.
    pub weights: Vec<T>,
    pub bias: Vec<T>,
    pub activation: Activation,
}

impl<T: Real> ConvLayer<T> {
    /// The `c_in x c_out` weight block of kernel tap `tap`.
    #[inline]
    pub fn tap(&self, tap: usize) -> &[T] {
        let n = self.c_in * self.c_out;
        &self.weights[tap * n..(tap + 1) * n]
    }
}

/// Dense head: `out = weights * input + bias` with `weights` stored `(c_out, c_in)` row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct FcLayer<T> {
    pub c_in: usize,
    pub c_out: usize,
    pub weights: Vec<T>,
    pub bias: Vec<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Layer<T> {
    Conv(ConvLayer<T>),
    /// Kernel size equals stride.
    MaxPool { kernel: usize },
    Relu,
    Fc(FcLayer<T>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayerKind {
    Conv,
    MaxPool,
    Relu,
    Fc,
}

impl LayerKind {
    pub fn name(self) -> &'static str {
        match self {
            LayerKind::Conv => "conv",
            LayerKind::MaxPool => "maxpool",
            LayerKind::Relu => "relu",
            LayerKind::Fc => "fc",
        }
    }
}

impl<T> Layer<T> {
    pub fn kind(&self) -> LayerKind {
        match self {
            Layer::Conv(_) => LayerKind::Conv,
            Layer::MaxPool { .. } => LayerKind::MaxPool,
            Layer::Relu => LayerKind::Relu,
            Layer::Fc(_) => LayerKind::Fc,
        }
    }
}

/// Spatial shape flowing between layers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shape {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NetworkSpec<T> {
    pub name: String,
    pub input_width: usize,
    pub input_height: usize,
    pub input_channels: usize,
    pub repr: ReprKind,
    pub window: usize,
    pub layers: Vec<Layer<T>>,
}

#[derive(Debug, Error, PartialEq)]
pub enum NetworkError {
    #[error("layer {layer}: expected {expected} input channels, got {got}")]
    ChannelMismatch { layer: usize, expected: usize, got: usize },
    #[error("layer {layer}: pooling kernel {kernel} does not divide {width}x{height}")]
    NonDivisiblePool { layer: usize, kernel: usize, width: usize, height: usize },
    #[error("layer {layer}: kernel size {kernel} must be odd and positive")]
    BadKernel { layer: usize, kernel: usize },
    #[error("layer {layer}: {what} has {got} values, expected {expected}")]
    TensorShape { layer: usize, what: &'static str, expected: usize, got: usize },
    #[error("network must end with a fully connected layer")]
    MissingHead,
    #[error("layer {layer}: fully connected layer must be last")]
    HeadNotLast { layer: usize },
    #[error("input channels {got} do not match representation {repr:?} ({expected})")]
    ReprChannels { repr: ReprKind, expected: usize, got: usize },
    #[error("empty input resolution")]
    EmptyInput,
    #[error("representation is {got_w}x{got_h}x{got_c}, network expects {w}x{h}x{c}")]
    InputShape { w: usize, h: usize, c: usize, got_w: usize, got_h: usize, got_c: usize },
}

impl<T: Real> NetworkSpec<T> {
    pub fn input_shape(&self) -> Shape {
        Shape { width: self.input_width, height: self.input_height, channels: self.input_channels }
    }

    /// Output shape of every layer; `shapes()[i]` is what layer `i` produces.
    /// The head's shape is `1 x 1 x c_out`.
    pub fn shapes(&self) -> Result<Vec<Shape>, NetworkError> {
        self.validate()?;
        let mut s = self.input_shape();
        let mut out = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            s = match layer {
                Layer::Conv(c) => Shape { channels: c.c_out, ..s },
                Layer::MaxPool { kernel } => Shape { width: s.width / kernel, height: s.height / kernel, ..s },
                Layer::Relu => s,
                Layer::Fc(f) => Shape { width: 1, height: 1, channels: f.c_out },
            };
            out.push(s);
        }
        Ok(out)
    }

    /// Checks the channel chain, kernel parity, tensor sizes, pooling divisibility
    /// and that the network ends in exactly one fully connected head.
    pub fn validate(&self) -> Result<(), NetworkError> {
        if self.input_width == 0 || self.input_height == 0 || self.input_channels == 0 {
            return Err(NetworkError::EmptyInput);
        }
        if self.input_channels != self.repr.channels() {
            return Err(NetworkError::ReprChannels {
                repr: self.repr,
                expected: self.repr.channels(),
                got: self.input_channels,
            });
        }
        let (mut w, mut h, mut c) = (self.input_width, self.input_height, self.input_channels);
        for (i, layer) in self.layers.iter().enumerate() {
            match layer {
                Layer::Conv(conv) => {
                    if conv.kernel == 0 || conv.kernel % 2 == 0 {
                        return Err(NetworkError::BadKernel { layer: i, kernel: conv.kernel });
                    }
                    if conv.c_in != c {
                        return Err(NetworkError::ChannelMismatch { layer: i, expected: c, got: conv.c_in });
                    }
                    let n = conv.kernel * conv.kernel * conv.c_in * conv.c_out;
                    if conv.weights.len() != n {
                        return Err(NetworkError::TensorShape { layer: i, what: "weights", expected: n, got: conv.weights.len() });
                    }
                    if conv.bias.len() != conv.c_out {
                        return Err(NetworkError::TensorShape { layer: i, what: "bias", expected: conv.c_out, got: conv.bias.len() });
                    }
                    c = conv.c_out;
                }
                Layer::MaxPool { kernel } => {
                    if *kernel == 0 || w % kernel != 0 || h % kernel != 0 {
                        return Err(NetworkError::NonDivisiblePool { layer: i, kernel: *kernel, width: w, height: h });
                    }
                    w /= kernel;
                    h /= kernel;
                }
                Layer::Relu => {}
                Layer::Fc(fc) => {
                    if i + 1 != self.layers.len() {
                        return Err(NetworkError::HeadNotLast { layer: i });
                    }
                    if fc.c_in != w * h * c {
                        return Err(NetworkError::ChannelMismatch { layer: i, expected: w * h * c, got: fc.c_in });
                    }
                    if fc.weights.len() != fc.c_in * fc.c_out {
                        return Err(NetworkError::TensorShape {
                            layer: i,
                            what: "weights",
                            expected: fc.c_in * fc.c_out,
                            got: fc.weights.len(),
                        });
                    }
                    if fc.bias.len() != fc.c_out {
                        return Err(NetworkError::TensorShape { layer: i, what: "bias", expected: fc.c_out, got: fc.bias.len() });
                    }
                }
            }
        }
        match self.layers.last() {
            Some(Layer::Fc(_)) => Ok(()),
            _ => Err(NetworkError::MissingHead),
        }
    }

    pub fn check_input(&self, width: usize, height: usize, channels: usize) -> Result<(), NetworkError> {
        if (width, height, channels) != (self.input_width, self.input_height, self.input_channels) {
            return Err(NetworkError::InputShape {
                w: self.input_width,
                h: self.input_height,
                c: self.input_channels,
                got_w: width,
                got_h: height,
                got_c: channels,
            });
        }
        Ok(())
    }

    pub fn output_len(&self) -> usize {
        match self.layers.last() {
            Some(Layer::Fc(fc)) => fc.c_out,
            _ => 0,
        }
    }

    /// Same network in another precision.
    pub fn cast<U: Real>(&self) -> NetworkSpec<U> {
        let conv = |v: &[T]| v.iter().map(|x| U::from_f64(x.as_f64())).collect::<Vec<U>>();
        NetworkSpec {
            name: self.name.clone(),
            input_width: self.input_width,
            input_height: self.input_height,
            input_channels: self.input_channels,
            repr: self.repr,
            window: self.window,
            layers: self
                .layers
                .iter()
                .map(|l| match l {
                    Layer::Conv(c) => Layer::Conv(ConvLayer {
                        kernel: c.kernel,
                        c_in: c.c_in,
                        c_out: c.c_out,
                        weights: conv(&c.weights),
                        bias: conv(&c.bias),
                        activation: c.activation,
                    }),
                    Layer::MaxPool { kernel } => Layer::MaxPool { kernel: *kernel },
                    Layer::Relu => Layer::Relu,
                    Layer::Fc(f) => Layer::Fc(FcLayer {
                        c_in: f.c_in,
                        c_out: f.c_out,
                        weights: conv(&f.weights),
                        bias: conv(&f.bias),
                    }),
                })
                .collect(),
        }
    }
}
