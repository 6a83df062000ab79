//! Binary model format.
//!
//! Layout, all integers little-endian `u32` unless noted:
//!
//! ```text
//! "ASNM" version width height channels name_len name[u8] repr[u8] window layer_count
//! layer table: kind[u8] followed by
//!   conv:      kernel c_in c_out activation[u8]
//!   batchnorm: channels eps[f32]
//!   maxpool:   kernel
//!   relu:      -
//!   fc:        c_in c_out
//! payload_len[u64] (number of f32 values)
//! payload: f32 tensors in layer order
//!   conv: weights (k_y, k_x, c_in, c_out), bias (c_out)
//!   batchnorm: gamma, beta, mean, var (channels each)
//!   fc: weights (c_out, c_in), bias (c_out)
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, ErrorKind, Read, Write};
use std::path::Path;

use super::ModelError;
use crate::network::{Activation, ConvLayer, FcLayer, Layer, NetworkSpec};
use crate::representation::ReprKind;

pub const MAGIC: &[u8; 4] = b"ASNM";
pub const FORMAT_VERSION: u32 = 1;

const KIND_CONV: u8 = 0;
const KIND_BN: u8 = 1;
const KIND_POOL: u8 = 2;
const KIND_RELU: u8 = 3;
const KIND_FC: u8 = 4;

#[derive(Clone, Debug, PartialEq)]
pub enum FileLayer {
    Conv { kernel: usize, c_in: usize, c_out: usize, activation: Activation, weights: Vec<f32>, bias: Vec<f32> },
    BatchNorm { channels: usize, eps: f32, gamma: Vec<f32>, beta: Vec<f32>, mean: Vec<f32>, var: Vec<f32> },
    MaxPool { kernel: usize },
    Relu,
    Fc { c_in: usize, c_out: usize, weights: Vec<f32>, bias: Vec<f32> },
}

impl FileLayer {
    fn payload_len(&self) -> u64 {
        match self {
            FileLayer::Conv { kernel, c_in, c_out, .. } => (kernel * kernel * c_in * c_out + c_out) as u64,
            FileLayer::BatchNorm { channels, .. } => 4 * *channels as u64,
            FileLayer::MaxPool { .. } | FileLayer::Relu => 0,
            FileLayer::Fc { c_in, c_out, .. } => (c_in * c_out + c_out) as u64,
        }
    }
}

/// A model as stored on disk, batch norms still separate.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelFile {
    pub name: String,
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub repr: ReprKind,
    pub window: usize,
    pub layers: Vec<FileLayer>,
}

struct Reader<R> {
    inner: R,
}

impl<R: Read> Reader<R> {
    fn bytes(&mut self, n: usize, what: &'static str) -> Result<Vec<u8>, ModelError> {
        let mut buf = vec![0u8; n];
        self.inner.read_exact(&mut buf).map_err(|e| match e.kind() {
            ErrorKind::UnexpectedEof => ModelError::Truncated(what),
            _ => ModelError::Io(e),
        })?;
        Ok(buf)
    }

    fn u8(&mut self, what: &'static str) -> Result<u8, ModelError> {
        Ok(self.bytes(1, what)?[0])
    }

    fn u32(&mut self, what: &'static str) -> Result<u32, ModelError> {
        let b = self.bytes(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn usize(&mut self, what: &'static str) -> Result<usize, ModelError> {
        Ok(self.u32(what)? as usize)
    }

    fn f32s(&mut self, n: usize, what: &'static str) -> Result<Vec<f32>, ModelError> {
        let b = self.bytes(n * 4, what)?;
        Ok(b.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect())
    }
}

fn put_u32(w: &mut impl Write, v: usize) -> std::io::Result<()> {
    w.write_all(&u32::try_from(v).expect("dimension fits in u32").to_le_bytes())
}

fn put_f32s(w: &mut impl Write, v: &[f32]) -> std::io::Result<()> {
    for x in v {
        w.write_all(&x.to_le_bytes())?;
    }
    Ok(())
}

impl ModelFile {
    pub fn read_from(r: impl Read) -> Result<Self, ModelError> {
        let mut r = Reader { inner: r };
        if r.bytes(4, "magic")? != MAGIC {
            return Err(ModelError::BadMagic);
        }
        let version = r.u32("version")?;
        if version != FORMAT_VERSION {
            return Err(ModelError::Version { found: version, expected: FORMAT_VERSION });
        }
        let width = r.usize("header")?;
        let height = r.usize("header")?;
        let channels = r.usize("header")?;
        let name_len = r.usize("header")?;
        let name = String::from_utf8_lossy(&r.bytes(name_len, "name")?).into_owned();
        let repr = match r.u8("header")? {
            0 => ReprKind::Histogram,
            1 => ReprKind::Queue,
            k => return Err(ModelError::Shape { layer: 0, reason: format!("unknown representation code {k}") }),
        };
        let window = r.usize("header")?;
        let count = r.usize("header")?;

        enum Decl {
            Conv(usize, usize, usize, Activation),
            Bn(usize, f32),
            Pool(usize),
            Relu,
            Fc(usize, usize),
        }
        let mut decls = Vec::with_capacity(count.min(1 << 16));
        for layer in 0..count {
            let kind = r.u8("layer table")?;
            decls.push(match kind {
                KIND_CONV => {
                    let (k, ci, co) = (r.usize("layer table")?, r.usize("layer table")?, r.usize("layer table")?);
                    let act = match r.u8("layer table")? {
                        0 => Activation::Identity,
                        1 => Activation::Relu,
                        a => return Err(ModelError::Shape { layer, reason: format!("unknown activation code {a}") }),
                    };
                    Decl::Conv(k, ci, co, act)
                }
                KIND_BN => {
                    let c = r.usize("layer table")?;
                    let eps = r.f32s(1, "layer table")?[0];
                    Decl::Bn(c, eps)
                }
                KIND_POOL => Decl::Pool(r.usize("layer table")?),
                KIND_RELU => Decl::Relu,
                KIND_FC => Decl::Fc(r.usize("layer table")?, r.usize("layer table")?),
                kind => return Err(ModelError::UnknownKind { layer, kind }),
            });
        }
        let declared: u64 = decls
            .iter()
            .map(|d| match *d {
                Decl::Conv(k, ci, co, _) => (k * k * ci * co + co) as u64,
                Decl::Bn(c, _) => 4 * c as u64,
                Decl::Pool(_) | Decl::Relu => 0,
                Decl::Fc(ci, co) => (ci * co + co) as u64,
            })
            .sum();
        let b = r.bytes(8, "payload length")?;
        let stored = u64::from_le_bytes(b.try_into().expect("8 bytes"));
        if stored != declared {
            return Err(ModelError::PayloadLength { expected: declared, got: stored });
        }

        let mut layers = Vec::with_capacity(decls.len());
        for d in decls {
            layers.push(match d {
                Decl::Conv(kernel, c_in, c_out, activation) => FileLayer::Conv {
                    kernel,
                    c_in,
                    c_out,
                    activation,
                    weights: r.f32s(kernel * kernel * c_in * c_out, "payload")?,
                    bias: r.f32s(c_out, "payload")?,
                },
                Decl::Bn(channels, eps) => FileLayer::BatchNorm {
                    channels,
                    eps,
                    gamma: r.f32s(channels, "payload")?,
                    beta: r.f32s(channels, "payload")?,
                    mean: r.f32s(channels, "payload")?,
                    var: r.f32s(channels, "payload")?,
                },
                Decl::Pool(kernel) => FileLayer::MaxPool { kernel },
                Decl::Relu => FileLayer::Relu,
                Decl::Fc(c_in, c_out) => FileLayer::Fc {
                    c_in,
                    c_out,
                    weights: r.f32s(c_in * c_out, "payload")?,
                    bias: r.f32s(c_out, "payload")?,
                },
            });
        }
        let mut rest = Vec::new();
        r.inner.read_to_end(&mut rest)?;
        if !rest.is_empty() {
            return Err(ModelError::TrailingBytes(rest.len()));
        }
        Ok(Self { name, width, height, channels, repr, window, layers })
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<(), ModelError> {
        w.write_all(MAGIC)?;
        put_u32(&mut w, FORMAT_VERSION as usize)?;
        put_u32(&mut w, self.width)?;
        put_u32(&mut w, self.height)?;
        put_u32(&mut w, self.channels)?;
        put_u32(&mut w, self.name.len())?;
        w.write_all(self.name.as_bytes())?;
        w.write_all(&[match self.repr {
            ReprKind::Histogram => 0,
            ReprKind::Queue => 1,
        }])?;
        put_u32(&mut w, self.window)?;
        put_u32(&mut w, self.layers.len())?;
        for l in &self.layers {
            match l {
                FileLayer::Conv { kernel, c_in, c_out, activation, .. } => {
                    w.write_all(&[KIND_CONV])?;
                    put_u32(&mut w, *kernel)?;
                    put_u32(&mut w, *c_in)?;
                    put_u32(&mut w, *c_out)?;
                    w.write_all(&[match activation {
                        Activation::Identity => 0,
                        Activation::Relu => 1,
                    }])?;
                }
                FileLayer::BatchNorm { channels, eps, .. } => {
                    w.write_all(&[KIND_BN])?;
                    put_u32(&mut w, *channels)?;
                    w.write_all(&eps.to_le_bytes())?;
                }
                FileLayer::MaxPool { kernel } => {
                    w.write_all(&[KIND_POOL])?;
                    put_u32(&mut w, *kernel)?;
                }
                FileLayer::Relu => w.write_all(&[KIND_RELU])?,
                FileLayer::Fc { c_in, c_out, .. } => {
                    w.write_all(&[KIND_FC])?;
                    put_u32(&mut w, *c_in)?;
                    put_u32(&mut w, *c_out)?;
                }
            }
        }
        let total: u64 = self.layers.iter().map(FileLayer::payload_len).sum();
        w.write_all(&total.to_le_bytes())?;
        for (layer, l) in self.layers.iter().enumerate() {
            let expect = l.payload_len() as usize;
            let tensors: Vec<&[f32]> = match l {
                FileLayer::Conv { weights, bias, .. } | FileLayer::Fc { weights, bias, .. } => vec![weights, bias],
                FileLayer::BatchNorm { gamma, beta, mean, var, .. } => vec![gamma, beta, mean, var],
                FileLayer::MaxPool { .. } | FileLayer::Relu => vec![],
            };
            let got: usize = tensors.iter().map(|t| t.len()).sum();
            if got != expect {
                return Err(ModelError::Shape { layer, reason: format!("tensors hold {got} values, header declares {expect}") });
            }
            for t in tensors {
                put_f32s(&mut w, t)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Stores a runtime network; the result contains no batch norms.
    pub fn from_spec(net: &NetworkSpec<f32>) -> Self {
        Self {
            name: net.name.clone(),
            width: net.input_width,
            height: net.input_height,
            channels: net.input_channels,
            repr: net.repr,
            window: net.window,
            layers: net
                .layers
                .iter()
                .map(|l| match l {
                    Layer::Conv(c) => FileLayer::Conv {
                        kernel: c.kernel,
                        c_in: c.c_in,
                        c_out: c.c_out,
                        activation: c.activation,
                        weights: c.weights.clone(),
                        bias: c.bias.clone(),
                    },
                    Layer::MaxPool { kernel } => FileLayer::MaxPool { kernel: *kernel },
                    Layer::Relu => FileLayer::Relu,
                    Layer::Fc(f) => FileLayer::Fc { c_in: f.c_in, c_out: f.c_out, weights: f.weights.clone(), bias: f.bias.clone() },
                })
                .collect(),
        }
    }

    /// Folds every batch norm into the preceding conv and validates the result.
    ///
    /// `W' = W * g / sqrt(v + eps)`, `b' = (b - m) * g / sqrt(v + eps) + beta`,
    /// evaluated in double precision.
    pub fn fold(&self) -> Result<NetworkSpec<f32>, ModelError> {
        let mut layers: Vec<Layer<f32>> = Vec::with_capacity(self.layers.len());
        for (n, l) in self.layers.iter().enumerate() {
            match l {
                FileLayer::Conv { kernel, c_in, c_out, activation, weights, bias } => layers.push(Layer::Conv(ConvLayer {
                    kernel: *kernel,
                    c_in: *c_in,
                    c_out: *c_out,
                    weights: weights.clone(),
                    bias: bias.clone(),
                    activation: *activation,
                })),
                FileLayer::BatchNorm { channels, eps, gamma, beta, mean, var } => {
                    let conv = match layers.last_mut() {
                        Some(Layer::Conv(c)) if c.activation == Activation::Identity => c,
                        _ => return Err(ModelError::UnfoldableBatchNorm { layer: n }),
                    };
                    if conv.c_out != *channels {
                        return Err(ModelError::Shape {
                            layer: n,
                            reason: format!("batch norm over {channels} channels follows conv with {}", conv.c_out),
                        });
                    }
                    let scale: Vec<f64> =
                        (0..*channels).map(|c| gamma[c] as f64 / (var[c] as f64 + *eps as f64).sqrt()).collect();
                    for (i, w) in conv.weights.iter_mut().enumerate() {
                        *w = (*w as f64 * scale[i % channels]) as f32;
                    }
                    for (c, b) in conv.bias.iter_mut().enumerate() {
                        *b = ((*b as f64 - mean[c] as f64) * scale[c] + beta[c] as f64) as f32;
                    }
                }
                FileLayer::MaxPool { kernel } => layers.push(Layer::MaxPool { kernel: *kernel }),
                FileLayer::Relu => layers.push(Layer::Relu),
                FileLayer::Fc { c_in, c_out, weights, bias } => layers.push(Layer::Fc(FcLayer {
                    c_in: *c_in,
                    c_out: *c_out,
                    weights: weights.clone(),
                    bias: bias.clone(),
                })),
            }
        }
        let net = NetworkSpec {
            name: self.name.clone(),
            input_width: self.width,
            input_height: self.height,
            input_channels: self.channels,
            repr: self.repr,
            window: self.window,
            layers,
        };
        net.validate()?;
        Ok(net)
    }
}

/// Reads a model file, folds batch norms and validates the layer chain.
pub fn load_model(path: impl AsRef<Path>) -> Result<NetworkSpec<f32>, ModelError> {
    let f = File::open(path)?;
    ModelFile::read_from(BufReader::new(f))?.fold()
}

pub fn save_model(net: &NetworkSpec<f32>, path: impl AsRef<Path>) -> Result<(), ModelError> {
    net.validate()?;
    let f = File::create(path)?;
    ModelFile::from_spec(net).write_to(BufWriter::new(f))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> ModelFile {
        ModelFile {
            name: "tiny".into(),
            width: 4,
            height: 4,
            channels: 2,
            repr: ReprKind::Histogram,
            window: 10,
            layers: vec![
                FileLayer::Conv {
                    kernel: 3,
                    c_in: 2,
                    c_out: 3,
                    activation: Activation::Identity,
                    weights: (0..54).map(|i| i as f32 * 0.01 - 0.2).collect(),
                    bias: vec![0.1, -0.2, 0.3],
                },
                FileLayer::BatchNorm {
                    channels: 3,
                    eps: 1e-5,
                    gamma: vec![1.0; 3],
                    beta: vec![0.0; 3],
                    mean: vec![0.0; 3],
                    var: vec![1.0 - 1e-5; 3],
                },
                FileLayer::Relu,
                FileLayer::MaxPool { kernel: 2 },
                FileLayer::Fc { c_in: 12, c_out: 2, weights: vec![0.5; 24], bias: vec![0.0, 1.0] },
            ],
        }
    }

    fn encode(m: &ModelFile) -> Vec<u8> {
        let mut buf = Vec::new();
        m.write_to(&mut buf).unwrap();
        buf
    }

    #[test]
    fn round_trip() {
        let m = tiny();
        assert_eq!(ModelFile::read_from(encode(&m).as_slice()).unwrap(), m);
    }

    #[test]
    fn identity_batchnorm_keeps_weights() {
        let m = tiny();
        let net = m.fold().unwrap();
        assert_eq!(net.layers.len(), 4);
        let (Layer::Conv(c), FileLayer::Conv { weights, bias, .. }) = (&net.layers[0], &m.layers[0]) else { panic!() };
        for (a, b) in c.weights.iter().zip(weights).chain(c.bias.iter().zip(bias)) {
            assert!((a - b).abs() <= 1e-6 * b.abs().max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn gamma_two_doubles() {
        let mut m = tiny();
        if let FileLayer::BatchNorm { gamma, .. } = &mut m.layers[1] {
            *gamma = vec![2.0; 3];
        }
        let net = m.fold().unwrap();
        let (Layer::Conv(c), FileLayer::Conv { weights, bias, .. }) = (&net.layers[0], &m.layers[0]) else { panic!() };
        for (a, b) in c.weights.iter().zip(weights).chain(c.bias.iter().zip(bias)) {
            assert!((a - 2.0 * b).abs() <= 1e-6, "{a} vs 2*{b}");
        }
    }

    #[test]
    fn rejects_bad_headers() {
        let buf = encode(&tiny());
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(ModelFile::read_from(bad.as_slice()), Err(ModelError::BadMagic)));
        let mut bad = buf.clone();
        bad[4] = 9;
        assert!(matches!(ModelFile::read_from(bad.as_slice()), Err(ModelError::Version { found: 9, .. })));
        let cut = &buf[..buf.len() - 3];
        assert!(matches!(ModelFile::read_from(cut), Err(ModelError::Truncated(_))));
        let mut long = buf.clone();
        long.extend_from_slice(&[0, 0, 0, 0]);
        assert!(matches!(ModelFile::read_from(long.as_slice()), Err(ModelError::TrailingBytes(4))));
    }

    #[test]
    fn rejects_orphan_batchnorm() {
        let mut m = tiny();
        m.layers.swap(1, 2);
        assert!(matches!(m.fold(), Err(ModelError::UnfoldableBatchNorm { layer: 2 })));
    }

    #[test]
    fn rejects_inconsistent_chain() {
        let mut m = tiny();
        m.layers[3] = FileLayer::MaxPool { kernel: 3 };
        assert!(matches!(m.fold(), Err(ModelError::Network(_))));
    }
}
