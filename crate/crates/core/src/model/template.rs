//! Architecture templates and deterministic random weights.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ModelError;
use crate::network::{Activation, ConvLayer, FcLayer, Layer, NetworkSpec};
use crate::representation::{ReprKind, DEFAULT_WINDOW};

/// One block: a run of convolutions followed by an optional max pool.
#[derive(Clone, Debug, PartialEq)]
pub struct Block {
    pub kernel: usize,
    /// Output width of each convolution in the block.
    pub widths: Vec<usize>,
    /// Pool kernel (and stride); 0 or 1 means no pooling.
    pub pool: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ArchitectureTemplate {
    pub name: String,
    pub input_width: usize,
    pub input_height: usize,
    pub repr: ReprKind,
    pub window: usize,
    pub blocks: Vec<Block>,
    pub classes: usize,
    /// Fold ReLU into each conv instead of emitting a separate layer.
    pub fused_relu: bool,
}

fn round_up(v: usize, m: usize) -> usize {
    v.div_ceil(m) * m
}

impl ArchitectureTemplate {
    /// Five blocks of two 3x3 convolutions and a 2x2 pool, widths 64..512, then a
    /// linear head. The input is padded up to a multiple of 32 on the bottom and
    /// right so every pool divides evenly; events keep their coordinates.
    pub fn vgg13(sensor_width: usize, sensor_height: usize, repr: ReprKind, classes: usize) -> Self {
        let blocks = [64, 128, 256, 512, 512].iter().map(|&c| Block { kernel: 3, widths: vec![c, c], pool: 2 }).collect();
        Self {
            name: "vgg13".into(),
            input_width: round_up(sensor_width, 32),
            input_height: round_up(sensor_height, 32),
            repr,
            window: DEFAULT_WINDOW,
            blocks,
            classes,
            fused_relu: false,
        }
    }

    /// Two narrow blocks; cheap enough for per-event comparison runs.
    pub fn small(sensor_width: usize, sensor_height: usize, repr: ReprKind, classes: usize) -> Self {
        Self {
            name: "small".into(),
            input_width: round_up(sensor_width, 4),
            input_height: round_up(sensor_height, 4),
            repr,
            window: DEFAULT_WINDOW,
            blocks: vec![Block { kernel: 3, widths: vec![8, 8], pool: 2 }, Block { kernel: 3, widths: vec![16], pool: 2 }],
            classes,
            fused_relu: false,
        }
    }

    /// A randomized 2-5 block architecture with narrow layers, for property tests.
    /// The block count is capped by how often the input halves evenly.
    pub fn random(seed: u64, width: usize, height: usize, repr: ReprKind) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7465_6d70);
        let halvings = (width.trailing_zeros().min(height.trailing_zeros()) as usize).min(5);
        let n_blocks = rng.gen_range(2..=5).min(halvings.max(2));
        let mut blocks = Vec::with_capacity(n_blocks);
        let (mut w, mut h) = (width, height);
        for _ in 0..n_blocks {
            let kernel = [3, 3, 3, 5][rng.gen_range(0..4)];
            let widths = (0..rng.gen_range(1..=2)).map(|_| rng.gen_range(4..=8)).collect();
            let pool = if w % 2 == 0 && h % 2 == 0 && w > 1 && h > 1 { 2 } else { 1 };
            if pool == 2 {
                w /= 2;
                h /= 2;
            }
            blocks.push(Block { kernel, widths, pool });
        }
        Self {
            name: format!("random-{seed}"),
            input_width: width,
            input_height: height,
            repr,
            window: DEFAULT_WINDOW,
            blocks,
            classes: rng.gen_range(2..=5),
            fused_relu: rng.gen_bool(0.5),
        }
    }

    /// Looks up `vgg13` or `small` for a given sensor size.
    pub fn by_name(name: &str, sensor_width: usize, sensor_height: usize, repr: ReprKind) -> Result<Self, ModelError> {
        match name {
            "vgg13" => Ok(Self::vgg13(sensor_width, sensor_height, repr, 101)),
            "small" => Ok(Self::small(sensor_width, sensor_height, repr, 10)),
            _ => Err(ModelError::UnknownTemplate(name.to_string())),
        }
    }

    pub fn with_window(mut self, window: usize) -> Self {
        self.window = window;
        self
    }

    /// Conv layers in the generated network.
    pub fn conv_count(&self) -> usize {
        self.blocks.iter().map(|b| b.widths.len()).sum()
    }

    fn check(&self) -> Result<(), ModelError> {
        if self.blocks.is_empty() {
            return Err(ModelError::BadTemplate("no blocks".into()));
        }
        if self.classes == 0 {
            return Err(ModelError::BadTemplate("no output classes".into()));
        }
        for (n, b) in self.blocks.iter().enumerate() {
            if b.widths.is_empty() || b.widths.contains(&0) {
                return Err(ModelError::BadTemplate(format!("block {n} has an empty conv")));
            }
        }
        Ok(())
    }
}

fn uniform(rng: &mut ChaCha8Rng, n: usize, bound: f64) -> Vec<f32> {
    (0..n).map(|_| rng.gen_range(-bound..=bound) as f32).collect()
}

const BIAS_BOUND: f64 = 0.1;

/// Instantiates `template` with weights drawn uniformly from `±sqrt(6 / fan_in)`
/// and biases from `±0.1`, deterministically per seed.
pub fn random_model(seed: u64, template: &ArchitectureTemplate) -> Result<NetworkSpec<f32>, ModelError> {
    template.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut layers = Vec::new();
    let mut c = template.repr.channels();
    let (mut w, mut h) = (template.input_width, template.input_height);
    for b in &template.blocks {
        for &c_out in &b.widths {
            let fan_in = b.kernel * b.kernel * c;
            let bound = (6.0 / fan_in as f64).sqrt();
            layers.push(Layer::Conv(ConvLayer {
                kernel: b.kernel,
                c_in: c,
                c_out,
                weights: uniform(&mut rng, fan_in * c_out, bound),
                bias: uniform(&mut rng, c_out, BIAS_BOUND),
                activation: if template.fused_relu { Activation::Relu } else { Activation::Identity },
            }));
            if !template.fused_relu {
                layers.push(Layer::Relu);
            }
            c = c_out;
        }
        if b.pool > 1 {
            layers.push(Layer::MaxPool { kernel: b.pool });
            w /= b.pool;
            h /= b.pool;
        }
    }
    let c_in = w * h * c;
    let bound = (6.0 / c_in.max(1) as f64).sqrt();
    layers.push(Layer::Fc(FcLayer {
        c_in,
        c_out: template.classes,
        weights: uniform(&mut rng, c_in * template.classes, bound),
        bias: uniform(&mut rng, template.classes, BIAS_BOUND),
    }));
    let net = NetworkSpec {
        name: template.name.clone(),
        input_width: template.input_width,
        input_height: template.input_height,
        input_channels: template.repr.channels(),
        repr: template.repr,
        window: template.window,
        layers,
    };
    net.validate()?;
    Ok(net)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::LayerKind;

    #[test]
    fn deterministic_per_seed() {
        let t = ArchitectureTemplate::small(16, 16, ReprKind::Histogram, 3);
        assert_eq!(random_model(5, &t).unwrap(), random_model(5, &t).unwrap());
        assert_ne!(random_model(5, &t).unwrap(), random_model(6, &t).unwrap());
    }

    #[test]
    fn vgg13_layout() {
        let t = ArchitectureTemplate::vgg13(240, 180, ReprKind::Histogram, 101);
        assert_eq!((t.input_width, t.input_height), (256, 192));
        let kinds: Vec<LayerKind> = t
            .blocks
            .iter()
            .flat_map(|b| {
                let mut k = vec![LayerKind::Conv; b.widths.len()];
                k.push(LayerKind::MaxPool);
                k
            })
            .collect();
        assert_eq!(kinds.len(), 15);
        assert_eq!(t.blocks.len(), 5);
        assert!(t.blocks.iter().all(|b| b.widths.len() == 2 && b.pool == 2));
    }

    #[test]
    fn random_templates_validate() {
        for seed in 0..50 {
            let t = ArchitectureTemplate::random(seed, 32, 32, ReprKind::Queue);
            assert!((2..=5).contains(&t.blocks.len()));
            let net = random_model(seed, &t).unwrap();
            assert_eq!(net.layers.last().unwrap().kind(), LayerKind::Fc);
        }
    }

    #[test]
    fn weights_bounded() {
        let t = ArchitectureTemplate::small(8, 8, ReprKind::Histogram, 2);
        let net = random_model(1, &t).unwrap();
        let Layer::Conv(c) = &net.layers[0] else { panic!() };
        let bound = (6.0f64 / 18.0).sqrt() as f32;
        assert!(c.weights.iter().all(|w| w.abs() <= bound));
    }

    #[test]
    fn rejects_empty_template() {
        let mut t = ArchitectureTemplate::small(8, 8, ReprKind::Histogram, 2);
        t.blocks.clear();
        assert!(matches!(random_model(0, &t), Err(ModelError::BadTemplate(_))));
    }
}
