//! Purely convolutional 1-D network: `blocks` × {valid convolution (kernel
//! `kernel`, `filters` channels, softplus) → max-pool → inverted dropout},
//! then flatten → dense softplus (`hidden` units) → dense sigmoid (1 unit).
//!
//! Activations are stored position-major (`[t][channel]`), so the receptive
//! field of output `t` is one contiguous slice of the layer input and every
//! convolution is a single strided matrix product.

mod layers;
mod train;

pub use layers::{ForwardCache, Gradients};
pub use train::{train, EpochRecord};

use rand::distr::{Distribution, Uniform};
use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CnnArch {
    pub blocks: usize,
    pub filters: usize,
    pub kernel: usize,
    pub pool: usize,
    pub dropout: f64,
    pub hidden: usize,
}

impl Default for CnnArch {
    fn default() -> Self {
        Self {
            blocks: 3,
            filters: 64,
            kernel: 3,
            pool: 2,
            dropout: 0.25,
            hidden: 16,
        }
    }
}

impl CnnArch {
    pub fn validate(&self) -> Result<()> {
        if self.blocks == 0 || self.filters == 0 || self.kernel == 0 || self.pool == 0 || self.hidden == 0 {
            return Err(Error::InvalidArgument(format!(
                "network dimensions must be positive: {self:?}"
            )));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::InvalidArgument(format!(
                "dropout rate must lie in [0, 1), got {}",
                self.dropout
            )));
        }
        Ok(())
    }

    /// Length of the feature map leaving each block, or `None` if it vanishes.
    fn block_lengths(&self, input_len: usize) -> Option<Vec<usize>> {
        let mut len = input_len;
        let mut out = Vec::with_capacity(self.blocks);
        for _ in 0..self.blocks {
            if len < self.kernel {
                return None;
            }
            // valid convolution, then pooling that drops a ragged tail
            len = (len - self.kernel + 1) / self.pool;
            if len == 0 {
                return None;
            }
            out.push(len);
        }
        Some(out)
    }

    /// Shortest input that survives every convolution and pooling stage.
    pub fn min_input_len(&self) -> usize {
        let mut len = 1;
        for _ in 0..self.blocks {
            len = len * self.pool + self.kernel - 1;
        }
        len
    }

    pub fn check_input_len(&self, len: usize) -> Result<Vec<usize>> {
        self.block_lengths(len).ok_or(Error::InputTooShort {
            length: len,
            minimum: self.min_input_len(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Upper bound on passes over the training data.
    pub epochs: usize,
    pub seed: u64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    /// Share of the training data held out to monitor early stopping.
    pub validation_fraction: f64,
    /// Epochs without validation improvement before stopping; `None` trains
    /// for the full epoch budget on all data.
    pub patience: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 64,
            learning_rate: 0.001,
            epochs: 100,
            seed: 0,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            validation_fraction: 0.1,
            patience: Some(10),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch size must be >= 1".into()));
        }
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "learning rate must be finite and >= 0, got {}",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(Error::InvalidArgument(format!(
                "validation fraction must lie in [0, 1), got {}",
                self.validation_fraction
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvLayer {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    /// `out_channels × (kernel · in_channels)`, inner index `k · in_channels + c`.
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub inputs: usize,
    pub outputs: usize,
    /// `outputs × inputs`, row-major.
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CnnModel {
    pub arch: CnnArch,
    pub input_len: usize,
    pub convs: Vec<ConvLayer>,
    pub hidden: DenseLayer,
    pub output: DenseLayer,
    pub seed: u64,
    #[serde(default)]
    pub history: Vec<EpochRecord>,
}

fn glorot<R: Rng + ?Sized>(rng: &mut R, fan_in: usize, fan_out: usize, len: usize) -> Vec<f64> {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let dist = Uniform::new_inclusive(-limit, limit).expect("finite limit");
    (0..len).map(|_| dist.sample(rng)).collect()
}

impl CnnModel {
    /// Glorot-uniform weights and zero biases, drawn from `seed`.
    pub fn init(arch: CnnArch, input_len: usize, seed: u64) -> Result<Self> {
        arch.validate()?;
        let lengths = arch.check_input_len(input_len)?;
        let mut rng = rng::stream(seed, 0);
        let mut convs = Vec::with_capacity(arch.blocks);
        let mut channels = 1;
        for _ in 0..arch.blocks {
            let fan = arch.kernel * channels;
            convs.push(ConvLayer {
                in_channels: channels,
                out_channels: arch.filters,
                kernel: arch.kernel,
                weight: glorot(&mut rng, fan, arch.kernel * arch.filters, arch.filters * fan),
                bias: vec![0.0; arch.filters],
            });
            channels = arch.filters;
        }
        let flat = lengths.last().copied().unwrap_or(input_len) * arch.filters;
        let hidden = DenseLayer {
            inputs: flat,
            outputs: arch.hidden,
            weight: glorot(&mut rng, flat, arch.hidden, flat * arch.hidden),
            bias: vec![0.0; arch.hidden],
        };
        let output = DenseLayer {
            inputs: arch.hidden,
            outputs: 1,
            weight: glorot(&mut rng, arch.hidden, 1, arch.hidden),
            bias: vec![0.0],
        };
        Ok(Self {
            arch,
            input_len,
            convs,
            hidden,
            output,
            seed,
            history: Vec::new(),
        })
    }

    /// Parameter tensors in a fixed order: each conv weight/bias, then the
    /// hidden and output dense weight/bias.
    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::with_capacity(2 * self.convs.len() + 4);
        for c in &self.convs {
            out.push(&c.weight);
            out.push(&c.bias);
        }
        out.extend([
            &self.hidden.weight[..],
            &self.hidden.bias[..],
            &self.output.weight[..],
            &self.output.bias[..],
        ]);
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Vec<f64>> {
        let mut out: Vec<&mut Vec<f64>> = Vec::with_capacity(2 * self.convs.len() + 4);
        for c in &mut self.convs {
            out.push(&mut c.weight);
            out.push(&mut c.bias);
        }
        out.push(&mut self.hidden.weight);
        out.push(&mut self.hidden.bias);
        out.push(&mut self.output.weight);
        out.push(&mut self.output.bias);
        out
    }

    /// Names matching [`tensors`](Self::tensors).
    pub fn tensor_names(&self) -> Vec<String> {
        let mut out = Vec::new();
        for i in 0..self.convs.len() {
            out.push(format!("conv{}.weight", i + 1));
            out.push(format!("conv{}.bias", i + 1));
        }
        out.extend(["dense.weight", "dense.bias", "output.weight", "output.bias"].map(String::from));
        out
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_len {
            self.arch.check_input_len(x.len())?;
            return Err(Error::DimensionMismatch {
                expected: self.input_len,
                found: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite network input".into()));
        }
        Ok(())
    }

    /// Output probability and the cache needed for backpropagation. Dropout
    /// masks are drawn from `rng` in train mode only.
    pub fn forward<R: RngCore + ?Sized>(&self, x: &[f64], mode: Mode, rng: &mut R) -> Result<(f64, ForwardCache)> {
        self.check_input(x)?;
        let cache = match mode {
            Mode::Train => self.run(&[x], Some(&mut DynRng(rng))),
            Mode::Eval => self.run(&[x], None),
        };
        Ok((cache.outputs()[0], cache))
    }

    /// Eval-mode output probability.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        self.check_input(x)?;
        Ok(self.run(&[x], None).outputs()[0])
    }

    /// Eval-mode output probabilities of many inputs, evaluated in chunks.
    pub fn predict_many(&self, xs: &[&[f64]]) -> Result<Vec<f64>> {
        xs.iter().try_for_each(|x| self.check_input(x))?;
        let mut out = Vec::with_capacity(xs.len());
        let mut cache = ForwardCache::default();
        for chunk in xs.chunks(EVAL_CHUNK) {
            self.run_into(chunk, None, &mut cache);
            out.extend_from_slice(cache.outputs());
        }
        Ok(out)
    }

    /// Binary cross-entropy of one example and its gradients with respect to
    /// every parameter and to the input.
    pub fn gradient(&self, x: &[f64], y: f64) -> Result<(f64, Gradients, Vec<f64>)> {
        self.check_input(x)?;
        let mut cache = self.run(&[x], None);
        let (logit, o) = (cache.logits()[0], cache.outputs()[0]);
        let loss = crate::math::softplus(logit) - y * logit;
        let mut grads = Gradients::zeros_like(self);
        let input_grad = self.backward(&mut cache, &[o - y], Some(&mut grads), true);
        Ok((loss, grads, input_grad.expect("requested")))
    }

    /// `∂o/∂x` for the eval-mode output `o`.
    pub fn input_gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let mut cache = self.run(&[x], None);
        let o = cache.outputs()[0];
        Ok(self.backward(&mut cache, &[o * (1.0 - o)], None, true).expect("requested"))
    }
}

/// Batch size used when only evaluating.
const EVAL_CHUNK: usize = 32;

/// Adapter so a `?Sized` generic RNG can be handed to non-generic internals.
struct DynRng<'a, R: RngCore + ?Sized>(&'a mut R);

impl<R: RngCore + ?Sized> RngCore for DynRng<'_, R> {
    fn next_u32(&mut self) -> u32 {
        self.0.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.0.fill_bytes(dst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_arch_lengths() {
        let arch = CnnArch::default();
        assert_eq!(arch.check_input_len(221).unwrap(), vec![109, 53, 25]);
        assert_eq!(arch.check_input_len(570).unwrap(), vec![284, 141, 69]);
        assert_eq!(arch.min_input_len(), 22);
        assert!(arch.check_input_len(22).is_ok());
        assert!(matches!(
            arch.check_input_len(21),
            Err(Error::InputTooShort { length: 21, minimum: 22 })
        ));
    }

    #[test]
    fn tensor_listing_is_consistent() {
        let mut model = CnnModel::init(CnnArch::default(), 64, 1).unwrap();
        let names = model.tensor_names();
        let lens: Vec<usize> = model.tensors().iter().map(|t| t.len()).collect();
        assert_eq!(names.len(), lens.len());
        assert_eq!(lens[0], 64 * 3);
        assert_eq!(lens[2], 64 * 3 * 64);
        assert_eq!(model.tensors_mut().len(), lens.len());
    }

    #[test]
    fn init_is_seeded() {
        let a = CnnModel::init(CnnArch::default(), 100, 5).unwrap();
        let b = CnnModel::init(CnnArch::default(), 100, 5).unwrap();
        let c = CnnModel::init(CnnArch::default(), 100, 6).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}
