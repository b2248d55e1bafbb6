use rand::RngCore;

use super::{CnnModel, ConvLayer};
use crate::linear::sigmoid;
use crate::math::softplus_and_slope;

/// Intermediate values of one forward pass over a batch of inputs, plus
/// scratch space for the backward pass. Reusing one cache across batches
/// keeps the buffers allocated.
///
/// The batch is processed as one long signal: sample `s` occupies rows
/// `s·len .. (s+1)·len` of every activation map, and convolution rows that
/// straddle two samples are computed but never pooled.
#[derive(Debug, Clone, Default)]
pub struct ForwardCache {
    batch: usize,
    blocks: Vec<BlockCache>,
    /// `batch × flat_len`.
    flat: Vec<f64>,
    /// `batch × hidden`.
    hidden_act: Vec<f64>,
    /// Softplus slope (sigmoid) at the hidden pre-activations.
    hidden_slope: Vec<f64>,
    logits: Vec<f64>,
    outputs: Vec<f64>,
    // scratch
    pre: Vec<f64>,
    dhidden: Vec<f64>,
    dcurrent: Vec<f64>,
    dnext: Vec<f64>,
}

impl ForwardCache {
    pub fn batch_len(&self) -> usize {
        self.batch
    }

    pub fn logits(&self) -> &[f64] {
        &self.logits
    }

    pub fn outputs(&self) -> &[f64] {
        &self.outputs
    }
}

#[derive(Debug, Clone, Default)]
struct BlockCache {
    /// Block input, `batch · input_len × channels`.
    input: Vec<f64>,
    input_len: usize,
    /// Rows of the concatenated convolution output.
    rows: usize,
    /// For each pooled cell, the convolution row that won the max.
    argmax: Vec<u32>,
    /// Softplus slope at the winning pre-activation.
    slope: Vec<f64>,
    /// Inverted-dropout multipliers of the pooled map; empty in eval mode.
    mask: Vec<f64>,
}

/// Parameter gradients laid out like [`CnnModel::tensors`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients(pub Vec<Vec<f64>>);

impl Gradients {
    pub fn zeros_like(model: &CnnModel) -> Self {
        Gradients(model.tensors().iter().map(|t| vec![0.0; t.len()]).collect())
    }

    pub fn clear(&mut self) {
        self.0.iter_mut().for_each(|t| t.fill(0.0));
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// `C = A·B + beta·C` over arbitrary row/column strides.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    (rsa, csa): (usize, usize),
    b: &[f64],
    (rsb, csb): (usize, usize),
    beta: f64,
    c: &mut [f64],
    (rsc, csc): (usize, usize),
) {
    if m == 0 || n == 0 {
        return;
    }
    let last = |rows: usize, cols: usize, rs: usize, cs: usize| (rows - 1) * rs + (cols - 1) * cs;
    assert!(k == 0 || last(m, k, rsa, csa) < a.len());
    assert!(k == 0 || last(k, n, rsb, csb) < b.len());
    assert!(last(m, n, rsc, csc) < c.len());
    // SAFETY: the asserts above bound every element the kernel touches, and
    // `c` is an exclusive borrow distinct from `a` and `b`.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            rsc as isize,
            csc as isize,
        );
    }
}

/// Fills `out` with `rows` copies of `bias`, the starting point of a
/// `beta = 1` product.
fn tile_into(out: &mut Vec<f64>, bias: &[f64], rows: usize) {
    out.clear();
    for _ in 0..rows {
        out.extend_from_slice(bias);
    }
}

fn zero_into(out: &mut Vec<f64>, len: usize) {
    out.clear();
    out.resize(len, 0.0);
}

/// Convolution pre-activations of the concatenated `input` into `pre`;
/// returns the number of rows.
fn conv_forward(layer: &ConvLayer, input: &[f64], total_len: usize, pre: &mut Vec<f64>) -> usize {
    let width = layer.kernel * layer.in_channels;
    let rows = total_len + 1 - layer.kernel;
    let f = layer.out_channels;
    tile_into(pre, &layer.bias, rows);
    // Row t of the im2col view is input[t·C .. t·C + K·C]: stride C, no copy.
    gemm(
        rows,
        width,
        f,
        input,
        (layer.in_channels, 1),
        &layer.weight,
        (1, width),
        1.0,
        pre,
        (f, 1),
    );
    rows
}

impl CnnModel {
    /// Forward pass over `xs`, all of length `input_len`.
    pub(super) fn run(&self, xs: &[&[f64]], rng: Option<&mut dyn RngCore>) -> ForwardCache {
        let mut cache = ForwardCache::default();
        self.run_into(xs, rng, &mut cache);
        cache
    }

    /// Like [`run`](Self::run), reusing the buffers of `cache`.
    pub(super) fn run_into(&self, xs: &[&[f64]], mut rng: Option<&mut dyn RngCore>, cache: &mut ForwardCache) {
        let arch = &self.arch;
        let keep = 1.0 - arch.dropout;
        let batch = xs.len();
        cache.batch = batch;
        cache.blocks.resize_with(self.convs.len(), BlockCache::default);
        if let Some(first) = cache.blocks.first_mut() {
            first.input.clear();
            for x in xs {
                first.input.extend_from_slice(x);
            }
        } else {
            cache.flat.clear();
            for x in xs {
                cache.flat.extend_from_slice(x);
            }
        }
        let mut len = self.input_len;
        for (li, layer) in self.convs.iter().enumerate() {
            let f = layer.out_channels;
            let (head, tail) = cache.blocks.split_at_mut(li + 1);
            let block = &mut head[li];
            let pooled = match tail.first_mut() {
                Some(next) => &mut next.input,
                None => &mut cache.flat,
            };
            let pre = &mut cache.pre;
            let rows = conv_forward(layer, &block.input, batch * len, pre);
            let pooled_len = (len + 1 - layer.kernel) / arch.pool;
            pooled.clear();
            block.argmax.clear();
            block.slope.clear();
            // softplus is increasing, so pooling the pre-activations picks the same winner
            for s in 0..batch {
                for t in 0..pooled_len {
                    let first = s * len + t * arch.pool;
                    for c in 0..f {
                        let mut best = first;
                        for r in first + 1..first + arch.pool {
                            if pre[r * f + c] > pre[best * f + c] {
                                best = r;
                            }
                        }
                        let (sp, sl) = softplus_and_slope(pre[best * f + c]);
                        pooled.push(sp);
                        block.slope.push(sl);
                        block.argmax.push(best as u32);
                    }
                }
            }
            block.mask.clear();
            if let Some(r) = rng.as_deref_mut().filter(|_| arch.dropout > 0.0) {
                // keep a cell when a uniform u32 falls below keep · 2³²
                let threshold = (keep * 4_294_967_296.0) as u64;
                for v in pooled.iter_mut() {
                    let m = if u64::from(r.next_u32()) < threshold { 1.0 / keep } else { 0.0 };
                    *v *= m;
                    block.mask.push(m);
                }
            }
            block.input_len = len;
            block.rows = rows;
            len = pooled_len;
        }

        let hidden = &self.hidden;
        tile_into(&mut cache.hidden_act, &hidden.bias, batch);
        gemm(
            batch,
            hidden.inputs,
            hidden.outputs,
            &cache.flat,
            (hidden.inputs, 1),
            &hidden.weight,
            (1, hidden.inputs),
            1.0,
            &mut cache.hidden_act,
            (hidden.outputs, 1),
        );
        cache.hidden_slope.clear();
        for z in cache.hidden_act.iter_mut() {
            let (sp, sl) = softplus_and_slope(*z);
            *z = sp;
            cache.hidden_slope.push(sl);
        }
        cache.logits.clear();
        cache.outputs.clear();
        for act in cache.hidden_act.chunks_exact(hidden.outputs) {
            let z = self.output.bias[0] + self.output.weight.iter().zip(act).map(|(a, x)| a * x).sum::<f64>();
            cache.logits.push(z);
            cache.outputs.push(sigmoid(z));
        }
    }

    /// Backpropagates `dlogits[s] = ∂L/∂logit_s`. Parameter gradients are
    /// added into `grads`; the input gradient (`batch × input_len`) is
    /// returned when `want_input` is set.
    pub(super) fn backward(
        &self,
        cache: &mut ForwardCache,
        dlogits: &[f64],
        mut grads: Option<&mut Gradients>,
        want_input: bool,
    ) -> Option<Vec<f64>> {
        let n_conv = self.convs.len();
        let hidden = &self.hidden;
        let (h, batch) = (hidden.outputs, cache.batch);
        debug_assert_eq!(dlogits.len(), batch);

        if let Some(g) = grads.as_deref_mut() {
            let gw = &mut g.0[2 * n_conv + 2];
            for (act, d) in cache.hidden_act.chunks_exact(h).zip(dlogits) {
                for (gv, a) in gw.iter_mut().zip(act) {
                    *gv += d * a;
                }
            }
            g.0[2 * n_conv + 3][0] += dlogits.iter().sum::<f64>();
        }
        let dhidden = &mut cache.dhidden;
        dhidden.clear();
        dhidden.extend_from_slice(&cache.hidden_slope);
        for (row, d) in dhidden.chunks_exact_mut(h).zip(dlogits) {
            for (v, w) in row.iter_mut().zip(&self.output.weight) {
                *v *= d * w;
            }
        }
        if let Some(g) = grads.as_deref_mut() {
            gemm(
                h,
                batch,
                hidden.inputs,
                dhidden,
                (1, h),
                &cache.flat,
                (hidden.inputs, 1),
                1.0,
                &mut g.0[2 * n_conv],
                (hidden.inputs, 1),
            );
            let gb = &mut g.0[2 * n_conv + 1];
            for row in dhidden.chunks_exact(h) {
                for (b, d) in gb.iter_mut().zip(row) {
                    *b += d;
                }
            }
        }
        let dcurrent = &mut cache.dcurrent;
        zero_into(dcurrent, batch * hidden.inputs);
        gemm(
            batch,
            h,
            hidden.inputs,
            dhidden,
            (h, 1),
            &hidden.weight,
            (hidden.inputs, 1),
            0.0,
            dcurrent,
            (hidden.inputs, 1),
        );

        let dpre = &mut cache.pre;
        for (li, (layer, block)) in self.convs.iter().zip(&cache.blocks).enumerate().rev() {
            let f = layer.out_channels;
            let c_in = layer.in_channels;
            let width = layer.kernel * c_in;
            if !block.mask.is_empty() {
                dcurrent.iter_mut().zip(&block.mask).for_each(|(d, m)| *d *= m);
            }
            // Route through max-pool, then the softplus derivative.
            zero_into(dpre, block.rows * f);
            for (cell, &d) in dcurrent.iter().enumerate() {
                dpre[block.argmax[cell] as usize * f + cell % f] += d * block.slope[cell];
            }

            if let Some(g) = grads.as_deref_mut() {
                let (gw, rest) = g.0[2 * li..].split_at_mut(1);
                gemm(
                    f,
                    block.rows,
                    width,
                    dpre,
                    (1, f),
                    &block.input,
                    (c_in, 1),
                    1.0,
                    &mut gw[0],
                    (width, 1),
                );
                let gb = &mut rest[0];
                for row in dpre.chunks_exact(f) {
                    for (b, d) in gb.iter_mut().zip(row) {
                        *b += d;
                    }
                }
            }

            if li == 0 && !want_input {
                return None;
            }
            // One product per kernel tap, accumulated straight into the input gradient.
            let dinput = &mut cache.dnext;
            zero_into(dinput, batch * block.input_len * c_in);
            for k in 0..layer.kernel {
                gemm(
                    block.rows,
                    f,
                    c_in,
                    dpre,
                    (f, 1),
                    &layer.weight[k * c_in..],
                    (width, 1),
                    1.0,
                    &mut dinput[k * c_in..],
                    (c_in, 1),
                );
            }
            std::mem::swap(dcurrent, dinput);
        }
        want_input.then(|| dcurrent.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::super::{CnnArch, Mode};
    use super::*;
    use crate::math::softplus;
    use crate::rng;

    fn tiny_arch() -> CnnArch {
        CnnArch {
            blocks: 1,
            filters: 2,
            kernel: 3,
            pool: 2,
            dropout: 0.25,
            hidden: 4,
        }
    }

    #[test]
    fn maxpool_routes_to_argmax() {
        // One block, one filter with an identity kernel centred on the first
        // tap: pre-activations equal the input, so pooling sees [3,1,4,1].
        let arch = CnnArch {
            blocks: 1,
            filters: 1,
            kernel: 1,
            pool: 2,
            dropout: 0.0,
            hidden: 1,
        };
        let mut model = CnnModel::init(arch, 4, 0).unwrap();
        model.convs[0].weight = vec![1.0];
        model.hidden.weight = vec![1.0, 1.0];
        model.output.weight = vec![1.0];
        let x = [3.0, 1.0, 4.0, 1.0];
        let mut cache = model.run(&[&x], None);
        let pooled: Vec<f64> = cache.flat.clone();
        assert!((pooled[0] - softplus(3.0)).abs() < 1e-15);
        assert!((pooled[1] - softplus(4.0)).abs() < 1e-15);
        let dx = model.backward(&mut cache, &[1.0], None, true).unwrap();
        assert!(dx[0] != 0.0 && dx[2] != 0.0);
        assert_eq!(dx[1], 0.0);
        assert_eq!(dx[3], 0.0);
    }

    #[test]
    fn zero_weights_give_half() {
        let mut model = CnnModel::init(tiny_arch(), 16, 3).unwrap();
        for t in model.tensors_mut() {
            t.fill(0.0);
        }
        let x: Vec<f64> = (0..16).map(|i| i as f64).collect();
        assert_eq!(model.predict(&x).unwrap(), 0.5);
        assert_eq!(model.predict(&x).unwrap(), model.predict(&x).unwrap());
    }

    #[test]
    fn eval_mode_ignores_rng() {
        let model = CnnModel::init(tiny_arch(), 16, 3).unwrap();
        let x: Vec<f64> = (0..16).map(|i| (i as f64).sin()).collect();
        let (a, _) = model.forward(&x, Mode::Eval, &mut rng::stream(1, 0)).unwrap();
        let (b, _) = model.forward(&x, Mode::Eval, &mut rng::stream(2, 0)).unwrap();
        assert_eq!(a, b);
        let (c, _) = model.forward(&x, Mode::Train, &mut rng::stream(1, 0)).unwrap();
        let (d, _) = model.forward(&x, Mode::Train, &mut rng::stream(1, 0)).unwrap();
        assert_eq!(c, d);
    }

    #[test]
    fn zero_conv_weights_zero_input_gradient() {
        let mut model = CnnModel::init(tiny_arch(), 16, 3).unwrap();
        model.convs[0].weight.fill(0.0);
        let x: Vec<f64> = (0..16).map(|i| i as f64 * 0.3).collect();
        let g = model.input_gradient(&x).unwrap();
        assert_eq!(g.len(), 16);
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn soft_target_at_output_has_zero_gradient() {
        let model = CnnModel::init(tiny_arch(), 16, 9).unwrap();
        let x: Vec<f64> = (0..16).map(|i| (i as f64 * 0.7).cos()).collect();
        let o = model.predict(&x).unwrap();
        let (_, grads, dx) = model.gradient(&x, o).unwrap();
        assert_eq!(grads.max_abs(), 0.0);
        assert!(dx.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn short_input_rejected() {
        let model = CnnModel::init(CnnArch::default(), 221, 0).unwrap();
        assert!(model.predict(&[0.0; 10]).is_err());
    }
}
