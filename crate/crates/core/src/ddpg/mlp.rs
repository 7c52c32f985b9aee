//! Fully-connected network with ReLU hidden layers and hand-written
//! reverse-mode gradients.
//!
//! Weights of a layer are stored row-major with shape `[n_in, n_out]`, so the
//! forward pass is a sequence of contiguous axpy updates per input unit.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::DdpgError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputActivation {
    Identity,
    /// `scale[j] * tanh(z[j])`
    Tanh,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub n_in: usize,
    pub n_out: usize,
    /// `[n_in, n_out]`, row-major.
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    layers: Vec<Dense>,
    output: OutputActivation,
    /// Per-output multiplier applied after the output activation.
    output_scale: Vec<f64>,
}

/// Parameter gradients with the same block layout as the network.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpGrads {
    pub w: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
}

impl MlpGrads {
    pub fn blocks(&self) -> impl Iterator<Item = &[f64]> {
        self.w.iter().zip(&self.b).flat_map(|(w, b)| [w.as_slice(), b.as_slice()])
    }

    pub fn flat(&self) -> Vec<f64> {
        self.blocks().flatten().copied().collect()
    }
}

/// Activations kept from a batched forward pass for backprop.
#[derive(Clone, Debug)]
pub struct ForwardCache {
    batch: usize,
    /// `inputs[l]` is the (post-activation) input to layer `l`, `batch x n_in`.
    inputs: Vec<Vec<f64>>,
    /// Output-layer activation before scaling (tanh value or identity output).
    pre_scale: Vec<f64>,
    output: Vec<f64>,
}

impl ForwardCache {
    pub fn output(&self) -> &[f64] {
        &self.output
    }

    pub fn batch(&self) -> usize {
        self.batch
    }
}

impl Mlp {
    /// Zero-initialized network.
    pub fn zeros(sizes: &[usize], output: OutputActivation) -> Self {
        assert!(sizes.len() >= 2, "need at least input and output sizes");
        let layers = sizes
            .windows(2)
            .map(|w| Dense {
                n_in: w[0],
                n_out: w[1],
                w: vec![0.0; w[0] * w[1]],
                b: vec![0.0; w[1]],
            })
            .collect();
        Self {
            layers,
            output,
            output_scale: vec![1.0; *sizes.last().unwrap()],
        }
    }

    /// Fan-in uniform initialization `U(-1/sqrt(n_in), 1/sqrt(n_in))` for hidden
    /// layers and `U(-final_scale, final_scale)` for the output layer.
    pub fn init<R: Rng + ?Sized>(sizes: &[usize], output: OutputActivation, final_scale: f64, rng: &mut R) -> Self {
        let mut net = Self::zeros(sizes, output);
        let last = net.layers.len() - 1;
        for (l, layer) in net.layers.iter_mut().enumerate() {
            let bound = if l == last { final_scale } else { 1.0 / (layer.n_in as f64).sqrt() };
            for v in layer.w.iter_mut().chain(layer.b.iter_mut()) {
                *v = rng.random_range(-bound..=bound);
            }
        }
        net
    }

    pub fn from_layers(layers: Vec<Dense>, output: OutputActivation, output_scale: Vec<f64>) -> Result<Self, DdpgError> {
        if layers.is_empty() {
            return Err(DdpgError::Shape("network has no layers".into()));
        }
        for (l, d) in layers.iter().enumerate() {
            if d.w.len() != d.n_in * d.n_out || d.b.len() != d.n_out {
                return Err(DdpgError::Shape(format!("layer {l} parameter sizes do not match {}x{}", d.n_in, d.n_out)));
            }
            if l > 0 && layers[l - 1].n_out != d.n_in {
                return Err(DdpgError::Shape(format!("layer {l} input {} != previous output {}", d.n_in, layers[l - 1].n_out)));
            }
        }
        if output_scale.len() != layers.last().unwrap().n_out {
            return Err(DdpgError::Shape("output_scale length does not match output size".into()));
        }
        Ok(Self { layers, output, output_scale })
    }

    pub fn with_output_scale(mut self, scale: Vec<f64>) -> Self {
        assert_eq!(scale.len(), self.output_dim());
        self.output_scale = scale;
        self
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn output_activation(&self) -> OutputActivation {
        self.output
    }

    pub fn output_scale(&self) -> &[f64] {
        &self.output_scale
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![self.layers[0].n_in];
        s.extend(self.layers.iter().map(|l| l.n_out));
        s
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].n_in
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().n_out
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    pub fn blocks(&self) -> impl Iterator<Item = &[f64]> {
        self.layers.iter().flat_map(|l| [l.w.as_slice(), l.b.as_slice()])
    }

    pub fn blocks_mut(&mut self) -> impl Iterator<Item = &mut Vec<f64>> {
        self.layers.iter_mut().flat_map(|l| [&mut l.w, &mut l.b])
    }

    pub fn flat_params(&self) -> Vec<f64> {
        self.blocks().flatten().copied().collect()
    }

    pub fn set_flat_params(&mut self, flat: &[f64]) -> Result<(), DdpgError> {
        if flat.len() != self.param_count() {
            return Err(DdpgError::Shape(format!("expected {} parameters, got {}", self.param_count(), flat.len())));
        }
        let mut k = 0;
        for block in self.blocks_mut() {
            let n = block.len();
            block.copy_from_slice(&flat[k..k + n]);
            k += n;
        }
        Ok(())
    }

    pub fn all_finite(&self) -> bool {
        self.blocks().flatten().all(|v| v.is_finite())
    }

    pub fn same_shape(&self, other: &Mlp) -> bool {
        self.sizes() == other.sizes()
    }

    /// Single-sample forward pass.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>, DdpgError> {
        if x.len() != self.input_dim() {
            return Err(DdpgError::Shape(format!("input length {} != {}", x.len(), self.input_dim())));
        }
        Ok(self.forward_batch(x, 1).output)
    }

    /// Batched forward pass over `batch` rows of `x` (row-major).
    pub fn forward_batch(&self, x: &[f64], batch: usize) -> ForwardCache {
        assert_eq!(x.len(), batch * self.input_dim(), "batch input shape");
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut cur = x.to_vec();
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let mut out = vec![0.0; batch * layer.n_out];
            for (row, xrow) in out.chunks_exact_mut(layer.n_out).zip(cur.chunks_exact(layer.n_in)) {
                row.copy_from_slice(&layer.b);
                for (i, &xi) in xrow.iter().enumerate() {
                    if xi == 0.0 {
                        continue;
                    }
                    let wrow = &layer.w[i * layer.n_out..(i + 1) * layer.n_out];
                    for (o, &w) in row.iter_mut().zip(wrow) {
                        *o += xi * w;
                    }
                }
            }
            if l < last {
                for v in out.iter_mut() {
                    if *v < 0.0 {
                        *v = 0.0;
                    }
                }
            }
            inputs.push(std::mem::replace(&mut cur, out));
        }
        let pre_scale = match self.output {
            OutputActivation::Identity => cur,
            OutputActivation::Tanh => cur.into_iter().map(f64::tanh).collect(),
        };
        let k = self.output_dim();
        let output = pre_scale
            .chunks_exact(k)
            .flat_map(|row| row.iter().zip(&self.output_scale).map(|(v, s)| v * s))
            .collect();
        ForwardCache {
            batch,
            inputs,
            pre_scale,
            output,
        }
    }

    /// Reverse pass for a batched forward. `d_output` is dL/d(output),
    /// `batch x output_dim`. Returns parameter gradients (if requested) and
    /// dL/d(input).
    pub fn backward(&self, cache: &ForwardCache, d_output: &[f64], param_grads: bool) -> (Option<MlpGrads>, Vec<f64>) {
        let batch = cache.batch;
        let k = self.output_dim();
        assert_eq!(d_output.len(), batch * k, "output gradient shape");

        // Through the scale and output activation.
        let mut delta: Vec<f64> = d_output
            .chunks_exact(k)
            .zip(cache.pre_scale.chunks_exact(k))
            .flat_map(|(g, y)| {
                g.iter().zip(y).zip(&self.output_scale).map(|((g, y), s)| match self.output {
                    OutputActivation::Identity => g * s,
                    OutputActivation::Tanh => g * s * (1.0 - y * y),
                })
            })
            .collect();

        let mut gw: Vec<Vec<f64>> = Vec::new();
        let mut gb: Vec<Vec<f64>> = Vec::new();
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let input = &cache.inputs[l];
            if param_grads {
                let mut dw = vec![0.0; layer.w.len()];
                let mut db = vec![0.0; layer.n_out];
                for (xrow, drow) in input.chunks_exact(layer.n_in).zip(delta.chunks_exact(layer.n_out)) {
                    for (b, d) in db.iter_mut().zip(drow) {
                        *b += d;
                    }
                    for (i, &xi) in xrow.iter().enumerate() {
                        if xi == 0.0 {
                            continue;
                        }
                        for (w, d) in dw[i * layer.n_out..(i + 1) * layer.n_out].iter_mut().zip(drow) {
                            *w += xi * d;
                        }
                    }
                }
                gw.push(dw);
                gb.push(db);
            }
            // dL/d(input) = delta . W^T, masked by the ReLU of the previous layer.
            let mut dx = vec![0.0; batch * layer.n_in];
            for ((dxrow, drow), xrow) in dx
                .chunks_exact_mut(layer.n_in)
                .zip(delta.chunks_exact(layer.n_out))
                .zip(input.chunks_exact(layer.n_in))
            {
                for (i, dxi) in dxrow.iter_mut().enumerate() {
                    if l > 0 && xrow[i] <= 0.0 {
                        continue;
                    }
                    *dxi = dot(&layer.w[i * layer.n_out..(i + 1) * layer.n_out], drow);
                }
            }
            delta = dx;
        }
        let grads = param_grads.then(|| {
            gw.reverse();
            gb.reverse();
            MlpGrads { w: gw, b: gb }
        });
        (grads, delta)
    }

    /// Exact gradients of `<loss_grad, f(x)>` with respect to all parameters.
    pub fn gradients(&self, loss_grad_at_output: &[f64], x: &[f64]) -> Result<MlpGrads, DdpgError> {
        if x.len() != self.input_dim() || loss_grad_at_output.len() != self.output_dim() {
            return Err(DdpgError::Shape("gradient shapes do not match the network".into()));
        }
        let cache = self.forward_batch(x, 1);
        Ok(self.backward(&cache, loss_grad_at_output, true).0.expect("requested"))
    }
}

/// Dot product with four independent accumulators (fixed order, so results
/// are reproducible).
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for (x, y) in ra.iter().zip(rb) {
        s += x * y;
    }
    s
}

/// `target <- tau * online + (1 - tau) * target`, parameter-wise.
pub fn soft_update(target: &mut Mlp, online: &Mlp, tau: f64) -> Result<(), DdpgError> {
    if !target.same_shape(online) {
        return Err(DdpgError::Shape("soft update between differently shaped networks".into()));
    }
    for (t, o) in target.blocks_mut().zip(online.blocks()) {
        for (tv, &ov) in t.iter_mut().zip(o) {
            *tv = tau * ov + (1.0 - tau) * *tv;
        }
    }
    Ok(())
}
