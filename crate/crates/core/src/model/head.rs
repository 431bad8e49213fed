//! The affordance head: fully connected layers with layer normalization and
//! SiLU after each hidden layer, and a 4-wide output `(mu_x, mu_y, mu_z, s)`
//! where the region spread is `softplus(s)`.
//!
//! All parameters live in one flat vector so the optimizer, the checkpoint
//! writer and the gradient checks can treat them uniformly.

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, ArrayViewMut1, ArrayViewMut2, Axis};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::geometry::{GroundGaussian, Vec3};
use crate::scalar::Real;
use crate::seed::rng_for;

pub const OUTPUT_WIDTH: usize = 4;
const LAYER_NORM_EPS: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct LayerLayout {
    pub fan_in: usize,
    pub fan_out: usize,
    pub weight: usize,
    pub bias: usize,
    /// Offset of the layer-norm gain; the layer-norm bias follows it.
    pub norm: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AffordanceHead<T: Real = f32> {
    input: usize,
    hidden: Vec<usize>,
    layers: Vec<LayerLayout>,
    params: Vec<T>,
}

pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn softplus_t<T: Real>(x: T) -> T {
    x.max(T::zero()) + (-x.abs()).exp().ln_1p()
}

fn sigmoid_t<T: Real>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}

/// Hidden widths used when none are configured: three layers of
/// `max(dim, 128)` units for embeddings of dimension `dim`.
pub fn default_hidden(dim: usize) -> Vec<usize> {
    vec![dim.max(128); 3]
}

fn layout(input: usize, hidden: &[usize]) -> (Vec<LayerLayout>, usize) {
    let mut layers = Vec::with_capacity(hidden.len() + 1);
    let mut offset = 0;
    let mut fan_in = input;
    let widths = hidden.iter().copied().map(Some).chain([None]);
    for width in widths {
        let fan_out = width.unwrap_or(OUTPUT_WIDTH);
        let weight = offset;
        let bias = weight + fan_in * fan_out;
        offset = bias + fan_out;
        let norm = width.map(|_| {
            let o = offset;
            offset += 2 * fan_out;
            o
        });
        layers.push(LayerLayout { fan_in, fan_out, weight, bias, norm });
        fan_in = fan_out;
    }
    (layers, offset)
}

/// Per-batch intermediate values kept for the backward pass.
pub struct Tape<T: Real> {
    inputs: Vec<Array2<T>>,
    normalized: Vec<Array2<T>>,
    inv_std: Vec<Array1<T>>,
    activated_pre: Vec<Array2<T>>,
    pub output: Array2<T>,
}

impl<T: Real> AffordanceHead<T> {
    /// Head with every parameter zero.
    pub fn zeros(input: usize, hidden: &[usize]) -> Self {
        let (layers, count) = layout(input, hidden);
        Self { input, hidden: hidden.to_vec(), layers, params: vec![T::zero(); count] }
    }

    /// Seeded initialization: normal weights with variance `1 / fan_in`,
    /// zero biases, unit layer-norm gains. The same seed gives the same
    /// values for every scalar type up to rounding.
    pub fn seeded(input: usize, hidden: &[usize], seed: u64) -> Self {
        let mut head = Self::zeros(input, hidden);
        let mut rng = rng_for(seed, "head-init");
        for layer in head.layers.clone() {
            let scale = (1.0 / layer.fan_in as f64).sqrt();
            let final_layer = layer.norm.is_none();
            for p in &mut head.params[layer.weight..layer.bias] {
                let z: f64 = rng.sample(StandardNormal);
                *p = T::of(z * scale * if final_layer { 0.5 } else { 1.0 });
            }
            if let Some(norm) = layer.norm {
                for p in &mut head.params[norm..norm + layer.fan_out] {
                    *p = T::one();
                }
            }
        }
        head
    }

    pub fn from_params(input: usize, hidden: &[usize], params: Vec<T>) -> Result<Self> {
        let mut head = Self::zeros(input, hidden);
        if params.len() != head.params.len() {
            return Err(Error::Shape { expected: head.params.len(), actual: params.len() });
        }
        head.params = params;
        Ok(head)
    }

    pub fn input_width(&self) -> usize {
        self.input
    }

    pub fn hidden(&self) -> &[usize] {
        &self.hidden
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [T] {
        &mut self.params
    }

    /// Named parameter blocks in storage order: `(name, shape, range)`.
    pub fn blocks(&self) -> Vec<(String, Vec<usize>, std::ops::Range<usize>)> {
        let mut out = Vec::new();
        for (i, l) in self.layers.iter().enumerate() {
            out.push((format!("head.{i}.weight"), vec![l.fan_out, l.fan_in], l.weight..l.bias));
            out.push((format!("head.{i}.bias"), vec![l.fan_out], l.bias..l.bias + l.fan_out));
            if let Some(n) = l.norm {
                out.push((format!("head.{i}.norm_gain"), vec![l.fan_out], n..n + l.fan_out));
                out.push((format!("head.{i}.norm_bias"), vec![l.fan_out], n + l.fan_out..n + 2 * l.fan_out));
            }
        }
        out
    }

    pub fn cast<U: Real>(&self) -> AffordanceHead<U> {
        AffordanceHead {
            input: self.input,
            hidden: self.hidden.clone(),
            layers: self.layers.clone(),
            params: self.params.iter().map(|v| U::of(v.to_f64_lossless())).collect(),
        }
    }

    fn weight(&self, l: &LayerLayout) -> ArrayView2<'_, T> {
        ArrayView2::from_shape((l.fan_out, l.fan_in), &self.params[l.weight..l.bias]).unwrap()
    }

    fn vector(&self, start: usize, len: usize) -> ArrayView1<'_, T> {
        ArrayView1::from(&self.params[start..start + len])
    }

    /// Raw outputs for a batch of inputs (one row per example).
    pub fn forward_batch(&self, x: ArrayView2<'_, T>) -> Result<Tape<T>> {
        if x.ncols() != self.input {
            return Err(Error::Shape { expected: self.input, actual: x.ncols() });
        }
        let eps = T::of(LAYER_NORM_EPS);
        let mut tape = Tape {
            inputs: Vec::with_capacity(self.layers.len()),
            normalized: Vec::new(),
            inv_std: Vec::new(),
            activated_pre: Vec::new(),
            output: Array2::zeros((0, 0)),
        };
        let mut h = x.to_owned();
        for l in &self.layers {
            let mut z = h.dot(&self.weight(l).t());
            z += &self.vector(l.bias, l.fan_out);
            tape.inputs.push(h);
            match l.norm {
                None => {
                    tape.output = z;
                    return Ok(tape);
                }
                Some(n) => {
                    let width = T::of(l.fan_out as f64);
                    let gain = self.vector(n, l.fan_out);
                    let beta = self.vector(n + l.fan_out, l.fan_out);
                    let mut inv = Array1::zeros(z.nrows());
                    for (mut row, inv_r) in z.rows_mut().into_iter().zip(inv.iter_mut()) {
                        let mean = row.sum() / width;
                        row.mapv_inplace(|v| v - mean);
                        let var = row.iter().map(|&v| v * v).sum::<T>() / width;
                        *inv_r = T::one() / (var + eps).sqrt();
                        let k = *inv_r;
                        row.mapv_inplace(|v| v * k);
                    }
                    // z now holds the normalized values
                    let pre = &z * &gain + beta;
                    let act = pre.mapv(|v| v * sigmoid_t(v));
                    tape.normalized.push(z);
                    tape.inv_std.push(inv);
                    tape.activated_pre.push(pre);
                    h = act;
                }
            }
        }
        unreachable!("the last layer has no normalization")
    }

    /// Backpropagates `d_output` through the tape, accumulating parameter
    /// gradients into `grads` and returning the gradient with respect to the
    /// input batch.
    pub fn backward(&self, tape: &Tape<T>, d_output: ArrayView2<'_, T>, grads: &mut [T]) -> Array2<T> {
        debug_assert_eq!(grads.len(), self.params.len());
        let mut dz = d_output.to_owned();
        for (i, l) in self.layers.iter().enumerate().rev() {
            let input = &tape.inputs[i];
            {
                let mut dw = ArrayViewMut2::from_shape((l.fan_out, l.fan_in), &mut grads[l.weight..l.bias]).unwrap();
                dw += &dz.t().dot(input);
            }
            {
                let mut db = ArrayViewMut1::from(&mut grads[l.bias..l.bias + l.fan_out]);
                db += &dz.sum_axis(Axis(0));
            }
            let dh = dz.dot(&self.weight(l));
            if i == 0 {
                return dh;
            }
            // previous hidden layer: act = silu(pre), pre = gain * xhat + beta
            let p = &self.layers[i - 1];
            let n = p.norm.expect("hidden layers are normalized");
            let pre = &tape.activated_pre[i - 1];
            let xhat = &tape.normalized[i - 1];
            let inv = &tape.inv_std[i - 1];
            let mut dpre = dh;
            dpre.zip_mut_with(pre, |d, &v| {
                let sg = sigmoid_t(v);
                *d = *d * sg * (T::one() + v * (T::one() - sg));
            });
            {
                let mut dgain = ArrayViewMut1::from(&mut grads[n..n + p.fan_out]);
                dgain += &(&dpre * xhat).sum_axis(Axis(0));
            }
            {
                let mut dbeta = ArrayViewMut1::from(&mut grads[n + p.fan_out..n + 2 * p.fan_out]);
                dbeta += &dpre.sum_axis(Axis(0));
            }
            let gain = self.vector(n, p.fan_out);
            let mut dxhat = dpre;
            dxhat *= &gain;
            let width = T::of(p.fan_out as f64);
            let mut dprev = Array2::zeros(dxhat.raw_dim());
            for (r, (dx_row, xh_row)) in dxhat.rows().into_iter().zip(xhat.rows()).enumerate() {
                let sum_d = dx_row.sum();
                let sum_dx = dx_row.iter().zip(xh_row).map(|(&a, &b)| a * b).sum::<T>();
                let k = inv[r] / width;
                let mut out = dprev.row_mut(r);
                for ((o, &d), &xh) in out.iter_mut().zip(dx_row).zip(xh_row) {
                    *o = k * (width * d - sum_d - xh * sum_dx);
                }
            }
            dz = dprev;
        }
        unreachable!()
    }

    /// Single-example forward pass to a region.
    pub fn forward(&self, vision: &[T], text: &[T]) -> Result<GroundGaussian> {
        if vision.len() + text.len() != self.input {
            return Err(Error::Shape { expected: self.input, actual: vision.len() + text.len() });
        }
        let mut x = Array2::zeros((1, self.input));
        x.slice_mut(s![0, ..vision.len()]).assign(&ArrayView1::from(vision));
        x.slice_mut(s![0, vision.len()..]).assign(&ArrayView1::from(text));
        let tape = self.forward_batch(x.view())?;
        Ok(output_region(tape.output.row(0)))
    }
}

/// Region encoded by one raw output row.
pub fn output_region<T: Real>(row: ArrayView1<'_, T>) -> GroundGaussian {
    GroundGaussian::new(
        Vec3::new(row[0].to_f64_lossless(), row[1].to_f64_lossless(), row[2].to_f64_lossless()),
        softplus_t(row[3]).to_f64_lossless(),
    )
}

/// Target region in the network's scalar type.
#[derive(Debug, Clone, Copy)]
pub struct Target<T: Real> {
    pub mean: [T; 3],
    pub sigma: T,
}

impl<T: Real> From<&GroundGaussian> for Target<T> {
    fn from(g: &GroundGaussian) -> Self {
        Target { mean: [T::of(g.mean.x), T::of(g.mean.y), T::of(g.mean.z)], sigma: T::of(g.sigma) }
    }
}

/// Sum of per-row Frechet distances between outputs and targets, with the
/// gradient of `sum / normalizer` written into `d_output`.
pub fn frechet_loss_grad<T: Real>(
    output: ArrayView2<'_, T>,
    targets: &[Target<T>],
    normalizer: T,
    mut d_output: ArrayViewMut2<'_, T>,
) -> T {
    let two = T::of(2.0);
    let mut total = T::zero();
    for ((row, target), mut d) in output.rows().into_iter().zip(targets).zip(d_output.rows_mut()) {
        let dm = [row[0] - target.mean[0], row[1] - target.mean[1], row[2] - target.mean[2]];
        let sigma = softplus_t(row[3]);
        let ds = sigma - target.sigma;
        let dist = (dm[0] * dm[0] + dm[1] * dm[1] + dm[2] * dm[2] + two * ds * ds).sqrt();
        total += dist;
        if dist > T::zero() {
            let k = T::one() / (dist * normalizer);
            d[0] = dm[0] * k;
            d[1] = dm[1] * k;
            d[2] = dm[2] * k;
            d[3] = two * ds * k * sigmoid_t(row[3]);
        } else {
            d.fill(T::zero());
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_head_outputs_origin_and_softplus_zero() {
        let head = AffordanceHead::<f64>::zeros(8, &[6, 6, 6]);
        let r = head.forward(&[0.3; 4], &[-1.0; 4]).unwrap();
        assert_eq!(r.mean, Vec3::zeros());
        assert!((r.sigma - 2f64.ln()).abs() < 1e-15);
        assert!((r.sigma - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn paper_scale_parameter_count() {
        let head = AffordanceHead::<f32>::zeros(1024, &default_hidden(512));
        let n = head.param_count();
        assert!((1_040_000..1_070_000).contains(&n), "{n}");
        assert_eq!(default_hidden(64), vec![128; 3]);
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let head = AffordanceHead::<f32>::zeros(8, &[4, 4, 4]);
        assert!(matches!(head.forward(&[0.0; 3], &[0.0; 4]), Err(Error::Shape { .. })));
    }

    #[test]
    fn seeded_head_is_deterministic() {
        let a = AffordanceHead::<f32>::seeded(8, &[16, 16, 16], 5);
        let b = AffordanceHead::<f32>::seeded(8, &[16, 16, 16], 5);
        let x = [0.1f32, -0.4, 0.9, 0.0];
        assert_eq!(a.forward(&x, &x).unwrap(), b.forward(&x, &x).unwrap());
        assert_ne!(a, AffordanceHead::<f32>::seeded(8, &[16, 16, 16], 6));
    }

    #[test]
    fn sigma_is_positive_for_random_heads() {
        let mut rng = rng_for(1, "sigma-positivity");
        for seed in 0..1000 {
            let head = AffordanceHead::<f32>::seeded(6, &[8, 8, 8], seed);
            let v: Vec<f32> = (0..3).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let t: Vec<f32> = (0..3).map(|_| rng.gen_range(-5.0..5.0)).collect();
            assert!(head.forward(&v, &t).unwrap().sigma > 0.0);
        }
    }

    #[test]
    fn block_layout_covers_every_parameter() {
        let head = AffordanceHead::<f32>::zeros(10, &[7, 5, 3]);
        let mut next = 0;
        for (_, shape, range) in head.blocks() {
            assert_eq!(range.start, next);
            assert_eq!(range.len(), shape.iter().product::<usize>());
            next = range.end;
        }
        assert_eq!(next, head.param_count());
    }

    #[test]
    fn softplus_is_stable() {
        assert!((softplus(0.0) - 2f64.ln()).abs() < 1e-15);
        assert_eq!(softplus(1000.0), 1000.0);
        assert!(softplus(-1000.0) >= 0.0);
    }
}
