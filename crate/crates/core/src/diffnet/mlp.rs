use ndarray::{Array2, ArrayView2, Axis};
use rand::Rng;

use super::{init::xavier_init_with, ParamSet};
use crate::error::Result;

#[derive(Clone, Copy, Debug, PartialEq)]
struct Layer {
    w: usize,
    b: usize,
    fan_in: usize,
    fan_out: usize,
}

/// Fully connected network with tanh hidden layers and a linear output.
///
/// The network only records where its weights live inside a [`ParamSet`];
/// the set itself is owned by the model.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    layers: Vec<Layer>,
}

/// Activations kept from a forward pass for backpropagation.
#[derive(Clone, Debug)]
pub struct MlpCache {
    /// `acts[0]` is the input; `acts[i]` the output of layer `i - 1`.
    acts: Vec<Array2<f64>>,
}

impl MlpCache {
    pub fn output(&self) -> &Array2<f64> {
        self.acts.last().expect("cache holds the input at least")
    }
}

impl Mlp {
    /// Registers weights `{prefix}.l{i}.w` (Xavier) and biases `{prefix}.l{i}.b` (zero).
    pub fn new<R: Rng>(params: &mut ParamSet, prefix: &str, sizes: &[usize], rng: &mut R) -> Result<Self> {
        let mut layers = Vec::with_capacity(sizes.len().saturating_sub(1));
        for (i, pair) in sizes.windows(2).enumerate() {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let w = params.add(
                format!("{prefix}.l{i}.w"),
                &[fan_out, fan_in],
                xavier_init_with((fan_out, fan_in), rng)?,
            )?;
            let b = params.add(format!("{prefix}.l{i}.b"), &[fan_out], vec![0.0; fan_out])?;
            layers.push(Layer { w, b, fan_in, fan_out });
        }
        Ok(Self { layers })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].fan_in
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.fan_out)
    }

    fn weights<'a>(&self, params: &'a ParamSet, layer: &Layer) -> ArrayView2<'a, f64> {
        ArrayView2::from_shape((layer.fan_out, layer.fan_in), &params.get(layer.w).value)
            .expect("weight shape registered at construction")
    }

    fn affine(&self, params: &ParamSet, layer: &Layer, x: &ArrayView2<f64>) -> Array2<f64> {
        let mut z = x.dot(&self.weights(params, layer).t());
        let bias = &params.get(layer.b).value;
        for mut row in z.rows_mut() {
            row.iter_mut().zip(bias).for_each(|(v, b)| *v += b);
        }
        z
    }

    /// Batch forward pass; one input per row.
    pub fn forward(&self, params: &ParamSet, x: ArrayView2<f64>) -> Array2<f64> {
        let last = self.layers.len() - 1;
        let mut h = self.affine(params, &self.layers[0], &x);
        if last > 0 {
            h.mapv_inplace(f64::tanh);
        }
        for (i, layer) in self.layers.iter().enumerate().skip(1) {
            h = self.affine(params, layer, &h.view());
            if i < last {
                h.mapv_inplace(f64::tanh);
            }
        }
        h
    }

    pub fn forward_cached(&self, params: &ParamSet, x: ArrayView2<f64>) -> MlpCache {
        let last = self.layers.len() - 1;
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.to_owned());
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = self.affine(params, layer, &acts[i].view());
            if i < last {
                z.mapv_inplace(f64::tanh);
            }
            acts.push(z);
        }
        MlpCache { acts }
    }

    /// Accumulates parameter gradients for the upstream gradient `d_out` and
    /// returns the gradient with respect to the input.
    pub fn backward(&self, params: &mut ParamSet, cache: &MlpCache, d_out: ArrayView2<f64>) -> Array2<f64> {
        let mut dz = d_out.to_owned();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let input = &cache.acts[i];
            let dw = dz.t().dot(input);
            let db = dz.sum_axis(Axis(0));
            let d_in = dz.dot(&self.weights(params, layer));
            params
                .get_mut(layer.w)
                .grad
                .iter_mut()
                .zip(dw.iter())
                .for_each(|(g, d)| *g += d);
            params
                .get_mut(layer.b)
                .grad
                .iter_mut()
                .zip(db.iter())
                .for_each(|(g, d)| *g += d);
            dz = if i > 0 {
                // Previous layer output is tanh-activated.
                let mut d = d_in;
                d.zip_mut_with(input, |g, a| *g *= 1.0 - a * a);
                d
            } else {
                d_in
            };
        }
        dz
    }
}
