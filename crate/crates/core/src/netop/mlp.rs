use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::Matrix;
use crate::{math, rng, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Activation {
    Softplus,
    Tanh,
    Linear,
}

impl Activation {
    #[inline]
    pub fn value(self, x: f64) -> f64 {
        match self {
            Activation::Softplus => math::softplus(x),
            Activation::Tanh => math::tanh(x),
            Activation::Linear => x,
        }
    }

    #[inline]
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Softplus => math::logistic(x),
            Activation::Tanh => {
                let t = math::tanh(x);
                1.0 - t * t
            }
            Activation::Linear => 1.0,
        }
    }

    #[inline]
    pub fn second_derivative(self, x: f64) -> f64 {
        match self {
            Activation::Softplus => {
                let s = math::logistic(x);
                s * (1.0 - s)
            }
            Activation::Tanh => {
                let t = math::tanh(x);
                -2.0 * t * (1.0 - t * t)
            }
            Activation::Linear => 0.0,
        }
    }
}

/// Layer widths `[n_0, n_1, …, n_L]` and one activation per layer.
#[derive(Clone, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MlpSpec {
    pub widths: Vec<usize>,
    pub activations: Vec<Activation>,
}

impl MlpSpec {
    /// `hidden` on every layer except the last, which is linear.
    pub fn new(widths: Vec<usize>, hidden: Activation) -> Result<Self> {
        let layers = widths.len().saturating_sub(1);
        let activations = (0..layers).map(|l| if l + 1 == layers { Activation::Linear } else { hidden }).collect();
        Self::with_activations(widths, activations)
    }

    pub fn with_activations(widths: Vec<usize>, activations: Vec<Activation>) -> Result<Self> {
        if widths.len() < 2 || widths.contains(&0) {
            return Err(Error::invalid("a network needs at least one layer and positive widths"));
        }
        if activations.len() != widths.len() - 1 {
            return Err(Error::invalid(format!(
                "{} activations for {} layers",
                activations.len(),
                widths.len() - 1
            )));
        }
        Ok(MlpSpec { widths, activations })
    }

    /// Input width, `hidden` layers of width `width`, output width.
    pub fn uniform(input: usize, width: usize, hidden: usize, output: usize, act: Activation) -> Result<Self> {
        let mut widths = vec![input];
        widths.extend(core::iter::repeat(width).take(hidden));
        widths.push(output);
        Self::new(widths, act)
    }

    pub fn layers(&self) -> usize {
        self.widths.len() - 1
    }

    pub fn input_width(&self) -> usize {
        self.widths[0]
    }

    pub fn output_width(&self) -> usize {
        *self.widths.last().unwrap()
    }

    /// `d_W`, the number of trainable parameters.
    pub fn parameter_count(&self) -> usize {
        self.widths.windows(2).map(|w| w[1] * w[0] + w[1]).sum()
    }
}

/// All weights and biases in one flat vector; layer `l` stores `W_l`
/// (`n_l × n_{l−1}`, row-major) followed by `b_l`.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkWeights {
    shapes: Vec<(usize, usize)>,
    offsets: Vec<usize>,
    data: Vec<f64>,
}

impl NetworkWeights {
    pub fn zeros(spec: &MlpSpec) -> Self {
        let shapes: Vec<(usize, usize)> = spec.widths.windows(2).map(|w| (w[1], w[0])).collect();
        let mut offsets = Vec::with_capacity(shapes.len());
        let mut total = 0;
        for &(o, i) in &shapes {
            offsets.push(total);
            total += o * i + o;
        }
        NetworkWeights { shapes, offsets, data: vec![0.0; total] }
    }

    /// Gaussian weights with variance `2/(fan_in + fan_out)`, zero biases.
    pub fn init(spec: &MlpSpec, seed: u64) -> Self {
        let mut w = Self::zeros(spec);
        let mut r = rng::stream(seed);
        for l in 0..w.shapes.len() {
            let (o, i) = w.shapes[l];
            let scale = math::sqrt(2.0 / (o + i) as f64);
            let draws = rng::normal_vec(&mut r, o * i);
            w.weight_mut(l).iter_mut().zip(draws).for_each(|(x, g)| *x = scale * g);
        }
        w
    }

    pub fn from_vec(spec: &MlpSpec, data: Vec<f64>) -> Result<Self> {
        let mut w = Self::zeros(spec);
        if data.len() != w.data.len() {
            return Err(Error::invalid(format!("{} weights supplied, the network has {}", data.len(), w.data.len())));
        }
        w.data = data;
        Ok(w)
    }

    pub fn matches(&self, spec: &MlpSpec) -> bool {
        self.shapes.len() == spec.layers()
            && self.shapes.iter().zip(spec.widths.windows(2)).all(|(&(o, i), w)| o == w[1] && i == w[0])
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn layers(&self) -> usize {
        self.shapes.len()
    }

    /// `(n_l, n_{l−1})` for layer `l` (zero-based).
    pub fn shape(&self, l: usize) -> (usize, usize) {
        self.shapes[l]
    }

    pub fn weight(&self, l: usize) -> &[f64] {
        let (o, i) = self.shapes[l];
        &self.data[self.offsets[l]..self.offsets[l] + o * i]
    }

    pub fn weight_mut(&mut self, l: usize) -> &mut [f64] {
        let (o, i) = self.shapes[l];
        &mut self.data[self.offsets[l]..self.offsets[l] + o * i]
    }

    pub fn bias(&self, l: usize) -> &[f64] {
        let (o, i) = self.shapes[l];
        let start = self.offsets[l] + o * i;
        &self.data[start..start + o]
    }

    pub fn bias_mut(&mut self, l: usize) -> &mut [f64] {
        let (o, i) = self.shapes[l];
        let start = self.offsets[l] + o * i;
        &mut self.data[start..start + o]
    }

    pub fn weight_matrix(&self, l: usize) -> Matrix {
        let (o, i) = self.shapes[l];
        Matrix::from_vec(o, i, self.weight(l).to_vec())
    }

    /// Offset of layer `l` in the flat vector (weights first, then biases).
    pub fn offset(&self, l: usize) -> usize {
        self.offsets[l]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }
}

/// Pre-activations `s_l` and outputs `a_l` of one forward pass; `post[0]` is the input.
#[derive(Clone, Debug)]
pub struct Tape {
    pub pre: Vec<Vec<f64>>,
    pub post: Vec<Vec<f64>>,
}

impl Tape {
    pub fn output(&self) -> &[f64] {
        self.post.last().unwrap()
    }
}

pub fn forward_tape(spec: &MlpSpec, w: &NetworkWeights, z: &[f64]) -> Tape {
    let mut pre = Vec::with_capacity(spec.layers());
    let mut post = Vec::with_capacity(spec.layers() + 1);
    post.push(z.to_vec());
    for l in 0..spec.layers() {
        let (o, i) = w.shape(l);
        let wl = w.weight(l);
        let a = &post[l];
        let s: Vec<f64> = (0..o)
            .map(|r| wl[r * i..(r + 1) * i].iter().zip(a).map(|(x, y)| x * y).sum::<f64>() + w.bias(l)[r])
            .collect();
        let act = spec.activations[l];
        post.push(s.iter().map(|&x| act.value(x)).collect());
        pre.push(s);
    }
    Tape { pre, post }
}

pub fn mlp_forward(spec: &MlpSpec, w: &NetworkWeights, z: &[f64]) -> Vec<f64> {
    forward_tape(spec, w, z).post.pop().unwrap()
}

/// `∂y/∂z = D_L W_L ⋯ D_1 W_1`, an `n_L × n_0` matrix.
pub fn mlp_jacobian(spec: &MlpSpec, w: &NetworkWeights, z: &[f64]) -> Matrix {
    let tape = forward_tape(spec, w, z);
    let mut m: Option<Matrix> = None;
    for l in 0..spec.layers() {
        let wl = w.weight_matrix(l);
        let mut n = match &m {
            None => wl,
            Some(prev) => wl.matmul(prev),
        };
        let act = spec.activations[l];
        for r in 0..n.rows() {
            let d = act.derivative(tape.pre[l][r]);
            n.row_mut(r).iter_mut().for_each(|x| *x *= d);
        }
        m = Some(n);
    }
    m.unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_and_counts() {
        let spec = MlpSpec::new(vec![3, 4, 2], Activation::Softplus).unwrap();
        assert_eq!(spec.activations, [Activation::Softplus, Activation::Linear]);
        assert_eq!(spec.parameter_count(), 3 * 4 + 4 + 4 * 2 + 2);
        let w = NetworkWeights::init(&spec, 1);
        assert_eq!(w.len(), spec.parameter_count());
        assert_eq!(w.offset(1), 16);
        assert!(w.bias(0).iter().all(|&b| b == 0.0));
        assert!(MlpSpec::new(vec![3], Activation::Softplus).is_err());
        assert!(MlpSpec::new(vec![3, 0, 1], Activation::Softplus).is_err());
    }

    #[test]
    fn single_softplus_neuron() {
        let spec = MlpSpec::with_activations(vec![1, 1], vec![Activation::Softplus]).unwrap();
        let w = NetworkWeights::from_vec(&spec, vec![1.0, 0.0]).unwrap();
        assert!((mlp_forward(&spec, &w, &[0.0])[0] - core::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn activation_derivatives() {
        for act in [Activation::Softplus, Activation::Tanh, Activation::Linear] {
            for &x in &[-3.0, -0.2, 0.0, 0.7, 4.0] {
                let h = 1e-5;
                let d1 = (act.value(x + h) - act.value(x - h)) / (2.0 * h);
                let d2 = (act.derivative(x + h) - act.derivative(x - h)) / (2.0 * h);
                assert!((d1 - act.derivative(x)).abs() < 1e-9);
                assert!((d2 - act.second_derivative(x)).abs() < 1e-9);
            }
        }
    }
}
