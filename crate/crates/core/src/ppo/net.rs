//! Dense tanh networks with hand-written backpropagation.

use ndarray::{Array1, Array2, Axis};
use num_traits::NumCast;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Float type a network can be instantiated with (`f32` for training,
/// `f64` for gradient checks).
pub trait Scalar: ndarray::NdFloat + NumCast + Default {}
impl Scalar for f32 {}
impl Scalar for f64 {}

pub(crate) fn cast<F: Scalar>(x: f64) -> F {
    <F as NumCast>::from(x).expect("f64 casts to network float")
}

pub(crate) fn uncast<F: Scalar>(x: F) -> f64 {
    <f64 as NumCast>::from(x).expect("network float casts to f64")
}

/// `tanh` via `exp`; libm's `tanhf` is several times slower here. Saturates
/// to exactly +-1 for large inputs.
pub(crate) fn tanh<F: Scalar>(x: F) -> F {
    let two = F::one() + F::one();
    F::one() - two / ((two * x).exp() + F::one())
}

/// Fully connected layer, `y = x W + b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense<F> {
    /// `inputs x outputs`.
    pub w: Array2<F>,
    pub b: Array1<F>,
}

impl<F: Scalar> Dense<F> {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self { w: Array2::zeros((inputs, outputs)), b: Array1::zeros(outputs) }
    }

    pub fn num_params(&self) -> usize {
        self.w.len() + self.b.len()
    }
}

/// Orthogonal matrix (orthonormal rows or columns, whichever is shorter)
/// scaled by `gain`, from modified Gram-Schmidt on a Gaussian draw.
pub fn orthogonal<F: Scalar, R: Rng + ?Sized>(rows: usize, cols: usize, gain: f64, rng: &mut R) -> Array2<F> {
    let (n, len) = if rows >= cols { (cols, rows) } else { (rows, cols) };
    let mut vecs: Vec<Vec<f64>> = Vec::with_capacity(n);
    while vecs.len() < n {
        let mut v: Vec<f64> = (0..len).map(|_| rng.sample(StandardNormal)).collect();
        for u in &vecs {
            let d: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
            for (a, b) in v.iter_mut().zip(u) {
                *a -= d * b;
            }
        }
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm > 1e-8 {
            v.iter_mut().for_each(|a| *a /= norm);
            vecs.push(v);
        }
    }
    Array2::from_shape_fn((rows, cols), |(r, c)| {
        let x = if rows >= cols { vecs[c][r] } else { vecs[r][c] };
        cast(x * gain)
    })
}

/// Activations kept from a forward pass: the input followed by the output of
/// every hidden layer.
#[derive(Debug, Clone)]
pub struct MlpCache<F> {
    inputs: Vec<Array2<F>>,
}

/// Multilayer perceptron: tanh after every layer but the last.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp<F> {
    pub layers: Vec<Dense<F>>,
}

impl<F: Scalar> Mlp<F> {
    /// `sizes = [input, hidden.., output]`. Hidden layers use `hidden_gain`,
    /// the output layer `output_gain`; biases start at zero.
    pub fn orthogonal<R: Rng + ?Sized>(sizes: &[usize], hidden_gain: f64, output_gain: f64, rng: &mut R) -> Self {
        assert!(sizes.len() >= 2, "an MLP needs input and output sizes");
        let last = sizes.len() - 2;
        let layers = sizes
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let gain = if i == last { output_gain } else { hidden_gain };
                Dense { w: orthogonal(w[0], w[1], gain, rng), b: Array1::zeros(w[1]) }
            })
            .collect();
        Self { layers }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].w.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("non-empty").w.ncols()
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(Dense::num_params).sum()
    }

    pub fn forward(&self, x: &Array2<F>) -> Array2<F> {
        self.forward_cached(x).0
    }

    pub fn forward_cached(&self, x: &Array2<F>) -> (Array2<F>, MlpCache<F>) {
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut h = x.clone();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = h.dot(&layer.w);
            z += &layer.b;
            inputs.push(h);
            if i < last {
                z.mapv_inplace(tanh);
            }
            h = z;
        }
        (h, MlpCache { inputs })
    }

    /// Gradients of a scalar loss given `d_out = dL/d(output)`.
    pub fn backward(&self, cache: &MlpCache<F>, d_out: &Array2<F>) -> Vec<Dense<F>> {
        let mut grads: Vec<Dense<F>> = Vec::with_capacity(self.layers.len());
        let mut d = d_out.clone();
        for l in (0..self.layers.len()).rev() {
            let input = &cache.inputs[l];
            let gw = input.t().dot(&d).as_standard_layout().into_owned();
            let gb = d.sum_axis(Axis(0));
            if l > 0 {
                let mut back = d.dot(&self.layers[l].w.t());
                // input is tanh output of the previous layer
                ndarray::Zip::from(&mut back).and(input).for_each(|g, &a| *g = *g * (F::one() - a * a));
                d = back;
            }
            grads.push(Dense { w: gw, b: gb });
        }
        grads.reverse();
        grads
    }

    /// Every parameter in layer order, weights before biases.
    pub fn tensors(&self) -> Vec<&[F]> {
        layer_tensors(&self.layers)
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [F]> {
        self.layers
            .iter_mut()
            .flat_map(|l| {
                [l.w.as_slice_mut().expect("standard layout"), l.b.as_slice_mut().expect("standard layout")]
            })
            .collect()
    }
}

/// Parameters (or gradients) of a set of layers as flat tensors.
pub(crate) fn layer_tensors<F: Scalar>(layers: &[Dense<F>]) -> Vec<&[F]> {
    layers
        .iter()
        .flat_map(|l| [l.w.as_slice().expect("standard layout"), l.b.as_slice().expect("standard layout")])
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn tanh_matches_std() {
        for i in -4000..=4000 {
            let x = i as f64 * 0.01;
            assert!((tanh(x) - x.tanh()).abs() < 1e-15, "{x}");
            assert!((tanh(x as f32) - (x as f32).tanh()).abs() < 2e-7, "{x}");
        }
        assert_eq!(tanh(100.0f32), 1.0);
        assert_eq!(tanh(-100.0f32), -1.0);
        assert!(tanh(f64::NAN).is_nan());
    }

    #[test]
    fn orthogonal_columns_are_orthonormal() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let m: Array2<f64> = orthogonal(8, 3, 1.0, &mut rng);
        let g = m.t().dot(&m);
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((g[[i, j]] - expect).abs() < 1e-12);
            }
        }
        let wide: Array2<f64> = orthogonal(3, 8, 2.0, &mut rng);
        let g = wide.dot(&wide.t());
        assert!((g[[1, 1]] - 4.0).abs() < 1e-12 && g[[0, 2]].abs() < 1e-12);
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut net: Mlp<f64> = Mlp::orthogonal(&[3, 4, 2], 1.0, 1.0, &mut rng);
        let x = Array2::from_shape_fn((5, 3), |(i, j)| (i as f64 * 0.3 - j as f64 * 0.2).sin());
        let target = Array2::from_shape_fn((5, 2), |(i, j)| (i + j) as f64 * 0.1);
        let loss = |n: &Mlp<f64>| {
            let y = n.forward(&x);
            (&y - &target).mapv(|v| v * v).sum() * 0.5
        };
        let (y, cache) = net.forward_cached(&x);
        let grads = net.backward(&cache, &(&y - &target));
        let analytic: Vec<f64> = layer_tensors(&grads).into_iter().flatten().copied().collect();
        let mut k = 0;
        let n_tensors = net.tensors().len();
        for t in 0..n_tensors {
            let len = net.tensors()[t].len();
            for i in 0..len {
                let orig = net.tensors()[t][i];
                net.tensors_mut()[t][i] = orig + 1e-6;
                let up = loss(&net);
                net.tensors_mut()[t][i] = orig - 1e-6;
                let down = loss(&net);
                net.tensors_mut()[t][i] = orig;
                let fd = (up - down) / 2e-6;
                assert!((fd - analytic[k]).abs() < 1e-7 * (1.0 + fd.abs()), "param {k}: {fd} vs {}", analytic[k]);
                k += 1;
            }
        }
        assert_eq!(k, net.num_params());
    }
}
