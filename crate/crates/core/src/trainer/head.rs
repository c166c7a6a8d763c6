//! Small embedding head: one or two linear layers with a tanh between them,
//! followed by row-wise l2 normalization.

use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    /// out x in.
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

/// Maps input feature vectors to unit-norm d-dimensional embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingHead {
    pub layers: Vec<Layer>,
}

/// Per-batch forward cache needed for backpropagation.
#[derive(Debug, Clone)]
pub struct HeadForward {
    /// Input to each layer; `inputs[0]` is the batch itself.
    inputs: Vec<Array2<f64>>,
    norms: Vec<f64>,
    /// Row-normalized embeddings, B x d.
    pub output: Array2<f64>,
}

/// Parameter gradients, aligned with `EmbeddingHead::layers`.
#[derive(Debug, Clone)]
pub struct HeadGradients {
    pub layers: Vec<(Array2<f64>, Array1<f64>)>,
}

impl EmbeddingHead {
    /// Random init: weights ~ N(0, 1/fan_in), zero biases.
    pub fn init(
        input_dim: usize,
        hidden_dim: Option<usize>,
        output_dim: usize,
        rng: &mut impl Rng,
    ) -> Self {
        let dims: Vec<usize> = match hidden_dim {
            Some(h) => vec![input_dim, h, output_dim],
            None => vec![input_dim, output_dim],
        };
        let layers = dims
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let scale = 1.0 / (fan_in as f64).sqrt();
                let mut weight = Array2::<f64>::zeros((fan_out, fan_in));
                for v in weight.iter_mut() {
                    let z: f64 = rng.sample(StandardNormal);
                    *v = z * scale;
                }
                Layer {
                    weight,
                    bias: Array1::zeros(fan_out),
                }
            })
            .collect();
        EmbeddingHead { layers }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weight.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().weight.nrows()
    }

    pub fn hidden_dim(&self) -> Option<usize> {
        if self.layers.len() > 1 {
            Some(self.layers[0].weight.nrows())
        } else {
            None
        }
    }

    /// Forward pass over a B x input_dim batch.
    pub fn forward(&self, x: &Array2<f64>) -> Result<HeadForward> {
        if x.ncols() != self.input_dim() {
            return Err(Error::Data(format!(
                "feature dimension {} does not match head input {}",
                x.ncols(),
                self.input_dim()
            )));
        }
        let last = self.layers.len() - 1;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut h = x.clone();
        for (l, layer) in self.layers.iter().enumerate() {
            inputs.push(h.clone());
            let z = h.dot(&layer.weight.t()) + &layer.bias;
            h = if l < last { z.mapv(f64::tanh) } else { z };
        }
        let mut norms = Vec::with_capacity(h.nrows());
        let mut output = h;
        for mut row in output.rows_mut() {
            let norm = row.dot(&row).sqrt();
            if !norm.is_finite() || norm < 1e-12 {
                return Err(Error::Numerical(format!(
                    "embedding norm {norm} is too small to normalize"
                )));
            }
            row.mapv_inplace(|v| v / norm);
            norms.push(norm);
        }
        Ok(HeadForward {
            inputs,
            norms,
            output,
        })
    }

    /// Backpropagates `grad_output` (d loss / d normalized rows) through the
    /// normalization and every layer, returning parameter gradients.
    pub fn backward(&self, fwd: &HeadForward, grad_output: &Array2<f64>) -> HeadGradients {
        let b = grad_output.nrows();
        // through y = z / |z|:  g_z = (g_y - (g_y . u) u) / |z|
        let mut gz = Array2::<f64>::zeros(grad_output.raw_dim());
        for r in 0..b {
            let u = fwd.output.row(r);
            let g = grad_output.row(r);
            let proj = g.dot(&u);
            let n = fwd.norms[r];
            for (out, (&gv, &uv)) in gz.row_mut(r).iter_mut().zip(g.iter().zip(u.iter())) {
                *out = (gv - proj * uv) / n;
            }
        }

        let mut grads: Vec<(Array2<f64>, Array1<f64>)> = self
            .layers
            .iter()
            .map(|l| (Array2::zeros(l.weight.raw_dim()), Array1::zeros(l.bias.raw_dim())))
            .collect();
        for l in (0..self.layers.len()).rev() {
            let input = &fwd.inputs[l];
            grads[l].0 = gz.t().dot(input);
            grads[l].1 = gz.sum_axis(Axis(0));
            if l > 0 {
                let gh = gz.dot(&self.layers[l].weight);
                // input to layer l is tanh(z_{l-1}); tanh' = 1 - tanh^2
                gz = gh * &input.mapv(|t| 1.0 - t * t);
            }
        }
        HeadGradients { layers: grads }
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weight.len() + l.bias.len())
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn forward_outputs_unit_rows() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let head = EmbeddingHead::init(6, Some(5), 3, &mut rng);
        let mut x = Array2::<f64>::zeros((1000, 6));
        for v in x.iter_mut() {
            *v = rng.gen_range(-2.0..2.0);
        }
        let fwd = head.forward(&x).unwrap();
        for row in fwd.output.rows() {
            assert!((row.dot(&row).sqrt() - 1.0).abs() <= 1e-6);
        }
    }

    #[test]
    fn init_is_deterministic_per_seed() {
        let a = EmbeddingHead::init(4, None, 3, &mut ChaCha8Rng::seed_from_u64(9));
        let b = EmbeddingHead::init(4, None, 3, &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a, b);
    }

    #[test]
    fn backward_matches_finite_differences_on_sum_loss() {
        // scalar test loss: sum of all normalized outputs weighted by a
        // fixed matrix, so d loss / d output is that matrix
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut head = EmbeddingHead::init(4, Some(4), 3, &mut rng);
        let mut x = Array2::<f64>::zeros((5, 4));
        for v in x.iter_mut() {
            *v = rng.gen_range(-1.0..1.0);
        }
        let mut w = Array2::<f64>::zeros((5, 3));
        for v in w.iter_mut() {
            *v = rng.gen_range(-1.0..1.0);
        }

        let loss_of = |head: &EmbeddingHead| -> f64 {
            let out = head.forward(&x).unwrap().output;
            (&out * &w).sum()
        };

        let fwd = head.forward(&x).unwrap();
        let grads = head.backward(&fwd, &w);

        let eps = 1e-6;
        for l in 0..head.layers.len() {
            for idx in 0..head.layers[l].weight.len() {
                let flat = head.layers[l].weight.as_slice_mut().unwrap();
                let orig = flat[idx];
                flat[idx] = orig + eps;
                let plus = loss_of(&head);
                head.layers[l].weight.as_slice_mut().unwrap()[idx] = orig - eps;
                let minus = loss_of(&head);
                head.layers[l].weight.as_slice_mut().unwrap()[idx] = orig;
                let fd = (plus - minus) / (2.0 * eps);
                let analytic = grads.layers[l].0.as_slice().unwrap()[idx];
                assert_relative_eq!(analytic, fd, max_relative = 1e-5, epsilon = 1e-8);
            }
            for idx in 0..head.layers[l].bias.len() {
                let orig = head.layers[l].bias[idx];
                head.layers[l].bias[idx] = orig + eps;
                let plus = loss_of(&head);
                head.layers[l].bias[idx] = orig - eps;
                let minus = loss_of(&head);
                head.layers[l].bias[idx] = orig;
                let fd = (plus - minus) / (2.0 * eps);
                assert_relative_eq!(grads.layers[l].1[idx], fd, max_relative = 1e-5, epsilon = 1e-8);
            }
        }
    }
}
