//! Dense tanh network core shared by the policy heads and the value
//! function: flat parameter layout, forward with cached activations,
//! and reverse-mode accumulation from an output cotangent.
//!
//! Parameter layout per layer l with fan-in `n_in` and fan-out `n_out`:
//! weights row-major (n_out x n_in), then biases (n_out). Hidden layers
//! apply tanh; the final layer is linear.

use rand::Rng;

/// Full layer dimensions, input first, linear output last.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MlpShape {
    pub sizes: Vec<usize>,
}

impl MlpShape {
    pub fn new(input: usize, hidden: &[usize], output: usize) -> Self {
        let mut sizes = Vec::with_capacity(hidden.len() + 2);
        sizes.push(input);
        sizes.extend_from_slice(hidden);
        sizes.push(output);
        MlpShape { sizes }
    }

    pub fn n_layers(&self) -> usize {
        self.sizes.len() - 1
    }

    pub fn param_count(&self) -> usize {
        (0..self.n_layers())
            .map(|l| self.sizes[l] * self.sizes[l + 1] + self.sizes[l + 1])
            .sum()
    }

}

/// Uniform fan-in-scaled weights, zero biases.
pub fn init_theta(shape: &MlpShape, rng: &mut impl Rng) -> Vec<f64> {
    let mut theta = Vec::with_capacity(shape.param_count());
    for l in 0..shape.n_layers() {
        let (n_in, n_out) = (shape.sizes[l], shape.sizes[l + 1]);
        let bound = 1.0 / (n_in as f64).sqrt();
        for _ in 0..n_in * n_out {
            theta.push(rng.gen_range(-bound..bound));
        }
        theta.extend(std::iter::repeat(0.0).take(n_out));
    }
    theta
}

/// Post-activation values per layer; `activations[0]` is the input and
/// the last entry is the linear output.
pub struct ForwardCache {
    pub activations: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &[f64] {
        self.activations.last().unwrap()
    }
}

pub fn forward(shape: &MlpShape, theta: &[f64], input: &[f64]) -> ForwardCache {
    debug_assert_eq!(input.len(), shape.sizes[0]);
    let mut activations = Vec::with_capacity(shape.n_layers() + 1);
    activations.push(input.to_vec());
    let mut offset = 0;
    for l in 0..shape.n_layers() {
        let (n_in, n_out) = (shape.sizes[l], shape.sizes[l + 1]);
        let prev = activations.last().unwrap();
        let weights = &theta[offset..offset + n_in * n_out];
        let biases = &theta[offset + n_in * n_out..offset + n_in * n_out + n_out];
        let mut out = Vec::with_capacity(n_out);
        for i in 0..n_out {
            let row = &weights[i * n_in..(i + 1) * n_in];
            let mut z = biases[i];
            for (w, x) in row.iter().zip(prev.iter()) {
                z += w * x;
            }
            out.push(if l + 1 < shape.n_layers() { z.tanh() } else { z });
        }
        // prev borrow ends here
        activations.push(out);
        offset += n_in * n_out + n_out;
    }
    ForwardCache { activations }
}

/// Accumulate d(loss)/d(theta) into `grad` given d(loss)/d(output).
/// `grad` must be at least `param_count` long; entries beyond the MLP
/// parameters (e.g. a global log-std tail) are left untouched.
pub fn backward(
    shape: &MlpShape,
    theta: &[f64],
    cache: &ForwardCache,
    d_output: &[f64],
    grad: &mut [f64],
) {
    let n_layers = shape.n_layers();
    // Offsets of each layer's parameter block.
    let mut offsets = Vec::with_capacity(n_layers);
    let mut offset = 0;
    for l in 0..n_layers {
        offsets.push(offset);
        offset += shape.sizes[l] * shape.sizes[l + 1] + shape.sizes[l + 1];
    }

    let mut delta = d_output.to_vec();
    for l in (0..n_layers).rev() {
        let (n_in, n_out) = (shape.sizes[l], shape.sizes[l + 1]);
        let off = offsets[l];
        let weights = &theta[off..off + n_in * n_out];
        let input = &cache.activations[l];

        for i in 0..n_out {
            let d = delta[i];
            let row = &mut grad[off + i * n_in..off + (i + 1) * n_in];
            for (g, x) in row.iter_mut().zip(input.iter()) {
                *g += d * x;
            }
            grad[off + n_in * n_out + i] += d;
        }

        if l > 0 {
            let mut prev_delta = vec![0.0; n_in];
            for i in 0..n_out {
                let d = delta[i];
                let row = &weights[i * n_in..(i + 1) * n_in];
                for (pd, w) in prev_delta.iter_mut().zip(row.iter()) {
                    *pd += d * w;
                }
            }
            // d tanh(z)/dz = 1 - a^2, with a the cached activation.
            for (pd, a) in prev_delta.iter_mut().zip(input.iter()) {
                *pd *= 1.0 - a * a;
            }
            delta = prev_delta;
        }
    }
}
