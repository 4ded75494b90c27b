use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::container::{ByteReader, ByteWriter};
use crate::error::{Error, Result};
use crate::scalar::{axpy, dot, snap_f32, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Identity,
    Tanh,
    Logistic,
}

impl Activation {
    #[inline]
    pub fn apply<T: Scalar>(self, z: T) -> T {
        match self {
            Activation::Identity => z,
            Activation::Tanh => z.tanh(),
            Activation::Logistic => T::one() / (T::one() + (-z).exp()),
        }
    }

    /// Derivative expressed through the activation's output.
    #[inline]
    pub fn derivative_from_output<T: Scalar>(self, a: T) -> T {
        match self {
            Activation::Identity => T::one(),
            Activation::Tanh => T::one() - a * a,
            Activation::Logistic => a * (T::one() - a),
        }
    }

    fn code(self) -> u8 {
        match self {
            Activation::Identity => 0,
            Activation::Tanh => 1,
            Activation::Logistic => 2,
        }
    }

    fn from_code(c: u8) -> Result<Self> {
        Ok(match c {
            0 => Activation::Identity,
            1 => Activation::Tanh,
            2 => Activation::Logistic,
            _ => return Err(Error::Format(format!("unknown activation code {c}"))),
        })
    }
}

/// Fully connected network. Parameters live in one flat buffer, layer by
/// layer: the `in × out` weight block (input-major, so each input's fan-out
/// is contiguous) followed by the `out` biases.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp<T> {
    dims: Vec<usize>,
    params: Vec<T>,
    hidden: Activation,
    output: Activation,
}

/// Layer activations of one forward pass; `layers[0]` is the input.
#[derive(Debug, Clone)]
pub struct Trace<T> {
    pub layers: Vec<Vec<T>>,
}

impl<T> Trace<T> {
    pub fn output(&self) -> &[T] {
        self.layers.last().expect("trace has an input layer")
    }
}

fn param_count(dims: &[usize]) -> usize {
    dims.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

impl<T: Scalar> Mlp<T> {
    pub fn zeros(dims: &[usize], hidden: Activation, output: Activation) -> Result<Self> {
        if dims.len() < 2 || dims.contains(&0) {
            return Err(Error::Config(format!("invalid layer dims {dims:?}")));
        }
        Ok(Self {
            dims: dims.to_vec(),
            params: vec![T::zero(); param_count(dims)],
            hidden,
            output,
        })
    }

    /// Weights uniform in `±1/√fan_in`, zero biases.
    pub fn random(dims: &[usize], hidden: Activation, output: Activation, rng: &mut impl Rng) -> Result<Self> {
        let mut net = Self::zeros(dims, hidden, output)?;
        let mut off = 0;
        for w in dims.windows(2) {
            let bound = 1.0 / (w[0] as f64).sqrt();
            for p in &mut net.params[off..off + w[0] * w[1]] {
                *p = T::lit(rng.random_range(-bound..=bound));
            }
            off += w[0] * w[1] + w[1];
        }
        Ok(net)
    }

    pub fn from_params(dims: &[usize], params: Vec<T>, hidden: Activation, output: Activation) -> Result<Self> {
        let mut net = Self::zeros(dims, hidden, output)?;
        if params.len() != net.params.len() {
            return Err(Error::Dimension {
                context: "network parameters",
                expected: net.params.len(),
                got: params.len(),
            });
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Format("non-finite network parameter".into()));
        }
        net.params = params;
        Ok(net)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.dims.last().expect("at least two dims")
    }

    pub fn activations(&self) -> (Activation, Activation) {
        (self.hidden, self.output)
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [T] {
        &mut self.params
    }

    fn layer_count(&self) -> usize {
        self.dims.len() - 1
    }

    fn activation(&self, layer: usize) -> Activation {
        if layer + 1 == self.layer_count() {
            self.output
        } else {
            self.hidden
        }
    }

    /// `(weight offset, bias offset)` of a layer in the flat buffer.
    fn offsets(&self, layer: usize) -> (usize, usize) {
        let start = param_count(&self.dims[..=layer]);
        (start, start + self.dims[layer] * self.dims[layer + 1])
    }

    /// Weight from input `j` to output `i` of `layer`.
    pub fn weight(&self, layer: usize, j: usize, i: usize) -> T {
        let (w, _) = self.offsets(layer);
        self.params[w + j * self.dims[layer + 1] + i]
    }

    pub fn set_weight(&mut self, layer: usize, j: usize, i: usize, v: T) {
        let (w, _) = self.offsets(layer);
        let out = self.dims[layer + 1];
        self.params[w + j * out + i] = v;
    }

    pub fn set_bias(&mut self, layer: usize, i: usize, v: T) {
        let (_, b) = self.offsets(layer);
        self.params[b + i] = v;
    }

    fn check_input(&self, input: &[T]) -> Result<()> {
        if input.len() != self.input_dim() {
            return Err(Error::Dimension {
                context: "network input",
                expected: self.input_dim(),
                got: input.len(),
            });
        }
        Ok(())
    }

    fn layer_forward(&self, layer: usize, x: &[T]) -> Vec<T> {
        let (w, b) = self.offsets(layer);
        let out = self.dims[layer + 1];
        let mut z = self.params[b..b + out].to_vec();
        for (j, &xj) in x.iter().enumerate() {
            if xj != T::zero() {
                axpy(xj, &self.params[w + j * out..w + (j + 1) * out], &mut z);
            }
        }
        let act = self.activation(layer);
        z.iter_mut().for_each(|v| *v = act.apply(*v));
        z
    }

    pub fn forward(&self, input: &[T]) -> Result<Vec<T>> {
        self.check_input(input)?;
        let mut x = input.to_vec();
        for l in 0..self.layer_count() {
            x = self.layer_forward(l, &x);
        }
        Ok(x)
    }

    pub fn forward_trace(&self, input: &[T]) -> Result<Trace<T>> {
        self.check_input(input)?;
        let mut layers = Vec::with_capacity(self.dims.len());
        layers.push(input.to_vec());
        for l in 0..self.layer_count() {
            let next = self.layer_forward(l, &layers[l]);
            layers.push(next);
        }
        Ok(Trace { layers })
    }

    /// Accumulates `∂(output·output_grad)/∂params` into `grads` and returns
    /// the gradient with respect to the input.
    pub fn backward_trace(&self, trace: &Trace<T>, output_grad: &[T], grads: &mut [T]) -> Result<Vec<T>> {
        self.backward_inner(trace, output_grad, Some(grads), true)
    }

    /// Like [`Self::backward_trace`] but skips the input gradient.
    pub fn accumulate_param_grads(&self, trace: &Trace<T>, output_grad: &[T], grads: &mut [T]) -> Result<()> {
        self.backward_inner(trace, output_grad, Some(grads), false).map(|_| ())
    }

    /// Gradient with respect to the input only.
    pub fn input_gradient(&self, trace: &Trace<T>, output_grad: &[T]) -> Result<Vec<T>> {
        self.backward_inner(trace, output_grad, None, true)
    }

    fn backward_inner(
        &self,
        trace: &Trace<T>,
        output_grad: &[T],
        mut grads: Option<&mut [T]>,
        want_input: bool,
    ) -> Result<Vec<T>> {
        if output_grad.len() != self.output_dim() {
            return Err(Error::Dimension {
                context: "output gradient",
                expected: self.output_dim(),
                got: output_grad.len(),
            });
        }
        if let Some(g) = grads.as_deref() {
            if g.len() != self.params.len() {
                return Err(Error::Dimension {
                    context: "gradient buffer",
                    expected: self.params.len(),
                    got: g.len(),
                });
            }
        }
        let mut upstream = output_grad.to_vec();
        for l in (0..self.layer_count()).rev() {
            let act = self.activation(l);
            let a = &trace.layers[l + 1];
            let x = &trace.layers[l];
            let delta: Vec<T> = upstream
                .iter()
                .zip(a)
                .map(|(&g, &ai)| g * act.derivative_from_output(ai))
                .collect();
            let (w, b) = self.offsets(l);
            let out = self.dims[l + 1];
            if let Some(g) = grads.as_deref_mut() {
                axpy(T::one(), &delta, &mut g[b..b + out]);
            }
            let mut down = vec![T::zero(); self.dims[l]];
            for (j, &xj) in x.iter().enumerate() {
                let row = w + j * out..w + (j + 1) * out;
                if let Some(g) = grads.as_deref_mut() {
                    if xj != T::zero() {
                        axpy(xj, &delta, &mut g[row.clone()]);
                    }
                }
                if want_input || l > 0 {
                    down[j] = dot(&self.params[row], &delta);
                }
            }
            upstream = down;
        }
        Ok(upstream)
    }

    /// Parameter and input gradients of `output·output_grad` at `input`.
    pub fn backward(&self, input: &[T], output_grad: &[T]) -> Result<(Vec<T>, Vec<T>)> {
        let trace = self.forward_trace(input)?;
        let mut grads = vec![T::zero(); self.params.len()];
        let input_grad = self.backward_trace(&trace, output_grad, &mut grads)?;
        Ok((grads, input_grad))
    }

    /// Rounds every parameter onto the `f32` grid so a saved copy reloads bit-identically.
    pub fn snap_to_f32(&mut self) {
        self.params.iter_mut().for_each(|p| *p = snap_f32(*p));
    }

    pub fn encode(&self, w: &mut ByteWriter) {
        w.u32(self.dims.len() as u32);
        for &d in &self.dims {
            w.u32(d as u32);
        }
        w.u8(self.hidden.code());
        w.u8(self.output.code());
        for p in &self.params {
            w.f32(p.as_f64() as f32);
        }
    }

    pub fn decode(r: &mut ByteReader<'_>) -> Result<Self> {
        let n = r.u32()? as usize;
        if n > 64 {
            return Err(Error::Format(format!("implausible layer count {n}")));
        }
        let dims = (0..n)
            .map(|_| r.u32().map(|d| d as usize))
            .collect::<Result<Vec<_>>>()?;
        let hidden = Activation::from_code(r.u8()?)?;
        let output = Activation::from_code(r.u8()?)?;
        let count = param_count(&dims);
        let params = (0..count)
            .map(|_| r.f32().map(|v| T::lit(v as f64)))
            .collect::<Result<Vec<_>>>()?;
        Self::from_params(&dims, params, hidden, output)
    }
}
