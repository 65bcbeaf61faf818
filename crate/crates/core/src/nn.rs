//! Feedforward networks with a flat parameter vector and hand-derived gradients.
//!
//! Parameters are stored layer-major: for each affine layer the row-major
//! weight matrix (`fan_out x fan_in`) followed by its bias vector. Hidden
//! layers apply the configured activation; the output layer is linear.
//!
//! Three derivatives are exposed:
//!
//! - [`Mlp::backward`]: vector-Jacobian product with respect to parameters and inputs.
//! - [`Mlp::input_grad`]: `∇_x D(x)` for scalar-output (score) networks.
//! - [`Mlp::input_grad_param_grad`]: `∇_θ Σ_i ⟨v_i, ∇_x D(x_i)⟩` for fixed `v`, the
//!   second-order term needed by gradient penalties. It is computed by
//!   pushing a tangent `v` forward through the network and then reverse-mode
//!   differentiating the tangent output through both the primal and tangent
//!   chains.

use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Activation {
    LeakyRelu { slope: f64 },
    Tanh,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::LeakyRelu { slope } => {
                if z > 0.0 {
                    z
                } else {
                    slope * z
                }
            }
            Activation::Tanh => z.tanh(),
        }
    }

    /// First derivative, given the pre-activation `z` and the activation `a`.
    #[inline]
    fn deriv(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::LeakyRelu { slope } => {
                if z > 0.0 {
                    1.0
                } else {
                    slope
                }
            }
            Activation::Tanh => 1.0 - a * a,
        }
    }

    #[inline]
    fn second_deriv(self, a: f64) -> f64 {
        match self {
            Activation::LeakyRelu { .. } => 0.0,
            Activation::Tanh => -2.0 * a * (1.0 - a * a),
        }
    }

    fn validate(self) -> Result<()> {
        match self {
            Activation::LeakyRelu { slope } if !(slope > 0.0 && slope < 1.0) => Err(
                Error::config("activation.slope", format!("{slope} is outside (0, 1)")),
            ),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    pub input_dim: usize,
    /// May be empty, in which case the network is a single affine map.
    pub hidden_dims: Vec<usize>,
    pub output_dim: usize,
    pub activation: Activation,
    pub seed: u64,
    /// Fixed, non-trainable `-c/2·‖x‖²` added to a scalar output.
    #[serde(default)]
    pub quadratic_confinement: f64,
}

impl MlpConfig {
    pub fn new(
        input_dim: usize,
        hidden_dims: Vec<usize>,
        output_dim: usize,
        activation: Activation,
        seed: u64,
    ) -> Self {
        Self {
            input_dim,
            hidden_dims,
            output_dim,
            activation,
            seed,
            quadratic_confinement: 0.0,
        }
    }

    pub fn with_quadratic_confinement(mut self, c: f64) -> Self {
        self.quadratic_confinement = c;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::config("input_dim", "must be at least 1"));
        }
        if self.output_dim == 0 {
            return Err(Error::config("output_dim", "must be at least 1"));
        }
        if let Some(i) = self.hidden_dims.iter().position(|&h| h == 0) {
            return Err(Error::config(
                format!("hidden_dims[{i}]"),
                "must be at least 1",
            ));
        }
        if !self.quadratic_confinement.is_finite() || self.quadratic_confinement < 0.0 {
            return Err(Error::config(
                "quadratic_confinement",
                "must be finite and non-negative",
            ));
        }
        if self.quadratic_confinement != 0.0 && self.output_dim != 1 {
            return Err(Error::config(
                "quadratic_confinement",
                "only defined for scalar-output networks",
            ));
        }
        self.activation.validate()
    }

    /// Layer widths from input to output.
    pub fn layer_dims(&self) -> Vec<usize> {
        let mut dims = Vec::with_capacity(self.hidden_dims.len() + 2);
        dims.push(self.input_dim);
        dims.extend_from_slice(&self.hidden_dims);
        dims.push(self.output_dim);
        dims
    }

    pub fn param_count(&self) -> usize {
        self.layer_dims()
            .windows(2)
            .map(|w| w[0] * w[1] + w[1])
            .sum()
    }
}

#[derive(Debug, Clone, Copy)]
struct LayerSpan {
    fan_in: usize,
    fan_out: usize,
    weights: usize,
    bias: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    config: MlpConfig,
    params: Vec<f64>,
}

/// Intermediate values of one forward pass, reused by the backward passes.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    input: Matrix,
    /// Pre-activation of every layer, the last one being the raw output.
    pre: Vec<Matrix>,
    /// Activation of every hidden layer.
    post: Vec<Matrix>,
    output: Matrix,
}

impl ForwardCache {
    pub fn output(&self) -> &Matrix {
        &self.output
    }

    pub fn input(&self) -> &Matrix {
        &self.input
    }

    /// Sign pattern of hidden pre-activations, for kink detection in tests.
    pub fn activation_pattern(&self) -> Vec<bool> {
        self.pre[..self.post.len()]
            .iter()
            .flat_map(|z| z.as_slice().iter().map(|&v| v > 0.0))
            .collect()
    }
}

impl Mlp {
    /// Randomly initialized network: He-normal weights for leaky-relu nets,
    /// Xavier-normal for tanh, zero biases.
    pub fn new(config: MlpConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = Rng::seed_from_u64(config.seed);
        let mut params = vec![0.0; config.param_count()];
        let spans = spans(&config);
        for s in &spans {
            let std = match config.activation {
                Activation::LeakyRelu { .. } => (2.0 / s.fan_in as f64).sqrt(),
                Activation::Tanh => (2.0 / (s.fan_in + s.fan_out) as f64).sqrt(),
            };
            for w in &mut params[s.weights..s.weights + s.fan_in * s.fan_out] {
                let draw: f64 = StandardNormal.sample(&mut rng);
                *w = std * draw;
            }
        }
        Ok(Self { config, params })
    }

    pub fn zeros(config: MlpConfig) -> Result<Self> {
        config.validate()?;
        let params = vec![0.0; config.param_count()];
        Ok(Self { config, params })
    }

    pub fn from_params(config: MlpConfig, params: Vec<f64>) -> Result<Self> {
        config.validate()?;
        if params.len() != config.param_count() {
            return Err(Error::Shape(format!(
                "{} parameters supplied, network has {}",
                params.len(),
                config.param_count()
            )));
        }
        Ok(Self { config, params })
    }

    pub fn config(&self) -> &MlpConfig {
        &self.config
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn input_dim(&self) -> usize {
        self.config.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.config.output_dim
    }

    /// Offset of the final layer's bias vector in the parameter vector.
    pub fn output_bias_offset(&self) -> usize {
        spans(&self.config).last().map(|s| s.bias).unwrap_or(0)
    }

    /// Mutable view of layer `l`'s weights (row-major `fan_out x fan_in`) and bias.
    pub fn layer_mut(&mut self, l: usize) -> (&mut [f64], &mut [f64]) {
        let s = spans(&self.config)[l];
        let (w, rest) = self.params[s.weights..].split_at_mut(s.fan_in * s.fan_out);
        (w, &mut rest[..s.fan_out])
    }

    fn check_input(&self, batch: &Matrix) -> Result<()> {
        if batch.cols() != self.config.input_dim {
            return Err(Error::Shape(format!(
                "batch has {} columns, network expects {}",
                batch.cols(),
                self.config.input_dim
            )));
        }
        batch.ensure_finite("network input")
    }

    fn require_scalar_output(&self, what: &str) -> Result<()> {
        if self.config.output_dim != 1 {
            return Err(Error::Contract(format!(
                "{what} requires a scalar-output network, got output_dim {}",
                self.config.output_dim
            )));
        }
        Ok(())
    }

    pub fn forward(&self, batch: &Matrix) -> Result<Matrix> {
        Ok(self.forward_cached(batch)?.output)
    }

    pub fn forward_cached(&self, batch: &Matrix) -> Result<ForwardCache> {
        self.check_input(batch)?;
        let spans = spans(&self.config);
        let hidden = spans.len() - 1;
        let mut pre = Vec::with_capacity(spans.len());
        let mut post = Vec::with_capacity(hidden);
        for (l, s) in spans.iter().enumerate() {
            let a = if l == 0 { batch } else { &post[l - 1] };
            let z = affine(&self.params, s, a, true);
            if l < hidden {
                let act = self.config.activation;
                let mut a_next = z.clone();
                a_next
                    .as_mut_slice()
                    .iter_mut()
                    .for_each(|v| *v = act.apply(*v));
                post.push(a_next);
            }
            pre.push(z);
        }
        let mut output = pre.last().expect("at least one layer").clone();
        let c = self.config.quadratic_confinement;
        if c != 0.0 {
            for (i, row) in batch.iter_rows().enumerate() {
                let sq: f64 = row.iter().map(|v| v * v).sum();
                output.as_mut_slice()[i] -= 0.5 * c * sq;
            }
        }
        Ok(ForwardCache {
            input: batch.clone(),
            pre,
            post,
            output,
        })
    }

    /// Gradients of `Σ_i ⟨upstream_i, f(x_i)⟩` with respect to the parameters and the inputs.
    pub fn backward(&self, cache: &ForwardCache, upstream: &Matrix) -> Result<(Vec<f64>, Matrix)> {
        let n = cache.input.rows();
        if upstream.rows() != n || upstream.cols() != self.config.output_dim {
            return Err(Error::Shape(format!(
                "upstream is {}x{}, output is {}x{}",
                upstream.rows(),
                upstream.cols(),
                n,
                self.config.output_dim
            )));
        }
        let spans = spans(&self.config);
        let mut grad = vec![0.0; self.params.len()];
        let mut delta = upstream.clone();
        let mut input_grad = Matrix::zeros(0, 0);
        for l in (0..spans.len()).rev() {
            let s = &spans[l];
            let a = if l == 0 { &cache.input } else { &cache.post[l - 1] };
            accumulate_weight_grad(&mut grad, s, &delta, a);
            accumulate_bias_grad(&mut grad, s, &delta);
            let mut g = back_through(&self.params, s, &delta);
            if l == 0 {
                input_grad = g;
            } else {
                let act = self.config.activation;
                let z = &cache.pre[l - 1];
                let h = &cache.post[l - 1];
                for ((gv, &zv), &hv) in g
                    .as_mut_slice()
                    .iter_mut()
                    .zip(z.as_slice())
                    .zip(h.as_slice())
                {
                    *gv *= act.deriv(zv, hv);
                }
                delta = g;
            }
        }
        let c = self.config.quadratic_confinement;
        if c != 0.0 {
            for i in 0..n {
                let u = upstream.get(i, 0);
                let x = cache.input.row(i);
                for (g, xv) in input_grad.row_mut(i).iter_mut().zip(x) {
                    *g -= c * u * xv;
                }
            }
        }
        Ok((grad, input_grad))
    }

    /// `∂(Σ_batch ⟨upstream, output⟩)/∂params`.
    pub fn param_grad(&self, batch: &Matrix, upstream: &Matrix) -> Result<Vec<f64>> {
        let cache = self.forward_cached(batch)?;
        Ok(self.backward(&cache, upstream)?.0)
    }

    /// Row `i` is `∇_x D(x_i)`; scalar-output networks only.
    pub fn input_grad(&self, batch: &Matrix) -> Result<Matrix> {
        self.require_scalar_output("input_grad")?;
        let cache = self.forward_cached(batch)?;
        let ones = Matrix::from_vec(batch.rows(), 1, vec![1.0; batch.rows()])?;
        Ok(self.backward(&cache, &ones)?.1)
    }

    /// `∇_θ Σ_i ⟨direction_i, ∇_x D(x_i)⟩` with `direction` held constant.
    pub fn input_grad_param_grad(&self, batch: &Matrix, direction: &Matrix) -> Result<Vec<f64>> {
        self.require_scalar_output("input_grad_param_grad")?;
        if direction.rows() != batch.rows() || direction.cols() != batch.cols() {
            return Err(Error::Shape(format!(
                "direction is {}x{}, batch is {}x{}",
                direction.rows(),
                direction.cols(),
                batch.rows(),
                batch.cols()
            )));
        }
        let cache = self.forward_cached(batch)?;
        let spans = spans(&self.config);
        let hidden = spans.len() - 1;
        let act = self.config.activation;

        // Tangent pass: ż_l = W_l ȧ_{l-1}, ȧ_l = σ'(z_l) ⊙ ż_l, ȧ_0 = v.
        let mut tan_pre: Vec<Matrix> = Vec::with_capacity(hidden);
        let mut tan_post: Vec<Matrix> = Vec::with_capacity(hidden);
        for l in 0..hidden {
            let a = if l == 0 { direction } else { &tan_post[l - 1] };
            let zt = affine(&self.params, &spans[l], a, false);
            let mut at = zt.clone();
            for ((t, &z), &h) in at
                .as_mut_slice()
                .iter_mut()
                .zip(cache.pre[l].as_slice())
                .zip(cache.post[l].as_slice())
            {
                *t *= act.deriv(z, h);
            }
            tan_pre.push(zt);
            tan_post.push(at);
        }

        // Reverse pass over the tangent output s = W_L ȧ_{L-1}.
        let n = batch.rows();
        let mut grad = vec![0.0; self.params.len()];
        let ones = Matrix::from_vec(n, 1, vec![1.0; n])?;
        let last = &spans[hidden];
        let a_tan_in = if hidden == 0 { direction } else { &tan_post[hidden - 1] };
        accumulate_weight_grad(&mut grad, last, &ones, a_tan_in);
        if hidden == 0 {
            return Ok(grad);
        }
        let mut adj_tan = back_through(&self.params, last, &ones);
        let mut adj_primal = Matrix::zeros(n, last.fan_in);
        for l in (0..hidden).rev() {
            let s = &spans[l];
            let z = &cache.pre[l];
            let h = &cache.post[l];
            let zt = &tan_pre[l];
            let mut zeta = adj_tan.clone();
            let mut p = adj_primal.clone();
            for k in 0..zeta.as_slice().len() {
                let d1 = act.deriv(z.as_slice()[k], h.as_slice()[k]);
                let d2 = act.second_deriv(h.as_slice()[k]);
                let at = adj_tan.as_slice()[k];
                zeta.as_mut_slice()[k] = at * d1;
                p.as_mut_slice()[k] = adj_primal.as_slice()[k] * d1 + at * zt.as_slice()[k] * d2;
            }
            let a_tan_in = if l == 0 { direction } else { &tan_post[l - 1] };
            let a_in = if l == 0 { &cache.input } else { &cache.post[l - 1] };
            accumulate_weight_grad(&mut grad, s, &zeta, a_tan_in);
            accumulate_weight_grad(&mut grad, s, &p, a_in);
            accumulate_bias_grad(&mut grad, s, &p);
            if l > 0 {
                adj_tan = back_through(&self.params, s, &zeta);
                adj_primal = back_through(&self.params, s, &p);
            }
        }
        Ok(grad)
    }
}

fn spans(config: &MlpConfig) -> Vec<LayerSpan> {
    let dims = config.layer_dims();
    let mut offset = 0;
    dims.windows(2)
        .map(|w| {
            let span = LayerSpan {
                fan_in: w[0],
                fan_out: w[1],
                weights: offset,
                bias: offset + w[0] * w[1],
            };
            offset += w[0] * w[1] + w[1];
            span
        })
        .collect()
}

/// `z[i, o] = b[o] + Σ_j W[o, j] a[i, j]` (bias optional).
fn affine(params: &[f64], s: &LayerSpan, a: &Matrix, with_bias: bool) -> Matrix {
    let w = &params[s.weights..s.weights + s.fan_in * s.fan_out];
    let b = &params[s.bias..s.bias + s.fan_out];
    let mut z = Matrix::zeros(a.rows(), s.fan_out);
    for i in 0..a.rows() {
        let x = a.row(i);
        let out = z.row_mut(i);
        for (o, zo) in out.iter_mut().enumerate() {
            let row = &w[o * s.fan_in..(o + 1) * s.fan_in];
            let dot = dot(row, x);
            *zo = if with_bias { dot + b[o] } else { dot };
        }
    }
    z
}

/// Four independent partial sums so the loop vectorizes.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `g[i, j] = Σ_o δ[i, o] W[o, j]`.
fn back_through(params: &[f64], s: &LayerSpan, delta: &Matrix) -> Matrix {
    let w = &params[s.weights..s.weights + s.fan_in * s.fan_out];
    let mut g = Matrix::zeros(delta.rows(), s.fan_in);
    for i in 0..delta.rows() {
        let d = delta.row(i);
        let out = g.row_mut(i);
        for (o, &dv) in d.iter().enumerate() {
            if dv == 0.0 {
                continue;
            }
            let row = &w[o * s.fan_in..(o + 1) * s.fan_in];
            for (gv, wv) in out.iter_mut().zip(row) {
                *gv += dv * wv;
            }
        }
    }
    g
}

fn accumulate_weight_grad(grad: &mut [f64], s: &LayerSpan, delta: &Matrix, a: &Matrix) {
    let gw = &mut grad[s.weights..s.weights + s.fan_in * s.fan_out];
    for i in 0..delta.rows() {
        let x = a.row(i);
        for (o, &dv) in delta.row(i).iter().enumerate() {
            if dv == 0.0 {
                continue;
            }
            let row = &mut gw[o * s.fan_in..(o + 1) * s.fan_in];
            for (g, xv) in row.iter_mut().zip(x) {
                *g += dv * xv;
            }
        }
    }
}

fn accumulate_bias_grad(grad: &mut [f64], s: &LayerSpan, delta: &Matrix) {
    let gb = &mut grad[s.bias..s.bias + s.fan_out];
    for i in 0..delta.rows() {
        for (g, dv) in gb.iter_mut().zip(delta.row(i)) {
            *g += dv;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamParams {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.5,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamParams {
    pub fn with_lr(self, lr: f64) -> Self {
        Self { lr, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::config("lr", format!("{} is not a valid rate", self.lr)));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(b > 0.0 && b < 1.0) {
                return Err(Error::config(name, format!("{b} is outside (0, 1)")));
            }
        }
        if !(self.eps > 0.0) {
            return Err(Error::config("eps", "must be positive"));
        }
        Ok(())
    }
}

/// First and second moment estimates of Adam.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step_count: u64,
    pub hyper: AdamParams,
}

impl AdamState {
    pub fn new(param_count: usize, hyper: AdamParams) -> Self {
        Self {
            m: vec![0.0; param_count],
            v: vec![0.0; param_count],
            step_count: 0,
            hyper,
        }
    }

    /// One Adam update in place. With `maximize` the gradient is negated
    /// (ascent).
    pub fn step(&mut self, params: &mut [f64], grad: &[f64], maximize: bool) -> Result<()> {
        if params.len() != grad.len() || params.len() != self.m.len() {
            return Err(Error::Shape(format!(
                "adam: {} params, {} grads, {} moments",
                params.len(),
                grad.len(),
                self.m.len()
            )));
        }
        self.step_count += 1;
        let AdamParams {
            lr,
            beta1,
            beta2,
            eps,
        } = self.hyper;
        let t = self.step_count as i32;
        let c1 = 1.0 - beta1.powi(t);
        let c2 = 1.0 - beta2.powi(t);
        for k in 0..params.len() {
            let g = if maximize { -grad[k] } else { grad[k] };
            self.m[k] = beta1 * self.m[k] + (1.0 - beta1) * g;
            self.v[k] = beta2 * self.v[k] + (1.0 - beta2) * g * g;
            let m_hat = self.m[k] / c1;
            let v_hat = self.v[k] / c2;
            params[k] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
        Ok(())
    }
}
