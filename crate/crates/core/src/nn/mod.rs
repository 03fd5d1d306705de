//! Dense feed-forward networks with hand-written reverse mode, Adam,
//! inverted dropout and early stopping.

mod checkpoint;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::distributions::{Distribution, Uniform};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

pub use checkpoint::{read_network, write_network, CheckpointReader, CheckpointWriter, MAGIC, VERSION};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Linear,
}

impl Activation {
    pub fn name(&self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Linear => "linear",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(Activation::Relu),
            "linear" => Ok(Activation::Linear),
            other => Err(Error::Config(format!("unknown activation '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    /// `out x in`
    pub w: Array2<f64>,
    pub b: Array1<f64>,
    pub activation: Activation,
}

impl DenseLayer {
    pub fn n_in(&self) -> usize {
        self.w.ncols()
    }

    pub fn n_out(&self) -> usize {
        self.w.nrows()
    }

    fn pre_activation(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut z = x.dot(&self.w.t());
        z += &self.b;
        z
    }
}

fn activate(a: Activation, z: &Array2<f64>) -> Array2<f64> {
    match a {
        Activation::Relu => z.mapv(|v| if v > 0.0 { v } else { 0.0 }),
        Activation::Linear => z.clone(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSpec {
    /// `m_0 = d_in, ..., m_L = d_out`
    pub sizes: Vec<usize>,
    /// One per layer, `sizes.len() - 1` entries.
    pub activations: Vec<Activation>,
    /// Applied to every hidden-layer output during training.
    pub dropout: f64,
}

impl NetworkSpec {
    /// ReLU hidden layers and a linear output layer.
    pub fn mlp(sizes: &[usize], dropout: f64) -> Self {
        let l = sizes.len().saturating_sub(1);
        let activations = (0..l).map(|i| if i + 1 == l { Activation::Linear } else { Activation::Relu }).collect();
        Self { sizes: sizes.to_vec(), activations, dropout }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sizes.len() < 2 {
            return Err(Error::Config("a network needs at least one layer".into()));
        }
        if self.activations.len() != self.sizes.len() - 1 {
            return Err(Error::Config(format!(
                "{} activations for {} layers",
                self.activations.len(),
                self.sizes.len() - 1
            )));
        }
        if self.sizes.iter().any(|&m| m == 0) {
            return Err(Error::Config("layer widths must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout {} must lie in [0, 1)", self.dropout)));
        }
        Ok(())
    }

    /// `sizes=8,32,1;act=relu,linear;dropout=0.05`
    pub fn describe(&self) -> String {
        let sizes: Vec<String> = self.sizes.iter().map(|m| m.to_string()).collect();
        let acts: Vec<&str> = self.activations.iter().map(|a| a.name()).collect();
        format!("sizes={};act={};dropout={}", sizes.join(","), acts.join(","), self.dropout)
    }

    pub fn parse(s: &str) -> Result<Self> {
        let mut sizes = None;
        let mut acts = None;
        let mut dropout = None;
        for part in s.split(';') {
            let (k, v) = part.split_once('=').ok_or_else(|| Error::Checkpoint(format!("bad spec field '{part}'")))?;
            match k {
                "sizes" => {
                    sizes = Some(
                        v.split(',')
                            .map(|x| x.parse::<usize>().map_err(|e| Error::Checkpoint(e.to_string())))
                            .collect::<Result<Vec<_>>>()?,
                    )
                }
                "act" => acts = Some(v.split(',').map(Activation::parse).collect::<Result<Vec<_>>>()?),
                "dropout" => dropout = Some(v.parse::<f64>().map_err(|e| Error::Checkpoint(e.to_string()))?),
                other => return Err(Error::Checkpoint(format!("unknown spec field '{other}'"))),
            }
        }
        match (sizes, acts, dropout) {
            (Some(sizes), Some(activations), Some(dropout)) => Ok(Self { sizes, activations, dropout }),
            _ => Err(Error::Checkpoint(format!("incomplete network spec '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Cache {
    /// Input to each layer.
    inputs: Vec<Array2<f64>>,
    pre: Vec<Array2<f64>>,
    masks: Vec<Option<Array2<f64>>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub layers: Vec<DenseLayer>,
    pub dropout: f64,
    cache: Option<Cache>,
}

/// Gradients of a scalar loss, same layout as [`Network::layers`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub w: Vec<Array2<f64>>,
    pub b: Vec<Array1<f64>>,
    pub input: Array2<f64>,
}

impl Network {
    pub fn from_layers(layers: Vec<DenseLayer>, dropout: f64) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Config("a network needs at least one layer".into()));
        }
        for (l, pair) in layers.windows(2).enumerate() {
            if pair[0].n_out() != pair[1].n_in() {
                return Err(Error::Dimension(format!(
                    "layer {l} has {} outputs but layer {} expects {} inputs",
                    pair[0].n_out(),
                    l + 1,
                    pair[1].n_in()
                )));
            }
        }
        for (l, layer) in layers.iter().enumerate() {
            if layer.b.len() != layer.n_out() {
                return Err(Error::Dimension(format!("layer {l} bias has {} entries", layer.b.len())));
            }
            if layer.w.iter().chain(layer.b.iter()).any(|v| !v.is_finite()) {
                return Err(Error::InputDomain(format!("layer {l} has non-finite parameters")));
            }
        }
        Ok(Self { layers, dropout, cache: None })
    }

    pub fn spec(&self) -> NetworkSpec {
        let mut sizes = vec![self.layers[0].n_in()];
        sizes.extend(self.layers.iter().map(|l| l.n_out()));
        NetworkSpec { sizes, activations: self.layers.iter().map(|l| l.activation).collect(), dropout: self.dropout }
    }

    pub fn n_in(&self) -> usize {
        self.layers[0].n_in()
    }

    pub fn n_out(&self) -> usize {
        self.layers.last().map_or(0, |l| l.n_out())
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    fn check_input(&self, x: ArrayView2<'_, f64>) -> Result<()> {
        if x.ncols() != self.n_in() {
            return Err(Error::Dimension(format!("network expects {} inputs, got {}", self.n_in(), x.ncols())));
        }
        Ok(())
    }

    /// Deterministic evaluation; dropout is off and nothing is cached.
    pub fn forward(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.check_input(x)?;
        let mut h = x.to_owned();
        for layer in &self.layers {
            h = activate(layer.activation, &layer.pre_activation(h.view()));
        }
        Ok(h)
    }

    /// Forward pass that caches what [`Network::backward`] needs. With an
    /// RNG, inverted dropout is applied to every hidden-layer output.
    pub fn forward_train<R: Rng>(&mut self, x: ArrayView2<'_, f64>, rng: Option<&mut R>) -> Result<Array2<f64>> {
        self.check_input(x)?;
        let n_layers = self.layers.len();
        let mut inputs = Vec::with_capacity(n_layers);
        let mut pre = Vec::with_capacity(n_layers);
        let mut masks = Vec::with_capacity(n_layers);
        let mut rng = rng;
        let mut h = x.to_owned();
        for (l, layer) in self.layers.iter().enumerate() {
            let z = layer.pre_activation(h.view());
            let mut a = activate(layer.activation, &z);
            let mask = match rng.as_deref_mut() {
                Some(r) if self.dropout > 0.0 && l + 1 < n_layers => {
                    let m = sample_mask(self.dropout, a.dim(), r);
                    a *= &m;
                    Some(m)
                }
                _ => None,
            };
            inputs.push(h);
            pre.push(z);
            masks.push(mask);
            h = a;
        }
        self.cache = Some(Cache { inputs, pre, masks });
        Ok(h)
    }

    /// Reverse-mode gradients for the most recent [`Network::forward_train`].
    /// ReLU uses subgradient 0 at 0.
    pub fn backward(&self, upstream: ArrayView2<'_, f64>) -> Result<Gradients> {
        let cache = self
            .cache
            .as_ref()
            .ok_or_else(|| Error::State("backward called before a training forward pass".into()))?;
        let n_layers = self.layers.len();
        let last = &cache.pre[n_layers - 1];
        if upstream.dim() != last.dim() {
            return Err(Error::Dimension(format!(
                "upstream gradient {:?} does not match output {:?}",
                upstream.dim(),
                last.dim()
            )));
        }
        let mut gw = vec![Array2::zeros((0, 0)); n_layers];
        let mut gb = vec![Array1::zeros(0); n_layers];
        let mut g = upstream.to_owned();
        for l in (0..n_layers).rev() {
            if let Some(m) = &cache.masks[l] {
                g *= m;
            }
            if self.layers[l].activation == Activation::Relu {
                g.zip_mut_with(&cache.pre[l], |gi, z| {
                    if *z <= 0.0 {
                        *gi = 0.0;
                    }
                });
            }
            gw[l] = g.t().dot(&cache.inputs[l]).as_standard_layout().into_owned();
            gb[l] = g.sum_axis(Axis(0));
            g = g.dot(&self.layers[l].w);
        }
        Ok(Gradients { w: gw, b: gb, input: g })
    }

    pub fn clear_cache(&mut self) {
        self.cache = None;
    }

    /// Parameter blocks in layer order (`W_0, b_0, W_1, ...`).
    pub fn param_blocks_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::with_capacity(2 * self.layers.len());
        for layer in self.layers.iter_mut() {
            out.push(layer.w.as_slice_mut().expect("standard layout"));
            out.push(layer.b.as_slice_mut().expect("standard layout"));
        }
        out
    }
}

impl Gradients {
    /// Gradient blocks matching [`Network::param_blocks_mut`].
    pub fn blocks(&self) -> Vec<&[f64]> {
        let mut out = Vec::with_capacity(2 * self.w.len());
        for (w, b) in self.w.iter().zip(&self.b) {
            out.push(w.as_slice().expect("standard layout"));
            out.push(b.as_slice().expect("standard layout"));
        }
        out
    }
}

fn sample_mask<R: Rng>(rate: f64, shape: (usize, usize), rng: &mut R) -> Array2<f64> {
    let keep = 1.0 - rate;
    let scale = 1.0 / keep;
    Array2::from_shape_simple_fn(shape, || if rng.gen::<f64>() < keep { scale } else { 0.0 })
}

/// Inverted-dropout keep mask: entries are `1 / (1 - rate)` with
/// probability `1 - rate` and 0 otherwise.
pub fn dropout_mask(rate: f64, shape: (usize, usize), seed: u64) -> Result<Array2<f64>> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::InputDomain(format!("dropout rate {rate} must lie in [0, 1)")));
    }
    Ok(sample_mask(rate, shape, &mut ChaCha8Rng::seed_from_u64(seed)))
}

/// Glorot-uniform weights `U(-a, a)`, `a = sqrt(6 / (fan_in + fan_out))`, zero biases.
pub fn init_uniform(spec: &NetworkSpec, seed: u64) -> Result<Network> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layers = spec
        .sizes
        .windows(2)
        .zip(&spec.activations)
        .map(|(w, &activation)| {
            let (n_in, n_out) = (w[0], w[1]);
            let a = (6.0 / (n_in + n_out) as f64).sqrt();
            let dist = Uniform::new_inclusive(-a, a);
            DenseLayer {
                w: Array2::from_shape_simple_fn((n_out, n_in), || dist.sample(&mut rng)),
                b: Array1::zeros(n_out),
                activation,
            }
        })
        .collect();
    Network::from_layers(layers, spec.dropout)
}

/// `(1/n) sum |pred - target|`.
pub fn mae(pred: &[f64], target: &[f64]) -> Result<f64> {
    if pred.len() != target.len() {
        return Err(Error::Dimension(format!("{} predictions for {} targets", pred.len(), target.len())));
    }
    if pred.is_empty() {
        return Err(Error::InputDomain("MAE of an empty vector".into()));
    }
    Ok(pred.iter().zip(target).map(|(p, t)| (p - t).abs()).sum::<f64>() / pred.len() as f64)
}

/// Bias-corrected Adam over any number of flat parameter blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Default for Adam {
    fn default() -> Self {
        Self::new(1e-3)
    }
}

impl Adam {
    pub fn new(learning_rate: f64) -> Self {
        Self { learning_rate, beta1: 0.9, beta2: 0.999, epsilon: 1e-8, step: 0, m: Vec::new(), v: Vec::new() }
    }

    /// One update; block `i` of `params` must always pair with block `i` of
    /// `grads` across calls.
    pub fn update(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]]) -> Result<()> {
        if params.len() != grads.len() {
            return Err(Error::Dimension(format!("{} parameter blocks, {} gradient blocks", params.len(), grads.len())));
        }
        if self.m.is_empty() {
            self.m = params.iter().map(|p| vec![0.0; p.len()]).collect();
            self.v = params.iter().map(|p| vec![0.0; p.len()]).collect();
        }
        if self.m.len() != params.len() {
            return Err(Error::Dimension("parameter block count changed between Adam steps".into()));
        }
        for (i, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.len() != g.len() || p.len() != self.m[i].len() {
                return Err(Error::Dimension(format!("block {i}: {} parameters, {} gradients", p.len(), g.len())));
            }
        }
        self.step += 1;
        let t = self.step as f64;
        let c1 = 1.0 - self.beta1.powf(t);
        let c2 = 1.0 - self.beta2.powf(t);
        for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            for k in 0..p.len() {
                m[k] = self.beta1 * m[k] + (1.0 - self.beta1) * g[k];
                v[k] = self.beta2 * v[k] + (1.0 - self.beta2) * g[k] * g[k];
                let m_hat = m[k] / c1;
                let v_hat = v[k] / c2;
                p[k] -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
            }
        }
        Ok(())
    }
}

/// Independent child seed for stream `stream` of a master seed (SplitMix64).
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    let mut z = master ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Patience-based early stopping on a metric to minimize.
#[derive(Debug, Clone, PartialEq)]
pub struct EarlyStopping {
    pub patience: usize,
    pub best: f64,
    pub best_epoch: Option<usize>,
    bad_epochs: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        Self { patience, best: f64::INFINITY, best_epoch: None, bad_epochs: 0 }
    }

    /// Records an epoch; returns `true` when it is the new best.
    pub fn observe(&mut self, epoch: usize, metric: f64) -> bool {
        if metric < self.best {
            self.best = metric;
            self.best_epoch = Some(epoch);
            self.bad_epochs = 0;
            true
        } else {
            self.bad_epochs += 1;
            false
        }
    }

    pub fn should_stop(&self) -> bool {
        self.bad_epochs >= self.patience
    }
}

/// Training budget shared by every trainable pipeline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainControl {
    pub max_epochs: usize,
    pub batch_size: usize,
    pub patience: usize,
    pub learning_rate: f64,
    /// Share of the training rows held out for early stopping.
    pub validation_fraction: f64,
    pub seed: u64,
}

impl Default for TrainControl {
    fn default() -> Self {
        Self { max_epochs: 500, batch_size: 32, patience: 50, learning_rate: 1e-3, validation_fraction: 0.1, seed: 0 }
    }
}

impl TrainControl {
    pub const LONG_RUN_EPOCHS: usize = 20_000;

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(Error::Config("validation fraction must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests;
