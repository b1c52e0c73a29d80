use serde::{Deserialize, Serialize};

use crate::ndmath::{logistic, softmax, softplus, Mlp, Parameters, Rng, Tensor, Trace};
use crate::{Error, Result};

/// Lower bound added to every latent standard deviation.
pub const Q_STD_FLOOR: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatentConfig {
    pub dim: usize,
    pub inference_hidden: Vec<usize>,
    pub prior_hidden: Vec<usize>,
    pub mixing_hidden: Vec<usize>,
    /// Bias of the logit added for a new basis.
    pub new_logit_bias: f64,
    /// Standard deviation of the new logit's incoming weights.
    pub new_logit_scale: f64,
}

impl Default for LatentConfig {
    fn default() -> Self {
        Self {
            dim: 32,
            inference_hidden: vec![128, 128, 128],
            prior_hidden: vec![128, 128, 128],
            mixing_hidden: vec![128, 128, 128],
            new_logit_bias: 0.0,
            new_logit_scale: 0.01,
        }
    }
}

impl LatentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::Config("latent.dim must be at least 1".into()));
        }
        let widths = self.inference_hidden.iter().chain(&self.prior_hidden).chain(&self.mixing_hidden);
        if widths.into_iter().any(|&w| w == 0) {
            return Err(Error::Config("latent hidden widths must be positive".into()));
        }
        if !(self.new_logit_scale >= 0.0) || !self.new_logit_bias.is_finite() {
            return Err(Error::Config("latent.new_logit_scale/new_logit_bias must be finite, scale non-negative".into()));
        }
        Ok(())
    }
}

fn sizes(input: usize, hidden: &[usize], output: usize) -> Vec<usize> {
    let mut s = vec![input];
    s.extend(hidden);
    s.push(output);
    s
}

/// Network emitting a diagonal Gaussian: first `dim` outputs are the mean,
/// the rest are raw values with `std = softplus(raw) + 1e-4`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianNet {
    pub net: Mlp,
}

impl GaussianNet {
    pub fn new(net: Mlp) -> Result<Self> {
        if !net.output_dim().is_multiple_of(2) {
            return Err(Error::contract("gaussian net needs an even output width"));
        }
        Ok(Self { net })
    }

    pub fn dim(&self) -> usize {
        self.net.output_dim() / 2
    }

    pub(crate) fn split(&self, out: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let d = self.dim();
        let mean = out[..d].to_vec();
        let std = out[d..].iter().map(|&r| softplus(r) + Q_STD_FLOOR).collect();
        (mean, std)
    }

    pub(crate) fn forward_traced(&self, input: &[f64]) -> Result<(Trace, Vec<f64>, Vec<f64>)> {
        let trace = self.net.forward_traced(input)?;
        let (mean, std) = self.split(trace.output());
        Ok((trace, mean, std))
    }

    /// Back-propagates gradients wrt (mean, std) and returns the input gradient.
    pub(crate) fn backward(&self, trace: &Trace, g_mean: &[f64], g_std: &[f64], grads: &mut Mlp) -> Result<Vec<f64>> {
        let d = self.dim();
        let raw = &trace.output()[d..];
        let mut up = Vec::with_capacity(2 * d);
        up.extend_from_slice(g_mean);
        up.extend(g_std.iter().zip(raw).map(|(g, &r)| g * logistic(r)));
        self.net.backward(trace, &up, grads)
    }
}

/// Mixing network: logits over the current basis set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixingNet {
    pub net: Mlp,
}

impl MixingNet {
    pub fn width(&self) -> usize {
        self.net.output_dim()
    }
}

/// The latent-side parameters `(q, p, w)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentNets {
    pub inference: GaussianNet,
    pub prior: GaussianNet,
    pub mixing: MixingNet,
}

impl LatentNets {
    pub fn new(cfg: &LatentConfig, n_bases: usize, rng: &mut Rng) -> Result<Self> {
        cfg.validate()?;
        if n_bases == 0 {
            return Err(Error::contract("mixing net needs at least one basis"));
        }
        let d = cfg.dim;
        Ok(Self {
            inference: GaussianNet::new(Mlp::glorot(&sizes(d + 2, &cfg.inference_hidden, 2 * d), rng))?,
            prior: GaussianNet::new(Mlp::glorot(&sizes(d, &cfg.prior_hidden, 2 * d), rng))?,
            mixing: MixingNet {
                net: Mlp::glorot(&sizes(d, &cfg.mixing_hidden, n_bases), rng),
            },
        })
    }

    pub fn from_parts(inference: Mlp, prior: Mlp, mixing: Mlp) -> Result<Self> {
        let nets = Self {
            inference: GaussianNet::new(inference)?,
            prior: GaussianNet::new(prior)?,
            mixing: MixingNet { net: mixing },
        };
        let d = nets.dim();
        if nets.inference.net.input_dim() != d + 2 || nets.prior.net.input_dim() != d || nets.prior.dim() != d || nets.mixing.net.input_dim() != d {
            return Err(Error::contract("latent network dimensions are inconsistent"));
        }
        Ok(nets)
    }

    pub fn dim(&self) -> usize {
        self.inference.dim()
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            inference: GaussianNet { net: self.inference.net.zeros_like() },
            prior: GaussianNet { net: self.prior.net.zeros_like() },
            mixing: MixingNet { net: self.mixing.net.zeros_like() },
        }
    }

    pub fn nets(&self) -> [&Mlp; 3] {
        [&self.mixing.net, &self.prior.net, &self.inference.net]
    }

    pub fn nets_mut(&mut self) -> [&mut Mlp; 3] {
        [&mut self.mixing.net, &mut self.prior.net, &mut self.inference.net]
    }
}

impl Parameters for LatentNets {
    fn tensors(&self) -> Vec<&Tensor> {
        self.nets().into_iter().flat_map(|n| n.tensors()).collect()
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        self.nets_mut().into_iter().flat_map(|n| n.tensors_mut()).collect()
    }

    fn tensor_name(&self, index: usize) -> String {
        let mut i = index;
        for (name, net) in ["mixing", "prior", "inference"].into_iter().zip(self.nets()) {
            let n = net.tensors().len();
            if i < n {
                return format!("{name}.{}", net.tensor_name(i));
            }
            i -= n;
        }
        format!("latent[{index}]")
    }
}

/// A sampled latent vector with the Gaussian that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentState {
    pub z: Vec<f64>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub t: u64,
}

impl LatentState {
    /// The deterministic stream-start state `z_0 = 0`.
    pub fn origin(dim: usize) -> Self {
        Self {
            z: vec![0.0; dim],
            mean: vec![0.0; dim],
            std: vec![1.0; dim],
            t: 0,
        }
    }
}

fn reparameterize(mean: Vec<f64>, std: Vec<f64>, eps: &[f64], t: u64) -> Result<LatentState> {
    if eps.len() != mean.len() {
        return Err(Error::contract(format!("noise has {} entries, latent has {}", eps.len(), mean.len())));
    }
    let z = mean.iter().zip(&std).zip(eps).map(|((m, s), e)| m + s * e).collect();
    Ok(LatentState { z, mean, std, t })
}

pub(crate) fn inference_input(z_prev: &[f64], x: f64, y: f64) -> Vec<f64> {
    let mut input = Vec::with_capacity(z_prev.len() + 2);
    input.extend_from_slice(z_prev);
    input.push(x);
    input.push(y);
    input
}

/// `z = mu_q(z_prev, x, y) + sigma_q(z_prev, x, y) * eps`.
pub fn infer_step(q: &GaussianNet, prev: &LatentState, x: f64, y: f64, eps: &[f64]) -> Result<LatentState> {
    let out = q.net.forward(&inference_input(&prev.z, x, y))?;
    let (mean, std) = q.split(&out);
    reparameterize(mean, std, eps, prev.t + 1)
}

/// `z = mu_p(z_prev) + sigma_p(z_prev) * eps`.
pub fn prior_step(p: &GaussianNet, prev: &LatentState, eps: &[f64]) -> Result<LatentState> {
    let out = p.net.forward(&prev.z)?;
    let (mean, std) = p.split(&out);
    reparameterize(mean, std, eps, prev.t + 1)
}

pub fn mixing_weights(w: &MixingNet, z: &[f64]) -> Result<Vec<f64>> {
    Ok(softmax(&w.net.forward(z)?))
}

/// Adds one logit for a new basis. Existing rows are untouched; the new row
/// gets `N(0, scale^2)` incoming weights and the given bias.
pub fn grow_mixing_head(w: &mut MixingNet, bias: f64, scale: f64, rng: &mut Rng) -> Result<()> {
    let fan_in = w.net.layers().last().expect("mlp has layers").input_dim();
    let weights: Vec<f64> = (0..fan_in).map(|_| scale * rng.normal()).collect();
    w.net.push_output_unit(&weights, bias)
}
