use serde::{Deserialize, Serialize};

use super::EnsemblePrior;
use crate::domains::SampleSet;
use crate::ndmath::{log_sum_exp, logistic, normal_log_pdf, softplus, Mlp, Parameters, Rng, Tensor};
use crate::{Error, Result};

/// Shape of one ensemble member: `1 -> hidden... -> 2` (mean, raw sigma).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeadConfig {
    pub hidden: Vec<usize>,
    pub sigma_floor: f64,
}

impl Default for HeadConfig {
    fn default() -> Self {
        Self {
            hidden: vec![128, 128],
            sigma_floor: 1e-3,
        }
    }
}

impl HeadConfig {
    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![1];
        sizes.extend(&self.hidden);
        sizes.push(2);
        sizes
    }

    pub fn init_member(&self, rng: &mut Rng) -> Mlp {
        Mlp::glorot(&self.layer_sizes(), rng)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MemberOutput {
    pub mean: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BasisOrigin {
    /// Adapted from the meta prior on the segmented data of a known task.
    Pretrained { task: usize },
    /// Instantiated from the OoD buffer.
    Odds,
    /// Short-lived ODDS candidate, discarded unless instantiation triggers.
    Candidate,
    /// Model owned by a baseline learner.
    Baseline,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleBasis {
    members: Vec<Mlp>,
    sigma_floor: f64,
    pub origin: BasisOrigin,
    /// Global step at which the basis was created.
    pub created_at: u64,
}

/// `(log N(y; mu, sigma), d/d mean, d/d raw)` for one member output.
#[inline]
fn loglik_and_upstream(out: &[f64], y: f64, floor: f64) -> (f64, [f64; 2]) {
    let (mu, raw) = (out[0], out[1]);
    let sigma = softplus(raw) + floor;
    let r = y - mu;
    let inv_var = 1.0 / (sigma * sigma);
    let ll = normal_log_pdf(y, mu, sigma);
    let d_mu = r * inv_var;
    let d_sigma = -1.0 / sigma + r * r * inv_var / sigma;
    (ll, [d_mu, d_sigma * logistic(raw)])
}

/// Mean NLL of one member over `data`, with its gradient added into `grads`.
pub(crate) fn member_nll_gradient(net: &Mlp, data: &SampleSet, floor: f64, grads: &mut Mlp) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::contract("cannot evaluate an NLL on no data"));
    }
    let scale = 1.0 / data.len() as f64;
    let mut total = 0.0;
    for (x, y) in data.iter() {
        let trace = net.forward_traced(&[x])?;
        let (ll, up) = loglik_and_upstream(trace.output(), y, floor);
        total -= ll;
        net.backward(&trace, &[-scale * up[0], -scale * up[1]], grads)?;
    }
    Ok(total * scale)
}

fn clip(grads: &mut Mlp, max_norm: f64) {
    if max_norm > 0.0 {
        let norm = grads.squared_norm().sqrt();
        if norm > max_norm {
            grads.scale(max_norm / norm);
        }
    }
}

/// Full-batch gradient descent on the member NLL.
pub(crate) fn sgd_adapt_member(init: &Mlp, data: &SampleSet, steps: usize, lr: f64, floor: f64, max_grad_norm: f64) -> Result<Mlp> {
    let mut net = init.clone();
    let mut grads = net.zeros_like();
    for _ in 0..steps {
        grads.scale(0.0);
        member_nll_gradient(&net, data, floor, &mut grads)?;
        clip(&mut grads, max_grad_norm);
        if !grads.is_finite() {
            return Err(Error::NonFiniteGradient("basis member during adaptation".into()));
        }
        net.axpy(-lr, &grads);
    }
    Ok(net)
}

impl EnsembleBasis {
    pub fn new(members: Vec<Mlp>, sigma_floor: f64, origin: BasisOrigin, created_at: u64) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::contract("an ensemble needs at least one member"));
        }
        if !(sigma_floor > 0.0) {
            return Err(Error::contract("sigma floor must be positive"));
        }
        let sizes = members[0].layer_sizes();
        if sizes[0] != 1 || *sizes.last().unwrap() != 2 || members.iter().any(|m| m.layer_sizes() != sizes) {
            return Err(Error::contract("ensemble members must share a 1 -> ... -> 2 architecture"));
        }
        Ok(Self {
            members,
            sigma_floor,
            origin,
            created_at,
        })
    }

    pub fn members(&self) -> &[Mlp] {
        &self.members
    }

    pub fn members_mut(&mut self) -> &mut Vec<Mlp> {
        &mut self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn sigma_floor(&self) -> f64 {
        self.sigma_floor
    }

    pub fn outputs(&self, x: f64) -> Vec<MemberOutput> {
        self.members
            .iter()
            .map(|m| {
                let out = m.forward(&[x]).expect("members take scalar input");
                MemberOutput {
                    mean: out[0],
                    sigma: softplus(out[1]) + self.sigma_floor,
                }
            })
            .collect()
    }

    /// Ensemble mean prediction `M^-1 sum_j mu_j(x)`.
    pub fn mean(&self, x: f64) -> f64 {
        let outs = self.outputs(x);
        outs.iter().map(|o| o.mean).sum::<f64>() / outs.len() as f64
    }

    /// `log[(1/M) sum_j N(y; mu_j(x), sigma_j(x)^2)]`.
    pub fn log_likelihood(&self, x: f64, y: f64) -> f64 {
        let lls: Vec<f64> = self
            .outputs(x)
            .iter()
            .map(|o| normal_log_pdf(y, o.mean, o.sigma))
            .collect();
        log_sum_exp(&lls) - (lls.len() as f64).ln()
    }

    /// Mean negative ensemble log-likelihood over a sample set.
    pub fn mean_nll(&self, data: &SampleSet) -> f64 {
        -data.iter().map(|(x, y)| self.log_likelihood(x, y)).sum::<f64>() / data.len().max(1) as f64
    }

    /// Adds `scale * d log_likelihood(x, y) / d members` into `grads` and
    /// returns the log-likelihood.
    pub fn accumulate_log_likelihood_gradient(&self, x: f64, y: f64, scale: f64, grads: &mut [Mlp]) -> Result<f64> {
        if grads.len() != self.members.len() {
            return Err(Error::contract("gradient buffer does not match ensemble size"));
        }
        let mut traces = Vec::with_capacity(self.members.len());
        let mut lls = Vec::with_capacity(self.members.len());
        let mut ups = Vec::with_capacity(self.members.len());
        for m in &self.members {
            let trace = m.forward_traced(&[x])?;
            let (ll, up) = loglik_and_upstream(trace.output(), y, self.sigma_floor);
            traces.push(trace);
            lls.push(ll);
            ups.push(up);
        }
        let lse = log_sum_exp(&lls);
        for (j, m) in self.members.iter().enumerate() {
            let resp = (lls[j] - lse).exp() * scale;
            if resp != 0.0 {
                m.backward(&traces[j], &[resp * ups[j][0], resp * ups[j][1]], &mut grads[j])?;
            }
        }
        Ok(lse - (lls.len() as f64).ln())
    }

    pub fn zero_gradients(&self) -> Vec<Mlp> {
        self.members.iter().map(Mlp::zeros_like).collect()
    }
}

impl Parameters for EnsembleBasis {
    fn tensors(&self) -> Vec<&Tensor> {
        self.members.tensors()
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        self.members.tensors_mut()
    }

    fn tensor_name(&self, index: usize) -> String {
        format!("member{}", self.members.tensor_name(index))
    }
}

/// Adapts every member `j` from `theta*_j` with the prior's inner loop.
pub fn adapt_basis(prior: &EnsemblePrior, data: &SampleSet) -> Result<EnsembleBasis> {
    adapt_basis_with_steps(prior, data, prior.inner_steps)
}

pub fn adapt_basis_with_steps(prior: &EnsemblePrior, data: &SampleSet, steps: usize) -> Result<EnsembleBasis> {
    if data.is_empty() {
        return Err(Error::contract("cannot adapt a basis to an empty sample set"));
    }
    let members = prior
        .members
        .iter()
        .map(|m| sgd_adapt_member(m, data, steps, prior.inner_lr, prior.sigma_floor, prior.max_grad_norm))
        .collect::<Result<Vec<_>>>()?;
    EnsembleBasis::new(members, prior.sigma_floor, BasisOrigin::Candidate, 0)
}
