use super::nets::inference_input;
use super::{LatentNets, LatentState};
use crate::basis::EnsembleBasis;
use crate::ndmath::{log_sum_exp, normal_log_pdf, softmax, Mlp, Rng, Trace};
use crate::{Error, Result};

/// Where a rollout starts.
#[derive(Debug, Clone, PartialEq)]
pub enum Anchor {
    /// Beginning of a stream: `z_0 = 0` is deterministic and the first
    /// observation contributes only its reconstruction term.
    StreamStart,
    /// Continue from a fixed latent (treated as a constant); every
    /// observation in the window gets a sampled latent.
    After(Vec<f64>),
}

/// Which parameter groups receive gradients.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GradMask {
    pub bases: bool,
    pub latent: bool,
}

impl GradMask {
    pub const ALL: Self = Self { bases: true, latent: true };
    pub const NONE: Self = Self { bases: false, latent: false };
    pub const BASES: Self = Self { bases: true, latent: false };
    pub const LATENT: Self = Self { bases: false, latent: true };

    fn any(self) -> bool {
        self.bases || self.latent
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ElboTerms {
    /// `sum_t log P(y_t | x_t, z_t)`
    pub reconstruction: f64,
    /// `sum_t log p(z_t | z_{t-1})`
    pub prior: f64,
    /// `sum_t log q(z_t | z_{t-1}, x_t, y_t)`
    pub posterior: f64,
}

impl ElboTerms {
    pub fn total(&self) -> f64 {
        self.reconstruction + self.prior - self.posterior
    }
}

/// Gradients of the ELBO (ascent direction).
#[derive(Debug, Clone, PartialEq)]
pub struct ElboGradients {
    /// `bases[i][j]` matches member `j` of basis `i`.
    pub bases: Vec<Vec<Mlp>>,
    pub latent: LatentNets,
}

impl ElboGradients {
    pub fn zeros(bases: &[EnsembleBasis], nets: &LatentNets) -> Self {
        Self {
            bases: bases.iter().map(EnsembleBasis::zero_gradients).collect(),
            latent: nets.zeros_like(),
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for m in self.bases.iter_mut().flatten() {
            m.scale(factor);
        }
        for n in self.latent.nets_mut() {
            n.scale(factor);
        }
    }

    pub fn add(&mut self, other: &ElboGradients, alpha: f64) {
        for (a, b) in self.bases.iter_mut().flatten().zip(other.bases.iter().flatten()) {
            a.axpy(alpha, b);
        }
        for (a, b) in self.latent.nets_mut().into_iter().zip(other.latent.nets()) {
            a.axpy(alpha, b);
        }
    }
}

#[derive(Debug, Clone)]
pub struct ElboOutput {
    pub terms: ElboTerms,
    /// Sampled latent per observation (`z_0 = 0` first under `StreamStart`).
    pub states: Vec<LatentState>,
    /// Mixing weights used for each observation.
    pub weights: Vec<Vec<f64>>,
    pub grads: Option<ElboGradients>,
}

/// `steps` standard-normal vectors of length `dim`, drawn in time order.
pub fn draw_noise(rng: &mut Rng, steps: usize, dim: usize) -> Vec<Vec<f64>> {
    (0..steps).map(|_| rng.normal_vec(dim)).collect()
}

struct Sampled {
    q_trace: Trace,
    q_std: Vec<f64>,
    p_trace: Trace,
    p_mean: Vec<f64>,
    p_std: Vec<f64>,
}

struct Step {
    z: Vec<f64>,
    mix_trace: Trace,
    weights: Vec<f64>,
    resp: Vec<f64>,
    sampled: Option<Sampled>,
}

/// Single-sample ELBO over an observation window, optionally with exact
/// gradients by back-propagation through time.
///
/// `noise[t]` drives the latent at observation `t`; under
/// [`Anchor::StreamStart`] `noise[0]` is unused.
pub fn elbo(bases: &[EnsembleBasis], nets: &LatentNets, obs: &[(f64, f64)], anchor: &Anchor, noise: &[Vec<f64>], mask: GradMask) -> Result<ElboOutput> {
    let d = nets.dim();
    if obs.is_empty() {
        return Err(Error::contract("ELBO needs at least one observation"));
    }
    if noise.len() != obs.len() {
        return Err(Error::contract(format!("{} noise vectors for {} observations", noise.len(), obs.len())));
    }
    if nets.mixing.width() != bases.len() {
        return Err(Error::contract(format!("mixing head width {} but {} bases", nets.mixing.width(), bases.len())));
    }
    let (mut z_prev, first_sampled) = match anchor {
        Anchor::StreamStart => (vec![0.0; d], false),
        Anchor::After(z) if z.len() == d => (z.clone(), true),
        Anchor::After(z) => return Err(Error::contract(format!("anchor latent has {} entries, expected {d}", z.len()))),
    };

    let mut terms = ElboTerms::default();
    let mut steps = Vec::with_capacity(obs.len());
    let mut states = Vec::with_capacity(obs.len());
    for (t, &(x, y)) in obs.iter().enumerate() {
        let (z, sampled) = if t == 0 && !first_sampled {
            states.push(LatentState::origin(d));
            (z_prev.clone(), None)
        } else {
            let eps = &noise[t];
            if eps.len() != d {
                return Err(Error::contract(format!("noise vector has {} entries, expected {d}", eps.len())));
            }
            let (q_trace, q_mean, q_std) = nets.inference.forward_traced(&inference_input(&z_prev, x, y))?;
            let z: Vec<f64> = q_mean.iter().zip(&q_std).zip(eps).map(|((m, s), e)| m + s * e).collect();
            let (p_trace, p_mean, p_std) = nets.prior.forward_traced(&z_prev)?;
            for k in 0..d {
                terms.prior += normal_log_pdf(z[k], p_mean[k], p_std[k]);
                terms.posterior += normal_log_pdf(z[k], q_mean[k], q_std[k]);
            }
            states.push(LatentState {
                z: z.clone(),
                mean: q_mean,
                std: q_std.clone(),
                t: t as u64,
            });
            (
                z,
                Some(Sampled {
                    q_trace,
                    q_std,
                    p_trace,
                    p_mean,
                    p_std,
                }),
            )
        };
        let mix_trace = nets.mixing.net.forward_traced(&z)?;
        let logits = mix_trace.output();
        let joint: Vec<f64> = logits.iter().zip(bases).map(|(l, b)| l + b.log_likelihood(x, y)).collect();
        terms.reconstruction += log_sum_exp(&joint) - log_sum_exp(logits);
        let weights = softmax(logits);
        let resp = softmax(&joint);
        z_prev = z.clone();
        steps.push(Step {
            z,
            mix_trace,
            weights,
            resp,
            sampled,
        });
    }

    let grads = if mask.any() {
        Some(backward(bases, nets, obs, noise, &steps, mask)?)
    } else {
        None
    };
    Ok(ElboOutput {
        terms,
        states,
        weights: steps.into_iter().map(|s| s.weights).collect(),
        grads,
    })
}

fn backward(bases: &[EnsembleBasis], nets: &LatentNets, obs: &[(f64, f64)], noise: &[Vec<f64>], steps: &[Step], mask: GradMask) -> Result<ElboGradients> {
    let d = nets.dim();
    let mut g = ElboGradients::zeros(bases, nets);
    let mut carry = vec![0.0; d];
    for t in (0..steps.len()).rev() {
        let step = &steps[t];
        let (x, y) = obs[t];
        if mask.bases {
            for (i, basis) in bases.iter().enumerate() {
                basis.accumulate_log_likelihood_gradient(x, y, step.resp[i], &mut g.bases[i])?;
            }
        }
        if !mask.latent {
            continue;
        }
        let up: Vec<f64> = step.resp.iter().zip(&step.weights).map(|(r, w)| r - w).collect();
        let dz_mix = nets.mixing.net.backward(&step.mix_trace, &up, &mut g.latent.mixing.net)?;
        let Some(s) = &step.sampled else { continue };
        let eps = &noise[t];
        let mut gz = carry.clone();
        let mut g_pm = vec![0.0; d];
        let mut g_ps = vec![0.0; d];
        let mut g_qm = vec![0.0; d];
        let mut g_qs = vec![0.0; d];
        for k in 0..d {
            let diff = step.z[k] - s.p_mean[k];
            let inv_var = 1.0 / (s.p_std[k] * s.p_std[k]);
            gz[k] += dz_mix[k] - diff * inv_var + eps[k] / s.q_std[k];
            g_pm[k] = diff * inv_var;
            g_ps[k] = -1.0 / s.p_std[k] + diff * diff * inv_var / s.p_std[k];
            g_qm[k] = gz[k] - eps[k] / s.q_std[k];
            g_qs[k] = gz[k] * eps[k] + (1.0 - eps[k] * eps[k]) / s.q_std[k];
        }
        let dz_prior = nets.prior.backward(&s.p_trace, &g_pm, &g_ps, &mut g.latent.prior.net)?;
        let d_input = nets.inference.backward(&s.q_trace, &g_qm, &g_qs, &mut g.latent.inference.net)?;
        for k in 0..d {
            carry[k] = dz_prior[k] + d_input[k];
        }
    }
    Ok(g)
}
