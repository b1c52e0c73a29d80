//! Linear-Gaussian instance whose expected ELBO has a closed form.
//!
//! With one basis the reconstruction term does not depend on `z`, and with
//! linear `q`/`p` means and constant standard deviations the remaining terms
//! are expected negative KL divergences whose arguments are affine in a
//! Gaussian `z_{t-1}`, so the whole expectation has a closed form.

use mob_core::basis::{BasisOrigin, EnsembleBasis};
use mob_core::latent::{draw_noise, elbo, Anchor, GradMask, LatentNets};
use mob_core::ndmath::{Dense, Mlp, Rng, Tensor};
use nalgebra::{DMatrix, DVector};

use super::gauss_logpdf;

const D: usize = 2;

struct Toy {
    a_q: DMatrix<f64>,
    u_q: DVector<f64>,
    v_q: DVector<f64>,
    b_q: DVector<f64>,
    raw_q: DVector<f64>,
    a_p: DMatrix<f64>,
    b_p: DVector<f64>,
    raw_p: DVector<f64>,
}

fn softplus(r: f64) -> f64 {
    (1.0 + r.exp()).ln()
}

fn std_of(raw: &DVector<f64>) -> DVector<f64> {
    raw.map(|r| softplus(r) + 1e-4)
}

fn dense(weight: DMatrix<f64>, bias: DVector<f64>) -> Dense {
    let (rows, cols) = weight.shape();
    let data: Vec<f64> = (0..rows).flat_map(|i| (0..cols).map(move |j| (i, j))).map(|(i, j)| weight[(i, j)]).collect();
    Dense {
        weight: Tensor::new(vec![rows, cols], data).unwrap(),
        bias: Tensor::new(vec![rows], bias.iter().copied().collect()).unwrap(),
    }
}

impl Toy {
    fn new(rng: &mut Rng) -> Self {
        let mut m = |r: usize, c: usize, s: f64| DMatrix::from_fn(r, c, |_, _| s * rng.normal());
        Self {
            a_q: m(D, D, 0.5),
            u_q: m(D, 1, 0.5).column(0).into(),
            v_q: m(D, 1, 0.5).column(0).into(),
            b_q: m(D, 1, 0.3).column(0).into(),
            raw_q: m(D, 1, 0.5).column(0).into(),
            a_p: m(D, D, 0.5),
            b_p: m(D, 1, 0.3).column(0).into(),
            raw_p: m(D, 1, 0.5).column(0).into(),
        }
    }

    fn nets(&self) -> LatentNets {
        let mut wq = DMatrix::zeros(2 * D, D + 2);
        wq.view_mut((0, 0), (D, D)).copy_from(&self.a_q);
        wq.view_mut((0, D), (D, 1)).copy_from(&self.u_q);
        wq.view_mut((0, D + 1), (D, 1)).copy_from(&self.v_q);
        let bq = DVector::from_iterator(2 * D, self.b_q.iter().chain(self.raw_q.iter()).copied());
        let mut wp = DMatrix::zeros(2 * D, D);
        wp.view_mut((0, 0), (D, D)).copy_from(&self.a_p);
        let bp = DVector::from_iterator(2 * D, self.b_p.iter().chain(self.raw_p.iter()).copied());
        let inference = Mlp::new(vec![dense(wq, bq)]).unwrap();
        let prior = Mlp::new(vec![dense(wp, bp)]).unwrap();
        let mixing = Mlp::new(vec![Dense::zeros(D, 1)]).unwrap();
        LatentNets::from_parts(inference, prior, mixing).unwrap()
    }

    /// Expected ELBO minus the reconstruction term, for latent steps driven
    /// by `obs` starting from the fixed latent `z0`.
    fn latent_terms(&self, z0: &DVector<f64>, obs: &[(f64, f64)]) -> f64 {
        let sq = std_of(&self.raw_q);
        let sp = std_of(&self.raw_p);
        let diff = &self.a_q - &self.a_p;
        let mut mean = z0.clone();
        let mut cov = DMatrix::<f64>::zeros(D, D);
        let mut total = 0.0;
        for &(x, y) in obs {
            let offset = &self.u_q * x + &self.v_q * y + &self.b_q - &self.b_p;
            for k in 0..D {
                let a = diff.row(k).transpose();
                let mean_delta = a.dot(&mean) + offset[k];
                let second_moment = mean_delta * mean_delta + (a.transpose() * &cov * &a)[(0, 0)];
                let kl = (sp[k] / sq[k]).ln() + (sq[k] * sq[k] + second_moment) / (2.0 * sp[k] * sp[k]) - 0.5;
                total -= kl;
            }
            mean = &self.a_q * &mean + &self.u_q * x + &self.v_q * y + &self.b_q;
            cov = &self.a_q * &cov * self.a_q.transpose() + DMatrix::from_diagonal(&sq.map(|s| s * s));
        }
        total
    }
}

fn linear_basis(rng: &mut Rng) -> (EnsembleBasis, [f64; 3]) {
    let coef = [rng.normal(), rng.normal(), rng.normal()];
    let w = DMatrix::from_row_slice(2, 1, &[coef[0], 0.0]);
    let b = DVector::from_vec(vec![coef[1], coef[2]]);
    let member = Mlp::new(vec![dense(w, b)]).unwrap();
    (EnsembleBasis::new(vec![member], 1e-3, BasisOrigin::Baseline, 0).unwrap(), coef)
}

fn reconstruction(coef: &[f64; 3], obs: &[(f64, f64)]) -> f64 {
    let sd = softplus(coef[2]) + 1e-3;
    obs.iter().map(|&(x, y)| gauss_logpdf(y, coef[0] * x + coef[1], sd)).sum()
}

/// Monte Carlo mean and standard error of `n` single-sample estimates next
/// to the closed form.
#[derive(Debug, Clone, Copy)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
    pub closed_form: f64,
}

impl Estimate {
    pub fn within(&self, k: f64) -> bool {
        self.se > 0.0 && (self.mean - self.closed_form).abs() < k * self.se
    }
}

/// A random toy instance with four observations, anchored at the stream
/// start or after a random latent.
pub fn estimate(seed: u64, after: bool, n: usize) -> Estimate {
    let mut rng = Rng::new(seed);
    let toy = Toy::new(&mut rng);
    let nets = toy.nets();
    let (basis, coef) = linear_basis(&mut rng);
    let obs: Vec<(f64, f64)> = (0..4).map(|_| (rng.uniform_range(-1.0, 1.0), rng.uniform_range(-2.0, 2.0))).collect();
    let (anchor, z0, latent_obs) = if after {
        let z0 = rng.normal_vec(D);
        (Anchor::After(z0.clone()), DVector::from_vec(z0), &obs[..])
    } else {
        (Anchor::StreamStart, DVector::zeros(D), &obs[1..])
    };
    let closed = reconstruction(&coef, &obs) + toy.latent_terms(&z0, latent_obs);

    let bases = [basis];
    let estimates: Vec<f64> = (0..n)
        .map(|_| {
            let noise = draw_noise(&mut rng, obs.len(), D);
            elbo(&bases, &nets, &obs, &anchor, &noise, GradMask::NONE).unwrap().terms.total()
        })
        .collect();
    let mean = estimates.iter().sum::<f64>() / n as f64;
    let var = estimates.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    Estimate { mean, se: (var / n as f64).sqrt(), closed_form: closed }
}
