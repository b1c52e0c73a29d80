//! Analytic gradients against central finite differences.

use mob_core::basis::{BasisOrigin, EnsembleBasis, HeadConfig};
use mob_core::latent::{draw_noise, elbo, Anchor, GradMask, LatentConfig, LatentNets};
use mob_core::ndmath::{Mlp, Parameters, Rng, Tensor};

use super::{central_difference, flat, max_rel_err, rel_err};

const H: f64 = 1e-5;

/// Worst relative error over `cases` random MLPs, parameters and inputs.
pub fn mlp_max_error(seed: u64, cases: usize) -> f64 {
    let mut rng = Rng::new(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..cases {
        let sizes = [1 + rng.below(3), 1 + rng.below(6), 1 + rng.below(6), 1 + rng.below(3)];
        let mut net = Mlp::random(&sizes, 1.0, &mut rng);
        let x = rng.normal_vec(sizes[0]);
        let upstream = rng.normal_vec(sizes[3]);
        let (grads, dx) = net.gradients(&x, &upstream).unwrap();
        let loss = |n: &Mlp, x: &[f64]| n.forward(x).unwrap().iter().zip(&upstream).map(|(o, u)| o * u).sum::<f64>();
        let numeric = central_difference(&mut net, H, |n| loss(n, &x));
        worst = worst.max(max_rel_err(&flat(&grads), &numeric));
        for i in 0..x.len() {
            let mut up = x.clone();
            up[i] += H;
            let mut down = x.clone();
            down[i] -= H;
            let n = (loss(&net, &up) - loss(&net, &down)) / (2.0 * H);
            worst = worst.max(rel_err(dx[i], n));
        }
    }
    worst
}

fn random_basis(rng: &mut Rng, members: usize, hidden: Vec<usize>) -> EnsembleBasis {
    let head = HeadConfig { hidden, sigma_floor: 1e-3 };
    let nets = (0..members).map(|_| head.init_member(rng)).collect();
    EnsembleBasis::new(nets, 1e-3, BasisOrigin::Baseline, 0).unwrap()
}

/// Worst relative error of the ensemble log-likelihood over `cases` random bases.
pub fn basis_max_error(seed: u64, cases: usize) -> f64 {
    let mut rng = Rng::new(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..cases {
        let m = 1 + rng.below(4);
        let hidden = vec![1 + rng.below(6), 1 + rng.below(6)];
        let mut basis = random_basis(&mut rng, m, hidden);
        let x = rng.uniform_range(-2.0, 2.0);
        let y = rng.uniform_range(-2.0, 2.0);
        let mut grads = basis.zero_gradients();
        basis.accumulate_log_likelihood_gradient(x, y, 1.0, &mut grads).unwrap();
        let numeric = central_difference(&mut basis, H, |b| b.log_likelihood(x, y));
        worst = worst.max(max_rel_err(&flat(&grads), &numeric));
    }
    worst
}

/// Bases and latent networks bundled so one flat index walks all parameters.
struct Model {
    bases: Vec<EnsembleBasis>,
    nets: LatentNets,
}

impl Parameters for Model {
    fn tensors(&self) -> Vec<&Tensor> {
        let mut t: Vec<_> = self.bases.iter().flat_map(|b| b.tensors()).collect();
        t.extend(self.nets.tensors());
        t
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut t: Vec<_> = self.bases.iter_mut().flat_map(|b| b.tensors_mut()).collect();
        t.extend(self.nets.tensors_mut());
        t
    }
}

fn elbo_case(seed: u64, anchor_after: bool) -> f64 {
    let mut rng = Rng::new(seed);
    let cfg = LatentConfig {
        dim: 4,
        inference_hidden: vec![6],
        prior_hidden: vec![6],
        mixing_hidden: vec![5],
        ..LatentConfig::default()
    };
    let bases = vec![random_basis(&mut rng, 2, vec![5]), random_basis(&mut rng, 2, vec![5])];
    let nets = LatentNets::new(&cfg, 2, &mut rng).unwrap();
    let mut model = Model { bases, nets };
    let obs: Vec<(f64, f64)> = (0..3).map(|_| (rng.uniform_range(-1.5, 1.5), rng.uniform_range(-1.5, 1.5))).collect();
    let noise = draw_noise(&mut rng, 3, 4);
    let anchor = if anchor_after { Anchor::After(rng.normal_vec(4)) } else { Anchor::StreamStart };
    let out = elbo(&model.bases, &model.nets, &obs, &anchor, &noise, GradMask::ALL).unwrap();
    let g = out.grads.unwrap();
    let mut analytic: Vec<f64> = g.bases.iter().flat_map(flat).collect();
    analytic.extend(flat(&g.latent));
    assert_eq!(analytic.len(), model.parameter_count());
    let numeric = central_difference(&mut model, H, |m| elbo(&m.bases, &m.nets, &obs, &anchor, &noise, GradMask::NONE).unwrap().terms.total());
    max_rel_err(&analytic, &numeric)
}

/// Worst relative error of the full sampled ELBO over `cases` seeds,
/// alternating stream-start and anchored windows.
pub fn elbo_max_error(cases: u64) -> f64 {
    (0..cases).map(|seed| elbo_case(seed, seed % 2 == 1)).fold(0.0, f64::max)
}
