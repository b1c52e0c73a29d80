use super::EnsembleBasis;
use crate::ndmath::{log_sum_exp, Rng};
use crate::{Error, Result};

const SIMPLEX_TOLERANCE: f64 = 1e-6;

/// Rejects weight vectors that are off the simplex by more than 1e-6 or whose
/// length differs from the basis count.
pub fn check_simplex(weights: &[f64], count: usize) -> Result<()> {
    if weights.len() != count {
        return Err(Error::contract(format!("{} weights for {count} bases", weights.len())));
    }
    if weights.is_empty() {
        return Err(Error::contract("mixture needs at least one basis"));
    }
    let sum: f64 = weights.iter().sum();
    if weights.iter().any(|w| !w.is_finite() || *w < -SIMPLEX_TOLERANCE) || (sum - 1.0).abs() > SIMPLEX_TOLERANCE {
        return Err(Error::contract(format!("weights are off the simplex (sum {sum})")));
    }
    Ok(())
}

/// `log sum_i w_i exp(ll_i)` from per-basis log-likelihoods.
pub fn mixture_log_likelihood_of(basis_lls: &[f64], weights: &[f64]) -> Result<f64> {
    check_simplex(weights, basis_lls.len())?;
    let terms: Vec<f64> = basis_lls
        .iter()
        .zip(weights)
        .filter(|(_, &w)| w > 0.0)
        .map(|(ll, w)| ll + w.ln())
        .collect();
    Ok(log_sum_exp(&terms))
}

pub fn mixture_log_likelihood(bases: &[EnsembleBasis], weights: &[f64], x: f64, y: f64) -> Result<f64> {
    check_simplex(weights, bases.len())?;
    let lls: Vec<f64> = bases.iter().map(|b| b.log_likelihood(x, y)).collect();
    mixture_log_likelihood_of(&lls, weights)
}

/// `y_hat = sum_i w_i M^-1 sum_j mu_ij(x)`.
pub fn mixture_point_estimate(bases: &[EnsembleBasis], weights: &[f64], x: f64) -> Result<f64> {
    check_simplex(weights, bases.len())?;
    Ok(bases.iter().zip(weights).map(|(b, w)| w * b.mean(x)).sum())
}

/// Full predictive distribution at one input.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixturePrediction {
    pub weights: Vec<f64>,
    /// `means[i][j]` is member `j` of basis `i`.
    pub means: Vec<Vec<f64>>,
    pub variances: Vec<Vec<f64>>,
}

impl GaussianMixturePrediction {
    pub fn point_estimate(&self) -> f64 {
        self.weights
            .iter()
            .zip(&self.means)
            .map(|(w, mu)| w * mu.iter().sum::<f64>() / mu.len() as f64)
            .sum()
    }

    /// Draws one `y`: basis by weight, member uniformly, then a Gaussian.
    pub fn sample(&self, rng: &mut Rng) -> f64 {
        let u = rng.uniform();
        let mut acc = 0.0;
        let mut i = self.weights.len() - 1;
        for (k, w) in self.weights.iter().enumerate() {
            acc += w;
            if u < acc {
                i = k;
                break;
            }
        }
        let j = rng.below(self.means[i].len());
        self.means[i][j] + self.variances[i][j].sqrt() * rng.normal()
    }
}

pub fn predict_mixture(bases: &[EnsembleBasis], weights: &[f64], x: f64) -> Result<GaussianMixturePrediction> {
    check_simplex(weights, bases.len())?;
    let mut means = Vec::with_capacity(bases.len());
    let mut variances = Vec::with_capacity(bases.len());
    for b in bases {
        let outs = b.outputs(x);
        means.push(outs.iter().map(|o| o.mean).collect());
        variances.push(outs.iter().map(|o| o.sigma * o.sigma).collect());
    }
    Ok(GaussianMixturePrediction {
        weights: weights.to_vec(),
        means,
        variances,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{BasisOrigin, EnsembleBasis};
    use crate::ndmath::Mlp;
    use approx::assert_relative_eq;

    fn constant_basis(params: &[(f64, f64)]) -> EnsembleBasis {
        let floor = 1e-3;
        let members = params
            .iter()
            .map(|&(m, s)| {
                let mut net = Mlp::zeros(&[1, 2, 2]);
                let raw = ((s - floor).exp() - 1.0).ln();
                net.layers_mut()[1].bias.data_mut().copy_from_slice(&[m, raw]);
                net
            })
            .collect();
        EnsembleBasis::new(members, floor, BasisOrigin::Odds, 0).unwrap()
    }

    #[test]
    fn hand_values() {
        let v = mixture_log_likelihood_of(&[0.4f64.ln(), 0.1f64.ln()], &[0.5, 0.5]).unwrap();
        assert_relative_eq!(v, 0.25f64.ln(), max_relative = 1e-12);
        let bases = [constant_basis(&[(2.0, 1.0)]), constant_basis(&[(4.0, 1.0)])];
        assert_relative_eq!(mixture_point_estimate(&bases, &[0.5, 0.5], 0.1).unwrap(), 3.0, max_relative = 1e-12);
    }

    #[test]
    fn single_and_one_hot() {
        let a = constant_basis(&[(0.0, 1.0), (1.0, 0.5)]);
        let b = constant_basis(&[(3.0, 2.0), (-1.0, 0.7)]);
        assert_eq!(mixture_log_likelihood(std::slice::from_ref(&a), &[1.0], 0.0, 0.3).unwrap(), a.log_likelihood(0.0, 0.3));
        let both = [a, b];
        assert_relative_eq!(
            mixture_log_likelihood(&both, &[0.0, 1.0], 0.0, 0.3).unwrap(),
            both[1].log_likelihood(0.0, 0.3),
            max_relative = 1e-15
        );
    }

    #[test]
    fn rejects_bad_weights() {
        let bases = [constant_basis(&[(0.0, 1.0)]), constant_basis(&[(1.0, 1.0)])];
        assert!(mixture_point_estimate(&bases, &[0.5, 0.6], 0.0).is_err());
        assert!(mixture_point_estimate(&bases, &[1.0], 0.0).is_err());
        assert!(mixture_point_estimate(&bases, &[1.2, -0.2], 0.0).is_err());
        assert!(mixture_point_estimate(&bases, &[0.5 + 5e-7, 0.5], 0.0).is_ok());
    }

    #[test]
    fn point_estimate_is_mixture_mean() {
        let bases = [constant_basis(&[(-1.0, 0.5), (0.5, 1.5)]), constant_basis(&[(2.0, 1.0), (3.0, 0.3)])];
        let weights = [0.3, 0.7];
        let pred = predict_mixture(&bases, &weights, 0.2).unwrap();
        let target = mixture_point_estimate(&bases, &weights, 0.2).unwrap();
        assert_relative_eq!(pred.point_estimate(), target, max_relative = 1e-12);
        let mut rng = Rng::new(42);
        let n = 100_000;
        let draws: Vec<f64> = (0..n).map(|_| pred.sample(&mut rng)).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let se = (var / n as f64).sqrt();
        assert!((mean - target).abs() < 3.0 * se, "{mean} vs {target} (se {se})");
    }

    proptest::proptest! {
        #[test]
        fn bounded_by_components(l1 in -20.0f64..5.0, l2 in -20.0f64..5.0, w in 0.01f64..0.99) {
            let m = mixture_log_likelihood_of(&[l1, l2], &[w, 1.0 - w]).unwrap();
            let wmin = w.min(1.0 - w);
            proptest::prop_assert!(m <= l1.max(l2) + 1e-12);
            proptest::prop_assert!(m >= l1.min(l2) + wmin.ln() - 1e-12);
        }

        #[test]
        fn shift_moves_estimate(c in -5.0f64..5.0, w in 0.0f64..1.0) {
            let a = [constant_basis(&[(1.0, 1.0)]), constant_basis(&[(-2.0, 1.0)])];
            let b = [constant_basis(&[(1.0 + c, 1.0)]), constant_basis(&[(-2.0 + c, 1.0)])];
            let wts = [w, 1.0 - w];
            let d = mixture_point_estimate(&b, &wts, 0.0).unwrap() - mixture_point_estimate(&a, &wts, 0.0).unwrap();
            proptest::prop_assert!((d - c).abs() < 1e-12);
        }
    }
}
