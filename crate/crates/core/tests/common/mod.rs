//! Independent oracles and helpers shared by the integration tests.
#![allow(dead_code)]

use mob_core::ndmath::Parameters;

/// All parameters of `p` in `tensors()` order.
pub fn flat<P: Parameters + ?Sized>(p: &P) -> Vec<f64> {
    p.tensors().iter().flat_map(|t| t.data().to_vec()).collect()
}

/// Adds `delta` to the `index`-th scalar of `p` in flattened order.
pub fn nudge<P: Parameters + ?Sized>(p: &mut P, index: usize, delta: f64) {
    let mut offset = 0;
    for t in p.tensors_mut() {
        let n = t.len();
        if index < offset + n {
            t.data_mut()[index - offset] += delta;
            return;
        }
        offset += n;
    }
    panic!("index {index} out of range ({offset} parameters)");
}

/// Relative error with a floor so near-zero entries compare absolutely.
pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-4)
}

/// Central finite difference of `f` with respect to every parameter of `p`.
pub fn central_difference<P: Parameters + ?Sized>(p: &mut P, h: f64, mut f: impl FnMut(&P) -> f64) -> Vec<f64> {
    let n = p.parameter_count();
    (0..n)
        .map(|i| {
            nudge(p, i, h);
            let up = f(p);
            nudge(p, i, -2.0 * h);
            let down = f(p);
            nudge(p, i, h);
            (up - down) / (2.0 * h)
        })
        .collect()
}

pub fn max_rel_err(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    analytic.iter().zip(numeric).map(|(a, n)| rel_err(*a, *n)).fold(0.0, f64::max)
}

/// Gaussian log density written out from the formula.
pub fn gauss_logpdf(y: f64, mean: f64, sd: f64) -> f64 {
    let r = (y - mean) / sd;
    -0.5 * r * r - sd.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln()
}

/// Equal-weight Gaussian ensemble log-likelihood, computed in linear space.
pub fn ensemble_ll(means: &[f64], sds: &[f64], y: f64) -> f64 {
    let m = means.len() as f64;
    let s: f64 = means.iter().zip(sds).map(|(mu, sd)| gauss_logpdf(y, *mu, *sd).exp()).sum();
    (s / m).ln()
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub mod elbo_toy;
pub mod fixture;
pub mod gradcheck;
pub mod shift;
