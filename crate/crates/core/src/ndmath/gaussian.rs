use crate::{Error, Result};

/// `ln(sqrt(2π))`.
pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Log density of a scalar normal with standard deviation `sigma`. Unchecked.
#[inline]
pub fn normal_log_pdf(y: f64, mu: f64, sigma: f64) -> f64 {
    let r = (y - mu) / sigma;
    -0.5 * r * r - sigma.ln() - LN_SQRT_2PI
}

/// Sum over dimensions of `log N(y_k; mu_k, sigma_k^2)`.
pub fn gaussian_log_pdf(y: &[f64], mu: &[f64], sigma: &[f64]) -> Result<f64> {
    if y.len() != mu.len() || y.len() != sigma.len() {
        return Err(Error::contract(format!(
            "gaussian_log_pdf dimension mismatch: y {}, mu {}, sigma {}",
            y.len(),
            mu.len(),
            sigma.len()
        )));
    }
    if let Some(k) = sigma.iter().position(|&s| !(s > 0.0)) {
        return Err(Error::contract(format!(
            "sigma[{k}] = {} must be positive",
            sigma[k]
        )));
    }
    Ok(y.iter()
        .zip(mu)
        .zip(sigma)
        .map(|((&y, &m), &s)| normal_log_pdf(y, m, s))
        .sum())
}

/// `ln(1 + e^x)` without overflow.
#[inline]
pub fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Derivative of [`softplus`].
#[inline]
pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    if max == f64::INFINITY {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let lse = log_sum_exp(logits);
    logits.iter().map(|l| (l - lse).exp()).collect()
}
