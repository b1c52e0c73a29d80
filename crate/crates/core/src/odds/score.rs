use serde::{Deserialize, Serialize};

use crate::basis::EnsembleBasis;
use crate::{Error, Result};

/// Densities below this are clamped before taking ratios.
pub const DENSITY_FLOOR: f64 = 1e-30;
/// Lower clamp for `P(D=I|x)`.
pub const P_IN_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OddsConfig {
    /// Temperature `eta` of the in-distribution prior.
    pub temperature: f64,
    /// Instantiate when the buffer holds more than this many samples.
    pub buffer_threshold: usize,
    pub decision_threshold: f64,
    pub buffer_capacity: usize,
    /// Entries older than this many steps are evicted.
    pub stale_age: u64,
    /// Number of most recent observations fed to the candidate basis.
    pub recent_window: usize,
    /// Maximum candidate window size (buffer plus recent observations).
    pub max_window: usize,
    /// Steps between candidate refits.
    pub refit_interval: u64,
}

impl Default for OddsConfig {
    fn default() -> Self {
        Self {
            temperature: 10.0,
            buffer_threshold: 20,
            decision_threshold: 1.0,
            buffer_capacity: 40,
            stale_age: 100,
            recent_window: 20,
            max_window: 40,
            refit_interval: 5,
        }
    }
}

impl OddsConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(Error::Config("odds.temperature must be positive".into()));
        }
        if self.buffer_threshold == 0 {
            return Err(Error::Config("odds.buffer_threshold must be at least 1".into()));
        }
        if !(self.decision_threshold > 0.0) {
            return Err(Error::Config("odds.decision_threshold must be positive".into()));
        }
        if self.buffer_capacity <= self.buffer_threshold {
            return Err(Error::Config("odds.buffer_capacity must exceed odds.buffer_threshold".into()));
        }
        if self.recent_window == 0 || self.max_window == 0 || self.refit_interval == 0 {
            return Err(Error::Config("odds.recent_window, odds.max_window and odds.refit_interval must be at least 1".into()));
        }
        Ok(())
    }
}

/// Ratio of total to aleatoric variance of one ensemble at `x`; always >= 1.
pub fn uncertainty_score(basis: &EnsembleBasis, x: f64) -> f64 {
    let outs = basis.outputs(x);
    let m = outs.len() as f64;
    let mean = outs.iter().map(|o| o.mean).sum::<f64>() / m;
    let aleatoric = outs.iter().map(|o| o.sigma * o.sigma).sum::<f64>() / m;
    let spread = outs.iter().map(|o| (o.mean - mean).powi(2)).sum::<f64>() / m;
    // total variance written as aleatoric + spread so rounding never drops it below 1
    (aleatoric + spread) / aleatoric
}

/// `P(D=I|x) = exp((1 - score) / eta)`, with scores below 1 treated as 1.
pub fn prior_in_distribution(score: f64, temperature: f64) -> f64 {
    ((1.0 - score.max(1.0)) / temperature).exp()
}

fn prior_out_of_distribution(score: f64, temperature: f64) -> f64 {
    -((1.0 - score.max(1.0)) / temperature).exp_m1()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OddsVerdict {
    pub score: f64,
    pub log_score: f64,
    /// Per-basis uncertainty scores.
    pub scores: Vec<f64>,
    pub p_in: f64,
    pub ll_in: f64,
    pub ll_out: f64,
    pub is_ood: bool,
}

impl OddsVerdict {
    pub fn min_score(&self) -> f64 {
        self.scores.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// `log S = log P(y|O) + log P(O) - log P(y|I) - log P(I)` with the density
/// and prior clamps applied. Returns `-inf` when `P(O) = 0`.
pub fn odds_ratio(ll_in: f64, ll_out: f64, p_in: f64, p_out: f64) -> f64 {
    if p_out <= 0.0 {
        return f64::NEG_INFINITY;
    }
    let floor = DENSITY_FLOOR.ln();
    ll_out.max(floor) + p_out.ln() - ll_in.max(floor) - p_in.clamp(P_IN_FLOOR, 1.0).ln()
}

/// Scores `(x, y)` against the current bases and the candidate basis.
pub fn odds_score(bases: &[EnsembleBasis], candidate: &EnsembleBasis, x: f64, y: f64, cfg: &OddsConfig) -> Result<OddsVerdict> {
    if bases.is_empty() {
        return Err(Error::contract("ODDS needs at least one existing basis"));
    }
    let scores: Vec<f64> = bases.iter().map(|b| uncertainty_score(b, x)).collect();
    let min_score = scores.iter().copied().fold(f64::INFINITY, f64::min);
    let ll_in = bases.iter().map(|b| b.log_likelihood(x, y)).fold(f64::NEG_INFINITY, f64::max);
    let ll_out = candidate.log_likelihood(x, y);
    let p_in = prior_in_distribution(min_score, cfg.temperature);
    let p_out = prior_out_of_distribution(min_score, cfg.temperature);
    let log_score = odds_ratio(ll_in, ll_out, p_in, p_out);
    let score = log_score.exp();
    Ok(OddsVerdict {
        score,
        log_score,
        scores,
        p_in,
        ll_in,
        ll_out,
        is_ood: log_score > cfg.decision_threshold.ln(),
    })
}
