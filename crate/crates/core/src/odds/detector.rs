use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::{odds_score, OddsConfig, OddsVerdict};
use crate::basis::{adapt_basis, BasisOrigin, EnsembleBasis, EnsemblePrior};
use crate::domains::SampleSet;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BufferEntry {
    pub x: f64,
    pub y: f64,
    pub step: u64,
}

/// FIFO store of recent out-of-distribution samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OddsBuffer {
    entries: VecDeque<BufferEntry>,
    capacity: usize,
    stale_age: u64,
}

impl OddsBuffer {
    pub fn new(capacity: usize, stale_age: u64) -> Self {
        Self {
            entries: VecDeque::with_capacity(capacity),
            capacity,
            stale_age,
        }
    }

    pub fn from_config(cfg: &OddsConfig) -> Self {
        Self::new(cfg.buffer_capacity, cfg.stale_age)
    }

    pub fn push(&mut self, entry: BufferEntry) {
        if self.entries.len() == self.capacity {
            self.entries.pop_front();
        }
        self.entries.push_back(entry);
    }

    /// Drops entries that arrived more than `stale_age` steps before `now`.
    pub fn evict_stale(&mut self, now: u64) {
        while self.entries.front().is_some_and(|e| now.saturating_sub(e.step) > self.stale_age) {
            self.entries.pop_front();
        }
    }

    pub fn entries(&self) -> impl Iterator<Item = &BufferEntry> {
        self.entries.iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn clear(&mut self) {
        self.entries.clear();
    }

    pub fn samples(&self) -> SampleSet {
        SampleSet::from_pairs(self.entries.iter().map(|e| (e.x, e.y)))
    }
}

/// Adapts a short-lived candidate basis from the prior on a recent window.
pub fn fit_candidate_basis(prior: &EnsemblePrior, window: &SampleSet) -> Result<EnsembleBasis> {
    if window.is_empty() {
        return Err(Error::contract("candidate basis needs a non-empty window"));
    }
    let mut basis = adapt_basis(prior, window)?;
    basis.origin = BasisOrigin::Candidate;
    Ok(basis)
}

/// Buffer bookkeeping for one verdict. Returns a new basis when the buffer
/// holds more than `buffer_threshold` samples; the buffer is then cleared.
pub fn buffer_step(buffer: &mut OddsBuffer, verdict: &OddsVerdict, entry: BufferEntry, prior: &EnsemblePrior, cfg: &OddsConfig) -> Result<Option<EnsembleBasis>> {
    if verdict.is_ood {
        buffer.push(entry);
    }
    buffer.evict_stale(entry.step);
    if buffer.len() <= cfg.buffer_threshold {
        return Ok(None);
    }
    let mut basis = adapt_basis(prior, &buffer.samples())?;
    basis.origin = BasisOrigin::Odds;
    basis.created_at = entry.step;
    buffer.clear();
    Ok(Some(basis))
}

/// One row of the ODDS event log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OddsEvent {
    pub step: u64,
    pub score_min: f64,
    pub p_in: f64,
    pub ll_in: f64,
    pub ll_out: f64,
    pub s_odds: f64,
    pub is_ood: bool,
    pub instantiated: bool,
}

#[derive(Debug, Clone)]
pub struct OddsOutcome {
    /// `None` while there is no observation history to fit a candidate on.
    pub verdict: Option<OddsVerdict>,
    pub new_basis: Option<EnsembleBasis>,
}

impl OddsOutcome {
    pub fn event(&self, step: u64) -> Option<OddsEvent> {
        self.verdict.as_ref().map(|v| OddsEvent {
            step,
            score_min: v.min_score(),
            p_in: v.p_in,
            ll_in: v.ll_in,
            ll_out: v.ll_out,
            s_odds: v.score,
            is_ood: v.is_ood,
            instantiated: self.new_basis.is_some(),
        })
    }
}

/// Streaming detector: candidate cache, recent-observation window and buffer.
///
/// The candidate scoring step `t` is fitted only on observations before `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OddsDetector {
    pub config: OddsConfig,
    pub buffer: OddsBuffer,
    recent: VecDeque<BufferEntry>,
    candidate: Option<EnsembleBasis>,
    last_refit: Option<u64>,
}

impl OddsDetector {
    pub fn new(config: OddsConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            buffer: OddsBuffer::from_config(&config),
            recent: VecDeque::with_capacity(config.recent_window),
            candidate: None,
            last_refit: None,
            config,
        })
    }

    /// Forgets the recent window and the candidate, e.g. between offline
    /// trajectories. The buffer is kept; stale entries age out on their own.
    pub fn reset_recent(&mut self) {
        self.recent.clear();
        self.candidate = None;
        self.last_refit = None;
    }

    fn window(&self) -> SampleSet {
        let mut all: Vec<BufferEntry> = self.buffer.entries().copied().collect();
        for e in &self.recent {
            if !all.iter().any(|b| b.step == e.step) {
                all.push(*e);
            }
        }
        all.sort_by_key(|e| e.step);
        let skip = all.len().saturating_sub(self.config.max_window);
        SampleSet::from_pairs(all[skip..].iter().map(|e| (e.x, e.y)))
    }

    fn refresh_candidate(&mut self, prior: &EnsemblePrior, step: u64) -> Result<()> {
        let due = match self.last_refit {
            None => true,
            Some(at) => step.saturating_sub(at) >= self.config.refit_interval,
        };
        if due && !self.recent.is_empty() {
            self.candidate = Some(fit_candidate_basis(prior, &self.window())?);
            self.last_refit = Some(step);
        }
        Ok(())
    }

    pub fn candidate(&self) -> Option<&EnsembleBasis> {
        self.candidate.as_ref()
    }

    pub(crate) fn candidate_mut(&mut self) -> Option<&mut EnsembleBasis> {
        self.candidate.as_mut()
    }

    /// Scores the observation without touching the buffer.
    pub fn verdict(&mut self, bases: &[EnsembleBasis], prior: &EnsemblePrior, x: f64, y: f64, step: u64) -> Result<Option<OddsVerdict>> {
        self.refresh_candidate(prior, step)?;
        let verdict = match &self.candidate {
            Some(c) => Some(odds_score(bases, c, x, y, &self.config)?),
            None => None,
        };
        self.remember(x, y, step);
        Ok(verdict)
    }

    fn remember(&mut self, x: f64, y: f64, step: u64) {
        if self.recent.len() == self.config.recent_window {
            self.recent.pop_front();
        }
        self.recent.push_back(BufferEntry { x, y, step });
    }

    /// Scores the observation, updates the buffer and possibly returns a new
    /// basis. The caller adds it to the model and grows the mixing head.
    pub fn step(&mut self, bases: &[EnsembleBasis], prior: &EnsemblePrior, x: f64, y: f64, step: u64) -> Result<OddsOutcome> {
        let verdict = self.verdict(bases, prior, x, y, step)?;
        let new_basis = match &verdict {
            Some(v) => buffer_step(&mut self.buffer, v, BufferEntry { x, y, step }, prior, &self.config)?,
            None => {
                self.buffer.evict_stale(step);
                None
            }
        };
        if new_basis.is_some() {
            // the cached candidate was fitted on data the new basis now covers
            self.candidate = None;
            self.last_refit = None;
        }
        Ok(OddsOutcome { verdict, new_basis })
    }
}
