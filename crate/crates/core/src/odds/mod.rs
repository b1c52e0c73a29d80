//! Out-of-distribution detection score and the buffer that instantiates new
//! bases.

mod detector;
mod score;

pub use detector::{buffer_step, fit_candidate_basis, BufferEntry, OddsBuffer, OddsDetector, OddsEvent, OddsOutcome};
pub use score::{odds_ratio, odds_score, prior_in_distribution, uncertainty_score, OddsConfig, OddsVerdict, DENSITY_FLOOR, P_IN_FLOOR};
