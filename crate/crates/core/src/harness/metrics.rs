//! Error indicators and accumulated metric records.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::rst::SlotState;

/// Which error event to count in one trial.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Indicator {
    /// Reference-bit errors, one opportunity per slot.
    Ber,
    /// Set error of a frame whose identities are constant (any slot wrong).
    Sep,
    /// Set error at a 1-based slot.
    SepAt(usize),
    /// Some slot wrong: identities, and in blind scenarios also data.
    Ssep { blind: bool },
    /// Identity-or-data error at a 1-based slot.
    BsepAt(usize),
}

impl Indicator {
    pub fn label(&self) -> String {
        match self {
            Indicator::Ber => "BER".into(),
            Indicator::Sep => "SEP".into(),
            Indicator::SepAt(t) => format!("SEP@{t}"),
            Indicator::Ssep { .. } => "SSEP".into(),
            Indicator::BsepAt(t) => format!("BSEP@{t}"),
        }
    }
}

fn set_error(a: &SlotState, b: &SlotState) -> bool {
    a.active != b.active
}

fn data_error(a: &SlotState, b: &SlotState) -> bool {
    a.active != b.active || a.data != b.data
}

/// Errors and opportunities of one trial.
pub fn compute_metrics(truth: &[SlotState], estimate: &[SlotState], kind: Indicator) -> Result<(u64, u64)> {
    if truth.len() != estimate.len() {
        return Err(Error::LengthMismatch(format!(
            "{} true slots, {} estimated",
            truth.len(),
            estimate.len()
        )));
    }
    let pairs = truth.iter().zip(estimate);
    let at = |t: usize| -> Result<(&SlotState, &SlotState)> {
        if t == 0 || t > truth.len() {
            return Err(Error::InvalidParameter(format!("slot {t} outside the frame")));
        }
        Ok((&truth[t - 1], &estimate[t - 1]))
    };
    Ok(match kind {
        Indicator::Ber => {
            let errors = pairs.filter(|(a, b)| a.ref_bit != b.ref_bit).count();
            (errors as u64, truth.len() as u64)
        }
        Indicator::Sep => (u64::from(pairs.clone().any(|(a, b)| set_error(a, b))), 1),
        Indicator::SepAt(t) => {
            let (a, b) = at(t)?;
            (u64::from(set_error(a, b)), 1)
        }
        Indicator::Ssep { blind } => {
            let wrong = if blind {
                pairs.clone().any(|(a, b)| data_error(a, b))
            } else {
                pairs.clone().any(|(a, b)| set_error(a, b))
            };
            (u64::from(wrong), 1)
        }
        Indicator::BsepAt(t) => {
            let (a, b) = at(t)?;
            (u64::from(data_error(a, b)), 1)
        }
    })
}

/// Error-rate estimate at one sweep point.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricRecord {
    pub metric: String,
    pub point_db: f64,
    pub estimate: f64,
    pub stderr: f64,
    /// Opportunities counted (zero for analytic values).
    pub trials: u64,
    pub errors: u64,
}

impl MetricRecord {
    /// Binomial frequency `errors/trials` with `√(p̂(1−p̂)/trials)`.
    pub fn from_counts(metric: String, point_db: f64, errors: u64, trials: u64) -> Self {
        let p = if trials == 0 { 0.0 } else { errors as f64 / trials as f64 };
        let stderr = if trials == 0 { 0.0 } else { (p * (1.0 - p) / trials as f64).sqrt() };
        MetricRecord {
            metric,
            point_db,
            estimate: p,
            stderr,
            trials,
            errors,
        }
    }

    /// Analytic or semi-analytic value with its own standard error.
    pub fn value(metric: String, point_db: f64, estimate: f64, stderr: f64, trials: u64) -> Self {
        MetricRecord {
            metric,
            point_db,
            estimate,
            stderr,
            trials,
            errors: 0,
        }
    }

    /// Normal-approximation 95% interval.
    pub fn ci95(&self) -> (f64, f64) {
        (self.estimate - 1.96 * self.stderr, self.estimate + 1.96 * self.stderr)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rst::ActiveSet;

    fn st(mask: u32, data: u32) -> SlotState {
        SlotState::new(ActiveSet::from_mask(mask), data, Some(false))
    }

    #[test]
    fn identical_sequences_have_no_errors() {
        let s = vec![st(1, 0), st(3, 2), st(0, 0)];
        for k in [
            Indicator::Ber,
            Indicator::Sep,
            Indicator::SepAt(2),
            Indicator::Ssep { blind: true },
            Indicator::BsepAt(3),
        ] {
            assert_eq!(compute_metrics(&s, &s, k).unwrap().0, 0);
        }
    }

    #[test]
    fn extra_user_at_one_slot() {
        let truth = vec![st(1, 0); 4];
        let mut est = truth.clone();
        est[2] = st(3, 0);
        assert_eq!(compute_metrics(&truth, &est, Indicator::SepAt(3)).unwrap(), (1, 1));
        assert_eq!(compute_metrics(&truth, &est, Indicator::Ssep { blind: false }).unwrap(), (1, 1));
        for t in [1, 2, 4] {
            assert_eq!(compute_metrics(&truth, &est, Indicator::SepAt(t)).unwrap(), (0, 1));
        }
        assert_eq!(compute_metrics(&truth, &est, Indicator::Sep).unwrap(), (1, 1));
    }

    #[test]
    fn flipped_data_bit() {
        let truth = vec![st(1, 0), st(1, 1)];
        let est = vec![st(1, 1), st(1, 1)];
        assert_eq!(compute_metrics(&truth, &est, Indicator::SepAt(1)).unwrap().0, 0);
        assert_eq!(compute_metrics(&truth, &est, Indicator::BsepAt(1)).unwrap().0, 1);
        assert_eq!(compute_metrics(&truth, &est, Indicator::Ssep { blind: false }).unwrap().0, 0);
        assert_eq!(compute_metrics(&truth, &est, Indicator::Ssep { blind: true }).unwrap().0, 1);
    }

    #[test]
    fn reference_bit_errors_and_lengths() {
        let truth = vec![st(0, 0), st(0, 0)];
        let est = vec![SlotState::new(ActiveSet::EMPTY, 0, Some(true)), st(0, 0)];
        assert_eq!(compute_metrics(&truth, &est, Indicator::Ber).unwrap(), (1, 2));
        assert!(compute_metrics(&truth, &est[..1], Indicator::Ber).is_err());
    }

    #[test]
    fn record_statistics() {
        let r = MetricRecord::from_counts("x".into(), 0.0, 25, 100);
        assert_eq!(r.estimate, 0.25);
        assert!((r.stderr - (0.25f64 * 0.75 / 100.0).sqrt()).abs() < 1e-15);
    }
}
