//! Confusion counts over a candidate universe and the derived
//! classification metrics.

use serde::{Deserialize, Serialize};

use crate::data::{CandidateLink, TemporalGraph};
use crate::error::Error;
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn add(&mut self, other: &ConfusionCounts) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.tn += other.tn;
        self.fn_ += other.fn_;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
    pub balanced_accuracy: f64,
}

/// Counts a predicted graph against the truth over an explicit candidate
/// universe. An edge matches only on the full (cause, lag, effect) triple.
pub fn confusion(
    predicted: &TemporalGraph,
    truth: &TemporalGraph,
    universe: &[CandidateLink],
) -> Result<ConfusionCounts> {
    let in_universe = |g: &TemporalGraph, name: &str| -> Result<()> {
        for &(c, l, e) in g.edges() {
            if !universe
                .iter()
                .any(|u| u.cause == c && u.lag == l && u.effect == e)
            {
                return Err(Error::Inconsistent(format!(
                    "{name} edge ({c},{l},{e}) outside the candidate universe"
                )));
            }
        }
        Ok(())
    };
    in_universe(predicted, "predicted")?;
    in_universe(truth, "truth")?;
    let mut c = ConfusionCounts {
        tp: 0,
        fp: 0,
        tn: 0,
        fn_: 0,
    };
    for u in universe {
        let p = predicted.contains(u.cause, u.lag, u.effect);
        let t = truth.contains(u.cause, u.lag, u.effect);
        match (p, t) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
            (false, false) => c.tn += 1,
        }
    }
    Ok(c)
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Closed-form metrics with 0 fallbacks on empty denominators.
pub fn metrics(c: &ConfusionCounts) -> MetricSet {
    let precision = ratio(c.tp, c.tp + c.fp);
    let recall = ratio(c.tp, c.tp + c.fn_);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    let accuracy = ratio(c.tp + c.tn, c.total());
    let tnr = ratio(c.tn, c.tn + c.fp);
    MetricSet {
        precision,
        recall,
        f1,
        accuracy,
        balanced_accuracy: 0.5 * (recall + tnr),
    }
}
