//! End-to-end workflow: labeled training sets from generated instances,
//! inference on unseen series, and decision-threshold selection by
//! leave-one-process-out cross-validation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{reshape_lagged, CandidateLink, TemporalGraph, TimeSeriesMatrix};
use crate::descriptors::{DescriptorConfig, DescriptorVector, Extractor, FEATURE_NAMES};
use crate::error::Error;
use crate::forest::{self, ForestConfig, ForestModel};
use crate::synth::GeneratedInstance;
use crate::Result;

#[derive(Debug, Clone)]
pub struct LabeledExample {
    pub vector: DescriptorVector,
    pub label: u8,
    pub process_id: u8,
    pub series_index: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredEdge {
    pub cause: usize,
    pub lag: usize,
    pub effect: usize,
    pub probability: f64,
}

#[derive(Debug, Clone)]
pub struct TrainingSet {
    pub examples: Vec<LabeledExample>,
    /// Instances dropped because featurization refused them (degenerate
    /// inputs), by (process_id, series index).
    pub skipped: Vec<(u8, usize)>,
}

/// Featurizes and labels every candidate link of every instance. A link is
/// positive iff its (cause, lag, effect) triple is a ground-truth edge;
/// truth edges beyond the maximum lag fall outside the candidate universe
/// and contribute nothing.
pub fn build_training_set(
    instances: &[GeneratedInstance],
    max_lag: usize,
    cfg: &DescriptorConfig,
) -> Result<TrainingSet> {
    if instances.is_empty() {
        return Err(Error::InvalidTrainingSet("no instances".into()));
    }
    let per_instance: Vec<(usize, Result<Vec<LabeledExample>>)> = instances
        .par_iter()
        .enumerate()
        .map(|(idx, inst)| {
            let run = || -> Result<Vec<LabeledExample>> {
                inst.series.check_nondegenerate()?;
                let ds = reshape_lagged(&inst.series, max_lag)?;
                let ex = Extractor::new(ds, cfg.clone())?;
                let vectors = ex.compute_all()?;
                Ok(vectors
                    .into_iter()
                    .map(|vector| {
                        let l = vector.link;
                        LabeledExample {
                            label: inst.truth.contains(l.cause, l.lag, l.effect) as u8,
                            vector,
                            process_id: inst.config.process_id,
                            series_index: idx,
                        }
                    })
                    .collect())
            };
            (idx, run())
        })
        .collect();

    let mut examples = Vec::new();
    let mut skipped = Vec::new();
    for (idx, res) in per_instance {
        match res {
            Ok(mut ex) => examples.append(&mut ex),
            Err(Error::DegenerateInput(_)) | Err(Error::InsufficientSamples { .. }) => {
                skipped.push((instances[idx].config.process_id, idx));
            }
            Err(e) => return Err(e),
        }
    }
    if examples.is_empty() {
        return Err(Error::InvalidTrainingSet(
            "every instance was skipped as degenerate".into(),
        ));
    }
    Ok(TrainingSet { examples, skipped })
}

/// Trains the balanced forest on a labeled set.
pub fn train_classifier(
    set: &TrainingSet,
    forest_cfg: &ForestConfig,
    descriptor_cfg: &DescriptorConfig,
) -> Result<ForestModel> {
    let rows: Vec<Vec<f64>> = set.examples.iter().map(|e| e.vector.values.clone()).collect();
    let labels: Vec<u8> = set.examples.iter().map(|e| e.label).collect();
    let names: Vec<String> = FEATURE_NAMES.iter().map(|s| s.to_string()).collect();
    let metadata = serde_json::json!({
        "descriptor_config": descriptor_cfg,
        "n_examples": rows.len(),
        "n_positive": labels.iter().filter(|&&l| l == 1).count(),
    });
    forest::train(&rows, &labels, &names, forest_cfg, metadata)
}

/// Scores every candidate link of a series and thresholds the scores into a
/// graph (strict inequality: probability > tau, so tau = 1 is empty).
pub fn infer(
    model: &ForestModel,
    ts: &TimeSeriesMatrix,
    max_lag: usize,
    tau: f64,
    skip_self_links: bool,
    cfg: &DescriptorConfig,
) -> Result<(Vec<ScoredEdge>, TemporalGraph)> {
    if model.feature_names.len() != FEATURE_NAMES.len()
        || model
            .feature_names
            .iter()
            .zip(FEATURE_NAMES.iter())
            .any(|(a, b)| a != b)
    {
        return Err(Error::Incompatibility(
            "model feature names disagree with this feature catalog".into(),
        ));
    }
    ts.check_nondegenerate()?;
    let ds = reshape_lagged(ts, max_lag)?;
    let ex = Extractor::new(ds, cfg.clone())?;
    let vectors = ex.compute_all()?;
    let mut scored = Vec::with_capacity(vectors.len());
    let mut graph = TemporalGraph::new(ts.n_vars());
    for v in vectors {
        let l = v.link;
        if skip_self_links && l.cause == l.effect {
            continue;
        }
        let p = model.predict_proba(&v.values)?;
        if p > tau {
            graph.add_edge(l.cause, l.lag, l.effect)?;
        }
        scored.push(ScoredEdge {
            cause: l.cause,
            lag: l.lag,
            effect: l.effect,
            probability: p,
        });
    }
    Ok((scored, graph))
}

pub fn labels_for(truth: &TemporalGraph, universe: &[CandidateLink]) -> Vec<u8> {
    universe
        .iter()
        .map(|l| truth.contains(l.cause, l.lag, l.effect) as u8)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThresholdCriterion {
    /// Maximize F1 on the held-out scores.
    MaxF1,
    /// Minimize |precision - recall|.
    PrBreakEven,
    /// Maximize TPR - FPR.
    YoudenJ,
    /// Minimize the ROC distance to the (FPR=0, TPR=1) corner.
    RocDistance,
}

impl ThresholdCriterion {
    pub const ALL: [ThresholdCriterion; 4] = [
        Self::MaxF1,
        Self::PrBreakEven,
        Self::YoudenJ,
        Self::RocDistance,
    ];

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "max-f1" | "f1" => Ok(Self::MaxF1),
            "pr-break-even" | "break-even" => Ok(Self::PrBreakEven),
            "youden" | "youden-j" => Ok(Self::YoudenJ),
            "roc-distance" | "d-roc" => Ok(Self::RocDistance),
            other => Err(Error::InvalidConfig(format!(
                "unknown threshold criterion '{other}'"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::MaxF1 => "max-f1",
            Self::PrBreakEven => "pr-break-even",
            Self::YoudenJ => "youden-j",
            Self::RocDistance => "roc-distance",
        }
    }

    /// Larger is better.
    fn objective(&self, scores: &[f64], labels: &[u8], tau: f64) -> f64 {
        let mut tp = 0u64;
        let mut fp = 0u64;
        let mut fn_ = 0u64;
        let mut tn = 0u64;
        for (&s, &l) in scores.iter().zip(labels) {
            match (s > tau, l == 1) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fn_ += 1,
                (false, false) => tn += 1,
            }
        }
        let ratio = |n: u64, d: u64| if d == 0 { 0.0 } else { n as f64 / d as f64 };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let fpr = ratio(fp, fp + tn);
        match self {
            Self::MaxF1 => {
                if precision + recall == 0.0 {
                    0.0
                } else {
                    2.0 * precision * recall / (precision + recall)
                }
            }
            Self::PrBreakEven => -(precision - recall).abs(),
            Self::YoudenJ => recall - fpr,
            Self::RocDistance => -(fpr * fpr + (1.0 - recall) * (1.0 - recall)).sqrt(),
        }
    }
}

/// The decision rule is piecewise constant between consecutive scores, so
/// sweeping the midpoints between distinct sorted scores (plus 0 and 1) is
/// exhaustive.
pub fn threshold_candidates(scores: &[f64]) -> Vec<f64> {
    let mut sorted: Vec<f64> = scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    let mut out = vec![0.0];
    for w in sorted.windows(2) {
        out.push(0.5 * (w[0] + w[1]));
    }
    out.push(1.0);
    out.sort_by(f64::total_cmp);
    out.dedup();
    out
}

/// Exhaustive sweep of a criterion. Ties resolve to the midpoint of the
/// longest contiguous run of optimal candidates (the earliest such run if
/// several have equal length).
pub fn sweep_threshold(scores: &[f64], labels: &[u8], criterion: ThresholdCriterion) -> Result<f64> {
    if scores.is_empty() || scores.len() != labels.len() {
        return Err(Error::Inconsistent(format!(
            "{} scores, {} labels",
            scores.len(),
            labels.len()
        )));
    }
    let candidates = threshold_candidates(scores);
    let values: Vec<f64> = candidates
        .iter()
        .map(|&t| criterion.objective(scores, labels, t))
        .collect();
    let best = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut best_run: Option<(usize, usize)> = None;
    let mut k = 0;
    while k < candidates.len() {
        if values[k] == best {
            let start = k;
            while k + 1 < candidates.len() && values[k + 1] == best {
                k += 1;
            }
            let run = (start, k);
            let longer = match best_run {
                None => true,
                Some((s, e)) => (run.1 - run.0) > (e - s),
            };
            if longer {
                best_run = Some(run);
            }
        }
        k += 1;
    }
    let (s, e) = best_run.expect("nonempty candidate sweep");
    Ok(0.5 * (candidates[s] + candidates[e]))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FoldThreshold {
    pub held_out_process: u8,
    pub threshold: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ThresholdReport {
    pub criterion: String,
    pub per_fold: Vec<FoldThreshold>,
    pub mean: f64,
    pub std: f64,
    /// Held-out processes skipped because their examples were single-class.
    pub skipped_folds: Vec<u8>,
}

/// Leave-one-process-out threshold selection: each fold refits the
/// classifier on the remaining processes and sweeps the criterion on the
/// held-out process's scores.
pub fn select_threshold(
    examples: &[LabeledExample],
    forest_cfg: &ForestConfig,
    criterion: ThresholdCriterion,
) -> Result<ThresholdReport> {
    let mut processes: Vec<u8> = examples.iter().map(|e| e.process_id).collect();
    processes.sort_unstable();
    processes.dedup();
    if processes.len() < 2 {
        return Err(Error::InvalidTrainingSet(
            "threshold selection needs at least 2 process groups".into(),
        ));
    }
    let names: Vec<String> = FEATURE_NAMES.iter().map(|s| s.to_string()).collect();
    let mut per_fold = Vec::new();
    let mut skipped = Vec::new();
    for &held in &processes {
        let (hold, rest): (Vec<&LabeledExample>, Vec<&LabeledExample>) =
            examples.iter().partition(|e| e.process_id == held);
        let hold_labels: Vec<u8> = hold.iter().map(|e| e.label).collect();
        if hold_labels.iter().all(|&l| l == 0) || hold_labels.iter().all(|&l| l == 1) {
            skipped.push(held);
            continue;
        }
        let rows: Vec<Vec<f64>> = rest.iter().map(|e| e.vector.values.clone()).collect();
        let labels: Vec<u8> = rest.iter().map(|e| e.label).collect();
        let model = forest::train(&rows, &labels, &names, forest_cfg, serde_json::json!({}))?;
        let scores: Vec<f64> = hold
            .iter()
            .map(|e| model.predict_proba(&e.vector.values))
            .collect::<Result<_>>()?;
        per_fold.push(FoldThreshold {
            held_out_process: held,
            threshold: sweep_threshold(&scores, &hold_labels, criterion)?,
        });
    }
    if per_fold.is_empty() {
        return Err(Error::InvalidTrainingSet(
            "every fold was single-class".into(),
        ));
    }
    let ts: Vec<f64> = per_fold.iter().map(|f| f.threshold).collect();
    let mean = ts.iter().sum::<f64>() / ts.len() as f64;
    let var = ts.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / ts.len() as f64;
    Ok(ThresholdReport {
        criterion: criterion.name().to_string(),
        per_fold,
        mean,
        std: var.sqrt(),
        skipped_folds: skipped,
    })
}
