//! Multi-method comparison statistics: Friedman test over run-wise ranks,
//! pairwise Wilcoxon signed-rank tests with Holm adjustment, and the
//! average-rank summary used for critical-difference grouping.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use crate::error::Error;
use crate::Result;

/// scores[method][run]; higher is better.
pub fn validate_scores(scores: &[Vec<f64>]) -> Result<(usize, usize)> {
    let m = scores.len();
    if m < 2 {
        return Err(Error::InvalidConfig("need at least 2 methods".into()));
    }
    let n = scores[0].len();
    if n < 2 {
        return Err(Error::InvalidConfig("need at least 2 runs".into()));
    }
    if scores.iter().any(|s| s.len() != n) {
        return Err(Error::ShapeMismatch("ragged score grid".into()));
    }
    Ok((m, n))
}

/// Average-tie ranks with 1 assigned to the largest value.
pub fn ranks_desc(values: &[f64]) -> Vec<f64> {
    let m = values.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    let mut ranks = vec![0.0; m];
    let mut k = 0;
    while k < m {
        let mut j = k;
        while j + 1 < m && values[order[j + 1]] == values[order[k]] {
            j += 1;
        }
        // positions k..=j share the average rank
        let avg = (k + j) as f64 / 2.0 + 1.0;
        for &idx in &order[k..=j] {
            ranks[idx] = avg;
        }
        k = j + 1;
    }
    ranks
}

/// Friedman chi-square statistic with tie correction and its p-value. A
/// fully tied table yields statistic 0 and p = 1.
pub fn friedman(scores: &[Vec<f64>]) -> Result<(f64, f64)> {
    let (m, n) = validate_scores(scores)?;
    let mut rank_sums = vec![0.0; m];
    let mut tie_term = 0.0;
    for run in 0..n {
        let col: Vec<f64> = (0..m).map(|j| scores[j][run]).collect();
        let ranks = ranks_desc(&col);
        for (j, r) in ranks.iter().enumerate() {
            rank_sums[j] += r;
        }
        // tie groups within the run
        let mut sorted = col.clone();
        sorted.sort_by(f64::total_cmp);
        let mut k = 0;
        while k < m {
            let mut j = k;
            while j + 1 < m && sorted[j + 1] == sorted[k] {
                j += 1;
            }
            let t = (j - k + 1) as f64;
            tie_term += t * t * t - t;
            k = j + 1;
        }
    }
    let nm = n as f64;
    let mf = m as f64;
    let sum_sq: f64 = rank_sums.iter().map(|r| r * r).sum();
    let raw = 12.0 / (nm * mf * (mf + 1.0)) * sum_sq - 3.0 * nm * (mf + 1.0);
    let correction = 1.0 - tie_term / (nm * mf * (mf * mf - 1.0));
    let stat = if correction <= 0.0 {
        0.0
    } else {
        (raw / correction).max(0.0)
    };
    let dist = ChiSquared::new(mf - 1.0)
        .map_err(|e| Error::InvalidConfig(format!("chi-squared df: {e}")))?;
    let p = if stat == 0.0 { 1.0 } else { 1.0 - dist.cdf(stat) };
    Ok((stat, p))
}

/// Two-sided Wilcoxon signed-rank p-value (normal approximation with tie
/// correction; zero differences dropped). All-zero differences give p = 1.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::ShapeMismatch(format!(
            "paired samples of lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    let diffs: Vec<f64> = a
        .iter()
        .zip(b)
        .map(|(x, y)| x - y)
        .filter(|d| *d != 0.0)
        .collect();
    let n = diffs.len();
    if n == 0 {
        return Ok(1.0);
    }
    let abs: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    // rank |d| ascending with average ties
    let neg_abs: Vec<f64> = abs.iter().map(|v| -v).collect();
    let ranks = ranks_desc(&neg_abs);
    let w_plus: f64 = diffs
        .iter()
        .zip(&ranks)
        .filter(|(d, _)| **d > 0.0)
        .map(|(_, r)| r)
        .sum();
    let nf = n as f64;
    let mu = nf * (nf + 1.0) / 4.0;
    // tie correction on the variance
    let mut sorted = abs;
    sorted.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    let mut k = 0;
    while k < n {
        let mut j = k;
        while j + 1 < n && sorted[j + 1] == sorted[k] {
            j += 1;
        }
        let t = (j - k + 1) as f64;
        tie_term += t * t * t - t;
        k = j + 1;
    }
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term / 48.0;
    if var <= 0.0 {
        return Ok(1.0);
    }
    let z = (w_plus - mu) / var.sqrt();
    let normal = Normal::new(0.0, 1.0).unwrap();
    Ok((2.0 * (1.0 - normal.cdf(z.abs()))).min(1.0))
}

/// Holm step-down adjustment. Returns the adjusted values in the input
/// order; the adjusted sequence is monotone over the sorted raw order.
pub fn holm_adjust(p_values: &[f64]) -> Vec<f64> {
    let m = p_values.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p_values[a].total_cmp(&p_values[b]));
    let mut adjusted = vec![0.0; m];
    let mut running = 0.0f64;
    for (rank, &idx) in order.iter().enumerate() {
        let scaled = ((m - rank) as f64 * p_values[idx]).min(1.0);
        running = running.max(scaled);
        adjusted[idx] = running;
    }
    adjusted
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairwiseComparison {
    pub methods: Vec<String>,
    /// Holm-adjusted signed-rank p-values, symmetric, 1 on the diagonal.
    pub adjusted_p: Vec<Vec<f64>>,
}

/// All-pairs Wilcoxon signed-rank tests with Holm adjustment over the
/// pair family.
pub fn wilcoxon_holm(scores: &[Vec<f64>], method_names: &[String]) -> Result<PairwiseComparison> {
    let (m, _) = validate_scores(scores)?;
    if method_names.len() != m {
        return Err(Error::ShapeMismatch(format!(
            "{} names for {} methods",
            method_names.len(),
            m
        )));
    }
    let mut pairs = Vec::new();
    let mut raw = Vec::new();
    for i in 0..m {
        for j in i + 1..m {
            pairs.push((i, j));
            raw.push(wilcoxon_signed_rank(&scores[i], &scores[j])?);
        }
    }
    let adj = holm_adjust(&raw);
    let mut matrix = vec![vec![1.0; m]; m];
    for (&(i, j), &p) in pairs.iter().zip(&adj) {
        matrix[i][j] = p;
        matrix[j][i] = p;
    }
    Ok(PairwiseComparison {
        methods: method_names.to_vec(),
        adjusted_p: matrix,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RankSummary {
    pub methods: Vec<String>,
    /// Mean rank per method, 1 = best.
    pub mean_ranks: Vec<f64>,
    pub friedman_statistic: f64,
    pub friedman_p: f64,
    /// adjacency[i][j] = true when methods i and j are NOT separated at the
    /// given alpha (the grouping bars of a critical-difference diagram).
    pub grouped: Vec<Vec<bool>>,
    pub adjusted_p: Vec<Vec<f64>>,
    pub alpha: f64,
}

/// Mean ranks plus the pairwise-grouping data needed to draw a
/// critical-difference diagram.
pub fn average_ranks(
    scores: &[Vec<f64>],
    method_names: &[String],
    alpha: f64,
) -> Result<RankSummary> {
    let (m, n) = validate_scores(scores)?;
    let mut mean_ranks = vec![0.0; m];
    for run in 0..n {
        let col: Vec<f64> = (0..m).map(|j| scores[j][run]).collect();
        for (j, r) in ranks_desc(&col).iter().enumerate() {
            mean_ranks[j] += r / n as f64;
        }
    }
    let (stat, p) = friedman(scores)?;
    let pairwise = wilcoxon_holm(scores, method_names)?;
    let grouped = (0..m)
        .map(|i| {
            (0..m)
                .map(|j| i == j || pairwise.adjusted_p[i][j] >= alpha)
                .collect()
        })
        .collect();
    Ok(RankSummary {
        methods: method_names.to_vec(),
        mean_ranks,
        friedman_statistic: stat,
        friedman_p: p,
        grouped,
        adjusted_p: pairwise.adjusted_p,
        alpha,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn names(m: usize) -> Vec<String> {
        (0..m).map(|i| format!("m{i}")).collect()
    }

    #[test]
    fn friedman_degenerate_cases() {
        // identical scores everywhere
        let scores = vec![vec![0.5; 10], vec![0.5; 10], vec![0.5; 10]];
        let (stat, p) = friedman(&scores).unwrap();
        assert_eq!(stat, 0.0);
        assert_eq!(p, 1.0);

        // two methods, two runs, opposite orders
        let scores = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let (stat, _) = friedman(&scores).unwrap();
        assert_abs_diff_eq!(stat, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn friedman_detects_a_dominant_method() {
        let n = 30;
        let mut scores = vec![vec![0.0; n]; 3];
        for run in 0..n {
            scores[0][run] = 0.9 + 0.001 * run as f64;
            scores[1][run] = 0.5 + 0.001 * run as f64;
            scores[2][run] = 0.4;
        }
        let (stat, p) = friedman(&scores).unwrap();
        assert!(stat > 9.21, "stat={stat}");
        assert!(p < 0.01, "p={p}");
    }

    #[test]
    fn friedman_rejects_degenerate_shapes() {
        assert!(friedman(&[vec![1.0, 2.0]]).is_err());
        assert!(friedman(&[vec![1.0], vec![2.0]]).is_err());
        assert!(friedman(&[vec![1.0, 2.0], vec![1.0]]).is_err());
    }

    #[test]
    fn wilcoxon_basics() {
        let a = vec![1.0, 2.0, 3.0, 4.0];
        assert_eq!(wilcoxon_signed_rank(&a, &a).unwrap(), 1.0);

        // consistent dominance over 50 paired runs
        let x: Vec<f64> = (0..50).map(|i| 0.8 + 0.001 * i as f64).collect();
        let y: Vec<f64> = (0..50).map(|i| 0.5 + 0.001 * i as f64).collect();
        let p = wilcoxon_signed_rank(&x, &y).unwrap();
        assert!(p < 0.01, "p={p}");
    }

    #[test]
    fn holm_matches_hand_computation() {
        let adj = holm_adjust(&[0.01, 0.04]);
        assert_abs_diff_eq!(adj[0], 0.02, epsilon = 1e-12);
        assert_abs_diff_eq!(adj[1], 0.04, epsilon = 1e-12);

        // three-element family
        let adj = holm_adjust(&[0.03, 0.01, 0.04]);
        assert_abs_diff_eq!(adj[1], 0.03, epsilon = 1e-12); // 0.01 * 3
        assert_abs_diff_eq!(adj[0], 0.06, epsilon = 1e-12); // max(0.03, 0.03*2)
        assert_abs_diff_eq!(adj[2], 0.06, epsilon = 1e-12); // monotone floor

        // clamped at 1
        let adj = holm_adjust(&[0.6, 0.9]);
        assert!(adj.iter().all(|&p| p <= 1.0));
    }

    #[test]
    fn average_ranks_dominant_method() {
        let n = 12;
        let scores = vec![
            (0..n).map(|i| 0.9 + 0.001 * i as f64).collect::<Vec<_>>(),
            (0..n).map(|i| 0.5 + 0.002 * i as f64).collect(),
            (0..n).map(|i| 0.3 + 0.001 * i as f64).collect(),
        ];
        let summary = average_ranks(&scores, &names(3), 0.05).unwrap();
        assert_abs_diff_eq!(summary.mean_ranks[0], 1.0);
        assert!(summary.grouped[0][0]);
        // serializes cleanly
        let js = serde_json::to_string(&summary).unwrap();
        assert!(js.contains("mean_ranks"));
    }

    proptest! {
        #[test]
        fn rank_conservation(values in proptest::collection::vec(-10.0f64..10.0, 2..8)) {
            let ranks = ranks_desc(&values);
            let m = values.len() as f64;
            let sum: f64 = ranks.iter().sum();
            prop_assert!((sum - m * (m + 1.0) / 2.0).abs() < 1e-9);
        }

        #[test]
        fn holm_is_monotone(ps in proptest::collection::vec(0.0f64..1.0, 1..10)) {
            let adj = holm_adjust(&ps);
            let mut order: Vec<usize> = (0..ps.len()).collect();
            order.sort_by(|&a, &b| ps[a].total_cmp(&ps[b]));
            for w in order.windows(2) {
                prop_assert!(adj[w[0]] <= adj[w[1]] + 1e-15);
            }
            for (&a, &p) in adj.iter().zip(&ps) {
                prop_assert!(a >= p - 1e-15 && a <= 1.0);
            }
        }
    }
}
