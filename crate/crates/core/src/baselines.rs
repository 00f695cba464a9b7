//! Classical lagged-regression baselines: the per-coefficient VAR rule,
//! pairwise Granger F-tests, and the multivariate Granger (joint F) test.

use nalgebra::{DMatrix, DVector};
use statrs::distribution::{ContinuousCDF, FisherSnedecor, StudentsT};

use crate::data::{TemporalGraph, TimeSeriesMatrix};
use crate::error::Error;
use crate::Result;

#[derive(Debug, Clone)]
pub struct BaselineResult {
    pub graph: TemporalGraph,
    /// True when any regression was singular and fell back to a ridge solve.
    pub used_ridge_fallback: bool,
}

/// Lagged design shared by all three baselines: predictor column (v, a)
/// holds z_v^(t-a), a in [1, L]; responses are the lag-0 values.
struct Design {
    x: DMatrix<f64>, // n x (N*L), no intercept column
    y: DMatrix<f64>, // n x N
    n_vars: usize,
    max_lag: usize,
}

impl Design {
    fn build(ts: &TimeSeriesMatrix, max_lag: usize) -> Result<Self> {
        let t = ts.timesteps();
        let nv = ts.n_vars();
        if max_lag < 1 || t <= max_lag {
            return Err(Error::InvalidLag(format!(
                "need 1 <= L < T, got L={max_lag}, T={t}"
            )));
        }
        let n = t - max_lag;
        let p = nv * max_lag;
        if n < p + 3 {
            return Err(Error::InsufficientSamples { have: n, k: p + 3 });
        }
        let mut x = DMatrix::zeros(n, p);
        let mut y = DMatrix::zeros(n, nv);
        for r in 0..n {
            for v in 0..nv {
                y[(r, v)] = ts.values[(r + max_lag, v)];
                for a in 1..=max_lag {
                    x[(r, (a - 1) * nv + v)] = ts.values[(r + max_lag - a, v)];
                }
            }
        }
        Ok(Self {
            x,
            y,
            n_vars: nv,
            max_lag,
        })
    }

    fn col(&self, var: usize, lag: usize) -> usize {
        (lag - 1) * self.n_vars + var
    }
}

struct OlsFit {
    beta: DVector<f64>,
    rss: f64,
    /// diagonal of (X'X)^-1 including the intercept entry (last)
    xtx_inv_diag: Vec<f64>,
    n: usize,
    p: usize,
    used_ridge: bool,
}

/// OLS of y on the selected predictor columns plus an intercept; falls back
/// to a lightly ridged solve when the normal equations are singular.
fn ols(x: &DMatrix<f64>, cols: &[usize], y: DVector<f64>) -> OlsFit {
    let n = x.nrows();
    let p = cols.len();
    let mut design = DMatrix::zeros(n, p + 1);
    for (k, &c) in cols.iter().enumerate() {
        design.set_column(k, &x.column(c));
    }
    for r in 0..n {
        design[(r, p)] = 1.0;
    }
    let xt = design.transpose();
    let xtx = &xt * &design;
    let xty = &xt * &y;
    let (inv, used_ridge) = match xtx.clone().try_inverse() {
        Some(inv) => (inv, false),
        None => {
            let mut ridged = xtx;
            for d in 0..=p {
                ridged[(d, d)] += 1e-8;
            }
            (
                ridged
                    .try_inverse()
                    .expect("ridged normal equations must be invertible"),
                true,
            )
        }
    };
    let beta = &inv * xty;
    let resid = &y - &design * &beta;
    let rss = resid.dot(&resid);
    OlsFit {
        beta,
        rss,
        xtx_inv_diag: (0..=p).map(|d| inv[(d, d)]).collect(),
        n,
        p: p + 1,
        used_ridge,
    }
}

fn two_sided_t_pvalue(t: f64, df: f64) -> f64 {
    if df <= 0.0 {
        return 1.0;
    }
    let dist = StudentsT::new(0.0, 1.0, df).expect("valid t distribution");
    (2.0 * (1.0 - dist.cdf(t.abs()))).min(1.0)
}

fn f_test_pvalue(rss_restricted: f64, rss_full: f64, q: f64, df_denom: f64) -> f64 {
    if df_denom <= 0.0 || rss_full <= 0.0 {
        return 1.0;
    }
    let f = ((rss_restricted - rss_full) / q) / (rss_full / df_denom);
    if !f.is_finite() || f <= 0.0 {
        return 1.0;
    }
    let dist = FisherSnedecor::new(q, df_denom).expect("valid F distribution");
    (1.0 - dist.cdf(f)).min(1.0)
}

/// Per-coefficient rule on the full VAR(L) system: an edge requires the
/// coefficient's two-sided t-test to pass (p < alpha) AND |coefficient| to
/// exceed `coef_min`.
pub fn baseline_var(
    ts: &TimeSeriesMatrix,
    max_lag: usize,
    alpha: f64,
    coef_min: f64,
) -> Result<BaselineResult> {
    let d = Design::build(ts, max_lag)?;
    let all_cols: Vec<usize> = (0..d.n_vars * d.max_lag).collect();
    let mut graph = TemporalGraph::new(d.n_vars);
    let mut used_ridge = false;
    for j in 0..d.n_vars {
        let fit = ols(&d.x, &all_cols, DVector::from_column_slice(d.y.column(j).as_slice()));
        used_ridge |= fit.used_ridge;
        let df = (fit.n - fit.p) as f64;
        let sigma2 = if df > 0.0 { fit.rss / df } else { f64::NAN };
        for v in 0..d.n_vars {
            for a in 1..=d.max_lag {
                let k = d.col(v, a);
                let coef = fit.beta[k];
                let se = (sigma2 * fit.xtx_inv_diag[k]).sqrt();
                let p = if se > 0.0 {
                    two_sided_t_pvalue(coef / se, df)
                } else {
                    1.0
                };
                if p < alpha && coef.abs() > coef_min {
                    graph.add_edge(v, a, j)?;
                }
            }
        }
    }
    Ok(BaselineResult {
        graph,
        used_ridge_fallback: used_ridge,
    })
}

/// Pairwise Granger test: for each ordered pair (i, j), F-test of the
/// restricted regression (own lags of j) against the unrestricted one (own
/// lags plus lags of i). The test is lag-agnostic; rejection asserts edges
/// at every lag in [1, L] unless `lag1_only` restricts attribution to lag 1.
pub fn baseline_pairwise_granger(
    ts: &TimeSeriesMatrix,
    max_lag: usize,
    alpha: f64,
    lag1_only: bool,
) -> Result<BaselineResult> {
    let d = Design::build(ts, max_lag)?;
    let mut graph = TemporalGraph::new(d.n_vars);
    let mut used_ridge = false;
    for j in 0..d.n_vars {
        let y = DVector::from_column_slice(d.y.column(j).as_slice());
        let own: Vec<usize> = (1..=d.max_lag).map(|a| d.col(j, a)).collect();
        let restricted = ols(&d.x, &own, y.clone());
        used_ridge |= restricted.used_ridge;
        for i in 0..d.n_vars {
            if i == j {
                continue;
            }
            let mut cols = own.clone();
            cols.extend((1..=d.max_lag).map(|a| d.col(i, a)));
            let full = ols(&d.x, &cols, y.clone());
            used_ridge |= full.used_ridge;
            let df_denom = (full.n - full.p) as f64;
            let p = f_test_pvalue(restricted.rss, full.rss, d.max_lag as f64, df_denom);
            if p < alpha {
                if lag1_only {
                    graph.add_edge(i, 1, j)?;
                } else {
                    for a in 1..=d.max_lag {
                        graph.add_edge(i, a, j)?;
                    }
                }
            }
        }
    }
    Ok(BaselineResult {
        graph,
        used_ridge_fallback: used_ridge,
    })
}

/// Multivariate Granger: joint F-test of the nullity of z_i's L lag
/// coefficients in the full-system equation for z_j.
pub fn baseline_mvgc(
    ts: &TimeSeriesMatrix,
    max_lag: usize,
    alpha: f64,
) -> Result<BaselineResult> {
    let d = Design::build(ts, max_lag)?;
    let all_cols: Vec<usize> = (0..d.n_vars * d.max_lag).collect();
    let mut graph = TemporalGraph::new(d.n_vars);
    let mut used_ridge = false;
    for j in 0..d.n_vars {
        let y = DVector::from_column_slice(d.y.column(j).as_slice());
        let full = ols(&d.x, &all_cols, y.clone());
        used_ridge |= full.used_ridge;
        let df_denom = (full.n - full.p) as f64;
        for i in 0..d.n_vars {
            if i == j {
                continue;
            }
            let cols: Vec<usize> = all_cols
                .iter()
                .copied()
                .filter(|&c| c % d.n_vars != i)
                .collect();
            let restricted = ols(&d.x, &cols, y.clone());
            used_ridge |= restricted.used_ridge;
            let p = f_test_pvalue(restricted.rss, full.rss, d.max_lag as f64, df_denom);
            if p < alpha {
                for a in 1..=d.max_lag {
                    graph.add_edge(i, a, j)?;
                }
            }
        }
    }
    Ok(BaselineResult {
        graph,
        used_ridge_fallback: used_ridge,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    /// z1[t] = coef * z0[t-1] + noise; z0 and the rest are white noise.
    fn driven_pair(t: usize, coef: f64, nv: usize, seed: u64) -> TimeSeriesMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut values = Array2::zeros((t, nv));
        for r in 0..t {
            for v in 0..nv {
                let e: f64 = StandardNormal.sample(&mut rng);
                values[(r, v)] = if v == 1 && r > 0 {
                    coef * values[(r - 1, 0)] + e
                } else {
                    e
                };
            }
        }
        let names = (0..nv).map(|i| format!("z{i}")).collect();
        TimeSeriesMatrix::new(values, names).unwrap()
    }

    fn white_noise(t: usize, nv: usize, seed: u64) -> TimeSeriesMatrix {
        driven_pair(t, 0.0, nv, seed)
    }

    #[test]
    fn var_finds_a_strong_coefficient_and_gates_small_ones() {
        let mut hits = 0;
        for seed in 0..10 {
            let ts = driven_pair(500, 0.5, 3, 100 + seed);
            let res = baseline_var(&ts, 2, 0.05, 0.1).unwrap();
            if res.graph.contains(0, 1, 1) {
                hits += 1;
            }
        }
        assert!(hits >= 9, "hits={hits}");

        // significant but tiny coefficients fail the magnitude gate
        let mut gated = 0;
        for seed in 0..10 {
            let ts = driven_pair(20000, 0.05, 2, 200 + seed);
            let res = baseline_var(&ts, 1, 0.05, 0.1).unwrap();
            if !res.graph.contains(0, 1, 1) {
                gated += 1;
            }
        }
        assert!(gated >= 9, "gated={gated}");
    }

    #[test]
    fn var_false_positive_rate_tracks_alpha() {
        let alpha = 0.05;
        let mut fp = 0usize;
        let mut total = 0usize;
        for seed in 0..20 {
            let ts = white_noise(400, 3, 300 + seed);
            let res = baseline_var(&ts, 2, alpha, 0.0).unwrap();
            fp += res.graph.len();
            total += 3 * 3 * 2;
        }
        let rate = fp as f64 / total as f64;
        assert!(rate > 0.015 && rate < 0.1, "rate={rate}");
    }

    #[test]
    fn pairwise_granger_detects_and_attributes_lags() {
        let ts = driven_pair(500, 0.8, 3, 7);
        let res = baseline_pairwise_granger(&ts, 3, 0.05, false).unwrap();
        for a in 1..=3 {
            assert!(res.graph.contains(0, a, 1), "missing lag {a}");
        }
        // no self edges by construction
        for &(c, _, e) in res.graph.edges() {
            assert_ne!(c, e);
        }
        let res1 = baseline_pairwise_granger(&ts, 3, 0.05, true).unwrap();
        assert!(res1.graph.contains(0, 1, 1));
        assert!(!res1.graph.contains(0, 2, 1));
    }

    #[test]
    fn pairwise_granger_false_positive_rate_tracks_alpha() {
        let alpha = 0.05;
        let mut rejections = 0usize;
        let mut total = 0usize;
        for seed in 0..30 {
            let ts = white_noise(300, 3, 500 + seed);
            let res = baseline_pairwise_granger(&ts, 2, alpha, true).unwrap();
            rejections += res.graph.len();
            total += 6;
        }
        let rate = rejections as f64 / total as f64;
        assert!(rate < 0.12, "rate={rate}");
    }

    #[test]
    fn mvgc_detects_the_driven_pair() {
        let mut hits = 0;
        for seed in 0..10 {
            let ts = driven_pair(500, 0.8, 3, 900 + seed);
            let res = baseline_mvgc(&ts, 2, 0.05).unwrap();
            if res.graph.contains(0, 1, 1) && res.graph.contains(0, 2, 1) {
                hits += 1;
            }
        }
        assert!(hits >= 9, "hits={hits}");
    }

    #[test]
    fn baselines_are_deterministic() {
        let ts = driven_pair(300, 0.6, 3, 11);
        let a = baseline_var(&ts, 2, 0.05, 0.1).unwrap();
        let b = baseline_var(&ts, 2, 0.05, 0.1).unwrap();
        assert_eq!(a.graph, b.graph);
        let a = baseline_mvgc(&ts, 2, 0.05).unwrap();
        let b = baseline_mvgc(&ts, 2, 0.05).unwrap();
        assert_eq!(a.graph, b.graph);
    }

    #[test]
    fn short_series_rejected() {
        let ts = white_noise(10, 4, 1);
        assert!(baseline_var(&ts, 3, 0.05, 0.1).is_err());
    }
}
