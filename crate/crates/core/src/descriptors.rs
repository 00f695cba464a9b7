//! The 63-element feature vector of a candidate link: transfer-entropy
//! family, residual-correlation features, higher-order moments, regression
//! coefficients, and the MI-population descriptors built on the temporal
//! Markov Blanket.

use std::collections::HashMap;
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{enumerate_candidates, CandidateLink, LaggedDataset, SeriesRef};
use crate::error::Error;
use crate::mi::{ksg_mi, SampleBlock};
use crate::Result;

pub const FEATURE_COUNT: usize = 63;

/// Canonical feature order. Every exported matrix and trained model uses
/// exactly this ordering.
pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = [
    "parcorr_errors",
    "errors_correlation_with_inputs",
    "coeff_cause",
    "coeff_eff",
    "HOC_3_1",
    "HOC_1_2",
    "HOC_2_1",
    "HOC_1_3",
    "kurtosis_ca",
    "kurtosis_ef",
    "skewness_ca",
    "skewness_ef",
    "te_asymmetry_diff_1_15",
    "transfer_entropy_fwd",
    "transfer_entropy_bwd",
    "transfer_entropy_diff",
    "com_cau",
    "cau_eff",
    "eff_cau",
    "eff_cau_mbeff",
    "cau_eff_mbcau",
    "mca_mef_cau_parent",
    "mca_mef_cau_child",
    "mca_mef_cau_mean",
    "mca_mef_cau_std",
    "mca_mef_eff_parent",
    "mca_mef_eff_child",
    "mca_mef_eff_mean",
    "mca_mef_eff_std",
    "cau_m_eff_interaction",
    "cau_m_eff_mean",
    "cau_m_eff_std",
    "eff_m_cau_parent",
    "eff_m_cau_child",
    "eff_m_cau_mean",
    "eff_m_cau_std",
    "m_cau_interaction",
    "m_cau_mean",
    "m_cau_std",
    "eff_cau_mbcau_plus_interaction",
    "eff_cau_mbcau_plus_mean",
    "eff_cau_mbcau_plus_std",
    "cau_eff_mbeff_plus_parent",
    "cau_eff_mbeff_plus_child",
    "cau_eff_mbeff_plus_mean",
    "cau_eff_mbeff_plus_std",
    "m_eff_parent",
    "m_eff_child",
    "m_eff_mean",
    "m_eff_std",
    "mca_mca_cau_parent",
    "mca_mca_cau_child",
    "mca_mca_cau_mean",
    "mca_mca_cau_std",
    "mbe_mbe_eff_interaction",
    "mbe_mbe_eff_mean",
    "mbe_mbe_eff_std",
    "mca_mef_cau_interaction",
    "mca_mef_eff_interaction",
    "eff_m_cau_interaction",
    "cau_eff_mbeff_plus_interaction",
    "m_eff_interaction",
    "mca_mca_cau_interaction",
];

pub fn feature_index(name: &str) -> Option<usize> {
    FEATURE_NAMES.iter().position(|&n| n == name)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DescriptorConfig {
    /// Neighbor count for the k-NN MI estimator.
    pub k_neighbors: usize,
    /// Conditioning-lag range of the transfer-entropy average.
    pub te_k_min: usize,
    pub te_k_max: usize,
    /// Lags whose aligned sample falls below this row count are dropped from
    /// the transfer-entropy average.
    pub te_min_rows: usize,
    /// Ridge penalty for the regression-based features. Applied to
    /// standardized predictors; the intercept is unpenalized.
    pub ridge_lambda: f64,
}

impl Default for DescriptorConfig {
    fn default() -> Self {
        Self {
            k_neighbors: 3,
            te_k_min: 1,
            te_k_max: 15,
            te_min_rows: 30,
            ridge_lambda: 1.0,
        }
    }
}

impl DescriptorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k_neighbors < 1 {
            return Err(Error::InvalidConfig("k_neighbors must be >= 1".into()));
        }
        if self.te_k_min < 1 || self.te_k_min > self.te_k_max {
            return Err(Error::InvalidConfig(
                "need 1 <= te_k_min <= te_k_max".into(),
            ));
        }
        if !(self.ridge_lambda >= 0.0) {
            return Err(Error::InvalidConfig("ridge_lambda must be >= 0".into()));
        }
        Ok(())
    }
}

/// One feature vector; `values` follows `FEATURE_NAMES` order.
#[derive(Debug, Clone, PartialEq)]
pub struct DescriptorVector {
    pub link: CandidateLink,
    pub values: Vec<f64>,
}

impl DescriptorVector {
    pub fn get(&self, name: &str) -> Option<f64> {
        feature_index(name).map(|i| self.values[i])
    }
}

/// Feature extractor over one series. Construction standardizes every
/// lagged column (zero mean, unit variance over the full flattened range) so
/// that scale carries no signal into any downstream computation.
pub struct Extractor {
    ds: LaggedDataset,
    cfg: DescriptorConfig,
}

type MiKey = (Vec<SeriesRef>, Vec<SeriesRef>, usize, usize);
type MiCache = HashMap<MiKey, f64>;

/// Pair-level features shared by every lag of an ordered pair: the
/// transfer-entropy family and the moment family, both defined on
/// contemporaneous columns only.
struct PairShared {
    te: [f64; 4],
    moments: [f64; 8],
}

impl Extractor {
    pub fn new(ds: LaggedDataset, cfg: DescriptorConfig) -> Result<Self> {
        cfg.validate()?;
        let rows = ds.rows();
        if rows < cfg.k_neighbors + 4 {
            return Err(Error::InsufficientSamples {
                have: rows,
                k: cfg.k_neighbors,
            });
        }
        let mut ds = ds;
        for mut col in ds.matrix.columns_mut() {
            let n = col.len() as f64;
            let mean = col.sum() / n;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            if var == 0.0 {
                return Err(Error::DegenerateInput(
                    "constant lagged column; cannot standardize".into(),
                ));
            }
            let sd = var.sqrt();
            col.mapv_inplace(|v| (v - mean) / sd);
        }
        Ok(Self { ds, cfg })
    }

    pub fn dataset(&self) -> &LaggedDataset {
        &self.ds
    }

    /// All feature vectors of the ordered pair (cause, effect), one per lag
    /// in [1, L], ascending.
    pub fn compute_pair(&self, cause: usize, effect: usize) -> Result<Vec<DescriptorVector>> {
        let mut cache = MiCache::new();
        let shared = self.pair_shared(cause, effect, &mut cache)?;
        (1..=self.ds.max_lag)
            .map(|lag| {
                self.link_vector(
                    CandidateLink { cause, lag, effect },
                    &shared,
                    &mut cache,
                )
            })
            .collect()
    }

    pub fn compute_vector(&self, link: CandidateLink) -> Result<DescriptorVector> {
        if link.cause >= self.ds.n_vars
            || link.effect >= self.ds.n_vars
            || link.lag < 1
            || link.lag > self.ds.max_lag
        {
            return Err(Error::InvalidConfig(format!(
                "link ({}, {}, {}) out of range",
                link.cause, link.lag, link.effect
            )));
        }
        let mut cache = MiCache::new();
        let shared = self.pair_shared(link.cause, link.effect, &mut cache)?;
        self.link_vector(link, &shared, &mut cache)
    }

    /// Every candidate link in canonical order. Work is distributed across
    /// the current rayon pool by ordered pair; results are reassembled in
    /// canonical order, so the output is independent of worker count.
    pub fn compute_all(&self) -> Result<Vec<DescriptorVector>> {
        let n = self.ds.n_vars;
        let pairs: Vec<(usize, usize)> = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .collect();
        let per_pair: Vec<Vec<DescriptorVector>> = pairs
            .par_iter()
            .map(|&(i, j)| self.compute_pair(i, j))
            .collect::<Result<_>>()?;
        let by_pair: HashMap<(usize, usize), &Vec<DescriptorVector>> = pairs
            .iter()
            .copied()
            .zip(per_pair.iter())
            .collect();
        Ok(enumerate_candidates(n, self.ds.max_lag)
            .into_iter()
            .map(|l| by_pair[&(l.cause, l.effect)][l.lag - 1].clone())
            .collect())
    }

    fn block(&self, refs: &[SeriesRef], lo: usize, hi: usize) -> Result<SampleBlock> {
        SampleBlock::from_cols(refs.iter().map(|&r| self.ds.slice(r, lo, hi)).collect())
    }

    fn mi(
        &self,
        cache: &mut MiCache,
        x: &[SeriesRef],
        y: &[SeriesRef],
        lo: usize,
        hi: usize,
    ) -> Result<f64> {
        let key = (x.to_vec(), y.to_vec(), lo, hi);
        if let Some(&v) = cache.get(&key) {
            return Ok(v);
        }
        let v = ksg_mi(
            &self.block(x, lo, hi)?,
            &self.block(y, lo, hi)?,
            self.cfg.k_neighbors,
        )?;
        cache.insert(key, v);
        Ok(v)
    }

    /// Conditional MI as the literal difference I((x,z); y) - I(z; y).
    fn cmi(
        &self,
        cache: &mut MiCache,
        x: &[SeriesRef],
        y: &[SeriesRef],
        z: &[SeriesRef],
        lo: usize,
        hi: usize,
    ) -> Result<f64> {
        if z.is_empty() {
            return self.mi(cache, x, y, lo, hi);
        }
        let mut xz = x.to_vec();
        xz.extend_from_slice(z);
        Ok(self.mi(cache, &xz, y, lo, hi)? - self.mi(cache, z, y, lo, hi)?)
    }

    fn pair_shared(&self, i: usize, j: usize, cache: &mut MiCache) -> Result<PairShared> {
        Ok(PairShared {
            te: self.te_family(i, j, cache)?,
            moments: self.moment_family(i, j),
        })
    }

    /// (te_asymmetry_diff_1_15, transfer_entropy_fwd, transfer_entropy_bwd,
    /// transfer_entropy_diff). The average runs over conditioning lags k in
    /// [te_k_min, te_k_max]; each lag aligns samples on its maximal common
    /// row range, and lags with too few usable rows are dropped.
    fn te_family(&self, i: usize, j: usize, cache: &mut MiCache) -> Result<[f64; 4]> {
        let l = self.ds.max_lag;
        let r = self.ds.rows();
        let zi0 = SeriesRef::col(i, 0);
        let zj0 = SeriesRef::col(j, 0);
        let zi1 = SeriesRef::col(i, 1);
        let zj1 = SeriesRef::col(j, 1);

        let mut sum = 0.0;
        let mut count = 0usize;
        for k in self.cfg.te_k_min..=self.cfg.te_k_max {
            let lo = k.saturating_sub(l);
            if lo >= r {
                continue;
            }
            let hi = r - 1;
            let n = hi - lo + 1;
            if n < self.cfg.te_min_rows || n <= self.cfg.k_neighbors {
                continue;
            }
            let zjk = SeriesRef {
                var: j,
                lag: k as isize,
            };
            let zik = SeriesRef {
                var: i,
                lag: k as isize,
            };
            let fwd = self.cmi(cache, &[zi1], &[zj0], &[zjk], lo, hi)?;
            let bwd = self.cmi(cache, &[zj1], &[zi0], &[zik], lo, hi)?;
            sum += fwd - bwd;
            count += 1;
        }
        let te_asy = if count == 0 { 0.0 } else { sum / count as f64 };

        let (lo, hi) = (0, r - 1);
        let fwd1 = self.cmi(cache, &[zi1], &[zj0], &[zj1], lo, hi)?;
        let bwd1 = self.cmi(cache, &[zj1], &[zi0], &[zi1], lo, hi)?;
        Ok([te_asy, fwd1, bwd1, fwd1 - bwd1])
    }

    /// Cross-moments HOC_{3,1}, HOC_{1,2}, HOC_{2,1}, HOC_{1,3} plus
    /// kurtosis (non-excess) and skewness of the contemporaneous cause and
    /// effect columns.
    fn moment_family(&self, i: usize, j: usize) -> [f64; 8] {
        let r = self.ds.rows();
        let x = self.ds.slice(SeriesRef::col(i, 0), 0, r - 1);
        let y = self.ds.slice(SeriesRef::col(j, 0), 0, r - 1);
        let xs = standardized(&x);
        let ys = standardized(&y);
        let hoc = |a: i32, b: i32| -> f64 {
            let mut s = 0.0;
            for (u, v) in xs.iter().zip(&ys) {
                s += u.powi(a) * v.powi(b);
            }
            s / xs.len() as f64
        };
        [
            hoc(3, 1),
            hoc(1, 2),
            hoc(2, 1),
            hoc(1, 3),
            kurtosis(&x),
            kurtosis(&y),
            skewness(&x),
            skewness(&y),
        ]
    }

    fn link_vector(
        &self,
        link: CandidateLink,
        shared: &PairShared,
        cache: &mut MiCache,
    ) -> Result<DescriptorVector> {
        let l = self.ds.max_lag;
        let r = self.ds.rows();
        let (i, tau, j) = (link.cause, link.lag, link.effect);

        // common alignment window: the cause's MB parent sits one lag above
        // tau (shifted when tau == L) and the effect's MB child one row ahead
        let lo = usize::from(tau == l);
        let hi = r - 2;

        let zc = SeriesRef::col(i, tau);
        let ze = SeriesRef::col(j, 0);
        let mb_c = self.ds.temporal_mb(i, tau)?;
        let mb_e = self.ds.temporal_mb(j, 0)?;
        let (pi, ci) = (mb_c.parent, mb_c.child);
        let (pj, cj) = (mb_e.parent, mb_e.child);
        let mb_i = [pi, ci];
        let mb_j = [pj, cj];

        let mut f = vec![0.0f64; FEATURE_COUNT];

        // regression-based features
        let zc_s = self.ds.slice(zc, lo, hi);
        let ze_s = self.ds.slice(ze, lo, hi);
        let union: Vec<SeriesRef> = dedup(&[pi, ci, pj, cj]);
        let union_cols: Vec<Vec<f64>> =
            union.iter().map(|&m| self.ds.slice(m, lo, hi)).collect();
        let lambda = self.cfg.ridge_lambda;
        let ri = ridge_residuals(&union_cols, &zc_s, lambda);
        let rj = ridge_residuals(&union_cols, &ze_s, lambda);
        f[0] = pearson(&ri, &rj);
        let cause_side: Vec<Vec<f64>> = dedup(&[zc, pi, ci])
            .iter()
            .map(|&m| self.ds.slice(m, lo, hi))
            .collect();
        let e = ridge_residuals(&cause_side, &ze_s, lambda);
        f[1] = pearson(&e, &zc_s);
        let design_c: Vec<Vec<f64>> = dedup(&[zc, pj, cj])
            .iter()
            .map(|&m| self.ds.slice(m, lo, hi))
            .collect();
        f[2] = ridge_coefficients(&design_c, &ze_s, lambda)[0];
        let design_e: Vec<Vec<f64>> = dedup(&[ze, pi, ci])
            .iter()
            .map(|&m| self.ds.slice(m, lo, hi))
            .collect();
        f[3] = ridge_coefficients(&design_e, &zc_s, lambda)[0];

        f[4..12].copy_from_slice(&shared.moments);
        f[12..16].copy_from_slice(&shared.te);

        // MI-population family
        let inter: Vec<SeriesRef> = mb_i
            .iter()
            .copied()
            .filter(|m| mb_j.contains(m))
            .collect();
        f[16] = self.cmi(cache, &[zc], &[ze], &inter, lo, hi)?;
        let direct = self.mi(cache, &[zc], &[ze], lo, hi)?;
        f[17] = direct;
        f[18] = direct;
        f[19] = self.cmi(cache, &[ze], &[zc], &mb_j, lo, hi)?;
        f[20] = self.cmi(cache, &[zc], &[ze], &mb_i, lo, hi)?;

        // I(m_i; m_j | zc) over all MB member combinations
        let mut given_c = [[0.0; 2]; 2];
        let mut given_e = [[0.0; 2]; 2];
        for (a, &mi_m) in mb_i.iter().enumerate() {
            for (b, &mj_m) in mb_j.iter().enumerate() {
                given_c[a][b] = self.cmi(cache, &[mi_m], &[mj_m], &[zc], lo, hi)?;
                given_e[a][b] = self.cmi(cache, &[mi_m], &[mj_m], &[ze], lo, hi)?;
            }
        }
        f[21] = given_c[0][0];
        f[22] = given_c[0][1];
        let flat_c = [given_c[0][0], given_c[0][1], given_c[1][0], given_c[1][1]];
        f[23] = mean(&flat_c);
        f[24] = pop_std(&flat_c);
        f[25] = given_e[0][0];
        f[26] = given_e[0][1];
        let flat_e = [given_e[0][0], given_e[0][1], given_e[1][0], given_e[1][1]];
        f[27] = mean(&flat_e);
        f[28] = pop_std(&flat_e);

        // I(zc; m_j | ze)
        let cme = [
            self.cmi(cache, &[zc], &[pj], &[ze], lo, hi)?,
            self.cmi(cache, &[zc], &[cj], &[ze], lo, hi)?,
        ];
        f[29] = cme[0];
        f[30] = mean(&cme);
        f[31] = pop_std(&cme);

        // I(ze; m_i | zc)
        let emc = [
            self.cmi(cache, &[ze], &[pi], &[zc], lo, hi)?,
            self.cmi(cache, &[ze], &[ci], &[zc], lo, hi)?,
        ];
        f[32] = emc[0];
        f[33] = emc[1];
        f[34] = mean(&emc);
        f[35] = pop_std(&emc);

        // I(zc; m_j)
        let mcau = [
            self.mi(cache, &[zc], &[pj], lo, hi)?,
            self.mi(cache, &[zc], &[cj], lo, hi)?,
        ];
        f[36] = mcau[0];
        f[37] = mean(&mcau);
        f[38] = pop_std(&mcau);

        // I(ze; zc | MB_i + m_j)
        let plus_i = [
            self.cmi(cache, &[ze], &[zc], &[pi, ci, pj], lo, hi)?,
            self.cmi(cache, &[ze], &[zc], &[pi, ci, cj], lo, hi)?,
        ];
        f[39] = plus_i[0];
        f[40] = mean(&plus_i);
        f[41] = pop_std(&plus_i);

        // I(zc; ze | MB_j + m_i)
        let plus_j = [
            self.cmi(cache, &[zc], &[ze], &[pj, cj, pi], lo, hi)?,
            self.cmi(cache, &[zc], &[ze], &[pj, cj, ci], lo, hi)?,
        ];
        f[42] = plus_j[0];
        f[43] = plus_j[1];
        f[44] = mean(&plus_j);
        f[45] = pop_std(&plus_j);

        // I(ze; m_i)
        let meff = [
            self.mi(cache, &[ze], &[pi], lo, hi)?,
            self.mi(cache, &[ze], &[ci], lo, hi)?,
        ];
        f[46] = meff[0];
        f[47] = meff[1];
        f[48] = mean(&meff);
        f[49] = pop_std(&meff);

        // information interaction I(a; b) - I(a; b | c) over the MB of the
        // cause (mediated by zc) and of the effect (mediated by ze)
        let ii = |a: SeriesRef, b: SeriesRef, c: SeriesRef,
                      cache: &mut MiCache|
         -> Result<f64> {
            Ok(self.mi(cache, &[a], &[b], lo, hi)?
                - self.cmi(cache, &[a], &[b], &[c], lo, hi)?)
        };
        let mca = [ii(pi, ci, zc, cache)?, ii(ci, pi, zc, cache)?];
        f[50] = mca[0];
        f[51] = mca[1];
        f[52] = mean(&mca);
        f[53] = pop_std(&mca);
        let mbe = [ii(pj, cj, ze, cache)?, ii(cj, pj, ze, cache)?];
        f[54] = mbe[0];
        f[55] = mean(&mbe);
        f[56] = pop_std(&mbe);

        // cardinality-reduced interaction variants: the temporal MB always
        // has two members, so these collapse onto the parent-member value
        f[57] = f[21];
        f[58] = f[25];
        f[59] = f[32];
        f[60] = f[42];
        f[61] = f[46];
        f[62] = f[50];

        // degenerate computations (zero-variance residuals and the like)
        // yield a neutral 0 rather than poisoning the vector
        for v in f.iter_mut() {
            if !v.is_finite() {
                *v = 0.0;
            }
        }
        Ok(DescriptorVector { link, values: f })
    }
}

fn dedup(refs: &[SeriesRef]) -> Vec<SeriesRef> {
    let mut out = Vec::with_capacity(refs.len());
    for &r in refs {
        if !out.contains(&r) {
            out.push(r);
        }
    }
    out
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn pop_std(v: &[f64]) -> f64 {
    let m = mean(v);
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64).sqrt()
}

fn standardized(v: &[f64]) -> Vec<f64> {
    let m = mean(v);
    let sd = pop_std(v);
    v.iter().map(|x| (x - m) / sd).collect()
}

fn central_moment(v: &[f64], p: i32) -> f64 {
    let m = mean(v);
    v.iter().map(|x| (x - m).powi(p)).sum::<f64>() / v.len() as f64
}

/// Non-excess kurtosis: 3 for a Gaussian.
pub fn kurtosis(v: &[f64]) -> f64 {
    let m2 = central_moment(v, 2);
    central_moment(v, 4) / (m2 * m2)
}

pub fn skewness(v: &[f64]) -> f64 {
    let m2 = central_moment(v, 2);
    central_moment(v, 3) / m2.powf(1.5)
}

pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let ma = mean(a);
    let mb = mean(b);
    let mut num = 0.0;
    let mut da = 0.0;
    let mut db = 0.0;
    for (x, y) in a.iter().zip(b) {
        num += (x - ma) * (y - mb);
        da += (x - ma).powi(2);
        db += (y - mb).powi(2);
    }
    if da == 0.0 || db == 0.0 {
        return 0.0;
    }
    num / (da * db).sqrt()
}

/// Ridge coefficients of y on the given predictor columns plus an
/// unpenalized intercept. Returns one coefficient per predictor, intercept
/// last.
pub fn ridge_coefficients(xcols: &[Vec<f64>], y: &[f64], lambda: f64) -> Vec<f64> {
    let n = y.len();
    let p = xcols.len();
    let mut x = DMatrix::zeros(n, p + 1);
    for (c, col) in xcols.iter().enumerate() {
        for (r, &v) in col.iter().enumerate() {
            x[(r, c)] = v;
        }
    }
    for r in 0..n {
        x[(r, p)] = 1.0;
    }
    let xt = x.transpose();
    let mut a = &xt * &x;
    for c in 0..p {
        a[(c, c)] += lambda;
    }
    let b = &xt * DVector::from_column_slice(y);
    match a.clone().lu().solve(&b) {
        Some(beta) => beta.iter().copied().collect(),
        None => {
            // pathological even with the penalty; regularize everything
            for c in 0..=p {
                a[(c, c)] += lambda.max(1e-8);
            }
            a.lu()
                .solve(&b)
                .map(|beta| beta.iter().copied().collect())
                .unwrap_or_else(|| vec![0.0; p + 1])
        }
    }
}

pub fn ridge_residuals(xcols: &[Vec<f64>], y: &[f64], lambda: f64) -> Vec<f64> {
    let beta = ridge_coefficients(xcols, y, lambda);
    let p = xcols.len();
    y.iter()
        .enumerate()
        .map(|(r, &yr)| {
            let mut fit = beta[p];
            for (c, col) in xcols.iter().enumerate() {
                fit += beta[c] * col[r];
            }
            yr - fit
        })
        .collect()
}

/// One row per link: the link triple, the 63 features, and optionally a
/// 0/1 label.
pub fn write_feature_csv<W: Write>(
    writer: W,
    vectors: &[DescriptorVector],
    labels: Option<&[u8]>,
) -> Result<()> {
    if let Some(l) = labels {
        if l.len() != vectors.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} labels for {} vectors",
                l.len(),
                vectors.len()
            )));
        }
    }
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = vec!["cause".to_string(), "lag".to_string(), "effect".to_string()];
    header.extend(FEATURE_NAMES.iter().map(|s| s.to_string()));
    if labels.is_some() {
        header.push("label".into());
    }
    wtr.write_record(&header)?;
    for (idx, v) in vectors.iter().enumerate() {
        let mut rec = vec![
            v.link.cause.to_string(),
            v.link.lag.to_string(),
            v.link.effect.to_string(),
        ];
        rec.extend(v.values.iter().map(|x| format!("{x:.17e}")));
        if let Some(l) = labels {
            rec.push(l[idx].to_string());
        }
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Parses a feature CSV back into vectors and optional labels.
pub fn read_feature_csv<R: std::io::Read>(
    reader: R,
) -> Result<(Vec<DescriptorVector>, Option<Vec<u8>>)> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr.headers()?.clone();
    let expected_base = 3 + FEATURE_COUNT;
    let has_label = headers.len() == expected_base + 1 && &headers[expected_base] == "label";
    if headers.len() != expected_base && !has_label {
        return Err(Error::ShapeMismatch(format!(
            "feature csv has {} columns, expected {} or {}",
            headers.len(),
            expected_base,
            expected_base + 1
        )));
    }
    for (k, name) in FEATURE_NAMES.iter().enumerate() {
        if &headers[3 + k] != *name {
            return Err(Error::ShapeMismatch(format!(
                "feature column {} is '{}', expected '{}'",
                3 + k,
                &headers[3 + k],
                name
            )));
        }
    }
    let mut vectors = Vec::new();
    let mut labels = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let parse = |s: &str| -> Result<f64> {
            s.trim()
                .parse()
                .map_err(|_| Error::DegenerateInput(format!("unparseable number '{s}'")))
        };
        let link = CandidateLink {
            cause: record[0].trim().parse().map_err(|_| {
                Error::DegenerateInput(format!("unparseable cause '{}'", &record[0]))
            })?,
            lag: record[1].trim().parse().map_err(|_| {
                Error::DegenerateInput(format!("unparseable lag '{}'", &record[1]))
            })?,
            effect: record[2].trim().parse().map_err(|_| {
                Error::DegenerateInput(format!("unparseable effect '{}'", &record[2]))
            })?,
        };
        let values: Vec<f64> = (0..FEATURE_COUNT)
            .map(|k| parse(&record[3 + k]))
            .collect::<Result<_>>()?;
        if has_label {
            labels.push(record[expected_base].trim().parse::<u8>().map_err(|_| {
                Error::DegenerateInput(format!(
                    "unparseable label '{}'",
                    &record[expected_base]
                ))
            })?);
        }
        vectors.push(DescriptorVector { link, values });
    }
    Ok((vectors, if has_label { Some(labels) } else { None }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::reshape_lagged;
    use crate::synth::{generate, GenConfig, NoiseKind};
    use approx::assert_abs_diff_eq;

    fn extractor(seed: u64) -> Extractor {
        let mut cfg = GenConfig::new(9, NoiseKind::Gaussian, seed);
        cfg.n_vars = 3;
        cfg.timesteps = 120;
        let inst = generate(&cfg).unwrap();
        let ds = reshape_lagged(&inst.series, 2).unwrap();
        Extractor::new(ds, DescriptorConfig::default()).unwrap()
    }

    #[test]
    fn feature_names_are_unique_and_complete() {
        assert_eq!(FEATURE_NAMES.len(), 63);
        let mut set: Vec<&str> = FEATURE_NAMES.to_vec();
        set.sort_unstable();
        set.dedup();
        assert_eq!(set.len(), 63);
        assert_eq!(feature_index("parcorr_errors"), Some(0));
        assert_eq!(feature_index("mca_mca_cau_interaction"), Some(62));
    }

    #[test]
    fn vectors_are_finite_and_deterministic() {
        let ex = extractor(404);
        let link = CandidateLink {
            cause: 0,
            lag: 1,
            effect: 1,
        };
        let a = ex.compute_vector(link).unwrap();
        let b = ex.compute_vector(link).unwrap();
        assert_eq!(a.values.len(), 63);
        assert!(a.values.iter().all(|v| v.is_finite()));
        assert_eq!(a, b);
    }

    #[test]
    fn self_link_te_entries_are_exactly_zero() {
        let ex = extractor(405);
        let v = ex
            .compute_vector(CandidateLink {
                cause: 2,
                lag: 1,
                effect: 2,
            })
            .unwrap();
        assert_eq!(v.get("te_asymmetry_diff_1_15"), Some(0.0));
        assert_eq!(v.get("transfer_entropy_diff"), Some(0.0));
    }

    #[test]
    fn te_antisymmetry_is_exact() {
        let ex = extractor(406);
        for lag in 1..=2 {
            let a = ex
                .compute_vector(CandidateLink {
                    cause: 0,
                    lag,
                    effect: 1,
                })
                .unwrap();
            let b = ex
                .compute_vector(CandidateLink {
                    cause: 1,
                    lag,
                    effect: 0,
                })
                .unwrap();
            assert_eq!(
                a.get("te_asymmetry_diff_1_15").unwrap(),
                -b.get("te_asymmetry_diff_1_15").unwrap()
            );
            assert_eq!(
                a.get("transfer_entropy_diff").unwrap(),
                -b.get("transfer_entropy_diff").unwrap()
            );
        }
    }

    #[test]
    fn hoc_reflection_and_mi_symmetry_are_exact() {
        let ex = extractor(407);
        let a = ex
            .compute_vector(CandidateLink {
                cause: 0,
                lag: 2,
                effect: 2,
            })
            .unwrap();
        let b = ex
            .compute_vector(CandidateLink {
                cause: 2,
                lag: 2,
                effect: 0,
            })
            .unwrap();
        assert_eq!(a.get("HOC_3_1"), b.get("HOC_1_3"));
        assert_eq!(a.get("HOC_1_3"), b.get("HOC_3_1"));
        assert_eq!(a.get("HOC_2_1"), b.get("HOC_1_2"));
        assert_eq!(a.get("HOC_1_2"), b.get("HOC_2_1"));
        assert_eq!(a.get("cau_eff"), a.get("eff_cau"));
        assert_eq!(b.get("cau_eff"), b.get("eff_cau"));
    }

    #[test]
    fn interaction_variants_collapse_onto_parent_member() {
        let ex = extractor(408);
        let v = ex
            .compute_vector(CandidateLink {
                cause: 1,
                lag: 1,
                effect: 0,
            })
            .unwrap();
        assert_eq!(v.get("mca_mef_cau_interaction"), v.get("mca_mef_cau_parent"));
        assert_eq!(v.get("mca_mef_eff_interaction"), v.get("mca_mef_eff_parent"));
        assert_eq!(v.get("eff_m_cau_interaction"), v.get("eff_m_cau_parent"));
        assert_eq!(v.get("m_eff_interaction"), v.get("m_eff_parent"));
        assert_eq!(
            v.get("mca_mca_cau_interaction"),
            v.get("mca_mca_cau_parent")
        );
    }

    #[test]
    fn compute_pair_matches_compute_vector() {
        let ex = extractor(409);
        let pair = ex.compute_pair(1, 2).unwrap();
        assert_eq!(pair.len(), 2);
        for v in &pair {
            let single = ex.compute_vector(v.link).unwrap();
            assert_eq!(v, &single);
        }
    }

    #[test]
    fn ridge_recovers_linear_coefficient() {
        // y = 2 x + small noise; lambda small relative to n keeps shrinkage mild
        let mut x = Vec::new();
        let mut y = Vec::new();
        let mut s = 1u64;
        for _ in 0..500 {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let u = ((s >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0;
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let e = ((s >> 11) as f64 / (1u64 << 53) as f64) * 0.02 - 0.01;
            x.push(u);
            y.push(2.0 * u + e);
        }
        let beta = ridge_coefficients(&[x.clone()], &y, 1.0);
        assert_abs_diff_eq!(beta[0], 2.0, epsilon = 0.1);
        // penalty limit pushes coefficients to zero
        let heavy = ridge_coefficients(&[x], &y, 1e9);
        assert!(heavy[0].abs() < 1e-3);
    }

    #[test]
    fn moment_helpers() {
        let sym = [-1.0, 0.0, 1.0];
        assert_abs_diff_eq!(skewness(&sym), 0.0, epsilon = 1e-15);
        // kurtosis of a large Gaussian sample is near 3
        use rand::SeedableRng;
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let g: Vec<f64> = (0..20000).map(|_| StandardNormal.sample(&mut rng)).collect();
        assert_abs_diff_eq!(kurtosis(&g), 3.0, epsilon = 0.15);
    }

    #[test]
    fn independent_columns_give_small_moment_and_error_features() {
        use ndarray::Array2;
        use rand::SeedableRng;
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let values = Array2::from_shape_fn((503, 2), |_| StandardNormal.sample(&mut rng));
        let ts = crate::data::TimeSeriesMatrix::new(
            values,
            vec!["a".into(), "b".into()],
        )
        .unwrap();
        let ds = reshape_lagged(&ts, 3).unwrap();
        let ex = Extractor::new(ds, DescriptorConfig::default()).unwrap();
        let v = ex
            .compute_vector(CandidateLink {
                cause: 0,
                lag: 1,
                effect: 1,
            })
            .unwrap();
        for name in ["HOC_3_1", "HOC_1_2", "HOC_2_1", "HOC_1_3"] {
            assert!(v.get(name).unwrap().abs() < 0.15, "{name}");
        }
        for name in [
            "parcorr_errors",
            "errors_correlation_with_inputs",
            "coeff_cause",
            "coeff_eff",
        ] {
            assert!(v.get(name).unwrap().abs() < 0.1, "{name}");
        }
    }

    #[test]
    fn feature_csv_roundtrip() {
        let ex = extractor(410);
        let vecs = vec![
            ex.compute_vector(CandidateLink {
                cause: 0,
                lag: 1,
                effect: 1,
            })
            .unwrap(),
            ex.compute_vector(CandidateLink {
                cause: 1,
                lag: 2,
                effect: 0,
            })
            .unwrap(),
        ];
        let labels = vec![1u8, 0u8];
        let mut buf = Vec::new();
        write_feature_csv(&mut buf, &vecs, Some(&labels)).unwrap();
        let (back, back_labels) = read_feature_csv(&buf[..]).unwrap();
        assert_eq!(back, vecs);
        assert_eq!(back_labels, Some(labels));
    }
}
