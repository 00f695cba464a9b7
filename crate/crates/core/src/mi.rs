//! Non-parametric mutual information: digamma, the k-NN (KSG) estimator
//! under the Chebyshev metric, and conditional MI via the decomposition
//! identity I(x; y | z) = I((x, z); y) - I(z; y).

use crate::error::Error;
use crate::knn::ChebyshevIndex;
use crate::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Digamma function for x > 0. Accuracy better than 1e-10 over the domain
/// used here (positive integers and halves, mostly).
pub fn digamma(x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::DegenerateInput(format!("digamma domain: x={x}")));
    }
    // push the argument above 10 with the recurrence psi(x) = psi(x+1) - 1/x,
    // then use the asymptotic expansion
    let mut x = x;
    let mut acc = 0.0;
    while x < 10.0 {
        acc -= 1.0 / x;
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    // Bernoulli-number series
    let series = inv2
        * (1.0 / 12.0
            - inv2
                * (1.0 / 120.0 - inv2 * (1.0 / 252.0 - inv2 * (1.0 / 240.0 - inv2 / 132.0))));
    Ok(acc + x.ln() - 0.5 * inv - series)
}

/// One or more aligned sample columns of common length.
#[derive(Debug, Clone)]
pub struct SampleBlock {
    cols: Vec<Vec<f64>>,
    len: usize,
}

impl SampleBlock {
    pub fn from_col(col: Vec<f64>) -> Self {
        let len = col.len();
        Self {
            cols: vec![col],
            len,
        }
    }

    pub fn from_cols(cols: Vec<Vec<f64>>) -> Result<Self> {
        if cols.is_empty() {
            return Ok(Self { cols, len: 0 });
        }
        let len = cols[0].len();
        if cols.iter().any(|c| c.len() != len) {
            return Err(Error::ShapeMismatch("sample columns of unequal length".into()));
        }
        Ok(Self { cols, len })
    }

    pub fn empty(len: usize) -> Self {
        Self {
            cols: Vec::new(),
            len,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.cols.is_empty()
    }

    pub fn width(&self) -> usize {
        self.cols.len()
    }

    /// Concatenation of the two blocks' columns.
    pub fn join(&self, other: &SampleBlock) -> SampleBlock {
        let mut cols = self.cols.clone();
        cols.extend(other.cols.iter().cloned());
        SampleBlock {
            cols,
            len: self.len.max(other.len),
        }
    }

    /// Row-major flat buffer of the block's coordinates.
    fn flat(&self) -> Vec<f64> {
        let d = self.cols.len();
        let mut out = vec![0.0; self.len * d];
        for (j, col) in self.cols.iter().enumerate() {
            for (i, &v) in col.iter().enumerate() {
                out[i * d + j] = v;
            }
        }
        out
    }

    /// Breaks exact ties deterministically. Any column containing duplicate
    /// values gets a tiny additive jitter (scale 1e-10 of the column spread)
    /// whose RNG stream is seeded from a hash of the column bytes, so the
    /// same data always receives the same perturbation.
    fn dejittered(&self) -> SampleBlock {
        let cols = self
            .cols
            .iter()
            .map(|col| {
                if !has_duplicates(col) {
                    return col.clone();
                }
                let seed = fnv1a_bytes(col);
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let sd = std_dev(col);
                let scale = if sd > 0.0 { 1e-10 * sd } else { 1e-10 };
                col.iter()
                    .map(|&v| v + scale * rng.gen_range(-0.5..0.5))
                    .collect()
            })
            .collect();
        SampleBlock {
            cols,
            len: self.len,
        }
    }
}

fn has_duplicates(col: &[f64]) -> bool {
    let mut sorted = col.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.windows(2).any(|w| w[0] == w[1])
}

fn std_dev(col: &[f64]) -> f64 {
    let n = col.len() as f64;
    let mean = col.iter().sum::<f64>() / n;
    (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt()
}

fn fnv1a_bytes(col: &[f64]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for v in col {
        for b in v.to_bits().to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
    }
    h
}

/// KSG mutual information estimate in nats (variant 1: strict marginal
/// counts within the k-th joint Chebyshev neighbor distance).
pub fn ksg_mi(x: &SampleBlock, y: &SampleBlock, k: usize) -> Result<f64> {
    let n = x.len();
    if y.len() != n {
        return Err(Error::ShapeMismatch(format!(
            "block lengths differ: {} vs {}",
            n,
            y.len()
        )));
    }
    if n <= k || k < 1 {
        return Err(Error::InsufficientSamples { have: n, k });
    }
    let x = x.dejittered();
    let y = y.dejittered();
    let joint = x.join(&y);
    let joint_index = ChebyshevIndex::new(joint.flat(), joint.width());
    let x_index = ChebyshevIndex::new(x.flat(), x.width());
    let y_index = ChebyshevIndex::new(y.flat(), y.width());

    let mut acc = 0.0;
    for s in 0..n {
        let eps = joint_index.kth_neighbor_distance(s, k);
        let nx = x_index.count_within_strict(s, eps);
        let ny = y_index.count_within_strict(s, eps);
        acc += digamma((nx + 1) as f64)? + digamma((ny + 1) as f64)?;
    }
    Ok(digamma(k as f64)? - acc / n as f64 + digamma(n as f64)?)
}

/// Conditional MI via the identity I(x; y | z) = I((x, z); y) - I(z; y),
/// computed literally as that difference. An empty conditioning block
/// reduces to the marginal estimate.
pub fn ksg_cmi(x: &SampleBlock, y: &SampleBlock, z: &SampleBlock, k: usize) -> Result<f64> {
    if z.is_empty() {
        return ksg_mi(x, y, k);
    }
    Ok(ksg_mi(&x.join(z), y, k)? - ksg_mi(z, y, k)?)
}
