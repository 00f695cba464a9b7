//! Multivariate nonlinear autoregressive series with known temporal ground
//! truth: 18 generative processes, three noise families, stability filter.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{TemporalGraph, TimeSeriesMatrix};
use crate::error::Error;
use crate::Result;

pub const VALID_PROCESSES: [u8; 18] = [1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16, 18, 19];

const RETRY_CAP: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    Gaussian,
    Laplace,
    Uniform,
}

impl NoiseKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" => Ok(Self::Gaussian),
            "laplace" => Ok(Self::Laplace),
            "uniform" => Ok(Self::Uniform),
            other => Err(Error::InvalidConfig(format!("unknown noise kind '{other}'"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Gaussian => "gaussian",
            Self::Laplace => "laplace",
            Self::Uniform => "uniform",
        }
    }

    /// Unit-variance draw: Gaussian sigma=1, Laplace b=1/sqrt(2),
    /// Uniform on [-sqrt(3), sqrt(3)].
    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match self {
            Self::Gaussian => StandardNormal.sample(rng),
            Self::Laplace => {
                let u: f64 = rng.gen_range(-0.5..0.5);
                let b = 1.0 / std::f64::consts::SQRT_2;
                -b * u.signum() * (1.0 - 2.0 * u.abs()).ln()
            }
            Self::Uniform => {
                let s = 3f64.sqrt();
                rng.gen_range(-s..s)
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenConfig {
    pub process_id: u8,
    pub n_vars: usize,
    pub timesteps: usize,
    pub noise_kind: NoiseKind,
    pub noise_scale: f64,
    pub max_parents: usize,
    pub seed: u64,
    pub stability_threshold: f64,
    /// Force each variable to include itself in its parent set.
    pub force_self_parent: bool,
    /// Process 14 has no noise term in its defining formula; this adds one
    /// anyway so the branch process does not degenerate.
    pub noise_on_p14: bool,
}

impl GenConfig {
    pub fn new(process_id: u8, noise_kind: NoiseKind, seed: u64) -> Self {
        Self {
            process_id,
            n_vars: 5,
            timesteps: 250,
            noise_kind,
            noise_scale: 1.0,
            max_parents: 2,
            seed,
            stability_threshold: 1e6,
            force_self_parent: true,
            noise_on_p14: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !VALID_PROCESSES.contains(&self.process_id) {
            return Err(Error::InvalidConfig(format!(
                "process {} is not available",
                self.process_id
            )));
        }
        if self.n_vars < 1 || self.timesteps < 2 {
            return Err(Error::InvalidConfig("need N >= 1 and T >= 2".into()));
        }
        if self.max_parents < 1 {
            return Err(Error::InvalidConfig("max_parents must be >= 1".into()));
        }
        if !(self.noise_scale >= 0.0) {
            return Err(Error::InvalidConfig("noise_scale must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct GeneratedInstance {
    pub series: TimeSeriesMatrix,
    pub truth: TemporalGraph,
    pub parent_sets: Vec<Vec<usize>>,
    pub config: GenConfig,
}

/// Lags (relative to the produced timestep) at which each process reads its
/// parents' average. The maximum entry is the history depth the process
/// needs before it can step.
pub fn process_lags(process_id: u8) -> Result<&'static [usize]> {
    Ok(match process_id {
        1 => &[1, 2],
        2 => &[2, 3],
        3 => &[2, 3],
        4 => &[1, 2],
        5 => &[1],
        6 => &[1, 3],
        7 => &[2, 3],
        8 => &[1, 3],
        9 => &[1, 2],
        10 => &[1],
        11 => &[1],
        12 => &[1, 2],
        13 => &[1, 2],
        14 => &[1],
        15 => &[1],
        16 => &[1],
        18 => &[1],
        19 => &[2, 3],
        other => {
            return Err(Error::InvalidConfig(format!(
                "process {other} is not available"
            )))
        }
    })
}

pub fn max_process_lag(process_id: u8) -> Result<usize> {
    Ok(*process_lags(process_id)?.iter().max().unwrap())
}

/// Uniformly samples a nonempty parent subset of size <= max_parents for
/// each variable. With `force_self_parent` the variable itself is always a
/// member and the remaining slots are drawn from the other variables.
pub fn sample_parent_sets<R: Rng>(
    n_vars: usize,
    max_parents: usize,
    force_self_parent: bool,
    rng: &mut R,
) -> Vec<Vec<usize>> {
    let cap = max_parents.min(n_vars);
    (0..n_vars)
        .map(|j| {
            let size = rng.gen_range(1..=cap);
            let mut set: Vec<usize> = Vec::with_capacity(size);
            if force_self_parent {
                set.push(j);
            }
            while set.len() < size {
                let cand = rng.gen_range(0..n_vars);
                if !set.contains(&cand) {
                    set.push(cand);
                }
            }
            set.sort_unstable();
            set
        })
        .collect()
}

/// Mean of the parents' values at a given history row.
fn parent_mean(history: &[Vec<f64>], row: usize, parents: &[usize]) -> f64 {
    parents.iter().map(|&p| history[row][p]).sum::<f64>() / parents.len() as f64
}

/// Computes the next row per the generative formula of the process.
/// `history` holds the most recent rows, oldest first; its depth must cover
/// the process's maximum lag. `regime` carries process 16's alternating
/// state for the current timestep.
pub fn step(
    process_id: u8,
    history: &[Vec<f64>],
    parent_sets: &[Vec<usize>],
    noise_row: &[f64],
    regime: u8,
    noise_on_p14: bool,
) -> Result<Vec<f64>> {
    let need = max_process_lag(process_id)?;
    if history.len() < need {
        return Err(Error::InsufficientHistory {
            process: process_id,
            need,
            have: history.len(),
        });
    }
    let last = history.len() - 1; // time t; lag a reads history[last - (a-1)]
    let at = |lag: usize, parents: &[usize]| parent_mean(history, last + 1 - lag, parents);
    let n = parent_sets.len();
    let mut out = vec![0.0; n];
    for j in 0..n {
        let ps = &parent_sets[j];
        let w = noise_row[j];
        out[j] = match process_id {
            1 => {
                let y1 = at(1, ps);
                let y2 = at(2, ps);
                -0.4 * (3.0 - y1 * y1) / (1.0 + y1 * y1)
                    + 0.6 * (3.0 - (y2 - 0.5).powi(3)) / (1.0 + (y2 - 0.5).powi(4))
                    + w
            }
            2 | 7 => {
                let y3 = at(3, ps);
                let y2 = at(2, ps);
                (0.4 - 2.0 * (40.0 * y3).cos() * (-30.0 * y3 * y3).exp()) * y3
                    + (0.5 - 0.5 * (-50.0 * y2 * y2).exp()) * y2
                    + w
            }
            3 => {
                let y2 = at(2, ps);
                let y3 = at(3, ps);
                1.5 * (std::f64::consts::FRAC_PI_2 * y2).sin()
                    - (std::f64::consts::FRAC_PI_2 * y3).sin()
                    + w
            }
            4 => {
                let y1 = at(1, ps);
                let y2 = at(2, ps);
                2.0 * (-0.1 * y1 * y1).exp() * y1 - (-0.1 * y2 * y2).exp() * y2 + w
            }
            5 => {
                let y1 = at(1, ps);
                let ind = if y1 < 0.0 { 1.0 } else { 0.0 };
                -2.0 * y1 * ind + 0.4 * y1 * ind + w
            }
            6 => {
                let y1 = at(1, ps);
                let y3 = at(3, ps);
                0.8 * (1.0 + 3.0 * y1 * y1).ln() - 0.6 * (1.0 + 3.0 * y3 * y3).ln() + w
            }
            8 => {
                let y1 = at(1, ps);
                let y3 = at(3, ps);
                (0.5 - 1.1 * (-50.0 * y1 * y1).exp()) * y1
                    + (0.3 - 0.5 * (-50.0 * y3 * y3).exp()) * y3
                    + w
            }
            9 | 12 => {
                let y1 = at(1, ps);
                let y2 = at(2, ps);
                0.3 * y1
                    + 0.6 * y2
                    + (0.1 - 0.9 * y1 + 0.8 * y2) / (1.0 + (-10.0 * y1).exp())
                    + w
            }
            10 => {
                let y1 = at(1, ps);
                sign(y1) + w
            }
            11 => {
                let y1 = at(1, ps);
                0.8 * y1 - 0.8 * y1 / (1.0 + (-10.0 * y1).exp()) + w
            }
            13 => {
                let y1 = at(1, ps);
                let y2 = at(2, ps);
                0.38 * y1 * (1.0 - y2) + w
            }
            14 => {
                let y1 = at(1, ps);
                let base = if y1 < 1.0 { -0.5 * y1 } else { 0.4 * y1 };
                if noise_on_p14 {
                    base + w
                } else {
                    base
                }
            }
            15 => {
                let y1 = at(1, ps);
                if y1.abs() < 1.0 {
                    0.9 * y1 + w
                } else {
                    -0.3 * y1 + w
                }
            }
            16 => {
                let y1 = at(1, ps);
                if regime == 1 {
                    -0.5 * y1 + w
                } else {
                    0.4 * y1 + w
                }
            }
            18 => 0.9 * at(1, ps) + w,
            19 => 0.4 * at(2, ps) + 0.6 * at(3, ps) + w,
            other => {
                return Err(Error::InvalidConfig(format!(
                    "process {other} is not available"
                )))
            }
        };
    }
    Ok(out)
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Ground-truth temporal graph: one edge (parent, lag, child) per parent and
/// per lag appearing in the process formula.
pub fn build_truth(process_id: u8, parent_sets: &[Vec<usize>]) -> Result<TemporalGraph> {
    let lags = process_lags(process_id)?;
    let mut g = TemporalGraph::new(parent_sets.len());
    for (j, ps) in parent_sets.iter().enumerate() {
        for &p in ps {
            for &lag in lags {
                g.add_edge(p, lag, j)?;
            }
        }
    }
    Ok(g)
}

/// 64-bit finalizer (splitmix64): bijective, breaks up additive structure.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Generates one stable instance. Unstable draws are regenerated with a
/// fresh derived seed, up to a retry cap.
pub fn generate(config: &GenConfig) -> Result<GeneratedInstance> {
    config.validate()?;
    for attempt in 0..RETRY_CAP {
        // hash-mixed so the retry sequences of nearby base seeds never
        // scan overlapping seed windows
        let seed = splitmix64(
            config
                .seed
                .wrapping_add((attempt as u64).wrapping_mul(0x9e3779b97f4a7c15)),
        );
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let parent_sets = sample_parent_sets(
            config.n_vars,
            config.max_parents,
            config.force_self_parent,
            &mut rng,
        );
        if let Some(series) = try_simulate(config, &parent_sets, &mut rng)? {
            let truth = build_truth(config.process_id, &parent_sets)?;
            let names = (0..config.n_vars).map(|i| format!("z{i}")).collect();
            let series = TimeSeriesMatrix::new(series, names)?;
            return Ok(GeneratedInstance {
                series,
                truth,
                parent_sets,
                config: config.clone(),
            });
        }
    }
    Err(Error::UnstableProcess(RETRY_CAP))
}

fn try_simulate<R: Rng>(
    config: &GenConfig,
    parent_sets: &[Vec<usize>],
    rng: &mut R,
) -> Result<Option<Array2<f64>>> {
    let n = config.n_vars;
    let t_total = config.timesteps;
    let depth = max_process_lag(config.process_id)?;
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(t_total);
    for _ in 0..depth.min(t_total) {
        rows.push((0..n).map(|_| rng.gen_range(-1.0..1.0)).collect());
    }
    // process 16 regime: x_0 = 1, x_{t+1} = 1 - x_t, indexed by current time
    while rows.len() < t_total {
        let t = rows.len() - 1;
        let regime = if t % 2 == 0 { 1 } else { 0 };
        let noise_row: Vec<f64> = (0..n)
            .map(|_| config.noise_scale * config.noise_kind.sample(rng))
            .collect();
        let next = step(
            config.process_id,
            &rows,
            parent_sets,
            &noise_row,
            regime,
            config.noise_on_p14,
        )?;
        if next
            .iter()
            .any(|v| !v.is_finite() || v.abs() > config.stability_threshold)
        {
            return Ok(None);
        }
        rows.push(next);
    }
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    Ok(Some(
        Array2::from_shape_vec((t_total, n), flat)
            .map_err(|e| Error::ShapeMismatch(e.to_string()))?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn parent_sets_respect_bounds_and_determinism() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let sets = sample_parent_sets(5, 2, false, &mut rng);
        assert_eq!(sets.len(), 5);
        for s in &sets {
            assert!(!s.is_empty() && s.len() <= 2);
            assert!(s.iter().all(|&p| p < 5));
        }
        let mut rng2 = ChaCha8Rng::seed_from_u64(5);
        assert_eq!(sets, sample_parent_sets(5, 2, false, &mut rng2));

        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let sets = sample_parent_sets(1, 2, false, &mut rng);
        assert_eq!(sets, vec![vec![0]]);

        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for (j, s) in sample_parent_sets(6, 2, true, &mut rng).iter().enumerate() {
            assert!(s.contains(&j));
        }
    }

    #[test]
    fn step_matches_hand_evaluations() {
        let ps = vec![vec![0]];
        // process 18: 0.9 * mean(1.0) = 0.9
        let out = step(18, &[vec![1.0]], &ps, &[0.0], 0, true).unwrap();
        assert_abs_diff_eq!(out[0], 0.9, epsilon = 1e-15);
        // process 10: sign(-0.5) = -1
        let out = step(10, &[vec![-0.5]], &ps, &[0.0], 0, true).unwrap();
        assert_abs_diff_eq!(out[0], -1.0, epsilon = 1e-15);
        // process 19: 0.4*0.5 + 0.6*1.0 = 0.8 (lag-2 mean 0.5, lag-3 mean 1.0)
        let out = step(19, &[vec![1.0], vec![0.5], vec![9.9]], &ps, &[0.0], 0, true).unwrap();
        assert_abs_diff_eq!(out[0], 0.8, epsilon = 1e-15);
        // process 1 with both parent means at -0.5:
        // -0.4*(3-0.25)/(1+0.25) + 0.6*(3-(-1)^3)/(1+1)
        let out = step(1, &[vec![-0.5], vec![-0.5]], &ps, &[0.0], 0, true).unwrap();
        let expected = -0.4 * (3.0 - 0.25) / 1.25 + 0.6 * (3.0 - (-1.0f64).powi(3)) / 2.0;
        assert_abs_diff_eq!(out[0], expected, epsilon = 1e-15);
    }

    #[test]
    fn step_requires_history_depth() {
        let ps = vec![vec![0]];
        assert!(matches!(
            step(19, &[vec![1.0]], &ps, &[0.0], 0, true),
            Err(Error::InsufficientHistory { .. })
        ));
    }

    #[test]
    fn truth_lags_follow_process_formulas() {
        let g = build_truth(18, &[vec![0], vec![0]]).unwrap();
        assert!(g.contains(0, 1, 1));
        assert_eq!(g.len(), 2);

        let g = build_truth(19, &[vec![0], vec![1], vec![0]]).unwrap();
        assert!(g.contains(0, 2, 2) && g.contains(0, 3, 2));

        let g = build_truth(3, &[vec![1], vec![1]]).unwrap();
        assert!(g.contains(1, 2, 0) && g.contains(1, 3, 0));

        for &p in VALID_PROCESSES.iter() {
            let g = build_truth(p, &[vec![0]]).unwrap();
            assert!(g.max_lag() <= 4);
        }
    }

    #[test]
    fn generation_is_deterministic_and_stable() {
        let cfg = GenConfig::new(18, NoiseKind::Gaussian, 77);
        let a = generate(&cfg).unwrap();
        let b = generate(&cfg).unwrap();
        assert_eq!(a.series, b.series);
        assert_eq!(a.truth, b.truth);
        assert_eq!(a.series.timesteps(), 250);
        assert_eq!(a.series.n_vars(), 5);
        let max = a
            .series
            .values
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(max <= 1e6);
    }

    #[test]
    fn all_processes_generate() {
        for &p in VALID_PROCESSES.iter() {
            for kind in [NoiseKind::Gaussian, NoiseKind::Laplace, NoiseKind::Uniform] {
                let mut cfg = GenConfig::new(p, kind, 1234 + p as u64);
                cfg.timesteps = 60;
                let inst = generate(&cfg).expect("generation failed");
                assert_eq!(inst.series.timesteps(), 60);
            }
        }
    }

    #[test]
    fn zero_noise_p18_decays_geometrically() {
        // every variable its own sole parent, constant start c
        let ps = vec![vec![0], vec![1]];
        let c = 0.8;
        let mut rows = vec![vec![c, c]];
        for _ in 0..20 {
            let next = step(18, &rows, &ps, &[0.0, 0.0], 0, true).unwrap();
            rows.push(next);
        }
        for (t, row) in rows.iter().enumerate() {
            let expected = 0.9f64.powi(t as i32) * c;
            assert_abs_diff_eq!(row[0], expected, epsilon = 1e-12);
        }
    }

    #[test]
    fn process_17_rejected() {
        let cfg = GenConfig::new(17, NoiseKind::Gaussian, 1);
        assert!(matches!(generate(&cfg), Err(Error::InvalidConfig(_))));
    }
}
