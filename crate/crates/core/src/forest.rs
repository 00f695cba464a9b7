//! Random forest for binary classification with balanced per-tree
//! bootstraps, written against flat feature rows. Trees are fully grown
//! CART trees with Gini splits; the predicted score is the mean leaf
//! positive fraction across trees.

use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::Result;

const MODEL_MAGIC: &[u8; 4] = b"BRFM";
const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_trees: usize,
    /// 0 = unlimited depth.
    pub max_depth: usize,
    pub min_samples_split: usize,
    /// 0 = ceil(sqrt(n_features)).
    pub features_per_split: usize,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_depth: 0,
            min_samples_split: 2,
            features_per_split: 0,
            seed: 0,
        }
    }
}

impl ForestConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees < 1 {
            return Err(Error::InvalidConfig("n_trees must be >= 1".into()));
        }
        if self.min_samples_split < 2 {
            return Err(Error::InvalidConfig("min_samples_split must be >= 2".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Node {
    feature: u32,
    threshold: f64,
    /// child node ids; leaves use u32::MAX and carry the positive fraction
    left: u32,
    right: u32,
    value: f64,
}

const LEAF: u32 = u32::MAX;

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    fn predict(&self, row: &[f64]) -> f64 {
        let mut id = 0usize;
        loop {
            let n = &self.nodes[id];
            if n.left == LEAF {
                return n.value;
            }
            id = if row[n.feature as usize] <= n.threshold {
                n.left as usize
            } else {
                n.right as usize
            };
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ForestModel {
    pub config: ForestConfig,
    pub feature_names: Vec<String>,
    /// Decision threshold on the positive score, when one has been selected.
    pub threshold: Option<f64>,
    /// Arbitrary provenance metadata carried with the model (extraction
    /// settings and the like).
    pub metadata: serde_json::Value,
    trees: Vec<Tree>,
    importances: Vec<f64>,
}

impl ForestModel {
    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    /// Normalized mean-impurity-decrease importance, one entry per feature,
    /// summing to 1 (all zeros if no split was ever made).
    pub fn feature_importances(&self) -> &[f64] {
        &self.importances
    }

    pub fn predict_proba(&self, row: &[f64]) -> Result<f64> {
        if row.len() != self.n_features() {
            return Err(Error::Incompatibility(format!(
                "model expects {} features, got {}",
                self.n_features(),
                row.len()
            )));
        }
        let sum: f64 = self.trees.iter().map(|t| t.predict(row)).sum();
        Ok(sum / self.trees.len() as f64)
    }

    pub fn predict_proba_many(&self, rows: &[Vec<f64>]) -> Result<Vec<f64>> {
        rows.iter().map(|r| self.predict_proba(r)).collect()
    }

    /// Binary file: magic, format version, payload length, JSON payload.
    pub fn save<W: Write>(&self, mut writer: W) -> Result<()> {
        let payload = serde_json::to_vec(self)?;
        writer.write_all(MODEL_MAGIC)?;
        writer.write_all(&MODEL_VERSION.to_le_bytes())?;
        writer.write_all(&(payload.len() as u64).to_le_bytes())?;
        writer.write_all(&payload)?;
        Ok(())
    }

    pub fn save_path(&self, path: &Path) -> Result<()> {
        self.save(std::fs::File::create(path)?)
    }

    pub fn load<R: Read>(mut reader: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        read_exact_at(&mut reader, &mut magic, 0)?;
        if &magic != MODEL_MAGIC {
            return Err(Error::Deserialize {
                offset: 0,
                reason: format!("bad magic {magic:02x?}, expected {MODEL_MAGIC:02x?}"),
            });
        }
        let mut word = [0u8; 4];
        read_exact_at(&mut reader, &mut word, 4)?;
        let version = u32::from_le_bytes(word);
        if version != MODEL_VERSION {
            return Err(Error::Deserialize {
                offset: 4,
                reason: format!("unsupported format version {version}, expected {MODEL_VERSION}"),
            });
        }
        let mut len8 = [0u8; 8];
        read_exact_at(&mut reader, &mut len8, 8)?;
        let len = u64::from_le_bytes(len8) as usize;
        let mut payload = vec![0u8; len];
        let mut filled = 0usize;
        while filled < len {
            let got = reader.read(&mut payload[filled..])?;
            if got == 0 {
                return Err(Error::Deserialize {
                    offset: 16 + filled as u64,
                    reason: format!("payload truncated: expected {len} bytes, got {filled}"),
                });
            }
            filled += got;
        }
        let model: ForestModel = serde_json::from_slice(&payload).map_err(|e| {
            Error::Deserialize {
                offset: 16 + e.column() as u64,
                reason: e.to_string(),
            }
        })?;
        if model.importances.len() != model.feature_names.len() {
            return Err(Error::Deserialize {
                offset: 16,
                reason: "importance vector length disagrees with feature names".into(),
            });
        }
        Ok(model)
    }

    pub fn load_path(path: &Path) -> Result<Self> {
        Self::load(std::fs::File::open(path)?)
    }
}

fn read_exact_at<R: Read>(reader: &mut R, buf: &mut [u8], offset: u64) -> Result<()> {
    let mut filled = 0usize;
    while filled < buf.len() {
        let got = reader.read(&mut buf[filled..])?;
        if got == 0 {
            return Err(Error::Deserialize {
                offset: offset + filled as u64,
                reason: format!("file truncated inside header field at offset {offset}"),
            });
        }
        filled += got;
    }
    Ok(())
}

/// Trains a balanced forest. Each tree draws a bootstrap of n_min samples
/// with replacement from each class, where n_min is the minority class
/// count, so every tree sees a 50/50 class mix.
pub fn train(
    rows: &[Vec<f64>],
    labels: &[u8],
    feature_names: &[String],
    config: &ForestConfig,
    metadata: serde_json::Value,
) -> Result<ForestModel> {
    config.validate()?;
    let n = rows.len();
    if n == 0 || labels.len() != n {
        return Err(Error::InvalidTrainingSet(format!(
            "{} rows, {} labels",
            n,
            labels.len()
        )));
    }
    let p = feature_names.len();
    if rows.iter().any(|r| r.len() != p) {
        return Err(Error::InvalidTrainingSet(
            "row width disagrees with feature names".into(),
        ));
    }
    if labels.iter().any(|&l| l > 1) {
        return Err(Error::InvalidTrainingSet("labels must be 0 or 1".into()));
    }
    let pos: Vec<usize> = (0..n).filter(|&i| labels[i] == 1).collect();
    let neg: Vec<usize> = (0..n).filter(|&i| labels[i] == 0).collect();
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::InvalidTrainingSet(
            "need at least one sample of each class".into(),
        ));
    }
    let n_min = pos.len().min(neg.len());
    let mtry = if config.features_per_split == 0 {
        (p as f64).sqrt().ceil() as usize
    } else {
        config.features_per_split.min(p)
    };

    let results: Vec<(Tree, Vec<f64>)> = (0..config.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(
                config.seed.wrapping_add((t as u64).wrapping_mul(0x9e3779b97f4a7c15)),
            );
            let mut sample: Vec<usize> = Vec::with_capacity(2 * n_min);
            for _ in 0..n_min {
                sample.push(pos[rng.gen_range(0..pos.len())]);
            }
            for _ in 0..n_min {
                sample.push(neg[rng.gen_range(0..neg.len())]);
            }
            let mut builder = TreeBuilder {
                rows,
                labels,
                p,
                mtry,
                max_depth: config.max_depth,
                min_samples_split: config.min_samples_split,
                nodes: Vec::new(),
                importance: vec![0.0; p],
                n_root: sample.len() as f64,
            };
            builder.grow(&mut sample, 0, &mut rng);
            (Tree { nodes: builder.nodes }, builder.importance)
        })
        .collect();

    let mut importances = vec![0.0; p];
    let mut trees = Vec::with_capacity(results.len());
    for (tree, imp) in results {
        for (a, b) in importances.iter_mut().zip(&imp) {
            *a += b;
        }
        trees.push(tree);
    }
    let total: f64 = importances.iter().sum();
    if total > 0.0 {
        for v in importances.iter_mut() {
            *v /= total;
        }
    }
    Ok(ForestModel {
        config: config.clone(),
        feature_names: feature_names.to_vec(),
        threshold: None,
        metadata,
        trees,
        importances,
    })
}

struct TreeBuilder<'a> {
    rows: &'a [Vec<f64>],
    labels: &'a [u8],
    p: usize,
    mtry: usize,
    max_depth: usize,
    min_samples_split: usize,
    nodes: Vec<Node>,
    importance: Vec<f64>,
    n_root: f64,
}

fn gini(pos: usize, total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let q = pos as f64 / total as f64;
    2.0 * q * (1.0 - q)
}

impl<'a> TreeBuilder<'a> {
    fn grow(&mut self, sample: &mut [usize], depth: usize, rng: &mut ChaCha8Rng) -> u32 {
        let id = self.nodes.len() as u32;
        let total = sample.len();
        let pos = sample.iter().filter(|&&i| self.labels[i] == 1).count();
        let value = pos as f64 / total as f64;
        self.nodes.push(Node {
            feature: 0,
            threshold: 0.0,
            left: LEAF,
            right: LEAF,
            value,
        });
        let pure = pos == 0 || pos == total;
        let depth_ok = self.max_depth == 0 || depth < self.max_depth;
        if pure || !depth_ok || total < self.min_samples_split {
            return id;
        }
        let Some((feature, threshold, decrease)) = self.best_split(sample, pos, rng) else {
            return id;
        };
        self.importance[feature] += decrease * total as f64 / self.n_root;
        // partition in place: rows with value <= threshold first
        let mut split = 0usize;
        for k in 0..total {
            if self.rows[sample[k]][feature] <= threshold {
                sample.swap(k, split);
                split += 1;
            }
        }
        debug_assert!(split > 0 && split < total);
        self.nodes[id as usize].feature = feature as u32;
        self.nodes[id as usize].threshold = threshold;
        let (left_slice, right_slice) = sample.split_at_mut(split);
        let left = self.grow(left_slice, depth + 1, rng);
        let right = self.grow(right_slice, depth + 1, rng);
        self.nodes[id as usize].left = left;
        self.nodes[id as usize].right = right;
        id
    }

    /// Best Gini split over a random feature subset. Ties break toward the
    /// lowest feature index, then the smallest threshold.
    fn best_split(
        &self,
        sample: &[usize],
        pos: usize,
        rng: &mut ChaCha8Rng,
    ) -> Option<(usize, f64, f64)> {
        let total = sample.len();
        let parent = gini(pos, total);
        // partial Fisher-Yates for mtry distinct features
        let mut feats: Vec<usize> = (0..self.p).collect();
        for k in 0..self.mtry.min(self.p) {
            let j = rng.gen_range(k..self.p);
            feats.swap(k, j);
        }
        let mut chosen: Vec<usize> = feats[..self.mtry.min(self.p)].to_vec();
        chosen.sort_unstable();

        let mut best: Option<(usize, f64, f64)> = None;
        let mut pairs: Vec<(f64, u8)> = Vec::with_capacity(total);
        for &f in &chosen {
            pairs.clear();
            pairs.extend(
                sample
                    .iter()
                    .map(|&i| (self.rows[i][f], self.labels[i])),
            );
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut left_pos = 0usize;
            for k in 0..total - 1 {
                left_pos += pairs[k].1 as usize;
                if pairs[k].0 == pairs[k + 1].0 {
                    continue;
                }
                let nl = k + 1;
                let nr = total - nl;
                let child = (nl as f64 * gini(left_pos, nl)
                    + nr as f64 * gini(pos - left_pos, nr))
                    / total as f64;
                let decrease = parent - child;
                if decrease <= 0.0 {
                    continue;
                }
                // the midpoint of two adjacent floats can round up to the
                // right value; fall back to the left value so the <=
                // partition always matches the split evaluated here
                let mut threshold = 0.5 * (pairs[k].0 + pairs[k + 1].0);
                if threshold >= pairs[k + 1].0 {
                    threshold = pairs[k].0;
                }
                let better = match best {
                    None => true,
                    Some((bf, bt, bd)) => {
                        decrease > bd
                            || (decrease == bd && (f < bf || (f == bf && threshold < bt)))
                    }
                };
                if better {
                    best = Some((f, threshold, decrease));
                }
            }
        }
        best
    }
}
