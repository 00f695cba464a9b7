//! Nearest-neighbor search under the Chebyshev (max-norm) metric.
//!
//! Backs the k-NN mutual information estimator: k-th neighbor distances in
//! the joint space and strict range counts in the marginal spaces. Points
//! are dense rows of a flat buffer. Small inputs fall back to brute force;
//! one-dimensional spaces use a sorted array.

/// Below this many points a linear scan beats the tree.
const BRUTE_FORCE_LIMIT: usize = 64;

enum Backend {
    /// (value, original index), sorted by value.
    Sorted1d(Vec<(f64, usize)>),
    Brute,
    KdTree(KdTree),
}

pub struct ChebyshevIndex {
    data: Vec<f64>,
    dim: usize,
    len: usize,
    backend: Backend,
}

impl ChebyshevIndex {
    /// `data` holds `len` points of `dim` coordinates each, row-major.
    pub fn new(data: Vec<f64>, dim: usize) -> Self {
        assert!(dim > 0 && data.len() % dim == 0);
        let len = data.len() / dim;
        let backend = if dim == 1 {
            let mut sorted: Vec<(f64, usize)> = data.iter().copied().zip(0..len).collect();
            sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
            Backend::Sorted1d(sorted)
        } else if len < BRUTE_FORCE_LIMIT {
            Backend::Brute
        } else {
            Backend::KdTree(KdTree::build(&data, dim, len))
        };
        Self {
            data,
            dim,
            len,
            backend,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    fn point(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    fn dist(&self, a: usize, q: &[f64]) -> f64 {
        chebyshev(self.point(a), q)
    }

    /// Chebyshev distance from point `idx` to its k-th nearest other point.
    pub fn kth_neighbor_distance(&self, idx: usize, k: usize) -> f64 {
        debug_assert!(k < self.len);
        let q = self.point(idx).to_vec();
        match &self.backend {
            Backend::Sorted1d(_) | Backend::Brute => {
                // k+1 smallest distances including self (distance 0)
                let mut best = BoundedDistances::new(k + 1);
                for i in 0..self.len {
                    best.push(self.dist(i, &q));
                }
                best.max()
            }
            Backend::KdTree(tree) => {
                let mut best = BoundedDistances::new(k + 1);
                tree.knn(&self.data, self.dim, &q, &mut best);
                best.max()
            }
        }
    }

    /// Number of points strictly within `eps` of point `idx`, excluding the
    /// point itself.
    pub fn count_within_strict(&self, idx: usize, eps: f64) -> usize {
        let q = self.point(idx).to_vec();
        let total = match &self.backend {
            Backend::Sorted1d(sorted) => {
                let v = q[0];
                let lo = sorted.partition_point(|&(x, _)| x <= v - eps);
                let hi = sorted.partition_point(|&(x, _)| x < v + eps);
                hi - lo
            }
            Backend::Brute => (0..self.len).filter(|&i| self.dist(i, &q) < eps).count(),
            Backend::KdTree(tree) => tree.count_within(&self.data, self.dim, &q, eps),
        };
        // self sits at distance 0
        total.saturating_sub(1)
    }
}

fn chebyshev(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Keeps the `cap` smallest distances seen so far.
struct BoundedDistances {
    cap: usize,
    heap: Vec<f64>, // unsorted, max tracked linearly; cap is tiny (k+1)
}

impl BoundedDistances {
    fn new(cap: usize) -> Self {
        Self {
            cap,
            heap: Vec::with_capacity(cap),
        }
    }

    fn push(&mut self, d: f64) {
        if self.heap.len() < self.cap {
            self.heap.push(d);
        } else if d < self.max() {
            let (mi, _) = self
                .heap
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .unwrap();
            self.heap[mi] = d;
        }
    }

    fn max(&self) -> f64 {
        self.heap.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    fn full(&self) -> bool {
        self.heap.len() == self.cap
    }
}

/// Classic median-split k-d tree over an index permutation.
struct KdTree {
    /// permutation of point indices; subtrees are contiguous ranges
    perm: Vec<u32>,
    nodes: Vec<KdNode>,
}

struct KdNode {
    axis: u8,
    split: f64,
    // children as node indices; u32::MAX = leaf range [start, end)
    left: u32,
    right: u32,
    start: u32,
    end: u32,
}

const LEAF_SIZE: usize = 16;
const NIL: u32 = u32::MAX;

impl KdTree {
    fn build(data: &[f64], dim: usize, len: usize) -> Self {
        let mut perm: Vec<u32> = (0..len as u32).collect();
        let mut nodes = Vec::new();
        build_node(data, dim, &mut perm, 0, len, 0, &mut nodes);
        KdTree { perm, nodes }
    }

    fn knn(&self, data: &[f64], dim: usize, q: &[f64], best: &mut BoundedDistances) {
        self.knn_node(0, data, dim, q, best);
    }

    fn knn_node(&self, node: u32, data: &[f64], dim: usize, q: &[f64], best: &mut BoundedDistances) {
        let n = &self.nodes[node as usize];
        if n.left == NIL {
            for &pi in &self.perm[n.start as usize..n.end as usize] {
                let p = &data[pi as usize * dim..(pi as usize + 1) * dim];
                best.push(chebyshev(p, q));
            }
            return;
        }
        let delta = q[n.axis as usize] - n.split;
        let (near, far) = if delta <= 0.0 {
            (n.left, n.right)
        } else {
            (n.right, n.left)
        };
        self.knn_node(near, data, dim, q, best);
        if !best.full() || delta.abs() < best.max() {
            self.knn_node(far, data, dim, q, best);
        }
    }

    fn count_within(&self, data: &[f64], dim: usize, q: &[f64], eps: f64) -> usize {
        self.count_node(0, data, dim, q, eps)
    }

    fn count_node(&self, node: u32, data: &[f64], dim: usize, q: &[f64], eps: f64) -> usize {
        let n = &self.nodes[node as usize];
        if n.left == NIL {
            return self.perm[n.start as usize..n.end as usize]
                .iter()
                .filter(|&&pi| {
                    let p = &data[pi as usize * dim..(pi as usize + 1) * dim];
                    chebyshev(p, q) < eps
                })
                .count();
        }
        let delta = q[n.axis as usize] - n.split;
        let mut total = 0;
        if delta < eps {
            total += self.count_node(n.left, data, dim, q, eps);
        }
        if -delta < eps {
            total += self.count_node(n.right, data, dim, q, eps);
        }
        total
    }
}

fn build_node(
    data: &[f64],
    dim: usize,
    perm: &mut [u32],
    start: usize,
    end: usize,
    depth: usize,
    nodes: &mut Vec<KdNode>,
) -> u32 {
    let id = nodes.len() as u32;
    if end - start <= LEAF_SIZE {
        nodes.push(KdNode {
            axis: 0,
            split: 0.0,
            left: NIL,
            right: NIL,
            start: start as u32,
            end: end as u32,
        });
        return id;
    }
    let axis = depth % dim;
    let mid = (start + end) / 2;
    perm[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
        data[a as usize * dim + axis].total_cmp(&data[b as usize * dim + axis])
    });
    let split = data[perm[mid] as usize * dim + axis];
    nodes.push(KdNode {
        axis: axis as u8,
        split,
        left: NIL,
        right: NIL,
        start: start as u32,
        end: end as u32,
    });
    let left = build_node(data, dim, perm, start, mid, depth + 1, nodes);
    let right = build_node(data, dim, perm, mid, end, depth + 1, nodes);
    nodes[id as usize].left = left;
    nodes[id as usize].right = right;
    id
}
