//! Unrolled temporal DAGs for three canonical two-variable scenarios and
//! exact counting of open (d-connecting) simple paths, used to quantify the
//! forward/backward asymmetry of lagged conditional-independence queries.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::Result;

/// Variable index: 0 = the source series, 1 = the target series, 2 = the
/// confounder (scenario 3 only).
pub const VAR_I: u8 = 0;
pub const VAR_J: u8 = 1;
pub const VAR_L: u8 = 2;

pub type Node = (u8, i32);

#[derive(Debug, Clone)]
pub struct UnrolledDag {
    pub nodes: BTreeSet<Node>,
    pub edges: BTreeSet<(Node, Node)>,
}

#[derive(Debug, Clone)]
pub struct PathQuery {
    pub src: Node,
    pub dst: Node,
    pub conditioning: BTreeSet<Node>,
}

/// One row of the asymmetry table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AsymmetryRow {
    pub k: usize,
    pub forward: u64,
    pub backward: u64,
    pub delta: i64,
}

/// Known reference counts over the [-10, 10] window, used by callers to
/// cross-check emitted tables (scenario, then forward/backward rows for
/// k = 1..9).
pub const REFERENCE_FORWARD: [[u64; 9]; 3] = [
    [1, 2, 3, 4, 5, 6, 7, 8, 9],
    [370, 228, 324, 320, 374, 408, 469, 529, 615],
    [1186, 880, 1138, 1123, 1187, 1209, 1234, 1245, 1271],
];
pub const REFERENCE_BACKWARD: [[u64; 9]; 3] = [
    [0, 0, 0, 0, 0, 0, 0, 0, 0],
    [312, 153, 227, 183, 194, 176, 152, 125, 71],
    [898, 502, 701, 580, 596, 534, 479, 403, 290],
];

/// Builds the unrolled DAG of a scenario over an inclusive time window.
///
/// Scenario 1: self-chains on both series plus the cross edge
/// z_i^(s) -> z_j^(s+1). Scenario 2 adds the two-step self-influences
/// z^(s-1) -> z^(s+1) on both series. Scenario 3 adds a confounder chain
/// feeding both series.
pub fn build_scenario(id: u8, window: (i32, i32)) -> Result<UnrolledDag> {
    let (lo, hi) = window;
    if lo > hi {
        return Err(Error::InvalidConfig(format!("empty window [{lo}, {hi}]")));
    }
    if !(1..=3).contains(&id) {
        return Err(Error::InvalidConfig(format!("unknown scenario {id}")));
    }
    let mut nodes = BTreeSet::new();
    let mut edges = BTreeSet::new();
    for s in lo..=hi {
        nodes.insert((VAR_I, s));
        nodes.insert((VAR_J, s));
        if id == 3 {
            nodes.insert((VAR_L, s));
        }
    }
    for s in lo..hi {
        edges.insert(((VAR_I, s), (VAR_I, s + 1)));
        edges.insert(((VAR_J, s), (VAR_J, s + 1)));
        edges.insert(((VAR_I, s), (VAR_J, s + 1)));
        if id == 3 {
            edges.insert(((VAR_L, s), (VAR_L, s + 1)));
            edges.insert(((VAR_L, s), (VAR_I, s + 1)));
            edges.insert(((VAR_L, s), (VAR_J, s + 1)));
        }
    }
    if id == 2 {
        for s in lo + 1..hi {
            edges.insert(((VAR_I, s - 1), (VAR_I, s + 1)));
            edges.insert(((VAR_J, s - 1), (VAR_J, s + 1)));
        }
    }
    Ok(UnrolledDag { nodes, edges })
}

/// Number of simple undirected paths from `src` to `dst` that are
/// d-connecting given the conditioning set: every non-collider on the path
/// is unconditioned, and every collider has itself or a descendant in the
/// conditioning set.
pub fn count_open_paths(dag: &UnrolledDag, q: &PathQuery) -> Result<u64> {
    if q.src == q.dst {
        return Err(Error::InvalidConfig("src == dst".into()));
    }
    if q.conditioning.contains(&q.src) || q.conditioning.contains(&q.dst) {
        return Err(Error::InvalidConfig(
            "conditioning set must exclude the endpoints".into(),
        ));
    }
    if !dag.nodes.contains(&q.src) || !dag.nodes.contains(&q.dst) {
        return Err(Error::InvalidConfig("query node outside the DAG".into()));
    }

    // adjacency with orientation: (neighbor, true if edge leaves this node)
    let mut adj: BTreeMap<Node, Vec<(Node, bool)>> = BTreeMap::new();
    for &(a, b) in &dag.edges {
        adj.entry(a).or_default().push((b, true));
        adj.entry(b).or_default().push((a, false));
    }

    // nodes with themselves or a descendant in the conditioning set:
    // reverse reachability from the conditioned nodes
    let mut anc_of_z: BTreeSet<Node> = q.conditioning.clone();
    let mut queue: VecDeque<Node> = q.conditioning.iter().copied().collect();
    while let Some(n) = queue.pop_front() {
        if let Some(neigh) = adj.get(&n) {
            for &(m, outgoing) in neigh {
                // m -> n means m is an ancestor
                if !outgoing && anc_of_z.insert(m) {
                    queue.push_back(m);
                }
            }
        }
    }

    // Exact pruning: edges point forward in time, so a path node at a local
    // time maximum is a collider. Any node later than src, dst and every
    // member of anc_of_z therefore blocks whichever path visits it, and the
    // search can skip such nodes outright.
    let max_time = anc_of_z
        .iter()
        .map(|&(_, t)| t)
        .chain([q.src.1, q.dst.1])
        .max()
        .unwrap();

    let mut visited: BTreeSet<Node> = BTreeSet::new();
    visited.insert(q.src);
    let mut count = 0u64;
    dfs(
        q.src, None, &adj, q, &anc_of_z, max_time, &mut visited, &mut count,
    );
    Ok(count)
}

/// `into_curr` is the orientation of the edge we arrived by (true if it
/// points into the current node); None at the source endpoint.
#[allow(clippy::too_many_arguments)]
fn dfs(
    curr: Node,
    into_curr: Option<bool>,
    adj: &BTreeMap<Node, Vec<(Node, bool)>>,
    q: &PathQuery,
    anc_of_z: &BTreeSet<Node>,
    max_time: i32,
    visited: &mut BTreeSet<Node>,
    count: &mut u64,
) {
    let Some(neighbors) = adj.get(&curr) else {
        return;
    };
    for &(next, outgoing) in neighbors {
        if next.1 > max_time {
            continue;
        }
        if let Some(inc) = into_curr {
            // role of curr between the incoming edge and this outgoing edge
            let collider = inc && !outgoing;
            let open = if collider {
                anc_of_z.contains(&curr)
            } else {
                !q.conditioning.contains(&curr)
            };
            if !open {
                continue;
            }
        }
        if next == q.dst {
            *count += 1;
            continue;
        }
        if visited.contains(&next) {
            continue;
        }
        visited.insert(next);
        dfs(
            next,
            Some(outgoing),
            adj,
            q,
            anc_of_z,
            max_time,
            visited,
            count,
        );
        visited.remove(&next);
    }
}

/// Forward and backward open-path counts for lags 1..=k_max. The forward
/// query asks for paths from z_i^(-k) to z_j^(0) given z_j^(-k); the
/// backward query swaps the roles of the two series.
pub fn asymmetry_table(scenario: u8, k_max: usize) -> Result<Vec<AsymmetryRow>> {
    let dag = build_scenario(scenario, (-10, 10))?;
    let mut rows = Vec::with_capacity(k_max);
    for k in 1..=k_max {
        let kk = k as i32;
        let forward = count_open_paths(
            &dag,
            &PathQuery {
                src: (VAR_I, -kk),
                dst: (VAR_J, 0),
                conditioning: [(VAR_J, -kk)].into_iter().collect(),
            },
        )?;
        let backward = count_open_paths(
            &dag,
            &PathQuery {
                src: (VAR_J, -kk),
                dst: (VAR_I, 0),
                conditioning: [(VAR_I, -kk)].into_iter().collect(),
            },
        )?;
        rows.push(AsymmetryRow {
            k,
            forward,
            backward,
            delta: forward as i64 - backward as i64,
        });
    }
    Ok(rows)
}
