//! Shared data model: time-series container, temporal graph, lagged
//! reshaping, candidate-link enumeration and the temporal Markov Blanket.

use std::collections::BTreeSet;
use std::io::{Read, Write};
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::Result;

/// A T x N grid of observations, one row per timestep.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesMatrix {
    pub values: Array2<f64>,
    pub var_names: Vec<String>,
}

impl TimeSeriesMatrix {
    pub fn new(values: Array2<f64>, var_names: Vec<String>) -> Result<Self> {
        let (t, n) = values.dim();
        if t < 2 || n < 1 {
            return Err(Error::DegenerateInput(format!(
                "need T >= 2 and N >= 1, got T={t}, N={n}"
            )));
        }
        if var_names.len() != n {
            return Err(Error::ShapeMismatch(format!(
                "{} names for {} columns",
                var_names.len(),
                n
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::DegenerateInput("non-finite value".into()));
        }
        Ok(Self { values, var_names })
    }

    pub fn timesteps(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_vars(&self) -> usize {
        self.values.ncols()
    }

    /// Rejects series containing a constant column. Zero variance breaks
    /// standardization and the rank structure of the k-NN MI estimator, so
    /// such inputs are refused before descriptor extraction.
    pub fn check_nondegenerate(&self) -> Result<()> {
        for (c, col) in self.values.columns().into_iter().enumerate() {
            let first = col[0];
            if col.iter().all(|&v| v == first) {
                return Err(Error::DegenerateInput(format!(
                    "column {} ({}) is constant",
                    c, self.var_names[c]
                )));
            }
        }
        Ok(())
    }

    /// CSV format: header row of variable names, one row per timestep.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let var_names: Vec<String> = rdr
            .headers()?
            .iter()
            .map(|s| s.trim().to_string())
            .collect();
        let n = var_names.len();
        let mut rows: Vec<f64> = Vec::new();
        let mut t = 0usize;
        for record in rdr.records() {
            let record = record?;
            if record.len() != n {
                return Err(Error::ShapeMismatch(format!(
                    "row {} has {} fields, expected {}",
                    t + 1,
                    record.len(),
                    n
                )));
            }
            for field in record.iter() {
                let v: f64 = field.trim().parse().map_err(|_| {
                    Error::DegenerateInput(format!("unparseable value '{field}' in row {t}"))
                })?;
                rows.push(v);
            }
            t += 1;
        }
        let values = Array2::from_shape_vec((t, n), rows)
            .map_err(|e| Error::ShapeMismatch(e.to_string()))?;
        Self::new(values, var_names)
    }

    pub fn read_csv_path(path: &Path) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(&self.var_names)?;
        for row in self.values.rows() {
            wtr.write_record(row.iter().map(|v| format!("{v}")))?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// A lagged causal edge: `cause` at lag `lag` influences `effect` now.
pub type Edge = (usize, usize, usize);

/// Set of lagged causal edges over `n_vars` variables. Ground truth and
/// predictions share this shape.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemporalGraph {
    pub n_vars: usize,
    edges: BTreeSet<Edge>,
}

#[derive(Serialize, Deserialize)]
struct TemporalGraphWire {
    n_vars: usize,
    edges: Vec<(usize, usize, usize)>,
}

impl TemporalGraph {
    pub fn new(n_vars: usize) -> Self {
        Self {
            n_vars,
            edges: BTreeSet::new(),
        }
    }

    /// Inserts an edge; lag must be >= 1 (contemporaneous links excluded).
    pub fn add_edge(&mut self, cause: usize, lag: usize, effect: usize) -> Result<()> {
        if lag < 1 {
            return Err(Error::InvalidLag(format!(
                "edge ({cause},{lag},{effect}) has lag < 1"
            )));
        }
        if cause >= self.n_vars || effect >= self.n_vars {
            return Err(Error::ShapeMismatch(format!(
                "edge ({cause},{lag},{effect}) out of range for {} variables",
                self.n_vars
            )));
        }
        self.edges.insert((cause, lag, effect));
        Ok(())
    }

    pub fn contains(&self, cause: usize, lag: usize, effect: usize) -> bool {
        self.edges.contains(&(cause, lag, effect))
    }

    pub fn edges(&self) -> impl Iterator<Item = &Edge> {
        self.edges.iter()
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn max_lag(&self) -> usize {
        self.edges.iter().map(|e| e.1).max().unwrap_or(0)
    }

    pub fn to_json(&self) -> Result<String> {
        // canonical order: (effect, cause, lag)
        let mut edges: Vec<Edge> = self.edges.iter().copied().collect();
        edges.sort_by_key(|&(c, l, e)| (e, c, l));
        Ok(serde_json::to_string_pretty(&TemporalGraphWire {
            n_vars: self.n_vars,
            edges,
        })?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let wire: TemporalGraphWire = serde_json::from_str(s)?;
        let mut g = TemporalGraph::new(wire.n_vars);
        for (c, l, e) in wire.edges {
            g.add_edge(c, l, e)?;
        }
        Ok(g)
    }
}

/// An ordered lagged pair `z_cause^(t-lag) -> z_effect^(t)`, the unit of
/// classification. Self-links (cause == effect) are legal at lag >= 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CandidateLink {
    pub cause: usize,
    pub lag: usize,
    pub effect: usize,
}

/// Deterministic candidate enumeration: effect-major, then cause, then lag
/// ascending. Exactly N*N*L links.
pub fn enumerate_candidates(n_vars: usize, max_lag: usize) -> Vec<CandidateLink> {
    let mut out = Vec::with_capacity(n_vars * n_vars * max_lag);
    for effect in 0..n_vars {
        for cause in 0..n_vars {
            for lag in 1..=max_lag {
                out.push(CandidateLink { cause, lag, effect });
            }
        }
    }
    out
}

/// Reference to a realized series of the lagged dataset. `lag` in [0, L]
/// names a stored column; `lag == -1` is the one-step-ahead value realized by
/// an up-shift of the lag-0 column; `lag > L` is realized by a down-shift of
/// the lag-L column. Shifted realizations lose boundary rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SeriesRef {
    pub var: usize,
    pub lag: isize,
}

impl SeriesRef {
    pub fn col(var: usize, lag: usize) -> Self {
        Self {
            var,
            lag: lag as isize,
        }
    }
}

/// Temporal Markov Blanket of a lagged column: the same variable one step
/// earlier (parent) and one step later (child).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TemporalMB {
    pub parent: SeriesRef,
    pub child: SeriesRef,
}

impl TemporalMB {
    pub fn members(&self) -> [SeriesRef; 2] {
        [self.parent, self.child]
    }
}

/// The (T-L) x (N*(L+1)) flattened representation. Column (v, lag a) at row r
/// equals the original series at timestep r + L - a.
#[derive(Debug, Clone)]
pub struct LaggedDataset {
    pub matrix: Array2<f64>,
    pub n_vars: usize,
    pub max_lag: usize,
}

impl LaggedDataset {
    pub fn rows(&self) -> usize {
        self.matrix.nrows()
    }

    /// Column index of (var, lag): lag-0 block first, then lag-1, ..., lag-L;
    /// original variable order within each block.
    pub fn col_of(&self, var: usize, lag: usize) -> Result<usize> {
        if var >= self.n_vars || lag > self.max_lag {
            return Err(Error::ColumnNotFound { var, lag });
        }
        Ok(lag * self.n_vars + var)
    }

    /// Inverse of `col_of`.
    pub fn var_lag_of(&self, col: usize) -> (usize, usize) {
        (col % self.n_vars, col / self.n_vars)
    }

    /// Valid row range [lo, hi] (inclusive) for a series reference.
    pub fn valid_range(&self, r: SeriesRef) -> (usize, usize) {
        let rows = self.rows() as isize;
        let l = self.max_lag as isize;
        let lo = (r.lag - l).max(0);
        let hi = (rows - 1 + r.lag.min(0)).max(lo);
        (lo as usize, hi as usize)
    }

    /// Value of a series reference at lagged-dataset row r. Caller must stay
    /// within `valid_range`.
    pub fn value(&self, r: SeriesRef, row: usize) -> f64 {
        let l = self.max_lag as isize;
        if r.lag >= 0 && r.lag <= l {
            self.matrix[(row, r.lag as usize * self.n_vars + r.var)]
        } else if r.lag < 0 {
            // up-shift of the lag-0 column
            let shift = (-r.lag) as usize;
            self.matrix[(row + shift, r.var)]
        } else {
            // down-shift of the lag-L column
            let shift = (r.lag - l) as usize;
            self.matrix[(row - shift, self.max_lag * self.n_vars + r.var)]
        }
    }

    /// Materializes a series reference over [lo, hi].
    pub fn slice(&self, r: SeriesRef, lo: usize, hi: usize) -> Vec<f64> {
        (lo..=hi).map(|row| self.value(r, row)).collect()
    }

    /// Temporal MB of column (var, a): parent at lag a+1, child at lag a-1.
    /// Missing boundary neighbors are realized by a one-row shift of the
    /// nearest existing column (see `SeriesRef`).
    pub fn temporal_mb(&self, var: usize, lag: usize) -> Result<TemporalMB> {
        if var >= self.n_vars || lag > self.max_lag {
            return Err(Error::ColumnNotFound { var, lag });
        }
        Ok(TemporalMB {
            parent: SeriesRef {
                var,
                lag: lag as isize + 1,
            },
            child: SeriesRef {
                var,
                lag: lag as isize - 1,
            },
        })
    }
}

/// Creates the lagged representation of a series with maximum lag L.
pub fn reshape_lagged(ts: &TimeSeriesMatrix, max_lag: usize) -> Result<LaggedDataset> {
    let t = ts.timesteps();
    let n = ts.n_vars();
    if max_lag < 1 || max_lag >= t {
        return Err(Error::InvalidLag(format!(
            "need 1 <= L < T, got L={max_lag}, T={t}"
        )));
    }
    let rows = t - max_lag;
    let mut matrix = Array2::zeros((rows, n * (max_lag + 1)));
    for a in 0..=max_lag {
        for v in 0..n {
            for r in 0..rows {
                matrix[(r, a * n + v)] = ts.values[(r + max_lag - a, v)];
            }
        }
    }
    Ok(LaggedDataset {
        matrix,
        n_vars: n,
        max_lag,
    })
}
