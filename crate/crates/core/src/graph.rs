//! Graph and mask data model, the masking product and min-max normalization.

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// A node-featured graph `(X, A)`.
///
/// Input graphs carry a binary adjacency. Graphs produced by [`mask_graph`]
/// may carry fractional adjacency entries; inference accepts both.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    id: Option<String>,
    features: Matrix,
    adjacency: Matrix,
    positions: Option<Matrix>,
    label: Option<usize>,
}

impl Graph {
    /// Validates `X` (N×F, F ≥ 1, N ≥ 1) and a binary N×N adjacency.
    pub fn new(features: Matrix, adjacency: Matrix) -> Result<Self> {
        let n = features.rows();
        if n == 0 {
            return Err(Error::Domain("graph must have at least one node".into()));
        }
        if features.cols() == 0 {
            return Err(Error::Domain("node features must have F >= 1".into()));
        }
        if adjacency.shape() != (n, n) {
            return Err(Error::dim(
                "adjacency",
                format!("{n}x{n}"),
                format!("{}x{}", adjacency.rows(), adjacency.cols()),
            ));
        }
        if let Some(v) = adjacency.as_slice().iter().find(|&&v| v != 0.0 && v != 1.0) {
            return Err(Error::Domain(format!("adjacency entries must be 0 or 1, found {v}")));
        }
        if !features.all_finite() {
            return Err(Error::Numeric("node features".into()));
        }
        Ok(Graph {
            id: None,
            features,
            adjacency,
            positions: None,
            label: None,
        })
    }

    pub fn with_positions(mut self, positions: Matrix) -> Result<Self> {
        if positions.shape() != (self.num_nodes(), 2) {
            return Err(Error::dim(
                "positions",
                format!("{}x2", self.num_nodes()),
                format!("{}x{}", positions.rows(), positions.cols()),
            ));
        }
        self.positions = Some(positions);
        Ok(self)
    }

    pub fn with_label(mut self, label: usize) -> Self {
        self.label = Some(label);
        self
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = Some(id.into());
        self
    }

    pub fn num_nodes(&self) -> usize {
        self.features.rows()
    }

    pub fn num_features(&self) -> usize {
        self.features.cols()
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn adjacency(&self) -> &Matrix {
        &self.adjacency
    }

    pub fn positions(&self) -> Option<&Matrix> {
        self.positions.as_ref()
    }

    pub fn label(&self) -> Option<usize> {
        self.label
    }

    pub fn id(&self) -> Option<&str> {
        self.id.as_deref()
    }

    /// Same graph with replaced features; shape must match.
    pub fn with_features(&self, features: Matrix) -> Result<Graph> {
        if features.shape() != self.features.shape() {
            return Err(Error::dim(
                "features",
                format!("{}x{}", self.features.rows(), self.features.cols()),
                format!("{}x{}", features.rows(), features.cols()),
            ));
        }
        Ok(Graph {
            features,
            ..self.clone()
        })
    }

    /// Relabels nodes so that new node `i` is old node `perm[i]`.
    pub fn permute_nodes(&self, perm: &[usize]) -> Result<Graph> {
        let n = self.num_nodes();
        let mut seen = vec![false; n];
        if perm.len() != n || perm.iter().any(|&p| p >= n || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::Domain(format!("not a permutation of 0..{n}")));
        }
        let f = self.num_features();
        let mut x = Matrix::zeros(n, f);
        let mut a = Matrix::zeros(n, n);
        for (i, &pi) in perm.iter().enumerate() {
            x.row_mut(i).copy_from_slice(self.features.row(pi));
            for (j, &pj) in perm.iter().enumerate() {
                a[(i, j)] = self.adjacency[(pi, pj)];
            }
        }
        let positions = self.positions.as_ref().map(|p| {
            let mut q = Matrix::zeros(n, 2);
            for (i, &pi) in perm.iter().enumerate() {
                q.row_mut(i).copy_from_slice(p.row(pi));
            }
            q
        });
        Ok(Graph {
            id: self.id.clone(),
            features: x,
            adjacency: a,
            positions,
            label: self.label,
        })
    }
}

/// Feature mask `M_X` (N×F) and adjacency mask `M_A` (N×N), entries in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskPair {
    feature_mask: Matrix,
    adjacency_mask: Matrix,
}

impl MaskPair {
    pub fn new(feature_mask: Matrix, adjacency_mask: Matrix) -> Result<Self> {
        let n = feature_mask.rows();
        if adjacency_mask.shape() != (n, n) {
            return Err(Error::dim(
                "adjacency_mask",
                format!("{n}x{n}"),
                format!("{}x{}", adjacency_mask.rows(), adjacency_mask.cols()),
            ));
        }
        for (name, m) in [("feature_mask", &feature_mask), ("adjacency_mask", &adjacency_mask)] {
            if let Some(v) = m.as_slice().iter().find(|v| !(0.0..=1.0).contains(*v)) {
                return Err(Error::Domain(format!("{name} entry {v} outside [0, 1]")));
            }
        }
        Ok(MaskPair {
            feature_mask,
            adjacency_mask,
        })
    }

    /// The all-ones pair, the identity of [`mask_graph`].
    pub fn ones(num_nodes: usize, num_features: usize) -> Self {
        MaskPair {
            feature_mask: Matrix::filled(num_nodes, num_features, 1.0),
            adjacency_mask: Matrix::filled(num_nodes, num_nodes, 1.0),
        }
    }

    pub fn feature_mask(&self) -> &Matrix {
        &self.feature_mask
    }

    pub fn adjacency_mask(&self) -> &Matrix {
        &self.adjacency_mask
    }
}

/// A real value per node.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeVector(Vec<f64>);

impl NodeVector {
    pub fn new(values: Vec<f64>) -> Self {
        NodeVector(values)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl From<Vec<f64>> for NodeVector {
    fn from(v: Vec<f64>) -> Self {
        NodeVector(v)
    }
}

/// `G ⋆ (M_X, M_A) = (X ∘ M_X, A ∘ M_A)`.
pub fn mask_graph(g: &Graph, m: &MaskPair) -> Result<Graph> {
    let features = g.features.hadamard(&m.feature_mask).map_err(|_| {
        Error::dim(
            "feature_mask",
            format!("{}x{}", g.num_nodes(), g.num_features()),
            format!("{}x{}", m.feature_mask.rows(), m.feature_mask.cols()),
        )
    })?;
    let adjacency = g.adjacency.hadamard(&m.adjacency_mask).map_err(|_| {
        Error::dim(
            "adjacency_mask",
            format!("{0}x{0}", g.num_nodes()),
            format!("{}x{}", m.adjacency_mask.rows(), m.adjacency_mask.cols()),
        )
    })?;
    Ok(Graph {
        features,
        adjacency,
        ..g.clone()
    })
}

/// Replicates a per-node mask across `f_dim` feature columns; the adjacency
/// mask is all ones.
pub fn broadcast_node_mask(v: &NodeVector, f_dim: usize) -> Result<MaskPair> {
    if f_dim == 0 {
        return Err(Error::Domain("feature dimension must be >= 1".into()));
    }
    if let Some(x) = v.0.iter().find(|x| !(0.0..=1.0).contains(*x)) {
        return Err(Error::Domain(format!("node mask entry {x} outside [0, 1]")));
    }
    let n = v.len();
    let mut fm = Matrix::zeros(n, f_dim);
    for (i, &x) in v.0.iter().enumerate() {
        fm.row_mut(i).fill(x);
    }
    Ok(MaskPair {
        feature_mask: fm,
        adjacency_mask: Matrix::filled(n, n, 1.0),
    })
}

/// Spread at or below this many ulps of the largest magnitude counts as
/// constant: such a spread is rounding noise, not node-level signal.
pub const FLAT_ULPS: f64 = 16.0;

/// True when `[min, max]` is constant up to rounding, see [`FLAT_ULPS`].
pub fn is_flat(min: f64, max: f64) -> bool {
    max - min <= FLAT_ULPS * f64::EPSILON * min.abs().max(max.abs())
}

/// Maps `x` to `(x - min) / (max - min)`.
///
/// A constant vector (see [`is_flat`]) maps to all zeros.
pub fn minmax_normalize(v: &NodeVector) -> Result<NodeVector> {
    if v.is_empty() {
        return Err(Error::Domain("cannot normalize an empty vector".into()));
    }
    if v.0.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numeric("vector to normalize".into()));
    }
    let min = v.0.iter().copied().fold(f64::INFINITY, f64::min);
    let max = v.0.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = max - min;
    if is_flat(min, max) {
        return Ok(NodeVector(vec![0.0; v.len()]));
    }
    // clamp guards the last-ulp overshoot of (x - min) / range
    Ok(NodeVector(
        v.0.iter().map(|x| ((x - min) / range).clamp(0.0, 1.0)).collect(),
    ))
}
