//! Forward-only inference for stacked GCN / GAT classifiers.
//!
//! The architecture is `graph layer → tanh` repeated, followed by a
//! concatenation of global average and global max pooling and a linear head.
//! The post-tanh output of the last graph layer is kept as the final feature
//! map for explanation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::matrix::Matrix;

pub const DEFAULT_LEAKY_SLOPE: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayerKind {
    Gcn,
    Gat,
    Linear,
}

impl LayerKind {
    pub fn name(self) -> &'static str {
        match self {
            LayerKind::Gcn => "GCN",
            LayerKind::Gat => "GAT",
            LayerKind::Linear => "Linear",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdjacencyNormalization {
    /// Propagate with the raw adjacency.
    None,
    /// `D^-1/2 (A + I) D^-1/2` with `D` the degree matrix of `A + I`.
    #[default]
    SymSelfloop,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Tanh,
}

impl Activation {
    fn apply(self, m: &mut Matrix) {
        match self {
            Activation::Tanh => m.map_inplace(f64::tanh),
        }
    }
}

/// Weights of one layer. `weights` is `in_dim × out_dim` and is applied as `h · W`.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerWeights {
    pub kind: LayerKind,
    pub weights: Matrix,
    pub bias: Option<Vec<f64>>,
    /// GAT only: `[a_self ‖ a_neighbor]`, length `2 · out_dim`.
    pub attention: Option<Vec<f64>>,
    /// GAT only; [`DEFAULT_LEAKY_SLOPE`] when absent.
    pub leaky_slope: Option<f64>,
}

impl LayerWeights {
    pub fn gcn(weights: Matrix, bias: Option<Vec<f64>>) -> Self {
        LayerWeights {
            kind: LayerKind::Gcn,
            weights,
            bias,
            attention: None,
            leaky_slope: None,
        }
    }

    pub fn gat(weights: Matrix, bias: Option<Vec<f64>>, attention: Vec<f64>) -> Self {
        LayerWeights {
            kind: LayerKind::Gat,
            weights,
            bias,
            attention: Some(attention),
            leaky_slope: None,
        }
    }

    pub fn linear(weights: Matrix, bias: Option<Vec<f64>>) -> Self {
        LayerWeights {
            kind: LayerKind::Linear,
            weights,
            bias,
            attention: None,
            leaky_slope: None,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weights.rows()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn slope(&self) -> f64 {
        self.leaky_slope.unwrap_or(DEFAULT_LEAKY_SLOPE)
    }

    /// Checks the per-layer shape invariants.
    pub fn validate(&self) -> Result<()> {
        if self.in_dim() == 0 || self.out_dim() == 0 {
            return Err(Error::dim("W", "non-empty matrix", format!("{}x{}", self.in_dim(), self.out_dim())));
        }
        if let Some(b) = &self.bias {
            if b.len() != self.out_dim() {
                return Err(Error::dim("bias", self.out_dim(), b.len()));
            }
        }
        match (self.kind, &self.attention) {
            (LayerKind::Gat, Some(a)) if a.len() != 2 * self.out_dim() => {
                return Err(Error::dim("attention_a", 2 * self.out_dim(), a.len()));
            }
            (LayerKind::Gat, None) => return Err(Error::format("gat layer requires attention_a")),
            (LayerKind::Gcn | LayerKind::Linear, Some(_)) => {
                return Err(Error::format("attention_a is only valid on gat layers"))
            }
            _ => {}
        }
        if self.leaky_slope.is_some() && self.kind != LayerKind::Gat {
            return Err(Error::format("leaky_slope is only valid on gat layers"));
        }
        let finite = self.weights.all_finite()
            && self.bias.iter().flatten().all(|x| x.is_finite())
            && self.attention.iter().flatten().all(|x| x.is_finite())
            && self.leaky_slope.is_none_or(f64::is_finite);
        if !finite {
            return Err(Error::Numeric("layer parameters".into()));
        }
        Ok(())
    }
}

/// A full classifier: graph layers, activation, pooling and linear head.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub graph_layers: Vec<LayerWeights>,
    pub activation: Activation,
    pub head: LayerWeights,
    pub adjacency_normalization: AdjacencyNormalization,
    pub num_classes: usize,
    /// Free-form provenance carried through load/save untouched.
    pub metadata: Option<serde_json::Value>,
}

impl ModelSpec {
    pub fn new(
        graph_layers: Vec<LayerWeights>,
        head: LayerWeights,
        adjacency_normalization: AdjacencyNormalization,
    ) -> Result<Self> {
        let m = ModelSpec {
            num_classes: head.out_dim(),
            graph_layers,
            activation: Activation::Tanh,
            head,
            adjacency_normalization,
            metadata: None,
        };
        m.validate()?;
        Ok(m)
    }

    /// Checks every structural invariant. Errors carry the offending layer
    /// index; the head is reported as index `graph_layers.len()`.
    pub fn validate(&self) -> Result<()> {
        let first = self
            .graph_layers
            .first()
            .ok_or_else(|| Error::format("model needs at least one graph layer"))?;
        let kind = first.kind;
        let mut prev_out = None;
        for (i, layer) in self.graph_layers.iter().enumerate() {
            let check = || -> Result<()> {
                if layer.kind == LayerKind::Linear {
                    return Err(Error::format("graph layers must be gcn or gat"));
                }
                if layer.kind != kind {
                    return Err(Error::format("all graph layers must share one kind"));
                }
                layer.validate()?;
                if let Some(p) = prev_out {
                    if layer.in_dim() != p {
                        return Err(Error::dim("in_dim", p, layer.in_dim()));
                    }
                }
                Ok(())
            };
            check().map_err(|e| e.in_layer(i))?;
            prev_out = Some(layer.out_dim());
        }
        let head_index = self.graph_layers.len();
        let check_head = || -> Result<()> {
            if self.head.kind != LayerKind::Linear {
                return Err(Error::format("head must be a linear layer"));
            }
            self.head.validate()?;
            let width = self.last_width();
            if self.head.in_dim() != 2 * width {
                return Err(Error::dim("head in_dim (2 x last graph width)", 2 * width, self.head.in_dim()));
            }
            if self.head.out_dim() != self.num_classes {
                return Err(Error::dim("head out_dim (num_classes)", self.num_classes, self.head.out_dim()));
            }
            Ok(())
        };
        check_head().map_err(|e| e.in_layer(head_index))
    }

    pub fn kind(&self) -> LayerKind {
        self.graph_layers[0].kind
    }

    pub fn input_dim(&self) -> usize {
        self.graph_layers[0].in_dim()
    }

    /// Width `K` of the final feature map.
    pub fn last_width(&self) -> usize {
        self.graph_layers.last().map_or(0, LayerWeights::out_dim)
    }

    /// Normalized propagation matrix for `g`, shared by every forward over
    /// graphs with `g`'s adjacency.
    pub fn prepare_adjacency(&self, g: &Graph) -> Result<Matrix> {
        normalize_adjacency(g.adjacency(), self.adjacency_normalization)
    }

    pub fn forward(&self, g: &Graph) -> Result<ForwardResult> {
        let a_hat = self.prepare_adjacency(g)?;
        self.forward_prepared(g.features(), &a_hat, false)
    }

    /// Like [`ModelSpec::forward`] but keeps every post-activation layer output.
    pub fn forward_traced(&self, g: &Graph) -> Result<ForwardResult> {
        let a_hat = self.prepare_adjacency(g)?;
        self.forward_prepared(g.features(), &a_hat, true)
    }

    /// Forward pass over `features` with an already-normalized adjacency.
    pub fn forward_prepared(&self, features: &Matrix, a_hat: &Matrix, trace: bool) -> Result<ForwardResult> {
        if features.rows() != a_hat.rows() {
            return Err(Error::dim("features rows", a_hat.rows(), features.rows()));
        }
        let mut maps = Vec::new();
        let mut h = features.clone();
        for (i, layer) in self.graph_layers.iter().enumerate() {
            if h.cols() != layer.in_dim() {
                let operand = if i == 0 { "node features" } else { "in_dim" };
                return Err(Error::dim(operand, layer.in_dim(), h.cols()).in_layer(i));
            }
            let mut next = match layer.kind {
                LayerKind::Gcn => gcn_layer(&h, a_hat, layer),
                LayerKind::Gat => gat_layer(&h, a_hat, layer),
                LayerKind::Linear => Err(Error::format("linear layer in graph stack")),
            }
            .map_err(|e| e.in_layer(i))?;
            self.activation.apply(&mut next);
            if trace {
                maps.push(next.clone());
            }
            h = next;
        }
        let pooled = global_pool(&h)?;
        let logits = linear(&pooled, &self.head).map_err(|e| e.in_layer(self.graph_layers.len()))?;
        if logits.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numeric("logits".into()));
        }
        Ok(ForwardResult {
            logits,
            last_feature_map: h,
            per_layer_maps: trace.then_some(maps),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardResult {
    /// Raw class scores, no softmax.
    pub logits: Vec<f64>,
    /// Post-activation output of the last graph layer, `N × K`.
    pub last_feature_map: Matrix,
    pub per_layer_maps: Option<Vec<Matrix>>,
}

impl ForwardResult {
    /// Index of the largest logit; ties go to the lowest index.
    pub fn predicted_class(&self) -> usize {
        predicted_class(&self.logits)
    }
}

/// Argmax with lowest-index tie-break. Panics on empty input.
pub fn predicted_class(logits: &[f64]) -> usize {
    assert!(!logits.is_empty(), "predicted_class on empty logits");
    let mut best = 0;
    for (i, &v) in logits.iter().enumerate().skip(1) {
        if v > logits[best] {
            best = i;
        }
    }
    best
}

pub fn normalize_adjacency(a: &Matrix, mode: AdjacencyNormalization) -> Result<Matrix> {
    if !a.is_square() {
        return Err(Error::dim("adjacency", "square matrix", format!("{}x{}", a.rows(), a.cols())));
    }
    if let Some(v) = a.as_slice().iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        return Err(Error::Domain(format!("adjacency entries must be finite and >= 0, found {v}")));
    }
    match mode {
        AdjacencyNormalization::None => Ok(a.clone()),
        AdjacencyNormalization::SymSelfloop => {
            let n = a.rows();
            let mut out = a.clone();
            for i in 0..n {
                out[(i, i)] += 1.0;
            }
            let inv_sqrt: Vec<f64> = (0..n)
                .map(|i| 1.0 / out.row(i).iter().sum::<f64>().sqrt())
                .collect();
            for i in 0..n {
                for j in 0..n {
                    out[(i, j)] *= inv_sqrt[i] * inv_sqrt[j];
                }
            }
            Ok(out)
        }
    }
}

/// `Â · (H · W) + bias`.
pub fn gcn_layer(h: &Matrix, a_hat: &Matrix, w: &LayerWeights) -> Result<Matrix> {
    check_input(h, a_hat, w)?;
    let hw = h.matmul(&w.weights)?;
    let mut out = a_hat.matmul(&hw)?;
    if let Some(b) = &w.bias {
        out.add_row_broadcast(b)?;
    }
    Ok(out)
}

/// Single-head graph attention: `Σ_j α_ij z_j + bias` with `z = h · W`.
pub fn gat_layer(h: &Matrix, a: &Matrix, w: &LayerWeights) -> Result<Matrix> {
    check_input(h, a, w)?;
    let z = h.matmul(&w.weights)?;
    let alpha = attention_from_projected(&z, a, w)?;
    let mut out = alpha.matmul(&z)?;
    if let Some(b) = &w.bias {
        out.add_row_broadcast(b)?;
    }
    Ok(out)
}

/// The `N × N` attention coefficients of a GAT layer. Row `i` is a softmax
/// over `{i} ∪ {j : a_ij ≠ 0}`; every other entry is zero.
pub fn gat_attention(h: &Matrix, a: &Matrix, w: &LayerWeights) -> Result<Matrix> {
    check_input(h, a, w)?;
    let z = h.matmul(&w.weights)?;
    attention_from_projected(&z, a, w)
}

fn attention_from_projected(z: &Matrix, a: &Matrix, w: &LayerWeights) -> Result<Matrix> {
    let att = w
        .attention
        .as_ref()
        .ok_or_else(|| Error::format("gat layer requires attention_a"))?;
    let d = z.cols();
    if att.len() != 2 * d {
        return Err(Error::dim("attention_a", 2 * d, att.len()));
    }
    let (a_self, a_nbr) = att.split_at(d);
    let dot = |row: &[f64], v: &[f64]| row.iter().zip(v).fold(0.0, |acc, (x, y)| acc + x * y);
    let n = z.rows();
    let src: Vec<f64> = (0..n).map(|i| dot(z.row(i), a_self)).collect();
    let dst: Vec<f64> = (0..n).map(|j| dot(z.row(j), a_nbr)).collect();
    let slope = w.slope();
    let mut alpha = Matrix::zeros(n, n);
    let mut neighbors = Vec::with_capacity(n);
    for i in 0..n {
        neighbors.clear();
        neighbors.extend((0..n).filter(|&j| j == i || a[(i, j)] != 0.0));
        let scores: Vec<f64> = neighbors
            .iter()
            .map(|&j| leaky_relu(src[i] + dst[j], slope))
            .collect();
        let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
        let total: f64 = exps.iter().sum();
        for (&j, e) in neighbors.iter().zip(&exps) {
            alpha[(i, j)] = e / total;
        }
    }
    Ok(alpha)
}

fn leaky_relu(x: f64, slope: f64) -> f64 {
    if x >= 0.0 {
        x
    } else {
        slope * x
    }
}

fn check_input(h: &Matrix, a: &Matrix, w: &LayerWeights) -> Result<()> {
    if h.cols() != w.in_dim() {
        return Err(Error::dim("layer input width", w.in_dim(), h.cols()));
    }
    if a.shape() != (h.rows(), h.rows()) {
        return Err(Error::dim(
            "adjacency",
            format!("{0}x{0}", h.rows()),
            format!("{}x{}", a.rows(), a.cols()),
        ));
    }
    if let Some(b) = &w.bias {
        if b.len() != w.out_dim() {
            return Err(Error::dim("bias", w.out_dim(), b.len()));
        }
    }
    Ok(())
}

/// `[column means ‖ column maxes]`.
pub fn global_pool(h: &Matrix) -> Result<Vec<f64>> {
    if h.rows() == 0 {
        return Err(Error::Domain("cannot pool an empty graph".into()));
    }
    let k = h.cols();
    let mut sums = vec![0.0; k];
    let mut maxes = vec![f64::NEG_INFINITY; k];
    for i in 0..h.rows() {
        for (j, &v) in h.row(i).iter().enumerate() {
            sums[j] += v;
            maxes[j] = maxes[j].max(v);
        }
    }
    let n = h.rows() as f64;
    Ok(sums.into_iter().map(|s| s / n).chain(maxes).collect())
}

fn linear(x: &[f64], w: &LayerWeights) -> Result<Vec<f64>> {
    if x.len() != w.in_dim() {
        return Err(Error::dim("head input", w.in_dim(), x.len()));
    }
    let row = Matrix::from_vec(1, x.len(), x.to_vec())?;
    let mut out = row.matmul(&w.weights)?;
    if let Some(b) = &w.bias {
        out.add_row_broadcast(b)?;
    }
    Ok(out.into_vec())
}

/// A model with Glorot-uniform weights and small uniform biases drawn from
/// `ChaCha8Rng::seed_from_u64(seed)`. `widths` lists the input width followed
/// by every graph layer's output width.
pub fn random_model(
    kind: LayerKind,
    widths: &[usize],
    num_classes: usize,
    normalization: AdjacencyNormalization,
    seed: u64,
) -> Result<ModelSpec> {
    use rand::{Rng, SeedableRng};

    if widths.len() < 2 || kind == LayerKind::Linear {
        return Err(Error::Config("need a gcn/gat kind, an input width and at least one layer width".into()));
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut dense = |rows: usize, cols: usize| {
        let limit = (6.0 / (rows + cols) as f64).sqrt();
        let w: Vec<f64> = (0..rows * cols).map(|_| rng.random_range(-limit..limit)).collect();
        let b: Vec<f64> = (0..cols).map(|_| rng.random_range(-0.1..0.1)).collect();
        let a: Vec<f64> = (0..2 * cols).map(|_| rng.random_range(-limit..limit)).collect();
        (Matrix::from_vec(rows, cols, w), b, a)
    };
    let mut layers = Vec::new();
    for pair in widths.windows(2) {
        let (w, b, a) = dense(pair[0], pair[1]);
        layers.push(match kind {
            LayerKind::Gat => LayerWeights::gat(w?, Some(b), a),
            _ => LayerWeights::gcn(w?, Some(b)),
        });
    }
    let last = widths[widths.len() - 1];
    let (w, b, _) = dense(2 * last, num_classes);
    ModelSpec::new(layers, LayerWeights::linear(w?, Some(b)), normalization)
}

/// Anything that maps a graph to class scores.
pub trait GraphClassifier: Sync {
    fn logits(&self, g: &Graph) -> Result<Vec<f64>>;
}

impl GraphClassifier for ModelSpec {
    fn logits(&self, g: &Graph) -> Result<Vec<f64>> {
        Ok(self.forward(g)?.logits)
    }
}
