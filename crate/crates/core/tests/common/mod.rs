//! Straight-line reference implementations used as test oracles.
//!
//! Nothing here calls into the crate's numeric code: models are copied into
//! nested `Vec`s and every step (normalization, propagation, attention,
//! pooling, masking, softmax) is written out again with different
//! association orders.
#![allow(dead_code, clippy::needless_range_loop)]

use graph_saliency::model::{random_model, AdjacencyNormalization, LayerKind, ModelSpec};
use graph_saliency::{Graph, Matrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub type Mat = Vec<Vec<f64>>;

pub struct RefLayer {
    pub gat: bool,
    pub w: Mat,
    pub b: Vec<f64>,
    pub att: Vec<f64>,
    pub slope: f64,
}

pub struct RefModel {
    pub layers: Vec<RefLayer>,
    pub head_w: Mat,
    pub head_b: Vec<f64>,
    pub sym_norm: bool,
}

fn to_mat(m: &Matrix) -> Mat {
    let (r, c) = m.shape();
    let s = m.as_slice();
    (0..r).map(|i| s[i * c..(i + 1) * c].to_vec()).collect()
}

impl RefModel {
    pub fn from_spec(m: &ModelSpec) -> Self {
        let layers = m
            .graph_layers
            .iter()
            .map(|l| RefLayer {
                gat: l.kind == LayerKind::Gat,
                w: to_mat(&l.weights),
                b: l.bias.clone().unwrap_or_else(|| vec![0.0; l.weights.cols()]),
                att: l.attention.clone().unwrap_or_default(),
                slope: l.leaky_slope.unwrap_or(0.2),
            })
            .collect();
        RefModel {
            layers,
            head_w: to_mat(&m.head.weights),
            head_b: m.head.bias.clone().unwrap_or_else(|| vec![0.0; m.head.weights.cols()]),
            sym_norm: m.adjacency_normalization == AdjacencyNormalization::SymSelfloop,
        }
    }
}

pub fn matmul(a: &Mat, b: &Mat) -> Mat {
    let inner = b.len();
    let cols = if inner == 0 { 0 } else { b[0].len() };
    a.iter()
        .map(|row| {
            (0..cols)
                .map(|j| (0..inner).map(|k| row[k] * b[k][j]).sum())
                .collect()
        })
        .collect()
}

pub fn propagation(a: &Mat, sym_norm: bool) -> Mat {
    let n = a.len();
    if !sym_norm {
        return a.clone();
    }
    let with_loops: Mat = (0..n)
        .map(|i| (0..n).map(|j| a[i][j] + if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    let deg: Vec<f64> = with_loops.iter().map(|r| r.iter().sum()).collect();
    (0..n)
        .map(|i| (0..n).map(|j| with_loops[i][j] / (deg[i] * deg[j]).sqrt()).collect())
        .collect()
}

fn gcn(h: &Mat, p: &Mat, l: &RefLayer) -> Mat {
    // (Â H) W, the other association from the implementation
    let mut out = matmul(&matmul(p, h), &l.w);
    for row in &mut out {
        for (v, b) in row.iter_mut().zip(&l.b) {
            *v += b;
        }
    }
    out
}

pub fn gat_alpha(h: &Mat, p: &Mat, l: &RefLayer) -> Mat {
    let z = matmul(h, &l.w);
    let d = l.w[0].len();
    let n = h.len();
    let mut alpha = vec![vec![0.0; n]; n];
    for i in 0..n {
        let nbrs: Vec<usize> = (0..n).filter(|&j| j == i || p[i][j] != 0.0).collect();
        let e: Vec<f64> = nbrs
            .iter()
            .map(|&j| {
                let mut s = 0.0;
                for t in 0..d {
                    s += l.att[t] * z[i][t] + l.att[d + t] * z[j][t];
                }
                if s < 0.0 {
                    l.slope * s
                } else {
                    s
                }
            })
            .collect();
        let denom: f64 = e.iter().map(|v| v.exp()).sum();
        for (idx, &j) in nbrs.iter().enumerate() {
            alpha[i][j] = e[idx].exp() / denom;
        }
    }
    alpha
}

fn gat(h: &Mat, p: &Mat, l: &RefLayer) -> Mat {
    let z = matmul(h, &l.w);
    let alpha = gat_alpha(h, p, l);
    let mut out = matmul(&alpha, &z);
    for row in &mut out {
        for (v, b) in row.iter_mut().zip(&l.b) {
            *v += b;
        }
    }
    out
}

/// Returns `(logits, last feature map)`.
pub fn forward(m: &RefModel, x: &Mat, a: &Mat) -> (Vec<f64>, Mat) {
    let p = propagation(a, m.sym_norm);
    let mut h = x.clone();
    for l in &m.layers {
        h = if l.gat { gat(&h, &p, l) } else { gcn(&h, &p, l) };
        for row in &mut h {
            for v in row.iter_mut() {
                *v = v.tanh();
            }
        }
    }
    let n = h.len() as f64;
    let k = h[0].len();
    let mut pooled = Vec::with_capacity(2 * k);
    for j in 0..k {
        pooled.push(h.iter().map(|r| r[j]).sum::<f64>() / n);
    }
    for j in 0..k {
        pooled.push(h.iter().map(|r| r[j]).fold(f64::MIN, f64::max));
    }
    let logits = (0..m.head_b.len())
        .map(|c| m.head_b[c] + (0..2 * k).map(|t| pooled[t] * m.head_w[t][c]).sum::<f64>())
        .collect();
    (logits, h)
}

pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i] > v[best] {
            best = i;
        }
    }
    best
}

pub struct RefExplanation {
    pub class: usize,
    pub scores: Vec<f64>,
    pub u: Vec<f64>,
    pub saliency: Vec<f64>,
}

/// Spread within 16 ulps of the larger magnitude is treated as constant.
pub fn flat(lo: f64, hi: f64) -> bool {
    hi - lo <= 16.0 * f64::EPSILON * lo.abs().max(hi.abs())
}

/// Masks features by each normalized channel, re-runs, softmaxes, combines.
pub fn explain(m: &RefModel, x: &Mat, a: &Mat, target: Option<usize>) -> RefExplanation {
    let (logits, h) = forward(m, x, a);
    let class = target.unwrap_or_else(|| argmax(&logits));
    let k = h[0].len();
    let mut scores = Vec::with_capacity(k);
    for ch in 0..k {
        let col: Vec<f64> = h.iter().map(|r| r[ch]).collect();
        let lo = col.iter().cloned().fold(f64::MAX, f64::min);
        let hi = col.iter().cloned().fold(f64::MIN, f64::max);
        let mask: Vec<f64> = col
            .iter()
            .map(|v| if flat(lo, hi) { 0.0 } else { (v - lo) / (hi - lo) })
            .collect();
        let masked: Mat = x
            .iter()
            .zip(&mask)
            .map(|(row, w)| row.iter().map(|v| v * w).collect())
            .collect();
        scores.push(forward(m, &masked, a).0[class]);
    }
    let exps: Vec<f64> = scores.iter().map(|s| s.exp()).collect();
    let total: f64 = exps.iter().sum();
    let u: Vec<f64> = exps.iter().map(|e| e / total).collect();
    let saliency = h
        .iter()
        .map(|row| row.iter().zip(&u).map(|(v, w)| v * w).sum::<f64>().max(0.0))
        .collect();
    RefExplanation {
        class,
        scores,
        u,
        saliency,
    }
}

/// Monte-Carlo infidelity with the same sampling stream as the crate:
/// `ChaCha8Rng::seed_from_u64(seed)`, one normal draw per node per sample.
pub fn infidelity(
    f: impl Fn(&Mat) -> f64,
    x: &Mat,
    phi: &[f64],
    sigma: f64,
    samples: usize,
    seed: u64,
) -> f64 {
    let max_abs = x.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    let normal = Normal::new(0.0, sigma * max_abs).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = f(x);
    let mut acc = 0.0;
    for _ in 0..samples {
        let delta: Vec<f64> = (0..x.len()).map(|_| normal.sample(&mut rng)).collect();
        let xp: Mat = x
            .iter()
            .zip(&delta)
            .map(|(row, d)| row.iter().map(|v| v - d).collect())
            .collect();
        let dot: f64 = delta.iter().zip(phi).map(|(d, p)| d * p).sum();
        let e = dot - (base - f(&xp));
        acc += e * e;
    }
    acc / samples as f64
}

// ---------------------------------------------------------------------------
// random instances

pub struct Instance {
    pub graph: Graph,
    pub model: ModelSpec,
    pub x: Mat,
    pub a: Mat,
}

pub fn graph_mats(g: &Graph) -> (Mat, Mat) {
    (to_mat(g.features()), to_mat(g.adjacency()))
}

pub fn random_graph(rng: &mut ChaCha8Rng, n: usize, f: usize) -> Graph {
    let mut a = Matrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.random_bool(0.4) {
                a[(i, j)] = 1.0;
                a[(j, i)] = 1.0;
            }
        }
    }
    let x = (0..n * f).map(|_| rng.random_range(-1.0..1.0)).collect();
    Graph::new(Matrix::from_vec(n, f, x).unwrap(), a).unwrap()
}

/// Random graph (N ≤ max_n, F ≤ 4) and model of `kind` with final width K ≤ max_k.
pub fn random_instance(seed: u64, kind: LayerKind, max_n: usize, max_k: usize) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(1..=max_n);
    let f = rng.random_range(1..=4);
    let depth = rng.random_range(1..=3);
    let mut widths = vec![f];
    for _ in 1..depth {
        widths.push(rng.random_range(1..=6));
    }
    widths.push(rng.random_range(1..=max_k));
    let classes = rng.random_range(2..=5);
    let norm = if rng.random_bool(0.5) {
        AdjacencyNormalization::SymSelfloop
    } else {
        AdjacencyNormalization::None
    };
    let model = random_model(kind, &widths, classes, norm, rng.random()).unwrap();
    let graph = random_graph(&mut rng, n, f).with_id(seed.to_string());
    let (x, a) = graph_mats(&graph);
    Instance { graph, model, x, a }
}

pub fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
}
