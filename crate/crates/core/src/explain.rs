//! ScoreCAM-style node saliency for graph classifiers.
//!
//! Each channel `h_k` of the final feature map is min-max normalized into a
//! node mask, the input features are masked with it and the model is re-run.
//! The class-`c` logits of those `K` masked forwards are softmaxed into
//! channel weights `u`, and the saliency map is `ReLU(Σ_k u_k h_k)`.
//!
//! The masked forwards are independent and run on the current rayon pool.
//! Results are collected in channel order and every reduction has a fixed
//! order, so the output does not depend on the number of workers.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::{broadcast_node_mask, mask_graph, minmax_normalize, Graph, NodeVector};
use crate::matrix::Matrix;
use crate::model::ModelSpec;

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelWeights {
    /// Softmax of `raw_scores`.
    pub u: Vec<f64>,
    pub class_index: usize,
    /// Class-`c` logit of the graph masked by each normalized channel.
    pub raw_scores: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SaliencyGraph {
    /// Non-negative importance per node.
    pub saliency: Vec<f64>,
    /// The explained graph's adjacency, unchanged.
    pub adjacency: Matrix,
    pub channel_weights: ChannelWeights,
    pub source_graph_id: Option<String>,
}

impl SaliencyGraph {
    pub fn class_index(&self) -> usize {
        self.channel_weights.class_index
    }
}

/// Class-`c` logit of `g ⋆ (N(h_k), 1)` for every channel `k` of `h_l`.
pub fn channel_scores(g: &Graph, m: &ModelSpec, h_l: &Matrix, c: usize) -> Result<Vec<f64>> {
    if c >= m.num_classes {
        return Err(Error::Domain(format!(
            "class {c} out of range for {} classes",
            m.num_classes
        )));
    }
    if h_l.rows() != g.num_nodes() {
        return Err(Error::dim("feature map rows", g.num_nodes(), h_l.rows()));
    }
    // M_A = 1 leaves A unchanged, so every masked forward shares one Â.
    let a_hat = m.prepare_adjacency(g)?;
    (0..h_l.cols())
        .into_par_iter()
        .map(|k| {
            masked_score(g, m, &a_hat, &h_l.column(k), c).map_err(|e| e.in_channel(k))
        })
        .collect()
}

fn masked_score(g: &Graph, m: &ModelSpec, a_hat: &Matrix, channel: &[f64], c: usize) -> Result<f64> {
    let node_mask = minmax_normalize(&NodeVector::new(channel.to_vec()))?;
    let mask = broadcast_node_mask(&node_mask, g.num_features())?;
    let masked = mask_graph(g, &mask)?;
    let r = m.forward_prepared(masked.features(), a_hat, false)?;
    Ok(r.logits[c])
}

/// Numerically stable softmax.
pub fn softmax_weights(scores: &[f64]) -> Result<Vec<f64>> {
    if scores.is_empty() {
        return Err(Error::Domain("softmax over zero channels".into()));
    }
    if let Some(k) = scores.iter().position(|s| !s.is_finite()) {
        return Err(Error::Numeric(format!("score of channel {k}")));
    }
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / total).collect())
}

/// Explains the model's predicted class.
pub fn explain(g: &Graph, m: &ModelSpec) -> Result<SaliencyGraph> {
    explain_class(g, m, None)
}

/// Explains `target`, or the predicted class when `None`.
pub fn explain_class(g: &Graph, m: &ModelSpec, target: Option<usize>) -> Result<SaliencyGraph> {
    let base = m.forward(g)?;
    let c = target.unwrap_or_else(|| base.predicted_class());
    let h_l = &base.last_feature_map;
    let raw_scores = channel_scores(g, m, h_l, c)?;
    let u = softmax_weights(&raw_scores)?;
    let saliency = (0..h_l.rows())
        .map(|i| {
            let s = h_l.row(i).iter().zip(&u).fold(0.0, |acc, (h, w)| acc + w * h);
            if s > 0.0 {
                s
            } else {
                0.0
            }
        })
        .collect();
    Ok(SaliencyGraph {
        saliency,
        adjacency: g.adjacency().clone(),
        channel_weights: ChannelWeights {
            u,
            class_index: c,
            raw_scores,
        },
        source_graph_id: g.id().map(str::to_owned),
    })
}
