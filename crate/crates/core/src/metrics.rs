//! Objective saliency-map metrics: infidelity and sparsity, and their
//! aggregation over a dataset.
//!
//! Infidelity is a Monte-Carlo estimate of
//! `E_δ[(Σ_i δ_i Φ_i − (f(X) − f(X − δ)))²]` where `δ_i ~ N(0, (σ·max|X|)²)`
//! is drawn once per node and subtracted from every feature of that node,
//! `f` is the explained class logit and `Φ` the saliency map. Samples come
//! from `ChaCha8Rng::seed_from_u64(seed)`, node-major within each sample.
//!
//! Sparsity is `1 − ‖N(Φ)‖₁ / N` with `N` the min-max normalization.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::explain::SaliencyGraph;
use crate::graph::{minmax_normalize, Graph, NodeVector};
use crate::matrix::Matrix;
use crate::model::GraphClassifier;

pub const DEFAULT_SIGMA: f64 = 0.1;
pub const DEFAULT_SAMPLES: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SparsityMode {
    #[default]
    L1Normalized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricConfig {
    /// Perturbation std as a fraction of `max|X|`.
    pub perturbation_sigma: f64,
    pub num_samples: usize,
    pub rng_seed: u64,
    pub sparsity_mode: SparsityMode,
}

impl Default for MetricConfig {
    fn default() -> Self {
        MetricConfig {
            perturbation_sigma: DEFAULT_SIGMA,
            num_samples: DEFAULT_SAMPLES,
            rng_seed: 0,
            sparsity_mode: SparsityMode::L1Normalized,
        }
    }
}

impl MetricConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.perturbation_sigma > 0.0 && self.perturbation_sigma.is_finite()) {
            return Err(Error::Config(format!(
                "perturbation sigma must be positive, got {}",
                self.perturbation_sigma
            )));
        }
        if self.num_samples == 0 {
            return Err(Error::Config("number of samples must be >= 1".into()));
        }
        Ok(())
    }
}

pub fn infidelity<C: GraphClassifier + ?Sized>(
    g: &Graph,
    model: &C,
    s: &SaliencyGraph,
    cfg: &MetricConfig,
) -> Result<f64> {
    cfg.validate()?;
    let n = g.num_nodes();
    if s.saliency.len() != n {
        return Err(Error::dim("saliency", n, s.saliency.len()));
    }
    let c = s.class_index();
    let class_logit = |graph: &Graph| -> Result<f64> {
        let logits = model.logits(graph)?;
        let v = *logits
            .get(c)
            .ok_or_else(|| Error::Domain(format!("class {c} out of range for {} logits", logits.len())))?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Numeric(format!("logit {c}")))
        }
    };

    let base = class_logit(g)?;
    let x = g.features();
    let scale = x.as_slice().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let normal = Normal::new(0.0, cfg.perturbation_sigma * scale)
        .map_err(|e| Error::Config(format!("perturbation law: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);

    let mut delta = vec![0.0; n];
    let mut total = 0.0;
    for _ in 0..cfg.num_samples {
        for d in delta.iter_mut() {
            *d = normal.sample(&mut rng);
        }
        let mut perturbed = Matrix::zeros(n, x.cols());
        for (i, d) in delta.iter().enumerate() {
            for (p, v) in perturbed.row_mut(i).iter_mut().zip(x.row(i)) {
                *p = v - d;
            }
        }
        let f_perturbed = class_logit(&g.with_features(perturbed)?)?;
        let attributed = delta
            .iter()
            .zip(&s.saliency)
            .fold(0.0, |acc, (d, phi)| acc + d * phi);
        let err = attributed - (base - f_perturbed);
        total += err * err;
    }
    let value = total / cfg.num_samples as f64;
    if !value.is_finite() {
        return Err(Error::Numeric("infidelity".into()));
    }
    Ok(value)
}

/// `1 − ‖N(Φ)‖₁ / N`, in `[0, 1]`; constant maps give `1`.
pub fn sparsity(saliency: &[f64]) -> Result<f64> {
    let normalized = minmax_normalize(&NodeVector::new(saliency.to_vec()))?;
    let l1: f64 = normalized.as_slice().iter().sum();
    Ok((1.0 - l1 / saliency.len() as f64).clamp(0.0, 1.0))
}

/// Per-instance RNG seed: `seed ⊕ key(graph_id)`, where the key is the id
/// itself when it parses as an unsigned integer and its FNV-1a hash otherwise.
pub fn instance_seed(seed: u64, graph_id: &str) -> u64 {
    let key = graph_id.parse::<u64>().unwrap_or_else(|_| {
        graph_id.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
            (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
        })
    });
    seed ^ key
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceRow {
    pub graph_id: String,
    pub infidelity: Option<f64>,
    pub sparsity: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub method: String,
    pub model_type: String,
    pub mean_infidelity: f64,
    pub std_infidelity: f64,
    pub mean_sparsity: f64,
    pub std_sparsity: f64,
    pub num_succeeded: usize,
    pub num_failed: usize,
    pub config: MetricConfig,
    pub rows: Vec<InstanceRow>,
}

/// Mean and population standard deviation, accumulated in slice order.
///
/// The mean gets one residual-correction pass, which makes it exact when all
/// values are equal.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let naive = values.iter().sum::<f64>() / n;
    let mean = naive + values.iter().map(|v| v - naive).sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Explains and scores every graph. Graphs without an id are keyed by their
/// position. Failed instances keep a row with the error and are left out of
/// the aggregates; the call fails only if every instance failed.
pub fn evaluate_dataset<C, E>(
    graphs: &[Graph],
    model: &C,
    explainer: E,
    cfg: &MetricConfig,
    method: &str,
    model_type: &str,
) -> Result<MetricReport>
where
    C: GraphClassifier + ?Sized,
    E: Fn(&Graph) -> Result<SaliencyGraph> + Sync,
{
    cfg.validate()?;
    if graphs.is_empty() {
        return Err(Error::Config("dataset is empty".into()));
    }
    let rows: Vec<InstanceRow> = graphs
        .par_iter()
        .enumerate()
        .map(|(idx, g)| {
            let graph_id = g.id().map_or_else(|| idx.to_string(), str::to_owned);
            let local = MetricConfig {
                rng_seed: instance_seed(cfg.rng_seed, &graph_id),
                ..cfg.clone()
            };
            let scored = explainer(g).and_then(|s| {
                let inf = infidelity(g, model, &s, &local)?;
                Ok((inf, sparsity(&s.saliency)?))
            });
            match scored {
                Ok((inf, sp)) => InstanceRow {
                    graph_id,
                    infidelity: Some(inf),
                    sparsity: Some(sp),
                    error: None,
                },
                Err(e) => InstanceRow {
                    graph_id,
                    infidelity: None,
                    sparsity: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();

    let ok: Vec<(f64, f64)> = rows
        .iter()
        .filter_map(|r| Some((r.infidelity?, r.sparsity?)))
        .collect();
    if ok.is_empty() {
        let first = rows[0].error.clone().unwrap_or_default();
        return Err(Error::Domain(format!(
            "all {} instances failed; first failure: {first}",
            rows.len()
        )));
    }
    let (inf, sp): (Vec<f64>, Vec<f64>) = ok.into_iter().unzip();
    let (mean_infidelity, std_infidelity) = mean_std(&inf);
    let (mean_sparsity, std_sparsity) = mean_std(&sp);
    Ok(MetricReport {
        method: method.to_owned(),
        model_type: model_type.to_owned(),
        mean_infidelity,
        std_infidelity,
        mean_sparsity,
        std_sparsity,
        num_succeeded: inf.len(),
        num_failed: rows.len() - inf.len(),
        config: cfg.clone(),
        rows,
    })
}

impl MetricReport {
    /// Aligned text table: method, model type, mean infidelity ±std, mean sparsity ±std.
    pub fn to_table(&self) -> String {
        let header = ["XAI Method", "Model type", "Mean Infidelity (lower)", "Mean Sparsity (higher)"];
        let row = [
            self.method.clone(),
            self.model_type.clone(),
            format!("{:.2} (± {:.2})", self.mean_infidelity, self.std_infidelity),
            format!("{:.2} (± {:.2})", self.mean_sparsity, self.std_sparsity),
        ];
        let widths: Vec<usize> = header
            .iter()
            .zip(&row)
            .map(|(h, r)| h.chars().count().max(r.chars().count()))
            .collect();
        let line = |cells: &[String]| {
            let padded: Vec<String> = cells
                .iter()
                .zip(&widths)
                .map(|(c, w)| format!("{c:<w$}", w = *w))
                .collect();
            format!("| {} |", padded.join(" | "))
        };
        let sep = format!(
            "|{}|",
            widths.iter().map(|w| "-".repeat(w + 2)).collect::<Vec<_>>().join("|")
        );
        let header: Vec<String> = header.iter().map(|s| s.to_string()).collect();
        let mut out = String::new();
        out.push_str(&line(&header));
        out.push('\n');
        out.push_str(&sep);
        out.push('\n');
        out.push_str(&line(&row));
        out.push('\n');
        if self.num_failed > 0 {
            out.push_str(&format!(
                "{} of {} instances failed and are excluded\n",
                self.num_failed,
                self.rows.len()
            ));
        }
        out
    }

    /// Per-instance rows as CSV: `graph_id,infidelity,sparsity,error`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
        wr.write_record(["graph_id", "infidelity", "sparsity", "error"]).map_err(io)?;
        let fmt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.rows {
            wr.write_record([
                r.graph_id.as_str(),
                &fmt(r.infidelity),
                &fmt(r.sparsity),
                r.error.as_deref().unwrap_or(""),
            ])
            .map_err(io)?;
        }
        wr.flush()?;
        Ok(())
    }
}
