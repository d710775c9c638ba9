//! File formats: model weights (JSON), graph datasets (JSON Lines) and
//! saliency maps (JSON), plus a seeded grid-graph generator.
//!
//! Numbers are written with shortest round-trip decimal formatting and parsed
//! with correct rounding, so `load(save(x)) == x` holds bit for bit.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::explain::SaliencyGraph;
use crate::graph::Graph;
use crate::matrix::Matrix;
use crate::model::{Activation, AdjacencyNormalization, LayerKind, LayerWeights, ModelSpec};

pub const FORMAT_VERSION: u32 = 1;

// ---------------------------------------------------------------------------
// model

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    format_version: u32,
    #[serde(default)]
    adjacency_normalization: AdjacencyNormalization,
    activation: Activation,
    num_classes: usize,
    layers: Vec<LayerFile>,
    head: LayerFile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    metadata: Option<Value>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerFile {
    kind: LayerKind,
    in_dim: usize,
    out_dim: usize,
    #[serde(rename = "W")]
    w: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bias: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    attention_a: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    leaky_slope: Option<f64>,
}

impl LayerFile {
    fn from_weights(l: &LayerWeights) -> Self {
        LayerFile {
            kind: l.kind,
            in_dim: l.in_dim(),
            out_dim: l.out_dim(),
            w: l.weights.as_slice().to_vec(),
            bias: l.bias.clone(),
            attention_a: l.attention.clone(),
            leaky_slope: l.leaky_slope,
        }
    }

    fn into_weights(self) -> Result<LayerWeights> {
        let weights = Matrix::from_vec(self.in_dim, self.out_dim, self.w)?;
        Ok(LayerWeights {
            kind: self.kind,
            weights,
            bias: self.bias,
            attention: self.attention_a,
            leaky_slope: self.leaky_slope,
        })
    }
}

/// Parses and validates a model document.
pub fn parse_model(text: &str) -> Result<ModelSpec> {
    let file: ModelFile = serde_json::from_str(text)?;
    if file.format_version != FORMAT_VERSION {
        return Err(Error::format(format!(
            "unsupported model format_version {} (expected {FORMAT_VERSION})",
            file.format_version
        )));
    }
    let head_index = file.layers.len();
    let graph_layers = file
        .layers
        .into_iter()
        .enumerate()
        .map(|(i, l)| l.into_weights().map_err(|e| e.in_layer(i)))
        .collect::<Result<Vec<_>>>()?;
    let head = file.head.into_weights().map_err(|e| e.in_layer(head_index))?;
    let model = ModelSpec {
        graph_layers,
        activation: file.activation,
        head,
        adjacency_normalization: file.adjacency_normalization,
        num_classes: file.num_classes,
        metadata: file.metadata,
    };
    model.validate()?;
    Ok(model)
}

pub fn model_to_json(m: &ModelSpec) -> Result<String> {
    let file = ModelFile {
        format_version: FORMAT_VERSION,
        adjacency_normalization: m.adjacency_normalization,
        activation: m.activation,
        num_classes: m.num_classes,
        layers: m.graph_layers.iter().map(LayerFile::from_weights).collect(),
        head: LayerFile::from_weights(&m.head),
        metadata: m.metadata.clone(),
    };
    Ok(serde_json::to_string_pretty(&file)? + "\n")
}

pub fn load_model(path: impl AsRef<Path>) -> Result<ModelSpec> {
    parse_model(&std::fs::read_to_string(path)?)
}

pub fn save_model(m: &ModelSpec, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, model_to_json(m)?)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// dataset

/// One graph of a JSON-Lines dataset. Edges are undirected; both directions
/// are materialized by [`DatasetRecord::to_graph`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetRecord {
    pub graph_id: String,
    pub label: usize,
    #[serde(alias = "N")]
    pub num_nodes: usize,
    pub x: Vec<Vec<f64>>,
    pub edges: Vec<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pos: Option<Vec<[f64; 2]>>,
}

impl DatasetRecord {
    pub fn validate(&self) -> Result<()> {
        let n = self.num_nodes;
        if n == 0 {
            return Err(Error::format("num_nodes must be >= 1"));
        }
        if self.x.len() != n {
            return Err(Error::format(format!("x has {} rows, num_nodes is {n}", self.x.len())));
        }
        let f = self.x[0].len();
        if f == 0 {
            return Err(Error::format("node features must have F >= 1"));
        }
        if let Some(i) = self.x.iter().position(|r| r.len() != f) {
            return Err(Error::format(format!("x row {i} has {} features, expected {f}", self.x[i].len())));
        }
        for &[i, j] in &self.edges {
            if i >= n || j >= n {
                return Err(Error::format(format!("edge [{i}, {j}] out of range for {n} nodes")));
            }
            if i == j {
                return Err(Error::format(format!("self-loop [{i}, {j}] not allowed")));
            }
        }
        if let Some(p) = &self.pos {
            if p.len() != n {
                return Err(Error::format(format!("pos has {} rows, num_nodes is {n}", p.len())));
            }
        }
        Ok(())
    }

    pub fn num_features(&self) -> usize {
        self.x.first().map_or(0, Vec::len)
    }

    /// Symmetric, zero-diagonal adjacency.
    pub fn adjacency(&self) -> Matrix {
        let mut a = Matrix::zeros(self.num_nodes, self.num_nodes);
        for &[i, j] in &self.edges {
            a[(i, j)] = 1.0;
            a[(j, i)] = 1.0;
        }
        a
    }

    pub fn to_graph(&self) -> Result<Graph> {
        self.validate()?;
        let mut g = Graph::new(Matrix::from_rows(&self.x)?, self.adjacency())?
            .with_label(self.label)
            .with_id(self.graph_id.clone());
        if let Some(p) = &self.pos {
            g = g.with_positions(Matrix::from_rows(p)?)?;
        }
        Ok(g)
    }
}

/// Streaming JSON-Lines reader. Blank lines are skipped. The first non-blank
/// line may be a header object `{"header": {...}}`, exposed via
/// [`DatasetReader::header`].
pub struct DatasetReader<R> {
    lines: std::io::Lines<R>,
    line_no: usize,
    seen: HashSet<String>,
    header: Option<Value>,
    started: bool,
}

impl<R: BufRead> DatasetReader<R> {
    pub fn new(reader: R) -> Self {
        DatasetReader {
            lines: reader.lines(),
            line_no: 0,
            seen: HashSet::new(),
            header: None,
            started: false,
        }
    }

    pub fn header(&self) -> Option<&Value> {
        self.header.as_ref()
    }

    fn parse_line(&mut self, line: &str) -> Result<Option<DatasetRecord>> {
        let value: Value = serde_json::from_str(line)?;
        let first = !std::mem::replace(&mut self.started, true);
        if let Value::Object(obj) = &value {
            if obj.len() == 1 && obj.contains_key("header") {
                if !first {
                    return Err(Error::format("header line must come first"));
                }
                self.header = obj.get("header").cloned();
                return Ok(None);
            }
        }
        let rec: DatasetRecord = serde_json::from_value(value)?;
        rec.validate()?;
        if !self.seen.insert(rec.graph_id.clone()) {
            return Err(Error::format(format!("duplicate graph_id {:?}", rec.graph_id)));
        }
        Ok(Some(rec))
    }
}

impl<R: BufRead> Iterator for DatasetReader<R> {
    type Item = Result<DatasetRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let line = match self.lines.next()? {
                Ok(l) => l,
                Err(e) => return Some(Err(e.into())),
            };
            self.line_no += 1;
            if line.trim().is_empty() {
                continue;
            }
            let line_no = self.line_no;
            match self.parse_line(&line) {
                Ok(Some(rec)) => return Some(Ok(rec)),
                Ok(None) => continue,
                Err(e) => {
                    let msg = match e {
                        Error::Format { msg, .. } => msg,
                        other => other.to_string(),
                    };
                    return Some(Err(Error::Format {
                        line: Some(line_no),
                        msg,
                    }));
                }
            }
        }
    }
}

pub fn open_dataset(path: impl AsRef<Path>) -> Result<DatasetReader<BufReader<File>>> {
    Ok(DatasetReader::new(BufReader::new(File::open(path)?)))
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Vec<DatasetRecord>> {
    open_dataset(path)?.collect()
}

/// Streams the dataset until `graph_id` is found.
pub fn find_record(path: impl AsRef<Path>, graph_id: &str) -> Result<DatasetRecord> {
    for rec in open_dataset(path)? {
        let rec = rec?;
        if rec.graph_id == graph_id {
            return Ok(rec);
        }
    }
    Err(Error::NotFound(format!("graph_id {graph_id:?}")))
}

pub fn write_dataset<'a, W: Write>(
    mut w: W,
    header: Option<&Value>,
    records: impl IntoIterator<Item = &'a DatasetRecord>,
) -> Result<()> {
    if let Some(h) = header {
        serde_json::to_writer(&mut w, &serde_json::json!({ "header": h }))?;
        w.write_all(b"\n")?;
    }
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_dataset<'a>(
    path: impl AsRef<Path>,
    header: Option<&Value>,
    records: impl IntoIterator<Item = &'a DatasetRecord>,
) -> Result<()> {
    write_dataset(BufWriter::new(File::create(path)?), header, records)
}

/// A `rows × cols` 4-connected grid with seeded uniform `[0, 1)` scalar
/// features, grid-coordinate positions and label 0.
pub fn synthetic_grid_graph(rows: usize, cols: usize, seed: u64) -> Result<DatasetRecord> {
    if rows == 0 || cols == 0 {
        return Err(Error::Domain(format!("grid dimensions must be positive, got {rows}x{cols}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rows * cols;
    let x = (0..n).map(|_| vec![rng.random::<f64>()]).collect();
    let mut edges = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            let i = r * cols + c;
            if c + 1 < cols {
                edges.push([i, i + 1]);
            }
            if r + 1 < rows {
                edges.push([i, i + cols]);
            }
        }
    }
    let pos = (0..n).map(|i| [(i % cols) as f64, (i / cols) as f64]).collect();
    Ok(DatasetRecord {
        graph_id: format!("grid-{rows}x{cols}-{seed}"),
        label: 0,
        num_nodes: n,
        x,
        edges,
        pos: Some(pos),
    })
}

// ---------------------------------------------------------------------------
// saliency

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SaliencyFile {
    pub graph_id: Option<String>,
    pub class_index: usize,
    pub saliency: Vec<f64>,
    pub channel_weights: Vec<f64>,
    pub raw_scores: Vec<f64>,
    pub format_version: u32,
}

impl From<&SaliencyGraph> for SaliencyFile {
    fn from(s: &SaliencyGraph) -> Self {
        SaliencyFile {
            graph_id: s.source_graph_id.clone(),
            class_index: s.channel_weights.class_index,
            saliency: s.saliency.clone(),
            channel_weights: s.channel_weights.u.clone(),
            raw_scores: s.channel_weights.raw_scores.clone(),
            format_version: FORMAT_VERSION,
        }
    }
}

impl SaliencyFile {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn parse(text: &str) -> Result<Self> {
        let file: SaliencyFile = serde_json::from_str(text)?;
        if file.format_version != FORMAT_VERSION {
            return Err(Error::format(format!(
                "unsupported saliency format_version {}",
                file.format_version
            )));
        }
        let k = file.channel_weights.len();
        if file.raw_scores.len() != k {
            return Err(Error::format(format!(
                "raw_scores has {} entries, channel_weights has {k}",
                file.raw_scores.len()
            )));
        }
        Ok(file)
    }
}

pub fn save_saliency(s: &SaliencyGraph, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, SaliencyFile::from(s).to_json()?)?;
    Ok(())
}

pub fn load_saliency(path: impl AsRef<Path>) -> Result<SaliencyFile> {
    SaliencyFile::parse(&std::fs::read_to_string(path)?)
}
