//! Forward-only graph neural network inference with ScoreCAM-style node
//! saliency maps and objective explanation metrics.
//!
//! ```no_run
//! use graph_saliency::{explain, io, metrics};
//!
//! let model = io::load_model("model.json")?;
//! let graph = io::find_record("test.jsonl", "42")?.to_graph()?;
//! let saliency = explain::explain(&graph, &model)?;
//! println!("sparsity {}", metrics::sparsity(&saliency.saliency)?);
//! # Ok::<(), graph_saliency::Error>(())
//! ```

pub mod cli;
pub mod error;
pub mod explain;
pub mod graph;
pub mod io;
pub mod matrix;
pub mod metrics;
pub mod model;
pub mod render;

pub use error::{Error, Result};
pub use explain::{explain, explain_class, ChannelWeights, SaliencyGraph};
pub use graph::{Graph, MaskPair, NodeVector};
pub use matrix::Matrix;
pub use model::{ForwardResult, GraphClassifier, LayerKind, LayerWeights, ModelSpec};

/// Runs `f` on a dedicated rayon pool with `workers` threads (`None` = one per
/// available core). Output of every parallel routine in this crate is
/// independent of the worker count.
pub fn with_workers<R: Send>(workers: Option<usize>, f: impl FnOnce() -> R + Send) -> Result<R> {
    let n = match workers {
        Some(0) => return Err(Error::Config("worker count must be >= 1".into())),
        Some(n) => n,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}
