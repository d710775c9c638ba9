//! `graph-saliency` command line.
//!
//! stdout carries JSON only; diagnostics go to stderr. Exit codes: 0 success,
//! 1 usage or configuration, 2 I/O or format, 3 numeric.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::error::{Error, Result};
use crate::explain::explain_class;
use crate::graph::Graph;
use crate::io::{self, DatasetRecord, SaliencyFile};
use crate::metrics::{self, MetricConfig, SparsityMode};
use crate::model::{random_model, AdjacencyNormalization, LayerKind, ModelSpec};
use crate::render;

pub const WORKERS_ENV: &str = "GRAPH_SALIENCY_WORKERS";

#[derive(Parser, Debug)]
#[command(name = "graph-saliency", version, about = "GNN inference, ScoreCAM node saliency and explanation metrics")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one forward pass and print logits and predicted class.
    Forward(ForwardArgs),
    /// Compute a saliency map for one graph.
    Explain(ExplainArgs),
    /// Explain every graph in a dataset and report infidelity and sparsity.
    Eval(EvalArgs),
    /// Render a saved saliency map as SVG or DOT.
    Render(RenderArgs),
    /// Write a synthetic grid-graph dataset and optionally a random model.
    Synth(SynthArgs),
}

#[derive(Args, Debug)]
struct Source {
    /// Model weights (JSON).
    #[arg(long)]
    model: PathBuf,
    /// Dataset (JSON Lines).
    #[arg(long)]
    dataset: PathBuf,
}

#[derive(Args, Debug)]
struct ForwardArgs {
    #[command(flatten)]
    source: Source,
    #[arg(long)]
    id: String,
}

#[derive(Args, Debug)]
struct ExplainArgs {
    #[command(flatten)]
    source: Source,
    #[arg(long)]
    id: String,
    /// Class to explain instead of the predicted one.
    #[arg(long)]
    target_class: Option<usize>,
    #[arg(long, env = WORKERS_ENV)]
    workers: Option<usize>,
    /// Saliency JSON output path.
    #[arg(long)]
    out: PathBuf,
    /// Also write an SVG rendering to this path.
    #[arg(long)]
    render: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[command(flatten)]
    source: Source,
    /// Perturbation std as a fraction of max |X|.
    #[arg(long, default_value_t = metrics::DEFAULT_SIGMA)]
    sigma: f64,
    /// Monte-Carlo samples per instance.
    #[arg(long, default_value_t = metrics::DEFAULT_SAMPLES)]
    samples: usize,
    #[arg(long)]
    seed: u64,
    /// Only evaluate the first N graphs.
    #[arg(long)]
    limit: Option<usize>,
    #[arg(long, env = WORKERS_ENV)]
    workers: Option<usize>,
    /// Output directory for report.json, report.txt and rows.csv.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum RenderFormat {
    Svg,
    Dot,
}

#[derive(Args, Debug)]
struct RenderArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    id: String,
    /// Saliency JSON written by `explain`.
    #[arg(long)]
    saliency: PathBuf,
    #[arg(long, value_enum, default_value_t = RenderFormat::Svg)]
    format: RenderFormat,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Kind {
    Gcn,
    Gat,
}

#[derive(Args, Debug)]
struct SynthArgs {
    /// Dataset output path (JSON Lines).
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 8)]
    count: usize,
    #[arg(long, default_value_t = 4)]
    rows: usize,
    #[arg(long, default_value_t = 4)]
    cols: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also write a randomly initialised model here.
    #[arg(long)]
    model_out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Kind::Gcn)]
    kind: Kind,
    #[arg(long, default_value_t = 16)]
    hidden: usize,
    /// Number of graph layers.
    #[arg(long, default_value_t = 4)]
    depth: usize,
    #[arg(long, default_value_t = 10)]
    classes: usize,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{text}");
                    0
                }
                _ => {
                    let _ = write!(stderr, "{text}");
                    1
                }
            };
        }
    };
    match dispatch(cli.command, stdout, stderr) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cmd: Command, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<()> {
    match cmd {
        Command::Forward(a) => cmd_forward(a, stdout),
        Command::Explain(a) => cmd_explain(a, stdout),
        Command::Eval(a) => cmd_eval(a, stdout, stderr),
        Command::Render(a) => cmd_render(a, stdout),
        Command::Synth(a) => cmd_synth(a, stdout),
    }
}

fn print_json(stdout: &mut dyn Write, v: &serde_json::Value) -> Result<()> {
    writeln!(stdout, "{}", serde_json::to_string(v)?)?;
    Ok(())
}

fn bind_graph(rec: &DatasetRecord, model: &ModelSpec) -> Result<Graph> {
    if rec.label >= model.num_classes {
        return Err(Error::format(format!(
            "graph {:?} has label {} but the model has {} classes",
            rec.graph_id, rec.label, model.num_classes
        )));
    }
    if rec.num_features() != model.input_dim() {
        return Err(Error::dim(
            format!("node features of graph {:?}", rec.graph_id),
            model.input_dim(),
            rec.num_features(),
        ));
    }
    rec.to_graph()
}

fn load_one(source: &Source, id: &str) -> Result<(ModelSpec, Graph)> {
    let model = io::load_model(&source.model)?;
    let rec = io::find_record(&source.dataset, id)?;
    let g = bind_graph(&rec, &model)?;
    Ok((model, g))
}

fn cmd_forward(a: ForwardArgs, stdout: &mut dyn Write) -> Result<()> {
    let (model, g) = load_one(&a.source, &a.id)?;
    let r = model.forward(&g)?;
    print_json(
        stdout,
        &json!({ "graph_id": a.id, "logits": r.logits, "class": r.predicted_class() }),
    )
}

fn cmd_explain(a: ExplainArgs, stdout: &mut dyn Write) -> Result<()> {
    let (model, g) = load_one(&a.source, &a.id)?;
    if let Some(c) = a.target_class {
        if c >= model.num_classes {
            return Err(Error::Config(format!(
                "--target-class {c} out of range for {} classes",
                model.num_classes
            )));
        }
    }
    let s = crate::with_workers(a.workers, || explain_class(&g, &model, a.target_class))??;
    io::save_saliency(&s, &a.out)?;
    if let Some(path) = &a.render {
        fs::write(path, render::render_svg(&g, &s.saliency)?)?;
    }
    print_json(
        stdout,
        &json!({
            "graph_id": a.id,
            "class_index": s.class_index(),
            "out": a.out,
            "render": a.render,
        }),
    )
}

fn cmd_eval(a: EvalArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<()> {
    let cfg = MetricConfig {
        perturbation_sigma: a.sigma,
        num_samples: a.samples,
        rng_seed: a.seed,
        sparsity_mode: SparsityMode::L1Normalized,
    };
    cfg.validate()?;
    let model = io::load_model(&a.source.model)?;
    let mut graphs = Vec::new();
    for rec in io::open_dataset(&a.source.dataset)? {
        if a.limit.is_some_and(|l| graphs.len() >= l) {
            break;
        }
        graphs.push(bind_graph(&rec?, &model)?);
    }
    let report = crate::with_workers(a.workers, || {
        metrics::evaluate_dataset(
            &graphs,
            &model,
            |g| explain_class(g, &model, None),
            &cfg,
            "SCGNN",
            model.kind().name(),
        )
    })??;
    if report.num_failed > 0 {
        let _ = writeln!(stderr, "warning: {} of {} instances failed", report.num_failed, report.rows.len());
        for r in report.rows.iter().filter(|r| r.error.is_some()) {
            let _ = writeln!(stderr, "  {}: {}", r.graph_id, r.error.as_deref().unwrap_or(""));
        }
    }
    fs::create_dir_all(&a.out)?;
    let json_path = a.out.join("report.json");
    let txt_path = a.out.join("report.txt");
    let csv_path = a.out.join("rows.csv");
    fs::write(&json_path, serde_json::to_string_pretty(&report)? + "\n")?;
    fs::write(&txt_path, report.to_table())?;
    report.write_csv(fs::File::create(&csv_path)?)?;
    print_json(
        stdout,
        &json!({
            "mean_infidelity": report.mean_infidelity,
            "std_infidelity": report.std_infidelity,
            "mean_sparsity": report.mean_sparsity,
            "std_sparsity": report.std_sparsity,
            "num_succeeded": report.num_succeeded,
            "num_failed": report.num_failed,
            "files": [json_path, txt_path, csv_path],
        }),
    )
}

fn cmd_render(a: RenderArgs, stdout: &mut dyn Write) -> Result<()> {
    let g = io::find_record(&a.dataset, &a.id)?.to_graph()?;
    let s: SaliencyFile = io::load_saliency(&a.saliency)?;
    let text = match a.format {
        RenderFormat::Svg => render::render_svg(&g, &s.saliency)?,
        RenderFormat::Dot => render::render_dot(&g, &s.saliency)?,
    };
    fs::write(&a.out, text)?;
    print_json(stdout, &json!({ "graph_id": a.id, "out": a.out }))
}

fn cmd_synth(a: SynthArgs, stdout: &mut dyn Write) -> Result<()> {
    if a.count == 0 {
        return Err(Error::Config("--count must be >= 1".into()));
    }
    if a.rows == 0 || a.cols == 0 {
        return Err(Error::Config("--rows and --cols must be >= 1".into()));
    }
    let records = (0..a.count as u64)
        .map(|i| {
            let mut r = io::synthetic_grid_graph(a.rows, a.cols, a.seed.wrapping_add(i))?;
            r.graph_id = i.to_string();
            Ok(r)
        })
        .collect::<Result<Vec<_>>>()?;
    let header = json!({ "generator": "grid", "rows": a.rows, "cols": a.cols, "seed": a.seed });
    io::save_dataset(&a.out, Some(&header), &records)?;
    if let Some(path) = &a.model_out {
        if a.depth == 0 || a.hidden == 0 || a.classes == 0 {
            return Err(Error::Config("--depth, --hidden and --classes must be >= 1".into()));
        }
        let kind = match a.kind {
            Kind::Gcn => LayerKind::Gcn,
            Kind::Gat => LayerKind::Gat,
        };
        let mut widths = vec![1];
        widths.extend(std::iter::repeat_n(a.hidden, a.depth));
        let model = random_model(kind, &widths, a.classes, AdjacencyNormalization::SymSelfloop, a.seed)?;
        io::save_model(&model, path)?;
    }
    print_json(
        stdout,
        &json!({ "dataset": a.out, "count": a.count, "model": a.model_out.as_deref().map(Path::to_path_buf) }),
    )
}
