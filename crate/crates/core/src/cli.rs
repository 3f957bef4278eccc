//! Command-line front end: `chartqa <command>`.
//!
//! Exit codes: 0 success, 1 usage error, 2 runtime error. On a runtime
//! error everything computed so far has already been written.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::chart::{parse_chart_spec, rasterize, DataTable};
use crate::extraction::extract_table;
use crate::harness::{
    build_vocab, generate_dataset, gradcheck_probe, load_dataset, run_eval, run_filter, training_examples,
    write_dataset, Answerer, DatasetConfig, NoiseModel, Pipeline, SplitTag,
};
use crate::metrics::RELAXED_TOLERANCE;
use crate::neural::{
    grad_check, load_checkpoint, predict_answer, save_checkpoint, train_with, write_loss_curve, ModelConfig,
    ModelInput, TrainConfig, VisionTapas,
};
use crate::qa::{execute, AggregationOp, CellSelection};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Parser)]
#[command(name = "chartqa", version, about = "Chart question answering: data generation, extraction, QA and evaluation")]
struct Cli {
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output file or directory (command specific).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic dataset (manifest, chart specs, tables).
    Gen(GenArgs),
    /// Extract data tables from chart spec files.
    Extract {
        #[arg(required = true)]
        specs: Vec<PathBuf>,
    },
    /// Answer one question with the executor or a trained model.
    Answer(AnswerArgs),
    /// Screen a dataset with the answer-in-table filter.
    Filter {
        manifest: PathBuf,
        #[arg(long, value_enum, default_value_t = PipelineArg::Extracted)]
        pipeline: PipelineArg,
        #[arg(long, default_value_t = RELAXED_TOLERANCE)]
        tolerance: f64,
    },
    /// Train the model on a dataset's train split.
    Train(TrainArgs),
    /// Compare analytic and finite-difference gradients on a probe sample.
    Gradcheck(GradcheckArgs),
    /// Answer every question of a dataset and report relaxed accuracy.
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
struct GenArgs {
    /// Total charts, split across types by the default proportions.
    #[arg(long, default_value_t = 100)]
    charts: usize,
    /// Bar chart count; with --lines/--pies replaces --charts.
    #[arg(long)]
    bars: Option<usize>,
    #[arg(long)]
    lines: Option<usize>,
    #[arg(long)]
    pies: Option<usize>,
    #[arg(long)]
    questions_per_chart: Option<usize>,
    /// Fraction of planted unanswerable questions.
    #[arg(long)]
    unanswerable: Option<f64>,
    /// Full dataset config as JSON; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 0.0)]
    keypoint_sigma: f64,
    #[arg(long, default_value_t = 0.0)]
    color_sigma: f64,
    #[arg(long, default_value_t = 0.0)]
    label_dropout: f64,
    /// Also write square rasters of this size (a multiple of 16).
    #[arg(long)]
    raster: Option<usize>,
}

#[derive(Debug, Args)]
struct AnswerArgs {
    #[arg(long)]
    question: String,
    /// Table CSV; extracted from --chart when absent.
    #[arg(long)]
    table: Option<PathBuf>,
    #[arg(long)]
    chart: Option<PathBuf>,
    /// Aggregation op for the executor (NONE, SUM, ...).
    #[arg(long)]
    op: Option<String>,
    /// Cells for the executor as `row,col;row,col`.
    #[arg(long)]
    cells: Option<String>,
    /// Answer with a trained model instead of --op/--cells.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    manifest: PathBuf,
    #[arg(long, default_value_t = 30)]
    epochs: usize,
    #[arg(long, default_value_t = 16)]
    batch_size: usize,
    #[arg(long, default_value_t = 2e-3)]
    lr: f64,
    #[arg(long, default_value_t = 100)]
    warmup: usize,
    /// Loss curve CSV; defaults next to the checkpoint.
    #[arg(long)]
    curve: Option<PathBuf>,
    /// Model config as JSON.
    #[arg(long)]
    model_config: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct GradcheckArgs {
    /// Use the embeddings-only model.
    #[arg(long)]
    linear_only: bool,
    /// One layer per encoder instead of the default depth.
    #[arg(long)]
    small: bool,
    #[arg(long, default_value_t = 200)]
    coords: usize,
    #[arg(long, default_value_t = 1e-5)]
    eps: f64,
    /// Fail above this relative error (default 1e-4, 1e-8 linear-only).
    #[arg(long)]
    threshold: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum PipelineArg {
    #[value(alias = "gold_table")]
    Gold,
    #[value(alias = "extracted_table")]
    Extracted,
}

impl From<PipelineArg> for Pipeline {
    fn from(p: PipelineArg) -> Self {
        match p {
            PipelineArg::Gold => Pipeline::GoldTable,
            PipelineArg::Extracted => Pipeline::ExtractedTable,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum AnswererArg {
    #[value(alias = "oracle_executor")]
    Oracle,
    #[value(alias = "neural_model")]
    Neural,
}

#[derive(Debug, Args)]
struct EvalArgs {
    manifest: PathBuf,
    #[arg(long, value_enum, default_value_t = PipelineArg::Gold)]
    pipeline: PipelineArg,
    #[arg(long, value_enum, default_value_t = AnswererArg::Oracle)]
    answerer: AnswererArg,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long, default_value_t = RELAXED_TOLERANCE)]
    tolerance: f64,
    /// Only charts of this split.
    #[arg(long, value_parser = parse_split)]
    split: Option<SplitTag>,
}

fn parse_split(s: &str) -> std::result::Result<SplitTag, String> {
    match s {
        "train" => Ok(SplitTag::Train),
        "validation" => Ok(SplitTag::Validation),
        "test" => Ok(SplitTag::Test),
        _ => Err(format!("unknown split {s:?} (train, validation, test)")),
    }
}

/// Where results go: `--out` if given, stdout otherwise.
struct Sink<'a> {
    out: Option<&'a Path>,
    stdout: &'a mut dyn Write,
}

impl Sink<'_> {
    fn emit(&mut self, bytes: &[u8]) -> Result<()> {
        match self.out {
            Some(p) => fs::write(p, bytes).with_context(|| format!("writing {}", p.display())),
            None => self.stdout.write_all(bytes).context("writing stdout"),
        }
    }

    fn json<T: Serialize>(&mut self, value: &T) -> Result<()> {
        let mut s = serde_json::to_string_pretty(value)?;
        s.push('\n');
        self.emit(s.as_bytes())
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let raw = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let de = &mut serde_json::Deserializer::from_str(&raw);
    serde_path_to_error::deserialize(de).map_err(|e| anyhow::anyhow!("{}: at {}: {}", path.display(), e.path(), e.inner()))
}

fn run_gen(cli: &Cli, a: &GenArgs, stdout: &mut dyn Write) -> Result<()> {
    let mut config = match &a.config {
        Some(p) => read_json::<DatasetConfig>(p)?,
        None => DatasetConfig::with_total_charts(a.charts),
    };
    if a.bars.is_some() || a.lines.is_some() || a.pies.is_some() {
        config.bars = a.bars.unwrap_or(0);
        config.lines = a.lines.unwrap_or(0);
        config.pies = a.pies.unwrap_or(0);
    }
    if let Some(q) = a.questions_per_chart {
        config.questions_per_chart = q;
    }
    if let Some(u) = a.unanswerable {
        config.unanswerable_fraction = u;
    }
    if a.raster.is_some() {
        config.raster_size = a.raster;
    }
    let noise = NoiseModel {
        keypoint_sigma: a.keypoint_sigma,
        color_sigma: a.color_sigma,
        label_dropout: a.label_dropout,
    };
    let dataset = generate_dataset(&config, &noise, cli.seed)?;
    let dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("dataset"));
    let manifest = write_dataset(&dataset, &dir)?;
    match cli.format {
        Format::Json => {
            let summary = serde_json::json!({
                "manifest": manifest,
                "charts": dataset.charts.len(),
                "questions": dataset.examples().count(),
                "seed": cli.seed,
            });
            writeln!(stdout, "{}", serde_json::to_string_pretty(&summary)?)?;
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(stdout);
            w.write_record(["chart_id", "chart_type", "split", "questions"])?;
            for c in &dataset.charts {
                w.write_record([&c.chart_id, c.chart_type.as_str(), c.split.as_str(), &c.qa.len().to_string()])?;
            }
            w.flush()?;
        }
    }
    Ok(())
}

fn run_extract(cli: &Cli, specs: &[PathBuf], stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<()> {
    let mut failures = 0;
    let mut results = Vec::new();
    for path in specs {
        let id = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        let outcome = fs::read_to_string(path)
            .with_context(|| format!("reading {}", path.display()))
            .and_then(|raw| parse_chart_spec(&raw).with_context(|| format!("{}", path.display())))
            .and_then(|spec| extract_table(&spec).with_context(|| format!("{}", path.display())));
        match outcome {
            Ok(e) => {
                for d in &e.diagnostics {
                    writeln!(stderr, "{}", d.to_json_line(&id))?;
                }
                results.push((id, e));
            }
            Err(err) => {
                failures += 1;
                writeln!(stderr, "error: {err:#}")?;
            }
        }
    }
    match cli.format {
        Format::Csv => {
            let mut text = String::new();
            for (i, (_, e)) in results.iter().enumerate() {
                if i > 0 {
                    text.push('\n');
                }
                text.push_str(&e.table.to_csv());
            }
            Sink { out: cli.out.as_deref(), stdout }.emit(text.as_bytes())?;
        }
        Format::Json => {
            let list: Vec<_> = results
                .iter()
                .map(|(id, e)| {
                    serde_json::json!({
                        "chart_id": id,
                        "col_headers": e.table.col_headers(),
                        "row_labels": e.table.row_labels(),
                        "cells": e.table.rows(),
                        "diagnostics": e.diagnostics,
                    })
                })
                .collect();
            Sink { out: cli.out.as_deref(), stdout }.json(&list)?;
        }
    }
    if failures > 0 {
        bail!("{failures} of {} charts failed", specs.len());
    }
    Ok(())
}

fn parse_cells(s: &str) -> Result<CellSelection> {
    let cells = s
        .split(';')
        .filter(|p| !p.trim().is_empty())
        .map(|pair| {
            let (r, c) = pair.split_once(',').with_context(|| format!("cell {pair:?} is not row,col"))?;
            Ok((r.trim().parse()?, c.trim().parse()?))
        })
        .collect::<Result<Vec<(usize, usize)>>>()?;
    Ok(CellSelection::new(cells))
}

fn run_answer(cli: &Cli, a: &AnswerArgs, stdout: &mut dyn Write) -> Result<()> {
    let spec = match &a.chart {
        Some(p) => {
            let raw = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            Some(parse_chart_spec(&raw).with_context(|| format!("{}", p.display()))?)
        }
        None => None,
    };
    let table: DataTable = match (&a.table, &spec) {
        (Some(p), _) => {
            let raw = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            DataTable::from_csv(&raw).with_context(|| format!("{}", p.display()))?
        }
        (None, Some(s)) => extract_table(s)?.table,
        (None, None) => bail!("need --table or --chart"),
    };
    let (op, cells, answer) = match &a.checkpoint {
        Some(ck) => {
            let spec = spec.as_ref().context("the model needs --chart to render the image")?;
            let (model, vocab) = load_checkpoint(ck)?;
            let raster = rasterize(spec, model.config().image_size);
            let input = ModelInput::new(model.config(), &vocab, &raster, &a.question, &table)?;
            let p = predict_answer(&model.forward(&input)?, &table)?;
            (p.op, p.cells, p.answer)
        }
        None => {
            let name = a.op.as_deref().context("need --op and --cells, or --checkpoint")?;
            let op = AggregationOp::parse(name).with_context(|| format!("unknown op {name:?}"))?;
            let cells = parse_cells(a.cells.as_deref().unwrap_or(""))?;
            let answer = execute(op, &cells, &table)?;
            (op, cells, answer)
        }
    };
    let mut sink = Sink { out: cli.out.as_deref(), stdout };
    match cli.format {
        Format::Json => sink.json(&serde_json::json!({
            "question": a.question,
            "op": op.name(),
            "cells": cells,
            "answer": answer.to_string(),
        })),
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["question", "op", "answer"])?;
            w.write_record([a.question.as_str(), op.name(), &answer.to_string()])?;
            sink.emit(&w.into_inner()?)
        }
    }
}

fn run_filter_cmd(cli: &Cli, manifest: &Path, pipeline: PipelineArg, tol: f64, stdout: &mut dyn Write) -> Result<()> {
    let dataset = load_dataset(manifest)?;
    let report = run_filter(&dataset, pipeline.into(), tol);
    let mut sink = Sink { out: cli.out.as_deref(), stdout };
    match cli.format {
        Format::Json => sink.json(&report),
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["chart_id", "question", "planted", "kept"])?;
            for r in &report.rows {
                w.write_record([&r.chart_id, &r.question, &r.planted.to_string(), &r.kept.to_string()])?;
            }
            sink.emit(&w.into_inner()?)
        }
    }
}

fn run_train(cli: &Cli, a: &TrainArgs, stdout: &mut dyn Write) -> Result<()> {
    let dataset = load_dataset(&a.manifest)?;
    let vocab = build_vocab(&dataset);
    let base: ModelConfig = match &a.model_config {
        Some(p) => read_json(p)?,
        None => ModelConfig::default(),
    };
    let config = ModelConfig {
        vocab_size: vocab.len(),
        seed: cli.seed,
        ..base
    };
    let train_set = training_examples(&dataset, &config, &vocab, Some(SplitTag::Train))?;
    let validation = training_examples(&dataset, &config, &vocab, Some(SplitTag::Validation))?;
    let mut model = VisionTapas::new(config)?;
    let tc = TrainConfig {
        epochs: a.epochs,
        batch_size: a.batch_size,
        learning_rate: a.lr,
        warmup_steps: a.warmup,
        final_lr_fraction: 0.05,
        seed: cli.seed,
        ..TrainConfig::default()
    };
    let ckpt = cli.out.clone().unwrap_or_else(|| PathBuf::from("model.ckpt"));
    let curve_path = a.curve.clone().unwrap_or_else(|| ckpt.with_extension("loss.csv"));
    let result = train_with(&mut model, &train_set, &validation, &tc, |p| {
        let _ = writeln!(stdout, "{}", serde_json::to_string(p).unwrap_or_default());
    });
    let report = match result {
        Ok(r) => r,
        Err(e) => bail!("training failed: {e}"),
    };
    let file = fs::File::create(&curve_path).with_context(|| format!("creating {}", curve_path.display()))?;
    write_loss_curve(&report.curve, file)?;
    save_checkpoint(&model, &vocab, &ckpt)?;
    if cli.format == Format::Json {
        writeln!(
            stdout,
            "{}",
            serde_json::json!({ "checkpoint": ckpt, "loss_curve": curve_path, "steps": report.steps, "train_examples": train_set.len(), "validation_examples": validation.len() })
        )?;
    }
    Ok(())
}

fn run_gradcheck(cli: &Cli, a: &GradcheckArgs, stdout: &mut dyn Write) -> Result<()> {
    let base = if a.linear_only {
        ModelConfig::linear_only()
    } else if a.small {
        ModelConfig {
            vit_layers: 1,
            tapas_layers: 1,
            cross_blocks: 1,
            ..ModelConfig::default()
        }
    } else {
        ModelConfig::default()
    };
    let base = ModelConfig { seed: cli.seed, ..base };
    let (model, input, target) = gradcheck_probe(&base)?;
    let report = grad_check(&model, &input, &target, 1.0, a.eps, a.coords, cli.seed)?;
    let threshold = a.threshold.unwrap_or(if a.linear_only { 1e-8 } else { 1e-4 });
    let mut sink = Sink { out: cli.out.as_deref(), stdout };
    match cli.format {
        Format::Json => sink.json(&serde_json::json!({
            "max_rel_error": report.max_rel_error,
            "worst_tensor": report.worst_tensor,
            "threshold": threshold,
            "pass": report.max_rel_error < threshold,
            "per_tensor": report.per_tensor,
        }))?,
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["tensor", "checked", "max_rel_error"])?;
            for t in &report.per_tensor {
                w.write_record([&t.name, &t.checked.to_string(), &t.max_rel_error.to_string()])?;
            }
            sink.emit(&w.into_inner()?)?;
        }
    }
    if report.max_rel_error >= threshold {
        bail!(
            "max relative error {:.3e} in {} is not below {threshold:e}",
            report.max_rel_error,
            report.worst_tensor
        );
    }
    Ok(())
}

fn run_eval_cmd(cli: &Cli, a: &EvalArgs, stdout: &mut dyn Write) -> Result<()> {
    let mut dataset = load_dataset(&a.manifest)?;
    if let Some(s) = a.split {
        dataset.charts.retain(|c| c.split == s);
    }
    let answerer = match (a.answerer, &a.checkpoint) {
        (AnswererArg::Oracle, _) => Answerer::OracleExecutor,
        (AnswererArg::Neural, Some(ck)) => {
            let (model, vocab) = load_checkpoint(ck)?;
            Answerer::Neural {
                model: Box::new(model),
                vocab,
            }
        }
        (AnswererArg::Neural, None) => bail!("--answerer neural needs --checkpoint"),
    };
    let report = run_eval(&dataset, a.pipeline.into(), &answerer, a.tolerance);
    let mut sink = Sink { out: cli.out.as_deref(), stdout };
    match cli.format {
        Format::Json => sink.json(&report),
        Format::Csv => {
            let mut buf = Vec::new();
            report.write_csv(&mut buf)?;
            sink.emit(&buf)
        }
    }
}

/// Runs the CLI on `argv` (program name first) and returns the exit code.
pub fn dispatch_with(argv: &[String], stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(stdout, "{}", e.render());
                return 0;
            }
            let _ = writeln!(stderr, "{}", e.render());
            let _ = writeln!(stderr, "{}", <Cli as clap::CommandFactory>::command().render_help());
            return 1;
        }
    };
    let result = match &cli.command {
        Command::Gen(a) => run_gen(&cli, a, stdout),
        Command::Extract { specs } => run_extract(&cli, specs, stdout, stderr),
        Command::Answer(a) => run_answer(&cli, a, stdout),
        Command::Filter {
            manifest,
            pipeline,
            tolerance,
        } => run_filter_cmd(&cli, manifest, *pipeline, *tolerance, stdout),
        Command::Train(a) => run_train(&cli, a, stdout),
        Command::Gradcheck(a) => run_gradcheck(&cli, a, stdout),
        Command::Eval(a) => run_eval_cmd(&cli, a, stdout),
    };
    let _ = stdout.flush();
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e:#}");
            2
        }
    }
}

/// [`dispatch_with`] on the process's stdout and stderr.
pub fn dispatch(argv: &[String]) -> i32 {
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    dispatch_with(argv, &mut stdout.lock(), &mut stderr.lock())
}
