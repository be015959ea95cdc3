//! `sshap train|explain|report|plot`.
//!
//! Exit codes: 0 success, 2 usage / data / document errors, 3 model and
//! protocol errors, 4 estimator budget errors.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::document::{sha256_file, ExplanationDocument, Provenance};
use crate::error::{Error, Result};
use crate::ilr::{basis_from_clustering, basis_from_tree, gram_schmidt_basis, BalanceTree, Linkage, OrthonormalBasis};
use crate::model::{load_csv, train_builtin, CsvOptions, Dataset, ModelHandle, Predictor, TrainOptions};
use crate::plot::{render, FeatureOrdering, FigureKind, FigureSpec};
use crate::report::{build_report, ReportFormat};
use crate::shapley::{exact_shapley, mc_shapley, CharacteristicContext, McOptions};

#[derive(Debug, Parser)]
#[command(name = "sshap", version, about = "Shapley compositions for multiclass classifiers")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit the builtin multinomial logistic regression.
    Train(TrainArgs),
    /// Compute Shapley compositions for one instance.
    Explain(ExplainArgs),
    /// Norms, cosines and class projections of an explanation.
    Report(ReportArgs),
    /// Render an explanation as SVG.
    Plot(PlotArgs),
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Name of the label column.
    #[arg(long)]
    pub target: String,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    pub lr: f64,
    #[arg(long, default_value_t = 2000)]
    pub epochs: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub l2: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Exact,
    Mc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LinkageArg {
    Single,
    Complete,
    Average,
}

#[derive(Debug, Args)]
pub struct ExplainArgs {
    /// `builtin:<model.json>` or `exec:<command line>`.
    #[arg(long)]
    pub model: String,
    /// Background data; also the source of `--instance` when it is an index.
    #[arg(long)]
    pub data: PathBuf,
    /// Label column to drop from the features.
    #[arg(long)]
    pub target: Option<String>,
    /// Row index into `--data`, or an inline comma-separated feature row.
    #[arg(long)]
    pub instance: String,
    #[arg(long, value_enum, default_value_t = Mode::Exact)]
    pub mode: Mode,
    /// Total samples in mc mode; defaults to 1000 per feature.
    #[arg(long)]
    pub m_max: Option<usize>,
    #[arg(long, default_value_t = 30)]
    pub m_min: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// `gram-schmidt`, `tree:<file.json>` or `cluster`.
    #[arg(long, default_value = "gram-schmidt")]
    pub basis: String,
    #[arg(long, value_enum, default_value_t = LinkageArg::Complete)]
    pub linkage: LinkageArg,
    #[arg(long, default_value_t = 1e-6)]
    pub epsilon: f64,
    #[arg(long)]
    pub out: PathBuf,
    /// Timeout for each external model request.
    #[arg(long, default_value_t = 10_000)]
    pub timeout_ms: u64,
    /// Comma-separated class names for an external model.
    #[arg(long)]
    pub class_names: Option<String>,
    /// Recorded verbatim in the provenance block.
    #[arg(long)]
    pub timestamp: Option<String>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub explanation: PathBuf,
    #[arg(long, value_enum, default_value_t = FormatArg::Text)]
    pub format: FormatArg,
    /// Write to a file instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Text,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    Ilr2d,
    Histogram,
    Parallel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OrderingArg {
    ByNorm,
    Input,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    #[arg(long)]
    pub explanation: PathBuf,
    #[arg(long, value_enum)]
    pub kind: KindArg,
    /// Two 1-based balance indices, e.g. `1,2` (ilr2d only).
    #[arg(long, default_value = "1,2")]
    pub dims: String,
    /// Feature order; defaults to by-norm for parallel, input otherwise.
    #[arg(long, value_enum)]
    pub ordering: Option<OrderingArg>,
    #[arg(long, default_value_t = 640.0)]
    pub width: f64,
    #[arg(long, default_value_t = 480.0)]
    pub height: f64,
    #[arg(long, default_value_t = 48.0)]
    pub margin: f64,
    #[arg(long)]
    pub out: PathBuf,
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Train(a) => cmd_train(&a),
        Command::Explain(a) => cmd_explain(&a),
        Command::Report(a) => cmd_report(&a),
        Command::Plot(a) => cmd_plot(&a),
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

pub fn cmd_train(a: &TrainArgs) -> Result<()> {
    let data = load_csv(
        &a.data,
        &CsvOptions {
            target_column: Some(a.target.clone()),
            ..CsvOptions::default()
        },
    )?;
    let model = train_builtin(
        &data,
        &TrainOptions {
            learning_rate: a.lr,
            epochs: a.epochs,
            l2: a.l2,
            seed: a.seed,
        },
    )?;
    write_file(&a.out, &model.to_json()?)?;
    println!(
        "trained {} classes on {} rows x {} features; final loss {:.6}; wrote {}",
        model.class_names.len(),
        data.len(),
        data.num_features(),
        model.training.final_loss,
        a.out.display()
    );
    Ok(())
}

fn parse_instance(spec: &str, data: &Dataset) -> Result<Vec<f64>> {
    let spec = spec.trim();
    if let Ok(index) = spec.parse::<usize>() {
        return data.rows.get(index).cloned().ok_or_else(|| {
            Error::Usage(format!(
                "instance index {index} out of range for {} rows",
                data.len()
            ))
        });
    }
    let row = spec
        .split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| Error::Usage(format!("instance value {v:?} is not a number")))
        })
        .collect::<Result<Vec<_>>>()?;
    if row.len() != data.num_features() {
        return Err(Error::DimensionMismatch {
            expected: data.num_features(),
            got: row.len(),
        });
    }
    Ok(row)
}

fn linkage(a: LinkageArg) -> Linkage {
    match a {
        LinkageArg::Single => Linkage::Single,
        LinkageArg::Complete => Linkage::Complete,
        LinkageArg::Average => Linkage::Average,
    }
}

fn make_basis(a: &ExplainArgs, model: &ModelHandle, data: &Dataset) -> Result<OrthonormalBasis> {
    let classes = model.num_classes();
    if a.basis == "gram-schmidt" {
        return gram_schmidt_basis(classes);
    }
    if let Some(path) = a.basis.strip_prefix("tree:") {
        let s = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let tree = BalanceTree::from_json_str(&s, Some(model.class_names()))?;
        if tree.classes() != classes {
            return Err(Error::DimensionMismatch {
                expected: classes,
                got: tree.classes(),
            });
        }
        return Ok(basis_from_tree(&tree));
    }
    if a.basis == "cluster" {
        let labels = match &data.labels {
            Some(labels) => labels
                .iter()
                .map(|&l| {
                    let name = &data.class_names[l];
                    model
                        .class_names()
                        .iter()
                        .position(|c| c == name)
                        .ok_or_else(|| Error::Usage(format!("label {name:?} is not a model class")))
                })
                .collect::<Result<Vec<_>>>()?,
            None => model.predict(&data.rows)?.iter().map(|p| p.argmax()).collect(),
        };
        let (basis, outcome) = basis_from_clustering(&data.rows, &labels, classes, linkage(a.linkage))?;
        if outcome.singular_covariance {
            log::warn!("pooled covariance is singular; clustered with the identity metric");
        }
        return Ok(basis);
    }
    Err(Error::Usage(format!(
        "basis must be gram-schmidt, tree:<file> or cluster, got {:?}",
        a.basis
    )))
}

pub fn cmd_explain(a: &ExplainArgs) -> Result<()> {
    let mut model = ModelHandle::open(&a.model, a.timeout_ms)?;
    let raw = load_csv(
        &a.data,
        &CsvOptions {
            target_column: a.target.clone(),
            ..CsvOptions::default()
        },
    )?;
    let data = match model.feature_names() {
        Some(names) => raw.select_features(names)?,
        None => raw,
    };
    if data.num_features() != model.num_features() {
        return Err(Error::DimensionMismatch {
            expected: model.num_features(),
            got: data.num_features(),
        });
    }
    if let Some(names) = &a.class_names {
        model.set_class_names(names.split(',').map(|s| s.trim().to_string()).collect())?;
    }
    let instance = parse_instance(&a.instance, &data)?;
    let basis = make_basis(a, &model, &data)?;
    let ctx = CharacteristicContext::new(&model, &instance, &data.rows, &basis)?
        .with_names(data.feature_names.clone(), model.class_names().to_vec())?;
    let explanation = match a.mode {
        Mode::Exact => exact_shapley(&ctx)?,
        Mode::Mc => {
            let defaults = McOptions::defaults_for(data.num_features());
            mc_shapley(
                &ctx,
                &McOptions {
                    m_max: a.m_max.unwrap_or(defaults.m_max),
                    m_min: a.m_min,
                    seed: a.seed,
                    epsilon: Some(a.epsilon),
                },
            )?
        }
    };
    let provenance = Provenance {
        dataset_sha256: Some(sha256_file(&a.data)?),
        timestamp: a.timestamp.clone(),
        ..Provenance::new(a.model.clone())
    };
    let doc = ExplanationDocument::new(explanation, provenance);
    doc.validate()?;
    doc.save(&a.out)?;

    let ex = doc.explanation();
    let k = ex.predicted_class();
    let top = doc
        .features
        .iter()
        .max_by(|x, y| x.shapley.norm().total_cmp(&y.shapley.norm()))
        .map(|f| format!("{} (norm {:.4})", f.name, f.shapley.norm()))
        .unwrap_or_else(|| "none".into());
    println!(
        "predicted {} (p = {:.4}); top feature {}; efficiency residual {:.2e}; wrote {}",
        doc.class_names[k],
        doc.prediction.parts()[k],
        top,
        ex.efficiency_residual(),
        a.out.display()
    );
    Ok(())
}

pub fn cmd_report(a: &ReportArgs) -> Result<()> {
    let doc = ExplanationDocument::load(&a.explanation)?;
    let format = match a.format {
        FormatArg::Text => ReportFormat::Text,
        FormatArg::Json => ReportFormat::Json,
    };
    let text = build_report(&doc)?.render(format)?;
    match &a.out {
        Some(p) => write_file(p, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn parse_dims(s: &str) -> Result<(usize, usize)> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    match parts.as_slice() {
        [a, b] => match (a.parse(), b.parse()) {
            (Ok(a), Ok(b)) => Ok((a, b)),
            _ => Err(Error::InvalidDims(format!("dims {s:?} are not integers"))),
        },
        _ => Err(Error::InvalidDims(format!("dims {s:?} must be two indices"))),
    }
}

pub fn cmd_plot(a: &PlotArgs) -> Result<()> {
    let doc = ExplanationDocument::load(&a.explanation)?;
    let kind = match a.kind {
        KindArg::Ilr2d => FigureKind::Ilr2d,
        KindArg::Histogram => FigureKind::Histogram,
        KindArg::Parallel => FigureKind::Parallel,
    };
    let mut spec = FigureSpec::new(kind);
    spec.dims = parse_dims(&a.dims)?;
    if let Some(o) = a.ordering {
        spec.ordering = match o {
            OrderingArg::ByNorm => FeatureOrdering::ByNorm,
            OrderingArg::Input => FeatureOrdering::Input,
        };
    }
    spec.width = a.width;
    spec.height = a.height;
    spec.margin = a.margin;
    write_file(&a.out, &render(&doc, &spec)?)
}
