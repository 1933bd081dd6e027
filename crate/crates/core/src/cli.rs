//! The `nmfcov` command line.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::cv::{cross_validate, CvPlan, CvResult};
use crate::error::Error;
use crate::gcm::gcm_mle;
use crate::io::{format_f64, read_csv, write_csv, LabeledMatrix, Orientation};
use crate::kernel::{kernel_matrix, scale_features, FeatureMatrix, FeatureRanges};
use crate::matrix::Matrix;
use crate::nmf::{fit, membership_probabilities, r_squared, FitConfig, FitResult, Init, Loss};

#[derive(Debug, Parser)]
#[command(name = "nmfcov", version, about = "Non-negative matrix factorization with covariates, Y ~ X Theta A")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit X and Theta and write the result bundle.
    Fit(FitCmd),
    /// Cross-validate kernel bandwidth (and optionally rank and penalty).
    Cv(CvCmd),
    /// Predict observations and memberships for new covariates.
    Predict(PredictCmd),
    /// Fit, then compare Theta with the growth curve model estimate for the fitted X.
    GcmCompare(FitCmd),
    /// Fit and write soft and hard cluster assignments.
    Cluster(FitCmd),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Individuals {
    Columns,
    Rows,
}

impl From<Individuals> for Orientation {
    fn from(i: Individuals) -> Self {
        match i {
            Individuals::Columns => Orientation::IndividualsInColumns,
            Individuals::Rows => Orientation::IndividualsInRows,
        }
    }
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Observation matrix CSV (header of ids, first column of labels).
    #[arg(long)]
    pub y: PathBuf,
    /// Whether individuals are the columns or the rows of the CSV. Feature
    /// and covariate files are matched to the ids of Y either way.
    #[arg(long, value_enum, default_value = "columns")]
    pub individuals: Individuals,
    /// Subtract min(Y) from every entry so the smallest value is 0.
    #[arg(long)]
    pub min_shift: bool,
}

#[derive(Debug, Args)]
pub struct CovariateArgs {
    /// `identity`, `kernel`, or a CSV of explicit covariates (rows = covariates).
    #[arg(long, default_value = "identity")]
    pub covariates: String,
    /// Feature CSV for a kernel block; repeat for stacked blocks.
    #[arg(long)]
    pub features: Vec<PathBuf>,
    /// Kernel bandwidth; one value for all blocks or one per block.
    #[arg(long)]
    pub beta: Vec<f64>,
    /// Map each feature onto [0, 1] before building the kernel.
    #[arg(long)]
    pub scale_features: bool,
}

#[derive(Debug, Args)]
pub struct OptimArgs {
    #[arg(long, default_value = "euclidean")]
    pub loss: Loss,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long, default_value_t = 5000)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 5)]
    pub restarts: usize,
    /// Start for restart 0: `random` or `kmeans`.
    #[arg(long, default_value = "random")]
    pub init: Init,
    /// Exit with status 5 if the winning start hit --max-iter.
    #[arg(long)]
    pub require_convergence: bool,
}

#[derive(Debug, Args)]
pub struct FitCmd {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub covariates: CovariateArgs,
    #[arg(long, default_value_t = 2)]
    pub rank: usize,
    #[arg(long, default_value_t = 0.0)]
    pub gamma: f64,
    #[command(flatten)]
    pub optim: OptimArgs,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CvCmd {
    #[command(flatten)]
    pub data: DataArgs,
    /// Feature CSV defining the kernel.
    #[arg(long)]
    pub features: PathBuf,
    /// Bandwidth grid, comma-separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub beta: Vec<f64>,
    /// Rank grid, comma-separated.
    #[arg(long, value_delimiter = ',', default_value = "2")]
    pub rank: Vec<usize>,
    /// Penalty grid, comma-separated.
    #[arg(long, value_delimiter = ',', default_value = "0")]
    pub gamma: Vec<f64>,
    #[arg(long, default_value_t = 10)]
    pub folds: usize,
    #[arg(long)]
    pub scale_features: bool,
    #[command(flatten)]
    pub optim: OptimArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PredictCmd {
    /// A fit output directory or its model.json.
    #[arg(long)]
    pub model: PathBuf,
    /// New points, one CSV per kernel block in the fitted order.
    #[arg(long)]
    pub features: Vec<PathBuf>,
    /// New explicit covariates (for models fit with a covariate CSV).
    #[arg(long)]
    pub covariates: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "columns")]
    pub individuals: Individuals,
    #[arg(long)]
    pub out: PathBuf,
}

/// A failed run: exit status plus a one-line reason.
#[derive(Debug, Clone, PartialEq)]
pub struct Failure {
    pub code: i32,
    pub kind: &'static str,
    pub message: String,
}

impl Failure {
    fn validation(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            kind: "validation",
            message: message.into(),
        }
    }
}

fn classify(e: &Error) -> (i32, &'static str) {
    match e {
        Error::CvCell { source, .. } => classify(source),
        Error::InvalidConfig(_) => (2, "validation"),
        e if e.is_numerical() => (4, "numerical"),
        _ => (3, "ingestion"),
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let (code, kind) = classify(&e);
        Self {
            code,
            kind,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Self {
            code: 1,
            kind: "io",
            message: e.to_string(),
        }
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

/// Parses `args` (including the program name), runs the command and
/// returns the process exit status. Errors are printed to stderr as one
/// line: `error: <kind>: <reason>`.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return 0;
        }
        Err(e) => {
            let text = e.to_string();
            let line = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("invalid arguments");
            eprintln!("error: validation: {}", line.trim_start_matches("error: "));
            return 2;
        }
    };
    match execute(&cli.command) {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("error: {}: {}", f.kind, f.message.replace('\n', " "));
            f.code
        }
    }
}

pub fn execute(command: &Command) -> CliResult<()> {
    match command {
        Command::Fit(cmd) => run_fit(cmd, Output::Full),
        Command::Cluster(cmd) => run_fit(cmd, Output::Clusters),
        Command::GcmCompare(cmd) => run_gcm_compare(cmd),
        Command::Cv(cmd) => run_cv(cmd),
        Command::Predict(cmd) => run_predict(cmd),
    }
}

struct Observations {
    y: LabeledMatrix,
    shift: Option<f64>,
}

fn load_observations(args: &DataArgs) -> CliResult<Observations> {
    let mut y = read_csv(&args.y, args.individuals.into())?;
    let shift = if args.min_shift {
        let m = y.matrix.min();
        y.matrix = y.matrix.map(|v| v - m);
        Some(m)
    } else {
        y.check_nonnegative(&args.y.display().to_string())?;
        None
    };
    Ok(Observations { y, shift })
}

/// How the covariate rows were built; saved with the model for prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum CovariateSpec {
    Identity,
    Explicit,
    Kernel { blocks: Vec<KernelBlock> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelBlock {
    pub beta: f64,
    pub feature_names: Vec<String>,
    pub anchor_ids: Vec<String>,
    /// Anchor points after any scaling, one row per feature.
    pub anchors: Vec<Vec<f64>>,
    pub ranges: Option<FeatureRanges>,
}

struct Covariates {
    a: Matrix,
    labels: Vec<String>,
    spec: CovariateSpec,
}

/// Reads a per-individual CSV. When the individuals are known (`ids`), the
/// file may list them as columns or as rows; the side whose labels match
/// `ids` is used and reordered to follow them.
fn read_features(path: &Path, individuals: Individuals, ids: Option<&[String]>) -> CliResult<LabeledMatrix> {
    let Some(ids) = ids else {
        return Ok(read_csv(path, individuals.into())?);
    };
    let f = read_csv(path, Orientation::IndividualsInColumns)?;
    let name = path.display().to_string();
    let same = |labels: &[String]| {
        let mut a = labels.to_vec();
        let mut b = ids.to_vec();
        a.sort();
        b.sort();
        a == b
    };
    let f = if !same(&f.col_labels) && same(&f.row_labels) { f.transpose() } else { f };
    Ok(f.align_columns(ids, &name)?)
}

fn block_betas(args: &CovariateArgs) -> CliResult<Vec<f64>> {
    let blocks = args.features.len();
    match args.beta.len() {
        0 => Err(Failure::validation("kernel covariates need --beta")),
        1 => Ok(vec![args.beta[0]; blocks]),
        k if k == blocks => Ok(args.beta.clone()),
        k => Err(Failure::validation(format!("{k} --beta values for {blocks} --features blocks"))),
    }
}

fn block_label(blocks: usize, b: usize, id: &str) -> String {
    if blocks == 1 {
        id.to_string()
    } else {
        format!("k{}:{id}", b + 1)
    }
}

fn load_covariates(args: &CovariateArgs, individuals: Individuals, ids: &[String]) -> CliResult<Covariates> {
    if args.covariates != "kernel" && (!args.features.is_empty() || !args.beta.is_empty()) {
        return Err(Failure::validation("--features and --beta require --covariates kernel"));
    }
    match args.covariates.as_str() {
        "identity" => Ok(Covariates {
            a: Matrix::identity(ids.len())?,
            labels: ids.to_vec(),
            spec: CovariateSpec::Identity,
        }),
        "kernel" => {
            if args.features.is_empty() {
                return Err(Failure::validation("--covariates kernel needs at least one --features file"));
            }
            let betas = block_betas(args)?;
            let nblocks = args.features.len();
            let mut mats = Vec::with_capacity(nblocks);
            let mut labels = Vec::new();
            let mut blocks = Vec::with_capacity(nblocks);
            for (b, (path, &beta)) in args.features.iter().zip(&betas).enumerate() {
                let raw = read_features(path, individuals, Some(ids))?;
                let points = FeatureMatrix::new(raw.matrix.clone());
                let (points, ranges) = if args.scale_features {
                    let (scaled, ranges) = scale_features(&points)?;
                    (scaled, Some(ranges))
                } else {
                    (points, None)
                };
                mats.push(kernel_matrix(&points, &points, beta)?);
                labels.extend(ids.iter().map(|id| block_label(nblocks, b, id)));
                blocks.push(KernelBlock {
                    beta,
                    feature_names: raw.row_labels,
                    anchor_ids: ids.to_vec(),
                    anchors: points.values().to_rows(),
                    ranges,
                });
            }
            Ok(Covariates {
                a: Matrix::vstack(&mats)?,
                labels,
                spec: CovariateSpec::Kernel { blocks },
            })
        }
        path => {
            let path = Path::new(path);
            let a = read_features(path, individuals, Some(ids))?;
            a.check_nonnegative(&path.display().to_string())?;
            Ok(Covariates {
                a: a.matrix,
                labels: a.row_labels,
                spec: CovariateSpec::Explicit,
            })
        }
    }
}

fn fit_config(rank: usize, gamma: f64, optim: &OptimArgs) -> FitConfig {
    FitConfig {
        rank,
        loss: optim.loss,
        gamma,
        tol: optim.tol,
        max_iter: optim.max_iter,
        seed: optim.seed,
        restarts: optim.restarts,
        init: optim.init,
    }
}

fn basis_labels(q: usize) -> Vec<String> {
    (1..=q).map(|k| format!("basis{k}")).collect()
}

/// Everything needed to predict from a fitted model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelBundle {
    pub variables: Vec<String>,
    pub bases: Vec<String>,
    pub covariate_labels: Vec<String>,
    pub covariates: CovariateSpec,
    pub x: Vec<Vec<f64>>,
    pub theta: Vec<Vec<f64>>,
    pub config: FitConfig,
    pub min_shift: Option<f64>,
}

fn write_json(path: &Path, value: &impl Serialize) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Failure {
        code: 1,
        kind: "io",
        message: e.to_string(),
    })?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn labeled(rows: &[String], cols: &[String], m: Matrix) -> LabeledMatrix {
    LabeledMatrix::new(rows.to_vec(), cols.to_vec(), m).expect("labels built from the same shapes")
}

struct Fitted {
    obs: Observations,
    cov: Covariates,
    config: FitConfig,
    result: FitResult,
}

fn fit_from_args(cmd: &FitCmd) -> CliResult<Fitted> {
    let obs = load_observations(&cmd.data)?;
    let cov = load_covariates(&cmd.covariates, cmd.data.individuals, &obs.y.col_labels)?;
    let config = fit_config(cmd.rank, cmd.gamma, &cmd.optim);
    config.validate(obs.y.matrix.rows(), obs.y.matrix.cols())?;
    let result = fit(&obs.y.matrix, &cov.a, &config)?;
    Ok(Fitted {
        obs,
        cov,
        config,
        result,
    })
}

fn convergence_check(require: bool, result: &FitResult) -> CliResult<()> {
    if require && !result.converged {
        return Err(Failure {
            code: 5,
            kind: "non-convergence",
            message: format!("no convergence within {} iterations", result.iterations),
        });
    }
    Ok(())
}

fn summary_json(cmd: &FitCmd, f: &Fitted) -> serde_json::Value {
    json!({
        "r_squared": f.result.r_squared,
        "objective": f.result.objective(),
        "iterations": f.result.iterations,
        "converged": f.result.converged,
        "restart_index": f.result.restart_index,
        "seed": f.config.seed,
        "config": f.config,
        "input": {
            "y": cmd.data.y.display().to_string(),
            "individuals": format!("{:?}", cmd.data.individuals).to_lowercase(),
            "min_shift": f.obs.shift,
            "covariates": cmd.covariates.covariates,
            "features": cmd.covariates.features.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
            "beta": cmd.covariates.beta,
            "scale_features": cmd.covariates.scale_features,
            "require_convergence": cmd.optim.require_convergence,
        },
        "shape": {
            "variables": f.obs.y.matrix.rows(),
            "individuals": f.obs.y.matrix.cols(),
            "covariates": f.cov.a.rows(),
        },
    })
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Output {
    Full,
    Clusters,
}

fn run_fit(cmd: &FitCmd, output: Output) -> CliResult<()> {
    let f = fit_from_args(cmd)?;
    let model = &f.result.model;
    let vars = &f.obs.y.row_labels;
    let ids = &f.obs.y.col_labels;
    let bases = basis_labels(model.rank());
    let b = model.coefficients();
    let probs = membership_probabilities(&b)?;
    fs::create_dir_all(&cmd.out)?;
    let out = |name: &str| cmd.out.join(name);
    if output == Output::Full {
        write_csv(&out("X.csv"), &labeled(vars, &bases, model.x.clone()), "variable")?;
        write_csv(&out("Theta.csv"), &labeled(&bases, &f.cov.labels, model.theta.clone()), "basis")?;
        write_csv(&out("B.csv"), &labeled(&bases, ids, b.clone()), "basis")?;
        write_csv(&out("Yhat.csv"), &labeled(vars, ids, model.fitted()), "variable")?;
    } else {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| Failure::from(std::io::Error::other(e));
        w.write_record(["id", "cluster", "probability"]).map_err(io)?;
        for (n, id) in ids.iter().enumerate() {
            let col = probs.col(n);
            let k = (0..col.len()).fold(0, |best, q| if col[q] > col[best] { q } else { best });
            w.write_record([id.as_str(), bases[k].as_str(), &format_f64(col[k])]).map_err(io)?;
        }
        fs::write(out("clusters.csv"), w.into_inner().map_err(|e| Failure::from(e.into_error()))?)?;
    }
    write_csv(&out("probabilities.csv"), &labeled(&bases, ids, probs), "basis")?;
    write_json(&out("summary.json"), &summary_json(cmd, &f))?;
    let bundle = ModelBundle {
        variables: vars.clone(),
        bases,
        covariate_labels: f.cov.labels.clone(),
        covariates: f.cov.spec.clone(),
        x: model.x.to_rows(),
        theta: model.theta.to_rows(),
        config: f.config.clone(),
        min_shift: f.obs.shift,
    };
    write_json(&out("model.json"), &bundle)?;
    convergence_check(cmd.optim.require_convergence, &f.result)
}

fn run_gcm_compare(cmd: &FitCmd) -> CliResult<()> {
    let f = fit_from_args(cmd)?;
    let model = &f.result.model;
    let y = &f.obs.y.matrix;
    let est = gcm_mle(y, &model.x, &f.cov.a)?;
    let gcm_fitted = model.x.matmul(&est.theta_hat)?.matmul(&f.cov.a)?;
    let comparison = json!({
        "theta_nmf": model.theta.to_rows(),
        "theta_gcm": est.theta_hat.to_rows(),
        "max_abs_diff": model.theta.max_abs_diff(&est.theta_hat)?,
        "r_squared_nmf": f.result.r_squared,
        "r_squared_gcm": r_squared(y, &gcm_fitted)?,
        "sigma_hat": est.sigma_hat.to_rows(),
        "x": model.x.to_rows(),
        "config": f.config,
        "converged": f.result.converged,
    });
    fs::create_dir_all(&cmd.out)?;
    write_json(&cmd.out.join("comparison.json"), &comparison)?;
    convergence_check(cmd.optim.require_convergence, &f.result)
}

fn cv_curve_csv(res: &CvResult) -> CliResult<Vec<u8>> {
    let io = |e: csv::Error| Failure::from(std::io::Error::other(e));
    let mut w = csv::Writer::from_writer(Vec::new());
    let folds = res.rows.first().map_or(0, |r| r.fold_errors.len());
    let mut header = vec!["beta".to_string(), "rank".into(), "gamma".into(), "mean_error".into()];
    header.extend((1..=folds).map(|k| format!("fold{k}")));
    w.write_record(&header).map_err(io)?;
    for row in &res.rows {
        let mut rec = vec![
            format_f64(row.config.beta),
            row.config.rank.to_string(),
            format_f64(row.config.gamma),
            format_f64(row.mean_error),
        ];
        rec.extend(row.fold_errors.iter().map(|&e| format_f64(e)));
        w.write_record(&rec).map_err(io)?;
    }
    w.into_inner().map_err(|e| Failure::from(e.into_error()))
}

fn run_cv(cmd: &CvCmd) -> CliResult<()> {
    let obs = load_observations(&cmd.data)?;
    let ids = &obs.y.col_labels;
    let n = ids.len();
    let features = read_features(&cmd.features, cmd.data.individuals, Some(ids))?;
    let u = FeatureMatrix::new(features.matrix);
    let mut plan = CvPlan::new(
        n,
        cmd.folds,
        cmd.optim.seed,
        cmd.beta.clone(),
        cmd.rank.clone(),
        cmd.gamma.clone(),
    )?;
    plan.scale_features = cmd.scale_features;
    let base = fit_config(cmd.rank[0], cmd.gamma[0], &cmd.optim);
    base.validate(obs.y.matrix.rows(), n)?;
    let res = cross_validate(&obs.y.matrix, &u, &plan, &base)?;
    fs::create_dir_all(&cmd.out)?;
    fs::write(cmd.out.join("cv_curve.csv"), cv_curve_csv(&res)?)?;
    let best = res.best_row();
    write_json(
        &cmd.out.join("best.json"),
        &json!({
            "beta": best.config.beta,
            "rank": best.config.rank,
            "gamma": best.config.gamma,
            "mean_error": best.mean_error,
            "fold_errors": best.fold_errors,
            "folds": plan.folds,
            "seed": plan.seed,
            "scale_features": plan.scale_features,
            "min_shift": obs.shift,
            "config": base,
        }),
    )?;
    Ok(())
}

fn load_bundle(path: &Path) -> CliResult<ModelBundle> {
    let file = if path.is_dir() { path.join("model.json") } else { path.to_path_buf() };
    let name = file.display().to_string();
    let ingest = |message: String| Failure::from(Error::Ingest { path: name.clone(), message });
    let text = fs::read_to_string(&file).map_err(|e| ingest(e.to_string()))?;
    serde_json::from_str(&text).map_err(|e| ingest(e.to_string()))
}

fn new_covariates(cmd: &PredictCmd, bundle: &ModelBundle) -> CliResult<(Matrix, Vec<String>)> {
    match &bundle.covariates {
        CovariateSpec::Identity => Err(Failure::validation(
            "model was fit with identity covariates; new individuals cannot be predicted",
        )),
        CovariateSpec::Explicit => {
            let path = cmd
                .covariates
                .as_ref()
                .ok_or_else(|| Failure::validation("model uses explicit covariates; pass --covariates"))?;
            let a = read_csv(path, cmd.individuals.into())?;
            let name = path.display().to_string();
            let a = a.transpose().align_columns(&bundle.covariate_labels, &name)?.transpose();
            a.check_nonnegative(&name)?;
            Ok((a.matrix, a.col_labels))
        }
        CovariateSpec::Kernel { blocks } => {
            if cmd.features.len() != blocks.len() {
                return Err(Failure::validation(format!(
                    "model has {} kernel blocks, got {} --features files",
                    blocks.len(),
                    cmd.features.len()
                )));
            }
            let mut ids: Option<Vec<String>> = None;
            let mut mats = Vec::with_capacity(blocks.len());
            for (block, path) in blocks.iter().zip(&cmd.features) {
                let raw = read_features(path, cmd.individuals, ids.as_deref())?;
                if raw.row_labels.len() != block.feature_names.len() {
                    return Err(Error::Dimension {
                        op: "predict features",
                        left: (block.feature_names.len(), block.anchor_ids.len()),
                        right: raw.matrix.shape(),
                    }
                    .into());
                }
                let points = FeatureMatrix::new(raw.matrix);
                let points = match &block.ranges {
                    Some(r) => r.apply(&points)?,
                    None => points,
                };
                let anchors = FeatureMatrix::new(Matrix::from_rows(&block.anchors)?);
                mats.push(kernel_matrix(&anchors, &points, block.beta)?);
                ids.get_or_insert(raw.col_labels);
            }
            Ok((Matrix::vstack(&mats)?, ids.expect("at least one block")))
        }
    }
}

fn run_predict(cmd: &PredictCmd) -> CliResult<()> {
    let bundle = load_bundle(&cmd.model)?;
    let x = Matrix::from_rows(&bundle.x)?;
    let theta = Matrix::from_rows(&bundle.theta)?;
    let (a_new, ids) = new_covariates(cmd, &bundle)?;
    let b = theta.matmul(&a_new)?;
    let pred = x.matmul(&b)?;
    let probs = membership_probabilities(&b)?;
    fs::create_dir_all(&cmd.out)?;
    write_csv(&cmd.out.join("predictions.csv"), &labeled(&bundle.variables, &ids, pred), "variable")?;
    write_csv(&cmd.out.join("probabilities.csv"), &labeled(&bundle.bases, &ids, probs), "basis")?;
    Ok(())
}
