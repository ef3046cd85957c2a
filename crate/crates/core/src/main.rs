use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use monobn::bench::{emit_reports, mcnemar_test, read_predictions, run_learning_curve, ExperimentSpec};
use monobn::classify::{train, write_predictions, ClassifierKind, MAX_EPSILON};
use monobn::constraints::{generate_constraints, is_feasible, DEFAULT_FEASIBILITY_TOLERANCE};
use monobn::data::{
    discretize, drop_incomplete, load_table, parse_model_source, stratified_split, Corpus, DatasetRecipe,
    DiscreteDataset, SplitSpec, TableFormat,
};
use monobn::estimation::{count_stats, fit_network, mle_theta, FitConfig};
use monobn::model::{Cpt, CptSet, QualitativeModel};
use monobn::table::Table;
use monobn::{Error, Result};

#[derive(Parser)]
#[command(
    name = "monobn",
    version,
    about = "Monotonicity-constrained CPT learning for discrete Bayesian networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit CPTs under the model's monotonicity constraints.
    Fit {
        #[command(flatten)]
        input: Input,
        #[arg(long, default_value_t = 0.0)]
        epsilon: f64,
        /// JSON file of fit settings.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Exit with status 2 if any node fails to converge.
        #[arg(long)]
        strict: bool,
    },
    /// Report constraint violations of the unconstrained fit, or of a CPT file.
    Check {
        #[command(flatten)]
        input: Input,
        #[arg(long, default_value_t = 0.0)]
        epsilon: f64,
        /// CPT JSON as written by `fit`.
        #[arg(long)]
        cpts: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_FEASIBILITY_TOLERANCE)]
        tolerance: f64,
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
    },
    /// Turn a raw table into integer state codes plus a cut-point sidecar.
    Discretize {
        /// Raw CSV; defaults to the recipe's source file.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        recipe: PathBuf,
        #[arg(long, default_value_t = 2)]
        bins: usize,
        #[arg(long)]
        out: PathBuf,
        /// Defaults to `<out>.cuts.json`.
        #[arg(long)]
        cutpoints: Option<PathBuf>,
    },
    /// Run a learning-curve experiment described by a JSON spec.
    Curve {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        corpus: Option<PathBuf>,
    },
    /// Train on a stratified pool and write test-set predictions.
    Predict {
        #[command(flatten)]
        input: Input,
        #[arg(long)]
        classifier: ClassifierKind,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1.0 / 3.0)]
        test_fraction: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// McNemar's test on two prediction files over the same instances.
    Mcnemar { a: PathBuf, b: PathBuf },
}

/// Either a corpus dataset or a coded CSV plus model file.
#[derive(Args)]
struct Input {
    /// Dataset id in the corpus.
    #[arg(long, conflicts_with = "data")]
    dataset: Option<String>,
    #[arg(long, default_value_t = 2)]
    bins: usize,
    /// Model file: a path, or a file name inside the dataset directory.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Coded CSV as written by `discretize`.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    corpus: Option<PathBuf>,
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn open(path: &Path) -> Result<fs::File> {
    fs::File::open(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn corpus(dir: &Option<PathBuf>) -> Corpus {
    dir.as_ref().map_or_else(Corpus::bundled, Corpus::new)
}

impl Input {
    fn load(&self) -> Result<(DiscreteDataset, QualitativeModel)> {
        if let Some(id) = &self.dataset {
            let model = self.model.as_ref().map(|p| p.to_string_lossy().into_owned());
            let p = corpus(&self.corpus).load_with_model(id, self.bins, model.as_deref())?;
            return Ok((p.dataset, p.model));
        }
        let (Some(data), Some(model)) = (&self.data, &self.model) else {
            return Err(Error::Spec("give --dataset, or both --data and --model".into()));
        };
        let source = parse_model_source(&read_text(model)?)?;
        let raw = DiscreteDataset::read_csv(open(data)?, &source.class, None)?;
        let model = source.resolve(|n| raw.column_index(n).map(|i| raw.variables()[i].cardinality))?;
        Ok((raw.project(&model)?, model))
    }
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(0.0..=MAX_EPSILON).contains(&epsilon) {
        eprintln!("warning: gradient search struggles to reach the feasible region for margins above {MAX_EPSILON}");
        return Err(Error::Spec(format!(
            "epsilon must lie in [0, {MAX_EPSILON}], got {epsilon}"
        )));
    }
    Ok(())
}

fn emit(out: &Option<PathBuf>, value: &serde_json::Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    match out {
        Some(path) => fs::write(path, text).map_err(|e| Error::Io {
            path: path.clone(),
            source: e,
        }),
        None => io::stdout().write_all(text.as_bytes()).map_err(|e| Error::Io {
            path: "<stdout>".into(),
            source: e,
        }),
    }
}

/// Reads the `cpts` object of a `fit` output (or a bare CPT map).
fn read_cpts(path: &Path, model: &QualitativeModel) -> Result<CptSet> {
    let doc: serde_json::Value = serde_json::from_str(&read_text(path)?)?;
    let map = doc.get("cpts").unwrap_or(&doc);
    let cpts = model
        .variables()
        .iter()
        .map(|v| {
            let entry = map
                .get(&v.name)
                .ok_or_else(|| Error::Spec(format!("CPT file lacks node `{}`", v.name)))?;
            let rows: Vec<Vec<f64>> = serde_json::from_value(entry["rows"].clone())?;
            let parents: Vec<String> = serde_json::from_value(entry["parents"].clone())?;
            Cpt::new(v.name.clone(), parents, Table::from_rows(&rows))
        })
        .collect::<Result<_>>()?;
    Ok(CptSet { cpts })
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Fit {
            input,
            epsilon,
            config,
            out,
            strict,
        } => {
            check_epsilon(epsilon)?;
            let config: FitConfig = match config {
                Some(p) => serde_json::from_str(&read_text(&p)?)?,
                None => FitConfig::default(),
            };
            let (data, model) = input.load()?;
            let (cpts, report) = fit_network(&data, &model, epsilon, &config)?;
            emit(
                &out,
                &serde_json::json!({
                    "model": model.name(),
                    "epsilon": epsilon,
                    "cpts": cpts.to_json(),
                    "report": report,
                }),
            )?;
            if strict && !report.converged() {
                for n in report.nodes.iter().filter(|n| !n.converged) {
                    eprintln!("node `{}` did not converge (max delta {:e})", n.node, n.max_delta);
                }
                return Ok(ExitCode::from(2));
            }
        }
        Command::Check {
            input,
            epsilon,
            cpts,
            tolerance,
            alpha,
        } => {
            check_epsilon(epsilon)?;
            let (data, model) = input.load()?;
            let cpts = match cpts {
                Some(p) => read_cpts(&p, &model)?,
                None => mle_theta(&count_stats(&data, &model, alpha)?)?,
            };
            let constraints = generate_constraints(&model, epsilon)?;
            let report = is_feasible(&cpts, &constraints, tolerance);
            emit(
                &None,
                &serde_json::json!({
                    "constraints": constraints.len(),
                    "feasible": report.feasible,
                    "violations": report.violations,
                }),
            )?;
        }
        Command::Discretize {
            input,
            recipe,
            bins,
            out,
            cutpoints,
        } => {
            let r: DatasetRecipe = serde_json::from_str(&read_text(&recipe)?)?;
            let raw_path = input.unwrap_or_else(|| recipe.parent().unwrap_or(Path::new(".")).join(&r.source));
            let raw = load_table(open(&raw_path)?, &TableFormat::default())?.select(&r.source_columns())?;
            let (complete, dropped) = drop_incomplete(raw);
            let d = discretize(&complete, &r, bins)?;
            let file = fs::File::create(&out).map_err(|e| Error::Io {
                path: out.clone(),
                source: e,
            })?;
            d.dataset.write_csv(file)?;
            let sidecar = cutpoints.unwrap_or_else(|| {
                let mut p = out.clone().into_os_string();
                p.push(".cuts.json");
                p.into()
            });
            emit(
                &Some(sidecar),
                &serde_json::json!({ "bins": bins, "rows": dropped, "cutpoints": d.cutpoints }),
            )?;
        }
        Command::Curve { spec, out, corpus: dir } => {
            let spec: ExperimentSpec = serde_json::from_str(&read_text(&spec)?)?;
            for k in &spec.classifiers {
                if let ClassifierKind::Constrained { epsilon } = k {
                    check_epsilon(*epsilon)?;
                }
            }
            let result = run_learning_curve(&spec, &corpus(&dir))?;
            emit_reports(&result, &spec, &out)?;
        }
        Command::Predict {
            input,
            classifier,
            seed,
            test_fraction,
            out,
        } => {
            let (data, model) = input.load()?;
            let (pool, test) = stratified_split(&data, &SplitSpec { test_fraction, seed })?;
            let clf = train(classifier, &pool, &model, &FitConfig::default())?;
            match out {
                Some(path) => {
                    let file = fs::File::create(&path).map_err(|e| Error::Io {
                        path: path.clone(),
                        source: e,
                    })?;
                    write_predictions(&clf, &test, file)?;
                }
                None => write_predictions(&clf, &test, io::stdout().lock())?,
            }
        }
        Command::Mcnemar { a, b } => {
            let pa = read_predictions(open(&a)?)?;
            let pb = read_predictions(open(&b)?)?;
            if pa.len() != pb.len() || pa.iter().zip(&pb).any(|(x, y)| x.0 != y.0 || x.1 != y.1) {
                return Err(Error::Spec("prediction files cover different instances".into()));
            }
            let truth: Vec<usize> = pa.iter().map(|r| r.1).collect();
            let ra: Vec<usize> = pa.iter().map(|r| r.2).collect();
            let rb: Vec<usize> = pb.iter().map(|r| r.2).collect();
            emit(&None, &serde_json::to_value(mcnemar_test(&ra, &rb, &truth)?)?)?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
