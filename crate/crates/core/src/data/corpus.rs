use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::{
    discretize, drop_incomplete, load_table, parse_model_source, DatasetRecipe, DiscreteDataset, DropReport,
    TableFormat,
};
use crate::error::{Error, Result};
use crate::model::QualitativeModel;

/// A directory of datasets, one sub-directory each holding `recipe.json`,
/// the raw table and one or more model files.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    root: PathBuf,
}

/// A dataset discretized and paired with its model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PreparedDataset {
    pub id: String,
    pub bins: usize,
    /// Columns in model order.
    pub dataset: DiscreteDataset,
    pub model: QualitativeModel,
    pub cutpoints: BTreeMap<String, Vec<f64>>,
    pub rows: DropReport,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

impl Corpus {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Corpus { root: root.into() }
    }

    /// The corpus shipped with this crate.
    pub fn bundled() -> Self {
        Corpus::new(concat!(env!("CARGO_MANIFEST_DIR"), "/corpus"))
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Ids of every dataset with a recipe, sorted.
    pub fn datasets(&self) -> Result<Vec<String>> {
        let entries = fs::read_dir(&self.root).map_err(|e| Error::io(&self.root, e))?;
        let mut ids = Vec::new();
        for entry in entries {
            let entry = entry.map_err(|e| Error::io(&self.root, e))?;
            if entry.path().join("recipe.json").is_file() {
                ids.push(entry.file_name().to_string_lossy().into_owned());
            }
        }
        ids.sort();
        Ok(ids)
    }

    pub fn dir(&self, id: &str) -> PathBuf {
        self.root.join(id)
    }

    pub fn recipe(&self, id: &str) -> Result<DatasetRecipe> {
        let path = self.dir(id).join("recipe.json");
        if !path.is_file() {
            return Err(Error::Spec(format!("no dataset `{id}` in {}", self.root.display())));
        }
        Ok(serde_json::from_str(&read(&path)?)?)
    }

    /// Loads `id` at `bins` with its default model.
    pub fn load(&self, id: &str, bins: usize) -> Result<PreparedDataset> {
        self.load_with_model(id, bins, None)
    }

    /// Loads `id` at `bins`; `model` names an alternative model file in the
    /// dataset directory.
    pub fn load_with_model(&self, id: &str, bins: usize, model: Option<&str>) -> Result<PreparedDataset> {
        let recipe = self.recipe(id)?;
        let dir = self.dir(id);
        let raw_path = dir.join(&recipe.source);
        let file = fs::File::open(&raw_path).map_err(|e| Error::io(&raw_path, e))?;
        let raw = load_table(file, &TableFormat::default())?.select(&recipe.source_columns())?;
        let (complete, rows) = drop_incomplete(raw);
        let discretized = discretize(&complete, &recipe, bins)?;
        let model_path = dir.join(model.unwrap_or(&recipe.model));
        let source = parse_model_source(&read(&model_path)?).map_err(|e| match e {
            Error::Parse { line, column, message } => Error::Parse {
                line,
                column,
                message: format!("{}: {message}", model_path.display()),
            },
            other => other,
        })?;
        let data = &discretized.dataset;
        let model = source.resolve(|name| data.column_index(name).map(|i| data.variables()[i].cardinality))?;
        let dataset = data.project(&model)?;
        Ok(PreparedDataset {
            id: recipe.id,
            bins,
            dataset,
            model,
            cutpoints: discretized.cutpoints,
            rows,
        })
    }
}

/// Loads a standalone model file with explicit cardinalities, or with
/// `bins` resolved against `data`.
pub fn load_model_file(path: &Path, data: Option<&DiscreteDataset>) -> Result<QualitativeModel> {
    let source = parse_model_source(&read(path)?)?;
    source.resolve(|name| data.and_then(|d| d.column_index(name).map(|i| d.variables()[i].cardinality)))
}
