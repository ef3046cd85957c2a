//! ZR, naive Bayes, knowledge-based and constrained knowledge-based
//! classifiers with exact class posteriors under full evidence.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::data::DiscreteDataset;
use crate::error::{Error, Result};
use crate::estimation::{count_stats, fit_network, mle_theta, FitConfig, FitReport};
use crate::model::{CptSet, Edge, MonotoneSign, QualitativeModel};

/// Largest CKB margin accepted.
pub const MAX_EPSILON: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ClassifierKind {
    /// Always predicts the training mode.
    ZeroR,
    NaiveBayes,
    /// Supplied structure, Laplace-smoothed maximum likelihood.
    KnowledgeBased,
    /// Supplied structure fitted under the monotonicity constraints.
    Constrained {
        epsilon: f64,
    },
}

impl ClassifierKind {
    pub fn constrained(epsilon: f64) -> Result<Self> {
        if !(0.0..=MAX_EPSILON).contains(&epsilon) {
            return Err(Error::Spec(format!(
                "CKB margin must lie in [0, {MAX_EPSILON}], got {epsilon}"
            )));
        }
        Ok(ClassifierKind::Constrained { epsilon })
    }
}

impl fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClassifierKind::ZeroR => f.write_str("ZR"),
            ClassifierKind::NaiveBayes => f.write_str("NB"),
            ClassifierKind::KnowledgeBased => f.write_str("KB"),
            ClassifierKind::Constrained { epsilon } => write!(f, "CKB{epsilon}"),
        }
    }
}

impl FromStr for ClassifierKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "ZR" => Ok(ClassifierKind::ZeroR),
            "NB" => Ok(ClassifierKind::NaiveBayes),
            "KB" => Ok(ClassifierKind::KnowledgeBased),
            other => match other.strip_prefix("CKB") {
                Some(eps) => {
                    let epsilon = eps
                        .parse::<f64>()
                        .map_err(|_| Error::Spec(format!("bad CKB margin in `{s}`")))?;
                    ClassifierKind::constrained(epsilon)
                }
                None => Err(Error::Spec(format!("unknown classifier `{s}`"))),
            },
        }
    }
}

impl Serialize for ClassifierKind {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ClassifierKind {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A CPT touching the class variable, prepared for repeated lookups.
#[derive(Debug, Clone)]
struct Factor {
    node: usize,
    parents: Vec<usize>,
    strides: Vec<usize>,
}

#[derive(Debug, Clone)]
enum Body {
    Mode(usize),
    Network {
        model: QualitativeModel,
        cpts: CptSet,
        factors: Vec<Factor>,
    },
}

#[derive(Debug, Clone)]
pub struct TrainedClassifier {
    kind: ClassifierKind,
    class_name: String,
    classes: usize,
    /// Variable names an instance is indexed by.
    variables: Vec<String>,
    body: Body,
    fit: Option<FitReport>,
}

/// Class-parent star over the variables of `model`, unannotated.
pub fn naive_bayes_structure(model: &QualitativeModel) -> Result<QualitativeModel> {
    let class = model.class_name();
    let edges = model
        .variables()
        .iter()
        .filter(|v| v.name != class)
        .map(|v| Edge::new(class, v.name.clone(), MonotoneSign::Unannotated))
        .collect();
    QualitativeModel::new(format!("{}-nb", model.name()), model.variables().to_vec(), edges, class)
}

pub fn train(
    kind: ClassifierKind,
    data: &DiscreteDataset,
    model: &QualitativeModel,
    config: &FitConfig,
) -> Result<TrainedClassifier> {
    let classes = model.cardinality(model.class_index());
    match kind {
        ClassifierKind::ZeroR => {
            if data.is_empty() {
                return Err(Error::Training("ZR needs at least one training row".into()));
            }
            let col = data
                .column_index(model.class_name())
                .ok_or_else(|| Error::Training(format!("no class column `{}`", model.class_name())))?;
            let mut counts = vec![0usize; classes];
            for row in data.rows() {
                let c = row[col];
                if c >= classes {
                    return Err(Error::Training(format!("class state {c} out of range")));
                }
                counts[c] += 1;
            }
            let max = *counts.iter().max().unwrap_or(&0);
            let mode = counts.iter().position(|&n| n == max).unwrap_or(0);
            Ok(TrainedClassifier {
                kind,
                class_name: model.class_name().to_string(),
                classes,
                variables: model.variables().iter().map(|v| v.name.clone()).collect(),
                body: Body::Mode(mode),
                fit: None,
            })
        }
        ClassifierKind::NaiveBayes => {
            let nb = naive_bayes_structure(model)?;
            let cpts = mle_theta(&count_stats(data, &nb, config.alpha)?)?;
            Ok(TrainedClassifier::from_parts(kind, nb, cpts, None))
        }
        ClassifierKind::KnowledgeBased => {
            let cpts = mle_theta(&count_stats(data, model, config.alpha)?)?;
            Ok(TrainedClassifier::from_parts(kind, model.clone(), cpts, None))
        }
        ClassifierKind::Constrained { epsilon } => {
            let (cpts, report) = fit_network(data, model, epsilon, config)?;
            Ok(TrainedClassifier::from_parts(kind, model.clone(), cpts, Some(report)))
        }
    }
}

impl TrainedClassifier {
    /// Wraps given CPTs as a network classifier.
    pub fn from_parts(kind: ClassifierKind, model: QualitativeModel, cpts: CptSet, fit: Option<FitReport>) -> Self {
        let class = model.class_index();
        let factors = std::iter::once(class)
            .chain(model.children(class))
            .map(|node| {
                let indexer = model.indexer(node);
                Factor {
                    node,
                    parents: model.parents(node).iter().map(|p| p.var).collect(),
                    strides: indexer.strides().to_vec(),
                }
            })
            .collect();
        TrainedClassifier {
            kind,
            class_name: model.class_name().to_string(),
            classes: model.cardinality(class),
            variables: model.variables().iter().map(|v| v.name.clone()).collect(),
            body: Body::Network { model, cpts, factors },
            fit,
        }
    }

    pub fn kind(&self) -> ClassifierKind {
        self.kind
    }

    pub fn class_name(&self) -> &str {
        &self.class_name
    }

    /// Variable order expected by [`TrainedClassifier::posterior`].
    pub fn variables(&self) -> &[String] {
        &self.variables
    }

    pub fn model(&self) -> Option<&QualitativeModel> {
        match &self.body {
            Body::Network { model, .. } => Some(model),
            Body::Mode(_) => None,
        }
    }

    pub fn cpts(&self) -> Option<&CptSet> {
        match &self.body {
            Body::Network { cpts, .. } => Some(cpts),
            Body::Mode(_) => None,
        }
    }

    pub fn fit_report(&self) -> Option<&FitReport> {
        self.fit.as_ref()
    }

    /// False only for a constrained fit with a non-converged node.
    pub fn converged(&self) -> bool {
        self.fit.as_ref().is_none_or(FitReport::converged)
    }

    /// `P(class | instance)`. The instance is indexed like
    /// [`TrainedClassifier::variables`]; the class entry is ignored.
    pub fn posterior(&self, instance: &[Option<usize>]) -> Result<Vec<f64>> {
        let (model, cpts, factors) = match &self.body {
            Body::Mode(mode) => {
                let mut p = vec![0.0; self.classes];
                p[*mode] = 1.0;
                return Ok(p);
            }
            Body::Network { model, cpts, factors } => (model, cpts, factors),
        };
        if instance.len() != model.len() {
            return Err(Error::Inference(format!(
                "instance has {} entries, model has {} variables",
                instance.len(),
                model.len()
            )));
        }
        let class = model.class_index();
        let mut values = Vec::with_capacity(instance.len());
        for (i, v) in instance.iter().enumerate() {
            match v {
                _ if i == class => values.push(0),
                Some(x) if *x < model.cardinality(i) => values.push(*x),
                Some(x) => {
                    return Err(Error::Inference(format!(
                        "state {x} out of range for `{}`",
                        model.variable(i).name
                    )))
                }
                None => {
                    return Err(Error::Inference(format!(
                        "no evidence for `{}`",
                        model.variable(i).name
                    )))
                }
            }
        }
        let mut log_scores = vec![0.0; self.classes];
        for (c, score) in log_scores.iter_mut().enumerate() {
            values[class] = c;
            for f in factors {
                let j: usize = f.parents.iter().zip(&f.strides).map(|(&p, &s)| values[p] * s).sum();
                *score += cpts.get(f.node).rows.get(j, values[f.node]).ln();
            }
        }
        let max = log_scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            return Err(Error::Inference(
                "evidence has zero probability under every class".into(),
            ));
        }
        let mut p: Vec<f64> = log_scores.iter().map(|s| (s - max).exp()).collect();
        let z: f64 = p.iter().sum();
        p.iter_mut().for_each(|x| *x /= z);
        Ok(p)
    }

    /// Posterior for a fully observed data row whose columns follow
    /// `columns` (dataset position of each classifier variable).
    fn posterior_of_row(&self, row: &[usize], columns: &[usize]) -> Result<Vec<f64>> {
        let instance: Vec<Option<usize>> = columns.iter().map(|&c| Some(row[c])).collect();
        self.posterior(&instance)
    }

    fn columns_in(&self, data: &DiscreteDataset) -> Result<Vec<usize>> {
        self.variables
            .iter()
            .map(|name| {
                data.column_index(name)
                    .ok_or_else(|| Error::Inference(format!("test data lacks column `{name}`")))
            })
            .collect()
    }

    /// Argmax of the posterior, lowest class on ties.
    pub fn predict(&self, instance: &[Option<usize>]) -> Result<usize> {
        Ok(argmax(&self.posterior(instance)?))
    }

    /// Predicted class and full posterior for every row of `data`.
    pub fn predict_all(&self, data: &DiscreteDataset) -> Result<Vec<(usize, Vec<f64>)>> {
        if let Body::Mode(mode) = self.body {
            let mut p = vec![0.0; self.classes];
            p[mode] = 1.0;
            return Ok(vec![(mode, p); data.len()]);
        }
        let columns = self.columns_in(data)?;
        data.rows()
            .iter()
            .map(|row| {
                let p = self.posterior_of_row(row, &columns)?;
                Ok((argmax(&p), p))
            })
            .collect()
    }

    /// Correctness of each row's prediction.
    pub fn correctness(&self, data: &DiscreteDataset) -> Result<Vec<bool>> {
        let truth_col = data
            .column_index(&self.class_name)
            .ok_or_else(|| Error::Inference(format!("test data lacks class `{}`", self.class_name)))?;
        Ok(self
            .predict_all(data)?
            .iter()
            .zip(data.rows())
            .map(|((pred, _), row)| *pred == row[truth_col])
            .collect())
    }
}

pub fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in p.iter().enumerate() {
        if x > p[best] {
            best = i;
        }
    }
    best
}

/// Fraction of rows classified correctly.
pub fn evaluate_accuracy(clf: &TrainedClassifier, test: &DiscreteDataset) -> Result<f64> {
    if test.is_empty() {
        return Err(Error::Inference("empty test set".into()));
    }
    let hits = clf.correctness(test)?.iter().filter(|&&ok| ok).count();
    Ok(hits as f64 / test.len() as f64)
}

/// CSV of `instance,true,predicted,p1` with `p1 = P(class = 1)`.
pub fn write_predictions(clf: &TrainedClassifier, test: &DiscreteDataset, out: impl Write) -> Result<()> {
    let truth_col = test
        .column_index(clf.class_name())
        .ok_or_else(|| Error::Inference(format!("test data lacks class `{}`", clf.class_name())))?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["instance", "true", "predicted", "p1"])?;
    for (i, ((pred, p), row)) in clf.predict_all(test)?.iter().zip(test.rows()).enumerate() {
        let p1 = p.get(1).copied().unwrap_or(0.0);
        w.write_record([
            i.to_string(),
            row[truth_col].to_string(),
            pred.to_string(),
            format!("{p1:.12}"),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<predictions>", e))?;
    Ok(())
}
