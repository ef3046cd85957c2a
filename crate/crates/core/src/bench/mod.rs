//! Replicated learning curves and pairwise significance tallies.
//!
//! One stratified split per experiment; for every training size `m` and
//! replication `r` a training sample is drawn from the pool with its own
//! derived seed, every classifier is trained on that same sample and scored
//! on the same test set.

mod mcnemar;
mod report;

pub use mcnemar::{mcnemar_from_counts, mcnemar_test, McNemarResult, Winner, CRITICAL_VALUE};
pub use report::{emit_reports, read_predictions, Manifest, ReportFiles};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classify::{train, ClassifierKind};
use crate::data::{sample_indices, stratified_split_indices, Corpus, DiscreteDataset, SplitSpec};
use crate::error::{Error, Result};
use crate::estimation::FitConfig;
use crate::model::QualitativeModel;

/// One step of the splitmix64 generator.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub const SEED_SCHEME: &str = "split = splitmix64(master ^ 0x73706c6974); \
    sample(m, r) = splitmix64(splitmix64(splitmix64(master) ^ m) ^ r); \
    generators are ChaCha8 seeded with seed_from_u64";

pub fn split_seed(master: u64) -> u64 {
    splitmix64(master ^ 0x73_706c_6974)
}

pub fn sample_seed(master: u64, m: usize, replication: usize) -> u64 {
    splitmix64(splitmix64(splitmix64(master) ^ m as u64) ^ replication as u64)
}

fn default_classifiers() -> Vec<ClassifierKind> {
    vec![
        ClassifierKind::ZeroR,
        ClassifierKind::NaiveBayes,
        ClassifierKind::KnowledgeBased,
        ClassifierKind::Constrained { epsilon: 0.0 },
        ClassifierKind::Constrained { epsilon: 0.1 },
        ClassifierKind::Constrained { epsilon: 0.2 },
    ]
}

fn default_sizes() -> Vec<usize> {
    (1..=50).collect()
}

fn default_replications() -> usize {
    50
}

fn default_test_fraction() -> f64 {
    1.0 / 3.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub dataset: String,
    pub bins: usize,
    /// Alternative model file inside the dataset directory.
    #[serde(default)]
    pub model: Option<String>,
    #[serde(default = "default_classifiers")]
    pub classifiers: Vec<ClassifierKind>,
    #[serde(default = "default_sizes")]
    pub sizes: Vec<usize>,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
    /// Pairs to compare; every pair of non-ZR classifiers when absent.
    #[serde(default)]
    pub pairs: Option<Vec<(ClassifierKind, ClassifierKind)>>,
    #[serde(default)]
    pub fit: FitConfig,
}

impl ExperimentSpec {
    pub fn new(dataset: impl Into<String>, bins: usize) -> Self {
        ExperimentSpec {
            dataset: dataset.into(),
            bins,
            model: None,
            classifiers: default_classifiers(),
            sizes: default_sizes(),
            replications: default_replications(),
            seed: 0,
            test_fraction: default_test_fraction(),
            pairs: None,
            fit: FitConfig::default(),
        }
    }

    pub fn comparison_pairs(&self) -> Vec<(ClassifierKind, ClassifierKind)> {
        if let Some(p) = &self.pairs {
            return p.clone();
        }
        let scored: Vec<ClassifierKind> = self
            .classifiers
            .iter()
            .copied()
            .filter(|k| *k != ClassifierKind::ZeroR)
            .collect();
        let mut pairs = Vec::new();
        for (i, &a) in scored.iter().enumerate() {
            for &b in &scored[i + 1..] {
                pairs.push((a, b));
            }
        }
        pairs
    }

    fn validate(&self, pool: usize) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::Spec("replications must be at least 1".into()));
        }
        if let Some(&m) = self.sizes.iter().find(|&&m| m == 0 || m > pool) {
            return Err(Error::Spec(format!(
                "training size {m} outside 1..={pool} (training pool size)"
            )));
        }
        for (a, b) in self.comparison_pairs() {
            for k in [a, b] {
                if !self.classifiers.contains(&k) {
                    return Err(Error::Spec(format!("pair names classifier {k} which is not run")));
                }
            }
        }
        self.fit.validate()
    }
}

/// Accuracies of one classifier at one training size.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvePoint {
    pub classifier: ClassifierKind,
    pub m: usize,
    pub accuracies: Vec<f64>,
    pub converged: Vec<bool>,
}

impl CurvePoint {
    pub fn mean(&self) -> f64 {
        self.accuracies.iter().sum::<f64>() / self.accuracies.len() as f64
    }

    /// Sample standard deviation; zero for a single replication.
    pub fn stddev(&self) -> f64 {
        let n = self.accuracies.len();
        if n < 2 {
            return 0.0;
        }
        let mean = self.mean();
        let ss: f64 = self.accuracies.iter().map(|a| (a - mean).powi(2)).sum();
        (ss / (n - 1) as f64).sqrt()
    }

    pub fn n_converged(&self) -> usize {
        self.converged.iter().filter(|&&c| c).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LearningCurve {
    pub dataset: String,
    pub bins: usize,
    /// Classifier-major, sizes in spec order.
    pub points: Vec<CurvePoint>,
}

impl LearningCurve {
    pub fn point(&self, classifier: ClassifierKind, m: usize) -> Option<&CurvePoint> {
        self.points.iter().find(|p| p.classifier == classifier && p.m == m)
    }
}

/// Significant-win counts over the replications of one (pair, m) cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McNemarTally {
    pub a: ClassifierKind,
    pub b: ClassifierKind,
    pub m: usize,
    pub wins_a: usize,
    pub wins_b: usize,
    pub ties: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentResult {
    pub curve: LearningCurve,
    pub mcnemar: Vec<McNemarTally>,
    pub pool_size: usize,
    pub test_size: usize,
}

struct Replication {
    accuracy: Vec<f64>,
    converged: Vec<bool>,
    outcomes: Vec<mcnemar::McNemarResult>,
}

/// Loads the spec's dataset from `corpus` and runs it.
pub fn run_learning_curve(spec: &ExperimentSpec, corpus: &Corpus) -> Result<ExperimentResult> {
    let prepared = corpus.load_with_model(&spec.dataset, spec.bins, spec.model.as_deref())?;
    run_prepared(spec, &prepared.dataset, &prepared.model)
}

/// Runs the protocol on data already discretized and paired with `model`.
pub fn run_prepared(
    spec: &ExperimentSpec,
    data: &DiscreteDataset,
    model: &QualitativeModel,
) -> Result<ExperimentResult> {
    let split = SplitSpec {
        test_fraction: spec.test_fraction,
        seed: split_seed(spec.seed),
    };
    let (pool_idx, test_idx) = stratified_split_indices(data, &split)?;
    spec.validate(pool_idx.len())?;
    let pool = data.subset(&pool_idx);
    let test = data.subset(&test_idx);
    let pairs = spec.comparison_pairs();
    let position = |k: ClassifierKind| spec.classifiers.iter().position(|&c| c == k).expect("validated pair");
    let pair_idx: Vec<(usize, usize)> = pairs.iter().map(|&(a, b)| (position(a), position(b))).collect();

    let cells: Vec<(usize, usize)> = spec
        .sizes
        .iter()
        .flat_map(|&m| (0..spec.replications).map(move |r| (m, r)))
        .collect();
    let runs: Vec<Replication> = cells
        .par_iter()
        .map(|&(m, r)| {
            let sample = pool.subset(&sample_indices(pool.len(), m, sample_seed(spec.seed, m, r))?);
            let mut accuracy = Vec::with_capacity(spec.classifiers.len());
            let mut converged = Vec::with_capacity(spec.classifiers.len());
            let mut correct = Vec::with_capacity(spec.classifiers.len());
            for &kind in &spec.classifiers {
                let clf = train(kind, &sample, model, &spec.fit)?;
                let hits = clf.correctness(&test)?;
                accuracy.push(hits.iter().filter(|&&h| h).count() as f64 / hits.len() as f64);
                converged.push(clf.converged());
                correct.push(hits);
            }
            let outcomes = pair_idx
                .iter()
                .map(|&(a, b)| mcnemar::mcnemar_from_correctness(&correct[a], &correct[b]))
                .collect();
            Ok(Replication {
                accuracy,
                converged,
                outcomes,
            })
        })
        .collect::<Result<_>>()?;

    let reps = spec.replications;
    let cell = |size_pos: usize, r: usize| &runs[size_pos * reps + r];
    let mut points = Vec::new();
    for (k, &kind) in spec.classifiers.iter().enumerate() {
        for (s, &m) in spec.sizes.iter().enumerate() {
            points.push(CurvePoint {
                classifier: kind,
                m,
                accuracies: (0..reps).map(|r| cell(s, r).accuracy[k]).collect(),
                converged: (0..reps).map(|r| cell(s, r).converged[k]).collect(),
            });
        }
    }
    let mut tallies = Vec::new();
    for (p, &(a, b)) in pairs.iter().enumerate() {
        for (s, &m) in spec.sizes.iter().enumerate() {
            let mut t = McNemarTally {
                a,
                b,
                m,
                wins_a: 0,
                wins_b: 0,
                ties: 0,
            };
            for r in 0..reps {
                match cell(s, r).outcomes[p].winner {
                    Some(Winner::A) => t.wins_a += 1,
                    Some(Winner::B) => t.wins_b += 1,
                    None => t.ties += 1,
                }
            }
            tallies.push(t);
        }
    }
    Ok(ExperimentResult {
        curve: LearningCurve {
            dataset: spec.dataset.clone(),
            bins: spec.bins,
            points,
        },
        mcnemar: tallies,
        pool_size: pool.len(),
        test_size: test.len(),
    })
}
