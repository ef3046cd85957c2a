//! Penalized maximum-likelihood estimation of CPTs.
//!
//! Each CPT row is parameterized by unconstrained logits `mu` through a
//! softmax, so the simplex constraints hold by construction. The objective
//! for one node is
//!
//! ```text
//! J(mu) = sum_jk N_jk (mu_jk - ln Z_j)  -  w * sum_C [delta_C > 0] delta_C^2
//! ```
//!
//! where `delta_C` is the violation of a dominance constraint evaluated on
//! the softmax rows.

mod fit;
pub mod lbfgs;

pub use fit::{fit_network, fit_node, FitConfig, FitReport, NodeFit, NodeFitReport};

use serde::Serialize;

use crate::constraints::DominanceConstraint;
use crate::data::DiscreteDataset;
use crate::error::{Error, Result};
use crate::model::{Cpt, CptSet, QualitativeModel};
use crate::table::Table;

/// Floor applied to probabilities before taking logs.
pub const THETA_FLOOR: f64 = 1e-12;

/// Dirichlet-augmented counts `N_jk` for one node.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodeCounts {
    pub node: String,
    pub parents: Vec<String>,
    pub counts: Table,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SufficientStats {
    pub alpha: f64,
    pub nodes: Vec<NodeCounts>,
}

/// Counts every node's (configuration, state) occurrences plus `alpha`.
pub fn count_stats(data: &DiscreteDataset, model: &QualitativeModel, alpha: f64) -> Result<SufficientStats> {
    if !alpha.is_finite() || alpha < 0.0 {
        return Err(Error::domain(format!("pseudocount must be non-negative, got {alpha}")));
    }
    // Column of each model variable in the dataset.
    let columns: Vec<usize> = model
        .variables()
        .iter()
        .map(|v| {
            data.column_index(&v.name).ok_or_else(|| Error::Data {
                row: 0,
                column: v.name.clone(),
                message: "column missing from dataset".into(),
            })
        })
        .collect::<Result<_>>()?;

    for (i, row) in data.rows().iter().enumerate() {
        for (var, &col) in model.variables().iter().zip(&columns) {
            if row[col] >= var.cardinality {
                return Err(Error::Data {
                    row: i,
                    column: var.name.clone(),
                    message: format!("state {} out of range (cardinality {})", row[col], var.cardinality),
                });
            }
        }
    }

    let nodes = (0..model.len())
        .map(|node| {
            let parents = model.parents(node);
            let indexer = model.indexer(node);
            let r = model.cardinality(node);
            let mut counts = Table::filled(indexer.count(), r, alpha);
            for row in data.rows() {
                let j: usize = parents
                    .iter()
                    .zip(indexer.strides())
                    .map(|(p, &s)| row[columns[p.var]] * s)
                    .sum();
                let k = row[columns[node]];
                counts.set(j, k, counts.get(j, k) + 1.0);
            }
            NodeCounts {
                node: model.variable(node).name.clone(),
                parents: parents.iter().map(|p| model.variable(p.var).name.clone()).collect(),
                counts,
            }
        })
        .collect();
    Ok(SufficientStats { alpha, nodes })
}

/// Closed-form row normalization of counts.
pub fn mle_rows(counts: &Table) -> Result<Table> {
    let mut theta = counts.clone();
    for j in 0..theta.rows() {
        let row = theta.row_mut(j);
        let total: f64 = row.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::domain(format!("row {j} has total count {total}")));
        }
        row.iter_mut().for_each(|x| *x /= total);
    }
    Ok(theta)
}

pub fn mle_theta(stats: &SufficientStats) -> Result<CptSet> {
    let cpts = stats
        .nodes
        .iter()
        .map(|n| {
            let rows = mle_rows(&n.counts).map_err(|e| Error::domain(format!("node `{}`: {e}", n.node)))?;
            Ok(Cpt {
                node: n.node.clone(),
                parents: n.parents.clone(),
                rows,
            })
        })
        .collect::<Result<_>>()?;
    Ok(CptSet { cpts })
}

/// Numerically stable `ln sum exp`.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

fn softmax_into(mu: &[f64], out: &mut [f64]) {
    let m = mu.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut z = 0.0;
    for (o, &x) in out.iter_mut().zip(mu) {
        *o = (x - m).exp();
        z += *o;
    }
    out.iter_mut().for_each(|o| *o /= z);
}

/// Row-wise softmax of a logit table.
pub fn softmax_theta(mu: &Table) -> Table {
    let mut theta = Table::zeros(mu.rows(), mu.cols());
    for j in 0..mu.rows() {
        softmax_into(mu.row(j), theta.row_mut(j));
    }
    theta
}

/// One preimage of [`softmax_theta`]: `mu = ln theta`.
pub fn logits_of_theta(theta: &Table) -> Result<Table> {
    if let Some(bad) = theta.as_slice().iter().find(|&&p| !(p > 0.0) || !p.is_finite()) {
        return Err(Error::domain(format!("cannot take logits of probability {bad}")));
    }
    let data = theta.as_slice().iter().map(|p| p.ln()).collect();
    Ok(Table::from_flat(theta.rows(), theta.cols(), data))
}

/// Logits for a starting point, flooring probabilities at [`THETA_FLOOR`].
pub(crate) fn floored_logits(theta: &Table) -> Table {
    let data = theta.as_slice().iter().map(|p| p.max(THETA_FLOOR).ln()).collect();
    Table::from_flat(theta.rows(), theta.cols(), data)
}

pub fn log_likelihood(mu: &Table, counts: &Table) -> f64 {
    assert_eq!((mu.rows(), mu.cols()), (counts.rows(), counts.cols()));
    let mut total = 0.0;
    for j in 0..mu.rows() {
        let lse = log_sum_exp(mu.row(j));
        total += mu
            .row(j)
            .iter()
            .zip(counts.row(j))
            .map(|(m, n)| n * (m - lse))
            .sum::<f64>();
    }
    total
}

/// `dJ_L / dmu_jk = N_jk - theta_jk * sum_k' N_jk'`.
pub fn gradient_log_likelihood(mu: &Table, counts: &Table) -> Table {
    let theta = softmax_theta(mu);
    let mut grad = Table::zeros(mu.rows(), mu.cols());
    for j in 0..mu.rows() {
        let total: f64 = counts.row(j).iter().sum();
        for k in 0..mu.cols() {
            grad.set(j, k, counts.get(j, k) - theta.get(j, k) * total);
        }
    }
    grad
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PenaltyTerm {
    pub constraint: DominanceConstraint,
    pub delta: f64,
    /// `delta^2` when violated, else zero.
    pub penalty: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PenaltyEval {
    pub terms: Vec<PenaltyTerm>,
    /// Gradient of the unweighted penalty sum with respect to `mu`.
    pub gradient: Table,
}

impl PenaltyEval {
    pub fn total(&self) -> f64 {
        self.terms.iter().map(|t| t.penalty).sum()
    }
}

/// Row cdfs of the softmax table; `cdf[j][k] = sum_{k' <= k} theta_jk'`.
fn cumulative(theta: &Table) -> Table {
    let mut cdf = theta.clone();
    for j in 0..cdf.rows() {
        let row = cdf.row_mut(j);
        for k in 1..row.len() {
            row[k] += row[k - 1];
        }
    }
    cdf
}

pub fn penalty_terms(mu: &Table, constraints: &[DominanceConstraint]) -> PenaltyEval {
    let theta = softmax_theta(mu);
    let cdf = cumulative(&theta);
    let mut gradient = Table::zeros(mu.rows(), mu.cols());
    let terms = constraints
        .iter()
        .map(|c| {
            let delta = cdf.get(c.j_hi, c.kc) - cdf.get(c.j_lo, c.kc) + c.epsilon;
            let penalty = if delta > 0.0 { delta * delta } else { 0.0 };
            if delta > 0.0 {
                accumulate_penalty_gradient(&mut gradient, &theta, &cdf, c, 2.0 * delta);
            }
            PenaltyTerm {
                constraint: *c,
                delta,
                penalty,
            }
        })
        .collect();
    PenaltyEval { terms, gradient }
}

/// Adds `scale * d delta / d mu` for one constraint, using
/// `dF_j(kc)/dmu_jk = theta_jk ([k <= kc] - F_j(kc))`.
fn accumulate_penalty_gradient(gradient: &mut Table, theta: &Table, cdf: &Table, c: &DominanceConstraint, scale: f64) {
    for (j, sign) in [(c.j_hi, 1.0), (c.j_lo, -1.0)] {
        let f = cdf.get(j, c.kc);
        for k in 0..theta.cols() {
            let indicator = if k <= c.kc { 1.0 } else { 0.0 };
            let d = theta.get(j, k) * (indicator - f);
            gradient.set(j, k, gradient.get(j, k) + sign * scale * d);
        }
    }
}

/// `J = J_L - w * sum P` and its gradient.
pub fn penalized_objective(
    mu: &Table,
    counts: &Table,
    constraints: &[DominanceConstraint],
    weight: f64,
) -> (f64, Table) {
    let mut grad = Table::zeros(mu.rows(), mu.cols());
    let value = penalized_objective_into(mu.as_slice(), counts, constraints, weight, grad.as_mut_slice());
    (value, grad)
}

/// Flat-slice form of [`penalized_objective`], allocation-light for the
/// optimizer loop.
pub(crate) fn penalized_objective_into(
    mu: &[f64],
    counts: &Table,
    constraints: &[DominanceConstraint],
    weight: f64,
    grad: &mut [f64],
) -> f64 {
    let (q, r) = (counts.rows(), counts.cols());
    let mut theta = Table::zeros(q, r);
    let mut value = 0.0;
    for j in 0..q {
        let m = &mu[j * r..(j + 1) * r];
        let lse = log_sum_exp(m);
        let n = counts.row(j);
        let total: f64 = n.iter().sum();
        let t = theta.row_mut(j);
        for k in 0..r {
            t[k] = (m[k] - lse).exp();
            value += n[k] * (m[k] - lse);
            grad[j * r + k] = n[k] - t[k] * total;
        }
    }
    if weight > 0.0 && !constraints.is_empty() {
        let cdf = cumulative(&theta);
        let mut pen_grad = Table::zeros(q, r);
        let mut penalty = 0.0;
        for c in constraints {
            let delta = cdf.get(c.j_hi, c.kc) - cdf.get(c.j_lo, c.kc) + c.epsilon;
            if delta > 0.0 {
                penalty += delta * delta;
                accumulate_penalty_gradient(&mut pen_grad, &theta, &cdf, c, 2.0 * delta);
            }
        }
        value -= weight * penalty;
        for (g, p) in grad.iter_mut().zip(pen_grad.as_slice()) {
            *g -= weight * p;
        }
    }
    value
}
