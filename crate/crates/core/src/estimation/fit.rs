use serde::{Deserialize, Serialize};

use super::lbfgs::{self, LbfgsSettings, Termination};
use super::{
    count_stats, floored_logits, log_likelihood, mle_rows, penalized_objective_into, softmax_theta, NodeCounts,
};
use crate::constraints::{generate_constraints, max_delta, DominanceConstraint, DEFAULT_FEASIBILITY_TOLERANCE};
use crate::data::DiscreteDataset;
use crate::error::{Error, Result};
use crate::model::{Cpt, CptSet, QualitativeModel};
use crate::table::Table;

/// Knobs of the penalty-weight loop and its inner optimizer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    /// Dirichlet pseudocount added to every cell.
    pub alpha: f64,
    pub initial_weight: f64,
    /// Multiplier applied to `w` after an inner run that ends infeasible.
    pub escalation: f64,
    /// Multiplier applied to `w` after an inner-optimizer failure.
    pub failure_bump: f64,
    /// Cap on inner runs, failed or not.
    pub max_outer_iterations: usize,
    pub gradient_tolerance: f64,
    pub feasibility_tolerance: f64,
    pub inner_iteration_cap: usize,
    pub memory: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            alpha: 1.0,
            initial_weight: 10.0,
            escalation: 10.0,
            failure_bump: 1.5,
            max_outer_iterations: 12,
            gradient_tolerance: 1e-6,
            feasibility_tolerance: DEFAULT_FEASIBILITY_TOLERANCE,
            inner_iteration_cap: 2000,
            memory: 10,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("alpha", self.alpha),
            ("initial_weight", self.initial_weight),
            ("gradient_tolerance", self.gradient_tolerance),
            ("feasibility_tolerance", self.feasibility_tolerance),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Spec(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.escalation > 1.0) {
            return Err(Error::Spec("escalation factor must exceed 1".into()));
        }
        if !(self.failure_bump > 1.0) {
            return Err(Error::Spec("failure bump factor must exceed 1".into()));
        }
        if self.max_outer_iterations == 0 || self.inner_iteration_cap == 0 || self.memory == 0 {
            return Err(Error::Spec("iteration caps and memory depth must be positive".into()));
        }
        Ok(())
    }

    fn lbfgs(&self) -> LbfgsSettings {
        LbfgsSettings {
            memory: self.memory,
            max_iterations: self.inner_iteration_cap,
            gradient_tolerance: self.gradient_tolerance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodeFitReport {
    pub node: String,
    pub constraints: usize,
    /// Whether the unconstrained MLE was infeasible.
    pub used_penalty: bool,
    pub outer_iterations: usize,
    pub inner_iterations: usize,
    pub inner_failures: usize,
    pub final_weight: f64,
    /// `-inf` for nodes without constraints.
    pub max_delta: f64,
    pub log_likelihood: f64,
    pub objective: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitReport {
    pub global_epsilon: f64,
    pub lbfgs_memory: usize,
    pub inner_iteration_cap: usize,
    pub nodes: Vec<NodeFitReport>,
}

impl FitReport {
    pub fn converged(&self) -> bool {
        self.nodes.iter().all(|n| n.converged)
    }

    pub fn penalized_nodes(&self) -> impl Iterator<Item = &NodeFitReport> {
        self.nodes.iter().filter(|n| n.used_penalty)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeFit {
    pub theta: Table,
    pub report: NodeFitReport,
}

/// Constrained fit of one CPT by the escalating exterior-penalty loop.
///
/// Starts from the closed-form MLE and returns it untouched when it already
/// satisfies every constraint within tolerance. Otherwise the penalized
/// objective is maximized with L-BFGS, warm-started from the previous
/// iterate; an infeasible result escalates `w`, an optimizer failure bumps it
/// slightly and retries. When the outer budget runs out the last iterate is
/// returned with `converged = false`.
pub fn fit_node(stats: &NodeCounts, constraints: &[DominanceConstraint], config: &FitConfig) -> Result<NodeFit> {
    config.validate()?;
    let counts = &stats.counts;
    let theta = mle_rows(counts).map_err(|e| Error::domain(format!("node `{}`: {e}", stats.node)))?;
    let tol = config.feasibility_tolerance;
    let mut mu = floored_logits(&theta);
    let mut report = NodeFitReport {
        node: stats.node.clone(),
        constraints: constraints.len(),
        used_penalty: false,
        outer_iterations: 0,
        inner_iterations: 0,
        inner_failures: 0,
        final_weight: 0.0,
        max_delta: max_delta(&theta, constraints),
        log_likelihood: log_likelihood(&mu, counts),
        objective: 0.0,
        converged: true,
    };
    report.objective = report.log_likelihood;
    if report.max_delta <= tol {
        return Ok(NodeFit { theta, report });
    }

    report.used_penalty = true;
    report.converged = false;
    let settings = config.lbfgs();
    let mut weight = config.initial_weight;
    let (rows, cols) = (counts.rows(), counts.cols());
    for _ in 0..config.max_outer_iterations {
        report.outer_iterations += 1;
        let outcome = lbfgs::minimize(
            |x, g| {
                let v = penalized_objective_into(x, counts, constraints, weight, g);
                g.iter_mut().for_each(|gi| *gi = -*gi);
                -v
            },
            mu.as_slice().to_vec(),
            &settings,
        );
        report.inner_iterations += outcome.iterations;
        if outcome.x.iter().all(|v| v.is_finite()) {
            mu = Table::from_flat(rows, cols, outcome.x);
        }
        report.final_weight = weight;
        report.objective = -outcome.value;
        report.max_delta = max_delta(&softmax_theta(&mu), constraints);
        match outcome.termination {
            Termination::Converged | Termination::Stalled => {
                if report.max_delta <= tol {
                    report.converged = true;
                    break;
                }
                weight *= config.escalation;
            }
            Termination::NonFinite | Termination::LineSearchFailed | Termination::IterationCap => {
                report.inner_failures += 1;
                weight *= config.failure_bump;
            }
        }
    }
    report.log_likelihood = log_likelihood(&mu, counts);
    Ok(NodeFit {
        theta: softmax_theta(&mu),
        report,
    })
}

/// Fits every CPT of `model` on `data` at global margin `epsilon`.
pub fn fit_network(
    data: &DiscreteDataset,
    model: &QualitativeModel,
    epsilon: f64,
    config: &FitConfig,
) -> Result<(CptSet, FitReport)> {
    config.validate()?;
    let stats = count_stats(data, model, config.alpha)?;
    let constraints = generate_constraints(model, epsilon)?;
    let mut cpts = Vec::with_capacity(model.len());
    let mut reports = Vec::with_capacity(model.len());
    for (node, counts) in stats.nodes.iter().enumerate() {
        let fit = fit_node(counts, &constraints.node(node).constraints, config)?;
        cpts.push(Cpt {
            node: counts.node.clone(),
            parents: counts.parents.clone(),
            rows: fit.theta,
        });
        reports.push(fit.report);
    }
    Ok((
        CptSet { cpts },
        FitReport {
            global_epsilon: epsilon,
            lbfgs_memory: config.memory,
            inner_iteration_cap: config.inner_iteration_cap,
            nodes: reports,
        },
    ))
}
