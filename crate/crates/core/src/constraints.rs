//! Margin-modified first-order stochastic dominance constraints.
//!
//! For a `q+` parent, raising the parent by one state (other parents fixed)
//! must not raise the child's cdf at any state below the top:
//! `F_hi(kc) + eps_i <= F_lo(kc)`. Only adjacent parent values are
//! constrained; transitivity covers the remaining pairs.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{check_distribution, CptSet, MonotoneSign, ParentConfigIndexer, QualitativeModel};
use crate::table::Table;

/// Default slack on `delta` when deciding feasibility.
pub const DEFAULT_FEASIBILITY_TOLERANCE: f64 = 1e-6;

/// One inequality `F_{j_hi}(kc) - F_{j_lo}(kc) + epsilon <= 0` on node `node`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DominanceConstraint {
    pub node: usize,
    /// Configuration whose child distribution must dominate.
    pub j_hi: usize,
    pub j_lo: usize,
    pub kc: usize,
    pub epsilon: f64,
}

impl DominanceConstraint {
    /// Violation of this constraint under the node's CPT rows.
    pub fn delta(&self, theta: &Table) -> f64 {
        let hi: f64 = theta.row(self.j_hi)[..=self.kc].iter().sum();
        let lo: f64 = theta.row(self.j_lo)[..=self.kc].iter().sum();
        hi - lo + self.epsilon
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodeConstraints {
    pub node: usize,
    /// `None` when the node has no annotated parent.
    pub chain_length: Option<usize>,
    /// Per-node margin `eps / d1`, zero without annotated parents.
    pub margin: f64,
    pub constraints: Vec<DominanceConstraint>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstraintSet {
    pub global_epsilon: f64,
    pub nodes: Vec<NodeConstraints>,
}

impl ConstraintSet {
    pub fn node(&self, node: usize) -> &NodeConstraints {
        &self.nodes[node]
    }

    pub fn len(&self) -> usize {
        self.nodes.iter().map(|n| n.constraints.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Longest chain of adjacent-step inequalities between the minimum- and
/// maximum-influence corners: the product of `(r_p - 1)` over annotated
/// parents.
pub fn chain_length(model: &QualitativeModel, node: usize) -> Result<usize> {
    let annotated: Vec<_> = model
        .parents(node)
        .into_iter()
        .filter(|p| p.sign.is_annotated())
        .collect();
    if annotated.is_empty() {
        return Err(Error::domain(format!(
            "node `{}` has no annotated parents",
            model.variable(node).name
        )));
    }
    Ok(annotated.iter().map(|p| model.cardinality(p.var) - 1).product())
}

pub fn generate_constraints(model: &QualitativeModel, global_epsilon: f64) -> Result<ConstraintSet> {
    if !global_epsilon.is_finite() || global_epsilon < 0.0 {
        return Err(Error::domain(format!(
            "margin must be finite and non-negative, got {global_epsilon}"
        )));
    }
    let nodes = (0..model.len())
        .map(|node| node_constraints(model, node, global_epsilon))
        .collect();
    Ok(ConstraintSet { global_epsilon, nodes })
}

fn node_constraints(model: &QualitativeModel, node: usize, global_epsilon: f64) -> NodeConstraints {
    let parents = model.parents(node);
    let indexer = model.indexer(node);
    let r = model.cardinality(node);
    let Ok(d1) = chain_length(model, node) else {
        return NodeConstraints {
            node,
            chain_length: None,
            margin: 0.0,
            constraints: Vec::new(),
        };
    };
    let margin = global_epsilon / d1 as f64;
    let mut constraints = Vec::new();
    for (pos, parent) in parents.iter().enumerate() {
        if !parent.sign.is_annotated() {
            continue;
        }
        let step = indexer.strides()[pos];
        let others: Vec<usize> = (0..parents.len()).filter(|&i| i != pos).collect();
        let context = ParentConfigIndexer::new(others.iter().map(|&i| indexer.radices()[i]).collect());
        for c in 0..context.count() {
            let base: usize = context
                .config_of_index(c)
                .expect("context index in range")
                .iter()
                .zip(&others)
                .map(|(&v, &i)| v * indexer.strides()[i])
                .sum();
            for v in 0..indexer.radices()[pos] - 1 {
                let lower = base + v * step;
                let upper = lower + step;
                let (j_hi, j_lo) = match parent.sign {
                    MonotoneSign::Isotone => (upper, lower),
                    _ => (lower, upper),
                };
                for kc in 0..r - 1 {
                    constraints.push(DominanceConstraint {
                        node,
                        j_hi,
                        j_lo,
                        kc,
                        epsilon: margin,
                    });
                }
            }
        }
    }
    NodeConstraints {
        node,
        chain_length: Some(d1),
        margin,
        constraints,
    }
}

/// `delta = F_hi(kc) - F_lo(kc) + epsilon`; positive means violated.
pub fn violation_delta(hi_row: &[f64], lo_row: &[f64], kc: usize, epsilon: f64) -> Result<f64> {
    if hi_row.len() != lo_row.len() {
        return Err(Error::domain("rows have different lengths"));
    }
    if kc + 1 >= hi_row.len() {
        return Err(Error::domain(format!(
            "cumulative index {kc} out of range for {} states",
            hi_row.len()
        )));
    }
    check_distribution(hi_row)?;
    check_distribution(lo_row)?;
    let hi: f64 = hi_row[..=kc].iter().sum();
    let lo: f64 = lo_row[..=kc].iter().sum();
    Ok(hi - lo + epsilon)
}

/// Whether `p1` dominates `p2` with margin: `F1(y) + eps <= F2(y)` below the
/// top state.
pub fn fsd_dominates(p1: &[f64], p2: &[f64], epsilon: f64) -> Result<bool> {
    if p1.len() != p2.len() {
        return Err(Error::domain(format!(
            "distributions have {} and {} states",
            p1.len(),
            p2.len()
        )));
    }
    let (mut f1, mut f2) = (0.0, 0.0);
    for k in 0..p1.len().saturating_sub(1) {
        f1 += p1[k];
        f2 += p2[k];
        if f1 + epsilon > f2 {
            return Ok(false);
        }
    }
    Ok(true)
}

/// A constraint that is violated, as exported in violation reports.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ViolationRecord {
    pub node: String,
    pub j_hi: usize,
    pub j_lo: usize,
    pub kc: usize,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeasibilityReport {
    pub feasible: bool,
    /// Sorted by descending `delta`.
    pub violations: Vec<ViolationRecord>,
}

impl FeasibilityReport {
    pub fn max_delta(&self) -> Option<f64> {
        self.violations.first().map(|v| v.delta)
    }
}

pub fn is_feasible(cpts: &CptSet, constraints: &ConstraintSet, tolerance: f64) -> FeasibilityReport {
    let mut violations = Vec::new();
    for nc in &constraints.nodes {
        let cpt = cpts.get(nc.node);
        for c in &nc.constraints {
            let delta = c.delta(&cpt.rows);
            if delta > tolerance {
                violations.push(ViolationRecord {
                    node: cpt.node.clone(),
                    j_hi: c.j_hi,
                    j_lo: c.j_lo,
                    kc: c.kc,
                    delta,
                });
            }
        }
    }
    violations.sort_by(|a, b| b.delta.total_cmp(&a.delta));
    FeasibilityReport {
        feasible: violations.is_empty(),
        violations,
    }
}

/// Largest `delta` over a node's constraints (`-inf` when there are none).
pub fn max_delta(theta: &Table, constraints: &[DominanceConstraint]) -> f64 {
    constraints
        .iter()
        .map(|c| c.delta(theta))
        .fold(f64::NEG_INFINITY, f64::max)
}
