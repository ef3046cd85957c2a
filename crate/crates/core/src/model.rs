//! Discrete variables, network structure with monotonicity annotations, and
//! conditional probability tables.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::table::Table;

/// Tolerance on CPT row sums.
pub const ROW_SUM_TOLERANCE: f64 = 1e-9;

/// A discrete variable with states `0..cardinality` in ascending ordinal order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub cardinality: usize,
}

impl Variable {
    pub fn new(name: impl Into<String>, cardinality: usize) -> Self {
        Variable {
            name: name.into(),
            cardinality,
        }
    }
}

/// Qualitative influence of a parent on its child.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MonotoneSign {
    /// `q+`: higher parent values shift the child distribution upwards.
    Isotone,
    /// `q-`: higher parent values shift the child distribution downwards.
    Antitone,
    Unannotated,
}

impl MonotoneSign {
    pub fn is_annotated(self) -> bool {
        !matches!(self, MonotoneSign::Unannotated)
    }

    pub fn token(self) -> &'static str {
        match self {
            MonotoneSign::Isotone => "q+",
            MonotoneSign::Antitone => "q-",
            MonotoneSign::Unannotated => "none",
        }
    }
}

impl fmt::Display for MonotoneSign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub parent: String,
    pub child: String,
    pub sign: MonotoneSign,
}

impl Edge {
    pub fn new(parent: impl Into<String>, child: impl Into<String>, sign: MonotoneSign) -> Self {
        Edge {
            parent: parent.into(),
            child: child.into(),
            sign,
        }
    }
}

/// A parent of some node, by variable index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Parent {
    pub var: usize,
    pub sign: MonotoneSign,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum Violation {
    DuplicateVariable(String),
    CardinalityTooSmall { variable: String, cardinality: usize },
    UndeclaredVariable { edge: String, name: String },
    DuplicateEdge { parent: String, child: String },
    SelfLoop(String),
    Cycle(Vec<String>),
    UndeclaredClass(String),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DuplicateVariable(n) => write!(f, "variable `{n}` declared twice"),
            Violation::CardinalityTooSmall { variable, cardinality } => {
                write!(f, "variable `{variable}` has cardinality {cardinality} (< 2)")
            }
            Violation::UndeclaredVariable { edge, name } => {
                write!(f, "edge {edge} refers to undeclared variable `{name}`")
            }
            Violation::DuplicateEdge { parent, child } => {
                write!(f, "edge {parent} -> {child} declared twice")
            }
            Violation::SelfLoop(n) => write!(f, "self loop on `{n}`"),
            Violation::Cycle(nodes) => write!(f, "directed cycle through {}", nodes.join(", ")),
            Violation::UndeclaredClass(n) => write!(f, "class variable `{n}` is not declared"),
        }
    }
}

/// Outcome of [`validate_model`]; empty means the model is usable.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return f.write_str("ok");
        }
        let msgs: Vec<String> = self.violations.iter().map(ToString::to_string).collect();
        f.write_str(&msgs.join("; "))
    }
}

/// DAG over discrete variables with signed edges and a designated class.
///
/// Methods other than [`validate_model`] assume the model passed validation;
/// [`QualitativeModel::new`] enforces that.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QualitativeModel {
    name: String,
    variables: Vec<Variable>,
    edges: Vec<Edge>,
    class_variable: String,
}

impl QualitativeModel {
    pub fn new(
        name: impl Into<String>,
        variables: Vec<Variable>,
        edges: Vec<Edge>,
        class_variable: impl Into<String>,
    ) -> Result<Self> {
        let model = Self::unchecked(name, variables, edges, class_variable);
        let report = validate_model(&model);
        if report.is_ok() {
            Ok(model)
        } else {
            Err(Error::InvalidModel(report))
        }
    }

    /// Builds a model without validation, for diagnostics and tests.
    pub fn unchecked(
        name: impl Into<String>,
        variables: Vec<Variable>,
        edges: Vec<Edge>,
        class_variable: impl Into<String>,
    ) -> Self {
        QualitativeModel {
            name: name.into(),
            variables,
            edges,
            class_variable: class_variable.into(),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn variable(&self, index: usize) -> &Variable {
        &self.variables[index]
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn class_name(&self) -> &str {
        &self.class_variable
    }

    pub fn len(&self) -> usize {
        self.variables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.variables.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v.name == name)
    }

    pub fn class_index(&self) -> usize {
        self.index_of(&self.class_variable)
            .expect("validated model declares its class variable")
    }

    pub fn cardinality(&self, index: usize) -> usize {
        self.variables[index].cardinality
    }

    /// Parents of `node`, in edge declaration order.
    pub fn parents(&self, node: usize) -> Vec<Parent> {
        let child = &self.variables[node].name;
        self.edges
            .iter()
            .filter(|e| &e.child == child)
            .filter_map(|e| self.index_of(&e.parent).map(|var| Parent { var, sign: e.sign }))
            .collect()
    }

    pub fn children(&self, node: usize) -> Vec<usize> {
        let parent = &self.variables[node].name;
        self.edges
            .iter()
            .filter(|e| &e.parent == parent)
            .filter_map(|e| self.index_of(&e.child))
            .collect()
    }

    pub fn indexer(&self, node: usize) -> ParentConfigIndexer {
        let radices = self.parents(node).iter().map(|p| self.cardinality(p.var)).collect();
        ParentConfigIndexer::new(radices)
    }

    /// Variable indices in a topological order (parents first). Ties are
    /// broken by declaration order.
    pub fn topological_order(&self) -> Result<Vec<usize>> {
        topological_sort(self).map_err(|cycle| {
            Error::InvalidModel(ValidationReport {
                violations: vec![Violation::Cycle(cycle)],
            })
        })
    }

    /// Replaces variable cardinalities; used when the data decides them.
    pub fn with_cardinalities(&self, lookup: impl Fn(&str) -> Option<usize>) -> Result<Self> {
        let variables = self
            .variables
            .iter()
            .map(|v| Variable::new(v.name.clone(), lookup(&v.name).unwrap_or(v.cardinality)))
            .collect();
        Self::new(
            self.name.clone(),
            variables,
            self.edges.clone(),
            self.class_variable.clone(),
        )
    }
}

/// Checks structural well-formedness. Never fails; problems are reported.
pub fn validate_model(model: &QualitativeModel) -> ValidationReport {
    let mut violations = Vec::new();
    let mut seen = HashSet::new();
    for v in &model.variables {
        if !seen.insert(v.name.as_str()) {
            violations.push(Violation::DuplicateVariable(v.name.clone()));
        }
        if v.cardinality < 2 {
            violations.push(Violation::CardinalityTooSmall {
                variable: v.name.clone(),
                cardinality: v.cardinality,
            });
        }
    }
    let mut edge_seen = HashSet::new();
    let mut dangling = false;
    for e in &model.edges {
        let label = format!("{} -> {}", e.parent, e.child);
        for name in [&e.parent, &e.child] {
            if !seen.contains(name.as_str()) {
                dangling = true;
                violations.push(Violation::UndeclaredVariable {
                    edge: label.clone(),
                    name: name.clone(),
                });
            }
        }
        if e.parent == e.child {
            violations.push(Violation::SelfLoop(e.parent.clone()));
        }
        if !edge_seen.insert((e.parent.as_str(), e.child.as_str())) {
            violations.push(Violation::DuplicateEdge {
                parent: e.parent.clone(),
                child: e.child.clone(),
            });
        }
    }
    if !seen.contains(model.class_variable.as_str()) {
        violations.push(Violation::UndeclaredClass(model.class_variable.clone()));
    }
    if !dangling {
        if let Err(cycle) = topological_sort(model) {
            // Self loops were already reported.
            if cycle.len() > 1 {
                violations.push(Violation::Cycle(cycle));
            }
        }
    }
    ValidationReport { violations }
}

/// Kahn's algorithm; on failure returns the names of the nodes left on cycles.
fn topological_sort(model: &QualitativeModel) -> std::result::Result<Vec<usize>, Vec<String>> {
    let n = model.variables.len();
    let index: HashMap<&str, usize> = model
        .variables
        .iter()
        .enumerate()
        .map(|(i, v)| (v.name.as_str(), i))
        .collect();
    let mut indegree = vec![0usize; n];
    let mut out: Vec<Vec<usize>> = vec![Vec::new(); n];
    for e in &model.edges {
        if let (Some(&p), Some(&c)) = (index.get(e.parent.as_str()), index.get(e.child.as_str())) {
            out[p].push(c);
            indegree[c] += 1;
        }
    }
    let mut ready: std::collections::BTreeSet<usize> = (0..n).filter(|&i| indegree[i] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(i) = ready.pop_first() {
        order.push(i);
        for &c in &out[i] {
            indegree[c] -= 1;
            if indegree[c] == 0 {
                ready.insert(c);
            }
        }
    }
    if order.len() == n {
        Ok(order)
    } else {
        Err((0..n)
            .filter(|&i| indegree[i] > 0)
            .map(|i| model.variables[i].name.clone())
            .collect())
    }
}

/// Mixed-radix code for parent configurations; the last parent varies
/// fastest. A node without parents has exactly one configuration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParentConfigIndexer {
    radices: Vec<usize>,
    strides: Vec<usize>,
    count: usize,
}

impl ParentConfigIndexer {
    pub fn new(radices: Vec<usize>) -> Self {
        let mut strides = vec![0; radices.len()];
        let mut acc = 1usize;
        for (i, &r) in radices.iter().enumerate().rev() {
            strides[i] = acc;
            acc *= r;
        }
        ParentConfigIndexer {
            radices,
            strides,
            count: acc,
        }
    }

    /// Number of configurations `q`.
    pub fn count(&self) -> usize {
        self.count
    }

    pub fn radices(&self) -> &[usize] {
        &self.radices
    }

    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    pub fn index_config(&self, values: &[usize]) -> Result<usize> {
        if values.len() != self.radices.len() {
            return Err(Error::domain(format!(
                "expected {} parent values, got {}",
                self.radices.len(),
                values.len()
            )));
        }
        let mut index = 0;
        for (pos, (&v, &r)) in values.iter().zip(&self.radices).enumerate() {
            if v >= r {
                return Err(Error::domain(format!(
                    "parent {pos} value {v} out of range (cardinality {r})"
                )));
            }
            index += v * self.strides[pos];
        }
        Ok(index)
    }

    pub fn config_of_index(&self, index: usize) -> Result<Vec<usize>> {
        if index >= self.count {
            return Err(Error::domain(format!(
                "configuration index {index} out of range (q = {})",
                self.count
            )));
        }
        Ok(self
            .radices
            .iter()
            .zip(&self.strides)
            .map(|(&r, &s)| (index / s) % r)
            .collect())
    }
}

/// CPT of one node: row `j` is the child distribution under configuration `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cpt {
    pub node: String,
    pub parents: Vec<String>,
    pub rows: Table,
}

impl Cpt {
    pub fn new(node: impl Into<String>, parents: Vec<String>, rows: Table) -> Result<Self> {
        let cpt = Cpt {
            node: node.into(),
            parents,
            rows,
        };
        cpt.check_rows()?;
        Ok(cpt)
    }

    pub fn row(&self, j: usize) -> &[f64] {
        self.rows.row(j)
    }

    pub fn check_rows(&self) -> Result<()> {
        for (j, row) in self.rows.iter_rows().enumerate() {
            check_distribution(row).map_err(|e| Error::domain(format!("CPT `{}` row {j}: {e}", self.node)))?;
        }
        Ok(())
    }
}

pub(crate) fn check_distribution(row: &[f64]) -> Result<()> {
    if row.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(Error::domain("row has negative or non-finite entries"));
    }
    let sum: f64 = row.iter().sum();
    if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
        return Err(Error::domain(format!("row sums to {sum}")));
    }
    Ok(())
}

/// One CPT per model variable, in model order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CptSet {
    pub cpts: Vec<Cpt>,
}

impl CptSet {
    pub fn get(&self, node: usize) -> &Cpt {
        &self.cpts[node]
    }

    pub fn by_name(&self, name: &str) -> Option<&Cpt> {
        self.cpts.iter().find(|c| c.node == name)
    }

    /// JSON document keyed by node name; rows are in configuration order.
    pub fn to_json(&self) -> serde_json::Value {
        let map: BTreeMap<&str, serde_json::Value> = self
            .cpts
            .iter()
            .map(|c| {
                (
                    c.node.as_str(),
                    serde_json::json!({
                        "parents": c.parents,
                        "rows": c.rows.to_nested(),
                    }),
                )
            })
            .collect();
        serde_json::to_value(map).expect("CPT map serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn vars(specs: &[(&str, usize)]) -> Vec<Variable> {
        specs.iter().map(|(n, c)| Variable::new(*n, *c)).collect()
    }

    #[test]
    fn mixed_radix_examples() {
        let ix = ParentConfigIndexer::new(vec![3, 3]);
        assert_eq!(ix.count(), 9);
        assert_eq!(ix.index_config(&[0, 0]).unwrap(), 0);
        assert_eq!(ix.index_config(&[1, 2]).unwrap(), 5);
        assert_eq!(ix.config_of_index(5).unwrap(), vec![1, 2]);
        assert!(ix.index_config(&[3, 0]).is_err());
        assert!(ix.config_of_index(9).is_err());
    }

    #[test]
    fn no_parents_means_one_row() {
        let ix = ParentConfigIndexer::new(vec![]);
        assert_eq!(ix.count(), 1);
        assert_eq!(ix.index_config(&[]).unwrap(), 0);
        assert_eq!(ix.config_of_index(0).unwrap(), Vec::<usize>::new());
    }

    proptest! {
        #[test]
        fn indexer_is_a_bijection(radices in prop::collection::vec(2usize..=5, 0..=5)) {
            let ix = ParentConfigIndexer::new(radices);
            for j in 0..ix.count() {
                let cfg = ix.config_of_index(j).unwrap();
                prop_assert_eq!(ix.index_config(&cfg).unwrap(), j);
            }
        }

        #[test]
        fn values_round_trip(values in prop::collection::vec((2usize..=5).prop_flat_map(|r| (Just(r), 0..r)), 0..=5)) {
            let ix = ParentConfigIndexer::new(values.iter().map(|(r, _)| *r).collect());
            let v: Vec<usize> = values.iter().map(|(_, v)| *v).collect();
            let j = ix.index_config(&v).unwrap();
            prop_assert!(j < ix.count());
            prop_assert_eq!(ix.config_of_index(j).unwrap(), v);
        }
    }

    #[test]
    fn empty_edge_list_is_valid() {
        let m = QualitativeModel::unchecked("t", vars(&[("a", 2), ("c", 2)]), vec![], "c");
        assert!(validate_model(&m).is_ok());
    }

    #[test]
    fn two_cycle_is_reported() {
        let m = QualitativeModel::unchecked(
            "t",
            vars(&[("a", 2), ("b", 2)]),
            vec![
                Edge::new("a", "b", MonotoneSign::Isotone),
                Edge::new("b", "a", MonotoneSign::Isotone),
            ],
            "a",
        );
        let report = validate_model(&m);
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, Violation::Cycle(nodes) if nodes.len() == 2)));
    }

    #[test]
    fn undeclared_and_degenerate_variables_are_reported() {
        let m = QualitativeModel::unchecked(
            "t",
            vars(&[("a", 1), ("c", 2), ("c", 2)]),
            vec![
                Edge::new("a", "ghost", MonotoneSign::Isotone),
                Edge::new("a", "c", MonotoneSign::Antitone),
                Edge::new("a", "c", MonotoneSign::Antitone),
            ],
            "nope",
        );
        let v = validate_model(&m).violations;
        assert!(v.contains(&Violation::UndeclaredVariable {
            edge: "a -> ghost".into(),
            name: "ghost".into()
        }));
        assert!(v.contains(&Violation::CardinalityTooSmall {
            variable: "a".into(),
            cardinality: 1
        }));
        assert!(v.contains(&Violation::DuplicateVariable("c".into())));
        assert!(v.contains(&Violation::DuplicateEdge {
            parent: "a".into(),
            child: "c".into()
        }));
        assert!(v.contains(&Violation::UndeclaredClass("nope".into())));
    }

    #[test]
    fn parents_follow_declaration_order() {
        let m = QualitativeModel::new(
            "t",
            vars(&[("a", 2), ("b", 3), ("c", 2)]),
            vec![
                Edge::new("b", "c", MonotoneSign::Isotone),
                Edge::new("a", "c", MonotoneSign::Unannotated),
            ],
            "c",
        )
        .unwrap();
        let p = m.parents(2);
        assert_eq!(p.iter().map(|p| p.var).collect::<Vec<_>>(), vec![1, 0]);
        assert_eq!(m.indexer(2).radices(), &[3, 2]);
        assert_eq!(m.topological_order().unwrap(), vec![0, 1, 2]);
    }

    #[test]
    fn topological_order_puts_parents_first() {
        let m = QualitativeModel::new(
            "t",
            vars(&[("c", 2), ("b", 2), ("a", 2)]),
            vec![
                Edge::new("a", "b", MonotoneSign::Isotone),
                Edge::new("b", "c", MonotoneSign::Isotone),
            ],
            "c",
        )
        .unwrap();
        assert_eq!(m.topological_order().unwrap(), vec![2, 1, 0]);
    }

    #[test]
    fn cpt_rows_must_be_distributions() {
        assert!(Cpt::new("x", vec![], Table::from_rows(&[[0.5, 0.5]])).is_ok());
        assert!(Cpt::new("x", vec![], Table::from_rows(&[[0.5, 0.6]])).is_err());
    }
}
