use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{DiscreteDataset, RawTable};
use crate::error::{Error, Result};
use crate::model::Variable;

/// Equal-frequency cut points for `bins` groups.
///
/// The `t`-th boundary sits after `round(t n / b)` sorted values. A boundary
/// that falls between two equal values moves to the nearest position where
/// adjacent values differ (left wins a tie in distance). Cuts are midpoints;
/// a boundary with nowhere to go, or one that collapses onto an earlier cut,
/// is dropped, so fewer than `b - 1` cuts come back on heavily tied data.
pub fn equal_frequency_cutpoints(values: &[f64], bins: usize) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::domain("cannot discretize an empty column"));
    }
    if bins < 2 {
        return Err(Error::domain(format!("need at least 2 bins, got {bins}")));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain("column has non-finite values"));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    // A boundary at `p` splits v[..p] from v[p..].
    let splits = |p: usize| p >= 1 && p < n && v[p - 1] < v[p];
    let mut cuts: Vec<f64> = Vec::with_capacity(bins - 1);
    for t in 1..bins {
        let target = (2 * t * n + bins) / (2 * bins);
        let pos = (0..n).find_map(|d| {
            if target >= d && splits(target - d) {
                Some(target - d)
            } else if splits(target + d) {
                Some(target + d)
            } else {
                None
            }
        });
        if let Some(p) = pos {
            let cut = 0.5 * (v[p - 1] + v[p]);
            if cuts.last().is_none_or(|&c| cut > c) {
                cuts.push(cut);
            }
        }
    }
    Ok(cuts)
}

/// Number of cuts strictly below `x`.
pub fn bin_of(cuts: &[f64], x: f64) -> usize {
    cuts.partition_point(|&c| c < x)
}

/// How one source column becomes a discrete variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Encoding {
    /// Equal-frequency bins at the requested bin count.
    Numeric,
    /// Listed levels, lowest first.
    Ordinal { levels: Vec<String> },
    /// Explicit label-to-state table.
    Map { codes: BTreeMap<String, usize> },
    /// State 1 when the value exceeds `above`, else 0.
    Threshold { above: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnRecipe {
    /// Variable name in the model.
    pub name: String,
    /// Source column; defaults to `name`.
    #[serde(default)]
    pub column: Option<String>,
    pub encoding: Encoding,
}

impl ColumnRecipe {
    pub fn source(&self) -> &str {
        self.column.as_deref().unwrap_or(&self.name)
    }
}

/// Per-dataset preparation rules.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetRecipe {
    pub id: String,
    /// Raw data file, relative to the recipe.
    pub source: String,
    /// Model file, relative to the recipe.
    pub model: String,
    pub class: String,
    pub columns: Vec<ColumnRecipe>,
}

impl DatasetRecipe {
    pub fn source_columns(&self) -> Vec<&str> {
        self.columns.iter().map(ColumnRecipe::source).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Discretized {
    pub dataset: DiscreteDataset,
    /// Cut points of every numeric variable.
    pub cutpoints: BTreeMap<String, Vec<f64>>,
}

fn parse_number(table: &RawTable, row: usize, col: usize) -> Result<f64> {
    let cell = &table.rows[row][col];
    cell.parse::<f64>().map_err(|_| Error::Data {
        row,
        column: table.columns[col].clone(),
        message: format!("`{cell}` is not a number"),
    })
}

/// Encodes every recipe column of a complete table. Numeric columns are cut
/// on the whole table; their cardinality is the number of non-empty bin
/// slots the cuts allow (at least 2).
pub fn discretize(table: &RawTable, recipe: &DatasetRecipe, bins: usize) -> Result<Discretized> {
    let n = table.rows.len();
    let mut variables = Vec::with_capacity(recipe.columns.len());
    let mut columns: Vec<Vec<usize>> = Vec::with_capacity(recipe.columns.len());
    let mut cutpoints = BTreeMap::new();
    for spec in &recipe.columns {
        let col = table
            .column_index(spec.source())
            .ok_or_else(|| Error::Spec(format!("recipe column `{}` not in source", spec.source())))?;
        let unknown = |row: usize, cell: &str| Error::Data {
            row,
            column: table.columns[col].clone(),
            message: format!("unrecognized value `{cell}`"),
        };
        let (cardinality, states) = match &spec.encoding {
            Encoding::Numeric => {
                let values = (0..n)
                    .map(|i| parse_number(table, i, col))
                    .collect::<Result<Vec<_>>>()?;
                let cuts = equal_frequency_cutpoints(&values, bins)?;
                let states = values.iter().map(|&x| bin_of(&cuts, x)).collect();
                let card = (cuts.len() + 1).max(2);
                cutpoints.insert(spec.name.clone(), cuts);
                (card, states)
            }
            Encoding::Ordinal { levels } => {
                let states = table
                    .column(col)
                    .enumerate()
                    .map(|(i, c)| levels.iter().position(|l| l == c).ok_or_else(|| unknown(i, c)))
                    .collect::<Result<Vec<_>>>()?;
                (levels.len(), states)
            }
            Encoding::Map { codes } => {
                let states = table
                    .column(col)
                    .enumerate()
                    .map(|(i, c)| codes.get(c).copied().ok_or_else(|| unknown(i, c)))
                    .collect::<Result<Vec<_>>>()?;
                let card = codes.values().max().map_or(0, |m| m + 1).max(2);
                (card, states)
            }
            Encoding::Threshold { above } => {
                let states = (0..n)
                    .map(|i| parse_number(table, i, col).map(|x| usize::from(x > *above)))
                    .collect::<Result<Vec<_>>>()?;
                (2, states)
            }
        };
        variables.push(Variable::new(spec.name.clone(), cardinality));
        columns.push(states);
    }
    let rows = (0..n).map(|i| columns.iter().map(|c| c[i]).collect()).collect();
    Ok(Discretized {
        dataset: DiscreteDataset::new(variables, rows, &recipe.class)?,
        cutpoints,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cuts(values: &[f64], b: usize) -> Vec<f64> {
        equal_frequency_cutpoints(values, b).unwrap()
    }

    #[test]
    fn equal_frequency_examples() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        assert_eq!(cuts(&v, 2), vec![3.5]);
        assert_eq!(cuts(&v, 3), vec![2.5, 4.5]);
        assert_eq!(cuts(&[1.0, 1.0, 1.0, 2.0, 3.0, 3.0], 2), vec![1.5]);
    }

    #[test]
    fn tied_boundary_moves_to_nearest_gap() {
        // Target boundary after 3 values lands inside the run of 2s.
        assert_eq!(cuts(&[1.0, 2.0, 2.0, 2.0, 2.0, 3.0], 2), vec![1.5]);
        assert_eq!(cuts(&[1.0, 1.0, 2.0, 2.0, 2.0, 3.0], 2), vec![1.5]);
        assert_eq!(cuts(&[1.0, 2.0, 2.0, 2.0, 3.0, 3.0], 2), vec![2.5]);
        // Equidistant gaps: left wins.
        assert_eq!(cuts(&[1.0, 1.0, 2.0, 2.0, 3.0, 3.0], 2), vec![1.5]);
    }

    #[test]
    fn insufficient_distinct_values_give_fewer_cuts() {
        assert_eq!(cuts(&[4.0; 10], 3), Vec::<f64>::new());
        assert_eq!(cuts(&[1.0, 1.0, 1.0, 1.0, 9.0], 5), vec![5.0]);
        assert!(equal_frequency_cutpoints(&[], 2).is_err());
    }

    #[test]
    fn bins_split_on_cut_points() {
        let c = [2.5, 4.5];
        assert_eq!(bin_of(&c, 1.0), 0);
        assert_eq!(bin_of(&c, 2.5), 0);
        assert_eq!(bin_of(&c, 3.0), 1);
        assert_eq!(bin_of(&c, 9.0), 2);
    }

    proptest! {
        #[test]
        fn tie_free_bins_differ_by_at_most_one(
            set in proptest::collection::btree_set(-10_000i32..10_000, 5..200),
            b in prop::sample::select(vec![2usize, 3, 5]),
        ) {
            let values: Vec<f64> = set.into_iter().map(f64::from).collect();
            let c = cuts(&values, b);
            prop_assert_eq!(c.len(), b - 1);
            let mut sizes = vec![0usize; b];
            values.iter().for_each(|&x| sizes[bin_of(&c, x)] += 1);
            let (lo, hi) = (sizes.iter().min().unwrap(), sizes.iter().max().unwrap());
            prop_assert!(hi - lo <= 1, "{:?}", sizes);
        }

        #[test]
        fn cuts_strictly_increase(
            values in proptest::collection::vec(0u8..6, 1..60),
            b in 2usize..6,
        ) {
            let values: Vec<f64> = values.into_iter().map(f64::from).collect();
            let c = cuts(&values, b);
            prop_assert!(c.windows(2).all(|w| w[0] < w[1]));
            prop_assert!(c.len() < b);
        }
    }

    fn recipe() -> DatasetRecipe {
        serde_json::from_str(
            r#"{
                "id": "toy", "source": "toy.csv", "model": "toy.bn", "class": "y",
                "columns": [
                    {"name": "x", "encoding": "numeric"},
                    {"name": "size", "column": "sz", "encoding": {"ordinal": {"levels": ["small", "med", "big"]}}},
                    {"name": "y", "column": "mpg", "encoding": {"threshold": {"above": 28}}}
                ]
            }"#,
        )
        .unwrap()
    }

    #[test]
    fn discretize_applies_each_encoding() {
        let table = RawTable {
            columns: vec!["mpg".into(), "x".into(), "sz".into()],
            rows: vec![
                vec!["28".into(), "1".into(), "big".into()],
                vec!["30".into(), "5".into(), "small".into()],
                vec!["28.1".into(), "3".into(), "med".into()],
                vec!["12".into(), "7".into(), "med".into()],
            ],
            missing: "?".into(),
        };
        let d = discretize(&table, &recipe(), 2).unwrap();
        assert_eq!(d.cutpoints["x"], vec![4.0]);
        assert_eq!(
            d.dataset.rows(),
            &[vec![0, 2, 0], vec![1, 0, 1], vec![0, 1, 1], vec![1, 1, 0]]
        );
        assert_eq!(d.dataset.variables()[1].cardinality, 3);
        assert_eq!(d.dataset.len(), table.rows.len());
    }

    #[test]
    fn unknown_level_is_a_data_error() {
        let table = RawTable {
            columns: vec!["mpg".into(), "x".into(), "sz".into()],
            rows: vec![vec!["1".into(), "1".into(), "huge".into()]],
            missing: "?".into(),
        };
        assert!(matches!(
            discretize(&table, &recipe(), 2),
            Err(Error::Data { row: 0, .. })
        ));
    }
}
