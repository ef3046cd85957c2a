//! Dataset ingestion, discretization, splitting, the model DSL and the
//! bundled benchmark corpus.

mod corpus;
mod discretize;
mod dsl;
mod split;

pub use corpus::{load_model_file, Corpus, PreparedDataset};
pub use discretize::{
    bin_of, discretize, equal_frequency_cutpoints, ColumnRecipe, DatasetRecipe, Discretized, Encoding,
};
pub use dsl::{parse_model_source, parse_qualitative_model, parse_qualitative_model_with, Cardinality, ModelSource};
pub use split::{sample_indices, sample_training_set, stratified_split, stratified_split_indices, SplitSpec};

use std::collections::HashMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{QualitativeModel, Variable};

/// Missing-value marker of the corpus files.
pub const MISSING: &str = "?";

/// How a delimited text source is laid out.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct TableFormat {
    pub delimiter: u8,
    pub has_header: bool,
    pub missing: String,
}

impl Default for TableFormat {
    fn default() -> Self {
        TableFormat {
            delimiter: b',',
            has_header: true,
            missing: MISSING.to_string(),
        }
    }
}

/// Untyped rectangular table of string cells.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub missing: String,
}

impl RawTable {
    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn column(&self, index: usize) -> impl Iterator<Item = &str> {
        self.rows.iter().map(move |r| r[index].as_str())
    }

    /// Keeps only the named columns, in the given order.
    pub fn select<S: AsRef<str>>(&self, names: &[S]) -> Result<RawTable> {
        let idx: Vec<usize> = names
            .iter()
            .map(|n| {
                self.column_index(n.as_ref())
                    .ok_or_else(|| Error::Spec(format!("no column named `{}`", n.as_ref())))
            })
            .collect::<Result<_>>()?;
        Ok(RawTable {
            columns: idx.iter().map(|&i| self.columns[i].clone()).collect(),
            rows: self
                .rows
                .iter()
                .map(|r| idx.iter().map(|&i| r[i].clone()).collect())
                .collect(),
            missing: self.missing.clone(),
        })
    }
}

/// Reads delimited text. Cells are trimmed; columns of a headerless source
/// are named `c0, c1, ...`.
pub fn load_table(source: impl Read, format: &TableFormat) -> Result<RawTable> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(format.delimiter)
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(source);
    let mut columns: Option<Vec<String>> = None;
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let cells: Vec<String> = record.iter().map(str::to_string).collect();
        if cells.len() == 1 && cells[0].is_empty() {
            continue;
        }
        match &columns {
            None if format.has_header => {
                columns = Some(cells);
                continue;
            }
            None => columns = Some((0..cells.len()).map(|i| format!("c{i}")).collect()),
            Some(_) => {}
        }
        let width = columns.as_ref().map_or(0, Vec::len);
        if cells.len() != width {
            return Err(Error::Parse {
                line,
                column: cells.len().min(width) + 1,
                message: format!("expected {width} cells, found {}", cells.len()),
            });
        }
        rows.push(cells);
    }
    Ok(RawTable {
        columns: columns.unwrap_or_default(),
        rows,
        missing: format.missing.clone(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DropReport {
    pub kept: usize,
    pub dropped: usize,
}

/// Removes every row with a missing cell.
pub fn drop_incomplete(table: RawTable) -> (RawTable, DropReport) {
    let before = table.rows.len();
    let missing = table.missing.clone();
    let rows: Vec<Vec<String>> = table
        .rows
        .into_iter()
        .filter(|r| r.iter().all(|c| *c != missing))
        .collect();
    let report = DropReport {
        kept: rows.len(),
        dropped: before - rows.len(),
    };
    (RawTable { rows, ..table }, report)
}

/// Fully observed data over discrete variables; cells are state indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DiscreteDataset {
    variables: Vec<Variable>,
    rows: Vec<Vec<usize>>,
    class: usize,
}

impl DiscreteDataset {
    pub fn new(variables: Vec<Variable>, rows: Vec<Vec<usize>>, class_name: &str) -> Result<Self> {
        let class = variables
            .iter()
            .position(|v| v.name == class_name)
            .ok_or_else(|| Error::Spec(format!("class `{class_name}` is not a column")))?;
        for (i, row) in rows.iter().enumerate() {
            if row.len() != variables.len() {
                return Err(Error::Data {
                    row: i,
                    column: String::new(),
                    message: format!("expected {} cells, found {}", variables.len(), row.len()),
                });
            }
            for (v, &x) in variables.iter().zip(row) {
                if x >= v.cardinality {
                    return Err(Error::Data {
                        row: i,
                        column: v.name.clone(),
                        message: format!("state {x} out of range (cardinality {})", v.cardinality),
                    });
                }
            }
        }
        Ok(DiscreteDataset { variables, rows, class })
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn rows(&self) -> &[Vec<usize>] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v.name == name)
    }

    pub fn class_index(&self) -> usize {
        self.class
    }

    pub fn class_name(&self) -> &str {
        &self.variables[self.class].name
    }

    pub fn class_cardinality(&self) -> usize {
        self.variables[self.class].cardinality
    }

    pub fn labels(&self) -> impl Iterator<Item = usize> + '_ {
        self.rows.iter().map(move |r| r[self.class])
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.class_cardinality()];
        self.labels().for_each(|c| counts[c] += 1);
        counts
    }

    /// Rows at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> DiscreteDataset {
        DiscreteDataset {
            variables: self.variables.clone(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            class: self.class,
        }
    }

    /// Reorders columns to the model's variable order, dropping columns the
    /// model does not use. Each model cardinality must cover the data.
    pub fn project(&self, model: &QualitativeModel) -> Result<DiscreteDataset> {
        let by_name: HashMap<&str, usize> = self
            .variables
            .iter()
            .enumerate()
            .map(|(i, v)| (v.name.as_str(), i))
            .collect();
        let mut idx = Vec::with_capacity(model.len());
        for v in model.variables() {
            let &i = by_name.get(v.name.as_str()).ok_or_else(|| Error::Data {
                row: 0,
                column: v.name.clone(),
                message: "column missing from dataset".into(),
            })?;
            if self.variables[i].cardinality > v.cardinality {
                return Err(Error::Data {
                    row: 0,
                    column: v.name.clone(),
                    message: format!(
                        "dataset has {} states but the model declares {}",
                        self.variables[i].cardinality, v.cardinality
                    ),
                });
            }
            idx.push(i);
        }
        let rows = self.rows.iter().map(|r| idx.iter().map(|&i| r[i]).collect()).collect();
        DiscreteDataset::new(model.variables().to_vec(), rows, model.class_name())
    }

    /// Header plus integer state codes.
    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(self.variables.iter().map(|v| v.name.as_str()))?;
        for row in &self.rows {
            w.write_record(row.iter().map(|x| x.to_string()))?;
        }
        w.flush().map_err(|e| Error::io("<csv output>", e))?;
        Ok(())
    }

    /// Reads a coded CSV. Cardinalities are taken from `variables` when
    /// given, else one more than the largest code seen (at least 2).
    pub fn read_csv(source: impl Read, class_name: &str, variables: Option<&[Variable]>) -> Result<Self> {
        let (table, report) = drop_incomplete(load_table(source, &TableFormat::default())?);
        if report.dropped > 0 {
            return Err(Error::Data {
                row: 0,
                column: String::new(),
                message: format!("{} rows with missing cells in coded data", report.dropped),
            });
        }
        let mut rows = Vec::with_capacity(table.rows.len());
        for (i, r) in table.rows.iter().enumerate() {
            let coded = r
                .iter()
                .zip(&table.columns)
                .map(|(cell, col)| {
                    cell.parse::<usize>().map_err(|_| Error::Data {
                        row: i,
                        column: col.clone(),
                        message: format!("`{cell}` is not a state code"),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(coded);
        }
        let vars = match variables {
            Some(v) => {
                let names: Vec<&str> = v.iter().map(|x| x.name.as_str()).collect();
                let header: Vec<&str> = table.columns.iter().map(String::as_str).collect();
                if names != header {
                    return Err(Error::Spec(format!(
                        "header {header:?} does not match variables {names:?}"
                    )));
                }
                v.to_vec()
            }
            None => table
                .columns
                .iter()
                .enumerate()
                .map(|(j, name)| {
                    let max = rows.iter().map(|r: &Vec<usize>| r[j]).max().unwrap_or(0);
                    Variable::new(name.clone(), (max + 1).max(2))
                })
                .collect(),
        };
        DiscreteDataset::new(vars, rows, class_name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn drops_rows_with_missing_cells() {
        let src = "a,b\n1,2\n?,3\n4,5\n";
        let t = load_table(src.as_bytes(), &TableFormat::default()).unwrap();
        let (t, report) = drop_incomplete(t);
        assert_eq!(report, DropReport { kept: 2, dropped: 1 });
        assert_eq!(t.rows, vec![vec!["1", "2"], vec!["4", "5"]]);
    }

    #[test]
    fn ragged_row_reports_line() {
        let src = "a,b\n1,2\n3\n";
        match load_table(src.as_bytes(), &TableFormat::default()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn headerless_source() {
        let format = TableFormat {
            has_header: false,
            ..Default::default()
        };
        let t = load_table("1,2\n3,4\n".as_bytes(), &format).unwrap();
        assert_eq!(t.columns, vec!["c0", "c1"]);
        assert_eq!(t.rows.len(), 2);
    }

    #[test]
    fn project_reorders_and_checks() {
        let d = DiscreteDataset::new(
            vec![Variable::new("c", 2), Variable::new("a", 3), Variable::new("z", 2)],
            vec![vec![1, 2, 0], vec![0, 0, 1]],
            "c",
        )
        .unwrap();
        let m = QualitativeModel::new("m", vec![Variable::new("a", 3), Variable::new("c", 2)], vec![], "c").unwrap();
        let p = d.project(&m).unwrap();
        assert_eq!(p.rows(), &[vec![2, 1], vec![0, 0]]);
        assert_eq!(p.class_index(), 1);
        let narrow =
            QualitativeModel::new("m", vec![Variable::new("a", 2), Variable::new("c", 2)], vec![], "c").unwrap();
        assert!(d.project(&narrow).is_err());
    }

    #[test]
    fn coded_csv_round_trip() {
        let d = DiscreteDataset::new(
            vec![Variable::new("a", 3), Variable::new("c", 2)],
            vec![vec![2, 1], vec![0, 0], vec![1, 1]],
            "c",
        )
        .unwrap();
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "a,c\n2,1\n0,0\n1,1\n");
        let back = DiscreteDataset::read_csv(buf.as_slice(), "c", None).unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn rejects_out_of_range_cells() {
        let err = DiscreteDataset::new(vec![Variable::new("c", 2)], vec![vec![0], vec![2]], "c").unwrap_err();
        assert!(matches!(err, Error::Data { row: 1, .. }));
    }
}
