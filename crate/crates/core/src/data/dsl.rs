//! Line-oriented text format for qualitative models.
//!
//! ```text
//! # comment
//! network haberman
//! var age bins        # cardinality taken from the discretized data
//! var class 2
//! class class
//! edge age -> class q-
//! ```

use crate::error::{Error, Result};
use crate::model::{Edge, MonotoneSign, QualitativeModel, Variable};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cardinality {
    Fixed(usize),
    /// Decided by the data the model is paired with.
    Bins,
}

/// Parsed but unresolved model text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelSource {
    pub name: String,
    pub variables: Vec<(String, Cardinality)>,
    pub class: String,
    pub edges: Vec<Edge>,
}

impl ModelSource {
    /// Fixes every `bins` cardinality through `resolve` and validates.
    pub fn resolve(&self, resolve: impl Fn(&str) -> Option<usize>) -> Result<QualitativeModel> {
        let variables = self
            .variables
            .iter()
            .map(|(name, card)| match card {
                Cardinality::Fixed(n) => Ok(Variable::new(name.clone(), *n)),
                Cardinality::Bins => resolve(name)
                    .map(|n| Variable::new(name.clone(), n))
                    .ok_or_else(|| Error::Spec(format!("no data-driven cardinality for `{name}`"))),
            })
            .collect::<Result<_>>()?;
        QualitativeModel::new(self.name.clone(), variables, self.edges.clone(), self.class.clone())
    }
}

struct Token<'a> {
    text: &'a str,
    column: usize,
}

fn tokens(line: &str) -> Vec<Token<'_>> {
    let code = line.split('#').next().unwrap_or("");
    let mut out = Vec::new();
    let mut start = None;
    for (i, ch) in code.char_indices().chain(std::iter::once((code.len(), ' '))) {
        match (ch.is_whitespace(), start) {
            (true, Some(s)) => {
                out.push(Token {
                    text: &code[s..i],
                    column: code[..s].chars().count() + 1,
                });
                start = None;
            }
            (false, None) => start = Some(i),
            _ => {}
        }
    }
    out
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    chars.next().is_some_and(|c| c.is_alphabetic() || c == '_')
        && chars.all(|c| c.is_alphanumeric() || c == '_' || c == '-' || c == '.')
}

/// Syntax-only parse.
pub fn parse_model_source(source: &str) -> Result<ModelSource> {
    let mut name = None;
    let mut class = None;
    let mut variables = Vec::new();
    let mut edges = Vec::new();
    for (i, line) in source.lines().enumerate() {
        let line_no = i + 1;
        let toks = tokens(line);
        let Some(head) = toks.first() else { continue };
        let err = |column: usize, message: String| Error::Parse {
            line: line_no,
            column,
            message,
        };
        let end = line.split('#').next().unwrap_or("").trim_end().chars().count() + 1;
        let arity = |n: usize| -> Result<()> {
            match toks.len().cmp(&n) {
                std::cmp::Ordering::Equal => Ok(()),
                std::cmp::Ordering::Less => Err(err(end, format!("`{}` expects {} arguments", head.text, n - 1))),
                std::cmp::Ordering::Greater => Err(err(toks[n].column, format!("unexpected `{}`", toks[n].text))),
            }
        };
        let ident = |t: &Token| -> Result<String> {
            if is_identifier(t.text) {
                Ok(t.text.to_string())
            } else {
                Err(err(t.column, format!("`{}` is not an identifier", t.text)))
            }
        };
        match head.text {
            "network" => {
                arity(2)?;
                if name.is_some() {
                    return Err(err(head.column, "network declared twice".into()));
                }
                name = Some(ident(&toks[1])?);
            }
            "var" => {
                arity(3)?;
                let v = ident(&toks[1])?;
                let card = match toks[2].text {
                    "bins" => Cardinality::Bins,
                    t => Cardinality::Fixed(
                        t.parse()
                            .map_err(|_| err(toks[2].column, format!("`{t}` is not a cardinality")))?,
                    ),
                };
                variables.push((v, card));
            }
            "class" => {
                arity(2)?;
                if class.is_some() {
                    return Err(err(head.column, "class declared twice".into()));
                }
                class = Some(ident(&toks[1])?);
            }
            "edge" => {
                arity(5)?;
                let parent = ident(&toks[1])?;
                if toks[2].text != "->" {
                    return Err(err(toks[2].column, format!("expected `->`, found `{}`", toks[2].text)));
                }
                let child = ident(&toks[3])?;
                let sign = match toks[4].text {
                    "q+" => MonotoneSign::Isotone,
                    "q-" => MonotoneSign::Antitone,
                    "none" => MonotoneSign::Unannotated,
                    t => return Err(err(toks[4].column, format!("unknown sign `{t}`"))),
                };
                edges.push(Edge::new(parent, child, sign));
            }
            t => return Err(err(head.column, format!("unknown statement `{t}`"))),
        }
    }
    let last = source.lines().count().max(1);
    let missing = |what: &str| Error::Parse {
        line: last,
        column: 1,
        message: format!("missing `{what}` statement"),
    };
    Ok(ModelSource {
        name: name.ok_or_else(|| missing("network"))?,
        class: class.ok_or_else(|| missing("class"))?,
        variables,
        edges,
    })
}

/// Parses and validates a model whose cardinalities are all explicit.
pub fn parse_qualitative_model(source: &str) -> Result<QualitativeModel> {
    parse_qualitative_model_with(source, |_| None)
}

/// Parses and validates, resolving `bins` cardinalities through `resolve`.
pub fn parse_qualitative_model_with(source: &str, resolve: impl Fn(&str) -> Option<usize>) -> Result<QualitativeModel> {
    parse_model_source(source)?.resolve(resolve)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smallest_model() {
        let m = parse_qualitative_model("network t\nvar a 2\nvar c 2\nclass c\nedge a -> c q+\n").unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(m.edges(), &[Edge::new("a", "c", MonotoneSign::Isotone)]);
        assert_eq!(m.class_name(), "c");
    }

    #[test]
    fn comments_and_blank_lines() {
        let src = "# header\n\nnetwork t # name\nvar a 3\n  var c 2\nclass c\nedge a -> c none # free\n";
        let m = parse_qualitative_model(src).unwrap();
        assert_eq!(m.edges()[0].sign, MonotoneSign::Unannotated);
        assert_eq!(m.cardinality(0), 3);
    }

    #[test]
    fn unknown_sign_is_a_parse_error() {
        let src = "network t\nvar a 2\nvar c 2\nclass c\nedge a -> c q*\n";
        match parse_qualitative_model(src) {
            Err(Error::Parse { line, column, .. }) => assert_eq!((line, column), (5, 13)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn syntax_errors_carry_positions() {
        let cases = [
            ("network t\nvar a two\nclass a\n", 2, 7),
            ("network t\nvar a 2\nclass a\nedge a => a q+\n", 4, 8),
            ("network t\nvar a\n", 2, 6),
            ("network t\nfoo bar\n", 2, 1),
            ("network t\nvar a 2 3\n", 2, 9),
        ];
        for (src, line, column) in cases {
            match parse_model_source(src) {
                Err(Error::Parse { line: l, column: c, .. }) => assert_eq!((l, c), (line, column), "{src:?}"),
                other => panic!("{src:?}: unexpected {other:?}"),
            }
        }
        assert!(matches!(
            parse_model_source("var a 2\nclass a\n"),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn semantic_errors_come_from_validation() {
        let src = "network t\nvar a 2\nvar c 2\nclass c\nedge a -> c q+\nedge c -> a q+\n";
        assert!(matches!(parse_qualitative_model(src), Err(Error::InvalidModel(_))));
        let src = "network t\nvar a 2\nclass c\n";
        assert!(matches!(parse_qualitative_model(src), Err(Error::InvalidModel(_))));
    }

    #[test]
    fn bins_need_a_resolver() {
        let src = "network t\nvar a bins\nvar c 2\nclass c\nedge a -> c q-\n";
        assert!(matches!(parse_qualitative_model(src), Err(Error::Spec(_))));
        let m = parse_qualitative_model_with(src, |n| (n == "a").then_some(5)).unwrap();
        assert_eq!(m.cardinality(0), 5);
    }
}
