use serde::Serialize;

use crate::error::{Error, Result};

/// Chi-square(1) critical value at the 5% level.
pub const CRITICAL_VALUE: f64 = 3.841;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Winner {
    A,
    B,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McNemarResult {
    /// Rows A got right and B got wrong.
    pub b: usize,
    /// Rows B got right and A got wrong.
    pub c: usize,
    pub statistic: f64,
    pub significant: bool,
    pub winner: Option<Winner>,
}

/// Continuity-corrected McNemar decision from the discordant counts.
pub fn mcnemar_from_counts(b: usize, c: usize) -> McNemarResult {
    if b + c == 0 {
        return McNemarResult {
            b,
            c,
            statistic: 0.0,
            significant: false,
            winner: None,
        };
    }
    let diff = (b as f64 - c as f64).abs() - 1.0;
    let statistic = diff * diff / (b + c) as f64;
    let significant = statistic > CRITICAL_VALUE;
    let winner = match (significant, b.cmp(&c)) {
        (true, std::cmp::Ordering::Greater) => Some(Winner::A),
        (true, std::cmp::Ordering::Less) => Some(Winner::B),
        _ => None,
    };
    McNemarResult {
        b,
        c,
        statistic,
        significant,
        winner,
    }
}

/// McNemar's test on two prediction vectors against the same truth.
pub fn mcnemar_test(preds_a: &[usize], preds_b: &[usize], truth: &[usize]) -> Result<McNemarResult> {
    if preds_a.len() != truth.len() || preds_b.len() != truth.len() {
        return Err(Error::domain(format!(
            "prediction lengths {} and {} differ from truth length {}",
            preds_a.len(),
            preds_b.len(),
            truth.len()
        )));
    }
    let correct_a: Vec<bool> = preds_a.iter().zip(truth).map(|(p, t)| p == t).collect();
    let correct_b: Vec<bool> = preds_b.iter().zip(truth).map(|(p, t)| p == t).collect();
    Ok(mcnemar_from_correctness(&correct_a, &correct_b))
}

pub(crate) fn mcnemar_from_correctness(a: &[bool], b: &[bool]) -> McNemarResult {
    let (mut only_a, mut only_b) = (0, 0);
    for (&x, &y) in a.iter().zip(b) {
        match (x, y) {
            (true, false) => only_a += 1,
            (false, true) => only_b += 1,
            _ => {}
        }
    }
    mcnemar_from_counts(only_a, only_b)
}
