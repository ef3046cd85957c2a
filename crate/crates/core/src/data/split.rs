use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::DiscreteDataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub test_fraction: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            test_fraction: 1.0 / 3.0,
            seed: 0,
        }
    }
}

/// Per-class test quotas: floors of `count * fraction`, topped up by largest
/// remainder (lower class first on ties) until they sum to
/// `round(n * fraction)`.
fn test_quotas(counts: &[usize], fraction: f64) -> Vec<usize> {
    let n: usize = counts.iter().sum();
    let exact: Vec<f64> = counts.iter().map(|&c| c as f64 * fraction).collect();
    // Absorb representation error so 81 * (1/3) floors to 27.
    let floor = |x: f64| (x + 1e-9).floor();
    let mut quotas: Vec<usize> = exact.iter().map(|&x| floor(x) as usize).collect();
    let target = ((n as f64 * fraction).round() as usize).min(n);
    let mut order: Vec<usize> = (0..counts.len()).collect();
    order.sort_by(|&a, &b| {
        let (ra, rb) = (exact[a] - floor(exact[a]), exact[b] - floor(exact[b]));
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    let mut missing = target.saturating_sub(quotas.iter().sum());
    for &c in order.iter().cycle().take(order.len() * 2) {
        if missing == 0 {
            break;
        }
        if quotas[c] < counts[c] {
            quotas[c] += 1;
            missing -= 1;
        }
    }
    quotas
}

/// Row indices of (train pool, test set), both ascending.
pub fn stratified_split_indices(data: &DiscreteDataset, spec: &SplitSpec) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(spec.test_fraction > 0.0 && spec.test_fraction < 1.0) {
        return Err(Error::Spec(format!(
            "test fraction must lie in (0, 1), got {}",
            spec.test_fraction
        )));
    }
    let counts = data.class_counts();
    if let Some(c) = counts.iter().position(|&n| n == 0) {
        return Err(Error::Spec(format!("class state {c} has no rows to stratify")));
    }
    let quotas = test_quotas(&counts, spec.test_fraction);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut in_test = vec![false; data.len()];
    for (class, &k) in quotas.iter().enumerate() {
        let members: Vec<usize> = data
            .labels()
            .enumerate()
            .filter(|&(_, c)| c == class)
            .map(|(i, _)| i)
            .collect();
        for pick in index::sample(&mut rng, members.len(), k) {
            in_test[members[pick]] = true;
        }
    }
    let (test, train): (Vec<usize>, Vec<usize>) = (0..data.len()).partition(|&i| in_test[i]);
    Ok((train, test))
}

/// Splits into (train pool, test set), stratified by class.
pub fn stratified_split(data: &DiscreteDataset, spec: &SplitSpec) -> Result<(DiscreteDataset, DiscreteDataset)> {
    let (train, test) = stratified_split_indices(data, spec)?;
    Ok((data.subset(&train), data.subset(&test)))
}

/// `m` distinct indices below `n`, drawn uniformly and returned ascending.
pub fn sample_indices(n: usize, m: usize, seed: u64) -> Result<Vec<usize>> {
    if m > n {
        return Err(Error::domain(format!("cannot draw {m} rows from a pool of {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picks = index::sample(&mut rng, n, m).into_vec();
    picks.sort_unstable();
    Ok(picks)
}

/// Uniform sample of `m` rows without replacement.
pub fn sample_training_set(pool: &DiscreteDataset, m: usize, seed: u64) -> Result<DiscreteDataset> {
    Ok(pool.subset(&sample_indices(pool.len(), m, seed)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Variable;
    use proptest::prelude::*;

    fn labelled(labels: &[usize]) -> DiscreteDataset {
        let rows = labels.iter().enumerate().map(|(i, &c)| vec![i % 2, c]).collect();
        DiscreteDataset::new(vec![Variable::new("a", 2), Variable::new("c", 2)], rows, "c").unwrap()
    }

    #[test]
    fn exact_thirds() {
        let mut labels = vec![1; 9];
        labels.extend([0; 3]);
        let d = labelled(&labels);
        let (pool, test) = stratified_split(
            &d,
            &SplitSpec {
                test_fraction: 1.0 / 3.0,
                seed: 4,
            },
        )
        .unwrap();
        assert_eq!(test.class_counts(), vec![1, 3]);
        assert_eq!(pool.len(), 8);
    }

    #[test]
    fn equal_seeds_equal_splits() {
        let d = labelled(&[0, 1, 1, 0, 1, 1, 1, 0, 1, 0, 0, 1, 1]);
        let spec = SplitSpec {
            test_fraction: 0.4,
            seed: 99,
        };
        assert_eq!(
            stratified_split_indices(&d, &spec).unwrap(),
            stratified_split_indices(&d, &spec).unwrap()
        );
        assert_eq!(sample_indices(50, 7, 3).unwrap(), sample_indices(50, 7, 3).unwrap());
    }

    #[test]
    fn haberman_sized_quotas() {
        assert_eq!(test_quotas(&[81, 225], 1.0 / 3.0), vec![27, 75]);
        // Remainders tie at .5; the lower class takes the extra row.
        assert_eq!(test_quotas(&[10, 6], 0.25), vec![3, 1]);
        assert_eq!(test_quotas(&[5, 5], 0.3), vec![2, 1]);
    }

    #[test]
    fn oversized_sample_is_an_error() {
        assert!(sample_indices(3, 4, 0).is_err());
        assert_eq!(sample_indices(3, 3, 0).unwrap(), vec![0, 1, 2]);
    }

    proptest! {
        #[test]
        fn split_partitions_rows(
            labels in proptest::collection::vec(0usize..2, 2..80),
            fraction in 0.05f64..0.95,
            seed in any::<u64>(),
        ) {
            prop_assume!(labels.contains(&0) && labels.contains(&1));
            let d = labelled(&labels);
            let (train, test) = stratified_split_indices(&d, &SplitSpec { test_fraction: fraction, seed }).unwrap();
            let mut all: Vec<usize> = train.iter().chain(&test).copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..labels.len()).collect::<Vec<_>>());
            prop_assert_eq!(test.len(), (labels.len() as f64 * fraction).round() as usize);
            let counts = d.class_counts();
            let test_counts = d.subset(&test).class_counts();
            for c in 0..2 {
                prop_assert!((test_counts[c] as f64 - counts[c] as f64 * fraction).abs() < 1.0 + 1e-9);
            }
        }
    }
}
