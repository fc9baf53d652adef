use std::collections::HashMap;

use crate::domain::Assignment;
use crate::error::{contract, Result};

/// `(joint, row marginals, column marginals)`.
pub type Contingency = (HashMap<(usize, usize), u64>, HashMap<usize, u64>, HashMap<usize, u64>);

/// Contingency counts between two labelings.
pub fn contingency(a: &[usize], b: &[usize]) -> Contingency {
    let mut joint = HashMap::new();
    let mut left = HashMap::new();
    let mut right = HashMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *joint.entry((x, y)).or_insert(0) += 1;
        *left.entry(x).or_insert(0) += 1;
        *right.entry(y).or_insert(0) += 1;
    }
    (joint, left, right)
}

fn pairs(c: u64) -> u64 {
    c * c.saturating_sub(1) / 2
}

/// Adjusted Rand Index (Hubert-Arabie).
///
/// When the adjustment's denominator vanishes (both labelings put everything
/// in one cluster, or both use all singletons) the result is `1.0` if the
/// partitions agree and `0.0` otherwise.
pub fn ari(a: &Assignment, b: &Assignment) -> Result<f64> {
    if a.len() != b.len() {
        return Err(contract(format!(
            "labelings have different lengths ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    if a.len() < 2 {
        return Err(contract("ARI needs at least two observations"));
    }
    let (joint, left, right) = contingency(a.labels(), b.labels());
    let index = joint.values().map(|&c| pairs(c)).sum::<u64>() as f64;
    let sum_a = left.values().map(|&c| pairs(c)).sum::<u64>() as f64;
    let sum_b = right.values().map(|&c| pairs(c)).sum::<u64>() as f64;
    let total = pairs(a.len() as u64) as f64;
    let expected = sum_a * sum_b / total;
    let max_index = 0.5 * (sum_a + sum_b);
    let denom = max_index - expected;
    if denom == 0.0 {
        let same = joint.len() == left.len() && joint.len() == right.len();
        return Ok(if same { 1.0 } else { 0.0 });
    }
    Ok((index - expected) / denom)
}

/// ARI over the rows whose ground-truth label is not the outlier sentinel.
pub fn ari_inliers(predicted: &Assignment, truth: &Assignment) -> Result<f64> {
    if predicted.len() != truth.len() {
        return Err(contract(format!(
            "labelings have different lengths ({} vs {})",
            predicted.len(),
            truth.len()
        )));
    }
    let keep = truth.inlier_indices();
    ari(&predicted.select(&keep), &truth.select(&keep))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn lab(v: &[usize]) -> Assignment {
        Assignment::new(v.to_vec())
    }

    /// Direct pair counting over all C(n, 2) pairs.
    fn brute_force(a: &[usize], b: &[usize]) -> f64 {
        let n = a.len();
        let (mut both, mut in_a, mut in_b) = (0f64, 0f64, 0f64);
        for i in 0..n {
            for j in (i + 1)..n {
                let sa = a[i] == a[j];
                let sb = b[i] == b[j];
                both += f64::from(u8::from(sa && sb));
                in_a += f64::from(u8::from(sa));
                in_b += f64::from(u8::from(sb));
            }
        }
        let total = (n * (n - 1) / 2) as f64;
        let expected = in_a * in_b / total;
        let max = 0.5 * (in_a + in_b);
        if max == expected {
            return if both == in_a && both == in_b { 1.0 } else { 0.0 };
        }
        (both - expected) / (max - expected)
    }

    #[test]
    fn examples() {
        assert_eq!(ari(&lab(&[0, 0, 1, 1, 2]), &lab(&[0, 0, 1, 1, 2])).unwrap(), 1.0);
        assert_eq!(ari(&lab(&[0, 0, 1, 1, 2]), &lab(&[2, 2, 0, 0, 1])).unwrap(), 1.0);
        approx::assert_relative_eq!(ari(&lab(&[0, 0, 1, 1]), &lab(&[0, 1, 0, 1])).unwrap(), -0.5, epsilon = 1e-12);
        approx::assert_relative_eq!(brute_force(&[0, 0, 1, 1], &[0, 1, 0, 1]), -0.5, epsilon = 1e-12);
    }

    #[test]
    fn degenerate_partitions() {
        assert_eq!(ari(&lab(&[0, 0, 0]), &lab(&[4, 4, 4])).unwrap(), 1.0);
        assert_eq!(ari(&lab(&[0, 1, 2]), &lab(&[2, 0, 1])).unwrap(), 1.0);
        assert_eq!(ari(&lab(&[0, 0, 0]), &lab(&[0, 1, 2])).unwrap(), 0.0);
        assert!(ari(&lab(&[0]), &lab(&[0])).is_err());
        assert!(ari(&lab(&[0, 1]), &lab(&[0, 1, 1])).is_err());
    }

    #[test]
    fn outlier_rows_are_ignored() {
        let truth = lab(&[0, 0, 1, 1, Assignment::OUTLIER]);
        let pred = lab(&[3, 3, 5, 5, 3]);
        assert_eq!(ari_inliers(&pred, &truth).unwrap(), 1.0);
    }

    proptest! {
        #[test]
        fn matches_brute_force(
            (a, b) in (2usize..50).prop_flat_map(|n| (
                prop::collection::vec(0usize..5, n),
                prop::collection::vec(0usize..5, n),
            ))
        ) {
            let fast = ari(&lab(&a), &lab(&b)).unwrap();
            prop_assert!((fast - brute_force(&a, &b)).abs() < 1e-12);
            prop_assert!((-1.0..=1.0).contains(&fast));
            let back = ari(&lab(&b), &lab(&a)).unwrap();
            prop_assert!((fast - back).abs() < 1e-12);
        }
    }
}
