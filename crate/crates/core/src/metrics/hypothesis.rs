use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, ChiSquared, ContinuousCDF, DiscreteCDF, Normal};

use crate::error::{contract, Error, Result};

/// Test statistic with its p-value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub statistic: f64,
    pub p_value: f64,
}

/// Largest sample size for which the signed-rank tail is computed exactly.
pub const WSR_EXACT_MAX_N: usize = 20;

/// Ranks `values` from 1 (smallest) upwards, giving tied values their average rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // Positions start..end hold ranks start+1 ..= end.
        let rank = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    ranks
}

fn tie_sizes(values: &[f64]) -> Vec<usize> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut sizes = Vec::new();
    let mut start = 0;
    while start < sorted.len() {
        let mut end = start + 1;
        while end < sorted.len() && sorted[end] == sorted[start] {
            end += 1;
        }
        sizes.push(end - start);
        start = end;
    }
    sizes
}

/// Friedman rank test.
///
/// `scores[d][a]` is the score of algorithm `a` on dataset `d`. Algorithms
/// are ranked within each dataset (ties share the average rank), the
/// chi-square statistic is corrected for ties, and the p-value is the upper
/// chi-square tail with `a - 1` degrees of freedom. A table in which every
/// dataset is a complete tie yields statistic 0 and p-value 1.
pub fn friedman_test(scores: &[Vec<f64>]) -> Result<TestOutcome> {
    let n = scores.len();
    if n < 2 {
        return Err(contract("Friedman test needs at least two datasets"));
    }
    let k = scores[0].len();
    if k < 2 {
        return Err(contract("Friedman test needs at least two algorithms"));
    }
    if scores.iter().any(|row| row.len() != k) {
        return Err(contract("Friedman test needs a rectangular table"));
    }
    let mut rank_sums = vec![0.0; k];
    let mut tie_term = 0.0;
    for row in scores {
        for (s, r) in rank_sums.iter_mut().zip(average_ranks(row)) {
            *s += r;
        }
        tie_term += tie_sizes(row)
            .into_iter()
            .map(|t| (t * t * t - t) as f64)
            .sum::<f64>();
    }
    let (nf, kf) = (n as f64, k as f64);
    let raw = 12.0 / (nf * kf * (kf + 1.0)) * rank_sums.iter().map(|r| r * r).sum::<f64>()
        - 3.0 * nf * (kf + 1.0);
    let correction = 1.0 - tie_term / (nf * kf * (kf * kf - 1.0));
    if correction <= 0.0 {
        return Ok(TestOutcome { statistic: 0.0, p_value: 1.0 });
    }
    let statistic = (raw / correction).max(0.0);
    let chi = ChiSquared::new(kf - 1.0).map_err(|e| Error::NumericFault(e.to_string()))?;
    Ok(TestOutcome {
        statistic,
        p_value: chi.sf(statistic),
    })
}

/// One-sided exact sign test: `P(Bin(trials, 1/2) >= wins)`.
pub fn sign_test(wins: u64, trials: u64) -> Result<TestOutcome> {
    if trials == 0 {
        return Err(contract("sign test needs at least one trial"));
    }
    if wins > trials {
        return Err(contract(format!("wins ({wins}) exceed trials ({trials})")));
    }
    let p_value = if trials <= 120 {
        // Exact integer tail over 2^trials.
        let mut c: u128 = 1;
        let mut tail: u128 = 0;
        for i in 0..=trials {
            if i >= wins {
                tail += c;
            }
            c = c * u128::from(trials - i) / u128::from(i + 1);
        }
        tail as f64 / 2f64.powi(trials as i32)
    } else if wins == 0 {
        1.0
    } else {
        let bin = Binomial::new(0.5, trials).map_err(|e| Error::NumericFault(e.to_string()))?;
        bin.sf(wins - 1)
    };
    Ok(TestOutcome {
        statistic: wins as f64,
        p_value,
    })
}

/// Counts of sign patterns by doubled positive-rank sum: `counts[s]` is the
/// number of subsets of `doubled_ranks` summing to `s`.
pub(crate) fn signed_rank_counts(doubled_ranks: &[u64]) -> Vec<f64> {
    let total: u64 = doubled_ranks.iter().sum();
    let mut counts = vec![0.0f64; total as usize + 1];
    counts[0] = 1.0;
    let mut reach = 0usize;
    for &r in doubled_ranks {
        let r = r as usize;
        for s in (0..=reach).rev() {
            if counts[s] != 0.0 {
                counts[s + r] += counts[s];
            }
        }
        reach += r;
    }
    counts
}

/// One-sided Wilcoxon signed-rank test for positive location shift.
///
/// Zero differences are dropped. `W` is the rank sum of the positive
/// differences. For up to [`WSR_EXACT_MAX_N`] non-zero differences the
/// p-value `P(W+ >= W)` is the exact tail over all sign patterns of the
/// observed (possibly tied) ranks; above that a tie-corrected normal
/// approximation without continuity correction is used.
pub fn wilcoxon_signed_rank(differences: &[f64]) -> Result<TestOutcome> {
    if differences.is_empty() {
        return Err(contract("Wilcoxon test needs at least one difference"));
    }
    if differences.iter().any(|d| !d.is_finite()) {
        return Err(contract("differences must be finite"));
    }
    let nonzero: Vec<f64> = differences.iter().copied().filter(|&d| d != 0.0).collect();
    if nonzero.is_empty() {
        return Err(Error::NoEvidence);
    }
    let magnitudes: Vec<f64> = nonzero.iter().map(|d| d.abs()).collect();
    let ranks = average_ranks(&magnitudes);
    let w: f64 = nonzero
        .iter()
        .zip(&ranks)
        .filter(|(d, _)| **d > 0.0)
        .map(|(_, r)| r)
        .sum();
    let n = nonzero.len();

    let p_value = if n <= WSR_EXACT_MAX_N {
        let doubled: Vec<u64> = ranks.iter().map(|r| (2.0 * r).round() as u64).collect();
        let counts = signed_rank_counts(&doubled);
        let threshold = (2.0 * w).round() as usize;
        let tail: f64 = counts[threshold..].iter().sum();
        tail / 2f64.powi(n as i32)
    } else {
        let nf = n as f64;
        let mean = nf * (nf + 1.0) / 4.0;
        let ties: f64 = tie_sizes(&magnitudes)
            .into_iter()
            .map(|t| (t * t * t - t) as f64)
            .sum();
        let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - ties / 48.0;
        let normal = Normal::new(0.0, 1.0).map_err(|e| Error::NumericFault(e.to_string()))?;
        normal.sf((w - mean) / var.sqrt())
    };
    Ok(TestOutcome { statistic: w, p_value })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn distinct_positive(n: usize) -> Vec<f64> {
        (1..=n).map(|i| i as f64 * 0.01).collect()
    }

    #[test]
    fn ranks_average_ties() {
        assert_eq!(average_ranks(&[10.0, 20.0, 20.0, 5.0]), vec![2.0, 3.5, 3.5, 1.0]);
    }

    #[test]
    fn sign_test_values() {
        assert_eq!(sign_test(15, 16).unwrap().p_value, 17.0 / 65536.0);
        assert_relative_eq!(sign_test(14, 16).unwrap().p_value, 137.0 / 65536.0);
        assert_eq!(sign_test(16, 16).unwrap().p_value, 1.0 / 65536.0);
        assert_eq!(sign_test(0, 16).unwrap().p_value, 1.0);
        assert!(sign_test(8, 16).unwrap().p_value > 0.5);
        assert!(sign_test(3, 2).is_err());
        assert!(sign_test(0, 0).is_err());
        let big = sign_test(150, 200).unwrap().p_value;
        assert!(big > 0.0 && big < 1e-10);
    }

    #[test]
    fn sign_test_is_monotone() {
        for trials in [5u64, 16, 40] {
            let ps: Vec<f64> = (0..=trials).map(|w| sign_test(w, trials).unwrap().p_value).collect();
            assert!(ps.windows(2).all(|w| w[1] < w[0]));
        }
    }

    #[test]
    fn wsr_values() {
        let mut d = distinct_positive(16);
        d[0] = -d[0];
        let r = wilcoxon_signed_rank(&d).unwrap();
        assert_eq!(r.statistic, 135.0);
        assert_eq!(r.p_value, 2.0 / 65536.0);

        let mut d = distinct_positive(16);
        d[1] = -d[1];
        let r = wilcoxon_signed_rank(&d).unwrap();
        assert_eq!(r.statistic, 134.0);
        assert_eq!(r.p_value, 3.0 / 65536.0);

        let r = wilcoxon_signed_rank(&[0.3]).unwrap();
        assert_eq!((r.statistic, r.p_value), (1.0, 0.5));

        assert!(matches!(wilcoxon_signed_rank(&[0.0, 0.0]), Err(Error::NoEvidence)));
        let r = wilcoxon_signed_rank(&[0.0, 0.5, 0.0]).unwrap();
        assert_eq!((r.statistic, r.p_value), (1.0, 0.5));
    }

    #[test]
    fn wsr_normal_branch_is_close_to_exact() {
        // n = 30 uses the approximation; the exact tail comes from the DP.
        let d: Vec<f64> = (1..=30).map(|i| if i % 3 == 0 { -(i as f64) } else { i as f64 }).collect();
        let r = wilcoxon_signed_rank(&d).unwrap();
        let doubled: Vec<u64> = (1..=30).map(|i| 2 * i).collect();
        let counts = signed_rank_counts(&doubled);
        let tail: f64 = counts[(2.0 * r.statistic) as usize..].iter().sum();
        let exact = tail / 2f64.powi(30);
        assert!((r.p_value - exact).abs() < 0.01, "{} vs {exact}", r.p_value);
    }

    #[test]
    fn friedman_degenerate_cases() {
        let same = vec![vec![0.5, 0.5, 0.5]; 4];
        let r = friedman_test(&same).unwrap();
        assert_eq!((r.statistic, r.p_value), (0.0, 1.0));

        // Two algorithms, one always ahead over 16 datasets: rank sums 32 and
        // 16 give 12/(16*2*3) * (32^2 + 16^2) - 3*16*3 = 16.
        let table: Vec<Vec<f64>> = (0..16).map(|i| vec![0.9 - i as f64 * 0.01, 0.1]).collect();
        let r = friedman_test(&table).unwrap();
        assert_relative_eq!(r.statistic, 16.0, epsilon = 1e-9);
        let expected = ChiSquared::new(1.0).unwrap().sf(16.0);
        assert_relative_eq!(r.p_value, expected, max_relative = 1e-12);
        assert!(friedman_test(&table[..1]).is_err());
    }

    /// Enumerates all 2^n sign patterns directly.
    fn brute_tail(ranks: &[f64], w: f64) -> f64 {
        let n = ranks.len();
        let mut hits = 0u64;
        for mask in 0u64..(1 << n) {
            let s: f64 = (0..n).filter(|&i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
            if s >= w - 1e-9 {
                hits += 1;
            }
        }
        hits as f64 / (1u64 << n) as f64
    }

    proptest! {
        #[test]
        fn exact_tail_matches_enumeration(
            d in prop::collection::vec(prop_oneof![-5i32..-1, 1i32..5], 1..=12)
        ) {
            let diffs: Vec<f64> = d.iter().map(|&v| v as f64).collect();
            let r = wilcoxon_signed_rank(&diffs).unwrap();
            let ranks = average_ranks(&diffs.iter().map(|v| v.abs()).collect::<Vec<_>>());
            prop_assert!((r.p_value - brute_tail(&ranks, r.statistic)).abs() < 1e-12);
        }
    }
}
