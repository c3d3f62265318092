//! Evaluation metrics and order statistics.

use alloc::format;
use alloc::vec::Vec;

use crate::math;
use crate::{Error, Result};

const LOGLOSS_CLAMP: f64 = 1e-15;

fn check_lengths(scores: &[f64], labels: &[bool]) -> Result<()> {
    if scores.len() != labels.len() {
        return Err(Error::InvalidParameter {
            name: "labels",
            reason: format!("{} scores but {} labels", scores.len(), labels.len()),
        });
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidParameter {
            name: "scores",
            reason: "NaN score".into(),
        });
    }
    Ok(())
}

/// Area under the ROC curve as the Mann–Whitney statistic, ties counted as half.
///
/// Uses mid-ranks after one sort. Rank sums are kept doubled in integers so the
/// only rounding is the final division.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    check_lengths(scores, labels)?;
    let n_pos = labels.iter().filter(|&&l| l).count() as u128;
    let n_neg = labels.len() as u128 - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // Sum over positives of 2 * mid-rank (1-based).
    let mut doubled_rank_sum: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // ranks i+1 ..= j+1, so twice the mid-rank is i + j + 2
        let doubled_mid = (i + j + 2) as u128;
        let pos_in_group = order[i..=j].iter().filter(|&&k| labels[k]).count() as u128;
        doubled_rank_sum += doubled_mid * pos_in_group;
        i = j + 1;
    }
    let doubled_u = doubled_rank_sum - n_pos * (n_pos + 1);
    Ok(doubled_u as f64 / (2 * n_pos * n_neg) as f64)
}

/// Mean binary cross-entropy with probabilities clamped to `[1e-15, 1 - 1e-15]`.
pub fn logloss(probs: &[f64], labels: &[bool]) -> Result<f64> {
    check_lengths(probs, labels)?;
    if probs.is_empty() {
        return Err(Error::EmptyInput("logloss"));
    }
    let mut acc = math::KahanSum::default();
    for (&p, &y) in probs.iter().zip(labels) {
        let p = p.clamp(LOGLOSS_CLAMP, 1.0 - LOGLOSS_CLAMP);
        acc.add(if y { -math::ln(p) } else { -math::ln(1.0 - p) });
    }
    Ok(acc.value() / probs.len() as f64)
}

/// Percentile of already-sorted data by linear interpolation between order
/// statistics (position `q * (n - 1)`), `q` in `[0, 1]`.
pub fn percentile_sorted(sorted: &[f64], q: f64) -> Result<f64> {
    if sorted.is_empty() {
        return Err(Error::EmptyInput("percentile"));
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos as usize;
    let frac = pos - lo as f64;
    if lo + 1 >= sorted.len() || frac == 0.0 {
        return Ok(sorted[lo.min(sorted.len() - 1)]);
    }
    Ok(sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]))
}

pub fn percentile(values: &[f64], q: f64) -> Result<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    percentile_sorted(&v, q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn auc_examples() {
        assert_eq!(roc_auc(&[0.9, 0.8, 0.2, 0.1], &[true, true, false, false]).unwrap(), 1.0);
        assert_eq!(roc_auc(&[0.3; 6], &[true, false, true, false, false, true]).unwrap(), 0.5);
        assert_eq!(roc_auc(&[0.1, 0.9], &[true, false]).unwrap(), 0.0);
        assert_eq!(roc_auc(&[0.1, 0.9], &[true, true]).unwrap_err(), Error::SingleClass);
        assert!(roc_auc(&[0.1], &[true, false]).is_err());
    }

    #[test]
    fn logloss_examples() {
        let ln2 = core::f64::consts::LN_2;
        assert!((logloss(&[0.5; 4], &[true, false, true, false]).unwrap() - ln2).abs() < 1e-15);
        assert!(logloss(&[1.0, 0.0], &[true, false]).unwrap() < 1e-14);
        assert!(logloss(&[], &[]).is_err());
        let direct = -(0.7f64.ln() + 0.6f64.ln()) / 2.0;
        assert!((logloss(&[0.7, 0.4], &[true, false]).unwrap() - direct).abs() < 1e-15);
    }

    #[test]
    fn percentile_interpolates() {
        let v: Vec<f64> = (1..=10).map(f64::from).collect();
        assert!((percentile(&v, 0.2).unwrap() - 2.8).abs() < 1e-12);
        assert_eq!(percentile(&v, 1.0).unwrap(), 10.0);
        assert_eq!(percentile(&v, 0.0).unwrap(), 1.0);
        assert_eq!(percentile(&[5.0], 0.99).unwrap(), 5.0);
        assert!(percentile(&vec![], 0.5).is_err());
    }
}
