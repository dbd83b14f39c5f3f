//! Kendall rank correlation, tie-aware (tau-b), in O(n log n).

use std::cmp::Ordering;

use crate::error::{Error, Result};

/// Tau-b between two paired score vectors.
///
/// `a[i]` and `b[i]` are the scores (or ranks) of item `i` under the two
/// orderings. Ties in either vector are handled by the tau-b correction.
///
/// Fails with fewer than two items, mismatched lengths, incomparable values
/// (NaN), or when either vector is constant.
pub fn kendall_tau<T: PartialOrd>(a: &[T], b: &[T]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch(a.len(), b.len()));
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::TooFewItems(n));
    }
    if a.iter().chain(b).any(|v| v.partial_cmp(v).is_none()) {
        return Err(Error::Invalid("kendall tau input contains an incomparable value".into()));
    }
    let cmp = |x: &T, y: &T| x.partial_cmp(y).expect("checked comparable");

    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| cmp(&a[i], &a[j]).then_with(|| cmp(&b[i], &b[j])));

    let pairs = |len: u64| len * len.saturating_sub(1) / 2;
    let total = pairs(n as u64);

    // Ties in a, and joint ties in (a, b).
    let mut ties_a = 0u64;
    let mut ties_ab = 0u64;
    let mut run_a = 1u64;
    let mut run_ab = 1u64;
    for w in idx.windows(2) {
        let (i, j) = (w[0], w[1]);
        if cmp(&a[i], &a[j]) == Ordering::Equal {
            run_a += 1;
            if cmp(&b[i], &b[j]) == Ordering::Equal {
                run_ab += 1;
            } else {
                ties_ab += pairs(run_ab);
                run_ab = 1;
            }
        } else {
            ties_a += pairs(run_a);
            ties_ab += pairs(run_ab);
            run_a = 1;
            run_ab = 1;
        }
    }
    ties_a += pairs(run_a);
    ties_ab += pairs(run_ab);

    // Sorting the a-ordered sequence by b counts the discordant pairs as swaps.
    let mut buf = idx.clone();
    let swaps = merge_count(&mut idx, &mut buf, &|i, j| cmp(&b[i], &b[j]));

    let mut ties_b = 0u64;
    let mut run_b = 1u64;
    for w in idx.windows(2) {
        if cmp(&b[w[0]], &b[w[1]]) == Ordering::Equal {
            run_b += 1;
        } else {
            ties_b += pairs(run_b);
            run_b = 1;
        }
    }
    ties_b += pairs(run_b);

    let denom_a = total - ties_a;
    let denom_b = total - ties_b;
    if denom_a == 0 || denom_b == 0 {
        return Err(Error::UndefinedCorrelation);
    }
    // concordant - discordant = total - ties_a - ties_b + ties_ab - 2 * discordant
    let numerator = total as f64 - ties_a as f64 - ties_b as f64 + ties_ab as f64 - 2.0 * swaps as f64;
    let tau = numerator / (denom_a as f64 * denom_b as f64).sqrt();
    Ok(tau.clamp(-1.0, 1.0))
}

/// Stable merge sort of `v` by `cmp`, returning the number of strict inversions.
fn merge_count<F>(v: &mut [usize], buf: &mut [usize], cmp: &F) -> u64
where
    F: Fn(usize, usize) -> Ordering,
{
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = {
        let (left, right) = v.split_at_mut(mid);
        let (lbuf, rbuf) = buf.split_at_mut(mid);
        merge_count(left, lbuf, cmp) + merge_count(right, rbuf, cmp)
    };
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if cmp(v[j], v[i]) == Ordering::Less {
            buf[k] = v[j];
            swaps += (mid - i) as u64;
            j += 1;
        } else {
            buf[k] = v[i];
            i += 1;
        }
        k += 1;
    }
    buf[k..k + mid - i].copy_from_slice(&v[i..mid]);
    k += mid - i;
    buf[k..k + n - j].copy_from_slice(&v[j..n]);
    v.copy_from_slice(&buf[..n]);
    swaps
}
