//! Linear-time order-statistic selection.
//!
//! Selection is the computational core of the quantile estimators: one
//! selection pass replaces the per-sample fractional powers of the other
//! estimators. The partition kernel is branchless (misprediction-free on
//! random data) and streams between two scratch buffers, so the caller's
//! buffer is left untouched and the initial copy is absorbed into the first
//! partition pass.

use crate::error::{Error, Result};
use std::cell::RefCell;

/// A buffer of absolute projected differences |x_j|, j = 1..k.
///
/// Construction takes absolute values and validates finiteness; estimator
/// routines may permute the contents in place.
#[derive(Clone, Debug)]
pub struct SampleBuffer {
    values: Vec<f64>,
}

impl SampleBuffer {
    /// Builds a buffer from raw (signed) samples, applying |.| to each.
    pub fn from_samples(samples: impl IntoIterator<Item = f64>) -> Result<Self> {
        let values: Vec<f64> = samples.into_iter().map(f64::abs).collect();
        if values.is_empty() {
            return Err(Error::Empty("sample buffer requires k >= 1".into()));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite sample {bad}")));
        }
        Ok(Self { values })
    }

    pub fn k(&self) -> usize {
        self.values.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.values
    }
}

/// The rank-th smallest element (1-based), expected linear time.
pub fn quickselect(buffer: &mut SampleBuffer, rank: usize) -> Result<f64> {
    let k = buffer.k();
    if rank == 0 || rank > k {
        return Err(Error::Index(format!("rank {rank} not in 1..={k}")));
    }
    Ok(select_with_neighbor(buffer.as_slice(), rank - 1).0)
}

/// Empirical q-quantile: the ceil(q k)-th smallest element.
pub fn empirical_q_quantile(buffer: &mut SampleBuffer, q: f64) -> Result<f64> {
    let k = buffer.k();
    quickselect(buffer, ceil_rank(q, k)?)
}

pub(crate) fn ceil_rank(q: f64, k: usize) -> Result<usize> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::Domain(format!("quantile level q must be in (0, 1), got {q}")));
    }
    Ok(((q * k as f64).ceil() as usize).clamp(1, k))
}

/// Interpolated sample quantile at position h = q k + 1/2 (the convention
/// of MATLAB's `quantile`), clamped to the extremes. At q = 0.5 this is the
/// classical sample median. Costs one selection pass; the two order
/// statistics it blends come out of the same pass.
pub(crate) fn interpolated_quantile(values: &mut [f64], q: f64) -> f64 {
    let k = values.len();
    debug_assert!(k >= 1 && q > 0.0 && q < 1.0);
    let h = q * k as f64 + 0.5;
    if h <= 1.0 {
        return values.iter().copied().fold(f64::INFINITY, f64::min);
    }
    if h >= k as f64 {
        return values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    }
    let r = h.floor() as usize; // 1-based lower order statistic
    let frac = h - r as f64;
    let (lower, upper) = select_with_neighbor(values, r - 1);
    if frac == 0.0 {
        return lower;
    }
    (1.0 - frac) * lower + frac * upper
}

thread_local! {
    static SCRATCH: RefCell<(Vec<f64>, Vec<f64>)> = const { RefCell::new((Vec::new(), Vec::new())) };
}

/// Selection core: the idx-th smallest (0-based) of finite values together
/// with the next order statistic (+inf when idx is the maximum).
///
/// Median-of-three pivoting with a pseudorandom fallback once partitions
/// stop shrinking, so adversarial patterns stay near linear. Rounds
/// alternate between two thread-local scratch buffers; `values` is only
/// read.
pub(crate) fn select_with_neighbor(values: &[f64], idx: usize) -> (f64, f64) {
    debug_assert!(idx < values.len());
    SCRATCH.with(|cell| {
        let (a, b) = &mut *cell.borrow_mut();
        let n = values.len();
        if a.len() < n {
            a.resize(n, 0.0);
            b.resize(n, 0.0);
        }
        select_rounds(values, a, b, idx)
    })
}

/// Batcher network for up to 8 lanes; +inf padding sorts to the top.
#[inline]
fn sort8(w: &mut [f64; 8]) {
    #[inline(always)]
    fn ce(w: &mut [f64; 8], i: usize, j: usize) {
        let (lo, hi) = (w[i].min(w[j]), w[i].max(w[j]));
        w[i] = lo;
        w[j] = hi;
    }
    ce(w, 0, 1); ce(w, 2, 3); ce(w, 4, 5); ce(w, 6, 7);
    ce(w, 0, 2); ce(w, 1, 3); ce(w, 4, 6); ce(w, 5, 7);
    ce(w, 1, 2); ce(w, 5, 6); ce(w, 0, 4); ce(w, 3, 7);
    ce(w, 1, 5); ce(w, 2, 6);
    ce(w, 1, 4); ce(w, 3, 6);
    ce(w, 2, 4); ce(w, 3, 5);
    ce(w, 3, 4);
}

fn select_rounds(values: &[f64], a: &mut [f64], b: &mut [f64], idx: usize) -> (f64, f64) {
    let n = values.len();
    let mut neighbor = f64::INFINITY;
    // Current round reads `src[lo..hi]`; 0 = caller's slice (first round
    // only), 1 = scratch a, 2 = scratch b.
    let (mut lo, mut hi) = (0usize, n);
    let mut src_tag = 0u8;
    let mut slow_rounds = 0u32;
    let mut rand_state = (n as u64) ^ 0x9e37_79b9_7f4a_7c15;
    loop {
        let len = hi - lo;
        let (src, dst): (&[f64], &mut [f64]) = match src_tag {
            0 => (values, a),
            1 => (a, b),
            _ => (b, a),
        };
        let src = &src[lo..hi];

        if len <= 8 {
            let mut w = [f64::INFINITY; 8];
            w[..len].copy_from_slice(src);
            sort8(&mut w);
            let r = w[idx - lo];
            let nb = if idx + 1 < hi { w[idx + 1 - lo] } else { neighbor };
            return (r, nb);
        }

        let pivot = if slow_rounds >= 2 {
            rand_state = rand_state.wrapping_mul(0xd129_0d3c_bf7e_02a9).rotate_left(23);
            src[(rand_state % len as u64) as usize]
        } else if len >= 64 {
            // Rank-targeted pivot: order nine strided samples and take the
            // one just short of the target rank fraction, so each round
            // discards a large block on the far side of the target.
            let mut s = [0.0f64; 9];
            for (i, slot) in s.iter_mut().enumerate() {
                *slot = src[(len - 1) * i / 8];
            }
            for i in 1..9 {
                let x = s[i];
                let mut j = i;
                while j > 0 && x < s[j - 1] {
                    s[j] = s[j - 1];
                    j -= 1;
                }
                s[j] = x;
            }
            let t = (idx - lo) as f64 / len as f64;
            let pick = if t >= 0.5 {
                ((t * 9.0) as usize).saturating_sub(1)
            } else {
                ((t * 9.0) as usize + 1).min(8)
            };
            s[pick]
        } else {
            median_of_three(src[0], src[len / 2], src[len - 1])
        };

        // Branchless two-cursor partition into dst[lo..hi]: elements < pivot
        // grow from the left, the rest fill from the right (reversed). Each
        // element is stored at both candidate cursors; only the surviving
        // position keeps it, and the comparison feeds nothing but the
        // cursor advance.
        let dst_win = &mut dst[lo..hi];
        let mut wl = 0usize;
        let mut wh = len;
        for &x in src {
            // Invariant: processed + (gap wh - wl) == len, so at entry
            // wl <= wh - 1 and both stores land inside the window.
            unsafe {
                *dst_win.get_unchecked_mut(wl) = x;
                wh -= 1;
                *dst_win.get_unchecked_mut(wh) = x;
            }
            let less = (x < pivot) as usize;
            wl += less;
            wh += less;
        }
        let lt = wl;

        if idx < lo + lt {
            // Everything at and right of the pivot band ranks above idx.
            let mut m = f64::INFINITY;
            for &x in &dst_win[lt..] {
                m = m.min(x);
            }
            neighbor = neighbor.min(m);
            hi = lo + lt;
        } else if lt > 0 {
            // Continue in the >= pivot side; ties stay mixed in, which is
            // fine because the side is selected as its own subproblem.
            lo += lt;
        } else {
            // No progress: the pivot is the minimum of the range. Separate
            // its ties explicitly (rank order: equals first, then greater).
            let w = &mut dst_win[lt..];
            let mut eq = 0usize;
            for i in 0..w.len() {
                let x = w[i];
                let y = w[eq];
                let is_eq = x <= pivot; // the region holds only >= pivot
                w[i] = if is_eq { y } else { x };
                w[eq] = if is_eq { x } else { y };
                eq += is_eq as usize;
            }
            if idx < lo + eq {
                let nb = if idx + 1 < lo + eq {
                    pivot
                } else {
                    let mut m = neighbor;
                    for &x in &w[eq..] {
                        m = m.min(x);
                    }
                    m
                };
                return (pivot, nb);
            }
            lo += eq;
        }
        if (hi - lo) * 8 > len * 7 {
            slow_rounds += 1;
        }
        src_tag = if src_tag == 1 { 2 } else { 1 };
    }
}

fn median_of_three(x: f64, y: f64, z: f64) -> f64 {
    if (x <= y) == (y <= z) {
        y
    } else if (y <= x) == (x <= z) {
        x
    } else {
        z
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use proptest::prelude::*;
    use rand_chacha::rand_core::RngCore;

    fn buf(values: &[f64]) -> SampleBuffer {
        SampleBuffer::from_samples(values.iter().copied()).unwrap()
    }

    #[test]
    fn trivial_selections() {
        assert_eq!(quickselect(&mut buf(&[3.0, 1.0, 2.0]), 2).unwrap(), 2.0);
        assert_eq!(quickselect(&mut buf(&[5.0]), 1).unwrap(), 5.0);
    }

    #[test]
    fn rank_errors() {
        assert!(quickselect(&mut buf(&[1.0, 2.0]), 0).is_err());
        assert!(quickselect(&mut buf(&[1.0, 2.0]), 3).is_err());
        assert!(SampleBuffer::from_samples(std::iter::empty()).is_err());
        assert!(SampleBuffer::from_samples([1.0, f64::NAN]).is_err());
    }

    #[test]
    fn quantile_rank_rule() {
        assert_eq!(empirical_q_quantile(&mut buf(&[0.5, 1.0, 2.0]), 0.5).unwrap(), 1.0);
        assert_eq!(empirical_q_quantile(&mut buf(&[1.0, 2.0, 3.0, 4.0]), 0.5).unwrap(), 2.0);
        assert!(empirical_q_quantile(&mut buf(&[1.0]), 0.0).is_err());
        assert!(empirical_q_quantile(&mut buf(&[1.0]), 1.0).is_err());
    }

    #[test]
    fn uniform_quantile_statistics() {
        // Population quantile oracle for Uniform(0,1): q-quantile = q.
        let mut rng = RngStream::new(9, 0).rng();
        let mut b = SampleBuffer::from_samples(
            (0..10_000).map(|_| crate::rng::u01_open(&mut rng)),
        )
        .unwrap();
        let v = empirical_q_quantile(&mut b, 0.203).unwrap();
        assert!((v - 0.203).abs() < 0.02, "got {v}");
    }

    #[test]
    fn matches_sort_oracle_on_random_buffers() {
        let mut rng = RngStream::new(77, 0).rng();
        for round in 0..1000 {
            let k = 1 + (rng.next_u64() % 1000) as usize;
            let vals: Vec<f64> = (0..k)
                .map(|_| {
                    // Mix of continuous values and heavy ties.
                    if rng.next_u64() % 4 == 0 {
                        (rng.next_u64() % 8) as f64
                    } else {
                        crate::rng::u01_open(&mut rng) * 100.0
                    }
                })
                .collect();
            let mut sorted = vals.clone();
            sorted.sort_unstable_by(f64::total_cmp);
            let rank = 1 + (rng.next_u64() as usize % k);
            let mut b = buf(&vals);
            assert_eq!(
                quickselect(&mut b, rank).unwrap(),
                sorted[rank - 1],
                "round {round}, k {k}, rank {rank}"
            );
            // Buffer contents (multiset) are preserved.
            let mut after = b.into_inner();
            after.sort_unstable_by(f64::total_cmp);
            assert_eq!(after, sorted);
            // Neighbor rank from the same pass.
            let (v, nb) = select_with_neighbor(&vals, rank - 1);
            assert_eq!(v, sorted[rank - 1]);
            let expect_nb = if rank < k { sorted[rank] } else { f64::INFINITY };
            assert_eq!(nb, expect_nb, "neighbor at round {round}");
        }
    }

    #[test]
    fn adversarial_patterns_stay_correct() {
        for k in [100usize, 1001] {
            let asc: Vec<f64> = (0..k).map(|i| i as f64).collect();
            let desc: Vec<f64> = (0..k).map(|i| (k - i) as f64).collect();
            let organ: Vec<f64> = (0..k).map(|i| (i.min(k - i)) as f64).collect();
            for vals in [asc, desc, organ] {
                let mut sorted = vals.clone();
                sorted.sort_unstable_by(f64::total_cmp);
                for rank in [1, k / 3 + 1, k] {
                    let mut b = buf(&vals);
                    assert_eq!(quickselect(&mut b, rank).unwrap(), sorted[rank - 1]);
                }
            }
        }
    }

    #[test]
    fn interpolated_quantile_median_and_clamps() {
        let mut v = [0.5, 1.0, 2.0];
        assert_eq!(interpolated_quantile(&mut v, 0.5), 1.0);
        let mut v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(interpolated_quantile(&mut v, 0.5), 2.5);
        let mut v = [3.0, 1.0];
        assert_eq!(interpolated_quantile(&mut v, 0.01), 1.0);
        assert_eq!(interpolated_quantile(&mut v, 0.99), 3.0);
    }

    proptest! {
        #[test]
        fn permutation_invariance(mut vals in proptest::collection::vec(0.0f64..1e6, 1..200), q in 0.01f64..0.99) {
            let mut b1 = buf(&vals);
            let v1 = empirical_q_quantile(&mut b1, q).unwrap();
            vals.reverse();
            let third = vals.len() / 3;
            vals.rotate_left(third);
            let mut b2 = buf(&vals);
            prop_assert_eq!(v1, empirical_q_quantile(&mut b2, q).unwrap());
        }

        #[test]
        fn quantile_monotonicity(vals in proptest::collection::vec(0.0f64..1e6, 1..150), q1 in 0.01f64..0.99, q2 in 0.01f64..0.99) {
            let (q1, q2) = if q1 <= q2 { (q1, q2) } else { (q2, q1) };
            let mut b1 = buf(&vals);
            let mut b2 = buf(&vals);
            let v1 = empirical_q_quantile(&mut b1, q1).unwrap();
            let v2 = empirical_q_quantile(&mut b2, q2).unwrap();
            prop_assert!(v1 <= v2);
        }

        #[test]
        fn interpolated_quantile_matches_sorted_reference(vals in proptest::collection::vec(0.0f64..1e6, 1..150), q in 0.01f64..0.99) {
            let mut sorted = vals.clone();
            sorted.sort_unstable_by(f64::total_cmp);
            let k = sorted.len();
            let h = q * k as f64 + 0.5;
            let expect = if h <= 1.0 {
                sorted[0]
            } else if h >= k as f64 {
                sorted[k - 1]
            } else {
                let r = h.floor() as usize;
                let frac = h - r as f64;
                (1.0 - frac) * sorted[r - 1] + frac * sorted[r]
            };
            let mut work = vals.clone();
            let got = interpolated_quantile(&mut work, q);
            prop_assert!((got - expect).abs() <= 1e-12 * expect.abs().max(1.0));
        }
    }
}
