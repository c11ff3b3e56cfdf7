//! Dense `W x + b` over several input columns at once.
//!
//! Each weight column is loaded once per block of up to four inputs, so
//! evaluating the `gamma + 1` prefix windows of a speculative round costs
//! little more than a single window.

/// `out[c] = W * xs[c] + b` for column-major `W` of shape `d x n`.
///
/// Uses fused multiply-add when the CPU supports it, so results may differ
/// in the last bits between machines but never between runs on one machine.
pub(crate) fn affine_batch(w: &[f64], d: usize, b: &[f64], xs: &[&[f64]]) -> Vec<Vec<f64>> {
    #[cfg(target_arch = "x86_64")]
    {
        if std::is_x86_feature_detected!("avx2") && std::is_x86_feature_detected!("fma") {
            // SAFETY: the required CPU features were detected at runtime.
            return unsafe { affine_batch_fma(w, d, b, xs) };
        }
    }
    affine_batch_with::<Plain>(w, d, b, xs)
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2,fma")]
unsafe fn affine_batch_fma(w: &[f64], d: usize, b: &[f64], xs: &[&[f64]]) -> Vec<Vec<f64>> {
    if !d.is_multiple_of(8) {
        return affine_batch_with::<Fused>(w, d, b, xs);
    }
    let n = w.len() / d;
    let mut out: Vec<Vec<f64>> = xs.iter().map(|_| b.to_vec()).collect();
    for (group, outs) in xs.chunks(4).zip(out.chunks_mut(4)) {
        for r0 in (0..d).step_by(8) {
            match group.len() {
                4 => simd::block8::<4>(w, d, n, r0, group, outs),
                3 => simd::block8::<3>(w, d, n, r0, group, outs),
                2 => simd::block8::<2>(w, d, n, r0, group, outs),
                _ => simd::block8::<1>(w, d, n, r0, group, outs),
            }
        }
    }
    out
}

#[cfg(target_arch = "x86_64")]
mod simd {
    use std::arch::x86_64::*;

    /// Rows `r0..r0+8` for `C` columns with two 4-lane accumulators per column.
    #[inline]
    #[target_feature(enable = "avx2,fma")]
    pub(super) unsafe fn block8<const C: usize>(w: &[f64], d: usize, n: usize, r0: usize, xs: &[&[f64]], outs: &mut [Vec<f64>]) {
        assert!(xs.len() >= C && outs.len() >= C && w.len() >= d * n && r0 + 8 <= d);
        for x in &xs[..C] {
            assert!(x.len() >= n);
        }
        let mut lo = [_mm256_setzero_pd(); C];
        let mut hi = [_mm256_setzero_pd(); C];
        let wp = w.as_ptr();
        for j in 0..n {
            // SAFETY: bounds asserted above
            let base = wp.add(j * d + r0);
            let a = _mm256_loadu_pd(base);
            let b = _mm256_loadu_pd(base.add(4));
            for c in 0..C {
                let v = _mm256_set1_pd(*xs[c].get_unchecked(j));
                lo[c] = _mm256_fmadd_pd(a, v, lo[c]);
                hi[c] = _mm256_fmadd_pd(b, v, hi[c]);
            }
        }
        for c in 0..C {
            let mut buf = [0.0f64; 8];
            _mm256_storeu_pd(buf.as_mut_ptr(), lo[c]);
            _mm256_storeu_pd(buf.as_mut_ptr().add(4), hi[c]);
            for (o, v) in outs[c][r0..r0 + 8].iter_mut().zip(buf) {
                *o += v;
            }
        }
    }
}

trait Madd {
    fn madd(acc: f64, a: f64, b: f64) -> f64;
}

struct Plain;
impl Madd for Plain {
    #[inline(always)]
    fn madd(acc: f64, a: f64, b: f64) -> f64 {
        acc + a * b
    }
}

#[cfg_attr(not(target_arch = "x86_64"), allow(dead_code))]
struct Fused;
impl Madd for Fused {
    #[inline(always)]
    fn madd(acc: f64, a: f64, b: f64) -> f64 {
        a.mul_add(b, acc)
    }
}

#[inline(always)]
fn affine_batch_with<M: Madd>(w: &[f64], d: usize, b: &[f64], xs: &[&[f64]]) -> Vec<Vec<f64>> {
    let n = w.len().checked_div(d).unwrap_or(0);
    debug_assert_eq!(w.len(), d * n);
    debug_assert!(xs.iter().all(|x| x.len() == n));
    let mut out: Vec<Vec<f64>> = xs.iter().map(|_| b.to_vec()).collect();
    for (group, outs) in xs.chunks(4).zip(out.chunks_mut(4)) {
        let mut r0 = 0;
        while r0 < d {
            let left = d - r0;
            r0 += match (left, group.len()) {
                (8.., 4) => block::<M, 8, 4>(w, d, n, r0, group, outs),
                (8.., 3) => block::<M, 8, 3>(w, d, n, r0, group, outs),
                (8.., 2) => block::<M, 8, 2>(w, d, n, r0, group, outs),
                (8.., _) => block::<M, 8, 1>(w, d, n, r0, group, outs),
                (4.., 4) => block::<M, 4, 4>(w, d, n, r0, group, outs),
                (4.., 3) => block::<M, 4, 3>(w, d, n, r0, group, outs),
                (4.., 2) => block::<M, 4, 2>(w, d, n, r0, group, outs),
                (4.., _) => block::<M, 4, 1>(w, d, n, r0, group, outs),
                (_, 4) => block::<M, 1, 4>(w, d, n, r0, group, outs),
                (_, 3) => block::<M, 1, 3>(w, d, n, r0, group, outs),
                (_, 2) => block::<M, 1, 2>(w, d, n, r0, group, outs),
                (_, _) => block::<M, 1, 1>(w, d, n, r0, group, outs),
            };
        }
    }
    out
}

/// Accumulates rows `r0..r0+R` for `C` input columns; returns `R`.
#[inline(always)]
fn block<M: Madd, const R: usize, const C: usize>(
    w: &[f64],
    d: usize,
    n: usize,
    r0: usize,
    xs: &[&[f64]],
    outs: &mut [Vec<f64>],
) -> usize {
    let mut acc = [[0.0f64; R]; C];
    let x: [&[f64]; C] = std::array::from_fn(|c| &xs[c][..n]);
    for j in 0..n {
        let col: &[f64; R] = w[j * d + r0..j * d + r0 + R].try_into().unwrap();
        for c in 0..C {
            let v = x[c][j];
            for r in 0..R {
                acc[c][r] = M::madd(acc[c][r], col[r], v);
            }
        }
    }
    for c in 0..C {
        for r in 0..R {
            outs[c][r0 + r] += acc[c][r];
        }
    }
    R
}
