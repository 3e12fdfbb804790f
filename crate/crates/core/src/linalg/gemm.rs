//! Packed, cache-blocked matrix multiply used by every O(n³) and O(B·n²) kernel.
//!
//! Panels of `A` and `B` are copied into contiguous micro-panels so the inner
//! kernel streams both operands linearly. Row bands of the output are
//! independent and run on the current rayon pool when the product is large.

use rayon::prelude::*;

use crate::scalar::Scalar;

const MR: usize = 4;
const NR: usize = 4;
const KC: usize = 256;
const MC: usize = 64;
const NC: usize = 2048;

/// Products below this many multiply-adds skip packing.
const SMALL_WORK: usize = 32 * 32 * 32;
/// Products below this many multiply-adds stay on the calling thread.
const PARALLEL_WORK: usize = 1 << 21;

/// Strided read-only view into a row-major buffer.
#[derive(Clone, Copy)]
pub(crate) struct View<'a, T> {
    data: &'a [T],
    off: usize,
    pub rows: usize,
    pub cols: usize,
    rs: usize,
    cs: usize,
}

impl<'a, T: Copy> View<'a, T> {
    pub fn new(data: &'a [T], off: usize, rows: usize, cols: usize, rs: usize, cs: usize) -> Self {
        Self {
            data,
            off,
            rows,
            cols,
            rs,
            cs,
        }
    }

    /// Transposed view; no data moves.
    pub fn t(self) -> Self {
        Self {
            rows: self.cols,
            cols: self.rows,
            rs: self.cs,
            cs: self.rs,
            ..self
        }
    }

    pub fn sub(self, i0: usize, j0: usize, rows: usize, cols: usize) -> Self {
        debug_assert!(i0 + rows <= self.rows && j0 + cols <= self.cols);
        Self {
            off: self.off + i0 * self.rs + j0 * self.cs,
            rows,
            cols,
            ..self
        }
    }

    #[inline(always)]
    fn at(&self, i: usize, j: usize) -> T {
        self.data[self.off + i * self.rs + j * self.cs]
    }
}

/// Which part of the output block is written.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub(crate) enum Triangle {
    Full,
    /// Only entries with local column ≤ local row.
    Lower,
}

/// `C += alpha · A · B` where `C` starts at `c[c_off]` with row stride `ldc`.
pub(crate) fn gemm<T: Scalar>(
    alpha: T,
    a: View<'_, T>,
    b: View<'_, T>,
    c: &mut [T],
    c_off: usize,
    ldc: usize,
    tri: Triangle,
) {
    assert_eq!(a.cols, b.rows, "inner dimensions differ");
    let (m, n, k) = (a.rows, b.cols, a.cols);
    if m == 0 || n == 0 || k == 0 {
        return;
    }
    assert!(
        c.len() >= c_off + (m - 1) * ldc + n,
        "output buffer too small"
    );
    let c = &mut c[c_off..];

    if m * n * k <= SMALL_WORK {
        gemm_small(alpha, a, b, c, ldc, tri);
        return;
    }

    let parallel = m * n * k >= PARALLEL_WORK && rayon::current_num_threads() > 1;
    let mut bpack = vec![T::zero(); KC * NC.min(round_up(n, NR))];
    let mut apack = vec![T::zero(); KC * MC];

    for jc in (0..n).step_by(NC) {
        let nc = NC.min(n - jc);
        for pc in (0..k).step_by(KC) {
            let kc = KC.min(k - pc);
            pack_b(b, pc, kc, jc, nc, &mut bpack);
            let bp = &bpack[..];
            let band = |(bi, cband): (usize, &mut [T]), apack: &mut Vec<T>| {
                let ic = bi * MC;
                if ic >= m {
                    return;
                }
                let mc = MC.min(m - ic);
                if tri == Triangle::Lower && jc > ic + mc - 1 {
                    return;
                }
                pack_a(a, ic, mc, pc, kc, apack);
                band_kernel(alpha, apack, bp, cband, ldc, ic, mc, jc, nc, kc, m, n, tri);
            };
            let bands = (m + MC - 1) / MC;
            if parallel {
                c.par_chunks_mut(MC * ldc)
                    .take(bands)
                    .enumerate()
                    .for_each_init(|| vec![T::zero(); KC * MC], |buf, item| band(item, buf));
            } else {
                for item in c.chunks_mut(MC * ldc).take(bands).enumerate() {
                    band(item, &mut apack);
                }
            }
        }
    }
}

#[inline]
fn round_up(x: usize, to: usize) -> usize {
    (x + to - 1) / to * to
}

fn gemm_small<T: Scalar>(alpha: T, a: View<'_, T>, b: View<'_, T>, c: &mut [T], ldc: usize, tri: Triangle) {
    let (m, n, k) = (a.rows, b.cols, a.cols);
    for i in 0..m {
        let jmax = match tri {
            Triangle::Full => n,
            Triangle::Lower => (i + 1).min(n),
        };
        let crow = &mut c[i * ldc..i * ldc + jmax];
        for p in 0..k {
            let aip = alpha * a.at(i, p);
            if aip == T::zero() {
                continue;
            }
            for (j, cij) in crow.iter_mut().enumerate() {
                *cij = *cij + aip * b.at(p, j);
            }
        }
    }
}

fn pack_a<T: Scalar>(a: View<'_, T>, ic: usize, mc: usize, pc: usize, kc: usize, out: &mut [T]) {
    for (panel, ir) in (0..mc).step_by(MR).enumerate() {
        let dst = &mut out[panel * kc * MR..(panel + 1) * kc * MR];
        let live = MR.min(mc - ir);
        for p in 0..kc {
            let d = &mut dst[p * MR..p * MR + MR];
            for (r, slot) in d.iter_mut().enumerate() {
                *slot = if r < live {
                    a.at(ic + ir + r, pc + p)
                } else {
                    T::zero()
                };
            }
        }
    }
}

fn pack_b<T: Scalar>(b: View<'_, T>, pc: usize, kc: usize, jc: usize, nc: usize, out: &mut [T]) {
    for (panel, jr) in (0..nc).step_by(NR).enumerate() {
        let dst = &mut out[panel * kc * NR..(panel + 1) * kc * NR];
        let live = NR.min(nc - jr);
        for p in 0..kc {
            let d = &mut dst[p * NR..p * NR + NR];
            for (s, slot) in d.iter_mut().enumerate() {
                *slot = if s < live {
                    b.at(pc + p, jc + jr + s)
                } else {
                    T::zero()
                };
            }
        }
    }
}

#[inline(always)]
fn micro_kernel<T: Scalar>(kc: usize, a: &[T], b: &[T]) -> [[T; NR]; MR] {
    let mut acc = [[T::zero(); NR]; MR];
    for (ap, bp) in a[..kc * MR]
        .chunks_exact(MR)
        .zip(b[..kc * NR].chunks_exact(NR))
    {
        for r in 0..MR {
            let ar = ap[r];
            for s in 0..NR {
                acc[r][s] = acc[r][s] + ar * bp[s];
            }
        }
    }
    acc
}

#[allow(clippy::too_many_arguments)]
fn band_kernel<T: Scalar>(
    alpha: T,
    apack: &[T],
    bpack: &[T],
    cband: &mut [T],
    ldc: usize,
    ic: usize,
    mc: usize,
    jc: usize,
    nc: usize,
    kc: usize,
    m: usize,
    n: usize,
    tri: Triangle,
) {
    for (bpanel, jr) in (0..nc).step_by(NR).enumerate() {
        let bp = &bpack[bpanel * kc * NR..(bpanel + 1) * kc * NR];
        let j0 = jc + jr;
        for (apanel, ir) in (0..mc).step_by(MR).enumerate() {
            let i0 = ic + ir;
            if tri == Triangle::Lower && j0 > i0 + MR - 1 {
                continue;
            }
            let ap = &apack[apanel * kc * MR..(apanel + 1) * kc * MR];
            let acc = micro_kernel(kc, ap, bp);
            let full_tile = i0 + MR <= m
                && j0 + NR <= n
                && (tri == Triangle::Full || j0 + NR - 1 <= i0);
            if full_tile {
                for (r, acc_r) in acc.iter().enumerate() {
                    let row = &mut cband[(ir + r) * ldc + j0..(ir + r) * ldc + j0 + NR];
                    for (cv, &av) in row.iter_mut().zip(acc_r) {
                        *cv = *cv + alpha * av;
                    }
                }
            } else {
                for (r, acc_r) in acc.iter().enumerate() {
                    let i = i0 + r;
                    if i >= m {
                        break;
                    }
                    for (s, &av) in acc_r.iter().enumerate() {
                        let j = j0 + s;
                        if j >= n || (tri == Triangle::Lower && j > i) {
                            continue;
                        }
                        let cv = &mut cband[(ir + r) * ldc + j];
                        *cv = *cv + alpha * av;
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
        let mut c = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                c[i * n + j] = (0..k).map(|p| a[i * k + p] * b[p * n + j]).sum();
            }
        }
        c
    }

    fn fill(len: usize, seed: u64) -> Vec<f64> {
        let mut s = seed;
        (0..len)
            .map(|_| {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
            })
            .collect()
    }

    #[test]
    fn packed_path_matches_naive_on_ragged_shapes() {
        for &(m, k, n) in &[(67, 301, 45), (5, 513, 130), (130, 7, 66), (64, 256, 64)] {
            let a = fill(m * k, 1);
            let b = fill(k * n, 2);
            let mut c = vec![0.0; m * n];
            gemm(
                1.0,
                View::new(&a, 0, m, k, k, 1),
                View::new(&b, 0, k, n, n, 1),
                &mut c,
                0,
                n,
                Triangle::Full,
            );
            let want = naive(&a, &b, m, k, n);
            for (x, y) in c.iter().zip(&want) {
                assert!((x - y).abs() < 1e-12, "{m}x{k}x{n}: {x} vs {y}");
            }
        }
    }

    #[test]
    fn lower_mode_leaves_upper_triangle_untouched() {
        let (n, k) = (70, 300);
        let a = fill(n * k, 3);
        let mut c = vec![7.0; n * n];
        let av = View::new(&a, 0, n, k, k, 1);
        gemm(-1.0, av, av.t(), &mut c, 0, n, Triangle::Lower);
        for i in 0..n {
            for j in 0..n {
                let dot: f64 = (0..k).map(|p| a[i * k + p] * a[j * k + p]).sum();
                let want = if j <= i { 7.0 - dot } else { 7.0 };
                assert!((c[i * n + j] - want).abs() < 1e-11);
            }
        }
    }

    #[test]
    fn strided_output_block() {
        // write a 3x2 product into the middle of a 5x6 buffer
        let a = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let b = [1.0, 0.0, 0.0, 1.0];
        let mut c = vec![0.0; 30];
        gemm(
            1.0,
            View::new(&a, 0, 3, 2, 2, 1),
            View::new(&b, 0, 2, 2, 2, 1),
            &mut c,
            6 + 2,
            6,
            Triangle::Full,
        );
        assert_eq!(c[8], 1.0);
        assert_eq!(c[9], 2.0);
        assert_eq!(c[14], 3.0);
        assert_eq!(c[21], 6.0);
        assert_eq!(c.iter().filter(|&&x| x != 0.0).count(), 6);
    }
}
