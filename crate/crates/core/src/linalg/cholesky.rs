use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::gemm::{gemm, Triangle, View};
use super::DenseMatrix;

/// Block width of the blocked factorization and inversion.
const NB: usize = 256;

/// Lower-triangular Cholesky factor `L` with `L·Lᵀ = K`.
#[derive(Clone, Debug)]
pub struct SpdFactor<T> {
    lower: DenseMatrix<T>,
}

impl<T: Scalar> SpdFactor<T> {
    pub fn dim(&self) -> usize {
        self.lower.rows()
    }

    pub fn lower(&self) -> &DenseMatrix<T> {
        &self.lower
    }

    /// Solves `K·X = B` by forward and backward substitution.
    pub fn solve(&self, b: &DenseMatrix<T>) -> Result<DenseMatrix<T>> {
        let n = self.dim();
        if b.rows() != n {
            return Err(Error::dims(format!(
                "right-hand side has {} rows, factor is {n}x{n}",
                b.rows()
            )));
        }
        let r = b.cols();
        let l = &self.lower;
        let mut x = b.clone();
        let data = x.as_mut_slice();
        for i in 0..n {
            let (done, rest) = data.split_at_mut(i * r);
            let row = &mut rest[..r];
            let li = l.row(i);
            for (p, &lip) in li[..i].iter().enumerate() {
                if lip != T::zero() {
                    axpy(-lip, &done[p * r..(p + 1) * r], row);
                }
            }
            let inv = T::one() / li[i];
            row.iter_mut().for_each(|v| *v = *v * inv);
        }
        for i in (0..n).rev() {
            let (head, tail) = data.split_at_mut((i + 1) * r);
            let row = &mut head[i * r..];
            for p in i + 1..n {
                let lpi = l[(p, i)];
                if lpi != T::zero() {
                    axpy(-lpi, &tail[(p - i - 1) * r..(p - i) * r], row);
                }
            }
            let inv = T::one() / l[(i, i)];
            row.iter_mut().for_each(|v| *v = *v * inv);
        }
        x.ensure_finite("triangular solve")?;
        Ok(x)
    }

    /// `K⁻¹ = L⁻ᵀ·L⁻¹`, consuming the factor to cap peak memory at two n×n buffers.
    pub fn into_inverse(self) -> Result<DenseMatrix<T>> {
        let w = lower_triangular_inverse(&self.lower);
        drop(self);
        let inv = gram_of_lower(&w);
        inv.ensure_finite("inverse")?;
        Ok(inv)
    }

    pub fn inverse(&self) -> Result<DenseMatrix<T>> {
        self.clone().into_inverse()
    }
}

/// Cholesky factorization of a symmetric positive-definite matrix.
pub fn spd_factor<T: Scalar>(k: &DenseMatrix<T>) -> Result<SpdFactor<T>> {
    spd_factor_into(k.clone())
}

/// [`spd_factor`] reusing the storage of `k`.
pub fn spd_factor_into<T: Scalar>(k: DenseMatrix<T>) -> Result<SpdFactor<T>> {
    if !k.is_square() {
        return Err(Error::dims(format!(
            "factorization needs a square matrix, got {}x{}",
            k.rows(),
            k.cols()
        )));
    }
    let tolerance = T::lit(1e-9) * k.max_abs();
    let asymmetry = k.max_asymmetry();
    if asymmetry > tolerance {
        return Err(Error::NotSymmetric {
            asymmetry: asymmetry.to_f64_lossy(),
            tolerance: tolerance.to_f64_lossy(),
        });
    }
    let n = k.rows();
    let mut l = k;
    for i in 0..n {
        l.row_mut(i)[i + 1..].iter_mut().for_each(|v| *v = T::zero());
    }
    factor_in_place(&mut l, |pivot, value| Error::NotPositiveDefinite { pivot, value })?;
    Ok(SpdFactor { lower: l })
}

/// Right-looking blocked Cholesky on the lower triangle of `l`.
pub(crate) fn factor_in_place<T: Scalar>(
    l: &mut DenseMatrix<T>,
    fail: impl Fn(usize, f64) -> Error,
) -> Result<()> {
    let n = l.rows();
    let mut diag = Vec::with_capacity(NB * NB);
    let mut panel = Vec::new();
    for j0 in (0..n).step_by(NB) {
        let nb = NB.min(n - j0);
        let j1 = j0 + nb;

        // diagonal block, unblocked
        for c in 0..nb {
            let gc = j0 + c;
            let (above, rest) = l.as_mut_slice().split_at_mut(gc * n);
            let row = &mut rest[..n];
            for p in 0..c {
                let gp = j0 + p;
                let prow = &above[gp * n + j0..gp * n + j0 + p];
                let s = dot(&row[j0..j0 + p], prow);
                row[gp] = (row[gp] - s) / above[gp * n + gp];
            }
            let s = dot(&row[j0..gc], &row[j0..gc]);
            let pivot = row[gc] - s;
            if !(pivot > T::zero()) || !pivot.is_finite() {
                return Err(fail(gc, pivot.to_f64_lossy()));
            }
            row[gc] = pivot.sqrt();
        }
        if j1 == n {
            break;
        }

        diag.clear();
        for c in 0..nb {
            diag.extend_from_slice(&l.row(j0 + c)[j0..j1]);
        }
        // panel rows: L21 = A21 · L11⁻ᵀ
        for i in j1..n {
            let row = &mut l.row_mut(i)[j0..j1];
            for c in 0..nb {
                let dc = &diag[c * nb..c * nb + c];
                let s = dot(&row[..c], dc);
                row[c] = (row[c] - s) / diag[c * nb + c];
            }
        }

        // trailing update A22 -= L21 · L21ᵀ on the lower triangle
        let rows = n - j1;
        panel.clear();
        panel.reserve(rows * nb);
        for i in j1..n {
            panel.extend_from_slice(&l.row(i)[j0..j1]);
        }
        let pv = View::new(&panel, 0, rows, nb, nb, 1);
        gemm(
            -T::one(),
            pv,
            pv.t(),
            l.as_mut_slice(),
            j1 * n + j1,
            n,
            Triangle::Lower,
        );
    }
    Ok(())
}

/// Inverse of a lower-triangular matrix; the result is lower triangular.
fn lower_triangular_inverse<T: Scalar>(l: &DenseMatrix<T>) -> DenseMatrix<T> {
    let n = l.rows();
    let mut w = DenseMatrix::zeros(n, n);
    let lv = l.view();
    for i0 in (0..n).step_by(NB) {
        let nb = NB.min(n - i0);
        let (solved, block) = w.as_mut_slice().split_at_mut(i0 * n);
        let block = &mut block[..nb * n];
        // block ← -L[ib, 0..i0] · W[0..i0, 0..i0], skipping the zero upper part of W
        if i0 > 0 {
            let wv = View::new(solved, 0, i0, n, n, 1);
            for c0 in (0..i0).step_by(NB) {
                let c1 = (c0 + NB).min(i0);
                gemm(
                    -T::one(),
                    lv.sub(i0, c0, nb, i0 - c0),
                    wv.sub(c0, c0, i0 - c0, c1 - c0),
                    block,
                    c0,
                    n,
                    Triangle::Full,
                );
            }
        }
        for r in 0..nb {
            block[r * n + i0 + r] = T::one();
        }
        // forward substitution with the diagonal block, whole rows at a time
        for r in 0..nb {
            let (prev, cur) = block.split_at_mut(r * n);
            let row = &mut cur[..i0 + r + 1];
            let lrow = l.row(i0 + r);
            for q in 0..r {
                let lq = lrow[i0 + q];
                if lq != T::zero() {
                    axpy(-lq, &prev[q * n..q * n + i0 + r + 1], row);
                }
            }
            let inv = T::one() / lrow[i0 + r];
            row.iter_mut().for_each(|v| *v = *v * inv);
        }
    }
    w
}

/// `Wᵀ·W` for lower-triangular `W`, returned as a full symmetric matrix.
fn gram_of_lower<T: Scalar>(w: &DenseMatrix<T>) -> DenseMatrix<T> {
    let n = w.rows();
    let mut out = DenseMatrix::zeros(n, n);
    let wv = w.view();
    for i0 in (0..n).step_by(NB) {
        let ni = NB.min(n - i0);
        for j0 in (0..=i0).step_by(NB) {
            let nj = NB.min(n - j0);
            let tri = if j0 == i0 { Triangle::Lower } else { Triangle::Full };
            // only rows p ≥ i0 of W contribute to block (ib, jb)
            gemm(
                T::one(),
                wv.sub(i0, i0, n - i0, ni).t(),
                wv.sub(i0, j0, n - i0, nj),
                out.as_mut_slice(),
                i0 * n + j0,
                n,
                tri,
            );
        }
    }
    out.mirror_lower();
    out
}

#[inline]
pub(crate) fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [T::zero(); 4];
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (x, y) in (&mut ca).zip(&mut cb) {
        for t in 0..4 {
            acc[t] = acc[t] + x[t] * y[t];
        }
    }
    let mut s = (acc[0] + acc[2]) + (acc[1] + acc[3]);
    for (&x, &y) in ca.remainder().iter().zip(cb.remainder()) {
        s = s + x * y;
    }
    s
}

#[inline]
pub(crate) fn axpy<T: Scalar>(alpha: T, x: &[T], y: &mut [T]) {
    for (yv, &xv) in y.iter_mut().zip(x) {
        *yv = *yv + alpha * xv;
    }
}

impl<T: Scalar> SpdFactor<T> {
    /// Wraps an already computed lower factor.
    pub(crate) fn from_lower(lower: DenseMatrix<T>) -> Self {
        Self { lower }
    }
}
