//! Rank-B maintenance of an inverse covariance under row/column replacement.
//!
//! With `K = [[A, C], [Cᵀ, D]]` and `S = D − Cᵀ·A⁻¹·C` (the Schur complement):
//!
//! ```text
//! K⁻¹ = [[A⁻¹ + A⁻¹C·S⁻¹·CᵀA⁻¹,  −A⁻¹C·S⁻¹],
//!        [−S⁻¹·CᵀA⁻¹,             S⁻¹      ]]
//! ```
//!
//! and conversely, writing `K⁻¹ = [[M11, M12], [M12ᵀ, M22]]`, the inverse of the
//! retained block is `A⁻¹ = M11 − M12·M22⁻¹·M12ᵀ`. Both directions cost one
//! B×B inversion plus O(B·n²) multiply-adds. Arbitrary index positions are
//! handled through index lists; no permutation matrix is ever formed.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::cholesky::{factor_in_place, SpdFactor};
use super::gemm::{gemm, Triangle};
use super::DenseMatrix;

/// Condition number above which the removed sub-block is treated as singular.
pub const SUB_BLOCK_CONDITION_LIMIT: f64 = 1e12;

/// Inverse of `[[A, C], [Cᵀ, D]]` from `A⁻¹`, the cross block `C` and the new block `D`.
pub fn block_inverse_assemble<T: Scalar>(
    a_inv: &DenseMatrix<T>,
    c: &DenseMatrix<T>,
    d: &DenseMatrix<T>,
) -> Result<DenseMatrix<T>> {
    let m = a_inv.rows();
    let b = d.rows();
    let old_pos: Vec<usize> = (0..m).collect();
    let new_pos: Vec<usize> = (m..m + b).collect();
    assemble_with_layout(a_inv.clone(), c, d, &old_pos, &new_pos)
}

/// As [`block_inverse_assemble`], scattering retained row `i` to `old_pos[i]` and
/// new row `b` to `new_pos[b]` of the output.
pub(crate) fn assemble_with_layout<T: Scalar>(
    mut a_inv: DenseMatrix<T>,
    c: &DenseMatrix<T>,
    d: &DenseMatrix<T>,
    old_pos: &[usize],
    new_pos: &[usize],
) -> Result<DenseMatrix<T>> {
    let m = a_inv.rows();
    let b = d.rows();
    if !a_inv.is_square() || !d.is_square() || c.rows() != m || c.cols() != b {
        return Err(Error::dims(format!(
            "block shapes A⁻¹ {:?}, C {:?}, D {:?} do not conform",
            a_inv.shape(),
            c.shape(),
            d.shape()
        )));
    }
    debug_assert_eq!(old_pos.len(), m);
    debug_assert_eq!(new_pos.len(), b);
    let n = m + b;

    // G = A⁻¹·C
    let g = a_inv.matmul(c)?;
    // S = D − Cᵀ·G
    let mut s = d.clone();
    gemm(
        -T::one(),
        c.view().t(),
        g.view(),
        s.as_mut_slice(),
        0,
        b,
        Triangle::Full,
    );
    s.symmetrize();
    let mut ls = s;
    for i in 0..b {
        ls.row_mut(i)[i + 1..].iter_mut().for_each(|v| *v = T::zero());
    }
    factor_in_place(&mut ls, |pivot, _| Error::SchurNotPositiveDefinite { pivot })?;
    let k22 = spd_inverse_small(ls)?;
    // K12 = −G·K22
    let mut k12 = DenseMatrix::zeros(m, b);
    gemm(
        -T::one(),
        g.view(),
        k22.view(),
        k12.as_mut_slice(),
        0,
        b,
        Triangle::Full,
    );
    // K11 = A⁻¹ + G·K22·Gᵀ = A⁻¹ − K12·Gᵀ, in place
    gemm(
        -T::one(),
        k12.view(),
        g.view().t(),
        a_inv.as_mut_slice(),
        0,
        m,
        Triangle::Full,
    );

    let mut out = DenseMatrix::zeros(n, n);
    {
        let o = out.as_mut_slice();
        for (i, &pi) in old_pos.iter().enumerate() {
            let dst = &mut o[pi * n..(pi + 1) * n];
            for (&pj, &v) in old_pos.iter().zip(a_inv.row(i)) {
                dst[pj] = v;
            }
            for (&pb, &v) in new_pos.iter().zip(k12.row(i)) {
                dst[pb] = v;
            }
        }
        for (bi, &pb) in new_pos.iter().enumerate() {
            let dst = &mut o[pb * n..(pb + 1) * n];
            for (&pi, krow) in old_pos.iter().zip(k12.row_iter()) {
                dst[pi] = krow[bi];
            }
            for (&pb2, &v) in new_pos.iter().zip(k22.row(bi)) {
                dst[pb2] = v;
            }
        }
    }
    out.ensure_finite("assembled inverse")?;
    Ok(out)
}

/// Inverse of `K` with the rows/columns in `removed` deleted, given `K⁻¹`.
///
/// The retained indices keep their relative order.
pub fn downdate_inverse<T: Scalar>(
    k_prev_inv: &DenseMatrix<T>,
    removed: &[usize],
) -> Result<DenseMatrix<T>> {
    let n = k_prev_inv.rows();
    if !k_prev_inv.is_square() {
        return Err(Error::dims(format!(
            "downdate needs a square inverse, got {:?}",
            k_prev_inv.shape()
        )));
    }
    let mut is_removed = vec![false; n];
    for &r in removed {
        if r >= n {
            return Err(Error::dims(format!("removed index {r} out of range for {n}")));
        }
        if std::mem::replace(&mut is_removed[r], true) {
            return Err(Error::invalid("removed", format!("index {r} listed twice")));
        }
    }
    let keep: Vec<usize> = (0..n).filter(|&i| !is_removed[i]).collect();
    downdate_gathered(k_prev_inv, &keep, removed)
}

/// Core of [`downdate_inverse`]: output row `i` corresponds to input index `keep[i]`.
pub(crate) fn downdate_gathered<T: Scalar>(
    m_inv: &DenseMatrix<T>,
    keep: &[usize],
    removed: &[usize],
) -> Result<DenseMatrix<T>> {
    let mut a_inv = m_inv.select(keep, keep);
    if removed.is_empty() {
        return Ok(a_inv);
    }
    let m = keep.len();
    let m22 = m_inv.select(removed, removed);
    let m12 = m_inv.select(keep, removed);

    let m22_inv = sub_block_inverse(m22)?;
    // Q = M12·M22⁻¹, then A⁻¹ = M11 − Q·M12ᵀ
    let q = m12.matmul(&m22_inv)?;
    gemm(
        -T::one(),
        q.view(),
        m12.view().t(),
        a_inv.as_mut_slice(),
        0,
        m,
        Triangle::Full,
    );
    a_inv.ensure_finite("downdated inverse")?;
    Ok(a_inv)
}

/// Replacement of the rows/columns at `pos` of a cached inverse, applied in place.
///
/// All fallible work happens in [`plan_replacement`]; [`Replacement::apply`]
/// only performs one rank-2B product and the B row/column writes.
pub(crate) struct Replacement<T> {
    pos: Vec<usize>,
    u: DenseMatrix<T>,
    v: DenseMatrix<T>,
    k12: DenseMatrix<T>,
    k22: DenseMatrix<T>,
}

/// Plans overwriting positions `pos` of `K` (whose inverse is `m_inv`) with new
/// rows having cross block `c` (n×B, rows at `pos` ignored) and block `d`.
///
/// Equivalent to a downdate of `pos` followed by an assemble that puts the new
/// rows back at the same positions, without materializing the retained block.
pub(crate) fn plan_replacement<T: Scalar>(
    m_inv: &DenseMatrix<T>,
    pos: &[usize],
    c: &DenseMatrix<T>,
    d: &DenseMatrix<T>,
) -> Result<Replacement<T>> {
    let n = m_inv.rows();
    let b = pos.len();
    if !m_inv.is_square() || c.rows() != n || c.cols() != b || d.shape() != (b, b) {
        return Err(Error::dims(format!(
            "replacement shapes K⁻¹ {:?}, C {:?}, D {:?} do not conform",
            m_inv.shape(),
            c.shape(),
            d.shape()
        )));
    }
    let mut is_pos = vec![false; n];
    for &p in pos {
        if p >= n || std::mem::replace(&mut is_pos[p], true) {
            return Err(Error::invalid("pos", format!("bad replacement position {p}")));
        }
    }
    let zero_pos_rows = |m: &mut DenseMatrix<T>| {
        for &p in pos {
            m.row_mut(p).iter_mut().for_each(|v| *v = T::zero());
        }
    };
    let all: Vec<usize> = (0..n).collect();
    let m22_inv = sub_block_inverse(m_inv.select(pos, pos))?;
    // P = M12 padded with zero rows at `pos`
    let mut p = m_inv.select(&all, pos);
    zero_pos_rows(&mut p);
    let q = p.matmul(&m22_inv)?;
    let mut cz = c.clone();
    zero_pos_rows(&mut cz);

    // G = A⁻¹·C = M11·C − Q·(M12ᵀ·C)
    let mut g = m_inv.matmul(&cz)?;
    zero_pos_rows(&mut g);
    let mut r = DenseMatrix::zeros(b, b);
    gemm(T::one(), p.view().t(), cz.view(), r.as_mut_slice(), 0, b, Triangle::Full);
    gemm(-T::one(), q.view(), r.view(), g.as_mut_slice(), 0, b, Triangle::Full);

    let mut s = d.clone();
    gemm(-T::one(), cz.view().t(), g.view(), s.as_mut_slice(), 0, b, Triangle::Full);
    s.symmetrize();
    for i in 0..b {
        s.row_mut(i)[i + 1..].iter_mut().for_each(|v| *v = T::zero());
    }
    factor_in_place(&mut s, |pivot, _| Error::SchurNotPositiveDefinite { pivot })?;
    let k22 = spd_inverse_small(s)?;
    let mut k12 = DenseMatrix::zeros(n, b);
    gemm(-T::one(), g.view(), k22.view(), k12.as_mut_slice(), 0, b, Triangle::Full);

    // K11 = M11 − Q·M12ᵀ − K12·Gᵀ = M11 − [Q K12]·[P G]ᵀ
    let u = DenseMatrix::from_fn(n, 2 * b, |i, j| if j < b { q[(i, j)] } else { k12[(i, j - b)] });
    let v = DenseMatrix::from_fn(n, 2 * b, |i, j| if j < b { p[(i, j)] } else { g[(i, j - b)] });
    if !u.all_finite() || !v.all_finite() || !k22.all_finite() {
        return Err(Error::NonFinite("replacement blocks"));
    }
    Ok(Replacement {
        pos: pos.to_vec(),
        u,
        v,
        k12,
        k22,
    })
}

impl<T: Scalar> Replacement<T> {
    pub(crate) fn apply(self, m: &mut DenseMatrix<T>) {
        let n = m.rows();
        gemm(-T::one(), self.u.view(), self.v.view().t(), m.as_mut_slice(), 0, n, Triangle::Full);
        let data = m.as_mut_slice();
        for (bi, &pb) in self.pos.iter().enumerate() {
            for i in 0..n {
                let v = self.k12[(i, bi)];
                data[i * n + pb] = v;
                data[pb * n + i] = v;
            }
        }
        for (bi, &pb) in self.pos.iter().enumerate() {
            for (bj, &pc) in self.pos.iter().enumerate() {
                data[pb * n + pc] = self.k22[(bi, bj)];
            }
        }
    }
}

fn sub_block_inverse<T: Scalar>(m22: DenseMatrix<T>) -> Result<DenseMatrix<T>> {
    let b = m22.rows();
    let norm1 = one_norm(&m22);
    let mut l = m22;
    l.symmetrize();
    for i in 0..b {
        l.row_mut(i)[i + 1..].iter_mut().for_each(|v| *v = T::zero());
    }
    factor_in_place(&mut l, |_, _| Error::SingularSubBlock {
        condition: f64::INFINITY,
    })?;
    let m22_inv = spd_inverse_small(l).map_err(|_| Error::SingularSubBlock {
        condition: f64::INFINITY,
    })?;
    let condition = (norm1 * one_norm(&m22_inv)).to_f64_lossy();
    if !(condition <= SUB_BLOCK_CONDITION_LIMIT) {
        return Err(Error::SingularSubBlock { condition });
    }
    Ok(m22_inv)
}

fn spd_inverse_small<T: Scalar>(lower: DenseMatrix<T>) -> Result<DenseMatrix<T>> {
    SpdFactor::from_lower(lower).into_inverse()
}

fn one_norm<T: Scalar>(m: &DenseMatrix<T>) -> T {
    (0..m.cols())
        .map(|j| (0..m.rows()).map(|i| m[(i, j)].abs()).sum::<T>())
        .fold(T::zero(), T::max)
}
