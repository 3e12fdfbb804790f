//! RBF kernel and kernel-matrix construction.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::scalar::Scalar;

/// Hyper-parameters of `k(x, y) = η·exp(−‖x − y‖² / 2l²)` with optional clipping.
///
/// With a clip threshold set, kernel values strictly below it are replaced by
/// zero, which turns the kernel matrix into the weight matrix of an epsilon graph.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelParams<T> {
    eta: T,
    length_scale: T,
    clip_threshold: Option<T>,
}

impl<T: Scalar> KernelParams<T> {
    pub fn new(eta: T, length_scale: T, clip_threshold: Option<T>) -> Result<Self> {
        if !(eta > T::zero()) || !eta.is_finite() {
            return Err(Error::invalid("kernel.eta", format!("must be positive, got {eta}")));
        }
        if !(length_scale > T::zero()) || !length_scale.is_finite() {
            return Err(Error::invalid(
                "kernel.length_scale",
                format!("must be positive, got {length_scale}"),
            ));
        }
        if let Some(c) = clip_threshold {
            if !(c >= T::zero() && c < eta) {
                return Err(Error::invalid(
                    "kernel.clip",
                    format!("must lie in [0, eta={eta}), got {c}"),
                ));
            }
        }
        Ok(Self {
            eta,
            length_scale,
            clip_threshold,
        })
    }

    pub fn eta(&self) -> T {
        self.eta
    }

    pub fn length_scale(&self) -> T {
        self.length_scale
    }

    pub fn clip_threshold(&self) -> Option<T> {
        self.clip_threshold
    }

    #[inline]
    pub(crate) fn eval(&self, x: &[T], y: &[T]) -> T {
        let mut acc = [T::zero(); 4];
        let mut cx = x.chunks_exact(4);
        let mut cy = y.chunks_exact(4);
        for (a, b) in (&mut cx).zip(&mut cy) {
            for t in 0..4 {
                let d = a[t] - b[t];
                acc[t] = acc[t] + d * d;
            }
        }
        let mut sq = (acc[0] + acc[2]) + (acc[1] + acc[3]);
        for (&a, &b) in cx.remainder().iter().zip(cy.remainder()) {
            let d = a - b;
            sq = sq + d * d;
        }
        let two = T::lit(2.0);
        let v = self.eta * (-sq / (two * self.length_scale * self.length_scale)).exp();
        match self.clip_threshold {
            Some(c) if v < c => T::zero(),
            _ => v,
        }
    }
}

impl<T: Scalar> Default for KernelParams<T> {
    fn default() -> Self {
        Self {
            eta: T::one(),
            length_scale: T::one(),
            clip_threshold: None,
        }
    }
}

/// Kernel value between two feature vectors.
pub fn rbf<T: Scalar>(x: &[T], y: &[T], p: &KernelParams<T>) -> Result<T> {
    if x.len() != y.len() {
        return Err(Error::dims(format!(
            "feature vectors of length {} and {}",
            x.len(),
            y.len()
        )));
    }
    Ok(p.eval(x, y))
}

/// `K[i][j] = k(X_i, Y_j)`. Passing the same matrix twice takes the symmetric
/// path, which evaluates each unordered pair once.
pub fn kernel_matrix<T: Scalar>(
    x: &DenseMatrix<T>,
    y: &DenseMatrix<T>,
    p: &KernelParams<T>,
) -> Result<DenseMatrix<T>> {
    if x.cols() != y.cols() {
        return Err(Error::dims(format!(
            "feature dimensions {} and {} differ",
            x.cols(),
            y.cols()
        )));
    }
    if std::ptr::eq(x, y) {
        return Ok(gram_matrix(x, p));
    }
    let left: Vec<&[T]> = x.row_iter().collect();
    let right: Vec<&[T]> = y.row_iter().collect();
    Ok(cross_kernel(p, &left, &right))
}

/// Symmetric kernel matrix of the rows of `x` with itself.
pub fn gram_matrix<T: Scalar>(x: &DenseMatrix<T>, p: &KernelParams<T>) -> DenseMatrix<T> {
    let n = x.rows();
    let mut out = DenseMatrix::zeros(n, n);
    if n == 0 {
        return out;
    }
    out.as_mut_slice()
        .par_chunks_mut(n)
        .enumerate()
        .for_each(|(i, row)| {
            let xi = x.row(i);
            for (j, v) in row[..i].iter_mut().enumerate() {
                *v = p.eval(xi, x.row(j));
            }
            row[i] = p.eval(xi, xi);
        });
    out.mirror_lower();
    out
}

/// Kernel block between two lists of feature rows.
pub(crate) fn cross_kernel<T: Scalar>(
    p: &KernelParams<T>,
    left: &[&[T]],
    right: &[&[T]],
) -> DenseMatrix<T> {
    let cols = right.len();
    let mut out = DenseMatrix::zeros(left.len(), cols);
    if cols == 0 {
        return out;
    }
    out.as_mut_slice()
        .par_chunks_mut(cols)
        .zip(left.par_iter())
        .for_each(|(row, xi)| {
            for (v, yj) in row.iter_mut().zip(right) {
                *v = p.eval(xi, yj);
            }
        });
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> KernelParams<f64> {
        KernelParams::default()
    }

    #[test]
    fn zero_distance_gives_eta() {
        let p = KernelParams::new(2.5, 0.3, None).unwrap();
        assert_eq!(rbf(&[1.0, -2.0, 3.0], &[1.0, -2.0, 3.0], &p).unwrap(), 2.5);
    }

    #[test]
    fn distance_two_unit_params() {
        let v = rbf(&[0.0, 0.0], &[0.0, 2.0], &unit()).unwrap();
        // exp(-4/2)
        assert!((v - 0.1353352832366127).abs() < 1e-15);
    }

    #[test]
    fn clipping_zeroes_small_values_only() {
        let p = KernelParams::new(1.0, 1.0, Some(0.2)).unwrap();
        assert_eq!(rbf(&[0.0, 0.0], &[0.0, 2.0], &p).unwrap(), 0.0);
        let near = rbf(&[0.0, 0.0], &[0.0, 0.5], &p).unwrap();
        let unclipped = rbf(&[0.0, 0.0], &[0.0, 0.5], &unit()).unwrap();
        assert_eq!(near, unclipped);
    }

    #[test]
    fn parameter_validation() {
        assert!(KernelParams::new(0.0, 1.0, None).is_err());
        assert!(KernelParams::new(1.0, -1.0, None).is_err());
        assert!(KernelParams::new(1.0, 1.0, Some(1.0)).is_err());
        assert!(KernelParams::new(1.0, 1.0, Some(-0.1)).is_err());
        assert!(KernelParams::new(1.0, 1.0, Some(0.0)).is_ok());
    }

    #[test]
    fn dimension_mismatch() {
        assert!(matches!(
            rbf(&[0.0], &[0.0, 1.0], &unit()),
            Err(Error::DimensionMismatch(_))
        ));
        let a = DenseMatrix::<f64>::zeros(2, 3);
        let b = DenseMatrix::<f64>::zeros(2, 2);
        assert!(kernel_matrix(&a, &b, &unit()).is_err());
    }

    #[test]
    fn single_point_and_pair() {
        let x = DenseMatrix::from_rows(&[[0.3, 0.4]]).unwrap();
        let k = kernel_matrix(&x, &x, &unit()).unwrap();
        assert_eq!(k.as_slice(), &[1.0]);

        let x = DenseMatrix::from_rows(&[[0.0, 0.0], [0.0, 2.0]]).unwrap();
        let k = kernel_matrix(&x, &x, &unit()).unwrap();
        let e2 = (-2.0f64).exp();
        assert_eq!(k[(0, 0)], 1.0);
        assert_eq!(k[(1, 1)], 1.0);
        assert!((k[(0, 1)] - e2).abs() < 1e-15);
        assert_eq!(k[(0, 1)], k[(1, 0)]);
    }

    #[test]
    fn huge_length_scale_flattens_kernel() {
        let p = KernelParams::new(1.7, 1e6, None).unwrap();
        let x = DenseMatrix::from_fn(6, 3, |i, j| (i * 3 + j) as f64 - 4.0);
        let k = kernel_matrix(&x, &x, &p).unwrap();
        assert!(k.as_slice().iter().all(|v| (v - 1.7).abs() < 1e-9));
    }

    #[test]
    fn cross_kernel_matches_pointwise() {
        let x = DenseMatrix::from_fn(5, 2, |i, j| (i as f64) * 0.3 - (j as f64));
        let y = DenseMatrix::from_fn(3, 2, |i, j| (i as f64) + 0.1 * (j as f64));
        let k = kernel_matrix(&x, &y, &unit()).unwrap();
        for i in 0..5 {
            for j in 0..3 {
                assert_eq!(k[(i, j)], rbf(x.row(i), y.row(j), &unit()).unwrap());
            }
        }
    }
}
