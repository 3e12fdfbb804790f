//! Baselines for comparison with the GP posterior: the unweighted kernel
//! aggregate over the bank, and a multinomial logistic-regression head.

use crate::bank::MemoryBank;
use crate::error::{Error, Result};
use crate::kernel::{cross_kernel, KernelParams};
use crate::linalg::DenseMatrix;
use crate::scalar::Scalar;

/// Per-class kernel mass `k(query, h_Q) · y_Q`.
pub fn similarity_logits<T: Scalar>(
    bank: &MemoryBank<T>,
    query: &DenseMatrix<T>,
    kernel: &KernelParams<T>,
) -> Result<DenseMatrix<T>> {
    if bank.filled() == 0 {
        return Err(Error::EmptyBank);
    }
    if query.cols() != bank.dim() {
        return Err(Error::dims(format!(
            "query dimension {} differs from bank dimension {}",
            query.cols(),
            bank.dim()
        )));
    }
    let slots = bank.occupied_slots();
    let labels: Vec<usize> = slots.iter().map(|&s| bank.class_of(s).expect("occupied")).collect();
    let bank_rows: Vec<&[T]> = slots.iter().map(|&s| bank.feature(s)).collect();
    let query_rows: Vec<&[T]> = query.row_iter().collect();
    let kq = cross_kernel(kernel, &query_rows, &bank_rows);
    let mut out = DenseMatrix::zeros(query.rows(), bank.num_classes());
    for (i, krow) in kq.row_iter().enumerate() {
        let dst = out.row_mut(i);
        for (&v, &c) in krow.iter().zip(&labels) {
            dst[c] = dst[c] + v;
        }
    }
    Ok(out)
}

/// Affine classifier `logits = x·Wᵀ + b`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearModel<T> {
    /// C×d.
    pub weights: DenseMatrix<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> LinearModel<T> {
    pub fn zeros(num_classes: usize, dim: usize) -> Self {
        Self {
            weights: DenseMatrix::zeros(num_classes, dim),
            bias: vec![T::zero(); num_classes],
        }
    }

    pub fn num_classes(&self) -> usize {
        self.bias.len()
    }

    pub fn dim(&self) -> usize {
        self.weights.cols()
    }
}

pub fn linear_logits<T: Scalar>(model: &LinearModel<T>, query: &DenseMatrix<T>) -> Result<DenseMatrix<T>> {
    if query.cols() != model.dim() {
        return Err(Error::dims(format!(
            "query dimension {} differs from model dimension {}",
            query.cols(),
            model.dim()
        )));
    }
    let mut out = query.matmul_transposed(&model.weights)?;
    for i in 0..out.rows() {
        for (v, &b) in out.row_mut(i).iter_mut().zip(&model.bias) {
            *v = *v + b;
        }
    }
    Ok(out)
}

/// Trains by full-batch gradient descent on the mean cross-entropy.
///
/// Inputs are standardized per feature for training and the transform is
/// folded back into the returned weights, so the model consumes raw features.
/// Weights start at zero, which makes training deterministic.
pub fn linear_fit<T: Scalar>(
    features: &DenseMatrix<T>,
    class_ids: &[usize],
    num_classes: usize,
    epochs: usize,
    lr: T,
) -> Result<LinearModel<T>> {
    linear_fit_traced(features, class_ids, num_classes, epochs, lr).map(|(m, _)| m)
}

/// As [`linear_fit`], also returning the training loss before each epoch and after the last.
pub fn linear_fit_traced<T: Scalar>(
    features: &DenseMatrix<T>,
    class_ids: &[usize],
    num_classes: usize,
    epochs: usize,
    lr: T,
) -> Result<(LinearModel<T>, Vec<T>)> {
    let (n, d) = features.shape();
    if class_ids.len() != n {
        return Err(Error::dims(format!("{n} feature rows but {} class ids", class_ids.len())));
    }
    if num_classes < 2 {
        return Err(Error::DegenerateData("need at least two classes".into()));
    }
    if n < num_classes {
        return Err(Error::DegenerateData(format!(
            "{n} samples cannot cover {num_classes} classes"
        )));
    }
    let mut counts = vec![0usize; num_classes];
    for &c in class_ids {
        if c >= num_classes {
            return Err(Error::ClassOutOfRange {
                class: c,
                classes: num_classes,
            });
        }
        counts[c] += 1;
    }
    if let Some(missing) = counts.iter().position(|&k| k == 0) {
        return Err(Error::DegenerateData(format!("class {missing} has no samples")));
    }
    if !(lr > T::zero()) {
        return Err(Error::invalid("lr", "learning rate must be positive"));
    }

    let nf = T::from_count(n);
    let mut mean = vec![T::zero(); d];
    for r in features.row_iter() {
        for (m, &x) in mean.iter_mut().zip(r) {
            *m = *m + x;
        }
    }
    mean.iter_mut().for_each(|m| *m = *m / nf);
    let mut scale = vec![T::zero(); d];
    for r in features.row_iter() {
        for ((s, &x), &m) in scale.iter_mut().zip(r).zip(&mean) {
            *s = *s + (x - m) * (x - m);
        }
    }
    for s in scale.iter_mut() {
        let sd = (*s / nf).sqrt();
        *s = if sd > T::zero() { sd } else { T::one() };
    }
    let z = DenseMatrix::from_fn(n, d, |i, j| (features[(i, j)] - mean[j]) / scale[j]);

    let mut model = LinearModel::zeros(num_classes, d);
    let mut losses = Vec::with_capacity(epochs + 1);
    let mut probs = DenseMatrix::zeros(n, num_classes);
    for _ in 0..=epochs {
        let logits = linear_logits(&model, &z)?;
        let mut loss = T::zero();
        for i in 0..n {
            let row = logits.row(i);
            let max = row.iter().copied().fold(T::neg_infinity(), T::max);
            let sum: T = row.iter().map(|&v| (v - max).exp()).sum();
            let lse = max + sum.ln();
            loss = loss + (lse - row[class_ids[i]]);
            for (p, &v) in probs.row_mut(i).iter_mut().zip(row) {
                *p = (v - lse).exp();
            }
        }
        losses.push(loss / nf);
        if losses.len() > epochs {
            break;
        }
        // gradient of the mean cross-entropy: (P − Y)ᵀ·Z / n
        for (i, &c) in class_ids.iter().enumerate() {
            probs[(i, c)] = probs[(i, c)] - T::one();
        }
        let step = lr / nf;
        let grad_w = probs.transpose().matmul(&z)?;
        for c in 0..num_classes {
            let gb: T = (0..n).map(|i| probs[(i, c)]).sum();
            model.bias[c] = model.bias[c] - step * gb;
            for j in 0..d {
                model.weights[(c, j)] = model.weights[(c, j)] - step * grad_w[(c, j)];
            }
        }
    }

    // fold the standardization into the affine map
    for c in 0..num_classes {
        let mut shift = T::zero();
        for j in 0..d {
            let w = model.weights[(c, j)] / scale[j];
            model.weights[(c, j)] = w;
            shift = shift + w * mean[j];
        }
        model.bias[c] = model.bias[c] - shift;
    }
    if !model.weights.all_finite() || model.bias.iter().any(|b| !b.is_finite()) {
        return Err(Error::NonFinite("linear model weights"));
    }
    Ok((model, losses))
}
