//! Pseudo-label refinement: confidence, the refinement family, threshold
//! masking and the labeled/unlabeled consistency losses.
//!
//! Smoothing mixes in probability space: the model logits go through softmax,
//! the aggregate (GP or similarity class mass) is clamped at zero and divided
//! by its sum, falling back to uniform when that sum is below `1e-12`.

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::scalar::Scalar;

pub const DEFAULT_TAU: f64 = 0.8;

/// A probability vector over classes.
#[derive(Clone, Debug, PartialEq)]
pub struct SoftLabel<T>(Vec<T>);

impl<T: Scalar> SoftLabel<T> {
    /// Accepts vectors on the simplex within `1e-9`.
    pub fn new(probs: Vec<T>) -> Result<Self> {
        let tol = T::lit(1e-9);
        let sum: T = probs.iter().copied().sum();
        let in_range = probs
            .iter()
            .all(|&p| p.is_finite() && p >= -tol && p <= T::one() + tol);
        if probs.is_empty() || !in_range || (sum - T::one()).abs() > tol {
            return Err(Error::invalid("soft label", "not a probability vector"));
        }
        Ok(Self(probs))
    }

    pub fn one_hot(classes: usize, class: usize) -> Self {
        let mut v = vec![T::zero(); classes];
        v[class] = T::one();
        Self(v)
    }

    pub fn probs(&self) -> &[T] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<T> {
        self.0
    }

    pub fn argmax(&self) -> usize {
        argmax(&self.0)
    }

    pub fn max(&self) -> T {
        self.0.iter().copied().fold(T::zero(), T::max)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AggregateSource {
    Similarity,
    Gp,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RefinementPolicy<T> {
    Identity,
    HardOneHot,
    Sharpen { temperature: T },
    Smooth { alpha: T, source: AggregateSource },
}

impl<T: Scalar> RefinementPolicy<T> {
    pub fn sharpen(temperature: T) -> Result<Self> {
        if !(temperature > T::zero()) || !temperature.is_finite() {
            return Err(Error::invalid(
                "refine.temperature",
                format!("must be positive, got {temperature}"),
            ));
        }
        Ok(Self::Sharpen { temperature })
    }

    pub fn smooth(alpha: T, source: AggregateSource) -> Result<Self> {
        if !(alpha >= T::zero() && alpha <= T::one()) {
            return Err(Error::invalid("refine.alpha", format!("must lie in [0, 1], got {alpha}")));
        }
        Ok(Self::Smooth { alpha, source })
    }

    pub fn needs_aggregate(&self) -> bool {
        matches!(self, Self::Smooth { .. })
    }
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax<T: Scalar>(v: &[T]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}

pub fn softmax<T: Scalar>(logits: &[T]) -> Vec<T> {
    scaled_softmax(logits, T::one())
}

/// `softmax(logits / t)`, computed from the max-shifted logits.
fn scaled_softmax<T: Scalar>(logits: &[T], t: T) -> Vec<T> {
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let mut out: Vec<T> = logits.iter().map(|&z| ((z - max) / t).exp()).collect();
    let sum: T = out.iter().copied().sum();
    out.iter_mut().for_each(|p| *p = *p / sum);
    out
}

/// `max(softmax(logits))`.
pub fn confidence<T: Scalar>(logits: &[T]) -> T {
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let sum: T = logits.iter().map(|&z| (z - max).exp()).sum();
    T::one() / sum
}

/// Clamps negative class mass to zero and normalizes to a distribution.
pub fn normalize_aggregate<T: Scalar>(aggregate: &[T]) -> Vec<T> {
    let clamped: Vec<T> = aggregate.iter().map(|&v| v.max(T::zero())).collect();
    let sum: T = clamped.iter().copied().sum();
    if !(sum >= T::lit(1e-12)) {
        let u = T::one() / T::from_count(aggregate.len());
        return vec![u; aggregate.len()];
    }
    clamped.into_iter().map(|v| v / sum).collect()
}

pub fn refine_label<T: Scalar>(
    policy: &RefinementPolicy<T>,
    model_logits: &[T],
    aggregate: Option<&[T]>,
) -> Result<SoftLabel<T>> {
    let probs = match *policy {
        RefinementPolicy::Identity => softmax(model_logits),
        RefinementPolicy::HardOneHot => {
            return Ok(SoftLabel::one_hot(model_logits.len(), argmax(model_logits)))
        }
        RefinementPolicy::Sharpen { temperature } => scaled_softmax(model_logits, temperature),
        RefinementPolicy::Smooth { alpha, .. } => {
            let agg = aggregate.ok_or(Error::MissingAggregate)?;
            if agg.len() != model_logits.len() {
                return Err(Error::dims(format!(
                    "aggregate has {} classes, logits have {}",
                    agg.len(),
                    model_logits.len()
                )));
            }
            let p = softmax(model_logits);
            let q = normalize_aggregate(agg);
            let keep = T::one() - alpha;
            p.iter().zip(&q).map(|(&a, &b)| keep * a + alpha * b).collect()
        }
    };
    Ok(SoftLabel(probs))
}

/// `conf > tau`, strictly.
pub fn pseudo_label_mask<T: Scalar>(conf: T, tau: T) -> bool {
    conf > tau
}

/// `−Σ_c target_c · log softmax(pred)_c`.
pub fn cross_entropy<T: Scalar>(pred_logits: &[T], target: &SoftLabel<T>) -> T {
    let max = pred_logits.iter().copied().fold(T::neg_infinity(), T::max);
    let lse = max + pred_logits.iter().map(|&z| (z - max).exp()).sum::<T>().ln();
    pred_logits
        .iter()
        .zip(target.probs())
        .filter(|(_, &t)| t != T::zero())
        .map(|(&z, &t)| t * (lse - z))
        .sum()
}

/// Shannon entropy in nats.
pub fn entropy<T: Scalar>(p: &[T]) -> T {
    p.iter()
        .filter(|&&x| x > T::zero())
        .map(|&x| -x * x.ln())
        .sum()
}

/// Mean cross-entropy of weak-view logits against ground-truth classes.
pub fn labeled_loss<T: Scalar>(weak_logits: &DenseMatrix<T>, class_ids: &[usize]) -> Result<T> {
    if weak_logits.rows() != class_ids.len() || class_ids.is_empty() {
        return Err(Error::dims(format!(
            "{} logit rows but {} labels",
            weak_logits.rows(),
            class_ids.len()
        )));
    }
    let c = weak_logits.cols();
    let mut total = T::zero();
    for (row, &y) in weak_logits.row_iter().zip(class_ids) {
        if y >= c {
            return Err(Error::ClassOutOfRange { class: y, classes: c });
        }
        total = total + cross_entropy(row, &SoftLabel::one_hot(c, y));
    }
    Ok(total / T::from_count(class_ids.len()))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UnlabeledLoss<T> {
    pub loss: T,
    pub mask_count: usize,
}

/// Mean over confident samples of `H(strong_i, f(weak_i))`; zero when none pass.
pub fn unlabeled_loss<T: Scalar>(
    strong_logits: &DenseMatrix<T>,
    weak_logits: &DenseMatrix<T>,
    policy: &RefinementPolicy<T>,
    tau: T,
    aggregates: Option<&DenseMatrix<T>>,
) -> Result<UnlabeledLoss<T>> {
    if strong_logits.shape() != weak_logits.shape() {
        return Err(Error::dims(format!(
            "strong logits {:?} vs weak logits {:?}",
            strong_logits.shape(),
            weak_logits.shape()
        )));
    }
    if let Some(a) = aggregates {
        if a.shape() != weak_logits.shape() {
            return Err(Error::dims(format!(
                "aggregates {:?} vs logits {:?}",
                a.shape(),
                weak_logits.shape()
            )));
        }
    }
    if policy.needs_aggregate() && aggregates.is_none() {
        return Err(Error::MissingAggregate);
    }
    let mut total = T::zero();
    let mut count = 0;
    for i in 0..weak_logits.rows() {
        let weak = weak_logits.row(i);
        if !pseudo_label_mask(confidence(weak), tau) {
            continue;
        }
        let target = refine_label(policy, weak, aggregates.map(|a| a.row(i)))?;
        total = total + cross_entropy(strong_logits.row(i), &target);
        count += 1;
    }
    let loss = if count == 0 {
        T::zero()
    } else {
        total / T::from_count(count)
    };
    Ok(UnlabeledLoss {
        loss,
        mask_count: count,
    })
}
