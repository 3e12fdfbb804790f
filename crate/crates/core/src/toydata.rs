//! Synthetic data: long-tail class counts and the two-dimensional cluster
//! layouts used by the confidence-map and propagation demos.

use std::ops::Range;

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::rng::SeededRng;
use crate::scalar::Scalar;

/// Long-tail law `N_i = N_1 · γ^(−(i−1)/(K−1))`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ImbalanceSpec {
    num_classes: usize,
    majority_count: usize,
    gamma: f64,
}

impl ImbalanceSpec {
    pub fn new(num_classes: usize, majority_count: usize, gamma: f64) -> Result<Self> {
        if num_classes < 2 {
            return Err(Error::invalid("k", format!("need at least 2 classes, got {num_classes}")));
        }
        if majority_count == 0 {
            return Err(Error::invalid("n1", "majority count must be at least 1"));
        }
        if !(gamma >= 1.0) || !gamma.is_finite() {
            return Err(Error::invalid("gamma", format!("must be >= 1, got {gamma}")));
        }
        Ok(Self {
            num_classes,
            majority_count,
            gamma,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn majority_count(&self) -> usize {
        self.majority_count
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }
}

/// Per-class counts, truncated towards zero with a floor of 1.
///
/// A relative guard of `1e-12` keeps exact integers (`1500/150`) from
/// truncating down after the power is rounded.
pub fn longtail_counts(spec: &ImbalanceSpec) -> Vec<usize> {
    let last = (spec.num_classes - 1) as f64;
    (0..spec.num_classes)
        .map(|i| {
            let v = spec.majority_count as f64 * spec.gamma.powf(-(i as f64) / last);
            ((v * (1.0 + 1e-12)).floor() as usize).max(1)
        })
        .collect()
}

/// A point appended after the cluster samples.
#[derive(Clone, Debug, PartialEq)]
pub struct ExtraPoint<T> {
    pub point: Vec<T>,
    /// `None` places the point in the unlabeled pool.
    pub class: Option<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClusterSpec<T> {
    centers: Vec<Vec<T>>,
    counts: Vec<usize>,
    std: T,
    seed: u64,
    extras: Vec<ExtraPoint<T>>,
}

impl<T: Scalar> ClusterSpec<T> {
    pub fn new(centers: Vec<Vec<T>>, counts: Vec<usize>, std: T, seed: u64) -> Result<Self> {
        if centers.is_empty() || centers.len() != counts.len() {
            return Err(Error::invalid(
                "clusters",
                format!("{} centers but {} counts", centers.len(), counts.len()),
            ));
        }
        let dim = centers[0].len();
        if dim == 0 || centers.iter().any(|c| c.len() != dim) {
            return Err(Error::dims("cluster centers must share a nonzero dimension"));
        }
        if centers.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("cluster centers"));
        }
        if counts.contains(&0) {
            return Err(Error::invalid("counts", "every cluster needs at least one sample"));
        }
        if !(std > T::zero()) || !std.is_finite() {
            return Err(Error::invalid("std", format!("must be positive, got {std}")));
        }
        Ok(Self {
            centers,
            counts,
            std,
            seed,
            extras: Vec::new(),
        })
    }

    pub fn with_extras(mut self, extras: Vec<ExtraPoint<T>>) -> Result<Self> {
        let dim = self.dim();
        for e in &extras {
            if e.point.len() != dim {
                return Err(Error::dims(format!(
                    "extra point has dimension {}, clusters have {dim}",
                    e.point.len()
                )));
            }
            if let Some(c) = e.class {
                if c >= self.centers.len() {
                    return Err(Error::ClassOutOfRange {
                        class: c,
                        classes: self.centers.len(),
                    });
                }
            }
        }
        self.extras = extras;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.centers[0].len()
    }

    pub fn centers(&self) -> &[Vec<T>] {
        &self.centers
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn std(&self) -> T {
        self.std
    }
}

/// Labeled rows plus an unlabeled pool (possibly with zero rows).
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledDataset<T> {
    pub features: DenseMatrix<T>,
    pub class_ids: Vec<usize>,
    pub unlabeled: DenseMatrix<T>,
    pub num_classes: usize,
}

impl<T: Scalar> LabeledDataset<T> {
    pub fn new(
        features: DenseMatrix<T>,
        class_ids: Vec<usize>,
        unlabeled: DenseMatrix<T>,
        num_classes: usize,
    ) -> Result<Self> {
        if features.rows() != class_ids.len() {
            return Err(Error::dims(format!(
                "{} feature rows but {} labels",
                features.rows(),
                class_ids.len()
            )));
        }
        if features.cols() != unlabeled.cols() {
            return Err(Error::dims(format!(
                "labeled dimension {} vs unlabeled dimension {}",
                features.cols(),
                unlabeled.cols()
            )));
        }
        if let Some(&c) = class_ids.iter().find(|&&c| c >= num_classes) {
            return Err(Error::ClassOutOfRange {
                class: c,
                classes: num_classes,
            });
        }
        Ok(Self {
            features,
            class_ids,
            unlabeled,
            num_classes,
        })
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn len(&self) -> usize {
        self.features.rows() + self.unlabeled.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes];
        for &c in &self.class_ids {
            counts[c] += 1;
        }
        counts
    }
}

/// Draws `center + std·z` per cluster in order, then appends the extras.
pub fn sample_clusters<T: Scalar>(spec: &ClusterSpec<T>) -> LabeledDataset<T> {
    let d = spec.dim();
    let mut rng = SeededRng::new(spec.seed);
    let mut labeled = Vec::new();
    let mut ids = Vec::new();
    for (c, (center, &n)) in spec.centers.iter().zip(&spec.counts).enumerate() {
        for _ in 0..n {
            labeled.extend(center.iter().map(|&m| m + spec.std * T::lit(rng.normal())));
            ids.push(c);
        }
    }
    let mut unlabeled = Vec::new();
    for e in &spec.extras {
        match e.class {
            Some(c) => {
                labeled.extend_from_slice(&e.point);
                ids.push(c);
            }
            None => unlabeled.extend_from_slice(&e.point),
        }
    }
    let n = ids.len();
    let m = unlabeled.len() / d;
    LabeledDataset {
        features: DenseMatrix::from_raw(n, d, labeled),
        class_ids: ids,
        unlabeled: DenseMatrix::from_raw(m, d, unlabeled),
        num_classes: spec.centers.len(),
    }
}

pub const FIG3_CENTERS: [[f64; 2]; 4] = [[1.0, 1.0], [1.0, -1.0], [-1.0, -1.0], [-1.0, 1.0]];
pub const FIG3_OUTLIER: [f64; 2] = [-3.0, 3.0];
pub const FIG3_N_MINORITY: usize = 25;
pub const FIG3_STD: f64 = 0.35;

/// Four clusters clockwise from the top right with counts `n, 2n, 4n, 8n`;
/// the outlier `(−3, 3)` is the single unlabeled row.
pub fn fig3_preset<T: Scalar>(n_minority: usize, std: T, seed: u64) -> Result<LabeledDataset<T>> {
    if n_minority == 0 {
        return Err(Error::invalid("n_minority", "must be at least 1"));
    }
    let centers = FIG3_CENTERS.iter().map(|c| c.iter().map(|&v| T::lit(v)).collect()).collect();
    let counts = (0..4).map(|i| n_minority << i).collect();
    let spec = ClusterSpec::new(centers, counts, std, seed)?.with_extras(vec![ExtraPoint {
        point: FIG3_OUTLIER.iter().map(|&v| T::lit(v)).collect(),
        class: None,
    }])?;
    Ok(sample_clusters(&spec))
}

/// One isotropic 2-D cluster per class, all rows labeled, class `i` holding
/// `longtail_counts(spec)[i]` points. Centers sit evenly on a circle of radius
/// `max(3, K/π)`, which keeps neighbouring centers at least about 2 apart.
pub fn longtail_preset<T: Scalar>(spec: &ImbalanceSpec, std: T, seed: u64) -> Result<LabeledDataset<T>> {
    let k = spec.num_classes();
    let radius = (k as f64 / std::f64::consts::PI).max(3.0);
    let centers = (0..k)
        .map(|i| {
            let a = 2.0 * std::f64::consts::PI * i as f64 / k as f64;
            vec![T::lit(radius * a.cos()), T::lit(radius * a.sin())]
        })
        .collect();
    let spec = ClusterSpec::new(centers, longtail_counts(spec), std, seed)?;
    Ok(sample_clusters(&spec))
}

/// Geometry of the propagation preset.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Fig1Layout {
    pub centers: [[f64; 2]; 4],
    pub stds: [f64; 4],
    /// Total points per class, labeled and unlabeled.
    pub totals: [usize; 4],
    pub labeled: [usize; 4],
    pub outlier_center: [f64; 2],
    pub outlier_std: f64,
    pub outliers: usize,
}

/// Class 0 is a broad majority, class 1 a tight minority next to it, and
/// classes 2 and 3 overlap.
pub const FIG1_LAYOUT: Fig1Layout = Fig1Layout {
    centers: [[0.0, 0.0], [2.2, 0.0], [-0.6, 3.2], [0.6, 3.2]],
    stds: [0.6, 0.25, 0.45, 0.45],
    totals: [600, 60, 200, 200],
    labeled: [50, 6, 15, 15],
    outlier_center: [6.5, -4.0],
    outlier_std: 0.3,
    outliers: 24,
};

pub const FIG1_MAJORITY: usize = 0;
pub const FIG1_MINORITY: usize = 1;

/// Unlabeled-row ranges of the three regions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Fig1Regions {
    /// Contact zone of the two overlapping classes.
    pub a: Range<usize>,
    /// Unlabeled members of the minority cluster.
    pub b: Range<usize>,
    /// Detached outlier group.
    pub c: Range<usize>,
}

#[derive(Clone, Debug)]
pub struct Fig1Preset<T> {
    pub dataset: LabeledDataset<T>,
    pub regions: Fig1Regions,
    /// Ground-truth class for each unlabeled row; `None` for outliers.
    pub unlabeled_truth: Vec<Option<usize>>,
}

/// Unlabeled rows are ordered majority, region B, region A, region C.
pub fn fig1_preset<T: Scalar>(seed: u64) -> Fig1Preset<T> {
    let l = FIG1_LAYOUT;
    let mut rng = SeededRng::new(seed);
    let draw = |rng: &mut SeededRng, center: [f64; 2], std: f64| -> [T; 2] {
        let x = center[0] + std * rng.normal();
        let y = center[1] + std * rng.normal();
        [T::lit(x), T::lit(y)]
    };

    let mut labeled = Vec::new();
    let mut ids = Vec::new();
    let mut pools: [Vec<T>; 4] = Default::default();
    for c in 0..4 {
        for i in 0..l.totals[c] {
            let p = draw(&mut rng, l.centers[c], l.stds[c]);
            if i < l.labeled[c] {
                labeled.extend_from_slice(&p);
                ids.push(c);
            } else {
                pools[c].extend_from_slice(&p);
            }
        }
    }
    let mut outliers = Vec::new();
    for _ in 0..l.outliers {
        outliers.extend_from_slice(&draw(&mut rng, l.outlier_center, l.outlier_std));
    }

    let mut unlabeled = Vec::new();
    let mut truth = Vec::new();
    let mut push = |rows: &[T], class: Option<usize>| {
        let start = unlabeled.len() / 2;
        unlabeled.extend_from_slice(rows);
        truth.extend(std::iter::repeat(class).take(rows.len() / 2));
        start..unlabeled.len() / 2
    };
    push(&pools[FIG1_MAJORITY], Some(FIG1_MAJORITY));
    let b = push(&pools[FIG1_MINORITY], Some(FIG1_MINORITY));
    let a2 = push(&pools[2], Some(2));
    let a3 = push(&pools[3], Some(3));
    let c = push(&outliers, None);

    let n = ids.len();
    let m = unlabeled.len() / 2;
    Fig1Preset {
        dataset: LabeledDataset {
            features: DenseMatrix::from_raw(n, 2, labeled),
            class_ids: ids,
            unlabeled: DenseMatrix::from_raw(m, 2, unlabeled),
            num_classes: 4,
        },
        regions: Fig1Regions {
            a: a2.start..a3.end,
            b,
            c,
        },
        unlabeled_truth: truth,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn longtail_preset_counts() {
        let spec = ImbalanceSpec::new(10, 1500, 150.0).unwrap();
        let ds: LabeledDataset<f64> = longtail_preset(&spec, 0.3, 1).unwrap();
        assert_eq!(ds.class_counts(), longtail_counts(&spec));
        assert_eq!(ds.unlabeled.rows(), 0);
        assert_eq!(ds.dim(), 2);
    }

    #[test]
    fn longtail_examples() {
        let counts = longtail_counts(&ImbalanceSpec::new(10, 1500, 150.0).unwrap());
        assert_eq!(counts[0], 1500);
        assert_eq!(counts[9], 10);
        let counts = longtail_counts(&ImbalanceSpec::new(10, 1500, 100.0).unwrap());
        assert_eq!(counts[9], 15);
        assert_eq!(longtail_counts(&ImbalanceSpec::new(5, 42, 1.0).unwrap()), vec![42; 5]);
    }

    #[test]
    fn longtail_hundred_classes() {
        let counts = longtail_counts(&ImbalanceSpec::new(100, 150, 100.0).unwrap());
        assert_eq!(counts.iter().sum::<usize>(), 3218);
        assert_eq!(counts[99], 1);
        assert!(counts.windows(2).all(|w| w[0] >= w[1]));
        // unrounded ratios are all γ^(1/(K−1))
        let r = 100f64.powf(1.0 / 99.0);
        let raw: Vec<f64> = (0..100).map(|i| 150.0 * 100f64.powf(-(i as f64) / 99.0)).collect();
        assert!(raw.windows(2).all(|w| (w[0] / w[1] - r).abs() < 1e-12));
    }

    #[test]
    fn imbalance_validation() {
        assert!(ImbalanceSpec::new(1, 10, 2.0).is_err());
        assert!(ImbalanceSpec::new(3, 0, 2.0).is_err());
        assert!(ImbalanceSpec::new(3, 10, 0.5).is_err());
        assert!(ImbalanceSpec::new(3, 10, f64::NAN).is_err());
    }

    #[test]
    fn fig3_layout() {
        let ds = fig3_preset::<f64>(FIG3_N_MINORITY, FIG3_STD, 1).unwrap();
        assert_eq!(ds.features.rows(), 375);
        assert_eq!(ds.class_counts(), vec![25, 50, 100, 200]);
        assert_eq!(ds.unlabeled.as_slice(), &FIG3_OUTLIER);
        assert!(fig3_preset::<f64>(0, 0.35, 1).is_err());
    }

    #[test]
    fn tiny_std_collapses_onto_centers() {
        let spec = ClusterSpec::<f64>::new(vec![vec![1.0, -2.0], vec![0.5, 0.5]], vec![10, 3], 1e-9, 4).unwrap();
        let ds = sample_clusters(&spec);
        for (row, &c) in ds.features.row_iter().zip(&ds.class_ids) {
            let center = &spec.centers()[c];
            assert!(row.iter().zip(center).all(|(a, b)| (a - b).abs() <= 1e-6));
        }
    }

    #[test]
    fn cluster_spec_validation() {
        assert!(ClusterSpec::new(vec![vec![0.0]], vec![0], 1.0, 0).is_err());
        assert!(ClusterSpec::new(vec![vec![0.0]], vec![1], 0.0, 0).is_err());
        assert!(ClusterSpec::new(vec![vec![0.0], vec![0.0, 1.0]], vec![1, 1], 1.0, 0).is_err());
        let spec = ClusterSpec::new(vec![vec![0.0]], vec![1], 1.0, 0).unwrap();
        let bad = ExtraPoint { point: vec![1.0], class: Some(3) };
        assert!(spec.with_extras(vec![bad]).is_err());
    }

    #[test]
    fn fig1_regions() {
        let p = fig1_preset::<f64>(0);
        let ds = &p.dataset;
        assert!(ds.features.rows() * 10 <= ds.len());
        assert_eq!(p.regions.b.len(), FIG1_LAYOUT.totals[1] - FIG1_LAYOUT.labeled[1]);
        assert_eq!(p.regions.c.len(), FIG1_LAYOUT.outliers);
        assert_eq!(p.regions.c.end, ds.unlabeled.rows());
        assert_eq!(p.unlabeled_truth.len(), ds.unlabeled.rows());
        assert!(p.regions.c.clone().all(|i| p.unlabeled_truth[i].is_none()));
        let l = FIG1_LAYOUT;
        let max_std = l.stds.iter().copied().fold(0.0, f64::max);
        for c in l.centers {
            let d = ((c[0] - l.outlier_center[0]).powi(2) + (c[1] - l.outlier_center[1]).powi(2)).sqrt();
            assert!(d >= 4.0 * max_std);
        }
    }
}
