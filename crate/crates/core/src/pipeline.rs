//! End-to-end paths shared by the CLI and the demos: fitting a classifier on
//! the labeled rows, confidence maps, and pseudo-labels for unlabeled rows.

use std::fmt;
use std::str::FromStr;

use crate::bank::{BankMode, MemoryBank};
use crate::error::{Error, Result};
use crate::gp::{linear_fit, linear_logits, similarity_logits, GpState, LinearModel};
use crate::io::{ExperimentConfig, GridData, GridSpec, PolicyKind, RefinedRow};
use crate::kernel::KernelParams;
use crate::linalg::DenseMatrix;
use crate::refine::{argmax, confidence, normalize_aggregate, pseudo_label_mask, refine_label, softmax};
use crate::scalar::Scalar;
use crate::toydata::LabeledDataset;

pub const LINEAR_EPOCHS: usize = 2000;
pub const LINEAR_LR: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelKind {
    Gp,
    Similarity,
    Linear,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Gp => "gp",
            ModelKind::Similarity => "similarity",
            ModelKind::Linear => "linear",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "gp" => Ok(ModelKind::Gp),
            "similarity" => Ok(ModelKind::Similarity),
            "linear" => Ok(ModelKind::Linear),
            _ => Err(format!("unknown model `{s}` (expected gp, similarity or linear)")),
        }
    }
}

/// Loads the labeled rows into a bank in file order.
///
/// With no configured capacity the bank holds every labeled row; in
/// class-balanced mode it is sized to `C ·` the largest class.
pub fn build_bank<T: Scalar>(ds: &LabeledDataset<T>, cfg: &ExperimentConfig<T>) -> Result<MemoryBank<T>> {
    if ds.class_ids.is_empty() {
        return Err(Error::EmptyBank);
    }
    let c = ds.num_classes;
    let capacity = cfg.bank_capacity.unwrap_or_else(|| match cfg.bank_mode {
        BankMode::Fifo => ds.class_ids.len(),
        BankMode::ClassBalanced => c * ds.class_counts().into_iter().max().unwrap_or(1),
    });
    let mut bank = MemoryBank::new(capacity, ds.dim(), c, cfg.bank_mode)?;
    let n = ds.features.rows();
    if cfg.bank_mode == BankMode::Fifo && n <= capacity {
        bank.insert_batch(&ds.features, &ds.class_ids)?;
        return Ok(bank);
    }
    let cols: Vec<usize> = (0..ds.dim()).collect();
    for i in 0..n {
        bank.insert_batch(&ds.features.select(&[i], &cols), &ds.class_ids[i..=i])?;
    }
    Ok(bank)
}

#[derive(Clone, Debug)]
pub enum Classifier<T> {
    Gp(GpState<T>),
    Similarity {
        bank: MemoryBank<T>,
        kernel: KernelParams<T>,
    },
    Linear(LinearModel<T>),
}

impl<T: Scalar> Classifier<T> {
    pub fn fit(kind: ModelKind, ds: &LabeledDataset<T>, cfg: &ExperimentConfig<T>) -> Result<Self> {
        Ok(match kind {
            ModelKind::Gp => Classifier::Gp(GpState::warmup(cfg.gp, build_bank(ds, cfg)?)?),
            ModelKind::Similarity => Classifier::Similarity {
                bank: build_bank(ds, cfg)?,
                kernel: *cfg.kernel(),
            },
            ModelKind::Linear => Classifier::Linear(linear_fit(
                &ds.features,
                &ds.class_ids,
                ds.num_classes,
                LINEAR_EPOCHS,
                T::lit(LINEAR_LR),
            )?),
        })
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            Classifier::Gp(_) => ModelKind::Gp,
            Classifier::Similarity { .. } => ModelKind::Similarity,
            Classifier::Linear(_) => ModelKind::Linear,
        }
    }

    /// GP logits, similarity mass, or linear logits.
    pub fn scores(&self, query: &DenseMatrix<T>) -> Result<DenseMatrix<T>> {
        match self {
            Classifier::Gp(state) => Ok(state.posterior_logits(query)?.logits),
            Classifier::Similarity { bank, kernel } => similarity_logits(bank, query, kernel),
            Classifier::Linear(model) => linear_logits(model, query),
        }
    }

    /// Softmax of the logits; the similarity mass is normalized instead.
    pub fn probabilities(&self, query: &DenseMatrix<T>) -> Result<DenseMatrix<T>> {
        let scores = self.scores(query)?;
        let mut out = Vec::with_capacity(scores.rows() * scores.cols());
        for row in scores.row_iter() {
            match self {
                Classifier::Similarity { .. } => out.extend(normalize_aggregate(row)),
                _ => out.extend(softmax(row)),
            }
        }
        DenseMatrix::from_vec(scores.rows(), scores.cols(), out)
    }
}

fn max_entry<T: Scalar>(p: &[T]) -> T {
    p.iter().copied().fold(T::zero(), T::max)
}

fn points_matrix<T: Scalar>(points: &[[f64; 2]]) -> DenseMatrix<T> {
    DenseMatrix::from_fn(points.len(), 2, |i, j| T::lit(points[i][j]))
}

/// Confidence and argmax of `clf` at each grid point.
pub fn confidence_grid<T: Scalar>(clf: &Classifier<T>, spec: GridSpec) -> Result<GridData<T>> {
    let probs = clf.probabilities(&points_matrix(&spec.points()))?;
    Ok(GridData {
        spec,
        conf: probs.row_iter().map(max_entry).collect(),
        argmax: probs.row_iter().map(argmax).collect(),
    })
}

/// Probabilities of `clf` at one 2-D point.
pub fn probabilities_at<T: Scalar>(clf: &Classifier<T>, point: [f64; 2]) -> Result<Vec<T>> {
    Ok(clf.probabilities(&points_matrix(&[point]))?.row(0).to_vec())
}

/// Pseudo-labels for every unlabeled row under `cfg.policy`.
///
/// `gp` and `similarity` label with the bank-based prediction alone. The
/// other policies refine the linear model fitted on the labeled rows, and
/// the mask uses that model's confidence.
pub fn refine_unlabeled<T: Scalar>(ds: &LabeledDataset<T>, cfg: &ExperimentConfig<T>) -> Result<Vec<RefinedRow<T>>> {
    let query = &ds.unlabeled;
    if query.rows() == 0 {
        return Err(Error::DegenerateData("no unlabeled rows to refine".into()));
    }
    let labels: Vec<(Vec<T>, T)> = match cfg.policy {
        PolicyKind::Gp | PolicyKind::Similarity => {
            let kind = if cfg.policy == PolicyKind::Gp {
                ModelKind::Gp
            } else {
                ModelKind::Similarity
            };
            let probs = Classifier::fit(kind, ds, cfg)?.probabilities(query)?;
            probs.row_iter().map(|p| (p.to_vec(), max_entry(p))).collect()
        }
        _ => {
            let policy = cfg.refinement()?;
            let model = Classifier::fit(ModelKind::Linear, ds, cfg)?;
            let logits = model.scores(query)?;
            let aggregate = match cfg.policy {
                PolicyKind::SmoothGp => Some(Classifier::fit(ModelKind::Gp, ds, cfg)?.scores(query)?),
                PolicyKind::SmoothSimilarity => Some(Classifier::fit(ModelKind::Similarity, ds, cfg)?.scores(query)?),
                _ => None,
            };
            let mut out = Vec::with_capacity(query.rows());
            for (i, row) in logits.row_iter().enumerate() {
                let label = refine_label(&policy, row, aggregate.as_ref().map(|a| a.row(i)))?;
                out.push((label.into_vec(), confidence(row)));
            }
            out
        }
    };
    Ok(query
        .row_iter()
        .zip(labels)
        .map(|(x, (p, conf))| {
            let keep = pseudo_label_mask(conf, cfg.tau);
            RefinedRow {
                features: x.to_vec(),
                pred_class: keep.then(|| argmax(&p)),
                top_class: argmax(&p),
                conf,
                mask: keep,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::toydata::fig3_preset;

    fn small() -> LabeledDataset<f64> {
        LabeledDataset::new(
            DenseMatrix::from_rows(&[[0.0, 0.0], [0.1, 0.0], [3.0, 0.0], [3.1, 0.1]]).unwrap(),
            vec![0, 0, 1, 1],
            DenseMatrix::from_rows(&[[0.05, 0.0], [3.05, 0.0], [40.0, 40.0]]).unwrap(),
            2,
        )
        .unwrap()
    }

    #[test]
    fn bank_holds_labeled_rows() {
        let ds = small();
        let bank = build_bank(&ds, &ExperimentConfig::default()).unwrap();
        assert_eq!(bank.filled(), 4);
        let cfg = ExperimentConfig {
            bank_mode: BankMode::ClassBalanced,
            ..ExperimentConfig::default()
        };
        assert_eq!(build_bank(&ds, &cfg).unwrap().capacity(), 4);
        let cfg = ExperimentConfig {
            bank_capacity: Some(3),
            ..ExperimentConfig::default()
        };
        // fifo keeps the newest three rows
        let bank = build_bank(&ds, &cfg).unwrap();
        assert_eq!(bank.snapshot().unwrap().labels.row(0), &[0.0, 1.0]);
        assert_eq!(bank.feature(0), &[3.1, 0.1]);
    }

    #[test]
    fn gp_policy_masks_far_rows() {
        let ds = small();
        let cfg = ExperimentConfig {
            gp: crate::gp::GpConfig::new(KernelParams::new(1.0, 0.5, None).unwrap(), 0.3, 8.0, 256).unwrap(),
            ..ExperimentConfig::default()
        };
        let rows = refine_unlabeled(&ds, &cfg).unwrap();
        assert_eq!(rows[0].pred_class, Some(0));
        assert_eq!(rows[1].pred_class, Some(1));
        assert!(!rows[2].mask && rows[2].pred_class.is_none());
        assert!((rows[2].conf - 0.5).abs() < 1e-9);
    }

    #[test]
    fn alpha_zero_matches_identity() {
        let ds = small();
        let mut base = ExperimentConfig::<f64> {
            policy: PolicyKind::Identity,
            ..ExperimentConfig::default()
        };
        let identity = refine_unlabeled(&ds, &base).unwrap();
        base.alpha = 0.0;
        for policy in [PolicyKind::SmoothGp, PolicyKind::SmoothSimilarity] {
            base.policy = policy;
            assert_eq!(refine_unlabeled(&ds, &base).unwrap(), identity);
        }
    }

    #[test]
    fn grid_on_single_point() {
        let ds = fig3_preset::<f64>(25, 0.35, 1).unwrap();
        let clf = Classifier::fit(ModelKind::Similarity, &ds, &ExperimentConfig::default()).unwrap();
        let grid = confidence_grid(&clf, "0.5,1.5,0.5,1.5,1,1".parse().unwrap()).unwrap();
        assert_eq!(grid.conf.len(), 1);
        assert!(grid.conf[0] > 0.25 && grid.conf[0] <= 1.0);
    }

    #[test]
    fn rejects_missing_rows() {
        let mut ds = small();
        ds.unlabeled = DenseMatrix::zeros(0, 2);
        assert!(refine_unlabeled(&ds, &ExperimentConfig::default()).is_err());
    }
}
