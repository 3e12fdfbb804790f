//! GP posterior-mean label refinement over a memory bank.
//!
//! The state caches `K⁻¹ = (k(h_Q, h_Q) + σ²I)⁻¹` for the occupied bank slots
//! (in ascending slot order) and keeps it current across batch replacements
//! with the rank-B downdate/assemble pair from [`crate::linalg`]. Every
//! `refresh_period` inserts the cache is rebuilt by direct inversion to bound
//! accumulated rounding error.

mod baseline;

pub use baseline::{linear_fit, linear_fit_traced, linear_logits, similarity_logits, LinearModel};

use crate::bank::MemoryBank;
use crate::error::{Error, Result};
use crate::kernel::{cross_kernel, gram_matrix, KernelParams};
use crate::linalg::{
    assemble_with_layout, direct_inverse, downdate_gathered, gemm::{gemm, Triangle}, plan_replacement,
    DenseMatrix,
};
use crate::scalar::Scalar;

pub const DEFAULT_REFRESH_PERIOD: usize = 256;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GpConfig<T> {
    kernel: KernelParams<T>,
    sigma: T,
    lambda: T,
    refresh_period: usize,
}

impl<T: Scalar> GpConfig<T> {
    pub fn new(kernel: KernelParams<T>, sigma: T, lambda: T, refresh_period: usize) -> Result<Self> {
        if !(sigma > T::zero()) || !sigma.is_finite() {
            return Err(Error::invalid("gp.sigma", format!("must be positive, got {sigma}")));
        }
        if !(lambda > T::zero()) || !lambda.is_finite() {
            return Err(Error::invalid("gp.lambda", format!("must be positive, got {lambda}")));
        }
        if refresh_period == 0 {
            return Err(Error::invalid("gp.refresh_period", "must be at least 1"));
        }
        Ok(Self {
            kernel,
            sigma,
            lambda,
            refresh_period,
        })
    }

    pub fn kernel(&self) -> &KernelParams<T> {
        &self.kernel
    }

    pub fn sigma(&self) -> T {
        self.sigma
    }

    pub fn lambda(&self) -> T {
        self.lambda
    }

    pub fn refresh_period(&self) -> usize {
        self.refresh_period
    }

    /// Observation noise variance σ².
    pub fn noise(&self) -> T {
        self.sigma * self.sigma
    }
}

impl<T: Scalar> Default for GpConfig<T> {
    fn default() -> Self {
        Self {
            kernel: KernelParams::default(),
            sigma: T::one(),
            lambda: T::one(),
            refresh_period: DEFAULT_REFRESH_PERIOD,
        }
    }
}

/// Logits together with the state generation that produced them.
#[derive(Clone, Debug)]
pub struct Posterior<T> {
    pub logits: DenseMatrix<T>,
    pub generation: u64,
}

#[derive(Clone, Debug)]
pub struct GpState<T> {
    config: GpConfig<T>,
    bank: MemoryBank<T>,
    k_inv: DenseMatrix<T>,
    /// Matrix index → bank slot; always the ascending list of occupied slots.
    slots: Vec<usize>,
    generation: u64,
    updates_since_refresh: usize,
    refreshes: u64,
}

impl<T: Scalar> GpState<T> {
    /// Builds the cached inverse by direct inversion of the bank covariance.
    pub fn warmup(config: GpConfig<T>, bank: MemoryBank<T>) -> Result<Self> {
        if bank.filled() == 0 {
            return Err(Error::EmptyBank);
        }
        let mut state = Self {
            config,
            bank,
            k_inv: DenseMatrix::zeros(0, 0),
            slots: Vec::new(),
            generation: 0,
            updates_since_refresh: 0,
            refreshes: 0,
        };
        state.rebuild()?;
        state.refreshes = 0;
        Ok(state)
    }

    pub fn config(&self) -> &GpConfig<T> {
        &self.config
    }

    pub fn bank(&self) -> &MemoryBank<T> {
        &self.bank
    }

    pub fn into_bank(self) -> MemoryBank<T> {
        self.bank
    }

    /// Cached `K⁻¹`, rows ordered like [`slots`](Self::slots).
    pub fn covariance_inverse(&self) -> &DenseMatrix<T> {
        &self.k_inv
    }

    pub fn slots(&self) -> &[usize] {
        &self.slots
    }

    pub fn generation(&self) -> u64 {
        self.generation
    }

    pub fn updates_since_refresh(&self) -> usize {
        self.updates_since_refresh
    }

    /// Number of direct rebuilds triggered by the refresh period.
    pub fn refreshes(&self) -> u64 {
        self.refreshes
    }

    /// `k(h_Q, h_Q) + σ²I` assembled from scratch.
    pub fn covariance(&self) -> DenseMatrix<T> {
        let feats = self.bank_features();
        let mut k = gram_matrix(&feats, &self.config.kernel);
        k.add_to_diagonal(self.config.noise());
        k
    }

    fn bank_features(&self) -> DenseMatrix<T> {
        let d = self.bank.dim();
        let mut data = Vec::with_capacity(self.slots.len() * d);
        for &s in &self.slots {
            data.extend_from_slice(self.bank.feature(s));
        }
        DenseMatrix::from_raw(self.slots.len(), d, data)
    }

    /// Recomputes `K⁻¹` by direct inversion.
    pub fn rebuild(&mut self) -> Result<()> {
        self.slots = self.bank.occupied_slots();
        let k = self.covariance();
        self.k_inv = direct_inverse(&k)?;
        self.updates_since_refresh = 0;
        self.refreshes += 1;
        Ok(())
    }

    /// Inserts a batch into the bank and updates `K⁻¹` incrementally.
    ///
    /// Returns the bank slots written, in batch order. When a batch writes the
    /// same slot twice it is applied as consecutive rank updates. On error the
    /// bank and the cached inverse are left as they were.
    pub fn insert(&mut self, feats: &DenseMatrix<T>, class_ids: &[usize]) -> Result<Vec<usize>> {
        if feats.rows() != class_ids.len() {
            return Err(Error::dims(format!(
                "{} feature rows but {} class ids",
                feats.rows(),
                class_ids.len()
            )));
        }
        if feats.cols() != self.bank.dim() {
            return Err(Error::dims(format!(
                "features have dimension {}, bank expects {}",
                feats.cols(),
                self.bank.dim()
            )));
        }
        let plan = self.bank.plan_slots(class_ids)?;
        let groups = distinct_runs(&plan);
        // O(capacity·d); cheap next to the O(B·n²) update it protects
        let backup = self.bank.clone();
        let in_place: Option<Vec<usize>> = if groups.len() == 1 {
            plan.iter().map(|s| self.slots.binary_search(s).ok()).collect()
        } else {
            None
        };
        if let Some(pos) = in_place {
            // every written slot was occupied: positions are unchanged
            if let Err(e) = self.replace_in_place(feats, class_ids, &pos) {
                self.bank = backup;
                return Err(e);
            }
            return self.finish_insert(plan);
        }
        let mut working: Option<(DenseMatrix<T>, Vec<usize>)> = None;

        for (start, end) in groups {
            let rows: Vec<usize> = (start..end).collect();
            let group_feats = feats.select(&rows, &(0..feats.cols()).collect::<Vec<_>>());
            let (prev_inv, prev_slots) = match &working {
                Some((m, s)) => (m, s.as_slice()),
                None => (&self.k_inv, self.slots.as_slice()),
            };
            let result = Self::apply_group(
                &mut self.bank,
                &self.config,
                prev_inv,
                prev_slots,
                &group_feats,
                &class_ids[start..end],
            );
            match result {
                Ok(next) => working = Some(next),
                Err(e) => {
                    self.bank = backup;
                    return Err(e);
                }
            }
        }

        if let Some((mut k_inv, slots)) = working {
            k_inv.symmetrize();
            self.k_inv = k_inv;
            self.slots = slots;
        }
        self.finish_insert(plan)
    }

    fn finish_insert(&mut self, plan: Vec<usize>) -> Result<Vec<usize>> {
        self.generation += 1;
        self.updates_since_refresh += 1;
        if self.updates_since_refresh >= self.config.refresh_period {
            self.rebuild()?;
        }
        Ok(plan)
    }

    fn replace_in_place(&mut self, feats: &DenseMatrix<T>, class_ids: &[usize], pos: &[usize]) -> Result<()> {
        self.bank.insert_batch(feats, class_ids)?;
        let bank_rows: Vec<&[T]> = self.slots.iter().map(|&s| self.bank.feature(s)).collect();
        let new_rows: Vec<&[T]> = feats.row_iter().collect();
        let kernel = &self.config.kernel;
        let c = cross_kernel(kernel, &bank_rows, &new_rows);
        let mut d = cross_kernel(kernel, &new_rows, &new_rows);
        d.add_to_diagonal(self.config.noise());
        let rep = plan_replacement(&self.k_inv, pos, &c, &d)?;
        rep.apply(&mut self.k_inv);
        self.k_inv.symmetrize();
        Ok(())
    }

    /// One rank update with distinct slots; writes the group into the bank.
    fn apply_group(
        bank: &mut MemoryBank<T>,
        config: &GpConfig<T>,
        prev_inv: &DenseMatrix<T>,
        prev_slots: &[usize],
        feats: &DenseMatrix<T>,
        class_ids: &[usize],
    ) -> Result<(DenseMatrix<T>, Vec<usize>)> {
        let written = bank.insert_batch(feats, class_ids)?;
        let mut removed_pos = Vec::new();
        let mut replaced = vec![false; prev_slots.len()];
        for &s in &written {
            if let Ok(p) = prev_slots.binary_search(&s) {
                removed_pos.push(p);
                replaced[p] = true;
            }
        }
        let keep_pos: Vec<usize> = (0..prev_slots.len()).filter(|&p| !replaced[p]).collect();
        let a_inv = if keep_pos.is_empty() {
            DenseMatrix::zeros(0, 0)
        } else {
            downdate_gathered(prev_inv, &keep_pos, &removed_pos)?
        };

        let new_slots = bank.occupied_slots();
        let kept_rows: Vec<&[T]> = keep_pos
            .iter()
            .map(|&p| bank.feature(prev_slots[p]))
            .collect();
        let new_rows: Vec<&[T]> = feats.row_iter().collect();
        let kernel = &config.kernel;
        let c = cross_kernel(kernel, &kept_rows, &new_rows);
        let mut d = cross_kernel(kernel, &new_rows, &new_rows);
        d.add_to_diagonal(config.noise());

        let position = |slot: usize| new_slots.binary_search(&slot).expect("occupied slot");
        let old_dest: Vec<usize> = keep_pos.iter().map(|&p| position(prev_slots[p])).collect();
        let new_dest: Vec<usize> = written.iter().map(|&s| position(s)).collect();
        let k_inv = assemble_with_layout(a_inv, &c, &d, &old_dest, &new_dest)?;
        Ok((k_inv, new_slots))
    }

    /// `λ · k(query, h_Q) · K⁻¹ · y_Q`.
    pub fn posterior_logits(&self, query: &DenseMatrix<T>) -> Result<Posterior<T>> {
        if query.cols() != self.bank.dim() {
            return Err(Error::dims(format!(
                "query dimension {} differs from bank dimension {}",
                query.cols(),
                self.bank.dim()
            )));
        }
        let n = self.slots.len();
        let classes = self.bank.num_classes();
        // K⁻¹·y_Q: y_Q is one-hot, so each column is a sum of K⁻¹ columns
        let mut weights = DenseMatrix::zeros(n, classes);
        let labels: Vec<usize> = self
            .slots
            .iter()
            .map(|&s| self.bank.class_of(s).expect("occupied"))
            .collect();
        for i in 0..n {
            let src = self.k_inv.row(i);
            let dst = weights.row_mut(i);
            for (&v, &c) in src.iter().zip(&labels) {
                dst[c] = dst[c] + v;
            }
        }
        let bank_rows: Vec<&[T]> = self.slots.iter().map(|&s| self.bank.feature(s)).collect();
        let query_rows: Vec<&[T]> = query.row_iter().collect();
        let kq = cross_kernel(&self.config.kernel, &query_rows, &bank_rows);
        let mut logits = DenseMatrix::zeros(query.rows(), classes);
        gemm(
            self.config.lambda,
            kq.view(),
            weights.view(),
            logits.as_mut_slice(),
            0,
            classes,
            Triangle::Full,
        );
        logits.ensure_finite("posterior logits")?;
        Ok(Posterior {
            logits,
            generation: self.generation,
        })
    }
}

/// Splits `slots` into maximal consecutive runs without repeated entries.
fn distinct_runs(slots: &[usize]) -> Vec<(usize, usize)> {
    let mut runs = Vec::new();
    let mut start = 0;
    let mut seen = std::collections::HashSet::new();
    for (i, &s) in slots.iter().enumerate() {
        if !seen.insert(s) {
            runs.push((start, i));
            start = i;
            seen.clear();
            seen.insert(s);
        }
    }
    if start < slots.len() {
        runs.push((start, slots.len()));
    }
    runs
}

#[cfg(test)]
mod tests;
