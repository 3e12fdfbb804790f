//! Fixed-capacity memory bank of labeled feature vectors.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BankMode {
    /// One global queue; the oldest samples are replaced first.
    Fifo,
    /// `capacity / C` slots per class, each class replacing its own oldest sample.
    ClassBalanced,
}

/// Dense copy of the occupied slots, in ascending slot order.
#[derive(Clone, Debug)]
pub struct Snapshot<T> {
    pub features: DenseMatrix<T>,
    /// One-hot rows.
    pub labels: DenseMatrix<T>,
    pub slots: Vec<usize>,
    pub generation: u64,
}

#[derive(Clone, Debug)]
pub struct MemoryBank<T> {
    capacity: usize,
    dim: usize,
    num_classes: usize,
    mode: BankMode,
    features: Vec<T>,
    classes: Vec<Option<usize>>,
    filled: usize,
    /// Occupied slots, oldest first. One queue in fifo mode, one per class otherwise.
    queues: Vec<VecDeque<usize>>,
    generation: u64,
}

impl<T: Scalar> MemoryBank<T> {
    pub fn new(capacity: usize, dim: usize, num_classes: usize, mode: BankMode) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::InvalidCapacity {
                capacity,
                classes: num_classes,
                reason: "capacity must be at least 1",
            });
        }
        if num_classes == 0 {
            return Err(Error::invalid("num_classes", "must be at least 1"));
        }
        if dim == 0 {
            return Err(Error::invalid("dim", "must be at least 1"));
        }
        let queues = match mode {
            BankMode::Fifo => vec![VecDeque::with_capacity(capacity)],
            BankMode::ClassBalanced => {
                if capacity % num_classes != 0 {
                    return Err(Error::InvalidCapacity {
                        capacity,
                        classes: num_classes,
                        reason: "class-balanced capacity must be divisible by the class count",
                    });
                }
                let quota = capacity / num_classes;
                vec![VecDeque::with_capacity(quota); num_classes]
            }
        };
        Ok(Self {
            capacity,
            dim,
            num_classes,
            mode,
            features: vec![T::zero(); capacity * dim],
            classes: vec![None; capacity],
            filled: 0,
            queues,
            generation: 0,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn mode(&self) -> BankMode {
        self.mode
    }

    pub fn filled(&self) -> usize {
        self.filled
    }

    pub fn is_full(&self) -> bool {
        self.filled == self.capacity
    }

    /// Incremented by every successful [`insert_batch`](Self::insert_batch).
    pub fn generation(&self) -> u64 {
        self.generation
    }

    /// Slots owned by each class in class-balanced mode.
    pub fn class_quota(&self) -> Option<usize> {
        match self.mode {
            BankMode::Fifo => None,
            BankMode::ClassBalanced => Some(self.capacity / self.num_classes),
        }
    }

    pub fn feature(&self, slot: usize) -> &[T] {
        &self.features[slot * self.dim..(slot + 1) * self.dim]
    }

    pub fn class_of(&self, slot: usize) -> Option<usize> {
        self.classes[slot]
    }

    pub fn occupied_slots(&self) -> Vec<usize> {
        (0..self.capacity)
            .filter(|&s| self.classes[s].is_some())
            .collect()
    }

    /// Slots that `insert_batch(.., class_ids)` would write, in application order.
    ///
    /// A slot may repeat when a batch cycles through a class (or the whole bank)
    /// more than once; replacements are applied sequentially.
    pub fn plan_slots(&self, class_ids: &[usize]) -> Result<Vec<usize>> {
        for &c in class_ids {
            if c >= self.num_classes {
                return Err(Error::ClassOutOfRange {
                    class: c,
                    classes: self.num_classes,
                });
            }
        }
        let mut queues = self.queues.clone();
        let mut filled = self.filled;
        let mut slots = Vec::with_capacity(class_ids.len());
        for &c in class_ids {
            let slot = match self.mode {
                BankMode::Fifo => {
                    let q = &mut queues[0];
                    let slot = if filled < self.capacity {
                        filled += 1;
                        filled - 1
                    } else {
                        q.pop_front().expect("full bank has a queue")
                    };
                    q.push_back(slot);
                    slot
                }
                BankMode::ClassBalanced => {
                    let quota = self.capacity / self.num_classes;
                    let q = &mut queues[c];
                    let slot = if q.len() < quota {
                        filled += 1;
                        c * quota + q.len()
                    } else if filled == self.capacity {
                        q.pop_front().expect("full class queue")
                    } else {
                        return Err(Error::ClassOverflow { class: c, quota });
                    };
                    q.push_back(slot);
                    slot
                }
            };
            slots.push(slot);
        }
        Ok(slots)
    }

    /// Writes a batch of samples and returns the slot written by each row.
    ///
    /// While the bank is filling, samples are appended; afterwards each sample
    /// replaces the oldest slot (of its class, in class-balanced mode). The batch
    /// is validated as a whole before anything is written.
    pub fn insert_batch(&mut self, feats: &DenseMatrix<T>, class_ids: &[usize]) -> Result<Vec<usize>> {
        if feats.rows() != class_ids.len() {
            return Err(Error::dims(format!(
                "{} feature rows but {} class ids",
                feats.rows(),
                class_ids.len()
            )));
        }
        if feats.cols() != self.dim {
            return Err(Error::dims(format!(
                "features have dimension {}, bank expects {}",
                feats.cols(),
                self.dim
            )));
        }
        if !feats.all_finite() {
            return Err(Error::NonFinite("inserted features"));
        }
        let slots = self.plan_slots(class_ids)?;
        for (row, (&slot, &c)) in slots.iter().zip(class_ids).enumerate() {
            let q = match self.mode {
                BankMode::Fifo => &mut self.queues[0],
                BankMode::ClassBalanced => &mut self.queues[c],
            };
            if self.classes[slot].is_some() {
                let pos = q.iter().position(|&s| s == slot).expect("occupied slot is queued");
                debug_assert_eq!(pos, 0, "replacement always takes the oldest slot");
                q.remove(pos);
            } else {
                self.filled += 1;
            }
            q.push_back(slot);
            self.classes[slot] = Some(c);
            self.features[slot * self.dim..(slot + 1) * self.dim].copy_from_slice(feats.row(row));
        }
        self.generation += 1;
        Ok(slots)
    }

    /// Dense view of the occupied slots.
    pub fn snapshot(&self) -> Result<Snapshot<T>> {
        if self.filled == 0 {
            return Err(Error::EmptyBank);
        }
        let slots = self.occupied_slots();
        let mut features = Vec::with_capacity(slots.len() * self.dim);
        let mut labels = DenseMatrix::zeros(slots.len(), self.num_classes);
        for (i, &s) in slots.iter().enumerate() {
            features.extend_from_slice(self.feature(s));
            labels[(i, self.classes[s].expect("occupied"))] = T::one();
        }
        Ok(Snapshot {
            features: DenseMatrix::from_raw(slots.len(), self.dim, features),
            labels,
            slots,
            generation: self.generation,
        })
    }

    #[cfg(test)]
    fn set_fifo_order(&mut self, oldest_first: Vec<usize>) {
        assert_eq!(self.mode, BankMode::Fifo);
        assert_eq!(oldest_first.len(), self.filled);
        self.queues[0] = oldest_first.into();
    }
}
