//! Labeled datasets, mini-batches, and the seeded mini-batch stream.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::Tensor;

/// `inputs` is `batch_size × input_dim`; one label per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub inputs: Tensor,
    pub labels: Vec<usize>,
}

impl Batch {
    pub fn new(inputs: Tensor, labels: Vec<usize>) -> Result<Self> {
        if inputs.shape().len() != 2 {
            return Err(Error::DimensionMismatch(format!(
                "batch inputs must be rank 2, got shape {:?}",
                inputs.shape()
            )));
        }
        if inputs.shape()[0] != labels.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} input rows but {} labels",
                inputs.shape()[0],
                labels.len()
            )));
        }
        Ok(Self { inputs, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.inputs.shape()[1]
    }
}

/// A labeled dataset with a fixed class count.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    batch: Batch,
    num_classes: usize,
}

impl Dataset {
    pub fn new(inputs: Tensor, labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        let batch = Batch::new(inputs, labels)?;
        if let Some(&bad) = batch.labels.iter().find(|&&l| l >= num_classes) {
            return Err(Error::DimensionMismatch(format!(
                "label {bad} outside [0, {num_classes})"
            )));
        }
        Ok(Self { batch, num_classes })
    }

    pub fn len(&self) -> usize {
        self.batch.len()
    }

    pub fn is_empty(&self) -> bool {
        self.batch.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.batch.input_dim()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn labels(&self) -> &[usize] {
        &self.batch.labels
    }

    pub fn inputs(&self) -> &Tensor {
        &self.batch.inputs
    }

    /// The whole dataset as one batch.
    pub fn as_batch(&self) -> &Batch {
        &self.batch
    }

    /// Gathers the given rows into a batch.
    pub fn gather(&self, rows: &[usize]) -> Batch {
        let d = self.input_dim();
        let src = self.batch.inputs.data();
        let mut data = Vec::with_capacity(rows.len() * d);
        let mut labels = Vec::with_capacity(rows.len());
        for &r in rows {
            data.extend_from_slice(&src[r * d..(r + 1) * d]);
            labels.push(self.batch.labels[r]);
        }
        let inputs = Tensor::from_vec(&[rows.len(), d], data).expect("rows of a valid dataset");
        Batch { inputs, labels }
    }

    /// A seeded sample of at most `size` rows, in ascending row order.
    pub fn sample(&self, size: usize, rng: &mut Rng) -> Batch {
        if size >= self.len() {
            return self.batch.clone();
        }
        let mut rows: Vec<usize> = (0..self.len()).collect();
        rng.shuffle(&mut rows);
        rows.truncate(size);
        rows.sort_unstable();
        self.gather(&rows)
    }
}

/// Endless stream of shuffled mini-batches; reshuffles at each epoch boundary.
#[derive(Debug, Clone)]
pub struct MiniBatchStream {
    dataset: Dataset,
    batch_size: usize,
    rng: Rng,
    order: Vec<usize>,
    cursor: usize,
}

impl MiniBatchStream {
    pub fn new(dataset: Dataset, batch_size: usize, rng: Rng) -> Result<Self> {
        if dataset.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if batch_size == 0 {
            return Err(crate::error::invalid("batch_size", "must be positive"));
        }
        let order = (0..dataset.len()).collect();
        let mut stream = Self {
            dataset,
            batch_size,
            rng,
            order,
            cursor: 0,
        };
        stream.reshuffle();
        Ok(stream)
    }

    fn reshuffle(&mut self) {
        self.rng.shuffle(&mut self.order);
        self.cursor = 0;
    }

    pub fn dataset(&self) -> &Dataset {
        &self.dataset
    }

    pub fn batch_size(&self) -> usize {
        self.batch_size
    }

    /// Mini-batch steps in one pass over the data.
    pub fn steps_per_epoch(&self) -> usize {
        self.dataset.len().div_ceil(self.batch_size)
    }

    pub fn rng(&self) -> &Rng {
        &self.rng
    }

    pub fn next_batch(&mut self) -> Batch {
        if self.cursor >= self.order.len() {
            self.reshuffle();
        }
        let end = (self.cursor + self.batch_size).min(self.order.len());
        let batch = self.dataset.gather(&self.order[self.cursor..end]);
        self.cursor = end;
        batch
    }
}
