//! Labelled datasets stored column-per-instance, plus shuffling and sharding.

use std::ops::Range;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Inputs (`input_dim x n`, entries in `[0, 1]`) and one-hot labels
/// (`classes x n`). Column `i` of both is instance `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    inputs: Matrix,
    labels: Matrix,
}

impl Dataset {
    pub fn new(inputs: Matrix, labels: Matrix) -> Result<Self> {
        let mut problems = Vec::new();
        if inputs.cols() != labels.cols() {
            problems.push(format!(
                "inputs have {} instances but labels have {}",
                inputs.cols(),
                labels.cols()
            ));
        }
        if let Some(bad) = inputs.data().iter().find(|x| !(0.0..=1.0).contains(*x)) {
            problems.push(format!("input entry {bad} outside [0, 1]"));
        }
        for c in 0..labels.cols() {
            let col = labels.column_values(c);
            let ones = col.iter().filter(|&&x| x == 1.0).count();
            let zeros = col.iter().filter(|&&x| x == 0.0).count();
            if ones != 1 || zeros != col.len() - 1 {
                problems.push(format!("label column {c} is not one-hot"));
                break;
            }
        }
        if !problems.is_empty() {
            return Err(Error::Validation(problems));
        }
        Ok(Dataset { inputs, labels })
    }

    /// Builds a dataset from class indices rather than one-hot columns.
    pub fn from_class_indices(inputs: Matrix, classes: usize, labels: &[usize]) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::invalid("dataset must not be empty"));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
            return Err(Error::invalid(format!(
                "label {bad} outside 0..{}",
                classes - 1
            )));
        }
        let mut onehot = Matrix::zeros(classes, labels.len());
        for (i, &l) in labels.iter().enumerate() {
            onehot.set(l, i, 1.0);
        }
        Dataset::new(inputs, onehot)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.inputs.cols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn input_dim(&self) -> usize {
        self.inputs.rows()
    }

    pub fn classes(&self) -> usize {
        self.labels.rows()
    }

    pub fn inputs(&self) -> &Matrix {
        &self.inputs
    }

    pub fn labels(&self) -> &Matrix {
        &self.labels
    }

    /// Class index of instance `i`.
    pub fn class_of(&self, i: usize) -> usize {
        (0..self.classes())
            .find(|&r| self.labels.get(r, i) == 1.0)
            .expect("one-hot invariant")
    }

    pub fn class_indices(&self) -> Vec<usize> {
        (0..self.len()).map(|i| self.class_of(i)).collect()
    }

    /// Gathers the listed instances into a batch `(inputs, labels)`.
    pub fn batch(&self, indices: &[usize]) -> (Matrix, Matrix) {
        (
            self.inputs.select_columns(indices),
            self.labels.select_columns(indices),
        )
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let (inputs, labels) = self.batch(indices);
        Dataset { inputs, labels }
    }

    /// Contiguous column range as its own dataset.
    pub fn slice(&self, range: Range<usize>) -> Dataset {
        let idx: Vec<usize> = range.collect();
        self.subset(&idx)
    }

    /// Seeded permutation of the instances.
    pub fn shuffled(&self, seed: u64) -> Dataset {
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        self.subset(&order)
    }
}

/// A read-only view of part of a dataset, as a list of instance indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Shard {
    pub indices: Vec<usize>,
}

impl Shard {
    pub fn whole(n: usize) -> Self {
        Shard {
            indices: (0..n).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Contiguous ranges of sizes `⌈n/k⌉` (the first `n mod k`) and `⌊n/k⌋` (the rest).
pub fn shard_ranges(n: usize, k: usize) -> Result<Vec<Range<usize>>> {
    if k == 0 {
        return Err(Error::invalid("shard count must be positive"));
    }
    if k > n {
        return Err(Error::invalid(format!(
            "cannot split {n} instances into {k} shards"
        )));
    }
    let base = n / k;
    let extra = n % k;
    let mut start = 0;
    Ok((0..k)
        .map(|i| {
            let len = base + usize::from(i < extra);
            let r = start..start + len;
            start += len;
            r
        })
        .collect())
}

/// Splits `data` into `k` contiguous, disjoint shards covering every instance.
pub fn split_shards(data: &Dataset, k: usize) -> Result<Vec<Shard>> {
    split_order(&(0..data.len()).collect::<Vec<_>>(), k)
}

/// Splits an instance ordering (e.g. a global shuffle) into `k` contiguous shards.
pub fn split_order(order: &[usize], k: usize) -> Result<Vec<Shard>> {
    Ok(shard_ranges(order.len(), k)?
        .into_iter()
        .map(|r| Shard {
            indices: order[r].to_vec(),
        })
        .collect())
}
