//! Data-parallel training: K child networks, one shard of the training set
//! each, trained concurrently and merged by parameter averaging.
//!
//! Training proceeds in epochs separated by a barrier. Within an epoch the K
//! child tasks are pulled off a queue by at most `workers` threads; a child is
//! only ever touched by the thread that popped it. At the barrier the children
//! are averaged into `combined` and the observer sees a read-only snapshot.
//! Children keep training from their own parameters; the last combined
//! snapshot is the final model.
//!
//! A child's update sequence depends only on its own parameters, seed and
//! shard, so the result is independent of `workers` and of thread timing.

use std::collections::VecDeque;
use std::sync::Mutex;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::activation::ActivationKind;
use crate::combine::Combiner;
use crate::dataset::{split_order, Dataset, Shard};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::metrics;
use crate::network::{EpochStats, GradientMode, Network, NetworkConfig};
use crate::trainable::TrainableNetwork;

/// Stream for the one-off global shuffle that precedes sharding.
const SHARD_STREAM: u64 = 2;

#[derive(Debug, Clone)]
pub struct ParallelNetwork {
    children: Vec<Network>,
    combined: Network,
    combiner: Combiner,
    workers: usize,
    seed: u64,
}

/// What a child reported for the epoch that just ended.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChildReport {
    pub index: usize,
    /// Total epochs this child has completed, read at the barrier.
    pub epochs_completed: usize,
    pub stats: EpochStats,
}

/// Read-only view handed to the observer at each epoch barrier.
#[derive(Debug)]
pub struct EpochSnapshot<'a> {
    /// 1-based epoch within the current training call.
    pub epoch: usize,
    pub combined: &'a Network,
    pub children: &'a [Network],
    pub reports: &'a [ChildReport],
}

impl EpochSnapshot<'_> {
    pub fn mean_child_cost(&self) -> f64 {
        self.reports.iter().map(|r| r.stats.mean_cost).sum::<f64>() / self.reports.len() as f64
    }
}

impl ParallelNetwork {
    /// `k` deep copies of `base`; the combined network starts as a copy too.
    pub fn replicate(base: &Network, k: usize, workers: usize) -> Result<Self> {
        check_counts(k, workers)?;
        Ok(ParallelNetwork {
            children: vec![base.clone(); k],
            combined: base.clone(),
            combiner: Combiner::Average,
            workers,
            seed: base.config().seed,
        })
    }

    /// `k` independently initialized children with seeds `seed+1 ..= seed+k`.
    pub fn spawn_fresh(config: &NetworkConfig, k: usize, workers: usize) -> Result<Self> {
        check_counts(k, workers)?;
        config.validate()?;
        let children = (1..=k as u64)
            .map(|i| {
                Network::init(NetworkConfig {
                    seed: config.seed.wrapping_add(i),
                    ..config.clone()
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let combined = Combiner::Average.combine(&children)?;
        Ok(ParallelNetwork {
            children,
            combined,
            combiner: Combiner::Average,
            workers,
            seed: config.seed,
        })
    }

    pub fn with_combiner(mut self, combiner: Combiner) -> Self {
        self.combiner = combiner;
        self
    }

    pub fn children(&self) -> &[Network] {
        &self.children
    }

    pub fn children_mut(&mut self) -> &mut [Network] {
        &mut self.children
    }

    pub fn combined(&self) -> &Network {
        &self.combined
    }

    pub fn into_combined(self) -> Network {
        self.combined
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    pub fn set_workers(&mut self, workers: usize) -> Result<()> {
        check_counts(self.children.len(), workers)?;
        self.workers = workers;
        Ok(())
    }

    pub fn combiner(&self) -> Combiner {
        self.combiner
    }

    /// Merges the children with the configured combiner. Children are untouched.
    pub fn combine(&self) -> Result<Network> {
        self.combiner.combine(&self.children)
    }

    /// The fixed shard assignment used by [`train_parallel`](Self::train_parallel):
    /// one seeded global shuffle, then contiguous slices.
    pub fn shards_for(&self, data: &Dataset) -> Result<Vec<Shard>> {
        let k = self.children.len();
        if data.len() < k {
            return Err(Error::invalid(format!(
                "{} instances cannot feed {k} children",
                data.len()
            )));
        }
        let mut order: Vec<usize> = (0..data.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(SHARD_STREAM);
        order.shuffle(&mut rng);
        split_order(&order, k)
    }

    /// Shards `data` across the children and trains for `epochs`, calling
    /// `observer` at every epoch barrier.
    pub fn train_parallel<F>(&mut self, data: &Dataset, epochs: usize, observer: F) -> Result<()>
    where
        F: FnMut(&EpochSnapshot<'_>) -> Result<()>,
    {
        let shards = self.shards_for(data)?;
        self.train_on_shards(data, &shards, epochs, observer)
    }

    /// Like [`train_parallel`](Self::train_parallel) with an explicit shard per child.
    pub fn train_on_shards<F>(
        &mut self,
        data: &Dataset,
        shards: &[Shard],
        epochs: usize,
        mut observer: F,
    ) -> Result<()>
    where
        F: FnMut(&EpochSnapshot<'_>) -> Result<()>,
    {
        if shards.len() != self.children.len() {
            return Err(Error::invalid(format!(
                "{} shards for {} children",
                shards.len(),
                self.children.len()
            )));
        }
        for (i, (shard, child)) in shards.iter().zip(&self.children).enumerate() {
            let batch = child.config().batch_size;
            if shard.len() < batch {
                return Err(Error::invalid(format!(
                    "shard {i} holds {} instances, fewer than the batch size {batch}; \
                     use a smaller batch or fewer children",
                    shard.len()
                )));
            }
        }
        for epoch in 1..=epochs {
            let stats = run_epoch(&mut self.children, data, shards, self.workers)?;
            self.combined = self.combine()?;
            let reports: Vec<ChildReport> = stats
                .into_iter()
                .enumerate()
                .map(|(index, stats)| ChildReport {
                    index,
                    epochs_completed: self.children[index].epochs_trained(),
                    stats,
                })
                .collect();
            observer(&EpochSnapshot {
                epoch,
                combined: &self.combined,
                children: &self.children,
                reports: &reports,
            })?;
        }
        Ok(())
    }

    /// Arithmetic mean of the children's individual test accuracies.
    pub fn evaluate_children_mean(&self, test: &Dataset) -> Result<f64> {
        children_mean_accuracy(&self.children, test)
    }
}

pub fn children_mean_accuracy(children: &[Network], test: &Dataset) -> Result<f64> {
    let mut total = 0.0;
    for child in children {
        total += metrics::accuracy(child, test)?;
    }
    Ok(total / children.len() as f64)
}

fn check_counts(k: usize, workers: usize) -> Result<()> {
    let mut problems = Vec::new();
    if k < 2 {
        problems.push(format!(
            "a parallel network needs at least two children, got {k}"
        ));
    }
    if workers == 0 {
        problems.push("worker count must be positive".to_string());
    }
    if problems.is_empty() {
        Ok(())
    } else {
        Err(Error::Validation(problems))
    }
}

type Task<'a> = (usize, &'a mut Network, &'a Shard);

/// One epoch for every child on a pool of at most `workers` threads.
fn run_epoch(
    children: &mut [Network],
    data: &Dataset,
    shards: &[Shard],
    workers: usize,
) -> Result<Vec<EpochStats>> {
    let k = children.len();
    let tasks: VecDeque<Task<'_>> = children
        .iter_mut()
        .zip(shards)
        .enumerate()
        .map(|(i, (net, shard))| (i, net, shard))
        .collect();
    let queue = Mutex::new(tasks);
    let results: Mutex<Vec<Option<Result<EpochStats>>>> = Mutex::new((0..k).map(|_| None).collect());

    let work = || loop {
        let task = queue.lock().unwrap().pop_front();
        let Some((i, net, shard)) = task else { break };
        let mode = GradientMode::MiniBatch(net.config().batch_size);
        let outcome = net.train_epoch_on(data, &shard.indices, mode);
        results.lock().unwrap()[i] = Some(outcome);
    };

    let threads = workers.min(k);
    if threads <= 1 {
        work();
    } else {
        std::thread::scope(|s| {
            for _ in 0..threads {
                s.spawn(work);
            }
        });
    }
    results
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|r| r.expect("every child task ran"))
        .collect()
}

impl TrainableNetwork for ParallelNetwork {
    /// Returns, per epoch, the children's stats averaged.
    fn train(&mut self, data: &Dataset, epochs: usize) -> Result<Vec<EpochStats>> {
        let mut out = Vec::with_capacity(epochs);
        self.train_parallel(data, epochs, |snap| {
            let n = snap.reports.len();
            out.push(EpochStats {
                epoch: snap.epoch,
                mean_cost: snap.mean_child_cost(),
                updates: snap.reports.iter().map(|r| r.stats.updates).sum::<usize>() / n,
                instances: snap.reports.iter().map(|r| r.stats.instances).sum(),
            });
            Ok(())
        })?;
        Ok(out)
    }

    fn output(&self, input: &Matrix) -> Result<Matrix> {
        self.combined.output(input)
    }

    fn output_activation(&self) -> ActivationKind {
        self.combined.config().output_activation()
    }
}
