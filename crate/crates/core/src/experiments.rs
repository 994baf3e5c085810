//! Experiment presets: single runs, the activation and child-count sweeps,
//! and the worker-count benchmark. Every preset returns [`Metrics`] rows with
//! the same CSV schema; the caller decides where they go.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::activation::ActivationKind;
use crate::checkpoint::save_parameters;
use crate::config::{ChildInit, RunConfig};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::metrics::{self, ConfidenceKind, Metrics};
use crate::network::{GradientMode, Network};
#[cfg(test)]
use crate::network::NetworkConfig;
use crate::parallel::ParallelNetwork;
use crate::trainable::TrainableNetwork;

/// Hidden activations compared by [`sweep_activations`], in output order.
pub const SWEEP_ACTIVATIONS: [&str; 4] = ["tanh", "leaky-relu", "relu", "sigmoid"];

/// Child count of the parallel arm of the activation sweep.
pub const SWEEP_ACTIVATION_CHILDREN: usize = 10;

/// Learning rate used by the child-count sweep.
pub const SWEEP_CHILDREN_LEARNING_RATE: f64 = 0.1;

/// A finished model.
#[derive(Debug, Clone)]
pub enum Trained {
    Sequential(Network),
    Parallel(ParallelNetwork),
}

impl Trained {
    /// The network that answers queries: the SNN or the combined PNN.
    pub fn network(&self) -> &Network {
        match self {
            Trained::Sequential(n) => n,
            Trained::Parallel(p) => p.combined(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub records: Vec<Metrics>,
    pub model: Trained,
}

/// One row of the worker benchmark.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchRow {
    pub workers: usize,
    pub mean_seconds: f64,
    /// Mean time as a percentage of the 1-worker mean.
    pub percent: f64,
}

/// Test-set metrics with the configured confidence reading.
pub fn score<N: TrainableNetwork>(net: &N, test: &Dataset, kind: ConfidenceKind) -> Result<Metrics> {
    let mut m = net.evaluate(test)?;
    if kind == ConfidenceKind::TrueClass && net.output_activation() == ActivationKind::Softmax {
        m.confidence = metrics::confidence_of(net, test, kind)?;
    }
    Ok(m)
}

/// Field-wise mean of the children's individual test metrics.
pub fn children_mean_metrics(children: &[Network], test: &Dataset, kind: ConfidenceKind) -> Result<Metrics> {
    let mut sum = Metrics::default();
    for child in children {
        let m = score(child, test, kind)?;
        sum.accuracy += m.accuracy;
        sum.confidence += m.confidence;
        sum.cost += m.cost;
    }
    let k = children.len() as f64;
    Ok(Metrics {
        accuracy: sum.accuracy / k,
        confidence: sum.confidence / k,
        cost: sum.cost / k,
        ..Metrics::default()
    })
}

pub fn build_parallel(cfg: &RunConfig) -> Result<ParallelNetwork> {
    let p = &cfg.parallel;
    let pnn = match p.init {
        ChildInit::Replicate => {
            let base = Network::init(cfg.network.clone())?;
            ParallelNetwork::replicate(&base, p.children, p.workers)?
        }
        ChildInit::Fresh => ParallelNetwork::spawn_fresh(&cfg.network, p.children, p.workers)?,
    };
    Ok(pnn.with_combiner(p.combiner))
}

fn log_row(log: &mut dyn Write, m: &Metrics, epochs: usize) {
    let _ = writeln!(
        log,
        "{:<16} epoch {:>3}/{:<3} accuracy {:.4}  confidence {:.4}  cost {:.4}  {:.2}s",
        m.label, m.epoch, epochs, m.accuracy, m.confidence, m.cost, m.wall_seconds
    );
}

fn due(epoch: usize, epochs: usize, every: usize) -> bool {
    epoch.is_multiple_of(every) || epoch == epochs
}

/// Trains the network described by `cfg` on `train`, scoring the model on
/// `test` every `eval_every` epochs and after the last one.
/// `wall_seconds` is cumulative training time, evaluation excluded.
///
/// With one child this is the sequential path; no parallel network is built.
/// When `children_mean` is set, PNN runs also emit rows labelled
/// `<label>-cn-mean` holding the children's mean metrics.
pub fn run(
    cfg: &RunConfig,
    train: &Dataset,
    test: &Dataset,
    label: &str,
    children_mean: bool,
    log: &mut dyn Write,
) -> Result<RunOutcome> {
    cfg.validate()?;
    let epochs = cfg.network.epochs;
    let every = cfg.run.eval_every;
    let kind = cfg.run.confidence;
    let mut records = Vec::new();

    if cfg.is_sequential() {
        let mut net = Network::init(cfg.network.clone())?;
        let mode = GradientMode::MiniBatch(cfg.network.batch_size);
        let mut elapsed = 0.0;
        for epoch in 1..=epochs {
            let (stats, secs) = metrics::timed(|| net.train_epoch(train, mode));
            stats?;
            elapsed += secs;
            if due(epoch, epochs, every) {
                let m = score(&net, test, kind)?.with_run(label, epoch, elapsed);
                log_row(log, &m, epochs);
                records.push(m);
            }
        }
        return Ok(RunOutcome {
            records,
            model: Trained::Sequential(net),
        });
    }

    let mut pnn = build_parallel(cfg)?;
    let mean_label = format!("{label}-cn-mean");
    let mut elapsed = 0.0;
    let mut lap = Instant::now();
    pnn.train_parallel(train, epochs, |snap| {
        elapsed += lap.elapsed().as_secs_f64();
        if due(snap.epoch, epochs, every) {
            let m = score(snap.combined, test, kind)?.with_run(label, snap.epoch, elapsed);
            log_row(log, &m, epochs);
            records.push(m);
            if children_mean {
                let m = children_mean_metrics(snap.children, test, kind)?
                    .with_run(mean_label.as_str(), snap.epoch, elapsed);
                log_row(log, &m, epochs);
                records.push(m);
            }
        }
        lap = Instant::now();
        Ok(())
    })?;
    Ok(RunOutcome {
        records,
        model: Trained::Parallel(pnn),
    })
}

/// Where [`cmd_train`] puts checkpoints when the config names no directory.
pub fn checkpoint_dir(cfg: &RunConfig) -> PathBuf {
    cfg.run.checkpoint_dir.clone().unwrap_or_else(|| {
        cfg.run
            .output_csv
            .parent()
            .unwrap_or(Path::new(""))
            .join("checkpoints")
    })
}

/// Writes the final parameters: `snn.bin`, or `combined.bin` plus
/// `child-NN.bin` per child. Returns the paths written.
pub fn write_checkpoints(model: &Trained, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    match model {
        Trained::Sequential(net) => {
            let path = dir.join("snn.bin");
            save_parameters(net, &path)?;
            written.push(path);
        }
        Trained::Parallel(pnn) => {
            let path = dir.join("combined.bin");
            save_parameters(pnn.combined(), &path)?;
            written.push(path);
            for (i, child) in pnn.children().iter().enumerate() {
                let path = dir.join(format!("child-{i:02}.bin"));
                save_parameters(child, &path)?;
                written.push(path);
            }
        }
    }
    Ok(written)
}

pub fn train_label(cfg: &RunConfig) -> String {
    if cfg.is_sequential() {
        "snn".to_string()
    } else {
        format!("pnn-{}", cfg.parallel.children)
    }
}

/// Single training run; writes the CSV and the final checkpoints.
pub fn cmd_train(cfg: &RunConfig, train: &Dataset, test: &Dataset, log: &mut dyn Write) -> Result<Vec<Metrics>> {
    let outcome = run(cfg, train, test, &train_label(cfg), false, log)?;
    metrics::emit_csv(&outcome.records, &cfg.run.output_csv)?;
    let dir = checkpoint_dir(cfg);
    let written = write_checkpoints(&outcome.model, &dir)?;
    let _ = writeln!(
        log,
        "wrote {} and {} checkpoint file(s) under {}",
        cfg.run.output_csv.display(),
        written.len(),
        dir.display()
    );
    Ok(outcome.records)
}

fn hidden_activation(name: &str, cfg: &RunConfig) -> Result<ActivationKind> {
    let slope = cfg.network.activations.iter().find_map(|a| match a {
        ActivationKind::LeakyRelu { slope } => Some(*slope),
        _ => None,
    });
    let kind: ActivationKind = name.parse()?;
    Ok(match (kind, slope) {
        (ActivationKind::LeakyRelu { .. }, Some(slope)) => ActivationKind::LeakyRelu { slope },
        _ => kind,
    })
}

/// Each hidden activation in [`SWEEP_ACTIVATIONS`] as an SNN and as a 10-child
/// PNN, with softmax output and the configured learning rate. Labels are
/// `snn-<activation>` and `pnn10-<activation>`.
pub fn sweep_activations(
    cfg: &RunConfig,
    train: &Dataset,
    test: &Dataset,
    log: &mut dyn Write,
) -> Result<Vec<Metrics>> {
    let mut records = Vec::new();
    for name in SWEEP_ACTIVATIONS {
        let hidden = hidden_activation(name, cfg)?;
        let mut network = cfg.network.with_hidden_activation(hidden);
        if let Some(last) = network.activations.last_mut() {
            *last = ActivationKind::Softmax;
        }
        for children in [1, SWEEP_ACTIVATION_CHILDREN] {
            let mut run_cfg = cfg.clone();
            run_cfg.network = network.clone();
            run_cfg.parallel.children = children;
            run_cfg.parallel.workers = cfg.parallel.workers.min(children).max(1);
            let label = if children == 1 {
                format!("snn-{name}")
            } else {
                format!("pnn{children}-{name}")
            };
            records.extend(run(&run_cfg, train, test, &label, false, log)?.records);
        }
    }
    metrics::emit_csv(&records, &cfg.run.output_csv)?;
    Ok(records)
}

/// PNNs for every count in `cfg.sweep.children` at learning rate 0.1.
/// Emits `pnn-<k>` rows for the combined network and `pnn-<k>-cn-mean` rows
/// for the children's mean.
pub fn sweep_children(
    cfg: &RunConfig,
    train: &Dataset,
    test: &Dataset,
    log: &mut dyn Write,
) -> Result<Vec<Metrics>> {
    let mut records = Vec::new();
    for &k in &cfg.sweep.children {
        let mut run_cfg = cfg.clone();
        run_cfg.network.learning_rate = SWEEP_CHILDREN_LEARNING_RATE;
        run_cfg.parallel.children = k;
        run_cfg.parallel.workers = cfg.parallel.workers.min(k).max(1);
        records.extend(run(&run_cfg, train, test, &format!("pnn-{k}"), true, log)?.records);
    }
    metrics::emit_csv(&records, &cfg.run.output_csv)?;
    Ok(records)
}

/// Worker counts the benchmark visits for a given child count.
pub fn bench_worker_counts(cfg: &RunConfig) -> Vec<usize> {
    let mut counts: Vec<usize> = cfg
        .bench
        .workers
        .iter()
        .copied()
        .filter(|&w| w >= 1 && w <= cfg.bench.children)
        .collect();
    counts.sort_unstable();
    counts.dedup();
    if counts.first() != Some(&1) {
        counts.insert(0, 1);
    }
    counts
}

/// Times a short PNN training job for each worker count. The same job
/// (children, seed, epochs) is repeated `bench.repeats` times per count.
/// CSV rows are labelled `workers-<n>` with the mean seconds in
/// `wall_seconds` and the last repeat's test metrics.
pub fn bench_workers(
    cfg: &RunConfig,
    train: &Dataset,
    test: &Dataset,
    log: &mut dyn Write,
) -> Result<(Vec<BenchRow>, Vec<Metrics>)> {
    let b = &cfg.bench;
    let mut job = cfg.clone();
    job.parallel.children = b.children;
    job.network.epochs = b.epochs;

    let mut rows: Vec<BenchRow> = Vec::new();
    let mut records = Vec::new();
    for workers in bench_worker_counts(cfg) {
        job.parallel.workers = workers;
        let mut total = 0.0;
        let mut last = None;
        for _ in 0..b.repeats {
            let mut pnn = build_parallel(&job)?;
            let (outcome, secs) = metrics::timed(|| pnn.train_parallel(train, b.epochs, |_| Ok(())));
            outcome?;
            total += secs;
            last = Some(pnn);
        }
        let mean_seconds = total / b.repeats as f64;
        let baseline = rows.first().map_or(mean_seconds, |r| r.mean_seconds);
        let row = BenchRow {
            workers,
            mean_seconds,
            percent: 100.0 * mean_seconds / baseline,
        };
        let _ = writeln!(
            log,
            "workers {:>3}  children {:>3}  mean {:.3}s  {:.1}%",
            workers, b.children, row.mean_seconds, row.percent
        );
        rows.push(row);
        let pnn = last.expect("at least one repeat");
        records.push(score(&pnn, test, cfg.run.confidence)?.with_run(
            format!("workers-{workers}"),
            b.epochs,
            mean_seconds,
        ));
    }
    metrics::emit_csv(&records, &cfg.run.output_csv)?;
    Ok((rows, records))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Two separable blobs in 4 dimensions, 3 classes.
    fn blobs(n: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let classes: Vec<usize> = (0..n).map(|i| i % 3).collect();
        let inputs = Matrix::from_fn(4, n, |r, c| {
            let centre = if r == classes[c] { 0.8 } else { 0.2 };
            (centre + rng.random_range(-0.15..0.15f64)).clamp(0.0, 1.0)
        });
        Dataset::from_class_indices(inputs, 3, &classes).unwrap()
    }

    fn small(children: usize) -> RunConfig {
        let mut cfg = RunConfig {
            network: NetworkConfig {
                layer_sizes: vec![4, 6, 3],
                activations: vec![ActivationKind::Relu, ActivationKind::Softmax],
                learning_rate: 0.5,
                batch_size: 5,
                epochs: 4,
                seed: 3,
                weight_init: Default::default(),
            },
            ..RunConfig::default()
        };
        cfg.parallel.children = children;
        cfg.parallel.workers = children.min(2);
        cfg
    }

    #[test]
    fn eval_every_thins_rows_but_keeps_last() {
        let mut cfg = small(1);
        cfg.network.epochs = 5;
        cfg.run.eval_every = 2;
        let out = run(&cfg, &blobs(60, 1), &blobs(30, 2), "x", false, &mut std::io::sink()).unwrap();
        let epochs: Vec<usize> = out.records.iter().map(|m| m.epoch).collect();
        assert_eq!(epochs, vec![2, 4, 5]);
        assert!(out.records.windows(2).all(|w| w[0].wall_seconds <= w[1].wall_seconds));
    }

    #[test]
    fn sequential_path_builds_no_parallel_network() {
        let out = run(&small(1), &blobs(60, 1), &blobs(30, 2), "snn", false, &mut std::io::sink()).unwrap();
        assert!(matches!(out.model, Trained::Sequential(_)));
        assert!(out.records.last().unwrap().accuracy > 0.9);
    }

    #[test]
    fn parallel_run_emits_combined_and_mean_rows() {
        let out = run(&small(3), &blobs(90, 1), &blobs(30, 2), "pnn-3", true, &mut std::io::sink()).unwrap();
        let labels: Vec<&str> = out.records.iter().map(|m| m.label.as_str()).collect();
        assert_eq!(labels.len(), 8);
        assert_eq!(labels.iter().filter(|l| **l == "pnn-3-cn-mean").count(), 4);
        match out.model {
            Trained::Parallel(p) => assert_eq!(p.children().len(), 3),
            _ => panic!("expected a parallel model"),
        }
    }

    #[test]
    fn fixed_seed_runs_repeat_except_timing() {
        let strip = |v: Vec<Metrics>| -> Vec<Metrics> {
            v.into_iter().map(|m| Metrics { wall_seconds: 0.0, ..m }).collect()
        };
        for k in [1, 3] {
            let a = run(&small(k), &blobs(90, 1), &blobs(30, 2), "r", false, &mut std::io::sink()).unwrap();
            let b = run(&small(k), &blobs(90, 1), &blobs(30, 2), "r", false, &mut std::io::sink()).unwrap();
            assert_eq!(strip(a.records), strip(b.records));
            assert_eq!(a.model.network().parameter_bits(), b.model.network().parameter_bits());
        }
    }

    #[test]
    fn replicate_init_starts_children_identical() {
        let p = build_parallel(&small(3)).unwrap();
        let bits = p.children()[0].parameter_bits();
        assert!(p.children().iter().all(|c| c.parameter_bits() == bits));
        let mut fresh = small(3);
        fresh.parallel.init = ChildInit::Fresh;
        let p = build_parallel(&fresh).unwrap();
        assert_ne!(p.children()[0].parameter_bits(), p.children()[1].parameter_bits());
    }

    #[test]
    fn activation_sweep_has_eight_softmax_runs() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = small(1);
        cfg.network.epochs = 1;
        cfg.network.batch_size = 3;
        cfg.run.output_csv = dir.path().join("act.csv");
        let records = sweep_activations(&cfg, &blobs(60, 1), &blobs(30, 2), &mut std::io::sink()).unwrap();
        let mut labels: Vec<&str> = records.iter().map(|m| m.label.as_str()).collect();
        labels.dedup();
        assert_eq!(labels.len(), 8);
        assert!(labels.contains(&"pnn10-leaky-relu"));
        assert!(records.iter().all(|m| m.confidence.is_finite()));
        assert!(cfg.run.output_csv.exists());
    }

    #[test]
    fn children_sweep_forces_learning_rate() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = small(1);
        cfg.network.epochs = 2;
        cfg.sweep.children = vec![2, 3];
        cfg.run.output_csv = dir.path().join("cn.csv");
        let records = sweep_children(&cfg, &blobs(60, 1), &blobs(30, 2), &mut std::io::sink()).unwrap();
        assert_eq!(records.len(), 2 * 2 * 2);
        let text = std::fs::read_to_string(&cfg.run.output_csv).unwrap();
        assert!(text.starts_with(metrics::CSV_HEADER));
        assert!(text.contains("pnn-3-cn-mean,2,"));
    }

    #[test]
    fn bench_counts_and_percentages() {
        let mut cfg = small(1);
        cfg.bench.children = 6;
        cfg.bench.workers = vec![4, 2, 8, 2];
        assert_eq!(bench_worker_counts(&cfg), vec![1, 2, 4]);
        let dir = tempfile::tempdir().unwrap();
        cfg.bench.repeats = 1;
        cfg.bench.epochs = 1;
        cfg.run.output_csv = dir.path().join("bench.csv");
        let (rows, records) = bench_workers(&cfg, &blobs(60, 1), &blobs(30, 2), &mut std::io::sink()).unwrap();
        assert_eq!(rows[0].percent, 100.0);
        assert_eq!(rows.len(), 3);
        assert_eq!(records[2].label, "workers-4");
        // Same job regardless of worker count.
        assert_eq!(records[0].accuracy, records[2].accuracy);
    }

    #[test]
    fn checkpoints_one_file_per_child_plus_combined() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = small(3);
        cfg.network.epochs = 1;
        cfg.run.output_csv = dir.path().join("out/run.csv");
        let records = cmd_train(&cfg, &blobs(60, 1), &blobs(30, 2), &mut std::io::sink()).unwrap();
        assert_eq!(records.len(), 1);
        let ckpt = dir.path().join("out/checkpoints");
        for name in ["combined.bin", "child-00.bin", "child-01.bin", "child-02.bin"] {
            assert!(ckpt.join(name).is_file(), "{name}");
        }
    }
}
