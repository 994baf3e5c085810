//! Accuracy, confidence, cost and wall time, and their CSV form.
//!
//! Confidence is the mean, over instances, of the largest output probability
//! (the probability the network gives its own prediction). The alternative
//! reading, probability of the true class, is available through
//! [`ConfidenceKind::TrueClass`].

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Instant;

use crate::activation::ActivationKind;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::network::LOG_EPSILON;
use crate::trainable::TrainableNetwork;

pub const CSV_HEADER: &str = "label,epoch,accuracy,confidence,cost,wall_seconds";

/// Instances per forward pass during evaluation.
const EVAL_CHUNK: usize = 1000;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Metrics {
    pub label: String,
    pub epoch: usize,
    pub accuracy: f64,
    pub confidence: f64,
    pub cost: f64,
    pub wall_seconds: f64,
}

impl Metrics {
    pub fn with_run(mut self, label: impl Into<String>, epoch: usize, wall_seconds: f64) -> Self {
        self.label = label.into();
        self.epoch = epoch;
        self.wall_seconds = wall_seconds;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ConfidenceKind {
    #[default]
    MaxProbability,
    TrueClass,
}

#[derive(Debug, Default)]
struct Tally {
    correct: usize,
    max_prob: f64,
    true_prob: f64,
    cost: f64,
    n: usize,
}

fn tally<N: TrainableNetwork + ?Sized>(net: &N, data: &Dataset) -> Result<Tally> {
    if data.is_empty() {
        return Err(Error::invalid("evaluation set is empty"));
    }
    let mut t = Tally::default();
    let all: Vec<usize> = (0..data.len()).collect();
    for chunk in all.chunks(EVAL_CHUNK) {
        let (x, e) = data.batch(chunk);
        let out = net.output(&x)?;
        if out.shape() != e.shape() {
            return Err(Error::Shape {
                op: "evaluate",
                left: out.shape(),
                right: e.shape(),
            });
        }
        accumulate(&mut t, &out, &e);
    }
    Ok(t)
}

fn accumulate(t: &mut Tally, out: &Matrix, expected: &Matrix) {
    for c in 0..out.cols() {
        let mut best = 0;
        let mut truth = 0;
        for r in 0..out.rows() {
            if out.get(r, c) > out.get(best, c) {
                best = r;
            }
            if expected.get(r, c) == 1.0 {
                truth = r;
            }
        }
        t.correct += usize::from(best == truth);
        t.max_prob += out.get(best, c);
        t.true_prob += out.get(truth, c);
        t.cost -= out.get(truth, c).max(LOG_EPSILON).ln();
        t.n += 1;
    }
}

fn require_softmax<N: TrainableNetwork + ?Sized>(net: &N) -> Result<()> {
    if net.output_activation() != ActivationKind::Softmax {
        return Err(Error::Contract(format!(
            "confidence needs a softmax output layer, found {}",
            net.output_activation()
        )));
    }
    Ok(())
}

/// Fraction of instances whose predicted class equals the label.
pub fn accuracy<N: TrainableNetwork + ?Sized>(net: &N, data: &Dataset) -> Result<f64> {
    let t = tally(net, data)?;
    Ok(t.correct as f64 / t.n as f64)
}

pub fn confidence<N: TrainableNetwork + ?Sized>(net: &N, data: &Dataset) -> Result<f64> {
    confidence_of(net, data, ConfidenceKind::MaxProbability)
}

pub fn confidence_of<N: TrainableNetwork + ?Sized>(
    net: &N,
    data: &Dataset,
    kind: ConfidenceKind,
) -> Result<f64> {
    require_softmax(net)?;
    let t = tally(net, data)?;
    Ok(match kind {
        ConfidenceKind::MaxProbability => t.max_prob,
        ConfidenceKind::TrueClass => t.true_prob,
    } / t.n as f64)
}

/// Mean clamped cross-entropy over `data`.
pub fn cost<N: TrainableNetwork + ?Sized>(net: &N, data: &Dataset) -> Result<f64> {
    let t = tally(net, data)?;
    Ok(t.cost / t.n as f64)
}

/// All three quality metrics in one pass. Label, epoch and time are left for
/// the caller ([`Metrics::with_run`]). Confidence is the max-probability
/// reading, or `NaN` when the output layer is not softmax.
pub fn evaluate<N: TrainableNetwork + ?Sized>(net: &N, data: &Dataset) -> Result<Metrics> {
    let t = tally(net, data)?;
    let n = t.n as f64;
    let confidence = if net.output_activation() == ActivationKind::Softmax {
        t.max_prob / n
    } else {
        f64::NAN
    };
    Ok(Metrics {
        accuracy: t.correct as f64 / n,
        confidence,
        cost: t.cost / n,
        ..Metrics::default()
    })
}

/// Runs `op` and measures its wall time on the monotonic clock.
pub fn timed<T>(op: impl FnOnce() -> T) -> (T, f64) {
    let start = Instant::now();
    let out = op();
    (out, start.elapsed().as_secs_f64())
}

fn csv_field(label: &str) -> String {
    if label.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", label.replace('"', "\"\""))
    } else {
        label.to_string()
    }
}

/// CSV text, rows sorted by label then epoch. Floats use the shortest
/// representation that round-trips.
pub fn to_csv(records: &[Metrics]) -> String {
    let mut sorted: Vec<&Metrics> = records.iter().collect();
    sorted.sort_by(|a, b| a.label.cmp(&b.label).then(a.epoch.cmp(&b.epoch)));
    let mut out = String::new();
    out.push_str(CSV_HEADER);
    out.push('\n');
    for m in sorted {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            csv_field(&m.label),
            m.epoch,
            m.accuracy,
            m.confidence,
            m.cost,
            m.wall_seconds
        )
        .unwrap();
    }
    out
}

pub fn emit_csv(records: &[Metrics], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, to_csv(records)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::EpochStats;

    /// Emits a fixed column for every input column.
    struct Fixed {
        column: Vec<f64>,
        activation: ActivationKind,
    }

    impl TrainableNetwork for Fixed {
        fn train(&mut self, _: &Dataset, _: usize) -> Result<Vec<EpochStats>> {
            Ok(vec![])
        }
        fn output(&self, input: &Matrix) -> Result<Matrix> {
            Ok(Matrix::from_fn(self.column.len(), input.cols(), |r, _| self.column[r]))
        }
        fn output_activation(&self) -> ActivationKind {
            self.activation
        }
    }

    /// Outputs the one-hot label stored in the input's first entry.
    struct Oracle;

    impl TrainableNetwork for Oracle {
        fn train(&mut self, _: &Dataset, _: usize) -> Result<Vec<EpochStats>> {
            Ok(vec![])
        }
        fn output(&self, input: &Matrix) -> Result<Matrix> {
            Ok(Matrix::from_fn(10, input.cols(), |r, c| {
                f64::from(((input.get(0, c) * 9.0).round() as usize) == r)
            }))
        }
        fn output_activation(&self) -> ActivationKind {
            ActivationKind::Softmax
        }
    }

    fn labelled(labels: &[usize]) -> Dataset {
        let inputs = Matrix::from_fn(1, labels.len(), |_, c| labels[c] as f64 / 9.0);
        Dataset::from_class_indices(inputs, 10, labels).unwrap()
    }

    fn uniform() -> Fixed {
        Fixed {
            column: vec![0.1; 10],
            activation: ActivationKind::Softmax,
        }
    }

    #[test]
    fn perfect_network_scores_one() {
        let data = labelled(&[0, 3, 9, 4, 4]);
        assert_eq!(accuracy(&Oracle, &data).unwrap(), 1.0);
        assert_eq!(confidence(&Oracle, &data).unwrap(), 1.0);
        assert_eq!(cost(&Oracle, &data).unwrap(), 0.0);
    }

    #[test]
    fn uniform_network_matches_class_zero_prior() {
        let labels: Vec<usize> = (0..50).map(|i| (i * 7) % 10).collect();
        let data = labelled(&labels);
        let zeros = labels.iter().filter(|&&l| l == 0).count() as f64;
        assert_eq!(accuracy(&uniform(), &data).unwrap(), zeros / 50.0);
        assert!((confidence(&uniform(), &data).unwrap() - 0.1).abs() < 1e-15);
        assert!((cost(&uniform(), &data).unwrap() - 10f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn confidence_bounds_and_contract() {
        let data = labelled(&[1, 2, 3]);
        let skewed = Fixed {
            column: vec![0.05, 0.55, 0.05, 0.05, 0.05, 0.05, 0.05, 0.05, 0.05, 0.05],
            activation: ActivationKind::Softmax,
        };
        let c = confidence(&skewed, &data).unwrap();
        assert!((0.1..=1.0).contains(&c));
        assert!((c - 0.55).abs() < 1e-15);
        let t = confidence_of(&skewed, &data, ConfidenceKind::TrueClass).unwrap();
        assert!((t - (0.55 + 0.05 + 0.05) / 3.0).abs() < 1e-15);

        let sig = Fixed {
            column: vec![0.5; 10],
            activation: ActivationKind::Sigmoid,
        };
        assert!(matches!(confidence(&sig, &data).unwrap_err(), Error::Contract(_)));
    }

    #[test]
    fn timing_sanity() {
        let ((), secs) = timed(|| ());
        assert!(secs < 1e-3);
        let busy = || {
            let mut x = 0u64;
            for i in 0..3_000_000u64 {
                x = std::hint::black_box(x.wrapping_mul(31).wrapping_add(i));
            }
            x
        };
        // Warm up, then compare one run against two back to back.
        busy();
        let mut best = f64::INFINITY;
        for _ in 0..5 {
            let (_, one) = timed(busy);
            let (_, two) = timed(|| {
                busy();
                busy()
            });
            best = best.min((two / (2.0 * one) - 1.0).abs());
        }
        assert!(best <= 0.05, "additivity off by {best}");
    }

    #[test]
    fn csv_layout() {
        assert_eq!(to_csv(&[]), format!("{CSV_HEADER}\n"));
        let rows = [
            Metrics {
                label: "b".into(),
                epoch: 1,
                accuracy: 0.5,
                confidence: 0.25,
                cost: 1.0,
                wall_seconds: 0.125,
            },
            Metrics {
                label: "a,x".into(),
                epoch: 2,
                ..Metrics::default()
            },
        ];
        let text = to_csv(&rows);
        assert_eq!(text.lines().count(), 3);
        assert_eq!(text.lines().nth(1).unwrap(), "\"a,x\",2,0,0,0,0");
        assert_eq!(text.lines().nth(2).unwrap(), "b,1,0.5,0.25,1,0.125");
    }

    #[test]
    fn csv_round_trips_through_independent_parser() {
        let records: Vec<Metrics> = (0..6)
            .map(|i| Metrics {
                label: if i % 2 == 0 { "pnn-10".into() } else { "snn \"relu\"".into() },
                epoch: i / 2 + 1,
                accuracy: 1.0 / (i as f64 + 3.0),
                confidence: 0.1 + i as f64 * 0.123456789,
                cost: std::f64::consts::LN_10 / (i as f64 + 1.0),
                wall_seconds: 1e-7 * i as f64,
            })
            .collect();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sub/metrics.csv");
        emit_csv(&records, &path).unwrap();

        let mut reader = csv::Reader::from_path(&path).unwrap();
        assert_eq!(
            reader.headers().unwrap().iter().collect::<Vec<_>>().join(","),
            CSV_HEADER
        );
        let parsed: Vec<Metrics> = reader
            .records()
            .map(|r| {
                let r = r.unwrap();
                Metrics {
                    label: r[0].to_string(),
                    epoch: r[1].parse().unwrap(),
                    accuracy: r[2].parse().unwrap(),
                    confidence: r[3].parse().unwrap(),
                    cost: r[4].parse().unwrap(),
                    wall_seconds: r[5].parse().unwrap(),
                }
            })
            .collect();
        let mut expected = records.clone();
        expected.sort_by(|a, b| a.label.cmp(&b.label).then(a.epoch.cmp(&b.epoch)));
        assert_eq!(parsed, expected);
    }

    #[test]
    fn emit_reports_path_on_failure() {
        let dir = tempfile::tempdir().unwrap();
        let err = emit_csv(&[], dir.path()).unwrap_err();
        assert!(err.to_string().contains(&dir.path().display().to_string()));
    }
}
