//! Parameter averaging.
//!
//! Each combined parameter is the arithmetic mean of the children's values,
//! rounded once from the exact mean. The sum is carried as a non-overlapping
//! expansion (Shewchuk), so the result depends only on the multiset of child
//! values: identical children give back their common value, `w` and `-w`
//! give exactly zero, and the order of the children is irrelevant.

use crate::error::{Error, Result};
use crate::network::{Layer, Network};

/// Combination policy for merging child networks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Combiner {
    #[default]
    Average,
}

impl Combiner {
    pub fn name(&self) -> &'static str {
        match self {
            Combiner::Average => "average",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "average" | "mean" => Ok(Combiner::Average),
            other => Err(Error::invalid(format!("unknown combiner '{other}'"))),
        }
    }

    pub fn combine(&self, children: &[Network]) -> Result<Network> {
        match self {
            Combiner::Average => average(children),
        }
    }
}

/// Adds `x` to the expansion `partials` without rounding error.
fn grow(partials: &mut Vec<f64>, mut x: f64) {
    let mut kept = 0;
    for j in 0..partials.len() {
        let mut y = partials[j];
        if x.abs() < y.abs() {
            std::mem::swap(&mut x, &mut y);
        }
        let hi = x + y;
        let lo = y - (hi - x);
        if lo != 0.0 {
            partials[kept] = lo;
            kept += 1;
        }
        x = hi;
    }
    partials.truncate(kept);
    partials.push(x);
}

/// Correctly rounded (half-even) value of an expansion built by [`grow`].
fn round_expansion(partials: &[f64]) -> f64 {
    let mut n = partials.len();
    if n == 0 {
        return 0.0;
    }
    n -= 1;
    let mut hi = partials[n];
    let mut lo = 0.0;
    while n > 0 {
        let x = hi;
        n -= 1;
        let y = partials[n];
        hi = x + y;
        lo = y - (hi - x);
        if lo != 0.0 {
            break;
        }
    }
    if n > 0 && ((lo < 0.0 && partials[n - 1] < 0.0) || (lo > 0.0 && partials[n - 1] > 0.0)) {
        let y = lo * 2.0;
        let x = hi + y;
        if y == x - hi {
            hi = x;
        }
    }
    hi
}

/// Correctly rounded sum, independent of the order of `values`.
pub fn exact_sum(values: &[f64]) -> f64 {
    let mut partials = Vec::with_capacity(4);
    for &v in values {
        grow(&mut partials, v);
    }
    round_expansion(&partials)
}

/// Mean of `values` rounded once from the exact value (ties to even).
pub fn exact_mean(values: &[f64]) -> f64 {
    assert!(!values.is_empty(), "mean of nothing");
    let k = values.len() as f64;
    if values.iter().any(|v| !v.is_finite()) {
        return values.iter().sum::<f64>() / k;
    }
    let mut sum = Vec::with_capacity(4);
    for &v in values {
        grow(&mut sum, v);
    }
    let mut q = round_expansion(&sum) / k;
    if !q.is_finite() {
        return q;
    }
    // q is within a couple of ulps of the exact mean; walk toward it.
    for _ in 0..4 {
        let product = q * k;
        let product_err = q.mul_add(k, -product);
        let mut residual = sum.clone();
        grow(&mut residual, -product);
        grow(&mut residual, -product_err);
        let r = round_expansion(&residual);
        if r == 0.0 {
            return q;
        }
        let neighbor = if r > 0.0 { q.next_up() } else { q.next_down() };
        // The exact mean is (S - qk)/k away from q; compare |S - qk| with k * gap / 2.
        let half_gap_k = (neighbor - q).abs() * k * 0.5;
        let mut cmp: Vec<f64> = residual.iter().map(|&p| if r < 0.0 { -p } else { p }).collect();
        grow(&mut cmp, -half_gap_k);
        let c = round_expansion(&cmp);
        if c < 0.0 {
            return q;
        }
        if c == 0.0 {
            return if q.to_bits() & 1 == 0 { q } else { neighbor };
        }
        q = neighbor;
    }
    q
}

fn average(children: &[Network]) -> Result<Network> {
    if children.len() < 2 {
        return Err(Error::Contract(format!(
            "combining needs at least two children, got {}",
            children.len()
        )));
    }
    let first = &children[0];
    if let Some(i) = children.iter().position(|c| !c.same_structure(first)) {
        return Err(Error::Contract(format!(
            "child {i} is structurally different from child 0"
        )));
    }
    let mut buf = vec![0.0; children.len()];
    let mut mean_of = |pick: &dyn Fn(&Network) -> &[f64], len: usize| -> Vec<f64> {
        (0..len)
            .map(|i| {
                for (slot, child) in buf.iter_mut().zip(children) {
                    *slot = pick(child)[i];
                }
                exact_mean(&buf)
            })
            .collect()
    };
    let mut layers = Vec::with_capacity(first.layers().len());
    for (l, layer) in first.layers().iter().enumerate() {
        let weights = mean_of(&|c: &Network| c.layers()[l].weights.data(), layer.weights.data().len());
        let biases = mean_of(&|c: &Network| c.layers()[l].biases.data(), layer.biases.data().len());
        let mut w = layer.weights.clone();
        w.data_mut().copy_from_slice(&weights);
        let mut b = layer.biases.clone();
        b.data_mut().copy_from_slice(&biases);
        layers.push(Layer {
            weights: w,
            biases: b,
            activation: layer.activation,
        });
    }
    Network::from_layers(layers, first.config().clone())
}
