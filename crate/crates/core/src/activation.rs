use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::linalg::Matrix;

pub const DEFAULT_LEAKY_SLOPE: f64 = 0.01;

/// Per-layer nonlinearity. Softmax normalizes each column and may only be
/// used on the output layer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ActivationKind {
    Sigmoid,
    Tanh,
    Relu,
    LeakyRelu { slope: f64 },
    Softmax,
}

impl ActivationKind {
    pub fn leaky() -> Self {
        ActivationKind::LeakyRelu {
            slope: DEFAULT_LEAKY_SLOPE,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ActivationKind::Sigmoid => "sigmoid",
            ActivationKind::Tanh => "tanh",
            ActivationKind::Relu => "relu",
            ActivationKind::LeakyRelu { .. } => "leaky-relu",
            ActivationKind::Softmax => "softmax",
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let ActivationKind::LeakyRelu { slope } = *self {
            if !(slope > 0.0 && slope < 1.0) {
                return Err(Error::invalid(format!(
                    "leaky-relu slope must lie in (0, 1), got {slope}"
                )));
            }
        }
        Ok(())
    }

    pub fn apply(&self, z: &Matrix) -> Matrix {
        match *self {
            ActivationKind::Sigmoid => z.map(sigmoid),
            ActivationKind::Tanh => z.map(f64::tanh),
            ActivationKind::Relu => z.map(|x| if x < 0.0 { 0.0 } else { x }),
            ActivationKind::LeakyRelu { slope } => z.map(|x| if x < 0.0 { slope * x } else { x }),
            ActivationKind::Softmax => softmax_columns(z),
        }
    }

    /// Entry-wise derivative at `z`. Softmax has no entry-wise derivative; its
    /// Jacobian is folded into the output error signal instead.
    pub fn derivative(&self, z: &Matrix) -> Result<Matrix> {
        Ok(match *self {
            ActivationKind::Sigmoid => z.map(|x| {
                let s = sigmoid(x);
                s * (1.0 - s)
            }),
            ActivationKind::Tanh => z.map(|x| {
                let t = x.tanh();
                1.0 - t * t
            }),
            // Subgradient 0 at exactly zero.
            ActivationKind::Relu => z.map(|x| if x > 0.0 { 1.0 } else { 0.0 }),
            ActivationKind::LeakyRelu { slope } => z.map(|x| if x < 0.0 { slope } else { 1.0 }),
            ActivationKind::Softmax => {
                return Err(Error::Contract(
                    "softmax has no entry-wise derivative".into(),
                ))
            }
        })
    }
}

impl fmt::Display for ActivationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ActivationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sigmoid" => Ok(ActivationKind::Sigmoid),
            "tanh" => Ok(ActivationKind::Tanh),
            "relu" => Ok(ActivationKind::Relu),
            "leaky-relu" | "leaky_relu" | "leakyrelu" | "leaky" => Ok(ActivationKind::leaky()),
            "softmax" => Ok(ActivationKind::Softmax),
            other => Err(Error::invalid(format!("unknown activation '{other}'"))),
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Column-wise softmax with the column maximum subtracted first.
pub fn softmax_columns(z: &Matrix) -> Matrix {
    let (rows, cols) = z.shape();
    let mut out = Matrix::zeros(rows, cols);
    for c in 0..cols {
        let max = (0..rows).map(|r| z.get(r, c)).fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for r in 0..rows {
            let e = (z.get(r, c) - max).exp();
            out.set(r, c, e);
            sum += e;
        }
        for r in 0..rows {
            out.set(r, c, out.get(r, c) / sum);
        }
    }
    out
}
