use crate::activation::ActivationKind;
use crate::dataset::Dataset;
use crate::error::Result;
use crate::linalg::Matrix;
use crate::metrics::{self, Metrics};
use crate::network::{argmax_columns, EpochStats, Network};

/// What the experiment harness needs from anything it trains and scores.
/// Implemented by both [`Network`] and [`crate::parallel::ParallelNetwork`].
pub trait TrainableNetwork {
    /// Runs `epochs` training epochs and returns one stats record per epoch.
    fn train(&mut self, data: &Dataset, epochs: usize) -> Result<Vec<EpochStats>>;

    /// Output-layer activations for a batch of column inputs.
    fn output(&self, input: &Matrix) -> Result<Matrix>;

    fn output_activation(&self) -> ActivationKind;

    fn predict(&self, input: &Matrix) -> Result<Vec<usize>> {
        Ok(argmax_columns(&self.output(input)?))
    }

    fn evaluate(&self, data: &Dataset) -> Result<Metrics>
    where
        Self: Sized,
    {
        metrics::evaluate(self, data)
    }
}

impl TrainableNetwork for Network {
    fn train(&mut self, data: &Dataset, epochs: usize) -> Result<Vec<EpochStats>> {
        self.fit(data, epochs)
    }

    fn output(&self, input: &Matrix) -> Result<Matrix> {
        Network::output(self, input)
    }

    fn output_activation(&self) -> ActivationKind {
        self.config().output_activation()
    }
}
