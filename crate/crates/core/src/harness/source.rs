use rand::Rng;

use crate::models::{ParetoModel, Sampler, TCopulaParetoModel};
use crate::rng::StreamRng;
use crate::sample::SampleMatrix;

/// Bootstrap resampling of an observed table.
#[derive(Debug, Clone)]
pub struct EmpiricalModel {
    data: SampleMatrix,
}

impl EmpiricalModel {
    pub fn new(data: SampleMatrix) -> Self {
        Self { data }
    }

    pub fn data(&self) -> &SampleMatrix {
        &self.data
    }
}

impl Sampler for EmpiricalModel {
    fn dim(&self) -> usize {
        self.data.ncols()
    }

    fn sample_with(&self, n: usize, rng: &mut StreamRng) -> SampleMatrix {
        let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..self.data.nrows())).collect();
        self.data.select_rows(&idx)
    }
}

/// A configured data source.
#[derive(Debug, Clone)]
pub enum ModelSource {
    Pareto(ParetoModel),
    TCopula(TCopulaParetoModel),
    Empirical(EmpiricalModel),
}

impl ModelSource {
    /// The exact density, when the model has one usable for IS.
    pub fn density(&self) -> Option<&ParetoModel> {
        match self {
            ModelSource::Pareto(m) => Some(m),
            _ => None,
        }
    }
}

impl Sampler for ModelSource {
    fn dim(&self) -> usize {
        match self {
            ModelSource::Pareto(m) => m.dim(),
            ModelSource::TCopula(m) => m.dim(),
            ModelSource::Empirical(m) => m.dim(),
        }
    }

    fn sample_with(&self, n: usize, rng: &mut StreamRng) -> SampleMatrix {
        match self {
            ModelSource::Pareto(m) => m.sample_with(n, rng),
            ModelSource::TCopula(m) => m.sample_with(n, rng),
            ModelSource::Empirical(m) => m.sample_with(n, rng),
        }
    }
}
