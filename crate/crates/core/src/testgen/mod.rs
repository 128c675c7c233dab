//! Search-based test generation toward conflicting APIs.

mod case;
mod fitness;
mod random;
mod search;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use case::{EntryCall, Origin, Statement, TestCase, TestRun};
pub use fitness::{normalize, FitnessScore, FitnessTarget, UNEVALUATED};
pub use random::{random_value, INT_RANGE, MAX_STR_LEN};
pub use search::{generate, generate_for, GenerationReport, RepetitionReport};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TestgenError {
    #[error("Depth_arg must be at least 1, got {0}")]
    Domain(usize),
    #[error("invalid configuration: {0}")]
    Config(String),
}

/// P_OC = 1/Depth_arg × 1/(T_s + 1).
pub fn seeding_probability(depth_arg: usize, t_s: u64) -> Result<f64, TestgenError> {
    if depth_arg < 1 {
        return Err(TestgenError::Domain(depth_arg));
    }
    Ok(1.0 / depth_arg as f64 * (1.0 / (t_s as f64 + 1.0)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GAConfig {
    pub population_size: usize,
    /// Hard cap per repetition; keeps runs reproducible.
    pub max_generations: usize,
    /// Wall-clock cap per repetition, checked between generations.
    pub budget_ms: Option<u64>,
    pub mutation_rate: f64,
    pub crossover_rate: f64,
    /// Independent searches per pair (RN).
    pub repetitions: usize,
    pub seeding_enabled: bool,
    pub step_limit: u64,
}

impl Default for GAConfig {
    fn default() -> Self {
        GAConfig {
            population_size: 30,
            max_generations: 50,
            budget_ms: Some(5_000),
            mutation_rate: 0.8,
            crossover_rate: 0.75,
            repetitions: 10,
            seeding_enabled: true,
            step_limit: 20_000,
        }
    }
}

impl GAConfig {
    pub fn validate(&self) -> Result<(), TestgenError> {
        let bad = |m: &str| Err(TestgenError::Config(m.to_string()));
        if self.repetitions < 1 {
            return bad("RN must be at least 1");
        }
        if self.population_size < 2 {
            return bad("population needs at least two individuals");
        }
        if !(0.0..=1.0).contains(&self.mutation_rate) || !(0.0..=1.0).contains(&self.crossover_rate) {
            return bad("rates must lie in [0, 1]");
        }
        Ok(())
    }
}
