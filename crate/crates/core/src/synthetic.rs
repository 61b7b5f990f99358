//! Seeded synthetic model populations with family structure.
//!
//! Correctness follows a logistic ability/difficulty model with a shared
//! per-(family, example) effect, so models from one family agree with each
//! other more than with models from other families.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{CorrectnessMatrix, MatrixKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationSpec {
    pub families: usize,
    pub models_per_family: usize,
    pub examples: usize,
    pub ability_spread: f64,
    pub difficulty_spread: f64,
    pub family_effect_scale: f64,
    pub noise_scale: f64,
    pub kind: MatrixKind,
    pub seed: u64,
}

impl Default for PopulationSpec {
    fn default() -> Self {
        Self {
            families: 2,
            models_per_family: 75,
            examples: 1000,
            ability_spread: 1.0,
            difficulty_spread: 1.5,
            family_effect_scale: 1.5,
            noise_scale: 0.3,
            kind: MatrixKind::Binary,
            seed: 0,
        }
    }
}

impl PopulationSpec {
    pub fn total_models(&self) -> usize {
        self.families * self.models_per_family
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |what: &'static str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::out_of_range(what, v, "> 0"))
            }
        };
        let non_negative = |what: &'static str, v: f64| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(Error::out_of_range(what, v, ">= 0"))
            }
        };
        if self.families == 0 {
            return Err(Error::out_of_range("families", 0, ">= 1"));
        }
        if self.models_per_family == 0 {
            return Err(Error::out_of_range("models_per_family", 0, ">= 1"));
        }
        if self.examples < 2 {
            return Err(Error::out_of_range("examples", self.examples, ">= 2"));
        }
        positive("ability_spread", self.ability_spread)?;
        positive("difficulty_spread", self.difficulty_spread)?;
        non_negative("family_effect_scale", self.family_effect_scale)?;
        non_negative("noise_scale", self.noise_scale)
    }
}

pub fn model_id(family: usize, member: usize) -> String {
    format!("fam{family:02}-model{member:03}")
}

pub fn family_of(model_id: &str) -> Option<usize> {
    model_id.strip_prefix("fam")?.split('-').next()?.parse().ok()
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn generate_population(spec: &PopulationSpec) -> Result<CorrectnessMatrix> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let normal = |sd: f64| Normal::new(0.0, sd).expect("spread validated");
    let n_models = spec.total_models();
    let n_examples = spec.examples;

    let abilities: Vec<f64> = normal(spec.ability_spread).sample_iter(&mut rng).take(n_models).collect();
    let difficulties: Vec<f64> = normal(spec.difficulty_spread).sample_iter(&mut rng).take(n_examples).collect();
    let family_effects: Vec<f64> = normal(spec.family_effect_scale)
        .sample_iter(&mut rng)
        .take(spec.families * n_examples)
        .collect();
    let noise = normal(spec.noise_scale);

    let mut values = Array2::zeros((n_models, n_examples));
    for m in 0..n_models {
        let family = m / spec.models_per_family;
        for k in 0..n_examples {
            let eps = noise.sample(&mut rng);
            let logit = abilities[m] - difficulties[k] + family_effects[family * n_examples + k] + eps;
            // Keep continuous values strictly inside (0, 1) even when the logistic saturates.
            let p = logistic(logit).clamp(f64::EPSILON, 1.0 - f64::EPSILON);
            values[[m, k]] = match spec.kind {
                MatrixKind::Continuous => p,
                MatrixKind::Binary => f64::from(u8::from(rng.random_bool(p))),
            };
        }
    }
    let model_ids = (0..n_models)
        .map(|m| model_id(m / spec.models_per_family, m % spec.models_per_family))
        .collect();
    let example_ids = (0..n_examples).map(|k| format!("ex{k:05}")).collect();
    CorrectnessMatrix::new(model_ids, example_ids, values, Some(spec.kind))
}
