//! Seeded Monte Carlo evaluation of executable strategies.
//!
//! Episode `k` draws its primitive variables from a ChaCha8 generator seeded
//! with `seed` on stream `k`, so reports do not depend on thread count or
//! scheduling. Costs are converted to `f64` with round-to-nearest only here.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::control::Controller;
use crate::error::{Error, Result};
use crate::model::{Dist, TeamModel};
use crate::oracle::{trajectory, Outcome};
use crate::rational::Rational;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RolloutConfig {
    pub seed: u64,
    pub episodes: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub seed: u64,
    pub episodes: usize,
    pub mean: f64,
    pub stderr: f64,
    pub exact: Option<Rational>,
    pub per_time_mean: Vec<f64>,
}

impl Report {
    /// `|mean - exact| <= k * stderr`, when the exact value is known.
    pub fn within(&self, k: f64) -> Option<bool> {
        self.exact.as_ref().map(|e| (self.mean - e.to_f64()).abs() <= k * self.stderr)
    }

    pub fn to_json(&self) -> Value {
        json!({
            "seed": self.seed,
            "episodes": self.episodes,
            "mean": self.mean,
            "stderr": self.stderr,
            "exact": self.exact.as_ref().map(|e| e.to_string()),
            "exact_f64": self.exact.as_ref().map(|e| e.to_f64()),
            "within_3_stderr": self.within(3.0),
            "per_time_mean": self.per_time_mean,
        })
    }
}

struct Sampler {
    x0: WeightedIndex<f64>,
    w: Vec<WeightedIndex<f64>>,
    v1: Vec<WeightedIndex<f64>>,
    v2: Vec<WeightedIndex<f64>>,
}

fn weighted(d: &Dist) -> Result<WeightedIndex<f64>> {
    WeightedIndex::new(d.weights.iter().map(Rational::to_f64))
        .map_err(|e| Error::OutOfRange(format!("cannot sample from {:?}: {e}", d.weights)))
}

impl Sampler {
    fn new(model: &TeamModel) -> Result<Self> {
        let all = |ds: &[Dist]| ds.iter().map(weighted).collect::<Result<Vec<_>>>();
        Ok(Sampler {
            x0: weighted(&model.dists.x0)?,
            w: all(&model.dists.w)?,
            v1: all(&model.dists.v1)?,
            v2: all(&model.dists.v2)?,
        })
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> Outcome {
        Outcome {
            x0: self.x0.sample(rng),
            w: self.w.iter().map(|d| d.sample(rng)).collect(),
            v1: self.v1.iter().map(|d| d.sample(rng)).collect(),
            v2: self.v2.iter().map(|d| d.sample(rng)).collect(),
            prob: Rational::one(),
        }
    }
}

/// Simulates `config.episodes` closed-loop episodes of `controller`.
/// `exact` is carried into the report for comparison.
pub fn rollout<C: Controller + Clone + Sync>(
    model: &TeamModel,
    controller: &C,
    config: RolloutConfig,
    exact: Option<Rational>,
) -> Result<Report> {
    model.ensure_valid()?;
    if config.episodes == 0 {
        return Err(Error::OutOfRange("at least one episode is required".into()));
    }
    let sampler = Sampler::new(model)?;
    let costs: Vec<Vec<f64>> = (0..config.episodes)
        .into_par_iter()
        .map_init(
            || controller.clone(),
            |c, k| {
                let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
                rng.set_stream(k as u64);
                let outcome = sampler.draw(&mut rng);
                let tr = trajectory(model, &outcome, c)?;
                Ok(tr.cost.iter().map(Rational::to_f64).collect())
            },
        )
        .collect::<Result<_>>()?;
    let n = config.episodes as f64;
    let totals: Vec<f64> = costs.iter().map(|c| c.iter().sum()).collect();
    let mean = totals.iter().sum::<f64>() / n;
    let stderr = if config.episodes > 1 {
        let var = totals.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    } else {
        0.0
    };
    let per_time_mean = (0..=model.horizon)
        .map(|t| costs.iter().map(|c| c[t]).sum::<f64>() / n)
        .collect();
    Ok(Report {
        seed: config.seed,
        episodes: config.episodes,
        mean,
        stderr,
        exact,
        per_time_mean,
    })
}
