//! Seeded random instances for tests, benchmarks and the acceptance run.
//!
//! Probabilities are drawn as integer weights in `1..=4` and normalized, so
//! every primitive has full support and denominators stay small. Costs are
//! integers in `0..=9`.

use rand::Rng;

use crate::model::{Dist, Dists, SpaceSizes, Spaces, TeamModel};
use crate::rational::Rational;

/// Time-invariant space sizes of a generated model.
pub type Dims = SpaceSizes;

pub fn random_dist<R: Rng + ?Sized>(rng: &mut R, size: usize) -> Dist {
    let raw: Vec<i64> = (0..size).map(|_| rng.random_range(1..=4)).collect();
    let total: i64 = raw.iter().sum();
    Dist::new(raw.into_iter().map(|w| Rational::new(w, total)).collect())
}

pub fn random_team_model<R: Rng + ?Sized>(rng: &mut R, dims: Dims, horizon: usize) -> TeamModel {
    let transition = (0..horizon)
        .map(|_| {
            (0..dims.x)
                .map(|_| {
                    (0..dims.u1)
                        .map(|_| {
                            (0..dims.u2)
                                .map(|_| (0..dims.w).map(|_| rng.random_range(0..dims.x)).collect())
                                .collect()
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    let mut obs = |v: usize, y: usize| -> Vec<Vec<Vec<usize>>> {
        (0..=horizon)
            .map(|_| (0..dims.x).map(|_| (0..v).map(|_| rng.random_range(0..y)).collect()).collect())
            .collect()
    };
    let obs1 = obs(dims.v1, dims.y1);
    let obs2 = obs(dims.v2, dims.y2);
    let cost = (0..=horizon)
        .map(|_| {
            (0..dims.x)
                .map(|_| {
                    (0..dims.u1)
                        .map(|_| (0..dims.u2).map(|_| Rational::from_integer(rng.random_range(0..=9))).collect())
                        .collect()
                })
                .collect()
        })
        .collect();
    let dists = Dists {
        x0: random_dist(rng, dims.x),
        w: (0..horizon).map(|_| random_dist(rng, dims.w)).collect(),
        v1: (0..=horizon).map(|_| random_dist(rng, dims.v1)).collect(),
        v2: (0..=horizon).map(|_| random_dist(rng, dims.v2)).collect(),
    };
    TeamModel {
        horizon,
        spaces: Spaces::uniform(horizon, dims),
        transition,
        obs1,
        obs2,
        cost,
        dists,
    }
}
