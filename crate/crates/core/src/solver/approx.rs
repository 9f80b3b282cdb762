use std::collections::HashMap;
use std::sync::Arc;

use serde_json::{json, Value};

use crate::belief::{branch_belief1, expected_cost1, initial_branches1, Belief1};
use crate::error::{Error, Result};
use crate::info::{product, splice, InfoStructure};
use crate::model::TeamModel;
use crate::quantizer::{build_lattice, error_bound, quantize, Lattice};
use crate::rational::Rational;

use super::alpha::AlphaBoundInputs;
use super::pbp::{Pbp, PbpKey, Psi2};

/// `(lattice index, accessible data)`.
pub type LatticeKey = (usize, Vec<usize>);

/// The quantized agent-1 recursion and the exact cost of acting on it.
#[derive(Debug, Clone)]
pub struct ApproxPolicy {
    pub n: usize,
    pub lattices: Vec<Arc<Lattice>>,
    /// Quantized value and minimizing action per lattice key, by stage.
    pub tables: Vec<HashMap<LatticeKey, (Rational, usize)>>,
    /// Exact expected cost of the strategy that plays the quantized argmin at
    /// the lattice point nearest to the exact belief.
    pub value: Rational,
    /// The quantized recursion's own estimate at the initial beliefs.
    pub estimate: Rational,
    /// Whether `tables` covers every lattice point and accessible tuple.
    pub complete: bool,
}

impl ApproxPolicy {
    pub fn action(&self, model: &TeamModel, info: &InfoStructure, pi1: &Belief1, a2: &[usize]) -> Result<usize> {
        let t = pi1.t;
        let q = quantize(&self.lattices[t], &pi1.to_vector(model.nx(t), info.private_space(model, t).len()))?;
        self.tables[t]
            .get(&(q.index, a2.to_vec()))
            .map(|(_, u)| *u)
            .ok_or_else(|| Error::MissingKey(format!("no quantized policy entry at t = {t}, A2 = {a2:?}")))
    }

    /// Whether every belief in `beliefs[t]` lies on the stage-`t` lattice.
    pub fn covers(&self, model: &TeamModel, info: &InfoStructure, beliefs: &[Vec<Arc<Belief1>>]) -> bool {
        beliefs.iter().enumerate().all(|(t, list)| {
            let nl = info.private_space(model, t).len();
            list.iter().all(|b| self.lattices[t].contains(&b.to_vector(model.nx(t), nl)))
        })
    }

    /// Largest lattice error bound over the stages.
    pub fn epsilon(&self) -> Rational {
        self.lattices
            .iter()
            .map(|l| error_bound(l.m, l.n))
            .fold(Rational::zero(), Rational::max)
    }

    /// `max |J(q)|` over stage `t`'s table.
    pub fn sup_norm(&self, t: usize) -> Rational {
        self.tables[t].values().fold(Rational::zero(), |acc, (v, _)| acc.max(v.abs()))
    }

    /// Largest `|J(q) - J(q')| / TV(q, q')` over lattice neighbours sharing the
    /// same accessible tuple. On the lattice this equals the maximum over
    /// all pairs: any two points are joined by a path of one-unit moves whose
    /// distances add up to theirs.
    pub fn lipschitz(&self) -> Result<Rational> {
        if !self.complete {
            return Err(Error::MissingKey("the Lipschitz estimate needs complete tables".into()));
        }
        let step = Rational::new(2, self.n as i64);
        let mut best = Rational::zero();
        for (t, table) in self.tables.iter().enumerate() {
            for ((q, a2), (v, _)) in table {
                for r in self.lattices[t].neighbours(*q) {
                    if r < *q {
                        continue;
                    }
                    let other = &table[&(r, a2.clone())].0;
                    best = best.max((v - other).abs() / &step);
                }
            }
        }
        Ok(best)
    }

    /// Inputs of the loss bound; `lipschitz` defaults to [`Self::lipschitz`].
    pub fn alpha_inputs(&self, model: &TeamModel, lipschitz: Option<Rational>) -> Result<AlphaBoundInputs> {
        if !self.complete {
            return Err(Error::MissingKey("the loss bound needs complete tables".into()));
        }
        let lipschitz = match lipschitz {
            Some(l) => l,
            None => self.lipschitz()?,
        };
        let horizon = model.horizon;
        Ok(AlphaBoundInputs {
            epsilon: self.epsilon(),
            cost_sup: model.cost_sup(),
            lipschitz,
            next_sup: (0..=horizon)
                .map(|t| if t < horizon { self.sup_norm(t + 1) } else { Rational::zero() })
                .collect(),
        })
    }

    pub fn to_json(&self) -> Value {
        json!({
            "n": self.n,
            "value": self.value.to_string(),
            "value_f64": self.value.to_f64(),
            "estimate": self.estimate.to_string(),
            "epsilon": self.epsilon().to_string(),
            "lattice_sizes": self.lattices.iter().map(|l| l.len()).collect::<Vec<_>>(),
            "table_sizes": self.tables.iter().map(|t| t.len()).collect::<Vec<_>>(),
        })
    }
}

struct Approx<'a> {
    pbp: Pbp<'a>,
    lattices: Vec<Arc<Lattice>>,
    tables: Vec<HashMap<LatticeKey, (Rational, usize)>>,
    executed: Vec<HashMap<PbpKey, Rational>>,
}

impl Approx<'_> {
    fn n_private(&self, t: usize) -> usize {
        self.pbp.info.private_space(self.pbp.model, t).len()
    }

    fn snap(&self, belief: &Belief1) -> Result<usize> {
        let t = belief.t;
        Ok(quantize(&self.lattices[t], &belief.to_vector(self.pbp.model.nx(t), self.n_private(t)))?.index)
    }

    fn lattice_belief(&self, t: usize, q: usize) -> Belief1 {
        Belief1::from_vector(t, self.n_private(t), &self.lattices[t].point(q))
    }

    fn quantized(&mut self, t: usize, q: usize, a2: &[usize]) -> Result<(Rational, usize)> {
        let key = (q, a2.to_vec());
        if let Some(v) = self.tables[t].get(&key) {
            return Ok(v.clone());
        }
        let model = self.pbp.model;
        let belief = self.lattice_belief(t, q);
        let gamma2 = self.pbp.psi2.get(model, self.pbp.info, t, a2)?;
        let mut best: Option<(Rational, usize)> = None;
        for u1 in 0..model.nu1(t) {
            let mut value = expected_cost1(model, &belief, u1, &gamma2);
            if t < model.horizon {
                let plan = self.pbp.info.plan(t)?;
                for b in branch_belief1(model, self.pbp.info, &belief, u1, &gamma2)? {
                    let next_q = self.snap(&b.belief)?;
                    let next_a2 = splice(&plan.a2_from_z1, a2, &b.z);
                    value += &b.prob * &self.quantized(t + 1, next_q, &next_a2)?.0;
                }
            }
            if best.as_ref().is_none_or(|(v, _)| value < *v) {
                best = Some((value, u1));
            }
        }
        let best = best.expect("at least one action");
        self.tables[t].insert(key, best.clone());
        Ok(best)
    }

    fn executed(&mut self, pi1: &Arc<Belief1>, a2: &[usize]) -> Result<Rational> {
        let t = pi1.t;
        let key = (pi1.clone(), a2.to_vec());
        if let Some(v) = self.executed[t].get(&key) {
            return Ok(v.clone());
        }
        let q = self.snap(pi1)?;
        let (_, u1) = self.quantized(t, q, a2)?;
        let (mut value, children) = self.pbp.step(pi1, a2, u1)?;
        for c in children {
            value += &c.prob * &self.executed(&c.belief, &c.a2)?;
        }
        self.executed[t].insert(key, value.clone());
        Ok(value)
    }
}

/// Quantized agent-1 recursion at lattice resolution `n`, with the exact
/// performance of the strategy it induces. With `complete`, the tables are
/// filled at every lattice point and accessible tuple, as needed by
/// [`ApproxPolicy::lipschitz`] and [`ApproxPolicy::alpha_inputs`].
pub fn solve_pbp_approx(
    model: &TeamModel,
    info: &InfoStructure,
    psi2: &Psi2,
    n: usize,
    complete: bool,
) -> Result<ApproxPolicy> {
    model.ensure_valid()?;
    info.ensure_valid(model)?;
    let lattices = (0..=model.horizon)
        .map(|t| build_lattice(model.nx(t) * info.private_space(model, t).len(), n).map(Arc::new))
        .collect::<Result<Vec<_>>>()?;
    let init = info.initial_plan()?;
    let mut approx = Approx {
        pbp: Pbp::new(model, info, psi2),
        lattices,
        tables: vec![HashMap::new(); model.horizon + 1],
        executed: vec![HashMap::new(); model.horizon + 1],
    };
    let mut value = Rational::zero();
    let mut estimate = Rational::zero();
    for b in initial_branches1(model, info)? {
        let a2 = splice(&init.a2_from_z1, &[], &b.z);
        let belief = Arc::new(b.belief);
        value += &b.prob * &approx.executed(&belief, &a2)?;
        let q = approx.snap(&belief)?;
        estimate += &b.prob * &approx.quantized(0, q, &a2)?.0;
    }
    if complete {
        for t in (0..=model.horizon).rev() {
            let radices = info.radices(model, &info.step(t).a2);
            for a2 in product(&radices) {
                for q in 0..approx.lattices[t].len() {
                    approx.quantized(t, q, &a2)?;
                }
            }
        }
    }
    Ok(ApproxPolicy {
        n,
        lattices: approx.lattices,
        tables: approx.tables,
        value,
        estimate,
        complete,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::{random_team_model, Dims};
    use crate::info::build_delayed_structure;
    use crate::model::Dist;
    use crate::solver::solve_pbp_exact;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn model(seed: u64, horizon: usize) -> TeamModel {
        let dims = Dims { x: 2, u1: 2, u2: 2, w: 2, v1: 2, v2: 2, y1: 2, y2: 2 };
        random_team_model(&mut ChaCha8Rng::seed_from_u64(seed), dims, horizon)
    }

    #[test]
    fn never_beats_the_exact_response() {
        for seed in 0..4 {
            let m = model(seed, 2);
            let info = build_delayed_structure(&m, 1).unwrap();
            let psi = Psi2::constant(0);
            let exact = solve_pbp_exact(&m, &info, &psi).unwrap();
            for n in [1, 2, 4] {
                let a = solve_pbp_approx(&m, &info, &psi, n, false).unwrap();
                assert!(a.value >= exact.value, "seed {seed} n {n}");
            }
        }
    }

    #[test]
    fn exact_on_a_fine_enough_lattice() {
        let mut m = model(5, 1);
        m.dists.x0 = Dist::new(vec![Rational::new(1, 4), Rational::new(3, 4)]);
        let info = build_delayed_structure(&m, 0).unwrap();
        let psi = Psi2::constant(1);
        let exact = solve_pbp_exact(&m, &info, &psi).unwrap();
        let reachable = exact.reachable_beliefs();
        let n = crate::rational::common_denominator(reachable.iter().flatten().flat_map(|b| b.weights().iter().map(|(_, p)| p)));
        let n: usize = n.try_into().unwrap();
        let a = solve_pbp_approx(&m, &info, &psi, n, false).unwrap();
        assert!(a.covers(&m, &info, &reachable));
        assert_eq!(a.value, exact.value);
        assert_eq!(a.estimate, exact.value);
    }

    #[test]
    fn vertex_lattice_by_hand() {
        // One step, two states, no useful observation: beliefs snap to the
        // nearest vertex and agent 1 plays the action that is best there.
        let mut m = model(6, 0);
        m.dists.x0 = Dist::new(vec![Rational::new(2, 5), Rational::new(3, 5)]);
        m.obs1 = vec![vec![vec![0, 0]; 2]];
        m.obs2 = m.obs1.clone();
        let info = build_delayed_structure(&m, 0).unwrap();
        let psi = Psi2::constant(0);
        let c = |x: usize, u: usize| m.cost[0][x][u][0].clone();
        let a = solve_pbp_approx(&m, &info, &psi, 1, false).unwrap();
        let u = if c(1, 1) < c(1, 0) { 1 } else { 0 };
        let expect = Rational::new(2, 5) * c(0, u) + Rational::new(3, 5) * c(1, u);
        assert_eq!(a.value, expect);
        assert_eq!(a.estimate, c(1, u));
    }

    #[test]
    fn lipschitz_matches_all_pairs() {
        let m = model(7, 1);
        let info = build_delayed_structure(&m, 0).unwrap();
        let psi = Psi2::constant(1);
        let a = solve_pbp_approx(&m, &info, &psi, 4, true).unwrap();
        let mut best = Rational::zero();
        for (t, table) in a.tables.iter().enumerate() {
            let l = &a.lattices[t];
            for ((q, a2), (v, _)) in table {
                for r in 0..l.len() {
                    if r == *q {
                        continue;
                    }
                    let d = crate::quantizer::tv_distance(&l.point(*q), &l.point(r)).unwrap();
                    let w = &table[&(r, a2.clone())].0;
                    best = best.max((v - w).abs() / d);
                }
            }
        }
        assert_eq!(a.lipschitz().unwrap(), best);
    }
}
