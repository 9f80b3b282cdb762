use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use num_traits::ToPrimitive;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::belief::{
    branch_belief2, initial_branches2, Belief1, Belief2, BeliefPrescription, Branch, PrivatePrescription,
};
use crate::error::{Error, Result};
use crate::info::InfoStructure;
use crate::model::TeamModel;
use crate::rational::{common_denominator, Rational};

use super::{digits, SolveOptions};

/// The minimizing prescription pair at one shared belief.
#[derive(Debug, Clone)]
pub struct PolicyEntry {
    pub value: Rational,
    pub gamma1: BeliefPrescription,
    pub gamma2: PrivatePrescription,
    /// Successor beliefs under the minimizing pair, by `Z2` realization.
    pub children: Vec<Branch<Arc<Belief2>>>,
}

#[derive(Debug, Clone)]
pub struct Root<B> {
    pub z: Vec<usize>,
    pub prob: Rational,
    pub belief: Arc<B>,
    pub value: Rational,
}

/// Optimal values and prescriptions at every shared belief reachable by the
/// recursion.
#[derive(Debug, Clone)]
pub struct ValuePolicy {
    pub horizon: usize,
    pub value: Rational,
    pub roots: Vec<Root<Belief2>>,
    pub memo: Vec<HashMap<Arc<Belief2>, Arc<PolicyEntry>>>,
}

impl ValuePolicy {
    pub fn entry(&self, t: usize, belief: &Belief2) -> Result<&Arc<PolicyEntry>> {
        self.memo
            .get(t)
            .and_then(|m| m.get(belief))
            .ok_or_else(|| Error::MissingKey(format!("no policy entry for a shared belief at t = {t}")))
    }

    pub fn root(&self, a2: &[usize]) -> Result<&Root<Belief2>> {
        self.roots
            .iter()
            .find(|r| r.z == a2)
            .ok_or_else(|| Error::MissingKey(format!("no root for A2[0] = {a2:?}")))
    }

    pub fn node_counts(&self) -> Vec<usize> {
        self.memo.iter().map(|m| m.len()).collect()
    }

    pub fn to_json(&self, model: &TeamModel, info: &InfoStructure) -> Value {
        let nodes: Vec<Value> = self
            .memo
            .iter()
            .enumerate()
            .flat_map(|(t, memo)| {
                let space = info.private_space(model, t);
                let mut entries: Vec<(&Arc<Belief2>, &Arc<PolicyEntry>)> = memo.iter().collect();
                entries.sort_by(|a, b| a.0.cmp(b.0));
                entries
                    .into_iter()
                    .map(|(belief, e)| {
                        json!({
                            "t": t,
                            "belief": belief.to_json(&space),
                            "value": e.value.to_string(),
                            "gamma1": e.gamma1.table().iter().map(|(b, u)| json!([b.to_json(&space), u])).collect::<Vec<_>>(),
                            "gamma2": space.tuples.iter().zip(&e.gamma2.actions).map(|(l, u)| json!([l, u])).collect::<Vec<_>>(),
                        })
                    })
                    .collect::<Vec<_>>()
            })
            .collect();
        json!({
            "value": self.value.to_string(),
            "value_f64": self.value.to_f64(),
            "roots": self.roots.iter().map(|r| json!({
                "a2": r.z, "prob": r.prob.to_string(), "value": r.value.to_string(),
            })).collect::<Vec<_>>(),
            "node_counts": self.node_counts(),
            "policy": nodes,
        })
    }
}

struct Exact<'a> {
    model: &'a TeamModel,
    info: &'a InfoStructure,
    options: SolveOptions,
    memo: Vec<RwLock<HashMap<Arc<Belief2>, Arc<PolicyEntry>>>>,
}

/// Shared-belief dynamic program: at every reachable shared belief, minimize
/// expected stage cost plus expected cost-to-go over all prescription pairs.
pub fn solve_exact(model: &TeamModel, info: &InfoStructure) -> Result<ValuePolicy> {
    solve_exact_with(model, info, SolveOptions::from_env())
}

pub fn solve_exact_with(model: &TeamModel, info: &InfoStructure, options: SolveOptions) -> Result<ValuePolicy> {
    model.ensure_valid()?;
    info.ensure_valid(model)?;
    let solver = Exact {
        model,
        info,
        options,
        memo: (0..=model.horizon).map(|_| RwLock::new(HashMap::new())).collect(),
    };
    let mut roots = Vec::new();
    let mut value = Rational::zero();
    for branch in initial_branches2(model, info)? {
        let belief = Arc::new(branch.belief);
        let entry = solver.node(&belief)?;
        value += &branch.prob * &entry.value;
        roots.push(Root {
            z: branch.z,
            prob: branch.prob,
            belief,
            value: entry.value.clone(),
        });
    }
    Ok(ValuePolicy {
        horizon: model.horizon,
        value,
        roots,
        memo: solver.memo.into_iter().map(|m| m.into_inner().expect("memo lock")).collect(),
    })
}

/// Per-node data shared by all candidates.
pub(crate) struct NodeFrame {
    pub domain: Vec<Arc<Belief1>>,
    /// `(state, private index, domain index, weight)` per support element.
    pub support: Vec<(usize, usize, usize, Rational)>,
    pub n_private: usize,
    pub n1: usize,
    pub n2: usize,
    pub count1: u128,
    pub count2: u128,
}

impl NodeFrame {
    pub fn new(model: &TeamModel, info: &InfoStructure, pi2: &Belief2, budget: u128) -> Result<Self> {
        let t = pi2.t;
        let domain = pi2.pi1_support();
        let support = pi2
            .weights()
            .iter()
            .map(|((x, l, b), p)| (*x, *l, domain.binary_search(b).expect("domain contains support"), p.clone()))
            .collect();
        let n_private = info.private_space(model, t).len();
        let (n1, n2) = (model.nu1(t), model.nu2(t));
        let pow = |base: usize, exp: usize| (base as u128).checked_pow(exp as u32);
        let count1 = pow(n1, domain.len());
        let count2 = pow(n2, n_private);
        let total = count1.zip(count2).and_then(|(a, b)| a.checked_mul(b));
        match total {
            Some(c) if c <= budget => Ok(NodeFrame {
                domain,
                support,
                n_private,
                n1,
                n2,
                count1: count1.unwrap(),
                count2: count2.unwrap(),
            }),
            _ => Err(Error::ResourceLimit(format!(
                "{}^{} x {}^{} prescription pairs at t = {t} exceed the budget of {budget} (set NESTED_DP_BUDGET)",
                n1,
                domain.len(),
                n2,
                n_private
            ))),
        }
    }

    pub fn gamma1(&self, t: usize, index: u128) -> BeliefPrescription {
        BeliefPrescription::from_domain(t, &self.domain, &digits(index, self.n1, self.domain.len()))
    }

    pub fn gamma2(&self, t: usize, index: u128) -> PrivatePrescription {
        PrivatePrescription::new(t, digits(index, self.n2, self.n_private))
    }

    /// `table[k][u1]`: cost mass of domain belief `k` when agent 1 plays `u1`.
    pub fn cost_table(&self, model: &TeamModel, t: usize, gamma2: &PrivatePrescription) -> Vec<Vec<Rational>> {
        let mut table = vec![vec![Rational::zero(); self.n1]; self.domain.len()];
        for (x, l, k, p) in &self.support {
            let u2 = gamma2.action(*l);
            for (u1, cell) in table[*k].iter_mut().enumerate() {
                *cell += p * model.stage_cost(t, *x, u1, u2);
            }
        }
        table
    }
}

fn table_cost(table: &[Vec<Rational>], actions: &[usize]) -> Rational {
    table.iter().zip(actions).map(|(row, &u)| &row[u]).sum()
}

impl Exact<'_> {
    fn node(&self, pi2: &Arc<Belief2>) -> Result<Arc<PolicyEntry>> {
        let t = pi2.t;
        if let Some(e) = self.memo[t].read().expect("memo lock").get(pi2) {
            return Ok(e.clone());
        }
        let frame = NodeFrame::new(self.model, self.info, pi2, self.options.budget)?;
        let entry = if t == self.model.horizon {
            self.terminal(t, &frame)?
        } else {
            self.interior(t, pi2, &frame)?
        };
        let entry = Arc::new(entry);
        let mut memo = self.memo[t].write().expect("memo lock");
        Ok(memo.entry(pi2.clone()).or_insert(entry).clone())
    }

    /// Last stage: only the immediate cost matters. Costs are scaled to a
    /// common denominator so candidates are compared in integer arithmetic.
    fn terminal(&self, t: usize, frame: &NodeFrame) -> Result<PolicyEntry> {
        let tables: Vec<Vec<Vec<Rational>>> = (0..frame.count2)
            .map(|j| frame.cost_table(self.model, t, &frame.gamma2(t, j)))
            .collect();
        let denom = common_denominator(tables.iter().flatten().flatten());
        let scaled: Option<Vec<Vec<Vec<i128>>>> = tables
            .iter()
            .map(|table| {
                table
                    .iter()
                    .map(|row| row.iter().map(|c| (c.numer() * (&denom / c.denom())).to_i128()).collect())
                    .collect()
            })
            .collect();
        let k = frame.domain.len();
        let (best_i, best_j) = match scaled {
            Some(scaled) => {
                let best = (0..frame.count1)
                    .into_par_iter()
                    .map(|i| {
                        let acts = digits(i, frame.n1, k);
                        let mut local: Option<(i128, u128, u128)> = None;
                        for (j, table) in scaled.iter().enumerate() {
                            let v: i128 = table.iter().zip(&acts).map(|(row, &u)| row[u]).sum();
                            if local.is_none_or(|(b, _, _)| v < b) {
                                local = Some((v, i, j as u128));
                            }
                        }
                        local.expect("at least one candidate")
                    })
                    .min()
                    .expect("at least one candidate");
                (best.1, best.2)
            }
            _ => {
                let mut best: Option<(Rational, u128, u128)> = None;
                for i in 0..frame.count1 {
                    let acts = digits(i, frame.n1, k);
                    for (j, table) in tables.iter().enumerate() {
                        let v = table_cost(table, &acts);
                        if best.as_ref().is_none_or(|(b, _, _)| v < *b) {
                            best = Some((v, i, j as u128));
                        }
                    }
                }
                let b = best.expect("at least one candidate");
                (b.1, b.2)
            }
        };
        let value = table_cost(&tables[best_j as usize], &digits(best_i, frame.n1, k));
        Ok(PolicyEntry {
            value,
            gamma1: frame.gamma1(t, best_i),
            gamma2: frame.gamma2(t, best_j),
            children: Vec::new(),
        })
    }

    fn interior(&self, t: usize, pi2: &Arc<Belief2>, frame: &NodeFrame) -> Result<PolicyEntry> {
        let tables: Vec<Vec<Vec<Rational>>> = (0..frame.count2)
            .map(|j| frame.cost_table(self.model, t, &frame.gamma2(t, j)))
            .collect();
        let total = frame.count1 * frame.count2;
        let candidates: Vec<(Rational, u128)> = (0..total)
            .into_par_iter()
            .map(|c| -> Result<(Rational, u128)> {
                let (i, j) = (c / frame.count2, c % frame.count2);
                let acts = digits(i, frame.n1, frame.domain.len());
                let gamma1 = BeliefPrescription::from_domain(t, &frame.domain, &acts);
                let gamma2 = frame.gamma2(t, j);
                let mut value = table_cost(&tables[j as usize], &acts);
                for branch in branch_belief2(self.model, self.info, pi2, &gamma1, &gamma2)? {
                    let child = self.node(&Arc::new(branch.belief))?;
                    value += &branch.prob * &child.value;
                }
                Ok((value, c))
            })
            .collect::<Result<_>>()?;
        let (value, c) = candidates.into_iter().min().expect("at least one candidate");
        let (i, j) = (c / frame.count2, c % frame.count2);
        let gamma1 = frame.gamma1(t, i);
        let gamma2 = frame.gamma2(t, j);
        let mut children = Vec::new();
        for branch in branch_belief2(self.model, self.info, pi2, &gamma1, &gamma2)? {
            let belief = Arc::new(branch.belief);
            self.node(&belief)?;
            children.push(Branch {
                z: branch.z,
                prob: branch.prob,
                belief,
            });
        }
        Ok(PolicyEntry {
            value,
            gamma1,
            gamma2,
            children,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::belief::expected_cost2;
    use crate::generate::{random_team_model, Dims};
    use crate::info::build_delayed_structure;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn dims() -> Dims {
        Dims { x: 2, u1: 2, u2: 2, w: 2, v1: 2, v2: 2, y1: 2, y2: 2 }
    }

    #[test]
    fn single_stage_is_a_static_minimization() {
        let m = random_team_model(&mut ChaCha8Rng::seed_from_u64(11), dims(), 0);
        let info = build_delayed_structure(&m, 1).unwrap();
        let vp = solve_exact(&m, &info).unwrap();
        let root = initial_branches2(&m, &info).unwrap().remove(0).belief;
        let frame = NodeFrame::new(&m, &info, &root, u128::MAX).unwrap();
        let mut best: Option<Rational> = None;
        for i in 0..frame.count1 {
            for j in 0..frame.count2 {
                let v = expected_cost2(&m, &root, &frame.gamma1(0, i), &frame.gamma2(0, j)).unwrap();
                best = Some(best.map_or(v.clone(), |b: Rational| b.min(v)));
            }
        }
        assert_eq!(vp.value, best.unwrap());
    }

    #[test]
    fn zero_cost_gives_zero() {
        let mut m = random_team_model(&mut ChaCha8Rng::seed_from_u64(12), dims(), 2);
        for c in m.cost.iter_mut().flatten().flatten().flatten() {
            *c = Rational::zero();
        }
        let info = build_delayed_structure(&m, 1).unwrap();
        assert!(solve_exact(&m, &info).unwrap().value.is_zero());
    }

    #[test]
    fn budget_is_enforced() {
        let m = random_team_model(&mut ChaCha8Rng::seed_from_u64(13), dims(), 2);
        let info = build_delayed_structure(&m, 1).unwrap();
        let err = solve_exact_with(&m, &info, SolveOptions { budget: 8 }).unwrap_err();
        assert!(matches!(err, Error::ResourceLimit(_)));
    }

    #[test]
    fn memo_values_are_reproducible() {
        let m = random_team_model(&mut ChaCha8Rng::seed_from_u64(14), dims(), 1);
        let info = build_delayed_structure(&m, 1).unwrap();
        let a = solve_exact(&m, &info).unwrap();
        let b = solve_exact(&m, &info).unwrap();
        assert_eq!(a.value, b.value);
        for (ma, mb) in a.memo.iter().zip(&b.memo) {
            assert_eq!(ma.len(), mb.len());
            for (k, e) in ma {
                assert_eq!(e.value, mb[k].value);
                assert!(!e.value.is_negative());
                assert_eq!(e.gamma1.table().len(), k.pi1_support().len());
            }
        }
    }
}
