use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::belief::{branch_belief1, expected_cost1, initial_branches1, Belief1, PrivatePrescription};
use crate::error::{Error, Result};
use crate::info::{splice, InfoStructure};
use crate::model::TeamModel;
use crate::rational::Rational;

use super::exact::Root;

/// A fixed agent-2 prescription for every `(t, accessible data)`; entries not
/// listed fall back to a constant action when `default` is set.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Psi2 {
    pub default: Option<usize>,
    pub entries: BTreeMap<(usize, Vec<usize>), Vec<usize>>,
}

#[derive(Serialize, Deserialize)]
struct Psi2Entry {
    t: usize,
    a2: Vec<usize>,
    actions: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct Psi2Doc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    default: Option<usize>,
    #[serde(default)]
    prescriptions: Vec<Psi2Entry>,
}

impl Psi2 {
    pub fn constant(action: usize) -> Self {
        Psi2 {
            default: Some(action),
            entries: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, t: usize, a2: Vec<usize>, actions: Vec<usize>) {
        self.entries.insert((t, a2), actions);
    }

    pub fn get(&self, model: &TeamModel, info: &InfoStructure, t: usize, a2: &[usize]) -> Result<PrivatePrescription> {
        let n_private = info.private_space(model, t).len();
        let actions = match self.entries.get(&(t, a2.to_vec())) {
            Some(a) => a.clone(),
            None => match self.default {
                Some(u) => vec![u; n_private],
                None => return Err(Error::MissingKey(format!("no agent-2 prescription for t = {t}, A2 = {a2:?}"))),
            },
        };
        if actions.len() != n_private {
            return Err(Error::DimensionMismatch(format!(
                "agent-2 prescription at t = {t} has {} entries for {n_private} private tuples",
                actions.len()
            )));
        }
        if let Some(u) = actions.iter().find(|&&u| u >= model.nu2(t)) {
            return Err(Error::OutOfRange(format!("agent-2 action {u} at t = {t}")));
        }
        Ok(PrivatePrescription::new(t, actions))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: Psi2Doc = serde_json::from_str(text)?;
        let mut psi = Psi2 {
            default: doc.default,
            entries: BTreeMap::new(),
        };
        for e in doc.prescriptions {
            psi.insert(e.t, e.a2, e.actions);
        }
        Ok(psi)
    }

    pub fn to_json(&self) -> Value {
        serde_json::to_value(Psi2Doc {
            default: self.default,
            prescriptions: self
                .entries
                .iter()
                .map(|((t, a2), actions)| Psi2Entry { t: *t, a2: a2.clone(), actions: actions.clone() })
                .collect(),
        })
        .expect("prescriptions serialize")
    }
}

#[derive(Debug, Clone)]
pub struct PbpChild {
    pub z: Vec<usize>,
    pub prob: Rational,
    pub belief: Arc<Belief1>,
    pub a2: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct PbpEntry {
    pub value: Rational,
    pub u1: usize,
    /// Successors under the minimizing action.
    pub children: Vec<PbpChild>,
}

pub type PbpKey = (Arc<Belief1>, Vec<usize>);

#[derive(Debug, Clone)]
pub struct PbpPolicy {
    pub value: Rational,
    pub roots: Vec<(Root<Belief1>, Vec<usize>)>,
    pub memo: Vec<HashMap<PbpKey, Arc<PbpEntry>>>,
}

impl PbpPolicy {
    pub fn entry(&self, t: usize, belief: &Arc<Belief1>, a2: &[usize]) -> Result<&Arc<PbpEntry>> {
        self.memo
            .get(t)
            .and_then(|m| m.get(&(belief.clone(), a2.to_vec())))
            .ok_or_else(|| Error::MissingKey(format!("no agent-1 policy entry at t = {t}, A2 = {a2:?}")))
    }

    /// Every agent-1 belief met by the recursion, by stage.
    pub fn reachable_beliefs(&self) -> Vec<Vec<Arc<Belief1>>> {
        self.memo
            .iter()
            .map(|m| {
                let mut v: Vec<Arc<Belief1>> = m.keys().map(|(b, _)| b.clone()).collect();
                v.sort();
                v.dedup();
                v
            })
            .collect()
    }

    pub fn to_json(&self, model: &TeamModel, info: &InfoStructure) -> Value {
        let mut policy = Vec::new();
        for (t, memo) in self.memo.iter().enumerate() {
            let space = info.private_space(model, t);
            let mut entries: Vec<_> = memo.iter().collect();
            entries.sort_by(|a, b| a.0.cmp(b.0));
            for ((b, a2), e) in entries {
                policy.push(json!({
                    "t": t, "a2": a2, "belief": b.to_json(&space),
                    "value": e.value.to_string(), "u1": e.u1,
                }));
            }
        }
        json!({
            "value": self.value.to_string(),
            "value_f64": self.value.to_f64(),
            "roots": self.roots.iter().map(|(r, a2)| json!({
                "z1": r.z, "a2": a2, "prob": r.prob.to_string(), "value": r.value.to_string(),
            })).collect::<Vec<_>>(),
            "node_counts": self.memo.iter().map(|m| m.len()).collect::<Vec<_>>(),
            "policy": policy,
        })
    }
}

pub(crate) struct Pbp<'a> {
    pub model: &'a TeamModel,
    pub info: &'a InfoStructure,
    pub psi2: &'a Psi2,
    memo: Vec<HashMap<PbpKey, Arc<PbpEntry>>>,
}

impl<'a> Pbp<'a> {
    pub fn new(model: &'a TeamModel, info: &'a InfoStructure, psi2: &'a Psi2) -> Self {
        Pbp {
            model,
            info,
            psi2,
            memo: vec![HashMap::new(); model.horizon + 1],
        }
    }

    /// Successors of `(pi1, a2)` under agent-1 action `u1`.
    pub fn step(&self, pi1: &Belief1, a2: &[usize], u1: usize) -> Result<(Rational, Vec<PbpChild>)> {
        let t = pi1.t;
        let gamma2 = self.psi2.get(self.model, self.info, t, a2)?;
        let cost = expected_cost1(self.model, pi1, u1, &gamma2);
        if t == self.model.horizon {
            return Ok((cost, Vec::new()));
        }
        let plan = self.info.plan(t)?;
        let children = branch_belief1(self.model, self.info, pi1, u1, &gamma2)?
            .into_iter()
            .map(|b| PbpChild {
                a2: splice(&plan.a2_from_z1, a2, &b.z),
                z: b.z,
                prob: b.prob,
                belief: Arc::new(b.belief),
            })
            .collect();
        Ok((cost, children))
    }

    fn node(&mut self, pi1: &Arc<Belief1>, a2: &[usize]) -> Result<Arc<PbpEntry>> {
        let t = pi1.t;
        let key = (pi1.clone(), a2.to_vec());
        if let Some(e) = self.memo[t].get(&key) {
            return Ok(e.clone());
        }
        let mut best: Option<PbpEntry> = None;
        for u1 in 0..self.model.nu1(t) {
            let (mut value, children) = self.step(pi1, a2, u1)?;
            for c in &children {
                value += &c.prob * &self.node(&c.belief, &c.a2)?.value;
            }
            if best.as_ref().is_none_or(|b| value < b.value) {
                best = Some(PbpEntry { value, u1, children });
            }
        }
        let entry = Arc::new(best.expect("at least one action"));
        self.memo[t].insert(key, entry.clone());
        Ok(entry)
    }
}

/// Agent 1's optimal response to the fixed agent-2 prescriptions `psi2`.
pub fn solve_pbp_exact(model: &TeamModel, info: &InfoStructure, psi2: &Psi2) -> Result<PbpPolicy> {
    model.ensure_valid()?;
    info.ensure_valid(model)?;
    let init = info.initial_plan()?;
    let mut pbp = Pbp::new(model, info, psi2);
    let mut roots = Vec::new();
    let mut value = Rational::zero();
    for b in initial_branches1(model, info)? {
        let a2 = splice(&init.a2_from_z1, &[], &b.z);
        let belief = Arc::new(b.belief);
        let entry = pbp.node(&belief, &a2)?;
        value += &b.prob * &entry.value;
        roots.push((
            Root {
                z: b.z,
                prob: b.prob,
                belief,
                value: entry.value.clone(),
            },
            a2,
        ));
    }
    Ok(PbpPolicy {
        value,
        roots,
        memo: pbp.memo,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::{random_team_model, Dims};
    use crate::info::build_delayed_structure;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn model(seed: u64, horizon: usize) -> TeamModel {
        let dims = Dims { x: 2, u1: 2, u2: 2, w: 2, v1: 2, v2: 2, y1: 2, y2: 2 };
        random_team_model(&mut ChaCha8Rng::seed_from_u64(seed), dims, horizon)
    }

    #[test]
    fn single_stage_minimizes_each_initial_belief() {
        let m = model(21, 0);
        let info = build_delayed_structure(&m, 1).unwrap();
        let psi = Psi2::constant(1);
        let p = solve_pbp_exact(&m, &info, &psi).unwrap();
        let mut expect = Rational::zero();
        for b in initial_branches1(&m, &info).unwrap() {
            let g2 = PrivatePrescription::constant(0, 2, 1);
            let best = (0..2).map(|u| expected_cost1(&m, &b.belief, u, &g2)).min().unwrap();
            expect += b.prob * best;
        }
        assert_eq!(p.value, expect);
    }

    #[test]
    fn action_only_costs_decouple_by_stage() {
        let mut m = model(22, 2);
        for t in 0..=2 {
            for x in 0..2 {
                for u1 in 0..2 {
                    for u2 in 0..2 {
                        m.cost[t][x][u1][u2] = Rational::from_integer((3 * t + 2 * u1 + 1) as i64 % 5);
                    }
                }
            }
        }
        let info = build_delayed_structure(&m, 1).unwrap();
        let p = solve_pbp_exact(&m, &info, &Psi2::constant(0)).unwrap();
        let expect: i64 = (0..=2).map(|t| (0..2).map(|u1| (3 * t + 2 * u1 + 1) % 5).min().unwrap()).sum();
        assert_eq!(p.value, Rational::from_integer(expect));
    }

    #[test]
    fn missing_prescription_is_reported() {
        let m = model(23, 1);
        let info = build_delayed_structure(&m, 1).unwrap();
        let err = solve_pbp_exact(&m, &info, &Psi2::default()).unwrap_err();
        assert!(matches!(err, Error::MissingKey(_)));
    }

    #[test]
    fn psi2_json_round_trip() {
        let mut psi = Psi2::constant(1);
        psi.insert(1, vec![0, 1], vec![1, 0]);
        let back = Psi2::from_json(&psi.to_json().to_string()).unwrap();
        assert_eq!(back, psi);
    }
}
