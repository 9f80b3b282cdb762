//! Information states and their Bayes updates.
//!
//! [`Belief1`] is agent 1's belief over `(state, private tuple of agent 2)`.
//! [`Belief2`] is the shared belief over `(state, private tuple, Belief1)`.
//! Both are canonical: support sorted, zero weights dropped, rationals in
//! lowest terms, so equal distributions compare and hash equal.
//!
//! Updates take prescriptions rather than strategies, which is what makes
//! them strategy independent. Each update enumerates the disturbance and both
//! measurement noises, maps every sample through the model tables, and groups
//! the mass by the realization of the newly received information.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::info::{Fresh, InfoStructure, PrivateSpace, StepPlan};
use crate::model::{Agent, TeamModel};
use crate::rational::Rational;

/// `(state, private index)`.
pub type Key1 = (usize, usize);
/// `(state, private index, agent 1's belief)`.
pub type Key2 = (usize, usize, Arc<Belief1>);

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Belief1 {
    pub t: usize,
    weights: Vec<(Key1, Rational)>,
}

impl Belief1 {
    pub fn from_map(t: usize, map: BTreeMap<Key1, Rational>) -> Self {
        Belief1 {
            t,
            weights: map.into_iter().filter(|(_, p)| !p.is_zero()).collect(),
        }
    }

    /// Normalizes unnormalized mass; `None` when the total is zero.
    pub fn normalize(t: usize, mass: BTreeMap<Key1, Rational>) -> Option<(Rational, Self)> {
        let total: Rational = mass.values().sum();
        if total.is_zero() {
            return None;
        }
        let inv = total.recip();
        let map = mass.into_iter().map(|(k, p)| (k, p * &inv)).collect();
        Some((total, Belief1::from_map(t, map)))
    }

    pub fn point_mass(t: usize, x: usize, l: usize) -> Self {
        Belief1 {
            t,
            weights: vec![((x, l), Rational::one())],
        }
    }

    pub fn weights(&self) -> &[(Key1, Rational)] {
        &self.weights
    }

    pub fn prob(&self, x: usize, l: usize) -> Rational {
        match self.weights.binary_search_by(|(k, _)| k.cmp(&(x, l))) {
            Ok(i) => self.weights[i].1.clone(),
            Err(_) => Rational::zero(),
        }
    }

    pub fn total(&self) -> Rational {
        self.weights.iter().map(|(_, p)| p).sum()
    }

    /// Dense vector indexed by `x * n_private + l`.
    pub fn to_vector(&self, nx: usize, n_private: usize) -> Vec<Rational> {
        let mut out = vec![Rational::zero(); nx * n_private];
        for ((x, l), p) in &self.weights {
            out[x * n_private + l] = p.clone();
        }
        out
    }

    pub fn from_vector(t: usize, n_private: usize, vector: &[Rational]) -> Self {
        let map = vector
            .iter()
            .enumerate()
            .map(|(i, p)| ((i / n_private, i % n_private), p.clone()))
            .collect();
        Belief1::from_map(t, map)
    }

    pub fn to_json(&self, space: &PrivateSpace) -> Value {
        Value::Array(
            self.weights
                .iter()
                .map(|((x, l), p)| json!([[x, space.tuples[*l]], p.to_string()]))
                .collect(),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Belief2 {
    pub t: usize,
    weights: Vec<(Key2, Rational)>,
}

impl Belief2 {
    pub fn from_map(t: usize, map: BTreeMap<Key2, Rational>) -> Self {
        Belief2 {
            t,
            weights: map.into_iter().filter(|(_, p)| !p.is_zero()).collect(),
        }
    }

    pub fn normalize(t: usize, mass: BTreeMap<Key2, Rational>) -> Option<(Rational, Self)> {
        let total: Rational = mass.values().sum();
        if total.is_zero() {
            return None;
        }
        let inv = total.recip();
        let map = mass.into_iter().map(|(k, p)| (k, p * &inv)).collect();
        Some((total, Belief2::from_map(t, map)))
    }

    pub fn weights(&self) -> &[(Key2, Rational)] {
        &self.weights
    }

    pub fn total(&self) -> Rational {
        self.weights.iter().map(|(_, p)| p).sum()
    }

    /// Distinct agent-1 beliefs in the support, sorted.
    pub fn pi1_support(&self) -> Vec<Arc<Belief1>> {
        let mut out: Vec<Arc<Belief1>> = self.weights.iter().map(|((_, _, b), _)| b.clone()).collect();
        out.sort();
        out.dedup();
        out
    }

    /// Marginal over `(state, private index)`.
    pub fn marginal(&self) -> BTreeMap<Key1, Rational> {
        let mut out: BTreeMap<Key1, Rational> = BTreeMap::new();
        for ((x, l, _), p) in &self.weights {
            *out.entry((*x, *l)).or_default() += p;
        }
        out
    }

    pub fn to_json(&self, space: &PrivateSpace) -> Value {
        Value::Array(
            self.weights
                .iter()
                .map(|((x, l, b), p)| json!([[x, space.tuples[*l], b.to_json(space)], p.to_string()]))
                .collect(),
        )
    }
}

/// `Theta^k`: agent 1's filter over its own state (`(x1, 0)` keys) or agent
/// 2's accessible-data filter over `(x2, private index)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Theta {
    pub agent: Agent,
    pub t: usize,
    weights: Vec<(Key1, Rational)>,
}

impl Theta {
    pub fn from_map(agent: Agent, t: usize, map: BTreeMap<Key1, Rational>) -> Self {
        Theta {
            agent,
            t,
            weights: map.into_iter().filter(|(_, p)| !p.is_zero()).collect(),
        }
    }

    pub fn normalize(agent: Agent, t: usize, mass: BTreeMap<Key1, Rational>) -> Option<(Rational, Self)> {
        let total: Rational = mass.values().sum();
        if total.is_zero() {
            return None;
        }
        let inv = total.recip();
        Some((total, Theta::from_map(agent, t, mass.into_iter().map(|(k, p)| (k, p * &inv)).collect())))
    }

    pub fn weights(&self) -> &[(Key1, Rational)] {
        &self.weights
    }

    pub fn prob(&self, key: Key1) -> Rational {
        match self.weights.binary_search_by(|(k, _)| k.cmp(&key)) {
            Ok(i) => self.weights[i].1.clone(),
            Err(_) => Rational::zero(),
        }
    }
}

/// Agent 2's prescription: one action per private tuple, by index.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PrivatePrescription {
    pub t: usize,
    pub actions: Vec<usize>,
}

impl PrivatePrescription {
    pub fn new(t: usize, actions: Vec<usize>) -> Self {
        PrivatePrescription { t, actions }
    }

    pub fn constant(t: usize, n_private: usize, action: usize) -> Self {
        PrivatePrescription {
            t,
            actions: vec![action; n_private],
        }
    }

    #[inline]
    pub fn action(&self, l: usize) -> usize {
        self.actions[l]
    }
}

/// Agent 1's prescription restricted to finitely many beliefs.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BeliefPrescription {
    pub t: usize,
    table: Vec<(Arc<Belief1>, usize)>,
}

impl BeliefPrescription {
    pub fn new(t: usize, mut table: Vec<(Arc<Belief1>, usize)>) -> Self {
        table.sort_by(|a, b| a.0.cmp(&b.0));
        table.dedup_by(|a, b| a.0 == b.0);
        BeliefPrescription { t, table }
    }

    /// Assigns `actions[i]` to the `i`-th belief of a sorted domain.
    pub fn from_domain(t: usize, domain: &[Arc<Belief1>], actions: &[usize]) -> Self {
        BeliefPrescription::new(t, domain.iter().cloned().zip(actions.iter().copied()).collect())
    }

    pub fn table(&self) -> &[(Arc<Belief1>, usize)] {
        &self.table
    }

    pub fn get(&self, belief: &Belief1) -> Result<usize> {
        self.table
            .binary_search_by(|(b, _)| b.as_ref().cmp(belief))
            .map(|i| self.table[i].1)
            .map_err(|_| Error::DomainGap(format!("no action for an agent-1 belief at t = {}", self.t)))
    }
}

/// One realization of new information with its probability and posterior.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Branch<B> {
    pub z: Vec<usize>,
    pub prob: Rational,
    pub belief: B,
}

/// Joint law of `(W[t], V1[t+1], V2[t+1])`, support only.
pub(crate) fn noise_samples(model: &TeamModel, t: usize) -> Vec<(usize, usize, usize, Rational)> {
    let mut out = Vec::new();
    for (w, pw) in model.dists.w[t].support() {
        for (v1, p1) in model.dists.v1[t + 1].support() {
            let p_w1 = pw * p1;
            for (v2, p2) in model.dists.v2[t + 1].support() {
                out.push((w, v1, v2, &p_w1 * p2));
            }
        }
    }
    out
}

/// Samples `(x', y1', y2')` reached from `x` under actions `(u1, u2)`, with
/// their noise probability.
pub(crate) fn successors<'a>(
    model: &'a TeamModel,
    t: usize,
    noise: &'a [(usize, usize, usize, Rational)],
    x: usize,
    u1: usize,
    u2: usize,
) -> impl Iterator<Item = (usize, usize, usize, &'a Rational)> + 'a {
    noise.iter().map(move |(w, v1, v2, p)| {
        let next = model.next_state(t, x, u1, u2, *w);
        let y1 = model.observe(Agent::One, t + 1, next, *v1);
        let y2 = model.observe(Agent::Two, t + 1, next, *v2);
        (next, y1, y2, p)
    })
}

fn check_stage(model: &TeamModel, t: usize) -> Result<()> {
    if t >= model.horizon {
        return Err(Error::OutOfRange(format!("no update from stage {t} with horizon {}", model.horizon)));
    }
    Ok(())
}

fn check_private(gamma2: &PrivatePrescription, space: &PrivateSpace, model: &TeamModel, t: usize) -> Result<()> {
    if gamma2.actions.len() != space.len() {
        return Err(Error::DimensionMismatch(format!(
            "agent 2 prescription has {} entries for {} private tuples",
            gamma2.actions.len(),
            space.len()
        )));
    }
    if let Some(&u) = gamma2.actions.iter().find(|&&u| u >= model.nu2(t)) {
        return Err(Error::OutOfRange(format!("agent 2 action {u} at t = {t}")));
    }
    Ok(())
}

struct Transition<'a> {
    plan: &'a StepPlan,
    here: PrivateSpace,
    next: PrivateSpace,
    noise: Vec<(usize, usize, usize, Rational)>,
}

impl<'a> Transition<'a> {
    fn new(model: &TeamModel, info: &'a InfoStructure, t: usize) -> Result<Self> {
        check_stage(model, t)?;
        Ok(Transition {
            plan: info.plan(t)?,
            here: info.private_space(model, t),
            next: info.private_space(model, t + 1),
            noise: noise_samples(model, t),
        })
    }
}

/// Every positive-probability realization of `Z1[t+1]` given `(pi1, u1, gamma2)`.
pub fn branch_belief1(
    model: &TeamModel,
    info: &InfoStructure,
    pi1: &Belief1,
    u1: usize,
    gamma2: &PrivatePrescription,
) -> Result<Vec<Branch<Belief1>>> {
    let t = pi1.t;
    let tr = Transition::new(model, info, t)?;
    check_private(gamma2, &tr.here, model, t)?;
    if u1 >= model.nu1(t) {
        return Err(Error::OutOfRange(format!("agent 1 action {u1} at t = {t}")));
    }
    let mut mass: BTreeMap<Vec<usize>, BTreeMap<Key1, Rational>> = BTreeMap::new();
    for ((x, l), p) in pi1.weights() {
        let prev = &tr.here.tuples[*l];
        let u2 = gamma2.action(*l);
        for (next, y1, y2, q) in successors(model, t, &tr.noise, *x, u1, u2) {
            let fresh = Fresh { y1, y2, u1, u2 };
            let l_next = tr.next.index(&StepPlan::realize(&tr.plan.l2, prev, fresh));
            let z1 = StepPlan::realize(&tr.plan.z1, prev, fresh);
            *mass.entry(z1).or_default().entry((next, l_next)).or_default() += p * q;
        }
    }
    Ok(mass
        .into_iter()
        .filter_map(|(z, m)| Belief1::normalize(t + 1, m).map(|(prob, belief)| Branch { z, prob, belief }))
        .collect())
}

/// Agent 1's belief after receiving `z1`.
pub fn update_belief1(
    model: &TeamModel,
    info: &InfoStructure,
    pi1: &Belief1,
    u1: usize,
    gamma2: &PrivatePrescription,
    z1: &[usize],
) -> Result<Belief1> {
    branch_belief1(model, info, pi1, u1, gamma2)?
        .into_iter()
        .find(|b| b.z == z1)
        .map(|b| b.belief)
        .ok_or_else(|| Error::ZeroProbabilityObservation(format!("Z1 = {z1:?} at t = {}", pi1.t + 1)))
}

/// Every positive-probability realization of `Z2[t+1]` given `(pi2, gamma1, gamma2)`.
pub fn branch_belief2(
    model: &TeamModel,
    info: &InfoStructure,
    pi2: &Belief2,
    gamma1: &BeliefPrescription,
    gamma2: &PrivatePrescription,
) -> Result<Vec<Branch<Belief2>>> {
    let t = pi2.t;
    let tr = Transition::new(model, info, t)?;
    check_private(gamma2, &tr.here, model, t)?;

    let mut children: HashMap<Arc<Belief1>, HashMap<Vec<usize>, Arc<Belief1>>> = HashMap::new();
    for pi1 in pi2.pi1_support() {
        let u1 = gamma1.get(&pi1)?;
        let branches = branch_belief1(model, info, &pi1, u1, gamma2)?;
        children.insert(pi1, branches.into_iter().map(|b| (b.z, Arc::new(b.belief))).collect());
    }

    let mut mass: BTreeMap<Vec<usize>, BTreeMap<Key2, Rational>> = BTreeMap::new();
    for ((x, l, pi1), p) in pi2.weights() {
        let prev = &tr.here.tuples[*l];
        let u1 = gamma1.get(pi1)?;
        let u2 = gamma2.action(*l);
        let next_pi1 = &children[pi1];
        for (next, y1, y2, q) in successors(model, t, &tr.noise, *x, u1, u2) {
            let fresh = Fresh { y1, y2, u1, u2 };
            let l_next = tr.next.index(&StepPlan::realize(&tr.plan.l2, prev, fresh));
            let z1 = StepPlan::realize(&tr.plan.z1, prev, fresh);
            let z2 = StepPlan::realize(&tr.plan.z2, prev, fresh);
            let child = next_pi1.get(&z1).ok_or_else(|| {
                Error::ZeroProbabilityObservation(format!(
                    "support element ({x}, {l}) has zero weight under its own agent-1 belief at t = {t}"
                ))
            })?;
            *mass.entry(z2).or_default().entry((next, l_next, child.clone())).or_default() += p * q;
        }
    }
    Ok(mass
        .into_iter()
        .filter_map(|(z, m)| Belief2::normalize(t + 1, m).map(|(prob, belief)| Branch { z, prob, belief }))
        .collect())
}

/// The shared belief after `z2` is made accessible.
pub fn update_belief2(
    model: &TeamModel,
    info: &InfoStructure,
    pi2: &Belief2,
    gamma1: &BeliefPrescription,
    gamma2: &PrivatePrescription,
    z2: &[usize],
) -> Result<Belief2> {
    branch_belief2(model, info, pi2, gamma1, gamma2)?
        .into_iter()
        .find(|b| b.z == z2)
        .map(|b| b.belief)
        .ok_or_else(|| Error::ZeroProbabilityObservation(format!("Z2 = {z2:?} at t = {}", pi2.t + 1)))
}

/// `E[c_t(X, u1, gamma2(L)) | pi1]`.
pub fn expected_cost1(model: &TeamModel, pi1: &Belief1, u1: usize, gamma2: &PrivatePrescription) -> Rational {
    pi1.weights()
        .iter()
        .map(|((x, l), p)| model.stage_cost(pi1.t, *x, u1, gamma2.action(*l)) * p)
        .sum()
}

/// `E[c_t(X, gamma1(Pi1), gamma2(L)) | pi2]`.
pub fn expected_cost2(
    model: &TeamModel,
    pi2: &Belief2,
    gamma1: &BeliefPrescription,
    gamma2: &PrivatePrescription,
) -> Result<Rational> {
    let mut total = Rational::zero();
    for ((x, l, pi1), p) in pi2.weights() {
        total += model.stage_cost(pi2.t, *x, gamma1.get(pi1)?, gamma2.action(*l)) * p;
    }
    Ok(total)
}

/// Stage-0 samples `(x0, y1, y2, prob)`.
fn initial_samples(model: &TeamModel) -> Vec<(usize, usize, usize, Rational)> {
    let mut out = Vec::new();
    for (x, px) in model.dists.x0.support() {
        for (v1, p1) in model.dists.v1[0].support() {
            let p_x1 = px * p1;
            for (v2, p2) in model.dists.v2[0].support() {
                let y1 = model.observe(Agent::One, 0, x, v1);
                let y2 = model.observe(Agent::Two, 0, x, v2);
                out.push((x, y1, y2, &p_x1 * p2));
            }
        }
    }
    out
}

/// Every positive-probability realization of `Z1[0] = M1[0]`.
pub fn initial_branches1(model: &TeamModel, info: &InfoStructure) -> Result<Vec<Branch<Belief1>>> {
    let plan = info.initial_plan()?;
    let space = info.private_space(model, 0);
    let mut mass: BTreeMap<Vec<usize>, BTreeMap<Key1, Rational>> = BTreeMap::new();
    for (x, y1, y2, p) in initial_samples(model) {
        let fresh = Fresh { y1, y2, u1: 0, u2: 0 };
        let l = space.index(&StepPlan::realize(&plan.l2, &[], fresh));
        let z1 = StepPlan::realize(&plan.z1, &[], fresh);
        *mass.entry(z1).or_default().entry((x, l)).or_default() += p;
    }
    Ok(mass
        .into_iter()
        .filter_map(|(z, m)| Belief1::normalize(0, m).map(|(prob, belief)| Branch { z, prob, belief }))
        .collect())
}

/// Every positive-probability realization of `A2[0]`.
pub fn initial_branches2(model: &TeamModel, info: &InfoStructure) -> Result<Vec<Branch<Belief2>>> {
    let plan = info.initial_plan()?;
    let space = info.private_space(model, 0);
    let pi1: HashMap<Vec<usize>, Arc<Belief1>> = initial_branches1(model, info)?
        .into_iter()
        .map(|b| (b.z, Arc::new(b.belief)))
        .collect();
    let mut mass: BTreeMap<Vec<usize>, BTreeMap<Key2, Rational>> = BTreeMap::new();
    for (x, y1, y2, p) in initial_samples(model) {
        let fresh = Fresh { y1, y2, u1: 0, u2: 0 };
        let l = space.index(&StepPlan::realize(&plan.l2, &[], fresh));
        let z1 = StepPlan::realize(&plan.z1, &[], fresh);
        let a2 = StepPlan::realize(&plan.z2, &[], fresh);
        *mass.entry(a2).or_default().entry((x, l, pi1[&z1].clone())).or_default() += p;
    }
    Ok(mass
        .into_iter()
        .filter_map(|(z, m)| Belief2::normalize(0, m).map(|(prob, belief)| Branch { z, prob, belief }))
        .collect())
}

pub fn initial_belief1(model: &TeamModel, info: &InfoStructure, z1: &[usize]) -> Result<Belief1> {
    initial_branches1(model, info)?
        .into_iter()
        .find(|b| b.z == z1)
        .map(|b| b.belief)
        .ok_or_else(|| Error::ZeroProbabilityObservation(format!("Z1 = {z1:?} at t = 0")))
}

pub fn initial_belief2(model: &TeamModel, info: &InfoStructure, a2: &[usize]) -> Result<Belief2> {
    initial_branches2(model, info)?
        .into_iter()
        .find(|b| b.z == a2)
        .map(|b| b.belief)
        .ok_or_else(|| Error::ZeroProbabilityObservation(format!("A2 = {a2:?} at t = 0")))
}
