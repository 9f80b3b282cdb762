//! Decoupled dynamics: each agent drives its own state component,
//! `X1[t+1] = f1(X1, U1, W1)`, `X2[t+1] = f2(X2, U2, W2)`, observes only that
//! component, and the agents interact through the joint cost alone.
//!
//! Agent 1's belief then splits into its own filter `Theta1 = P(X1 | M1)` and
//! agent 2's accessible-data filter `Theta2 = P(X2, L2 | A2)`, and the
//! dynamic programs can run on these smaller statistics. The team program
//! additionally tracks `Xi = P(X1, Theta1 | A2)`, which evolves by prediction
//! alone because `A2` carries no information about agent 1's chain.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::belief::{Branch, PrivatePrescription, Theta};
use crate::error::{Error, Result};
use crate::info::{check_nestedness, splice, Fresh, InfoStructure, PrivateSpace, StepPlan, VarKind, VarRef};
use crate::model::{
    check_dist_list, check_shape, Agent, Dist, Dists, FiniteSpace, PerTime, Spaces, TeamModel, Violation,
};
use crate::oracle::{build_joint, conditional, trajectories, ExplicitStrategy, JointTable, Trajectory};
use crate::rational::Rational;
use crate::solver::{digits, Psi2, SolveOptions};

/// One agent's private chain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Chain {
    pub x: Vec<FiniteSpace>,
    pub u: Vec<FiniteSpace>,
    pub w: Vec<FiniteSpace>,
    pub v: Vec<FiniteSpace>,
    pub y: Vec<FiniteSpace>,
    /// `[t][x][u][w] -> x'`.
    pub transition: Vec<Vec<Vec<Vec<usize>>>>,
    /// `[t][x][v] -> y`.
    pub obs: Vec<Vec<Vec<usize>>>,
    pub x0: Dist,
    pub w_dist: Vec<Dist>,
    pub v_dist: Vec<Dist>,
}

impl Chain {
    #[inline]
    pub fn next_state(&self, t: usize, x: usize, u: usize, w: usize) -> usize {
        self.transition[t][x][u][w]
    }

    #[inline]
    pub fn observe(&self, t: usize, x: usize, v: usize) -> usize {
        self.obs[t][x][v]
    }

    /// Whether `h_t` is the identity on the state space at every stage.
    pub fn observes_state(&self) -> bool {
        self.obs.iter().enumerate().all(|(t, slice)| {
            self.y[t].size == self.x[t].size
                && slice.iter().enumerate().all(|(x, by_v)| by_v.iter().all(|&y| y == x))
        })
    }

    fn check(&self, name: &str, horizon: usize, out: &mut Vec<Violation>) {
        let stages = horizon + 1;
        for (field, list, expected) in [
            ("x", &self.x, stages),
            ("u", &self.u, stages),
            ("w", &self.w, horizon),
            ("v", &self.v, stages),
            ("y", &self.y, stages),
        ] {
            let path = format!("{name}.spaces.{field}");
            if list.len() != expected {
                out.push(Violation::new(&path, format!("{} entries, expected {expected}", list.len())));
            }
            for (t, space) in list.iter().enumerate() {
                space.check(&format!("{path}[{t}]"), out);
            }
        }
        if !out.is_empty() {
            return;
        }
        self.x0.check(&format!("{name}.dists.x0"), self.x[0].size, out);
        check_dist_list(&format!("{name}.dists.w"), &self.w_dist, &self.w, out);
        check_dist_list(&format!("{name}.dists.v"), &self.v_dist, &self.v, out);
        if self.transition.len() != horizon {
            out.push(Violation::new(
                format!("{name}.transition"),
                format!("{} time slices, expected {horizon}", self.transition.len()),
            ));
        }
        for (t, slice) in self.transition.iter().enumerate().take(horizon) {
            let path = format!("{name}.transition[{t}]");
            check_shape(&path, slice.len(), self.x[t].size, out);
            for (x, by_u) in slice.iter().enumerate() {
                check_shape(&format!("{path}[{x}]"), by_u.len(), self.u[t].size, out);
                for (u, by_w) in by_u.iter().enumerate() {
                    let p = format!("{path}[{x}][{u}]");
                    check_shape(&p, by_w.len(), self.w[t].size, out);
                    for (w, &next) in by_w.iter().enumerate() {
                        if next >= self.x[t + 1].size {
                            out.push(Violation::new(
                                format!("{p}[{w}]"),
                                format!("next state {next} outside a space of size {}", self.x[t + 1].size),
                            ));
                        }
                    }
                }
            }
        }
        if self.obs.len() != stages {
            out.push(Violation::new(format!("{name}.obs"), format!("{} time slices, expected {stages}", self.obs.len())));
        }
        for (t, slice) in self.obs.iter().enumerate().take(stages) {
            let path = format!("{name}.obs[{t}]");
            check_shape(&path, slice.len(), self.x[t].size, out);
            for (x, by_v) in slice.iter().enumerate() {
                check_shape(&format!("{path}[{x}]"), by_v.len(), self.v[t].size, out);
                for (v, &y) in by_v.iter().enumerate() {
                    if y >= self.y[t].size {
                        out.push(Violation::new(
                            format!("{path}[{x}][{v}]"),
                            format!("observation {y} outside a space of size {}", self.y[t].size),
                        ));
                    }
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecoupledModel {
    pub horizon: usize,
    pub agent1: Chain,
    pub agent2: Chain,
    /// `[t][x1][x2][u1][u2]`.
    pub cost: Vec<Vec<Vec<Vec<Vec<Rational>>>>>,
}

#[derive(Serialize, Deserialize)]
struct ChainSpacesDoc {
    x: PerTime<FiniteSpace>,
    u: PerTime<FiniteSpace>,
    w: PerTime<FiniteSpace>,
    v: PerTime<FiniteSpace>,
    y: PerTime<FiniteSpace>,
}

#[derive(Serialize, Deserialize)]
struct ChainDistsDoc {
    x0: Dist,
    w: PerTime<Dist>,
    v: PerTime<Dist>,
}

#[derive(Serialize, Deserialize)]
struct ChainDoc {
    spaces: ChainSpacesDoc,
    transition: Vec<Vec<Vec<Vec<usize>>>>,
    obs: Vec<Vec<Vec<usize>>>,
    dists: ChainDistsDoc,
}

#[derive(Serialize, Deserialize)]
pub(crate) struct DecoupledDoc {
    horizon: usize,
    agent1: ChainDoc,
    agent2: ChainDoc,
    cost: Vec<Vec<Vec<Vec<Vec<Rational>>>>>,
}

impl ChainDoc {
    fn expand(self, horizon: usize) -> Chain {
        let stages = horizon + 1;
        Chain {
            x: self.spaces.x.expand(stages),
            u: self.spaces.u.expand(stages),
            w: self.spaces.w.expand(horizon),
            v: self.spaces.v.expand(stages),
            y: self.spaces.y.expand(stages),
            transition: self.transition,
            obs: self.obs,
            x0: self.dists.x0,
            w_dist: self.dists.w.expand(horizon),
            v_dist: self.dists.v.expand(stages),
        }
    }

    fn collapse(c: &Chain) -> Self {
        ChainDoc {
            spaces: ChainSpacesDoc {
                x: PerTime::collapse(&c.x),
                u: PerTime::collapse(&c.u),
                w: PerTime::collapse(&c.w),
                v: PerTime::collapse(&c.v),
                y: PerTime::collapse(&c.y),
            },
            transition: c.transition.clone(),
            obs: c.obs.clone(),
            dists: ChainDistsDoc {
                x0: c.x0.clone(),
                w: PerTime::collapse(&c.w_dist),
                v: PerTime::collapse(&c.v_dist),
            },
        }
    }
}

impl DecoupledModel {
    #[inline]
    pub fn stage_cost(&self, t: usize, x1: usize, x2: usize, u1: usize, u2: usize) -> &Rational {
        &self.cost[t][x1][x2][u1][u2]
    }

    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        self.agent1.check("agent1", self.horizon, &mut out);
        self.agent2.check("agent2", self.horizon, &mut out);
        if !out.is_empty() {
            return out;
        }
        let stages = self.horizon + 1;
        if self.cost.len() != stages {
            out.push(Violation::new("cost", format!("{} time slices, expected {stages}", self.cost.len())));
        }
        let (a, b) = (&self.agent1, &self.agent2);
        for (t, slice) in self.cost.iter().enumerate().take(stages) {
            let path = format!("cost[{t}]");
            check_shape(&path, slice.len(), a.x[t].size, &mut out);
            for (x1, by_x2) in slice.iter().enumerate() {
                check_shape(&format!("{path}[{x1}]"), by_x2.len(), b.x[t].size, &mut out);
                for (x2, by_u1) in by_x2.iter().enumerate() {
                    check_shape(&format!("{path}[{x1}][{x2}]"), by_u1.len(), a.u[t].size, &mut out);
                    for (u1, by_u2) in by_u1.iter().enumerate() {
                        let p = format!("{path}[{x1}][{x2}][{u1}]");
                        check_shape(&p, by_u2.len(), b.u[t].size, &mut out);
                        for (u2, c) in by_u2.iter().enumerate() {
                            if c.is_negative() {
                                out.push(Violation::new(format!("{p}[{u2}]"), format!("cost {c} is negative")));
                            }
                        }
                    }
                }
            }
        }
        out
    }

    pub fn ensure_valid(&self) -> Result<()> {
        let v = self.validate();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidModel(v))
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: DecoupledDoc = serde_json::from_str(text)?;
        Ok(Self::from_doc(doc))
    }

    pub(crate) fn from_doc(doc: DecoupledDoc) -> Self {
        DecoupledModel {
            horizon: doc.horizon,
            agent1: doc.agent1.expand(doc.horizon),
            agent2: doc.agent2.expand(doc.horizon),
            cost: doc.cost,
        }
    }

    pub fn to_json_value(&self) -> Value {
        let mut v = serde_json::to_value(DecoupledDoc {
            horizon: self.horizon,
            agent1: ChainDoc::collapse(&self.agent1),
            agent2: ChainDoc::collapse(&self.agent2),
            cost: self.cost.clone(),
        })
        .expect("model serializes");
        v["kind"] = json!("decoupled");
        v
    }

    fn var_size(&self, v: VarRef) -> usize {
        match v.kind {
            VarKind::Y1 => self.agent1.y[v.time].size,
            VarKind::U1 => self.agent1.u[v.time].size,
            VarKind::Y2 => self.agent2.y[v.time].size,
            VarKind::U2 => self.agent2.u[v.time].size,
        }
    }

    fn private_space(&self, info: &InfoStructure, t: usize) -> PrivateSpace {
        PrivateSpace::new(info.step(t).l2.iter().map(|&v| self.var_size(v)).collect())
    }
}

/// The product state `x = x1 * |X2| + x2` at each stage.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub x1: Vec<usize>,
    pub x2: Vec<usize>,
}

impl Split {
    pub fn of(dm: &DecoupledModel) -> Self {
        Split {
            x1: dm.agent1.x.iter().map(|s| s.size).collect(),
            x2: dm.agent2.x.iter().map(|s| s.size).collect(),
        }
    }

    pub fn check(&self, model: &TeamModel) -> Result<()> {
        let stages = model.horizon + 1;
        let ok = self.x1.len() == stages
            && self.x2.len() == stages
            && (0..stages).all(|t| self.x1[t] * self.x2[t] == model.nx(t));
        if ok {
            Ok(())
        } else {
            Err(Error::DimensionMismatch("state split does not match the state spaces".into()))
        }
    }

    #[inline]
    pub fn parts(&self, t: usize, x: usize) -> (usize, usize) {
        (x / self.x2[t], x % self.x2[t])
    }
}

fn product_space(a: &FiniteSpace, b: &FiniteSpace) -> FiniteSpace {
    FiniteSpace::new(format!("{}x{}", a.label, b.label), a.size * b.size)
}

fn product_dist(a: &Dist, b: &Dist) -> Dist {
    Dist::new(a.weights.iter().flat_map(|p| b.weights.iter().map(move |q| p * q)).collect())
}

/// The equivalent team model on the product state `(x1, x2)` with product
/// disturbance `(w1, w2)`.
pub fn embed(dm: &DecoupledModel) -> Result<TeamModel> {
    dm.ensure_valid()?;
    let (a, b) = (&dm.agent1, &dm.agent2);
    let horizon = dm.horizon;
    let stages = horizon + 1;
    let spaces = Spaces {
        x: (0..stages).map(|t| product_space(&a.x[t], &b.x[t])).collect(),
        u1: a.u.clone(),
        u2: b.u.clone(),
        w: (0..horizon).map(|t| product_space(&a.w[t], &b.w[t])).collect(),
        v1: a.v.clone(),
        v2: b.v.clone(),
        y1: a.y.clone(),
        y2: b.y.clone(),
    };
    let transition = (0..horizon)
        .map(|t| {
            let n2_next = b.x[t + 1].size;
            (0..a.x[t].size * b.x[t].size)
                .map(|x| {
                    let (x1, x2) = (x / b.x[t].size, x % b.x[t].size);
                    (0..a.u[t].size)
                        .map(|u1| {
                            (0..b.u[t].size)
                                .map(|u2| {
                                    (0..a.w[t].size * b.w[t].size)
                                        .map(|w| {
                                            let (w1, w2) = (w / b.w[t].size, w % b.w[t].size);
                                            a.next_state(t, x1, u1, w1) * n2_next + b.next_state(t, x2, u2, w2)
                                        })
                                        .collect()
                                })
                                .collect()
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    let obs = |chain: &Chain, first: bool| -> Vec<Vec<Vec<usize>>> {
        (0..stages)
            .map(|t| {
                (0..a.x[t].size * b.x[t].size)
                    .map(|x| {
                        let part = if first { x / b.x[t].size } else { x % b.x[t].size };
                        chain.obs[t][part].clone()
                    })
                    .collect()
            })
            .collect()
    };
    let cost = (0..stages)
        .map(|t| {
            (0..a.x[t].size * b.x[t].size)
                .map(|x| dm.cost[t][x / b.x[t].size][x % b.x[t].size].clone())
                .collect()
        })
        .collect();
    let model = TeamModel {
        horizon,
        spaces,
        transition,
        obs1: obs(a, true),
        obs2: obs(b, false),
        cost,
        dists: Dists {
            x0: product_dist(&a.x0, &b.x0),
            w: (0..horizon).map(|t| product_dist(&a.w_dist[t], &b.w_dist[t])).collect(),
            v1: a.v_dist.clone(),
            v2: b.v_dist.clone(),
        },
    };
    debug_assert!(model.validate().is_empty());
    Ok(model)
}

fn theta1_key(x1: usize) -> (usize, usize) {
    (x1, 0)
}

/// `Theta1[0]` for every positive-probability `Y1[0]`.
pub fn initial_theta1(dm: &DecoupledModel) -> Vec<Branch<Theta>> {
    let a = &dm.agent1;
    let mut mass: BTreeMap<usize, BTreeMap<(usize, usize), Rational>> = BTreeMap::new();
    for (x, px) in a.x0.support() {
        for (v, pv) in a.v_dist[0].support() {
            *mass.entry(a.observe(0, x, v)).or_default().entry(theta1_key(x)).or_default() += px * pv;
        }
    }
    mass.into_iter()
        .filter_map(|(y, m)| {
            Theta::normalize(Agent::One, 0, m).map(|(prob, belief)| Branch { z: vec![y], prob, belief })
        })
        .collect()
}

/// Successors of `Theta1` under `u1`, by `Y1[t+1]`.
pub fn branch_theta1(dm: &DecoupledModel, theta: &Theta, u1: usize) -> Result<Vec<Branch<Theta>>> {
    let t = theta.t;
    let a = &dm.agent1;
    if t >= dm.horizon {
        return Err(Error::OutOfRange(format!("no update from stage {t} with horizon {}", dm.horizon)));
    }
    if u1 >= a.u[t].size {
        return Err(Error::OutOfRange(format!("agent 1 action {u1} at t = {t}")));
    }
    let mut mass: BTreeMap<usize, BTreeMap<(usize, usize), Rational>> = BTreeMap::new();
    for ((x, _), p) in theta.weights() {
        for (w, pw) in a.w_dist[t].support() {
            let next = a.next_state(t, *x, u1, w);
            let pn = p * pw;
            for (v, pv) in a.v_dist[t + 1].support() {
                *mass.entry(a.observe(t + 1, next, v)).or_default().entry(theta1_key(next)).or_default() += &pn * pv;
            }
        }
    }
    Ok(mass
        .into_iter()
        .filter_map(|(y, m)| {
            Theta::normalize(Agent::One, t + 1, m).map(|(prob, belief)| Branch { z: vec![y], prob, belief })
        })
        .collect())
}

/// `Theta2[0]` for every positive-probability `A2[0]`.
pub fn initial_theta2(dm: &DecoupledModel, info: &InfoStructure) -> Result<Vec<Branch<Theta>>> {
    let b = &dm.agent2;
    let plan = info.initial_plan()?;
    let space = dm.private_space(info, 0);
    let mut mass: BTreeMap<Vec<usize>, BTreeMap<(usize, usize), Rational>> = BTreeMap::new();
    for (x, px) in b.x0.support() {
        for (v, pv) in b.v_dist[0].support() {
            let fresh = Fresh { y1: 0, y2: b.observe(0, x, v), u1: 0, u2: 0 };
            let l = space.index(&StepPlan::realize(&plan.l2, &[], fresh));
            let a2 = StepPlan::realize(&plan.z2, &[], fresh);
            *mass.entry(a2).or_default().entry((x, l)).or_default() += px * pv;
        }
    }
    Ok(mass
        .into_iter()
        .filter_map(|(z, m)| Theta::normalize(Agent::Two, 0, m).map(|(prob, belief)| Branch { z, prob, belief }))
        .collect())
}

/// Successors of `Theta2` under the agent-2 prescription, by `Z2[t+1]`.
pub fn branch_theta2(
    dm: &DecoupledModel,
    info: &InfoStructure,
    theta: &Theta,
    gamma2: &PrivatePrescription,
) -> Result<Vec<Branch<Theta>>> {
    let t = theta.t;
    let b = &dm.agent2;
    if t >= dm.horizon {
        return Err(Error::OutOfRange(format!("no update from stage {t} with horizon {}", dm.horizon)));
    }
    let plan = info.plan(t)?;
    let here = dm.private_space(info, t);
    let next_space = dm.private_space(info, t + 1);
    if gamma2.actions.len() != here.len() {
        return Err(Error::DimensionMismatch(format!(
            "agent 2 prescription has {} entries for {} private tuples",
            gamma2.actions.len(),
            here.len()
        )));
    }
    let mut mass: BTreeMap<Vec<usize>, BTreeMap<(usize, usize), Rational>> = BTreeMap::new();
    for ((x, l), p) in theta.weights() {
        let prev = &here.tuples[*l];
        let u2 = gamma2.action(*l);
        if u2 >= b.u[t].size {
            return Err(Error::OutOfRange(format!("agent 2 action {u2} at t = {t}")));
        }
        for (w, pw) in b.w_dist[t].support() {
            let next = b.next_state(t, *x, u2, w);
            let pn = p * pw;
            for (v, pv) in b.v_dist[t + 1].support() {
                let fresh = Fresh { y1: 0, y2: b.observe(t + 1, next, v), u1: 0, u2 };
                let l_next = next_space.index(&StepPlan::realize(&plan.l2, prev, fresh));
                let z2 = StepPlan::realize(&plan.z2, prev, fresh);
                *mass.entry(z2).or_default().entry((next, l_next)).or_default() += &pn * pv;
            }
        }
    }
    Ok(mass
        .into_iter()
        .filter_map(|(z, m)| Theta::normalize(Agent::Two, t + 1, m).map(|(prob, belief)| Branch { z, prob, belief }))
        .collect())
}

/// What drives a filter from `t` to `t + 1`.
#[derive(Debug, Clone, Copy)]
pub enum Driver<'a> {
    /// Agent 1's action and next observation.
    Agent1 { u1: usize, y1: usize },
    /// Agent 2's prescription and the newly accessible data.
    Agent2 { gamma2: &'a PrivatePrescription, z2: &'a [usize] },
}

pub fn update_theta(dm: &DecoupledModel, info: &InfoStructure, theta: &Theta, driver: Driver<'_>) -> Result<Theta> {
    let (branches, z) = match (theta.agent, driver) {
        (Agent::One, Driver::Agent1 { u1, y1 }) => (branch_theta1(dm, theta, u1)?, vec![y1]),
        (Agent::Two, Driver::Agent2 { gamma2, z2 }) => (branch_theta2(dm, info, theta, gamma2)?, z2.to_vec()),
        _ => return Err(Error::DimensionMismatch("driver does not match the filter's agent".into())),
    };
    branches
        .into_iter()
        .find(|b| b.z == z)
        .map(|b| b.belief)
        .ok_or_else(|| Error::ZeroProbabilityObservation(format!("driver {z:?} at t = {}", theta.t + 1)))
}

/// Agent 1's statistic: its state under perfect observation, its filter
/// otherwise.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Stat1 {
    State(usize),
    Filter(Arc<Theta>),
}

impl Stat1 {
    fn weights(&self) -> Vec<(usize, Rational)> {
        match self {
            Stat1::State(x) => vec![(*x, Rational::one())],
            Stat1::Filter(theta) => theta.weights().iter().map(|((x, _), p)| (*x, p.clone())).collect(),
        }
    }
}

/// `Xi = P(X1, Stat1 | A2)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Xi {
    pub t: usize,
    weights: Vec<((usize, Stat1), Rational)>,
}

impl Xi {
    fn from_map(t: usize, map: BTreeMap<(usize, Stat1), Rational>) -> Self {
        Xi { t, weights: map.into_iter().filter(|(_, p)| !p.is_zero()).collect() }
    }

    pub fn weights(&self) -> &[((usize, Stat1), Rational)] {
        &self.weights
    }

    /// Distinct agent-1 statistics in the support, sorted.
    pub fn stats(&self) -> Vec<Stat1> {
        let mut v: Vec<Stat1> = self.weights.iter().map(|((_, s), _)| s.clone()).collect();
        v.sort();
        v.dedup();
        v
    }
}

/// Fails unless agent 1's memory is exactly its own history plus `A2`, the
/// shape under which the reduced statistics are sufficient.
pub fn check_decoupled_info(info: &InfoStructure) -> Result<()> {
    let mut violations = check_nestedness(info);
    for t in 0..=info.horizon {
        let step = info.step(t);
        let mut expect: Vec<VarRef> = (0..=t)
            .map(|s| VarRef::new(VarKind::Y1, s))
            .chain((0..t).map(|s| VarRef::new(VarKind::U1, s)))
            .chain(step.a2.iter().copied())
            .collect();
        expect.sort();
        expect.dedup();
        if expect != step.m1 {
            violations.push(Violation::new(
                format!("steps[{t}].m1"),
                "the reductions need agent 1's memory to be its own history plus A2",
            ));
        }
    }
    if violations.is_empty() {
        Ok(())
    } else {
        Err(Error::InvalidInfo(violations))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecoupledOptions {
    /// Key agent 1's statistic on its state; requires `h1` to be the identity.
    pub perfect_obs_1: bool,
    pub budget: u128,
}

impl Default for DecoupledOptions {
    fn default() -> Self {
        DecoupledOptions { perfect_obs_1: false, budget: SolveOptions::from_env().budget }
    }
}

#[derive(Debug, Clone)]
pub struct DecoupledSolution {
    pub value: Rational,
    /// `true` for agent 1's best response to a fixed `psi2`, `false` for the
    /// team problem.
    pub person_by_person: bool,
    pub perfect_obs_1: bool,
    pub node_counts: Vec<usize>,
}

impl DecoupledSolution {
    pub fn to_json(&self) -> Value {
        json!({
            "value": self.value.to_string(),
            "value_f64": self.value.to_f64(),
            "problem": if self.person_by_person { "person-by-person" } else { "team" },
            "perfect_obs_1": self.perfect_obs_1,
            "node_counts": self.node_counts,
        })
    }
}

type StatBranches = Vec<(usize, Rational, Stat1)>;

type TeamMemo = HashMap<(Arc<Theta>, Arc<Xi>), Rational>;
type Theta2Branches = Arc<Vec<Branch<Arc<Theta>>>>;

struct Reduced<'a> {
    dm: &'a DecoupledModel,
    info: &'a InfoStructure,
    model: TeamModel,
    perfect: bool,
    budget: u128,
    stat_cache: HashMap<(usize, Stat1, usize), Arc<StatBranches>>,
    theta2_cache: HashMap<(Arc<Theta>, Vec<usize>), Theta2Branches>,
    pbp_memo: Vec<HashMap<(Stat1, Vec<usize>), Rational>>,
    team_memo: Vec<TeamMemo>,
}

impl<'a> Reduced<'a> {
    fn new(dm: &'a DecoupledModel, info: &'a InfoStructure, options: DecoupledOptions) -> Result<Self> {
        let model = embed(dm)?;
        info.ensure_valid(&model)?;
        check_decoupled_info(info)?;
        if options.perfect_obs_1 && !dm.agent1.observes_state() {
            return Err(Error::PerfectObsViolation(
                "agent 1's observation is not the identity on its state".into(),
            ));
        }
        let stages = dm.horizon + 1;
        Ok(Reduced {
            dm,
            info,
            model,
            perfect: options.perfect_obs_1,
            budget: options.budget,
            stat_cache: HashMap::new(),
            theta2_cache: HashMap::new(),
            pbp_memo: vec![HashMap::new(); stages],
            team_memo: vec![HashMap::new(); stages],
        })
    }

    fn initial_stats(&self) -> Vec<(usize, Rational, Stat1)> {
        initial_theta1(self.dm)
            .into_iter()
            .map(|b| {
                let stat = if self.perfect { Stat1::State(b.z[0]) } else { Stat1::Filter(Arc::new(b.belief)) };
                (b.z[0], b.prob, stat)
            })
            .collect()
    }

    /// `(y1, prob, next statistic)` after `u1`.
    fn stat_branches(&mut self, t: usize, stat: &Stat1, u1: usize) -> Result<Arc<StatBranches>> {
        let key = (t, stat.clone(), u1);
        if let Some(b) = self.stat_cache.get(&key) {
            return Ok(b.clone());
        }
        let a = &self.dm.agent1;
        let out: StatBranches = match stat {
            Stat1::Filter(theta) => branch_theta1(self.dm, theta, u1)?
                .into_iter()
                .map(|b| (b.z[0], b.prob, Stat1::Filter(Arc::new(b.belief))))
                .collect(),
            Stat1::State(x) => {
                let mut mass: BTreeMap<usize, Rational> = BTreeMap::new();
                for (w, pw) in a.w_dist[t].support() {
                    *mass.entry(a.next_state(t, *x, u1, w)).or_default() += pw;
                }
                mass.into_iter().map(|(next, p)| (next, p, Stat1::State(next))).collect()
            }
        };
        let out = Arc::new(out);
        self.stat_cache.insert(key, out.clone());
        Ok(out)
    }

    fn theta2_branches(&mut self, theta: &Arc<Theta>, gamma2: &PrivatePrescription) -> Result<Arc<Vec<Branch<Arc<Theta>>>>> {
        let key = (theta.clone(), gamma2.actions.clone());
        if let Some(b) = self.theta2_cache.get(&key) {
            return Ok(b.clone());
        }
        let out: Vec<Branch<Arc<Theta>>> = branch_theta2(self.dm, self.info, theta, gamma2)?
            .into_iter()
            .map(|b| Branch { z: b.z, prob: b.prob, belief: Arc::new(b.belief) })
            .collect();
        let out = Arc::new(out);
        self.theta2_cache.insert(key, out.clone());
        Ok(out)
    }

    fn stage_cost(&self, t: usize, x1: usize, u1: usize, theta2: &Theta, gamma2: &PrivatePrescription) -> Rational {
        theta2
            .weights()
            .iter()
            .map(|((x2, l), q)| self.dm.stage_cost(t, x1, *x2, u1, gamma2.action(*l)) * q)
            .sum()
    }

    fn pbp(&mut self, psi2: &Psi2, t: usize, stat: &Stat1, a2: &[usize], theta2: &Arc<Theta>) -> Result<Rational> {
        let key = (stat.clone(), a2.to_vec());
        if let Some(v) = self.pbp_memo[t].get(&key) {
            return Ok(v.clone());
        }
        let gamma2 = psi2.get(&self.model, self.info, t, a2)?;
        let horizon = self.dm.horizon;
        let children2 = if t < horizon { Some(self.theta2_branches(theta2, &gamma2)?) } else { None };
        let mut best: Option<Rational> = None;
        for u1 in 0..self.dm.agent1.u[t].size {
            let mut value: Rational = stat
                .weights()
                .iter()
                .map(|(x1, p)| self.stage_cost(t, *x1, u1, theta2, &gamma2) * p)
                .sum();
            if let Some(children2) = &children2 {
                let plan = self.info.plan(t)?;
                let children1 = self.stat_branches(t, stat, u1)?;
                for (_, p1, s1) in children1.iter() {
                    for b2 in children2.iter() {
                        let next_a2 = splice(&plan.a2_from_z2, a2, &b2.z);
                        value += p1 * &b2.prob * self.pbp(psi2, t + 1, s1, &next_a2, &b2.belief)?;
                    }
                }
            }
            if best.as_ref().is_none_or(|b| value < *b) {
                best = Some(value);
            }
        }
        let best = best.expect("at least one action");
        self.pbp_memo[t].insert(key, best.clone());
        Ok(best)
    }

    fn predict(&mut self, xi: &Xi, domain: &[Stat1], acts: &[usize]) -> Result<Arc<Xi>> {
        let t = xi.t;
        let a = &self.dm.agent1;
        let mut mass: BTreeMap<(usize, Stat1), Rational> = BTreeMap::new();
        for ((x1, s1), p) in xi.weights() {
            let u1 = acts[domain.binary_search(s1).expect("statistic in the domain")];
            let next_stats: HashMap<usize, Stat1> =
                self.stat_branches(t, s1, u1)?.iter().map(|(y, _, s)| (*y, s.clone())).collect();
            for (w, pw) in a.w_dist[t].support() {
                let next = a.next_state(t, *x1, u1, w);
                let pn = p * pw;
                for (v, pv) in a.v_dist[t + 1].support() {
                    let y = a.observe(t + 1, next, v);
                    *mass.entry((next, next_stats[&y].clone())).or_default() += &pn * pv;
                }
            }
        }
        Ok(Arc::new(Xi::from_map(t + 1, mass)))
    }

    fn team(&mut self, t: usize, theta2: &Arc<Theta>, xi: &Arc<Xi>) -> Result<Rational> {
        let key = (theta2.clone(), xi.clone());
        if let Some(v) = self.team_memo[t].get(&key) {
            return Ok(v.clone());
        }
        let domain = xi.stats();
        let n1 = self.dm.agent1.u[t].size;
        let n2 = self.dm.agent2.u[t].size;
        let n_private = self.dm.private_space(self.info, t).len();
        let count1 = (n1 as u128).checked_pow(domain.len() as u32);
        let count2 = (n2 as u128).checked_pow(n_private as u32);
        let (count1, count2) = match (count1, count2) {
            (Some(a), Some(b)) if a.checked_mul(b).is_some_and(|c| c <= self.budget) => (a, b),
            _ => {
                return Err(Error::ResourceLimit(format!(
                    "{n1}^{} x {n2}^{n_private} prescription pairs at t = {t} exceed the budget {}",
                    domain.len(),
                    self.budget
                )))
            }
        };
        let gammas2: Vec<PrivatePrescription> = (0..count2)
            .map(|j| PrivatePrescription::new(t, digits(j, n2, n_private)))
            .collect();
        let horizon = self.dm.horizon;
        let mut children2 = Vec::with_capacity(gammas2.len());
        if t < horizon {
            for g in &gammas2 {
                children2.push(self.theta2_branches(theta2, g)?);
            }
        }
        let mut best: Option<Rational> = None;
        for i in 0..count1 {
            let acts = digits(i, n1, domain.len());
            let next_xi = if t < horizon { Some(self.predict(xi, &domain, &acts)?) } else { None };
            for (j, g2) in gammas2.iter().enumerate() {
                let mut value = Rational::zero();
                for ((x1, s1), p) in xi.weights() {
                    let u1 = acts[domain.binary_search(s1).expect("statistic in the domain")];
                    value += self.stage_cost(t, *x1, u1, theta2, g2) * p;
                }
                if let Some(next_xi) = &next_xi {
                    for b in children2[j].iter() {
                        value += &b.prob * &self.team(t + 1, &b.belief, next_xi)?;
                    }
                }
                if best.as_ref().is_none_or(|b| value < *b) {
                    best = Some(value);
                }
            }
        }
        let best = best.expect("at least one candidate");
        self.team_memo[t].insert(key, best.clone());
        Ok(best)
    }
}

/// Dynamic program on the reduced statistics.
///
/// With `psi2`, agent 1's best response to the fixed agent-2 prescriptions,
/// keyed by `(Stat1, A2)`; it matches [`crate::solver::solve_pbp_exact`] on the
/// embedded model. Without, the team problem over `(Theta2, Xi)`, matching
/// [`crate::solver::solve_exact`].
pub fn solve_decoupled_pbp(
    dm: &DecoupledModel,
    info: &InfoStructure,
    psi2: Option<&Psi2>,
    options: DecoupledOptions,
) -> Result<DecoupledSolution> {
    let mut r = Reduced::new(dm, info, options)?;
    let roots2: Vec<(Rational, Vec<usize>, Arc<Theta>)> = initial_theta2(dm, info)?
        .into_iter()
        .map(|b| (b.prob, b.z, Arc::new(b.belief)))
        .collect();
    let roots1 = r.initial_stats();
    let mut value = Rational::zero();
    match psi2 {
        Some(psi2) => {
            let plan = info.initial_plan()?;
            for (_, p1, stat) in &roots1 {
                for (p2, a2, theta2) in &roots2 {
                    let a2 = splice(&plan.a2_from_z2, &[], a2);
                    value += p1 * p2 * &r.pbp(psi2, 0, stat, &a2, theta2)?;
                }
            }
        }
        None => {
            let a = &dm.agent1;
            let stat_of: HashMap<usize, Stat1> = roots1.iter().map(|(y, _, s)| (*y, s.clone())).collect();
            let mut mass: BTreeMap<(usize, Stat1), Rational> = BTreeMap::new();
            for (x, px) in a.x0.support() {
                for (v, pv) in a.v_dist[0].support() {
                    *mass.entry((x, stat_of[&a.observe(0, x, v)].clone())).or_default() += px * pv;
                }
            }
            let xi = Arc::new(Xi::from_map(0, mass));
            for (p2, _, theta2) in &roots2 {
                value += p2 * &r.team(0, theta2, &xi)?;
            }
        }
    }
    let node_counts = if psi2.is_some() {
        r.pbp_memo.iter().map(|m| m.len()).collect()
    } else {
        r.team_memo.iter().map(|m| m.len()).collect()
    };
    Ok(DecoupledSolution {
        value,
        person_by_person: psi2.is_some(),
        perfect_obs_1: options.perfect_obs_1,
        node_counts,
    })
}

/// Both sides of a factorization identity, compared exactly.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Factorization<K> {
    pub joint: BTreeMap<K, Rational>,
    pub product: BTreeMap<K, Rational>,
    pub equal: bool,
}

fn finish<K: Ord>(joint: BTreeMap<K, Rational>, product: BTreeMap<K, Rational>) -> Factorization<K> {
    let product: BTreeMap<K, Rational> = product.into_iter().filter(|(_, p)| !p.is_zero()).collect();
    let equal = joint == product;
    Factorization { joint, product, equal }
}

struct Realized<'a> {
    model: &'a TeamModel,
    split: &'a Split,
    info: &'a InfoStructure,
    joint: &'a JointTable,
    trajs: &'a [Trajectory],
}

impl Realized<'_> {
    fn private(&self, t: usize, tr: &Trajectory) -> usize {
        self.info.private_space(self.model, t).index(&tr.realization(&self.info.step(t).l2))
    }

    fn parts(&self, t: usize, tr: &Trajectory) -> (usize, usize) {
        self.split.parts(t, tr.x[t])
    }
}

/// `P(x1, x2, l | m1)` against `P(x1 | m1) P(x2, l | a2)` at stage `t`, where
/// `a2` is the accessible part of `m1`, under the strategy that produced
/// `trajectories`.
pub fn check_factorization_pi1(
    model: &TeamModel,
    split: &Split,
    info: &InfoStructure,
    joint: &JointTable,
    trajectories: &[Trajectory],
    t: usize,
    m1: &[usize],
) -> Result<Factorization<(usize, usize, usize)>> {
    split.check(model)?;
    let r = Realized { model, split, info, joint, trajs: trajectories };
    let step = info.step(t);
    let a2: Vec<usize> = step
        .a2
        .iter()
        .map(|v| m1[step.m1.iter().position(|m| m == v).expect("A2 is part of M1")])
        .collect();
    let in_m1 = |tr: &Trajectory| tr.realization(&step.m1) == m1;
    let in_a2 = |tr: &Trajectory| tr.realization(&step.a2) == a2;
    let full = conditional(joint, r.trajs, in_m1, |_, tr| {
        let (x1, x2) = r.parts(t, tr);
        (x1, x2, r.private(t, tr))
    })?;
    let left = conditional(joint, r.trajs, in_m1, |_, tr| r.parts(t, tr).0)?;
    let right = conditional(joint, r.trajs, in_a2, |_, tr| (r.parts(t, tr).1, r.private(t, tr)))?;
    let mut product = BTreeMap::new();
    for (x1, p) in &left {
        for ((x2, l), q) in &right {
            product.insert((*x1, *x2, *l), p * q);
        }
    }
    Ok(finish(full, product))
}

/// Agent 1's filter `P(X1[t] | M1[t])` as a sorted weight list.
pub type Theta1Key = Vec<(usize, Rational)>;

/// `P(x1, x2, l, theta1 | a2)` against `P(x1, theta1 | a2) P(x2, l | a2)`,
/// with each outcome's `theta1` obtained by conditioning on its own `M1[t]`.
pub fn check_factorization_pi2(
    model: &TeamModel,
    split: &Split,
    info: &InfoStructure,
    joint: &JointTable,
    trajectories: &[Trajectory],
    t: usize,
    a2: &[usize],
) -> Result<Factorization<(usize, usize, usize, Theta1Key)>> {
    split.check(model)?;
    let r = Realized { model, split, info, joint, trajs: trajectories };
    let theta1 = filters1(&r, t)?;
    let step = info.step(t);
    let in_a2 = |tr: &Trajectory| tr.realization(&step.a2) == a2;
    let full = conditional(joint, r.trajs, in_a2, |i, tr| {
        let (x1, x2) = r.parts(t, tr);
        (x1, x2, r.private(t, tr), theta1[i].clone())
    })?;
    let left = conditional(joint, r.trajs, in_a2, |i, tr| (r.parts(t, tr).0, theta1[i].clone()))?;
    let right = conditional(joint, r.trajs, in_a2, |_, tr| (r.parts(t, tr).1, r.private(t, tr)))?;
    let mut product = BTreeMap::new();
    for ((x1, th), p) in &left {
        for ((x2, l), q) in &right {
            product.insert((*x1, *x2, *l, th.clone()), p * q);
        }
    }
    Ok(finish(full, product))
}

fn filters1(r: &Realized<'_>, t: usize) -> Result<Vec<Theta1Key>> {
    let m1 = &r.info.step(t).m1;
    let mut groups: BTreeMap<Vec<usize>, Vec<usize>> = BTreeMap::new();
    for (i, tr) in r.trajs.iter().enumerate() {
        groups.entry(tr.realization(m1)).or_default().push(i);
    }
    let mut out = vec![Vec::new(); r.trajs.len()];
    for (key, members) in groups {
        let post = conditional(r.joint, r.trajs, |tr| tr.realization(m1) == key, |_, tr| r.parts(t, tr).0)?;
        let post: Theta1Key = post.into_iter().collect();
        for i in members {
            out[i] = post.clone();
        }
    }
    Ok(out)
}

/// Outcome of checking both identities at every realized history.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FactorizationSweep {
    pub checked_pi1: usize,
    pub checked_pi2: usize,
    pub failures: Vec<String>,
}

impl FactorizationSweep {
    pub fn holds(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn to_json(&self) -> Value {
        json!({
            "holds": self.holds(),
            "checked_pi1": self.checked_pi1,
            "checked_pi2": self.checked_pi2,
            "failures": self.failures,
        })
    }
}

/// Checks both identities at every positive-probability realization of
/// `M1[t]` and `A2[t]` under `strategy`.
pub fn sweep_factorizations(
    model: &TeamModel,
    split: &Split,
    info: &InfoStructure,
    strategy: &ExplicitStrategy,
) -> Result<FactorizationSweep> {
    split.check(model)?;
    info.ensure_valid(model)?;
    let joint = build_joint(model)?;
    let trajs = trajectories(&joint, model, strategy)?;
    let mut sweep = FactorizationSweep::default();
    for t in 0..=model.horizon {
        let step = info.step(t);
        let mut m1s: Vec<Vec<usize>> = trajs.iter().map(|tr| tr.realization(&step.m1)).collect();
        m1s.sort();
        m1s.dedup();
        for m1 in m1s {
            sweep.checked_pi1 += 1;
            if !check_factorization_pi1(model, split, info, &joint, &trajs, t, &m1)?.equal {
                sweep.failures.push(format!("agent-1 belief does not factor at t = {t}, M1 = {m1:?}"));
            }
        }
        let mut a2s: Vec<Vec<usize>> = trajs.iter().map(|tr| tr.realization(&step.a2)).collect();
        a2s.sort();
        a2s.dedup();
        for a2 in a2s {
            sweep.checked_pi2 += 1;
            if !check_factorization_pi2(model, split, info, &joint, &trajs, t, &a2)?.equal {
                sweep.failures.push(format!("shared belief does not factor at t = {t}, A2 = {a2:?}"));
            }
        }
    }
    Ok(sweep)
}

/// Per-agent space sizes for [`random_decoupled_model`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChainSizes {
    pub x: usize,
    pub u: usize,
    pub w: usize,
    pub v: usize,
    pub y: usize,
}

fn random_chain<R: rand::Rng + ?Sized>(rng: &mut R, s: ChainSizes, horizon: usize) -> Chain {
    use crate::generate::random_dist;
    let stages = horizon + 1;
    let rep = |label: &str, size: usize, n: usize| vec![FiniteSpace::new(label, size); n];
    Chain {
        x: rep("x", s.x, stages),
        u: rep("u", s.u, stages),
        w: rep("w", s.w, horizon),
        v: rep("v", s.v, stages),
        y: rep("y", s.y, stages),
        transition: (0..horizon)
            .map(|_| {
                (0..s.x)
                    .map(|_| (0..s.u).map(|_| (0..s.w).map(|_| rng.random_range(0..s.x)).collect()).collect())
                    .collect()
            })
            .collect(),
        obs: (0..stages)
            .map(|_| (0..s.x).map(|_| (0..s.v).map(|_| rng.random_range(0..s.y)).collect()).collect())
            .collect(),
        x0: random_dist(rng, s.x),
        w_dist: (0..horizon).map(|_| random_dist(rng, s.w)).collect(),
        v_dist: (0..stages).map(|_| random_dist(rng, s.v)).collect(),
    }
}

/// A random decoupled model with integer costs in `0..10`.
pub fn random_decoupled_model<R: rand::Rng + ?Sized>(rng: &mut R, sizes: [ChainSizes; 2], horizon: usize) -> DecoupledModel {
    let agent1 = random_chain(rng, sizes[0], horizon);
    let agent2 = random_chain(rng, sizes[1], horizon);
    let cost = (0..=horizon)
        .map(|_| {
            (0..sizes[0].x)
                .map(|_| {
                    (0..sizes[1].x)
                        .map(|_| {
                            (0..sizes[0].u)
                                .map(|_| (0..sizes[1].u).map(|_| Rational::from_integer(rng.random_range(0..10))).collect())
                                .collect()
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    DecoupledModel { horizon, agent1, agent2, cost }
}

/// A coupled model written on a product state: `X2` is a fair coin held
/// constant, `X1[t+1] = X2[t]`, agent 1 sees `X1`, agent 2 sees nothing.
/// Agent 1's belief stops factoring at `t = 1`.
pub fn coupled_example() -> (TeamModel, Split) {
    let horizon = 1;
    let sizes = crate::model::SpaceSizes { x: 4, u1: 1, u2: 1, w: 1, v1: 1, v2: 1, y1: 2, y2: 1 };
    let split = Split { x1: vec![2, 2], x2: vec![2, 2] };
    let model = TeamModel {
        horizon,
        spaces: Spaces::uniform(horizon, sizes),
        transition: vec![(0..4).map(|x| vec![vec![vec![(x % 2) * 2 + x % 2]]]).collect()],
        obs1: (0..2).map(|_| (0..4).map(|x| vec![x / 2]).collect()).collect(),
        obs2: (0..2).map(|_| vec![vec![0]; 4]).collect(),
        cost: (0..2)
            .map(|_| (0..4).map(|x| vec![vec![Rational::from_integer((x / 2) as i64)]]).collect())
            .collect(),
        dists: Dists {
            x0: Dist::uniform(4),
            w: vec![Dist::point_mass(1, 0)],
            v1: vec![Dist::point_mass(1, 0); 2],
            v2: vec![Dist::point_mass(1, 0); 2],
        },
    };
    (model, split)
}
