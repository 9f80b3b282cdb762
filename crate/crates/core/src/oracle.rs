//! Ground truth by enumeration.
//!
//! The joint table lists every positive-probability assignment of the
//! primitive variables. Any strategy, once fixed, turns each outcome into a
//! single trajectory, so expectations and conditionals become finite sums.
//!
//! The exhaustive minimum runs in one of two modes:
//!
//! * `Brute` enumerates both agents' strategies on reduced domains: an agent's
//!   own past actions are dropped from its keys, and so are agent 2's actions
//!   whose generating observations agent 1 already holds. Both removals lose
//!   nothing, since those values are functions of the retained ones.
//! * `Hybrid` enumerates agent 2's strategies only and, for each, computes
//!   agent 1's best response by backward induction over agent 1's memory
//!   realizations. The minimum over agent 1 is then exact over every strategy
//!   on its full memory.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use num_bigint::{BigInt, BigUint};
use num_traits::{One, ToPrimitive};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use rand::Rng;
use serde_json::{json, Value};

use crate::belief::{Belief1, PrivatePrescription};
use crate::control::{Controller, History};
use crate::error::{Error, Result};
use crate::info::{InfoStructure, VarKind, VarRef};
use crate::model::{Agent, TeamModel};
use crate::rational::{common_denominator, scaled_numerator, Rational};

const DEFAULT_WORK_CAP: u128 = 10_000_000;
const MAX_LAW_ENTRIES: usize = 1 << 20;

/// One assignment of `X0, W[0..T], V1[0..=T], V2[0..=T]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub x0: usize,
    pub w: Vec<usize>,
    pub v1: Vec<usize>,
    pub v2: Vec<usize>,
    pub prob: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JointTable {
    pub horizon: usize,
    pub outcomes: Vec<Outcome>,
}

impl JointTable {
    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }

    pub fn total(&self) -> Rational {
        self.outcomes.iter().map(|o| &o.prob).sum()
    }
}

/// The product measure over all primitive variables, restricted to its
/// support.
pub fn build_joint(model: &TeamModel) -> Result<JointTable> {
    build_joint_capped(model, crate::budget(DEFAULT_WORK_CAP))
}

pub fn build_joint_capped(model: &TeamModel, cap: u128) -> Result<JointTable> {
    model.ensure_valid()?;
    let d = &model.dists;
    let support = |dist: &crate::model::Dist| -> Vec<(usize, Rational)> {
        dist.support().map(|(i, p)| (i, p.clone())).collect()
    };
    let mut factors: Vec<Vec<(usize, Rational)>> = vec![support(&d.x0)];
    factors.extend(d.w.iter().chain(&d.v1).chain(&d.v2).map(support));
    let count: BigUint = factors.iter().map(|f| BigUint::from(f.len())).product();
    if count > BigUint::from(cap) {
        return Err(Error::ResourceLimit(format!("joint table would hold {count} outcomes, cap is {cap}")));
    }
    let horizon = model.horizon;
    let mut outcomes = Vec::with_capacity(count.to_usize().unwrap_or(0));
    let mut digits = vec![0usize; factors.len()];
    loop {
        let pick = |i: usize| factors[i][digits[i]].0;
        let prob = digits
            .iter()
            .enumerate()
            .fold(Rational::one(), |acc, (i, &k)| acc * &factors[i][k].1);
        outcomes.push(Outcome {
            x0: pick(0),
            w: (0..horizon).map(|t| pick(1 + t)).collect(),
            v1: (0..=horizon).map(|t| pick(1 + horizon + t)).collect(),
            v2: (0..=horizon).map(|t| pick(2 + 2 * horizon + t)).collect(),
            prob,
        });
        let mut i = factors.len();
        loop {
            if i == 0 {
                return Ok(JointTable { horizon, outcomes });
            }
            i -= 1;
            digits[i] += 1;
            if digits[i] < factors[i].len() {
                break;
            }
            digits[i] = 0;
        }
    }
}

/// The realized path of one outcome under a fixed strategy.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trajectory {
    pub x: Vec<usize>,
    pub y1: Vec<usize>,
    pub y2: Vec<usize>,
    pub u1: Vec<usize>,
    pub u2: Vec<usize>,
    pub cost: Vec<Rational>,
}

/// A variable that can be conditioned on or queried.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Query {
    State(usize),
    Var(VarRef),
}

impl Trajectory {
    pub fn value(&self, v: VarRef) -> usize {
        match v.kind {
            VarKind::Y1 => self.y1[v.time],
            VarKind::Y2 => self.y2[v.time],
            VarKind::U1 => self.u1[v.time],
            VarKind::U2 => self.u2[v.time],
        }
    }

    pub fn query(&self, q: Query) -> usize {
        match q {
            Query::State(t) => self.x[t],
            Query::Var(v) => self.value(v),
        }
    }

    pub fn realization(&self, vars: &[VarRef]) -> Vec<usize> {
        vars.iter().map(|&v| self.value(v)).collect()
    }

    pub fn total_cost(&self) -> Rational {
        self.cost.iter().sum()
    }
}

/// Runs `controller` on one outcome.
pub fn trajectory<C: Controller + ?Sized>(model: &TeamModel, outcome: &Outcome, controller: &mut C) -> Result<Trajectory> {
    let horizon = model.horizon;
    let mut h = History::new();
    let mut x = outcome.x0;
    let mut traj = Trajectory {
        x: Vec::with_capacity(horizon + 1),
        y1: Vec::new(),
        y2: Vec::new(),
        u1: Vec::new(),
        u2: Vec::new(),
        cost: Vec::new(),
    };
    for t in 0..=horizon {
        traj.x.push(x);
        h.y1.push(model.observe(Agent::One, t, x, outcome.v1[t]));
        h.y2.push(model.observe(Agent::Two, t, x, outcome.v2[t]));
        let (u1, u2) = controller.act(t, &h)?;
        if u1 >= model.nu1(t) || u2 >= model.nu2(t) {
            return Err(Error::OutOfRange(format!("actions ({u1}, {u2}) at t = {t}")));
        }
        h.u1.push(u1);
        h.u2.push(u2);
        traj.cost.push(model.stage_cost(t, x, u1, u2).clone());
        if t < horizon {
            x = model.next_state(t, x, u1, u2, outcome.w[t]);
        }
    }
    traj.y1 = h.y1;
    traj.y2 = h.y2;
    traj.u1 = h.u1;
    traj.u2 = h.u2;
    Ok(traj)
}

/// Trajectories of every outcome, in table order.
pub fn trajectories<C: Controller + Clone + Sync>(
    joint: &JointTable,
    model: &TeamModel,
    controller: &C,
) -> Result<Vec<Trajectory>> {
    joint
        .outcomes
        .par_iter()
        .map_init(|| controller.clone(), |c, o| trajectory(model, o, c))
        .collect()
}

/// Exact expected total cost of any controller.
pub fn evaluate_controller<C: Controller + Clone + Sync>(
    joint: &JointTable,
    model: &TeamModel,
    controller: &C,
) -> Result<Rational> {
    let trajs = trajectories(joint, model, controller)?;
    Ok(joint.outcomes.iter().zip(&trajs).map(|(o, tr)| &o.prob * &tr.total_cost()).sum())
}

/// A control law for one agent at one stage: a table over the realizations of
/// `domain`, a sorted subset of the agent's memory, enumerated with the first
/// variable most significant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Law {
    pub t: usize,
    pub domain: Vec<VarRef>,
    pub actions: Vec<usize>,
    #[serde(skip)]
    radices: Vec<usize>,
}

impl Law {
    pub fn new(model: &TeamModel, t: usize, domain: Vec<VarRef>, actions: Vec<usize>) -> Self {
        let radices = domain.iter().map(|v| v.size(model)).collect();
        Law { t, domain, actions, radices }
    }

    fn constant(model: &TeamModel, t: usize, domain: Vec<VarRef>, action: usize) -> Self {
        let entries = table_len(model, &domain);
        Law::new(model, t, domain, vec![action; entries])
    }

    #[inline]
    pub fn index(&self, value: impl Fn(VarRef) -> usize) -> usize {
        self.domain
            .iter()
            .zip(&self.radices)
            .fold(0, |acc, (&v, &r)| acc * r + value(v))
    }

    #[inline]
    pub fn action(&self, value: impl Fn(VarRef) -> usize) -> usize {
        self.actions[self.index(value)]
    }
}

fn table_len(model: &TeamModel, domain: &[VarRef]) -> usize {
    domain.iter().map(|v| v.size(model)).product()
}

/// Uniformly random laws on the full memories.
pub fn random_strategy<R: Rng + ?Sized>(rng: &mut R, model: &TeamModel, info: &InfoStructure) -> ExplicitStrategy {
    let mut law = |agent: Agent, t: usize, domain: Vec<VarRef>| {
        let n = table_len(model, &domain);
        Law::new(model, t, domain, (0..n).map(|_| rng.random_range(0..model.nu(agent, t))).collect())
    };
    let agent1 = (0..=model.horizon).map(|t| law(Agent::One, t, info.step(t).m1.clone())).collect();
    let agent2 = (0..=model.horizon).map(|t| law(Agent::Two, t, info.step(t).m2.clone())).collect();
    ExplicitStrategy { agent1, agent2 }
}

/// Per-agent, per-stage maps from memory realizations to actions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExplicitStrategy {
    pub agent1: Vec<Law>,
    pub agent2: Vec<Law>,
}

#[derive(Serialize, Deserialize)]
struct StrategyDoc {
    agent1: Vec<Law>,
    agent2: Vec<Law>,
}

impl ExplicitStrategy {
    /// Checks every law against the model and the memories of `info`.
    pub fn new(model: &TeamModel, info: &InfoStructure, agent1: Vec<Law>, agent2: Vec<Law>) -> Result<Self> {
        let mut out = ExplicitStrategy { agent1: Vec::new(), agent2: Vec::new() };
        for (agent, laws) in [(Agent::One, agent1), (Agent::Two, agent2)] {
            if laws.len() != model.horizon + 1 {
                return Err(Error::DimensionMismatch(format!(
                    "agent {agent} has {} laws for {} stages",
                    laws.len(),
                    model.horizon + 1
                )));
            }
            let mut checked = Vec::with_capacity(laws.len());
            for (t, law) in laws.into_iter().enumerate() {
                let memory = match agent {
                    Agent::One => &info.step(t).m1,
                    Agent::Two => &info.step(t).m2,
                };
                if law.t != t {
                    return Err(Error::DimensionMismatch(format!("law for t = {} listed at position {t}", law.t)));
                }
                if let Some(v) = law.domain.iter().find(|v| !memory.contains(v)) {
                    return Err(Error::OutOfRange(format!("agent {agent} does not know {v} at t = {t}")));
                }
                let law = Law::new(model, t, law.domain, law.actions);
                if law.actions.len() != table_len(model, &law.domain) {
                    return Err(Error::DimensionMismatch(format!(
                        "agent {agent} law at t = {t} has {} entries for {} realizations",
                        law.actions.len(),
                        table_len(model, &law.domain)
                    )));
                }
                if let Some(u) = law.actions.iter().find(|&&u| u >= model.nu(agent, t)) {
                    return Err(Error::OutOfRange(format!("agent {agent} action {u} at t = {t}")));
                }
                checked.push(law);
            }
            match agent {
                Agent::One => out.agent1 = checked,
                Agent::Two => out.agent2 = checked,
            }
        }
        Ok(out)
    }

    /// Both agents play fixed actions, ignoring all data.
    pub fn constant(model: &TeamModel, u1: usize, u2: usize) -> Self {
        let laws = |u| (0..=model.horizon).map(|t| Law::constant(model, t, Vec::new(), u)).collect();
        ExplicitStrategy { agent1: laws(u1), agent2: laws(u2) }
    }

    pub fn from_json(model: &TeamModel, info: &InfoStructure, text: &str) -> Result<Self> {
        let doc: StrategyDoc = serde_json::from_str(text)?;
        ExplicitStrategy::new(model, info, doc.agent1, doc.agent2)
    }

    pub fn to_json(&self) -> Value {
        serde_json::to_value(StrategyDoc { agent1: self.agent1.clone(), agent2: self.agent2.clone() })
            .expect("strategies serialize")
    }

    /// Agent 2's prescription at `t` given accessible data `a2`: the law
    /// evaluated at every private tuple.
    pub fn prescription2(
        &self,
        model: &TeamModel,
        info: &InfoStructure,
        t: usize,
        a2: &[usize],
    ) -> PrivatePrescription {
        let step = info.step(t);
        let space = info.private_space(model, t);
        let actions = space
            .tuples
            .iter()
            .map(|l| {
                self.agent2[t].action(|v| match step.a2.iter().position(|a| *a == v) {
                    Some(i) => a2[i],
                    None => l[step.l2.iter().position(|p| *p == v).expect("agent 2 memory is A2 plus L2")],
                })
            })
            .collect();
        PrivatePrescription::new(t, actions)
    }
}

fn history_value(h: &History, v: VarRef) -> usize {
    match v.kind {
        VarKind::Y1 => h.y1[v.time],
        VarKind::Y2 => h.y2[v.time],
        VarKind::U1 => h.u1[v.time],
        VarKind::U2 => h.u2[v.time],
    }
}

impl Controller for ExplicitStrategy {
    fn act(&mut self, t: usize, history: &History) -> Result<(usize, usize)> {
        let (l1, l2) = match (self.agent1.get(t), self.agent2.get(t)) {
            (Some(a), Some(b)) => (a, b),
            _ => return Err(Error::OutOfRange(format!("no law at t = {t}"))),
        };
        Ok((l1.action(|v| history_value(history, v)), l2.action(|v| history_value(history, v))))
    }
}

/// Exact expected total cost of `g`.
pub fn evaluate_strategy(joint: &JointTable, model: &TeamModel, info: &InfoStructure, g: &ExplicitStrategy) -> Result<Rational> {
    let g = ExplicitStrategy::new(model, info, g.agent1.clone(), g.agent2.clone())?;
    evaluate_controller(joint, model, &g)
}

/// `P(key | event)` over the outcomes, given their trajectories.
pub fn conditional<K: Ord>(
    joint: &JointTable,
    trajectories: &[Trajectory],
    event: impl Fn(&Trajectory) -> bool,
    key: impl Fn(usize, &Trajectory) -> K,
) -> Result<BTreeMap<K, Rational>> {
    let mut mass: BTreeMap<K, Rational> = BTreeMap::new();
    let mut total = Rational::zero();
    for (i, (o, tr)) in joint.outcomes.iter().zip(trajectories).enumerate() {
        if event(tr) {
            total += &o.prob;
            *mass.entry(key(i, tr)).or_default() += &o.prob;
        }
    }
    if total.is_zero() {
        return Err(Error::ZeroProbabilityObservation("conditioning event has probability zero".into()));
    }
    for p in mass.values_mut() {
        *p = &*p / &total;
    }
    Ok(mass)
}

/// Distribution of `query` given `given`, with actions expanded along
/// `trajectories`.
pub fn condition(
    joint: &JointTable,
    trajectories: &[Trajectory],
    given: &[(Query, usize)],
    query: &[Query],
) -> Result<BTreeMap<Vec<usize>, Rational>> {
    conditional(
        joint,
        trajectories,
        |tr| given.iter().all(|&(q, v)| tr.query(q) == v),
        |_, tr| query.iter().map(|&q| tr.query(q)).collect(),
    )
}

/// A run of a prescription strategy in which agent 1's belief is obtained by
/// conditioning the joint table directly.
#[derive(Debug, Clone)]
pub struct LayeredRun {
    pub trajectories: Vec<Trajectory>,
    /// `pi1[t][i]`: `P(X[t], L2[t] | M1[t])` at outcome `i`'s realization.
    pub pi1: Vec<Vec<Arc<Belief1>>>,
    /// `private[t][i]`: index of outcome `i`'s private tuple.
    pub private: Vec<Vec<usize>>,
}

/// Agent-1 rule of [`layered_rollout`].
pub type LayeredPsi1<'a> = dyn FnMut(usize, &[usize], &Arc<Belief1>) -> Result<usize> + 'a;

/// Agent 1 plays `psi1(t, a2, pi1)`, agent 2 plays `psi2(t, a2)` on its
/// private tuple. Beliefs are computed stage by stage from the joint table.
pub fn layered_rollout(
    joint: &JointTable,
    model: &TeamModel,
    info: &InfoStructure,
    psi1: &mut LayeredPsi1<'_>,
    psi2: &mut dyn FnMut(usize, &[usize]) -> Result<PrivatePrescription>,
) -> Result<LayeredRun> {
    let horizon = model.horizon;
    let n = joint.len();
    let mut trajs: Vec<Trajectory> = joint
        .outcomes
        .iter()
        .map(|o| Trajectory {
            x: vec![o.x0],
            y1: Vec::new(),
            y2: Vec::new(),
            u1: Vec::new(),
            u2: Vec::new(),
            cost: Vec::new(),
        })
        .collect();
    let mut run = LayeredRun { trajectories: Vec::new(), pi1: Vec::new(), private: Vec::new() };
    for t in 0..=horizon {
        for (o, tr) in joint.outcomes.iter().zip(trajs.iter_mut()) {
            tr.y1.push(model.observe(Agent::One, t, tr.x[t], o.v1[t]));
            tr.y2.push(model.observe(Agent::Two, t, tr.x[t], o.v2[t]));
        }
        let step = info.step(t);
        let space = info.private_space(model, t);
        let private: Vec<usize> = trajs.iter().map(|tr| space.index(&tr.realization(&step.l2))).collect();
        let mut groups: BTreeMap<Vec<usize>, Vec<usize>> = BTreeMap::new();
        for (i, tr) in trajs.iter().enumerate() {
            groups.entry(tr.realization(&step.m1)).or_default().push(i);
        }
        let mut pi1: Vec<Option<Arc<Belief1>>> = vec![None; n];
        for members in groups.values() {
            let mut mass = BTreeMap::new();
            for &i in members {
                *mass.entry((trajs[i].x[t], private[i])).or_default() += &joint.outcomes[i].prob;
            }
            let (_, belief) = Belief1::normalize(t, mass).expect("outcomes have positive probability");
            let belief = Arc::new(belief);
            for &i in members {
                pi1[i] = Some(belief.clone());
            }
        }
        let pi1: Vec<Arc<Belief1>> = pi1.into_iter().map(|b| b.expect("every outcome is grouped")).collect();
        let mut gamma2: HashMap<Vec<usize>, PrivatePrescription> = HashMap::new();
        for (i, tr) in trajs.iter_mut().enumerate() {
            let a2 = tr.realization(&step.a2);
            if !gamma2.contains_key(&a2) {
                gamma2.insert(a2.clone(), psi2(t, &a2)?);
            }
            let u2 = gamma2[&a2].action(private[i]);
            let u1 = psi1(t, &a2, &pi1[i])?;
            if u1 >= model.nu1(t) || u2 >= model.nu2(t) {
                return Err(Error::OutOfRange(format!("actions ({u1}, {u2}) at t = {t}")));
            }
            let x = tr.x[t];
            tr.u1.push(u1);
            tr.u2.push(u2);
            tr.cost.push(model.stage_cost(t, x, u1, u2).clone());
            if t < horizon {
                tr.x.push(model.next_state(t, x, u1, u2, joint.outcomes[i].w[t]));
            }
        }
        run.pi1.push(pi1);
        run.private.push(private);
    }
    run.trajectories = trajs;
    Ok(run)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OracleMode {
    /// `Brute` when affordable, otherwise `Hybrid`.
    #[default]
    Auto,
    Brute,
    Hybrid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleOptions {
    pub mode: OracleMode,
    /// Cap on enumerated strategies times outcomes.
    pub work_cap: u128,
    /// Cap on the number of enumerated strategies.
    pub max_strategies: Option<u128>,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions { mode: OracleMode::Auto, work_cap: crate::budget(DEFAULT_WORK_CAP), max_strategies: None }
    }
}

#[derive(Debug, Clone)]
pub struct OracleResult {
    pub value: Rational,
    pub argmin: ExplicitStrategy,
    pub mode: OracleMode,
    /// Strategies enumerated explicitly (agent-2 strategies only in `Hybrid`).
    pub enumerated: u128,
}

impl OracleResult {
    pub fn to_json(&self) -> Value {
        json!({
            "value": self.value.to_string(),
            "value_f64": self.value.to_f64(),
            "mode": match self.mode { OracleMode::Brute => "brute", _ => "hybrid" },
            "enumerated": self.enumerated.to_string(),
            "argmin": self.argmin.to_json(),
        })
    }
}

/// Reduced agent-1 domain: memory minus agent 1's own actions and minus
/// agent-2 actions whose generating observations agent 1 holds.
fn reduced_domain1(info: &InfoStructure, t: usize) -> Vec<VarRef> {
    let m1 = &info.step(t).m1;
    m1.iter()
        .copied()
        .filter(|v| match v.kind {
            VarKind::U1 => false,
            VarKind::U2 => !(0..=v.time).all(|s| m1.contains(&VarRef::new(VarKind::Y2, s))),
            _ => true,
        })
        .collect()
}

/// Reduced agent-2 domain: its observations.
fn reduced_domain2(info: &InfoStructure, t: usize) -> Vec<VarRef> {
    info.step(t).m2.iter().copied().filter(|v| !v.kind.is_action()).collect()
}

/// Strategy counts `prod_t |U^k_t|^(|D^k_t|)` over the reduced domains, for
/// agents 1 and 2.
pub fn strategy_count(model: &TeamModel, info: &InfoStructure) -> (BigUint, BigUint) {
    let count = |agent: Agent| -> BigUint {
        (0..=model.horizon)
            .map(|t| {
                let domain = match agent {
                    Agent::One => reduced_domain1(info, t),
                    Agent::Two => reduced_domain2(info, t),
                };
                BigUint::from(model.nu(agent, t)).pow(table_len(model, &domain) as u32)
            })
            .product()
    };
    (count(Agent::One), count(Agent::Two))
}

/// `(radix, entries)` for each stage's law.
type Shape = Vec<(usize, usize)>;

fn shape(model: &TeamModel, agent: Agent, domains: &[Vec<VarRef>]) -> Shape {
    domains
        .iter()
        .enumerate()
        .map(|(t, d)| (model.nu(agent, t), table_len(model, d)))
        .collect()
}

/// Laws number `index` of the enumeration, first stage and first entry most
/// significant.
fn decode(model: &TeamModel, domains: &[Vec<VarRef>], shape: &Shape, mut index: u128) -> Vec<Law> {
    let mut tables: Vec<Vec<usize>> = shape.iter().map(|&(_, n)| vec![0; n]).collect();
    for (t, &(radix, _)) in shape.iter().enumerate().rev() {
        for slot in tables[t].iter_mut().rev() {
            *slot = (index % radix as u128) as usize;
            index /= radix as u128;
        }
    }
    tables
        .into_iter()
        .enumerate()
        .map(|(t, actions)| Law::new(model, t, domains[t].clone(), actions))
        .collect()
}

/// Exact arithmetic used by the enumeration engines: scaled integers when
/// they provably fit, rationals otherwise.
trait Weight: Clone + Ord + Send + Sync {
    fn zero() -> Self;
    fn add(&self, other: &Self) -> Self;
    fn mul(&self, other: &Self) -> Self;
}

impl Weight for i128 {
    fn zero() -> Self {
        0
    }
    fn add(&self, other: &Self) -> Self {
        self + other
    }
    fn mul(&self, other: &Self) -> Self {
        self * other
    }
}

impl Weight for Rational {
    fn zero() -> Self {
        Rational::zero()
    }
    fn add(&self, other: &Self) -> Self {
        self + other
    }
    fn mul(&self, other: &Self) -> Self {
        self * other
    }
}

/// Per-outcome trajectory buffers, `T + 1` slots per outcome.
struct Buffers {
    width: usize,
    x: Vec<usize>,
    y1: Vec<usize>,
    y2: Vec<usize>,
    u1: Vec<usize>,
    u2: Vec<usize>,
}

impl Buffers {
    fn new(model: &TeamModel, joint: &JointTable) -> Self {
        let width = model.horizon + 1;
        let n = joint.len() * width;
        let mut b = Buffers { width, x: vec![0; n], y1: vec![0; n], y2: vec![0; n], u1: vec![0; n], u2: vec![0; n] };
        for (i, o) in joint.outcomes.iter().enumerate() {
            let k = i * width;
            b.x[k] = o.x0;
            b.y1[k] = model.observe(Agent::One, 0, o.x0, o.v1[0]);
            b.y2[k] = model.observe(Agent::Two, 0, o.x0, o.v2[0]);
        }
        b
    }

    #[inline]
    fn value(&self, i: usize, v: VarRef) -> usize {
        let k = i * self.width + v.time;
        match v.kind {
            VarKind::Y1 => self.y1[k],
            VarKind::Y2 => self.y2[k],
            VarKind::U1 => self.u1[k],
            VarKind::U2 => self.u2[k],
        }
    }
}

struct Engine<'a, W> {
    model: &'a TeamModel,
    info: &'a InfoStructure,
    joint: &'a JointTable,
    prob: Vec<W>,
    /// `[t][x][u1][u2]`.
    cost: Vec<Vec<Vec<Vec<W>>>>,
    /// Radices of `Z1[t]` for bucketing.
    z1_radices: Vec<Vec<usize>>,
}

impl<'a, W: Weight> Engine<'a, W> {
    fn new(
        model: &'a TeamModel,
        info: &'a InfoStructure,
        joint: &'a JointTable,
        prob: Vec<W>,
        cost: Vec<Vec<Vec<Vec<W>>>>,
    ) -> Self {
        let z1_radices = (0..=model.horizon).map(|t| info.radices(model, &info.step(t).z1)).collect();
        Engine { model, info, joint, prob, cost, z1_radices }
    }

    /// Plays `(u1, u2)` for outcome `i` at `t`, advancing its buffers.
    #[inline]
    fn play(&self, buf: &mut Buffers, i: usize, t: usize, u1: usize, u2: usize) -> W {
        let k = i * buf.width + t;
        let x = buf.x[k];
        buf.u1[k] = u1;
        buf.u2[k] = u2;
        if t < self.model.horizon {
            let o = &self.joint.outcomes[i];
            let next = self.model.next_state(t, x, u1, u2, o.w[t]);
            buf.x[k + 1] = next;
            buf.y1[k + 1] = self.model.observe(Agent::One, t + 1, next, o.v1[t + 1]);
            buf.y2[k + 1] = self.model.observe(Agent::Two, t + 1, next, o.v2[t + 1]);
        }
        self.prob[i].mul(&self.cost[t][x][u1][u2])
    }

    fn evaluate(&self, buf: &mut Buffers, g1: &[Law], g2: &[Law]) -> W {
        let mut total = W::zero();
        for i in 0..self.joint.len() {
            for t in 0..=self.model.horizon {
                let u1 = g1[t].action(|v| buf.value(i, v));
                let u2 = g2[t].action(|v| buf.value(i, v));
                total = total.add(&self.play(buf, i, t, u1, u2));
            }
        }
        total
    }

    fn buckets(&self, buf: &Buffers, t: usize, node: &[u32]) -> Vec<Vec<u32>> {
        let vars = &self.info.step(t).z1;
        let radices = &self.z1_radices[t];
        let size: usize = radices.iter().product();
        let mut out: Vec<Vec<u32>> = vec![Vec::new(); size];
        for &i in node {
            let key = vars
                .iter()
                .zip(radices)
                .fold(0, |acc, (&v, &r)| acc * r + buf.value(i as usize, v));
            out[key].push(i);
        }
        out.retain(|b| !b.is_empty());
        out
    }

    /// Agent 1's optimal cost-to-go on `node`, a set of outcomes sharing one
    /// realization of `M1[t]`. With `record`, the minimizing actions along the
    /// optimal subtree are stored by memory realization.
    fn best_response(
        &self,
        buf: &mut Buffers,
        g2: &[Law],
        t: usize,
        node: &[u32],
        record: &mut Option<&mut HashMap<(usize, Vec<usize>), usize>>,
    ) -> W {
        let mut best: Option<(W, usize)> = None;
        for u1 in 0..self.model.nu1(t) {
            let v = self.branch(buf, g2, t, node, u1, &mut None);
            if best.as_ref().is_none_or(|(b, _)| v < *b) {
                best = Some((v, u1));
            }
        }
        let (value, u1) = best.expect("at least one action");
        if let Some(map) = record.as_deref_mut() {
            let m1 = &self.info.step(t).m1;
            let i = node[0] as usize;
            map.insert((t, m1.iter().map(|&v| buf.value(i, v)).collect()), u1);
            self.branch(buf, g2, t, node, u1, record);
        }
        value
    }

    fn branch(
        &self,
        buf: &mut Buffers,
        g2: &[Law],
        t: usize,
        node: &[u32],
        u1: usize,
        record: &mut Option<&mut HashMap<(usize, Vec<usize>), usize>>,
    ) -> W {
        let mut v = W::zero();
        for &i in node {
            let i = i as usize;
            let u2 = g2[t].action(|var| buf.value(i, var));
            v = v.add(&self.play(buf, i, t, u1, u2));
        }
        if t < self.model.horizon {
            for child in self.buckets(buf, t + 1, node) {
                v = v.add(&self.best_response(buf, g2, t + 1, &child, record));
            }
        }
        v
    }

    fn roots(&self, buf: &Buffers) -> Vec<Vec<u32>> {
        let all: Vec<u32> = (0..self.joint.len() as u32).collect();
        self.buckets(buf, 0, &all)
    }

    fn hybrid_value(&self, buf: &mut Buffers, g2: &[Law]) -> W {
        let mut v = W::zero();
        for root in self.roots(buf) {
            v = v.add(&self.best_response(buf, g2, 0, &root, &mut None));
        }
        v
    }

    fn hybrid_policy(&self, g2: &[Law]) -> Result<Vec<Law>> {
        let mut buf = Buffers::new(self.model, self.joint);
        let mut map = HashMap::new();
        for root in self.roots(&buf) {
            self.best_response(&mut buf, g2, 0, &root, &mut Some(&mut map));
        }
        (0..=self.model.horizon)
            .map(|t| {
                let domain = self.info.step(t).m1.clone();
                let radices = self.info.radices(self.model, &domain);
                let entries: usize = radices.iter().product();
                if entries > MAX_LAW_ENTRIES {
                    return Err(Error::ResourceLimit(format!(
                        "agent-1 law at t = {t} would have {entries} entries"
                    )));
                }
                let mut law = Law::new(self.model, t, domain, vec![0; entries]);
                for ((s, m1), u1) in &map {
                    if *s == t {
                        let idx = m1.iter().zip(&radices).fold(0, |acc, (&v, &r)| acc * r + v);
                        law.actions[idx] = *u1;
                    }
                }
                Ok(law)
            })
            .collect()
    }
}

fn to_u128(n: &BigUint) -> Option<u128> {
    n.to_u128()
}

/// The minimum of the expected total cost over every team strategy, with a
/// minimizing strategy. Ties go to the first strategy in enumeration order.
pub fn exhaustive_min(
    joint: &JointTable,
    model: &TeamModel,
    info: &InfoStructure,
    options: OracleOptions,
) -> Result<OracleResult> {
    model.ensure_valid()?;
    info.ensure_valid(model)?;
    let (count1, count2) = strategy_count(model, info);
    let outcomes = BigUint::from(joint.len());
    let brute_work = &count1 * &count2 * &outcomes;
    let hybrid_work = &count2 * &outcomes;
    let cap = BigUint::from(options.work_cap);
    let max_strategies = options.max_strategies.map(BigUint::from);
    let within = |work: &BigUint, strategies: &BigUint| {
        *work <= cap && max_strategies.as_ref().is_none_or(|m| strategies <= m)
    };
    let brute_count = &count1 * &count2;
    let mode = match options.mode {
        OracleMode::Auto if within(&brute_work, &brute_count) => OracleMode::Brute,
        OracleMode::Auto => OracleMode::Hybrid,
        m => m,
    };
    let (work, strategies) = match mode {
        OracleMode::Brute => (&brute_work, &brute_count),
        _ => (&hybrid_work, &count2),
    };
    if !within(work, strategies) {
        return Err(Error::ResourceLimit(format!(
            "exhaustive search needs {strategies} strategies over {outcomes} outcomes ({work} evaluations); \
             agent-1 count {count1}, agent-2 count {count2}, cap {cap}"
        )));
    }

    let prob_denom = common_denominator(joint.outcomes.iter().map(|o| &o.prob));
    let cost_denom = common_denominator(model.cost.iter().flatten().flatten().flatten());
    let bound = &prob_denom
        * scaled_numerator(&model.cost_sup(), &cost_denom)
        * BigInt::from(model.horizon + 1);
    let fits = bound.bits() < 120;
    let result = if fits {
        let prob = joint.outcomes.iter().map(|o| scaled_numerator(&o.prob, &prob_denom).to_i128().expect("fits")).collect();
        let cost = scale_costs(model, |c| scaled_numerator(c, &cost_denom).to_i128().expect("fits"));
        let engine = Engine::new(model, info, joint, prob, cost);
        let (v, argmin, n) = run(&engine, mode, &count1, &count2)?;
        let scale = Rational::from_bigints(&prob_denom * &cost_denom, BigInt::one());
        (Rational::from_bigints(BigInt::from(v), BigInt::one()) / scale, argmin, n)
    } else {
        let prob = joint.outcomes.iter().map(|o| o.prob.clone()).collect();
        let cost = scale_costs(model, Rational::clone);
        let engine = Engine::new(model, info, joint, prob, cost);
        run(&engine, mode, &count1, &count2)?
    };
    Ok(OracleResult { value: result.0, argmin: result.1, mode, enumerated: result.2 })
}

fn scale_costs<W>(model: &TeamModel, f: impl Fn(&Rational) -> W) -> Vec<Vec<Vec<Vec<W>>>> {
    model
        .cost
        .iter()
        .map(|a| a.iter().map(|b| b.iter().map(|c| c.iter().map(&f).collect()).collect()).collect())
        .collect()
}

fn run<W: Weight>(engine: &Engine<'_, W>, mode: OracleMode, count1: &BigUint, count2: &BigUint) -> Result<(W, ExplicitStrategy, u128)> {
    let (model, info) = (engine.model, engine.info);
    let domains2: Vec<Vec<VarRef>> = (0..=model.horizon).map(|t| reduced_domain2(info, t)).collect();
    let shape2 = shape(model, Agent::Two, &domains2);
    let n2 = to_u128(count2).ok_or_else(|| Error::ResourceLimit(format!("{count2} agent-2 strategies")))?;
    match mode {
        OracleMode::Brute => {
            let domains1: Vec<Vec<VarRef>> = (0..=model.horizon).map(|t| reduced_domain1(info, t)).collect();
            let shape1 = shape(model, Agent::One, &domains1);
            let n1 = to_u128(count1).ok_or_else(|| Error::ResourceLimit(format!("{count1} agent-1 strategies")))?;
            let (value, j, i) = (0..n2)
                .into_par_iter()
                .map_init(
                    || Buffers::new(model, engine.joint),
                    |buf, j| {
                        let g2 = decode(model, &domains2, &shape2, j);
                        let mut best: Option<(W, u128)> = None;
                        for i in 0..n1 {
                            let g1 = decode(model, &domains1, &shape1, i);
                            let v = engine.evaluate(buf, &g1, &g2);
                            if best.as_ref().is_none_or(|(b, _)| v < *b) {
                                best = Some((v, i));
                            }
                        }
                        let (v, i) = best.expect("at least one strategy");
                        (v, j, i)
                    },
                )
                .min()
                .expect("at least one strategy");
            let argmin = ExplicitStrategy {
                agent1: decode(model, &domains1, &shape1, i),
                agent2: decode(model, &domains2, &shape2, j),
            };
            Ok((value, argmin, n1 * n2))
        }
        _ => {
            let (value, j) = (0..n2)
                .into_par_iter()
                .map_init(
                    || Buffers::new(model, engine.joint),
                    |buf, j| {
                        let g2 = decode(model, &domains2, &shape2, j);
                        (engine.hybrid_value(buf, &g2), j)
                    },
                )
                .min()
                .expect("at least one strategy");
            let agent2 = decode(model, &domains2, &shape2, j);
            let agent1 = engine.hybrid_policy(&agent2)?;
            Ok((value, ExplicitStrategy { agent1, agent2 }, n2))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::{random_team_model, Dims};
    use crate::info::build_delayed_structure;
    use crate::model::Dist;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn model(seed: u64, horizon: usize) -> TeamModel {
        let dims = Dims { x: 2, u1: 2, u2: 2, w: 2, v1: 2, v2: 2, y1: 2, y2: 2 };
        random_team_model(&mut ChaCha8Rng::seed_from_u64(seed), dims, horizon)
    }

    fn deterministic(m: &mut TeamModel) {
        m.dists.x0 = Dist::point_mass(2, 1);
        for d in m.dists.w.iter_mut().chain(&mut m.dists.v1).chain(&mut m.dists.v2) {
            *d = Dist::point_mass(2, 0);
        }
    }

    #[test]
    fn deterministic_joint_has_one_outcome() {
        let mut m = model(1, 2);
        deterministic(&mut m);
        let j = build_joint(&m).unwrap();
        assert_eq!(j.len(), 1);
        assert!(j.outcomes[0].prob.is_one());
    }

    #[test]
    fn fair_coins_give_four_outcomes() {
        let mut m = model(2, 0);
        deterministic(&mut m);
        m.dists.x0 = Dist::uniform(2);
        m.dists.v1[0] = Dist::uniform(2);
        let j = build_joint(&m).unwrap();
        assert_eq!(j.len(), 4);
        assert!(j.outcomes.iter().all(|o| o.prob == Rational::new(1, 4)));
    }

    #[test]
    fn marginals_recover_the_declared_distributions() {
        let m = model(3, 2);
        let j = build_joint(&m).unwrap();
        assert!(j.total().is_one());
        for x in 0..2 {
            let p: Rational = j.outcomes.iter().filter(|o| o.x0 == x).map(|o| &o.prob).sum();
            assert_eq!(&p, m.dists.x0.prob(x));
        }
        for t in 0..2 {
            for w in 0..2 {
                let p: Rational = j.outcomes.iter().filter(|o| o.w[t] == w).map(|o| &o.prob).sum();
                assert_eq!(&p, m.dists.w[t].prob(w));
            }
        }
        for t in 0..=2 {
            for v in 0..2 {
                let p: Rational = j.outcomes.iter().filter(|o| o.v2[t] == v).map(|o| &o.prob).sum();
                assert_eq!(&p, m.dists.v2[t].prob(v));
            }
        }
    }

    #[test]
    fn joint_cap_is_enforced() {
        let m = model(4, 2);
        assert!(matches!(build_joint_capped(&m, 10), Err(Error::ResourceLimit(_))));
        assert_eq!(build_joint_capped(&m, 512).unwrap().len(), 512);
    }

    #[test]
    fn zero_cost_evaluates_to_zero() {
        let mut m = model(5, 1);
        for c in m.cost.iter_mut().flatten().flatten().flatten() {
            *c = Rational::zero();
        }
        let info = build_delayed_structure(&m, 1).unwrap();
        let j = build_joint(&m).unwrap();
        let g = random_strategy(&mut ChaCha8Rng::seed_from_u64(0), &m, &info);
        assert!(evaluate_strategy(&j, &m, &info, &g).unwrap().is_zero());
    }

    #[test]
    fn deterministic_evaluation_is_the_plain_cost_sum() {
        let mut m = model(6, 2);
        deterministic(&mut m);
        let info = build_delayed_structure(&m, 1).unwrap();
        let j = build_joint(&m).unwrap();
        let g = ExplicitStrategy::constant(&m, 1, 0);
        let mut x = 1;
        let mut expect = Rational::zero();
        for t in 0..=2 {
            expect += m.stage_cost(t, x, 1, 0);
            if t < 2 {
                x = m.next_state(t, x, 1, 0, 0);
            }
        }
        assert_eq!(evaluate_strategy(&j, &m, &info, &g).unwrap(), expect);
    }

    #[test]
    fn single_stage_without_observations_is_a_constant_pair_minimum() {
        let mut m = model(7, 0);
        for obs in [&mut m.obs1, &mut m.obs2] {
            for row in obs[0].iter_mut() {
                row.iter_mut().for_each(|y| *y = 0);
            }
        }
        let info = build_delayed_structure(&m, 1).unwrap();
        let j = build_joint(&m).unwrap();
        let r = exhaustive_min(&j, &m, &info, OracleOptions::default()).unwrap();
        let expect = (0..2)
            .flat_map(|u1| (0..2).map(move |u2| (u1, u2)))
            .map(|(u1, u2)| (0..2).map(|x| m.dists.x0.prob(x) * m.stage_cost(0, x, u1, u2)).sum::<Rational>())
            .min()
            .unwrap();
        assert_eq!(r.value, expect);
    }

    #[test]
    fn action_independent_cost_is_the_expected_sum() {
        let mut m = model(8, 1);
        for t in 0..=1 {
            for x in 0..2 {
                for u1 in 0..2 {
                    for u2 in 0..2 {
                        m.cost[t][x][u1][u2] = Rational::from_integer((x + 2 * t) as i64);
                    }
                }
                for u1 in 0..2 {
                    for u2 in 0..2 {
                        if t == 0 {
                            m.transition[0][x][u1][u2] = m.transition[0][x][0][0].clone();
                        }
                    }
                }
            }
        }
        let info = build_delayed_structure(&m, 1).unwrap();
        let j = build_joint(&m).unwrap();
        let g = ExplicitStrategy::constant(&m, 0, 0);
        let expect = evaluate_strategy(&j, &m, &info, &g).unwrap();
        for mode in [OracleMode::Brute, OracleMode::Hybrid] {
            let r = exhaustive_min(&j, &m, &info, OracleOptions { mode, ..Default::default() }).unwrap();
            assert_eq!(r.value, expect);
        }
    }

    #[test]
    fn brute_and_hybrid_agree_and_minimize() {
        for seed in 10..13 {
            let m = model(seed, 1);
            let info = build_delayed_structure(&m, 1).unwrap();
            let j = build_joint(&m).unwrap();
            let brute =
                exhaustive_min(&j, &m, &info, OracleOptions { mode: OracleMode::Brute, ..Default::default() }).unwrap();
            let hybrid =
                exhaustive_min(&j, &m, &info, OracleOptions { mode: OracleMode::Hybrid, ..Default::default() })
                    .unwrap();
            assert_eq!(brute.value, hybrid.value);
            assert_eq!(evaluate_strategy(&j, &m, &info, &brute.argmin).unwrap(), brute.value);
            assert_eq!(evaluate_strategy(&j, &m, &info, &hybrid.argmin).unwrap(), hybrid.value);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..50 {
                let g = random_strategy(&mut rng, &m, &info);
                assert!(brute.value <= evaluate_strategy(&j, &m, &info, &g).unwrap());
            }
        }
    }

    #[test]
    fn count_formula_matches_enumeration() {
        let m = model(14, 1);
        let info = build_delayed_structure(&m, 1).unwrap();
        let (c1, c2) = strategy_count(&m, &info);
        // Agent 1 keys: Y1@0; then Y1@0, Y1@1, Y2@0 (U2@0 is implied by Y2@0).
        assert_eq!(c1, BigUint::from(2u32).pow(2 + 8));
        // Agent 2 keys: Y2@0; then Y2@0, Y2@1.
        assert_eq!(c2, BigUint::from(2u32).pow(2 + 4));
        let j = build_joint(&m).unwrap();
        let r = exhaustive_min(&j, &m, &info, OracleOptions { mode: OracleMode::Brute, ..Default::default() }).unwrap();
        assert_eq!(BigUint::from(r.enumerated), c1 * c2);
    }

    #[test]
    fn caps_report_the_count() {
        let m = model(15, 2);
        let info = build_delayed_structure(&m, 1).unwrap();
        let j = build_joint(&m).unwrap();
        let opts = OracleOptions { mode: OracleMode::Brute, ..Default::default() };
        match exhaustive_min(&j, &m, &info, opts) {
            Err(Error::ResourceLimit(msg)) => assert!(msg.contains("strategies")),
            other => panic!("expected a resource error, got {other:?}"),
        }
    }

    #[test]
    fn conditioning_on_nothing_and_everything() {
        let m = model(16, 1);
        let info = build_delayed_structure(&m, 1).unwrap();
        let j = build_joint(&m).unwrap();
        let g = random_strategy(&mut ChaCha8Rng::seed_from_u64(1), &m, &info);
        let trajs = trajectories(&j, &m, &g).unwrap();
        let prior = condition(&j, &trajs, &[], &[Query::State(0)]).unwrap();
        for x in 0..2 {
            assert_eq!(prior.get(&vec![x]).cloned().unwrap_or_default(), m.dists.x0.prob(x).clone());
        }
        let post = conditional(&j, &trajs, |tr| *tr == trajs[0], |i, _| i).unwrap();
        let total: Rational = post.values().sum();
        assert!(total.is_one());
        assert!(post.keys().all(|&i| trajs[i] == trajs[0]));
        let none = condition(&j, &trajs, &[(Query::State(0), 7)], &[Query::State(1)]);
        assert!(matches!(none, Err(Error::ZeroProbabilityObservation(_))));
    }

    #[test]
    fn strategy_json_round_trip() {
        let m = model(17, 1);
        let info = build_delayed_structure(&m, 1).unwrap();
        let g = random_strategy(&mut ChaCha8Rng::seed_from_u64(2), &m, &info);
        let back = ExplicitStrategy::from_json(&m, &info, &g.to_json().to_string()).unwrap();
        assert_eq!(back, g);
        let mut bad = g.clone();
        bad.agent2[1].domain.push(VarRef::new(VarKind::Y1, 0));
        assert!(ExplicitStrategy::new(&m, &info, bad.agent1, bad.agent2).is_err());
    }
}
