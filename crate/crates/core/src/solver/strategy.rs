//! Closed-loop controllers built from solved policies.

use std::collections::HashMap;
use std::sync::Arc;

use crate::belief::{update_belief1, Belief1, Belief2, PrivatePrescription};
use crate::control::{Controller, History};
use crate::error::{Error, Result};
use crate::info::{splice, Fresh, InfoStructure, StepPlan};
use crate::model::TeamModel;

use super::approx::ApproxPolicy;
use super::exact::{PolicyEntry, ValuePolicy};
use super::pbp::{PbpPolicy, Psi2};

/// Realized private tuple of the current stage, rebuilt from the history one
/// stage at a time.
#[derive(Debug, Clone)]
struct Tracker {
    model: Arc<TeamModel>,
    info: Arc<InfoStructure>,
    next_t: usize,
    l: Vec<usize>,
}

/// Data entering at stage `t`.
struct Arrival {
    z1: Vec<usize>,
    z2: Vec<usize>,
}

impl Tracker {
    fn new(model: Arc<TeamModel>, info: Arc<InfoStructure>) -> Self {
        Tracker { model, info, next_t: 0, l: Vec::new() }
    }

    fn advance(&mut self, t: usize, h: &History) -> Result<Arrival> {
        if t != self.next_t && t != 0 {
            return Err(Error::OutOfRange(format!("controller queried at t = {t}, expected t = {}", self.next_t)));
        }
        if t > self.model.horizon {
            return Err(Error::OutOfRange(format!("t = {t} is past the horizon {}", self.model.horizon)));
        }
        if h.y1.len() <= t || h.y2.len() <= t || h.u1.len() < t || h.u2.len() < t {
            return Err(Error::DimensionMismatch(format!("history too short for t = {t}")));
        }
        let (plan, prev, fresh): (&StepPlan, &[usize], Fresh) = if t == 0 {
            let fresh = Fresh { y1: h.y1[0], y2: h.y2[0], u1: 0, u2: 0 };
            (self.info.initial_plan()?, &[], fresh)
        } else {
            let fresh = Fresh { y1: h.y1[t], y2: h.y2[t], u1: h.u1[t - 1], u2: h.u2[t - 1] };
            (self.info.plan(t - 1)?, &self.l, fresh)
        };
        let arrival = Arrival {
            z1: StepPlan::realize(&plan.z1, prev, fresh),
            z2: StepPlan::realize(&plan.z2, prev, fresh),
        };
        self.l = StepPlan::realize(&plan.l2, prev, fresh);
        self.next_t = t + 1;
        Ok(arrival)
    }

    fn l_index(&self, t: usize) -> usize {
        self.info.private_space(&self.model, t).index(&self.l)
    }
}

type Pi1Cache = HashMap<(Arc<Belief1>, usize, Vec<usize>, Vec<usize>), Arc<Belief1>>;

/// `update_belief1`, memoized on `(pi1, u1, gamma2, z1)`.
fn next_pi1(
    cache: &mut Pi1Cache,
    model: &TeamModel,
    info: &InfoStructure,
    pi1: &Arc<Belief1>,
    u1: usize,
    gamma2: &PrivatePrescription,
    z1: &[usize],
) -> Result<Arc<Belief1>> {
    let key = (pi1.clone(), u1, gamma2.actions.clone(), z1.to_vec());
    if let Some(b) = cache.get(&key) {
        return Ok(b.clone());
    }
    let b = Arc::new(update_belief1(model, info, pi1, u1, gamma2, z1)?);
    cache.insert(key, b.clone());
    Ok(b)
}

fn initial_pi1(
    cache: &mut HashMap<Vec<usize>, Arc<Belief1>>,
    model: &TeamModel,
    info: &InfoStructure,
    z1: &[usize],
) -> Result<Arc<Belief1>> {
    if let Some(b) = cache.get(z1) {
        return Ok(b.clone());
    }
    let b = Arc::new(crate::belief::initial_belief1(model, info, z1)?);
    cache.insert(z1.to_vec(), b.clone());
    Ok(b)
}

/// Plays the team-optimal prescriptions: `u1 = gamma1(pi1)`, `u2 = gamma2(l)`
/// with both prescriptions read off the entry at the current shared belief.
#[derive(Debug, Clone)]
pub struct DpController {
    policy: Arc<ValuePolicy>,
    tracker: Tracker,
    roots1: HashMap<Vec<usize>, Arc<Belief1>>,
    cache: Pi1Cache,
    state: Option<(Arc<PolicyEntry>, Arc<Belief1>, usize)>,
}

pub fn extract_control_strategy(policy: &ValuePolicy, model: &TeamModel, info: &InfoStructure) -> DpController {
    DpController::new(Arc::new(policy.clone()), Arc::new(model.clone()), Arc::new(info.clone()))
}

impl DpController {
    pub fn new(policy: Arc<ValuePolicy>, model: Arc<TeamModel>, info: Arc<InfoStructure>) -> Self {
        DpController {
            policy,
            tracker: Tracker::new(model, info),
            roots1: HashMap::new(),
            cache: HashMap::new(),
            state: None,
        }
    }
}

impl Controller for DpController {
    fn act(&mut self, t: usize, history: &History) -> Result<(usize, usize)> {
        let arrival = self.tracker.advance(t, history)?;
        let model = self.tracker.model.clone();
        let info = self.tracker.info.clone();
        let (pi2, pi1): (Arc<Belief2>, Arc<Belief1>) = if t == 0 {
            let root = self.policy.root(&arrival.z2)?;
            (root.belief.clone(), initial_pi1(&mut self.roots1, &model, &info, &arrival.z1)?)
        } else {
            let (entry, pi1, u1) = self.state.take().expect("state set at the previous stage");
            let child = entry
                .children
                .iter()
                .find(|c| c.z == arrival.z2)
                .ok_or_else(|| Error::MissingKey(format!("Z2 = {:?} at t = {t} is unreachable under the policy", arrival.z2)))?;
            let pi1 = next_pi1(&mut self.cache, &model, &info, &pi1, u1, &entry.gamma2, &arrival.z1)?;
            (child.belief.clone(), pi1)
        };
        let entry = self.policy.entry(t, &pi2)?.clone();
        let u1 = entry.gamma1.get(&pi1)?;
        let u2 = entry.gamma2.action(self.tracker.l_index(t));
        self.state = Some((entry, pi1, u1));
        Ok((u1, u2))
    }
}

/// Agent 2 follows `psi2`; agent 1 its accessible data and belief.
#[derive(Debug, Clone)]
struct Agent1State {
    pi1: Arc<Belief1>,
    a2: Vec<usize>,
    u1: usize,
    gamma2: PrivatePrescription,
}

fn advance_agent1(
    tracker: &Tracker,
    roots: &mut HashMap<Vec<usize>, Arc<Belief1>>,
    cache: &mut Pi1Cache,
    state: Option<Agent1State>,
    t: usize,
    arrival: &Arrival,
) -> Result<(Arc<Belief1>, Vec<usize>)> {
    let (model, info) = (&*tracker.model, &*tracker.info);
    match state {
        None => {
            let plan = info.initial_plan()?;
            Ok((initial_pi1(roots, model, info, &arrival.z1)?, splice(&plan.a2_from_z1, &[], &arrival.z1)))
        }
        Some(s) => {
            let plan = info.plan(t - 1)?;
            let pi1 = next_pi1(cache, model, info, &s.pi1, s.u1, &s.gamma2, &arrival.z1)?;
            Ok((pi1, splice(&plan.a2_from_z1, &s.a2, &arrival.z1)))
        }
    }
}

/// Agent 2 plays `psi2`, agent 1 the best response stored in a [`PbpPolicy`].
#[derive(Debug, Clone)]
pub struct PbpController {
    policy: Arc<PbpPolicy>,
    psi2: Arc<Psi2>,
    tracker: Tracker,
    roots1: HashMap<Vec<usize>, Arc<Belief1>>,
    cache: Pi1Cache,
    state: Option<Agent1State>,
}

impl PbpController {
    pub fn new(policy: Arc<PbpPolicy>, psi2: Arc<Psi2>, model: Arc<TeamModel>, info: Arc<InfoStructure>) -> Self {
        PbpController {
            policy,
            psi2,
            tracker: Tracker::new(model, info),
            roots1: HashMap::new(),
            cache: HashMap::new(),
            state: None,
        }
    }
}

impl Controller for PbpController {
    fn act(&mut self, t: usize, history: &History) -> Result<(usize, usize)> {
        let arrival = self.tracker.advance(t, history)?;
        let previous = if t == 0 { None } else { self.state.take() };
        let (pi1, a2) = advance_agent1(&self.tracker, &mut self.roots1, &mut self.cache, previous, t, &arrival)?;
        let gamma2 = self.psi2.get(&self.tracker.model, &self.tracker.info, t, &a2)?;
        let u1 = self.policy.entry(t, &pi1, &a2)?.u1;
        let u2 = gamma2.action(self.tracker.l_index(t));
        self.state = Some(Agent1State { pi1, a2, u1, gamma2 });
        Ok((u1, u2))
    }
}

/// Agent 2 plays `psi2`; agent 1 tracks its exact belief and plays the
/// quantized argmin at the nearest lattice point.
#[derive(Debug, Clone)]
pub struct ApproxController {
    policy: Arc<ApproxPolicy>,
    psi2: Arc<Psi2>,
    tracker: Tracker,
    roots1: HashMap<Vec<usize>, Arc<Belief1>>,
    cache: Pi1Cache,
    state: Option<Agent1State>,
}

impl ApproxController {
    pub fn new(policy: Arc<ApproxPolicy>, psi2: Arc<Psi2>, model: Arc<TeamModel>, info: Arc<InfoStructure>) -> Self {
        ApproxController {
            policy,
            psi2,
            tracker: Tracker::new(model, info),
            roots1: HashMap::new(),
            cache: HashMap::new(),
            state: None,
        }
    }
}

impl Controller for ApproxController {
    fn act(&mut self, t: usize, history: &History) -> Result<(usize, usize)> {
        let arrival = self.tracker.advance(t, history)?;
        let previous = if t == 0 { None } else { self.state.take() };
        let (pi1, a2) = advance_agent1(&self.tracker, &mut self.roots1, &mut self.cache, previous, t, &arrival)?;
        let (model, info) = (&*self.tracker.model, &*self.tracker.info);
        let gamma2 = self.psi2.get(model, info, t, &a2)?;
        let u1 = self.policy.action(model, info, &pi1, &a2)?;
        let u2 = gamma2.action(self.tracker.l_index(t));
        self.state = Some(Agent1State { pi1, a2, u1, gamma2 });
        Ok((u1, u2))
    }
}
