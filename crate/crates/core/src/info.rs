//! Who knows what, and when.
//!
//! An [`InfoStructure`] lists, for every stage `t`, the variables composing
//! agent 1's memory `M1`, agent 2's memory `M2`, the accessible part `A2` of
//! agent 2's memory, its private remainder `L2 = M2 \ A2`, and the increments
//! `Z1 = M1[t] \ M1[t-1]`, `Z2 = A2[t] \ A2[t-1]`.
//!
//! Variable lists are kept sorted by [`VarRef`]'s order (kind, then time), and
//! every realization tuple follows that order.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::model::{TeamModel, Violation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum VarKind {
    Y1,
    Y2,
    U1,
    U2,
}

impl VarKind {
    fn name(self) -> &'static str {
        match self {
            VarKind::Y1 => "Y1",
            VarKind::Y2 => "Y2",
            VarKind::U1 => "U1",
            VarKind::U2 => "U2",
        }
    }

    pub fn is_agent1(self) -> bool {
        matches!(self, VarKind::Y1 | VarKind::U1)
    }

    pub fn is_action(self) -> bool {
        matches!(self, VarKind::U1 | VarKind::U2)
    }
}

/// A tagged reference such as `Y2@3`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarRef {
    pub kind: VarKind,
    pub time: usize,
}

impl VarRef {
    pub const fn new(kind: VarKind, time: usize) -> Self {
        VarRef { kind, time }
    }

    /// Size of the space this variable ranges over.
    pub fn size(&self, model: &TeamModel) -> usize {
        let s = &model.spaces;
        match self.kind {
            VarKind::Y1 => s.y1[self.time].size,
            VarKind::Y2 => s.y2[self.time].size,
            VarKind::U1 => s.u1[self.time].size,
            VarKind::U2 => s.u2[self.time].size,
        }
    }
}

impl fmt::Display for VarRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}", self.kind.name(), self.time)
    }
}

impl FromStr for VarRef {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Parse(format!("invalid variable reference {s:?}, expected e.g. \"Y2@3\""));
        let (kind, time) = s.trim().split_once('@').ok_or_else(bad)?;
        let kind = match kind {
            "Y1" => VarKind::Y1,
            "Y2" => VarKind::Y2,
            "U1" => VarKind::U1,
            "U2" => VarKind::U2,
            _ => return Err(bad()),
        };
        Ok(VarRef::new(kind, time.parse().map_err(|_| bad())?))
    }
}

impl Serialize for VarRef {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for VarRef {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Symbolic composition of the information sets at one stage.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct InfoStep {
    pub m1: Vec<VarRef>,
    pub m2: Vec<VarRef>,
    pub a2: Vec<VarRef>,
    pub l2: Vec<VarRef>,
    pub z1: Vec<VarRef>,
    pub z2: Vec<VarRef>,
}

/// Where a variable of the next stage comes from, relative to stage `t`:
/// a coordinate of the current private tuple, or one of the fresh variables
/// `Y1[t+1]`, `Y2[t+1]`, `U1[t]`, `U2[t]`. In the initial plan only `Y1`
/// and `Y2` (at time 0) occur.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    Prev(usize),
    Y1,
    Y2,
    U1,
    U2,
}

/// Fresh values entering at one transition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Fresh {
    pub y1: usize,
    pub y2: usize,
    pub u1: usize,
    pub u2: usize,
}

impl Source {
    #[inline]
    pub fn resolve(self, prev: &[usize], fresh: Fresh) -> usize {
        match self {
            Source::Prev(i) => prev[i],
            Source::Y1 => fresh.y1,
            Source::Y2 => fresh.y2,
            Source::U1 => fresh.u1,
            Source::U2 => fresh.u2,
        }
    }
}

/// Ingredient of the next accessible tuple: an old coordinate or a coordinate
/// of the newly received block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Splice {
    Old(usize),
    New(usize),
}

pub fn splice(plan: &[Splice], old: &[usize], new: &[usize]) -> Vec<usize> {
    plan.iter()
        .map(|s| match *s {
            Splice::Old(i) => old[i],
            Splice::New(i) => new[i],
        })
        .collect()
}

/// How the tuples of stage `t+1` are assembled from stage `t`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepPlan {
    pub l2: Vec<Source>,
    pub z1: Vec<Source>,
    pub z2: Vec<Source>,
    /// `A2[t+1]` from `A2[t]` and `Z1[t+1]`.
    pub a2_from_z1: Vec<Splice>,
    /// `A2[t+1]` from `A2[t]` and `Z2[t+1]`.
    pub a2_from_z2: Vec<Splice>,
    /// `M1[t+1]` from `M1[t]` and `Z1[t+1]`.
    pub m1_from_z1: Vec<Splice>,
}

impl StepPlan {
    pub fn realize(sources: &[Source], prev: &[usize], fresh: Fresh) -> Vec<usize> {
        sources.iter().map(|s| s.resolve(prev, fresh)).collect()
    }
}

/// Mixed-radix enumeration of the private tuples of one stage.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrivateSpace {
    pub radices: Vec<usize>,
    pub tuples: Vec<Vec<usize>>,
}

impl PrivateSpace {
    pub fn new(radices: Vec<usize>) -> Self {
        let tuples = product(&radices);
        PrivateSpace { radices, tuples }
    }

    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }

    /// Index of `tuple` in the enumeration (first coordinate most significant).
    #[inline]
    pub fn index(&self, tuple: &[usize]) -> usize {
        tuple
            .iter()
            .zip(&self.radices)
            .fold(0, |acc, (&v, &r)| acc * r + v)
    }
}

/// All tuples of the Cartesian product, lexicographic order.
pub fn product(radices: &[usize]) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::with_capacity(radices.len())];
    for &r in radices {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                (0..r).map(move |v| {
                    let mut next = prefix.clone();
                    next.push(v);
                    next
                })
            })
            .collect();
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InfoStructure {
    pub horizon: usize,
    /// Set when built by [`build_delayed_structure`].
    pub delay: Option<usize>,
    pub steps: Vec<InfoStep>,
    init: Option<StepPlan>,
    plans: Vec<Option<StepPlan>>,
}

impl InfoStructure {
    /// Builds a structure from memories and accessible sets, deriving `L2`,
    /// `Z1`, `Z2`.
    pub fn from_sets(horizon: usize, delay: Option<usize>, sets: Vec<(Vec<VarRef>, Vec<VarRef>, Vec<VarRef>)>) -> Self {
        let mut steps: Vec<InfoStep> = Vec::with_capacity(sets.len());
        for (m1, m2, a2) in sets {
            let m1 = sorted(m1);
            let m2 = sorted(m2);
            let a2 = sorted(a2);
            let l2 = minus(&m2, &a2);
            let (z1, z2) = match steps.last() {
                Some(prev) => (minus(&m1, &prev.m1), minus(&a2, &prev.a2)),
                None => (m1.clone(), a2.clone()),
            };
            steps.push(InfoStep { m1, m2, a2, l2, z1, z2 });
        }
        Self::from_steps(horizon, delay, steps)
    }

    /// Takes every list as given; [`check_nestedness`] verifies consistency.
    pub fn from_steps(horizon: usize, delay: Option<usize>, steps: Vec<InfoStep>) -> Self {
        let steps: Vec<InfoStep> = steps
            .into_iter()
            .map(|s| InfoStep {
                m1: sorted(s.m1),
                m2: sorted(s.m2),
                a2: sorted(s.a2),
                l2: sorted(s.l2),
                z1: sorted(s.z1),
                z2: sorted(s.z2),
            })
            .collect();
        let init = steps.first().and_then(initial_plan);
        let plans = (0..steps.len().saturating_sub(1))
            .map(|t| step_plan(t, &steps[t], &steps[t + 1]))
            .collect();
        InfoStructure {
            horizon,
            delay,
            steps,
            init,
            plans,
        }
    }

    pub fn step(&self, t: usize) -> &InfoStep {
        &self.steps[t]
    }

    /// Plan for the transition `t -> t+1`.
    pub fn plan(&self, t: usize) -> Result<&StepPlan> {
        self.plans.get(t).and_then(|p| p.as_ref()).ok_or_else(|| {
            Error::InvalidInfo(vec![Violation::new(
                format!("steps[{}]", t + 1),
                "new information is not assembled from the previous private tuple and fresh variables",
            )])
        })
    }

    /// Plan producing the stage-0 tuples from `Y1[0]`, `Y2[0]`.
    pub fn initial_plan(&self) -> Result<&StepPlan> {
        self.init.as_ref().ok_or_else(|| {
            Error::InvalidInfo(vec![Violation::new("steps[0]", "stage 0 may only contain Y1@0 and Y2@0")])
        })
    }

    pub fn private_space(&self, model: &TeamModel, t: usize) -> PrivateSpace {
        PrivateSpace::new(self.steps[t].l2.iter().map(|v| v.size(model)).collect())
    }

    pub fn radices(&self, model: &TeamModel, vars: &[VarRef]) -> Vec<usize> {
        vars.iter().map(|v| v.size(model)).collect()
    }

    /// Errors unless the structure matches the model horizon and passes
    /// [`check_nestedness`].
    pub fn ensure_valid(&self, model: &TeamModel) -> Result<()> {
        let mut v = check_nestedness(self);
        if self.horizon != model.horizon || self.steps.len() != model.horizon + 1 {
            v.push(Violation::new(
                "info",
                format!("structure has {} stages but the model horizon is {}", self.steps.len(), model.horizon),
            ));
        }
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidInfo(v))
        }
    }

    pub fn to_spec(&self) -> InfoSpec {
        match self.delay {
            Some(d) => InfoSpec::Delayed { d },
            None => InfoSpec::Explicit {
                steps: self
                    .steps
                    .iter()
                    .map(|s| ExplicitStep {
                        m1: s.m1.clone(),
                        m2: s.m2.clone(),
                        a2: s.a2.clone(),
                        l2: Some(s.l2.clone()),
                        z1: Some(s.z1.clone()),
                        z2: Some(s.z2.clone()),
                    })
                    .collect(),
            },
        }
    }
}

fn sorted(mut v: Vec<VarRef>) -> Vec<VarRef> {
    v.sort();
    v.dedup();
    v
}

fn minus(a: &[VarRef], b: &[VarRef]) -> Vec<VarRef> {
    a.iter().filter(|v| !b.contains(v)).copied().collect()
}

fn is_subset(a: &[VarRef], b: &[VarRef]) -> bool {
    a.iter().all(|v| b.contains(v))
}

fn source_for(v: VarRef, t: usize, prev_l2: &[VarRef]) -> Option<Source> {
    if let Some(i) = prev_l2.iter().position(|p| *p == v) {
        return Some(Source::Prev(i));
    }
    match (v.kind, v.time) {
        (VarKind::Y1, s) if s == t + 1 => Some(Source::Y1),
        (VarKind::Y2, s) if s == t + 1 => Some(Source::Y2),
        (VarKind::U1, s) if s == t => Some(Source::U1),
        (VarKind::U2, s) if s == t => Some(Source::U2),
        _ => None,
    }
}

fn splice_plan(target: &[VarRef], old: &[VarRef], new: &[VarRef]) -> Option<Vec<Splice>> {
    target
        .iter()
        .map(|v| {
            old.iter()
                .position(|o| o == v)
                .map(Splice::Old)
                .or_else(|| new.iter().position(|n| n == v).map(Splice::New))
        })
        .collect()
}

fn step_plan(t: usize, cur: &InfoStep, next: &InfoStep) -> Option<StepPlan> {
    let sources = |vars: &[VarRef]| -> Option<Vec<Source>> { vars.iter().map(|&v| source_for(v, t, &cur.l2)).collect() };
    Some(StepPlan {
        l2: sources(&next.l2)?,
        z1: sources(&next.z1)?,
        z2: sources(&next.z2)?,
        a2_from_z1: splice_plan(&next.a2, &cur.a2, &next.z1)?,
        a2_from_z2: splice_plan(&next.a2, &cur.a2, &next.z2)?,
        m1_from_z1: splice_plan(&next.m1, &cur.m1, &next.z1)?,
    })
}

fn initial_plan(first: &InfoStep) -> Option<StepPlan> {
    let source = |v: &VarRef| match (v.kind, v.time) {
        (VarKind::Y1, 0) => Some(Source::Y1),
        (VarKind::Y2, 0) => Some(Source::Y2),
        _ => None,
    };
    let sources = |vars: &[VarRef]| -> Option<Vec<Source>> { vars.iter().map(source).collect() };
    Some(StepPlan {
        l2: sources(&first.l2)?,
        z1: sources(&first.z1)?,
        z2: sources(&first.z2)?,
        a2_from_z1: splice_plan(&first.a2, &[], &first.z1)?,
        a2_from_z2: splice_plan(&first.a2, &[], &first.z2)?,
        m1_from_z1: splice_plan(&first.m1, &[], &first.z1)?,
    })
}

/// The `d`-step delayed sharing pattern: agent 2's observations and actions
/// reach agent 1 after `d` steps. `d = 0` shares `Y2[t]` and `U2[t-1]`
/// immediately.
pub fn build_delayed_structure(model: &TeamModel, d: usize) -> Result<InfoStructure> {
    let horizon = model.horizon;
    if d > horizon + 1 {
        return Err(Error::OutOfRange(format!("delay {d} exceeds horizon + 1 = {}", horizon + 1)));
    }
    let range = |kind: VarKind, upto: Option<usize>| -> Vec<VarRef> {
        match upto {
            Some(u) => (0..=u).map(|s| VarRef::new(kind, s)).collect(),
            None => Vec::new(),
        }
    };
    let sets = (0..=horizon)
        .map(|t| {
            let own_actions = t.checked_sub(1);
            let shared_obs = t.checked_sub(d);
            let shared_actions = t.checked_sub(d.max(1));
            let a2: Vec<VarRef> = range(VarKind::Y2, shared_obs)
                .into_iter()
                .chain(range(VarKind::U2, shared_actions))
                .collect();
            let m1: Vec<VarRef> = range(VarKind::Y1, Some(t))
                .into_iter()
                .chain(range(VarKind::U1, own_actions))
                .chain(a2.iter().copied())
                .collect();
            let m2: Vec<VarRef> = range(VarKind::Y2, Some(t))
                .into_iter()
                .chain(range(VarKind::U2, own_actions))
                .collect();
            (m1, m2, a2)
        })
        .collect();
    let info = InfoStructure::from_sets(horizon, Some(d), sets);
    debug_assert!(check_nestedness(&info).is_empty());
    Ok(info)
}

/// Every violated invariant of the structure, by stage.
pub fn check_nestedness(info: &InfoStructure) -> Vec<Violation> {
    let mut out = Vec::new();
    let empty = InfoStep::default();
    for (t, step) in info.steps.iter().enumerate() {
        let at = |field: &str| format!("steps[{t}].{field}");
        let prev = if t == 0 { &empty } else { &info.steps[t - 1] };

        for (field, list) in [("m1", &step.m1), ("m2", &step.m2), ("a2", &step.a2)] {
            for v in list.iter() {
                let known = if v.kind.is_action() { v.time < t } else { v.time <= t };
                if !known {
                    out.push(Violation::new(at(field), format!("timing: {v} is not yet realized at stage {t}")));
                }
            }
        }
        for v in step.m2.iter().chain(&step.a2) {
            if v.kind.is_agent1() {
                out.push(Violation::new(at("m2"), format!("scope: agent 2 information may not contain {v}")));
            }
        }
        for s in 0..=t {
            for (field, list, own) in [
                ("m1", &step.m1, [VarKind::Y1, VarKind::U1]),
                ("m2", &step.m2, [VarKind::Y2, VarKind::U2]),
            ] {
                let mut needed = vec![VarRef::new(own[0], s)];
                if s < t {
                    needed.push(VarRef::new(own[1], s));
                }
                for v in needed {
                    if !list.contains(&v) {
                        out.push(Violation::new(at(field), format!("own history: {v} missing from the memory")));
                    }
                }
            }
        }

        if !is_subset(&prev.m1, &step.m1) || !is_subset(&prev.m2, &step.m2) {
            out.push(Violation::new(at("m1"), "memory recall: an earlier memory is not contained in the current one"));
        }
        if !is_subset(&step.a2, &step.m2) || !is_subset(&step.a2, &step.m1) {
            out.push(Violation::new(at("a2"), "accessibility: A2 must be contained in both memories"));
        }
        if !is_subset(&prev.a2, &step.a2) {
            out.push(Violation::new(
                at("a2"),
                "accessible-information recall: A2 at the previous stage is not contained in A2",
            ));
        }
        if step.l2 != minus(&step.m2, &step.a2) {
            out.push(Violation::new(at("l2"), "privacy: L2 must equal M2 \\ A2"));
        }
        if step.l2.iter().any(|v| step.m1.contains(v)) {
            out.push(Violation::new(at("l2"), "privacy: L2 intersects agent 1's memory"));
        }
        if step.z2 != minus(&step.a2, &prev.a2) {
            out.push(Violation::new(at("z2"), "novelty: Z2 must equal A2 minus its previous value"));
        }
        if step.z1 != minus(&step.m1, &prev.m1) {
            out.push(Violation::new(at("z1"), "novelty: Z1 must equal M1 minus its previous value"));
        }
        if !is_subset(&step.z2, &step.z1) {
            out.push(Violation::new(at("z2"), "novelty: Z2 is not contained in Z1"));
        }
        if step.z2.iter().any(|v| prev.m1.contains(v)) {
            out.push(Violation::new(at("z2"), "novelty: Z2 repeats data agent 1 already held"));
        }
        let contained = step.z2.iter().all(|v| {
            prev.l2.contains(v)
                || *v == VarRef::new(VarKind::Y1, t)
                || *v == VarRef::new(VarKind::Y2, t)
                || (t > 0 && (*v == VarRef::new(VarKind::U1, t - 1) || *v == VarRef::new(VarKind::U2, t - 1)))
        });
        if !contained {
            out.push(Violation::new(
                at("z2"),
                "novelty containment: Z2 must come from the previous private information or the fresh variables",
            ));
        }
        if t > 0 && info.plans.get(t - 1).is_some_and(|p| p.is_none()) {
            out.push(Violation::new(
                at("l2"),
                "realizability: L2 and Z1 must come from the previous private information or the fresh variables",
            ));
        }
    }
    if !info.steps.is_empty() && info.init.is_none() {
        out.push(Violation::new("steps[0]", "realizability: stage 0 may only contain Y1@0 and Y2@0"));
    }
    if info.steps.len() != info.horizon + 1 {
        out.push(Violation::new("steps", format!("{} stages for horizon {}", info.steps.len(), info.horizon)));
    }
    out
}

/// Every private tuple at stage `t`; a single empty tuple when `L2` is empty.
pub fn enumerate_private(info: &InfoStructure, model: &TeamModel, t: usize) -> Vec<Vec<usize>> {
    info.private_space(model, t).tuples
}

/// One explicitly listed stage of a file-declared structure.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExplicitStep {
    pub m1: Vec<VarRef>,
    pub m2: Vec<VarRef>,
    pub a2: Vec<VarRef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l2: Option<Vec<VarRef>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z1: Option<Vec<VarRef>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z2: Option<Vec<VarRef>>,
}

/// The `info` field of a model file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum InfoSpec {
    Delayed { d: usize },
    Explicit { steps: Vec<ExplicitStep> },
}

impl InfoSpec {
    pub fn build(&self, model: &TeamModel) -> Result<InfoStructure> {
        match self {
            InfoSpec::Delayed { d } => build_delayed_structure(model, *d),
            InfoSpec::Explicit { steps } => {
                let derived = InfoStructure::from_sets(
                    model.horizon,
                    None,
                    steps.iter().map(|s| (s.m1.clone(), s.m2.clone(), s.a2.clone())).collect(),
                );
                let merged = steps
                    .iter()
                    .zip(derived.steps)
                    .map(|(s, d)| InfoStep {
                        l2: s.l2.clone().unwrap_or(d.l2),
                        z1: s.z1.clone().unwrap_or(d.z1),
                        z2: s.z2.clone().unwrap_or(d.z2),
                        m1: d.m1,
                        m2: d.m2,
                        a2: d.a2,
                    })
                    .collect();
                let info = InfoStructure::from_steps(model.horizon, None, merged);
                info.ensure_valid(model)?;
                Ok(info)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::{random_team_model, Dims};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn v(s: &str) -> VarRef {
        s.parse().unwrap()
    }

    fn vs(list: &[&str]) -> Vec<VarRef> {
        list.iter().map(|s| v(s)).collect()
    }

    fn model(horizon: usize) -> TeamModel {
        let dims = Dims { x: 2, u1: 2, u2: 2, w: 2, v1: 2, v2: 2, y1: 2, y2: 2 };
        random_team_model(&mut ChaCha8Rng::seed_from_u64(1), dims, horizon)
    }

    #[test]
    fn var_refs_parse_and_order() {
        assert_eq!(v("Y2@3"), VarRef::new(VarKind::Y2, 3));
        assert_eq!(v("U1@0").to_string(), "U1@0");
        assert!("Y3@1".parse::<VarRef>().is_err());
        assert!("Y1".parse::<VarRef>().is_err());
        assert!(v("Y2@5") < v("U1@0"));
    }

    #[test]
    fn delay_one_at_stage_three() {
        let info = build_delayed_structure(&model(4), 1).unwrap();
        let s = info.step(3);
        assert_eq!(s.l2, vs(&["Y2@3"]));
        assert_eq!(s.z2, vs(&["Y2@2", "U2@2"]));
    }

    #[test]
    fn delay_zero_has_no_private_information() {
        let m = model(3);
        let info = build_delayed_structure(&m, 0).unwrap();
        for t in 0..=3 {
            assert!(info.step(t).l2.is_empty());
            assert_eq!(enumerate_private(&info, &m, t), vec![Vec::<usize>::new()]);
        }
    }

    #[test]
    fn delay_two_at_stage_one() {
        let info = build_delayed_structure(&model(3), 2).unwrap();
        let s = info.step(1);
        assert!(s.a2.is_empty());
        assert_eq!(s.l2, vs(&["Y2@0", "Y2@1", "U2@0"]));
    }

    #[test]
    fn delay_out_of_range() {
        assert!(build_delayed_structure(&model(2), 3).is_ok());
        assert!(matches!(build_delayed_structure(&model(2), 4), Err(Error::OutOfRange(_))));
    }

    #[test]
    fn delayed_structures_are_nested() {
        for horizon in 0..5 {
            let m = model(horizon);
            for d in 0..=horizon + 1 {
                let info = build_delayed_structure(&m, d).unwrap();
                assert_eq!(check_nestedness(&info), vec![], "T={horizon} d={d}");
                for t in 0..=horizon {
                    let s = info.step(t);
                    let mut union: Vec<VarRef> = s.l2.iter().chain(&s.a2).copied().collect();
                    union.sort();
                    assert_eq!(union, s.m2);
                    assert!(s.l2.iter().all(|x| !s.a2.contains(x)));
                    let count: usize = s.l2.iter().map(|x| x.size(&m)).product();
                    assert_eq!(enumerate_private(&info, &m, t).len(), count);
                    if t < horizon {
                        info.plan(t).unwrap();
                    }
                }
                info.initial_plan().unwrap();
            }
        }
    }

    #[test]
    fn private_enumeration_counts() {
        let m = model(3);
        let d1 = build_delayed_structure(&m, 1).unwrap();
        assert_eq!(enumerate_private(&d1, &m, 2).len(), 2);
        let d2 = build_delayed_structure(&m, 2).unwrap();
        let tuples = enumerate_private(&d2, &m, 2);
        assert_eq!(tuples.len(), 8);
        let mut dedup = tuples.clone();
        dedup.dedup();
        assert_eq!(dedup.len(), 8);
        let space = d2.private_space(&m, 2);
        for (i, tuple) in tuples.iter().enumerate() {
            assert_eq!(space.index(tuple), i);
        }
    }

    #[test]
    fn privacy_violation_is_named() {
        let m = model(1);
        let mut info = build_delayed_structure(&m, 1).unwrap();
        let mut steps = info.steps.clone();
        steps[1].m1.push(v("Y2@1"));
        info = InfoStructure::from_steps(1, None, steps);
        let v = check_nestedness(&info);
        assert!(v.iter().any(|x| x.message.starts_with("privacy")), "{v:?}");
    }

    #[test]
    fn accessible_recall_violation_is_named() {
        let m = model(2);
        let info = build_delayed_structure(&m, 0).unwrap();
        let mut steps = info.steps.clone();
        steps[2].a2.retain(|x| *x != v("Y2@0"));
        let info = InfoStructure::from_steps(2, None, steps);
        let v = check_nestedness(&info);
        assert!(v.iter().any(|x| x.message.starts_with("accessible-information recall")), "{v:?}");
    }

    #[test]
    fn explicit_spec_matches_builtin() {
        let m = model(2);
        let built = build_delayed_structure(&m, 1).unwrap();
        let spec = InfoSpec::Explicit {
            steps: built
                .steps
                .iter()
                .map(|s| ExplicitStep { m1: s.m1.clone(), m2: s.m2.clone(), a2: s.a2.clone(), l2: None, z1: None, z2: None })
                .collect(),
        };
        let text = serde_json::to_string(&spec).unwrap();
        let back: InfoSpec = serde_json::from_str(&text).unwrap();
        let explicit = back.build(&m).unwrap();
        assert_eq!(explicit.steps, built.steps);

        let bad = InfoSpec::Explicit {
            steps: built
                .steps
                .iter()
                .map(|s| ExplicitStep { m1: s.m1.clone(), m2: s.m2.clone(), a2: s.m2.clone(), l2: None, z1: None, z2: None })
                .collect(),
        };
        assert!(matches!(bad.build(&m), Err(Error::InvalidInfo(_))));
        let delayed: InfoSpec = serde_json::from_str(r#"{"kind":"delayed","d":2}"#).unwrap();
        assert_eq!(delayed, InfoSpec::Delayed { d: 2 });
    }
}
