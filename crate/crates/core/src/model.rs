//! Finite two-agent team models.
//!
//! A [`TeamModel`] stores the state transition table `f_t(x, u1, u2, w)`, the
//! observation tables `h^k_t(x, v^k)`, the stage costs `c_t(x, u1, u2)` and the
//! marginal laws of the primitive variables `X_0`, `W_t`, `V^k_t`. Only
//! marginals can be declared, so the primitive variables are independent by
//! construction.
//!
//! Construction never rejects semantically bad data; [`validate_model`] reports
//! every problem as a [`Violation`] and the solvers refuse models that have any.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::Rational;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Agent {
    #[serde(rename = "1")]
    One,
    #[serde(rename = "2")]
    Two,
}

impl fmt::Display for Agent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Agent::One => "1",
            Agent::Two => "2",
        })
    }
}

/// A problem found by validation, with a path to the offending field.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

impl Violation {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Violation {
            path: path.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FiniteSpace {
    pub label: String,
    pub size: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
}

impl FiniteSpace {
    pub fn new(label: impl Into<String>, size: usize) -> Self {
        FiniteSpace {
            label: label.into(),
            size,
            labels: None,
        }
    }

    pub fn element_label(&self, index: usize) -> String {
        match &self.labels {
            Some(labels) => labels.get(index).cloned().unwrap_or_else(|| index.to_string()),
            None => index.to_string(),
        }
    }

    pub(crate) fn check(&self, path: &str, out: &mut Vec<Violation>) {
        if self.size == 0 {
            out.push(Violation::new(path, "space must have at least one element"));
        }
        if let Some(labels) = &self.labels {
            if labels.len() != self.size {
                out.push(Violation::new(
                    path,
                    format!("{} labels given for a space of size {}", labels.len(), self.size),
                ));
            }
            let mut sorted = labels.clone();
            sorted.sort();
            sorted.dedup();
            if sorted.len() != labels.len() {
                out.push(Violation::new(path, "element labels are not distinct"));
            }
        }
    }
}

/// A probability distribution on `0..weights.len()`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Dist {
    pub weights: Vec<Rational>,
}

impl Dist {
    pub fn new(weights: Vec<Rational>) -> Self {
        Dist { weights }
    }

    pub fn point_mass(size: usize, at: usize) -> Self {
        let mut weights = vec![Rational::zero(); size];
        weights[at] = Rational::one();
        Dist { weights }
    }

    pub fn uniform(size: usize) -> Self {
        Dist {
            weights: vec![Rational::new(1, size as i64); size],
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn prob(&self, index: usize) -> &Rational {
        &self.weights[index]
    }

    pub fn sum(&self) -> Rational {
        self.weights.iter().sum()
    }

    /// Indices with positive weight.
    pub fn support(&self) -> impl Iterator<Item = (usize, &Rational)> {
        self.weights.iter().enumerate().filter(|(_, w)| !w.is_zero())
    }

    pub(crate) fn check(&self, path: &str, expected_len: usize, out: &mut Vec<Violation>) {
        if self.weights.len() != expected_len {
            out.push(Violation::new(
                path,
                format!("{} weights for a space of size {}", self.weights.len(), expected_len),
            ));
        }
        for (i, w) in self.weights.iter().enumerate() {
            if w.is_negative() || *w > Rational::one() {
                out.push(Violation::new(format!("{path}[{i}]"), format!("weight {w} outside [0,1]")));
            }
        }
        let total = self.sum();
        if !total.is_one() {
            out.push(Violation::new(path, format!("weights sum to {total}, expected 1")));
        }
    }
}

/// Per-time spaces. `w` has one entry per transition (`t = 0..T-1`), the others
/// one entry per stage (`t = 0..=T`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Spaces {
    pub x: Vec<FiniteSpace>,
    pub u1: Vec<FiniteSpace>,
    pub u2: Vec<FiniteSpace>,
    pub w: Vec<FiniteSpace>,
    pub v1: Vec<FiniteSpace>,
    pub v2: Vec<FiniteSpace>,
    pub y1: Vec<FiniteSpace>,
    pub y2: Vec<FiniteSpace>,
}

impl Spaces {
    /// Time-invariant spaces replicated over a horizon.
    pub fn uniform(horizon: usize, sizes: SpaceSizes) -> Self {
        let rep = |label: &str, size: usize, count: usize| vec![FiniteSpace::new(label, size); count];
        Spaces {
            x: rep("x", sizes.x, horizon + 1),
            u1: rep("u1", sizes.u1, horizon + 1),
            u2: rep("u2", sizes.u2, horizon + 1),
            w: rep("w", sizes.w, horizon),
            v1: rep("v1", sizes.v1, horizon + 1),
            v2: rep("v2", sizes.v2, horizon + 1),
            y1: rep("y1", sizes.y1, horizon + 1),
            y2: rep("y2", sizes.y2, horizon + 1),
        }
    }
}

/// Sizes of time-invariant spaces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpaceSizes {
    pub x: usize,
    pub u1: usize,
    pub u2: usize,
    pub w: usize,
    pub v1: usize,
    pub v2: usize,
    pub y1: usize,
    pub y2: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dists {
    pub x0: Dist,
    pub w: Vec<Dist>,
    pub v1: Vec<Dist>,
    pub v2: Vec<Dist>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TeamModel {
    pub horizon: usize,
    pub spaces: Spaces,
    /// `[t][x][u1][u2][w] -> x'` for `t = 0..T-1`.
    pub transition: Vec<Vec<Vec<Vec<Vec<usize>>>>>,
    /// `[t][x][v] -> y` for `t = 0..=T`.
    pub obs1: Vec<Vec<Vec<usize>>>,
    pub obs2: Vec<Vec<Vec<usize>>>,
    /// `[t][x][u1][u2] -> cost`.
    pub cost: Vec<Vec<Vec<Vec<Rational>>>>,
    pub dists: Dists,
}

impl TeamModel {
    pub fn nx(&self, t: usize) -> usize {
        self.spaces.x[t].size
    }
    pub fn nu(&self, agent: Agent, t: usize) -> usize {
        match agent {
            Agent::One => self.spaces.u1[t].size,
            Agent::Two => self.spaces.u2[t].size,
        }
    }
    pub fn nu1(&self, t: usize) -> usize {
        self.spaces.u1[t].size
    }
    pub fn nu2(&self, t: usize) -> usize {
        self.spaces.u2[t].size
    }
    pub fn ny(&self, agent: Agent, t: usize) -> usize {
        match agent {
            Agent::One => self.spaces.y1[t].size,
            Agent::Two => self.spaces.y2[t].size,
        }
    }

    /// `f_t(x, u1, u2, w)`.
    #[inline]
    pub fn next_state(&self, t: usize, x: usize, u1: usize, u2: usize, w: usize) -> usize {
        self.transition[t][x][u1][u2][w]
    }

    /// `h^k_t(x, v)`.
    #[inline]
    pub fn observe(&self, agent: Agent, t: usize, x: usize, v: usize) -> usize {
        match agent {
            Agent::One => self.obs1[t][x][v],
            Agent::Two => self.obs2[t][x][v],
        }
    }

    #[inline]
    pub fn stage_cost(&self, t: usize, x: usize, u1: usize, u2: usize) -> &Rational {
        &self.cost[t][x][u1][u2]
    }

    pub fn noise(&self, agent: Agent, t: usize) -> &Dist {
        match agent {
            Agent::One => &self.dists.v1[t],
            Agent::Two => &self.dists.v2[t],
        }
    }

    /// Largest stage cost over all times and arguments.
    pub fn cost_sup(&self) -> Rational {
        self.cost
            .iter()
            .flatten()
            .flatten()
            .flatten()
            .fold(Rational::zero(), |acc, c| acc.max(c.clone()))
    }

    pub fn validate(&self) -> Vec<Violation> {
        validate_model(self)
    }

    /// Fails with [`Error::InvalidModel`] unless the model is well formed.
    pub fn ensure_valid(&self) -> Result<()> {
        let violations = validate_model(self);
        if violations.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidModel(violations))
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ModelDoc = serde_json::from_str(text)?;
        Ok(TeamModel::from_doc(doc))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_doc())?)
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        serde_json::to_value(self.to_doc()).expect("model serializes")
    }

    pub(crate) fn from_doc(doc: ModelDoc) -> Self {
        let horizon = doc.horizon;
        let stages = horizon + 1;
        let spaces = Spaces {
            x: doc.spaces.x.expand(stages),
            u1: doc.spaces.u1.expand(stages),
            u2: doc.spaces.u2.expand(stages),
            w: doc.spaces.w.expand(horizon),
            v1: doc.spaces.v1.expand(stages),
            v2: doc.spaces.v2.expand(stages),
            y1: doc.spaces.y1.expand(stages),
            y2: doc.spaces.y2.expand(stages),
        };
        let dists = Dists {
            x0: doc.dists.x0,
            w: doc.dists.w.expand(horizon),
            v1: doc.dists.v1.expand(stages),
            v2: doc.dists.v2.expand(stages),
        };
        TeamModel {
            horizon,
            spaces,
            transition: doc.transition,
            obs1: doc.obs1,
            obs2: doc.obs2,
            cost: doc.cost,
            dists,
        }
    }

    pub(crate) fn to_doc(&self) -> ModelDoc {
        ModelDoc {
            horizon: self.horizon,
            spaces: SpacesDoc {
                x: PerTime::collapse(&self.spaces.x),
                u1: PerTime::collapse(&self.spaces.u1),
                u2: PerTime::collapse(&self.spaces.u2),
                w: PerTime::collapse(&self.spaces.w),
                v1: PerTime::collapse(&self.spaces.v1),
                v2: PerTime::collapse(&self.spaces.v2),
                y1: PerTime::collapse(&self.spaces.y1),
                y2: PerTime::collapse(&self.spaces.y2),
            },
            transition: self.transition.clone(),
            obs1: self.obs1.clone(),
            obs2: self.obs2.clone(),
            cost: self.cost.clone(),
            dists: DistsDoc {
                x0: self.dists.x0.clone(),
                w: PerTime::collapse(&self.dists.w),
                v1: PerTime::collapse(&self.dists.v1),
                v2: PerTime::collapse(&self.dists.v2),
            },
        }
    }
}

/// `P(X_{t+1} = . | x, u1, u2)`, marginalizing the disturbance.
pub fn transition_kernel(model: &TeamModel, t: usize, x: usize, u1: usize, u2: usize) -> Result<Dist> {
    if t >= model.horizon {
        return Err(Error::OutOfRange(format!("transition time {t} with horizon {}", model.horizon)));
    }
    check_index("x", x, model.nx(t))?;
    check_index("u1", u1, model.nu1(t))?;
    check_index("u2", u2, model.nu2(t))?;
    let mut weights = vec![Rational::zero(); model.nx(t + 1)];
    for (w, p) in model.dists.w[t].support() {
        weights[model.next_state(t, x, u1, u2, w)] += p;
    }
    Ok(Dist::new(weights))
}

/// `P(Y^k_t = . | x)`, marginalizing the measurement noise.
pub fn observation_kernel(model: &TeamModel, t: usize, agent: Agent, x: usize) -> Result<Dist> {
    if t > model.horizon {
        return Err(Error::OutOfRange(format!("observation time {t} with horizon {}", model.horizon)));
    }
    check_index("x", x, model.nx(t))?;
    let mut weights = vec![Rational::zero(); model.ny(agent, t)];
    for (v, p) in model.noise(agent, t).support() {
        weights[model.observe(agent, t, x, v)] += p;
    }
    Ok(Dist::new(weights))
}

fn check_index(what: &str, value: usize, size: usize) -> Result<()> {
    if value < size {
        Ok(())
    } else {
        Err(Error::OutOfRange(format!("{what} = {value} but the space has {size} elements")))
    }
}

/// Every invariant violation of `model`; empty iff the model is well formed.
pub fn validate_model(model: &TeamModel) -> Vec<Violation> {
    let mut out = Vec::new();
    let t_max = model.horizon;
    let stages = t_max + 1;
    let s = &model.spaces;
    let per_time = [
        ("spaces.x", &s.x, stages),
        ("spaces.u1", &s.u1, stages),
        ("spaces.u2", &s.u2, stages),
        ("spaces.w", &s.w, t_max),
        ("spaces.v1", &s.v1, stages),
        ("spaces.v2", &s.v2, stages),
        ("spaces.y1", &s.y1, stages),
        ("spaces.y2", &s.y2, stages),
    ];
    for (path, list, expected) in per_time {
        if list.len() != expected {
            out.push(Violation::new(path, format!("{} entries, expected {expected}", list.len())));
        }
        for (t, space) in list.iter().enumerate() {
            space.check(&format!("{path}[{t}]"), &mut out);
        }
    }
    if !out.is_empty() {
        return out;
    }

    model.dists.x0.check("dists.x0", s.x[0].size, &mut out);
    check_dist_list("dists.w", &model.dists.w, &s.w, &mut out);
    check_dist_list("dists.v1", &model.dists.v1, &s.v1, &mut out);
    check_dist_list("dists.v2", &model.dists.v2, &s.v2, &mut out);

    if model.transition.len() != t_max {
        out.push(Violation::new(
            "transition",
            format!("{} time slices, expected {t_max}", model.transition.len()),
        ));
    }
    for (t, slice) in model.transition.iter().enumerate().take(t_max) {
        let path = format!("transition[{t}]");
        check_shape(&path, slice.len(), s.x[t].size, &mut out);
        for (x, by_u1) in slice.iter().enumerate() {
            let path = format!("{path}[{x}]");
            check_shape(&path, by_u1.len(), s.u1[t].size, &mut out);
            for (u1, by_u2) in by_u1.iter().enumerate() {
                let path = format!("{path}[{u1}]");
                check_shape(&path, by_u2.len(), s.u2[t].size, &mut out);
                for (u2, by_w) in by_u2.iter().enumerate() {
                    let path = format!("{path}[{u2}]");
                    check_shape(&path, by_w.len(), s.w[t].size, &mut out);
                    for (w, &next) in by_w.iter().enumerate() {
                        if next >= s.x[t + 1].size {
                            out.push(Violation::new(
                                format!("{path}[{w}]"),
                                format!("next state {next} outside a space of size {}", s.x[t + 1].size),
                            ));
                        }
                    }
                }
            }
        }
    }

    for (name, table, v_spaces, y_spaces) in [
        ("obs1", &model.obs1, &s.v1, &s.y1),
        ("obs2", &model.obs2, &s.v2, &s.y2),
    ] {
        if table.len() != stages {
            out.push(Violation::new(name, format!("{} time slices, expected {stages}", table.len())));
        }
        for (t, slice) in table.iter().enumerate().take(stages) {
            let path = format!("{name}[{t}]");
            check_shape(&path, slice.len(), s.x[t].size, &mut out);
            for (x, by_v) in slice.iter().enumerate() {
                let path = format!("{path}[{x}]");
                check_shape(&path, by_v.len(), v_spaces[t].size, &mut out);
                for (v, &y) in by_v.iter().enumerate() {
                    if y >= y_spaces[t].size {
                        out.push(Violation::new(
                            format!("{path}[{v}]"),
                            format!("observation {y} outside a space of size {}", y_spaces[t].size),
                        ));
                    }
                }
            }
        }
    }

    if model.cost.len() != stages {
        out.push(Violation::new("cost", format!("{} time slices, expected {stages}", model.cost.len())));
    }
    for (t, slice) in model.cost.iter().enumerate().take(stages) {
        let path = format!("cost[{t}]");
        check_shape(&path, slice.len(), s.x[t].size, &mut out);
        for (x, by_u1) in slice.iter().enumerate() {
            let path = format!("{path}[{x}]");
            check_shape(&path, by_u1.len(), s.u1[t].size, &mut out);
            for (u1, by_u2) in by_u1.iter().enumerate() {
                let path = format!("{path}[{u1}]");
                check_shape(&path, by_u2.len(), s.u2[t].size, &mut out);
                for (u2, c) in by_u2.iter().enumerate() {
                    if c.is_negative() {
                        out.push(Violation::new(
                            format!("{path}[{u2}]"),
                            format!("cost {c} is negative; costs must be non-negative"),
                        ));
                    }
                }
            }
        }
    }
    out
}

pub(crate) fn check_dist_list(path: &str, dists: &[Dist], spaces: &[FiniteSpace], out: &mut Vec<Violation>) {
    if dists.len() != spaces.len() {
        out.push(Violation::new(path, format!("{} entries, expected {}", dists.len(), spaces.len())));
    }
    for (t, (d, space)) in dists.iter().zip(spaces).enumerate() {
        d.check(&format!("{path}[{t}]"), space.size, out);
    }
}

pub(crate) fn check_shape(path: &str, got: usize, expected: usize, out: &mut Vec<Violation>) {
    if got != expected {
        out.push(Violation::new(path, format!("{got} entries, expected {expected}")));
    }
}

/// A value that is either shared by every time step or given per time step.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub(crate) enum PerTime<T> {
    PerTime(Vec<T>),
    Shared(T),
}

impl<T: Clone + PartialEq> PerTime<T> {
    pub(crate) fn expand(self, count: usize) -> Vec<T> {
        match self {
            PerTime::Shared(v) => vec![v; count],
            PerTime::PerTime(list) => list,
        }
    }

    pub(crate) fn collapse(list: &[T]) -> Self {
        match list.first() {
            Some(first) if list.iter().all(|v| v == first) => PerTime::Shared(first.clone()),
            _ => PerTime::PerTime(list.to_vec()),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub(crate) struct SpacesDoc {
    x: PerTime<FiniteSpace>,
    u1: PerTime<FiniteSpace>,
    u2: PerTime<FiniteSpace>,
    w: PerTime<FiniteSpace>,
    v1: PerTime<FiniteSpace>,
    v2: PerTime<FiniteSpace>,
    y1: PerTime<FiniteSpace>,
    y2: PerTime<FiniteSpace>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub(crate) struct DistsDoc {
    x0: Dist,
    w: PerTime<Dist>,
    v1: PerTime<Dist>,
    v2: PerTime<Dist>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub(crate) struct ModelDoc {
    horizon: usize,
    spaces: SpacesDoc,
    transition: Vec<Vec<Vec<Vec<Vec<usize>>>>>,
    obs1: Vec<Vec<Vec<usize>>>,
    obs2: Vec<Vec<Vec<usize>>>,
    cost: Vec<Vec<Vec<Vec<Rational>>>>,
    dists: DistsDoc,
}
