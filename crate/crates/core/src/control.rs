//! Executable team strategies.

use crate::error::Result;

/// Realized observations `y[0..=t]` and actions `u[0..t]` of both agents.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct History {
    pub y1: Vec<usize>,
    pub y2: Vec<usize>,
    pub u1: Vec<usize>,
    pub u2: Vec<usize>,
}

impl History {
    pub fn new() -> Self {
        History::default()
    }

    pub fn clear(&mut self) {
        self.y1.clear();
        self.y2.clear();
        self.u1.clear();
        self.u2.clear();
    }
}

/// A closed-loop team strategy, queried once per stage in increasing `t`.
///
/// Each agent's action may only depend on its own memory; implementations are
/// trusted to respect that. `act(0, ..)` starts a new episode.
pub trait Controller: Send {
    fn act(&mut self, t: usize, history: &History) -> Result<(usize, usize)>;
}

impl<C: Controller + ?Sized> Controller for Box<C> {
    fn act(&mut self, t: usize, history: &History) -> Result<(usize, usize)> {
        (**self).act(t, history)
    }
}
