use std::fmt;

use crate::error::{Error, Result};
use crate::TOLERANCE;

pub type StateId = usize;

/// One legal action at a state: a strictly positive cost and a transition law.
#[derive(Debug, Clone, PartialEq)]
pub struct Action {
    pub cost: f64,
    pub transitions: Vec<(StateId, f64)>,
    pub label: Option<String>,
}

impl Action {
    pub fn new(cost: f64, transitions: Vec<(StateId, f64)>) -> Self {
        Self {
            cost,
            transitions,
            label: None,
        }
    }

    pub fn labeled(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub value: f64,
    pub actions: Vec<Action>,
    pub label: Option<String>,
}

impl State {
    pub fn sink(value: f64) -> Self {
        Self {
            value,
            actions: Vec::new(),
            label: None,
        }
    }

    pub fn with_actions(actions: Vec<Action>) -> Self {
        Self {
            value: 0.0,
            actions,
            label: None,
        }
    }

    pub fn labeled(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    pub fn is_sink(&self) -> bool {
        self.actions.is_empty()
    }
}

/// A broken structural rule of a Markov search process.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NoStates,
    BadStart { start: StateId },
    UnknownTarget { state: StateId, action: usize, target: StateId },
    NonPositiveProbability { state: StateId, action: usize, target: StateId, p: f64 },
    ProbabilitySum { state: StateId, action: usize, total: f64 },
    NonPositiveCost { state: StateId, action: usize, cost: f64 },
    NegativeValue { state: StateId, value: f64 },
    ValueAtNonSink { state: StateId, value: f64 },
    NonFinite { state: StateId },
    Cycle { states: Vec<StateId> },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NoStates => write!(f, "process has no states"),
            Violation::BadStart { start } => write!(f, "start state {start} does not exist"),
            Violation::UnknownTarget { state, action, target } => {
                write!(f, "state {state} action {action}: unknown target {target}")
            }
            Violation::NonPositiveProbability { state, action, target, p } => write!(
                f,
                "state {state} action {action}: transition to {target} has probability {p}"
            ),
            Violation::ProbabilitySum { state, action, total } => write!(
                f,
                "state {state} action {action}: probabilities sum to {total}"
            ),
            Violation::NonPositiveCost { state, action, cost } => {
                write!(f, "state {state} action {action}: cost {cost} is not positive")
            }
            Violation::NegativeValue { state, value } => {
                write!(f, "state {state}: negative value {value}")
            }
            Violation::ValueAtNonSink { state, value } => {
                write!(f, "state {state}: value {value} at a non-sink")
            }
            Violation::NonFinite { state } => write!(f, "state {state}: non-finite number"),
            Violation::Cycle { states } => write!(f, "state graph has a cycle through {states:?}"),
        }
    }
}

/// Markov search process: a finite acyclic decision process with strictly
/// positive action costs and nonnegative rewards available only at sinks.
#[derive(Debug, Clone, PartialEq)]
pub struct Msp {
    states: Vec<State>,
    start: StateId,
    order: Vec<StateId>,
}

impl Msp {
    /// Builds and validates a process.
    pub fn new(states: Vec<State>, start: StateId) -> Result<Self> {
        let m = Self::new_unchecked(states, start);
        let violations = m.validate();
        if violations.is_empty() {
            Ok(m)
        } else {
            Err(Error::InvalidProcess(violations))
        }
    }

    /// Builds a process without checking its invariants; use [`Msp::validate`]
    /// to report what is wrong with it.
    pub fn new_unchecked(states: Vec<State>, start: StateId) -> Self {
        let order = topological_order(&states).unwrap_or_default();
        Self {
            states,
            start,
            order,
        }
    }

    /// Single sink with the given value.
    pub fn sink(value: f64) -> Self {
        Self::new_unchecked(vec![State::sink(value)], 0)
    }

    pub fn states(&self) -> &[State] {
        &self.states
    }

    pub fn state(&self, s: StateId) -> &State {
        &self.states[s]
    }

    pub fn start(&self) -> StateId {
        self.start
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn actions(&self, s: StateId) -> &[Action] {
        &self.states[s].actions
    }

    pub fn value(&self, s: StateId) -> f64 {
        self.states[s].value
    }

    pub fn is_sink(&self, s: StateId) -> bool {
        self.states[s].is_sink()
    }

    pub fn max_value(&self) -> f64 {
        self.states.iter().map(|s| s.value).fold(0.0, f64::max)
    }

    /// States in topological order (every transition goes forward).
    pub fn topological_order(&self) -> &[StateId] {
        &self.order
    }

    /// States with every successor listed before its predecessors.
    pub fn backward_order(&self) -> impl Iterator<Item = StateId> + '_ {
        self.order.iter().rev().copied()
    }

    /// States reachable from the start with positive probability.
    pub fn reachable(&self) -> Vec<bool> {
        let mut seen = vec![false; self.states.len()];
        let mut stack = vec![self.start];
        seen[self.start] = true;
        while let Some(s) = stack.pop() {
            for a in &self.states[s].actions {
                for &(t, p) in &a.transitions {
                    if p > 0.0 && !seen[t] {
                        seen[t] = true;
                        stack.push(t);
                    }
                }
            }
        }
        seen
    }

    /// A process is a bandit when every state has at most one action.
    pub fn is_bandit(&self) -> bool {
        self.states.iter().all(|s| s.actions.len() <= 1)
    }

    pub(crate) fn require_bandit(&self) -> Result<()> {
        match self.states.iter().position(|s| s.actions.len() > 1) {
            None => Ok(()),
            Some(state) => Err(Error::NotBandit {
                state,
                actions: self.states[state].actions.len(),
            }),
        }
    }

    /// Lists every broken invariant; empty iff the process is well formed.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let n = self.states.len();
        if n == 0 {
            out.push(Violation::NoStates);
            return out;
        }
        if self.start >= n {
            out.push(Violation::BadStart { start: self.start });
        }
        let mut structural_ok = true;
        for (s, state) in self.states.iter().enumerate() {
            if !state.value.is_finite() {
                out.push(Violation::NonFinite { state: s });
            } else if state.value < 0.0 {
                out.push(Violation::NegativeValue { state: s, value: state.value });
            } else if !state.is_sink() && state.value != 0.0 {
                out.push(Violation::ValueAtNonSink { state: s, value: state.value });
            }
            for (a, action) in state.actions.iter().enumerate() {
                if !(action.cost.is_finite() && action.cost > 0.0) {
                    out.push(Violation::NonPositiveCost { state: s, action: a, cost: action.cost });
                }
                let mut total = 0.0;
                for &(t, p) in &action.transitions {
                    if t >= n {
                        structural_ok = false;
                        out.push(Violation::UnknownTarget { state: s, action: a, target: t });
                    }
                    if !(p.is_finite() && p > 0.0) {
                        out.push(Violation::NonPositiveProbability { state: s, action: a, target: t, p });
                    }
                    total += p;
                }
                if !total.is_finite() || (total - 1.0).abs() > TOLERANCE {
                    out.push(Violation::ProbabilitySum { state: s, action: a, total });
                }
            }
        }
        if structural_ok {
            if let Err(states) = topological_order(&self.states) {
                out.push(Violation::Cycle { states });
            }
        }
        out
    }
}

/// Kahn's algorithm over the positive-probability edges; on failure returns
/// the states left on cycles.
fn topological_order(states: &[State]) -> std::result::Result<Vec<StateId>, Vec<StateId>> {
    let n = states.len();
    let mut indegree = vec![0usize; n];
    let mut succ: Vec<Vec<StateId>> = vec![Vec::new(); n];
    for (s, state) in states.iter().enumerate() {
        for a in &state.actions {
            for &(t, p) in &a.transitions {
                if t < n && p > 0.0 {
                    succ[s].push(t);
                    indegree[t] += 1;
                }
            }
        }
    }
    let mut queue: Vec<StateId> = (0..n).filter(|&s| indegree[s] == 0).collect();
    queue.reverse();
    let mut order = Vec::with_capacity(n);
    while let Some(s) = queue.pop() {
        order.push(s);
        for &t in &succ[s] {
            indegree[t] -= 1;
            if indegree[t] == 0 {
                queue.push(t);
            }
        }
    }
    if order.len() == n {
        Ok(order)
    } else {
        Err((0..n).filter(|&s| indegree[s] > 0).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn coin_box(cost: f64) -> Msp {
        Msp::new(
            vec![
                State::with_actions(vec![Action::new(cost, vec![(1, 0.5), (2, 0.5)])]),
                State::sink(0.0),
                State::sink(1.0),
            ],
            0,
        )
        .unwrap()
    }

    #[test]
    fn single_sink_is_valid() {
        assert!(Msp::sink(3.0).validate().is_empty());
    }

    #[test]
    fn probability_sum_violation() {
        let m = Msp::new_unchecked(
            vec![
                State::with_actions(vec![Action::new(1.0, vec![(1, 0.5), (2, 0.4)])]),
                State::sink(0.0),
                State::sink(1.0),
            ],
            0,
        );
        let v = m.validate();
        assert_eq!(v.len(), 1);
        assert!(matches!(v[0], Violation::ProbabilitySum { state: 0, action: 0, .. }));
    }

    #[test]
    fn two_cycle_is_reported() {
        let m = Msp::new_unchecked(
            vec![
                State::with_actions(vec![Action::new(1.0, vec![(1, 1.0)])]),
                State::with_actions(vec![Action::new(1.0, vec![(0, 1.0)])]),
            ],
            0,
        );
        let v = m.validate();
        assert_eq!(v, vec![Violation::Cycle { states: vec![0, 1] }]);
    }

    #[test]
    fn cost_and_value_rules() {
        let m = Msp::new_unchecked(
            vec![
                State {
                    value: 2.0,
                    actions: vec![Action::new(0.0, vec![(1, 1.0)])],
                    label: None,
                },
                State::sink(-1.0),
            ],
            0,
        );
        let v = m.validate();
        assert!(v.contains(&Violation::NonPositiveCost { state: 0, action: 0, cost: 0.0 }));
        assert!(v.contains(&Violation::ValueAtNonSink { state: 0, value: 2.0 }));
        assert!(v.contains(&Violation::NegativeValue { state: 1, value: -1.0 }));
    }

    #[test]
    fn bandit_detection() {
        assert!(coin_box(0.1).is_bandit());
        assert!(Msp::sink(1.0).is_bandit());
        let two = Msp::new(
            vec![
                State::with_actions(vec![
                    Action::new(0.1, vec![(1, 1.0)]),
                    Action::new(0.2, vec![(1, 1.0)]),
                ]),
                State::sink(1.0),
            ],
            0,
        )
        .unwrap();
        assert!(!two.is_bandit());
        assert!(matches!(two.require_bandit(), Err(Error::NotBandit { state: 0, actions: 2 })));
    }

    #[test]
    fn backward_order_visits_successors_first() {
        let m = coin_box(0.1);
        let order: Vec<_> = m.backward_order().collect();
        assert_eq!(*order.last().unwrap(), 0);
    }
}
