use rand::{Rng, SeedableRng};

use super::msp::{Msp, StateId};
use crate::error::{Error, Result};
use crate::SimRng;

/// What a stationary policy does on reaching a state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Decision {
    /// Take the action with this index in the state's action list.
    Act(usize),
    HaltClaim,
    HaltNoClaim,
}

/// Deterministic policy whose choice depends only on the current state.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct StationaryPolicy {
    decisions: Vec<Decision>,
}

impl StationaryPolicy {
    pub fn new(decisions: Vec<Decision>) -> Self {
        Self { decisions }
    }

    /// Take the first action everywhere and claim every sink.
    pub fn advance_all(m: &Msp) -> Self {
        Self::new(
            (0..m.len())
                .map(|s| if m.is_sink(s) { Decision::HaltClaim } else { Decision::Act(0) })
                .collect(),
        )
    }

    pub fn decision(&self, s: StateId) -> Decision {
        self.decisions[s]
    }

    pub fn decisions(&self) -> &[Decision] {
        &self.decisions
    }

    /// Checks that every decision names a legal action of `m`.
    pub fn check(&self, m: &Msp) -> Result<()> {
        if self.decisions.len() != m.len() {
            return Err(Error::PolicyMismatch(format!(
                "policy covers {} states, process has {}",
                self.decisions.len(),
                m.len()
            )));
        }
        for (s, d) in self.decisions.iter().enumerate() {
            if let Decision::Act(a) = *d {
                if a >= m.actions(s).len() {
                    return Err(Error::PolicyMismatch(format!(
                        "state {s} has no action {a}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Every stationary policy of `m`. With `claim_only_at_sinks`, non-sinks
    /// choose between their actions and halting without a claim.
    pub fn enumerate(m: &Msp, claim_only_at_sinks: bool) -> Vec<StationaryPolicy> {
        let options: Vec<Vec<Decision>> = (0..m.len())
            .map(|s| {
                let mut o: Vec<Decision> = (0..m.actions(s).len()).map(Decision::Act).collect();
                if !claim_only_at_sinks || m.is_sink(s) {
                    o.push(Decision::HaltClaim);
                }
                o.push(Decision::HaltNoClaim);
                o
            })
            .collect();
        let mut out = Vec::new();
        let mut current = Vec::with_capacity(m.len());
        fn rec(
            options: &[Vec<Decision>],
            current: &mut Vec<Decision>,
            out: &mut Vec<StationaryPolicy>,
        ) {
            if current.len() == options.len() {
                out.push(StationaryPolicy::new(current.clone()));
                return;
            }
            for &d in &options[current.len()] {
                current.push(d);
                rec(options, current, out);
                current.pop();
            }
        }
        rec(&options, &mut current, &mut out);
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Terminal {
    NonHalted,
    HaltedClaim,
    HaltedNoClaim,
}

/// Sequence of (action index, resulting state) pairs plus how it ended.
#[derive(Debug, Clone, PartialEq)]
pub struct Transcript {
    pub steps: Vec<(usize, StateId)>,
    pub terminal: Terminal,
}

impl Transcript {
    pub fn claimed(&self) -> bool {
        self.terminal == Terminal::HaltedClaim
    }

    /// Checks that each step is legal and has positive probability.
    pub fn is_valid(&self, m: &Msp) -> bool {
        let mut s = m.start();
        for &(a, t) in &self.steps {
            let Some(action) = m.actions(s).get(a) else {
                return false;
            };
            if !action.transitions.iter().any(|&(u, p)| u == t && p > 0.0) {
                return false;
            }
            s = t;
        }
        true
    }
}

/// Runs `pi` on `m` using a generator seeded from `seed`.
pub fn simulate_policy(m: &Msp, pi: &StationaryPolicy, seed: u64) -> Result<(Transcript, f64)> {
    pi.check(m)?;
    let mut rng = SimRng::seed_from_u64(seed);
    Ok(simulate_with(m, pi, &mut rng))
}

/// Runs `pi` on `m` drawing transitions from `rng`; `pi` must be legal.
pub fn simulate_with<R: Rng + ?Sized>(
    m: &Msp,
    pi: &StationaryPolicy,
    rng: &mut R,
) -> (Transcript, f64) {
    let mut s = m.start();
    let mut perf = 0.0;
    let mut steps = Vec::new();
    loop {
        match pi.decision(s) {
            Decision::Act(a) => {
                let action = &m.actions(s)[a];
                perf -= action.cost;
                let next = sample_transition(&action.transitions, rng);
                steps.push((a, next));
                s = next;
            }
            Decision::HaltClaim => {
                perf += m.value(s);
                return (Transcript { steps, terminal: Terminal::HaltedClaim }, perf);
            }
            Decision::HaltNoClaim => {
                return (Transcript { steps, terminal: Terminal::HaltedNoClaim }, perf);
            }
        }
    }
}

pub(crate) fn sample_transition<R: Rng + ?Sized>(transitions: &[(StateId, f64)], rng: &mut R) -> StateId {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for &(t, p) in transitions {
        acc += p;
        if u < acc {
            return t;
        }
    }
    transitions[transitions.len() - 1].0
}

/// Exact `E[Perf]` of `pi` on `m` by backward induction.
pub fn expected_performance(m: &Msp, pi: &StationaryPolicy) -> f64 {
    backward_evaluate(m, pi, |m, s| m.value(s))[m.start()]
}

/// Exact probability that `pi` halts with a claim.
pub fn claim_probability(m: &Msp, pi: &StationaryPolicy) -> f64 {
    let mut p = vec![0.0; m.len()];
    for s in m.backward_order() {
        p[s] = match pi.decision(s) {
            Decision::Act(a) => m.actions(s)[a]
                .transitions
                .iter()
                .map(|&(t, q)| q * p[t])
                .sum(),
            Decision::HaltClaim => 1.0,
            Decision::HaltNoClaim => 0.0,
        };
    }
    p[m.start()]
}

fn backward_evaluate(m: &Msp, pi: &StationaryPolicy, claim: impl Fn(&Msp, StateId) -> f64) -> Vec<f64> {
    let mut v = vec![0.0; m.len()];
    for s in m.backward_order() {
        v[s] = match pi.decision(s) {
            Decision::Act(a) => {
                let action = &m.actions(s)[a];
                -action.cost + action.transitions.iter().map(|&(t, p)| p * v[t]).sum::<f64>()
            }
            Decision::HaltClaim => claim(m, s),
            Decision::HaltNoClaim => 0.0,
        };
    }
    v
}
