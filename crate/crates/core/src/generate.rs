//! Seeded random instances for tests, benchmarks and the bundled corpus.
//!
//! Numbers are rounded to two decimals so that generated files stay
//! readable; probabilities are normalized after rounding.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};

use crate::error::Result;
use crate::matroid::{members, Matroid, Subset};
use crate::model::{
    Action, Cabinet, CabinetsInstance, CmsInstance, DiscreteDistribution, Msp, NoiPandoraInstance,
    PandoraBox, PandoraCabinetsInstance, Scenario, State,
};
use crate::SimRng;

/// Size limits for random processes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MspShape {
    pub max_states: usize,
    pub max_actions: usize,
    pub max_transitions: usize,
    /// Chance that an interior state is made a sink.
    pub sink_prob: f64,
    pub max_value: f64,
    pub min_cost: f64,
    pub max_cost: f64,
}

impl Default for MspShape {
    fn default() -> Self {
        Self {
            max_states: 6,
            max_actions: 2,
            max_transitions: 3,
            sink_prob: 0.3,
            max_value: 3.0,
            min_cost: 0.05,
            max_cost: 0.6,
        }
    }
}

impl MspShape {
    pub fn bandit(max_states: usize) -> Self {
        Self { max_states, max_actions: 1, ..Self::default() }
    }
}

fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

fn weights<R: Rng + ?Sized>(rng: &mut R, k: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..k).map(|_| rng.random_range(1..=9) as f64).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|x| x / total).collect()
}

/// Random process whose transitions only move to higher state ids, so the
/// state graph is acyclic; the last state is always a sink.
pub fn random_msp<R: Rng + ?Sized>(rng: &mut R, shape: &MspShape) -> Msp {
    let n = rng.random_range(1..=shape.max_states.max(1));
    let mut states = Vec::with_capacity(n);
    for s in 0..n {
        let sink = s + 1 == n || (s > 0 && rng.random_bool(shape.sink_prob));
        if sink {
            states.push(State::sink(round2(rng.random_range(0.0..=shape.max_value))));
            continue;
        }
        let later = n - s - 1;
        let actions = (0..rng.random_range(1..=shape.max_actions.max(1)))
            .map(|_| {
                let k = rng.random_range(1..=shape.max_transitions.max(1).min(later));
                let mut targets: Vec<usize> = sample(rng, later, k).into_iter().map(|t| s + 1 + t).collect();
                targets.sort_unstable();
                let p = weights(rng, k);
                let cost = round2(rng.random_range(shape.min_cost..=shape.max_cost)).max(0.01);
                Action::new(cost, targets.into_iter().zip(p).collect())
            })
            .collect();
        states.push(State::with_actions(actions));
    }
    Msp::new(states, 0).expect("generated processes are valid")
}

pub fn random_bandit<R: Rng + ?Sized>(rng: &mut R, max_states: usize) -> Msp {
    random_msp(rng, &MspShape::bandit(max_states))
}

pub fn random_distribution<R: Rng + ?Sized>(rng: &mut R, max_atoms: usize, max_value: f64) -> DiscreteDistribution {
    let k = rng.random_range(1..=max_atoms.max(1));
    let p = weights(rng, k);
    DiscreteDistribution::new((0..k).map(|j| (round2(rng.random_range(0.0..=max_value)), p[j])))
        .expect("generated distributions are valid")
}

/// Cabinet with up to `max_atoms` joint scenarios, so drawers are correlated.
pub fn random_cabinet<R: Rng + ?Sized>(rng: &mut R, max_drawers: usize, max_atoms: usize, max_value: f64) -> Cabinet {
    let drawers = rng.random_range(1..=max_drawers.max(1));
    let k = rng.random_range(1..=max_atoms.max(1));
    let p = weights(rng, k);
    let scenarios = p
        .into_iter()
        .map(|prob| Scenario {
            prob,
            values: (0..drawers).map(|_| round2(rng.random_range(0.0..=max_value))).collect(),
        })
        .collect();
    Cabinet::new(scenarios).expect("generated cabinets are valid")
}

/// Uniform or partition matroid of rank at most `max_rank`.
pub fn random_matroid<R: Rng + ?Sized>(rng: &mut R, n: usize, max_rank: usize) -> Matroid {
    let max_rank = max_rank.clamp(1, n.max(1));
    if n >= 2 && rng.random_bool(0.5) {
        let blocks = rng.random_range(1..=n.min(max_rank));
        let block_of: Vec<usize> = (0..n).map(|e| if e < blocks { e } else { rng.random_range(0..blocks) }).collect();
        let caps = vec![1; blocks];
        Matroid::partition(block_of, caps).expect("generated matroids are valid")
    } else {
        Matroid::uniform(n, rng.random_range(1..=max_rank)).expect("generated matroids are valid")
    }
}

/// Random point of the matroid polytope: a scaled convex combination of a
/// few random bases.
pub fn random_feasible_q<R: Rng + ?Sized>(rng: &mut R, m: &Matroid) -> Vec<f64> {
    let n = m.ground_size();
    let k = rng.random_range(1..=3);
    let lambda = weights(rng, k);
    let scale: f64 = rng.random_range(0.3..=1.0);
    let mut q = vec![0.0; n];
    for l in lambda {
        let w: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let basis: Subset = m.max_weight_independent(&w);
        for e in members(basis) {
            q[e] += scale * l;
        }
    }
    q.iter().map(|x| x.min(1.0)).collect()
}

pub fn random_cms<R: Rng + ?Sized>(rng: &mut R, n: usize, max_rank: usize, shape: &MspShape) -> Result<CmsInstance> {
    let processes = (0..n).map(|_| random_msp(rng, shape)).collect();
    CmsInstance::new(processes, random_matroid(rng, n, max_rank))
}

pub fn random_cabinets<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    max_rank: usize,
    max_drawers: usize,
    max_atoms: usize,
) -> Result<CabinetsInstance> {
    let cabinets = (0..n).map(|_| random_cabinet(rng, max_drawers, max_atoms, 10.0)).collect();
    CabinetsInstance::new(cabinets, random_matroid(rng, n, max_rank))
}

pub fn random_pandora_cabinets<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    max_rank: usize,
    max_drawers: usize,
    max_states: usize,
) -> Result<PandoraCabinetsInstance> {
    let cabinets = (0..n)
        .map(|_| (0..rng.random_range(1..=max_drawers.max(1))).map(|_| random_bandit(rng, max_states)).collect())
        .collect();
    PandoraCabinetsInstance::new(cabinets, random_matroid(rng, n, max_rank))
}

pub fn random_noi<R: Rng + ?Sized>(rng: &mut R, n: usize, max_atoms: usize) -> Result<NoiPandoraInstance> {
    let boxes = (0..n)
        .map(|_| PandoraBox {
            cost: round2(rng.random_range(0.05..=1.0)),
            dist: random_distribution(rng, max_atoms, 5.0),
        })
        .collect();
    NoiPandoraInstance::new(boxes)
}

/// Generator seeded for reproducible suites.
pub fn seeded(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}
