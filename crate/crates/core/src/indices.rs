//! Weitzman indices, capped values and exposure for bandit processes.

use std::collections::{HashMap, HashSet};

use crate::error::{Error, Result};
use crate::model::{expected_performance, Decision, DiscreteDistribution, Msp, StateId, StationaryPolicy};
use crate::TOLERANCE;

/// Default cap on the number of atoms of any capped-value law.
pub const SUPPORT_CAP: usize = 100_000;

/// Index `σ_s` and capped-value law `κ_s` of every state.
#[derive(Debug, Clone, PartialEq)]
pub struct CappedValueTable {
    pub sigma: Vec<f64>,
    pub kappa: Vec<DiscreteDistribution>,
}

impl CappedValueTable {
    pub fn sigma(&self, s: StateId) -> f64 {
        self.sigma[s]
    }

    pub fn kappa(&self, s: StateId) -> &DiscreteDistribution {
        &self.kappa[s]
    }
}

/// The unique `σ` with `E[(K - σ)^+] = cost`, extending the left tail of the
/// excess function linearly with slope -1.
pub fn solve_index(k: &DiscreteDistribution, cost: f64) -> f64 {
    let atoms = k.atoms();
    let (mut mass, mut total) = (0.0, 0.0);
    for idx in (0..atoms.len()).rev() {
        let (v, p) = atoms[idx];
        mass += p;
        total += p * v;
        // on [atoms[idx-1], v] the excess is total - mass·σ
        if idx == 0 || total - mass * atoms[idx - 1].0 >= cost {
            return (total - cost) / mass;
        }
    }
    unreachable!("distribution has at least one atom")
}

/// Law of the value reached by one step of the given action.
pub(crate) fn successor_mixture(
    transitions: &[(StateId, f64)],
    kappa: &[DiscreteDistribution],
    cap: usize,
) -> Result<DiscreteDistribution> {
    let k = DiscreteDistribution::mixture(transitions.iter().map(|&(t, p)| (p, &kappa[t])));
    if k.len() > cap {
        return Err(Error::SizeLimit { what: "capped value support", limit: cap });
    }
    Ok(k)
}

pub fn compute_indices(b: &Msp) -> Result<CappedValueTable> {
    compute_indices_with_cap(b, SUPPORT_CAP)
}

/// Backward induction for `σ` and `κ` with an explicit support cap.
pub fn compute_indices_with_cap(b: &Msp, cap: usize) -> Result<CappedValueTable> {
    b.require_bandit()?;
    let n = b.len();
    let mut sigma = vec![0.0; n];
    let mut kappa = vec![DiscreteDistribution::point(0.0); n];
    for s in b.backward_order() {
        match b.actions(s).first() {
            None => {
                sigma[s] = b.value(s);
                kappa[s] = DiscreteDistribution::point(b.value(s));
            }
            Some(a) => {
                let k = successor_mixture(&a.transitions, &kappa, cap)?;
                sigma[s] = solve_index(&k, a.cost);
                kappa[s] = k.capped(sigma[s]);
            }
        }
    }
    Ok(CappedValueTable { sigma, kappa })
}

/// Whether some positive-probability run of `pi` halts unclaimed at a state
/// whose index exceeds the index of an earlier state on the same run.
pub fn is_exposed(b: &Msp, pi: &StationaryPolicy) -> Result<bool> {
    pi.check(b)?;
    let table = compute_indices(b)?;
    Ok(exposed_with(b, pi, &table))
}

pub(crate) fn exposed_with(b: &Msp, pi: &StationaryPolicy, table: &CappedValueTable) -> bool {
    let mut seen = HashSet::new();
    let mut stack = vec![(b.start(), f64::INFINITY)];
    while let Some((s, m)) = stack.pop() {
        if !seen.insert((s, m.to_bits())) {
            continue;
        }
        match pi.decision(s) {
            Decision::Act(a) => {
                let m = m.min(table.sigma[s]);
                for &(t, p) in &b.actions(s)[a].transitions {
                    if p > 0.0 {
                        stack.push((t, m));
                    }
                }
            }
            Decision::HaltNoClaim if table.sigma[s] > m + TOLERANCE => return true,
            _ => {}
        }
    }
    false
}

/// Advance while the index beats `tau` and claim sinks worth more than
/// `tau`; `tie_claim` decides what happens on equality.
pub fn threshold_bandit_policy(b: &Msp, tau: f64, tie_claim: bool) -> Result<StationaryPolicy> {
    let table = compute_indices(b)?;
    Ok(threshold_policy_with(b, &table, tau, tie_claim))
}

pub(crate) fn threshold_policy_with(
    b: &Msp,
    table: &CappedValueTable,
    tau: f64,
    tie_claim: bool,
) -> StationaryPolicy {
    let passes = |x: f64| x > tau + TOLERANCE || (tie_claim && x >= tau - TOLERANCE);
    StationaryPolicy::new(
        (0..b.len())
            .map(|s| match (b.is_sink(s), passes(table.sigma[s])) {
                (true, true) => Decision::HaltClaim,
                (false, true) => Decision::Act(0),
                (_, false) => Decision::HaltNoClaim,
            })
            .collect(),
    )
}

/// `(E[Perf], E[κ · 1{claim}])` of `pi` on `b`, both exact.
pub fn amortization_check(b: &Msp, pi: &StationaryPolicy) -> Result<(f64, f64)> {
    pi.check(b)?;
    let table = compute_indices(b)?;
    let lhs = expected_performance(b, pi);
    let mut memo = HashMap::new();
    let rhs = claimed_kappa(b, pi, &table, b.start(), f64::INFINITY, &mut memo);
    Ok((lhs, rhs))
}

/// `E[κ · 1{claim}]` from state `s` given the smallest index `m` seen on the
/// way there.
fn claimed_kappa(
    b: &Msp,
    pi: &StationaryPolicy,
    table: &CappedValueTable,
    s: StateId,
    m: f64,
    memo: &mut HashMap<(StateId, u64), f64>,
) -> f64 {
    if let Some(&v) = memo.get(&(s, m.to_bits())) {
        return v;
    }
    let v = match pi.decision(s) {
        Decision::Act(a) => {
            let m = m.min(table.sigma[s]);
            b.actions(s)[a]
                .transitions
                .iter()
                .map(|&(t, p)| p * claimed_kappa(b, pi, table, t, m, memo))
                .sum()
        }
        Decision::HaltClaim => table.kappa[s].expected_min(m),
        Decision::HaltNoClaim => 0.0,
    };
    memo.insert((s, m.to_bits()), v);
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Action, State};

    fn coin_box() -> Msp {
        Msp::new(
            vec![
                State::with_actions(vec![Action::new(0.1, vec![(1, 0.5), (2, 0.5)])]),
                State::sink(0.0),
                State::sink(1.0),
            ],
            0,
        )
        .unwrap()
    }

    /// s0 (cost 0.05) -> {sink 0, s1}; s1 (cost 0.1) -> {sink 0, sink 1}.
    fn two_stage() -> Msp {
        Msp::new(
            vec![
                State::with_actions(vec![Action::new(0.05, vec![(1, 0.5), (2, 0.5)])]),
                State::sink(0.0),
                State::with_actions(vec![Action::new(0.1, vec![(3, 0.5), (4, 0.5)])]),
                State::sink(0.0),
                State::sink(1.0),
            ],
            0,
        )
        .unwrap()
    }

    #[test]
    fn coin_box_index() {
        let t = compute_indices(&coin_box()).unwrap();
        assert!((t.sigma[0] - 0.8).abs() < 1e-12);
        assert_eq!(t.kappa[0].atoms().len(), 2);
        assert!((t.kappa[0].atoms()[1].0 - 0.8).abs() < 1e-12);
        assert_eq!(t.kappa[0].atoms()[0], (0.0, 0.5));
    }

    #[test]
    fn two_stage_index() {
        let t = compute_indices(&two_stage()).unwrap();
        assert!((t.sigma[2] - 0.8).abs() < 1e-12);
        assert!((t.sigma[0] - 0.6).abs() < 1e-12);
        let k = t.kappa(0).atoms();
        assert_eq!(k[0], (0.0, 0.75));
        assert!((k[1].0 - 0.6).abs() < 1e-12 && (k[1].1 - 0.25).abs() < 1e-12);
    }

    #[test]
    fn sink_index() {
        let t = compute_indices(&Msp::sink(7.0)).unwrap();
        assert_eq!(t.sigma[0], 7.0);
        assert_eq!(t.kappa[0], DiscreteDistribution::point(7.0));
    }

    #[test]
    fn negative_index_below_support() {
        // E[K] = 0.5 < cost 1: σ = 0.5 - 1
        let m = Msp::new(
            vec![
                State::with_actions(vec![Action::new(1.0, vec![(1, 0.5), (2, 0.5)])]),
                State::sink(0.0),
                State::sink(1.0),
            ],
            0,
        )
        .unwrap();
        let t = compute_indices(&m).unwrap();
        assert!((t.sigma[0] + 0.5).abs() < 1e-12);
        assert_eq!(t.kappa[0], DiscreteDistribution::point(-0.5));
    }

    #[test]
    fn non_bandit_is_rejected() {
        let m = Msp::new(
            vec![
                State::with_actions(vec![Action::new(0.1, vec![(1, 1.0)]), Action::new(0.2, vec![(1, 1.0)])]),
                State::sink(1.0),
            ],
            0,
        )
        .unwrap();
        assert!(matches!(compute_indices(&m), Err(Error::NotBandit { .. })));
    }

    #[test]
    fn exposure_examples() {
        let m = two_stage();
        assert!(!is_exposed(&m, &StationaryPolicy::advance_all(&m)).unwrap());
        let pi = StationaryPolicy::new(vec![
            Decision::Act(0),
            Decision::HaltClaim,
            Decision::HaltNoClaim,
            Decision::HaltClaim,
            Decision::HaltClaim,
        ]);
        assert!(is_exposed(&m, &pi).unwrap());
        let (lhs, rhs) = amortization_check(&m, &pi).unwrap();
        // lhs: -0.05; rhs: 0.5·0
        assert!((lhs + 0.05).abs() < 1e-12);
        assert!(lhs < rhs - 1e-9);
    }

    #[test]
    fn threshold_policies() {
        let m = two_stage();
        let low = threshold_bandit_policy(&m, -1.0, false).unwrap();
        assert_eq!(low, StationaryPolicy::advance_all(&m));
        let high = threshold_bandit_policy(&m, f64::INFINITY, true).unwrap();
        assert_eq!(high.decision(0), Decision::HaltNoClaim);
        let mid = threshold_bandit_policy(&m, 0.7, false).unwrap();
        assert_eq!(mid.decision(0), Decision::HaltNoClaim);
        assert_eq!(crate::model::claim_probability(&m, &mid), 0.0);
        for tau in [-1.0, 0.0, 0.3, 0.6, 0.7, 0.8, 1.0, 2.0] {
            for tie in [false, true] {
                let pi = threshold_bandit_policy(&m, tau, tie).unwrap();
                assert!(!is_exposed(&m, &pi).unwrap());
                let (lhs, rhs) = amortization_check(&m, &pi).unwrap();
                assert!((lhs - rhs).abs() < 1e-9, "tau {tau}: {lhs} vs {rhs}");
            }
        }
    }

    #[test]
    fn halting_at_start_amortizes_to_zero() {
        let m = coin_box();
        let pi = StationaryPolicy::new(vec![Decision::HaltNoClaim; 3]);
        assert_eq!(amortization_check(&m, &pi).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn claiming_at_a_non_sink_can_beat_the_bound() {
        // σ = -0.5 at the start, so claiming there amortizes to -0.5 while earning 0
        let m = Msp::new(
            vec![
                State::with_actions(vec![Action::new(1.0, vec![(1, 0.5), (2, 0.5)])]),
                State::sink(0.0),
                State::sink(1.0),
            ],
            0,
        )
        .unwrap();
        let pi = StationaryPolicy::new(vec![Decision::HaltClaim, Decision::HaltClaim, Decision::HaltClaim]);
        let (lhs, rhs) = amortization_check(&m, &pi).unwrap();
        assert_eq!(lhs, 0.0);
        assert!((rhs + 0.5).abs() < 1e-12);
    }

    #[test]
    fn support_cap_is_enforced() {
        assert!(matches!(
            compute_indices_with_cap(&coin_box(), 1),
            Err(Error::SizeLimit { .. })
        ));
    }
}
