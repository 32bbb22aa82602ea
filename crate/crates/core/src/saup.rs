//! Single-agent utility problems: maximise expected performance minus a
//! price `tau` paid on claiming.

use crate::error::{Error, Result};
use crate::indices::{solve_index, successor_mixture, CappedValueTable, SUPPORT_CAP};
use crate::model::{
    claim_probability, expected_performance, tree_msp, Cabinet, Decision, DiscreteDistribution, Msp,
    StationaryPolicy, DEFAULT_TREE_BUDGET,
};

/// Best drawer of a cabinet against a posted price.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CabinetSaup {
    pub drawer: usize,
    /// `E[(X_drawer - tau)^+]`.
    pub value: f64,
}

/// Opens the drawer maximising `E[(X_j - tau)^+]` (lowest index on ties);
/// the opened value is then claimed iff it is at least `tau`.
pub fn cabinets_saup(cabinet: &Cabinet, tau: f64) -> CabinetSaup {
    let mut best = CabinetSaup { drawer: 0, value: f64::NEG_INFINITY };
    for j in 0..cabinet.drawers() {
        let v = cabinet.marginal(j).expected_excess(tau);
        if v > best.value {
            best = CabinetSaup { drawer: j, value: v };
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaxSaup {
    pub policy: StationaryPolicy,
    /// Optimal `E[Perf] - tau · Pr[claim]`.
    pub value: f64,
    /// Indices and capped values of the bandit induced by `policy`; states
    /// where it halts carry index 0 and a point mass at 0.
    pub table: CappedValueTable,
}

fn check_tau(tau: f64) -> Result<()> {
    if tau.is_nan() || tau < 0.0 {
        return Err(Error::Parameter(format!("price must be nonnegative, got {tau}")));
    }
    Ok(())
}

/// Backward induction choosing at every state the action with the largest
/// positive surplus `E[(K_a - tau)^+] - C(a)`, halting when none is positive.
pub fn maxsaup(m: &Msp, tau: f64) -> Result<MaxSaup> {
    check_tau(tau)?;
    let n = m.len();
    let mut decisions = vec![Decision::HaltNoClaim; n];
    let mut sigma = vec![0.0; n];
    let mut kappa = vec![DiscreteDistribution::point(0.0); n];
    for s in m.backward_order() {
        if m.is_sink(s) {
            let v = m.value(s);
            decisions[s] = if v >= tau { Decision::HaltClaim } else { Decision::HaltNoClaim };
            sigma[s] = v;
            kappa[s] = DiscreteDistribution::point(v);
            continue;
        }
        let mut best: Option<(usize, f64, DiscreteDistribution)> = None;
        for (a, action) in m.actions(s).iter().enumerate() {
            let k = successor_mixture(&action.transitions, &kappa, SUPPORT_CAP)?;
            let upsilon = k.expected_excess(tau) - action.cost;
            if best.as_ref().is_none_or(|b| upsilon > b.1) {
                best = Some((a, upsilon, k));
            }
        }
        if let Some((a, upsilon, k)) = best {
            if upsilon > 0.0 {
                decisions[s] = Decision::Act(a);
                sigma[s] = solve_index(&k, m.actions(s)[a].cost);
                kappa[s] = k.capped(sigma[s]);
            }
        }
    }
    let value = kappa[m.start()].expected_excess(tau);
    Ok(MaxSaup {
        policy: StationaryPolicy::new(decisions),
        value,
        table: CappedValueTable { sigma, kappa },
    })
}

/// `E[Perf] - tau · Pr[claim]` of a given policy.
pub fn saup_objective(m: &Msp, pi: &StationaryPolicy, tau: f64) -> f64 {
    expected_performance(m, pi) - tau * claim_probability(m, pi)
}

/// Optimum over all deterministic policies of the tree unfolding of `m`,
/// where claiming is allowed at any state.
pub fn brute_force_saup(m: &Msp, tau: f64) -> Result<f64> {
    let (tree, _) = tree_msp(m, DEFAULT_TREE_BUDGET)?;
    let mut best = vec![0.0; tree.len()];
    for s in tree.backward_order() {
        let mut v = (tree.value(s) - tau).max(0.0);
        for a in tree.actions(s) {
            v = v.max(-a.cost + a.transitions.iter().map(|&(t, p)| p * best[t]).sum::<f64>());
        }
        best[s] = v;
    }
    Ok(best[tree.start()])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::indices::compute_indices;
    use crate::model::{Action, Scenario, State};

    /// a1: cost 0.1 to sinks {0, 1}; a2: cost 0.4 to sink 2.
    fn two_actions() -> Msp {
        Msp::new(
            vec![
                State::with_actions(vec![
                    Action::new(0.1, vec![(1, 0.5), (2, 0.5)]),
                    Action::new(0.4, vec![(3, 1.0)]),
                ]),
                State::sink(0.0),
                State::sink(1.0),
                State::sink(2.0),
            ],
            0,
        )
        .unwrap()
    }

    #[test]
    fn cabinet_examples() {
        let c = Cabinet::independent(&[
            DiscreteDistribution::new([(0.0, 0.5), (10.0, 0.5)]).unwrap(),
            DiscreteDistribution::point(5.0),
        ])
        .unwrap();
        assert_eq!(cabinets_saup(&c, 4.0), CabinetSaup { drawer: 0, value: 3.0 });
        let c = Cabinet::new(vec![Scenario { prob: 1.0, values: vec![2.0, 3.0, 1.0] }]).unwrap();
        assert_eq!(cabinets_saup(&c, 0.0).drawer, 1);
        assert_eq!(cabinets_saup(&c, 10.0), CabinetSaup { drawer: 0, value: 0.0 });
    }

    #[test]
    fn sink_only() {
        let r = maxsaup(&Msp::sink(5.0), 3.0).unwrap();
        assert_eq!(r.policy.decision(0), Decision::HaltClaim);
        assert_eq!(r.value, 2.0);
    }

    #[test]
    fn two_action_example() {
        let m = two_actions();
        let r = maxsaup(&m, 0.5).unwrap();
        assert_eq!(r.policy.decision(0), Decision::Act(1));
        assert!((r.value - 1.1).abs() < 1e-12);
        assert!((r.table.sigma[0] - 1.6).abs() < 1e-12);
        assert!((brute_force_saup(&m, 0.5).unwrap() - 1.1).abs() < 1e-12);

        let r = maxsaup(&m, 1.7).unwrap();
        assert_eq!(r.policy.decision(0), Decision::HaltNoClaim);
        assert_eq!(r.value, 0.0);
    }

    #[test]
    fn negative_price_is_rejected() {
        assert!(matches!(maxsaup(&Msp::sink(1.0), -0.5), Err(Error::Parameter(_))));
    }

    #[test]
    fn zero_price_on_bandit_matches_capped_value() {
        let m = Msp::new(
            vec![
                State::with_actions(vec![Action::new(0.05, vec![(1, 0.5), (2, 0.5)])]),
                State::sink(0.0),
                State::with_actions(vec![Action::new(0.1, vec![(3, 0.5), (4, 0.5)])]),
                State::sink(0.0),
                State::sink(1.0),
            ],
            0,
        )
        .unwrap();
        let t = compute_indices(&m).unwrap();
        let expected = t.kappa(0).expected_excess(0.0);
        assert!((brute_force_saup(&m, 0.0).unwrap() - expected).abs() < 1e-12);
        assert!((maxsaup(&m, 0.0).unwrap().value - expected).abs() < 1e-12);
    }

    #[test]
    fn zero_values_give_zero() {
        let m = Msp::new(
            vec![State::with_actions(vec![Action::new(0.3, vec![(1, 1.0)])]), State::sink(0.0)],
            0,
        )
        .unwrap();
        assert_eq!(brute_force_saup(&m, 0.0).unwrap(), 0.0);
        assert_eq!(maxsaup(&m, 0.0).unwrap().value, 0.0);
    }

    #[test]
    fn dp_agrees_with_policy_enumeration() {
        let m = two_actions();
        let (tree, _) = tree_msp(&m, 100).unwrap();
        for tau in [0.0, 0.3, 0.5, 1.0, 1.7, 3.0] {
            let enumerated = StationaryPolicy::enumerate(&tree, false)
                .iter()
                .map(|pi| saup_objective(&tree, pi, tau))
                .fold(f64::NEG_INFINITY, f64::max);
            assert!((enumerated - brute_force_saup(&m, tau).unwrap()).abs() < 1e-12);
        }
    }
}
