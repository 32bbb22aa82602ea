//! Structural constructions on processes and reductions between problem
//! families.

use std::collections::BTreeMap;

use super::instances::{CmsInstance, NoiPandoraInstance, PandoraCabinetsInstance};
use super::msp::{Action, Msp, State, StateId};
use super::policy::{Decision, StationaryPolicy};
use crate::error::{Error, Result};
use crate::matroid::Matroid;

/// Default cap on the number of states produced by [`tree_msp`].
pub const DEFAULT_TREE_BUDGET: usize = 100_000;

/// Unfolds `m` into a tree with one state per non-halted transcript.
///
/// State 0 of the result is the root; `origin[k]` is the state of `m` that
/// tree state `k` copies.
pub fn tree_msp(m: &Msp, budget: usize) -> Result<(Msp, Vec<StateId>)> {
    let mut states: Vec<State> = Vec::new();
    let mut origin: Vec<StateId> = Vec::new();
    unfold(m, m.start(), &mut states, &mut origin, budget)?;
    Ok((Msp::new_unchecked(states, 0), origin))
}

fn unfold(
    m: &Msp,
    s: StateId,
    states: &mut Vec<State>,
    origin: &mut Vec<StateId>,
    budget: usize,
) -> Result<StateId> {
    if states.len() >= budget {
        return Err(Error::SizeLimit { what: "tree process size", limit: budget });
    }
    let id = states.len();
    let src = m.state(s);
    states.push(State { value: src.value, actions: Vec::new(), label: src.label.clone() });
    origin.push(s);
    let mut actions = Vec::with_capacity(src.actions.len());
    for a in &src.actions {
        // repeated targets within one action are the same transcript
        let mut grouped: BTreeMap<StateId, f64> = BTreeMap::new();
        let mut order = Vec::new();
        for &(t, p) in &a.transitions {
            if p <= 0.0 {
                continue;
            }
            if !grouped.contains_key(&t) {
                order.push(t);
            }
            *grouped.entry(t).or_insert(0.0) += p;
        }
        let mut transitions = Vec::with_capacity(order.len());
        for t in order {
            let child = unfold(m, t, states, origin, budget)?;
            transitions.push((child, grouped[&t]));
        }
        actions.push(Action { cost: a.cost, transitions, label: a.label.clone() });
    }
    states[id].actions = actions;
    Ok(id)
}

/// Bandit obtained by following a deterministic policy.
#[derive(Debug, Clone, PartialEq)]
pub struct InducedBandit {
    pub bandit: Msp,
    /// State of the original process behind each bandit state.
    pub origin: Vec<StateId>,
    /// The original policy expressed on the bandit: advance wherever it
    /// acted, and keep its halting decisions.
    pub policy: StationaryPolicy,
}

/// Restricts `m` to the states `pi` can reach, keeping only the action `pi`
/// takes at each. States where `pi` halts become sinks worth `V(s)` if it
/// claims there and 0 otherwise.
pub fn induced_bandit(m: &Msp, pi: &StationaryPolicy) -> Result<InducedBandit> {
    pi.check(m)?;
    let mut index: Vec<Option<StateId>> = vec![None; m.len()];
    let mut origin = Vec::new();
    let mut stack = vec![m.start()];
    index[m.start()] = Some(0);
    origin.push(m.start());
    while let Some(s) = stack.pop() {
        if let Decision::Act(a) = pi.decision(s) {
            for &(t, p) in &m.actions(s)[a].transitions {
                if p > 0.0 && index[t].is_none() {
                    index[t] = Some(origin.len());
                    origin.push(t);
                    stack.push(t);
                }
            }
        }
    }
    let mut states = Vec::with_capacity(origin.len());
    let mut decisions = Vec::with_capacity(origin.len());
    for &s in &origin {
        let label = m.state(s).label.clone();
        match pi.decision(s) {
            Decision::Act(a) => {
                let action = &m.actions(s)[a];
                let transitions = action
                    .transitions
                    .iter()
                    .filter(|t| t.1 > 0.0)
                    .map(|&(t, p)| (index[t].expect("reachable"), p))
                    .collect();
                states.push(State {
                    value: 0.0,
                    actions: vec![Action { cost: action.cost, transitions, label: action.label.clone() }],
                    label,
                });
                decisions.push(Decision::Act(0));
            }
            d @ Decision::HaltClaim => {
                states.push(State { value: m.value(s), actions: Vec::new(), label });
                decisions.push(d);
            }
            d @ Decision::HaltNoClaim => {
                states.push(State { value: 0.0, actions: Vec::new(), label });
                decisions.push(d);
            }
        }
    }
    Ok(InducedBandit {
        bandit: Msp::new_unchecked(states, 0),
        origin,
        policy: StationaryPolicy::new(decisions),
    })
}

/// Each box becomes a two-drawer cabinet: drawer 0 inspects the box at its
/// cost, drawer 1 takes it blind for its mean. At most one box is selected.
pub fn convert_noi_to_cabinets(inst: &NoiPandoraInstance) -> Result<PandoraCabinetsInstance> {
    let cabinets = inst
        .boxes
        .iter()
        .map(|b| {
            let atoms = b.dist.atoms();
            let mut states = vec![State::with_actions(vec![Action::new(
                b.cost,
                atoms.iter().enumerate().map(|(k, a)| (k + 1, a.1)).collect(),
            )
            .labeled("inspect")])];
            states.extend(atoms.iter().map(|a| State::sink(a.0)));
            let inspect = Msp::new(states, 0)?;
            let blind = Msp::new(vec![State::sink(b.dist.mean())], 0)?;
            Ok(vec![inspect, blind])
        })
        .collect::<Result<Vec<_>>>()?;
    let n = cabinets.len();
    PandoraCabinetsInstance::new(cabinets, Matroid::uniform(n, 1)?)
}

/// Smallest cost of a first advance over all drawers (infinite when every
/// drawer starts at a sink).
pub fn min_first_advance_cost(inst: &PandoraCabinetsInstance) -> f64 {
    inst.cabinets
        .iter()
        .flatten()
        .flat_map(|m| m.actions(m.start()).iter().map(|a| a.cost))
        .fold(f64::INFINITY, f64::min)
}

/// Turns each cabinet into one process whose start state selects a drawer at
/// cost `eps`; the selected drawer's first step is credited `eps` back.
pub fn convert_cabinets_to_cms(inst: &PandoraCabinetsInstance, eps: f64) -> Result<CmsInstance> {
    let c_min = min_first_advance_cost(inst);
    if !(eps > 0.0 && eps < c_min) {
        return Err(Error::Parameter(format!(
            "eps must lie in (0, {c_min}), got {eps}"
        )));
    }
    let processes = inst
        .cabinets
        .iter()
        .map(|drawers| {
            let mut states = vec![State::with_actions(Vec::new())];
            let mut select = Vec::with_capacity(drawers.len());
            for (j, d) in drawers.iter().enumerate() {
                let offset = states.len();
                for (s, st) in d.states().iter().enumerate() {
                    let mut st = st.clone();
                    for a in &mut st.actions {
                        for t in &mut a.transitions {
                            t.0 += offset;
                        }
                    }
                    if s == d.start() {
                        if st.is_sink() {
                            st.value += eps;
                        } else {
                            st.actions[0].cost -= eps;
                        }
                    }
                    states.push(st);
                }
                select.push(Action::new(eps, vec![(offset + d.start(), 1.0)]).labeled(format!("drawer{j}")));
            }
            states[0].actions = select;
            Msp::new(states, 0)
        })
        .collect::<Result<Vec<_>>>()?;
    CmsInstance::new(processes, inst.matroid.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::distribution::DiscreteDistribution;
    use crate::model::instances::PandoraBox;
    use crate::model::policy::expected_performance;

    fn diamond() -> Msp {
        // 0 -> {1, 2} -> 3 -> {4, 5}
        Msp::new(
            vec![
                State::with_actions(vec![Action::new(0.1, vec![(1, 0.5), (2, 0.5)])]),
                State::with_actions(vec![Action::new(0.1, vec![(3, 1.0)])]),
                State::with_actions(vec![Action::new(0.2, vec![(3, 1.0)])]),
                State::with_actions(vec![Action::new(0.1, vec![(4, 0.5), (5, 0.5)])]),
                State::sink(0.0),
                State::sink(2.0),
            ],
            0,
        )
        .unwrap()
    }

    #[test]
    fn tree_of_tree_is_isomorphic() {
        let m = Msp::new(
            vec![
                State::with_actions(vec![Action::new(0.1, vec![(1, 0.5), (2, 0.5)])]),
                State::sink(0.0),
                State::sink(1.0),
            ],
            0,
        )
        .unwrap();
        let (t, origin) = tree_msp(&m, 100).unwrap();
        assert_eq!(t.len(), 3);
        assert_eq!(origin, vec![0, 1, 2]);
        assert_eq!(t, m);
    }

    #[test]
    fn diamond_shared_state_is_split() {
        let (t, origin) = tree_msp(&diamond(), 100).unwrap();
        assert!(t.validate().is_empty());
        assert_eq!(origin.iter().filter(|&&s| s == 3).count(), 2);
        assert_eq!(t.len(), 1 + 2 + 2 + 4);
    }

    #[test]
    fn shared_middle_layer_is_duplicated() {
        // start -> a or b (two actions), each -> 2 of the 3 middle states,
        // every middle state reached exactly twice over the two branches
        let mut states = vec![
            State::with_actions(vec![Action::new(0.1, vec![(1, 0.5), (2, 0.5)])]),
            State::with_actions(vec![Action::new(0.1, vec![(3, 0.5), (4, 0.5)])]),
            State::with_actions(vec![Action::new(0.1, vec![(4, 0.5), (5, 0.5)]), Action::new(0.2, vec![(3, 1.0)])]),
        ];
        for _ in 0..3 {
            states.push(State::with_actions(vec![Action::new(0.1, vec![(6, 1.0)])]));
        }
        states.push(State::sink(1.0));
        let m = Msp::new(states, 0).unwrap();
        let (t, origin) = tree_msp(&m, 1000).unwrap();
        let middle = origin.iter().filter(|&&s| (3..6).contains(&s)).count();
        assert_eq!(middle, 5);
        assert!(t.validate().is_empty());
    }

    #[test]
    fn tree_budget_is_enforced() {
        assert!(matches!(tree_msp(&diamond(), 4), Err(Error::SizeLimit { .. })));
    }

    #[test]
    fn induced_bandit_halting_at_start() {
        let pi = StationaryPolicy::new(vec![Decision::HaltNoClaim; 6]);
        let ib = induced_bandit(&diamond(), &pi).unwrap();
        assert_eq!(ib.bandit.len(), 1);
        assert_eq!(ib.bandit.value(0), 0.0);
    }

    #[test]
    fn induced_bandit_restricts_to_chosen_action() {
        let m = Msp::new(
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
        .unwrap();
        let pi = StationaryPolicy::new(vec![
            Decision::Act(0),
            Decision::HaltClaim,
            Decision::HaltClaim,
            Decision::HaltClaim,
        ]);
        let ib = induced_bandit(&m, &pi).unwrap();
        assert!(ib.bandit.is_bandit());
        assert_eq!(ib.bandit.len(), 3);
        assert!(!ib.origin.contains(&3));
    }

    #[test]
    fn induced_bandit_zeroes_unclaimed_sinks() {
        let m = diamond();
        let pi = StationaryPolicy::new(vec![
            Decision::Act(0),
            Decision::Act(0),
            Decision::Act(0),
            Decision::Act(0),
            Decision::HaltNoClaim,
            Decision::HaltClaim,
        ]);
        let ib = induced_bandit(&m, &pi).unwrap();
        let advance = StationaryPolicy::advance_all(&ib.bandit);
        let lhs = expected_performance(&m, &pi);
        let rhs = expected_performance(&ib.bandit, &advance);
        assert!((lhs - rhs).abs() < 1e-12);
        assert!((expected_performance(&ib.bandit, &ib.policy) - lhs).abs() < 1e-12);
    }

    #[test]
    fn noi_box_becomes_two_drawers() {
        let inst = NoiPandoraInstance::new(vec![
            PandoraBox { cost: 2.0, dist: DiscreteDistribution::new([(0.0, 0.5), (10.0, 0.5)]).unwrap() },
            PandoraBox { cost: 1.0, dist: DiscreteDistribution::point(3.0) },
        ])
        .unwrap();
        let pc = convert_noi_to_cabinets(&inst).unwrap();
        assert_eq!(pc.cabinets.len(), 2);
        assert_eq!(pc.matroid, Matroid::uniform(2, 1).unwrap());
        let inspect = &pc.cabinets[0][0];
        assert_eq!(inspect.actions(0)[0].cost, 2.0);
        assert_eq!(inspect.len(), 3);
        assert_eq!(pc.cabinets[0][1].value(0), 5.0);
        assert_eq!(pc.cabinets[1][0].len(), 2);
        assert_eq!(pc.cabinets[1][0].value(1), 3.0);
        assert_eq!(pc.cabinets[1][1].value(0), 3.0);
    }

    #[test]
    fn cabinets_to_cms_shifts_by_eps() {
        let cost2 = Msp::new(
            vec![
                State::with_actions(vec![Action::new(2.0, vec![(1, 1.0)])]),
                State::sink(4.0),
            ],
            0,
        )
        .unwrap();
        let pc = PandoraCabinetsInstance::new(
            vec![vec![Msp::sink(5.0), cost2]],
            Matroid::uniform(1, 1).unwrap(),
        )
        .unwrap();
        let cms = convert_cabinets_to_cms(&pc, 1.0).unwrap();
        let m = &cms.processes[0];
        assert_eq!(m.actions(0).len(), 2);
        assert_eq!(m.actions(0)[0].cost, 1.0);
        let sink_drawer = m.actions(0)[0].transitions[0].0;
        assert_eq!(m.value(sink_drawer), 6.0);
        let bandit_start = m.actions(0)[1].transitions[0].0;
        assert_eq!(m.actions(bandit_start)[0].cost, 1.0);

        assert!(matches!(convert_cabinets_to_cms(&pc, 2.0), Err(Error::Parameter(_))));
        assert!(matches!(convert_cabinets_to_cms(&pc, 0.0), Err(Error::Parameter(_))));
    }
}
