//! JSON instance files and their conversion to and from model types.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::matroid::{subset_of, members, Matroid, MatroidKind};
use crate::model::{
    Action, Cabinet, CabinetsInstance, CmsInstance, DiscreteDistribution, Msp, NoiPandoraInstance,
    PandoraBox, PandoraCabinetsInstance, Scenario, State,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum MatroidFile {
    Uniform { n: usize, rank: usize },
    /// `blocks[e]` is the block of element `e`.
    Partition { blocks: Vec<usize>, caps: Vec<usize> },
    /// Every independent set, as lists of elements.
    Explicit { n: usize, independent: Vec<Vec<usize>> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateFile {
    pub id: String,
    #[serde(default)]
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransitionFile {
    pub to: String,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionFile {
    pub state: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub cost: f64,
    pub transitions: Vec<TransitionFile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MspFile {
    pub states: Vec<StateFile>,
    pub start: String,
    pub actions: Vec<ActionFile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub p: f64,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomFile {
    pub value: f64,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxFile {
    pub cost: f64,
    pub atoms: Vec<AtomFile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InstanceFile {
    Cms { matroid: MatroidFile, processes: Vec<MspFile> },
    Cabinets { matroid: MatroidFile, cabinets: Vec<Vec<ScenarioFile>> },
    PandoraCabinets { matroid: MatroidFile, cabinets: Vec<Vec<MspFile>> },
    NoiPandora { boxes: Vec<BoxFile> },
}

/// A parsed and validated instance.
#[derive(Debug, Clone, PartialEq)]
pub enum Instance {
    Cms(CmsInstance),
    Cabinets(CabinetsInstance),
    PandoraCabinets(PandoraCabinetsInstance),
    NoiPandora(NoiPandoraInstance),
}

impl Instance {
    pub fn kind(&self) -> &'static str {
        match self {
            Instance::Cms(_) => "cms",
            Instance::Cabinets(_) => "cabinets",
            Instance::PandoraCabinets(_) => "pandora_cabinets",
            Instance::NoiPandora(_) => "noi_pandora",
        }
    }

    /// Number of arrivals.
    pub fn len(&self) -> usize {
        match self {
            Instance::Cms(i) => i.processes.len(),
            Instance::Cabinets(i) => i.cabinets.len(),
            Instance::PandoraCabinets(i) => i.cabinets.len(),
            Instance::NoiPandora(i) => i.boxes.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Structural error anchored at a field path such as `processes[1].actions[0]`.
fn at(path: &str, e: Error) -> Error {
    match e {
        Error::InvalidInstance(msg) => Error::InvalidInstance(format!("{path}: {msg}")),
        Error::InvalidProcess(v) => Error::InvalidInstance(format!(
            "{path}: {}",
            v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
        )),
        other => other,
    }
}

fn invalid(path: &str, msg: impl std::fmt::Display) -> Error {
    Error::InvalidInstance(format!("{path}: {msg}"))
}

impl MatroidFile {
    pub fn to_matroid(&self) -> Result<Matroid, Error> {
        match self {
            MatroidFile::Uniform { n, rank } => Matroid::uniform(*n, *rank),
            MatroidFile::Partition { blocks, caps } => Matroid::partition(blocks.clone(), caps.clone()),
            MatroidFile::Explicit { n, independent } => {
                if let Some(e) = independent.iter().flatten().find(|&&e| e >= *n) {
                    return Err(invalid("matroid", format!("element {e} outside ground set of size {n}")));
                }
                let sets: Vec<_> = independent.iter().map(|s| subset_of(s.iter().copied())).collect();
                Matroid::explicit(*n, &sets)
            }
        }
        .map_err(|e| at("matroid", e))
    }

    pub fn from_matroid(m: &Matroid) -> Self {
        let n = m.ground_size();
        match m.kind() {
            MatroidKind::Uniform { rank } => MatroidFile::Uniform { n, rank: *rank },
            MatroidKind::Partition { block_of, caps } => {
                MatroidFile::Partition { blocks: block_of.clone(), caps: caps.clone() }
            }
            MatroidKind::Explicit { independent } => MatroidFile::Explicit {
                n,
                independent: (0..independent.len())
                    .filter(|&s| independent[s])
                    .map(|s| members(s as u64).collect())
                    .collect(),
            },
        }
    }
}

impl MspFile {
    /// Builds the process without validating it.
    pub fn to_unchecked(&self, path: &str) -> Result<Msp, Error> {
        let mut index = HashMap::new();
        for (i, s) in self.states.iter().enumerate() {
            if index.insert(s.id.as_str(), i).is_some() {
                return Err(invalid(&format!("{path}.states[{i}]"), format!("duplicate id '{}'", s.id)));
            }
        }
        let lookup = |id: &str, field: &str| {
            index.get(id).copied().ok_or_else(|| invalid(field, format!("unknown state id '{id}'")))
        };
        let mut states: Vec<State> =
            self.states.iter().map(|s| State { value: s.value, actions: Vec::new(), label: Some(s.id.clone()) }).collect();
        for (a, act) in self.actions.iter().enumerate() {
            let field = format!("{path}.actions[{a}]");
            let s = lookup(&act.state, &format!("{field}.state"))?;
            let transitions = act
                .transitions
                .iter()
                .enumerate()
                .map(|(k, t)| Ok((lookup(&t.to, &format!("{field}.transitions[{k}].to"))?, t.p)))
                .collect::<Result<Vec<_>, Error>>()?;
            states[s].actions.push(Action { cost: act.cost, transitions, label: act.label.clone() });
        }
        let start = lookup(&self.start, &format!("{path}.start"))?;
        Ok(Msp::new_unchecked(states, start))
    }

    pub fn to_msp(&self, path: &str) -> Result<Msp, Error> {
        let m = self.to_unchecked(path)?;
        let violations = m.validate();
        if violations.is_empty() {
            Ok(m)
        } else {
            Err(at(path, Error::InvalidProcess(violations)))
        }
    }

    pub fn from_msp(m: &Msp) -> Self {
        let ids = state_ids(m);
        MspFile {
            states: m
                .states()
                .iter()
                .zip(&ids)
                .map(|(s, id)| StateFile { id: id.clone(), value: s.value })
                .collect(),
            start: ids[m.start()].clone(),
            actions: m
                .states()
                .iter()
                .enumerate()
                .flat_map(|(s, st)| st.actions.iter().map(move |a| (s, a)))
                .map(|(s, a)| ActionFile {
                    state: ids[s].clone(),
                    label: a.label.clone(),
                    cost: a.cost,
                    transitions: a
                        .transitions
                        .iter()
                        .map(|&(t, p)| TransitionFile { to: ids[t].clone(), p })
                        .collect(),
                })
                .collect(),
        }
    }
}

/// State labels when they are present and unique, `s{i}` otherwise.
pub fn state_ids(m: &Msp) -> Vec<String> {
    let labels: Vec<Option<&String>> = m.states().iter().map(|s| s.label.as_ref()).collect();
    let mut seen = std::collections::HashSet::new();
    let unique = labels.iter().all(|l| l.is_some_and(|l| seen.insert(l)));
    if unique {
        labels.into_iter().map(|l| l.cloned().unwrap_or_default()).collect()
    } else {
        (0..m.len()).map(|i| format!("s{i}")).collect()
    }
}

impl InstanceFile {
    pub fn to_instance(&self) -> Result<Instance, Error> {
        Ok(match self {
            InstanceFile::Cms { matroid, processes } => {
                let processes = processes
                    .iter()
                    .enumerate()
                    .map(|(i, p)| p.to_msp(&format!("processes[{i}]")))
                    .collect::<Result<Vec<_>, _>>()?;
                Instance::Cms(CmsInstance::new(processes, matroid.to_matroid()?)?)
            }
            InstanceFile::Cabinets { matroid, cabinets } => {
                let cabinets = cabinets
                    .iter()
                    .enumerate()
                    .map(|(i, c)| {
                        Cabinet::new(c.iter().map(|s| Scenario { prob: s.p, values: s.values.clone() }).collect())
                            .map_err(|e| at(&format!("cabinets[{i}]"), e))
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                Instance::Cabinets(CabinetsInstance::new(cabinets, matroid.to_matroid()?)?)
            }
            InstanceFile::PandoraCabinets { matroid, cabinets } => {
                let cabinets = cabinets
                    .iter()
                    .enumerate()
                    .map(|(i, c)| {
                        c.iter()
                            .enumerate()
                            .map(|(j, d)| d.to_msp(&format!("cabinets[{i}][{j}]")))
                            .collect::<Result<Vec<_>, _>>()
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                Instance::PandoraCabinets(PandoraCabinetsInstance::new(cabinets, matroid.to_matroid()?)?)
            }
            InstanceFile::NoiPandora { boxes } => {
                let boxes = boxes
                    .iter()
                    .enumerate()
                    .map(|(i, b)| {
                        let dist = DiscreteDistribution::new(b.atoms.iter().map(|a| (a.value, a.p)))
                            .map_err(|e| at(&format!("boxes[{i}].atoms"), e))?;
                        Ok(PandoraBox { cost: b.cost, dist })
                    })
                    .collect::<Result<Vec<_>, Error>>()?;
                Instance::NoiPandora(NoiPandoraInstance::new(boxes)?)
            }
        })
    }

    pub fn from_instance(inst: &Instance) -> Self {
        match inst {
            Instance::Cms(i) => InstanceFile::Cms {
                matroid: MatroidFile::from_matroid(&i.matroid),
                processes: i.processes.iter().map(MspFile::from_msp).collect(),
            },
            Instance::Cabinets(i) => InstanceFile::Cabinets {
                matroid: MatroidFile::from_matroid(&i.matroid),
                cabinets: i
                    .cabinets
                    .iter()
                    .map(|c| c.scenarios().iter().map(|s| ScenarioFile { p: s.prob, values: s.values.clone() }).collect())
                    .collect(),
            },
            Instance::PandoraCabinets(i) => InstanceFile::PandoraCabinets {
                matroid: MatroidFile::from_matroid(&i.matroid),
                cabinets: i.cabinets.iter().map(|c| c.iter().map(MspFile::from_msp).collect()).collect(),
            },
            Instance::NoiPandora(i) => InstanceFile::NoiPandora {
                boxes: i
                    .boxes
                    .iter()
                    .map(|b| BoxFile {
                        cost: b.cost,
                        atoms: b.dist.atoms().iter().map(|&(value, p)| AtomFile { value, p }).collect(),
                    })
                    .collect(),
            },
        }
    }
}
