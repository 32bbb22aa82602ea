use rand::Rng;

use super::distribution::DiscreteDistribution;
use super::msp::Msp;
use crate::error::{Error, Result};
use crate::matroid::Matroid;
use crate::TOLERANCE;

/// One joint outcome of all drawers of a cabinet.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub prob: f64,
    pub values: Vec<f64>,
}

/// Cabinet whose drawer values may be arbitrarily correlated, given as an
/// explicit list of scenarios.
#[derive(Debug, Clone, PartialEq)]
pub struct Cabinet {
    scenarios: Vec<Scenario>,
    drawers: usize,
}

impl Cabinet {
    pub fn new(scenarios: Vec<Scenario>) -> Result<Self> {
        let drawers = scenarios.first().map_or(0, |s| s.values.len());
        if drawers == 0 {
            return Err(Error::InvalidInstance("cabinet needs at least one drawer".into()));
        }
        let mut total = 0.0;
        for s in &scenarios {
            if s.values.len() != drawers {
                return Err(Error::InvalidInstance("scenarios disagree on drawer count".into()));
            }
            if !(s.prob.is_finite() && s.prob >= 0.0) {
                return Err(Error::InvalidInstance(format!("scenario probability {}", s.prob)));
            }
            if s.values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(Error::InvalidInstance("drawer values must be finite and nonnegative".into()));
            }
            total += s.prob;
        }
        if (total - 1.0).abs() > TOLERANCE {
            return Err(Error::InvalidInstance(format!("scenario probabilities sum to {total}")));
        }
        let scenarios = scenarios.into_iter().filter(|s| s.prob > 0.0).collect();
        Ok(Self { scenarios, drawers })
    }

    /// Cabinet whose drawers are independent with the given laws.
    pub fn independent(drawers: &[DiscreteDistribution]) -> Result<Self> {
        let mut scenarios = vec![Scenario { prob: 1.0, values: Vec::new() }];
        for d in drawers {
            let mut next = Vec::with_capacity(scenarios.len() * d.len());
            for s in &scenarios {
                for &(v, p) in d.atoms() {
                    let mut values = s.values.clone();
                    values.push(v);
                    next.push(Scenario { prob: s.prob * p, values });
                }
            }
            scenarios = next;
        }
        Self::new(scenarios)
    }

    pub fn drawers(&self) -> usize {
        self.drawers
    }

    pub fn scenarios(&self) -> &[Scenario] {
        &self.scenarios
    }

    pub fn marginal(&self, drawer: usize) -> DiscreteDistribution {
        DiscreteDistribution::normalized(
            self.scenarios.iter().map(|s| (s.values[drawer], s.prob)).collect(),
        )
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> &Scenario {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for s in &self.scenarios {
            acc += s.prob;
            if u < acc {
                return s;
            }
        }
        &self.scenarios[self.scenarios.len() - 1]
    }
}

fn check_ground(matroid: &Matroid, n: usize) -> Result<()> {
    if matroid.ground_size() != n {
        return Err(Error::InvalidInstance(format!(
            "matroid has {} elements but instance has {n} arrivals",
            matroid.ground_size()
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct CabinetsInstance {
    pub cabinets: Vec<Cabinet>,
    pub matroid: Matroid,
}

impl CabinetsInstance {
    pub fn new(cabinets: Vec<Cabinet>, matroid: Matroid) -> Result<Self> {
        check_ground(&matroid, cabinets.len())?;
        Ok(Self { cabinets, matroid })
    }
}

/// Cabinets whose drawers hold bandit processes.
#[derive(Debug, Clone, PartialEq)]
pub struct PandoraCabinetsInstance {
    pub cabinets: Vec<Vec<Msp>>,
    pub matroid: Matroid,
}

impl PandoraCabinetsInstance {
    pub fn new(cabinets: Vec<Vec<Msp>>, matroid: Matroid) -> Result<Self> {
        check_ground(&matroid, cabinets.len())?;
        for drawers in &cabinets {
            if drawers.is_empty() {
                return Err(Error::InvalidInstance("cabinet needs at least one drawer".into()));
            }
            for m in drawers {
                let v = m.validate();
                if !v.is_empty() {
                    return Err(Error::InvalidProcess(v));
                }
                m.require_bandit()?;
            }
        }
        Ok(Self { cabinets, matroid })
    }
}

/// Independent Markov search processes under a matroid constraint.
#[derive(Debug, Clone, PartialEq)]
pub struct CmsInstance {
    pub processes: Vec<Msp>,
    pub matroid: Matroid,
}

impl CmsInstance {
    pub fn new(processes: Vec<Msp>, matroid: Matroid) -> Result<Self> {
        check_ground(&matroid, processes.len())?;
        for m in &processes {
            let v = m.validate();
            if !v.is_empty() {
                return Err(Error::InvalidProcess(v));
            }
        }
        Ok(Self { processes, matroid })
    }
}

/// A box that may be opened at a cost or taken blind.
#[derive(Debug, Clone, PartialEq)]
pub struct PandoraBox {
    pub cost: f64,
    pub dist: DiscreteDistribution,
}

/// Pandora's box where boxes may be selected without inspection.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiPandoraInstance {
    pub boxes: Vec<PandoraBox>,
}

impl NoiPandoraInstance {
    pub fn new(boxes: Vec<PandoraBox>) -> Result<Self> {
        for b in &boxes {
            if !(b.cost.is_finite() && b.cost > 0.0) {
                return Err(Error::InvalidInstance(format!("inspection cost {} is not positive", b.cost)));
            }
            if b.dist.atoms().iter().any(|a| a.0 < 0.0) {
                return Err(Error::InvalidInstance("box values must be nonnegative".into()));
            }
        }
        Ok(Self { boxes })
    }
}
