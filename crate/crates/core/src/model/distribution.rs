use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::TOLERANCE;

/// Finite-support law on the reals.
///
/// Atoms are kept sorted by value with duplicates merged and zero-mass atoms
/// dropped, so two equal laws always have identical atom lists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteDistribution {
    atoms: Vec<(f64, f64)>,
}

fn same_value(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
}

impl DiscreteDistribution {
    /// Builds a law from `(value, probability)` pairs.
    pub fn new(atoms: impl IntoIterator<Item = (f64, f64)>) -> Result<Self> {
        let atoms: Vec<(f64, f64)> = atoms.into_iter().collect();
        for &(v, p) in &atoms {
            if !v.is_finite() {
                return Err(Error::Parameter(format!("support value {v} is not finite")));
            }
            if !(p.is_finite() && p >= 0.0) {
                return Err(Error::Parameter(format!("probability {p} is not in [0, 1]")));
            }
        }
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        if (total - 1.0).abs() > TOLERANCE {
            return Err(Error::Parameter(format!(
                "probabilities sum to {total}, expected 1"
            )));
        }
        Ok(Self::normalized(atoms))
    }

    pub fn point(value: f64) -> Self {
        Self {
            atoms: vec![(value, 1.0)],
        }
    }

    /// Sorts, merges and drops zero atoms without checking the total mass.
    pub(crate) fn normalized(mut atoms: Vec<(f64, f64)>) -> Self {
        atoms.retain(|a| a.1 > 0.0);
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(atoms.len());
        for (v, p) in atoms {
            match merged.last_mut() {
                Some(last) if same_value(last.0, v) => last.1 += p,
                _ => merged.push((v, p)),
            }
        }
        Self { atoms: merged }
    }

    /// Atoms in ascending order of value.
    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.atoms.iter().map(|&(v, p)| v * p).sum()
    }

    pub fn min_value(&self) -> f64 {
        self.atoms[0].0
    }

    pub fn max_value(&self) -> f64 {
        self.atoms[self.atoms.len() - 1].0
    }

    /// `E[(X - t)^+]`.
    pub fn expected_excess(&self, t: f64) -> f64 {
        self.atoms
            .iter()
            .rev()
            .take_while(|a| a.0 > t)
            .map(|&(v, p)| p * (v - t))
            .sum()
    }

    pub fn prob_at_least(&self, t: f64) -> f64 {
        self.atoms.iter().filter(|a| a.0 >= t).map(|a| a.1).sum()
    }

    pub fn prob_greater(&self, t: f64) -> f64 {
        self.atoms.iter().filter(|a| a.0 > t).map(|a| a.1).sum()
    }

    /// `E[X · 1{X >= t}]`.
    pub fn upper_mass(&self, t: f64) -> f64 {
        self.atoms
            .iter()
            .filter(|a| a.0 >= t)
            .map(|&(v, p)| v * p)
            .sum()
    }

    /// `E[min(X, cap)]`.
    pub fn expected_min(&self, cap: f64) -> f64 {
        self.atoms.iter().map(|&(v, p)| v.min(cap) * p).sum()
    }

    /// Law of `min(X, cap)`.
    pub fn capped(&self, cap: f64) -> Self {
        Self::normalized(self.atoms.iter().map(|&(v, p)| (v.min(cap), p)).collect())
    }

    /// Probability mixture `Σ w_k · D_k`; weights must sum to one.
    pub fn mixture<'a>(parts: impl IntoIterator<Item = (f64, &'a DiscreteDistribution)>) -> Self {
        let atoms = parts
            .into_iter()
            .flat_map(|(w, d)| d.atoms.iter().map(move |&(v, p)| (v, w * p)))
            .collect();
        Self::normalized(atoms)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for &(v, p) in &self.atoms {
            acc += p;
            if u < acc {
                return v;
            }
        }
        self.max_value()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn drops_zero_atoms_and_merges_duplicates() {
        let d = DiscreteDistribution::new([(3.0, 0.25), (1.0, 0.0), (3.0, 0.25), (0.0, 0.5)]).unwrap();
        assert_eq!(d.atoms(), &[(0.0, 0.5), (3.0, 0.5)]);
    }

    #[test]
    fn rejects_bad_mass() {
        assert!(DiscreteDistribution::new([(1.0, 0.5), (2.0, 0.4)]).is_err());
        assert!(DiscreteDistribution::new([(f64::NAN, 1.0)]).is_err());
        assert!(DiscreteDistribution::new([(1.0, -0.5), (2.0, 1.5)]).is_err());
    }

    #[test]
    fn excess_and_capping() {
        let d = DiscreteDistribution::new([(0.0, 0.5), (1.0, 0.5)]).unwrap();
        assert!((d.expected_excess(0.8) - 0.1).abs() < 1e-15);
        assert_eq!(d.capped(0.8).atoms(), &[(0.0, 0.5), (0.8, 0.5)]);
        assert!((d.expected_min(0.8) - 0.4).abs() < 1e-15);
        assert_eq!(d.prob_at_least(1.0), 0.5);
        assert_eq!(d.prob_greater(1.0), 0.0);
    }

    #[test]
    fn mixture_weights_atoms() {
        let a = DiscreteDistribution::point(0.0);
        let b = DiscreteDistribution::new([(0.0, 0.5), (0.8, 0.5)]).unwrap();
        let m = DiscreteDistribution::mixture([(0.5, &a), (0.5, &b)]);
        assert_eq!(m.atoms(), &[(0.0, 0.75), (0.8, 0.25)]);
    }
}
