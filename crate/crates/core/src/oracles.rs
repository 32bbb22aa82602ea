//! Brute-force optimal adaptive algorithms for tiny instances.
//!
//! All oracles run exact dynamic programmes over the product of the
//! per-arrival states; the optimal claim set is chosen at the end with the
//! greedy maximum-weight basis.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::matroid::{members, Matroid};
use crate::model::{CabinetsInstance, CmsInstance, NoiPandoraInstance, PandoraCabinetsInstance};
use crate::TOLERANCE;

/// Default cap on the number of product states.
pub const STATE_BUDGET: usize = 2_000_000;

/// Dense memo table over a mixed-radix encoding of product states.
struct Product {
    stride: Vec<usize>,
    memo: Vec<f64>,
}

impl Product {
    fn new(radix: Vec<usize>, budget: usize) -> Result<Self> {
        let mut stride = Vec::with_capacity(radix.len());
        let mut size: usize = 1;
        for &r in &radix {
            stride.push(size);
            size = size
                .checked_mul(r)
                .filter(|&s| s <= budget)
                .ok_or(Error::SizeLimit { what: "product state space", limit: budget })?;
        }
        Ok(Self { stride, memo: vec![f64::NAN; size] })
    }

    fn encode(&self, digits: &[usize]) -> usize {
        digits.iter().zip(&self.stride).map(|(d, s)| d * s).sum()
    }
}

fn best_claim(matroid: &Matroid, values: &[f64]) -> f64 {
    members(matroid.max_weight_independent(values)).map(|e| values[e]).sum()
}

/// Optimal expected welfare of an adaptive algorithm that advances the
/// processes in any order and finally claims an independent set of them.
pub fn brute_force_opt_cms(inst: &CmsInstance) -> Result<f64> {
    brute_force_opt_cms_with_budget(inst, STATE_BUDGET)
}

pub fn brute_force_opt_cms_with_budget(inst: &CmsInstance, budget: usize) -> Result<f64> {
    let mut prod = Product::new(inst.processes.iter().map(|m| m.len()).collect(), budget)?;
    let mut digits: Vec<usize> = inst.processes.iter().map(|m| m.start()).collect();
    Ok(cms_value(inst, &mut prod, &mut digits))
}

fn cms_value(inst: &CmsInstance, prod: &mut Product, digits: &mut [usize]) -> f64 {
    let key = prod.encode(digits);
    if !prod.memo[key].is_nan() {
        return prod.memo[key];
    }
    let values: Vec<f64> = inst.processes.iter().zip(digits.iter()).map(|(m, &s)| m.value(s)).collect();
    let mut best = best_claim(&inst.matroid, &values);
    for i in 0..digits.len() {
        let s = digits[i];
        for a in inst.processes[i].actions(s) {
            let mut v = -a.cost;
            for &(t, p) in &a.transitions {
                digits[i] = t;
                v += p * cms_value(inst, prod, digits);
            }
            digits[i] = s;
            best = best.max(v);
        }
    }
    prod.memo[key] = best;
    best
}

/// Optimal expected welfare when each cabinet may have one drawer opened
/// for free and an independent set of opened cabinets is claimed.
pub fn brute_force_opt_cabinets(inst: &CabinetsInstance) -> Result<f64> {
    // per cabinet: 0 = unopened, then one code per (drawer, atom)
    let outcomes: Vec<Vec<Vec<(f64, f64)>>> = inst
        .cabinets
        .iter()
        .map(|c| (0..c.drawers()).map(|j| c.marginal(j).atoms().to_vec()).collect())
        .collect();
    let mut offsets: Vec<Vec<usize>> = Vec::new();
    let mut radix = Vec::new();
    for drawers in &outcomes {
        let mut off = Vec::with_capacity(drawers.len());
        let mut next = 1;
        for atoms in drawers {
            off.push(next);
            next += atoms.len();
        }
        offsets.push(off);
        radix.push(next);
    }
    let mut prod = Product::new(radix, STATE_BUDGET)?;
    let mut digits = vec![0; inst.cabinets.len()];
    let values = vec![0.0; inst.cabinets.len()];
    Ok(cabinets_value(inst, &outcomes, &offsets, &mut prod, &mut digits, values))
}

fn cabinets_value(
    inst: &CabinetsInstance,
    outcomes: &[Vec<Vec<(f64, f64)>>],
    offsets: &[Vec<usize>],
    prod: &mut Product,
    digits: &mut [usize],
    mut values: Vec<f64>,
) -> f64 {
    let key = prod.encode(digits);
    if !prod.memo[key].is_nan() {
        return prod.memo[key];
    }
    let mut best = best_claim(&inst.matroid, &values);
    for i in 0..digits.len() {
        if digits[i] != 0 {
            continue;
        }
        for (j, atoms) in outcomes[i].iter().enumerate() {
            let mut v = 0.0;
            for (k, &(x, p)) in atoms.iter().enumerate() {
                digits[i] = offsets[i][j] + k;
                values[i] = x;
                v += p * cabinets_value(inst, outcomes, offsets, prod, digits, values.clone());
            }
            digits[i] = 0;
            values[i] = 0.0;
            best = best.max(v);
        }
    }
    prod.memo[key] = best;
    best
}

/// Optimal expected welfare for cabinets of bandits: opening a drawer is
/// free, each advance pays its cost, and an independent set of opened
/// drawers is claimed at their current values.
pub fn brute_force_opt_pandora_cabinets(inst: &PandoraCabinetsInstance) -> Result<f64> {
    // per cabinet: 0 = unopened, then one code per (drawer, state)
    let mut offsets: Vec<Vec<usize>> = Vec::new();
    let mut radix = Vec::new();
    for drawers in &inst.cabinets {
        let mut off = Vec::with_capacity(drawers.len());
        let mut next = 1;
        for m in drawers {
            off.push(next);
            next += m.len();
        }
        offsets.push(off);
        radix.push(next);
    }
    let mut prod = Product::new(radix, STATE_BUDGET)?;
    let mut digits = vec![0; inst.cabinets.len()];
    Ok(pandora_value(inst, &offsets, &mut prod, &mut digits))
}

/// Drawer and state encoded by a nonzero digit.
fn decode(offsets: &[usize], digit: usize) -> (usize, usize) {
    let j = offsets.partition_point(|&o| o <= digit) - 1;
    (j, digit - offsets[j])
}

fn pandora_value(inst: &PandoraCabinetsInstance, offsets: &[Vec<usize>], prod: &mut Product, digits: &mut [usize]) -> f64 {
    let key = prod.encode(digits);
    if !prod.memo[key].is_nan() {
        return prod.memo[key];
    }
    let values: Vec<f64> = digits
        .iter()
        .enumerate()
        .map(|(i, &d)| {
            if d == 0 {
                0.0
            } else {
                let (j, s) = decode(&offsets[i], d);
                inst.cabinets[i][j].value(s)
            }
        })
        .collect();
    let mut best = best_claim(&inst.matroid, &values);
    for i in 0..digits.len() {
        let d = digits[i];
        if d == 0 {
            for (j, m) in inst.cabinets[i].iter().enumerate() {
                digits[i] = offsets[i][j] + m.start();
                best = best.max(pandora_value(inst, offsets, prod, digits));
            }
        } else {
            let (j, s) = decode(&offsets[i], d);
            for a in inst.cabinets[i][j].actions(s) {
                let mut v = -a.cost;
                for &(t, p) in &a.transitions {
                    digits[i] = offsets[i][j] + t;
                    v += p * pandora_value(inst, offsets, prod, digits);
                }
                best = best.max(v);
            }
        }
        digits[i] = d;
    }
    prod.memo[key] = best;
    best
}

/// Optimal expected value of Pandora's box with optional inspection: any
/// box may be taken blind for its mean or after paying to inspect it.
pub fn brute_force_opt_noi(inst: &NoiPandoraInstance) -> Result<f64> {
    let n = inst.boxes.len();
    if n > 20 {
        return Err(Error::SizeLimit { what: "boxes", limit: 20 });
    }
    let mut memo = HashMap::new();
    Ok(noi_value(inst, 0, 0.0, &mut memo))
}

fn noi_value(inst: &NoiPandoraInstance, opened: u32, best: f64, memo: &mut HashMap<(u32, u64), f64>) -> f64 {
    if let Some(&v) = memo.get(&(opened, best.to_bits())) {
        return v;
    }
    let mut v = best;
    for (i, b) in inst.boxes.iter().enumerate() {
        if opened >> i & 1 == 1 {
            continue;
        }
        v = v.max(b.dist.mean());
        let mut inspect = -b.cost;
        for &(x, p) in b.dist.atoms() {
            inspect += p * noi_value(inst, opened | 1 << i, best.max(x), memo);
        }
        v = v.max(inspect);
    }
    memo.insert((opened, best.to_bits()), v);
    v
}

/// Whether a relaxation objective dominates the brute-force optimum.
pub fn exante_upper_check(exante_objective: f64, brute_force_opt: f64) -> bool {
    exante_objective >= brute_force_opt - TOLERANCE
}
