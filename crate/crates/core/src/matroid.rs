//! Matroid oracles, the matroid polytope, greedy optimisation and pipage
//! rounding of fractional points.
//!
//! Subsets of the ground set `{0, …, n-1}` are bitmasks.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};

use crate::error::{Error, Result};
use crate::{SimRng, TOLERANCE};

pub type Subset = u64;

/// Largest ground set handled by subset enumeration.
pub const ENUMERATION_LIMIT: usize = 20;
/// Largest ground set for explicit matroids and exact decompositions.
pub const EXPLICIT_LIMIT: usize = 12;

const SNAP: f64 = 1e-9;
const PRUNE: f64 = 1e-12;

pub fn subset_of(elements: impl IntoIterator<Item = usize>) -> Subset {
    elements.into_iter().fold(0, |acc, e| acc | (1 << e))
}

pub fn members(s: Subset) -> impl Iterator<Item = usize> {
    (0..64).filter(move |&e| s >> e & 1 == 1)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MatroidKind {
    Uniform { rank: usize },
    Partition { block_of: Vec<usize>, caps: Vec<usize> },
    /// Membership table indexed by subset.
    Explicit { independent: Vec<bool> },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Matroid {
    n: usize,
    kind: MatroidKind,
}

/// Outcome of a matroid polytope membership test.
#[derive(Debug, Clone, PartialEq)]
pub enum PolytopeCheck {
    Inside,
    /// Coordinate outside `[0, 1]`.
    OutOfBox { index: usize, value: f64 },
    /// The subset with the largest excess `q(S) - rank(S)`.
    Violated { set: Subset, excess: f64 },
}

impl PolytopeCheck {
    pub fn is_inside(&self) -> bool {
        matches!(self, PolytopeCheck::Inside)
    }
}

impl Matroid {
    pub fn uniform(n: usize, rank: usize) -> Result<Self> {
        check_ground(n)?;
        Ok(Self { n, kind: MatroidKind::Uniform { rank } })
    }

    /// Partition matroid: at most `caps[b]` elements from block `b`.
    pub fn partition(block_of: Vec<usize>, caps: Vec<usize>) -> Result<Self> {
        check_ground(block_of.len())?;
        if let Some(&b) = block_of.iter().find(|&&b| b >= caps.len()) {
            return Err(Error::InvalidInstance(format!("block {b} has no capacity")));
        }
        Ok(Self { n: block_of.len(), kind: MatroidKind::Partition { block_of, caps } })
    }

    /// Matroid given by its list of independent sets, which must be
    /// downward closed and satisfy the exchange property.
    pub fn explicit(n: usize, sets: &[Subset]) -> Result<Self> {
        if n > EXPLICIT_LIMIT {
            return Err(Error::SizeLimit { what: "explicit matroid ground set", limit: EXPLICIT_LIMIT });
        }
        let full: Subset = (1 << n) - 1;
        let mut independent = vec![false; 1 << n];
        for &s in sets {
            if s & !full != 0 {
                return Err(Error::InvalidInstance(format!("set {s:#b} leaves the ground set")));
            }
            independent[s as usize] = true;
        }
        if !independent[0] {
            return Err(Error::InvalidInstance("the empty set must be independent".into()));
        }
        for s in 0..independent.len() {
            if independent[s] && members(s as Subset).any(|e| !independent[s & !(1 << e)]) {
                return Err(Error::InvalidInstance(format!("family is not downward closed at {s:#b}")));
            }
        }
        // with downward closure, exchange between sizes k and k + 1 suffices
        let family: Vec<usize> = (0..independent.len()).filter(|&s| independent[s]).collect();
        for &i in &family {
            let ki = i.count_ones();
            for &j in &family {
                if j.count_ones() == ki + 1 && !members((j & !i) as Subset).any(|e| independent[i | 1 << e]) {
                    return Err(Error::InvalidInstance(format!(
                        "exchange fails between {i:#b} and {j:#b}"
                    )));
                }
            }
        }
        Ok(Self { n, kind: MatroidKind::Explicit { independent } })
    }

    pub fn ground_size(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> &MatroidKind {
        &self.kind
    }

    pub fn ground(&self) -> Subset {
        if self.n == 64 { Subset::MAX } else { (1 << self.n) - 1 }
    }

    pub fn is_independent(&self, s: Subset) -> bool {
        if s & !self.ground() != 0 {
            return false;
        }
        match &self.kind {
            MatroidKind::Uniform { rank } => s.count_ones() as usize <= *rank,
            MatroidKind::Partition { block_of, caps } => {
                let mut used = vec![0usize; caps.len()];
                for e in members(s) {
                    used[block_of[e]] += 1;
                    if used[block_of[e]] > caps[block_of[e]] {
                        return false;
                    }
                }
                true
            }
            MatroidKind::Explicit { independent } => independent[s as usize],
        }
    }

    /// Size of a largest independent subset of `s`.
    pub fn rank(&self, s: Subset) -> usize {
        let s = s & self.ground();
        match &self.kind {
            MatroidKind::Uniform { rank } => (s.count_ones() as usize).min(*rank),
            MatroidKind::Partition { block_of, caps } => {
                let mut used = vec![0usize; caps.len()];
                for e in members(s) {
                    used[block_of[e]] += 1;
                }
                used.iter().zip(caps).map(|(u, c)| (*u).min(*c)).sum()
            }
            MatroidKind::Explicit { .. } => {
                let mut basis = 0;
                for e in members(s) {
                    if self.is_independent(basis | 1 << e) {
                        basis |= 1 << e;
                    }
                }
                basis.count_ones() as usize
            }
        }
    }

    /// Rank of every subset, indexed by bitmask.
    pub fn rank_table(&self) -> Result<Vec<u32>> {
        check_enumerable(self.n)?;
        Ok((0..1u64 << self.n).map(|s| self.rank(s) as u32).collect())
    }

    /// Tests `0 <= q <= 1` and `q(S) <= rank(S)` for every subset `S`.
    pub fn polytope_member(&self, q: &[f64]) -> Result<PolytopeCheck> {
        self.check_point(q)?;
        check_enumerable(self.n)?;
        if let Some((index, &value)) = q
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v >= -TOLERANCE && **v <= 1.0 + TOLERANCE))
        {
            return Ok(PolytopeCheck::OutOfBox { index, value });
        }
        let sums = subset_sums(q);
        let mut worst: Option<(Subset, f64)> = None;
        for (s, &sum) in sums.iter().enumerate() {
            let excess = sum - self.rank(s as Subset) as f64;
            if excess > TOLERANCE && worst.is_none_or(|w| excess > w.1) {
                worst = Some((s as Subset, excess));
            }
        }
        Ok(match worst {
            None => PolytopeCheck::Inside,
            Some((set, excess)) => PolytopeCheck::Violated { set, excess },
        })
    }

    /// Greedy maximum-weight independent set; nonpositive weights are
    /// skipped and ties go to the lower index.
    pub fn max_weight_independent(&self, w: &[f64]) -> Subset {
        self.greedy_extend(0, w, self.ground())
    }

    /// Greedily adds elements of `allowed` to the independent set `base` in
    /// order of decreasing positive weight; returns only the added elements.
    fn greedy_extend(&self, base: Subset, w: &[f64], allowed: Subset) -> Subset {
        let mut order: Vec<usize> = members(allowed & !base).filter(|&e| e < w.len() && w[e] > 0.0).collect();
        order.sort_by(|&a, &b| w[b].total_cmp(&w[a]));
        let mut added = 0;
        for e in order {
            if self.is_independent(base | added | 1 << e) {
                added |= 1 << e;
            }
        }
        added
    }

    /// Best total weight `z` obtainable from elements of `f` outside `s`
    /// while keeping the union with `s` independent.
    pub fn remaining_value(&self, z: &[f64], f: Subset, s: Subset) -> Result<f64> {
        if !self.is_independent(s) {
            return Err(Error::Precondition(format!("set {s:#b} is not independent")));
        }
        let added = self.greedy_extend(s, z, f & !s);
        Ok(members(added).map(|e| z[e]).sum())
    }

    fn check_point(&self, q: &[f64]) -> Result<()> {
        if q.len() != self.n {
            return Err(Error::Parameter(format!(
                "point has {} coordinates, matroid has {} elements",
                q.len(),
                self.n
            )));
        }
        Ok(())
    }

    fn require_member(&self, q: &[f64]) -> Result<()> {
        match self.polytope_member(q)? {
            PolytopeCheck::Inside => Ok(()),
            other => Err(Error::Precondition(format!("point outside the matroid polytope: {other:?}"))),
        }
    }
}

fn check_ground(n: usize) -> Result<()> {
    if n > 64 {
        return Err(Error::SizeLimit { what: "matroid ground set", limit: 64 });
    }
    Ok(())
}

fn check_enumerable(n: usize) -> Result<()> {
    if n > ENUMERATION_LIMIT {
        return Err(Error::SizeLimit { what: "subset enumeration ground set", limit: ENUMERATION_LIMIT });
    }
    Ok(())
}

fn subset_sums(q: &[f64]) -> Vec<f64> {
    let mut sums = vec![0.0; 1 << q.len()];
    for s in 1..sums.len() {
        let low = s.trailing_zeros() as usize;
        sums[s] = sums[s & (s - 1)] + q[low];
    }
    sums
}

/// One pipage move: `x + plus·d` or `x - minus·d` where `d` is
/// `e_i - e_j`, or `e_i` when `j` is absent.
#[derive(Debug, Clone, Copy)]
struct PipageMove {
    i: usize,
    j: Option<usize>,
    plus: f64,
    minus: f64,
}

impl PipageMove {
    fn prob_plus(&self) -> f64 {
        self.minus / (self.plus + self.minus)
    }

    fn apply(&self, x: &mut [f64], up: bool) {
        let step = if up { self.plus } else { -self.minus };
        x[self.i] += step;
        if let Some(j) = self.j {
            x[j] -= step;
        }
        for v in x.iter_mut() {
            if *v < SNAP {
                *v = 0.0;
            } else if *v > 1.0 - SNAP {
                *v = 1.0;
            }
        }
    }
}

fn fractional(x: &[f64]) -> Subset {
    subset_of((0..x.len()).filter(|&k| x[k] > 0.0 && x[k] < 1.0))
}

/// Chooses the next move, or `None` when `x` is integral.
fn pipage_move(rank: &[u32], x: &[f64]) -> Option<PipageMove> {
    let frac = fractional(x);
    if frac == 0 {
        return None;
    }
    let sums = subset_sums(x);
    let slack = |s: usize| (rank[s] as f64 - sums[s]).max(0.0);
    // smallest tight set meeting the fractional coordinates
    let mut best: Option<usize> = None;
    for s in 1..sums.len() {
        if s as Subset & frac != 0
            && slack(s) <= SNAP
            && best.is_none_or(|b| s.count_ones() < b.count_ones())
        {
            best = Some(s);
        }
    }
    let mut pool = best.map_or(frac, |t| t as Subset & frac);
    if pool.count_ones() < 2 {
        pool = frac;
    }
    let mut it = members(pool);
    let i = it.next().expect("nonempty");
    let j = it.next();
    let mut mv = match j {
        Some(j) => PipageMove { i, j: Some(j), plus: (1.0 - x[i]).min(x[j]), minus: x[i].min(1.0 - x[j]) },
        None => PipageMove { i, j: None, plus: 1.0 - x[i], minus: x[i] },
    };
    for s in 1..sums.len() {
        let has_i = s >> i & 1 == 1;
        let has_j = j.is_some_and(|j| s >> j & 1 == 1);
        if has_i && !has_j {
            mv.plus = mv.plus.min(slack(s));
        } else if has_j && !has_i {
            mv.minus = mv.minus.min(slack(s));
        }
    }
    Some(mv)
}

fn iteration_cap(n: usize) -> usize {
    100 + 20 * n * n
}

fn rounded(x: &[f64]) -> Subset {
    subset_of((0..x.len()).filter(|&k| x[k] >= 0.5))
}

/// Randomised pipage rounding of a fixed point; reuses the rank table across
/// draws.
#[derive(Debug, Clone)]
pub struct PipageSampler<'a> {
    matroid: &'a Matroid,
    rank: Vec<u32>,
    q: Vec<f64>,
}

impl<'a> PipageSampler<'a> {
    pub fn new(matroid: &'a Matroid, q: &[f64]) -> Result<Self> {
        matroid.require_member(q)?;
        let q = q.iter().map(|v| v.clamp(0.0, 1.0)).collect();
        Ok(Self { matroid, rank: matroid.rank_table()?, q })
    }

    /// Independent set containing each element `i` with probability `q_i`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Subset> {
        let mut x = self.q.clone();
        for v in x.iter_mut() {
            if *v < SNAP {
                *v = 0.0;
            } else if *v > 1.0 - SNAP {
                *v = 1.0;
            }
        }
        for _ in 0..iteration_cap(x.len()) {
            match pipage_move(&self.rank, &x) {
                None => {
                    let f = rounded(&x);
                    debug_assert!(self.matroid.is_independent(f));
                    return Ok(f);
                }
                Some(mv) => {
                    let up = rng.random::<f64>() < mv.prob_plus();
                    mv.apply(&mut x, up);
                }
            }
        }
        Err(Error::Precondition("pipage rounding did not converge".into()))
    }
}

/// Draws an independent set with marginals `q` using a generator seeded
/// from `seed`.
pub fn sample_feasible_set(m: &Matroid, q: &[f64], seed: u64) -> Result<Subset> {
    let mut rng = SimRng::seed_from_u64(seed);
    PipageSampler::new(m, q)?.sample(&mut rng)
}

/// Explicit distribution over independent sets with marginals `q`, obtained
/// by following both branches of every pipage move.
pub fn exact_dq(m: &Matroid, q: &[f64]) -> Result<Vec<(f64, Subset)>> {
    if m.ground_size() > EXPLICIT_LIMIT {
        return Err(Error::SizeLimit { what: "exact decomposition ground set", limit: EXPLICIT_LIMIT });
    }
    m.require_member(q)?;
    let rank = m.rank_table()?;
    let start: Vec<f64> = q
        .iter()
        .map(|&v| if v < SNAP { 0.0 } else if v > 1.0 - SNAP { 1.0 } else { v })
        .collect();
    let key = |x: &[f64]| x.iter().map(|v| v.to_bits()).collect::<Vec<u64>>();
    let mut frontier: BTreeMap<Vec<u64>, (Vec<f64>, f64)> = BTreeMap::new();
    frontier.insert(key(&start), (start, 1.0));
    let mut leaves: BTreeMap<Subset, f64> = BTreeMap::new();
    const FRONTIER_LIMIT: usize = 1 << 20;
    for _ in 0..=iteration_cap(q.len()) {
        if frontier.is_empty() {
            break;
        }
        let mut next: BTreeMap<Vec<u64>, (Vec<f64>, f64)> = BTreeMap::new();
        for (_, (x, w)) in frontier {
            match pipage_move(&rank, &x) {
                None => *leaves.entry(rounded(&x)).or_insert(0.0) += w,
                Some(mv) => {
                    let p = mv.prob_plus();
                    for (up, pw) in [(true, p), (false, 1.0 - p)] {
                        let wt = w * pw;
                        if wt < PRUNE {
                            continue;
                        }
                        let mut y = x.clone();
                        mv.apply(&mut y, up);
                        next.entry(key(&y)).or_insert_with(|| (y, 0.0)).1 += wt;
                    }
                }
            }
        }
        if next.len() > FRONTIER_LIMIT {
            return Err(Error::SizeLimit { what: "exact decomposition frontier", limit: FRONTIER_LIMIT });
        }
        frontier = next;
    }
    if !frontier.is_empty() {
        return Err(Error::Precondition("pipage rounding did not converge".into()));
    }
    Ok(leaves.into_iter().filter(|l| l.1 >= PRUNE).map(|(s, p)| (p, s)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn marginals(n: usize, dq: &[(f64, Subset)]) -> Vec<f64> {
        (0..n).map(|i| dq.iter().filter(|d| d.1 >> i & 1 == 1).map(|d| d.0).sum()).collect()
    }

    #[test]
    fn rank_examples() {
        let u = Matroid::uniform(3, 2).unwrap();
        assert_eq!(u.rank(0b111), 2);
        assert_eq!(u.rank(0), 0);
        let p = Matroid::partition(vec![0, 0, 1], vec![1, 1]).unwrap();
        assert_eq!(p.rank(0b011), 1);
        assert_eq!(p.rank(0b111), 2);
    }

    #[test]
    fn polytope_examples() {
        let u = Matroid::uniform(2, 1).unwrap();
        assert!(u.polytope_member(&[0.5, 0.5]).unwrap().is_inside());
        match u.polytope_member(&[0.7, 0.7]).unwrap() {
            PolytopeCheck::Violated { set, excess } => {
                assert_eq!(set, 0b11);
                assert!((excess - 0.4).abs() < 1e-12);
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            u.polytope_member(&[-0.1, 0.5]).unwrap(),
            PolytopeCheck::OutOfBox { index: 0, .. }
        ));
    }

    #[test]
    fn greedy_examples() {
        let u = Matroid::uniform(3, 2).unwrap();
        assert_eq!(u.max_weight_independent(&[5.0, 3.0, 1.0]), 0b011);
        assert_eq!(u.max_weight_independent(&[-1.0, 0.0, -2.0]), 0);
        let p = Matroid::partition(vec![0, 0, 1], vec![1, 1]).unwrap();
        assert_eq!(p.max_weight_independent(&[5.0, 3.0, 4.0]), 0b101);
    }

    #[test]
    fn remaining_value_examples() {
        let one = Matroid::uniform(1, 1).unwrap();
        assert_eq!(one.remaining_value(&[5.0], 0b1, 0).unwrap(), 5.0);
        assert_eq!(one.remaining_value(&[5.0], 0b1, 0b1).unwrap(), 0.0);
        let u = Matroid::uniform(3, 2).unwrap();
        assert_eq!(u.remaining_value(&[5.0, 3.0, 1.0], 0b111, 0b001).unwrap(), 3.0);
        assert_eq!(u.remaining_value(&[5.0, 3.0, 1.0], 0, 0b001).unwrap(), 0.0);
        assert!(matches!(u.remaining_value(&[1.0; 3], 0b111, 0b111), Err(Error::Precondition(_))));
    }

    #[test]
    fn explicit_validation() {
        // graphic matroid of a triangle: any two edges
        assert!(Matroid::explicit(3, &[0, 1, 2, 4, 3, 5, 6]).is_ok());
        // not downward closed
        assert!(Matroid::explicit(2, &[0, 3]).is_err());
        // {0} and {1, 2} with nothing to exchange
        assert!(Matroid::explicit(3, &[0, 1, 2, 4, 6]).is_err());
    }

    #[test]
    fn exact_decompositions() {
        let u = Matroid::uniform(2, 1).unwrap();
        let dq = exact_dq(&u, &[0.5, 0.5]).unwrap();
        assert_eq!(dq, vec![(0.5, 0b01), (0.5, 0b10)]);

        let p = Matroid::partition(vec![0, 0, 1], vec![1, 1]).unwrap();
        let dq = exact_dq(&p, &[0.5, 0.5, 1.0]).unwrap();
        assert_eq!(dq, vec![(0.5, 0b101), (0.5, 0b110)]);

        let dq = exact_dq(&p, &[1.0, 0.0, 1.0]).unwrap();
        assert_eq!(dq, vec![(1.0, 0b101)]);
    }

    #[test]
    fn exact_decomposition_reconstructs_q() {
        let m = Matroid::uniform(4, 2).unwrap();
        let q = [0.3, 0.7, 0.45, 0.25];
        let dq = exact_dq(&m, &q).unwrap();
        for (qi, mi) in q.iter().zip(marginals(4, &dq)) {
            assert!((qi - mi).abs() < 1e-9);
        }
        assert!(dq.iter().all(|d| m.is_independent(d.1)));
        assert!((dq.iter().map(|d| d.0).sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn sampler_rejects_infeasible_point() {
        let u = Matroid::uniform(2, 1).unwrap();
        assert!(matches!(sample_feasible_set(&u, &[0.7, 0.7], 1), Err(Error::Precondition(_))));
    }

    #[test]
    fn integral_point_is_deterministic() {
        let p = Matroid::partition(vec![0, 0, 1], vec![1, 1]).unwrap();
        for seed in 0..10 {
            assert_eq!(sample_feasible_set(&p, &[0.0, 1.0, 1.0], seed).unwrap(), 0b110);
        }
    }

    #[test]
    fn sampled_marginals_partition() {
        let p = Matroid::partition(vec![0, 0, 1], vec![1, 1]).unwrap();
        let sampler = PipageSampler::new(&p, &[0.5, 0.5, 1.0]).unwrap();
        let mut rng = SimRng::seed_from_u64(3);
        let n = 100_000;
        let mut first = 0;
        for _ in 0..n {
            let f = sampler.sample(&mut rng).unwrap();
            assert_eq!(f & 0b100, 0b100);
            assert_eq!((f & 0b011).count_ones(), 1);
            first += (f & 1) as usize;
        }
        let freq = first as f64 / n as f64;
        assert!((freq - 0.5).abs() < 4.0 * 0.5 / (n as f64).sqrt());
    }
}
