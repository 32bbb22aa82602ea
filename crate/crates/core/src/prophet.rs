//! Online threshold algorithms over a matroid and a Monte Carlo harness for
//! their welfare.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};

use crate::error::{Error, Result};
use crate::exante::{dag_curve, exante_opt_cms, CurveMode, ExAnteSolution, WitnessPart};
use crate::indices::{compute_indices, threshold_policy_with, CappedValueTable};
use crate::matroid::{exact_dq, Matroid, PipageSampler, Subset, EXPLICIT_LIMIT};
use crate::model::{simulate_with, CabinetsInstance, CmsInstance, DiscreteDistribution, PandoraCabinetsInstance, Terminal};
use crate::saup::{maxsaup, MaxSaup};
use crate::SimRng;

/// How `E_{F'}[·]` in the threshold formula is evaluated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThresholdMode {
    /// Exact decomposition of `q`; needs at most 12 elements.
    Exact,
    /// Average over a fixed pool of sampled feasible sets.
    MonteCarlo { samples: usize },
}

pub const DEFAULT_THRESHOLD_SAMPLES: usize = 2000;

impl ThresholdMode {
    /// Exact when the ground set is small enough, sampled otherwise.
    pub fn auto(n: usize) -> Self {
        if n <= EXPLICIT_LIMIT {
            ThresholdMode::Exact
        } else {
            ThresholdMode::MonteCarlo { samples: DEFAULT_THRESHOLD_SAMPLES }
        }
    }
}

/// Computes `T_i = ½ E_{F'}[R'(A) - R'(A ∪ {i})]` with `Z'_j = z_j·1{j ∈ F'}`
/// and `F'` distributed with marginals `q`; memoised on `(i, A)`.
#[derive(Debug, Clone)]
pub struct ThresholdOracle {
    matroid: Matroid,
    z: Vec<f64>,
    support: Vec<(f64, Subset)>,
    memo: HashMap<(usize, Subset), f64>,
}

impl ThresholdOracle {
    pub fn new(matroid: &Matroid, q: &[f64], z: &[f64], mode: ThresholdMode, seed: u64) -> Result<Self> {
        if z.len() != matroid.ground_size() {
            return Err(Error::Parameter(format!("{} weights for {} elements", z.len(), matroid.ground_size())));
        }
        if z.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Parameter("weights must be finite and nonnegative".into()));
        }
        let support = match mode {
            ThresholdMode::Exact => exact_dq(matroid, q)?,
            ThresholdMode::MonteCarlo { samples } => {
                if samples == 0 {
                    return Err(Error::Parameter("need at least one sample".into()));
                }
                let sampler = PipageSampler::new(matroid, q)?;
                let mut rng = SimRng::seed_from_u64(seed);
                let w = 1.0 / samples as f64;
                (0..samples).map(|_| sampler.sample(&mut rng).map(|f| (w, f))).collect::<Result<_>>()?
            }
        };
        Ok(Self { matroid: matroid.clone(), z: z.to_vec(), support, memo: HashMap::new() })
    }

    /// Threshold for arrival `i` given the selected set `a`; infinite when
    /// `a ∪ {i}` is dependent.
    pub fn threshold(&mut self, i: usize, a: Subset) -> Result<f64> {
        let with = a | 1 << i;
        if !self.matroid.is_independent(with) {
            return Ok(f64::INFINITY);
        }
        if let Some(&t) = self.memo.get(&(i, a)) {
            return Ok(t);
        }
        let mut t = 0.0;
        for &(p, f) in &self.support {
            let before = self.matroid.remaining_value(&self.z, f, a)?;
            let after = self.matroid.remaining_value(&self.z, f, with)?;
            t += p * (before - after);
        }
        let t = (0.5 * t).max(0.0);
        self.memo.insert((i, a), t);
        Ok(t)
    }

    pub fn matroid(&self) -> &Matroid {
        &self.matroid
    }
}

/// What happened to one arrival.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrivalRecord {
    /// Infinite when the arrival was blocked by the matroid.
    pub threshold: f64,
    /// Drawer opened, if any.
    pub drawer: Option<usize>,
    pub claimed: bool,
    /// Claimed value minus costs incurred on this arrival.
    pub contribution: f64,
}

impl ArrivalRecord {
    fn blocked() -> Self {
        Self { threshold: f64::INFINITY, drawer: None, claimed: false, contribution: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub arrivals: Vec<ArrivalRecord>,
    pub selected: Subset,
    pub welfare: f64,
    pub seed: u64,
}

impl RunRecord {
    fn new(seed: u64) -> Self {
        Self { arrivals: Vec::new(), selected: 0, welfare: 0.0, seed }
    }

    fn push(&mut self, i: usize, r: ArrivalRecord) {
        if r.claimed {
            self.selected |= 1 << i;
        }
        self.welfare += r.contribution;
        self.arrivals.push(r);
    }
}

/// One seeded execution of an online algorithm.
pub trait Runner {
    fn run(&mut self, seed: u64) -> Result<RunRecord>;
}

/// Matroid-cabinets threshold algorithm: at each feasible arrival open the
/// drawer maximising `E[(X_j - T_i)^+]` and claim iff its value reaches
/// `T_i`.
#[derive(Debug, Clone)]
pub struct MatroidCabinetsRunner<'a> {
    inst: &'a CabinetsInstance,
    oracle: ThresholdOracle,
    marginals: Vec<Vec<DiscreteDistribution>>,
    choice: HashMap<(usize, u64), usize>,
}

impl<'a> MatroidCabinetsRunner<'a> {
    pub fn new(inst: &'a CabinetsInstance, q: &[f64], z: &[f64], mode: ThresholdMode, seed: u64) -> Result<Self> {
        let oracle = ThresholdOracle::new(&inst.matroid, q, z, mode, seed)?;
        let marginals = inst.cabinets.iter().map(|c| (0..c.drawers()).map(|j| c.marginal(j)).collect()).collect();
        Ok(Self { inst, oracle, marginals, choice: HashMap::new() })
    }

    fn drawer(&mut self, i: usize, t: f64) -> usize {
        let marginals = &self.marginals[i];
        *self.choice.entry((i, t.to_bits())).or_insert_with(|| {
            let mut best = (0, f64::NEG_INFINITY);
            for (j, d) in marginals.iter().enumerate() {
                let v = d.expected_excess(t);
                if v > best.1 {
                    best = (j, v);
                }
            }
            best.0
        })
    }
}

impl Runner for MatroidCabinetsRunner<'_> {
    fn run(&mut self, seed: u64) -> Result<RunRecord> {
        let mut rng = SimRng::seed_from_u64(seed);
        let mut rec = RunRecord::new(seed);
        for i in 0..self.inst.cabinets.len() {
            let t = self.oracle.threshold(i, rec.selected)?;
            if t.is_infinite() {
                rec.push(i, ArrivalRecord::blocked());
                continue;
            }
            let j = self.drawer(i, t);
            let x = self.inst.cabinets[i].sample(&mut rng).values[j];
            let claimed = x >= t;
            rec.push(i, ArrivalRecord { threshold: t, drawer: Some(j), claimed, contribution: if claimed { x } else { 0.0 } });
        }
        Ok(rec)
    }
}

/// Single run of [`MatroidCabinetsRunner`].
pub fn matroid_cabinets_run(inst: &CabinetsInstance, q: &[f64], z: &[f64], mode: ThresholdMode, seed: u64) -> Result<RunRecord> {
    MatroidCabinetsRunner::new(inst, q, z, mode, seed)?.run(seed)
}

/// Threshold rule applied to the observed value in the classic reduction.
#[derive(Debug, Clone)]
pub enum ClassicThresholds {
    /// One fixed threshold per arrival.
    Fixed(Vec<f64>),
    /// Thresholds of the matroid-cabinets algorithm.
    Adaptive(ThresholdOracle),
}

/// Opens a drawer drawn from `lambdas[i]` at each feasible arrival and
/// applies a classic threshold rule to the value found.
#[derive(Debug, Clone)]
pub struct ClassicReductionRunner<'a> {
    inst: &'a CabinetsInstance,
    lambdas: Vec<Vec<(usize, f64)>>,
    thresholds: ClassicThresholds,
}

impl<'a> ClassicReductionRunner<'a> {
    pub fn new(inst: &'a CabinetsInstance, lambdas: Vec<Vec<(usize, f64)>>, thresholds: ClassicThresholds) -> Result<Self> {
        if lambdas.len() != inst.cabinets.len() {
            return Err(Error::Parameter("one drawer distribution per cabinet required".into()));
        }
        for (l, c) in lambdas.iter().zip(&inst.cabinets) {
            let total: f64 = l.iter().map(|p| p.1).sum();
            if (total - 1.0).abs() > crate::TOLERANCE || l.iter().any(|&(j, p)| j >= c.drawers() || p < 0.0) {
                return Err(Error::Parameter("invalid drawer distribution".into()));
            }
        }
        if let ClassicThresholds::Fixed(t) = &thresholds {
            if t.len() != inst.cabinets.len() {
                return Err(Error::Parameter("one threshold per cabinet required".into()));
            }
        }
        Ok(Self { inst, lambdas, thresholds })
    }

    /// Drawer distributions from an ex-ante witness.
    pub fn lambdas_from_witness(witnesses: &[Vec<WitnessPart>]) -> Vec<Vec<(usize, f64)>> {
        witnesses.iter().map(|w| w.iter().map(|p| (p.drawer, p.weight)).collect()).collect()
    }
}

impl Runner for ClassicReductionRunner<'_> {
    fn run(&mut self, seed: u64) -> Result<RunRecord> {
        let mut rng = SimRng::seed_from_u64(seed);
        let mut rec = RunRecord::new(seed);
        for i in 0..self.inst.cabinets.len() {
            let t = match &mut self.thresholds {
                ClassicThresholds::Fixed(ts) => {
                    if self.inst.matroid.is_independent(rec.selected | 1 << i) { ts[i] } else { f64::INFINITY }
                }
                ClassicThresholds::Adaptive(oracle) => oracle.threshold(i, rec.selected)?,
            };
            if t == f64::INFINITY {
                rec.push(i, ArrivalRecord::blocked());
                continue;
            }
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut j = self.lambdas[i].last().map_or(0, |p| p.0);
            for &(d, p) in &self.lambdas[i] {
                acc += p;
                if u < acc {
                    j = d;
                    break;
                }
            }
            let x = self.inst.cabinets[i].sample(&mut rng).values[j];
            let claimed = x >= t;
            rec.push(i, ArrivalRecord { threshold: t, drawer: Some(j), claimed, contribution: if claimed { x } else { 0.0 } });
        }
        Ok(rec)
    }
}

pub fn classic_reduction_run(
    inst: &CabinetsInstance,
    lambdas: Vec<Vec<(usize, f64)>>,
    thresholds: ClassicThresholds,
    seed: u64,
) -> Result<RunRecord> {
    ClassicReductionRunner::new(inst, lambdas, thresholds)?.run(seed)
}

/// Threshold algorithm for cabinets of bandits: open the drawer maximising
/// `E[(κ_j - T_i)^+]` and run it while its index stays above `T_i`.
#[derive(Debug, Clone)]
pub struct PandoraCabinetsRunner<'a> {
    inst: &'a PandoraCabinetsInstance,
    oracle: ThresholdOracle,
    tables: Vec<Vec<CappedValueTable>>,
    /// Probability of advancing and claiming when an index equals the threshold.
    pub tie_prob: f64,
}

impl<'a> PandoraCabinetsRunner<'a> {
    pub fn new(inst: &'a PandoraCabinetsInstance, q: &[f64], z: &[f64], mode: ThresholdMode, seed: u64) -> Result<Self> {
        let oracle = ThresholdOracle::new(&inst.matroid, q, z, mode, seed)?;
        let tables = inst
            .cabinets
            .iter()
            .map(|c| c.iter().map(compute_indices).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { inst, oracle, tables, tie_prob: 1.0 })
    }

    /// Drawer maximising `E[(κ_j - t)^+]`, lowest index on ties.
    pub fn drawer(&self, i: usize, t: f64) -> usize {
        let mut best = (0, f64::NEG_INFINITY);
        for (j, (m, table)) in self.inst.cabinets[i].iter().zip(&self.tables[i]).enumerate() {
            let v = table.kappa(m.start()).expected_excess(t);
            if v > best.1 {
                best = (j, v);
            }
        }
        best.0
    }
}

impl Runner for PandoraCabinetsRunner<'_> {
    fn run(&mut self, seed: u64) -> Result<RunRecord> {
        let mut rng = SimRng::seed_from_u64(seed);
        let mut rec = RunRecord::new(seed);
        for i in 0..self.inst.cabinets.len() {
            let t = self.oracle.threshold(i, rec.selected)?;
            if t.is_infinite() {
                rec.push(i, ArrivalRecord::blocked());
                continue;
            }
            let j = self.drawer(i, t);
            let m = &self.inst.cabinets[i][j];
            let tie_claim = rng.random::<f64>() < self.tie_prob;
            let pi = threshold_policy_with(m, &self.tables[i][j], t, tie_claim);
            let (transcript, perf) = simulate_with(m, &pi, &mut rng);
            let claimed = transcript.terminal == Terminal::HaltedClaim;
            rec.push(i, ArrivalRecord { threshold: t, drawer: Some(j), claimed, contribution: perf });
        }
        Ok(rec)
    }
}

pub fn pandora_cabinets_run(
    inst: &PandoraCabinetsInstance,
    q: &[f64],
    z: &[f64],
    mode: ThresholdMode,
    seed: u64,
) -> Result<RunRecord> {
    PandoraCabinetsRunner::new(inst, q, z, mode, seed)?.run(seed)
}

/// `f̂/(Q(1+ε')) - c/Q`.
pub fn z_hat(f_hat: f64, q: f64, eps_prime: f64, c: f64) -> f64 {
    f_hat / (q * (1.0 + eps_prime)) - c / q
}

/// How the ex-ante stage of [`CmsPlan`] builds its curves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlanMode {
    Exact,
    Fptas,
}

/// Everything the end-to-end pipeline fixes before the first arrival.
#[derive(Debug, Clone, PartialEq)]
pub struct CmsPlan {
    pub eps: f64,
    pub eps_prime: f64,
    /// Largest single-process optimum, a lower bound on achievable welfare.
    pub w_bar: f64,
    pub exante: ExAnteSolution,
    /// Additive slack used for the per-arrival estimates.
    pub c: f64,
    pub f_hat: Vec<f64>,
    pub z_hat: Vec<f64>,
    pub q_prime: Vec<f64>,
}

impl CmsPlan {
    pub fn new(inst: &CmsInstance, eps: f64, mode: PlanMode) -> Result<Self> {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::Parameter(format!("eps must lie in (0, 1), got {eps}")));
        }
        let n = inst.processes.len();
        let eps_prime = eps / 4.0;
        let mut w_bar: f64 = 0.0;
        for m in &inst.processes {
            w_bar = w_bar.max(maxsaup(m, 0.0)?.value);
        }
        let build = match mode {
            PlanMode::Exact => CurveMode::Exact,
            PlanMode::Fptas if w_bar > 0.0 => CurveMode::Fptas { c: eps_prime * w_bar, eps: eps_prime },
            PlanMode::Fptas => CurveMode::Exact,
        };
        let exante = exante_opt_cms(inst, build)?;
        let w = exante.objective;
        let q_min = exante.q.iter().copied().filter(|&q| q > 0.0).fold(f64::INFINITY, f64::min);
        let mut plan = Self {
            eps,
            eps_prime,
            w_bar,
            c: 0.0,
            f_hat: vec![0.0; n],
            z_hat: vec![0.0; n],
            q_prime: vec![0.0; n],
            exante,
        };
        if !(w > 0.0 && q_min.is_finite()) {
            return Ok(plan);
        }
        let c = eps_prime * eps_prime * w * q_min / n as f64;
        plan.c = c;
        for i in 0..n {
            let qi = plan.exante.q[i];
            if qi <= 0.0 {
                continue;
            }
            let f = match mode {
                PlanMode::Exact => plan.exante.curves[i].eval(qi),
                PlanMode::Fptas => dag_curve(&inst.processes[i], CurveMode::Fptas { c, eps: eps_prime })?.eval(qi),
            };
            plan.f_hat[i] = f;
            if f > 8.0 * c / eps_prime {
                plan.z_hat[i] = z_hat(f, qi, eps_prime, c).max(0.0);
                plan.q_prime[i] = qi;
            }
        }
        Ok(plan)
    }
}

/// End-to-end pipeline: thresholds from the plan, each arrival played by
/// the optimal single-agent policy against its threshold.
#[derive(Debug, Clone)]
pub struct CmsRunner<'a> {
    inst: &'a CmsInstance,
    pub plan: CmsPlan,
    oracle: ThresholdOracle,
    policies: HashMap<(usize, u64), MaxSaup>,
}

impl<'a> CmsRunner<'a> {
    pub fn new(inst: &'a CmsInstance, eps: f64, mode: PlanMode, thresholds: ThresholdMode, seed: u64) -> Result<Self> {
        let plan = CmsPlan::new(inst, eps, mode)?;
        let oracle = ThresholdOracle::new(&inst.matroid, &plan.q_prime, &plan.z_hat, thresholds, seed)?;
        Ok(Self { inst, plan, oracle, policies: HashMap::new() })
    }
}

impl Runner for CmsRunner<'_> {
    fn run(&mut self, seed: u64) -> Result<RunRecord> {
        let mut rng = SimRng::seed_from_u64(seed);
        let mut rec = RunRecord::new(seed);
        for i in 0..self.inst.processes.len() {
            // arrivals cut off by the plan are never opened
            let t = if self.plan.q_prime[i] > 0.0 { self.oracle.threshold(i, rec.selected)? } else { f64::INFINITY };
            if t.is_infinite() {
                rec.push(i, ArrivalRecord::blocked());
                continue;
            }
            let m = &self.inst.processes[i];
            let best = match self.policies.entry((i, t.to_bits())) {
                std::collections::hash_map::Entry::Occupied(e) => e.into_mut(),
                std::collections::hash_map::Entry::Vacant(e) => e.insert(maxsaup(m, t)?),
            };
            let (transcript, perf) = simulate_with(m, &best.policy, &mut rng);
            let claimed = transcript.terminal == Terminal::HaltedClaim;
            rec.push(i, ArrivalRecord { threshold: t, drawer: None, claimed, contribution: perf });
        }
        Ok(rec)
    }
}

/// Single run of the end-to-end pipeline with FPTAS curves.
pub fn cms_prophet_run(inst: &CmsInstance, eps: f64, seed: u64) -> Result<RunRecord> {
    CmsRunner::new(inst, eps, PlanMode::Fptas, ThresholdMode::auto(inst.processes.len()), seed)?.run(seed)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WelfareEstimate {
    pub mean: f64,
    /// Standard error of the mean.
    pub se: f64,
    pub trials: usize,
}

/// Mean welfare over `trials` runs seeded `base_seed, base_seed + 1, …`.
pub fn estimate_welfare<R: Runner + ?Sized>(runner: &mut R, trials: usize, base_seed: u64) -> Result<WelfareEstimate> {
    if trials < 2 {
        return Err(Error::Parameter("at least two trials are needed for a standard error".into()));
    }
    let (mut sum, mut sq) = (0.0, 0.0);
    let mut samples = Vec::with_capacity(trials);
    for t in 0..trials {
        let w = runner.run(base_seed.wrapping_add(t as u64))?.welfare;
        sum += w;
        samples.push(w);
    }
    let mean = sum / trials as f64;
    for w in &samples {
        sq += (w - mean) * (w - mean);
    }
    let se = (sq / (trials - 1) as f64).sqrt() / (trials as f64).sqrt();
    Ok(WelfareEstimate { mean, se, trials })
}
