//! Ex-ante relaxations: per-arrival value curves and their joint
//! maximisation over the matroid polytope.

use crate::error::{Error, Result};
use crate::matroid::Matroid;
use crate::model::{Cabinet, CabinetsInstance, CmsInstance, Msp};
use crate::plconcave::{concave_envelope, concave_envelope_tagged, iron, upper_expectation, weighted_sup_convolution, PLConcave};

/// Default cap on the total number of breakpoints built by
/// [`exact_dag_curve`].
pub const BREAKPOINT_BUDGET: usize = 100_000;
/// Cap on the FPTAS grid length.
pub const GRID_BUDGET: usize = 1_000_000;

/// Open `drawer` with probability `weight` and claim its top `quantile`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WitnessPart {
    pub drawer: usize,
    pub weight: f64,
    pub quantile: f64,
}

/// Value curve of a cabinet: the concave envelope of its drawers' upper
/// expectation curves.
#[derive(Debug, Clone, PartialEq)]
pub struct CabinetCurve {
    pub curve: PLConcave,
    pub drawer_curves: Vec<PLConcave>,
    /// Drawer attaining each breakpoint of `curve`.
    sources: Vec<usize>,
}

impl CabinetCurve {
    /// Mixture over at most two (drawer, quantile) pairs whose claim
    /// probability is `q` and whose value is `curve(q)`.
    pub fn witness(&self, q: f64) -> Result<Vec<WitnessPart>> {
        self.curve.evaluate(q)?;
        let points: Vec<(f64, f64)> = self.curve.breakpoints().collect();
        let k = points.partition_point(|p| p.0 <= q).saturating_sub(1).min(points.len() - 2);
        let (x0, x1) = (points[k].0, points[k + 1].0);
        if q == x0 || q == x1 {
            let v = if q == x0 { k } else { k + 1 };
            return Ok(vec![WitnessPart { drawer: self.sources[v], weight: 1.0, quantile: q }]);
        }
        let right = (q - x0) / (x1 - x0);
        Ok(vec![
            WitnessPart { drawer: self.sources[k], weight: 1.0 - right, quantile: x0 },
            WitnessPart { drawer: self.sources[k + 1], weight: right, quantile: x1 },
        ])
    }
}

pub fn cabinet_value_curve(cabinet: &Cabinet) -> CabinetCurve {
    let drawer_curves: Vec<PLConcave> = (0..cabinet.drawers()).map(|j| upper_expectation(&cabinet.marginal(j))).collect();
    let refs: Vec<&PLConcave> = drawer_curves.iter().collect();
    let (curve, sources) = concave_envelope_tagged(&refs).expect("cabinet has a drawer");
    CabinetCurve { curve, drawer_curves, sources }
}

/// Exact curve `f(q)`: the best expected performance of a policy that claims
/// with probability `q`.
pub fn exact_dag_curve(m: &Msp) -> Result<PLConcave> {
    exact_dag_curve_with_budget(m, BREAKPOINT_BUDGET)
}

pub fn exact_dag_curve_with_budget(m: &Msp, budget: usize) -> Result<PLConcave> {
    let zero = PLConcave::zero();
    let mut g: Vec<Option<PLConcave>> = vec![None; m.len()];
    let mut total = 0;
    for s in m.backward_order() {
        let f = if m.is_sink(s) {
            PLConcave::linear(m.value(s))
        } else {
            let mut options = Vec::with_capacity(m.actions(s).len() + 1);
            for a in m.actions(s) {
                let parts: Vec<(f64, &PLConcave)> =
                    a.transitions.iter().map(|&(t, p)| (p, g[t].as_ref().expect("successor first"))).collect();
                options.push(weighted_sup_convolution(&parts)?.shift(a.cost));
            }
            options.push(zero.clone());
            concave_envelope(&options.iter().collect::<Vec<_>>())?
        };
        total += f.len();
        if total > budget {
            return Err(Error::SizeLimit { what: "value curve breakpoints", limit: budget });
        }
        g[s] = Some(f);
    }
    Ok(g[m.start()].take().expect("start evaluated"))
}

/// Evaluation grid `(0, b, b(1+alpha), b(1+alpha)^2, …, 1)`.
pub fn fptas_grid(b: f64, alpha: f64) -> Result<Vec<f64>> {
    let mut grid = vec![0.0];
    let mut x = b;
    while x < 1.0 - 1e-12 {
        grid.push(x);
        if grid.len() > GRID_BUDGET {
            return Err(Error::SizeLimit { what: "approximation grid", limit: GRID_BUDGET });
        }
        x *= 1.0 + alpha;
    }
    grid.push(1.0);
    Ok(grid)
}

fn eval_on_grid(f: &PLConcave, grid: &[f64]) -> Vec<f64> {
    grid.iter().map(|&q| f.eval(q)).collect()
}

/// Grid approximation `f̂` of [`exact_dag_curve`] with
/// `(f - c)/(1 + eps) <= f̂ <= (f + c)(1 + eps)`.
pub fn fptas_dag_curve(m: &Msp, c: f64, eps: f64) -> Result<PLConcave> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::Parameter(format!("additive slack c must be positive, got {c}")));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Parameter(format!("eps must lie in (0, 1), got {eps}")));
    }
    let max_v = m.max_value();
    if max_v == 0.0 {
        return Ok(PLConcave::zero());
    }
    let alpha = eps / (2.0 * m.len() as f64);
    let b = (c / max_v).min(1.0);
    let grid = fptas_grid(b, alpha)?;
    let cap = b * max_v;
    let zero = PLConcave::zero();
    let mut g: Vec<Option<PLConcave>> = vec![None; m.len()];
    for s in m.backward_order() {
        let f = if m.is_sink(s) {
            PLConcave::linear(m.value(s))
        } else {
            let mut options = Vec::with_capacity(m.actions(s).len() + 1);
            for a in m.actions(s) {
                let parts: Vec<(f64, &PLConcave)> =
                    a.transitions.iter().map(|&(t, p)| (p, g[t].as_ref().expect("successor first"))).collect();
                let raw = weighted_sup_convolution(&parts)?;
                options.push(iron(&grid, &eval_on_grid(&raw, &grid), cap, b)?.shift(a.cost));
            }
            options.push(zero.clone());
            let env = concave_envelope(&options.iter().collect::<Vec<_>>())?;
            iron(&grid, &eval_on_grid(&env, &grid), cap, b)?
        };
        g[s] = Some(f);
    }
    Ok(g[m.start()].take().expect("start evaluated"))
}

/// Maximises `Σ f_i(q_i)` over the matroid polytope by raising coordinates
/// one linear piece at a time in order of decreasing slope.
pub fn maximize_separable_concave(m: &Matroid, curves: &[PLConcave]) -> Result<Vec<f64>> {
    let n = m.ground_size();
    if curves.len() != n {
        return Err(Error::Parameter(format!("{} curves for {n} elements", curves.len())));
    }
    let rank = m.rank_table()?;
    let mut pieces: Vec<(usize, usize, f64, f64)> = Vec::new();
    for (i, f) in curves.iter().enumerate() {
        for (k, (w, s)) in f.segments().into_iter().enumerate() {
            if s > 0.0 {
                pieces.push((i, k, w, s));
            }
        }
    }
    pieces.sort_by(|a, b| b.3.total_cmp(&a.3).then(a.0.cmp(&b.0)).then(a.1.cmp(&b.1)));
    let mut q = vec![0.0; n];
    let mut blocked = vec![false; n];
    for (i, _, width, _) in pieces {
        if blocked[i] {
            continue;
        }
        let mut room = width;
        // q(S) for every S containing i
        let others: Vec<usize> = (0..n).filter(|&e| e != i).collect();
        let mut sums = vec![0.0; 1 << others.len()];
        for s in 0..sums.len() {
            if s > 0 {
                let low = s.trailing_zeros() as usize;
                sums[s] = sums[s & (s - 1)] + q[others[low]];
            }
            let mut set = 1usize << i;
            for (bit, &e) in others.iter().enumerate() {
                if s >> bit & 1 == 1 {
                    set |= 1 << e;
                }
            }
            room = room.min(rank[set] as f64 - sums[s] - q[i]);
        }
        let step = room.max(0.0);
        q[i] += step;
        if step < width {
            blocked[i] = true;
        }
    }
    Ok(q)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExAnteSolution {
    pub q: Vec<f64>,
    pub curves: Vec<PLConcave>,
    /// `f_i(q_i) / q_i`, or 0 where `q_i = 0`.
    pub z: Vec<f64>,
    pub objective: f64,
    /// Per-cabinet drawer mixtures (cabinet instances only).
    pub witnesses: Option<Vec<Vec<WitnessPart>>>,
}

fn solve(m: &Matroid, curves: Vec<PLConcave>) -> Result<ExAnteSolution> {
    let q = maximize_separable_concave(m, &curves)?;
    let values: Vec<f64> = curves.iter().zip(&q).map(|(f, &qi)| f.eval(qi)).collect();
    let z = values.iter().zip(&q).map(|(&v, &qi)| if qi > 0.0 { v / qi } else { 0.0 }).collect();
    Ok(ExAnteSolution { objective: values.iter().sum(), q, curves, z, witnesses: None })
}

pub fn exante_opt_cabinets(inst: &CabinetsInstance) -> Result<ExAnteSolution> {
    let cabinet_curves: Vec<CabinetCurve> = inst.cabinets.iter().map(cabinet_value_curve).collect();
    let mut sol = solve(&inst.matroid, cabinet_curves.iter().map(|c| c.curve.clone()).collect())?;
    let witnesses = cabinet_curves
        .iter()
        .zip(&sol.q)
        .map(|(c, &qi)| c.witness(qi.clamp(0.0, 1.0)))
        .collect::<Result<Vec<_>>>()?;
    sol.witnesses = Some(witnesses);
    Ok(sol)
}

/// How per-process value curves are built.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CurveMode {
    Exact,
    Fptas { c: f64, eps: f64 },
}

pub fn dag_curve(m: &Msp, mode: CurveMode) -> Result<PLConcave> {
    match mode {
        CurveMode::Exact => exact_dag_curve(m),
        CurveMode::Fptas { c, eps } => fptas_dag_curve(m, c, eps),
    }
}

pub fn exante_opt_cms(inst: &CmsInstance, mode: CurveMode) -> Result<ExAnteSolution> {
    let curves = inst.processes.iter().map(|m| dag_curve(m, mode)).collect::<Result<Vec<_>>>()?;
    solve(&inst.matroid, curves)
}
