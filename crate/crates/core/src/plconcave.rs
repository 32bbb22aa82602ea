//! Piecewise-linear concave functions on `[0, 1]`.

use crate::error::{Error, Result};
use crate::model::DiscreteDistribution;
use crate::TOLERANCE;

/// Adjacent segments whose slopes differ by less than this are merged.
pub const SLOPE_MERGE: f64 = 1e-12;
const WIDTH_EPS: f64 = 1e-15;

/// Concave function on `[0, 1]` given by its breakpoints; linear in between.
#[derive(Debug, Clone, PartialEq)]
pub struct PLConcave {
    xs: Vec<f64>,
    ys: Vec<f64>,
}

impl PLConcave {
    /// Builds a function from `(q, value)` breakpoints, which must start at
    /// 0, end at 1, increase strictly and have nonincreasing slopes.
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::Parameter("need at least two breakpoints".into()));
        }
        if points[0].0 != 0.0 || points[points.len() - 1].0 != 1.0 {
            return Err(Error::Parameter("breakpoints must span exactly [0, 1]".into()));
        }
        if points.iter().any(|p| !p.1.is_finite()) {
            return Err(Error::Parameter("breakpoint values must be finite".into()));
        }
        if points.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::Parameter("breakpoints must increase strictly".into()));
        }
        let f = Self::from_points(points.iter().map(|p| p.0).collect(), points.iter().map(|p| p.1).collect());
        if !f.is_concave(TOLERANCE) {
            return Err(Error::Parameter("slopes must be nonincreasing".into()));
        }
        Ok(f)
    }

    pub fn zero() -> Self {
        Self::linear(0.0)
    }

    /// `q ↦ slope·q`.
    pub fn linear(slope: f64) -> Self {
        Self { xs: vec![0.0, 1.0], ys: vec![0.0, slope] }
    }

    /// Starts at `start` and follows the `(width, slope)` segments in order;
    /// widths are expected to sum to one.
    pub fn from_segments(start: f64, segments: impl IntoIterator<Item = (f64, f64)>) -> Self {
        let mut xs = vec![0.0];
        let mut ys = vec![start];
        let (mut x, mut y) = (0.0, start);
        for (w, s) in segments {
            if w <= WIDTH_EPS {
                continue;
            }
            x += w;
            y += w * s;
            xs.push(x);
            ys.push(y);
        }
        if xs.len() == 1 {
            xs.push(1.0);
            ys.push(start);
        }
        *xs.last_mut().expect("nonempty") = 1.0;
        Self::from_points(xs, ys)
    }

    /// Drops duplicate and collinear breakpoints.
    fn from_points(xs: Vec<f64>, ys: Vec<f64>) -> Self {
        let mut px: Vec<f64> = Vec::with_capacity(xs.len());
        let mut py: Vec<f64> = Vec::with_capacity(ys.len());
        for (x, y) in xs.into_iter().zip(ys) {
            if let Some(&lx) = px.last() {
                if x - lx <= WIDTH_EPS {
                    if x == 1.0 {
                        // keep the exact right endpoint
                        *px.last_mut().expect("nonempty") = 1.0;
                        *py.last_mut().expect("nonempty") = y;
                    }
                    continue;
                }
            }
            while px.len() >= 2 {
                let k = px.len();
                let left = (py[k - 1] - py[k - 2]) / (px[k - 1] - px[k - 2]);
                let right = (y - py[k - 1]) / (x - px[k - 1]);
                if (left - right).abs() < SLOPE_MERGE {
                    px.pop();
                    py.pop();
                } else {
                    break;
                }
            }
            px.push(x);
            py.push(y);
        }
        if px.len() == 1 {
            px = vec![0.0, 1.0];
            py = vec![py[0], py[0]];
        }
        Self { xs: px, ys: py }
    }

    pub fn breakpoints(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.xs.iter().copied().zip(self.ys.iter().copied())
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `(width, slope)` of every linear piece, left to right.
    pub fn segments(&self) -> Vec<(f64, f64)> {
        self.xs
            .windows(2)
            .zip(self.ys.windows(2))
            .map(|(x, y)| (x[1] - x[0], (y[1] - y[0]) / (x[1] - x[0])))
            .collect()
    }

    pub fn slopes(&self) -> Vec<f64> {
        self.segments().into_iter().map(|s| s.1).collect()
    }

    pub fn at_zero(&self) -> f64 {
        self.ys[0]
    }

    pub fn at_one(&self) -> f64 {
        self.ys[self.ys.len() - 1]
    }

    pub fn evaluate(&self, q: f64) -> Result<f64> {
        check_domain(q)?;
        Ok(self.eval(q))
    }

    /// Evaluation with `q` clamped into `[0, 1]`.
    pub(crate) fn eval(&self, q: f64) -> f64 {
        let q = q.clamp(0.0, 1.0);
        let k = self.segment_index(q);
        let (x0, x1) = (self.xs[k], self.xs[k + 1]);
        let (y0, y1) = (self.ys[k], self.ys[k + 1]);
        if q == x1 {
            return y1;
        }
        y0 + (y1 - y0) * (q - x0) / (x1 - x0)
    }

    /// Right slope at `q`, or the left slope at `q = 1`.
    pub fn supergradient(&self, q: f64) -> Result<f64> {
        check_domain(q)?;
        let k = self.segment_index(q);
        Ok((self.ys[k + 1] - self.ys[k]) / (self.xs[k + 1] - self.xs[k]))
    }

    /// Index of the segment `[x_k, x_{k+1})` holding `q` (last segment at 1).
    fn segment_index(&self, q: f64) -> usize {
        let k = self.xs.partition_point(|&x| x <= q);
        k.saturating_sub(1).min(self.xs.len() - 2)
    }

    pub fn is_concave(&self, tol: f64) -> bool {
        self.slopes().windows(2).all(|w| w[1] <= w[0] + tol)
    }

    pub fn is_nondecreasing(&self, tol: f64) -> bool {
        self.ys.windows(2).all(|w| w[1] >= w[0] - tol)
    }

    /// `q ↦ f(q) - delta`.
    pub fn shift(&self, delta: f64) -> Self {
        Self { xs: self.xs.clone(), ys: self.ys.iter().map(|y| y - delta).collect() }
    }
}

fn check_domain(q: f64) -> Result<()> {
    if (0.0..=1.0).contains(&q) {
        Ok(())
    } else {
        Err(Error::Domain(q))
    }
}

/// `q ↦ q · E[X | X in its top q-quantile]`.
pub fn upper_expectation(d: &DiscreteDistribution) -> PLConcave {
    PLConcave::from_segments(0.0, d.atoms().iter().rev().map(|&(v, p)| (p, v)))
}

/// Value of optimally splitting a budget `q` over the parts:
/// `max Σ w_k f_k(q_k)` subject to `Σ w_k q_k = q`.
pub fn weighted_sup_convolution(parts: &[(f64, &PLConcave)]) -> Result<PLConcave> {
    let total: f64 = parts.iter().map(|p| p.0).sum();
    if parts.iter().any(|p| p.0.is_nan() || p.0 < 0.0) || (total - 1.0).abs() > TOLERANCE {
        return Err(Error::Parameter(format!("weights must be nonnegative and sum to 1, got {total}")));
    }
    let start = parts.iter().map(|(w, f)| w * f.at_zero()).sum();
    let mut segments: Vec<(f64, f64)> = parts
        .iter()
        .filter(|p| p.0 > 0.0)
        .flat_map(|(w, f)| f.segments().into_iter().map(move |(width, slope)| (w * width, slope)))
        .collect();
    segments.sort_by(|a, b| b.1.total_cmp(&a.1));
    Ok(PLConcave::from_segments(start, segments))
}

/// Upper concave hull of `(q, value, tag)` points; the points must include
/// `q = 0` and `q = 1`. Returns the hull and the tag of each vertex.
fn upper_hull(mut points: Vec<(f64, f64, usize)>) -> (PLConcave, Vec<usize>) {
    points.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.total_cmp(&a.1)).then(a.2.cmp(&b.2)));
    let mut hull: Vec<(f64, f64, usize)> = Vec::with_capacity(points.len());
    for p in points {
        if let Some(last) = hull.last() {
            if p.0 - last.0 <= WIDTH_EPS {
                // same abscissa; the first seen has the largest value
                continue;
            }
        }
        while hull.len() >= 2 {
            let a = hull[hull.len() - 2];
            let b = hull[hull.len() - 1];
            let cross = (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0);
            if cross >= -1e-15 * (p.0 - a.0) {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    let tags = hull.iter().map(|p| p.2).collect();
    let f = PLConcave::from_points(hull.iter().map(|p| p.0).collect(), hull.iter().map(|p| p.1).collect());
    (f, tags)
}

/// Pointwise smallest concave function lying above every input.
pub fn concave_envelope(fs: &[&PLConcave]) -> Result<PLConcave> {
    concave_envelope_tagged(fs).map(|(f, _)| f)
}

/// [`concave_envelope`] together with, for every breakpoint of the result,
/// the index of an input attaining it.
pub fn concave_envelope_tagged(fs: &[&PLConcave]) -> Result<(PLConcave, Vec<usize>)> {
    if fs.is_empty() {
        return Err(Error::Parameter("envelope of an empty family".into()));
    }
    let points = fs
        .iter()
        .enumerate()
        .flat_map(|(k, f)| f.breakpoints().map(move |(x, y)| (x, y, k)))
        .collect();
    let (f, tags) = upper_hull(points);
    // collinear merging may have removed vertices; re-tag the survivors
    let tags = if tags.len() == f.len() {
        tags
    } else {
        f.breakpoints()
            .map(|(x, y)| {
                (0..fs.len())
                    .max_by(|&a, &b| fs[a].eval(x).total_cmp(&fs[b].eval(x)).then(b.cmp(&a)))
                    .filter(|&k| (fs[k].eval(x) - y).abs() <= TOLERANCE)
                    .unwrap_or(0)
            })
            .collect()
    };
    Ok((f, tags))
}

/// Grid smoothing: caps the value at `q = b` by `cap`, enforces a running
/// maximum from the third grid point on, then takes the upper hull.
pub fn iron(grid: &[f64], values: &[f64], cap: f64, b: f64) -> Result<PLConcave> {
    if grid.len() != values.len() || grid.len() < 2 {
        return Err(Error::Parameter("grid and values must have equal length of at least 2".into()));
    }
    if grid[0] != 0.0 || grid[grid.len() - 1] != 1.0 || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Parameter("grid must increase strictly from 0 to 1".into()));
    }
    let mut v = values.to_vec();
    if let Some(k) = grid.iter().position(|&g| g == b) {
        v[k] = v[k].min(cap);
    }
    for t in 2..v.len() {
        v[t] = v[t].max(v[t - 1]);
    }
    Ok(upper_hull(grid.iter().zip(&v).map(|(&x, &y)| (x, y, 0)).collect()).0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn upper_expectation_examples() {
        let g = upper_expectation(&DiscreteDistribution::new([(1.0, 0.5), (3.0, 0.5)]).unwrap());
        assert!(close(g.evaluate(0.25).unwrap(), 0.75));
        assert!(close(g.evaluate(0.5).unwrap(), 1.5));
        assert!(close(g.evaluate(1.0).unwrap(), 2.0));
        let c = upper_expectation(&DiscreteDistribution::point(4.0));
        assert_eq!(c, PLConcave::linear(4.0));
        let z = upper_expectation(&DiscreteDistribution::point(0.0));
        assert_eq!(z, PLConcave::zero());
    }

    #[test]
    fn evaluation_and_supergradients() {
        let f = PLConcave::linear(2.0);
        assert_eq!(f.evaluate(0.5).unwrap(), 1.0);
        assert_eq!(f.supergradient(0.3).unwrap(), 2.0);
        let kinked = PLConcave::new(vec![(0.0, 0.0), (0.5, 1.0), (1.0, 1.0)]).unwrap();
        assert_eq!(kinked.supergradient(0.5).unwrap(), 0.0);
        assert_eq!(kinked.supergradient(0.2).unwrap(), 2.0);
        assert_eq!(kinked.supergradient(1.0).unwrap(), 0.0);
        assert!(matches!(kinked.evaluate(1.5), Err(Error::Domain(_))));
        assert!(matches!(kinked.supergradient(-0.1), Err(Error::Domain(_))));
    }

    #[test]
    fn rejects_convex_input() {
        assert!(PLConcave::new(vec![(0.0, 0.0), (0.5, 0.0), (1.0, 1.0)]).is_err());
        assert!(PLConcave::new(vec![(0.0, 0.0), (0.9, 0.0)]).is_err());
    }

    #[test]
    fn convolution_examples() {
        let one = PLConcave::linear(1.0);
        let zero = PLConcave::zero();
        let g = weighted_sup_convolution(&[(0.5, &one), (0.5, &zero)]).unwrap();
        assert_eq!(g.segments(), vec![(0.5, 1.0), (0.5, 0.0)]);

        let f = PLConcave::new(vec![(0.0, 0.0), (0.3, 0.9), (1.0, 1.2)]).unwrap();
        let g = weighted_sup_convolution(&[(1.0, &f)]).unwrap();
        assert_eq!(g.len(), f.len());
        assert!(g.breakpoints().zip(f.breakpoints()).all(|(a, b)| close(a.0, b.0) && close(a.1, b.1)));

        let f1 = PLConcave::from_segments(0.0, [(0.5, 3.0), (0.5, 1.0)]);
        let f2 = PLConcave::linear(2.0);
        let g = weighted_sup_convolution(&[(0.5, &f1), (0.5, &f2)]).unwrap();
        assert_eq!(g.segments(), vec![(0.25, 3.0), (0.5, 2.0), (0.25, 1.0)]);
    }

    #[test]
    fn envelope_examples() {
        let id = PLConcave::linear(1.0);
        let c = PLConcave::new(vec![(0.0, 0.8), (1.0, 0.8)]).unwrap();
        let e = concave_envelope(&[&id, &c]).unwrap();
        assert!(close(e.evaluate(0.0).unwrap(), 0.8));
        assert!(close(e.evaluate(0.5).unwrap(), 0.9));
        assert_eq!(e.len(), 2);
        assert_eq!(concave_envelope(&[&id]).unwrap(), id);
        let f = PLConcave::new(vec![(0.0, 0.0), (0.4, 2.0), (1.0, 2.5)]).unwrap();
        assert_eq!(concave_envelope(&[&f, &f]).unwrap(), f);
        assert!(concave_envelope(&[]).is_err());
    }

    #[test]
    fn envelope_tags_point_at_sources() {
        let g1 = PLConcave::from_segments(0.0, [(0.5, 10.0), (0.5, 0.0)]);
        let g2 = PLConcave::linear(6.0);
        let (e, tags) = concave_envelope_tagged(&[&g1, &g2]).unwrap();
        assert_eq!(e.slopes(), vec![10.0, 2.0]);
        assert_eq!(tags, vec![0, 0, 1]);
    }

    #[test]
    fn ironing_examples() {
        let grid = [0.0, 0.1, 0.4, 1.0];
        let f = iron(&grid, &[0.0, 5.0, 1.0, 2.0], 0.3, 0.1).unwrap();
        // values capped to (0, .3, 1, 2) before hulling
        let expected = upper_hull(vec![(0.0, 0.0, 0), (0.1, 0.3, 0), (0.4, 1.0, 0), (1.0, 2.0, 0)]).0;
        assert_eq!(f, expected);
        assert!(close(f.evaluate(0.4).unwrap(), 1.0));
        assert!(f.evaluate(0.1).unwrap() >= 0.3);

        let z = iron(&grid, &[0.0; 4], 0.0, 0.1).unwrap();
        assert_eq!(z, PLConcave::zero());

        let concave = [0.0, 0.2, 0.6, 1.0];
        let f = iron(&grid, &concave, 10.0, 0.1).unwrap();
        for (x, y) in grid.iter().zip(concave) {
            assert!(close(f.evaluate(*x).unwrap(), y));
        }
        assert!(iron(&[0.0, 0.5], &[0.0, 1.0], 1.0, 0.5).is_err());
    }

    #[test]
    fn ironing_enforces_monotonicity() {
        let f = iron(&[0.0, 0.1, 0.5, 1.0], &[0.0, 0.1, 0.5, 0.2], 1.0, 0.1).unwrap();
        assert!(f.is_nondecreasing(0.0));
        assert!(close(f.at_one(), 0.5));
    }

    #[test]
    fn shift_moves_every_value() {
        let f = PLConcave::linear(1.0);
        assert_eq!(f.shift(0.0), f);
        assert!(close(f.shift(0.5).evaluate(0.5).unwrap(), 0.0));
        assert!(close(f.shift(-1.0).at_one(), 2.0));
    }
}
