//! Metric type and quasi-pseudometric type spaces over a closed real interval.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::{Expr, Func, Var};

/// Default absolute tolerance on axiom violation magnitudes.
pub const AXIOM_TOLERANCE: f64 = 1e-12;

/// Closed interval `[lower, upper]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Carrier {
    lower: f64,
    upper: f64,
}

impl Carrier {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if !(lower.is_finite() && upper.is_finite()) || lower > upper {
            return Err(Error::InvalidSpace(format!(
                "carrier [{lower}, {upper}] is not a closed finite interval"
            )));
        }
        Ok(Carrier { lower, upper })
    }

    pub fn unit() -> Self {
        Carrier {
            lower: 0.0,
            upper: 1.0,
        }
    }

    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }

    /// `points` evenly spaced points including both endpoints.
    pub fn grid(&self, points: usize) -> Vec<f64> {
        match points {
            0 => Vec::new(),
            1 => vec![self.lower],
            _ => {
                let span = self.upper - self.lower;
                let last = (points - 1) as f64;
                (0..points)
                    .map(|k| {
                        if k == points - 1 {
                            self.upper
                        } else {
                            self.lower + span * (k as f64) / last
                        }
                    })
                    .collect()
            }
        }
    }

    /// Maps `u` in `[0, 1)` onto the carrier.
    pub fn lerp(&self, u: f64) -> f64 {
        (self.lower + (self.upper - self.lower) * u).clamp(self.lower, self.upper)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Space {
    carrier: Carrier,
    distance: Expr,
    k: f64,
    polygon_arity: usize,
    symmetric: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Axiom {
    D1,
    D2,
    D3,
    T0,
}

/// A sampled point (or tuple) together with how badly it violates a property.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    pub point: Vec<f64>,
    pub violation: f64,
}

impl Witness {
    /// Larger violation wins; ties go to the lexicographically smaller point.
    pub(crate) fn worse_than(&self, other: &Witness) -> bool {
        match self.violation.total_cmp(&other.violation) {
            Ordering::Greater => true,
            Ordering::Less => false,
            Ordering::Equal => lex_cmp(&self.point, &other.point) == Ordering::Less,
        }
    }

    pub(crate) fn pick_worst(a: Option<Witness>, b: Option<Witness>) -> Option<Witness> {
        match (a, b) {
            (Some(a), Some(b)) => Some(if b.worse_than(&a) { b } else { a }),
            (a, None) => a,
            (None, b) => b,
        }
    }
}

pub(crate) fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            Ordering::Equal => continue,
            other => return other,
        }
    }
    a.len().cmp(&b.len())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AxiomReport {
    pub axiom: Axiom,
    pub samples_checked: usize,
    pub passed: bool,
    pub worst: Option<Witness>,
}

impl Space {
    pub fn new(
        carrier: Carrier,
        distance: Expr,
        k: f64,
        polygon_arity: usize,
        symmetric: bool,
    ) -> Result<Self> {
        if !(k >= 1.0 && k.is_finite()) {
            return Err(Error::InvalidSpace(format!("polygon constant K = {k} must be >= 1")));
        }
        if polygon_arity == 0 {
            return Err(Error::InvalidSpace("polygon arity must be >= 1".into()));
        }
        if let Some(v) = distance.variables().into_iter().find(|v| !matches!(v, Var::X | Var::Y)) {
            return Err(Error::InvalidSpace(format!(
                "distance `{distance}` may only use x and y, found `{}`",
                v.name()
            )));
        }
        Ok(Space {
            carrier,
            distance,
            k,
            polygon_arity,
            symmetric,
        })
    }

    /// `|x - y|` on the given carrier, K = 1.
    pub fn absolute(carrier: Carrier) -> Self {
        let d = Expr::parse("abs(x - y)").expect("static expression");
        Space::new(carrier, d, 1.0, 3, true).expect("valid space")
    }

    /// `max{x, y}` off the diagonal, zero on it.
    pub fn max_metric(carrier: Carrier) -> Self {
        let d = Expr::parse("max(x, y)").expect("static expression");
        Space::new(carrier, d, 1.0, 3, true).expect("valid space")
    }

    pub fn carrier(&self) -> Carrier {
        self.carrier
    }

    pub fn distance_expr(&self) -> &Expr {
        &self.distance
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn polygon_arity(&self) -> usize {
        self.polygon_arity
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    /// D(x, y). Exactly zero when `x` and `y` are the same number.
    pub fn distance(&self, x: f64, y: f64) -> Result<f64> {
        for p in [x, y] {
            if !self.carrier.contains(p) {
                return Err(Error::Domain(format!(
                    "point {p} outside carrier [{}, {}]",
                    self.carrier.lower, self.carrier.upper
                )));
            }
        }
        if x == y {
            return Ok(0.0);
        }
        let env = crate::expr::Bindings::new().with(Var::X, x).with(Var::Y, y);
        let d = self.distance.eval(&env)?;
        if d < 0.0 {
            return Err(Error::InvalidSpace(format!("D({x}, {y}) = {d} is negative")));
        }
        Ok(d)
    }

    /// max{D(x, y), D(y, x)}; plain D for symmetric spaces.
    pub fn sym_distance(&self, x: f64, y: f64) -> Result<f64> {
        if self.symmetric {
            self.distance(x, y)
        } else {
            Ok(self.distance(x, y)?.max(self.distance(y, x)?))
        }
    }

    pub fn symmetrize(&self) -> Result<Space> {
        if self.symmetric {
            return Err(Error::Usage("space is already symmetric".into()));
        }
        let swapped = self.distance.rename(&|v| match v {
            Var::X => Var::Y,
            Var::Y => Var::X,
            other => other,
        });
        let d = Expr::call(Func::Max, vec![self.distance.clone(), swapped]);
        Space::new(self.carrier, d, self.k, self.polygon_arity, true)
    }

    /// Sampled falsification of the axioms. D3 runs over every chain
    /// `(x, z_1, .., z_m, y)` from the sample with `1 <= m <= polygon_arity`.
    /// Asymmetric spaces get a T0 check in place of D2.
    pub fn check_axioms(&self, sample: &[f64], tolerance: f64) -> Result<Vec<AxiomReport>> {
        if sample.is_empty() {
            return Err(Error::Usage("axiom check needs a nonempty sample".into()));
        }
        let n = sample.len();
        let mut dist = vec![0.0; n * n];
        for (a, &x) in sample.iter().enumerate() {
            for (b, &y) in sample.iter().enumerate() {
                dist[a * n + b] = self.distance(x, y)?;
            }
        }
        let d = |a: usize, b: usize| dist[a * n + b];
        let mut reports = Vec::with_capacity(3);

        let mut worst = None;
        for (a, &x) in sample.iter().enumerate() {
            let w = Witness {
                point: vec![x],
                violation: d(a, a).abs(),
            };
            worst = Witness::pick_worst(worst, Some(w));
        }
        reports.push(report(Axiom::D1, n, worst, tolerance));

        let mut worst = None;
        let mut checked = 0;
        for a in 0..n {
            for b in 0..n {
                let w = if self.symmetric {
                    Witness {
                        point: vec![sample[a], sample[b]],
                        violation: (d(a, b) - d(b, a)).abs(),
                    }
                } else {
                    let both_zero = d(a, b) <= tolerance && d(b, a) <= tolerance;
                    let violation = if both_zero { (sample[a] - sample[b]).abs() } else { 0.0 };
                    Witness {
                        point: vec![sample[a], sample[b]],
                        violation,
                    }
                };
                checked += 1;
                worst = Witness::pick_worst(worst, Some(w));
            }
        }
        let axiom = if self.symmetric { Axiom::D2 } else { Axiom::T0 };
        reports.push(report(axiom, checked, worst, tolerance));

        // Chains are enumerated per starting point in parallel; the reduction
        // is a max with lexicographic tie-break, so the order does not matter.
        let k = self.k;
        let arity = self.polygon_arity;
        let per_start: Vec<(usize, Option<Witness>)> = (0..n)
            .into_par_iter()
            .map(|start| {
                let mut worst = None;
                let mut checked = 0;
                let mut chain = vec![start];
                polygon_chains(&d, n, arity, &mut chain, 0.0, &mut |chain, sum| {
                    let end = *chain.last().expect("nonempty chain");
                    let violation = d(chain[0], end) - k * sum;
                    checked += 1;
                    let w = Witness {
                        point: chain.iter().map(|&c| sample[c]).collect(),
                        violation,
                    };
                    if worst.as_ref().is_none_or(|cur: &Witness| w.worse_than(cur)) {
                        worst = Some(w);
                    }
                });
                (checked, worst)
            })
            .collect();
        let checked = per_start.iter().map(|(c, _)| c).sum();
        let worst = per_start
            .into_iter()
            .fold(None, |acc, (_, w)| Witness::pick_worst(acc, w));
        reports.push(report(Axiom::D3, checked, worst, tolerance));
        Ok(reports)
    }
}

fn report(axiom: Axiom, samples_checked: usize, worst: Option<Witness>, tol: f64) -> AxiomReport {
    let passed = worst.as_ref().is_none_or(|w| w.violation <= tol);
    AxiomReport {
        axiom,
        samples_checked,
        passed,
        worst,
    }
}

/// Visits every chain `start, z_1, .., z_m, end` with `1 <= m <= arity`,
/// passing the chain and its summed consecutive distances.
fn polygon_chains(
    d: &dyn Fn(usize, usize) -> f64,
    n: usize,
    arity: usize,
    chain: &mut Vec<usize>,
    sum: f64,
    visit: &mut dyn FnMut(&[usize], f64),
) {
    let intermediates = chain.len() - 1;
    if intermediates >= arity {
        return;
    }
    let last = *chain.last().expect("nonempty chain");
    for z in 0..n {
        let partial = sum + d(last, z);
        chain.push(z);
        for end in 0..n {
            chain.push(end);
            visit(chain, partial + d(z, end));
            chain.pop();
        }
        polygon_chains(d, n, arity, chain, partial, visit);
        chain.pop();
    }
}

/// True when the last `window` consecutive steps of `trace` are all shorter
/// than `tolerance`. Asymmetric spaces are measured with the symmetrized distance.
pub fn is_settled(trace: &[f64], space: &Space, tolerance: f64, window: usize) -> Result<bool> {
    if window == 0 {
        return Err(Error::Usage("settle window must be >= 1".into()));
    }
    if trace.len() < window + 1 {
        return Err(Error::Usage(format!(
            "trace of length {} is too short for a window of {window}",
            trace.len()
        )));
    }
    let tail = &trace[trace.len() - window - 1..];
    for pair in tail.windows(2) {
        if space.sym_distance(pair[0], pair[1])? >= tolerance {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quasi() -> Space {
        let d = Expr::parse("max(y - x, 0)").unwrap();
        Space::new(Carrier::new(0.0, 4.0).unwrap(), d, 1.0, 2, false).unwrap()
    }

    #[test]
    fn distance_examples() {
        let max = Space::max_metric(Carrier::unit());
        assert_eq!(max.distance(1.0, 1.0 / 16.0).unwrap(), 1.0);
        assert_eq!(max.distance(0.5, 0.5).unwrap(), 0.0);
        let abs = Space::absolute(Carrier::unit());
        assert_eq!(abs.distance(0.25, 0.75).unwrap(), 0.5);
    }

    #[test]
    fn distance_errors() {
        let abs = Space::absolute(Carrier::unit());
        assert!(matches!(abs.distance(1.5, 0.0), Err(Error::Domain(_))));
        let bad = Space::new(Carrier::unit(), Expr::parse("x - y").unwrap(), 1.0, 1, false).unwrap();
        assert!(matches!(bad.distance(0.1, 0.9), Err(Error::InvalidSpace(_))));
    }

    #[test]
    fn construction_rejects_bad_parameters() {
        let d = Expr::parse("abs(x - y)").unwrap();
        assert!(Space::new(Carrier::unit(), d.clone(), 0.5, 1, true).is_err());
        assert!(Space::new(Carrier::unit(), d.clone(), 1.0, 0, true).is_err());
        assert!(Space::new(Carrier::unit(), Expr::parse("abs(x - i)").unwrap(), 1.0, 1, true).is_err());
        assert!(Carrier::new(1.0, 0.0).is_err());
    }

    #[test]
    fn max_metric_axioms_on_three_points() {
        // Exhaustive oracle: every chain x -> z -> y over {0, 0.5, 1} satisfies
        // max{x, y} <= max{x, z} + max{z, y} off the diagonal.
        let sample = [0.0, 0.5, 1.0];
        let m = |a: f64, b: f64| if a == b { 0.0 } else { a.max(b) };
        for &x in &sample {
            for &z in &sample {
                for &y in &sample {
                    assert!(m(x, y) <= m(x, z) + m(z, y));
                }
            }
        }
        let space = Space::max_metric(Carrier::unit());
        let reports = space.check_axioms(&sample, AXIOM_TOLERANCE).unwrap();
        assert_eq!(reports.len(), 3);
        assert!(reports.iter().all(|r| r.passed), "{reports:?}");
        // 3 * 3^m * 3 chains for m = 1, 2, 3 intermediates
        let d3 = &reports[2];
        assert_eq!(d3.samples_checked, 27 + 81 + 243);
    }

    #[test]
    fn quasi_metric_t0() {
        let d = Expr::parse("max(x - y, 0)").unwrap();
        let space = Space::new(Carrier::unit(), d, 1.0, 2, false).unwrap();
        // (0.3, 0.3): both directions zero and the points coincide.
        // (0.3, 0.7): D(0.7, 0.3) = 0.4 so the T0 premise is not met.
        assert_eq!(space.distance(0.3, 0.7).unwrap(), 0.0);
        assert!((space.distance(0.7, 0.3).unwrap() - 0.4).abs() < 1e-15);
        let reports = space.check_axioms(&[0.0, 0.3, 0.7, 1.0], AXIOM_TOLERANCE).unwrap();
        assert_eq!(reports[1].axiom, Axiom::T0);
        assert!(reports.iter().all(|r| r.passed), "{reports:?}");
    }

    #[test]
    fn failing_polygon_inequality_is_witnessed() {
        let d = Expr::parse("(x - y)^2").unwrap();
        let space = Space::new(Carrier::unit(), d, 1.0, 1, true).unwrap();
        let reports = space.check_axioms(&[0.0, 0.5, 1.0], AXIOM_TOLERANCE).unwrap();
        let d3 = &reports[2];
        assert!(!d3.passed);
        let w = d3.worst.as_ref().unwrap();
        assert_eq!(w.point, vec![0.0, 0.5, 1.0]);
        assert!((w.violation - 0.5).abs() < 1e-15);
    }

    #[test]
    fn empty_sample_is_usage_error() {
        let space = Space::absolute(Carrier::unit());
        assert!(matches!(space.check_axioms(&[], 1e-12), Err(Error::Usage(_))));
    }

    #[test]
    fn symmetrize_examples() {
        let q = quasi();
        assert_eq!(q.distance(1.0, 3.0).unwrap(), 2.0);
        assert_eq!(q.distance(3.0, 1.0).unwrap(), 0.0);
        let s = q.symmetrize().unwrap();
        assert!(s.is_symmetric());
        assert_eq!(s.k(), q.k());
        assert_eq!(s.polygon_arity(), q.polygon_arity());
        assert_eq!(s.distance(1.0, 3.0).unwrap(), 2.0);
        assert_eq!(s.distance(3.0, 1.0).unwrap(), 2.0);
        assert_eq!(s.distance(2.5, 2.5).unwrap(), 0.0);
        let reports = s.check_axioms(&[0.0, 1.0, 2.5, 4.0], AXIOM_TOLERANCE).unwrap();
        assert!(reports[1].axiom == Axiom::D2 && reports[1].passed);
        assert!(matches!(s.symmetrize(), Err(Error::Usage(_))));
    }

    #[test]
    fn settledness() {
        let max = Space::max_metric(Carrier::unit());
        assert!(is_settled(&[0.3; 5], &max, 1e-9, 3).unwrap());
        assert!(!is_settled(&[0.0, 1.0, 0.0, 1.0, 0.0], &max, 1e-9, 3).unwrap());
        assert!(is_settled(&[0.3; 2], &max, 1e-9, 3).is_err());
        assert!(is_settled(&[0.3; 2], &max, 1e-9, 0).is_err());

        // x_n = 16^{-n(n+1)/2}; under the max metric the step x_n -> x_{n+1}
        // has length x_n, which first drops below 1e-9 at n = 4 (16^-10).
        let trace: Vec<f64> = (1..=12)
            .map(|n: i32| 16f64.powi(-(n * (n + 1) / 2)))
            .collect();
        let oracle = |len: usize| trace[len - 4..len - 1].iter().all(|&x| x < 1e-9);
        for len in 4..=12 {
            assert_eq!(
                is_settled(&trace[..len], &max, 1e-9, 3).unwrap(),
                oracle(len),
                "prefix length {len}"
            );
        }
        assert!(!is_settled(&trace[..6], &max, 1e-9, 3).unwrap());
        assert!(is_settled(&trace[..7], &max, 1e-9, 3).unwrap());
    }
}
