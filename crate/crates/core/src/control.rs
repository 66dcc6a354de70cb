//! Gauge functions F, control functions ψ, C-class functions and the
//! coefficient schedules δ and γ, with sampled class-membership checks.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::{Bindings, Expr, Var};
use crate::space::{Space, Witness};

/// Strict-positivity floor for ψ and F away from the origin.
pub const POSITIVITY_FLOOR: f64 = 1e-15;

/// Scales used for the homogeneity check and degree estimate.
pub const DEFAULT_SCALES: [f64; 4] = [0.25, 0.5, 2.0, 4.0];

/// F in the Φ class, with the homogeneity degree it claims.
#[derive(Debug, Clone, PartialEq)]
pub struct PhiSpec {
    expr: Expr,
    degree: f64,
}

impl PhiSpec {
    pub fn new(expr: Expr, degree: f64) -> Result<Self> {
        expr.check_scope(&[Var::T], "phi")?;
        if !(degree > 0.0 && degree.is_finite()) {
            return Err(Error::Scenario(format!("phi degree {degree} must be positive")));
        }
        Ok(PhiSpec { expr, degree })
    }

    pub fn identity() -> Self {
        PhiSpec::new(Expr::var(Var::T), 1.0).expect("identity is valid")
    }

    pub fn sqrt() -> Self {
        PhiSpec::new(Expr::parse("sqrt(t)").expect("static"), 0.5).expect("sqrt is valid")
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    pub fn degree(&self) -> f64 {
        self.degree
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        if t < 0.0 {
            return Err(Error::Domain(format!("F is defined on [0, inf); got {t}")));
        }
        let v = self.expr.eval(&Bindings::new().with(Var::T, t))?;
        if v < 0.0 {
            return Err(Error::Domain(format!("F({t}) = {v} is negative")));
        }
        Ok(v)
    }

    /// Checks zero set, monotonicity, sub-additivity and homogeneity of the
    /// claimed degree on the given samples.
    pub fn check_class(
        &self,
        sample: &[f64],
        scales: &[f64],
        tolerance: f64,
    ) -> Result<MembershipReport> {
        if sample.is_empty() || scales.is_empty() {
            return Err(Error::Usage("phi class check needs nonempty samples".into()));
        }
        let values: Vec<f64> = sample.iter().map(|&t| self.eval(t)).collect::<Result<_>>()?;

        let mut zero = PropertyCheck::new("zero_set");
        zero.observe(vec![0.0], self.eval(0.0)?.abs());
        for (&t, &f) in sample.iter().zip(&values) {
            if t > 0.0 {
                zero.observe(vec![t], (POSITIVITY_FLOOR - f).max(0.0));
            }
        }
        zero.finish(0.0);

        let mut mono = PropertyCheck::new("non_decreasing");
        let mut sub = PropertyCheck::new("sub_additive");
        for (a, (&ta, &fa)) in sample.iter().zip(&values).enumerate() {
            for (&tb, &fb) in sample.iter().zip(&values).skip(a) {
                let (lo, hi) = if ta <= tb { (fa, fb) } else { (fb, fa) };
                mono.observe(vec![ta.min(tb), ta.max(tb)], lo - hi);
                sub.observe(vec![ta, tb], self.eval(ta + tb)? - fa - fb);
            }
        }
        mono.finish(tolerance);
        sub.finish(tolerance);

        let mut homog = PropertyCheck::new("homogeneous");
        for (&t, &f) in sample.iter().zip(&values) {
            for &c in scales {
                let expected = c.powf(self.degree) * f;
                let got = self.eval(c * t)?;
                homog.observe(vec![t, c], (got - expected).abs() / expected.abs().max(1.0));
            }
        }
        homog.finish(tolerance);

        Ok(MembershipReport {
            class: "phi".into(),
            checks: vec![zero, mono, sub, homog],
        })
    }

    /// Least-squares slope of log F(c t0) against log c.
    pub fn estimate_degree(&self, scales: &[f64]) -> Result<f64> {
        let mut distinct: Vec<f64> = scales.iter().copied().filter(|c| *c > 0.0).collect();
        distinct.sort_by(f64::total_cmp);
        distinct.dedup();
        if distinct.len() < 2 {
            return Err(Error::Usage("degree estimate needs two distinct positive scales".into()));
        }
        let mut probes = vec![1.0];
        probes.extend(distinct.iter().copied());
        for t0 in probes {
            let logs: Result<Vec<(f64, f64)>> = distinct
                .iter()
                .map(|&c| Ok((c.ln(), self.eval(c * t0)?)))
                .collect();
            let Ok(points) = logs else { continue };
            if points.iter().any(|&(_, f)| f <= 0.0) {
                continue;
            }
            let pts: Vec<(f64, f64)> = points.into_iter().map(|(lc, f)| (lc, f.ln())).collect();
            return Ok(ls_slope(&pts));
        }
        Err(Error::Degenerate("F vanishes at every degree probe".into()))
    }
}

fn ls_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// ψ with two or three arguments, bound to `x, y` or `x, y, z`.
#[derive(Debug, Clone, PartialEq)]
pub struct PsiSpec {
    arity: usize,
    expr: Expr,
    symmetric: bool,
}

impl PsiSpec {
    pub fn new(arity: usize, expr: Expr, symmetric: bool) -> Result<Self> {
        let vars: &[Var] = match arity {
            2 => &[Var::X, Var::Y],
            3 => &[Var::X, Var::Y, Var::Z],
            _ => return Err(Error::Scenario(format!("psi arity must be 2 or 3, got {arity}"))),
        };
        expr.check_scope(vars, "psi")?;
        Ok(PsiSpec {
            arity,
            expr,
            symmetric,
        })
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn eval(&self, args: &[f64]) -> Result<f64> {
        if args.len() != self.arity {
            return Err(Error::Usage(format!(
                "psi takes {} arguments, got {}",
                self.arity,
                args.len()
            )));
        }
        let mut env = Bindings::new();
        for (var, &v) in [Var::X, Var::Y, Var::Z].into_iter().zip(args) {
            env.set(var, v);
        }
        self.expr.eval(&env)
    }

    /// ψ(origin) must be exactly 0 and ψ must exceed the positivity floor
    /// at every other sampled tuple. Symmetry under argument permutation is
    /// checked when the spec is flagged symmetric.
    pub fn check(&self, sample: &[Vec<f64>], tolerance: f64) -> Result<MembershipReport> {
        let mut zero = PropertyCheck::new("zero_set");
        let origin = vec![0.0; self.arity];
        zero.observe(origin.clone(), self.eval(&origin)?.abs());
        let mut sym = PropertyCheck::new("symmetric");
        for v in sample {
            let value = self.eval(v)?;
            if v.iter().any(|&c| c != 0.0) {
                zero.observe(v.clone(), (POSITIVITY_FLOOR - value).max(0.0));
            }
            if self.symmetric {
                for perm in permutations(v) {
                    sym.observe(v.clone(), (self.eval(&perm)? - value).abs());
                }
            }
        }
        zero.finish(0.0);
        let mut checks = vec![zero];
        if self.symmetric {
            sym.finish(tolerance);
            checks.push(sym);
        }
        Ok(MembershipReport {
            class: "psi".into(),
            checks,
        })
    }
}

fn permutations(v: &[f64]) -> Vec<Vec<f64>> {
    match v.len() {
        2 => vec![vec![v[1], v[0]]],
        3 => vec![
            vec![v[0], v[2], v[1]],
            vec![v[1], v[0], v[2]],
            vec![v[1], v[2], v[0]],
            vec![v[2], v[0], v[1]],
            vec![v[2], v[1], v[0]],
        ],
        _ => Vec::new(),
    }
}

/// f(s, t) candidate for the C-class.
#[derive(Debug, Clone, PartialEq)]
pub struct CClassSpec {
    expr: Expr,
}

impl CClassSpec {
    pub fn new(expr: Expr) -> Result<Self> {
        expr.check_scope(&[Var::S, Var::T], "c_class")?;
        Ok(CClassSpec { expr })
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    pub fn eval(&self, s: f64, t: f64) -> Result<f64> {
        self.expr.eval(&Bindings::new().with(Var::S, s).with(Var::T, t))
    }

    /// (1) f(s,t) <= s; (2) f(s,t) = s only when s = 0 or t = 0.
    pub fn check(&self, sample: &[(f64, f64)], tolerance: f64) -> Result<MembershipReport> {
        if sample.is_empty() {
            return Err(Error::Usage("C-class check needs a nonempty sample".into()));
        }
        let mut bounded = PropertyCheck::new("f_le_s");
        let mut equality = PropertyCheck::new("equality_only_at_axes");
        for &(s, t) in sample {
            let f = self.eval(s, t)?;
            bounded.observe(vec![s, t], f - s);
            let violation = if (f - s).abs() <= tolerance { s.min(t) } else { 0.0 };
            equality.observe(vec![s, t], violation);
        }
        bounded.finish(tolerance);
        equality.finish(tolerance);
        Ok(MembershipReport {
            class: "c_class".into(),
            checks: vec![bounded, equality],
        })
    }
}

/// One sampled property with its worst witness.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropertyCheck {
    pub property: String,
    pub samples_checked: usize,
    pub passed: bool,
    pub worst: Option<Witness>,
}

impl PropertyCheck {
    fn new(property: &str) -> Self {
        PropertyCheck {
            property: property.into(),
            samples_checked: 0,
            passed: true,
            worst: None,
        }
    }

    fn observe(&mut self, point: Vec<f64>, violation: f64) {
        self.samples_checked += 1;
        let w = Witness { point, violation };
        self.worst = Witness::pick_worst(self.worst.take(), Some(w));
    }

    fn finish(&mut self, tolerance: f64) {
        self.passed = self.worst.as_ref().is_none_or(|w| w.violation <= tolerance);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MembershipReport {
    pub class: String,
    pub checks: Vec<PropertyCheck>,
}

impl MembershipReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, property: &str) -> Option<&PropertyCheck> {
        self.checks.iter().find(|c| c.property == property)
    }

    /// The failing check with the largest violation.
    pub fn worst_failure(&self) -> Option<&PropertyCheck> {
        self.checks
            .iter()
            .filter(|c| !c.passed)
            .max_by(|a, b| {
                let va = a.worst.as_ref().map_or(0.0, |w| w.violation);
                let vb = b.worst.as_ref().map_or(0.0, |w| w.violation);
                va.total_cmp(&vb)
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Coefficient {
    Delta,
    Gamma,
}

/// Where δ and γ come from.
#[derive(Debug, Clone, PartialEq)]
pub enum ScheduleSource {
    /// δ_{ij} = D(a_i, a_j), γ_{ij} = D(b_i, b_j); the symmetrized distance
    /// is used on asymmetric spaces.
    Anchors { a: Expr, b: Option<Expr> },
    /// Closed-form expressions in `i` and `j`.
    ClosedForm { delta: Expr, gamma: Option<Expr> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientSchedule {
    source: ScheduleSource,
    gamma_zero: bool,
    space: Space,
}

impl CoefficientSchedule {
    pub fn new(source: ScheduleSource, gamma_zero: bool, space: Space) -> Result<Self> {
        match &source {
            ScheduleSource::Anchors { a, b } => {
                a.check_scope(&[Var::I, Var::N], "anchor_a")?;
                if let Some(b) = b {
                    b.check_scope(&[Var::I, Var::N], "anchor_b")?;
                }
            }
            ScheduleSource::ClosedForm { delta, gamma } => {
                delta.check_scope(&[Var::I, Var::J], "delta")?;
                if let Some(g) = gamma {
                    g.check_scope(&[Var::I, Var::J], "gamma")?;
                }
            }
        }
        let has_gamma = match &source {
            ScheduleSource::Anchors { b, .. } => b.is_some(),
            ScheduleSource::ClosedForm { gamma, .. } => gamma.is_some(),
        };
        if gamma_zero && has_gamma {
            return Err(Error::Scenario(
                "gamma_zero is set but a gamma source is also given".into(),
            ));
        }
        Ok(CoefficientSchedule {
            source,
            gamma_zero,
            space,
        })
    }

    pub fn closed_form(delta: &str, gamma: Option<&str>, space: Space) -> Result<Self> {
        let source = ScheduleSource::ClosedForm {
            delta: Expr::parse(delta)?,
            gamma: gamma.map(Expr::parse).transpose()?,
        };
        CoefficientSchedule::new(source, gamma.is_none(), space)
    }

    pub fn source(&self) -> &ScheduleSource {
        &self.source
    }

    pub fn gamma_zero(&self) -> bool {
        self.gamma_zero
    }

    pub fn space(&self) -> &Space {
        &self.space
    }

    pub fn has_gamma(&self) -> bool {
        match &self.source {
            ScheduleSource::Anchors { b, .. } => b.is_some(),
            ScheduleSource::ClosedForm { gamma, .. } => gamma.is_some(),
        }
    }

    pub fn coefficient(&self, which: Coefficient, i: u64, j: u64) -> Result<f64> {
        if i == 0 || j == 0 {
            return Err(Error::Usage(format!("indices start at 1, got ({i}, {j})")));
        }
        let v = match (&self.source, which) {
            (ScheduleSource::Anchors { a, .. }, Coefficient::Delta) => self.anchor_distance(a, i, j)?,
            (ScheduleSource::Anchors { b: Some(b), .. }, Coefficient::Gamma) => {
                self.anchor_distance(b, i, j)?
            }
            (ScheduleSource::ClosedForm { delta, .. }, Coefficient::Delta) => index_eval(delta, i, j)?,
            (ScheduleSource::ClosedForm { gamma: Some(g), .. }, Coefficient::Gamma) => {
                index_eval(g, i, j)?
            }
            (_, Coefficient::Gamma) if self.gamma_zero => 0.0,
            (_, Coefficient::Gamma) => {
                return Err(Error::Usage(
                    "gamma requested but the schedule defines none (set gamma_zero to use the γ = 0 form)"
                        .into(),
                ))
            }
        };
        if v < 0.0 {
            return Err(Error::Hypothesis {
                index: i,
                message: format!("{which:?} coefficient ({i}, {j}) = {v} is negative"),
            });
        }
        Ok(v)
    }

    fn anchor_distance(&self, anchor: &Expr, i: u64, j: u64) -> Result<f64> {
        let at = |k: u64| {
            let env = Bindings::new().with(Var::I, k as f64).with(Var::N, k as f64);
            anchor.eval(&env)
        };
        self.space.sym_distance(at(i)?, at(j)?)
    }
}

fn index_eval(e: &Expr, i: u64, j: u64) -> Result<f64> {
    e.eval(&Bindings::new().with(Var::I, i as f64).with(Var::J, j as f64))
}

/// Evenly spaced sample `0, step, .., upper`.
pub fn uniform_sample(upper: f64, points: usize) -> Vec<f64> {
    crate::space::Carrier::new(0.0, upper)
        .map(|c| c.grid(points))
        .unwrap_or_default()
}

/// Default ψ sample: the tuple grid over `{0, 0.25, 0.5, 1}` for the given arity.
pub fn psi_sample(arity: usize) -> Vec<Vec<f64>> {
    let axis = [0.0, 0.25, 0.5, 1.0];
    let mut out: Vec<Vec<f64>> = vec![Vec::new()];
    for _ in 0..arity {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                axis.iter().map(move |&a| {
                    let mut p = prefix.clone();
                    p.push(a);
                    p
                })
            })
            .collect();
    }
    out
}

/// Default C-class sample: `(s, t)` over `{0, 0.1, .., 2}²`.
pub fn c_class_sample() -> Vec<(f64, f64)> {
    let axis = uniform_sample(2.0, 21);
    axis.iter()
        .flat_map(|&s| axis.iter().map(move |&t| (s, t)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::Carrier;

    #[test]
    fn phi_examples() {
        assert_eq!(PhiSpec::sqrt().eval(0.0625).unwrap(), 0.25);
        assert_eq!(PhiSpec::identity().eval(0.7).unwrap(), 0.7);
        assert_eq!(PhiSpec::sqrt().eval(0.0).unwrap(), 0.0);
        assert!(matches!(PhiSpec::identity().eval(-1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn phi_class_membership() {
        let sample = uniform_sample(1.0, 21);
        let report = PhiSpec::sqrt().check_class(&sample, &DEFAULT_SCALES, 1e-12).unwrap();
        assert!(report.passed(), "{report:?}");
        let report = PhiSpec::identity().check_class(&sample, &DEFAULT_SCALES, 1e-12).unwrap();
        assert!(report.passed(), "{report:?}");

        let wrong_degree = PhiSpec::new(Expr::parse("sqrt(t)").unwrap(), 1.0).unwrap();
        let report = wrong_degree.check_class(&sample, &DEFAULT_SCALES, 1e-12).unwrap();
        assert!(!report.check("homogeneous").unwrap().passed);
        assert!(report.check("sub_additive").unwrap().passed);

        let square = PhiSpec::new(Expr::parse("t^2").unwrap(), 2.0).unwrap();
        let report = square.check_class(&sample, &DEFAULT_SCALES, 1e-12).unwrap();
        let sub = report.check("sub_additive").unwrap();
        assert!(!sub.passed);
        let w = sub.worst.as_ref().unwrap();
        assert_eq!(w.point, vec![1.0, 1.0]);
        assert_eq!(w.violation, 2.0);
        assert!(report.check("homogeneous").unwrap().passed);
    }

    #[test]
    fn zero_set_failure() {
        let shifted = PhiSpec::new(Expr::parse("t + 1").unwrap(), 1.0).unwrap();
        let report = shifted
            .check_class(&uniform_sample(1.0, 5), &DEFAULT_SCALES, 1e-12)
            .unwrap();
        assert!(!report.check("zero_set").unwrap().passed);
        let clipped = PhiSpec::new(Expr::parse("max(t - 0.5, 0)").unwrap(), 1.0).unwrap();
        let report = clipped
            .check_class(&uniform_sample(1.0, 5), &DEFAULT_SCALES, 1e-12)
            .unwrap();
        let zero = report.check("zero_set").unwrap();
        assert!(!zero.passed);
    }

    #[test]
    fn degree_estimates() {
        // Oracle: log sqrt(c) = 0.5 log c exactly, so the slope is 1/2.
        let d = PhiSpec::sqrt().estimate_degree(&[0.5, 1.0, 2.0, 4.0]).unwrap();
        assert!((d - 0.5).abs() < 1e-9, "{d}");
        let d = PhiSpec::identity().estimate_degree(&[0.5, 1.0, 2.0, 4.0]).unwrap();
        assert!((d - 1.0).abs() < 1e-12, "{d}");
        let triple = PhiSpec::new(Expr::parse("3 * t").unwrap(), 1.0).unwrap();
        let d = triple.estimate_degree(&[0.5, 1.0, 2.0, 4.0]).unwrap();
        assert!((d - 1.0).abs() < 1e-12, "{d}");

        let zero = PhiSpec::new(Expr::parse("0 * t").unwrap(), 1.0).unwrap();
        assert!(matches!(zero.estimate_degree(&DEFAULT_SCALES), Err(Error::Degenerate(_))));
        assert!(matches!(PhiSpec::identity().estimate_degree(&[2.0, 2.0]), Err(Error::Usage(_))));
    }

    #[test]
    fn psi_checks() {
        let sum = PsiSpec::new(2, Expr::parse("x + y").unwrap(), true).unwrap();
        assert_eq!(sum.eval(&[0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(sum.eval(&[0.1, 0.0]).unwrap(), 0.1);
        assert!(sum.check(&psi_sample(2), 1e-12).unwrap().passed());

        let zero = PsiSpec::new(2, Expr::parse("0 * x").unwrap(), false).unwrap();
        let report = zero.check(&psi_sample(2), 1e-12).unwrap();
        assert!(!report.passed());
        let w = report.check("zero_set").unwrap().worst.clone().unwrap();
        // every nonzero tuple fails equally; lexicographic tie-break picks the first
        assert_eq!(w.point, vec![0.0, 0.25]);
        assert!(zero.check(&[vec![1.0, 1.0]], 1e-12).unwrap().check("zero_set").unwrap().worst.as_ref().unwrap().point == vec![1.0, 1.0]);

        let max3 = PsiSpec::new(3, Expr::parse("max(x, y, z)").unwrap(), true).unwrap();
        assert!(max3.check(&psi_sample(3), 1e-12).unwrap().passed());

        let lopsided = PsiSpec::new(2, Expr::parse("x + 2*y").unwrap(), true).unwrap();
        let report = lopsided.check(&psi_sample(2), 1e-12).unwrap();
        assert!(report.check("zero_set").unwrap().passed);
        assert!(!report.check("symmetric").unwrap().passed);

        assert!(PsiSpec::new(4, Expr::parse("x").unwrap(), false).is_err());
        assert!(PsiSpec::new(2, Expr::parse("x + z").unwrap(), false).is_err());
    }

    #[test]
    fn c_class_examples() {
        let sample = c_class_sample();
        for (text, ok) in [
            ("s - t", true),
            ("0.5 * s", true),
            ("s / (1 + t)^1", true),
            ("s + t", false),
        ] {
            let f = CClassSpec::new(Expr::parse(text).unwrap()).unwrap();
            assert_eq!(f.check(&sample, 1e-12).unwrap().passed(), ok, "{text}");
        }
        let plus = CClassSpec::new(Expr::parse("s + t").unwrap()).unwrap();
        assert_eq!(plus.eval(1.0, 1.0).unwrap(), 2.0);
        assert!(plus.check(&[(1.0, 1.0)], 1e-12).unwrap().check("f_le_s").unwrap().worst.as_ref().unwrap().violation == 1.0);
        // f(s, t) = s everywhere: equality away from the axes
        let ident = CClassSpec::new(Expr::parse("s").unwrap()).unwrap();
        let report = ident.check(&sample, 1e-12).unwrap();
        assert!(!report.check("equality_only_at_axes").unwrap().passed);
    }

    #[test]
    fn coefficients_from_anchors_and_closed_forms() {
        let max = Space::max_metric(Carrier::unit());
        let anchors = CoefficientSchedule::new(
            ScheduleSource::Anchors {
                a: Expr::parse("(1/(1+2^i))^2").unwrap(),
                b: None,
            },
            true,
            max.clone(),
        )
        .unwrap();
        let d12 = anchors.coefficient(Coefficient::Delta, 1, 2).unwrap();
        assert!((d12 - 1.0 / 9.0).abs() < 1e-16);
        assert_eq!(anchors.coefficient(Coefficient::Delta, 3, 3).unwrap(), 0.0);
        assert_eq!(anchors.coefficient(Coefficient::Gamma, 1, 2).unwrap(), 0.0);

        let abs = Space::absolute(Carrier::unit());
        let closed = CoefficientSchedule::closed_form("1/3 + 1/(abs(i - j) + 6)", None, abs.clone()).unwrap();
        let d12 = closed.coefficient(Coefficient::Delta, 1, 2).unwrap();
        assert!((d12 - 10.0 / 21.0).abs() <= 1e-15);

        assert!(matches!(closed.coefficient(Coefficient::Delta, 0, 2), Err(Error::Usage(_))));

        let no_gamma = CoefficientSchedule::new(
            ScheduleSource::ClosedForm {
                delta: Expr::parse("0.4").unwrap(),
                gamma: None,
            },
            false,
            abs,
        )
        .unwrap();
        assert!(matches!(no_gamma.coefficient(Coefficient::Gamma, 1, 2), Err(Error::Usage(_))));
    }

    #[test]
    fn constant_anchors_give_zero_delta() {
        let s = CoefficientSchedule::new(
            ScheduleSource::Anchors {
                a: Expr::parse("0.3").unwrap(),
                b: Some(Expr::parse("0.7").unwrap()),
            },
            false,
            Space::absolute(Carrier::unit()),
        )
        .unwrap();
        for i in 1..6 {
            for j in 1..6 {
                assert_eq!(s.coefficient(Coefficient::Delta, i, j).unwrap(), 0.0);
                assert_eq!(s.coefficient(Coefficient::Gamma, i, j).unwrap(), 0.0);
            }
        }
    }

    #[test]
    fn asymmetric_anchors_use_symmetrized_distance() {
        let q = Space::new(
            Carrier::unit(),
            Expr::parse("max(y - x, 0)").unwrap(),
            1.0,
            2,
            false,
        )
        .unwrap();
        let s = CoefficientSchedule::new(
            ScheduleSource::Anchors {
                a: Expr::parse("1/(i+1)").unwrap(),
                b: None,
            },
            true,
            q,
        )
        .unwrap();
        let d12 = s.coefficient(Coefficient::Delta, 1, 2).unwrap();
        let d21 = s.coefficient(Coefficient::Delta, 2, 1).unwrap();
        assert_eq!(d12, d21);
        assert!((d12 - (0.5 - 1.0 / 3.0)).abs() < 1e-15);
    }

    #[test]
    fn negative_closed_form_is_rejected() {
        let s = CoefficientSchedule::closed_form("i - 2", None, Space::absolute(Carrier::unit())).unwrap();
        assert!(matches!(s.coefficient(Coefficient::Delta, 1, 1), Err(Error::Hypothesis { .. })));
    }
}
