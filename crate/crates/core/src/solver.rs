//! Picard iteration x_n = T_n(x_{n-1}), convergence certificates and the
//! checks run against a finished trace.

use rayon::prelude::*;
use serde::Serialize;

use crate::condition::MAX_POWER;
use crate::error::{Error, Result};
use crate::expr::{Bindings, Expr, Var};
use crate::lambda::{
    analyze_lambda, derive_sequence, series_report, LambdaCertificate, LambdaReading,
    SeriesReport, SeriesVerdict,
};
use crate::scenario::Scenario;
use crate::space::Carrier;

pub const SETTLE_TOLERANCE: f64 = 1e-10;
pub const SETTLE_WINDOW: usize = 3;
pub const RESIDUAL_TOLERANCE: f64 = 1e-8;
pub const ENVELOPE_TOLERANCE: f64 = 1e-9;
/// Added to λ before it enters the bound, unless λ is exactly 0.
pub const LAMBDA_SLACK: f64 = 1e-12;

/// The indexed family {T_n}, given by one expression in x and i (n is an alias of i).
#[derive(Debug, Clone, PartialEq)]
pub struct MapFamily {
    expr: Expr,
    power: u32,
    carrier: Carrier,
}

impl MapFamily {
    pub fn new(expr: Expr, carrier: Carrier) -> Result<Self> {
        expr.check_scope(&[Var::X, Var::I, Var::N], "map")?;
        Ok(MapFamily {
            expr,
            power: 1,
            carrier,
        })
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    /// How many times the base expression is composed per application.
    pub fn power(&self) -> u32 {
        self.power
    }

    fn step(&self, index: u64, x: f64) -> Result<f64> {
        let env = Bindings::new()
            .with(Var::X, x)
            .with(Var::I, index as f64)
            .with(Var::N, index as f64);
        let value = self.expr.eval(&env)?;
        if !self.carrier.contains(value) {
            return Err(Error::Range {
                index,
                input: x,
                value,
            });
        }
        Ok(value)
    }

    /// T_index(x).
    pub fn apply(&self, index: u64, x: f64) -> Result<f64> {
        if index == 0 {
            return Err(Error::Usage("map indices start at 1".into()));
        }
        if !self.carrier.contains(x) {
            return Err(Error::Domain(format!("{x} lies outside the carrier")));
        }
        let mut v = x;
        for _ in 0..self.power {
            v = self.step(index, v)?;
        }
        Ok(v)
    }

    /// T_index applied `p` times.
    pub fn apply_power(&self, index: u64, x: f64, p: u32) -> Result<f64> {
        let mut v = x;
        for _ in 0..p {
            v = self.apply(index, v)?;
        }
        Ok(v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trace {
    pub start: f64,
    /// x_1 .. x_N
    pub points: Vec<f64>,
    /// D^s(x_{n-1}, x_n) for n = 1..N
    pub step_distances: Vec<f64>,
    /// First step of the run of small steps that stopped the iteration.
    pub settled_at: Option<usize>,
}

impl Trace {
    /// x_n with x_0 the start.
    pub fn point(&self, n: usize) -> f64 {
        if n == 0 {
            self.start
        } else {
            self.points[n - 1]
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn last(&self) -> f64 {
        self.points.last().copied().unwrap_or(self.start)
    }

    pub fn settled(&self) -> bool {
        self.settled_at.is_some()
    }
}

pub fn iterate(
    scenario: &Scenario,
    x0: f64,
    max_steps: usize,
    tolerance: f64,
    window: usize,
) -> Result<Trace> {
    if max_steps == 0 || window == 0 {
        return Err(Error::Usage("max_steps and window must be >= 1".into()));
    }
    let space = &scenario.space;
    if !space.carrier().contains(x0) {
        return Err(Error::Domain(format!("start {x0} lies outside the carrier")));
    }
    let mut trace = Trace {
        start: x0,
        points: Vec::new(),
        step_distances: Vec::new(),
        settled_at: None,
    };
    let mut x = x0;
    for n in 1..=max_steps {
        let next = scenario
            .family
            .apply(n as u64, x)
            .map_err(|e| Error::AtStep {
                step: n,
                source: Box::new(e),
            })?;
        let d = space.sym_distance(x, next)?;
        trace.points.push(next);
        trace.step_distances.push(d);
        x = next;
        let recent = &trace.step_distances[trace.step_distances.len().saturating_sub(window)..];
        if recent.len() == window && recent.iter().all(|&d| d < tolerance) {
            trace.settled_at = Some(n + 1 - window);
            break;
        }
    }
    Ok(trace)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum CertificateMode {
    Lambda { lambda: f64, n_lambda: usize },
    Series { tail_bound: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceCertificate {
    pub mode: CertificateMode,
    pub degree: f64,
    pub k: f64,
    /// K^s
    pub k_s: f64,
    /// F(D(x_0, x_1))
    pub f_d01: f64,
    /// First index the bound applies to.
    pub first_index: usize,
    /// bound(n) for n = first_index ..= trace length.
    pub bounds: Vec<f64>,
}

impl ConvergenceCertificate {
    pub fn bound(&self, n: usize) -> Option<f64> {
        n.checked_sub(self.first_index)
            .and_then(|k| self.bounds.get(k).copied())
    }
}

pub enum CertificateSource<'a> {
    Lambda(&'a LambdaCertificate),
    Series(&'a SeriesReport),
}

pub fn build_certificate(
    scenario: &Scenario,
    trace: &Trace,
    degree: f64,
    source: CertificateSource<'_>,
) -> Result<ConvergenceCertificate> {
    if trace.is_empty() {
        return Err(Error::Certificate("trace has no steps".into()));
    }
    let k = scenario.space.k();
    let k_s = k.powf(degree);
    let f_d01 = scenario.phi.eval(trace.step_distances[0])?;
    let n_max = trace.len();
    match source {
        CertificateSource::Lambda(c) => {
            if c.lambda >= 1.0 {
                return Err(Error::Certificate(format!("λ = {} is not below 1", c.lambda)));
            }
            let lam = if c.lambda == 0.0 { 0.0 } else { c.lambda + LAMBDA_SLACK };
            if lam >= 1.0 {
                return Err(Error::Certificate(format!("λ = {} is too close to 1", c.lambda)));
            }
            let first = c.n_lambda;
            let bounds = (first..=n_max.max(first))
                .map(|n| k_s * lam.powi(n as i32) / (1.0 - lam) * f_d01)
                .collect();
            Ok(ConvergenceCertificate {
                mode: CertificateMode::Lambda {
                    lambda: c.lambda,
                    n_lambda: c.n_lambda,
                },
                degree,
                k,
                k_s,
                f_d01,
                first_index: first,
                bounds,
            })
        }
        CertificateSource::Series(r) => {
            if r.verdict != SeriesVerdict::Converges {
                return Err(Error::Certificate(format!(
                    "Σ C_n is not certified convergent ({:?})",
                    r.verdict
                )));
            }
            let tail_bound = r.tail_bound.unwrap_or(0.0);
            let bounds = (1..=n_max)
                .map(|n| {
                    let tail = if n <= r.horizon() {
                        r.tail_sum(n).unwrap_or(f64::INFINITY)
                    } else {
                        // Beyond the horizon only the tail bound is known.
                        tail_bound
                    };
                    k_s * tail * f_d01
                })
                .collect();
            Ok(ConvergenceCertificate {
                mode: CertificateMode::Series { tail_bound },
                degree,
                k,
                k_s,
                f_d01,
                first_index: 1,
                bounds,
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnvelopeViolation {
    pub n: usize,
    pub p: usize,
    pub lhs: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnvelopeReport {
    pub pairs_checked: usize,
    pub passed: bool,
    /// max over checked (n, p) of F(D(x_n, x_{n+p})) - bound(n); negative when every pair has room.
    pub max_excess: f64,
    pub worst: Option<EnvelopeViolation>,
}

/// Checks F(D(x_n, x_{n+p})) <= bound(n) + tolerance for every in-trace pair
/// with n at or past the certificate's first index.
pub fn check_envelope(
    trace: &Trace,
    certificate: &ConvergenceCertificate,
    scenario: &Scenario,
    tolerance: f64,
) -> Result<EnvelopeReport> {
    let n_max = trace.len();
    let mut pairs = 0;
    let mut worst: Option<EnvelopeViolation> = None;
    for n in certificate.first_index..n_max {
        let Some(bound) = certificate.bound(n) else { continue };
        for m in n + 1..=n_max {
            let lhs = scenario
                .phi
                .eval(scenario.space.sym_distance(trace.point(n), trace.point(m))?)?;
            pairs += 1;
            if worst.as_ref().is_none_or(|w| lhs - bound > w.lhs - w.bound) {
                worst = Some(EnvelopeViolation {
                    n,
                    p: m - n,
                    lhs,
                    bound,
                });
            }
        }
    }
    let max_excess = worst.as_ref().map_or(f64::NEG_INFINITY, |w| w.lhs - w.bound);
    Ok(EnvelopeReport {
        pairs_checked: pairs,
        passed: max_excess <= tolerance,
        max_excess,
        worst,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualReport {
    pub x_star: f64,
    /// (m, D^s(x*, T_m x*))
    pub residuals: Vec<(u64, f64)>,
    pub tolerance: f64,
    pub passed: bool,
    pub max_residual: f64,
}

pub fn verify_common_fixed_point(
    scenario: &Scenario,
    x_star: f64,
    indices: &[u64],
    tolerance: f64,
) -> Result<ResidualReport> {
    if !scenario.space.carrier().contains(x_star) {
        return Err(Error::Domain(format!("{x_star} lies outside the carrier")));
    }
    let residuals = indices
        .par_iter()
        .map(|&m| {
            let t = scenario.family.apply(m, x_star)?;
            Ok((m, scenario.space.sym_distance(x_star, t)?))
        })
        .collect::<Vec<Result<(u64, f64)>>>()
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let max_residual = residuals.iter().map(|r| r.1).fold(0.0, f64::max);
    Ok(ResidualReport {
        x_star,
        residuals,
        tolerance,
        passed: max_residual <= tolerance,
        max_residual,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeOutcome {
    pub start: f64,
    pub limit: Option<f64>,
    pub steps: usize,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UniquenessReport {
    pub outcomes: Vec<ProbeOutcome>,
    /// Every start settled and all limits agree within the tolerance.
    pub unique: bool,
    /// Some start failed to settle or errored.
    pub inconclusive: bool,
    pub max_spread: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IterationConfig {
    pub max_steps: usize,
    pub settle_tolerance: f64,
    pub window: usize,
}

impl Default for IterationConfig {
    fn default() -> Self {
        IterationConfig {
            max_steps: 200,
            settle_tolerance: SETTLE_TOLERANCE,
            window: SETTLE_WINDOW,
        }
    }
}

pub fn probe_uniqueness(
    scenario: &Scenario,
    starts: &[f64],
    config: IterationConfig,
    tolerance: f64,
) -> Result<UniquenessReport> {
    if starts.is_empty() {
        return Err(Error::Usage("uniqueness probe needs at least one start".into()));
    }
    let outcomes: Vec<ProbeOutcome> = starts
        .par_iter()
        .map(|&x0| {
            match iterate(scenario, x0, config.max_steps, config.settle_tolerance, config.window) {
                Ok(t) => ProbeOutcome {
                    start: x0,
                    limit: t.settled().then(|| t.last()),
                    steps: t.len(),
                    error: None,
                },
                Err(e) => ProbeOutcome {
                    start: x0,
                    limit: None,
                    steps: 0,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    let limits: Vec<f64> = outcomes.iter().filter_map(|o| o.limit).collect();
    let mut max_spread: f64 = 0.0;
    for (k, &a) in limits.iter().enumerate() {
        for &b in &limits[k + 1..] {
            max_spread = max_spread.max(scenario.space.sym_distance(a, b)?);
        }
    }
    let inconclusive = limits.len() < outcomes.len();
    Ok(UniquenessReport {
        unique: !inconclusive && max_spread <= tolerance,
        inconclusive,
        max_spread,
        tolerance,
        outcomes,
    })
}

/// The same scenario with every T_i replaced by its p-fold composition.
pub fn power_scenario(scenario: &Scenario, p: u32) -> Result<Scenario> {
    if p == 0 || p > MAX_POWER {
        return Err(Error::Usage(format!("power must lie in 1..={MAX_POWER}, got {p}")));
    }
    let mut out = scenario.clone();
    out.family.power = scenario.family.power * p;
    if out.family.power > MAX_POWER {
        return Err(Error::Usage(format!(
            "composed power {} exceeds {MAX_POWER}",
            out.family.power
        )));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveConfig {
    pub iteration: IterationConfig,
    pub horizon: usize,
    pub residual_indices: u64,
    pub residual_tolerance: f64,
    pub envelope_tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixedPointResult {
    pub limit: f64,
    pub trace: Trace,
    pub certificate: Option<ConvergenceCertificate>,
    /// Why no certificate could be built.
    pub certificate_error: Option<String>,
    pub envelope: Option<EnvelopeReport>,
    pub residuals: ResidualReport,
}

impl FixedPointResult {
    pub fn passed(&self) -> bool {
        self.trace.settled()
            && self.residuals.passed
            && self.envelope.as_ref().is_some_and(|e| e.passed)
    }
}

/// λ or series certificate for the scenario's active variant.
pub fn certificate_for(
    scenario: &Scenario,
    trace: &Trace,
    horizon: usize,
) -> Result<ConvergenceCertificate> {
    let variant = scenario.variant;
    let degree = scenario.degree();
    if variant.relaxed() {
        let r = series_report(&scenario.schedule, degree, horizon)?;
        build_certificate(scenario, trace, degree, CertificateSource::Series(&r))
    } else {
        let seq = derive_sequence(&scenario.schedule, degree, variant.sequence_variant(), horizon)?;
        let analysis = analyze_lambda(&seq, LambdaReading::RawValues);
        let cert = analysis
            .certificate()
            .ok_or_else(|| Error::Certificate("the derived sequence is not a λ-sequence".into()))?;
        build_certificate(scenario, trace, degree, CertificateSource::Lambda(cert))
    }
}

pub fn solve(scenario: &Scenario, x0: f64, config: &SolveConfig) -> Result<FixedPointResult> {
    let it = config.iteration;
    let trace = iterate(scenario, x0, it.max_steps, it.settle_tolerance, it.window)?;
    let limit = trace.last();
    let (certificate, certificate_error) = match certificate_for(scenario, &trace, config.horizon) {
        Ok(c) => (Some(c), None),
        Err(e) if matches!(e.root(), Error::Certificate(_) | Error::Hypothesis { .. }) => {
            (None, Some(e.to_string()))
        }
        Err(e) => return Err(e),
    };
    let envelope = certificate
        .as_ref()
        .map(|c| check_envelope(&trace, c, scenario, config.envelope_tolerance))
        .transpose()?;
    let indices: Vec<u64> = (1..=config.residual_indices).collect();
    let residuals = verify_common_fixed_point(scenario, limit, &indices, config.residual_tolerance)?;
    Ok(FixedPointResult {
        limit,
        trace,
        certificate,
        certificate_error,
        envelope,
        residuals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::builtin;

    #[test]
    fn first_example_trace() {
        let sc = builtin("example-1").unwrap();
        let t = iterate(&sc, 1.0, 200, SETTLE_TOLERANCE, 3).unwrap();
        for (k, &x) in t.points.iter().take(12).enumerate() {
            let n = (k + 1) as i32;
            let expect = 16f64.powi(-(n * (n + 1) / 2));
            assert!(((x - expect) / expect).abs() < 1e-12, "n = {n}");
        }
        assert!(t.settled());
        assert!(t.last() < 1e-30);
        // D(x_{k-1}, x_k) = x_{k-1} under the max metric
        assert_eq!(t.step_distances[1], t.points[0]);
    }

    #[test]
    fn third_example_trace() {
        let sc = builtin("example-3").unwrap();
        let t = iterate(&sc, 0.0, 200, SETTLE_TOLERANCE, 3).unwrap();
        assert_eq!(t.points[0], 1.0);
        assert!(t.points.iter().all(|&x| x == 1.0));
        assert_eq!(t.settled_at, Some(2));
    }

    #[test]
    fn identity_family_settles_at_first_step() {
        let mut sc = builtin("example-3").unwrap();
        sc.family = MapFamily::new(Expr::parse("x").unwrap(), sc.space.carrier()).unwrap();
        let t = iterate(&sc, 0.3, 50, SETTLE_TOLERANCE, 3).unwrap();
        assert_eq!(t.settled_at, Some(1));
        assert_eq!(t.last(), 0.3);
        let probe = probe_uniqueness(&sc, &[0.0, 0.5, 1.0], IterationConfig::default(), 1e-8).unwrap();
        assert!(!probe.unique);
        assert!(!probe.inconclusive);
        assert_eq!(probe.max_spread, 1.0);
    }

    #[test]
    fn range_error_carries_step() {
        let mut sc = builtin("example-3").unwrap();
        sc.family = MapFamily::new(Expr::parse("x + 0.4").unwrap(), sc.space.carrier()).unwrap();
        let e = iterate(&sc, 0.5, 10, SETTLE_TOLERANCE, 3).unwrap_err();
        match e {
            Error::AtStep { step: 2, source } => assert!(matches!(*source, Error::Range { index: 2, .. })),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn first_example_certificate() {
        let sc = builtin("example-1").unwrap();
        let t = iterate(&sc, 1.0, 200, SETTLE_TOLERANCE, 3).unwrap();
        let c = certificate_for(&sc, &t, 64).unwrap();
        assert_eq!(c.f_d01, 1.0);
        assert_eq!(c.first_index, 1);
        let r = 2f64.sqrt() / 2.0;
        assert!((c.bound(1).unwrap() - r / (1.0 - r)).abs() < 1e-9);
        for w in c.bounds.windows(2) {
            assert!(w[1] < w[0]);
        }
        let env = check_envelope(&t, &c, &sc, ENVELOPE_TOLERANCE).unwrap();
        assert!(env.passed);
        // F(D(x_1, x_{1+p})) = sqrt(1/16)
        assert!(env.pairs_checked > 0);
    }

    #[test]
    fn zero_lambda_gives_zero_bound() {
        let sc = builtin("example-3").unwrap();
        let t = iterate(&sc, 0.0, 20, SETTLE_TOLERANCE, 3).unwrap();
        let cert = LambdaCertificate {
            lambda: 0.0,
            n_lambda: 1,
            horizon: 8,
            max_tail_average: 0.0,
            reading: LambdaReading::RawValues,
        };
        let c = build_certificate(&sc, &t, 1.0, CertificateSource::Lambda(&cert)).unwrap();
        assert!(c.bounds.iter().all(|&b| b == 0.0));
        let bad = LambdaCertificate { lambda: 1.0, ..cert };
        assert!(matches!(
            build_certificate(&sc, &t, 1.0, CertificateSource::Lambda(&bad)),
            Err(Error::Certificate(_))
        ));
    }

    #[test]
    fn third_example_series_certificate() {
        let sc = builtin("example-3").unwrap();
        let t = iterate(&sc, 0.0, 200, SETTLE_TOLERANCE, 3).unwrap();
        let c = certificate_for(&sc, &t, 64).unwrap();
        assert_eq!(c.f_d01, 1.0);
        for n in 1..=t.len() {
            let expect = 11.0 * (10.0f64 / 11.0).powi(n as i32);
            assert!((c.bound(n).unwrap() - expect).abs() < 1e-9, "n = {n}");
        }
        assert!(check_envelope(&t, &c, &sc, ENVELOPE_TOLERANCE).unwrap().passed);
    }

    #[test]
    fn residuals() {
        let sc = builtin("example-1").unwrap();
        let r = verify_common_fixed_point(&sc, 0.0, &(1..=10).collect::<Vec<_>>(), 1e-12).unwrap();
        assert!(r.passed);
        assert_eq!(r.max_residual, 0.0);

        let sc = builtin("example-3").unwrap();
        let r = verify_common_fixed_point(&sc, 1.0, &(1..=10).collect::<Vec<_>>(), 1e-12).unwrap();
        assert!(r.passed);
        let r = verify_common_fixed_point(&sc, 0.0, &[1], 1e-12).unwrap();
        assert!(!r.passed);
        assert_eq!(r.residuals, vec![(1, 1.0)]);
    }

    #[test]
    fn uniqueness_probes() {
        let sc = builtin("example-1").unwrap();
        let p = probe_uniqueness(&sc, &[0.0, 0.3, 1.0], IterationConfig::default(), 1e-8).unwrap();
        assert!(p.unique);
        assert!(p.outcomes.iter().all(|o| o.limit.unwrap() < 1e-8));

        let sc = builtin("example-3").unwrap();
        let p = probe_uniqueness(&sc, &[0.0, 0.5, 1.0], IterationConfig::default(), 1e-8).unwrap();
        assert!(p.unique);
        assert!(p.outcomes.iter().all(|o| o.limit == Some(1.0)));
    }

    #[test]
    fn powers() {
        let sc = builtin("example-1").unwrap();
        let p2 = power_scenario(&sc, 2).unwrap();
        assert_eq!(p2.family.apply(1, 1.0).unwrap(), 1.0 / 256.0);
        let p1 = power_scenario(&sc, 1).unwrap();
        assert_eq!(
            iterate(&p1, 0.7, 50, SETTLE_TOLERANCE, 3).unwrap(),
            iterate(&sc, 0.7, 50, SETTLE_TOLERANCE, 3).unwrap()
        );
        assert!(power_scenario(&sc, 0).is_err());
        assert!(power_scenario(&sc, 17).is_err());

        let sc = builtin("example-3").unwrap();
        assert_eq!(power_scenario(&sc, 2).unwrap().family.apply(1, 0.5).unwrap(), 1.0);
    }
}
