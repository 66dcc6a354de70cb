//! End-to-end pipelines behind the CLI subcommands.

use serde_json::json;

use crate::condition::{
    check_condition, check_per_map_corollary, search_counterexample, ConditionVariant, SamplePlan,
};
use crate::control::{c_class_sample, psi_sample, uniform_sample, DEFAULT_SCALES};
use crate::error::Result;
use crate::lambda::{
    analyze_lambda, check_nonincreasing, derive_sequence, limsup_check, series_report,
    LambdaAnalysis, LambdaReading, LimsupVerdict, SequenceVariant, SeriesVerdict,
};
use crate::report::{CheckResult, RunReport};
use crate::scenario::{Scenario, CLASS_TOLERANCE};
use crate::solver::{probe_uniqueness, solve};
use crate::space::AXIOM_TOLERANCE;

#[derive(Debug, Clone, Default)]
pub struct VerifyOptions {
    pub variant: Option<ConditionVariant>,
    pub grid: Option<usize>,
    pub indices: Option<u64>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default)]
pub struct SolveOptions {
    pub start: Option<f64>,
    pub max_steps: Option<usize>,
    pub tolerance: Option<f64>,
}

#[derive(Debug, Clone, Default)]
pub struct LambdaOptions {
    pub horizon: Option<usize>,
    pub sequence: Option<SequenceVariant>,
    pub reading: LambdaReading,
}

#[derive(Debug, Clone, Default)]
pub struct HuntOptions {
    pub variant: Option<ConditionVariant>,
    pub budget: Option<usize>,
    pub seed: Option<u64>,
}

fn membership_check(name: &str, r: &crate::control::MembershipReport) -> CheckResult {
    let mut c = CheckResult::new(name, r.passed()).detail(r);
    if let Some(f) = r.worst_failure().and_then(|f| f.worst.as_ref()) {
        c = c.worst(f.violation).witness(f.point.clone());
    }
    c
}

/// Hypothesis checks plus the contractive condition.
pub fn run_verify(sc: &Scenario, opts: &VerifyOptions) -> Result<RunReport> {
    let d = &sc.defaults;
    let variant = opts.variant.unwrap_or(sc.variant);
    let mut checks = Vec::new();

    for a in sc
        .space
        .check_axioms(&sc.space.carrier().grid(d.axiom_grid), AXIOM_TOLERANCE)?
    {
        let mut c = CheckResult::new(format!("axiom_{:?}", a.axiom), a.passed);
        if let Some(w) = &a.worst {
            c = c.worst(w.violation).witness(w.point.clone());
        }
        checks.push(c.detail(&json!({ "samples_checked": a.samples_checked })));
    }

    let upper = sc.space.carrier().upper().max(1.0) * 2.0;
    let phi = sc
        .phi
        .check_class(&uniform_sample(upper, 21), &DEFAULT_SCALES, CLASS_TOLERANCE)?;
    checks.push(membership_check("phi_class", &phi));
    if variant.uses_psi() {
        if let Some(psi) = &sc.psi {
            let r = psi.check(&psi_sample(psi.arity()), CLASS_TOLERANCE)?;
            checks.push(membership_check("psi_class", &r));
        }
    }
    if let Some(f) = &sc.c_class {
        checks.push(membership_check("c_class", &f.check(&c_class_sample(), CLASS_TOLERANCE)?));
    }

    checks.extend(sequence_checks(sc, variant, d.horizon, None, LambdaReading::RawValues)?);

    let indices = opts.indices.unwrap_or(d.indices);
    let plan = SamplePlan::grid(
        sc.space.carrier().grid(opts.grid.unwrap_or(d.grid)),
        indices,
        d.exclude_diagonal,
        d.random_count,
        opts.seed.unwrap_or(d.seed),
    );
    let r = check_condition(sc, variant, &plan, d.tolerance)?;
    let mut c = CheckResult::new("condition", r.passed).worst(r.min_gap);
    if let Some(w) = r.worst_witness() {
        c = c.witness(vec![w.x, w.y, w.i as f64, w.j as f64, w.lhs, w.rhs]);
    }
    checks.push(c.detail(&r));

    if variant.cross_terms() {
        let r = check_per_map_corollary(sc, variant, d.corollary_n, d.horizon as u64)?;
        checks.push(CheckResult::new("per_map_corollary", r.passed).detail(&r));
    }

    Ok(RunReport::new(&sc.name, "verify", sc.warnings.clone(), checks))
}

/// λ-sequence checks for the strict theorems, limsup and Σ C_n for the relaxed ones.
fn sequence_checks(
    sc: &Scenario,
    variant: ConditionVariant,
    horizon: usize,
    sequence: Option<SequenceVariant>,
    reading: LambdaReading,
) -> Result<Vec<CheckResult>> {
    let degree = sc.degree();
    let mut checks = Vec::new();
    if variant.relaxed() {
        let r = series_report(&sc.schedule, degree, horizon)?;
        let mut c = CheckResult::new("series", r.verdict == SeriesVerdict::Converges);
        if let Some(q) = r.max_ratio {
            c = c.worst(q);
        }
        checks.push(c.detail(&r));

        let window = sc.defaults.limsup_window;
        let reports = (1..=sc.defaults.indices)
            .map(|j| limsup_check(&sc.schedule, degree, j, horizon, window))
            .collect::<Result<Vec<_>>>()?;
        let passed = reports.iter().all(|r| r.verdict == LimsupVerdict::Pass);
        let worst = reports.iter().map(|r| r.estimate).fold(f64::NEG_INFINITY, f64::max);
        checks.push(CheckResult::new("limsup", passed).worst(worst).detail(&reports));
    } else {
        let seq = derive_sequence(
            &sc.schedule,
            degree,
            sequence.unwrap_or(variant.sequence_variant()),
            horizon,
        )?;
        let analysis = analyze_lambda(&seq, reading);
        let c = match &analysis {
            LambdaAnalysis::Certified(cert) => CheckResult::new("lambda_sequence", true)
                .worst(cert.lambda)
                .witness(vec![cert.lambda, cert.n_lambda as f64]),
            LambdaAnalysis::Failed { witness_l, average } => {
                CheckResult::new("lambda_sequence", false)
                    .worst(*average)
                    .witness(vec![*witness_l as f64])
            }
        };
        checks.push(c.detail(&json!({ "analysis": analysis, "values": seq.values })));
        let mono = check_nonincreasing(&seq);
        let mut c = CheckResult::new("nonincreasing", mono.is_none());
        if let Some(i) = mono {
            c = c.witness(vec![i as f64]);
        }
        checks.push(c);
    }
    Ok(checks)
}

pub fn run_lambda(sc: &Scenario, opts: &LambdaOptions) -> Result<RunReport> {
    let horizon = opts.horizon.unwrap_or(sc.defaults.horizon);
    let checks = sequence_checks(sc, sc.variant, horizon, opts.sequence, opts.reading)?;
    Ok(RunReport::new(&sc.name, "lambda", sc.warnings.clone(), checks))
}

/// Iteration, certificate, envelope, residuals, expected limit and uniqueness.
pub fn run_solve(sc: &Scenario, opts: &SolveOptions) -> Result<RunReport> {
    let mut config = sc.solve_config();
    if let Some(n) = opts.max_steps {
        config.iteration.max_steps = n;
    }
    if let Some(t) = opts.tolerance {
        config.iteration.settle_tolerance = t;
    }
    let x0 = opts.start.unwrap_or(sc.start());
    let result = solve(sc, x0, &config)?;
    let mut checks = Vec::new();

    let t = &result.trace;
    checks.push(
        CheckResult::new("settled", t.settled())
            .worst(t.step_distances.last().copied().unwrap_or(0.0))
            .witness(vec![result.limit])
            .detail(t),
    );
    match (&result.certificate, &result.certificate_error) {
        (Some(c), _) => checks.push(CheckResult::new("certificate", true).detail(c)),
        (None, e) => checks.push(
            CheckResult::new("certificate", false).detail(&json!({ "error": e })),
        ),
    }
    if let Some(env) = &result.envelope {
        let mut c = CheckResult::new("envelope", env.passed).worst(env.max_excess);
        if let Some(w) = &env.worst {
            c = c.witness(vec![w.n as f64, w.p as f64, w.lhs, w.bound]);
        }
        checks.push(c.detail(env));
    }
    let r = &result.residuals;
    checks.push(
        CheckResult::new("residuals", r.passed)
            .worst(r.max_residual)
            .witness(vec![result.limit])
            .detail(r),
    );
    if let Some(expected) = sc.expected_limit {
        let gap = sc.space.sym_distance(result.limit, expected)?;
        checks.push(
            CheckResult::new("expected_limit", gap <= config.residual_tolerance)
                .worst(gap)
                .witness(vec![result.limit, expected]),
        );
    }
    let probe = probe_uniqueness(sc, &sc.starts(), config.iteration, config.residual_tolerance)?;
    checks.push(
        CheckResult::new("uniqueness", probe.unique)
            .worst(probe.max_spread)
            .detail(&probe),
    );
    Ok(RunReport::new(&sc.name, "solve", sc.warnings.clone(), checks))
}

/// Passes when no counterexample turns up.
pub fn run_hunt(sc: &Scenario, opts: &HuntOptions) -> Result<RunReport> {
    let d = &sc.defaults;
    let variant = opts.variant.unwrap_or(sc.variant);
    let h = search_counterexample(
        sc,
        variant,
        opts.budget.unwrap_or(d.hunt_budget),
        opts.seed.unwrap_or(d.seed),
        d.tolerance,
    )?;
    let mut c = CheckResult::new("counterexample", h.witness.is_none()).worst(h.best_gap);
    if let Some(w) = &h.witness {
        c = c.witness(vec![w.x, w.y, w.i as f64, w.j as f64, w.lhs, w.rhs]);
    }
    Ok(RunReport::new(&sc.name, "hunt", sc.warnings.clone(), vec![c.detail(&h)]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::builtin;

    #[test]
    fn first_example_passes_verify_and_solve() {
        let sc = builtin("example-1").unwrap();
        let v = run_verify(&sc, &VerifyOptions::default()).unwrap();
        assert!(v.passed(), "{:#?}", v.checks.iter().filter(|c| !c.passed).collect::<Vec<_>>());
        let s = run_solve(&sc, &SolveOptions::default()).unwrap();
        assert!(s.passed(), "{:#?}", s.checks.iter().filter(|c| !c.passed).collect::<Vec<_>>());
    }

    #[test]
    fn third_example_passes_verify_and_solve() {
        let sc = builtin("example-3").unwrap();
        let v = run_verify(&sc, &VerifyOptions::default()).unwrap();
        assert!(v.passed(), "{:#?}", v.checks.iter().filter(|c| !c.passed).collect::<Vec<_>>());
        assert!(v.check("per_map_corollary").unwrap().passed);
        let s = run_solve(&sc, &SolveOptions::default()).unwrap();
        assert!(s.passed(), "{:#?}", s.checks.iter().filter(|c| !c.passed).collect::<Vec<_>>());
    }

    #[test]
    fn lambda_report_for_first_example() {
        let sc = builtin("example-1").unwrap();
        let r = run_lambda(&sc, &LambdaOptions::default()).unwrap();
        let c = r.check("lambda_sequence").unwrap();
        assert!((c.worst_value.unwrap() - 2f64.sqrt() / 2.0).abs() < 1e-12);
    }

    #[test]
    fn hunt_on_negative_control() {
        let sc = Scenario::from_toml_str(include_str!("../scenarios/negative-control.toml")).unwrap();
        let r = run_hunt(&sc, &HuntOptions { budget: Some(500), ..Default::default() }).unwrap();
        assert!(!r.passed());
        assert!(r.checks[0].witness.is_some());
    }
}
