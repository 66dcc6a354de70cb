//! Scenario documents (TOML), their fail-fast loader and the built-in examples.

use serde::{Deserialize, Serialize};

use crate::condition::{ConditionVariant, VariantTag};
use crate::control::{
    c_class_sample, psi_sample, uniform_sample, CClassSpec, Coefficient, CoefficientSchedule,
    PhiSpec, PsiSpec, ScheduleSource, DEFAULT_SCALES,
};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::solver::{IterationConfig, MapFamily, SolveConfig};
use crate::space::{Carrier, Space, AXIOM_TOLERANCE};

pub const SCHEMA_VERSION: u32 = 1;
/// Declared and estimated homogeneity degree must agree this closely.
pub const DEGREE_TOLERANCE: f64 = 1e-6;
/// Tolerance for the Φ, ψ and C-class prechecks.
pub const CLASS_TOLERANCE: f64 = 1e-9;

pub const BUILTIN_NAMES: [&str; 3] = ["example-1", "example-2", "example-3"];

const BUILTIN_SOURCES: [&str; 3] = [
    include_str!("../scenarios/example-1.toml"),
    include_str!("../scenarios/example-2.toml"),
    include_str!("../scenarios/example-3.toml"),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDoc {
    pub schema_version: u32,
    pub name: String,
    pub variant: String,
    #[serde(default)]
    pub power_p: Option<u32>,
    #[serde(default)]
    pub expected_limit: Option<f64>,
    pub space: SpaceDoc,
    pub family: FamilyDoc,
    pub phi: PhiDoc,
    #[serde(default)]
    pub psi: Option<PsiDoc>,
    #[serde(default)]
    pub c_class: Option<CClassDoc>,
    pub schedule: ScheduleDoc,
    #[serde(default)]
    pub defaults: Defaults,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceDoc {
    pub distance: String,
    #[serde(default)]
    pub lower: f64,
    #[serde(default = "one")]
    pub upper: f64,
    #[serde(default = "one")]
    pub k: f64,
    #[serde(default = "three")]
    pub polygon_arity: usize,
    #[serde(default = "yes")]
    pub symmetric: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyDoc {
    pub map: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhiDoc {
    pub expr: String,
    pub degree: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PsiDoc {
    pub arity: usize,
    pub expr: String,
    #[serde(default)]
    pub symmetric: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CClassDoc {
    pub expr: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleDoc {
    #[serde(default)]
    pub anchor_a: Option<String>,
    #[serde(default)]
    pub anchor_b: Option<String>,
    #[serde(default)]
    pub delta: Option<String>,
    #[serde(default)]
    pub gamma: Option<String>,
    #[serde(default)]
    pub gamma_zero: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Defaults {
    pub grid: usize,
    pub indices: u64,
    pub exclude_diagonal: bool,
    pub random_count: usize,
    pub seed: u64,
    pub horizon: usize,
    pub tolerance: f64,
    pub axiom_grid: usize,
    pub settle_tol: f64,
    pub window: usize,
    pub max_steps: usize,
    pub start: Option<f64>,
    pub starts: Vec<f64>,
    pub residual_indices: u64,
    pub residual_tol: f64,
    pub hunt_budget: usize,
    pub limsup_window: usize,
    pub corollary_n: u64,
}

impl Default for Defaults {
    fn default() -> Self {
        Defaults {
            grid: 21,
            indices: 5,
            exclude_diagonal: true,
            random_count: 200,
            seed: 0,
            horizon: 64,
            tolerance: 1e-9,
            axiom_grid: 9,
            settle_tol: 1e-10,
            window: 3,
            max_steps: 200,
            start: None,
            starts: Vec::new(),
            residual_indices: 32,
            residual_tol: 1e-8,
            hunt_budget: 10_000,
            limsup_window: 8,
            corollary_n: 10,
        }
    }
}

fn one() -> f64 {
    1.0
}

fn three() -> usize {
    3
}

fn yes() -> bool {
    true
}

/// A validated scenario, ready for every pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub space: Space,
    pub family: MapFamily,
    pub phi: PhiSpec,
    pub psi: Option<PsiSpec>,
    pub c_class: Option<CClassSpec>,
    pub schedule: CoefficientSchedule,
    pub variant: ConditionVariant,
    pub defaults: Defaults,
    pub expected_limit: Option<f64>,
    /// Class-membership prechecks that failed in non-strict mode.
    pub warnings: Vec<String>,
}

impl Scenario {
    pub fn from_toml_str(text: &str) -> Result<Scenario> {
        load_scenario(&parse_doc(text)?, false)
    }

    /// Homogeneity degree entering δ^s and K^s; the identity-F variant fixes it at 1.
    pub fn degree(&self) -> f64 {
        if self.variant.tag() == VariantTag::KC_identity {
            1.0
        } else {
            self.phi.degree()
        }
    }

    pub fn start(&self) -> f64 {
        self.defaults.start.unwrap_or(self.space.carrier().lower())
    }

    pub fn starts(&self) -> Vec<f64> {
        if self.defaults.starts.is_empty() {
            let c = self.space.carrier();
            vec![c.lower(), c.lerp(0.5), c.upper()]
        } else {
            self.defaults.starts.clone()
        }
    }

    pub fn iteration_config(&self) -> IterationConfig {
        IterationConfig {
            max_steps: self.defaults.max_steps,
            settle_tolerance: self.defaults.settle_tol,
            window: self.defaults.window,
        }
    }

    pub fn solve_config(&self) -> SolveConfig {
        SolveConfig {
            iteration: self.iteration_config(),
            horizon: self.defaults.horizon,
            residual_indices: self.defaults.residual_indices,
            residual_tolerance: self.defaults.residual_tol,
            envelope_tolerance: crate::solver::ENVELOPE_TOLERANCE,
        }
    }
}

pub fn parse_doc(text: &str) -> Result<ScenarioDoc> {
    toml::from_str(text).map_err(|e| Error::Scenario(e.message().to_string()))
}

fn parse_field(text: &str, field: &str) -> Result<Expr> {
    Expr::parse(text).map_err(|e| match e {
        Error::Parse { offset, message } => Error::Scenario(format!(
            "{field}: parse error at byte {offset}: {message}"
        )),
        other => other,
    })
}

/// Builds and validates a scenario. Structural problems, out-of-range maps,
/// schedule bound violations and degree mismatches are errors; failed class
/// prechecks become warnings unless `strict`.
pub fn load_scenario(doc: &ScenarioDoc, strict: bool) -> Result<Scenario> {
    if doc.schema_version != SCHEMA_VERSION {
        return Err(Error::Scenario(format!(
            "unsupported schema_version {} (expected {SCHEMA_VERSION})",
            doc.schema_version
        )));
    }
    let variant = match doc.power_p {
        Some(p) if !doc.variant.contains(':') => format!("{}:{p}", doc.variant),
        _ => doc.variant.clone(),
    };
    let variant: ConditionVariant = variant
        .parse()
        .map_err(|e: Error| Error::Scenario(e.root().to_string()))?;

    let carrier = Carrier::new(doc.space.lower, doc.space.upper)?;
    let space = Space::new(
        carrier,
        parse_field(&doc.space.distance, "space.distance")?,
        doc.space.k,
        doc.space.polygon_arity,
        doc.space.symmetric,
    )?;
    let family = MapFamily::new(parse_field(&doc.family.map, "family.map")?, carrier)?;
    let phi = PhiSpec::new(parse_field(&doc.phi.expr, "phi.expr")?, doc.phi.degree)?;

    let estimated = phi.estimate_degree(&DEFAULT_SCALES)?;
    if (estimated - phi.degree()).abs() > DEGREE_TOLERANCE {
        return Err(Error::Scenario(format!(
            "phi declares degree {} but scales like degree {estimated}",
            phi.degree()
        )));
    }

    let mut warnings = Vec::new();
    let psi = match &doc.psi {
        Some(p) => Some(PsiSpec::new(p.arity, parse_field(&p.expr, "psi.expr")?, p.symmetric)?),
        None => None,
    };
    if let Some(p) = &psi {
        if !variant.uses_psi() {
            warnings.push(format!("{variant} has no ψ term; the declared psi is ignored"));
        } else if p.arity() != variant.psi_arity() {
            return Err(Error::Scenario(format!(
                "{variant} needs a {}-argument psi, got arity {}",
                variant.psi_arity(),
                p.arity()
            )));
        }
        if variant.asymmetric() && !p.is_symmetric() {
            return Err(Error::Scenario(format!("{variant} needs psi flagged symmetric")));
        }
    }

    let c_class = match &doc.c_class {
        Some(c) => Some(CClassSpec::new(parse_field(&c.expr, "c_class.expr")?)?),
        None => None,
    };
    if variant.tag() == VariantTag::CCLASS && c_class.is_none() {
        return Err(Error::Scenario("CCLASS needs a [c_class] section".into()));
    }

    let s = &doc.schedule;
    let source = match (&s.anchor_a, &s.delta) {
        (Some(a), None) => {
            if s.gamma.is_some() {
                return Err(Error::Scenario("anchor schedules take anchor_b, not gamma".into()));
            }
            ScheduleSource::Anchors {
                a: parse_field(a, "schedule.anchor_a")?,
                b: s.anchor_b.as_deref().map(|b| parse_field(b, "schedule.anchor_b")).transpose()?,
            }
        }
        (None, Some(d)) => {
            if s.anchor_b.is_some() {
                return Err(Error::Scenario("closed-form schedules take gamma, not anchor_b".into()));
            }
            ScheduleSource::ClosedForm {
                delta: parse_field(d, "schedule.delta")?,
                gamma: s.gamma.as_deref().map(|g| parse_field(g, "schedule.gamma")).transpose()?,
            }
        }
        _ => {
            return Err(Error::Scenario(
                "schedule needs exactly one of anchor_a or delta".into(),
            ))
        }
    };
    let schedule = CoefficientSchedule::new(source, s.gamma_zero, space.clone())?;
    if variant.uses_psi() && psi.is_none() && !schedule.gamma_zero() {
        return Err(Error::Scenario(format!(
            "{variant} needs a [psi] section or gamma_zero = true"
        )));
    }
    if variant.uses_psi() && psi.is_some() && !schedule.has_gamma() && !schedule.gamma_zero() {
        return Err(Error::Scenario(format!(
            "{variant} uses ψ but the schedule defines no gamma"
        )));
    }

    let scenario = Scenario {
        name: doc.name.clone(),
        space,
        family,
        phi,
        psi,
        c_class,
        schedule,
        variant,
        defaults: doc.defaults.clone(),
        expected_limit: doc.expected_limit,
        warnings,
    };
    validate_defaults(&scenario)?;
    check_schedule_bounds(&scenario)?;
    check_maps(&scenario)?;
    let failures = class_prechecks(&scenario)?;
    let mut scenario = scenario;
    if strict && !failures.is_empty() {
        return Err(Error::Scenario(format!(
            "strict mode: {}",
            failures.join("; ")
        )));
    }
    scenario.warnings.extend(failures);
    Ok(scenario)
}

fn validate_defaults(sc: &Scenario) -> Result<()> {
    let d = &sc.defaults;
    let bad = |what: &str| Err(Error::Scenario(format!("defaults.{what} is out of range")));
    if d.grid < 2 {
        return bad("grid");
    }
    if d.indices == 0 {
        return bad("indices");
    }
    if d.horizon < 2 || d.horizon <= d.limsup_window || d.limsup_window == 0 {
        return bad("horizon / limsup_window");
    }
    if d.window == 0 || d.max_steps == 0 {
        return bad("window / max_steps");
    }
    if !(d.tolerance >= 0.0 && d.settle_tol > 0.0 && d.residual_tol >= 0.0) {
        return bad("tolerance");
    }
    if d.axiom_grid == 0 || d.hunt_budget == 0 || d.residual_indices == 0 {
        return bad("axiom_grid / hunt_budget / residual_indices");
    }
    let c = sc.space.carrier();
    if let Some(s) = d.start {
        if !c.contains(s) {
            return bad("start");
        }
    }
    if d.starts.iter().any(|&s| !c.contains(s)) {
        return bad("starts");
    }
    if let Some(l) = sc.expected_limit {
        if !c.contains(l) {
            return Err(Error::Scenario("expected_limit lies outside the carrier".into()));
        }
    }
    Ok(())
}

/// δ and γ on {1..indices}² and on consecutive pairs up to the horizon.
fn check_schedule_bounds(sc: &Scenario) -> Result<()> {
    let n = sc.defaults.indices;
    let mut pairs: Vec<(u64, u64)> = (1..=n).flat_map(|i| (1..=n).map(move |j| (i, j))).collect();
    pairs.extend((1..=sc.defaults.horizon as u64).map(|i| (i, i + 1)));
    let v = sc.variant;
    let gamma_needed = v.uses_psi() && (sc.schedule.has_gamma() || sc.schedule.gamma_zero());
    for (i, j) in pairs {
        let d = sc.schedule.coefficient(Coefficient::Delta, i, j)?;
        if v.bounds_delta() && d >= 1.0 {
            return Err(Error::Hypothesis {
                index: i,
                message: format!("δ_{{{i},{j}}} = {d} is not below 1 under {v}"),
            });
        }
        if gamma_needed {
            let g = sc.schedule.coefficient(Coefficient::Gamma, i, j)?;
            if v.bounds_gamma() && g >= 1.0 {
                return Err(Error::Hypothesis {
                    index: i,
                    message: format!("γ_{{{i},{j}}} = {g} is not below 1 under {v}"),
                });
            }
        }
    }
    Ok(())
}

/// Every T_i, i ≤ indices, must map the default grid and the starts into the carrier.
fn check_maps(sc: &Scenario) -> Result<()> {
    let c = sc.space.carrier();
    let mut points = c.grid(sc.defaults.grid);
    points.extend(sc.starts());
    points.push(sc.start());
    let p = sc.variant.composition();
    for i in 1..=sc.defaults.indices {
        for &x in &points {
            sc.family.apply_power(i, x, p)?;
        }
    }
    Ok(())
}

/// Human-readable descriptions of every failed class check.
fn class_prechecks(sc: &Scenario) -> Result<Vec<String>> {
    let mut out = Vec::new();
    let describe = |r: &crate::control::MembershipReport| {
        r.worst_failure().map(|c| {
            let at = c
                .worst
                .as_ref()
                .map(|w| format!(" at {:?} (violation {:e})", w.point, w.violation))
                .unwrap_or_default();
            format!("{} fails {}{at}", r.class, c.property)
        })
    };
    let upper = sc.space.carrier().upper().max(1.0) * 2.0;
    let phi = sc
        .phi
        .check_class(&uniform_sample(upper, 21), &DEFAULT_SCALES, CLASS_TOLERANCE)?;
    out.extend(describe(&phi));
    if sc.variant.uses_psi() {
        if let Some(psi) = &sc.psi {
            out.extend(describe(&psi.check(&psi_sample(psi.arity()), CLASS_TOLERANCE)?));
        }
    }
    if let Some(f) = &sc.c_class {
        out.extend(describe(&f.check(&c_class_sample(), CLASS_TOLERANCE)?));
    }
    let axioms = sc
        .space
        .check_axioms(&sc.space.carrier().grid(sc.defaults.axiom_grid), AXIOM_TOLERANCE)?;
    for a in axioms.iter().filter(|a| !a.passed) {
        out.push(format!("space fails {:?}", a.axiom));
    }
    Ok(out)
}

pub fn builtin_scenarios() -> Vec<ScenarioDoc> {
    BUILTIN_SOURCES
        .iter()
        .map(|s| parse_doc(s).expect("built-in scenarios parse"))
        .collect()
}

pub fn builtin(name: &str) -> Result<Scenario> {
    let k = BUILTIN_NAMES
        .iter()
        .position(|&n| n == name)
        .ok_or_else(|| Error::Usage(format!("no built-in scenario named `{name}`")))?;
    Scenario::from_toml_str(BUILTIN_SOURCES[k])
}

/// A built-in name, or a path to a TOML document.
pub fn resolve(name_or_path: &str, strict: bool) -> Result<Scenario> {
    if let Some(k) = BUILTIN_NAMES.iter().position(|&n| n == name_or_path) {
        return load_scenario(&parse_doc(BUILTIN_SOURCES[k])?, strict);
    }
    let text = std::fs::read_to_string(name_or_path).map_err(|e| {
        Error::Usage(format!("`{name_or_path}` is neither a built-in nor a readable file: {e}"))
    })?;
    load_scenario(&parse_doc(&text)?, strict)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_load_cleanly() {
        let docs = builtin_scenarios();
        assert_eq!(docs.len(), 3);
        for (doc, name) in docs.iter().zip(BUILTIN_NAMES) {
            assert_eq!(doc.name, name);
            let sc = load_scenario(doc, true).unwrap();
            assert!(sc.warnings.is_empty(), "{name}: {:?}", sc.warnings);
        }
        let one = builtin("example-1").unwrap();
        assert_eq!(one.variant.tag(), VariantTag::KC3_noPsi);
        assert_eq!(one.phi.degree(), 0.5);
        assert_eq!(one.expected_limit, Some(0.0));
        assert_eq!(builtin("example-2").unwrap().variant.tag(), VariantTag::KC_relaxed_noPsi);
        let three = builtin("example-3").unwrap();
        assert_eq!(three.variant.tag(), VariantTag::CHAT_relaxed);
        assert_eq!(three.expected_limit, Some(1.0));
        assert!(builtin("example-4").is_err());
    }

    fn negative() -> ScenarioDoc {
        parse_doc(include_str!("../scenarios/negative-control.toml")).unwrap()
    }

    #[test]
    fn arity_mismatch_is_rejected() {
        let mut doc = negative();
        doc.variant = "KC3".into();
        doc.psi = Some(PsiDoc {
            arity: 2,
            expr: "x + y".into(),
            symmetric: false,
        });
        let e = load_scenario(&doc, false).unwrap_err();
        assert!(e.to_string().contains("3-argument psi"), "{e}");
    }

    #[test]
    fn bound_violation_is_rejected() {
        let mut doc = negative();
        doc.schedule.delta = Some("if(i = 1, if(j = 2, 1.2, 0.4), 0.4)".into());
        match load_scenario(&doc, false) {
            Err(Error::Hypothesis { index: 1, .. }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn degree_mismatch_fails_fast() {
        let mut doc = negative();
        doc.phi = PhiDoc {
            expr: "sqrt(t)".into(),
            degree: 1.0,
        };
        let e = load_scenario(&doc, false).unwrap_err();
        assert!(e.to_string().contains("degree"), "{e}");
    }

    #[test]
    fn scope_and_schema_errors() {
        let mut doc = negative();
        doc.family.map = "x + y".into();
        assert!(matches!(load_scenario(&doc, false), Err(Error::Scenario(_))));

        let mut doc = negative();
        doc.schema_version = 2;
        assert!(load_scenario(&doc, false).is_err());

        let text = include_str!("../scenarios/negative-control.toml").replace("[family]", "[family]\nextra = 1");
        assert!(matches!(parse_doc(&text), Err(Error::Scenario(_))));

        let mut doc = negative();
        doc.family.map = "x + 0.5".into();
        assert!(matches!(load_scenario(&doc, false).map_err(|e| e.root().clone()), Err(Error::Range { .. })));
    }

    #[test]
    fn class_failures_are_warnings_unless_strict() {
        let mut doc = negative();
        doc.variant = "KC".into();
        doc.psi = Some(PsiDoc {
            arity: 2,
            expr: "0 * x".into(),
            symmetric: false,
        });
        let sc = load_scenario(&doc, false).unwrap();
        assert_eq!(sc.warnings.len(), 1);
        assert!(sc.warnings[0].contains("zero_set"));
        assert!(load_scenario(&doc, true).is_err());
    }

    #[test]
    fn psi_requirements() {
        let mut doc = negative();
        doc.variant = "KC".into();
        doc.schedule.gamma_zero = false;
        assert!(load_scenario(&doc, false).is_err());
        doc.variant = "CCLASS".into();
        doc.schedule.gamma_zero = true;
        assert!(load_scenario(&doc, false).is_err());
        doc.c_class = Some(CClassDoc {
            expr: "s - t".into(),
        });
        assert!(load_scenario(&doc, false).is_ok());
    }
}
