//! Contractive inequalities evaluated at concrete tuples (x, y, i, j).
//!
//! Every variant compares LHS = F(D(T_i x, T_j y)) against a right-hand side
//! built from δ_ij, γ_ij, ψ and F. The gap is RHS - LHS; a tuple violates
//! the condition when the gap drops below minus the tolerance.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::control::Coefficient;
use crate::error::{Error, Result};
use crate::lambda::SequenceVariant;
use crate::scenario::Scenario;
use crate::space::lex_cmp;

pub const CONDITION_TOLERANCE: f64 = 1e-9;
pub const MAX_POWER: u32 = 16;
const REPORTED_WITNESSES: usize = 5;

/// Names match the tags written in scenario files.
#[allow(non_camel_case_types)]
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum VariantTag {
    KC,
    KC_identity,
    KC_noPsi,
    KC3,
    KC3_noPsi,
    KC_relaxed,
    KC_relaxed_noPsi,
    CHAT,
    CHAT3,
    CHAT_relaxed,
    ASYM_KC,
    ASYM_KC3,
    POWER_KC,
    POWER_KC3,
    CCLASS,
}

impl VariantTag {
    pub const ALL: [VariantTag; 15] = [
        VariantTag::KC,
        VariantTag::KC_identity,
        VariantTag::KC_noPsi,
        VariantTag::KC3,
        VariantTag::KC3_noPsi,
        VariantTag::KC_relaxed,
        VariantTag::KC_relaxed_noPsi,
        VariantTag::CHAT,
        VariantTag::CHAT3,
        VariantTag::CHAT_relaxed,
        VariantTag::ASYM_KC,
        VariantTag::ASYM_KC3,
        VariantTag::POWER_KC,
        VariantTag::POWER_KC3,
        VariantTag::CCLASS,
    ];

    pub fn name(self) -> &'static str {
        match self {
            VariantTag::KC => "KC",
            VariantTag::KC_identity => "KC_identity",
            VariantTag::KC_noPsi => "KC_noPsi",
            VariantTag::KC3 => "KC3",
            VariantTag::KC3_noPsi => "KC3_noPsi",
            VariantTag::KC_relaxed => "KC_relaxed",
            VariantTag::KC_relaxed_noPsi => "KC_relaxed_noPsi",
            VariantTag::CHAT => "CHAT",
            VariantTag::CHAT3 => "CHAT3",
            VariantTag::CHAT_relaxed => "CHAT_relaxed",
            VariantTag::ASYM_KC => "ASYM_KC",
            VariantTag::ASYM_KC3 => "ASYM_KC3",
            VariantTag::POWER_KC => "POWER_KC",
            VariantTag::POWER_KC3 => "POWER_KC3",
            VariantTag::CCLASS => "CCLASS",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ConditionVariant {
    tag: VariantTag,
    power: Option<u32>,
}

impl ConditionVariant {
    pub fn new(tag: VariantTag, power: Option<u32>) -> Result<Self> {
        let is_power = matches!(tag, VariantTag::POWER_KC | VariantTag::POWER_KC3);
        match (is_power, power) {
            (true, None) => Err(Error::Usage(format!("{} needs a power p", tag.name()))),
            (true, Some(p)) if p == 0 || p > MAX_POWER => Err(Error::Usage(format!(
                "power must lie in 1..={MAX_POWER}, got {p}"
            ))),
            (false, Some(_)) => Err(Error::Usage(format!("{} takes no power", tag.name()))),
            _ => Ok(ConditionVariant { tag, power }),
        }
    }

    pub fn plain(tag: VariantTag) -> Self {
        ConditionVariant::new(tag, None).expect("non-power tag")
    }

    pub fn tag(&self) -> VariantTag {
        self.tag
    }

    pub fn power(&self) -> Option<u32> {
        self.power
    }

    /// Carries D(x, y) as a third bracket term and uses three-argument ψ.
    pub fn three_term(&self) -> bool {
        use VariantTag::*;
        matches!(self.tag, KC3 | KC3_noPsi | CHAT3 | ASYM_KC3 | POWER_KC3 | CCLASS)
    }

    pub fn uses_psi(&self) -> bool {
        use VariantTag::*;
        !matches!(self.tag, KC_noPsi | KC3_noPsi | KC_relaxed_noPsi)
    }

    pub fn psi_arity(&self) -> usize {
        if self.three_term() {
            3
        } else {
            2
        }
    }

    /// Chatterjea form: the bracket uses D(x, T_j y) and D(y, T_i x).
    pub fn cross_terms(&self) -> bool {
        use VariantTag::*;
        matches!(self.tag, CHAT | CHAT3 | CHAT_relaxed)
    }

    pub fn asymmetric(&self) -> bool {
        matches!(self.tag, VariantTag::ASYM_KC | VariantTag::ASYM_KC3)
    }

    /// Certified through limsup and Σ C_n rather than a λ-sequence.
    pub fn relaxed(&self) -> bool {
        use VariantTag::*;
        matches!(self.tag, KC_relaxed | KC_relaxed_noPsi | CHAT_relaxed)
    }

    /// Requires δ_ij < 1 on every pair.
    pub fn bounds_delta(&self) -> bool {
        !matches!(self.tag, VariantTag::KC_relaxed | VariantTag::CHAT_relaxed)
    }

    /// Requires γ_ij < 1 on every pair.
    pub fn bounds_gamma(&self) -> bool {
        self.bounds_delta() && self.uses_psi()
    }

    pub fn sequence_variant(&self) -> SequenceVariant {
        if self.three_term() {
            SequenceVariant::Doubled
        } else {
            SequenceVariant::Plain
        }
    }

    /// Map composition count on the left-hand side and in the bracket.
    pub fn composition(&self) -> u32 {
        self.power.unwrap_or(1)
    }
}

impl fmt::Display for ConditionVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.power {
            Some(p) => write!(f, "{}:{p}", self.tag.name()),
            None => f.write_str(self.tag.name()),
        }
    }
}

impl FromStr for ConditionVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, power) = match s.split_once(':') {
            Some((n, p)) => {
                let p = p
                    .trim()
                    .parse::<u32>()
                    .map_err(|_| Error::Usage(format!("bad power in variant `{s}`")))?;
                (n.trim(), Some(p))
            }
            None => (s.trim(), None),
        };
        let tag = VariantTag::ALL
            .into_iter()
            .find(|t| t.name() == name)
            .ok_or_else(|| Error::Usage(format!("unknown condition variant `{name}`")))?;
        ConditionVariant::new(tag, power)
    }
}

impl Serialize for ConditionVariant {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sides {
    pub lhs: f64,
    pub rhs: f64,
}

impl Sides {
    pub fn gap(&self) -> f64 {
        self.rhs - self.lhs
    }
}

/// Evaluates both sides of `variant` at one tuple.
pub fn condition_sides(
    scenario: &Scenario,
    variant: ConditionVariant,
    x: f64,
    y: f64,
    i: u64,
    j: u64,
) -> Result<Sides> {
    sides_inner(scenario, variant, x, y, i, j).map_err(|e| e.at_tuple(x, y, i, j))
}

fn sides_inner(
    sc: &Scenario,
    variant: ConditionVariant,
    x: f64,
    y: f64,
    i: u64,
    j: u64,
) -> Result<Sides> {
    if i == 0 || j == 0 {
        return Err(Error::Usage("indices start at 1".into()));
    }
    let space = &sc.space;
    let d = |a: f64, b: f64| space.distance(a, b);
    let ds = |a: f64, b: f64| space.sym_distance(a, b);
    let phi = |t: f64| sc.phi.eval(t);
    let p = variant.composition();
    let tix = sc.family.apply_power(i, x, p)?;
    let tjy = sc.family.apply_power(j, y, p)?;

    let delta = sc.schedule.coefficient(Coefficient::Delta, i, j)?;
    if variant.bounds_delta() && delta >= 1.0 {
        return Err(Error::Hypothesis {
            index: i,
            message: format!("δ_{{{i},{j}}} = {delta} is not below 1 under {variant}"),
        });
    }

    // Bracket terms and ψ arguments.
    let (bracket, psi_args): (Vec<f64>, Vec<f64>) = if variant.cross_terms() {
        let a = d(x, tjy)?;
        let b = d(y, tix)?;
        let mut br = vec![a, b];
        if variant.three_term() {
            br.push(d(x, y)?);
        }
        (br.clone(), br)
    } else if variant.asymmetric() {
        let mut br = vec![d(x, tix)?, d(tjy, y)?];
        let mut args = vec![ds(x, tix)?, ds(y, tjy)?];
        if variant.three_term() {
            br.push(d(x, y)?);
            args.push(ds(x, y)?);
        }
        (br, args)
    } else {
        let mut br = vec![d(x, tix)?, d(y, tjy)?];
        if variant.three_term() {
            br.push(d(x, y)?);
        }
        (br.clone(), br)
    };
    let sum: f64 = bracket.iter().sum();

    let lhs_d = d(tix, tjy)?;
    let identity = variant.tag() == VariantTag::KC_identity;
    let lhs = if identity { lhs_d } else { phi(lhs_d)? };

    // γ ψ term, before F.
    let gamma_psi = if variant.uses_psi() {
        match &sc.psi {
            Some(psi) => {
                let gamma = sc.schedule.coefficient(Coefficient::Gamma, i, j)?;
                if variant.bounds_gamma() && gamma >= 1.0 {
                    return Err(Error::Hypothesis {
                        index: i,
                        message: format!("γ_{{{i},{j}}} = {gamma} is not below 1 under {variant}"),
                    });
                }
                Some(gamma * psi.eval(&psi_args)?)
            }
            None if sc.schedule.gamma_zero() => None,
            None => {
                return Err(Error::Scenario(format!(
                    "{variant} needs psi or gamma_zero"
                )))
            }
        }
    } else {
        None
    };

    let rhs = match variant.tag() {
        VariantTag::KC_identity => delta * sum - gamma_psi.unwrap_or(0.0),
        VariantTag::CCLASS => {
            let f = sc
                .c_class
                .as_ref()
                .ok_or_else(|| Error::Scenario("CCLASS needs a c_class function".into()))?;
            let first = phi(delta * sum)?;
            let second = match gamma_psi {
                Some(g) => phi(g)?,
                None => 0.0,
            };
            f.eval(first, second)?
        }
        _ => {
            let first = phi(delta * sum)?;
            match gamma_psi {
                Some(g) => first - phi(g)?,
                None => first,
            }
        }
    };
    if !lhs.is_finite() || !rhs.is_finite() {
        return Err(Error::Numerical("non-finite condition side".into()));
    }
    Ok(Sides { lhs, rhs })
}

/// Which tuples to evaluate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SamplePlan {
    pub x_grid: Vec<f64>,
    pub index_pairs: Vec<(u64, u64)>,
    /// Skip tuples with x == y (exact).
    pub exclude_diagonal: bool,
    pub random_count: usize,
    pub seed: u64,
}

impl SamplePlan {
    /// Grid × grid × {1..indices}², plus random draws.
    pub fn grid(
        x_grid: Vec<f64>,
        indices: u64,
        exclude_diagonal: bool,
        random_count: usize,
        seed: u64,
    ) -> Self {
        let index_pairs = (1..=indices)
            .flat_map(|i| (1..=indices).map(move |j| (i, j)))
            .collect();
        SamplePlan {
            x_grid,
            index_pairs,
            exclude_diagonal,
            random_count,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.index_pairs.is_empty() {
            return Err(Error::Usage("sample plan has no index pairs".into()));
        }
        if self.x_grid.is_empty() && self.random_count == 0 {
            return Err(Error::Usage("sample plan has no points".into()));
        }
        if self.index_pairs.iter().any(|&(i, j)| i == 0 || j == 0) {
            return Err(Error::Usage("indices start at 1".into()));
        }
        Ok(())
    }

    /// Every tuple of the plan, grid first, then seeded draws.
    pub fn tuples(&self, scenario: &Scenario) -> Vec<Tuple> {
        let mut out = Vec::new();
        for &(i, j) in &self.index_pairs {
            for &x in &self.x_grid {
                for &y in &self.x_grid {
                    out.push(Tuple { x, y, i, j });
                }
            }
        }
        let carrier = scenario.space.carrier();
        out.extend((0..self.random_count as u64).map(|k| {
            random_tuple(self.seed, k, &self.index_pairs, |u| carrier.lerp(u))
        }));
        if self.exclude_diagonal {
            out.retain(|t| t.x != t.y);
        }
        out
    }
}

/// Draw number `k` of the stream seeded by `seed`, independent of evaluation order.
fn random_tuple(
    seed: u64,
    k: u64,
    pairs: &[(u64, u64)],
    lerp: impl Fn(f64) -> f64,
) -> Tuple {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(k);
    let x = lerp(rng.gen::<f64>());
    let y = lerp(rng.gen::<f64>());
    let (i, j) = pairs[rng.gen_range(0..pairs.len())];
    Tuple { x, y, i, j }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tuple {
    pub x: f64,
    pub y: f64,
    pub i: u64,
    pub j: u64,
}

impl Tuple {
    fn key(&self) -> [f64; 4] {
        [self.x, self.y, self.i as f64, self.j as f64]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TupleWitness {
    pub x: f64,
    pub y: f64,
    pub i: u64,
    pub j: u64,
    pub lhs: f64,
    pub rhs: f64,
    pub gap: f64,
}

impl TupleWitness {
    fn new(t: Tuple, s: Sides) -> Self {
        TupleWitness {
            x: t.x,
            y: t.y,
            i: t.i,
            j: t.j,
            lhs: s.lhs,
            rhs: s.rhs,
            gap: s.gap(),
        }
    }

    fn tuple(&self) -> Tuple {
        Tuple {
            x: self.x,
            y: self.y,
            i: self.i,
            j: self.j,
        }
    }

    /// Smaller gap first, then lexicographic tuple.
    fn order(&self, other: &TupleWitness) -> Ordering {
        self.gap
            .total_cmp(&other.gap)
            .then_with(|| lex_cmp(&self.tuple().key(), &other.tuple().key()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionReport {
    pub variant: ConditionVariant,
    pub tuples_checked: usize,
    pub min_gap: f64,
    pub passed: bool,
    pub tolerance: f64,
    /// Up to five tuples with the smallest gaps, worst first.
    pub witnesses: Vec<TupleWitness>,
}

impl ConditionReport {
    pub fn worst_witness(&self) -> Option<&TupleWitness> {
        self.witnesses.first()
    }
}

fn evaluate_all(
    scenario: &Scenario,
    variant: ConditionVariant,
    tuples: &[Tuple],
) -> Result<Vec<TupleWitness>> {
    let results: Vec<Result<TupleWitness>> = tuples
        .par_iter()
        .map(|&t| condition_sides(scenario, variant, t.x, t.y, t.i, t.j).map(|s| TupleWitness::new(t, s)))
        .collect();
    // First error in plan order, so failures are reproducible.
    results.into_iter().collect()
}

pub fn check_condition(
    scenario: &Scenario,
    variant: ConditionVariant,
    plan: &SamplePlan,
    tolerance: f64,
) -> Result<ConditionReport> {
    plan.validate()?;
    let tuples = plan.tuples(scenario);
    let mut evaluated = evaluate_all(scenario, variant, &tuples)?;
    evaluated.sort_by(|a, b| a.order(b));
    evaluated.truncate(REPORTED_WITNESSES);
    let min_gap = evaluated.first().map_or(f64::INFINITY, |w| w.gap);
    Ok(ConditionReport {
        variant,
        tuples_checked: tuples.len(),
        min_gap,
        passed: min_gap >= -tolerance,
        tolerance,
        witnesses: evaluated,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HuntResult {
    pub budget: usize,
    pub seed: u64,
    /// Index of the random draw that led to the witness.
    pub draw: Option<usize>,
    pub witness: Option<TupleWitness>,
    /// Smallest gap seen over draws and refinements.
    pub best_gap: f64,
}

const REFINE_STARTS: usize = 8;
const HUNT_CHUNK: usize = 256;
const REFINE_ROUNDS: usize = 48;

/// Seeded random search over the carrier and the scenario's index range,
/// followed by coordinate descent on (x, y) from the most promising draws.
pub fn search_counterexample(
    scenario: &Scenario,
    variant: ConditionVariant,
    budget: usize,
    seed: u64,
    tolerance: f64,
) -> Result<HuntResult> {
    if budget == 0 {
        return Err(Error::Usage("hunt budget must be >= 1".into()));
    }
    let n = scenario.defaults.indices;
    let plan = SamplePlan::grid(Vec::new(), n, scenario.defaults.exclude_diagonal, budget, seed);
    let carrier = scenario.space.carrier();
    // Drawn and evaluated in chunks so an early violator ends the search early.
    let mut tuples: Vec<(usize, Tuple)> = Vec::new();
    let mut evaluated = Vec::new();
    let mut best_gap = f64::INFINITY;
    for start in (0..budget).step_by(HUNT_CHUNK) {
        let chunk: Vec<(usize, Tuple)> = (start..budget.min(start + HUNT_CHUNK))
            .map(|k| (k, random_tuple(seed, k as u64, &plan.index_pairs, |u| carrier.lerp(u))))
            .filter(|(_, t)| !(plan.exclude_diagonal && t.x == t.y))
            .collect();
        let raw: Vec<Tuple> = chunk.iter().map(|p| p.1).collect();
        tuples.extend(chunk);
        let offset = evaluated.len();
        evaluated.extend(evaluate_all(scenario, variant, &raw)?);
        best_gap = evaluated[offset..].iter().map(|w| w.gap).fold(best_gap, f64::min);
        if let Some(pos) = evaluated[offset..].iter().position(|w| w.gap < -tolerance) {
            let pos = offset + pos;
            let refined = refine(scenario, variant, evaluated[pos].clone(), plan.exclude_diagonal);
            best_gap = best_gap.min(refined.gap);
            return Ok(HuntResult {
                budget,
                seed,
                draw: Some(tuples[pos].0),
                witness: Some(refined),
                best_gap,
            });
        }
    }

    let mut order: Vec<usize> = (0..evaluated.len()).collect();
    order.sort_by(|&a, &b| evaluated[a].order(&evaluated[b]));
    let starts: Vec<usize> = order.into_iter().take(REFINE_STARTS).collect();
    let refined: Vec<TupleWitness> = starts
        .par_iter()
        .map(|&k| refine(scenario, variant, evaluated[k].clone(), plan.exclude_diagonal))
        .collect();
    for (k, w) in starts.iter().zip(refined) {
        best_gap = best_gap.min(w.gap);
        if w.gap < -tolerance {
            return Ok(HuntResult {
                budget,
                seed,
                draw: Some(tuples[*k].0),
                witness: Some(w),
                best_gap,
            });
        }
    }
    Ok(HuntResult {
        budget,
        seed,
        draw: None,
        witness: None,
        best_gap,
    })
}

/// Coordinate descent on x and y with halving steps; tuples that fail to
/// evaluate are treated as no improvement.
fn refine(
    scenario: &Scenario,
    variant: ConditionVariant,
    start: TupleWitness,
    exclude_diagonal: bool,
) -> TupleWitness {
    let carrier = scenario.space.carrier();
    let mut best = start;
    let mut step = (carrier.upper() - carrier.lower()) / 4.0;
    for _ in 0..REFINE_ROUNDS {
        if step == 0.0 {
            break;
        }
        let mut improved = false;
        for (dx, dy) in [(1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0)] {
            let x = (best.x + dx * step).clamp(carrier.lower(), carrier.upper());
            let y = (best.y + dy * step).clamp(carrier.lower(), carrier.upper());
            if exclude_diagonal && x == y {
                continue;
            }
            let t = Tuple {
                x,
                y,
                i: best.i,
                j: best.j,
            };
            if let Ok(s) = condition_sides(scenario, variant, x, y, t.i, t.j) {
                let cand = TupleWitness::new(t, s);
                if cand.gap < best.gap {
                    best = cand;
                    improved = true;
                }
            }
        }
        if !improved {
            step /= 2.0;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerMapEntry {
    pub n: u64,
    pub k: Option<u64>,
    pub coefficient: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerMapReport {
    pub threshold: f64,
    pub entries: Vec<PerMapEntry>,
    pub passed: bool,
}

/// For each n ≤ `n_max`, the smallest k ≤ `horizon` with δ_{k,n} below the
/// threshold (1/2 for two-term Chatterjea forms, 1/3 for the three-term one).
pub fn check_per_map_corollary(
    scenario: &Scenario,
    variant: ConditionVariant,
    n_max: u64,
    horizon: u64,
) -> Result<PerMapReport> {
    if !variant.cross_terms() {
        return Err(Error::Usage(format!(
            "the per-map corollary applies to Chatterjea variants, not {variant}"
        )));
    }
    let threshold = if variant.three_term() { 1.0 / 3.0 } else { 0.5 };
    let mut entries = Vec::with_capacity(n_max as usize);
    for n in 1..=n_max {
        let mut found = None;
        for k in 1..=horizon {
            let c = scenario.schedule.coefficient(Coefficient::Delta, k, n)?;
            if c < threshold {
                found = Some((k, c));
                break;
            }
        }
        entries.push(PerMapEntry {
            n,
            k: found.map(|f| f.0),
            coefficient: found.map(|f| f.1),
        });
    }
    let passed = entries.iter().all(|e| e.k.is_some());
    Ok(PerMapReport {
        threshold,
        entries,
        passed,
    })
}
