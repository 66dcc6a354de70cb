//! The derived sequence s_i built from consecutive coefficients, and the
//! summability tests applied to it: λ-sequence membership, monotonicity,
//! the limsup condition and convergence of the product series Σ C_n.

use serde::Serialize;

use crate::control::{Coefficient, CoefficientSchedule};
use crate::error::{Error, Result};

pub const DEFAULT_HORIZON: usize = 64;
/// Slack allowed when checking that s_{i+1} <= s_i.
pub const MONOTONE_SLACK: f64 = 1e-15;
/// A ratio or limsup estimate must sit this far below 1 to count.
pub const UNIT_MARGIN: f64 = 1e-9;
/// C_n must stay at or above this floor to be called divergent.
pub const DIVERGENCE_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SequenceVariant {
    /// s_i = δ^s / (1 - δ^s)
    Plain,
    /// s_i = 2^s δ^s / (1 - δ^s), for the three-term conditions
    Doubled,
}

impl std::str::FromStr for SequenceVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plain" => Ok(SequenceVariant::Plain),
            "doubled" => Ok(SequenceVariant::Doubled),
            other => Err(Error::Usage(format!("unknown sequence variant `{other}` (plain|doubled)"))),
        }
    }
}

/// How the λ-sequence sums are formed from the derived values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaReading {
    /// Sum the values s_i themselves.
    #[default]
    RawValues,
    /// Sum max-metric distances m(s_i, s_{i+1}) on [0, inf).
    MaxMetricSteps,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DerivedSequence {
    pub values: Vec<f64>,
    pub variant: SequenceVariant,
    pub degree: f64,
}

impl DerivedSequence {
    pub fn from_values(values: Vec<f64>, variant: SequenceVariant, degree: f64) -> Self {
        DerivedSequence {
            values,
            variant,
            degree,
        }
    }

    pub fn horizon(&self) -> usize {
        self.values.len()
    }
}

/// `δ_{i,i+1}^s`, failing when it reaches 1.
fn consecutive_power(schedule: &CoefficientSchedule, degree: f64, i: u64) -> Result<f64> {
    let d = schedule.coefficient(Coefficient::Delta, i, i + 1)?.powf(degree);
    if d >= 1.0 {
        return Err(Error::Hypothesis {
            index: i,
            message: format!("δ_{{{i},{}}}^s = {d} is not below 1", i + 1),
        });
    }
    Ok(d)
}

pub fn derive_sequence(
    schedule: &CoefficientSchedule,
    degree: f64,
    variant: SequenceVariant,
    horizon: usize,
) -> Result<DerivedSequence> {
    if horizon == 0 {
        return Err(Error::Usage("horizon must be >= 1".into()));
    }
    let factor = match variant {
        SequenceVariant::Plain => 1.0,
        SequenceVariant::Doubled => 2f64.powf(degree),
    };
    let values = (1..=horizon as u64)
        .map(|i| {
            let d = consecutive_power(schedule, degree, i)?;
            Ok(factor * d / (1.0 - d))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DerivedSequence {
        values,
        variant,
        degree,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LambdaCertificate {
    pub lambda: f64,
    pub n_lambda: usize,
    pub horizon: usize,
    /// max over n_lambda <= L <= horizon of (1/L) Σ_{i<=L} s_i; equals `lambda`.
    pub max_tail_average: f64,
    pub reading: LambdaReading,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum LambdaAnalysis {
    Certified(LambdaCertificate),
    /// Every tail of the average sequence reaches 1; `witness_l` is the
    /// first L with A(L) >= 1.
    Failed { witness_l: usize, average: f64 },
}

impl LambdaAnalysis {
    pub fn certificate(&self) -> Option<&LambdaCertificate> {
        match self {
            LambdaAnalysis::Certified(c) => Some(c),
            LambdaAnalysis::Failed { .. } => None,
        }
    }
}

/// The terms whose partial sums the λ-condition bounds.
pub fn lambda_terms(seq: &DerivedSequence, reading: LambdaReading) -> Vec<f64> {
    match reading {
        LambdaReading::RawValues => seq.values.clone(),
        LambdaReading::MaxMetricSteps => seq
            .values
            .windows(2)
            .map(|w| if w[0] == w[1] { 0.0 } else { w[0].max(w[1]) })
            .collect(),
    }
}

/// Running averages A(L) = (1/L) Σ_{i<=L} terms_i, summed left to right.
pub fn running_averages(terms: &[f64]) -> Vec<f64> {
    let mut sum = 0.0;
    terms
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            sum += t;
            sum / (k + 1) as f64
        })
        .collect()
}

/// Finds the smallest n(λ) whose tail sup of averages is below 1 and reports
/// that sup as λ.
pub fn analyze_lambda(seq: &DerivedSequence, reading: LambdaReading) -> LambdaAnalysis {
    let terms = lambda_terms(seq, reading);
    let avgs = running_averages(&terms);
    let h = avgs.len();
    let mut suffix_max = vec![f64::NEG_INFINITY; h + 1];
    for k in (0..h).rev() {
        suffix_max[k] = suffix_max[k + 1].max(avgs[k]);
    }
    match (0..h).find(|&k| suffix_max[k] < 1.0) {
        Some(k) => LambdaAnalysis::Certified(LambdaCertificate {
            lambda: suffix_max[k],
            n_lambda: k + 1,
            horizon: h,
            max_tail_average: suffix_max[k],
            reading,
        }),
        None => {
            let (k, &a) = avgs
                .iter()
                .enumerate()
                .find(|(_, a)| **a >= 1.0)
                .unwrap_or((0, &f64::NAN));
            LambdaAnalysis::Failed {
                witness_l: k + 1,
                average: a,
            }
        }
    }
}

/// `None` when s_{i+1} <= s_i (+ slack) throughout, else the first 1-based
/// index i where s_{i+1} exceeds s_i.
pub fn check_nonincreasing(seq: &DerivedSequence) -> Option<usize> {
    seq.values
        .windows(2)
        .position(|w| w[1] > w[0] + MONOTONE_SLACK)
        .map(|k| k + 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriesVerdict {
    Converges,
    Diverges,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesReport {
    /// C_1 .. C_H
    pub c_values: Vec<f64>,
    pub verdict: SeriesVerdict,
    /// Largest observed ratio C_{n+1}/C_n over the horizon (absent once C underflows).
    pub max_ratio: Option<f64>,
    /// Bound on Σ_{n>H} C_n when the verdict is `Converges`.
    pub tail_bound: Option<f64>,
    /// Largest relative gap between incremental and from-scratch products.
    pub recompute_gap: f64,
    pub degree: f64,
}

impl SeriesReport {
    pub fn horizon(&self) -> usize {
        self.c_values.len()
    }

    /// Σ_{k>=n} C_k, the finite part within the horizon plus the tail bound.
    pub fn tail_sum(&self, n: usize) -> Option<f64> {
        let tail = self.tail_bound?;
        let start = n.max(1);
        let within: f64 = self.c_values.iter().skip(start - 1).sum();
        Some(within + tail)
    }
}

pub fn series_report(
    schedule: &CoefficientSchedule,
    degree: f64,
    horizon: usize,
) -> Result<SeriesReport> {
    if horizon < 2 {
        return Err(Error::Usage("series analysis needs horizon >= 2".into()));
    }
    let factors = (1..=horizon as u64)
        .map(|i| {
            let d = consecutive_power(schedule, degree, i)?;
            Ok(d / (1.0 - d))
        })
        .collect::<Result<Vec<f64>>>()?;

    let mut c_values = Vec::with_capacity(horizon);
    let mut acc = 1.0;
    for f in &factors {
        acc *= f;
        c_values.push(acc);
    }
    let mut recompute_gap: f64 = 0.0;
    for n in 1..=horizon {
        let direct: f64 = factors[..n].iter().product();
        let inc = c_values[n - 1];
        let gap = if direct == inc {
            0.0
        } else {
            (direct - inc).abs() / direct.abs().max(inc.abs())
        };
        recompute_gap = recompute_gap.max(gap);
    }

    let underflow = c_values.contains(&0.0);
    let ratios: Vec<f64> = c_values
        .windows(2)
        .take_while(|w| w[0] > 0.0)
        .map(|w| w[1] / w[0])
        .collect();
    let max_ratio = if underflow && ratios.is_empty() {
        None
    } else {
        ratios.iter().copied().reduce(f64::max)
    };
    let last = *c_values.last().expect("horizon >= 2");

    let (verdict, tail_bound) = if underflow {
        (SeriesVerdict::Converges, Some(0.0))
    } else {
        let r = max_ratio.unwrap_or(0.0);
        if r < 1.0 - UNIT_MARGIN && !ratios_rising(&ratios) {
            (SeriesVerdict::Converges, Some(last * r / (1.0 - r)))
        } else {
            let half = ratios.len() / 2;
            let no_decay = ratios[half..].iter().all(|&q| q >= 1.0);
            if no_decay && last >= DIVERGENCE_FLOOR {
                (SeriesVerdict::Diverges, None)
            } else {
                (SeriesVerdict::Inconclusive, None)
            }
        }
    };
    Ok(SeriesReport {
        c_values,
        verdict,
        max_ratio,
        tail_bound,
        recompute_gap,
        degree,
    })
}

/// True when the last quarter of the ratios reaches above everything before
/// it, so the observed max says nothing about the ratios past the horizon.
fn ratios_rising(ratios: &[f64]) -> bool {
    let cut = ratios.len() - ratios.len() / 4;
    if cut == 0 || cut == ratios.len() {
        return false;
    }
    let head = ratios[..cut].iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let tail = ratios[cut..].iter().copied().fold(f64::NEG_INFINITY, f64::max);
    tail > head + 1e-12
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LimsupVerdict {
    Pass,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LimsupReport {
    pub j: u64,
    /// max δ_{ij}^s over the last window of i.
    pub estimate: f64,
    /// The same max over the window before it.
    pub previous: f64,
    pub verdict: LimsupVerdict,
}

/// Estimates limsup_{i -> inf} δ_{ij}^s from the last `window` indices up to
/// `horizon`. Passes when the estimate is below 1 and the window max has
/// stopped growing: the two most recent windows agree, or the later is lower.
pub fn limsup_check(
    schedule: &CoefficientSchedule,
    degree: f64,
    j: u64,
    horizon: usize,
    window: usize,
) -> Result<LimsupReport> {
    if window == 0 || horizon <= window {
        return Err(Error::Usage(format!(
            "limsup check needs horizon > window >= 1 (got {horizon}, {window})"
        )));
    }
    let window_max = |lo: usize, hi: usize| -> Result<f64> {
        let mut m = f64::NEG_INFINITY;
        for i in lo.max(1)..=hi {
            m = m.max(schedule.coefficient(Coefficient::Delta, i as u64, j)?.powf(degree));
        }
        Ok(m)
    };
    let estimate = window_max(horizon - window + 1, horizon)?;
    let prev_hi = horizon - window;
    let previous = window_max(prev_hi.saturating_sub(window) + 1, prev_hi)?;
    let settled = (estimate - previous).abs() <= UNIT_MARGIN || estimate <= previous;
    let verdict = if estimate < 1.0 - UNIT_MARGIN && settled {
        LimsupVerdict::Pass
    } else {
        LimsupVerdict::Inconclusive
    };
    Ok(LimsupReport {
        j,
        estimate,
        previous,
        verdict,
    })
}
