//! Closed-form tail bounds for sums of selector variables and Monte Carlo
//! tables comparing them with empirical exceedance frequencies.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::output::{fmt_f64, CsvTable};
use crate::rng::{derive_seed, rng_from_seed};

pub const DEFAULT_SAMPLES: usize = 100_000;
const BATCH: usize = 4096;

/// Bennett-type bound `ℙ(Σ a_k Z_k ≥ t) ≤ exp(−(t/‖a‖∞)·ln(t‖a‖∞/(δ‖a‖₂²)))`
/// for centered selectors `Z_k = δ_k − δ`. Values above 1 are returned as-is.
pub fn bennett_bound(a: &[f64], delta: f64, t: f64) -> Result<f64> {
    Ok(bennett_exponent(a, delta, t)?.exp())
}

/// The argument of the exponential in [`bennett_bound`].
pub fn bennett_exponent(a: &[f64], delta: f64, t: f64) -> Result<f64> {
    let amax = a.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    if amax == 0.0 || a.iter().any(|x| !x.is_finite()) {
        return Err(LabError::config("bennett bound needs a nonzero finite coefficient vector"));
    }
    check_delta(delta)?;
    if !(t > 0.0) || !t.is_finite() {
        return Err(LabError::Domain(format!("threshold must be positive, got {t}")));
    }
    let a2: f64 = a.iter().map(|x| x * x).sum();
    let ratio = t * amax / (delta * a2);
    Ok(-(t / amax) * ratio.ln())
}

/// Selector tail `ℙ(Σ_{k∈I} δ_k ≥ u) ≤ exp(−(u/8)·ln(u/(2δ·card I)))`, valid for
/// `u ≥ 2δ·card I`.
pub fn selector_tail_bound(card: usize, delta: f64, u: f64) -> Result<f64> {
    if card == 0 {
        return Err(LabError::config("index set must be nonempty"));
    }
    check_delta(delta)?;
    let floor = 2.0 * delta * card as f64;
    if !(u >= floor) || !(u > 0.0) || !u.is_finite() {
        return Err(LabError::Domain(format!(
            "selector tail bound needs u >= 2*delta*card(I) = {floor}, got {u}"
        )));
    }
    Ok((-(u / 8.0) * (u / floor).ln()).exp())
}

/// `(C/t)^t`.
pub fn chernoff_tube_bound(c: f64, t: f64) -> Result<f64> {
    if !(c >= 0.0) || !c.is_finite() {
        return Err(LabError::config(format!("Chernoff constant must be nonnegative, got {c}")));
    }
    if !(t > 0.0) || !t.is_finite() {
        return Err(LabError::Domain(format!("threshold must be positive, got {t}")));
    }
    Ok((c / t).powf(t))
}

fn check_delta(delta: f64) -> Result<()> {
    // δ = 0 is accepted as the degenerate limit (bound 0).
    if !(0.0..=1.0).contains(&delta) {
        return Err(LabError::config(format!("delta must lie in [0, 1], got {delta}")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundKind {
    Bennett,
    Selector,
    ChernoffTube,
}

impl BoundKind {
    pub fn as_str(self) -> &'static str {
        match self {
            BoundKind::Bennett => "bennett",
            BoundKind::Selector => "selector",
            BoundKind::ChernoffTube => "chernoff-tube",
        }
    }
}

impl fmt::Display for BoundKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BoundKind {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bennett" => Ok(BoundKind::Bennett),
            "selector" => Ok(BoundKind::Selector),
            "chernoff-tube" => Ok(BoundKind::ChernoffTube),
            other => Err(LabError::config(format!(
                "unknown bound '{other}' (expected bennett, selector or chernoff-tube)"
            ))),
        }
    }
}

/// Parameters of a tail study. Which fields are required depends on `bound`:
/// `bennett` takes `a` (or `n` for a vector of ones), `selector` takes
/// `cardI`, and `chernoff-tube` takes `R` and optionally `C`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TailSpec {
    pub bound: BoundKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(rename = "cardI", default, skip_serializing_if = "Option::is_none")]
    pub card: Option<usize>,
    #[serde(rename = "R", default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(rename = "C", default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    pub delta: f64,
    pub thresholds: Vec<f64>,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_samples() -> usize {
    DEFAULT_SAMPLES
}

impl TailSpec {
    pub fn bennett_ones(n: usize, delta: f64, thresholds: Vec<f64>, seed: u64) -> Self {
        TailSpec {
            bound: BoundKind::Bennett,
            a: None,
            n: Some(n),
            card: None,
            radius: None,
            c: None,
            delta,
            thresholds,
            samples: DEFAULT_SAMPLES,
            seed,
        }
    }

    pub fn selector(card: usize, delta: f64, thresholds: Vec<f64>, seed: u64) -> Self {
        TailSpec {
            bound: BoundKind::Selector,
            card: Some(card),
            n: None,
            ..Self::bennett_ones(0, delta, thresholds, seed)
        }
    }

    pub fn chernoff_tube(radius: f64, delta: f64, thresholds: Vec<f64>, seed: u64) -> Self {
        TailSpec {
            bound: BoundKind::ChernoffTube,
            radius: Some(radius),
            n: None,
            ..Self::bennett_ones(0, delta, thresholds, seed)
        }
    }

    /// Coefficients of the simulated sum `Σ a_k δ_k`.
    pub fn coefficients(&self) -> Result<Vec<f64>> {
        match self.bound {
            BoundKind::Bennett => match (&self.a, self.n) {
                (Some(a), None) => Ok(a.clone()),
                (None, Some(n)) if n > 0 => Ok(vec![1.0; n]),
                _ => Err(LabError::config("bennett study needs exactly one of 'a' or a positive 'n'")),
            },
            BoundKind::Selector => match self.card {
                Some(c) if c > 0 => Ok(vec![1.0; c]),
                _ => Err(LabError::config("selector study needs 'cardI' >= 1")),
            },
            BoundKind::ChernoffTube => match self.radius {
                Some(r) if r >= 1.0 && r.is_finite() => Ok(vec![1.0; r.round() as usize]),
                _ => Err(LabError::config("chernoff-tube study needs 'R' >= 1")),
            },
        }
    }

    /// Chernoff constant: configured `C`, else `e·R·δ`.
    pub fn chernoff_constant(&self) -> f64 {
        self.c
            .unwrap_or_else(|| std::f64::consts::E * self.radius.unwrap_or(0.0).round() * self.delta)
    }

    pub fn validate(&self) -> Result<()> {
        check_delta(self.delta)?;
        let extra = match self.bound {
            BoundKind::Bennett => self.card.is_some() || self.radius.is_some() || self.c.is_some(),
            BoundKind::Selector => self.a.is_some() || self.n.is_some() || self.radius.is_some() || self.c.is_some(),
            BoundKind::ChernoffTube => self.a.is_some() || self.n.is_some() || self.card.is_some(),
        };
        if extra {
            return Err(LabError::config(format!("field not used by the {} bound", self.bound)));
        }
        self.coefficients()?;
        if self.samples == 0 {
            return Err(LabError::config("sample count must be at least 1"));
        }
        if self.thresholds.is_empty() {
            return Err(LabError::config("threshold grid is empty"));
        }
        if self.thresholds.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(LabError::config("threshold grid must be strictly increasing"));
        }
        Ok(())
    }

    /// Analytic bound at threshold `t`.
    pub fn bound_at(&self, t: f64) -> Result<f64> {
        match self.bound {
            BoundKind::Bennett => bennett_bound(&self.coefficients()?, self.delta, t),
            BoundKind::Selector => selector_tail_bound(self.coefficients()?.len(), self.delta, t),
            BoundKind::ChernoffTube => chernoff_tube_bound(self.chernoff_constant(), t),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailRow {
    pub threshold: f64,
    pub empirical: f64,
    pub stderr: f64,
    pub bound: f64,
}

impl TailRow {
    /// `empirical ≤ bound + 3·stderr`, only enforced where `bound ≤ 0.5`.
    pub fn dominated(&self) -> bool {
        self.bound > 0.5 || self.empirical <= self.bound + 3.0 * self.stderr
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailStudy {
    pub spec: TailSpec,
    pub rows: Vec<TailRow>,
}

impl TailStudy {
    pub fn dominance_holds(&self) -> bool {
        self.rows.iter().all(TailRow::dominated)
    }

    pub fn to_csv(&self) -> String {
        let mut t = CsvTable::new(&["threshold", "empirical", "stderr", "bound"]);
        for r in &self.rows {
            t.push(vec![
                fmt_f64(r.threshold),
                fmt_f64(r.empirical),
                fmt_f64(r.stderr),
                fmt_f64(r.bound),
            ]);
        }
        t.render()
    }
}

/// Simulate the sum named by `spec` and tabulate exceedance frequencies
/// `ℙ(X ≥ t)` against the closed-form bound.
///
/// Samples are drawn in fixed-size batches with per-batch derived seeds, so
/// the table is independent of the worker count.
pub fn tail_study(spec: &TailSpec) -> Result<TailStudy> {
    spec.validate()?;
    let a = spec.coefficients()?;
    let shift = match spec.bound {
        BoundKind::Bennett => spec.delta * a.iter().sum::<f64>(),
        _ => 0.0,
    };
    let bounds = spec
        .thresholds
        .iter()
        .map(|&t| spec.bound_at(t))
        .collect::<Result<Vec<_>>>()?;

    let batches = spec.samples.div_ceil(BATCH);
    let counts = (0..batches)
        .into_par_iter()
        .map(|b| {
            let len = BATCH.min(spec.samples - b * BATCH);
            let mut rng = rng_from_seed(derive_seed(spec.seed, b as u64));
            let mut counts = vec![0_u64; spec.thresholds.len()];
            for _ in 0..len {
                let x = simulate_sum(&a, spec.delta, &mut rng) - shift;
                for (c, &t) in counts.iter_mut().zip(&spec.thresholds) {
                    if x >= t {
                        *c += 1;
                    } else {
                        break;
                    }
                }
            }
            counts
        })
        .reduce(
            || vec![0_u64; spec.thresholds.len()],
            |mut acc, c| {
                acc.iter_mut().zip(c).for_each(|(a, b)| *a += b);
                acc
            },
        );

    let n = spec.samples as f64;
    let rows = spec
        .thresholds
        .iter()
        .zip(counts)
        .zip(bounds)
        .map(|((&threshold, count), bound)| {
            let p = count as f64 / n;
            TailRow {
                threshold,
                empirical: p,
                stderr: (p * (1.0 - p) / n).sqrt(),
                bound,
            }
        })
        .collect();
    Ok(TailStudy {
        spec: spec.clone(),
        rows,
    })
}

fn simulate_sum<R: Rng + ?Sized>(a: &[f64], delta: f64, rng: &mut R) -> f64 {
    let mut s = 0.0;
    for &ak in a {
        if rng.random::<f64>() < delta {
            s += ak;
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bennett_closed_form() {
        let a = vec![1.0; 100];
        let b = bennett_bound(&a, 0.01, 10.0).unwrap();
        assert!((b / 1e-10 - 1.0).abs() < 1e-12);
        assert_eq!(bennett_bound(&a, 0.01, 1.0).unwrap(), 1.0);
        assert!(bennett_bound(&a, 0.01, 0.5).unwrap() > 1.0);
        assert!(matches!(bennett_bound(&[0.0, 0.0], 0.1, 1.0), Err(LabError::Config(_))));
    }

    #[test]
    fn selector_closed_form() {
        let b = selector_tail_bound(100, 0.01, 16.0).unwrap();
        assert!((b - 1.0 / 64.0).abs() < 1e-15);
        assert_eq!(selector_tail_bound(100, 0.01, 2.0).unwrap(), 1.0);
        assert!(matches!(selector_tail_bound(100, 0.01, 1.9), Err(LabError::Domain(_))));
    }

    #[test]
    fn bound_names() {
        assert_eq!("chernoff-tube".parse::<BoundKind>().unwrap(), BoundKind::ChernoffTube);
        assert!(matches!("hoeffding".parse::<BoundKind>(), Err(LabError::Config(_))));
    }

    #[test]
    fn degenerate_delta() {
        let mut spec = TailSpec::selector(50, 0.0, vec![1.0, 2.0], 3);
        spec.samples = 1000;
        let study = tail_study(&spec).unwrap();
        assert!(study.rows.iter().all(|r| r.empirical == 0.0 && r.bound >= r.empirical));
    }

    #[test]
    fn grid_and_fields_validated() {
        let spec = TailSpec::selector(50, 0.1, vec![12.0, 11.0], 3);
        assert!(tail_study(&spec).is_err());
        let mut spec = TailSpec::selector(50, 0.1, vec![12.0], 3);
        spec.radius = Some(4.0);
        assert!(tail_study(&spec).is_err());
    }

    #[test]
    fn batch_layout_is_thread_independent() {
        let mut spec = TailSpec::bennett_ones(50, 0.1, vec![2.0, 4.0, 6.0], 11);
        spec.samples = 10_000;
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| tail_study(&spec)).unwrap();
        let b = four.install(|| tail_study(&spec)).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
    }
}
