//! The functional `S(w) = sup_{‖g‖_{L²(Σ)} ≤ 1} ∫ |Eg|² w` as the top
//! eigenvalue of the weighted Gram matrix, its Monte Carlo expectation over
//! random weights, and scaling studies in `R`.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cover::{CellCover, CellGeometry, CoverSpec};
use crate::error::{LabError, Result};
use crate::extension::{assemble_gram, GramMatrix};
use crate::hermitian::HermitianMatrix;
use crate::output::{fmt_f64, CsvTable};
use crate::rng::{derive_seed, rng_from_seed};
use crate::scalar::Scalar;
use crate::stats::{ci95, fit_power_law, mean, sample_std, PowerLawFit};
use crate::surface::{QuadratureRule, SurfaceKind, SurfaceSpec};
use crate::tubes::{median, tube_sup, SearchSpec};
use crate::weights::{weight_mass, ModelKind, ModelSpec, Weight};

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 10_000;
/// Relative change under node doubling above which a value is flagged.
pub const CONVERGENCE_FLAG: f64 = 0.01;
/// Largest matrix the dense fallback will factor.
pub const DENSE_FALLBACK_LIMIT: usize = 4096;

/// Top eigenpair of a Gram matrix. `maximizer` is in orthonormal
/// coordinates `u_j = √σ_j g_j`, so `‖u‖₂ = ‖g‖_{L²(Σ)} = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct MtEstimate<T> {
    pub value: T,
    pub maximizer: Vec<Complex<T>>,
    pub iterations: usize,
    /// `‖A u − value · u‖₂`; some eigenvalue lies within this distance of `value`.
    pub residual: T,
    pub nodes: usize,
    /// `|S_{2M} − S_M| / S_{2M}` when the node-doubling check ran.
    pub convergence: Option<T>,
    pub solver: Solver,
}

/// Which eigensolver produced an estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Solver {
    #[default]
    Power,
    /// Dense Hermitian eigendecomposition after power iteration stalled.
    Dense,
}

impl<T: Scalar> MtEstimate<T> {
    pub fn convergence_flagged(&self) -> bool {
        self.convergence
            .is_some_and(|c| c.to_f64_lossy() > CONVERGENCE_FLAG)
    }
}

#[derive(Debug, Clone)]
pub enum EigenError<T> {
    Lab(String),
    /// `max_iter` exhausted; `best` is the last iterate.
    NonConvergence { iterations: usize, best: MtEstimate<T> },
}

impl<T: Scalar> fmt::Display for EigenError<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EigenError::Lab(msg) => f.write_str(msg),
            EigenError::NonConvergence { iterations, best } => write!(
                f,
                "power iteration did not converge after {iterations} iterations (best value {})",
                best.value
            ),
        }
    }
}

impl<T: Scalar> std::error::Error for EigenError<T> {}

impl<T: Scalar> From<LabError> for EigenError<T> {
    fn from(e: LabError) -> Self {
        EigenError::Lab(e.to_string())
    }
}

impl<T: Scalar> From<EigenError<T>> for LabError {
    fn from(e: EigenError<T>) -> Self {
        match e {
            EigenError::Lab(msg) => LabError::Config(msg),
            EigenError::NonConvergence { iterations, best } => LabError::NonConvergence {
                iterations,
                best_value: best.value.to_f64_lossy(),
            },
        }
    }
}

fn vec_norm<T: Scalar>(v: &[Complex<T>]) -> T {
    v.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt()
}

/// Largest eigenvalue of a Hermitian positive semidefinite matrix by power
/// iteration from a random complex start.
///
/// Stops once the relative Rayleigh-quotient change stays below `tol` on two
/// consecutive iterations.
pub fn lambda_max<T: Scalar, R: Rng + ?Sized>(
    matrix: &HermitianMatrix<T>,
    tol: f64,
    max_iter: usize,
    rng: &mut R,
) -> Result<MtEstimate<T>, EigenError<T>> {
    if !(tol > 0.0) {
        return Err(EigenError::Lab(format!("tolerance must be positive, got {tol}")));
    }
    if max_iter == 0 {
        return Err(EigenError::Lab("max_iter must be at least 1".into()));
    }
    let n = matrix.size();
    if n == 0 {
        return Ok(MtEstimate {
            value: T::zero(),
            maximizer: Vec::new(),
            iterations: 0,
            residual: T::zero(),
            nodes: 0,
            convergence: None,
            solver: Solver::Power,
        });
    }
    let tol = T::lit(tol);
    let mut v: Vec<Complex<T>> = (0..n)
        .map(|_| {
            Complex::new(
                T::lit(rng.random::<f64>() - 0.5),
                T::lit(rng.random::<f64>() - 0.5),
            )
        })
        .collect();
    let nv = vec_norm(&v);
    v.iter_mut().for_each(|z| *z = *z / nv);

    let mut y = vec![Complex::new(T::zero(), T::zero()); n];
    let mut prev: Option<T> = None;
    let mut streak = 0;
    for it in 1..=max_iter {
        matrix.matvec(&v, &mut y);
        let rho: T = v.iter().zip(&y).map(|(a, b)| (a.conj() * b).re).sum();
        let residual = y
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - b * rho).norm_sqr())
            .sum::<T>()
            .sqrt();
        let ny = vec_norm(&y);
        if ny == T::zero() {
            // A v = 0 for a unit v of a PSD matrix: only the zero matrix gets here
            // from a generic start.
            return Ok(MtEstimate {
                value: T::zero(),
                maximizer: v,
                iterations: it,
                residual: T::zero(),
                nodes: n,
                convergence: None,
                solver: Solver::Power,
            });
        }
        if let Some(p) = prev {
            let scale = rho.abs().max(T::min_positive_value());
            if (rho - p).abs() / scale < tol {
                streak += 1;
            } else {
                streak = 0;
            }
        }
        if streak >= 2 {
            return Ok(MtEstimate {
                value: rho,
                maximizer: v,
                iterations: it,
                residual,
                nodes: n,
                convergence: None,
                solver: Solver::Power,
            });
        }
        prev = Some(rho);
        let next: Vec<Complex<T>> = y.iter().map(|z| z / ny).collect();
        if it == max_iter {
            return Err(EigenError::NonConvergence {
                iterations: it,
                best: MtEstimate {
                    value: rho,
                    maximizer: v,
                    iterations: it,
                    residual,
                    nodes: n,
                    convergence: None,
                    solver: Solver::Power,
                },
            });
        }
        v = next;
    }
    unreachable!("loop returns on the last iteration")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MtOptions {
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(rename = "maxIter", default = "default_max_iter")]
    pub max_iter: usize,
    /// Seed of the power-iteration start vector.
    #[serde(rename = "startSeed", default)]
    pub start_seed: u64,
    /// Fresh start vectors tried after a non-convergent run.
    #[serde(default = "default_retries")]
    pub retries: usize,
    /// Solve densely once every power-iteration start has stalled
    /// (matrices up to [`DENSE_FALLBACK_LIMIT`]).
    #[serde(rename = "denseFallback", default = "yes")]
    pub dense_fallback: bool,
}

fn yes() -> bool {
    true
}

fn default_tol() -> f64 {
    DEFAULT_TOL
}

fn default_max_iter() -> usize {
    DEFAULT_MAX_ITER
}

fn default_retries() -> usize {
    1
}

impl Default for MtOptions {
    fn default() -> Self {
        MtOptions {
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
            start_seed: 0,
            retries: default_retries(),
            dense_fallback: true,
        }
    }
}

/// `λ_max` of an assembled Gram matrix, retrying from fresh starts and then
/// falling back to a dense solve if allowed.
pub fn top_eigen<T: Scalar>(gram: &GramMatrix<T>, opts: &MtOptions) -> Result<MtEstimate<T>, EigenError<T>> {
    let mut attempt = 0;
    loop {
        let seed = derive_seed(opts.start_seed, attempt as u64);
        match lambda_max(&gram.matrix, opts.tol, opts.max_iter, &mut rng_from_seed(seed)) {
            Err(EigenError::NonConvergence { .. }) if attempt < opts.retries => attempt += 1,
            Err(EigenError::NonConvergence { .. })
                if opts.dense_fallback && gram.matrix.size() <= DENSE_FALLBACK_LIMIT =>
            {
                return Ok(dense_top(&gram.matrix));
            }
            other => return other,
        }
    }
}

/// Top eigenpair by a dense Hermitian eigendecomposition (in `f64`).
pub fn dense_top<T: Scalar>(matrix: &HermitianMatrix<T>) -> MtEstimate<T> {
    let n = matrix.size();
    let a = nalgebra::DMatrix::from_fn(n, n, |i, j| {
        let z = matrix.get(i, j);
        nalgebra::Complex::new(z.re.to_f64_lossy(), z.im.to_f64_lossy())
    });
    let eig = a.symmetric_eigen();
    let (top, value) = eig
        .eigenvalues
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, v)| if v > best.1 { (i, v) } else { best });
    let u: Vec<Complex<T>> = eig
        .eigenvectors
        .column(top)
        .iter()
        .map(|z| Complex::new(T::lit(z.re), T::lit(z.im)))
        .collect();
    let value = T::lit(value.max(0.0));
    let mut y = vec![Complex::new(T::zero(), T::zero()); n];
    matrix.matvec(&u, &mut y);
    let residual = y
        .iter()
        .zip(&u)
        .map(|(a, b)| (a - b * value).norm_sqr())
        .sum::<T>()
        .sqrt();
    MtEstimate {
        value,
        maximizer: u,
        iterations: 0,
        residual,
        nodes: n,
        convergence: None,
        solver: Solver::Dense,
    }
}

/// Discretized `S(w)` on `rule`.
pub fn mt_functional<T: Scalar>(
    rule: &QuadratureRule<T>,
    weight: &Weight<T>,
    opts: &MtOptions,
) -> Result<MtEstimate<T>, EigenError<T>> {
    if weight.is_empty() {
        return Ok(MtEstimate {
            value: T::zero(),
            maximizer: vec![Complex::new(T::zero(), T::zero()); rule.len()],
            iterations: 0,
            residual: T::zero(),
            nodes: rule.len(),
            convergence: None,
            solver: Solver::Power,
        });
    }
    let gram = assemble_gram(rule, weight)?;
    top_eigen(&gram, opts)
}

/// [`mt_functional`] at `M` nodes together with the relative change under
/// `M → 2M`.
pub fn mt_functional_checked<T: Scalar>(
    kind: SurfaceKind,
    d: usize,
    m: usize,
    weight: &Weight<T>,
    opts: &MtOptions,
) -> Result<MtEstimate<T>, EigenError<T>> {
    let rule = QuadratureRule::build(kind, d, m)?;
    let mut est = mt_functional(&rule, weight, opts)?;
    let fine = QuadratureRule::build(kind, d, 2 * m)?;
    let refined = mt_functional(&fine, weight, opts)?;
    est.convergence = Some(relative_change(est.value, refined.value));
    Ok(est)
}

fn relative_change<T: Scalar>(coarse: T, fine: T) -> T {
    if fine == T::zero() && coarse == T::zero() {
        T::zero()
    } else {
        (fine - coarse).abs() / fine.abs().max(coarse.abs())
    }
}

/// Which trials get the node-doubling check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConvergenceCheck {
    None,
    #[default]
    FirstTrial,
    AllTrials,
}

/// One Monte Carlo study at a fixed radius.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialPlan {
    pub surface: SurfaceSpec,
    pub cover: CoverSpec,
    pub model: ModelSpec,
    pub trials: usize,
    pub master_seed: u64,
    pub options: MtOptions,
    /// Compute `sup_T w(T)` per trial when set.
    pub tubes: Option<SearchSpec>,
    pub convergence: ConvergenceCheck,
}

impl TrialPlan {
    pub fn new(surface: SurfaceSpec, cover: CoverSpec, model: ModelSpec, trials: usize, master_seed: u64) -> Self {
        TrialPlan {
            surface,
            cover,
            model,
            trials,
            master_seed,
            options: MtOptions::default(),
            tubes: None,
            convergence: ConvergenceCheck::None,
        }
    }

    pub fn node_count(&self) -> usize {
        self.surface.node_count(self.cover.radius)
    }

    fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(LabError::config("number of trials must be at least 1"));
        }
        if self.surface.d != self.cover.d {
            return Err(LabError::config(format!(
                "surface dimension {} differs from cover dimension {}",
                self.surface.d, self.cover.d
            )));
        }
        self.model.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub index: usize,
    pub seed: u64,
    /// `None` when the trial was excluded for non-convergence.
    pub value: Option<f64>,
    pub iterations: usize,
    pub residual: f64,
    pub mass: f64,
    pub support: usize,
    #[serde(rename = "tubeSup", skip_serializing_if = "Option::is_none")]
    pub tube_sup: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub convergence: Option<f64>,
    pub solver: Solver,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloSummary {
    pub trials: usize,
    pub nodes: usize,
    #[serde(rename = "masterSeed")]
    pub master_seed: u64,
    pub model: ModelSpec,
    pub cover: CoverSpec,
    pub outcomes: Vec<TrialOutcome>,
    pub excluded: usize,
    pub mean: f64,
    pub std: f64,
    #[serde(rename = "ci95lo")]
    pub ci95_lo: f64,
    #[serde(rename = "ci95hi")]
    pub ci95_hi: f64,
}

impl MonteCarloSummary {
    pub fn values(&self) -> Vec<f64> {
        self.outcomes.iter().filter_map(|o| o.value).collect()
    }

    pub fn masses(&self) -> Vec<f64> {
        self.outcomes.iter().map(|o| o.mass).collect()
    }

    pub fn mean_mass(&self) -> f64 {
        mean(&self.masses())
    }

    pub fn tube_sups(&self) -> Vec<f64> {
        self.outcomes.iter().filter_map(|o| o.tube_sup).collect()
    }

    /// Largest node-doubling change among the checked trials.
    pub fn max_convergence(&self) -> Option<f64> {
        self.outcomes
            .iter()
            .filter_map(|o| o.convergence)
            .fold(None, |acc, c| Some(acc.map_or(c, |a: f64| a.max(c))))
    }
}

/// Run every trial of `plan`. Trial `i` draws its weight from
/// `derive_seed(master_seed, i)`, so results do not depend on scheduling.
pub fn run_trials<T: Scalar>(plan: &TrialPlan) -> Result<MonteCarloSummary> {
    plan.validate()?;
    let cover = Arc::new(CellCover::<T>::from_spec(&plan.cover)?);
    let m = plan.node_count();
    let rule = QuadratureRule::<T>::build(plan.surface.kind, plan.surface.d, m)?;

    let outcomes: Vec<Result<TrialOutcome>> = (0..plan.trials)
        .into_par_iter()
        .map(|i| run_one(plan, &cover, &rule, i))
        .collect();
    let outcomes: Vec<TrialOutcome> = outcomes.into_iter().collect::<Result<_>>()?;

    let values: Vec<f64> = outcomes.iter().filter_map(|o| o.value).collect();
    let excluded = outcomes.len() - values.len();
    let (lo, hi) = ci95(&values);
    Ok(MonteCarloSummary {
        trials: plan.trials,
        nodes: rule.len(),
        master_seed: plan.master_seed,
        model: plan.model.clone(),
        cover: plan.cover.clone(),
        outcomes,
        excluded,
        mean: mean(&values),
        std: sample_std(&values),
        ci95_lo: lo,
        ci95_hi: hi,
    })
}

fn run_one<T: Scalar>(
    plan: &TrialPlan,
    cover: &Arc<CellCover<T>>,
    rule: &QuadratureRule<T>,
    index: usize,
) -> Result<TrialOutcome> {
    let seed = derive_seed(plan.master_seed, index as u64);
    let weight = plan.model.sample(cover, seed, &mut rng_from_seed(seed))?;
    let mass = weight_mass(&weight).to_f64_lossy();
    let check = match plan.convergence {
        ConvergenceCheck::None => false,
        ConvergenceCheck::FirstTrial => index == 0,
        ConvergenceCheck::AllTrials => true,
    };
    let estimate = if check {
        mt_functional_checked(plan.surface.kind, plan.surface.d, rule.len(), &weight, &plan.options)
    } else {
        mt_functional(rule, &weight, &plan.options)
    };
    let (value, iterations, residual, convergence, solver) = match estimate {
        Ok(e) => (
            Some(e.value.to_f64_lossy()),
            e.iterations,
            e.residual.to_f64_lossy(),
            e.convergence.map(|c| c.to_f64_lossy()),
            e.solver,
        ),
        Err(EigenError::NonConvergence { iterations, best }) => {
            (None, iterations, best.residual.to_f64_lossy(), None, Solver::Power)
        }
        Err(EigenError::Lab(msg)) => return Err(LabError::Config(msg)),
    };
    let tube = match &plan.tubes {
        Some(spec) => Some(tube_sup(&weight, spec)?.value.to_f64_lossy()),
        None => None,
    };
    Ok(TrialOutcome {
        index,
        seed,
        value,
        iterations,
        residual,
        mass,
        support: weight.support_size(),
        tube_sup: tube,
        convergence,
        solver,
    })
}

/// Monte Carlo estimate of `𝔼 S(w)` over `n` weights drawn from `model`.
pub fn expected_mt(
    surface: &SurfaceSpec,
    cover: &CoverSpec,
    model: &ModelSpec,
    n: usize,
    master_seed: u64,
) -> Result<MonteCarloSummary> {
    run_trials::<f64>(&TrialPlan::new(surface.clone(), cover.clone(), model.clone(), n, master_seed))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingSpec {
    pub radii: Vec<f64>,
    pub surface: SurfaceKind,
    pub d: usize,
    /// Fixed node count; `None` uses the radius-dependent default.
    pub nodes: Option<usize>,
    pub geometry: CellGeometry,
    pub model: ModelSpec,
    pub trials: usize,
    pub master_seed: u64,
    pub options: MtOptions,
    pub tubes: Option<SearchSpec>,
    pub convergence: ConvergenceCheck,
}

impl ScalingSpec {
    pub fn new(radii: Vec<f64>, surface: SurfaceKind, d: usize, model: ModelSpec, trials: usize, master_seed: u64) -> Self {
        ScalingSpec {
            radii,
            surface,
            d,
            nodes: None,
            geometry: CellGeometry::Cube,
            model,
            trials,
            master_seed,
            options: MtOptions::default(),
            tubes: Some(SearchSpec::default()),
            convergence: ConvergenceCheck::FirstTrial,
        }
    }

    pub fn plan_for(&self, radius: f64) -> TrialPlan {
        TrialPlan {
            surface: SurfaceSpec {
                kind: self.surface,
                d: self.d,
                m: self.nodes,
            },
            cover: CoverSpec {
                radius,
                d: self.d,
                geometry: self.geometry,
            },
            model: self.model.clone(),
            trials: self.trials,
            master_seed: self.master_seed,
            options: self.options,
            tubes: self.tubes.clone(),
            convergence: self.convergence,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    #[serde(rename = "R")]
    pub radius: f64,
    pub model: String,
    pub lambda: f64,
    #[serde(rename = "N")]
    pub trials: usize,
    #[serde(rename = "meanS")]
    pub mean_s: f64,
    #[serde(rename = "stdS")]
    pub std_s: f64,
    #[serde(rename = "ci95lo")]
    pub ci95_lo: f64,
    #[serde(rename = "ci95hi")]
    pub ci95_hi: f64,
    #[serde(rename = "meanMass")]
    pub mean_mass: f64,
    #[serde(rename = "massRatio")]
    pub mass_ratio: f64,
    #[serde(rename = "medianTubeSup")]
    pub median_tube_sup: f64,
    pub excluded: usize,
    #[serde(rename = "masterSeed")]
    pub master_seed: u64,
}

pub const SCALING_HEADER: [&str; 13] = [
    "R",
    "model",
    "lambda",
    "N",
    "meanS",
    "stdS",
    "ci95lo",
    "ci95hi",
    "meanMass",
    "massRatio",
    "medianTubeSup",
    "excluded",
    "masterSeed",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadiusDiagnostics {
    #[serde(rename = "R")]
    pub radius: f64,
    pub nodes: usize,
    /// Largest relative change under node doubling among checked trials.
    pub convergence: Option<f64>,
    pub flagged: bool,
    /// Trials solved by the dense fallback.
    #[serde(rename = "denseSolves")]
    pub dense_solves: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingStudy {
    pub rows: Vec<ScalingRow>,
    /// Fit of `mean S ∼ R^α`; `None` with fewer than three radii.
    pub fit: Option<PowerLawFit>,
    #[serde(rename = "massFit")]
    pub mass_fit: Option<PowerLawFit>,
    pub diagnostics: Vec<RadiusDiagnostics>,
    #[serde(skip)]
    pub summaries: Vec<MonteCarloSummary>,
}

pub fn model_label(model: &ModelSpec) -> &'static str {
    match (model.kind, model.replacement) {
        (ModelKind::Selector, _) => "selector",
        (ModelKind::Carbery, true) => "carbery-with-replacement",
        (ModelKind::Carbery, false) => "carbery-without-replacement",
        (ModelKind::Full, _) => "full",
    }
}

/// Mean `S`, mass and tube occupancy for each radius, plus power-law fits.
pub fn scaling_study<T: Scalar>(spec: &ScalingSpec) -> Result<ScalingStudy> {
    if spec.radii.is_empty() {
        return Err(LabError::config("scaling study needs at least one radius"));
    }
    if spec.radii.iter().any(|&r| !(r >= 4.0)) {
        return Err(LabError::config("every radius in a scaling study must be >= 4"));
    }
    if spec.radii.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(LabError::config("scaling radii must be strictly increasing"));
    }
    let beta = spec.model.mass_exponent(spec.d);
    let mut rows = Vec::new();
    let mut diagnostics = Vec::new();
    let mut summaries = Vec::new();
    for &radius in &spec.radii {
        let summary = run_trials::<T>(&spec.plan_for(radius))?;
        let mean_mass = summary.mean_mass();
        let conv = summary.max_convergence();
        rows.push(ScalingRow {
            radius,
            model: model_label(&spec.model).to_owned(),
            lambda: spec.model.lambda,
            trials: spec.trials,
            mean_s: summary.mean,
            std_s: summary.std,
            ci95_lo: summary.ci95_lo,
            ci95_hi: summary.ci95_hi,
            mean_mass,
            mass_ratio: mean_mass / radius.powf(beta),
            median_tube_sup: median(&summary.tube_sups()).unwrap_or(f64::NAN),
            excluded: summary.excluded,
            master_seed: spec.master_seed,
        });
        diagnostics.push(RadiusDiagnostics {
            radius,
            nodes: summary.nodes,
            convergence: conv,
            flagged: conv.is_some_and(|c| c > CONVERGENCE_FLAG),
            dense_solves: summary.outcomes.iter().filter(|o| o.solver == Solver::Dense).count(),
        });
        summaries.push(summary);
    }
    let rs: Vec<f64> = rows.iter().map(|r| r.radius).collect();
    let fit = fit_power_law(&rs, &rows.iter().map(|r| r.mean_s).collect::<Vec<_>>());
    let mass_fit = fit_power_law(&rs, &rows.iter().map(|r| r.mean_mass).collect::<Vec<_>>());
    Ok(ScalingStudy {
        rows,
        fit,
        mass_fit,
        diagnostics,
        summaries,
    })
}

impl ScalingStudy {
    pub fn to_csv(&self) -> String {
        let mut t = CsvTable::new(&SCALING_HEADER);
        for r in &self.rows {
            t.push(vec![
                fmt_f64(r.radius),
                r.model.clone(),
                fmt_f64(r.lambda),
                r.trials.to_string(),
                fmt_f64(r.mean_s),
                fmt_f64(r.std_s),
                fmt_f64(r.ci95_lo),
                fmt_f64(r.ci95_hi),
                fmt_f64(r.mean_mass),
                fmt_f64(r.mass_ratio),
                fmt_f64(r.median_tube_sup),
                r.excluded.to_string(),
                r.master_seed.to_string(),
            ]);
        }
        t.render()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cover::build_cover;
    use crate::rng::rng_from_seed;
    use crate::surface::build_surface;
    use crate::weights::ModelTag;

    #[test]
    fn zero_matrix_is_immediate() {
        let m = HermitianMatrix::<f64>::zeros(5);
        let e = lambda_max(&m, 1e-10, 100, &mut rng_from_seed(1)).unwrap();
        assert_eq!(e.value, 0.0);
        assert_eq!(e.iterations, 1);
    }

    #[test]
    fn diagonal_spectrum() {
        let m = HermitianMatrix::<f64>::from_diagonal(&[3.0, 1.0, 1.0]);
        let e = lambda_max(&m, 1e-12, 1000, &mut rng_from_seed(2)).unwrap();
        assert!((e.value - 3.0).abs() < 1e-10);
        assert!((e.maximizer[0].norm() - 1.0).abs() < 1e-8);
        assert!(e.residual < 1e-4);
    }

    #[test]
    fn non_convergence_carries_best_iterate() {
        let m = HermitianMatrix::from_diagonal(&[1.0, 0.999, 0.5]);
        match lambda_max(&m, 1e-14, 3, &mut rng_from_seed(3)) {
            Err(EigenError::NonConvergence { iterations, best }) => {
                assert_eq!(iterations, 3);
                assert!(best.value > 0.5 && best.value <= 1.0);
                assert_eq!(best.maximizer.len(), 3);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
        assert!(matches!(
            lambda_max(&m, 0.0, 3, &mut rng_from_seed(3)),
            Err(EigenError::Lab(_))
        ));
    }

    #[test]
    fn empty_weight_functional() {
        let rule = build_surface::<f64>(SurfaceKind::Circle, 2, 32).unwrap();
        let cover = Arc::new(build_cover(4.0, 2, CellGeometry::Cube).unwrap());
        let w = Weight::empty(&cover, ModelTag::Custom);
        assert_eq!(mt_functional(&rule, &w, &MtOptions::default()).unwrap().value, 0.0);
    }

    #[test]
    fn degenerate_models_have_zero_spread() {
        let surface = SurfaceSpec {
            kind: SurfaceKind::Circle,
            d: 2,
            m: Some(32),
        };
        let cover = CoverSpec {
            radius: 4.0,
            d: 2,
            geometry: CellGeometry::Cube,
        };
        let none = expected_mt(&surface, &cover, &ModelSpec::selector(0.0, 0.0), 4, 1).unwrap();
        assert_eq!((none.mean, none.std), (0.0, 0.0));
        let all = expected_mt(&surface, &cover, &ModelSpec::selector(4.0, 0.0), 3, 1).unwrap();
        let vals = all.values();
        assert!(vals.iter().all(|&v| v == vals[0]));
        assert!(all.std <= 1e-12 * all.mean);
        let full = expected_mt(&surface, &cover, &ModelSpec::full(), 1, 9).unwrap();
        assert_eq!(vals[0], full.values()[0]);
        assert!(all.ci95_lo <= all.mean && all.mean <= all.ci95_hi);
    }

    #[test]
    fn scaling_study_validation() {
        let spec = ScalingSpec::new(vec![4.0, 3.0], SurfaceKind::Circle, 2, ModelSpec::full(), 1, 0);
        assert!(matches!(scaling_study::<f64>(&spec), Err(LabError::Config(_))));
        let mut spec = ScalingSpec::new(vec![4.0, 5.0], SurfaceKind::Circle, 2, ModelSpec::full(), 1, 0);
        spec.convergence = ConvergenceCheck::None;
        let study = scaling_study::<f64>(&spec).unwrap();
        assert_eq!(study.rows.len(), 2);
        assert!(study.fit.is_none());
        assert_eq!(study.to_csv().lines().count(), 3);
    }
}
