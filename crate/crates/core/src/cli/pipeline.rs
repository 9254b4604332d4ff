//! Subcommand pipelines. Each one produces named artifacts; the runner
//! writes them next to a manifest.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, OutputFormat};
use crate::chaining::{coverage_audit, covering_check, maurey_net, CoverageAudit, PolytopeSpec};
use crate::cover::CellCover;
use crate::error::{LabError, Result};
use crate::extension::{assemble_gram, write_gram_binary};
use crate::mtfunctional::{
    mt_functional_checked, run_trials, scaling_study, ConvergenceCheck, MonteCarloSummary, ScalingSpec, TrialPlan,
    CONVERGENCE_FLAG,
};
use crate::output::{fmt_f64, CsvTable};
use crate::probbounds::{tail_study, BoundKind};
use crate::rng::{derive_seed, rng_from_seed};
use crate::surface::QuadratureRule;
use crate::tubes::{tube_sup, TubeSupRecord};
use crate::weights::{weight_mass, Weight, WeightRecord};

pub const MANIFEST: &str = "manifest.json";
/// Largest excluded fraction of trials tolerated before a run fails.
pub const MAX_EXCLUDED_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subcommand {
    GenerateWeight,
    MtFunctional,
    ExpectedMt,
    ScalingStudy,
    TubeSup,
    TailStudy,
    MaureyNet,
    CoveringCheck,
}

impl Subcommand {
    pub fn name(self) -> &'static str {
        match self {
            Subcommand::GenerateWeight => "generate-weight",
            Subcommand::MtFunctional => "mt-functional",
            Subcommand::ExpectedMt => "expected-mt",
            Subcommand::ScalingStudy => "scaling-study",
            Subcommand::TubeSup => "tube-sup",
            Subcommand::TailStudy => "tail-study",
            Subcommand::MaureyNet => "maurey-net",
            Subcommand::CoveringCheck => "covering-check",
        }
    }
}

/// Per-invocation inputs that are not part of the config.
#[derive(Debug, Clone, Default)]
pub struct RunFlags {
    pub out: Option<PathBuf>,
    /// Weight JSON to use instead of sampling one.
    pub weight: Option<PathBuf>,
    /// Trial index whose derived seed draws the weight.
    pub index: u64,
    pub dump_gram: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub subcommand: String,
    #[serde(rename = "configHash")]
    pub config_hash: String,
    #[serde(rename = "masterSeed")]
    pub master_seed: u64,
    #[serde(rename = "toolVersion")]
    pub tool_version: String,
    /// Seconds; the only field that differs between reruns.
    #[serde(rename = "wallTime")]
    pub wall_time: f64,
    pub artifacts: Vec<String>,
    pub config: ExperimentConfig,
}

pub struct RunOutcome {
    pub directory: PathBuf,
    pub manifest: Manifest,
    /// Set when the run wrote its artifacts but must exit non-zero.
    pub failure: Option<LabError>,
}

struct Artifacts {
    files: Vec<(String, Vec<u8>)>,
    failure: Option<LabError>,
}

impl Artifacts {
    fn new() -> Self {
        Artifacts {
            files: Vec::new(),
            failure: None,
        }
    }

    fn text(&mut self, name: &str, body: String) {
        self.files.push((name.to_owned(), body.into_bytes()));
    }

    fn json<S: Serialize>(&mut self, name: &str, value: &S) -> Result<()> {
        let mut body = serde_json::to_string_pretty(value)?;
        body.push('\n');
        self.text(name, body);
        Ok(())
    }

    /// A table as CSV or as a JSON array of rows, per the output format.
    fn table<S: Serialize>(&mut self, stem: &str, format: OutputFormat, csv: String, rows: &S) -> Result<()> {
        match format {
            OutputFormat::Csv => {
                self.text(&format!("{stem}.csv"), csv);
                Ok(())
            }
            OutputFormat::Json => self.json(&format!("{stem}.json"), rows),
        }
    }
}

/// Run `sub` with `config`, writing artifacts under
/// `<root>/<subcommand>-<hash12>/`.
pub fn run_experiment(sub: Subcommand, config: &ExperimentConfig, flags: &RunFlags) -> Result<RunOutcome> {
    config.validate()?;
    let start = Instant::now();
    let artifacts = match sub {
        Subcommand::GenerateWeight => generate_weight(config, flags)?,
        Subcommand::MtFunctional => mt_functional_run(config, flags)?,
        Subcommand::ExpectedMt => expected_mt_run(config)?,
        Subcommand::ScalingStudy => scaling_run(config)?,
        Subcommand::TubeSup => tube_sup_run(config, flags)?,
        Subcommand::TailStudy => tail_run(config)?,
        Subcommand::MaureyNet => maurey_run(config)?,
        Subcommand::CoveringCheck => covering_run(config)?,
    };
    let hash = config.hash(sub.name());
    let directory = config
        .output_root(flags.out.as_deref())
        .join(format!("{}-{}", sub.name(), &hash[..12]));
    std::fs::create_dir_all(&directory)?;
    for (name, body) in &artifacts.files {
        std::fs::write(directory.join(name), body)?;
    }
    let manifest = Manifest {
        subcommand: sub.name().to_owned(),
        config_hash: hash,
        master_seed: config.run.master_seed,
        tool_version: env!("CARGO_PKG_VERSION").to_owned(),
        wall_time: start.elapsed().as_secs_f64(),
        artifacts: artifacts.files.iter().map(|(n, _)| n.clone()).collect(),
        config: config.clone(),
    };
    let mut body = serde_json::to_string_pretty(&manifest)?;
    body.push('\n');
    std::fs::write(directory.join(MANIFEST), body)?;
    Ok(RunOutcome {
        directory,
        manifest,
        failure: artifacts.failure,
    })
}

fn trial_plan(config: &ExperimentConfig) -> Result<TrialPlan> {
    let mut plan = TrialPlan::new(
        config.surface()?.clone(),
        config.cover()?.clone(),
        config.model()?.clone(),
        config.run.trials,
        config.run.master_seed,
    );
    plan.options = config.run.options();
    plan.tubes = config.tubes.clone();
    plan.convergence = ConvergenceCheck::FirstTrial;
    Ok(plan)
}

/// The weight named by `--weight`, or the one trial `index` would draw.
fn obtain_weight(config: &ExperimentConfig, flags: &RunFlags) -> Result<(Weight<f64>, u64)> {
    if let Some(path) = &flags.weight {
        let text = std::fs::read_to_string(path)
            .map_err(|e| LabError::Config(format!("cannot read weight {}: {e}", path.display())))?;
        let record: WeightRecord = serde_json::from_str(&text)
            .map_err(|e| LabError::Config(format!("{}: line {}: {e}", path.display(), e.line())))?;
        let seed = record.seed.unwrap_or(0);
        let w = record.into_weight::<f64>()?;
        if let Some(c) = &config.cover {
            if c.d != w.cover().dim() || c.radius != w.cover().radius() {
                return Err(LabError::config("weight file does not match the config's cover"));
            }
        }
        return Ok((w, seed));
    }
    let cover = Arc::new(CellCover::<f64>::from_spec(config.cover()?)?);
    let seed = derive_seed(config.run.master_seed, flags.index);
    let w = config.model()?.sample(&cover, seed, &mut rng_from_seed(seed))?;
    Ok((w, seed))
}

fn generate_weight(config: &ExperimentConfig, flags: &RunFlags) -> Result<Artifacts> {
    let (w, _) = obtain_weight(config, flags)?;
    let mut a = Artifacts::new();
    a.json("weight.json", &w.to_record())?;
    Ok(a)
}

#[derive(Serialize)]
struct MtReport {
    value: f64,
    iterations: usize,
    residual: f64,
    nodes: usize,
    convergence: Option<f64>,
    flagged: bool,
    seed: u64,
    mass: f64,
    support: usize,
    /// Maximizing density `g` (not the orthonormal coordinates), as `[re, im]`.
    maximizer: Vec<[f64; 2]>,
}

fn mt_functional_run(config: &ExperimentConfig, flags: &RunFlags) -> Result<Artifacts> {
    let surface = config.surface()?;
    let (w, seed) = obtain_weight(config, flags)?;
    let m = surface.node_count(w.cover().radius());
    let opts = config.run.options();
    let est = mt_functional_checked(surface.kind, surface.d, m, &w, &opts)?;
    let rule = QuadratureRule::<f64>::build(surface.kind, surface.d, m)?;
    let g = rule.from_orthonormal(&est.maximizer)?;
    let mut a = Artifacts::new();
    a.json(
        "mt.json",
        &MtReport {
            value: est.value,
            iterations: est.iterations,
            residual: est.residual,
            nodes: est.nodes,
            convergence: est.convergence,
            flagged: est.convergence_flagged(),
            seed,
            mass: weight_mass(&w),
            support: w.support_size(),
            maximizer: g.iter().map(|z| [z.re, z.im]).collect(),
        },
    )?;
    if flags.dump_gram {
        let gram = assemble_gram(&rule, &w)?;
        let mut bytes = Vec::new();
        write_gram_binary(&gram, seed, &mut bytes)?;
        a.files.push(("gram.bin".to_owned(), bytes));
    }
    Ok(a)
}

fn trials_csv(summary: &MonteCarloSummary) -> String {
    let mut t = CsvTable::new(&[
        "index", "seed", "value", "iterations", "residual", "mass", "support", "tubeSup", "convergence",
    ]);
    let opt = |x: Option<f64>| x.map_or_else(String::new, fmt_f64);
    for o in &summary.outcomes {
        t.push(vec![
            o.index.to_string(),
            o.seed.to_string(),
            opt(o.value),
            o.iterations.to_string(),
            fmt_f64(o.residual),
            fmt_f64(o.mass),
            o.support.to_string(),
            opt(o.tube_sup),
            opt(o.convergence),
        ]);
    }
    t.render()
}

fn excluded_failure(excluded: usize, trials: usize) -> Option<LabError> {
    (excluded as f64 > MAX_EXCLUDED_FRACTION * trials as f64).then(|| LabError::NonConvergence {
        iterations: 0,
        best_value: f64::NAN,
    })
}

#[derive(Serialize)]
struct ExpectedReport<'a> {
    #[serde(rename = "N")]
    trials: usize,
    nodes: usize,
    #[serde(rename = "masterSeed")]
    master_seed: u64,
    mean: f64,
    std: f64,
    #[serde(rename = "ci95lo")]
    ci95_lo: f64,
    #[serde(rename = "ci95hi")]
    ci95_hi: f64,
    #[serde(rename = "meanMass")]
    mean_mass: f64,
    excluded: usize,
    convergence: Option<f64>,
    flagged: bool,
    outcomes: &'a [crate::mtfunctional::TrialOutcome],
}

fn expected_mt_run(config: &ExperimentConfig) -> Result<Artifacts> {
    let summary = run_trials::<f64>(&trial_plan(config)?)?;
    let conv = summary.max_convergence();
    let mut a = Artifacts::new();
    let report = ExpectedReport {
        trials: summary.trials,
        nodes: summary.nodes,
        master_seed: summary.master_seed,
        mean: summary.mean,
        std: summary.std,
        ci95_lo: summary.ci95_lo,
        ci95_hi: summary.ci95_hi,
        mean_mass: summary.mean_mass(),
        excluded: summary.excluded,
        convergence: conv,
        flagged: conv.is_some_and(|c| c > CONVERGENCE_FLAG),
        outcomes: &summary.outcomes,
    };
    a.table("trials", config.output.format, trials_csv(&summary), &summary.outcomes)?;
    a.json("summary.json", &report)?;
    a.failure = excluded_failure(summary.excluded, summary.trials);
    Ok(a)
}

fn scaling_run(config: &ExperimentConfig) -> Result<Artifacts> {
    let surface = config.surface()?;
    let radii = config
        .scaling
        .as_ref()
        .ok_or_else(|| LabError::config("scaling-study needs a 'scaling' section with Rs"))?
        .radii
        .clone();
    let mut spec = ScalingSpec::new(
        radii,
        surface.kind,
        surface.d,
        config.model()?.clone(),
        config.run.trials,
        config.run.master_seed,
    );
    spec.nodes = surface.m;
    spec.geometry = config.geometry();
    spec.options = config.run.options();
    if let Some(t) = &config.tubes {
        spec.tubes = Some(t.clone());
    }
    let study = scaling_study::<f64>(&spec)?;
    let mut a = Artifacts::new();
    a.table("scaling", config.output.format, study.to_csv(), &study.rows)?;
    a.json("scaling.json", &study)?;
    let excluded: usize = study.rows.iter().map(|r| r.excluded).sum();
    a.failure = excluded_failure(excluded, study.rows.len() * config.run.trials);
    Ok(a)
}

fn tube_sup_run(config: &ExperimentConfig, flags: &RunFlags) -> Result<Artifacts> {
    let (w, seed) = obtain_weight(config, flags)?;
    let spec = config.tubes.clone().unwrap_or_default();
    let sup = tube_sup(&w, &spec)?;
    #[derive(Serialize)]
    struct Out {
        seed: u64,
        #[serde(flatten)]
        sup: TubeSupRecord,
        #[serde(rename = "gridValue")]
        grid_value: f64,
    }
    let mut a = Artifacts::new();
    a.json(
        "tube.json",
        &Out {
            seed,
            grid_value: sup.grid_value,
            sup: sup.to_record(),
        },
    )?;
    Ok(a)
}

fn tail_run(config: &ExperimentConfig) -> Result<Artifacts> {
    let spec = config
        .tail
        .as_ref()
        .ok_or_else(|| LabError::config("tail-study needs a 'tail' section"))?;
    let study = tail_study(spec)?;
    #[derive(Serialize)]
    struct Out<'a> {
        bound: BoundKind,
        samples: usize,
        dominance: bool,
        rows: &'a [crate::probbounds::TailRow],
    }
    let mut a = Artifacts::new();
    a.table("tail", config.output.format, study.to_csv(), &study.rows)?;
    a.json(
        "tail.json",
        &Out {
            bound: spec.bound,
            samples: spec.samples,
            dominance: study.dominance_holds(),
            rows: &study.rows,
        },
    )?;
    Ok(a)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaureyReport {
    pub n: usize,
    #[serde(rename = "N")]
    pub dim: usize,
    pub epsilon: f64,
    #[serde(rename = "K")]
    pub bound: f64,
    pub depth: usize,
    #[serde(rename = "netSize")]
    pub net_size: usize,
    #[serde(rename = "logNet")]
    pub log_net: f64,
    /// `k·log(2n+1)`.
    #[serde(rename = "logPickBound")]
    pub log_pick_bound: f64,
    /// `(2K/ε)²·log(2n+1)`.
    pub envelope: f64,
    pub audit: CoverageAudit,
}

fn maurey_run(config: &ExperimentConfig) -> Result<Artifacts> {
    let m = config
        .maurey
        .as_ref()
        .ok_or_else(|| LabError::config("maurey-net needs a 'maurey' section"))?;
    let seed = config.run.master_seed;
    let poly = PolytopeSpec::<f64>::random_unit(m.n, m.dim, &mut rng_from_seed(derive_seed(seed, 0)))?;
    let net = maurey_net(&poly, m.epsilon, m.mode, &mut rng_from_seed(derive_seed(seed, 1)))?;
    let audit = coverage_audit(&poly, &net, m.epsilon, m.audit_samples, &mut rng_from_seed(derive_seed(seed, 2)));
    let l = ((2 * m.n + 1) as f64).ln();
    let report = MaureyReport {
        n: m.n,
        dim: m.dim,
        epsilon: m.epsilon,
        bound: poly.bound(),
        depth: net.depth,
        net_size: net.len(),
        log_net: net.log_size(),
        log_pick_bound: net.depth as f64 * l,
        envelope: (2.0 * poly.bound() / m.epsilon).powi(2) * l,
        audit,
    };
    let mut a = Artifacts::new();
    a.json("maurey.json", &report)?;
    Ok(a)
}

fn covering_run(config: &ExperimentConfig) -> Result<Artifacts> {
    let c = config
        .covering
        .as_ref()
        .ok_or_else(|| LabError::config("covering-check needs a 'covering' section"))?;
    let surface = config.surface()?;
    let cover_spec = config.cover()?;
    let cover = CellCover::<f64>::from_spec(cover_spec)?;
    let rule = QuadratureRule::<f64>::build(surface.kind, surface.d, surface.node_count(cover_spec.radius))?;
    let table = covering_check(
        &rule,
        &cover,
        &c.epsilons,
        c.sample_count,
        &mut rng_from_seed(derive_seed(config.run.master_seed, 0)),
    )?;
    let mut a = Artifacts::new();
    a.table("covering", config.output.format, table.to_csv(), &table.rows)?;
    Ok(a)
}

/// Run directories (those holding a manifest) directly under `root`, sorted.
pub fn find_runs(root: &Path) -> Result<Vec<(PathBuf, Manifest)>> {
    let mut out = Vec::new();
    let mut consider = |dir: &Path| -> Result<()> {
        let path = dir.join(MANIFEST);
        if path.is_file() {
            let m: Manifest = serde_json::from_str(&std::fs::read_to_string(&path)?)
                .map_err(|e| LabError::Config(format!("{}: {e}", path.display())))?;
            out.push((dir.to_path_buf(), m));
        }
        Ok(())
    };
    consider(root)?;
    let mut entries: Vec<PathBuf> = std::fs::read_dir(root)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    entries.sort();
    for dir in entries {
        consider(&dir)?;
    }
    Ok(out)
}
