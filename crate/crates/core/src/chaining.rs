//! Empirical-method ε-nets for balanced convex hulls and packing witnesses
//! for covering numbers of the unit ball under `‖·‖∼`.

use num_complex::Complex;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cover::CellCover;
use crate::error::{LabError, Result};
use crate::extension::{sup_abs, CellIntegralMap, SeminormKernel};
use crate::output::{fmt_f64, CsvTable};
use crate::scalar::{norm, Scalar};
use crate::surface::{surface_l2_norm, QuadratureRule};

/// Largest enumerated net the library will build.
pub const ENUMERATION_BUDGET: f64 = 1e6;

/// Vectors `y_1 … y_n` spanning the hull `{Σ α_k y_k : Σ|α_k| ≤ 1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolytopeSpec<T> {
    vectors: Vec<Vec<T>>,
    bound: T,
}

impl<T: Scalar> PolytopeSpec<T> {
    pub fn new(vectors: Vec<Vec<T>>) -> Result<Self> {
        let dim = vectors.first().map(Vec::len).ok_or_else(|| LabError::config("polytope needs at least one vector"))?;
        if dim == 0 {
            return Err(LabError::config("polytope vectors must be nonempty"));
        }
        if let Some(v) = vectors.iter().find(|v| v.len() != dim) {
            return Err(LabError::Dimension {
                expected: dim,
                got: v.len(),
            });
        }
        let bound = vectors.iter().map(|v| norm(v)).fold(T::zero(), T::max);
        Ok(PolytopeSpec { vectors, bound })
    }

    /// `n` independent uniformly random unit vectors in `ℝ^dim`.
    pub fn random_unit<R: Rng + ?Sized>(n: usize, dim: usize, rng: &mut R) -> Result<Self> {
        let vectors = (0..n)
            .map(|_| loop {
                let v: Vec<T> = (0..dim).map(|_| T::lit(rng.sample(StandardNormal))).collect();
                let r = norm(&v);
                if r > T::zero() {
                    break v.into_iter().map(|x| x / r).collect();
                }
            })
            .collect();
        Self::new(vectors)
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.vectors[0].len()
    }

    /// `K = max_k ‖y_k‖₂`.
    pub fn bound(&self) -> T {
        self.bound
    }

    pub fn vectors(&self) -> &[Vec<T>] {
        &self.vectors
    }

    /// `Σ α_k y_k`.
    pub fn combine(&self, alpha: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.dim()];
        for (a, y) in alpha.iter().zip(&self.vectors) {
            for (o, &v) in out.iter_mut().zip(y) {
                *o += *a * v;
            }
        }
        out
    }

    /// A random hull point: Gaussian direction in coefficient space scaled to
    /// a uniform `ℓ¹` radius in `[0, 1]`.
    pub fn random_hull_point<R: Rng + ?Sized>(&self, rng: &mut R) -> (Vec<T>, Vec<T>) {
        let raw: Vec<f64> = (0..self.len()).map(|_| rng.sample(StandardNormal)).collect();
        let l1: f64 = raw.iter().map(|x: &f64| x.abs()).sum();
        let r: f64 = rng.random();
        let alpha: Vec<T> = raw.iter().map(|x| T::lit(if l1 > 0.0 { x * r / l1 } else { 0.0 })).collect();
        (self.combine(&alpha), alpha)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NetMode {
    Enumerated,
    /// Random net points, `count` of them.
    Sampled { count: usize },
}

/// Averages of `k` picks from `{0, ±y_1, …, ±y_n}`, stored as integer
/// coefficient vectors `c` with `Σ|c_i| ≤ k` (point `Σ c_i y_i / k`).
#[derive(Debug, Clone, PartialEq)]
pub struct MaureyNet<T> {
    pub depth: usize,
    pub mode: NetMode,
    pub coefficients: Vec<Vec<i32>>,
    pub points: Vec<Vec<T>>,
    /// Number of ordered pick sequences, `(2n+1)^k`.
    pub pick_count: f64,
}

impl<T: Scalar> MaureyNet<T> {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `log |net|`, which never exceeds `k·log(2n+1)`.
    pub fn log_size(&self) -> f64 {
        (self.points.len() as f64).ln()
    }

    /// Index and distance of the closest net point.
    pub fn nearest(&self, x: &[T]) -> Option<(usize, T)> {
        self.points
            .par_iter()
            .enumerate()
            .map(|(i, p)| {
                let d2: T = p.iter().zip(x).map(|(a, b)| (*a - *b) * (*a - *b)).sum();
                (i, d2)
            })
            .reduce_with(|a, b| if b.1 < a.1 || (b.1 == a.1 && b.0 < a.0) { b } else { a })
            .map(|(i, d2)| (i, d2.sqrt()))
    }

    /// `ℓ¹` mass of the hull coefficients of point `i`.
    pub fn coefficient_mass(&self, i: usize) -> f64 {
        self.coefficients[i].iter().map(|c| c.unsigned_abs() as f64).sum::<f64>() / self.depth as f64
    }
}

/// Sample depth: the averaging error satisfies `𝔼‖avg − x‖² ≤ K²/k`, so
/// `k = ⌈K²/ε²⌉` puts some average within `ε` of every hull point.
pub fn maurey_depth(bound: f64, eps: f64) -> Result<usize> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(LabError::Domain(format!("epsilon must be positive, got {eps}")));
    }
    // relative slack so that K = 1 + ulp from normalization does not bump k
    let k = (bound / eps).powi(2) * (1.0 - 1e-12);
    Ok((k.ceil() as usize).max(1))
}

pub fn maurey_net<T: Scalar, R: Rng + ?Sized>(
    spec: &PolytopeSpec<T>,
    eps: f64,
    mode: NetMode,
    rng: &mut R,
) -> Result<MaureyNet<T>> {
    let k = maurey_depth(spec.bound().to_f64_lossy(), eps)?;
    let n = spec.len();
    let pick_count = ((2 * n + 1) as f64).powi(k as i32);
    let coefficients = match mode {
        NetMode::Enumerated => {
            if pick_count > ENUMERATION_BUDGET {
                return Err(LabError::Precondition(format!(
                    "enumerated net needs (2n+1)^k = {}^{} = {:.3e} picks, over the budget of {:.0e}",
                    2 * n + 1,
                    k,
                    pick_count,
                    ENUMERATION_BUDGET
                )));
            }
            let mut out = Vec::new();
            let mut cur = vec![0_i32; n];
            enumerate_l1_ball(&mut cur, 0, k as i32, &mut out);
            out
        }
        NetMode::Sampled { count } => (0..count)
            .map(|_| {
                let mut c = vec![0_i32; n];
                for _ in 0..k {
                    let pick = rng.random_range(0..2 * n + 1);
                    if pick < n {
                        c[pick] += 1;
                    } else if pick < 2 * n {
                        c[pick - n] -= 1;
                    }
                }
                c
            })
            .collect(),
    };
    let scale = T::from_usize_lossy(k);
    let points = coefficients
        .iter()
        .map(|c| {
            let alpha: Vec<T> = c.iter().map(|&ci| T::lit(ci as f64) / scale).collect();
            spec.combine(&alpha)
        })
        .collect();
    Ok(MaureyNet {
        depth: k,
        mode,
        coefficients,
        points,
        pick_count,
    })
}

// Every integer vector with ℓ¹ norm at most `budget` in the remaining slots.
fn enumerate_l1_ball(cur: &mut [i32], pos: usize, budget: i32, out: &mut Vec<Vec<i32>>) {
    if pos == cur.len() {
        out.push(cur.to_vec());
        return;
    }
    for c in -budget..=budget {
        cur[pos] = c;
        enumerate_l1_ball(cur, pos + 1, budget - c.abs(), out);
    }
    cur[pos] = 0;
}

/// Result of checking random hull points against a net.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageAudit {
    pub samples: usize,
    pub covered: usize,
    #[serde(rename = "maxDistance")]
    pub max_distance: f64,
}

pub fn coverage_audit<T: Scalar, R: Rng + ?Sized>(
    spec: &PolytopeSpec<T>,
    net: &MaureyNet<T>,
    eps: f64,
    samples: usize,
    rng: &mut R,
) -> CoverageAudit {
    let mut covered = 0;
    let mut max_distance = 0.0_f64;
    for _ in 0..samples {
        let (x, _) = spec.random_hull_point(rng);
        let dist = net.nearest(&x).map_or(f64::INFINITY, |(_, d)| d.to_f64_lossy());
        if dist <= eps {
            covered += 1;
        }
        max_distance = max_distance.max(dist);
    }
    CoverageAudit {
        samples,
        covered,
        max_distance,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoveringRow {
    pub epsilon: f64,
    #[serde(rename = "packingSize")]
    pub packing_size: usize,
    #[serde(rename = "logPacking")]
    pub log_packing: f64,
    /// `(log n)/ε²` with `n` the number of cells.
    pub envelope: f64,
}

/// Packing witnesses for the covering numbers of the `L²(Σ)` unit ball
/// under `‖·‖∼`. These are lower bounds, not covering computations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoveringTable {
    pub cells: usize,
    pub samples: usize,
    pub rows: Vec<CoveringRow>,
    /// Indices into the sample of each packing, aligned with `rows`.
    #[serde(skip)]
    pub packings: Vec<Vec<usize>>,
    #[serde(skip)]
    pub integrals: Vec<Vec<Complex<f64>>>,
}

impl CoveringTable {
    pub fn to_csv(&self) -> String {
        let mut t = CsvTable::new(&["epsilon", "packingSize", "logPacking", "envelope"]);
        for r in &self.rows {
            t.push(vec![
                fmt_f64(r.epsilon),
                r.packing_size.to_string(),
                fmt_f64(r.log_packing),
                fmt_f64(r.envelope),
            ]);
        }
        t.render()
    }

    /// `‖g_i − g_j‖∼` between two samples.
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        tilde_distance(&self.integrals[i], &self.integrals[j])
    }
}

fn tilde_distance<T: Scalar>(a: &[Complex<T>], b: &[Complex<T>]) -> T {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(T::zero(), T::max)
}

/// A random density with `‖g‖_{L²(Σ)} = 1` (complex Gaussian coefficients).
pub fn random_unit_density<T: Scalar, R: Rng + ?Sized>(rule: &QuadratureRule<T>, rng: &mut R) -> Result<Vec<Complex<T>>> {
    loop {
        let g: Vec<Complex<T>> = (0..rule.len())
            .map(|_| Complex::new(T::lit(rng.sample(StandardNormal)), T::lit(rng.sample(StandardNormal))))
            .collect();
        let r = surface_l2_norm(rule, &g)?;
        if r > T::zero() {
            return Ok(g.into_iter().map(|z| z / r).collect());
        }
    }
}

/// Greedy `ε`-separated packings of `sample_count` random unit densities.
///
/// Smaller `ε` packings start from the next larger one, so packing size is
/// nonincreasing in `ε`.
pub fn covering_check<T: Scalar, R: Rng + ?Sized>(
    rule: &QuadratureRule<T>,
    cover: &CellCover<T>,
    eps_list: &[f64],
    sample_count: usize,
    rng: &mut R,
) -> Result<CoveringTable> {
    if sample_count < 10 {
        return Err(LabError::config(format!("sample count must be at least 10, got {sample_count}")));
    }
    if eps_list.is_empty() {
        return Err(LabError::config("epsilon list is empty"));
    }
    if let Some(e) = eps_list.iter().find(|&&e| !(e > 0.0 && e <= 1.0)) {
        return Err(LabError::config(format!("epsilon values must lie in (0, 1], got {e}")));
    }
    let map = CellIntegralMap::new(rule, cover, SeminormKernel::Complex)?;
    let densities = (0..sample_count)
        .map(|_| random_unit_density(rule, rng))
        .collect::<Result<Vec<_>>>()?;
    let integrals: Vec<Vec<Complex<f64>>> = densities
        .par_iter()
        .map(|g| {
            map.apply(g)
                .map(|v| v.iter().map(|z| Complex::new(z.re.to_f64_lossy(), z.im.to_f64_lossy())).collect())
        })
        .collect::<Result<_>>()?;

    let mut order: Vec<usize> = (0..eps_list.len()).collect();
    order.sort_by(|&a, &b| eps_list[b].total_cmp(&eps_list[a]).then(a.cmp(&b)));
    let mut packings = vec![Vec::new(); eps_list.len()];
    let mut current: Vec<usize> = Vec::new();
    for &idx in &order {
        let eps = eps_list[idx];
        for i in 0..sample_count {
            if current.contains(&i) {
                continue;
            }
            if current.iter().all(|&j| tilde_distance(&integrals[i], &integrals[j]) > eps) {
                current.push(i);
            }
        }
        packings[idx] = current.clone();
    }
    let log_n = (cover.len() as f64).ln();
    let rows = eps_list
        .iter()
        .zip(&packings)
        .map(|(&epsilon, p)| CoveringRow {
            epsilon,
            packing_size: p.len(),
            log_packing: (p.len() as f64).ln(),
            envelope: log_n / (epsilon * epsilon),
        })
        .collect();
    Ok(CoveringTable {
        cells: cover.len(),
        samples: sample_count,
        rows,
        packings,
        integrals,
    })
}

/// Largest `‖g‖∼` over a table's sample.
pub fn max_seminorm(table: &CoveringTable) -> f64 {
    table.integrals.iter().map(|v| sup_abs(v)).fold(0.0, f64::max)
}
