//! Radius-1 tubes, tube occupancy `w(T) = ∫_T w`, and a grid search for
//! `sup_T w(T)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cover::{CellCover, CellGeometry};
use crate::error::{LabError, Result};
use crate::scalar::{dot, norm, Scalar};
use crate::weights::Weight;

pub const TUBE_RADIUS: f64 = 1.0;

/// Membership slack: a point counts as inside when its distance to the axis
/// is at most `1 + TUBE_SLACK`, so that the grid sweep and direct evaluation
/// agree on lattice points sitting exactly on the boundary.
const TUBE_SLACK: f64 = 1e-9;

/// Low-discrepancy sample points per cell for the volume-fraction method.
pub const VOLUME_SAMPLES: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tube<T> {
    pub direction: Vec<T>,
    pub anchor: Vec<T>,
}

impl<T: Scalar> Tube<T> {
    /// Normalizes `direction` and moves `point` onto the hyperplane through
    /// the origin orthogonal to it.
    pub fn new(direction: &[T], point: &[T]) -> Result<Self> {
        if direction.len() != point.len() {
            return Err(LabError::Dimension {
                expected: direction.len(),
                got: point.len(),
            });
        }
        let n = norm(direction);
        if !(n > T::zero()) {
            return Err(LabError::config("tube direction must be nonzero"));
        }
        let u: Vec<T> = direction.iter().map(|&x| x / n).collect();
        let t = dot(point, &u);
        let anchor = point.iter().zip(&u).map(|(&p, &e)| p - t * e).collect();
        Ok(Tube { direction: u, anchor })
    }

    pub fn dim(&self) -> usize {
        self.direction.len()
    }

    pub fn distance_to_axis(&self, p: &[T]) -> T {
        let rel: Vec<T> = p.iter().zip(&self.anchor).map(|(&a, &b)| a - b).collect();
        let t = dot(&rel, &self.direction);
        rel.iter()
            .zip(&self.direction)
            .map(|(&r, &e)| (r - t * e).powi(2))
            .sum::<T>()
            .sqrt()
    }

    pub fn contains(&self, p: &[T]) -> bool {
        self.distance_to_axis(p) <= T::lit(TUBE_RADIUS + TUBE_SLACK)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OccupancyMethod {
    /// A cell counts in full when its center is within distance 1 of the axis.
    #[default]
    CenterIndicator,
    /// Fraction of 256 fixed sample points of the cell inside the tube.
    VolumeFraction,
}

impl std::str::FromStr for OccupancyMethod {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "center-indicator" => Ok(OccupancyMethod::CenterIndicator),
            "volume-fraction" => Ok(OccupancyMethod::VolumeFraction),
            other => Err(LabError::config(format!("unknown occupancy method '{other}'"))),
        }
    }
}

fn radical_inverse(mut i: usize, base: usize) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += f * (i % base) as f64;
        i /= base;
        f *= inv;
    }
    r
}

/// Fixed sample offsets (relative to the cell center) filling one cell.
/// Hammersley points in the unit box, mapped area-preservingly onto balls.
pub fn cell_sample_offsets<T: Scalar>(geometry: CellGeometry, d: usize, count: usize) -> Vec<Vec<T>> {
    (0..count)
        .map(|i| {
            let mut u = vec![(i as f64 + 0.5) / count as f64, radical_inverse(i, 2)];
            if d == 3 {
                u.push(radical_inverse(i, 3));
            }
            let p: Vec<f64> = match geometry {
                CellGeometry::Cube => u.iter().map(|x| x - 0.5).collect(),
                CellGeometry::Ball => {
                    let rho = crate::cover::BALL_CELL_RADIUS;
                    let tau = std::f64::consts::TAU;
                    if d == 2 {
                        let r = rho * u[0].sqrt();
                        let th = tau * u[1];
                        vec![r * th.cos(), r * th.sin()]
                    } else {
                        let r = rho * u[0].cbrt();
                        let z = 1.0 - 2.0 * u[1];
                        let s = (1.0 - z * z).max(0.0).sqrt();
                        let ph = tau * u[2];
                        vec![r * s * ph.cos(), r * s * ph.sin(), r * z]
                    }
                }
            };
            p.into_iter().map(T::lit).collect()
        })
        .collect()
}

/// Evaluates occupancies of many tubes against one weight.
pub struct OccupancyEvaluator<'a, T> {
    cover: &'a CellCover<T>,
    support: Vec<(usize, T)>,
    offsets: Vec<Vec<T>>,
    reach: T,
}

impl<'a, T: Scalar> OccupancyEvaluator<'a, T> {
    pub fn new(weight: &'a Weight<T>) -> Self {
        let cover = weight.cover().as_ref();
        let vol = cover.cell_volume();
        let support = weight
            .iter()
            .map(|(k, m)| (k, T::lit(f64::from(m)) * vol))
            .collect();
        let half_diag = match cover.geometry() {
            CellGeometry::Cube => T::from_usize_lossy(cover.dim()).sqrt() * T::lit(0.5),
            CellGeometry::Ball => T::lit(crate::cover::BALL_CELL_RADIUS),
        };
        OccupancyEvaluator {
            cover,
            support,
            offsets: cell_sample_offsets(cover.geometry(), cover.dim(), VOLUME_SAMPLES),
            reach: T::lit(TUBE_RADIUS + TUBE_SLACK) + half_diag,
        }
    }

    pub fn occupancy(&self, tube: &Tube<T>, method: OccupancyMethod) -> T {
        match method {
            OccupancyMethod::CenterIndicator => self
                .support
                .iter()
                .filter(|(k, _)| tube.contains(self.cover.center(*k)))
                .map(|&(_, mass)| mass)
                .sum(),
            OccupancyMethod::VolumeFraction => {
                let total = T::from_usize_lossy(self.offsets.len());
                let mut p = vec![T::zero(); self.cover.dim()];
                self.support
                    .iter()
                    .filter(|(k, _)| tube.distance_to_axis(self.cover.center(*k)) <= self.reach)
                    .map(|&(k, mass)| {
                        let c = self.cover.center(k);
                        let inside = self
                            .offsets
                            .iter()
                            .filter(|off| {
                                for (pi, (ci, oi)) in p.iter_mut().zip(c.iter().zip(off.iter())) {
                                    *pi = *ci + *oi;
                                }
                                tube.contains(&p)
                            })
                            .count();
                        mass * T::from_usize_lossy(inside) / total
                    })
                    .sum()
            }
        }
    }
}

/// `w(T) = ∫_T w` under the chosen approximation.
pub fn tube_occupancy<T: Scalar>(weight: &Weight<T>, tube: &Tube<T>, method: OccupancyMethod) -> Result<T> {
    if tube.dim() != weight.cover().dim() {
        return Err(LabError::Dimension {
            expected: weight.cover().dim(),
            got: tube.dim(),
        });
    }
    Ok(OccupancyEvaluator::new(weight).occupancy(tube, method))
}

fn default_spacing() -> f64 {
    0.5
}

fn default_rounds() -> usize {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchSpec {
    /// Angular step; `1/(2R)` when absent.
    #[serde(rename = "angularResolution", default, skip_serializing_if = "Option::is_none")]
    pub angular_resolution: Option<f64>,
    #[serde(rename = "offsetSpacing", default = "default_spacing")]
    pub offset_spacing: f64,
    #[serde(rename = "refinementRounds", default = "default_rounds")]
    pub refinement_rounds: usize,
    #[serde(default)]
    pub method: OccupancyMethod,
}

impl Default for SearchSpec {
    fn default() -> Self {
        SearchSpec {
            angular_resolution: None,
            offset_spacing: default_spacing(),
            refinement_rounds: default_rounds(),
            method: OccupancyMethod::default(),
        }
    }
}

impl SearchSpec {
    pub fn angular_step(&self, radius: f64) -> f64 {
        self.angular_resolution.unwrap_or(1.0 / (2.0 * radius))
    }

    fn validate(&self) -> Result<()> {
        if let Some(a) = self.angular_resolution {
            if !(a > 0.0) {
                return Err(LabError::config("angular resolution must be positive"));
            }
        }
        if !(self.offset_spacing > 0.0) {
            return Err(LabError::config("offset spacing must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Resolution {
    #[serde(rename = "angularStep")]
    pub angular_step: f64,
    #[serde(rename = "offsetSpacing")]
    pub offset_spacing: f64,
    pub directions: usize,
    pub offsets: usize,
    #[serde(rename = "refinementRounds")]
    pub refinement_rounds: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TubeSup<T> {
    pub value: T,
    pub tube: Tube<T>,
    /// Best value on the coarse grid, before refinement.
    pub grid_value: T,
    pub resolution: Resolution,
}

/// JSON form of a [`TubeSup`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TubeSupRecord {
    pub value: f64,
    pub direction: Vec<f64>,
    pub anchor: Vec<f64>,
    pub resolution: Resolution,
}

impl<T: Scalar> TubeSup<T> {
    pub fn to_record(&self) -> TubeSupRecord {
        TubeSupRecord {
            value: self.value.to_f64_lossy(),
            direction: self.tube.direction.iter().map(|x| x.to_f64_lossy()).collect(),
            anchor: self.tube.anchor.iter().map(|x| x.to_f64_lossy()).collect(),
            resolution: self.resolution.clone(),
        }
    }
}

/// Coarse search grid of tubes meeting `B_R`.
pub struct TubeGrid<T> {
    dim: usize,
    directions: Vec<[Vec<T>; 3]>, // (u, e1, e2); e2 unused in the plane
    offsets: Vec<T>,              // 1-D offsets along each orthogonal axis
    anchors: Vec<(usize, usize)>, // offset pairs inside the disk (space only)
}

impl<T: Scalar> TubeGrid<T> {
    pub fn new(d: usize, radius: T, angular_step: f64, spacing: f64) -> Result<Self> {
        let directions = match d {
            2 => {
                // multiple of 4 so the grid is invariant under quarter turns
                let n = ((std::f64::consts::PI / angular_step).ceil() as usize).div_ceil(4) * 4;
                (0..n)
                    .map(|i| {
                        let th = T::PI() * T::from_usize_lossy(i) / T::from_usize_lossy(n);
                        let (s, c) = th.sin_cos();
                        [vec![c, s], vec![-s, c], Vec::new()]
                    })
                    .collect()
            }
            3 => {
                let n = ((std::f64::consts::TAU / (angular_step * angular_step)).ceil() as usize).max(4);
                let golden = T::PI() * (T::lit(3.0) - T::lit(5.0).sqrt());
                (0..n)
                    .map(|i| {
                        let z = (T::from_usize_lossy(i) + T::lit(0.5)) / T::from_usize_lossy(n);
                        let r = (T::one() - z * z).sqrt();
                        let (s, c) = (golden * T::from_usize_lossy(i)).sin_cos();
                        let u = vec![r * c, r * s, z];
                        let (e1, e2) = orthonormal_complement(&u);
                        [u, e1, e2]
                    })
                    .collect()
            }
            _ => return Err(LabError::config(format!("tube search supports d in {{2, 3}}, got {d}"))),
        };
        let h = T::lit(spacing);
        let half = (radius / h).floor().to_usize().unwrap_or(0);
        let offsets: Vec<T> = (0..=2 * half)
            .map(|j| (T::from_usize_lossy(j) - T::from_usize_lossy(half)) * h)
            .collect();
        let mut anchors = Vec::new();
        if d == 3 {
            let r2 = radius * radius;
            for (a, &x) in offsets.iter().enumerate() {
                for (b, &y) in offsets.iter().enumerate() {
                    if x * x + y * y <= r2 {
                        anchors.push((a, b));
                    }
                }
            }
        }
        Ok(TubeGrid {
            dim: d,
            directions,
            offsets,
            anchors,
        })
    }

    pub fn direction_count(&self) -> usize {
        self.directions.len()
    }

    /// Number of offsets per direction (disk-restricted in space).
    pub fn offset_count(&self) -> usize {
        match self.dim {
            2 => self.offsets.len(),
            _ => self.anchors.len(),
        }
    }

    /// The tube with grid indices `(direction, offset)`.
    pub fn tube(&self, dir: usize, offset: usize) -> Tube<T> {
        let [u, e1, e2] = &self.directions[dir];
        let anchor = match self.dim {
            2 => e1.iter().map(|&x| x * self.offsets[offset]).collect(),
            _ => {
                let (a, b) = self.anchors[offset];
                let (oa, ob) = (self.offsets[a], self.offsets[b]);
                e1.iter().zip(e2).map(|(&x, &y)| x * oa + y * ob).collect()
            }
        };
        Tube {
            direction: u.clone(),
            anchor,
        }
    }

    /// Center-indicator occupancy of every grid tube in direction `dir`,
    /// indexed like [`Self::tube`].
    pub fn sweep(&self, dir: usize, points: &[(Vec<T>, T)]) -> Vec<T> {
        let [_, e1, e2] = &self.directions[dir];
        let h = self.offsets.get(1).map(|&o| o - self.offsets[0]).unwrap_or(T::one());
        let o0 = self.offsets[0];
        let last = self.offsets.len() as i64 - 1;
        let lim = T::lit(TUBE_RADIUS + TUBE_SLACK);
        let window = |s: T| -> (usize, usize) {
            let lo = ((s - lim - o0) / h).floor().to_i64().unwrap_or(0) - 1;
            let hi = ((s + lim - o0) / h).ceil().to_i64().unwrap_or(0) + 1;
            (lo.clamp(0, last.max(0)) as usize, hi.clamp(0, last.max(0)) as usize)
        };
        match self.dim {
            2 => {
                let mut acc = vec![T::zero(); self.offsets.len()];
                for (p, mass) in points {
                    let s = dot(p, e1);
                    let (lo, hi) = window(s);
                    for (j, a) in acc.iter_mut().enumerate().take(hi + 1).skip(lo) {
                        if (s - self.offsets[j]).abs() <= lim {
                            *a += *mass;
                        }
                    }
                }
                acc
            }
            _ => {
                let n = self.offsets.len();
                let mut grid = vec![T::zero(); n * n];
                for (p, mass) in points {
                    let (s1, s2) = (dot(p, e1), dot(p, e2));
                    let (lo1, hi1) = window(s1);
                    let (lo2, hi2) = window(s2);
                    for a in lo1..=hi1 {
                        let da = s1 - self.offsets[a];
                        for b in lo2..=hi2 {
                            let db = s2 - self.offsets[b];
                            if (da * da + db * db).sqrt() <= lim {
                                grid[a * n + b] += *mass;
                            }
                        }
                    }
                }
                self.anchors.iter().map(|&(a, b)| grid[a * n + b]).collect()
            }
        }
    }
}

/// Unit vectors `e1, e2` completing `u` to an orthonormal basis of `ℝ³`.
fn orthonormal_complement<T: Scalar>(u: &[T]) -> (Vec<T>, Vec<T>) {
    let pick = if u[0].abs() < T::lit(0.9) {
        [T::one(), T::zero(), T::zero()]
    } else {
        [T::zero(), T::one(), T::zero()]
    };
    let t = dot(&pick, u);
    let mut e1: Vec<T> = pick.iter().zip(u).map(|(&a, &b)| a - t * b).collect();
    let n = norm(&e1);
    e1.iter_mut().for_each(|x| *x = *x / n);
    let e2 = vec![
        u[1] * e1[2] - u[2] * e1[1],
        u[2] * e1[0] - u[0] * e1[2],
        u[0] * e1[1] - u[1] * e1[0],
    ];
    (e1, e2)
}

/// Grid search for `sup_T w(T)` followed by local refinement of the best
/// tube. Ties resolve to the smallest `(direction, offset)` index.
pub fn tube_sup<T: Scalar>(weight: &Weight<T>, spec: &SearchSpec) -> Result<TubeSup<T>> {
    spec.validate()?;
    let cover = weight.cover();
    let d = cover.dim();
    let radius = cover.radius();
    let step = spec.angular_step(radius.to_f64_lossy());
    let grid = TubeGrid::new(d, radius, step, spec.offset_spacing)?;
    let eval = OccupancyEvaluator::new(weight);

    let points: Vec<(Vec<T>, T)> = weight
        .iter()
        .map(|(k, m)| (cover.center(k).to_vec(), T::lit(f64::from(m)) * cover.cell_volume()))
        .collect();

    // per direction: (best value, best offset)
    let per_dir: Vec<(T, usize)> = (0..grid.direction_count())
        .into_par_iter()
        .map(|i| {
            let values = match spec.method {
                OccupancyMethod::CenterIndicator => grid.sweep(i, &points),
                OccupancyMethod::VolumeFraction => (0..grid.offset_count())
                    .map(|j| eval.occupancy(&grid.tube(i, j), spec.method))
                    .collect(),
            };
            first_max(&values)
        })
        .collect();
    let best_dir = first_max(&per_dir.iter().map(|p| p.0).collect::<Vec<_>>()).1;
    let (grid_value, best_off) = per_dir[best_dir];
    let mut best = grid.tube(best_dir, best_off);
    let mut value = grid_value;

    let h = T::lit(spec.offset_spacing);
    let step_t = T::lit(step);
    for round in 1..=spec.refinement_rounds {
        let scale = T::lit(0.5_f64.powi(round as i32));
        let (dt, dh) = (step_t * scale, h * scale);
        let incumbent = best.clone();
        for cand in neighbours(&incumbent, dt, dh) {
            let v = eval.occupancy(&cand, spec.method);
            if v > value {
                value = v;
                best = cand;
            }
        }
    }

    Ok(TubeSup {
        value,
        tube: best,
        grid_value,
        resolution: Resolution {
            angular_step: step,
            offset_spacing: spec.offset_spacing,
            directions: grid.direction_count(),
            offsets: grid.offset_count(),
            refinement_rounds: spec.refinement_rounds,
        },
    })
}

fn first_max<T: Scalar>(values: &[T]) -> (T, usize) {
    let mut best = (T::neg_infinity(), 0);
    for (i, &v) in values.iter().enumerate() {
        if v > best.0 {
            best = (v, i);
        }
    }
    if values.is_empty() {
        (T::zero(), 0)
    } else {
        best
    }
}

/// Tubes obtained by tilting the axis by `±dt` and shifting it by `±dh`
/// along each orthogonal direction.
fn neighbours<T: Scalar>(tube: &Tube<T>, dt: T, dh: T) -> Vec<Tube<T>> {
    let u = &tube.direction;
    let steps = [-T::one(), T::zero(), T::one()];
    let mut out = Vec::new();
    if u.len() == 2 {
        let n = [-u[1], u[0]];
        let theta = u[1].atan2(u[0]);
        for &a in &steps {
            let (s, c) = (theta + a * dt).sin_cos();
            for &b in &steps {
                let p: Vec<T> = tube.anchor.iter().zip(&n).map(|(&x, &e)| x + b * dh * e).collect();
                if let Ok(t) = Tube::new(&[c, s], &p) {
                    out.push(t);
                }
            }
        }
    } else {
        let (e1, e2) = orthonormal_complement(u);
        for &a in &steps {
            for &b in &steps {
                let dir: Vec<T> = (0..3).map(|i| u[i] + a * dt * e1[i] + b * dt * e2[i]).collect();
                for &c in &steps {
                    for &e in &steps {
                        let p: Vec<T> = (0..3)
                            .map(|i| tube.anchor[i] + c * dh * e1[i] + e * dh * e2[i])
                            .collect();
                        if let Ok(t) = Tube::new(&dir, &p) {
                            out.push(t);
                        }
                    }
                }
            }
        }
    }
    out
}

/// Median of a sample (mean of the two central values for even counts).
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("median of NaN"));
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}
