//! The extension operator `Eg(x) = ∫_Σ e^{2πiω·x} g(ω) dσ(ω)` on a quadrature
//! rule, and the weighted Gram operator of a unit-cell weight.
//!
//! For `w = Σ_k m_k 1_{α_k}` and coefficients `u_j = √σ_j g_j`,
//!
//! ```text
//! ∫ w |Eg|² = u* A u,   A_jl = √(σ_j σ_l) F(ω_j − ω_l) Σ_k m_k e^{2πi(ω_l − ω_j)·c_k}
//! ```
//!
//! where `F` is the cell Fourier transform. The supremum over `‖g‖_{L²(Σ)} ≤ 1`
//! is therefore `λ_max(A)`.

use std::io::{Read, Write};

use num_complex::Complex;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cover::{cell_fourier, CellCover};
use crate::error::{LabError, Result};
use crate::hermitian::HermitianMatrix;
use crate::scalar::{cis, dot, norm, Scalar};
use crate::surface::QuadratureRule;
use crate::weights::{ModelTag, Weight};

/// `Σ_j σ_j g_j e^{2πiω_j·x}`.
pub fn evaluate_extension<T: Scalar>(
    rule: &QuadratureRule<T>,
    g: &[Complex<T>],
    x: &[T],
) -> Result<Complex<T>> {
    rule.check_len(g.len())?;
    if x.len() != rule.dim() {
        return Err(LabError::Dimension {
            expected: rule.dim(),
            got: x.len(),
        });
    }
    Ok(extension_unchecked(rule, g, x))
}

fn extension_unchecked<T: Scalar>(rule: &QuadratureRule<T>, g: &[Complex<T>], x: &[T]) -> Complex<T> {
    rule.nodes()
        .zip(rule.weights())
        .zip(g)
        .fold(Complex::new(T::zero(), T::zero()), |acc, ((w, &s), gj)| {
            acc + gj * cis(T::two_pi() * dot(w, x)) * s
        })
}

/// Where a Gram matrix came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GramProvenance {
    pub surface: String,
    pub nodes: usize,
    pub model: ModelTag,
    pub seed: Option<u64>,
    pub support: usize,
}

#[derive(Debug, Clone)]
pub struct GramMatrix<T> {
    pub matrix: HermitianMatrix<T>,
    pub dim: usize,
    pub provenance: GramProvenance,
}

impl<T: Scalar> GramMatrix<T> {
    pub fn size(&self) -> usize {
        self.matrix.size()
    }
}

/// Assemble the weighted Gram matrix of `weight` on `rule`.
///
/// Cost is `O(M² · |support|)`; rows are computed independently in parallel.
pub fn assemble_gram<T: Scalar>(rule: &QuadratureRule<T>, weight: &Weight<T>) -> Result<GramMatrix<T>> {
    let cover = weight.cover();
    let d = rule.dim();
    if cover.dim() != d {
        return Err(LabError::config(format!(
            "surface lives in dimension {d} but the cover in dimension {}",
            cover.dim()
        )));
    }
    let m = rule.len();
    let support: Vec<(usize, T)> = weight
        .iter()
        .map(|(k, mult)| (k, T::lit(f64::from(mult))))
        .collect();
    let s = support.len();

    // phases[j * s + t] = e^{2πi ω_j · c_{k_t}}
    let mut phases = vec![Complex::new(T::zero(), T::zero()); m * s];
    phases.par_chunks_mut(s.max(1)).enumerate().for_each(|(j, row)| {
        if s == 0 {
            return;
        }
        let w = rule.node(j);
        for (p, &(k, _)) in row.iter_mut().zip(&support) {
            *p = cis(T::two_pi() * dot(w, cover.center(k)));
        }
    });

    let sqrt_w: Vec<T> = rule.weights().iter().map(|s| s.sqrt()).collect();
    let geometry = cover.geometry();
    let total_mult: T = support.iter().map(|&(_, m)| m).sum();
    let f0 = cover.cell_volume();

    let mut data = vec![Complex::new(T::zero(), T::zero()); m * m];
    data.par_chunks_mut(m).enumerate().for_each(|(j, row)| {
        let pj = &phases[j * s..(j + 1) * s];
        let wj = rule.node(j);
        row[j] = Complex::new(sqrt_w[j] * sqrt_w[j] * total_mult * f0, T::zero());
        let mut diff = vec![T::zero(); d];
        for l in (j + 1)..m {
            let pl = &phases[l * s..(l + 1) * s];
            let mut acc = Complex::new(T::zero(), T::zero());
            for ((a, b), &(_, mult)) in pj.iter().zip(pl).zip(&support) {
                acc += a.conj() * b * mult;
            }
            for (dx, (a, b)) in diff.iter_mut().zip(wj.iter().zip(rule.node(l))) {
                *dx = *a - *b;
            }
            let f = cell_fourier(geometry, d, &diff);
            row[l] = acc * (sqrt_w[j] * sqrt_w[l] * f);
        }
    });

    Ok(GramMatrix {
        matrix: HermitianMatrix::from_upper(m, data)?,
        dim: d,
        provenance: GramProvenance {
            surface: rule.kind().as_str().to_owned(),
            nodes: m,
            model: weight.model(),
            seed: weight.seed(),
            support: s,
        },
    })
}

/// `∫ w |Eg|²` through the Gram matrix.
pub fn weighted_energy<T: Scalar>(gram: &GramMatrix<T>, rule: &QuadratureRule<T>, g: &[Complex<T>]) -> Result<T> {
    let u = rule.to_orthonormal(g)?;
    if u.len() != gram.size() {
        return Err(LabError::Dimension {
            expected: gram.size(),
            got: u.len(),
        });
    }
    Ok(gram.matrix.quadratic_form(&u))
}

/// Which oscillatory kernel the `‖·‖∼` seminorm integrates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SeminormKernel {
    /// `e^{2πiω·x}`
    #[default]
    Complex,
    /// `cos(2πω·x)`
    Cosine,
}

/// Linear map `g ↦ (∫_{α_k} Eg)_k` over every cell of a cover.
#[derive(Debug, Clone)]
pub struct CellIntegralMap<T> {
    cells: usize,
    nodes: usize,
    // kernel[k * nodes + j] = σ_j e^{2πiω_j·c_k} F(ω_j)
    kernel: Vec<Complex<T>>,
}

impl<T: Scalar> CellIntegralMap<T> {
    pub fn new(rule: &QuadratureRule<T>, cover: &CellCover<T>, kind: SeminormKernel) -> Result<Self> {
        let d = rule.dim();
        if cover.dim() != d {
            return Err(LabError::config(format!(
                "surface lives in dimension {d} but the cover in dimension {}",
                cover.dim()
            )));
        }
        let m = rule.len();
        let n = cover.len();
        let transforms: Vec<T> = rule
            .nodes()
            .zip(rule.weights())
            .map(|(w, &s)| s * cell_fourier(cover.geometry(), d, w))
            .collect();
        let mut kernel = vec![Complex::new(T::zero(), T::zero()); n * m];
        kernel.par_chunks_mut(m).enumerate().for_each(|(k, row)| {
            let c = cover.center(k);
            for (j, (entry, &t)) in row.iter_mut().zip(&transforms).enumerate() {
                let phase = T::two_pi() * dot(rule.node(j), c);
                *entry = match kind {
                    SeminormKernel::Complex => cis(phase) * t,
                    SeminormKernel::Cosine => Complex::new(phase.cos() * t, T::zero()),
                };
            }
        });
        Ok(CellIntegralMap {
            cells: n,
            nodes: m,
            kernel,
        })
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn apply(&self, g: &[Complex<T>]) -> Result<Vec<Complex<T>>> {
        if g.len() != self.nodes {
            return Err(LabError::Dimension {
                expected: self.nodes,
                got: g.len(),
            });
        }
        Ok(self
            .kernel
            .chunks_exact(self.nodes)
            .map(|row| {
                row.iter()
                    .zip(g)
                    .fold(Complex::new(T::zero(), T::zero()), |acc, (a, b)| acc + a * b)
            })
            .collect())
    }

    /// `max_k |∫_{α_k} Eg|`.
    pub fn seminorm(&self, g: &[Complex<T>]) -> Result<T> {
        Ok(sup_abs(&self.apply(g)?))
    }
}

/// Sup norm of a vector of cell integrals; by linearity
/// `‖g − h‖∼ = sup_abs(I(g) − I(h))`.
pub fn sup_abs<T: Scalar>(v: &[Complex<T>]) -> T {
    v.iter().map(|z| z.norm()).fold(T::zero(), T::max)
}

/// `‖g‖∼ = max_k |∫_{α_k} Eg(x) dx|` over all cells of `cover`.
pub fn seminorm_tilde<T: Scalar>(
    rule: &QuadratureRule<T>,
    cover: &CellCover<T>,
    g: &[Complex<T>],
    kind: SeminormKernel,
) -> Result<T> {
    rule.check_len(g.len())?;
    CellIntegralMap::new(rule, cover, kind)?.seminorm(g)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeparatedSum {
    pub lhs: f64,
    #[serde(rename = "rhsMain")]
    pub rhs_main: f64,
    pub ratio: f64,
}

/// Compare `Σ_j |Eg(x_j)|²` over an `R^{−ε}`-separated set in `B_R` with
/// `R^{εd} ∫_{B_{2R}} |Eg|²` (midpoint grid of spacing `min(1/4, R^{−ε}/2)`).
pub fn separated_sum_check<T: Scalar>(
    rule: &QuadratureRule<T>,
    points: &[Vec<T>],
    g: &[Complex<T>],
    radius: T,
    epsilon: T,
) -> Result<SeparatedSum> {
    rule.check_len(g.len())?;
    let d = rule.dim();
    let sep = radius.powf(-epsilon);
    let slack = T::lit(1e-12);
    for (i, p) in points.iter().enumerate() {
        if p.len() != d {
            return Err(LabError::Dimension { expected: d, got: p.len() });
        }
        if norm(p) > radius * (T::one() + slack) {
            return Err(LabError::Precondition(format!("point {i} lies outside B_R")));
        }
        for (k, q) in points.iter().enumerate().take(i) {
            let dist = p.iter().zip(q).map(|(a, b)| (*a - *b).powi(2)).sum::<T>().sqrt();
            if dist < sep * (T::one() - slack) {
                return Err(LabError::Precondition(format!(
                    "points {k} and {i} are {dist} apart, below the separation {sep}"
                )));
            }
        }
    }
    let lhs: T = points
        .iter()
        .map(|p| extension_unchecked(rule, g, p).norm_sqr())
        .sum();

    let h = T::lit(0.25).min(sep * T::lit(0.5));
    let outer = radius * T::lit(2.0);
    let energy = ball_energy(rule, g, outer, h);
    let rhs_main = radius.powf(epsilon * T::from_usize_lossy(d)) * energy;
    let ratio = if lhs == T::zero() { T::zero() } else { lhs / rhs_main };
    Ok(SeparatedSum {
        lhs: lhs.to_f64_lossy(),
        rhs_main: rhs_main.to_f64_lossy(),
        ratio: ratio.to_f64_lossy(),
    })
}

/// Midpoint-grid quadrature of `∫_{|x| ≤ radius} |Eg|²`.
pub fn ball_energy<T: Scalar>(rule: &QuadratureRule<T>, g: &[Complex<T>], radius: T, h: T) -> T {
    let d = rule.dim();
    let per_axis = (T::lit(2.0) * radius / h).ceil().to_usize().unwrap_or(0).max(1);
    let h = T::lit(2.0) * radius / T::from_usize_lossy(per_axis);
    let coord = |i: usize| -radius + (T::from_usize_lossy(i) + T::lit(0.5)) * h;
    let cell = h.powi(d as i32);
    let r2 = radius * radius;
    (0..per_axis)
        .into_par_iter()
        .map(|i| {
            let mut acc = T::zero();
            let x0 = coord(i);
            let mut p = vec![T::zero(); d];
            p[0] = x0;
            let inner = if d == 2 { 1 } else { per_axis };
            for a in 0..per_axis {
                p[1] = coord(a);
                for b in 0..inner {
                    if d == 3 {
                        p[2] = coord(b);
                    }
                    if p.iter().map(|&x| x * x).sum::<T>() <= r2 {
                        acc += extension_unchecked(rule, g, &p).norm_sqr();
                    }
                }
            }
            acc
        })
        .collect::<Vec<T>>()
        .into_iter()
        .sum::<T>()
        * cell
}

/// Greedily keep uniform random points of `B_R` that stay `separation` apart
/// from every point kept so far, until `count` are kept or `max_attempts`
/// candidates have been tried.
pub fn greedy_separated_points<T: Scalar, R: Rng + ?Sized>(
    radius: T,
    d: usize,
    separation: T,
    count: usize,
    max_attempts: usize,
    rng: &mut R,
) -> Vec<Vec<T>> {
    let r = radius.to_f64_lossy();
    let mut kept: Vec<Vec<T>> = Vec::with_capacity(count);
    for _ in 0..max_attempts {
        if kept.len() == count {
            break;
        }
        let cand: Vec<f64> = loop {
            let p: Vec<f64> = (0..d).map(|_| rng.random_range(-r..=r)).collect();
            if p.iter().map(|x| x * x).sum::<f64>() <= r * r {
                break p;
            }
        };
        let cand: Vec<T> = cand.into_iter().map(T::lit).collect();
        let ok = kept.iter().all(|q| {
            q.iter().zip(&cand).map(|(a, b)| (*a - *b).powi(2)).sum::<T>().sqrt() >= separation
        });
        if ok {
            kept.push(cand);
        }
    }
    kept
}

const GRAM_MAGIC: &[u8; 8] = b"MTGRAM01";

/// Binary dump: magic `MTGRAM01`, then little-endian `u64` fields
/// `M`, `d`, `seed`, then `M²` row-major `(re, im)` pairs as `f64`.
pub fn write_gram_binary<T: Scalar, W: Write>(gram: &GramMatrix<T>, seed: u64, out: &mut W) -> Result<()> {
    out.write_all(GRAM_MAGIC)?;
    out.write_all(&(gram.size() as u64).to_le_bytes())?;
    out.write_all(&(gram.dim as u64).to_le_bytes())?;
    out.write_all(&seed.to_le_bytes())?;
    for z in gram.matrix.as_slice() {
        out.write_all(&z.re.to_f64_lossy().to_le_bytes())?;
        out.write_all(&z.im.to_f64_lossy().to_le_bytes())?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct GramDump {
    pub size: usize,
    pub dim: usize,
    pub seed: u64,
    pub entries: Vec<Complex<f64>>,
}

pub fn read_gram_binary<R: Read>(input: &mut R) -> Result<GramDump> {
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic)?;
    if &magic != GRAM_MAGIC {
        return Err(LabError::config("not a Gram dump (bad magic)"));
    }
    let mut word = [0u8; 8];
    let mut next = |input: &mut R| -> Result<u64> {
        input.read_exact(&mut word)?;
        Ok(u64::from_le_bytes(word))
    };
    let size = next(input)? as usize;
    let dim = next(input)? as usize;
    let seed = next(input)?;
    let mut entries = Vec::with_capacity(size * size);
    for _ in 0..size * size {
        let re = f64::from_bits(next(input)?);
        let im = f64::from_bits(next(input)?);
        entries.push(Complex::new(re, im));
    }
    Ok(GramDump {
        size,
        dim,
        seed,
        entries,
    })
}
