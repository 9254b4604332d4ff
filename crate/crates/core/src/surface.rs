//! Quadrature rules for compact hypersurfaces inside the closed unit ball.
//!
//! A rule stands in for `L²(Σ, dσ)`: a density `g` is its vector of values at
//! the nodes and `∫_Σ f dσ ≈ Σ_j σ_j f(ω_j)`.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::scalar::{norm, Scalar};

pub const MIN_NODES: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SurfaceKind {
    Circle,
    Sphere,
    ParaboloidCap,
    PlanarCap,
}

impl SurfaceKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SurfaceKind::Circle => "circle",
            SurfaceKind::Sphere => "sphere",
            SurfaceKind::ParaboloidCap => "paraboloid-cap",
            SurfaceKind::PlanarCap => "planar-cap",
        }
    }
}

/// Surface section of an experiment config. `M` falls back to
/// [`default_node_count`] when omitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurfaceSpec {
    pub kind: SurfaceKind,
    pub d: usize,
    #[serde(rename = "M", default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
}

impl SurfaceSpec {
    pub fn node_count(&self, radius: f64) -> usize {
        self.m.unwrap_or_else(|| default_node_count(self.d, radius))
    }
}

/// `⌈16R⌉` nodes in the plane, `⌈8R²⌉` in space: node spacing of order `1/R`
/// resolves `e^{2πiω·x}` on `|x| ≤ R`.
pub fn default_node_count(d: usize, radius: f64) -> usize {
    let m = if d == 2 {
        (16.0 * radius).ceil()
    } else {
        (8.0 * radius * radius).ceil()
    };
    (m as usize).max(MIN_NODES)
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule<T> {
    dim: usize,
    kind: SurfaceKind,
    nodes: Vec<T>,
    weights: Vec<T>,
}

impl<T: Scalar> QuadratureRule<T> {
    pub fn build(kind: SurfaceKind, d: usize, m: usize) -> Result<Self> {
        build_surface(kind, d, m)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> SurfaceKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn node(&self, j: usize) -> &[T] {
        &self.nodes[j * self.dim..(j + 1) * self.dim]
    }

    pub fn nodes(&self) -> impl ExactSizeIterator<Item = &[T]> + '_ {
        self.nodes.chunks_exact(self.dim)
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn total_measure(&self) -> T {
        self.weights.iter().copied().sum()
    }

    pub(crate) fn check_len(&self, len: usize) -> Result<()> {
        if len != self.len() {
            return Err(LabError::Dimension {
                expected: self.len(),
                got: len,
            });
        }
        Ok(())
    }

    /// Coefficients `u_j = √σ_j g_j`, in which the `L²(Σ)` norm is Euclidean.
    pub fn to_orthonormal(&self, g: &[Complex<T>]) -> Result<Vec<Complex<T>>> {
        self.check_len(g.len())?;
        Ok(g.iter()
            .zip(&self.weights)
            .map(|(gj, &s)| gj * s.sqrt())
            .collect())
    }

    /// Inverse of [`Self::to_orthonormal`].
    pub fn from_orthonormal(&self, u: &[Complex<T>]) -> Result<Vec<Complex<T>>> {
        self.check_len(u.len())?;
        Ok(u.iter()
            .zip(&self.weights)
            .map(|(uj, &s)| uj / s.sqrt())
            .collect())
    }
}

/// Discretize the surface `kind` in dimension `d` with (at least) `m` nodes.
///
/// Tensor-grid caps use `⌈m^{1/(d-1)}⌉` points per axis, so for `d = 3` the
/// rule may hold slightly more than `m` nodes.
pub fn build_surface<T: Scalar>(kind: SurfaceKind, d: usize, m: usize) -> Result<QuadratureRule<T>> {
    if !(d == 2 || d == 3) {
        return Err(LabError::config(format!("surface dimension must be 2 or 3, got {d}")));
    }
    match (kind, d) {
        (SurfaceKind::Circle, 3) => {
            return Err(LabError::config("circle surface requires d = 2"));
        }
        (SurfaceKind::Sphere, 2) => {
            return Err(LabError::config("sphere surface requires d = 3"));
        }
        _ => {}
    }
    if m < MIN_NODES {
        return Err(LabError::config(format!(
            "surface needs at least {MIN_NODES} nodes, got {m}"
        )));
    }

    let (mut nodes, weights) = match kind {
        SurfaceKind::Circle => circle(m),
        SurfaceKind::Sphere => fibonacci_sphere(m),
        SurfaceKind::ParaboloidCap => graph_cap(d, m, true),
        SurfaceKind::PlanarCap => graph_cap(d, m, false),
    };
    for p in nodes.chunks_exact_mut(d) {
        confine_to_unit_ball(p);
    }
    Ok(QuadratureRule {
        dim: d,
        kind,
        nodes,
        weights,
    })
}

fn confine_to_unit_ball<T: Scalar>(p: &mut [T]) {
    let mut r = norm(p);
    while r > T::one() {
        let shrink = T::one() / r;
        for x in p.iter_mut() {
            *x = *x * shrink * (T::one() - T::epsilon());
        }
        r = norm(p);
    }
}

fn circle<T: Scalar>(m: usize) -> (Vec<T>, Vec<T>) {
    let step = T::two_pi() / T::from_usize_lossy(m);
    let mut nodes = Vec::with_capacity(2 * m);
    for j in 0..m {
        let (s, c) = (step * T::from_usize_lossy(j)).sin_cos();
        nodes.push(c);
        nodes.push(s);
    }
    (nodes, vec![step; m])
}

fn fibonacci_sphere<T: Scalar>(m: usize) -> (Vec<T>, Vec<T>) {
    let golden_angle = T::PI() * (T::lit(3.0) - T::lit(5.0).sqrt());
    let mf = T::from_usize_lossy(m);
    let mut nodes = Vec::with_capacity(3 * m);
    for j in 0..m {
        let jf = T::from_usize_lossy(j);
        let z = T::one() - (T::lit(2.0) * jf + T::one()) / mf;
        let r = (T::one() - z * z).max(T::zero()).sqrt();
        let (s, c) = (golden_angle * jf).sin_cos();
        nodes.extend_from_slice(&[r * c, r * s, z]);
    }
    let w = T::lit(4.0) * T::PI() / mf;
    (nodes, vec![w; m])
}

/// Graph of `φ(ω') = |ω'|²/2` (or `φ ≡ 0`) over `[-1/2, 1/2]^{d-1}`, midpoint
/// tensor grid.
fn graph_cap<T: Scalar>(d: usize, m: usize, curved: bool) -> (Vec<T>, Vec<T>) {
    let per_axis = if d == 2 {
        m
    } else {
        let mut n = (m as f64).sqrt().floor() as usize;
        while n * n < m {
            n += 1;
        }
        n
    };
    let h = T::one() / T::from_usize_lossy(per_axis);
    let half = T::lit(0.5);
    let coord = |i: usize| -half + (T::from_usize_lossy(i) + half) * h;
    let cell = if d == 2 { h } else { h * h };

    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    let mut push = |base: &[T]| {
        let r2: T = base.iter().map(|&x| x * x).sum();
        let (height, jac) = if curved {
            (r2 * half, (T::one() + r2).sqrt())
        } else {
            (T::zero(), T::one())
        };
        nodes.extend_from_slice(base);
        nodes.push(height);
        weights.push(cell * jac);
    };
    if d == 2 {
        for i in 0..per_axis {
            push(&[coord(i)]);
        }
    } else {
        for i in 0..per_axis {
            for k in 0..per_axis {
                push(&[coord(i), coord(k)]);
            }
        }
    }
    (nodes, weights)
}

/// `(Σ_j σ_j |g_j|²)^{1/2}`.
pub fn surface_l2_norm<T: Scalar>(rule: &QuadratureRule<T>, g: &[Complex<T>]) -> Result<T> {
    rule.check_len(g.len())?;
    Ok(g.iter()
        .zip(rule.weights())
        .map(|(gj, &s)| s * gj.norm_sqr())
        .sum::<T>()
        .sqrt())
}
