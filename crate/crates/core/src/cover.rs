//! Unit-scale cell covers of the ball `B_R` and the exact Fourier transform of
//! a single cell.
//!
//! Cells sit on the integer lattice. Cubes have side 1 and tile space; balls
//! have radius 1/2 so neighbouring cells touch without overlapping.

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::scalar::{cis, dot, Scalar};
use crate::special::{bessel_j1_over_x, sinc_pi, spherical_j1_over_x};
use num_complex::Complex;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CellGeometry {
    #[default]
    Cube,
    Ball,
}

impl CellGeometry {
    pub fn as_str(self) -> &'static str {
        match self {
            CellGeometry::Cube => "cube",
            CellGeometry::Ball => "ball",
        }
    }

    /// Lebesgue measure of one cell.
    pub fn cell_volume<T: Scalar>(self, d: usize) -> T {
        match self {
            CellGeometry::Cube => T::one(),
            CellGeometry::Ball => unit_ball_volume::<T>(d) * T::lit(0.5).powi(d as i32),
        }
    }
}

pub const BALL_CELL_RADIUS: f64 = 0.5;

/// Volume of the unit ball in `ℝ^d` for `d ∈ {1, 2, 3}`.
pub fn unit_ball_volume<T: Scalar>(d: usize) -> T {
    match d {
        1 => T::lit(2.0),
        2 => T::PI(),
        3 => T::lit(4.0) * T::PI() / T::lit(3.0),
        _ => panic!("unit_ball_volume only implemented for d <= 3"),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoverSpec {
    #[serde(rename = "R")]
    pub radius: f64,
    pub d: usize,
    #[serde(default)]
    pub geometry: CellGeometry,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellCover<T> {
    radius: T,
    dim: usize,
    geometry: CellGeometry,
    lattice: Vec<i32>,
    centers: Vec<T>,
    cell_volume: T,
}

impl<T: Scalar> CellCover<T> {
    pub fn build(radius: T, d: usize, geometry: CellGeometry) -> Result<Self> {
        build_cover(radius, d, geometry)
    }

    pub fn from_spec(spec: &CoverSpec) -> Result<Self> {
        build_cover(T::lit(spec.radius), spec.d, spec.geometry)
    }

    pub fn radius(&self) -> T {
        self.radius
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn geometry(&self) -> CellGeometry {
        self.geometry
    }

    pub fn cell_volume(&self) -> T {
        self.cell_volume
    }

    pub fn len(&self) -> usize {
        self.lattice.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.lattice.is_empty()
    }

    pub fn center(&self, k: usize) -> &[T] {
        &self.centers[k * self.dim..(k + 1) * self.dim]
    }

    pub fn lattice_point(&self, k: usize) -> &[i32] {
        &self.lattice[k * self.dim..(k + 1) * self.dim]
    }

    pub fn centers(&self) -> impl ExactSizeIterator<Item = &[T]> + '_ {
        self.centers.chunks_exact(self.dim)
    }

    /// Index of the lattice point `p`, if it is a center of this cover.
    pub fn index_of(&self, p: &[i32]) -> Option<usize> {
        // centers are stored in lexicographic order
        let n = self.len();
        let (mut lo, mut hi) = (0, n);
        while lo < hi {
            let mid = (lo + hi) / 2;
            match self.lattice_point(mid).cmp(p) {
                std::cmp::Ordering::Less => lo = mid + 1,
                std::cmp::Ordering::Greater => hi = mid,
                std::cmp::Ordering::Equal => return Some(mid),
            }
        }
        None
    }

    pub fn spec(&self) -> CoverSpec {
        CoverSpec {
            radius: self.radius.to_f64_lossy(),
            d: self.dim,
            geometry: self.geometry,
        }
    }

    /// `∫_{cell k} e^{2πiξ·x} dx = e^{2πiξ·c_k} F(ξ)`.
    pub fn cell_integral(&self, k: usize, xi: &[T]) -> Complex<T> {
        let phase = T::two_pi() * dot(xi, self.center(k));
        cis(phase) * cell_fourier(self.geometry, self.dim, xi)
    }
}

/// All integer lattice points `c` with `|c| ≤ R`, in lexicographic order.
pub fn build_cover<T: Scalar>(radius: T, d: usize, geometry: CellGeometry) -> Result<CellCover<T>> {
    if !(radius >= T::one()) {
        return Err(LabError::config(format!("cover radius must be >= 1, got {radius}")));
    }
    if !(d == 2 || d == 3) {
        return Err(LabError::config(format!("cover dimension must be 2 or 3, got {d}")));
    }
    let r = radius.to_f64_lossy();
    let r2 = r * r;
    let bound = r.floor() as i32;
    let mut lattice = Vec::new();
    let mut point = vec![-bound; d];
    loop {
        let sq: i64 = point.iter().map(|&x| i64::from(x) * i64::from(x)).sum();
        if (sq as f64) <= r2 {
            lattice.extend_from_slice(&point);
        }
        // odometer increment, last coordinate fastest
        let mut i = d;
        loop {
            if i == 0 {
                let centers = lattice.iter().map(|&x| T::lit(f64::from(x))).collect();
                return Ok(CellCover {
                    radius,
                    dim: d,
                    geometry,
                    lattice,
                    centers,
                    cell_volume: geometry.cell_volume(d),
                });
            }
            i -= 1;
            if point[i] < bound {
                point[i] += 1;
                break;
            }
            point[i] = -bound;
        }
    }
}

/// Fourier transform of the cell centered at the origin,
/// `F(ξ) = ∫_cell e^{2πiξ·x} dx`. Real and even for both geometries.
pub fn cell_fourier<T: Scalar>(geometry: CellGeometry, d: usize, xi: &[T]) -> T {
    debug_assert_eq!(xi.len(), d);
    match geometry {
        CellGeometry::Cube => xi.iter().map(|&x| sinc_pi(x)).fold(T::one(), |a, b| a * b),
        CellGeometry::Ball => {
            let rho = T::lit(BALL_CELL_RADIUS);
            let r = xi.iter().map(|&x| x * x).sum::<T>().sqrt();
            let a = T::two_pi() * rho * r;
            match d {
                // 2πρ² J₁(a)/a
                2 => T::two_pi() * rho * rho * bessel_j1_over_x(a),
                // 4πρ³ (sin a − a cos a)/a³
                3 => T::lit(4.0) * T::PI() * rho * rho * rho * spherical_j1_over_x(a),
                _ => panic!("ball cells only implemented for d in {{2, 3}}"),
            }
        }
    }
}
