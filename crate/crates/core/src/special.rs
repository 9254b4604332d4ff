//! Special functions needed by the cell Fourier transforms.

use crate::scalar::Scalar;

/// `sin(πx)/(πx)`, with value 1 at the origin.
pub fn sinc_pi<T: Scalar>(x: T) -> T {
    let px = T::PI() * x;
    if px.abs() < T::lit(1e-4) {
        // Taylor: 1 - (πx)²/6 + (πx)⁴/120
        let p2 = px * px;
        T::one() - p2 / T::lit(6.0) + p2 * p2 / T::lit(120.0)
    } else {
        px.sin() / px
    }
}

/// Bessel function of the first kind, order one.
///
/// Uses `J₁(x) = (1/π) ∫₀^π cos(τ − x sin τ) dτ`; the integrand extends to a
/// smooth periodic even function, so the trapezoid rule converges
/// geometrically once the node count exceeds `|x|` by a margin.
pub fn bessel_j1<T: Scalar>(x: T) -> T {
    let ax = x.abs().to_f64_lossy();
    let n = 40 + 2 * ax.ceil() as usize;
    let h = T::PI() / T::from_usize_lossy(n);
    let f = |tau: T| (tau - x * tau.sin()).cos();
    let mut s = (f(T::zero()) + f(T::PI())) * T::lit(0.5);
    for i in 1..n {
        s += f(h * T::from_usize_lossy(i));
    }
    s * h / T::PI()
}

/// `J₁(a)/a`, continuous at `a = 0` with value `1/2`.
pub fn bessel_j1_over_x<T: Scalar>(a: T) -> T {
    if a.abs() < T::lit(1e-2) {
        // 1/2 − a²/16 + a⁴/384 − a⁶/18432
        let a2 = a * a;
        T::lit(0.5) - a2 / T::lit(16.0) + a2 * a2 / T::lit(384.0) - a2 * a2 * a2 / T::lit(18432.0)
    } else {
        bessel_j1(a) / a
    }
}

/// `(sin a − a cos a)/a³`, continuous at `a = 0` with value `1/3`.
pub fn spherical_j1_over_x<T: Scalar>(a: T) -> T {
    if a.abs() < T::lit(1e-2) {
        let a2 = a * a;
        // 1/3 − a²/30 + a⁴/840 − a⁶/45360
        T::one() / T::lit(3.0) - a2 / T::lit(30.0) + a2 * a2 / T::lit(840.0)
            - a2 * a2 * a2 / T::lit(45360.0)
    } else {
        let (s, c) = a.sin_cos();
        (s - a * c) / (a * a * a)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Power series `Σ (-1)^k (x/2)^{2k+1} / (k!(k+1)!)`.
    fn j1_series(x: f64) -> f64 {
        let mut term = x / 2.0;
        let mut sum = term;
        for k in 1..60 {
            term *= -(x * x / 4.0) / (k as f64 * (k + 1) as f64);
            sum += term;
        }
        sum
    }

    #[test]
    fn j1_matches_series() {
        for i in 0..=80 {
            let x = i as f64 * 0.1;
            assert!((bessel_j1(x) - j1_series(x)).abs() < 1e-13, "x = {x}");
        }
    }

    #[test]
    fn j1_known_values() {
        // first positive zero and a tabulated value
        assert!(bessel_j1(3.831_705_970_207_512_f64).abs() < 1e-14);
        assert!((bessel_j1(1.0_f64) - 0.440_050_585_744_933_5).abs() < 1e-15);
        assert!((bessel_j1(-1.0_f64) + 0.440_050_585_744_933_5).abs() < 1e-15);
        // large argument: J1(50)
        assert!((bessel_j1(50.0_f64) - (-0.097_511_828_125_175_1)).abs() < 1e-13);
    }

    #[test]
    fn small_argument_branches_are_continuous() {
        for &a in &[1e-7_f64, 9e-7, 1.1e-6, 9e-3, 1.1e-2] {
            let direct_cyl = j1_series(a) / a;
            assert!((bessel_j1_over_x(a) - direct_cyl).abs() < 1e-12);
            let direct_sph = (a.sin() - a * a.cos()) / (a * a * a);
            if a > 1e-3 {
                assert!((spherical_j1_over_x(a) - direct_sph).abs() < 1e-8);
            }
        }
        assert!((sinc_pi(1e-5_f64) - (std::f64::consts::PI * 1e-5).sin() / (std::f64::consts::PI * 1e-5)).abs() < 1e-15);
        assert_eq!(sinc_pi(0.0_f64), 1.0);
        assert!(sinc_pi(1.0_f64).abs() < 1e-15);
    }
}
