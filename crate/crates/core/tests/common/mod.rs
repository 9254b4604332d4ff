//! Property checks shared by the `invariants` and `acceptance` targets.
//!
//! Each check drives a deterministic proptest runner and returns the first
//! counterexample as an error string.

#![allow(dead_code)]

use std::sync::Arc;

use num_complex::Complex;
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};

use mtlab::chaining::{covering_check, maurey_net, NetMode, PolytopeSpec};
use mtlab::cli::config::ExperimentConfig;
use mtlab::cli::pipeline::{run_experiment, RunFlags, Subcommand, MANIFEST};
use mtlab::cli::Manifest;
use mtlab::cover::{build_cover, cell_fourier, CellCover, CellGeometry, CoverSpec};
use mtlab::extension::{assemble_gram, GramMatrix};
use mtlab::hermitian::HermitianMatrix;
use mtlab::mtfunctional::{dense_top, mt_functional, run_trials, MtOptions, TrialPlan};
use mtlab::probbounds::{bennett_bound, bennett_exponent, selector_tail_bound, tail_study, TailSpec};
use mtlab::rng::rng_from_seed;
use mtlab::surface::{build_surface, surface_l2_norm, QuadratureRule, SurfaceKind, SurfaceSpec};
use mtlab::tubes::{tube_occupancy, tube_sup, OccupancyMethod, SearchSpec, TubeGrid};
use mtlab::weights::{sample_carbery_weight, weight_mass, ModelSpec, Weight};

pub type Check = fn() -> Result<(), String>;

pub fn runner(cases: u32) -> TestRunner {
    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
}

fn run<S: Strategy>(
    cases: u32,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<(), String> {
    runner(cases).run(&strategy, test).map_err(|e| e.to_string())
}

pub fn dense_eigenvalues(m: &HermitianMatrix<f64>) -> Vec<f64> {
    let n = m.size();
    let a = nalgebra::DMatrix::from_fn(n, n, |i, j| m.get(i, j));
    let mut ev: Vec<f64> = a.symmetric_eigen().eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    ev
}

pub fn selector_weight(cover: &Arc<CellCover<f64>>, delta: f64, seed: u64) -> Weight<f64> {
    let spec = ModelSpec::selector(delta * cover.radius(), 0.0);
    spec.sample(cover, seed, &mut rng_from_seed(seed)).unwrap()
}

pub fn random_density(m: usize, seed: u64) -> Vec<Complex<f64>> {
    use rand::Rng;
    let mut rng = rng_from_seed(seed);
    (0..m)
        .map(|_| Complex::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
        .collect()
}

fn kind_strategy() -> impl Strategy<Value = (SurfaceKind, usize)> {
    prop_oneof![
        Just((SurfaceKind::Circle, 2)),
        Just((SurfaceKind::Sphere, 3)),
        Just((SurfaceKind::ParaboloidCap, 2)),
        Just((SurfaceKind::ParaboloidCap, 3)),
        Just((SurfaceKind::PlanarCap, 2)),
        Just((SurfaceKind::PlanarCap, 3)),
    ]
}

// ---- surface ----

pub fn surface_norm_scaling() -> Result<(), String> {
    run(
        48,
        (kind_strategy(), 4usize..80, any::<u64>(), -5.0..5.0f64, -5.0..5.0f64),
        |((kind, d), m, seed, cre, cim)| {
            let rule = build_surface::<f64>(kind, d, m).unwrap();
            let g = random_density(rule.len(), seed);
            let c = Complex::new(cre, cim);
            let cg: Vec<_> = g.iter().map(|z| z * c).collect();
            let lhs = surface_l2_norm(&rule, &cg).unwrap();
            let rhs = c.norm() * surface_l2_norm(&rule, &g).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.max(1e-300), "{lhs} vs {rhs}");
            Ok(())
        },
    )
}

pub fn circle_measure_is_two_pi() -> Result<(), String> {
    run(64, 4usize..4000, |m| {
        let rule = build_surface::<f64>(SurfaceKind::Circle, 2, m).unwrap();
        let total: f64 = rule.weights().iter().sum();
        prop_assert!((total - std::f64::consts::TAU).abs() <= 1e-12, "M = {m}: {total}");
        Ok(())
    })
}

pub fn nodes_confined() -> Result<(), String> {
    run(64, (kind_strategy(), 4usize..600), |((kind, d), m)| {
        let rule = build_surface::<f64>(kind, d, m).unwrap();
        for node in rule.nodes() {
            let r = node.iter().map(|x| x * x).sum::<f64>().sqrt();
            prop_assert!(r <= 1.0, "{kind:?} d={d} M={m}: |ω| = {r}");
        }
        Ok(())
    })
}

// ---- cover ----

fn xi_strategy() -> impl Strategy<Value = (CellGeometry, Vec<f64>)> {
    (
        prop_oneof![Just(CellGeometry::Cube), Just(CellGeometry::Ball)],
        prop_oneof![
            prop::collection::vec(-20.0..20.0f64, 2),
            prop::collection::vec(-20.0..20.0f64, 3)
        ],
    )
}

pub fn cell_transform_bounded() -> Result<(), String> {
    run(256, xi_strategy(), |(geom, xi)| {
        let d = xi.len();
        let f: f64 = cell_fourier(geom, d, &xi);
        let vol: f64 = geom.cell_volume(d);
        prop_assert!(f.abs() <= vol * (1.0 + 1e-12), "{geom:?} {xi:?}: {f} > {vol}");
        Ok(())
    })
}

pub fn cell_transform_even() -> Result<(), String> {
    run(256, xi_strategy(), |(geom, xi)| {
        let neg: Vec<f64> = xi.iter().map(|x| -x).collect();
        let a: f64 = cell_fourier(geom, xi.len(), &xi);
        let b: f64 = cell_fourier(geom, xi.len(), &neg);
        prop_assert_eq!(a, b);
        Ok(())
    })
}

/// Midpoint rule on `n²` points over the unit cube at `c`, Richardson-extrapolated.
fn cube_integral(c: &[f64], xi: &[f64], n: usize) -> Complex<f64> {
    let mid = |n: usize| {
        let h = 1.0 / n as f64;
        let mut acc = Complex::new(0.0, 0.0);
        for a in 0..n {
            for b in 0..n {
                let x = [c[0] - 0.5 + (a as f64 + 0.5) * h, c[1] - 0.5 + (b as f64 + 0.5) * h];
                let ph = std::f64::consts::TAU * (xi[0] * x[0] + xi[1] * x[1]);
                acc += Complex::from_polar(1.0, ph);
            }
        }
        acc * (h * h)
    };
    (mid(2 * n) * 4.0 - mid(n)) / 3.0
}

pub fn translation_covariance() -> Result<(), String> {
    let cover = build_cover::<f64>(5.0, 2, CellGeometry::Cube).unwrap();
    run(
        24,
        (0..cover.len(), -2.0..2.0f64, -2.0..2.0f64),
        |(k, x0, x1)| {
            let xi = [x0, x1];
            let exact = cover.cell_integral(k, &xi);
            let quad = cube_integral(cover.center(k), &xi, 64);
            prop_assert!((exact - quad).norm() <= 1e-7, "cell {k}, ξ = {xi:?}: {exact} vs {quad}");
            Ok(())
        },
    )
}

// ---- weights ----

pub fn weight_reproducible() -> Result<(), String> {
    run(
        32,
        (4.0..16.0f64, any::<u64>(), 0.0..1.0f64, 0usize..3),
        |(r, seed, c, which)| {
            let cover = Arc::new(build_cover::<f64>(r, 2, CellGeometry::Cube).unwrap());
            let model = match which {
                0 => ModelSpec::selector(c * r, 0.0),
                1 => ModelSpec::carbery(None, true),
                _ => ModelSpec::carbery(None, false),
            };
            let a = model.sample(&cover, seed, &mut rng_from_seed(seed)).unwrap();
            let b = model.sample(&cover, seed, &mut rng_from_seed(seed)).unwrap();
            prop_assert_eq!(a.to_record(), b.to_record());
            Ok(())
        },
    )
}

pub fn selector_support_binomial() -> Result<(), String> {
    use statrs::distribution::{Binomial, ChiSquared, ContinuousCDF, Discrete};
    let cover = Arc::new(build_cover::<f64>(16.0, 2, CellGeometry::Cube).unwrap());
    let n = cover.len() as u64;
    let delta = 1.0 / 16.0;
    let samples = 1000;
    let mut counts = vec![0usize; n as usize + 1];
    for s in 0..samples {
        let w = selector_weight(&cover, delta, 0x5eed_0000 + s);
        counts[w.support_size()] += 1;
    }
    let binom = Binomial::new(delta, n).unwrap();
    // pool bins from both tails until each has expected count >= 5
    let mut bins: Vec<(f64, f64)> = Vec::new();
    let (mut e_acc, mut o_acc) = (0.0, 0.0);
    for (k, &obs) in counts.iter().enumerate() {
        e_acc += binom.pmf(k as u64) * samples as f64;
        o_acc += obs as f64;
        if e_acc >= 5.0 {
            bins.push((o_acc, e_acc));
            e_acc = 0.0;
            o_acc = 0.0;
        }
    }
    if let Some(last) = bins.last_mut() {
        last.0 += o_acc;
        last.1 += e_acc;
    }
    let stat: f64 = bins.iter().map(|(o, e)| (o - e) * (o - e) / e).sum();
    let dof = bins.len() as f64 - 1.0;
    let p = 1.0 - ChiSquared::new(dof).unwrap().cdf(stat);
    if p > 1e-3 {
        Ok(())
    } else {
        Err(format!("chi-square {stat:.3} on {dof} dof, p = {p:e}"))
    }
}

pub fn without_replacement_support() -> Result<(), String> {
    run(32, (4.0..20.0f64, any::<u64>(), 0.0..1.0f64), |(r, seed, frac)| {
        let cover = Arc::new(build_cover::<f64>(r, 2, CellGeometry::Cube).unwrap());
        let m = ((cover.len() as f64 * frac) as usize).max(1);
        let w = sample_carbery_weight(&cover, m, false, &mut rng_from_seed(seed)).unwrap();
        prop_assert_eq!(w.support_size(), m);
        prop_assert_eq!(w.max_multiplicity(), 1);
        Ok(())
    })
}

// ---- extension ----

fn small_gram_strategy() -> impl Strategy<Value = (f64, usize, f64, u64)> {
    (2.0..6.0f64, 8usize..=64, 0.05..1.0f64, any::<u64>())
}

fn gram_of(r: f64, m: usize, w: &Weight<f64>) -> (QuadratureRule<f64>, GramMatrix<f64>) {
    let _ = r;
    let rule = build_surface::<f64>(SurfaceKind::Circle, 2, m).unwrap();
    let g = assemble_gram(&rule, w).unwrap();
    (rule, g)
}

pub fn gram_psd() -> Result<(), String> {
    run(32, small_gram_strategy(), |(r, m, delta, seed)| {
        let cover = Arc::new(build_cover::<f64>(r, 2, CellGeometry::Cube).unwrap());
        let w = selector_weight(&cover, delta, seed);
        let (_, g) = gram_of(r, m, &w);
        let ev = dense_eigenvalues(&g.matrix);
        let (max, min) = (ev[0], *ev.last().unwrap());
        prop_assert!(min >= -1e-9 * max.max(0.0), "min {min}, max {max}");
        Ok(())
    })
}

pub fn gram_monotone_in_weight() -> Result<(), String> {
    run(32, (small_gram_strategy(), any::<u64>()), |((r, m, delta, seed), extra)| {
        let cover = Arc::new(build_cover::<f64>(r, 2, CellGeometry::Cube).unwrap());
        let w = selector_weight(&cover, delta, seed);
        let bigger = w.sum(&selector_weight(&cover, 0.5, extra)).unwrap();
        prop_assert!(bigger.dominates(&w));
        let (_, a) = gram_of(r, m, &w);
        let (_, b) = gram_of(r, m, &bigger);
        let (la, lb) = (dense_eigenvalues(&a.matrix)[0], dense_eigenvalues(&b.matrix)[0]);
        prop_assert!(lb >= la - 1e-9 * lb, "{lb} < {la}");
        Ok(())
    })
}

pub fn gram_trace_full_weight() -> Result<(), String> {
    run(16, (4.0..24.0f64, 8usize..200), |(r, m)| {
        let cover = Arc::new(build_cover::<f64>(r, 2, CellGeometry::Cube).unwrap());
        let w = Weight::full(&cover);
        let (rule, g) = gram_of(r, m, &w);
        let expected = weight_mass(&w) * rule.weights().iter().sum::<f64>();
        let trace = g.matrix.trace();
        prop_assert!((trace - expected).abs() <= 1e-12 * expected, "{trace} vs {expected}");
        Ok(())
    })
}

pub fn gram_phase_covariance() -> Result<(), String> {
    let cover = Arc::new(build_cover::<f64>(6.0, 2, CellGeometry::Cube).unwrap());
    let inner: Vec<usize> = (0..cover.len())
        .filter(|&k| {
            let p = cover.lattice_point(k);
            p[0] * p[0] + p[1] * p[1] <= 9
        })
        .collect();
    run(
        24,
        (prop::collection::vec(any::<bool>(), inner.len()), -2i32..=2, -2i32..=2, 8usize..=48),
        |(mask, t0, t1, m)| {
            let chosen: Vec<usize> = inner.iter().zip(&mask).filter(|(_, &b)| b).map(|(&k, _)| k).collect();
            prop_assume!(!chosen.is_empty());
            let w = Weight::from_pairs(&cover, chosen.iter().map(|&k| (k, 1))).unwrap();
            let shifted = Weight::from_pairs(
                &cover,
                chosen.iter().map(|&k| {
                    let p = cover.lattice_point(k);
                    (cover.index_of(&[p[0] + t0, p[1] + t1]).unwrap(), 1)
                }),
            )
            .unwrap();
            let (rule, a) = gram_of(6.0, m, &w);
            let (_, b) = gram_of(6.0, m, &shifted);
            let scale = (0..m).map(|j| a.matrix.get(j, j).norm()).fold(0.0, f64::max);
            for j in 0..m {
                for l in 0..m {
                    let (wj, wl) = (rule.node(j), rule.node(l));
                    let ph = std::f64::consts::TAU * ((wl[0] - wj[0]) * t0 as f64 + (wl[1] - wj[1]) * t1 as f64);
                    let expect = a.matrix.get(j, l) * Complex::from_polar(1.0, ph);
                    prop_assert!((b.matrix.get(j, l) - expect).norm() <= 1e-10 * scale);
                }
            }
            let (ea, eb) = (dense_eigenvalues(&a.matrix), dense_eigenvalues(&b.matrix));
            for (x, y) in ea.iter().zip(&eb) {
                prop_assert!((x - y).abs() <= 1e-10 * ea[0], "{x} vs {y}");
            }
            Ok(())
        },
    )
}

// ---- mtfunctional ----

fn cosine(a: &[Complex<f64>], b: &[Complex<f64>]) -> f64 {
    let ip: Complex<f64> = a.iter().zip(b).map(|(x, y)| x.conj() * y).sum();
    let na = a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let nb = b.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    ip.norm() / (na * nb)
}

pub fn maximizer_scale_invariant() -> Result<(), String> {
    run(24, (small_gram_strategy(), 1u32..6), |((r, m, delta, seed), q)| {
        let cover = Arc::new(build_cover::<f64>(r, 2, CellGeometry::Cube).unwrap());
        let w = selector_weight(&cover, delta, seed);
        prop_assume!(!w.is_empty());
        let rule = build_surface::<f64>(SurfaceKind::Circle, 2, m).unwrap();
        let opts = MtOptions::default();
        let a = mt_functional(&rule, &w, &opts).unwrap();
        let b = mt_functional(&rule, &w.scaled(q), &opts).unwrap();
        let qf = q as f64;
        prop_assert!((b.value - qf * a.value).abs() <= 1e-9 * b.value, "{} vs {}·{}", b.value, q, a.value);
        let cos = cosine(&a.maximizer, &b.maximizer);
        prop_assert!(cos >= 1.0 - 1e-6, "cosine {cos}");
        Ok(())
    })
}

pub fn superadditive_on_disjoint_supports() -> Result<(), String> {
    run(24, (small_gram_strategy(), any::<u64>()), |((r, m, delta, seed), split)| {
        let cover = Arc::new(build_cover::<f64>(r, 2, CellGeometry::Cube).unwrap());
        let w = selector_weight(&cover, delta, seed);
        let mut rng = rng_from_seed(split);
        let (mut p1, mut p2) = (Vec::new(), Vec::new());
        for (k, mk) in w.iter() {
            if rand::Rng::random::<bool>(&mut rng) {
                p1.push((k, mk));
            } else {
                p2.push((k, mk));
            }
        }
        let w1 = Weight::from_pairs(&cover, p1).unwrap();
        let w2 = Weight::from_pairs(&cover, p2).unwrap();
        let rule = build_surface::<f64>(SurfaceKind::Circle, 2, m).unwrap();
        let opts = MtOptions::default();
        let s = |w: &Weight<f64>| mt_functional(&rule, w, &opts).unwrap().value;
        let (s1, s2, s12) = (s(&w1), s(&w2), s(&w1.sum(&w2).unwrap()));
        prop_assert!(s12 >= s1.max(s2) - 1e-9 * s12, "{s12} < max({s1}, {s2})");
        Ok(())
    })
}

pub fn bounded_by_full_weight() -> Result<(), String> {
    run(16, (4.0..9.0f64, 0.02..0.5f64, any::<u64>()), |(r, delta, seed)| {
        let cover = Arc::new(build_cover::<f64>(r, 2, CellGeometry::Cube).unwrap());
        let m = (16.0 * r).ceil() as usize;
        let rule = build_surface::<f64>(SurfaceKind::Circle, 2, m).unwrap();
        let full = dense_top(&assemble_gram(&rule, &Weight::full(&cover)).unwrap().matrix).value;
        let w = selector_weight(&cover, delta, seed);
        let s = mt_functional(&rule, &w, &MtOptions::default()).unwrap().value;
        prop_assert!(s <= full + 1e-9, "{s} > {full}");
        Ok(())
    })
}

pub fn monte_carlo_deterministic() -> Result<(), String> {
    let plan = TrialPlan::new(
        SurfaceSpec {
            kind: SurfaceKind::Circle,
            d: 2,
            m: Some(64),
        },
        CoverSpec {
            radius: 6.0,
            d: 2,
            geometry: CellGeometry::Cube,
        },
        ModelSpec::selector(1.0, 0.0),
        8,
        99,
    );
    let go = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| run_trials::<f64>(&plan).unwrap())
    };
    let (a, b, c) = (go(1), go(4), go(4));
    if a.outcomes == b.outcomes && b.outcomes == c.outcomes {
        Ok(())
    } else {
        Err("per-trial outcomes differ between pools".into())
    }
}

// ---- tubes ----

fn tube_weight_strategy() -> impl Strategy<Value = (f64, usize, f64, u64)> {
    (3.0..7.0f64, 2usize..=3, 0.05..0.6f64, any::<u64>())
}

fn tube_weight(r: f64, d: usize, delta: f64, seed: u64) -> Weight<f64> {
    let cover = Arc::new(build_cover::<f64>(r, d, CellGeometry::Cube).unwrap());
    let spec = ModelSpec::selector(delta * r, 0.0);
    spec.sample(&cover, seed, &mut rng_from_seed(seed)).unwrap()
}

pub fn tube_sup_monotone() -> Result<(), String> {
    run(24, (tube_weight_strategy(), any::<prop::sample::Index>()), |((r, d, delta, seed), idx)| {
        let w = tube_weight(r, d, delta, seed);
        let k = idx.index(w.cover().len());
        let bigger = w.sum(&Weight::from_pairs(w.cover(), [(k, 1)]).unwrap()).unwrap();
        // refinement is a local climb from the best grid tube, so only the
        // grid maximum is compared; the refined value may not fall below it
        let spec = SearchSpec::default();
        let (a, b) = (tube_sup(&w, &spec).unwrap(), tube_sup(&bigger, &spec).unwrap());
        prop_assert!(b.grid_value >= a.grid_value, "{} < {} after adding cell {k}", b.grid_value, a.grid_value);
        prop_assert!(a.value >= a.grid_value && b.value >= b.grid_value);
        Ok(())
    })
}

pub fn tube_sup_lower_certificate() -> Result<(), String> {
    run(24, tube_weight_strategy(), |(r, d, delta, seed)| {
        let w = tube_weight(r, d, delta, seed);
        let v = tube_sup(&w, &SearchSpec::default()).unwrap().value;
        let lower = w.max_multiplicity() as f64 * w.cover().cell_volume();
        prop_assert!(v >= lower, "{v} < {lower}");
        Ok(())
    })
}

pub fn tube_sup_quarter_turn() -> Result<(), String> {
    run(24, (3.0..8.0f64, 0.05..0.6f64, any::<u64>()), |(r, delta, seed)| {
        let w = tube_weight(r, 2, delta, seed);
        let cover = w.cover();
        let rotated = Weight::from_pairs(
            cover,
            w.iter().map(|(k, m)| {
                let p = cover.lattice_point(k);
                (cover.index_of(&[-p[1], p[0]]).unwrap(), m)
            }),
        )
        .unwrap();
        let spec = SearchSpec {
            refinement_rounds: 0,
            ..SearchSpec::default()
        };
        let (a, b) = (tube_sup(&w, &spec).unwrap().value, tube_sup(&rotated, &spec).unwrap().value);
        prop_assert_eq!(a, b);
        Ok(())
    })
}

pub fn tube_grid_soundness() -> Result<(), String> {
    run(12, tube_weight_strategy(), |(r, d, delta, seed)| {
        let w = tube_weight(r, d, delta, seed);
        let spec = SearchSpec::default();
        let sup = tube_sup(&w, &spec).unwrap();
        let grid = TubeGrid::<f64>::new(d, r, spec.angular_step(r), spec.offset_spacing).unwrap();
        for dir in 0..grid.direction_count() {
            for off in 0..grid.offset_count() {
                let occ = tube_occupancy(&w, &grid.tube(dir, off), OccupancyMethod::CenterIndicator).unwrap();
                prop_assert!(occ <= sup.value, "grid tube ({dir}, {off}) has {occ} > {}", sup.value);
            }
        }
        Ok(())
    })
}

// ---- probbounds ----

pub fn bounds_monotone() -> Result<(), String> {
    run(
        64,
        (prop::collection::vec(0.1..3.0f64, 1..20), 0.01..1.0f64, 1usize..500),
        |(a, delta, card)| {
            let amax = a.iter().cloned().fold(0.0, f64::max);
            let s = delta * a.iter().map(|x| x * x).sum::<f64>();
            let t0 = s / amax;
            let mut prev = f64::INFINITY;
            for i in 0..200 {
                let t = t0 * (1.0 + i as f64 * 0.1);
                let b = bennett_bound(&a, delta, t).unwrap();
                prop_assert!(b <= prev, "bennett increased at t = {t}");
                prev = b;
            }
            let u0 = 2.0 * delta * card as f64;
            let mut prev = f64::INFINITY;
            for i in 0..200 {
                let u = u0 * (1.0 + i as f64 * 0.05);
                let b = selector_tail_bound(card, delta, u).unwrap();
                prop_assert!(b <= prev, "selector bound increased at u = {u}");
                prev = b;
            }
            Ok(())
        },
    )
}

pub fn bennett_scale_invariant() -> Result<(), String> {
    run(
        128,
        (prop::collection::vec(-3.0..3.0f64, 1..30), 0.01..1.0f64, 0.1..50.0f64, 0.01..100.0f64),
        |(a, delta, t, c)| {
            prop_assume!(a.iter().any(|x| x.abs() > 1e-3));
            let ca: Vec<f64> = a.iter().map(|x| c * x).collect();
            let e1 = bennett_exponent(&a, delta, t).unwrap();
            let e2 = bennett_exponent(&ca, delta, c * t).unwrap();
            prop_assert!((e1 - e2).abs() <= 1e-12 * e1.abs().max(1.0), "{e1} vs {e2}");
            Ok(())
        },
    )
}

pub fn shipped_tail_specs() -> Vec<(String, TailSpec)> {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut out = Vec::new();
    let mut entries: Vec<_> = std::fs::read_dir(&dir).unwrap().map(|e| e.unwrap().path()).collect();
    entries.sort();
    for path in entries {
        let cfg = ExperimentConfig::load(&path).unwrap();
        if let Some(t) = cfg.tail {
            out.push((path.file_name().unwrap().to_string_lossy().into_owned(), t));
        }
    }
    out
}

pub fn tail_dominance() -> Result<(), String> {
    let specs = shipped_tail_specs();
    if specs.is_empty() {
        return Err("no shipped tail specs".into());
    }
    for (name, spec) in specs {
        let study = tail_study(&spec).map_err(|e| e.to_string())?;
        for r in &study.rows {
            if !r.dominated() {
                return Err(format!(
                    "{name}: t = {} empirical {} > bound {} + 3·{}",
                    r.threshold, r.empirical, r.bound, r.stderr
                ));
            }
        }
    }
    Ok(())
}

// ---- chaining ----

pub fn net_points_in_hull() -> Result<(), String> {
    run(24, (1usize..5, 1usize..5, 0.5..2.0f64, any::<u64>()), |(n, dim, eps, seed)| {
        let spec = PolytopeSpec::<f64>::random_unit(n, dim, &mut rng_from_seed(seed)).unwrap();
        let net = maurey_net(&spec, eps, NetMode::Enumerated, &mut rng_from_seed(seed)).unwrap();
        prop_assert!((net.len() as f64) <= net.pick_count);
        for i in 0..net.len() {
            prop_assert!(net.coefficient_mass(i) <= 1.0);
        }
        Ok(())
    })
}

pub fn packings_separated_and_monotone() -> Result<(), String> {
    run(
        12,
        (3.0..6.0f64, 12usize..40, prop::collection::vec(0.01..1.0f64, 1..5), any::<u64>()),
        |(r, samples, eps, seed)| {
            let rule = build_surface::<f64>(SurfaceKind::Circle, 2, 16).unwrap();
            let cover = build_cover::<f64>(r, 2, CellGeometry::Cube).unwrap();
            let table = covering_check(&rule, &cover, &eps, samples, &mut rng_from_seed(seed)).unwrap();
            for (row, packing) in table.rows.iter().zip(&table.packings) {
                for (a, &i) in packing.iter().enumerate() {
                    for &j in &packing[a + 1..] {
                        prop_assert!(table.distance(i, j) > row.epsilon);
                    }
                }
            }
            for a in &table.rows {
                for b in &table.rows {
                    if a.epsilon <= b.epsilon {
                        prop_assert!(a.packing_size >= b.packing_size);
                    }
                }
            }
            Ok(())
        },
    )
}

// ---- cli ----

pub fn light_configs() -> Vec<(Subcommand, ExperimentConfig)> {
    let parse = |s: &str| ExperimentConfig::from_json(s).unwrap();
    let mut tail = shipped_tail_specs();
    let mut out = Vec::new();
    for (_, spec) in tail.drain(..) {
        out.push((
            Subcommand::TailStudy,
            ExperimentConfig {
                tail: Some(spec),
                ..ExperimentConfig::default()
            },
        ));
    }
    let base = r#""surface": {"kind": "circle", "d": 2}, "cover": {"R": 6, "d": 2},
        "model": {"modelTag": "selector", "c": 1}, "run": {"N": 6, "masterSeed": 42}"#;
    out.push((Subcommand::GenerateWeight, parse(&format!("{{{base}}}"))));
    out.push((Subcommand::MtFunctional, parse(&format!("{{{base}}}"))));
    out.push((Subcommand::ExpectedMt, parse(&format!("{{{base}}}"))));
    out.push((Subcommand::TubeSup, parse(&format!("{{{base}}}"))));
    out.push((
        Subcommand::ScalingStudy,
        parse(&format!(r#"{{{base}, "scaling": {{"Rs": [4, 6, 8]}}}}"#)),
    ));
    out.push((
        Subcommand::CoveringCheck,
        parse(&format!(r#"{{{base}, "covering": {{"epsilons": [0.5, 0.1, 0.05], "sampleCount": 50}}}}"#)),
    ));
    out.push((
        Subcommand::MaureyNet,
        parse(r#"{"run": {"masterSeed": 5}, "maurey": {"n": 8, "N": 16, "epsilon": 0.5}}"#),
    ));
    out
}

/// Bytes of every artifact in a run, with the manifest's wall time zeroed.
pub fn artifact_bytes(dir: &std::path::Path) -> Vec<(String, Vec<u8>)> {
    let mut names: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    names
        .into_iter()
        .map(|n| {
            let bytes = std::fs::read(dir.join(&n)).unwrap();
            if n == MANIFEST {
                let mut m: Manifest = serde_json::from_slice(&bytes).unwrap();
                m.wall_time = 0.0;
                (n, serde_json::to_vec(&m).unwrap())
            } else {
                (n, bytes)
            }
        })
        .collect()
}

pub fn cli_runs_reproduce(configs: &[(Subcommand, ExperimentConfig)]) -> Result<(), String> {
    let root = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut reference: Vec<Vec<(String, Vec<u8>)>> = Vec::new();
    for (round, threads) in [1usize, 4, 4].into_iter().enumerate() {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        for (i, (sub, cfg)) in configs.iter().enumerate() {
            let flags = RunFlags {
                out: Some(root.path().join(format!("round{round}"))),
                dump_gram: *sub == Subcommand::MtFunctional,
                ..RunFlags::default()
            };
            let outcome = pool.install(|| run_experiment(*sub, cfg, &flags)).map_err(|e| e.to_string())?;
            let bytes = artifact_bytes(&outcome.directory);
            if round == 0 {
                reference.push(bytes);
            } else if reference[i] != bytes {
                return Err(format!("{} artifacts differ in round {round} ({threads} threads)", sub.name()));
            }
        }
    }
    Ok(())
}

pub fn cli_deterministic() -> Result<(), String> {
    cli_runs_reproduce(&light_configs())
}

pub fn manifest_complete() -> Result<(), String> {
    let root = tempfile::tempdir().map_err(|e| e.to_string())?;
    for (sub, cfg) in light_configs() {
        let flags = RunFlags {
            out: Some(root.path().to_path_buf()),
            ..RunFlags::default()
        };
        let outcome = run_experiment(sub, &cfg, &flags).map_err(|e| e.to_string())?;
        let text = std::fs::read_to_string(outcome.directory.join(MANIFEST)).map_err(|e| e.to_string())?;
        let m: Manifest = serde_json::from_str(&text).map_err(|e| e.to_string())?;
        if m.config_hash != m.config.hash(sub.name()) || m.master_seed != cfg.run.master_seed {
            return Err(format!("{}: manifest hash or seed mismatch", sub.name()));
        }
        if m.artifacts.is_empty() {
            return Err(format!("{}: no artifacts listed", sub.name()));
        }
        for a in &m.artifacts {
            if !outcome.directory.join(a).is_file() {
                return Err(format!("{}: listed artifact {a} missing", sub.name()));
            }
        }
        let on_disk = std::fs::read_dir(&outcome.directory).map_err(|e| e.to_string())?.count();
        if on_disk != m.artifacts.len() + 1 {
            return Err(format!("{}: unlisted files in run directory", sub.name()));
        }
    }
    Ok(())
}

/// Every invariant check, by name.
pub fn all_invariants() -> Vec<(&'static str, Check)> {
    vec![
        ("surface norm scaling", surface_norm_scaling),
        ("circle measure is 2π", circle_measure_is_two_pi),
        ("nodes confined to unit ball", nodes_confined),
        ("cell transform bounded by volume", cell_transform_bounded),
        ("cell transform real and even", cell_transform_even),
        ("cell translation covariance", translation_covariance),
        ("weight reproducibility", weight_reproducible),
        ("selector support binomial", selector_support_binomial),
        ("without-replacement support exact", without_replacement_support),
        ("Gram PSD floor", gram_psd),
        ("Gram monotone in weight", gram_monotone_in_weight),
        ("Gram trace of full weight", gram_trace_full_weight),
        ("Gram phase covariance", gram_phase_covariance),
        ("maximizer scale invariance", maximizer_scale_invariant),
        ("superadditivity on disjoint supports", superadditive_on_disjoint_supports),
        ("bounded by full weight", bounded_by_full_weight),
        ("Monte Carlo determinism", monte_carlo_deterministic),
        ("tube sup monotone", tube_sup_monotone),
        ("tube sup lower certificate", tube_sup_lower_certificate),
        ("tube sup quarter-turn symmetry", tube_sup_quarter_turn),
        ("tube grid soundness", tube_grid_soundness),
        ("bound monotonicity", bounds_monotone),
        ("bennett scale invariance", bennett_scale_invariant),
        ("tail dominance on shipped specs", tail_dominance),
        ("net points in hull", net_points_in_hull),
        ("packing separation and monotonicity", packings_separated_and_monotone),
        ("CLI determinism", cli_deterministic),
        ("manifest completeness", manifest_complete),
    ]
}
