use epidp_core::aw::{aw_distance, aw_distance_2d, AwConfig};
use epidp_core::valuefn::{epigraph_distance, EpigraphPoint, Grid1D, Grid2D, ValueFn1D, ValueFn2D};
use proptest::prelude::*;

fn light() -> AwConfig {
    AwConfig {
        rho_steps: 128,
        ball_samples: 64,
        ..AwConfig::default_1d()
    }
}

fn pwl() -> impl Strategy<Value = ValueFn1D> {
    prop::collection::vec(-3.0..3.0f64, 9).prop_map(|v| ValueFn1D::new(Grid1D::uniform(0.0, 2.0, 9).unwrap(), v).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn identity(f in pwl()) {
        prop_assert!(aw_distance(&f, &f, &light()).unwrap().value <= 1e-9);
    }

    #[test]
    fn symmetry_is_exact(f in pwl(), g in pwl()) {
        let cfg = light();
        prop_assert_eq!(aw_distance(&f, &g, &cfg).unwrap().value, aw_distance(&g, &f, &cfg).unwrap().value);
    }

    #[test]
    fn triangle(f in pwl(), g in pwl(), h in pwl()) {
        let cfg = light();
        let d = |a: &ValueFn1D, b: &ValueFn1D| aw_distance(a, b, &cfg).unwrap().value;
        prop_assert!(d(&f, &h) <= d(&f, &g) + d(&g, &h) + 1e-6);
    }

    #[test]
    fn common_point_bound(f in pwl(), g in pwl()) {
        let cfg = light();
        let e = aw_distance(&f, &g, &cfg).unwrap();
        let z = EpigraphPoint::new_1d(0.0, 0.0);
        let c = epigraph_distance(&z, &f, 2.0).max(epigraph_distance(&z, &g, 2.0));
        prop_assert!(e.value <= 1.0 + c + e.err_quadrature + 1e-9);
    }

    #[test]
    fn dominated_by_sup_norm(f in pwl(), g in pwl()) {
        let e = aw_distance(&f, &g, &light()).unwrap();
        let sup = f.values().iter().zip(g.values()).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        prop_assert!(e.value <= sup + e.err_quadrature + 1e-9);
    }
}

/// `∫ max_{z ∈ B_ρ} |d(z, epi 0) − d(z, epi 1)| e^{−ρ} dρ` for the constants 0 and 1
/// on `[0, 20]`, from a dense polar sampling of every ball and the exact
/// distance to a half-strip.
fn constant_pair_oracle(rho_max: f64, steps: usize) -> f64 {
    let dist = |x: f64, a: f64, c: f64| {
        let dx = (-x).max(x - 20.0).max(0.0);
        let da = (c - a).max(0.0);
        dx.hypot(da)
    };
    let h = rho_max / steps as f64;
    let mut total = 0.0;
    for k in 0..=steps {
        let rho = k as f64 * h;
        let mut best = (dist(0.0, 0.0, 0.0) - dist(0.0, 0.0, 1.0)).abs();
        for i in 1..=40 {
            let r = rho * i as f64 / 40.0;
            for j in 0..360 {
                let t = j as f64 * std::f64::consts::TAU / 360.0;
                let (x, a) = (r * t.cos(), r * t.sin());
                best = best.max((dist(x, a, 0.0) - dist(x, a, 1.0)).abs());
            }
        }
        let w = if k == 0 || k == steps { 0.5 } else { 1.0 };
        total += w * best * (-rho).exp();
    }
    total * h
}

#[test]
fn constant_pair_matches_dense_oracle() {
    let g = Grid1D::uniform(0.0, 20.0, 201).unwrap();
    let f0 = ValueFn1D::from_fn(g.clone(), |_| 0.0).unwrap();
    let f1 = ValueFn1D::from_fn(g, |_| 1.0).unwrap();
    let cfg = AwConfig::default_1d();
    let e = aw_distance(&f0, &f1, &cfg).unwrap();
    let oracle = constant_pair_oracle(cfg.rho_max, 10 * cfg.rho_steps);
    assert!((e.value - oracle).abs() <= 1e-3 * oracle, "{} vs {oracle}", e.value);
}

#[test]
fn separable_2d_constant_pair_tracks_1d() {
    let x = Grid1D::uniform(0.0, 20.0, 41).unwrap();
    let ell = Grid1D::uniform(-20.0, 20.0, 41).unwrap();
    let grid = Grid2D { x: x.clone(), ell };
    let f0 = ValueFn2D::from_fn(&grid, |_, _| 0.0).unwrap();
    let f1 = ValueFn2D::from_fn(&grid, |_, _| 1.0).unwrap();
    let d2 = aw_distance_2d(&f0, &f1, &AwConfig::default_2d()).unwrap().value;
    let g0 = ValueFn1D::from_fn(x.clone(), |_| 0.0).unwrap();
    let g1 = ValueFn1D::from_fn(x, |_| 1.0).unwrap();
    let cfg1 = AwConfig {
        rho_steps: 128,
        ball_samples: 128,
        ..AwConfig::default_1d()
    };
    let d1 = aw_distance(&g0, &g1, &cfg1).unwrap().value;
    assert!((d2 - d1).abs() <= 0.1 * d1, "{d2} vs {d1}");
}

#[test]
fn two_dimensional_distance_shrinks_with_sup_norm() {
    let grid = Grid2D {
        x: Grid1D::uniform(0.0, 2.0, 11).unwrap(),
        ell: Grid1D::uniform(-1.0, 1.0, 9).unwrap(),
    };
    let f = ValueFn2D::from_fn(&grid, |x, l| x * x - l.exp() * x).unwrap();
    let cfg = AwConfig::default_2d();
    let ds: Vec<f64> = [0.4, 0.2, 0.1, 0.05]
        .iter()
        .map(|&eps| {
            let fk = ValueFn2D::from_fn(&grid, |x, l| x * x - l.exp() * x + eps * (3.0 * x + l).sin()).unwrap();
            aw_distance_2d(&fk, &f, &cfg).unwrap().value
        })
        .collect();
    assert!(ds.windows(2).all(|w| w[1] < w[0]), "{ds:?}");
    assert!(aw_distance_2d(&f, &f, &cfg).unwrap().value <= 1e-9);
}
