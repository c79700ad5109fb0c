//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use epidp_core::aw::{aw_distance, AwConfig};
use epidp_core::bellman::{apply_bellman, StorageCost};
use epidp_core::econ::{ar1_experiment, levy_experiment, revenue_bound_envelope, Ar1ExperimentConfig, LevyConfig, RevenueFamily, RevenueModel};
use epidp_core::measures::{DistributionSpec, EmpiricalMeasure, SampleStream};
use epidp_core::solvers::{
    consistency_sweep, median, solve_finite, solve_infinite, SolveConfig, SweepConfig, TailRequest,
};
use epidp_core::valuefn::{convexity_defect, epigraph_distance, EpigraphPoint, Grid1D, StateGrid, ValueFn, ValueFn1D};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn model(beta: f64) -> RevenueModel {
    RevenueModel::new(beta, StorageCost::default()).unwrap()
}

fn exp1() -> DistributionSpec {
    DistributionSpec::exponential(1.0)
}

fn grid(n: usize) -> StateGrid {
    StateGrid::One(Grid1D::uniform(0.0, 2.0, n).unwrap())
}

fn medians_by<T>(nus: &[usize], rows: &[T], nu: impl Fn(&T) -> usize, val: impl Fn(&T) -> f64) -> Vec<f64> {
    nus.iter()
        .map(|&n| {
            let xs: Vec<f64> = rows.iter().filter(|r| nu(r) == n).map(&val).collect();
            median(&xs).unwrap_or(f64::NAN)
        })
        .collect()
}

/// Levy(0,1) decisions at (1, 1): nondecreasing seed medians, ≥ 0.9 at the end.
fn figure_one() -> Verdict {
    let out = levy_experiment(&LevyConfig::default()).unwrap();
    let meds: Vec<f64> = out.medians.iter().map(|m| m.1).collect();
    let drops: Vec<f64> = meds.windows(2).map(|w| w[0] - w[1]).filter(|d| *d > 0.0).collect();
    let monotone = drops.is_empty() || (drops.len() == 1 && drops[0] <= 0.02);
    let last = *meds.last().unwrap();
    let converged = out.records.iter().all(|r| r.converged);
    verdict(
        monotone && last >= 0.9 && converged,
        format!("medians {meds:?}, all converged {converged}"),
    )
}

/// Exponential prices: every solution sits inside the revenue envelope.
fn bound_suite() -> Verdict {
    let m = model(0.9);
    let g = grid(201);
    let mut worst = f64::INFINITY;
    let mut ok = true;
    for seed in 1..=3 {
        let mu = EmpiricalMeasure::uniform(SampleStream::new(seed, exp1()).sample(1000).unwrap()).unwrap();
        let r = solve_infinite(&m, &mu, &g, &SolveConfig::default()).unwrap();
        let check = revenue_bound_envelope(0.9, m.storage, std::slice::from_ref(&mu)).unwrap().check(r.value()).unwrap();
        ok &= r.converged && check.min_margin >= -(r.error_bound + 1e-9);
        worst = worst.min(check.min_margin);
    }
    verdict(ok, format!("smallest margin {worst:.3e}"))
}

fn knot_oracle(xs: &[f64], price: f64, beta: f64) -> Vec<f64> {
    let mut v = vec![0.0; xs.len()];
    loop {
        let next: Vec<f64> = (0..xs.len())
            .map(|i| {
                (0..=i)
                    .map(|j| 0.5 * xs[j] * xs[j] - price * (xs[i] - xs[j]) + beta * v[j])
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        let r = next.iter().zip(&v).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        v = next;
        if r <= 1e-12 {
            return v;
        }
    }
}

/// Unit price, β = ½: 201-knot solver against a 2001-knot knot-decision oracle.
fn oracle_equivalence() -> Verdict {
    let fine: Vec<f64> = (0..=2000).map(|i| i as f64 * 1e-3).collect();
    let oracle = knot_oracle(&fine, 1.0, 0.5);
    let r = solve_infinite(&model(0.5), &EmpiricalMeasure::dirac(1.0), &grid(201), &SolveConfig::default()).unwrap();
    let v = r.value().values();
    let gap = (0..201).map(|k| (v[k] - oracle[10 * k]).abs()).fold(0.0, f64::max);
    let v0 = v[0].abs();
    verdict(
        gap <= 1e-3 && v0 <= r.error_bound.max(0.0) + f64::MIN_POSITIVE,
        format!("sup gap {gap:.3e}, |V(0)| {v0:.1e}, error bound {:.1e}", r.error_bound),
    )
}

fn random_convex(u: &mut SampleStream, g: &Grid1D) -> ValueFn1D {
    let k = 1 + (u.uniforms(1)[0] * 4.0) as usize;
    let pieces: Vec<(f64, f64)> = (0..k)
        .map(|_| {
            let r = u.uniforms(2);
            (4.0 * r[0] - 2.0, 6.0 * r[1] - 3.0)
        })
        .collect();
    ValueFn1D::from_fn(g.clone(), |x| pieces.iter().map(|(a, b)| a + b * x).fold(f64::NEG_INFINITY, f64::max)).unwrap()
}

/// Monotonicity, contraction, shift law and convexity on 100 random pairs.
fn operator_laws() -> Verdict {
    let g = Grid1D::uniform(0.0, 2.0, 101).unwrap();
    let mut u = SampleStream::new(2024, DistributionSpec::Uniform { low: 0.0, high: 1.0 });
    let (mut mono, mut contr, mut shift, mut convex) = (0.0f64, f64::NEG_INFINITY, 0.0f64, 0.0f64);
    for pair in 0..100u64 {
        let beta = 0.05 + 0.9 * u.uniforms(1)[0];
        let m = model(beta);
        let mu = EmpiricalMeasure::uniform(SampleStream::new(pair + 1, exp1()).sample(100).unwrap()).unwrap();
        let v = random_convex(&mut u, &g);
        let other = random_convex(&mut u, &g);
        let w = ValueFn1D::new(g.clone(), v.values().iter().zip(other.values()).map(|(a, b)| a.max(*b)).collect()).unwrap();
        let (v, w) = (ValueFn::One(v), ValueFn::One(w));
        let (bv, bw) = (apply_bellman(&m, &v, &mu).unwrap(), apply_bellman(&m, &w, &mu).unwrap());
        mono = mono.max(bv.values().iter().zip(bw.values()).map(|(a, b)| a - b).fold(f64::NEG_INFINITY, f64::max));
        contr = contr.max(bv.sup_norm_diff(&bw).unwrap() - beta * v.sup_norm_diff(&w).unwrap());
        let c = 3.0 * u.uniforms(1)[0] - 1.5;
        let lhs = apply_bellman(&m, &v.shifted(c), &mu).unwrap();
        shift = shift.max(lhs.sup_norm_diff(&bv.shifted(beta * c)).unwrap());
        convex = convex.max(convexity_defect(bv.as_1d().unwrap()));
    }
    verdict(
        mono <= 1e-12 && contr <= 1e-10 && shift <= 1e-12 && convex <= 1e-9,
        format!("monotonicity {mono:.1e}, contraction slack {contr:.1e}, shift {shift:.1e}, convexity {convex:.1e}"),
    )
}

/// Finite horizons equal iterated operators; the horizon gap shrinks at rate β.
fn finite_infinite() -> Verdict {
    let beta = 0.9;
    let m = model(beta);
    let g = grid(201);
    let mu = EmpiricalMeasure::uniform(SampleStream::new(7, exp1()).sample(1000).unwrap()).unwrap();
    let mut worst = 0.0f64;
    for t in [1usize, 5, 20] {
        let r = solve_finite(&m, &vec![mu.clone(); t], &g, false).unwrap();
        let mut v = g.zeros();
        for _ in 0..t {
            v = apply_bellman(&m, &v, &mu).unwrap();
        }
        worst = worst.max(r.value().sup_norm_diff(&v).unwrap());
    }
    let star = solve_infinite(&m, &mu, &g, &SolveConfig { vi_tolerance: 1e-14, ..SolveConfig::default() }).unwrap();
    let mut v = g.zeros();
    let mut gaps = Vec::new();
    for _ in 0..80 {
        v = apply_bellman(&m, &v, &mu).unwrap();
        gaps.push(v.sup_norm_diff(star.value()).unwrap());
    }
    let max_ratio = gaps
        .windows(2)
        .skip(5)
        .filter(|w| w[0] > 1e-9)
        .map(|w| w[1] / w[0])
        .fold(0.0f64, f64::max);
    verdict(
        worst <= 1e-12 && max_ratio <= beta + 0.01,
        format!("knotwise gap {worst:.1e}, largest gap ratio {max_ratio:.4}"),
    )
}

fn constant_pair_oracle(rho_max: f64, steps: usize) -> f64 {
    let dist = |x: f64, a: f64, c: f64| {
        let dx = (-x).max(x - 20.0).max(0.0);
        dx.hypot((c - a).max(0.0))
    };
    let h = rho_max / steps as f64;
    let mut total = 0.0;
    for k in 0..=steps {
        let rho = k as f64 * h;
        let mut best = 1.0f64;
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

/// Metric axioms, the common-point bound and the constant-pair oracle.
fn aw_metric() -> Verdict {
    let cfg = AwConfig::default_1d();
    let g = Grid1D::uniform(0.0, 2.0, 21).unwrap();
    let mut u = SampleStream::new(99, DistributionSpec::Uniform { low: -3.0, high: 3.0 });
    let mut draw = || ValueFn1D::new(g.clone(), u.uniforms(21).iter().map(|r| 6.0 * r - 3.0).collect()).unwrap();
    let d = |a: &ValueFn1D, b: &ValueFn1D| aw_distance(a, b, &cfg).unwrap();
    let (mut ident, mut asym, mut tri, mut bound) = (0.0f64, 0.0f64, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for _ in 0..50 {
        let (f, gg, h) = (draw(), draw(), draw());
        ident = ident.max(d(&f, &f).value);
        let fg = d(&f, &gg);
        asym = asym.max((fg.value - d(&gg, &f).value).abs());
        tri = tri.max(d(&f, &h).value - fg.value - d(&gg, &h).value);
        let z = EpigraphPoint::new_1d(0.0, 0.0);
        let c = epigraph_distance(&z, &f, 2.0).max(epigraph_distance(&z, &gg, 2.0));
        bound = bound.max(fg.value - (1.0 + c + fg.err_quadrature));
    }
    let wide = Grid1D::uniform(0.0, 20.0, 201).unwrap();
    let f0 = ValueFn1D::from_fn(wide.clone(), |_| 0.0).unwrap();
    let f1 = ValueFn1D::from_fn(wide, |_| 1.0).unwrap();
    let value = d(&f0, &f1).value;
    let oracle = constant_pair_oracle(cfg.rho_max, 10 * cfg.rho_steps);
    let rel = (value - oracle).abs() / oracle;
    verdict(
        ident <= 1e-9 && asym == 0.0 && tri <= 1e-6 && bound <= 1e-9 && rel <= 1e-3,
        format!(
            "identity {ident:.1e}, asymmetry {asym:.1e}, triangle excess {tri:.1e}, bound excess {bound:.2e}, constant pair {value:.6} vs {oracle:.6}"
        ),
    )
}

/// Seed-median distance to the 64-node reference falls across the schedule.
fn consistency_decay() -> Verdict {
    let nus = vec![100, 1000, 10_000];
    let cfg = SweepConfig {
        nu_schedule: nus.clone(),
        seeds: (1..=5).collect(),
        grid: grid(201),
        solve: SolveConfig::default(),
        aw: Some(AwConfig::default_1d()),
        reference_nodes: 64,
        decision_probes: vec![(1.0, 0.0, 1.0)],
        tail: None,
    };
    let recs = consistency_sweep(&RevenueFamily(model(0.9)), &exp1(), &cfg).unwrap();
    let meds = medians_by(&nus, &recs, |r| r.nu, |r| r.aw_to_ref.map_or(f64::NAN, |a| a.value));
    let strictly = meds.windows(2).all(|w| w[1] < w[0]);
    let factor = meds[0] / meds[2];
    let all_ok = recs.iter().all(|r| r.status.is_ok());
    verdict(
        strictly && factor >= 2.0 && all_ok,
        format!("medians {:.4e} {:.4e} {:.4e}, factor {factor:.2}", meds[0], meds[1], meds[2]),
    )
}

/// Log-AR(1) estimation, residual convergence, saddle shape, envelope and series ratio.
fn ar1_suite() -> Verdict {
    let cfg = Ar1ExperimentConfig::default();
    let beta = cfg.spec.beta;
    let recs = ar1_experiment(&cfg).unwrap();
    let nus = &cfg.nu_schedule;
    let last = *nus.last().unwrap();
    let alpha_err = recs.iter().filter(|r| r.nu == last).map(|r| r.alpha_error.abs()).fold(0.0, f64::max);
    let bl = medians_by(nus, &recs, |r| r.nu, |r| r.bl_distance);
    let bl_falls = bl.windows(2).all(|w| w[1] < w[0]);
    let saddle = recs.iter().map(|r| r.saddle.0.max(r.saddle.1) / r.value_range).fold(0.0, f64::max);
    let margin_ok = recs.iter().all(|r| r.min_bound_margin >= -(r.error_bound + 1e-9));
    let ratio = recs.iter().map(|r| r.max_series_ratio).fold(0.0, f64::max);
    let all_ok = recs.iter().all(|r| r.status.is_ok());
    verdict(
        all_ok && alpha_err <= 0.02 && bl_falls && saddle <= 1e-6 && margin_ok && ratio <= beta + 0.01,
        format!(
            "|alpha error| {alpha_err:.4}, BL medians {:.2e} {:.2e} {:.2e}, saddle/range {saddle:.1e}, envelope ok {margin_ok}, series ratio {ratio:.4}",
            bl[0], bl[1], bl[2]
        ),
    )
}

fn tail_medians(price: DistributionSpec, beta: f64, tol: f64) -> (Vec<f64>, Vec<f64>) {
    let nus = vec![100, 1000, 10_000];
    let alpha_grid: Vec<f64> = (0..=100).map(|i| -50.0 + 0.5 * i as f64).collect();
    let cfg = SweepConfig {
        nu_schedule: nus.clone(),
        seeds: (1..=5).collect(),
        grid: grid(201),
        solve: SolveConfig {
            vi_tolerance: tol,
            ..SolveConfig::default()
        },
        aw: None,
        reference_nodes: 64,
        decision_probes: Vec::new(),
        tail: Some(TailRequest {
            probe: (1.0, 0.0),
            alpha_grid,
        }),
    };
    let recs = consistency_sweep(&RevenueFamily(model(beta)), &price, &cfg).unwrap();
    let at = |i: usize| medians_by(&nus, &recs, |r| r.nu, |r| r.tails[0].lower[i]);
    // Index 96 is α = −2, index 0 is α = −50.
    (at(96), at(0))
}

/// The truncated lower tail vanishes for exponential prices and grows with ν for Lévy prices.
fn tail_contrast() -> Verdict {
    let nus = [1e2, 1e3, 1e4];
    let (exp_trend, exp_far) = tail_medians(exp1(), 0.9, 1e-8);
    // Lévy sample means reach 1e7 at ν = 1e4, so the values do too.
    let (levy_trend, _) = tail_medians(DistributionSpec::levy_standard(), 0.9, 1e-3);
    let e = epidp_core::bellman::decay_trend(&nus, &exp_trend).unwrap();
    let l = epidp_core::bellman::decay_trend(&nus, &levy_trend).unwrap();
    let far_zero = exp_far.iter().all(|v| v.abs() <= 1e-12);
    verdict(
        far_zero && !e.fires && l.fires,
        format!(
            "exponential lower(-50) {exp_far:?}, slope {:.3} fires {}; levy slope {:.3} fires {}",
            e.slope, e.fires, l.slope, l.fires
        ),
    )
}

fn csv_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    v.sort();
    v
}

/// Runs through the binary, reruns from the manifest, compares bytes.
fn determinism() -> Verdict {
    let tmp = std::env::temp_dir().join(format!("epidp-acceptance-{}", std::process::id()));
    let _ = fs::remove_dir_all(&tmp);
    fs::create_dir_all(&tmp).unwrap();
    let configs = [
        ("levy", "kind = \"levy-fig1\"\n"),
        ("consistency", "kind = \"consistency\"\n[schedule]\nnu = [100, 1000]\nseeds = [1, 2]\n"),
        ("tails", "kind = \"tail-diagnostics\"\n[schedule]\nnu = [100, 1000]\nseeds = [1, 2]\n"),
        ("ar1", "kind = \"ar1\"\n[grid]\nn_x = 41\nn_ell = 21\n[schedule]\nnu = [100, 1000]\nseeds = [1]\n"),
        ("finite", "kind = \"finite\"\n[schedule]\nnu = [200]\nhorizon = 5\n"),
    ];
    let exe = env!("CARGO_BIN_EXE_epidp");
    let mut details = Vec::new();
    let mut pass = true;
    for (name, text) in configs {
        let cfg = tmp.join(format!("{name}.toml"));
        fs::write(&cfg, text).unwrap();
        let (a, b) = (tmp.join(format!("{name}-a")), tmp.join(format!("{name}-b")));
        let first = Command::new(exe).env_remove("EPIDP_SEED").arg("run").arg(&cfg).arg("--out").arg(&a).output().unwrap();
        let second = Command::new(exe)
            .env_remove("EPIDP_SEED")
            .arg("run")
            .arg(a.join("manifest.json"))
            .arg("--out")
            .arg(&b)
            .output()
            .unwrap();
        let (fa, fb) = (csv_bytes(&a), csv_bytes(&b));
        let same = first.status.success() && second.status.success() && !fa.is_empty() && fa == fb;
        pass &= same;
        details.push(format!("{name} {} files {}", fa.len(), if same { "identical" } else { "DIFFER" }));
    }
    let _ = fs::remove_dir_all(&tmp);
    verdict(pass, details.join(", "))
}

fn main() {
    let criteria: [(&str, Duration, fn() -> Verdict); 10] = [
        ("figure-1 reproduction", Duration::from_secs(600), figure_one),
        ("bound suite", Duration::from_secs(60), bound_suite),
        ("oracle equivalence", Duration::from_secs(30), oracle_equivalence),
        ("operator laws", Duration::from_secs(60), operator_laws),
        ("finite/infinite consistency", Duration::from_secs(60), finite_infinite),
        ("attouch-wets metric", Duration::from_secs(120), aw_metric),
        ("consistency decay", Duration::from_secs(600), consistency_decay),
        ("ar(1) suite", Duration::from_secs(900), ar1_suite),
        ("tail-diagnostic contrast", Duration::from_secs(300), tail_contrast),
        ("determinism", Duration::from_secs(600), determinism),
    ];
    let mut failed = 0;
    for (i, (name, limit, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let v = check();
        let took = start.elapsed();
        let pass = v.pass && took <= *limit;
        if !pass {
            failed += 1;
        }
        println!(
            "criterion {:>2} {:<28} {} ({:.1}s of {}s) {}",
            i + 1,
            name,
            if pass { "PASS" } else { "FAIL" },
            took.as_secs_f64(),
            limit.as_secs(),
            v.detail
        );
    }
    println!("acceptance: {} of {} criteria pass", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
