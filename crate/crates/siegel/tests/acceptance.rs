//! Acceptance suite: one PASS/FAIL line per criterion, plus the measured values.
//!
//! Runs without the libtest harness so the lines always print. Criteria listed in
//! `KNOWN_FAILURES` are reported but do not fail the run; any other failure does.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rug::{Complex, Integer};
use siegel::cfrac::{build_alpha0, check_determinant, eval_real, make_setup, QuotientSequence};
use siegel::cli::DYNAMICS_FLOOR;
use siegel::density::{
    default_budget, density_experiment, inclusion_spot_check, ARule, ExperimentConfig, OrbitConfig, ANALYTIC_SLACK,
};
use siegel::dynamics::explosion::{chi_prime_estimate, leading_derivative, SEED_RADIUS};
use siegel::dynamics::quadratic::{expi2pi, from_c64, to_c64};
use siegel::dynamics::{explosion_cycle_prec, linearizer, ExplodedMapContext, ExplosionSeries, SeriesOptions};
use siegel::fatou::{FatouCoordinate, FatouOptions, LiftContext, RenormContext};
use siegel::geometry::{Ladder, Radius, RegionParams, DYNAMICS_LADDER};

/// Criteria measured to fail at desk scale; see the README.
const KNOWN_FAILURES: [u32; 3] = [5, 8, 10];

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn golden() -> QuotientSequence {
    QuotientSequence::golden()
}

fn c1() -> Verdict {
    let g = golden();
    let mut worst = f64::NEG_INFINITY;
    let mut cases = 0;
    for n in 2..=8 {
        for a in [Integer::from(1), Integer::from(10), Integer::from(1_000_000)] {
            match make_setup(&g, &g, n, &a, 200) {
                Ok(s) => worst = worst.max(s.dual_gap_log2),
                Err(e) => return verdict(false, format!("n={n} A={a}: {e}")),
            }
            cases += 1;
        }
    }
    verdict(worst < -180.0, format!("{cases} cases, worst relative gap 2^{worst:.1} (need < 2^-180)"))
}

fn c2() -> Verdict {
    let seqs = [
        ("golden", golden()),
        ("silver", QuotientSequence::periodic(&[], &[2]).unwrap()),
        ("alpha0(1;2,4)", build_alpha0(1, &[2, 4]).unwrap()),
    ];
    let mut detail = Vec::new();
    let mut ok = true;
    for (name, s) in &seqs {
        let r = check_determinant(s, 50).unwrap();
        ok &= r.holds;
        detail.push(format!("{name}: {} (exact to k={})", r.holds, r.exact_up_to));
    }
    verdict(ok, detail.join(", "))
}

fn c3() -> Verdict {
    let a = eval_real(&golden(), 200, 128).unwrap().value;
    let lam = expi2pi(&a);
    let lin = linearizer(&lam, 200);
    let r = lin.radius_estimate / 2.0;
    let worst = (0..100)
        .map(|k| lin.conjugacy_residual(&from_c64(Complex64::from_polar(r, 2.0 * PI * k as f64 / 100.0), 128)))
        .fold(0.0, f64::max);
    let l2 = Complex::with_val(128, lam.square_ref());
    let expect = Complex::with_val(128, 1) / (l2 - &lam);
    let c2_err = to_c64(&Complex::with_val(128, lin.coeff(2) - &expect)).norm();
    verdict(
        worst < 1e-12 && c2_err < 1e-20,
        format!("r_hat = {:.4}, worst residual {worst:.1e}, c_2 error {c2_err:.1e}", lin.radius_estimate),
    )
}

fn c4() -> Verdict {
    let g = golden();
    let s = make_setup(&g, &g, 5, &Integer::from(10), 128).unwrap();
    let q = s.q();
    let delta = Complex64::new(s.epsilon(), 0.0).powf(1.0 / q as f64);
    let cyc = explosion_cycle_prec(s.p(), q, delta, SEED_RADIUS, 256).unwrap();
    let inv = cyc.invariance_residual();
    let series = ExplosionSeries::build(s.p(), q, &SeriesOptions::default()).unwrap();
    let ring: Vec<Complex64> = (0..64).map(|k| Complex64::from_polar(0.5 * series.domain_radius(), 0.1 * k as f64)).collect();
    let perm = series.cyclic_residual(&ring);
    let r_hat = linearizer(&expi2pi(&eval_real(&g, 200, 128).unwrap().value), 200).radius_estimate;
    let mut derivs = Vec::new();
    for n in 4..=6 {
        let s = make_setup(&g, &g, n, &Integer::from(10), 128).unwrap();
        derivs.push(leading_derivative(s.p(), s.q()).norm());
    }
    // independent check of the closed form from cycles at small δ
    let fd = chi_prime_estimate(s.p(), q, 0.02).unwrap().norm();
    let fd_ok = (fd / derivs[1] - 1.0).abs() < 1e-2;
    let gaps: Vec<f64> = derivs.iter().map(|d| (d - r_hat).abs()).collect();
    let monotone = gaps.windows(2).all(|w| w[1] <= w[0] * 1.1);
    verdict(
        inv < 1e-10 && perm < 1e-10 && monotone && fd_ok,
        format!(
            "invariance {inv:.1e}, cyclic relation {perm:.1e}, |chi'(0)| n=4..6 = {:.4} {:.4} {:.4} toward r_hat {r_hat:.4}, cycle estimate at n=5 {fd:.4}",
            derivs[0], derivs[1], derivs[2]
        ),
    )
}

fn lift_context() -> LiftContext {
    let g = golden();
    let s = make_setup(&g, &g, 5, &Integer::from(10), 128).unwrap();
    let params = RegionParams::new(&s, Ladder::new(DYNAMICS_FLOOR, DYNAMICS_LADDER).unwrap()).unwrap();
    LiftContext::new(params, ExplodedMapContext::exact(s, &SeriesOptions::default()).unwrap())
}

/// max |F−Z−1| with χ_n replaced by the rescaled linearizer, for comparison.
fn proxy_deviation(pts: &[Complex64]) -> f64 {
    let g = golden();
    let s = make_setup(&g, &g, 5, &Integer::from(10), 128).unwrap();
    let params = RegionParams::new(&s, Ladder::new(DYNAMICS_FLOOR, DYNAMICS_LADDER).unwrap()).unwrap();
    let lin = linearizer(&expi2pi(&eval_real(&g, 200, 128).unwrap().value), 200);
    let l = LiftContext::new(params, ExplodedMapContext::proxy(s, &lin));
    pts.iter().filter_map(|z| l.measure_fn(*z).ok()).map(|v| v.deviation).fold(0.0, f64::max)
}

fn c5() -> Verdict {
    let l = lift_context();
    let pts = l.params.qn_band_sampler(-20.0, 20.0, 100, 5).unwrap();
    let tau1 = l.params.tau(l.params.r(Radius::R1));
    let (mut res, mut fd, mut gd, mut comm) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let mut g_count = 0;
    for z in &pts {
        let f = l.measure_fn(*z).unwrap();
        res = res.max(f.residual);
        fd = fd.max(f.deviation);
        if z.im > tau1 {
            let g = l.measure_gn(*z).unwrap();
            res = res.max(g.residual);
            gd = gd.max(g.deviation);
            comm = comm.max(l.commutation_residual(*z).unwrap());
            g_count += 1;
        }
    }
    let proxy = proxy_deviation(&pts);
    verdict(
        res < 1e-9 && fd < 0.25 && gd < 0.25 && comm < 1e-8,
        format!(
            "root residual {res:.1e}, max|F-Z-1| {fd:.3}, max|G-Z+A+theta| {gd:.3} ({g_count} pts above tau(r1)), commutation {comm:.1e}; proxy-mode max|F-Z-1| {proxy:.3}"
        ),
    )
}

fn c6_7() -> (Verdict, Verdict) {
    let phi = FatouCoordinate::new(lift_context(), FatouOptions::default()).unwrap();
    let anchor = phi.phi(phi.base).unwrap() == phi.base;
    let abel = (0..50)
        .map(|k| {
            let z = Complex64::new(phi.x0 - 0.5 + (k as f64 * 0.37) % 1.0, -18.0 + 56.0 * k as f64 / 49.0);
            phi.abel_residual(z).unwrap()
        })
        .fold(0.0, f64::max);
    let z = Complex64::new(phi.x0 - 2.3, 3.0);
    let mut w = z;
    for _ in 0..3 {
        w = phi.lift.f(w).unwrap();
    }
    let tele = (phi.phi(w).unwrap() - phi.phi(z).unwrap() - 3.0).norm();
    let v6 = verdict(
        anchor && abel < 1e-6 && tele < 3e-6,
        format!("Phi(B)=B {anchor}, Abel residual {abel:.1e}, telescoped {tele:.1e}"),
    );
    let rc = RenormContext::new(phi, None).unwrap();
    let v7 = match rc.rotation_check((-2.0 * PI * 40.0).exp(), 1e-2) {
        Ok(r) => {
            let want = rc.expected_derivative();
            let dm = (r.estimate.norm() - 1.0).abs();
            let da = (r.estimate / want).arg().abs();
            verdict(
                dm < 1e-2 && da < 1e-2,
                format!("R'(0) = {:.5}, modulus error {dm:.1e}, argument error {da:.1e}, ray spread {:.1e}", r.estimate, r.spread),
            )
        }
        Err(e) => verdict(false, e.to_string()),
    };
    (v6, v7)
}

fn c8() -> Verdict {
    let rows = density_experiment(&ExperimentConfig::golden_surrogate()).unwrap();
    let d: Vec<_> = rows.iter().map(|r| r.yn.unwrap().dens).collect();
    let last = d.last().unwrap();
    let bound = 0.5 - ANALYTIC_SLACK - 3.0 * last.stderr;
    let nondecreasing = d.windows(2).all(|w| w[1].value >= w[0].value);
    verdict(
        last.value >= bound && nondecreasing,
        format!("dens_Yn n=4,5,6 = {:.4} {:.4} {:.4} (need >= {bound:.4} at n=6)", d[0].value, d[1].value, d[2].value),
    )
}

fn c9() -> Verdict {
    let l = lift_context();
    let budget = default_budget(l.params.q, &l.dynamics.setup.a_n);
    let rep = inclusion_spot_check(&l.params, &l.dynamics, 1000, budget, 11).unwrap();
    verdict(
        rep.lift_failures == 0 && rep.violations == 0 && rep.max_root_residual < 1e-9,
        format!(
            "{} samples, budget {budget}, lift failures {}, violations {}, root residual {:.1e}, max |z| {:.3} < r0' {}, slowest return {:?}",
            rep.samples,
            rep.lift_failures,
            rep.violations,
            rep.max_root_residual,
            rep.max_orbit_modulus,
            l.params.r(Radius::R0p),
            rep.slowest_return
        ),
    )
}

fn c10() -> Verdict {
    let g = golden();
    let s = make_setup(&g, &g, 5, &Integer::from(10), 128).unwrap();
    let p = RegionParams::new(&s, Ladder::default_for(&s).unwrap()).unwrap();
    let t = 0.5 * (p.r(Radius::R7) + p.r(Radius::R8));
    let arc = p.arc_coverage(t, 0.0, 2.0 * PI, 10_000).unwrap();
    verdict(
        arc.length >= PI * t - 3.0 * arc.stderr,
        format!(
            "t = {t:.4}, length {:.4} ± {:.4} vs pi t = {:.4} (fraction {:.4}, closed form {:.4})",
            arc.length,
            arc.stderr,
            PI * t,
            arc.fraction,
            p.analytic_arc_fraction(t)
        ),
    )
}

fn c11() -> Verdict {
    let cfg = ExperimentConfig {
        a_rule: ARule::Fixed(Integer::from(1)),
        n_values: vec![4, 5, 6],
        samples: 1000,
        orbit: Some(OrbitConfig::default()),
        ..ExperimentConfig::golden_surrogate()
    };
    let rows = density_experiment(&cfg).unwrap();
    let d: Vec<_> = rows.iter().map(|r| r.dens_dn.unwrap()).collect();
    verdict(
        d[2].value >= 0.9,
        format!(
            "dens_Dn n=4,5,6 = {:.4} {:.4} {:.4} (stderr at n=6 {:.1e}), budgets {:?}",
            d[0].value,
            d[1].value,
            d[2].value,
            d[2].stderr,
            rows.iter().map(|r| r.budget.unwrap()).collect::<Vec<_>>()
        ),
    )
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let t = Instant::now();
    let v = f();
    (v, t.elapsed())
}

fn main() {
    let mut results: Vec<(u32, &str, Verdict, Duration, f64)> = Vec::new();
    let mut push = |id, name, (v, d): (Verdict, Duration), limit| results.push((id, name, v, d, limit));
    push(1, "exact arithmetic", timed(c1), 5.0);
    push(2, "convergent determinants", timed(c2), 1.0);
    push(3, "linearizer", timed(c3), 10.0);
    push(4, "explosion", timed(c4), 60.0);
    push(5, "lifts", timed(c5), 120.0);
    let ((v6, v7), d67) = timed(c6_7);
    push(6, "Fatou coordinate", (v6, d67), 120.0);
    push(7, "renormalization rotation", (v7, d67), 300.0);
    push(8, "headline density", timed(c8), 60.0);
    push(9, "inclusion chain", timed(c9), 600.0);
    push(10, "arc length", timed(c10), 5.0);
    push(11, "unperturbed control", timed(c11), 1200.0);

    let mut unexpected = Vec::new();
    for (id, name, v, d, limit) in &results {
        let in_time = d.as_secs_f64() < *limit;
        let pass = v.pass && in_time;
        let tag = match (pass, KNOWN_FAILURES.contains(id)) {
            (true, _) => "PASS",
            (false, true) => "FAIL (known)",
            (false, false) => "FAIL",
        };
        println!("{tag} criterion {id} {name}: {} [{:.2}s / {limit}s]", v.detail, d.as_secs_f64());
        if !pass && !KNOWN_FAILURES.contains(id) {
            unexpected.push(*id);
        }
    }
    let passed = results.iter().filter(|r| r.2.pass && r.3.as_secs_f64() < r.4).count();
    println!("acceptance: {passed}/{} criteria pass", results.len());
    if !unexpected.is_empty() {
        eprintln!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}
