//! Command-line harness: strict `key = value` configs, artifacts written
//! atomically, and a JSON manifest per run.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use clap::{Arg, ArgAction, ArgMatches, Command};
use num_complex::Complex64;
use rug::Integer;
use serde_json::json;

use crate::cfrac::{
    brjuno_sum, build_alpha0, check_determinant, convergents, eval_real, make_setup, PerturbationSetup,
    QuotientSequence,
};
use crate::density::{
    density_experiment, rows_to_csv, siegel_mask, ARule, ExperimentConfig, GridMask, LadderRule, OrbitConfig, Trap,
    Window, ANALYTIC_SLACK,
};
use crate::dynamics::quadratic::expi2pi;
use crate::dynamics::{explosion_cycle_prec, linearizer, ExplodedMapContext, QuadraticMap, SeriesOptions};
use crate::error::{Error, Result};
use crate::fatou::{FatouCoordinate, FatouOptions, LiftContext, RenormContext};
use crate::geometry::{Ladder, Radius, RegionId, RegionParams, DYNAMICS_LADDER, LADDER_NAMES};

/// Exit codes.
pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_NUMERIC: i32 = 2;
pub const EXIT_CHECK: i32 = 3;

/// Floor below r_3 for the dynamics ladder.
pub const DYNAMICS_FLOOR: f64 = 0.383;

type KeySpec = (&'static str, &'static str, &'static str);

const SEQ: KeySpec = ("alpha", "golden", "rotation number: golden, silver, finite:a b.., periodic:pre|per, alpha0:N:i,j, file:PATH");
const THETA: KeySpec = ("theta", "golden", "tail θ, same syntax as alpha");
const N: KeySpec = ("n", "5", "level n");
const AN: KeySpec = ("An", "10", "large quotient A_n (integer, or b^e)");
const PREC: KeySpec = ("precision", "128", "working precision in bits");
const SEED: KeySpec = ("seed", "1", "master seed");
const MODE: KeySpec = ("mode", "exact", "χ_n mode: exact or proxy");

fn keys(sub: &str) -> Vec<KeySpec> {
    match sub {
        "approximants" => vec![SEQ, ("k", "10", "number of convergents")],
        "setup" => vec![SEQ, THETA, N, AN, ("precision", "200", "working precision in bits")],
        "brjuno" => vec![SEQ, ("k", "20", "number of terms")],
        "alpha0" => vec![("N", "1", "base quotient"), ("idx", "2,4", "indices n_j"), ("k", "50", "determinant depth")],
        "linearizer" => vec![SEQ, ("order", "200", "series order"), PREC],
        "cycle" => vec![SEQ, THETA, N, AN, ("precision", "256", "working precision in bits")],
        "fn-check" => vec![SEQ, THETA, N, AN, PREC, MODE, ("samples", "100", "sample count"), SEED],
        "geometry-check" => vec![
            SEQ,
            THETA,
            N,
            AN,
            PREC,
            ("ladder", "default", "default, dynamics, geometric:floor,margin,top or explicit:floor,r3,..,r0'"),
            ("samples", "100000", "monte-carlo samples of the annulus"),
            ("arc_samples", "10000", "angular samples on the mid circle"),
            SEED,
        ],
        "fatou-check" => vec![
            SEQ,
            THETA,
            N,
            AN,
            PREC,
            MODE,
            ("samples", "100", "samples of Q_n(a_n)"),
            ("y_min", "-20", "lower edge of the sampled band"),
            ("y_max", "20", "upper edge of the sampled band"),
            ("height", "40", "Im of the rotation-check points"),
            SEED,
        ],
        "density" => vec![
            SEQ,
            THETA,
            ("n", "4,5,6", "levels"),
            ("An", "", "fixed A_n; overrides An_base"),
            ("An_base", "2", "A_n = ceil(base^q_n)"),
            ("ladder", "default", "as for geometry-check"),
            ("samples", "100000", "samples of the annulus"),
            SEED,
            PREC,
            ("orbit", "false", "also estimate dens of the perturbed Siegel disk"),
            ("orbit_samples", "10000", "samples of the linearized disk"),
            ("budget", "", "orbit budget; default 10 q^2 (A+1)"),
            ("disk_fraction", "0.5", "U radius as a fraction of the conformal radius"),
            ("trap_resolution", "512", "trap mask resolution"),
            ("trap_budget", "10000", "trap mask budget"),
        ],
        "render" => vec![
            ("mask", "", "mask file; empty computes the Siegel disk mask of alpha"),
            ("image", "mask.ppm", "output image name"),
            SEQ,
            ("resolution", "512", "pixels per side"),
            ("budget", "10000", "orbit budget"),
            ("half_width", "0.8", "window half-width around 0"),
        ],
        _ => vec![],
    }
}

pub const SUBCOMMANDS: [&str; 11] = [
    "approximants",
    "setup",
    "brjuno",
    "alpha0",
    "linearizer",
    "cycle",
    "fn-check",
    "geometry-check",
    "fatou-check",
    "density",
    "render",
];

fn command() -> Command {
    let mut cmd = Command::new("siegel")
        .about("Numerical experiments on perturbed Siegel disks")
        .subcommand_required(true)
        .arg(Arg::new("config").long("config").global(true).help("key = value config file, or a manifest.json"))
        .arg(Arg::new("out").long("out").global(true).default_value("out").help("output directory"))
        .arg(Arg::new("check").long("check").global(true).action(ArgAction::SetTrue).help("exit 3 on acceptance violation"))
        .arg(
            Arg::new("threads")
                .long("threads")
                .global(true)
                .value_parser(clap::value_parser!(usize))
                .help("worker threads; default all cores"),
        );
    for sub in SUBCOMMANDS {
        let mut sc = Command::new(sub);
        for (k, d, h) in keys(sub) {
            let help = if d.is_empty() { h.to_string() } else { format!("{h} [default: {d}]") };
            sc = sc.arg(Arg::new(k).long(k).help(help));
        }
        cmd = cmd.subcommand(sc);
    }
    cmd
}

/// Resolved string parameters of one run.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Params(BTreeMap<String, String>);

impl Params {
    fn raw(&self, k: &str) -> Result<&str> {
        self.0.get(k).map(String::as_str).ok_or_else(|| Error::Config(format!("missing key '{k}'")))
    }

    fn parse<T: FromStr>(&self, k: &str) -> Result<T> {
        let v = self.raw(k)?;
        v.parse().map_err(|_| Error::Config(format!("bad value for '{k}': '{v}'")))
    }

    fn opt<T: FromStr>(&self, k: &str) -> Result<Option<T>> {
        match self.raw(k)? {
            "" => Ok(None),
            _ => self.parse(k).map(Some),
        }
    }

    fn seq(&self, k: &str) -> Result<QuotientSequence> {
        parse_sequence(self.raw(k)?)
    }

    fn integer(&self, k: &str) -> Result<Integer> {
        parse_integer(self.raw(k)?)
    }

    fn list(&self, k: &str) -> Result<Vec<usize>> {
        self.raw(k)?
            .split(',')
            .map(|t| t.trim().parse().map_err(|_| Error::Config(format!("bad list for '{k}'"))))
            .collect()
    }

    pub fn get(&self, k: &str) -> Option<&str> {
        self.0.get(k).map(String::as_str)
    }
}

/// Integers as decimal or `b^e`.
pub fn parse_integer(s: &str) -> Result<Integer> {
    let bad = || Error::Config(format!("bad integer '{s}'"));
    match s.split_once('^') {
        Some((b, e)) => {
            let b: u32 = b.trim().parse().map_err(|_| bad())?;
            let e: u32 = e.trim().parse().map_err(|_| bad())?;
            Ok(Integer::from(Integer::u_pow_u(b, e)))
        }
        None => Integer::from_str(s.trim()).map_err(|_| bad()),
    }
}

fn u64s(s: &str) -> Result<Vec<u64>> {
    s.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| t.parse().map_err(|_| Error::Config(format!("bad quotient '{t}'"))))
        .collect()
}

/// Presets and inline forms of a quotient sequence.
pub fn parse_sequence(s: &str) -> Result<QuotientSequence> {
    let s = s.trim();
    match s {
        "golden" => return Ok(QuotientSequence::golden()),
        "silver" => return QuotientSequence::periodic(&[], &[2]),
        _ => {}
    }
    let (kind, rest) = s.split_once(':').ok_or_else(|| Error::Config(format!("unknown sequence '{s}'")))?;
    match kind {
        "finite" => QuotientSequence::finite(&u64s(rest)?),
        "periodic" => {
            let (pre, per) = rest.split_once('|').unwrap_or(("", rest));
            QuotientSequence::periodic(&u64s(pre)?, &u64s(per)?)
        }
        "alpha0" => {
            let (n, idx) = rest.split_once(':').unwrap_or((rest, ""));
            let n = n.parse().map_err(|_| Error::Config(format!("bad N '{n}'")))?;
            let idx: Vec<usize> = u64s(idx)?.into_iter().map(|i| i as usize).collect();
            build_alpha0(n, &idx)
        }
        "file" => QuotientSequence::from_str(&fs::read_to_string(rest)?),
        _ => Err(Error::Config(format!("unknown sequence kind '{kind}'"))),
    }
}

pub fn parse_ladder(s: &str, setup: &PerturbationSetup) -> Result<Ladder> {
    let nums = |t: &str| -> Result<Vec<f64>> {
        t.split(',').map(|x| x.trim().parse().map_err(|_| Error::Config(format!("bad ladder '{s}'")))).collect()
    };
    match s.split_once(':') {
        None if s == "default" => Ladder::default_for(setup),
        None if s == "dynamics" => Ladder::new(DYNAMICS_FLOOR, DYNAMICS_LADDER),
        Some(("geometric", t)) => match nums(t)?[..] {
            [f, m, top] => Ladder::geometric(f, m, top),
            _ => Err(Error::Config("geometric ladder needs floor,margin,top".into())),
        },
        Some(("explicit", t)) => {
            let v = nums(t)?;
            if v.len() != 14 {
                return Err(Error::Config("explicit ladder needs a floor and 13 radii".into()));
            }
            let mut radii = [0.0; 13];
            radii.copy_from_slice(&v[1..]);
            Ladder::new(v[0], radii)
        }
        _ => Err(Error::Config(format!("unknown ladder '{s}'"))),
    }
}

/// Strict `key = value` parsing; `#` starts a comment.
pub fn parse_config(text: &str, allowed: &[KeySpec]) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Config(format!("line {}: expected key = value", i + 1)))?;
        let (k, v) = (k.trim(), v.trim());
        if !allowed.iter().any(|a| a.0 == k) {
            return Err(Error::Config(format!("line {}: unknown key '{k}'", i + 1)));
        }
        if out.insert(k.to_string(), v.to_string()).is_some() {
            return Err(Error::Config(format!("line {}: duplicate key '{k}'", i + 1)));
        }
    }
    Ok(out)
}

fn load_config(path: &Path, sub: &str, allowed: &[KeySpec]) -> Result<BTreeMap<String, String>> {
    let text = fs::read_to_string(path)?;
    if !text.trim_start().starts_with('{') {
        return parse_config(&text, allowed);
    }
    let v: serde_json::Value = serde_json::from_str(&text).map_err(|e| Error::Config(format!("manifest: {e}")))?;
    if v["subcommand"] != sub {
        return Err(Error::Config(format!("manifest is for '{}', not '{sub}'", v["subcommand"].as_str().unwrap_or("?"))));
    }
    let params = v["params"].as_object().ok_or_else(|| Error::Config("manifest without params".into()))?;
    let mut out = BTreeMap::new();
    for (k, v) in params {
        if !allowed.iter().any(|a| a.0 == k) {
            return Err(Error::Config(format!("unknown key '{k}' in manifest")));
        }
        let v = v.as_str().ok_or_else(|| Error::Config(format!("manifest value of '{k}' is not a string")))?;
        out.insert(k.clone(), v.to_string());
    }
    Ok(out)
}

/// Defaults, then the config file, then flags.
fn resolve(sub: &str, m: &ArgMatches, config: Option<&Path>) -> Result<Params> {
    let allowed = keys(sub);
    let mut map: BTreeMap<String, String> = allowed.iter().map(|(k, d, _)| (k.to_string(), d.to_string())).collect();
    if let Some(p) = config {
        map.extend(load_config(p, sub, &allowed)?);
    }
    for (k, _, _) in &allowed {
        if let Some(v) = m.get_one::<String>(k) {
            map.insert(k.to_string(), v.clone());
        }
    }
    Ok(Params(map))
}

/// What a subcommand produced.
#[derive(Debug, Default)]
pub struct Outcome {
    pub artifacts: Vec<(String, Vec<u8>)>,
    /// One line per check, with its verdict.
    pub checks: Vec<(String, bool)>,
    pub summary: Vec<String>,
}

impl Outcome {
    fn file(&mut self, name: &str, data: impl Into<Vec<u8>>) {
        self.artifacts.push((name.to_string(), data.into()));
    }
    fn check(&mut self, what: impl Into<String>, ok: bool) {
        self.checks.push((what.into(), ok));
    }
    fn note(&mut self, s: impl Into<String>) {
        self.summary.push(s.into());
    }
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.1)
    }
}

fn setup_of(p: &Params) -> Result<PerturbationSetup> {
    make_setup(&p.seq("alpha")?, &p.seq("theta")?, p.parse("n")?, &p.integer("An")?, p.parse("precision")?)
}

/// Exact χ_n, or the proxy built from the linearizer of α.
pub fn dynamics_context(setup: PerturbationSetup, mode: &str) -> Result<ExplodedMapContext> {
    match mode {
        "exact" => ExplodedMapContext::exact(setup, &SeriesOptions::default()),
        "proxy" => {
            let a = eval_real(&setup.alpha, 200, setup.precision_bits)?.value;
            let lin = linearizer(&expi2pi(&a), 200);
            Ok(ExplodedMapContext::proxy(setup, &lin))
        }
        _ => Err(Error::Config(format!("unknown mode '{mode}'"))),
    }
}

fn csv(header: &str, rows: impl IntoIterator<Item = String>) -> String {
    let mut s = format!("{header}\n");
    for r in rows {
        s.push_str(&r);
        s.push('\n');
    }
    s
}

fn approximants(p: &Params) -> Result<Outcome> {
    let seq = p.seq("alpha")?;
    let k: usize = p.parse("k")?;
    let cs = convergents(&seq, k)?;
    let qs = seq.quotients(k)?;
    let mut o = Outcome::default();
    o.file(
        "approximants.csv",
        csv("k,a_k,p_k,q_k", cs.iter().zip(&qs).map(|(c, a)| format!("{},{},{},{}", c.k, a.exact().unwrap(), c.p, c.q))),
    );
    let det = check_determinant(&seq, k)?;
    o.check(format!("determinant identity for k <= {k}"), det.holds);
    Ok(o)
}

fn setup_cmd(p: &Params) -> Result<Outcome> {
    let mut o = Outcome::default();
    let s = setup_of(p)?;
    let gap_ok = s.dual_gap_log2 <= -((s.precision_bits - 20) as f64);
    let v = json!({
        "n": s.n, "A_n": s.a_n.to_string(), "p_n": s.p_n.to_string(), "q_n": s.q_n.to_string(),
        "p_n_minus_1": s.p_nm1.to_string(), "q_n_minus_1": s.q_nm1.to_string(),
        "alpha_n": s.alpha_n.to_string_radix(10, Some(40)),
        "epsilon_n": s.epsilon_n.to_string_radix(10, Some(40)),
        "dual_gap_log2": if s.dual_gap_log2.is_finite() { json!(s.dual_gap_log2) } else { json!("-inf") },
        "precision_bits": s.precision_bits,
    });
    o.file("setup.json", serde_json::to_string_pretty(&v).unwrap() + "\n");
    o.note(format!("q_n = {}, epsilon_n = {:e}", s.q_n, s.epsilon()));
    o.check("dual evaluation of epsilon_n agrees", gap_ok);
    Ok(o)
}

fn brjuno(p: &Params) -> Result<Outcome> {
    let b = brjuno_sum(&p.seq("alpha")?, p.parse("k")?)?;
    let mut o = Outcome::default();
    let mut acc = 0.0;
    o.file(
        "brjuno.csv",
        csv(
            "k,ln_term,partial_sum",
            b.ln_terms.iter().enumerate().map(|(i, t)| {
                acc += t;
                format!("{},{t},{acc}", i + 1)
            }),
        ),
    );
    o.note(format!("B_{} = {}", b.k, b.value.to_f64()));
    Ok(o)
}

fn alpha0(p: &Params) -> Result<Outcome> {
    let idx: Vec<usize> = p.list("idx")?;
    let seq = build_alpha0(p.parse("N")?, &idx)?;
    let k: usize = p.parse("k")?;
    let det = check_determinant(&seq, k)?;
    let mut o = Outcome::default();
    let qs = seq.quotients(k)?;
    o.file(
        "alpha0.csv",
        csv(
            "k,a_k",
            qs.iter().enumerate().map(|(i, a)| match a.exact() {
                Some(a) => format!("{},{a}", i + 1),
                None => format!("{},exp({})", i + 1, a.ln()),
            }),
        ),
    );
    o.note(format!("exact up to k = {}, residue primes {:?}", det.exact_up_to, det.moduli));
    o.check(format!("determinant identity for k <= {k}"), det.holds);
    Ok(o)
}

fn linearizer_cmd(p: &Params) -> Result<Outcome> {
    let prec: u32 = p.parse("precision")?;
    let a = eval_real(&p.seq("alpha")?, 200, prec)?.value;
    let lam = expi2pi(&a);
    let lin = linearizer(&lam, p.parse("order")?);
    let mut o = Outcome::default();
    o.file(
        "linearizer.csv",
        csv(
            "m,re,im,abs",
            lin.coeffs.iter().enumerate().map(|(m, c)| {
                let z = crate::dynamics::quadratic::to_c64(c);
                format!("{m},{:e},{:e},{:e}", z.re, z.im, z.norm())
            }),
        ),
    );
    let r = lin.radius_estimate / 2.0;
    let worst = (0..100)
        .map(|k| {
            let z = Complex64::from_polar(r, 2.0 * std::f64::consts::PI * k as f64 / 100.0);
            lin.conjugacy_residual(&crate::dynamics::quadratic::from_c64(z, prec))
        })
        .fold(0.0, f64::max);
    o.note(format!("radius estimate {}, worst residual {worst:e}", lin.radius_estimate));
    o.check("conjugacy residual < 1e-12 at half the radius", worst < 1e-12);
    Ok(o)
}

fn cycle_cmd(p: &Params) -> Result<Outcome> {
    let s = setup_of(p)?;
    let q = s.q();
    let delta = Complex64::new(s.epsilon(), 0.0).powf(1.0 / q as f64);
    let c = explosion_cycle_prec(s.p(), q, delta, crate::dynamics::explosion::SEED_RADIUS, s.precision_bits)?;
    let res = c.invariance_residual();
    let mut o = Outcome::default();
    o.file(
        "cycle.csv",
        csv("j,re,im", c.points64().iter().enumerate().map(|(j, z)| format!("{j},{:e},{:e}", z.re, z.im))),
    );
    o.note(format!("delta = {delta}, invariance residual {res:e}"));
    o.check("cycle invariance residual < 1e-10", res < 1e-10);
    Ok(o)
}

fn fn_check(p: &Params) -> Result<Outcome> {
    let s = setup_of(p)?;
    let eps = s.epsilon().abs();
    let q = s.q();
    let ctx = dynamics_context(s, p.raw("mode")?)?;
    let r = 0.9 * ctx.domain_radius().min(1.0);
    let pts = crate::geometry::annulus_sampler(0.0, r, p.parse("samples")?, p.parse("seed")?).points;
    let mut o = Outcome::default();
    let mut rows = Vec::new();
    let mut worst: f64 = 0.0;
    for z in &pts {
        let v = ctx.f_n(*z)?;
        worst = worst.max(v.residual);
        rows.push(format!("{:e},{:e},{:e},{:e},{:e}", z.re, z.im, v.z.re, v.z.im, v.residual));
    }
    o.file("fn_check.csv", csv("re,im,f_re,f_im,residual", rows));
    o.note(format!("mode {}, chi'(0) = {}, worst residual {worst:e}", ctx.mode_name(), ctx.chi_prime_zero()));
    o.check("conjugacy residual < 1e-9", worst < 1e-9);
    if ctx.mode_name() == "exact" {
        let cyc = ctx.cycle(256)?;
        let dev = cyc.points.iter().map(|z| (z.norm().powi(q as i32) / eps - 1.0).abs()).fold(0.0, f64::max);
        o.note(format!("cycle |z|^q/|eps| deviation {dev:e}, multiplier {}", cyc.multiplier));
        o.check("cycle lies on |z|^q = |eps_n|", dev < 1e-6);
    }
    Ok(o)
}

fn geometry_check(p: &Params) -> Result<Outcome> {
    let s = setup_of(p)?;
    let params = RegionParams::new(&s, parse_ladder(p.raw("ladder")?, &s)?)?;
    let (r7, r8) = (params.r(Radius::R7), params.r(Radius::R8));
    let seed: u64 = p.parse("seed")?;
    let u = crate::geometry::annulus_sampler(r7, r8, p.parse("samples")?, seed);
    let d = crate::density::dens_monte_carlo(&u, |z| params.contains(RegionId::Yn(Radius::R8, Radius::R7), z))?;
    let t = 0.5 * (r7 + r8);
    let arc = params.arc_coverage(t, 0.0, 2.0 * std::f64::consts::PI, p.parse("arc_samples")?)?;
    let mut o = Outcome::default();
    let ladder: serde_json::Map<String, serde_json::Value> = LADDER_NAMES
        .iter()
        .zip(params.ladder.radii)
        .map(|(k, r)| (k.to_string(), json!(r)))
        .collect();
    let v = json!({
        "q_n": params.q, "epsilon_n": params.epsilon, "floor": params.ladder.floor, "ladder": ladder,
        "dens_Yn": d.value, "stderr_Yn": d.stderr, "dens_Yn_analytic": params.analytic_density(),
        "arc_t": t, "arc_length": arc.length, "arc_stderr": arc.stderr, "arc_fraction": arc.fraction,
        "arc_fraction_analytic": params.analytic_arc_fraction(t),
    });
    o.file("geometry.json", serde_json::to_string_pretty(&v).unwrap() + "\n");
    o.note(format!("dens_Yn = {:.4} ± {:.4}, arc fraction {:.4}", d.value, d.stderr, arc.fraction));
    o.check("dens_Yn >= 1/2 - slack - 3 sigma", d.value >= 0.5 - ANALYTIC_SLACK - 3.0 * d.stderr);
    o.check("arc length >= pi t - 3 sigma", arc.length >= std::f64::consts::PI * t - 3.0 * arc.stderr);
    Ok(o)
}

fn fatou_check(p: &Params) -> Result<Outcome> {
    let s = setup_of(p)?;
    let params = RegionParams::new(&s, Ladder::new(DYNAMICS_FLOOR, DYNAMICS_LADDER)?)?;
    let ctx = dynamics_context(s, p.raw("mode")?)?;
    let lift = LiftContext::new(params, ctx);
    let pts = lift.params.qn_band_sampler(p.parse("y_min")?, p.parse("y_max")?, p.parse("samples")?, p.parse("seed")?)?;
    let tau1 = lift.params.tau(lift.params.r(Radius::R1));
    let mut o = Outcome::default();
    let mut rows = Vec::new();
    let (mut f_dev, mut g_dev, mut res, mut comm) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for z in &pts {
        let f = lift.measure_fn(*z)?;
        f_dev = f_dev.max(f.deviation);
        res = res.max(f.residual);
        let (gd, c) = if z.im > tau1 {
            let g = lift.measure_gn(*z)?;
            g_dev = g_dev.max(g.deviation);
            res = res.max(g.residual);
            let c = lift.commutation_residual(*z)?;
            comm = comm.max(c);
            (g.deviation.to_string(), c.to_string())
        } else {
            (String::new(), String::new())
        };
        rows.push(format!("{:e},{:e},{},{},{},{}", z.re, z.im, f.deviation, f.residual, gd, c));
    }
    o.file("lifts.csv", csv("re,im,F_deviation,residual,G_deviation,commutation", rows));
    o.check("lift conjugacy residual < 1e-9", res < 1e-9);
    o.check("|F(Z)-Z-1| < 1/4", f_dev < 0.25);
    o.check("|G(Z)-Z+(A+theta)| < 1/4 above tau(r1)", g_dev < 0.25);
    o.check("commutation residual < 1e-8", comm < 1e-8);

    let phi = FatouCoordinate::new(lift, FatouOptions::default())?;
    let anchor_ok = phi.phi(phi.base)? == phi.base;
    let mut abel: f64 = 0.0;
    for k in 0..50 {
        let z = Complex64::new(phi.x0 - 0.5 + (k as f64 * 0.37) % 1.0, -18.0 + 56.0 * k as f64 / 49.0);
        abel = abel.max(phi.abel_residual(z)?);
    }
    let z = Complex64::new(phi.x0 - 2.3, 3.0);
    let mut w = z;
    for _ in 0..3 {
        w = phi.lift.f(w)?;
    }
    let tele = (phi.phi(w)? - phi.phi(z)? - 3.0).norm();
    o.check("Phi(B) = B", anchor_ok);
    o.check("Abel residual < 1e-6", abel < 1e-6);
    o.check("telescoped 3-step error < 3e-6", tele < 3e-6);

    let height: f64 = p.parse("height")?;
    let rc = RenormContext::new(phi, None)?;
    let rot = rc.rotation_check((-2.0 * std::f64::consts::PI * height).exp(), 1e-2)?;
    let want = rc.expected_derivative();
    let (dm, da) = ((rot.estimate.norm() - 1.0).abs(), (rot.estimate / want).arg().abs());
    let v = json!({
        "kappa": [rc.phi.kappa.re, rc.phi.kappa.im], "multiplier": [rc.phi.multiplier.re, rc.phi.multiplier.im],
        "fit_residual": rc.phi.fit_residual, "abel_worst": abel, "telescope_error": tele,
        "F_deviation": f_dev, "G_deviation": g_dev, "commutation_worst": comm,
        "rho_n": rc.rho_n, "Z_n": [rc.z_n.re, rc.z_n.im],
        "rotation_estimate": [rot.estimate.re, rot.estimate.im], "rotation_spread": rot.spread,
        "modulus_error": dm, "argument_error": da,
    });
    o.file("fatou.json", serde_json::to_string_pretty(&v).unwrap() + "\n");
    o.note(format!("R'(0) = {} (expected {want}), spread {:e}", rot.estimate, rot.spread));
    o.check("renormalized rotation within 1e-2", dm < 1e-2 && da < 1e-2);
    Ok(o)
}

fn experiment_config(p: &Params) -> Result<ExperimentConfig> {
    let a_rule = match p.opt::<String>("An")? {
        Some(a) => ARule::Fixed(parse_integer(&a)?),
        None => ARule::Power(p.parse("An_base")?),
    };
    let ladder = match p.raw("ladder")? {
        "default" => LadderRule::Default,
        "dynamics" => LadderRule::Explicit(Ladder::new(DYNAMICS_FLOOR, DYNAMICS_LADDER)?),
        other => {
            // explicit ladders do not depend on the setup
            let dummy = make_setup(&QuotientSequence::golden(), &QuotientSequence::golden(), 2, &Integer::from(2), 64)?;
            LadderRule::Explicit(parse_ladder(other, &dummy)?)
        }
    };
    let orbit = if p.parse::<bool>("orbit")? {
        Some(OrbitConfig {
            disk_fraction: p.parse("disk_fraction")?,
            budget: p.opt("budget")?,
            samples: p.parse("orbit_samples")?,
            trap_resolution: p.parse("trap_resolution")?,
            trap_budget: p.parse("trap_budget")?,
        })
    } else {
        None
    };
    Ok(ExperimentConfig {
        alpha: p.seq("alpha")?,
        theta: p.seq("theta")?,
        n_values: p.list("n")?,
        a_rule,
        ladder,
        samples: p.parse("samples")?,
        seed: p.parse("seed")?,
        precision_bits: p.parse("precision")?,
        orbit,
    })
}

fn density(p: &Params) -> Result<Outcome> {
    let cfg = experiment_config(p)?;
    let rows = density_experiment(&cfg)?;
    let mut o = Outcome::default();
    o.file("density.csv", rows_to_csv(&rows));
    let yn: Vec<_> = rows.iter().filter_map(|r| r.yn.map(|y| y.dens)).collect();
    if let Some(last) = yn.last() {
        o.check(
            "dens_Yn >= 1/2 - slack - 3 sigma at the largest n",
            last.value >= 0.5 - ANALYTIC_SLACK - 3.0 * last.stderr,
        );
        o.check(
            "dens_Yn non-decreasing in n",
            yn.windows(2).all(|w| w[1].value >= w[0].value - 3.0 * (w[0].stderr + w[1].stderr)),
        );
    }
    for r in &rows {
        o.note(format!(
            "n={} q={} dens_Yn={} dens_Dn={}",
            r.n,
            r.q_n,
            r.yn.map_or("-".into(), |y| format!("{:.4}", y.dens.value)),
            r.dens_dn.map_or("-".into(), |d| format!("{:.4}", d.value))
        ));
    }
    Ok(o)
}

fn render(p: &Params) -> Result<Outcome> {
    let mut o = Outcome::default();
    let mask = match p.raw("mask")? {
        "" => {
            let a = eval_real(&p.seq("alpha")?, 200, 128)?.value;
            let n: usize = p.parse("resolution")?;
            let w = Window::square(Complex64::new(0.0, 0.0), p.parse("half_width")?);
            let m = siegel_mask(&QuadraticMap::new(a), Trap::Disk(2.0), w, n, n, p.parse("budget")?)?;
            o.file("mask.txt", m.to_text());
            m
        }
        path => GridMask::from_text(&fs::read_to_string(path)?)?,
    };
    let image = p.raw("image")?.to_string();
    o.file(&image, mask.to_ppm());
    let w = &mask.window;
    o.file(
        &format!("{image}.txt"),
        format!(
            "window center {} {}\nhalf widths {} {}\nresolution {} {}\nbudget {}\nrule {}\ninside pixels {}\narea {}\n",
            w.center.re,
            w.center.im,
            w.half_x,
            w.half_y,
            mask.nx,
            mask.ny,
            mask.budget,
            mask.rule,
            mask.inside_count(),
            mask.area()
        ),
    );
    o.note(format!("{} inside pixels, area {}", mask.inside_count(), mask.area()));
    Ok(o)
}

fn dispatch(sub: &str, p: &Params) -> Result<Outcome> {
    match sub {
        "approximants" => approximants(p),
        "setup" => setup_cmd(p),
        "brjuno" => brjuno(p),
        "alpha0" => alpha0(p),
        "linearizer" => linearizer_cmd(p),
        "cycle" => cycle_cmd(p),
        "fn-check" => fn_check(p),
        "geometry-check" => geometry_check(p),
        "fatou-check" => fatou_check(p),
        "density" => density(p),
        "render" => render(p),
        _ => Err(Error::Config(format!("unknown subcommand '{sub}'"))),
    }
}

/// Writes through a temporary file in the same directory, then renames.
pub fn write_atomic(dir: &Path, name: &str, data: &[u8]) -> Result<()> {
    let tmp = dir.join(format!(".{name}.tmp-{}", std::process::id()));
    fs::write(&tmp, data)?;
    fs::rename(&tmp, dir.join(name))?;
    Ok(())
}

fn exit_code(e: &Error) -> i32 {
    if e.is_input_error() {
        EXIT_INPUT
    } else {
        EXIT_NUMERIC
    }
}

/// Runs one command line and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let m = match command().try_get_matches_from(argv) {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    let (sub, sm) = m.subcommand().expect("subcommand required");
    let out = PathBuf::from(sm.get_one::<String>("out").expect("defaulted"));
    let check = sm.get_flag("check");
    let config = sm.get_one::<String>("config").map(PathBuf::from);
    if let Some(&t) = sm.get_one::<usize>("threads") {
        // fails only if a pool already exists, which is harmless
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    let params = match resolve(sub, sm, config.as_deref()) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_INPUT;
        }
    };
    let start = Instant::now();
    let outcome = match dispatch(sub, &params) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_code(&e);
        }
    };
    let wall = start.elapsed().as_secs_f64();
    for s in &outcome.summary {
        eprintln!("{s}");
    }
    for (what, ok) in &outcome.checks {
        eprintln!("{} {what}", if *ok { "PASS" } else { "FAIL" });
    }
    if check && !outcome.passed() {
        eprintln!("check failed; no artifacts written");
        return EXIT_CHECK;
    }
    let manifest = json!({
        "subcommand": sub,
        "params": params.0,
        "version": env!("CARGO_PKG_VERSION"),
        "seed": params.get("seed"),
        "threads": rayon::current_num_threads(),
        "wall_time_s": wall,
        "artifacts": outcome.artifacts.iter().map(|a| a.0.clone()).collect::<Vec<_>>(),
        "checks": outcome.checks.iter().map(|(w, ok)| json!({"check": w, "passed": ok})).collect::<Vec<_>>(),
    });
    let written = fs::create_dir_all(&out).map_err(Error::from).and_then(|_| {
        for (name, data) in &outcome.artifacts {
            write_atomic(&out, name, data)?;
        }
        write_atomic(&out, "manifest.json", (serde_json::to_string_pretty(&manifest).unwrap() + "\n").as_bytes())
    });
    if let Err(e) = written {
        eprintln!("error: {e}");
        return EXIT_INPUT;
    }
    EXIT_OK
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strict_config() {
        let allowed = keys("approximants");
        let m = parse_config("alpha = golden # preset\n\nk = 7\n", &allowed).unwrap();
        assert_eq!(m["k"], "7");
        assert!(parse_config("kk = 7", &allowed).is_err());
        assert!(parse_config("k = 1\nk = 2", &allowed).is_err());
        assert!(parse_config("k 7", &allowed).is_err());
    }

    #[test]
    fn sequences_and_integers() {
        assert_eq!(parse_sequence("golden").unwrap(), QuotientSequence::golden());
        assert_eq!(parse_sequence("periodic:|1").unwrap(), QuotientSequence::golden());
        assert_eq!(parse_sequence("finite:1,2 3").unwrap(), QuotientSequence::finite(&[1, 2, 3]).unwrap());
        assert!(parse_sequence("bronze").is_err());
        assert_eq!(parse_integer("10^6").unwrap(), 1_000_000);
        assert_eq!(parse_integer("42").unwrap(), 42);
    }

    #[test]
    fn every_subcommand_has_keys() {
        for s in SUBCOMMANDS {
            assert!(!keys(s).is_empty(), "{s}");
        }
        command().debug_assert();
    }
}
