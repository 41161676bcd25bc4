//! Siegel-disk masks, area densities and the density experiments.

use std::f64::consts::PI;
use std::fmt::Write as _;

use num_complex::Complex64;
use rayon::prelude::*;
use rug::ops::Pow;
use rug::{Float, Integer};

use crate::cfrac::{eval_real, make_setup, PerturbationSetup, QuotientSequence};
use crate::dynamics::quadratic::expi2pi;
use crate::dynamics::{linearizer, ExplodedMapContext, LinearizerSeries, QuadraticMap};
use crate::error::{Error, Result};
use crate::geometry::{annulus_sampler, Ladder, Radius, RegionId, RegionParams, SampleSet};

/// Analytic slack on the half-density bound at desk scale.
pub const ANALYTIC_SLACK: f64 = 0.05;

/// Axis-aligned window: center and half-widths.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Window {
    pub center: Complex64,
    pub half_x: f64,
    pub half_y: f64,
}

impl Window {
    pub fn square(center: Complex64, half: f64) -> Self {
        Window { center, half_x: half, half_y: half }
    }
}

/// How the orbit of a pixel is confined.
#[derive(Clone, Copy, Debug)]
pub enum Trap<'a> {
    Disk(f64),
    /// A previous mask, dilated by one pixel.
    Mask(&'a GridMask),
}

/// A membership raster; pixel (i, j) is column i, row j, row 0 at the bottom.
#[derive(Clone, Debug, PartialEq)]
pub struct GridMask {
    pub window: Window,
    pub nx: usize,
    pub ny: usize,
    pub bits: Vec<bool>,
    pub budget: u64,
    /// How membership was decided.
    pub rule: String,
}

impl GridMask {
    pub fn pixel_center(&self, i: usize, j: usize) -> Complex64 {
        let w = &self.window;
        Complex64::new(
            w.center.re - w.half_x + (i as f64 + 0.5) * 2.0 * w.half_x / self.nx as f64,
            w.center.im - w.half_y + (j as f64 + 0.5) * 2.0 * w.half_y / self.ny as f64,
        )
    }

    fn pixel_of(&self, z: Complex64) -> Option<(usize, usize)> {
        let w = &self.window;
        let fx = (z.re - (w.center.re - w.half_x)) / (2.0 * w.half_x) * self.nx as f64;
        let fy = (z.im - (w.center.im - w.half_y)) / (2.0 * w.half_y) * self.ny as f64;
        (fx >= 0.0 && fy >= 0.0 && fx < self.nx as f64 && fy < self.ny as f64).then_some((fx as usize, fy as usize))
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.bits[j * self.nx + i]
    }

    /// Membership of the pixel containing z.
    pub fn contains(&self, z: Complex64) -> bool {
        self.pixel_of(z).is_some_and(|(i, j)| self.get(i, j))
    }

    /// Membership of the pixel containing z or any of its 8 neighbours.
    pub fn contains_dilated(&self, z: Complex64) -> bool {
        let Some((i, j)) = self.pixel_of(z) else { return false };
        (i.saturating_sub(1)..=(i + 1).min(self.nx - 1))
            .any(|a| (j.saturating_sub(1)..=(j + 1).min(self.ny - 1)).any(|b| self.get(a, b)))
    }

    pub fn inside_count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn pixel_area(&self) -> f64 {
        4.0 * self.window.half_x * self.window.half_y / (self.nx * self.ny) as f64
    }

    pub fn area(&self) -> f64 {
        self.inside_count() as f64 * self.pixel_area()
    }

    /// Text form: a header line, then one row per line of '0'/'1', top row first.
    pub fn to_text(&self) -> String {
        let w = &self.window;
        let mut s = format!(
            "mask {} {} {} {} {} {} {} {}\n",
            self.nx, self.ny, w.center.re, w.center.im, w.half_x, w.half_y, self.budget, self.rule.replace(' ', "_")
        );
        for j in (0..self.ny).rev() {
            s.extend((0..self.nx).map(|i| if self.get(i, j) { '1' } else { '0' }));
            s.push('\n');
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |m: &str| Error::InvalidInput(format!("malformed mask: {m}"));
        let mut lines = text.lines();
        let head: Vec<&str> = lines.next().ok_or_else(|| bad("empty"))?.split_whitespace().collect();
        if head.len() != 9 || head[0] != "mask" {
            return Err(bad("header"));
        }
        let num = |k: usize| head[k].parse::<f64>().map_err(|_| bad(head[k]));
        let nx = head[1].parse::<usize>().map_err(|_| bad("nx"))?;
        let ny = head[2].parse::<usize>().map_err(|_| bad("ny"))?;
        let window = Window { center: Complex64::new(num(3)?, num(4)?), half_x: num(5)?, half_y: num(6)? };
        let budget = head[7].parse::<u64>().map_err(|_| bad("budget"))?;
        let rows: Vec<&str> = lines.collect();
        if nx == 0 || ny == 0 || rows.len() != ny {
            return Err(bad("row count"));
        }
        let mut bits = vec![false; nx * ny];
        for (r, line) in rows.iter().enumerate() {
            let j = ny - 1 - r;
            if line.len() != nx {
                return Err(bad("row length"));
            }
            for (i, c) in line.bytes().enumerate() {
                bits[j * nx + i] = match c {
                    b'1' => true,
                    b'0' => false,
                    _ => return Err(bad("cell")),
                };
            }
        }
        Ok(GridMask { window, nx, ny, bits, budget, rule: head[8].replace('_', " ") })
    }

    /// Binary PPM, inside white.
    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.nx, self.ny).into_bytes();
        for j in (0..self.ny).rev() {
            for i in 0..self.nx {
                let v = if self.get(i, j) { 255 } else { 0 };
                out.extend_from_slice(&[v, v, v]);
            }
        }
        out
    }
}

/// Whether the orbit of z stays in the trap for `budget` steps.
fn stays(lambda: Complex64, z: Complex64, budget: u64, trap: &Trap) -> bool {
    let mut z = z;
    for _ in 0..budget {
        let inside = match trap {
            Trap::Disk(r) => z.norm_sqr() < r * r,
            Trap::Mask(m) => m.contains_dilated(z),
        };
        if !inside {
            return false;
        }
        z = lambda * z + z * z;
    }
    match trap {
        Trap::Disk(r) => z.norm_sqr() < r * r,
        Trap::Mask(m) => m.contains_dilated(z),
    }
}

/// Pixels whose centers keep their orbits in the trap for `budget` steps.
pub fn siegel_mask(map: &QuadraticMap, trap: Trap, window: Window, nx: usize, ny: usize, budget: u64) -> Result<GridMask> {
    if budget == 0 || nx == 0 || ny == 0 {
        return Err(Error::InvalidInput("budget and resolution must be positive".into()));
    }
    let lambda = map.lambda64();
    let rule = match trap {
        Trap::Disk(r) => format!("orbit stays in disk {r} for T steps"),
        Trap::Mask(_) => "orbit stays in dilated prior mask for T steps".to_string(),
    };
    let mut mask = GridMask { window, nx, ny, bits: vec![false; nx * ny], budget, rule };
    let bits: Vec<bool> = (0..nx * ny)
        .into_par_iter()
        .map(|k| stays(lambda, mask.pixel_center(k % nx, k / nx), budget, &trap))
        .collect();
    mask.bits = bits;
    Ok(mask)
}

/// dens_U(X) with its binomial standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DensityEstimate {
    pub value: f64,
    pub samples: usize,
    pub stderr: f64,
    pub method: DensityMethod,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DensityMethod {
    Grid,
    MonteCarlo,
}

fn estimate(hits: usize, total: usize, method: DensityMethod) -> Result<DensityEstimate> {
    if total == 0 {
        return Err(Error::UndefinedDensity);
    }
    let p = hits as f64 / total as f64;
    Ok(DensityEstimate { value: p, samples: total, stderr: (p * (1.0 - p) / total as f64).sqrt(), method })
}

/// Raster intersection of two masks on the same grid.
pub fn dens_grid(u: &GridMask, x: &GridMask) -> Result<DensityEstimate> {
    if (u.nx, u.ny, u.window) != (x.nx, x.ny, x.window) {
        return Err(Error::InvalidInput("masks must share window and resolution".into()));
    }
    let total = u.inside_count();
    let hits = u.bits.iter().zip(&x.bits).filter(|(a, b)| **a && **b).count();
    estimate(hits, total, DensityMethod::Grid)
}

/// Fraction of uniform samples of U satisfying the predicate.
pub fn dens_monte_carlo<F: Fn(Complex64) -> bool + Sync>(u: &SampleSet, x: F) -> Result<DensityEstimate> {
    let hits = u.points.par_iter().filter(|&&z| x(z)).count();
    estimate(hits, u.points.len(), DensityMethod::MonteCarlo)
}

/// A_n as a function of q_n.
#[derive(Clone, Debug, PartialEq)]
pub enum ARule {
    Fixed(Integer),
    /// ceil(base^{q_n}).
    Power(f64),
}

impl ARule {
    pub fn a_n(&self, q: usize) -> Integer {
        match self {
            ARule::Fixed(a) => a.clone(),
            ARule::Power(base) => {
                let prec = 64 + (q as f64 * base.log2().abs()) as u32;
                let v = Float::with_val(prec, *base).pow(q as u32);
                v.ceil().to_integer().unwrap_or_default().max(Integer::from(1))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum LadderRule {
    /// Geometric from A_n^{−1/q}+0.02 to 0.97 for each n.
    Default,
    Explicit(Ladder),
}

/// Settings of the orbit-based Δ'_n column.
#[derive(Clone, Debug, PartialEq)]
pub struct OrbitConfig {
    /// U is the disk of this fraction of r̂_α in linearized coordinates.
    pub disk_fraction: f64,
    /// Iterations per sample; `None` means 10·q²(A_n+1).
    pub budget: Option<u64>,
    pub samples: usize,
    pub trap_resolution: usize,
    pub trap_budget: u64,
}

impl Default for OrbitConfig {
    fn default() -> Self {
        OrbitConfig { disk_fraction: 0.5, budget: None, samples: 10_000, trap_resolution: 512, trap_budget: 10_000 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub alpha: QuotientSequence,
    pub theta: QuotientSequence,
    pub n_values: Vec<usize>,
    pub a_rule: ARule,
    pub ladder: LadderRule,
    pub samples: usize,
    pub seed: u64,
    pub precision_bits: u32,
    pub orbit: Option<OrbitConfig>,
}

impl ExperimentConfig {
    /// Golden α = θ, A_n = ceil(2^{q_n}), n ∈ {4, 5, 6}.
    pub fn golden_surrogate() -> Self {
        ExperimentConfig {
            alpha: QuotientSequence::golden(),
            theta: QuotientSequence::golden(),
            n_values: vec![4, 5, 6],
            a_rule: ARule::Power(2.0),
            ladder: LadderRule::Default,
            samples: 100_000,
            seed: 1,
            precision_bits: 128,
            orbit: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentRow {
    pub n: usize,
    pub q_n: usize,
    pub a_n: Integer,
    pub epsilon_n: f64,
    /// Absent when A_n is too small for the default ladder to exist.
    pub yn: Option<YnColumn>,
    pub dens_dn: Option<DensityEstimate>,
    pub budget: Option<u64>,
    pub samples: usize,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct YnColumn {
    pub r7: f64,
    pub r8: f64,
    pub dens: DensityEstimate,
}

pub const CSV_HEADER: &str = "n,q_n,A_n,epsilon_n,r7,r8,dens_Yn,stderr_Yn,dens_Dn,stderr_Dn,budget_T,samples,seed";

pub fn rows_to_csv(rows: &[ExperimentRow]) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in rows {
        let pair = |d: Option<DensityEstimate>| d.map_or((String::new(), String::new()), |d| (d.value.to_string(), d.stderr.to_string()));
        let (dd, sd) = pair(r.dens_dn);
        let (dy, sy) = pair(r.yn.map(|y| y.dens));
        let (r7, r8) = r.yn.map_or((String::new(), String::new()), |y| (y.r7.to_string(), y.r8.to_string()));
        let _ = writeln!(
            s,
            "{},{},{},{:e},{},{},{},{},{},{},{},{},{}",
            r.n,
            r.q_n,
            r.a_n,
            r.epsilon_n,
            r7,
            r8,
            dy,
            sy,
            dd,
            sd,
            r.budget.map_or(String::new(), |b| b.to_string()),
            r.samples,
            r.seed
        );
    }
    s
}

/// Default orbit budget 10·q²(A_n+1), saturating.
pub fn default_budget(q: usize, a_n: &Integer) -> u64 {
    let v = Integer::from(a_n + 1u32) * (10 * q * q) as u64;
    v.to_u64().unwrap_or(u64::MAX)
}

/// Minimal budget q²(A_n+1) for the orbit path.
pub fn required_budget(q: usize, a_n: &Integer) -> u64 {
    let v = Integer::from(a_n + 1u32) * (q * q) as u64;
    v.to_u64().unwrap_or(u64::MAX)
}

/// The Δ_α trap and the linearizer, shared across rows.
pub struct OrbitSetup {
    pub trap: GridMask,
    pub lin: LinearizerSeries,
}

impl OrbitSetup {
    pub fn new(alpha: &QuotientSequence, cfg: &OrbitConfig, prec: u32) -> Result<Self> {
        let a = eval_real(alpha, 200, prec)?.value;
        let map = QuadraticMap::new(a.clone());
        let lin = linearizer(&expi2pi(&a), 200);
        let window = Window::square(Complex64::new(0.0, 0.0), 0.8);
        let trap = siegel_mask(&map, Trap::Disk(2.0), window, cfg.trap_resolution, cfg.trap_resolution, cfg.trap_budget)?;
        Ok(OrbitSetup { trap, lin })
    }

    /// dens of the points whose P_{α_n}-orbit stays in the dilated trap.
    pub fn dens_dn(&self, setup: &PerturbationSetup, cfg: &OrbitConfig, budget: u64, seed: u64) -> Result<DensityEstimate> {
        let r = cfg.disk_fraction * self.lin.radius_estimate;
        let u = annulus_sampler(0.0, r, cfg.samples, seed);
        let lambda = QuadraticMap::new(setup.alpha_n.clone()).lambda64();
        let trap = Trap::Mask(&self.trap);
        dens_monte_carlo(&u, |d| stays(lambda, self.lin.eval(d), budget, &trap))
    }
}

pub fn density_experiment(cfg: &ExperimentConfig) -> Result<Vec<ExperimentRow>> {
    if cfg.n_values.is_empty() || cfg.samples == 0 {
        return Err(Error::InvalidInput("need at least one n and one sample".into()));
    }
    let orbit = match &cfg.orbit {
        Some(o) => Some(OrbitSetup::new(&cfg.alpha, o, cfg.precision_bits)?),
        None => None,
    };
    let mut rows = Vec::new();
    for &n in &cfg.n_values {
        let q = make_setup(&cfg.alpha, &cfg.theta, n, &Integer::from(1), 64)?.q();
        let a_n = cfg.a_rule.a_n(q);
        let setup = make_setup(&cfg.alpha, &cfg.theta, n, &a_n, cfg.precision_bits)?;
        let q = setup.q();
        let seed = cfg.seed.wrapping_add(n as u64);
        let ladder = match &cfg.ladder {
            LadderRule::Default => Ladder::default_for(&setup).ok(),
            LadderRule::Explicit(l) => Some(*l),
        };
        let yn = match ladder {
            Some(ladder) => {
                let params = RegionParams::new(&setup, ladder)?;
                let (r7, r8) = (params.r(Radius::R7), params.r(Radius::R8));
                let u = annulus_sampler(r7, r8, cfg.samples, seed);
                let dens = dens_monte_carlo(&u, |z| params.contains(RegionId::Yn(Radius::R8, Radius::R7), z))?;
                Some(YnColumn { r7, r8, dens })
            }
            None => None,
        };
        let (dens_dn, budget) = match (&cfg.orbit, &orbit) {
            (Some(o), Some(os)) => {
                let budget = o.budget.unwrap_or_else(|| default_budget(q, &setup.a_n));
                let required = required_budget(q, &setup.a_n);
                if budget < required {
                    return Err(Error::BudgetTooSmall { given: budget, required });
                }
                (Some(os.dens_dn(&setup, o, budget, seed)?), Some(budget))
            }
            _ => (None, None),
        };
        rows.push(ExperimentRow {
            n,
            q_n: q,
            a_n: setup.a_n.clone(),
            epsilon_n: setup.epsilon(),
            yn,
            dens_dn,
            budget,
            samples: cfg.samples,
            seed,
        });
    }
    Ok(rows)
}

/// Outcome of running the inclusion chain on samples of 𝒴_n.
#[derive(Clone, Debug, PartialEq)]
pub struct InclusionReport {
    pub samples: usize,
    pub budget: u64,
    /// Samples whose lift missed ℍ_n(r_6, r_5) or whose root-power residual was too large.
    pub lift_failures: usize,
    pub max_root_residual: f64,
    /// Samples whose f_n-orbit left 𝔻_{r'_0} (or left the χ domain) within the budget.
    pub violations: usize,
    pub max_orbit_modulus: f64,
    /// Largest first-return time to within 5% of the start, over samples that returned.
    pub slowest_return: Option<u64>,
    pub mean_return: f64,
    pub first_violation: Option<Complex64>,
}

/// Samples 𝒴_n, lifts each point into ℍ_n(r_6, r_5) and runs its f_n-orbit.
pub fn inclusion_spot_check(
    params: &RegionParams,
    ctx: &ExplodedMapContext,
    count: usize,
    budget: u64,
    seed: u64,
) -> Result<InclusionReport> {
    let samples = params.region_sampler(RegionId::Yn(Radius::R8, Radius::R7), count, seed)?;
    inclusion_on_points(params, ctx, &samples.points, budget)
}

pub fn inclusion_on_points(
    params: &RegionParams,
    ctx: &ExplodedMapContext,
    points: &[Complex64],
    budget: u64,
) -> Result<InclusionReport> {
    let r0p = params.r(Radius::R0p);
    let lam = ctx.lambda_n();
    struct One {
        lift_ok: bool,
        residual: f64,
        escaped: bool,
        max_mod: f64,
        ret: Option<u64>,
    }
    let results: Vec<One> = points
        .par_iter()
        .map(|&z0| {
            let (lift_ok, residual) = match params.lift_to_h(z0) {
                Ok(l) => (l.residual < 1e-9, l.residual),
                Err(_) => (false, f64::NAN),
            };
            let mut w = ctx.chi(z0);
            let mut z = z0;
            let mut max_mod: f64 = z0.norm();
            let mut ret = None;
            let mut escaped = false;
            for k in 1..=budget {
                w = lam * w + w * w;
                match ctx.chi_inv(w, lam * z) {
                    Ok(next) => z = next,
                    Err(_) => {
                        escaped = true;
                        break;
                    }
                }
                max_mod = max_mod.max(z.norm());
                if z.norm() >= r0p {
                    escaped = true;
                    break;
                }
                if ret.is_none() && (z - z0).norm() < 0.05 * z0.norm() {
                    ret = Some(k);
                }
            }
            One { lift_ok, residual, escaped, max_mod, ret }
        })
        .collect();
    let returns: Vec<u64> = results.iter().filter_map(|r| r.ret).collect();
    Ok(InclusionReport {
        samples: points.len(),
        budget,
        lift_failures: results.iter().filter(|r| !r.lift_ok).count(),
        max_root_residual: results.iter().map(|r| r.residual).fold(0.0, f64::max),
        violations: results.iter().filter(|r| r.escaped).count(),
        max_orbit_modulus: results.iter().map(|r| r.max_mod).fold(0.0, f64::max),
        slowest_return: returns.iter().copied().max(),
        mean_return: if returns.is_empty() { f64::NAN } else { returns.iter().sum::<u64>() as f64 / returns.len() as f64 },
        first_violation: results.iter().zip(points).find(|(r, _)| r.escaped).map(|(_, &z)| z),
    })
}

/// Area of the Δ_α mask in the golden case, for regression checks.
pub fn mask_area_change(a: &GridMask, b: &GridMask) -> f64 {
    (a.area() - b.area()).abs() / a.area().max(f64::MIN_POSITIVE)
}

/// π r² in the linearized disk, for reporting.
pub fn disk_area(r: f64) -> f64 {
    PI * r * r
}
