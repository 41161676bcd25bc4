//! Parabolic explosion: the q-cycle of P_η, η = p/q + δ^q, born from the
//! parabolic fixed point of P_{p/q}, and the map δ ↦ χ(δ) recovered as a
//! Taylor series.

use std::f64::consts::PI;

use num_complex::Complex64;
use rug::ops::Pow;
use rug::{Complex, Float};

use super::linearizer::least_squares_slope;
use super::quadratic::{cexpi2pi, from_c64, to_c64};
use crate::error::{Error, Result};
use crate::series::PowerSeries;

/// Default big-float precision for cycle Newton solves.
pub const CYCLE_PRECISION: u32 = 256;
/// Default starting |δ| of the continuation.
pub const SEED_RADIUS: f64 = 1e-2;

/// Coefficient C in P_{p/q}^{∘q}(z) = z + C z^{q+1} + O(z^{q+2}).
pub fn parabolic_coefficient(p: i64, q: usize) -> Complex64 {
    let lam = Complex64::from_polar(1.0, 2.0 * PI * p as f64 / q as f64);
    let deg = q + 2;
    let mut s = vec![Complex64::new(0.0, 0.0); deg];
    s[1] = Complex64::new(1.0, 0.0);
    for _ in 0..q {
        let mut next: Vec<Complex64> = s.iter().map(|c| lam * c).collect();
        for i in 1..deg {
            for j in 1..deg - i {
                next[i + j] += s[i] * s[j];
            }
        }
        s = next;
    }
    s[q + 1]
}

/// χ'(0) to leading order: the root of κ^q = −2πiq/C with the smallest |arg|.
pub fn leading_derivative(p: i64, q: usize) -> Complex64 {
    let c = parabolic_coefficient(p, q);
    let target = Complex64::new(0.0, -2.0 * PI * q as f64) / c;
    let root = target.powf(1.0 / q as f64);
    (0..q)
        .map(|j| root * Complex64::from_polar(1.0, 2.0 * PI * j as f64 / q as f64))
        .min_by(|a, b| a.arg().abs().partial_cmp(&b.arg().abs()).unwrap())
        .unwrap()
}

/// Newton solver for q-periodic points of P_η.
#[derive(Clone, Debug)]
pub struct CycleSolver {
    pub p: i64,
    pub q: usize,
    pub prec: u32,
    ratio: Float,
}

impl CycleSolver {
    pub fn new(p: i64, q: usize, prec: u32) -> Self {
        let ratio = Float::with_val(prec, p) / q as u32;
        CycleSolver { p, q, prec, ratio }
    }

    /// λ = e^{2πi(p/q + δ^q)}.
    pub fn lambda(&self, delta: &Complex) -> Complex {
        let eta = Complex::with_val(self.prec, delta.clone().pow(self.q as u32)) + &self.ratio;
        cexpi2pi(&eta)
    }

    fn tolerance(&self) -> f64 {
        2f64.powi(-(self.prec as i32 / 2))
    }

    /// Newton on P^q(z) − z, derivative as the product of 2z_i + λ.
    pub fn newton(&self, lam: &Complex, seed: Complex) -> Option<(Complex, usize)> {
        let prec = self.prec;
        let tol = self.tolerance();
        let mut z = seed;
        for it in 0..60 {
            let mut w = z.clone();
            let mut d = Complex::with_val(prec, 1);
            for _ in 0..self.q {
                d *= Complex::with_val(prec, &w * 2u32) + lam;
                let lw = Complex::with_val(prec, lam * &w);
                w.square_mut();
                w += lw;
            }
            w -= &z;
            d -= 1u32;
            let dz = w / d;
            z -= &dz;
            let step = to_c64(&dz).norm();
            if !step.is_finite() {
                return None;
            }
            if step < tol * to_c64(&z).norm().max(1e-300) {
                return Some((z, it + 1));
            }
        }
        None
    }

    /// Newton at parameter δ with guards against the fixed points and jumps.
    pub fn solve_at(&self, delta: &Complex, seed: Complex) -> Option<(Complex, usize)> {
        let lam = self.lambda(delta);
        let seed64 = to_c64(&seed);
        let (z, it) = self.newton(&lam, seed)?;
        let z64 = to_c64(&z);
        let dabs = to_c64(delta).norm();
        let other_fixed = Complex64::new(1.0, 0.0) - to_c64(&lam);
        let ok = z64.norm() > dabs / 10.0
            && (z64 - other_fixed).norm() > dabs / 10.0
            && (z64 - seed64).norm() <= 0.5 * seed64.norm();
        ok.then_some((z, it))
    }

    /// Continues from a small |δ| out to `delta` along its ray.
    pub fn continue_radial(&self, delta: Complex64, seed_radius: f64) -> Result<(Complex, Vec<(f64, usize)>)> {
        let target = delta.norm();
        let dir = delta / target;
        let kappa = leading_derivative(self.p, self.q);
        // keep δ^q resolvable at this precision
        let floor = 2f64.powf(-(self.prec as f64 / 3.0) / self.q as f64);
        let mut r = seed_radius.max(floor).min(target);
        let mut trace = Vec::new();
        let d0 = from_c64(dir * r, self.prec);
        let (mut z, it) = self
            .solve_at(&d0, from_c64(kappa * dir * r, self.prec))
            .ok_or(Error::ContinuationFailed { last_good: 0.0 })?;
        trace.push((r, it));
        let f0 = (target / r).powf(1.0 / 40.0).max(1.0001);
        let mut f = f0;
        while r < target {
            let next = (r * f).min(target);
            let d = from_c64(dir * next, self.prec);
            let seed = Complex::with_val(self.prec, &z * (next / r));
            match self.solve_at(&d, seed) {
                Some((zn, it)) => {
                    z = zn;
                    r = next;
                    trace.push((r, it));
                    f = (f * f).min(f0);
                }
                None => {
                    f = f.sqrt();
                    if r * (f - 1.0) < target * 2f64.powi(-30) {
                        return Err(Error::ContinuationFailed { last_good: r });
                    }
                }
            }
        }
        Ok((z, trace))
    }

    /// Continues along the circle |δ| = const from `from` (with cycle point `z`) to `to`.
    pub fn continue_angular(&self, from: Complex64, z: Complex, to: Complex64) -> Result<Complex> {
        let r = from.norm();
        let (a0, a1) = (from.arg(), from.arg() + (to / from).arg());
        let mut t = 0.0f64;
        let mut dt = 1.0f64;
        let mut z = z;
        while t < 1.0 {
            let tn = (t + dt).min(1.0);
            let d = Complex64::from_polar(r, a0 + (a1 - a0) * tn);
            match self.solve_at(&from_c64(d, self.prec), z.clone()) {
                Some((zn, _)) => {
                    z = zn;
                    t = tn;
                    dt = (dt * 2.0).min(1.0);
                }
                None => {
                    dt /= 2.0;
                    if dt < 2f64.powi(-30) {
                        return Err(Error::ContinuationFailed { last_good: r });
                    }
                }
            }
        }
        Ok(z)
    }
}

/// A q-cycle of P_η ordered along the orbit.
#[derive(Clone, Debug)]
pub struct ExplosionCycle {
    pub p: i64,
    pub q: usize,
    pub delta: Complex64,
    pub eta: Complex,
    pub points: Vec<Complex>,
    /// (|δ| reached, Newton iterations) per continuation step.
    pub continuation_trace: Vec<(f64, usize)>,
}

impl ExplosionCycle {
    pub fn points64(&self) -> Vec<Complex64> {
        self.points.iter().map(to_c64).collect()
    }

    /// max_j |P_η(z_j) − z_{j+1 mod q}|.
    pub fn invariance_residual(&self) -> f64 {
        let prec = self.eta.prec().0;
        let lam = cexpi2pi(&self.eta);
        (0..self.q)
            .map(|j| {
                let z = &self.points[j];
                let pz = Complex::with_val(prec, &lam * z) + Complex::with_val(prec, z.square_ref());
                to_c64(&Complex::with_val(prec, pz - &self.points[(j + 1) % self.q])).norm()
            })
            .fold(0.0, f64::max)
    }
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 { a.abs() } else { gcd(b, a % b) }
}

fn cycle_from_point(solver: &CycleSolver, delta: Complex64, z: Complex, trace: Vec<(f64, usize)>) -> Result<ExplosionCycle> {
    let prec = solver.prec;
    let d = from_c64(delta, prec);
    let lam = solver.lambda(&d);
    let eta = Complex::with_val(prec, d.clone().pow(solver.q as u32)) + Float::with_val(prec, solver.p) / solver.q as u32;
    let mut points = vec![z];
    for j in 1..solver.q {
        let w = &points[j - 1];
        let next = Complex::with_val(prec, &lam * w) + Complex::with_val(prec, w.square_ref());
        points.push(next);
    }
    let p64 = points.iter().map(to_c64).collect::<Vec<_>>();
    let dabs = delta.norm();
    for (i, a) in p64.iter().enumerate() {
        if a.norm() <= dabs / 10.0 || p64[i + 1..].iter().any(|b| (a - b).norm() <= dabs * 1e-6) {
            return Err(Error::DegenerateCycle);
        }
    }
    Ok(ExplosionCycle { p: solver.p, q: solver.q, delta, eta, points, continuation_trace: trace })
}

/// The cycle χ(δ), P_η(χ(δ)), ... obtained by continuation in |δ|.
pub fn explosion_cycle(p: i64, q: usize, delta: Complex64, seed_radius: f64) -> Result<ExplosionCycle> {
    explosion_cycle_prec(p, q, delta, seed_radius, CYCLE_PRECISION)
}

pub fn explosion_cycle_prec(p: i64, q: usize, delta: Complex64, seed_radius: f64, prec: u32) -> Result<ExplosionCycle> {
    if q == 0 || gcd(p, q as i64) != 1 {
        return Err(Error::InvalidInput(format!("p/q = {p}/{q} is not in lowest terms")));
    }
    if delta.norm() == 0.0 || seed_radius <= 0.0 {
        return Err(Error::InvalidInput("delta and seed radius must be nonzero".into()));
    }
    let solver = CycleSolver::new(p, q, prec);
    let (z, trace) = solver.continue_radial(delta, seed_radius)?;
    cycle_from_point(&solver, delta, z, trace)
}

/// χ'(0) by Richardson extrapolation of χ(h)/h at h and h/2.
pub fn chi_prime_estimate(p: i64, q: usize, h: f64) -> Result<Complex64> {
    let d = |h: f64| -> Result<Complex64> {
        let c = explosion_cycle(p, q, Complex64::new(h, 0.0), h)?;
        Ok(to_c64(&c.points[0]) / h)
    };
    Ok(2.0 * d(h / 2.0)? - d(h)?)
}

/// Settings for recovering χ as a Taylor series.
#[derive(Clone, Debug)]
pub struct SeriesOptions {
    pub prec: u32,
    pub seed_radius: f64,
    pub first_radius: f64,
    /// Second pass runs at this fraction of the fitted convergence radius.
    pub shrink: f64,
    pub min_samples: usize,
}

impl Default for SeriesOptions {
    fn default() -> Self {
        SeriesOptions { prec: CYCLE_PRECISION, seed_radius: SEED_RADIUS, first_radius: 0.45, shrink: 0.82, min_samples: 512 }
    }
}

/// χ(δ) = Σ c_m δ^m, from a DFT of cycle points on |δ| = radius.
#[derive(Clone, Debug)]
pub struct ExplosionSeries {
    pub p: i64,
    pub q: usize,
    pub radius: f64,
    /// Convergence radius fitted from the coefficient tail.
    pub rho_hat: f64,
    pub samples: usize,
    pub series: PowerSeries,
}

impl ExplosionSeries {
    pub fn build(p: i64, q: usize, opts: &SeriesOptions) -> Result<Self> {
        let first = Self::at_radius(p, q, opts.first_radius, opts)?;
        let r2 = opts.shrink * first.rho_hat;
        if !r2.is_finite() || ((r2 - first.radius) / first.radius).abs() < 0.05 {
            return Ok(first);
        }
        Ok(Self::at_radius(p, q, r2.min(0.95), opts).unwrap_or(first))
    }

    pub fn at_radius(p: i64, q: usize, radius: f64, opts: &SeriesOptions) -> Result<Self> {
        let solver = CycleSolver::new(p, q, opts.prec);
        let mq = opts.min_samples.div_ceil(q).max(4);
        let m = q * mq;
        let mut samples = vec![Complex64::new(0.0, 0.0); m];
        let step = |k: usize| Complex64::from_polar(radius, 2.0 * PI * k as f64 / m as f64);
        let (mut z, _) = solver.continue_radial(step(0), opts.seed_radius)?;
        let prec = opts.prec;
        for k in 0..mq {
            if k > 0 {
                z = solver.continue_angular(step(k - 1), z, step(k))?;
            }
            let lam = solver.lambda(&from_c64(step(k), prec));
            let mut w = z.clone();
            for j in 0..q {
                let idx = (k + mq * ((j as i64 * p).rem_euclid(q as i64) as usize)) % m;
                samples[idx] = to_c64(&w);
                w = Complex::with_val(prec, &lam * &w) + Complex::with_val(prec, w.square_ref());
            }
        }
        let coeffs = dft_coefficients(&samples, radius);
        let (rho_hat, keep) = fit_radius(&coeffs, radius, q);
        let mut c: Vec<Complex64> = coeffs[..keep].to_vec();
        c[0] = Complex64::new(0.0, 0.0);
        Ok(ExplosionSeries { p, q, radius, rho_hat, samples: m, series: PowerSeries::new(c) })
    }

    /// Radius inside which the truncated series is trusted.
    pub fn domain_radius(&self) -> f64 {
        if self.rho_hat.is_finite() && self.rho_hat > self.radius {
            self.radius + 0.5 * (self.rho_hat - self.radius)
        } else {
            self.radius
        }
    }

    pub fn eval(&self, delta: Complex64) -> Complex64 {
        self.series.eval(delta)
    }

    pub fn derivative_at_zero(&self) -> Complex64 {
        self.series.coeffs.get(1).copied().unwrap_or_default()
    }

    /// max over `deltas` of |P_η(χ(δ)) − χ(ζδ)|, the cyclic relation in series form.
    pub fn cyclic_residual(&self, deltas: &[Complex64]) -> f64 {
        let zeta = Complex64::from_polar(1.0, 2.0 * PI * self.p as f64 / self.q as f64);
        deltas
            .iter()
            .map(|&d| {
                let eta = self.p as f64 / self.q as f64 + d.powu(self.q as u32);
                let lam = (Complex64::new(0.0, 2.0 * PI) * eta).exp();
                let z = self.eval(d);
                (lam * z + z * z - self.eval(zeta * d)).norm()
            })
            .fold(0.0, f64::max)
    }
}

/// c_m = (1/(M R^m)) Σ_k s_k e^{−2πikm/M}.
fn dft_coefficients(samples: &[Complex64], radius: f64) -> Vec<Complex64> {
    let m = samples.len();
    let tw: Vec<Complex64> = (0..m).map(|k| Complex64::from_polar(1.0, -2.0 * PI * k as f64 / m as f64)).collect();
    let mut out = Vec::with_capacity(m);
    let mut rpow = 1.0;
    for j in 0..m {
        let s: Complex64 = samples.iter().enumerate().map(|(k, v)| v * tw[(k * j) % m]).sum();
        out.push(s / (m as f64 * rpow));
        rpow *= radius;
    }
    out
}

/// Fits ln|c_m| ≈ −m ln ρ over block maxima above the noise floor and
/// returns (ρ̂, number of coefficients to keep).
fn fit_radius(coeffs: &[Complex64], radius: f64, q: usize) -> (f64, usize) {
    let m = coeffs.len();
    let norm: Vec<f64> = coeffs.iter().enumerate().map(|(j, c)| c.norm() * radius.powi(j as i32)).collect();
    let peak = norm.iter().cloned().fold(0.0, f64::max);
    let floor = peak * 1e-15;
    let half = m / 2;
    let keep = (0..half).rev().find(|&j| norm[j] > floor).map_or(half, |j| j + 1);
    let block = q.max(4);
    let pts: Vec<(f64, f64)> = (1..keep)
        .collect::<Vec<_>>()
        .chunks(block)
        .filter_map(|ch| {
            let (j, v) = ch.iter().map(|&j| (j, coeffs[j].norm())).max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())?;
            (v > 0.0 && norm[j] < peak * 1e-2).then(|| (j as f64, v.ln()))
        })
        .collect();
    let slope = least_squares_slope(&pts);
    ((-slope).exp(), keep)
}
