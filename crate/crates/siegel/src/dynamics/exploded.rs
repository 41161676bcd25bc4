//! The renormalized-coordinate map f_n = χ_n^{-1} ∘ P_{α_n} ∘ χ_n.

use std::f64::consts::PI;

use num_complex::Complex64;
use rug::Complex;

use super::explosion::{CycleSolver, ExplosionSeries, SeriesOptions};
use super::linearizer::LinearizerSeries;
use super::quadratic::{expi2pi, from_c64, to_c64};
use crate::cfrac::PerturbationSetup;
use crate::error::{Error, Result};
use crate::series::PowerSeries;

/// How χ_n is evaluated.
#[derive(Clone, Debug)]
pub enum ChiMode {
    /// Taylor series of the continued explosion cycle.
    Exact(ExplosionSeries),
    /// χ̃_n(δ) = φ_α(r̂_α δ).
    Proxy { series: PowerSeries, r_hat: f64 },
}

/// A value of f_n with its a-posteriori residual |χ(f_n z) − P_{α_n}(χ z)|.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FnValue {
    pub z: Complex64,
    pub residual: f64,
}

/// The q_n-cycle of f_n and its multiplier as a cycle of f_n^{∘q_n}.
#[derive(Clone, Debug)]
pub struct FnCycle {
    pub points: Vec<Complex64>,
    pub multiplier: Complex64,
}

#[derive(Clone, Debug)]
pub struct ExplodedMapContext {
    pub setup: PerturbationSetup,
    pub mode: ChiMode,
    lambda_n: Complex64,
}

impl ExplodedMapContext {
    /// Exact-explosion mode for the convergent p_n/q_n of `setup`.
    pub fn exact(setup: PerturbationSetup, opts: &SeriesOptions) -> Result<Self> {
        let series = ExplosionSeries::build(setup.p(), setup.q(), opts)?;
        Ok(Self::with_mode(setup, ChiMode::Exact(series)))
    }

    pub fn proxy(setup: PerturbationSetup, lin: &LinearizerSeries) -> Self {
        let mode = ChiMode::Proxy { series: lin.scaled_series().clone(), r_hat: lin.radius_estimate };
        Self::with_mode(setup, mode)
    }

    pub fn with_mode(setup: PerturbationSetup, mode: ChiMode) -> Self {
        let lambda_n = to_c64(&expi2pi(&setup.alpha_n));
        ExplodedMapContext { setup, mode, lambda_n }
    }

    pub fn mode_name(&self) -> &'static str {
        match self.mode {
            ChiMode::Exact(_) => "exact",
            ChiMode::Proxy { .. } => "proxy",
        }
    }

    pub fn lambda_n(&self) -> Complex64 {
        self.lambda_n
    }

    /// Radius of the disk on which χ is evaluated.
    pub fn domain_radius(&self) -> f64 {
        match &self.mode {
            ChiMode::Exact(s) => s.domain_radius(),
            ChiMode::Proxy { .. } => 1.0,
        }
    }

    fn series(&self) -> &PowerSeries {
        match &self.mode {
            ChiMode::Exact(s) => &s.series,
            ChiMode::Proxy { series, .. } => series,
        }
    }

    pub fn chi(&self, z: Complex64) -> Complex64 {
        self.series().eval(z)
    }

    /// χ'(0).
    pub fn chi_prime_zero(&self) -> Complex64 {
        self.series().coeffs.get(1).copied().unwrap_or_default()
    }

    pub fn chi_inv(&self, w: Complex64, seed: Complex64) -> Result<Complex64> {
        let r = self.domain_radius();
        self.series()
            .invert(w, seed, r)
            .ok_or(Error::OutsideUnivalentDomain { modulus: seed.norm() })
    }

    fn p_alpha_n(&self, w: Complex64) -> Complex64 {
        self.lambda_n * w + w * w
    }

    fn check_domain(&self, z: Complex64) -> Result<()> {
        if z.norm() < self.domain_radius() {
            Ok(())
        } else {
            Err(Error::OutsideUnivalentDomain { modulus: z.norm() })
        }
    }

    pub fn f_n(&self, z: Complex64) -> Result<FnValue> {
        self.check_domain(z)?;
        let target = self.p_alpha_n(self.chi(z));
        let out = self.chi_inv(target, self.lambda_n * z)?;
        Ok(FnValue { z: out, residual: (self.chi(out) - target).norm() })
    }

    /// f_n^{∘k}(z), computed as χ^{-1}(P^{∘k}(χ z)).
    pub fn f_n_iter(&self, z: Complex64, k: usize) -> Result<Complex64> {
        self.check_domain(z)?;
        let mut w = self.chi(z);
        for _ in 0..k {
            w = self.p_alpha_n(w);
        }
        let seed = z * Complex64::from_polar(1.0, 2.0 * PI * k as f64 * self.setup.alpha_n_f64());
        self.chi_inv(w, seed)
    }

    /// f_n^{∘q_n}(z) with the seed z, appropriate near the parabolic regime.
    pub fn f_n_q(&self, z: Complex64) -> Result<Complex64> {
        self.check_domain(z)?;
        let mut w = self.chi(z);
        for _ in 0..self.setup.q() {
            w = self.p_alpha_n(w);
        }
        self.chi_inv(w, z)
    }

    /// Relative deviation of f_n^{∘q_n}(z) from z + 2πi q z (ε − z^q).
    pub fn qn_expansion_residual(&self, z: Complex64) -> Result<f64> {
        let q = self.setup.q();
        let eps = self.setup.epsilon();
        let gap = Complex64::new(eps, 0.0) - z.powu(q as u32);
        let scale = 2.0 * PI * q as f64 * z.norm() * gap.norm();
        if z.norm() == 0.0 || gap.norm() <= 1e-12 * eps.abs() {
            return Err(Error::NearCycleDegeneracy);
        }
        let fq = self.f_n_q(z)?;
        let lead = z + Complex64::new(0.0, 2.0 * PI * q as f64) * z * gap;
        Ok((fq - lead).norm() / scale)
    }

    /// The q-cycle of P_{α_n} pulled back by χ, and its multiplier for P^{∘q}.
    pub fn cycle(&self, prec: u32) -> Result<FnCycle> {
        let q = self.setup.q();
        let solver = CycleSolver::new(self.setup.p(), q, prec);
        let lam = expi2pi(&rug::Float::with_val(prec, &self.setup.alpha_n));
        let eps = self.setup.epsilon();
        let delta = Complex64::new(eps, 0.0).powf(1.0 / q as f64);
        let seed = from_c64(self.chi(delta), prec);
        let (w0, _) = solver.newton(&lam, seed).ok_or(Error::DegenerateCycle)?;
        let mut w = w0;
        let mut mult = Complex::with_val(prec, 1);
        let mut pts = Vec::with_capacity(q);
        let mut z_seed = delta;
        let zeta = Complex64::from_polar(1.0, 2.0 * PI * self.setup.p() as f64 / q as f64);
        for _ in 0..q {
            let w64 = to_c64(&w);
            let z = self.chi_inv(w64, z_seed)?;
            pts.push(z);
            z_seed = z * zeta;
            mult *= Complex::with_val(prec, &w * 2u32) + &lam;
            w = Complex::with_val(prec, &lam * &w) + Complex::with_val(prec, w.square_ref());
        }
        Ok(FnCycle { points: pts, multiplier: to_c64(&mult) })
    }
}

/// ψ_n(δ) = χ_n(δ/χ_n'(0)) compared with φ_α over `samples`.
#[derive(Clone, Debug, PartialEq)]
pub struct ExplosionComparison {
    pub sup_difference: f64,
    pub covered: usize,
    pub requested: usize,
}

pub fn compare_explosion_to_linearizer(
    series: &ExplosionSeries,
    chi_prime: Complex64,
    lin: &LinearizerSeries,
    samples: &[Complex64],
) -> ExplosionComparison {
    let mut sup: f64 = 0.0;
    let mut covered = 0;
    for &d in samples {
        let arg = d / chi_prime;
        if arg.norm() >= series.domain_radius() {
            continue;
        }
        covered += 1;
        sup = sup.max((series.eval(arg) - lin.eval(d)).norm());
    }
    ExplosionComparison { sup_difference: sup, covered, requested: samples.len() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cfrac::{make_setup, QuotientSequence};
    use crate::dynamics::linearizer::linearizer;

    fn golden_setup(n: usize, a: u64) -> PerturbationSetup {
        let g = QuotientSequence::golden();
        make_setup(&g, &g, n, &rug::Integer::from(a), 128).unwrap()
    }

    fn golden_lin() -> LinearizerSeries {
        let g = QuotientSequence::golden();
        let alpha = crate::cfrac::eval_real(&g, 80, 128).unwrap().value;
        linearizer(&expi2pi(&alpha), 200)
    }

    #[test]
    fn zero_is_fixed() {
        let ctx = ExplodedMapContext::proxy(golden_setup(5, 10), &golden_lin());
        let v = ctx.f_n(Complex64::new(0.0, 0.0)).unwrap();
        assert!(v.z.norm() < 1e-15);
    }

    #[test]
    fn proxy_residuals_small() {
        let ctx = ExplodedMapContext::proxy(golden_setup(5, 10), &golden_lin());
        for k in 0..100 {
            let z = Complex64::from_polar(0.3 * ((k % 10) as f64 + 1.0) / 10.0, k as f64 * 0.7);
            let v = ctx.f_n(z).unwrap();
            assert!(v.residual < 1e-10, "{z} {}", v.residual);
        }
    }

    #[test]
    fn exact_mode_residual_and_cycle() {
        let ctx = ExplodedMapContext::exact(golden_setup(5, 10), &SeriesOptions::default()).unwrap();
        let z = Complex64::new(0.25, 0.1);
        assert!(ctx.f_n(z).unwrap().residual < 1e-8);
        let cyc = ctx.cycle(256).unwrap();
        let q = ctx.setup.q();
        for p in &cyc.points {
            assert!((ctx.f_n_q(*p).unwrap() - p).norm() < 1e-9);
            // the cycle sits at δ^q = ε_n
            assert!((p.norm().powi(q as i32) / ctx.setup.epsilon().abs() - 1.0).abs() < 1e-6);
        }
    }
}
