//! Lifts F_n, G_n of f_n^{∘q_n} and f_n^{∘q_{n−1}} through π_n, the perturbed
//! Fatou coordinate Φ_n and the cylinder renormalization R(f_n).
//!
//! Everything here works in the normalized frame of [`crate::geometry`],
//! where the perturbation is |ε_n| > 0.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::dynamics::ExplodedMapContext;
use crate::error::{Error, Result};
use crate::geometry::{Radius, RegionParams};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// A lift value with its checks.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LiftValue {
    pub w: Complex64,
    /// |W − (Z + shift)| for the expected translation.
    pub deviation: f64,
    /// min over branches of |π_{n,j}(W) − f_n^{∘k}(π_n(Z))|.
    pub residual: f64,
}

/// f_n in the normalized frame together with the covering data.
#[derive(Clone, Debug)]
pub struct LiftContext {
    pub params: RegionParams,
    pub dynamics: ExplodedMapContext,
    /// A_n + θ.
    pub shift_g: f64,
    q_prev: usize,
    conj: bool,
    twist: Complex64,
}

impl LiftContext {
    pub fn new(params: RegionParams, dynamics: ExplodedMapContext) -> Self {
        let q = params.q;
        let shift_g = dynamics.setup.a_n_f64() + dynamics.setup.theta();
        let q_prev = dynamics.setup.q_prev();
        let conj = params.epsilon < 0.0;
        let twist = Complex64::from_polar(1.0, PI / q as f64);
        LiftContext { params, dynamics, shift_g, q_prev, conj, twist }
    }

    fn two(&self) -> Complex64 {
        let q = self.params.q as f64;
        Complex64::new(0.0, 2.0 * PI * q * q * self.params.eps())
    }

    /// The normalized map N f_n^{∘k} N⁻¹.
    pub fn g(&self, u: Complex64, k: usize) -> Result<Complex64> {
        let z = if self.conj { (u / self.twist).conj() } else { u };
        let y = if k == self.params.q { self.dynamics.f_n_q(z)? } else { self.dynamics.f_n_iter(z, k)? };
        Ok(if self.conj { self.twist * y.conj() } else { y })
    }

    /// Principal branch of π_n.
    pub fn pi(&self, big_z: Complex64) -> Complex64 {
        self.params.u_of(big_z).powf(1.0 / self.params.q as f64)
    }

    fn v(&self, z: Complex64) -> Complex64 {
        let u = z.powu(self.params.q as u32);
        u / (u - self.params.eps())
    }

    /// Solves π_n(W)^q = g^{∘k}(π_n(Z))^q in closed form, taking the
    /// solution nearest Z + shift.
    pub fn raw_lift(&self, big_z: Complex64, k: usize, shift: f64) -> Result<(Complex64, Complex64)> {
        let z = self.pi(big_z);
        let z2 = self.g(z, k)?;
        let w = big_z + (self.v(z2) / self.v(z)).ln() / self.two();
        let period = self.params.period();
        let m = ((big_z.re + shift - w.re) / period).round();
        Ok((w + m * period, z2))
    }

    fn measured(&self, big_z: Complex64, k: usize, shift: f64) -> Result<LiftValue> {
        let (w, z2) = self.raw_lift(big_z, k, shift)?;
        let root = self.pi(w);
        let q = self.params.q;
        let residual = (0..q)
            .map(|j| (root * Complex64::from_polar(1.0, 2.0 * PI * j as f64 / q as f64) - z2).norm())
            .fold(f64::INFINITY, f64::min);
        Ok(LiftValue { w, deviation: (w - big_z - shift).norm(), residual })
    }

    fn checked(&self, big_z: Complex64, k: usize, shift: f64) -> Result<LiftValue> {
        let v = self.measured(big_z, k, shift)?;
        if v.deviation >= 0.25 {
            return Err(Error::LiftAmbiguity { distance: v.deviation });
        }
        Ok(v)
    }

    /// F_n(Z) with its deviation from Z + 1, however large.
    pub fn measure_fn(&self, big_z: Complex64) -> Result<LiftValue> {
        self.measured(big_z, self.params.q, 1.0)
    }

    /// G_n(Z) with its deviation from Z − (A_n + θ), however large.
    pub fn measure_gn(&self, big_z: Complex64) -> Result<LiftValue> {
        self.measured(big_z, self.q_prev, -self.shift_g)
    }

    /// F_n(Z), asserted within 1/4 of Z + 1.
    pub fn lift_fn(&self, big_z: Complex64) -> Result<LiftValue> {
        self.checked(big_z, self.params.q, 1.0)
    }

    /// G_n(Z), asserted within 1/4 of Z − (A_n + θ).
    pub fn lift_gn(&self, big_z: Complex64) -> Result<LiftValue> {
        self.checked(big_z, self.q_prev, -self.shift_g)
    }

    /// F_n without the deviation check.
    pub fn f(&self, big_z: Complex64) -> Result<Complex64> {
        Ok(self.raw_lift(big_z, self.params.q, 1.0)?.0)
    }

    /// G_n without the deviation check.
    pub fn g_lift(&self, big_z: Complex64) -> Result<Complex64> {
        Ok(self.raw_lift(big_z, self.q_prev, -self.shift_g)?.0)
    }

    /// F_n⁻¹ by Newton from W − 1.
    pub fn f_inv(&self, w: Complex64) -> Result<Complex64> {
        let mut z = w - 1.0;
        let h = 1e-5;
        for _ in 0..40 {
            let d = self.f(z)? - w;
            if d.norm() < 1e-12 * w.norm().max(1.0) {
                return Ok(z);
            }
            let df = (self.f(z + h)? - self.f(z - h)?) / (2.0 * h);
            z -= d / df;
        }
        Err(Error::CoordinateUnreachable)
    }

    /// |F(G(Z)) − G(F(Z))|.
    pub fn commutation_residual(&self, big_z: Complex64) -> Result<f64> {
        let fg = self.f(self.g_lift(big_z)?)?;
        let gf = self.g_lift(self.f(big_z)?)?;
        Ok((fg - gf).norm())
    }

    /// Multiplier of the q-cycle of the normalized f_n^{∘q}.
    pub fn cycle_multiplier(&self) -> Result<Complex64> {
        let m = self.dynamics.cycle(256)?.multiplier;
        Ok(if self.conj { m.conj() } else { m })
    }
}

/// Settings of the least-squares construction of Φ_n.
#[derive(Clone, Debug)]
pub struct FatouOptions {
    pub degree: usize,
    /// Vertical lines Re Z = X_0 + s, s evenly spread over [−1/2, 1/2].
    pub lines: usize,
    pub heights: usize,
    pub y_max: f64,
    /// Rows below this height are left out of the fit.
    pub y_fit_min: f64,
    pub max_shifts: usize,
}

impl Default for FatouOptions {
    fn default() -> Self {
        FatouOptions { degree: 60, lines: 5, heights: 400, y_max: 45.0, y_fit_min: -20.0, max_shifts: 400 }
    }
}

/// Polynomial in a Vandermonde-with-Arnoldi basis.
#[derive(Clone, Debug)]
struct ArnoldiPoly {
    /// Hessenberg recurrence, (degree+1) × degree.
    hess: DMatrix<Complex64>,
    coeffs: Vec<Complex64>,
}

impl ArnoldiPoly {
    /// Orthonormal basis columns of the points, with the recurrence.
    fn basis(points: &[Complex64], degree: usize) -> (DMatrix<Complex64>, DMatrix<Complex64>) {
        let m = points.len();
        let mut q = DMatrix::<Complex64>::zeros(m, degree + 1);
        let mut h = DMatrix::<Complex64>::zeros(degree + 1, degree);
        q.column_mut(0).fill(Complex64::new(1.0, 0.0));
        let sm = (m as f64).sqrt();
        for k in 0..degree {
            let mut v: DVector<Complex64> = DVector::from_iterator(m, (0..m).map(|i| points[i] * q[(i, k)]));
            for j in 0..=k {
                let hj = q.column(j).dotc(&v) / m as f64;
                h[(j, k)] = hj;
                v -= q.column(j) * hj;
            }
            let nrm = v.norm() / sm;
            h[(k + 1, k)] = Complex64::new(nrm, 0.0);
            q.column_mut(k + 1).copy_from(&(v / Complex64::new(nrm, 0.0)));
        }
        (q, h)
    }

    fn eval(&self, z: Complex64) -> Complex64 {
        let n = self.hess.ncols();
        let mut w = Vec::with_capacity(n + 1);
        w.push(Complex64::new(1.0, 0.0));
        let mut acc = self.coeffs[0];
        for k in 0..n {
            let mut v = z * w[k];
            for (j, wj) in w.iter().enumerate().take(k + 1) {
                v -= self.hess[(j, k)] * wj;
            }
            let next = v / self.hess[(k + 1, k)];
            acc += self.coeffs[k + 1] * next;
            w.push(next);
        }
        acc
    }
}

/// Φ(Z) = κZ + ((κ−1)/(2πi q²ε))·Log(1 − e^{−2πi q²ε Z}) + H(π_n(Z)) on the core
/// strip |Re Z − X_0| ≤ 1/2, extended by Φ∘F = Φ + 1.
#[derive(Clone, Debug)]
pub struct FatouCoordinate {
    pub lift: LiftContext,
    pub base: Complex64,
    /// Center of the core strip (the seam l: Re Z = X_0).
    pub x0: f64,
    pub kappa: Complex64,
    pub multiplier: Complex64,
    /// Largest welding residual over the fitted rows.
    pub fit_residual: f64,
    pub opts: FatouOptions,
    poly: ArnoldiPoly,
    /// Uncorrected value at B; subtracting it makes Φ(B) = B exactly.
    anchor: Complex64,
}

impl FatouCoordinate {
    pub fn new(lift: LiftContext, opts: FatouOptions) -> Result<Self> {
        let base = lift.params.base_point();
        let x0 = base.re;
        let two = lift.two();
        let multiplier = lift.cycle_multiplier()?;
        let kappa = -two / multiplier.ln();
        let mut coord = FatouCoordinate {
            lift,
            base,
            x0,
            kappa,
            multiplier,
            fit_residual: f64::NAN,
            opts,
            poly: ArnoldiPoly { hess: DMatrix::zeros(1, 0), coeffs: vec![Complex64::new(0.0, 0.0)] },
            anchor: Complex64::new(0.0, 0.0),
        };
        coord.fit()?;
        coord.anchor = coord.phi_raw(coord.base);
        Ok(coord)
    }

    /// The explicit part κZ + ((κ−1)/two)·Log(1 − e^{−two·Z}).
    fn singular(&self, big_z: Complex64) -> Complex64 {
        let two = self.lift.two();
        let e = (-two * big_z).exp();
        self.kappa * big_z + (self.kappa - 1.0) / two * (1.0 - e).ln()
    }

    fn fit(&mut self) -> Result<()> {
        let o = &self.opts;
        let ys: Vec<f64> = (0..o.heights)
            .map(|k| {
                let t = -o.y_max.asinh() + 2.0 * o.y_max.asinh() * k as f64 / (o.heights - 1) as f64;
                t.sinh()
            })
            .filter(|&y| y >= o.y_fit_min)
            .collect();
        let mut from = Vec::new();
        let mut to = Vec::new();
        let mut rhs = Vec::new();
        for l in 0..o.lines {
            let s = if o.lines == 1 { 0.0 } else { -0.5 + l as f64 / (o.lines - 1) as f64 };
            for &y in &ys {
                let z = Complex64::new(self.x0 + s, y);
                let (w, z2) = self.lift.raw_lift(z, self.lift.params.q, 1.0)?;
                from.push(self.lift.pi(z));
                to.push(z2);
                rhs.push(1.0 - (self.singular(w) - self.singular(z)));
            }
        }
        let m = from.len();
        let pts: Vec<Complex64> = from.iter().chain(to.iter()).copied().collect();
        let (q, hess) = ArnoldiPoly::basis(&pts, o.degree);
        let a = DMatrix::from_fn(m, o.degree, |i, j| q[(m + i, j + 1)] - q[(i, j + 1)]);
        let b = DVector::from_vec(rhs);
        let svd = a.clone().svd(true, true);
        let sol = svd.solve(&b, 1e-14).map_err(|e| Error::InvalidInput(e.to_string()))?;
        self.fit_residual = (&a * &sol - &b).iter().map(|c| c.norm()).fold(0.0, f64::max);
        let mut coeffs = vec![Complex64::new(0.0, 0.0)];
        coeffs.extend(sol.iter().copied());
        self.poly = ArnoldiPoly { hess, coeffs };
        Ok(())
    }

    fn phi_raw(&self, big_z: Complex64) -> Complex64 {
        self.singular(big_z) + self.poly.eval(self.lift.pi(big_z))
    }

    fn phi_core(&self, big_z: Complex64) -> Complex64 {
        (self.phi_raw(big_z) - self.anchor) + self.base
    }

    /// Moves Z into the core strip; returns the moved point and the number
    /// of forward steps taken (negative for backward).
    pub fn to_core(&self, big_z: Complex64) -> Result<(Complex64, i64)> {
        let mut z = big_z;
        let mut k = 0i64;
        for _ in 0..self.opts.max_shifts {
            if z.re > self.x0 + 0.5 {
                z = self.lift.f_inv(z)?;
                k -= 1;
            } else if z.re < self.x0 - 0.5 {
                z = self.lift.f(z)?;
                k += 1;
            } else {
                return Ok((z, k));
            }
        }
        Err(Error::CoordinateUnreachable)
    }

    pub fn phi(&self, big_z: Complex64) -> Result<Complex64> {
        let (z, k) = self.to_core(big_z)?;
        Ok(self.phi_core(z) - k as f64)
    }

    /// Welding residual |Φ(F(Z)) − Φ(Z) − 1| at the core representative of
    /// Z, with both values taken from the core formula.
    pub fn abel_residual(&self, big_z: Complex64) -> Result<f64> {
        let (z, _) = self.to_core(big_z)?;
        let w = self.lift.f(z)?;
        Ok((self.phi_core(w) - self.phi_core(z) - 1.0).norm())
    }

    /// Φ'(Z) by a central difference.
    pub fn derivative(&self, big_z: Complex64) -> Result<Complex64> {
        let h = 1e-5;
        Ok((self.phi(big_z + h)? - self.phi(big_z - h)?) / (2.0 * h))
    }

    /// Φ⁻¹(V) by Newton from `seed`.
    pub fn phi_inv(&self, v: Complex64, seed: Complex64) -> Result<Complex64> {
        let mut z = seed;
        let h = 1e-5;
        for _ in 0..60 {
            let d = self.phi(z)? - v;
            if d.norm() < 1e-11 * v.norm().max(1.0) {
                return Ok(z);
            }
            let dp = (self.phi(z + h)? - self.phi(z - h)?) / (2.0 * h);
            let mut step = d / dp;
            if step.norm() > 2.0 {
                step *= 2.0 / step.norm();
            }
            z -= step;
        }
        Err(Error::CoordinateUnreachable)
    }
}

/// The strip data of the renormalization.
#[derive(Clone, Debug)]
pub struct RenormContext {
    pub phi: FatouCoordinate,
    pub z_n: Complex64,
    pub rho_n: f64,
    pub theta: f64,
}

/// R(f_n)(z) and the inverse-Newton residual behind it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RenormValue {
    pub value: Complex64,
    pub residual: f64,
}

/// Richardson estimate of R(f_n)'(0).
#[derive(Clone, Debug, PartialEq)]
pub struct RotationEstimate {
    pub estimate: Complex64,
    pub spread: f64,
    pub per_ray: Vec<Complex64>,
}

impl RenormContext {
    /// Z_n = X_n + i/(2π q² r_4^q); X_n defaults to X_0 − 1/2 so ℋ_n(Z_n)
    /// is the core strip of Φ_n.
    pub fn new(phi: FatouCoordinate, x_n: Option<f64>) -> Result<Self> {
        let p = &phi.lift.params;
        let bound = p.height(p.r(Radius::R5));
        let x_n = x_n.unwrap_or(phi.x0 - 0.5);
        if x_n.abs() >= bound {
            return Err(Error::InvalidInput(format!("X_n = {x_n} outside (−{bound}, {bound})")));
        }
        let z_n = Complex64::new(x_n, p.height(p.r(Radius::R4)));
        let theta = phi.lift.dynamics.setup.theta();
        let fz = phi.lift.f(z_n)?;
        let mut lowest = f64::INFINITY;
        for k in 0..256 {
            let t = k as f64 / 255.0;
            let z = z_n * (1.0 - t) + fz * t;
            let v = phi.phi(z)?;
            lowest = lowest.min((-2.0 * PI * v.im).exp());
        }
        Ok(RenormContext { phi, z_n, rho_n: 0.9 * lowest, theta })
    }

    /// exp(Φ(G(Φ⁻¹(exp⁻¹ z)))) with exp(W) = e^{2πiW} and the preimage in ℋ_n(Z_n).
    pub fn renormalize(&self, z: Complex64) -> Result<RenormValue> {
        if z.norm() == 0.0 || z.norm() >= self.rho_n {
            return Err(Error::OutsideCylinder);
        }
        let v = z.ln() / (2.0 * PI * I);
        // height of the preimage, using Φ(Z) ≈ Z + c at the top
        let top = Complex64::new(self.z_n.re + 0.5, v.im);
        let c = self.phi.phi(top)? - top;
        let guess = v - c;
        let shift = (self.z_n.re + 0.5 - guess.re).round();
        let v = v + shift;
        let big_z = self.phi.phi_inv(v, v - c)?;
        if big_z.re < self.z_n.re - 0.25 || big_z.re > self.z_n.re + 1.25 || big_z.im < self.z_n.im {
            return Err(Error::OutsideCylinder);
        }
        let back = self.phi.phi(big_z)?;
        let out = self.phi.phi(self.phi.lift.g_lift(big_z)?)?;
        Ok(RenormValue { value: (2.0 * PI * I * out).exp(), residual: (back - v).norm() })
    }

    /// Richardson difference quotient of R(f_n) at 0 along 4 rays.
    pub fn rotation_check(&self, h: f64, tolerance: f64) -> Result<RotationEstimate> {
        if !(h > 0.0 && h < self.rho_n / 10.0) {
            return Err(Error::InvalidInput(format!("step {h:e} must lie in (0, rho_n/10)")));
        }
        let mut per_ray = Vec::new();
        let mut spread: f64 = 0.0;
        for k in 0..4 {
            let dir = Complex64::from_polar(1.0, 0.3 + k as f64 * PI / 2.0);
            let d1 = self.renormalize(dir * h)?.value / (dir * h);
            let d2 = self.renormalize(dir * (h / 2.0))?.value / (dir * (h / 2.0));
            spread = spread.max((d2 - d1).norm());
            per_ray.push(2.0 * d2 - d1);
        }
        let estimate = per_ray.iter().sum::<Complex64>() / 4.0;
        for d in &per_ray {
            spread = spread.max((d - estimate).norm());
        }
        if spread > 10.0 * tolerance {
            return Err(Error::UnstableDerivative { spread });
        }
        Ok(RotationEstimate { estimate, spread, per_ray })
    }

    /// e^{−2πiθ}, the expected derivative.
    pub fn expected_derivative(&self) -> Complex64 {
        Complex64::from_polar(1.0, -2.0 * PI * self.theta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cfrac::{make_setup, QuotientSequence};
    use crate::dynamics::SeriesOptions;
    use crate::geometry::{Ladder, DYNAMICS_LADDER};

    fn lift_ctx() -> LiftContext {
        let g = QuotientSequence::golden();
        let setup = make_setup(&g, &g, 5, &rug::Integer::from(10), 128).unwrap();
        let params = RegionParams::new(&setup, Ladder::new(0.383, DYNAMICS_LADDER).unwrap()).unwrap();
        let ctx = ExplodedMapContext::exact(setup, &SeriesOptions::default()).unwrap();
        LiftContext::new(params, ctx)
    }

    #[test]
    fn lift_is_near_translation_and_conjugates() {
        let l = lift_ctx();
        let x0 = l.params.base_point().re;
        for y in [-15.0, -3.0, 2.0, 10.0, 20.0] {
            let z = Complex64::new(x0 + 0.3, y);
            let f = l.lift_fn(z).unwrap();
            assert!(f.deviation < 0.25 && f.residual < 1e-9, "{y} {f:?}");
            // G_n lives on Im Z > τ_n(r_1)
            if y > l.params.tau(l.params.r(Radius::R1)) {
                let g = l.lift_gn(z).unwrap();
                assert!(g.deviation < 0.25 && g.residual < 1e-9);
            }
            assert!((l.f_inv(f.w).unwrap() - z).norm() < 1e-10);
        }
        let lo = l.lift_fn(Complex64::new(x0, 5.0)).unwrap().deviation;
        let hi = l.lift_fn(Complex64::new(x0, 30.0)).unwrap().deviation;
        assert!(hi < lo);
    }

    #[test]
    fn fatou_coordinate_contracts() {
        let phi = FatouCoordinate::new(lift_ctx(), FatouOptions::default()).unwrap();
        assert_eq!(phi.phi(phi.base).unwrap(), phi.base);
        for y in [-15.0, 0.5, 12.0, 35.0] {
            let z = Complex64::new(phi.x0 + 0.2, y);
            assert!(phi.abel_residual(z).unwrap() < 1e-6);
        }
        let z = Complex64::new(phi.x0 - 0.3, 4.0);
        let v = phi.phi(z).unwrap();
        assert!((phi.phi_inv(v, z + 0.1).unwrap() - z).norm() < 1e-8);
        let d_lo = (phi.derivative(Complex64::new(phi.x0, 5.0)).unwrap() - 1.0).norm();
        let d_hi = (phi.derivative(Complex64::new(phi.x0, 35.0)).unwrap() - 1.0).norm();
        assert!(d_hi < d_lo);
    }
}
