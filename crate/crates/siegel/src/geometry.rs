//! The radius ladder, the coordinate-plane regions, the covering π_n and the
//! explicit sets 𝒳_n, 𝒴_n.
//!
//! Coordinate-plane objects live in the frame where the perturbation is
//! positive. For odd n (ε_n < 0) that frame is reached by the antiholomorphic
//! involution N(z) = e^{iπ/q}·conj(z), which maps f_n to a map with
//! perturbation |ε_n|. Physical-plane predicates (𝒳_n, 𝒴_n, disks) use the
//! signed ε_n directly.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::cfrac::PerturbationSetup;
use crate::error::{Error, Result};

/// Samples drawn per RNG stream; stream k produces samples [k·CHUNK, (k+1)·CHUNK).
pub const SAMPLER_CHUNK: usize = 4096;

/// Ladder tuned for the golden q = 8, A = 10 case, starting just above the
/// gate threshold (|ε|/π)^{1/q} ≈ 0.383: r_3, r_5, r_7, r_8, r_6, r_4, r'_2,
/// r_2, r_1, r, r', r_0, r'_0.
pub const DYNAMICS_LADDER: [f64; 13] =
    [0.384, 0.386, 0.388, 0.39, 0.4265, 0.427, 0.428, 0.429, 0.43, 0.44, 0.46, 0.50, 0.58];

/// Names of the ladder radii in increasing order.
pub const LADDER_NAMES: [&str; 13] =
    ["r3", "r5", "r7", "r8", "r6", "r4", "r2'", "r2", "r1", "r", "r'", "r0", "r0'"];

/// floor < r_3 < r_5 < r_7 < r_8 < r_6 < r_4 < r'_2 < r_2 < r_1 < r < r' < r_0 < r'_0 < 1.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ladder {
    pub floor: f64,
    pub radii: [f64; 13],
}

/// A ladder radius by name.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Radius {
    R3,
    R5,
    R7,
    R8,
    R6,
    R4,
    R2p,
    R2,
    R1,
    R,
    Rp,
    R0,
    R0p,
}

impl Ladder {
    pub fn new(floor: f64, radii: [f64; 13]) -> Result<Self> {
        let l = Ladder { floor, radii };
        l.validate()?;
        Ok(l)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.floor > 0.0) {
            return Err(Error::InvalidLadder(format!("floor {} must be positive", self.floor)));
        }
        let mut prev = ("floor", self.floor);
        for (name, &v) in LADDER_NAMES.iter().zip(&self.radii) {
            if !(v > prev.1) {
                return Err(Error::InvalidLadder(format!("{name} = {v} must exceed {} = {}", prev.0, prev.1)));
            }
            prev = (name, v);
        }
        if !(self.radii[12] < 1.0) {
            return Err(Error::InvalidLadder(format!("r0' = {} must be below 1", self.radii[12])));
        }
        Ok(())
    }

    /// Geometric ladder from floor + margin to `top`.
    pub fn geometric(floor: f64, margin: f64, top: f64) -> Result<Self> {
        let lo = floor + margin;
        let mut radii = [0.0; 13];
        for (k, r) in radii.iter_mut().enumerate() {
            *r = lo * (top / lo).powf(k as f64 / 12.0);
        }
        Self::new(floor, radii)
    }

    /// The experiment default: geometric from A_n^{-1/q}+0.02 to 0.97.
    pub fn default_for(setup: &PerturbationSetup) -> Result<Self> {
        Self::geometric(default_floor(setup), 0.02, 0.97)
    }

    pub fn get(&self, r: Radius) -> f64 {
        self.radii[r as usize]
    }
}

/// A_n^{-1/q_n}, which equals 1/A when A_n = A^{q_n}.
pub fn default_floor(setup: &PerturbationSetup) -> f64 {
    let ln_a = setup.a_n.to_f64().ln();
    (-ln_a / setup.q() as f64).exp()
}

/// (|ε_n|/π)^{1/q_n}: Q_n(a_n) is nonempty exactly when r_1 exceeds this.
pub fn gate_floor(setup: &PerturbationSetup) -> f64 {
    (setup.epsilon().abs() / PI).powf(1.0 / setup.q() as f64)
}

/// A region of the coordinate plane (Z) or the dynamical plane (z).
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RegionId {
    /// Z-plane: (−1/(q²ε), 0) ∪ ℍ⁺ ∪ ℍ⁻.
    Qn,
    /// Z-plane: Q_n(a).
    QnA(f64),
    /// Z-plane: 𝕂_n(r_2, r_3) with the given pair of radii.
    Kn(Radius, Radius),
    /// Z-plane: Q_n(a_n) ∪ 𝕂_n(r_2, r_3).
    QBn,
    /// Z-plane: ℍ_n(r_6, r_5).
    HnStrip(Radius, Radius),
    /// Z-plane: Im Z > τ_n(r).
    HnHalf(Radius),
    /// z-plane: 𝒳_n(r_8).
    Xn(Radius),
    /// z-plane: 𝒳_n(r_8) minus the closed disk of radius r_7.
    Yn(Radius, Radius),
    /// z-plane: r_in < |z| < r_out.
    Annulus(f64, f64),
    /// z-plane: |z| < r.
    Disk(f64),
}

impl RegionId {
    pub fn is_coordinate_plane(&self) -> bool {
        matches!(self, RegionId::Qn | RegionId::QnA(_) | RegionId::Kn(..) | RegionId::QBn | RegionId::HnStrip(..) | RegionId::HnHalf(_))
    }
}

/// The covering π_n evaluated on one branch.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BranchedPoint {
    pub big_z: Complex64,
    pub branch: usize,
    /// Normalized-frame value.
    pub z: Complex64,
}

/// A point of 𝒴_n lifted into the coordinate plane.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LiftedPoint {
    pub big_w: Complex64,
    /// w = z^q/(z^q − ε_n) in the normalized frame.
    pub w: Complex64,
    /// |π_n(W)^q − z^q| in the normalized frame.
    pub residual: f64,
}

/// Arc length of l(t, θ1, θ2) ∩ 𝒴_n.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ArcCoverage {
    pub length: f64,
    pub stderr: f64,
    pub fraction: f64,
    pub samples: usize,
}

/// Uniform samples from a finite-area region.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleSet {
    pub points: Vec<Complex64>,
    /// Area represented by each point.
    pub weight: f64,
}

/// Ladder plus the perturbation data every region needs.
#[derive(Clone, Debug)]
pub struct RegionParams {
    pub q: usize,
    /// Signed ε_n.
    pub epsilon: f64,
    pub ladder: Ladder,
}

impl RegionParams {
    pub fn new(setup: &PerturbationSetup, ladder: Ladder) -> Result<Self> {
        ladder.validate()?;
        Ok(RegionParams { q: setup.q(), epsilon: setup.epsilon(), ladder })
    }

    pub fn from_parts(q: usize, epsilon: f64, ladder: Ladder) -> Result<Self> {
        ladder.validate()?;
        if q == 0 || epsilon == 0.0 || !epsilon.is_finite() {
            return Err(Error::InvalidInput("need q >= 1 and finite nonzero epsilon".into()));
        }
        Ok(RegionParams { q, epsilon, ladder })
    }

    pub fn r(&self, r: Radius) -> f64 {
        self.ladder.get(r)
    }

    /// |ε_n|, the perturbation in the normalized frame.
    pub fn eps(&self) -> f64 {
        self.epsilon.abs()
    }

    fn q2e(&self) -> f64 {
        (self.q * self.q) as f64 * self.eps()
    }

    /// 1/(q²|ε|), the period of π_n.
    pub fn period(&self) -> f64 {
        1.0 / self.q2e()
    }

    /// 1/(2π q² r^q).
    pub fn height(&self, r: f64) -> f64 {
        1.0 / (2.0 * PI * (self.q * self.q) as f64 * r.powi(self.q as i32))
    }

    /// a_n = 1/(2π q² r_1^q).
    pub fn a_n(&self) -> f64 {
        self.height(self.r(Radius::R1))
    }

    /// B = −1/(π q² r_1^q), the normalization point of Φ_n.
    pub fn base_point(&self) -> Complex64 {
        Complex64::new(-2.0 * self.a_n(), 0.0)
    }

    /// τ_n(r) = log(1 + ε/r^q)/(2π q² ε).
    pub fn tau(&self, r: f64) -> f64 {
        (self.eps() / r.powi(self.q as i32)).ln_1p() / (2.0 * PI * self.q2e())
    }

    /// s_n = r_8^q/(r_8^q + ε).
    pub fn s_n(&self, r8: f64) -> f64 {
        let t = r8.powi(self.q as i32);
        t / (t + self.eps())
    }

    /// The involution between the physical and normalized frames (identity for ε > 0).
    pub fn normalize(&self, z: Complex64) -> Complex64 {
        if self.epsilon > 0.0 {
            z
        } else {
            Complex64::from_polar(1.0, PI / self.q as f64) * z.conj()
        }
    }

    /// w = z^q/(z^q − ε_n) with the signed ε_n; `None` when z^q = ε_n.
    pub fn w_of(&self, z: Complex64) -> Option<Complex64> {
        let u = z.powu(self.q as u32);
        let d = u - self.epsilon;
        (d.norm() > 0.0).then(|| u / d)
    }

    pub fn contains(&self, region: RegionId, p: Complex64) -> bool {
        let (x, y) = (p.re, p.im);
        match region {
            RegionId::Qn => y != 0.0 || (x > -self.period() && x < 0.0),
            RegionId::QnA(a) => {
                let left = p - a + self.period();
                let right = p + a;
                left.re > -left.im.abs() && right.re < right.im.abs()
            }
            RegionId::Kn(r2, r3) => {
                let h3 = self.height(self.r(r3));
                x >= -self.period() - h3 && x <= h3 && y >= self.height(self.r(r2))
            }
            RegionId::QBn => {
                self.contains(RegionId::QnA(self.a_n()), p) || self.contains(RegionId::Kn(Radius::R2, Radius::R3), p)
            }
            RegionId::HnStrip(r6, r5) => x.abs() < self.height(self.r(r5)) && y > self.height(self.r(r6)),
            RegionId::HnHalf(r1) => y > self.tau(self.r(r1)),
            RegionId::Xn(r8) => self.w_of(p).is_some_and(|w| w.norm() < self.s_n(self.r(r8))),
            RegionId::Yn(r8, r7) => p.norm() > self.r(r7) && self.contains(RegionId::Xn(r8), p),
            RegionId::Annulus(a, b) => {
                let m = p.norm();
                m > a && m < b
            }
            RegionId::Disk(r) => p.norm() < r,
        }
    }

    /// π_{n,j}(Z) = (ε/(1 − e^{−2πi q² ε Z}))^{1/q}·e^{2πij/q} in the normalized frame, j ∈ 1..=q.
    pub fn pi_n(&self, big_z: Complex64, branch: usize) -> Result<BranchedPoint> {
        if branch == 0 || branch > self.q {
            return Err(Error::InvalidInput(format!("branch {branch} outside 1..={}", self.q)));
        }
        if !self.contains(RegionId::Qn, big_z) {
            return Err(Error::OutsideDomain { what: "Q_n" });
        }
        let u = self.u_of(big_z);
        let root = u.powf(1.0 / self.q as f64);
        let z = root * Complex64::from_polar(1.0, 2.0 * PI * branch as f64 / self.q as f64);
        Ok(BranchedPoint { big_z, branch, z })
    }

    /// π_n(Z)^q, on every branch.
    pub fn u_of(&self, big_z: Complex64) -> Complex64 {
        let e = (Complex64::new(0.0, -2.0 * PI * self.q2e()) * big_z).exp();
        self.eps() / (1.0 - e)
    }

    /// W = log(w)/(2πi q² ε) for z ∈ 𝒴_n, checked to land in ℍ_n(r_6, r_5).
    pub fn lift_to_h(&self, z: Complex64) -> Result<LiftedPoint> {
        let w_phys = self.w_of(z).ok_or(Error::NearCycleDegeneracy)?;
        // the involution conjugates w
        let w = if self.epsilon > 0.0 { w_phys } else { w_phys.conj() };
        let big_w = w.ln() / Complex64::new(0.0, 2.0 * PI * self.q2e());
        let u = self.normalize(z).powu(self.q as u32);
        let residual = (self.u_of(big_w) - u).norm();
        if !self.contains(RegionId::HnStrip(Radius::R6, Radius::R5), big_w) {
            return Err(Error::InclusionViolation(format!("z = {z}, W = {big_w} not in H_n(r6, r5)")));
        }
        Ok(LiftedPoint { big_w, w, residual })
    }

    /// (F4.1, F4.2) for z: |w| ≤ s_n, and the disk inequality expressing
    /// |z| ≥ r_7. The second is only a disk when r_7^q > |ε_n|; otherwise it is `None`.
    pub fn f4_inequalities(&self, z: Complex64) -> (bool, Option<bool>) {
        let Some(w) = self.w_of(z) else { return (false, None) };
        let s = self.s_n(self.r(Radius::R8));
        let r2q = self.r(Radius::R7).powi(2 * self.q as i32);
        let e2 = self.epsilon * self.epsilon;
        let slack = 1e-12;
        let f41 = w.norm_sqr() <= s * s * (1.0 + slack);
        if r2q <= e2 {
            return (f41, None);
        }
        let cx = r2q / (r2q - e2);
        let rad = self.eps() * r2q.sqrt() / (r2q - e2);
        let f42 = (w.re - cx).powi(2) + w.im * w.im <= rad * rad * (1.0 + slack);
        (f41, Some(f42))
    }

    /// Fraction of the circle |z| = t lying in 𝒳_n(r_8), by the chord-angle formula.
    pub fn analytic_arc_fraction(&self, t: f64) -> f64 {
        let big_t = t.powi(self.q as i32);
        let e = self.eps();
        let s = self.s_n(self.r(Radius::R8));
        let c = (s * s * (big_t * big_t + e * e) - big_t * big_t) / (2.0 * big_t * e * s * s);
        (-c).clamp(-1.0, 1.0).acos() / PI
    }

    /// dens of 𝒴_n in annulus(r_7, r_8) by Simpson quadrature of the arc fraction.
    pub fn analytic_density(&self) -> f64 {
        let (a, b) = (self.r(Radius::R7), self.r(Radius::R8));
        let n = 2000;
        let h = (b - a) / n as f64;
        let f = |t: f64| self.analytic_arc_fraction(t) * 2.0 * t;
        let mut s = f(a) + f(b);
        for k in 1..n {
            s += f(a + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0 / (b * b - a * a)
    }

    /// Length of l(t, θ1, θ2) ∩ 𝒴_n(r_8, r_7) from `samples` equally spaced angles.
    pub fn arc_coverage(&self, t: f64, theta1: f64, theta2: f64, samples: usize) -> Result<ArcCoverage> {
        if samples == 0 || theta2 < theta1 || theta2 - theta1 > 2.0 * PI + 1e-12 {
            return Err(Error::InvalidInput("need samples > 0 and θ1 ≤ θ2 ≤ θ1 + 2π".into()));
        }
        let span = theta2 - theta1;
        if span == 0.0 {
            return Ok(ArcCoverage { length: 0.0, stderr: 0.0, fraction: 0.0, samples });
        }
        let hits = (0..samples)
            .filter(|&k| {
                let th = theta1 + span * (k as f64 + 0.5) / samples as f64;
                self.contains(RegionId::Yn(Radius::R8, Radius::R7), Complex64::from_polar(t, th))
            })
            .count();
        let p = hits as f64 / samples as f64;
        let scale = span * t;
        Ok(ArcCoverage {
            length: p * scale,
            stderr: (p * (1.0 - p) / samples as f64).sqrt() * scale,
            fraction: p,
            samples,
        })
    }

    /// Uniform samples of an annulus, a disk, or 𝒴_n (by rejection from its annulus).
    pub fn region_sampler(&self, region: RegionId, count: usize, seed: u64) -> Result<SampleSet> {
        match region {
            RegionId::Annulus(a, b) => Ok(annulus_sampler(a, b, count, seed)),
            RegionId::Disk(r) => Ok(annulus_sampler(0.0, r, count, seed)),
            RegionId::Yn(r8, r7) => {
                let (a, b) = (self.r(r7), self.r(r8));
                let mut points = Vec::with_capacity(count);
                let mut drawn = 0usize;
                let mut round = 0u64;
                while points.len() < count {
                    let batch = annulus_sampler(a, b, count.max(SAMPLER_CHUNK), seed.wrapping_add(round));
                    drawn += batch.points.len();
                    points.extend(batch.points.into_iter().filter(|&z| self.contains(region, z)));
                    round += 1;
                    if round > 64 && points.is_empty() {
                        return Err(Error::UndefinedDensity);
                    }
                }
                let kept = points.len();
                points.truncate(count);
                let area = PI * (b * b - a * a) * kept as f64 / drawn as f64;
                Ok(SampleSet { points, weight: area / count as f64 })
            }
            _ => Err(Error::UnsupportedRegion),
        }
    }

    /// Uniform samples of Q_n(a_n) cut to the band y_lo < Im Z < y_hi, by rejection
    /// from the box −P < Re Z < 0.
    pub fn qn_band_sampler(&self, y_lo: f64, y_hi: f64, count: usize, seed: u64) -> Result<Vec<Complex64>> {
        if !(y_hi > y_lo) {
            return Err(Error::InvalidInput("empty band".into()));
        }
        let region = RegionId::QnA(self.a_n());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::with_capacity(count);
        let mut tries = 0usize;
        while out.len() < count {
            let z = Complex64::new(-self.period() * rng.gen::<f64>(), y_lo + (y_hi - y_lo) * rng.gen::<f64>());
            if self.contains(region, z) {
                out.push(z);
            }
            tries += 1;
            if tries > 1000 * count.max(1) {
                return Err(Error::UndefinedDensity);
            }
        }
        Ok(out)
    }

    /// max |π_n(Z)|^q / r^q over the points of `samples` lying in Q_n(1/(2π q² r^q)).
    pub fn observed_root_bound(&self, r: f64, samples: &[Complex64]) -> f64 {
        let region = RegionId::QnA(self.height(r));
        samples
            .iter()
            .filter(|&&z| self.contains(region, z))
            .map(|&z| self.u_of(z).norm() / r.powi(self.q as i32))
            .fold(0.0, f64::max)
    }
}

/// Area-uniform samples of r_in < |z| < r_out; one ChaCha stream per chunk so
/// the output does not depend on the thread count.
pub fn annulus_sampler(r_in: f64, r_out: f64, count: usize, seed: u64) -> SampleSet {
    let chunks = count.div_ceil(SAMPLER_CHUNK);
    let (a2, b2) = (r_in * r_in, r_out * r_out);
    let points: Vec<Complex64> = (0..chunks)
        .into_par_iter()
        .flat_map_iter(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            let n = SAMPLER_CHUNK.min(count - k * SAMPLER_CHUNK);
            (0..n)
                .map(|_| {
                    let r = (a2 + (b2 - a2) * rng.gen::<f64>()).sqrt();
                    Complex64::from_polar(r, 2.0 * PI * rng.gen::<f64>())
                })
                .collect::<Vec<_>>()
        })
        .collect();
    let weight = if count == 0 { 0.0 } else { PI * (b2 - a2) / count as f64 };
    SampleSet { points, weight }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn golden5() -> RegionParams {
        // ε_5 for golden α, θ, A_5 = 10
        let theta = (5f64.sqrt() - 1.0) / 2.0;
        let eps = -1.0 / (64.0 * (10.0 + theta) + 8.0 * 5.0);
        let ladder = Ladder::geometric(0.40, 0.02, 0.97).unwrap();
        RegionParams::from_parts(8, eps, ladder).unwrap()
    }

    #[test]
    fn ladder_rejects_swaps() {
        let mut r = DYNAMICS_LADDER;
        assert!(Ladder::new(0.383, r).is_ok());
        r.swap(3, 4);
        assert!(matches!(Ladder::new(0.383, r), Err(Error::InvalidLadder(_))));
        assert!(Ladder::new(0.39, DYNAMICS_LADDER).is_err());
    }

    #[test]
    fn basic_memberships() {
        let p = golden5();
        assert!(p.contains(RegionId::Qn, Complex64::new(-1e-9, 0.0)));
        assert!(!p.contains(RegionId::Qn, Complex64::new(0.0, 0.0)));
        let r7 = p.r(Radius::R7);
        for k in 0..32 {
            let z = Complex64::from_polar(r7, k as f64 * 0.2);
            assert!(!p.contains(RegionId::Yn(Radius::R8, Radius::R7), z));
        }
    }

    #[test]
    fn pi_n_behaviour() {
        let p = golden5();
        let z0 = Complex64::new(-3.0, 5.0);
        let a = p.pi_n(z0, 8).unwrap().z.norm();
        let b = p.pi_n(z0 + Complex64::new(0.0, 200.0), 8).unwrap().z.norm();
        assert!(b < a);
        let shifted = p.u_of(z0 + p.period());
        assert!((shifted - p.u_of(z0)).norm() < 1e-12 * p.u_of(z0).norm());
        let u = p.u_of(z0);
        for j in 1..=8 {
            let z = p.pi_n(z0, j).unwrap().z;
            assert!((z.powu(8) - u).norm() < 1e-12 * u.norm());
            // the BranchedPoint identity
            let e = (Complex64::new(0.0, -2.0 * PI * 64.0 * p.eps()) * z0).exp();
            assert!((z.powu(8) * (1.0 - e) - p.eps()).norm() < 1e-12 * p.eps());
        }
        assert!(matches!(p.pi_n(Complex64::new(1.0, 0.0), 1), Err(Error::OutsideDomain { .. })));
    }

    #[test]
    fn arc_fraction_matches_sampling() {
        let p = golden5();
        let (r7, r8) = (p.r(Radius::R7), p.r(Radius::R8));
        let t = 0.5 * (r7 + r8);
        let measured = p.arc_coverage(t, 0.0, 2.0 * PI, 10_000).unwrap();
        assert!((measured.fraction - p.analytic_arc_fraction(t)).abs() < 0.01);
        // brute-force circle sampling over the annulus
        let s = annulus_sampler(r7, r8, 10_000, 7);
        let hits = s.points.iter().filter(|&&z| p.contains(RegionId::Yn(Radius::R8, Radius::R7), z)).count();
        assert!((hits as f64 / 1e4 - p.analytic_density()).abs() < 0.015);
        assert_eq!(p.arc_coverage(t, 1.0, 1.0, 1000).unwrap().length, 0.0);
    }

    #[test]
    fn lifts_land_in_the_strip() {
        let p = golden5();
        let s = p.region_sampler(RegionId::Yn(Radius::R8, Radius::R7), 2000, 3).unwrap();
        let (r6, r7) = (p.r(Radius::R6), p.r(Radius::R7));
        let q = p.q as i32;
        let s_n = p.s_n(p.r(Radius::R8));
        for &z in &s.points {
            let l = p.lift_to_h(z).unwrap();
            assert!(l.residual < 1e-12);
            assert!(l.big_w.im > p.tau(p.r(Radius::R8)) && p.tau(p.r(Radius::R8)) > p.height(r6));
            let lo = r7.powi(q) / (r7.powi(q) + p.eps());
            assert!(l.w.norm() > lo && l.w.norm() < s_n);
            assert!(l.w.arg().abs() <= 1.2 * p.eps() / r7.powi(q));
            assert_eq!(p.f4_inequalities(z), (true, Some(true)));
        }
    }

    #[test]
    fn sampler_is_reproducible_and_area_uniform() {
        let a = annulus_sampler(0.4, 0.6, 10_000, 11);
        assert_eq!(a, annulus_sampler(0.4, 0.6, 10_000, 11));
        let mut r: Vec<f64> = a.points.iter().map(|z| z.norm()).collect();
        r.sort_by(|x, y| x.partial_cmp(y).unwrap());
        let ks = r
            .iter()
            .enumerate()
            .map(|(i, &x)| ((x * x - 0.16) / (0.36 - 0.16) - (i as f64 + 0.5) / 1e4).abs())
            .fold(0.0, f64::max);
        assert!(ks < 0.02, "{ks}");
        assert!(r[0] > 0.4 && r[r.len() - 1] < 0.6);
    }

    #[test]
    fn infinite_regions_unsupported() {
        assert_eq!(golden5().region_sampler(RegionId::QBn, 10, 0), Err(Error::UnsupportedRegion));
    }

    proptest! {
        #[test]
        fn random_ladders_validate_iff_sorted(v in proptest::collection::vec(0.01f64..0.99, 13), floor in 0.001f64..0.01) {
            let mut radii = [0.0; 13];
            radii.copy_from_slice(&v);
            let sorted = radii.windows(2).all(|w| w[0] < w[1]);
            prop_assert_eq!(Ladder::new(floor, radii).is_ok(), sorted);
        }

        #[test]
        fn branches_share_the_power(x in -50.0f64..-1.0, y in 0.5f64..60.0) {
            let p = golden5();
            let z = Complex64::new(x, y);
            let u = p.u_of(z);
            for j in 1..=8 {
                let b = p.pi_n(z, j).unwrap().z.powu(8);
                prop_assert!((b - u).norm() <= 1e-10 * u.norm());
            }
        }
    }
}
