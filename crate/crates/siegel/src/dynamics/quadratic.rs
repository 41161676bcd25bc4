//! The quadratic family P(z) = λz + z² and its orbit engine.

use num_complex::Complex64;
use rug::float::Constant;
use rug::{Complex, Float};

/// e^{2πi·x} at the precision of `x`.
pub fn expi2pi(x: &Float) -> Complex {
    let prec = x.prec();
    let two_pi = Float::with_val(prec, Constant::Pi) * 2u32;
    let t = Float::with_val(prec, x * &two_pi);
    let (s, c) = t.sin_cos(Float::new(prec));
    Complex::with_val(prec, (c, s))
}

/// e^{2πi·w} for complex w.
pub fn cexpi2pi(w: &Complex) -> Complex {
    let prec = w.prec().0;
    let two_pi = Float::with_val(prec, Constant::Pi) * 2u32;
    let iw = Complex::with_val(prec, (Float::with_val(prec, -w.imag()), w.real()));
    Complex::with_val(prec, iw * two_pi).exp()
}

pub fn to_c64(z: &Complex) -> Complex64 {
    Complex64::new(z.real().to_f64(), z.imag().to_f64())
}

pub fn from_c64(z: Complex64, prec: u32) -> Complex {
    Complex::with_val(prec, (z.re, z.im))
}

/// P(z) = λz + z² with λ = e^{2πi·rotation}.
#[derive(Clone, Debug)]
pub struct QuadraticMap {
    pub rotation: Float,
    pub lambda: Complex,
    lambda64: Complex64,
}

/// Where an orbit ended.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OrbitEnd {
    pub z: Complex64,
    pub escaped_at: Option<u64>,
}

impl QuadraticMap {
    pub fn new(rotation: Float) -> Self {
        let lambda = expi2pi(&rotation);
        let lambda64 = to_c64(&lambda);
        QuadraticMap { rotation, lambda, lambda64 }
    }

    pub fn from_f64(rotation: f64, prec: u32) -> Self {
        Self::new(Float::with_val(prec, rotation))
    }

    pub fn lambda64(&self) -> Complex64 {
        self.lambda64
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.lambda64 * z + z * z
    }

    pub fn eval_mp(&self, z: &Complex) -> Complex {
        let prec = z.prec().0;
        Complex::with_val(prec, &self.lambda * z) + Complex::with_val(prec, z.square_ref())
    }

    /// P^k(z), stopping at the first index whose modulus exceeds `escape_radius`.
    pub fn iterate(&self, z: Complex64, k: u64, escape_radius: f64) -> OrbitEnd {
        let r2 = escape_radius * escape_radius;
        let mut z = z;
        for i in 0..k {
            if !(z.norm_sqr() <= r2) {
                return OrbitEnd { z, escaped_at: Some(i) };
            }
            z = self.eval(z);
        }
        let escaped_at = (!(z.norm_sqr() <= r2)).then_some(k);
        OrbitEnd { z, escaped_at }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn golden() -> QuadraticMap {
        let prec = 128;
        let g = (Float::with_val(prec, 5).sqrt() - 1u32) / 2u32;
        QuadraticMap::new(g)
    }

    #[test]
    fn zero_is_fixed() {
        let m = golden();
        let end = m.iterate(Complex64::new(0.0, 0.0), 1000, 2.0);
        assert_eq!(end, OrbitEnd { z: Complex64::new(0.0, 0.0), escaped_at: None });
        assert_eq!(m.iterate(Complex64::new(0.3, 0.1), 0, 2.0).z, Complex64::new(0.3, 0.1));
    }

    #[test]
    fn far_points_escape_at_once() {
        let end = golden().iterate(Complex64::new(2.5, 0.0), 10, 2.0);
        assert_eq!(end.escaped_at, Some(0));
    }

    #[test]
    fn golden_siegel_orbit_stays() {
        let end = golden().iterate(Complex64::new(0.1, 0.0), 10_000, 2.0);
        assert_eq!(end.escaped_at, None);
        assert!(end.z.norm() < 0.5);
    }

    #[test]
    fn unit_multiplier() {
        assert!((golden().lambda64().norm() - 1.0).abs() < 1e-15);
    }
}
