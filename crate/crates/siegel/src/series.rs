//! Truncated power series with f64 complex coefficients.

use num_complex::Complex64;

/// Σ c_m z^m for m = 0..len.
#[derive(Clone, Debug, PartialEq)]
pub struct PowerSeries {
    pub coeffs: Vec<Complex64>,
}

impl PowerSeries {
    pub fn new(coeffs: Vec<Complex64>) -> Self {
        PowerSeries { coeffs }
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.coeffs.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, c| acc * z + c)
    }

    /// Value and first derivative by a joint Horner pass.
    pub fn eval_d(&self, z: Complex64) -> (Complex64, Complex64) {
        let zero = Complex64::new(0.0, 0.0);
        let mut f = zero;
        let mut d = zero;
        for c in self.coeffs.iter().rev() {
            d = d * z + f;
            f = f * z + c;
        }
        (f, d)
    }

    /// Solves s(z) = w by Newton from `seed`; `None` if it fails to settle
    /// or leaves the disk of radius `max_radius`.
    pub fn invert(&self, w: Complex64, seed: Complex64, max_radius: f64) -> Option<Complex64> {
        let scale = w.norm().max(1e-300);
        let mut z = seed;
        for _ in 0..80 {
            let (f, d) = self.eval_d(z);
            if d.norm() == 0.0 {
                return None;
            }
            let mut step = (f - w) / d;
            // damp large steps
            let cap = 0.25 * max_radius;
            if step.norm() > cap {
                step *= cap / step.norm();
            }
            z -= step;
            if !z.re.is_finite() || z.norm() > max_radius {
                return None;
            }
            if step.norm() <= 1e-15 * z.norm().max(scale) {
                let (f, _) = self.eval_d(z);
                return ((f - w).norm() <= 1e-12 * scale.max(1e-14)).then_some(z);
            }
        }
        None
    }
}
