//! The linearizing map φ_α of P_α: φ(λz) = P_α(φ(z)), φ(0) = 0, φ'(0) = 1.

use num_complex::Complex64;
use rug::{Complex, Float};

use super::quadratic::to_c64;
use crate::series::PowerSeries;

/// Divisors |λ^m − λ| below this are left out of the radius fit.
pub const FIT_SPIKE_THRESHOLD: f64 = 1e-6;

/// Power series of φ_α with a conformal-radius estimate.
#[derive(Clone, Debug)]
pub struct LinearizerSeries {
    pub lambda: Complex,
    /// c_1..c_M, stored from index 0.
    pub coeffs: Vec<Complex>,
    pub order: usize,
    /// r̂_α from the tail slope of log|c_m|.
    pub radius_estimate: f64,
    pub fit_window: (usize, usize),
    /// First index whose small divisor fell below working precision.
    pub breakdown_at: Option<usize>,
    scaled: PowerSeries,
}

impl LinearizerSeries {
    /// c_m (1-based).
    pub fn coeff(&self, m: usize) -> &Complex {
        &self.coeffs[m - 1]
    }

    /// φ(z) at the precision of `z`.
    pub fn eval_mp(&self, z: &Complex) -> Complex {
        let prec = z.prec().0;
        let mut acc = Complex::with_val(prec, 0);
        for c in self.coeffs.iter().rev() {
            acc += c;
            acc *= z;
        }
        acc
    }

    /// φ(z) in double precision.
    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.scaled.eval(z / self.radius_estimate)
    }

    /// The series of φ(r̂·δ), whose coefficients are O(1).
    pub fn scaled_series(&self) -> &PowerSeries {
        &self.scaled
    }

    /// |P_α(φ(z)) − φ(λz)| at the precision of `z`.
    pub fn conjugacy_residual(&self, z: &Complex) -> f64 {
        let prec = z.prec().0;
        let phi = self.eval_mp(z);
        let lhs = Complex::with_val(prec, &self.lambda * &phi) + Complex::with_val(prec, phi.square_ref());
        let rhs = self.eval_mp(&Complex::with_val(prec, &self.lambda * z));
        to_c64(&Complex::with_val(prec, lhs - rhs)).norm()
    }
}

/// Coefficients from c_m = Σ_{i=1}^{m−1} c_i c_{m−i} / (λ^m − λ), c_1 = 1.
pub fn linearizer(lambda: &Complex, order: usize) -> LinearizerSeries {
    let prec = lambda.prec().0;
    let tiny = 2f64.powi(-(prec as i32 - 10));
    let mut coeffs: Vec<Complex> = vec![Complex::with_val(prec, 1)];
    let mut divisors = vec![f64::INFINITY];
    let mut lam_pow = lambda.clone();
    let mut breakdown_at = None;
    for m in 2..=order {
        lam_pow *= lambda;
        let div = Complex::with_val(prec, &lam_pow - lambda);
        let dabs = to_c64(&div).norm();
        if dabs < tiny {
            breakdown_at = Some(m);
            break;
        }
        let mut s = Complex::with_val(prec, 0);
        for i in 1..m {
            s += Complex::with_val(prec, &coeffs[i - 1] * &coeffs[m - i - 1]);
        }
        coeffs.push(s / div);
        divisors.push(dabs);
    }
    let len = coeffs.len();
    let lo = (3 * len / 4).max(1);
    let pts: Vec<(f64, f64)> = (lo..=len)
        .filter(|&m| divisors[m - 1] >= FIT_SPIKE_THRESHOLD)
        .map(|m| {
            let a = Float::with_val(64, coeffs[m - 1].abs_ref()).ln().to_f64();
            (m as f64, a)
        })
        .collect();
    let slope = least_squares_slope(&pts);
    let radius_estimate = if slope.is_finite() { (-slope).exp() } else { f64::NAN };
    let r = Float::with_val(prec, radius_estimate);
    let mut rp = Float::with_val(prec, 1);
    let mut scaled = vec![Complex64::new(0.0, 0.0)];
    for c in &coeffs {
        rp *= &r;
        scaled.push(to_c64(&Complex::with_val(prec, c * &rp)));
    }
    LinearizerSeries {
        lambda: lambda.clone(),
        coeffs,
        order: len,
        radius_estimate,
        fit_window: (lo, len),
        breakdown_at,
        scaled: PowerSeries::new(scaled),
    }
}

/// Ordinary least-squares slope of y on x.
pub fn least_squares_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return f64::NAN;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::super::quadratic::expi2pi;
    use super::*;
    use rug::float::Constant;

    fn golden_lambda(prec: u32) -> Complex {
        let g = (Float::with_val(prec, 5).sqrt() - 1u32) / 2u32;
        expi2pi(&g)
    }

    #[test]
    fn normalization_and_second_coefficient() {
        let lam = golden_lambda(128);
        let s = linearizer(&lam, 50);
        assert_eq!(*s.coeff(1), Complex::with_val(128, 1));
        // c_2 = 1/(λ² − λ) with λ rebuilt from cos/sin of 2πθ
        let g = (Float::with_val(128, 5).sqrt() - 1u32) / 2u32;
        let t = g * Float::with_val(128, Constant::Pi) * 2u32;
        let l2 = Complex::with_val(128, (t.clone().cos(), t.sin()));
        let expect = Complex::with_val(128, 1) / (Complex::with_val(128, l2.square_ref()) - &l2);
        let diff = to_c64(&Complex::with_val(128, s.coeff(2) - &expect)).norm();
        assert!(diff < 1e-30);
    }

    #[test]
    fn golden_radius_and_residual() {
        let lam = golden_lambda(128);
        let s = linearizer(&lam, 200);
        assert!(s.breakdown_at.is_none());
        assert!((s.radius_estimate - 0.332).abs() < 0.01, "{}", s.radius_estimate);
        let r = s.radius_estimate / 2.0;
        for k in 0..16 {
            let a = k as f64 * 0.39;
            let z = Complex::with_val(128, (r * a.cos(), r * a.sin()));
            assert!(s.conjugacy_residual(&z) < 1e-12);
        }
        // double-precision evaluation agrees with the big-float one
        let z = Complex64::new(0.1, 0.05);
        let big = to_c64(&s.eval_mp(&Complex::with_val(128, (0.1, 0.05))));
        assert!((s.eval(z) - big).norm() < 1e-14);
    }

    #[test]
    fn root_of_unity_breaks_down() {
        let third = Float::with_val(128, 1) / 3u32;
        let s = linearizer(&expi2pi(&third), 20);
        assert_eq!(s.breakdown_at, Some(4));
        assert_eq!(s.order, 3);
    }
}
