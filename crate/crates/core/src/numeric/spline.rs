use crate::error::{invalid, Result};
use crate::scalar::Real;

/// Piecewise-cubic interpolant stored in Hermite form (values and slopes at
/// the knots).
#[derive(Debug, Clone, PartialEq)]
pub struct Cubic<T> {
    x: Vec<T>,
    y: Vec<T>,
    d: Vec<T>,
}

fn check_knots<T: Real>(x: &[T], y: &[T]) -> Result<()> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(invalid("interpolation needs at least two (x, y) pairs"));
    }
    if x.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(invalid("interpolation knots must be strictly increasing"));
    }
    Ok(())
}

impl<T: Real> Cubic<T> {
    /// Natural cubic spline (zero second derivative at both ends).
    pub fn natural(x: &[T], y: &[T]) -> Result<Self> {
        check_knots(x, y)?;
        let n = x.len();
        if n == 2 {
            let s = (y[1] - y[0]) / (x[1] - x[0]);
            return Ok(Self {
                x: x.to_vec(),
                y: y.to_vec(),
                d: vec![s, s],
            });
        }
        let two = T::lit(2.0);
        let three = T::lit(3.0);
        let h: Vec<T> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let delta: Vec<T> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / h[i]).collect();
        // tridiagonal system for knot slopes
        let mut diag = vec![T::zero(); n];
        let mut upper = vec![T::zero(); n];
        let mut lower = vec![T::zero(); n];
        let mut rhs = vec![T::zero(); n];
        diag[0] = two;
        upper[0] = T::one();
        rhs[0] = three * delta[0];
        for i in 1..n - 1 {
            lower[i] = h[i];
            diag[i] = two * (h[i - 1] + h[i]);
            upper[i] = h[i - 1];
            rhs[i] = three * (h[i] * delta[i - 1] + h[i - 1] * delta[i]);
        }
        lower[n - 1] = T::one();
        diag[n - 1] = two;
        rhs[n - 1] = three * delta[n - 2];
        for i in 1..n {
            let m = lower[i] / diag[i - 1];
            diag[i] = diag[i] - m * upper[i - 1];
            rhs[i] = rhs[i] - m * rhs[i - 1];
        }
        let mut d = vec![T::zero(); n];
        d[n - 1] = rhs[n - 1] / diag[n - 1];
        for i in (0..n - 1).rev() {
            d[i] = (rhs[i] - upper[i] * d[i + 1]) / diag[i];
        }
        Ok(Self {
            x: x.to_vec(),
            y: y.to_vec(),
            d,
        })
    }

    /// Monotone piecewise-cubic Hermite interpolant (Fritsch–Carlson slopes).
    pub fn pchip(x: &[T], y: &[T]) -> Result<Self> {
        check_knots(x, y)?;
        let n = x.len();
        let h: Vec<T> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let delta: Vec<T> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / h[i]).collect();
        let mut d = vec![T::zero(); n];
        if n == 2 {
            d.fill(delta[0]);
            return Ok(Self {
                x: x.to_vec(),
                y: y.to_vec(),
                d,
            });
        }
        let two = T::lit(2.0);
        let three = T::lit(3.0);
        for i in 1..n - 1 {
            if delta[i - 1] * delta[i] > T::zero() {
                let w1 = two * h[i] + h[i - 1];
                let w2 = h[i] + two * h[i - 1];
                d[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
            }
        }
        let end = |h0: T, h1: T, d0: T, d1: T| {
            let s = ((two * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
            if s.signum() != d0.signum() {
                T::zero()
            } else if d0.signum() != d1.signum() && s.abs() > (three * d0).abs() {
                three * d0
            } else {
                s
            }
        };
        d[0] = end(h[0], h[1], delta[0], delta[1]);
        d[n - 1] = end(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
        Ok(Self {
            x: x.to_vec(),
            y: y.to_vec(),
            d,
        })
    }

    /// Natural spline, replaced by the monotone interpolant when the data are
    /// monotone but the spline is not.
    pub fn natural_or_monotone(x: &[T], y: &[T]) -> Result<Self> {
        let s = Self::natural(x, y)?;
        let increasing = y.windows(2).all(|w| w[1] >= w[0]);
        if increasing && !s.is_nondecreasing() {
            Self::pchip(x, y)
        } else {
            Ok(s)
        }
    }

    fn segment(&self, t: T) -> usize {
        let n = self.x.len();
        match self.x.binary_search_by(|v| v.partial_cmp(&t).expect("finite knots")) {
            Ok(i) => i.min(n - 2),
            Err(0) => 0,
            Err(i) => (i - 1).min(n - 2),
        }
    }

    /// Evaluates the interpolant; outside the knots the end cubic is extended.
    pub fn eval(&self, t: T) -> T {
        let i = self.segment(t);
        let h = self.x[i + 1] - self.x[i];
        let s = (t - self.x[i]) / h;
        let two = T::lit(2.0);
        let three = T::lit(3.0);
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = two * s3 - three * s2 + T::one();
        let h10 = s3 - two * s2 + s;
        let h01 = three * s2 - two * s3;
        let h11 = s3 - s2;
        h00 * self.y[i] + h10 * h * self.d[i] + h01 * self.y[i + 1] + h11 * h * self.d[i + 1]
    }

    /// Whether the interpolant has a non-negative derivative everywhere
    /// between the first and last knot.
    pub fn is_nondecreasing(&self) -> bool {
        let two = T::lit(2.0);
        let three = T::lit(3.0);
        let six = T::lit(6.0);
        for i in 0..self.x.len() - 1 {
            let h = self.x[i + 1] - self.x[i];
            let delta = (self.y[i + 1] - self.y[i]) / h;
            let (d0, d1) = (self.d[i], self.d[i + 1]);
            // derivative is the quadratic p(s) = d0 + b s + c s^2 on s in [0,1]
            let b = six * delta - T::lit(4.0) * d0 - two * d1;
            let c = three * (d0 + d1) - six * delta;
            let tol = T::lit(1e3) * T::epsilon() * (d0.abs() + d1.abs() + delta.abs());
            if d0 < -tol || d1 < -tol {
                return false;
            }
            if c != T::zero() {
                let s = -b / (two * c);
                if s > T::zero() && s < T::one() && d0 + b * s + c * s * s < -tol {
                    return false;
                }
            }
        }
        true
    }

    pub fn knots(&self) -> &[T] {
        &self.x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolates_knots() {
        let x = [0.0f64, 0.3, 0.7, 1.0, 1.6];
        let y = [0.0f64, 0.5, -0.2, 1.0, 0.9];
        for s in [Cubic::natural(&x, &y).unwrap(), Cubic::pchip(&x, &y).unwrap()] {
            for (&a, &b) in x.iter().zip(&y) {
                assert!((s.eval(a) - b).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn natural_spline_reproduces_line_and_has_free_ends() {
        let x: Vec<f64> = (0..6).map(|i| i as f64 * 0.2).collect();
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v - 1.0).collect();
        let s = Cubic::natural(&x, &y).unwrap();
        assert!((s.eval(0.55) - 0.65).abs() < 1e-13);

        let y: Vec<f64> = x.iter().map(|v| v * v * v).collect();
        let s = Cubic::natural(&x, &y).unwrap();
        let h = 1e-4;
        let second = |t: f64| (s.eval(t + h) - 2.0 * s.eval(t) + s.eval(t - h)) / (h * h);
        assert!(second(h).abs() < 1e-2);
    }

    #[test]
    fn pchip_fallback_keeps_step_data_monotone() {
        let x = [0.0f64, 1.0, 2.0, 3.0, 4.0];
        let y = [0.0f64, 0.0, 1.0, 1.0, 1.0];
        assert!(!Cubic::natural(&x, &y).unwrap().is_nondecreasing());
        let s = Cubic::natural_or_monotone(&x, &y).unwrap();
        assert!(s.is_nondecreasing());
        let mut prev = f64::NEG_INFINITY;
        for i in 0..=400 {
            let v = s.eval(i as f64 * 0.01);
            assert!(v >= prev - 1e-15);
            prev = v;
        }
    }

    #[test]
    fn rejects_unsorted_knots() {
        assert!(Cubic::natural(&[0.0f64, 0.0, 1.0], &[1.0, 2.0, 3.0]).is_err());
        assert!(Cubic::pchip(&[0.0f64], &[1.0]).is_err());
    }
}
