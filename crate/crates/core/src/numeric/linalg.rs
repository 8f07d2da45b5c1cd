use crate::error::{invalid, Result};
use crate::scalar::Real;

/// Least-squares solution of `A x ≈ b` by Householder QR.
///
/// `rows` holds the design matrix row by row. Monomial design matrices on
/// `[0, 1]` are badly conditioned at order 8, so the normal equations are
/// avoided.
pub fn least_squares<T: Real>(rows: &[Vec<T>], rhs: &[T]) -> Result<Vec<T>> {
    let m = rows.len();
    if m == 0 || m != rhs.len() {
        return Err(invalid("least squares: empty system or length mismatch"));
    }
    let n = rows[0].len();
    if n == 0 || m < n {
        return Err(invalid(format!(
            "least squares: {m} equations cannot determine {n} unknowns"
        )));
    }
    if rows.iter().any(|r| r.len() != n) {
        return Err(invalid("least squares: ragged design matrix"));
    }

    // column-major working copy
    let mut a: Vec<Vec<T>> = (0..n).map(|j| rows.iter().map(|r| r[j]).collect()).collect();
    let mut b = rhs.to_vec();

    for k in 0..n {
        let norm = a[k][k..].iter().map(|&v| v * v).sum::<T>().sqrt();
        if norm == T::zero() {
            return Err(invalid("least squares: rank-deficient design matrix"));
        }
        let alpha = if a[k][k] > T::zero() { -norm } else { norm };
        let mut v: Vec<T> = a[k][k..].to_vec();
        v[0] = v[0] - alpha;
        let vnorm2 = v.iter().map(|&x| x * x).sum::<T>();
        if vnorm2 == T::zero() {
            continue;
        }
        let two = T::lit(2.0);
        for col in a.iter_mut().skip(k) {
            let dot = v.iter().zip(&col[k..]).map(|(&p, &q)| p * q).sum::<T>();
            let s = two * dot / vnorm2;
            for (c, &vi) in col[k..].iter_mut().zip(&v) {
                *c = *c - s * vi;
            }
        }
        let dot = v.iter().zip(&b[k..]).map(|(&p, &q)| p * q).sum::<T>();
        let s = two * dot / vnorm2;
        for (c, &vi) in b[k..].iter_mut().zip(&v) {
            *c = *c - s * vi;
        }
    }

    let scale = (0..n).map(|k| a[k][k].abs()).fold(T::zero(), T::max);
    let mut x = vec![T::zero(); n];
    for k in (0..n).rev() {
        let rkk = a[k][k];
        if rkk.abs() <= scale * T::epsilon() * T::from_usize_lossy(m) {
            return Err(invalid("least squares: rank-deficient design matrix"));
        }
        let mut acc = b[k];
        for j in k + 1..n {
            acc = acc - a[j][k] * x[j];
        }
        x[k] = acc / rkk;
    }
    Ok(x)
}

/// Eigenvalues of a symmetric 2×2 matrix, ascending.
pub fn sym2_eigenvalues<T: Real>(m: [[T; 2]; 2]) -> (T, T) {
    let half = T::lit(0.5);
    let mean = half * (m[0][0] + m[1][1]);
    let diff = half * (m[0][0] - m[1][1]);
    let rad = (diff * diff + m[0][1] * m[1][0]).sqrt();
    (mean - rad, mean + rad)
}

/// Inverse of a 2×2 matrix, `None` when singular.
pub fn inverse2<T: Real>(m: [[T; 2]; 2]) -> Option<[[T; 2]; 2]> {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    if det == T::zero() || !det.is_finite() {
        return None;
    }
    Some([[m[1][1] / det, -m[0][1] / det], [-m[1][0] / det, m[0][0] / det]])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_polynomial_recovered() {
        let xs: Vec<f64> = (0..30).map(|i| i as f64 / 29.0).collect();
        let rows: Vec<Vec<f64>> = xs.iter().map(|&x| (1..=8).map(|k| x.powi(k)).collect()).collect();
        let ys: Vec<f64> = xs.iter().map(|&x| x - 0.2 * x.powi(3) + 0.05 * x.powi(8)).collect();
        let c = least_squares(&rows, &ys).unwrap();
        let expect = [1.0, 0.0, -0.2, 0.0, 0.0, 0.0, 0.0, 0.05];
        for (a, b) in c.iter().zip(expect) {
            assert!((a - b).abs() < 1e-8, "{c:?}");
        }
    }

    #[test]
    fn overdetermined_line() {
        let rows = vec![vec![1.0f64, 0.0], vec![1.0, 1.0], vec![1.0, 2.0]];
        let c = least_squares(&rows, &[1.0, 2.0, 2.0]).unwrap();
        assert!((c[0] - 7.0 / 6.0).abs() < 1e-12);
        assert!((c[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn rank_deficient_rejected() {
        let rows = vec![vec![1.0, 2.0], vec![2.0, 4.0], vec![3.0, 6.0]];
        assert!(least_squares(&rows, &[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn small_matrix_helpers() {
        let (lo, hi) = sym2_eigenvalues([[2.0f64, 1.0], [1.0, 2.0]]);
        assert!((lo - 1.0).abs() < 1e-12 && (hi - 3.0).abs() < 1e-12);
        let inv = inverse2([[4.0f64, 2.0], [2.0, 3.0]]).unwrap();
        assert!((inv[0][0] - 0.375).abs() < 1e-12);
        assert!((inv[0][1] + 0.25).abs() < 1e-12);
        assert!(inverse2([[1.0f64, 2.0], [2.0, 4.0]]).is_none());
    }
}
