use crate::scalar::Real;

/// Outcome of a Nelder–Mead run.
#[derive(Debug, Clone)]
pub struct Minimum<T> {
    pub x: Vec<T>,
    pub value: T,
    pub iterations: usize,
    pub converged: bool,
}

/// Nelder–Mead simplex minimization with standard coefficients.
///
/// Stops when both the simplex diameter falls below `xtol` and the spread of
/// function values falls below `ftol`. Bounds are the caller's business: return
/// `+inf` outside the feasible region.
pub fn nelder_mead<T: Real, F: FnMut(&[T]) -> T>(
    mut f: F,
    start: &[T],
    step: &[T],
    xtol: T,
    ftol: T,
    max_iter: usize,
) -> Minimum<T> {
    let n = start.len();
    let mut pts: Vec<Vec<T>> = vec![start.to_vec()];
    for i in 0..n {
        let mut p = start.to_vec();
        p[i] = p[i] + step[i];
        pts.push(p);
    }
    let mut vals: Vec<T> = pts.iter().map(|p| f(p)).collect();

    let half = T::lit(0.5);
    let two = T::lit(2.0);
    let nf = T::from_usize_lossy(n);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| vals[a].partial_cmp(&vals[b]).unwrap_or(std::cmp::Ordering::Equal));
        pts = order.iter().map(|&i| pts[i].clone()).collect();
        vals = order.iter().map(|&i| vals[i]).collect();

        let diameter = pts[1..]
            .iter()
            .flat_map(|p| p.iter().zip(&pts[0]).map(|(&a, &b)| (a - b).abs()))
            .fold(T::zero(), T::max);
        if diameter <= xtol && (vals[n] - vals[0]).abs() <= ftol {
            converged = true;
            break;
        }
        iterations += 1;

        let centroid: Vec<T> = (0..n).map(|j| pts[..n].iter().map(|p| p[j]).sum::<T>() / nf).collect();
        let along = |coef: T| -> Vec<T> {
            centroid
                .iter()
                .zip(&pts[n])
                .map(|(&c, &w)| c + coef * (c - w))
                .collect()
        };
        let xr = along(T::one());
        let fr = f(&xr);
        if fr < vals[0] {
            let xe = along(two);
            let fe = f(&xe);
            if fe < fr {
                pts[n] = xe;
                vals[n] = fe;
            } else {
                pts[n] = xr;
                vals[n] = fr;
            }
        } else if fr < vals[n - 1] {
            pts[n] = xr;
            vals[n] = fr;
        } else {
            let (xc, fc) = if fr < vals[n] {
                let xc = along(half);
                let fc = f(&xc);
                (xc, fc)
            } else {
                let xc = along(-half);
                let fc = f(&xc);
                (xc, fc)
            };
            if fc < vals[n].min(fr) {
                pts[n] = xc;
                vals[n] = fc;
            } else {
                for i in 1..=n {
                    let p: Vec<T> = pts[i].iter().zip(&pts[0]).map(|(&a, &b)| b + half * (a - b)).collect();
                    vals[i] = f(&p);
                    pts[i] = p;
                }
            }
        }
    }
    let best = (0..=n)
        .min_by(|&a, &b| vals[a].partial_cmp(&vals[b]).unwrap_or(std::cmp::Ordering::Equal))
        .unwrap_or(0);
    Minimum {
        x: pts[best].clone(),
        value: vals[best],
        iterations,
        converged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock() {
        let m = nelder_mead(
            |p: &[f64]| (1.0 - p[0]).powi(2) + 100.0 * (p[1] - p[0] * p[0]).powi(2),
            &[-1.2, 1.0],
            &[0.1, 0.1],
            1e-10,
            1e-20,
            10_000,
        );
        assert!(m.converged);
        assert!((m.x[0] - 1.0).abs() < 1e-8 && (m.x[1] - 1.0).abs() < 1e-8, "{:?}", m.x);
    }

    #[test]
    fn respects_infeasible_region() {
        let m = nelder_mead(
            |p: &[f64]| {
                if p[0] < 0.5 {
                    f64::INFINITY
                } else {
                    (p[0] - 0.2).powi(2)
                }
            },
            &[0.9],
            &[0.1],
            1e-12,
            1e-20,
            5_000,
        );
        assert!(m.x[0] >= 0.5 && m.x[0] < 0.5 + 1e-9);
    }
}
