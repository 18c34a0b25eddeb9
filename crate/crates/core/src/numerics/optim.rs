//! Derivative-free minimization.

use super::scalar::Scalar;

/// Outcome of a Nelder-Mead run.
#[derive(Debug, Clone, PartialEq)]
pub struct Minimum<T> {
    pub argmin: Vec<T>,
    pub value: T,
    pub converged: bool,
    pub evaluations: usize,
}

/// Nelder-Mead simplex minimizer with the standard coefficients
/// (reflection 1, expansion 2, contraction 0.5, shrink 0.5).
///
/// Non-finite objective values are treated as `+∞`, so the simplex retreats
/// from invalid regions. The best vertex seen is always returned.
#[derive(Debug, Clone)]
pub struct NelderMead<T> {
    budget: usize,
    tol: T,
    step: Option<Vec<T>>,
}

impl<T: Scalar> NelderMead<T> {
    pub fn new(budget: usize, tol: T) -> Self {
        Self { budget, tol, step: None }
    }

    /// Per-coordinate offsets of the initial simplex vertices.
    pub fn with_step(mut self, step: Vec<T>) -> Self {
        self.step = Some(step);
        self
    }

    fn initial_step(&self, init: &[T]) -> Vec<T> {
        match &self.step {
            Some(s) if s.len() == init.len() => s.clone(),
            _ => init
                .iter()
                .map(|&x| if x != T::zero() { T::lit(0.05) * x } else { T::lit(0.00025) })
                .collect(),
        }
    }

    pub fn minimize(&self, mut objective: impl FnMut(&[T]) -> T, init: &[T]) -> Minimum<T> {
        let k = init.len();
        let mut evals = 0usize;
        let mut eval = |x: &[T], evals: &mut usize| -> T {
            *evals += 1;
            let v = objective(x);
            if v.is_finite() {
                v
            } else {
                T::infinity()
            }
        };

        let f0 = eval(init, &mut evals);
        let mut simplex: Vec<(Vec<T>, T)> = vec![(init.to_vec(), f0)];
        let step = self.initial_step(init);
        for i in 0..k {
            if evals >= self.budget {
                break;
            }
            let mut x = init.to_vec();
            x[i] += step[i];
            let f = eval(&x, &mut evals);
            simplex.push((x, f));
        }
        let best_of = |s: &[(Vec<T>, T)]| {
            s.iter()
                .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal))
                .cloned()
                .expect("non-empty simplex")
        };
        if simplex.len() < k + 1 || k == 0 {
            let (x, v) = best_of(&simplex);
            return Minimum { argmin: x, value: v, converged: k == 0, evaluations: evals };
        }

        let half = T::lit(0.5);
        let two = T::lit(2.0);
        let inv_k = T::one() / T::from_usize_lossy(k);
        let mut converged = false;

        loop {
            simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
            if self.has_converged(&simplex) {
                converged = true;
                break;
            }
            if evals >= self.budget {
                break;
            }
            let mut centroid = vec![T::zero(); k];
            for (x, _) in &simplex[..k] {
                for (c, &xi) in centroid.iter_mut().zip(x) {
                    *c += xi * inv_k;
                }
            }
            let worst = simplex[k].clone();
            let along = |t: T| -> Vec<T> {
                centroid.iter().zip(&worst.0).map(|(&c, &w)| c + t * (c - w)).collect()
            };
            let f_best = simplex[0].1;
            let f_second = simplex[k - 1].1;

            let xr = along(T::one());
            let fr = eval(&xr, &mut evals);
            if fr < f_best {
                if evals >= self.budget {
                    simplex[k] = (xr, fr);
                    continue;
                }
                let xe = along(two);
                let fe = eval(&xe, &mut evals);
                simplex[k] = if fe < fr { (xe, fe) } else { (xr, fr) };
                continue;
            }
            if fr < f_second {
                simplex[k] = (xr, fr);
                continue;
            }
            if evals >= self.budget {
                if fr < worst.1 {
                    simplex[k] = (xr, fr);
                }
                continue;
            }
            if fr < worst.1 {
                let xc = along(half);
                let fc = eval(&xc, &mut evals);
                if fc <= fr {
                    simplex[k] = (xc, fc);
                    continue;
                }
            } else {
                let xcc = along(-half);
                let fcc = eval(&xcc, &mut evals);
                if fcc < worst.1 {
                    simplex[k] = (xcc, fcc);
                    continue;
                }
            }
            // Shrink toward the best vertex.
            let best = simplex[0].0.clone();
            for v in simplex.iter_mut().skip(1) {
                if evals >= self.budget {
                    break;
                }
                let x: Vec<T> = best.iter().zip(&v.0).map(|(&b, &xi)| b + half * (xi - b)).collect();
                let f = eval(&x, &mut evals);
                *v = (x, f);
            }
        }
        let (x, v) = best_of(&simplex);
        Minimum { argmin: x, value: v, converged, evaluations: evals }
    }

    /// Both the simplex diameter and the spread of objective values must be
    /// within `tol`, relative to the best vertex.
    fn has_converged(&self, sorted: &[(Vec<T>, T)]) -> bool {
        let (best_x, best_f) = (&sorted[0].0, sorted[0].1);
        if !best_f.is_finite() {
            return false;
        }
        let worst_f = sorted[sorted.len() - 1].1;
        let f_scale = T::one().max(best_f.abs());
        if !(worst_f - best_f <= self.tol * f_scale) {
            return false;
        }
        let x_scale = best_x.iter().fold(T::one(), |m, &x| m.max(x.abs()));
        sorted.iter().skip(1).all(|(x, _)| {
            x.iter().zip(best_x).all(|(&a, &b)| (a - b).abs() <= self.tol * x_scale)
        })
    }
}

/// Minimizes `objective` from `init` with at most `budget` evaluations.
pub fn nelder_mead<T: Scalar>(
    objective: impl FnMut(&[T]) -> T,
    init: &[T],
    budget: usize,
    tol: T,
) -> Minimum<T> {
    NelderMead::new(budget, tol).minimize(objective, init)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn convex_quadratic_1d() {
        let m = nelder_mead(|x: &[f64]| (x[0] - 2.0).powi(2), &[0.0], 200, 1e-10);
        assert!((m.argmin[0] - 2.0).abs() < 1e-4, "{m:?}");
        assert!(m.converged);
    }

    #[test]
    fn bowl_2d() {
        let m = nelder_mead(|x: &[f64]| x[0] * x[0] + x[1] * x[1], &[1.0, 1.0], 500, 1e-12);
        assert!(m.argmin.iter().all(|v| v.abs() < 1e-4), "{m:?}");
    }

    #[test]
    fn tiny_budget_reports_not_converged() {
        let f = |x: &[f64]| (x[0] - 3.0).powi(2) + (x[1] + 1.0).powi(2);
        let init = [0.5, 0.5];
        let m = nelder_mead(f, &init, 3, 1e-8);
        assert!(!m.converged);
        assert!(m.value <= f(&init));
        assert!(m.evaluations <= 3);
    }

    #[test]
    fn rosenbrock() {
        let f = |x: &[f64]| 100.0 * (x[1] - x[0] * x[0]).powi(2) + (1.0 - x[0]).powi(2);
        let m = NelderMead::new(5000, 1e-12).with_step(vec![0.5, 0.5]).minimize(f, &[-1.2, 1.0]);
        assert!((m.argmin[0] - 1.0).abs() < 1e-3 && (m.argmin[1] - 1.0).abs() < 1e-3, "{m:?}");
    }

    #[test]
    fn non_finite_values_are_avoided() {
        // Objective undefined for x < 0; minimum at the boundary region near 0.5.
        let f = |x: &[f64]| if x[0] < 0.0 { f64::NAN } else { (x[0] - 0.5).powi(2) };
        let m = NelderMead::new(400, 1e-10).with_step(vec![1.0]).minimize(f, &[0.1]);
        assert!((m.argmin[0] - 0.5).abs() < 1e-4);
        assert!(m.value.is_finite());
    }
}
