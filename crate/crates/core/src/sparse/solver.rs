//! Accelerated proximal gradient for `g^T Q g - 2 c^T g + lambda * |g|_1`,
//! optionally constrained to `g >= 0`.
//!
//! FISTA with function-value restart does the bulk of the work. Every
//! `POLISH_EVERY` iterations the current support is handed to an active-set
//! refinement that solves the stationarity equations on that support
//! exactly; once it certifies the KKT conditions the solve stops.

use nalgebra::{DMatrix, DVector};

const MAX_ITERATIONS: usize = 100_000;
const REL_OBJECTIVE_TOL: f64 = 1e-10;
const POLISH_EVERY: usize = 25;
const POLISH_KKT_TOL: f64 = 1e-12;
const POWER_ITERATIONS: usize = 500;
const LIPSCHITZ_SAFETY: f64 = 1.01;

/// Output of a penalised least-squares solve.
#[derive(Debug, Clone, PartialEq)]
pub struct L1Solution {
    pub coefficients: Vec<f64>,
    /// Full objective, including the constant `||D x||^2`.
    pub objective: f64,
    pub iterations: usize,
    /// Scaled KKT violation; see [`L1Problem::kkt_residual`].
    pub kkt_residual: f64,
}

/// `||D (F g - x)||^2 + lambda |g|_1` written as a quadratic in `g`.
#[derive(Debug, Clone)]
pub struct L1Problem {
    q: DMatrix<f64>,
    c: DVector<f64>,
    constant: f64,
    lambda: f64,
    nonneg: bool,
}

impl L1Problem {
    /// `q = A^T A`, `c = A^T r`, `constant = r^T r` for `A = D F` and `r = D x`.
    pub fn new(q: DMatrix<f64>, c: DVector<f64>, constant: f64, lambda: f64, nonneg: bool) -> Self {
        Self {
            q,
            c,
            constant,
            lambda,
            nonneg,
        }
    }

    pub fn dim(&self) -> usize {
        self.c.len()
    }

    pub fn objective(&self, g: &DVector<f64>) -> f64 {
        let qg = &self.q * g;
        g.dot(&qg) - 2.0 * self.c.dot(g) + self.constant + self.lambda * g.iter().map(|v| v.abs()).sum::<f64>()
    }

    fn smooth_gradient(&self, g: &DVector<f64>) -> DVector<f64> {
        (&self.q * g - &self.c) * 2.0
    }

    /// Magnitude that KKT residuals are measured against.
    pub fn scale(&self) -> f64 {
        (2.0 * self.c.amax()).max(self.lambda).max(f64::MIN_POSITIVE)
    }

    /// Largest violation of the optimality conditions, divided by [`Self::scale`].
    pub fn kkt_residual(&self, g: &DVector<f64>) -> f64 {
        let grad = self.smooth_gradient(g);
        let worst = g
            .iter()
            .zip(grad.iter())
            .map(|(&gi, &di)| {
                if self.nonneg {
                    if gi > 0.0 {
                        (di + self.lambda).abs()
                    } else {
                        (-(di + self.lambda)).max(0.0)
                    }
                } else if gi != 0.0 {
                    (di + self.lambda * gi.signum()).abs()
                } else {
                    (di.abs() - self.lambda).max(0.0)
                }
            })
            .fold(0.0, f64::max);
        worst / self.scale()
    }

    fn prox(&self, v: f64, step: f64) -> f64 {
        let t = self.lambda * step;
        if self.nonneg {
            (v - t).max(0.0)
        } else {
            v.signum() * (v.abs() - t).max(0.0)
        }
    }

    fn largest_eigenvalue(&self) -> f64 {
        let n = self.dim();
        let mut v = DVector::from_fn(n, |i, _| 1.0 + 0.01 * i as f64);
        v /= v.norm();
        let mut estimate = 0.0;
        for _ in 0..POWER_ITERATIONS {
            let w = &self.q * &v;
            let norm = w.norm();
            if norm == 0.0 {
                return 0.0;
            }
            let next = v.dot(&w);
            v = w / norm;
            if (next - estimate).abs() <= 1e-12 * next.abs() {
                estimate = next;
                break;
            }
            estimate = next;
        }
        // Rayleigh quotients approach from below; the Gershgorin bound caps the overshoot
        let gershgorin = self
            .q
            .row_iter()
            .map(|r| r.iter().map(|x| x.abs()).sum::<f64>())
            .fold(0.0, f64::max);
        (estimate * LIPSCHITZ_SAFETY).min(gershgorin).max(estimate)
    }

    /// Solves the stationarity equations on the support of `start`, growing the
    /// support with the worst KKT violator until the point is certified.
    fn polish(&self, start: &DVector<f64>) -> Option<DVector<f64>> {
        let n = self.dim();
        let mut signs: Vec<f64> = start.iter().map(|&v| if v == 0.0 { 0.0 } else { v.signum() }).collect();
        for _ in 0..=2 * n {
            let support: Vec<usize> = (0..n).filter(|&i| signs[i] != 0.0).collect();
            let mut g = DVector::zeros(n);
            if !support.is_empty() {
                let qs = DMatrix::from_fn(support.len(), support.len(), |a, b| self.q[(support[a], support[b])]);
                let rhs = DVector::from_fn(support.len(), |a, _| {
                    self.c[support[a]] - 0.5 * self.lambda * signs[support[a]]
                });
                let z = qs.cholesky()?.solve(&rhs);
                for (a, &i) in support.iter().enumerate() {
                    if z[a] * signs[i] <= 0.0 || !z[a].is_finite() {
                        return None;
                    }
                    g[i] = z[a];
                }
            }
            let grad = self.smooth_gradient(&g);
            let violator = (0..n)
                .filter(|&i| signs[i] == 0.0)
                .map(|i| {
                    let v = if self.nonneg {
                        -(grad[i] + self.lambda)
                    } else {
                        grad[i].abs() - self.lambda
                    };
                    (i, v)
                })
                .filter(|&(_, v)| v > POLISH_KKT_TOL * self.scale())
                .max_by(|a, b| a.1.total_cmp(&b.1));
            match violator {
                None => return Some(g),
                Some((i, _)) => signs[i] = if self.nonneg { 1.0 } else { -grad[i].signum() },
            }
        }
        None
    }

    pub fn solve(&self) -> L1Solution {
        let n = self.dim();
        let finish = |g: DVector<f64>, iterations: usize| L1Solution {
            objective: self.objective(&g),
            kkt_residual: self.kkt_residual(&g),
            coefficients: g.iter().copied().collect(),
            iterations,
        };
        let lipschitz = 2.0 * self.largest_eigenvalue();
        if lipschitz == 0.0 {
            // Q = 0 and therefore c = 0: the penalty alone decides
            return finish(DVector::zeros(n), 0);
        }
        let step = 1.0 / lipschitz;
        let mut x = DVector::zeros(n);
        let mut y = x.clone();
        let mut t = 1.0f64;
        let mut obj = self.objective(&x);
        let mut iterations = 0;

        while iterations < MAX_ITERATIONS {
            iterations += 1;
            let grad = self.smooth_gradient(&y);
            let x_next = DVector::from_fn(n, |i, _| self.prox(y[i] - step * grad[i], step));
            let obj_next = self.objective(&x_next);
            if obj_next > obj {
                // restart momentum from the last iterate
                y = x.clone();
                t = 1.0;
                continue;
            }
            let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
            y = &x_next + (&x_next - &x) * ((t - 1.0) / t_next);
            t = t_next;
            let change = (obj - obj_next).abs();
            x = x_next;
            obj = obj_next;

            if iterations % POLISH_EVERY == 0 {
                if let Some(p) = self.polish(&x) {
                    if self.objective(&p) <= obj + 1e-14 * obj.abs().max(1.0) {
                        return finish(p, iterations);
                    }
                }
            }
            if change <= REL_OBJECTIVE_TOL * obj.abs().max(f64::MIN_POSITIVE) {
                break;
            }
        }
        if let Some(p) = self.polish(&x) {
            if self.objective(&p) <= obj + 1e-14 * obj.abs().max(1.0) {
                return finish(p, iterations);
            }
        }
        finish(x, iterations)
    }
}
