//! Derivative-free maximization: a Nelder–Mead warm start followed by BFGS on
//! central finite-difference gradients.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptimOptions {
    /// Gradient ∞-norm tolerance, scaled by `max(1, |f|)`.
    pub grad_tol: f64,
    /// Relative parameter step below which BFGS stops.
    pub step_tol: f64,
    pub max_evals: usize,
    /// Nelder–Mead budget as a multiple of the dimension.
    pub simplex_iters_per_dim: usize,
    /// Number of additional jittered starting points.
    pub multistart: usize,
}

impl Default for OptimOptions {
    fn default() -> Self {
        Self {
            grad_tol: 1e-5,
            step_tol: 1e-8,
            max_evals: 10_000,
            simplex_iters_per_dim: 100,
            multistart: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OptimResult {
    pub x: Vec<f64>,
    pub value: f64,
    /// Simplex plus quasi-Newton iterations.
    pub iterations: usize,
    pub evaluations: usize,
    pub grad_inf_norm: f64,
    pub converged: bool,
}

struct Counted<F> {
    f: F,
    evals: usize,
}

impl<F: Fn(&[f64]) -> f64> Counted<F> {
    /// Cost to minimize: the negated objective, `+inf` where undefined.
    fn cost(&mut self, x: &[f64]) -> f64 {
        self.evals += 1;
        let v = (self.f)(x);
        if v.is_finite() {
            -v
        } else {
            f64::INFINITY
        }
    }
}

fn fd_step(x: f64, power: f64) -> f64 {
    f64::EPSILON.powf(power) * x.abs().max(1.0)
}

/// Central-difference gradient of a scalar function.
pub fn gradient<F: Fn(&[f64]) -> f64>(f: F, x: &[f64]) -> Vec<f64> {
    let mut xp = x.to_vec();
    (0..x.len())
        .map(|i| {
            let h = fd_step(x[i], 1.0 / 3.0);
            xp[i] = x[i] + h;
            let up = f(&xp);
            xp[i] = x[i] - h;
            let dn = f(&xp);
            xp[i] = x[i];
            (up - dn) / (2.0 * h)
        })
        .collect()
}

/// Central-difference Hessian, row-major `n × n`.
pub fn hessian<F: Fn(&[f64]) -> f64>(f: F, x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let h: Vec<f64> = x.iter().map(|&v| fd_step(v, 0.25)).collect();
    let f0 = f(x);
    let mut out = vec![0.0; n * n];
    let mut xp = x.to_vec();
    for i in 0..n {
        xp[i] = x[i] + h[i];
        let up = f(&xp);
        xp[i] = x[i] - h[i];
        let dn = f(&xp);
        xp[i] = x[i];
        out[i * n + i] = (up - 2.0 * f0 + dn) / (h[i] * h[i]);
        for j in 0..i {
            let mut eval = |si: f64, sj: f64| {
                xp[i] = x[i] + si * h[i];
                xp[j] = x[j] + sj * h[j];
                let v = f(&xp);
                xp[i] = x[i];
                xp[j] = x[j];
                v
            };
            let v = (eval(1.0, 1.0) - eval(1.0, -1.0) - eval(-1.0, 1.0) + eval(-1.0, -1.0))
                / (4.0 * h[i] * h[j]);
            out[i * n + j] = v;
            out[j * n + i] = v;
        }
    }
    out
}

/// Returns the best vertex, its cost and the number of iterations used.
fn nelder_mead<F: Fn(&[f64]) -> f64>(
    obj: &mut Counted<F>,
    x0: &[f64],
    max_iter: usize,
    budget: usize,
) -> (Vec<f64>, f64, usize) {
    let n = x0.len();
    let mut simplex: Vec<Vec<f64>> = vec![x0.to_vec()];
    for i in 0..n {
        let mut v = x0.to_vec();
        v[i] += 0.1 * x0[i].abs().max(1.0);
        simplex.push(v);
    }
    let mut fv: Vec<f64> = simplex.iter().map(|v| obj.cost(v)).collect();
    let mut used = 0;
    for _ in 0..max_iter {
        if obj.evals >= budget {
            break;
        }
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| fv[a].total_cmp(&fv[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        fv = order.iter().map(|&i| fv[i]).collect();
        let spread = (fv[n] - fv[0]).abs();
        if fv[0].is_finite() && spread <= 1e-10 * fv[0].abs().max(1.0) {
            break;
        }
        used += 1;
        let centroid: Vec<f64> = (0..n)
            .map(|j| simplex[..n].iter().map(|v| v[j]).sum::<f64>() / n as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[n])
                .map(|(c, w)| c + t * (c - w))
                .collect()
        };
        let xr = along(1.0);
        let fr = obj.cost(&xr);
        if fr < fv[0] {
            let xe = along(2.0);
            let fe = obj.cost(&xe);
            if fe < fr {
                simplex[n] = xe;
                fv[n] = fe;
            } else {
                simplex[n] = xr;
                fv[n] = fr;
            }
        } else if fr < fv[n - 1] {
            simplex[n] = xr;
            fv[n] = fr;
        } else {
            let (xc, fc) = if fr < fv[n] {
                let xc = along(0.5);
                let fc = obj.cost(&xc);
                (xc, fc)
            } else {
                let xc = along(-0.5);
                let fc = obj.cost(&xc);
                (xc, fc)
            };
            if fc < fv[n].min(fr) {
                simplex[n] = xc;
                fv[n] = fc;
            } else {
                let best = simplex[0].clone();
                for i in 1..=n {
                    for j in 0..n {
                        simplex[i][j] = best[j] + 0.5 * (simplex[i][j] - best[j]);
                    }
                    fv[i] = obj.cost(&simplex[i]);
                }
            }
        }
    }
    let best = (0..=n).min_by(|&a, &b| fv[a].total_cmp(&fv[b])).unwrap();
    (simplex[best].clone(), fv[best], used)
}

fn cost_gradient<F: Fn(&[f64]) -> f64>(obj: &mut Counted<F>, x: &[f64]) -> Vec<f64> {
    let mut xp = x.to_vec();
    let mut g = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let h = fd_step(x[i], 1.0 / 3.0);
        xp[i] = x[i] + h;
        let up = obj.cost(&xp);
        xp[i] = x[i] - h;
        let dn = obj.cost(&xp);
        xp[i] = x[i];
        g.push((up - dn) / (2.0 * h));
    }
    g
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Maximizes `f` from `x0`. Points where `f` is not finite are treated as
/// infeasible.
pub fn maximize<F: Fn(&[f64]) -> f64>(f: F, x0: &[f64], opts: &OptimOptions) -> OptimResult {
    let n = x0.len();
    let mut obj = Counted { f, evals: 0 };
    let f_init = obj.cost(x0);
    let nm_iters = opts.simplex_iters_per_dim * n.max(1);
    let (mut x, mut fx, simplex_iters) = nelder_mead(&mut obj, x0, nm_iters, opts.max_evals / 2);
    if !(fx <= f_init) {
        x = x0.to_vec();
        fx = f_init;
    }

    let mut g = cost_gradient(&mut obj, &x);
    let mut hinv: Vec<f64> = identity(n);
    let mut first = true;
    let mut iterations = simplex_iters;
    let tol = |fx: f64| opts.grad_tol * fx.abs().max(1.0);
    while inf_norm(&g) > tol(fx) && obj.evals < opts.max_evals {
        iterations += 1;
        let mut d: Vec<f64> = (0..n).map(|i| -(0..n).map(|j| hinv[i * n + j] * g[j]).sum::<f64>()).collect();
        let mut slope: f64 = d.iter().zip(&g).map(|(a, b)| a * b).sum();
        if !(slope < 0.0) {
            hinv = identity(n);
            first = true;
            d = g.iter().map(|v| -v).collect();
            slope = -g.iter().map(|v| v * v).sum::<f64>();
        }
        // Backtracking Armijo search.
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let xn: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + step * b).collect();
            let fnew = obj.cost(&xn);
            if fnew <= fx + 1e-4 * step * slope {
                accepted = Some((xn, fnew));
                break;
            }
            step *= 0.5;
        }
        let Some((xn, fnew)) = accepted else { break };
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let gn = cost_gradient(&mut obj, &xn);
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
        let x_scale = inf_norm(&x).max(1.0);
        x = xn;
        fx = fnew;
        g = gn;
        if inf_norm(&s) < opts.step_tol * x_scale {
            break;
        }
        if sy > 1e-12 * inf_norm(&s) * inf_norm(&y) {
            if first {
                let yy: f64 = y.iter().map(|v| v * v).sum();
                let scale = sy / yy;
                hinv.iter_mut().for_each(|v| *v *= scale);
                first = false;
            }
            bfgs_update(&mut hinv, &s, &y, sy);
        }
    }
    let grad_inf_norm = inf_norm(&g);
    OptimResult {
        converged: grad_inf_norm <= tol(fx),
        value: -fx,
        x,
        iterations,
        evaluations: obj.evals,
        grad_inf_norm,
    }
}

fn identity(n: usize) -> Vec<f64> {
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        m[i * n + i] = 1.0;
    }
    m
}

/// Inverse-Hessian update `H ← (I − ρsy')H(I − ρys') + ρss'`.
fn bfgs_update(h: &mut [f64], s: &[f64], y: &[f64], sy: f64) {
    let n = s.len();
    let rho = 1.0 / sy;
    let hy: Vec<f64> = (0..n).map(|i| (0..n).map(|j| h[i * n + j] * y[j]).sum()).collect();
    let yhy: f64 = y.iter().zip(&hy).map(|(a, b)| a * b).sum();
    for i in 0..n {
        for j in 0..n {
            h[i * n + j] += -rho * (hy[i] * s[j] + s[i] * hy[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn maximizes_negated_rosenbrock() {
        let f = |x: &[f64]| -((1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2));
        let r = maximize(f, &[-1.2, 1.0], &OptimOptions::default());
        assert!(r.converged, "{r:?}");
        assert!((r.x[0] - 1.0).abs() < 1e-4 && (r.x[1] - 1.0).abs() < 1e-4, "{r:?}");
    }

    #[test]
    fn quadratic_hessian() {
        let f = |x: &[f64]| -(2.0 * x[0] * x[0] + x[0] * x[1] + 3.0 * x[1] * x[1]);
        let h = hessian(f, &[0.3, -0.2]);
        let want = [-4.0, -1.0, -1.0, -6.0];
        for (a, b) in h.iter().zip(want) {
            assert!((a - b).abs() < 1e-6, "{h:?}");
        }
        let g = gradient(f, &[0.3, -0.2]);
        assert!((g[0] - (-(4.0 * 0.3 - 0.2))).abs() < 1e-8);
    }

    #[test]
    fn infeasible_region_avoided() {
        // log-likelihood-like objective defined only for x > 0.
        let f = |x: &[f64]| if x[0] > 0.0 { 3.0 * x[0].ln() - x[0] } else { f64::NEG_INFINITY };
        let r = maximize(f, &[0.5], &OptimOptions::default());
        assert!((r.x[0] - 3.0).abs() < 1e-5, "{r:?}");
    }
}
