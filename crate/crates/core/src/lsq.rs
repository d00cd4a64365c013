//! Dense Levenberg-Marquardt for the small nonlinear least-squares problems
//! in this crate (a handful of parameters, up to a few thousand residuals).
//!
//! The Jacobian is taken by central differences; callers are expected to
//! parameterize so that all parameters are of order one.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, Copy)]
pub struct LmOptions {
    pub max_iterations: usize,
    /// Relative reduction of the residual sum of squares below which the
    /// iteration is considered converged.
    pub ftol: f64,
    /// Relative step size below which the iteration is considered converged.
    pub xtol: f64,
    pub initial_lambda: f64,
    /// Central-difference step relative to max(|x|, 1).
    pub diff_step: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        LmOptions {
            max_iterations: 200,
            ftol: 1e-14,
            xtol: 1e-12,
            initial_lambda: 1e-3,
            diff_step: 1e-6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LmReport {
    pub params: Vec<f64>,
    /// Residual sum of squares at `params`.
    pub rss: f64,
    pub iterations: usize,
    pub converged: bool,
    /// (JᵀJ)⁻¹·rss/(m − n), pseudo-inverse when singular; `None` when
    /// m ≤ n.
    pub covariance: Option<DMatrix<f64>>,
    pub n_residuals: usize,
}

impl LmReport {
    pub fn std_error(&self, i: usize) -> Option<f64> {
        self.covariance.as_ref().map(|c| c[(i, i)].max(0.0).sqrt())
    }
}

fn sum_sq(r: &DVector<f64>) -> f64 {
    r.iter().map(|v| v * v).sum()
}

fn eval<F: Fn(&[f64], &mut [f64])>(f: &F, x: &[f64], m: usize) -> DVector<f64> {
    let mut out = vec![0.0; m];
    f(x, &mut out);
    DVector::from_vec(out)
}

pub fn jacobian<F: Fn(&[f64], &mut [f64])>(f: &F, x: &[f64], m: usize, step: f64) -> DMatrix<f64> {
    let n = x.len();
    let mut j = DMatrix::zeros(m, n);
    let mut xp = x.to_vec();
    for k in 0..n {
        let h = step * x[k].abs().max(1.0);
        xp[k] = x[k] + h;
        let rp = eval(f, &xp, m);
        xp[k] = x[k] - h;
        let rm = eval(f, &xp, m);
        xp[k] = x[k];
        j.set_column(k, &((rp - rm) / (2.0 * h)));
    }
    j
}

/// Minimizes Σ r_i(x)² where `residuals(x, r)` fills `r` (length `m`).
///
/// Non-finite residuals reject the trial step, so callers can encode bounds
/// by returning NaN outside the admissible region.
pub fn minimize<F>(residuals: F, x0: &[f64], m: usize, opts: &LmOptions) -> LmReport
where
    F: Fn(&[f64], &mut [f64]),
{
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut r = eval(&residuals, &x, m);
    let mut rss = sum_sq(&r);
    let mut lambda = opts.initial_lambda;
    let mut converged = false;
    let mut iterations = 0;

    if !rss.is_finite() {
        return LmReport {
            params: x,
            rss,
            iterations: 0,
            converged: false,
            covariance: None,
            n_residuals: m,
        };
    }

    while iterations < opts.max_iterations {
        iterations += 1;
        let j = jacobian(&residuals, &x, m, opts.diff_step);
        let jtj = j.transpose() * &j;
        let g = j.transpose() * &r;
        if g.amax() <= f64::EPSILON * rss.max(f64::MIN_POSITIVE) {
            converged = true;
            break;
        }
        let mut improved = false;
        for _ in 0..40 {
            let mut a = jtj.clone();
            for k in 0..n {
                a[(k, k)] += lambda * jtj[(k, k)].max(1e-300);
            }
            let Some(chol) = a.cholesky() else {
                lambda *= 10.0;
                continue;
            };
            let delta = chol.solve(&(-&g));
            let trial: Vec<f64> = x.iter().zip(delta.iter()).map(|(a, b)| a + b).collect();
            let rt = eval(&residuals, &trial, m);
            let rss_t = sum_sq(&rt);
            if rss_t.is_finite() && rss_t <= rss {
                let small_step = delta
                    .iter()
                    .zip(&x)
                    .all(|(d, xi)| d.abs() <= opts.xtol * (xi.abs() + opts.xtol));
                let small_gain = (rss - rss_t) <= opts.ftol * rss;
                x = trial;
                r = rt;
                rss = rss_t;
                lambda = (lambda / 10.0).max(1e-12);
                improved = true;
                if small_step || small_gain {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
            if lambda > 1e16 {
                break;
            }
        }
        if !improved {
            // no downhill step at any damping: a local minimum to working precision
            converged = true;
            break;
        }
        if converged {
            break;
        }
    }

    let covariance = if m > n {
        let j = jacobian(&residuals, &x, m, opts.diff_step);
        let jtj = j.transpose() * &j;
        // a parameter pinned at a boundary leaves JᵀJ singular; the
        // pseudo-inverse then reports zero variance along that direction
        jtj.clone()
            .try_inverse()
            .filter(|inv| inv.iter().all(|v| v.is_finite()))
            .or_else(|| {
                let tol = 1e-12 * jtj.amax();
                jtj.pseudo_inverse(tol).ok()
            })
            .map(|inv| inv * (rss / (m - n) as f64))
    } else {
        None
    };

    LmReport {
        params: x,
        rss,
        iterations,
        converged,
        covariance,
        n_residuals: m,
    }
}

/// Golden-section minimization of a unimodal `f` on [lo, hi].
pub fn golden_min<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - g * (hi - lo);
    let mut d = lo + g * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    while (hi - lo).abs() > tol {
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - g * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + g * (hi - lo);
            fd = f(d);
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fits_exponential_decay() {
        let ts: Vec<f64> = (0..50).map(|i| i as f64 * 0.1).collect();
        let ys: Vec<f64> = ts.iter().map(|t| 3.0 * (-1.3 * t).exp() + 0.5).collect();
        let rep = minimize(
            |p, r| {
                for ((ri, t), y) in r.iter_mut().zip(&ts).zip(&ys) {
                    *ri = p[0] * (-p[1] * t).exp() + p[2] - y;
                }
            },
            &[1.0, 0.5, 0.0],
            ts.len(),
            &LmOptions::default(),
        );
        assert!(rep.converged);
        assert!((rep.params[0] - 3.0).abs() < 1e-8);
        assert!((rep.params[1] - 1.3).abs() < 1e-8);
        assert!((rep.params[2] - 0.5).abs() < 1e-8);
        assert!(rep.rss < 1e-16);
    }

    #[test]
    fn rosenbrock() {
        let rep = minimize(
            |p, r| {
                r[0] = 10.0 * (p[1] - p[0] * p[0]);
                r[1] = 1.0 - p[0];
            },
            &[-1.2, 1.0],
            2,
            &LmOptions::default(),
        );
        assert!((rep.params[0] - 1.0).abs() < 1e-6 && (rep.params[1] - 1.0).abs() < 1e-6);
        assert!(rep.covariance.is_none());
    }

    #[test]
    fn covariance_of_linear_fit_matches_closed_form() {
        let xs: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let noise = [0.1, -0.2, 0.05, 0.3, -0.1];
        let ys: Vec<f64> = xs.iter().enumerate().map(|(i, x)| 2.0 * x + 1.0 + noise[i % 5]).collect();
        let rep = minimize(
            |p, r| {
                for ((ri, x), y) in r.iter_mut().zip(&xs).zip(&ys) {
                    *ri = p[0] * x + p[1] - y;
                }
            },
            &[0.0, 0.0],
            xs.len(),
            &LmOptions::default(),
        );
        let n = xs.len() as f64;
        let sxx: f64 = xs.iter().map(|x| x * x).sum();
        let sx: f64 = xs.iter().sum();
        let s2 = rep.rss / (n - 2.0);
        let var_slope = s2 * n / (n * sxx - sx * sx);
        assert!((rep.std_error(0).unwrap().powi(2) - var_slope).abs() / var_slope < 1e-6);
    }
}
