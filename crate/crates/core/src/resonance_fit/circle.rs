//! Algebraic circle fit in the complex plane.
//!
//! The Pratt-constrained algebraic fit minimizes Σ(A·z + B·x + C·y + D)² with
//! z = x² + y² subject to B² + C² − 4AD = 1. Its solution is the
//! generalized eigenvector of (M, N) for the smallest non-negative
//! eigenvalue, found here by Newton iteration on det(M − ηN) from η = 0. The
//! result seeds a geometric Gauss-Newton refinement.

use nalgebra::{Matrix4, Matrix5, Vector5};
use num_complex::Complex64;

use crate::lsq::{self, LmOptions};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Circle {
    pub center: Complex64,
    pub radius: f64,
}

impl Circle {
    /// Mean squared geometric residual relative to the squared radius.
    pub fn normalized_residual(&self, points: &[Complex64]) -> f64 {
        let n = points.len() as f64;
        points
            .iter()
            .map(|z| ((z - self.center).norm() - self.radius).powi(2))
            .sum::<f64>()
            / n
            / (self.radius * self.radius)
    }
}

fn constraint() -> Matrix4<f64> {
    Matrix4::new(
        0.0, 0.0, 0.0, -2.0, //
        0.0, 1.0, 0.0, 0.0, //
        0.0, 0.0, 1.0, 0.0, //
        -2.0, 0.0, 0.0, 0.0,
    )
}

/// Pratt algebraic fit. Returns `None` for degenerate input (fewer than three
/// distinct points, or collinear data).
pub fn algebraic_fit(points: &[Complex64]) -> Option<Circle> {
    let n = points.len();
    if n < 3 {
        return None;
    }
    let mean = points.iter().sum::<Complex64>() / n as f64;
    let scale = (points.iter().map(|z| (z - mean).norm_sqr()).sum::<f64>() / n as f64).sqrt();
    if !(scale > 0.0) || !scale.is_finite() {
        return None;
    }
    let mut m = Matrix4::<f64>::zeros();
    for p in points {
        let q = (p - mean) / scale;
        let v = nalgebra::Vector4::new(q.norm_sqr(), q.re, q.im, 1.0);
        m += v * v.transpose();
    }
    m /= n as f64;
    let nc = constraint();

    // det(M − ηN) is a quartic; recover it exactly from five samples.
    let nodes: [f64; 5] = [-2.0, -1.0, 0.0, 1.0, 2.0];
    let mut vander = Matrix5::<f64>::zeros();
    let mut dets = Vector5::<f64>::zeros();
    for (i, &eta) in nodes.iter().enumerate() {
        for k in 0..5 {
            vander[(i, k)] = eta.powi(k as i32);
        }
        dets[i] = (m - nc * eta).determinant();
    }
    let coef = vander.lu().solve(&dets)?;
    let poly = |x: f64| coef[0] + x * (coef[1] + x * (coef[2] + x * (coef[3] + x * coef[4])));
    let dpoly = |x: f64| coef[1] + x * (2.0 * coef[2] + x * (3.0 * coef[3] + x * 4.0 * coef[4]));

    let mut eta = 0.0;
    for _ in 0..100 {
        let d = dpoly(eta);
        if d == 0.0 {
            break;
        }
        let next = eta - poly(eta) / d;
        if !next.is_finite() {
            break;
        }
        if (next - eta).abs() <= 1e-15 * next.abs().max(1e-15) {
            eta = next;
            break;
        }
        eta = next;
    }

    let svd = (m - nc * eta).svd(false, true);
    let v_t = svd.v_t?;
    let (idx, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))?;
    let eig = v_t.row(idx);
    let (a, b, c, d) = (eig[0], eig[1], eig[2], eig[3]);
    if a.abs() < 1e-12 {
        return None;
    }
    let center = Complex64::new(-b / (2.0 * a), -c / (2.0 * a));
    let disc = b * b + c * c - 4.0 * a * d;
    if !(disc > 0.0) {
        return None;
    }
    let radius = disc.sqrt() / (2.0 * a.abs());
    Some(Circle {
        center: center * scale + mean,
        radius: radius * scale,
    })
}

/// Geometric refinement minimizing Σ(|z − c| − r)².
pub fn refine(points: &[Complex64], seed: Circle) -> Circle {
    let scale = seed.radius;
    let origin = seed.center;
    let pts: Vec<Complex64> = points.iter().map(|z| (z - origin) / scale).collect();
    let opts = LmOptions {
        max_iterations: 20,
        ..Default::default()
    };
    let rep = lsq::minimize(
        |p, r| {
            let c = Complex64::new(p[0], p[1]);
            for (ri, z) in r.iter_mut().zip(&pts) {
                *ri = (z - c).norm() - p[2];
            }
        },
        &[0.0, 0.0, 1.0],
        pts.len(),
        &opts,
    );
    let p = &rep.params;
    if !(p[2] > 0.0 && p.iter().all(|v| v.is_finite())) {
        return seed;
    }
    Circle {
        center: Complex64::new(p[0], p[1]) * scale + origin,
        radius: p[2] * scale,
    }
}

pub fn fit(points: &[Complex64]) -> Option<Circle> {
    algebraic_fit(points).map(|c| refine(points, c))
}
