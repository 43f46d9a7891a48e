//! Radial Fourier analysis in dimensions 1-3.
//!
//! For a radial function f(|x|) on R^N the transform reduces to a
//! one-dimensional integral against a dimension-specific kernel:
//!   N = 1:  f̂(ρ) = 2 ∫ cos(ρr) f(r) dr
//!   N = 2:  f̂(ρ) = 2π ∫ r J0(ρr) f(r) dr
//!   N = 3:  f̂(ρ) = (4π/ρ) ∫ r sin(ρr) f(r) dr
//! The inverse transform is the same kernel scaled by (2π)^{-N}.

use thiserror::Error;

use crate::quad::{self, OscKernel, QuadError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransformError {
    #[error("dimension must be 1, 2 or 3, got {0}")]
    BadDimension(usize),
    #[error("frequency must be finite and nonnegative, got {0}")]
    BadFrequency(f64),
    #[error("invalid radial grid: {0}")]
    BadGrid(String),
    #[error("quadrature did not converge: {0}")]
    Quadrature(#[from] QuadError),
}

/// Surface area of the unit sphere in R^N (N = 1 counts both half-lines).
pub fn sphere_surface(dim: usize) -> f64 {
    match dim {
        1 => 2.0,
        2 => 2.0 * std::f64::consts::PI,
        3 => 4.0 * std::f64::consts::PI,
        _ => panic!("unsupported dimension {dim}"),
    }
}

/// Quadrature grid for radial integrals: panel boundaries, log-spaced
/// near the origin and glued to wider spacing outward, with the cut
/// radius chosen so the neglected tail is below the caller's bound.
#[derive(Debug, Clone)]
pub struct RadialGrid {
    boundaries: Vec<f64>,
    kind: GridKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridKind {
    Linear,
    LogLinear,
}

impl RadialGrid {
    /// Log panels on [r_min, glue], linear panels on [glue, r_cut].
    pub fn log_linear(
        r_min: f64,
        glue: f64,
        r_cut: f64,
        n_log: usize,
        n_lin: usize,
    ) -> Result<Self, TransformError> {
        if !(r_min > 0.0 && glue > r_min && r_cut > glue) {
            return Err(TransformError::BadGrid(format!(
                "need 0 < r_min < glue < r_cut, got {r_min}, {glue}, {r_cut}"
            )));
        }
        if n_log < 2 || n_lin < 2 {
            return Err(TransformError::BadGrid(
                "need at least 2 panels per section".into(),
            ));
        }
        let mut b = vec![0.0];
        let (l0, l1) = (r_min.ln(), glue.ln());
        for i in 0..=n_log {
            b.push((l0 + (l1 - l0) * i as f64 / n_log as f64).exp());
        }
        for i in 1..=n_lin {
            b.push(glue + (r_cut - glue) * i as f64 / n_lin as f64);
        }
        b.dedup();
        Ok(Self {
            boundaries: b,
            kind: GridKind::LogLinear,
        })
    }

    /// Uniform panels on [0, r_cut].
    pub fn linear(r_cut: f64, n: usize) -> Result<Self, TransformError> {
        if !(r_cut > 0.0) || n < 2 {
            return Err(TransformError::BadGrid(format!(
                "need r_cut > 0 and n >= 2, got {r_cut}, {n}"
            )));
        }
        let b = (0..=n).map(|i| r_cut * i as f64 / n as f64).collect();
        Ok(Self {
            boundaries: b,
            kind: GridKind::Linear,
        })
    }

    /// Default grid for an integrand that is negligible beyond `r_cut`.
    pub fn default_to(r_cut: f64) -> Result<Self, TransformError> {
        Self::log_linear(1e-6, r_cut.min(1.0), r_cut.max(1.001), 24, 48)
    }

    pub fn r_cut(&self) -> f64 {
        *self.boundaries.last().unwrap()
    }

    pub fn kind(&self) -> GridKind {
        self.kind
    }

    /// Panel boundaries, refined so that no panel spans more than half an
    /// oscillation period of the kernel at frequency `rho`.
    fn refined(&self, rho: f64) -> Vec<f64> {
        if rho <= 0.0 {
            return self.boundaries.clone();
        }
        let half_period = std::f64::consts::PI / rho;
        let mut out = Vec::with_capacity(self.boundaries.len());
        for w in self.boundaries.windows(2) {
            out.push(w[0]);
            let width = w[1] - w[0];
            if width > half_period {
                let k = (width / half_period).ceil() as usize;
                for i in 1..k {
                    out.push(w[0] + width * i as f64 / k as f64);
                }
            }
        }
        out.push(*self.boundaries.last().unwrap());
        out
    }
}

fn kernel_for(dim: usize) -> Result<OscKernel, TransformError> {
    match dim {
        1 => Ok(OscKernel::Cos),
        2 => Ok(OscKernel::BesselJ0),
        3 => Ok(OscKernel::Sin),
        d => Err(TransformError::BadDimension(d)),
    }
}

/// Radial Fourier transform f̂(ρ) of a radial function, integrated over
/// the support described by `grid`. At ρ = 0 this is the plain integral
/// of f over R^N.
pub fn radial_fourier<F: Fn(f64) -> f64>(
    dim: usize,
    f: F,
    rho: f64,
    grid: &RadialGrid,
) -> Result<f64, TransformError> {
    if !(rho.is_finite() && rho >= 0.0) {
        return Err(TransformError::BadFrequency(rho));
    }
    let kernel = kernel_for(dim)?;
    let tol = 1e-11;
    let breaks = grid.refined(rho);
    let value = match dim {
        1 => {
            let g = |r: f64| {
                if rho == 0.0 {
                    f(r)
                } else {
                    f(r) * kernel.eval(rho * r)
                }
            };
            2.0 * quad::integrate_with_breaks(g, &breaks, tol)?
        }
        2 => {
            let g = |r: f64| {
                if rho == 0.0 {
                    r * f(r)
                } else {
                    r * f(r) * kernel.eval(rho * r)
                }
            };
            2.0 * std::f64::consts::PI * quad::integrate_with_breaks(g, &breaks, tol)?
        }
        3 => {
            if rho == 0.0 {
                let g = |r: f64| r * r * f(r);
                4.0 * std::f64::consts::PI * quad::integrate_with_breaks(g, &breaks, tol)?
            } else {
                let g = |r: f64| r * f(r) * (rho * r).sin();
                4.0 * std::f64::consts::PI / rho * quad::integrate_with_breaks(g, &breaks, tol)?
            }
        }
        _ => unreachable!(),
    };
    Ok(value)
}

/// Inverse radial transform: evaluates f(r) from f̂ as a radial function
/// of frequency. Same kernels, scaled by (2π)^{-N}.
pub fn inverse_radial_fourier<F: Fn(f64) -> f64>(
    dim: usize,
    fhat: F,
    r: f64,
    grid: &RadialGrid,
) -> Result<f64, TransformError> {
    let forward = radial_fourier(dim, fhat, r, grid)?;
    Ok(forward / (2.0 * std::f64::consts::PI).powi(dim as i32))
}
