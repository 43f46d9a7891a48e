//! Admissible initial data: nonnegative, integrable, radial profiles
//! with exact masses, pointwise values, radial Fourier transforms and a
//! declared decay class at infinity.

use std::f64::consts::PI;
use std::sync::OnceLock;

use thiserror::Error;

use crate::interp::CubicSpline;
use crate::quad::{self, QuadError};
use crate::transforms::{self, sphere_surface, RadialGrid, TransformError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DatumError {
    #[error("invalid datum parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Transform(#[from] TransformError),
    #[error(transparent)]
    Quadrature(#[from] QuadError),
}

/// Decay class of the datum at infinity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TailClass {
    /// Supported inside the ball of this radius.
    Compact { radius: f64 },
    /// Decays faster than any power (Gaussian).
    SuperPolynomial,
    /// |x|^beta u0(x) -> amplitude as |x| -> infinity (and the bound
    /// |x|^beta u0 <= bound holds beyond the given radius).
    ExactPower { amplitude: f64, beta: f64 },
}

impl TailClass {
    /// Membership in the class of data with |x|^beta |u0| bounded.
    pub fn bounded_by_power(&self, beta: f64) -> bool {
        match *self {
            TailClass::Compact { .. } | TailClass::SuperPolynomial => true,
            TailClass::ExactPower { beta: b, .. } => b >= beta,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DatumVariant {
    /// amplitude * exp(-r^2/(4 scale)); transform mass * exp(-scale rho^2).
    Gaussian { scale: f64, amplitude: f64 },
    /// height on the ball of the given radius, zero outside.
    BallIndicator { radius: f64, height: f64 },
    /// height * exp(1 - 1/(1-(r/R)^2)) inside radius R, zero outside.
    SmoothBump { radius: f64, height: f64 },
    /// Exactly amplitude * r^{-beta} for r >= 2 core, constant on
    /// [0, core], C1 monotone cubic blend between.
    PowerTail { amplitude: f64, beta: f64, core: f64 },
}

/// An initial condition: radial, nonnegative, integrable.
#[derive(Debug)]
pub struct Datum {
    dim: usize,
    variant: DatumVariant,
    mass: f64,
    tail: TailClass,
    /// Power-basis coefficients of the power-tail blend cubic in
    /// t = (r - core)/core on [core, 2 core].
    blend: Option<[f64; 4]>,
    transform_curve: OnceLock<TransformCurve>,
    cumulative_curve: OnceLock<CubicSpline>,
}

/// Cached transform of a datum without a closed form, as splines of
/// û(rho) and (û(rho) - M)/rho^2 on [0, rho_max].
#[derive(Debug)]
struct TransformCurve {
    hat: CubicSpline,
    deficit_over_rho2: CubicSpline,
    rho_max: f64,
}

impl Datum {
    pub fn gaussian(dim: usize, scale: f64, mass: f64) -> Result<Self, DatumError> {
        check_dim(dim)?;
        if !(scale > 0.0 && mass > 0.0) {
            return Err(DatumError::InvalidParameter(format!(
                "gaussian needs scale > 0 and mass > 0, got {scale}, {mass}"
            )));
        }
        let amplitude = mass / (4.0 * PI * scale).powf(dim as f64 / 2.0);
        Ok(Self {
            dim,
            variant: DatumVariant::Gaussian { scale, amplitude },
            mass,
            tail: TailClass::SuperPolynomial,
            blend: None,
            transform_curve: OnceLock::new(),
            cumulative_curve: OnceLock::new(),
        })
    }

    pub fn ball(dim: usize, radius: f64, height: f64) -> Result<Self, DatumError> {
        check_dim(dim)?;
        if !(radius > 0.0 && height > 0.0) {
            return Err(DatumError::InvalidParameter(format!(
                "ball needs radius > 0 and height > 0, got {radius}, {height}"
            )));
        }
        let mass = height * ball_volume(dim, radius);
        Ok(Self {
            dim,
            variant: DatumVariant::BallIndicator { radius, height },
            mass,
            tail: TailClass::Compact { radius },
            blend: None,
            transform_curve: OnceLock::new(),
            cumulative_curve: OnceLock::new(),
        })
    }

    pub fn ball_with_mass(dim: usize, radius: f64, mass: f64) -> Result<Self, DatumError> {
        if !(mass > 0.0) {
            return Err(DatumError::InvalidParameter(format!(
                "ball mass must be positive, got {mass}"
            )));
        }
        check_dim(dim)?;
        Self::ball(dim, radius, mass / ball_volume(dim, radius))
    }

    pub fn smooth_bump(dim: usize, radius: f64, mass: f64) -> Result<Self, DatumError> {
        check_dim(dim)?;
        if !(radius > 0.0 && mass > 0.0) {
            return Err(DatumError::InvalidParameter(format!(
                "bump needs radius > 0 and mass > 0, got {radius}, {mass}"
            )));
        }
        // Shape integral for unit height, cached into the height.
        let shape = |r: f64| bump_shape(r / radius);
        let weight = move |r: f64| r.powi(dim as i32 - 1) * shape(r);
        let raw = quad::integrate(weight, 0.0, radius, 1e-12)? * sphere_surface(dim);
        let height = mass / raw;
        Ok(Self {
            dim,
            variant: DatumVariant::SmoothBump { radius, height },
            mass,
            tail: TailClass::Compact { radius },
            blend: None,
            transform_curve: OnceLock::new(),
            cumulative_curve: OnceLock::new(),
        })
    }

    pub fn power_tail(
        dim: usize,
        amplitude: f64,
        beta: f64,
        core: f64,
    ) -> Result<Self, DatumError> {
        check_dim(dim)?;
        if !(amplitude > 0.0 && core > 0.0) {
            return Err(DatumError::InvalidParameter(format!(
                "power tail needs amplitude > 0 and core > 0, got {amplitude}, {core}"
            )));
        }
        if !(beta > dim as f64) {
            return Err(DatumError::InvalidParameter(format!(
                "power tail needs beta > N for integrability, got beta = {beta}, N = {dim}"
            )));
        }
        // C1 Hermite blend on [core, 2 core] between the core plateau
        // amplitude*core^{-beta} (slope 0) and the exact power law.
        let y0 = amplitude * core.powf(-beta);
        let y1 = amplitude * (2.0 * core).powf(-beta);
        let m1 = -beta * amplitude * (2.0 * core).powf(-beta - 1.0);
        let b = [
            y0,
            0.0,
            -3.0 * y0 + 3.0 * y1 - core * m1,
            2.0 * y0 - 2.0 * y1 + core * m1,
        ];
        let mut datum = Self {
            dim,
            variant: DatumVariant::PowerTail {
                amplitude,
                beta,
                core,
            },
            mass: 0.0,
            tail: TailClass::ExactPower { amplitude, beta },
            blend: Some(b),
            transform_curve: OnceLock::new(),
            cumulative_curve: OnceLock::new(),
        };
        datum.mass = datum.power_tail_mass(amplitude, beta, core, &b);
        Ok(datum)
    }

    fn power_tail_mass(&self, amplitude: f64, beta: f64, core: f64, b: &[f64; 4]) -> f64 {
        let n = self.dim as f64;
        let s = sphere_surface(self.dim);
        let y0 = amplitude * core.powf(-beta);
        let plateau = s * y0 * core.powf(n) / n;
        // Blend piece: r = core (1 + t), integrand r^{N-1} H(t) core dt.
        let blend = s * core.powf(n) * poly_weighted_integral(b, self.dim as u32 - 1);
        let tail = s * amplitude * (2.0 * core).powf(n - beta) / (beta - n);
        plateau + blend + tail
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn variant(&self) -> &DatumVariant {
        &self.variant
    }

    pub fn tail_class(&self) -> TailClass {
        self.tail
    }

    /// Total integral over R^N (exact or cached quadrature value).
    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// Human-readable spec of the datum, used in snapshots and manifests.
    pub fn label(&self) -> String {
        match self.variant {
            DatumVariant::Gaussian { scale, .. } => {
                format!("gaussian(scale={scale},mass={})", self.mass)
            }
            DatumVariant::BallIndicator { radius, height } => {
                format!("ball(radius={radius},height={height})")
            }
            DatumVariant::SmoothBump { radius, .. } => {
                format!("bump(radius={radius},mass={})", self.mass)
            }
            DatumVariant::PowerTail {
                amplitude,
                beta,
                core,
            } => format!("power(amplitude={amplitude},beta={beta},core={core})"),
        }
    }

    /// Pointwise value u0(r).
    pub fn eval(&self, r: f64) -> f64 {
        let r = r.abs();
        match self.variant {
            DatumVariant::Gaussian { scale, amplitude } => {
                amplitude * (-r * r / (4.0 * scale)).exp()
            }
            DatumVariant::BallIndicator { radius, height } => {
                if r <= radius {
                    height
                } else {
                    0.0
                }
            }
            DatumVariant::SmoothBump { radius, height } => height * bump_shape(r / radius),
            DatumVariant::PowerTail {
                amplitude,
                beta,
                core,
            } => {
                if r <= core {
                    amplitude * core.powf(-beta)
                } else if r >= 2.0 * core {
                    amplitude * r.powf(-beta)
                } else {
                    let t = (r - core) / core;
                    let b = self.blend.expect("power tail carries blend coefficients");
                    ((b[3] * t + b[2]) * t + b[1]) * t + b[0]
                }
            }
        }
    }

    /// Radial Fourier transform û0(rho); û0(0) = mass.
    pub fn transform(&self, rho: f64) -> Result<f64, DatumError> {
        if !(rho.is_finite() && rho >= 0.0) {
            return Err(DatumError::InvalidParameter(format!(
                "transform frequency must be >= 0, got {rho}"
            )));
        }
        match self.variant {
            DatumVariant::Gaussian { scale, .. } => Ok(self.mass * (-scale * rho * rho).exp()),
            DatumVariant::BallIndicator { radius, .. } => {
                Ok(self.mass * ball_transform_shape(self.dim, rho * radius))
            }
            DatumVariant::SmoothBump { .. } => {
                let curve = self.transform_curve()?;
                if rho <= curve.rho_max {
                    Ok(curve.hat.eval(rho))
                } else {
                    Ok(0.0)
                }
            }
            DatumVariant::PowerTail { .. } => self.power_tail_transform(rho),
        }
    }

    /// û0(rho) − M, computed without cancellation where a closed or
    /// series form exists. This is the quantity driving all
    /// "solution minus M Z" spectral integrals.
    pub fn transform_minus_mass(&self, rho: f64) -> Result<f64, DatumError> {
        if !(rho.is_finite() && rho >= 0.0) {
            return Err(DatumError::InvalidParameter(format!(
                "transform frequency must be >= 0, got {rho}"
            )));
        }
        match self.variant {
            DatumVariant::Gaussian { scale, .. } => {
                Ok(self.mass * libm::expm1(-scale * rho * rho))
            }
            DatumVariant::BallIndicator { radius, .. } => {
                Ok(self.mass * ball_transform_shape_minus_one(self.dim, rho * radius))
            }
            DatumVariant::SmoothBump { .. } => {
                let curve = self.transform_curve()?;
                if rho <= curve.rho_max {
                    Ok(rho * rho * curve.deficit_over_rho2.eval(rho))
                } else {
                    Ok(-self.mass)
                }
            }
            DatumVariant::PowerTail { .. } => Ok(self.power_tail_transform(rho)? - self.mass),
        }
    }

    /// Frequency beyond which |û0| is below ~1e-13 of the mass, when
    /// such a cutoff exists (fast-decaying transforms only).
    pub fn transform_cutoff(&self) -> Option<f64> {
        match self.variant {
            DatumVariant::Gaussian { scale, .. } => Some((32.0 / scale).sqrt()),
            DatumVariant::SmoothBump { .. } => {
                self.transform_curve().ok().map(|c| c.rho_max)
            }
            _ => None,
        }
    }

    /// First-moment cumulative U(w) = ∫_0^w s u0(s) ds, the kernel of
    /// the chordal convolution formula in dimension 3.
    pub fn cumulative_first_moment(&self, w: f64) -> f64 {
        if w <= 0.0 {
            return 0.0;
        }
        match self.variant {
            DatumVariant::Gaussian { scale, amplitude } => {
                2.0 * scale * amplitude * (-libm::expm1(-w * w / (4.0 * scale)))
            }
            DatumVariant::BallIndicator { radius, height } => {
                let w = w.min(radius);
                height * w * w / 2.0
            }
            DatumVariant::SmoothBump { radius, .. } => {
                let spline = self.cumulative_curve.get_or_init(|| {
                    let n = 600;
                    let mut xs = Vec::with_capacity(n + 1);
                    let mut ys = Vec::with_capacity(n + 1);
                    let mut acc = 0.0;
                    let mut prev = 0.0;
                    xs.push(0.0);
                    ys.push(0.0);
                    for i in 1..=n {
                        let x = radius * i as f64 / n as f64;
                        acc += quad::gl_panel(&|s: f64| s * self.eval(s), prev, x, 16);
                        xs.push(x);
                        ys.push(acc);
                        prev = x;
                    }
                    CubicSpline::new(xs, ys)
                });
                if w >= radius {
                    spline.eval(radius)
                } else {
                    spline.eval(w)
                }
            }
            DatumVariant::PowerTail {
                amplitude,
                beta,
                core,
            } => {
                let y0 = amplitude * core.powf(-beta);
                if w <= core {
                    return y0 * w * w / 2.0;
                }
                let plateau = y0 * core * core / 2.0;
                let b = self.blend.expect("power tail carries blend coefficients");
                if w <= 2.0 * core {
                    let t = (w - core) / core;
                    return plateau + core * core * poly_weighted_partial(&b, 1, t);
                }
                let blend = core * core * poly_weighted_partial(&b, 1, 1.0);
                // ∫ s * A s^{-beta} ds from 2 core to w (beta > 2 holds
                // for every admissible dimension).
                let a2 = 2.0 * core;
                let tail =
                    amplitude * (a2.powf(2.0 - beta) - w.powf(2.0 - beta)) / (beta - 2.0);
                plateau + blend + tail
            }
        }
    }

    fn transform_curve(&self) -> Result<&TransformCurve, DatumError> {
        if let Some(c) = self.transform_curve.get() {
            return Ok(c);
        }
        let built = self.build_transform_curve()?;
        Ok(self.transform_curve.get_or_init(|| built))
    }

    fn build_transform_curve(&self) -> Result<TransformCurve, DatumError> {
        let DatumVariant::SmoothBump { radius, .. } = self.variant else {
            unreachable!("transform curve is only cached for the bump datum");
        };
        let grid = RadialGrid::linear(radius, 24).map_err(DatumError::Transform)?;
        // Node spacing resolves the oscillation scale pi/radius; a dense
        // prefix fixes the curvature of (û−M)/rho² near rho = 0.
        let step = PI / radius / 48.0;
        let mut rhos = Vec::new();
        for i in 0..40 {
            rhos.push(step * i as f64 / 40.0);
        }
        let mut rho = step;
        let max_nodes = 80_000;
        while rhos.len() < max_nodes {
            rhos.push(rho);
            rho += step;
            if rho > 4000.0 * radius.recip() {
                break;
            }
        }
        let mut xs = Vec::new();
        let mut hat = Vec::new();
        let mut deficit = Vec::new();
        let mut quiet = 0usize;
        let floor = 1e-13 * self.mass;
        for &rho in &rhos {
            let v = transforms::radial_fourier(self.dim, |r| self.eval(r), rho, &grid)?;
            let d = self.deficit_by_quadrature(rho, &grid)?;
            xs.push(rho);
            hat.push(v);
            deficit.push(if rho == 0.0 { 0.0 } else { d / (rho * rho) });
            if v.abs() < floor {
                quiet += 1;
                if quiet > 40 {
                    break;
                }
            } else {
                quiet = 0;
            }
        }
        // Quadratic limit at rho = 0 taken from the first positive node.
        if deficit.len() > 1 {
            deficit[0] = deficit[1];
        }
        let rho_max = *xs.last().unwrap();
        Ok(TransformCurve {
            hat: CubicSpline::new(xs.clone(), hat),
            deficit_over_rho2: CubicSpline::new(xs, deficit),
            rho_max,
        })
    }

    /// û0(rho) − M over the compact support with modified kernels that
    /// evaluate (kernel − 1) stably at small arguments.
    fn deficit_by_quadrature(&self, rho: f64, grid: &RadialGrid) -> Result<f64, DatumError> {
        let dim = self.dim;
        let f = |r: f64| self.eval(r);
        let tol = 1e-11;
        let breaks = grid_breaks_for(grid, rho);
        let v = match dim {
            1 => {
                2.0 * quad::integrate_with_breaks(
                    |r| f(r) * cos_minus_one(rho * r),
                    &breaks,
                    tol,
                )?
            }
            2 => {
                2.0 * PI
                    * quad::integrate_with_breaks(
                        |r| r * f(r) * j0_minus_one(rho * r),
                        &breaks,
                        tol,
                    )?
            }
            3 => {
                4.0 * PI
                    * quad::integrate_with_breaks(
                        |r| r * r * f(r) * sinc_minus_one(rho * r),
                        &breaks,
                        tol,
                    )?
            }
            _ => unreachable!(),
        };
        Ok(v)
    }

    fn power_tail_transform(&self, rho: f64) -> Result<f64, DatumError> {
        if rho == 0.0 {
            return Ok(self.mass);
        }
        let f = |r: f64| self.eval(r);
        let tol = 1e-10;
        // Envelopes decay like r^{-beta} (r^{1-beta} with the radial
        // weight), so the half-period panel sums are extrapolated.
        let v = match self.dim {
            1 => 2.0 * quad::oscillatory_semi_infinite(f, quad::OscKernel::Cos, rho, None, tol)?,
            2 => {
                2.0 * PI
                    * quad::oscillatory_semi_infinite(
                        |r| r * f(r),
                        quad::OscKernel::BesselJ0,
                        rho,
                        None,
                        tol,
                    )?
            }
            3 => {
                4.0 * PI / rho
                    * quad::oscillatory_semi_infinite(
                        |r| r * f(r),
                        quad::OscKernel::Sin,
                        rho,
                        None,
                        tol,
                    )?
            }
            _ => unreachable!(),
        };
        Ok(v)
    }
}

fn check_dim(dim: usize) -> Result<(), DatumError> {
    if (1..=3).contains(&dim) {
        Ok(())
    } else {
        Err(DatumError::InvalidParameter(format!(
            "dimension must be 1, 2 or 3, got {dim}"
        )))
    }
}

fn ball_volume(dim: usize, radius: f64) -> f64 {
    match dim {
        1 => 2.0 * radius,
        2 => PI * radius * radius,
        3 => 4.0 * PI * radius.powi(3) / 3.0,
        _ => unreachable!(),
    }
}

/// exp(1 - 1/(1-x^2)) on [0,1), zero beyond: unit-height C-infinity bump.
fn bump_shape(x: f64) -> f64 {
    if x >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - x * x)).exp()
    }
}

/// Normalized ball transform: û/M as a function of z = rho * radius.
fn ball_transform_shape(dim: usize, z: f64) -> f64 {
    if z == 0.0 {
        return 1.0;
    }
    match dim {
        1 => z.sin() / z,
        2 => 2.0 * libm::j1(z) / z,
        3 => 3.0 * (z.sin() - z * z.cos()) / (z * z * z),
        _ => unreachable!(),
    }
}

fn ball_transform_shape_minus_one(dim: usize, z: f64) -> f64 {
    if z > 0.5 {
        return ball_transform_shape(dim, z) - 1.0;
    }
    let w = z * z;
    match dim {
        // sin z / z - 1
        1 => sinc_minus_one(z),
        // 2 J1(z)/z - 1 = Σ_{k>=1} (-w/4)^k/(k!(k+1)!)
        2 => {
            let q = -w / 4.0;
            let mut term = q; // k = 1: q/(1!·2!) = q/2
            let mut sum = 0.0;
            let mut kf = 1.0;
            let mut k1f = 2.0;
            for k in 1..20 {
                sum += term / (kf * k1f);
                term *= q;
                kf *= (k + 1) as f64;
                k1f *= (k + 2) as f64;
                if term.abs() < 1e-18 {
                    break;
                }
            }
            sum
        }
        // 3(sin z - z cos z)/z³ - 1 = Σ_{j≥1} 3 (-w)^j (2j+2)/(2j+3)!
        3 => {
            let mut sum = 0.0;
            let mut wpow = 1.0;
            let mut fact = 6.0; // (2j+3)! starting from 3!
            for j in 1..20 {
                wpow *= -w;
                fact *= (2 * j + 2) as f64 * (2 * j + 3) as f64;
                let tk = 3.0 * wpow * (2.0 * j as f64 + 2.0) / fact;
                sum += tk;
                if tk.abs() < 1e-18 {
                    break;
                }
            }
            sum
        }
        _ => unreachable!(),
    }
}

/// cos(z) - 1 without cancellation at small z.
fn cos_minus_one(z: f64) -> f64 {
    let s = (0.5 * z).sin();
    -2.0 * s * s
}

/// sin(z)/z - 1, stable at small z.
fn sinc_minus_one(z: f64) -> f64 {
    if z.abs() > 0.5 {
        return z.sin() / z - 1.0;
    }
    let w = z * z;
    // -w/6 + w²/120 - w³/5040 + ...
    let mut sum = 0.0;
    let mut term = 1.0;
    let mut fact = 1.0;
    for k in 1..15 {
        term *= -w;
        fact *= (2.0 * k as f64) * (2.0 * k as f64 + 1.0);
        let tk = term / fact;
        sum += tk;
        if tk.abs() < 1e-18 {
            break;
        }
    }
    sum
}

/// J0(z) - 1, stable at small z.
fn j0_minus_one(z: f64) -> f64 {
    if z.abs() > 0.5 {
        return libm::j0(z) - 1.0;
    }
    let q = -z * z / 4.0;
    let mut term = 1.0;
    let mut sum = 0.0;
    for k in 1..20 {
        term *= q / (k as f64);
        let tk = term / libm::tgamma(k as f64 + 1.0);
        sum += tk;
        if tk.abs() < 1e-18 {
            break;
        }
    }
    sum
}

/// ∫_0^1 (1+t)^p (b0 + b1 t + b2 t² + b3 t³) dt, exact.
fn poly_weighted_integral(b: &[f64; 4], p: u32) -> f64 {
    poly_weighted_partial(b, p, 1.0)
}

/// ∫_0^T (1+t)^p (b0 + b1 t + b2 t² + b3 t³) dt, exact (p in {0,1,2}).
fn poly_weighted_partial(b: &[f64; 4], p: u32, t_hi: f64) -> f64 {
    // Expand (1+t)^p into power basis and integrate termwise.
    let w: [f64; 3] = match p {
        0 => [1.0, 0.0, 0.0],
        1 => [1.0, 1.0, 0.0],
        2 => [1.0, 2.0, 1.0],
        _ => panic!("unsupported weight power {p}"),
    };
    let mut coef = [0.0; 6];
    for (i, &wi) in w.iter().enumerate() {
        if wi == 0.0 {
            continue;
        }
        for (j, &bj) in b.iter().enumerate() {
            coef[i + j] += wi * bj;
        }
    }
    let mut acc = 0.0;
    let mut tp = t_hi;
    for (k, &c) in coef.iter().enumerate() {
        acc += c * tp / (k as f64 + 1.0);
        tp *= t_hi;
    }
    acc
}

/// Uniform panels over the grid support, fine enough to resolve the
/// oscillation of the modified kernels at frequency rho.
fn grid_breaks_for(grid: &RadialGrid, rho: f64) -> Vec<f64> {
    let r_cut = grid.r_cut();
    let mut breaks = vec![0.0];
    let n = if rho > 0.0 {
        ((rho * r_cut / PI).ceil() as usize * 4).clamp(24, 4096)
    } else {
        24
    };
    for i in 1..=n {
        breaks.push(r_cut * i as f64 / n as f64);
    }
    breaks
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn masses_match_closed_forms() {
        let g = Datum::gaussian(1, 1.0, 1.0).unwrap();
        assert!((g.mass() - 1.0).abs() < 1e-15);
        // ball of radius 1, height 3/(4π) in R³ has unit mass
        let b = Datum::ball(3, 1.0, 3.0 / (4.0 * PI)).unwrap();
        assert!((b.mass() - 1.0).abs() < 1e-15);
        let bump = Datum::smooth_bump(3, 1.0, 2.5).unwrap();
        assert!((bump.mass() - 2.5).abs() < 1e-12);
    }

    #[test]
    fn power_tail_mass_matches_quadrature_refinement() {
        // Oracle: nested quadrature of the definition, refined until stable.
        let d = Datum::power_tail(3, 1.0, 5.0, 1.0).unwrap();
        let brute = |tol: f64| {
            let inner = quad::integrate(|r| r * r * d.eval(r), 0.0, 2.0, tol).unwrap();
            let tail = 1.0 * (2.0f64).powf(3.0 - 5.0) / (5.0 - 3.0); // ∫_2^∞ r² A r^-5
            4.0 * PI * (inner + tail)
        };
        let coarse = brute(1e-8);
        let fine = brute(1e-12);
        assert!((coarse - fine).abs() < 1e-8 * fine);
        assert!((d.mass() - fine).abs() < 1e-8 * fine, "{} vs {fine}", d.mass());
    }

    #[test]
    fn pointwise_values() {
        let b = Datum::ball(3, 1.0, 0.7).unwrap();
        assert_eq!(b.eval(0.5), 0.7);
        assert_eq!(b.eval(2.0), 0.0);
        let p = Datum::power_tail(1, 1.0, 5.0, 1.0).unwrap();
        // Exactly on the power law beyond twice the core.
        assert!((p.eval(10.0) - 1e-5).abs() < 1e-19);
        assert_eq!(p.eval(0.3), 1.0);
    }

    #[test]
    fn power_tail_blend_is_monotone_and_c1() {
        let d = Datum::power_tail(1, 1.0, 5.0, 1.0).unwrap();
        let mut prev = d.eval(1.0);
        assert!((prev - 1.0).abs() < 1e-14);
        for i in 1..=100 {
            let r = 1.0 + i as f64 / 100.0;
            let v = d.eval(r);
            assert!(v <= prev + 1e-14, "not monotone at r = {r}");
            prev = v;
        }
        assert!((d.eval(2.0) - 2.0f64.powf(-5.0)).abs() < 1e-14);
        // C1 at the junctions: one-sided difference quotients agree.
        let h = 1e-6;
        let left = (d.eval(2.0) - d.eval(2.0 - h)) / h;
        let right = (d.eval(2.0 + h) - d.eval(2.0)) / h;
        assert!((left - right).abs() < 1e-4, "{left} vs {right}");
        let left0 = (d.eval(1.0) - d.eval(1.0 - h)) / h;
        assert!(left0.abs() < 1e-9);
    }

    #[test]
    fn gaussian_transform_closed_form() {
        let g = Datum::gaussian(1, 1.0, 1.0).unwrap();
        let v = g.transform(1.0).unwrap();
        assert!((v - (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn ball_transform_at_pi_dim3() {
        let h = 0.37;
        let b = Datum::ball(3, 1.0, h).unwrap();
        let v = b.transform(PI).unwrap();
        // 4πh (sin π − π cos π)/π³ = 4h/π²  ... times π/π: h·4/π²·π = 4h/π...
        // direct: 4πh·π/π³ = 4h/π
        let want = 4.0 * h / PI;
        assert!((v - want).abs() < 1e-12, "{v} vs {want}");
    }

    #[test]
    fn transform_at_zero_equals_mass() {
        let data: Vec<Datum> = vec![
            Datum::gaussian(2, 0.5, 1.3).unwrap(),
            Datum::ball(2, 1.0, 0.9).unwrap(),
            Datum::smooth_bump(1, 1.0, 1.1).unwrap(),
            Datum::power_tail(1, 1.0, 3.0, 1.0).unwrap(),
            Datum::power_tail(3, 2.0, 5.0, 0.5).unwrap(),
        ];
        for d in &data {
            let v = d.transform(0.0).unwrap();
            assert!(
                (v - d.mass()).abs() < 1e-9 * d.mass(),
                "{}: {v} vs {}",
                d.label(),
                d.mass()
            );
        }
    }

    #[test]
    fn transform_bounded_by_mass() {
        let data: Vec<Datum> = vec![
            Datum::gaussian(3, 1.0, 1.0).unwrap(),
            Datum::ball(1, 1.0, 0.5).unwrap(),
            Datum::smooth_bump(2, 1.0, 1.0).unwrap(),
            Datum::power_tail(1, 1.0, 3.0, 1.0).unwrap(),
        ];
        for d in &data {
            for i in 1..=40 {
                let rho = i as f64 * 0.37;
                let v = d.transform(rho).unwrap();
                assert!(
                    v.abs() <= d.mass() * (1.0 + 1e-9),
                    "{} at rho={rho}: {v}",
                    d.label()
                );
            }
        }
    }

    #[test]
    fn deficit_consistent_with_direct_difference() {
        let data: Vec<Datum> = vec![
            Datum::gaussian(1, 1.0, 1.0).unwrap(),
            Datum::ball(3, 1.0, 0.7).unwrap(),
            Datum::ball(2, 1.0, 0.7).unwrap(),
            Datum::smooth_bump(3, 1.0, 1.0).unwrap(),
        ];
        for d in &data {
            for rho in [0.3, 1.0, 4.0] {
                let a = d.transform_minus_mass(rho).unwrap();
                let b = d.transform(rho).unwrap() - d.mass();
                assert!(
                    (a - b).abs() < 2e-7 * d.mass(),
                    "{} rho={rho}: {a} vs {b}",
                    d.label()
                );
            }
            // Small-frequency limit is quadratic, so the deficit must
            // vanish quadratically without noise.
            let tiny = d.transform_minus_mass(1e-7).unwrap();
            assert!(tiny.abs() < 1e-11, "{}: {tiny}", d.label());
        }
    }

    #[test]
    fn cumulative_first_moment_forms() {
        let g = Datum::gaussian(3, 1.0, 1.0).unwrap();
        // U(w) = 2a h (1 - e^{-w²/4a}); check against quadrature.
        for w in [0.5, 2.0, 10.0] {
            let direct = quad::integrate(|s| s * g.eval(s), 0.0, w, 1e-12).unwrap();
            let got = g.cumulative_first_moment(w);
            assert!((got - direct).abs() < 1e-12, "w={w}: {got} vs {direct}");
        }
        let p = Datum::power_tail(3, 1.0, 5.0, 1.0).unwrap();
        for w in [0.5, 1.5, 2.0, 3.0, 50.0] {
            let direct = quad::integrate(|s| s * p.eval(s), 0.0, w, 1e-12).unwrap();
            let got = p.cumulative_first_moment(w);
            assert!(
                (got - direct).abs() < 1e-10 * direct.max(1.0),
                "w={w}: {got} vs {direct}"
            );
        }
        let b = Datum::smooth_bump(3, 1.0, 1.0).unwrap();
        for w in [0.3f64, 0.9, 5.0] {
            let direct = quad::integrate(|s| s * b.eval(s), 0.0, w.min(1.0), 1e-12).unwrap();
            let got = b.cumulative_first_moment(w);
            assert!(
                (got - direct).abs() < 1e-8,
                "w={w}: {got} vs {direct}"
            );
        }
    }

    #[test]
    fn decay_class_membership() {
        let g = Datum::gaussian(1, 1.0, 1.0).unwrap();
        assert!(g.tail_class().bounded_by_power(7.0));
        let b = Datum::ball(2, 1.0, 1.0).unwrap();
        assert!(b.tail_class().bounded_by_power(2.0));
        let p = Datum::power_tail(1, 1.0, 3.0, 1.0).unwrap();
        assert!(p.tail_class().bounded_by_power(3.0));
        assert!(!p.tail_class().bounded_by_power(4.0));
    }

    #[test]
    fn constructors_reject_bad_parameters() {
        assert!(Datum::gaussian(4, 1.0, 1.0).is_err());
        assert!(Datum::gaussian(1, -1.0, 1.0).is_err());
        assert!(Datum::ball(2, 0.0, 1.0).is_err());
        // Integrability requires beta > N.
        assert!(Datum::power_tail(3, 1.0, 3.0, 1.0).is_err());
        assert!(Datum::power_tail(3, 1.0, 3.5, 1.0).is_ok());
    }
}
