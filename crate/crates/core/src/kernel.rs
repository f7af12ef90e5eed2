//! Interaction kernels: `ln|x|` in the plane and the ring kernel `e(t, R)`.
//!
//! The ring kernel is the average of `|x - y|^{-(n-2)}` over a unit
//! `(n-2)`-sphere `y` orthogonal to the axis, seen from a point at axial
//! offset `t` and distance `R` from the axis. After symmetry reduction:
//!
//! ```text
//! e(t, R) = κ ∫_0^π sin^{d-1}θ (t² + (R-1)² + 4R sin²(θ/2))^{-d/2} dθ,
//! d = n - 2,  κ = Γ((d+1)/2) / (√π Γ(d/2)).
//! ```

use std::f64::consts::PI;

use statrs::function::gamma::ln_gamma;

use crate::coord::Vec2;
use crate::error::{Error, Result};
use crate::quad;
use crate::spec::{Alphabet, GeneratorSpec};

/// Closer than this to the singular circle the ring kernel is refused.
pub const RING_SINGULAR_RADIUS: f64 = 1e-100;

pub const DEFAULT_RING_TOL: f64 = 1e-12;

const RING_MAX_INTERVALS: usize = 2000;

pub fn log_kernel(d: f64) -> Result<f64> {
    if d > 0.0 {
        Ok(d.ln())
    } else {
        Err(Error::domain(format!(
            "log kernel needs a positive distance, got {d}"
        )))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RingKernel {
    ambient: u32,
    tol: f64,
    norm: f64,
}

impl RingKernel {
    pub fn new(ambient: u32, tol: f64) -> Result<Self> {
        if ambient < 3 {
            return Err(Error::InvalidSpec(format!(
                "ring kernel needs ambient dimension >= 3, got {ambient}"
            )));
        }
        if !(tol > 0.0) {
            return Err(Error::usage(format!(
                "ring kernel tolerance must be positive, got {tol}"
            )));
        }
        let d = (ambient - 2) as f64;
        let norm = (ln_gamma(0.5 * (d + 1.0)) - ln_gamma(0.5 * d)).exp() / PI.sqrt();
        Ok(RingKernel { ambient, tol, norm })
    }

    pub fn ambient(&self) -> u32 {
        self.ambient
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    /// Exponent `d = n - 2` of the inverse distance.
    pub fn order(&self) -> f64 {
        (self.ambient - 2) as f64
    }

    /// `κ`; also the coefficient of `ln(1/ρ)` as `(t, R) → (0, 1)`.
    pub fn norm(&self) -> f64 {
        self.norm
    }

    pub fn eval(&self, t: f64, radius: f64) -> Result<f64> {
        self.eval_with_error(t, radius).map(|(v, _)| v)
    }

    /// Value and quadrature error estimate.
    pub fn eval_with_error(&self, t: f64, radius: f64) -> Result<(f64, f64)> {
        if !(radius >= 0.0) || !t.is_finite() || !radius.is_finite() {
            return Err(Error::domain(format!(
                "ring kernel at t = {t}, R = {radius}"
            )));
        }
        let d = self.order();
        let gap = radius - 1.0;
        let rho = t.hypot(gap);
        if rho < RING_SINGULAR_RADIUS {
            return Err(Error::Singularity { t, radius });
        }
        if radius == 0.0 {
            return Ok(((1.0 + t * t).powf(-0.5 * d), 0.0));
        }
        let base = t * t + gap * gap;
        let power = (self.ambient - 3) as i32;
        let f = |theta: f64| {
            let s = (0.5 * theta).sin();
            theta.sin().powi(power) * (base + 4.0 * radius * s * s).powf(-0.5 * d)
        };
        // the integrand peaks on a θ-scale of ρ/√R next to θ = 0
        let width = rho / radius.sqrt();
        let mut breaks = Vec::new();
        let mut b = width;
        while b < PI {
            breaks.push(b);
            b *= 4.0;
        }
        let q = quad::integrate(
            f,
            0.0,
            PI,
            &breaks,
            self.tol / self.norm,
            self.tol,
            RING_MAX_INTERVALS,
        )?;
        Ok((self.norm * q.value, self.norm * q.error))
    }

    /// Rigorous majorant of `|∂²_t e(t, 1)|`: `d(d+2) e(t, 1) / t²`.
    pub fn second_derivative_bound(&self, t: f64) -> Result<f64> {
        let d = self.order();
        Ok(d * (d + 2.0) * self.eval(t, 1.0)? / (t * t))
    }
}

/// `e(t, R)` for ambient dimension `n` with the given tolerance.
pub fn ring_kernel(t: f64, radius: f64, ambient: u32, tol: f64) -> Result<f64> {
    RingKernel::new(ambient, tol)?.eval(t, radius)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelSpec {
    Log,
    Ring(RingKernel),
}

impl KernelSpec {
    pub fn for_spec(spec: &GeneratorSpec) -> Result<Self> {
        Self::for_spec_with_tol(spec, DEFAULT_RING_TOL)
    }

    pub fn for_spec_with_tol(spec: &GeneratorSpec, tol: f64) -> Result<Self> {
        Ok(match spec.alphabet {
            Alphabet::RingAxis(n) => KernelSpec::Ring(RingKernel::new(n, tol)?),
            _ => KernelSpec::Log,
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            KernelSpec::Log => "log",
            KernelSpec::Ring(_) => "ring",
        }
    }

    /// Interaction between two points of the set separated by `d`. For the
    /// ring kernel both points carry unit spheres, so `R = 1`.
    pub fn pair(&self, d: Vec2) -> Result<(f64, f64)> {
        match self {
            KernelSpec::Log => Ok((log_kernel(d.norm())?, 0.0)),
            KernelSpec::Ring(k) => k.eval_with_error(d.x, 1.0),
        }
    }

    /// Kernel seen from an off-set point: `d` is query minus source. For the
    /// ring kernel `d.x` is the axial offset and `d.y` the query's distance
    /// from the axis.
    pub fn query(&self, d: Vec2) -> Result<(f64, f64)> {
        match self {
            KernelSpec::Log => Ok((log_kernel(d.norm())?, 0.0)),
            KernelSpec::Ring(k) => k.eval_with_error(d.x, d.y.abs()),
        }
    }
}
