//! Numerical checks on constructed sets: Green function estimates,
//! Ahlfors regularity and walk-on-spheres harmonic measure.

mod ahlfors;
mod green;
mod wos;

pub use ahlfors::{ahlfors_report, dyadic_cell_ratios, AhlforsReport};
pub use green::{
    green_at, green_ratio_sweep, green_ratio_sweep_with, ring_estimate, GreenEstimate, GreenSweep,
    RingEstimate, ScaleRow,
};
pub use wos::{
    exterior_poisson_cdf, exterior_poisson_density, measure_comparison, sample_exterior_hit,
    wos_sample, wos_sample_with, CellRatio, MeasureComparison, WosOptions, WosResult,
    DEFAULT_STEP_CAP,
};

use crate::coord::Vec2;
use crate::level::Level;

/// Diameter of a level: exact up to 8192 points, otherwise the upper bound
/// twice the largest distance from the first point.
pub fn level_diameter(level: &Level) -> f64 {
    let pts = level.points();
    if pts.len() <= 8192 {
        let mut d: f64 = 0.0;
        for (i, p) in pts.iter().enumerate() {
            for q in &pts[i + 1..] {
                d = d.max(p.distance(*q));
            }
        }
        d
    } else {
        2.0 * pts.iter().map(|p| p.distance(pts[0])).fold(0.0, f64::max)
    }
}

/// Unit vector at angle `theta`.
pub(crate) fn polar(theta: f64) -> Vec2 {
    let (s, c) = theta.sin_cos();
    Vec2::new(c, s)
}
