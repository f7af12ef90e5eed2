//! Empirical Ahlfors regularity: `μ_m(B(x, ρ)) / ρ^δ` over centres in the
//! level and dyadic radii between the resolution `r^m` and the diameter.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::level::Level;
use crate::par::{self, Execution};

use super::level_diameter;

#[derive(Debug, Clone, Serialize)]
pub struct AhlforsReport {
    pub generation: usize,
    pub delta: f64,
    pub centres: usize,
    pub scales: usize,
    pub min: f64,
    pub max: f64,
    /// `max / min`, the empirical square of the regularity constant.
    pub ratio: f64,
    /// Set when the level has no usable scale (a single point).
    pub degenerate: bool,
}

/// Uses every point as a centre when `samples` covers the level, otherwise
/// a seeded sample without replacement.
pub fn ahlfors_report(level: &Level, samples: usize, seed: u64) -> AhlforsReport {
    let spec = level.spec();
    let m = level.generation();
    let delta = spec.delta();
    let diam = level_diameter(level);
    let floor = spec.r.powi(m as i32);
    let mut radii = Vec::new();
    let mut rho = diam;
    while rho >= floor && rho > 0.0 {
        radii.push(rho);
        rho *= 0.5;
    }
    if radii.is_empty() || samples == 0 {
        return AhlforsReport {
            generation: m,
            delta,
            centres: 0,
            scales: 0,
            min: f64::NAN,
            max: f64::NAN,
            ratio: f64::NAN,
            degenerate: true,
        };
    }
    let centres: Vec<usize> = if samples >= level.len() {
        (0..level.len()).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut picked = rand::seq::index::sample(&mut rng, level.len(), samples).into_vec();
        picked.sort_unstable();
        picked
    };
    let w = level.weight();
    let pts = level.points();
    let extremes = par::map_slice(Execution::default(), &centres, |&i| {
        let mut d: Vec<f64> = pts.iter().map(|p| p.distance(pts[i])).collect();
        d.sort_by(f64::total_cmp);
        radii
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), &rho| {
                let count = d.partition_point(|&x| x <= rho);
                let v = count as f64 * w / rho.powf(delta);
                (lo.min(v), hi.max(v))
            })
    });
    let min = extremes.iter().map(|e| e.0).fold(f64::INFINITY, f64::min);
    let max = extremes.iter().map(|e| e.1).fold(0.0, f64::max);
    AhlforsReport {
        generation: m,
        delta,
        centres: centres.len(),
        scales: radii.len(),
        min,
        max,
        ratio: max / min,
        degenerate: false,
    }
}

/// `μ(Q) / diam(Q)^δ` for every cell `Q` of depth `k < m` (cells with at
/// least two points), with `diam` measured on the level's points.
pub fn dyadic_cell_ratios(level: &Level) -> Vec<(usize, f64)> {
    let m = level.generation();
    let base = level.base();
    let delta = level.spec().delta();
    let pts = level.points();
    let mut out = Vec::new();
    for k in 0..m {
        let size = base.pow((m - k) as u32);
        let mass = (base as f64).powi(-(k as i32));
        for cell in pts.chunks(size) {
            let mut d: f64 = 0.0;
            for (i, p) in cell.iter().enumerate() {
                for q in &cell[i + 1..] {
                    d = d.max(p.distance(*q));
                }
            }
            out.push((k, mass / d.powf(delta)));
        }
    }
    out
}
