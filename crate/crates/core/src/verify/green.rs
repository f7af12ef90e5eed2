//! Green function with pole at infinity, approximated at a finite level by
//! `G ≈ g̃_m(y) - c_m`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::coord::Vec2;
use crate::error::{Error, Result};
use crate::hier::CellTree;
use crate::kernel::KernelSpec;
use crate::level::Level;
use crate::par::{self, Execution};
use crate::potential::{potential_at, PotentialProfile};
use crate::spec::Alphabet;

use super::polar;

#[derive(Debug, Clone, Serialize)]
pub struct GreenEstimate {
    pub y: Vec2,
    pub level: usize,
    /// `g̃_m(y) - c_m`.
    pub value: f64,
    pub c_m: f64,
    /// Distance from `y` to the nearest point of `K_m`.
    pub dist: f64,
    /// Interval certain to contain `dist(y, K)`.
    pub dist_bracket: (f64, f64),
    /// `value / dist^δ`.
    pub ratio: f64,
    /// `value / dist^δ` over the distance bracket.
    pub ratio_bracket: (f64, f64),
    /// Size of the truncation of `c_∞`, taken as `m w_m ln a`.
    pub error_indication: f64,
}

fn check_pair(level: &Level, profile: &PotentialProfile) -> Result<()> {
    if matches!(level.spec().alphabet, Alphabet::RingAxis(_)) {
        return Err(Error::usage("Green estimates need a planar alphabet"));
    }
    if profile.generation != level.generation() || profile.len() != level.len() {
        return Err(Error::usage(format!(
            "profile of generation {} does not belong to level {}",
            profile.generation,
            level.generation()
        )));
    }
    Ok(())
}

fn estimate(
    y: Vec2,
    dist: f64,
    level: &Level,
    profile: &PotentialProfile,
) -> Result<GreenEstimate> {
    let spec = level.spec();
    let m = level.generation();
    let value = potential_at(y, level, &KernelSpec::Log)? - profile.c_n();
    let tail = spec.descendant_radius(m);
    let mut lo = (dist - tail).max(0.0);
    if spec.alphabet == Alphabet::LineBinary {
        // the limit set lies on the real axis
        lo = lo.max(y.y.abs());
    }
    let hi = dist + tail;
    let delta = spec.delta();
    let (r1, r2) = (value / hi.powf(delta), value / lo.powf(delta));
    Ok(GreenEstimate {
        y,
        level: m,
        value,
        c_m: profile.c_n(),
        dist,
        dist_bracket: (lo, hi),
        ratio: value / dist.powf(delta),
        ratio_bracket: (r1.min(r2), r1.max(r2)),
        error_indication: m as f64 * level.weight() * spec.a.ln(),
    })
}

/// `G(y)` from level `m` and its profile.
pub fn green_at(y: Vec2, level: &Level, profile: &PotentialProfile) -> Result<GreenEstimate> {
    check_pair(level, profile)?;
    let dist = level
        .points()
        .iter()
        .map(|p| p.diff_vec(y).norm())
        .fold(f64::INFINITY, f64::min);
    // closer than the rounding of y itself counts as coincident
    if dist <= 4.0 * f64::EPSILON * y.norm().max(1.0) {
        return Err(Error::domain(format!(
            "({}, {}) is a point of the level",
            y.x, y.y
        )));
    }
    estimate(y, dist, level, profile)
}

#[derive(Debug, Clone, Serialize)]
pub struct ScaleRow {
    pub scale: f64,
    pub samples: usize,
    pub min: f64,
    pub max: f64,
    pub median: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GreenSweep {
    pub generation: usize,
    pub delta: f64,
    pub seed: u64,
    pub rows: Vec<ScaleRow>,
    pub min: f64,
    pub max: f64,
    /// Global `max / min` of `G / dist^δ`.
    pub spread: f64,
    pub estimates: Vec<GreenEstimate>,
}

impl GreenSweep {
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["scale", "samples", "min_ratio", "max_ratio", "median_ratio"])?;
        for r in &self.rows {
            w.write_record([
                r.scale.to_string(),
                r.samples.to_string(),
                r.min.to_string(),
                r.max.to_string(),
                r.median.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn green_ratio_sweep(
    level: &Level,
    profile: &PotentialProfile,
    scales: &[f64],
    samples: usize,
    seed: u64,
) -> Result<GreenSweep> {
    green_ratio_sweep_with(level, profile, scales, samples, seed, Execution::default())
}

/// Samples `y` at distance `R` above random points of the level, one
/// independent stream per scale. On the line `y = x_0 + (0, R)`; for roots
/// of unity `y` moves radially outward from `x_0`.
pub fn green_ratio_sweep_with(
    level: &Level,
    profile: &PotentialProfile,
    scales: &[f64],
    samples: usize,
    seed: u64,
    exec: Execution,
) -> Result<GreenSweep> {
    check_pair(level, profile)?;
    if scales.is_empty() || samples == 0 {
        return Err(Error::usage(
            "sweep needs at least one scale and one sample",
        ));
    }
    let spec = level.spec();
    let m = level.generation();
    let smallest = scales.iter().copied().fold(f64::INFINITY, f64::min);
    if !(smallest > 0.0) {
        return Err(Error::usage("scales must be positive"));
    }
    let needed = (smallest.ln() / spec.r.ln()).ceil().max(0.0) as usize + 2;
    if m < needed {
        return Err(Error::usage(format!(
            "scale {smallest:e} needs a level of depth at least {needed}, got {m}"
        )));
    }
    let tree = CellTree::from_level(level);
    let mut queries = Vec::with_capacity(scales.len() * samples);
    for (s, &scale) in scales.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(s as u64);
        for _ in 0..samples {
            let x0 = level.point(rng.random_range(0..level.len())).to_vec();
            let dir = match spec.alphabet {
                Alphabet::LineBinary => Vec2::new(0.0, 1.0),
                _ if x0.norm() > 0.0 => x0 * (1.0 / x0.norm()),
                _ => polar(rng.random::<f64>() * std::f64::consts::TAU),
            };
            queries.push((s, x0 + dir * scale));
        }
    }
    let estimates = par::try_map_slice(exec, &queries, |&(_, y)| {
        let (_, dist) = tree.nearest(y);
        estimate(y, dist, level, profile)
    })?;
    let mut rows = Vec::with_capacity(scales.len());
    for (s, &scale) in scales.iter().enumerate() {
        let mut ratios: Vec<f64> = queries
            .iter()
            .zip(&estimates)
            .filter(|((q, _), _)| *q == s)
            .map(|(_, e)| e.ratio)
            .collect();
        ratios.sort_by(f64::total_cmp);
        rows.push(ScaleRow {
            scale,
            samples: ratios.len(),
            min: ratios[0],
            max: ratios[ratios.len() - 1],
            median: ratios[ratios.len() / 2],
        });
    }
    let min = rows.iter().map(|r| r.min).fold(f64::INFINITY, f64::min);
    let max = rows.iter().map(|r| r.max).fold(f64::NEG_INFINITY, f64::max);
    Ok(GreenSweep {
        generation: m,
        delta: spec.delta(),
        seed,
        rows,
        min,
        max,
        spread: max / min,
        estimates,
    })
}

/// Deviation of the potential on small circles around level points from
/// the single-point singularity, in units of the point weight.
#[derive(Debug, Clone, Serialize)]
pub struct RingEstimate {
    pub generation: usize,
    /// Circle radius `r^{n-1}/2`.
    pub radius: f64,
    pub samples: usize,
    /// `max |g̃_n(y) - c_n - w_n ln radius| / w_n`.
    pub constant: f64,
    pub min: f64,
}

/// Probes `samples` points: up to 8 evenly spread centres, each with
/// evenly spaced angles offset from the axis.
pub fn ring_estimate(
    level: &Level,
    profile: &PotentialProfile,
    samples: usize,
) -> Result<RingEstimate> {
    check_pair(level, profile)?;
    let n = level.generation();
    if n == 0 || samples == 0 {
        return Err(Error::usage(
            "ring estimate needs generation >= 1 and a positive sample count",
        ));
    }
    let len = level.len();
    let centres = len.min(8);
    let angles = samples.div_ceil(centres);
    let radius = 0.5 * level.spec().r.powi(n as i32 - 1);
    let w = level.weight();
    let mut devs = Vec::with_capacity(samples);
    'outer: for c in 0..centres {
        let x0 = level.point((2 * c + 1) * len / (2 * centres)).to_vec();
        for l in 0..angles {
            if devs.len() == samples {
                break 'outer;
            }
            let theta = (l as f64 + 0.5) * std::f64::consts::TAU / angles as f64;
            let y = x0 + polar(theta) * radius;
            let g = potential_at(y, level, &KernelSpec::Log)?;
            devs.push((g - profile.c_n() - w * radius.ln()).abs() / w);
        }
    }
    Ok(RingEstimate {
        generation: n,
        radius,
        samples: devs.len(),
        constant: devs.iter().copied().fold(0.0, f64::max),
        min: devs.iter().copied().fold(f64::INFINITY, f64::min),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calibrate::{run_construction, RunOptions};
    use crate::spec::GeneratorSpec;

    fn calibrated(n: usize) -> (Level, PotentialProfile) {
        let spec = GeneratorSpec::reference_line(n);
        let c = run_construction(&spec, n, &RunOptions::default()).unwrap();
        (c.level, c.profile)
    }

    #[test]
    fn positive_above_the_set() {
        let (level, profile) = calibrated(6);
        for x in [-0.5, -0.1, 0.0, 0.3] {
            let g = green_at(Vec2::new(x, 1.0), &level, &profile).unwrap();
            assert!(g.value > 0.0, "{x}: {}", g.value);
            assert!(g.dist_bracket.0 <= g.dist && g.dist <= g.dist_bracket.1);
        }
        // farther out, G grows like ln|y|
        let near = green_at(Vec2::new(0.0, 1.0), &level, &profile).unwrap();
        let far = green_at(Vec2::new(0.0, 1e3), &level, &profile).unwrap();
        assert!((far.value + far.c_m - 1e3f64.ln()).abs() < 1e-6);
        assert!(far.value > near.value);
    }

    #[test]
    fn single_point_is_the_logarithm() {
        let level = Level::root(&GeneratorSpec::reference_line(1));
        let profile =
            PotentialProfile::from_values(0, vec![0.0], vec![0.0], crate::SumMethod::Naive, None);
        let g = green_at(Vec2::new(0.0, 2.0), &level, &profile).unwrap();
        assert!((g.value - 2f64.ln()).abs() < 1e-15);
        assert!(g.ratio.is_finite() && g.ratio > 0.0);
    }

    #[test]
    fn coincidence_is_a_domain_error() {
        let (level, profile) = calibrated(3);
        let y = level.point(5).to_vec();
        assert!(matches!(
            green_at(y, &level, &profile),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn sweep_rejects_shallow_levels() {
        let (level, profile) = calibrated(3);
        let err = green_ratio_sweep(&level, &profile, &[2f64.powi(-10)], 4, 1).unwrap_err();
        assert!(matches!(err, Error::Usage(_)));
    }

    #[test]
    fn sweep_is_thread_invariant() {
        let (level, profile) = calibrated(8);
        let scales: Vec<f64> = (2..=6).map(|j| 2f64.powi(-j)).collect();
        let a =
            green_ratio_sweep_with(&level, &profile, &scales, 8, 3, Execution::Sequential).unwrap();
        let b =
            green_ratio_sweep_with(&level, &profile, &scales, 8, 3, Execution::Parallel).unwrap();
        for (x, y) in a.estimates.iter().zip(&b.estimates) {
            assert_eq!(x.value.to_bits(), y.value.to_bits());
        }
        assert!(a.min > 0.0 && a.spread.is_finite());
    }

    #[test]
    fn ring_deviation_is_order_one() {
        let (level, profile) = calibrated(6);
        let est = ring_estimate(&level, &profile, 64).unwrap();
        assert_eq!(est.samples, 64);
        assert!(
            est.constant.is_finite() && est.constant < 10.0,
            "{}",
            est.constant
        );
    }
}
