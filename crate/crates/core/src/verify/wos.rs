//! Walk-on-spheres estimate of harmonic measure with a finite pole.
//!
//! Each step jumps to a uniform point on the largest circle that provably
//! avoids the limit set: the distance to the nearest point of `K_m` minus
//! the descendant radius. A walker that leaves the disc `|z| ≤ R_out` is
//! put back on its boundary at the exact planar hitting point, sampled by
//! pushing the uniform measure through a disc automorphism.

use std::f64::consts::{PI, TAU};
use std::io::Write;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::coord::Vec2;
use crate::error::{Error, Result};
use crate::hier::{CellTree, NearestScratch};
use crate::level::Level;
use crate::par::{self, Execution};
use crate::spec::Alphabet;

use super::{level_diameter, polar};

pub const DEFAULT_STEP_CAP: u64 = 1_000_000;
const CHUNK: usize = 512;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WosOptions {
    pub pole: Vec2,
    /// Termination tolerance; `None` means `10 r^m`.
    pub eps: Option<f64>,
    pub walks: usize,
    /// Depth of the cells hits are attributed to.
    pub depth: usize,
    pub seed: u64,
    pub step_cap: u64,
}

impl Default for WosOptions {
    fn default() -> Self {
        WosOptions {
            pole: Vec2::new(0.0, 3.0),
            eps: None,
            walks: 100_000,
            depth: 3,
            seed: 0,
            step_cap: DEFAULT_STEP_CAP,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct WosResult {
    pub pole: Vec2,
    pub eps_wos: f64,
    pub walks: usize,
    pub depth: usize,
    pub base: usize,
    pub generation: usize,
    pub seed: u64,
    pub r_out: f64,
    /// Hits per depth-`depth` cell. Together with `censored` they account
    /// for every walk.
    pub counts: Vec<u64>,
    pub censored: u64,
    pub total_steps: u64,
    pub max_steps: u64,
    /// Number of exits through `|z| = R_out`.
    pub reentries: u64,
}

impl WosResult {
    pub fn hits(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn censored_fraction(&self) -> f64 {
        self.censored as f64 / self.walks as f64
    }

    /// A run with more than 1% censored walks is not usable.
    pub fn passed(&self) -> bool {
        self.censored_fraction() <= 0.01
    }

    pub fn mean_steps(&self) -> f64 {
        self.total_steps as f64 / self.walks as f64
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["depth", "cell", "count"])?;
        for (j, c) in self.counts.iter().enumerate() {
            w.write_record([self.depth.to_string(), j.to_string(), c.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Hitting density on `|w| = r_out` in the angle `θ`, for planar Brownian
/// motion started at `|z0| > r_out`.
pub fn exterior_poisson_density(z0: Vec2, r_out: f64, theta: f64) -> f64 {
    let d = z0 - polar(theta) * r_out;
    (z0.norm_sq() - r_out * r_out) / (TAU * d.norm_sq())
}

/// Distribution function of the hitting angle measured from `arg z0`,
/// with the offset taken in `(-π, π]`.
pub fn exterior_poisson_cdf(z0: Vec2, r_out: f64, offset: f64) -> f64 {
    let rho = r_out / z0.norm();
    if offset >= PI {
        return 1.0;
    }
    0.5 + ((1.0 + rho) / (1.0 - rho) * (0.5 * offset).tan()).atan() / PI
}

/// Exact hitting point on `|w| = r_out` from `|z0| > r_out`.
///
/// Inversion in the circle maps the exterior onto the disc and fixes the
/// boundary, sending `z0` to `b = r_out/z̄0`; the automorphism
/// `ζ ↦ (ζ + b)/(1 + b̄ζ)` carries uniform measure to harmonic measure from `b`.
pub fn sample_exterior_hit<R: Rng>(z0: Vec2, r_out: f64, rng: &mut R) -> Vec2 {
    let b = Complex64::new(z0.x, z0.y) * (r_out / z0.norm_sq());
    let e = Complex64::from_polar(1.0, rng.random::<f64>() * TAU);
    let zeta = (e + b) / (Complex64::new(1.0, 0.0) + b.conj() * e);
    Vec2::new(r_out * zeta.re, r_out * zeta.im)
}

#[derive(Default)]
struct ChunkStats {
    counts: Vec<u64>,
    censored: u64,
    steps: u64,
    max_steps: u64,
    reentries: u64,
}

pub fn wos_sample(level: &Level, opts: &WosOptions) -> Result<WosResult> {
    wos_sample_with(level, opts, Execution::default())
}

/// Walk `i` draws from stream `i` of a generator keyed by the seed, so
/// counts do not depend on the thread count.
pub fn wos_sample_with(level: &Level, opts: &WosOptions, exec: Execution) -> Result<WosResult> {
    let spec = level.spec();
    if matches!(spec.alphabet, Alphabet::RingAxis(_)) {
        return Err(Error::usage(
            "walk on spheres is implemented for planar alphabets only",
        ));
    }
    let m = level.generation();
    let k = opts.depth;
    if k > m {
        return Err(Error::usage(format!(
            "attribution depth {k} exceeds the level's generation {m}"
        )));
    }
    if opts.walks == 0 {
        return Err(Error::usage("need at least one walk"));
    }
    let resolution = spec.r.powi(m as i32);
    let eps = opts.eps.unwrap_or(10.0 * resolution);
    if !(eps >= 2.0 * resolution) {
        return Err(Error::usage(format!(
            "tolerance {eps:e} is below twice the level resolution {resolution:e}"
        )));
    }
    let tree = CellTree::from_level(level);
    let tail = spec.descendant_radius(m);
    let pole_gap = tree.nearest(opts.pole).1 - tail;
    if pole_gap < 1.0 {
        return Err(Error::usage(format!(
            "pole is only {pole_gap} away from the set; need at least 1"
        )));
    }
    let r_out = 2.0 + level_diameter(level);
    let cells = level.base().pow(k as u32);
    let shift = level.base().pow((m - k) as u32);

    let chunks = opts.walks.div_ceil(CHUNK);
    let stats = par::map_indices(exec, chunks, |c| {
        let mut st = ChunkStats {
            counts: vec![0; cells],
            ..ChunkStats::default()
        };
        let mut scratch = NearestScratch::default();
        for walk in c * CHUNK..((c + 1) * CHUNK).min(opts.walks) {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            rng.set_stream(walk as u64);
            let mut z = opts.pole;
            let mut steps = 0u64;
            let hit = loop {
                if steps >= opts.step_cap {
                    break None;
                }
                if z.norm() > r_out {
                    z = sample_exterior_hit(z, r_out, &mut rng);
                    st.reentries += 1;
                }
                let (idx, d) = tree.nearest_with(z, &mut scratch);
                let rho = d - tail;
                if rho < eps {
                    break Some(idx / shift);
                }
                z = z + polar(rng.random::<f64>() * TAU) * rho;
                steps += 1;
            };
            match hit {
                Some(cell) => st.counts[cell] += 1,
                None => st.censored += 1,
            }
            st.steps += steps;
            st.max_steps = st.max_steps.max(steps);
        }
        st
    });
    let mut total = ChunkStats {
        counts: vec![0; cells],
        ..ChunkStats::default()
    };
    for st in stats {
        for (t, c) in total.counts.iter_mut().zip(st.counts) {
            *t += c;
        }
        total.censored += st.censored;
        total.steps += st.steps;
        total.max_steps = total.max_steps.max(st.max_steps);
        total.reentries += st.reentries;
    }
    Ok(WosResult {
        pole: opts.pole,
        eps_wos: eps,
        walks: opts.walks,
        depth: k,
        base: level.base(),
        generation: m,
        seed: opts.seed,
        r_out,
        counts: total.counts,
        censored: total.censored,
        total_steps: total.steps,
        max_steps: total.max_steps,
        reentries: total.reentries,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct CellRatio {
    pub cell: usize,
    pub count: u64,
    /// Estimated harmonic measure `ω̂(Q)`.
    pub omega: f64,
    pub mu: f64,
    pub ratio: f64,
    /// 95% Wilson interval for `ω̂(Q)`, divided by `μ(Q)`.
    pub ci: (f64, f64),
    pub flagged: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct MeasureComparison {
    pub depth: usize,
    pub hits: u64,
    pub rows: Vec<CellRatio>,
    /// `max / min` ratio over unflagged cells.
    pub band: f64,
    pub warnings: Vec<String>,
}

impl MeasureComparison {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "depth", "cell", "count", "omega", "mu", "ratio", "ci_lo", "ci_hi", "flagged",
        ])?;
        for r in &self.rows {
            w.write_record([
                self.depth.to_string(),
                r.cell.to_string(),
                r.count.to_string(),
                r.omega.to_string(),
                r.mu.to_string(),
                r.ratio.to_string(),
                r.ci.0.to_string(),
                r.ci.1.to_string(),
                r.flagged.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn wilson(count: u64, total: u64, z: f64) -> (f64, f64) {
    let n = total as f64;
    let p = count as f64 / n;
    let z2 = z * z;
    let centre = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
    let half = z / (1.0 + z2 / n) * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// `ω̂(Q)/μ(Q)` for the cells of depth `k ≤ wos.depth`, aggregating counts.
pub fn measure_comparison(wos: &WosResult, k: usize) -> Result<MeasureComparison> {
    if k > wos.depth {
        return Err(Error::usage(format!(
            "walks were attributed at depth {}, not {k}",
            wos.depth
        )));
    }
    let cells = wos.base.pow(k as u32);
    let group = wos.base.pow((wos.depth - k) as u32);
    let counts: Vec<u64> = wos.counts.chunks(group).map(|c| c.iter().sum()).collect();
    let hits: u64 = counts.iter().sum();
    let mu = 1.0 / cells as f64;
    let z = Normal::standard().inverse_cdf(0.975);
    let mut rows = Vec::with_capacity(cells);
    let mut warnings = Vec::new();
    for (cell, &count) in counts.iter().enumerate() {
        let flagged = count == 0;
        if flagged {
            warnings.push(format!(
                "cell {cell} at depth {k} received no hits and is left out of the band"
            ));
        }
        let (omega, ci) = if hits == 0 {
            (f64::NAN, (f64::NAN, f64::NAN))
        } else {
            (count as f64 / hits as f64, wilson(count, hits, z))
        };
        rows.push(CellRatio {
            cell,
            count,
            omega,
            mu,
            ratio: omega / mu,
            ci: (ci.0 / mu, ci.1 / mu),
            flagged,
        });
    }
    let used = rows.iter().filter(|r| !r.flagged);
    let max = used
        .clone()
        .map(|r| r.ratio)
        .fold(f64::NEG_INFINITY, f64::max);
    let min = used.map(|r| r.ratio).fold(f64::INFINITY, f64::min);
    Ok(MeasureComparison {
        depth: k,
        hits,
        rows,
        band: max / min,
        warnings,
    })
}
