//! Generation-by-generation choice of the spacing coefficients.
//!
//! Writing `x̂` for the parent of `x` at generation `n`,
//! `g_n(x) = g_{n-1}(x̂) + w_n (Δ1 + Δ2 + Δ3)` exactly. `Δ1` (the siblings)
//! depends only on the parent's coefficient, so choosing it to cancel
//! `g_{n-1}(x̂) - c_{n-1}` leaves an oscillation driven by `Δ2 + Δ3` alone.

use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::coord::Point;
use crate::error::{Error, Result};
use crate::hier::hier_potential_profile_with;
use crate::kernel::{KernelSpec, DEFAULT_RING_TOL};
use crate::level::Level;
use crate::par::{self, Execution};
use crate::params::ParamTree;
use crate::potential::{potential_profile_with, sibling_increment, PotentialProfile, SumMethod};
use crate::spec::{Alphabet, GeneratorSpec};
use crate::sum::pairwise_sum;
use crate::word::first_disagreement_index;

const RING_GAP_GENERATIONS: usize = 20;
const BISECTION_STEPS: usize = 200;

/// Width `W` of the attainable range of `Δ1`: `ln a` on the line,
/// `(N-1) ln a` for roots of unity, and for the ring kernel the smallest
/// gap `e(r^{m-1}, 1) - e(a r^{m-1}, 1)` over `m` together with its
/// small-scale limit `κ ln a`.
pub fn width(spec: &GeneratorSpec, kernel: &KernelSpec) -> Result<f64> {
    match (spec.alphabet, kernel) {
        (Alphabet::LineBinary, KernelSpec::Log) => Ok(spec.a.ln()),
        (Alphabet::RootsOfUnity(n), KernelSpec::Log) => Ok((n - 1) as f64 * spec.a.ln()),
        (Alphabet::RingAxis(_), KernelSpec::Ring(k)) => {
            let mut w = k.norm() * spec.a.ln();
            for m in 1..=spec.max_generation.max(RING_GAP_GENERATIONS) {
                let t = spec.r.powi(m as i32 - 1);
                w = w.min(k.eval(t, 1.0)? - k.eval(spec.a * t, 1.0)?);
            }
            Ok(w)
        }
        _ => Err(Error::usage(format!(
            "kernel {} does not match alphabet {}",
            kernel.name(),
            spec.alphabet
        ))),
    }
}

/// Admissible oscillation at generation `n`: `N^{-n} W / N`
/// (for the line, `2^{-n} ln(a) / 2`).
pub fn budget(spec: &GeneratorSpec, n: usize, width: f64) -> f64 {
    let base = spec.base() as f64;
    base.powi(-(n as i32)) * width / base
}

/// Largest sibling increment over `a_val ∈ [1, a]`.
fn increment_ceiling(spec: &GeneratorSpec, n: usize, kernel: &KernelSpec) -> Result<f64> {
    Ok(sibling_increment(spec, 1.0, n, kernel)?.max(sibling_increment(spec, spec.a, n, kernel)?))
}

/// Coefficients `a_{n-1}` for every parent, from the profile of `K_{n-1}`.
///
/// Solves `Δ1(a_{n-1}) = Δ1_max - N^n (g_{n-1}(x̂) - c_{n-1})`, which keeps
/// `g_{n-1}(x̂) + w_n Δ1` equal across all parents. Fails when the
/// oscillation exceeds `N^{-n} W`.
pub fn choose_parameters(
    profile: &PotentialProfile,
    spec: &GeneratorSpec,
    kernel: &KernelSpec,
) -> Result<Vec<f64>> {
    let w = width(spec, kernel)?;
    solve_parameters(profile, spec, kernel, w, false, Execution::default())
}

pub(crate) fn solve_parameters(
    profile: &PotentialProfile,
    spec: &GeneratorSpec,
    kernel: &KernelSpec,
    width: f64,
    clamp: bool,
    exec: Execution,
) -> Result<Vec<f64>> {
    let parent_gen = profile.generation;
    let n = parent_gen + 1;
    let allowed = budget(spec, parent_gen, width);
    let slack = 2.0 * profile.max_error();
    if !clamp && profile.oscillation + slack > allowed * (1.0 + 1e-12) {
        return Err(Error::Infeasible {
            generation: parent_gen,
            oscillation: profile.oscillation,
            budget: allowed,
        });
    }
    let scale = (spec.base() as f64).powi(n as i32);
    let deviation = |g: f64| ((g - profile.c_n()) * scale).clamp(0.0, width);
    match (spec.alphabet, kernel) {
        (Alphabet::LineBinary, KernelSpec::Log) => Ok(profile
            .values
            .iter()
            .map(|&g| clamp_a(spec.a * (-deviation(g)).exp(), spec.a))
            .collect()),
        (Alphabet::RootsOfUnity(m), KernelSpec::Log) => {
            let k = (m - 1) as f64;
            Ok(profile
                .values
                .iter()
                .map(|&g| clamp_a(spec.a * (-deviation(g) / k).exp(), spec.a))
                .collect())
        }
        (Alphabet::RingAxis(_), KernelSpec::Ring(_)) => {
            let top = increment_ceiling(spec, n, kernel)?;
            let tol = 1e-3 * width / spec.base() as f64;
            par::try_map_slice(exec, &profile.values, |&g| {
                bisect_ring(spec, kernel, n, top - deviation(g), tol)
            })
        }
        _ => Err(Error::usage(format!(
            "kernel {} does not match alphabet {}",
            kernel.name(),
            spec.alphabet
        ))),
    }
}

fn clamp_a(v: f64, ceiling: f64) -> f64 {
    v.clamp(1.0, ceiling)
}

/// Solves `e(a_val r^{n-1}, 1) = target` for the decreasing ring increment.
fn bisect_ring(
    spec: &GeneratorSpec,
    kernel: &KernelSpec,
    n: usize,
    target: f64,
    tol: f64,
) -> Result<f64> {
    let f = |a: f64| sibling_increment(spec, a, n, kernel).map(|v| v - target);
    let (mut lo, mut hi) = (1.0, spec.a);
    if f(lo)? <= tol {
        return Ok(lo);
    }
    if f(hi)? >= -tol {
        return Ok(hi);
    }
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        let v = f(mid)?;
        if v.abs() <= tol {
            return Ok(mid);
        }
        if v > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::Numeric(format!(
        "ring bisection at generation {n} missed target {target} after {BISECTION_STEPS} steps"
    )))
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub method: SumMethod,
    /// Per-generation error budget for hierarchical summation; `None`
    /// uses a thousandth of the oscillation budget.
    pub err_budget: Option<f64>,
    /// Keep going (clamping coefficients) after a budget violation.
    pub force: bool,
    /// Self-similar control: every coefficient is 1.
    pub control: bool,
    /// Record `sup |Δ2| + |Δ3|` for generations up to this one.
    pub diagnostics_through: usize,
    pub memory_cap: usize,
    pub exec: Execution,
    pub ring_tol: f64,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            method: SumMethod::Naive,
            err_budget: None,
            force: false,
            control: false,
            diagnostics_through: 0,
            memory_cap: 1 << 24,
            exec: Execution::default(),
            ring_tol: DEFAULT_RING_TOL,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub n: usize,
    pub c_n: f64,
    pub osc: f64,
    pub osc_normalized: f64,
    /// Statistics of the coefficients `a_{n-1}` that built this generation.
    pub a_min: f64,
    pub a_max: f64,
    pub a_mean: f64,
    pub sup_delta23: Option<f64>,
    pub drift: f64,
    pub budget: f64,
    pub err_bound: f64,
    pub within_budget: bool,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CalibrationTrace {
    pub width: f64,
    pub control: bool,
    pub rows: Vec<TraceRow>,
}

impl CalibrationTrace {
    pub fn all_within_budget(&self) -> bool {
        self.rows.iter().all(|r| r.within_budget)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        self.write_csv_with(out, true)
    }

    /// Without timings the file depends only on the inputs, so reruns can
    /// be compared byte for byte.
    pub fn write_csv_with<W: Write>(&self, out: W, timing: bool) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec![
            "n",
            "c_n",
            "osc",
            "osc_normalized",
            "a_min",
            "a_max",
            "sup_delta23",
            "drift",
            "a_mean",
            "budget",
            "err_bound",
            "within_budget",
        ];
        if timing {
            header.push("wall_ms");
        }
        w.write_record(&header)?;
        for r in &self.rows {
            let mut row = vec![
                r.n.to_string(),
                r.c_n.to_string(),
                r.osc.to_string(),
                r.osc_normalized.to_string(),
                r.a_min.to_string(),
                r.a_max.to_string(),
                r.sup_delta23.map(|v| v.to_string()).unwrap_or_default(),
                r.drift.to_string(),
                r.a_mean.to_string(),
                r.budget.to_string(),
                r.err_bound.to_string(),
                r.within_budget.to_string(),
            ];
            if timing {
                row.push(format!("{:.3}", r.wall_ms));
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Construction {
    pub spec: GeneratorSpec,
    pub params: ParamTree,
    pub level: Level,
    pub profile: PotentialProfile,
    pub trace: CalibrationTrace,
}

pub fn run_construction(
    spec: &GeneratorSpec,
    n_max: usize,
    opts: &RunOptions,
) -> Result<Construction> {
    run_construction_with(spec, n_max, opts, |_| {})
}

/// Builds `K_1 .. K_{n_max}`, calling `progress` after each generation.
pub fn run_construction_with(
    spec: &GeneratorSpec,
    n_max: usize,
    opts: &RunOptions,
    mut progress: impl FnMut(&TraceRow),
) -> Result<Construction> {
    spec.validate()?;
    if n_max == 0 {
        return Err(Error::usage("run_construction needs n_max >= 1"));
    }
    if !spec.window_ok() && !opts.force {
        return Err(Error::InvalidSpec(format!(
            "(a, r) = ({}, {}) lies outside the admissible window a in [1,3], r in (0,1/16], 1 - ar/(1-r) >= 4/5",
            spec.a, spec.r
        )));
    }
    let points = spec.points_at(n_max).unwrap_or(usize::MAX);
    if points > opts.memory_cap {
        return Err(Error::MemoryGuard {
            generation: n_max,
            points,
            cap: opts.memory_cap,
        });
    }
    let kernel = KernelSpec::for_spec_with_tol(spec, opts.ring_tol)?;
    let w = width(spec, &kernel)?;
    let mut trace = CalibrationTrace {
        width: w,
        control: opts.control,
        rows: Vec::with_capacity(n_max),
    };
    let mut params = ParamTree::new(spec);
    let mut level = Level::root(spec).expand(&[1.0], spec)?;
    let mut coeffs = vec![1.0];
    let mut prev_c = 0.0;
    let mut prev_level: Option<Level> = None;
    loop {
        let n = level.generation();
        let start = Instant::now();
        let allowed = budget(spec, n, w);
        let profile = match opts.method {
            SumMethod::Naive => potential_profile_with(&level, &kernel, opts.exec)?,
            SumMethod::Hier => {
                let eb = opts.err_budget.unwrap_or(1e-3 * allowed);
                hier_potential_profile_with(&level, &kernel, eb, opts.exec)?
            }
        };
        let err = profile.max_error();
        let within = profile.oscillation + 2.0 * err <= allowed * (1.0 + 1e-12);
        let sup_delta23 = match &prev_level {
            Some(parent) if n <= opts.diagnostics_through => {
                let diags = all_delta_diagnostics(parent, &level, &kernel, opts.exec)?;
                Some(
                    diags
                        .iter()
                        .map(|d| d.delta2.abs() + d.delta3.abs())
                        .fold(0.0, f64::max),
                )
            }
            _ => None,
        };
        let row = TraceRow {
            n,
            c_n: profile.c_n(),
            osc: profile.oscillation,
            osc_normalized: profile.oscillation * (spec.base() as f64).powi(n as i32),
            a_min: coeffs.iter().copied().fold(f64::INFINITY, f64::min),
            a_max: coeffs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            a_mean: coeffs.iter().sum::<f64>() / coeffs.len() as f64,
            sup_delta23,
            drift: (profile.c_n() - prev_c).abs(),
            budget: allowed,
            err_bound: err,
            within_budget: within,
            wall_ms: 0.0,
        };
        prev_c = profile.c_n();
        if !within && !opts.control && !opts.force {
            return Err(Error::Infeasible {
                generation: n,
                oscillation: profile.oscillation,
                budget: allowed,
            });
        }
        if n == n_max {
            let mut row = row;
            row.wall_ms = start.elapsed().as_secs_f64() * 1e3;
            progress(&row);
            trace.rows.push(row);
            return Ok(Construction {
                spec: *spec,
                params,
                level,
                profile,
                trace,
            });
        }
        coeffs = if opts.control {
            vec![1.0; level.len()]
        } else {
            solve_parameters(&profile, spec, &kernel, w, opts.force, opts.exec)?
        };
        params.push(coeffs.clone())?;
        let next = level.expand(&coeffs, spec)?;
        let mut row = row;
        row.wall_ms = start.elapsed().as_secs_f64() * 1e3;
        progress(&row);
        trace.rows.push(row);
        prev_level = Some(std::mem::replace(&mut level, next));
    }
}

/// The three parts of `g_n(x) - g_{n-1}(x̂)` at one point, unweighted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaDiagnostics {
    pub generation: usize,
    pub index: usize,
    pub delta1: f64,
    pub delta2: f64,
    pub delta3: f64,
    /// `g_n(x) - g_{n-1}(x̂) - w_n (Δ1 + Δ2 + Δ3)` with both potentials
    /// summed directly.
    pub residual: f64,
    /// Contributions to `Δ2` and `Δ3` from parents first disagreeing with
    /// `x̂` at letter `ℓ` (entry `ℓ - 1`).
    pub delta2_by_annulus: Vec<f64>,
    pub delta3_by_annulus: Vec<f64>,
}

/// `Δ1 = Σ_siblings e(z - x)`, `Δ2 = N Σ_{y≠x̂} (e(y - x) - e(y - x̂))`,
/// `Δ3 = Σ_{y≠x̂} Σ_{z child of y} (e(z - x) - e(y - x))`.
pub fn delta_diagnostics(
    index: usize,
    parent: &Level,
    child: &Level,
    kernel: &KernelSpec,
) -> Result<DeltaDiagnostics> {
    check_levels(parent, child)?;
    diagnose(index, parent, child, kernel)
}

pub fn all_delta_diagnostics(
    parent: &Level,
    child: &Level,
    kernel: &KernelSpec,
    exec: Execution,
) -> Result<Vec<DeltaDiagnostics>> {
    check_levels(parent, child)?;
    par::try_map_indices(exec, child.len(), |i| diagnose(i, parent, child, kernel))
}

fn check_levels(parent: &Level, child: &Level) -> Result<()> {
    let base = parent.base();
    if child.generation() != parent.generation() + 1
        || child.len() != parent.len() * base
        || child.spec() != parent.spec()
    {
        return Err(Error::usage(
            "delta_diagnostics: levels are not consecutive generations of one construction",
        ));
    }
    // letters sum to zero, so each family's mean is its parent
    let spread = parent.spec().descendant_radius(parent.generation());
    for (j, p) in parent.points().iter().enumerate() {
        let mut sx = 0.0;
        let mut sy = 0.0;
        for c in &child.points()[j * base..(j + 1) * base] {
            let d = c.diff(*p);
            sx += d.x;
            sy += d.y;
        }
        if sx.hypot(sy) / base as f64 > 1e-9 * spread {
            return Err(Error::usage(format!(
                "delta_diagnostics: children of parent {j} are not centred on it"
            )));
        }
    }
    Ok(())
}

fn kernel_between(kernel: &KernelSpec, a: Point, b: Point) -> Result<f64> {
    kernel.pair(a.diff(b)).map(|(v, _)| v)
}

fn diagnose(
    index: usize,
    parent: &Level,
    child: &Level,
    kernel: &KernelSpec,
) -> Result<DeltaDiagnostics> {
    let base = parent.base();
    let n = child.generation();
    let x = child.point(index);
    let px = index / base;
    let xh = parent.point(px);
    let siblings: Vec<f64> = (px * base..(px + 1) * base)
        .filter(|&j| j != index)
        .map(|j| kernel_between(kernel, child.point(j), x))
        .collect::<Result<_>>()?;
    let delta1 = pairwise_sum(siblings.len(), &|j| siblings[j]);

    let others = parent.len();
    let mut d2_terms = vec![0.0; others];
    let mut d3_terms = vec![0.0; others];
    let mut annulus = vec![0usize; others];
    for (y, yp) in parent.points().iter().enumerate() {
        if y == px {
            continue;
        }
        let e_yx = kernel_between(kernel, *yp, x)?;
        d2_terms[y] = base as f64 * (e_yx - kernel_between(kernel, *yp, xh)?);
        let mut s = 0.0;
        for z in y * base..(y + 1) * base {
            s += kernel_between(kernel, child.point(z), x)? - e_yx;
        }
        d3_terms[y] = s;
        annulus[y] = first_disagreement_index(y, px, parent.generation(), base).unwrap_or(0);
    }
    let delta2 = pairwise_sum(others, &|y| d2_terms[y]);
    let delta3 = pairwise_sum(others, &|y| d3_terms[y]);
    let depth = parent.generation();
    let mut delta2_by_annulus = vec![0.0; depth];
    let mut delta3_by_annulus = vec![0.0; depth];
    for y in 0..others {
        if y != px {
            delta2_by_annulus[annulus[y] - 1] += d2_terms[y];
            delta3_by_annulus[annulus[y] - 1] += d3_terms[y];
        }
    }

    // both potentials summed directly
    let gn_terms: Vec<f64> = (0..child.len())
        .filter(|&j| j != index)
        .map(|j| kernel_between(kernel, child.point(j), x))
        .collect::<Result<_>>()?;
    let gn = child.weight() * pairwise_sum(gn_terms.len(), &|j| gn_terms[j]);
    let gp_terms: Vec<f64> = (0..others)
        .filter(|&y| y != px)
        .map(|y| kernel_between(kernel, parent.point(y), xh))
        .collect::<Result<_>>()?;
    let gp = if gp_terms.is_empty() {
        0.0
    } else {
        parent.weight() * pairwise_sum(gp_terms.len(), &|j| gp_terms[j])
    };
    let residual = gn - gp - child.weight() * (delta1 + delta2 + delta3);
    Ok(DeltaDiagnostics {
        generation: n,
        index,
        delta1,
        delta2,
        delta3,
        residual,
        delta2_by_annulus,
        delta3_by_annulus,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::potential_profile;

    #[test]
    fn budget_values() {
        let spec = GeneratorSpec::reference_line(12);
        let w = width(&spec, &KernelSpec::Log).unwrap();
        assert!((budget(&spec, 5, w) - 0.012_440).abs() < 5e-7);
        let flat = GeneratorSpec::new(Alphabet::LineBinary, 0.05, 1.0, 5).unwrap();
        for n in 0..6 {
            assert_eq!(
                budget(&flat, n, width(&flat, &KernelSpec::Log).unwrap()),
                0.0
            );
        }
    }

    #[test]
    fn first_generation_gets_the_ceiling() {
        let spec = GeneratorSpec::reference_line(12);
        let level = Level::root(&spec).expand(&[1.0], &spec).unwrap();
        let p = potential_profile(&level, &KernelSpec::Log).unwrap();
        assert_eq!(
            choose_parameters(&p, &spec, &KernelSpec::Log).unwrap(),
            vec![spec.a, spec.a]
        );
    }

    #[test]
    fn extreme_deviation_gets_unit_spacing() {
        let spec = GeneratorSpec::reference_line(12);
        let n = 4;
        let w = spec.a.ln();
        let c = -1.3;
        let top = c + 2f64.powi(-(n as i32 - 1)) * w / 2.0;
        let p = PotentialProfile::from_values(
            n - 1,
            vec![c, top],
            vec![0.0; 2],
            SumMethod::Naive,
            None,
        );
        let a = choose_parameters(&p, &spec, &KernelSpec::Log).unwrap();
        assert_eq!(a[0], spec.a);
        assert!((a[1] - 1.0).abs() < 1e-12);
        let over = PotentialProfile::from_values(
            n - 1,
            vec![c, top + 1e-6],
            vec![0.0; 2],
            SumMethod::Naive,
            None,
        );
        assert!(matches!(
            choose_parameters(&over, &spec, &KernelSpec::Log),
            Err(Error::Infeasible { generation: 3, .. })
        ));
    }

    #[test]
    fn compensation_is_exact() {
        let spec = GeneratorSpec::reference_line(6);
        let run = run_construction(&spec, 6, &RunOptions::default()).unwrap();
        for n in 2..6 {
            let level = run.params.level(&spec, n).unwrap();
            let prof = potential_profile(&level, &KernelSpec::Log).unwrap();
            let a = run.params.generation(n).unwrap();
            let vals: Vec<f64> = (0..level.len())
                .map(|j| {
                    prof.values[j]
                        + 2f64.powi(-(n as i32 + 1))
                            * sibling_increment(&spec, a[j], n + 1, &KernelSpec::Log).unwrap()
                })
                .collect();
            let (lo, hi) = vals
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| {
                    (l.min(v), h.max(v))
                });
            assert!(hi - lo < 1e-10, "n={n}: {}", hi - lo);
        }
    }

    #[test]
    fn third_generation_matches_root_find() {
        // re-solve each parent's coefficient by bisection on the directly
        // summed sibling distance
        let spec = GeneratorSpec::reference_line(3);
        let run = run_construction(&spec, 3, &RunOptions::default()).unwrap();
        let k2 = run.params.level(&spec, 2).unwrap();
        let prof = potential_profile(&k2, &KernelSpec::Log).unwrap();
        let chosen = run.params.generation(2).unwrap();
        let target = prof.c_n() + 0.125 * (spec.a * spec.r * spec.r).ln();
        for j in 0..4 {
            let g = |a: f64| {
                let mut trial = chosen.to_vec();
                trial[j] = a;
                let k3 = k2.expand(&trial, &spec).unwrap();
                let sib = k3.point(2 * j).distance(k3.point(2 * j + 1));
                prof.values[j] + 0.125 * sib.ln() - target
            };
            let (mut lo, mut hi) = (1.0, spec.a);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if g(mid) < 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            assert!(
                (chosen[j] - 0.5 * (lo + hi)).abs() < 1e-12,
                "{} vs {}",
                chosen[j],
                lo
            );
        }
    }

    #[test]
    fn decomposition_is_an_identity() {
        let spec = GeneratorSpec::reference_line(7);
        let run = run_construction(&spec, 7, &RunOptions::default()).unwrap();
        for n in 1..=7 {
            let parent = run.params.level(&spec, n - 1).unwrap();
            let child = run.params.level(&spec, n).unwrap();
            let diags =
                all_delta_diagnostics(&parent, &child, &KernelSpec::Log, Execution::default())
                    .unwrap();
            for d in &diags {
                assert!(d.residual.abs() < 1e-12, "n={n}: {}", d.residual);
                if n == 1 {
                    assert_eq!((d.delta2, d.delta3), (0.0, 0.0));
                }
                let s2: f64 = d.delta2_by_annulus.iter().sum();
                assert!((s2 - d.delta2).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn diagnostics_reject_unrelated_levels() {
        let spec = GeneratorSpec::reference_line(5);
        let a = ParamTree::constant(&spec, 3, 1.0).unwrap();
        let b = ParamTree::constant(&spec, 3, 2.0).unwrap();
        let parent = a.level(&spec, 2).unwrap();
        let child = b.level(&spec, 3).unwrap();
        assert!(delta_diagnostics(0, &parent, &child, &KernelSpec::Log).is_err());
        let far = a.level(&spec, 4).unwrap();
        assert!(delta_diagnostics(0, &parent, &far, &KernelSpec::Log).is_err());
    }

    #[test]
    fn control_run_keeps_unit_spacing() {
        let spec = GeneratorSpec::reference_line(6);
        let opts = RunOptions {
            control: true,
            ..RunOptions::default()
        };
        let run = run_construction(&spec, 6, &opts).unwrap();
        assert!(run.params.iter_all().all(|a| a == 1.0));
        assert!(run.trace.rows[5].osc_normalized > run.trace.rows[3].osc_normalized);
    }

    #[test]
    fn zero_width_is_infeasible() {
        let spec = GeneratorSpec::new(Alphabet::LineBinary, 0.05, 1.0, 5).unwrap();
        let err = run_construction(&spec, 5, &RunOptions::default()).unwrap_err();
        assert!(
            matches!(err, Error::Infeasible { generation: 2, .. }),
            "{err}"
        );
    }

    #[test]
    fn memory_guard() {
        let spec = GeneratorSpec::reference_line(30);
        let opts = RunOptions {
            memory_cap: 1 << 10,
            ..RunOptions::default()
        };
        assert!(matches!(
            run_construction(&spec, 11, &opts),
            Err(Error::MemoryGuard { .. })
        ));
    }
}
