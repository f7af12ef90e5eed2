//! Treecode summation over the cell hierarchy.
//!
//! A far cell is replaced by its point count times the kernel at its
//! centroid. Because the centroid is the mean of the cell's points, the
//! first-order term cancels and the remainder is second order:
//!
//! * log kernel: `|Σ_y ln|x-y| - n ln|x-c|| ≤ n u²/(2(1-u))`, `u = ρ/|x-c|`
//!   (expand `Re ln(1 - δ/(x-c))` as a power series);
//! * ring kernel: `≤ ½ n ρ² d(d+2) e(D-ρ, 1)/(D-ρ)²` from the second
//!   derivative majorant, `D = |t_x - t_c|`.
//!
//! The per-point budget is split between cells in proportion to their
//! point counts, after reserving the floating-point rounding allowance.

use crate::coord::{Point, Vec2};
use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::level::Level;
use crate::par::{self, Execution};
use crate::potential::{potential_profile_with, PotentialProfile, SumMethod};
use crate::sum::{pairwise_sum_abs, rounding_bound};

/// Centroids and enclosing radii of every cell `(k, j)`, `k ≤ n`.
#[derive(Debug, Clone)]
pub struct CellTree {
    base: usize,
    centers: Vec<Vec<Point>>,
    radii: Vec<Vec<f64>>,
}

impl CellTree {
    pub fn from_level(level: &Level) -> Self {
        let n = level.generation();
        let base = level.base();
        let mut centers = vec![Vec::new(); n + 1];
        let mut radii = vec![Vec::new(); n + 1];
        centers[n] = level.points().to_vec();
        radii[n] = vec![0.0; level.len()];
        let inv = 1.0 / base as f64;
        for k in (0..n).rev() {
            let (child_c, child_r) = (&centers[k + 1], &radii[k + 1]);
            let count = child_c.len() / base;
            let mut cs = Vec::with_capacity(count);
            let mut rs = Vec::with_capacity(count);
            for j in 0..count {
                let kids = j * base..(j + 1) * base;
                let sum = kids.clone().fold(Point::ORIGIN, |acc, c| Point {
                    x: acc.x.add(child_c[c].x),
                    y: acc.y.add(child_c[c].y),
                });
                let c = Point {
                    x: sum.x.scale(inv),
                    y: sum.y.scale(inv),
                };
                let rho = kids
                    .map(|i| child_c[i].distance(c) + child_r[i])
                    .fold(0.0, f64::max);
                cs.push(c);
                rs.push(rho * (1.0 + 1e-12));
            }
            centers[k] = cs;
            radii[k] = rs;
        }
        CellTree {
            base,
            centers,
            radii,
        }
    }

    pub fn generation(&self) -> usize {
        self.centers.len() - 1
    }

    pub fn base(&self) -> usize {
        self.base
    }

    pub fn center(&self, k: usize, j: usize) -> Point {
        self.centers[k][j]
    }

    /// Every point of cell `(k, j)` lies within this distance of its centroid.
    pub fn radius(&self, k: usize, j: usize) -> f64 {
        self.radii[k][j]
    }

    /// Nearest leaf to `q` and its distance, by branch and bound.
    pub fn nearest(&self, q: Vec2) -> (usize, f64) {
        self.nearest_with(q, &mut NearestScratch::default())
    }

    /// [`CellTree::nearest`] reusing caller-owned buffers; hot loops should
    /// keep one scratch per thread.
    pub fn nearest_with(&self, q: Vec2, scratch: &mut NearestScratch) -> (usize, f64) {
        let n = self.generation();
        let qp = Point::from_vec(q);
        let mut best = (0usize, f64::INFINITY);
        let NearestScratch { stack, kids } = scratch;
        stack.clear();
        stack.push((0, 0, 0.0));
        while let Some((k, j, gap)) = stack.pop() {
            if gap >= best.1 {
                continue;
            }
            if k == n {
                let d = self.centers[k][j].diff(qp).norm();
                if d < best.1 {
                    best = (j, d);
                }
                continue;
            }
            kids.clear();
            kids.extend((j * self.base..(j + 1) * self.base).map(|c| {
                let d = self.centers[k + 1][c].diff(qp).norm() - self.radii[k + 1][c];
                (d, c)
            }));
            // farthest pushed first so the closest child is explored next
            kids.sort_unstable_by(|a, b| b.0.total_cmp(&a.0));
            stack.extend(kids.iter().map(|&(d, c)| (k + 1, c, d)));
        }
        best
    }
}

/// Reusable buffers for [`CellTree::nearest_with`].
#[derive(Debug, Default, Clone)]
pub struct NearestScratch {
    stack: Vec<(usize, usize, f64)>,
    kids: Vec<(f64, usize)>,
}

/// Profile with certified per-point error at most `err_budget`.
pub fn hier_potential_profile(
    level: &Level,
    kernel: &KernelSpec,
    err_budget: f64,
) -> Result<PotentialProfile> {
    hier_potential_profile_with(level, kernel, err_budget, Execution::default())
}

pub fn hier_potential_profile_with(
    level: &Level,
    kernel: &KernelSpec,
    err_budget: f64,
    exec: Execution,
) -> Result<PotentialProfile> {
    if !(err_budget > 0.0) {
        return Err(Error::usage(format!(
            "error budget must be positive, got {err_budget}"
        )));
    }
    if err_budget.is_infinite() {
        let mut p = potential_profile_with(level, kernel, exec)?;
        p.method = SumMethod::Hier;
        p.err_budget = Some(err_budget);
        return Ok(p);
    }
    let len = level.len();
    if len < 2 {
        return Err(Error::usage("potential_profile needs at least two points"));
    }
    let w = level.weight();
    let floor = rounding_floor(level, kernel)?;
    if err_budget <= 2.0 * floor {
        return Err(Error::Budget {
            requested: err_budget,
            attainable: 2.0 * floor,
        });
    }
    // unweighted allowance per source point
    let share = (err_budget - floor) / (w * (len - 1) as f64);
    let tree = CellTree::from_level(level);
    let rows = par::try_map_indices(exec, len, |i| target_sum(&tree, level, kernel, i, share))?;
    let mut values = Vec::with_capacity(len);
    let mut errs = Vec::with_capacity(len);
    for (s, e) in rows {
        values.push(w * s);
        errs.push(w * e + f64::EPSILON * (w * s).abs());
    }
    Ok(PotentialProfile::from_values(
        level.generation(),
        values,
        errs,
        SumMethod::Hier,
        Some(err_budget),
    ))
}

/// Weighted rounding allowance: pairwise-sum error for `len` terms of the
/// largest possible kernel magnitude.
fn rounding_floor(level: &Level, kernel: &KernelSpec) -> Result<f64> {
    let spec = level.spec();
    let n = level.generation();
    let (lower, upper) = spec.bilipschitz_factors();
    let closest = lower * spec.r.powi(n as i32 - 1);
    let magnitude = match kernel {
        KernelSpec::Log => closest.ln().abs().max(upper.ln().abs()),
        KernelSpec::Ring(k) => k.eval(closest, 1.0)?,
    };
    let len = level.len();
    Ok(level.weight()
        * 2.0
        * (rounding_bound(len, len as f64 * magnitude) + f64::EPSILON * len as f64 * magnitude))
}

/// Unweighted sum at target `i` and its error bound.
fn target_sum(
    tree: &CellTree,
    level: &Level,
    kernel: &KernelSpec,
    i: usize,
    share: f64,
) -> Result<(f64, f64)> {
    let n = tree.generation();
    let base = tree.base();
    let x = level.point(i);
    let mut terms: Vec<f64> = Vec::new();
    let mut approx_err = 0.0;
    let mut stack = vec![(0usize, 0usize)];
    while let Some((k, j)) = stack.pop() {
        if k == n {
            if j != i {
                let (v, e) =
                    kernel
                        .pair(tree.center(n, j).diff(x))
                        .map_err(|_| Error::Degenerate {
                            generation: n,
                            first: i.min(j),
                            second: i.max(j),
                        })?;
                terms.push(v);
                approx_err += e;
            }
            continue;
        }
        let count = base.pow((n - k) as u32) as f64;
        let is_ancestor = i / base.pow((n - k) as u32) == j;
        if !is_ancestor {
            if let Some((v, e)) = far_cell(tree, kernel, x, k, j, count, share)? {
                terms.push(v);
                approx_err += e;
                continue;
            }
        }
        stack.extend((j * base..(j + 1) * base).rev().map(|c| (k + 1, c)));
    }
    let (s, abs) = pairwise_sum_abs(terms.len(), &|t| terms[t]);
    Ok((
        s,
        approx_err + rounding_bound(terms.len(), abs) + f64::EPSILON * abs,
    ))
}

/// Centroid approximation of cell `(k, j)` seen from `x`, if it is far
/// enough and its remainder fits the cell's share of the budget.
fn far_cell(
    tree: &CellTree,
    kernel: &KernelSpec,
    x: Point,
    k: usize,
    j: usize,
    count: f64,
    share: f64,
) -> Result<Option<(f64, f64)>> {
    let rho = tree.radius(k, j);
    let diff = tree.center(k, j).diff(x);
    match kernel {
        KernelSpec::Log => {
            let d = diff.norm();
            if d < 8.0 * rho {
                return Ok(None);
            }
            let u = rho / d;
            let err = count * u * u / (2.0 * (1.0 - u));
            if err > share * count {
                return Ok(None);
            }
            Ok(Some((count * d.ln(), err)))
        }
        KernelSpec::Ring(ring) => {
            let d = diff.x.abs();
            if d < 8.0 * rho {
                return Ok(None);
            }
            let near = d - rho;
            let order = ring.order();
            let err = 0.5 * count * rho * rho * order * (order + 2.0) * ring.eval(near, 1.0)?
                / (near * near);
            if err > share * count {
                return Ok(None);
            }
            let (v, qe) = ring.eval_with_error(d, 1.0)?;
            Ok(Some((count * v, err + count * qe)))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::ParamTree;
    use crate::potential::potential_profile;
    use crate::spec::{Alphabet, GeneratorSpec};

    fn graded(spec: &GeneratorSpec, n: usize) -> Level {
        let mut tree = ParamTree::new(spec);
        for k in 1..n {
            let count = spec.base().pow(k as u32);
            let vals = (0..count)
                .map(|i| 1.0 + (spec.a - 1.0) * ((i * 7919) % count) as f64 / count as f64)
                .collect();
            tree.push(vals).unwrap();
        }
        tree.level(spec, n).unwrap()
    }

    #[test]
    fn cell_radii_enclose_points() {
        let spec = GeneratorSpec::reference_line(6);
        let level = graded(&spec, 6);
        let tree = CellTree::from_level(&level);
        for k in 0..=6 {
            for i in 0..level.len() {
                let j = level.ancestor(i, k);
                assert!(level.point(i).distance(tree.center(k, j)) <= tree.radius(k, j) + 1e-300);
            }
        }
        // descendants stay inside the analytic radius
        for k in 0..6 {
            for j in 0..1 << k {
                assert!(tree.radius(k, j) <= spec.descendant_radius(k));
            }
        }
    }

    #[test]
    fn nearest_matches_scan() {
        let spec = GeneratorSpec::new(Alphabet::RootsOfUnity(4), 0.033, 2.63, 5).unwrap();
        let level = graded(&spec, 5);
        let tree = CellTree::from_level(&level);
        for q in [
            Vec2::new(0.1, 0.2),
            Vec2::new(3.0, -1.0),
            Vec2::new(0.5, 0.0),
            Vec2::new(-0.49, 0.02),
        ] {
            let (i, d) = tree.nearest(q);
            let (bi, bd) = level
                .points()
                .iter()
                .enumerate()
                .map(|(j, p)| (j, p.diff_vec(q).norm()))
                .fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
            assert_eq!(i, bi);
            assert_eq!(d, bd);
        }
    }

    #[test]
    fn within_budget_of_naive() {
        let spec = GeneratorSpec::reference_line(10);
        for n in [4, 7, 10] {
            let level = graded(&spec, n);
            let naive = potential_profile(&level, &KernelSpec::Log).unwrap();
            for budget in [1e-6, 1e-9] {
                let hier = hier_potential_profile(&level, &KernelSpec::Log, budget).unwrap();
                for i in 0..level.len() {
                    let dev = (hier.values[i] - naive.values[i]).abs();
                    assert!(dev <= budget, "n={n} i={i}: {dev:e}");
                    assert!(hier.err_bounds[i] <= budget);
                }
            }
        }
    }

    #[test]
    fn roots_and_ring_within_budget() {
        let spec = GeneratorSpec::new(Alphabet::RootsOfUnity(4), 0.033, 2.63, 5).unwrap();
        let level = graded(&spec, 5);
        let naive = potential_profile(&level, &KernelSpec::Log).unwrap();
        let hier = hier_potential_profile(&level, &KernelSpec::Log, 1e-8).unwrap();
        assert!(naive
            .values
            .iter()
            .zip(&hier.values)
            .all(|(a, b)| (a - b).abs() <= 1e-8));

        let ring = GeneratorSpec::new(Alphabet::RingAxis(3), 0.05, 2.5, 7).unwrap();
        let kernel = KernelSpec::for_spec(&ring).unwrap();
        let level = graded(&ring, 7);
        let naive = potential_profile(&level, &kernel).unwrap();
        let hier = hier_potential_profile(&level, &kernel, 1e-7).unwrap();
        assert!(naive
            .values
            .iter()
            .zip(&hier.values)
            .all(|(a, b)| (a - b).abs() <= 1e-7));
    }

    #[test]
    fn infinite_budget_is_naive() {
        let spec = GeneratorSpec::reference_line(6);
        let level = graded(&spec, 6);
        let naive = potential_profile(&level, &KernelSpec::Log).unwrap();
        let hier = hier_potential_profile(&level, &KernelSpec::Log, f64::INFINITY).unwrap();
        assert_eq!(naive.values, hier.values);
        assert_eq!(hier.method, SumMethod::Hier);
    }

    #[test]
    fn unattainable_budget_is_reported() {
        let spec = GeneratorSpec::reference_line(8);
        let level = graded(&spec, 8);
        match hier_potential_profile(&level, &KernelSpec::Log, 1e-19) {
            Err(Error::Budget {
                requested,
                attainable,
            }) => {
                assert_eq!(requested, 1e-19);
                assert!(attainable > 1e-19);
            }
            other => panic!("{other:?}"),
        }
        assert!(hier_potential_profile(&level, &KernelSpec::Log, 0.0).is_err());
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let spec = GeneratorSpec::reference_line(9);
        let level = graded(&spec, 9);
        let a = hier_potential_profile_with(&level, &KernelSpec::Log, 1e-9, Execution::Sequential)
            .unwrap();
        let b = par::with_threads(5, || {
            hier_potential_profile(&level, &KernelSpec::Log, 1e-9).unwrap()
        });
        assert_eq!(a, b);
    }
}
