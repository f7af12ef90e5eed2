//! Analytic majorants of `|Δ2|` and `|Δ3|` and the search for the largest
//! dimension they allow.
//!
//! All series are summed until the geometric tail majorant drops below
//! `1e-15`; the tail majorant is then added, so reported bounds are upper
//! bounds.

use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::{self, Execution};
use crate::spec::{dimension, separation_factor, window_ok, Alphabet};

const TAIL_TOL: f64 = 1e-15;
const MAX_TERMS: usize = 10_000;

/// Sums `term(ℓ)` for `ℓ = 1, 2, ...` given that consecutive terms shrink
/// by at least `ratio < 1`; returns the sum plus tail majorant and the
/// number of terms used.
fn geometric_series(ratio: f64, term: impl Fn(usize) -> f64) -> Result<(f64, usize)> {
    if !(ratio < 1.0) {
        return Err(Error::domain(format!(
            "series ratio {ratio} does not converge"
        )));
    }
    let mut sum = 0.0;
    for l in 1..=MAX_TERMS {
        let t = term(l);
        if !(t >= 0.0) || !t.is_finite() {
            return Err(Error::domain(format!(
                "term {l} of the bound is not a finite positive number"
            )));
        }
        sum += t;
        let tail = t * ratio / (1.0 - ratio);
        if tail < TAIL_TOL {
            return Ok((sum + tail, l));
        }
    }
    Err(Error::Numeric("bound series did not converge".into()))
}

fn check_denominator(a: f64, r: f64, s: f64) -> Result<()> {
    if !(s > 0.0) || 2.0 * s - a * r <= 0.0 {
        return Err(Error::domain(format!(
            "(a, r) = ({a}, {r}) outside the window: first denominator 2(1 - ar/(1-r)) - ar is not positive"
        )));
    }
    Ok(())
}

/// `2 Σ_ℓ 2^{ℓ-1} a r^ℓ / (2(1 - ar/(1-r)) - a r^ℓ)`.
pub fn bound_delta2(a: f64, r: f64) -> Result<f64> {
    let s = separation_factor(a, r);
    check_denominator(a, r, s)?;
    let (v, _) = geometric_series(2.0 * r, |l| delta2_term(a, r, s, l))?;
    Ok(v)
}

fn delta2_term(a: f64, r: f64, s: f64, l: usize) -> f64 {
    let rl = r.powi(l as i32);
    2.0 * 2f64.powi(l as i32 - 1) * a * rl / (2.0 * s - a * rl)
}

fn delta3_term(a: f64, r: f64, s: f64, l: usize) -> f64 {
    let rl = r.powi(2 * l as i32);
    2f64.powi(l as i32 - 1) * a * a * rl / (4.0 * s * s - a * a * rl)
}

/// `Σ_ℓ 2^{ℓ-1} a² r^{2ℓ} / (4(1 - ar/(1-r))² - a² r^{2ℓ})`.
pub fn bound_delta3(a: f64, r: f64) -> Result<f64> {
    let s = separation_factor(a, r);
    check_denominator(a, r, s)?;
    let (v, _) = geometric_series(2.0 * r * r, |l| delta3_term(a, r, s, l))?;
    Ok(v)
}

/// Majorants for `N` roots of unity. A parent `y` whose common ancestor
/// with `x̂` lies `ℓ` levels up is one of `(N-1) N^{ℓ-1}`, at distance at
/// least `s_N r^{n-ℓ-1}` with `s_N = sin(π/N) - ar/(1-r)`, while
/// `|x - x̂|` and every child offset are at most `(a/2) r^{n-1}`. With
/// `u_ℓ = a r^ℓ / (2 s_N)`:
///
/// * `|Δ2| ≤ N Σ_ℓ (N-1) N^{ℓ-1} u_ℓ/(1-u_ℓ)` (gradient majorant of `ln`);
/// * `|Δ3| ≤ Σ_ℓ (N-1) N^{ℓ-1} N u_ℓ²/(2(1-u_ℓ))` (second order; the
///   first-order terms cancel because `y` is the barycentre of its children).
pub fn roots_bounds(n: u32, a: f64, r: f64) -> Result<(f64, f64)> {
    let big_n = n as f64;
    let s = (PI / big_n).sin() - a * r / (1.0 - r);
    if !(s > 0.0) || a * r / (2.0 * s) >= 1.0 {
        return Err(Error::domain(format!(
            "(a, r) = ({a}, {r}): root-of-unity separation sin(pi/N) - ar/(1-r) is too small"
        )));
    }
    let u = |l: usize| a * r.powi(l as i32) / (2.0 * s);
    let count = |l: usize| (big_n - 1.0) * big_n.powi(l as i32 - 1);
    let (b2, _) = geometric_series(big_n * r, |l| big_n * count(l) * u(l) / (1.0 - u(l)))?;
    let (b3, _) = geometric_series(big_n * r * r, |l| {
        count(l) * big_n * u(l) * u(l) / (2.0 * (1.0 - u(l)))
    })?;
    Ok((b2, b3))
}

const ROOTS_MAJORANT_NOTE: &str = "roots of unity: |D2| <= N sum_l (N-1)N^(l-1) u_l/(1-u_l), \
|D3| <= sum_l (N-1)N^(l-1) N u_l^2/(2(1-u_l)), u_l = a r^l/(2 s_N), s_N = sin(pi/N) - ar/(1-r)";
const LINE_MAJORANT_NOTE: &str =
    "line: closed-form series for D2 and D3 with geometric tails added";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub a: f64,
    pub r: f64,
    pub alphabet: Alphabet,
    pub b2: f64,
    pub b3: f64,
    /// Per-step threshold on `|Δ2| + |Δ3|`: `W/(2N)`, i.e. `ln(a)/4` on the line.
    pub threshold: f64,
    pub margin: f64,
    /// `W/N`: the largest `|Δ2| + |Δ3|` keeping the oscillation within budget
    /// (`ln(a)/2` on the line).
    pub budget_level: f64,
    pub within_budget_level: bool,
    /// For `N = 4`: the literal `(3/32) ln a` stated for that variant,
    /// reported alongside the derived threshold.
    pub stated_threshold: Option<f64>,
    pub window_ok: bool,
    pub delta: f64,
    pub feasible: bool,
    pub majorant: String,
}

/// Evaluates the bounds at `(a, r)`. Points outside the region where the
/// series make sense come back with infinite bounds and `feasible = false`.
pub fn feasible(a: f64, r: f64, alphabet: Alphabet) -> Result<FeasibilityReport> {
    alphabet.validate()?;
    let (width, bounds, note) = match alphabet {
        Alphabet::LineBinary => {
            let b = bound_delta2(a, r).and_then(|b2| Ok((b2, bound_delta3(a, r)?)));
            (a.ln(), b, LINE_MAJORANT_NOTE)
        }
        Alphabet::RootsOfUnity(n) => ((n - 1) as f64 * a.ln(), roots_bounds(n, a, r), ROOTS_MAJORANT_NOTE),
        Alphabet::RingAxis(_) => {
            return Err(Error::usage(
                "analytic bounds are available for the planar alphabets only; ring constructions are checked by calibration",
            ))
        }
    };
    let (b2, b3) = bounds.unwrap_or((f64::INFINITY, f64::INFINITY));
    let base = alphabet.size() as f64;
    let threshold = width / (2.0 * base);
    let budget_level = width / base;
    let margin = threshold - (b2 + b3);
    let window = window_ok(a, r);
    Ok(FeasibilityReport {
        a,
        r,
        alphabet,
        b2,
        b3,
        threshold,
        margin,
        budget_level,
        within_budget_level: b2 + b3 <= budget_level,
        stated_threshold: (alphabet == Alphabet::RootsOfUnity(4)).then(|| 3.0 / 32.0 * a.ln()),
        window_ok: window,
        delta: dimension(alphabet.size(), r),
        feasible: window && width > 0.0 && margin >= 0.0,
        majorant: note.to_string(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchOptions {
    pub resolution: usize,
    pub rounds: usize,
    pub a_range: (f64, f64),
    pub r_range: (f64, f64),
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            resolution: 200,
            rounds: 3,
            a_range: (1.0, 3.0),
            r_range: (1e-3, 1.0 / 16.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RasterCell {
    pub a: f64,
    pub r: f64,
    pub b2: f64,
    pub b3: f64,
    pub margin: f64,
    pub delta: f64,
    pub feasible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub alphabet: Alphabet,
    /// `None` when no grid point is feasible.
    pub best: Option<FeasibilityReport>,
    pub evaluated: usize,
    /// The coarse grid, for plotting.
    pub raster: Vec<RasterCell>,
}

impl SearchResult {
    pub fn write_raster_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["a", "r", "b2", "b3", "margin", "delta", "feasible"])?;
        for c in &self.raster {
            w.write_record([
                c.a.to_string(),
                c.r.to_string(),
                c.b2.to_string(),
                c.b3.to_string(),
                c.margin.to_string(),
                c.delta.to_string(),
                c.feasible.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn log_grid(lo: f64, hi: f64, k: usize) -> Vec<f64> {
    if k <= 1 || lo == hi {
        return vec![lo];
    }
    let (l0, l1) = (lo.ln(), hi.ln());
    (0..k)
        .map(|i| (l0 + (l1 - l0) * i as f64 / (k - 1) as f64).exp())
        .collect()
}

fn evaluate_grid(
    alphabet: Alphabet,
    a_vals: &[f64],
    r_vals: &[f64],
    exec: Execution,
) -> Result<Vec<RasterCell>> {
    let cols = r_vals.len();
    par::try_map_indices(exec, a_vals.len() * cols, |idx| {
        let (a, r) = (a_vals[idx / cols], r_vals[idx % cols]);
        let rep = feasible(a, r, alphabet)?;
        Ok(RasterCell {
            a,
            r,
            b2: rep.b2,
            b3: rep.b3,
            margin: rep.margin,
            delta: rep.delta,
            feasible: rep.feasible,
        })
    })
}

/// Largest `δ` among feasible grid points; ties go to the smallest `a`,
/// then the smallest `r`.
fn best_cell(cells: &[RasterCell]) -> Option<&RasterCell> {
    cells
        .iter()
        .filter(|c| c.feasible)
        .fold(None, |best: Option<&RasterCell>, c| match best {
            None => Some(c),
            Some(b) => {
                let better = c.delta > b.delta
                    || (c.delta == b.delta && (c.a < b.a || (c.a == b.a && c.r < b.r)));
                Some(if better { c } else { b })
            }
        })
}

/// Log-spaced grid over the window followed by `rounds` zoomed grids around
/// the incumbent; deterministic for a given resolution.
pub fn search_max_delta(alphabet: Alphabet, opts: &SearchOptions) -> Result<SearchResult> {
    search_max_delta_with(alphabet, opts, Execution::default())
}

pub fn search_max_delta_with(
    alphabet: Alphabet,
    opts: &SearchOptions,
    exec: Execution,
) -> Result<SearchResult> {
    if let Alphabet::RingAxis(_) = alphabet {
        return Err(Error::usage(
            "dimension search is defined for the planar alphabets only",
        ));
    }
    if opts.resolution < 2 {
        return Err(Error::usage("search resolution must be at least 2"));
    }
    let (a_lo, a_hi) = opts.a_range;
    let (r_lo, r_hi) = opts.r_range;
    if !(1.0 <= a_lo && a_lo <= a_hi && 0.0 < r_lo && r_lo <= r_hi) {
        return Err(Error::usage(
            "search ranges need 1 <= a_lo <= a_hi and 0 < r_lo <= r_hi",
        ));
    }
    let mut a_vals = log_grid(a_lo, a_hi, opts.resolution);
    let mut r_vals = log_grid(r_lo, r_hi, opts.resolution);
    let raster = evaluate_grid(alphabet, &a_vals, &r_vals, exec)?;
    let mut evaluated = raster.len();
    let mut best = best_cell(&raster).cloned();
    for _ in 0..opts.rounds {
        let Some(b) = best.clone() else { break };
        let step = |vals: &[f64], v: f64| {
            let i = vals.iter().position(|&x| x == v).unwrap_or(0);
            (vals[i.saturating_sub(1)], vals[(i + 1).min(vals.len() - 1)])
        };
        let (alo, ahi) = step(&a_vals, b.a);
        let (rlo, rhi) = step(&r_vals, b.r);
        a_vals = log_grid(alo, ahi, opts.resolution);
        r_vals = log_grid(rlo, rhi, opts.resolution);
        let cells = evaluate_grid(alphabet, &a_vals, &r_vals, exec)?;
        evaluated += cells.len();
        if let Some(c) = best_cell(&cells) {
            if best_cell(&[b.clone(), c.clone()]) == Some(c) {
                best = Some(c.clone());
            }
        }
    }
    let best = best.map(|c| feasible(c.a, c.r, alphabet)).transpose()?;
    Ok(SearchResult {
        alphabet,
        best,
        evaluated,
        raster,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn headline_point() {
        let rep = feasible(2.217, 0.0623, Alphabet::LineBinary).unwrap();
        // 50-digit series evaluation
        assert!((rep.b2 - 0.199_410_40).abs() < 1e-7, "{}", rep.b2);
        assert!((rep.b3 - 0.006_653_82).abs() < 1e-7, "{}", rep.b3);
        assert!((rep.margin - (-0.007_025_48)).abs() < 1e-7);
        assert!(rep.delta > 0.2496 && rep.delta < 0.2498);
        assert!(rep.window_ok && rep.within_budget_level && !rep.feasible);
    }

    #[test]
    fn vanishing_ratio() {
        assert!(bound_delta2(2.0, 1e-12).unwrap() < 1e-11);
        assert!(bound_delta3(2.0, 1e-12).unwrap() < 1e-22);
    }

    #[test]
    fn window_corner_denominator() {
        let s = separation_factor(3.0, 1.0 / 16.0);
        assert!(2.0 * s - 3.0 / 16.0 > 1.0);
        let b = bound_delta2(3.0, 1.0 / 16.0).unwrap();
        assert!(b.is_finite() && b > 0.0);
        assert!(bound_delta2(3.0, 0.3).is_err());
    }

    #[test]
    fn small_a_order_of_magnitude() {
        let b3 = bound_delta3(1.0, 0.01).unwrap();
        let first = 1e-4 / (4.0 * (0.9899f64 / 0.99).powi(2) - 1e-4);
        assert!(b3 >= first && b3 < 1.03 * first, "{b3} vs {first}");
    }

    #[test]
    fn no_spacing_freedom() {
        let rep = feasible(1.0, 0.03, Alphabet::LineBinary).unwrap();
        assert!(rep.b2 + rep.b3 > 0.0);
        assert_eq!(rep.threshold, 0.0);
        assert!(!rep.feasible);
    }

    #[test]
    fn four_roots_point() {
        let rep = feasible(2.63, 0.033, Alphabet::RootsOfUnity(4)).unwrap();
        assert!(rep.delta > 0.406 && rep.delta < 0.407);
        assert!((rep.stated_threshold.unwrap() - 3.0 / 32.0 * 2.63f64.ln()).abs() < 1e-15);
        assert!(rep.majorant.contains("roots"));
    }

    #[test]
    fn doubling_the_truncation_changes_nothing() {
        for (a, r) in [
            (2.217, 0.0623),
            (1.5, 0.01),
            (3.0, 0.0625),
            (1.9179, 0.06005),
        ] {
            let s = separation_factor(a, r);
            for (ratio, term) in [
                (2.0 * r, delta2_term as fn(f64, f64, f64, usize) -> f64),
                (2.0 * r * r, delta3_term),
            ] {
                let (v, used) = geometric_series(ratio, |l| term(a, r, s, l)).unwrap();
                let long: f64 = (1..=2 * used).map(|l| term(a, r, s, l)).sum();
                assert!(long <= v, "{long} > {v}");
                assert!(v - long < 1e-12, "{a} {r}: {}", v - long);
            }
        }
    }

    #[test]
    fn roots_bounds_reduce_to_line_form_for_binary_letters() {
        // with N = 2 the gradient majorant is exactly the line Δ2 series
        let (b2, _) = roots_bounds(2, 2.217, 0.0623).unwrap();
        assert!((b2 - bound_delta2(2.217, 0.0623).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn monotone_in_r() {
        for a in [1.2, 2.0, 2.9] {
            let mut prev = (0.0, 0.0);
            for k in 1..=60 {
                let r = 0.001 * k as f64;
                let cur = (bound_delta2(a, r).unwrap(), bound_delta3(a, r).unwrap());
                assert!(cur.0 > prev.0 && cur.1 > prev.1);
                prev = cur;
            }
        }
    }

    #[test]
    fn ring_is_rejected() {
        assert!(feasible(2.5, 0.05, Alphabet::RingAxis(3)).is_err());
        assert!(search_max_delta(Alphabet::RingAxis(3), &SearchOptions::default()).is_err());
    }

    #[test]
    fn search_finds_feasible_best() {
        let opts = SearchOptions {
            resolution: 40,
            rounds: 2,
            ..SearchOptions::default()
        };
        let res = search_max_delta(Alphabet::LineBinary, &opts).unwrap();
        let best = res.best.unwrap();
        assert!(best.feasible && best.margin >= 0.0);
        assert!(best.delta >= 0.24);
        assert!(res
            .raster
            .iter()
            .filter(|c| c.feasible)
            .all(|c| c.delta <= best.delta));
        assert_eq!(res.raster.len(), 1600);

        let flat = SearchOptions {
            a_range: (1.0, 1.0),
            ..opts
        };
        assert!(search_max_delta(Alphabet::LineBinary, &flat)
            .unwrap()
            .best
            .is_none());
    }
}
