//! Discrete potentials of a level:
//! `g_n(x) = w_n Σ_{y≠x} e(y - x)` on the set and `w_n Σ_x e(y - x)` off it.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::coord::{Point, Vec2};
use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::level::Level;
use crate::par::{self, Execution};
use crate::spec::{Alphabet, GeneratorSpec};
use crate::sum::{pairwise_sum_abs, rounding_bound};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SumMethod {
    Naive,
    Hier,
}

impl std::fmt::Display for SumMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SumMethod::Naive => "naive",
            SumMethod::Hier => "hier",
        })
    }
}

impl std::str::FromStr for SumMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "naive" => Ok(SumMethod::Naive),
            "hier" => Ok(SumMethod::Hier),
            _ => Err(Error::usage(format!(
                "unknown summation method {s:?}; expected naive or hier"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PotentialProfile {
    pub generation: usize,
    pub values: Vec<f64>,
    /// Certified bound on `|computed - exact|` per point.
    pub err_bounds: Vec<f64>,
    pub min: f64,
    pub max: f64,
    pub oscillation: f64,
    pub method: SumMethod,
    pub err_budget: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProfileSummary {
    pub n: usize,
    pub c_n: f64,
    pub oscillation: f64,
    pub method: SumMethod,
    pub err_budget: Option<f64>,
}

impl PotentialProfile {
    pub(crate) fn from_values(
        generation: usize,
        values: Vec<f64>,
        err_bounds: Vec<f64>,
        method: SumMethod,
        err_budget: Option<f64>,
    ) -> Self {
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        PotentialProfile {
            generation,
            values,
            err_bounds,
            min,
            max,
            oscillation: max - min,
            method,
            err_budget,
        }
    }

    /// `c_n`, the profile minimum.
    pub fn c_n(&self) -> f64 {
        self.min
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max_error(&self) -> f64 {
        self.err_bounds.iter().copied().fold(0.0, f64::max)
    }

    pub fn summary(&self) -> ProfileSummary {
        ProfileSummary {
            n: self.generation,
            c_n: self.min,
            oscillation: self.oscillation,
            method: self.method,
            err_budget: self.err_budget,
        }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["generation", "cell_index", "g_value", "err_bound"])?;
        let generation = self.generation.to_string();
        for (i, (v, e)) in self.values.iter().zip(&self.err_bounds).enumerate() {
            w.write_record([
                generation.as_str(),
                &i.to_string(),
                &v.to_string(),
                &e.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Exact profile with the default execution mode.
pub fn potential_profile(level: &Level, kernel: &KernelSpec) -> Result<PotentialProfile> {
    potential_profile_with(level, kernel, Execution::default())
}

pub fn potential_profile_with(
    level: &Level,
    kernel: &KernelSpec,
    exec: Execution,
) -> Result<PotentialProfile> {
    let len = level.len();
    if len < 2 {
        return Err(Error::usage("potential_profile needs at least two points"));
    }
    let w = level.weight();
    let pts = level.points();
    let rows = match kernel {
        KernelSpec::Log => par::map_indices(exec, len, |i| log_row(pts, i)),
        KernelSpec::Ring(_) => par::try_map_indices(exec, len, |i| {
            let mut terms = Vec::with_capacity(len);
            let mut quad_err = 0.0;
            for (j, p) in pts.iter().enumerate() {
                if j == i {
                    terms.push(0.0);
                    continue;
                }
                let (v, e) = kernel.pair(p.diff(pts[i])).map_err(|err| match err {
                    Error::Singularity { .. } => Error::Degenerate {
                        generation: level.generation(),
                        first: i.min(j),
                        second: i.max(j),
                    },
                    other => other,
                })?;
                terms.push(v);
                quad_err += e;
            }
            let (s, abs) = pairwise_sum_abs(len, &|j| terms[j]);
            Ok((s, rounding_bound(len, abs) + quad_err))
        })?,
    };
    let mut values = Vec::with_capacity(len);
    let mut errs = Vec::with_capacity(len);
    for (i, (s, e)) in rows.into_iter().enumerate() {
        if !s.is_finite() {
            let j = coincident_partner(pts, i).unwrap_or(i);
            return Err(Error::Degenerate {
                generation: level.generation(),
                first: i.min(j),
                second: i.max(j),
            });
        }
        values.push(w * s);
        errs.push(w * e + f64::EPSILON * (w * s).abs());
    }
    Ok(PotentialProfile::from_values(
        level.generation(),
        values,
        errs,
        SumMethod::Naive,
        None,
    ))
}

/// Unweighted `Σ_{j≠i} ln|p_j - p_i|` and its rounding bound.
fn log_row(pts: &[Point], i: usize) -> (f64, f64) {
    let x = pts[i];
    let (s, abs) = pairwise_sum_abs(pts.len(), &|j| {
        if j == i {
            0.0
        } else {
            0.5 * pts[j].diff(x).norm_sq().ln()
        }
    });
    // one extra ulp per term for the logarithm itself
    (s, rounding_bound(pts.len(), abs) + f64::EPSILON * abs)
}

fn coincident_partner(pts: &[Point], i: usize) -> Option<usize> {
    (0..pts.len()).find(|&j| j != i && pts[j].diff(pts[i]).norm_sq() == 0.0)
}

/// `g̃_n(y) = w_n Σ_x e(y - x)`. For the ring kernel `y = (t, R)`.
pub fn potential_at(y: Vec2, level: &Level, kernel: &KernelSpec) -> Result<f64> {
    let pts = level.points();
    let terms = pts
        .iter()
        .map(|p| {
            kernel
                .query(p.diff_vec(y) * -1.0)
                .map(|(v, _)| v)
                .map_err(|_| {
                    Error::domain(format!(
                        "evaluation point ({}, {}) coincides with a point of the level",
                        y.x, y.y
                    ))
                })
        })
        .collect::<Result<Vec<f64>>>()?;
    let (s, _) = pairwise_sum_abs(terms.len(), &|j| terms[j]);
    Ok(level.weight() * s)
}

/// `Δ1` at generation `n` as a function of the sibling spacing `a_val`:
/// the unweighted potential at a point due to its siblings.
///
/// Siblings sit at `x̂ + (a_val/2) r^{n-1} ζ`, so on the line they are
/// `a_val r^{n-1}` apart; `N` roots of unity give
/// `Σ_{ζ≠1} ln(ρ|1-ζ|) = (N-1) ln ρ + ln N` with `ρ = a_val r^{n-1}/2`.
pub fn sibling_increment(
    spec: &GeneratorSpec,
    a_val: f64,
    generation: usize,
    kernel: &KernelSpec,
) -> Result<f64> {
    if !(a_val >= 1.0 && a_val <= spec.a) {
        return Err(Error::domain(format!(
            "spacing {a_val} outside [1, {}]",
            spec.a
        )));
    }
    if generation == 0 {
        return Err(Error::usage("sibling increment starts at generation 1"));
    }
    let gap = a_val * spec.r.powi(generation as i32 - 1);
    match (spec.alphabet, kernel) {
        (Alphabet::LineBinary, KernelSpec::Log) => Ok(gap.ln()),
        (Alphabet::RootsOfUnity(n), KernelSpec::Log) => {
            let n = n as f64;
            Ok((n - 1.0) * (0.5 * gap).ln() + n.ln())
        }
        (Alphabet::RingAxis(_), KernelSpec::Ring(k)) => k.eval(gap, 1.0),
        _ => Err(Error::usage(format!(
            "kernel {} does not match alphabet {}",
            kernel.name(),
            spec.alphabet
        ))),
    }
}
