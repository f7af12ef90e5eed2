//! Finite approximations `K_n`: one point per word of length `n`, each
//! carrying mass `|alphabet|^{-n}`.

use std::io::Write;

use crate::coord::{Point, Vec2};
use crate::error::{Error, Result};
use crate::params::{check_range, ParamTree};
use crate::spec::GeneratorSpec;
use crate::word::{first_disagreement, Word};

#[derive(Debug, Clone, PartialEq)]
pub struct Level {
    spec: GeneratorSpec,
    generation: usize,
    points: Vec<Point>,
}

impl Level {
    /// `K_0 = {0}`.
    pub fn root(spec: &GeneratorSpec) -> Self {
        Level {
            spec: *spec,
            generation: 0,
            points: vec![Point::ORIGIN],
        }
    }

    /// Builds `K_{n+1}` from `K_n`; `params[j]` is `a_n` for parent cell `j`.
    ///
    /// Each parent `x` spawns `x + (a_n / 2) r^n ζ` for every letter `ζ`.
    pub fn expand(&self, params: &[f64], spec: &GeneratorSpec) -> Result<Level> {
        if params.len() != self.points.len() {
            return Err(Error::usage(format!(
                "expand_level: {} parents but {} coefficients",
                self.points.len(),
                params.len()
            )));
        }
        check_range(params, self.generation, spec.a)?;
        let letters = spec.alphabet.letters();
        let step = spec.r.powi(self.generation as i32);
        let mut points = Vec::with_capacity(self.points.len() * letters.len());
        for (parent, &a) in self.points.iter().zip(params) {
            let half = 0.5 * a * step;
            points.extend(letters.iter().map(|&z| parent.offset(z * half)));
        }
        Ok(Level {
            spec: *spec,
            generation: self.generation + 1,
            points,
        })
    }

    /// Unchecked constructor for tests and derived geometry.
    #[cfg(test)]
    pub(crate) fn from_raw(spec: GeneratorSpec, generation: usize, points: Vec<Point>) -> Level {
        Level {
            spec,
            generation,
            points,
        }
    }

    /// Same level moved by `shift`; geometry-only, used to probe invariances.
    pub fn translated(&self, shift: Vec2) -> Level {
        Level {
            spec: self.spec,
            generation: self.generation,
            points: self.points.iter().map(|p| p.offset(shift)).collect(),
        }
    }

    pub fn spec(&self) -> &GeneratorSpec {
        &self.spec
    }

    pub fn generation(&self) -> usize {
        self.generation
    }

    pub fn base(&self) -> usize {
        self.spec.base()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn point(&self, index: usize) -> Point {
        self.points[index]
    }

    /// Uniform mass per point.
    pub fn weight(&self) -> f64 {
        (self.base() as f64).powi(-(self.generation as i32))
    }

    pub fn word(&self, index: usize) -> Word {
        Word::from_index(index, self.generation, self.base())
    }

    /// Index of the depth-`k` ancestor cell of point `index`.
    pub fn ancestor(&self, index: usize, k: usize) -> usize {
        index / self.base().pow((self.generation - k) as u32)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let planar = self.spec.alphabet.is_two_dimensional();
        if planar {
            w.write_record(["generation", "cell_index", "coord_x", "coord_y", "weight"])?;
        } else {
            w.write_record(["generation", "cell_index", "coord_x", "weight"])?;
        }
        let weight = self.weight().to_string();
        let generation = self.generation.to_string();
        for (i, p) in self.points.iter().enumerate() {
            let v = p.to_vec();
            if planar {
                w.write_record([
                    &generation,
                    &i.to_string(),
                    &v.x.to_string(),
                    &v.y.to_string(),
                    &weight,
                ])?;
            } else {
                w.write_record([&generation, &i.to_string(), &v.x.to_string(), &weight])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Evaluates `Σ_k (a_{k-1}/2) r^{k-1} ζ_k` directly, smallest term first.
pub fn point_of_word(word: &Word, params: &ParamTree, spec: &GeneratorSpec) -> Result<Point> {
    let n = word.generation();
    if n > params.depth() + 1 {
        return Err(Error::usage(format!(
            "word of generation {n} needs coefficients through generation {}, tree has {}",
            n - 1,
            params.depth()
        )));
    }
    let mut sum = Point::ORIGIN;
    for k in (1..=n).rev() {
        let a = params.coefficient(&word.prefix(k - 1))?;
        let letter = spec.alphabet.letter(word.letters()[k - 1] as usize);
        sum = sum.offset(letter * (0.5 * a * spec.r.powi(k as i32 - 1)));
    }
    Ok(sum)
}

/// Bi-Lipschitz brackets for the distance between the images of two distinct
/// words: `((1 - ar/(1-r)) r^{m-1}, a r^{m-1}/(1-r))` on binary alphabets.
///
/// For `N` roots of unity the sibling gap is `2 sin(π/N)` times the radius
/// rather than `2`, and the brackets scale accordingly
/// (see [`GeneratorSpec::bilipschitz_factors`]).
pub fn cell_separation_bounds(w1: &Word, w2: &Word, spec: &GeneratorSpec) -> Result<(f64, f64)> {
    if w1.generation() != w2.generation() {
        return Err(Error::usage(
            "cell_separation_bounds: words of different generations",
        ));
    }
    let m = first_disagreement(w1, w2)
        .ok_or_else(|| Error::usage("cell_separation_bounds: identical words"))?;
    let scale = spec.r.powi(m as i32 - 1);
    let (lower, upper) = spec.bilipschitz_factors();
    Ok((lower * scale, upper * scale))
}
