//! Construction recipes: the alphabet of offsets and the scalar parameters
//! `r` (contraction ratio) and `a` (spacing ceiling).

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::coord::Vec2;
use crate::error::{Error, Result};

/// The set of letters used at every generation.
///
/// Letters are ordered by index; lexicographic cell order follows from it.
/// `LineBinary` orders `-1` before `+1`. `RootsOfUnity(N)` uses
/// `exp(2πij/N)` for `j = 0..N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Alphabet {
    LineBinary,
    RootsOfUnity(u32),
    /// Binary letters on the axis of `R^n`; every point carries a unit
    /// `(n-2)`-sphere in the orthogonal hyperplane. The payload is `n`.
    RingAxis(u32),
}

impl Alphabet {
    pub fn size(&self) -> usize {
        match *self {
            Alphabet::LineBinary | Alphabet::RingAxis(_) => 2,
            Alphabet::RootsOfUnity(n) => n as usize,
        }
    }

    pub fn letter(&self, index: usize) -> Vec2 {
        match *self {
            Alphabet::LineBinary | Alphabet::RingAxis(_) => {
                Vec2::new(if index == 0 { -1.0 } else { 1.0 }, 0.0)
            }
            Alphabet::RootsOfUnity(n) => {
                let n = n as usize;
                // exact values on the axes keep symmetric sets symmetric
                if (4 * index) % n == 0 {
                    return match (4 * index / n) % 4 {
                        0 => Vec2::new(1.0, 0.0),
                        1 => Vec2::new(0.0, 1.0),
                        2 => Vec2::new(-1.0, 0.0),
                        _ => Vec2::new(0.0, -1.0),
                    };
                }
                let angle = 2.0 * PI * index as f64 / n as f64;
                Vec2::new(angle.cos(), angle.sin())
            }
        }
    }

    pub fn letters(&self) -> Vec<Vec2> {
        (0..self.size()).map(|j| self.letter(j)).collect()
    }

    /// True for the alphabets living in the plane (logarithmic kernel).
    pub fn is_planar(&self) -> bool {
        !matches!(self, Alphabet::RingAxis(_))
    }

    /// Whether points carry a second coordinate in serialized output.
    pub fn is_two_dimensional(&self) -> bool {
        matches!(self, Alphabet::RootsOfUnity(_))
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Alphabet::RootsOfUnity(n) if n < 3 => Err(Error::InvalidSpec(format!(
                "roots of unity need N >= 3, got {n}"
            ))),
            Alphabet::RootsOfUnity(n) if n > 64 => Err(Error::InvalidSpec(format!(
                "roots of unity limited to N <= 64, got {n}"
            ))),
            Alphabet::RingAxis(n) if n < 3 => Err(Error::InvalidSpec(format!(
                "ring construction needs ambient dimension >= 3, got {n}"
            ))),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for Alphabet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Alphabet::LineBinary => write!(f, "line"),
            Alphabet::RootsOfUnity(n) => write!(f, "roots:{n}"),
            Alphabet::RingAxis(n) => write!(f, "ring:{n}"),
        }
    }
}

impl FromStr for Alphabet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || {
            Error::InvalidSpec(format!(
                "unknown alphabet {s:?}; expected line, roots:N or ring:n"
            ))
        };
        let alphabet = match s.split_once(':') {
            None if s == "line" => Alphabet::LineBinary,
            Some(("roots", n)) => Alphabet::RootsOfUnity(n.parse().map_err(|_| bad())?),
            Some(("ring", n)) => Alphabet::RingAxis(n.parse().map_err(|_| bad())?),
            _ => return Err(bad()),
        };
        alphabet.validate()?;
        Ok(alphabet)
    }
}

impl TryFrom<String> for Alphabet {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Alphabet> for String {
    fn from(a: Alphabet) -> String {
        a.to_string()
    }
}

/// The construction recipe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub alphabet: Alphabet,
    pub r: f64,
    pub a: f64,
    pub max_generation: usize,
}

impl GeneratorSpec {
    pub fn new(alphabet: Alphabet, r: f64, a: f64, max_generation: usize) -> Result<Self> {
        let spec = GeneratorSpec {
            alphabet,
            r,
            a,
            max_generation,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// The headline line construction: `a = 2.217`, `r = 0.0623`.
    pub fn reference_line(max_generation: usize) -> Self {
        GeneratorSpec {
            alphabet: Alphabet::LineBinary,
            r: 0.0623,
            a: 2.217,
            max_generation,
        }
    }

    /// Hard requirements; the parameter window is checked separately by
    /// [`GeneratorSpec::window_ok`].
    pub fn validate(&self) -> Result<()> {
        self.alphabet.validate()?;
        if !(self.r > 0.0 && self.r < 0.5) {
            return Err(Error::InvalidSpec(format!(
                "ratio r = {} must lie in (0, 1/2)",
                self.r
            )));
        }
        if !(self.a >= 1.0) || !self.a.is_finite() {
            return Err(Error::InvalidSpec(format!(
                "spacing ceiling a = {} must be >= 1",
                self.a
            )));
        }
        if self.max_generation == 0 {
            return Err(Error::InvalidSpec("max_generation must be positive".into()));
        }
        let (lower, _) = self.bilipschitz_factors();
        if lower <= 0.0 {
            return Err(Error::InvalidSpec(format!(
                "lower bi-Lipschitz constant {lower} must be positive; children of distinct cells could collide"
            )));
        }
        if let Alphabet::RingAxis(_) = self.alphabet {
            if self.a < 2.0 {
                return Err(Error::InvalidSpec(format!(
                    "ring construction needs a >= 2, got {}",
                    self.a
                )));
            }
        }
        Ok(())
    }

    /// `a ∈ [1,3]`, `r ∈ (0, 1/16]` and `1 - ar/(1-r) >= 4/5`.
    pub fn window_ok(&self) -> bool {
        window_ok(self.a, self.r)
    }

    pub fn base(&self) -> usize {
        self.alphabet.size()
    }

    /// `1 - ar/(1-r)`, the lower bi-Lipschitz constant.
    pub fn separation_factor(&self) -> f64 {
        separation_factor(self.a, self.r)
    }

    /// Smallest and largest distance between two distinct letters.
    pub fn letter_gaps(&self) -> (f64, f64) {
        match self.alphabet {
            Alphabet::LineBinary | Alphabet::RingAxis(_) => (2.0, 2.0),
            Alphabet::RootsOfUnity(n) => {
                let n = n as f64;
                let widest = if n as u32 % 2 == 0 {
                    2.0
                } else {
                    2.0 * (PI / (2.0 * n)).cos()
                };
                (2.0 * (PI / n).sin(), widest)
            }
        }
    }

    /// Lower and upper bi-Lipschitz constants: two words first disagreeing at
    /// letter `m` map to points whose distance lies in `[lower, upper] r^{m-1}`.
    /// For binary alphabets these are `1 - ar/(1-r)` and `a/(1-r)`.
    pub fn bilipschitz_factors(&self) -> (f64, f64) {
        let (narrow, wide) = self.letter_gaps();
        let tail = self.a * self.r / (1.0 - self.r);
        (0.5 * narrow - tail, self.a * (0.5 * wide) + tail)
    }

    /// Implied dimension `ln|alphabet| / (-ln r)`.
    pub fn delta(&self) -> f64 {
        dimension(self.base(), self.r)
    }

    /// Upper bound on the distance between a level-`n` point and any of
    /// its descendants: `(a/2) r^n / (1-r)`.
    pub fn descendant_radius(&self, generation: usize) -> f64 {
        0.5 * self.a * self.r.powi(generation as i32) / (1.0 - self.r)
    }

    pub fn points_at(&self, generation: usize) -> Option<usize> {
        self.base().checked_pow(generation as u32)
    }
}

pub fn separation_factor(a: f64, r: f64) -> f64 {
    1.0 - a * r / (1.0 - r)
}

pub fn window_ok(a: f64, r: f64) -> bool {
    (1.0..=3.0).contains(&a) && r > 0.0 && r <= 1.0 / 16.0 && separation_factor(a, r) >= 0.8 - 1e-15
}

pub fn dimension(base: usize, r: f64) -> f64 {
    (base as f64).ln() / -r.ln()
}
