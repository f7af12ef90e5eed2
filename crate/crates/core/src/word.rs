//! Finite words over the alphabet and the cell addressing built on them.
//!
//! A word `ε_1 … ε_k` is stored as letter indices. Its cell index is the
//! base-`N` number `ε_1 ε_2 … ε_k`, so the children of cell `j` are
//! `N j .. N j + N` and the parent of `j` is `j / N`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Word {
    letters: Vec<u8>,
}

impl Word {
    pub fn root() -> Self {
        Word {
            letters: Vec::new(),
        }
    }

    pub fn new(letters: Vec<u8>) -> Self {
        Word { letters }
    }

    /// Word for `±1` letters, `-1 ↦ 0`, `+1 ↦ 1`.
    pub fn from_signs(signs: &[i8]) -> Self {
        Word {
            letters: signs.iter().map(|&s| u8::from(s > 0)).collect(),
        }
    }

    pub fn from_index(index: usize, generation: usize, base: usize) -> Self {
        let mut letters = vec![0u8; generation];
        let mut rest = index;
        for slot in letters.iter_mut().rev() {
            *slot = (rest % base) as u8;
            rest /= base;
        }
        debug_assert_eq!(
            rest, 0,
            "index {index} too large for generation {generation}"
        );
        Word { letters }
    }

    pub fn generation(&self) -> usize {
        self.letters.len()
    }

    pub fn letters(&self) -> &[u8] {
        &self.letters
    }

    pub fn index(&self, base: usize) -> usize {
        self.letters
            .iter()
            .fold(0usize, |acc, &l| acc * base + l as usize)
    }

    pub fn parent(&self) -> Option<Word> {
        if self.letters.is_empty() {
            None
        } else {
            Some(Word {
                letters: self.letters[..self.letters.len() - 1].to_vec(),
            })
        }
    }

    pub fn child(&self, letter: u8) -> Word {
        let mut letters = self.letters.clone();
        letters.push(letter);
        Word { letters }
    }

    pub fn prefix(&self, k: usize) -> Word {
        Word {
            letters: self.letters[..k].to_vec(),
        }
    }
}

/// 1-based index of the first disagreement, `None` for equal words.
pub fn first_disagreement(w1: &Word, w2: &Word) -> Option<usize> {
    w1.letters
        .iter()
        .zip(&w2.letters)
        .position(|(a, b)| a != b)
        .map(|p| p + 1)
}

/// Same as [`first_disagreement`] for cell indices of one generation.
pub fn first_disagreement_index(
    i: usize,
    j: usize,
    generation: usize,
    base: usize,
) -> Option<usize> {
    if i == j {
        return None;
    }
    let (mut i, mut j) = (i, j);
    let mut depth_from_bottom = 0;
    while i != j {
        i /= base;
        j /= base;
        depth_from_bottom += 1;
    }
    Some(generation - depth_from_bottom + 1)
}

/// Ultrametric `r^{m-1}`, where `m` is the first disagreement; `0` for equal words.
pub fn word_distance(w1: &Word, w2: &Word, r: f64) -> Result<f64> {
    if w1.generation() != w2.generation() {
        return Err(Error::usage(format!(
            "word_distance between generations {} and {}",
            w1.generation(),
            w2.generation()
        )));
    }
    Ok(match first_disagreement(w1, w2) {
        None => 0.0,
        Some(m) => r.powi(m as i32 - 1),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn distance_examples() {
        let plus = Word::from_signs(&[1]);
        let minus = Word::from_signs(&[-1]);
        assert_eq!(word_distance(&plus, &minus, 0.3).unwrap(), 1.0);
        let w = Word::from_signs(&[-1, 1]);
        assert_eq!(word_distance(&w, &w, 0.0623).unwrap(), 0.0);
        let w2 = Word::from_signs(&[-1, -1]);
        assert_eq!(word_distance(&w, &w2, 0.0623).unwrap(), 0.0623);
        assert!(matches!(
            word_distance(&w, &plus, 0.1),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn index_encoding_is_lexicographic() {
        let words: Vec<Word> = (0..27).map(|i| Word::from_index(i, 3, 3)).collect();
        for pair in words.windows(2) {
            assert!(pair[0] < pair[1]);
        }
        for (i, w) in words.iter().enumerate() {
            assert_eq!(w.index(3), i);
            assert_eq!(w.parent().unwrap().index(3), i / 3);
        }
    }

    #[test]
    fn ultrametric_inequality_exhaustive() {
        let r = 0.0623;
        for generation in 1..=6 {
            let words: Vec<Word> = (0..1 << generation)
                .map(|i| Word::from_index(i, generation, 2))
                .collect();
            for x in &words {
                for y in &words {
                    let dxy = word_distance(x, y, r).unwrap();
                    for z in &words {
                        let dxz = word_distance(x, z, r).unwrap();
                        let dyz = word_distance(y, z, r).unwrap();
                        assert!(dxz <= dxy.max(dyz));
                    }
                }
            }
        }
    }

    proptest! {
        #[test]
        fn index_and_word_disagreement_agree(base in 2usize..6, generation in 1usize..7, seed in any::<u64>()) {
            let count = base.pow(generation as u32);
            let i = (seed % count as u64) as usize;
            let j = ((seed / 7919) % count as u64) as usize;
            let wi = Word::from_index(i, generation, base);
            let wj = Word::from_index(j, generation, base);
            prop_assert_eq!(first_disagreement(&wi, &wj), first_disagreement_index(i, j, generation, base));
        }
    }
}
