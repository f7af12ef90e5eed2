use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::level::Level;
use crate::spec::GeneratorSpec;
use crate::word::Word;

/// Spacing coefficients `a_k(ε)`, one per cell of generations `1..=depth`.
///
/// `a_0 = 1` is implicit. Values are keyed by the generation-`k` prefix of
/// a word, so a coefficient can never depend on later letters.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamTree {
    base: usize,
    ceiling: f64,
    generations: Vec<Vec<f64>>,
}

impl ParamTree {
    pub fn new(spec: &GeneratorSpec) -> Self {
        ParamTree {
            base: spec.base(),
            ceiling: spec.a,
            generations: Vec::new(),
        }
    }

    /// Every coefficient equal to `value` up to generation `depth`.
    pub fn constant(spec: &GeneratorSpec, depth: usize, value: f64) -> Result<Self> {
        let mut tree = ParamTree::new(spec);
        for k in 1..=depth {
            tree.push(vec![value; spec.base().pow(k as u32)])?;
        }
        Ok(tree)
    }

    /// Number of stored generations; levels up to `depth() + 1` can be built.
    pub fn depth(&self) -> usize {
        self.generations.len()
    }

    pub fn base(&self) -> usize {
        self.base
    }

    pub fn ceiling(&self) -> f64 {
        self.ceiling
    }

    /// Appends the coefficients for the next generation, in cell order.
    pub fn push(&mut self, values: Vec<f64>) -> Result<()> {
        let generation = self.generations.len() + 1;
        let expected = self.base.pow(generation as u32);
        if values.len() != expected {
            return Err(Error::usage(format!(
                "generation {generation} needs {expected} coefficients, got {}",
                values.len()
            )));
        }
        check_range(&values, generation, self.ceiling)?;
        self.generations.push(values);
        Ok(())
    }

    /// Coefficients `a_k` of generation `k` (`k = 0` gives the implicit root).
    pub fn generation(&self, k: usize) -> Option<&[f64]> {
        const ROOT: [f64; 1] = [1.0];
        match k {
            0 => Some(&ROOT),
            k => self.generations.get(k - 1).map(Vec::as_slice),
        }
    }

    pub fn coefficient(&self, word: &Word) -> Result<f64> {
        let k = word.generation();
        self.generation(k)
            .map(|g| g[word.index(self.base)])
            .ok_or_else(|| Error::usage(format!("no coefficient stored for generation {k}")))
    }

    pub fn iter_all(&self) -> impl Iterator<Item = f64> + '_ {
        self.generations.iter().flatten().copied()
    }

    /// Rebuilds `K_n` from scratch.
    pub fn level(&self, spec: &GeneratorSpec, n: usize) -> Result<Level> {
        if n > self.depth() + 1 {
            return Err(Error::usage(format!(
                "level {n} needs coefficients through generation {}, tree has {}",
                n - 1,
                self.depth()
            )));
        }
        let mut level = Level::root(spec);
        for k in 0..n {
            level = level.expand(self.generation(k).expect("checked depth"), spec)?;
        }
        Ok(level)
    }

    pub fn to_document(&self, spec: &GeneratorSpec) -> ParamDocument {
        let params = self
            .generations
            .iter()
            .enumerate()
            .map(|(k, values)| {
                (
                    (k + 1).to_string(),
                    values.iter().map(|v| v.to_string()).collect(),
                )
            })
            .collect();
        ParamDocument {
            spec: *spec,
            params,
        }
    }

    pub fn from_document(doc: &ParamDocument) -> Result<(GeneratorSpec, ParamTree)> {
        doc.spec.validate()?;
        let mut tree = ParamTree::new(&doc.spec);
        let mut keys: Vec<usize> = doc
            .params
            .keys()
            .map(|k| {
                k.parse()
                    .map_err(|_| Error::usage(format!("bad generation key {k:?}")))
            })
            .collect::<Result<_>>()?;
        keys.sort_unstable();
        for (expected, k) in (1..).zip(&keys) {
            if *k != expected {
                return Err(Error::usage(format!("params skip generation {expected}")));
            }
            let values = doc.params[&k.to_string()]
                .iter()
                .map(|s| {
                    s.parse::<f64>()
                        .map_err(|_| Error::usage(format!("bad coefficient {s:?}")))
                })
                .collect::<Result<Vec<_>>>()?;
            tree.push(values)?;
        }
        Ok((doc.spec, tree))
    }

    pub fn save(&self, spec: &GeneratorSpec, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(&self.to_document(spec))?;
        std::fs::write(path, json)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<(GeneratorSpec, ParamTree)> {
        let doc: ParamDocument = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        ParamTree::from_document(&doc)
    }
}

/// JSON form: coefficients as decimal strings, keyed by generation, listed
/// in lexicographic cell order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParamDocument {
    pub spec: GeneratorSpec,
    pub params: BTreeMap<String, Vec<String>>,
}

pub(crate) fn check_range(values: &[f64], generation: usize, ceiling: f64) -> Result<()> {
    match values.iter().position(|v| !(1.0..=ceiling).contains(v)) {
        None => Ok(()),
        Some(cell) => Err(Error::ParameterOutOfRange {
            generation,
            cell,
            value: values[cell],
            ceiling,
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spec::Alphabet;

    #[test]
    fn root_coefficient_is_one() {
        let spec = GeneratorSpec::reference_line(4);
        let tree = ParamTree::new(&spec);
        assert_eq!(tree.coefficient(&Word::root()).unwrap(), 1.0);
        assert!(tree.coefficient(&Word::from_signs(&[1])).is_err());
    }

    #[test]
    fn rejects_out_of_range_and_wrong_length() {
        let spec = GeneratorSpec::reference_line(4);
        let mut tree = ParamTree::new(&spec);
        assert!(matches!(tree.push(vec![1.0]), Err(Error::Usage(_))));
        assert!(matches!(
            tree.push(vec![1.0, 2.3]),
            Err(Error::ParameterOutOfRange { cell: 1, .. })
        ));
        tree.push(vec![1.0, 2.217]).unwrap();
        assert_eq!(tree.coefficient(&Word::from_signs(&[1])).unwrap(), 2.217);
    }

    #[test]
    fn document_round_trip_is_bit_exact() {
        let spec = GeneratorSpec::new(Alphabet::RootsOfUnity(3), 0.05, 2.5, 3).unwrap();
        let mut tree = ParamTree::new(&spec);
        tree.push(vec![1.0, 2.5, 1.0 + 1.0 / 3.0]).unwrap();
        tree.push((0..9).map(|i| 1.0 + (i as f64).sqrt() / 3.0).collect())
            .unwrap();
        let json = serde_json::to_string(&tree.to_document(&spec)).unwrap();
        let doc: ParamDocument = serde_json::from_str(&json).unwrap();
        let (spec2, tree2) = ParamTree::from_document(&doc).unwrap();
        assert_eq!(spec2, spec);
        assert_eq!(tree2, tree);
    }
}
