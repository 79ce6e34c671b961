//! The neighborhood embedding table and the learnable payload encoders that
//! map street-view features and POI tokens into the same d-dimensional
//! space.

use crate::error::{Error, Result};
use crate::seeding::RunRng;
use rand::{RngExt, SeedableRng};
use std::collections::BTreeMap;

fn check_dims(n: usize, d: usize, scale: f64) -> Result<()> {
    if n == 0 || d == 0 {
        return Err(Error::InvalidArgument(format!(
            "dimensions must be positive, got {n} x {d}"
        )));
    }
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "init scale must be a positive finite real, got {scale}"
        )));
    }
    Ok(())
}

fn random_row(d: usize, scale: f64, rng: &mut RunRng) -> Vec<f64> {
    (0..d).map(|_| rng.random_range(-scale..scale)).collect()
}

/// One trainable d-vector per neighborhood.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    d: usize,
    pub(crate) rows: Vec<Vec<f64>>,
}

impl EmbeddingTable {
    /// Entries i.i.d. uniform in `[-scale, scale)`, deterministic per seed.
    pub fn init(n: usize, d: usize, seed: u64, scale: f64) -> Result<Self> {
        check_dims(n, d, scale)?;
        let mut rng = RunRng::seed_from_u64(seed);
        let rows = (0..n).map(|_| random_row(d, scale, &mut rng)).collect();
        Ok(EmbeddingTable { d, rows })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let d = rows.first().map(|r| r.len()).unwrap_or(0);
        if rows.is_empty() || d == 0 {
            return Err(Error::EmptyInput("embedding rows".into()));
        }
        for row in &rows {
            if row.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: row.len(),
                });
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("embedding entry".into()));
            }
        }
        Ok(EmbeddingTable { d, rows })
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.rows[i]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn is_finite(&self) -> bool {
        self.rows
            .iter()
            .all(|r| r.iter().all(|v| v.is_finite()))
    }
}

/// Linear projection `W x + b` from precomputed image features into R^d.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureEncoder {
    /// d rows of length F.
    pub(crate) w: Vec<Vec<f64>>,
    pub(crate) b: Vec<f64>,
}

impl FeatureEncoder {
    pub fn init(d: usize, input_dim: usize, seed: u64, scale: f64) -> Result<Self> {
        check_dims(d, input_dim, scale)?;
        let mut rng = RunRng::seed_from_u64(seed);
        let w = (0..d)
            .map(|_| random_row(input_dim, scale, &mut rng))
            .collect();
        let b = random_row(d, scale, &mut rng);
        Ok(FeatureEncoder { w, b })
    }

    pub fn from_parts(w: Vec<Vec<f64>>, b: Vec<f64>) -> Result<Self> {
        if w.is_empty() || w[0].is_empty() {
            return Err(Error::EmptyInput("feature encoder weights".into()));
        }
        if w.len() != b.len() {
            return Err(Error::DimensionMismatch {
                expected: w.len(),
                got: b.len(),
            });
        }
        let f = w[0].len();
        if w.iter().any(|row| row.len() != f) {
            return Err(Error::InvalidArgument("ragged weight matrix".into()));
        }
        Ok(FeatureEncoder { w, b })
    }

    pub fn d(&self) -> usize {
        self.b.len()
    }

    pub fn input_dim(&self) -> usize {
        self.w[0].len()
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.w
    }

    pub fn bias(&self) -> &[f64] {
        &self.b
    }

    pub fn encode(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        Ok(self
            .w
            .iter()
            .zip(&self.b)
            .map(|(row, &bi)| row.iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>() + bi)
            .collect())
    }

    pub fn is_finite(&self) -> bool {
        self.b.iter().all(|v| v.is_finite())
            && self.w.iter().all(|r| r.iter().all(|v| v.is_finite()))
    }
}

/// Token look-up table over the corpus vocabulary; rows are trainable after
/// optional pretrained initialization.
#[derive(Debug, Clone, PartialEq)]
pub struct WordEncoder {
    vocab: BTreeMap<String, usize>,
    tokens: Vec<String>,
    pub(crate) rows: Vec<Vec<f64>>,
    /// Vocabulary rows taken verbatim from a pretrained file.
    pub pretrained_loaded: usize,
    /// Vocabulary rows randomly initialized.
    pub random_inited: usize,
}

impl WordEncoder {
    /// Build the vocabulary from the corpus (sorted for determinism) with
    /// all rows random-initialized.
    pub fn init<I, S>(corpus: I, d: usize, seed: u64, scale: f64) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self::with_pretrained(corpus, &[], d, seed, scale)
    }

    /// As [`WordEncoder::init`], but corpus tokens found in `pretrained`
    /// take the file vector verbatim (dimension must equal `d`); the rest
    /// are random-initialized. File tokens outside the corpus are ignored.
    pub fn with_pretrained<I, S>(
        corpus: I,
        pretrained: &[(String, Vec<f64>)],
        d: usize,
        seed: u64,
        scale: f64,
    ) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        if d == 0 {
            return Err(Error::InvalidArgument("word dimension must be positive".into()));
        }
        check_dims(1, d, scale)?;
        let mut file: BTreeMap<&str, &Vec<f64>> = BTreeMap::new();
        for (token, vec) in pretrained {
            if vec.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: vec.len(),
                });
            }
            if vec.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("pretrained vector for {token:?}")));
            }
            file.insert(token.as_str(), vec);
        }
        let tokens: Vec<String> = corpus
            .into_iter()
            .map(Into::into)
            .collect::<std::collections::BTreeSet<String>>()
            .into_iter()
            .collect();
        if tokens.is_empty() {
            return Err(Error::EmptyInput("token vocabulary".into()));
        }
        let mut rng = RunRng::seed_from_u64(seed);
        let mut rows = Vec::with_capacity(tokens.len());
        let mut pretrained_loaded = 0usize;
        let mut random_inited = 0usize;
        for token in &tokens {
            match file.get(token.as_str()) {
                Some(vec) => {
                    rows.push((*vec).clone());
                    pretrained_loaded += 1;
                }
                None => {
                    rows.push(random_row(d, scale, &mut rng));
                    random_inited += 1;
                }
            }
        }
        let vocab = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Ok(WordEncoder {
            vocab,
            tokens,
            rows,
            pretrained_loaded,
            random_inited,
        })
    }

    pub fn vocab_size(&self) -> usize {
        self.tokens.len()
    }

    pub fn d(&self) -> usize {
        self.rows.first().map(|r| r.len()).unwrap_or(0)
    }

    pub fn token_id(&self, token: &str) -> Result<usize> {
        self.vocab
            .get(token)
            .copied()
            .ok_or_else(|| Error::UnknownToken(token.to_string()))
    }

    pub fn token(&self, id: usize) -> &str {
        &self.tokens[id]
    }

    pub fn encode(&self, token: &str) -> Result<&[f64]> {
        Ok(&self.rows[self.token_id(token)?])
    }

    pub fn row(&self, id: usize) -> &[f64] {
        &self.rows[id]
    }

    pub fn row_mut(&mut self, id: usize) -> &mut [f64] {
        &mut self.rows[id]
    }

    pub fn is_finite(&self) -> bool {
        self.rows
            .iter()
            .all(|r| r.iter().all(|v| v.is_finite()))
    }
}
