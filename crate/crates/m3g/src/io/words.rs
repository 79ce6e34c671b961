//! Pretrained word vectors: whitespace-separated text, one token per line —
//! `token v_0 v_1 ... v_{d-1}`.

use crate::error::{Error, Result};
use std::collections::BTreeSet;
use std::path::Path;

pub fn parse_word_vectors(text: &str) -> Result<Vec<(String, Vec<f64>)>> {
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split_whitespace();
        let token = fields.next().expect("non-empty line").to_string();
        let values = fields
            .map(|v| {
                let parsed = v.parse::<f64>().map_err(|_| Error::Parse {
                    context: format!("word vectors line {}", lineno + 1),
                    reason: format!("not a number: {v:?}"),
                })?;
                if !parsed.is_finite() {
                    return Err(Error::Parse {
                        context: format!("word vectors line {}", lineno + 1),
                        reason: format!("vector entries must be finite, got {v:?}"),
                    });
                }
                Ok(parsed)
            })
            .collect::<Result<Vec<f64>>>()?;
        if values.is_empty() {
            return Err(Error::Parse {
                context: format!("word vectors line {}", lineno + 1),
                reason: format!("token {token:?} has no vector values"),
            });
        }
        if !seen.insert(token.clone()) {
            return Err(Error::DuplicateId(token));
        }
        out.push((token, values));
    }
    Ok(out)
}

pub fn write_word_vectors(path: &Path, entries: &[(String, Vec<f64>)]) -> Result<()> {
    let mut out = String::new();
    for (token, values) in entries {
        out.push_str(token);
        for v in values {
            out.push(' ');
            out.push_str(&format!("{v}"));
        }
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    #[test]
    fn round_trips_and_skips_blank_lines() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("words.txt");
        let entries = vec![
            ("cafe".to_string(), vec![0.5, -1.25]),
            ("bar".to_string(), vec![2.0, 1e-8]),
        ];
        write_word_vectors(&path, &entries).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let parsed = parse_word_vectors(&format!("\n{text}\n")).unwrap();
        assert_eq!(parsed, entries);
    }

    #[test]
    fn rejects_malformed_lines() {
        assert!(parse_word_vectors("token\n").is_err()); // no values
        assert!(parse_word_vectors("token 1 x\n").is_err()); // non-numeric
        assert!(parse_word_vectors("token inf\n").is_err()); // non-finite
        assert!(parse_word_vectors("a 1\na 2\n").is_err()); // duplicate
        assert_eq!(parse_word_vectors("").unwrap(), vec![]);
    }
}
