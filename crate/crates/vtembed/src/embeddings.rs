//! Word vectors as text (`token v1 … v_dw` per line) and stop-word lists.

use std::fmt::Write as _;
use std::path::Path;

use vtembed_core::text::DEFAULT_STOPWORDS;
use vtembed_core::WordEmbeddingTable;

use crate::error::{read_text, write_file, Error, Result};

/// Parses word vectors. The dimension is fixed by the first non-blank line.
pub fn parse_word_embeddings(text: &str) -> Result<WordEmbeddingTable> {
    let mut table: Option<WordEmbeddingTable> = None;
    for (i, raw) in text.lines().enumerate() {
        let mut fields = raw.split_whitespace();
        let Some(token) = fields.next() else { continue };
        let line_err = |message: String| Error::Line { line: i + 1, message };
        let vector = fields
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|_| line_err(format!("token {token}: bad number {f:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        if vector.is_empty() {
            return Err(line_err(format!("token {token} has no vector")));
        }
        let t = match &mut table {
            Some(t) => t,
            None => table.insert(WordEmbeddingTable::new(vector.len())?),
        };
        if vector.len() != t.dim() {
            return Err(line_err(format!(
                "token {token}: vector length {} differs from {}",
                vector.len(),
                t.dim()
            )));
        }
        t.insert(token.to_string(), vector)
            .map_err(|e| line_err(e.to_string()))?;
    }
    table.ok_or_else(|| Error::Format("word embedding file is empty".into()))
}

/// One token per line; blank lines and `#` comments are ignored.
pub fn parse_stopwords(text: &str) -> Vec<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .collect()
}

/// Loads vectors and the stop-word list; without a list the bundled one is used.
pub fn read_word_embeddings(path: &Path, stopwords: Option<&Path>) -> Result<WordEmbeddingTable> {
    let mut table = parse_word_embeddings(&read_text(path)?)?;
    match stopwords {
        Some(p) => {
            for s in parse_stopwords(&read_text(p)?) {
                table.add_stopword(&s);
            }
        }
        None => {
            for s in DEFAULT_STOPWORDS {
                table.add_stopword(s);
            }
        }
    }
    Ok(table)
}

/// Writes vectors sorted by token, with round-trip exact decimal formatting.
pub fn word_embeddings_to_string(table: &WordEmbeddingTable) -> String {
    let mut out = String::new();
    for (token, vector) in table.entries() {
        out.push_str(token);
        for v in vector {
            write!(out, " {v:?}").expect("write to string");
        }
        out.push('\n');
    }
    out
}

pub fn write_word_embeddings(path: &Path, table: &WordEmbeddingTable) -> Result<()> {
    write_file(path, word_embeddings_to_string(table).as_bytes())
}

pub fn write_stopwords(path: &Path, table: &WordEmbeddingTable) -> Result<()> {
    let mut out = String::new();
    for s in table.stopwords() {
        out.push_str(s);
        out.push('\n');
    }
    write_file(path, out.as_bytes())
}
