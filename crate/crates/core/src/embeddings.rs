//! Word-embedding tables in word2vec binary and text formats.
//!
//! Binary layout: an ASCII header `<count> <dim>\n`, then per entry the word
//! bytes, a single space, and `dim` little-endian `f32` values. A newline
//! after each entry is tolerated on read and never written.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    words: Vec<String>,
    index: HashMap<String, usize>,
    /// Row-major `words.len() x dim`.
    data: Vec<f32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EmbeddingFormat {
    Binary,
    Text,
}

impl std::str::FromStr for EmbeddingFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "binary" | "bin" => Ok(EmbeddingFormat::Binary),
            "text" | "txt" => Ok(EmbeddingFormat::Text),
            other => Err(Error::Config(format!("unknown embedding format {other:?}"))),
        }
    }
}

impl EmbeddingTable {
    /// An empty table of the given dimensionality.
    pub fn empty(dim: usize) -> Self {
        EmbeddingTable {
            dim,
            words: Vec::new(),
            index: HashMap::new(),
            data: Vec::new(),
        }
    }

    /// Builds a table from `(word, vector)` pairs.
    pub fn from_entries<I, S>(dim: usize, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, Vec<f32>)>,
        S: Into<String>,
    {
        let mut table = EmbeddingTable::empty(dim);
        for (w, v) in entries {
            table.push(w.into(), &v)?;
        }
        Ok(table)
    }

    fn push(&mut self, word: String, vector: &[f32]) -> Result<()> {
        if vector.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: vector.len(),
            });
        }
        if let Some(bad) = vector.iter().find(|x| !x.is_finite()) {
            return Err(Error::NonFinite(format!("embedding for {word:?} contains {bad}")));
        }
        if self.index.contains_key(&word) {
            return Err(Error::InvalidArgument(format!("duplicate embedding word {word:?}")));
        }
        self.index.insert(word.clone(), self.words.len());
        self.words.push(word);
        self.data.extend_from_slice(vector);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    /// Exact (case-sensitive) lookup.
    pub fn get(&self, word: &str) -> Option<&[f32]> {
        self.index.get(word).map(|&i| self.row(i))
    }

    /// Case-sensitive lookup falling back to the lowercased word.
    pub fn lookup(&self, word: &str) -> Option<&[f32]> {
        self.get(word).or_else(|| {
            let lower = word.to_lowercase();
            if lower != word {
                self.get(&lower)
            } else {
                None
            }
        })
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f32])> {
        self.words.iter().enumerate().map(|(i, w)| (w.as_str(), self.row(i)))
    }

    /// Keeps the entries whose word is in `vocab`, preserving table order.
    pub fn filter(&self, vocab: &HashSet<String>) -> EmbeddingTable {
        let mut out = EmbeddingTable::empty(self.dim);
        for (w, v) in self.iter() {
            if vocab.contains(w) {
                out.push(w.to_string(), v).expect("entries of a valid table are valid");
            }
        }
        out
    }

    /// Keeps the entries that [`lookup`](Self::lookup) of any word in `vocab`
    /// would resolve to.
    pub fn filter_for_lookup(&self, vocab: &HashSet<String>) -> EmbeddingTable {
        let mut wanted: HashSet<String> = HashSet::new();
        for w in vocab {
            if self.index.contains_key(w) {
                wanted.insert(w.clone());
            } else {
                let lower = w.to_lowercase();
                if self.index.contains_key(&lower) {
                    wanted.insert(lower);
                }
            }
        }
        self.filter(&wanted)
    }

    pub fn read_binary<R: BufRead>(reader: &mut R) -> Result<Self> {
        let mut header = String::new();
        reader
            .read_line(&mut header)
            .map_err(|e| Error::io("<embedding header>", e))?;
        let mut parts = header.split_whitespace();
        let parse = |p: Option<&str>| -> Result<usize> {
            p.and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::parse("<embedding>", 1, format!("bad header {:?}", header.trim_end())))
        };
        let count = parse(parts.next())?;
        let dim = parse(parts.next())?;
        if parts.next().is_some() {
            return Err(Error::parse("<embedding>", 1, "trailing fields in header"));
        }
        if count == 0 || dim == 0 {
            return Err(Error::Empty(format!("embedding header declares {count} x {dim}")));
        }
        let mut table = EmbeddingTable::empty(dim);
        table.words.reserve(count);
        table.data.reserve(count * dim);
        let mut word = Vec::new();
        let mut buf = vec![0u8; dim * 4];
        for entry in 0..count {
            word.clear();
            let n = reader
                .read_until(b' ', &mut word)
                .map_err(|e| Error::io("<embedding>", e))?;
            if n == 0 || word.last() != Some(&b' ') {
                return Err(Error::Parse {
                    path: "<embedding>".into(),
                    line: entry + 2,
                    message: format!("truncated file: header declares {count} entries, found {entry}"),
                });
            }
            word.pop();
            // Tolerate the newline some writers put after each vector.
            if word.first() == Some(&b'\n') {
                word.remove(0);
            }
            let w = String::from_utf8(word.clone())
                .map_err(|_| Error::parse("<embedding>", entry + 2, "word is not valid UTF-8"))?;
            reader.read_exact(&mut buf).map_err(|_| Error::Parse {
                path: "<embedding>".into(),
                line: entry + 2,
                message: format!("truncated vector for {w:?}"),
            })?;
            let v: Vec<f32> = buf
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
                .collect();
            table.push(w, &v)?;
        }
        // Only an optional final newline may follow.
        let mut rest = Vec::new();
        reader.read_to_end(&mut rest).map_err(|e| Error::io("<embedding>", e))?;
        if !(rest.is_empty() || rest == b"\n") {
            return Err(Error::parse(
                "<embedding>",
                count + 2,
                format!("header declares {count} entries but more data follows"),
            ));
        }
        Ok(table)
    }

    pub fn write_binary<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "{} {}", self.len(), self.dim)?;
        for (word, v) in self.iter() {
            w.write_all(word.as_bytes())?;
            w.write_all(b" ")?;
            for x in v {
                w.write_all(&x.to_le_bytes())?;
            }
        }
        Ok(())
    }

    /// Reads the text format: one `word v1 .. vd` entry per line. A leading
    /// `<count> <dim>` header line, as written by word2vec, is accepted.
    pub fn read_text<R: BufRead>(reader: R) -> Result<Self> {
        let mut table: Option<EmbeddingTable> = None;
        for (i, line) in reader.lines().enumerate() {
            let lineno = i + 1;
            let line = line.map_err(|e| Error::io("<embedding>", e))?;
            let mut fields = line.split_whitespace();
            let Some(word) = fields.next() else { continue };
            let values: Vec<&str> = fields.collect();
            if lineno == 1 && values.len() == 1 && word.parse::<usize>().is_ok() && values[0].parse::<usize>().is_ok() {
                continue;
            }
            let v = values
                .iter()
                .map(|s| s.parse::<f32>())
                .collect::<std::result::Result<Vec<f32>, _>>()
                .map_err(|e| Error::parse("<embedding>", lineno, format!("bad float: {e}")))?;
            let t = table.get_or_insert_with(|| EmbeddingTable::empty(v.len()));
            if v.len() != t.dim || v.is_empty() {
                return Err(Error::parse(
                    "<embedding>",
                    lineno,
                    format!("ragged row: expected {} components, found {}", t.dim, v.len()),
                ));
            }
            t.push(word.to_string(), &v).map_err(|e| match e {
                Error::InvalidArgument(m) | Error::NonFinite(m) => Error::parse("<embedding>", lineno, m),
                e => e,
            })?;
        }
        table.ok_or_else(|| Error::Empty("embedding text file has no entries".into()))
    }

    /// Writes the text format using the shortest representation that
    /// round-trips each `f32`.
    pub fn write_text<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        let mut line = String::new();
        for (word, v) in self.iter() {
            line.clear();
            line.push_str(word);
            for x in v {
                let _ = write!(line, " {x}");
            }
            line.push('\n');
            w.write_all(line.as_bytes())?;
        }
        Ok(())
    }

    pub fn load(path: &Path, format: EmbeddingFormat) -> Result<Self> {
        match format {
            EmbeddingFormat::Binary => load_binary(path),
            EmbeddingFormat::Text => load_text(path),
        }
    }

    pub fn save(&self, path: &Path, format: EmbeddingFormat) -> Result<()> {
        let mut buf = Vec::new();
        match format {
            EmbeddingFormat::Binary => self.write_binary(&mut buf),
            EmbeddingFormat::Text => self.write_text(&mut buf),
        }
        .map_err(|e| Error::io(path, e))?;
        fs::write(path, buf).map_err(|e| Error::io(path, e))
    }
}

fn with_path(path: &Path, e: Error) -> Error {
    match e {
        Error::Parse { line, message, .. } => Error::parse(path, line, message),
        Error::Io { source, .. } => Error::io(path, source),
        e => e,
    }
}

pub fn load_binary(path: &Path) -> Result<EmbeddingTable> {
    let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    EmbeddingTable::read_binary(&mut BufReader::new(f)).map_err(|e| with_path(path, e))
}

pub fn load_text(path: &Path) -> Result<EmbeddingTable> {
    let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    EmbeddingTable::read_text(BufReader::new(f)).map_err(|e| with_path(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table() -> EmbeddingTable {
        EmbeddingTable::from_entries(3, [("good", vec![1.0, 2.5, -3.0]), ("movie", vec![0.1, 0.2, 0.3])]).unwrap()
    }

    #[test]
    fn binary_write_then_read() {
        let t = table();
        let mut buf = Vec::new();
        t.write_binary(&mut buf).unwrap();
        assert!(buf.starts_with(b"2 3\n"));
        let back = EmbeddingTable::read_binary(&mut buf.as_slice()).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.get("good").unwrap(), &[1.0, 2.5, -3.0]);
    }

    #[test]
    fn binary_tolerates_entry_newlines() {
        let mut buf = b"2 1\n".to_vec();
        buf.extend_from_slice(b"a ");
        buf.extend_from_slice(&1.5f32.to_le_bytes());
        buf.push(b'\n');
        buf.extend_from_slice(b"b ");
        buf.extend_from_slice(&(-2.0f32).to_le_bytes());
        buf.push(b'\n');
        let t = EmbeddingTable::read_binary(&mut buf.as_slice()).unwrap();
        assert_eq!(t.words(), &["a".to_string(), "b".to_string()]);
        assert_eq!(t.get("b").unwrap(), &[-2.0]);
    }

    #[test]
    fn binary_errors() {
        assert!(matches!(
            EmbeddingTable::read_binary(&mut &b"0 300\n"[..]),
            Err(Error::Empty(_))
        ));
        let mut buf = Vec::new();
        table().write_binary(&mut buf).unwrap();
        let truncated = &buf[..buf.len() - 2];
        assert!(EmbeddingTable::read_binary(&mut &truncated[..]).is_err());
        // Header claims fewer entries than present.
        let mut more = buf.clone();
        more[0] = b'1';
        assert!(EmbeddingTable::read_binary(&mut more.as_slice()).is_err());
        // Header claims more entries than present.
        let mut fewer = buf.clone();
        fewer[0] = b'3';
        assert!(EmbeddingTable::read_binary(&mut fewer.as_slice()).is_err());

        let mut nan = b"1 1\nx ".to_vec();
        nan.extend_from_slice(&f32::NAN.to_le_bytes());
        assert!(matches!(
            EmbeddingTable::read_binary(&mut nan.as_slice()),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn text_examples() {
        let t = EmbeddingTable::read_text(&b"a 1 0\nb 0 1\n"[..]).unwrap();
        assert_eq!(t.dim(), 2);
        assert_eq!(t.get("a").unwrap(), &[1.0, 0.0]);
        assert_eq!(t.get("b").unwrap(), &[0.0, 1.0]);

        match EmbeddingTable::read_text(&b"a 1 0\nb 1\n"[..]) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected ragged-row error, got {other:?}"),
        }
        assert!(matches!(
            EmbeddingTable::read_text(&b"a 1 0\na 0 1\n"[..]),
            Err(Error::Parse { line: 2, .. })
        ));
        let with_header = EmbeddingTable::read_text(&b"2 2\na 1 0\nb 0 1\n"[..]).unwrap();
        assert_eq!(with_header, t);
    }

    #[test]
    fn text_round_trip() {
        let t = table();
        let mut buf = Vec::new();
        t.write_text(&mut buf).unwrap();
        let back = EmbeddingTable::read_text(buf.as_slice()).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn filter_examples() {
        let t = table();
        assert!(t.filter(&HashSet::new()).is_empty());
        let all: HashSet<String> = t.words().iter().cloned().collect();
        assert_eq!(t.filter(&all), t);
        let one: HashSet<String> = ["good".to_string(), "absent".to_string()].into();
        let f = t.filter(&one);
        assert_eq!(f.len(), 1);
        assert_eq!(f.dim(), 3);
    }

    #[test]
    fn lookup_fallback() {
        let t = table();
        assert_eq!(t.lookup("good"), t.get("good"));
        assert_eq!(t.lookup("absent"), None);
        assert_eq!(t.lookup("Good").unwrap(), &[1.0, 2.5, -3.0]);
        let cased = EmbeddingTable::from_entries(1, [("Apple", vec![1.0]), ("apple", vec![2.0])]).unwrap();
        assert_eq!(cased.lookup("Apple").unwrap(), &[1.0]);
        let need: HashSet<String> = ["APPLE".to_string()].into();
        assert_eq!(cased.filter_for_lookup(&need).words(), &["apple".to_string()]);
    }
}
