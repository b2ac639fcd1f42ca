use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A pre-tokenized article.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub sentences: Vec<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub highlights: Option<Vec<Vec<String>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<u8>>,
}

impl Document {
    pub fn new(id: impl Into<String>, sentences: Vec<Vec<String>>) -> Self {
        Document {
            id: id.into(),
            sentences,
            highlights: None,
            labels: None,
        }
    }

    pub fn with_highlights(mut self, highlights: Vec<Vec<String>>) -> Self {
        self.highlights = Some(highlights);
        self
    }

    pub fn num_sentences(&self) -> usize {
        self.sentences.len()
    }

    /// Highlights joined into one reference token sequence.
    pub fn reference_tokens(&self) -> Result<Vec<String>> {
        match &self.highlights {
            Some(h) if h.iter().any(|s| !s.is_empty()) => Ok(h.concat()),
            _ => Err(Error::NoGoldSummary(self.id.clone())),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sentences.is_empty() {
            return Err(Error::Data(format!("document {:?} has no sentences", self.id)));
        }
        if let Some(i) = self.sentences.iter().position(Vec::is_empty) {
            return Err(Error::Data(format!("document {:?}: sentence {i} is empty", self.id)));
        }
        if let Some(labels) = &self.labels {
            if labels.len() != self.sentences.len() {
                return Err(Error::Data(format!(
                    "document {:?}: {} labels for {} sentences",
                    self.id,
                    labels.len(),
                    self.sentences.len()
                )));
            }
        }
        Ok(())
    }
}

/// Streaming JSONL corpus reader. Blank lines are skipped.
pub struct CorpusReader<R> {
    lines: std::io::Lines<R>,
    line_no: usize,
    source: String,
}

impl<R: BufRead> CorpusReader<R> {
    pub fn new(reader: R, source: impl Into<String>) -> Self {
        CorpusReader {
            lines: reader.lines(),
            line_no: 0,
            source: source.into(),
        }
    }
}

impl<R: BufRead> Iterator for CorpusReader<R> {
    type Item = Result<Document>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let line = self.lines.next()?;
            self.line_no += 1;
            let line = match line {
                Ok(l) => l,
                Err(e) => return Some(Err(Error::parse(&self.source, self.line_no, e.to_string()))),
            };
            if line.trim().is_empty() {
                continue;
            }
            let parsed = serde_json::from_str::<Document>(&line)
                .map_err(|e| Error::parse(&self.source, self.line_no, e.to_string()))
                .and_then(|doc| {
                    doc.validate()
                        .map_err(|e| Error::parse(&self.source, self.line_no, e.to_string()))?;
                    Ok(doc)
                });
            return Some(parsed);
        }
    }
}

pub fn read_corpus(path: impl AsRef<Path>) -> Result<CorpusReader<BufReader<File>>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(CorpusReader::new(BufReader::new(file), path.display().to_string()))
}

pub fn load_corpus(path: impl AsRef<Path>) -> Result<Vec<Document>> {
    read_corpus(path)?.collect()
}

pub fn write_corpus<W: Write>(mut out: W, docs: &[Document]) -> std::io::Result<()> {
    for doc in docs {
        serde_json::to_writer(&mut out, doc)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Vec<Result<Document>> {
        CorpusReader::new(text.as_bytes(), "test").collect()
    }

    #[test]
    fn parses_one_document() {
        let docs = parse(r#"{"id":"d1","sentences":[["a","b"]],"highlights":[["a"]]}"#);
        let doc = docs.into_iter().next().unwrap().unwrap();
        assert_eq!(doc.num_sentences(), 1);
        assert_eq!(doc.highlights, Some(vec![vec!["a".to_string()]]));
    }

    #[test]
    fn missing_field_names_field_and_line() {
        let docs = parse("{\"id\":\"ok\",\"sentences\":[[\"a\"]]}\n{\"id\":\"d2\"}\n");
        assert!(docs[0].is_ok());
        let err = docs[1].as_ref().unwrap_err().to_string();
        assert!(err.contains("line 2"), "{err}");
        assert!(err.contains("sentences"), "{err}");
    }

    #[test]
    fn empty_input_is_empty_stream() {
        assert!(parse("").is_empty());
    }

    #[test]
    fn empty_sentence_is_rejected() {
        let docs = parse(r#"{"id":"d","sentences":[["a"],[]]}"#);
        assert!(docs[0].is_err());
    }

    #[test]
    fn write_then_read_preserves_documents() {
        let doc =
            Document::new("x", vec![vec!["hello".into(), "world".into()]]).with_highlights(vec![vec!["hello".into()]]);
        let mut buf = Vec::new();
        write_corpus(&mut buf, std::slice::from_ref(&doc)).unwrap();
        let back: Vec<Document> = CorpusReader::new(&buf[..], "buf").map(Result::unwrap).collect();
        assert_eq!(back, vec![doc]);
    }
}
