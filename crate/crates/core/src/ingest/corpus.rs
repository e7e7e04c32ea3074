use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::vocab::Vocabulary;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Token {
    Word(u32),
    /// Hyperlink occurrence of a text entity.
    Anchor(u32),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Document {
    /// Text entity whose page this document is, if any.
    pub page: Option<u32>,
    pub tokens: Vec<Token>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Corpus {
    pub documents: Vec<Document>,
}

/// A raw token before interning.
#[derive(Debug, PartialEq, Eq)]
enum RawToken<'a> {
    Word(String),
    Anchor(&'a str),
}

fn parse_token(tok: &str) -> std::result::Result<RawToken<'_>, String> {
    if let Some(rest) = tok.strip_prefix("[[") {
        let name = rest
            .strip_suffix("]]")
            .ok_or_else(|| format!("unterminated anchor `{tok}`"))?;
        if name.is_empty() {
            return Err("empty anchor `[[]]`".into());
        }
        return Ok(RawToken::Anchor(name));
    }
    let mut word = String::with_capacity(tok.len());
    let mut chars = tok.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            word.push(c);
            continue;
        }
        match chars.next() {
            Some(e @ ('[' | ']' | '\\' | '=')) => word.push(e),
            Some(e) => return Err(format!("unknown escape `\\{e}` in `{tok}`")),
            None => return Err(format!("dangling `\\` in `{tok}`")),
        }
    }
    Ok(RawToken::Word(word))
}

fn escape_word(word: &str) -> String {
    let mut out = String::with_capacity(word.len() + 2);
    for (i, c) in word.chars().enumerate() {
        match c {
            '[' | ']' | '\\' => {
                out.push('\\');
                out.push(c);
            }
            '=' if i == 0 => out.push_str("\\="),
            _ => out.push(c),
        }
    }
    out
}

/// `Some(name)` when `line` is a document header; an empty name means a
/// document without page entity.
fn header(line: &str) -> Option<&str> {
    let rest = line.strip_prefix("==")?;
    if rest.is_empty() {
        Some("")
    } else if rest.starts_with(char::is_whitespace) {
        Some(rest.trim())
    } else {
        None
    }
}

impl Corpus {
    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn token_count(&self) -> usize {
        self.documents.iter().map(|d| d.tokens.len()).sum()
    }

    /// Parses a corpus file, registering words and text entities in `vocab`.
    ///
    /// Word frequency counts occurrences; text-entity frequency counts
    /// anchor occurrences plus page headers.
    pub fn load(path: &Path, vocab: &mut Vocabulary) -> Result<Corpus> {
        // Both closures need the vocabulary; they never run concurrently.
        let vocab = std::cell::RefCell::new(vocab);
        Self::load_with(
            path,
            |raw, _| {
                let mut v = vocab.borrow_mut();
                Ok(match raw {
                    RawToken::Word(w) => {
                        let id = v.words.intern(&w);
                        v.words.bump(id, 1);
                        Token::Word(id)
                    }
                    RawToken::Anchor(a) => {
                        let id = v.text_entities.intern(a);
                        v.text_entities.bump(id, 1);
                        Token::Anchor(id)
                    }
                })
            },
            |name, _| {
                let mut v = vocab.borrow_mut();
                let id = v.text_entities.intern(name);
                v.text_entities.bump(id, 1);
                Ok(id)
            },
        )
    }

    /// Parses a corpus whose every word and entity already exists in `vocab`.
    pub fn load_known(path: &Path, vocab: &Vocabulary) -> Result<Corpus> {
        let unknown = |what: &str, name: &str, line: usize| {
            Error::Mismatch(format!("{}:{line}: unknown {what} `{name}`", path.display()))
        };
        Self::load_with(
            path,
            |raw, line| match raw {
                RawToken::Word(w) => vocab
                    .words
                    .id(&w)
                    .map(Token::Word)
                    .ok_or_else(|| unknown("word", &w, line)),
                RawToken::Anchor(a) => vocab
                    .text_entities
                    .id(a)
                    .map(Token::Anchor)
                    .ok_or_else(|| unknown("entity", a, line)),
            },
            |name, line| {
                vocab
                    .text_entities
                    .id(name)
                    .ok_or_else(|| unknown("entity", name, line))
            },
        )
    }

    fn load_with(
        path: &Path,
        mut token: impl FnMut(RawToken<'_>, usize) -> Result<Token>,
        mut page: impl FnMut(&str, usize) -> Result<u32>,
    ) -> Result<Corpus> {
        let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut corpus = Corpus::default();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            let line_no = i + 1;
            if let Some(name) = header(&line) {
                let page = if name.is_empty() {
                    None
                } else if name.contains(char::is_whitespace) {
                    return Err(Error::parse(path, line_no, "page entity contains whitespace"));
                } else {
                    Some(page(name, line_no)?)
                };
                corpus.documents.push(Document {
                    page,
                    tokens: Vec::new(),
                });
                continue;
            }
            for tok in line.split_whitespace() {
                let raw = parse_token(tok).map_err(|m| Error::parse(path, line_no, m))?;
                let t = token(raw, line_no)?;
                if corpus.documents.is_empty() {
                    corpus.documents.push(Document::default());
                }
                corpus.documents.last_mut().unwrap().tokens.push(t);
            }
        }
        Ok(corpus)
    }

    /// Writes the corpus: a header line per document followed by one line
    /// holding all its tokens.
    pub fn write(&self, path: &Path, vocab: &Vocabulary) -> Result<()> {
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        let io = |e| Error::io(path, e);
        for doc in &self.documents {
            match doc.page {
                Some(p) => writeln!(out, "== {}", vocab.text_entities.name(p)).map_err(io)?,
                None => writeln!(out, "==").map_err(io)?,
            }
            if doc.tokens.is_empty() {
                continue;
            }
            let line: Vec<String> = doc
                .tokens
                .iter()
                .map(|t| match *t {
                    Token::Word(w) => escape_word(vocab.words.name(w)),
                    Token::Anchor(e) => format!("[[{}]]", vocab.text_entities.name(e)),
                })
                .collect();
            writeln!(out, "{}", line.join(" ")).map_err(io)?;
        }
        out.flush().map_err(io)
    }
}
