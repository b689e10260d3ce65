//! Line-oriented snapshot format `archon-kb v1`.
//!
//! ```text
//! archon-kb v1 dim=16 embedder=hash-v1
//! doc<TAB>doc_id<TAB>resource_type<TAB>title<TAB>origin<TAB>body
//! summary<TAB>doc_id<TAB>problem<TAB>approach<TAB>summary
//! item<TAB>item_id<TAB>doc_id<TAB>facet_type<TAB>resource_type<TAB>text<TAB>e0,e1,...
//! end<TAB>docs=N<TAB>summaries=M<TAB>items=K
//! ```
//!
//! Fields appear in exactly this order. Text fields escape `\`, tab, newline
//! and carriage return as `\\`, `\t`, `\n`, `\r`. Embedding components are
//! written as the shortest decimal that parses back to the same double, so a
//! round trip reproduces every retrieval score bit for bit. `dim=none` and
//! `embedder=none` mark a store that has never embedded anything. The `end`
//! trailer guards against truncation.

use std::fs;
use std::io::Write;
use std::path::Path;

use thiserror::Error;

use super::store::{KnowledgeStore, StoreData};
use super::types::*;

pub const SNAPSHOT_HEADER: &str = "archon-kb v1";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("corrupt snapshot at byte {offset}: {message}")]
pub struct LoadError {
    pub offset: usize,
    pub message: String,
}

fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out
}

fn unescape(text: &str) -> Result<String, String> {
    let mut out = String::with_capacity(text.len());
    let mut chars = text.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('\\') => out.push('\\'),
            Some('t') => out.push('\t'),
            Some('n') => out.push('\n'),
            Some('r') => out.push('\r'),
            other => return Err(format!("bad escape sequence \\{}", other.map(String::from).unwrap_or_default())),
        }
    }
    Ok(out)
}

fn optional<T: ToString>(value: Option<T>) -> String {
    value.map_or_else(|| "none".to_string(), |v| v.to_string())
}

pub(crate) fn render(data: &StoreData) -> String {
    let mut out = format!(
        "{SNAPSHOT_HEADER} dim={} embedder={}\n",
        optional(data.dim),
        optional(data.embedder.as_deref().map(|e| e.replace(char::is_whitespace, "_")))
    );
    for doc in data.docs.values() {
        out.push_str(&format!(
            "doc\t{}\t{}\t{}\t{}\t{}\n",
            escape(&doc.doc_id),
            doc.resource_type,
            escape(&doc.title),
            escape(&doc.origin),
            escape(&doc.body)
        ));
    }
    for s in data.summaries.values() {
        out.push_str(&format!(
            "summary\t{}\t{}\t{}\t{}\n",
            escape(&s.doc_id),
            escape(&s.problem),
            escape(&s.approach),
            escape(&s.summary)
        ));
    }
    for item in &data.items {
        let embedding: Vec<String> = item.embedding.iter().map(|x| x.to_string()).collect();
        out.push_str(&format!(
            "item\t{}\t{}\t{}\t{}\t{}\t{}\n",
            escape(&item.item_id),
            escape(&item.doc_id),
            item.facet_type,
            item.resource_type,
            escape(&item.text),
            embedding.join(",")
        ));
    }
    out.push_str(&format!(
        "end\tdocs={}\tsummaries={}\titems={}\n",
        data.docs.len(),
        data.summaries.len(),
        data.items.len()
    ));
    out
}

struct Parser {
    data: StoreData,
    ended: bool,
}

fn parse_count(text: &str, key: &str) -> Result<usize, String> {
    text.strip_prefix(key)
        .and_then(|v| v.strip_prefix('='))
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| format!("expected `{key}=<count>`, found `{text}`"))
}

impl Parser {
    fn header(line: &str) -> Result<StoreData, String> {
        let rest = line
            .strip_prefix(SNAPSHOT_HEADER)
            .ok_or_else(|| format!("expected header `{SNAPSHOT_HEADER}`"))?;
        let mut parts = rest.split(' ').filter(|p| !p.is_empty());
        let dim = parts
            .next()
            .and_then(|p| p.strip_prefix("dim="))
            .ok_or("header lacks `dim=`")?;
        let embedder = parts
            .next()
            .and_then(|p| p.strip_prefix("embedder="))
            .ok_or("header lacks `embedder=`")?;
        if parts.next().is_some() {
            return Err("unexpected header field".into());
        }
        let dim = match dim {
            "none" => None,
            d => Some(d.parse::<usize>().map_err(|_| format!("bad dimension `{d}`"))?),
        };
        let embedder = match embedder {
            "none" => None,
            e => Some(e.to_string()),
        };
        Ok(StoreData {
            dim,
            embedder,
            ..StoreData::default()
        })
    }

    fn record(&mut self, line: &str) -> Result<(), String> {
        if self.ended {
            return Err("content after end trailer".into());
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let expect = |n: usize| {
            if fields.len() == n {
                Ok(())
            } else {
                Err(format!("`{}` record needs {n} fields, found {}", fields[0], fields.len()))
            }
        };
        match fields[0] {
            "doc" => {
                expect(6)?;
                let doc = SourceDocument {
                    doc_id: unescape(fields[1])?,
                    resource_type: fields[2].parse()?,
                    title: unescape(fields[3])?,
                    origin: unescape(fields[4])?,
                    body: unescape(fields[5])?,
                };
                if self.data.docs.insert(doc.doc_id.clone(), doc).is_some() {
                    return Err(format!("duplicate document `{}`", fields[1]));
                }
            }
            "summary" => {
                expect(5)?;
                let summary = CoarseSummary {
                    doc_id: unescape(fields[1])?,
                    problem: unescape(fields[2])?,
                    approach: unescape(fields[3])?,
                    summary: unescape(fields[4])?,
                };
                if !self.data.docs.contains_key(&summary.doc_id) {
                    return Err(format!("summary for unknown document `{}`", summary.doc_id));
                }
                self.data.summaries.insert(summary.doc_id.clone(), summary);
            }
            "item" => {
                expect(7)?;
                let embedding = if fields[6].is_empty() {
                    Vec::new()
                } else {
                    fields[6]
                        .split(',')
                        .map(|x| x.parse::<f64>().map_err(|_| format!("bad embedding value `{x}`")))
                        .collect::<Result<Vec<_>, _>>()?
                };
                if Some(embedding.len()) != self.data.dim {
                    return Err(format!(
                        "embedding has {} components, header says {}",
                        embedding.len(),
                        optional(self.data.dim)
                    ));
                }
                let item = KnowledgeItem {
                    item_id: unescape(fields[1])?,
                    doc_id: unescape(fields[2])?,
                    facet_type: fields[3].parse()?,
                    resource_type: fields[4].parse()?,
                    text: unescape(fields[5])?,
                    embedding,
                };
                if !self.data.docs.contains_key(&item.doc_id) {
                    return Err(format!("item for unknown document `{}`", item.doc_id));
                }
                if self.data.items.iter().any(|i| i.item_id == item.item_id) {
                    return Err(format!("duplicate item `{}`", item.item_id));
                }
                self.data.items.push(item);
            }
            "end" => {
                expect(4)?;
                let counts = (
                    parse_count(fields[1], "docs")?,
                    parse_count(fields[2], "summaries")?,
                    parse_count(fields[3], "items")?,
                );
                let actual = (
                    self.data.docs.len(),
                    self.data.summaries.len(),
                    self.data.items.len(),
                );
                if counts != actual {
                    return Err(format!("trailer counts {counts:?} do not match records {actual:?}"));
                }
                self.ended = true;
            }
            other => return Err(format!("unknown record kind `{other}`")),
        }
        Ok(())
    }
}

/// Parses a whole snapshot; nothing is returned unless every line is valid.
pub(crate) fn parse(text: &str) -> Result<StoreData, LoadError> {
    let mut offset = 0;
    let mut parser: Option<Parser> = None;
    for raw_line in text.split_inclusive('\n') {
        let Some(line) = raw_line.strip_suffix('\n') else {
            return Err(LoadError {
                offset,
                message: "unterminated final line".into(),
            });
        };
        let result = match parser.as_mut() {
            None => Parser::header(line).map(|data| {
                parser = Some(Parser { data, ended: false });
            }),
            Some(p) => p.record(line),
        };
        result.map_err(|message| LoadError { offset, message })?;
        offset += raw_line.len();
    }
    match parser {
        Some(p) if p.ended => Ok(p.data),
        Some(_) => Err(LoadError {
            offset,
            message: "missing end trailer (truncated file?)".into(),
        }),
        None => Err(LoadError {
            offset: 0,
            message: "empty file".into(),
        }),
    }
}

impl KnowledgeStore {
    pub fn snapshot_string(&self) -> String {
        render(&self.data.read().expect("knowledge store lock poisoned"))
    }

    /// Writes the snapshot through a temporary file and a rename, so readers
    /// never observe a partial file.
    pub fn snapshot_save(&self, path: &Path) -> std::io::Result<()> {
        let text = self.snapshot_string();
        let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
        let tmp = path.with_extension("tmp-snapshot");
        if let Some(dir) = dir {
            fs::create_dir_all(dir)?;
        }
        {
            let mut file = fs::File::create(&tmp)?;
            file.write_all(text.as_bytes())?;
            file.sync_all()?;
        }
        fs::rename(&tmp, path)
    }

    pub fn snapshot_from_str(text: &str) -> Result<Self, LoadError> {
        parse(text).map(KnowledgeStore::from_data)
    }

    pub fn snapshot_load(path: &Path) -> Result<Self, super::KnowledgeError> {
        let bytes = fs::read(path).map_err(|e| super::KnowledgeError::Io(format!("{}: {e}", path.display())))?;
        let text = std::str::from_utf8(&bytes).map_err(|e| LoadError {
            offset: e.valid_up_to(),
            message: "invalid UTF-8".into(),
        })?;
        Ok(Self::snapshot_from_str(text)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn escape_round_trip() {
        for text in ["plain", "tab\there", "new\nline", "back\\slash\\t", "cr\r", "…unicode"] {
            assert_eq!(unescape(&escape(text)).unwrap(), text);
            assert!(!escape(text).contains('\t'));
            assert!(!escape(text).contains('\n'));
        }
        assert!(unescape("bad\\x").is_err());
    }

    #[test]
    fn empty_store_round_trips() {
        let store = KnowledgeStore::new();
        let text = store.snapshot_string();
        assert_eq!(text, "archon-kb v1 dim=none embedder=none\nend\tdocs=0\tsummaries=0\titems=0\n");
        let loaded = KnowledgeStore::snapshot_from_str(&text).unwrap();
        assert!(loaded.is_empty());
        assert_eq!(loaded.snapshot_string(), text);
    }

    #[test]
    fn truncation_reports_offset() {
        let text = "archon-kb v1 dim=none embedder=none\nend\tdocs=0\tsummaries=0\titems=0\n";
        let err = KnowledgeStore::snapshot_from_str(&text[..36]).unwrap_err();
        assert_eq!(err.offset, 36);
        let err = KnowledgeStore::snapshot_from_str(&text[..40]).unwrap_err();
        assert_eq!(err.offset, 36);
        assert!(err.message.contains("unterminated"));
    }

    #[test]
    fn wrong_header_rejected() {
        let err = KnowledgeStore::snapshot_from_str("archon-kb v2 dim=none embedder=none\n").unwrap_err();
        assert_eq!(err.offset, 0);
    }

    #[test]
    fn bad_record_offset_points_at_line() {
        let text = "archon-kb v1 dim=2 embedder=x\nbogus\n";
        let err = KnowledgeStore::snapshot_from_str(text).unwrap_err();
        assert_eq!(err.offset, 30);
    }
}
