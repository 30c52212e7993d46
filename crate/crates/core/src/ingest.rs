//! Interaction stream parsing.
//!
//! Input files are `source,target,timestamp[,weight]` rows (CSV or TSV), with
//! an optional header. Node ids are interned into dense [`NodeId`]s; the
//! original tokens stay available through the stream's symbol table.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {reason}")]
    MalformedRow { line: u64, reason: String },
    #[error("line {line}: timestamp {value:?} is not an integer or ISO-8601 instant")]
    BadTimestamp { line: u64, value: String },
    #[error("line {line}: self-loop {node:?} rejected by policy")]
    SelfLoop { line: u64, node: String },
    #[error("stream contains no interactions")]
    Empty,
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("manifest error: {0}")]
    Manifest(#[from] serde_json::Error),
}

/// Dense node identifier, an index into the stream's symbol table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InteractionRecord {
    pub source: NodeId,
    pub target: NodeId,
    /// Seconds since the epoch.
    pub timestamp: i64,
    pub weight: f64,
}

/// Maps external node tokens to dense ids and back.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SymbolTable {
    names: Vec<String>,
    index: HashMap<String, NodeId>,
}

impl SymbolTable {
    pub fn intern(&mut self, name: &str) -> NodeId {
        if let Some(&id) = self.index.get(name) {
            return id;
        }
        let id = NodeId(self.names.len() as u32);
        self.names.push(name.to_owned());
        self.index.insert(name.to_owned(), id);
        id
    }

    pub fn get(&self, name: &str) -> Option<NodeId> {
        self.index.get(name).copied()
    }

    pub fn name(&self, id: NodeId) -> &str {
        &self.names[id.index()]
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

/// Time-ordered interaction stream. Immutable once built.
#[derive(Debug, Clone)]
pub struct TemporalEventStream {
    records: Vec<InteractionRecord>,
    symbols: SymbolTable,
    directed: bool,
    span: (i64, i64),
    node_count: usize,
}

impl TemporalEventStream {
    /// Builds a stream from records whose ids refer to `symbols`. Records are
    /// sorted by timestamp (stable, so equal timestamps keep input order).
    pub fn new(
        mut records: Vec<InteractionRecord>,
        symbols: SymbolTable,
        directed: bool,
    ) -> Result<Self, IngestError> {
        if records.is_empty() {
            return Err(IngestError::Empty);
        }
        records.sort_by_key(|r| r.timestamp);
        let span = (records[0].timestamp, records[records.len() - 1].timestamp);
        let node_count = records
            .iter()
            .flat_map(|r| [r.source, r.target])
            .collect::<HashSet<_>>()
            .len();
        Ok(Self {
            records,
            symbols,
            directed,
            span,
            node_count,
        })
    }

    /// Convenience constructor from `(source, target, timestamp)` tokens.
    pub fn from_triples<S: AsRef<str>>(triples: &[(S, S, i64)], directed: bool) -> Result<Self, IngestError> {
        let mut symbols = SymbolTable::default();
        let records = triples
            .iter()
            .filter(|(s, t, _)| s.as_ref() != t.as_ref())
            .map(|(s, t, ts)| InteractionRecord {
                source: symbols.intern(s.as_ref()),
                target: symbols.intern(t.as_ref()),
                timestamp: *ts,
                weight: 1.0,
            })
            .collect();
        Self::new(records, symbols, directed)
    }

    pub fn records(&self) -> &[InteractionRecord] {
        &self.records
    }

    pub fn symbols(&self) -> &SymbolTable {
        &self.symbols
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    /// Inclusive `[t_min, t_max]`.
    pub fn span(&self) -> (i64, i64) {
        self.span
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn record_count(&self) -> usize {
        self.records.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum StreamFormat {
    #[default]
    Csv,
    Tsv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SelfLoopPolicy {
    #[default]
    Drop,
    Reject,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum HeaderMode {
    /// Treat the first row as a header when its timestamp column does not parse.
    #[default]
    Auto,
    Present,
    Absent,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ParseOptions {
    /// Overrides the delimiter implied by the format.
    #[serde(default)]
    pub delimiter: Option<char>,
    #[serde(default)]
    pub header: HeaderMode,
    #[serde(default)]
    pub self_loops: SelfLoopPolicy,
    #[serde(default)]
    pub directed: bool,
}

/// Dataset manifest, stored as JSON next to the data.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub path: PathBuf,
    #[serde(default)]
    pub format: StreamFormat,
    #[serde(default)]
    pub directed: bool,
    #[serde(default)]
    pub self_loops: SelfLoopPolicy,
    #[serde(default)]
    pub header: HeaderMode,
}

impl DatasetManifest {
    /// Reads a manifest; a relative data path is resolved against the
    /// manifest's directory.
    pub fn load(path: &Path) -> Result<Self, IngestError> {
        let file = File::open(path).map_err(|source| IngestError::Io {
            path: path.to_owned(),
            source,
        })?;
        let mut manifest: DatasetManifest = serde_json::from_reader(BufReader::new(file))?;
        if manifest.path.is_relative() {
            if let Some(dir) = path.parent() {
                manifest.path = dir.join(&manifest.path);
            }
        }
        Ok(manifest)
    }

    pub fn open(&self) -> Result<TemporalEventStream, IngestError> {
        let options = ParseOptions {
            delimiter: None,
            header: self.header,
            self_loops: self.self_loops,
            directed: self.directed,
        };
        parse_stream(&self.path, self.format, &options)
    }
}

pub fn parse_stream(
    path: &Path,
    format: StreamFormat,
    options: &ParseOptions,
) -> Result<TemporalEventStream, IngestError> {
    let file = File::open(path).map_err(|source| IngestError::Io {
        path: path.to_owned(),
        source,
    })?;
    parse_reader(BufReader::new(file), format, options)
}

pub fn parse_reader<R: Read>(
    reader: R,
    format: StreamFormat,
    options: &ParseOptions,
) -> Result<TemporalEventStream, IngestError> {
    let delimiter = options.delimiter.unwrap_or(match format {
        StreamFormat::Csv => ',',
        StreamFormat::Tsv => '\t',
    });
    let mut csv_reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .delimiter(delimiter as u8)
        .from_reader(reader);

    let mut symbols = SymbolTable::default();
    let mut records = Vec::new();
    for (row_index, row) in csv_reader.records().enumerate() {
        let row = row?;
        let line = row.position().map_or(row_index as u64 + 1, |p| p.line());
        if row.len() < 3 {
            return Err(IngestError::MalformedRow {
                line,
                reason: format!("expected at least 3 columns, found {}", row.len()),
            });
        }
        let timestamp = match parse_timestamp(&row[2]) {
            Some(ts) => ts,
            None => {
                let is_header =
                    row_index == 0 && matches!(options.header, HeaderMode::Auto | HeaderMode::Present);
                if is_header {
                    continue;
                }
                return Err(IngestError::BadTimestamp {
                    line,
                    value: row[2].to_owned(),
                });
            }
        };
        if row_index == 0 && options.header == HeaderMode::Present {
            continue;
        }
        let weight = match row.get(3).filter(|w| !w.is_empty()) {
            None => 1.0,
            Some(w) => match w.parse::<f64>() {
                Ok(w) if w >= 0.0 && w.is_finite() => w,
                _ => {
                    return Err(IngestError::MalformedRow {
                        line,
                        reason: format!("weight {w:?} is not a non-negative number"),
                    })
                }
            },
        };
        let (source, target) = (&row[0], &row[1]);
        if source.is_empty() || target.is_empty() {
            return Err(IngestError::MalformedRow {
                line,
                reason: "empty node id".into(),
            });
        }
        if source == target {
            match options.self_loops {
                SelfLoopPolicy::Drop => continue,
                SelfLoopPolicy::Reject => {
                    return Err(IngestError::SelfLoop {
                        line,
                        node: source.to_owned(),
                    })
                }
            }
        }
        records.push(InteractionRecord {
            source: symbols.intern(source),
            target: symbols.intern(target),
            timestamp,
            weight,
        });
    }
    TemporalEventStream::new(records, symbols, options.directed)
}

/// Integer seconds, or an ISO-8601 / RFC 3339 instant converted to seconds.
pub fn parse_timestamp(value: &str) -> Option<i64> {
    if let Ok(ts) = value.parse::<i64>() {
        return Some(ts);
    }
    if let Ok(dt) = DateTime::parse_from_rfc3339(value) {
        return Some(dt.timestamp());
    }
    for pattern in ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(value, pattern) {
            return Some(dt.and_utc().timestamp());
        }
    }
    NaiveDate::parse_from_str(value, "%Y-%m-%d")
        .ok()
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .map(|dt| dt.and_utc().timestamp())
}

/// Writes the stream back as headerless `source,target,timestamp,weight` CSV.
pub fn write_stream<W: Write>(stream: &TemporalEventStream, writer: W) -> Result<(), IngestError> {
    let mut out = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    for r in stream.records() {
        out.write_record([
            stream.symbols.name(r.source),
            stream.symbols.name(r.target),
            &r.timestamp.to_string(),
            &r.weight.to_string(),
        ])?;
    }
    out.flush().map_err(|source| IngestError::Io {
        path: PathBuf::from("<writer>"),
        source,
    })?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamSummary {
    pub nodes: usize,
    /// Distinct node pairs (ordered when directed).
    pub edges: usize,
    pub records: usize,
    pub span: (i64, i64),
    pub avg_degree: f64,
    pub directed: bool,
}

pub fn stream_summary(stream: &TemporalEventStream) -> StreamSummary {
    let pairs: HashSet<(NodeId, NodeId)> = stream
        .records()
        .iter()
        .map(|r| {
            if stream.directed || r.source <= r.target {
                (r.source, r.target)
            } else {
                (r.target, r.source)
            }
        })
        .collect();
    let nodes = stream.node_count();
    let factor = if stream.directed { 1.0 } else { 2.0 };
    StreamSummary {
        nodes,
        edges: pairs.len(),
        records: stream.record_count(),
        span: stream.span(),
        avg_degree: factor * pairs.len() as f64 / nodes as f64,
        directed: stream.directed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str, options: &ParseOptions) -> Result<TemporalEventStream, IngestError> {
        parse_reader(text.as_bytes(), StreamFormat::Csv, options)
    }

    #[test]
    fn drops_self_loops() {
        let s = parse("a,b,10\nb,c,20\na,a,30\n", &ParseOptions::default()).unwrap();
        assert_eq!(s.record_count(), 2);
        assert_eq!(s.span(), (10, 20));
        assert_eq!(s.node_count(), 3);
    }

    #[test]
    fn rejects_self_loops_when_asked() {
        let options = ParseOptions {
            self_loops: SelfLoopPolicy::Reject,
            ..Default::default()
        };
        let err = parse("a,b,10\na,a,30\n", &options).unwrap_err();
        assert!(matches!(err, IngestError::SelfLoop { line: 2, .. }));
    }

    #[test]
    fn sorts_by_timestamp() {
        let s = parse("a,b,30\nb,c,10\nc,d,20\n", &ParseOptions::default()).unwrap();
        let ts: Vec<i64> = s.records().iter().map(|r| r.timestamp).collect();
        assert_eq!(ts, vec![10, 20, 30]);
    }

    #[test]
    fn missing_timestamp_reports_line() {
        let err = parse("a,b,1\nc,d,2\na,b\n", &ParseOptions::default()).unwrap_err();
        match err {
            IngestError::MalformedRow { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn non_integer_timestamp_is_an_error() {
        let err = parse("a,b,1\nc,d,2.5\n", &ParseOptions::default()).unwrap_err();
        assert!(matches!(err, IngestError::BadTimestamp { line: 2, .. }));
    }

    #[test]
    fn header_is_detected_and_iso_dates_convert() {
        let s = parse(
            "source,target,time,weight\nx,y,1970-01-01T00:01:40Z,2.5\n",
            &ParseOptions::default(),
        )
        .unwrap();
        assert_eq!(s.records()[0].timestamp, 100);
        assert_eq!(s.records()[0].weight, 2.5);
        assert_eq!(parse_timestamp("1970-01-02"), Some(86_400));
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(matches!(
            parse("", &ParseOptions::default()),
            Err(IngestError::Empty)
        ));
        assert!(matches!(
            parse("a,a,1\n", &ParseOptions::default()),
            Err(IngestError::Empty)
        ));
    }

    #[test]
    fn tsv_format() {
        let s = parse_reader(
            "a\tb\t5\n".as_bytes(),
            StreamFormat::Tsv,
            &ParseOptions::default(),
        )
        .unwrap();
        assert_eq!(s.record_count(), 1);
    }

    #[test]
    fn summary_counts() {
        let s = TemporalEventStream::from_triples(&[("a", "b", 1), ("b", "c", 2)], false).unwrap();
        let summary = stream_summary(&s);
        assert_eq!((summary.nodes, summary.edges), (3, 2));
        assert!((summary.avg_degree - 4.0 / 3.0).abs() < 1e-12);

        let s = TemporalEventStream::from_triples(&[("a", "b", 1)], true).unwrap();
        let summary = stream_summary(&s);
        assert_eq!((summary.nodes, summary.edges), (2, 1));

        let dup: Vec<_> = (0..100).map(|t| ("a", "b", t)).collect();
        let s = TemporalEventStream::from_triples(&dup, true).unwrap();
        let summary = stream_summary(&s);
        assert_eq!((summary.edges, summary.records), (1, 100));
    }

    #[test]
    fn manifest_resolves_relative_paths() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("data.tsv"), "a\tb\t1\nb\tc\t2\n").unwrap();
        std::fs::write(
            dir.path().join("manifest.json"),
            r#"{"path":"data.tsv","format":"tsv","directed":true}"#,
        )
        .unwrap();
        let manifest = DatasetManifest::load(&dir.path().join("manifest.json")).unwrap();
        let stream = manifest.open().unwrap();
        assert!(stream.is_directed());
        assert_eq!(stream.record_count(), 2);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn write_then_parse_preserves_records(
                rows in prop::collection::vec((0u8..6, 0u8..6, -50i64..50, 0u32..4), 1..40)
            ) {
                let rows: Vec<_> = rows.into_iter().filter(|(s, t, _, _)| s != t).collect();
                prop_assume!(!rows.is_empty());
                let text: String = rows
                    .iter()
                    .map(|(s, t, ts, w)| format!("n{s},n{t},{ts},{}\n", *w as f64 * 0.5))
                    .collect();
                let first = parse(&text, &ParseOptions::default()).unwrap();
                let mut buf = Vec::new();
                write_stream(&first, &mut buf).unwrap();
                let second = parse(std::str::from_utf8(&buf).unwrap(), &ParseOptions::default()).unwrap();
                let key = |s: &TemporalEventStream| {
                    let mut v: Vec<(String, String, i64, u64)> = s
                        .records()
                        .iter()
                        .map(|r| (
                            s.symbols().name(r.source).to_owned(),
                            s.symbols().name(r.target).to_owned(),
                            r.timestamp,
                            r.weight.to_bits(),
                        ))
                        .collect();
                    v.sort();
                    v
                };
                prop_assert_eq!(key(&first), key(&second));
                prop_assert!(second.records().windows(2).all(|w| w[0].timestamp <= w[1].timestamp));
            }
        }
    }
}
