//! Clip and query data model, JSONL loading, and text normalization.
//!
//! A corpus file holds one clip per line; a queries file holds one query per
//! line. Both are UTF-8 JSON Lines. Absent and `null` fields are equivalent.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{CorpusError, ParseClipIdError};

/// Temporal window (seconds) inside which two clips of the same video count
/// as adjacent.
pub const ADJACENCY_WINDOW_S: u64 = 10;

/// Identity of one clip: a video id plus an integer-second temporal extent.
///
/// Stored in canonical `{video_id}__s{start}__e{end}` form; equality,
/// hashing and ordering all follow the canonical string.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ClipRef {
    id: String,
    video_len: usize,
    start_s: u64,
    end_s: u64,
}

impl ClipRef {
    pub fn new(video_id: &str, start_s: u64, end_s: u64) -> Result<Self, ParseClipIdError> {
        if video_id.is_empty() {
            return Err(ParseClipIdError::EmptyVideoId);
        }
        if end_s <= start_s {
            return Err(ParseClipIdError::EmptyExtent { start_s, end_s });
        }
        Ok(Self {
            id: format!("{video_id}__s{start_s}__e{end_s}"),
            video_len: video_id.len(),
            start_s,
            end_s,
        })
    }

    /// Parses `{video}__s{int}__e{int}`, splitting on the last `__e` and then
    /// the last `__s` before it so the video id may contain either marker.
    pub fn parse(s: &str) -> Result<Self, ParseClipIdError> {
        if s.is_empty() {
            return Err(ParseClipIdError::Empty);
        }
        let e_pos = s
            .rfind("__e")
            .ok_or_else(|| ParseClipIdError::MissingMarker { marker: "__e", input: s.to_owned() })?;
        let head = &s[..e_pos];
        let end_str = &s[e_pos + 3..];
        let s_pos = head
            .rfind("__s")
            .ok_or_else(|| ParseClipIdError::MissingMarker { marker: "__s", input: s.to_owned() })?;
        let video = &head[..s_pos];
        let start_str = &head[s_pos + 3..];
        let start_s = parse_seconds("start", start_str)?;
        let end_s = parse_seconds("end", end_str)?;
        Self::new(video, start_s, end_s)
    }

    pub fn as_str(&self) -> &str {
        &self.id
    }

    pub fn video_id(&self) -> &str {
        &self.id[..self.video_len]
    }

    pub fn start_s(&self) -> u64 {
        self.start_s
    }

    pub fn end_s(&self) -> u64 {
        self.end_s
    }
}

fn parse_seconds(segment: &'static str, value: &str) -> Result<u64, ParseClipIdError> {
    if value.is_empty() || !value.bytes().all(|b| b.is_ascii_digit()) {
        return Err(ParseClipIdError::BadSeconds { segment, value: value.to_owned() });
    }
    value
        .parse()
        .map_err(|_| ParseClipIdError::BadSeconds { segment, value: value.to_owned() })
}

impl fmt::Display for ClipRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.id)
    }
}

impl fmt::Debug for ClipRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ClipRef({})", self.id)
    }
}

impl FromStr for ClipRef {
    type Err = ParseClipIdError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse(s)
    }
}

impl Serialize for ClipRef {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.id)
    }
}

impl<'de> Deserialize<'de> for ClipRef {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Self::parse(&s).map_err(serde::de::Error::custom)
    }
}

/// One of the three routable content channels of a clip.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Modality {
    #[serde(rename = "asr")]
    Asr,
    #[serde(rename = "ocr")]
    Ocr,
    #[serde(rename = "visuals")]
    Visual,
}

impl Modality {
    /// All modalities in their fixed iteration order.
    pub const ALL: [Modality; 3] = [Modality::Asr, Modality::Ocr, Modality::Visual];

    pub fn wire_name(self) -> &'static str {
        match self {
            Modality::Asr => "asr",
            Modality::Ocr => "ocr",
            Modality::Visual => "visuals",
        }
    }

    /// Case-insensitive lookup by wire name.
    pub fn from_wire(s: &str) -> Option<Self> {
        let s = s.trim();
        Self::ALL.into_iter().find(|m| m.wire_name().eq_ignore_ascii_case(s))
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.wire_name())
    }
}

impl FromStr for Modality {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::from_wire(s).ok_or_else(|| format!("unknown modality `{s}` (expected asr, ocr or visuals)"))
    }
}

/// What a query was derived from. `Dense` marks queries written from a fused
/// caption; it is a valid label but never a routing target.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SourceLabel {
    #[serde(rename = "asr")]
    Asr,
    #[serde(rename = "ocr")]
    Ocr,
    #[serde(rename = "visuals")]
    Visual,
    #[serde(rename = "dense")]
    Dense,
}

impl SourceLabel {
    pub fn modality(self) -> Option<Modality> {
        match self {
            SourceLabel::Asr => Some(Modality::Asr),
            SourceLabel::Ocr => Some(Modality::Ocr),
            SourceLabel::Visual => Some(Modality::Visual),
            SourceLabel::Dense => None,
        }
    }

    pub fn wire_name(self) -> &'static str {
        match self {
            SourceLabel::Dense => "dense",
            other => other.modality().map(Modality::wire_name).unwrap_or("dense"),
        }
    }
}

impl From<Modality> for SourceLabel {
    fn from(m: Modality) -> Self {
        match m {
            Modality::Asr => SourceLabel::Asr,
            Modality::Ocr => SourceLabel::Ocr,
            Modality::Visual => SourceLabel::Visual,
        }
    }
}

/// A searchable text field of a clip: the three modalities plus the fused
/// caption used by the all-text baseline.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum IndexField {
    Modality(Modality),
    Fused,
}

impl IndexField {
    pub const ALL: [IndexField; 4] = [
        IndexField::Modality(Modality::Asr),
        IndexField::Modality(Modality::Ocr),
        IndexField::Modality(Modality::Visual),
        IndexField::Fused,
    ];

    pub fn wire_name(self) -> &'static str {
        match self {
            IndexField::Modality(m) => m.wire_name(),
            IndexField::Fused => "fused",
        }
    }

    pub fn from_wire(s: &str) -> Option<Self> {
        if s.eq_ignore_ascii_case("fused") {
            Some(IndexField::Fused)
        } else {
            Modality::from_wire(s).map(IndexField::Modality)
        }
    }

    pub fn modality(self) -> Option<Modality> {
        match self {
            IndexField::Modality(m) => Some(m),
            IndexField::Fused => None,
        }
    }
}

impl From<Modality> for IndexField {
    fn from(m: Modality) -> Self {
        IndexField::Modality(m)
    }
}

impl fmt::Display for IndexField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.wire_name())
    }
}

/// Lowercases, replaces punctuation with spaces and collapses whitespace.
pub fn normalize_text(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut pending_space = false;
    for ch in s.chars() {
        if ch.is_alphanumeric() {
            if pending_space && !out.is_empty() {
                out.push(' ');
            }
            pending_space = false;
            out.extend(ch.to_lowercase());
        } else {
            // punctuation, symbols and whitespace all act as separators
            pending_space = true;
        }
    }
    out
}

fn clean_field(field: Option<String>) -> Option<String> {
    field.filter(|s| !normalize_text(s).is_empty())
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClipRecord {
    pub clip: ClipRef,
    pub category: Option<String>,
    pub asr_text: Option<String>,
    pub ocr_text: Option<String>,
    pub visual_caption: Option<String>,
    pub fused_caption: Option<String>,
}

impl ClipRecord {
    pub fn field(&self, field: IndexField) -> Option<&str> {
        match field {
            IndexField::Modality(Modality::Asr) => self.asr_text.as_deref(),
            IndexField::Modality(Modality::Ocr) => self.ocr_text.as_deref(),
            IndexField::Modality(Modality::Visual) => self.visual_caption.as_deref(),
            IndexField::Fused => self.fused_caption.as_deref(),
        }
    }

    pub fn has_modality(&self, m: Modality) -> bool {
        self.field(m.into()).is_some()
    }
}

#[derive(Serialize, Deserialize)]
struct ClipLine {
    clip_id: String,
    #[serde(default)]
    category: Option<String>,
    #[serde(default)]
    asr: Option<String>,
    #[serde(default)]
    ocr: Option<String>,
    #[serde(default)]
    visual: Option<String>,
    #[serde(default)]
    fused: Option<String>,
}

impl ClipRecord {
    fn from_line(line: ClipLine) -> Result<Self, String> {
        let clip = ClipRef::parse(&line.clip_id).map_err(|e| e.to_string())?;
        let rec = ClipRecord {
            clip,
            category: line.category,
            asr_text: clean_field(line.asr),
            ocr_text: clean_field(line.ocr),
            visual_caption: clean_field(line.visual),
            fused_caption: clean_field(line.fused),
        };
        if !Modality::ALL.iter().any(|&m| rec.has_modality(m)) {
            return Err(format!("clip {} has no non-empty asr, ocr or visual field", rec.clip));
        }
        Ok(rec)
    }

    fn to_line(&self) -> ClipLine {
        ClipLine {
            clip_id: self.clip.to_string(),
            category: self.category.clone(),
            asr: self.asr_text.clone(),
            ocr: self.ocr_text.clone(),
            visual: self.visual_caption.clone(),
            fused: self.fused_caption.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct QueryRecord {
    pub query_id: String,
    pub text: String,
    pub gold: ClipRef,
    pub source: Option<SourceLabel>,
    pub category: Option<String>,
}

impl QueryRecord {
    /// An ad hoc query with no gold judgment attached, as issued from the CLI.
    /// The gold ref is a placeholder and must not be scored.
    pub fn adhoc(query_id: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            query_id: query_id.into(),
            text: text.into(),
            gold: ClipRef::new("adhoc", 0, 1).expect("static ref is valid"),
            source: None,
            category: None,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct QueryLine {
    query_id: String,
    text: String,
    gold_clip_id: String,
    #[serde(default)]
    source_modality: Option<SourceLabel>,
    #[serde(default)]
    category: Option<String>,
}

impl QueryRecord {
    fn from_line(line: QueryLine) -> Result<Self, String> {
        if line.text.trim().is_empty() {
            return Err(format!("query {} has empty text", line.query_id));
        }
        let gold = ClipRef::parse(&line.gold_clip_id).map_err(|e| e.to_string())?;
        Ok(QueryRecord {
            query_id: line.query_id,
            text: line.text,
            gold,
            source: line.source_modality,
            category: line.category,
        })
    }

    fn to_line(&self) -> QueryLine {
        QueryLine {
            query_id: self.query_id.clone(),
            text: self.text.clone(),
            gold_clip_id: self.gold.to_string(),
            source_modality: self.source,
            category: self.category.clone(),
        }
    }
}

/// Fraction of clips carrying a non-empty field, per searchable field.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Coverage {
    pub clips: usize,
    pub asr: f64,
    pub ocr: f64,
    pub visuals: f64,
    pub fused: f64,
}

/// Immutable set of clips in file order, with unique clip refs.
#[derive(Clone, Debug)]
pub struct Corpus {
    clips: Vec<ClipRecord>,
    by_ref: HashMap<ClipRef, usize>,
}

impl Corpus {
    pub fn from_records(clips: Vec<ClipRecord>) -> Result<Self, CorpusError> {
        let mut by_ref = HashMap::with_capacity(clips.len());
        for (i, clip) in clips.iter().enumerate() {
            if by_ref.insert(clip.clip.clone(), i).is_some() {
                return Err(CorpusError::DuplicateClip(clip.clip.to_string()));
            }
        }
        Ok(Self { clips, by_ref })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, CorpusError> {
        let records = read_jsonl(path.as_ref(), |line: ClipLine| ClipRecord::from_line(line))?;
        let mut by_ref = HashMap::with_capacity(records.len());
        for (i, (lineno, clip)) in records.iter().enumerate() {
            if by_ref.insert(clip.clip.clone(), i).is_some() {
                return Err(CorpusError::Line {
                    line: *lineno,
                    message: format!("duplicate clip_id {}", clip.clip),
                });
            }
        }
        Ok(Self { clips: records.into_iter().map(|(_, c)| c).collect(), by_ref })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<(), CorpusError> {
        write_jsonl(path.as_ref(), self.clips.iter().map(ClipRecord::to_line))
    }

    pub fn clips(&self) -> &[ClipRecord] {
        &self.clips
    }

    pub fn len(&self) -> usize {
        self.clips.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clips.is_empty()
    }

    pub fn get(&self, clip: &ClipRef) -> Option<&ClipRecord> {
        self.by_ref.get(clip).map(|&i| &self.clips[i])
    }

    pub fn contains(&self, clip: &ClipRef) -> bool {
        self.by_ref.contains_key(clip)
    }

    pub fn coverage(&self) -> Coverage {
        let n = self.clips.len();
        let frac = |field: IndexField| {
            if n == 0 {
                return 0.0;
            }
            self.clips.iter().filter(|c| c.field(field).is_some()).count() as f64 / n as f64
        };
        Coverage {
            clips: n,
            asr: frac(Modality::Asr.into()),
            ocr: frac(Modality::Ocr.into()),
            visuals: frac(Modality::Visual.into()),
            fused: frac(IndexField::Fused),
        }
    }

    /// Clip counts per category, uncategorized clips excluded.
    pub fn categories(&self) -> BTreeMap<String, usize> {
        let mut out = BTreeMap::new();
        for c in &self.clips {
            if let Some(cat) = &c.category {
                *out.entry(cat.clone()).or_insert(0) += 1;
            }
        }
        out
    }
}

pub fn load_queries(path: impl AsRef<Path>) -> Result<Vec<QueryRecord>, CorpusError> {
    let records = read_jsonl(path.as_ref(), |line: QueryLine| QueryRecord::from_line(line))?;
    let mut seen = HashMap::new();
    for (lineno, q) in &records {
        if let Some(first) = seen.insert(q.query_id.clone(), *lineno) {
            return Err(CorpusError::Line {
                line: *lineno,
                message: format!("duplicate query_id {} (first on line {first})", q.query_id),
            });
        }
    }
    Ok(records.into_iter().map(|(_, q)| q).collect())
}

pub fn write_queries(path: impl AsRef<Path>, queries: &[QueryRecord]) -> Result<(), CorpusError> {
    write_jsonl(path.as_ref(), queries.iter().map(QueryRecord::to_line))
}

fn read_jsonl<L, T>(
    path: &Path,
    convert: impl Fn(L) -> Result<T, String>,
) -> Result<Vec<(usize, T)>, CorpusError>
where
    L: serde::de::DeserializeOwned,
{
    let file = File::open(path).map_err(|source| CorpusError::Io { path: path.to_owned(), source })?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|source| CorpusError::Io { path: path.to_owned(), source })?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: L = serde_json::from_str(&line)
            .map_err(|e| CorpusError::Line { line: lineno, message: e.to_string() })?;
        let rec = convert(parsed).map_err(|message| CorpusError::Line { line: lineno, message })?;
        out.push((lineno, rec));
    }
    Ok(out)
}

fn write_jsonl<L: Serialize>(path: &Path, lines: impl Iterator<Item = L>) -> Result<(), CorpusError> {
    let io_err = |source| CorpusError::Io { path: path.to_owned(), source };
    let mut w = std::io::BufWriter::new(File::create(path).map_err(io_err)?);
    for line in lines {
        let s = serde_json::to_string(&line).expect("record serialization is infallible");
        writeln!(w, "{s}").map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_clip_id_with_leading_hyphen() {
        let r = ClipRef::parse("-A9zM1jeNfk__s0__e10").unwrap();
        assert_eq!(r.video_id(), "-A9zM1jeNfk");
        assert_eq!((r.start_s(), r.end_s()), (0, 10));
    }

    #[test]
    fn parses_simple_clip_id() {
        let r: ClipRef = "v__s5__e15".parse().unwrap();
        assert_eq!((r.video_id(), r.start_s(), r.end_s()), ("v", 5, 15));
    }

    #[test]
    fn rejects_empty_extent() {
        let err = ClipRef::parse("v__s10__e10").unwrap_err();
        assert!(matches!(err, ParseClipIdError::EmptyExtent { start_s: 10, end_s: 10 }));
    }

    #[test]
    fn last_match_parsing_keeps_markers_in_video_id() {
        let r = ClipRef::parse("a__s1__e2__s30__e40").unwrap();
        assert_eq!(r.video_id(), "a__s1__e2");
        assert_eq!((r.start_s(), r.end_s()), (30, 40));
    }

    #[test]
    fn malformed_clip_ids_name_the_segment() {
        let err = ClipRef::parse("v__sx__e10").unwrap_err();
        assert!(err.to_string().contains("start"), "{err}");
        let err = ClipRef::parse("v__s1__e-3").unwrap_err();
        assert!(err.to_string().contains("end"), "{err}");
        assert!(ClipRef::parse("nothing").is_err());
        assert!(ClipRef::parse("__s0__e10").is_err());
        assert!(ClipRef::parse("").is_err());
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize_text("Anniversary Turtle Soup!"), "anniversary turtle soup");
        assert_eq!(normalize_text(""), "");
        assert_eq!(normalize_text("A  B\tC"), "a b c");
        assert_eq!(normalize_text("  ..hello,world.. "), "hello world");
        assert_eq!(normalize_text("I'm"), "i m");
    }

    #[test]
    fn modality_wire_names() {
        assert_eq!(Modality::from_wire("VISUALS"), Some(Modality::Visual));
        assert_eq!(Modality::from_wire("visual"), None);
        assert!(Modality::Asr < Modality::Ocr && Modality::Ocr < Modality::Visual);
        let v: SourceLabel = serde_json::from_str("\"dense\"").unwrap();
        assert_eq!(v.modality(), None);
    }

    proptest! {
        #[test]
        fn clip_id_round_trips(video in "[-_A-Za-z0-9]{1,16}", start in 0u64..100_000, len in 1u64..1000) {
            let r = ClipRef::new(&video, start, start + len).unwrap();
            let back = ClipRef::parse(r.as_str()).unwrap();
            prop_assert_eq!(back.video_id(), video.as_str());
            prop_assert_eq!(back, r);
        }

        #[test]
        fn normalize_is_idempotent(s in "\\PC{0,64}") {
            let once = normalize_text(&s);
            prop_assert_eq!(normalize_text(&once), once.clone());
            prop_assert!(!once.starts_with(' ') && !once.ends_with(' '));
            prop_assert!(!once.contains("  "));
        }
    }
}
