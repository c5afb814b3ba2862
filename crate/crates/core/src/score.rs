//! Measure-oriented model of an XML score encoding.
//!
//! The parser accepts an MEI-compatible subset: any document whose
//! `measure` elements carry numeric `@n` attributes. Whitelisted notation
//! elements found inside a measure (at any nesting depth) are collected in
//! document order; everything else is structural and ignored, except
//! `scoreDef` subtrees which are retained verbatim so that extracted
//! subdocuments stay self-contained.

use quick_xml::events::Event;
use quick_xml::Reader;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

/// Default element whitelist: the eleven notation kinds counted in the census.
pub const DEFAULT_WHITELIST: [&str; 11] = [
    "beam", "note", "rest", "artic", "tempo", "dynam", "dir", "slur", "chord", "accid", "tie",
];

#[derive(Debug, Error)]
pub enum ScoreError {
    #[error("malformed XML: {0}")]
    Xml(String),
    #[error("duplicate measure number {0}")]
    DuplicateMeasure(u32),
    #[error("measure @n attribute {0:?} is not a non-negative integer")]
    BadMeasureNumber(String),
    #[error("selection references unknown measure {0}")]
    UnknownMeasure(u32),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Whitelist(BTreeSet<String>);

impl Whitelist {
    pub fn standard() -> Self {
        Whitelist(DEFAULT_WHITELIST.iter().map(|s| s.to_string()).collect())
    }

    /// One element kind per line; `#` starts a comment.
    pub fn from_config(text: &str) -> Self {
        let kinds = text
            .lines()
            .map(|l| l.split('#').next().unwrap_or("").trim())
            .filter(|l| !l.is_empty())
            .map(|l| l.to_string())
            .collect();
        Whitelist(kinds)
    }

    pub fn contains(&self, kind: &str) -> bool {
        self.0.contains(kind)
    }

    pub fn kinds(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(|s| s.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NotationElement {
    pub kind: String,
    pub attrs: BTreeMap<String, String>,
}

impl NotationElement {
    pub fn new(kind: &str) -> Self {
        NotationElement {
            kind: kind.to_string(),
            attrs: BTreeMap::new(),
        }
    }

    pub fn with_attr(mut self, key: &str, value: &str) -> Self {
        self.attrs.insert(key.to_string(), value.to_string());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StaffSeq {
    pub number: u32,
    pub elements: Vec<NotationElement>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Measure {
    pub number: u32,
    pub staves: Vec<StaffSeq>,
}

impl Measure {
    /// Flat element list: concatenation of the staves in staff order.
    pub fn elements(&self) -> impl Iterator<Item = &NotationElement> {
        self.staves.iter().flat_map(|s| s.elements.iter())
    }

    pub fn element_count(&self) -> u64 {
        self.staves.iter().map(|s| s.elements.len() as u64).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Score {
    pub edition_id: String,
    pub measures: Vec<Measure>,
    /// Raw XML snippets (scoreDef etc.) carried into emitted subdocuments.
    pub header_context: Vec<String>,
}

impl Score {
    pub fn measure(&self, number: u32) -> Option<&Measure> {
        self.measures.iter().find(|m| m.number == number)
    }

    pub fn measure_numbers(&self) -> BTreeSet<u32> {
        self.measures.iter().map(|m| m.number).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeasureCensus {
    pub counts: BTreeMap<u32, u64>,
    pub total: u64,
}

impl MeasureCensus {
    pub fn from_counts(counts: BTreeMap<u32, u64>) -> Self {
        let total = counts.values().sum();
        MeasureCensus { counts, total }
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Sum of counts over a selection of measure numbers.
    pub fn sum_over<'a>(&self, numbers: impl IntoIterator<Item = &'a u32>) -> u64 {
        numbers
            .into_iter()
            .map(|n| self.counts.get(n).copied().unwrap_or(0))
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlignmentReport {
    pub shared: Vec<u32>,
    pub only_left: Vec<u32>,
    pub only_right: Vec<u32>,
}

impl AlignmentReport {
    pub fn is_comparable(&self) -> bool {
        self.only_left.is_empty() && self.only_right.is_empty()
    }
}

pub fn parse_score(
    input: &[u8],
    whitelist: &Whitelist,
    edition_id: &str,
) -> Result<Score, ScoreError> {
    let mut reader = Reader::from_reader(input);
    reader.config_mut().trim_text(true);

    let mut measures: Vec<Measure> = Vec::new();
    let mut seen: BTreeSet<u32> = BTreeSet::new();
    let mut header_context: Vec<String> = Vec::new();
    let mut buf = Vec::new();

    loop {
        match reader.read_event_into(&mut buf) {
            Err(e) => return Err(ScoreError::Xml(e.to_string())),
            Ok(Event::Eof) => break,
            Ok(Event::Start(start)) => {
                let name = local_name(start.name().as_ref()).to_string();
                if name == "measure" {
                    let attrs = attr_map(&start)?;
                    let measure = read_measure(&mut reader, &attrs, whitelist)?;
                    if !seen.insert(measure.number) {
                        return Err(ScoreError::DuplicateMeasure(measure.number));
                    }
                    measures.push(measure);
                } else if name == "scoreDef" {
                    header_context.push(capture_subtree(&mut reader, &start)?);
                }
            }
            Ok(Event::Empty(start)) => {
                let name = local_name(start.name().as_ref()).to_string();
                if name == "measure" {
                    let attrs = attr_map(&start)?;
                    let number = measure_number(&attrs)?;
                    if !seen.insert(number) {
                        return Err(ScoreError::DuplicateMeasure(number));
                    }
                    measures.push(Measure {
                        number,
                        staves: Vec::new(),
                    });
                } else if name == "scoreDef" {
                    header_context.push(serialize_empty(&start));
                }
            }
            Ok(_) => {}
        }
        buf.clear();
    }

    Ok(Score {
        edition_id: edition_id.to_string(),
        measures,
        header_context,
    })
}

fn measure_number(attrs: &BTreeMap<String, String>) -> Result<u32, ScoreError> {
    let raw = attrs
        .get("n")
        .ok_or_else(|| ScoreError::BadMeasureNumber("<missing>".into()))?;
    raw.parse::<u32>()
        .map_err(|_| ScoreError::BadMeasureNumber(raw.clone()))
}

/// Consumes events up to the measure's end tag, collecting whitelisted
/// elements per staff. Elements outside any staff subtree (spanners such as
/// slur or dynam placed as measure children) are anchored to the staff named
/// by their `@staff` attribute, defaulting to staff 1.
fn read_measure(
    reader: &mut Reader<&[u8]>,
    measure_attrs: &BTreeMap<String, String>,
    whitelist: &Whitelist,
) -> Result<Measure, ScoreError> {
    let number = measure_number(measure_attrs)?;
    let mut staves: BTreeMap<u32, Vec<NotationElement>> = BTreeMap::new();
    let mut staff_stack: Vec<u32> = Vec::new();
    let mut auto_staff = 0u32;
    let mut depth = 0usize;
    let mut buf = Vec::new();

    loop {
        match reader.read_event_into(&mut buf) {
            Err(e) => return Err(ScoreError::Xml(e.to_string())),
            Ok(Event::Eof) => return Err(ScoreError::Xml("unclosed measure".into())),
            Ok(Event::Start(start)) => {
                depth += 1;
                let name = local_name(start.name().as_ref()).to_string();
                let attrs = attr_map(&start)?;
                if name == "staff" {
                    let n = match attrs.get("n").and_then(|v| v.parse::<u32>().ok()) {
                        Some(n) => n,
                        None => auto_staff + 1,
                    };
                    auto_staff = auto_staff.max(n);
                    staff_stack.push(n);
                    staves.entry(n).or_default();
                } else {
                    staff_stack.push(*staff_stack.last().unwrap_or(&0));
                    if whitelist.contains(&name) {
                        push_element(&mut staves, &staff_stack, name, attrs);
                    }
                }
            }
            Ok(Event::Empty(start)) => {
                let name = local_name(start.name().as_ref()).to_string();
                let attrs = attr_map(&start)?;
                if whitelist.contains(&name) {
                    push_element(&mut staves, &staff_stack, name, attrs);
                }
            }
            Ok(Event::End(_)) => {
                if depth == 0 {
                    break;
                }
                depth -= 1;
                staff_stack.pop();
            }
            Ok(_) => {}
        }
        buf.clear();
    }

    let staves = staves
        .into_iter()
        .map(|(number, elements)| StaffSeq { number, elements })
        .collect();
    Ok(Measure { number, staves })
}

fn push_element(
    staves: &mut BTreeMap<u32, Vec<NotationElement>>,
    staff_stack: &[u32],
    kind: String,
    attrs: BTreeMap<String, String>,
) {
    let staff = match staff_stack.last() {
        Some(&n) if n > 0 => n,
        _ => attrs
            .get("staff")
            .and_then(|v| v.split_whitespace().next())
            .and_then(|v| v.parse::<u32>().ok())
            .unwrap_or(1),
    };
    staves
        .entry(staff)
        .or_default()
        .push(NotationElement { kind, attrs });
}

fn local_name(qname: &[u8]) -> &str {
    let name = std::str::from_utf8(qname).unwrap_or("");
    name.rsplit(':').next().unwrap_or(name)
}

fn attr_map(
    start: &quick_xml::events::BytesStart<'_>,
) -> Result<BTreeMap<String, String>, ScoreError> {
    let mut out = BTreeMap::new();
    for attr in start.attributes() {
        let attr = attr.map_err(|e| ScoreError::Xml(e.to_string()))?;
        let key = local_name(attr.key.as_ref()).to_string();
        let value = attr
            .unescape_value()
            .map_err(|e| ScoreError::Xml(e.to_string()))?
            .into_owned();
        out.insert(key, value);
    }
    Ok(out)
}

/// Re-serializes a subtree verbatim (modulo attribute escaping) starting at
/// an already-consumed start tag.
fn capture_subtree(
    reader: &mut Reader<&[u8]>,
    start: &quick_xml::events::BytesStart<'_>,
) -> Result<String, ScoreError> {
    let mut out = String::new();
    write_start(&mut out, start, false);
    let mut depth = 0usize;
    let mut buf = Vec::new();
    loop {
        match reader.read_event_into(&mut buf) {
            Err(e) => return Err(ScoreError::Xml(e.to_string())),
            Ok(Event::Eof) => return Err(ScoreError::Xml("unclosed scoreDef".into())),
            Ok(Event::Start(s)) => {
                depth += 1;
                write_start(&mut out, &s, false);
            }
            Ok(Event::Empty(s)) => write_start(&mut out, &s, true),
            Ok(Event::Text(t)) => {
                let text = t.unescape().map_err(|e| ScoreError::Xml(e.to_string()))?;
                out.push_str(&escape_text(&text));
            }
            Ok(Event::End(e)) => {
                out.push_str("</");
                out.push_str(std::str::from_utf8(e.name().as_ref()).unwrap_or(""));
                out.push('>');
                if depth == 0 {
                    break;
                }
                depth -= 1;
            }
            Ok(_) => {}
        }
        buf.clear();
    }
    Ok(out)
}

fn serialize_empty(start: &quick_xml::events::BytesStart<'_>) -> String {
    let mut out = String::new();
    write_start(&mut out, start, true);
    out
}

fn write_start(out: &mut String, start: &quick_xml::events::BytesStart<'_>, empty: bool) {
    out.push('<');
    out.push_str(std::str::from_utf8(start.name().as_ref()).unwrap_or(""));
    for attr in start.attributes().flatten() {
        out.push(' ');
        out.push_str(std::str::from_utf8(attr.key.as_ref()).unwrap_or(""));
        out.push_str("=\"");
        let value = attr.unescape_value().unwrap_or_default();
        out.push_str(&escape_attr(&value));
        out.push('"');
    }
    out.push_str(if empty { "/>" } else { ">" });
}

pub fn measure_census(score: &Score) -> MeasureCensus {
    let counts = score
        .measures
        .iter()
        .map(|m| (m.number, m.element_count()))
        .collect();
    MeasureCensus::from_counts(counts)
}

pub fn extract_sample_document(
    score: &Score,
    selection: &BTreeSet<u32>,
) -> Result<Score, ScoreError> {
    let known = score.measure_numbers();
    if let Some(&missing) = selection.iter().find(|n| !known.contains(n)) {
        return Err(ScoreError::UnknownMeasure(missing));
    }
    let mut measures: Vec<Measure> = score
        .measures
        .iter()
        .filter(|m| selection.contains(&m.number))
        .cloned()
        .collect();
    measures.sort_by_key(|m| m.number);
    Ok(Score {
        edition_id: score.edition_id.clone(),
        measures,
        header_context: score.header_context.clone(),
    })
}

pub fn validate_alignment(left: &Score, right: &Score) -> AlignmentReport {
    let l = left.measure_numbers();
    let r = right.measure_numbers();
    AlignmentReport {
        shared: l.intersection(&r).copied().collect(),
        only_left: l.difference(&r).copied().collect(),
        only_right: r.difference(&l).copied().collect(),
    }
}

/// Serializes a Score back to the XML subset this toolkit parses.
/// Nested groupings (beams, chords) are flattened; the census and the
/// per-staff element sequences are preserved exactly.
pub fn emit(score: &Score) -> String {
    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    out.push_str(&format!(
        "<score edition=\"{}\">\n",
        escape_attr(&score.edition_id)
    ));
    for snippet in &score.header_context {
        out.push_str("  ");
        out.push_str(snippet);
        out.push('\n');
    }
    for measure in &score.measures {
        out.push_str(&format!("  <measure n=\"{}\">\n", measure.number));
        for staff in &measure.staves {
            out.push_str(&format!("    <staff n=\"{}\">\n", staff.number));
            for el in &staff.elements {
                out.push_str(&format!("      <{}", el.kind));
                for (k, v) in &el.attrs {
                    out.push_str(&format!(" {}=\"{}\"", k, escape_attr(v)));
                }
                out.push_str("/>\n");
            }
            out.push_str("    </staff>\n");
        }
        out.push_str("  </measure>\n");
    }
    out.push_str("</score>\n");
    out
}

fn escape_attr(value: &str) -> String {
    value
        .replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('"', "&quot;")
}

fn escape_text(value: &str) -> String {
    value.replace('&', "&amp;").replace('<', "&lt;")
}
