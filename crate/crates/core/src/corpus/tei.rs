//! Reader for GROBID TEI-XML output.
//!
//! The document is first loaded into a small element tree (local names only,
//! namespaces are ignored) and the parts the corpus needs are then picked out:
//!
//! ```text
//! TEI/teiHeader/fileDesc/titleStmt/title                title
//! TEI/teiHeader/fileDesc/publicationStmt/date@when      date
//! TEI/teiHeader/fileDesc/sourceDesc/biblStruct/...      authors, DOI
//! TEI/teiHeader/profileDesc/abstract//p                 abstract
//! TEI/text/body/div/{head,p,figure,formula}             sections
//! TEI/text/back//listBibl/biblStruct                    references
//! ```

use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;
use regex::Regex;
use std::sync::OnceLock;

use super::{PaperMetadata, SideKind, SideRecord};
use crate::error::{Error, Result};
use crate::text::normalize_whitespace;

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Element {
    pub name: String,
    pub attrs: Vec<(String, String)>,
    pub children: Vec<Node>,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Node {
    Element(Element),
    Text(String),
}

impl Element {
    fn attr(&self, key: &str) -> Option<&str> {
        self.attrs
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    fn elements(&self) -> impl Iterator<Item = &Element> {
        self.children.iter().filter_map(|n| match n {
            Node::Element(e) => Some(e),
            Node::Text(_) => None,
        })
    }

    fn child(&self, name: &str) -> Option<&Element> {
        self.elements().find(|e| e.name == name)
    }

    fn children_named<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a Element> + 'a {
        self.elements().filter(move |e| e.name == name)
    }

    fn path(&self, names: &[&str]) -> Option<&Element> {
        names.iter().try_fold(self, |e, name| e.child(name))
    }

    fn descendants<'a>(&'a self, name: &'a str, out: &mut Vec<&'a Element>) {
        for e in self.elements() {
            if e.name == name {
                out.push(e);
            }
            e.descendants(name, out);
        }
    }

    fn raw_text(&self, out: &mut String) {
        for n in &self.children {
            match n {
                Node::Text(t) => out.push_str(t),
                Node::Element(e) => e.raw_text(out),
            }
        }
    }

    /// All descendant text with whitespace normalized; inline markup is dropped.
    fn flat_text(&self) -> String {
        let mut raw = String::new();
        self.raw_text(&mut raw);
        normalize_whitespace(&raw)
    }
}

fn local_name(qname: &[u8]) -> String {
    let local = match qname.iter().rposition(|b| *b == b':') {
        Some(i) => &qname[i + 1..],
        None => qname,
    };
    String::from_utf8_lossy(local).into_owned()
}

fn start_element(start: &BytesStart<'_>, position: u64) -> Result<Element> {
    let mut attrs = Vec::new();
    for attr in start.attributes() {
        let attr = attr.map_err(|e| Error::MalformedXml {
            position,
            message: e.to_string(),
        })?;
        let value = attr
            .unescape_value()
            .map_err(|e| Error::MalformedXml {
                position,
                message: e.to_string(),
            })?
            .into_owned();
        attrs.push((local_name(attr.key.as_ref()), value));
    }
    Ok(Element {
        name: local_name(start.name().as_ref()),
        attrs,
        children: Vec::new(),
    })
}

/// Parses well-formed XML into an element tree rooted at the document element.
pub(crate) fn parse_tree(bytes: &[u8]) -> Result<Element> {
    let mut reader = Reader::from_reader(bytes);
    let mut buf = Vec::new();
    let mut stack: Vec<Element> = Vec::new();
    let mut root: Option<Element> = None;

    loop {
        let position = reader.buffer_position();
        let malformed = |message: String| Error::MalformedXml { position, message };
        let event = reader
            .read_event_into(&mut buf)
            .map_err(|e| Error::MalformedXml {
                position: reader.error_position(),
                message: e.to_string(),
            })?;
        match event {
            Event::Start(start) => stack.push(start_element(&start, position)?),
            Event::Empty(start) => {
                let element = start_element(&start, position)?;
                match stack.last_mut() {
                    Some(parent) => parent.children.push(Node::Element(element)),
                    None if root.is_none() => root = Some(element),
                    None => return Err(malformed("multiple root elements".into())),
                }
            }
            Event::End(_) => {
                let element = stack
                    .pop()
                    .ok_or_else(|| malformed("unexpected closing tag".into()))?;
                match stack.last_mut() {
                    Some(parent) => parent.children.push(Node::Element(element)),
                    None if root.is_none() => root = Some(element),
                    None => return Err(malformed("multiple root elements".into())),
                }
            }
            Event::Text(text) => {
                let text = text
                    .unescape()
                    .map_err(|e| malformed(e.to_string()))?
                    .into_owned();
                match stack.last_mut() {
                    Some(parent) => parent.children.push(Node::Text(text)),
                    None if text.trim().is_empty() => {}
                    None => return Err(malformed("text outside the root element".into())),
                }
            }
            Event::CData(data) => {
                let text = String::from_utf8(data.into_inner().into_owned())
                    .map_err(|e| malformed(e.to_string()))?;
                if let Some(parent) = stack.last_mut() {
                    parent.children.push(Node::Text(text));
                }
            }
            Event::Eof => break,
            Event::Decl(_) | Event::PI(_) | Event::Comment(_) | Event::DocType(_) => {}
        }
        buf.clear();
    }

    if let Some(open) = stack.last() {
        return Err(Error::MalformedXml {
            position: reader.buffer_position(),
            message: format!("unexpected end of input inside <{}>", open.name),
        });
    }
    root.ok_or_else(|| Error::MalformedXml {
        position: 0,
        message: "no root element".into(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct ParsedSection {
    pub heading: String,
    pub paragraphs: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct ParsedTei {
    pub metadata: PaperMetadata,
    pub abstract_paragraphs: Vec<String>,
    pub sections: Vec<ParsedSection>,
    pub side_records: Vec<SideRecord>,
}

fn iso_date(value: &str) -> Option<String> {
    static ISO: OnceLock<Regex> = OnceLock::new();
    let re = ISO.get_or_init(|| Regex::new(r"^\d{4}(-\d{2}(-\d{2})?)?$").unwrap());
    let value = value.trim();
    re.is_match(value).then(|| value.to_owned())
}

fn person_name(author: &Element) -> Option<String> {
    let pers = author.child("persName")?;
    let mut parts: Vec<String> = pers
        .children_named("forename")
        .map(Element::flat_text)
        .filter(|s| !s.is_empty())
        .collect();
    parts.extend(
        pers.children_named("surname")
            .map(Element::flat_text)
            .filter(|s| !s.is_empty()),
    );
    let name = parts.join(" ");
    (!name.is_empty()).then_some(name)
}

fn extract_metadata(header: Option<&Element>) -> (PaperMetadata, Vec<String>) {
    let mut meta = PaperMetadata::default();
    let mut abstract_paragraphs = Vec::new();
    let Some(header) = header else {
        return (meta, abstract_paragraphs);
    };

    if let Some(title_stmt) = header.path(&["fileDesc", "titleStmt"]) {
        let titles: Vec<&Element> = title_stmt.children_named("title").collect();
        let main = titles
            .iter()
            .find(|t| t.attr("type") == Some("main"))
            .or_else(|| titles.first());
        if let Some(t) = main {
            meta.title = t.flat_text();
        }
    }

    meta.date = header
        .path(&["fileDesc", "publicationStmt", "date"])
        .and_then(|d| d.attr("when").and_then(iso_date));

    if let Some(bibl) = header.path(&["fileDesc", "sourceDesc", "biblStruct"]) {
        let holder = bibl
            .child("analytic")
            .filter(|a| a.child("author").is_some())
            .or_else(|| bibl.child("monogr"));
        if let Some(holder) = holder {
            meta.authors = holder.children_named("author").filter_map(person_name).collect();
        }
        let mut idnos = Vec::new();
        bibl.descendants("idno", &mut idnos);
        meta.doi = idnos
            .iter()
            .find(|i| i.attr("type").is_some_and(|t| t.eq_ignore_ascii_case("doi")))
            .map(|i| i.flat_text())
            .filter(|s| !s.is_empty());
        if meta.date.is_none() {
            meta.date = bibl
                .path(&["monogr", "imprint", "date"])
                .and_then(|d| d.attr("when").and_then(iso_date));
        }
    }

    if let Some(abs) = header.path(&["profileDesc", "abstract"]) {
        let mut ps = Vec::new();
        abs.descendants("p", &mut ps);
        abstract_paragraphs = ps
            .iter()
            .map(|p| p.flat_text())
            .filter(|t| !t.is_empty())
            .collect();
        if abstract_paragraphs.is_empty() {
            let text = abs.flat_text();
            if !text.is_empty() {
                abstract_paragraphs.push(text);
            }
        }
        meta.abstract_text = abstract_paragraphs.join("\n\n");
    }
    (meta, abstract_paragraphs)
}

fn side_record(kind: SideKind, e: &Element) -> SideRecord {
    SideRecord {
        kind,
        label: e.attr("id").map(str::to_owned),
        text: e.flat_text(),
    }
}

fn collect_div(div: &Element, sections: &mut Vec<ParsedSection>, side: &mut Vec<SideRecord>) {
    let mut section = ParsedSection {
        heading: String::new(),
        paragraphs: Vec::new(),
    };
    let mut nested = Vec::new();
    for child in div.elements() {
        match child.name.as_str() {
            "head" if section.heading.is_empty() => section.heading = child.flat_text(),
            "p" => {
                let text = child.flat_text();
                if !text.is_empty() {
                    section.paragraphs.push(text);
                }
            }
            "figure" => {
                let kind = if child.attr("type") == Some("table") {
                    SideKind::Table
                } else {
                    SideKind::Figure
                };
                side.push(side_record(kind, child));
            }
            "formula" => side.push(side_record(SideKind::Formula, child)),
            "div" => nested.push(child),
            _ => {}
        }
    }
    sections.push(section);
    for d in nested {
        collect_div(d, sections, side);
    }
}

pub(crate) fn parse_tei(bytes: &[u8]) -> Result<ParsedTei> {
    let root = parse_tree(bytes)?;
    if root.name != "TEI" {
        return Err(Error::NotTei(format!("root element is <{}>", root.name)));
    }
    let (metadata, abstract_paragraphs) = extract_metadata(root.child("teiHeader"));

    let mut sections = Vec::new();
    let mut side_records = Vec::new();
    if let Some(body) = root.path(&["text", "body"]) {
        let mut loose: Option<ParsedSection> = None;
        for child in body.elements() {
            match child.name.as_str() {
                "div" => {
                    if let Some(s) = loose.take() {
                        sections.push(s);
                    }
                    collect_div(child, &mut sections, &mut side_records);
                }
                "p" => {
                    let text = child.flat_text();
                    if !text.is_empty() {
                        loose
                            .get_or_insert_with(|| ParsedSection {
                                heading: String::new(),
                                paragraphs: Vec::new(),
                            })
                            .paragraphs
                            .push(text);
                    }
                }
                "figure" => {
                    let kind = if child.attr("type") == Some("table") {
                        SideKind::Table
                    } else {
                        SideKind::Figure
                    };
                    side_records.push(side_record(kind, child));
                }
                "formula" => side_records.push(side_record(SideKind::Formula, child)),
                _ => {}
            }
        }
        if let Some(s) = loose.take() {
            sections.push(s);
        }
    }
    if sections.iter().all(|s| s.paragraphs.is_empty()) {
        return Err(Error::EmptyDocument);
    }

    if let Some(back) = root.path(&["text", "back"]) {
        let mut bibls = Vec::new();
        back.descendants("biblStruct", &mut bibls);
        side_records.extend(bibls.into_iter().map(|b| side_record(SideKind::Reference, b)));
    }

    Ok(ParsedTei {
        metadata,
        abstract_paragraphs,
        sections,
        side_records,
    })
}
